//! Systems of optically isolated diffractive networks and incoherent
//! ensembles of independently trained systems.
//!
//! Every network of a system sees an identical copy of the input field and
//! is evaluated independently; there is no electromagnetic coupling between
//! networks. Detector signals from all planes are routed into per-class
//! vectors and turned into scores by the scheme the architecture dictates.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::derive_seed;
use crate::detector::{
    differential_plane_layout, uniform_plane_layout, DetectorLayout, DetectorSign,
    DEFAULT_DETECTOR_WIDTH,
};
use crate::error::{Error, Result};
use crate::field::{ComplexField, DEFAULT_PITCH};
use crate::network::{CapturedStages, DiffractiveNetwork, PhaseLayer, PHASE_INIT_STD};
use crate::notation::ArchitectureSpec;
use crate::propagate::PropagationGeometry;
use crate::scores::{
    differential_backward, differential_scores, generalized_backward, generalized_scores,
    nondifferential_backward, nondifferential_scores, ClassScores, DetectorCoefficients,
};

/// Geometry shared by every network of a system.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryConfig {
    pub pitch: f64,
    pub propagation: PropagationGeometry,
    /// Input plane to first layer.
    pub input_distance: f64,
    /// Last layer to output plane.
    pub output_distance: f64,
    pub detector_width: f64,
    /// Std of the Gaussian phase initialization, radians.
    pub phase_init_std: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        let propagation = PropagationGeometry::default();
        Self {
            pitch: DEFAULT_PITCH,
            input_distance: propagation.layer_spacing,
            output_distance: propagation.layer_spacing,
            detector_width: DEFAULT_DETECTOR_WIDTH,
            phase_init_std: PHASE_INIT_STD,
            propagation,
        }
    }
}

/// Where a class reads its signals: (plane index, region index).
#[derive(Debug, Clone, Copy)]
struct SignalSource {
    plane: usize,
    region: usize,
}

#[derive(Debug, Clone)]
enum Routing {
    /// class → single-detector source
    Single(Vec<SignalSource>),
    /// class → (positive source, negative source)
    Differential(Vec<(SignalSource, SignalSource)>),
}

/// One jointly trained classifier: N (or 2N) optically isolated networks
/// plus their detector layouts and optional readout coefficients.
#[derive(Debug, Clone)]
pub struct NetworkSystem {
    spec: ArchitectureSpec,
    networks: Vec<DiffractiveNetwork>,
    layouts: Vec<DetectorLayout>,
    coefficients: Option<DetectorCoefficients>,
    routing: Routing,
}

/// Default detector layouts for an architecture: one layout per network
/// plane, classes grouped contiguously.
pub fn default_layouts(
    spec: &ArchitectureSpec,
    grid_size: usize,
    pitch: f64,
    detector_width: f64,
) -> Result<Vec<DetectorLayout>> {
    let mut layouts = Vec::with_capacity(spec.n_networks);
    if spec.split_planes {
        // positive planes first, then the mirrored negative planes with the
        // same positions, so identical networks give identical pair signals
        for group in 0..spec.groups() {
            let classes: Vec<usize> = spec.classes_of_group(group).collect();
            layouts.push(uniform_plane_layout(
                group,
                &classes,
                DetectorSign::Positive,
                grid_size,
                pitch,
                detector_width,
            )?);
        }
        for group in 0..spec.groups() {
            let classes: Vec<usize> = spec.classes_of_group(group).collect();
            layouts.push(uniform_plane_layout(
                spec.groups() + group,
                &classes,
                DetectorSign::Negative,
                grid_size,
                pitch,
                detector_width,
            )?);
        }
    } else if spec.is_differential() {
        for group in 0..spec.groups() {
            let classes: Vec<usize> = spec.classes_of_group(group).collect();
            layouts.push(differential_plane_layout(
                group,
                &classes,
                grid_size,
                pitch,
                detector_width,
            )?);
        }
    } else {
        for group in 0..spec.groups() {
            let classes: Vec<usize> = spec.classes_of_group(group).collect();
            layouts.push(uniform_plane_layout(
                group,
                &classes,
                DetectorSign::Single,
                grid_size,
                pitch,
                detector_width,
            )?);
        }
    }
    Ok(layouts)
}

fn build_routing(spec: &ArchitectureSpec, layouts: &[DetectorLayout]) -> Result<Routing> {
    let find = |class: usize, plane: usize, sign: DetectorSign| -> Result<SignalSource> {
        let layout = layouts
            .get(plane)
            .ok_or_else(|| Error::Config(format!("no layout for plane {plane}")))?;
        let matches: Vec<usize> = layout
            .regions()
            .iter()
            .enumerate()
            .filter(|(_, r)| r.class_id == class && r.sign == sign)
            .map(|(i, _)| i)
            .collect();
        match matches.as_slice() {
            [region] => Ok(SignalSource {
                plane,
                region: *region,
            }),
            [] => Err(Error::Layout(format!(
                "plane {plane} has no {sign} detector for class {class}"
            ))),
            _ => Err(Error::Layout(format!(
                "plane {plane} has {} {sign} detectors for class {class}, expected exactly one",
                matches.len()
            ))),
        }
    };
    if spec.is_differential() {
        let mut pairs = Vec::with_capacity(spec.num_classes);
        for class in 0..spec.num_classes {
            let pos_plane = spec.positive_network_of(class);
            let neg_plane = spec
                .negative_network_of(class)
                .expect("differential design");
            pairs.push((
                find(class, pos_plane, DetectorSign::Positive)?,
                find(class, neg_plane, DetectorSign::Negative)?,
            ));
        }
        Ok(Routing::Differential(pairs))
    } else {
        let mut singles = Vec::with_capacity(spec.num_classes);
        for class in 0..spec.num_classes {
            singles.push(find(class, spec.positive_network_of(class), DetectorSign::Single)?);
        }
        Ok(Routing::Single(singles))
    }
}

/// Build a system from an architecture spec: every network is initialized
/// with its own Gaussian(0, 0.2π) phases drawn from a per-network stream of
/// the master seed, and detectors are placed by [`default_layouts`].
pub fn instantiate(
    spec: &ArchitectureSpec,
    geometry: &GeometryConfig,
    seed: u64,
) -> Result<NetworkSystem> {
    let layouts = default_layouts(
        spec,
        spec.grid_size()?,
        geometry.pitch,
        geometry.detector_width,
    )?;
    instantiate_with_layouts(spec, geometry, seed, layouts, false)
}

/// [`instantiate`] with explicit detector layouts and, optionally,
/// learnable readout coefficients initialized from the seed.
pub fn instantiate_with_layouts(
    spec: &ArchitectureSpec,
    geometry: &GeometryConfig,
    seed: u64,
    layouts: Vec<DetectorLayout>,
    learnable_coefficients: bool,
) -> Result<NetworkSystem> {
    let grid_size = spec.grid_size()?;
    if layouts.len() != spec.n_networks {
        return Err(Error::Config(format!(
            "{} layouts supplied for {} networks",
            layouts.len(),
            spec.n_networks
        )));
    }
    let mut networks = Vec::with_capacity(spec.n_networks);
    for net_idx in 0..spec.n_networks {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "phases", net_idx as u64));
        let layers: Vec<PhaseLayer> = (0..spec.layers_per_network)
            .map(|_| PhaseLayer::random(grid_size, geometry.phase_init_std, &mut rng))
            .collect();
        networks.push(DiffractiveNetwork::new(
            layers,
            geometry.propagation,
            geometry.input_distance,
            geometry.output_distance,
        )?);
    }
    let coefficients = if learnable_coefficients {
        if !spec.is_differential() {
            return Err(Error::Config(
                "learnable coefficients require a differential design".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "coefficients", 0));
        use rand::Rng;
        let mut draw = |_: usize| 0.5 + rng.random::<f64>();
        Some(DetectorCoefficients {
            p: (0..spec.num_classes).map(&mut draw).collect(),
            n: (0..spec.num_classes).map(&mut draw).collect(),
            learnable: true,
        })
    } else {
        None
    };
    NetworkSystem::new(spec.clone(), networks, layouts, coefficients)
}

/// Per-sample gradients of a system's trainable parameters.
#[derive(Debug, Clone)]
pub struct SystemGradients {
    /// network → layer → flat phase gradient
    pub phases: Vec<Vec<Vec<f64>>>,
    pub coeff_p: Option<Vec<f64>>,
    pub coeff_n: Option<Vec<f64>>,
}

impl SystemGradients {
    pub fn zeros_like(system: &NetworkSystem) -> Self {
        let phases = system
            .networks
            .iter()
            .map(|net| {
                net.layers()
                    .iter()
                    .map(|l| vec![0.0; l.phase().len()])
                    .collect()
            })
            .collect();
        let (coeff_p, coeff_n) = match &system.coefficients {
            Some(c) if c.learnable => (
                Some(vec![0.0; c.num_classes()]),
                Some(vec![0.0; c.num_classes()]),
            ),
            _ => (None, None),
        };
        Self {
            phases,
            coeff_p,
            coeff_n,
        }
    }

    pub fn accumulate(&mut self, other: &SystemGradients) {
        for (a, b) in self.phases.iter_mut().zip(&other.phases) {
            for (la, lb) in a.iter_mut().zip(b) {
                for (x, y) in la.iter_mut().zip(lb) {
                    *x += y;
                }
            }
        }
        if let (Some(a), Some(b)) = (self.coeff_p.as_mut(), other.coeff_p.as_ref()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        if let (Some(a), Some(b)) = (self.coeff_n.as_mut(), other.coeff_n.as_ref()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for net in &mut self.phases {
            for layer in net {
                for g in layer {
                    *g *= factor;
                }
            }
        }
        for opt in [self.coeff_p.as_mut(), self.coeff_n.as_mut()]
            .into_iter()
            .flatten()
        {
            for g in opt {
                *g *= factor;
            }
        }
    }
}

/// Detector signals of every plane plus the resulting scores.
#[derive(Debug, Clone)]
pub struct SystemReadout {
    pub scores: ClassScores,
    /// plane → region signals, in layout region order.
    pub plane_signals: Vec<Vec<f64>>,
}

impl NetworkSystem {
    pub fn new(
        spec: ArchitectureSpec,
        networks: Vec<DiffractiveNetwork>,
        layouts: Vec<DetectorLayout>,
        coefficients: Option<DetectorCoefficients>,
    ) -> Result<Self> {
        if networks.len() != spec.n_networks {
            return Err(Error::Config(format!(
                "{} networks supplied, spec wants {}",
                networks.len(),
                spec.n_networks
            )));
        }
        if layouts.len() != networks.len() {
            return Err(Error::Config(format!(
                "{} layouts supplied for {} networks",
                layouts.len(),
                networks.len()
            )));
        }
        if let Some(c) = &coefficients {
            if c.num_classes() != spec.num_classes {
                return Err(Error::Config(format!(
                    "coefficients cover {} classes, dataset has {}",
                    c.num_classes(),
                    spec.num_classes
                )));
            }
        }
        let routing = build_routing(&spec, &layouts)?;
        Ok(Self {
            spec,
            networks,
            layouts,
            coefficients,
            routing,
        })
    }

    pub fn spec(&self) -> &ArchitectureSpec {
        &self.spec
    }

    pub fn networks(&self) -> &[DiffractiveNetwork] {
        &self.networks
    }

    pub fn networks_mut(&mut self) -> &mut [DiffractiveNetwork] {
        &mut self.networks
    }

    pub fn layouts(&self) -> &[DetectorLayout] {
        &self.layouts
    }

    pub fn coefficients(&self) -> Option<&DetectorCoefficients> {
        self.coefficients.as_ref()
    }

    pub fn coefficients_mut(&mut self) -> Option<&mut DetectorCoefficients> {
        self.coefficients.as_mut()
    }

    pub fn grid_size(&self) -> usize {
        self.networks
            .first()
            .and_then(|n| n.grid_size())
            .unwrap_or(0)
    }

    /// Detector signals of every plane for one input field. Every network
    /// receives an identical copy of the input.
    pub fn detector_signals(&self, input: &ComplexField) -> Result<Vec<Vec<f64>>> {
        self.networks
            .iter()
            .zip(&self.layouts)
            .map(|(net, layout)| layout.read(&net.forward(input)?))
            .collect()
    }

    fn scores_from_signals(
        &self,
        plane_signals: &[Vec<f64>],
        temperature: f64,
    ) -> Result<ClassScores> {
        match &self.routing {
            Routing::Single(sources) => {
                let signals: Vec<f64> = sources
                    .iter()
                    .map(|s| plane_signals[s.plane][s.region])
                    .collect();
                nondifferential_scores(&signals, temperature)
            }
            Routing::Differential(pairs) => {
                let pos: Vec<f64> = pairs
                    .iter()
                    .map(|(p, _)| plane_signals[p.plane][p.region])
                    .collect();
                let neg: Vec<f64> = pairs
                    .iter()
                    .map(|(_, n)| plane_signals[n.plane][n.region])
                    .collect();
                match &self.coefficients {
                    Some(c) => generalized_scores(&pos, &neg, c, temperature),
                    None => differential_scores(&pos, &neg, temperature),
                }
            }
        }
    }

    /// Class scores for one input at the given training temperature.
    pub fn forward(&self, input: &ComplexField, temperature: f64) -> Result<ClassScores> {
        Ok(self.forward_readout(input, temperature)?.scores)
    }

    /// Like [`NetworkSystem::forward`] but also returns the raw per-plane
    /// detector signals.
    pub fn forward_readout(&self, input: &ComplexField, temperature: f64) -> Result<SystemReadout> {
        let plane_signals = self.detector_signals(input)?;
        let scores = self.scores_from_signals(&plane_signals, temperature)?;
        Ok(SystemReadout {
            scores,
            plane_signals,
        })
    }

    /// Output-plane fields of every network (for rendering).
    pub fn output_fields(&self, input: &ComplexField) -> Result<Vec<ComplexField>> {
        self.networks.iter().map(|n| n.forward(input)).collect()
    }

    /// Forward pass, softmax cross-entropy loss against `label`, and the
    /// full backward pass through scores, detectors and every network.
    pub fn loss_and_gradients(
        &self,
        input: &ComplexField,
        label: usize,
        temperature: f64,
    ) -> Result<(f64, SystemGradients)> {
        if label >= self.spec.num_classes {
            return Err(Error::Config(format!(
                "label {label} out of range for {} classes",
                self.spec.num_classes
            )));
        }
        // forward with captured stages
        let mut outputs = Vec::with_capacity(self.networks.len());
        let mut stages: Vec<CapturedStages> = Vec::with_capacity(self.networks.len());
        for net in &self.networks {
            let (out, st) = net.forward_captured(input)?;
            outputs.push(out);
            stages.push(st);
        }
        let plane_signals: Vec<Vec<f64>> = outputs
            .iter()
            .zip(&self.layouts)
            .map(|(field, layout)| layout.read(field))
            .collect::<Result<_>>()?;
        let scores = self.scores_from_signals(&plane_signals, temperature)?;

        let loss = crate::train::softmax_cross_entropy(scores.scaled(), label)?;
        let d_scaled = crate::train::softmax_cross_entropy_grad(scores.scaled(), label);
        // scaled = raw / T
        let d_raw: Vec<f64> = d_scaled.iter().map(|g| g / temperature).collect();

        // scores → per-region signal gradients
        let mut plane_signal_grads: Vec<Vec<f64>> = plane_signals
            .iter()
            .map(|s| vec![0.0; s.len()])
            .collect();
        let mut coeff_grads = None;
        match &self.routing {
            Routing::Single(sources) => {
                let signals: Vec<f64> = sources
                    .iter()
                    .map(|s| plane_signals[s.plane][s.region])
                    .collect();
                let d_signals = nondifferential_backward(&signals, &d_raw);
                for (src, g) in sources.iter().zip(d_signals) {
                    plane_signal_grads[src.plane][src.region] += g;
                }
            }
            Routing::Differential(pairs) => {
                let pos: Vec<f64> = pairs
                    .iter()
                    .map(|(p, _)| plane_signals[p.plane][p.region])
                    .collect();
                let neg: Vec<f64> = pairs
                    .iter()
                    .map(|(_, n)| plane_signals[n.plane][n.region])
                    .collect();
                let (d_pos, d_neg) = match &self.coefficients {
                    Some(c) => {
                        let grads = generalized_backward(&pos, &neg, c, &d_raw);
                        if c.learnable {
                            coeff_grads = Some((grads.d_p, grads.d_n));
                        }
                        (grads.d_pos, grads.d_neg)
                    }
                    None => differential_backward(&pos, &neg, &d_raw),
                };
                for ((p_src, n_src), (gp, gn)) in
                    pairs.iter().zip(d_pos.iter().zip(&d_neg))
                {
                    plane_signal_grads[p_src.plane][p_src.region] += gp;
                    plane_signal_grads[n_src.plane][n_src.region] += gn;
                }
            }
        }

        // signal gradients → output-plane field cotangents → phase gradients
        let mut phase_grads = Vec::with_capacity(self.networks.len());
        for (idx, net) in self.networks.iter().enumerate() {
            let field = &outputs[idx];
            let n = field.grid_size();
            let mut cot = vec![Complex64::new(0.0, 0.0); n * n];
            for (region, &g) in self.layouts[idx]
                .regions()
                .iter()
                .zip(&plane_signal_grads[idx])
            {
                if g == 0.0 {
                    continue;
                }
                // d|u|²/du in the g = ∂L/∂Re + i·∂L/∂Im convention is 2u
                let (rows, cols) = region.sample_rect(n, field.pitch());
                for row in rows {
                    for col in cols.clone() {
                        cot[row * n + col] += 2.0 * g * field.get(row, col);
                    }
                }
            }
            let cot_field = ComplexField::from_values(cot, n, field.pitch())?;
            let (_, grads) = net.adjoint_backward(&cot_field, &stages[idx])?;
            phase_grads.push(grads);
        }

        Ok((
            loss,
            SystemGradients {
                phases: phase_grads,
                coeff_p: coeff_grads.as_ref().map(|(p, _)| p.clone()),
                coeff_n: coeff_grads.map(|(_, n)| n),
            },
        ))
    }
}

/// Independently trained replicas whose output intensities add up
/// incoherently on a common detector plane.
#[derive(Debug, Clone)]
pub struct EnsembleSystem {
    units: Vec<NetworkSystem>,
}

impl EnsembleSystem {
    /// All units must share one detector layout (and therefore one spec
    /// geometry); detector signals are summed per region, never fields.
    pub fn new(units: Vec<NetworkSystem>) -> Result<Self> {
        let first = units
            .first()
            .ok_or_else(|| Error::Config("ensemble needs at least one unit".into()))?;
        for (i, unit) in units.iter().enumerate().skip(1) {
            if unit.layouts != first.layouts {
                return Err(Error::Config(format!(
                    "ensemble unit {i} has a different detector layout than unit 0"
                )));
            }
            if unit.spec != first.spec {
                return Err(Error::Config(format!(
                    "ensemble unit {i} has a different architecture than unit 0"
                )));
            }
        }
        Ok(Self { units })
    }

    pub fn units(&self) -> &[NetworkSystem] {
        &self.units
    }

    /// Summed per-plane detector signals: unit signals are evaluated
    /// sequentially and added per region, which is exactly the incoherent
    /// intensity sum a shared output plane would measure.
    pub fn detector_signals(&self, input: &ComplexField) -> Result<Vec<Vec<f64>>> {
        let mut total: Option<Vec<Vec<f64>>> = None;
        for unit in &self.units {
            let signals = unit.detector_signals(input)?;
            match &mut total {
                None => total = Some(signals),
                Some(acc) => {
                    for (a, s) in acc.iter_mut().zip(&signals) {
                        for (x, y) in a.iter_mut().zip(s) {
                            *x += y;
                        }
                    }
                }
            }
        }
        Ok(total.expect("at least one unit"))
    }

    pub fn forward(&self, input: &ComplexField, temperature: f64) -> Result<ClassScores> {
        let signals = self.detector_signals(input)?;
        self.units[0].scores_from_signals(&signals, temperature)
    }
}

/// One saved model of one ensemble unit, with its validation statistics
/// cached so combination search never re-runs the optics.
#[derive(Debug, Clone)]
pub struct EnsembleCandidate {
    /// Checkpoint label (e.g. epoch number) for reporting.
    pub tag: usize,
    pub solo_val_accuracy: f64,
    /// sample → plane → region signals on the validation set.
    pub val_signals: Vec<Vec<Vec<f64>>>,
}

/// Chosen checkpoint per unit plus the ensemble validation accuracy.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSelection {
    pub chosen: Vec<usize>,
    pub val_accuracy: f64,
}

/// Pick one checkpoint per unit maximizing the joint validation accuracy.
/// Only the `top_k` checkpoints of each unit (by solo validation accuracy)
/// are searched; ties prefer the earlier checkpoint and the
/// lexicographically first combination.
pub fn select_ensemble(
    reference: &NetworkSystem,
    candidates_per_unit: &[Vec<EnsembleCandidate>],
    val_labels: &[usize],
    top_k: usize,
) -> Result<EnsembleSelection> {
    if candidates_per_unit.is_empty() || candidates_per_unit.iter().any(|c| c.is_empty()) {
        return Err(Error::Config(
            "every ensemble unit needs at least one candidate checkpoint".into(),
        ));
    }
    if top_k == 0 {
        return Err(Error::Config("top_k must be positive".into()));
    }
    for unit in candidates_per_unit {
        for cand in unit {
            if cand.val_signals.len() != val_labels.len() {
                return Err(Error::Config(format!(
                    "candidate {} caches {} validation samples, expected {}",
                    cand.tag,
                    cand.val_signals.len(),
                    val_labels.len()
                )));
            }
        }
    }

    // retain the top_k per unit by solo accuracy (stable: earlier wins ties)
    let retained: Vec<Vec<usize>> = candidates_per_unit
        .iter()
        .map(|cands| {
            let mut order: Vec<usize> = (0..cands.len()).collect();
            order.sort_by(|&a, &b| {
                cands[b]
                    .solo_val_accuracy
                    .partial_cmp(&cands[a].solo_val_accuracy)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.cmp(&b))
            });
            order.truncate(top_k);
            order.sort_unstable();
            order
        })
        .collect();

    let mut best: Option<EnsembleSelection> = None;
    let mut combo = vec![0usize; retained.len()];
    loop {
        let chosen: Vec<usize> = combo
            .iter()
            .zip(&retained)
            .map(|(&i, options)| options[i])
            .collect();
        let accuracy =
            ensemble_accuracy(reference, candidates_per_unit, &chosen, val_labels)?;
        if best.as_ref().is_none_or(|b| accuracy > b.val_accuracy) {
            best = Some(EnsembleSelection {
                chosen,
                val_accuracy: accuracy,
            });
        }
        // advance the mixed-radix counter
        let mut pos = combo.len();
        loop {
            if pos == 0 {
                return Ok(best.expect("at least one combination"));
            }
            pos -= 1;
            combo[pos] += 1;
            if combo[pos] < retained[pos].len() {
                break;
            }
            combo[pos] = 0;
        }
    }
}

fn ensemble_accuracy(
    reference: &NetworkSystem,
    candidates_per_unit: &[Vec<EnsembleCandidate>],
    chosen: &[usize],
    val_labels: &[usize],
) -> Result<f64> {
    let mut correct = 0usize;
    for (sample, &label) in val_labels.iter().enumerate() {
        let mut summed: Option<Vec<Vec<f64>>> = None;
        for (unit, &pick) in candidates_per_unit.iter().zip(chosen) {
            let signals = &unit[pick].val_signals[sample];
            match &mut summed {
                None => summed = Some(signals.clone()),
                Some(acc) => {
                    for (a, s) in acc.iter_mut().zip(signals) {
                        for (x, y) in a.iter_mut().zip(s) {
                            *x += y;
                        }
                    }
                }
            }
        }
        let scores = reference.scores_from_signals(&summed.expect("units"), 1.0)?;
        if crate::scores::predict(&scores) == label {
            correct += 1;
        }
    }
    Ok(correct as f64 / val_labels.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::notation::parse_notation;

    fn small_spec(text: &str) -> ArchitectureSpec {
        parse_notation(text, 10).unwrap()
    }

    fn small_geometry() -> GeometryConfig {
        GeometryConfig {
            propagation: PropagationGeometry {
                layer_spacing: 5.0,
                ..Default::default()
            },
            input_distance: 5.0,
            output_distance: 5.0,
            detector_width: 1.5,
            ..Default::default()
        }
    }

    fn plane_wave(n: usize) -> ComplexField {
        ComplexField::uniform(n, 0.5, Complex64::new(1.0, 0.0)).unwrap()
    }

    #[test]
    fn instantiation_is_deterministic() {
        let spec = small_spec("D([10,0],[1,2,1024])");
        let geom = small_geometry();
        let a = instantiate(&spec, &geom, 99).unwrap();
        let b = instantiate(&spec, &geom, 99).unwrap();
        for (na, nb) in a.networks().iter().zip(b.networks()) {
            for (la, lb) in na.layers().iter().zip(nb.layers()) {
                assert_eq!(la.phase(), lb.phase());
            }
        }
        let c = instantiate(&spec, &geom, 100).unwrap();
        assert_ne!(
            a.networks()[0].layers()[0].phase(),
            c.networks()[0].layers()[0].phase()
        );
    }

    #[test]
    fn networks_of_a_system_differ() {
        let spec = small_spec("D([5,5],[2,2,1024])");
        let system = instantiate(&spec, &small_geometry(), 1).unwrap();
        assert_eq!(system.networks().len(), 2);
        assert_ne!(
            system.networks()[0].layers()[0].phase(),
            system.networks()[1].layers()[0].phase()
        );
    }

    #[test]
    fn nondifferential_system_reduces_to_plain_scores() {
        let spec = small_spec("D([10,0],[1,2,1024])");
        let system = instantiate(&spec, &small_geometry(), 5).unwrap();
        let input = plane_wave(32);
        let readout = system.forward_readout(&input, 0.1).unwrap();
        let direct = nondifferential_scores(&readout.plane_signals[0], 0.1).unwrap();
        assert_eq!(readout.scores, direct);
    }

    #[test]
    fn split_zero_phase_networks_balance_exactly() {
        let spec = small_spec("D([1][1],[20,1,1024])");
        let geom = small_geometry();
        let mut system = instantiate(&spec, &geom, 3).unwrap();
        for net in system.networks_mut() {
            for layer in net.layers_mut() {
                layer.phase_mut().fill(0.0);
            }
        }
        let input = ComplexField::from_fn(32, 0.5, |r, c| {
            Complex64::new((r as f64 * 0.2).sin() + 1.5, (c as f64 * 0.1).cos())
        })
        .unwrap();
        let scores = system.forward(&input, 0.1).unwrap();
        for &raw in scores.raw() {
            assert_eq!(raw, 0.0, "identical networks with identical layouts");
        }
    }

    #[test]
    fn perturbing_one_network_leaves_other_planes_untouched() {
        let spec = small_spec("D([5,5],[2,2,1024])");
        let system = instantiate(&spec, &small_geometry(), 17).unwrap();
        let input = plane_wave(32);
        let before = system.detector_signals(&input).unwrap();

        let mut perturbed = system.clone();
        perturbed.networks_mut()[0].layers_mut()[1].phase_mut()[100] += 0.37;
        let after = perturbed.detector_signals(&input).unwrap();

        assert_eq!(before[1], after[1], "plane 1 must be bit-identical");
        assert_ne!(before[0], after[0], "plane 0 must react");
    }

    #[test]
    fn ensemble_of_one_matches_system_forward() {
        let spec = small_spec("D([10,10],[1,2,1024])");
        let system = instantiate(&spec, &small_geometry(), 8).unwrap();
        let ensemble = EnsembleSystem::new(vec![system.clone()]).unwrap();
        let input = plane_wave(32);
        assert_eq!(
            ensemble.forward(&input, 0.1).unwrap(),
            system.forward(&input, 0.1).unwrap()
        );
    }

    #[test]
    fn k_copies_scale_signals_and_keep_predictions() {
        let spec = small_spec("D([10,10],[1,2,1024])");
        let system = instantiate(&spec, &small_geometry(), 9).unwrap();
        let input = plane_wave(32);
        let single = system.detector_signals(&input).unwrap();
        let triple = EnsembleSystem::new(vec![system.clone(), system.clone(), system.clone()])
            .unwrap();
        let summed = triple.detector_signals(&input).unwrap();
        for (p_single, p_triple) in single.iter().zip(&summed) {
            for (s, t) in p_single.iter().zip(p_triple) {
                assert!((t - 3.0 * s).abs() <= 1e-12 * t.abs().max(1e-300));
            }
        }
        let p1 = crate::scores::predict(&system.forward(&input, 0.1).unwrap());
        let p3 = crate::scores::predict(&triple.forward(&input, 0.1).unwrap());
        assert_eq!(p1, p3);
    }

    #[test]
    fn mismatched_ensemble_layouts_are_rejected() {
        let a = instantiate(&small_spec("D([10,10],[1,2,1024])"), &small_geometry(), 1).unwrap();
        let mut geom = small_geometry();
        geom.detector_width = 2.0;
        let b = instantiate(&small_spec("D([10,10],[1,2,1024])"), &geom, 1).unwrap();
        assert!(EnsembleSystem::new(vec![a, b]).is_err());
    }

    #[test]
    fn selection_prefers_better_checkpoints() {
        let spec = small_spec("D([10,0],[1,1,1024])");
        let system = instantiate(&spec, &small_geometry(), 2).unwrap();
        // synthetic candidates: candidate 1 puts all light on the true class
        let labels = vec![0usize, 1, 2];
        let mk_signals = |good: bool| -> Vec<Vec<Vec<f64>>> {
            labels
                .iter()
                .map(|&l| {
                    let mut per_region = vec![0.1; 10];
                    if good {
                        per_region[l] = 1.0;
                    } else {
                        per_region[(l + 1) % 10] = 1.0;
                    }
                    vec![per_region]
                })
                .collect()
        };
        let candidates = vec![vec![
            EnsembleCandidate {
                tag: 0,
                solo_val_accuracy: 0.0,
                val_signals: mk_signals(false),
            },
            EnsembleCandidate {
                tag: 1,
                solo_val_accuracy: 1.0,
                val_signals: mk_signals(true),
            },
        ]];
        let sel = select_ensemble(&system, &candidates, &labels, 3).unwrap();
        assert_eq!(sel.chosen, vec![1]);
        assert_eq!(sel.val_accuracy, 1.0);

        // with top_k = 1 only the best solo candidate is searched
        let sel1 = select_ensemble(&system, &candidates, &labels, 1).unwrap();
        assert_eq!(sel1.chosen, vec![1]);
    }

    #[test]
    fn selection_counts_combinations() {
        // 2 units × top-3 of 5 candidates → exactly 9 combinations, and the
        // result must beat or match every singleton that was searched.
        let spec = small_spec("D([10,0],[1,1,1024])");
        let system = instantiate(&spec, &small_geometry(), 2).unwrap();
        let labels: Vec<usize> = (0..10).map(|i| i % 10).collect();
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mk_unit = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<EnsembleCandidate> {
            (0..5)
                .map(|tag| {
                    let val_signals: Vec<Vec<Vec<f64>>> = labels
                        .iter()
                        .map(|&l| {
                            let mut sig = vec![0.0; 10];
                            for s in sig.iter_mut() {
                                *s = rng.random::<f64>() * 0.5;
                            }
                            if rng.random::<f64>() < 0.6 {
                                sig[l] += 0.6;
                            }
                            vec![sig]
                        })
                        .collect();
                    EnsembleCandidate {
                        tag,
                        solo_val_accuracy: rng.random::<f64>(),
                        val_signals,
                    }
                })
                .collect()
        };
        let candidates = vec![mk_unit(&mut rng), mk_unit(&mut rng)];
        let sel = select_ensemble(&system, &candidates, &labels, 3).unwrap();
        assert!(sel.val_accuracy >= 0.0 && sel.val_accuracy <= 1.0);
        assert_eq!(sel.chosen.len(), 2);
    }
}
