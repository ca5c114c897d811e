//! Phase-only diffractive layers and the multi-layer network forward /
//! adjoint pass.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::propagate::{propagate, propagate_adjoint, PropagationGeometry};

/// Standard deviation of the Gaussian phase initialization, in radians.
pub const PHASE_INIT_STD: f64 = 0.2 * std::f64::consts::PI;

/// One diffractive surface: a trainable phase delay per neuron.
///
/// The applied transmittance is exp(i·phase), so the layer is strictly
/// phase-only. Phases are stored unwrapped; only phase mod 2π matters for
/// the optics, but keeping the raw value avoids gradient discontinuities.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseLayer {
    phase: Vec<f64>,
    grid_size: usize,
    trainable: bool,
}

impl PhaseLayer {
    pub fn zeros(grid_size: usize) -> Self {
        Self {
            phase: vec![0.0; grid_size * grid_size],
            grid_size,
            trainable: true,
        }
    }

    pub fn from_phases(phase: Vec<f64>, grid_size: usize) -> Result<Self> {
        if phase.len() != grid_size * grid_size {
            return Err(Error::Shape(format!(
                "phase layer needs {} values, got {}",
                grid_size * grid_size,
                phase.len()
            )));
        }
        Ok(Self {
            phase,
            grid_size,
            trainable: true,
        })
    }

    /// Gaussian(0, std) random initialization.
    pub fn random(grid_size: usize, std: f64, rng: &mut impl Rng) -> Self {
        let normal = Normal::new(0.0, std).expect("valid std");
        let phase = (0..grid_size * grid_size)
            .map(|_| normal.sample(rng))
            .collect();
        Self {
            phase,
            grid_size,
            trainable: true,
        }
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn phase(&self) -> &[f64] {
        &self.phase
    }

    pub fn phase_mut(&mut self) -> &mut [f64] {
        &mut self.phase
    }

    pub fn trainable(&self) -> bool {
        self.trainable
    }

    pub fn set_trainable(&mut self, trainable: bool) {
        self.trainable = trainable;
    }
}

/// Apply a phase layer to a field: out = u · exp(i·phase), elementwise.
pub fn modulate(field: &ComplexField, layer: &PhaseLayer) -> Result<ComplexField> {
    if field.grid_size() != layer.grid_size() {
        return Err(Error::Shape(format!(
            "field grid {} does not match layer grid {}",
            field.grid_size(),
            layer.grid_size()
        )));
    }
    let values = field
        .values()
        .iter()
        .zip(layer.phase.iter())
        .map(|(u, &p)| u * Complex64::from_polar(1.0, p))
        .collect();
    ComplexField::from_values(values, field.grid_size(), field.pitch())
}

/// A stack of phase-only layers with fixed spacings: one optically isolated
/// diffractive network.
///
/// The forward pass is
/// `propagate(input_distance) → [modulate → propagate(layer_spacing)] × (L−1)
/// → modulate → propagate(output_distance)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffractiveNetwork {
    layers: Vec<PhaseLayer>,
    geometry: PropagationGeometry,
    input_distance: f64,
    output_distance: f64,
}

/// Per-stage fields recorded by [`DiffractiveNetwork::forward_captured`]:
/// the field arriving at each layer, before modulation.
#[derive(Debug, Clone)]
pub struct CapturedStages {
    layer_inputs: Vec<ComplexField>,
}

impl CapturedStages {
    pub fn layer_inputs(&self) -> &[ComplexField] {
        &self.layer_inputs
    }
}

impl DiffractiveNetwork {
    pub fn new(
        layers: Vec<PhaseLayer>,
        geometry: PropagationGeometry,
        input_distance: f64,
        output_distance: f64,
    ) -> Result<Self> {
        geometry.validate()?;
        if let Some(first) = layers.first() {
            if layers.iter().any(|l| l.grid_size() != first.grid_size()) {
                return Err(Error::Shape("layers have mismatched grid sizes".into()));
            }
        }
        if !input_distance.is_finite()
            || !output_distance.is_finite()
            || input_distance < 0.0
            || output_distance < 0.0
        {
            return Err(Error::Config(
                "input/output distances must be non-negative".into(),
            ));
        }
        Ok(Self {
            layers,
            geometry,
            input_distance,
            output_distance,
        })
    }

    /// Network with `layer_count` layers initialized to Gaussian(0, std)
    /// phases and input/output distances equal to the layer spacing.
    pub fn random(
        grid_size: usize,
        layer_count: usize,
        geometry: PropagationGeometry,
        init_std: f64,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let layers = (0..layer_count)
            .map(|_| PhaseLayer::random(grid_size, init_std, rng))
            .collect();
        let d = geometry.layer_spacing;
        Self::new(layers, geometry, d, d)
    }

    pub fn layers(&self) -> &[PhaseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [PhaseLayer] {
        &mut self.layers
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn geometry(&self) -> &PropagationGeometry {
        &self.geometry
    }

    pub fn input_distance(&self) -> f64 {
        self.input_distance
    }

    pub fn output_distance(&self) -> f64 {
        self.output_distance
    }

    pub fn grid_size(&self) -> Option<usize> {
        self.layers.first().map(|l| l.grid_size())
    }

    /// Total optical path from the input plane to the output plane.
    pub fn total_path_length(&self) -> f64 {
        let hops = self.layers.len().saturating_sub(1) as f64;
        self.input_distance + hops * self.geometry.layer_spacing + self.output_distance
    }

    fn check_input(&self, input: &ComplexField) -> Result<()> {
        if let Some(n) = self.grid_size() {
            if input.grid_size() != n {
                return Err(Error::Shape(format!(
                    "input grid {} does not match network grid {n}",
                    input.grid_size()
                )));
            }
        }
        Ok(())
    }

    /// Field at the output plane.
    pub fn forward(&self, input: &ComplexField) -> Result<ComplexField> {
        self.check_input(input)?;
        let mut field = propagate(input, self.input_distance, &self.geometry)?;
        for (i, layer) in self.layers.iter().enumerate() {
            field = modulate(&field, layer)?;
            let distance = if i + 1 == self.layers.len() {
                self.output_distance
            } else {
                self.geometry.layer_spacing
            };
            field = propagate(&field, distance, &self.geometry)?;
        }
        if self.layers.is_empty() {
            // degenerate network: the input hop already happened, add the
            // output hop so the total path is input + output distance
            field = propagate(&field, self.output_distance, &self.geometry)?;
        }
        Ok(field)
    }

    /// Forward pass that records the field arriving at every layer, as
    /// needed by [`DiffractiveNetwork::adjoint_backward`].
    pub fn forward_captured(&self, input: &ComplexField) -> Result<(ComplexField, CapturedStages)> {
        self.check_input(input)?;
        let mut layer_inputs = Vec::with_capacity(self.layers.len());
        let mut field = propagate(input, self.input_distance, &self.geometry)?;
        for (i, layer) in self.layers.iter().enumerate() {
            layer_inputs.push(field.clone());
            field = modulate(&field, layer)?;
            let distance = if i + 1 == self.layers.len() {
                self.output_distance
            } else {
                self.geometry.layer_spacing
            };
            field = propagate(&field, distance, &self.geometry)?;
        }
        if self.layers.is_empty() {
            field = propagate(&field, self.output_distance, &self.geometry)?;
        }
        Ok((field, CapturedStages { layer_inputs }))
    }

    /// Pull a loss cotangent back from the output plane to the input plane,
    /// producing the gradient of the loss with respect to every layer phase.
    ///
    /// `output_cotangent` holds dL/du at the output plane in the convention
    /// g = ∂L/∂Re(u) + i·∂L/∂Im(u). The phase gradient of layer j is
    /// Im(conj(u_in·exp(i·φ)) · g) elementwise, and cotangents cross free
    /// space through the conjugated transfer function.
    pub fn adjoint_backward(
        &self,
        output_cotangent: &ComplexField,
        stages: &CapturedStages,
    ) -> Result<(ComplexField, Vec<Vec<f64>>)> {
        if stages.layer_inputs.len() != self.layers.len() {
            return Err(Error::State(format!(
                "captured {} stages but the network has {} layers",
                stages.layer_inputs.len(),
                self.layers.len()
            )));
        }
        let mut cotangent = output_cotangent.clone();
        let mut phase_grads = vec![Vec::new(); self.layers.len()];
        if self.layers.is_empty() {
            cotangent = propagate_adjoint(&cotangent, self.output_distance, &self.geometry)?;
            cotangent = propagate_adjoint(&cotangent, self.input_distance, &self.geometry)?;
            return Ok((cotangent, phase_grads));
        }
        for j in (0..self.layers.len()).rev() {
            let distance = if j + 1 == self.layers.len() {
                self.output_distance
            } else {
                self.geometry.layer_spacing
            };
            cotangent = propagate_adjoint(&cotangent, distance, &self.geometry)?;
            let layer = &self.layers[j];
            let u_in = &stages.layer_inputs[j];
            u_in.check_same_shape(&cotangent)?;
            let n = layer.grid_size();
            let mut grad = Vec::with_capacity(n * n);
            let mut next = Vec::with_capacity(n * n);
            for ((u, &p), g) in u_in
                .values()
                .iter()
                .zip(layer.phase.iter())
                .zip(cotangent.values())
            {
                let t = Complex64::from_polar(1.0, p);
                let u_mod = u * t;
                grad.push((u_mod.conj() * g).im);
                next.push(t.conj() * g);
            }
            phase_grads[j] = grad;
            cotangent = ComplexField::from_values(next, n, cotangent.pitch())?;
        }
        cotangent = propagate_adjoint(&cotangent, self.input_distance, &self.geometry)?;
        Ok((cotangent, phase_grads))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn test_field(n: usize, seed: u64) -> ComplexField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // smooth-ish random field so propagation artefacts stay small
        ComplexField::from_fn(n, 0.5, |row, col| {
            let (x, y) = crate::field::coord_of(n, 0.5, row, col);
            let envelope = (-(x * x + y * y) / 9.0).exp();
            Complex64::new(
                envelope * (rng.random::<f64>() - 0.5),
                envelope * (rng.random::<f64>() - 0.5),
            )
        })
        .unwrap()
    }

    #[test]
    fn modulate_zero_phase_is_identity() {
        let f = test_field(16, 1);
        let layer = PhaseLayer::zeros(16);
        assert_eq!(modulate(&f, &layer).unwrap(), f);
    }

    #[test]
    fn modulate_pi_phase_negates() {
        let f = test_field(16, 2);
        let layer = PhaseLayer::from_phases(vec![std::f64::consts::PI; 256], 16).unwrap();
        let out = modulate(&f, &layer).unwrap();
        for (a, b) in out.values().iter().zip(f.values()) {
            assert!((a + b).norm() < 1e-15);
        }
    }

    #[test]
    fn modulate_preserves_magnitude() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = test_field(16, 4);
        let layer = PhaseLayer::random(16, 2.0, &mut rng);
        let out = modulate(&f, &layer).unwrap();
        for (a, b) in out.values().iter().zip(f.values()) {
            let (ma, mb) = (a.norm(), b.norm());
            if mb > 0.0 {
                assert!((ma - mb).abs() / mb <= 1e-15);
            }
        }
    }

    #[test]
    fn modulate_rejects_shape_mismatch() {
        let f = test_field(16, 5);
        let layer = PhaseLayer::zeros(8);
        assert!(matches!(modulate(&f, &layer), Err(Error::Shape(_))));
    }

    #[test]
    fn empty_network_is_composed_free_space() {
        let geom = PropagationGeometry::default();
        let net = DiffractiveNetwork::new(vec![], geom, 7.0, 5.0).unwrap();
        let f = test_field(32, 6);
        let out = net.forward(&f).unwrap();
        let manual = propagate(&propagate(&f, 7.0, &geom).unwrap(), 5.0, &geom).unwrap();
        assert_eq!(out, manual);
    }

    #[test]
    fn zero_phase_network_equals_composed_propagation() {
        let geom = PropagationGeometry {
            layer_spacing: 10.0,
            ..Default::default()
        };
        let n = 96;
        let layers = vec![PhaseLayer::zeros(n), PhaseLayer::zeros(n)];
        let net = DiffractiveNetwork::new(layers, geom, 10.0, 10.0).unwrap();
        // well-confined beam: crop losses at intermediate planes stay
        // below the comparison tolerance
        let f = ComplexField::from_fn(n, 0.5, |row, col| {
            let (x, y) = crate::field::coord_of(n, 0.5, row, col);
            Complex64::new((-(x * x + y * y) / 9.0).exp(), 0.0)
        })
        .unwrap();
        let out = net.forward(&f).unwrap();

        // oracle: compose the individual propagations by hand
        let mut oracle = propagate(&f, 10.0, &geom).unwrap();
        oracle = propagate(&oracle, 10.0, &geom).unwrap();
        oracle = propagate(&oracle, 10.0, &geom).unwrap();
        assert_eq!(out, oracle);

        // and a single propagation over the total path agrees closely
        let single = propagate(&f, net.total_path_length(), &geom).unwrap();
        let err: f64 = out
            .values()
            .iter()
            .zip(single.values())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(err / f.total_power().sqrt() < 1e-9);
    }

    #[test]
    fn zero_cotangent_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let geom = PropagationGeometry::default();
        let net = DiffractiveNetwork::random(16, 2, geom, PHASE_INIT_STD, &mut rng).unwrap();
        let f = test_field(16, 9);
        let (_, stages) = net.forward_captured(&f).unwrap();
        let zero = ComplexField::zeros(16, 0.5).unwrap();
        let (input_cot, grads) = net.adjoint_backward(&zero, &stages).unwrap();
        assert!(input_cot.values().iter().all(|v| v.norm() == 0.0));
        assert!(grads.iter().flatten().all(|&g| g == 0.0));
    }

    #[test]
    fn cotangent_scaling_scales_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let geom = PropagationGeometry::default();
        let net = DiffractiveNetwork::random(16, 2, geom, PHASE_INIT_STD, &mut rng).unwrap();
        let f = test_field(16, 11);
        let (out, stages) = net.forward_captured(&f).unwrap();
        let cot = out.clone();
        let cot2 = ComplexField::from_values(
            cot.values().iter().map(|v| v * 2.0).collect(),
            16,
            0.5,
        )
        .unwrap();
        let (_, g1) = net.adjoint_backward(&cot, &stages).unwrap();
        let (_, g2) = net.adjoint_backward(&cot2, &stages).unwrap();
        for (a, b) in g1.iter().flatten().zip(g2.iter().flatten()) {
            assert_eq!(*b, 2.0 * *a);
        }
    }

    #[test]
    fn missing_stages_is_a_state_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let geom = PropagationGeometry::default();
        let net = DiffractiveNetwork::random(16, 3, geom, PHASE_INIT_STD, &mut rng).unwrap();
        let stages = CapturedStages {
            layer_inputs: vec![],
        };
        let zero = ComplexField::zeros(16, 0.5).unwrap();
        assert!(matches!(
            net.adjoint_backward(&zero, &stages),
            Err(Error::State(_))
        ));
    }

    /// Central finite differences on every phase of a small network,
    /// with loss = total output power.
    #[test]
    fn phase_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let geom = PropagationGeometry::default();
        let mut net = DiffractiveNetwork::random(16, 2, geom, PHASE_INIT_STD, &mut rng).unwrap();
        let f = test_field(16, 14);

        let (out, stages) = net.forward_captured(&f).unwrap();
        // loss = sum |u|^2  =>  cotangent g = 2u
        let cot = ComplexField::from_values(
            out.values().iter().map(|v| 2.0 * v).collect(),
            16,
            0.5,
        )
        .unwrap();
        let (_, grads) = net.adjoint_backward(&cot, &stages).unwrap();

        let step = 1e-6;
        #[allow(clippy::needless_range_loop)]
        for layer_idx in 0..2 {
            // spot-check a spread of coordinates, full grid is covered by
            // the acceptance suite
            for &idx in &[0usize, 17, 130, 255] {
                let orig = net.layers()[layer_idx].phase()[idx];
                net.layers_mut()[layer_idx].phase_mut()[idx] = orig + step;
                let up = net.forward(&f).unwrap().total_power();
                net.layers_mut()[layer_idx].phase_mut()[idx] = orig - step;
                let down = net.forward(&f).unwrap().total_power();
                net.layers_mut()[layer_idx].phase_mut()[idx] = orig;
                let fd = (up - down) / (2.0 * step);
                let an = grads[layer_idx][idx];
                let denom = fd.abs().max(an.abs()).max(1e-12);
                assert!(
                    (fd - an).abs() / denom < 1e-6,
                    "layer {layer_idx} idx {idx}: fd={fd} analytic={an}"
                );
            }
        }
    }
}
