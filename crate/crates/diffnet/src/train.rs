//! Training: softmax cross-entropy over scaled class scores, Adam updates,
//! learning-rate and temperature schedules, and the repeated-experiment
//! protocol with validation-based model selection.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{encode, EncodingSpec, LabeledImage};
use crate::derive_seed;
use crate::detector::DetectorLayout;
use crate::error::{Error, Result};
use crate::notation::ArchitectureSpec;
use crate::scores::{predict, DetectorCoefficients};
use crate::system::{
    instantiate_with_layouts, default_layouts, GeometryConfig, NetworkSystem, SystemGradients,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TemperatureSchedule {
    Constant,
    /// Multiply by e every `every_epochs` epochs (T(e) = T0 · e^⌊e/every⌋).
    ExpGrowth { every_epochs: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub lr_decay_factor: f64,
    pub lr_decay_every: usize,
    pub temperature: f64,
    pub temperature_schedule: TemperatureSchedule,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 32,
            learning_rate: 1e-3,
            lr_decay_factor: 0.7,
            lr_decay_every: 8,
            temperature: 0.1,
            temperature_schedule: TemperatureSchedule::Constant,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.lr_decay_every == 0 {
            return Err(Error::Config(
                "epochs, batch size and decay interval must be positive".into(),
            ));
        }
        // lr = 0 is legal (a no-op epoch); negative rates are not
        let bad_rate = !self.learning_rate.is_finite() || self.learning_rate < 0.0;
        let bad_decay = !self.lr_decay_factor.is_finite() || self.lr_decay_factor <= 0.0;
        let bad_temp = !self.temperature.is_finite() || self.temperature <= 0.0;
        if bad_rate || bad_decay || bad_temp {
            return Err(Error::Config(
                "learning rate must be non-negative; decay factor and temperature positive".into(),
            ));
        }
        Ok(())
    }

    /// lr(e) = lr₀ · factor^⌊e/every⌋, with e counted from 0.
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        self.learning_rate
            * self
                .lr_decay_factor
                .powi((epoch / self.lr_decay_every) as i32)
    }

    /// T(e): constant, or growing by a factor of e every N epochs.
    pub fn temperature_at(&self, epoch: usize) -> f64 {
        match self.temperature_schedule {
            TemperatureSchedule::Constant => self.temperature,
            TemperatureSchedule::ExpGrowth { every_epochs } => {
                self.temperature * ((epoch / every_epochs) as f64).exp()
            }
        }
    }
}

/// Numerically stable −log softmax(scaled)[label].
pub fn softmax_cross_entropy(scaled: &[f64], label: usize) -> Result<f64> {
    if label >= scaled.len() {
        return Err(Error::Config(format!(
            "label {label} out of range for {} scores",
            scaled.len()
        )));
    }
    if scaled.iter().any(|s| !s.is_finite()) {
        return Err(Error::Numeric("non-finite class score".into()));
    }
    let max = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + scaled.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
    Ok(lse - scaled[label])
}

/// d(loss)/d(scaled scores) = softmax(scaled) − onehot(label).
pub fn softmax_cross_entropy_grad(scaled: &[f64], label: usize) -> Vec<f64> {
    let max = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scaled.iter().map(|s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter()
        .enumerate()
        .map(|(i, e)| e / sum - if i == label { 1.0 } else { 0.0 })
        .collect()
}

/// Adam moments shaped like the system parameters, with bias-corrected
/// updates (β1 = 0.9, β2 = 0.999, ε = 1e−8).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimizer {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    /// network → layer → (m, v)
    phase_moments: Vec<Vec<(Vec<f64>, Vec<f64>)>>,
    coeff_moments: Option<[(Vec<f64>, Vec<f64>); 2]>,
}

impl Optimizer {
    pub fn new(system: &NetworkSystem) -> Self {
        let phase_moments = system
            .networks()
            .iter()
            .map(|net| {
                net.layers()
                    .iter()
                    .map(|l| (vec![0.0; l.phase().len()], vec![0.0; l.phase().len()]))
                    .collect()
            })
            .collect();
        let coeff_moments = match system.coefficients() {
            Some(c) if c.learnable => {
                let z = vec![0.0; c.num_classes()];
                Some([(z.clone(), z.clone()), (z.clone(), z)])
            }
            _ => None,
        };
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            phase_moments,
            coeff_moments,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One Adam step over every trainable parameter of the system.
    pub fn apply(
        &mut self,
        system: &mut NetworkSystem,
        grads: &SystemGradients,
        learning_rate: f64,
    ) -> Result<()> {
        self.step += 1;
        let t = self.step as i32;
        let lr_t = learning_rate * (1.0 - self.beta2.powi(t)).sqrt() / (1.0 - self.beta1.powi(t));
        let (beta1, beta2, epsilon) = (self.beta1, self.beta2, self.epsilon);
        let update = |params: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
            for i in 0..params.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                params[i] -= lr_t * m[i] / (v[i].sqrt() + epsilon);
            }
        };
        for (net_idx, net) in system.networks_mut().iter_mut().enumerate() {
            for (layer_idx, layer) in net.layers_mut().iter_mut().enumerate() {
                if !layer.trainable() {
                    continue;
                }
                let (m, v) = &mut self.phase_moments[net_idx][layer_idx];
                update(
                    layer.phase_mut(),
                    &grads.phases[net_idx][layer_idx],
                    m,
                    v,
                );
            }
        }
        if let (Some(moments), Some(coeffs)) =
            (self.coeff_moments.as_mut(), system.coefficients_mut())
        {
            if let (Some(gp), Some(gn)) = (grads.coeff_p.as_ref(), grads.coeff_n.as_ref()) {
                let [mp, mn] = moments;
                update(&mut coeffs.p, gp, &mut mp.0, &mut mp.1);
                update(&mut coeffs.n, gn, &mut mn.0, &mut mn.1);
            }
        }
        Ok(())
    }
}

/// A borrowed view of encoded training samples.
pub struct SampleSet<'a> {
    pub images: Vec<&'a LabeledImage>,
    pub encoding: EncodingSpec,
    pub grid_size: usize,
    pub pitch: f64,
}

impl<'a> SampleSet<'a> {
    pub fn new(
        images: Vec<&'a LabeledImage>,
        encoding: EncodingSpec,
        grid_size: usize,
        pitch: f64,
    ) -> Self {
        Self {
            images,
            encoding,
            grid_size,
            pitch,
        }
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    fn field(&self, index: usize) -> Result<crate::field::ComplexField> {
        encode(self.images[index], &self.encoding, self.grid_size, self.pitch)
    }

    fn label(&self, index: usize) -> usize {
        self.images[index].label as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub learning_rate: f64,
    pub temperature: f64,
}

/// One pass over the training set in shuffled mini-batches. Gradients of a
/// batch are computed sample-parallel and reduced in sample-index order, so
/// the result does not depend on the worker count.
pub fn train_epoch(
    system: &mut NetworkSystem,
    optimizer: &mut Optimizer,
    samples: &SampleSet,
    config: &TrainConfig,
    epoch: usize,
    seed: u64,
) -> Result<EpochStats> {
    config.validate()?;
    if samples.is_empty() {
        return Err(Error::Config("training split is empty".into()));
    }
    let lr = config.learning_rate_at(epoch);
    let temperature = config.temperature_at(epoch);

    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "shuffle", epoch as u64));
    order.shuffle(&mut rng);

    let mut loss_sum = 0.0;
    for (batch_idx, batch) in order.chunks(config.batch_size).enumerate() {
        let per_sample: Vec<Result<(f64, SystemGradients)>> = batch
            .par_iter()
            .map(|&i| {
                let field = samples.field(i)?;
                system.loss_and_gradients(&field, samples.label(i), temperature)
            })
            .collect();

        let mut batch_grads = SystemGradients::zeros_like(system);
        let mut batch_loss = 0.0;
        for (k, result) in per_sample.into_iter().enumerate() {
            let (loss, grads) = result?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite loss {loss} at epoch {epoch}, batch {batch_idx}, \
                     sample index {}",
                    batch[k]
                )));
            }
            batch_loss += loss;
            batch_grads.accumulate(&grads);
        }
        batch_grads.scale(1.0 / batch.len() as f64);
        loss_sum += batch_loss;
        optimizer.apply(system, &batch_grads, lr)?;
    }

    Ok(EpochStats {
        epoch,
        mean_loss: loss_sum / samples.len() as f64,
        learning_rate: lr,
        temperature,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
    /// confusion[true][predicted]
    pub confusion: Vec<Vec<usize>>,
}

/// Blind evaluation: predictions use raw scores only, so the temperature
/// plays no role here.
pub fn evaluate(system: &NetworkSystem, samples: &SampleSet) -> Result<Evaluation> {
    if samples.is_empty() {
        return Err(Error::Config("evaluation split is empty".into()));
    }
    let num_classes = system.spec().num_classes;
    let predictions: Vec<Result<(usize, usize)>> = (0..samples.len())
        .into_par_iter()
        .map(|i| {
            let field = samples.field(i)?;
            let scores = system.forward(&field, 1.0)?;
            Ok((samples.label(i), predict(&scores)))
        })
        .collect();
    let mut confusion = vec![vec![0usize; num_classes]; num_classes];
    let mut correct = 0;
    for result in predictions {
        let (label, predicted) = result?;
        confusion[label][predicted] += 1;
        if label == predicted {
            correct += 1;
        }
    }
    Ok(Evaluation {
        correct,
        total: samples.len(),
        accuracy: correct as f64 / samples.len() as f64,
        confusion,
    })
}

/// Blind evaluation of an incoherent ensemble on a sample set.
pub fn evaluate_ensemble(
    ensemble: &crate::system::EnsembleSystem,
    samples: &SampleSet,
) -> Result<Evaluation> {
    if samples.is_empty() {
        return Err(Error::Config("evaluation split is empty".into()));
    }
    let num_classes = ensemble.units()[0].spec().num_classes;
    let predictions: Vec<Result<(usize, usize)>> = (0..samples.len())
        .into_par_iter()
        .map(|i| {
            let field = samples.field(i)?;
            let scores = ensemble.forward(&field, 1.0)?;
            Ok((samples.label(i), predict(&scores)))
        })
        .collect();
    let mut confusion = vec![vec![0usize; num_classes]; num_classes];
    let mut correct = 0;
    for result in predictions {
        let (label, predicted) = result?;
        confusion[label][predicted] += 1;
        if label == predicted {
            correct += 1;
        }
    }
    Ok(Evaluation {
        correct,
        total: samples.len(),
        accuracy: correct as f64 / samples.len() as f64,
        confusion,
    })
}

/// Per-sample detector signals over a sample set (used to cache validation
/// signals for ensemble combination search).
pub fn detector_signal_cache(
    system: &NetworkSystem,
    samples: &SampleSet,
) -> Result<Vec<Vec<Vec<f64>>>> {
    (0..samples.len())
        .into_par_iter()
        .map(|i| {
            let field = samples.field(i)?;
            system.detector_signals(&field)
        })
        .collect()
}

/// Trainable parameters frozen at one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSnapshot {
    pub epoch: usize,
    pub val_accuracy: f64,
    /// network → layer → flat phases
    pub phases: Vec<Vec<Vec<f64>>>,
    pub coefficients: Option<DetectorCoefficients>,
}

impl ModelSnapshot {
    pub fn of(system: &NetworkSystem, epoch: usize, val_accuracy: f64) -> Self {
        Self {
            epoch,
            val_accuracy,
            phases: system
                .networks()
                .iter()
                .map(|n| n.layers().iter().map(|l| l.phase().to_vec()).collect())
                .collect(),
            coefficients: system.coefficients().cloned(),
        }
    }

    pub fn restore(&self, system: &mut NetworkSystem) -> Result<()> {
        for (net, phases) in system.networks_mut().iter_mut().zip(&self.phases) {
            if net.layers().len() != phases.len() {
                return Err(Error::State("snapshot layer count mismatch".into()));
            }
            for (layer, stored) in net.layers_mut().iter_mut().zip(phases) {
                if layer.phase().len() != stored.len() {
                    return Err(Error::State("snapshot phase length mismatch".into()));
                }
                layer.phase_mut().copy_from_slice(stored);
            }
        }
        if let (Some(dst), Some(src)) = (system.coefficients_mut(), self.coefficients.as_ref()) {
            dst.clone_from(src);
        }
        Ok(())
    }
}

/// Everything needed to train one architecture on one dataset split.
pub struct ExperimentSetup<'a> {
    pub spec: &'a ArchitectureSpec,
    pub geometry: &'a GeometryConfig,
    pub encoding: EncodingSpec,
    pub train_images: Vec<&'a LabeledImage>,
    pub val_images: Vec<&'a LabeledImage>,
    pub test_images: Vec<&'a LabeledImage>,
    pub config: TrainConfig,
    pub learnable_coefficients: bool,
    pub layouts: Option<Vec<DetectorLayout>>,
    /// Keep a snapshot of every epoch (for ensemble combination search),
    /// not just the best one.
    pub keep_epoch_snapshots: bool,
    /// Called after every epoch with the training stats and the validation
    /// accuracy (progress reporting, incremental metrics files).
    pub on_epoch: Option<EpochCallback>,
}

pub type EpochCallback = Box<dyn Fn(&EpochStats, f64) + Send + Sync>;

impl<'a> ExperimentSetup<'a> {
    fn sample_set(&self, images: &[&'a LabeledImage]) -> Result<SampleSet<'a>> {
        Ok(SampleSet::new(
            images.to_vec(),
            self.encoding,
            self.spec.grid_size()?,
            self.geometry.pitch,
        ))
    }

    pub fn build_system(&self, seed: u64) -> Result<NetworkSystem> {
        let layouts = match &self.layouts {
            Some(l) => l.clone(),
            None => default_layouts(
                self.spec,
                self.spec.grid_size()?,
                self.geometry.pitch,
                self.geometry.detector_width,
            )?,
        };
        instantiate_with_layouts(
            self.spec,
            self.geometry,
            seed,
            layouts,
            self.learnable_coefficients,
        )
    }
}

#[derive(Debug, Clone)]
pub struct RepetitionResult {
    pub seed: u64,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    pub test_accuracy: f64,
    pub epoch_stats: Vec<EpochStats>,
    pub val_history: Vec<f64>,
    /// Present when `keep_epoch_snapshots` was set.
    pub snapshots: Vec<ModelSnapshot>,
}

/// Train one repetition: full schedule, best-validation selection
/// (earliest epoch wins ties), final blind test of the selected model.
/// Returns the result and the system restored to its best checkpoint.
pub fn run_repetition(
    setup: &ExperimentSetup,
    seed: u64,
) -> Result<(RepetitionResult, NetworkSystem)> {
    setup.config.validate()?;
    let mut system = setup.build_system(seed)?;
    let mut optimizer = Optimizer::new(&system);
    let train_set = setup.sample_set(&setup.train_images)?;
    let val_set = setup.sample_set(&setup.val_images)?;
    let test_set = setup.sample_set(&setup.test_images)?;

    let mut best: Option<ModelSnapshot> = None;
    let mut epoch_stats = Vec::with_capacity(setup.config.epochs);
    let mut val_history = Vec::with_capacity(setup.config.epochs);
    let mut snapshots = Vec::new();
    for epoch in 0..setup.config.epochs {
        let stats = train_epoch(
            &mut system,
            &mut optimizer,
            &train_set,
            &setup.config,
            epoch,
            seed,
        )?;
        let val = evaluate(&system, &val_set)?;
        if let Some(on_epoch) = &setup.on_epoch {
            on_epoch(&stats, val.accuracy);
        }
        epoch_stats.push(stats);
        val_history.push(val.accuracy);
        if best
            .as_ref()
            .is_none_or(|b| val.accuracy > b.val_accuracy)
        {
            best = Some(ModelSnapshot::of(&system, epoch, val.accuracy));
        }
        if setup.keep_epoch_snapshots {
            snapshots.push(ModelSnapshot::of(&system, epoch, val.accuracy));
        }
    }
    let best = best.expect("at least one epoch");
    best.restore(&mut system)?;
    let test = evaluate(&system, &test_set)?;
    Ok((
        RepetitionResult {
            seed,
            best_epoch: best.epoch,
            best_val_accuracy: best.val_accuracy,
            test_accuracy: test.accuracy,
            epoch_stats,
            val_history,
            snapshots,
        },
        system,
    ))
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub notation: String,
    pub repetitions: Vec<RepetitionResult>,
    pub mean_test_accuracy: f64,
    /// Sample standard deviation (n−1); 0 for a single repetition.
    pub std_test_accuracy: f64,
}

impl ExperimentReport {
    pub fn single_repetition(&self) -> bool {
        self.repetitions.len() == 1
    }
}

/// Independent repetitions with the given seeds (distinct seeds give
/// distinct initializations and batch orders), reported as
/// mean ± sample std of the blind test accuracy.
pub fn run_experiment(setup: &ExperimentSetup, seeds: &[u64]) -> Result<ExperimentReport> {
    if seeds.is_empty() {
        return Err(Error::Config("at least one seed is required".into()));
    }
    let mut repetitions = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let (rep, _) = run_repetition(setup, seed)?;
        repetitions.push(rep);
    }
    let accuracies: Vec<f64> = repetitions.iter().map(|r| r.test_accuracy).collect();
    let mean = accuracies.iter().sum::<f64>() / accuracies.len() as f64;
    let std = if accuracies.len() > 1 {
        (accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>()
            / (accuracies.len() - 1) as f64)
            .sqrt()
    } else {
        0.0
    };
    Ok(ExperimentReport {
        notation: setup.spec.render(),
        repetitions,
        mean_test_accuracy: mean,
        std_test_accuracy: std,
    })
}
