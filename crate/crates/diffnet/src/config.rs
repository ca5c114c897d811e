//! Experiment configuration files (TOML). Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{DatasetId, EncodingMode, EncodingSpec};
use crate::error::{Error, Result};
use crate::field::DEFAULT_PITCH;
use crate::notation::parse_notation;
use crate::propagate::{EvanescentPolicy, PropagationGeometry};
use crate::system::GeometryConfig;
use crate::train::TrainConfig;

/// Default seed for the train/validation split shuffle. Independent of the
/// training seeds so every repetition sees the same data.
pub const DEFAULT_SPLIT_SEED: u64 = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    /// Full-size configuration: 200×200 layers, 50 epochs, 6 seeds,
    /// canonical splits. Hours of CPU time per repetition.
    Paper,
    /// Small configuration for a workstation: 100×100 layers, 10 epochs,
    /// 3 seeds, 10k/2k/2k subsets.
    Desk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryOverrides {
    pub pitch: f64,
    pub wavelength: f64,
    pub layer_spacing: f64,
    pub input_distance: f64,
    pub output_distance: f64,
    pub pad_factor: usize,
    pub evanescent: EvanescentPolicy,
    pub detector_width: f64,
    pub phase_init_std: f64,
}

impl Default for GeometryOverrides {
    fn default() -> Self {
        let g = GeometryConfig::default();
        Self {
            pitch: DEFAULT_PITCH,
            wavelength: g.propagation.wavelength,
            layer_spacing: g.propagation.layer_spacing,
            input_distance: g.input_distance,
            output_distance: g.output_distance,
            pad_factor: g.propagation.pad_factor,
            evanescent: g.propagation.evanescent_policy,
            detector_width: g.detector_width,
            phase_init_std: g.phase_init_std,
        }
    }
}

impl GeometryOverrides {
    pub fn to_geometry(&self) -> GeometryConfig {
        GeometryConfig {
            pitch: self.pitch,
            propagation: PropagationGeometry {
                wavelength: self.wavelength,
                layer_spacing: self.layer_spacing,
                pad_factor: self.pad_factor,
                evanescent_policy: self.evanescent,
            },
            input_distance: self.input_distance,
            output_distance: self.output_distance,
            detector_width: self.detector_width,
            phase_init_std: self.phase_init_std,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncodingOverrides {
    /// `None` uses the dataset's default (amplitude for MNIST, phase else).
    pub mode: Option<EncodingMode>,
    pub phase_range: f64,
    pub upsample: Option<usize>,
}

impl Default for EncodingOverrides {
    fn default() -> Self {
        Self {
            mode: None,
            phase_range: std::f64::consts::TAU,
            upsample: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[derive(Default)]
pub struct SubsetSizes {
    pub train: Option<usize>,
    pub validation: Option<usize>,
    pub test: Option<usize>,
}


#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub notation: String,
    pub dataset: DatasetId,
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub data_root: Option<PathBuf>,
    #[serde(default = "default_split_seed")]
    pub split_seed: u64,
    #[serde(default)]
    pub subset: SubsetSizes,
    #[serde(default)]
    pub geometry: GeometryOverrides,
    #[serde(default)]
    pub encoding: EncodingOverrides,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub layout_path: Option<PathBuf>,
    #[serde(default)]
    pub learnable_coefficients: bool,
    /// Save a checkpoint after every epoch (ensemble training) instead of
    /// only the best-validation one.
    #[serde(default)]
    pub save_every_epoch: bool,
}

fn default_split_seed() -> u64 {
    DEFAULT_SPLIT_SEED
}

impl ExperimentConfig {
    /// Base configuration for a dataset at a given scale; the notation's P
    /// must match the scale's grid (10k at desk scale, 40k at paper scale).
    pub fn preset(scale: Scale, dataset: DatasetId, notation: &str) -> Self {
        let (seeds, train, subset) = match scale {
            Scale::Paper => (
                vec![1, 2, 3, 4, 5, 6],
                TrainConfig::default(),
                SubsetSizes::default(),
            ),
            Scale::Desk => (
                vec![1, 2, 3],
                TrainConfig {
                    epochs: 10,
                    ..TrainConfig::default()
                },
                SubsetSizes {
                    train: Some(10_000),
                    validation: Some(2_000),
                    test: Some(2_000),
                },
            ),
        };
        Self {
            notation: notation.to_string(),
            dataset,
            seeds,
            out_dir: None,
            data_root: None,
            split_seed: DEFAULT_SPLIT_SEED,
            subset,
            geometry: GeometryOverrides::default(),
            encoding: EncodingOverrides::default(),
            train,
            layout_path: None,
            learnable_coefficients: false,
            save_every_epoch: false,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("config parse: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let spec = parse_notation(&self.notation, self.dataset.num_classes())?;
        spec.grid_size()?;
        self.train.validate()?;
        self.geometry.to_geometry().propagation.validate()?;
        if !self.geometry.pitch.is_finite() || self.geometry.pitch <= 0.0 {
            return Err(Error::Config("pitch must be positive".into()));
        }
        if !self.geometry.detector_width.is_finite() || self.geometry.detector_width <= 0.0 {
            return Err(Error::Config("detector width must be positive".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        Ok(())
    }

    pub fn encoding_spec(&self) -> EncodingSpec {
        let mut spec = self.dataset.default_encoding();
        if let Some(mode) = self.encoding.mode {
            spec.mode = mode;
        }
        spec.phase_range = self.encoding.phase_range;
        spec.upsample = self.encoding.upsample;
        spec
    }
}
