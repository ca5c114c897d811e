//! diffnet: simulation and training of diffractive optical neural network
//! classifiers.
//!
//! A classifier here is one or more stacks of phase-only diffractive
//! surfaces. Coherent light modulated by an input object propagates through
//! the stack (angular spectrum method) and lands on square photodetectors
//! at an output plane; class scores are read from the detector powers,
//! either directly, as normalized differences of detector pairs, or as a
//! learnable-coefficient generalization of the pair difference. Training is
//! softmax cross-entropy over scaled scores with Adam, driven by an exact
//! adjoint of the optical forward model.
//!
//! The crate is organized bottom-up:
//!
//! * [`field`], [`propagate`], [`network`]: the coherent wave model and
//!   its adjoint;
//! * [`detector`], [`scores`]: photodetector readout and score equations;
//! * [`notation`], [`system`]: the `D([Q+,Q-],[N,L,P])` architecture
//!   grammar, multi-network systems and incoherent ensembles;
//! * [`data`], [`train`]: dataset ingestion/encoding and the training
//!   loop;
//! * [`checkpoint`], [`config`], [`metrics`], [`render`]: persistence and
//!   reporting used by the CLI.

pub mod checkpoint;
pub mod config;
pub mod data;
pub mod detector;
pub mod error;
mod fft;
pub mod field;
pub mod metrics;
pub mod network;
pub mod notation;
pub mod propagate;
pub mod render;
pub mod scores;
pub mod system;
pub mod train;

pub use error::{Error, Result};
pub use field::ComplexField;
pub use network::{modulate, DiffractiveNetwork, PhaseLayer};
pub use notation::{parse_notation, ArchitectureSpec};
pub use propagate::{propagate, propagate_adjoint, EvanescentPolicy, PropagationGeometry};
pub use scores::{predict, ClassScores, DetectorCoefficients};
pub use system::{EnsembleSystem, NetworkSystem};

/// Stable seed derivation so that every consumer of randomness (layer init,
/// batch shuffling, coefficient init, ...) draws from an independent,
/// reproducible stream.
pub(crate) fn derive_seed(master: u64, tag: &str, index: u64) -> u64 {
    // FNV-1a over the tag and index, folded into the master seed.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ master;
    for b in tag.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    for b in index.to_le_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_are_stable_and_distinct() {
        let a = derive_seed(42, "phases", 0);
        assert_eq!(a, derive_seed(42, "phases", 0));
        assert_ne!(a, derive_seed(42, "phases", 1));
        assert_ne!(a, derive_seed(42, "shuffle", 0));
        assert_ne!(a, derive_seed(43, "phases", 0));
    }
}
