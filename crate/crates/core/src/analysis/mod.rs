//! Energy bookkeeping, dissipation and observability checks, decay fits and certificates.

pub mod appendix;
pub mod decay;
pub mod dissipation;
pub mod energy;
pub mod observability;

pub use appendix::{appendix_analyze, decay_rate, AppendixCertificate};
pub use decay::{fit_decay, DecayFit};
pub use dissipation::{
    dissipation_residual, lemma31_check, sample_pairs, xi_default, DissipationConstants,
    Lemma31Report,
};
pub use energy::{energies, EnergyRow, EnergySample, EnergyTrace, TraceMeta};
pub use observability::{
    lemma32_check, observability_constants, Lemma32Report, ObservabilityConstants,
    ObservabilityInputs,
};
