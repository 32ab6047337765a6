//! Full quantum model of a weak probe field crossing a Λ-type EIT medium driven
//! by a quantized coupling field.
//!
//! The crate computes the transmittance, output density matrix and fidelity of
//! coherent and Fock probe states, together with the corrections ΔT and ΔF
//! caused by quantum fluctuations of a coherent or squeezed-coherent coupling
//! field. An exact truncated-Fock-space evaluation ([`oracle`]) serves as the
//! reference for the order-two analytic engine ([`engine`]).
//!
//! All rates are in units of Γ; the medium enters through its optical depth α.

pub mod coefficients;
pub mod engine;
pub mod error;
pub mod moments;
pub mod oracle;
pub mod sweep;
pub mod validate;

pub use coefficients::{
    propagation_coefficients, steady_state_means, EitConfig, PropagationCoefficients,
    SteadyStateMeans,
};
pub use engine::{
    delta_metrics, evaluate, evaluate_coefficients, evaluate_point, fidelity,
    output_density_matrix, transmittance, DensityMatrix, Diagnostics, EngineResult, ProbeState,
    TruncationPolicy,
};
pub use error::{EitError, Result};
pub use moments::{c2_moments, chi, first_moments, second_moments, CouplingState, SecondMoments};
pub use num_complex::Complex64;
