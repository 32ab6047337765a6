//! Engine-versus-oracle comparison on a fixed matrix of small instances.

use rayon::prelude::*;
use serde::Serialize;

use crate::coefficients::EitConfig;
use crate::engine::{evaluate_point, ProbeState, TruncationPolicy};
use crate::error::Result;
use crate::moments::CouplingState;
use crate::oracle::{oracle_deltas, oracle_evaluate, TruncatedSpace};
use crate::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValidationSettings {
    pub alpha: f64,
    pub omega_c: f64,
    pub g: f64,
    /// Largest |T − T_oracle| and |F − F_oracle| accepted.
    pub tol: f64,
    /// Force both oracle basis sizes instead of choosing them from the states.
    pub dims: Option<usize>,
}

impl Default for ValidationSettings {
    fn default() -> Self {
        ValidationSettings {
            alpha: 50.0,
            omega_c: 0.5,
            g: EitConfig::DEFAULT_G,
            tol: 1e-3,
            dims: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValidationCase {
    pub probe: ProbeState,
    pub coupling: CouplingState,
    pub gamma0: f64,
    pub omega: f64,
}

/// probe ∈ {coherent:1, fock:1} × coupling ∈ {coherent, squeezed r = 0.5, 1.0}
/// × γ₀ ∈ {0, 10⁻³, 10⁻²} × ω ∈ {0, 10⁻²}.
pub fn validation_matrix(settings: &ValidationSettings) -> Vec<ValidationCase> {
    let beta_c = Complex64::new(settings.omega_c / settings.g, 0.0);
    let probes = [
        ProbeState::coherent(Complex64::new(1.0, 0.0)),
        ProbeState::fock(1),
    ];
    let couplings = [
        CouplingState::coherent(beta_c),
        CouplingState::SqueezedCoherent {
            beta_c,
            r: 0.5,
            theta: 0.0,
        },
        CouplingState::SqueezedCoherent {
            beta_c,
            r: 1.0,
            theta: 0.0,
        },
    ];
    let mut cases = Vec::new();
    for probe in probes {
        for coupling in couplings {
            for gamma0 in [0.0, 1e-3, 1e-2] {
                for omega in [0.0, 1e-2] {
                    cases.push(ValidationCase {
                        probe,
                        coupling,
                        gamma0,
                        omega,
                    });
                }
            }
        }
    }
    cases
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CaseOutcome {
    pub case: ValidationCase,
    pub t_engine: f64,
    pub t_oracle: f64,
    pub f_engine: f64,
    pub f_oracle: f64,
    pub dt_dev: f64,
    pub df_dev: f64,
}

impl CaseOutcome {
    pub fn t_dev(&self) -> f64 {
        (self.t_engine - self.t_oracle).abs()
    }

    pub fn f_dev(&self) -> f64 {
        (self.f_engine - self.f_oracle).abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub settings: ValidationSettings,
    pub outcomes: Vec<CaseOutcome>,
    pub max_t_dev: f64,
    pub max_f_dev: f64,
    pub max_dt_dev: f64,
    pub max_df_dev: f64,
    pub passed: bool,
}

pub fn compare_case(settings: &ValidationSettings, case: &ValidationCase) -> Result<CaseOutcome> {
    let cfg = EitConfig::new(
        case.gamma0,
        Complex64::new(settings.omega_c, 0.0),
        settings.alpha,
        settings.g,
    )?;
    let space = match settings.dims {
        Some(d) => TruncatedSpace::new(d, d)?,
        None => TruncatedSpace::for_states(&case.probe, &case.coupling)?,
    };
    let engine = evaluate_point(
        &cfg,
        case.omega,
        &case.probe,
        &case.coupling,
        &TruncationPolicy::default(),
    )?;
    let oracle = oracle_evaluate(&cfg, case.omega, &case.probe, &case.coupling, &space)?;
    let (odt, odf) = oracle_deltas(&cfg, case.omega, &case.probe, &case.coupling, &space)?;
    Ok(CaseOutcome {
        case: *case,
        t_engine: engine.t,
        t_oracle: oracle.t,
        f_engine: engine.f,
        f_oracle: oracle.f,
        dt_dev: (engine.delta_t - odt).abs(),
        df_dev: (engine.delta_f - odf).abs(),
    })
}

/// Runs the whole matrix; fails fast on truncation or convergence errors.
pub fn run_validation(settings: &ValidationSettings) -> Result<ValidationReport> {
    let outcomes = validation_matrix(settings)
        .par_iter()
        .map(|case| compare_case(settings, case))
        .collect::<Result<Vec<_>>>()?;
    let max = |f: fn(&CaseOutcome) -> f64| outcomes.iter().map(f).fold(0.0, f64::max);
    let max_t_dev = max(CaseOutcome::t_dev);
    let max_f_dev = max(CaseOutcome::f_dev);
    let max_dt_dev = max(|o| o.dt_dev);
    let max_df_dev = max(|o| o.df_dev);
    Ok(ValidationReport {
        settings: *settings,
        passed: max_t_dev < settings.tol && max_f_dev < settings.tol,
        outcomes,
        max_t_dev,
        max_f_dev,
        max_dt_dev,
        max_df_dev,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::EitError;

    #[test]
    fn matrix_size() {
        assert_eq!(validation_matrix(&ValidationSettings::default()).len(), 36);
    }

    #[test]
    fn undersized_space_is_a_tail_error() {
        let settings = ValidationSettings {
            dims: Some(8),
            ..Default::default()
        };
        let err = run_validation(&settings).unwrap_err();
        assert!(matches!(err, EitError::TailMass { .. }));
    }
}
