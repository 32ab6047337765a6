//! Closed-form propagation quantities of the probe field.
//!
//! All rates are measured in units of the excited-state decay rate Γ, and the
//! medium enters only through the optical depth α via |g|²NL/c = αΓ/4. Every
//! coefficient returned here is therefore the dimensionless product of a
//! spatial rate with the medium length L.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{EitError, Result};

/// Threshold on |X_a − X_0| below which the degenerate (ω = 0) solution is used.
pub const BRANCH_EPS: f64 = 1e-9;

/// Medium and field parameters, rates in units of Γ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EitConfig {
    /// Ground-state dephasing rate γ₀.
    pub gamma0: f64,
    /// Coupling Rabi frequency Ω_c (may carry a phase).
    pub omega_c: Complex64,
    /// Optical depth α.
    pub alpha: f64,
    /// Single-photon coupling constant g.
    pub g: f64,
}

impl EitConfig {
    /// Excited-state coherence decay γ = γ₁ = γ₂ = Γ/2.
    pub const GAMMA: f64 = 0.5;

    /// Default single-photon coupling constant used when none is given.
    pub const DEFAULT_G: f64 = 0.05;

    pub fn new(gamma0: f64, omega_c: Complex64, alpha: f64, g: f64) -> Result<Self> {
        let cfg = EitConfig {
            gamma0,
            omega_c,
            alpha,
            g,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn gamma(&self) -> f64 {
        Self::GAMMA
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma0.is_finite() && self.gamma0 >= 0.0) {
            return Err(EitError::Domain(format!(
                "gamma0 must be >= 0, got {}",
                self.gamma0
            )));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(EitError::Domain(format!(
                "alpha must be > 0, got {}",
                self.alpha
            )));
        }
        if !(self.g.is_finite() && self.g > 0.0) {
            return Err(EitError::Domain(format!("g must be > 0, got {}", self.g)));
        }
        if !(self.omega_c.re.is_finite() && self.omega_c.im.is_finite()) {
            return Err(EitError::Domain("omega_c must be finite".into()));
        }
        Ok(())
    }

    /// γ₀γ + |Ω_c|², the steady-state EIT denominator.
    pub fn steady_denominator(&self) -> f64 {
        self.gamma0 * Self::GAMMA + self.omega_c.norm_sqr()
    }

    /// D(ω) = (γ₀ − iω)(γ − iω) + |Ω_c|².
    pub fn dispersion_denominator(&self, omega: f64) -> Complex64 {
        let i = Complex64::i();
        (self.gamma0 - i * omega) * (Self::GAMMA - i * omega) + self.omega_c.norm_sqr()
    }

    /// αΓ/4, the stand-in for |g|²NL/c.
    fn depth_rate(&self) -> f64 {
        self.alpha / 4.0
    }
}

/// Dimensionless propagation coefficients at one two-photon detuning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PropagationCoefficients {
    /// Λ₀L.
    pub x0: Complex64,
    /// κ_aL (free-space phase dropped).
    pub xa: Complex64,
    /// κ_bL.
    pub xb: Complex64,
    /// κ_cL.
    pub xc: Complex64,
    /// Amplitude transmission factor e^{−κ_aL}.
    pub c1: Complex64,
    /// Gain multiplying δa_c in the fluctuation part of the output field.
    pub mu_b: Complex64,
    /// Gain multiplying δa_c† in the fluctuation part of the output field.
    pub mu_c: Complex64,
    /// Whether the degenerate branch (X_a ≈ X_0) was used.
    pub degenerate_branch: bool,
}

impl PropagationCoefficients {
    /// Intensity transmission |c₁|² without coupling-field fluctuations.
    pub fn intensity_transmission(&self) -> f64 {
        self.c1.norm_sqr()
    }

    /// Copy with the fluctuation gains forced to zero.
    pub fn without_fluctuations(&self) -> Self {
        PropagationCoefficients {
            xb: Complex64::new(0.0, 0.0),
            xc: Complex64::new(0.0, 0.0),
            mu_b: Complex64::new(0.0, 0.0),
            mu_c: Complex64::new(0.0, 0.0),
            ..*self
        }
    }

    pub fn max_gain(&self) -> f64 {
        self.mu_b.norm().max(self.mu_c.norm())
    }
}

/// Evaluates the propagation coefficients for probe mean amplitude `probe_amp`
/// (β_p for a coherent probe, zero for a Fock probe).
pub fn propagation_coefficients(
    cfg: &EitConfig,
    omega: f64,
    probe_amp: Complex64,
) -> Result<PropagationCoefficients> {
    cfg.validate()?;
    if !omega.is_finite() {
        return Err(EitError::Domain(format!(
            "omega must be finite, got {omega}"
        )));
    }
    let steady = cfg.steady_denominator();
    let d = cfg.dispersion_denominator(omega);
    if steady == 0.0 || d.norm() == 0.0 {
        return Err(EitError::Domain(
            "pole of the dispersion denominator (gamma0 = 0 with omega_c = 0)".into(),
        ));
    }

    let k = cfg.depth_rate();
    let i = Complex64::i();
    let dephase = cfg.gamma0 - i * omega;
    let gain = cfg.g * probe_amp;

    let x0 = Complex64::new(k * cfg.gamma0 / steady, 0.0);
    let xa = k * dephase / d;
    let xb = k * (dephase / d) * (cfg.omega_c.conj() / steady) * gain;
    let xc = k * (cfg.gamma0 / d) * (cfg.omega_c / steady) * gain;
    let c1 = (-xa).exp();

    let delta = xa - x0;
    let degenerate_branch = delta.norm() <= BRANCH_EPS;
    let factor = if degenerate_branch {
        -c1
    } else {
        exp_divided_difference(xa, x0)
    };

    Ok(PropagationCoefficients {
        x0,
        xa,
        xb,
        xc,
        c1,
        mu_b: factor * xb,
        mu_c: factor * xc,
        degenerate_branch,
    })
}

/// (e^{−a} − e^{−b}) / (a − b), evaluated without cancellation for a close to b.
fn exp_divided_difference(a: Complex64, b: Complex64) -> Complex64 {
    let delta = a - b;
    // (e^{−δ} − 1)/δ = −h(−δ) with h(z) = (e^z − 1)/z
    -(-b).exp() * exprel(-delta)
}

/// h(z) = (e^z − 1)/z, with h(0) = 1.
fn exprel(z: Complex64) -> Complex64 {
    if z.norm() < 0.5 {
        let mut term = Complex64::new(1.0, 0.0);
        let mut sum = term;
        for k in 2..40 {
            term *= z / k as f64;
            sum += term;
            if term.norm() < 1e-17 * sum.norm() {
                break;
            }
        }
        sum
    } else {
        (z.exp() - 1.0) / z
    }
}

/// Steady-state mean values at the medium output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SteadyStateMeans {
    /// ⟨a_pL⟩.
    pub probe_out: Complex64,
    /// ⟨σ₁₃⟩.
    pub sigma13: Complex64,
    /// ⟨σ₁₂⟩.
    pub sigma12: Complex64,
}

/// Steady-state means of the output probe amplitude and the atomic coherences.
///
/// ⟨σ₁₂⟩ = iΩ_c*/γ₀ ⟨σ₁₃⟩ is written as −gΩ_c*/(γ₀γ + |Ω_c|²) ⟨a_pL⟩, which is
/// the same expression for γ₀ > 0 and reduces to −g⟨a_pL⟩/Ω_c at γ₀ = 0.
pub fn steady_state_means(cfg: &EitConfig, beta_p: Complex64) -> Result<SteadyStateMeans> {
    cfg.validate()?;
    let steady = cfg.steady_denominator();
    if steady == 0.0 {
        return Err(EitError::Domain(
            "gamma0 = 0 with omega_c = 0 has no dark state".into(),
        ));
    }
    let x0 = cfg.depth_rate() * cfg.gamma0 / steady;
    let probe_out = (-x0).exp() * beta_p;
    let sigma13 = Complex64::i() * cfg.g * cfg.gamma0 / steady * probe_out;
    let sigma12 = -cfg.g * cfg.omega_c.conj() / steady * probe_out;
    Ok(SteadyStateMeans {
        probe_out,
        sigma13,
        sigma12,
    })
}
