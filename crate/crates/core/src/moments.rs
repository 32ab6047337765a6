//! Moments of the coupling-field fluctuation operator δa_c.
//!
//! The analytic engine works with moments up to total order two of
//! c₂ = μ_b δa + μ_c δa†. Both supported coupling states are Gaussian with
//! zero fluctuation mean, so the first neglected contribution is of order four.

use num_complex::Complex64;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::error::{EitError, Result};

/// Quantum state of the strong coupling field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum CouplingState {
    Coherent {
        beta_c: Complex64,
    },
    /// D(β_c)S(ξ_c)|0⟩ with ξ_c = r·e^{iθ}.
    SqueezedCoherent {
        beta_c: Complex64,
        r: f64,
        theta: f64,
    },
}

impl CouplingState {
    pub fn coherent(beta_c: Complex64) -> Self {
        CouplingState::Coherent { beta_c }
    }

    pub fn squeezed(beta_c: Complex64, r: f64, theta: f64) -> Result<Self> {
        if !(r.is_finite() && r >= 0.0) {
            return Err(EitError::Domain(format!(
                "squeeze parameter must be >= 0, got {r}"
            )));
        }
        if !theta.is_finite() {
            return Err(EitError::Domain("squeeze phase must be finite".into()));
        }
        Ok(CouplingState::SqueezedCoherent {
            beta_c,
            r,
            theta: theta.rem_euclid(std::f64::consts::TAU),
        })
    }

    pub fn beta_c(&self) -> Complex64 {
        match *self {
            CouplingState::Coherent { beta_c } | CouplingState::SqueezedCoherent { beta_c, .. } => {
                beta_c
            }
        }
    }

    /// Squeeze parameter r (zero for a coherent state).
    pub fn squeeze(&self) -> f64 {
        match *self {
            CouplingState::Coherent { .. } => 0.0,
            CouplingState::SqueezedCoherent { r, .. } => r,
        }
    }
}

/// The four second-order moments of δa_c.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SecondMoments {
    /// ⟨δa†δa⟩.
    pub m_nn: Complex64,
    /// ⟨δaδa⟩.
    pub m_aa: Complex64,
    /// ⟨δa†δa†⟩.
    pub m_cc: Complex64,
    /// ⟨δaδa†⟩.
    pub m_an: Complex64,
}

impl SecondMoments {
    pub fn vacuum() -> Self {
        SecondMoments {
            m_nn: Complex64::new(0.0, 0.0),
            m_aa: Complex64::new(0.0, 0.0),
            m_cc: Complex64::new(0.0, 0.0),
            m_an: Complex64::new(1.0, 0.0),
        }
    }
}

/// (⟨δa⟩, ⟨δa†⟩), which vanish for every supported coupling state.
pub fn first_moments(state: &CouplingState) -> (Complex64, Complex64) {
    match state {
        CouplingState::Coherent { .. } | CouplingState::SqueezedCoherent { .. } => {
            (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0))
        }
    }
}

/// Second-order fluctuation moments. The squeezed values use the sign of
/// ⟨δaδa⟩ = +½sinh(2r)e^{iθ}.
pub fn second_moments(state: &CouplingState) -> SecondMoments {
    match *state {
        CouplingState::Coherent { .. } => SecondMoments::vacuum(),
        CouplingState::SqueezedCoherent { r, theta, .. } => {
            let an = 1.0 + r.sinh().powi(2);
            let pair = Complex64::from_polar(0.5 * (2.0 * r).sinh(), theta);
            // an − 1 is exact, so the commutator holds to the last bit
            SecondMoments {
                m_nn: Complex64::new(an - 1.0, 0.0),
                m_aa: pair,
                m_cc: pair.conj(),
                m_an: Complex64::new(an, 0.0),
            }
        }
    }
}

/// ⟨(c₂†)^j (c₂)^k⟩ for c₂ = μ_b δa + μ_c δa†, valid for j + k ≤ 2.
pub fn c2_moments(
    j: usize,
    k: usize,
    mu_b: Complex64,
    mu_c: Complex64,
    m: &SecondMoments,
) -> Result<Complex64> {
    let zero = Complex64::new(0.0, 0.0);
    let (bs, cs) = (mu_b.conj(), mu_c.conj());
    let value = match (j, k) {
        (0, 0) => Complex64::new(1.0, 0.0),
        (1, 0) | (0, 1) => zero,
        (1, 1) => bs * mu_b * m.m_nn + bs * mu_c * m.m_cc + cs * mu_b * m.m_aa + cs * mu_c * m.m_an,
        (2, 0) => bs * bs * m.m_cc + bs * cs * (m.m_nn + m.m_an) + cs * cs * m.m_aa,
        (0, 2) => mu_b * mu_b * m.m_aa + mu_b * mu_c * (m.m_nn + m.m_an) + mu_c * mu_c * m.m_cc,
        _ => return Err(EitError::Order { order: j + k }),
    };
    Ok(value)
}

/// ln(n!) through the log-gamma function.
pub fn ln_factorial(n: usize) -> f64 {
    if n < 2 {
        0.0
    } else {
        ln_gamma(n as f64 + 1.0)
    }
}

/// n! in floating point, exact up to 22! and within an ulp or two up to 170!.
fn factorial(n: usize) -> f64 {
    (2..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// χ_{mnl} = (−1)^l / (l! √(m! n!)).
pub fn chi(m: usize, n: usize, l: usize) -> f64 {
    let magnitude = if m.max(n).max(l) <= 170 {
        1.0 / (factorial(l) * (factorial(m) * factorial(n)).sqrt())
    } else {
        (-0.5 * (ln_factorial(m) + ln_factorial(n)) - ln_factorial(l)).exp()
    };
    if l.is_multiple_of(2) {
        magnitude
    } else {
        -magnitude
    }
}

/// Table of ln(n!) for repeated use inside series loops.
#[derive(Debug, Clone)]
pub(crate) struct LnFactorials(Vec<f64>);

impl LnFactorials {
    pub(crate) fn new() -> Self {
        LnFactorials(vec![0.0, 0.0])
    }

    pub(crate) fn get(&mut self, n: usize) -> f64 {
        while self.0.len() <= n {
            let next = self.0.len();
            self.0.push(ln_factorial(next));
        }
        self.0[n]
    }
}
