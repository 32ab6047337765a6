//! Output state, transmittance and fidelity of the probe field.
//!
//! The output density matrix is assembled from the normal-ordered series
//!
//! ρ_mn = Σ_l χ_{mnl} ⟨(c₁*a† + c₂†)^{l+n} (c₁a + c₂)^{l+m}⟩,
//!
//! with the coupling-field fluctuation part c₂ expanded binomially and kept to
//! total order two. Fidelity follows the convention F = √|⟨ψ_in|ρ_out|ψ_in⟩|.
//! This is an overlap with the pure input state and is *not* the Uhlmann
//! fidelity; for a Fock input it reduces to |c₁|^{n_p0}.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::coefficients::{propagation_coefficients, EitConfig, PropagationCoefficients};
use crate::error::{EitError, Result};
use crate::moments::{c2_moments, second_moments, CouplingState, LnFactorials, SecondMoments};

/// Input state of the probe field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ProbeState {
    Coherent { beta_p: Complex64 },
    Fock { n_p0: usize },
}

impl ProbeState {
    pub fn coherent(beta_p: Complex64) -> Self {
        ProbeState::Coherent { beta_p }
    }

    pub fn fock(n_p0: usize) -> Self {
        ProbeState::Fock { n_p0 }
    }

    /// Coherent probe with real amplitude √n.
    pub fn coherent_with_mean(n: f64) -> Self {
        ProbeState::Coherent {
            beta_p: Complex64::new(n.sqrt(), 0.0),
        }
    }

    pub fn mean_photons(&self) -> f64 {
        match *self {
            ProbeState::Coherent { beta_p } => beta_p.norm_sqr(),
            ProbeState::Fock { n_p0 } => n_p0 as f64,
        }
    }

    /// ⟨a_p0⟩: β_p for a coherent probe, zero for a Fock probe.
    pub fn amplitude(&self) -> Complex64 {
        match *self {
            ProbeState::Coherent { beta_p } => beta_p,
            ProbeState::Fock { .. } => Complex64::new(0.0, 0.0),
        }
    }
}

/// Basis size and l-series controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncationPolicy {
    /// Fixed probe basis size; `None` picks one from the input photon number.
    pub dim: Option<usize>,
    /// Upper bound on the input-state probability outside the basis.
    pub tail_tol: f64,
    /// Size, relative to the running sum, below which an l-series term counts
    /// as negligible.
    pub l_tol: f64,
    /// Number of consecutive negligible terms that ends an l-series.
    pub l_settle: usize,
    /// Largest l before the series is declared divergent.
    pub l_cap: usize,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy {
            dim: None,
            tail_tol: 1e-14,
            l_tol: 1e-12,
            l_settle: 5,
            l_cap: 500,
        }
    }
}

impl TruncationPolicy {
    /// Whether an l-series term of magnitude `size` is negligible. Alternating
    /// sums can end far below their largest term, so the test is against the
    /// running sum, floored at the rounding level of the largest term.
    pub fn settled(&self, size: f64, sum: f64, largest: f64) -> bool {
        size <= (self.l_tol * sum).max(f64::EPSILON * largest)
    }

    pub fn with_dim(dim: usize) -> Self {
        TruncationPolicy {
            dim: Some(dim),
            ..Self::default()
        }
    }

    /// Probe basis size for `probe`, checked against the tail tolerance.
    ///
    /// The automatic size starts at max(20, ⌈n + 8√(n+1)⌉) and grows until the
    /// Poisson tail of a coherent input drops below `tail_tol`.
    pub fn basis_dim(&self, probe: &ProbeState) -> Result<usize> {
        let tail_of = |dim: usize| match *probe {
            ProbeState::Coherent { beta_p } => poisson_tail(beta_p.norm_sqr(), dim),
            ProbeState::Fock { n_p0 } => {
                if n_p0 < dim {
                    0.0
                } else {
                    1.0
                }
            }
        };
        match self.dim {
            Some(dim) => {
                if dim < 2 {
                    return Err(EitError::Dimension(format!("basis size {dim} < 2")));
                }
                let tail = tail_of(dim);
                if tail >= self.tail_tol {
                    return Err(EitError::TailMass {
                        tail,
                        tol: self.tail_tol,
                        dim,
                    });
                }
                Ok(dim)
            }
            None => {
                let n = probe.mean_photons();
                let mut dim = 20usize.max((n + 8.0 * (n + 1.0).sqrt()).ceil() as usize);
                while tail_of(dim) >= self.tail_tol {
                    dim += 1;
                    if dim > 4096 {
                        return Err(EitError::Dimension(format!(
                            "probe with mean photon number {n} needs more than 4096 levels"
                        )));
                    }
                }
                Ok(dim)
            }
        }
    }
}

/// P(N ≥ dim) for a Poisson distribution of mean `mean`.
pub fn poisson_tail(mean: f64, dim: usize) -> f64 {
    if mean == 0.0 {
        return 0.0;
    }
    let ln_mean = mean.ln();
    let mut lf = LnFactorials::new();
    let mut tail = 0.0;
    let mut n = dim;
    loop {
        let p = (n as f64 * ln_mean - mean - lf.get(n)).exp();
        tail += p;
        // past the mode the terms shrink at least geometrically
        if n as f64 > mean && p <= 1e-18 * tail.max(1e-300) {
            break;
        }
        if p == 0.0 && n as f64 > mean {
            break;
        }
        n += 1;
    }
    tail
}

/// Fock-basis amplitudes ⟨n|β⟩ for n < dim.
pub fn coherent_weights(beta: Complex64, dim: usize) -> DVector<Complex64> {
    let mut lf = LnFactorials::new();
    let r2 = beta.norm_sqr();
    let (r, phase) = beta.to_polar();
    DVector::from_iterator(
        dim,
        (0..dim).map(|n| {
            let mag = if n == 0 {
                (-0.5 * r2).exp()
            } else if r == 0.0 {
                0.0
            } else {
                (-0.5 * r2 + n as f64 * r.ln() - 0.5 * lf.get(n)).exp()
            };
            Complex64::from_polar(mag, n as f64 * phase)
        }),
    )
}

/// √|⟨β|c₁β⟩|² = exp(−|β|²|1 − c₁|²/2), the fluctuation-free coherent fidelity.
pub fn coherent_baseline_fidelity(beta: Complex64, c1: Complex64) -> f64 {
    (-0.5 * beta.norm_sqr() * (Complex64::new(1.0, 0.0) - c1).norm_sqr()).exp()
}

/// Output photon distribution of a Fock input through the loss series
/// ρ_nn = Σ_{k=n}^{N} χ_{nn(k−n)} N!/(N−k)! |c₁|^{2k}.
///
/// Returns the distribution and an estimate of its rounding error.
pub fn fock_diagonal_series(n_p0: usize, c1_abs2: f64) -> (Vec<f64>, f64) {
    let mut lf = LnFactorials::new();
    let mut worst = 0.0f64;
    let diag = (0..=n_p0)
        .map(|n| {
            let mut sum = 0.0;
            let mut abs_sum = 0.0;
            for k in n..=n_p0 {
                // N!/(n!(k−n)!(N−k)!) = C(N, k)·C(k, n)
                let coeff = match exact_binomial(n_p0, k).zip(exact_binomial(k, n)) {
                    Some((a, b)) => a as f64 * b as f64,
                    None => (-lf.get(n) - lf.get(k - n) + lf.get(n_p0) - lf.get(n_p0 - k)).exp(),
                };
                let term = coeff * c1_abs2.powi(k as i32);
                let signed = if (k - n) % 2 == 0 { term } else { -term };
                sum += signed;
                abs_sum += term;
            }
            worst = worst.max(abs_sum);
            sum
        })
        .collect();
    (diag, (n_p0 as f64 + 4.0) * f64::EPSILON * worst)
}

fn exact_binomial(n: usize, k: usize) -> Option<u64> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > 1 << 53 {
            return None;
        }
    }
    Some(acc as u64)
}

/// Binomial loss distribution C(N, n) t^n (1 − t)^{N−n}.
pub fn fock_diagonal_binomial(n_p0: usize, c1_abs2: f64) -> Vec<f64> {
    let mut lf = LnFactorials::new();
    let t = c1_abs2;
    (0..=n_p0)
        .map(|n| {
            let binom = match exact_binomial(n_p0, n) {
                Some(b) => b as f64,
                None => (lf.get(n_p0) - lf.get(n) - lf.get(n_p0 - n)).exp(),
            };
            binom * t.powi(n as i32) * (1.0 - t).powi((n_p0 - n) as i32)
        })
        .collect()
}

/// Truncated Fock-basis density matrix of the output probe field.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    pub entries: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn new(entries: DMatrix<Complex64>) -> Self {
        DensityMatrix { entries }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, m: usize, n: usize) -> Complex64 {
        self.entries[(m, n)]
    }

    pub fn trace(&self) -> Complex64 {
        self.entries.trace()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|n| self.entries[(n, n)].re).collect()
    }

    /// max |ρ_mn − ρ_nm*|.
    pub fn hermiticity_defect(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for m in 0..d {
            for n in m..d {
                worst = worst.max((self.entries[(m, n)] - self.entries[(n, m)].conj()).norm());
            }
        }
        worst
    }

    /// Smallest eigenvalue of the Hermitian part.
    ///
    /// Entries below 10⁻³⁰ of the largest are flushed to zero first: the
    /// eigensolver underflows to NaN on deep-tail entries near 10⁻²⁰⁰, and the
    /// flush moves no eigenvalue by more than dim·10⁻³⁰ of the scale.
    pub fn min_eigenvalue(&self) -> f64 {
        let mut herm = (&self.entries + self.entries.adjoint()) * Complex64::new(0.5, 0.0);
        let floor = 1e-30 * herm.camax();
        herm.apply(|z| {
            if z.norm() < floor {
                *z = Complex64::new(0.0, 0.0);
            }
        });
        herm.symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// ⟨ψ|ρ|ψ⟩ for a state given by its basis amplitudes.
    pub fn expectation(&self, psi: &DVector<Complex64>) -> Complex64 {
        psi.dotc(&(&self.entries * psi))
    }

    /// Σ_n n ρ_nn.
    pub fn mean_photons(&self) -> f64 {
        (0..self.dim())
            .map(|n| n as f64 * self.entries[(n, n)].re)
            .sum()
    }
}

impl Serialize for DensityMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let d = self.dim();
        let rows = |f: fn(&Complex64) -> f64| -> Vec<Vec<f64>> {
            (0..d)
                .map(|m| (0..d).map(|n| f(&self.entries[(m, n)])).collect())
                .collect()
        };
        let mut s = serializer.serialize_struct("DensityMatrix", 3)?;
        s.serialize_field("dim", &d)?;
        s.serialize_field("re", &rows(|z| z.re))?;
        s.serialize_field("im", &rows(|z| z.im))?;
        s.end()
    }
}

/// Numerical bookkeeping of one engine evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Diagnostics {
    /// Largest l reached by any series.
    pub l_max_used: usize,
    pub dim_used: usize,
    /// |Tr ρ − 1|.
    pub trace_defect: f64,
    /// Smallest eigenvalue of ρ; small negatives come from the order-2 truncation.
    pub min_eigenvalue: f64,
    /// Estimated rounding error of the largest ρ entry.
    pub series_error: f64,
    /// 10·(max(|μ_b|, |μ_c|)³ + l_tol), the slack allowed on positivity and F ≤ 1.
    pub positivity_tol: f64,
}

/// Everything computed for one parameter point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EngineResult {
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "delta_T")]
    pub delta_t: f64,
    #[serde(rename = "delta_F")]
    pub delta_f: f64,
    pub coefficients: PropagationCoefficients,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<DensityMatrix>,
    pub diagnostics: Diagnostics,
}

struct SeriesOutput {
    rho: DensityMatrix,
    l_max: usize,
    error: f64,
}

fn checked_mean(probe: &ProbeState) -> Result<f64> {
    let n = probe.mean_photons();
    if n > 0.0 {
        Ok(n)
    } else {
        Err(EitError::Domain(
            "probe carries no photons; transmittance undefined".into(),
        ))
    }
}

fn probe_coefficients(
    cfg: &EitConfig,
    omega: f64,
    probe: &ProbeState,
) -> Result<PropagationCoefficients> {
    propagation_coefficients(cfg, omega, probe.amplitude())
}

fn transmittance_from(p: &PropagationCoefficients, m: &SecondMoments, n: f64) -> Result<f64> {
    Ok(p.c1.norm_sqr() + c2_moments(1, 1, p.mu_b, p.mu_c, m)?.re / n)
}

/// T = |c₁|² + ⟨c₂†c₂⟩/n_p0.
pub fn transmittance(
    cfg: &EitConfig,
    omega: f64,
    probe: &ProbeState,
    coupling: &CouplingState,
) -> Result<f64> {
    let n = checked_mean(probe)?;
    let p = probe_coefficients(cfg, omega, probe)?;
    transmittance_from(&p, &second_moments(coupling), n)
}

fn build_rho(
    p: &PropagationCoefficients,
    probe: &ProbeState,
    moments: &SecondMoments,
    trunc: &TruncationPolicy,
) -> Result<SeriesOutput> {
    let dim = trunc.basis_dim(probe)?;
    match *probe {
        ProbeState::Fock { n_p0 } => {
            let t = p.c1.norm_sqr();
            let (series, error) = fock_diagonal_series(n_p0, t);
            // beyond ~10 photons the alternating sum loses too many digits
            let (diag, error) = if error <= 1e-10 {
                (series, error)
            } else {
                (fock_diagonal_binomial(n_p0, t), 8.0 * f64::EPSILON)
            };
            let mut entries = DMatrix::zeros(dim, dim);
            for (n, v) in diag.into_iter().enumerate() {
                entries[(n, n)] = Complex64::new(v, 0.0);
            }
            Ok(SeriesOutput {
                rho: DensityMatrix::new(entries),
                l_max: n_p0,
                error,
            })
        }
        ProbeState::Coherent { beta_p } => coherent_rho(p.c1 * beta_p, p, moments, dim, trunc),
    }
}

/// Nonzero ⟨(c₂†)^j c₂^k⟩ with j + k ≤ 2.
fn c2_orders(
    p: &PropagationCoefficients,
    moments: &SecondMoments,
) -> Result<Vec<(usize, usize, Complex64)>> {
    let mut orders = Vec::with_capacity(6);
    for (j, k) in [(0usize, 0usize), (1, 0), (0, 1), (1, 1), (2, 0), (0, 2)] {
        let v = c2_moments(j, k, p.mu_b, p.mu_c, moments)?;
        if v != Complex64::new(0.0, 0.0) {
            orders.push((j, k, v));
        }
    }
    Ok(orders)
}

fn coherent_rho(
    amp: Complex64,
    p: &PropagationCoefficients,
    moments: &SecondMoments,
    dim: usize,
    trunc: &TruncationPolicy,
) -> Result<SeriesOutput> {
    let orders = c2_orders(p, moments)?;

    let (radius, phase) = amp.to_polar();
    let ln_r = radius.ln();
    let mut lf = LnFactorials::new();
    let mut entries = DMatrix::zeros(dim, dim);
    let mut l_max = 0;
    let mut error = 0.0f64;

    for m in 0..dim {
        for n in 0..dim {
            let ln_norm = -0.5 * (lf.get(m) + lf.get(n));
            let mut sum = Complex64::new(0.0, 0.0);
            let mut abs_sum = 0.0;
            let mut largest = 0.0f64;
            let mut quiet = 0;
            let mut l = 0;
            loop {
                if l > trunc.l_cap {
                    return Err(EitError::Convergence {
                        l_cap: trunc.l_cap,
                        m,
                        n,
                    });
                }
                let base = ln_norm - lf.get(l);
                let mut term = Complex64::new(0.0, 0.0);
                for &(j, k, moment) in &orders {
                    if j > l + n || k > l + m {
                        continue;
                    }
                    // (c₁β*)^{l+n−j} (c₁β)^{l+m−k}
                    let power = 2 * l + m + n - j - k;
                    let mag = if power == 0 {
                        base.exp()
                    } else {
                        (base + power as f64 * ln_r).exp()
                    };
                    let rot = (m as f64 - n as f64 - k as f64 + j as f64) * phase;
                    let binom = binomial_small(l + n, j) * binomial_small(l + m, k);
                    term += Complex64::from_polar(mag * binom, rot) * moment;
                }
                if l % 2 == 1 {
                    term = -term;
                }
                sum += term;
                let size = term.norm();
                abs_sum += size;
                largest = largest.max(size);
                if trunc.settled(size, sum.norm(), largest) {
                    quiet += 1;
                    if quiet >= trunc.l_settle {
                        break;
                    }
                } else {
                    quiet = 0;
                }
                l += 1;
            }
            l_max = l_max.max(l);
            let series_error = 4.0 * f64::EPSILON * abs_sum;
            if series_error > RESUM_THRESHOLD && radius > 0.0 {
                // the alternating sum cancels by ~e^{2|c₁β|²}; sum it in closed form
                let (value, err) = resummed_entry(m, n, &orders, ln_norm, ln_r, phase);
                error = error.max(err);
                entries[(m, n)] = value;
            } else {
                error = error.max(series_error);
                entries[(m, n)] = sum;
            }
        }
    }
    Ok(SeriesOutput {
        rho: DensityMatrix::new(entries),
        l_max,
        error,
    })
}

/// Rounding estimate above which a coherent l-series entry is replaced by its
/// closed-form sum.
const RESUM_THRESHOLD: f64 = 1e-14;

/// C(l + n, k) as a polynomial a₀ + a₁l + a₂l² in l, for k ≤ 2.
fn shifted_binomial(n: usize, k: usize) -> [f64; 3] {
    let n = n as f64;
    match k {
        0 => [1.0, 0.0, 0.0],
        1 => [n, 1.0, 0.0],
        2 => [0.5 * n * (n - 1.0), n - 0.5, 0.5],
        _ => unreachable!("only orders up to two are expanded"),
    }
}

/// The l-sum of one ρ entry in closed form, using
/// Σ_l (−x)^l/l! · l(l−1)⋯(l−q+1) = (−x)^q e^{−x} with x = |c₁β|².
fn resummed_entry(
    m: usize,
    n: usize,
    orders: &[(usize, usize, Complex64)],
    ln_norm: f64,
    ln_r: f64,
    phase: f64,
) -> (Complex64, f64) {
    let x = (2.0 * ln_r).exp();
    let mut value = Complex64::new(0.0, 0.0);
    let mut scale = 0.0;
    for &(j, k, moment) in orders {
        let (p, q) = (shifted_binomial(n, j), shifted_binomial(m, k));
        let a0 = p[0] * q[0];
        let a1 = p[0] * q[1] + p[1] * q[0];
        let a2 = p[0] * q[2] + p[1] * q[1] + p[2] * q[0];
        // l² = l(l−1) + l
        let poly = a0 - (a1 + a2) * x + a2 * x * x;
        let power = (m + n) as f64 - (j + k) as f64;
        let mag = (ln_norm + power * ln_r - x).exp() * moment.norm();
        let rot = (m as f64 - n as f64 - k as f64 + j as f64) * phase + moment.arg();
        value += Complex64::from_polar(mag * poly, rot);
        scale += mag * (a0.abs() + (a1 + a2).abs() * x + a2.abs() * x * x);
    }
    (value, 8.0 * f64::EPSILON * scale)
}

/// C(n, k) for k ≤ 2.
fn binomial_small(n: usize, k: usize) -> f64 {
    let n = n as f64;
    match k {
        0 => 1.0,
        1 => n,
        2 => 0.5 * n * (n - 1.0),
        _ => unreachable!("only orders up to two are expanded"),
    }
}

fn fidelity_from(rho: &DensityMatrix, probe: &ProbeState, p: &PropagationCoefficients) -> f64 {
    match *probe {
        ProbeState::Fock { n_p0 } => p.c1.norm().powi(n_p0 as i32),
        ProbeState::Coherent { beta_p } => {
            let w = coherent_weights(beta_p, rho.dim());
            rho.expectation(&w).norm().sqrt()
        }
    }
}

/// Output density matrix ρ^P(L, ω) in a truncated Fock basis.
pub fn output_density_matrix(
    cfg: &EitConfig,
    omega: f64,
    probe: &ProbeState,
    coupling: &CouplingState,
    trunc: &TruncationPolicy,
) -> Result<DensityMatrix> {
    let p = probe_coefficients(cfg, omega, probe)?;
    Ok(build_rho(&p, probe, &second_moments(coupling), trunc)?.rho)
}

/// Fidelity F = √|⟨ψ_in|ρ_out|ψ_in⟩|.
pub fn fidelity(
    cfg: &EitConfig,
    omega: f64,
    probe: &ProbeState,
    coupling: &CouplingState,
    trunc: &TruncationPolicy,
) -> Result<f64> {
    let p = probe_coefficients(cfg, omega, probe)?;
    if let ProbeState::Fock { n_p0 } = *probe {
        return Ok(p.c1.norm().powi(n_p0 as i32));
    }
    let rho = build_rho(&p, probe, &second_moments(coupling), trunc)?.rho;
    Ok(fidelity_from(&rho, probe, &p))
}

/// (ΔT, ΔF): the change caused by coupling-field fluctuations relative to the
/// same point with μ_b = μ_c = 0.
pub fn delta_metrics(
    cfg: &EitConfig,
    omega: f64,
    probe: &ProbeState,
    coupling: &CouplingState,
    trunc: &TruncationPolicy,
) -> Result<(f64, f64)> {
    let r = evaluate_with(cfg, omega, probe, coupling, trunc, false)?;
    Ok((r.delta_t, r.delta_f))
}

/// T, F, ΔT, ΔF and ρ for one parameter point.
pub fn evaluate(
    cfg: &EitConfig,
    omega: f64,
    probe: &ProbeState,
    coupling: &CouplingState,
    trunc: &TruncationPolicy,
) -> Result<EngineResult> {
    evaluate_with(cfg, omega, probe, coupling, trunc, true)
}

/// As [`evaluate`] but without the eigenvalue diagnostic or the stored ρ;
/// used for sweeps.
pub fn evaluate_point(
    cfg: &EitConfig,
    omega: f64,
    probe: &ProbeState,
    coupling: &CouplingState,
    trunc: &TruncationPolicy,
) -> Result<EngineResult> {
    let mut r = evaluate_with(cfg, omega, probe, coupling, trunc, false)?;
    r.rho = None;
    Ok(r)
}

fn evaluate_with(
    cfg: &EitConfig,
    omega: f64,
    probe: &ProbeState,
    coupling: &CouplingState,
    trunc: &TruncationPolicy,
    spectrum: bool,
) -> Result<EngineResult> {
    let p = probe_coefficients(cfg, omega, probe)?;
    evaluate_from(p, probe, coupling, trunc, spectrum)
}

/// As [`evaluate`], starting from given propagation coefficients. Passing
/// [`PropagationCoefficients::without_fluctuations`] gives the semiclassical limit.
pub fn evaluate_coefficients(
    p: &PropagationCoefficients,
    probe: &ProbeState,
    coupling: &CouplingState,
    trunc: &TruncationPolicy,
) -> Result<EngineResult> {
    evaluate_from(*p, probe, coupling, trunc, true)
}

fn evaluate_from(
    p: PropagationCoefficients,
    probe: &ProbeState,
    coupling: &CouplingState,
    trunc: &TruncationPolicy,
    spectrum: bool,
) -> Result<EngineResult> {
    let n = checked_mean(probe)?;
    let moments = second_moments(coupling);
    let full = build_rho(&p, probe, &moments, trunc)?;
    let t = transmittance_from(&p, &moments, n)?;
    let f = fidelity_from(&full.rho, probe, &p);

    let (delta_t, delta_f, l_extra) = match probe {
        ProbeState::Fock { .. } => (0.0, 0.0, 0),
        ProbeState::Coherent { .. } => {
            let bare = p.without_fluctuations();
            let base = build_rho(&bare, probe, &moments, trunc)?;
            let t0 = transmittance_from(&bare, &moments, n)?;
            let f0 = fidelity_from(&base.rho, probe, &bare);
            (t - t0, f - f0, base.l_max)
        }
    };

    let diagnostics = Diagnostics {
        l_max_used: full.l_max.max(l_extra),
        dim_used: full.rho.dim(),
        trace_defect: (full.rho.trace() - 1.0).norm(),
        min_eigenvalue: if spectrum {
            full.rho.min_eigenvalue()
        } else {
            f64::NAN
        },
        series_error: full.error,
        positivity_tol: 10.0 * (p.max_gain().powi(3) + trunc.l_tol),
    };
    Ok(EngineResult {
        t,
        f,
        delta_t,
        delta_f,
        coefficients: p,
        rho: Some(full.rho),
        diagnostics,
    })
}
