//! Brute-force reference for the analytic engine.
//!
//! The output operator A = c₁ (a_p ⊗ I) + I ⊗ (μ_b δa + μ_c δa†) is applied to
//! |ψ⟩ = |probe⟩ ⊗ |fluctuation state⟩ as an explicit matrix on a truncated
//! probe ⊗ coupling space, and every ρ_mn = Σ_l χ_{mnl}⟨A^{l+n}ψ|A^{l+m}ψ⟩ is
//! summed with all fluctuation orders kept. Nothing here uses the analytic
//! moment tables, so agreement with [`crate::engine`] is a genuine check of the
//! order-two truncation.
//!
//! Joint states are stored as `dim_p × dim_c` matrices Ψ with
//! Ψ[i, j] = ⟨i|_p⟨j|_c |Ψ⟩, so (X ⊗ Y)Ψ = X Ψ Yᵀ.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::coefficients::{propagation_coefficients, EitConfig, PropagationCoefficients};
use crate::engine::{coherent_weights, poisson_tail, DensityMatrix, ProbeState, TruncationPolicy};
use crate::error::{EitError, Result};
use crate::moments::{chi, CouplingState, LnFactorials, SecondMoments};

/// Largest joint dimension dim_p·dim_c the oracle accepts.
pub const MAX_JOINT_DIM: usize = 10_000;

/// Tail mass allowed for the probe input state.
pub const PROBE_TAIL_TOL: f64 = 1e-10;

/// Tail mass allowed for the squeezed fluctuation state.
pub const COUPLING_TAIL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SpaceTag {
    Probe,
    Coupling,
    Joint,
}

/// A square operator on one of the truncated spaces.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    pub matrix: DMatrix<Complex64>,
    pub tag: SpaceTag,
}

impl OperatorMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn dagger(&self) -> Self {
        OperatorMatrix {
            matrix: self.matrix.adjoint(),
            tag: self.tag,
        }
    }

    pub fn compose(&self, other: &OperatorMatrix) -> Result<Self> {
        if self.tag != other.tag || self.dim() != other.dim() {
            return Err(EitError::Dimension(
                "operators live on different spaces".into(),
            ));
        }
        Ok(OperatorMatrix {
            matrix: &self.matrix * &other.matrix,
            tag: self.tag,
        })
    }

    /// Kronecker product, probe factor first.
    pub fn kron(&self, other: &OperatorMatrix) -> Self {
        OperatorMatrix {
            matrix: self.matrix.kronecker(&other.matrix),
            tag: SpaceTag::Joint,
        }
    }

    pub fn identity(dim: usize, tag: SpaceTag) -> Self {
        OperatorMatrix {
            matrix: DMatrix::identity(dim, dim),
            tag,
        }
    }
}

/// Annihilation operator on `dim` levels: ⟨m|a|n⟩ = √n δ_{m,n−1}.
pub fn ladder(dim: usize, tag: SpaceTag) -> Result<OperatorMatrix> {
    if dim < 2 {
        return Err(EitError::Dimension(format!(
            "ladder operator needs dim >= 2, got {dim}"
        )));
    }
    let mut matrix = DMatrix::zeros(dim, dim);
    for n in 1..dim {
        matrix[(n - 1, n)] = Complex64::new((n as f64).sqrt(), 0.0);
    }
    Ok(OperatorMatrix { matrix, tag })
}

/// Sizes of the probe and coupling-fluctuation bases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TruncatedSpace {
    pub dim_p: usize,
    pub dim_c: usize,
}

impl TruncatedSpace {
    pub fn new(dim_p: usize, dim_c: usize) -> Result<Self> {
        if dim_p < 2 || dim_c < 2 {
            return Err(EitError::Dimension(format!(
                "truncated space {dim_p}x{dim_c}: both sizes must be >= 2"
            )));
        }
        if dim_p * dim_c > MAX_JOINT_DIM {
            return Err(EitError::Dimension(format!(
                "joint dimension {} exceeds {MAX_JOINT_DIM}",
                dim_p * dim_c
            )));
        }
        Ok(TruncatedSpace { dim_p, dim_c })
    }

    /// Smallest space (probe ≥ 30, coupling ≥ 24 levels) that holds both states.
    pub fn for_states(probe: &ProbeState, coupling: &CouplingState) -> Result<Self> {
        let trunc = TruncationPolicy {
            tail_tol: PROBE_TAIL_TOL,
            ..TruncationPolicy::default()
        };
        let dim_p = trunc.basis_dim(probe)?.max(30);
        let r = coupling.squeeze();
        let mut dim_c = 24;
        if r > 0.0 {
            dim_c = 40;
            while squeezed_vacuum_tail(r, dim_c) >= 0.01 * COUPLING_TAIL_TOL {
                dim_c += 10;
            }
        }
        TruncatedSpace::new(dim_p, dim_c)
    }
}

/// Probability that a squeezed vacuum of strength r has ≥ dim photons.
///
/// P(2k) = (2k)! / (2^k k!)² · tanh(r)^{2k} / cosh(r); odd counts vanish.
pub fn squeezed_vacuum_tail(r: f64, dim: usize) -> f64 {
    if r == 0.0 {
        return 0.0;
    }
    let t = r.tanh();
    let mut lf = LnFactorials::new();
    let mut tail = 0.0;
    let mut k = dim.div_ceil(2);
    loop {
        let ln_p = lf.get(2 * k) - 2.0 * (k as f64 * 2f64.ln() + lf.get(k))
            + 2.0 * k as f64 * t.ln()
            - r.cosh().ln();
        let p = ln_p.exp();
        tail += p;
        if p <= 1e-18 * tail || p == 0.0 {
            break;
        }
        k += 1;
    }
    tail
}

/// Which sign the squeeze generator carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SqueezeConvention {
    /// S(ξ) = exp[½(ξ*a² − ξa†²)]; gives ⟨δaδa⟩ = −½sinh(2r)e^{iθ}.
    Operator,
    /// S(−ξ), whose pair moment is ⟨δaδa⟩ = +½sinh(2r)e^{iθ} as in the
    /// analytic moment table.
    PrintedMoments,
}

/// Fluctuation-frame state of the coupling field: the vacuum for a coherent
/// field, a squeezed vacuum S(ξ)|0⟩ for a squeezed-coherent one.
///
/// The squeezed vacuum is built by exponentiating the generator on a basis
/// twice the requested size; the probability left above `space.dim_c` must be
/// below [`COUPLING_TAIL_TOL`].
pub fn fluctuation_state(
    space: &TruncatedSpace,
    coupling: &CouplingState,
    convention: SqueezeConvention,
) -> Result<DVector<Complex64>> {
    let dim = space.dim_c;
    let mut vacuum = DVector::zeros(dim);
    vacuum[0] = Complex64::new(1.0, 0.0);
    let (r, theta) = match *coupling {
        CouplingState::Coherent { .. } => return Ok(vacuum),
        CouplingState::SqueezedCoherent { r, theta, .. } => (r, theta),
    };
    if r == 0.0 {
        return Ok(vacuum);
    }
    let xi = match convention {
        SqueezeConvention::Operator => Complex64::from_polar(r, theta),
        SqueezeConvention::PrintedMoments => -Complex64::from_polar(r, theta),
    };

    let work = 2 * dim.max(10);
    let a = ladder(work, SpaceTag::Coupling)?.matrix;
    let a2 = &a * &a;
    let generator = (&a2 * xi.conj() - a2.adjoint() * xi) * Complex64::new(0.5, 0.0);
    let squeeze = generator.exp();
    let full = squeeze.column(0).into_owned();

    let tail: f64 = full.iter().skip(dim).map(|z| z.norm_sqr()).sum();
    if tail >= COUPLING_TAIL_TOL {
        return Err(EitError::TailMass {
            tail,
            tol: COUPLING_TAIL_TOL,
            dim,
        });
    }
    let mut psi = full.rows(0, dim).into_owned();
    let norm = psi.norm();
    psi /= Complex64::new(norm, 0.0);
    Ok(psi)
}

/// The four second-order moments evaluated as matrix expectation values of the
/// literal squeeze operator state.
pub fn oracle_moments(coupling: &CouplingState, space: &TruncatedSpace) -> Result<SecondMoments> {
    moments_with(coupling, space, SqueezeConvention::Operator)
}

/// As [`oracle_moments`], with an explicit sign convention for the squeeze operator.
pub fn moments_with(
    coupling: &CouplingState,
    space: &TruncatedSpace,
    convention: SqueezeConvention,
) -> Result<SecondMoments> {
    let psi = fluctuation_state(space, coupling, convention)?;
    // one spare level so that a a† is exact on the occupied levels
    let dim = space.dim_c + 1;
    let mut padded = DVector::zeros(dim);
    padded.rows_mut(0, space.dim_c).copy_from(&psi);
    let a = ladder(dim, SpaceTag::Coupling)?.matrix;
    let ad = a.adjoint();
    let expect = |op: DMatrix<Complex64>| padded.dotc(&(op * &padded));
    Ok(SecondMoments {
        m_nn: expect(&ad * &a),
        m_aa: expect(&a * &a),
        m_cc: expect(&ad * &ad),
        m_an: expect(&a * &ad),
    })
}

/// Output of one oracle evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleOutput {
    pub rho: DensityMatrix,
    /// ⟨A†A⟩ / n_p0.
    pub t: f64,
    /// √|⟨ψ_in|ρ|ψ_in⟩|.
    pub f: f64,
    pub l_max_used: usize,
    pub coefficients: PropagationCoefficients,
}

/// Oracle output density matrix (fluctuation state in the printed-moment convention).
pub fn oracle_output_rho(
    cfg: &EitConfig,
    omega: f64,
    probe: &ProbeState,
    coupling: &CouplingState,
    space: &TruncatedSpace,
) -> Result<DensityMatrix> {
    Ok(oracle_evaluate(cfg, omega, probe, coupling, space)?.rho)
}

/// Full oracle evaluation of ρ, T and F.
pub fn oracle_evaluate(
    cfg: &EitConfig,
    omega: f64,
    probe: &ProbeState,
    coupling: &CouplingState,
    space: &TruncatedSpace,
) -> Result<OracleOutput> {
    let p = propagation_coefficients(cfg, omega, probe.amplitude())?;
    oracle_from_coefficients(
        &p,
        probe,
        coupling,
        space,
        SqueezeConvention::PrintedMoments,
    )
}

fn probe_vector(probe: &ProbeState, dim: usize) -> Result<DVector<Complex64>> {
    match *probe {
        ProbeState::Fock { n_p0 } => {
            if n_p0 >= dim {
                return Err(EitError::TailMass {
                    tail: 1.0,
                    tol: PROBE_TAIL_TOL,
                    dim,
                });
            }
            let mut v = DVector::zeros(dim);
            v[n_p0] = Complex64::new(1.0, 0.0);
            Ok(v)
        }
        ProbeState::Coherent { beta_p } => {
            let tail = poisson_tail(beta_p.norm_sqr(), dim);
            if tail >= PROBE_TAIL_TOL {
                return Err(EitError::TailMass {
                    tail,
                    tol: PROBE_TAIL_TOL,
                    dim,
                });
            }
            let mut v = coherent_weights(beta_p, dim);
            let norm = v.norm();
            v /= Complex64::new(norm, 0.0);
            Ok(v)
        }
    }
}

/// Oracle evaluation from precomputed propagation coefficients.
pub fn oracle_from_coefficients(
    p: &PropagationCoefficients,
    probe: &ProbeState,
    coupling: &CouplingState,
    space: &TruncatedSpace,
    convention: SqueezeConvention,
) -> Result<OracleOutput> {
    let policy = TruncationPolicy::default();
    let probe_vec = probe_vector(probe, space.dim_p)?;
    let fluct = fluctuation_state(space, coupling, convention)?;
    let psi: DMatrix<Complex64> = &probe_vec * fluct.transpose();

    let a_p = ladder(space.dim_p, SpaceTag::Probe)?.matrix * p.c1;
    let a_c = ladder(space.dim_c, SpaceTag::Coupling)?.matrix;
    let b_t = (&a_c * p.mu_b + a_c.adjoint() * p.mu_c).transpose();
    let apply = |v: &DMatrix<Complex64>| -> DMatrix<Complex64> { &a_p * v + v * &b_t };

    let mut powers = vec![psi];
    let mut gram: HashMap<(usize, usize), Complex64> = HashMap::new();
    let mut inner = |i: usize, j: usize, powers: &mut Vec<DMatrix<Complex64>>| -> Complex64 {
        while powers.len() <= i.max(j) {
            let next = apply(powers.last().expect("non-empty"));
            powers.push(next);
        }
        *gram
            .entry((i, j))
            .or_insert_with(|| powers[i].dotc(&powers[j]))
    };

    let dim = space.dim_p;
    let mut entries = DMatrix::zeros(dim, dim);
    let mut l_max = 0;
    for m in 0..dim {
        for n in 0..dim {
            let mut sum = Complex64::new(0.0, 0.0);
            let mut largest = 0.0f64;
            let mut quiet = 0;
            let mut l = 0;
            loop {
                if l > policy.l_cap {
                    return Err(EitError::Convergence {
                        l_cap: policy.l_cap,
                        m,
                        n,
                    });
                }
                let term = inner(l + n, l + m, &mut powers) * chi(m, n, l);
                sum += term;
                let size = term.norm();
                largest = largest.max(size);
                if policy.settled(size, sum.norm(), largest) {
                    quiet += 1;
                    if quiet >= policy.l_settle {
                        break;
                    }
                } else {
                    quiet = 0;
                }
                l += 1;
            }
            l_max = l_max.max(l);
            entries[(m, n)] = sum;
        }
    }
    let rho = DensityMatrix::new(entries);

    let t = inner(1, 1, &mut powers).re / probe.mean_photons();
    let f = match *probe {
        ProbeState::Fock { n_p0 } => rho.get(n_p0, n_p0).norm().sqrt(),
        ProbeState::Coherent { beta_p } => rho
            .expectation(&coherent_weights(beta_p, dim))
            .norm()
            .sqrt(),
    };
    Ok(OracleOutput {
        rho,
        t,
        f,
        l_max_used: l_max,
        coefficients: *p,
    })
}

/// Oracle ΔT and ΔF: the same evaluation repeated with μ_b = μ_c = 0.
pub fn oracle_deltas(
    cfg: &EitConfig,
    omega: f64,
    probe: &ProbeState,
    coupling: &CouplingState,
    space: &TruncatedSpace,
) -> Result<(f64, f64)> {
    let p = propagation_coefficients(cfg, omega, probe.amplitude())?;
    let conv = SqueezeConvention::PrintedMoments;
    let full = oracle_from_coefficients(&p, probe, coupling, space, conv)?;
    let bare = oracle_from_coefficients(&p.without_fluctuations(), probe, coupling, space, conv)?;
    Ok((full.t - bare.t, full.f - bare.f))
}
