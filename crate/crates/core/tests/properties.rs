use eit_core::oracle::{
    oracle_evaluate, oracle_from_coefficients, SqueezeConvention, TruncatedSpace,
};
use eit_core::{
    delta_metrics, evaluate, propagation_coefficients, Complex64, CouplingState, EitConfig,
    ProbeState, TruncationPolicy,
};
use proptest::prelude::*;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn cfg(gamma0: f64, omega_c: f64) -> EitConfig {
    EitConfig::new(gamma0, c(omega_c), 200.0, 0.05).unwrap()
}

fn coherent_coupling(omega_c: f64) -> CouplingState {
    CouplingState::coherent(c(omega_c / 0.05))
}

#[test]
fn delta_t_independent_of_probe_amplitude() {
    let trunc = TruncationPolicy::default();
    for gamma0 in [1e-3, 5e-3, 2e-2] {
        for omega in [0.0, 3e-3] {
            let cfg = cfg(gamma0, 0.5);
            let base = delta_metrics(
                &cfg,
                omega,
                &ProbeState::coherent(c(1.0)),
                &coherent_coupling(0.5),
                &trunc,
            )
            .unwrap()
            .0;
            for s in [0.5, 2.0, 10f64.sqrt()] {
                let probe = ProbeState::coherent(Complex64::new(s * 0.6, s * 0.8));
                let dt = delta_metrics(&cfg, omega, &probe, &coherent_coupling(0.5), &trunc)
                    .unwrap()
                    .0;
                assert!((dt - base).abs() < 1e-12, "s = {s}: {dt} vs {base}");
            }
        }
    }
}

#[test]
fn stronger_coupling_shrinks_both_deltas() {
    let trunc = TruncationPolicy::default();
    let probe = ProbeState::coherent(c(1.0));
    for (gamma0, omega) in [(1e-3, 0.0), (5e-3, 0.0), (2e-2, 0.0), (5e-3, 2e-3)] {
        let mut last = (f64::INFINITY, f64::INFINITY);
        for omega_c in [1.0, 2.0, 4.0, 8.0] {
            let (dt, df) = delta_metrics(
                &cfg(gamma0, omega_c),
                omega,
                &probe,
                &coherent_coupling(omega_c),
                &trunc,
            )
            .unwrap();
            assert!(
                dt < last.0 && df.abs() < last.1,
                "gamma0 = {gamma0}, omega_c = {omega_c}"
            );
            last = (dt, df.abs());
        }
    }
}

#[test]
fn squeezed_coupling_enhances_delta_t() {
    let trunc = TruncationPolicy::default();
    let probe = ProbeState::coherent(c(1.0));
    let squeezed = CouplingState::squeezed(c(10.0), 1.0, 0.0).unwrap();
    for k in 0..=20 {
        let gamma0 = 1e-4 * 10f64.powf(k as f64 * 0.15);
        let cfg = cfg(gamma0, 0.5);
        let plain = delta_metrics(&cfg, 0.0, &probe, &coherent_coupling(0.5), &trunc)
            .unwrap()
            .0;
        let more = delta_metrics(&cfg, 0.0, &probe, &squeezed, &trunc)
            .unwrap()
            .0;
        assert!(more > plain, "gamma0 = {gamma0}");
    }
}

#[test]
fn fidelity_gap_grows_with_photon_number() {
    let trunc = TruncationPolicy::default();
    let cfg = cfg(5e-3, 0.5);
    let one = delta_metrics(
        &cfg,
        0.0,
        &ProbeState::coherent_with_mean(1.0),
        &coherent_coupling(0.5),
        &trunc,
    )
    .unwrap()
    .1;
    let ten = delta_metrics(
        &cfg,
        0.0,
        &ProbeState::coherent_with_mean(10.0),
        &coherent_coupling(0.5),
        &trunc,
    )
    .unwrap()
    .1;
    assert!(ten.abs() > one.abs());
}

#[test]
fn fluctuation_free_state_matches_oracle() {
    let probe = ProbeState::coherent(Complex64::new(0.9, 0.4));
    let coupling = coherent_coupling(0.5);
    let space = TruncatedSpace::new(30, 8).unwrap();
    for (gamma0, omega) in [(1e-3, 0.0), (1e-2, 4e-3), (0.0, 1e-2)] {
        let p = propagation_coefficients(&cfg(gamma0, 0.5), omega, probe.amplitude())
            .unwrap()
            .without_fluctuations();
        let engine =
            eit_core::evaluate_coefficients(&p, &probe, &coupling, &TruncationPolicy::with_dim(30))
                .unwrap();
        let oracle = oracle_from_coefficients(
            &p,
            &probe,
            &coupling,
            &space,
            SqueezeConvention::PrintedMoments,
        )
        .unwrap();
        let rho = engine.rho.unwrap();
        let gap = (rho.entries.clone() - oracle.rho.entries).camax();
        assert!(gap < 1e-12, "gamma0 = {gamma0}, omega = {omega}: {gap:e}");
        assert!((engine.f - oracle.f).abs() < 1e-12);
    }
}

#[test]
fn engine_tracks_oracle_on_squeezed_coupling() {
    let probe = ProbeState::coherent(c(1.0));
    for r in [0.25, 0.5] {
        let coupling = CouplingState::squeezed(c(10.0), r, 0.6).unwrap();
        let space = TruncatedSpace::for_states(&probe, &coupling).unwrap();
        let cfg = EitConfig::new(5e-3, c(0.5), 50.0, 0.05).unwrap();
        let engine = evaluate(&cfg, 2e-3, &probe, &coupling, &TruncationPolicy::default()).unwrap();
        let oracle = oracle_evaluate(&cfg, 2e-3, &probe, &coupling, &space).unwrap();
        assert!((engine.t - oracle.t).abs() < 1e-3);
        assert!((engine.f - oracle.f).abs() < 1e-3);
    }
}

fn coupling_states() -> impl Strategy<Value = CouplingState> {
    prop_oneof![
        Just(coherent_coupling(0.5)),
        (0.0f64..1.2, 0.0f64..6.3)
            .prop_map(|(r, t)| CouplingState::squeezed(c(10.0), r, t).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn density_matrix_invariants(
        gamma0 in 0.0f64..0.1,
        omega in -0.03f64..0.03,
        beta in (0.1f64..2.0, 0.0f64..6.3),
        coupling in coupling_states(),
    ) {
        prop_assume!(gamma0 > 0.0 || omega != 0.0);
        let probe = ProbeState::coherent(Complex64::from_polar(beta.0, beta.1));
        let trunc = TruncationPolicy::default();
        let r = evaluate(&cfg(gamma0, 0.5), omega, &probe, &coupling, &trunc).unwrap();
        let rho = r.rho.as_ref().unwrap();
        let d = &r.diagnostics;
        prop_assert!(rho.hermiticity_defect() < 1e-12);
        prop_assert!(d.trace_defect <= trunc.tail_tol + trunc.l_tol + d.series_error);
        prop_assert!(d.min_eigenvalue >= -d.positivity_tol);
        prop_assert!(r.f >= 0.0 && r.f <= 1.0 + d.positivity_tol);
        prop_assert!(r.t >= 0.0);
        prop_assert!((rho.mean_photons() - r.t * probe.mean_photons()).abs() < 1e-9);
    }

    #[test]
    fn fock_probes_ignore_the_coupling_state(
        gamma0 in 0.0f64..0.1,
        omega in -0.03f64..0.03,
        n_p0 in 1usize..12,
        coupling in coupling_states(),
    ) {
        prop_assume!(gamma0 > 0.0 || omega != 0.0);
        let probe = ProbeState::fock(n_p0);
        let trunc = TruncationPolicy::default();
        let a = evaluate(&cfg(gamma0, 0.5), omega, &probe, &coupling, &trunc).unwrap();
        let b = evaluate(&cfg(gamma0, 0.5), omega, &probe, &coherent_coupling(0.5), &trunc).unwrap();
        prop_assert_eq!((a.t, a.f, a.delta_t, a.delta_f), (b.t, b.f, 0.0, 0.0));
        prop_assert!((a.diagnostics.trace_defect) < 1e-12);
    }
}
