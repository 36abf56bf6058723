//! Cross-module invariants: nonadaptive reduction, estimator consistency,
//! growth of adaptive times under the harmonic schedule, and the
//! telescoping bound on seeded random kernel sequences.

use adaptlab_core::adaptation::{
    adaptive_convergence_time, marginal_estimate, marginal_exact, AdaptationPolicy, TimeMode,
};
use adaptlab_core::diagnostics::{derive_seed, telescoping_verify};
use adaptlab_core::markov::{convergence_time, ConvergenceTime, KernelFamily, ParamDomain};
use adaptlab_core::scenarios::{build_scenario, Overrides, SCENARIO_IDS};

#[test]
fn constant_policy_times_reduce_to_frozen_times() {
    let family = KernelFamily::two_state(ParamDomain::open(0.0, 1.0));
    let policy = AdaptationPolicy::constant();
    for x in 0..2 {
        for &theta in &[0.1, 0.25, 0.4] {
            for &eps in &[0.1, 0.05, 0.01] {
                let frozen = convergence_time(&family, x, theta, eps, 10_000).unwrap();
                let adaptive = adaptive_convergence_time(
                    x,
                    theta,
                    &policy,
                    &family,
                    eps,
                    10_000,
                    TimeMode::Exact,
                )
                .unwrap();
                assert_eq!(frozen, adaptive, "x={x} theta={theta} eps={eps}");
            }
        }
    }
}

#[test]
fn estimator_tightens_with_replicates_across_scenarios() {
    // Worst-case TV between the Monte Carlo and exact marginals over all
    // built-in scenarios and n <= 50, per replicate budget.
    let mut worst = Vec::new();
    for &replicates in &[10u32, 100, 10_000] {
        let mut max_tv = 0.0_f64;
        for id in SCENARIO_IDS {
            let s = build_scenario(id, &Overrides::default()).unwrap();
            for &n in &[1u64, 5, 50] {
                let exact = marginal_exact(s.x0, s.theta0, &s.policy, &s.family, n).unwrap();
                let est = marginal_estimate(
                    s.x0,
                    s.theta0,
                    &s.policy,
                    &s.family,
                    n,
                    replicates,
                    derive_seed(2024, 0, n),
                )
                .unwrap();
                max_tv = max_tv.max(est.tv_distance(&exact).unwrap());
            }
        }
        worst.push(max_tv);
    }
    assert!(
        worst.windows(2).all(|w| w[0] >= w[1]),
        "worst-case TV should shrink with replicates: {worst:?}"
    );
    assert!(worst[2] < 0.03, "R = 10^4 worst case {}", worst[2]);
}

#[test]
fn harmonic_adaptive_times_grow_linearly_in_restart_index() {
    // Restarted at θ = 1/n, the marginal gap after m moves is
    // n(n-1) / (2 (n+m-1)(n+m)); the first m at or below eps therefore
    // grows like n (sqrt(1/(2 eps)) - 1), about 4n at eps = 0.02.
    let s = build_scenario("ToyFlip", &Overrides::default()).unwrap();
    let eps = 0.02;
    for n in [25u64, 50, 100] {
        let expected = (1..)
            .find(|&m| {
                let gap = (n * (n - 1)) as f64 / (2.0 * ((n + m - 1) * (n + m)) as f64);
                gap <= eps
            })
            .unwrap();
        let time = adaptive_convergence_time(
            0,
            1.0 / n as f64,
            &s.policy,
            &s.family,
            eps,
            100_000,
            TimeMode::Exact,
        )
        .unwrap();
        assert_eq!(time, ConvergenceTime::Finite(expected), "n={n}");
        let ratio = expected as f64 / n as f64;
        assert!((3.5..=4.5).contains(&ratio), "n={n} ratio={ratio}");
    }
}

#[test]
fn scenario_families_preserve_their_targets() {
    for id in SCENARIO_IDS {
        let s = build_scenario(id, &Overrides::default()).unwrap();
        for theta in s.family.probe_params() {
            let kernel = s.family.kernel(theta).unwrap();
            let moved = s.target().apply_kernel(&kernel).unwrap();
            assert!(
                moved.tv_distance(s.target()).unwrap() <= 1e-10,
                "{id} theta={theta}"
            );
        }
    }
}

#[test]
fn telescoping_bound_holds_on_seeded_random_sequences() {
    // 100 seeded draws over 2-, 3-, and 5-state lazy cycle families with
    // sequence lengths M + 1 for M in 2..=8. The left side is exact; the
    // bound is M(M+1)/2 times the largest consecutive gap.
    let mut rng_state = 0x5EED_CAFE_u64;
    let mut next_unit = move || {
        rng_state = derive_seed(rng_state, 7, 1);
        (rng_state >> 11) as f64 / (1u64 << 53) as f64
    };
    for case in 0..100 {
        let dims = [2usize, 3, 5];
        let dim = dims[case % dims.len()];
        let m = 2 + case % 7;
        let family = KernelFamily::lazy_cycle(dim, ParamDomain::open(0.0, 1.0));
        let thetas: Vec<f64> = (0..=m).map(|_| 0.05 + 0.9 * next_unit()).collect();
        let check = telescoping_verify(&family, &thetas, 0).unwrap();
        assert!(
            check.ok,
            "case {case}: dim={dim} M={m} lhs={} bound={}",
            check.lhs, check.bound
        );
        assert!(check.alt_ok);
    }
}
