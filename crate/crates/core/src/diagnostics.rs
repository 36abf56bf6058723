//! Diagnostic functionals for adaptive chains.
//!
//! Three estimators drive the verdicts:
//!
//! - the adaptation gap series `D_n = sup_x tv(P_{θ_{n+1}}(x,·), P_{θ_n}(x,·))`,
//!   whose decay is the diminishing-adaptation check;
//! - tail matrices `P̂(time(X_n, θ_n) > M)` over (n, M) grids, built either
//!   from frozen-kernel times (the containment check) or from adaptive
//!   times at visited pairs;
//! - the windowed tail supremum `δ̂(M) = max_{n in window} P̂(time > M)`,
//!   a finite-sample surrogate for a limit superior in n; its value at the
//!   largest M is the headline failure statistic.
//!
//! Censored times (`ExceedsCap`) count as exceeding every threshold, and
//! every tail row records its censoring rate so cap-dominated results are
//! visible. All replicate fan-out is seed-split and aggregated in
//! replicate order, so results are identical with parallelism on or off.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adaptation::{
    adaptive_convergence_time_from, simulate_snapshots, stream_rng, streams, AdaptationPolicy,
    ExactPropagator, PairSnapshot, TimeMode,
};
use crate::error::{Error, Result};
use crate::markov::{convergence_time, ConvergenceTime, KernelFamily, TransitionMatrix};
use crate::scenarios::Scenario;

/// Replicate fan-out mode. Aggregation is replicate-ordered either way, so
/// the two modes produce bit-identical results.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExecMode {
    Sequential,
    Parallel,
}

fn map_replicates<T: Send>(
    exec: ExecMode,
    count: u32,
    f: impl Fn(u32) -> Result<T> + Sync + Send,
) -> Result<Vec<T>> {
    match exec {
        ExecMode::Sequential => (0..count).map(f).collect(),
        ExecMode::Parallel => (0..count).into_par_iter().map(f).collect(),
    }
}

/// Which convergence time a tail matrix was built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TimeKind {
    /// Frozen-kernel times at the visited pairs (the containment check).
    Frozen,
    /// Adaptive times of the process restarted at the visited pairs.
    Adaptive,
}

impl TimeKind {
    fn label(self) -> &'static str {
        match self {
            TimeKind::Frozen => "frozen",
            TimeKind::Adaptive => "adaptive",
        }
    }
}

/// Estimated exceedance probabilities over an (iteration, threshold) grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailMatrix {
    pub kind: TimeKind,
    pub eps: f64,
    pub n_grid: Vec<u64>,
    pub m_grid: Vec<u64>,
    /// `probs[i][j]` = fraction of replicates whose time at iteration
    /// `n_grid[i]` exceeds `m_grid[j]`. Rows are non-increasing in M.
    pub probs: Vec<Vec<f64>>,
    /// Fraction of replicate times censored at the cap, per iteration.
    pub censored: Vec<f64>,
    pub cap: u64,
    pub replicates: u32,
    pub seed: u64,
}

/// Windowed tail suprema per threshold, with the terminal value at the
/// largest threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaSeries {
    pub eps: f64,
    pub m_grid: Vec<u64>,
    /// `delta[j] = max over window iterations of P̂(time > m_grid[j])`;
    /// non-increasing in the threshold.
    pub delta: Vec<f64>,
    /// `delta` at the largest threshold.
    pub delta_limit: f64,
    /// Iteration window `[n_burn, n_max]` the maxima were taken over.
    pub window: (u64, u64),
}

/// Adaptation gap summaries per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiminishingSeries {
    /// Step indices `n = 1, .., n_max - 1`; entry `n` compares the kernels
    /// driving moves `n` and `n + 1`.
    pub n: Vec<u64>,
    pub median: Vec<f64>,
    pub q95: Vec<f64>,
    pub replicates: u32,
    /// True when the policy is deterministic and state-independent, so a
    /// single replicate reproduces the series exactly.
    pub exact: bool,
}

/// Per-iteration exceedance frequency of a paired time comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSeries {
    pub eps: f64,
    pub factor: f64,
    pub n_grid: Vec<u64>,
    pub freq: Vec<f64>,
    pub window_sup: f64,
    pub n_burn: u64,
}

/// Verdict thresholds; both are recorded in every report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Tail-probability level for containment and failure verdicts.
    pub delta_star: f64,
    /// Adaptation-gap level the end-of-window 0.95 quantile must reach.
    pub eta_star: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            delta_star: 0.05,
            eta_star: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdicts {
    pub diminishing_ok: bool,
    pub containment_ok: bool,
    /// True when the adaptive-time tails stay above `delta_star` at the
    /// largest threshold: convergence times grow without bound.
    pub adapt_fail: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub config_digest: String,
}

/// The assembled output of a full diagnostic run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub scenario: String,
    pub eps: f64,
    pub thresholds: Thresholds,
    pub n_burn: u64,
    pub diminishing: DiminishingSeries,
    pub containment: TailMatrix,
    pub adapt_tail: DeltaSeries,
    pub verdicts: Verdicts,
    pub provenance: Provenance,
}

fn validate_grid(name: &str, grid: &[u64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument(format!("{name} is empty")));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(format!(
            "{name} must be strictly increasing"
        )));
    }
    Ok(())
}

fn validate_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidEpsilon(eps))
    }
}

/// Empirical order-statistic quantile (nearest-rank).
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

/// Adaptation gap series along simulated trajectories: for each step `n`,
/// the empirical median and 0.95 quantile of
/// `sup_x tv(P_{θ_{n+1}}(x,·), P_{θ_n}(x,·))` over replicates.
///
/// For a deterministic state-independent policy one replicate is exact.
#[allow(clippy::too_many_arguments)]
pub fn diminishing_series(
    policy: &AdaptationPolicy,
    family: &KernelFamily,
    x0: usize,
    theta0: f64,
    n_max: u64,
    replicates: u32,
    seed: u64,
    exec: ExecMode,
) -> Result<DiminishingSeries> {
    if n_max < 1 {
        return Err(Error::InvalidArgument("n_max must be >= 1".into()));
    }
    if replicates < 1 {
        return Err(Error::InvalidArgument("replicates must be >= 1".into()));
    }
    let steps: Vec<u64> = (1..n_max).collect();
    let per_replicate = map_replicates(exec, replicates, |r| {
        let rng = stream_rng(seed, streams::TRAJECTORY, u64::from(r));
        let grid: Vec<u64> = (0..=n_max).collect();
        let snaps = simulate_snapshots(
            PairSnapshot::fresh(x0, theta0, policy),
            policy,
            family,
            &grid,
            rng,
        )?;
        let mut gaps = Vec::with_capacity(steps.len());
        for &n in &steps {
            let here = family.kernel(snaps[n as usize].theta)?;
            let next = family.kernel(snaps[n as usize + 1].theta)?;
            gaps.push(next.sup_row_distance(&here)?);
        }
        Ok(gaps)
    })?;

    let mut median = Vec::with_capacity(steps.len());
    let mut q95 = Vec::with_capacity(steps.len());
    for idx in 0..steps.len() {
        let mut column: Vec<f64> = per_replicate.iter().map(|g| g[idx]).collect();
        column.sort_by(f64::total_cmp);
        median.push(quantile(&column, 0.5));
        q95.push(quantile(&column, 0.95));
    }
    Ok(DiminishingSeries {
        n: steps,
        median,
        q95,
        replicates,
        exact: replicates == 1 && policy.is_deterministic() && policy.state_independent(),
    })
}

/// How adaptive times inside a tail matrix are computed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AdaptiveTimeMode {
    Exact,
    /// Nested Monte Carlo with this many inner chains per visited pair;
    /// inner seeds are derived per (replicate, iteration).
    Nested {
        replicates: u32,
    },
}

/// Tail matrix of exceedance probabilities for the chosen time kind.
#[allow(clippy::too_many_arguments)]
pub fn tail_matrix(
    scenario: &Scenario,
    kind: TimeKind,
    eps: f64,
    n_grid: &[u64],
    m_grid: &[u64],
    cap: u64,
    replicates: u32,
    seed: u64,
    adaptive_mode: AdaptiveTimeMode,
    exec: ExecMode,
) -> Result<TailMatrix> {
    validate_eps(eps)?;
    validate_grid("n_grid", n_grid)?;
    validate_grid("m_grid", m_grid)?;
    if cap < *m_grid.last().expect("nonempty") {
        return Err(Error::InvalidArgument(
            "cap must be at least the largest threshold in m_grid".into(),
        ));
    }
    if replicates < 1 {
        return Err(Error::InvalidArgument("replicates must be >= 1".into()));
    }
    if kind == TimeKind::Adaptive
        && adaptive_mode == AdaptiveTimeMode::Exact
        && !scenario.policy.exactly_propagatable(&scenario.family)
    {
        return Err(Error::NotPropagatable);
    }

    let times = map_replicates(exec, replicates, |r| {
        let rng = stream_rng(seed, streams::TRAJECTORY, u64::from(r));
        let snaps = simulate_snapshots(
            scenario.start(),
            &scenario.policy,
            &scenario.family,
            n_grid,
            rng,
        )?;
        snaps
            .iter()
            .enumerate()
            .map(|(idx, snap)| match kind {
                TimeKind::Frozen => {
                    convergence_time(&scenario.family, snap.x, snap.theta, eps, cap)
                }
                TimeKind::Adaptive => {
                    let mode = match adaptive_mode {
                        AdaptiveTimeMode::Exact => TimeMode::Exact,
                        AdaptiveTimeMode::Nested { replicates: inner } => TimeMode::Estimate {
                            replicates: inner,
                            seed: derive_seed(
                                seed,
                                streams::NESTED,
                                u64::from(r) * n_grid.len() as u64 + idx as u64,
                            ),
                        },
                    };
                    adaptive_convergence_time_from(
                        snap,
                        &scenario.policy,
                        &scenario.family,
                        eps,
                        cap,
                        mode,
                    )
                }
            })
            .collect::<Result<Vec<ConvergenceTime>>>()
    })?;

    let mut probs = vec![vec![0.0; m_grid.len()]; n_grid.len()];
    let mut censored = vec![0.0; n_grid.len()];
    for (i, _) in n_grid.iter().enumerate() {
        let mut over = vec![0u64; m_grid.len()];
        let mut capped = 0u64;
        for replicate in &times {
            let time = replicate[i];
            if !time.is_finite() {
                capped += 1;
            }
            for (j, &m) in m_grid.iter().enumerate() {
                if time.exceeds(m as f64) {
                    over[j] += 1;
                }
            }
        }
        for (j, &count) in over.iter().enumerate() {
            probs[i][j] = count as f64 / f64::from(replicates);
        }
        censored[i] = capped as f64 / f64::from(replicates);
    }

    Ok(TailMatrix {
        kind,
        eps,
        n_grid: n_grid.to_vec(),
        m_grid: m_grid.to_vec(),
        probs,
        censored,
        cap,
        replicates,
        seed,
    })
}

/// Frozen-time tails: the containment check.
#[allow(clippy::too_many_arguments)]
pub fn containment_tail(
    scenario: &Scenario,
    eps: f64,
    n_grid: &[u64],
    m_grid: &[u64],
    cap: u64,
    replicates: u32,
    seed: u64,
    exec: ExecMode,
) -> Result<TailMatrix> {
    tail_matrix(
        scenario,
        TimeKind::Frozen,
        eps,
        n_grid,
        m_grid,
        cap,
        replicates,
        seed,
        AdaptiveTimeMode::Exact,
        exec,
    )
}

/// Adaptive-time tails at visited pairs.
#[allow(clippy::too_many_arguments)]
pub fn adaptive_tail(
    scenario: &Scenario,
    eps: f64,
    n_grid: &[u64],
    m_grid: &[u64],
    cap: u64,
    replicates: u32,
    seed: u64,
    adaptive_mode: AdaptiveTimeMode,
    exec: ExecMode,
) -> Result<TailMatrix> {
    tail_matrix(
        scenario,
        TimeKind::Adaptive,
        eps,
        n_grid,
        m_grid,
        cap,
        replicates,
        seed,
        adaptive_mode,
        exec,
    )
}

fn window_rows(tail: &TailMatrix, n_burn: u64) -> Result<Vec<usize>> {
    let rows: Vec<usize> = tail
        .n_grid
        .iter()
        .enumerate()
        .filter(|(_, &n)| n >= n_burn)
        .map(|(i, _)| i)
        .collect();
    if rows.is_empty() {
        return Err(Error::EmptyWindow { n_burn });
    }
    Ok(rows)
}

fn windowed_column_max(tail: &TailMatrix, n_burn: u64) -> Result<DeltaSeries> {
    let rows = window_rows(tail, n_burn)?;
    let delta: Vec<f64> = (0..tail.m_grid.len())
        .map(|j| {
            rows.iter()
                .map(|&i| tail.probs[i][j])
                .fold(0.0_f64, f64::max)
        })
        .collect();
    debug_assert!(delta.windows(2).all(|w| w[0] >= w[1] - 1e-15));
    Ok(DeltaSeries {
        eps: tail.eps,
        m_grid: tail.m_grid.clone(),
        delta_limit: *delta.last().expect("nonempty m_grid"),
        delta,
        window: (n_burn, *tail.n_grid.last().expect("nonempty n_grid")),
    })
}

/// Windowed tail suprema of the *adaptive* times: `δ̂(M)` per threshold and
/// the terminal `δ̂` at the largest threshold. Rejects frozen-time input.
pub fn windowed_tail_delta(tail: &TailMatrix, n_burn: u64) -> Result<DeltaSeries> {
    if tail.kind != TimeKind::Adaptive {
        return Err(Error::TailProvenance {
            expected: TimeKind::Adaptive.label().into(),
            got: tail.kind.label().into(),
        });
    }
    windowed_column_max(tail, n_burn)
}

/// Probe comparing adaptive times at visited pairs against a fixed
/// reference time: per-iteration frequency of
/// `time_adaptive(X_n, θ_n) > factor · time_frozen(ref_x, ref_theta)`.
#[allow(clippy::too_many_arguments)]
pub fn equivalence_probe(
    scenario: &Scenario,
    eps: f64,
    ref_x: usize,
    ref_theta: f64,
    factor: f64,
    n_grid: &[u64],
    cap: u64,
    replicates: u32,
    seed: u64,
    n_burn: u64,
    adaptive_mode: AdaptiveTimeMode,
    exec: ExecMode,
) -> Result<ProbeSeries> {
    validate_eps(eps)?;
    validate_grid("n_grid", n_grid)?;
    let reference = match convergence_time(&scenario.family, ref_x, ref_theta, eps, cap)? {
        ConvergenceTime::Finite(t) => t,
        ConvergenceTime::ExceedsCap(c) => return Err(Error::ReferenceExceedsCap(c)),
    };
    let thresholds: Vec<f64> = n_grid.iter().map(|_| factor * reference as f64).collect();
    probe_over_grid(
        scenario,
        eps,
        factor,
        n_grid,
        cap,
        replicates,
        seed,
        n_burn,
        adaptive_mode,
        exec,
        move |_r, _snaps| Ok(thresholds.clone()),
    )
}

/// Probe comparing adaptive times against `factor ·` the frozen time of an
/// independent nonadaptive chain `{Y_n}` run alongside each replicate.
#[allow(clippy::too_many_arguments)]
pub fn paired_probe(
    scenario: &Scenario,
    eps: f64,
    theta_y: f64,
    y0: usize,
    factor: f64,
    n_grid: &[u64],
    cap: u64,
    replicates: u32,
    seed: u64,
    n_burn: u64,
    adaptive_mode: AdaptiveTimeMode,
    exec: ExecMode,
) -> Result<ProbeSeries> {
    validate_eps(eps)?;
    validate_grid("n_grid", n_grid)?;
    // Frozen times of the comparison kernel, one per state.
    let mut frozen = Vec::with_capacity(scenario.family.dim());
    for y in 0..scenario.family.dim() {
        match convergence_time(&scenario.family, y, theta_y, eps, cap)? {
            ConvergenceTime::Finite(t) => frozen.push(t),
            ConvergenceTime::ExceedsCap(c) => return Err(Error::ReferenceExceedsCap(c)),
        }
    }
    let constant = AdaptationPolicy::constant();
    let family = scenario.family.clone();
    let n_grid_owned = n_grid.to_vec();
    probe_over_grid(
        scenario,
        eps,
        factor,
        n_grid,
        cap,
        replicates,
        seed,
        n_burn,
        adaptive_mode,
        exec,
        move |r, _snaps| {
            let rng = stream_rng(seed, streams::COMPARISON_CHAIN, u64::from(r));
            let y_snaps = simulate_snapshots(
                PairSnapshot::fresh(y0, theta_y, &constant),
                &constant,
                &family,
                &n_grid_owned,
                rng,
            )?;
            Ok(y_snaps
                .iter()
                .map(|snap| factor * frozen[snap.x] as f64)
                .collect())
        },
    )
}

/// Shared probe driver: per replicate, thresholds per grid point come from
/// `thresholds_for`, and the indicator is `adaptive time > threshold`.
#[allow(clippy::too_many_arguments)]
fn probe_over_grid(
    scenario: &Scenario,
    eps: f64,
    factor: f64,
    n_grid: &[u64],
    cap: u64,
    replicates: u32,
    seed: u64,
    n_burn: u64,
    adaptive_mode: AdaptiveTimeMode,
    exec: ExecMode,
    thresholds_for: impl Fn(u32, &[PairSnapshot]) -> Result<Vec<f64>> + Sync,
) -> Result<ProbeSeries> {
    if replicates < 1 {
        return Err(Error::InvalidArgument("replicates must be >= 1".into()));
    }
    if kind_requires_propagation(adaptive_mode)
        && !scenario.policy.exactly_propagatable(&scenario.family)
    {
        return Err(Error::NotPropagatable);
    }
    let indicator_rows = map_replicates(exec, replicates, |r| {
        let rng = stream_rng(seed, streams::TRAJECTORY, u64::from(r));
        let snaps = simulate_snapshots(
            scenario.start(),
            &scenario.policy,
            &scenario.family,
            n_grid,
            rng,
        )?;
        let thresholds = thresholds_for(r, &snaps)?;
        snaps
            .iter()
            .enumerate()
            .map(|(idx, snap)| {
                let mode = match adaptive_mode {
                    AdaptiveTimeMode::Exact => TimeMode::Exact,
                    AdaptiveTimeMode::Nested { replicates: inner } => TimeMode::Estimate {
                        replicates: inner,
                        seed: derive_seed(
                            seed,
                            streams::NESTED,
                            u64::from(r) * n_grid.len() as u64 + idx as u64,
                        ),
                    },
                };
                let time = adaptive_convergence_time_from(
                    snap,
                    &scenario.policy,
                    &scenario.family,
                    eps,
                    cap,
                    mode,
                )?;
                Ok(u64::from(time.exceeds(thresholds[idx])))
            })
            .collect::<Result<Vec<u64>>>()
    })?;

    let freq: Vec<f64> = (0..n_grid.len())
        .map(|idx| {
            indicator_rows.iter().map(|row| row[idx]).sum::<u64>() as f64 / f64::from(replicates)
        })
        .collect();
    let window_sup = n_grid
        .iter()
        .zip(&freq)
        .filter(|(&n, _)| n >= n_burn)
        .map(|(_, &f)| f)
        .fold(0.0_f64, f64::max);
    Ok(ProbeSeries {
        eps,
        factor,
        n_grid: n_grid.to_vec(),
        freq,
        window_sup,
        n_burn,
    })
}

fn kind_requires_propagation(mode: AdaptiveTimeMode) -> bool {
    mode == AdaptiveTimeMode::Exact
}

/// Ceiling on total nested chain steps before `subsample_check` refuses to
/// run a Monte Carlo conditional-law estimate.
const NESTED_STEP_BUDGET: u64 = 100_000_000;

/// Estimate how often the conditional law of `X_{(k+1)M}` given the
/// realized state at `kM` strays beyond `eps` of the target. Returns the
/// violating fraction over all (replicate, pair) combinations.
#[allow(clippy::too_many_arguments)]
pub fn subsample_check(
    scenario: &Scenario,
    eps: f64,
    lag: u64,
    n_pairs: u64,
    replicates: u32,
    seed: u64,
    nested_replicates: u32,
    exec: ExecMode,
) -> Result<f64> {
    validate_eps(eps)?;
    if lag < 1 {
        return Err(Error::InvalidArgument("lag must be >= 1".into()));
    }
    if n_pairs < 1 || replicates < 1 {
        return Err(Error::InvalidArgument(
            "n_pairs and replicates must be >= 1".into(),
        ));
    }
    let propagatable = scenario.policy.exactly_propagatable(&scenario.family);
    if !propagatable {
        let steps = u64::from(replicates)
            .saturating_mul(n_pairs)
            .saturating_mul(u64::from(nested_replicates))
            .saturating_mul(lag);
        if steps > NESTED_STEP_BUDGET {
            return Err(Error::BudgetExceeded(steps));
        }
    }

    let grid: Vec<u64> = (0..n_pairs).map(|k| k * lag).collect();
    let violations = map_replicates(exec, replicates, |r| {
        let rng = stream_rng(seed, streams::SUBSAMPLE, u64::from(r));
        let snaps = simulate_snapshots(
            scenario.start(),
            &scenario.policy,
            &scenario.family,
            &grid,
            rng,
        )?;
        let mut count = 0u64;
        for (k, snap) in snaps.iter().enumerate() {
            let law = if propagatable {
                let mut prop = ExactPropagator::new(snap, &scenario.policy, &scenario.family)?;
                for _ in 0..lag {
                    prop.advance()?;
                }
                prop.state_marginal()?
            } else {
                conditional_law_nested(
                    snap,
                    scenario,
                    lag,
                    nested_replicates,
                    derive_seed(seed, streams::NESTED, u64::from(r) * n_pairs + k as u64),
                )?
            };
            if law.tv_distance(scenario.target())? > eps {
                count += 1;
            }
        }
        Ok(count)
    })?;

    let total = violations.iter().sum::<u64>() as f64;
    Ok(total / (f64::from(replicates) * n_pairs as f64))
}

fn conditional_law_nested(
    snap: &PairSnapshot,
    scenario: &Scenario,
    lag: u64,
    nested_replicates: u32,
    seed: u64,
) -> Result<crate::markov::ProbVector> {
    let mut counts = vec![0u64; scenario.family.dim()];
    for j in 0..nested_replicates {
        let rng = stream_rng(seed, streams::NESTED, u64::from(j));
        let mut state = crate::adaptation::AdaptiveState::new(snap.clone(), &scenario.family, rng)?;
        for _ in 0..lag {
            state = crate::adaptation::step(state, &scenario.policy, &scenario.family)?;
        }
        counts[state.x()] += 1;
    }
    crate::markov::ProbVector::from_counts(&counts)
}

/// SplitMix64-style seed derivation for nested estimators.
pub fn derive_seed(seed: u64, domain: u64, index: u64) -> u64 {
    let mut z = seed ^ domain.rotate_left(32) ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Output of the product-vs-power telescoping bound check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TelescopingCheck {
    /// Exact worst-row distance between the ordered product of the kernel
    /// sequence and the matching power of the base kernel.
    pub lhs: f64,
    /// Largest consecutive kernel gap along the sequence.
    pub eta: f64,
    /// `M(M+1)/2 · eta` for a sequence of length `M + 1`: swapping the
    /// k-th kernel for the base costs at most `k · eta` through the chain
    /// of consecutive gaps, and the contraction of the surrounding
    /// products keeps each swap's cost from growing.
    pub bound: f64,
    pub ok: bool,
    /// Looser constant `M(M+3)/2 · eta` from pricing swap k at
    /// `(k+1) · eta`; recorded for comparison.
    pub alt_bound: f64,
    pub alt_ok: bool,
}

/// Verify that the ordered product of kernels along a parameter sequence
/// stays within the telescoping bound of the base kernel's power.
pub fn telescoping_verify(
    family: &KernelFamily,
    theta_seq: &[f64],
    base_index: usize,
) -> Result<TelescopingCheck> {
    if theta_seq.len() < 2 {
        return Err(Error::InvalidArgument(
            "theta_seq needs at least two parameters".into(),
        ));
    }
    if base_index >= theta_seq.len() {
        return Err(Error::InvalidArgument(format!(
            "base_index {base_index} out of range for sequence of length {}",
            theta_seq.len()
        )));
    }
    let kernels = theta_seq
        .iter()
        .map(|&t| family.kernel(t))
        .collect::<Result<Vec<TransitionMatrix>>>()?;
    let m = (theta_seq.len() - 1) as f64;
    let product = TransitionMatrix::product(&kernels)?;
    let base_power = kernels[base_index].power(theta_seq.len() as u64)?;
    let lhs = product.sup_row_distance(&base_power)?;
    let mut eta = 0.0_f64;
    for pair in kernels.windows(2) {
        eta = eta.max(pair[0].sup_row_distance(&pair[1])?);
    }
    let bound = m * (m + 1.0) / 2.0 * eta;
    let alt_bound = m * (m + 3.0) / 2.0 * eta;
    Ok(TelescopingCheck {
        lhs,
        eta,
        bound,
        ok: lhs <= bound + 1e-12,
        alt_bound,
        alt_ok: lhs <= alt_bound + 1e-12,
    })
}

/// Assemble series into a report with verdicts.
///
/// Verdicts: `diminishing_ok` iff the end-of-series 0.95 quantile of the
/// adaptation gap is at most `eta_star`; `containment_ok` iff the windowed
/// frozen-tail supremum at the largest threshold is at most `delta_star`;
/// `adapt_fail` iff the adaptive-time `delta_limit` exceeds `delta_star`.
#[allow(clippy::too_many_arguments)]
pub fn assemble_report(
    scenario_id: &str,
    eps: f64,
    thresholds: Thresholds,
    n_burn: u64,
    diminishing: DiminishingSeries,
    containment: TailMatrix,
    adapt_tail: DeltaSeries,
    provenance: Provenance,
) -> Result<DiagnosticsReport> {
    if containment.kind != TimeKind::Frozen {
        return Err(Error::TailProvenance {
            expected: TimeKind::Frozen.label().into(),
            got: containment.kind.label().into(),
        });
    }
    if containment.eps != eps {
        return Err(Error::EpsilonMismatch(containment.eps, eps));
    }
    if adapt_tail.eps != eps {
        return Err(Error::EpsilonMismatch(adapt_tail.eps, eps));
    }
    if diminishing.n.is_empty() {
        return Err(Error::InvalidArgument("diminishing series is empty".into()));
    }
    let verdicts = compute_verdicts(&thresholds, n_burn, &diminishing, &containment, &adapt_tail)?;
    Ok(DiagnosticsReport {
        scenario: scenario_id.into(),
        eps,
        thresholds,
        n_burn,
        diminishing,
        containment,
        adapt_tail,
        verdicts,
        provenance,
    })
}

fn compute_verdicts(
    thresholds: &Thresholds,
    n_burn: u64,
    diminishing: &DiminishingSeries,
    containment: &TailMatrix,
    adapt_tail: &DeltaSeries,
) -> Result<Verdicts> {
    let end_gap = *diminishing.q95.last().expect("nonempty series");
    let frozen_delta = windowed_column_max(containment, n_burn)?;
    Ok(Verdicts {
        diminishing_ok: end_gap <= thresholds.eta_star,
        containment_ok: frozen_delta.delta_limit <= thresholds.delta_star,
        adapt_fail: adapt_tail.delta_limit > thresholds.delta_star,
    })
}

impl DiagnosticsReport {
    /// Re-derive the verdicts from the stored series; used to check that a
    /// report is internally consistent.
    pub fn recompute_verdicts(&self) -> Result<Verdicts> {
        compute_verdicts(
            &self.thresholds,
            self.n_burn,
            &self.diminishing,
            &self.containment,
            &self.adapt_tail,
        )
    }
}
