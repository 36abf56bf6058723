//! Adaptive processes `{(X_n, θ_n)}`: policies, seeded simulation, exact
//! and Monte Carlo marginals, and the adaptive convergence time.
//!
//! # Update ordering
//!
//! A step from the pair `(X_n, θ_n)` first produces `θ_{n+1}` from the
//! policy, then samples `X_{n+1}` from row `X_n` of the kernel at
//! `θ_{n+1}`. The stored parameter is therefore always the one that drove
//! the most recent transition.
//!
//! The initial pair of a fresh run is the one exception: `θ_0` has not
//! driven a transition yet, so the first step consumes it directly and the
//! realized parameter sequence starts at `θ_1 = θ_0`. Restarting at a
//! *visited* pair — the situation the adaptive convergence time measures —
//! continues the policy instead: the first restarted transition uses the
//! policy's successor of the stored parameter.
//!
//! # Randomness
//!
//! All sampling flows from one base seed. Stream `r` of domain `d` is the
//! ChaCha8 generator seeded with the base seed on stream id
//! `(d << 32) | r`, so replicates never share a stream and results are
//! independent of worker count.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::markov::{ConvergenceTime, KernelFamily, ProbVector, TransitionMatrix, PROB_TOL};

/// Stream domains for deriving independent generators from one base seed.
pub mod streams {
    pub const SIMULATE: u64 = 0;
    pub const MARGINAL_ESTIMATE: u64 = 1;
    pub const ADAPTIVE_TIME: u64 = 2;
    pub const TRAJECTORY: u64 = 3;
    pub const COMPARISON_CHAIN: u64 = 4;
    pub const SUBSAMPLE: u64 = 5;
    pub const NESTED: u64 = 6;
}

/// The declared stream-splitting function: base seed plus a (domain,
/// index) pair selects one of 2^64 ChaCha8 streams.
pub fn stream_rng(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((domain << 32) | (index & 0xFFFF_FFFF));
    rng
}

/// Deterministic parameter-to-parameter maps used by recursion policies.
#[derive(Clone)]
pub enum RecursionMap {
    /// Nonadaptive: the parameter never changes.
    Identity,
    /// `θ ↦ θ/(1+θ)`: iterated from 1 this walks the harmonic sequence
    /// 1, 1/2, 1/3, ...
    HarmonicDecay,
    /// `θ ↦ 1/(2-θ)`: the mirror image, climbing 1/2, 2/3, 3/4, ... toward 1.
    HarmonicToOne,
    /// Swap between two fixed values.
    Alternate {
        a: f64,
        b: f64,
    },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl RecursionMap {
    pub fn apply(&self, theta: f64) -> f64 {
        match self {
            RecursionMap::Identity => theta,
            RecursionMap::HarmonicDecay => theta / (1.0 + theta),
            RecursionMap::HarmonicToOne => 1.0 / (2.0 - theta),
            RecursionMap::Alternate { a, b } => {
                // Map whichever endpoint is closer to the other one.
                if (theta - a).abs() <= (theta - b).abs() {
                    *b
                } else {
                    *a
                }
            }
            RecursionMap::Custom(f) => f(theta),
        }
    }
}

impl fmt::Debug for RecursionMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RecursionMap::Identity => f.write_str("Identity"),
            RecursionMap::HarmonicDecay => f.write_str("HarmonicDecay"),
            RecursionMap::HarmonicToOne => f.write_str("HarmonicToOne"),
            RecursionMap::Alternate { a, b } => write!(f, "Alternate({a}, {b})"),
            RecursionMap::Custom(_) => f.write_str("Custom"),
        }
    }
}

/// Deterministic parameter rule: `(state, theta, stats) -> theta`.
pub type DeterministicRule = Arc<dyn Fn(usize, f64, &[f64]) -> f64 + Send + Sync>;
/// Randomized parameter rule with a private generator.
pub type RandomizedRule = Arc<dyn Fn(usize, f64, &[f64], &mut ChaCha8Rng) -> f64 + Send + Sync>;
/// Statistics fold: `(old stats, new state) -> new stats`.
pub type StatsUpdate = Arc<dyn Fn(&[f64], usize) -> Vec<f64> + Send + Sync>;

/// How a history-dependent policy produces the next parameter.
#[derive(Clone)]
pub enum HistoryRule {
    Deterministic(DeterministicRule),
    Randomized(RandomizedRule),
}

impl fmt::Debug for HistoryRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HistoryRule::Deterministic(_) => f.write_str("Deterministic"),
            HistoryRule::Randomized(_) => f.write_str("Randomized"),
        }
    }
}

/// The rule producing `θ_{n+1}` from the current pair and summary
/// statistics.
#[derive(Clone)]
pub enum AdaptationPolicy {
    /// `θ_{n+1} = g(θ_n)`; never consults chain history.
    ThetaRecursion { map: RecursionMap },
    /// A parameter schedule indexed by step, made restartable through an
    /// inversion rule mapping a parameter back to its schedule index.
    TimeSchedule {
        schedule: Arc<dyn Fn(u64) -> f64 + Send + Sync>,
        invert: Arc<dyn Fn(f64) -> u64 + Send + Sync>,
    },
    /// `θ_{n+1} = u(X_n, θ_n, stats)`, possibly randomized, with summary
    /// statistics folded over visited states. Exact propagation requires a
    /// deterministic rule, a grid parameter domain, and `finite_stats`
    /// declaring every reachable statistics value.
    HistoryDependent {
        rule: HistoryRule,
        stats_init: Vec<f64>,
        stats_update: StatsUpdate,
        finite_stats: Option<Vec<Vec<f64>>>,
    },
}

impl fmt::Debug for AdaptationPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AdaptationPolicy::ThetaRecursion { map } => {
                f.debug_struct("ThetaRecursion").field("map", map).finish()
            }
            AdaptationPolicy::TimeSchedule { .. } => f.write_str("TimeSchedule"),
            AdaptationPolicy::HistoryDependent { rule, .. } => f
                .debug_struct("HistoryDependent")
                .field("rule", rule)
                .finish_non_exhaustive(),
        }
    }
}

impl AdaptationPolicy {
    pub fn constant() -> Self {
        AdaptationPolicy::ThetaRecursion {
            map: RecursionMap::Identity,
        }
    }

    pub fn recursion(map: RecursionMap) -> Self {
        AdaptationPolicy::ThetaRecursion { map }
    }

    /// Whether the policy never consults chain history.
    pub fn state_independent(&self) -> bool {
        matches!(
            self,
            AdaptationPolicy::ThetaRecursion { .. } | AdaptationPolicy::TimeSchedule { .. }
        )
    }

    pub fn is_deterministic(&self) -> bool {
        match self {
            AdaptationPolicy::ThetaRecursion { .. } | AdaptationPolicy::TimeSchedule { .. } => true,
            AdaptationPolicy::HistoryDependent { rule, .. } => {
                matches!(rule, HistoryRule::Deterministic(_))
            }
        }
    }

    pub fn stats_init(&self) -> Vec<f64> {
        match self {
            AdaptationPolicy::HistoryDependent { stats_init, .. } => stats_init.clone(),
            _ => Vec::new(),
        }
    }

    /// Successor parameter for state-independent policies.
    fn advance_param(&self, theta: f64) -> f64 {
        match self {
            AdaptationPolicy::ThetaRecursion { map } => map.apply(theta),
            AdaptationPolicy::TimeSchedule { schedule, invert } => schedule(invert(theta) + 1),
            AdaptationPolicy::HistoryDependent { .. } => {
                unreachable!("advance_param requires a state-independent policy")
            }
        }
    }

    /// Full dispatch: the next parameter given the current pair.
    fn next_param(&self, x: usize, theta: f64, stats: &[f64], rng: &mut ChaCha8Rng) -> f64 {
        match self {
            AdaptationPolicy::ThetaRecursion { .. } | AdaptationPolicy::TimeSchedule { .. } => {
                self.advance_param(theta)
            }
            AdaptationPolicy::HistoryDependent { rule, .. } => match rule {
                HistoryRule::Deterministic(u) => u(x, theta, stats),
                HistoryRule::Randomized(u) => u(x, theta, stats, rng),
            },
        }
    }

    fn update_stats(&self, stats: &[f64], new_state: usize) -> Vec<f64> {
        match self {
            AdaptationPolicy::HistoryDependent { stats_update, .. } => {
                stats_update(stats, new_state)
            }
            _ => Vec::new(),
        }
    }

    /// Whether exact marginal propagation is available against `family`.
    pub fn exactly_propagatable(&self, family: &KernelFamily) -> bool {
        match self {
            AdaptationPolicy::ThetaRecursion { .. } | AdaptationPolicy::TimeSchedule { .. } => true,
            AdaptationPolicy::HistoryDependent {
                rule, finite_stats, ..
            } => {
                matches!(rule, HistoryRule::Deterministic(_))
                    && finite_stats.is_some()
                    && family.domain().grid_values().is_some()
            }
        }
    }
}

/// A pair `(x, θ)` together with the policy statistics and whether the
/// stored parameter is still pending its first transition.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSnapshot {
    pub x: usize,
    pub theta: f64,
    pub stats: Vec<f64>,
    pub theta_pending: bool,
}

impl PairSnapshot {
    /// The initial pair of a fresh run: `θ` drives the first transition.
    pub fn fresh(x: usize, theta: f64, policy: &AdaptationPolicy) -> Self {
        Self {
            x,
            theta,
            stats: policy.stats_init(),
            theta_pending: true,
        }
    }

    /// A visited pair: `θ` already drove a transition, so the next one
    /// advances the policy. Statistics restart at their declared initial
    /// value (a documented approximation for stats-bearing policies).
    pub fn visited(x: usize, theta: f64, policy: &AdaptationPolicy) -> Self {
        Self {
            x,
            theta,
            stats: policy.stats_init(),
            theta_pending: false,
        }
    }
}

/// Full simulation state: the current pair plus step counter and a private
/// randomness stream.
#[derive(Debug, Clone)]
pub struct AdaptiveState {
    x: usize,
    theta: f64,
    step: u64,
    stats: Vec<f64>,
    theta_pending: bool,
    rng: ChaCha8Rng,
}

impl AdaptiveState {
    pub fn new(snapshot: PairSnapshot, family: &KernelFamily, rng: ChaCha8Rng) -> Result<Self> {
        if snapshot.x >= family.dim() {
            return Err(Error::StateOutOfRange {
                x: snapshot.x,
                dim: family.dim(),
            });
        }
        if !family.admissible(snapshot.theta) {
            return Err(Error::InadmissibleTheta {
                theta: snapshot.theta,
                domain: family.domain().to_string(),
            });
        }
        Ok(Self {
            x: snapshot.x,
            theta: snapshot.theta,
            step: 0,
            stats: snapshot.stats,
            theta_pending: snapshot.theta_pending,
            rng,
        })
    }

    pub fn fresh(
        x: usize,
        theta: f64,
        policy: &AdaptationPolicy,
        family: &KernelFamily,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        Self::new(PairSnapshot::fresh(x, theta, policy), family, rng)
    }

    pub fn x(&self) -> usize {
        self.x
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn stats(&self) -> &[f64] {
        &self.stats
    }

    pub fn snapshot(&self) -> PairSnapshot {
        PairSnapshot {
            x: self.x,
            theta: self.theta,
            stats: self.stats.clone(),
            theta_pending: self.theta_pending,
        }
    }
}

fn sample_row(row: &ProbVector, rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &w) in row.weights().iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    row.dim() - 1
}

/// One transition of the adaptive process: parameter first, then the move.
pub fn step(
    mut state: AdaptiveState,
    policy: &AdaptationPolicy,
    family: &KernelFamily,
) -> Result<AdaptiveState> {
    let theta_next = if state.theta_pending {
        state.theta
    } else {
        policy.next_param(state.x, state.theta, &state.stats, &mut state.rng)
    };
    if !family.admissible(theta_next) {
        return Err(Error::InadmissibleTheta {
            theta: theta_next,
            domain: family.domain().to_string(),
        });
    }
    let kernel = family.kernel(theta_next)?;
    let x_next = sample_row(kernel.row(state.x), &mut state.rng);
    state.stats = policy.update_stats(&state.stats, x_next);
    state.x = x_next;
    state.theta = theta_next;
    state.theta_pending = false;
    state.step += 1;
    Ok(state)
}

/// A realized sample path: the pair `(X_n, θ_n)` at every step.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<usize>,
    pub params: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Simulate `n` steps from a fresh start; deterministic given the seed.
pub fn simulate(
    x0: usize,
    theta0: f64,
    policy: &AdaptationPolicy,
    family: &KernelFamily,
    n: u64,
    seed: u64,
) -> Result<Trajectory> {
    let rng = stream_rng(seed, streams::SIMULATE, 0);
    let mut state = AdaptiveState::fresh(x0, theta0, policy, family, rng)?;
    let mut states = Vec::with_capacity(n as usize + 1);
    let mut params = Vec::with_capacity(n as usize + 1);
    states.push(state.x);
    params.push(state.theta);
    for _ in 0..n {
        state = step(state, policy, family)?;
        states.push(state.x);
        params.push(state.theta);
    }
    Ok(Trajectory { states, params })
}

/// Run one chain, returning a snapshot of the full state at each requested
/// step index (ascending; index 0 snapshots the start).
pub fn simulate_snapshots(
    start: PairSnapshot,
    policy: &AdaptationPolicy,
    family: &KernelFamily,
    grid: &[u64],
    rng: ChaCha8Rng,
) -> Result<Vec<PairSnapshot>> {
    if grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidArgument(
            "snapshot grid must be non-decreasing".into(),
        ));
    }
    let mut state = AdaptiveState::new(start, family, rng)?;
    let mut out = Vec::with_capacity(grid.len());
    for &n in grid {
        while state.step < n {
            state = step(state, policy, family)?;
        }
        out.push(state.snapshot());
    }
    Ok(out)
}

/// The joint law of `(X_n, θ_n)` over a finite parameter grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductDistribution {
    n_states: usize,
    param_grid: Vec<f64>,
    /// Flattened weights, state-major: entry `x * n_params + t`.
    weights: Vec<f64>,
}

impl ProductDistribution {
    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn param_grid(&self) -> &[f64] {
        &self.param_grid
    }

    pub fn weight(&self, x: usize, param_index: usize) -> f64 {
        self.weights[x * self.param_grid.len() + param_index]
    }

    /// Project onto the state coordinate.
    pub fn state_marginal(&self) -> Result<ProbVector> {
        let nt = self.param_grid.len();
        let w = (0..self.n_states)
            .map(|x| self.weights[x * nt..(x + 1) * nt].iter().sum())
            .collect();
        ProbVector::new(w)
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Exact forward propagation of the marginal law under a policy.
///
/// State-independent policies propagate a plain distribution alongside the
/// deterministic parameter path; deterministic history-dependent policies
/// on grid domains propagate the joint law over (state, parameter,
/// statistics).
pub struct ExactPropagator<'a> {
    policy: &'a AdaptationPolicy,
    family: &'a KernelFamily,
    pending: bool,
    mode: PropagatorMode,
}

enum PropagatorMode {
    StateIndependent {
        theta: f64,
        dist: ProbVector,
    },
    Joint {
        param_grid: Vec<f64>,
        kernels: Vec<TransitionMatrix>,
        stats_set: Vec<Vec<f64>>,
        /// Weights indexed `(x * n_params + t) * n_stats + s`.
        weights: Vec<f64>,
    },
}

fn stats_index(stats_set: &[Vec<f64>], stats: &[f64]) -> Option<usize> {
    stats_set.iter().position(|candidate| {
        candidate.len() == stats.len()
            && candidate
                .iter()
                .zip(stats)
                .all(|(a, b)| (a - b).abs() <= PROB_TOL)
    })
}

impl<'a> ExactPropagator<'a> {
    pub fn new(
        start: &PairSnapshot,
        policy: &'a AdaptationPolicy,
        family: &'a KernelFamily,
    ) -> Result<Self> {
        if !family.admissible(start.theta) {
            return Err(Error::InadmissibleTheta {
                theta: start.theta,
                domain: family.domain().to_string(),
            });
        }
        if start.x >= family.dim() {
            return Err(Error::StateOutOfRange {
                x: start.x,
                dim: family.dim(),
            });
        }
        let mode = if policy.state_independent() {
            PropagatorMode::StateIndependent {
                theta: start.theta,
                dist: ProbVector::point_mass(start.x, family.dim())?,
            }
        } else {
            if !policy.exactly_propagatable(family) {
                return Err(Error::NotPropagatable);
            }
            let AdaptationPolicy::HistoryDependent { finite_stats, .. } = policy else {
                unreachable!("state-dependent policies are HistoryDependent");
            };
            let param_grid = family
                .domain()
                .grid_values()
                .ok_or(Error::NotPropagatable)?
                .to_vec();
            let kernels = param_grid
                .iter()
                .map(|&t| family.kernel(t))
                .collect::<Result<Vec<_>>>()?;
            let stats_set = finite_stats.clone().ok_or(Error::NotPropagatable)?;
            let t0 = family
                .domain()
                .grid_index(start.theta)
                .ok_or(Error::NotPropagatable)?;
            let s0 = stats_index(&stats_set, &start.stats).ok_or(Error::StatsNotDeclared)?;
            let n_params = param_grid.len();
            let n_stats = stats_set.len();
            let mut weights = vec![0.0; family.dim() * n_params * n_stats];
            weights[(start.x * n_params + t0) * n_stats + s0] = 1.0;
            PropagatorMode::Joint {
                param_grid,
                kernels,
                stats_set,
                weights,
            }
        };
        Ok(Self {
            policy,
            family,
            pending: start.theta_pending,
            mode,
        })
    }

    /// Advance the propagated law by one transition.
    pub fn advance(&mut self) -> Result<()> {
        match &mut self.mode {
            PropagatorMode::StateIndependent { theta, dist } => {
                let theta_next = if self.pending {
                    *theta
                } else {
                    self.policy.advance_param(*theta)
                };
                if !self.family.admissible(theta_next) {
                    return Err(Error::InadmissibleTheta {
                        theta: theta_next,
                        domain: self.family.domain().to_string(),
                    });
                }
                let kernel = self.family.kernel(theta_next)?;
                *dist = dist.apply_kernel(&kernel)?;
                *theta = theta_next;
            }
            PropagatorMode::Joint {
                param_grid,
                kernels,
                stats_set,
                weights,
            } => {
                let AdaptationPolicy::HistoryDependent {
                    rule: HistoryRule::Deterministic(next),
                    stats_update,
                    ..
                } = self.policy
                else {
                    return Err(Error::NotPropagatable);
                };
                let n_params = param_grid.len();
                let n_stats = stats_set.len();
                let dim = self.family.dim();
                let mut out = vec![0.0; weights.len()];
                for x in 0..dim {
                    for t in 0..n_params {
                        for s in 0..n_stats {
                            let w = weights[(x * n_params + t) * n_stats + s];
                            if w == 0.0 {
                                continue;
                            }
                            let theta_next = if self.pending {
                                param_grid[t]
                            } else {
                                next(x, param_grid[t], &stats_set[s])
                            };
                            let tj = self.family.domain().grid_index(theta_next).ok_or(
                                Error::InadmissibleTheta {
                                    theta: theta_next,
                                    domain: self.family.domain().to_string(),
                                },
                            )?;
                            let row = kernels[tj].row(x);
                            for (y, &p) in row.weights().iter().enumerate() {
                                if p == 0.0 {
                                    continue;
                                }
                                let stats_next = stats_update(&stats_set[s], y);
                                let sj = stats_index(stats_set, &stats_next)
                                    .ok_or(Error::StatsNotDeclared)?;
                                out[(y * n_params + tj) * n_stats + sj] += w * p;
                            }
                        }
                    }
                }
                // Renormalize to absorb drift from long products.
                let total: f64 = out.iter().sum();
                for w in &mut out {
                    *w /= total;
                }
                *weights = out;
            }
        }
        self.pending = false;
        Ok(())
    }

    /// The current marginal law of the state coordinate.
    pub fn state_marginal(&self) -> Result<ProbVector> {
        match &self.mode {
            PropagatorMode::StateIndependent { dist, .. } => Ok(dist.clone()),
            PropagatorMode::Joint { .. } => self.joint()?.state_marginal(),
        }
    }

    /// The current joint law over (state, parameter index); available in
    /// joint mode only.
    pub fn joint(&self) -> Result<ProductDistribution> {
        match &self.mode {
            PropagatorMode::StateIndependent { .. } => Err(Error::NotPropagatable),
            PropagatorMode::Joint {
                param_grid,
                stats_set,
                weights,
                ..
            } => {
                let n_params = param_grid.len();
                let n_stats = stats_set.len();
                let dim = self.family.dim();
                let mut pair = vec![0.0; dim * n_params];
                for x in 0..dim {
                    for t in 0..n_params {
                        pair[x * n_params + t] = weights
                            [(x * n_params + t) * n_stats..(x * n_params + t + 1) * n_stats]
                            .iter()
                            .sum();
                    }
                }
                Ok(ProductDistribution {
                    n_states: dim,
                    param_grid: param_grid.clone(),
                    weights: pair,
                })
            }
        }
    }
}

/// Exact marginal law of `X_n` for a fresh run from `(x0, θ0)`.
pub fn marginal_exact(
    x0: usize,
    theta0: f64,
    policy: &AdaptationPolicy,
    family: &KernelFamily,
    n: u64,
) -> Result<ProbVector> {
    marginal_exact_from(&PairSnapshot::fresh(x0, theta0, policy), policy, family, n)
}

/// Exact marginal law `n` transitions after an arbitrary snapshot.
pub fn marginal_exact_from(
    start: &PairSnapshot,
    policy: &AdaptationPolicy,
    family: &KernelFamily,
    n: u64,
) -> Result<ProbVector> {
    let mut prop = ExactPropagator::new(start, policy, family)?;
    for _ in 0..n {
        prop.advance()?;
    }
    prop.state_marginal()
}

/// The exact joint law of `(X_n, θ_n)` for a fresh run on a grid domain.
pub fn joint_exact(
    x0: usize,
    theta0: f64,
    policy: &AdaptationPolicy,
    family: &KernelFamily,
    n: u64,
) -> Result<ProductDistribution> {
    let start = PairSnapshot::fresh(x0, theta0, policy);
    let mut prop = ExactPropagator::new(&start, policy, family)?;
    for _ in 0..n {
        prop.advance()?;
    }
    prop.joint()
}

/// Monte Carlo estimate of the marginal law of `X_n` over independent
/// replicates; replicate `r` draws from its own derived stream. Each cell
/// has standard error at most `1/(2 sqrt(R))`.
pub fn marginal_estimate(
    x0: usize,
    theta0: f64,
    policy: &AdaptationPolicy,
    family: &KernelFamily,
    n: u64,
    replicates: u32,
    seed: u64,
) -> Result<ProbVector> {
    if replicates < 1 {
        return Err(Error::InvalidArgument("replicates must be >= 1".into()));
    }
    let mut counts = vec![0u64; family.dim()];
    for r in 0..replicates {
        let rng = stream_rng(seed, streams::MARGINAL_ESTIMATE, u64::from(r));
        let mut state = AdaptiveState::fresh(x0, theta0, policy, family, rng)?;
        for _ in 0..n {
            state = step(state, policy, family)?;
        }
        counts[state.x] += 1;
    }
    ProbVector::from_counts(&counts)
}

/// How an adaptive convergence time is computed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeMode {
    /// Exact forward propagation; requires a propagatable policy.
    Exact,
    /// Lockstep Monte Carlo over independent replicate chains.
    Estimate { replicates: u32, seed: u64 },
}

/// Adaptive convergence time at a visited pair: the smallest `m >= 1` at
/// which the marginal of the process restarted from `(x, θ)` is within
/// `eps` of the target in total variation.
pub fn adaptive_convergence_time(
    x: usize,
    theta: f64,
    policy: &AdaptationPolicy,
    family: &KernelFamily,
    eps: f64,
    cap: u64,
    mode: TimeMode,
) -> Result<ConvergenceTime> {
    adaptive_convergence_time_from(
        &PairSnapshot::visited(x, theta, policy),
        policy,
        family,
        eps,
        cap,
        mode,
    )
}

/// Adaptive convergence time from an arbitrary snapshot (used by the
/// diagnostics, which restart at pairs observed along a run).
pub fn adaptive_convergence_time_from(
    start: &PairSnapshot,
    policy: &AdaptationPolicy,
    family: &KernelFamily,
    eps: f64,
    cap: u64,
    mode: TimeMode,
) -> Result<ConvergenceTime> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidEpsilon(eps));
    }
    if cap < 1 {
        return Err(Error::InvalidCap);
    }
    match mode {
        TimeMode::Exact => {
            let mut prop = ExactPropagator::new(start, policy, family)?;
            for m in 1..=cap {
                prop.advance()?;
                if prop.state_marginal()?.tv_distance(family.target())? <= eps {
                    return Ok(ConvergenceTime::Finite(m));
                }
            }
            Ok(ConvergenceTime::ExceedsCap(cap))
        }
        TimeMode::Estimate { replicates, seed } => {
            if replicates < 1 {
                return Err(Error::InvalidArgument("replicates must be >= 1".into()));
            }
            let mut chains = (0..replicates)
                .map(|r| {
                    let rng = stream_rng(seed, streams::ADAPTIVE_TIME, u64::from(r));
                    AdaptiveState::new(start.clone(), family, rng)
                })
                .collect::<Result<Vec<_>>>()?;
            for m in 1..=cap {
                chains = chains
                    .into_iter()
                    .map(|chain| step(chain, policy, family))
                    .collect::<Result<Vec<_>>>()?;
                let mut counts = vec![0u64; family.dim()];
                for chain in &chains {
                    counts[chain.x] += 1;
                }
                let empirical = ProbVector::from_counts(&counts)?;
                if empirical.tv_distance(family.target())? <= eps {
                    return Ok(ConvergenceTime::Finite(m));
                }
            }
            Ok(ConvergenceTime::ExceedsCap(cap))
        }
    }
}
