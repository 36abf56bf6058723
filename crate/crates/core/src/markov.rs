//! Exact finite-state Markov chain machinery.
//!
//! Distributions live on the probability simplex over `{0, .., d-1}`,
//! kernels are row-stochastic matrices, and distances are total variation:
//!
//! ```text
//! tv(p, q) = sup_A |p(A) - q(A)| = (1/2) Σ_i |p_i - q_i|
//! ```
//!
//! The central quantity is the frozen-kernel convergence time: the first
//! `n >= 1` at which `n` steps of a fixed kernel from a point mass land
//! within `eps` of the stationary distribution in total variation. Kernels
//! that never get there (the identity, periodic flips) report a censored
//! time once the search cap is exhausted.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when comparing probabilities for exact-equality claims.
pub const PROB_TOL: f64 = 1e-12;

/// Tolerance for stationarity validation of a kernel family.
pub const STATIONARITY_TOL: f64 = 1e-10;

/// A probability distribution over a finite state space.
///
/// Construction renormalizes, so long products of kernels do not drift
/// off the simplex; entries are guaranteed nonnegative and sum to one
/// within [`PROB_TOL`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbVector {
    weights: Vec<f64>,
}

impl ProbVector {
    /// Build from raw weights. Rejects negative entries (below -1e-12) and
    /// non-finite values; small negative rounding noise is clamped to zero.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidDistribution("no states".into()));
        }
        let mut w = weights;
        let mut sum = 0.0;
        for v in &mut w {
            if !v.is_finite() {
                return Err(Error::InvalidDistribution(format!("non-finite entry {v}")));
            }
            if *v < -PROB_TOL {
                return Err(Error::InvalidDistribution(format!("negative entry {v}")));
            }
            if *v < 0.0 {
                *v = 0.0;
            }
            sum += *v;
        }
        if sum <= 0.0 {
            return Err(Error::InvalidDistribution("total mass is zero".into()));
        }
        for v in &mut w {
            *v /= sum;
        }
        Ok(Self { weights: w })
    }

    /// Point mass at state `x`.
    pub fn point_mass(x: usize, dim: usize) -> Result<Self> {
        if x >= dim {
            return Err(Error::StateOutOfRange { x, dim });
        }
        let mut w = vec![0.0; dim];
        w[x] = 1.0;
        Ok(Self { weights: w })
    }

    /// Uniform distribution on `dim` states.
    pub fn uniform(dim: usize) -> Result<Self> {
        Self::new(vec![1.0; dim])
    }

    /// Empirical distribution from per-state counts.
    pub fn from_counts(counts: &[u64]) -> Result<Self> {
        Self::new(counts.iter().map(|&c| c as f64).collect())
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn get(&self, x: usize) -> f64 {
        self.weights[x]
    }

    /// Total variation distance, computed as half the L1 distance.
    pub fn tv_distance(&self, other: &Self) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        let l1: f64 = self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (a - b).abs())
            .sum();
        Ok(0.5 * l1)
    }

    /// Left-multiply by a kernel: the distribution after one transition.
    pub fn apply_kernel(&self, kernel: &TransitionMatrix) -> Result<Self> {
        if self.dim() != kernel.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: kernel.dim(),
            });
        }
        let d = self.dim();
        let mut out = vec![0.0; d];
        for (x, &px) in self.weights.iter().enumerate() {
            if px == 0.0 {
                continue;
            }
            for (y, &k) in kernel.row(x).weights().iter().enumerate() {
                out[y] += px * k;
            }
        }
        Self::new(out)
    }
}

/// A row-stochastic transition matrix over a finite state space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    rows: Vec<ProbVector>,
}

impl TransitionMatrix {
    /// Build from raw rows; each row is validated and renormalized.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidDistribution("no rows".into()));
        }
        let d = rows.len();
        let rows = rows
            .into_iter()
            .map(|r| {
                if r.len() != d {
                    return Err(Error::DimensionMismatch {
                        left: d,
                        right: r.len(),
                    });
                }
                ProbVector::new(r)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { rows })
    }

    /// Identity kernel (never moves).
    pub fn identity(dim: usize) -> Self {
        let rows = (0..dim)
            .map(|i| ProbVector::point_mass(i, dim).expect("dim > 0"))
            .collect();
        Self { rows }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, x: usize) -> &ProbVector {
        &self.rows[x]
    }

    pub fn entry(&self, x: usize, y: usize) -> f64 {
        self.rows[x].get(y)
    }

    /// Ordered matrix product `self · other`.
    pub fn multiply(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        let rows = self
            .rows
            .iter()
            .map(|r| r.apply_kernel(other))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { rows })
    }

    /// `n`-th matrix power; `n = 0` yields the identity.
    pub fn power(&self, n: u64) -> Result<Self> {
        let mut acc = Self::identity(self.dim());
        for _ in 0..n {
            acc = acc.multiply(self)?;
        }
        Ok(acc)
    }

    /// Ordered product of a nonempty kernel sequence.
    pub fn product(seq: &[Self]) -> Result<Self> {
        let (first, rest) = seq.split_first().ok_or(Error::EmptySequence)?;
        let mut acc = first.clone();
        for k in rest {
            acc = acc.multiply(k)?;
        }
        Ok(acc)
    }

    /// Worst-case row distance: `max_x tv(self[x, ·], other[x, ·])`.
    pub fn sup_row_distance(&self, other: &Self) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        let mut sup = 0.0_f64;
        for (a, b) in self.rows.iter().zip(&other.rows) {
            sup = sup.max(a.tv_distance(b)?);
        }
        Ok(sup)
    }
}

/// Outcome of searching for a convergence time under a step budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConvergenceTime {
    /// Converged at this step count (1-based).
    Finite(u64),
    /// No step up to the cap got within tolerance; stands in for an
    /// effectively infinite time.
    ExceedsCap(u64),
}

impl ConvergenceTime {
    pub fn is_finite(&self) -> bool {
        matches!(self, ConvergenceTime::Finite(_))
    }

    /// Whether the time exceeds a finite threshold. Censored times exceed
    /// every threshold.
    pub fn exceeds(&self, threshold: f64) -> bool {
        match self {
            ConvergenceTime::Finite(n) => *n as f64 > threshold,
            ConvergenceTime::ExceedsCap(_) => true,
        }
    }
}

impl fmt::Display for ConvergenceTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConvergenceTime::Finite(n) => write!(f, "{n}"),
            ConvergenceTime::ExceedsCap(cap) => write!(f, "EXCEEDS_CAP({cap})"),
        }
    }
}

/// The parameter domain of a kernel family: an interval with open or
/// closed endpoints, or an explicit finite grid of values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ParamDomain {
    Interval {
        lo: f64,
        hi: f64,
        closed_lo: bool,
        closed_hi: bool,
    },
    Grid(Vec<f64>),
}

impl ParamDomain {
    pub fn open(lo: f64, hi: f64) -> Self {
        ParamDomain::Interval {
            lo,
            hi,
            closed_lo: false,
            closed_hi: false,
        }
    }

    pub fn half_open_hi(lo: f64, hi: f64) -> Self {
        ParamDomain::Interval {
            lo,
            hi,
            closed_lo: false,
            closed_hi: true,
        }
    }

    pub fn contains(&self, theta: f64) -> bool {
        match self {
            ParamDomain::Interval {
                lo,
                hi,
                closed_lo,
                closed_hi,
            } => {
                let above = if *closed_lo {
                    theta >= *lo
                } else {
                    theta > *lo
                };
                let below = if *closed_hi {
                    theta <= *hi
                } else {
                    theta < *hi
                };
                theta.is_finite() && above && below
            }
            ParamDomain::Grid(values) => values.iter().any(|v| (v - theta).abs() <= PROB_TOL),
        }
    }

    /// For grid domains, the index of a value (within tolerance).
    pub fn grid_index(&self, theta: f64) -> Option<usize> {
        match self {
            ParamDomain::Grid(values) => values.iter().position(|v| (v - theta).abs() <= PROB_TOL),
            ParamDomain::Interval { .. } => None,
        }
    }

    pub fn grid_values(&self) -> Option<&[f64]> {
        match self {
            ParamDomain::Grid(values) => Some(values),
            ParamDomain::Interval { .. } => None,
        }
    }
}

impl fmt::Display for ParamDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamDomain::Interval {
                lo,
                hi,
                closed_lo,
                closed_hi,
            } => write!(
                f,
                "{}{lo}, {hi}{}",
                if *closed_lo { '[' } else { '(' },
                if *closed_hi { ']' } else { ')' },
            ),
            ParamDomain::Grid(values) => write!(f, "{values:?}"),
        }
    }
}

type KernelBuilder = Arc<dyn Fn(f64) -> TransitionMatrix + Send + Sync>;

/// A parameterized family of transition kernels sharing one stationary
/// distribution.
///
/// The target is supplied, not solved for; [`KernelFamily::validate`]
/// checks `π P_θ = π` on a probe set of parameters at construction time.
#[derive(Clone)]
pub struct KernelFamily {
    domain: ParamDomain,
    builder: KernelBuilder,
    target: ProbVector,
}

impl fmt::Debug for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelFamily")
            .field("domain", &self.domain)
            .field("target", &self.target)
            .finish_non_exhaustive()
    }
}

impl KernelFamily {
    pub fn new(
        domain: ParamDomain,
        target: ProbVector,
        builder: impl Fn(f64) -> TransitionMatrix + Send + Sync + 'static,
    ) -> Self {
        Self {
            domain,
            builder: Arc::new(builder),
            target,
        }
    }

    /// The symmetric two-state family with off-diagonal `theta`:
    /// rows `(1-θ, θ)` and `(θ, 1-θ)`, stationary at the uniform law.
    pub fn two_state(domain: ParamDomain) -> Self {
        let target = ProbVector::uniform(2).expect("two states");
        Self::new(domain, target, |theta| {
            TransitionMatrix::from_rows(vec![vec![1.0 - theta, theta], vec![theta, 1.0 - theta]])
                .expect("two-state rows are stochastic for theta in [0,1]")
        })
    }

    /// A lazy random walk on the `dim`-cycle: `P_θ = (1-θ) I + θ W` where
    /// `W` steps to each neighbour with probability 1/2. Stationary at the
    /// uniform law for every `θ`; used as a multi-state test family.
    pub fn lazy_cycle(dim: usize, domain: ParamDomain) -> Self {
        assert!(dim >= 2, "cycle needs at least two states");
        let target = ProbVector::uniform(dim).expect("dim >= 2");
        Self::new(domain, target, move |theta| {
            let mut rows = vec![vec![0.0; dim]; dim];
            for (i, row) in rows.iter_mut().enumerate() {
                row[i] += 1.0 - theta;
                row[(i + 1) % dim] += theta / 2.0;
                row[(i + dim - 1) % dim] += theta / 2.0;
            }
            TransitionMatrix::from_rows(rows).expect("rows are stochastic for theta in [0,1]")
        })
    }

    pub fn domain(&self) -> &ParamDomain {
        &self.domain
    }

    pub fn target(&self) -> &ProbVector {
        &self.target
    }

    pub fn dim(&self) -> usize {
        self.target.dim()
    }

    pub fn admissible(&self, theta: f64) -> bool {
        self.domain.contains(theta)
    }

    fn check_admissible(&self, theta: f64) -> Result<()> {
        if self.admissible(theta) {
            Ok(())
        } else {
            Err(Error::InadmissibleTheta {
                theta,
                domain: self.domain.to_string(),
            })
        }
    }

    /// The kernel at `theta`, after an admissibility check.
    pub fn kernel(&self, theta: f64) -> Result<TransitionMatrix> {
        self.check_admissible(theta)?;
        Ok((self.builder)(theta))
    }

    /// Verify row-stochasticity (by construction) and stationarity of the
    /// target under each probe parameter.
    pub fn validate(&self, probes: &[f64]) -> Result<()> {
        for &theta in probes {
            let kernel = self.kernel(theta)?;
            if kernel.dim() != self.dim() {
                return Err(Error::DimensionMismatch {
                    left: kernel.dim(),
                    right: self.dim(),
                });
            }
            let moved = self.target.apply_kernel(&kernel)?;
            let tv = moved.tv_distance(&self.target)?;
            if tv > STATIONARITY_TOL {
                return Err(Error::NotStationary { theta, tv });
            }
        }
        Ok(())
    }

    /// Probe parameters for validation: the whole grid, or a coarse sweep
    /// of the interval interior.
    pub fn probe_params(&self) -> Vec<f64> {
        match &self.domain {
            ParamDomain::Grid(values) => values.clone(),
            ParamDomain::Interval { lo, hi, .. } => {
                let span = hi - lo;
                (1..=9).map(|i| lo + span * f64::from(i) / 10.0).collect()
            }
        }
    }
}

/// Frozen-kernel convergence time: the smallest `n >= 1` with
/// `tv(δ_x P_θ^n, π) <= eps`, searched by iterating the distribution.
pub fn convergence_time(
    family: &KernelFamily,
    x: usize,
    theta: f64,
    eps: f64,
    cap: u64,
) -> Result<ConvergenceTime> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidEpsilon(eps));
    }
    if cap < 1 {
        return Err(Error::InvalidCap);
    }
    let kernel = family.kernel(theta)?;
    let mut dist = ProbVector::point_mass(x, family.dim())?;
    for n in 1..=cap {
        dist = dist.apply_kernel(&kernel)?;
        if dist.tv_distance(family.target())? <= eps {
            return Ok(ConvergenceTime::Finite(n));
        }
    }
    Ok(ConvergenceTime::ExceedsCap(cap))
}

/// Ergodicity verdict for a single kernel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErgodicityReport {
    pub ergodic: bool,
    pub reason: String,
}

/// Check irreducibility (strong connectivity of the positive-entry digraph)
/// and aperiodicity (gcd of cycle lengths through a reference state).
pub fn check_ergodicity(kernel: &TransitionMatrix) -> ErgodicityReport {
    let d = kernel.dim();
    let reachable_from = |start: usize| -> Vec<bool> {
        let mut seen = vec![false; d];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(x) = stack.pop() {
            for (y, seen_y) in seen.iter_mut().enumerate() {
                if !*seen_y && kernel.entry(x, y) > 0.0 {
                    *seen_y = true;
                    stack.push(y);
                }
            }
        }
        seen
    };

    let forward = reachable_from(0);
    if !forward.iter().all(|&r| r) {
        return ErgodicityReport {
            ergodic: false,
            reason: "reducible".into(),
        };
    }
    for x in 1..d {
        if !reachable_from(x)[0] {
            return ErgodicityReport {
                ergodic: false,
                reason: "reducible".into(),
            };
        }
    }

    // Period = gcd over edges (x, y) of d(x) + 1 - d(y), where d is the
    // BFS level from the reference state. Valid on an irreducible chain.
    let mut level = vec![u64::MAX; d];
    level[0] = 0;
    let mut queue = std::collections::VecDeque::from([0usize]);
    while let Some(x) = queue.pop_front() {
        for y in 0..d {
            if kernel.entry(x, y) > 0.0 && level[y] == u64::MAX {
                level[y] = level[x] + 1;
                queue.push_back(y);
            }
        }
    }
    let mut period = 0u64;
    for x in 0..d {
        for y in 0..d {
            if kernel.entry(x, y) > 0.0 {
                let diff = (level[x] + 1).abs_diff(level[y]);
                period = gcd(period, diff);
            }
        }
    }
    if period != 1 {
        return ErgodicityReport {
            ergodic: false,
            reason: format!("periodic (period {period})"),
        };
    }
    ErgodicityReport {
        ergodic: true,
        reason: "irreducible and aperiodic".into(),
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state_closed() -> KernelFamily {
        KernelFamily::two_state(ParamDomain::Interval {
            lo: 0.0,
            hi: 1.0,
            closed_lo: true,
            closed_hi: true,
        })
    }

    #[test]
    fn tv_point_mass_vs_uniform() {
        let p = ProbVector::new(vec![1.0, 0.0]).unwrap();
        let q = ProbVector::new(vec![0.5, 0.5]).unwrap();
        assert!((p.tv_distance(&q).unwrap() - 0.5).abs() < PROB_TOL);
    }

    #[test]
    fn tv_identical_is_zero() {
        let p = ProbVector::new(vec![0.2, 0.3, 0.5]).unwrap();
        assert_eq!(p.tv_distance(&p).unwrap(), 0.0);
    }

    #[test]
    fn tv_half_l1_arithmetic() {
        let p = ProbVector::new(vec![0.3, 0.7]).unwrap();
        let q = ProbVector::new(vec![0.5, 0.5]).unwrap();
        assert!((p.tv_distance(&q).unwrap() - 0.2).abs() < PROB_TOL);
    }

    #[test]
    fn tv_dimension_mismatch() {
        let p = ProbVector::uniform(2).unwrap();
        let q = ProbVector::uniform(3).unwrap();
        assert!(matches!(
            p.tv_distance(&q),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn apply_kernel_uniform_doubly_stochastic() {
        // Doubly stochastic 3x3 kernel keeps the uniform law fixed.
        let k = TransitionMatrix::from_rows(vec![
            vec![0.5, 0.3, 0.2],
            vec![0.2, 0.5, 0.3],
            vec![0.3, 0.2, 0.5],
        ])
        .unwrap();
        let u = ProbVector::uniform(3).unwrap();
        let moved = u.apply_kernel(&k).unwrap();
        assert!(moved.tv_distance(&u).unwrap() < PROB_TOL);
    }

    #[test]
    fn apply_kernel_reads_row() {
        let family = two_state_closed();
        let k = family.kernel(0.1).unwrap();
        let p = ProbVector::point_mass(0, 2).unwrap();
        let moved = p.apply_kernel(&k).unwrap();
        assert!((moved.get(0) - 0.9).abs() < PROB_TOL);
        assert!((moved.get(1) - 0.1).abs() < PROB_TOL);
    }

    #[test]
    fn apply_identity_fixes_point_mass() {
        let p = ProbVector::point_mass(0, 3).unwrap();
        let moved = p.apply_kernel(&TransitionMatrix::identity(3)).unwrap();
        assert_eq!(moved, p);
    }

    #[test]
    fn product_singleton() {
        let k = two_state_closed().kernel(0.3).unwrap();
        let prod = TransitionMatrix::product(std::slice::from_ref(&k)).unwrap();
        assert!(prod.sup_row_distance(&k).unwrap() < PROB_TOL);
    }

    #[test]
    fn product_absorbs_identity() {
        let k = two_state_closed().kernel(0.3).unwrap();
        let id = TransitionMatrix::identity(2);
        let prod = TransitionMatrix::product(&[id.clone(), k.clone(), id]).unwrap();
        assert!(prod.sup_row_distance(&k).unwrap() < PROB_TOL);
    }

    #[test]
    fn product_two_state_off_diagonal() {
        // Off-diagonal of P_θ² is 2θ(1-θ): brute-force 2x2 multiplication.
        let k = two_state_closed().kernel(0.25).unwrap();
        let brute = {
            let mut rows = vec![vec![0.0; 2]; 2];
            for (x, row) in rows.iter_mut().enumerate() {
                for (y, cell) in row.iter_mut().enumerate() {
                    *cell = (0..2).map(|z| k.entry(x, z) * k.entry(z, y)).sum();
                }
            }
            TransitionMatrix::from_rows(rows).unwrap()
        };
        let prod = TransitionMatrix::product(&[k.clone(), k]).unwrap();
        assert!((prod.entry(0, 1) - 0.375).abs() < PROB_TOL);
        assert!(prod.sup_row_distance(&brute).unwrap() < PROB_TOL);
    }

    #[test]
    fn product_of_empty_sequence_fails() {
        assert!(matches!(
            TransitionMatrix::product(&[]),
            Err(Error::EmptySequence)
        ));
    }

    #[test]
    fn sup_distance_identical_is_zero() {
        let k = two_state_closed().kernel(0.3).unwrap();
        assert_eq!(k.sup_row_distance(&k).unwrap(), 0.0);
    }

    #[test]
    fn sup_distance_two_state_is_theta_gap() {
        // Per-row TV between P_a and P_b is |a - b|, verified row by row.
        let family = two_state_closed();
        let a = family.kernel(0.2).unwrap();
        let b = family.kernel(0.3).unwrap();
        let by_rows = (0..2)
            .map(|x| a.row(x).tv_distance(b.row(x)).unwrap())
            .fold(0.0_f64, f64::max);
        let sup = a.sup_row_distance(&b).unwrap();
        assert!((sup - 0.1).abs() < PROB_TOL);
        assert!((sup - by_rows).abs() < PROB_TOL);
    }

    #[test]
    fn sup_distance_half_kernel_vs_identity() {
        let k = two_state_closed().kernel(0.5).unwrap();
        let id = TransitionMatrix::identity(2);
        assert!((k.sup_row_distance(&id).unwrap() - 0.5).abs() < PROB_TOL);
    }

    /// Brute-force oracle: convergence time via explicit matrix powers.
    fn convergence_time_by_matrix_powers(
        family: &KernelFamily,
        x: usize,
        theta: f64,
        eps: f64,
        cap: u64,
    ) -> ConvergenceTime {
        let kernel = family.kernel(theta).unwrap();
        let mut power = kernel.clone();
        for n in 1..=cap {
            let dist = power.row(x);
            if dist.tv_distance(family.target()).unwrap() <= eps {
                return ConvergenceTime::Finite(n);
            }
            power = power.multiply(&kernel).unwrap();
        }
        ConvergenceTime::ExceedsCap(cap)
    }

    /// Closed form for the two-state family: ceil(log(2eps)/log|1-2θ|),
    /// floored at 1.
    fn two_state_closed_form(theta: f64, eps: f64) -> u64 {
        let ratio = (2.0 * eps).ln() / (1.0 - 2.0 * theta).abs().ln();
        (ratio.ceil() as u64).max(1)
    }

    #[test]
    fn convergence_time_two_state_derived_cell() {
        // min{n : (1/2) 0.8^n <= 0.01} = 18, cross-checked against powers.
        let family = two_state_closed();
        let t = convergence_time(&family, 0, 0.1, 0.01, 1000).unwrap();
        assert_eq!(t, ConvergenceTime::Finite(18));
        assert_eq!(
            t,
            convergence_time_by_matrix_powers(&family, 0, 0.1, 0.01, 1000)
        );
    }

    #[test]
    fn convergence_time_half_theta_is_one_step() {
        let family = two_state_closed();
        for &eps in &[0.3, 0.05, 0.001] {
            for x in 0..2 {
                assert_eq!(
                    convergence_time(&family, x, 0.5, eps, 10).unwrap(),
                    ConvergenceTime::Finite(1)
                );
            }
        }
    }

    #[test]
    fn convergence_time_identity_exceeds_cap() {
        let family = two_state_closed();
        assert_eq!(
            convergence_time(&family, 0, 0.0, 0.1, 1000).unwrap(),
            ConvergenceTime::ExceedsCap(1000)
        );
    }

    #[test]
    fn convergence_time_rejects_bad_inputs() {
        let family = KernelFamily::two_state(ParamDomain::open(0.0, 1.0));
        assert!(matches!(
            convergence_time(&family, 0, 1.5, 0.1, 10),
            Err(Error::InadmissibleTheta { .. })
        ));
        assert!(matches!(
            convergence_time(&family, 0, 0.3, 0.0, 10),
            Err(Error::InvalidEpsilon(_))
        ));
        assert!(matches!(
            convergence_time(&family, 0, 0.3, 1.0, 10),
            Err(Error::InvalidEpsilon(_))
        ));
        assert!(matches!(
            convergence_time(&family, 0, 0.3, 0.1, 0),
            Err(Error::InvalidCap)
        ));
    }

    #[test]
    fn convergence_time_matches_closed_form_grid() {
        let family = two_state_closed();
        for i in 1..=9 {
            let theta = 0.05 * f64::from(i);
            for &eps in &[0.1, 0.01, 0.001] {
                let expected = two_state_closed_form(theta, eps);
                for x in 0..2 {
                    assert_eq!(
                        convergence_time(&family, x, theta, eps, 100_000).unwrap(),
                        ConvergenceTime::Finite(expected),
                        "theta={theta} eps={eps} x={x}"
                    );
                }
            }
        }
    }

    #[test]
    fn ergodicity_positive_two_state() {
        let family = two_state_closed();
        for &theta in &[0.1, 0.5, 0.9] {
            let report = check_ergodicity(&family.kernel(theta).unwrap());
            assert!(report.ergodic, "theta={theta}: {}", report.reason);
        }
    }

    #[test]
    fn ergodicity_identity_is_reducible() {
        let report = check_ergodicity(&TransitionMatrix::identity(3));
        assert!(!report.ergodic);
        assert_eq!(report.reason, "reducible");
    }

    #[test]
    fn ergodicity_deterministic_flip_is_periodic() {
        let family = two_state_closed();
        let report = check_ergodicity(&family.kernel(1.0).unwrap());
        assert!(!report.ergodic);
        assert!(report.reason.starts_with("periodic"), "{}", report.reason);
    }

    #[test]
    fn stationarity_validation_accepts_two_state() {
        let family = two_state_closed();
        family.validate(&family.probe_params()).unwrap();
        family.validate(&[0.0, 1.0]).unwrap();
    }

    #[test]
    fn stationarity_validation_rejects_wrong_target() {
        let bad = KernelFamily::new(
            ParamDomain::open(0.0, 1.0),
            ProbVector::new(vec![0.9, 0.1]).unwrap(),
            |theta| {
                TransitionMatrix::from_rows(vec![
                    vec![1.0 - theta, theta],
                    vec![theta, 1.0 - theta],
                ])
                .unwrap()
            },
        );
        assert!(matches!(
            bad.validate(&[0.3]),
            Err(Error::NotStationary { .. })
        ));
    }

    #[test]
    fn lazy_cycle_is_stochastic_and_stationary() {
        for dim in [2, 3, 5] {
            let family = KernelFamily::lazy_cycle(dim, ParamDomain::open(0.0, 1.0));
            family.validate(&family.probe_params()).unwrap();
        }
    }

    #[test]
    fn renormalization_drift_stays_small_over_long_products() {
        // 10^4 kernel applications: the raw row-vector product drifts off
        // the simplex by strictly less than 1e-9 per application.
        let family = two_state_closed();
        let kernel = family.kernel(0.3).unwrap();
        let mut dist = ProbVector::point_mass(0, 2).unwrap();
        let mut max_drift = 0.0_f64;
        for _ in 0..10_000 {
            let raw: Vec<f64> = (0..2)
                .map(|y| (0..2).map(|x| dist.get(x) * kernel.entry(x, y)).sum())
                .collect();
            let drift = (raw.iter().sum::<f64>() - 1.0).abs();
            max_drift = max_drift.max(drift);
            dist = ProbVector::new(raw).unwrap();
        }
        assert!(max_drift < 1e-9, "max drift {max_drift}");
        assert!((dist.weights().iter().sum::<f64>() - 1.0).abs() <= PROB_TOL);
    }

    #[test]
    fn prob_vector_rejects_garbage() {
        assert!(ProbVector::new(vec![]).is_err());
        assert!(ProbVector::new(vec![0.5, -0.2]).is_err());
        assert!(ProbVector::new(vec![0.0, 0.0]).is_err());
        assert!(ProbVector::new(vec![f64::NAN, 1.0]).is_err());
        // Tiny negative rounding noise is clamped, not rejected.
        let p = ProbVector::new(vec![1.0, -1e-15]).unwrap();
        assert_eq!(p.get(1), 0.0);
    }
}
