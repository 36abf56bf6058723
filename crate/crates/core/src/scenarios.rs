//! Built-in, fully specified experiment configurations.
//!
//! Each scenario bundles a kernel family, an adaptation policy, starting
//! values, and default grids, so the diagnostics can run end to end from
//! an id alone. Non-ergodic member kernels (the identity, the
//! deterministic flip) are reported as load warnings, never as errors —
//! two of the scenarios depend on them.

use crate::adaptation::{AdaptationPolicy, PairSnapshot, RecursionMap};
use crate::error::{Error, Result};
use crate::markov::{check_ergodicity, KernelFamily, ParamDomain, ProbVector};

/// Default grids and budgets attached to a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioDefaults {
    pub n_grid: Vec<u64>,
    pub m_grid: Vec<u64>,
    pub eps: Vec<f64>,
    pub cap: u64,
    pub replicates: u32,
}

impl Default for ScenarioDefaults {
    fn default() -> Self {
        Self {
            n_grid: vec![10, 100, 1000],
            m_grid: vec![10, 100, 1000],
            eps: vec![0.05],
            cap: 10_000,
            replicates: 100,
        }
    }
}

/// A runnable experiment: family, policy, starting pair, defaults.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub id: String,
    pub family: KernelFamily,
    pub policy: AdaptationPolicy,
    pub x0: usize,
    pub theta0: f64,
    pub defaults: ScenarioDefaults,
    pub notes: String,
    /// Ergodicity findings from load-time kernel checks (warn-only).
    pub warnings: Vec<String>,
}

impl Scenario {
    pub fn target(&self) -> &ProbVector {
        self.family.target()
    }

    /// The initial pair of a fresh run of this scenario.
    pub fn start(&self) -> PairSnapshot {
        PairSnapshot::fresh(self.x0, self.theta0, &self.policy)
    }
}

/// Optional overrides applied at construction.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub x0: Option<usize>,
    pub theta0: Option<f64>,
}

pub const SCENARIO_IDS: [&str; 4] = [
    "ToyFlip",
    "ToyFlipTo1",
    "AlternatingPI",
    "NonAdaptiveControl",
];

/// Build a scenario by id, applying overrides and validating the family
/// (row-stochasticity and stationarity on a probe set, plus the starting
/// parameter).
pub fn build_scenario(id: &str, overrides: &Overrides) -> Result<Scenario> {
    let mut scenario = match id {
        "ToyFlip" => Scenario {
            id: id.into(),
            family: KernelFamily::two_state(ParamDomain::half_open_hi(0.0, 1.0)),
            policy: AdaptationPolicy::recursion(RecursionMap::HarmonicDecay),
            x0: 0,
            theta0: 1.0,
            defaults: ScenarioDefaults::default(),
            notes: "Two-state flip chain; the flip probability follows the harmonic \
                    schedule 1, 1/2, 1/3, ... via the recursion g(t) = t/(1+t). \
                    Adaptation diminishes while the frozen-kernel convergence times \
                    grow without bound. Defaults x0 = 0, theta0 = 1 are conventions; \
                    the chain is symmetric in the starting state."
                .into(),
            warnings: Vec::new(),
        },
        "ToyFlipTo1" => Scenario {
            id: id.into(),
            family: KernelFamily::two_state(ParamDomain::open(0.0, 1.0)),
            policy: AdaptationPolicy::recursion(RecursionMap::HarmonicToOne),
            x0: 0,
            theta0: 0.5,
            defaults: ScenarioDefaults::default(),
            notes: "Mirror schedule climbing toward 1 along 1/2, 2/3, 3/4, ... via \
                    g(t) = 1/(2-t). The nominal start at 0 is the identity kernel and \
                    would stall one step, so the stored start is its successor 1/2; \
                    the gaps 1 - theta_n keep a divergent sum."
                .into(),
            warnings: Vec::new(),
        },
        "AlternatingPI" => Scenario {
            id: id.into(),
            family: KernelFamily::two_state(ParamDomain::Grid(vec![0.5, 0.0])),
            policy: AdaptationPolicy::recursion(RecursionMap::Alternate { a: 0.5, b: 0.0 }),
            x0: 0,
            theta0: 0.5,
            defaults: ScenarioDefaults::default(),
            notes: "Alternates between the half-flip kernel (theta = 0.5) and the \
                    identity (theta = 0). Marginals converge in two steps, yet the \
                    frozen time at every identity step is infinite, so the adaptation \
                    gap never shrinks."
                .into(),
            warnings: Vec::new(),
        },
        "NonAdaptiveControl" => Scenario {
            id: id.into(),
            family: KernelFamily::two_state(ParamDomain::open(0.0, 1.0)),
            policy: AdaptationPolicy::constant(),
            x0: 0,
            theta0: 0.25,
            defaults: ScenarioDefaults::default(),
            notes: "Constant parameter theta = 0.25: the nonadaptive control under \
                    which every adaptive functional collapses to its frozen-kernel \
                    counterpart."
                .into(),
            warnings: Vec::new(),
        },
        other => return Err(Error::UnknownScenario(other.into())),
    };

    if let Some(x0) = overrides.x0 {
        if x0 >= scenario.family.dim() {
            return Err(Error::InvalidOverride(format!(
                "x0 = {x0} out of range for {} states",
                scenario.family.dim()
            )));
        }
        scenario.x0 = x0;
    }
    if let Some(theta0) = overrides.theta0 {
        if !scenario.family.admissible(theta0) {
            return Err(Error::InvalidOverride(format!(
                "theta0 = {theta0} outside domain {}",
                scenario.family.domain()
            )));
        }
        scenario.theta0 = theta0;
    }

    let mut probes = scenario.family.probe_params();
    probes.push(scenario.theta0);
    scenario.family.validate(&probes)?;

    for &theta in &probes {
        let report = check_ergodicity(&scenario.family.kernel(theta)?);
        if !report.ergodic {
            scenario.warnings.push(format!(
                "kernel at theta = {theta} is not ergodic: {}",
                report.reason
            ));
        }
    }

    Ok(scenario)
}

/// Stable listing of the built-in scenarios.
pub fn list_scenarios() -> Vec<(String, String)> {
    SCENARIO_IDS
        .iter()
        .map(|id| {
            let s = build_scenario(id, &Overrides::default()).expect("built-ins construct");
            (s.id, s.notes)
        })
        .collect()
}
