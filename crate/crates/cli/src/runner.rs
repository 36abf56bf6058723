//! End-to-end orchestration: resolve a config against its scenario, run
//! the diagnostics, and emit the report files.
//!
//! Emitted files (under the configured output directory):
//!
//! - `report.json` — the assembled diagnostics report (json format);
//! - `diminishing.csv` — columns `n, D_median, D_q95`;
//! - `containment.csv` — columns `n, M, eps, tail_prob, censored_frac`,
//!   one block per requested epsilon;
//! - `adapfail.csv` — columns `M, delta` for the primary (first) epsilon;
//! - `manifest.json` — format version, seed, effective config echo, and
//!   the sha256 digest of every other emitted file.
//!
//! Identical config and seed produce byte-identical files whether
//! replicate parallelism is on or off; nothing time- or path-dependent is
//! written. Partial outputs are removed if the run fails midway.

use std::fs;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use adaptlab_core::adaptation::marginal_estimate;
use adaptlab_core::adaptation::{adaptive_convergence_time, TimeMode};
use adaptlab_core::diagnostics::{
    adaptive_tail, assemble_report, containment_tail, diminishing_series, windowed_tail_delta,
    AdaptiveTimeMode, DiagnosticsReport, ExecMode, Provenance, TailMatrix, Thresholds,
};
use adaptlab_core::markov::{convergence_time, ConvergenceTime};
use adaptlab_core::scenarios::{build_scenario, Scenario};

use crate::config::{validate_resolved, OutputFormat, RunConfig};
use crate::error::RunError;

/// Inner replicate count used when adaptive times need nested Monte Carlo.
const NESTED_REPLICATES: u32 = 200;

/// A config with every field resolved against the scenario defaults.
#[derive(Debug, Clone)]
pub struct ResolvedRun {
    pub scenario: Scenario,
    pub eps: Vec<f64>,
    pub n_grid: Vec<u64>,
    pub m_grid: Vec<u64>,
    pub cap: u64,
    pub replicates: u32,
    pub n_burn: u64,
    pub thresholds: Thresholds,
    pub seed: u64,
    pub parallel: bool,
    pub out_dir: PathBuf,
    pub formats: Vec<OutputFormat>,
}

impl ResolvedRun {
    pub fn exec(&self) -> ExecMode {
        if self.parallel {
            ExecMode::Parallel
        } else {
            ExecMode::Sequential
        }
    }
}

/// The effective experiment parameters echoed into the manifest and hashed
/// into the report provenance. Execution details (output directory,
/// formats, parallelism) do not change any number, so they are left out
/// and the emitted bytes stay identical across those settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectiveConfig {
    pub scenario: String,
    pub seed: u64,
    pub eps: Vec<f64>,
    pub n_grid: Vec<u64>,
    pub m_grid: Vec<u64>,
    pub cap: u64,
    pub replicates: u32,
    pub n_burn: u64,
    pub delta_star: f64,
    pub eta_star: f64,
    pub x0: usize,
    pub theta0: f64,
}

impl EffectiveConfig {
    fn of(run: &ResolvedRun) -> Self {
        Self {
            scenario: run.scenario.id.clone(),
            seed: run.seed,
            eps: run.eps.clone(),
            n_grid: run.n_grid.clone(),
            m_grid: run.m_grid.clone(),
            cap: run.cap,
            replicates: run.replicates,
            n_burn: run.n_burn,
            delta_star: run.thresholds.delta_star,
            eta_star: run.thresholds.eta_star,
            x0: run.scenario.x0,
            theta0: run.scenario.theta0,
        }
    }

    fn digest(&self) -> Result<String, RunError> {
        let text = toml::to_string(self).map_err(|e| RunError::Config(e.to_string()))?;
        Ok(sha256_hex(text.as_bytes()))
    }
}

/// Merge the config with its scenario's defaults and validate.
pub fn resolve(config: &RunConfig) -> Result<ResolvedRun, RunError> {
    let scenario = build_scenario(&config.scenario, &config.overrides.to_core())?;
    let defaults = scenario.defaults.clone();
    let eps = config.eps.clone().unwrap_or(defaults.eps);
    let n_grid = config.n_grid.clone().unwrap_or(defaults.n_grid);
    let m_grid = config.m_grid.clone().unwrap_or(defaults.m_grid);
    let cap = config.cap.unwrap_or(defaults.cap);
    let replicates = config.replicates.unwrap_or(defaults.replicates);
    let n_burn = config
        .n_burn
        .unwrap_or_else(|| n_grid.last().copied().unwrap_or(0) / 4);
    validate_resolved(
        &eps,
        &n_grid,
        &m_grid,
        cap,
        replicates,
        n_burn,
        config.delta_star,
        config.eta_star,
        &config.formats,
    )?;
    Ok(ResolvedRun {
        scenario,
        eps,
        n_grid,
        m_grid,
        cap,
        replicates,
        n_burn,
        thresholds: Thresholds {
            delta_star: config.delta_star,
            eta_star: config.eta_star,
        },
        seed: config.seed,
        parallel: config.parallel,
        out_dir: config.out_dir.clone(),
        formats: config.formats.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmittedFile {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFiles {
    pub files: Vec<EmittedFile>,
    pub report: DiagnosticsReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    seed: u64,
    config: EffectiveConfig,
    files: Vec<EmittedFile>,
}

/// Run the resolved diagnostics and return the report without touching the
/// filesystem.
pub fn run_diagnostics(
    run: &ResolvedRun,
) -> Result<(DiagnosticsReport, Vec<TailMatrix>), RunError> {
    let exec = run.exec();
    let s = &run.scenario;
    let n_max = *run.n_grid.last().expect("validated nonempty");

    // Deterministic state-independent policies need a single replicate for
    // an exact gap series.
    let gap_replicates = if s.policy.is_deterministic() && s.policy.state_independent() {
        1
    } else {
        run.replicates
    };
    let diminishing = diminishing_series(
        &s.policy,
        &s.family,
        s.x0,
        s.theta0,
        n_max,
        gap_replicates,
        run.seed,
        exec,
    )?;

    let frozen: Vec<TailMatrix> = run
        .eps
        .iter()
        .map(|&eps| {
            containment_tail(
                s,
                eps,
                &run.n_grid,
                &run.m_grid,
                run.cap,
                run.replicates,
                run.seed,
                exec,
            )
        })
        .collect::<Result<_, _>>()?;

    let adaptive_mode = if s.policy.exactly_propagatable(&s.family) {
        AdaptiveTimeMode::Exact
    } else {
        AdaptiveTimeMode::Nested {
            replicates: NESTED_REPLICATES,
        }
    };
    let primary_eps = run.eps[0];
    let adaptive = adaptive_tail(
        s,
        primary_eps,
        &run.n_grid,
        &run.m_grid,
        run.cap,
        run.replicates,
        run.seed,
        adaptive_mode,
        exec,
    )?;
    let delta = windowed_tail_delta(&adaptive, run.n_burn)?;

    let provenance = Provenance {
        seed: run.seed,
        config_digest: EffectiveConfig::of(run).digest()?,
    };
    let report = assemble_report(
        &s.id,
        primary_eps,
        run.thresholds,
        run.n_burn,
        diminishing,
        frozen[0].clone(),
        delta,
        provenance,
    )?;
    Ok((report, frozen))
}

/// Full run: diagnostics plus report files on disk.
pub fn run(config: &RunConfig) -> Result<ReportFiles, RunError> {
    let resolved = resolve(config)?;
    let (report, frozen) = run_diagnostics(&resolved)?;

    fs::create_dir_all(&resolved.out_dir)?;
    let mut written: Vec<PathBuf> = Vec::new();
    let result = emit_files(&resolved, &report, &frozen, &mut written);
    if result.is_err() {
        for path in &written {
            let _ = fs::remove_file(path);
        }
    }
    result
}

fn emit_files(
    run: &ResolvedRun,
    report: &DiagnosticsReport,
    frozen: &[TailMatrix],
    written: &mut Vec<PathBuf>,
) -> Result<ReportFiles, RunError> {
    let mut files: Vec<EmittedFile> = Vec::new();
    let mut write =
        |name: &str, content: &[u8], written: &mut Vec<PathBuf>| -> Result<(), RunError> {
            let path = run.out_dir.join(name);
            fs::write(&path, content)?;
            written.push(path.clone());
            files.push(EmittedFile {
                path,
                sha256: sha256_hex(content),
            });
            Ok(())
        };

    if run.formats.contains(&OutputFormat::Json) {
        let json = serde_json::to_string_pretty(report).map_err(|e| RunError::Io(e.to_string()))?;
        write("report.json", json.as_bytes(), written)?;
    }
    if run.formats.contains(&OutputFormat::Csv) {
        write(
            "diminishing.csv",
            diminishing_csv(report).as_bytes(),
            written,
        )?;
        write(
            "containment.csv",
            containment_csv(frozen).as_bytes(),
            written,
        )?;
        write("adapfail.csv", adapfail_csv(report).as_bytes(), written)?;
    }

    let manifest = Manifest {
        format_version: 1,
        seed: run.seed,
        config: EffectiveConfig::of(run),
        files: files.clone(),
    };
    let manifest_json =
        serde_json::to_string_pretty(&manifest).map_err(|e| RunError::Io(e.to_string()))?;
    let manifest_path = run.out_dir.join("manifest.json");
    fs::write(&manifest_path, manifest_json.as_bytes())?;
    written.push(manifest_path.clone());
    files.push(EmittedFile {
        path: manifest_path,
        sha256: sha256_hex(manifest_json.as_bytes()),
    });

    Ok(ReportFiles {
        files,
        report: report.clone(),
    })
}

/// Probabilities are written with 17 significant digits so re-ingestion
/// reproduces the exact f64 values.
fn float_cell(v: f64) -> String {
    format!("{v:.16e}")
}

fn diminishing_csv(report: &DiagnosticsReport) -> String {
    let mut out = String::from("n,D_median,D_q95\n");
    let series = &report.diminishing;
    for (i, &n) in series.n.iter().enumerate() {
        out.push_str(&format!(
            "{n},{},{}\n",
            float_cell(series.median[i]),
            float_cell(series.q95[i])
        ));
    }
    out
}

fn containment_csv(frozen: &[TailMatrix]) -> String {
    let mut out = String::from("n,M,eps,tail_prob,censored_frac\n");
    for tail in frozen {
        for (i, &n) in tail.n_grid.iter().enumerate() {
            for (j, &m) in tail.m_grid.iter().enumerate() {
                out.push_str(&format!(
                    "{n},{m},{},{},{}\n",
                    float_cell(tail.eps),
                    float_cell(tail.probs[i][j]),
                    float_cell(tail.censored[i])
                ));
            }
        }
    }
    out
}

fn adapfail_csv(report: &DiagnosticsReport) -> String {
    let mut out = String::from("M,delta\n");
    let series = &report.adapt_tail;
    for (j, &m) in series.m_grid.iter().enumerate() {
        out.push_str(&format!("{m},{}\n", float_cell(series.delta[j])));
    }
    out
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// One-off frozen-time query backing the `meps` subcommand.
pub fn frozen_time_query(
    scenario_id: &str,
    x: usize,
    theta: f64,
    eps: f64,
    cap: u64,
) -> Result<ConvergenceTime, RunError> {
    let scenario = build_scenario(scenario_id, &Default::default())?;
    Ok(convergence_time(&scenario.family, x, theta, eps, cap)?)
}

/// One-off adaptive-time query backing the `adaptime` subcommand; restarts
/// the scenario's policy at the visited pair `(x, theta)`.
pub fn adaptive_time_query(
    scenario_id: &str,
    x: usize,
    theta: f64,
    eps: f64,
    cap: u64,
    estimate: Option<(u32, u64)>,
) -> Result<ConvergenceTime, RunError> {
    let scenario = build_scenario(scenario_id, &Default::default())?;
    let mode = match estimate {
        Some((replicates, seed)) => TimeMode::Estimate { replicates, seed },
        None => TimeMode::Exact,
    };
    Ok(adaptive_convergence_time(
        x,
        theta,
        &scenario.policy,
        &scenario.family,
        eps,
        cap,
        mode,
    )?)
}

/// Sanity estimator used by tests: Monte Carlo marginal for a scenario.
pub fn scenario_marginal_estimate(
    scenario_id: &str,
    n: u64,
    replicates: u32,
    seed: u64,
) -> Result<adaptlab_core::markov::ProbVector, RunError> {
    let s = build_scenario(scenario_id, &Default::default())?;
    Ok(marginal_estimate(
        s.x0, s.theta0, &s.policy, &s.family, n, replicates, seed,
    )?)
}
