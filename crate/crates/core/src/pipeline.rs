//! End-to-end runs: scenario, placement per method, evaluation, comparison
//! and the deployment descriptor for the next reconfiguration.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{
    geometric_center_placement, kmeans_placement, slicer_deployment, BaselineError, Deployment,
    Method,
};
use crate::channel_plan::Channel;
use crate::evaluate::{
    analytic_evaluate, summarize, simulate_packets, EvaluateError, EvaluationReport, SimulationConfig,
};
use crate::placement::{build_problem, solve_exact, PlacementSolution, SolverOptions};
use crate::radio::{default_mcs_table, validate_mcs_table, CapacityModelSet, McsEntry, RadioError};
use crate::scenario::{validate, GenerationParams, Scenario, ScenarioError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("no methods requested")]
    NoMethods,
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("placement infeasible, see {0}")]
    Infeasible(PathBuf),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Radio(#[from] RadioError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Evaluate(#[from] EvaluateError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioSource {
    File(PathBuf),
    Generate(GenerationParams),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub source: ScenarioSource,
    pub methods: Vec<Method>,
    /// Packet simulation settings; `None` for analytic reports only.
    pub simulation: Option<SimulationConfig>,
    pub out_dir: PathBuf,
    /// Replacement MCS table; the bundled one otherwise.
    pub mcs_table: Option<PathBuf>,
    pub solver: SolverOptions,
}

impl PipelineConfig {
    pub fn new(source: ScenarioSource, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            source,
            methods: Method::ALL.to_vec(),
            simulation: None,
            out_dir: out_dir.into(),
            mcs_table: None,
            solver: SolverOptions::default(),
        }
    }
}

/// FAP positions and channels to configure for one snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeploymentDescriptor {
    pub method: Method,
    pub snapshot_index: u64,
    pub faps: Vec<FapDescriptor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FapDescriptor {
    pub site_id: usize,
    pub position: [f64; 3],
    pub subarea_ids: Vec<usize>,
    pub channels: Vec<Channel<f64>>,
}

impl DeploymentDescriptor {
    pub fn from_deployment(d: &Deployment, snapshot_index: u64) -> Self {
        let faps = d
            .solution
            .active_sites()
            .into_iter()
            .map(|u| {
                let site = &d.problem.sites[u];
                FapDescriptor {
                    site_id: site.id,
                    position: site.position,
                    subarea_ids: (0..d.problem.n_subareas())
                        .filter(|&a| d.solution.assignment[a] == Some(u))
                        .map(|a| d.problem.subarea_ids[a])
                        .collect(),
                    channels: d
                        .plan
                        .faps
                        .iter()
                        .find(|f| f.fap == site.id)
                        .map(|f| f.channels.clone())
                        .unwrap_or_default(),
                }
            })
            .collect();
        Self { method: d.method, snapshot_index, faps }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutcome {
    pub scenario: Scenario,
    pub reports: Vec<EvaluationReport>,
    /// Wall time of the exact placement, seconds. Zero when it was not run.
    pub solve_seconds: f64,
}

fn write(path: PathBuf, contents: impl AsRef<[u8]>) -> Result<(), PipelineError> {
    fs::write(&path, contents).map_err(|source| PipelineError::Io { path, source })
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write(dir.join(name), text)
}

pub fn load_scenario(source: &ScenarioSource) -> Result<Scenario, PipelineError> {
    let scenario = match source {
        ScenarioSource::File(p) => Scenario::load(p)?,
        ScenarioSource::Generate(params) => params.generate()?,
    };
    let violations = validate(&scenario);
    if !violations.is_empty() {
        let text: Vec<String> = violations.iter().map(ToString::to_string).collect();
        return Err(PipelineError::InvalidScenario(text.join("; ")));
    }
    Ok(scenario)
}

pub fn load_models(
    mcs_table: Option<&Path>,
    scenario: &Scenario,
) -> Result<CapacityModelSet<f64>, PipelineError> {
    let table: Vec<McsEntry<f64>> = match mcs_table {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|source| PipelineError::Io { path: p.to_owned(), source })?;
            serde_json::from_str(&text)?
        }
        None => default_mcs_table(),
    };
    validate_mcs_table(&table)?;
    Ok(CapacityModelSet::fit(&table, &scenario.bers())?)
}

/// Runs every requested method on one snapshot and writes its artifacts to
/// `config.out_dir`. Outputs are identical across runs with the same inputs.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineOutcome, PipelineError> {
    if config.methods.is_empty() {
        return Err(PipelineError::NoMethods);
    }
    let dir = &config.out_dir;
    fs::create_dir_all(dir).map_err(|source| PipelineError::Io { path: dir.clone(), source })?;
    let scenario = load_scenario(&config.source)?;
    write(dir.join("scenario.json"), scenario.to_json() + "\n")?;
    let models = load_models(config.mcs_table.as_deref(), &scenario)?;
    write_json(dir, "models.json", &models)?;

    let mut methods = config.methods.clone();
    methods.sort();
    methods.dedup();
    let mut slicer: Option<Deployment> = None;
    let mut solve_seconds = 0.0;
    if methods.contains(&Method::Slicer) || methods.contains(&Method::Kmeans) {
        let start = Instant::now();
        let result = slicer_deployment(&scenario, &models, &config.solver);
        solve_seconds = start.elapsed().as_secs_f64();
        log::info!(
            "exact placement for {} subareas took {:.3} s (reconfiguration period {} s)",
            scenario.subareas.len(),
            solve_seconds,
            scenario.reconfig_period
        );
        match result {
            Ok(d) => slicer = Some(d),
            Err(BaselineError::Infeasible(_)) => {
                let problem = build_problem(&scenario, &models).map_err(BaselineError::from)?;
                let solution: PlacementSolution<f64> =
                    solve_exact(&problem, &config.solver).map_err(BaselineError::from)?;
                let path = dir.join("solution.slicer.json");
                write_json(dir, "solution.slicer.json", &solution)?;
                return Err(PipelineError::Infeasible(path));
            }
            Err(e) => return Err(e.into()),
        }
    }

    let mut reports = Vec::with_capacity(methods.len());
    let mut deployments = Vec::with_capacity(methods.len());
    for &method in &methods {
        let d = match method {
            Method::Slicer => slicer.clone().expect("computed above"),
            Method::GeometricCenter => geometric_center_placement(&scenario, &models)?,
            Method::Kmeans => kmeans_placement(&scenario, &models, slicer.as_ref().expect("computed above"))?,
        };
        let name = method.name();
        let mut report = analytic_evaluate(&d, &scenario)?;
        if let Some(sim) = &config.simulation {
            let sim = SimulationConfig { seed: scenario.rng_seed, ..*sim };
            let result = simulate_packets(&d, &scenario, &sim)?;
            let dist = result.distributions;
            for series in [&dist.throughput, &dist.pdr, &dist.delay] {
                let kind = serde_json::to_value(series.kind)?;
                let kind = kind.as_str().unwrap_or("cdf");
                write(dir.join(format!("{}.{}.{}.csv", series.metric, kind, name)), series.to_csv())?;
            }
            report.distributions = Some(dist);
        }
        write_json(dir, &format!("solution.{name}.json"), &SolutionFile::from(&d))?;
        write_json(dir, &format!("plan.{name}.json"), &d.plan)?;
        write_json(dir, &format!("report.{name}.json"), &report)?;
        log::info!(
            "{name}: {} FAPs, {} MHz, {} SLA violations",
            report.n_uavs,
            report.total_bandwidth / 1e6,
            report.sla_violation_count
        );
        reports.push(report);
        deployments.push(d);
    }
    write(dir.join("comparison.csv"), summarize(&reports).to_csv())?;
    let primary = deployments.iter().find(|d| d.method == Method::Slicer).unwrap_or(&deployments[0]);
    write_json(dir, "deployment.json", &DeploymentDescriptor::from_deployment(primary, scenario.snapshot_index))?;
    Ok(PipelineOutcome { scenario, reports, solve_seconds })
}

/// Placement result as written to `solution.<method>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub method: Method,
    pub site_ids: Vec<usize>,
    pub positions: Vec<[f64; 3]>,
    pub subarea_ids: Vec<usize>,
    pub solution: PlacementSolution<f64>,
    #[serde(default, skip_serializing_if = "std::collections::BTreeMap::is_empty")]
    pub clusters_per_slice: std::collections::BTreeMap<u32, usize>,
}

impl From<&Deployment> for SolutionFile {
    fn from(d: &Deployment) -> Self {
        Self {
            method: d.method,
            site_ids: d.problem.sites.iter().map(|s| s.id).collect(),
            positions: d.problem.sites.iter().map(|s| s.position).collect(),
            subarea_ids: d.problem.subarea_ids.clone(),
            solution: d.solution.clone(),
            clusters_per_slice: d.clusters_per_slice.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotTiming {
    pub snapshot: u64,
    pub seed: u64,
    pub n_subareas: usize,
    pub solve_seconds: f64,
    pub reconfig_period: f64,
}

/// Solves `k_max` independent snapshots with seeds `seed ^ k`, each into
/// `snapshot_<k>/` under the output directory, and writes `sequence.csv`
/// with the solve time of each against the reconfiguration period.
pub fn run_snapshot_sequence(
    config: &PipelineConfig,
    k_max: u64,
    reconfig_period: Option<f64>,
) -> Result<Vec<SnapshotTiming>, PipelineError> {
    let base = match &config.source {
        ScenarioSource::File(p) => GenerationParams::from_scenario(&Scenario::load(p)?),
        ScenarioSource::Generate(params) => params.clone(),
    };
    let mut timings = Vec::new();
    let mut csv = String::from("snapshot,seed,n_subareas,solve_seconds,reconfig_period,within_period\n");
    for k in 0..k_max {
        let mut params = GenerationParams { seed: base.seed ^ k, snapshot_index: k, ..base.clone() };
        if let Some(dt) = reconfig_period {
            params.reconfig_period = dt;
        }
        let cfg = PipelineConfig {
            source: ScenarioSource::Generate(params),
            out_dir: config.out_dir.join(format!("snapshot_{k:03}")),
            ..config.clone()
        };
        let out = run_pipeline(&cfg)?;
        let t = SnapshotTiming {
            snapshot: k,
            seed: out.scenario.rng_seed,
            n_subareas: out.scenario.subareas.len(),
            solve_seconds: out.solve_seconds,
            reconfig_period: out.scenario.reconfig_period,
        };
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            t.snapshot,
            t.seed,
            t.n_subareas,
            t.solve_seconds,
            t.reconfig_period,
            t.solve_seconds < t.reconfig_period
        ));
        timings.push(t);
    }
    fs::create_dir_all(&config.out_dir).map_err(|source| PipelineError::Io { path: config.out_dir.clone(), source })?;
    write(config.out_dir.join("sequence.csv"), csv)?;
    Ok(timings)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(dir: &Path, users: usize) -> PipelineConfig {
        PipelineConfig::new(ScenarioSource::Generate(GenerationParams::with_users(users, 3)), dir)
    }

    #[test]
    fn writes_every_artifact() {
        let tmp = tempfile::tempdir().unwrap();
        let out = run_pipeline(&config(tmp.path(), 5)).unwrap();
        assert_eq!(out.reports.len(), 3);
        for name in ["scenario.json", "models.json", "comparison.csv", "deployment.json"] {
            assert!(tmp.path().join(name).is_file(), "{name}");
        }
        for m in Method::ALL {
            for kind in ["solution", "plan", "report"] {
                assert!(tmp.path().join(format!("{kind}.{}.json", m.name())).is_file());
            }
        }
        let csv = fs::read_to_string(tmp.path().join("comparison.csv")).unwrap();
        assert_eq!(csv.lines().count(), 1 + 9);
    }

    #[test]
    fn analytic_only_single_method() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = PipelineConfig { methods: vec![Method::Slicer], ..config(tmp.path(), 5) };
        let out = run_pipeline(&cfg).unwrap();
        assert_eq!(out.reports.len(), 1);
        assert!(out.reports[0].distributions.is_none());
        assert!(!tmp.path().join("report.kmeans.json").exists());
    }

    #[test]
    fn simulation_writes_distribution_csvs() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = PipelineConfig {
            methods: vec![Method::Slicer, Method::GeometricCenter],
            simulation: Some(SimulationConfig { duration: 3.0, runs: 2, ..Default::default() }),
            ..config(tmp.path(), 5)
        };
        let out = run_pipeline(&cfg).unwrap();
        assert!(out.reports.iter().all(|r| r.distributions.is_some()));
        for f in ["throughput.ccdf.slicer.csv", "pdr.ccdf.slicer.csv", "delay.cdf.geometric_center.csv"] {
            assert!(tmp.path().join(f).is_file(), "{f}");
        }
    }

    #[test]
    fn infeasible_scenario_reports_witness() {
        let tmp = tempfile::tempdir().unwrap();
        let mut params = GenerationParams::with_users(5, 3);
        params.channel_budget = 1;
        params.slices[0].throughput_demand = 200e6;
        let cfg = PipelineConfig::new(ScenarioSource::Generate(params), tmp.path());
        assert!(matches!(run_pipeline(&cfg), Err(PipelineError::Infeasible(_))));
        let text = fs::read_to_string(tmp.path().join("solution.slicer.json")).unwrap();
        assert!(text.contains("\"witness\""));
    }

    #[test]
    fn sequence_uses_xor_seeds() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = PipelineConfig { methods: vec![Method::Slicer], ..config(tmp.path(), 5) };
        let t = run_snapshot_sequence(&cfg, 3, Some(10.0)).unwrap();
        assert_eq!(t.iter().map(|x| x.seed).collect::<Vec<_>>(), vec![3, 2, 1]);
        for k in 0..3 {
            assert!(tmp.path().join(format!("snapshot_{k:03}/solution.slicer.json")).is_file());
        }
        let a = fs::read_to_string(tmp.path().join("snapshot_000/scenario.json")).unwrap();
        let b = fs::read_to_string(tmp.path().join("snapshot_001/scenario.json")).unwrap();
        assert_ne!(a, b);
        assert_eq!(fs::read_to_string(tmp.path().join("sequence.csv")).unwrap().lines().count(), 4);
    }
}
