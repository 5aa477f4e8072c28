//! SLA verification for a deployment, a per-subarea packet simulator and the
//! distribution and comparison summaries built from them.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::baselines::{Deployment, Method};
use crate::channel_plan::{delivered_capacity, verify_plan, PlanViolation};
use crate::queueing::{mean_delay, QueueError};
use crate::scenario::Scenario;

/// Relative slack on SLA comparisons.
pub const SLA_REL_TOL: f64 = 1e-9;
pub const DEFAULT_BUFFER_PACKETS: usize = 1000;

#[derive(Debug, Error)]
pub enum EvaluateError {
    #[error("no samples for metric {0}")]
    EmptySamples(String),
    #[error("metric {0} has a non-finite sample")]
    NonFiniteSample(String),
    #[error("comparison needs at least two reports, got {0}")]
    TooFewReports(usize),
    #[error("method {0} was evaluated on a different scenario set")]
    MismatchedScenarios(String),
    #[error("deployment covers {got} subareas, scenario has {expected}")]
    ScenarioMismatch { got: usize, expected: usize },
    #[error("invalid simulation settings: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Queue(#[from] QueueError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubareaReport {
    pub subarea_id: usize,
    pub slice_id: u32,
    /// Site index within the deployment's problem.
    pub fap: Option<usize>,
    /// bit/s
    pub achieved_capacity: f64,
    /// seconds; absent when the queue is unstable or unserved
    pub analytic_delay: Option<f64>,
    pub sla_ok: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub method: Method,
    pub scenario_seed: u64,
    pub snapshot_index: u64,
    pub subareas: Vec<SubareaReport>,
    pub n_uavs: usize,
    /// Hz
    pub total_bandwidth: f64,
    pub sla_violation_count: usize,
    pub plan_violations: Vec<PlanViolation>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub distributions: Option<Distributions>,
}

impl EvaluationReport {
    pub fn n_subareas(&self) -> usize {
        self.subareas.len()
    }

    fn scenario_key(&self) -> (u64, u64, usize) {
        (self.scenario_seed, self.snapshot_index, self.subareas.len())
    }
}

fn at_most(a: f64, b: f64) -> bool {
    a <= b + SLA_REL_TOL * b.abs().max(f64::MIN_POSITIVE)
}

/// Checks every subarea's throughput and mean-delay SLA at the capacity the
/// plan delivers.
pub fn analytic_evaluate(deployment: &Deployment, scenario: &Scenario) -> Result<EvaluationReport, EvaluateError> {
    let Deployment { problem, solution, plan, .. } = deployment;
    if problem.n_subareas() != scenario.subareas.len() {
        return Err(EvaluateError::ScenarioMismatch {
            got: problem.n_subareas(),
            expected: scenario.subareas.len(),
        });
    }
    let capacity = delivered_capacity(plan, solution, problem);
    let l = scenario.traffic.packet_size_bits;
    let mut subareas = Vec::with_capacity(capacity.len());
    for (a, sub) in scenario.subareas.iter().enumerate() {
        let slice = scenario
            .slice_of(sub)
            .ok_or_else(|| EvaluateError::InvalidConfig(format!("subarea {} has no slice", sub.id)))?;
        let fap = solution.assignment[a];
        let cap = capacity[a];
        let delay = if cap > 0.0 {
            mean_delay(scenario.traffic.delay_model, slice.throughput_demand / l, cap / l).ok()
        } else {
            None
        };
        let reason = if fap.is_none() || cap <= 0.0 {
            Some("uncovered")
        } else if !at_most(slice.throughput_demand, cap) {
            Some("throughput")
        } else if delay.is_none_or(|d| !at_most(d, slice.max_mean_delay)) {
            Some("delay")
        } else {
            None
        };
        subareas.push(SubareaReport {
            subarea_id: sub.id,
            slice_id: sub.slice_id,
            fap,
            achieved_capacity: cap,
            analytic_delay: delay,
            sla_ok: reason.is_none(),
            reason: reason.map(str::to_owned),
        });
    }
    Ok(EvaluationReport {
        method: deployment.method,
        scenario_seed: scenario.rng_seed,
        snapshot_index: scenario.snapshot_index,
        sla_violation_count: subareas.iter().filter(|s| !s.sla_ok).count(),
        subareas,
        n_uavs: deployment.n_uavs(),
        total_bandwidth: plan.total_bandwidth_hz,
        plan_violations: verify_plan(plan, solution, problem),
        distributions: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionKind {
    Cdf,
    Ccdf,
}

/// Empirical distribution of one metric. `points` holds `(x, F(x))` at every
/// distinct sample value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub metric: String,
    pub kind: DistributionKind,
    pub samples: Vec<f64>,
    pub points: Vec<(f64, f64)>,
}

impl MetricSeries {
    /// `P(X <= x)` for a CDF, `P(X > x)` for a CCDF.
    pub fn value_at(&self, x: f64) -> f64 {
        let n = self.samples.len() as f64;
        let at_or_below = self.samples.partition_point(|&s| s <= x) as f64;
        match self.kind {
            DistributionKind::Cdf => at_or_below / n,
            DistributionKind::Ccdf => (n - at_or_below) / n,
        }
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,F\n");
        for (x, f) in &self.points {
            out.push_str(&format!("{x},{f}\n"));
        }
        out
    }
}

pub fn build_distribution(
    metric: &str,
    samples: &[f64],
    kind: DistributionKind,
) -> Result<MetricSeries, EvaluateError> {
    if samples.is_empty() {
        return Err(EvaluateError::EmptySamples(metric.to_owned()));
    }
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(EvaluateError::NonFiniteSample(metric.to_owned()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut points = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let x = sorted[i];
        let mut j = i;
        while j < sorted.len() && sorted[j] == x {
            j += 1;
        }
        let f = match kind {
            DistributionKind::Cdf => j as f64 / n,
            DistributionKind::Ccdf => (sorted.len() - j) as f64 / n,
        };
        points.push((x, f));
        i = j;
    }
    Ok(MetricSeries { metric: metric.to_owned(), kind, samples: sorted, points })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distributions {
    /// bit/s, CCDF
    pub throughput: MetricSeries,
    /// CCDF
    pub pdr: MetricSeries,
    /// seconds, CDF
    pub delay: MetricSeries,
}

/// Counters for one second of simulated time.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SecondStats {
    pub generated: u64,
    /// Packets generated this second and delivered before the end.
    pub delivered_of_generated: u64,
    /// Sum of their delays, seconds.
    pub delay_sum: f64,
    /// Packets leaving the server this second.
    pub departures: u64,
}

/// Outcome of one queue over one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueTrace {
    pub generated: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub in_queue: u64,
    /// seconds, over delivered packets
    pub delay_sum: f64,
    pub per_second: Vec<SecondStats>,
}

impl QueueTrace {
    pub fn mean_delay(&self) -> Option<f64> {
        (self.delivered > 0).then(|| self.delay_sum / self.delivered as f64)
    }
}

/// FIFO queue with Poisson arrivals at `arrival_rate` and deterministic
/// service at `service_rate` (both packet/s), holding at most `buffer`
/// packets including the one in service. Runs for `duration` seconds.
pub fn simulate_queue(
    arrival_rate: f64,
    service_rate: f64,
    duration: f64,
    buffer: usize,
    rng: &mut ChaCha8Rng,
) -> QueueTrace {
    let seconds = duration.ceil().max(0.0) as usize;
    let mut per_second = vec![SecondStats::default(); seconds];
    let mut trace = QueueTrace { generated: 0, delivered: 0, dropped: 0, in_queue: 0, delay_sum: 0.0, per_second: vec![] };
    let exp = match Exp::new(arrival_rate) {
        Ok(e) if arrival_rate > 0.0 => e,
        _ => {
            trace.per_second = per_second;
            return trace;
        }
    };
    let service = (service_rate > 0.0).then(|| 1.0 / service_rate);
    // Departure times of accepted packets still in the system.
    let mut system: VecDeque<f64> = VecDeque::new();
    let mut last_departure = 0.0_f64;
    let mut t = 0.0;
    loop {
        t += exp.sample(rng);
        if t >= duration {
            break;
        }
        let sec = (t as usize).min(seconds.saturating_sub(1));
        trace.generated += 1;
        per_second[sec].generated += 1;
        while system.front().is_some_and(|&d| d <= t) {
            system.pop_front();
        }
        let Some(s) = service else {
            trace.dropped += 1;
            continue;
        };
        if system.len() >= buffer {
            trace.dropped += 1;
            continue;
        }
        let depart = t.max(last_departure) + s;
        last_departure = depart;
        system.push_back(depart);
        if depart <= duration {
            trace.delivered += 1;
            trace.delay_sum += depart - t;
            per_second[sec].delivered_of_generated += 1;
            per_second[sec].delay_sum += depart - t;
            let dsec = (depart as usize).min(seconds.saturating_sub(1));
            per_second[dsec].departures += 1;
        } else {
            trace.in_queue += 1;
        }
    }
    trace.per_second = per_second;
    trace
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    /// seconds
    pub duration: f64,
    pub runs: u32,
    pub seed: u64,
    pub buffer_packets: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self { duration: 60.0, runs: 5, seed: 0, buffer_packets: DEFAULT_BUFFER_PACKETS }
    }
}

/// Per-subarea totals of one run, for conservation checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationRun {
    pub run: u32,
    pub traces: Vec<QueueTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub distributions: Distributions,
    pub runs: Vec<SimulationRun>,
}

fn rng_for(seed: u64, run: u32, subarea: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((u64::from(run) << 32) | subarea as u64);
    rng
}

/// Simulates every subarea's queue at the capacity the plan delivers.
/// Samples are per subarea and second, averaged over runs.
pub fn simulate_packets(
    deployment: &Deployment,
    scenario: &Scenario,
    config: &SimulationConfig,
) -> Result<SimulationResult, EvaluateError> {
    if !(config.duration >= 1.0) || config.runs == 0 {
        return Err(EvaluateError::InvalidConfig(format!(
            "need duration >= 1 s and at least one run, got {} s x {}",
            config.duration, config.runs
        )));
    }
    let capacity = delivered_capacity(&deployment.plan, &deployment.solution, &deployment.problem);
    if capacity.len() != scenario.subareas.len() {
        return Err(EvaluateError::ScenarioMismatch { got: capacity.len(), expected: scenario.subareas.len() });
    }
    let l = scenario.traffic.packet_size_bits;
    let rates: Vec<f64> = scenario
        .subareas
        .iter()
        .map(|a| scenario.slice_of(a).map_or(0.0, |s| s.throughput_demand / l))
        .collect();
    let runs: Vec<SimulationRun> = (0..config.runs)
        .map(|run| SimulationRun {
            run,
            traces: (0..capacity.len())
                .map(|a| {
                    let mut rng = rng_for(config.seed, run, a);
                    simulate_queue(rates[a], capacity[a] / l, config.duration, config.buffer_packets, &mut rng)
                })
                .collect(),
        })
        .collect();
    let seconds = config.duration.ceil() as usize;
    let n_runs = f64::from(config.runs);
    let (mut thr, mut pdr, mut delay) = (Vec::new(), Vec::new(), Vec::new());
    for a in 0..capacity.len() {
        for s in 0..seconds {
            let stats: Vec<&SecondStats> = runs.iter().map(|r| &r.traces[a].per_second[s]).collect();
            thr.push(stats.iter().map(|x| x.departures as f64 * l).sum::<f64>() / n_runs);
            let with_traffic: Vec<&&SecondStats> = stats.iter().filter(|x| x.generated > 0).collect();
            if !with_traffic.is_empty() {
                let p: f64 = with_traffic
                    .iter()
                    .map(|x| x.delivered_of_generated as f64 / x.generated as f64)
                    .sum();
                pdr.push(p / with_traffic.len() as f64);
            }
            let delivered: Vec<&&SecondStats> = stats.iter().filter(|x| x.delivered_of_generated > 0).collect();
            if !delivered.is_empty() {
                let d: f64 = delivered.iter().map(|x| x.delay_sum / x.delivered_of_generated as f64).sum();
                delay.push(d / delivered.len() as f64);
            }
        }
    }
    if pdr.is_empty() {
        pdr.push(0.0);
    }
    let distributions = Distributions {
        throughput: build_distribution("throughput", &thr, DistributionKind::Ccdf)?,
        pdr: build_distribution("pdr", &pdr, DistributionKind::Ccdf)?,
        delay: build_distribution("delay", if delay.is_empty() { &[0.0] } else { &delay }, DistributionKind::Cdf)?,
    };
    Ok(SimulationResult { distributions, runs })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: Method,
    pub metric: String,
    pub n: usize,
    pub mean: f64,
    /// Half-width of the 95% Student-t interval.
    pub ci95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    pub fn row(&self, method: Method, metric: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.method == method && r.metric == metric)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,metric,n,mean,ci95_low,ci95_high\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.method.name(),
                r.metric,
                r.n,
                r.mean,
                r.mean - r.ci95,
                r.mean + r.ci95
            ));
        }
        out
    }
}

/// Mean and 95% half-width with `n - 1` degrees of freedom. Zero width for a
/// single value or identical values.
pub fn mean_ci95(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if var == 0.0 {
        return (mean, 0.0);
    }
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("positive dof").inverse_cdf(0.975);
    (mean, t * (var / n as f64).sqrt())
}

/// Per-method mean and 95% interval of UAV count, bandwidth and SLA
/// violations. Every method must cover the same scenarios.
pub fn compare(reports: &[EvaluationReport]) -> Result<ComparisonTable, EvaluateError> {
    if reports.len() < 2 {
        return Err(EvaluateError::TooFewReports(reports.len()));
    }
    let mut by_method: BTreeMap<Method, Vec<&EvaluationReport>> = BTreeMap::new();
    for r in reports {
        by_method.entry(r.method).or_default().push(r);
    }
    let keys = |rs: &[&EvaluationReport]| rs.iter().map(|r| r.scenario_key()).collect::<BTreeSet<_>>();
    let reference = keys(by_method.values().next().expect("non-empty"));
    for (m, rs) in &by_method {
        let k = keys(rs);
        if k != reference || k.len() != rs.len() {
            return Err(EvaluateError::MismatchedScenarios(m.name().to_owned()));
        }
    }
    Ok(summarize(reports))
}

/// Per-method mean and 95% interval of the deployment metrics, without the
/// cross-method checks of [`compare`].
pub fn summarize(reports: &[EvaluationReport]) -> ComparisonTable {
    let mut by_method: BTreeMap<Method, Vec<&EvaluationReport>> = BTreeMap::new();
    for r in reports {
        by_method.entry(r.method).or_default().push(r);
    }
    let mut rows = Vec::new();
    for (m, rs) in &by_method {
        let metrics: [(&str, fn(&EvaluationReport) -> f64); 3] = [
            ("n_uavs", |r| r.n_uavs as f64),
            ("total_bandwidth", |r| r.total_bandwidth),
            ("sla_violation_count", |r| r.sla_violation_count as f64),
        ];
        for (name, f) in metrics {
            let values: Vec<f64> = rs.iter().map(|r| f(r)).collect();
            let (mean, ci95) = mean_ci95(&values);
            rows.push(ComparisonRow { method: *m, metric: name.to_owned(), n: values.len(), mean, ci95 });
        }
    }
    ComparisonTable { rows }
}
