//! Reference placements and the deployment record every method produces.
//!
//! Both baselines put a single wide channel on each FAP and share its airtime
//! among the FAP's subareas in proportion to what each needs. Wide channels
//! keep the transmit power of one base channel, so their per-hertz SNR drops
//! with width.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel_plan::{
    plan_for_solution, Channel, ChannelDemand, ChannelPlan, ChannelPlanError, FapChannels,
};
use crate::placement::{
    build_problem, solve_exact, InfeasibilityWitness, PlacementError, PlacementProblem,
    PlacementSite, PlacementSolution, SolveStatus, SolverOptions,
};
use crate::queueing::{required_capacity, QueueError};
use crate::radio::{distance, snr_for_width, CapacityModelSet, RadioError};
use crate::scenario::{Scenario, DEFAULT_ACTIVATION_COST};

const GEOMETRIC_STREAM: u64 = 1;
const KMEANS_STREAM: u64 = 2;
pub const KMEANS_MAX_ITERATIONS: usize = 100;
/// Single-channel widths a baseline FAP may use, in base channels.
pub const WIDE_CHANNEL_STEPS: [u32; 4] = [1, 2, 4, 8];

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("slice {slice}: {k} clusters exceed its {points} subareas")]
    TooManyClusters { slice: u32, k: usize, points: usize },
    #[error("scenario has no candidate lattice altitudes")]
    NoAltitudes,
    #[error("placement infeasible: {0:?}")]
    Infeasible(Option<InfeasibilityWitness>),
    #[error("subarea {0} references an unknown slice")]
    UnknownSlice(usize),
    #[error(transparent)]
    Placement(#[from] PlacementError),
    #[error(transparent)]
    ChannelPlan(#[from] ChannelPlanError),
    #[error(transparent)]
    Radio(#[from] RadioError),
    #[error(transparent)]
    Queue(#[from] QueueError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Slicer,
    GeometricCenter,
    Kmeans,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Slicer, Method::GeometricCenter, Method::Kmeans];

    pub fn name(self) -> &'static str {
        match self {
            Method::Slicer => "slicer",
            Method::GeometricCenter => "geometric_center",
            Method::Kmeans => "kmeans",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method '{s}', expected slicer, geometric_center or kmeans"))
    }
}

/// FAP positions, assignment and channel plan produced by one method. The
/// problem's sites are the FAPs this method placed; its link capacities are
/// per base-channel equivalent at the width each FAP actually uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deployment {
    pub method: Method,
    pub problem: PlacementProblem<f64>,
    pub solution: PlacementSolution<f64>,
    pub plan: ChannelPlan<f64>,
    /// Clusters per slice id, k-means only.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub clusters_per_slice: BTreeMap<u32, usize>,
    pub rng_seed: u64,
}

pub type BaselineSolution = Deployment;

impl Deployment {
    pub fn n_uavs(&self) -> usize {
        self.solution.active.iter().filter(|x| **x).count()
    }

    /// FAP positions of active sites.
    pub fn fap_positions(&self) -> Vec<[f64; 3]> {
        self.solution.active_sites().into_iter().map(|u| self.problem.sites[u].position).collect()
    }
}

/// Exact placement plus packed channel plan.
pub fn slicer_deployment(
    scenario: &Scenario,
    models: &CapacityModelSet<f64>,
    options: &SolverOptions,
) -> Result<Deployment, BaselineError> {
    let problem = build_problem(scenario, models)?;
    let solution = solve_exact(&problem, options)?;
    if solution.status == SolveStatus::Infeasible {
        return Err(BaselineError::Infeasible(solution.witness));
    }
    let plan = plan_for_solution(&solution, &problem)?;
    Ok(Deployment {
        method: Method::Slicer,
        problem,
        solution,
        plan,
        clusters_per_slice: BTreeMap::new(),
        rng_seed: scenario.rng_seed,
    })
}

fn demands(scenario: &Scenario) -> Result<Vec<f64>, BaselineError> {
    scenario
        .subareas
        .iter()
        .map(|a| {
            let s = scenario.slice_of(a).ok_or(BaselineError::UnknownSlice(a.id))?;
            Ok(required_capacity(
                s.throughput_demand,
                s.max_mean_delay,
                scenario.traffic.packet_size_bits,
                scenario.traffic.delay_model,
            )?)
        })
        .collect()
}

/// A baseline FAP: position, width in base channels and the subarea indices
/// it serves.
struct Fap {
    position: [f64; 3],
    width: u32,
    members: Vec<usize>,
}

/// Per base-channel-equivalent capacity from `position` to every subarea when
/// transmitting on `width` base channels.
fn capacity_row(
    scenario: &Scenario,
    models: &CapacityModelSet<f64>,
    position: [f64; 3],
    width: u32,
) -> Result<Vec<f64>, BaselineError> {
    scenario
        .subareas
        .iter()
        .map(|a| {
            let ber = scenario.slice_of(a).ok_or(BaselineError::UnknownSlice(a.id))?.target_ber;
            let s = snr_for_width(&scenario.radio, distance(position, a.center), width)?;
            Ok(models.for_ber(ber)?.capacity(s))
        })
        .collect()
}

/// Builds the record for FAPs that each carry one shared wide channel.
fn wide_channel_deployment(
    method: Method,
    scenario: &Scenario,
    models: &CapacityModelSet<f64>,
    faps: Vec<Fap>,
    clusters_per_slice: BTreeMap<u32, usize>,
) -> Result<Deployment, BaselineError> {
    let demands = demands(scenario)?;
    let cost = scenario.sites.first().map_or(DEFAULT_ACTIVATION_COST, |s| s.activation_cost);
    let n_a = scenario.subareas.len();
    let mut link_capacity = Vec::with_capacity(faps.len());
    let mut assignment = vec![None; n_a];
    let mut channel_equiv = vec![vec![0.0; n_a]; faps.len()];
    let mut fap_channels = Vec::with_capacity(faps.len());
    for (u, fap) in faps.iter().enumerate() {
        let row = capacity_row(scenario, models, fap.position, fap.width)?;
        let width = f64::from(fap.width);
        // Airtime each member needs on the wide channel.
        let need: Vec<f64> = fap
            .members
            .iter()
            .map(|&a| if row[a] > 0.0 { demands[a] / (row[a] * width) } else { f64::INFINITY })
            .collect();
        let total: f64 = need.iter().filter(|n| n.is_finite()).sum();
        let scale = total.max(1.0);
        let mut members = Vec::with_capacity(fap.members.len());
        for (&a, &n) in fap.members.iter().zip(&need) {
            assignment[a] = Some(u);
            let share = if n.is_finite() { n / scale } else { 0.0 };
            channel_equiv[u][a] = share * width;
            if share > 0.0 {
                members.push(ChannelDemand { subarea_id: scenario.subareas[a].id, fraction: share });
            }
        }
        fap_channels.push(FapChannels {
            fap: u,
            channels: vec![Channel { bandwidth_hz: width * scenario.radio.channel_bandwidth, members }],
        });
        link_capacity.push(row);
    }
    let problem = PlacementProblem {
        sites: faps
            .iter()
            .enumerate()
            .map(|(u, f)| PlacementSite {
                id: u,
                position: f.position,
                activation_cost: cost,
                channel_budget: scenario.radio.max_channels_total,
            })
            .collect(),
        subarea_ids: scenario.subareas.iter().map(|a| a.id).collect(),
        demands,
        link_capacity,
        channel_bandwidth: scenario.radio.channel_bandwidth,
    };
    let active: Vec<bool> = faps.iter().map(|f| !f.members.is_empty()).collect();
    let solution = PlacementSolution {
        objective: problem.activation_cost(&active),
        active,
        assignment,
        channel_equiv,
        status: SolveStatus::Heuristic,
        witness: None,
    };
    Ok(Deployment {
        method,
        problem,
        solution,
        plan: ChannelPlan::from_faps(fap_channels),
        clusters_per_slice,
        rng_seed: scenario.rng_seed,
    })
}

fn draw_altitude(scenario: &Scenario, rng: &mut ChaCha8Rng) -> Result<f64, BaselineError> {
    if scenario.lattice_levels.is_empty() {
        return Err(BaselineError::NoAltitudes);
    }
    Ok(scenario.lattice_levels[rng.random_range(0..scenario.lattice_levels.len())])
}

fn slice_members(scenario: &Scenario) -> Vec<(u32, Vec<usize>)> {
    scenario
        .slices
        .iter()
        .map(|s| {
            let members =
                scenario.subareas.iter().enumerate().filter(|(_, a)| a.slice_id == s.id).map(|(i, _)| i).collect();
            (s.id, members)
        })
        .filter(|(_, m): &(u32, Vec<usize>)| !m.is_empty())
        .collect()
}

fn centroid(points: impl IntoIterator<Item = [f64; 3]>) -> [f64; 3] {
    let mut sum = [0.0; 3];
    let mut n = 0usize;
    for p in points {
        for k in 0..3 {
            sum[k] += p[k];
        }
        n += 1;
    }
    sum.map(|s| s / n as f64)
}

/// One FAP per slice at the centroid of its subareas, on the widest single
/// channel the radio allows. Slices without subareas get no FAP.
pub fn geometric_center_placement(
    scenario: &Scenario,
    models: &CapacityModelSet<f64>,
) -> Result<Deployment, BaselineError> {
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.rng_seed);
    rng.set_stream(GEOMETRIC_STREAM);
    let mut faps = Vec::new();
    for (_, members) in slice_members(scenario) {
        let c = centroid(members.iter().map(|&a| scenario.subareas[a].center));
        let z = draw_altitude(scenario, &mut rng)?;
        faps.push(Fap { position: [c[0], c[1], z], width: scenario.radio.max_channels_total.max(1), members });
    }
    wide_channel_deployment(Method::GeometricCenter, scenario, models, faps, BTreeMap::new())
}

fn squared_distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|k| (a[k] - b[k]).powi(2)).sum()
}

/// Index of the closest centroid, lowest index on ties.
fn nearest(p: [f64; 3], centroids: &[[f64; 3]]) -> usize {
    let mut best = 0;
    for (i, c) in centroids.iter().enumerate().skip(1) {
        if squared_distance(p, *c) < squared_distance(p, centroids[best]) {
            best = i;
        }
    }
    best
}

/// Cluster label of every point.
pub fn assign_points(points: &[[f64; 3]], centroids: &[[f64; 3]]) -> Vec<usize> {
    points.iter().map(|&p| nearest(p, centroids)).collect()
}

/// Sum of squared distances from each point to its nearest centroid.
pub fn wcss(points: &[[f64; 3]], centroids: &[[f64; 3]]) -> f64 {
    points.iter().map(|&p| squared_distance(p, centroids[nearest(p, centroids)])).sum()
}

/// One assign-and-average step. A centroid left without points moves onto
/// the point farthest from its own centroid.
pub fn lloyd_iteration(points: &[[f64; 3]], centroids: &[[f64; 3]]) -> Vec<[f64; 3]> {
    let labels = assign_points(points, centroids);
    let mut next: Vec<Option<[f64; 3]>> = (0..centroids.len())
        .map(|k| {
            let members: Vec<[f64; 3]> =
                points.iter().zip(&labels).filter(|(_, l)| **l == k).map(|(p, _)| *p).collect();
            (!members.is_empty()).then(|| centroid(members))
        })
        .collect();
    let mut taken = vec![false; points.len()];
    for k in 0..next.len() {
        if next[k].is_some() {
            continue;
        }
        let far = (0..points.len())
            .filter(|&i| !taken[i])
            .map(|i| (i, squared_distance(points[i], next[labels[i]].unwrap_or(centroids[labels[i]]))))
            .fold(None, |best: Option<(usize, f64)>, (i, d)| match best {
                Some((_, bd)) if bd >= d => best,
                _ => Some((i, d)),
            });
        if let Some((i, _)) = far {
            taken[i] = true;
            next[k] = Some(points[i]);
        }
    }
    next.into_iter().zip(centroids).map(|(n, c)| n.unwrap_or(*c)).collect()
}

/// Lloyd's algorithm from `k` distinct points drawn with `rng`, until labels
/// stop changing or [`KMEANS_MAX_ITERATIONS`].
pub fn kmeans(points: &[[f64; 3]], k: usize, rng: &mut ChaCha8Rng) -> (Vec<[f64; 3]>, Vec<usize>) {
    let mut centroids: Vec<[f64; 3]> =
        sample(rng, points.len(), k).into_iter().map(|i| points[i]).collect();
    let mut labels = assign_points(points, &centroids);
    for _ in 0..KMEANS_MAX_ITERATIONS {
        centroids = lloyd_iteration(points, &centroids);
        let next = assign_points(points, &centroids);
        if next == labels {
            break;
        }
        labels = next;
    }
    (centroids, labels)
}

/// Smallest allowed single-channel width holding `channels` base channels.
pub fn wide_channel_width(channels: f64, max_channels: u32) -> u32 {
    WIDE_CHANNEL_STEPS
        .into_iter()
        .filter(|&w| w <= max_channels)
        .find(|&w| f64::from(w) >= channels - 1e-9)
        .unwrap_or(max_channels.max(1))
}

/// Per-slice k-means, growing K until no cluster needs more than the radio's
/// channel cap according to the SLICER shares in `reference`.
pub fn kmeans_placement(
    scenario: &Scenario,
    models: &CapacityModelSet<f64>,
    reference: &Deployment,
) -> Result<Deployment, BaselineError> {
    let cap = f64::from(scenario.radio.max_channels_total);
    let shares: Vec<f64> = (0..scenario.subareas.len())
        .map(|a| {
            reference.solution.assignment[a].map_or(0.0, |u| reference.solution.channel_equiv[u][a])
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.rng_seed);
    rng.set_stream(KMEANS_STREAM);
    let mut faps = Vec::new();
    let mut clusters = BTreeMap::new();
    for (slice, members) in slice_members(scenario) {
        let points: Vec<[f64; 3]> = members.iter().map(|&a| scenario.subareas[a].center).collect();
        let mut k = 1;
        let (centroids, labels, loads) = loop {
            if k > points.len() {
                return Err(BaselineError::TooManyClusters { slice, k, points: points.len() });
            }
            let (centroids, labels) = kmeans(&points, k, &mut rng);
            let mut loads = vec![0.0; k];
            for (i, &l) in labels.iter().enumerate() {
                loads[l] += shares[members[i]];
            }
            if loads.iter().all(|&l| l <= cap + 1e-9) {
                break (centroids, labels, loads);
            }
            k += 1;
        };
        clusters.insert(slice, k);
        for (c, (centroid, load)) in centroids.iter().zip(loads).enumerate() {
            let cluster: Vec<usize> =
                labels.iter().enumerate().filter(|(_, l)| **l == c).map(|(i, _)| members[i]).collect();
            if cluster.is_empty() {
                continue;
            }
            let z = draw_altitude(scenario, &mut rng)?;
            faps.push(Fap {
                position: [centroid[0], centroid[1], z],
                width: wide_channel_width(load, scenario.radio.max_channels_total),
                members: cluster,
            });
        }
    }
    wide_channel_deployment(Method::Kmeans, scenario, models, faps, clusters)
}
