//! Minimum-cost FAP activation with single-FAP assignment and channel-share
//! sizing, built from a scenario and solved exactly.
//!
//! Each subarea `a` served by site `u` consumes `r = demand_a / c_{u,a}`
//! channel-equivalents (continuous), site budgets cap the sum of `r`, and
//! the objective is the total activation cost of sites serving anything.

mod assign;
mod exact;
mod exhaustive;

pub use exact::solve_exact;
pub use exhaustive::{solve_exhaustive, EXHAUSTIVE_MAX_SITES};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::queueing::{required_capacity, QueueError};
use crate::radio::{distance, snr, CapacityModelSet, RadioError};
use crate::scalar::{from_usize, le_rel, lit, to_f64, Scalar};
use crate::scenario::Scenario;

/// Relative slack accepted on channel budgets and demand satisfaction.
pub const FEASIBILITY_REL_TOL: f64 = 1e-9;
/// Relative tolerance under which two objective values count as tied.
pub const COST_TIE_REL_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum PlacementError {
    #[error("subareas {0:?} have zero capacity from every candidate site")]
    CoverageInfeasible(Vec<usize>),
    #[error("malformed problem: {0}")]
    Malformed(String),
    #[error("exhaustive search limited to {max} sites, problem has {sites}")]
    TooLarge { sites: usize, max: usize },
    #[error("assignment search exceeded {0} nodes")]
    SearchLimit(u64),
    #[error(transparent)]
    Radio(#[from] RadioError),
    #[error(transparent)]
    Queue(#[from] QueueError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PlacementSite<T = f64> {
    pub id: usize,
    pub position: [T; 3],
    pub activation_cost: T,
    /// Base channels available (R_u).
    pub channel_budget: u32,
}

/// A placement instance. `link_capacity[u][a]` is the bit/s one base channel
/// of site `u` delivers to subarea `a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PlacementProblem<T = f64> {
    pub sites: Vec<PlacementSite<T>>,
    pub subarea_ids: Vec<usize>,
    /// bit/s, delay requirement already folded in.
    pub demands: Vec<T>,
    pub link_capacity: Vec<Vec<T>>,
    /// Hz of one base channel.
    pub channel_bandwidth: T,
}

impl<T: Scalar> PlacementProblem<T> {
    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn n_subareas(&self) -> usize {
        self.demands.len()
    }

    pub fn check_well_formed(&self) -> Result<(), PlacementError> {
        let bad = |m: String| Err(PlacementError::Malformed(m));
        if self.subarea_ids.len() != self.demands.len() {
            return bad("subarea_ids and demands differ in length".into());
        }
        if self.link_capacity.len() != self.sites.len() {
            return bad(format!(
                "link_capacity has {} rows for {} sites",
                self.link_capacity.len(),
                self.sites.len()
            ));
        }
        for (u, row) in self.link_capacity.iter().enumerate() {
            if row.len() != self.demands.len() {
                return bad(format!("link_capacity row {u} has {} columns", row.len()));
            }
            if row.iter().any(|c| !(*c >= T::zero()) || !c.is_finite()) {
                return bad(format!("link_capacity row {u} has a negative or non-finite entry"));
            }
        }
        if let Some(a) = self.demands.iter().position(|d| !(*d > T::zero()) || !d.is_finite()) {
            return bad(format!("demand of subarea index {a} must be positive"));
        }
        if let Some(s) = self.sites.iter().find(|s| !(s.activation_cost > T::zero())) {
            return bad(format!("site {} has non-positive activation cost", s.id));
        }
        Ok(())
    }

    /// Channel-equivalents site `u` must give subarea `a`, or `None` when the
    /// site cannot serve it within its budget.
    pub fn channels_needed(&self, u: usize, a: usize) -> Option<T> {
        let c = self.link_capacity[u][a];
        if !(c > T::zero()) {
            return None;
        }
        let r = self.demands[a] / c;
        let budget: T = lit(f64::from(self.sites[u].channel_budget));
        le_rel(r, budget, lit(FEASIBILITY_REL_TOL)).then_some(r)
    }

    pub fn cast<U: Scalar>(&self) -> PlacementProblem<U> {
        let c = |x: T| lit::<U>(to_f64(x));
        PlacementProblem {
            sites: self
                .sites
                .iter()
                .map(|s| PlacementSite {
                    id: s.id,
                    position: s.position.map(c),
                    activation_cost: c(s.activation_cost),
                    channel_budget: s.channel_budget,
                })
                .collect(),
            subarea_ids: self.subarea_ids.clone(),
            demands: self.demands.iter().copied().map(c).collect(),
            link_capacity: self
                .link_capacity
                .iter()
                .map(|row| row.iter().copied().map(c).collect())
                .collect(),
            channel_bandwidth: c(self.channel_bandwidth),
        }
    }

    /// Objective of an activation vector.
    pub fn activation_cost(&self, active: &[bool]) -> T {
        self.sites
            .iter()
            .zip(active)
            .filter(|(_, on)| **on)
            .fold(T::zero(), |acc, (s, _)| acc + s.activation_cost)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    /// Produced by a heuristic placement; constraints may be violated.
    Heuristic,
}

/// Why no feasible placement exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum InfeasibilityWitness {
    /// No site can serve this subarea (index into the problem) on its own.
    Uncoverable { subarea: usize },
    /// Every subarea is individually servable but budgets cannot hold them all.
    InsufficientCapacity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PlacementSolution<T = f64> {
    pub active: Vec<bool>,
    /// Site index per subarea.
    pub assignment: Vec<Option<usize>>,
    /// `[site][subarea]` channel-equivalents.
    pub channel_equiv: Vec<Vec<T>>,
    pub objective: T,
    pub status: SolveStatus,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub witness: Option<InfeasibilityWitness>,
}

impl<T: Scalar> PlacementSolution<T> {
    pub fn is_feasible(&self) -> bool {
        self.status != SolveStatus::Infeasible
    }

    pub(crate) fn infeasible(problem: &PlacementProblem<T>, witness: InfeasibilityWitness) -> Self {
        Self {
            active: vec![false; problem.n_sites()],
            assignment: vec![None; problem.n_subareas()],
            channel_equiv: vec![vec![T::zero(); problem.n_subareas()]; problem.n_sites()],
            objective: T::zero(),
            status: SolveStatus::Infeasible,
            witness: Some(witness),
        }
    }

    /// Builds a solution from a complete assignment using the minimal shares.
    pub(crate) fn from_assignment(
        problem: &PlacementProblem<T>,
        assignment: &[usize],
        status: SolveStatus,
    ) -> Self {
        let mut channel_equiv = vec![vec![T::zero(); problem.n_subareas()]; problem.n_sites()];
        let mut active = vec![false; problem.n_sites()];
        for (a, &u) in assignment.iter().enumerate() {
            channel_equiv[u][a] = problem.demands[a] / problem.link_capacity[u][a];
            active[u] = true;
        }
        Self {
            objective: problem.activation_cost(&active),
            active,
            assignment: assignment.iter().map(|&u| Some(u)).collect(),
            channel_equiv,
            status,
            witness: None,
        }
    }

    /// Active site indices in increasing order.
    pub fn active_sites(&self) -> Vec<usize> {
        self.active.iter().enumerate().filter(|(_, on)| **on).map(|(u, _)| u).collect()
    }
}

/// First subarea no site can serve alone, if any.
pub(crate) fn uncoverable_subarea<T: Scalar>(problem: &PlacementProblem<T>) -> Option<usize> {
    (0..problem.n_subareas())
        .find(|&a| (0..problem.n_sites()).all(|u| problem.channels_needed(u, a).is_none()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolverOptions {
    /// Node budget for one unsplittable-assignment feasibility search.
    pub feasibility_node_limit: u64,
    /// Node budget when refining the assignment of the optimal site set.
    pub refinement_node_limit: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { feasibility_node_limit: 5_000_000, refinement_node_limit: 200_000 }
    }
}

/// Builds the instance for `scenario`: capacities from the SNR of each
/// site/subarea pair under the subarea's slice BER, demands from the slice
/// SLA.
pub fn build_problem(
    scenario: &Scenario,
    models: &CapacityModelSet<f64>,
) -> Result<PlacementProblem<f64>, PlacementError> {
    let mut demands = Vec::with_capacity(scenario.subareas.len());
    let mut bers = Vec::with_capacity(scenario.subareas.len());
    for a in &scenario.subareas {
        let slice = scenario.slice_of(a).ok_or_else(|| {
            PlacementError::Malformed(format!("subarea {} references unknown slice {}", a.id, a.slice_id))
        })?;
        demands.push(required_capacity(
            slice.throughput_demand,
            slice.max_mean_delay,
            scenario.traffic.packet_size_bits,
            scenario.traffic.delay_model,
        )?);
        bers.push(slice.target_ber);
    }
    let mut link_capacity = Vec::with_capacity(scenario.sites.len());
    for site in &scenario.sites {
        let mut row = Vec::with_capacity(scenario.subareas.len());
        for (a, &ber) in scenario.subareas.iter().zip(&bers) {
            let s = snr(&scenario.radio, distance(site.position, a.center))?;
            row.push(models.for_ber(ber)?.capacity(s));
        }
        link_capacity.push(row);
    }
    let uncovered: Vec<usize> = scenario
        .subareas
        .iter()
        .enumerate()
        .filter(|(a, _)| link_capacity.iter().all(|row| row[*a] <= 0.0))
        .map(|(_, s)| s.id)
        .collect();
    if !uncovered.is_empty() {
        return Err(PlacementError::CoverageInfeasible(uncovered));
    }
    Ok(PlacementProblem {
        sites: scenario
            .sites
            .iter()
            .map(|s| PlacementSite {
                id: s.id,
                position: s.position,
                activation_cost: s.activation_cost,
                channel_budget: s.channel_budget,
            })
            .collect(),
        subarea_ids: scenario.subareas.iter().map(|a| a.id).collect(),
        demands,
        link_capacity,
        channel_bandwidth: scenario.radio.channel_bandwidth,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SolutionMetrics<T = f64> {
    pub n_uavs: usize,
    pub total_channel_equiv: T,
    pub objective: T,
}

pub fn solution_metrics<T: Scalar>(
    solution: &PlacementSolution<T>,
    problem: &PlacementProblem<T>,
) -> SolutionMetrics<T> {
    let total = solution
        .channel_equiv
        .iter()
        .flat_map(|row| row.iter().copied())
        .fold(T::zero(), |acc, r| acc + r);
    SolutionMetrics {
        n_uavs: solution.active.iter().filter(|on| **on).count(),
        total_channel_equiv: total,
        objective: problem.activation_cost(&solution.active),
    }
}

/// Checks a solution against the budget, single-server, capacity and
/// indicator constraints. Returns one message per violation. Integer or
/// fractional channel counts are both accepted.
pub fn check_solution<T: Scalar>(
    problem: &PlacementProblem<T>,
    solution: &PlacementSolution<T>,
) -> Vec<String> {
    let mut out = Vec::new();
    let (n_u, n_a) = (problem.n_sites(), problem.n_subareas());
    if solution.active.len() != n_u
        || solution.assignment.len() != n_a
        || solution.channel_equiv.len() != n_u
        || solution.channel_equiv.iter().any(|r| r.len() != n_a)
    {
        out.push("solution dimensions do not match the problem".into());
        return out;
    }
    let tol: T = lit(FEASIBILITY_REL_TOL);
    for u in 0..n_u {
        let used: T = solution.channel_equiv[u].iter().copied().sum();
        let budget: T = from_usize(problem.sites[u].channel_budget as usize);
        if !le_rel(used, budget, tol) {
            out.push(format!("site {}: {} channels exceed budget {}", problem.sites[u].id, used, budget));
        }
        if solution.channel_equiv[u].iter().any(|r| *r < T::zero()) {
            out.push(format!("site {}: negative channel share", problem.sites[u].id));
        }
        if solution.active[u] != (used > T::zero()) {
            out.push(format!("site {}: activation flag disagrees with its shares", problem.sites[u].id));
        }
    }
    for a in 0..n_a {
        let serving: Vec<usize> =
            (0..n_u).filter(|&u| solution.channel_equiv[u][a] > T::zero()).collect();
        let id = problem.subarea_ids[a];
        match (solution.assignment[a], serving.as_slice()) {
            (Some(u), [v]) if u == *v => {
                let got = problem.link_capacity[u][a] * solution.channel_equiv[u][a];
                if !le_rel(problem.demands[a], got, tol) {
                    out.push(format!("subarea {id}: capacity {got} below demand {}", problem.demands[a]));
                }
            }
            (None, _) => out.push(format!("subarea {id}: not assigned")),
            (_, []) => out.push(format!("subarea {id}: assigned site gives no channels")),
            (_, s) if s.len() > 1 => out.push(format!("subarea {id}: served by {} sites", s.len())),
            _ => out.push(format!("subarea {id}: channels granted by a site it is not assigned to")),
        }
    }
    let expected = problem.activation_cost(&solution.active);
    if (expected - solution.objective).abs() > tol * expected.abs().max(T::one()) {
        out.push(format!("objective {} differs from activation cost {}", solution.objective, expected));
    }
    out
}
