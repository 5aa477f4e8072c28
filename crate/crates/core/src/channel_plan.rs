//! Packing per-subarea channel shares into whole channels on each FAP.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::placement::{PlacementProblem, PlacementSolution, FEASIBILITY_REL_TOL};
use crate::scalar::{from_usize, le_rel, lit, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelPlanError {
    #[error("FAP {fap} needs {needed} channels but has {max}")]
    CapacityExceeded { fap: usize, needed: usize, max: usize },
    #[error("invalid demand for subarea {subarea_id}: fraction {fraction}")]
    InvalidDemand { subarea_id: usize, fraction: f64 },
}

/// A share of one channel, `0 < fraction <= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ChannelDemand<T = f64> {
    pub subarea_id: usize,
    pub fraction: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Channel<T = f64> {
    pub bandwidth_hz: T,
    pub members: Vec<ChannelDemand<T>>,
}

impl<T: Scalar> Channel<T> {
    pub fn load(&self) -> T {
        self.members.iter().map(|m| m.fraction).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FapChannels<T = f64> {
    /// Site id of the FAP.
    pub fap: usize,
    pub channels: Vec<Channel<T>>,
}

impl<T: Scalar> FapChannels<T> {
    pub fn bandwidth_hz(&self) -> T {
        self.channels.iter().map(|c| c.bandwidth_hz).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ChannelPlan<T = f64> {
    pub faps: Vec<FapChannels<T>>,
    pub total_bandwidth_hz: T,
    pub channels_per_fap: Vec<usize>,
}

impl<T: Scalar> ChannelPlan<T> {
    pub fn from_faps(faps: Vec<FapChannels<T>>) -> Self {
        Self {
            total_bandwidth_hz: faps.iter().map(FapChannels::bandwidth_hz).sum(),
            channels_per_fap: faps.iter().map(|f| f.channels.len()).collect(),
            faps,
        }
    }

    pub fn channel_count(&self) -> usize {
        self.channels_per_fap.iter().sum()
    }

    /// Sum of every placed fraction.
    pub fn total_fraction(&self) -> T {
        self.faps.iter().flat_map(|f| &f.channels).map(Channel::load).sum()
    }
}

/// Splits a share of `channels` channel-equivalents into full channels plus
/// one remainder chunk.
pub fn split_demand<T: Scalar>(subarea_id: usize, channels: T) -> Vec<ChannelDemand<T>> {
    let mut out = Vec::new();
    if !(channels > T::zero()) {
        return out;
    }
    let full = channels.floor();
    let whole = full.to_usize().unwrap_or(0);
    out.extend((0..whole).map(|_| ChannelDemand { subarea_id, fraction: T::one() }));
    let rest = channels - full;
    if rest > T::zero() {
        out.push(ChannelDemand { subarea_id, fraction: rest });
    }
    out
}

fn check_demands<T: Scalar>(demands: &[ChannelDemand<T>]) -> Result<(), ChannelPlanError> {
    match demands.iter().find(|d| !(d.fraction > T::zero() && d.fraction <= T::one())) {
        Some(d) => Err(ChannelPlanError::InvalidDemand {
            subarea_id: d.subarea_id,
            fraction: d.fraction.to_f64().unwrap_or(f64::NAN),
        }),
        None => Ok(()),
    }
}

/// First-fit decreasing: largest fraction first, each into the first channel
/// with room, ties broken by subarea id.
pub fn pack_channels<T: Scalar>(
    fap: usize,
    demands: &[ChannelDemand<T>],
    max_channels: usize,
    bandwidth_hz: T,
) -> Result<FapChannels<T>, ChannelPlanError> {
    check_demands(demands)?;
    let mut sorted = demands.to_vec();
    sorted.sort_by(|a, b| {
        b.fraction.partial_cmp(&a.fraction).unwrap().then(a.subarea_id.cmp(&b.subarea_id))
    });
    let tol: T = lit(FEASIBILITY_REL_TOL);
    let mut channels: Vec<Channel<T>> = Vec::new();
    let mut loads: Vec<T> = Vec::new();
    for d in sorted {
        match loads.iter().position(|&l| l + d.fraction <= T::one() + tol) {
            Some(i) => {
                loads[i] = loads[i] + d.fraction;
                channels[i].members.push(d);
            }
            None => {
                loads.push(d.fraction);
                channels.push(Channel { bandwidth_hz, members: vec![d] });
            }
        }
    }
    if channels.len() > max_channels {
        return Err(ChannelPlanError::CapacityExceeded { fap, needed: channels.len(), max: max_channels });
    }
    Ok(FapChannels { fap, channels })
}

/// One channel per demand chunk.
pub fn naive_channels<T: Scalar>(fap: usize, demands: &[ChannelDemand<T>], bandwidth_hz: T) -> FapChannels<T> {
    FapChannels {
        fap,
        channels: demands.iter().map(|d| Channel { bandwidth_hz, members: vec![*d] }).collect(),
    }
}

fn demands_per_site<T: Scalar>(
    solution: &PlacementSolution<T>,
    problem: &PlacementProblem<T>,
) -> Vec<(usize, Vec<ChannelDemand<T>>)> {
    (0..problem.n_sites())
        .filter(|&u| solution.active[u])
        .map(|u| {
            let chunks = (0..problem.n_subareas())
                .flat_map(|a| split_demand(problem.subarea_ids[a], solution.channel_equiv[u][a]))
                .collect();
            (u, chunks)
        })
        .collect()
}

/// Packs every active site's shares within its channel budget.
pub fn plan_for_solution<T: Scalar>(
    solution: &PlacementSolution<T>,
    problem: &PlacementProblem<T>,
) -> Result<ChannelPlan<T>, ChannelPlanError> {
    let faps = demands_per_site(solution, problem)
        .into_iter()
        .map(|(u, d)| {
            let site = &problem.sites[u];
            pack_channels(site.id, &d, site.channel_budget as usize, problem.channel_bandwidth)
        })
        .collect::<Result<_, _>>()?;
    Ok(ChannelPlan::from_faps(faps))
}

/// The unpacked reference: each chunk on its own channel.
pub fn naive_plan<T: Scalar>(solution: &PlacementSolution<T>, problem: &PlacementProblem<T>) -> ChannelPlan<T> {
    ChannelPlan::from_faps(
        demands_per_site(solution, problem)
            .into_iter()
            .map(|(u, d)| naive_channels(problem.sites[u].id, &d, problem.channel_bandwidth))
            .collect(),
    )
}

#[derive(Debug, Error, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PlanViolation {
    #[error("FAP {fap} channel {channel} is loaded to {load}")]
    ChannelOverfull { fap: usize, channel: usize, load: f64 },
    #[error("FAP {fap} uses {channels} base channels, budget {budget}")]
    BudgetExceeded { fap: usize, channels: f64, budget: u32 },
    #[error("plan lists FAP {fap} which is not a site of the problem")]
    UnknownFap { fap: usize },
    #[error("subarea {subarea_id} is not assigned to any FAP")]
    Unassigned { subarea_id: usize },
    #[error("subarea {subarea_id} holds channel share on FAP {fap} it is not assigned to")]
    Misplaced { subarea_id: usize, fap: usize },
    #[error("subarea {subarea_id} gets {capacity} bit/s, needs {demand}")]
    DemandShortfall { subarea_id: usize, capacity: f64, demand: f64 },
}

impl PlanViolation {
    /// Subarea the violation is about, if any.
    pub fn subarea_id(&self) -> Option<usize> {
        match self {
            PlanViolation::Unassigned { subarea_id }
            | PlanViolation::Misplaced { subarea_id, .. }
            | PlanViolation::DemandShortfall { subarea_id, .. } => Some(*subarea_id),
            _ => None,
        }
    }
}

/// Capacity (bit/s) the plan delivers to each subarea index of `problem`
/// from its assigned site: `c_{u,a} * (channel bandwidth / base) * fraction`
/// summed over that site's channels.
pub fn delivered_capacity<T: Scalar>(
    plan: &ChannelPlan<T>,
    solution: &PlacementSolution<T>,
    problem: &PlacementProblem<T>,
) -> Vec<T> {
    let site_index: HashMap<usize, usize> =
        problem.sites.iter().enumerate().map(|(u, s)| (s.id, u)).collect();
    let subarea_index: HashMap<usize, usize> =
        problem.subarea_ids.iter().enumerate().map(|(a, id)| (*id, a)).collect();
    let mut out = vec![T::zero(); problem.n_subareas()];
    for f in &plan.faps {
        let Some(&u) = site_index.get(&f.fap) else { continue };
        for ch in &f.channels {
            let width = ch.bandwidth_hz / problem.channel_bandwidth;
            for m in &ch.members {
                if let Some(&a) = subarea_index.get(&m.subarea_id) {
                    if solution.assignment[a] == Some(u) {
                        out[a] = out[a] + problem.link_capacity[u][a] * width * m.fraction;
                    }
                }
            }
        }
    }
    out
}

/// Re-derives what the plan delivers and checks channel loads, budgets,
/// placement and demand. An empty result means the plan is valid.
pub fn verify_plan<T: Scalar>(
    plan: &ChannelPlan<T>,
    solution: &PlacementSolution<T>,
    problem: &PlacementProblem<T>,
) -> Vec<PlanViolation> {
    let tol: T = lit(FEASIBILITY_REL_TOL);
    let f64_of = |x: T| x.to_f64().unwrap_or(f64::NAN);
    let site_index: HashMap<usize, usize> =
        problem.sites.iter().enumerate().map(|(u, s)| (s.id, u)).collect();
    let subarea_index: HashMap<usize, usize> =
        problem.subarea_ids.iter().enumerate().map(|(a, id)| (*id, a)).collect();
    let mut out = Vec::new();
    for f in &plan.faps {
        let Some(&u) = site_index.get(&f.fap) else {
            out.push(PlanViolation::UnknownFap { fap: f.fap });
            continue;
        };
        for (i, ch) in f.channels.iter().enumerate() {
            let load = ch.load();
            if !le_rel(load, T::one(), tol) {
                out.push(PlanViolation::ChannelOverfull { fap: f.fap, channel: i, load: f64_of(load) });
            }
            for m in &ch.members {
                let a = subarea_index.get(&m.subarea_id).copied();
                if a.is_none_or(|a| solution.assignment[a] != Some(u)) {
                    out.push(PlanViolation::Misplaced { subarea_id: m.subarea_id, fap: f.fap });
                }
            }
        }
        let base = f.bandwidth_hz() / problem.channel_bandwidth;
        let budget = problem.sites[u].channel_budget;
        if !le_rel(base, from_usize(budget as usize), tol) {
            out.push(PlanViolation::BudgetExceeded { fap: f.fap, channels: f64_of(base), budget });
        }
    }
    let delivered = delivered_capacity(plan, solution, problem);
    for a in 0..problem.n_subareas() {
        let subarea_id = problem.subarea_ids[a];
        if solution.assignment[a].is_none() {
            out.push(PlanViolation::Unassigned { subarea_id });
        } else if !le_rel(problem.demands[a], delivered[a], tol) {
            out.push(PlanViolation::DemandShortfall {
                subarea_id,
                capacity: f64_of(delivered[a]),
                demand: f64_of(problem.demands[a]),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::placement::{solve_exact, PlacementSite, SolverOptions};
    use proptest::prelude::*;

    fn demands(fracs: &[f64]) -> Vec<ChannelDemand<f64>> {
        fracs.iter().enumerate().map(|(i, &f)| ChannelDemand { subarea_id: i, fraction: f }).collect()
    }

    /// Fewest unit bins holding `items`, by trying every placement.
    fn optimal_bins(items: &[f64]) -> usize {
        fn place(items: &[f64], i: usize, bins: &mut Vec<f64>, k: usize) -> bool {
            if i == items.len() {
                return true;
            }
            for b in 0..bins.len() {
                if bins[b] + items[i] <= 1.0 + 1e-9 {
                    bins[b] += items[i];
                    if place(items, i + 1, bins, k) {
                        return true;
                    }
                    bins[b] -= items[i];
                }
                // Empty bins are interchangeable.
                if bins[b] == 0.0 {
                    break;
                }
            }
            false
        }
        (1..=items.len().max(1))
            .find(|&k| place(items, 0, &mut vec![0.0; k], k))
            .unwrap_or(0)
    }

    #[test]
    fn three_halves_need_two_channels() {
        let p = pack_channels(0, &demands(&[0.5, 0.5, 0.5]), 8, 20e6).unwrap();
        assert_eq!(p.channels.len(), 2);
    }

    #[test]
    fn complementary_pairs() {
        let p = pack_channels(0, &demands(&[0.6, 0.6, 0.4, 0.4]), 8, 20e6).unwrap();
        assert_eq!(p.channels.len(), 2);
        assert_eq!(optimal_bins(&[0.6, 0.6, 0.4, 0.4]), 2);
        for ch in &p.channels {
            assert!((ch.load() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn seven_chunks_pack_into_five() {
        let d = demands(&[0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3]);
        let packed = pack_channels(0, &d, 8, 20e6).unwrap();
        let naive = naive_channels(0, &d, 20e6);
        assert_eq!(naive.bandwidth_hz(), 140e6);
        assert_eq!(packed.channels.len(), 5);
        assert_eq!(packed.bandwidth_hz(), 100e6);
    }

    #[test]
    fn budget_overflow_names_the_fap() {
        let err = pack_channels(7, &demands(&[0.9, 0.9, 0.9]), 2, 20e6).unwrap_err();
        assert_eq!(err, ChannelPlanError::CapacityExceeded { fap: 7, needed: 3, max: 2 });
        assert!(pack_channels(0, &demands(&[1.2]), 8, 20e6).is_err());
        assert!(pack_channels(0, &demands(&[0.0]), 8, 20e6).is_err());
    }

    #[test]
    fn empty_demands_use_no_channels() {
        assert!(naive_channels::<f64>(0, &[], 20e6).channels.is_empty());
        assert!(pack_channels::<f64>(0, &[], 8, 20e6).unwrap().channels.is_empty());
    }

    #[test]
    fn splitting() {
        let s = split_demand(3, 2.25);
        assert_eq!(s.len(), 3);
        assert_eq!(s.iter().map(|d| d.fraction).sum::<f64>(), 2.25);
        assert_eq!(split_demand(3, 2.0).len(), 2);
        assert!(split_demand(3, 0.0).is_empty());
    }

    fn two_site_case(demands: Vec<f64>) -> (PlacementProblem<f64>, PlacementSolution<f64>) {
        let p = PlacementProblem {
            sites: (0..2)
                .map(|i| PlacementSite { id: 10 + i, position: [0.0, 0.0, 10.0], activation_cost: 1.0, channel_budget: 2 })
                .collect(),
            subarea_ids: vec![100, 101, 102],
            demands,
            link_capacity: vec![vec![60e6, 40e6, 40e6], vec![0.0; 3]],
            channel_bandwidth: 20e6,
        };
        let s = solve_exact(&p, &SolverOptions::default()).unwrap();
        (p, s)
    }

    #[test]
    fn plan_for_solution_verifies() {
        let (p, s) = two_site_case(vec![30e6, 12e6, 40e6]);
        let plan = plan_for_solution(&s, &p).unwrap();
        assert!(verify_plan(&plan, &s, &p).is_empty());
        // Chunks 1.0, 0.5, 0.3.
        assert_eq!(plan.channels_per_fap, vec![2]);
        assert_eq!(plan.total_bandwidth_hz, 40e6);
        assert_eq!(naive_plan(&s, &p).total_bandwidth_hz, 60e6);
        assert_eq!(plan.total_fraction(), 1.8);
    }

    #[test]
    fn verify_detects_tampering() {
        let (p, s) = two_site_case(vec![30e6, 12e6, 20e6]);
        let plan = plan_for_solution(&s, &p).unwrap();
        assert!(verify_plan(&plan, &s, &p).is_empty());

        let mut over = plan.clone();
        let room = 1.01 - over.faps[0].channels[0].load();
        over.faps[0].channels[0].members.push(ChannelDemand { subarea_id: 100, fraction: room });
        assert!(verify_plan(&over, &s, &p)
            .iter()
            .any(|v| matches!(v, PlanViolation::ChannelOverfull { .. })));

        let mut shaved = plan.clone();
        let m = shaved.faps[0]
            .channels
            .iter_mut()
            .flat_map(|c| c.members.iter_mut())
            .find(|m| m.subarea_id == 101)
            .unwrap();
        m.fraction *= 0.99;
        let v = verify_plan(&shaved, &s, &p);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].subarea_id(), Some(101));

        let mut wide = plan.clone();
        wide.faps[0].channels.extend(std::iter::repeat_n(Channel { bandwidth_hz: 20e6, members: vec![] }, 2));
        assert!(verify_plan(&wide, &s, &p).iter().any(|v| matches!(v, PlanViolation::BudgetExceeded { .. })));
    }

    #[test]
    fn wide_channels_scale_capacity() {
        let (p, s2) = two_site_case(vec![30e6, 12e6, 20e6]);
        // One 40 MHz channel shared in proportion to need.
        let total: f64 = s2.channel_equiv[0].iter().sum();
        let members = (0..3)
            .map(|a| ChannelDemand { subarea_id: p.subarea_ids[a], fraction: s2.channel_equiv[0][a] / 2.0 })
            .collect();
        let plan = ChannelPlan::from_faps(vec![FapChannels { fap: 10, channels: vec![Channel { bandwidth_hz: 40e6, members }] }]);
        assert!(total <= 2.0);
        assert!(verify_plan(&plan, &s2, &p).is_empty());
    }

    #[test]
    fn works_in_f32() {
        let d: Vec<ChannelDemand<f32>> =
            [0.5f32, 0.5, 0.5].iter().enumerate().map(|(i, &f)| ChannelDemand { subarea_id: i, fraction: f }).collect();
        assert_eq!(pack_channels(0, &d, 8, 20e6f32).unwrap().channels.len(), 2);
    }

    proptest! {
        #[test]
        fn ffd_close_to_optimal(fracs in prop::collection::vec(0.01f64..=1.0, 1..=10)) {
            let packed = pack_channels(0, &demands(&fracs), usize::MAX, 20e6).unwrap();
            let opt = optimal_bins(&fracs);
            prop_assert!(packed.channels.len() >= opt);
            prop_assert!(packed.channels.len() <= opt + 1);
        }

        #[test]
        fn packing_conserves_and_never_loses(fracs in prop::collection::vec(0.01f64..=1.0, 0..=30)) {
            let d = demands(&fracs);
            let packed = pack_channels(0, &d, usize::MAX, 20e6).unwrap();
            let naive = naive_channels(0, &d, 20e6);
            prop_assert!(packed.bandwidth_hz() <= naive.bandwidth_hz());
            let mut placed: Vec<ChannelDemand<f64>> = packed.channels.iter().flat_map(|c| c.members.clone()).collect();
            placed.sort_by_key(|m| m.subarea_id);
            prop_assert_eq!(placed, d);
            for ch in &packed.channels {
                prop_assert!(ch.load() <= 1.0 + 1e-9);
            }
        }
    }
}
