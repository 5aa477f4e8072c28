//! Depth-first branch-and-bound over site activation.
//!
//! Sites are decided in index order, include before exclude, so among sets of
//! equal cost the lexicographically smallest is met first and kept. Each
//! newly grown set is tested with the assignment search; a feasible set is a
//! leaf since adding sites only raises cost.

use super::assign::{find_assignment, refine_assignment, NeedTable};
use super::{
    uncoverable_subarea, InfeasibilityWitness, PlacementError, PlacementProblem,
    PlacementSolution, SolveStatus, SolverOptions, COST_TIE_REL_TOL,
};
use crate::scalar::{lit, Scalar};

struct Incumbent<T> {
    cost: T,
    sites: Vec<usize>,
    assignment: Vec<usize>,
}

struct BranchAndBound<'a, T> {
    problem: &'a PlacementProblem<T>,
    table: NeedTable<T>,
    /// Site indices sorted by budget, largest first.
    by_budget: Vec<usize>,
    /// Site indices sorted by cost, cheapest first.
    by_cost: Vec<usize>,
    options: SolverOptions,
    best: Option<Incumbent<T>>,
    nodes: u64,
}

impl<'a, T: Scalar> BranchAndBound<'a, T> {
    fn new(problem: &'a PlacementProblem<T>, options: SolverOptions) -> Self {
        let table = NeedTable::new(problem);
        let n = problem.n_sites();
        let mut by_budget: Vec<usize> = (0..n).collect();
        by_budget.sort_by(|&a, &b| table.budget[b].partial_cmp(&table.budget[a]).unwrap().then(a.cmp(&b)));
        let mut by_cost: Vec<usize> = (0..n).collect();
        by_cost.sort_by(|&a, &b| {
            let (ca, cb) = (problem.sites[a].activation_cost, problem.sites[b].activation_cost);
            ca.partial_cmp(&cb).unwrap().then(a.cmp(&b))
        });
        Self { problem, table, by_budget, by_cost, options, best: None, nodes: 0 }
    }

    fn cost_of(&self, u: usize) -> T {
        self.problem.sites[u].activation_cost
    }

    /// Lower bound on the extra cost any completion of `included` (with sites
    /// `next..` still undecided) must pay, or `None` if no completion works.
    fn completion_bound(&self, next: usize, included: &[usize]) -> Option<T> {
        let n_a = self.problem.n_subareas();
        let mut cover = T::zero();
        let mut total_need = T::zero();
        for a in 0..n_a {
            let from_included =
                included.iter().filter_map(|&u| self.table.need[u][a]).fold(T::infinity(), T::min);
            let mut from_rest = T::infinity();
            let mut cheapest_rest = T::infinity();
            for u in next..self.problem.n_sites() {
                if let Some(r) = self.table.need[u][a] {
                    from_rest = from_rest.min(r);
                    cheapest_rest = cheapest_rest.min(self.cost_of(u));
                }
            }
            let best_need = from_included.min(from_rest);
            if !best_need.is_finite() {
                return None;
            }
            total_need = total_need + best_need;
            if !from_included.is_finite() {
                cover = cover.max(cheapest_rest);
            }
        }
        let open: T = included.iter().fold(T::zero(), |acc, &u| acc + self.table.budget[u]);
        let deficit = total_need - open;
        if deficit <= T::zero() {
            return Some(cover);
        }
        // Fewest extra sites whose budgets could cover the deficit, priced at
        // the cheapest undecided sites.
        let mut k = 0usize;
        let mut room = T::zero();
        for &u in self.by_budget.iter().filter(|&&u| u >= next) {
            if room >= deficit {
                break;
            }
            room = room + self.table.budget[u];
            k += 1;
        }
        if room < deficit {
            return None;
        }
        let count_bound = self
            .by_cost
            .iter()
            .filter(|&&u| u >= next)
            .take(k)
            .fold(T::zero(), |acc, &u| acc + self.cost_of(u));
        // Fractional knapsack: buy channel capacity at the best cost per channel.
        let mut ratio: Vec<usize> = (next..self.problem.n_sites()).collect();
        ratio.sort_by(|&a, &b| {
            let ra = self.cost_of(a) / self.table.budget[a];
            let rb = self.cost_of(b) / self.table.budget[b];
            ra.partial_cmp(&rb).unwrap().then(a.cmp(&b))
        });
        let mut left = deficit;
        let mut fractional = T::zero();
        for u in ratio {
            let take = left.min(self.table.budget[u]);
            fractional = fractional + self.cost_of(u) * take / self.table.budget[u];
            left = left - take;
            if left <= T::zero() {
                break;
            }
        }
        Some(cover.max(count_bound).max(fractional))
    }

    fn can_improve(&self, bound: T) -> bool {
        match &self.best {
            None => true,
            Some(b) => bound < b.cost - lit::<T>(COST_TIE_REL_TOL) * b.cost.abs(),
        }
    }

    fn search(
        &mut self,
        next: usize,
        included: &mut Vec<usize>,
        cost: T,
        grown: bool,
    ) -> Result<(), PlacementError> {
        self.nodes += 1;
        let Some(extra) = self.completion_bound(next, included) else {
            return Ok(());
        };
        if !self.can_improve(cost + extra) {
            return Ok(());
        }
        if grown && extra == T::zero() {
            if let Some(assignment) =
                find_assignment(&self.table, included, self.options.feasibility_node_limit)?
            {
                self.best = Some(Incumbent { cost, sites: included.clone(), assignment });
                return Ok(());
            }
        }
        if next == self.problem.n_sites() {
            return Ok(());
        }
        included.push(next);
        self.search(next + 1, included, cost + self.cost_of(next), true)?;
        included.pop();
        self.search(next + 1, included, cost, false)
    }
}

/// Cost-optimal placement. Among optimal site sets the lexicographically
/// smallest (by site index) is returned, with the assignment over it that
/// uses the fewest channel-equivalents the refinement budget can find.
pub fn solve_exact<T: Scalar>(
    problem: &PlacementProblem<T>,
    options: &SolverOptions,
) -> Result<PlacementSolution<T>, PlacementError> {
    problem.check_well_formed()?;
    if problem.n_subareas() == 0 {
        return Ok(PlacementSolution::from_assignment(problem, &[], SolveStatus::Optimal));
    }
    if let Some(a) = uncoverable_subarea(problem) {
        return Ok(PlacementSolution::infeasible(problem, InfeasibilityWitness::Uncoverable { subarea: a }));
    }
    let mut bb = BranchAndBound::new(problem, *options);
    bb.search(0, &mut Vec::new(), T::zero(), false)?;
    log::debug!("branch-and-bound visited {} nodes", bb.nodes);
    let Some(best) = bb.best else {
        return Ok(PlacementSolution::infeasible(problem, InfeasibilityWitness::InsufficientCapacity));
    };
    let assignment =
        refine_assignment(&bb.table, &best.sites, best.assignment, options.refinement_node_limit);
    Ok(PlacementSolution::from_assignment(problem, &assignment, SolveStatus::Optimal))
}
