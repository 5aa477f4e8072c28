//! Reference solver: every activation set, each checked by plain backtracking.

use super::{
    InfeasibilityWitness, PlacementError, PlacementProblem, PlacementSolution, SolveStatus,
    COST_TIE_REL_TOL, FEASIBILITY_REL_TOL,
};
use crate::scalar::{from_usize, lit, Scalar};

pub const EXHAUSTIVE_MAX_SITES: usize = 12;

fn fits<T: Scalar>(problem: &PlacementProblem<T>, u: usize, a: usize, used: T) -> Option<T> {
    let c = problem.link_capacity[u][a];
    if c <= T::zero() {
        return None;
    }
    let r = problem.demands[a] / c;
    let budget: T = from_usize(problem.sites[u].channel_budget as usize);
    let slack = lit::<T>(FEASIBILITY_REL_TOL) * budget.max(T::one());
    (used + r <= budget + slack).then_some(r)
}

fn backtrack<T: Scalar>(
    problem: &PlacementProblem<T>,
    set: &[usize],
    a: usize,
    used: &mut [T],
    out: &mut Vec<usize>,
) -> bool {
    if a == problem.n_subareas() {
        return true;
    }
    for &u in set {
        if let Some(r) = fits(problem, u, a, used[u]) {
            let before = used[u];
            used[u] = before + r;
            out.push(u);
            if backtrack(problem, set, a + 1, used, out) {
                return true;
            }
            out.pop();
            used[u] = before;
        }
    }
    false
}

/// Optimal placement by enumerating all `2^n` activation sets. Refuses more
/// than [`EXHAUSTIVE_MAX_SITES`] sites.
pub fn solve_exhaustive<T: Scalar>(
    problem: &PlacementProblem<T>,
) -> Result<PlacementSolution<T>, PlacementError> {
    problem.check_well_formed()?;
    let n = problem.n_sites();
    if n > EXHAUSTIVE_MAX_SITES {
        return Err(PlacementError::TooLarge { sites: n, max: EXHAUSTIVE_MAX_SITES });
    }
    if problem.n_subareas() == 0 {
        return Ok(PlacementSolution::from_assignment(problem, &[], SolveStatus::Optimal));
    }
    let tol: T = lit(COST_TIE_REL_TOL);
    let mut best: Option<(T, Vec<usize>, Vec<usize>)> = None;
    for mask in 1u32..(1 << n) {
        let set: Vec<usize> = (0..n).filter(|u| mask & (1 << u) != 0).collect();
        let cost = set.iter().fold(T::zero(), |acc, &u| acc + problem.sites[u].activation_cost);
        if let Some((b, bset, _)) = &best {
            let margin = tol * b.abs();
            let tied = (cost - *b).abs() <= margin;
            if cost > *b + margin || (tied && set >= *bset) {
                continue;
            }
        }
        let mut used = vec![T::zero(); n];
        let mut assignment = Vec::with_capacity(problem.n_subareas());
        if backtrack(problem, &set, 0, &mut used, &mut assignment) {
            best = Some((cost, set, assignment));
        }
    }
    Ok(match best {
        Some((_, _, assignment)) => {
            PlacementSolution::from_assignment(problem, &assignment, SolveStatus::Optimal)
        }
        None => {
            let zero = vec![T::zero(); n];
            let witness = (0..problem.n_subareas())
                .find(|&a| (0..n).all(|u| fits(problem, u, a, zero[u]).is_none()))
                .map_or(InfeasibilityWitness::InsufficientCapacity, |subarea| {
                    InfeasibilityWitness::Uncoverable { subarea }
                });
            PlacementSolution::infeasible(problem, witness)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::placement::test_support::problem;

    #[test]
    fn refuses_large_instances() {
        let caps = vec![vec![10.0]; 13];
        let rows: Vec<&[f64]> = caps.iter().map(Vec::as_slice).collect();
        let p = problem(&[1.0; 13], &[1; 13], &rows, &[1.0]);
        assert!(matches!(solve_exhaustive(&p), Err(PlacementError::TooLarge { sites: 13, .. })));
    }

    #[test]
    fn zero_subareas_cost_nothing() {
        let p = problem(&[1.0, 2.0], &[1, 1], &[&[], &[]], &[]);
        let s = solve_exhaustive(&p).unwrap();
        assert_eq!(s.objective, 0.0);
        assert_eq!(s.active, vec![false, false]);
    }

    #[test]
    fn picks_lexicographically_smallest_tie() {
        let p = problem(&[1.0, 1.0, 1.0], &[1, 1, 1], &[&[0.0, 10.0], &[10.0, 10.0], &[10.0, 10.0]], &[6.0, 6.0]);
        let s = solve_exhaustive(&p).unwrap();
        assert_eq!(s.active, vec![true, true, false]);
    }
}
