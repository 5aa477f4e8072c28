//! Unsplittable assignment of subareas to a fixed set of open sites.

use super::{PlacementError, PlacementProblem, FEASIBILITY_REL_TOL};
use crate::channel_plan::{pack_channels, split_demand, ChannelDemand};
use crate::scalar::{from_usize, lit, Scalar};

/// Per-pair channel needs and slack-adjusted budgets.
pub(crate) struct NeedTable<T> {
    /// `[site][subarea]`
    pub need: Vec<Vec<Option<T>>>,
    pub budget: Vec<T>,
    /// Whole channels per site.
    pub channels: Vec<usize>,
}

impl<T: Scalar> NeedTable<T> {
    pub fn new(problem: &PlacementProblem<T>) -> Self {
        let tol: T = lit(FEASIBILITY_REL_TOL);
        Self {
            need: (0..problem.n_sites())
                .map(|u| (0..problem.n_subareas()).map(|a| problem.channels_needed(u, a)).collect())
                .collect(),
            budget: problem
                .sites
                .iter()
                .map(|s| {
                    let r: T = from_usize(s.channel_budget as usize);
                    r + tol * r.max(T::one())
                })
                .collect(),
            channels: problem.sites.iter().map(|s| s.channel_budget as usize).collect(),
        }
    }

    /// Whether every site's shares pack into its whole channels.
    pub fn packs(&self, assignment: &[usize]) -> bool {
        let mut per_site: Vec<Vec<ChannelDemand<T>>> = vec![Vec::new(); self.need.len()];
        for (a, &u) in assignment.iter().enumerate() {
            match self.need[u][a] {
                Some(r) => per_site[u].extend(split_demand(a, r)),
                None => return false,
            }
        }
        per_site
            .iter()
            .enumerate()
            .all(|(u, d)| d.is_empty() || pack_channels(u, d, self.channels[u], T::one()).is_ok())
    }

    pub fn n_subareas(&self) -> usize {
        self.need.first().map_or(0, Vec::len)
    }
}

struct Search<T> {
    /// Subareas in branching order.
    order: Vec<usize>,
    /// Per subarea, (need, site) over the open sites, cheapest first.
    options: Vec<Vec<(T, usize)>>,
    remaining: Vec<T>,
    current: Vec<usize>,
    nodes: u64,
    limit: u64,
}

impl<T: Scalar> Search<T> {
    fn new(table: &NeedTable<T>, open: &[usize], limit: u64) -> Option<Self> {
        let n = table.n_subareas();
        let mut options = Vec::with_capacity(n);
        for a in 0..n {
            let mut o: Vec<(T, usize)> =
                open.iter().filter_map(|&u| table.need[u][a].map(|r| (r, u))).collect();
            if o.is_empty() {
                return None;
            }
            o.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap().then(x.1.cmp(&y.1)));
            options.push(o);
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            options[a]
                .len()
                .cmp(&options[b].len())
                .then(options[b][0].0.partial_cmp(&options[a][0].0).unwrap())
                .then(a.cmp(&b))
        });
        Some(Self {
            order,
            options,
            remaining: table.budget.clone(),
            current: vec![usize::MAX; n],
            nodes: 0,
            limit,
        })
    }

    fn tick(&mut self) -> Result<(), PlacementError> {
        self.nodes += 1;
        if self.nodes > self.limit {
            return Err(PlacementError::SearchLimit(self.limit));
        }
        Ok(())
    }

    /// Sum over unassigned subareas of their cheapest still-fitting option,
    /// or `None` if one of them has nowhere left to go.
    fn residual_bound(&self, depth: usize) -> Option<T> {
        let mut total = T::zero();
        for &a in &self.order[depth..] {
            let r = self.options[a].iter().find(|(r, u)| *r <= self.remaining[*u])?.0;
            total = total + r;
        }
        Some(total)
    }

    fn open_capacity(&self, open: &[usize]) -> T {
        open.iter().fold(T::zero(), |acc, &u| acc + self.remaining[u])
    }

    fn feasible(&mut self, depth: usize, open: &[usize]) -> Result<bool, PlacementError> {
        if depth == self.order.len() {
            return Ok(true);
        }
        self.tick()?;
        match self.residual_bound(depth) {
            Some(need) if need <= self.open_capacity(open) => {}
            _ => return Ok(false),
        }
        let a = self.order[depth];
        for i in 0..self.options[a].len() {
            let (r, u) = self.options[a][i];
            if r > self.remaining[u] {
                continue;
            }
            let before = self.remaining[u];
            self.remaining[u] = before - r;
            self.current[a] = u;
            if self.feasible(depth + 1, open)? {
                return Ok(true);
            }
            self.remaining[u] = before;
        }
        Ok(false)
    }

    fn cheapest(
        &mut self,
        table: &NeedTable<T>,
        depth: usize,
        spent: T,
        best: &mut (T, Vec<usize>),
    ) -> bool {
        if depth == self.order.len() {
            if spent < best.0 && table.packs(&self.current) {
                *best = (spent, self.current.clone());
            }
            return true;
        }
        if self.tick().is_err() {
            return false;
        }
        match self.residual_bound(depth) {
            Some(rest) if spent + rest < best.0 => {}
            _ => return true,
        }
        let a = self.order[depth];
        for i in 0..self.options[a].len() {
            let (r, u) = self.options[a][i];
            if r > self.remaining[u] {
                continue;
            }
            let before = self.remaining[u];
            self.remaining[u] = before - r;
            self.current[a] = u;
            let completed = self.cheapest(table, depth + 1, spent + r, best);
            self.remaining[u] = before;
            if !completed {
                return false;
            }
        }
        true
    }
}

/// Some assignment of every subarea to one site in `open` within budgets.
pub(crate) fn find_assignment<T: Scalar>(
    table: &NeedTable<T>,
    open: &[usize],
    node_limit: u64,
) -> Result<Option<Vec<usize>>, PlacementError> {
    let Some(mut search) = Search::new(table, open, node_limit) else {
        return Ok(None);
    };
    Ok(search.feasible(0, open)?.then_some(search.current))
}

/// Searches the assignments over `open` whose shares pack into whole
/// channels on every site for the one with the fewest total
/// channel-equivalents. Stops at the node limit with the best found so far,
/// and returns `start` unchanged if no packable assignment was met.
pub(crate) fn refine_assignment<T: Scalar>(
    table: &NeedTable<T>,
    open: &[usize],
    start: Vec<usize>,
    node_limit: u64,
) -> Vec<usize> {
    let total = |asg: &[usize]| {
        asg.iter()
            .enumerate()
            .fold(T::zero(), |acc, (a, &u)| acc + table.need[u][a].unwrap_or_else(T::infinity))
    };
    let initial = if table.packs(&start) { total(&start) } else { T::infinity() };
    let mut best = (initial, start);
    if let Some(mut search) = Search::new(table, open, node_limit) {
        search.cheapest(table, 0, T::zero(), &mut best);
    }
    best.1
}
