//! CPLEX LP-format export of the placement model for external MILP solvers.
//!
//! Variables: `x_u` site active, `y_u_a` subarea `a` served by `u`, `r_u_a`
//! channel-equivalents. Pairs a site cannot serve within its budget are left
//! out. Capacities and demands are written in Mbit/s.

use std::fmt::Write;

use crate::placement::PlacementProblem;
use crate::scalar::{to_f64, Scalar};

pub fn write_lp<T: Scalar>(problem: &PlacementProblem<T>) -> String {
    let (n_u, n_a) = (problem.n_sites(), problem.n_subareas());
    let usable: Vec<Vec<bool>> = (0..n_u)
        .map(|u| (0..n_a).map(|a| problem.channels_needed(u, a).is_some()).collect())
        .collect();
    let budget = |u: usize| f64::from(problem.sites[u].channel_budget);
    let mut s = String::new();
    let _ = writeln!(s, "\\ {n_u} sites, {n_a} subareas");
    s.push_str("Minimize\n obj:");
    for (u, site) in problem.sites.iter().enumerate() {
        let sign = if u == 0 { "" } else { " +" };
        let _ = write!(s, "{sign} {} x_{u}", to_f64(site.activation_cost));
    }
    if n_u == 0 {
        s.push_str(" 0");
    }
    s.push_str("\nSubject To\n");
    for u in 0..n_u {
        let terms: Vec<String> = (0..n_a).filter(|&a| usable[u][a]).map(|a| format!("r_{u}_{a}")).collect();
        if !terms.is_empty() {
            let _ = writeln!(s, " budget_{u}: {} <= {}", terms.join(" + "), budget(u));
        }
    }
    for a in 0..n_a {
        let terms: Vec<String> = (0..n_u).filter(|&u| usable[u][a]).map(|u| format!("y_{u}_{a}")).collect();
        if terms.is_empty() {
            // No usable site: keep the model infeasible, as the instance is.
            let _ = writeln!(s, " assign_{a}: 0 x_0 = 1");
        } else {
            let _ = writeln!(s, " assign_{a}: {} = 1", terms.join(" + "));
        }
    }
    for u in 0..n_u {
        for a in (0..n_a).filter(|&a| usable[u][a]) {
            let c = to_f64(problem.link_capacity[u][a]) / 1e6;
            let d = to_f64(problem.demands[a]) / 1e6;
            let _ = writeln!(s, " demand_{u}_{a}: {c} r_{u}_{a} - {d} y_{u}_{a} >= 0");
            let _ = writeln!(s, " link_{u}_{a}: r_{u}_{a} - {} y_{u}_{a} <= 0", budget(u));
            let _ = writeln!(s, " active_{u}_{a}: x_{u} - y_{u}_{a} >= 0");
        }
    }
    s.push_str("Bounds\n");
    for u in 0..n_u {
        for a in (0..n_a).filter(|&a| usable[u][a]) {
            let _ = writeln!(s, " r_{u}_{a} >= 0");
        }
    }
    s.push_str("Binaries\n");
    for u in 0..n_u {
        let _ = writeln!(s, " x_{u}");
        for a in (0..n_a).filter(|&a| usable[u][a]) {
            let _ = writeln!(s, " y_{u}_{a}");
        }
    }
    s.push_str("End\n");
    s
}
