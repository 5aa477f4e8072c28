use proptest::prelude::{prop, prop_assert, prop_assert_eq, proptest, Strategy};
use slicer_core::channel_plan::{plan_for_solution, verify_plan, ChannelPlanError};
use slicer_core::placement::{
    check_solution, solve_exact, solve_exhaustive, PlacementProblem, PlacementSite, SolveStatus, SolverOptions,
};

fn problem_strategy() -> impl Strategy<Value = PlacementProblem<f64>> {
    (1usize..=7, 1usize..=7).prop_flat_map(|(n_u, n_a)| {
        (
            prop::collection::vec((1u32..=5, 1u32..=4), n_u),
            prop::collection::vec(prop::collection::vec(prop::option::weighted(0.8, 5.0..78.0f64), n_a), n_u),
            prop::collection::vec(1.0..40.0f64, n_a),
        )
            .prop_map(move |(sites, caps, demands)| PlacementProblem {
                sites: sites
                    .into_iter()
                    .enumerate()
                    .map(|(id, (cost, budget))| PlacementSite {
                        id,
                        position: [0.0, 0.0, 10.0],
                        activation_cost: f64::from(cost) * 100.0,
                        channel_budget: budget,
                    })
                    .collect(),
                subarea_ids: (0..n_a).collect(),
                demands: demands.iter().map(|d| d * 1e6).collect(),
                link_capacity: caps
                    .iter()
                    .map(|row| row.iter().map(|c| c.map_or(0.0, |c| c * 1e6)).collect())
                    .collect(),
                channel_bandwidth: 20e6,
            })
    })
}

proptest! {
    #[test]
    fn exact_agrees_with_enumeration(p in problem_strategy()) {
        let exact = solve_exact(&p, &SolverOptions::default()).unwrap();
        let brute = solve_exhaustive(&p).unwrap();
        prop_assert_eq!(exact.status, brute.status);
        if exact.is_feasible() {
            prop_assert_eq!(exact.objective, brute.objective);
            prop_assert!(check_solution(&p, &exact).is_empty());
            // Shares within the continuous budget do not always pack into whole channels.
            match plan_for_solution(&exact, &p) {
                Ok(plan) => prop_assert!(verify_plan(&plan, &exact, &p).is_empty()),
                Err(e) => prop_assert!(matches!(e, ChannelPlanError::CapacityExceeded { .. }), "{}", e),
            }
        }
    }

    #[test]
    fn scaling_costs_keeps_the_solution(p in problem_strategy(), k in 1u32..=9) {
        let mut scaled = p.clone();
        for s in &mut scaled.sites {
            s.activation_cost *= f64::from(k);
        }
        let a = solve_exact(&p, &SolverOptions::default()).unwrap();
        let b = solve_exact(&scaled, &SolverOptions::default()).unwrap();
        prop_assert_eq!(a.status, b.status);
        prop_assert_eq!(&a.active, &b.active);
        if a.is_feasible() {
            prop_assert_eq!(a.objective * f64::from(k), b.objective);
        }
    }

    #[test]
    fn useless_site_changes_nothing(p in problem_strategy()) {
        let mut extended = p.clone();
        extended.sites.push(PlacementSite {
            id: p.n_sites(),
            position: [0.0, 0.0, 20.0],
            activation_cost: 1.0,
            channel_budget: 8,
        });
        extended.link_capacity.push(vec![0.0; p.n_subareas()]);
        let a = solve_exact(&p, &SolverOptions::default()).unwrap();
        let b = solve_exact(&extended, &SolverOptions::default()).unwrap();
        prop_assert_eq!(a.status, b.status);
        prop_assert_eq!(a.objective, b.objective);
        if b.status != SolveStatus::Infeasible {
            prop_assert!(!b.active[p.n_sites()]);
        }
    }
}
