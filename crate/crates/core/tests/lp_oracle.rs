use algoins::lpsolve::{check_feasible, solve, LpStatus};
use algoins::oracle::{random_bounded_lp, vertex_enumeration, VertexOptimum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn random_lps_match_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(20240611);
    let mut optimal = 0;
    for case in 0..300 {
        let lp = random_bounded_lp(&mut rng, 6, 8);
        let sol = solve(&lp).unwrap();
        match vertex_enumeration(&lp) {
            VertexOptimum::Optimal { objective, .. } => {
                optimal += 1;
                assert_eq!(sol.status, LpStatus::Optimal, "case {case}: {lp:?}");
                assert!(
                    (sol.objective_value - objective).abs() <= 1e-6 * objective.abs().max(1.0),
                    "case {case}: simplex {} vs oracle {objective}",
                    sol.objective_value
                );
                assert!(check_feasible(&lp, &sol.values).unwrap().feasible, "case {case}");
            }
            VertexOptimum::Infeasible => {
                assert_eq!(sol.status, LpStatus::Infeasible, "case {case}: {lp:?}");
            }
        }
    }
    assert!(optimal > 100, "too few feasible instances: {optimal}");
}
