use super::*;
use rand::distributions::Uniform;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Full KKT audit of a claimed optimal solution: primal and dual
/// feasibility, complementary slackness, and strong duality. Tolerances are
/// relative to per-row magnitudes.
fn check_kkt(prob: &LpProblem, sol: &LpSolution, tol: f64) {
    assert_eq!(sol.status, LpStatus::Optimal);
    let nv = prob.num_vars();
    assert_eq!(sol.z.len(), nv);
    assert_eq!(sol.duals_ub.len(), prob.a_ub.len());
    assert_eq!(sol.duals_eq.len(), prob.a_eq.len());

    for (j, &zj) in sol.z.iter().enumerate() {
        assert!(zj >= -tol, "z[{j}] = {zj} negative");
    }
    for (r, row) in prob.a_ub.iter().enumerate() {
        let lhs: f64 = row.iter().zip(&sol.z).map(|(a, z)| a * z).sum();
        let scale = 1.0 + prob.b_ub[r].abs() + lhs.abs();
        assert!(lhs <= prob.b_ub[r] + tol * scale, "ub row {r} violated: {lhs} > {}", prob.b_ub[r]);
        let lambda = sol.duals_ub[r];
        assert!(lambda >= -tol, "dual_ub[{r}] = {lambda} negative");
        let slack = prob.b_ub[r] - lhs;
        assert!(
            lambda * slack <= tol * scale * (1.0 + lambda),
            "complementary slackness fails on ub row {r}: lambda {lambda}, slack {slack}"
        );
    }
    for (e, row) in prob.a_eq.iter().enumerate() {
        let lhs: f64 = row.iter().zip(&sol.z).map(|(a, z)| a * z).sum();
        let scale = 1.0 + prob.b_eq[e].abs() + lhs.abs();
        assert!(
            (lhs - prob.b_eq[e]).abs() <= tol * scale,
            "eq row {e} violated: {lhs} != {}",
            prob.b_eq[e]
        );
    }
    // Stationarity: reduced costs nonnegative, zero on positive variables.
    let cscale = prob.c.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    for j in 0..nv {
        let mut rc = prob.c[j];
        for (r, row) in prob.a_ub.iter().enumerate() {
            rc += sol.duals_ub[r] * row[j];
        }
        for (e, row) in prob.a_eq.iter().enumerate() {
            rc += sol.duals_eq[e] * row[j];
        }
        assert!(rc >= -tol * cscale, "reduced cost of z[{j}] is {rc}");
        assert!(
            rc * sol.z[j] <= tol * cscale * (1.0 + sol.z[j]),
            "complementary slackness fails on z[{j}]: rc {rc}, value {}",
            sol.z[j]
        );
    }
    let dual_obj: f64 = -(sol
        .duals_ub
        .iter()
        .zip(&prob.b_ub)
        .chain(sol.duals_eq.iter().zip(&prob.b_eq))
        .map(|(d, b)| d * b)
        .sum::<f64>());
    let scale = 1.0 + sol.objective.abs() + dual_obj.abs();
    assert!(
        (sol.objective - dual_obj).abs() <= tol * scale,
        "strong duality gap: primal {} vs dual {dual_obj}",
        sol.objective
    );
}

fn assert_vec_close(got: &[f64], want: &[f64], tol: f64) {
    assert_eq!(got.len(), want.len());
    for (i, (g, w)) in got.iter().zip(want).enumerate() {
        assert!((g - w).abs() <= tol * (1.0 + w.abs()), "index {i}: got {g}, want {w}");
    }
}

#[test]
fn one_variable_upper_bound() {
    let prob = LpProblem::new(vec![-1.0]).ub_row(vec![1.0], 1.0);
    for sol in [solve(&prob).unwrap(), brute_force_solve(&prob).unwrap()] {
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_vec_close(&sol.z, &[1.0], 1e-12);
        assert_vec_close(&sol.duals_ub, &[1.0], 1e-12);
        assert!((sol.objective + 1.0).abs() <= 1e-12);
        check_kkt(&prob, &sol, 1e-10);
    }
}

#[test]
fn two_agent_one_item_linearization() {
    // Variables [beta_1, beta_2, p]; costs are budgets over previous
    // multipliers (1, 1/2); price rows p <= d_i beta_i; total price fixed
    // at the budget sum 2. Optimum: beta = (1, 2), p = 2, objective 2.
    // Multipliers: each price row carries 1/2, the total-price row -1.
    let prob = LpProblem::new(vec![1.0, 0.5, 0.0])
        .ub_row(vec![-2.0, 0.0, 1.0], 0.0)
        .ub_row(vec![0.0, -1.0, 1.0], 0.0)
        .eq_row(vec![0.0, 0.0, 1.0], 2.0);
    for sol in [solve(&prob).unwrap(), brute_force_solve(&prob).unwrap()] {
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_vec_close(&sol.z, &[1.0, 2.0, 2.0], 1e-10);
        assert!((sol.objective - 2.0).abs() <= 1e-10);
        assert_vec_close(&sol.duals_ub, &[0.5, 0.5], 1e-10);
        assert_vec_close(&sol.duals_eq, &[-1.0], 1e-10);
        check_kkt(&prob, &sol, 1e-10);
    }
}

#[test]
fn infeasible_band() {
    let prob = LpProblem::new(vec![1.0, 1.0])
        .ub_row(vec![1.0, 1.0], 1.0)
        .ub_row(vec![-1.0, -1.0], -3.0);
    assert_eq!(solve(&prob).unwrap().status, LpStatus::Infeasible);
    assert_eq!(brute_force_solve(&prob).unwrap().status, LpStatus::Infeasible);
}

#[test]
fn unbounded_ray() {
    let prob = LpProblem::new(vec![-1.0, -1.0]).ub_row(vec![1.0, -1.0], 1.0);
    assert_eq!(solve(&prob).unwrap().status, LpStatus::Unbounded);
    assert_eq!(brute_force_solve(&prob).unwrap().status, LpStatus::Unbounded);
}

#[test]
fn no_constraints() {
    let bounded = LpProblem::new(vec![1.0, 2.0]);
    let sol = solve(&bounded).unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    assert_vec_close(&sol.z, &[0.0, 0.0], 0.0);
    assert_eq!(sol.objective, 0.0);

    let unbounded = LpProblem::new(vec![-1.0, 1.0]);
    assert_eq!(solve(&unbounded).unwrap().status, LpStatus::Unbounded);
    assert_eq!(brute_force_solve(&unbounded).unwrap().status, LpStatus::Unbounded);
}

#[test]
fn negative_rhs_equality_keeps_dual_sign() {
    // Same constraint as x1 + x2 = 2, written with a negative right-hand
    // side. The reported multiplier must refer to the row as given.
    let prob = LpProblem::new(vec![1.0, 1.0]).eq_row(vec![-1.0, -1.0], -2.0);
    let sol = solve(&prob).unwrap();
    let oracle = brute_force_solve(&prob).unwrap();
    for s in [&sol, &oracle] {
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 2.0).abs() <= 1e-10);
        assert_vec_close(&s.duals_eq, &[1.0], 1e-10);
        check_kkt(&prob, s, 1e-10);
    }
}

#[test]
fn duplicate_equality_rows_are_tolerated() {
    let prob = LpProblem::new(vec![1.0, 0.0])
        .eq_row(vec![1.0, 1.0], 2.0)
        .eq_row(vec![1.0, 1.0], 2.0);
    let sol = solve(&prob).unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    assert!(sol.objective.abs() <= 1e-10);
    assert!((sol.duals_eq[0] + sol.duals_eq[1]).abs() <= 1e-10);
    check_kkt(&prob, &sol, 1e-10);

    let clash = LpProblem::new(vec![1.0, 0.0])
        .eq_row(vec![1.0, 1.0], 2.0)
        .eq_row(vec![1.0, 1.0], 3.0);
    assert_eq!(solve(&clash).unwrap().status, LpStatus::Infeasible);
}

#[test]
fn classic_degenerate_cycle_terminates() {
    // Beale's example: every vertex on the path is degenerate and the
    // most-negative-cost rule alone cycles forever.
    let prob = LpProblem::new(vec![-0.75, 150.0, -0.02, 6.0])
        .ub_row(vec![0.25, -60.0, -0.04, 9.0], 0.0)
        .ub_row(vec![0.5, -90.0, -0.02, 3.0], 0.0)
        .ub_row(vec![0.0, 0.0, 1.0, 0.0], 1.0);
    let sol = solve(&prob).unwrap();
    let oracle = brute_force_solve(&prob).unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    assert!((sol.objective - oracle.objective).abs() <= 1e-9 * (1.0 + oracle.objective.abs()));
    assert!((sol.objective + 0.05).abs() <= 1e-9);
    check_kkt(&prob, &sol, 1e-9);
}

#[test]
fn deterministic_resolve() {
    let prob = LpProblem::new(vec![1.0, -2.0, 0.5])
        .ub_row(vec![1.0, 1.0, 1.0], 4.0)
        .ub_row(vec![-1.0, 2.0, 0.0], 3.0)
        .eq_row(vec![0.0, 1.0, 1.0], 2.0);
    let a = solve(&prob).unwrap();
    let b = solve(&prob).unwrap();
    assert_eq!(a.z, b.z);
    assert_eq!(a.duals_ub, b.duals_ub);
    assert_eq!(a.duals_eq, b.duals_eq);
    assert_eq!(a.objective, b.objective);
    assert_eq!(a.basis, b.basis);
}

/// Random program with a planted feasible point, so feasibility is known
/// in advance (boundedness is not; statuses are compared instead).
fn random_problem(rng: &mut ChaCha8Rng) -> LpProblem {
    let nv = rng.gen_range(2..=4usize);
    let n_ub = rng.gen_range(1..=5usize);
    let with_eq = rng.gen_bool(0.5);
    let coef = Uniform::new(-1.0, 1.0);
    let z0: Vec<f64> = (0..nv).map(|_| rng.gen_range(0.0..2.0)).collect();
    let mut prob = LpProblem::new((0..nv).map(|_| rng.sample(coef)).collect());
    for _ in 0..n_ub {
        let row: Vec<f64> = (0..nv).map(|_| rng.sample(coef)).collect();
        let lhs: f64 = row.iter().zip(&z0).map(|(a, z)| a * z).sum();
        let rhs = lhs + rng.gen_range(0.0..1.0);
        prob = prob.ub_row(row, rhs);
    }
    if with_eq {
        let row: Vec<f64> = (0..nv).map(|_| rng.sample(coef)).collect();
        let rhs = row.iter().zip(&z0).map(|(a, z)| a * z).sum();
        prob = prob.eq_row(row, rhs);
    }
    prob
}

#[test]
fn oracle_agreement_on_random_programs() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_1234);
    let mut optimal = 0usize;
    let mut unbounded = 0usize;
    for case in 0..200 {
        let prob = random_problem(&mut rng);
        let sol = solve(&prob).unwrap_or_else(|e| panic!("case {case}: simplex failed: {e}"));
        let oracle =
            brute_force_solve(&prob).unwrap_or_else(|e| panic!("case {case}: oracle failed: {e}"));
        assert_eq!(sol.status, oracle.status, "case {case}: status disagreement");
        match sol.status {
            LpStatus::Optimal => {
                optimal += 1;
                let scale = 1.0 + oracle.objective.abs();
                assert!(
                    (sol.objective - oracle.objective).abs() <= 1e-8 * scale,
                    "case {case}: objective {} vs oracle {}",
                    sol.objective,
                    oracle.objective
                );
                check_kkt(&prob, &sol, 1e-8);
                check_kkt(&prob, &oracle, 1e-6);
            }
            LpStatus::Unbounded => unbounded += 1,
            LpStatus::Infeasible => panic!("case {case}: planted point lost"),
        }
    }
    // The generator plants a feasible point, so every case is optimal or
    // unbounded; both kinds must actually occur for the test to mean much.
    assert!(optimal >= 100, "only {optimal} optimal cases");
    assert!(unbounded >= 10, "only {unbounded} unbounded cases");
}

#[test]
fn warm_start_reaches_same_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for case in 0..50 {
        let prob = random_problem(&mut rng);
        let cold = match solve(&prob) {
            Ok(s) if s.status == LpStatus::Optimal => s,
            _ => continue,
        };
        // Only the objective changes, as in successive linearizations.
        let mut next = prob.clone();
        for c in next.c.iter_mut() {
            *c += rng.gen_range(-0.2..0.2);
        }
        let warm = solve_warm(&next, &cold.basis).unwrap();
        let cold2 = solve(&next).unwrap();
        assert_eq!(warm.status, cold2.status, "case {case}");
        if warm.status == LpStatus::Optimal {
            assert!(
                (warm.objective - cold2.objective).abs() <= 1e-8 * (1.0 + cold2.objective.abs()),
                "case {case}: warm {} vs cold {}",
                warm.objective,
                cold2.objective
            );
            check_kkt(&next, &warm, 1e-8);
        }
    }
}

#[test]
fn warm_start_with_stale_basis_falls_back() {
    let prob = LpProblem::new(vec![1.0, 0.5, 0.0])
        .ub_row(vec![-2.0, 0.0, 1.0], 0.0)
        .ub_row(vec![0.0, -1.0, 1.0], 0.0)
        .eq_row(vec![0.0, 0.0, 1.0], 2.0);
    for junk in [vec![], vec![0, 0, 0], vec![99, 100, 101], vec![0, 1]] {
        let sol = solve_warm(&prob, &junk).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective - 2.0).abs() <= 1e-10);
    }
}

#[test]
fn rejects_malformed_input() {
    let empty = LpProblem::new(vec![]);
    assert!(matches!(solve(&empty), Err(LpError::BadProblem(_))));

    let ragged = LpProblem::new(vec![1.0, 1.0]).ub_row(vec![1.0], 1.0);
    assert!(matches!(solve(&ragged), Err(LpError::BadProblem(_))));

    let nan = LpProblem::new(vec![f64::NAN]);
    assert!(matches!(solve(&nan), Err(LpError::BadProblem(_))));

    let wide = LpProblem::new(vec![1.0; 20]);
    assert!(matches!(brute_force_solve(&wide), Err(LpError::BadProblem(_))));
}

#[cfg(test)]
mod properties {
    use super::check_kkt;
    use crate::lp::{solve, LpProblem, LpStatus};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn planted_lp() -> impl Strategy<Value = LpProblem> {
        (2usize..=4, 1usize..=4, any::<bool>(), any::<u64>()).prop_map(
            |(nv, n_ub, with_eq, seed)| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let z0: Vec<f64> = (0..nv).map(|_| rng.gen_range(0.0..2.0)).collect();
                let mut prob =
                    LpProblem::new((0..nv).map(|_| rng.gen_range(-1.0..1.0)).collect());
                for _ in 0..n_ub {
                    let row: Vec<f64> = (0..nv).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    let lhs: f64 = row.iter().zip(&z0).map(|(a, z)| a * z).sum();
                    prob = prob.ub_row(row, lhs + rng.gen_range(0.0..1.0));
                }
                if with_eq {
                    let row: Vec<f64> = (0..nv).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    let rhs = row.iter().zip(&z0).map(|(a, z)| a * z).sum();
                    prob = prob.eq_row(row, rhs);
                }
                prob
            },
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn optimal_solutions_satisfy_kkt(prob in planted_lp()) {
            let sol = solve(&prob).unwrap();
            prop_assert!(sol.status != LpStatus::Infeasible);
            if sol.status == LpStatus::Optimal {
                check_kkt(&prob, &sol, 1e-8);
            }
        }
    }
}
