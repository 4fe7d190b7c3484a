//! Greedy Frank-Wolfe solver for the dual program.
//!
//! The working objective is `f(y) = -sum_i b_i ln beta_i` over the polytope
//! `p_j <= beta_i d_ij`, `sum_j p_j = sum_i b_i`, `beta, p >= 0` (the price
//! sum contributes a constant and is dropped). Each iteration solves the
//! linearization of `f` at the current point, which is the LP
//!
//! ```text
//! minimize    sum_i (b_i / beta_prev_i) beta_i
//! subject to  p_j - d_ij beta_i <= 0        (dual: x_ij)
//!             sum_j p_j = sum_i b_i         (dual: mu)
//!             beta, p >= 0
//! ```
//!
//! and jumps fully to its vertex; convexity of `f` makes that a strict
//! improvement until stationarity. The LP's inequality duals are an
//! allocation: at termination they certify the final point as an exact
//! equilibrium, and along the way their scaled form gives strongly
//! approximate equilibria at level `eps_estimate`.

use crate::certify::{certify_ce, KktWitness};
use crate::error::{Error, Result};
use crate::lp::{solve, solve_warm, LpProblem, LpStatus};
use crate::market::{
    is_quad_regime, itakura_saito, Allocation, ChoresInstance, DualPoint, EquilibriumCandidate,
};
use serde::Serialize;

/// Tolerance constants for the run-time sanity checks (`check_invariants`).
/// Identities hold to LP accuracy; these are loose enough for honest noise
/// and tight enough to catch sign or indexing bugs immediately.
const IDENTITY_RTOL: f64 = 1e-7;
const PROGRESS_SLACK: f64 = 1e-9;
const MONOTONE_SLACK: f64 = 1e-9;
const BOUND_SLACK: f64 = 1e-8;
/// Divisor in the per-step progress lower bound `min_b eps^2 / 2.3`.
const PROGRESS_DIVISOR: f64 = 2.3;

#[derive(Debug, Clone)]
pub struct GfwConfig {
    /// Relative first-order termination tolerance: stop when the
    /// linearized improvement is at most `term_tol * max(1, |f|)`.
    pub term_tol: f64,
    /// Optional level at which to record (and optionally stop at) the
    /// first iterate with `eps_estimate` at or below it.
    pub eps_target: Option<f64>,
    /// Stop as soon as `eps_target` is hit instead of continuing to
    /// stationarity.
    pub stop_at_eps_target: bool,
    /// Iteration cap. Defaults to ten times [`iteration_bound`] at
    /// `eps_target` when one is set, else 10000.
    pub max_iters: Option<usize>,
    /// Verify the per-step identities and progress bounds, failing the
    /// run on violation (a solver bug, not a user error).
    pub check_invariants: bool,
    /// Keep every k-th iterate in the trace (the final one is always
    /// kept). 1 keeps everything.
    pub trace_stride: usize,
}

impl Default for GfwConfig {
    fn default() -> Self {
        GfwConfig {
            term_tol: 1e-10,
            eps_target: None,
            stop_at_eps_target: false,
            max_iters: None,
            check_invariants: true,
            trace_stride: 1,
        }
    }
}

impl GfwConfig {
    fn validate(&self) -> Result<()> {
        if !(self.term_tol > 0.0) {
            return Err(Error::Domain("term_tol must be positive".into()));
        }
        if let Some(eps) = self.eps_target {
            if !(eps > 0.0 && eps <= 1.0) {
                return Err(Error::Domain(format!("eps_target {eps} must lie in (0, 1]")));
            }
        }
        if self.max_iters == Some(0) {
            return Err(Error::Domain("max_iters must be at least 1".into()));
        }
        if self.trace_stride == 0 {
            return Err(Error::Domain("trace_stride must be at least 1".into()));
        }
        Ok(())
    }

    fn resolved_max_iters(&self, inst: &ChoresInstance) -> Result<usize> {
        Ok(match (self.max_iters, self.eps_target) {
            (Some(v), _) => v,
            (None, Some(eps)) => iteration_bound(inst, eps)?.saturating_mul(10),
            (None, None) => 10_000,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GfwStatus {
    /// Linearized improvement vanished: the point is stationary and the
    /// candidate certifies as an exact equilibrium.
    ExactKkt,
    /// Stopped at the requested approximation level.
    EpsReached,
    /// Iteration cap reached first.
    IterCap,
}

impl std::fmt::Display for GfwStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            GfwStatus::ExactKkt => "exact_kkt",
            GfwStatus::EpsReached => "eps_reached",
            GfwStatus::IterCap => "iter_cap",
        })
    }
}

/// One Frank-Wolfe step: the new dual point, the subproblem's dual
/// variables, and the movement statistics.
#[derive(Debug, Clone)]
pub struct GfwIterate {
    pub t: usize,
    pub y: DualPoint,
    /// Raw subproblem duals `x_ij` (row i, chore j).
    pub x: Allocation,
    /// `x` rescaled so column sums hit one exactly at stationarity.
    pub x_bar: Allocation,
    /// Dual of the total-price row; tends to -1 at stationarity.
    pub mu: f64,
    pub objective: f64,
    /// `beta_i / beta_prev_i` per agent.
    pub step_ratio: Vec<f64>,
    /// Itakura-Saito divergence of `beta` from `beta_prev`.
    pub d_is: f64,
    /// `max_i |step_ratio_i - 1|`: the certified approximation level of
    /// this iterate's candidate pair.
    pub eps_estimate: f64,
}

impl GfwIterate {
    /// The price/allocation pair this iterate puts forward.
    pub fn candidate(&self) -> EquilibriumCandidate {
        EquilibriumCandidate { prices: self.y.prices().to_vec(), allocation: self.x_bar.clone() }
    }

    /// The raw (unnormalized) pair, the object the per-step progress
    /// bound speaks about.
    pub fn raw_candidate(&self) -> EquilibriumCandidate {
        EquilibriumCandidate { prices: self.y.prices().to_vec(), allocation: self.x.clone() }
    }

    /// Stationarity witness: the dual point, the raw subproblem duals,
    /// and the shifted total-price multiplier `1 + mu` (zero at
    /// stationarity).
    pub fn witness(&self) -> KktWitness {
        KktWitness {
            beta: self.y.beta().to_vec(),
            prices: self.y.prices().to_vec(),
            x: self.x.clone(),
            mu: 1.0 + self.mu,
        }
    }

    fn min_price(&self) -> f64 {
        self.y.prices().iter().fold(f64::INFINITY, |a, &b| a.min(b))
    }
}

#[derive(Debug, Clone)]
pub struct GfwResult {
    pub status: GfwStatus,
    /// Number of subproblems solved.
    pub iters: usize,
    pub final_iterate: GfwIterate,
    /// Retained iterates (stride-thinned; always contains the final one).
    pub trace: Vec<GfwIterate>,
    pub initial_point: DualPoint,
    pub initial_objective: f64,
    /// First iteration whose `eps_estimate` reached `eps_target`, if one
    /// was configured and hit.
    pub first_eps_hit: Option<usize>,
}

impl GfwResult {
    /// Trace in CSV form, one row per retained iterate.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("t,objective,eps_estimate,d_is,min_price,max_step_ratio_dev\n");
        for it in &self.trace {
            let dev = it
                .step_ratio
                .iter()
                .map(|r| (r - 1.0).abs())
                .fold(0.0f64, f64::max);
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                it.t,
                it.objective,
                it.eps_estimate,
                it.d_is,
                it.min_price(),
                dev
            ));
        }
        out
    }
}

/// Uniform prices `sum_i b_i / m` with the smallest feasible `beta`.
pub fn initial_point(inst: &ChoresInstance) -> DualPoint {
    let p = vec![inst.budget_sum() / inst.m() as f64; inst.m()];
    DualPoint::induced(inst, p).expect("uniform positive prices are always feasible")
}

/// The linearized subproblem at `beta_prev`: variables `[beta; p]`,
/// inequality row `i*m + j` reads `p_j - d_ij beta_i <= 0`, and one
/// equality row fixes the price sum to the budget sum.
pub fn build_subproblem(inst: &ChoresInstance, beta_prev: &[f64]) -> LpProblem {
    let (n, m) = (inst.n(), inst.m());
    let mut c = vec![0.0; n + m];
    for i in 0..n {
        c[i] = inst.budgets()[i] / beta_prev[i];
    }
    let mut prob = LpProblem::new(c);
    for i in 0..n {
        for j in 0..m {
            let mut row = vec![0.0; n + m];
            row[i] = -inst.d(i, j);
            row[n + j] = 1.0;
            prob = prob.ub_row(row, 0.0);
        }
    }
    let mut eq = vec![0.0; n + m];
    for j in 0..m {
        eq[n + j] = 1.0;
    }
    prob.eq_row(eq, inst.budget_sum())
}

/// `x` scaled by `sum_i b_i / sum_i b_i step_ratio_i`, the factor that
/// makes the column sums exactly one when `x` came from an optimal
/// subproblem.
pub fn normalize_allocation(inst: &ChoresInstance, x: &Allocation, step_ratio: &[f64]) -> Allocation {
    let weighted: f64 =
        inst.budgets().iter().zip(step_ratio).map(|(b, r)| b * r).sum();
    x.scaled(inst.budget_sum() / weighted)
}

/// Cap on iterations to reach an `eps`-strongly-approximate equilibrium:
/// `ceil(3 G / (min_b eps^2) + G / (c min_b))` where `G` bounds the total
/// objective gain and `c` is the quadratic-regime divergence constant.
/// `G = n max_b ln(m D / min_b)` with the log argument clamped to `e` so
/// the bound stays positive on easy instances.
pub fn iteration_bound(inst: &ChoresInstance, eps: f64) -> Result<usize> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::Domain(format!("eps {eps} must lie in (0, 1]")));
    }
    let min_b = inst.min_budget();
    let ratio = inst.m() as f64 * inst.max_disutility() / min_b;
    let g = inst.n() as f64 * inst.max_budget() * ratio.max(std::f64::consts::E).ln();
    let bound = 3.0 * g / (min_b * eps * eps) + g / (is_quad_regime() * min_b);
    Ok(bound.ceil().min(1e18) as usize)
}

/// Named relative residuals of the per-step identities, plus the violation
/// of the progress lower bound (zero when satisfied):
///
/// - `disutility_identity`: `sum_j d_ij x_ij = b_i / beta_prev_i`.
/// - `earning_identity`: `sum_j d_ij x_ij = (sum_j p_j x_ij) / beta_i`.
/// - `column_sum_identity`: every column of `x` sums to
///   `sum_i b_i step_ratio_i / sum_i b_i`.
/// - `progress_lower_bound`: when the raw candidate of `cur` certifies at
///   level `eps`, the objective must have gained at least
///   `min_b eps^2 / 2.3` over `prev`.
pub fn step_identity_residuals(
    inst: &ChoresInstance,
    prev_beta: &[f64],
    prev_objective: f64,
    cur: &GfwIterate,
) -> Result<Vec<(&'static str, f64)>> {
    let (n, m) = (inst.n(), inst.m());
    let b = inst.budgets();

    let mut disutility = 0.0f64;
    let mut earning = 0.0f64;
    for i in 0..n {
        let dis: f64 = (0..m).map(|j| inst.d(i, j) * cur.x.x(i, j)).sum();
        let target = b[i] / prev_beta[i];
        disutility = disutility.max((dis - target).abs() / target);
        let earned: f64 = (0..m).map(|j| cur.y.prices()[j] * cur.x.x(i, j)).sum();
        earning = earning.max((dis - earned / cur.y.beta()[i]).abs() / dis.max(f64::MIN_POSITIVE));
    }

    let implied: f64 =
        b.iter().zip(&cur.step_ratio).map(|(bi, r)| bi * r).sum::<f64>() / inst.budget_sum();
    let mut column_sum = 0.0f64;
    for s in cur.x.column_sums() {
        column_sum = column_sum.max((s - implied).abs() / implied);
    }

    let cert = certify_ce(inst, &cur.raw_candidate())?;
    let required = inst.min_budget() * cert.max_eps().powi(2) / PROGRESS_DIVISOR;
    let progress = (required - (cur.objective - prev_objective)).max(0.0);

    Ok(vec![
        ("disutility_identity", disutility),
        ("earning_identity", earning),
        ("column_sum_identity", column_sum),
        ("progress_lower_bound", progress),
    ])
}

/// The identity residuals for two consecutive iterates of one run.
pub fn consecutive_step_residuals(
    inst: &ChoresInstance,
    prev: &GfwIterate,
    cur: &GfwIterate,
) -> Result<Vec<(&'static str, f64)>> {
    step_identity_residuals(inst, prev.y.beta(), prev.objective, cur)
}

fn step_invariants(
    inst: &ChoresInstance,
    prev_beta: &[f64],
    prev_objective: f64,
    gap: f64,
    upper_bound: f64,
    cur: &GfwIterate,
) -> Result<()> {
    let scale = prev_objective.abs().max(1.0);
    if gap < -MONOTONE_SLACK * scale {
        return Err(Error::Solver(format!(
            "iteration {}: linearized improvement {gap} is negative",
            cur.t
        )));
    }
    let f_gain = cur.objective - prev_objective;
    if f_gain < gap - MONOTONE_SLACK * scale {
        return Err(Error::Solver(format!(
            "iteration {}: objective gain {f_gain} fell below the linearized gain {gap}",
            cur.t
        )));
    }
    let total = cur.objective + inst.budget_sum();
    if total > upper_bound + BOUND_SLACK * upper_bound.abs().max(1.0) {
        return Err(Error::Solver(format!(
            "iteration {}: objective {total} exceeds the feasible-region bound {upper_bound}",
            cur.t
        )));
    }
    let min_price = cur.min_price();
    if !(min_price > 0.0) {
        return Err(Error::Solver(format!(
            "iteration {}: subproblem returned a zero price (min price {min_price}); \
             every optimal vertex has strictly positive prices",
            cur.t
        )));
    }
    for (name, residual) in step_identity_residuals(inst, prev_beta, prev_objective, cur)? {
        let tol = if name == "progress_lower_bound" { PROGRESS_SLACK } else { IDENTITY_RTOL };
        if residual > tol {
            return Err(Error::Solver(format!(
                "iteration {}: {name} residual {residual} exceeds {tol}",
                cur.t
            )));
        }
    }
    Ok(())
}

/// Runs greedy Frank-Wolfe to stationarity (or an early stop per config).
pub fn run(inst: &ChoresInstance, cfg: &GfwConfig) -> Result<GfwResult> {
    cfg.validate()?;
    let max_iters = cfg.resolved_max_iters(inst)?;
    let (n, m) = (inst.n(), inst.m());
    let sum_b = inst.budget_sum();
    let upper_bound = inst.dual_objective_upper_bound();

    let y0 = initial_point(inst);
    let f0 = inst.dual_objective(&y0);
    let mut prob = build_subproblem(inst, y0.beta());
    let mut basis: Option<Vec<usize>> = None;

    let mut prev_y = y0.clone();
    let mut prev_f = f0;
    let mut trace: Vec<GfwIterate> = Vec::new();
    let mut first_eps_hit: Option<usize> = None;

    for t in 1..=max_iters {
        for i in 0..n {
            prob.c[i] = inst.budgets()[i] / prev_y.beta()[i];
        }
        let sol = match &basis {
            Some(b) => solve_warm(&prob, b),
            None => solve(&prob),
        }?;
        if sol.status != LpStatus::Optimal {
            return Err(Error::Solver(format!(
                "iteration {t}: subproblem reported {:?}; it is feasible and bounded by construction",
                sol.status
            )));
        }
        let gap = sum_b - sol.objective;

        let mut x = Allocation::zeros(n, m);
        for i in 0..n {
            for j in 0..m {
                x.set(i, j, sol.duals_ub[i * m + j].max(0.0));
            }
        }
        let mu = sol.duals_eq[0];

        // Stationarity must be decided before moving: at a (near-)zero
        // gap the incumbent is itself an optimal vertex of the
        // subproblem, so the dual solution satisfies complementary
        // slackness with it and the incumbent-plus-duals pair is the
        // certified equilibrium. The solver may return a different
        // vertex of the flat optimal face, and pairing the duals with
        // that vertex produces arbitrarily wrong earnings.
        if gap <= cfg.term_tol * prev_f.abs().max(1.0) {
            let x_bar = x.scaled(sum_b / sol.objective);
            let eps_estimate = (gap / sol.objective).abs();
            let iterate = GfwIterate {
                t,
                y: prev_y.clone(),
                x,
                x_bar,
                mu,
                objective: prev_f,
                step_ratio: vec![1.0; n],
                d_is: 0.0,
                eps_estimate,
            };
            if cfg.check_invariants {
                for (name, residual) in
                    step_identity_residuals(inst, prev_y.beta(), prev_f, &iterate)?
                {
                    if residual > IDENTITY_RTOL {
                        return Err(Error::Solver(format!(
                            "iteration {t} (terminal): {name} residual {residual:.3e} \
                             exceeds {IDENTITY_RTOL:.0e}"
                        )));
                    }
                }
                if !(iterate.min_price() > 0.0) {
                    return Err(Error::Solver(format!(
                        "iteration {t} (terminal): nonpositive price {}",
                        iterate.min_price()
                    )));
                }
            }
            if first_eps_hit.is_none()
                && cfg.eps_target.is_some_and(|target| eps_estimate <= target)
            {
                first_eps_hit = Some(t);
            }
            trace.push(iterate.clone());
            log::debug!(
                "frank-wolfe finished: status=exact_kkt iters={t} objective={prev_f} gap={gap}"
            );
            return Ok(GfwResult {
                status: GfwStatus::ExactKkt,
                iters: t,
                final_iterate: iterate,
                trace,
                initial_point: y0,
                initial_objective: f0,
                first_eps_hit,
            });
        }

        let prices: Vec<f64> = sol.z[n..n + m].iter().map(|&v| v.max(0.0)).collect();
        let y = DualPoint::induced(inst, prices)?;
        let step_ratio: Vec<f64> =
            y.beta().iter().zip(prev_y.beta()).map(|(new, old)| new / old).collect();
        let eps_estimate =
            step_ratio.iter().map(|r| (r - 1.0).abs()).fold(0.0f64, f64::max);
        let d_is = itakura_saito(y.beta(), prev_y.beta())?;
        let x_bar = normalize_allocation(inst, &x, &step_ratio);
        let objective = inst.dual_objective(&y);
        let iterate = GfwIterate {
            t,
            y: y.clone(),
            x,
            x_bar,
            mu,
            objective,
            step_ratio,
            d_is,
            eps_estimate,
        };

        if cfg.check_invariants {
            step_invariants(inst, prev_y.beta(), prev_f, gap, upper_bound, &iterate)?;
        }

        let eps_hit = cfg.eps_target.is_some_and(|target| eps_estimate <= target);
        if first_eps_hit.is_none() && eps_hit {
            first_eps_hit = Some(t);
        }
        let eps_stop = cfg.stop_at_eps_target && eps_hit;
        let capped = t == max_iters;
        let terminal = eps_stop || capped;

        if terminal || t % cfg.trace_stride == 0 {
            trace.push(iterate.clone());
        }
        if terminal {
            let status = if eps_stop { GfwStatus::EpsReached } else { GfwStatus::IterCap };
            log::debug!(
                "frank-wolfe finished: status={status} iters={t} objective={objective} gap={gap}"
            );
            return Ok(GfwResult {
                status,
                iters: t,
                final_iterate: iterate,
                trace,
                initial_point: y0,
                initial_objective: f0,
                first_eps_hit,
            });
        }

        prev_y = y;
        prev_f = objective;
        basis = Some(sol.basis);
    }
    unreachable!("loop always returns at the iteration cap")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certify::{check_kkt_redundant, kkt_duality_gap};
    use crate::lp::brute_force_solve;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn single_chore() -> ChoresInstance {
        ChoresInstance::new(vec![vec![2.0], vec![1.0]], vec![1.0, 1.0]).unwrap()
    }

    fn extreme_ratio() -> ChoresInstance {
        ChoresInstance::new(vec![vec![1.0, 100.0], vec![0.99, 1.01]], vec![1.0, 1.0]).unwrap()
    }

    fn seeded_uniform(n: usize, m: usize, seed: u64) -> ChoresInstance {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..m)
                    .map(|_| loop {
                        let v: f64 = rng.gen_range(0.0..1.0);
                        if v > 0.0 {
                            break v;
                        }
                    })
                    .collect()
            })
            .collect();
        ChoresInstance::with_unit_budgets(d).unwrap()
    }

    fn assert_close(got: f64, want: f64, tol: f64, what: &str) {
        assert!((got - want).abs() <= tol * (1.0 + want.abs()), "{what}: got {got}, want {want}");
    }

    #[test]
    fn initial_point_examples() {
        let y = initial_point(&single_chore());
        assert_eq!(y.prices(), &[2.0]);
        assert_eq!(y.beta(), &[1.0, 2.0]);

        let inst = ChoresInstance::new(vec![vec![1.0, 1.0]], vec![1.0]).unwrap();
        let y = initial_point(&inst);
        assert_eq!(y.prices(), &[0.5, 0.5]);
        assert_eq!(y.beta(), &[0.5]);

        let y = initial_point(&extreme_ratio());
        assert_eq!(y.prices(), &[1.0, 1.0]);
        assert_close(y.beta()[0], 1.0, 1e-15, "beta_1");
        assert_close(y.beta()[1], 1.0 / 0.99, 1e-15, "beta_2");
    }

    #[test]
    fn subproblem_single_pair() {
        let inst = ChoresInstance::new(vec![vec![1.0]], vec![1.0]).unwrap();
        let prob = build_subproblem(&inst, &[1.0]);
        let sol = crate::lp::solve(&prob).unwrap();
        assert_close(sol.z[0], 1.0, 1e-12, "beta");
        assert_close(sol.z[1], 1.0, 1e-12, "price");
        assert_close(sol.objective, 1.0, 1e-12, "objective");
    }

    #[test]
    fn subproblem_at_stationary_point_returns_it() {
        let prob = build_subproblem(&single_chore(), &[1.0, 2.0]);
        let sol = crate::lp::solve(&prob).unwrap();
        assert_close(sol.z[0], 1.0, 1e-12, "beta_1");
        assert_close(sol.z[1], 2.0, 1e-12, "beta_2");
        assert_close(sol.z[2], 2.0, 1e-12, "price");
        assert_close(sol.objective, 2.0, 1e-12, "objective");
    }

    #[test]
    fn subproblem_solves_two_chore_instance_in_one_step() {
        // From uniform prices, one linearization already lands on the
        // unique stationary multipliers; cross-checked against the
        // enumeration oracle.
        let inst = extreme_ratio();
        let y = initial_point(&inst);
        let prob = build_subproblem(&inst, y.beta());
        let sol = crate::lp::solve(&prob).unwrap();
        let oracle = brute_force_solve(&prob).unwrap();
        assert_close(sol.objective, oracle.objective, 1e-9, "objective vs oracle");
        assert_close(sol.z[0], 2.0 / 101.0, 1e-9, "beta_1");
        assert_close(sol.z[1], 200.0 / (101.0 * 1.01), 1e-9, "beta_2");
    }

    #[test]
    fn two_agent_one_chore_terminates_immediately() {
        let result = run(&single_chore(), &GfwConfig::default()).unwrap();
        assert_eq!(result.status, GfwStatus::ExactKkt);
        assert!(result.iters <= 2, "took {} iterations", result.iters);
        let y = &result.final_iterate.y;
        assert_close(y.beta()[0], 1.0, 1e-9, "beta_1");
        assert_close(y.beta()[1], 2.0, 1e-9, "beta_2");
        assert_close(y.prices()[0], 2.0, 1e-9, "price");

        let cert = certify_ce(&single_chore(), &result.final_iterate.candidate()).unwrap();
        assert!(cert.is_exact(1e-9), "certificate: {cert:?}");
        let report = check_kkt_redundant(&single_chore(), &result.final_iterate.witness(), 1e-9).unwrap();
        assert!(report.passes, "report: {report:?}");
    }

    #[test]
    fn two_chore_instance_recovers_unique_equilibrium() {
        let inst = extreme_ratio();
        let result = run(&inst, &GfwConfig::default()).unwrap();
        assert_eq!(result.status, GfwStatus::ExactKkt);
        let it = &result.final_iterate;
        assert_close(it.y.prices()[0], 2.0 / 101.0, 1e-6, "price_1");
        assert_close(it.y.prices()[1], 200.0 / 101.0, 1e-6, "price_2");
        assert_close(it.x_bar.x(0, 0), 1.0, 1e-6, "x_11");
        assert_close(it.x_bar.x(0, 1), 99.0 / 200.0, 1e-6, "x_12");
        assert_close(it.x_bar.x(1, 0), 0.0, 1e-6, "x_21");
        assert_close(it.x_bar.x(1, 1), 101.0 / 200.0, 1e-6, "x_22");
        assert!(certify_ce(&inst, &it.candidate()).unwrap().is_exact(1e-6));
    }

    #[test]
    fn wide_instance_monotone_to_stationarity() {
        let inst = ChoresInstance::with_unit_budgets(vec![
            vec![0.62, 0.14, 0.88, 0.33, 0.75, 0.41, 0.09, 0.57],
            vec![0.23, 0.91, 0.18, 0.66, 0.05, 0.84, 0.49, 0.37],
        ])
        .unwrap();
        let result = run(&inst, &GfwConfig::default()).unwrap();
        assert_eq!(result.status, GfwStatus::ExactKkt);

        let mut last = result.initial_objective;
        for it in &result.trace {
            assert!(
                it.objective >= last - 1e-9 * (1.0 + last.abs()),
                "objective dipped at t={}: {} after {last}",
                it.t,
                it.objective
            );
            assert!(it.min_price() > 0.0, "zero price at t={}", it.t);
            last = it.objective;
        }
        // Strict increase everywhere except possibly the terminal step.
        for pair in result.trace.windows(2) {
            if pair[1].t < result.iters {
                assert!(pair[1].objective > pair[0].objective, "stalled at t={}", pair[1].t);
            }
        }
        let cert = certify_ce(&inst, &result.final_iterate.candidate()).unwrap();
        assert!(cert.is_exact(1e-6), "certificate: {cert:?}");
    }

    #[test]
    fn identities_hold_on_every_step_of_a_seeded_run() {
        let inst = seeded_uniform(10, 10, 7);
        let result = run(&inst, &GfwConfig::default()).unwrap();
        assert_eq!(result.status, GfwStatus::ExactKkt);
        for pair in result.trace.windows(2) {
            let residuals = consecutive_step_residuals(&inst, &pair[0], &pair[1]).unwrap();
            for (name, r) in residuals {
                let tol = if name == "progress_lower_bound" { 1e-9 } else { 1e-7 };
                assert!(r <= tol, "{name} residual {r} at t={}", pair[1].t);
            }
        }
        // Telescoping: total divergence is paid for by objective gain.
        let telescoped: f64 =
            result.trace.iter().map(|it| inst.min_budget() * it.d_is).sum();
        let gain = result.final_iterate.objective - result.initial_objective;
        assert!(telescoped <= gain + 1e-8, "telescoped {telescoped} vs gain {gain}");

        // Witness quality at termination.
        let report = check_kkt_redundant(&inst, &result.final_iterate.witness(), 1e-6).unwrap();
        assert!(report.passes, "report: {report:?}");
        assert!(report.mu_abs <= 1e-6);
        assert!(kkt_duality_gap(&inst, &result.final_iterate.witness()).unwrap() <= 1e-6);
    }

    #[test]
    fn approximate_iterates_certify_at_twice_their_estimate() {
        // A level-eps step estimate certifies the normalized pair at
        // 2 eps / (1 + eps) or better on the earning condition; supply
        // and optimality are exact by construction.
        let inst = seeded_uniform(10, 10, 11);
        let result = run(&inst, &GfwConfig::default()).unwrap();
        for it in &result.trace {
            let cert = certify_ce(&inst, &it.candidate()).unwrap();
            let eps = it.eps_estimate;
            assert!(
                cert.eps_earning <= 2.0 * eps / (1.0 + eps) + 1e-9,
                "t={}: earning {} vs estimate {eps}",
                it.t,
                cert.eps_earning
            );
            assert!(cert.eps_optimality <= 1e-8, "t={}: {}", it.t, cert.eps_optimality);
            assert!(cert.eps_supply <= 1e-8, "t={}: {}", it.t, cert.eps_supply);
        }
    }

    #[test]
    fn eps_target_records_hit_and_optionally_stops() {
        let inst = seeded_uniform(10, 10, 3);
        let full = run(&inst, &GfwConfig::default()).unwrap();
        assert_eq!(full.status, GfwStatus::ExactKkt);
        assert!(full.trace.len() >= 3, "need a multi-step run for this test");

        // Target the accuracy reached two steps before stationarity, so an
        // early stop must land strictly before the full run's end.
        let target = full.trace[full.trace.len() - 2].eps_estimate;
        assert!(target > 0.0 && target < 1.0, "unusable target {target}");
        let expected_hit =
            full.trace.iter().find(|it| it.eps_estimate <= target).unwrap().t;
        assert!(expected_hit < full.iters);

        let tagged = run(
            &inst,
            &GfwConfig { eps_target: Some(target), ..GfwConfig::default() },
        )
        .unwrap();
        assert_eq!(tagged.status, GfwStatus::ExactKkt);
        assert_eq!(tagged.first_eps_hit, Some(expected_hit));
        assert_eq!(tagged.iters, full.iters);

        let early = run(
            &inst,
            &GfwConfig {
                eps_target: Some(target),
                stop_at_eps_target: true,
                ..GfwConfig::default()
            },
        )
        .unwrap();
        assert_eq!(early.status, GfwStatus::EpsReached);
        assert_eq!(early.iters, expected_hit);
        assert_eq!(early.first_eps_hit, Some(expected_hit));
        assert!(early.final_iterate.eps_estimate <= target);
    }

    #[test]
    fn iteration_cap_reports_truncation() {
        let inst = seeded_uniform(10, 10, 5);
        let capped = run(
            &inst,
            &GfwConfig { max_iters: Some(1), ..GfwConfig::default() },
        )
        .unwrap();
        assert_eq!(capped.status, GfwStatus::IterCap);
        assert_eq!(capped.iters, 1);
    }

    #[test]
    fn iteration_bound_examples() {
        // Boundary case: log argument exactly e.
        let inst =
            ChoresInstance::new(vec![vec![std::f64::consts::E]], vec![1.0]).unwrap();
        assert_eq!(iteration_bound(&inst, 1.0).unwrap(), 9);

        // Formula evaluation at a typical scale.
        let d = vec![vec![1.0; 50]; 50];
        let inst = ChoresInstance::with_unit_budgets(d).unwrap();
        let g = 50.0 * 50f64.ln();
        let expected = (3.0 * g / 1e-4 + g / is_quad_regime()).ceil() as usize;
        assert_eq!(iteration_bound(&inst, 0.01).unwrap(), expected);
        assert!((5_800_000..6_000_000).contains(&expected), "bound {expected}");

        assert!(iteration_bound(&inst, 0.0).is_err());
        assert!(iteration_bound(&inst, 1.5).is_err());
        assert!(iteration_bound(&inst, -0.1).is_err());
    }

    #[test]
    fn trace_csv_shape() {
        let result = run(&single_chore(), &GfwConfig::default()).unwrap();
        let csv = result.trace_csv();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,objective,eps_estimate,d_is,min_price,max_step_ratio_dev"
        );
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), result.trace.len());
        for row in rows {
            assert_eq!(row.split(',').count(), 6);
        }
    }

    #[test]
    fn stride_thins_trace_but_keeps_final() {
        let inst = seeded_uniform(10, 10, 9);
        let full = run(&inst, &GfwConfig::default()).unwrap();
        let thinned = run(
            &inst,
            &GfwConfig { trace_stride: 4, ..GfwConfig::default() },
        )
        .unwrap();
        assert_eq!(full.iters, thinned.iters);
        assert!(thinned.trace.len() < full.trace.len());
        assert_eq!(
            thinned.trace.last().unwrap().t,
            thinned.final_iterate.t,
            "final iterate must be retained"
        );
        for it in &thinned.trace {
            assert!(it.t % 4 == 0 || it.t == thinned.iters);
        }
    }

    #[test]
    fn config_validation() {
        let inst = single_chore();
        for bad in [
            GfwConfig { term_tol: 0.0, ..GfwConfig::default() },
            GfwConfig { eps_target: Some(0.0), ..GfwConfig::default() },
            GfwConfig { eps_target: Some(1.5), ..GfwConfig::default() },
            GfwConfig { max_iters: Some(0), ..GfwConfig::default() },
            GfwConfig { trace_stride: 0, ..GfwConfig::default() },
        ] {
            assert!(run(&inst, &bad).is_err());
        }
    }

    #[test]
    fn larger_market_reaches_exact_equilibrium() {
        let inst = seeded_uniform(25, 25, 42);
        let result = run(&inst, &GfwConfig::default()).unwrap();
        assert_eq!(result.status, GfwStatus::ExactKkt);
        let cert = certify_ce(&inst, &result.final_iterate.candidate()).unwrap();
        assert!(cert.is_exact(1e-6), "certificate: {cert:?}");
        assert!(result.iters <= 60, "took {} iterations", result.iters);
    }
}
