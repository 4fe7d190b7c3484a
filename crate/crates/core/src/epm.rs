//! Exterior point method baseline.
//!
//! Maintains an infeasible disutility profile `d^k` (one scalar per agent),
//! projects it onto the feasible-profile set
//! `D+ = {d >= 0 : exists x >= 0, sum_i x_ij = 1, sum_j d_ij x_ij <= d_i}`
//! intersected with `{d >= d^k}`, and jumps to the inverse of the
//! separating-hyperplane normal until `d^k` itself is feasible. Prices are
//! then read off the normal and an allocation recovered by LP. The method
//! is numerically brittle: an inaccurate projection can tilt the normal,
//! and the run is classified `failed` when the recovered pair does not
//! even certify as a strongly approximate equilibrium.

use crate::certify::{certify_ce, Certificate};
use crate::error::{Error, Result};
use crate::lp::{solve, solve_warm, LpProblem, LpSolution, LpStatus};
use crate::market::{Allocation, ChoresInstance, EquilibriumCandidate};
use serde::Serialize;

/// Certificate level treated as exact.
const EXACT_TOL: f64 = 1e-6;
/// Earning relaxation defining the strongly approximate status.
const STRONG_EPS: f64 = 1e-2;
/// Componentwise slack allowed on the `d_star >= d_k` projection constraint.
const PROJ_FEAS_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EpmStatus {
    Running,
    Exact,
    Approx,
    Failed,
}

impl std::fmt::Display for EpmStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EpmStatus::Running => "running",
            EpmStatus::Exact => "exact",
            EpmStatus::Approx => "approx",
            EpmStatus::Failed => "failed",
        })
    }
}

#[derive(Debug, Clone)]
pub struct EpmState {
    /// Iterations completed (projection steps taken).
    pub k: usize,
    /// Final disutility profile.
    pub d_k: Vec<f64>,
    /// Most recent projection of `d_k`, when one was computed.
    pub d_star: Option<Vec<f64>>,
    /// Hyperplane normal used for price recovery.
    pub a_k: Vec<f64>,
    pub status: EpmStatus,
}

#[derive(Debug, Clone)]
pub struct EpmConfig {
    /// Start profile; `None` uses `1e-3 * min_j d_ij` per agent, which is
    /// infeasible on any instance with at least as many chores as that
    /// fraction of an agent's cheapest chore.
    pub d0: Option<Vec<f64>>,
    /// Frank-Wolfe gap at which a projection is accepted.
    pub proj_tol: f64,
    /// Step cap per projection before giving up.
    pub proj_step_cap: usize,
    /// Cap on exterior-point iterations.
    pub max_iters: usize,
    /// A profile is feasible when the minimum total over-allocation slack
    /// is at most this times `max(1, |d|_inf)`.
    pub feas_tol: f64,
}

impl Default for EpmConfig {
    fn default() -> Self {
        EpmConfig { d0: None, proj_tol: 1e-8, proj_step_cap: 20_000, max_iters: 300, feas_tol: 1e-9 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EpmTraceRow {
    pub k: usize,
    /// Euclidean distance moved by the projection.
    pub proj_dist: f64,
    /// Frank-Wolfe gap at which the projection stopped.
    pub fw_gap: f64,
    /// Feasibility margin of `d_k` before projecting (minimum total slack).
    pub feasibility_margin: f64,
}

#[derive(Debug, Clone)]
pub struct EpmRun {
    pub state: EpmState,
    pub candidate: EquilibriumCandidate,
    pub certificate: Certificate,
    pub trace: Vec<EpmTraceRow>,
    /// Feasibility margin at the accepting check.
    pub terminal_margin: f64,
}

impl EpmRun {
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("k,proj_dist,fw_gap,feasibility_margin\n");
        for row in &self.trace {
            out.push_str(&format!(
                "{},{},{},{}\n",
                row.k, row.proj_dist, row.fw_gap, row.feasibility_margin
            ));
        }
        out
    }
}

/// Result of one projection onto `D+ ∩ {d >= d_k}`.
#[derive(Debug, Clone)]
pub struct Projection {
    pub d_star: Vec<f64>,
    /// Allocation witnessing `d_star`'s feasibility.
    pub x: Allocation,
    /// Frank-Wolfe gap at acceptance (bounds the squared-distance error).
    pub fw_gap: f64,
    pub steps: usize,
}

fn validate_profile(inst: &ChoresInstance, d: &[f64], what: &str) -> Result<()> {
    if d.len() != inst.n() {
        return Err(Error::Domain(format!(
            "{what} has {} entries, expected one per agent ({})",
            d.len(),
            inst.n()
        )));
    }
    if let Some(v) = d.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::Domain(format!("{what} entries must be finite and nonnegative, got {v}")));
    }
    Ok(())
}

/// The minimum-total-slack program deciding profile feasibility: variables
/// `[x; s]`, minimize `sum_i s_i` subject to
/// `sum_j d_ij x_ij - s_i <= target_i` and unit column sums. A zero
/// optimum (up to tolerance) means `target` is in `D+`, and the optimal
/// `x` witnesses it.
fn slack_program(inst: &ChoresInstance, target: &[f64]) -> LpProblem {
    let (n, m) = (inst.n(), inst.m());
    let nx = n * m;
    let mut c = vec![0.0; nx + n];
    for i in 0..n {
        c[nx + i] = 1.0;
    }
    let mut prob = LpProblem::new(c);
    for i in 0..n {
        let mut row = vec![0.0; nx + n];
        for j in 0..m {
            row[i * m + j] = inst.d(i, j);
        }
        row[nx + i] = -1.0;
        prob = prob.ub_row(row, target[i]);
    }
    for j in 0..m {
        let mut row = vec![0.0; nx + n];
        for i in 0..n {
            row[i * m + j] = 1.0;
        }
        prob = prob.eq_row(row, 1.0);
    }
    prob
}

fn slack_solution(inst: &ChoresInstance, target: &[f64]) -> Result<(Allocation, f64)> {
    let sol = solve(&slack_program(inst, target))?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Solver(format!(
            "slack program reported {:?}; it is feasible and bounded by construction",
            sol.status
        )));
    }
    let (n, m) = (inst.n(), inst.m());
    let mut x = Allocation::zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            x.set(i, j, sol.z[i * m + j]);
        }
    }
    Ok((x, sol.objective))
}

fn margin_threshold(cfg: &EpmConfig, d: &[f64]) -> f64 {
    cfg.feas_tol * d.iter().fold(1.0f64, |a, &b| a.max(b))
}

/// True iff some (over-)allocation gives every agent at most its entry of
/// `d` in total disutility: the minimum total slack is at or below
/// `1e-9 * max(1, |d|_inf)`.
pub fn is_feasible_profile(inst: &ChoresInstance, d: &[f64]) -> Result<bool> {
    validate_profile(inst, d, "profile")?;
    let (_, margin) = slack_solution(inst, d)?;
    Ok(margin <= margin_threshold(&EpmConfig::default(), d))
}

/// One vertex of the projection polytope, as returned by the oracle.
#[derive(Debug, Clone)]
struct Vertex {
    u: Vec<f64>,
    x: Vec<f64>,
}

fn combine(active: &[Vertex], weights: &[f64], n: usize, nx: usize) -> (Vec<f64>, Vec<f64>) {
    let mut u = vec![0.0; n];
    let mut x = vec![0.0; nx];
    for (w, v) in weights.iter().zip(active) {
        for (acc, &val) in u.iter_mut().zip(&v.u) {
            *acc += w * val;
        }
        for (acc, &val) in x.iter_mut().zip(&v.x) {
            *acc += w * val;
        }
    }
    (u, x)
}

/// Solves the symmetric system `[G 1; 1^T 0] [w; nu] = [0; 1]`, the
/// optimality condition of `min 1/2 w^T G w` over the affine hull
/// `sum w = 1`. Returns `w`, or `None` when the system is numerically
/// singular even after a tiny ridge.
fn affine_minimizer(gram: &[Vec<f64>]) -> Option<Vec<f64>> {
    let k = gram.len();
    let dim = k + 1;
    let scale = gram.iter().enumerate().map(|(i, row)| row[i]).fold(0.0, f64::max);
    let ridge = 1e-12 * scale.max(1e-300);
    let mut a = vec![vec![0.0; dim + 1]; dim];
    for r in 0..k {
        a[r][..k].copy_from_slice(&gram[r]);
        a[r][r] += ridge;
        a[r][k] = 1.0;
        a[r][dim] = 0.0;
    }
    for c in 0..k {
        a[k][c] = 1.0;
    }
    a[k][dim] = 1.0;

    // Gaussian elimination with partial pivoting on the bordered system.
    for col in 0..dim {
        let piv = (col..dim).max_by(|&r1, &r2| {
            a[r1][col].abs().partial_cmp(&a[r2][col].abs()).expect("finite entries")
        })?;
        if a[piv][col].abs() < 1e-14 * (1.0 + ridge) {
            return None;
        }
        a.swap(col, piv);
        for r in col + 1..dim {
            let factor = a[r][col] / a[col][col];
            if factor != 0.0 {
                for c in col..=dim {
                    a[r][c] -= factor * a[col][c];
                }
            }
        }
    }
    let mut sol = vec![0.0; dim];
    for r in (0..dim).rev() {
        let mut acc = a[r][dim];
        for c in r + 1..dim {
            acc -= a[r][c] * sol[c];
        }
        sol[r] = acc / a[r][r];
    }
    Some(sol[..k].to_vec())
}

/// Minimizes `1/2 |sum_k w_k u_k|^2` over the simplex exactly (up to
/// linear-algebra noise): repeatedly solve on the affine hull of the
/// current support and backtrack to the simplex boundary when a weight
/// would go negative, dropping it. Finite because the support shrinks on
/// every backtrack.
fn corrective_weights(active: &[Vertex], start: &[f64]) -> Vec<f64> {
    let k = active.len();
    if k == 1 {
        return vec![1.0];
    }
    let gram: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| active[i].u.iter().zip(&active[j].u).map(|(a, b)| a * b).sum())
                .collect()
        })
        .collect();
    let mut w = start.to_vec();
    let mut support: Vec<usize> = (0..k).collect();
    loop {
        let sub: Vec<Vec<f64>> = support
            .iter()
            .map(|&i| support.iter().map(|&j| gram[i][j]).collect())
            .collect();
        let aff = match affine_minimizer(&sub) {
            Some(v) => v,
            None => return w,
        };
        if aff.iter().all(|&v| v >= -1e-12) {
            let mut out = vec![0.0; k];
            let total: f64 = aff.iter().map(|v| v.max(0.0)).sum();
            for (&idx, &v) in support.iter().zip(&aff) {
                out[idx] = v.max(0.0) / total;
            }
            return out;
        }
        // Walk from w toward aff until the first coordinate hits zero.
        let mut theta = 1.0f64;
        for (pos, &idx) in support.iter().enumerate() {
            if aff[pos] < 0.0 {
                let denom = w[idx] - aff[pos];
                if denom > 0.0 {
                    theta = theta.min(w[idx] / denom);
                }
            }
        }
        for (pos, &idx) in support.iter().enumerate() {
            w[idx] += theta * (aff[pos] - w[idx]);
        }
        let mut next_support = Vec::with_capacity(support.len());
        for (pos, &idx) in support.iter().enumerate() {
            if w[idx] <= 1e-14 || (aff[pos] < 0.0 && w[idx] - 0.0 <= 1e-12) {
                w[idx] = 0.0;
            } else {
                next_support.push(idx);
            }
        }
        if next_support.len() == support.len() {
            // Nothing dropped despite a negative affine weight: numerical
            // corner; accept the current point rather than loop.
            return w;
        }
        support = next_support;
        if support.len() == 1 {
            let mut out = vec![0.0; k];
            out[support[0]] = 1.0;
            return out;
        }
    }
}

/// Euclidean projection of `d_k` onto `D+ ∩ {d >= d_k}` by fully
/// corrective Frank-Wolfe on `1/2 |d - d_k|^2`. Variables are the excess
/// `u = d - d_k >= 0` and the witnessing allocation; the linear oracle is
/// an LP over `sum_j d_ij x_ij - u_i <= d_k_i`, unit column sums. After
/// each oracle call the quadratic is reoptimized exactly over the convex
/// hull of the vertices seen so far (Wolfe's minor cycle), which reaches
/// tight tolerances in tens of oracle calls where plain steps crawl at
/// O(1/t). A plain exact-line-search step is kept as a fallback whenever
/// the corrective step fails to improve. Stops once the Frank-Wolfe gap
/// is at most `tol`; the gap bounds the squared-distance suboptimality.
pub fn project_onto_feasible(
    inst: &ChoresInstance,
    d_k: &[f64],
    tol: f64,
    step_cap: usize,
) -> Result<Projection> {
    validate_profile(inst, d_k, "projection base point")?;
    if !(tol > 0.0) {
        return Err(Error::Domain("projection tolerance must be positive".into()));
    }
    let (n, m) = (inst.n(), inst.m());
    let nx = n * m;

    let mut oracle = slack_free_program(inst, d_k);
    let mut basis: Option<Vec<usize>> = None;
    let mut lmo = |c: &[f64], basis: &mut Option<Vec<usize>>| -> Result<Vertex> {
        oracle.c[..n].copy_from_slice(c);
        let sol = oracle_solve(&oracle, basis)?;
        *basis = Some(sol.basis);
        Ok(Vertex { u: sol.z[..n].to_vec(), x: sol.z[n..n + nx].to_vec() })
    };

    // Start at the vertex minimizing total excess.
    let first = lmo(&vec![1.0; n], &mut basis)?;
    let mut active: Vec<Vertex> = vec![first];
    let mut weights: Vec<f64> = vec![1.0];
    let (mut u, mut x) = combine(&active, &weights, n, nx);

    for step in 1..=step_cap {
        let toward = lmo(&u, &mut basis)?;
        let gap: f64 = u.iter().zip(&toward.u).map(|(cur, v)| cur * (cur - v)).sum();
        // Scale-aware stop: when the remaining distance is tiny, an
        // absolute gap test would accept a direction dominated by noise
        // (zeroed coordinates in the normal), so demand relative accuracy
        // there. The returned gap always satisfies `gap <= tol`.
        let f_cur: f64 = u.iter().map(|v| v * v).sum::<f64>() * 0.5;
        let threshold = (tol * f_cur.min(1.0)).max(1e-18);
        if gap <= threshold {
            log::trace!("projection done: step={step} gap={gap:.3e} active={}", active.len());
            return Ok(finish_projection(inst, d_k, &u, &x, gap, step));
        }

        let tpos = match active.iter().position(|v| v.u == toward.u && v.x == toward.x) {
            Some(p) => p,
            None => {
                active.push(toward.clone());
                weights.push(0.0);
                active.len() - 1
            }
        };

        let corrected = corrective_weights(&active, &weights);
        let (u_corr, _) = combine(&active, &corrected, n, 0);
        let f_corr: f64 = u_corr.iter().map(|v| v * v).sum::<f64>() * 0.5;

        // Plain exact-line-search step as the safety net.
        let step_sq: f64 = u.iter().zip(&toward.u).map(|(cur, v)| (v - cur).powi(2)).sum();
        let gamma = if step_sq > 0.0 { (gap / step_sq).clamp(0.0, 1.0) } else { 1.0 };
        let f_plain: f64 = u
            .iter()
            .zip(&toward.u)
            .map(|(cur, v)| {
                let val = cur + gamma * (v - cur);
                val * val
            })
            .sum::<f64>()
            * 0.5;

        if f_corr <= f_plain {
            weights = corrected;
        } else {
            for w in weights.iter_mut() {
                *w *= 1.0 - gamma;
            }
            weights[tpos] += gamma;
        }

        // Prune dead vertices and renormalize, then rebuild the iterate
        // from scratch so weight drift cannot accumulate.
        let mut k = 0;
        while k < active.len() {
            if weights[k] <= 1e-14 {
                active.swap_remove(k);
                weights.swap_remove(k);
            } else {
                k += 1;
            }
        }
        let total: f64 = weights.iter().sum();
        for w in weights.iter_mut() {
            *w /= total;
        }
        let rebuilt = combine(&active, &weights, n, nx);
        u = rebuilt.0;
        x = rebuilt.1;
    }
    Err(Error::Solver(format!(
        "projection did not reach gap {tol} within {step_cap} steps; \
         the tolerance is too tight for this instance"
    )))
}

/// Oracle LP for the projection: variables `[u; x]`, costs on `u` set per
/// step, constraints `sum_j d_ij x_ij - u_i <= d_k_i` and unit column sums.
fn slack_free_program(inst: &ChoresInstance, d_k: &[f64]) -> LpProblem {
    let (n, m) = (inst.n(), inst.m());
    let nx = n * m;
    let mut prob = LpProblem::new(vec![0.0; n + nx]);
    for i in 0..n {
        let mut row = vec![0.0; n + nx];
        row[i] = -1.0;
        for j in 0..m {
            row[n + i * m + j] = inst.d(i, j);
        }
        prob = prob.ub_row(row, d_k[i]);
    }
    for j in 0..m {
        let mut row = vec![0.0; n + nx];
        for i in 0..n {
            row[n + i * m + j] = 1.0;
        }
        prob = prob.eq_row(row, 1.0);
    }
    prob
}

fn oracle_solve(prob: &LpProblem, basis: &Option<Vec<usize>>) -> Result<LpSolution> {
    let sol = match basis {
        Some(b) => solve_warm(prob, b),
        None => solve(prob),
    }?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Solver(format!(
            "projection oracle reported {:?}; the oracle is feasible and bounded by construction",
            sol.status
        )));
    }
    Ok(sol)
}

fn finish_projection(
    inst: &ChoresInstance,
    d_k: &[f64],
    u: &[f64],
    x: &[f64],
    gap: f64,
    steps: usize,
) -> Projection {
    let m = inst.m();
    let d_star: Vec<f64> = d_k.iter().zip(u).map(|(base, ui)| base + ui.max(0.0)).collect();
    let mut alloc = Allocation::zeros(inst.n(), m);
    for i in 0..inst.n() {
        for j in 0..m {
            alloc.set(i, j, x[i * m + j].max(0.0));
        }
    }
    Projection { d_star, x: alloc, fw_gap: gap, steps }
}

/// Allocation tuned to the recovered prices: minimize the total
/// complementary-slackness violation `sum_ij (a_i d_ij - p_j) x_ij` plus
/// the absolute earning deviations, over unit column sums. Both terms are
/// in price units, so neither dominates by scaling. This is the allocation
/// the prices themselves suggest; the plain slack program can return a
/// feasible-but-lopsided witness whose certificate is needlessly weak.
fn price_aware_allocation(
    inst: &ChoresInstance,
    a: &[f64],
    prices: &[f64],
) -> Result<Allocation> {
    let (n, m) = (inst.n(), inst.m());
    let nx = n * m;
    // Variables: x, then per-agent earning deviations (e+, e-).
    let mut c = vec![0.0; nx + 2 * n];
    for i in 0..n {
        for j in 0..m {
            c[i * m + j] = (a[i] * inst.d(i, j) - prices[j]).max(0.0);
        }
        c[nx + 2 * i] = 1.0;
        c[nx + 2 * i + 1] = 1.0;
    }
    let mut prob = LpProblem::new(c);
    for j in 0..m {
        let mut row = vec![0.0; nx + 2 * n];
        for i in 0..n {
            row[i * m + j] = 1.0;
        }
        prob = prob.eq_row(row, 1.0);
    }
    for i in 0..n {
        let mut row = vec![0.0; nx + 2 * n];
        row[i * m..(i + 1) * m].copy_from_slice(prices);
        row[nx + 2 * i] = -1.0;
        row[nx + 2 * i + 1] = 1.0;
        prob = prob.eq_row(row, inst.budgets()[i]);
    }
    let sol = solve(&prob)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Solver(format!(
            "price-aware recovery reported {:?}; it is feasible and bounded by construction",
            sol.status
        )));
    }
    let mut x = Allocation::zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            x.set(i, j, sol.z[i * m + j].max(0.0));
        }
    }
    Ok(x)
}

fn recover(
    inst: &ChoresInstance,
    a: &[f64],
    allocations: &[&Allocation],
) -> Result<(EquilibriumCandidate, Certificate, EpmStatus)> {
    let prices: Vec<f64> = (0..inst.m())
        .map(|j| {
            (0..inst.n())
                .map(|i| a[i] * inst.d(i, j))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let tuned = price_aware_allocation(inst, a, &prices)?;
    let mut best: Option<(EquilibriumCandidate, Certificate)> = None;
    for x in allocations.iter().copied().chain(std::iter::once(&tuned)) {
        let candidate = EquilibriumCandidate { prices: prices.clone(), allocation: x.clone() };
        let cert = certify_ce(inst, &candidate)?;
        let better = match &best {
            None => true,
            Some((_, held)) => cert.max_eps() < held.max_eps(),
        };
        if better {
            best = Some((candidate, cert));
        }
    }
    let (candidate, cert) = best.expect("at least one recovery allocation is supplied");
    let status = if cert.max_eps() <= EXACT_TOL {
        EpmStatus::Exact
    } else if cert.strongly_approx(STRONG_EPS, EXACT_TOL) {
        EpmStatus::Approx
    } else {
        EpmStatus::Failed
    };
    Ok((candidate, cert, status))
}

/// Runs the exterior point method to completion.
pub fn epm_run(inst: &ChoresInstance, cfg: &EpmConfig) -> Result<EpmRun> {
    if !(cfg.proj_tol > 0.0) || !(cfg.feas_tol > 0.0) {
        return Err(Error::Domain("tolerances must be positive".into()));
    }
    if cfg.max_iters == 0 || cfg.proj_step_cap == 0 {
        return Err(Error::Domain("iteration caps must be at least 1".into()));
    }
    let n = inst.n();
    let mut d: Vec<f64> = match &cfg.d0 {
        Some(d0) => {
            validate_profile(inst, d0, "d0")?;
            if let Some(v) = d0.iter().find(|v| **v <= 0.0) {
                return Err(Error::Domain(format!("d0 entries must be strictly positive, got {v}")));
            }
            d0.clone()
        }
        None => (0..n)
            .map(|i| {
                1e-3 * inst.disutility_row(i).iter().copied().fold(f64::INFINITY, f64::min)
            })
            .collect(),
    };
    // Termination reads prices off the latest normal; before any
    // projection the consistent choice is the inverse profile, matching
    // the update rule's `d = 1/a` relation.
    let mut a: Vec<f64> = d.iter().map(|v| 1.0 / v).collect();
    let mut last_witness: Option<Allocation> = None;
    let mut trace = Vec::new();

    for k in 0..=cfg.max_iters {
        let (x_slack, margin) = slack_solution(inst, &d)?;
        if margin <= margin_threshold(cfg, &d) {
            let mut allocations: Vec<&Allocation> = vec![&x_slack];
            if let Some(w) = &last_witness {
                allocations.push(w);
            }
            let (candidate, certificate, status) = recover(inst, &a, &allocations)?;
            log::debug!("exterior point finished: status={status} iters={k} margin={margin}");
            return Ok(EpmRun {
                state: EpmState { k, d_k: d, d_star: None, a_k: a, status },
                candidate,
                certificate,
                trace,
                terminal_margin: margin,
            });
        }
        if k == cfg.max_iters {
            return Err(Error::Solver(format!(
                "no feasible profile within {} iterations (margin {margin})",
                cfg.max_iters
            )));
        }

        let proj = project_onto_feasible(inst, &d, cfg.proj_tol, cfg.proj_step_cap)?;
        let diff: Vec<f64> = proj
            .d_star
            .iter()
            .zip(&d)
            .map(|(star, base)| {
                debug_assert!(star - base >= -PROJ_FEAS_TOL, "projection moved below its base");
                (star - base).max(0.0)
            })
            .collect();
        let dist = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
        trace.push(EpmTraceRow { k, proj_dist: dist, fw_gap: proj.fw_gap, feasibility_margin: margin });

        let denom: f64 = diff.iter().zip(&proj.d_star).map(|(df, star)| df * star).sum();
        let a_new: Vec<f64> = diff.iter().map(|df| df * n as f64 / denom).collect();
        if denom <= 0.0 || a_new.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            // The hyperplane normal degenerated (a coordinate the
            // projection never moved, or a vanishing denominator): the
            // update 1/a is undefined and the method cannot proceed.
            // Classify by whatever the current state recovers to.
            let mut allocations: Vec<&Allocation> = vec![&proj.x, &x_slack];
            if let Some(w) = &last_witness {
                allocations.push(w);
            }
            let (candidate, certificate, status) = recover(inst, &a, &allocations)?;
            let status =
                if status == EpmStatus::Exact || status == EpmStatus::Approx { status } else { EpmStatus::Failed };
            log::debug!("exterior point degenerated at k={k}: status={status}");
            return Ok(EpmRun {
                state: EpmState { k, d_k: d, d_star: Some(proj.d_star), a_k: a, status },
                candidate,
                certificate,
                trace,
                terminal_margin: margin,
            });
        }
        a = a_new;
        d = a.iter().map(|v| 1.0 / v).collect();
        last_witness = Some(proj.x);
    }
    unreachable!("loop returns at the iteration cap")
}
