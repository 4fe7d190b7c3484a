//! Exhaustive vertex-enumeration solver used as an independent oracle in
//! tests. It shares no code path with the simplex: candidate vertices come
//! from solving every invertible square subsystem of constraint gradients,
//! and multipliers come from the corresponding tight-set solves.
//!
//! Only practical for a handful of variables; `brute_force_solve` rejects
//! anything beyond its enumeration budget.

use super::{LpError, LpProblem, LpSolution, LpStatus};

const FEAS_TOL: f64 = 1e-7;
const SIGN_TOL: f64 = 1e-7;
const MAX_VARS: usize = 12;
const MAX_SUBSETS: u64 = 2_000_000;

/// One linear constraint `g . z <= rhs` (equalities are marked).
struct Row {
    g: Vec<f64>,
    rhs: f64,
    kind: Kind,
}

#[derive(Clone, Copy, PartialEq)]
enum Kind {
    Eq(usize),
    Ub(usize),
    NonNeg(usize),
    Box(usize),
}

fn binomial(n: u64, k: u64) -> u64 {
    let mut acc: u64 = 1;
    for i in 0..k.min(n.saturating_sub(k)) {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

/// Solves `a x = b` for dense square `a` by Gaussian elimination with
/// partial pivoting; `None` when near-singular.
fn dense_solve(mut a: Vec<f64>, mut b: Vec<f64>, n: usize) -> Option<Vec<f64>> {
    let scale = a.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    for col in 0..n {
        let mut best = col;
        let mut best_abs = a[col * n + col].abs();
        for row in col + 1..n {
            let v = a[row * n + col].abs();
            if v > best_abs {
                best = row;
                best_abs = v;
            }
        }
        if best_abs <= 1e-11 * scale {
            return None;
        }
        if best != col {
            for j in 0..n {
                a.swap(col * n + j, best * n + j);
            }
            b.swap(col, best);
        }
        let diag = a[col * n + col];
        for row in col + 1..n {
            let f = a[row * n + col] / diag;
            if f != 0.0 {
                for j in col + 1..n {
                    a[row * n + j] -= f * a[col * n + j];
                }
                b[row] -= f * b[col];
            }
        }
    }
    for col in (0..n).rev() {
        let mut v = b[col];
        for j in col + 1..n {
            v -= a[col * n + j] * b[j];
        }
        b[col] = v / a[col * n + col];
    }
    Some(b)
}

struct Enumerator {
    nv: usize,
    rows: Vec<Row>,
    c: Vec<f64>,
    box_limit: f64,
}

impl Enumerator {
    fn new(prob: &LpProblem, box_limit: f64) -> Enumerator {
        let nv = prob.num_vars();
        let mut rows = Vec::new();
        for (e, row) in prob.a_eq.iter().enumerate() {
            rows.push(Row { g: row.clone(), rhs: prob.b_eq[e], kind: Kind::Eq(e) });
        }
        for (r, row) in prob.a_ub.iter().enumerate() {
            rows.push(Row { g: row.clone(), rhs: prob.b_ub[r], kind: Kind::Ub(r) });
        }
        for j in 0..nv {
            let mut g = vec![0.0; nv];
            g[j] = -1.0;
            rows.push(Row { g, rhs: 0.0, kind: Kind::NonNeg(j) });
        }
        for j in 0..nv {
            let mut g = vec![0.0; nv];
            g[j] = 1.0;
            rows.push(Row { g, rhs: box_limit, kind: Kind::Box(j) });
        }
        Enumerator { nv, rows, c: prob.c.clone(), box_limit }
    }

    fn row_scale(&self, row: &Row, z: &[f64]) -> f64 {
        let mut s = 1.0 + row.rhs.abs();
        for (g, zj) in row.g.iter().zip(z) {
            s += (g * zj).abs();
        }
        s
    }

    fn is_feasible(&self, z: &[f64]) -> bool {
        self.rows.iter().all(|row| {
            let lhs: f64 = row.g.iter().zip(z).map(|(g, zj)| g * zj).sum();
            let slack = row.rhs - lhs;
            let tol = FEAS_TOL * self.row_scale(row, z);
            match row.kind {
                Kind::Eq(_) => slack.abs() <= tol,
                _ => slack >= -tol,
            }
        })
    }

    /// Best feasible vertex: (z, objective, active row indices).
    fn best_vertex(&self) -> Option<(Vec<f64>, f64, Vec<usize>)> {
        let nv = self.nv;
        let mut best: Option<(Vec<f64>, f64, Vec<usize>)> = None;
        let mut subset: Vec<usize> = (0..nv).collect();
        if nv == 0 || self.rows.len() < nv {
            return None;
        }
        loop {
            let mut a = vec![0.0; nv * nv];
            let mut b = vec![0.0; nv];
            for (i, &ri) in subset.iter().enumerate() {
                a[i * nv..(i + 1) * nv].copy_from_slice(&self.rows[ri].g);
                b[i] = self.rows[ri].rhs;
            }
            if let Some(z) = dense_solve(a, b, nv) {
                if self.is_feasible(&z) {
                    let obj: f64 = self.c.iter().zip(&z).map(|(c, zj)| c * zj).sum();
                    let better = match &best {
                        None => true,
                        Some((_, bobj, _)) => obj < bobj - 1e-12 * (1.0 + bobj.abs()),
                    };
                    if better {
                        best = Some((z, obj, subset.clone()));
                    }
                }
            }
            // Next lexicographic combination.
            let mut i = nv;
            loop {
                if i == 0 {
                    return best;
                }
                i -= 1;
                if subset[i] != i + self.rows.len() - nv {
                    break;
                }
                if i == 0 {
                    return best;
                }
            }
            subset[i] += 1;
            for j in i + 1..nv {
                subset[j] = subset[j - 1] + 1;
            }
        }
    }

    fn active_rows(&self, z: &[f64]) -> Vec<usize> {
        (0..self.rows.len())
            .filter(|&ri| {
                let row = &self.rows[ri];
                let lhs: f64 = row.g.iter().zip(z).map(|(g, zj)| g * zj).sum();
                (row.rhs - lhs).abs() <= FEAS_TOL * self.row_scale(row, z)
            })
            .collect()
    }

    fn touches_box(&self, z: &[f64]) -> bool {
        z.iter().any(|&v| v >= self.box_limit * (1.0 - 1e-6))
    }

    /// Multipliers for `c + sum w_r g_r = 0` over a tight set, retried
    /// across generating subsets until one is sign-valid (inequality
    /// multipliers nonnegative). Returns per-row multipliers.
    fn multipliers(&self, active: &[usize]) -> Option<Vec<f64>> {
        let nv = self.nv;
        if active.len() < nv {
            return None;
        }
        let neg_c: Vec<f64> = self.c.iter().map(|v| -v).collect();
        let mut first_solvable: Option<Vec<f64>> = None;
        let mut subset: Vec<usize> = (0..nv).collect();
        let total = binomial(active.len() as u64, nv as u64);
        let mut count = 0u64;
        loop {
            count += 1;
            if count > MAX_SUBSETS {
                break;
            }
            // Columns of the system are the gradients of the chosen rows.
            let mut a = vec![0.0; nv * nv];
            for (col, &si) in subset.iter().enumerate() {
                let row = &self.rows[active[si]];
                for i in 0..nv {
                    a[i * nv + col] = row.g[i];
                }
            }
            if let Some(w) = dense_solve(a, neg_c.clone(), nv) {
                let scale = self.c.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
                let valid = subset.iter().zip(&w).all(|(&si, &wi)| {
                    matches!(self.rows[active[si]].kind, Kind::Eq(_))
                        || wi >= -SIGN_TOL * scale
                });
                let mut full = vec![0.0; self.rows.len()];
                for (&si, &wi) in subset.iter().zip(&w) {
                    full[active[si]] = wi;
                }
                if valid {
                    return Some(full);
                }
                if first_solvable.is_none() {
                    first_solvable = Some(full);
                }
            }
            if total <= 1 {
                break;
            }
            let mut i = nv;
            let mut done = false;
            loop {
                if i == 0 {
                    done = true;
                    break;
                }
                i -= 1;
                if subset[i] != i + active.len() - nv {
                    break;
                }
                if i == 0 {
                    done = true;
                    break;
                }
            }
            if done {
                break;
            }
            subset[i] += 1;
            for j in i + 1..nv {
                subset[j] = subset[j - 1] + 1;
            }
        }
        first_solvable
    }
}

/// Solves a small problem by brute force. Independent of the simplex path;
/// intended as a test oracle.
pub fn brute_force_solve(prob: &LpProblem) -> Result<LpSolution, LpError> {
    prob.validate()?;
    let nv = prob.num_vars();
    if nv > MAX_VARS {
        return Err(LpError::BadProblem(format!(
            "brute force oracle supports at most {} variables, got {}",
            MAX_VARS, nv
        )));
    }
    let total_rows = prob.a_eq.len() + prob.a_ub.len() + 2 * nv;
    if binomial(total_rows as u64, nv as u64) > MAX_SUBSETS {
        return Err(LpError::BadProblem(format!(
            "brute force oracle enumeration budget exceeded ({} rows, {} vars)",
            total_rows, nv
        )));
    }

    let b_inf = prob
        .b_ub
        .iter()
        .chain(&prob.b_eq)
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    let box_limit = 1e6 * (1.0 + b_inf);

    let en = Enumerator::new(prob, box_limit);
    let Some((z, obj, _)) = en.best_vertex() else {
        return Ok(LpSolution::infeasible());
    };

    if en.touches_box(&z) {
        // The optimum leans on the artificial box: enlarge it and see
        // whether the objective keeps improving.
        let wide = Enumerator::new(prob, 4.0 * box_limit);
        match wide.best_vertex() {
            Some((_, obj2, _)) if obj2 < obj - 1e-9 * (1.0 + obj.abs()) => {
                return Ok(LpSolution::unbounded());
            }
            Some((z2, obj2, _)) => {
                return Ok(finish(&en, z2, obj2));
            }
            None => return Ok(LpSolution::infeasible()),
        }
    }

    Ok(finish(&en, z, obj))
}

fn finish(en: &Enumerator, z: Vec<f64>, obj: f64) -> LpSolution {
    let active = en.active_rows(&z);
    let mults = en.multipliers(&active).unwrap_or_else(|| vec![0.0; en.rows.len()]);
    let n_ub = en.rows.iter().filter(|r| matches!(r.kind, Kind::Ub(_))).count();
    let n_eq = en.rows.iter().filter(|r| matches!(r.kind, Kind::Eq(_))).count();
    let mut duals_ub = vec![0.0; n_ub];
    let mut duals_eq = vec![0.0; n_eq];
    for (row, &w) in en.rows.iter().zip(&mults) {
        match row.kind {
            Kind::Ub(r) => duals_ub[r] = w.max(0.0),
            Kind::Eq(e) => duals_eq[e] = w,
            _ => {}
        }
    }
    LpSolution {
        status: LpStatus::Optimal,
        z,
        duals_ub,
        duals_eq,
        objective: obj,
        basis: Vec::new(),
    }
}
