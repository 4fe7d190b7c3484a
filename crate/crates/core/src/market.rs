//! Market model: chore instances, dual points, allocations, and the
//! objective arithmetic shared by the solvers.
//!
//! An instance has `n` agents and `m` divisible chores. One unit of each
//! chore must be done. Agent `i` incurs disutility `d[i][j]` per unit of
//! chore `j` and must earn `b[i]` at the market prices. All disutilities
//! are required to be strictly positive and all earning requirements
//! positive; instances that need "agent i cannot do chore j" should use a
//! large finite disutility instead of zero or infinity.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative feasibility tolerance for dual points, scaled by `max(1, sum b)`.
pub const FEAS_TOL: f64 = 1e-9;

/// Largest per-component Itakura-Saito value for which the quadratic lower
/// bound `(r - 1)^2 / 3 <= -ln r + r - 1` is valid: `sqrt(3) - 1 - ln(3)/2`.
pub fn is_quad_regime() -> f64 {
    3f64.sqrt() - 1.0 - 0.5 * 3f64.ln()
}

/// A Fisher market with divisible chores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawInstance", into = "RawInstance")]
pub struct ChoresInstance {
    n: usize,
    m: usize,
    /// Row-major `n x m` disutility matrix, all entries strictly positive.
    d: Vec<f64>,
    /// Per-agent earning requirements, all strictly positive.
    b: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawInstance {
    n: usize,
    m: usize,
    budgets: Vec<f64>,
    disutilities: Vec<Vec<f64>>,
}

impl TryFrom<RawInstance> for ChoresInstance {
    type Error = Error;

    fn try_from(raw: RawInstance) -> Result<Self> {
        if raw.budgets.len() != raw.n || raw.disutilities.len() != raw.n {
            return Err(Error::InvalidInstance(format!(
                "expected {} budget and disutility rows, got {} and {}",
                raw.n,
                raw.budgets.len(),
                raw.disutilities.len()
            )));
        }
        if raw.disutilities.iter().any(|row| row.len() != raw.m) {
            return Err(Error::InvalidInstance(format!(
                "every disutility row must have {} entries",
                raw.m
            )));
        }
        ChoresInstance::new(raw.disutilities, raw.budgets)
    }
}

impl From<ChoresInstance> for RawInstance {
    fn from(inst: ChoresInstance) -> Self {
        RawInstance {
            n: inst.n,
            m: inst.m,
            budgets: inst.b.clone(),
            disutilities: (0..inst.n).map(|i| inst.disutility_row(i).to_vec()).collect(),
        }
    }
}

impl ChoresInstance {
    /// Validates and builds an instance from a disutility matrix (one row
    /// per agent) and per-agent earning requirements.
    pub fn new(disutilities: Vec<Vec<f64>>, budgets: Vec<f64>) -> Result<Self> {
        let n = disutilities.len();
        if n == 0 {
            return Err(Error::InvalidInstance("need at least one agent".into()));
        }
        let m = disutilities[0].len();
        if m == 0 {
            return Err(Error::InvalidInstance("need at least one chore".into()));
        }
        if budgets.len() != n {
            return Err(Error::InvalidInstance(format!(
                "{} agents but {} budgets",
                n,
                budgets.len()
            )));
        }
        let mut d = Vec::with_capacity(n * m);
        for (i, row) in disutilities.iter().enumerate() {
            if row.len() != m {
                return Err(Error::InvalidInstance(format!(
                    "row {} has {} entries, expected {}",
                    i,
                    row.len(),
                    m
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() || v <= 0.0 {
                    return Err(Error::InvalidInstance(format!(
                        "disutility d[{i}][{j}] = {v} must be finite and > 0"
                    )));
                }
                d.push(v);
            }
        }
        for (i, &v) in budgets.iter().enumerate() {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidInstance(format!(
                    "budget b[{i}] = {v} must be finite and > 0"
                )));
            }
        }
        Ok(ChoresInstance { n, m, d, b: budgets })
    }

    /// Instance with all earning requirements equal to one.
    pub fn with_unit_budgets(disutilities: Vec<Vec<f64>>) -> Result<Self> {
        let n = disutilities.len();
        Self::new(disutilities, vec![1.0; n])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn d(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.m + j]
    }

    pub fn disutility_row(&self, i: usize) -> &[f64] {
        &self.d[i * self.m..(i + 1) * self.m]
    }

    pub fn budgets(&self) -> &[f64] {
        &self.b
    }

    pub fn budget_sum(&self) -> f64 {
        self.b.iter().sum()
    }

    pub fn min_budget(&self) -> f64 {
        self.b.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_budget(&self) -> f64 {
        self.b.iter().cloned().fold(0.0, f64::max)
    }

    pub fn max_disutility(&self) -> f64 {
        self.d.iter().cloned().fold(0.0, f64::max)
    }

    /// Disutility agent `i` incurs under allocation `x`: `<d_i, x_i>`.
    pub fn bundle_disutility(&self, x: &Allocation, i: usize) -> f64 {
        dot(self.disutility_row(i), x.row(i))
    }

    /// Objective of the dual program at a feasible point: `-sum_i b_i ln beta_i`.
    ///
    /// The constant price-sum term is dropped; see
    /// [`dual_objective_upper_bound`](Self::dual_objective_upper_bound) for
    /// the bound including it.
    pub fn dual_objective(&self, y: &DualPoint) -> f64 {
        -self
            .b
            .iter()
            .zip(&y.beta)
            .map(|(&bi, &betai)| bi * betai.ln())
            .sum::<f64>()
    }

    /// Upper bound on the full dual objective `sum_j p_j - sum_i b_i ln beta_i`
    /// over the feasible set: `(sum b) * (1 - ln(sum b) + ln(m * max d))`.
    ///
    /// The working objective [`dual_objective`](Self::dual_objective) omits
    /// the constant price sum, so it is bounded by this value minus `sum b`.
    pub fn dual_objective_upper_bound(&self) -> f64 {
        let total = self.budget_sum();
        total * (1.0 - total.ln() + (self.m as f64 * self.max_disutility()).ln())
    }

    /// Log Nash disutility welfare `sum_i b_i ln <d_i, x_i>` of an allocation.
    ///
    /// Errors when some agent has zero bundle disutility, where the log
    /// diverges.
    pub fn nash_disutility_log(&self, x: &Allocation) -> Result<f64> {
        let mut acc = 0.0;
        for i in 0..self.n {
            let du = self.bundle_disutility(x, i);
            if du <= 0.0 {
                return Err(Error::Domain(format!(
                    "agent {i} has zero bundle disutility; log welfare undefined"
                )));
            }
            acc += self.b[i] * du.ln();
        }
        Ok(acc)
    }

    /// Smallest feasible `beta` for a price vector: `beta_i = max_j p_j / d_ij`.
    ///
    /// Errors when prices are negative or all zero.
    pub fn induced_beta(&self, prices: &[f64]) -> Result<Vec<f64>> {
        if prices.len() != self.m {
            return Err(Error::Domain(format!(
                "expected {} prices, got {}",
                self.m,
                prices.len()
            )));
        }
        if prices.iter().any(|&p| !p.is_finite() || p < 0.0) {
            return Err(Error::Domain("prices must be finite and nonnegative".into()));
        }
        if prices.iter().all(|&p| p == 0.0) {
            return Err(Error::Domain(
                "all-zero prices induce beta = 0 where the dual objective diverges".into(),
            ));
        }
        Ok((0..self.n)
            .map(|i| {
                let row = self.disutility_row(i);
                prices
                    .iter()
                    .zip(row)
                    .map(|(&p, &d)| p / d)
                    .fold(0.0f64, f64::max)
            })
            .collect())
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        Ok(std::fs::write(path, self.to_json_string()?)?)
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    /// Headerless CSV disutility matrix, one row per agent. Budgets are not
    /// stored in this format; they default to one on load.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for i in 0..self.n {
            let row: Vec<String> = self.disutility_row(i).iter().map(|v| format!("{v}")).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv_str(s: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, line) in s.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let row: Result<Vec<f64>> = line
                .split(',')
                .map(|cell| {
                    cell.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
                })
                .collect();
            rows.push(row?);
        }
        Self::with_unit_budgets(rows)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        Ok(std::fs::write(path, self.to_csv_string())?)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        Self::from_csv_str(&std::fs::read_to_string(path)?)
    }
}

/// A feasible point of the dual program: `prices >= 0`, `beta > 0`,
/// `p_j <= beta_i * d_ij` for every agent-chore pair, and
/// `sum_j p_j = sum_i b_i`, all within [`FEAS_TOL`] scaled by `max(1, sum b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPoint {
    beta: Vec<f64>,
    prices: Vec<f64>,
}

impl DualPoint {
    pub fn new(inst: &ChoresInstance, beta: Vec<f64>, prices: Vec<f64>) -> Result<Self> {
        if beta.len() != inst.n() || prices.len() != inst.m() {
            return Err(Error::InvalidDualPoint(format!(
                "expected {} beta and {} price entries, got {} and {}",
                inst.n(),
                inst.m(),
                beta.len(),
                prices.len()
            )));
        }
        let tol = FEAS_TOL * inst.budget_sum().max(1.0);
        if beta.iter().any(|&v| !v.is_finite() || v <= 0.0) {
            return Err(Error::InvalidDualPoint("beta must be finite and > 0".into()));
        }
        if prices.iter().any(|&p| !p.is_finite() || p < -tol) {
            return Err(Error::InvalidDualPoint("prices must be finite and >= 0".into()));
        }
        let price_sum: f64 = prices.iter().sum();
        if (price_sum - inst.budget_sum()).abs() > tol {
            return Err(Error::InvalidDualPoint(format!(
                "price sum {} must equal total earning requirement {}",
                price_sum,
                inst.budget_sum()
            )));
        }
        for i in 0..inst.n() {
            for (j, &p) in prices.iter().enumerate() {
                if p - inst.d(i, j) * beta[i] > tol {
                    return Err(Error::InvalidDualPoint(format!(
                        "p[{j}] = {} exceeds d[{i}][{j}] * beta[{i}] = {}",
                        p,
                        inst.d(i, j) * beta[i]
                    )));
                }
            }
        }
        Ok(DualPoint { beta, prices })
    }

    /// Dual point with the smallest feasible `beta` for the given prices.
    pub fn induced(inst: &ChoresInstance, prices: Vec<f64>) -> Result<Self> {
        let beta = inst.induced_beta(&prices)?;
        Self::new(inst, beta, prices)
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }
}

/// A nonnegative `n x m` assignment of chores to agents. Column sums need
/// not be one; certification measures how far they are from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Allocation {
    n: usize,
    m: usize,
    x: Vec<f64>,
}

impl TryFrom<Vec<Vec<f64>>> for Allocation {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Allocation::new(rows)
    }
}

impl From<Allocation> for Vec<Vec<f64>> {
    fn from(a: Allocation) -> Self {
        a.rows()
    }
}

impl Allocation {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows[0].is_empty() {
            return Err(Error::InvalidAllocation("allocation must be nonempty".into()));
        }
        let m = rows[0].len();
        let mut x = Vec::with_capacity(n * m);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(Error::InvalidAllocation(format!(
                    "row {} has {} entries, expected {}",
                    i,
                    row.len(),
                    m
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidAllocation(format!(
                        "x[{i}][{j}] = {v} must be finite and >= 0"
                    )));
                }
                x.push(v);
            }
        }
        Ok(Allocation { n, m, x })
    }

    pub fn zeros(n: usize, m: usize) -> Self {
        Allocation { n, m, x: vec![0.0; n * m] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn x(&self, i: usize, j: usize) -> f64 {
        self.x[i * self.m + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.x[i * self.m + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.m..(i + 1) * self.m]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Allocation {
            n: self.n,
            m: self.m,
            x: self.x.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn column_sum(&self, j: usize) -> f64 {
        (0..self.n).map(|i| self.x(i, j)).sum()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        (0..self.m).map(|j| self.column_sum(j)).collect()
    }

    /// Money agent `i` earns at the given prices: `<p, x_i>`.
    pub fn earning(&self, i: usize, prices: &[f64]) -> f64 {
        dot(prices, self.row(i))
    }
}

/// Prices plus an allocation, the object certification consumes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCandidate", into = "RawCandidate")]
pub struct EquilibriumCandidate {
    pub prices: Vec<f64>,
    pub allocation: Allocation,
}

#[derive(Serialize, Deserialize)]
struct RawCandidate {
    prices: Vec<f64>,
    allocation: Vec<Vec<f64>>,
}

impl TryFrom<RawCandidate> for EquilibriumCandidate {
    type Error = Error;

    fn try_from(raw: RawCandidate) -> Result<Self> {
        let allocation = Allocation::new(raw.allocation)?;
        if raw.prices.len() != allocation.m() {
            return Err(Error::InvalidAllocation(format!(
                "{} prices but {} chores",
                raw.prices.len(),
                allocation.m()
            )));
        }
        Ok(EquilibriumCandidate { prices: raw.prices, allocation })
    }
}

impl From<EquilibriumCandidate> for RawCandidate {
    fn from(c: EquilibriumCandidate) -> Self {
        RawCandidate { prices: c.prices.clone(), allocation: c.allocation.rows() }
    }
}

impl EquilibriumCandidate {
    pub fn new(prices: Vec<f64>, allocation: Allocation) -> Result<Self> {
        if prices.len() != allocation.m() {
            return Err(Error::InvalidAllocation(format!(
                "{} prices but {} chores",
                prices.len(),
                allocation.m()
            )));
        }
        Ok(EquilibriumCandidate { prices, allocation })
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Itakura-Saito divergence `sum_i (-ln(y_i/x_i) + y_i/x_i - 1)`.
///
/// Errors unless both vectors are strictly positive and of equal length.
pub fn itakura_saito(y: &[f64], x: &[f64]) -> Result<f64> {
    if y.len() != x.len() {
        return Err(Error::Domain(format!(
            "length mismatch: {} vs {}",
            y.len(),
            x.len()
        )));
    }
    let mut acc = 0.0;
    for (&yi, &xi) in y.iter().zip(x) {
        if yi <= 0.0 || xi <= 0.0 {
            return Err(Error::Domain("divergence defined for positive vectors only".into()));
        }
        let r = yi / xi;
        acc += -r.ln() + r - 1.0;
    }
    Ok(acc)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&u, &v)| u * v).sum()
}
