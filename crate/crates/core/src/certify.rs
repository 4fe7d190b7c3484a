//! Certification of equilibrium candidates.
//!
//! [`certify_ce`] measures how far a price/allocation pair is from a
//! competitive equilibrium, reporting the smallest relaxation level for
//! each of the three defining conditions separately: earning (every agent
//! earns their budget), optimality (no agent could earn the same with less
//! disutility), and supply (every chore fully assigned). Zero on all three
//! means exact equilibrium; thresholds are the caller's business.
//!
//! [`check_kkt_dual`] and [`check_kkt_redundant`] audit first-order
//! stationarity of dual-side witnesses, and [`kkt_duality_gap`] evaluates
//! the primal/dual objective mismatch that vanishes exactly at stationary
//! points.

use crate::error::{Error, Result};
use crate::market::{dot, Allocation, ChoresInstance, EquilibriumCandidate};
use serde::{Deserialize, Serialize};

/// Per-condition relaxation levels for a candidate equilibrium. Each value
/// is the smallest `eps` in `[0, 1]` making its condition hold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// Condition (1): `(1-eps) b_i <= <p, x_i> <= b_i / (1-eps)` for all i.
    pub eps_earning: f64,
    /// Condition (2): `(1-eps) <d_i, x_i> <=` cheapest disutility earning
    /// as much as `x_i` does.
    pub eps_optimality: f64,
    /// Condition (3): `1-eps <= sum_i x_ij <= 1/(1-eps)` for all j.
    pub eps_supply: f64,
}

impl Certificate {
    /// Largest of the three relaxation levels.
    pub fn max_eps(&self) -> f64 {
        self.eps_earning.max(self.eps_optimality).max(self.eps_supply)
    }

    /// All three conditions hold within `tol`.
    pub fn is_exact(&self, tol: f64) -> bool {
        self.max_eps() <= tol
    }

    /// Earning relaxed to `eps`, optimality and supply held at `exact_tol`.
    pub fn strongly_approx(&self, eps: f64, exact_tol: f64) -> bool {
        self.eps_earning <= eps && self.eps_optimality <= exact_tol && self.eps_supply <= exact_tol
    }
}

/// Smallest `eps` with `(1-eps) target <= value <= target / (1-eps)`.
/// `target` must be positive; nonpositive values force `eps = 1`.
fn band_eps(value: f64, target: f64) -> f64 {
    if value <= 0.0 {
        return 1.0;
    }
    let r = value / target;
    (1.0 - r.min(1.0 / r)).max(0.0)
}

/// Measures a candidate against the equilibrium conditions.
///
/// The optimality condition uses the closed-form best response: the
/// cheapest way to earn `E` is `E * min_j d_ij / p_j` over positively
/// priced chores, so no per-agent optimization is needed. Zero-priced
/// chores cannot contribute earnings and are excluded from the ratio.
pub fn certify_ce(inst: &ChoresInstance, cand: &EquilibriumCandidate) -> Result<Certificate> {
    let (n, m) = (inst.n(), inst.m());
    let p = &cand.prices;
    let x = &cand.allocation;
    if p.len() != m {
        return Err(Error::InvalidAllocation(format!(
            "price vector has {} entries, instance has {} chores",
            p.len(),
            m
        )));
    }
    if x.n() != n || x.m() != m {
        return Err(Error::InvalidAllocation(format!(
            "allocation is {}x{}, instance is {}x{}",
            x.n(),
            x.m(),
            n,
            m
        )));
    }
    if p.iter().any(|&v| !v.is_finite() || v < 0.0) {
        return Err(Error::InvalidAllocation("prices must be finite and nonnegative".into()));
    }
    if p.iter().all(|&v| v == 0.0) {
        return Err(Error::Domain("all prices are zero".into()));
    }

    let mut eps_earning = 0.0f64;
    let mut eps_optimality = 0.0f64;
    for i in 0..n {
        let earning = x.earning(i, p);
        eps_earning = eps_earning.max(band_eps(earning, inst.budgets()[i]));

        let dis = dot(inst.disutility_row(i), x.row(i));
        if dis > 0.0 {
            let min_ratio = (0..m)
                .filter(|&j| p[j] > 0.0)
                .map(|j| inst.d(i, j) / p[j])
                .fold(f64::INFINITY, f64::min);
            let cheapest = earning.max(0.0) * min_ratio;
            eps_optimality = eps_optimality.max((1.0 - cheapest / dis).max(0.0));
        }
    }

    let mut eps_supply = 0.0f64;
    for s in x.column_sums() {
        eps_supply = eps_supply.max(band_eps(s, 1.0));
    }

    Ok(Certificate { eps_earning, eps_optimality, eps_supply })
}

/// A dual-side stationarity witness: multipliers `beta`, prices, the
/// allocation playing the role of constraint multipliers, and the
/// multiplier `mu` of the total-price constraint (zero at equilibrium).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktWitness {
    pub beta: Vec<f64>,
    pub prices: Vec<f64>,
    pub x: Allocation,
    pub mu: f64,
}

impl KktWitness {
    /// Builds the canonical witness for a candidate equilibrium:
    /// `beta_i = b_i / <d_i, x_i>` and `mu = 0`.
    pub fn from_candidate(inst: &ChoresInstance, cand: &EquilibriumCandidate) -> Result<Self> {
        let beta = (0..inst.n())
            .map(|i| {
                let dis = dot(inst.disutility_row(i), cand.allocation.row(i));
                if dis <= 0.0 {
                    Err(Error::Domain(format!("agent {i} has zero disutility; beta undefined")))
                } else {
                    Ok(inst.budgets()[i] / dis)
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(KktWitness { beta, prices: cand.prices.clone(), x: cand.allocation.clone(), mu: 0.0 })
    }

    fn validate(&self, inst: &ChoresInstance) -> Result<()> {
        if self.beta.len() != inst.n()
            || self.prices.len() != inst.m()
            || self.x.n() != inst.n()
            || self.x.m() != inst.m()
        {
            return Err(Error::InvalidDualPoint("witness dimensions do not match instance".into()));
        }
        if self.beta.iter().any(|&b| !b.is_finite() || b <= 0.0) {
            return Err(Error::InvalidDualPoint("witness beta must be strictly positive".into()));
        }
        if !self.mu.is_finite() || self.prices.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDualPoint("witness contains non-finite values".into()));
        }
        Ok(())
    }
}

/// Violation of `lhs >= rhs`, normalized by the magnitudes involved.
fn feas_residual(lhs: f64, rhs: f64) -> f64 {
    (rhs - lhs).max(0.0) / (1.0 + lhs.abs() + rhs.abs())
}

/// Violation of `mult * (lhs - rhs) = 0`, normalized likewise.
fn comp_residual(mult: f64, lhs: f64, rhs: f64) -> f64 {
    (mult * (lhs - rhs)).abs() / (1.0 + (mult * lhs).abs() + (mult * rhs).abs())
}

/// Residuals of the stationarity conditions shared by both dual programs:
/// nonnegativity, the per-pair price bound `p_j <= d_ij beta_i` with
/// complementary slackness, and the per-agent disutility condition
/// `sum_j d_ij x_ij >= b_i / beta_i` with complementary slackness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StationarityResiduals {
    pub nonneg: f64,
    pub price_bound_feas: f64,
    pub price_bound_comp: f64,
    pub disutility_feas: f64,
    pub disutility_comp: f64,
}

impl StationarityResiduals {
    fn compute(inst: &ChoresInstance, w: &KktWitness) -> Self {
        let (n, m) = (inst.n(), inst.m());
        let mut nonneg = 0.0f64;
        for &pj in &w.prices {
            nonneg = nonneg.max(-pj);
        }
        for i in 0..n {
            for &v in w.x.row(i) {
                nonneg = nonneg.max(-v);
            }
        }
        let mut price_bound_feas = 0.0f64;
        let mut price_bound_comp = 0.0f64;
        for i in 0..n {
            for j in 0..m {
                let bound = inst.d(i, j) * w.beta[i];
                price_bound_feas = price_bound_feas.max(feas_residual(bound, w.prices[j]));
                price_bound_comp =
                    price_bound_comp.max(comp_residual(w.x.x(i, j), bound, w.prices[j]));
            }
        }
        let mut disutility_feas = 0.0f64;
        let mut disutility_comp = 0.0f64;
        for i in 0..n {
            let dis = dot(inst.disutility_row(i), w.x.row(i));
            let target = inst.budgets()[i] / w.beta[i];
            disutility_feas = disutility_feas.max(feas_residual(dis, target));
            disutility_comp = disutility_comp.max(comp_residual(w.beta[i], dis, target));
        }
        StationarityResiduals {
            nonneg,
            price_bound_feas,
            price_bound_comp,
            disutility_feas,
            disutility_comp,
        }
    }

    fn max(&self) -> f64 {
        self.nonneg
            .max(self.price_bound_feas)
            .max(self.price_bound_comp)
            .max(self.disutility_feas)
            .max(self.disutility_comp)
    }
}

/// Report of [`check_kkt_dual`]: the shared residuals plus the market
/// clearing condition `sum_i x_ij >= 1` with complementary slackness.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KktDualReport {
    pub shared: StationarityResiduals,
    pub clearing_feas: f64,
    pub clearing_comp: f64,
    pub max_residual: f64,
    pub tol: f64,
    pub passes: bool,
}

/// Checks a witness against the stationarity conditions of the unbounded
/// dual program (no total-price constraint; `w.mu` is ignored).
pub fn check_kkt_dual(inst: &ChoresInstance, w: &KktWitness, tol: f64) -> Result<KktDualReport> {
    w.validate(inst)?;
    let shared = StationarityResiduals::compute(inst, w);
    let mut clearing_feas = 0.0f64;
    let mut clearing_comp = 0.0f64;
    for (j, s) in w.x.column_sums().into_iter().enumerate() {
        clearing_feas = clearing_feas.max(feas_residual(s, 1.0));
        clearing_comp = clearing_comp.max(comp_residual(w.prices[j], s, 1.0));
    }
    let max_residual = shared.max().max(clearing_feas).max(clearing_comp);
    Ok(KktDualReport {
        shared,
        clearing_feas,
        clearing_comp,
        max_residual,
        tol,
        passes: max_residual <= tol,
    })
}

/// Report of [`check_kkt_redundant`]: the shared residuals, the total-price
/// constraint, the `mu`-shifted clearing condition, and `|mu|` itself,
/// which must vanish at any true stationary point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KktRedundantReport {
    pub shared: StationarityResiduals,
    pub price_sum: f64,
    pub shifted_clearing_feas: f64,
    pub shifted_clearing_comp: f64,
    pub mu_abs: f64,
    pub max_residual: f64,
    pub tol: f64,
    pub passes: bool,
}

/// Checks a witness against the stationarity conditions of the program
/// with the total-price constraint. The constraint is redundant at
/// stationary points, which forces its multiplier to zero; `|mu| <= tol`
/// is therefore part of the check.
pub fn check_kkt_redundant(
    inst: &ChoresInstance,
    w: &KktWitness,
    tol: f64,
) -> Result<KktRedundantReport> {
    w.validate(inst)?;
    let shared = StationarityResiduals::compute(inst, w);
    let price_total: f64 = w.prices.iter().sum();
    let budget_total = inst.budget_sum();
    let price_sum = (price_total - budget_total).abs() / (1.0 + budget_total);
    let mut shifted_clearing_feas = 0.0f64;
    let mut shifted_clearing_comp = 0.0f64;
    for (j, s) in w.x.column_sums().into_iter().enumerate() {
        shifted_clearing_feas = shifted_clearing_feas.max(feas_residual(s + w.mu, 1.0));
        shifted_clearing_comp = shifted_clearing_comp.max(comp_residual(w.prices[j], s + w.mu, 1.0));
    }
    let mu_abs = w.mu.abs();
    let max_residual = shared
        .max()
        .max(price_sum)
        .max(shifted_clearing_feas)
        .max(shifted_clearing_comp)
        .max(mu_abs);
    Ok(KktRedundantReport {
        shared,
        price_sum,
        shifted_clearing_feas,
        shifted_clearing_comp,
        mu_abs,
        max_residual,
        tol,
        passes: max_residual <= tol,
    })
}

/// Absolute difference between the primal objective
/// `sum_i b_i log <d_i, x_i>` and the dual objective
/// `sum_j p_j - sum_i b_i log beta_i + sum_i (b_i log b_i - b_i)`.
/// The two coincide exactly at stationary points.
pub fn kkt_duality_gap(inst: &ChoresInstance, w: &KktWitness) -> Result<f64> {
    w.validate(inst)?;
    let mut primal = 0.0f64;
    for i in 0..inst.n() {
        let dis = dot(inst.disutility_row(i), w.x.row(i));
        if dis <= 0.0 {
            return Err(Error::Domain(format!(
                "agent {i} has zero disutility; primal objective undefined"
            )));
        }
        primal += inst.budgets()[i] * dis.ln();
    }
    let price_total: f64 = w.prices.iter().sum();
    let mut dual = price_total;
    for (b, beta) in inst.budgets().iter().zip(&w.beta) {
        dual += -b * beta.ln() + b * b.ln() - b;
    }
    Ok((primal - dual).abs())
}
