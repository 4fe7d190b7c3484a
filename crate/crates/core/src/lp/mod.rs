//! Linear programming over nonnegative variables in the canonical form
//!
//! ```text
//! minimize    c . z
//! subject to  A_ub z <= b_ub
//!             A_eq z  = b_eq
//!             z >= 0
//! ```
//!
//! [`solve`] runs a deterministic two-phase revised simplex. Inequality
//! duals are reported as nonnegative multipliers `lambda` and equality duals
//! as free multipliers `nu` of the Lagrangian
//! `c.z + lambda.(A_ub z - b_ub) + nu.(A_eq z - b_eq)`, so at an optimum
//! `c.z = -(lambda.b_ub + nu.b_eq)` and complementary slackness holds row
//! by row.
//!
//! [`brute_force_solve`] answers the same question by enumerating candidate
//! vertices directly. It shares no code with the simplex path and exists as
//! an independent cross-check for small problems.

mod brute;
mod simplex;

pub use brute::brute_force_solve;

/// A canonical-form linear program. All matrices are dense row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub c: Vec<f64>,
    pub a_ub: Vec<Vec<f64>>,
    pub b_ub: Vec<f64>,
    pub a_eq: Vec<Vec<f64>>,
    pub b_eq: Vec<f64>,
}

impl LpProblem {
    pub fn new(c: Vec<f64>) -> Self {
        LpProblem { c, a_ub: Vec::new(), b_ub: Vec::new(), a_eq: Vec::new(), b_eq: Vec::new() }
    }

    pub fn ub_row(mut self, row: Vec<f64>, rhs: f64) -> Self {
        self.a_ub.push(row);
        self.b_ub.push(rhs);
        self
    }

    pub fn eq_row(mut self, row: Vec<f64>, rhs: f64) -> Self {
        self.a_eq.push(row);
        self.b_eq.push(rhs);
        self
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub(crate) fn validate(&self) -> Result<(), LpError> {
        let nv = self.c.len();
        if nv == 0 {
            return Err(LpError::BadProblem("no variables".into()));
        }
        if self.a_ub.len() != self.b_ub.len() || self.a_eq.len() != self.b_eq.len() {
            return Err(LpError::BadProblem("row/rhs count mismatch".into()));
        }
        for row in self.a_ub.iter().chain(&self.a_eq) {
            if row.len() != nv {
                return Err(LpError::BadProblem(format!(
                    "row has {} entries, expected {}",
                    row.len(),
                    nv
                )));
            }
        }
        let finite = self
            .c
            .iter()
            .chain(self.b_ub.iter())
            .chain(self.b_eq.iter())
            .chain(self.a_ub.iter().flatten())
            .chain(self.a_eq.iter().flatten())
            .all(|v| v.is_finite());
        if !finite {
            return Err(LpError::BadProblem("non-finite coefficient".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Solver output. For non-optimal statuses the vectors are empty and
/// `objective` is `+inf` (infeasible) or `-inf` (unbounded).
///
/// `basis` lists the basic columns of the terminating tableau, one per row:
/// values below `num_vars` are structural variables, `num_vars + r` is the
/// slack of inequality row `r`, and `num_vars + #ub + e` marks a dependent
/// equality row `e` whose artificial stayed basic at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub z: Vec<f64>,
    pub duals_ub: Vec<f64>,
    pub duals_eq: Vec<f64>,
    pub objective: f64,
    pub basis: Vec<usize>,
}

impl LpSolution {
    pub(crate) fn infeasible() -> Self {
        LpSolution {
            status: LpStatus::Infeasible,
            z: Vec::new(),
            duals_ub: Vec::new(),
            duals_eq: Vec::new(),
            objective: f64::INFINITY,
            basis: Vec::new(),
        }
    }

    pub(crate) fn unbounded() -> Self {
        LpSolution {
            status: LpStatus::Unbounded,
            z: Vec::new(),
            duals_ub: Vec::new(),
            duals_eq: Vec::new(),
            objective: f64::NEG_INFINITY,
            basis: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum LpError {
    #[error("malformed problem: {0}")]
    BadProblem(String),
    #[error("pivot limit {0} exceeded; cycling guard tripped")]
    CyclingGuard(usize),
    #[error("numerically singular basis after {0} pivots")]
    SingularBasis(usize),
}

/// Solves the program with a cold start.
pub fn solve(prob: &LpProblem) -> Result<LpSolution, LpError> {
    simplex::Simplex::build(prob)?.run(None)
}

/// Solves the program starting from a previously returned basis.
///
/// The basis must come from a problem with identical constraint rows; only
/// the objective may differ. Falls back to a cold start when the basis
/// cannot be adopted.
pub fn solve_warm(prob: &LpProblem, basis: &[usize]) -> Result<LpSolution, LpError> {
    simplex::Simplex::build(prob)?.run(Some(basis))
}

#[cfg(test)]
mod tests;
