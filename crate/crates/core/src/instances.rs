//! Seeded instance generators, closed-form fixtures, and the bidding-data
//! pipeline (ordinal labels to disutilities, subsampling, noise).
//!
//! All randomness flows through [`rand_chacha::ChaCha8Rng`] seeded from the
//! caller's 64-bit seed, so a `(spec, seed)` pair reproduces the same
//! instance on any platform. Matrices fill row by row, one draw per cell.

use crate::error::{Error, Result};
use crate::market::{Allocation, ChoresInstance, EquilibriumCandidate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Exp, LogNormal, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Disutility distributions for the random suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dist {
    /// Uniform on `[0, 1)`, resampling exact zeros.
    Uniform01,
    /// `exp(Z)` with `Z` standard normal.
    Lognormal,
    /// `|Z|` with `Z` standard normal, resampled until it lands in
    /// `[1e-3, 10]` (that many standard deviations from zero).
    Truncnormal,
    /// Exponential with scale one.
    Exponential,
    /// Uniform integers in `1..=1000`.
    Randint,
}

pub const ALL_DISTS: [Dist; 5] =
    [Dist::Uniform01, Dist::Lognormal, Dist::Truncnormal, Dist::Exponential, Dist::Randint];

impl fmt::Display for Dist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dist::Uniform01 => "uniform01",
            Dist::Lognormal => "lognormal",
            Dist::Truncnormal => "truncnormal",
            Dist::Exponential => "exponential",
            Dist::Randint => "randint",
        })
    }
}

impl FromStr for Dist {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform01" => Ok(Dist::Uniform01),
            "lognormal" => Ok(Dist::Lognormal),
            "truncnormal" => Ok(Dist::Truncnormal),
            "exponential" => Ok(Dist::Exponential),
            "randint" => Ok(Dist::Randint),
            other => Err(Error::Parse(format!(
                "unknown distribution {other:?}; expected one of \
                 uniform01, lognormal, truncnormal, exponential, randint"
            ))),
        }
    }
}

/// Recipe for a square random instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenSpec {
    /// Agents and chores (square: n = m).
    pub n: usize,
    pub dist: Dist,
    pub seed: u64,
    /// Per-agent earning requirements; `None` means one per agent.
    #[serde(default)]
    pub budgets: Option<Vec<f64>>,
}

impl GenSpec {
    pub fn new(n: usize, dist: Dist, seed: u64) -> Self {
        GenSpec { n, dist, seed, budgets: None }
    }
}

fn sample_cell<R: Rng>(dist: Dist, rng: &mut R) -> f64 {
    match dist {
        Dist::Uniform01 => loop {
            let v: f64 = rng.gen();
            if v > 0.0 {
                return v;
            }
        },
        Dist::Lognormal => {
            LogNormal::new(0.0, 1.0).expect("unit parameters are valid").sample(rng)
        }
        Dist::Truncnormal => loop {
            let z: f64 = StandardNormal.sample(rng);
            let a = z.abs();
            if (1e-3..=10.0).contains(&a) {
                return a;
            }
        },
        Dist::Exponential => loop {
            let v = Exp::new(1.0).expect("unit rate is valid").sample(rng);
            if v > 0.0 {
                return v;
            }
        },
        Dist::Randint => rng.gen_range(1..=1000u32) as f64,
    }
}

/// Draws the instance described by `spec`, deterministically in its seed.
pub fn generate(spec: &GenSpec) -> Result<ChoresInstance> {
    if spec.n == 0 {
        return Err(Error::Domain("instance size must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let d: Vec<Vec<f64>> = (0..spec.n)
        .map(|_| (0..spec.n).map(|_| sample_cell(spec.dist, &mut rng)).collect())
        .collect();
    match &spec.budgets {
        Some(b) => ChoresInstance::new(d, b.clone()),
        None => ChoresInstance::with_unit_budgets(d),
    }
}

/// Two agents, one chore: disutilities 2 and 1, unit earning requirements.
/// The unique equilibrium has price 2 and splits the chore equally.
pub fn single_chore_pair() -> ChoresInstance {
    ChoresInstance::new(vec![vec![2.0], vec![1.0]], vec![1.0, 1.0])
        .expect("constants are valid")
}

/// Two agents, eight chores, uniform disutilities: the small wide family
/// used for trajectory illustrations.
pub fn wide_pair(seed: u64) -> ChoresInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d: Vec<Vec<f64>> =
        (0..2).map(|_| (0..8).map(|_| sample_cell(Dist::Uniform01, &mut rng)).collect()).collect();
    ChoresInstance::with_unit_budgets(d).expect("cells are strictly positive")
}

/// Two agents, two chores: agent 1 finds the second chore `m` times harder,
/// agent 2 is almost indifferent (`1 - eps` vs `1 + eps`). For `m >> 1` the
/// equilibrium is unique while a strongly approximate point exists with
/// prices nowhere near it; see [`extreme_ratio_equilibrium`] and
/// [`extreme_ratio_distant_point`].
pub fn extreme_ratio_pair(m: f64, eps: f64) -> Result<ChoresInstance> {
    if !(m > 1.0) || !(0.0..1.0).contains(&eps) {
        return Err(Error::Domain(format!(
            "extreme-ratio fixture needs m > 1 and eps in [0, 1); got m={m}, eps={eps}"
        )));
    }
    ChoresInstance::new(vec![vec![1.0, m], vec![1.0 - eps, 1.0 + eps]], vec![1.0, 1.0])
}

/// Closed-form equilibrium of [`extreme_ratio_pair`]: prices
/// `(2/(m+1), 2m/(m+1))`, agent 1 takes all of chore 1 plus `(m-1)/(2m)`
/// of chore 2, agent 2 takes the remaining `(m+1)/(2m)` of chore 2.
pub fn extreme_ratio_equilibrium(m: f64) -> EquilibriumCandidate {
    let prices = vec![2.0 / (m + 1.0), 2.0 * m / (m + 1.0)];
    let x = Allocation::new(vec![
        vec![1.0, (m - 1.0) / (2.0 * m)],
        vec![0.0, (m + 1.0) / (2.0 * m)],
    ])
    .expect("closed form is a valid allocation");
    EquilibriumCandidate { prices, allocation: x }
}

/// A strongly approximate point for [`extreme_ratio_pair`] at level `eps`
/// whose prices `(1 - eps, 1 + eps)` are order-one away from the
/// equilibrium prices: each agent takes one whole chore, under-earning or
/// over-earning by exactly `eps`.
pub fn extreme_ratio_distant_point(eps: f64) -> EquilibriumCandidate {
    let prices = vec![1.0 - eps, 1.0 + eps];
    let x = Allocation::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]])
        .expect("identity assignment is a valid allocation");
    EquilibriumCandidate { prices, allocation: x }
}

/// Ordinal review responses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BidLabel {
    Yes,
    Maybe,
    NoResponse,
    No,
    Conflict,
}

impl FromStr for BidLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "yes" => Ok(BidLabel::Yes),
            "maybe" => Ok(BidLabel::Maybe),
            "no_response" => Ok(BidLabel::NoResponse),
            "no" => Ok(BidLabel::No),
            "conflict" => Ok(BidLabel::Conflict),
            other => Err(Error::Parse(format!(
                "unknown bid label {other:?}; expected one of \
                 yes, maybe, no_response, no, conflict"
            ))),
        }
    }
}

/// Numeric disutility assigned to each ordinal label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BidMapping {
    pub yes: f64,
    pub maybe: f64,
    pub no_response: f64,
    pub no: f64,
    pub conflict: f64,
}

impl Default for BidMapping {
    fn default() -> Self {
        BidMapping { yes: 1.0, maybe: 3.0, no_response: 5.0, no: 7.0, conflict: 4000.0 }
    }
}

impl BidMapping {
    pub fn value(&self, label: BidLabel) -> f64 {
        match label {
            BidLabel::Yes => self.yes,
            BidLabel::Maybe => self.maybe,
            BidLabel::NoResponse => self.no_response,
            BidLabel::No => self.no,
            BidLabel::Conflict => self.conflict,
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("yes", self.yes),
            ("maybe", self.maybe),
            ("no_response", self.no_response),
            ("no", self.no),
            ("conflict", self.conflict),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Domain(format!(
                    "bid mapping value for {name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Subsampling and noise parameters for the bidding pipeline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BidSpec {
    #[serde(default)]
    pub mapping: BidMapping,
    /// Standard deviation of the additive Gaussian noise; 0 disables it.
    #[serde(default)]
    pub noise_sd: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for BidSpec {
    fn default() -> Self {
        BidSpec { mapping: BidMapping::default(), noise_sd: 0.0, seed: 0 }
    }
}

/// Floor applied after noise so disutilities stay strictly positive.
const NOISE_FLOOR: f64 = 1e-6;

/// Cuts an `n x n` market out of a members-by-papers ordinal matrix:
/// anchor on one uniformly random paper, keep the `n` papers closest to it
/// (Euclidean distance between mapped response columns, ties to the lower
/// index), then keep the `n` members with the most non-conflict responses
/// on those papers (ties to the lower index). Selected rows and columns
/// stay in their original order. Mapped values optionally get
/// `N(0, noise_sd^2)` noise, floored at `1e-6`.
pub fn subsample_bidding(
    full: &[Vec<BidLabel>],
    n: usize,
    spec: &BidSpec,
) -> Result<ChoresInstance> {
    spec.mapping.validate()?;
    if !(spec.noise_sd >= 0.0) || !spec.noise_sd.is_finite() {
        return Err(Error::Domain(format!("noise_sd must be finite and nonnegative, got {}", spec.noise_sd)));
    }
    let members = full.len();
    if members == 0 || full[0].is_empty() {
        return Err(Error::Domain("bidding matrix must be nonempty".into()));
    }
    let papers = full[0].len();
    if full.iter().any(|row| row.len() != papers) {
        return Err(Error::Domain("bidding matrix rows must have equal length".into()));
    }
    if n == 0 || n > members || n > papers {
        return Err(Error::Domain(format!(
            "subsample size {n} must lie in 1..={} members and 1..={} papers",
            members, papers
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let anchor = rng.gen_range(0..papers);

    // Papers closest to the anchor, comparing mapped response columns.
    let mut by_distance: Vec<(f64, usize)> = (0..papers)
        .map(|j| {
            let dist: f64 = (0..members)
                .map(|i| {
                    let a = spec.mapping.value(full[i][j]);
                    let b = spec.mapping.value(full[i][anchor]);
                    (a - b).powi(2)
                })
                .sum();
            (dist, j)
        })
        .collect();
    by_distance.sort_by(|a, b| a.partial_cmp(b).expect("distances are finite"));
    let mut chosen_papers: Vec<usize> = by_distance[..n].iter().map(|&(_, j)| j).collect();
    chosen_papers.sort_unstable();

    // Members with the most non-conflict responses on the chosen papers.
    let mut by_availability: Vec<(usize, usize)> = (0..members)
        .map(|i| {
            let conflicts =
                chosen_papers.iter().filter(|&&j| full[i][j] == BidLabel::Conflict).count();
            (conflicts, i)
        })
        .collect();
    by_availability.sort_unstable();
    let mut chosen_members: Vec<usize> = by_availability[..n].iter().map(|&(_, i)| i).collect();
    chosen_members.sort_unstable();

    let noise = (spec.noise_sd > 0.0)
        .then(|| Normal::new(0.0, spec.noise_sd).expect("validated standard deviation"));
    let d: Vec<Vec<f64>> = chosen_members
        .iter()
        .map(|&i| {
            chosen_papers
                .iter()
                .map(|&j| {
                    let mut v = spec.mapping.value(full[i][j]);
                    if let Some(dist) = &noise {
                        v += dist.sample(&mut rng);
                    }
                    v.max(NOISE_FLOOR)
                })
                .collect()
        })
        .collect();
    ChoresInstance::with_unit_budgets(d)
}

/// Parses a bidding matrix from CSV text: one row per member, one
/// comma-separated label per paper, no header. Blank lines are skipped.
pub fn parse_bidding_csv(text: &str) -> Result<Vec<Vec<BidLabel>>> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Result<Vec<BidLabel>> =
            line.split(',').map(|cell| cell.trim().parse()).collect();
        let row = row.map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse("bidding CSV contains no rows".into()));
    }
    let width = rows[0].len();
    if rows.iter().any(|r| r.len() != width) {
        return Err(Error::Parse("bidding CSV rows have unequal lengths".into()));
    }
    Ok(rows)
}
