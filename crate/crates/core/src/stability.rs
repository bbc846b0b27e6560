//! Stability selection for one sparse vector.
//!
//! A [`ScoreSource`] produces the pre-threshold scores (`X v` for the sample
//! vector, `X_dᵀ u` for a view's variable vector) on the full data and on
//! random subsamples. A coordinate is selected at `λ` when its score
//! survives soft-thresholding, i.e. `|score| > λ/2`, so supports are nested
//! in `λ` and selection probabilities are non-increasing along the path.

use ndarray::{Array1, Array2};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Bisection steps before the pointwise search gives up.
pub const MAX_BISECTION_STEPS: usize = 50;

/// Grid size used by the full-path search.
pub const DEFAULT_GRID_SIZE: usize = 100;

/// Source of pre-threshold scores for one vector of length [`Self::dim`].
pub trait ScoreSource: Sync {
    fn dim(&self) -> usize;
    fn full_scores(&self) -> Array1<f64>;
    fn subsample_scores(&self, rng: &mut ChaCha8Rng) -> Array1<f64>;
}

/// A [`ScoreSource`] backed by closures; handy for tests and benches.
pub struct FnScores<F, G> {
    pub dim: usize,
    pub full: F,
    pub sub: G,
}

impl<F, G> ScoreSource for FnScores<F, G>
where
    F: Fn() -> Array1<f64> + Sync,
    G: Fn(&mut ChaCha8Rng) -> Array1<f64> + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn full_scores(&self) -> Array1<f64> {
        (self.full)()
    }
    fn subsample_scores(&self, rng: &mut ChaCha8Rng) -> Array1<f64> {
        (self.sub)(rng)
    }
}

/// Draws `count` subsample score vectors. Subsample `i` uses the stream
/// keyed by `(seed, i)`, so the result is independent of thread scheduling.
pub fn draw_subsample_scores(source: &dyn ScoreSource, count: usize, seed: u64) -> Vec<Array1<f64>> {
    (0..count)
        .into_par_iter()
        .map(|i| source.subsample_scores(&mut rng::stream(seed, &[i as u64])))
        .collect()
}

/// Selection probabilities over a λ grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityPath {
    pub lambdas: Vec<f64>,
    /// `probs[[g, i]]`: fraction of subsamples selecting coordinate `i` at `lambdas[g]`.
    pub probs: Array2<f64>,
    /// Mean over the grid of the expected selected count.
    pub q_avg: f64,
}

impl StabilityPath {
    /// Expected number of selected coordinates at each grid point.
    pub fn counts(&self) -> Vec<f64> {
        self.probs.rows().into_iter().map(|r| r.sum()).collect()
    }

    pub fn grid_index(&self, lambda: f64) -> Option<usize> {
        let tol = 1e-12 * self.lambdas.last().copied().unwrap_or(0.0).abs().max(1.0);
        self.lambdas.iter().position(|&l| (l - lambda).abs() <= tol)
    }
}

fn selection_counts(scores: &[Array1<f64>], lambda: f64) -> Vec<u32> {
    let m = scores[0].len();
    let half = lambda / 2.0;
    let mut counts = vec![0u32; m];
    for s in scores {
        for (c, x) in counts.iter_mut().zip(s.iter()) {
            if x.abs() > half {
                *c += 1;
            }
        }
    }
    counts
}

fn probabilities_at(scores: &[Array1<f64>], lambda: f64) -> Array1<f64> {
    let total = scores.len() as f64;
    selection_counts(scores, lambda)
        .into_iter()
        .map(|c| c as f64 / total)
        .collect()
}

fn check_scores(scores: &[Array1<f64>]) -> Result<usize> {
    let Some(first) = scores.first() else {
        return Err(Error::InvalidArgument("no subsample scores".into()));
    };
    let m = first.len();
    if scores.iter().any(|s| s.len() != m) {
        return Err(Error::Dimension("subsample score vectors differ in length".into()));
    }
    Ok(m)
}

/// Selection probabilities of every coordinate at every grid value.
pub fn selection_probabilities(scores: &[Array1<f64>], lambdas: &[f64]) -> Result<StabilityPath> {
    let m = check_scores(scores)?;
    if lambdas.is_empty() {
        return Err(Error::InvalidArgument("empty λ grid".into()));
    }
    if lambdas.windows(2).any(|w| w[1] <= w[0]) || lambdas[0] < 0.0 {
        return Err(Error::InvalidArgument(
            "λ grid must be non-negative and strictly increasing".into(),
        ));
    }
    let mut probs = Array2::zeros((lambdas.len(), m));
    for (g, &lambda) in lambdas.iter().enumerate() {
        probs.row_mut(g).assign(&probabilities_at(scores, lambda));
    }
    let q_avg = probs.sum() / lambdas.len() as f64;
    Ok(StabilityPath {
        lambdas: lambdas.to_vec(),
        probs,
        q_avg,
    })
}

fn check_pi(pi_thr: f64) -> Result<()> {
    if !(pi_thr > 0.5 && pi_thr <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "selection threshold {pi_thr} must lie in (0.5, 1]"
        )));
    }
    Ok(())
}

/// Upper bound on the expected number of false selections: `q² / ((2π − 1) m)`.
pub fn expected_false_bound(q: f64, pi_thr: f64, m: usize) -> Result<f64> {
    check_pi(pi_thr)?;
    if m == 0 || q < 0.0 {
        return Err(Error::InvalidArgument(format!("need q ≥ 0 and m ≥ 1, got q={q}, m={m}")));
    }
    Ok(q * q / ((2.0 * pi_thr - 1.0) * m as f64))
}

/// Largest average selection count compatible with an error budget:
/// `sqrt(E (2π − 1) m)`.
pub fn q_max(budget: f64, pi_thr: f64, m: usize) -> Result<f64> {
    check_pi(pi_thr)?;
    if m == 0 || budget < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "need E ≥ 0 and m ≥ 1, got E={budget}, m={m}"
        )));
    }
    Ok((budget * (2.0 * pi_thr - 1.0) * m as f64).sqrt())
}

/// Threshold implied by an observed average count: `(q²/(E m) + 1) / 2`.
pub fn pointwise_threshold(q: f64, budget: f64, m: usize) -> Result<f64> {
    if budget.is_nan() || budget <= 0.0 || m == 0 {
        return Err(Error::InvalidArgument(format!(
            "need E > 0 and m ≥ 1, got E={budget}, m={m}"
        )));
    }
    Ok(0.5 * (q * q / (budget * m as f64) + 1.0))
}

/// Coordinates whose selection probability at `lambda` is at least `pi_thr`.
pub fn stable_set(path: &StabilityPath, lambda: f64, pi_thr: f64) -> Result<Vec<usize>> {
    let g = path
        .grid_index(lambda)
        .ok_or_else(|| Error::InvalidArgument(format!("λ = {lambda} is not on the grid")))?;
    Ok(stable_from_probs(path.probs.row(g).iter().copied(), pi_thr))
}

fn stable_from_probs(probs: impl Iterator<Item = f64>, pi_thr: f64) -> Vec<usize> {
    probs
        .enumerate()
        .filter(|&(_, p)| p > 0.0 && p >= pi_thr)
        .map(|(i, _)| i)
        .collect()
}

/// Outcome of a λ search.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub lambda: f64,
    /// Threshold used to extract the stable set.
    pub pi_thr: f64,
    /// Average number of selected coordinates per subsample at `lambda`.
    pub q: f64,
    pub stable: Vec<usize>,
    pub probs: Array1<f64>,
    /// False when the search ended without meeting its target (bisection
    /// exhausted or no grid value satisfied the bound).
    pub satisfied: bool,
    pub steps: usize,
}

impl Selection {
    fn empty(m: usize) -> Self {
        Self {
            lambda: 0.0,
            pi_thr: 1.0,
            q: 0.0,
            stable: Vec::new(),
            probs: Array1::zeros(m),
            satisfied: true,
            steps: 0,
        }
    }

    /// True when nothing survived; callers end bicluster extraction here.
    pub fn is_empty(&self) -> bool {
        self.stable.is_empty()
    }
}

fn max_abs(v: &Array1<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// When the pointwise bisection may stop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointwiseRule {
    /// Stop at the first λ whose implied threshold is inside the range.
    FirstInRange,
    /// Keep bisecting toward the smallest λ whose implied threshold is
    /// still inside the range, i.e. the largest admissible selection.
    #[default]
    SmallestInRange,
}

/// Pointwise error control: bisection on a single λ for a threshold
/// implied by its average selection count that falls inside `pi_range`.
///
/// The subsamples are drawn once and reused at every bisection step, which
/// makes the implied threshold monotone in λ.
pub fn find_lambda_pointwise(
    source: &dyn ScoreSource,
    budget: f64,
    pi_range: (f64, f64),
    n_subsamples: usize,
    rule: PointwiseRule,
    seed: u64,
) -> Result<Selection> {
    let (pi_min, pi_max) = pi_range;
    check_pi(pi_min)?;
    check_pi(pi_max)?;
    if pi_min > pi_max {
        return Err(Error::InvalidArgument(format!("empty range [{pi_min}, {pi_max}]")));
    }
    let m = source.dim();
    // Validates the budget up front.
    pointwise_threshold(0.0, budget, m)?;
    let top = max_abs(&source.full_scores());
    if top == 0.0 {
        return Ok(Selection::empty(m));
    }
    let scores = draw_subsample_scores(source, n_subsamples, seed);
    check_scores(&scores)?;

    let (mut lo, mut hi) = (0.0, 2.0 * top);
    let mut best: Option<(f64, f64, f64, Array1<f64>, usize)> = None;
    let mut steps = 0;
    while steps < MAX_BISECTION_STEPS {
        steps += 1;
        let lambda = 0.5 * (lo + hi);
        let probs = probabilities_at(&scores, lambda);
        let q = probs.sum();
        let pi = pointwise_threshold(q, budget, m)?;
        let miss = if pi < pi_min {
            pi_min - pi
        } else if pi > pi_max {
            pi - pi_max
        } else {
            0.0
        };
        let better = best.as_ref().is_none_or(|b| miss < b.0 || (miss == 0.0 && lambda < b.1));
        if better {
            best = Some((miss, lambda, pi, probs, steps));
        }
        if miss == 0.0 && rule == PointwiseRule::FirstInRange {
            break;
        }
        if pi > pi_max {
            lo = lambda;
        } else {
            hi = lambda;
        }
    }
    let (miss, lambda, pi, probs, _) = best.expect("at least one bisection step");
    let pi_thr = pi.clamp(pi_min, pi_max);
    Ok(Selection {
        lambda,
        pi_thr,
        q: probs.sum(),
        stable: stable_from_probs(probs.iter().copied(), pi_thr),
        probs,
        satisfied: miss == 0.0,
        steps,
    })
}

/// Full-path control: builds the stability path on a uniform grid over
/// `[0, 2·max|score|]` and picks the smallest λ whose expected selection
/// count stays within `q_max(E, π, m)`.
///
/// Supports are nested, so the union of selections over `[λ, ∞)` is the
/// selection at `λ` and the count at the region's smallest λ is its `q`.
pub fn find_lambda_fullpath(
    source: &dyn ScoreSource,
    budget: f64,
    pi_thr: f64,
    grid_size: usize,
    n_subsamples: usize,
    seed: u64,
) -> Result<Selection> {
    if grid_size < 2 {
        return Err(Error::InvalidArgument("grid_size must be at least 2".into()));
    }
    let m = source.dim();
    let bound = q_max(budget, pi_thr, m)?;
    let top = max_abs(&source.full_scores());
    if top == 0.0 {
        return Ok(Selection::empty(m));
    }
    let scores = draw_subsample_scores(source, n_subsamples, seed);
    let step = 2.0 * top / (grid_size - 1) as f64;
    let grid: Vec<f64> = (0..grid_size).map(|g| g as f64 * step).collect();
    let path = selection_probabilities(&scores, &grid)?;
    let counts = path.counts();
    let (g, satisfied) = match counts.iter().position(|&q| q <= bound) {
        Some(g) => (g, true),
        None => {
            log::warn!("no λ on the grid keeps the selection count below {bound:.3}");
            (grid_size - 1, false)
        }
    };
    let probs = path.probs.row(g).to_owned();
    Ok(Selection {
        lambda: grid[g],
        pi_thr,
        q: counts[g],
        stable: stable_from_probs(probs.iter().copied(), pi_thr),
        probs,
        satisfied,
        steps: grid_size,
    })
}
