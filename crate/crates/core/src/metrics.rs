//! Bicluster quality against planted truth.
//!
//! A bicluster's cells are `rows × cols` with columns taken in the stacked
//! index space, so one bicluster spanning two views is a single cell set.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Bicluster, BiclusterModel};

fn sorted_intersection(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut count) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}

/// Number of cells shared by two biclusters.
pub fn shared_cells(a: &Bicluster, b: &Bicluster) -> usize {
    let rows = sorted_intersection(&a.rows, &b.rows);
    let cols: usize = a
        .cols
        .iter()
        .zip(&b.cols)
        .map(|(x, y)| sorted_intersection(x, y))
        .sum();
    rows * cols
}

/// `|A ∩ B| / |A ∪ B|` over cell sets; 0 when both are empty.
pub fn jaccard(a: &Bicluster, b: &Bicluster) -> f64 {
    let inter = shared_cells(a, b);
    let union = a.n_cells() + b.n_cells() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

fn mean_best_match(from: &[Bicluster], to: &[Bicluster]) -> f64 {
    if from.is_empty() {
        return 0.0;
    }
    let total: f64 = from
        .iter()
        .map(|a| to.iter().map(|b| jaccard(a, b)).fold(0.0, f64::max))
        .sum();
    total / from.len() as f64
}

/// Mean over estimates of the best Jaccard against any true bicluster.
pub fn relevance(est: &[Bicluster], truth: &[Bicluster]) -> f64 {
    if est.is_empty() {
        log::debug!("relevance of an empty estimate set is 0");
    }
    mean_best_match(est, truth)
}

/// Mean over true biclusters of the best Jaccard against any estimate.
pub fn recovery(est: &[Bicluster], truth: &[Bicluster]) -> f64 {
    mean_best_match(truth, est)
}

/// Harmonic mean of relevance and recovery.
pub fn f_score(relevance: f64, recovery: f64) -> f64 {
    if relevance + recovery == 0.0 {
        0.0
    } else {
        2.0 * relevance * recovery / (relevance + recovery)
    }
}

/// False-positive and false-negative cell rates, both relative to the total
/// number of true cells.
///
/// Every true bicluster is paired with its best-Jaccard estimate (lowest
/// index on ties). Estimates paired with no truth count all their cells as
/// false positives.
pub fn fp_fn_rates(est: &[Bicluster], truth: &[Bicluster]) -> Result<(f64, f64)> {
    let truth_cells: usize = truth.iter().map(Bicluster::n_cells).sum();
    if truth_cells == 0 {
        return Err(Error::InvalidArgument("truth has no cells".into()));
    }
    let mut used = vec![false; est.len()];
    let (mut fp, mut fneg) = (0usize, 0usize);
    for t in truth {
        let mut best: Option<(usize, f64)> = None;
        for (e_idx, e) in est.iter().enumerate() {
            let j = jaccard(e, t);
            if best.is_none_or(|(_, b)| j > b) {
                best = Some((e_idx, j));
            }
        }
        match best {
            Some((e_idx, _)) => {
                let inter = shared_cells(&est[e_idx], t);
                fp += est[e_idx].n_cells() - inter;
                fneg += t.n_cells() - inter;
                used[e_idx] = true;
            }
            None => fneg += t.n_cells(),
        }
    }
    fp += est
        .iter()
        .zip(&used)
        .filter(|(_, &u)| !u)
        .map(|(e, _)| e.n_cells())
        .sum::<usize>();
    Ok((fp as f64 / truth_cells as f64, fneg as f64 / truth_cells as f64))
}

/// Samples whose membership is 0.
pub fn count_unclustered(model: &BiclusterModel) -> usize {
    model.row_membership.iter().filter(|&&m| m == 0).count()
}

/// Quality of one fit against planted truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub relevance: f64,
    pub recovery: f64,
    pub f_score: f64,
    pub fp_rate: f64,
    pub fn_rate: f64,
    pub unclustered_count: usize,
    pub n_estimated: usize,
    pub n_true: usize,
}

/// Scores estimated biclusters against truth.
pub fn score(est: &[Bicluster], truth: &[Bicluster], unclustered_count: usize) -> Result<MetricsReport> {
    let rel = relevance(est, truth);
    let rec = recovery(est, truth);
    let (fp_rate, fn_rate) = fp_fn_rates(est, truth)?;
    Ok(MetricsReport {
        relevance: rel,
        recovery: rec,
        f_score: f_score(rel, rec),
        fp_rate,
        fn_rate,
        unclustered_count,
        n_estimated: est.len(),
        n_true: truth.len(),
    })
}

/// Scores a fitted model's layer biclusters against truth.
pub fn evaluate(model: &BiclusterModel, truth: &[Bicluster]) -> Result<MetricsReport> {
    score(&model.biclusters(), truth, count_unclustered(model))
}
