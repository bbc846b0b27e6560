//! Synthetic two-view benchmarks with planted biclusters.

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::types::{Bicluster, MultiViewData};

/// Singular values of the four planted layers.
pub const PLANTED_SCALES: [f64; 4] = [27.0, 20.0, 18.0, 10.0];

/// Singular value attached to the non-signal layers of scenario 1.
pub const SCENARIO1_EPSILON: f64 = 0.3;

/// Which generator produced a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scenario {
    /// Partially clustered samples; `case` 1 and 2 are `100 × (1000 + 1000)`,
    /// case 3 is `500 × (10000 + 10000)`. View 2 is multiplied by `scalar`.
    One { case: u8, scalar: f64, sigma: f64 },
    /// Every sample belongs to one of four biclusters.
    Two { sigma: f64 },
    /// Block-diagonal integer blocks with a few atypical samples.
    Outlier,
}

impl Scenario {
    pub fn generate(&self, seed: u64) -> Result<(MultiViewData, GroundTruth)> {
        match *self {
            Scenario::One { case, scalar, sigma } => generate_scenario1(case, scalar, sigma, seed),
            Scenario::Two { sigma } => generate_scenario2(sigma, seed),
            Scenario::Outlier => generate_outlier_scenario(seed),
        }
    }
}

/// Planted biclusters plus the parameters that generated them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub scenario: Scenario,
    pub seed: u64,
    pub biclusters: Vec<Bicluster>,
    /// Noise standard deviation per view, before any view scaling.
    pub noise_sigma: Vec<f64>,
    pub scalar: f64,
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("noise sd {sigma} must be finite and ≥ 0")));
    }
    Ok(())
}

fn add_noise(x: &mut Array2<f64>, sigma: f64, rng: &mut ChaCha8Rng) {
    if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma).expect("sigma checked");
        x.mapv_inplace(|v| v + normal.sample(rng));
    }
}

/// Random disjoint groups of `size` indices out of `0..total`.
fn disjoint_groups(total: usize, groups: usize, size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..total).collect();
    idx.shuffle(rng);
    idx.chunks(size)
        .take(groups)
        .map(|c| {
            let mut g = c.to_vec();
            g.sort_unstable();
            g
        })
        .collect()
}

/// `rows × cols` factor whose first `groups.len()` columns are U(0.5, 1) on
/// their group and zero elsewhere; remaining columns are standard normal.
fn planted_factor(rows: usize, cols: usize, groups: &[Vec<usize>], rng: &mut ChaCha8Rng) -> Array2<f64> {
    let unif = Uniform::new(0.5, 1.0).expect("valid range");
    let mut f = Array2::zeros((rows, cols));
    for (k, group) in groups.iter().enumerate() {
        for &i in group {
            f[[i, k]] = unif.sample(rng);
        }
    }
    for k in groups.len()..cols {
        for i in 0..rows {
            f[[i, k]] = StandardNormal.sample(rng);
        }
    }
    f
}

fn truth_from(rows: &[Vec<usize>], cols: &[Vec<Vec<usize>>]) -> Vec<Bicluster> {
    rows.iter()
        .enumerate()
        .map(|(k, r)| Bicluster::new(r.clone(), cols.iter().map(|view| view[k].clone()).collect()))
        .collect()
}

/// Scenario 1: `X_d = U S V_dᵀ + E_d`, with four planted layers and `n − 4`
/// weak (`ε = 0.3`) dense layers. Returns `[X_1, scalar · X_2]`.
pub fn generate_scenario1(case: u8, scalar: f64, sigma: f64, seed: u64) -> Result<(MultiViewData, GroundTruth)> {
    let (n, p, rows_per, cols_per) = match case {
        1 | 2 => (100, 1000, 10, 100),
        3 => (500, 10_000, 50, 200),
        _ => return Err(Error::InvalidArgument(format!("scenario 1 has no case {case}"))),
    };
    check_sigma(sigma)?;
    if !scalar.is_finite() {
        return Err(Error::InvalidArgument(format!("scalar {scalar} must be finite")));
    }
    let k = PLANTED_SCALES.len();
    let mut rng = rng::stream(seed, &[1, case as u64]);
    let row_groups = disjoint_groups(n, k, rows_per, &mut rng);
    let u = planted_factor(n, n, &row_groups, &mut rng);
    let mut scales = Array1::from_elem(n, SCENARIO1_EPSILON);
    scales.slice_mut(ndarray::s![..k]).assign(&Array1::from(PLANTED_SCALES.to_vec()));
    let us = &u * &scales.view().insert_axis(Axis(0));

    let mut views = Vec::with_capacity(2);
    let mut col_groups = Vec::with_capacity(2);
    for _ in 0..2 {
        let groups = disjoint_groups(p, k, cols_per, &mut rng);
        let v = planted_factor(p, n, &groups, &mut rng);
        let mut x = us.dot(&v.t());
        add_noise(&mut x, sigma, &mut rng);
        views.push(x);
        col_groups.push(groups);
    }
    views[1] *= scalar;
    let truth = GroundTruth {
        scenario: Scenario::One { case, scalar, sigma },
        seed,
        biclusters: truth_from(&row_groups, &col_groups),
        noise_sigma: vec![sigma; 2],
        scalar,
    };
    Ok((MultiViewData::new(views)?, truth))
}

/// Scenario 2: four layers `U S V_dᵀ + E_d` that partition all 200 samples.
pub fn generate_scenario2(sigma: f64, seed: u64) -> Result<(MultiViewData, GroundTruth)> {
    check_sigma(sigma)?;
    let (n, p, rows_per, cols_per) = (200, 1000, 50, 100);
    let k = PLANTED_SCALES.len();
    let mut rng = rng::stream(seed, &[2]);
    let row_groups = disjoint_groups(n, k, rows_per, &mut rng);
    let u = planted_factor(n, k, &row_groups, &mut rng);
    let us = &u * &Array1::from(PLANTED_SCALES.to_vec()).view().insert_axis(Axis(0));

    let mut views = Vec::with_capacity(2);
    let mut col_groups = Vec::with_capacity(2);
    for _ in 0..2 {
        let groups = disjoint_groups(p, k, cols_per, &mut rng);
        let v = planted_factor(p, k, &groups, &mut rng);
        let mut x = us.dot(&v.t());
        add_noise(&mut x, sigma, &mut rng);
        views.push(x);
        col_groups.push(groups);
    }
    let truth = GroundTruth {
        scenario: Scenario::Two { sigma },
        seed,
        biclusters: truth_from(&row_groups, &col_groups),
        noise_sigma: vec![sigma; 2],
        scalar: 1.0,
    };
    Ok((MultiViewData::new(views)?, truth))
}

/// Outlier scenario: block-diagonal `50 × 250` integer blocks on
/// `200 × (1000 + 1000)` data. Block 1 has five rows drawn from {0, 1}
/// among rows from {1, 2}; block 4's last two samples are the constants
/// 1.1 and 1.2. Noise sd is 0.1 on view 1 and 0.15 on view 2.
pub fn generate_outlier_scenario(seed: u64) -> Result<(MultiViewData, GroundTruth)> {
    let (n, p, rows_per, cols_per) = (200, 1000, 50, 250);
    let sigmas = [0.1, 0.15];
    let mut rng = rng::stream(seed, &[3]);
    let mut views = Vec::with_capacity(2);
    for &sigma in &sigmas {
        let mut x = Array2::<f64>::zeros((n, p));
        for b in 0..4 {
            for r in 0..rows_per {
                let i = b * rows_per + r;
                for c in 0..cols_per {
                    let j = b * cols_per + c;
                    x[[i, j]] = match (b, r) {
                        (0, 0..5) => rng.random_range(0..=1) as f64,
                        (0, _) => rng.random_range(1..=2) as f64,
                        (1, _) => rng.random_range(1..=3) as f64,
                        (2, _) => rng.random_range(2..=3) as f64,
                        (3, 48) => 1.1,
                        (3, 49) => 1.2,
                        _ => rng.random_range(0..=2) as f64,
                    };
                }
            }
        }
        add_noise(&mut x, sigma, &mut rng);
        views.push(x);
    }
    let biclusters = (0..4)
        .map(|b| {
            let rows = (b * rows_per..(b + 1) * rows_per).collect();
            let cols: Vec<usize> = (b * cols_per..(b + 1) * cols_per).collect();
            Bicluster::new(rows, vec![cols.clone(), cols])
        })
        .collect();
    let truth = GroundTruth {
        scenario: Scenario::Outlier,
        seed,
        biclusters,
        noise_sigma: sigmas.to_vec(),
        scalar: 1.0,
    };
    Ok((MultiViewData::new(views)?, truth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::svd::squared_singular_values;
    use crate::types::concat_views;
    use std::collections::HashSet;

    fn assert_disjoint(truth: &GroundTruth) {
        let mut rows = HashSet::new();
        let mut cols: Vec<HashSet<usize>> = vec![HashSet::new(); 2];
        for b in &truth.biclusters {
            for &r in &b.rows {
                assert!(rows.insert(r), "row {r} in two biclusters");
            }
            for (d, c) in b.cols.iter().enumerate() {
                for &j in c {
                    assert!(cols[d].insert(j), "view {d} column {j} in two biclusters");
                }
            }
        }
    }

    /// Mean |x| on a block over mean |x| on cells outside every planted block.
    fn block_mean_ratio(x: &Array2<f64>, truth: &GroundTruth, d: usize, k: usize) -> f64 {
        let mut in_any = Array2::from_elem(x.dim(), false);
        for b in &truth.biclusters {
            for &i in &b.rows {
                for &j in &b.cols[d] {
                    in_any[[i, j]] = true;
                }
            }
        }
        let b = &truth.biclusters[k];
        let mut inside = 0.0;
        for &i in &b.rows {
            for &j in &b.cols[d] {
                inside += x[[i, j]].abs();
            }
        }
        let inside = inside / (b.rows.len() * b.cols[d].len()) as f64;
        let (mut outside, mut no) = (0.0, 0usize);
        for (v, &flag) in x.iter().zip(in_any.iter()) {
            if !flag {
                outside += v.abs();
                no += 1;
            }
        }
        inside / (outside / no as f64)
    }

    #[test]
    fn scenario1_truth_sizes() {
        let (data, truth) = generate_scenario1(1, 1.0, 0.2, 3).unwrap();
        assert_eq!(data.n_samples(), 100);
        assert_eq!(data.dims(), vec![1000, 1000]);
        assert_eq!(truth.biclusters.len(), 4);
        let rows: usize = truth.biclusters.iter().map(|b| b.rows.len()).sum();
        assert_eq!(rows, 40);
        for d in 0..2 {
            let cols: usize = truth.biclusters.iter().map(|b| b.cols[d].len()).sum();
            assert_eq!(cols, 400);
        }
        assert_disjoint(&truth);
    }

    #[test]
    fn scenario1_blocks_stand_out_without_noise() {
        // Inside a block the planted term averages s_k · 0.75 · 0.75. Off the
        // blocks only the 96 weak layers remain, a sum with sd ε·√96 whose
        // mean magnitude is ε·√96·√(2/π).
        let (data, truth) = generate_scenario1(1, 1.0, 0.0, 4).unwrap();
        let off = SCENARIO1_EPSILON * 96f64.sqrt() * (2.0 / std::f64::consts::PI).sqrt();
        for d in 0..2 {
            for (k, &s) in PLANTED_SCALES.iter().enumerate() {
                let ratio = block_mean_ratio(&data.views()[d], &truth, d, k);
                let predicted = s * 0.5625 / off;
                assert!((ratio / predicted - 1.0).abs() < 0.15, "block {k}: {ratio} vs {predicted}");
                assert!(ratio > 2.0);
            }
            assert!(block_mean_ratio(&data.views()[d], &truth, d, 0) >= 5.0);
        }
    }

    #[test]
    fn scenario1_scalar_scales_view_two_only() {
        let (a, _) = generate_scenario1(1, 1.0, 0.2, 11).unwrap();
        let (b, _) = generate_scenario1(1, 2.0, 0.2, 11).unwrap();
        assert_eq!(a.view(0), b.view(0));
        assert_eq!(&a.views()[1] * 2.0, b.views()[1]);
    }

    #[test]
    fn scenario1_rejects_unknown_case() {
        assert!(generate_scenario1(4, 1.0, 0.1, 0).is_err());
        assert!(generate_scenario1(1, 1.0, -0.1, 0).is_err());
    }

    #[test]
    fn scenario2_covers_all_samples() {
        let (data, truth) = generate_scenario2(0.1, 5).unwrap();
        assert_eq!(data.n_samples(), 200);
        let mut rows: Vec<usize> = truth.biclusters.iter().flat_map(|b| b.rows.clone()).collect();
        rows.sort_unstable();
        assert_eq!(rows, (0..200).collect::<Vec<_>>());
        for b in &truth.biclusters {
            assert_eq!(b.rows.len(), 50);
            assert!(b.cols.iter().all(|c| c.len() == 100));
        }
        assert_disjoint(&truth);
    }

    #[test]
    fn scenario2_noiseless_support_pattern() {
        let (data, truth) = generate_scenario2(0.0, 6).unwrap();
        for b in &truth.biclusters {
            for d in 0..2 {
                let x = data.view(d);
                let pattern = |i: usize| -> Vec<usize> {
                    (0..x.ncols()).filter(|&j| x[[i, j]] != 0.0).collect()
                };
                let first = pattern(b.rows[0]);
                assert_eq!(first, b.cols[d]);
                assert!(b.rows.iter().all(|&i| pattern(i) == first));
            }
        }
    }

    #[test]
    fn outlier_structure() {
        let (data, truth) = generate_outlier_scenario(0).unwrap();
        assert_eq!(truth.biclusters.len(), 4);
        for b in &truth.biclusters {
            assert_eq!(b.rows.len(), 50);
            assert!(b.cols.iter().all(|c| c.len() == 250));
        }
        assert_disjoint(&truth);
        let rows: usize = truth.biclusters.iter().map(|b| b.rows.len()).sum();
        assert_eq!(rows, 200);
        // Noise is small: off-block entries stay near zero, constant rows near 1.1 / 1.2.
        let x = data.view(0);
        assert!(x[[0, 999]].abs() < 1.0);
        assert!((x[[198, 800]] - 1.1).abs() < 0.6);
        assert!((x[[199, 900]] - 1.2).abs() < 0.6);
    }

    #[test]
    fn outlier_noiseless_values() {
        // Off-block entries are noise with sd 0.1; block entries stay within
        // their integer range widened by the same margin.
        let (data, _) = generate_outlier_scenario(1).unwrap();
        let x = data.view(0);
        for i in 0..200 {
            for j in 0..1000 {
                if i / 50 != j / 250 {
                    assert!(x[[i, j]].abs() < 0.6, "off-block ({i},{j}) = {}", x[[i, j]]);
                }
            }
        }
        for j in 0..250 {
            for i in 0..5 {
                assert!((-0.6..1.6).contains(&x[[i, j]]));
            }
            for i in 5..50 {
                assert!((0.4..2.6).contains(&x[[i, j]]));
            }
        }
    }

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(generate_scenario2(0.3, 7).unwrap(), generate_scenario2(0.3, 7).unwrap());
        assert_eq!(generate_outlier_scenario(7).unwrap(), generate_outlier_scenario(7).unwrap());
        assert_ne!(generate_scenario2(0.3, 7).unwrap().0, generate_scenario2(0.3, 8).unwrap().0);
    }

    #[test]
    fn planted_layers_dominate_noiseless_spectrum() {
        for (data, _) in [generate_scenario2(0.0, 9).unwrap(), generate_scenario1(1, 1.0, 0.0, 9).unwrap()] {
            let vals = squared_singular_values(concat_views(&data).view());
            let total: f64 = vals.iter().sum();
            let top4: f64 = vals[..4].iter().sum::<f64>() / total;
            let best_other = vals[4..].windows(4).map(|w| w.iter().sum::<f64>() / total).fold(0.0, f64::max);
            assert!(top4 > best_other, "{top4} vs {best_other}");
        }
    }
}
