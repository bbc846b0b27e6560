//! Domain types shared across the crate.
//!
//! Indices are 0-based everywhere in the library. Matrices are dense
//! `ndarray` arrays with samples in rows and variables in columns.

use ndarray::{concatenate, s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stability::PointwiseRule;

/// `D` sample-aligned views. Every view has the same `n` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewData {
    views: Vec<Array2<f64>>,
    sample_ids: Option<Vec<String>>,
    view_names: Option<Vec<String>>,
}

impl MultiViewData {
    pub fn new(views: Vec<Array2<f64>>) -> Result<Self> {
        if views.is_empty() {
            return Err(Error::Dimension("at least one view is required".into()));
        }
        let n = views[0].nrows();
        if n == 0 {
            return Err(Error::Dimension("views must have at least one row".into()));
        }
        for (d, view) in views.iter().enumerate() {
            if view.nrows() != n {
                return Err(Error::Dimension(format!(
                    "view {d} has {} rows, expected {n}",
                    view.nrows()
                )));
            }
            if view.ncols() == 0 {
                return Err(Error::Dimension(format!("view {d} has no columns")));
            }
            if let Some(((row, col), _)) = view.indexed_iter().find(|(_, x)| !x.is_finite()) {
                return Err(Error::NonFinite { view: d, row, col });
            }
        }
        Ok(Self {
            views,
            sample_ids: None,
            view_names: None,
        })
    }

    pub fn with_sample_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.n_samples() {
            return Err(Error::Dimension(format!(
                "{} sample ids for {} samples",
                ids.len(),
                self.n_samples()
            )));
        }
        self.sample_ids = Some(ids);
        Ok(self)
    }

    pub fn with_view_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_views() {
            return Err(Error::Dimension(format!(
                "{} view names for {} views",
                names.len(),
                self.n_views()
            )));
        }
        self.view_names = Some(names);
        Ok(self)
    }

    pub fn n_samples(&self) -> usize {
        self.views[0].nrows()
    }

    pub fn n_views(&self) -> usize {
        self.views.len()
    }

    /// Column count of every view, in view order.
    pub fn dims(&self) -> Vec<usize> {
        self.views.iter().map(|v| v.ncols()).collect()
    }

    pub fn total_columns(&self) -> usize {
        self.views.iter().map(|v| v.ncols()).sum()
    }

    pub fn view(&self, d: usize) -> ArrayView2<'_, f64> {
        self.views[d].view()
    }

    pub fn views(&self) -> &[Array2<f64>] {
        &self.views
    }

    pub fn into_views(self) -> Vec<Array2<f64>> {
        self.views
    }

    pub fn sample_ids(&self) -> Option<&[String]> {
        self.sample_ids.as_deref()
    }

    pub fn view_names(&self) -> Option<&[String]> {
        self.view_names.as_deref()
    }

    /// Replaces the matrices while keeping labels. Shapes must match.
    pub(crate) fn map_views(&self, f: impl Fn(&Array2<f64>) -> Array2<f64>) -> Result<Self> {
        let views = self.views.iter().map(f).collect();
        let mut out = Self::new(views)?;
        out.sample_ids = self.sample_ids.clone();
        out.view_names = self.view_names.clone();
        Ok(out)
    }
}

/// Stacks the views column-wise; block `d` starts at `sum(dims[..d])`.
pub fn concat_views(data: &MultiViewData) -> Array2<f64> {
    let blocks: Vec<ArrayView2<'_, f64>> = data.views.iter().map(|v| v.view()).collect();
    concatenate(Axis(1), &blocks).expect("views share the row count")
}

/// Splits a stacked vector back into per-view blocks.
pub fn split_vector(v: ArrayView1<'_, f64>, dims: &[usize]) -> Result<Vec<Array1<f64>>> {
    let total: usize = dims.iter().sum();
    if v.len() != total {
        return Err(Error::Dimension(format!(
            "vector of length {} cannot be split into blocks summing to {total}",
            v.len()
        )));
    }
    let mut offset = 0;
    Ok(dims
        .iter()
        .map(|&p| {
            let block = v.slice(s![offset..offset + p]).to_owned();
            offset += p;
            block
        })
        .collect())
}

/// Inverse of [`split_vector`].
pub fn concat_vectors(blocks: &[Array1<f64>]) -> Array1<f64> {
    let views: Vec<ArrayView1<'_, f64>> = blocks.iter().map(|b| b.view()).collect();
    concatenate(Axis(0), &views).expect("1-d blocks always concatenate")
}

/// One bicluster: a sample set shared by all views and a variable set per view.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Bicluster {
    pub rows: Vec<usize>,
    pub cols: Vec<Vec<usize>>,
}

impl Bicluster {
    pub fn new(mut rows: Vec<usize>, cols: Vec<Vec<usize>>) -> Self {
        rows.sort_unstable();
        rows.dedup();
        let cols = cols
            .into_iter()
            .map(|mut c| {
                c.sort_unstable();
                c.dedup();
                c
            })
            .collect();
        Self { rows, cols }
    }

    /// Number of columns over all views.
    pub fn n_cols(&self) -> usize {
        self.cols.iter().map(Vec::len).sum()
    }

    pub fn n_cells(&self) -> usize {
        self.rows.len() * self.n_cols()
    }

    pub fn is_empty(&self) -> bool {
        self.n_cells() == 0
    }

    /// Column indices in the stacked space given per-view widths.
    pub fn stacked_cols(&self, dims: &[usize]) -> Vec<usize> {
        let mut offset = 0;
        let mut out = Vec::with_capacity(self.n_cols());
        for (d, cols) in self.cols.iter().enumerate() {
            out.extend(cols.iter().map(|&c| c + offset));
            offset += dims.get(d).copied().unwrap_or(0);
        }
        out
    }
}

/// One sparse rank-one layer fitted to all views.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseLayer {
    pub u: Array1<f64>,
    pub v: Vec<Array1<f64>>,
    /// Per-view scale `uᵀ X_d v_d`; may be negative.
    pub s: Vec<f64>,
    pub stable_rows: Vec<usize>,
    pub stable_cols: Vec<Vec<usize>>,
    pub converged: bool,
    pub iterations: usize,
    pub lambda_u: f64,
    pub lambda_v: Vec<f64>,
}

impl SparseLayer {
    pub fn row_support(&self) -> Vec<usize> {
        support(self.u.view())
    }

    pub fn col_support(&self) -> Vec<Vec<usize>> {
        self.v.iter().map(|v| support(v.view())).collect()
    }

    pub fn bicluster(&self) -> Bicluster {
        Bicluster {
            rows: self.row_support(),
            cols: self.col_support(),
        }
    }
}

pub(crate) fn support(v: ArrayView1<'_, f64>) -> Vec<usize> {
    v.iter()
        .enumerate()
        .filter(|(_, x)| **x != 0.0)
        .map(|(i, _)| i)
        .collect()
}

/// Fitted layers plus membership vectors. Membership 0 means unclustered;
/// `k > 0` refers to `layers[k - 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiclusterModel {
    pub layers: Vec<SparseLayer>,
    pub row_membership: Vec<usize>,
    pub col_membership: Vec<Vec<usize>>,
    /// Number of layers requested after bicluster-count selection.
    pub k_selected: usize,
}

impl BiclusterModel {
    pub fn empty(n: usize, dims: &[usize]) -> Self {
        Self {
            layers: Vec::new(),
            row_membership: vec![0; n],
            col_membership: dims.iter().map(|&p| vec![0; p]).collect(),
            k_selected: 0,
        }
    }

    pub fn k_detected(&self) -> usize {
        self.layers.len()
    }

    pub fn n_samples(&self) -> usize {
        self.row_membership.len()
    }

    pub fn biclusters(&self) -> Vec<Bicluster> {
        self.layers.iter().map(SparseLayer::bicluster).collect()
    }

    /// Biclusters read from the membership vectors. Differs from
    /// [`Self::biclusters`] after unclustered samples have been assigned.
    pub fn membership_biclusters(&self) -> Vec<Bicluster> {
        (1..=self.layers.len())
            .map(|k| Bicluster {
                rows: members(&self.row_membership, k),
                cols: self.col_membership.iter().map(|c| members(c, k)).collect(),
            })
            .collect()
    }
}

fn members(labels: &[usize], k: usize) -> Vec<usize> {
    labels
        .iter()
        .enumerate()
        .filter(|(_, &l)| l == k)
        .map(|(i, _)| i)
        .collect()
}

/// Per-variable preprocessing applied to every view before fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Standardize {
    #[default]
    None,
    Center,
    Scale,
    CenterScale,
    /// Each view divided by its Frobenius norm.
    Frobenius,
}

/// Fitting parameters. Defaults follow the simulation settings of the method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    /// Upper bound on the number of layers (user-specified `K`).
    pub k_max: usize,
    /// Cumulative variance fraction used to bound `K` from the spectra.
    pub variance_threshold: f64,
    /// Per-comparison error rate for the sample vector.
    pub pceru: f64,
    /// Per-comparison error rate per view; a single value applies to all views.
    pub pcerv: Vec<f64>,
    pub pi_range: (f64, f64),
    pub subsample_fraction: f64,
    pub n_subsamples: usize,
    /// Bisection on a single λ instead of computing the full stability path.
    pub pointwise: bool,
    /// Stopping rule of the pointwise bisection.
    pub pointwise_rule: PointwiseRule,
    pub standardize: Standardize,
    pub row_overlap: bool,
    pub col_overlap: bool,
    pub merr: f64,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            k_max: 5,
            variance_threshold: 0.75,
            pceru: 0.1,
            pcerv: vec![0.1],
            pi_range: (0.6, 0.8),
            subsample_fraction: 0.5,
            n_subsamples: 100,
            pointwise: true,
            pointwise_rule: PointwiseRule::SmallestInRange,
            standardize: Standardize::None,
            row_overlap: false,
            col_overlap: false,
            merr: 1e-4,
            max_iters: 100,
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self, n_views: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.k_max == 0 {
            return bad("k_max must be positive".into());
        }
        if !(self.variance_threshold > 0.0 && self.variance_threshold <= 1.0) {
            return bad(format!(
                "variance_threshold {} outside (0, 1]",
                self.variance_threshold
            ));
        }
        let (lo, hi) = self.pi_range;
        if !(lo > 0.5 && lo <= hi && hi <= 1.0) {
            return bad(format!("pi_range [{lo}, {hi}] must lie in (0.5, 1]"));
        }
        if !(self.subsample_fraction > 0.0 && self.subsample_fraction < 1.0) {
            return bad(format!(
                "subsample_fraction {} outside (0, 1)",
                self.subsample_fraction
            ));
        }
        if self.n_subsamples == 0 {
            return bad("n_subsamples must be positive".into());
        }
        if self.max_iters == 0 {
            return bad("max_iters must be positive".into());
        }
        if !(self.merr > 0.0 && self.merr.is_finite()) {
            return bad(format!("merr {} must be positive", self.merr));
        }
        if !(self.pceru > 0.0 && self.pceru.is_finite()) {
            return bad(format!("pceru {} must be positive", self.pceru));
        }
        if self.pcerv.len() != 1 && self.pcerv.len() != n_views {
            return bad(format!(
                "pcerv has {} entries for {n_views} views",
                self.pcerv.len()
            ));
        }
        if let Some(r) = self.pcerv.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
            return bad(format!("pcerv entry {r} must be positive"));
        }
        Ok(())
    }

    pub fn pcerv_for(&self, view: usize) -> f64 {
        if self.pcerv.len() == 1 {
            self.pcerv[0]
        } else {
            self.pcerv[view]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn data(views: Vec<Array2<f64>>) -> MultiViewData {
        MultiViewData::new(views).unwrap()
    }

    #[test]
    fn concat_two_column_views() {
        let d = data(vec![array![[1.0], [2.0]], array![[3.0], [4.0]]]);
        assert_eq!(concat_views(&d), array![[1.0, 3.0], [2.0, 4.0]]);
    }

    #[test]
    fn concat_single_view_is_identity() {
        let x = array![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]];
        assert_eq!(concat_views(&data(vec![x.clone()])), x);
    }

    #[test]
    fn concat_three_views_block_offsets() {
        let dims = [2usize, 3, 1];
        let views: Vec<Array2<f64>> = dims
            .iter()
            .enumerate()
            .map(|(d, &p)| Array2::from_shape_fn((4, p), |(i, j)| (100 * d + 10 * i + j) as f64))
            .collect();
        let x = concat_views(&data(views.clone()));
        assert_eq!(x.dim(), (4, 6));
        assert_eq!(x[[0, 5]], views[2][[0, 0]]);
        let mut offset = 0;
        for (d, v) in views.iter().enumerate() {
            for ((i, j), val) in v.indexed_iter() {
                assert_eq!(x[[i, offset + j]], *val, "view {d} ({i},{j})");
            }
            offset += dims[d];
        }
    }

    #[test]
    fn split_simple() {
        let parts = split_vector(array![1.0, 2.0, 3.0].view(), &[2, 1]).unwrap();
        assert_eq!(parts, vec![array![1.0, 2.0], array![3.0]]);
    }

    #[test]
    fn split_with_empty_block_matches_concat() {
        let v = array![1.0, 2.0, 3.0];
        let parts = split_vector(v.view(), &[0, 3]).unwrap();
        assert_eq!(parts[0].len(), 0);
        assert_eq!(parts[1], v);
        assert_eq!(concat_vectors(&parts), v);
    }

    #[test]
    fn split_length_mismatch() {
        let err = split_vector(array![1.0, 2.0].view(), &[2, 1]).unwrap_err();
        assert!(matches!(err, Error::Dimension(_)));
    }

    #[test]
    fn rejects_non_finite() {
        let err = MultiViewData::new(vec![array![[1.0, f64::NAN]]]).unwrap_err();
        assert_eq!(err, Error::NonFinite { view: 0, row: 0, col: 1 });
        let err = MultiViewData::new(vec![array![[1.0]], array![[f64::INFINITY]]]).unwrap_err();
        assert_eq!(err, Error::NonFinite { view: 1, row: 0, col: 0 });
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(MultiViewData::new(vec![]).is_err());
        assert!(MultiViewData::new(vec![Array2::zeros((3, 0))]).is_err());
        assert!(MultiViewData::new(vec![Array2::zeros((3, 2)), Array2::zeros((2, 2))]).is_err());
        let d = data(vec![Array2::zeros((2, 2))]);
        assert!(d.clone().with_sample_ids(vec!["a".into()]).is_err());
        assert!(d.with_view_names(vec!["a".into(), "b".into()]).is_err());
    }

    #[test]
    fn default_config_is_valid() {
        let c = FitConfig::default();
        c.validate(2).unwrap();
        assert_eq!(c.n_subsamples, 100);
        assert_eq!(c.subsample_fraction, 0.5);
        assert_eq!(c.pi_range, (0.6, 0.8));
        assert_eq!(c.merr, 1e-4);
        assert_eq!(c.max_iters, 100);
        assert_eq!(c.pcerv_for(1), 0.1);
    }

    #[test]
    fn config_rejects_out_of_range() {
        let base = FitConfig::default();
        let cases = [
            FitConfig { pi_range: (0.5, 0.8), ..base.clone() },
            FitConfig { pi_range: (0.9, 0.8), ..base.clone() },
            FitConfig { subsample_fraction: 1.0, ..base.clone() },
            FitConfig { k_max: 0, ..base.clone() },
            FitConfig { pcerv: vec![0.1, 0.1, 0.1], ..base.clone() },
            FitConfig { variance_threshold: 0.0, ..base.clone() },
        ];
        for c in cases {
            assert!(c.validate(2).is_err(), "{c:?}");
        }
    }

    #[test]
    fn stacked_cols_offsets() {
        let b = Bicluster::new(vec![1], vec![vec![0, 2], vec![1]]);
        assert_eq!(b.stacked_cols(&[3, 4]), vec![0, 2, 4]);
        assert_eq!(b.n_cells(), 3);
    }

    proptest! {
        #[test]
        fn split_concat_round_trip(dims in prop::collection::vec(0usize..6, 1..5), seed in any::<u64>()) {
            let total: usize = dims.iter().sum();
            let v = Array1::from_shape_fn(total, |i| (seed.wrapping_mul(i as u64 + 1) % 1000) as f64);
            let parts = split_vector(v.view(), &dims).unwrap();
            prop_assert_eq!(parts.len(), dims.len());
            for (p, &d) in parts.iter().zip(&dims) {
                prop_assert_eq!(p.len(), d);
            }
            prop_assert_eq!(concat_vectors(&parts), v);
        }
    }
}
