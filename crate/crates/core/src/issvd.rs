//! Layer-by-layer integrative sparse SVD with stability selection.
//!
//! Each layer alternates between the shared sample vector `u` (scored on the
//! stacked views) and one variable vector `v_d` per view. Every update picks
//! its own λ by stability selection, keeps only the stable coordinates and
//! renormalizes. Converged layers are deflated out of every view before the
//! next one is extracted.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::rng;
use crate::stability::{self, ScoreSource, Selection};
use crate::svd::{self, frobenius_sq, norm};
use crate::types::{
    concat_views, split_vector, support, BiclusterModel, FitConfig, MultiViewData, SparseLayer,
    Standardize,
};

const ROLE_U: u64 = 0;
const ROLE_V: u64 = 1;

/// Componentwise `sign(x)·(|x| − λ/2)₊`, the minimizer of `w² − 2wx + λ|w|`.
pub fn soft_threshold(x: ArrayView1<'_, f64>, lambda: f64) -> Result<Array1<f64>> {
    if lambda.is_nan() || lambda < 0.0 {
        return Err(Error::InvalidArgument(format!("λ = {lambda} must be non-negative")));
    }
    let half = lambda / 2.0;
    Ok(x.mapv(|v| v.signum() * (v.abs() - half).max(0.0)))
}

/// Unnormalized variable update for one view: `soft(X_dᵀ u, λ)`.
pub fn update_v(x_d: ArrayView2<'_, f64>, u: ArrayView1<'_, f64>, lambda: f64) -> Result<Array1<f64>> {
    if x_d.nrows() != u.len() {
        return Err(Error::Dimension(format!(
            "view has {} rows but u has length {}",
            x_d.nrows(),
            u.len()
        )));
    }
    soft_threshold(x_d.t().dot(&u).view(), lambda)
}

/// Unnormalized sample update on the stacked data: `soft(X v, λ)`.
pub fn update_u(x: ArrayView2<'_, f64>, v: ArrayView1<'_, f64>, lambda: f64) -> Result<Array1<f64>> {
    if x.ncols() != v.len() {
        return Err(Error::Dimension(format!(
            "stacked data has {} columns but v has length {}",
            x.ncols(),
            v.len()
        )));
    }
    soft_threshold(x.dot(&v).view(), lambda)
}

/// Current `(u, v_1..v_D)` of a layer being fitted.
#[derive(Debug, Clone, PartialEq)]
pub struct Iterate {
    pub u: Array1<f64>,
    pub v: Vec<Array1<f64>>,
}

fn dist_sq(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Stopping rule: relative objective change below `merr`, or
/// `max(‖Δu‖², min_d ‖Δv_d‖²)` below `merr`.
pub fn converged(prev: &Iterate, curr: &Iterate, prev_obj: f64, curr_obj: f64, merr: f64) -> bool {
    let rel = (prev_obj - curr_obj).abs() / prev_obj.max(f64::EPSILON);
    if rel < merr {
        return true;
    }
    let du = dist_sq(&prev.u, &curr.u);
    let dv = prev
        .v
        .iter()
        .zip(&curr.v)
        .map(|(a, b)| dist_sq(a, b))
        .fold(f64::INFINITY, f64::min);
    du.max(dv) < merr
}

/// `Σ_d ‖X_d − s_d u v_dᵀ‖²_F`, expanded so no residual matrix is formed.
fn objective(views: &[Array2<f64>], norms_sq: &[f64], u: &Array1<f64>, v: &[Array1<f64>]) -> (f64, Vec<f64>) {
    let uu = u.dot(u);
    let mut total = 0.0;
    let mut scales = Vec::with_capacity(views.len());
    for ((x, &xx), v_d) in views.iter().zip(norms_sq).zip(v) {
        let s = u.dot(&x.dot(v_d));
        total += xx - 2.0 * s * s + s * s * uu * v_d.dot(v_d);
        scales.push(s);
    }
    (total, scales)
}

/// Applies the configured per-variable or per-view preprocessing.
pub fn standardize(data: &MultiViewData, mode: Standardize) -> Result<MultiViewData> {
    let center = |x: &Array2<f64>| {
        let mean = x.mean_axis(Axis(0)).expect("views have rows");
        x - &mean
    };
    let scale = |x: &Array2<f64>| {
        let sd = x.std_axis(Axis(0), 1.0);
        let mut out = x.clone();
        for (mut col, &s) in out.columns_mut().into_iter().zip(sd.iter()) {
            if s > 0.0 && s.is_finite() {
                col /= s;
            }
        }
        out
    };
    match mode {
        Standardize::None => Ok(data.clone()),
        Standardize::Center => data.map_views(center),
        Standardize::Scale => data.map_views(scale),
        Standardize::CenterScale => data.map_views(|x| scale(&center(x))),
        Standardize::Frobenius => data.map_views(|x| {
            let f = frobenius_sq(x.view()).sqrt();
            if f > 0.0 {
                x / f
            } else {
                x.clone()
            }
        }),
    }
}

/// Number of layers to extract: the smaller of the user bound and one more
/// than the largest per-view count of leading singular values whose
/// cumulative variance fraction exceeds `variance_threshold`.
pub fn select_num_biclusters(data: &MultiViewData, variance_threshold: f64, k_user: usize) -> Result<usize> {
    if !(variance_threshold > 0.0 && variance_threshold <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "variance threshold {variance_threshold} outside (0, 1]"
        )));
    }
    let mut k_a = 0;
    for view in data.views() {
        let Ok(props) = svd::proportions_of_variation(view.view()) else {
            continue;
        };
        let mut cum = 0.0;
        let mut count = props.len();
        for (i, p) in props.iter().enumerate() {
            cum += p;
            if cum > variance_threshold {
                count = i + 1;
                break;
            }
        }
        k_a = k_a.max(count);
    }
    Ok((k_a + 1).min(k_user))
}

/// Scores for the sample vector: `Σ_d X_d v_d`, subsampling a fraction of
/// columns in every view independently while keeping all samples.
struct SampleScores<'a> {
    views: &'a [Array2<f64>],
    v: &'a [Array1<f64>],
    row_mask: &'a [bool],
    fraction: f64,
}

impl SampleScores<'_> {
    fn accumulate(&self, cols: impl Fn(usize, &mut dyn FnMut(usize))) -> Array1<f64> {
        let n = self.row_mask.len();
        let mut acc = Array1::zeros(n);
        for (d, (x, v)) in self.views.iter().zip(self.v).enumerate() {
            cols(d, &mut |j| {
                let w = v[j];
                if w != 0.0 {
                    acc.scaled_add(w, &x.column(j));
                }
            });
        }
        acc.iter_mut()
            .zip(self.row_mask)
            .filter(|(_, &keep)| !keep)
            .for_each(|(a, _)| *a = 0.0);
        acc
    }
}

impl ScoreSource for SampleScores<'_> {
    fn dim(&self) -> usize {
        self.row_mask.len()
    }

    fn full_scores(&self) -> Array1<f64> {
        self.accumulate(|d, f| (0..self.views[d].ncols()).for_each(f))
    }

    fn subsample_scores(&self, rng: &mut ChaCha8Rng) -> Array1<f64> {
        let picks: Vec<Vec<usize>> = self
            .views
            .iter()
            .map(|x| {
                let p = x.ncols();
                sample(rng, p, subsample_size(p, self.fraction)).into_vec()
            })
            .collect();
        self.accumulate(|d, f| picks[d].iter().copied().for_each(f))
    }
}

/// Scores for one view's variable vector: `X_dᵀ u`, subsampling samples.
/// The same stream is used for every view, so all views see the same rows.
struct VariableScores<'a> {
    x: &'a Array2<f64>,
    u: &'a Array1<f64>,
    col_mask: &'a [bool],
    fraction: f64,
}

impl VariableScores<'_> {
    fn accumulate(&self, rows: impl Iterator<Item = usize>) -> Array1<f64> {
        let mut acc = Array1::zeros(self.x.ncols());
        for i in rows {
            let w = self.u[i];
            if w != 0.0 {
                acc.scaled_add(w, &self.x.row(i));
            }
        }
        acc.iter_mut()
            .zip(self.col_mask)
            .filter(|(_, &keep)| !keep)
            .for_each(|(a, _)| *a = 0.0);
        acc
    }
}

impl ScoreSource for VariableScores<'_> {
    fn dim(&self) -> usize {
        self.x.ncols()
    }

    fn full_scores(&self) -> Array1<f64> {
        self.accumulate(0..self.x.nrows())
    }

    fn subsample_scores(&self, rng: &mut ChaCha8Rng) -> Array1<f64> {
        let n = self.x.nrows();
        self.accumulate(sample(rng, n, subsample_size(n, self.fraction)).into_iter())
    }
}

fn subsample_size(total: usize, fraction: f64) -> usize {
    ((fraction * total as f64).ceil() as usize).clamp(1, total)
}

fn select(source: &dyn ScoreSource, budget: f64, config: &FitConfig, seed: u64) -> Result<Selection> {
    if config.pointwise {
        stability::find_lambda_pointwise(
            source,
            budget,
            config.pi_range,
            config.n_subsamples,
            config.pointwise_rule,
            seed,
        )
    } else {
        stability::find_lambda_fullpath(
            source,
            budget,
            config.pi_range.1,
            stability::DEFAULT_GRID_SIZE,
            config.n_subsamples,
            seed,
        )
    }
}

/// Soft-thresholds the full-data scores at the selected λ, zeroes every
/// coordinate outside the stable set and normalizes.
fn sparse_unit(full: &Array1<f64>, sel: &Selection) -> Result<Array1<f64>> {
    let thresholded = soft_threshold(full.view(), sel.lambda)?;
    let mut out = Array1::zeros(full.len());
    for &i in &sel.stable {
        out[i] = thresholded[i];
    }
    if norm(out.view()) == 0.0 {
        // The stable set was chosen on subsamples; fall back to the raw
        // scores if the full-data threshold removed all of it.
        for &i in &sel.stable {
            out[i] = full[i];
        }
    }
    let len = norm(out.view());
    if len > 0.0 {
        out /= len;
    }
    Ok(out)
}

enum LayerOutcome {
    Layer(SparseLayer),
    /// A stable set came back empty; extraction ends.
    Stop,
}

struct Fitter<'a> {
    config: &'a FitConfig,
    residual: Vec<Array2<f64>>,
    row_mask: Vec<bool>,
    col_masks: Vec<Vec<bool>>,
}

impl Fitter<'_> {
    fn masked_concat(&self) -> Array2<f64> {
        let views: Vec<Array2<f64>> = self
            .residual
            .iter()
            .zip(&self.col_masks)
            .map(|(x, mask)| {
                let mut x = x.clone();
                for (mut col, &keep) in x.columns_mut().into_iter().zip(mask) {
                    if !keep {
                        col.fill(0.0);
                    }
                }
                for (mut row, &keep) in x.rows_mut().into_iter().zip(&self.row_mask) {
                    if !keep {
                        row.fill(0.0);
                    }
                }
                x
            })
            .collect();
        let blocks: Vec<_> = views.iter().map(|v| v.view()).collect();
        ndarray::concatenate(Axis(1), &blocks).expect("views share rows")
    }

    fn fit_layer(&self, k: usize) -> Result<LayerOutcome> {
        let config = self.config;
        let n = self.row_mask.len();
        let dims: Vec<usize> = self.residual.iter().map(|x| x.ncols()).collect();
        let init = match svd::leading_triplet(self.masked_concat().view()) {
            Ok(t) => t,
            Err(Error::Degenerate(_)) => return Ok(LayerOutcome::Stop),
            Err(e) => return Err(e),
        };
        let norms_sq: Vec<f64> = self.residual.iter().map(|x| frobenius_sq(x.view())).collect();

        let unit = |v: Array1<f64>| {
            let l = norm(v.view());
            if l > 0.0 {
                v / l
            } else {
                v
            }
        };
        let v0: Vec<Array1<f64>> = split_vector(init.v.view(), &dims)?.into_iter().map(unit).collect();
        let mut prev = Iterate { u: init.u, v: v0 };
        let mut prev_obj = objective(&self.residual, &norms_sq, &prev.u, &prev.v).0;

        let budget_u = config.pceru * n as f64;
        let mut stable_rows = Vec::new();
        let mut stable_cols = vec![Vec::new(); dims.len()];
        let mut lambda_u = 0.0;
        let mut lambda_v = vec![0.0; dims.len()];
        let mut is_converged = false;
        let mut iterations = 0;

        for iter in 0..config.max_iters {
            iterations = iter + 1;
            let sample_src = SampleScores {
                views: &self.residual,
                v: &prev.v,
                row_mask: &self.row_mask,
                fraction: config.subsample_fraction,
            };
            let seed_u = rng::derive(config.seed, &[k as u64, iter as u64, ROLE_U]);
            let sel_u = select(&sample_src, budget_u, config, seed_u)?;
            if sel_u.is_empty() {
                log::debug!("layer {k}: empty stable sample set at iteration {iter}");
                return Ok(LayerOutcome::Stop);
            }
            let u = sparse_unit(&sample_src.full_scores(), &sel_u)?;

            let seed_v = rng::derive(config.seed, &[k as u64, iter as u64, ROLE_V]);
            let mut v = Vec::with_capacity(dims.len());
            let mut cols = Vec::with_capacity(dims.len());
            let mut lambdas = Vec::with_capacity(dims.len());
            for (d, x) in self.residual.iter().enumerate() {
                let src = VariableScores {
                    x,
                    u: &u,
                    col_mask: &self.col_masks[d],
                    fraction: config.subsample_fraction,
                };
                let budget_v = config.pcerv_for(d) * dims[d] as f64;
                let sel = select(&src, budget_v, config, seed_v)?;
                v.push(sparse_unit(&src.full_scores(), &sel)?);
                lambdas.push(sel.lambda);
                cols.push(sel.stable);
            }
            if cols.iter().all(Vec::is_empty) {
                log::debug!("layer {k}: every view has an empty stable variable set");
                return Ok(LayerOutcome::Stop);
            }

            let curr = Iterate { u, v };
            let (obj, _) = objective(&self.residual, &norms_sq, &curr.u, &curr.v);
            let done = converged(&prev, &curr, prev_obj, obj, config.merr);
            prev = curr;
            prev_obj = obj;
            stable_rows = sel_u.stable;
            stable_cols = cols;
            lambda_u = sel_u.lambda;
            lambda_v = lambdas;
            if done {
                is_converged = true;
                break;
            }
        }
        if !is_converged {
            log::warn!("layer {k} did not converge in {} iterations", config.max_iters);
        }

        let (_, scales) = objective(&self.residual, &norms_sq, &prev.u, &prev.v);
        Ok(LayerOutcome::Layer(SparseLayer {
            u: prev.u,
            v: prev.v,
            s: scales,
            stable_rows,
            stable_cols,
            converged: is_converged,
            iterations,
            lambda_u,
            lambda_v,
        }))
    }

    fn absorb(&mut self, layer: &SparseLayer) -> Result<()> {
        if !self.config.row_overlap {
            for &i in &layer.stable_rows {
                self.row_mask[i] = false;
            }
        }
        if !self.config.col_overlap {
            for (mask, cols) in self.col_masks.iter_mut().zip(&layer.stable_cols) {
                for &j in cols {
                    mask[j] = false;
                }
            }
        }
        for (d, x) in self.residual.iter_mut().enumerate() {
            *x = svd::deflate(x.view(), layer.s[d], layer.u.view(), layer.v[d].view())?;
        }
        Ok(())
    }
}

/// Fits up to `K` sparse layers, `K` being chosen by
/// [`select_num_biclusters`] and bounded by `config.k_max`.
pub fn fit(data: &MultiViewData, config: &FitConfig) -> Result<BiclusterModel> {
    config.validate(data.n_views())?;
    let data = standardize(data, config.standardize)?;
    if data.views().iter().all(|x| x.iter().all(|&v| v == 0.0)) {
        return Err(Error::Degenerate("all views are zero".into()));
    }
    let n = data.n_samples();
    let dims = data.dims();
    let k = select_num_biclusters(&data, config.variance_threshold, config.k_max)?;

    let mut model = BiclusterModel::empty(n, &dims);
    model.k_selected = k;
    let mut fitter = Fitter {
        config,
        residual: data.into_views(),
        row_mask: vec![true; n],
        col_masks: dims.iter().map(|&p| vec![true; p]).collect(),
    };
    for layer_idx in 0..k {
        let layer = match fitter.fit_layer(layer_idx)? {
            LayerOutcome::Layer(l) => l,
            LayerOutcome::Stop => break,
        };
        let label = layer_idx + 1;
        for i in support(layer.u.view()) {
            if model.row_membership[i] == 0 {
                model.row_membership[i] = label;
            }
        }
        for (membership, v) in model.col_membership.iter_mut().zip(&layer.v) {
            for j in support(v.view()) {
                if membership[j] == 0 {
                    membership[j] = label;
                }
            }
        }
        fitter.absorb(&layer)?;
        model.layers.push(layer);
    }
    Ok(model)
}

fn pearson(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> Option<f64> {
    let n = a.len();
    if n < 2 {
        return None;
    }
    let (ma, mb) = (a.mean()?, b.mean()?);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some(sab / (saa * sbb).sqrt())
}

/// Assigns every unclustered sample to the layer whose first principal
/// component (over that layer's samples and variables) correlates most
/// strongly with the sample's values on the same variables.
///
/// Layers with fewer than two samples or no variables are not targets. If
/// no layer qualifies the model is returned unchanged.
pub fn assign_unclustered(model: &BiclusterModel, data: &MultiViewData) -> Result<BiclusterModel> {
    if model.n_samples() != data.n_samples() || model.col_membership.len() != data.n_views() {
        return Err(Error::Dimension("model was not fitted on this data".into()));
    }
    let mut out = model.clone();
    let unclustered: Vec<usize> = (0..model.n_samples())
        .filter(|&i| model.row_membership[i] == 0)
        .collect();
    if unclustered.is_empty() {
        return Ok(out);
    }
    let stacked = concat_views(data);
    let dims = data.dims();

    let mut targets: Vec<(usize, Vec<usize>, Array1<f64>)> = Vec::new();
    for (k, bic) in model.biclusters().iter().enumerate() {
        let cols = bic.stacked_cols(&dims);
        if bic.rows.len() < 2 || cols.is_empty() {
            continue;
        }
        let mut sub = stacked.select(Axis(0), &bic.rows).select(Axis(1), &cols);
        let mean = sub.mean_axis(Axis(0)).expect("at least two rows");
        sub -= &mean;
        match svd::leading_triplet(sub.view()) {
            Ok(t) => targets.push((k + 1, cols, t.v)),
            Err(Error::Degenerate(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    if targets.is_empty() {
        log::warn!("no layer can receive unclustered samples; leaving them unassigned");
        return Ok(out);
    }
    for i in unclustered {
        let row = stacked.row(i);
        let mut best: Option<(usize, f64)> = None;
        for (label, cols, loading) in &targets {
            let x = row.select(Axis(0), cols);
            let Some(r) = pearson(x.view(), loading.view()) else {
                continue;
            };
            if best.is_none_or(|(_, b)| r.abs() > b) {
                best = Some((*label, r.abs()));
            }
        }
        if let Some((label, _)) = best {
            out.row_membership[i] = label;
        }
    }
    Ok(out)
}

#[cfg(test)]
fn fill_block(x: &mut Array2<f64>, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>, f: impl Fn(usize, usize) -> f64) {
    for i in rows {
        for j in cols.clone() {
            x[[i, j]] = f(i, j);
        }
    }
}
