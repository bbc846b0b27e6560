//! Integrative sparse singular value decomposition (iSSVD) biclustering for
//! multi-view data.
//!
//! Each layer is a sparse rank-one approximation `s_d · u · v_dᵀ` shared
//! across views through the sample vector `u`. Sparsity levels are chosen by
//! stability selection so that the expected number of falsely selected
//! samples and variables stays within per-comparison error budgets.

pub mod error;
pub mod io;
pub mod issvd;
pub mod metrics;
pub mod rng;
pub mod stability;
pub mod svd;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
pub use issvd::{assign_unclustered, fit, select_num_biclusters, soft_threshold};
pub use metrics::{evaluate, MetricsReport};
pub use stability::PointwiseRule;
pub use synth::{GroundTruth, Scenario};
pub use types::{
    concat_views, split_vector, Bicluster, BiclusterModel, FitConfig, MultiViewData, SparseLayer,
    Standardize,
};
