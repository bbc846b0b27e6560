use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use issvd::{FitConfig, PointwiseRule, Standardize};

#[derive(Debug, Parser)]
#[command(name = "issvd", version, about = "Integrative sparse SVD biclustering for multi-view data")]
pub struct Cli {
    /// Worker threads for subsample and replicate parallelism.
    #[arg(long, global = true, env = "ISSVD_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset with planted biclusters.
    Simulate(SimulateArgs),
    /// Fit biclusters to one delimited matrix file per view.
    Bicluster(BiclusterArgs),
    /// Score a result document against a ground-truth document.
    Evaluate(EvaluateArgs),
    /// Run generate, fit and evaluate over a grid of scenario settings.
    Benchmark(BenchmarkArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScenarioKind {
    One,
    Two,
    Outlier,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub scenario: ScenarioKind,
    /// Scenario 1 case (1, 2 or 3).
    #[arg(long, default_value_t = 1)]
    pub case: u8,
    /// Multiplier applied to view 2 in scenario 1.
    #[arg(long, default_value_t = 1.0)]
    pub scalar: f64,
    /// Noise standard deviation.
    #[arg(long, default_value_t = 0.1)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Files hold a header line with column names.
    #[arg(long)]
    pub header: bool,
    /// The first field of every line is a sample label; views are aligned by label.
    #[arg(long)]
    pub row_labels: bool,
    /// Field separator; detected from the first line when omitted.
    #[arg(long, value_parser = parse_delimiter)]
    pub delimiter: Option<u8>,
}

fn parse_delimiter(s: &str) -> Result<u8, String> {
    match s {
        "tab" | "\\t" | "\t" => Ok(b'\t'),
        "comma" | "," => Ok(b','),
        _ if s.len() == 1 && s.is_ascii() => Ok(s.as_bytes()[0]),
        _ => Err(format!("delimiter must be a single ASCII character, got {s:?}")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StandardizeArg {
    #[value(alias = "false")]
    None,
    Center,
    Scale,
    #[value(alias = "true")]
    CenterScale,
    Frobenius,
}

impl From<StandardizeArg> for Standardize {
    fn from(s: StandardizeArg) -> Self {
        match s {
            StandardizeArg::None => Standardize::None,
            StandardizeArg::Center => Standardize::Center,
            StandardizeArg::Scale => Standardize::Scale,
            StandardizeArg::CenterScale => Standardize::CenterScale,
            StandardizeArg::Frobenius => Standardize::Frobenius,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleArg {
    SmallestInRange,
    FirstInRange,
}

/// Fitting flags. Omitted flags keep the library defaults.
#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// Choose λ by bisection at one point instead of over a full path.
    #[arg(long, action = ArgAction::Set, value_name = "BOOL")]
    pub pointwise: Option<bool>,
    #[arg(long, value_enum)]
    pub pointwise_rule: Option<RuleArg>,
    /// Number of subsamples per stability estimate.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Subsample fraction.
    #[arg(long)]
    pub size: Option<f64>,
    /// Selection-probability range `MIN,MAX`.
    #[arg(long, value_delimiter = ',', value_name = "MIN,MAX")]
    pub ssthr: Option<Vec<f64>>,
    /// Upper bound on the number of biclusters.
    #[arg(long)]
    pub nbicluster: Option<usize>,
    /// Cumulative variance fraction that bounds the number of biclusters.
    #[arg(long)]
    pub variance_threshold: Option<f64>,
    /// Leave samples outside every bicluster unassigned.
    #[arg(long, action = ArgAction::Set, value_name = "BOOL", default_value_t = true)]
    pub rows_nc: bool,
    /// Leave variables outside every bicluster unassigned (only `true` is supported).
    #[arg(long, action = ArgAction::Set, value_name = "BOOL", default_value_t = true)]
    pub cols_nc: bool,
    #[arg(long, action = ArgAction::Set, value_name = "BOOL")]
    pub row_overlap: Option<bool>,
    #[arg(long, action = ArgAction::Set, value_name = "BOOL")]
    pub col_overlap: Option<bool>,
    /// Per-comparison error rate for samples.
    #[arg(long)]
    pub pceru: Option<f64>,
    /// Per-comparison error rate for variables, one value or one per view.
    #[arg(long, value_delimiter = ',')]
    pub pcerv: Option<Vec<f64>>,
    /// Convergence tolerance.
    #[arg(long)]
    pub merr: Option<f64>,
    /// Maximum alternations per layer.
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long, value_enum)]
    pub standr: Option<StandardizeArg>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl FitArgs {
    pub fn to_config(&self) -> anyhow::Result<FitConfig> {
        if !self.cols_nc {
            anyhow::bail!("--cols-nc false is not supported; only samples can be assigned");
        }
        let mut c = FitConfig::default();
        if let Some(v) = self.pointwise {
            c.pointwise = v;
        }
        if let Some(r) = self.pointwise_rule {
            c.pointwise_rule = match r {
                RuleArg::SmallestInRange => PointwiseRule::SmallestInRange,
                RuleArg::FirstInRange => PointwiseRule::FirstInRange,
            };
        }
        if let Some(v) = self.steps {
            c.n_subsamples = v;
        }
        if let Some(v) = self.size {
            c.subsample_fraction = v;
        }
        if let Some(v) = &self.ssthr {
            let [lo, hi] = v[..] else {
                anyhow::bail!("--ssthr takes two values, got {}", v.len());
            };
            c.pi_range = (lo, hi);
        }
        if let Some(v) = self.nbicluster {
            c.k_max = v;
        }
        if let Some(v) = self.variance_threshold {
            c.variance_threshold = v;
        }
        if let Some(v) = self.row_overlap {
            c.row_overlap = v;
        }
        if let Some(v) = self.col_overlap {
            c.col_overlap = v;
        }
        if let Some(v) = self.pceru {
            c.pceru = v;
        }
        if let Some(v) = &self.pcerv {
            c.pcerv = v.clone();
        }
        if let Some(v) = self.merr {
            c.merr = v;
        }
        if let Some(v) = self.iters {
            c.max_iters = v;
        }
        if let Some(v) = self.standr {
            c.standardize = v.into();
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        Ok(c)
    }
}

#[derive(Debug, Args)]
pub struct BiclusterArgs {
    /// One matrix file per view; rows are samples.
    #[arg(required = true)]
    pub views: Vec<PathBuf>,
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub fit: FitArgs,
    /// Result document path.
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub result: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    /// Metrics document path; printed to stdout when omitted.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[arg(long, value_enum)]
    pub scenario: ScenarioKind,
    /// Scenario 1 cases to run.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub case: Vec<u8>,
    /// View 2 multipliers for scenario 1.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub scalar: Vec<f64>,
    /// Noise standard deviations.
    #[arg(long, value_delimiter = ',', default_value = "0.1")]
    pub sigma: Vec<f64>,
    /// Monte-Carlo replicates per grid cell.
    #[arg(long, default_value_t = 50)]
    pub replicates: usize,
    /// Base seed from which replicate seeds are derived.
    #[arg(long, default_value_t = 0)]
    pub seed_base: u64,
    #[command(flatten)]
    pub fit: FitArgs,
    /// Directory for `summary.csv` and `replicates.csv`.
    #[arg(long)]
    pub out_dir: PathBuf,
}
