//! Flag definitions. Every value is optional at parse time so a `--config`
//! file can fill what the command line leaves out; defaults are applied last.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use regscore::binarize::{LabelSource, XiConfig};
use regscore::pipeline::FitConfig;
use regscore::ridge::RidgeConfig;
use regscore::scorecard::Format;
use regscore::solvers::{SolverConfig, SolverKind};

use crate::CliError;

#[derive(Parser, Debug)]
#[command(name = "regscore", version, about = "Sparse interpretable scoring systems for regression")]
pub struct Cli {
    /// JSON file of settings, keyed like the flags with `_` for `-`. An
    /// artifact holding a `run_config` object is accepted too. Flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Seed for every random draw.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fit a score card: CSV + schema -> model JSON and a rendered card.
    Fit(FitArgs),
    /// Score a CSV with a fitted model.
    Predict(PredictArgs),
    /// Metrics of a fitted model on a labelled CSV.
    Eval(EvalArgs),
    /// Stratified cross-validation report.
    Cv(CvArgs),
    /// Cross-validated metrics across model sizes.
    Sweep(SweepArgs),
    /// Generate a planted sparse benchmark.
    Synth(SynthArgs),
    /// Apply the top-k gate and personalized prediction to an embeddings file.
    Gate(GateArgs),
    /// Check solvers and kernels against independent oracles.
    Verify(VerifyArgs),
}

#[derive(ValueEnum, Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum SolverArg {
    Beam,
    Bnb,
}

#[derive(ValueEnum, Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum XiArg {
    Mdlp,
    Tertile,
}

#[derive(ValueEnum, Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum LabelArg {
    /// `y > threshold`.
    Threshold,
    /// Target quartile index.
    Quartiles,
}

#[derive(ValueEnum, Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum FormatArg {
    Text,
    Markdown,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Text => Format::Text,
            FormatArg::Markdown => Format::Markdown,
            FormatArg::Json => Format::Json,
        }
    }
}

/// Input table and its schema file.
#[derive(Args, Serialize, Deserialize, Default, Clone, Debug)]
#[serde(default)]
pub struct DataArgs {
    /// CSV with a header row.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Schema JSON: `{"target": ..., "features": [{"name", "kind", "categories"?}]}`.
    #[arg(long)]
    pub schema: Option<PathBuf>,
}

/// Binning, screening and solver settings.
#[derive(Args, Serialize, Deserialize, Default, Clone, Debug)]
#[serde(default)]
pub struct ModelArgs {
    /// Solver [default: beam].
    #[arg(long, value_enum)]
    pub solver: Option<SolverArg>,
    /// Maximum number of nonzero points [default: 5].
    #[arg(long)]
    pub k: Option<usize>,
    /// Beam width [default: 10].
    #[arg(long)]
    pub beam: Option<usize>,
    /// Ridge penalty [default: 1e-8].
    #[arg(long)]
    pub lambda2: Option<f64>,
    /// Discretization of continuous features [default: mdlp].
    #[arg(long, value_enum)]
    pub xi: Option<XiArg>,
    /// Class labels supervising mdlp [default: threshold].
    #[arg(long, value_enum)]
    pub label_source: Option<LabelArg>,
    /// Positive iff the target exceeds this [default: 25].
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Significance level of the F-test screen on continuous features [default: 0.05].
    #[arg(long)]
    pub select_alpha: Option<f64>,
    /// Skip the F-test screen.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub no_select: Option<bool>,
    /// Branch-and-bound node budget [default: 1000000].
    #[arg(long)]
    pub node_budget: Option<usize>,
}

impl ModelArgs {
    pub fn resolve(&mut self) {
        self.solver.get_or_insert(SolverArg::Beam);
        self.k.get_or_insert(5);
        self.beam.get_or_insert(10);
        self.lambda2.get_or_insert(1e-8);
        self.xi.get_or_insert(XiArg::Mdlp);
        self.label_source.get_or_insert(LabelArg::Threshold);
        self.threshold.get_or_insert(25.0);
        self.select_alpha.get_or_insert(0.05);
        self.no_select.get_or_insert(false);
        self.node_budget.get_or_insert(1_000_000);
    }

    /// Library configuration; call after [`ModelArgs::resolve`].
    pub fn fit_config(&self) -> Result<FitConfig, CliError> {
        let threshold = self.threshold.expect("resolved");
        if !threshold.is_finite() {
            return Err(CliError::Usage("--threshold must be finite".into()));
        }
        let k = self.k.expect("resolved");
        let beam = self.beam.expect("resolved");
        if beam == 0 {
            return Err(CliError::Usage("--beam must be at least 1".into()));
        }
        let ridge = RidgeConfig::new(self.lambda2.expect("resolved")).map_err(|e| CliError::Usage(e.to_string()))?;
        let alpha = self.select_alpha.expect("resolved");
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(CliError::Usage("--select-alpha must lie in (0, 1)".into()));
        }
        let xi = match self.xi.expect("resolved") {
            XiArg::Tertile => XiConfig::tertile(),
            XiArg::Mdlp => XiConfig {
                label_source: Some(match self.label_source.expect("resolved") {
                    LabelArg::Threshold => LabelSource::Threshold { threshold },
                    LabelArg::Quartiles => LabelSource::Quartiles,
                }),
                ..XiConfig::mdlp(threshold)
            },
        };
        Ok(FitConfig {
            xi,
            select_alpha: (!self.no_select.expect("resolved")).then_some(alpha),
            solver: SolverConfig {
                solver: match self.solver.expect("resolved") {
                    SolverArg::Beam => SolverKind::Beam,
                    SolverArg::Bnb => SolverKind::Bnb,
                },
                k,
                beam_width: beam,
                ridge,
                node_budget: self.node_budget.expect("resolved"),
                ..SolverConfig::default()
            },
            threshold: Some(threshold),
        })
    }
}

#[derive(Args, Serialize, Deserialize, Default, Clone, Debug)]
#[serde(default)]
pub struct FoldArgs {
    /// Number of folds [default: 5].
    #[arg(long)]
    pub folds: Option<usize>,
    /// Target bins used for stratification [default: 4].
    #[arg(long)]
    pub strat_bins: Option<usize>,
}

impl FoldArgs {
    pub fn resolve(&mut self) {
        self.folds.get_or_insert(5);
        self.strat_bins.get_or_insert(4);
    }
}

#[derive(Args, Serialize, Deserialize, Default, Clone, Debug)]
#[serde(default)]
pub struct FitArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: DataArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Model JSON path [default: model.json].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Rendering printed to stdout [default: text].
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Also write the rendered card here.
    #[arg(long)]
    pub card: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Default, Clone, Debug)]
#[serde(default)]
pub struct PredictArgs {
    /// Model JSON written by `fit`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// CSV holding the model's feature columns.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Predictions CSV [default: predictions.csv].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Classification threshold [default: the model's].
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Args, Serialize, Deserialize, Default, Clone, Debug)]
#[serde(default)]
pub struct EvalArgs {
    /// Model JSON written by `fit`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Labelled CSV.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Metrics JSON [default: metrics.json].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Classification threshold [default: the model's].
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Args, Serialize, Deserialize, Default, Clone, Debug)]
#[serde(default)]
pub struct CvArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: DataArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub folds: FoldArgs,
    /// Report JSON [default: cv_report.json].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Default, Clone, Debug)]
#[serde(default)]
pub struct SweepArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: DataArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub folds: FoldArgs,
    /// Comma-separated model sizes [default: 5,50].
    #[arg(long, value_delimiter = ',')]
    pub k_list: Option<Vec<usize>>,
    /// Table CSV (`k,mae,r,accuracy,f1`) [default: sweep.csv].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Full JSON report [default: sweep.json].
    #[arg(long)]
    pub out_json: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Default, Clone, Debug)]
#[serde(default)]
pub struct SynthArgs {
    /// Rows [default: 2000].
    #[arg(long)]
    pub rows: Option<usize>,
    /// Binary features [default: 50].
    #[arg(long)]
    pub features: Option<usize>,
    /// Planted support size [default: 5].
    #[arg(long)]
    pub k_true: Option<usize>,
    /// Gaussian noise standard deviation [default: 0.1].
    #[arg(long)]
    pub noise: Option<f64>,
    /// Probability of a 1 in each cell [default: 0.5].
    #[arg(long)]
    pub bernoulli_p: Option<f64>,
    /// Planted bias [default: 0].
    #[arg(long)]
    pub bias: Option<f64>,
    /// Output CSV [default: synth.csv]; the schema and ground truth are
    /// written next to it as `<stem>.schema.json` and `<stem>.truth.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Default, Clone, Debug)]
#[serde(default)]
pub struct GateArgs {
    /// Embeddings, row 0 the CLS token: a JSON array of rows or a headerless CSV.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// JSON with `w_g` and optionally `head_matrix`, `head_bias` and `x_hat`.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Number of features the gate keeps.
    #[arg(long = "gate-k")]
    pub gate_k: Option<usize>,
    /// Soft gate temperature [default: 0.1].
    #[arg(long)]
    pub tau: Option<f64>,
    /// Output JSON [default: gate.json].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Default, Clone, Debug)]
#[serde(default)]
pub struct VerifyArgs {
    /// Seeded solver instances [default: 30].
    #[arg(long)]
    pub instances: Option<usize>,
    /// Report JSON; printed only when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn keys_of<T: Serialize + Default>() -> Vec<String> {
    match serde_json::to_value(T::default()) {
        Ok(Value::Object(m)) => m.keys().cloned().collect(),
        _ => Vec::new(),
    }
}

/// Reads a config file, unwrapping an artifact's `run_config`, and rejects
/// keys no command understands.
pub fn load_config(path: &std::path::Path) -> Result<Map<String, Value>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("config {} is not JSON: {e}", path.display())))?;
    let mut map = match value {
        Value::Object(m) => m,
        _ => return Err(CliError::Usage("config must be a JSON object".into())),
    };
    if let Some(Value::Object(inner)) = map.remove("run_config") {
        map = inner;
    }
    let mut known: Vec<String> = ["command", "threads", "seed", "tool"].map(String::from).to_vec();
    known.extend(keys_of::<FitArgs>());
    known.extend(keys_of::<PredictArgs>());
    known.extend(keys_of::<EvalArgs>());
    known.extend(keys_of::<CvArgs>());
    known.extend(keys_of::<SweepArgs>());
    known.extend(keys_of::<SynthArgs>());
    known.extend(keys_of::<GateArgs>());
    known.extend(keys_of::<VerifyArgs>());
    if let Some(bad) = map.keys().find(|k| !known.contains(k)) {
        return Err(CliError::Usage(format!("unknown config key `{bad}`")));
    }
    Ok(map)
}

/// Fills every unset field of `cli` from `file`.
pub fn overlay<T: Serialize + DeserializeOwned>(cli: &T, file: &Map<String, Value>) -> Result<T, CliError> {
    let mut value = serde_json::to_value(cli).expect("arguments serialize");
    if let Value::Object(m) = &mut value {
        for (k, v) in m.iter_mut() {
            if v.is_null() {
                if let Some(f) = file.get(k) {
                    *v = f.clone();
                }
            }
        }
    }
    serde_json::from_value(value).map_err(|e| CliError::Usage(format!("bad config value: {e}")))
}
