//! Command implementations behind the `abrf` binary.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use abrf::data::{self, CsvOptions, Delimiter, FriedmanVariant, TargetColumn};
use abrf::experiment::{self, DatasetSource, ExperimentConfig, ExperimentReport};
use abrf::forest::{fit_forest, Forest, ForestConfig};
use abrf::model::{AttentionModel, TrainOptions};
use abrf::solver::gradient::ParamSet;
use abrf::{Dataset, Ensemble, Error, F1Average, GrowthCondition, ModelKind, Prediction, Result, SoftmaxSign, Task};

#[derive(Debug, Parser)]
#[command(name = "abrf", version, about = "Attention-weighted random forests")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Repeated train/test evaluation with nested (ε, τ) selection.
    Run(RunArgs),
    /// Mean test metric over the (ε, τ) grid, plus the baseline.
    Grid(RunArgs),
    /// Fit a forest and its attention weights on a dataset.
    Fit(FitArgs),
    /// Predict with a saved forest and weights.
    Predict(PredictArgs),
    /// Write a synthetic dataset as CSV.
    Gen(GenArgs),
}

/// Experiment settings. Every field can come from the TOML file given by
/// `--config`; flags on the command line take precedence.
#[derive(Debug, Default, Clone, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    /// Input CSV file.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Target column name or 0-based index (default: last column).
    #[arg(long)]
    pub target: Option<String>,
    /// Values separated by whitespace instead of commas.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub whitespace: Option<bool>,
    /// The file has no header row.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub no_header: Option<bool>,
    /// Synthetic source instead of a file: friedman1|friedman2|friedman3|regression|sparse|tictactoe.
    #[arg(long)]
    pub generator: Option<String>,
    /// Generated sample count.
    #[arg(long)]
    pub n: Option<usize>,
    /// Generated feature count (regression, sparse).
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub n_informative: Option<usize>,
    #[arg(long)]
    pub noise_sd: Option<f64>,
    /// Seed of the generator.
    #[arg(long)]
    pub data_seed: Option<u64>,
    /// regression|classification (inferred for generators).
    #[arg(long)]
    pub task: Option<Task>,
    /// rf|ert
    #[arg(long)]
    pub ensemble: Option<String>,
    /// 1 (depth ≤ 2), 2 (≥ 10 per leaf), depth:<d> or min-leaf:<q>.
    #[arg(long)]
    pub condition: Option<String>,
    /// Comma-separated: softmax, abrf1-qp, abrf1-lp, abrf2, abrf3.
    #[arg(long, value_delimiter = ',')]
    pub models: Option<Vec<String>>,
    #[arg(long)]
    pub n_trees: Option<usize>,
    #[arg(long)]
    pub max_features: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub eps_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub tau_grid: Option<Vec<f64>>,
    #[arg(long)]
    pub repetitions: Option<usize>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    #[arg(long)]
    pub inner_train_fraction: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Min-max scale features with training statistics.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale_features: Option<bool>,
    /// Also score every cell on the test split (true|false).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub test_selection: Option<bool>,
    /// negative|positive
    #[arg(long)]
    pub softmax_sign: Option<String>,
    /// macro|micro|weighted
    #[arg(long)]
    pub f1_average: Option<String>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Parameters trained by gradient descent, e.g. "v,z".
    #[arg(long)]
    pub grad_params: Option<String>,
    #[arg(long)]
    pub qp_tolerance: Option<f64>,
    #[arg(long)]
    pub qp_max_iters: Option<usize>,
    /// Plain projected gradient instead of the accelerated variant.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qp_plain: Option<bool>,
    #[arg(long)]
    pub lp_max_pivots: Option<usize>,
}

macro_rules! overlay {
    ($dst:ident, $src:ident; $($f:ident),* $(,)?) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl ExperimentSpec {
    /// Fields set in `other` replace those in `self`.
    pub fn overlay(mut self, other: &ExperimentSpec) -> Self {
        let s = &mut self;
        overlay!(s, other; data, target, whitespace, no_header, generator, n, m, n_informative, noise_sd,
            data_seed, task, ensemble, condition, models, n_trees, max_features, eps_grid, tau_grid,
            repetitions, train_fraction, inner_train_fraction, seed, scale_features, test_selection,
            softmax_sign, f1_average, learning_rate, max_iters, tolerance, grad_params, qp_tolerance,
            qp_max_iters, qp_plain, lp_max_pivots);
        self
    }

    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = read(path)?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    fn source(&self) -> Result<DatasetSource> {
        let seed = self.data_seed.unwrap_or(0);
        match (&self.data, self.generator.as_deref()) {
            (Some(_), Some(_)) => Err(Error::Config("give either a data file or a generator, not both".into())),
            (None, None) => Err(Error::Config("no dataset: pass --data or --generator".into())),
            (Some(path), None) => Ok(DatasetSource::Csv {
                path: path.clone(),
                target: self.target.clone(),
                whitespace: self.whitespace.unwrap_or(false),
                no_header: self.no_header.unwrap_or(false),
            }),
            (None, Some(g)) => {
                let need_n = || self.n.ok_or_else(|| Error::Config(format!("generator {g} needs --n")));
                let need_m = || self.m.ok_or_else(|| Error::Config(format!("generator {g} needs --m")));
                Ok(match g {
                    "friedman1" | "friedman2" | "friedman3" => DatasetSource::Friedman {
                        variant: g.as_bytes()[8] - b'0',
                        n: need_n()?,
                        noise_sd: self.noise_sd,
                        seed,
                    },
                    "regression" => {
                        let m = need_m()?;
                        DatasetSource::Regression {
                            n: need_n()?,
                            m,
                            n_informative: self.n_informative.unwrap_or(m.min(10)),
                            noise_sd: self.noise_sd.unwrap_or(0.0),
                            seed,
                        }
                    }
                    "sparse" => DatasetSource::Sparse {
                        n: need_n()?,
                        m: need_m()?,
                        noise_sd: self.noise_sd.unwrap_or(1.0),
                        seed,
                    },
                    "tictactoe" => DatasetSource::Tictactoe,
                    other => return Err(Error::Config(format!("unknown generator {other:?}"))),
                })
            }
        }
    }

    pub fn to_config(&self) -> Result<ExperimentConfig> {
        let source = self.source()?;
        let task = match (self.task, source.natural_task()) {
            (Some(t), _) | (None, Some(t)) => t,
            (None, None) => return Err(Error::Config("--task is required for CSV input".into())),
        };
        let mut cfg = ExperimentConfig::new(source, task);
        if let Some(e) = &self.ensemble {
            cfg.ensemble = e.parse()?;
        }
        if let Some(c) = &self.condition {
            cfg.condition = c.parse()?;
        }
        if let Some(models) = &self.models {
            cfg.models = models.iter().map(|m| m.parse()).collect::<Result<_>>()?;
        }
        if let Some(v) = self.n_trees {
            cfg.n_trees = v;
        }
        cfg.max_features = self.max_features.or(cfg.max_features);
        if let Some(v) = &self.eps_grid {
            cfg.eps_grid = v.clone();
        }
        if let Some(v) = &self.tau_grid {
            cfg.tau_grid = v.clone();
        }
        if let Some(v) = self.repetitions {
            cfg.repetitions = v;
        }
        if let Some(v) = self.train_fraction {
            cfg.train_fraction = v;
        }
        if let Some(v) = self.inner_train_fraction {
            cfg.inner_train_fraction = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.scale_features {
            cfg.scale_features = v;
        }
        if let Some(v) = self.test_selection {
            cfg.test_selection = v;
        }
        cfg.train = self.train_options()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn train_options(&self) -> Result<TrainOptions> {
        let mut opts = TrainOptions::default();
        if let Some(s) = &self.softmax_sign {
            opts.sign = s.parse::<SoftmaxSign>()?;
        }
        if let Some(s) = &self.f1_average {
            opts.f1_average = s.parse::<F1Average>()?;
        }
        if let Some(v) = self.learning_rate {
            opts.grad.learning_rate = v;
        }
        if let Some(v) = self.max_iters {
            opts.grad.max_iters = v;
        }
        if let Some(v) = self.tolerance {
            opts.grad.tolerance = v;
        }
        if let Some(seed) = self.seed {
            opts.grad.seed = seed;
        }
        if let Some(p) = &self.grad_params {
            opts.grad.params = Some(p.parse::<ParamSet>()?);
        }
        if let Some(v) = self.qp_tolerance {
            opts.qp.tolerance = v;
        }
        if let Some(v) = self.qp_max_iters {
            opts.qp.max_iters = v;
        }
        if let Some(v) = self.qp_plain {
            opts.qp.accelerate = !v;
        }
        opts.lp_max_pivots = self.lp_max_pivots;
        opts.grad.validate()?;
        Ok(opts)
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// TOML file with experiment settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (run) or CSV file (grid).
    #[arg(long, short)]
    pub out: PathBuf,
    #[command(flatten)]
    pub spec: ExperimentSpec,
}

impl RunArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let base = match &self.config {
            Some(path) => ExperimentSpec::from_toml_file(path)?,
            None => ExperimentSpec::default(),
        };
        base.overlay(&self.spec).to_config()
    }
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// Training CSV.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long)]
    pub task: Task,
    #[arg(long)]
    pub whitespace: bool,
    #[arg(long)]
    pub no_header: bool,
    #[arg(long, default_value = "abrf1-qp")]
    pub model: String,
    #[arg(long, default_value_t = 0.5)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
    #[arg(long, default_value = "rf")]
    pub ensemble: String,
    #[arg(long, default_value = "2")]
    pub condition: String,
    #[arg(long, default_value_t = 100)]
    pub n_trees: usize,
    #[arg(long)]
    pub max_features: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Forest file: written, or read with --weights-only.
    #[arg(long)]
    pub forest: PathBuf,
    /// Weights file to write.
    #[arg(long)]
    pub weights: PathBuf,
    /// Keep the saved forest and retrain only the weights.
    #[arg(long)]
    pub weights_only: bool,
    #[command(flatten)]
    pub training: TrainingFlags,
}

/// Solver settings shared by `fit`.
#[derive(Debug, Clone, Default, Args)]
pub struct TrainingFlags {
    #[arg(long)]
    pub softmax_sign: Option<String>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub grad_params: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub forest: PathBuf,
    #[arg(long)]
    pub weights: PathBuf,
    /// Input CSV with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// Column to ignore if present (e.g. the target).
    #[arg(long)]
    pub drop: Option<String>,
    #[arg(long)]
    pub whitespace: bool,
    #[arg(long)]
    pub no_header: bool,
    /// Output CSV (stdout when absent).
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Generator {
    Friedman1,
    Friedman2,
    Friedman3,
    Regression,
    Sparse,
    Tictactoe,
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    #[arg(value_enum)]
    pub generator: Generator,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 100)]
    pub m: usize,
    #[arg(long, default_value_t = 10)]
    pub n_informative: usize,
    /// Defaults: Friedman per variant, 1 for sparse, 0 for regression.
    #[arg(long)]
    pub noise_sd: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, short)]
    pub out: PathBuf,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|source| Error::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn csv_options(whitespace: bool, no_header: bool) -> CsvOptions {
    CsvOptions {
        delimiter: if whitespace { Delimiter::Whitespace } else { Delimiter::Comma },
        has_header: !no_header,
    }
}

fn target_column(s: &Option<String>) -> TargetColumn {
    s.as_deref().map_or(TargetColumn::Last, |t| t.parse().unwrap_or(TargetColumn::Last))
}

/// Writes `report.json`, `summary.csv`, `repetitions.csv` and, when test
/// selection is on, `surface.csv` into `out`.
pub fn cmd_run(args: &RunArgs) -> Result<ExperimentReport> {
    let cfg = args.resolve()?;
    let report = experiment::run(&cfg)?;
    write(&args.out.join("report.json"), &report.to_json()?)?;
    write(&args.out.join("summary.csv"), &report.summary_csv()?)?;
    write(&args.out.join("repetitions.csv"), &report.repetitions_csv()?)?;
    if cfg.test_selection {
        write(&args.out.join("surface.csv"), &report.surface_csv()?)?;
    }
    Ok(report)
}

pub fn cmd_grid(args: &RunArgs) -> Result<ExperimentReport> {
    let mut cfg = args.resolve()?;
    cfg.test_selection = true;
    let report = experiment::run(&cfg)?;
    write(&args.out, &report.surface_csv()?)?;
    Ok(report)
}

pub fn cmd_fit(args: &FitArgs) -> Result<AttentionModel> {
    let ds = data::load_delimited(
        &args.data,
        &target_column(&args.target),
        args.task,
        csv_options(args.whitespace, args.no_header),
    )?;
    let forest = if args.weights_only {
        Forest::from_json(&read(&args.forest)?)?
    } else {
        let cfg = ForestConfig {
            n_trees: args.n_trees,
            ensemble: args.ensemble.parse::<Ensemble>()?,
            condition: args.condition.parse::<GrowthCondition>()?,
            max_features: args.max_features,
            seed: args.seed,
        };
        let forest = fit_forest(&ds, &cfg)?;
        write(&args.forest, &forest.to_json()?)?;
        forest
    };
    if ds.n_features() != forest.n_features() {
        return Err(Error::Dimension {
            expected: forest.n_features(),
            got: ds.n_features(),
        });
    }
    let mut opts = TrainOptions::default();
    let t = &args.training;
    if let Some(s) = &t.softmax_sign {
        opts.sign = s.parse()?;
    }
    if let Some(v) = t.learning_rate {
        opts.grad.learning_rate = v;
    }
    if let Some(v) = t.max_iters {
        opts.grad.max_iters = v;
    }
    if let Some(p) = &t.grad_params {
        opts.grad.params = Some(p.parse()?);
    }
    opts.grad.seed = args.seed;
    let kind: ModelKind = args.model.parse()?;
    let model = AttentionModel::fit(kind, &forest, &ds, args.epsilon, args.tau, &opts)?;
    write(&args.weights, &model.to_json()?)?;
    Ok(model)
}

/// Predictions as CSV: `prediction` for regression; `label`, `class` and one
/// probability column per class for classification.
pub fn cmd_predict(args: &PredictArgs) -> Result<String> {
    let forest = Forest::from_json(&read(&args.forest)?)?;
    let model = AttentionModel::from_json(&read(&args.weights)?)?;
    model.check_forest(&forest)?;
    let drop = args.drop.as_ref().map(|d| d.parse().unwrap_or(TargetColumn::Last));
    let fm = data::load_features(&args.data, drop.as_ref(), csv_options(args.whitespace, args.no_header))?;
    if fm.n_features != forest.n_features() {
        return Err(Error::Dimension {
            expected: forest.n_features(),
            got: fm.n_features,
        });
    }
    let mut out = String::new();
    match forest.task() {
        Task::Regression => out.push_str("prediction\n"),
        Task::Classification => {
            out.push_str("label,class");
            for c in 0..forest.n_classes() {
                let name = model.classes.get(c).cloned().unwrap_or_else(|| c.to_string());
                out.push_str(&format!(",p_{name}"));
            }
            out.push('\n');
        }
    }
    for i in 0..fm.n_rows() {
        match model.predict(&forest, fm.row(i))? {
            Prediction::Value(v) => out.push_str(&format!("{v}\n")),
            Prediction::Class { dist, label } => {
                let name = model.classes.get(label).cloned().unwrap_or_else(|| label.to_string());
                out.push_str(&format!("{label},{name}"));
                for p in dist {
                    out.push_str(&format!(",{p}"));
                }
                out.push('\n');
            }
        }
    }
    if let Some(path) = &args.out {
        write(path, &out)?;
    }
    Ok(out)
}

pub fn cmd_gen(args: &GenArgs) -> Result<Dataset> {
    let ds = match args.generator {
        Generator::Friedman1 | Generator::Friedman2 | Generator::Friedman3 => {
            let v = match args.generator {
                Generator::Friedman1 => FriedmanVariant::One,
                Generator::Friedman2 => FriedmanVariant::Two,
                _ => FriedmanVariant::Three,
            };
            data::gen_friedman(v, args.n, args.noise_sd.unwrap_or(v.default_noise_sd()), args.seed)?
        }
        Generator::Regression => {
            data::gen_linear_regression(args.n, args.m, args.n_informative, args.noise_sd.unwrap_or(0.0), args.seed)?
        }
        Generator::Sparse => data::gen_sparse_uncorrelated(args.n, args.m, args.noise_sd.unwrap_or(1.0), args.seed)?,
        Generator::Tictactoe => data::gen_tictactoe(),
    };
    let mut buf = Vec::new();
    data::write_csv(&ds, &mut buf).map_err(|source| Error::Io {
        path: args.out.clone(),
        source,
    })?;
    write(&args.out, &String::from_utf8(buf).expect("CSV output is UTF-8"))?;
    Ok(ds)
}

/// Short machine-readable name of an error variant.
pub fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Io { .. } => "io",
        Error::Csv { .. } => "csv",
        Error::Parse { .. } => "parse",
        Error::MissingTarget(_) => "missing_target",
        Error::InvalidDataset(_) => "invalid_dataset",
        Error::Dimension { .. } => "dimension",
        Error::NonFinite { .. } => "non_finite",
        Error::Config(_) => "config",
        Error::Unsupported(_) => "unsupported",
        Error::QpNonFinite(_) => "qp",
        Error::Lp(_) => "lp",
        Error::Divergence { .. } => "divergence",
        Error::Serde(_) => "serialization",
    }
}

pub fn error_json(kind: &str, message: &str) -> String {
    serde_json::json!({ "error": { "kind": kind, "message": message } }).to_string()
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Run(args) => {
            let report = cmd_run(args)?;
            print!("{}", report.summary_csv()?);
        }
        Command::Grid(args) => {
            cmd_grid(args)?;
        }
        Command::Fit(args) => {
            cmd_fit(args)?;
        }
        Command::Predict(args) => {
            let out = cmd_predict(args)?;
            if args.out.is_none() {
                print!("{out}");
            }
        }
        Command::Gen(args) => {
            cmd_gen(args)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("abrf").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn flags_override_file_settings() {
        let file: ExperimentSpec = toml::from_str("generator = \"friedman2\"\nn = 50\nn_trees = 7\nmodels = [\"abrf1-qp\"]\n").unwrap();
        let Command::Run(args) = parse(&["run", "--out", "x", "--n-trees", "3", "--eps-grid", "0,0.5"]).command else {
            panic!("expected run");
        };
        let cfg = file.overlay(&args.spec).to_config().unwrap();
        assert_eq!(cfg.n_trees, 3);
        assert_eq!(cfg.eps_grid, vec![0.0, 0.5]);
        assert_eq!(cfg.models, vec![ModelKind::Abrf1Qp]);
        assert_eq!(cfg.task, Task::Regression);
        assert!(matches!(cfg.dataset, DatasetSource::Friedman { variant: 2, n: 50, .. }));
    }

    #[test]
    fn dataset_is_required_and_exclusive() {
        assert!(ExperimentSpec::default().to_config().is_err());
        let spec = ExperimentSpec {
            data: Some("a.csv".into()),
            generator: Some("tictactoe".into()),
            ..ExperimentSpec::default()
        };
        assert!(spec.to_config().is_err());
        let csv_without_task = ExperimentSpec {
            data: Some("a.csv".into()),
            ..ExperimentSpec::default()
        };
        assert!(csv_without_task.to_config().is_err());
    }

    #[test]
    fn unknown_toml_keys_are_rejected() {
        assert!(toml::from_str::<ExperimentSpec>("n_tres = 3").is_err());
    }

    #[test]
    fn error_json_shape() {
        let e = Error::Dimension { expected: 3, got: 2 };
        let v: serde_json::Value = serde_json::from_str(&error_json(error_kind(&e), &e.to_string())).unwrap();
        assert_eq!(v["error"]["kind"], "dimension");
        assert!(v["error"]["message"].as_str().unwrap().contains("expected 3"));
    }
}
