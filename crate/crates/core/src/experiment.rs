//! Repeated random-split evaluation of forest weighting schemes.
//!
//! Each repetition splits the data into training and test parts. The
//! training part is split once more into an inner training set and a
//! validation set; a forest fitted on the inner set is used to pick `(ε, τ)`
//! on validation. A second forest is then fitted on the whole training part,
//! the chosen cell is retrained on it, and the test part is scored.
//! Optionally every cell is also scored on the test part, which gives the
//! test-selected optimum and the grid surface.

use std::collections::BTreeMap;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{self, Dataset, FriedmanVariant, MinMaxScaler, SplitPlan, Targets, Task};
use crate::error::{Error, Result};
use crate::forest::{fit_forest, Ensemble, Forest, ForestConfig, Prediction};
use crate::metrics::{self, MetricSeries};
use crate::model::{predict_panels, train_params, ModelKind, PanelSet, TrainOptions};
use crate::rng::derive;
use crate::solver::grid::{effective_grid, grid_search, validate_grids, GridReport};
use crate::tree::GrowthCondition;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSource {
    Csv {
        path: PathBuf,
        /// Column name or 0-based index; the last column when absent.
        #[serde(default)]
        target: Option<String>,
        /// Whitespace-separated values instead of commas.
        #[serde(default)]
        whitespace: bool,
        #[serde(default)]
        no_header: bool,
    },
    Friedman {
        variant: u8,
        n: usize,
        /// Defaults to the variant's conventional noise level.
        #[serde(default)]
        noise_sd: Option<f64>,
        #[serde(default)]
        seed: u64,
    },
    Regression {
        n: usize,
        m: usize,
        n_informative: usize,
        #[serde(default)]
        noise_sd: f64,
        #[serde(default)]
        seed: u64,
    },
    Sparse {
        n: usize,
        m: usize,
        #[serde(default = "one")]
        noise_sd: f64,
        #[serde(default)]
        seed: u64,
    },
    Tictactoe,
}

fn one() -> f64 {
    1.0
}

impl DatasetSource {
    /// Task implied by a generator; `None` for files.
    pub fn natural_task(&self) -> Option<Task> {
        match self {
            DatasetSource::Csv { .. } => None,
            DatasetSource::Tictactoe => Some(Task::Classification),
            _ => Some(Task::Regression),
        }
    }

    pub fn name(&self) -> String {
        match self {
            DatasetSource::Csv { path, .. } => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "csv".into()),
            DatasetSource::Friedman { variant, .. } => format!("friedman{variant}"),
            DatasetSource::Regression { .. } => "regression".into(),
            DatasetSource::Sparse { .. } => "sparse".into(),
            DatasetSource::Tictactoe => "tictactoe".into(),
        }
    }

    pub fn load(&self, task: Task) -> Result<Dataset> {
        if let Some(natural) = self.natural_task() {
            if natural != task {
                return Err(Error::Config(format!("{} is a {natural:?} dataset", self.name())));
            }
        }
        match self {
            DatasetSource::Csv {
                path,
                target,
                whitespace,
                no_header,
            } => {
                let target = match target {
                    Some(t) => t.parse().unwrap_or(data::TargetColumn::Last),
                    None => data::TargetColumn::Last,
                };
                let opts = data::CsvOptions {
                    delimiter: if *whitespace { data::Delimiter::Whitespace } else { data::Delimiter::Comma },
                    has_header: !no_header,
                };
                data::load_delimited(path, &target, task, opts)
            }
            DatasetSource::Friedman { variant, n, noise_sd, seed } => {
                let v = FriedmanVariant::from_index(*variant)
                    .ok_or_else(|| Error::Config(format!("Friedman variant must be 1, 2 or 3, got {variant}")))?;
                data::gen_friedman(v, *n, noise_sd.unwrap_or(v.default_noise_sd()), *seed)
            }
            DatasetSource::Regression {
                n,
                m,
                n_informative,
                noise_sd,
                seed,
            } => data::gen_linear_regression(*n, *m, *n_informative, *noise_sd, *seed),
            DatasetSource::Sparse { n, m, noise_sd, seed } => data::gen_sparse_uncorrelated(*n, *m, *noise_sd, *seed),
            DatasetSource::Tictactoe => Ok(data::gen_tictactoe()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub task: Task,
    pub ensemble: Ensemble,
    pub condition: GrowthCondition,
    /// Models besides the baseline forest, which is always evaluated.
    pub models: Vec<ModelKind>,
    pub n_trees: usize,
    pub max_features: Option<usize>,
    pub eps_grid: Vec<f64>,
    pub tau_grid: Vec<f64>,
    pub repetitions: usize,
    pub train_fraction: f64,
    /// Share of the training part used for the inner fit during selection.
    pub inner_train_fraction: f64,
    pub seed: u64,
    /// Min-max scale features using training-part statistics.
    pub scale_features: bool,
    /// Also score every grid cell on the test part.
    pub test_selection: bool,
    pub train: TrainOptions,
}

impl ExperimentConfig {
    /// Defaults for a dataset: 100 trees, 100 repetitions, 80/20 splits,
    /// task-specific ε grid.
    pub fn new(dataset: DatasetSource, task: Task) -> Self {
        let eps_grid = match task {
            Task::Regression => crate::solver::grid::default_eps_grid_regression(),
            Task::Classification => crate::solver::grid::default_eps_grid_classification(),
        };
        Self {
            dataset,
            task,
            ensemble: Ensemble::Rf,
            condition: GrowthCondition::CONDITION_2,
            models: vec![ModelKind::Abrf1Qp],
            n_trees: 100,
            max_features: None,
            eps_grid,
            tau_grid: crate::solver::grid::default_tau_grid(),
            repetitions: 100,
            train_fraction: 0.8,
            inner_train_fraction: 0.8,
            seed: 0,
            scale_features: false,
            test_selection: true,
            train: TrainOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::Config("n_trees must be positive".into()));
        }
        self.condition.validate()?;
        validate_grids(&self.eps_grid, &self.tau_grid)?;
        self.train.grad.validate()?;
        for (name, f) in [("train_fraction", self.train_fraction), ("inner_train_fraction", self.inner_train_fraction)] {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0,1), got {f}")));
            }
        }
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be positive".into()));
        }
        Ok(())
    }

    /// Baseline first, then the requested models in order, without repeats.
    pub fn model_list(&self) -> Vec<ModelKind> {
        let mut out = vec![ModelKind::Baseline];
        for &m in &self.models {
            if !out.contains(&m) {
                out.push(m);
            }
        }
        out
    }

    fn forest_config(&self, seed: u64) -> ForestConfig {
        ForestConfig {
            n_trees: self.n_trees,
            ensemble: self.ensemble,
            condition: self.condition,
            max_features: self.max_features,
            seed,
        }
    }
}

/// Test-set metrics of one model in one repetition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelOutcome {
    pub model: ModelKind,
    /// `(ε, τ)` chosen on the validation split.
    pub epsilon: f64,
    pub tau: f64,
    pub metrics: BTreeMap<String, f64>,
    /// Primary metric of every grid cell on the test part, in grid order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub test_surface: Vec<Option<f64>>,
    /// Validation grid (for inspection).
    pub validation: GridReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepetitionResult {
    pub repetition: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub models: Vec<ModelOutcome>,
}

/// Aggregated results for one model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model: ModelKind,
    pub metrics: BTreeMap<String, MetricSeries>,
    /// Per-repetition validation-selected ε and τ.
    pub epsilon_val: Vec<f64>,
    pub tau_val: Vec<f64>,
    /// Most frequent validation-selected value (smallest on ties).
    pub epsilon_val_mode: f64,
    pub tau_val_mode: f64,
    /// Cell with the best mean test metric, and that mean.
    pub epsilon_test: Option<f64>,
    pub tau_test: Option<f64>,
    pub primary_test_selected: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceRow {
    pub model: ModelKind,
    pub epsilon: Option<f64>,
    pub tau: Option<f64>,
    pub mean: f64,
    pub std: f64,
    /// Repetitions in which the cell trained successfully.
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub name: String,
    pub n_samples: usize,
    pub n_features: usize,
    pub n_classes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub dataset: DatasetInfo,
    /// `r2` for regression, `f1` for classification.
    pub primary_metric: String,
    pub summaries: Vec<ModelSummary>,
    pub surface: Vec<SurfaceRow>,
    pub repetitions: Vec<RepetitionResult>,
}

fn primary_metric(task: Task) -> &'static str {
    match task {
        Task::Regression => "r2",
        Task::Classification => "f1",
    }
}

fn evaluate(predictions: &[Prediction], targets: &Targets, opts: &TrainOptions) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    match targets {
        Targets::Regression(y) => {
            let yhat: Vec<f64> = predictions.iter().map(|p| p.value().unwrap_or(f64::NAN)).collect();
            out.insert("r2".into(), metrics::r2(y, &yhat)?);
            out.insert("mae".into(), metrics::mae(y, &yhat)?);
        }
        Targets::Classification { labels, classes } => {
            let yhat: Vec<usize> = predictions.iter().map(|p| p.label().unwrap_or(usize::MAX)).collect();
            out.insert("f1".into(), metrics::f1(labels, &yhat, classes.len(), opts.f1_average)?);
            let correct = labels.iter().zip(&yhat).filter(|(a, b)| a == b).count();
            out.insert("accuracy".into(), correct as f64 / labels.len() as f64);
        }
    }
    Ok(out)
}

struct Prepared {
    train: Dataset,
    test: Dataset,
    inner_train: Dataset,
    validation: Dataset,
}

fn prepare(ds: &Dataset, split: &data::Split, cfg: &ExperimentConfig, seed: u64) -> Result<Prepared> {
    let mut train = ds.subset(&split.train);
    let mut test = ds.subset(&split.test);
    if cfg.scale_features {
        let scaler = MinMaxScaler::fit(&train);
        train = scaler.transform(&train);
        test = scaler.transform(&test);
    }
    let inner_plan = SplitPlan {
        repetitions: 1,
        train_fraction: cfg.inner_train_fraction,
        seed,
    };
    let inner = data::make_splits(train.n_samples(), &inner_plan)?.remove(0);
    Ok(Prepared {
        inner_train: train.subset(&inner.train),
        validation: train.subset(&inner.test),
        train,
        test,
    })
}

fn fit_sets(forest: &Forest, train: &Dataset, eval: &Dataset) -> Result<(PanelSet, PanelSet)> {
    Ok((PanelSet::new(forest, train)?, PanelSet::new(forest, eval)?))
}

fn run_repetition(ds: &Dataset, split: &data::Split, r: usize, cfg: &ExperimentConfig) -> Result<RepetitionResult> {
    let rep_seed = derive(cfg.seed, r as u64);
    let prep = prepare(ds, split, cfg, derive(rep_seed, 1))?;
    let inner_forest = fit_forest(&prep.inner_train, &cfg.forest_config(derive(rep_seed, 2)))?;
    let (inner_set, val_set) = fit_sets(&inner_forest, &prep.inner_train, &prep.validation)?;
    let forest = fit_forest(&prep.train, &cfg.forest_config(derive(rep_seed, 3)))?;
    let (train_set, test_set) = fit_sets(&forest, &prep.train, &prep.test)?;
    let primary = primary_metric(cfg.task);

    let mut models = Vec::new();
    for kind in cfg.model_list() {
        let (_, validation) = grid_search(kind, &inner_set, &val_set, &cfg.eps_grid, &cfg.tau_grid, &cfg.train)?;
        let (epsilon, tau) = (validation.best_cell().epsilon, validation.best_cell().tau);
        let params = train_params(kind, &train_set, epsilon, tau, &cfg.train)?;
        let metrics = evaluate(&predict_panels(kind, &params, test_set.panels()), test_set.targets(), &cfg.train)?;
        let test_surface = if cfg.test_selection && kind != ModelKind::Baseline {
            let cells = effective_grid(kind, &cfg.eps_grid, &cfg.tau_grid);
            cells
                .par_iter()
                .map(|&(e, t)| {
                    train_params(kind, &train_set, e, t, &cfg.train)
                        .and_then(|p| evaluate(&predict_panels(kind, &p, test_set.panels()), test_set.targets(), &cfg.train))
                        .ok()
                        .map(|m| m[primary])
                })
                .collect()
        } else {
            Vec::new()
        };
        models.push(ModelOutcome {
            model: kind,
            epsilon,
            tau,
            metrics,
            test_surface,
            validation,
        });
    }
    Ok(RepetitionResult {
        repetition: r,
        n_train: prep.train.n_samples(),
        n_test: prep.test.n_samples(),
        models,
    })
}

fn mode(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut best = (f64::NAN, 0usize);
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|&&v| v == sorted[i]).count();
        if j > best.1 {
            best = (sorted[i], j);
        }
        i += j;
    }
    best.0
}

pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let ds = cfg.dataset.load(cfg.task)?;
    run_on(cfg, &ds)
}

/// Runs the protocol on an already loaded dataset.
pub fn run_on(cfg: &ExperimentConfig, ds: &Dataset) -> Result<ExperimentReport> {
    cfg.validate()?;
    if ds.task() != cfg.task {
        return Err(Error::Config("dataset task does not match the configuration".into()));
    }
    let plan = SplitPlan {
        repetitions: cfg.repetitions,
        train_fraction: cfg.train_fraction,
        seed: derive(cfg.seed, u64::MAX),
    };
    let splits = data::make_splits(ds.n_samples(), &plan)?;
    let repetitions: Vec<RepetitionResult> = splits
        .par_iter()
        .enumerate()
        .map(|(r, split)| run_repetition(ds, split, r, cfg))
        .collect::<Result<_>>()?;

    let primary = primary_metric(cfg.task);
    let mut summaries = Vec::new();
    let mut surface = Vec::new();
    for (i, kind) in cfg.model_list().into_iter().enumerate() {
        let outcomes: Vec<&ModelOutcome> = repetitions.iter().map(|r| &r.models[i]).collect();
        let names: Vec<String> = outcomes[0].metrics.keys().cloned().collect();
        let metrics = names
            .into_iter()
            .map(|n| {
                let values = outcomes.iter().map(|o| o.metrics[&n]).collect();
                (n, MetricSeries::new(values))
            })
            .collect();
        let epsilon_val: Vec<f64> = outcomes.iter().map(|o| o.epsilon).collect();
        let tau_val: Vec<f64> = outcomes.iter().map(|o| o.tau).collect();

        let mut best_test: Option<(f64, f64, f64)> = None;
        if kind == ModelKind::Baseline {
            let s = metrics::Summary::of(&outcomes.iter().map(|o| o.metrics[primary]).collect::<Vec<_>>());
            surface.push(SurfaceRow {
                model: kind,
                epsilon: None,
                tau: None,
                mean: s.mean,
                std: s.std,
                count: outcomes.len(),
            });
        } else if cfg.test_selection {
            for (c, &(e, t)) in effective_grid(kind, &cfg.eps_grid, &cfg.tau_grid).iter().enumerate() {
                let values: Vec<f64> = outcomes.iter().filter_map(|o| o.test_surface[c]).collect();
                let s = metrics::Summary::of(&values);
                if !values.is_empty() && best_test.is_none_or(|b| s.mean > b.2) {
                    best_test = Some((e, t, s.mean));
                }
                surface.push(SurfaceRow {
                    model: kind,
                    epsilon: kind.uses_epsilon().then_some(e),
                    tau: kind.uses_tau().then_some(t),
                    mean: s.mean,
                    std: s.std,
                    count: values.len(),
                });
            }
        }
        summaries.push(ModelSummary {
            model: kind,
            metrics,
            epsilon_val_mode: mode(&epsilon_val),
            tau_val_mode: mode(&tau_val),
            epsilon_val,
            tau_val,
            epsilon_test: best_test.map(|b| b.0),
            tau_test: best_test.map(|b| b.1),
            primary_test_selected: best_test.map(|b| b.2),
        });
    }

    Ok(ExperimentReport {
        config: cfg.clone(),
        dataset: DatasetInfo {
            name: cfg.dataset.name(),
            n_samples: ds.n_samples(),
            n_features: ds.n_features(),
            n_classes: ds.n_classes(),
        },
        primary_metric: primary.into(),
        summaries,
        surface,
        repetitions,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl ExperimentReport {
    pub fn summary(&self, model: ModelKind) -> Option<&ModelSummary> {
        self.summaries.iter().find(|s| s.model == model)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per model with the dataset and forest settings, validation-
    /// and test-selected hyperparameters, and metric means and deviations.
    pub fn summary_csv(&self) -> Result<String> {
        let metric_names: Vec<String> = self
            .summaries
            .first()
            .map(|s| s.metrics.keys().cloned().collect())
            .unwrap_or_default();
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = [
            "dataset",
            "task",
            "model",
            "ensemble",
            "condition",
            "n_trees",
            "repetitions",
            "seed",
            "eps_opt_val",
            "tau_opt_val",
            "eps_opt_test",
            "tau_opt_test",
        ]
        .map(String::from)
        .to_vec();
        for m in &metric_names {
            header.push(format!("{m}_mean"));
            header.push(format!("{m}_std"));
        }
        header.push(format!("{}_test_selected", self.primary_metric));
        w.write_record(&header).map_err(csv_err)?;
        let c = &self.config;
        for s in &self.summaries {
            let uses_e = s.model.uses_epsilon();
            let uses_t = s.model.uses_tau();
            let mut row = vec![
                self.dataset.name.clone(),
                format!("{:?}", c.task).to_lowercase(),
                s.model.to_string(),
                format!("{:?}", c.ensemble).to_lowercase(),
                c.condition.to_string(),
                c.n_trees.to_string(),
                c.repetitions.to_string(),
                c.seed.to_string(),
                if uses_e { s.epsilon_val_mode.to_string() } else { String::new() },
                if uses_t { s.tau_val_mode.to_string() } else { String::new() },
                if uses_e { opt(s.epsilon_test) } else { String::new() },
                if uses_t { opt(s.tau_test) } else { String::new() },
            ];
            for m in &metric_names {
                let series = &s.metrics[m];
                row.push(series.summary.mean.to_string());
                row.push(series.summary.std.to_string());
            }
            row.push(opt(s.primary_test_selected));
            w.write_record(&row).map_err(csv_err)?;
        }
        finish_csv(w)
    }

    /// Mean test metric for every `(ε, τ)` cell, with the baseline as a row
    /// without hyperparameters.
    pub fn surface_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["model", "epsilon", "tau", &format!("{}_mean", self.primary_metric), "std", "count"])
            .map_err(csv_err)?;
        for row in &self.surface {
            w.write_record([
                row.model.to_string(),
                opt(row.epsilon),
                opt(row.tau),
                row.mean.to_string(),
                row.std.to_string(),
                row.count.to_string(),
            ])
            .map_err(csv_err)?;
        }
        finish_csv(w)
    }

    /// Test metrics of every model in every repetition.
    pub fn repetitions_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["repetition", "model", "epsilon", "tau", "metric", "value"]).map_err(csv_err)?;
        for r in &self.repetitions {
            for m in &r.models {
                for (name, v) in &m.metrics {
                    w.write_record([
                        r.repetition.to_string(),
                        m.model.to_string(),
                        m.epsilon.to_string(),
                        m.tau.to_string(),
                        name.clone(),
                        v.to_string(),
                    ])
                    .map_err(csv_err)?;
                }
            }
        }
        finish_csv(w)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Csv {
        line: 0,
        message: e.to_string(),
    }
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Csv {
        line: 0,
        message: e.to_string(),
    })?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(task: Task) -> ExperimentConfig {
        let source = match task {
            Task::Regression => DatasetSource::Friedman {
                variant: 1,
                n: 60,
                noise_sd: None,
                seed: 4,
            },
            Task::Classification => DatasetSource::Tictactoe,
        };
        let mut cfg = ExperimentConfig::new(source, task);
        cfg.n_trees = 10;
        cfg.repetitions = 3;
        cfg.eps_grid = vec![0.0, 0.5, 1.0];
        cfg.tau_grid = vec![1.0, 10.0];
        cfg.models = vec![ModelKind::Softmax, ModelKind::Abrf1Qp];
        cfg.condition = GrowthCondition::CONDITION_1;
        cfg
    }

    #[test]
    fn regression_report_shape() {
        let report = run(&tiny(Task::Regression)).unwrap();
        assert_eq!(report.summaries.len(), 3);
        assert_eq!(report.repetitions.len(), 3);
        let base = report.summary(ModelKind::Baseline).unwrap();
        assert_eq!(base.metrics["r2"].values.len(), 3);
        assert!(base.epsilon_test.is_none());
        let abrf = report.summary(ModelKind::Abrf1Qp).unwrap();
        assert!(abrf.epsilon_test.is_some());
        // baseline row + 2 softmax cells + 6 abrf1 cells
        assert_eq!(report.surface.len(), 1 + 2 + 6);
        let csv = report.summary_csv().unwrap();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.lines().next().unwrap().contains("eps_opt_val"));
        assert_eq!(report.surface_csv().unwrap().lines().count(), 10);
    }

    #[test]
    fn deterministic_reports() {
        let cfg = tiny(Task::Regression);
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        assert_eq!(a.summary_csv().unwrap(), b.summary_csv().unwrap());
    }

    #[test]
    fn classification_runs() {
        let mut cfg = tiny(Task::Classification);
        cfg.repetitions = 1;
        cfg.test_selection = false;
        let report = run(&cfg).unwrap();
        let f1 = &report.summary(ModelKind::Abrf1Qp).unwrap().metrics["f1"];
        assert!((0.0..=1.0).contains(&f1.summary.mean));
        assert_eq!(report.surface.len(), 1);
    }

    #[test]
    fn rejects_mismatched_task() {
        let cfg = ExperimentConfig::new(DatasetSource::Tictactoe, Task::Regression);
        assert!(run(&cfg).is_err());
    }

    #[test]
    fn mode_prefers_smallest_on_ties() {
        assert_eq!(mode(&[0.5, 0.1, 0.5, 0.1, 0.9]), 0.1);
        assert_eq!(mode(&[0.3]), 0.3);
    }
}
