//! Datasets, CSV ingestion, synthetic generators and repeated random splits.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Regression,
    Classification,
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "regression" => Ok(Task::Regression),
            "classification" => Ok(Task::Classification),
            other => Err(Error::Config(format!("unknown task {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Targets {
    Regression(Vec<f64>),
    /// Dense class ids in `0..classes.len()`; `classes` holds the original
    /// labels in first-appearance order.
    Classification {
        labels: Vec<usize>,
        classes: Vec<String>,
    },
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Regression(y) => y.len(),
            Targets::Classification { labels, .. } => labels.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn task(&self) -> Task {
        match self {
            Targets::Regression(_) => Task::Regression,
            Targets::Classification { .. } => Task::Classification,
        }
    }
}

/// Immutable feature matrix (row-major) plus targets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: Vec<f64>,
    n_features: usize,
    targets: Targets,
    feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        features: Vec<f64>,
        n_features: usize,
        targets: Targets,
        feature_names: Option<Vec<String>>,
    ) -> Result<Self> {
        if n_features == 0 {
            return Err(Error::InvalidDataset("no feature columns".into()));
        }
        if !features.len().is_multiple_of(n_features) {
            return Err(Error::InvalidDataset(format!(
                "{} values do not form rows of width {n_features}",
                features.len()
            )));
        }
        let n = features.len() / n_features;
        if n == 0 {
            return Err(Error::InvalidDataset("no rows".into()));
        }
        if targets.len() != n {
            return Err(Error::InvalidDataset(format!(
                "{} targets for {n} rows",
                targets.len()
            )));
        }
        if let Some((i, v)) = features.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite {
                index: i % n_features,
                value: *v,
            });
        }
        match &targets {
            Targets::Regression(y) => {
                if y.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidDataset("non-finite target".into()));
                }
            }
            Targets::Classification { labels, classes } => {
                if classes.len() < 2 {
                    return Err(Error::InvalidDataset(format!(
                        "classification needs at least 2 classes, found {}",
                        classes.len()
                    )));
                }
                if labels.iter().any(|&c| c >= classes.len()) {
                    return Err(Error::InvalidDataset("class id out of range".into()));
                }
            }
        }
        let feature_names = match feature_names {
            Some(names) if names.len() == n_features => names,
            Some(names) => {
                return Err(Error::InvalidDataset(format!(
                    "{} feature names for {n_features} columns",
                    names.len()
                )))
            }
            None => (0..n_features).map(|j| format!("x{}", j + 1)).collect(),
        };
        Ok(Self {
            features,
            n_features,
            targets,
            feature_names,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.features.len() / self.n_features
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks_exact(self.n_features)
    }

    pub fn targets(&self) -> &Targets {
        &self.targets
    }

    pub fn task(&self) -> Task {
        self.targets.task()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Number of classes, or 0 for regression.
    pub fn n_classes(&self) -> usize {
        match &self.targets {
            Targets::Regression(_) => 0,
            Targets::Classification { classes, .. } => classes.len(),
        }
    }

    pub fn regression_targets(&self) -> Option<&[f64]> {
        match &self.targets {
            Targets::Regression(y) => Some(y),
            Targets::Classification { .. } => None,
        }
    }

    pub fn class_labels(&self) -> Option<&[usize]> {
        match &self.targets {
            Targets::Regression(_) => None,
            Targets::Classification { labels, .. } => Some(labels),
        }
    }

    /// Rows `indices` (duplicates allowed) as a new dataset. Class metadata is
    /// kept as is, so class ids stay comparable with the parent.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        let targets = match &self.targets {
            Targets::Regression(y) => Targets::Regression(indices.iter().map(|&i| y[i]).collect()),
            Targets::Classification { labels, classes } => Targets::Classification {
                labels: indices.iter().map(|&i| labels[i]).collect(),
                classes: classes.clone(),
            },
        };
        Dataset {
            features,
            n_features: self.n_features,
            targets,
            feature_names: self.feature_names.clone(),
        }
    }
}

/// Per-feature min-max scaling to `[0, 1]`, fitted on one dataset and applied
/// to others. Constant features map to 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    mins: Vec<f64>,
    ranges: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(ds: &Dataset) -> Self {
        let m = ds.n_features();
        let mut mins = vec![f64::INFINITY; m];
        let mut maxs = vec![f64::NEG_INFINITY; m];
        for row in ds.rows() {
            for j in 0..m {
                mins[j] = mins[j].min(row[j]);
                maxs[j] = maxs[j].max(row[j]);
            }
        }
        let ranges = mins.iter().zip(&maxs).map(|(lo, hi)| hi - lo).collect();
        Self { mins, ranges }
    }

    pub fn transform_row(&self, row: &mut [f64]) {
        for (j, v) in row.iter_mut().enumerate() {
            *v = if self.ranges[j] > 0.0 {
                (*v - self.mins[j]) / self.ranges[j]
            } else {
                0.0
            };
        }
    }

    pub fn transform(&self, ds: &Dataset) -> Dataset {
        let mut out = ds.clone();
        for row in out.features.chunks_exact_mut(out.n_features) {
            self.transform_row(row);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TargetColumn {
    Name(String),
    Index(usize),
    Last,
}

impl std::str::FromStr for TargetColumn {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(if s == "last" {
            TargetColumn::Last
        } else if let Ok(i) = s.parse() {
            TargetColumn::Index(i)
        } else {
            TargetColumn::Name(s.to_string())
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Delimiter {
    #[default]
    Comma,
    /// Runs of spaces/tabs, as in the raw UCI `.data` files.
    Whitespace,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CsvOptions {
    pub delimiter: Delimiter,
    pub has_header: bool,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            delimiter: Delimiter::Comma,
            has_header: true,
        }
    }
}

/// Loads a header-first, comma-separated file.
pub fn load_csv(path: impl AsRef<Path>, target: &TargetColumn, task: Task) -> Result<Dataset> {
    load_delimited(path, target, task, CsvOptions::default())
}

pub fn load_delimited(
    path: impl AsRef<Path>,
    target: &TargetColumn,
    task: Task,
    options: CsvOptions,
) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_delimited(&text, target, task, options)
}

pub fn parse_delimited(
    text: &str,
    target: &TargetColumn,
    task: Task,
    options: CsvOptions,
) -> Result<Dataset> {
    let records = read_records(text, options)?;
    let mut records = records.into_iter();
    let header = if options.has_header {
        records
            .next()
            .ok_or_else(|| Error::InvalidDataset("empty file".into()))?
    } else {
        Vec::new()
    };
    let body: Vec<Vec<String>> = records.collect();
    let width = if options.has_header {
        header.len()
    } else {
        body.first().map_or(0, Vec::len)
    };
    let header: Vec<String> = if options.has_header {
        header
    } else {
        (0..width).map(|j| format!("c{j}")).collect()
    };
    if width < 2 {
        return Err(Error::InvalidDataset(
            "need at least one feature column and a target column".into(),
        ));
    }
    let target_idx = match target {
        TargetColumn::Name(name) => header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingTarget(name.clone()))?,
        TargetColumn::Index(i) if *i < width => *i,
        TargetColumn::Index(i) => return Err(Error::MissingTarget(i.to_string())),
        TargetColumn::Last => width - 1,
    };

    let m = width - 1;
    let mut features = Vec::with_capacity(body.len() * m);
    let mut raw_targets = Vec::with_capacity(body.len());
    for (r, record) in body.iter().enumerate() {
        let row = r + 1;
        if record.len() != width {
            return Err(Error::Csv {
                line: row + usize::from(options.has_header),
                message: format!("expected {width} fields, found {}", record.len()),
            });
        }
        for (j, cell) in record.iter().enumerate() {
            if j == target_idx {
                raw_targets.push(cell.as_str());
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                column: header[j].clone(),
                value: cell.clone(),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: header[j].clone(),
                    value: cell.clone(),
                });
            }
            features.push(v);
        }
    }

    let targets = match task {
        Task::Regression => {
            let mut y = Vec::with_capacity(raw_targets.len());
            for (r, cell) in raw_targets.iter().enumerate() {
                let v: f64 = cell.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| {
                    Error::Parse {
                        row: r + 1,
                        column: header[target_idx].clone(),
                        value: cell.to_string(),
                    }
                })?;
                y.push(v);
            }
            Targets::Regression(y)
        }
        Task::Classification => {
            let (labels, classes) = encode_labels(&raw_targets);
            Targets::Classification { labels, classes }
        }
    };
    let names = header
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != target_idx)
        .map(|(_, h)| h.clone())
        .collect();
    Dataset::new(features, m, targets, Some(names))
}

/// Unlabelled rows for prediction.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    pub names: Vec<String>,
    /// Row-major.
    pub values: Vec<f64>,
    pub n_features: usize,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.values.len().checked_div(self.n_features).unwrap_or(0)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_features..(i + 1) * self.n_features]
    }
}

pub fn load_features(path: impl AsRef<Path>, drop: Option<&TargetColumn>, options: CsvOptions) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_features(&text, drop, options)
}

/// Parses every column as a feature, except `drop` when given (a column
/// named in `drop` that is absent is not an error).
pub fn parse_features(text: &str, drop: Option<&TargetColumn>, options: CsvOptions) -> Result<FeatureMatrix> {
    let mut records = read_records(text, options)?.into_iter();
    let first = records.next().ok_or_else(|| Error::InvalidDataset("empty file".into()))?;
    let width = first.len();
    let (header, body): (Vec<String>, Vec<Vec<String>>) = if options.has_header {
        (first, records.collect())
    } else {
        ((0..width).map(|j| format!("c{j}")).collect(), std::iter::once(first).chain(records).collect())
    };
    let skip = match drop {
        Some(TargetColumn::Name(n)) => header.iter().position(|h| h == n),
        Some(TargetColumn::Index(i)) => Some(*i).filter(|&i| i < width),
        Some(TargetColumn::Last) => width.checked_sub(1),
        None => None,
    };
    let n_features = width - usize::from(skip.is_some());
    let mut values = Vec::with_capacity(body.len() * n_features);
    for (r, record) in body.iter().enumerate() {
        let row = r + 1;
        if record.len() != width {
            return Err(Error::Csv {
                line: row + usize::from(options.has_header),
                message: format!("expected {width} fields, found {}", record.len()),
            });
        }
        for (j, cell) in record.iter().enumerate() {
            if Some(j) == skip {
                continue;
            }
            let v = cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
                row,
                column: header[j].clone(),
                value: cell.clone(),
            })?;
            values.push(v);
        }
    }
    let names = header
        .into_iter()
        .enumerate()
        .filter(|(j, _)| Some(*j) != skip)
        .map(|(_, h)| h)
        .collect();
    Ok(FeatureMatrix {
        names,
        values,
        n_features,
    })
}

fn read_records(text: &str, options: CsvOptions) -> Result<Vec<Vec<String>>> {
    match options.delimiter {
        Delimiter::Whitespace => Ok(text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.split_whitespace().map(str::to_string).collect())
            .collect()),
        Delimiter::Comma => {
            let mut reader = csv::ReaderBuilder::new()
                .has_headers(false)
                .flexible(true)
                .trim(csv::Trim::All)
                .from_reader(text.as_bytes());
            let mut out = Vec::new();
            for (i, rec) in reader.records().enumerate() {
                let rec = rec.map_err(|e| Error::Csv {
                    line: i + 1,
                    message: e.to_string(),
                })?;
                if rec.iter().all(str::is_empty) {
                    continue;
                }
                out.push(rec.iter().map(str::to_string).collect());
            }
            Ok(out)
        }
    }
}

/// Maps labels to dense ids in first-appearance order.
pub fn encode_labels<S: AsRef<str>>(raw: &[S]) -> (Vec<usize>, Vec<String>) {
    let mut classes: Vec<String> = Vec::new();
    let labels = raw
        .iter()
        .map(|s| {
            let s = s.as_ref();
            match classes.iter().position(|c| c == s) {
                Some(i) => i,
                None => {
                    classes.push(s.to_string());
                    classes.len() - 1
                }
            }
        })
        .collect();
    (labels, classes)
}

/// Writes `ds` as a header-first CSV with the target in the last column.
pub fn write_csv<W: std::io::Write>(ds: &Dataset, out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = ds.feature_names().iter().map(String::as_str).collect();
    header.push("y");
    w.write_record(&header)?;
    for i in 0..ds.n_samples() {
        let mut record: Vec<String> = ds.row(i).iter().map(|v| format!("{v}")).collect();
        record.push(match ds.targets() {
            Targets::Regression(y) => format!("{}", y[i]),
            Targets::Classification { labels, classes } => classes[labels[i]].clone(),
        });
        w.write_record(&record)?;
    }
    w.flush()
}

// ---------------------------------------------------------------------------
// Synthetic generators
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FriedmanVariant {
    One,
    Two,
    Three,
}

impl FriedmanVariant {
    pub fn from_index(i: u8) -> Option<Self> {
        match i {
            1 => Some(Self::One),
            2 => Some(Self::Two),
            3 => Some(Self::Three),
            _ => None,
        }
    }

    pub fn n_features(self) -> usize {
        match self {
            Self::One => 10,
            Self::Two | Self::Three => 4,
        }
    }

    /// Noise level used in Breiman's bagging experiments.
    pub fn default_noise_sd(self) -> f64 {
        match self {
            Self::One => 1.0,
            Self::Two => 125.0,
            Self::Three => 0.1,
        }
    }

    /// Noise-free response at `x`.
    pub fn response(self, x: &[f64]) -> f64 {
        match self {
            Self::One => {
                10.0 * (PI * x[0] * x[1]).sin()
                    + 20.0 * (x[2] - 0.5).powi(2)
                    + 10.0 * x[3]
                    + 5.0 * x[4]
            }
            Self::Two => {
                let inner = x[1] * x[2] - 1.0 / (x[1] * x[3]);
                (x[0] * x[0] + inner * inner).sqrt()
            }
            Self::Three => ((x[1] * x[2] - 1.0 / (x[1] * x[3])) / x[0]).atan(),
        }
    }
}

/// Friedman benchmark functions. Friedman-1 draws ten features from U[0,1]
/// (five are irrelevant); Friedman-2/3 draw x1 ~ U[0,100], x2 ~ U[40π,560π],
/// x3 ~ U[0,1], x4 ~ U[1,11].
pub fn gen_friedman(variant: FriedmanVariant, n: usize, noise_sd: f64, seed: u64) -> Result<Dataset> {
    check_gen(n, noise_sd)?;
    let mut rng = rng::rng(seed);
    let m = variant.n_features();
    let mut features = Vec::with_capacity(n * m);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let start = features.len();
        match variant {
            FriedmanVariant::One => {
                for _ in 0..m {
                    features.push(rng.random::<f64>());
                }
            }
            FriedmanVariant::Two | FriedmanVariant::Three => {
                features.push(100.0 * rng.random::<f64>());
                features.push(40.0 * PI + 520.0 * PI * rng.random::<f64>());
                features.push(rng.random::<f64>());
                features.push(1.0 + 10.0 * rng.random::<f64>());
            }
        }
        let noise: f64 = rng.sample(StandardNormal);
        y.push(variant.response(&features[start..]) + noise_sd * noise);
    }
    Dataset::new(features, m, Targets::Regression(y), None)
}

/// Dense linear model over standard-normal features: the first
/// `n_informative` features get coefficients drawn from U[0,100), the rest 0.
pub fn gen_linear_regression(
    n: usize,
    m: usize,
    n_informative: usize,
    noise_sd: f64,
    seed: u64,
) -> Result<Dataset> {
    check_gen(n, noise_sd)?;
    if m == 0 || n_informative > m {
        return Err(Error::Config(format!(
            "need 1 <= m and n_informative <= m (m={m}, n_informative={n_informative})"
        )));
    }
    let mut rng = rng::rng(seed);
    let mut features = Vec::with_capacity(n * m);
    for _ in 0..n * m {
        features.push(rng.sample::<f64, _>(StandardNormal));
    }
    let mut informative: Vec<usize> = (0..m).collect();
    informative.shuffle(&mut rng);
    informative.truncate(n_informative);
    let mut coef = vec![0.0; m];
    for &j in &informative {
        coef[j] = 100.0 * rng.random::<f64>();
    }
    let y = features
        .chunks_exact(m)
        .map(|row| {
            let noise: f64 = rng.sample(StandardNormal);
            linear_response(&coef, row) + noise_sd * noise
        })
        .collect();
    Dataset::new(features, m, Targets::Regression(y), None)
}

fn linear_response(coef: &[f64], row: &[f64]) -> f64 {
    coef.iter().zip(row).map(|(c, x)| c * x).sum()
}

/// Only the first four of `m >= 4` standard-normal features matter:
/// y = x1 + 2 x2 - 2 x3 - 1.5 x4 + noise.
pub fn gen_sparse_uncorrelated(n: usize, m: usize, noise_sd: f64, seed: u64) -> Result<Dataset> {
    check_gen(n, noise_sd)?;
    if m < 4 {
        return Err(Error::Config(format!("sparse-uncorrelated needs m >= 4, got {m}")));
    }
    let mut rng = rng::rng(seed);
    let mut features = Vec::with_capacity(n * m);
    for _ in 0..n * m {
        features.push(rng.sample::<f64, _>(StandardNormal));
    }
    let y = features
        .chunks_exact(m)
        .map(|row| {
            let noise: f64 = rng.sample(StandardNormal);
            sparse_uncorrelated_response(row) + noise_sd * noise
        })
        .collect();
    Dataset::new(features, m, Targets::Regression(y), None)
}

pub fn sparse_uncorrelated_response(x: &[f64]) -> f64 {
    x[0] + 2.0 * x[1] - 2.0 * x[2] - 1.5 * x[3]
}

fn check_gen(n: usize, noise_sd: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::Config("n must be at least 1".into()));
    }
    if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
        return Err(Error::Config(format!("noise_sd must be >= 0, got {noise_sd}")));
    }
    Ok(())
}

const LINES: [[usize; 3]; 8] = [
    [0, 1, 2],
    [3, 4, 5],
    [6, 7, 8],
    [0, 3, 6],
    [1, 4, 7],
    [2, 5, 8],
    [0, 4, 8],
    [2, 4, 6],
];

fn winner(board: &[u8; 9]) -> Option<u8> {
    LINES.iter().find_map(|l| {
        let v = board[l[0]];
        (v != 0 && v == board[l[1]] && v == board[l[2]]).then_some(v)
    })
}

/// Every distinct final board of a legal tic-tac-toe game in which x moves
/// first. Each square is one-hot encoded as (x, o, blank), giving 27 binary
/// features; the class is "positive" when x has three in a row.
pub fn gen_tictactoe() -> Dataset {
    fn play(board: &mut [u8; 9], player: u8, out: &mut BTreeSet<[u8; 9]>) {
        if winner(board).is_some() || board.iter().all(|&c| c != 0) {
            out.insert(*board);
            return;
        }
        for i in 0..9 {
            if board[i] == 0 {
                board[i] = player;
                play(board, 3 - player, out);
                board[i] = 0;
            }
        }
    }
    let mut finals = BTreeSet::new();
    play(&mut [0; 9], 1, &mut finals);

    let (wins, rest): (Vec<_>, Vec<_>) = finals.into_iter().partition(|b| winner(b) == Some(1));
    let mut features = Vec::with_capacity(27 * (wins.len() + rest.len()));
    let mut raw = Vec::with_capacity(wins.len() + rest.len());
    for (boards, label) in [(&wins, "positive"), (&rest, "negative")] {
        for b in boards {
            for &cell in b {
                features.extend_from_slice(match cell {
                    1 => &[1.0, 0.0, 0.0],
                    2 => &[0.0, 1.0, 0.0],
                    _ => &[0.0, 0.0, 1.0],
                });
            }
            raw.push(label);
        }
    }
    let names = (0..9)
        .flat_map(|i| ["x", "o", "b"].map(move |s| format!("sq{}_{s}", i + 1)))
        .collect();
    let (labels, classes) = encode_labels(&raw);
    Dataset::new(
        features,
        27,
        Targets::Classification { labels, classes },
        Some(names),
    )
    .expect("enumerated boards form a valid dataset")
}

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub repetitions: usize,
    pub train_fraction: f64,
    pub seed: u64,
}

impl SplitPlan {
    pub fn n_train(&self, n: usize) -> usize {
        (self.train_fraction * n as f64).round() as usize
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be positive".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train_fraction must lie in (0,1), got {}",
                self.train_fraction
            )));
        }
        let n_train = self.n_train(n);
        if n_train < 1 || n_train >= n {
            return Err(Error::Config(format!(
                "train fraction {} leaves an empty side for n={n}",
                self.train_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// One random partition of `0..n` per repetition, each seeded from
/// `derive(plan.seed, r)`. Index lists are returned sorted.
pub fn make_splits(n: usize, plan: &SplitPlan) -> Result<Vec<Split>> {
    plan.validate(n)?;
    let n_train = plan.n_train(n);
    Ok((0..plan.repetitions)
        .map(|r| {
            let mut rng = rng::rng(rng::derive(plan.seed, r as u64));
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng);
            let mut train = idx[..n_train].to_vec();
            let mut test = idx[n_train..].to_vec();
            train.sort_unstable();
            test.sort_unstable();
            Split { train, test }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn parse(text: &str, target: &str, task: Task) -> Result<Dataset> {
        parse_delimited(
            text,
            &target.parse().unwrap(),
            task,
            CsvOptions::default(),
        )
    }

    #[test]
    fn parses_feature_matrix() {
        let fm = parse_features("a,b,y\n1,2,5\n3,4,6\n", Some(&TargetColumn::Name("y".into())), CsvOptions::default()).unwrap();
        assert_eq!(fm.n_features, 2);
        assert_eq!(fm.n_rows(), 2);
        assert_eq!(fm.row(1), &[3.0, 4.0]);
        let all = parse_features("a,b\n1,2\n", Some(&TargetColumn::Name("y".into())), CsvOptions::default()).unwrap();
        assert_eq!(all.names, vec!["a", "b"]);
        let err = parse_features("a,b\n1,x\n", None, CsvOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 1, ref column, .. } if column == "b"));
    }

    #[test]
    fn loads_small_csv() {
        let ds = parse("a,b,y\n1,2,5\n3,4,6\n5,6,7\n", "y", Task::Regression).unwrap();
        assert_eq!(ds.n_samples(), 3);
        assert_eq!(ds.n_features(), 2);
        assert_eq!(ds.regression_targets().unwrap(), &[5.0, 6.0, 7.0]);
        assert_eq!(ds.row(1), &[3.0, 4.0]);
        assert_eq!(ds.feature_names(), &["a", "b"]);
    }

    #[test]
    fn target_column_may_sit_anywhere() {
        let ds = parse("y,a\n1,2\n3,4\n", "0", Task::Regression).unwrap();
        assert_eq!(ds.regression_targets().unwrap(), &[1.0, 3.0]);
        assert_eq!(ds.row(0), &[2.0]);
    }

    #[test]
    fn bad_cell_names_row_and_column() {
        let err = parse("a,b,y\n1,2,5\n3,abc,6\n", "y", Task::Regression).unwrap_err();
        match err {
            Error::Parse { row, column, value } => {
                assert_eq!(row, 2);
                assert_eq!(column, "b");
                assert_eq!(value, "abc");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn missing_target_column() {
        assert!(matches!(
            parse("a,b\n1,2\n", "y", Task::Regression),
            Err(Error::MissingTarget(_))
        ));
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_csv("/nonexistent/file.csv", &TargetColumn::Last, Task::Regression);
        assert!(matches!(err, Err(Error::Io { .. })));
    }

    #[test]
    fn classification_labels_in_first_appearance_order() {
        let ds = parse("a,y\n1,cat\n2,dog\n3,cat\n4,emu\n", "y", Task::Classification).unwrap();
        assert_eq!(ds.class_labels().unwrap(), &[0, 1, 0, 2]);
        assert_eq!(ds.n_classes(), 3);
    }

    #[test]
    fn constant_class_target_rejected() {
        let err = parse("a,y\n1,cat\n2,cat\n", "y", Task::Classification).unwrap_err();
        assert!(matches!(err, Error::InvalidDataset(_)));
    }

    #[test]
    fn whitespace_headerless_file() {
        let text = " 1.0  2.0 3\n4 5 6\n\n";
        let ds = parse_delimited(
            text,
            &TargetColumn::Last,
            Task::Regression,
            CsvOptions {
                delimiter: Delimiter::Whitespace,
                has_header: false,
            },
        )
        .unwrap();
        assert_eq!(ds.n_samples(), 2);
        assert_eq!(ds.regression_targets().unwrap(), &[3.0, 6.0]);
    }

    #[test]
    fn friedman1_formula_by_hand() {
        let x = [0.5; 10];
        // 10 sin(pi/4) + 0 + 5 + 2.5
        assert_abs_diff_eq!(FriedmanVariant::One.response(&x), 14.571_067_811_865_476, epsilon = 1e-9);
        assert_abs_diff_eq!(
            10.0 * (PI / 4.0).sin() + 7.5,
            14.5711,
            epsilon = 1e-4
        );
    }

    #[test]
    fn noise_free_generators_match_formulas() {
        for v in [FriedmanVariant::One, FriedmanVariant::Two, FriedmanVariant::Three] {
            let ds = gen_friedman(v, 50, 0.0, 3).unwrap();
            assert_eq!(ds.n_features(), v.n_features());
            for (row, y) in ds.rows().zip(ds.regression_targets().unwrap()) {
                assert_eq!(v.response(row), *y);
            }
        }
        let ds = gen_friedman(FriedmanVariant::Two, 200, 0.0, 9).unwrap();
        for row in ds.rows() {
            assert!((0.0..=100.0).contains(&row[0]));
            assert!((40.0 * PI..=560.0 * PI).contains(&row[1]));
            assert!((0.0..=1.0).contains(&row[2]));
            assert!((1.0..=11.0).contains(&row[3]));
        }
        let ds = gen_sparse_uncorrelated(40, 10, 0.0, 1).unwrap();
        for (row, y) in ds.rows().zip(ds.regression_targets().unwrap()) {
            assert_eq!(sparse_uncorrelated_response(row), *y);
        }
    }

    #[test]
    fn sparse_formula_by_hand() {
        let mut x = [0.0; 10];
        x[..4].copy_from_slice(&[1.0, 1.0, 1.0, 1.0]);
        assert_abs_diff_eq!(sparse_uncorrelated_response(&x), -0.5, epsilon = 1e-15);
    }

    #[test]
    fn generator_shapes_and_determinism() {
        let a = gen_friedman(FriedmanVariant::One, 100, 1.0, 42).unwrap();
        assert_eq!((a.n_samples(), a.n_features()), (100, 10));
        assert_eq!(a, gen_friedman(FriedmanVariant::One, 100, 1.0, 42).unwrap());
        assert_ne!(a, gen_friedman(FriedmanVariant::One, 100, 1.0, 43).unwrap());

        let r = gen_linear_regression(100, 100, 10, 0.0, 5).unwrap();
        assert_eq!((r.n_samples(), r.n_features()), (100, 100));
        assert_eq!(r, gen_linear_regression(100, 100, 10, 0.0, 5).unwrap());
        assert_eq!(
            gen_sparse_uncorrelated(100, 10, 1.0, 5).unwrap(),
            gen_sparse_uncorrelated(100, 10, 1.0, 5).unwrap()
        );
    }

    #[test]
    fn linear_regression_without_informative_features_is_zero() {
        let ds = gen_linear_regression(30, 8, 0, 0.0, 11).unwrap();
        assert!(ds.regression_targets().unwrap().iter().all(|v| *v == 0.0));
        let ds = gen_linear_regression(30, 8, 3, 0.0, 11).unwrap();
        assert!(ds.regression_targets().unwrap().iter().any(|v| *v != 0.0));
        assert!(gen_linear_regression(10, 3, 4, 0.0, 1).is_err());
    }

    #[test]
    fn tictactoe_matches_uci_counts() {
        let ds = gen_tictactoe();
        assert_eq!(ds.n_samples(), 958);
        assert_eq!(ds.n_features(), 27);
        let labels = ds.class_labels().unwrap();
        let pos = labels.iter().filter(|&&c| c == 0).count();
        assert_eq!(pos, 626);
        assert_eq!(ds.n_samples() - pos, 332);
        for row in ds.rows() {
            for sq in row.chunks_exact(3) {
                assert_eq!(sq.iter().sum::<f64>(), 1.0);
            }
        }
    }

    #[test]
    fn splits_partition_indices() {
        let plan = SplitPlan {
            repetitions: 5,
            train_fraction: 0.8,
            seed: 1,
        };
        let splits = make_splits(10, &plan).unwrap();
        assert_eq!(splits.len(), 5);
        for s in &splits {
            assert_eq!(s.train.len(), 8);
            assert_eq!(s.test.len(), 2);
            let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
            all.sort_unstable();
            assert_eq!(all, (0..10).collect::<Vec<_>>());
        }
        assert_eq!(splits, make_splits(10, &plan).unwrap());
        let hundred = SplitPlan {
            repetitions: 100,
            ..plan
        };
        assert_eq!(make_splits(10, &hundred).unwrap().len(), 100);
    }

    #[test]
    fn degenerate_split_plans_rejected() {
        let plan = SplitPlan {
            repetitions: 1,
            train_fraction: 0.8,
            seed: 0,
        };
        assert!(make_splits(1, &plan).is_err());
        assert!(make_splits(10, &SplitPlan { repetitions: 0, ..plan }).is_err());
        assert!(make_splits(10, &SplitPlan { train_fraction: 1.0, ..plan }).is_err());
    }

    #[test]
    fn min_max_scaler_maps_to_unit_interval() {
        let ds = parse("a,b,y\n1,5,0\n3,5,1\n2,5,2\n", "y", Task::Regression).unwrap();
        let scaled = MinMaxScaler::fit(&ds).transform(&ds);
        assert_eq!(scaled.row(0), &[0.0, 0.0]);
        assert_eq!(scaled.row(1), &[1.0, 0.0]);
        assert_eq!(scaled.row(2), &[0.5, 0.0]);
    }
}
