//! Accuracy measures and the kernel density of tree weights.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Dimension { expected: a, got: b });
    }
    Ok(())
}

/// Coefficient of determination `1 − SS_res / SS_tot`.
pub fn r2(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    check_lengths(y_true.len(), y_pred.len())?;
    if y_true.len() < 2 {
        return Err(Error::InvalidDataset("R² needs at least two samples".into()));
    }
    let mean = y_true.iter().sum::<f64>() / y_true.len() as f64;
    let ss_tot: f64 = y_true.iter().map(|y| (y - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::InvalidDataset("R² is undefined for a constant target".into()));
    }
    let ss_res: f64 = y_true.iter().zip(y_pred).map(|(y, p)| (y - p).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

pub fn mae(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    check_lengths(y_true.len(), y_pred.len())?;
    if y_true.is_empty() {
        return Ok(0.0);
    }
    Ok(y_true.iter().zip(y_pred).map(|(y, p)| (y - p).abs()).sum::<f64>() / y_true.len() as f64)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum F1Average {
    /// Unweighted mean of per-class scores.
    #[default]
    Macro,
    /// Computed from pooled counts; equals accuracy for single-label data.
    Micro,
    /// Per-class scores weighted by class support.
    Weighted,
}

impl std::str::FromStr for F1Average {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "macro" => Ok(F1Average::Macro),
            "micro" => Ok(F1Average::Micro),
            "weighted" => Ok(F1Average::Weighted),
            other => Err(Error::Config(format!("unknown F1 average {other:?}"))),
        }
    }
}

/// F1 score over `n_classes` labels. A class with `precision + recall = 0`
/// scores zero.
pub fn f1(y_true: &[usize], y_pred: &[usize], n_classes: usize, average: F1Average) -> Result<f64> {
    check_lengths(y_true.len(), y_pred.len())?;
    if let Some(&bad) = y_true.iter().chain(y_pred).find(|&&l| l >= n_classes) {
        return Err(Error::InvalidDataset(format!("label {bad} outside 0..{n_classes}")));
    }
    let mut tp = vec![0usize; n_classes];
    let mut fp = vec![0usize; n_classes];
    let mut fneg = vec![0usize; n_classes];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t == p {
            tp[t] += 1;
        } else {
            fp[p] += 1;
            fneg[t] += 1;
        }
    }
    let score = |tp: usize, fp: usize, fneg: usize| {
        let denom = 2 * tp + fp + fneg;
        if denom == 0 {
            0.0
        } else {
            2.0 * tp as f64 / denom as f64
        }
    };
    Ok(match average {
        F1Average::Macro => (0..n_classes).map(|c| score(tp[c], fp[c], fneg[c])).sum::<f64>() / n_classes as f64,
        F1Average::Micro => score(tp.iter().sum(), fp.iter().sum(), fneg.iter().sum()),
        F1Average::Weighted => {
            if y_true.is_empty() {
                return Ok(0.0);
            }
            (0..n_classes)
                .map(|c| (tp[c] + fneg[c]) as f64 * score(tp[c], fp[c], fneg[c]))
                .sum::<f64>()
                / y_true.len() as f64
        }
    })
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Gaussian KDE with unit bandwidth of the weights in `alpha`, evaluated on
/// `grid`: `ρ(t) = (1/T) Σ_k φ(t − α_k)`.
pub fn kde_weights(alpha: &[f64], grid: &[f64]) -> Vec<(f64, f64)> {
    let inv = 1.0 / alpha.len().max(1) as f64;
    grid.iter()
        .map(|&t| (t, inv * alpha.iter().map(|a| std_normal_pdf(t - a)).sum::<f64>()))
        .collect()
}

/// `n` evenly spaced points on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Mean and sample standard deviation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { mean: f64::NAN, std: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

/// Per-repetition values of one metric and their summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub values: Vec<f64>,
    pub summary: Summary,
}

impl MetricSeries {
    pub fn new(values: Vec<f64>) -> Self {
        let summary = Summary::of(&values);
        Self { values, summary }
    }
}

/// Cross-validated results of one model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    /// Keyed by metric name (`r2`, `mae` or `f1`).
    pub metrics: Vec<(String, MetricSeries)>,
    /// Hyperparameters chosen on the validation split, per repetition.
    pub epsilon: Vec<Option<f64>>,
    pub tau: Vec<Option<f64>>,
}

impl EvalReport {
    pub fn metric(&self, name: &str) -> Option<&MetricSeries> {
        self.metrics.iter().find(|(n, _)| n == name).map(|(_, s)| s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn r2_examples() {
        assert_eq!(r2(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(r2(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(r2(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap(), 0.5);
        assert!(r2(&[2.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(r2(&[1.0], &[1.0]).is_err());
        assert!(r2(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn mae_examples() {
        assert_eq!(mae(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mae(&[0.0, 0.0], &[1.0, -1.0]).unwrap(), 1.0);
        assert_eq!(mae(&[1.0, 2.0, 3.0], &[2.0, 2.0, 5.0]).unwrap(), 1.0);
    }

    #[test]
    fn f1_examples() {
        assert_eq!(f1(&[0, 1, 2, 1], &[0, 1, 2, 1], 3, F1Average::Macro).unwrap(), 1.0);
        assert_abs_diff_eq!(f1(&[0, 0, 1, 1], &[0, 0, 0, 0], 2, F1Average::Macro).unwrap(), 1.0 / 3.0);

        // Confusion (rows true, columns predicted):
        //   [2 1 0]
        //   [0 1 1]
        //   [1 0 2]
        // Per class: 2·2/(4+1+1) = 2/3, 2/(2+1+1) = 1/2, 4/(4+1+1) = 2/3.
        let t = [0, 0, 0, 1, 1, 2, 2, 2];
        let p = [0, 0, 1, 1, 2, 0, 2, 2];
        assert_abs_diff_eq!(f1(&t, &p, 3, F1Average::Macro).unwrap(), (2.0 / 3.0 + 0.5 + 2.0 / 3.0) / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f1(&t, &p, 3, F1Average::Micro).unwrap(), 5.0 / 8.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            f1(&t, &p, 3, F1Average::Weighted).unwrap(),
            (3.0 * 2.0 / 3.0 + 2.0 * 0.5 + 3.0 * 2.0 / 3.0) / 8.0,
            epsilon = 1e-12
        );
        assert!(f1(&[0, 3], &[0, 0], 2, F1Average::Macro).is_err());
    }

    #[test]
    fn kde_examples() {
        let single = kde_weights(&[1.0], &[1.0, 2.0]);
        assert_abs_diff_eq!(single[0].1, std_normal_pdf(0.0));
        assert_abs_diff_eq!(single[1].1, std_normal_pdf(1.0));

        let two = kde_weights(&[0.0, 1.0], &[0.5]);
        assert_abs_diff_eq!(two[0].1, 0.3521, epsilon = 1e-4);

        let grid = linspace(-6.0, 7.0, 2001);
        let curve = kde_weights(&[0.1, 0.3, 0.6], &grid);
        let area: f64 = curve.windows(2).map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0)).sum();
        assert_abs_diff_eq!(area, 1.0, epsilon = 1e-3);
    }

    #[test]
    fn summary_uses_sample_std() {
        let s = Summary::of(&[1.0, 2.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert_abs_diff_eq!(s.std, 1.0);
        assert_eq!(Summary::of(&[4.0]).std, 0.0);
    }

    proptest! {
        #[test]
        fn metric_ranges_and_permutation_invariance(
            pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0, 0usize..3, 0usize..3), 3..40),
            seed in any::<u64>(),
        ) {
            let y: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let yhat: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let lt: Vec<usize> = pairs.iter().map(|p| p.2).collect();
            let lp: Vec<usize> = pairs.iter().map(|p| p.3).collect();

            let mut order: Vec<usize> = (0..pairs.len()).collect();
            use rand::seq::SliceRandom;
            order.shuffle(&mut crate::rng::rng(seed));
            let perm = |v: &[f64]| order.iter().map(|&i| v[i]).collect::<Vec<_>>();
            let permu = |v: &[usize]| order.iter().map(|&i| v[i]).collect::<Vec<_>>();

            if let Ok(r) = r2(&y, &yhat) {
                prop_assert!(r <= 1.0);
                prop_assert!((r - r2(&perm(&y), &perm(&yhat)).unwrap()).abs() < 1e-9);
            }
            let m = mae(&y, &yhat).unwrap();
            prop_assert!(m >= 0.0);
            prop_assert!((m - mae(&perm(&y), &perm(&yhat)).unwrap()).abs() < 1e-9);
            for avg in [F1Average::Macro, F1Average::Micro, F1Average::Weighted] {
                let f = f1(&lt, &lp, 3, avg).unwrap();
                prop_assert!((0.0..=1.0).contains(&f));
                prop_assert!((f - f1(&permu(&lt), &permu(&lp), 3, avg).unwrap()).abs() < 1e-12);
            }
            for (_, rho) in kde_weights(&[0.2, 0.8], &yhat) {
                prop_assert!(rho >= 0.0);
            }
        }
    }
}
