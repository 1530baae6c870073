//! Hyperparameter search over `(ε, τ)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attention::AttentionParams;
use crate::error::{Error, Result};
use crate::model::{predict_panels, score, train_params, ModelKind, PanelSet, TrainOptions};

/// Default ε grid for regression: `k/9` for `k = 0..=9`.
pub fn default_eps_grid_regression() -> Vec<f64> {
    (0..=9).map(|k| k as f64 / 9.0).collect()
}

pub fn default_eps_grid_classification() -> Vec<f64> {
    vec![0.0, 0.25, 0.5, 0.75, 1.0]
}

pub fn default_tau_grid() -> Vec<f64> {
    vec![0.01, 0.1, 0.5, 1.0, 5.0, 10.0, 100.0]
}

pub fn validate_grids(eps_grid: &[f64], tau_grid: &[f64]) -> Result<()> {
    if eps_grid.is_empty() || tau_grid.is_empty() {
        return Err(Error::Config("grids must not be empty".into()));
    }
    if let Some(e) = eps_grid.iter().find(|e| !(0.0..=1.0).contains(*e)) {
        return Err(Error::Config(format!("epsilon {e} outside [0,1]")));
    }
    if let Some(t) = tau_grid.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
        return Err(Error::Config(format!("tau {t} must be positive")));
    }
    Ok(())
}

fn sorted_unique(v: &[f64]) -> Vec<f64> {
    let mut v = v.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// The `(ε, τ)` cells a model actually depends on, in ascending `(ε, τ)`
/// order. Axes a model ignores collapse to a single value: ε becomes 0 and τ
/// becomes the smallest grid value.
pub fn effective_grid(kind: ModelKind, eps_grid: &[f64], tau_grid: &[f64]) -> Vec<(f64, f64)> {
    let eps = if kind.uses_epsilon() { sorted_unique(eps_grid) } else { vec![0.0] };
    let taus = sorted_unique(tau_grid);
    let taus = if kind.uses_tau() { taus } else { vec![taus.first().copied().unwrap_or(1.0)] };
    eps.iter().flat_map(|&e| taus.iter().map(move |&t| (e, t))).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub epsilon: f64,
    pub tau: f64,
    /// Validation R² or F1; absent when training failed.
    pub score: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub model: ModelKind,
    pub cells: Vec<GridCell>,
    pub best: usize,
}

impl GridReport {
    pub fn best_cell(&self) -> &GridCell {
        &self.cells[self.best]
    }
}

/// Trains `kind` on `train` for every cell and scores it on `validation`.
/// The best score wins; ties go to the smaller ε, then the smaller τ. Failed
/// cells are recorded and skipped.
pub fn grid_search(
    kind: ModelKind,
    train: &PanelSet,
    validation: &PanelSet,
    eps_grid: &[f64],
    tau_grid: &[f64],
    opts: &TrainOptions,
) -> Result<(AttentionParams, GridReport)> {
    validate_grids(eps_grid, tau_grid)?;
    let cells = effective_grid(kind, eps_grid, tau_grid);
    let results: Vec<(GridCell, Option<AttentionParams>)> = cells
        .par_iter()
        .map(|&(epsilon, tau)| {
            let outcome = train_params(kind, train, epsilon, tau, opts).and_then(|params| {
                let preds = predict_panels(kind, &params, validation.panels());
                let s = score(&preds, validation.targets(), opts.f1_average)?;
                Ok((s, params))
            });
            match outcome {
                Ok((s, params)) => (
                    GridCell {
                        epsilon,
                        tau,
                        score: Some(s),
                        error: None,
                    },
                    Some(params),
                ),
                Err(e) => (
                    GridCell {
                        epsilon,
                        tau,
                        score: None,
                        error: Some(e.to_string()),
                    },
                    None,
                ),
            }
        })
        .collect();

    let mut best: Option<usize> = None;
    for (i, (cell, _)) in results.iter().enumerate() {
        if let Some(s) = cell.score {
            if best.is_none_or(|b| s > results[b].0.score.unwrap_or(f64::NEG_INFINITY)) {
                best = Some(i);
            }
        }
    }
    let Some(best) = best else {
        let first = results[0].0.error.clone().unwrap_or_default();
        return Err(Error::Config(format!("every grid cell failed for {kind}: {first}")));
    };
    let (cells, mut params): (Vec<GridCell>, Vec<Option<AttentionParams>>) = results.into_iter().unzip();
    let chosen = params.swap_remove(best).expect("best cell has parameters");
    Ok((chosen, GridReport { model: kind, cells, best }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_friedman, FriedmanVariant};
    use crate::forest::{fit_forest, Ensemble, ForestConfig};
    use crate::tree::GrowthCondition;

    #[test]
    fn effective_grids() {
        let eps = [0.5, 0.0, 1.0];
        let tau = [10.0, 1.0];
        assert_eq!(effective_grid(ModelKind::Baseline, &eps, &tau), vec![(0.0, 1.0)]);
        assert_eq!(effective_grid(ModelKind::Abrf2, &eps, &tau), vec![(0.0, 1.0)]);
        assert_eq!(effective_grid(ModelKind::Softmax, &eps, &tau), vec![(0.0, 1.0), (0.0, 10.0)]);
        assert_eq!(effective_grid(ModelKind::Abrf3, &eps, &tau), vec![(0.0, 1.0), (0.5, 1.0), (1.0, 1.0)]);
        assert_eq!(effective_grid(ModelKind::Abrf1Qp, &eps, &tau).len(), 6);
        assert_eq!(effective_grid(ModelKind::Abrf1Qp, &eps, &tau)[1], (0.0, 10.0));
    }

    #[test]
    fn default_grids() {
        let e = default_eps_grid_regression();
        assert_eq!(e.len(), 10);
        assert!((e[4] - 0.444).abs() < 1e-3 && (e[5] - 0.556).abs() < 1e-3);
        assert_eq!(default_eps_grid_classification(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(validate_grids(&[1.5], &[1.0]).is_err());
        assert!(validate_grids(&[0.5], &[0.0]).is_err());
        assert!(validate_grids(&[], &[1.0]).is_err());
    }

    fn sets() -> (PanelSet, PanelSet) {
        let ds = gen_friedman(FriedmanVariant::Two, 80, 10.0, 7).unwrap();
        let train = ds.subset(&(0..60).collect::<Vec<_>>());
        let val = ds.subset(&(60..80).collect::<Vec<_>>());
        let forest = fit_forest(&train, &ForestConfig::new(10, Ensemble::Rf, GrowthCondition::MaxDepth(2), 1)).unwrap();
        (PanelSet::new(&forest, &train).unwrap(), PanelSet::new(&forest, &val).unwrap())
    }

    #[test]
    fn single_cell_grid() {
        let (train, val) = sets();
        let (params, report) = grid_search(ModelKind::Abrf1Qp, &train, &val, &[0.3], &[2.0], &TrainOptions::default()).unwrap();
        assert_eq!(report.cells.len(), 1);
        assert_eq!((params.epsilon, params.tau), (0.3, 2.0));
        assert!(report.best_cell().score.is_some());
    }

    #[test]
    fn picks_the_maximum_and_is_order_independent() {
        let (train, val) = sets();
        let opts = TrainOptions::default();
        let (p1, r1) = grid_search(ModelKind::Abrf1Qp, &train, &val, &[0.0, 0.5, 1.0], &[1.0, 100.0], &opts).unwrap();
        let (p2, r2) = grid_search(ModelKind::Abrf1Qp, &train, &val, &[1.0, 0.5, 0.0], &[100.0, 1.0], &opts).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(r1, r2);
        let best = r1.best_cell().score.unwrap();
        assert!(r1.cells.iter().all(|c| c.score.unwrap() <= best));
    }

    #[test]
    fn ties_prefer_small_epsilon_then_tau() {
        let (train, val) = sets();
        let (_, report) = grid_search(ModelKind::Baseline, &train, &val, &[0.2, 0.1], &[5.0, 3.0], &TrainOptions::default()).unwrap();
        assert_eq!(report.cells.len(), 1);
        assert_eq!((report.best_cell().epsilon, report.best_cell().tau), (0.0, 3.0));
        // At ε = 1 the weights are w alone, and w does not depend on τ.
        let (params, report) =
            grid_search(ModelKind::Abrf1Qp, &train, &val, &[1.0], &[5.0, 3.0], &TrainOptions::default()).unwrap();
        assert_eq!(report.cells[0].score, report.cells[1].score);
        assert_eq!(params.tau, 3.0);
    }
}
