//! Attention weights over trees and the weighted combiners.
//!
//! Trees act as key/value pairs: the key is the leaf mean vector `A_k(x)`,
//! the value is the leaf output. A tree whose key is close to the query `x`
//! receives a large weight. Three weight families are provided:
//!
//! * softmax scores `D_k = softmax(-‖x − A_k‖² / 2τ)` mixed with a trainable
//!   bias `w` through a contamination model, `α = (1 − ε) D + ε w`;
//! * trainable softmax scores `softmax(-‖(x − A_k) ∘ z‖² v_k / 2)`;
//! * the contamination mixture of the two.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::{InstancePanel, PanelValues, Prediction};

/// Distances are clamped to this value before exponentiation.
pub const DISTANCE_CAP: f64 = 1e30;

/// Sign applied to the squared distance inside the softmax. `Negative` gives
/// closer trees larger weights; `Positive` evaluates the score literally as
/// `+d/(2τ)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SoftmaxSign {
    #[default]
    Negative,
    Positive,
}

impl SoftmaxSign {
    pub fn factor(self) -> f64 {
        match self {
            SoftmaxSign::Negative => -1.0,
            SoftmaxSign::Positive => 1.0,
        }
    }
}

impl std::str::FromStr for SoftmaxSign {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "negative" | "-" => Ok(SoftmaxSign::Negative),
            "positive" | "+" => Ok(SoftmaxSign::Positive),
            other => Err(Error::Config(format!("unknown softmax sign {other:?}"))),
        }
    }
}

/// Parameters of all attention variants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionParams {
    pub epsilon: f64,
    pub tau: f64,
    /// Contamination bias over trees.
    pub w: Vec<f64>,
    /// Per-tree score scales.
    pub v: Vec<f64>,
    /// Feature weights.
    pub z: Vec<f64>,
    #[serde(default)]
    pub sign: SoftmaxSign,
}

impl AttentionParams {
    /// Uniform `w`, `v`, `z`; ε = 0, τ = 1.
    pub fn uniform(n_trees: usize, n_features: usize) -> Self {
        Self {
            epsilon: 0.0,
            tau: 1.0,
            w: vec![1.0 / n_trees as f64; n_trees],
            v: vec![1.0 / n_trees as f64; n_trees],
            z: vec![1.0 / n_features as f64; n_features],
            sign: SoftmaxSign::Negative,
        }
    }

    pub fn validate(&self, n_trees: usize, n_features: usize) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::Config(format!("epsilon {} outside [0,1]", self.epsilon)));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Config(format!("tau must be positive, got {}", self.tau)));
        }
        for (name, v, len) in [("w", &self.w, n_trees), ("v", &self.v, n_trees), ("z", &self.z, n_features)] {
            if v.len() != len {
                return Err(Error::Config(format!("{name} has length {}, expected {len}", v.len())));
            }
            if !on_simplex(v, 1e-9) {
                return Err(Error::Config(format!("{name} is not a probability vector")));
            }
        }
        Ok(())
    }
}

/// Nonnegative entries summing to one within `tol`.
pub fn on_simplex(v: &[f64], tol: f64) -> bool {
    !v.is_empty() && v.iter().all(|&x| x >= 0.0 && x.is_finite()) && (v.iter().sum::<f64>() - 1.0).abs() <= tol
}

/// Numerically stable softmax (max-shifted).
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = out.iter().sum();
    for v in &mut out {
        *v /= total;
    }
    out
}

/// `D_k = softmax(±d_k / 2τ)`.
pub fn softmax_scores(distances: &[f64], tau: f64, sign: SoftmaxSign) -> Vec<f64> {
    let s = sign.factor() / (2.0 * tau);
    let scores: Vec<f64> = distances.iter().map(|d| s * d.min(DISTANCE_CAP)).collect();
    softmax(&scores)
}

/// `α = (1 − ε) D + ε w`.
pub fn contaminate(scores: &[f64], w: &[f64], epsilon: f64) -> Vec<f64> {
    debug_assert_eq!(scores.len(), w.len());
    let alpha: Vec<f64> = scores
        .iter()
        .zip(w)
        .map(|(d, b)| (1.0 - epsilon) * d + epsilon * b)
        .collect();
    debug_assert!(on_simplex(&alpha, 1e-9), "contaminated weights left the simplex");
    alpha
}

/// Trainable-softmax weights `softmax(±‖(x − A_k) ∘ z‖² v_k / 2)`.
pub fn abrf2_weights(panel: &InstancePanel, v: &[f64], z: &[f64], sign: SoftmaxSign) -> Vec<f64> {
    let s = 0.5 * sign.factor();
    let scores: Vec<f64> = panel
        .weighted_distances(z)
        .iter()
        .zip(v)
        .map(|(d, vk)| s * d.min(DISTANCE_CAP) * vk)
        .collect();
    softmax(&scores)
}

pub fn abrf3_weights(panel: &InstancePanel, params: &AttentionParams) -> Vec<f64> {
    let inner = abrf2_weights(panel, &params.v, &params.z, params.sign);
    contaminate(&inner, &params.w, params.epsilon)
}

/// `Σ_k α_k B_k`.
pub fn predict_regression(alpha: &[f64], values: &[f64]) -> f64 {
    alpha.iter().zip(values).map(|(a, b)| a * b).sum()
}

/// `p = αᵀ P` for a row-major `T × C` matrix, plus its argmax (lowest class
/// id on ties).
pub fn predict_classification(alpha: &[f64], dists: &[f64], n_classes: usize) -> (Vec<f64>, usize) {
    let mut p = vec![0.0; n_classes];
    for (a, row) in alpha.iter().zip(dists.chunks_exact(n_classes)) {
        for (acc, v) in p.iter_mut().zip(row) {
            *acc += a * v;
        }
    }
    let label = argmax(&p);
    (p, label)
}

pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

/// Weighted prediction for a panel.
pub fn predict(alpha: &[f64], panel: &InstancePanel) -> Prediction {
    match &panel.values {
        PanelValues::Regression(b) => Prediction::Value(predict_regression(alpha, b)),
        PanelValues::Classification { dists, n_classes } => {
            let (dist, label) = predict_classification(alpha, dists, *n_classes);
            Prediction::Class { dist, label }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn panel_from(sq_deltas: Vec<f64>, m: usize, values: Vec<f64>) -> InstancePanel {
        InstancePanel {
            distances: sq_deltas.chunks_exact(m).map(|c| c.iter().sum()).collect(),
            means: vec![0.0; sq_deltas.len()],
            sq_deltas,
            values: PanelValues::Regression(values),
            n_features: m,
        }
    }

    #[test]
    fn softmax_scores_examples() {
        let u = softmax_scores(&[3.0, 3.0, 3.0, 3.0], 0.7, SoftmaxSign::Negative);
        for v in u {
            assert_abs_diff_eq!(v, 0.25, epsilon = 1e-15);
        }
        let d = softmax_scores(&[0.0, 2.0], 1.0, SoftmaxSign::Negative);
        let e = (-1.0f64).exp();
        assert_abs_diff_eq!(d[0], 1.0 / (1.0 + e), epsilon = 1e-15);
        assert_abs_diff_eq!(d[1], e / (1.0 + e), epsilon = 1e-15);
        assert_abs_diff_eq!(d[0], 0.7311, epsilon = 1e-4);

        let flat = softmax_scores(&[0.0, 5.0, 100.0], 1e12, SoftmaxSign::Negative);
        for v in flat {
            assert_abs_diff_eq!(v, 1.0 / 3.0, epsilon = 1e-9);
        }
        // Literal sign favours the farther tree.
        let lit = softmax_scores(&[0.0, 2.0], 1.0, SoftmaxSign::Positive);
        assert_abs_diff_eq!(lit[1], d[0], epsilon = 1e-15);
    }

    #[test]
    fn huge_distances_stay_finite() {
        let d = softmax_scores(&[f64::MAX, 0.0, 1e300], 1e-3, SoftmaxSign::Negative);
        assert!(on_simplex(&d, 1e-12));
        assert_eq!(d[1], 1.0);
    }

    #[test]
    fn contaminate_examples() {
        let d = [0.2, 0.3, 0.5];
        let w = [1.0, 0.0, 0.0];
        assert_eq!(contaminate(&d, &w, 0.0), d.to_vec());
        assert_eq!(contaminate(&d, &w, 1.0), w.to_vec());
        let a = contaminate(&[0.5, 0.5], &[1.0, 0.0], 0.5);
        assert_abs_diff_eq!(a[0], 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(a[1], 0.25, epsilon = 1e-15);
    }

    #[test]
    fn abrf2_examples() {
        // Equal distances with uniform v, z give uniform weights.
        let p = panel_from(vec![1.0, 2.0, 2.0, 1.0], 2, vec![0.0, 0.0]);
        let a = abrf2_weights(&p, &[0.5, 0.5], &[0.5, 0.5], SoftmaxSign::Negative);
        assert_abs_diff_eq!(a[0], 0.5, epsilon = 1e-15);

        // (d∘z) = (1, 4) with z = 1 on a single feature; v = (.5, .5).
        let p = panel_from(vec![1.0, 4.0], 1, vec![0.0, 0.0]);
        let a = abrf2_weights(&p, &[0.5, 0.5], &[1.0], SoftmaxSign::Negative);
        let (s1, s2) = ((-0.25f64).exp(), (-1.0f64).exp());
        assert_abs_diff_eq!(a[0], s1 / (s1 + s2), epsilon = 1e-15);
        assert_abs_diff_eq!(a[0], 0.6792, epsilon = 1e-4);
        assert_abs_diff_eq!(a[1], 0.3208, epsilon = 1e-4);

        // v = (1, 0): the second score is exactly 0 whatever its distance.
        let p = panel_from(vec![3.0, 1e6], 1, vec![0.0, 0.0]);
        let a = abrf2_weights(&p, &[1.0, 0.0], &[1.0], SoftmaxSign::Negative);
        let expected = softmax(&[-1.5, 0.0]);
        assert_abs_diff_eq!(a[0], expected[0], epsilon = 1e-15);
    }

    #[test]
    fn abrf3_endpoints_and_mixture() {
        let p = panel_from(vec![1.0, 4.0, 0.5], 1, vec![1.0, 2.0, 3.0]);
        let mut params = AttentionParams::uniform(3, 1);
        params.w = vec![0.2, 0.0, 0.8];
        params.v = vec![0.3, 0.3, 0.4];
        params.epsilon = 1.0;
        assert_eq!(abrf3_weights(&p, &params), params.w);
        params.epsilon = 0.0;
        assert_eq!(abrf3_weights(&p, &params), abrf2_weights(&p, &params.v, &params.z, params.sign));
        params.epsilon = 0.5;
        let inner = abrf2_weights(&p, &params.v, &params.z, params.sign);
        let mixed = abrf3_weights(&p, &params);
        for k in 0..3 {
            assert_abs_diff_eq!(mixed[k], 0.5 * inner[k] + 0.5 * params.w[k], epsilon = 1e-15);
        }
    }

    #[test]
    fn combiners() {
        assert_abs_diff_eq!(predict_regression(&[0.75, 0.25], &[2.0, 6.0]), 3.0, epsilon = 1e-15);
        assert_eq!(predict_regression(&[1.0, 0.0, 0.0], &[4.0, 5.0, 6.0]), 4.0);

        let (p, label) = predict_classification(&[1.0, 0.0], &[0.3, 0.7, 0.9, 0.1], 2);
        assert_eq!((p, label), (vec![0.3, 0.7], 1));
        let (p, label) = predict_classification(&[0.5, 0.5], &[1.0, 0.0, 0.0, 1.0], 2);
        assert_eq!((p, label), (vec![0.5, 0.5], 0));
        let (p, label) = predict_classification(&[0.25, 0.75], &[0.8, 0.2, 0.2, 0.8], 2);
        assert_abs_diff_eq!(p[0], 0.35, epsilon = 1e-15);
        assert_abs_diff_eq!(p[1], 0.65, epsilon = 1e-15);
        assert_eq!(label, 1);
    }

    #[test]
    fn params_validation() {
        let mut p = AttentionParams::uniform(3, 2);
        assert!(p.validate(3, 2).is_ok());
        assert!(p.validate(4, 2).is_err());
        p.epsilon = 1.5;
        assert!(p.validate(3, 2).is_err());
        p.epsilon = 0.5;
        p.w = vec![0.5, 0.6, -0.1];
        assert!(p.validate(3, 2).is_err());
    }

    fn simplex_vec(len: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(1e-9f64..1.0, len).prop_map(|v| {
            let s: f64 = v.iter().sum();
            v.iter().map(|x| x / s).collect()
        })
    }

    proptest! {
        #[test]
        fn softmax_invariant_to_shift(d in prop::collection::vec(0.0f64..50.0, 1..12), c in 0.0f64..100.0, tau in 0.01f64..10.0) {
            let a = softmax_scores(&d, tau, SoftmaxSign::Negative);
            let shifted: Vec<f64> = d.iter().map(|x| x + c).collect();
            let b = softmax_scores(&shifted, tau, SoftmaxSign::Negative);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }

        #[test]
        fn softmax_decreasing_in_own_distance(d in prop::collection::vec(0.0f64..5.0, 2..8), bump in 0.01f64..5.0) {
            let a = softmax_scores(&d, 1.0, SoftmaxSign::Negative);
            let mut e = d.clone();
            e[0] += bump;
            let b = softmax_scores(&e, 1.0, SoftmaxSign::Negative);
            prop_assert!(b[0] < a[0]);
        }

        #[test]
        fn contaminate_is_affine(d in simplex_vec(6), w in simplex_vec(6), eps in 0.0f64..=1.0) {
            let a = contaminate(&d, &w, eps);
            let a0 = contaminate(&d, &w, 0.0);
            let a1 = contaminate(&d, &w, 1.0);
            for k in 0..6 {
                prop_assert!((a[k] - ((1.0 - eps) * a0[k] + eps * a1[k])).abs() < 1e-15);
            }
            prop_assert!(on_simplex(&a, 1e-9));
        }

        #[test]
        fn classification_output_is_distribution(alpha in simplex_vec(5), rows in prop::collection::vec(simplex_vec(3), 5)) {
            let flat: Vec<f64> = rows.concat();
            let (p, _) = predict_classification(&alpha, &flat, 3);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
