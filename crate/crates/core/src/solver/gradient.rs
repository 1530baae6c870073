//! Full-batch gradient descent for the trainable-softmax weights.
//!
//! Each probability vector (`v`, `z` and, for the contaminated variant, `w`)
//! is the softmax of an unconstrained logit vector, so every iterate stays on
//! its simplex. Gradients are analytic.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::attention::{softmax, AttentionParams, SoftmaxSign, DISTANCE_CAP};
use crate::error::{Error, Result};
use crate::forest::{InstancePanel, PanelValues};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GradModel {
    /// Trainable softmax only (`ε` ignored).
    Abrf2,
    /// Trainable softmax contaminated by `w`.
    Abrf3,
}

/// Which of `v`, `z`, `w` are trained; the rest stay at their initial values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSet {
    pub v: bool,
    pub z: bool,
    pub w: bool,
}

impl ParamSet {
    pub const VZ: ParamSet = ParamSet { v: true, z: true, w: false };
    pub const VZW: ParamSet = ParamSet { v: true, z: true, w: true };

    pub fn default_for(model: GradModel) -> Self {
        match model {
            GradModel::Abrf2 => Self::VZ,
            GradModel::Abrf3 => Self::VZW,
        }
    }
}

impl std::str::FromStr for ParamSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut set = ParamSet { v: false, z: false, w: false };
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "v" => set.v = true,
                "z" => set.z = true,
                "w" => set.w = true,
                other => return Err(Error::Config(format!("unknown parameter {other:?}, expected v, z or w"))),
            }
        }
        Ok(set)
    }
}

impl std::fmt::Display for ParamSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let names: Vec<&str> = [(self.v, "v"), (self.z, "z"), (self.w, "w")]
            .into_iter()
            .filter_map(|(on, n)| on.then_some(n))
            .collect();
        f.write_str(&names.join(","))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradConfig {
    pub learning_rate: f64,
    pub max_iters: usize,
    /// Stop once one step improves the loss by less than this.
    pub tolerance: f64,
    pub seed: u64,
    /// Half-width of the uniform perturbation added to the initial logits.
    pub init_jitter: f64,
    pub params: Option<ParamSet>,
}

impl Default for GradConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            max_iters: 5000,
            tolerance: 1e-8,
            seed: 0,
            init_jitter: 0.0,
            params: None,
        }
    }
}

impl GradConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(Error::Config("tolerance must be positive".into()));
        }
        if !(self.init_jitter >= 0.0 && self.init_jitter.is_finite()) {
            return Err(Error::Config("init_jitter must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Training targets aligned with the panels.
#[derive(Clone, Copy, Debug)]
pub enum TargetRef<'a> {
    Regression(&'a [f64]),
    Classification { labels: &'a [usize], n_classes: usize },
}

/// Logits of the three probability vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct Logits {
    pub v: Vec<f64>,
    pub z: Vec<f64>,
    pub w: Vec<f64>,
}

impl Logits {
    pub fn from_params(p: &AttentionParams) -> Self {
        let ln = |x: &Vec<f64>| x.iter().map(|v| v.max(1e-300).ln()).collect();
        Self {
            v: ln(&p.v),
            z: ln(&p.z),
            w: ln(&p.w),
        }
    }

    fn apply(&self, base: &AttentionParams) -> AttentionParams {
        AttentionParams {
            v: softmax(&self.v),
            z: softmax(&self.z),
            w: softmax(&self.w),
            ..base.clone()
        }
    }
}

/// The empirical loss as a function of the logits.
pub struct GradProblem<'a> {
    pub panels: &'a [InstancePanel],
    pub targets: TargetRef<'a>,
    pub model: GradModel,
    pub epsilon: f64,
    pub sign: SoftmaxSign,
    norm: f64,
}

impl<'a> GradProblem<'a> {
    pub fn new(
        panels: &'a [InstancePanel],
        targets: TargetRef<'a>,
        model: GradModel,
        epsilon: f64,
        sign: SoftmaxSign,
    ) -> Result<Self> {
        let n = panels.len();
        if n == 0 {
            return Err(Error::InvalidDataset("no training instances".into()));
        }
        let t = panels[0].n_trees();
        let m = panels[0].n_features;
        if panels.iter().any(|p| p.n_trees() != t || p.n_features != m) {
            return Err(Error::Config("panels disagree on the forest shape".into()));
        }
        // Regression losses are reported relative to the total sum of
        // squares so that the learning rate does not depend on target scale.
        let norm = match targets {
            TargetRef::Regression(y) => {
                if y.len() != n {
                    return Err(Error::Dimension { expected: n, got: y.len() });
                }
                let mean = y.iter().sum::<f64>() / n as f64;
                let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
                if sst > 0.0 {
                    sst
                } else {
                    n as f64
                }
            }
            TargetRef::Classification { labels, n_classes } => {
                if labels.len() != n {
                    return Err(Error::Dimension { expected: n, got: labels.len() });
                }
                if labels.iter().any(|&l| l >= n_classes) {
                    return Err(Error::InvalidDataset("class label out of range".into()));
                }
                n as f64
            }
        };
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::Config(format!("epsilon {epsilon} outside [0,1]")));
        }
        Ok(Self {
            panels,
            targets,
            model,
            epsilon,
            sign,
            norm,
        })
    }

    pub fn n_trees(&self) -> usize {
        self.panels[0].n_trees()
    }

    pub fn n_features(&self) -> usize {
        self.panels[0].n_features
    }

    /// Divisor applied to the sum of squared errors.
    pub fn normalizer(&self) -> f64 {
        self.norm
    }

    fn eps(&self) -> f64 {
        match self.model {
            GradModel::Abrf2 => 0.0,
            GradModel::Abrf3 => self.epsilon,
        }
    }

    pub fn loss(&self, logits: &Logits) -> f64 {
        self.evaluate(logits, false).0
    }

    /// Loss and its gradient with respect to the logits.
    pub fn loss_and_gradient(&self, logits: &Logits) -> (f64, Logits) {
        let (loss, grad) = self.evaluate(logits, true);
        (loss, grad.expect("gradient requested"))
    }

    fn evaluate(&self, logits: &Logits, want_grad: bool) -> (f64, Option<Logits>) {
        let t = self.n_trees();
        let m = self.n_features();
        let eps = self.eps();
        let sigma = self.sign.factor();
        let v = softmax(&logits.v);
        let z = softmax(&logits.z);
        let w = softmax(&logits.w);
        let z2: Vec<f64> = z.iter().map(|x| x * x).collect();

        let mut sse = 0.0;
        let mut gv = vec![0.0; t];
        let mut gz = vec![0.0; m];
        let mut gw = vec![0.0; t];
        let mut d = vec![0.0; t];
        let mut scores = vec![0.0; t];
        let mut g = vec![0.0; t];
        for (s, panel) in self.panels.iter().enumerate() {
            for k in 0..t {
                let dk: f64 = panel.sq_delta(k).iter().zip(&z2).map(|(a, b)| a * b).sum();
                d[k] = dk.min(DISTANCE_CAP);
                scores[k] = 0.5 * sigma * d[k] * v[k];
            }
            let sm = softmax(&scores);
            let alpha: Vec<f64> = sm.iter().zip(&w).map(|(a, b)| (1.0 - eps) * a + eps * b).collect();

            // g[k] = ∂(squared error)/∂α_k
            match (&self.targets, &panel.values) {
                (TargetRef::Regression(y), PanelValues::Regression(b)) => {
                    let pred: f64 = alpha.iter().zip(b).map(|(a, v)| a * v).sum();
                    let e = pred - y[s];
                    sse += e * e;
                    for k in 0..t {
                        g[k] = 2.0 * e * b[k];
                    }
                }
                (TargetRef::Classification { labels, .. }, PanelValues::Classification { dists, n_classes }) => {
                    let c = *n_classes;
                    let mut err = vec![0.0; c];
                    for (a, row) in alpha.iter().zip(dists.chunks_exact(c)) {
                        for (acc, p) in err.iter_mut().zip(row) {
                            *acc += a * p;
                        }
                    }
                    err[labels[s]] -= 1.0;
                    sse += err.iter().map(|e| e * e).sum::<f64>();
                    for (gk, row) in g.iter_mut().zip(dists.chunks_exact(c)) {
                        *gk = 2.0 * row.iter().zip(&err).map(|(p, e)| p * e).sum::<f64>();
                    }
                }
                _ => unreachable!("panel and target kinds are checked by the caller"),
            }
            if !want_grad {
                continue;
            }

            for k in 0..t {
                gw[k] += eps * g[k];
            }
            let mean_gs: f64 = sm.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>() * (1.0 - eps);
            for k in 0..t {
                let da = sm[k] * ((1.0 - eps) * g[k] - mean_gs);
                gv[k] += da * 0.5 * sigma * d[k];
                if d[k] < DISTANCE_CAP {
                    let coef = da * sigma * v[k];
                    for (acc, (sq, zi)) in gz.iter_mut().zip(panel.sq_delta(k).iter().zip(&z)) {
                        *acc += coef * sq * zi;
                    }
                }
            }
        }
        let loss = sse / self.norm;
        if !want_grad {
            return (loss, None);
        }
        let chain = |p: &[f64], grad: &[f64]| -> Vec<f64> {
            let mean: f64 = p.iter().zip(grad).map(|(a, b)| a * b).sum();
            p.iter().zip(grad).map(|(pj, gj)| pj * (gj - mean) / self.norm).collect()
        };
        let grad = Logits {
            v: chain(&v, &gv),
            z: chain(&z, &gz),
            w: chain(&w, &gw),
        };
        (loss, Some(grad))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradResult {
    pub params: AttentionParams,
    /// Best training loss seen (normalized).
    pub loss: f64,
    pub initial_loss: f64,
    pub iterations: usize,
    pub trace: Vec<f64>,
}

/// Minimizes the training loss starting from `init`. `init.epsilon` and
/// `init.tau` are carried through unchanged.
pub fn train_gradient(
    panels: &[InstancePanel],
    targets: TargetRef<'_>,
    init: &AttentionParams,
    cfg: &GradConfig,
    model: GradModel,
) -> Result<GradResult> {
    cfg.validate()?;
    let which = cfg.params.unwrap_or(ParamSet::default_for(model));
    if model == GradModel::Abrf2 && which.w {
        return Err(Error::Config("w is not a parameter of the uncontaminated model".into()));
    }
    let problem = GradProblem::new(panels, targets, model, init.epsilon, init.sign)?;
    let kind_ok = matches!(
        (&targets, &panels[0].values),
        (TargetRef::Regression(_), PanelValues::Regression(_))
            | (TargetRef::Classification { .. }, PanelValues::Classification { .. })
    );
    if !kind_ok {
        return Err(Error::Config("targets do not match the forest task".into()));
    }
    init.validate(problem.n_trees(), problem.n_features())?;

    let mut logits = Logits::from_params(init);
    if cfg.init_jitter > 0.0 {
        let mut r = rng::rng(cfg.seed);
        for (on, vec) in [(which.v, &mut logits.v), (which.z, &mut logits.z), (which.w, &mut logits.w)] {
            if on {
                for x in vec.iter_mut() {
                    *x += r.random_range(-cfg.init_jitter..=cfg.init_jitter);
                }
            }
        }
    }

    let (mut loss, mut grad) = problem.loss_and_gradient(&logits);
    if !loss.is_finite() {
        return Err(Error::Divergence { iteration: 0 });
    }
    let initial_loss = loss;
    let mut best = (loss, logits.clone());
    let mut trace = vec![loss];
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        iterations += 1;
        let lr = cfg.learning_rate;
        for (on, x, g) in [
            (which.v, &mut logits.v, &grad.v),
            (which.z, &mut logits.z, &grad.z),
            (which.w, &mut logits.w, &grad.w),
        ] {
            if on {
                for (xi, gi) in x.iter_mut().zip(g) {
                    *xi -= lr * gi;
                }
            }
        }
        let (next, next_grad) = problem.loss_and_gradient(&logits);
        if !next.is_finite() {
            return Err(Error::Divergence { iteration: iterations });
        }
        trace.push(next);
        let improvement = loss - next;
        if next < best.0 {
            best = (next, logits.clone());
        }
        loss = next;
        grad = next_grad;
        if improvement < cfg.tolerance {
            break;
        }
    }
    Ok(GradResult {
        params: best.1.apply(init),
        loss: best.0,
        initial_loss,
        iterations,
        trace,
    })
}
