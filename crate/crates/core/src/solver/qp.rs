//! Least-squares fit of the contamination bias over the unit simplex:
//!
//! ```text
//! minimize   Σ_s (r_s − ε Σ_k V[s,k] w_k)²
//! subject to w ≥ 0, Σ_k w_k = 1
//! ```
//!
//! solved by projected gradient descent with step `1/L`. The data only enter
//! through `G = VᵀV`, `b = Vᵀr` and `rᵀr`, so callers that sweep ε or τ over
//! a fixed forest can reuse `G`.

use serde::{Deserialize, Serialize};

use super::simplex::project_simplex;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct QpInstance {
    /// Row-major `rows × n_trees`.
    pub values: Vec<f64>,
    pub residual: Vec<f64>,
    pub n_trees: usize,
    pub epsilon: f64,
}

impl QpInstance {
    pub fn new(values: Vec<f64>, residual: Vec<f64>, n_trees: usize, epsilon: f64) -> Result<Self> {
        if n_trees == 0 || values.len() != residual.len() * n_trees {
            return Err(Error::Config(format!(
                "QP dimensions: {} values for {} rows × {n_trees} trees",
                values.len(),
                residual.len()
            )));
        }
        if values.iter().chain(&residual).any(|v| !v.is_finite()) {
            return Err(Error::Config("QP instance has non-finite entries".into()));
        }
        Ok(Self {
            values,
            residual,
            n_trees,
            epsilon,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.residual.len()
    }

    /// Direct evaluation of the objective, row by row.
    pub fn objective(&self, w: &[f64]) -> f64 {
        self.values
            .chunks_exact(self.n_trees)
            .zip(&self.residual)
            .map(|(row, r)| {
                let fit: f64 = row.iter().zip(w).map(|(v, wk)| v * wk).sum();
                (r - self.epsilon * fit).powi(2)
            })
            .sum()
    }

    pub fn to_gram(&self) -> QpGram {
        let gram = gram_matrix(&self.values, self.n_trees);
        let t = self.n_trees;
        let mut vtr = vec![0.0; t];
        for (row, r) in self.values.chunks_exact(t).zip(&self.residual) {
            for (acc, v) in vtr.iter_mut().zip(row) {
                *acc += v * r;
            }
        }
        QpGram {
            gram,
            vtr,
            rtr: self.residual.iter().map(|r| r * r).sum(),
            n_trees: t,
            epsilon: self.epsilon,
        }
    }
}

/// `VᵀV` for a row-major `rows × t` matrix.
pub fn gram_matrix(values: &[f64], t: usize) -> Vec<f64> {
    let mut g = vec![0.0; t * t];
    for row in values.chunks_exact(t) {
        for i in 0..t {
            let vi = row[i];
            if vi == 0.0 {
                continue;
            }
            let gi = &mut g[i * t..(i + 1) * t];
            for j in i..t {
                gi[j] += vi * row[j];
            }
        }
    }
    for i in 0..t {
        for j in 0..i {
            g[i * t + j] = g[j * t + i];
        }
    }
    g
}

/// The QP in Gram form: `f(w) = rᵀr − 2ε bᵀw + ε² wᵀGw`.
#[derive(Clone, Debug, PartialEq)]
pub struct QpGram {
    pub gram: Vec<f64>,
    pub vtr: Vec<f64>,
    pub rtr: f64,
    pub n_trees: usize,
    pub epsilon: f64,
}

impl QpGram {
    pub fn objective(&self, w: &[f64]) -> f64 {
        let gw = self.gram_times(w);
        let quad: f64 = w.iter().zip(&gw).map(|(a, b)| a * b).sum();
        let lin: f64 = w.iter().zip(&self.vtr).map(|(a, b)| a * b).sum();
        self.rtr - 2.0 * self.epsilon * lin + self.epsilon * self.epsilon * quad
    }

    fn gram_times(&self, w: &[f64]) -> Vec<f64> {
        self.gram
            .chunks_exact(self.n_trees)
            .map(|row| row.iter().zip(w).map(|(g, x)| g * x).sum())
            .collect()
    }

}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QpOptions {
    /// Stop once `‖w_{t+1} − w_t‖∞` drops below this.
    pub tolerance: f64,
    pub max_iters: usize,
    /// Nesterov momentum with function-value restart. Without it every
    /// iteration is a plain projected-gradient step.
    #[serde(default = "default_true")]
    pub accelerate: bool,
    #[serde(skip)]
    pub record_trace: bool,
}

fn default_true() -> bool {
    true
}

impl Default for QpOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-9,
            max_iters: 50_000,
            accelerate: true,
            record_trace: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QpSolution {
    pub w: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// `‖w − Π(w − ∇f(w)/L)‖∞`; zero exactly at a KKT point.
    pub stationarity: f64,
    /// Objective after each iteration (first entry: starting point).
    pub trace: Vec<f64>,
}

impl QpSolution {
    /// Writes the trace as `iteration,objective` CSV.
    pub fn write_trace<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "iteration,objective")?;
        for (i, f) in self.trace.iter().enumerate() {
            writeln!(out, "{i},{f}")?;
        }
        Ok(())
    }
}

pub fn solve_qp(inst: &QpInstance, opts: &QpOptions) -> Result<QpSolution> {
    solve_qp_gram(&inst.to_gram(), opts)
}

/// Largest eigenvalue of a symmetric PSD matrix by power iteration.
pub fn spectral_bound(gram: &[f64], t: usize) -> f64 {
    let mut x = vec![1.0 / (t as f64).sqrt(); t];
    let mut lambda = 0.0;
    for _ in 0..500 {
        let y: Vec<f64> = gram
            .chunks_exact(t)
            .map(|row| row.iter().zip(&x).map(|(g, v)| g * v).sum())
            .collect();
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let next = norm;
        x = y.into_iter().map(|v| v / norm).collect();
        if (next - lambda).abs() <= 1e-10 * next {
            lambda = next;
            break;
        }
        lambda = next;
    }
    lambda
}

pub fn solve_qp_gram(qp: &QpGram, opts: &QpOptions) -> Result<QpSolution> {
    let t = qp.n_trees;
    let uniform = vec![1.0 / t as f64; t];
    if t == 1 || qp.epsilon == 0.0 {
        let objective = qp.objective(&uniform);
        return finish(uniform, objective, 0, 0.0, vec![objective]);
    }

    // Any step below 2/L decreases f, so the power-iteration estimate (which
    // approaches λ_max from below) is safe.
    let lipschitz = 2.0 * qp.epsilon * qp.epsilon * spectral_bound(&qp.gram, t);
    if !(lipschitz > 0.0 && lipschitz.is_finite()) {
        let objective = qp.objective(&uniform);
        return finish(uniform, objective, 0, 0.0, vec![objective]);
    }
    let step = 1.0 / lipschitz;
    let e = qp.epsilon;
    let objective_at = |w: &[f64], gw: &[f64]| -> f64 {
        let quad: f64 = w.iter().zip(gw).map(|(a, b)| a * b).sum();
        let lin: f64 = w.iter().zip(&qp.vtr).map(|(a, b)| a * b).sum();
        qp.rtr - 2.0 * e * lin + e * e * quad
    };
    // Projected gradient step from `x` given `Gx`.
    let descend = |x: &[f64], gx: &[f64]| -> Vec<f64> {
        let y: Vec<f64> = x
            .iter()
            .zip(gx)
            .zip(&qp.vtr)
            .map(|((xk, gk), bk)| xk - step * (2.0 * e * e * gk - 2.0 * e * bk))
            .collect();
        project_simplex(&y)
    };

    let mut w = uniform;
    let mut gw = qp.gram_times(&w);
    let mut f = objective_at(&w, &gw);
    let mut prev = w.clone();
    let mut gprev = gw.clone();
    let mut momentum = 1.0f64;
    let mut trace = Vec::new();
    if opts.record_trace {
        trace.push(f);
    }
    let mut iterations = 0;
    while iterations < opts.max_iters {
        iterations += 1;
        let mut next_momentum = 1.0;
        let mut candidate = None;
        if opts.accelerate {
            next_momentum = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
            let beta = (momentum - 1.0) / next_momentum;
            if beta > 0.0 {
                let y: Vec<f64> = w.iter().zip(&prev).map(|(a, b)| a + beta * (a - b)).collect();
                let gy: Vec<f64> = gw.iter().zip(&gprev).map(|(a, b)| a + beta * (a - b)).collect();
                let next = descend(&y, &gy);
                let gnext = qp.gram_times(&next);
                let fnext = objective_at(&next, &gnext);
                // Restart the momentum whenever it would increase f.
                if fnext <= f {
                    candidate = Some((next, gnext, fnext));
                } else {
                    next_momentum = 1.0;
                }
            }
        }
        let (next, gnext, fnext) = match candidate {
            Some(c) => c,
            None => {
                let next = descend(&w, &gw);
                let gnext = qp.gram_times(&next);
                let fnext = objective_at(&next, &gnext);
                (next, gnext, fnext)
            }
        };
        if !fnext.is_finite() {
            return Err(Error::QpNonFinite(fnext));
        }
        if fnext > f {
            // Rounding noise at the optimum.
            break;
        }
        let change = next.iter().zip(&w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prev = std::mem::replace(&mut w, next);
        gprev = std::mem::replace(&mut gw, gnext);
        f = fnext;
        momentum = next_momentum;
        if opts.record_trace {
            trace.push(f);
        }
        if change < opts.tolerance {
            break;
        }
    }
    let stationarity = descend(&w, &gw)
        .iter()
        .zip(&w)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if !opts.record_trace {
        trace.push(f);
    }
    finish(w, f, iterations, stationarity, trace)
}

fn finish(w: Vec<f64>, objective: f64, iterations: usize, stationarity: f64, trace: Vec<f64>) -> Result<QpSolution> {
    if !objective.is_finite() {
        return Err(Error::QpNonFinite(objective));
    }
    Ok(QpSolution {
        w,
        objective,
        iterations,
        stationarity,
        trace,
    })
}
