//! L1 fit of the contamination bias as a linear program, plus the small
//! dense two-phase simplex method used to solve it.
//!
//! With auxiliary variables `G_s ≥ |Q_s − ε V_s·w|` the problem
//!
//! ```text
//! minimize   Σ_s G_s
//! subject to G_s + ε V_s·w ≥  Q_s
//!            G_s − ε V_s·w ≥ −Q_s
//!            Σ_k w_k = 1,  w ≥ 0, G ≥ 0
//! ```
//!
//! has `n + T` variables.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `minimize cᵀx` subject to linear constraints and `x ≥ 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearProgram {
    pub cost: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpResult {
    pub x: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

const COST_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-11;
const FEAS_TOL: f64 = 1e-7;
/// Consecutive degenerate pivots tolerated before switching to Bland's rule.
const DEGENERATE_STREAK: usize = 50;

struct Tableau {
    /// Row-major `rows × (cols + 1)`, right-hand side last.
    a: Vec<f64>,
    rows: usize,
    cols: usize,
    basis: Vec<usize>,
}

impl Tableau {
    fn width(&self) -> usize {
        self.cols + 1
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.width() + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.cols)
    }

    fn pivot(&mut self, r: usize, c: usize, reduced: &mut [f64], value: &mut f64) {
        let w = self.width();
        let p = self.a[r * w + c];
        for v in &mut self.a[r * w..(r + 1) * w] {
            *v /= p;
        }
        let pivot_row: Vec<f64> = self.a[r * w..(r + 1) * w].to_vec();
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let f = self.a[i * w + c];
            if f == 0.0 {
                continue;
            }
            for (x, pr) in self.a[i * w..(i + 1) * w].iter_mut().zip(&pivot_row) {
                *x -= f * pr;
            }
            self.a[i * w + c] = 0.0;
        }
        let f = reduced[c];
        if f != 0.0 {
            for (d, pr) in reduced.iter_mut().zip(&pivot_row[..self.cols]) {
                *d -= f * pr;
            }
            reduced[c] = 0.0;
            *value += f * pivot_row[self.cols];
        }
        self.basis[r] = c;
    }

    fn remove_row(&mut self, r: usize) {
        let w = self.width();
        self.a.drain(r * w..(r + 1) * w);
        self.basis.remove(r);
        self.rows -= 1;
    }

    /// Reduced costs and objective for `cost` under the current basis.
    fn price(&self, cost: &[f64]) -> (Vec<f64>, f64) {
        let mut reduced = cost.to_vec();
        let mut value = 0.0;
        for i in 0..self.rows {
            let cb = cost[self.basis[i]];
            if cb == 0.0 {
                continue;
            }
            value += cb * self.rhs(i);
            for (j, d) in reduced.iter_mut().enumerate() {
                *d -= cb * self.at(i, j);
            }
        }
        (reduced, value)
    }

    /// Runs simplex iterations over columns `0..allowed` until optimal.
    fn optimize(&mut self, cost: &[f64], allowed: usize, max_pivots: usize, pivots: &mut usize) -> Result<f64> {
        let (mut reduced, mut value) = self.price(cost);
        let mut streak = 0;
        loop {
            let bland = streak >= DEGENERATE_STREAK;
            let entering = if bland {
                (0..allowed).find(|&j| reduced[j] < -COST_TOL)
            } else {
                let mut best: Option<usize> = None;
                for j in 0..allowed {
                    if reduced[j] < -COST_TOL && best.is_none_or(|b| reduced[j] < reduced[b]) {
                        best = Some(j);
                    }
                }
                best
            };
            let Some(c) = entering else {
                return Ok(value);
            };

            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let a = self.at(i, c);
                if a <= PIVOT_TOL {
                    continue;
                }
                let ratio = self.rhs(i).max(0.0) / a;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((r, best)) => {
                        if ratio < best - 1e-12 || (ratio <= best + 1e-12 && self.basis[i] < self.basis[r]) {
                            Some((i, ratio))
                        } else {
                            Some((r, best))
                        }
                    }
                };
            }
            let Some((r, ratio)) = leave else {
                return Err(Error::Lp("objective is unbounded below".into()));
            };
            if *pivots >= max_pivots {
                return Err(Error::Lp(format!("no convergence after {max_pivots} pivots")));
            }
            *pivots += 1;
            streak = if ratio <= 1e-12 { streak + 1 } else { 0 };
            self.pivot(r, c, &mut reduced, &mut value);
        }
    }
}

impl LinearProgram {
    pub fn n_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn solve(&self, max_pivots: usize) -> Result<LpResult> {
        let n = self.n_vars();
        let m = self.constraints.len();
        for c in &self.constraints {
            if c.coeffs.len() != n {
                return Err(Error::Lp(format!(
                    "constraint has {} coefficients, expected {n}",
                    c.coeffs.len()
                )));
            }
            if !c.rhs.is_finite() || c.coeffs.iter().any(|v| !v.is_finite()) {
                return Err(Error::Lp("non-finite constraint data".into()));
            }
        }

        // Orient rows so that every right-hand side is nonnegative.
        let rows: Vec<(Vec<f64>, Relation, f64)> = self
            .constraints
            .iter()
            .map(|c| {
                if c.rhs < 0.0 {
                    let rel = match c.relation {
                        Relation::Le => Relation::Ge,
                        Relation::Ge => Relation::Le,
                        Relation::Eq => Relation::Eq,
                    };
                    (c.coeffs.iter().map(|v| -v).collect(), rel, -c.rhs)
                } else {
                    (c.coeffs.clone(), c.relation, c.rhs)
                }
            })
            .collect();

        let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
        let n_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
        let art_start = n + n_slack;
        let cols = art_start + n_art;
        let width = cols + 1;
        let mut tab = Tableau {
            a: vec![0.0; m * width],
            rows: m,
            cols,
            basis: vec![0; m],
        };
        let (mut s, mut a) = (n, art_start);
        for (i, (coeffs, rel, rhs)) in rows.iter().enumerate() {
            let row = &mut tab.a[i * width..(i + 1) * width];
            row[..n].copy_from_slice(coeffs);
            row[cols] = *rhs;
            match rel {
                Relation::Le => {
                    row[s] = 1.0;
                    tab.basis[i] = s;
                    s += 1;
                }
                Relation::Ge => {
                    row[s] = -1.0;
                    s += 1;
                    row[a] = 1.0;
                    tab.basis[i] = a;
                    a += 1;
                }
                Relation::Eq => {
                    row[a] = 1.0;
                    tab.basis[i] = a;
                    a += 1;
                }
            }
        }

        let mut pivots = 0;
        if n_art > 0 {
            let mut phase1 = vec![0.0; cols];
            for c in &mut phase1[art_start..] {
                *c = 1.0;
            }
            let infeasibility = tab.optimize(&phase1, cols, max_pivots, &mut pivots)?;
            if infeasibility > FEAS_TOL * (1.0 + rows.iter().map(|r| r.2).sum::<f64>()) {
                return Err(Error::Lp(format!("infeasible (phase-one residual {infeasibility:e})")));
            }
            // Drive remaining artificials out of the basis; rows where that is
            // impossible are linearly dependent and can go.
            let mut i = 0;
            while i < tab.rows {
                if tab.basis[i] < art_start {
                    i += 1;
                    continue;
                }
                let entering = (0..art_start)
                    .filter(|&j| tab.at(i, j).abs() > 1e-9)
                    .max_by(|&x, &y| tab.at(i, x).abs().total_cmp(&tab.at(i, y).abs()));
                match entering {
                    Some(c) => {
                        let mut dummy = vec![0.0; cols];
                        let mut v = 0.0;
                        tab.pivot(i, c, &mut dummy, &mut v);
                        i += 1;
                    }
                    None => tab.remove_row(i),
                }
            }
        }

        let mut cost = vec![0.0; cols];
        cost[..n].copy_from_slice(&self.cost);
        tab.optimize(&cost, art_start, max_pivots, &mut pivots)?;

        let mut x = vec![0.0; n];
        for i in 0..tab.rows {
            if tab.basis[i] < n {
                x[tab.basis[i]] = tab.rhs(i).max(0.0);
            }
        }
        let objective = self.cost.iter().zip(&x).map(|(c, v)| c * v).sum();
        Ok(LpResult { x, objective, pivots })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpInstance {
    /// `Q_s = y_s − (1 − ε) Σ_k D_k B_k`.
    pub q: Vec<f64>,
    /// Row-major `n × n_trees`.
    pub values: Vec<f64>,
    pub n_trees: usize,
    pub epsilon: f64,
}

impl LpInstance {
    pub fn new(q: Vec<f64>, values: Vec<f64>, n_trees: usize, epsilon: f64) -> Result<Self> {
        if n_trees == 0 || values.len() != q.len() * n_trees {
            return Err(Error::Config(format!(
                "LP dimensions: {} values for {} rows × {n_trees} trees",
                values.len(),
                q.len()
            )));
        }
        if values.iter().chain(&q).any(|v| !v.is_finite()) {
            return Err(Error::Config("LP instance has non-finite entries".into()));
        }
        Ok(Self {
            q,
            values,
            n_trees,
            epsilon,
        })
    }

    /// `Σ_s |Q_s − ε V_s·w|`.
    pub fn objective(&self, w: &[f64]) -> f64 {
        self.values
            .chunks_exact(self.n_trees)
            .zip(&self.q)
            .map(|(row, q)| {
                let fit: f64 = row.iter().zip(w).map(|(v, wk)| v * wk).sum();
                (q - self.epsilon * fit).abs()
            })
            .sum()
    }

    /// Variables are ordered `w_1..w_T, G_1..G_n`.
    pub fn to_program(&self) -> LinearProgram {
        let t = self.n_trees;
        let n = self.q.len();
        let mut cost = vec![0.0; t + n];
        for c in &mut cost[t..] {
            *c = 1.0;
        }
        let mut constraints = Vec::with_capacity(2 * n + 1);
        for (s, (row, &q)) in self.values.chunks_exact(t).zip(&self.q).enumerate() {
            for sign in [1.0, -1.0] {
                let mut coeffs = vec![0.0; t + n];
                for (c, v) in coeffs.iter_mut().zip(row) {
                    *c = sign * self.epsilon * v;
                }
                coeffs[t + s] = 1.0;
                constraints.push(Constraint {
                    coeffs,
                    relation: Relation::Ge,
                    rhs: sign * q,
                });
            }
        }
        let mut simplex = vec![0.0; t + n];
        for c in &mut simplex[..t] {
            *c = 1.0;
        }
        constraints.push(Constraint {
            coeffs: simplex,
            relation: Relation::Eq,
            rhs: 1.0,
        });
        LinearProgram { cost, constraints }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub w: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LpOptions {
    pub max_pivots: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self { max_pivots: 100_000 }
    }
}

pub fn solve_lp(inst: &LpInstance, opts: &LpOptions) -> Result<LpSolution> {
    let t = inst.n_trees;
    if t == 1 || inst.epsilon == 0.0 {
        let w = vec![1.0 / t as f64; t];
        return Ok(LpSolution {
            objective: inst.objective(&w),
            w,
            pivots: 0,
        });
    }
    let res = inst.to_program().solve(opts.max_pivots)?;
    let mut w = res.x[..t].to_vec();
    let total: f64 = w.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(Error::Lp("solution lost the simplex constraint".into()));
    }
    for v in &mut w {
        *v /= total;
    }
    Ok(LpSolution {
        objective: inst.objective(&w),
        w,
        pivots: res.pivots,
    })
}
