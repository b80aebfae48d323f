//! Derivative-free minimization of black-box objectives.
//!
//! Two algorithms share one evaluation budget and bookkeeping:
//!
//! * [`Algorithm::LinearTrustRegion`] keeps a simplex of `d + 1` points,
//!   interpolates a linear model through them and steps a trust radius `rho`
//!   along the model's descent direction. Steps that repair a degenerate
//!   simplex alternate with model steps, and `rho` is halved whenever a model
//!   step fails on a well-shaped simplex, until it reaches `rho_end`. This is
//!   the control flow of Powell's COBYLA without constraint handling.
//! * [`Algorithm::NelderMead`] is the classic reflect/expand/contract/shrink
//!   simplex search, kept as an independent cross-check.
//!
//! One iteration is one objective evaluation, so `max_iters` bounds the
//! number of calls (times `repeats` when averaging noisy objectives). The
//! objective receives a per-evaluation seed derived from the config seed so
//! shot-noise simulations stay reproducible.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    #[default]
    LinearTrustRegion,
    NelderMead,
}

impl Algorithm {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "cobyla" | "linear-trust-region" => Some(Self::LinearTrustRegion),
            "nelder-mead" | "simplex" => Some(Self::NelderMead),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::LinearTrustRegion => "linear-trust-region",
            Self::NelderMead => "nelder-mead",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub algorithm: Algorithm,
    /// Budget of iterations, one objective evaluation each.
    pub max_iters: usize,
    pub rho_begin: f64,
    pub rho_end: f64,
    /// Evaluations averaged per iteration; 1 disables averaging.
    pub repeats: usize,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::LinearTrustRegion,
            max_iters: 500,
            rho_begin: 0.5,
            rho_end: 1e-3,
            repeats: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimError {
    #[error("rho_end ({rho_end}) must be positive and below rho_begin ({rho_begin})")]
    BadRadius { rho_begin: f64, rho_end: f64 },
    #[error("max_iters and repeats must be at least 1")]
    ZeroBudget,
    #[error("starting point is empty or not finite")]
    BadStart,
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<(), OptimError> {
        if !(self.rho_end > 0.0 && self.rho_end < self.rho_begin && self.rho_begin.is_finite()) {
            return Err(OptimError::BadRadius {
                rho_begin: self.rho_begin,
                rho_end: self.rho_end,
            });
        }
        if self.max_iters == 0 || self.repeats == 0 {
            return Err(OptimError::ZeroBudget);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    /// Trust radius (or simplex size) fell to `rho_end`.
    Converged,
    MaxIterations,
    /// The objective was not finite at the starting point.
    NonFiniteStart,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub x: Vec<f64>,
    pub fun: f64,
    /// Objective calls, counting repeats and rejected evaluations.
    pub evaluations: usize,
    /// Objective value of each accepted iteration, in order.
    pub trajectory: Vec<f64>,
    /// Iterations whose objective was NaN or infinite; these are not part
    /// of the trajectory and never become the incumbent.
    pub rejected: usize,
    pub termination: Termination,
}

impl OptResult {
    /// Running minimum of the trajectory.
    pub fn best_so_far(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.trajectory
            .iter()
            .map(|&v| {
                best = best.min(v);
                best
            })
            .collect()
    }
}

/// Reported to the observer after every accepted iteration.
#[derive(Debug)]
pub struct Progress<'a> {
    pub iteration: usize,
    pub x: &'a [f64],
    pub value: f64,
    pub best: f64,
    pub improved: bool,
}

struct Evaluator<'a, F, C> {
    objective: F,
    observer: C,
    cfg: &'a OptimizerConfig,
    iterations: usize,
    calls: usize,
    rejected: usize,
    trajectory: Vec<f64>,
    best_x: Vec<f64>,
    best_f: f64,
}

impl<F, C> Evaluator<'_, F, C>
where
    F: FnMut(&[f64], u64) -> f64,
    C: FnMut(&Progress<'_>),
{
    fn exhausted(&self) -> bool {
        self.iterations >= self.cfg.max_iters
    }

    /// `None` when the value is not finite.
    fn eval(&mut self, x: &[f64]) -> Option<f64> {
        let it = self.iterations as u64;
        self.iterations += 1;
        let mut sum = 0.0;
        for r in 0..self.cfg.repeats {
            self.calls += 1;
            sum += (self.objective)(x, derive_seed(self.cfg.seed, &[it, r as u64]));
        }
        let v = sum / self.cfg.repeats as f64;
        if !v.is_finite() {
            self.rejected += 1;
            return None;
        }
        self.trajectory.push(v);
        let improved = v < self.best_f;
        if improved {
            self.best_f = v;
            self.best_x.clear();
            self.best_x.extend_from_slice(x);
        }
        (self.observer)(&Progress {
            iteration: self.trajectory.len() - 1,
            x,
            value: v,
            best: self.best_f,
            improved,
        });
        Some(v)
    }

    fn finish(self, termination: Termination) -> OptResult {
        OptResult {
            x: self.best_x,
            fun: self.best_f,
            evaluations: self.calls,
            trajectory: self.trajectory,
            rejected: self.rejected,
            termination,
        }
    }
}

/// Minimizes `objective(x, seed)` from `x0`.
pub fn minimize<F>(objective: F, x0: &[f64], cfg: &OptimizerConfig) -> Result<OptResult, OptimError>
where
    F: FnMut(&[f64], u64) -> f64,
{
    minimize_observed(objective, x0, cfg, |_| {})
}

/// [`minimize`] with a callback after every accepted iteration.
pub fn minimize_observed<F, C>(
    objective: F,
    x0: &[f64],
    cfg: &OptimizerConfig,
    observer: C,
) -> Result<OptResult, OptimError>
where
    F: FnMut(&[f64], u64) -> f64,
    C: FnMut(&Progress<'_>),
{
    cfg.validate()?;
    if x0.is_empty() || x0.iter().any(|v| !v.is_finite()) {
        return Err(OptimError::BadStart);
    }
    let mut ev = Evaluator {
        objective,
        observer,
        cfg,
        iterations: 0,
        calls: 0,
        rejected: 0,
        trajectory: Vec::new(),
        best_x: x0.to_vec(),
        best_f: f64::INFINITY,
    };
    let Some(f0) = ev.eval(x0) else {
        return Ok(ev.finish(Termination::NonFiniteStart));
    };
    let termination = match cfg.algorithm {
        Algorithm::LinearTrustRegion => trust_region(&mut ev, x0, f0),
        Algorithm::NelderMead => nelder_mead(&mut ev, x0, f0),
    };
    Ok(ev.finish(termination))
}

/// Inverse of a square row-major matrix by Gauss-Jordan elimination with
/// partial pivoting; `None` when numerically singular.
fn invert(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let scale = a.iter().flat_map(|r| r.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() < 1e-13 * scale {
            return None;
        }
        m.swap(col, piv);
        let p = m[col][col];
        m[col].iter_mut().for_each(|v| *v /= p);
        let pivot_row = m[col].clone();
        for (i, row) in m.iter_mut().enumerate() {
            if i != col {
                let f = row[col];
                if f != 0.0 {
                    row.iter_mut().zip(&pivot_row).for_each(|(v, p)| *v -= f * p);
                }
            }
        }
    }
    Some(m.into_iter().map(|r| r[n..].to_vec()).collect())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

// Simplex acceptability constants from Powell's COBYLA.
const ALPHA: f64 = 0.25;
const BETA: f64 = 2.1;
const GAMMA: f64 = 0.5;
const ACCEPT_RATIO: f64 = 0.1;

fn trust_region<F, C>(ev: &mut Evaluator<'_, F, C>, x0: &[f64], f0: f64) -> Termination
where
    F: FnMut(&[f64], u64) -> f64,
    C: FnMut(&Progress<'_>),
{
    let d = x0.len();
    let mut rho = ev.cfg.rho_begin;
    let mut pts: Vec<Vec<f64>> = vec![x0.to_vec()];
    let mut vals = vec![f0];

    // Initial simplex along the coordinate axes, trying the opposite
    // direction when a vertex evaluates to a non-finite value.
    for i in 0..d {
        let mut placed = false;
        for sign in [1.0, -1.0] {
            if ev.exhausted() {
                return Termination::MaxIterations;
            }
            let mut x = x0.to_vec();
            x[i] += sign * rho;
            if let Some(v) = ev.eval(&x) {
                pts.push(x);
                vals.push(v);
                placed = true;
                break;
            }
        }
        if !placed {
            // Keep going with a collapsed vertex; the geometry step repairs it.
            let mut x = x0.to_vec();
            x[i] += rho * 1e-3;
            pts.push(x);
            vals.push(f0);
        }
    }

    loop {
        // Best vertex first; ties keep the current order.
        let best = (0..=d).fold(0, |b, i| if vals[i] < vals[b] { i } else { b });
        pts.swap(0, best);
        vals.swap(0, best);

        if ev.exhausted() {
            return Termination::MaxIterations;
        }

        let rows: Vec<Vec<f64>> = pts[1..]
            .iter()
            .map(|p| p.iter().zip(&pts[0]).map(|(a, b)| a - b).collect())
            .collect();
        let Some(inv) = invert(&rows) else {
            // Degenerate simplex: rebuild around the incumbent.
            let x = pts[0].clone();
            for i in 0..d {
                let mut y = x.clone();
                y[i] += rho;
                if ev.exhausted() {
                    return Termination::MaxIterations;
                }
                let v = ev.eval(&y).unwrap_or(vals[0]);
                pts[i + 1] = y;
                vals[i + 1] = v;
            }
            continue;
        };
        let df: Vec<f64> = vals[1..].iter().map(|v| v - vals[0]).collect();
        // A g = df  =>  g = A^-1 df.
        let g: Vec<f64> = (0..d).map(|r| (0..d).map(|c| inv[r][c] * df[c]).sum()).collect();
        // Column j of A^-1 is normal to the face opposite vertex j + 1.
        let col = |j: usize| -> Vec<f64> { (0..d).map(|r| inv[r][j]).collect() };
        let dists: Vec<f64> = rows.iter().map(|r| norm(r)).collect();
        let sigmas: Vec<f64> = (0..d).map(|j| 1.0 / norm(&col(j))).collect();

        let far = (0..d).max_by(|&a, &b| dists[a].total_cmp(&dists[b])).unwrap();
        let thin = (0..d).min_by(|&a, &b| sigmas[a].total_cmp(&sigmas[b])).unwrap();
        let repair = if dists[far] > BETA * rho {
            Some(far)
        } else if sigmas[thin] < ALPHA * rho {
            Some(thin)
        } else {
            None
        };

        if let Some(j) = repair {
            let n = col(j);
            let nn = norm(&n);
            let dir_dot_g: f64 = n.iter().zip(&g).map(|(a, b)| a * b).sum();
            let sign = if dir_dot_g > 0.0 { -1.0 } else { 1.0 };
            let x: Vec<f64> = pts[0]
                .iter()
                .zip(&n)
                .map(|(p, v)| p + sign * GAMMA * rho * v / nn)
                .collect();
            match ev.eval(&x) {
                Some(v) => {
                    pts[j + 1] = x;
                    vals[j + 1] = v;
                }
                None => {
                    // Shrink the offending vertex towards the incumbent.
                    let x: Vec<f64> = pts[0].iter().zip(&pts[j + 1]).map(|(a, b)| a + 0.5 * (b - a)).collect();
                    pts[j + 1] = x;
                }
            }
            continue;
        }

        let gn = norm(&g);
        let mut failed = gn == 0.0 || !gn.is_finite();
        if !failed {
            let step: Vec<f64> = g.iter().map(|v| -rho * v / gn).collect();
            let x: Vec<f64> = pts[0].iter().zip(&step).map(|(a, s)| a + s).collect();
            let predicted = rho * gn;
            match ev.eval(&x) {
                Some(v) => {
                    let ratio = (vals[0] - v) / predicted;
                    // Swap out the vertex whose removal keeps the simplex
                    // fattest: largest barycentric weight of the step,
                    // favouring far-away vertices.
                    let j = (0..d)
                        .map(|j| {
                            let c: f64 = col(j).iter().zip(&step).map(|(a, b)| a * b).sum();
                            (j, c.abs() * (dists[j] / rho).max(1.0))
                        })
                        .max_by(|a, b| a.1.total_cmp(&b.1))
                        .map(|(j, _)| j)
                        .unwrap();
                    pts[j + 1] = x;
                    vals[j + 1] = v;
                    failed = ratio < ACCEPT_RATIO;
                }
                None => failed = true,
            }
        }
        if failed {
            if rho <= ev.cfg.rho_end {
                return Termination::Converged;
            }
            rho = (rho * 0.5).max(ev.cfg.rho_end);
        }
    }
}

fn nelder_mead<F, C>(ev: &mut Evaluator<'_, F, C>, x0: &[f64], f0: f64) -> Termination
where
    F: FnMut(&[f64], u64) -> f64,
    C: FnMut(&Progress<'_>),
{
    let d = x0.len();
    let rho = ev.cfg.rho_begin;
    let mut pts: Vec<Vec<f64>> = vec![x0.to_vec()];
    let mut vals = vec![f0];
    for i in 0..d {
        if ev.exhausted() {
            return Termination::MaxIterations;
        }
        let mut x = x0.to_vec();
        x[i] += rho;
        let v = ev.eval(&x).unwrap_or(f64::INFINITY);
        pts.push(x);
        vals.push(v);
    }
    let eval = |ev: &mut Evaluator<'_, F, C>, x: &[f64]| ev.eval(x).unwrap_or(f64::INFINITY);
    loop {
        let mut order: Vec<usize> = (0..=d).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();

        let size = pts[1..].iter().map(|p| dist(p, &pts[0])).fold(0.0, f64::max);
        if size <= ev.cfg.rho_end {
            return Termination::Converged;
        }
        if ev.exhausted() {
            return Termination::MaxIterations;
        }
        let centroid: Vec<f64> = (0..d)
            .map(|k| pts[..d].iter().map(|p| p[k]).sum::<f64>() / d as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&pts[d]).map(|(c, w)| c + t * (w - c)).collect() };
        let xr = along(-1.0);
        let fr = eval(ev, &xr);
        if fr < vals[0] {
            if ev.exhausted() {
                pts[d] = xr;
                vals[d] = fr;
                continue;
            }
            let xe = along(-2.0);
            let fe = eval(ev, &xe);
            if fe < fr {
                pts[d] = xe;
                vals[d] = fe;
            } else {
                pts[d] = xr;
                vals[d] = fr;
            }
            continue;
        }
        if fr < vals[d - 1] {
            pts[d] = xr;
            vals[d] = fr;
            continue;
        }
        if ev.exhausted() {
            return Termination::MaxIterations;
        }
        let (xc, fc) = if fr < vals[d] {
            let x = along(-0.5);
            let f = eval(ev, &x);
            (x, f)
        } else {
            let x = along(0.5);
            let f = eval(ev, &x);
            (x, f)
        };
        if fc < vals[d].min(fr) {
            pts[d] = xc;
            vals[d] = fc;
            continue;
        }
        for i in 1..=d {
            if ev.exhausted() {
                return Termination::MaxIterations;
            }
            let x: Vec<f64> = pts[0].iter().zip(&pts[i]).map(|(b, p)| b + 0.5 * (p - b)).collect();
            vals[i] = eval(ev, &x);
            pts[i] = x;
        }
    }
}
