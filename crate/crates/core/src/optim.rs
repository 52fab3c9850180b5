//! Limited-memory quasi-Newton descent with a backtracking Armijo line
//! search. Used for loops and lattice fields, both parametrised by one angle
//! per node so that every iterate is exactly circle valued.

use serde::{Deserialize, Serialize};

/// A differentiable energy on `R^n`.
pub trait Objective {
    fn dim(&self) -> usize;

    /// Returns the value at `x` and writes the gradient into `grad`.
    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;

    /// Trial points failing this test are rejected by the line search.
    fn admissible(&self, _x: &[f64]) -> bool {
        true
    }
}

/// Stopping and step parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescentConfig {
    pub max_iter: usize,
    /// Stop once the Euclidean gradient norm is at most this.
    pub grad_tol: f64,
    /// Stop once the energy decreased by less than `rel_tol` (relative) over
    /// the last `stall_window` iterations.
    pub rel_tol: f64,
    pub stall_window: usize,
    /// Step length of the first steepest-descent step, in units of the
    /// inverse gradient norm.
    pub initial_step: f64,
    /// Number of stored correction pairs.
    pub memory: usize,
}

impl Default for DescentConfig {
    fn default() -> Self {
        Self {
            max_iter: 5000,
            grad_tol: 1e-10,
            rel_tol: 1e-12,
            stall_window: 50,
            initial_step: 1e-2,
            memory: 12,
        }
    }
}

/// Why the iteration ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Gradient,
    Stalled,
    LineSearch,
    MaxIter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescentReport {
    pub x: Vec<f64>,
    pub energy: f64,
    /// Energy after every accepted step, starting with the initial energy.
    pub energies: Vec<f64>,
    pub grad_norm: f64,
    pub iterations: usize,
    pub reason: StopReason,
}

impl DescentReport {
    /// Whether the iteration ended before the iteration cap. A stalled line
    /// search counts: near a minimiser no step decreases the energy beyond
    /// rounding.
    pub fn converged(&self) -> bool {
        self.reason != StopReason::MaxIter
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

const MAX_HALVINGS: usize = 60;
const ARMIJO: f64 = 1e-4;

/// Slack, in units of the energy's rounding error, allowed when a step is
/// accepted on derivative information alone.
pub const ROUNDING_SLACK: f64 = 64.0 * f64::EPSILON;

/// Along `x - t dir`, finds `t` where the directional derivative has shrunk
/// to a tenth of its initial size. Accepts only if the energy did not grow
/// beyond rounding.
#[allow(clippy::too_many_arguments)]
fn derivative_search<O: Objective + ?Sized>(
    obj: &O,
    x: &[f64],
    dir: &[f64],
    slope: f64,
    t0: f64,
    e: f64,
    xt: &mut [f64],
    gt: &mut [f64],
) -> Option<f64> {
    let eval = |t: f64, xt: &mut [f64], gt: &mut [f64]| -> Option<(f64, f64)> {
        for i in 0..x.len() {
            xt[i] = x[i] - t * dir[i];
        }
        if !obj.admissible(xt) {
            return None;
        }
        let et = obj.value_grad(xt, gt);
        Some((et, -dot(gt, dir)))
    };
    let mut lo = 0.0;
    let mut hi = None;
    let mut t = t0;
    for _ in 0..40 {
        match eval(t, xt, gt) {
            None => {
                hi = Some(t);
                break;
            }
            Some((_, d)) if d >= 0.0 => {
                hi = Some(t);
                break;
            }
            Some(_) => {
                lo = t;
                t *= 2.0;
            }
        }
    }
    let mut hi = hi?;
    let mut best = None;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        match eval(mid, xt, gt) {
            Some((et, d)) => {
                if d.abs() <= 0.1 * slope.abs() {
                    best = Some((mid, et));
                    break;
                }
                if d < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            None => hi = mid,
        }
    }
    let (t, et) = best?;
    (et.is_finite() && et <= e + ROUNDING_SLACK * e.abs().max(1.0)).then_some(t)
}

/// Minimises `obj` from `x0`. Steps found by the Armijo search strictly
/// decrease the energy; steps found by the derivative fallback may raise it
/// by at most [`ROUNDING_SLACK`] relative.
pub fn minimize<O: Objective + ?Sized>(obj: &O, x0: &[f64], cfg: &DescentConfig) -> DescentReport {
    let n = obj.dim();
    assert_eq!(x0.len(), n, "starting point has the wrong dimension");
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut e = obj.value_grad(&x, &mut g);
    let mut energies = vec![e];
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut rho_hist: Vec<f64> = Vec::new();
    let mut xt = vec![0.0; n];
    let mut gt = vec![0.0; n];
    let mut dir = vec![0.0; n];
    let mut iterations = 0;
    let reason = loop {
        let gn = dot(&g, &g).sqrt();
        if gn <= cfg.grad_tol {
            break StopReason::Gradient;
        }
        if iterations >= cfg.max_iter {
            break StopReason::MaxIter;
        }
        if cfg.rel_tol > 0.0 && energies.len() > cfg.stall_window {
            let old = energies[energies.len() - 1 - cfg.stall_window];
            if (old - e) <= cfg.rel_tol * e.abs().max(f64::MIN_POSITIVE) {
                break StopReason::Stalled;
            }
        }
        let mut accepted = false;
        for attempt in 0..2 {
            let quasi_newton = attempt == 0 && !s_hist.is_empty();
            // Two-loop recursion.
            dir.copy_from_slice(&g);
            let mut step;
            if quasi_newton {
                let m = s_hist.len();
                let mut alpha = vec![0.0; m];
                for i in (0..m).rev() {
                    alpha[i] = rho_hist[i] * dot(&s_hist[i], &dir);
                    for (d, y) in dir.iter_mut().zip(&y_hist[i]) {
                        *d -= alpha[i] * y;
                    }
                }
                let gamma = dot(&s_hist[m - 1], &y_hist[m - 1]) / dot(&y_hist[m - 1], &y_hist[m - 1]);
                for d in dir.iter_mut() {
                    *d *= gamma;
                }
                for i in 0..m {
                    let beta = rho_hist[i] * dot(&y_hist[i], &dir);
                    for (d, s) in dir.iter_mut().zip(&s_hist[i]) {
                        *d += (alpha[i] - beta) * s;
                    }
                }
                step = 1.0;
            } else {
                step = cfg.initial_step / gn;
            }
            let slope = -dot(&g, &dir);
            if !(slope < 0.0) {
                continue;
            }
            let step0 = step;
            for _ in 0..MAX_HALVINGS {
                for i in 0..n {
                    xt[i] = x[i] - step * dir[i];
                }
                if obj.admissible(&xt) {
                    let et = obj.value_grad(&xt, &mut gt);
                    if et.is_finite() && et <= e + ARMIJO * step * slope && et < e {
                        accepted = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            if !accepted && attempt == 1 {
                // Near a minimiser energy differences drown in rounding, so
                // fall back to locating a zero of the directional derivative.
                if let Some(t) = derivative_search(obj, &x, &dir, slope, step0, e, &mut xt, &mut gt) {
                    let _ = t;
                    accepted = true;
                }
            }
            if accepted {
                let s: Vec<f64> = xt.iter().zip(&x).map(|(a, b)| a - b).collect();
                let y: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
                let sy = dot(&s, &y);
                if sy > 1e-16 * dot(&y, &y).max(f64::MIN_POSITIVE) && sy > 0.0 {
                    if s_hist.len() == cfg.memory {
                        s_hist.remove(0);
                        y_hist.remove(0);
                        rho_hist.remove(0);
                    }
                    rho_hist.push(1.0 / sy);
                    s_hist.push(s);
                    y_hist.push(y);
                }
                std::mem::swap(&mut x, &mut xt);
                std::mem::swap(&mut g, &mut gt);
                e = obj.value_grad(&x, &mut g);
                energies.push(e);
                break;
            }
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
        }
        iterations += 1;
        if !accepted {
            break StopReason::LineSearch;
        }
    };
    let grad_norm = dot(&g, &g).sqrt();
    DescentReport {
        x,
        energy: e,
        energies,
        grad_norm,
        iterations,
        reason,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Rosenbrock;

    impl Objective for Rosenbrock {
        fn dim(&self) -> usize {
            2
        }
        fn value_grad(&self, x: &[f64], g: &mut [f64]) -> f64 {
            let (a, b) = (x[0], x[1]);
            g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
            g[1] = 200.0 * (b - a * a);
            (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
        }
    }

    #[test]
    fn minimises_rosenbrock() {
        let r = minimize(&Rosenbrock, &[-1.2, 1.0], &DescentConfig::default());
        assert!(r.converged(), "{:?}", r.reason);
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6);
        assert!(r.energies.windows(2).all(|w| w[1] <= w[0]));
    }

    struct Boxed;

    impl Objective for Boxed {
        fn dim(&self) -> usize {
            1
        }
        fn value_grad(&self, x: &[f64], g: &mut [f64]) -> f64 {
            g[0] = 2.0 * (x[0] - 5.0);
            (x[0] - 5.0).powi(2)
        }
        fn admissible(&self, x: &[f64]) -> bool {
            x[0] <= 2.0
        }
    }

    #[test]
    fn respects_admissible_region() {
        let r = minimize(&Boxed, &[0.0], &DescentConfig::default());
        assert!(r.x[0] <= 2.0);
        assert!(r.x[0] > 1.9);
    }
}
