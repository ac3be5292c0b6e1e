//! Limited-memory BFGS with a backtracking Armijo line search and a
//! caller-supplied step bound.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub max_iter: usize,
    /// Stop once `‖g‖ ≤ grad_tol · ‖g₀‖`.
    pub grad_tol: f64,
    /// Step shrink factor per rejected trial.
    pub backtrack: f64,
    /// Armijo sufficient-decrease constant.
    pub c1: f64,
    pub max_backtracks: usize,
    /// Largest per-component change of the very first trial step. Later
    /// iterations start from the unit quasi-Newton step.
    pub first_step_max_change: f64,
    /// Stop when the objective falls to or below this value.
    pub loss_floor: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iter: 100,
            grad_tol: 1e-6,
            backtrack: 0.5,
            c1: 1e-4,
            max_backtracks: 30,
            first_step_max_change: 1.0,
            loss_floor: 0.0,
        }
    }
}

pub trait Objective {
    /// Objective only; used inside the line search.
    fn value(&mut self, x: &[f64]) -> Result<f64>;

    fn value_and_gradient(&mut self, x: &[f64]) -> Result<(f64, Vec<f64>)>;

    /// Largest `α` keeping `x + α d` feasible.
    fn max_step(&self, _x: &[f64], _d: &[f64]) -> f64 {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    GradientTolerance,
    LossFloor,
    MaxIterations,
    LineSearchFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    /// Objective at the start and after every accepted step.
    pub losses: Vec<f64>,
    pub grad_norms: Vec<f64>,
    /// Accepted step lengths `α`.
    pub steps: Vec<f64>,
    pub termination: Termination,
}

impl LbfgsResult {
    pub fn iterations(&self) -> usize {
        self.steps.len()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Two-loop recursion: returns `-H g`.
fn direction(g: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot(s, &q);
        q.iter_mut().zip(y).for_each(|(q, y)| *q -= a * y);
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|q| *q *= gamma);
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        q.iter_mut().zip(s).for_each(|(q, s)| *q += (a - b) * s);
    }
    q.iter_mut().for_each(|q| *q = -*q);
    q
}

/// Minimizes `obj` from `x0`. `on_accept` sees each accepted iterate.
pub fn minimize(
    obj: &mut dyn Objective,
    x0: Vec<f64>,
    opts: &LbfgsOptions,
    mut on_accept: impl FnMut(usize, &[f64], f64),
) -> Result<LbfgsResult> {
    let mut x = x0;
    let (mut f, mut g) = obj.value_and_gradient(&x)?;
    let g0 = norm(&g);
    let mut out = LbfgsResult {
        x: Vec::new(),
        losses: vec![f],
        grad_norms: vec![g0],
        steps: Vec::new(),
        termination: Termination::MaxIterations,
    };
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();

    for it in 0..opts.max_iter {
        if f <= opts.loss_floor {
            out.termination = Termination::LossFloor;
            break;
        }
        let gn = norm(&g);
        if gn == 0.0 || gn <= opts.grad_tol * g0 {
            out.termination = Termination::GradientTolerance;
            break;
        }
        let mut d = direction(&g, &history);
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            // Curvature pairs went stale; fall back to steepest descent.
            history.clear();
            d = g.iter().map(|v| -v).collect();
            slope = -gn * gn;
        }
        let mut alpha = if history.is_empty() {
            let peak = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            opts.first_step_max_change / peak
        } else {
            1.0
        };
        alpha = alpha.min(0.99 * obj.max_step(&x, &d));

        let mut accepted = None;
        for _ in 0..=opts.max_backtracks {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(x, d)| x + alpha * d).collect();
            let ft = obj.value(&trial)?;
            if ft.is_finite() && ft <= f + opts.c1 * alpha * slope && ft < f {
                accepted = Some(trial);
                break;
            }
            alpha *= opts.backtrack;
        }
        let Some(x_new) = accepted else {
            out.termination = Termination::LineSearchFailed;
            break;
        };
        let (f_new, g_new) = obj.value_and_gradient(&x_new)?;
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        x = x_new;
        f = f_new;
        g = g_new;
        out.losses.push(f);
        out.grad_norms.push(norm(&g));
        out.steps.push(alpha);
        on_accept(it + 1, &x, f);
    }
    out.x = x;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Rosenbrock;

    impl Objective for Rosenbrock {
        fn value(&mut self, x: &[f64]) -> Result<f64> {
            Ok((1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2))
        }

        fn value_and_gradient(&mut self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
            let f = self.value(x)?;
            let g = vec![
                -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]),
                200.0 * (x[1] - x[0] * x[0]),
            ];
            Ok((f, g))
        }
    }

    #[test]
    fn solves_rosenbrock_with_decreasing_loss() {
        let opts = LbfgsOptions { max_iter: 200, grad_tol: 1e-10, first_step_max_change: 0.1, ..Default::default() };
        let r = minimize(&mut Rosenbrock, vec![-1.2, 1.0], &opts, |_, _, _| {}).unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6, "{:?}", r.x);
        assert!(r.losses.windows(2).all(|w| w[1] < w[0]));
    }

    /// Quadratic with a lower bound on every coordinate.
    struct Bounded;

    impl Objective for Bounded {
        fn value(&mut self, x: &[f64]) -> Result<f64> {
            Ok(x.iter().map(|v| (v + 3.0).powi(2)).sum())
        }

        fn value_and_gradient(&mut self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
            Ok((self.value(x)?, x.iter().map(|v| 2.0 * (v + 3.0)).collect()))
        }

        fn max_step(&self, x: &[f64], d: &[f64]) -> f64 {
            x.iter()
                .zip(d)
                .filter(|(_, d)| **d < 0.0)
                .map(|(x, d)| (x - 1.0) / -d)
                .fold(f64::INFINITY, f64::min)
        }
    }

    #[test]
    fn respects_step_bound_and_stops_at_floor() {
        let r = minimize(&mut Bounded, vec![5.0, 4.0], &LbfgsOptions { first_step_max_change: 100.0, ..Default::default() }, |_, x, _| {
            assert!(x.iter().all(|&v| v > 1.0));
        })
        .unwrap();
        assert!(r.x.iter().all(|&v| v > 1.0));

        let opts = LbfgsOptions { loss_floor: 1e-3, ..Default::default() };
        let r = minimize(&mut Bounded, vec![-3.0, -3.0], &opts, |_, _, _| {}).unwrap();
        assert_eq!(r.termination, Termination::LossFloor);
        assert_eq!(r.iterations(), 0);
    }
}
