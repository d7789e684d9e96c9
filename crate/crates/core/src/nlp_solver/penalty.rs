//! Quadratic-penalty stage: L-BFGS on free point coordinates with the
//! distance to each assigned boundary penalized, under penalty continuation.
//!
//! This stage lets points slide between the factors of product boundaries
//! before the exact chart-space polish fixes the branch assignment.

use std::collections::VecDeque;

use crate::geometry::{BoundaryExpr, Vec3};

pub(crate) struct PenaltyProblem<'a> {
    pub anchor: Option<Vec3>,
    pub closed: bool,
    pub boundaries: Vec<&'a BoundaryExpr>,
    pub dim: usize,
    pub eps: f64,
}

impl<'a> PenaltyProblem<'a> {
    fn unpack(&self, x: &[f64]) -> Vec<Vec3> {
        x.chunks(self.dim)
            .map(|c| Vec3::new(c[0], c[1], if self.dim == 3 { c[2] } else { 0.0 }))
            .collect()
    }

    /// Penalty-augmented objective and its gradient.
    pub(crate) fn eval(&self, x: &[f64], mu: f64, grad: &mut [f64]) -> f64 {
        let pts = self.unpack(x);
        let k = pts.len();
        let mut g = vec![Vec3::ZERO; k];
        let mut value = 0.0;
        let leg = |from: Vec3, to: Vec3| {
            let d = to - from;
            let l = (d.norm_sq() + self.eps * self.eps).sqrt();
            (l, d * (1.0 / l))
        };
        if let Some(a) = self.anchor {
            if k > 0 {
                let (l, u) = leg(a, pts[0]);
                value += l;
                g[0] += u;
                if self.closed {
                    let (l, u) = leg(a, pts[k - 1]);
                    value += l;
                    g[k - 1] += u;
                }
            }
        }
        for j in 1..k {
            let (l, u) = leg(pts[j - 1], pts[j]);
            value += l;
            g[j] += u;
            g[j - 1] -= u;
        }
        for (j, b) in self.boundaries.iter().enumerate() {
            let diff = pts[j] - b.project_at(pts[j]);
            value += mu * diff.norm_sq();
            g[j] += diff * (2.0 * mu);
        }
        for (j, gj) in g.iter().enumerate() {
            for a in 0..self.dim {
                grad[j * self.dim + a] = gj.get(a);
            }
        }
        value
    }

    pub(crate) fn max_distance(&self, x: &[f64]) -> f64 {
        self.unpack(x)
            .iter()
            .zip(&self.boundaries)
            .map(|(p, b)| b.distance_at(*p))
            .fold(0.0, f64::max)
    }

    pub(crate) fn points(&self, x: &[f64]) -> Vec<Vec3> {
        self.unpack(x)
    }

    pub(crate) fn pack(&self, pts: &[Vec3]) -> Vec<f64> {
        pts.iter()
            .flat_map(|p| (0..self.dim).map(move |a| p.get(a)))
            .collect()
    }
}

pub(crate) struct PenaltySettings {
    pub mu_init: f64,
    pub mu_growth: f64,
    pub stages: usize,
    pub inner_iter: usize,
    /// Stop once every point is this close to its boundary.
    pub dist_tol: f64,
}

pub(crate) struct PenaltyOutcome {
    pub points: Vec<Vec3>,
    /// Objective after every accepted inner step, per stage.
    pub history: Vec<Vec<f64>>,
}

pub(crate) fn run(problem: &PenaltyProblem<'_>, start: &[Vec3], settings: &PenaltySettings) -> PenaltyOutcome {
    let mut x = problem.pack(start);
    let mut mu = settings.mu_init;
    let mut history = Vec::new();
    for _ in 0..settings.stages {
        let trace = lbfgs(&mut x, settings.inner_iter, |x, g| problem.eval(x, mu, g));
        history.push(trace);
        if problem.max_distance(&x) <= settings.dist_tol {
            break;
        }
        mu *= settings.mu_growth;
    }
    PenaltyOutcome {
        points: problem.points(&x),
        history,
    }
}

/// Limited-memory BFGS with Armijo backtracking. Returns the objective after
/// each accepted step (nonincreasing by construction).
pub(crate) fn lbfgs(x: &mut [f64], max_iter: usize, mut f: impl FnMut(&[f64], &mut [f64]) -> f64) -> Vec<f64> {
    const MEMORY: usize = 8;
    let n = x.len();
    let mut g = vec![0.0; n];
    let mut value = f(x, &mut g);
    let mut trace = vec![value];
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(MEMORY);
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
    let mut trial = vec![0.0; n];
    let mut g_trial = vec![0.0; n];
    for _ in 0..max_iter {
        // Two-loop recursion.
        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut alphas = Vec::with_capacity(pairs.len());
        for (s, y, rho) in pairs.iter().rev() {
            let a = rho * dot(s, &d);
            for (di, yi) in d.iter_mut().zip(y) {
                *di -= a * yi;
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = pairs.back() {
            let gamma = dot(s, y) / dot(y, y);
            for di in d.iter_mut() {
                *di *= gamma;
            }
        } else {
            let gn = dot(&g, &g).sqrt();
            if gn > 0.0 {
                let scale = 1.0 / gn.max(1.0);
                for di in d.iter_mut() {
                    *di *= scale;
                }
            }
        }
        for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &d);
            for (di, si) in d.iter_mut().zip(s) {
                *di += (a - b) * si;
            }
        }
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            pairs.clear();
            d = g.iter().map(|v| -v).collect();
            slope = dot(&g, &d);
            if !(slope < 0.0) {
                break;
            }
        }
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..50 {
            for i in 0..n {
                trial[i] = x[i] + step * d[i];
            }
            let v = f(&trial, &mut g_trial);
            if v <= value + 1e-4 * step * slope {
                accepted = true;
                let s: Vec<f64> = (0..n).map(|i| trial[i] - x[i]).collect();
                let y: Vec<f64> = (0..n).map(|i| g_trial[i] - g[i]).collect();
                let sy = dot(&s, &y);
                if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
                    if pairs.len() == MEMORY {
                        pairs.pop_front();
                    }
                    pairs.push_back((s, y, 1.0 / sy));
                }
                let decrease = value - v;
                x.copy_from_slice(&trial);
                g.copy_from_slice(&g_trial);
                value = v;
                trace.push(value);
                if decrease <= 1e-13 * value.abs().max(1e-300) {
                    return trace;
                }
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    trace
}
