//! Parameterizations of boundary pieces and the chart-space Newton polish.
//!
//! Once every escape point is assigned to one leaf factor of its boundary,
//! the point can be written as `p_j = chart_j(t_j)` with at most two free
//! parameters, which turns the constrained problem into an unconstrained
//! one (up to segment bounds). Consecutive points share one leg, so the
//! Hessian of the length is block tridiagonal.

use crate::geometry::{BoundaryExpr, Vec3};

pub(crate) type Params = [f64; 2];
type Block = [[f64; 2]; 2];

const ZERO_BLOCK: Block = [[0.0; 2]; 2];

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum Chart {
    Fixed(Vec3),
    Line { origin: Vec3, dir: Vec3 },
    Circle { center: Vec3, radius: f64 },
    /// `start + t * span` with `t` in `[0, 1]`.
    Segment { start: Vec3, span: Vec3 },
    Plane { origin: Vec3, e1: Vec3, e2: Vec3 },
}

impl Chart {
    pub(crate) fn of(factor: &BoundaryExpr) -> Chart {
        match factor {
            BoundaryExpr::Line { angle, offset } => {
                let (s, c) = angle.sin_cos();
                Chart::Line {
                    origin: Vec3::new(c * offset, s * offset, 0.0),
                    dir: Vec3::new(-s, c, 0.0),
                }
            }
            BoundaryExpr::Circle { center, radius } => Chart::Circle {
                center: center.extend(0.0),
                radius: *radius,
            },
            BoundaryExpr::PointTarget { target } => Chart::Fixed(target.extend(0.0)),
            BoundaryExpr::Segment { start, end } => {
                let span = (*end - *start).extend(0.0);
                if span.norm_sq() == 0.0 {
                    Chart::Fixed(start.extend(0.0))
                } else {
                    Chart::Segment {
                        start: start.extend(0.0),
                        span,
                    }
                }
            }
            BoundaryExpr::Plane3 { normal, offset } => {
                let helper = if normal.x.abs() < 0.9 {
                    Vec3::new(1.0, 0.0, 0.0)
                } else {
                    Vec3::new(0.0, 1.0, 0.0)
                };
                let e1 = normal.cross(helper).normalized().expect("normal is a unit vector");
                let e2 = normal.cross(e1);
                Chart::Plane {
                    origin: *normal * *offset,
                    e1,
                    e2,
                }
            }
            BoundaryExpr::Product { .. } => unreachable!("charts are built for leaf factors"),
        }
    }

    pub(crate) fn nparams(&self) -> usize {
        match self {
            Chart::Fixed(_) => 0,
            Chart::Line { .. } | Chart::Circle { .. } | Chart::Segment { .. } => 1,
            Chart::Plane { .. } => 2,
        }
    }

    pub(crate) fn point(&self, t: Params) -> Vec3 {
        match *self {
            Chart::Fixed(p) => p,
            Chart::Line { origin, dir } => origin + dir * t[0],
            Chart::Circle { center, radius } => {
                let (s, c) = t[0].sin_cos();
                center + Vec3::new(c * radius, s * radius, 0.0)
            }
            Chart::Segment { start, span } => start + span * t[0],
            Chart::Plane { origin, e1, e2 } => origin + e1 * t[0] + e2 * t[1],
        }
    }

    fn jacobian(&self, t: Params) -> [Vec3; 2] {
        match *self {
            Chart::Fixed(_) => [Vec3::ZERO; 2],
            Chart::Line { dir, .. } => [dir, Vec3::ZERO],
            Chart::Circle { radius, .. } => {
                let (s, c) = t[0].sin_cos();
                [Vec3::new(-s * radius, c * radius, 0.0), Vec3::ZERO]
            }
            Chart::Segment { span, .. } => [span, Vec3::ZERO],
            Chart::Plane { e1, e2, .. } => [e1, e2],
        }
    }

    /// `g . d^2 p / dt_a dt_b`.
    fn curvature(&self, t: Params, g: Vec3) -> Block {
        match *self {
            Chart::Circle { radius, .. } => {
                let (s, c) = t[0].sin_cos();
                [[-radius * (g.x * c + g.y * s), 0.0], [0.0, 0.0]]
            }
            _ => ZERO_BLOCK,
        }
    }

    /// Parameters of the chart point nearest to `p`.
    pub(crate) fn coords_of(&self, p: Vec3) -> Params {
        match *self {
            Chart::Fixed(_) => [0.0; 2],
            Chart::Line { origin, dir } => [(p - origin).dot(dir), 0.0],
            Chart::Circle { center, .. } => {
                let d = p - center;
                if d.x == 0.0 && d.y == 0.0 {
                    [0.0; 2]
                } else {
                    [d.y.atan2(d.x), 0.0]
                }
            }
            Chart::Segment { start, span } => {
                [((p - start).dot(span) / span.norm_sq()).clamp(0.0, 1.0), 0.0]
            }
            Chart::Plane { origin, e1, e2 } => [(p - origin).dot(e1), (p - origin).dot(e2)],
        }
    }

    fn bounded(&self) -> bool {
        matches!(self, Chart::Segment { .. })
    }
}

/// The chain of legs `anchor -> p_0 -> ... -> p_{K-1} [-> anchor]`.
pub(crate) struct Chain<'a> {
    pub anchor: Option<Vec3>,
    pub closed: bool,
    pub charts: &'a [Chart],
}

struct Derivatives {
    value: f64,
    grad: Vec<Params>,
    diag: Vec<Block>,
    /// `off[j]` couples point `j` (rows) with point `j + 1` (columns).
    off: Vec<Block>,
}

fn smooth_leg(d: Vec3, eps: f64) -> f64 {
    (d.norm_sq() + eps * eps).sqrt()
}

impl<'a> Chain<'a> {
    pub(crate) fn points(&self, t: &[Params]) -> Vec<Vec3> {
        self.charts.iter().zip(t).map(|(c, &t)| c.point(t)).collect()
    }

    fn objective(&self, t: &[Params], eps: f64) -> f64 {
        let pts = self.points(t);
        let mut total = 0.0;
        if let Some(a) = self.anchor {
            if let Some(&first) = pts.first() {
                total += smooth_leg(first - a, eps);
            }
            if self.closed {
                if let Some(&last) = pts.last() {
                    total += smooth_leg(a - last, eps);
                }
            }
        }
        for w in pts.windows(2) {
            total += smooth_leg(w[1] - w[0], eps);
        }
        total
    }

    fn derivatives(&self, t: &[Params], eps: f64) -> Derivatives {
        let k = self.charts.len();
        let pts = self.points(t);
        let jac: Vec<[Vec3; 2]> = self.charts.iter().zip(t).map(|(c, &t)| c.jacobian(t)).collect();
        let mut out = Derivatives {
            value: 0.0,
            grad: vec![[0.0; 2]; k],
            diag: vec![ZERO_BLOCK; k],
            off: vec![ZERO_BLOCK; k.saturating_sub(1)],
        };
        // Point-space gradient and Hessian of one leg ending at `b`.
        let leg = |d: Vec3| {
            let l = smooth_leg(d, eps);
            let g = d * (1.0 / l);
            (l, g)
        };
        let hess_quad = |d: Vec3, l: f64, u: Vec3, v: Vec3| (u.dot(v) - u.dot(d) * v.dot(d) / (l * l)) / l;
        // A leg from a fixed point to point j adds only to j's own blocks.
        let fixed_leg = |j: usize, d: Vec3, out: &mut Derivatives| {
            let (l, g) = leg(d);
            out.value += l;
            let curv = self.charts[j].curvature(t[j], g);
            for a in 0..2 {
                out.grad[j][a] += g.dot(jac[j][a]);
                for b in 0..2 {
                    out.diag[j][a][b] += hess_quad(d, l, jac[j][a], jac[j][b]) + curv[a][b];
                }
            }
        };
        if let Some(anchor) = self.anchor {
            if k > 0 {
                fixed_leg(0, pts[0] - anchor, &mut out);
                if self.closed {
                    fixed_leg(k - 1, pts[k - 1] - anchor, &mut out);
                }
            }
        }
        for j in 1..k {
            let d = pts[j] - pts[j - 1];
            let (l, g) = leg(d);
            out.value += l;
            let curv_here = self.charts[j].curvature(t[j], g);
            let curv_prev = self.charts[j - 1].curvature(t[j - 1], -g);
            for a in 0..2 {
                out.grad[j][a] += g.dot(jac[j][a]);
                out.grad[j - 1][a] -= g.dot(jac[j - 1][a]);
                for b in 0..2 {
                    out.diag[j][a][b] += hess_quad(d, l, jac[j][a], jac[j][b]) + curv_here[a][b];
                    out.diag[j - 1][a][b] +=
                        hess_quad(d, l, jac[j - 1][a], jac[j - 1][b]) + curv_prev[a][b];
                    out.off[j - 1][a][b] -= hess_quad(d, l, jac[j - 1][a], jac[j][b]);
                }
            }
        }
        out
    }
}

fn inv2(m: Block) -> Option<Block> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if !(det > 0.0 && m[0][0] > 0.0 && det.is_finite()) {
        return None;
    }
    Some([[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]])
}

fn mul(a: Block, b: Block) -> Block {
    let mut c = ZERO_BLOCK;
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

fn transpose(a: Block) -> Block {
    [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
}

fn apply(a: Block, v: Params) -> Params {
    [a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]]
}

/// Solves the block tridiagonal system `H x = rhs` by block elimination.
/// Returns `None` when a pivot is not positive definite, which signals the
/// caller to add damping.
fn solve_block_tridiagonal(diag: &[Block], off: &[Block], rhs: &[Params]) -> Option<Vec<Params>> {
    let k = diag.len();
    let mut piv_inv = Vec::with_capacity(k);
    let mut r = Vec::with_capacity(k);
    for j in 0..k {
        let (mut d, mut v) = (diag[j], rhs[j]);
        if j > 0 {
            let lower = transpose(off[j - 1]);
            let l_inv: Block = mul(lower, piv_inv[j - 1]);
            let corr = mul(l_inv, off[j - 1]);
            let rv = apply(l_inv, r[j - 1]);
            for a in 0..2 {
                v[a] -= rv[a];
                for b in 0..2 {
                    d[a][b] -= corr[a][b];
                }
            }
        }
        piv_inv.push(inv2(d)?);
        r.push(v);
    }
    let mut x = vec![[0.0; 2]; k];
    for j in (0..k).rev() {
        let mut v = r[j];
        if j + 1 < k {
            let u = apply(off[j], x[j + 1]);
            v[0] -= u[0];
            v[1] -= u[1];
        }
        x[j] = apply(piv_inv[j], v);
    }
    Some(x)
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct PolishSettings {
    pub max_iter: usize,
    pub step_tol: f64,
    /// Length scale of the instance; smoothing radii are relative to it.
    pub scale: f64,
}

#[derive(Clone, Debug)]
pub(crate) struct PolishOutcome {
    pub params: Vec<Params>,
    pub iterations: usize,
}

/// Smoothing radii (relative to the instance scale) visited in order.
const EPS_LADDER: [f64; 6] = [1e-3, 1e-5, 1e-7, 1e-9, 1e-11, 1e-13];

/// Damped Newton in chart coordinates with smoothing continuation.
pub(crate) fn polish(chain: &Chain<'_>, start: Vec<Params>, settings: PolishSettings) -> PolishOutcome {
    let k = chain.charts.len();
    let mut t = start;
    for (tj, c) in t.iter_mut().zip(chain.charts) {
        if c.bounded() {
            tj[0] = tj[0].clamp(0.0, 1.0);
        }
        if c.nparams() < 2 {
            tj[1] = 0.0;
        }
        if c.nparams() == 0 {
            tj[0] = 0.0;
        }
    }
    let mut iterations = 0;
    if chain.charts.iter().all(|c| c.nparams() == 0) {
        return PolishOutcome { params: t, iterations };
    }
    for rel_eps in EPS_LADDER {
        let eps = rel_eps * settings.scale;
        let mut lambda = 1e-8;
        for _ in 0..settings.max_iter {
            iterations += 1;
            let mut der = chain.derivatives(&t, eps);
            // Freeze unused slots and segment parameters held at a bound by
            // a gradient that points outward.
            let mut frozen = vec![[false; 2]; k];
            for j in 0..k {
                let c = &chain.charts[j];
                for a in c.nparams()..2 {
                    frozen[j][a] = true;
                }
                if c.bounded() {
                    let (tj, g) = (t[j][0], der.grad[j][0]);
                    if (tj <= 0.0 && g > 0.0) || (tj >= 1.0 && g < 0.0) {
                        frozen[j][0] = true;
                    }
                }
            }
            for j in 0..k {
                for a in 0..2 {
                    if frozen[j][a] {
                        der.grad[j][a] = 0.0;
                        for b in 0..2 {
                            der.diag[j][a][b] = if a == b { 1.0 } else { 0.0 };
                            der.diag[j][b][a] = if a == b { 1.0 } else { 0.0 };
                            if j + 1 < k {
                                der.off[j][a][b] = 0.0;
                            }
                            if j > 0 {
                                der.off[j - 1][b][a] = 0.0;
                            }
                        }
                    }
                }
            }
            let neg_grad: Vec<Params> = der.grad.iter().map(|g| [-g[0], -g[1]]).collect();
            let mut step = None;
            for _ in 0..40 {
                let damped: Vec<Block> = der
                    .diag
                    .iter()
                    .map(|d| {
                        let mut d = *d;
                        for a in 0..2 {
                            d[a][a] += lambda * d[a][a].abs().max(1.0);
                        }
                        d
                    })
                    .collect();
                if let Some(s) = solve_block_tridiagonal(&damped, &der.off, &neg_grad) {
                    step = Some(s);
                    break;
                }
                lambda = (lambda * 10.0).max(1e-8);
            }
            let Some(step) = step else { break };
            let slope: f64 = step
                .iter()
                .zip(&der.grad)
                .map(|(s, g)| s[0] * g[0] + s[1] * g[1])
                .sum();
            if !(slope < 0.0) || -slope <= 1e-15 * der.value.max(1e-300) {
                break;
            }
            let mut alpha = 1.0;
            let mut accepted = None;
            for _ in 0..60 {
                let trial: Vec<Params> = t
                    .iter()
                    .zip(&step)
                    .zip(chain.charts)
                    .map(|((tj, s), c)| {
                        let mut n = [tj[0] + alpha * s[0], tj[1] + alpha * s[1]];
                        if c.bounded() {
                            n[0] = n[0].clamp(0.0, 1.0);
                        }
                        n
                    })
                    .collect();
                let value = chain.objective(&trial, eps);
                if value <= der.value + 1e-4 * alpha * slope {
                    accepted = Some((trial, value));
                    break;
                }
                alpha *= 0.5;
            }
            let Some((trial, value)) = accepted else {
                lambda = (lambda * 100.0).max(1e-6);
                if lambda > 1e12 {
                    break;
                }
                continue;
            };
            if alpha == 1.0 {
                lambda = (lambda / 4.0).max(1e-12);
            } else if alpha < 0.1 {
                lambda *= 4.0;
            }
            let decrease = der.value - value;
            t = trial;
            let max_step = step.iter().map(|s| s[0].abs().max(s[1].abs())).fold(0.0, f64::max);
            if decrease <= settings.step_tol * 1e-3 * der.value && alpha * max_step <= 1e-13 * settings.scale.max(1.0) {
                break;
            }
            if decrease <= 1e-16 * der.value.max(1e-300) {
                break;
            }
        }
    }
    PolishOutcome { params: t, iterations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec2;

    #[test]
    fn charts_reproduce_their_factor() {
        let factors = [
            BoundaryExpr::line(0.7, -0.3),
            BoundaryExpr::circle(Vec2::new(0.5, 0.2), 1.3).unwrap(),
            BoundaryExpr::segment(Vec2::new(0.0, 1.0), Vec2::new(2.0, -1.0)).unwrap(),
            BoundaryExpr::plane3(Vec3::new(0.6, 0.0, 0.8), 2.0).unwrap(),
        ];
        for f in &factors {
            let c = Chart::of(f);
            for t in [[0.1, 0.2], [0.9, -3.0], [0.5, 0.5]] {
                let p = c.point(t);
                assert!(f.scaled_residual_at(p) < 1e-12, "{f:?}");
                let back = c.point(c.coords_of(p));
                assert!((back - p).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn block_solver_matches_dense() {
        let diag = vec![[[4.0, 1.0], [1.0, 3.0]], [[5.0, 0.5], [0.5, 4.0]], [[3.0, 0.0], [0.0, 2.0]]];
        let off = vec![[[1.0, 0.2], [0.0, 0.5]], [[0.3, 0.0], [0.4, 1.0]]];
        let rhs = vec![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        let x = solve_block_tridiagonal(&diag, &off, &rhs).unwrap();
        // Multiply back.
        for j in 0..3 {
            let mut r = apply(diag[j], x[j]);
            if j + 1 < 3 {
                let u = apply(off[j], x[j + 1]);
                r = [r[0] + u[0], r[1] + u[1]];
            }
            if j > 0 {
                let u = apply(transpose(off[j - 1]), x[j - 1]);
                r = [r[0] + u[0], r[1] + u[1]];
            }
            assert!((r[0] - rhs[j][0]).abs() < 1e-12 && (r[1] - rhs[j][1]).abs() < 1e-12);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let charts = vec![
            Chart::of(&BoundaryExpr::line(0.3, 1.0)),
            Chart::of(&BoundaryExpr::circle(Vec2::new(0.2, 0.4), 0.8).unwrap()),
            Chart::of(&BoundaryExpr::segment(Vec2::new(-1.0, 0.0), Vec2::new(0.0, 2.0)).unwrap()),
            Chart::of(&BoundaryExpr::line(2.0, 0.5)),
        ];
        let chain = Chain {
            anchor: Some(Vec3::new(0.1, -0.2, 0.0)),
            closed: true,
            charts: &charts,
        };
        let t = vec![[0.4, 0.0], [1.1, 0.0], [0.3, 0.0], [-0.7, 0.0]];
        let eps = 1e-3;
        let der = chain.derivatives(&t, eps);
        let h = 1e-6;
        for j in 0..4 {
            let mut tp = t.clone();
            tp[j][0] += h;
            let mut tm = t.clone();
            tm[j][0] -= h;
            let fd = (chain.objective(&tp, eps) - chain.objective(&tm, eps)) / (2.0 * h);
            assert!((fd - der.grad[j][0]).abs() < 1e-7, "grad {j}");
            let dp = chain.derivatives(&tp, eps);
            let dm = chain.derivatives(&tm, eps);
            let fd2 = (dp.grad[j][0] - dm.grad[j][0]) / (2.0 * h);
            assert!((fd2 - der.diag[j][0][0]).abs() < 1e-5, "diag {j}");
            if j + 1 < 4 {
                let fd_off = (dp.grad[j + 1][0] - dm.grad[j + 1][0]) / (2.0 * h);
                assert!((fd_off - der.off[j][0][0]).abs() < 1e-5, "off {j}");
            }
        }
    }

    #[test]
    fn polish_finds_straight_line_through_parallel_lines() {
        // Lines x = 1, 2, 3 from the origin: optimum is along the x axis.
        let charts: Vec<Chart> = (1..=3).map(|d| Chart::of(&BoundaryExpr::line(0.0, d as f64))).collect();
        let chain = Chain {
            anchor: Some(Vec3::ZERO),
            closed: false,
            charts: &charts,
        };
        let out = polish(
            &chain,
            vec![[0.5, 0.0], [-0.4, 0.0], [1.0, 0.0]],
            PolishSettings {
                max_iter: 200,
                step_tol: 1e-10,
                scale: 3.0,
            },
        );
        let pts = chain.points(&out.params);
        let length = crate::path::chain_length(Some(Vec3::ZERO), &pts, false);
        assert!((length - 3.0).abs() < 1e-9, "length {length}");
    }
}
