//! Fixed-order continuous minimization: given an instance and a visiting
//! order, place one point on each boundary so the polyline through them is
//! as short as possible.
//!
//! Each multistart runs a quadratic-penalty stage on free coordinates,
//! projects every point onto the nearest piece of its boundary, and then
//! polishes exactly in chart coordinates of the chosen pieces.

mod chart;
mod penalty;

use std::cmp::Ordering;
use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{BoundaryExpr, Vec2, Vec3};
use crate::order_search::OrderPlan;
use crate::path::{chain_length, Polyline};
use crate::scenario::Instance;

use chart::{Chain, Chart, Params, PolishSettings};

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOptions {
    /// Feasibility threshold on the scaled residual of every point.
    pub feas_tol: f64,
    /// Relative length change treated as stationary.
    pub step_tol: f64,
    /// Newton iterations per smoothing level of the polish.
    pub max_outer: usize,
    pub multistart: usize,
    pub seed: u64,
    pub penalty_init: f64,
    pub penalty_growth: f64,
    /// Largest number of branch combinations enumerated exhaustively.
    pub branch_budget: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            feas_tol: 1e-8,
            step_tol: 1e-10,
            max_outer: 200,
            multistart: 16,
            seed: 0,
            penalty_init: 10.0,
            penalty_growth: 5.0,
            branch_budget: 64,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.feas_tol, self.step_tol, self.penalty_init];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidInput("solver tolerances must be positive".into()));
        }
        if self.max_outer == 0 || self.multistart == 0 || self.branch_budget == 0 {
            return Err(Error::InvalidInput("solver iteration counts must be positive".into()));
        }
        if !(self.penalty_growth > 1.0) {
            return Err(Error::InvalidInput("penalty growth must exceed 1".into()));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_multistart(mut self, multistart: usize) -> Self {
        self.multistart = multistart;
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    /// Escape points in visit order.
    pub polyline: Polyline,
    pub order: OrderPlan,
    pub length: f64,
    pub max_residual: f64,
    /// Scaled residual of each point (visit order) on its boundary.
    pub residuals: Vec<f64>,
    /// Leaf factor of each point's boundary (visit order).
    pub branch_assignment: Vec<usize>,
    pub converged: bool,
    /// Outer iterations of the enclosing loop (fixed-point or alternating);
    /// 1 for a plain solve.
    pub iterations: usize,
}

impl Solution {
    pub fn points(&self) -> &[Vec3] {
        self.polyline.points()
    }

    /// Point lying on boundary `h`.
    pub fn point_of(&self, h: usize) -> Option<Vec3> {
        self.order.position_of(h).map(|j| self.points()[j])
    }

    /// Points indexed by boundary rather than by visit position.
    pub fn points_by_boundary(&self) -> Vec<Vec3> {
        let mut out = vec![Vec3::ZERO; self.points().len()];
        for (j, &h) in self.order.perm().iter().enumerate() {
            out[h] = self.points()[j];
        }
        out
    }
}

/// Similarity taking an instance to a canonical position: reference point
/// at the origin, first seed heading along +x and unit size. Solves run
/// there, so results follow rigid motions and scalings of the input.
/// Spatial instances are only scaled, and only when anchored at the origin.
#[derive(Clone, Copy, Debug)]
struct Frame {
    origin: Vec3,
    angle: f64,
    scale: f64,
}

impl Frame {
    fn of(inst: &Instance) -> Frame {
        let origin = inst.anchor.unwrap_or(inst.centre);
        if inst.dim == 3 && origin != Vec3::ZERO {
            return Frame { origin: Vec3::ZERO, angle: 0.0, scale: 1.0 };
        }
        let mut scale = inst
            .boundaries
            .iter()
            .map(|b| b.distance_at(origin))
            .fold(0.0, f64::max);
        if scale == 0.0 {
            // Every boundary passes through the reference: size by the
            // leaves instead.
            scale = inst
                .boundaries
                .iter()
                .flat_map(|b| b.factors())
                .map(|f| match f {
                    BoundaryExpr::Circle { radius, .. } => *radius,
                    BoundaryExpr::Segment { start, end } => (*end - *start).norm(),
                    _ => 0.0,
                })
                .fold(0.0, f64::max);
        }
        let angle = match inst.seed_dirs.first() {
            Some(d) if inst.dim == 2 && d.xy().norm() > 0.0 => d.y.atan2(d.x),
            _ => 0.0,
        };
        Frame {
            origin,
            angle,
            scale: if scale > 0.0 && scale.is_finite() { scale } else { 1.0 },
        }
    }

    fn localize(&self, inst: &Instance) -> Result<Instance> {
        let moved = if inst.dim == 2 {
            let o = self.origin.xy();
            inst.transformed(&crate::geometry::RigidMotion::new(o, -self.angle, -o)?)?
        } else {
            inst.clone()
        };
        Ok(snapped(&moved.scaled(1.0 / self.scale)?))
    }

    fn to_local(self, p: Vec3) -> Vec3 {
        let d = p - self.origin;
        let r = d.xy().rotate(-self.angle);
        Vec3::new(r.x, r.y, d.z) * (1.0 / self.scale)
    }

    fn to_world(self, p: Vec3) -> Vec3 {
        let q = p * self.scale;
        let r = q.xy().rotate(self.angle);
        Vec3::new(r.x, r.y, q.z) + self.origin
    }
}

/// Grid for canonical instance data, fine enough to be invisible at any
/// solver tolerance.
const SNAP: f64 = (1u64 << 36) as f64;

fn snap(v: f64) -> f64 {
    (v * SNAP).round() / SNAP
}

fn snap3(p: Vec3) -> Vec3 {
    Vec3::new(snap(p.x), snap(p.y), snap(p.z))
}

fn snap_boundary(b: &BoundaryExpr) -> BoundaryExpr {
    let s2 = |p: Vec2| Vec2::new(snap(p.x), snap(p.y));
    match b {
        BoundaryExpr::Line { angle, offset } => {
            // Same zero set with the normal folded into a half-turn, so that
            // parallel and antiparallel lines snap to one exact angle.
            let a = angle.rem_euclid(TAU);
            let (a, d) = if a > FRAC_PI_2 && a <= 3.0 * FRAC_PI_2 {
                (a - PI, -offset)
            } else if a > 3.0 * FRAC_PI_2 {
                (a - TAU, *offset)
            } else {
                (a, *offset)
            };
            BoundaryExpr::Line { angle: snap(a), offset: snap(d) }
        }
        BoundaryExpr::Circle { center, radius } => BoundaryExpr::Circle {
            center: s2(*center),
            radius: snap(*radius).max(1.0 / SNAP),
        },
        BoundaryExpr::PointTarget { target } => BoundaryExpr::PointTarget { target: s2(*target) },
        BoundaryExpr::Segment { start, end } => BoundaryExpr::Segment { start: s2(*start), end: s2(*end) },
        BoundaryExpr::Product { factors } => BoundaryExpr::Product {
            factors: factors.iter().map(snap_boundary).collect(),
        },
        BoundaryExpr::Plane3 { normal, offset } => BoundaryExpr::Plane3 {
            normal: snap3(*normal).normalized().unwrap_or(*normal),
            offset: snap(*offset),
        },
    }
}

/// Rounds every number of a canonical instance to a fixed grid, so that
/// copies differing only by rounding solve identically.
fn snapped(inst: &Instance) -> Instance {
    Instance {
        boundaries: inst.boundaries.iter().map(snap_boundary).collect(),
        anchor: inst.anchor.map(snap3),
        seed_dirs: inst.seed_dirs.iter().map(|&d| snap3(d)).collect(),
        seed_points: inst.seed_points.as_ref().map(|pts| pts.iter().map(|&p| snap3(p)).collect()),
        centre: snap3(inst.centre),
        ..inst.clone()
    }
}

/// Everything derived from the instance once per solve. `inst` is the
/// canonical copy of `world`.
struct Prepared<'a> {
    inst: &'a Instance,
    world: &'a Instance,
    frame: Frame,
    leaves: Vec<Vec<&'a BoundaryExpr>>,
    charts: Vec<Vec<Chart>>,
    reference: Vec3,
    scale: f64,
}

/// Canonical copy of `inst` and the frame that produced it.
fn canonical(inst: &Instance) -> Result<(Instance, Frame)> {
    let frame = Frame::of(inst);
    Ok((frame.localize(inst)?, frame))
}

impl<'a> Prepared<'a> {
    fn new(inst: &'a Instance, world: &'a Instance, frame: Frame) -> Self {
        let leaves: Vec<Vec<&BoundaryExpr>> = inst.boundaries.iter().map(|b| b.factors()).collect();
        let charts = leaves
            .iter()
            .map(|fs| fs.iter().map(|f| Chart::of(f)).collect())
            .collect();
        Prepared {
            inst,
            world,
            frame,
            leaves,
            charts,
            reference: inst.anchor.unwrap_or(inst.centre),
            scale: 1.0,
        }
    }

    fn localize_points(&self, points: &[Vec3]) -> Vec<Vec3> {
        points.iter().map(|&p| self.frame.to_local(p)).collect()
    }

    fn closed(&self) -> bool {
        self.inst.is_closed()
    }

    fn combos(&self, order: &[usize]) -> usize {
        order
            .iter()
            .try_fold(1usize, |acc, &h| acc.checked_mul(self.leaves[h].len()))
            .unwrap_or(usize::MAX)
    }

    fn polish_settings(&self, opts: &SolveOptions) -> PolishSettings {
        PolishSettings {
            max_iter: opts.max_outer,
            step_tol: opts.step_tol,
            scale: self.scale,
        }
    }

    /// Polishes a fixed branch assignment starting from `points`.
    fn polish(&self, order: &[usize], branches: &[usize], points: &[Vec3], opts: &SolveOptions) -> Vec<Vec3> {
        let charts: Vec<Chart> = order
            .iter()
            .zip(branches)
            .map(|(&h, &b)| self.charts[h][b])
            .collect();
        let start: Vec<Params> = charts.iter().zip(points).map(|(c, &p)| c.coords_of(p)).collect();
        let chain = Chain {
            anchor: self.inst.anchor,
            closed: self.closed(),
            charts: &charts,
        };
        let out = chart::polish(&chain, start, self.polish_settings(opts));
        log::trace!("polish finished after {} Newton steps", out.iterations);
        chain.points(&out.params)
    }

    fn length(&self, points: &[Vec3]) -> f64 {
        chain_length(self.inst.anchor, points, self.closed())
    }

    /// Leaf with the smallest scaled residual at each point.
    fn nearest_branches(&self, order: &[usize], points: &[Vec3]) -> Vec<usize> {
        order
            .iter()
            .zip(points)
            .map(|(&h, &p)| {
                let r: Vec<f64> = self.leaves[h].iter().map(|f| f.scaled_residual_at(p)).collect();
                let nearest = r.iter().copied().fold(f64::INFINITY, f64::min);
                let cutoff = nearest * (1.0 + 1e-9) + 1e-12;
                r.iter().position(|&v| v <= cutoff).unwrap_or(0)
            })
            .collect()
    }

    /// Chooses branches (exhaustively when affordable) and polishes.
    fn branch_and_polish(&self, order: &[usize], points: &[Vec3], opts: &SolveOptions) -> (Vec<usize>, Vec<Vec3>) {
        let combos = self.combos(order);
        if combos > 1 && combos <= opts.branch_budget {
            let counts: Vec<usize> = order.iter().map(|&h| self.leaves[h].len()).collect();
            let mut assignment = vec![0usize; order.len()];
            let mut best: Option<(f64, Vec<usize>, Vec<Vec3>)> = None;
            for _ in 0..combos {
                let pts = self.polish(order, &assignment, points, opts);
                let len = self.length(&pts);
                if best.as_ref().is_none_or(|(b, _, _)| len < *b - 1e-12 * b.abs()) {
                    best = Some((len, assignment.clone(), pts));
                }
                for (slot, &count) in assignment.iter_mut().zip(&counts).rev() {
                    *slot += 1;
                    if *slot < count {
                        break;
                    }
                    *slot = 0;
                }
            }
            let (_, branches, pts) = best.expect("at least one combination");
            return (branches, pts);
        }
        let branches = self.nearest_branches(order, points);
        let pts = self.polish(order, &branches, points, opts);
        (branches, pts)
    }

    /// Solution in world coordinates from canonical points.
    fn assemble(&self, order: &OrderPlan, branches: Vec<usize>, points: Vec<Vec3>, opts: &SolveOptions) -> Result<Solution> {
        let mut points: Vec<Vec3> = points.into_iter().map(|p| self.frame.to_world(p)).collect();
        if self.world.dim == 2 {
            for p in &mut points {
                p.z = 0.0;
            }
        }
        let residuals: Vec<f64> = order
            .perm()
            .iter()
            .zip(&points)
            .map(|(&h, &p)| self.world.boundaries[h].scaled_residual_at(p))
            .collect();
        let max_residual = residuals.iter().copied().fold(0.0, f64::max);
        let polyline = Polyline::new(points, self.world.dim, self.world.anchor, self.closed())?;
        let length = polyline.length().total;
        Ok(Solution {
            polyline,
            order: order.clone(),
            length,
            max_residual,
            residuals,
            branch_assignment: branches,
            converged: max_residual <= opts.feas_tol && length.is_finite(),
            iterations: 1,
        })
    }

    fn seed_points(&self, order: &[usize], start: usize, opts: &SolveOptions) -> Vec<Vec3> {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ (start as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let jitter = 0.1 * start as f64 / opts.multistart as f64;
        order
            .iter()
            .map(|&h| {
                if let Some(pts) = &self.inst.seed_points {
                    if start == 0 {
                        return pts[h];
                    }
                }
                let mut target = match &self.inst.seed_points {
                    Some(pts) => pts[h],
                    None => self.reference + self.inst.seed_dirs[h] * self.scale,
                };
                if start > 0 {
                    let mut noise = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 0.0);
                    if self.inst.dim == 3 {
                        noise.z = rng.gen_range(-1.0..1.0);
                    }
                    target += noise * (jitter * self.scale);
                }
                self.inst.boundaries[h].project_at(target)
            })
            .collect()
    }

    fn run_start(&self, order: &OrderPlan, start: usize, opts: &SolveOptions) -> Result<Solution> {
        let seeds = self.seed_points(order.perm(), start, opts);
        self.run_from(order, &seeds, opts)
    }

    /// Penalty relaxation from `points`, then branch choice and polish.
    fn run_from(&self, order: &OrderPlan, points: &[Vec3], opts: &SolveOptions) -> Result<Solution> {
        let perm = order.perm();
        let problem = penalty::PenaltyProblem {
            anchor: self.inst.anchor,
            closed: self.closed(),
            boundaries: perm.iter().map(|&h| &self.inst.boundaries[h]).collect(),
            dim: self.inst.dim,
            eps: 1e-4 * self.scale,
        };
        let settings = penalty::PenaltySettings {
            mu_init: opts.penalty_init,
            mu_growth: opts.penalty_growth,
            stages: 8,
            inner_iter: 200,
            dist_tol: 1e-6 * self.scale,
        };
        let relaxed = penalty::run(&problem, points, &settings);
        log::trace!("penalty stage used {} continuation steps", relaxed.history.len());
        let (branches, pts) = self.branch_and_polish(perm, &relaxed.points, opts);
        self.assemble(order, branches, pts, opts)
    }
}

fn check_order(inst: &Instance, order: &OrderPlan) -> Result<()> {
    if order.len() != inst.len() {
        return Err(Error::InvalidInput(format!(
            "order has {} entries, instance has {} boundaries",
            order.len(),
            inst.len()
        )));
    }
    if inst.is_empty() {
        return Err(Error::InvalidInput("instance has no boundaries".into()));
    }
    Ok(())
}

fn lex_cmp(a: &[Vec3], b: &[Vec3]) -> Ordering {
    for (p, q) in a.iter().zip(b) {
        match p.lex_cmp(*q) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    a.len().cmp(&b.len())
}

/// Picks the shortest converged candidate; near-equal lengths are broken by
/// the lexicographically smallest point sequence.
fn select(candidates: Vec<Solution>) -> Result<Solution> {
    let best_len = candidates
        .iter()
        .filter(|s| s.converged)
        .map(|s| s.length)
        .fold(f64::INFINITY, f64::min);
    if !best_len.is_finite() {
        let worst = candidates
            .into_iter()
            .min_by(|a, b| a.max_residual.total_cmp(&b.max_residual));
        let (best_length, best_residual) = worst.map_or((f64::NAN, f64::NAN), |s| (s.length, s.max_residual));
        return Err(Error::NonConvergence {
            reason: "no multistart reached the feasibility tolerance".into(),
            best_length,
            best_residual,
        });
    }
    let tie = best_len + 1e-12 * best_len.abs().max(1e-300);
    Ok(candidates
        .into_iter()
        .filter(|s| s.converged && s.length <= tie)
        .min_by(|a, b| lex_cmp(a.points(), b.points()))
        .expect("a converged candidate exists"))
}

/// Best-of-multistart local minimum for a fixed visiting order.
pub fn solve_fixed_order(inst: &Instance, order: &OrderPlan, opts: &SolveOptions) -> Result<Solution> {
    opts.validate()?;
    check_order(inst, order)?;
    let world = inst;
    let (local, frame) = canonical(world)?;
    let inst = &local;
    let prep = Prepared::new(inst, world, frame);
    let perm = order.perm();
    // A single boundary: the nearest point (or any point for a free curve).
    if perm.len() == 1 {
        let b = &inst.boundaries[perm[0]];
        let target = inst.anchor.unwrap_or_else(|| prep.reference + inst.seed_dirs[perm[0]]);
        let (q, branch) = b.project_with_branch(target);
        return prep.assemble(order, vec![branch], vec![q], opts);
    }
    // Only point targets: nothing to optimize.
    if inst.boundaries.iter().all(|b| matches!(b, BoundaryExpr::PointTarget { .. })) {
        let pts = perm.iter().map(|&h| inst.boundaries[h].project_at(Vec3::ZERO)).collect();
        return prep.assemble(order, vec![0; perm.len()], pts, opts);
    }
    let candidates: Vec<Solution> = (0..opts.multistart)
        .into_par_iter()
        .map(|s| prep.run_start(order, s, opts))
        .collect::<Result<_>>()?;
    select(candidates)
}

/// Local solve started from given points (visit order), used for warm
/// starts. Branches are chosen as in [`resolve_branches`].
pub fn solve_from_points(inst: &Instance, order: &OrderPlan, points: &[Vec3], opts: &SolveOptions) -> Result<Solution> {
    opts.validate()?;
    check_order(inst, order)?;
    if points.len() != order.len() {
        return Err(Error::InvalidInput("one start point per boundary is required".into()));
    }
    let (local, frame) = canonical(inst)?;
    let prep = Prepared::new(&local, inst, frame);
    let sol = prep.run_from(order, &prep.localize_points(points), opts)?;
    if !sol.converged {
        return Err(Error::NonConvergence {
            reason: "warm-started solve is infeasible".into(),
            best_length: sol.length,
            best_residual: sol.max_residual,
        });
    }
    Ok(sol)
}

/// Local solve with every point held on a prescribed leaf factor.
pub fn solve_with_branches(
    inst: &Instance,
    order: &OrderPlan,
    points: &[Vec3],
    branches: &[usize],
    opts: &SolveOptions,
) -> Result<Solution> {
    opts.validate()?;
    check_order(inst, order)?;
    if points.len() != order.len() || branches.len() != order.len() {
        return Err(Error::InvalidInput("one start point and branch per boundary is required".into()));
    }
    let (local, frame) = canonical(inst)?;
    let prep = Prepared::new(&local, inst, frame);
    for (&h, &b) in order.perm().iter().zip(branches) {
        if b >= prep.leaves[h].len() {
            return Err(Error::InvalidInput(format!("boundary {h} has no factor {b}")));
        }
    }
    let pts = prep.polish(order.perm(), branches, &prep.localize_points(points), opts);
    prep.assemble(order, branches.to_vec(), pts, opts)
}

/// Factor assignment for points given in visit order: the factor with the
/// smallest scaled residual, or, when the number of combinations fits in
/// `opts.branch_budget`, the combination whose polished path is shortest.
pub fn resolve_branches(inst: &Instance, order: &OrderPlan, points: &[Vec3], opts: &SolveOptions) -> Result<Vec<usize>> {
    check_order(inst, order)?;
    if points.len() != order.len() {
        return Err(Error::InvalidInput("one point per boundary is required".into()));
    }
    let (local, frame) = canonical(inst)?;
    let prep = Prepared::new(&local, inst, frame);
    Ok(prep.branch_and_polish(order.perm(), &prep.localize_points(points), opts).0)
}

/// Number of branch combinations for an order (saturating).
pub fn branch_combinations(inst: &Instance, order: &OrderPlan) -> usize {
    order
        .perm()
        .iter()
        .try_fold(1usize, |acc, &h| acc.checked_mul(inst.boundaries[h].factor_count()))
        .unwrap_or(usize::MAX)
}

/// Fixed-point loop for instances whose boundaries depend on the solved
/// first point: `build(estimate)` constructs the instance, it is solved in
/// `order` (natural order when `None`), and the estimate is replaced by `atan(y0 / x0)` until it
/// moves by less than `1e-10`.
pub fn solve_self_referential(
    build: impl Fn(f64) -> Result<Instance>,
    order: Option<&OrderPlan>,
    initial_estimate: f64,
    opts: &SolveOptions,
) -> Result<(Solution, f64)> {
    const MAX_ITER: usize = 100;
    let mut estimate = initial_estimate;
    let mut previous: Option<Solution> = None;
    for iteration in 1..=MAX_ITER {
        let inst = build(estimate)?;
        let order = match order {
            Some(o) => o.clone(),
            None => OrderPlan::identity(inst.len()),
        };
        let mut sol = match &previous {
            Some(prev) if prev.points().len() == inst.len() => {
                let warm = solve_from_points(&inst, &order, prev.points(), opts);
                match warm {
                    Ok(s) => s,
                    Err(_) => solve_fixed_order(&inst, &order, opts)?,
                }
            }
            _ => solve_fixed_order(&inst, &order, opts)?,
        };
        let first = sol.points()[0];
        let next = (first.y / first.x).atan();
        if !next.is_finite() {
            return Err(Error::NonConvergence {
                reason: "first escape point lies on the y axis".into(),
                best_length: sol.length,
                best_residual: sol.max_residual,
            });
        }
        log::debug!("fixed point iteration {iteration}: estimate {estimate:.12} -> {next:.12}, length {:.9}", sol.length);
        if (next - estimate).abs() < 1e-10 {
            sol.iterations = iteration;
            return Ok((sol, estimate));
        }
        estimate = next;
        previous = Some(sol);
    }
    let last = previous.expect("loop ran at least once");
    Err(Error::NonConvergence {
        reason: format!("fixed-point estimate did not settle within {MAX_ITER} iterations"),
        best_length: last.length,
        best_residual: last.max_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{catalog_instance, Mode};

    fn points_instance(pts: &[(f64, f64)]) -> Instance {
        Instance::from_boundaries(
            "points",
            pts.iter().map(|&(x, y)| BoundaryExpr::point(Vec2::new(x, y))).collect(),
            Some(Vec3::ZERO),
            Mode::EscapeOpen,
        )
        .unwrap()
    }

    #[test]
    fn halfplane_two_lines() {
        let inst = catalog_instance("halfplane_unit", 2).unwrap();
        let sol = solve_fixed_order(&inst, &OrderPlan::identity(2), &SolveOptions::default()).unwrap();
        assert!((sol.length - 3.0).abs() < 1e-9, "{}", sol.length);
        assert!((sol.points()[0] - Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-6);
        assert!((sol.points()[1] - Vec3::new(-1.0, 0.0, 0.0)).norm() < 1e-6);
        assert!(sol.converged);
    }

    #[test]
    fn single_boundary_is_projection() {
        let inst = catalog_instance("point_unit", 1).unwrap();
        let sol = solve_fixed_order(&inst, &OrderPlan::identity(1), &SolveOptions::default()).unwrap();
        assert_eq!(sol.length, 1.0);
    }

    #[test]
    fn branch_resolution_picks_nearest_factor() {
        let b = BoundaryExpr::product(vec![BoundaryExpr::line(0.0, 1.0), BoundaryExpr::line(0.0, -1.0)]).unwrap();
        let inst = Instance::from_boundaries("p", vec![b.clone(), b.clone(), b], Some(Vec3::ZERO), Mode::EscapeOpen).unwrap();
        let identity = Frame { origin: Vec3::ZERO, angle: 0.0, scale: 1.0 };
        let prep = Prepared::new(&inst, &inst, identity);
        let got = prep.nearest_branches(&[0], &[Vec3::new(0.9, 0.0, 0.0)]);
        assert_eq!(got, vec![0]);
        let got = prep.nearest_branches(&[0], &[Vec3::new(-0.8, 0.0, 0.0)]);
        assert_eq!(got, vec![1]);
        assert_eq!(prep.combos(&[0, 1, 2]), 8);
    }

    #[test]
    fn two_products_enumerate_four_assignments() {
        // x = 1 or x = -3, then y = 2 or y = -0.5; enumeration compares all
        // four polished paths.
        let a = BoundaryExpr::product(vec![BoundaryExpr::line(0.0, 1.0), BoundaryExpr::line(0.0, -3.0)]).unwrap();
        let b = BoundaryExpr::product(vec![
            BoundaryExpr::line(std::f64::consts::FRAC_PI_2, 2.0),
            BoundaryExpr::line(std::f64::consts::FRAC_PI_2, -0.5),
        ])
        .unwrap();
        let inst = Instance::from_boundaries("p", vec![a, b], Some(Vec3::ZERO), Mode::EscapeOpen).unwrap();
        let order = OrderPlan::identity(2);
        let opts = SolveOptions::default();
        let start = [Vec3::new(-3.0, 0.0, 0.0), Vec3::new(-3.0, 2.0, 0.0)];
        let branches = resolve_branches(&inst, &order, &start, &opts).unwrap();
        assert_eq!(branches, vec![0, 1]);
        let sol = solve_fixed_order(&inst, &order, &opts).unwrap();
        // Straight to the corner region: |(1, -0.5)| is optimal.
        assert!((sol.length - (1.25f64).sqrt()).abs() < 1e-8, "{}", sol.length);
    }

    #[test]
    fn collinear_points_order() {
        let inst = points_instance(&[(1.0, 0.0), (2.0, 0.0), (3.0, 0.0)]);
        let sol = solve_fixed_order(&inst, &OrderPlan::identity(3), &SolveOptions::default()).unwrap();
        assert_eq!(sol.length, 3.0);
    }

    #[test]
    fn solve_is_deterministic_and_a_fixpoint() {
        let inst = catalog_instance("circle_exterior", 24).unwrap();
        let order = OrderPlan::identity(24);
        let opts = SolveOptions::default();
        let a = solve_fixed_order(&inst, &order, &opts).unwrap();
        let b = solve_fixed_order(&inst, &order, &opts).unwrap();
        assert_eq!(a, b);
        let again = solve_from_points(&inst, &order, a.points(), &opts).unwrap();
        assert!(again.length >= a.length - opts.step_tol * a.length);
    }

    #[test]
    fn self_referential_from_fixed_point_takes_one_iteration() {
        use crate::scenario::{build_instance, Catalog};
        use std::collections::BTreeMap;
        let cat = Catalog::standard();
        let build = |e: f64| {
            let mut params = BTreeMap::new();
            params.insert("estimate".to_string(), e);
            build_instance(&cat.spec("zalgaller_class2", 24, 1, &params)?)
        };
        let opts = SolveOptions::default();
        let (sol, estimate) = solve_self_referential(build, None, -1.0, &opts).unwrap();
        assert!(sol.iterations >= 1);
        let (again, _) = solve_self_referential(build, None, estimate, &opts).unwrap();
        assert_eq!(again.iterations, 1);
    }

    #[test]
    fn antiparallel_lines_stay_parallel_in_the_canonical_frame() {
        let inst = Instance::from_boundaries(
            "antiparallel",
            vec![BoundaryExpr::line(PI, 0.0), BoundaryExpr::line(0.0, 0.5)],
            None,
            Mode::Opaque,
        )
        .unwrap();
        let sol = solve_fixed_order(&inst, &OrderPlan::identity(2), &SolveOptions::default()).unwrap();
        assert!(sol.converged, "residual {}", sol.max_residual);
        assert!((sol.length - 0.5).abs() < 1e-9);
        assert!(sol.points().iter().all(|p| p.y.abs() < 1.0), "{:?}", sol.points());
    }

    #[test]
    fn invalid_options_rejected() {
        let inst = catalog_instance("halfplane_unit", 2).unwrap();
        let bad = SolveOptions {
            penalty_growth: 1.0,
            ..SolveOptions::default()
        };
        assert!(solve_fixed_order(&inst, &OrderPlan::identity(2), &bad).is_err());
        assert!(solve_fixed_order(&inst, &OrderPlan::identity(3), &SolveOptions::default()).is_err());
    }
}
