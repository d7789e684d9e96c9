//! Verification suite: golden lengths, oracle agreement and property checks,
//! each reported as one pass/fail line.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::{catalog_convergence_study, straight_escape, worm_ratio};
use crate::error::{Error, Result};
use crate::export::{check_mtz_text, to_mtz_text};
use crate::geometry::{BoundaryExpr, Point, RigidMotion, Vec2, Vec3};
use crate::nlp_solver::{solve_fixed_order, solve_self_referential, solve_with_branches, SolveOptions, Solution};
use crate::order_search::{exhaustive, held_karp, mtz_branch_and_bound, two_opt, MtzModel, OrderPlan};
use crate::path::Polyline;
use crate::scenario::{build_instance, Catalog, Instance, Mode, ScenarioSpec};

#[derive(Clone, Debug, PartialEq)]
pub struct CriterionOutcome {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CriterionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mark = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{mark} {:>2} {:<28} {}", self.id, self.name, self.detail)
    }
}

/// A criterion: id, short name and the scenario names it exercises.
pub struct Criterion {
    pub id: usize,
    pub name: &'static str,
    pub tags: &'static [&'static str],
    run: fn(&Catalog) -> Result<(bool, String)>,
}

pub fn criteria() -> Vec<Criterion> {
    vec![
        Criterion { id: 1, name: "halfplane exact length", tags: &["halfplane_unit"], run: halfplane_exact },
        Criterion { id: 2, name: "point target exact length", tags: &["point_unit"], run: point_exact },
        Criterion { id: 3, name: "zalgaller class 2", tags: &["zalgaller_class2"], run: zalgaller },
        Criterion { id: 4, name: "circle plus segment pair", tags: &["circle_plus_segment"], run: circle_plus_segment },
        Criterion { id: 5, name: "interior circle pair", tags: &["circle_interior_nonunique"], run: interior_circle },
        Criterion { id: 6, name: "strip weak form II", tags: &["strip_wf2"], run: strip_wf2 },
        Criterion {
            id: 7,
            name: "monotone refinement",
            tags: &["halfplane_unit", "point_unit", "strip_middle"],
            run: monotone,
        },
        Criterion { id: 8, name: "order oracle equivalence", tags: &[], run: oracles },
        Criterion { id: 9, name: "gradient correctness", tags: &[], run: gradients },
        Criterion { id: 10, name: "invariance suite", tags: &["*"], run: invariance },
        Criterion { id: 11, name: "mtz export", tags: &[], run: mtz_export },
        Criterion { id: 12, name: "closed path variant", tags: &["point_unit"], run: closed_path },
        Criterion { id: 13, name: "opaque circle tangents", tags: &["opaque_circle_tangent"], run: opaque_circle },
    ]
}

impl Criterion {
    /// `filter` matches the id, the short name or a scenario name.
    pub fn matches(&self, filter: &str) -> bool {
        filter == self.id.to_string() || filter == self.name || self.tags.contains(&filter)
    }

    pub fn run(&self, catalog: &Catalog) -> CriterionOutcome {
        let (passed, detail) = match (self.run)(catalog) {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        CriterionOutcome { id: self.id, name: self.name, passed, detail }
    }
}

/// Runs every criterion matching `only` (all when `None`), printing each
/// line through `report` as soon as it is known.
pub fn run_suite(
    catalog: &Catalog,
    only: Option<&str>,
    mut report: impl FnMut(&CriterionOutcome),
) -> Result<Vec<CriterionOutcome>> {
    let selected: Vec<Criterion> = criteria()
        .into_iter()
        .filter(|c| only.is_none_or(|f| c.matches(f)))
        .collect();
    if selected.is_empty() {
        return Err(Error::InvalidInput(format!("no criterion matches '{}'", only.unwrap_or(""))));
    }
    Ok(selected
        .iter()
        .map(|c| {
            let out = c.run(catalog);
            report(&out);
            out
        })
        .collect())
}

fn solve_catalog(catalog: &Catalog, name: &str, n: usize) -> Result<(ScenarioSpec, Instance, Solution)> {
    let spec = catalog.spec(name, n, 1, &BTreeMap::new())?;
    solve_spec(spec)
}

fn solve_spec(spec: ScenarioSpec) -> Result<(ScenarioSpec, Instance, Solution)> {
    let inst = build_instance(&spec)?;
    let order = spec.order_hint.clone().unwrap_or_else(|| OrderPlan::identity(inst.len()));
    let sol = solve_fixed_order(&inst, &order, &SolveOptions::default())?;
    Ok((spec, inst, sol))
}

fn golden(length: f64, target: f64, tol: f64, converged: bool) -> (bool, String) {
    let diff = (length - target).abs();
    (
        converged && diff <= tol,
        format!("L = {length:.6}, target {target:.6}, |diff| = {diff:.2e} (tol {tol:.0e})"),
    )
}

fn halfplane_exact(catalog: &Catalog) -> Result<(bool, String)> {
    let (_, _, sol) = solve_catalog(catalog, "halfplane_unit", 720)?;
    Ok(golden(sol.length, 7.0 * PI / 6.0 + 1.0 + 3f64.sqrt(), 1e-3, sol.converged))
}

fn point_exact(catalog: &Catalog) -> Result<(bool, String)> {
    let (_, _, sol) = solve_catalog(catalog, "point_unit", 720)?;
    Ok(golden(sol.length, 1.0 + TAU, 1e-3, sol.converged))
}

fn zalgaller(catalog: &Catalog) -> Result<(bool, String)> {
    let entry = catalog.get("zalgaller_class2")?;
    let initial = entry.params["estimate"];
    let build = |estimate: f64| {
        let overrides = BTreeMap::from([("estimate".to_string(), estimate)]);
        build_instance(&entry.spec(180, 1, &overrides)?)
    };
    let (sol, estimate) = solve_self_referential(build, None, initial, &SolveOptions::default())?;
    let (ok, line) = golden(sol.length, 2.297, 1e-2, sol.converged && sol.iterations <= 100);
    Ok((ok, format!("{line}, {} fixed-point iterations, estimate {estimate:.6}", sol.iterations)))
}

fn circle_plus_segment(catalog: &Catalog) -> Result<(bool, String)> {
    let n = 360;
    let spec = catalog.spec("circle_plus_segment", n, 1, &BTreeMap::new())?;
    let inst = build_instance(&spec)?;
    let order = spec.order_hint.clone().unwrap_or_else(|| OrderPlan::identity(n));
    let opts = SolveOptions::default();
    let anchor = inst.anchor.unwrap_or(Vec3::ZERO);
    // Arc strategy: every copy is met at one shared point of the circle.
    let first = order.perm()[0];
    let shared = inst.boundaries[first].factors()[0].project_at(anchor + inst.seed_dirs[first]);
    let arc_seeds = vec![shared; n];
    // Segment strategy: each copy is met at its own segment.
    let seg_seeds: Vec<Vec3> = order
        .perm()
        .iter()
        .map(|&h| inst.boundaries[h].factors()[1].project_at(anchor))
        .collect();
    let arc = solve_with_branches(&inst, &order, &arc_seeds, &vec![0; n], &opts)?;
    let seg = solve_with_branches(&inst, &order, &seg_seeds, &vec![1; n], &opts)?;
    let gap = (arc.length - seg.length).abs();
    let ok = arc.converged
        && seg.converged
        && gap <= 2e-3
        && (arc.length - 1.0).abs() <= 2e-3
        && (seg.length - 1.0).abs() <= 2e-3;
    Ok((
        ok,
        format!(
            "L_arc = {:.6}, L_segment = {:.6}, |diff| = {gap:.2e}, |L_segment - 1| = {:.2e} (tol 2e-3)",
            arc.length,
            seg.length,
            (seg.length - 1.0).abs()
        ),
    ))
}

fn interior_circle(catalog: &Catalog) -> Result<(bool, String)> {
    let (spec, inst, arc) = solve_catalog(catalog, "circle_interior_nonunique", 360)?;
    let radius = spec.params["radius"];
    let diameter = 2.0 * radius;
    // A straight walk as long as the diameter leaves every circle of that
    // radius containing its start.
    let walk = straight_escape(&inst, Vec3::new(1.0, 0.0, 0.0), diameter)?;
    let shortest = walk.last_hit();
    let gap = (arc.length - diameter).abs();
    let ok = arc.converged && walk.meets_all() && gap <= 1e-2;
    Ok((
        ok,
        format!(
            "L_arc = {:.6}, L_diameter = {diameter:.6}, |diff| = {gap:.2e} (tol 1e-2); recorded: straight escape meets all at {}",
            arc.length,
            shortest.map_or("never".to_string(), |d| format!("{d:.6}"))
        ),
    ))
}

fn strip_wf2(catalog: &Catalog) -> Result<(bool, String)> {
    let spec = catalog.spec("strip_wf2", 12, 26, &BTreeMap::new())?;
    let (_, _, sol) = solve_spec(spec)?;
    let target = 2.278292;
    let rel = (sol.length - target).abs() / target;
    Ok((
        sol.converged && rel <= 0.02,
        format!("L = {:.6}, reference {target}, relative gap {:.2}% (tol 2%)", sol.length, 100.0 * rel),
    ))
}

fn monotone(catalog: &Catalog) -> Result<(bool, String)> {
    let ladder = [45, 90, 180, 360, 720];
    let mut ok = true;
    let mut parts = Vec::new();
    for name in ["halfplane_unit", "point_unit", "strip_middle"] {
        let known = catalog
            .spec(name, 1, 1, &BTreeMap::new())?
            .known_length
            .ok_or_else(|| Error::InvalidInput(format!("{name} has no known length")))?;
        let report = catalog_convergence_study(catalog, name, &ladder, &SolveOptions::default())?;
        let below = report.entries.iter().all(|e| e.length <= known + 1e-6);
        ok &= report.monotone_ok && below;
        let last = report.entries.last().map_or(f64::NAN, |e| e.length);
        parts.push(format!(
            "{name}: {} to {last:.6} <= {known:.6}{}",
            if report.monotone_ok { "nondecreasing" } else { "DROPS" },
            if below { "" } else { " EXCEEDED" }
        ));
    }
    Ok((ok, parts.join("; ")))
}

/// Random point targets around the origin.
pub fn random_point_instance(seed: u64, k: usize, mode: Mode) -> Result<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let targets = (0..k)
        .map(|_| BoundaryExpr::point(Vec2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0))))
        .collect();
    let anchor = (mode != Mode::Opaque).then_some(Vec3::ZERO);
    Instance::from_boundaries("random_points", targets, anchor, mode)
}

fn oracles(_: &Catalog) -> Result<(bool, String)> {
    let opts = SolveOptions::default();
    let mut worst_mtz: f64 = 0.0;
    let mut failures = Vec::new();
    for seed in 0..20u64 {
        let k = 3 + (seed as usize % 5);
        let inst = random_point_instance(seed, k, Mode::EscapeOpen)?;
        let ex = exhaustive(&inst, &opts)?;
        let hk = held_karp(&inst, &opts)?;
        let bb = mtz_branch_and_bound(&inst, &opts)?.solution;
        let two = two_opt(&inst, &OrderPlan::identity(k), &opts)?;
        let mtz_gap = (bb.length - ex.length).abs();
        worst_mtz = worst_mtz.max(mtz_gap);
        if hk.length != ex.length || mtz_gap > 1e-9 * ex.length || two.length < ex.length {
            failures.push(format!(
                "seed {seed}: exhaustive {} held-karp {} mtz {} 2-opt {}",
                ex.length, hk.length, bb.length, two.length
            ));
        }
    }
    let detail = if failures.is_empty() {
        format!("20 instances, K in 3..=7: held-karp == exhaustive, max mtz gap {worst_mtz:.1e}, 2-opt never shorter")
    } else {
        failures.join("; ")
    };
    Ok((failures.is_empty(), detail))
}

/// Central-difference check, `|g - fd| <= tol * max(|g|, 1)` per case.
fn fd_error(g: &[f64], mut f: impl FnMut(usize, f64) -> f64) -> f64 {
    let h = 1e-6;
    let fd: Vec<f64> = (0..g.len()).map(|i| (f(i, h) - f(i, -h)) / (2.0 * h)).collect();
    let err = g.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let norm = g.iter().map(|a| a * a).sum::<f64>().sqrt();
    err / norm.max(1.0)
}

fn random_boundary(rng: &mut ChaCha8Rng) -> BoundaryExpr {
    let mut v = || Vec2::new(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5));
    let kind = v().x;
    let leaf = |kind: f64, a: Vec2, b: Vec2| -> BoundaryExpr {
        if kind < -0.75 {
            BoundaryExpr::line(a.x * 3.0, b.y)
        } else if kind < 0.0 {
            BoundaryExpr::circle(a, 0.2 + b.norm()).expect("positive radius")
        } else if kind < 0.75 {
            BoundaryExpr::point(a)
        } else {
            BoundaryExpr::segment(a, a + b + Vec2::new(0.1, 0.0)).expect("distinct ends")
        }
    };
    if kind.abs() > 1.3 {
        let (a, b, c, d) = (v(), v(), v(), v());
        BoundaryExpr::product(vec![leaf(a.x, b, c), leaf(a.y, d, b)]).expect("two factors")
    } else {
        let (a, b) = (v(), v());
        leaf(kind, a, b)
    }
}

fn gradients(_: &Catalog) -> Result<(bool, String)> {
    const CASES: usize = 1000;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst_len: f64 = 0.0;
    for _ in 0..CASES {
        let k = rng.gen_range(1..8);
        let pts: Vec<Vec3> = (0..k)
            .map(|_| Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 0.0))
            .collect();
        let closed = rng.gen_bool(0.5);
        let anchor = Some(Vec3::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), 0.0));
        let poly = Polyline::new(pts.clone(), 2, anchor, closed)?;
        let g: Vec<f64> = poly.grad_length().iter().flat_map(|v| [v.x, v.y]).collect();
        let err = fd_error(&g, |i, h| {
            let mut moved = pts.clone();
            if i % 2 == 0 {
                moved[i / 2].x += h;
            } else {
                moved[i / 2].y += h;
            }
            Polyline::new(moved, 2, anchor, closed).expect("finite").length().total
        });
        worst_len = worst_len.max(err);
    }
    let mut worst_boundary: f64 = 0.0;
    for _ in 0..CASES {
        let b = random_boundary(&mut rng);
        let p = Vec2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let Point::Planar(g) = b.grad(p)? else {
            return Err(Error::ModelInvariant("planar boundary returned a spatial gradient".into()));
        };
        let err = fd_error(&[g.x, g.y], |i, h| {
            let q = if i == 0 { p + Vec2::new(h, 0.0) } else { p + Vec2::new(0.0, h) };
            b.eval(q).expect("planar point")
        });
        worst_boundary = worst_boundary.max(err);
    }
    Ok((
        worst_len < 1e-5 && worst_boundary < 1e-5,
        format!("{CASES} cases each: worst relative error length {worst_len:.1e}, boundary {worst_boundary:.1e} (tol 1e-5)"),
    ))
}

fn invariance(catalog: &Catalog) -> Result<(bool, String)> {
    let opts = SolveOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (mut worst_motion, mut worst_scale, mut worst_ratio): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let mut offenders = Vec::new();
    for entry in catalog.entries() {
        let spec = entry.spec(12, entry.default_m, &BTreeMap::new())?;
        let inst = build_instance(&spec)?;
        let order = spec.order_hint.clone().unwrap_or_else(|| OrderPlan::identity(inst.len()));
        let base = solve_fixed_order(&inst, &order, &opts)?;
        if inst.dim == 2 {
            let motion = RigidMotion::new(
                Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                rng.gen_range(0.0..TAU),
                Vec2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)),
            )?;
            let moved = solve_fixed_order(&inst.transformed(&motion)?, &order, &opts)?;
            let d = (moved.length - base.length).abs();
            worst_motion = worst_motion.max(d);
            if d >= 1e-6 {
                offenders.push(format!("{} moved by {d:.1e}", entry.name));
            }
        }
        for s in [0.5, 2.0] {
            let scaled = solve_fixed_order(&inst.scaled(s)?, &order, &opts)?;
            let rel = (scaled.length - s * base.length).abs() / (s * base.length);
            worst_scale = worst_scale.max(rel);
            if rel > 1e-6 {
                offenders.push(format!("{} scaled by {s}: {rel:.1e}", entry.name));
            }
            if let Some(area) = spec.region_area {
                let r0 = worm_ratio(entry.name, area, base.length)?.ratio;
                let r1 = worm_ratio(entry.name, area * s * s, scaled.length)?.ratio;
                let d = (r1 - r0).abs();
                worst_ratio = worst_ratio.max(d);
                if d > 1e-9 {
                    offenders.push(format!("{} worm ratio at scale {s}: {d:.1e}", entry.name));
                }
            }
        }
    }
    let summary = format!(
        "{} scenarios at N=12: max motion change {worst_motion:.1e}, max scale error {worst_scale:.1e}, max worm ratio change {worst_ratio:.1e}",
        catalog.entries().len()
    );
    let ok = offenders.is_empty();
    Ok((ok, if ok { summary } else { format!("{summary}; {}", offenders.join(", ")) }))
}

fn mtz_export(_: &Catalog) -> Result<(bool, String)> {
    let opts = SolveOptions::default();
    let mut parts = Vec::new();
    let mut ok = true;
    for (seed, k) in [(3u64, 3usize), (5, 5)] {
        let inst = random_point_instance(100 + seed, k, Mode::EscapeOpen)?;
        let sol = exhaustive(&inst, &opts)?;
        let model = MtzModel::from_solution(&inst, &sol)?;
        let text = to_mtz_text(&model, &inst)?;
        let check = check_mtz_text(&text, opts.feas_tol)?;
        let gap = (check.objective - sol.length).abs();
        let pass = check.binaries == k * k && check.auxiliaries == k && gap <= 1e-9;
        ok &= pass;
        parts.push(format!(
            "K={k}: {} binaries, {} auxiliaries, objective gap {gap:.1e}",
            check.binaries, check.auxiliaries
        ));
    }
    Ok((ok, parts.join("; ")))
}

/// Closed point-target length at N = 360 for unit radius: the open chain
/// `1 + 2 (N - 1) sin(pi / N)` plus a unit return leg.
pub const CLOSED_POINT_REFERENCE: f64 = 8.265_652_488_3;

fn closed_path(catalog: &Catalog) -> Result<(bool, String)> {
    let (_, _, open) = solve_catalog(catalog, "point_unit", 360)?;
    let mut spec = catalog.spec("point_unit", 360, 1, &BTreeMap::new())?;
    spec.mode = Mode::EscapeClosed;
    let (_, _, closed) = solve_spec(spec)?;
    let err = (closed.length - CLOSED_POINT_REFERENCE).abs();
    Ok((
        closed.converged && closed.length > open.length && err <= 1e-6,
        format!(
            "closed L = {:.6} > open L = {:.6}, |closed - reference| = {err:.1e}",
            closed.length, open.length
        ),
    ))
}

/// Exact search over a grid of positions along each line, by dynamic
/// programming over the natural order, refined once around the optimum.
pub fn opaque_lines_grid_oracle(lines: &[(f64, f64)], half_width: f64, steps: usize) -> f64 {
    let point = |i: usize, t: f64| {
        let n = Vec2::from_angle(lines[i].0);
        n * lines[i].1 + n.perp() * t
    };
    let solve = |centres: &[f64], half: f64| -> (f64, Vec<f64>) {
        let grid = |i: usize| -> Vec<f64> {
            (0..=steps).map(|s| centres[i] - half + 2.0 * half * s as f64 / steps as f64).collect()
        };
        let mut cost = vec![0.0; steps + 1];
        let mut back: Vec<Vec<usize>> = Vec::new();
        let mut prev = grid(0);
        for i in 1..lines.len() {
            let cur = grid(i);
            let mut next = vec![f64::INFINITY; steps + 1];
            let mut arg = vec![0; steps + 1];
            for (a, &t) in cur.iter().enumerate() {
                let p = point(i, t);
                for (b, &u) in prev.iter().enumerate() {
                    let c = cost[b] + (p - point(i - 1, u)).norm();
                    if c < next[a] {
                        next[a] = c;
                        arg[a] = b;
                    }
                }
            }
            back.push(arg);
            cost = next;
            prev = cur;
        }
        let (mut at, best) = cost
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (j, &c)| if c < acc.1 { (j, c) } else { acc });
        let mut ts = vec![0.0; lines.len()];
        for i in (0..lines.len()).rev() {
            ts[i] = grid(i)[at];
            if i > 0 {
                at = back[i - 1][at];
            }
        }
        (best, ts)
    };
    let (_, coarse) = solve(&vec![0.0; lines.len()], half_width);
    let spacing = 2.0 * half_width / steps as f64;
    solve(&coarse, 4.0 * spacing).0
}

fn opaque_circle(catalog: &Catalog) -> Result<(bool, String)> {
    let (_, _, sol) = solve_catalog(catalog, "opaque_circle_tangent", 360)?;
    let in_range = (PI..=TAU).contains(&sol.length);
    let (_, small, coarse) = solve_catalog(catalog, "opaque_circle_tangent", 12)?;
    let lines: Vec<(f64, f64)> = coarse
        .order
        .perm()
        .iter()
        .map(|&h| match &small.boundaries[h] {
            BoundaryExpr::Line { angle, offset } => Ok((*angle, *offset)),
            _ => Err(Error::ModelInvariant("tangent scenario has a non-line boundary".into())),
        })
        .collect::<Result<_>>()?;
    let oracle = opaque_lines_grid_oracle(&lines, 3.0, 600);
    let gap = (coarse.length - oracle).abs();
    Ok((
        sol.converged && in_range && gap <= 1e-2,
        format!(
            "L = {:.6} in [pi, 2pi]: {in_range}; N=12 solver {:.6} vs grid oracle {oracle:.6}, |diff| = {gap:.1e} (tol 1e-2)",
            sol.length, coarse.length
        ),
    ))
}
