//! Serializers: SVG figures, CSV tables and a mixed-integer model text with
//! its own feasibility checker. Every emitter is deterministic.
//!
//! Numbers in CSV and model text are printed with 17 significant digits,
//! which round-trips any `f64` exactly.

use std::fmt::Write as _;

use crate::analysis::ConvergenceReport;
use crate::error::{Error, Result};
use crate::geometry::{BoundaryExpr, Vec2, Vec3};
use crate::nlp_solver::Solution;
use crate::order_search::MtzModel;
use crate::scenario::Instance;

const CANVAS: f64 = 800.0;
const MARGIN: f64 = 0.05;
const BOUNDARY_COLOR: &str = "red";
const PATH_COLOR: &str = "black";

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Clone, Debug, PartialEq)]
pub enum SvgElement {
    /// Open polyline through the given world points.
    Polyline { points: Vec<Vec2>, color: &'static str, width: f64 },
    Circle { center: Vec2, radius: f64, color: &'static str, width: f64 },
    Dot { center: Vec2, color: &'static str },
}

/// World-space figure with its padded canvas bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct SvgScene {
    pub min: Vec2,
    pub max: Vec2,
    pub elements: Vec<SvgElement>,
    pub comment: Option<String>,
}

impl SvgScene {
    /// Boundaries in red, the escape polyline in black with its anchor legs
    /// drawn separately, the start as a black dot and escape points in red.
    /// Spatial instances are drawn projected onto the xy plane without their
    /// planes.
    pub fn new(inst: &Instance, solution: Option<&Solution>) -> SvgScene {
        let points: Vec<Vec2> = solution.map(|s| s.points().iter().map(|p| p.xy()).collect()).unwrap_or_default();
        let anchor = inst.anchor.map(Vec3::xy);

        let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        let mut grow = |p: Vec2, r: f64| {
            lo = Vec2::new(lo.x.min(p.x - r), lo.y.min(p.y - r));
            hi = Vec2::new(hi.x.max(p.x + r), hi.y.max(p.y + r));
        };
        for p in points.iter().chain(anchor.iter()) {
            grow(*p, 0.0);
        }
        for b in &inst.boundaries {
            for f in b.factors() {
                match f {
                    BoundaryExpr::Circle { center, radius } => grow(*center, *radius),
                    BoundaryExpr::PointTarget { target } => grow(*target, 0.0),
                    BoundaryExpr::Segment { start, end } => {
                        grow(*start, 0.0);
                        grow(*end, 0.0);
                    }
                    _ => {}
                }
            }
        }
        if !lo.x.is_finite() {
            lo = Vec2::new(-1.0, -1.0);
            hi = Vec2::new(1.0, 1.0);
        }
        let span = (hi.x - lo.x).max(hi.y - lo.y);
        if span <= 0.0 {
            lo = lo - Vec2::new(1.0, 1.0);
            hi = hi + Vec2::new(1.0, 1.0);
        }
        let pad = MARGIN * (hi.x - lo.x).max(hi.y - lo.y);
        let (min, max) = (lo - Vec2::new(pad, pad), hi + Vec2::new(pad, pad));

        let thin = 0.002 * (max.x - min.x).max(max.y - min.y);
        let mut elements = Vec::new();
        for b in &inst.boundaries {
            for f in b.factors() {
                match f {
                    BoundaryExpr::Line { angle, offset } => {
                        if let Some((a, b)) = clip_line(*angle, *offset, min, max) {
                            elements.push(SvgElement::Polyline {
                                points: vec![a, b],
                                color: BOUNDARY_COLOR,
                                width: thin,
                            });
                        }
                    }
                    BoundaryExpr::Circle { center, radius } => elements.push(SvgElement::Circle {
                        center: *center,
                        radius: *radius,
                        color: BOUNDARY_COLOR,
                        width: thin,
                    }),
                    BoundaryExpr::PointTarget { target } => elements.push(SvgElement::Dot {
                        center: *target,
                        color: BOUNDARY_COLOR,
                    }),
                    BoundaryExpr::Segment { start, end } => elements.push(SvgElement::Polyline {
                        points: vec![*start, *end],
                        color: BOUNDARY_COLOR,
                        width: thin,
                    }),
                    BoundaryExpr::Plane3 { .. } | BoundaryExpr::Product { .. } => {}
                }
            }
        }
        let thick = 2.5 * thin;
        if let (Some(a), Some(first)) = (anchor, points.first()) {
            elements.push(SvgElement::Polyline { points: vec![a, *first], color: PATH_COLOR, width: thick });
        }
        if points.len() > 1 {
            elements.push(SvgElement::Polyline { points: points.clone(), color: PATH_COLOR, width: thick });
        }
        if let (Some(a), Some(last), true) = (anchor, points.last(), inst.is_closed()) {
            elements.push(SvgElement::Polyline { points: vec![*last, a], color: PATH_COLOR, width: thick });
        }
        if let Some(a) = anchor {
            elements.push(SvgElement::Dot { center: a, color: PATH_COLOR });
        }
        for p in &points {
            elements.push(SvgElement::Dot { center: *p, color: BOUNDARY_COLOR });
        }
        SvgScene { min, max, elements, comment: None }
    }

    pub fn with_comment(mut self, comment: impl Into<String>) -> Self {
        self.comment = Some(comment.into());
        self
    }

    /// SVG 1.1 document, y axis pointing up.
    pub fn render(&self) -> String {
        let size = (self.max.x - self.min.x).max(self.max.y - self.min.y);
        let k = CANVAS / size;
        let width = (self.max.x - self.min.x) * k;
        let height = (self.max.y - self.min.y) * k;
        let tx = |p: Vec2| ((p.x - self.min.x) * k, (self.max.y - p.y) * k);
        let dot = 0.004 * CANVAS;
        let mut out = String::new();
        out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
        let _ = writeln!(
            out,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{width:.3}\" height=\"{height:.3}\" viewBox=\"0 0 {width:.3} {height:.3}\">"
        );
        if let Some(c) = &self.comment {
            let _ = writeln!(out, "<!-- {} -->", c.replace("--", "- -"));
        }
        let _ = writeln!(out, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
        for e in &self.elements {
            match e {
                SvgElement::Polyline { points, color, width } => {
                    let coords: Vec<String> = points
                        .iter()
                        .map(|p| {
                            let (x, y) = tx(*p);
                            format!("{x:.4},{y:.4}")
                        })
                        .collect();
                    let _ = writeln!(
                        out,
                        "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"{:.4}\"/>",
                        coords.join(" "),
                        width * k
                    );
                }
                SvgElement::Circle { center, radius, color, width } => {
                    let (x, y) = tx(*center);
                    let _ = writeln!(
                        out,
                        "<circle cx=\"{x:.4}\" cy=\"{y:.4}\" r=\"{:.4}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"{:.4}\"/>",
                        radius * k,
                        width * k
                    );
                }
                SvgElement::Dot { center, color } => {
                    let (x, y) = tx(*center);
                    let _ = writeln!(out, "<circle cx=\"{x:.4}\" cy=\"{y:.4}\" r=\"{dot:.4}\" fill=\"{color}\"/>");
                }
            }
        }
        out.push_str("</svg>\n");
        out
    }
}

/// Part of the line `x cos a + y sin a = offset` inside the box.
fn clip_line(angle: f64, offset: f64, min: Vec2, max: Vec2) -> Option<(Vec2, Vec2)> {
    let n = Vec2::from_angle(angle);
    let base = n * offset;
    let dir = n.perp();
    let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
    for (b, d, lo, hi) in [(base.x, dir.x, min.x, max.x), (base.y, dir.y, min.y, max.y)] {
        if d.abs() < 1e-15 {
            if b < lo || b > hi {
                return None;
            }
            continue;
        }
        let (a, c) = ((lo - b) / d, (hi - b) / d);
        t0 = t0.max(a.min(c));
        t1 = t1.min(a.max(c));
    }
    (t0 < t1).then(|| (base + dir * t0, base + dir * t1))
}

pub fn to_svg(solution: &Solution, inst: &Instance) -> String {
    SvgScene::new(inst, Some(solution)).render()
}

/// Canvas with the boundaries only.
pub fn boundaries_svg(inst: &Instance) -> String {
    SvgScene::new(inst, None).render()
}

fn csv_text(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

/// One row per escape point in visit order:
/// `order_index,boundary_index,x,y[,z],residual`.
pub fn to_csv(solution: &Solution) -> Result<String> {
    let spatial = solution.polyline.dim() == 3;
    let mut header = vec!["order_index", "boundary_index", "x", "y"];
    if spatial {
        header.push("z");
    }
    header.push("residual");
    let rows = solution.points().iter().enumerate().map(|(j, p)| {
        let mut r = vec![j.to_string(), solution.order.perm()[j].to_string(), num(p.x), num(p.y)];
        if spatial {
            r.push(num(p.z));
        }
        r.push(num(solution.residuals[j]));
        r
    });
    csv_text(&header, rows)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CsvPoint {
    pub order_index: usize,
    pub boundary_index: usize,
    pub point: Vec3,
    pub residual: f64,
}

/// Reads the table written by [`to_csv`].
pub fn read_solution_csv(text: &str) -> Result<Vec<CsvPoint>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let spatial = match header.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["order_index", "boundary_index", "x", "y", "residual"] => false,
        ["order_index", "boundary_index", "x", "y", "z", "residual"] => true,
        _ => return Err(Error::Parse(format!("unexpected solution header {header:?}"))),
    };
    let float = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("{s}: {e}")));
    let int = |s: &str| s.parse::<usize>().map_err(|e| Error::Parse(format!("{s}: {e}")));
    r.records()
        .map(|rec| {
            let rec = rec?;
            let z = if spatial { float(&rec[4])? } else { 0.0 };
            Ok(CsvPoint {
                order_index: int(&rec[0])?,
                boundary_index: int(&rec[1])?,
                point: Vec3::new(float(&rec[2])?, float(&rec[3])?, z),
                residual: float(&rec[header.len() - 1])?,
            })
        })
        .collect()
}

/// One row per rung: `n,length,max_residual,seconds`.
pub fn convergence_csv(report: &ConvergenceReport) -> Result<String> {
    csv_text(
        &["n", "length", "max_residual", "seconds"],
        report
            .entries
            .iter()
            .map(|e| vec![e.n.to_string(), num(e.length), num(e.max_residual), num(e.seconds)]),
    )
}

/// One row per swept value: `<param>,length`.
pub fn sweep_csv(param: &str, rows: &[(f64, f64)]) -> Result<String> {
    csv_text(&[param, "length"], rows.iter().map(|(v, l)| vec![num(*v), num(*l)]))
}

fn axes(dim: usize) -> &'static [&'static str] {
    if dim == 3 {
        &["x", "y", "z"]
    } else {
        &["x", "y"]
    }
}

/// Model text in the dialect described in `docs/mtz-format.md`, with the
/// model's own values as the embedded solution. Refuses models that break
/// an assignment, bound or subtour constraint.
pub fn to_mtz_text(model: &MtzModel, inst: &Instance) -> Result<String> {
    model.check()?;
    let k = model.k();
    if model.nodes.iter().any(|&h| h >= inst.len()) || model.dim != inst.dim {
        return Err(Error::ModelInvariant("model nodes do not match the instance".into()));
    }
    let ax = axes(model.dim);
    let mut out = String::new();
    let w = &mut out;
    let _ = writeln!(w, "# forest-escape mixed-integer visiting-order model");
    let _ = writeln!(w, "K {k}");
    let _ = writeln!(w, "DIM {}", model.dim);
    let _ = writeln!(w, "CLOSED {}", model.closed);
    match model.anchor {
        Some(a) => {
            let coords: Vec<String> = ax.iter().enumerate().map(|(i, _)| num(a.get(i))).collect();
            let _ = writeln!(w, "ANCHOR {}", coords.join(" "));
        }
        None => {
            let _ = writeln!(w, "ANCHOR none");
        }
    }
    for (i, &h) in model.nodes.iter().enumerate() {
        let _ = writeln!(w, "NODE {i} {h}");
    }

    let _ = writeln!(w, "VARS");
    for i in 0..k {
        for j in 0..k {
            let _ = writeln!(w, "binary b_{i}_{j}");
        }
    }
    for i in 0..k {
        let _ = writeln!(w, "bounded u_{i} 0 {}", k - 1);
    }
    for i in 0..k {
        for a in ax {
            let _ = writeln!(w, "free {a}_{i}");
        }
    }
    if model.anchor.is_some() {
        let _ = writeln!(w, "nonneg c_0_0");
    }
    for i in 0..k {
        for j in (0..k).filter(|&j| j != i) {
            let _ = writeln!(w, "nonneg c_{i}_{j}");
        }
    }

    let _ = writeln!(w, "OBJ");
    if model.anchor.is_some() {
        let _ = writeln!(w, "term c_0_0");
    }
    for i in 0..k {
        for j in (0..k).filter(|&j| j != i) {
            let _ = writeln!(w, "term b_{i}_{j} c_{i}_{j}");
        }
    }

    let _ = writeln!(w, "QCONS");
    if model.anchor.is_some() {
        let _ = writeln!(w, "dist c_0_0 0 anchor");
    }
    for i in 0..k {
        for j in (0..k).filter(|&j| j != i) {
            if j != 0 {
                let _ = writeln!(w, "dist c_{i}_{j} {i} {j}");
            } else if model.closed && model.anchor.is_some() {
                let _ = writeln!(w, "dist c_{i}_0 {i} anchor");
            }
        }
    }
    for (i, &h) in model.nodes.iter().enumerate() {
        let _ = writeln!(w, "boundary {i} {}", inst.boundaries[h]);
    }

    let _ = writeln!(w, "LCONS");
    // A single node has no arcs, so only the diagonal rows apply.
    if k > 1 {
        for i in 0..k {
            let _ = writeln!(w, "row {i}");
        }
        for j in 0..k {
            let _ = writeln!(w, "col {j}");
        }
    }
    for i in 0..k {
        let _ = writeln!(w, "diag {i}");
    }
    if !(model.closed && model.anchor.is_some()) {
        for i in 1..k {
            let _ = writeln!(w, "fix c_{i}_0 0");
        }
    }
    for i in 1..k {
        for j in (1..k).filter(|&j| j != i) {
            let _ = writeln!(w, "subtour {i} {j} {}", k - 1);
        }
    }

    let _ = writeln!(w, "SOLUTION");
    for i in 0..k {
        for j in 0..k {
            let _ = writeln!(w, "b_{i}_{j} {}", model.b[i][j]);
        }
    }
    for i in 0..k {
        let _ = writeln!(w, "u_{i} {}", num(model.u[i]));
    }
    for i in 0..k {
        for (a, name) in ax.iter().enumerate() {
            let _ = writeln!(w, "{name}_{i} {}", num(model.points[i].get(a)));
        }
    }
    if let Some(c00) = model.c00 {
        let _ = writeln!(w, "c_0_0 {}", num(c00));
    }
    for i in 0..k {
        for j in (0..k).filter(|&j| j != i) {
            let _ = writeln!(w, "c_{i}_{j} {}", num(model.c[i][j]));
        }
    }
    let _ = writeln!(w, "objective {}", num(model.objective()));
    let _ = writeln!(w, "END");
    Ok(out)
}

/// What the checker verified about a model file.
#[derive(Clone, Debug, PartialEq)]
pub struct MtzCheck {
    pub k: usize,
    pub binaries: usize,
    pub auxiliaries: usize,
    /// Objective recomputed from the solution values.
    pub objective: f64,
    pub stated_objective: f64,
    pub max_boundary_residual: f64,
    pub max_distance_error: f64,
}

/// Tolerance on linear, distance and objective checks.
pub const MTZ_CHECK_TOL: f64 = 1e-9;

/// Parses a model file and verifies that its embedded solution satisfies
/// every declared constraint. Boundary equations are checked on the scaled
/// residual against `boundary_tol`; everything else against
/// [`MTZ_CHECK_TOL`], relative to the magnitude of the values involved.
pub fn check_mtz_text(text: &str, boundary_tol: f64) -> Result<MtzCheck> {
    use std::collections::BTreeMap;

    let parse_err = |line: usize, what: &str| Error::Parse(format!("model line {}: {what}", line + 1));
    let infeasible = |what: String| Error::ModelInvariant(what);
    let float = |line: usize, s: &str| s.parse::<f64>().map_err(|_| parse_err(line, &format!("bad number '{s}'")));
    let index = |line: usize, s: &str| s.parse::<usize>().map_err(|_| parse_err(line, &format!("bad index '{s}'")));

    let mut k = None;
    let mut dim = None;
    let mut closed = None;
    let mut anchor: Option<Option<Vec3>> = None;
    let mut nodes: BTreeMap<usize, usize> = BTreeMap::new();
    let mut kinds: BTreeMap<String, (String, Option<(f64, f64)>)> = BTreeMap::new();
    let mut terms: Vec<Vec<String>> = Vec::new();
    let mut dists: Vec<(String, usize, Option<usize>)> = Vec::new();
    let mut bounds: Vec<(usize, BoundaryExpr)> = Vec::new();
    let mut lcons: Vec<(usize, Vec<String>)> = Vec::new();
    let mut values: BTreeMap<String, f64> = BTreeMap::new();
    let mut stated = None;
    let mut section = "HEADER";
    let mut ended = false;

    for (ln, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if ended {
            return Err(parse_err(ln, "content after END"));
        }
        if matches!(line, "VARS" | "OBJ" | "QCONS" | "LCONS" | "SOLUTION" | "END") {
            section = line;
            ended = line == "END";
            continue;
        }
        let tok: Vec<&str> = line.split_whitespace().collect();
        match (section, tok[0]) {
            ("HEADER", "K") if tok.len() == 2 => k = Some(index(ln, tok[1])?),
            ("HEADER", "DIM") if tok.len() == 2 => dim = Some(index(ln, tok[1])?),
            ("HEADER", "CLOSED") if tok.len() == 2 => {
                closed = Some(tok[1].parse::<bool>().map_err(|_| parse_err(ln, "CLOSED takes true or false"))?)
            }
            ("HEADER", "ANCHOR") if tok.len() == 2 && tok[1] == "none" => anchor = Some(None),
            ("HEADER", "ANCHOR") if tok.len() == 3 || tok.len() == 4 => {
                let z = if tok.len() == 4 { float(ln, tok[3])? } else { 0.0 };
                anchor = Some(Some(Vec3::new(float(ln, tok[1])?, float(ln, tok[2])?, z)));
            }
            ("HEADER", "NODE") if tok.len() == 3 => {
                nodes.insert(index(ln, tok[1])?, index(ln, tok[2])?);
            }
            ("VARS", "binary" | "free" | "nonneg") if tok.len() == 2 => {
                if kinds.insert(tok[1].to_string(), (tok[0].to_string(), None)).is_some() {
                    return Err(parse_err(ln, "variable declared twice"));
                }
            }
            ("VARS", "bounded") if tok.len() == 4 => {
                let range = (float(ln, tok[2])?, float(ln, tok[3])?);
                if kinds.insert(tok[1].to_string(), ("bounded".into(), Some(range))).is_some() {
                    return Err(parse_err(ln, "variable declared twice"));
                }
            }
            ("OBJ", "term") if tok.len() == 2 || tok.len() == 3 => {
                terms.push(tok[1..].iter().map(|s| s.to_string()).collect())
            }
            ("QCONS", "dist") if tok.len() == 4 => {
                let to = if tok[3] == "anchor" { None } else { Some(index(ln, tok[3])?) };
                dists.push((tok[1].to_string(), index(ln, tok[2])?, to));
            }
            ("QCONS", "boundary") if tok.len() >= 3 => {
                let i = index(ln, tok[1])?;
                let rest = line["boundary".len()..].trim_start()[tok[1].len()..].trim();
                let expr = rest.parse::<BoundaryExpr>().map_err(|e: Error| parse_err(ln, &e.to_string()))?;
                bounds.push((i, expr));
            }
            ("LCONS", "row" | "col" | "diag" | "fix" | "subtour") => {
                lcons.push((ln, tok.iter().map(|s| s.to_string()).collect()))
            }
            ("SOLUTION", "objective") if tok.len() == 2 => stated = Some(float(ln, tok[1])?),
            ("SOLUTION", name) if tok.len() == 2 => {
                if values.insert(name.to_string(), float(ln, tok[1])?).is_some() {
                    return Err(parse_err(ln, "value given twice"));
                }
            }
            _ => return Err(parse_err(ln, &format!("unexpected '{line}' in {section}"))),
        }
    }
    if !ended {
        return Err(Error::Parse("model text has no END".into()));
    }
    let (Some(k), Some(dim), Some(closed), Some(anchor), Some(stated)) = (k, dim, closed, anchor, stated) else {
        return Err(Error::Parse("model text is missing K, DIM, CLOSED, ANCHOR or objective".into()));
    };
    if nodes.len() != k || nodes.keys().copied().ne(0..k) {
        return Err(Error::Parse("NODE lines must cover 0..K".into()));
    }
    if dim != 2 && dim != 3 {
        return Err(Error::Parse(format!("DIM must be 2 or 3, got {dim}")));
    }

    for (name, (kind, range)) in &kinds {
        let v = *values
            .get(name)
            .ok_or_else(|| Error::Parse(format!("no solution value for {name}")))?;
        let ok = match kind.as_str() {
            "binary" => v == 0.0 || v == 1.0,
            "nonneg" => v >= 0.0,
            "bounded" => {
                let (lo, hi) = range.unwrap_or((0.0, 0.0));
                v >= lo - MTZ_CHECK_TOL && v <= hi + MTZ_CHECK_TOL
            }
            _ => v.is_finite(),
        };
        if !ok {
            return Err(infeasible(format!("{name} = {v} violates its {kind} declaration")));
        }
    }
    if let Some(extra) = values.keys().find(|n| !kinds.contains_key(*n)) {
        return Err(Error::Parse(format!("solution value for undeclared variable {extra}")));
    }
    let binaries = kinds.values().filter(|(kind, _)| kind == "binary").count();
    let auxiliaries = kinds.keys().filter(|n| n.starts_with("u_")).count();
    if binaries != k * k || auxiliaries != k {
        return Err(infeasible(format!("expected {} binaries and {k} auxiliaries, found {binaries} and {auxiliaries}", k * k)));
    }
    let val = |name: &str| {
        values
            .get(name)
            .copied()
            .ok_or_else(|| Error::Parse(format!("reference to undeclared variable {name}")))
    };
    let point = |i: usize| -> Result<Vec3> {
        let ax = axes(dim);
        let mut c = [0.0; 3];
        for (a, name) in ax.iter().enumerate() {
            c[a] = val(&format!("{name}_{i}"))?;
        }
        Ok(Vec3::new(c[0], c[1], c[2]))
    };

    let mut objective_terms = Vec::with_capacity(terms.len());
    for t in &terms {
        objective_terms.push(t.iter().map(|n| val(n)).product::<Result<f64>>()?);
    }
    let objective = crate::path::compensated_sum(&objective_terms);
    if (objective - stated).abs() > MTZ_CHECK_TOL * stated.abs().max(1.0) {
        return Err(infeasible(format!("stated objective {stated} but solution gives {objective}")));
    }

    let mut max_distance_error: f64 = 0.0;
    for (c, i, j) in &dists {
        let from = point(*i)?;
        let to = match j {
            Some(j) => point(*j)?,
            None => anchor.ok_or_else(|| Error::Parse("distance to a missing anchor".into()))?,
        };
        let d = (from - to).norm();
        let err = (val(c)? - d).abs();
        if err > MTZ_CHECK_TOL * d.max(1.0) {
            return Err(infeasible(format!("{c} = {} but the distance is {d}", val(c)?)));
        }
        max_distance_error = max_distance_error.max(err);
    }
    if bounds.len() != k {
        return Err(Error::Parse(format!("expected {k} boundary equations, found {}", bounds.len())));
    }
    let mut max_boundary_residual: f64 = 0.0;
    for (i, expr) in &bounds {
        if expr.dim() != dim {
            return Err(Error::Parse(format!("boundary {i} has the wrong dimension")));
        }
        let r = expr.scaled_residual_at(point(*i)?);
        if r > boundary_tol {
            return Err(infeasible(format!("node {i} misses its boundary by {r}")));
        }
        max_boundary_residual = max_boundary_residual.max(r);
    }

    let b = |i: usize, j: usize| val(&format!("b_{i}_{j}"));
    for (ln, tok) in &lcons {
        let bad_arity = || parse_err(*ln, "wrong number of operands");
        match tok[0].as_str() {
            "row" | "col" | "diag" => {
                let [_, i] = tok.as_slice() else { return Err(bad_arity()) };
                let i = index(*ln, i)?;
                let sum = match tok[0].as_str() {
                    "row" => (0..k).map(|j| b(i, j)).sum::<Result<f64>>()?,
                    "col" => (0..k).map(|r| b(r, i)).sum::<Result<f64>>()?,
                    _ => b(i, i)? + 1.0,
                };
                if sum != 1.0 {
                    return Err(infeasible(format!("{} {i} does not hold", tok[0])));
                }
            }
            "fix" => {
                let [_, name, v] = tok.as_slice() else { return Err(bad_arity()) };
                let target = float(*ln, v)?;
                if (val(name)? - target).abs() > MTZ_CHECK_TOL {
                    return Err(infeasible(format!("{name} is not fixed at {target}")));
                }
            }
            _ => {
                let [_, i, j, big] = tok.as_slice() else { return Err(bad_arity()) };
                let (i, j, big) = (index(*ln, i)?, index(*ln, j)?, float(*ln, big)?);
                let lhs = val(&format!("u_{i}"))? - val(&format!("u_{j}"))? + 1.0;
                if lhs > big * (1.0 - b(i, j)?) + MTZ_CHECK_TOL {
                    return Err(infeasible(format!("subtour constraint ({i}, {j}) fails")));
                }
            }
        }
    }
    let _ = closed;

    Ok(MtzCheck {
        k,
        binaries,
        auxiliaries,
        objective,
        stated_objective: stated,
        max_boundary_residual,
        max_distance_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nlp_solver::{solve_fixed_order, SolveOptions};
    use crate::order_search::{exhaustive, OrderPlan};
    use crate::scenario::{catalog_instance, Mode};

    fn points_instance(k: usize) -> Instance {
        let targets = (0..k)
            .map(|i| BoundaryExpr::point(Vec2::new(1.0 + (i as f64 * 1.7).sin(), (i as f64 * 2.3).cos() * 2.0)))
            .collect();
        Instance::from_boundaries("pts", targets, Some(Vec3::ZERO), Mode::EscapeOpen).unwrap()
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let inst = catalog_instance("point_unit", 16).unwrap();
        let sol = solve_fixed_order(&inst, &OrderPlan::identity(16), &SolveOptions::default()).unwrap();
        let text = to_csv(&sol).unwrap();
        assert_eq!(text.lines().count(), 17);
        let rows = read_solution_csv(&text).unwrap();
        for (j, row) in rows.iter().enumerate() {
            assert_eq!(row.order_index, j);
            assert_eq!(row.boundary_index, sol.order.perm()[j]);
            assert_eq!(row.point, sol.points()[j]);
            assert_eq!(row.residual, sol.residuals[j]);
        }
    }

    #[test]
    fn one_point_csv_has_two_lines() {
        let inst = points_instance(1);
        let sol = solve_fixed_order(&inst, &OrderPlan::identity(1), &SolveOptions::default()).unwrap();
        assert_eq!(to_csv(&sol).unwrap().lines().count(), 2);
    }

    #[test]
    fn svg_is_deterministic_and_counts_vertices() {
        let inst = catalog_instance("point_unit", 24).unwrap();
        let sol = solve_fixed_order(&inst, &OrderPlan::identity(24), &SolveOptions::default()).unwrap();
        let a = to_svg(&sol, &inst);
        assert_eq!(a, to_svg(&sol, &inst));
        let scene = SvgScene::new(&inst, Some(&sol));
        let path = scene
            .elements
            .iter()
            .filter_map(|e| match e {
                SvgElement::Polyline { points, color: "black", .. } if points.len() > 2 => Some(points.len()),
                _ => None,
            })
            .collect::<Vec<_>>();
        assert_eq!(path, vec![24]);
        let red_dots = scene.elements.iter().filter(|e| matches!(e, SvgElement::Dot { color: "red", .. })).count();
        assert_eq!(red_dots, 48);
        for e in &scene.elements {
            if let SvgElement::Dot { center, .. } = e {
                assert!(center.x >= scene.min.x && center.x <= scene.max.x);
                assert!(center.y >= scene.min.y && center.y <= scene.max.y);
            }
        }
        assert!(a.starts_with("<?xml") && a.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn empty_scene_draws_boundaries_only() {
        let inst = catalog_instance("halfplane_unit", 8).unwrap();
        let svg = boundaries_svg(&inst);
        assert!(!svg.contains("stroke=\"black\""));
        assert!(svg.contains("stroke=\"red\""));
    }

    #[test]
    fn line_clipping() {
        let (a, b) = clip_line(0.0, 0.5, Vec2::new(-1.0, -1.0), Vec2::new(1.0, 1.0)).unwrap();
        assert!((a.x - 0.5).abs() < 1e-15 && (b.x - 0.5).abs() < 1e-15);
        assert!(((a.y - b.y).abs() - 2.0).abs() < 1e-15);
        assert!(clip_line(0.0, 2.0, Vec2::new(-1.0, -1.0), Vec2::new(1.0, 1.0)).is_none());
    }

    #[test]
    fn mtz_text_counts_and_checks() {
        for (k, mode) in [(3, Mode::EscapeOpen), (5, Mode::EscapeOpen), (4, Mode::EscapeClosed)] {
            let base = points_instance(k);
            let inst = Instance::from_boundaries("pts", base.boundaries.clone(), base.anchor, mode).unwrap();
            let sol = exhaustive(&inst, &SolveOptions::default()).unwrap();
            let model = MtzModel::from_solution(&inst, &sol).unwrap();
            let text = to_mtz_text(&model, &inst).unwrap();
            assert_eq!(text.lines().filter(|l| l.starts_with("binary ")).count(), k * k);
            assert_eq!(text.lines().filter(|l| l.starts_with("bounded u_")).count(), k);
            let report = check_mtz_text(&text, 1e-9).unwrap();
            assert_eq!((report.binaries, report.auxiliaries), (k * k, k));
            assert!((report.objective - sol.length).abs() <= 1e-9 * sol.length.max(1.0));
            assert_eq!(text, to_mtz_text(&model, &inst).unwrap());
        }
    }

    #[test]
    fn mtz_checker_rejects_tampering() {
        let inst = points_instance(3);
        let sol = exhaustive(&inst, &SolveOptions::default()).unwrap();
        let model = MtzModel::from_solution(&inst, &sol).unwrap();
        let text = to_mtz_text(&model, &inst).unwrap();
        let swapped = text.replace("b_0_1 1\n", "b_0_1 0\n").replace("b_0_2 0\n", "b_0_2 1\n");
        assert!(matches!(check_mtz_text(&swapped, 1e-9), Err(Error::ModelInvariant(_))));
        let moved = text.replacen("objective ", "objective 1", 1);
        assert!(check_mtz_text(&moved, 1e-9).is_err());
        assert!(matches!(check_mtz_text("K 3\n", 1e-9), Err(Error::Parse(_))));

        let mut broken = model.clone();
        broken.b[0][0] = 1;
        assert!(to_mtz_text(&broken, &inst).is_err());
    }
}
