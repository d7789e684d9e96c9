//! Discretized problem instances and the scenario catalog.
//!
//! A [`ScenarioSpec`] describes a forest (its boundary, the candidate start
//! points and the number of orientations); [`build_instance`] expands it into
//! the finite family of moved boundaries that one escape path must touch.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoundaryExpr, RigidMotion, Vec2, Vec3};
use crate::order_search::OrderPlan;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    EscapeOpen,
    EscapeClosed,
    Opaque,
    Plane3d,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::EscapeOpen => "escape_open",
            Mode::EscapeClosed => "escape_closed",
            Mode::Opaque => "opaque",
            Mode::Plane3d => "plane3d",
        }
    }
}

/// Direction in which orientation `i` turns the base boundary.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Turn {
    Ccw,
    Cw,
}

/// How boundary `(k, i)` is generated from the spec.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Family {
    /// `base_boundary` rotated about start `k`. Escape instances then shift
    /// it by `-start_k` so every path leaves from the origin.
    Rigid,
    /// Lines through start `k` with normal angle `alpha_i`.
    LinesThroughStarts,
    /// Tangent lines of the ellipse `x^2/a^2 + y^2/b^2 = 1` at parameter
    /// `alpha_i + phase`.
    EllipseTangents {
        semi_x: f64,
        semi_y: f64,
        phase: f64,
    },
    /// Tangent planes of the unit sphere on an `N x M` angle grid.
    SphereTangentPlanes,
}

/// Symmetry of the start region that lets starts be folded into a
/// fundamental domain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Symmetry {
    None,
    /// Strip of the given width; the coordinate along `across` is folded
    /// into `[0, width/2]`.
    StripReflection { across: Vec2, width: f64 },
    /// Rotational symmetry about the origin: starts are moved onto the
    /// positive x axis.
    CircleRay,
    /// Three-fold symmetry about the origin: starts are rotated into the
    /// third containing the direction `-pi/2`.
    TriangleThird,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioSpec {
    pub name: String,
    pub base_boundary: BoundaryExpr,
    pub starts: Vec<Vec2>,
    pub n_orientations: usize,
    pub mode: Mode,
    pub family: Family,
    pub order_hint: Option<OrderPlan>,
    /// Rotation range; orientation `i` turns by `i * angle_range / N`.
    pub angle_range: f64,
    pub turn: Turn,
    /// Heading (before rotation) used to seed solver starts.
    pub base_heading: Vec2,
    pub params: BTreeMap<String, f64>,
    pub symmetry: Symmetry,
    pub symmetry_reduced: bool,
    /// Area of the bounded region, where there is one.
    pub region_area: Option<f64>,
    /// Exact continuum optimum of this discretization's limit, when known.
    pub known_length: Option<f64>,
    /// Published numerical value for comparison, when there is one.
    pub reference_length: Option<f64>,
    /// Known escape path from the start; its first hits seed the solver.
    pub reference_path: Option<Vec<Vec2>>,
}

impl ScenarioSpec {
    pub fn m(&self) -> usize {
        self.starts.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_orientations == 0 {
            return Err(Error::InvalidSpec("N must be at least 1".into()));
        }
        if self.starts.is_empty() {
            return Err(Error::InvalidSpec("at least one start is required".into()));
        }
        if !(self.angle_range > 0.0 && self.angle_range <= TAU + 1e-12) {
            return Err(Error::InvalidSpec(format!(
                "angle range must lie in (0, 2pi], got {}",
                self.angle_range
            )));
        }
        if let Some((k, v)) = self.params.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidSpec(format!("parameter {k} is not finite ({v})")));
        }
        if self.starts.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidSpec("start points must be finite".into()));
        }
        if let Some(hint) = &self.order_hint {
            if hint.len() != self.n_orientations * self.m() {
                return Err(Error::InvalidSpec(format!(
                    "order hint has {} entries, instance has {}",
                    hint.len(),
                    self.n_orientations * self.m()
                )));
            }
        }
        Ok(())
    }

    /// Orientation angle of index `i`, signed by the turn direction.
    pub fn orientation(&self, i: usize) -> f64 {
        let a = i as f64 * self.angle_range / self.n_orientations as f64;
        match self.turn {
            Turn::Ccw => a,
            Turn::Cw => -a,
        }
    }
}

/// Identifies the start `k` and orientation `i` a boundary came from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryLabel {
    pub k: usize,
    pub i: usize,
    pub angle: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub name: String,
    pub boundaries: Vec<BoundaryExpr>,
    /// Common start of every escape path; opaque instances have none.
    pub anchor: Option<Vec3>,
    pub mode: Mode,
    pub dim: usize,
    pub labels: Vec<BoundaryLabel>,
    /// Per-boundary unit heading used to seed the continuous solver.
    pub seed_dirs: Vec<Vec3>,
    /// Per-boundary feasible points that seed the first solver start.
    pub seed_points: Option<Vec<Vec3>>,
    /// Reference point that moves with the instance: the anchor, or the
    /// region centre for opaque sets.
    pub centre: Vec3,
    pub n: usize,
    pub m: usize,
}

impl Instance {
    pub fn len(&self) -> usize {
        self.boundaries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boundaries.is_empty()
    }

    pub fn is_closed(&self) -> bool {
        self.mode == Mode::EscapeClosed
    }

    /// Moves the whole instance (anchor, boundaries, seed headings).
    pub fn transformed(&self, m: &RigidMotion) -> Result<Instance> {
        if self.dim != 2 {
            return Err(Error::UnsupportedMotion);
        }
        Ok(Instance {
            boundaries: self
                .boundaries
                .iter()
                .map(|b| b.apply_motion(m))
                .collect::<Result<_>>()?,
            anchor: self.anchor.map(|a| m.apply(a.xy()).extend(0.0)),
            seed_dirs: self
                .seed_dirs
                .iter()
                .map(|d| m.apply_direction(d.xy()).extend(0.0))
                .collect(),
            seed_points: self
                .seed_points
                .as_ref()
                .map(|pts| pts.iter().map(|p| m.apply(p.xy()).extend(0.0)).collect()),
            centre: m.apply(self.centre.xy()).extend(0.0),
            ..self.clone()
        })
    }

    /// Scales the instance about the origin.
    pub fn scaled(&self, s: f64) -> Result<Instance> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidInput(format!("scale must be positive, got {s}")));
        }
        Ok(Instance {
            boundaries: self.boundaries.iter().map(|b| b.scaled(s)).collect(),
            anchor: self.anchor.map(|a| a * s),
            seed_points: self.seed_points.as_ref().map(|pts| pts.iter().map(|&p| p * s).collect()),
            centre: self.centre * s,
            ..self.clone()
        })
    }

    /// Keeps only the listed boundaries, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Instance> {
        if let Some(&bad) = indices.iter().find(|&&h| h >= self.len()) {
            return Err(Error::InvalidInput(format!("boundary index {bad} out of range")));
        }
        Ok(Instance {
            boundaries: indices.iter().map(|&h| self.boundaries[h].clone()).collect(),
            labels: indices.iter().map(|&h| self.labels[h]).collect(),
            seed_dirs: indices.iter().map(|&h| self.seed_dirs[h]).collect(),
            seed_points: self
                .seed_points
                .as_ref()
                .map(|pts| indices.iter().map(|&h| pts[h]).collect()),
            ..self.clone()
        })
    }

    /// Instance built directly from boundaries (no catalog entry).
    pub fn from_boundaries(
        name: &str,
        boundaries: Vec<BoundaryExpr>,
        anchor: Option<Vec3>,
        mode: Mode,
    ) -> Result<Instance> {
        let Some(first) = boundaries.first() else {
            return Err(Error::InvalidSpec("instance needs at least one boundary".into()));
        };
        let dim = first.dim();
        if boundaries.iter().any(|b| b.dim() != dim) {
            return Err(Error::InvalidSpec("boundaries mix dimensions".into()));
        }
        let n = boundaries.len();
        let labels = (0..n)
            .map(|i| BoundaryLabel {
                k: 0,
                i,
                angle: 0.0,
            })
            .collect();
        let origin = anchor.unwrap_or(Vec3::ZERO);
        let seed_dirs = boundaries
            .iter()
            .map(|b| {
                (b.project_at(origin) - origin)
                    .normalized()
                    .unwrap_or(Vec3::new(1.0, 0.0, 0.0))
            })
            .collect();
        Ok(Instance {
            name: name.to_string(),
            boundaries,
            anchor,
            mode,
            dim,
            labels,
            seed_dirs,
            seed_points: None,
            centre: origin,
            n,
            m: 1,
        })
    }
}

/// Builds the instance for any mode.
pub fn build_instance(spec: &ScenarioSpec) -> Result<Instance> {
    match spec.mode {
        Mode::EscapeOpen | Mode::EscapeClosed if spec.m() == 1 => build_weak_form_1(spec),
        Mode::EscapeOpen | Mode::EscapeClosed => build_weak_form_2(spec),
        Mode::Opaque => build_opaque(spec),
        Mode::Plane3d => build_plane3d(spec),
    }
}

/// One start, `N` orientations. The anchor is the start itself.
pub fn build_weak_form_1(spec: &ScenarioSpec) -> Result<Instance> {
    spec.validate()?;
    check_escape_mode(spec)?;
    if spec.m() != 1 {
        return Err(Error::WrongForm {
            name: spec.name.clone(),
            expected: "exactly one",
            found: spec.m(),
        });
    }
    let start = spec.starts[0];
    assemble(spec, Some(start.extend(0.0)), |i| {
        let m = RigidMotion::rotation(start, spec.orientation(i))?;
        spec.base_boundary.apply_motion(&m)
    })
}

/// `M` starts, `N` orientations; boundary `h = k * N + i` is the base
/// rotated about start `k` and shifted by `-start_k`, so all paths leave
/// from the origin.
pub fn build_weak_form_2(spec: &ScenarioSpec) -> Result<Instance> {
    spec.validate()?;
    check_escape_mode(spec)?;
    let n = spec.n_orientations;
    assemble(spec, Some(Vec3::ZERO), |h| {
        let (k, i) = (h / n, h % n);
        let s = spec.starts[k];
        let m = RigidMotion::new(s, spec.orientation(i), -s)?;
        spec.base_boundary.apply_motion(&m)
    })
}

/// Lines (or tangent lines) that an opaque curve must meet. No anchor.
pub fn build_opaque(spec: &ScenarioSpec) -> Result<Instance> {
    spec.validate()?;
    if spec.mode != Mode::Opaque {
        return Err(Error::InvalidSpec(format!(
            "opaque builder called with mode {}",
            spec.mode.as_str()
        )));
    }
    let n = spec.n_orientations;
    assemble(spec, None, |h| {
        let (k, i) = (h / n, h % n);
        let s = spec.starts[k];
        let alpha = spec.orientation(i);
        match spec.family {
            Family::LinesThroughStarts => {
                Ok(BoundaryExpr::line(alpha, Vec2::from_angle(alpha).dot(s)))
            }
            Family::EllipseTangents {
                semi_x,
                semi_y,
                phase,
            } => {
                let psi = alpha + phase;
                let normal = Vec2::new(psi.cos() / semi_x, psi.sin() / semi_y);
                let len = normal.norm();
                let shifted = normal * (1.0 / len);
                Ok(BoundaryExpr::line(
                    shifted.y.atan2(shifted.x),
                    1.0 / len + shifted.dot(s),
                ))
            }
            Family::Rigid => {
                let m = RigidMotion::rotation(s, alpha)?;
                spec.base_boundary.apply_motion(&m)
            }
            Family::SphereTangentPlanes => Err(Error::InvalidSpec(
                "tangent planes belong to plane3d mode".into(),
            )),
        }
    })
}

/// Tangent planes of the unit ball: normal
/// `(sin(pi i/N) cos(2 pi k/M), sin(pi i/N) sin(2 pi k/M), cos(pi i/N))`,
/// `k = 1..M`, offset 1, index `h = (k-1) N + i`.
pub fn build_plane3d(spec: &ScenarioSpec) -> Result<Instance> {
    spec.validate()?;
    if spec.mode != Mode::Plane3d {
        return Err(Error::InvalidSpec(format!(
            "plane builder called with mode {}",
            spec.mode.as_str()
        )));
    }
    let n = spec.n_orientations;
    let m = spec.m();
    let offset = spec.params.get("radius").copied().unwrap_or(1.0);
    let mut boundaries = Vec::with_capacity(n * m);
    let mut labels = Vec::with_capacity(n * m);
    let mut seed_dirs = Vec::with_capacity(n * m);
    for k in 1..=m {
        let azimuth = TAU * k as f64 / m as f64;
        for i in 0..n {
            let polar = PI * i as f64 / n as f64;
            let normal = Vec3::new(
                polar.sin() * azimuth.cos(),
                polar.sin() * azimuth.sin(),
                polar.cos(),
            );
            let normal = normal.normalized().expect("unit normal");
            boundaries.push(BoundaryExpr::plane3(normal, offset)?);
            labels.push(BoundaryLabel {
                k: k - 1,
                i,
                angle: polar,
            });
            seed_dirs.push(normal);
        }
    }
    Ok(Instance {
        name: spec.name.clone(),
        boundaries,
        anchor: Some(Vec3::ZERO),
        mode: Mode::Plane3d,
        dim: 3,
        labels,
        seed_dirs,
        seed_points: None,
        centre: Vec3::ZERO,
        n,
        m,
    })
}

fn check_escape_mode(spec: &ScenarioSpec) -> Result<()> {
    match (spec.mode, spec.family) {
        (Mode::EscapeOpen | Mode::EscapeClosed, Family::Rigid) => Ok(()),
        (mode, family) => Err(Error::InvalidSpec(format!(
            "escape builders need a rigid family in an escape mode, got {family:?} in {}",
            mode.as_str()
        ))),
    }
}

fn assemble(
    spec: &ScenarioSpec,
    anchor: Option<Vec3>,
    make: impl Fn(usize) -> Result<BoundaryExpr>,
) -> Result<Instance> {
    let n = spec.n_orientations;
    let total = n * spec.m();
    let mut boundaries = Vec::with_capacity(total);
    let mut labels = Vec::with_capacity(total);
    let mut seed_dirs = Vec::with_capacity(total);
    for h in 0..total {
        let (k, i) = (h / n, h % n);
        let angle = spec.orientation(i);
        boundaries.push(make(h)?);
        labels.push(BoundaryLabel { k, i, angle });
        seed_dirs.push(spec.base_heading.rotate(angle).extend(0.0));
    }
    let mut inst = Instance {
        name: spec.name.clone(),
        boundaries,
        anchor,
        mode: spec.mode,
        dim: 2,
        labels,
        seed_dirs,
        seed_points: None,
        centre: anchor.unwrap_or(spec.starts[0].extend(0.0)),
        n,
        m: spec.m(),
    };
    if let Some(path) = &spec.reference_path {
        inst.seed_points = Some(first_hits(&inst, path)?.1);
    }
    Ok(inst)
}

/// Folds the starts into the fundamental domain of the spec's symmetry and
/// removes duplicates. Unknown symmetries leave the spec unchanged.
pub fn symmetry_reduce(spec: &ScenarioSpec) -> ScenarioSpec {
    let fold: Box<dyn Fn(Vec2) -> Vec2> = match spec.symmetry {
        Symmetry::None => {
            log::warn!("scenario {} has no documented symmetry; starts unchanged", spec.name);
            return spec.clone();
        }
        Symmetry::StripReflection { across, width } => Box::new(move |s: Vec2| {
            let t = s.dot(across);
            if t > width / 2.0 {
                s + across * (width - 2.0 * t)
            } else {
                s
            }
        }),
        Symmetry::CircleRay => Box::new(|s: Vec2| Vec2::new(s.norm(), 0.0)),
        Symmetry::TriangleThird => Box::new(|s: Vec2| {
            let mut p = s;
            for _ in 0..3 {
                if in_bottom_third(p) {
                    break;
                }
                p = p.rotate(2.0 * PI / 3.0);
            }
            p
        }),
    };
    let mut starts: Vec<Vec2> = Vec::new();
    for s in spec.starts.iter().map(|&s| fold(s)) {
        if !starts.iter().any(|t| (*t - s).norm() <= 1e-12) {
            starts.push(s);
        }
    }
    ScenarioSpec {
        starts,
        symmetry_reduced: true,
        order_hint: None,
        ..spec.clone()
    }
}

/// Bottom third of a triangle centred at the origin with three-fold
/// symmetry: polar angle within `pi/3` of `-pi/2`.
fn in_bottom_third(p: Vec2) -> bool {
    if p.norm() == 0.0 {
        return true;
    }
    let a = p.y.atan2(p.x);
    (a + FRAC_PI_2).abs() <= FRAC_PI_3 + 1e-12
}

/// Cell-centred grid over `[lo, hi]` (square cells of side
/// `extent / ceil(sqrt(M))`), restricted to `inside`, refined until it has at
/// least `count` points and then thinned evenly to exactly `count`.
pub fn grid_starts(lo: Vec2, hi: Vec2, count: usize, inside: impl Fn(Vec2) -> bool) -> Vec<Vec2> {
    if count == 0 {
        return Vec::new();
    }
    let extent = (hi.x - lo.x).max(hi.y - lo.y);
    let mut per_side = (count as f64).sqrt().ceil() as usize;
    loop {
        let delta = extent / per_side as f64;
        let mut pts = Vec::new();
        for b in 0..per_side {
            for a in 0..per_side {
                let p = Vec2::new(
                    lo.x + (a as f64 + 0.5) * delta,
                    lo.y + (b as f64 + 0.5) * delta,
                );
                if p.x <= hi.x && p.y <= hi.y && inside(p) {
                    pts.push(p);
                }
            }
        }
        if pts.len() >= count || per_side > 4096 {
            let len = pts.len();
            return (0..count.min(len)).map(|j| pts[j * len / count]).collect();
        }
        per_side += 1;
    }
}

/// Which assumed order accompanies a catalog entry.
fn natural_hint(k: usize) -> OrderPlan {
    OrderPlan::identity(k)
}

/// `0, N/2, 1, N/2 + 1, ...` for an even `N`.
pub fn interleaved_half_hint(n: usize) -> Result<OrderPlan> {
    if !n.is_multiple_of(2) {
        return Err(Error::InvalidSpec(format!("interleaved order needs an even N, got {n}")));
    }
    let half = n / 2;
    OrderPlan::new((0..half).flat_map(|j| [j, half + j]).collect())
}

/// `0, 3N/4, 1, 3N/4 + 1, ..., N/4 - 1, N - 1, N/4, N/4 + 1, ..., 3N/4 - 1`
/// for `N` divisible by 4.
pub fn interleaved_quarter_hint(n: usize) -> Result<OrderPlan> {
    if !n.is_multiple_of(4) {
        return Err(Error::InvalidSpec(format!(
            "quarter interleaved order needs N divisible by 4, got {n}"
        )));
    }
    let (q, tq) = (n / 4, 3 * n / 4);
    let mut perm: Vec<usize> = (0..q).flat_map(|j| [j, tq + j]).collect();
    perm.extend(q..tq);
    OrderPlan::new(perm)
}

type BuildFn = fn(usize, usize, &BTreeMap<String, f64>) -> Result<ScenarioSpec>;

#[derive(Clone)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub summary: &'static str,
    pub default_n: usize,
    pub default_m: usize,
    pub params: BTreeMap<String, f64>,
    build: BuildFn,
}

impl CatalogEntry {
    /// Spec for `N` orientations and `M` starts with the entry's parameters
    /// overridden by `overrides`. Unknown parameter names are rejected.
    pub fn spec(&self, n: usize, m: usize, overrides: &BTreeMap<String, f64>) -> Result<ScenarioSpec> {
        let mut params = self.params.clone();
        for (k, v) in overrides {
            if !params.contains_key(k) {
                return Err(Error::InvalidSpec(format!(
                    "scenario {} has no parameter `{k}` (known: {})",
                    self.name,
                    params.keys().cloned().collect::<Vec<_>>().join(", ")
                )));
            }
            params.insert(k.clone(), *v);
        }
        if n == 0 {
            return Err(Error::InvalidSpec("N must be at least 1".into()));
        }
        if m == 0 {
            return Err(Error::InvalidSpec("M must be at least 1".into()));
        }
        let spec = (self.build)(n, m, &params)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn default_spec(&self) -> Result<ScenarioSpec> {
        self.spec(self.default_n, self.default_m, &BTreeMap::new())
    }
}

/// Named scenarios with their default parameters. Parameters may be edited
/// in place, which the verification suite uses for fault injection.
#[derive(Clone)]
pub struct Catalog {
    entries: Vec<CatalogEntry>,
}

impl Default for Catalog {
    fn default() -> Self {
        Self::standard()
    }
}

impl Catalog {
    pub fn standard() -> Self {
        use std::f64::consts::SQRT_2;
        let entry = |name, summary, default_n, default_m, params: &[(&str, f64)], build: BuildFn| {
            CatalogEntry {
                name,
                summary,
                default_n,
                default_m,
                params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
                build,
            }
        };
        let entries = vec![
            entry("halfplane_unit", "straight line at distance 1", 720, 1, &[("distance", 1.0)], halfplane_unit),
            entry(
                "circle_exterior",
                "circle of radius 0.5 whose centre is at distance 1",
                360,
                1,
                &[("distance", 1.0), ("radius", 0.5)],
                circle_exterior,
            ),
            entry(
                "circle_interior_02",
                "enclosing circle of radius 1.2 centred at distance 1",
                360,
                1,
                &[("distance", 1.0), ("radius", 1.2)],
                circle_interior_02,
            ),
            entry(
                "circle_interior_nonunique",
                "enclosing circle of radius 1.500272 centred at distance 1",
                360,
                1,
                &[("distance", 1.0), ("radius", 1.500272)],
                circle_interior_nonunique,
            ),
            entry("point_unit", "single point at distance 1", 720, 1, &[("radius", 1.0)], point_unit),
            entry(
                "circle_plus_segment",
                "unit circle plus an interior radial segment",
                360,
                1,
                &[("radius", 1.0), ("segment_start", 1.0 / (1.0 + TAU))],
                circle_plus_segment,
            ),
            entry(
                "perp_lines_half",
                "two perpendicular lines at distance 1/2, reduced to one line over 3pi/2",
                360,
                1,
                &[("distance", 0.5)],
                perp_lines_half,
            ),
            entry(
                "perp_lines_product",
                "two perpendicular lines at distance 1/2 as a product boundary",
                360,
                1,
                &[("distance", 0.5)],
                perp_lines_product,
            ),
            entry(
                "strip_middle",
                "unit strip from its middle, reduced to one line over pi",
                360,
                1,
                &[("width", 1.0)],
                strip_middle,
            ),
            entry(
                "strip_middle_product",
                "unit strip from its middle as a product boundary",
                360,
                1,
                &[("width", 1.0)],
                strip_middle_product,
            ),
            entry(
                "bisector_angle",
                "two lines at angle theta seen from their bisector at distance 1/2",
                360,
                1,
                &[("theta", FRAC_PI_3), ("distance", 0.5)],
                bisector_angle,
            ),
            entry(
                "zalgaller_class2",
                "unit strip from one edge, far line swept clockwise",
                180,
                1,
                &[("width", 1.0), ("estimate", -FRAC_PI_3)],
                zalgaller_class2,
            ),
            entry(
                "strip_wf2",
                "unit strip with starts across half its width",
                12,
                26,
                &[("width", 1.0)],
                strip_wf2,
            ),
            entry(
                "circle_wf2",
                "unit circle with starts along a radius",
                12,
                4,
                &[("radius", 1.0)],
                circle_wf2,
            ),
            entry(
                "triangle_equilateral",
                "unit equilateral triangle with starts in one third",
                12,
                6,
                &[("side", 1.0)],
                triangle_equilateral,
            ),
            entry(
                "triangle_general",
                "triangle given by three line normals and offsets",
                12,
                6,
                &[
                    ("phi1", -FRAC_PI_2),
                    ("delta1", 0.3),
                    ("phi2", PI),
                    ("delta2", 0.3),
                    ("phi3", PI / 4.0),
                    ("delta3", 0.4 / SQRT_2),
                ],
                triangle_general,
            ),
            entry(
                "sector",
                "circular sector with apex at the origin",
                12,
                6,
                &[("phi1", FRAC_PI_2), ("phi2", FRAC_PI_2 + FRAC_PI_3), ("radius", 1.0)],
                sector,
            ),
            entry("opaque_square", "lines through a grid in the unit square", 8, 4, &[("side", 1.0)], opaque_square),
            entry(
                "opaque_circle_tangent",
                "tangent lines of the unit circle",
                360,
                1,
                &[("radius", 1.0)],
                opaque_circle_tangent,
            ),
            entry("opaque_circle", "lines through a radial grid in the unit disc", 8, 4, &[("radius", 1.0)], opaque_circle),
            entry(
                "opaque_ellipse",
                "tangent lines of the ellipse with semi-axes 1 and 1/2",
                360,
                1,
                &[("phi", 0.0), ("semi_x", 1.0), ("semi_y", 0.5)],
                opaque_ellipse,
            ),
            entry("plane3d", "tangent planes of the unit ball", 8, 8, &[("radius", 1.0)], plane3d),
        ];
        Self { entries }
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|e| e.name).collect()
    }

    pub fn entries(&self) -> &[CatalogEntry] {
        &self.entries
    }

    pub fn get(&self, name: &str) -> Result<&CatalogEntry> {
        self.entries.iter().find(|e| e.name == name).ok_or_else(|| {
            Error::InvalidSpec(format!(
                "unknown scenario `{name}` (known: {})",
                self.names().join(", ")
            ))
        })
    }

    pub fn set_param(&mut self, name: &str, key: &str, value: f64) -> Result<()> {
        let entry = self
            .entries
            .iter_mut()
            .find(|e| e.name == name)
            .ok_or_else(|| Error::InvalidSpec(format!("unknown scenario `{name}`")))?;
        match entry.params.get_mut(key) {
            Some(slot) => {
                *slot = value;
                Ok(())
            }
            None => Err(Error::InvalidSpec(format!("scenario {name} has no parameter `{key}`"))),
        }
    }

    /// Shorthand for `get(name)?.spec(n, m, overrides)`.
    pub fn spec(&self, name: &str, n: usize, m: usize, overrides: &BTreeMap<String, f64>) -> Result<ScenarioSpec> {
        self.get(name)?.spec(n, m, overrides)
    }
}

fn p(params: &BTreeMap<String, f64>, key: &str) -> f64 {
    params[key]
}

fn require_single_start(name: &str, m: usize) -> Result<()> {
    if m != 1 {
        return Err(Error::WrongForm {
            name: name.to_string(),
            expected: "exactly one",
            found: m,
        });
    }
    Ok(())
}

fn base_spec(name: &str, base: BoundaryExpr, n: usize, params: &BTreeMap<String, f64>) -> ScenarioSpec {
    ScenarioSpec {
        name: name.to_string(),
        base_boundary: base,
        starts: vec![Vec2::ZERO],
        n_orientations: n,
        mode: Mode::EscapeOpen,
        family: Family::Rigid,
        order_hint: Some(natural_hint(n)),
        angle_range: TAU,
        turn: Turn::Ccw,
        base_heading: Vec2::new(1.0, 0.0),
        params: params.clone(),
        symmetry: Symmetry::None,
        symmetry_reduced: false,
        region_area: None,
        known_length: None,
        reference_length: None,
        reference_path: None,
    }
}

/// Length of the shortest path from a point at distance `rho` that meets
/// every line whose normal direction sweeps an angle `sweep >= 5 pi / 6`:
/// a first segment at 30 degrees off the initial normal, a circular arc of
/// radius `rho`, and a final tangent segment.
pub fn swept_line_length(rho: f64, sweep: f64) -> Option<f64> {
    (sweep >= 5.0 * PI / 6.0).then(|| rho * (3f64.sqrt() + 1.0 + sweep - 5.0 * PI / 6.0))
}

fn halfplane_unit(n: usize, m: usize, params: &BTreeMap<String, f64>) -> Result<ScenarioSpec> {
    require_single_start("halfplane_unit", m)?;
    let d = p(params, "distance");
    let mut spec = base_spec("halfplane_unit", BoundaryExpr::line(0.0, d), n, params);
    spec.known_length = swept_line_length(d, TAU);
    Ok(spec)
}

fn circle_spec(name: &str, n: usize, m: usize, params: &BTreeMap<String, f64>) -> Result<ScenarioSpec> {
    require_single_start(name, m)?;
    let (d, r) = (p(params, "distance"), p(params, "radius"));
    let base = BoundaryExpr::circle(Vec2::new(d, 0.0), r)?;
    Ok(base_spec(name, base, n, params))
}

fn circle_exterior(n: usize, m: usize, params: &BTreeMap<String, f64>) -> Result<ScenarioSpec> {
    circle_spec("circle_exterior", n, m, params)
}

fn circle_interior_02(n: usize, m: usize, params: &BTreeMap<String, f64>) -> Result<ScenarioSpec> {
    circle_spec("circle_interior_02", n, m, params)
}

fn circle_interior_nonunique(n: usize, m: usize, params: &BTreeMap<String, f64>) -> Result<ScenarioSpec> {
    circle_spec("circle_interior_nonunique", n, m, params)
}

fn point_unit(n: usize, m: usize, params: &BTreeMap<String, f64>) -> Result<ScenarioSpec> {
    require_single_start("point_unit", m)?;
    let r = p(params, "radius");
    let mut spec = base_spec("point_unit", BoundaryExpr::point(Vec2::new(r, 0.0)), n, params);
    spec.known_length = Some(r * (1.0 + TAU));
    Ok(spec)
}

fn circle_plus_segment(n: usize, m: usize, params: &BTreeMap<String, f64>) -> Result<ScenarioSpec> {
    require_single_start("circle_plus_segment", m)?;
    let (r, d) = (p(params, "radius"), p(params, "segment_start"));
    let base = BoundaryExpr::product(vec![
        BoundaryExpr::circle(Vec2::ZERO, r)?,
        BoundaryExpr::segment(Vec2::new(d, 0.0), Vec2::new(r, 0.0))?,
    ])?;
    let mut spec = base_spec("circle_plus_segment", base, n, params);
    spec.known_length = Some(r.min(d * (1.0 + TAU)));
    Ok(spec)
}

fn perp_lines_half(n: usize, m: usize, params: &BTreeMap<String, f64>) -> Result<ScenarioSpec> {
    require_single_start("perp_lines_half", m)?;
    let d = p(params, "distance");
    let mut spec = base_spec("perp_lines_half", BoundaryExpr::line(-FRAC_PI_2, d), n, params);
    spec.angle_range = 1.5 * PI;
    spec.known_length = swept_line_length(d, 1.5 * PI);
    Ok(spec)
}

fn perp_lines_product(n: usize, m: usize, params: &BTreeMap<String, f64>) -> Result<ScenarioSpec> {
    require_single_start("perp_lines_product", m)?;
    let d = p(params, "distance");
    let base = BoundaryExpr::product(vec![BoundaryExpr::line(-FRAC_PI_2, d), BoundaryExpr::line(0.0, d)])?;
    let mut spec = base_spec("perp_lines_product", base, n, params);
    spec.order_hint = interleaved_quarter_hint(n).ok();
    spec.known_length = swept_line_length(d, 1.5 * PI);
    Ok(spec)
}

fn strip_middle(n: usize, m: usize, params: &BTreeMap<String, f64>) -> Result<ScenarioSpec> {
    require_single_start("strip_middle", m)?;
    let half = p(params, "width") / 2.0;
    let mut spec = base_spec("strip_middle", BoundaryExpr::line(PI, half), n, params);
    spec.angle_range = PI;
    spec.known_length = swept_line_length(half, PI);
    Ok(spec)
}

fn strip_middle_product(n: usize, m: usize, params: &BTreeMap<String, f64>) -> Result<ScenarioSpec> {
    require_single_start("strip_middle_product", m)?;
    let half = p(params, "width") / 2.0;
    let base = BoundaryExpr::product(vec![
        BoundaryExpr::line(-FRAC_PI_2, half),
        BoundaryExpr::line(FRAC_PI_2, half),
    ])?;
    let mut spec = base_spec("strip_middle_product", base, n, params);
    spec.order_hint = interleaved_half_hint(n).ok();
    spec.known_length = swept_line_length(half, PI);
    Ok(spec)
}

fn bisector_angle(n: usize, m: usize, params: &BTreeMap<String, f64>) -> Result<ScenarioSpec> {
    require_single_start("bisector_angle", m)?;
    let (theta, d) = (p(params, "theta"), p(params, "distance"));
    if !(theta > 0.0 && theta < TAU) {
        return Err(Error::InvalidSpec(format!("theta must lie in (0, 2pi), got {theta}")));
    }
    let mut spec = base_spec("bisector_angle", BoundaryExpr::line(PI, d), n, params);
    spec.angle_range = TAU - theta;
    spec.known_length = swept_line_length(d, TAU - theta);
    Ok(spec)
}

fn zalgaller_class2(n: usize, m: usize, params: &BTreeMap<String, f64>) -> Result<ScenarioSpec> {
    require_single_start("zalgaller_class2", m)?;
    let (w, estimate) = (p(params, "width"), p(params, "estimate"));
    let mut spec = base_spec("zalgaller_class2", BoundaryExpr::line(-FRAC_PI_2, w), n, params);
    spec.angle_range = zalgaller_range(estimate)?;
    spec.turn = Turn::Cw;
    spec.base_heading = Vec2::new(0.0, -1.0);
    spec.reference_length = Some(2.297 * w);
    Ok(spec)
}

/// Boundaries sorted by the arc length at which `reference` (a polyline
/// from the anchor) first meets them, with the meeting points (by boundary
/// index). Boundaries it never meets go last, by distance to the polyline,
/// with the projection of the final vertex as their point. Ties keep index
/// order.
pub fn first_hits(inst: &Instance, reference: &[Vec2]) -> Result<(OrderPlan, Vec<Vec3>)> {
    const SAMPLES: usize = 256;
    if reference.len() < 2 || inst.dim != 2 {
        return Err(Error::InvalidInput("first-hit order needs a planar polyline with a segment".into()));
    }
    let total: f64 = reference.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
    let end = reference[reference.len() - 1].extend(0.0);
    let key = |b: &BoundaryExpr| -> (f64, Vec3) {
        let leaves = b.factors();
        let mut walked = 0.0;
        let mut nearest = f64::INFINITY;
        for seg in reference.windows(2) {
            let (a, d) = (seg[0].extend(0.0), (seg[1] - seg[0]).extend(0.0));
            let len = d.norm();
            let at = |t: f64| a + d * t;
            let mut hit = f64::INFINITY;
            for f in &leaves {
                if let BoundaryExpr::PointTarget { .. } = f {
                    let q = f.project_at(Vec3::ZERO);
                    let t = ((q - a).dot(d) / d.norm_sq()).clamp(0.0, 1.0);
                    let gap = (at(t) - q).norm();
                    nearest = nearest.min(gap);
                    if gap <= 1e-9 * len.max(1.0) {
                        hit = hit.min(t);
                    }
                    continue;
                }
                nearest = nearest.min(f.distance_at(seg[1].extend(0.0)));
                let mut prev = f.eval_at(a);
                if prev == 0.0 {
                    hit = 0.0;
                    continue;
                }
                for j in 1..=SAMPLES {
                    let t = j as f64 / SAMPLES as f64;
                    let cur = f.eval_at(at(t));
                    if cur == 0.0 || cur.signum() != prev.signum() {
                        let (mut lo, mut hi) = ((j - 1) as f64 / SAMPLES as f64, t);
                        for _ in 0..60 {
                            let mid = 0.5 * (lo + hi);
                            if f.eval_at(at(mid)).signum() == prev.signum() {
                                lo = mid;
                            } else {
                                hi = mid;
                            }
                        }
                        hit = hit.min(hi);
                        break;
                    }
                    prev = cur;
                }
            }
            if hit.is_finite() {
                return (walked + hit * len, at(hit));
            }
            walked += len;
        }
        (total + nearest, b.project_at(end))
    };
    let (keys, points): (Vec<f64>, Vec<Vec3>) = inst.boundaries.iter().map(key).unzip();
    let mut perm: Vec<usize> = (0..inst.len()).collect();
    perm.sort_by(|&x, &y| keys[x].total_cmp(&keys[y]).then(x.cmp(&y)));
    Ok((OrderPlan::new(perm)?, points))
}

/// Sweep of the far line for a given estimate of `atan(y0 / x0)`.
pub fn zalgaller_range(estimate: f64) -> Result<f64> {
    let range = PI - estimate;
    if !(range > 0.0 && range <= TAU) {
        return Err(Error::InvalidSpec(format!(
            "estimate {estimate} gives sweep {range} outside (0, 2pi]"
        )));
    }
    Ok(range)
}

fn strip_wf2(n: usize, m: usize, params: &BTreeMap<String, f64>) -> Result<ScenarioSpec> {
    let w = p(params, "width");
    let base = BoundaryExpr::product(vec![BoundaryExpr::line(0.0, 0.0), BoundaryExpr::line(0.0, w)])?;
    let mut spec = base_spec("strip_wf2", base, n, params);
    spec.starts = (1..=m).map(|k| Vec2::new(w * (k - 1) as f64 / (2 * m) as f64, 0.0)).collect();
    spec.symmetry = Symmetry::StripReflection {
        across: Vec2::new(1.0, 0.0),
        width: w,
    };
    spec.symmetry_reduced = true;
    spec.reference_length = Some(2.278292 * w);
    // Two sides of an equilateral triangle of height w: every strip of
    // width w containing the start is crossed.
    let side = 2.0 * w / 3f64.sqrt();
    let reference = [Vec2::ZERO, Vec2::new(side, 0.0), Vec2::new(side / 2.0, w)];
    spec.order_hint = None;
    spec.reference_path = Some(reference.to_vec());
    spec.order_hint = Some(first_hits(&build_weak_form_2(&spec)?, &reference)?.0);
    Ok(spec)
}

fn circle_wf2(n: usize, m: usize, params: &BTreeMap<String, f64>) -> Result<ScenarioSpec> {
    let r = p(params, "radius");
    let mut spec = base_spec("circle_wf2", BoundaryExpr::circle(Vec2::ZERO, r)?, n, params);
    spec.starts = (1..=m).map(|k| Vec2::new(r * k as f64 / m as f64, 0.0)).collect();
    spec.order_hint = None;
    spec.symmetry = Symmetry::CircleRay;
    spec.symmetry_reduced = true;
    spec.region_area = Some(PI * r * r);
    spec.known_length = Some(2.0 * r);
    Ok(spec)
}

/// Vertices of the triangle `{p : n_j . p <= delta_j}`.
fn triangle_vertices(lines: &[(f64, f64); 3]) -> Result<[Vec2; 3]> {
    let meet = |a: (f64, f64), b: (f64, f64)| -> Result<Vec2> {
        let (na, nb) = (Vec2::from_angle(a.0), Vec2::from_angle(b.0));
        let det = na.cross(nb);
        if det.abs() < 1e-12 {
            return Err(Error::InvalidSpec("triangle has parallel sides".into()));
        }
        Ok(Vec2::new(
            (a.1 * nb.y - b.1 * na.y) / det,
            (na.x * b.1 - nb.x * a.1) / det,
        ))
    };
    Ok([
        meet(lines[1], lines[2])?,
        meet(lines[2], lines[0])?,
        meet(lines[0], lines[1])?,
    ])
}

fn polygon_area(v: &[Vec2]) -> f64 {
    let n = v.len();
    (0..n).map(|j| v[j].cross(v[(j + 1) % n])).sum::<f64>().abs() / 2.0
}

fn bbox(v: &[Vec2]) -> (Vec2, Vec2) {
    let lo = Vec2::new(
        v.iter().map(|p| p.x).fold(f64::INFINITY, f64::min),
        v.iter().map(|p| p.y).fold(f64::INFINITY, f64::min),
    );
    let hi = Vec2::new(
        v.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max),
        v.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max),
    );
    (lo, hi)
}

fn inside_triangle(v: &[Vec2; 3], q: Vec2) -> bool {
    let s = |a: Vec2, b: Vec2| (b - a).cross(q - a);
    let (d0, d1, d2) = (s(v[0], v[1]), s(v[1], v[2]), s(v[2], v[0]));
    (d0 > 0.0 && d1 > 0.0 && d2 > 0.0) || (d0 < 0.0 && d1 < 0.0 && d2 < 0.0)
}

fn triangle_spec(name: &str, lines: [(f64, f64); 3], n: usize, m: usize, params: &BTreeMap<String, f64>, starts_region: [Vec2; 3]) -> Result<ScenarioSpec> {
    let base = BoundaryExpr::product(lines.iter().map(|&(phi, d)| BoundaryExpr::line(phi, d)).collect())?;
    let vertices = triangle_vertices(&lines)?;
    let mut spec = base_spec(name, base, n, params);
    let (lo, hi) = bbox(&starts_region);
    spec.starts = grid_starts(lo, hi, m, |q| inside_triangle(&starts_region, q));
    if spec.starts.len() != m {
        return Err(Error::InvalidSpec(format!("could not place {m} starts inside the triangle")));
    }
    spec.order_hint = None;
    spec.region_area = Some(polygon_area(&vertices));
    Ok(spec)
}

fn triangle_equilateral(n: usize, m: usize, params: &BTreeMap<String, f64>) -> Result<ScenarioSpec> {
    let side = p(params, "side");
    let inradius = side * 3f64.sqrt() / 6.0;
    let lines = [(-FRAC_PI_2, inradius), (5.0 * PI / 6.0, inradius), (PI / 6.0, inradius)];
    let v = triangle_vertices(&lines)?;
    // Bottom third: the incentre and the two vertices of the side y = -inradius.
    let mut bottom: Vec<Vec2> = v.iter().copied().filter(|q| q.y < 0.0).collect();
    bottom.sort_by(|a, b| a.x.total_cmp(&b.x));
    let third = [Vec2::ZERO, bottom[0], bottom[1]];
    let mut spec = triangle_spec("triangle_equilateral", lines, n, m, params, third)?;
    spec.symmetry = Symmetry::TriangleThird;
    spec.symmetry_reduced = true;
    Ok(spec)
}

fn triangle_general(n: usize, m: usize, params: &BTreeMap<String, f64>) -> Result<ScenarioSpec> {
    let lines = [
        (p(params, "phi1"), p(params, "delta1")),
        (p(params, "phi2"), p(params, "delta2")),
        (p(params, "phi3"), p(params, "delta3")),
    ];
    let v = triangle_vertices(&lines)?;
    if !inside_triangle(&v, Vec2::ZERO) {
        return Err(Error::InvalidSpec("the origin must lie inside the triangle".into()));
    }
    triangle_spec("triangle_general", lines, n, m, params, v)
}

fn sector(n: usize, m: usize, params: &BTreeMap<String, f64>) -> Result<ScenarioSpec> {
    let (phi1, phi2, r) = (p(params, "phi1"), p(params, "phi2"), p(params, "radius"));
    let opening = phi2 - phi1;
    if !(opening > 0.0 && opening < PI) {
        return Err(Error::InvalidSpec(format!(
            "sector opening phi2 - phi1 must lie in (0, pi), got {opening}"
        )));
    }
    let base = BoundaryExpr::product(vec![
        BoundaryExpr::line(phi1, 0.0),
        BoundaryExpr::line(phi2, 0.0),
        BoundaryExpr::circle(Vec2::ZERO, r)?,
    ])?;
    let mut spec = base_spec("sector", base, n, params);
    // The straight edges point along phi1 - pi/2 and phi2 - pi/2 = a0 + opening.
    let a0 = phi1 - FRAC_PI_2;
    let mut corners = vec![Vec2::ZERO];
    let steps = 32;
    corners.extend((0..=steps).map(|j| Vec2::from_angle(a0 + opening * j as f64 / steps as f64) * r));
    let (lo, hi) = bbox(&corners);
    let inside = |q: Vec2| {
        let ang = (q.y.atan2(q.x) - a0).rem_euclid(TAU);
        q.norm() < r && ang > 0.0 && ang < opening
    };
    spec.starts = grid_starts(lo, hi, m, inside);
    if spec.starts.len() != m {
        return Err(Error::InvalidSpec(format!("could not place {m} starts inside the sector")));
    }
    spec.order_hint = None;
    spec.region_area = Some(opening * r * r / 2.0);
    Ok(spec)
}

fn square_side(name: &str, m: usize) -> Result<usize> {
    let side = (m as f64).sqrt().round() as usize;
    if side * side != m {
        return Err(Error::InvalidSpec(format!("{name} needs M = m^2, got M = {m}")));
    }
    Ok(side)
}

fn opaque_base(name: &str, n: usize, params: &BTreeMap<String, f64>) -> ScenarioSpec {
    let mut spec = base_spec(name, BoundaryExpr::line(0.0, 0.0), n, params);
    spec.mode = Mode::Opaque;
    spec.family = Family::LinesThroughStarts;
    spec.order_hint = None;
    spec
}

fn opaque_square(n: usize, m: usize, params: &BTreeMap<String, f64>) -> Result<ScenarioSpec> {
    let side = p(params, "side");
    let g = square_side("opaque_square", m)?;
    let mut spec = opaque_base("opaque_square", n, params);
    spec.starts = (0..g)
        .flat_map(|u| (0..g).map(move |v| (u, v)))
        .map(|(u, v)| Vec2::new(side * u as f64 / g as f64, side * v as f64 / g as f64))
        .collect();
    spec.region_area = Some(side * side);
    Ok(spec)
}

fn opaque_circle(n: usize, m: usize, params: &BTreeMap<String, f64>) -> Result<ScenarioSpec> {
    let r = p(params, "radius");
    let g = square_side("opaque_circle", m)?;
    let mut spec = opaque_base("opaque_circle", n, params);
    spec.starts = (0..g)
        .flat_map(|u| (0..g).map(move |v| (u, v)))
        .map(|(u, v)| Vec2::from_angle(TAU * v as f64 / g as f64) * (r * (u as f64 / g as f64).sqrt()))
        .collect();
    spec.region_area = Some(PI * r * r);
    Ok(spec)
}

fn opaque_circle_tangent(n: usize, m: usize, params: &BTreeMap<String, f64>) -> Result<ScenarioSpec> {
    require_single_start("opaque_circle_tangent", m)?;
    let r = p(params, "radius");
    let mut spec = base_spec("opaque_circle_tangent", BoundaryExpr::line(0.0, r), n, params);
    spec.mode = Mode::Opaque;
    spec.region_area = Some(PI * r * r);
    Ok(spec)
}

fn opaque_ellipse(n: usize, m: usize, params: &BTreeMap<String, f64>) -> Result<ScenarioSpec> {
    require_single_start("opaque_ellipse", m)?;
    let (phase, a, b) = (p(params, "phi"), p(params, "semi_x"), p(params, "semi_y"));
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::InvalidSpec("ellipse semi-axes must be positive".into()));
    }
    let mut spec = opaque_base("opaque_ellipse", n, params);
    spec.family = Family::EllipseTangents {
        semi_x: a,
        semi_y: b,
        phase,
    };
    spec.order_hint = Some(natural_hint(n));
    spec.region_area = Some(PI * a * b);
    Ok(spec)
}

fn plane3d(n: usize, m: usize, params: &BTreeMap<String, f64>) -> Result<ScenarioSpec> {
    let r = p(params, "radius");
    let mut spec = base_spec("plane3d", BoundaryExpr::plane3(Vec3::new(0.0, 0.0, 1.0), r)?, n, params);
    spec.mode = Mode::Plane3d;
    spec.family = Family::SphereTangentPlanes;
    spec.starts = vec![Vec2::ZERO; m];
    spec.order_hint = None;
    Ok(spec)
}

/// Whether the solver should follow the catalog order or search for one.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderChoice {
    #[default]
    Hint,
    Search,
}

/// On-disk scenario description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(rename = "N", default)]
    pub n: Option<usize>,
    #[serde(rename = "M", default)]
    pub m: Option<usize>,
    #[serde(default)]
    pub mode: Option<Mode>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub order: OrderChoice,
    #[serde(default)]
    pub angle_range: Option<f64>,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_spec(&self, catalog: &Catalog) -> Result<ScenarioSpec> {
        let entry = catalog.get(&self.name)?;
        let n = self.n.unwrap_or(entry.default_n);
        let m = self.m.unwrap_or(entry.default_m);
        let mut spec = entry.spec(n, m, &self.params)?;
        if let Some(mode) = self.mode {
            let compatible = matches!(
                (spec.mode, mode),
                (Mode::EscapeOpen | Mode::EscapeClosed, Mode::EscapeOpen | Mode::EscapeClosed)
            ) || spec.mode == mode;
            if !compatible {
                return Err(Error::InvalidSpec(format!(
                    "scenario {} cannot run in mode {}",
                    self.name,
                    mode.as_str()
                )));
            }
            spec.mode = mode;
        }
        if let Some(range) = self.angle_range {
            spec.angle_range = range;
        }
        if self.order == OrderChoice::Search {
            spec.order_hint = None;
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// Open Weak Form I instance from catalog defaults, for quick use.
pub fn catalog_instance(name: &str, n: usize) -> Result<Instance> {
    let catalog = Catalog::standard();
    let entry = catalog.get(name)?;
    build_instance(&entry.spec(n, entry.default_m, &BTreeMap::new())?)
}

/// Distinct start points of a spec (used by tests and reports).
pub fn distinct_starts(spec: &ScenarioSpec) -> usize {
    spec.starts
        .iter()
        .map(|s| (s.x.to_bits(), s.y.to_bits()))
        .collect::<BTreeSet<_>>()
        .len()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_overrides() -> BTreeMap<String, f64> {
        BTreeMap::new()
    }

    fn line_parts(b: &BoundaryExpr) -> (f64, f64) {
        match b {
            BoundaryExpr::Line { angle, offset } => (*angle, *offset),
            other => panic!("expected a line, got {other:?}"),
        }
    }

    fn same_zero_set_line(b: &BoundaryExpr, normal: Vec2, offset: f64) {
        let (a, d) = line_parts(b);
        let n = Vec2::from_angle(a);
        let sign = n.dot(normal).signum();
        assert!((n * sign - normal).norm() < 1e-12, "normal {n} vs {normal}");
        assert!((d * sign - offset).abs() < 1e-12, "offset {d} vs {offset}");
    }

    #[test]
    fn halfplane_n4_gives_four_axis_lines() {
        let inst = catalog_instance("halfplane_unit", 4).unwrap();
        let expected = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)];
        for (b, (x, y)) in inst.boundaries.iter().zip(expected) {
            same_zero_set_line(b, Vec2::new(x, y), 1.0);
        }
        assert_eq!(inst.anchor, Some(Vec3::ZERO));
    }

    #[test]
    fn single_orientation_is_untransformed() {
        let cat = Catalog::standard();
        let spec = cat.spec("circle_exterior", 1, 1, &no_overrides()).unwrap();
        let inst = build_instance(&spec).unwrap();
        assert_eq!(inst.boundaries, vec![spec.base_boundary.clone()]);
    }

    #[test]
    fn circle_exterior_rotates_centre() {
        let inst = catalog_instance("circle_exterior", 8).unwrap();
        match &inst.boundaries[2] {
            BoundaryExpr::Circle { center, radius } => {
                assert!(center.x.abs() < 1e-15 && (center.y - 1.0).abs() < 1e-15);
                assert_eq!(*radius, 0.5);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn weak_form_1_rejects_several_starts() {
        let cat = Catalog::standard();
        let spec = cat.spec("strip_wf2", 4, 3, &no_overrides()).unwrap();
        assert!(matches!(build_weak_form_1(&spec), Err(Error::WrongForm { found: 3, .. })));
    }

    #[test]
    fn weak_form_2_with_one_start_matches_weak_form_1() {
        let cat = Catalog::standard();
        for name in ["halfplane_unit", "circle_exterior", "point_unit", "strip_middle_product"] {
            let spec = cat.spec(name, 8, 1, &no_overrides()).unwrap();
            let a = build_weak_form_1(&spec).unwrap();
            let b = build_weak_form_2(&spec).unwrap();
            assert_eq!(a.boundaries.len(), b.boundaries.len());
            for (x, y) in a.boundaries.iter().zip(&b.boundaries) {
                for t in [Vec3::new(0.3, -0.7, 0.0), Vec3::new(-2.0, 1.0, 0.0)] {
                    assert!((x.eval_at(t) - y.eval_at(t)).abs() < 1e-12, "{name}");
                }
            }
        }
    }

    #[test]
    fn strip_wf2_boundaries_follow_offset_formula() {
        let cat = Catalog::standard();
        let spec = cat.spec("strip_wf2", 2, 2, &no_overrides()).unwrap();
        let inst = build_instance(&spec).unwrap();
        assert_eq!(inst.boundaries.len(), 4);
        for (h, b) in inst.boundaries.iter().enumerate() {
            let (k, i) = (h / 2, h % 2);
            let c = k as f64 / 4.0;
            let a = TAU * i as f64 / 2.0;
            let BoundaryExpr::Product { factors } = b else { panic!("product expected") };
            assert_eq!(factors.len(), 2);
            // Zero set of [n.p + c][n.p + c - 1].
            for t in [0.0, 0.4, -1.3] {
                let n = Vec2::from_angle(a);
                let along = n.perp() * t;
                for level in [-c, 1.0 - c] {
                    let q = (n * level + along).extend(0.0);
                    assert!(b.scaled_residual_at(q) < 1e-12);
                }
            }
        }
    }

    #[test]
    fn circle_wf2_first_boundary() {
        let cat = Catalog::standard();
        let spec = cat.spec("circle_wf2", 4, 1, &no_overrides()).unwrap();
        let inst = build_weak_form_2(&spec).unwrap();
        match &inst.boundaries[0] {
            BoundaryExpr::Circle { center, radius } => {
                assert!((center.x + 1.0).abs() < 1e-15 && center.y.abs() < 1e-15);
                assert_eq!(*radius, 1.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn opaque_examples() {
        let cat = Catalog::standard();
        let sq = build_instance(&cat.spec("opaque_square", 2, 1, &no_overrides()).unwrap()).unwrap();
        assert_eq!(sq.boundaries.len(), 2);
        assert!(sq.anchor.is_none());
        for b in &sq.boundaries {
            assert!(b.eval_at(Vec3::ZERO).abs() < 1e-15);
        }
        let circ = build_instance(&cat.spec("opaque_circle_tangent", 4, 1, &no_overrides()).unwrap()).unwrap();
        let expected = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)];
        for (b, (x, y)) in circ.boundaries.iter().zip(expected) {
            same_zero_set_line(b, Vec2::new(x, y), 1.0);
        }
        let ell = build_instance(&cat.spec("opaque_ellipse", 8, 1, &no_overrides()).unwrap()).unwrap();
        for (i, b) in ell.boundaries.iter().enumerate() {
            let psi = TAU * i as f64 / 8.0;
            // Tangent point of x cos psi + 2 y sin psi = 1.
            let t = Vec3::new(psi.cos(), psi.sin() / 2.0, 0.0);
            assert!(b.eval_at(t).abs() < 1e-12);
        }
    }

    #[test]
    fn opaque_square_needs_square_m() {
        let cat = Catalog::standard();
        assert!(cat.spec("opaque_square", 2, 3, &no_overrides()).is_err());
    }

    #[test]
    fn plane3d_examples() {
        let cat = Catalog::standard();
        let one = build_instance(&cat.spec("plane3d", 1, 5, &no_overrides()).unwrap()).unwrap();
        for b in &one.boundaries {
            assert_eq!(b.eval_at(Vec3::new(0.3, 0.2, 1.0)), 0.0);
        }
        let two = build_instance(&cat.spec("plane3d", 2, 1, &no_overrides()).unwrap()).unwrap();
        // k = M = 1 gives azimuth 2 pi: the i = 1 plane is x = 1.
        assert!(two.boundaries[1].eval_at(Vec3::new(1.0, 5.0, -3.0)).abs() < 1e-12);
        let many = build_instance(&cat.spec("plane3d", 8, 8, &no_overrides()).unwrap()).unwrap();
        assert_eq!(many.boundaries.len(), 64);
        for b in &many.boundaries {
            assert!((b.distance_at(Vec3::ZERO) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn strip_symmetry_folds_and_dedupes() {
        let cat = Catalog::standard();
        let mut spec = cat.spec("strip_wf2", 4, 1, &no_overrides()).unwrap();
        spec.starts = vec![Vec2::new(0.1, 0.0), Vec2::new(0.7, 0.0), Vec2::new(0.9, 0.0)];
        let reduced = symmetry_reduce(&spec);
        assert_eq!(reduced.starts.len(), 2);
        assert!((reduced.starts[0].x - 0.1).abs() < 1e-15);
        assert!((reduced.starts[1].x - 0.3).abs() < 1e-12);
        assert!(reduced.symmetry_reduced);
    }

    #[test]
    fn circle_symmetry_moves_starts_onto_ray() {
        let cat = Catalog::standard();
        let mut spec = cat.spec("circle_wf2", 4, 2, &no_overrides()).unwrap();
        spec.starts = vec![Vec2::new(0.0, 0.5), Vec2::new(-0.5, 0.0), Vec2::new(0.3, 0.4)];
        let reduced = symmetry_reduce(&spec);
        assert_eq!(reduced.starts.len(), 1);
        assert!(reduced.starts.iter().all(|s| s.y == 0.0 && s.x >= 0.0));
    }

    #[test]
    fn triangle_symmetry_lands_in_bottom_third() {
        let cat = Catalog::standard();
        let mut spec = cat.spec("triangle_equilateral", 4, 3, &no_overrides()).unwrap();
        spec.starts = vec![Vec2::new(0.0, 0.2), Vec2::new(0.1, 0.05), Vec2::new(0.0, -0.1)];
        let reduced = symmetry_reduce(&spec);
        assert!(reduced.starts.iter().all(|&s| in_bottom_third(s)));
    }

    #[test]
    fn unknown_symmetry_is_a_noop() {
        let cat = Catalog::standard();
        let spec = cat.spec("halfplane_unit", 4, 1, &no_overrides()).unwrap();
        assert_eq!(symmetry_reduce(&spec), spec);
    }

    #[test]
    fn equilateral_starts_lie_in_bottom_third() {
        let cat = Catalog::standard();
        let spec = cat.spec("triangle_equilateral", 12, 6, &no_overrides()).unwrap();
        assert_eq!(spec.starts.len(), 6);
        for s in &spec.starts {
            assert!(in_bottom_third(*s));
            assert!(s.y > -3f64.sqrt() / 6.0);
        }
        assert!((spec.region_area.unwrap() - 3f64.sqrt() / 4.0).abs() < 1e-12);
    }

    #[test]
    fn triangle_general_area_and_starts() {
        let cat = Catalog::standard();
        let spec = cat.spec("triangle_general", 6, 5, &no_overrides()).unwrap();
        assert!((spec.region_area.unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(spec.starts.len(), 5);
        let inst = build_instance(&spec).unwrap();
        assert_eq!(inst.boundaries.len(), 30);
    }

    #[test]
    fn sector_area() {
        let cat = Catalog::standard();
        let spec = cat.spec("sector", 6, 4, &no_overrides()).unwrap();
        assert!((spec.region_area.unwrap() - PI / 6.0).abs() < 1e-12);
        assert_eq!(spec.starts.len(), 4);
    }

    #[test]
    fn generated_boundaries_keep_start_distance() {
        let cat = Catalog::standard();
        for name in ["strip_wf2", "circle_wf2", "triangle_equilateral", "sector", "triangle_general"] {
            let entry = cat.get(name).unwrap();
            let spec = entry.spec(6, 3, &no_overrides()).unwrap();
            let inst = build_instance(&spec).unwrap();
            for (h, b) in inst.boundaries.iter().enumerate() {
                let s = spec.starts[inst.labels[h].k].extend(0.0);
                let base_dist = spec.base_boundary.distance_at(s);
                let moved = b.distance_at(Vec3::ZERO);
                assert!((base_dist - moved).abs() < 1e-12, "{name} h={h}");
            }
        }
    }

    #[test]
    fn orientation_sets_nest() {
        let cat = Catalog::standard();
        for name in ["halfplane_unit", "point_unit", "strip_middle"] {
            let coarse = catalog_instance(name, 45).unwrap();
            let fine = catalog_instance(name, 90).unwrap();
            for (i, b) in coarse.boundaries.iter().enumerate() {
                let twin = &fine.boundaries[2 * i];
                for t in [Vec3::new(0.2, 0.9, 0.0), Vec3::new(-1.5, 0.4, 0.0)] {
                    assert!((b.eval_at(t) - twin.eval_at(t)).abs() < 1e-12, "{name}");
                }
            }
        }
        let _ = cat;
    }

    #[test]
    fn interleaved_hints() {
        assert_eq!(interleaved_half_hint(6).unwrap().perm(), &[0, 3, 1, 4, 2, 5]);
        assert_eq!(interleaved_quarter_hint(8).unwrap().perm(), &[0, 6, 1, 7, 2, 3, 4, 5]);
        assert!(interleaved_quarter_hint(6).is_err());
    }

    #[test]
    fn config_round_trip_and_unknown_keys() {
        let cfg = ScenarioConfig::from_json(
            r#"{"name": "strip_wf2", "N": 4, "M": 3, "mode": "escape_open", "params": {"width": 2.0}, "order": "search"}"#,
        )
        .unwrap();
        let spec = cfg.to_spec(&Catalog::standard()).unwrap();
        assert_eq!((spec.n_orientations, spec.m()), (4, 3));
        assert_eq!(spec.params["width"], 2.0);
        let back = ScenarioConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert!(ScenarioConfig::from_json(r#"{"name": "x", "bogus": 1}"#).is_err());
        let bad_param = ScenarioConfig::from_json(r#"{"name": "point_unit", "params": {"nope": 1}}"#).unwrap();
        assert!(bad_param.to_spec(&Catalog::standard()).is_err());
        let bad_mode = ScenarioConfig::from_json(r#"{"name": "point_unit", "mode": "opaque"}"#).unwrap();
        assert!(bad_mode.to_spec(&Catalog::standard()).is_err());
    }

    #[test]
    fn spec_validation() {
        let cat = Catalog::standard();
        let mut spec = cat.spec("halfplane_unit", 4, 1, &no_overrides()).unwrap();
        spec.angle_range = 7.0;
        assert!(spec.validate().is_err());
        spec.angle_range = TAU;
        spec.params.insert("x".into(), f64::NAN);
        assert!(spec.validate().is_err());
        assert!(cat.spec("halfplane_unit", 0, 1, &no_overrides()).is_err());
    }

    #[test]
    fn swept_line_values() {
        let half = swept_line_length(1.0, TAU).unwrap();
        assert!((half - (7.0 * PI / 6.0 + 1.0 + 3f64.sqrt())).abs() < 1e-15);
        let strip = swept_line_length(0.5, PI).unwrap();
        assert!((strip - 1.6278248).abs() < 1e-7);
        assert!(swept_line_length(1.0, 2.0).is_none());
    }
}
