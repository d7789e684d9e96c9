//! Implicit boundary primitives and the rigid motions that generate
//! boundary families.
//!
//! A boundary is the zero set of `F`. Products of primitives model
//! boundaries made of several pieces (a strip is the product of its two
//! edge lines): the product vanishes wherever any factor does.

use std::f64::consts::TAU;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use crate::error::{Error, Result};

/// Floor applied to gradient norms when scaling residuals.
pub const GRAD_FLOOR: f64 = 1e-8;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Unit vector at `angle` radians from the x axis.
    pub fn from_angle(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c, s)
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Counter-clockwise rotation about the origin.
    pub fn rotate(self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    /// Counter-clockwise perpendicular.
    pub fn perp(self) -> Self {
        Self::new(-self.y, self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn extend(self, z: f64) -> Vec3 {
        Vec3::new(self.x, self.y, z)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl fmt::Display for Vec2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn xy(self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self * (1.0 / n))
    }

    pub(crate) fn get(self, axis: usize) -> f64 {
        match axis {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }

    #[cfg(test)]
    pub(crate) fn get_mut(&mut self, axis: usize) -> &mut f64 {
        match axis {
            0 => &mut self.x,
            1 => &mut self.y,
            _ => &mut self.z,
        }
    }

    /// Lexicographic comparison by (x, y, z).
    pub(crate) fn lex_cmp(self, o: Vec3) -> std::cmp::Ordering {
        self.x
            .total_cmp(&o.x)
            .then(self.y.total_cmp(&o.y))
            .then(self.z.total_cmp(&o.z))
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl SubAssign for Vec3 {
    fn sub_assign(&mut self, o: Vec3) {
        *self = *self - o;
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl fmt::Display for Vec3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

/// A point of known dimension, used at the public boundary API where
/// dimension mismatches must be reported.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Point {
    Planar(Vec2),
    Spatial(Vec3),
}

impl Point {
    pub fn dim(self) -> usize {
        match self {
            Point::Planar(_) => 2,
            Point::Spatial(_) => 3,
        }
    }

    /// Planar points get `z = 0`.
    pub fn embed(self) -> Vec3 {
        match self {
            Point::Planar(p) => p.extend(0.0),
            Point::Spatial(p) => p,
        }
    }

    fn restrict(v: Vec3, dim: usize) -> Point {
        if dim == 2 {
            Point::Planar(v.xy())
        } else {
            Point::Spatial(v)
        }
    }

    pub fn as_planar(self) -> Option<Vec2> {
        match self {
            Point::Planar(p) => Some(p),
            Point::Spatial(_) => None,
        }
    }

    pub fn as_spatial(self) -> Option<Vec3> {
        match self {
            Point::Spatial(p) => Some(p),
            Point::Planar(_) => None,
        }
    }
}

impl From<Vec2> for Point {
    fn from(p: Vec2) -> Self {
        Point::Planar(p)
    }
}

impl From<Vec3> for Point {
    fn from(p: Vec3) -> Self {
        Point::Spatial(p)
    }
}

/// Rotation by `angle` about `center`, followed by `translation`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidMotion {
    center: Vec2,
    angle: f64,
    translation: Vec2,
}

impl RigidMotion {
    pub fn new(center: Vec2, angle: f64, translation: Vec2) -> Result<Self> {
        if !(center.is_finite() && angle.is_finite() && translation.is_finite()) {
            return Err(Error::InvalidInput("rigid motion must be finite".into()));
        }
        Ok(Self {
            center,
            angle: angle.rem_euclid(TAU),
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            center: Vec2::ZERO,
            angle: 0.0,
            translation: Vec2::ZERO,
        }
    }

    pub fn rotation(center: Vec2, angle: f64) -> Result<Self> {
        Self::new(center, angle, Vec2::ZERO)
    }

    pub fn translation(by: Vec2) -> Result<Self> {
        Self::new(Vec2::ZERO, 0.0, by)
    }

    pub fn center(&self) -> Vec2 {
        self.center
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }

    pub fn translation_part(&self) -> Vec2 {
        self.translation
    }

    pub fn apply(&self, p: Vec2) -> Vec2 {
        self.center + (p - self.center).rotate(self.angle) + self.translation
    }

    /// The motion undoing `self`: rotate back about the moved center, then
    /// shift by the opposite translation.
    pub fn inverse(&self) -> Self {
        let moved = self.center + self.translation;
        Self {
            center: moved,
            angle: (-self.angle).rem_euclid(TAU),
            translation: -self.translation,
        }
    }

    /// Rotates a direction vector (translations do not act on directions).
    pub fn apply_direction(&self, d: Vec2) -> Vec2 {
        d.rotate(self.angle)
    }
}

/// Implicit boundary `F = 0`.
#[derive(Clone, Debug, PartialEq)]
pub enum BoundaryExpr {
    /// `x cos(angle) + y sin(angle) - offset = 0`.
    Line { angle: f64, offset: f64 },
    /// `|p - center|^2 - radius^2 = 0`.
    Circle { center: Vec2, radius: f64 },
    /// `|p - target|^2 = 0`: a single point.
    PointTarget { target: Vec2 },
    /// Squared distance to the closed segment `[start, end]`.
    Segment { start: Vec2, end: Vec2 },
    /// Vanishes wherever any factor vanishes.
    Product { factors: Vec<BoundaryExpr> },
    /// `normal . p - offset = 0` with a unit normal.
    Plane3 { normal: Vec3, offset: f64 },
}

impl BoundaryExpr {
    pub fn line(angle: f64, offset: f64) -> Self {
        BoundaryExpr::Line { angle, offset }
    }

    pub fn circle(center: Vec2, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) || !center.is_finite() {
            return Err(Error::InvalidInput(format!(
                "circle radius must be positive and finite, got {radius}"
            )));
        }
        Ok(BoundaryExpr::Circle { center, radius })
    }

    pub fn point(target: Vec2) -> Self {
        BoundaryExpr::PointTarget { target }
    }

    pub fn segment(start: Vec2, end: Vec2) -> Result<Self> {
        if !(start.is_finite() && end.is_finite()) {
            return Err(Error::InvalidInput("segment endpoints must be finite".into()));
        }
        Ok(BoundaryExpr::Segment { start, end })
    }

    pub fn product(factors: Vec<BoundaryExpr>) -> Result<Self> {
        if factors.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "product needs at least two factors, got {}",
                factors.len()
            )));
        }
        let dim = factors[0].dim();
        if factors.iter().any(|f| f.dim() != dim) {
            return Err(Error::InvalidInput("product mixes 2D and 3D factors".into()));
        }
        Ok(BoundaryExpr::Product { factors })
    }

    pub fn plane3(normal: Vec3, offset: f64) -> Result<Self> {
        if (normal.norm() - 1.0).abs() > 1e-12 || !offset.is_finite() {
            return Err(Error::InvalidInput(format!(
                "plane normal must have unit norm, got |n| = {}",
                normal.norm()
            )));
        }
        Ok(BoundaryExpr::Plane3 { normal, offset })
    }

    pub fn dim(&self) -> usize {
        match self {
            BoundaryExpr::Plane3 { .. } => 3,
            BoundaryExpr::Product { factors } => factors[0].dim(),
            _ => 2,
        }
    }

    /// Leaf factors of (possibly nested) products, in order. A non-product
    /// boundary is its own single factor.
    pub fn factors(&self) -> Vec<&BoundaryExpr> {
        let mut out = Vec::new();
        self.collect_factors(&mut out);
        out
    }

    fn collect_factors<'a>(&'a self, out: &mut Vec<&'a BoundaryExpr>) {
        match self {
            BoundaryExpr::Product { factors } => {
                for f in factors {
                    f.collect_factors(out);
                }
            }
            other => out.push(other),
        }
    }

    pub fn factor_count(&self) -> usize {
        match self {
            BoundaryExpr::Product { factors } => factors.iter().map(|f| f.factor_count()).sum(),
            _ => 1,
        }
    }

    fn check_dim(&self, p: Point) -> Result<Vec3> {
        if p.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: p.dim(),
            });
        }
        Ok(p.embed())
    }

    /// Residual `F(p)`.
    pub fn eval(&self, p: impl Into<Point>) -> Result<f64> {
        let p = self.check_dim(p.into())?;
        Ok(self.eval_at(p))
    }

    /// Gradient of `F` at `p`.
    pub fn grad(&self, p: impl Into<Point>) -> Result<Point> {
        let p = self.check_dim(p.into())?;
        self.grad_checked(p).map(|g| Point::restrict(g, self.dim()))
    }

    /// Nearest point of the zero set among the closed-form candidates.
    pub fn project(&self, p: impl Into<Point>) -> Result<Point> {
        let p = self.check_dim(p.into())?;
        Ok(Point::restrict(self.project_at(p), self.dim()))
    }

    /// `|F| / max(|grad F|, GRAD_FLOOR)`, a first-order distance estimate.
    pub fn scaled_residual(&self, p: impl Into<Point>) -> Result<f64> {
        let p = self.check_dim(p.into())?;
        Ok(self.scaled_residual_at(p))
    }

    /// Moves the zero set by `m`. Variants are preserved.
    pub fn apply_motion(&self, m: &RigidMotion) -> Result<BoundaryExpr> {
        Ok(match self {
            BoundaryExpr::Line { angle, offset } => {
                let normal = Vec2::from_angle(*angle);
                let moved_normal = m.apply_direction(normal);
                let foot = m.apply(normal * *offset);
                BoundaryExpr::Line {
                    angle: angle + m.angle(),
                    offset: moved_normal.dot(foot),
                }
            }
            BoundaryExpr::Circle { center, radius } => BoundaryExpr::Circle {
                center: m.apply(*center),
                radius: *radius,
            },
            BoundaryExpr::PointTarget { target } => BoundaryExpr::PointTarget {
                target: m.apply(*target),
            },
            BoundaryExpr::Segment { start, end } => BoundaryExpr::Segment {
                start: m.apply(*start),
                end: m.apply(*end),
            },
            BoundaryExpr::Product { factors } => BoundaryExpr::Product {
                factors: factors
                    .iter()
                    .map(|f| f.apply_motion(m))
                    .collect::<Result<_>>()?,
            },
            BoundaryExpr::Plane3 { .. } => return Err(Error::UnsupportedMotion),
        })
    }

    /// Uniform scaling about the origin. Zero sets scale with it.
    pub fn scaled(&self, s: f64) -> BoundaryExpr {
        match self {
            BoundaryExpr::Line { angle, offset } => BoundaryExpr::Line {
                angle: *angle,
                offset: offset * s,
            },
            BoundaryExpr::Circle { center, radius } => BoundaryExpr::Circle {
                center: *center * s,
                radius: radius * s,
            },
            BoundaryExpr::PointTarget { target } => BoundaryExpr::PointTarget {
                target: *target * s,
            },
            BoundaryExpr::Segment { start, end } => BoundaryExpr::Segment {
                start: *start * s,
                end: *end * s,
            },
            BoundaryExpr::Product { factors } => BoundaryExpr::Product {
                factors: factors.iter().map(|f| f.scaled(s)).collect(),
            },
            BoundaryExpr::Plane3 { normal, offset } => BoundaryExpr::Plane3 {
                normal: *normal,
                offset: offset * s,
            },
        }
    }

    // Unchecked variants on embedded coordinates. Planar variants ignore z.

    pub(crate) fn eval_at(&self, p: Vec3) -> f64 {
        match self {
            BoundaryExpr::Line { angle, offset } => {
                Vec2::from_angle(*angle).dot(p.xy()) - offset
            }
            BoundaryExpr::Circle { center, radius } => {
                (p.xy() - *center).norm_sq() - radius * radius
            }
            BoundaryExpr::PointTarget { target } => (p.xy() - *target).norm_sq(),
            BoundaryExpr::Segment { start, end } => {
                (p.xy() - closest_on_segment(*start, *end, p.xy())).norm_sq()
            }
            BoundaryExpr::Product { factors } => factors.iter().map(|f| f.eval_at(p)).product(),
            BoundaryExpr::Plane3 { normal, offset } => normal.dot(p) - offset,
        }
    }

    /// Gradient without the singular-point check.
    pub(crate) fn grad_at(&self, p: Vec3) -> Vec3 {
        match self {
            BoundaryExpr::Line { angle, .. } => Vec2::from_angle(*angle).extend(0.0),
            BoundaryExpr::Circle { center, .. } => ((p.xy() - *center) * 2.0).extend(0.0),
            BoundaryExpr::PointTarget { target } => ((p.xy() - *target) * 2.0).extend(0.0),
            BoundaryExpr::Segment { start, end } => {
                ((p.xy() - closest_on_segment(*start, *end, p.xy())) * 2.0).extend(0.0)
            }
            BoundaryExpr::Product { factors } => {
                let values: Vec<f64> = factors.iter().map(|f| f.eval_at(p)).collect();
                let mut g = Vec3::ZERO;
                for (j, f) in factors.iter().enumerate() {
                    let others: f64 = values
                        .iter()
                        .enumerate()
                        .filter(|&(k, _)| k != j)
                        .map(|(_, v)| v)
                        .product();
                    g += f.grad_at(p) * others;
                }
                g
            }
            BoundaryExpr::Plane3 { normal, .. } => *normal,
        }
    }

    fn grad_checked(&self, p: Vec3) -> Result<Vec3> {
        match self {
            BoundaryExpr::PointTarget { target } if p.xy() == *target => {
                Err(Error::SingularGradient(format!("point target {target}")))
            }
            BoundaryExpr::Product { factors } => {
                for f in factors {
                    f.grad_checked(p)?;
                }
                Ok(self.grad_at(p))
            }
            _ => Ok(self.grad_at(p)),
        }
    }

    pub(crate) fn scaled_residual_at(&self, p: Vec3) -> f64 {
        let f = self.eval_at(p);
        if f == 0.0 {
            return 0.0;
        }
        f.abs() / self.grad_at(p).norm().max(GRAD_FLOOR)
    }

    pub(crate) fn project_at(&self, p: Vec3) -> Vec3 {
        self.project_with_branch(p).0
    }

    /// Projection together with the index of the leaf factor that won.
    /// Ties go to the lowest factor index.
    pub(crate) fn project_with_branch(&self, p: Vec3) -> (Vec3, usize) {
        match self {
            BoundaryExpr::Product { .. } => {
                let candidates: Vec<(Vec3, f64)> = self
                    .factors()
                    .into_iter()
                    .map(|f| {
                        let q = f.project_at(p);
                        (q, (q - p).norm())
                    })
                    .collect();
                let nearest = candidates.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
                // Near-ties go to the lowest index so that rounding noise
                // cannot flip the choice.
                let cutoff = nearest * (1.0 + 1e-9) + 1e-12 * (1.0 + p.norm());
                let idx = candidates.iter().position(|c| c.1 <= cutoff).unwrap_or(0);
                (candidates[idx].0, idx)
            }
            BoundaryExpr::Line { angle, offset } => {
                let n = Vec2::from_angle(*angle);
                let q = p.xy() - n * (n.dot(p.xy()) - offset);
                (q.extend(p.z), 0)
            }
            BoundaryExpr::Circle { center, radius } => {
                let d = p.xy() - *center;
                let len = d.norm();
                let dir = if len > 0.0 { d * (1.0 / len) } else { Vec2::new(1.0, 0.0) };
                ((*center + dir * *radius).extend(p.z), 0)
            }
            BoundaryExpr::PointTarget { target } => (target.extend(p.z), 0),
            BoundaryExpr::Segment { start, end } => {
                (closest_on_segment(*start, *end, p.xy()).extend(p.z), 0)
            }
            BoundaryExpr::Plane3 { normal, offset } => (p - *normal * (normal.dot(p) - offset), 0),
        }
    }

    /// Euclidean distance from `p` to the zero set.
    pub(crate) fn distance_at(&self, p: Vec3) -> f64 {
        (self.project_at(p) - p).norm()
    }
}

impl fmt::Display for BoundaryExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryExpr::Line { angle, offset } => write!(f, "line({angle:.16e}, {offset:.16e})"),
            BoundaryExpr::Circle { center, radius } => write!(
                f,
                "circle({:.16e}, {:.16e}, {radius:.16e})",
                center.x, center.y
            ),
            BoundaryExpr::PointTarget { target } => {
                write!(f, "point({:.16e}, {:.16e})", target.x, target.y)
            }
            BoundaryExpr::Segment { start, end } => write!(
                f,
                "segment({:.16e}, {:.16e}, {:.16e}, {:.16e})",
                start.x, start.y, end.x, end.y
            ),
            BoundaryExpr::Product { factors } => {
                write!(f, "product(")?;
                for (i, factor) in factors.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{factor}")?;
                }
                write!(f, ")")
            }
            BoundaryExpr::Plane3 { normal, offset } => write!(
                f,
                "plane({:.16e}, {:.16e}, {:.16e}, {offset:.16e})",
                normal.x, normal.y, normal.z
            ),
        }
    }
}

impl std::str::FromStr for BoundaryExpr {
    type Err = Error;

    /// Parses the prefix form written by `Display`.
    fn from_str(text: &str) -> Result<Self> {
        let mut parser = ExprParser { text, pos: 0 };
        let expr = parser.expr()?;
        parser.skip_ws();
        if parser.pos != text.len() {
            return Err(parser.error("trailing input"));
        }
        Ok(expr)
    }
}

struct ExprParser<'a> {
    text: &'a str,
    pos: usize,
}

impl ExprParser<'_> {
    fn error(&self, what: &str) -> Error {
        Error::Parse(format!("{what} at byte {} of boundary expression", self.pos))
    }

    fn skip_ws(&mut self) {
        let rest = &self.text[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn eat(&mut self, c: char) -> Result<()> {
        self.skip_ws();
        if self.text[self.pos..].starts_with(c) {
            self.pos += c.len_utf8();
            Ok(())
        } else {
            Err(self.error(&format!("expected '{c}'")))
        }
    }

    fn ident(&mut self) -> &str {
        self.skip_ws();
        let rest = &self.text[self.pos..];
        let len = rest.find(|c: char| !c.is_ascii_alphanumeric()).unwrap_or(rest.len());
        self.pos += len;
        &rest[..len]
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let rest = &self.text[self.pos..];
        let len = rest.find([',', ')', ' ']).unwrap_or(rest.len());
        let value = rest[..len].parse::<f64>().map_err(|_| self.error("expected a number"))?;
        self.pos += len;
        Ok(value)
    }

    fn numbers(&mut self, count: usize) -> Result<Vec<f64>> {
        self.eat('(')?;
        let mut out = Vec::with_capacity(count);
        for j in 0..count {
            if j > 0 {
                self.eat(',')?;
            }
            out.push(self.number()?);
        }
        self.eat(')')?;
        Ok(out)
    }

    fn expr(&mut self) -> Result<BoundaryExpr> {
        let name = self.ident().to_string();
        match name.as_str() {
            "line" => {
                let v = self.numbers(2)?;
                Ok(BoundaryExpr::line(v[0], v[1]))
            }
            "circle" => {
                let v = self.numbers(3)?;
                BoundaryExpr::circle(Vec2::new(v[0], v[1]), v[2])
            }
            "point" => {
                let v = self.numbers(2)?;
                Ok(BoundaryExpr::point(Vec2::new(v[0], v[1])))
            }
            "segment" => {
                let v = self.numbers(4)?;
                BoundaryExpr::segment(Vec2::new(v[0], v[1]), Vec2::new(v[2], v[3]))
            }
            "plane" => {
                let v = self.numbers(4)?;
                BoundaryExpr::plane3(Vec3::new(v[0], v[1], v[2]), v[3])
            }
            "product" => {
                self.eat('(')?;
                let mut factors = vec![self.expr()?];
                loop {
                    self.skip_ws();
                    if self.text[self.pos..].starts_with(')') {
                        self.pos += 1;
                        break;
                    }
                    self.eat(',')?;
                    factors.push(self.expr()?);
                }
                BoundaryExpr::product(factors)
            }
            _ => Err(self.error(&format!("unknown boundary kind '{name}'"))),
        }
    }
}

pub(crate) fn closest_on_segment(a: Vec2, b: Vec2, p: Vec2) -> Vec2 {
    let ab = b - a;
    let len_sq = ab.norm_sq();
    if len_sq == 0.0 {
        return a;
    }
    let t = ((p - a).dot(ab) / len_sq).clamp(0.0, 1.0);
    a + ab * t
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn p2(x: f64, y: f64) -> Vec2 {
        Vec2::new(x, y)
    }

    #[test]
    fn eval_examples() {
        assert_eq!(BoundaryExpr::line(0.0, 1.0).eval(p2(1.0, 0.0)).unwrap(), 0.0);
        let c = BoundaryExpr::circle(p2(1.0, 0.0), 0.5).unwrap();
        assert_eq!(c.eval(p2(0.5, 0.0)).unwrap(), 0.0);
        let prod =
            BoundaryExpr::product(vec![BoundaryExpr::line(0.0, 1.0), BoundaryExpr::line(PI, 1.0)])
                .unwrap();
        assert_eq!(prod.eval(p2(1.0, 0.0)).unwrap(), 0.0);
    }

    #[test]
    fn eval_rejects_dimension_mismatch() {
        let err = BoundaryExpr::line(0.0, 1.0).eval(Vec3::new(1.0, 0.0, 0.0));
        assert!(matches!(err, Err(Error::DimensionMismatch { expected: 2, found: 3 })));
        let plane = BoundaryExpr::plane3(Vec3::new(0.0, 0.0, 1.0), 1.0).unwrap();
        assert!(plane.eval(p2(0.0, 0.0)).is_err());
        assert_eq!(plane.eval(Vec3::new(3.0, -2.0, 1.0)).unwrap(), 0.0);
    }

    #[test]
    fn grad_examples() {
        let g = BoundaryExpr::line(0.0, 1.0).grad(p2(7.0, -3.0)).unwrap();
        assert_eq!(g, Point::Planar(p2(1.0, 0.0)));
        let c = BoundaryExpr::circle(Vec2::ZERO, 1.0).unwrap();
        assert_eq!(c.grad(p2(2.0, 0.0)).unwrap(), Point::Planar(p2(4.0, 0.0)));
        // (x - 1)(x - 2): derivative 2x - 3 = -3 at the origin.
        let prod = BoundaryExpr::product(vec![
            BoundaryExpr::line(0.0, 1.0),
            BoundaryExpr::line(0.0, 2.0),
        ])
        .unwrap();
        let g = prod.grad(p2(0.0, 0.0)).unwrap().as_planar().unwrap();
        assert!((g.x + 3.0).abs() < 1e-15 && g.y.abs() < 1e-15);
    }

    #[test]
    fn grad_of_point_target_is_singular_at_target() {
        let b = BoundaryExpr::point(p2(1.0, 0.0));
        assert!(matches!(b.grad(p2(1.0, 0.0)), Err(Error::SingularGradient(_))));
        assert!(b.grad(p2(1.0, 0.5)).is_ok());
        let prod = BoundaryExpr::product(vec![b, BoundaryExpr::line(0.0, 3.0)]).unwrap();
        assert!(prod.grad(p2(1.0, 0.0)).is_err());
    }

    #[test]
    fn project_examples() {
        let q = BoundaryExpr::line(0.0, 1.0).project(p2(0.0, 0.0)).unwrap();
        assert_eq!(q, Point::Planar(p2(1.0, 0.0)));
        let c = BoundaryExpr::circle(Vec2::ZERO, 1.0).unwrap();
        assert_eq!(c.project(p2(2.0, 0.0)).unwrap(), Point::Planar(p2(1.0, 0.0)));
        let prod = BoundaryExpr::product(vec![
            BoundaryExpr::line(PI / 2.0, 1.0),
            BoundaryExpr::line(-PI / 2.0, 1.0),
        ])
        .unwrap();
        let q = prod.project(p2(0.0, 0.9)).unwrap().as_planar().unwrap();
        assert!(q.x.abs() < 1e-15 && (q.y - 1.0).abs() < 1e-15);
    }

    #[test]
    fn point_target_projects_to_itself() {
        let b = BoundaryExpr::point(p2(0.3, -0.2));
        for p in [p2(0.0, 0.0), p2(10.0, 4.0), p2(0.3, -0.2)] {
            assert_eq!(b.project(p).unwrap(), Point::Planar(p2(0.3, -0.2)));
        }
    }

    #[test]
    fn segment_boundary() {
        let s = BoundaryExpr::segment(p2(0.5, 0.0), p2(1.0, 0.0)).unwrap();
        assert_eq!(s.eval(p2(0.7, 0.0)).unwrap(), 0.0);
        assert!((s.eval(p2(0.0, 0.0)).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(s.project(p2(0.7, 3.0)).unwrap(), Point::Planar(p2(0.7, 0.0)));
        assert!((s.scaled_residual(p2(0.7, 0.2)).unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn motion_examples() {
        let rot = RigidMotion::rotation(Vec2::ZERO, PI / 2.0).unwrap();
        match BoundaryExpr::line(0.0, 1.0).apply_motion(&rot).unwrap() {
            BoundaryExpr::Line { angle, offset } => {
                assert!((angle - PI / 2.0).abs() < 1e-15);
                assert!((offset - 1.0).abs() < 1e-15);
            }
            other => panic!("expected a line, got {other:?}"),
        }
        let half = RigidMotion::rotation(Vec2::ZERO, PI).unwrap();
        let c = BoundaryExpr::circle(p2(1.0, 0.0), 0.5).unwrap();
        match c.apply_motion(&half).unwrap() {
            BoundaryExpr::Circle { center, radius } => {
                assert!((center.x + 1.0).abs() < 1e-15 && center.y.abs() < 1e-15);
                assert_eq!(radius, 0.5);
            }
            other => panic!("expected a circle, got {other:?}"),
        }
        let plane = BoundaryExpr::plane3(Vec3::new(1.0, 0.0, 0.0), 1.0).unwrap();
        assert!(matches!(plane.apply_motion(&rot), Err(Error::UnsupportedMotion)));
    }

    #[test]
    fn identity_motion_is_fieldwise_identity() {
        let b = BoundaryExpr::product(vec![
            BoundaryExpr::line(0.3, 0.7),
            BoundaryExpr::circle(p2(0.1, -0.4), 2.0).unwrap(),
            BoundaryExpr::point(p2(3.0, 1.0)),
        ])
        .unwrap();
        let moved = b.apply_motion(&RigidMotion::identity()).unwrap();
        let (BoundaryExpr::Product { factors: a }, BoundaryExpr::Product { factors: m }) = (&b, &moved)
        else {
            panic!("product expected");
        };
        for (x, y) in a.iter().zip(m) {
            match (x, y) {
                (
                    BoundaryExpr::Line { angle: a0, offset: o0 },
                    BoundaryExpr::Line { angle: a1, offset: o1 },
                ) => assert!((a0 - a1).abs() <= 1e-15 && (o0 - o1).abs() <= 1e-15),
                (
                    BoundaryExpr::Circle { center: c0, radius: r0 },
                    BoundaryExpr::Circle { center: c1, radius: r1 },
                ) => assert!((*c0 - *c1).norm() <= 1e-15 && r0 == r1),
                (
                    BoundaryExpr::PointTarget { target: t0 },
                    BoundaryExpr::PointTarget { target: t1 },
                ) => assert!((*t0 - *t1).norm() <= 1e-15),
                _ => panic!("variant changed"),
            }
        }
    }

    #[test]
    fn constructors_enforce_invariants() {
        assert!(BoundaryExpr::circle(Vec2::ZERO, 0.0).is_err());
        assert!(BoundaryExpr::circle(Vec2::ZERO, -1.0).is_err());
        assert!(BoundaryExpr::product(vec![BoundaryExpr::line(0.0, 1.0)]).is_err());
        assert!(BoundaryExpr::plane3(Vec3::new(1.0, 1.0, 0.0), 1.0).is_err());
        assert!(RigidMotion::new(Vec2::ZERO, f64::NAN, Vec2::ZERO).is_err());
    }

    #[test]
    fn nested_products_flatten_into_leaf_factors() {
        let inner = BoundaryExpr::product(vec![
            BoundaryExpr::line(0.0, 1.0),
            BoundaryExpr::line(0.0, 2.0),
        ])
        .unwrap();
        let outer = BoundaryExpr::product(vec![inner, BoundaryExpr::line(0.0, 3.0)]).unwrap();
        assert_eq!(outer.factor_count(), 3);
        let (_, branch) = outer.project_with_branch(Vec3::new(2.9, 0.0, 0.0));
        assert_eq!(branch, 2);
    }
}
