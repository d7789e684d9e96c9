//! Polyline objectives: open, closed and opaque (unanchored) escape paths.

use crate::error::{Error, Result};
use crate::geometry::{Vec2, Vec3};

/// Escape points in visit order.
///
/// An anchored polyline starts at `anchor`; a closed one also returns to it.
/// Opaque-set curves have no anchor, so their length counts only the legs
/// between consecutive points.
#[derive(Clone, Debug, PartialEq)]
pub struct Polyline {
    points: Vec<Vec3>,
    dim: usize,
    anchor: Option<Vec3>,
    closed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LengthReport {
    pub total: f64,
    pub per_leg: Vec<f64>,
}

impl Polyline {
    pub fn new(points: Vec<Vec3>, dim: usize, anchor: Option<Vec3>, closed: bool) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidInput(format!("dimension must be 2 or 3, got {dim}")));
        }
        if closed && anchor.is_none() {
            return Err(Error::InvalidInput("a closed polyline needs an anchor".into()));
        }
        for p in points.iter().chain(anchor.iter()) {
            if !p.is_finite() {
                return Err(Error::InvalidInput(format!("non-finite point {p}")));
            }
            if dim == 2 && p.z != 0.0 {
                return Err(Error::DimensionMismatch { expected: 2, found: 3 });
            }
        }
        Ok(Self {
            points,
            dim,
            anchor,
            closed,
        })
    }

    /// Planar polyline anchored at the origin (if `anchored`).
    pub fn planar(points: &[Vec2], anchored: bool, closed: bool) -> Result<Self> {
        Self::new(
            points.iter().map(|p| p.extend(0.0)).collect(),
            2,
            anchored.then_some(Vec3::ZERO),
            closed,
        )
    }

    /// Spatial polyline anchored at the origin (if `anchored`).
    pub fn spatial(points: &[Vec3], anchored: bool, closed: bool) -> Result<Self> {
        Self::new(points.to_vec(), 3, anchored.then_some(Vec3::ZERO), closed)
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn planar_points(&self) -> Vec<Vec2> {
        self.points.iter().map(|p| p.xy()).collect()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn anchor(&self) -> Option<Vec3> {
        self.anchor
    }

    pub fn is_anchored(&self) -> bool {
        self.anchor.is_some()
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Applies `f` to the anchor and every point.
    pub fn map_points(&self, f: impl Fn(Vec3) -> Vec3) -> Result<Polyline> {
        Polyline::new(
            self.points.iter().map(|&p| f(p)).collect(),
            self.dim,
            self.anchor.map(&f),
            self.closed,
        )
    }

    /// Vertices in traversal order, including the anchor at either end
    /// where it is part of the path.
    pub fn vertices(&self) -> Vec<Vec3> {
        let mut out = Vec::with_capacity(self.points.len() + 2);
        if let Some(a) = self.anchor {
            out.push(a);
        }
        out.extend_from_slice(&self.points);
        if let (true, Some(a)) = (self.closed, self.anchor) {
            if !self.points.is_empty() {
                out.push(a);
            }
        }
        out
    }

    pub fn length(&self) -> LengthReport {
        let verts = self.vertices();
        let per_leg: Vec<f64> = verts.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
        LengthReport {
            total: compensated_sum(&per_leg),
            per_leg,
        }
    }

    /// Gradient of the total length with respect to each point. Legs of
    /// zero length contribute nothing.
    pub fn grad_length(&self) -> Vec<Vec3> {
        let mut grad = vec![Vec3::ZERO; self.points.len()];
        accumulate_length_grad(self.anchor, &self.points, self.closed, &mut grad);
        grad
    }
}

/// Neumaier compensated summation.
pub(crate) fn compensated_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Length of the chain `anchor, points..., [anchor]`.
pub(crate) fn chain_length(anchor: Option<Vec3>, points: &[Vec3], closed: bool) -> f64 {
    let mut legs = Vec::with_capacity(points.len() + 1);
    if let (Some(a), Some(&first)) = (anchor, points.first()) {
        legs.push((first - a).norm());
    }
    for w in points.windows(2) {
        legs.push((w[1] - w[0]).norm());
    }
    if let (true, Some(a), Some(&last)) = (closed, anchor, points.last()) {
        legs.push((a - last).norm());
    }
    compensated_sum(&legs)
}

pub(crate) fn accumulate_length_grad(
    anchor: Option<Vec3>,
    points: &[Vec3],
    closed: bool,
    grad: &mut [Vec3],
) {
    let unit = |from: Vec3, to: Vec3| {
        let d = to - from;
        let n = d.norm();
        if n > 0.0 {
            d * (1.0 / n)
        } else {
            Vec3::ZERO
        }
    };
    let k = points.len();
    if k == 0 {
        return;
    }
    if let Some(a) = anchor {
        grad[0] += unit(a, points[0]);
        if closed {
            grad[k - 1] += unit(a, points[k - 1]);
        }
    }
    for i in 1..k {
        let u = unit(points[i - 1], points[i]);
        grad[i] += u;
        grad[i - 1] -= u;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::RigidMotion;
    use proptest::prelude::*;

    fn v(x: f64, y: f64) -> Vec2 {
        Vec2::new(x, y)
    }

    #[test]
    fn length_examples() {
        let one = Polyline::planar(&[v(1.0, 0.0)], true, false).unwrap();
        assert_eq!(one.length().total, 1.0);
        let two = Polyline::planar(&[v(1.0, 0.0), v(-1.0, 0.0)], true, false).unwrap();
        assert_eq!(two.length().total, 3.0);
        let closed = Polyline::planar(&[v(1.0, 0.0), v(-1.0, 0.0)], true, true).unwrap();
        assert_eq!(closed.length().total, 4.0);
        assert_eq!(closed.length().per_leg, vec![1.0, 2.0, 1.0]);
    }

    #[test]
    fn unanchored_and_empty() {
        let p = Polyline::planar(&[v(1.0, 0.0), v(-1.0, 0.0)], false, false).unwrap();
        assert_eq!(p.length().total, 2.0);
        let empty = Polyline::planar(&[], true, true).unwrap();
        assert_eq!(empty.length().total, 0.0);
        assert!(empty.length().per_leg.is_empty());
    }

    #[test]
    fn closed_requires_anchor() {
        assert!(Polyline::planar(&[v(1.0, 0.0)], false, true).is_err());
    }

    #[test]
    fn spatial_length() {
        let p = Polyline::spatial(&[Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.0, 1.0, 1.0)], true, false)
            .unwrap();
        assert_eq!(p.length().total, 2.0);
    }

    #[test]
    fn grad_examples() {
        let one = Polyline::planar(&[v(1.0, 0.0)], true, false).unwrap();
        assert_eq!(one.grad_length(), vec![Vec3::new(1.0, 0.0, 0.0)]);
        let two = Polyline::planar(&[v(1.0, 0.0), v(2.0, 0.0)], true, false).unwrap();
        let g = two.grad_length();
        assert_eq!(g[0], Vec3::ZERO);
        assert_eq!(g[1], Vec3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn coincident_points_have_zero_leg_contribution() {
        let p = Polyline::planar(&[v(1.0, 0.0), v(1.0, 0.0)], true, false).unwrap();
        let g = p.grad_length();
        assert_eq!(g[0], Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(g[1], Vec3::ZERO);
    }

    fn finite_difference(p: &Polyline, h: f64) -> Vec<Vec3> {
        let mut out = vec![Vec3::ZERO; p.len()];
        for i in 0..p.len() {
            for axis in 0..p.dim() {
                let shift = |s: f64| {
                    let mut pts = p.points().to_vec();
                    *pts[i].get_mut(axis) += s;
                    Polyline::new(pts, p.dim(), p.anchor(), p.is_closed())
                        .unwrap()
                        .length()
                        .total
                };
                *out[i].get_mut(axis) = (shift(h) - shift(-h)) / (2.0 * h);
            }
        }
        out
    }

    fn coords() -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 6)
    }

    proptest! {
        #[test]
        fn grad_matches_finite_differences(pts in coords(), closed in any::<bool>()) {
            let pts: Vec<Vec2> = pts.into_iter().map(|(x, y)| v(x, y)).collect();
            let p = Polyline::planar(&pts, true, closed).unwrap();
            let g = p.grad_length();
            let fd = finite_difference(&p, 1e-6);
            for (a, b) in g.iter().zip(&fd) {
                let err = (*a - *b).norm() / a.norm().max(1e-3);
                prop_assert!(err < 1e-6, "analytic {a} vs fd {b}");
            }
        }

        #[test]
        fn total_matches_leg_sum(pts in coords(), closed in any::<bool>()) {
            let pts: Vec<Vec2> = pts.into_iter().map(|(x, y)| v(x, y)).collect();
            let r = Polyline::planar(&pts, true, closed).unwrap().length();
            let naive: f64 = r.per_leg.iter().sum();
            prop_assert!((r.total - naive).abs() <= 1e-12);
            prop_assert!(r.total >= 0.0);
        }

        #[test]
        fn removing_interior_point_never_lengthens(pts in coords(), drop in 1usize..5) {
            let pts: Vec<Vec2> = pts.into_iter().map(|(x, y)| v(x, y)).collect();
            let full = Polyline::planar(&pts, true, false).unwrap().length().total;
            let mut fewer = pts.clone();
            fewer.remove(drop);
            let reduced = Polyline::planar(&fewer, true, false).unwrap().length().total;
            prop_assert!(reduced <= full + 1e-12);
        }

        #[test]
        fn rigid_motion_and_scaling(pts in coords(), angle in 0.0..std::f64::consts::TAU,
                                    tx in -3.0..3.0f64, ty in -3.0..3.0f64, s in 0.1..10.0f64) {
            let pts: Vec<Vec2> = pts.into_iter().map(|(x, y)| v(x, y)).collect();
            let p = Polyline::planar(&pts, true, true).unwrap();
            let base = p.length().total;
            let m = RigidMotion::new(v(0.3, -0.1), angle, v(tx, ty)).unwrap();
            let moved = p.map_points(|q| m.apply(q.xy()).extend(0.0)).unwrap();
            prop_assert!((moved.length().total - base).abs() <= 1e-12 * base.max(1.0) * 10.0);
            let scaled = p.map_points(|q| q * s).unwrap();
            prop_assert!((scaled.length().total - s * base).abs() <= 1e-12 * s * base.max(1.0) * 10.0);
        }
    }
}
