use forest_escape::{BoundaryExpr, Point, RigidMotion, Vec2, Vec3};
use proptest::prelude::*;

fn vec2(range: f64) -> impl Strategy<Value = Vec2> {
    (-range..range, -range..range).prop_map(|(x, y)| Vec2::new(x, y))
}

fn smooth_boundary() -> impl Strategy<Value = BoundaryExpr> {
    prop_oneof![
        (-3.2f64..3.2, -2.0f64..2.0).prop_map(|(a, d)| BoundaryExpr::line(a, d)),
        (vec2(2.0), 0.2f64..2.0).prop_map(|(c, r)| BoundaryExpr::circle(c, r).unwrap()),
        vec2(2.0).prop_map(BoundaryExpr::point),
    ]
}

fn any_boundary() -> impl Strategy<Value = BoundaryExpr> {
    prop_oneof![
        3 => smooth_boundary(),
        1 => (vec2(2.0), vec2(2.0))
            .prop_filter("non-degenerate", |(a, b)| (*a - *b).norm() > 0.1)
            .prop_map(|(a, b)| BoundaryExpr::segment(a, b).unwrap()),
        1 => prop::collection::vec(smooth_boundary(), 2..4).prop_map(|f| BoundaryExpr::product(f).unwrap()),
    ]
}

fn planar(p: Vec2) -> Point {
    Point::Planar(p)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn text_form_round_trips(b in any_boundary()) {
        let parsed: BoundaryExpr = b.to_string().parse().unwrap();
        prop_assert_eq!(parsed, b);
    }

    #[test]
    fn plane_text_form_round_trips(x in -1.0f64..1.0, y in -1.0f64..1.0, z in 0.1f64..1.0, d in -2.0f64..2.0) {
        let b = BoundaryExpr::plane3(Vec3::new(x, y, z).normalized().unwrap(), d).unwrap();
        let parsed: BoundaryExpr = b.to_string().parse().unwrap();
        for p in [Vec3::new(0.3, -0.2, 0.9), Vec3::new(-1.0, 2.0, 0.0)] {
            prop_assert!((parsed.eval(p).unwrap() - b.eval(p).unwrap()).abs() < 1e-12);
        }
        prop_assert_eq!(parsed.dim(), 3);
    }

    #[test]
    fn gradient_matches_central_differences(b in smooth_boundary(), p in vec2(3.0)) {
        let g = b.grad(planar(p));
        prop_assume!(g.is_ok());
        let g = g.unwrap().embed();
        let h = 1e-6;
        let f = |q: Vec2| b.eval(planar(q)).unwrap();
        let fx = (f(p + Vec2::new(h, 0.0)) - f(p - Vec2::new(h, 0.0))) / (2.0 * h);
        let fy = (f(p + Vec2::new(0.0, h)) - f(p - Vec2::new(0.0, h))) / (2.0 * h);
        let scale = 1.0 + g.norm();
        prop_assert!((fx - g.x).abs() <= 1e-6 * scale, "x: fd {} vs {}", fx, g.x);
        prop_assert!((fy - g.y).abs() <= 1e-6 * scale, "y: fd {} vs {}", fy, g.y);
    }

    #[test]
    fn projection_lands_on_the_boundary_and_is_idempotent(b in any_boundary(), p in vec2(3.0)) {
        let q = b.project(planar(p)).unwrap();
        prop_assert!(b.scaled_residual(q).unwrap() <= 1e-10);
        let r = b.project(q).unwrap();
        prop_assert!((r.embed() - q.embed()).norm() <= 1e-9);
    }

    #[test]
    fn projection_is_no_farther_than_sampled_boundary_points(b in smooth_boundary(), p in vec2(3.0), s in vec2(3.0)) {
        let q = b.project(planar(p)).unwrap().embed();
        let on = b.project(planar(s)).unwrap().embed();
        let pe = p.extend(0.0);
        prop_assert!((q - pe).norm() <= (on - pe).norm() + 1e-9);
    }

    #[test]
    fn rigid_motion_preserves_values(
        b in any_boundary(),
        p in vec2(3.0),
        c in vec2(2.0),
        angle in -3.2f64..3.2,
        t in vec2(2.0),
    ) {
        let m = RigidMotion::new(c, angle, t).unwrap();
        let moved = b.apply_motion(&m).unwrap();
        let before = b.eval(planar(p)).unwrap();
        let after = moved.eval(planar(m.apply(p))).unwrap();
        prop_assert!((before - after).abs() <= 1e-9 * (1.0 + before.abs()));
        let back = moved.apply_motion(&m.inverse()).unwrap();
        prop_assert!((back.eval(planar(p)).unwrap() - before).abs() <= 1e-9 * (1.0 + before.abs()));
    }
}
