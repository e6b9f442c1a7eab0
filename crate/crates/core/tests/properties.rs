//! Property-based invariants.

use proptest::prelude::*;
use torus_bie::fpintegrals::{box_moments, QuadFormParams};
use torus_bie::geometry::{PatchGrid, PatchIndex, TorusShape};
use torus_bie::harness::{read_csv, write_csv, ConvergenceRow};
use torus_bie::operator::{binom, TargetClass};

proptest! {
    #[test]
    fn local_coords_invert_patch_map(p1 in 1usize..12, p2 in 1usize..12, i in 0usize..12, j in 0usize..12,
                                     t1 in -1.0f64..1.0, t2 in -1.0f64..1.0) {
        let grid = PatchGrid::new(p1, p2).unwrap();
        let patch = PatchIndex::new(i % p1, j % p2);
        let back = grid.local_coords(patch, grid.patch_to_global(patch, [t1, t2]));
        prop_assert!((back[0] - t1).abs() < 1e-13 && (back[1] - t2).abs() < 1e-13);
    }

    #[test]
    fn classification_is_monotone_in_distance(angle in 0.0f64..std::f64::consts::TAU, r in 0.0f64..6.0, dr in 0.0f64..1.0) {
        let rank = |c: TargetClass| match c {
            TargetClass::Near { .. } => 0,
            TargetClass::Intermediate { .. } => 1,
            TargetClass::Far { .. } => 2,
        };
        let at = |rad: f64| rank(TargetClass::from_local([rad * angle.cos(), rad * angle.sin()]));
        prop_assert!(at(r) <= at(r + dr));
    }

    #[test]
    fn binomial_recurrence(k in 1usize..20) {
        let ratio = binom(k) / binom(k - 1);
        prop_assert!((ratio - (-1.5 - k as f64 + 1.0) / k as f64).abs() < 1e-14);
    }

    #[test]
    fn torus_points_sit_on_the_tube(d1 in -0.6f64..0.6, d2 in 0.1f64..1.0, s1 in -4.0f64..4.0, s2 in -4.0f64..4.0) {
        let shape = TorusShape::new(d1, d2).unwrap();
        prop_assert!(shape.tube_offset(&shape.position([s1, s2])).abs() < 1e-12);
    }

    #[test]
    fn exterior_moments_are_symmetric_under_reflection(a in 0.4f64..1.2, b in 0.4f64..1.2, c in -0.8f64..0.8,
                                                       x0 in 1.7f64..2.5, y0 in -0.3f64..0.3) {
        // Reflecting x flips the sign of c and of x0, and multiplies moment (m, n) by (-1)^m.
        let p = QuadFormParams::new(a, b, c, x0 * a, y0 * b).unwrap();
        let q = QuadFormParams::new(a, b, -c, -x0 * a, y0 * b).unwrap();
        let u = box_moments(&p, 6, 6, 1).unwrap();
        let v = box_moments(&q, 6, 6, 1).unwrap();
        for m in 0..=6 {
            for n in 0..=6 {
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                let (x, y) = (u.get(m, n), sign * v.get(m, n));
                prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1e-300) + 1e-300, "{} {} {} {}", m, n, x, y);
            }
        }
    }

    #[test]
    fn csv_round_trip_is_bit_exact(p1 in 1usize..50, iters in 0usize..100, err in any::<f64>(), near in 0.0f64..1e4, total in 0.0f64..1e5) {
        prop_assume!(err.is_finite());
        let row = ConvergenceRow { p1, p2: 2 * p1, unknowns: 200 * p1 * p1, rel_l2_error: err,
                                   gmres_iters: iters, near_seconds: near, total_seconds: total };
        let mut buf = Vec::new();
        write_csv(&mut buf, std::slice::from_ref(&row)).unwrap();
        let back = read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back.len(), 1);
        prop_assert_eq!(back[0].rel_l2_error.to_bits(), err.to_bits());
        prop_assert_eq!(back[0].near_seconds.to_bits(), near.to_bits());
        prop_assert_eq!(&back[0], &row);
    }
}
