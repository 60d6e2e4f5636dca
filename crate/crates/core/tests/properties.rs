use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use relay_core::channel::SegmentModel;
use relay_core::cost::{CostKind, RelayCost, RelayProblem};
use relay_core::geometry::{Heights, Point2, Point3, PolarCoord};
use relay_core::harness::worlds::nested_world;
use relay_core::search::{length_bound, shaded_contour_search, Phase, SearchParams};
use relay_core::terrain::{
    generate_map, BlockSpec, NestedBoundaryField, SegmentId, SegmentOracle, UrbanMap,
};

fn heights() -> Heights {
    Heights::new(50.0, 45.0, 1.5).unwrap()
}

fn cost(kind: CostKind) -> RelayCost {
    RelayCost::from_dbm(kind, 33.0, 33.0, -80.0).unwrap()
}

/// Cost written out from the path-loss law, no library gain helpers.
fn hand_cost(
    model: &SegmentModel,
    k: usize,
    kind: CostKind,
    user: Point2,
    bs: Point2,
    x: Point2,
) -> f64 {
    let h = heights();
    let p = 10f64.powf((33.0 + 80.0) / 10.0);
    let du = ((x.x - user.x).powi(2) + (x.y - user.y).powi(2) + (h.uav - h.user).powi(2)).sqrt();
    let db = ((x.x - bs.x).powi(2) + (x.y - bs.y).powi(2) + (h.uav - h.bs).powi(2)).sqrt();
    let s = &model.segments[k - 1];
    let gu = 10f64.powf(s.log10_beta) * du.powf(-s.alpha);
    let gb = 10f64.powf(model.log10_beta0) * db.powf(-model.alpha0);
    match kind {
        CostKind::AfOutage => 1.0 / (p * gu) + 1.0 / (p * gb),
        CostKind::DfRate => (-(1.0 + p * gb).log2()).max(-(1.0 + p * gu).log2()),
    }
}

/// Sight line blocked: clip its ground trace to each footprint and compare
/// the line height where it enters (the lowest point, since it climbs) with
/// the roof.
fn clipped_blocked(map: &UrbanMap, a: Point3, b: Point3) -> bool {
    map.buildings().iter().any(|bd| {
        let f = &bd.footprint;
        let (mut t0, mut t1) = (0.0f64, 1.0f64);
        for (p, d, lo, hi) in [
            (a.x, b.x - a.x, f.x_min, f.x_max),
            (a.y, b.y - a.y, f.y_min, f.y_max),
        ] {
            if d == 0.0 {
                if p <= lo || p >= hi {
                    return false;
                }
            } else {
                let (u, v) = ((lo - p) / d, (hi - p) / d);
                t0 = t0.max(u.min(v));
                t1 = t1.min(u.max(v));
            }
        }
        t1 > t0 && a.z + t0 * (b.z - a.z) < bd.height
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fictitious_cost_matches_path_loss_law(seed in 0u64..10_000, rho in 1.0f64..600.0, theta in -3.1f64..3.1) {
        let w = nested_world(seed, &[2, 3, 4], (150.0, 400.0));
        for kind in [CostKind::AfOutage, CostKind::DfRate] {
            let pr = w.problem(heights(), cost(kind));
            let x = pr.frame().to_cartesian(PolarCoord::new(rho, theta));
            for k in 1..=pr.num_segments() {
                let got = pr.fictitious(SegmentId::clamped(k, pr.num_segments()), PolarCoord::new(rho, theta));
                let want = hand_cost(pr.model(), k, kind, w.user, w.bs, x);
                prop_assert!((got - want).abs() <= 1e-9 * want.abs().max(1e-12), "k={} {} vs {}", k, got, want);
            }
        }
    }

    #[test]
    fn search_record_and_trajectory_invariants(seed in 0u64..10_000, delta in 1.0f64..8.0) {
        let w = nested_world(seed, &[2, 3, 4], (150.0, 400.0));
        for kind in [CostKind::AfOutage, CostKind::DfRate] {
            let pr = w.problem(heights(), cost(kind));
            let out = shaded_contour_search(&pr, &w.field, &SearchParams::with_delta(delta)).unwrap();
            let wps = &out.trajectory.waypoints;
            // waypoints carry their true cost; the record beats every branch
            // waypoint and is a waypoint or a refined point on the axis
            for wp in wps {
                let k = w.field.segment(wp.position, w.user).get();
                let c = hand_cost(pr.model(), k, kind, w.user, w.bs, wp.position);
                prop_assert!((wp.cost - c).abs() <= 1e-9 * c.abs().max(1e-12));
                if wp.phase != Phase::Axis {
                    prop_assert!(out.record.f_min <= wp.cost);
                }
            }
            let k = w.field.segment(out.record.x_hat, w.user).get();
            let at = hand_cost(pr.model(), k, kind, w.user, w.bs, out.record.x_hat);
            prop_assert!((out.record.f_min - at).abs() <= 1e-9 * at.abs().max(1e-12));
            prop_assert!(out.record.polar.theta == 0.0 || wps.iter().any(|wp| wp.position == out.record.x_hat));
            let p = pr.frame().to_polar(out.record.x_hat);
            prop_assert!(p.theta.abs() <= std::f64::consts::FRAC_PI_2 + 1e-12);
            prop_assert!(p.rho <= pr.length() * p.theta.cos() * (1.0 + 1e-12));
            prop_assert!(out.lengths.total <= length_bound(pr.num_segments(), pr.length()));
            prop_assert!(out.lengths.total <= (2.4 * pr.num_segments() as f64 - 1.4) * pr.length());
            for b in &out.trajectory.branches {
                prop_assert!(b.length <= 1.21 * pr.length());
                let seg = out.trajectory.branch_waypoints(b);
                prop_assert!(seg.iter().all(|wp| matches!(wp.phase, Phase::Right | Phase::Left)));
                for wp in seg {
                    prop_assert!(wp.polar.rho <= pr.length() * wp.polar.theta.cos() * (1.0 + 1e-12));
                }
                for pair in seg.windows(2).skip(1) {
                    prop_assert!(pair[1].polar.rho > pair[0].polar.rho);
                    prop_assert!(pair[1].polar.theta.abs() >= pair[0].polar.theta.abs());
                }
            }
        }
    }

    #[test]
    fn map_segments_match_sampled_sight_lines(seed in 0u64..500, ux in 0.0f64..1.0, uy in 0.0f64..1.0, angle in -3.14f64..3.14) {
        let map = generate_map(seed, (400.0, 400.0), &BlockSpec::default(), (5.0, 45.0)).unwrap();
        let h = heights();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (ux.to_bits() >> 12));
        let user = if map.is_outdoor(Point2::new(400.0 * ux, 400.0 * uy)) {
            Point2::new(400.0 * ux, 400.0 * uy)
        } else {
            map.sample_street_point(&mut rng)
        };
        let oracle = relay_core::terrain::MapOracle::new(&map, h, 2);
        let dir = Point2::new(angle.cos(), angle.sin());
        let mut prev = 1;
        for i in 1..40 {
            let x = user + dir * (10.0 * i as f64);
            let k = oracle.segment(x, user).get();
            let blocked = clipped_blocked(&map, Point3::at_height(user, h.user), Point3::at_height(x, h.uav));
            prop_assert_eq!(k == 2, blocked, "rho {}", 10.0 * i as f64);
            // obstruction never clears further out along a ray
            prop_assert!(k >= prev);
            prev = k;
        }
    }
}

/// Circular LOS disc: the search must match a dense polar scan of the same problem.
#[test]
fn isotropic_disc_matches_dense_polar_scan() {
    let user = Point2::new(0.0, 0.0);
    let bs = Point2::new(300.0, 0.0);
    for radius in [20.0, 60.0, 150.0] {
        let field = NestedBoundaryField::isotropic(&[radius]).unwrap();
        for kind in [CostKind::AfOutage, CostKind::DfRate] {
            let model = SegmentModel::urban_los_nlos();
            let pr = RelayProblem::new(user, bs, heights(), model.clone(), cost(kind)).unwrap();
            let out = shaded_contour_search(&pr, &field, &SearchParams::with_delta(0.5)).unwrap();
            let mut best = f64::INFINITY;
            for i in 0..=600 {
                let rho = 300.0 * i as f64 / 600.0;
                for j in -200..=200 {
                    let theta = std::f64::consts::FRAC_PI_2 * j as f64 / 200.0;
                    if rho > 300.0 * theta.cos() {
                        continue;
                    }
                    let x = Point2::new(rho * theta.cos(), rho * theta.sin());
                    let k = if rho <= radius { 1 } else { 2 };
                    best = best.min(hand_cost(&model, k, kind, user, bs, x));
                }
            }
            let slack = 1e-3 * best.abs();
            assert!(
                out.record.f_min <= best + slack,
                "r={radius} {kind:?}: {} vs {best}",
                out.record.f_min
            );
        }
    }
}
