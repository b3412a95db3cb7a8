use proptest::prelude::*;
use redps_core::dominating::{cut_margin, find_dominating_set};
use redps_core::event_sets::{overshoot_set, CutPoint, Polyhedron, PolyhedralUnion, Region, RegionSplit};
use redps_core::linalg::dot;
use redps_core::{min_rate_point, GaussianModel, IncrementSum, RateModel};

fn spd2(a: f64, b: f64, c: f64) -> Vec<f64> {
    // L = [[a, 0], [b, c]] with a, c > 0.
    vec![a * a, a * b, a * b, b * b + c * c]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn gaussian_legendre_duality(
        m in prop::array::uniform2(-2.0f64..2.0),
        l in (0.3f64..2.0, -1.0f64..1.0, 0.3f64..2.0),
        y in prop::array::uniform2(-5.0f64..5.0),
        s in prop::array::uniform2(-3.0f64..3.0),
    ) {
        let g: RateModel = GaussianModel::new(m.to_vec(), spd2(l.0, l.1, l.2)).unwrap().into();
        let rate = g.rate(&y).unwrap();
        let sy = g.tilt_param(&y).unwrap();
        let dual = dot(&sy, &y) - g.cgf(&sy).unwrap();
        prop_assert!((rate - dual).abs() <= 1e-9 * (1.0 + rate));
        prop_assert!(rate + 1e-9 * (1.0 + rate) >= dot(&s, &y) - g.cgf(&s).unwrap());
        let grad = g.cgf_grad(&sy).unwrap();
        prop_assert!((grad[0] - y[0]).abs() < 1e-9 && (grad[1] - y[1]).abs() < 1e-9);
        let newton = g.tilt_param_newton(&y).unwrap();
        prop_assert!((newton[0] - sy[0]).abs() < 1e-8 && (newton[1] - sy[1]).abs() < 1e-8);
    }

    #[test]
    fn increment_rate_is_convex_and_dual(m in 1u32..60, y1 in -3.0f64..4.0, y2 in -3.0f64..4.0, t in -0.9f64..3.0) {
        let model: RateModel = IncrementSum::standard(m).into();
        let mf = m as f64;
        let (a, b) = (y1 * mf, y2 * mf);
        let ia = model.rate(&[a]).unwrap();
        let ib = model.rate(&[b]).unwrap();
        let mid = model.rate(&[0.5 * (a + b)]).unwrap();
        prop_assert!(mid <= 0.5 * (ia + ib) + 1e-9 * (1.0 + ia + ib));
        prop_assert!(ia + 1e-9 * (1.0 + ia) >= t * a - model.cgf(&[t]).unwrap());
        prop_assert!(ia >= -1e-12);
    }

    #[test]
    fn overshoot_membership_is_running_max(x in prop::collection::vec(-2.0f64..2.0, 1..12), a in 0.5f64..3.0) {
        let set = overshoot_set(x.len(), a).unwrap();
        let mut s = 0.0;
        let mut best = f64::NEG_INFINITY;
        for v in &x {
            s += v;
            best = best.max(s);
        }
        // Skip points within the membership tolerance of the boundary.
        prop_assume!((best - a).abs() > 1e-6);
        prop_assert_eq!(set.contains(&x).unwrap(), best >= a);
    }

    #[test]
    fn split_partitions_the_set(x in prop::collection::vec(-3.0f64..3.0, 6), a in 1.0f64..3.0, k in 1usize..6) {
        let set = overshoot_set(6, a).unwrap();
        let model = GaussianModel::standard(6);
        let dom = find_dominating_set(&model.into(), &set, f64::INFINITY, 20).unwrap();
        let split = redps_core::event_sets::split_regions(&set, &dom, k).unwrap();
        let inside = set.contains(&x).unwrap();
        let region = split.classify(&x);
        prop_assert_eq!(inside, region != Region::Outside);
        prop_assert!(!(split.in_e1(&x) && split.in_e2(&x)));
        prop_assert_eq!(inside, split.in_e1(&x) || split.in_e2(&x));
        if k == 6 {
            prop_assert!(!split.in_e2(&x));
        }
    }

    #[test]
    fn larger_threshold_extends_the_prefix(
        rows in prop::collection::vec((prop::array::uniform3(-1.0f64..1.0), 1.0f64..4.0), 2..7),
        c in 1.05f64..3.0,
    ) {
        let pieces: Vec<Polyhedron> = rows
            .iter()
            .filter(|(w, _)| dot(w, w) > 0.01)
            .map(|(w, b)| Polyhedron::halfspace(w.to_vec(), *b).unwrap())
            .collect();
        prop_assume!(!pieces.is_empty());
        let set = PolyhedralUnion::new(pieces, 1.0).unwrap();
        let model: RateModel = GaussianModel::standard(3).into();
        let small = find_dominating_set(&model, &set, c, 100).unwrap();
        let big = find_dominating_set(&model, &set, 2.0 * c, 100).unwrap();
        let all = find_dominating_set(&model, &set, f64::INFINITY, 100).unwrap();
        prop_assert!(big.len() >= small.len());
        prop_assert!(all.exhausted);
        for (p, q) in small.points.iter().zip(&all.points) {
            for (u, v) in p.point.iter().zip(&q.point) {
                prop_assert!((u - v).abs() < 1e-9);
            }
        }
        // Rates non-decreasing; every point strictly inside all earlier cuts.
        for i in 0..all.len() {
            if i > 0 {
                prop_assert!(all.points[i].rate >= all.points[i - 1].rate * (1.0 - 1e-9));
            }
            for j in 0..i {
                let cut = CutPoint::new(all.points[j].point.clone(), all.points[j].tilt.clone()).unwrap();
                let margin = cut_margin(all.points[i - 1].rate);
                prop_assert!(cut.normalized_slack(&all.points[i].point) <= -0.5 * margin);
            }
            prop_assert!(set.contains(&all.points[i].point).unwrap());
        }
    }
}

/// Smallest `||x||^2 / 2` over the polyhedron on a grid over `[-8, 8]^2`,
/// refined around the incumbent.
fn grid_min_2d(p: &Polyhedron) -> Option<f64> {
    let mut best: Option<([f64; 2], f64)> = None;
    let mut center = [0.0, 0.0];
    let mut half = 8.0;
    let mut step = 0.02;
    for _ in 0..5 {
        let n = (2.0 * half / step) as i64;
        for i in 0..=n {
            for j in 0..=n {
                let x = [center[0] - half + i as f64 * step, center[1] - half + j as f64 * step];
                if p.min_slack(&x) >= 0.0 {
                    let f = 0.5 * dot(&x, &x);
                    if best.map_or(true, |(_, b)| f < b) {
                        best = Some((x, f));
                    }
                }
            }
        }
        let (x, _) = best?;
        center = x;
        half = 50.0 * step;
        step /= 10.0;
    }
    best.map(|(_, f)| f)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn qp_matches_grid_search(rows in prop::collection::vec((prop::array::uniform2(-1.0f64..1.0), -2.0f64..3.0), 1..5)) {
        let rows: Vec<(Vec<f64>, f64)> = rows.into_iter().filter(|(w, _)| dot(w, w) > 0.04).map(|(w, b)| (w.to_vec(), b)).collect();
        prop_assume!(!rows.is_empty());
        let p = Polyhedron::new(2, rows).unwrap();
        let model = GaussianModel::standard(2);
        let r = min_rate_point(&model, &p, &[], 0.0).unwrap();
        match grid_min_2d(&p) {
            Some(f) => {
                prop_assert!(r.is_optimal());
                prop_assert!(r.objective <= f + 1e-9);
                prop_assert!(f - r.objective < 1e-4, "qp {} grid {}", r.objective, f);
            }
            None => {
                // Either infeasible or a sliver thinner than the grid.
                if r.is_optimal() {
                    prop_assert!(p.min_slack(&r.x_star) >= -1e-8);
                }
            }
        }
    }
}

#[test]
fn region_split_without_cuts_is_all_residual() {
    let set = overshoot_set(3, 1.0).unwrap();
    let split = RegionSplit::new(set, vec![]).unwrap();
    assert_eq!(split.classify(&[2.0, 0.0, 0.0]), Region::Residual);
    assert_eq!(split.classify(&[0.0, 0.0, 0.0]), Region::Outside);
}
