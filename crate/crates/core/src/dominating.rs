//! Sequential dominating-point search for Gaussian inputs over polyhedral
//! unions.
//!
//! Round `k + 1` minimises the rate over each piece intersected with the
//! open complements `{s_j' (x - a_j) < 0}` of the supporting half-spaces
//! already found, and keeps the cheapest piece optimum. The search ends when
//! nothing is left (the points cover `E`) or when the next rate exceeds
//! `C` times the last accepted one.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::event_sets::{CutPoint, PolyhedralUnion, Polyhedron, TOL_MEMBER};
use crate::linalg::{dot, norm};
use crate::qp::{self, QpResult, Row};
use crate::rate_models::{GaussianModel, RateModel};

/// Default cap on the number of points.
pub const DEFAULT_MAX_POINTS: usize = 1000;
/// Default stopping threshold.
pub const DEFAULT_THRESHOLD: f64 = 1.5;
/// Relative width within which two candidate rates count as tied.
pub const TIE_RTOL: f64 = 1e-10;
/// Relative slack on the stopping comparison. The cut margin perturbs rates
/// at the 1e-13 level, which must not flip a ratio sitting exactly on `C`.
pub const STOP_RTOL: f64 = 1e-9;

/// Margin that turns the strict cut `s' (x - a) < 0` into `<= -margin` on unit `s`.
pub fn cut_margin(last_rate: f64) -> f64 {
    1e-7 * (1.0 + last_rate)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DominatingPoint {
    pub point: Vec<f64>,
    pub rate: f64,
    pub tilt: Vec<f64>,
}

impl DominatingPoint {
    pub fn cut(&self) -> CutPoint {
        CutPoint::new(self.point.clone(), self.tilt.clone()).expect("dominating tilts are non-zero")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DominatingSet {
    /// In non-decreasing rate order.
    pub points: Vec<DominatingPoint>,
    pub stopped_early: bool,
    pub threshold_c: f64,
    /// The residual region was empty when the search ended.
    pub exhausted: bool,
    /// Rate of the rejected candidate when the threshold fired.
    pub rejected_rate: Option<f64>,
}

impl DominatingSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn rates(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.rate).collect()
    }

    pub fn stop_reason(&self) -> &'static str {
        if self.exhausted {
            "exhausted"
        } else if self.stopped_early {
            "threshold"
        } else {
            "none"
        }
    }

    /// First `k` points; the result is neither exhausted nor early-stopped
    /// unless `k` is the full length.
    pub fn truncated(&self, k: usize) -> DominatingSet {
        let k = k.min(self.points.len());
        let full = k == self.points.len();
        DominatingSet {
            points: self.points[..k].to_vec(),
            stopped_early: if full { self.stopped_early } else { true },
            threshold_c: self.threshold_c,
            exhausted: full && self.exhausted,
            rejected_rate: if full { self.rejected_rate } else { Some(self.points[k].rate) },
        }
    }

    pub fn cuts(&self) -> Vec<CutPoint> {
        self.points.iter().map(DominatingPoint::cut).collect()
    }
}

fn cut_rows(piece: &Polyhedron, cuts: &[CutPoint], margin: f64) -> Vec<Row> {
    let mut rows: Vec<Row> = piece.rows().to_vec();
    for c in cuts {
        let s = c.unit_tilt();
        let w: Vec<f64> = s.iter().map(|v| -v).collect();
        rows.push(Row::new(w, -dot(s, &c.point) + margin));
    }
    rows
}

/// Rate minimiser over `piece` minus the supporting half-spaces of `cuts`.
/// Active-row indices past the piece rows refer to cuts in order.
pub fn min_rate_point(model: &GaussianModel, piece: &Polyhedron, cuts: &[CutPoint], margin: f64) -> Result<QpResult> {
    if piece.dim() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: piece.dim() });
    }
    qp::solve(model.mean(), model.chol(), &cut_rows(piece, cuts, margin))
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    false
}

/// Sequential search, solving each round's per-piece problems in piece order.
pub fn find_dominating_set(model: &RateModel, set: &PolyhedralUnion, c: f64, max_points: usize) -> Result<DominatingSet> {
    find_dominating_set_with(model, set, c, max_points, |g, pieces, cuts, margin| {
        pieces.iter().map(|p| min_rate_point(g, p, cuts, margin)).collect()
    })
}

/// As [`find_dominating_set`], with the per-round piece solves delegated to
/// `solve_round`, which must return one result per piece in piece order.
pub fn find_dominating_set_with<F>(
    model: &RateModel,
    set: &PolyhedralUnion,
    c: f64,
    max_points: usize,
    mut solve_round: F,
) -> Result<DominatingSet>
where
    F: FnMut(&GaussianModel, &[Polyhedron], &[CutPoint], f64) -> Vec<Result<QpResult>>,
{
    let RateModel::Gaussian(g) = model else {
        return Err(Error::invalid("dominating-point search needs a gaussian model"));
    };
    if !(c > 1.0) {
        return Err(Error::invalid("stopping threshold C must exceed 1"));
    }
    if set.dim() != g.dim() {
        return Err(Error::DimensionMismatch { expected: g.dim(), got: set.dim() });
    }
    if set.contains(g.mean())? {
        return Err(Error::MeanInsideSet);
    }

    let mut points: Vec<DominatingPoint> = Vec::new();
    let mut cuts: Vec<CutPoint> = Vec::new();
    loop {
        let last_rate = points.last().map_or(0.0, |p| p.rate);
        let margin = cut_margin(last_rate);
        let results = solve_round(g, set.pieces(), &cuts, margin);
        let mut best: Option<QpResult> = None;
        for r in results {
            let r = r?;
            if !r.is_optimal() {
                continue;
            }
            best = match best {
                None => Some(r),
                Some(b) => {
                    let tie = (r.objective - b.objective).abs() <= TIE_RTOL * b.objective.abs().max(f64::MIN_POSITIVE);
                    if (tie && lex_less(&r.x_star, &b.x_star)) || (!tie && r.objective < b.objective) {
                        Some(r)
                    } else {
                        Some(b)
                    }
                }
            };
        }
        let Some(cand) = best else {
            return Ok(DominatingSet { points, stopped_early: false, threshold_c: c, exhausted: true, rejected_rate: None });
        };
        let rate = g.rate(&cand.x_star);
        if !points.is_empty() && rate > c * last_rate * (1.0 + STOP_RTOL) {
            return Ok(DominatingSet { points, stopped_early: true, threshold_c: c, exhausted: false, rejected_rate: Some(rate) });
        }
        if rate < last_rate * (1.0 - 1e-9) {
            return Err(Error::Numerical("dominating-point rates decreased"));
        }
        if points.len() >= max_points {
            return Err(Error::MaxPointsReached { cap: max_points });
        }
        let tilt = g.tilt(&cand.x_star);
        let point = DominatingPoint { point: cand.x_star, rate, tilt };
        cuts.push(point.cut());
        points.push(point);
    }
}

/// Outcome of probing a claimed cover.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverReport {
    pub probes: usize,
    pub claimed_exhausted: bool,
    pub counterexample_count: usize,
    /// Up to 16 probes no retained half-space covers.
    pub counterexamples: Vec<Vec<f64>>,
    /// Per point, probes covered by that point alone. Zero means no evidence
    /// that the point is needed.
    pub sole_cover_counts: Vec<usize>,
}

impl CoverReport {
    pub fn cover_holds(&self) -> bool {
        self.counterexample_count == 0
    }

    pub fn redundant_points(&self) -> Vec<usize> {
        self.sole_cover_counts.iter().enumerate().filter(|(_, &c)| c == 0).map(|(i, _)| i).collect()
    }
}

/// Check the cover property by hit-and-run sampling inside each piece
/// (clipped to a box around the origin scaled by the points), and the
/// minimality property by counting probes that only one point covers, i.e.
/// probes that become counterexamples when that point is removed.
pub fn verify_dominating_set<R: Rng + ?Sized>(
    dom: &DominatingSet,
    set: &PolyhedralUnion,
    n_probe: usize,
    rng: &mut R,
) -> Result<CoverReport> {
    let d = set.dim();
    let cuts = dom.cuts();
    let scale = dom.points.iter().map(|p| norm(&p.point)).fold(0.0_f64, f64::max);
    let mut report = CoverReport {
        probes: 0,
        claimed_exhausted: dom.exhausted,
        counterexample_count: 0,
        counterexamples: Vec::new(),
        sole_cover_counts: alloc::vec![0; cuts.len()],
    };
    let pieces = set.pieces();
    let burn_in = 50usize;
    let mut dir = alloc::vec![0.0; d];
    for (pi, piece) in pieces.iter().enumerate() {
        let budget = n_probe / pieces.len() + usize::from(pi < n_probe % pieces.len());
        let Some(mut x) = piece.feasible_point()? else { continue };
        let half_width = 2.0 * (scale + norm(&x)) + 1.0;
        let mut taken = 0usize;
        let mut step = 0usize;
        let mut stuck = 0usize;
        while taken < budget {
            for v in dir.iter_mut() {
                *v = StandardNormal.sample(rng);
            }
            let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
            for row in piece.rows() {
                if row.b == f64::NEG_INFINITY {
                    continue;
                }
                let wd = dot(&row.w, &dir);
                let slack = (dot(&row.w, &x) - row.b).max(0.0);
                if wd > 0.0 {
                    lo = lo.max(-slack / wd);
                } else if wd < 0.0 {
                    hi = hi.min(-slack / wd);
                }
            }
            for (xi, di) in x.iter().zip(&dir) {
                if *di != 0.0 {
                    let a = (-half_width - xi) / di;
                    let b = (half_width - xi) / di;
                    lo = lo.max(a.min(b));
                    hi = hi.min(a.max(b));
                }
            }
            if !(hi > lo) {
                stuck += 1;
                if stuck > 1000 {
                    break;
                }
                continue;
            }
            stuck = 0;
            let t = lo + (hi - lo) * rng.random::<f64>();
            for (xi, di) in x.iter_mut().zip(&dir) {
                *xi += t * di;
            }
            step += 1;
            if step <= burn_in {
                continue;
            }
            taken += 1;
            report.probes += 1;
            let mut covering = cuts.iter().enumerate().filter(|(_, c)| c.normalized_slack(&x) >= -TOL_MEMBER).map(|(i, _)| i);
            match (covering.next(), covering.next()) {
                (None, _) => {
                    report.counterexample_count += 1;
                    if report.counterexamples.len() < 16 {
                        report.counterexamples.push(x.clone());
                    }
                }
                (Some(i), None) => report.sole_cover_counts[i] += 1,
                _ => {}
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event_sets::{overshoot_set, two_tail_set};
    use crate::qp::QpStatus;
    use crate::rng::block_rng;
    use alloc::vec;

    fn std2() -> GaussianModel {
        GaussianModel::standard(2)
    }

    fn two_wedges() -> PolyhedralUnion {
        PolyhedralUnion::new(
            vec![Polyhedron::halfspace(vec![1.0, 1.0], 4.0).unwrap(), Polyhedron::halfspace(vec![1.0, -1.0], 6.0).unwrap()],
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn min_rate_point_examples() {
        let g = std2();
        let p = Polyhedron::halfspace(vec![1.0, 1.0], 4.0).unwrap();
        let r = min_rate_point(&g, &p, &[], 0.0).unwrap();
        assert!((r.x_star[0] - 2.0).abs() < 1e-12 && (r.x_star[1] - 2.0).abs() < 1e-12);
        assert!((r.objective - 4.0).abs() < 1e-12);

        let p2 = Polyhedron::halfspace(vec![1.0, -1.0], 6.0).unwrap();
        let cut = CutPoint::new(vec![2.0, 2.0], vec![2.0, 2.0]).unwrap();
        let r = min_rate_point(&g, &p2, &[cut.clone()], cut_margin(4.0)).unwrap();
        assert!((r.x_star[0] - 3.0).abs() < 1e-12 && (r.x_star[1] + 3.0).abs() < 1e-12);
        assert!((r.objective - 9.0).abs() < 1e-12);
        assert_eq!(r.active_rows, vec![0]);
        assert!((dot(&cut.tilt, &[1.0, -5.0]) + 8.0).abs() < 1e-12);

        let p3 = Polyhedron::halfspace(vec![1.0, 0.0], 1.0).unwrap();
        let cut = CutPoint::new(vec![1.0, 0.0], vec![1.0, 0.0]).unwrap();
        let r = min_rate_point(&g, &p3, &[cut], cut_margin(0.5)).unwrap();
        assert_eq!(r.status, QpStatus::Infeasible);
    }

    #[test]
    fn wedge_search_respects_threshold() {
        let model: RateModel = std2().into();
        let e = two_wedges();
        let dom = find_dominating_set(&model, &e, 1.5, 100).unwrap();
        assert_eq!(dom.len(), 1);
        assert!(dom.stopped_early && !dom.exhausted);
        assert!((dom.rejected_rate.unwrap() - 9.0).abs() < 1e-9);

        let dom = find_dominating_set(&model, &e, 3.0, 100).unwrap();
        assert_eq!(dom.len(), 2);
        assert!(dom.exhausted && !dom.stopped_early);
        assert!((dom.points[0].point[0] - 2.0).abs() < 1e-9 && (dom.points[0].point[1] - 2.0).abs() < 1e-9);
        assert!((dom.points[1].point[0] - 3.0).abs() < 1e-9 && (dom.points[1].point[1] + 3.0).abs() < 1e-9);
    }

    #[test]
    fn overshoot_points_are_analytic() {
        let (t, a, sigma) = (10usize, 3.3, 1.0);
        let g = GaussianModel::isotropic(t, sigma).unwrap();
        let dom = find_dominating_set(&g.into(), &overshoot_set(t, a).unwrap(), f64::INFINITY, 100).unwrap();
        assert_eq!(dom.len(), t);
        assert!(dom.exhausted);
        for (j, p) in dom.points.iter().enumerate() {
            let keep = t - j;
            for (i, v) in p.point.iter().enumerate() {
                let want = if i < keep { a / keep as f64 } else { 0.0 };
                assert!((v - want).abs() < 1e-6, "point {j} coord {i}: {v} vs {want}");
            }
            let want_rate = a * a / (2.0 * sigma * sigma * keep as f64);
            assert!((p.rate - want_rate).abs() < 1e-9 * want_rate.max(1.0));
        }
    }

    #[test]
    fn mean_inside_and_bad_threshold_are_errors() {
        let model: RateModel = GaussianModel::standard(1).into();
        let e = PolyhedralUnion::new(vec![Polyhedron::halfspace(vec![1.0], -1.0).unwrap()], 1.0).unwrap();
        assert_eq!(find_dominating_set(&model, &e, 1.5, 10), Err(Error::MeanInsideSet));
        let e = two_tail_set(2.0, 2.0).unwrap();
        assert!(matches!(find_dominating_set(&model, &e, 1.0, 10), Err(Error::InvalidArgument(_))));
        assert_eq!(find_dominating_set(&model, &e, f64::INFINITY, 1), Err(Error::MaxPointsReached { cap: 1 }));
        let inc: RateModel = crate::rate_models::IncrementSum::standard(3).into();
        assert!(find_dominating_set(&inc, &e, 2.0, 10).is_err());
    }

    #[test]
    fn two_tail_points() {
        let model: RateModel = GaussianModel::standard(1).into();
        let dom = find_dominating_set(&model, &two_tail_set(2.0, 2.0).unwrap(), f64::INFINITY, 10).unwrap();
        assert_eq!(dom.len(), 2);
        assert!((dom.points[0].point[0] - 2.0).abs() < 1e-12);
        assert!((dom.points[1].point[0] + 4.0).abs() < 1e-12);
        assert!(dom.exhausted);
    }

    #[test]
    fn cover_verification() {
        let (t, a) = (10usize, 3.3);
        let g = GaussianModel::isotropic(t, 1.0).unwrap();
        let set = overshoot_set(t, a).unwrap();
        let dom = find_dominating_set(&g.into(), &set, f64::INFINITY, 100).unwrap();
        let mut rng = block_rng(3, 0);
        let rep = verify_dominating_set(&dom, &set, 20_000, &mut rng).unwrap();
        assert!(rep.cover_holds(), "{:?}", rep.counterexamples.first());

        let mut broken = dom.truncated(t - 1);
        broken.exhausted = true;
        let rep = verify_dominating_set(&broken, &set, 20_000, &mut rng).unwrap();
        assert!(rep.counterexample_count > 0);
        let x = &rep.counterexamples[0];
        assert!(x[0] >= a - 1e-9);
        let mut s = 0.0;
        for (m, v) in x.iter().enumerate() {
            s += v;
            if m > 0 {
                assert!(s < a);
            }
        }

        let one = PolyhedralUnion::new(vec![Polyhedron::halfspace(vec![1.0, 2.0], 3.0).unwrap()], 1.0).unwrap();
        let dom = find_dominating_set(&std2().into(), &one, 2.0, 10).unwrap();
        let rep = verify_dominating_set(&dom, &one, 2_000, &mut rng).unwrap();
        assert!(rep.cover_holds());
        assert!(rep.redundant_points().is_empty());
    }
}
