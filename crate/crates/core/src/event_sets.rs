//! Rare-event sets as finite unions of convex polyhedra.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm};
use crate::qp::{self, Row};

/// Slack tolerance for membership on unit-norm rows. Dominating points sit
/// exactly on boundaries and must count as inside.
pub const TOL_MEMBER: f64 = 1e-9;

/// Unit-normalise `w` (and `b` with it). Vectors already of unit norm to
/// within a couple of ulps are left untouched, so normalising is idempotent.
fn normalize_row(mut w: Vec<f64>, mut b: f64) -> Result<Row> {
    let n = norm(&w);
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::invalid("constraint normal must be finite and non-zero"));
    }
    if b.is_nan() || b == f64::INFINITY {
        return Err(Error::invalid("constraint offset must be finite or -inf"));
    }
    if (n - 1.0).abs() > 2.0 * f64::EPSILON {
        for wi in w.iter_mut() {
            *wi /= n;
        }
        b /= n;
    }
    Ok(Row { w, b })
}

/// Intersection of half-spaces `w' x >= b`, rows stored with `||w|| = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyhedron {
    dim: usize,
    rows: Vec<Row>,
}

impl Polyhedron {
    pub fn new(dim: usize, rows: impl IntoIterator<Item = (Vec<f64>, f64)>) -> Result<Self> {
        let mut out = Vec::new();
        for (w, b) in rows {
            if w.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: w.len() });
            }
            out.push(normalize_row(w, b)?);
        }
        if out.is_empty() {
            return Err(Error::invalid("polyhedron needs at least one row"));
        }
        Ok(Polyhedron { dim, rows: out })
    }

    /// A single half-space.
    pub fn halfspace(w: Vec<f64>, b: f64) -> Result<Self> {
        Self::new(w.len(), [(w, b)])
    }

    /// `R^dim`, encoded as one vacuous row.
    pub fn whole_space(dim: usize) -> Self {
        let mut w = vec![0.0; dim];
        w[0] = 1.0;
        Polyhedron { dim, rows: vec![Row { w, b: f64::NEG_INFINITY }] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    /// `min_i (w_i' x - b_i)`.
    pub fn min_slack(&self, x: &[f64]) -> f64 {
        self.rows.iter().map(|r| dot(&r.w, x) - r.b).fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.rows.iter().all(|r| dot(&r.w, x) - r.b >= -TOL_MEMBER)
    }

    /// Some point of the polyhedron, if there is one.
    pub fn feasible_point(&self) -> Result<Option<Vec<f64>>> {
        let res = qp::project_euclidean(&vec![0.0; self.dim], &self.rows)?;
        Ok(res.is_optimal().then_some(res.x_star))
    }

    /// The same polyhedron with every row renormalised.
    pub fn renormalized(&self) -> Result<Self> {
        Polyhedron::new(self.dim, self.rows.iter().map(|r| (r.w.clone(), r.b)))
    }
}

/// `E = P_1 U ... U P_q`, with the rarity parameter recorded for reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyhedralUnion {
    dim: usize,
    pieces: Vec<Polyhedron>,
    gamma: f64,
}

impl PolyhedralUnion {
    /// Checks dimensions and that at least one piece is non-empty.
    pub fn new(pieces: Vec<Polyhedron>, gamma: f64) -> Result<Self> {
        let set = Self::new_allow_empty(pieces, gamma)?;
        for p in &set.pieces {
            if p.feasible_point()?.is_some() {
                return Ok(set);
            }
        }
        Err(Error::EmptySet)
    }

    /// As [`new`](Self::new) but without the non-emptiness check.
    pub fn new_allow_empty(pieces: Vec<Polyhedron>, gamma: f64) -> Result<Self> {
        let Some(first) = pieces.first() else {
            return Err(Error::invalid("union needs at least one piece"));
        };
        let dim = first.dim();
        for p in &pieces {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: p.dim() });
            }
        }
        Ok(PolyhedralUnion { dim, pieces, gamma })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pieces(&self) -> &[Polyhedron] {
        &self.pieces
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Membership with slack tolerance [`TOL_MEMBER`].
    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        Ok(self.contains_unchecked(x))
    }

    pub(crate) fn contains_unchecked(&self, x: &[f64]) -> bool {
        self.pieces.iter().any(|p| p.contains(x))
    }
}

/// Overshoot region of a `T`-step walk: `H_1 U ... U H_T` with
/// `H_m = {x : x_1 + ... + x_m >= a}`.
pub fn overshoot_set(horizon: usize, a: f64) -> Result<PolyhedralUnion> {
    if horizon == 0 || !(a > 0.0) {
        return Err(Error::invalid("overshoot set needs T >= 1 and a > 0"));
    }
    let pieces = (1..=horizon)
        .map(|m| {
            let w: Vec<f64> = (0..horizon).map(|i| if i < m { 1.0 } else { 0.0 }).collect();
            Polyhedron::halfspace(w, a)
        })
        .collect::<Result<Vec<_>>>()?;
    PolyhedralUnion::new_allow_empty(pieces, a)
}

/// `{x >= gamma} U {x <= -k_tail gamma}` in one dimension.
pub fn two_tail_set(gamma: f64, k_tail: f64) -> Result<PolyhedralUnion> {
    if !(gamma > 0.0) || !(k_tail >= 1.0) {
        return Err(Error::invalid("two-tail set needs gamma > 0 and k_tail >= 1"));
    }
    PolyhedralUnion::new_allow_empty(
        vec![Polyhedron::halfspace(vec![1.0], gamma)?, Polyhedron::halfspace(vec![-1.0], k_tail * gamma)?],
        gamma,
    )
}

/// Where a point falls relative to a [`RegionSplit`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Outside,
    /// In `E` and in the supporting half-space of the given cut point.
    Covered(usize),
    /// In `E` but outside every retained half-space.
    Residual,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CutPoint {
    pub point: Vec<f64>,
    pub tilt: Vec<f64>,
    unit_tilt: Vec<f64>,
    offset: f64,
}

impl CutPoint {
    pub fn new(point: Vec<f64>, tilt: Vec<f64>) -> Result<Self> {
        if point.len() != tilt.len() {
            return Err(Error::DimensionMismatch { expected: point.len(), got: tilt.len() });
        }
        let n = norm(&tilt);
        if !(n > 0.0) {
            return Err(Error::invalid("cut tilt must be non-zero"));
        }
        let unit_tilt: Vec<f64> = tilt.iter().map(|v| v / n).collect();
        let offset = dot(&unit_tilt, &point);
        Ok(CutPoint { point, tilt, unit_tilt, offset })
    }

    /// `s' (x - a) / ||s||`
    pub fn normalized_slack(&self, x: &[f64]) -> f64 {
        dot(&self.unit_tilt, x) - self.offset
    }

    pub fn unit_tilt(&self) -> &[f64] {
        &self.unit_tilt
    }
}

/// `E_1 = E n U_i {s_i' (x - a_i) >= 0}` and `E_2 = E \ E_1`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionSplit {
    base: PolyhedralUnion,
    cuts: Vec<CutPoint>,
}

impl RegionSplit {
    pub fn new(base: PolyhedralUnion, cuts: Vec<CutPoint>) -> Result<Self> {
        for c in &cuts {
            if c.point.len() != base.dim() {
                return Err(Error::DimensionMismatch { expected: base.dim(), got: c.point.len() });
            }
        }
        Ok(RegionSplit { base, cuts })
    }

    pub fn base(&self) -> &PolyhedralUnion {
        &self.base
    }

    pub fn cuts(&self) -> &[CutPoint] {
        &self.cuts
    }

    /// Classify `x`. The cover test uses the same tolerance as membership.
    pub fn classify(&self, x: &[f64]) -> Region {
        if !self.base.contains_unchecked(x) {
            return Region::Outside;
        }
        match self.cuts.iter().position(|c| c.normalized_slack(x) >= -TOL_MEMBER) {
            Some(i) => Region::Covered(i),
            None => Region::Residual,
        }
    }

    pub fn in_e1(&self, x: &[f64]) -> bool {
        matches!(self.classify(x), Region::Covered(_))
    }

    pub fn in_e2(&self, x: &[f64]) -> bool {
        self.classify(x) == Region::Residual
    }
}

/// Split `set` by the first `k` points of a dominating set.
pub fn split_regions(set: &PolyhedralUnion, dom: &crate::dominating::DominatingSet, k: usize) -> Result<RegionSplit> {
    if k == 0 || k > dom.points.len() {
        return Err(Error::invalid("split needs 1 <= k <= number of dominating points"));
    }
    let cuts = dom.points[..k]
        .iter()
        .map(|p| CutPoint::new(p.point.clone(), p.tilt.clone()))
        .collect::<Result<Vec<_>>>()?;
    RegionSplit::new(set.clone(), cuts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overshoot_pieces_are_normalized_halfspaces() {
        let e = overshoot_set(1, 1.0).unwrap();
        assert_eq!(e.pieces().len(), 1);
        assert_eq!(e.pieces()[0].rows()[0].w, vec![1.0]);
        assert_eq!(e.pieces()[0].rows()[0].b, 1.0);
        let e = overshoot_set(10, 3.3).unwrap();
        let r = &e.pieces()[3].rows()[0];
        assert!((r.b - 3.3 / 2.0).abs() < 1e-15);
        assert!((norm(&r.w) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn overshoot_membership() {
        let a = 3.3;
        let e = overshoot_set(10, a).unwrap();
        assert!(e.contains(&[a / 10.0; 10]).unwrap());
        let mut x = [0.0; 10];
        assert!(!e.contains(&x).unwrap());
        x[0] = a;
        assert!(e.contains(&x).unwrap());
        // S_3 = 3.4, later partial sums below 3.3.
        let y = [1.0, 1.2, 1.2, -0.5, 0.1, 0.0, -0.2, 0.1, 0.0, 0.0];
        assert!(e.contains(&y).unwrap());
        assert!(matches!(e.contains(&[0.0; 3]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn two_tail_boundary_is_inside() {
        let e = two_tail_set(2.0, 2.0).unwrap();
        assert!(e.contains(&[2.0]).unwrap());
        assert!(e.contains(&[-4.0]).unwrap());
        assert!(!e.contains(&[0.0]).unwrap());
        assert!(!e.contains(&[-3.9]).unwrap());
    }

    #[test]
    fn normalisation_is_idempotent() {
        let p = Polyhedron::new(3, [(vec![0.3, -1.7, 2.9], 1.234), (vec![1e-3, 5.0, 0.1], -2.0)]).unwrap();
        let q = p.renormalized().unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn empty_union_is_rejected() {
        let p = Polyhedron::new(1, [(vec![1.0], 1.0), (vec![-1.0], 0.0)]).unwrap();
        assert_eq!(PolyhedralUnion::new(vec![p.clone()], 1.0), Err(Error::EmptySet));
        assert!(PolyhedralUnion::new_allow_empty(vec![p], 1.0).is_ok());
        assert!(PolyhedralUnion::new(vec![Polyhedron::whole_space(2)], 0.0).is_ok());
    }

    #[test]
    fn two_tail_split_with_only_the_right_point() {
        let gamma = 1.5;
        let e = two_tail_set(gamma, 2.0).unwrap();
        let split = RegionSplit::new(e, vec![CutPoint::new(vec![gamma], vec![gamma]).unwrap()]).unwrap();
        assert_eq!(split.classify(&[gamma]), Region::Covered(0));
        assert_eq!(split.classify(&[5.0]), Region::Covered(0));
        assert_eq!(split.classify(&[-2.0 * gamma]), Region::Residual);
        assert_eq!(split.classify(&[-10.0]), Region::Residual);
        assert_eq!(split.classify(&[0.0]), Region::Outside);
        assert_eq!(split.classify(&[-2.9]), Region::Outside);
    }
}
