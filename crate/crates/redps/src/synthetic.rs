//! Synthetic many-dominating-point benchmark: a union of random half-spaces
//! `{x : w . x >= b}` under a standard Gaussian, with unit normals `w` and
//! rates `b^2 / 2` drawn uniformly from `[i0, 3 i0]`.

use rand::Rng;
use redps_core::rng::block_rng;
use redps_core::{GaussianModel, PolyhedralUnion, Polyhedron, Result};

use crate::config::SyntheticSpec;

#[derive(Debug, Clone)]
pub struct SyntheticSet {
    pub set: PolyhedralUnion,
    /// Per-piece unit normals.
    pub normals: Vec<Vec<f64>>,
    /// Per-piece offsets; the piece's own minimum rate is `b^2 / 2`.
    pub offsets: Vec<f64>,
}

pub fn synthetic_set(spec: &SyntheticSpec) -> Result<SyntheticSet> {
    let mut rng = block_rng(spec.seed, 0);
    let std = GaussianModel::standard(spec.dim);
    let zero = vec![0.0; spec.dim];
    let mut normals = Vec::with_capacity(spec.pieces);
    let mut offsets = Vec::with_capacity(spec.pieces);
    let mut pieces = Vec::with_capacity(spec.pieces);
    for _ in 0..spec.pieces {
        let mut w = vec![0.0; spec.dim];
        loop {
            std.sample_around(&zero, &mut rng, &mut w);
            let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1e-8 {
                w.iter_mut().for_each(|v| *v /= norm);
                break;
            }
        }
        let rate = spec.i0 * (1.0 + 2.0 * rng.random::<f64>());
        let b = (2.0 * rate).sqrt();
        pieces.push(Polyhedron::halfspace(w.clone(), b)?);
        normals.push(w);
        offsets.push(b);
    }
    Ok(SyntheticSet { set: PolyhedralUnion::new_allow_empty(pieces, spec.i0)?, normals, offsets })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_rates() {
        let spec = SyntheticSpec { dim: 20, pieces: 60, i0: 4.0, seed: 3 };
        let s = synthetic_set(&spec).unwrap();
        assert_eq!(s.set.dim(), 20);
        assert_eq!(s.set.pieces().len(), 60);
        for (w, b) in s.normals.iter().zip(&s.offsets) {
            assert!((w.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-12);
            let rate = b * b / 2.0;
            assert!((4.0..=12.0).contains(&rate));
            let apex: Vec<f64> = w.iter().map(|v| v * b).collect();
            assert!(s.set.contains(&apex).unwrap());
        }
        let again = synthetic_set(&spec).unwrap();
        assert_eq!(again.offsets, s.offsets);
    }
}
