//! Collocation, boundary and evaluation point sets on the unit cube.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::network::{seeded_rng, BlendDescriptor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PointRole {
    InteriorCollocation,
    Boundary,
    EvaluationGrid,
}

/// Points in `[0,1]^d`, stored `n x d` row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet {
    pub dim: usize,
    pub role: PointRole,
    pub coords: Vec<f64>,
}

impl PointSet {
    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }
}

/// `n` equally spaced interior points `k / (n + 1)`, `k = 1..=n`.
pub fn uniform_collocation_1d(n: usize) -> Result<PointSet> {
    if n < 2 {
        return Err(Error::config(format!("need at least 2 collocation points, got {n}")));
    }
    let h = 1.0 / (n + 1) as f64;
    Ok(PointSet { dim: 1, role: PointRole::InteriorCollocation, coords: (1..=n).map(|k| k as f64 * h).collect() })
}

/// Latin hypercube sample of `n` points in the open cube `(0,1)^dim`.
pub fn lhs<R: Rng + ?Sized>(n: usize, dim: usize, rng: &mut R) -> Result<PointSet> {
    if n == 0 || dim == 0 {
        return Err(Error::config("a Latin hypercube needs n >= 1 and dim >= 1"));
    }
    let mut coords = vec![0.0; n * dim];
    let mut strata: Vec<usize> = (0..n).collect();
    for axis in 0..dim {
        strata.shuffle(rng);
        for (p, &s) in strata.iter().enumerate() {
            let u = loop {
                let u: f64 = rng.random();
                if u > 0.0 {
                    break u;
                }
            };
            coords[p * dim + axis] = (s as f64 + u) / n as f64;
        }
    }
    Ok(PointSet { dim, role: PointRole::InteriorCollocation, coords })
}

pub fn lhs_2d(n: usize, seed: u64) -> Result<PointSet> {
    lhs(n, 2, &mut seeded_rng(seed))
}

/// 1D: the endpoints. 2D: `n_per_face` midpoint-spaced points on each of
/// the faces `x=0`, `x=1`, `y=0`, `y=1`, in that order.
pub fn boundary_points(dim: usize, n_per_face: usize) -> Result<PointSet> {
    let coords = match dim {
        1 => vec![0.0, 1.0],
        2 => {
            if n_per_face == 0 {
                return Err(Error::config("need at least one boundary point per face"));
            }
            let ts: Vec<f64> = (0..n_per_face).map(|k| (k as f64 + 0.5) / n_per_face as f64).collect();
            let mut c = Vec::with_capacity(8 * n_per_face);
            for &(axis, face) in &[(0usize, 0.0), (0, 1.0), (1, 0.0), (1, 1.0)] {
                for &t in &ts {
                    if axis == 0 {
                        c.extend_from_slice(&[face, t]);
                    } else {
                        c.extend_from_slice(&[t, face]);
                    }
                }
            }
            c
        }
        _ => return Err(Error::config(format!("boundary sampling supports dim 1 or 2, got {dim}"))),
    };
    Ok(PointSet { dim, role: PointRole::Boundary, coords })
}

/// Number of geometrically spaced points added inside each 1D layer.
pub const LAYER_REFINEMENT: usize = 50;

/// 1D: 1001 equispaced points on `[0,1]` plus, for each layer, 50 points at
/// geometrically shrinking distances from `10 delta` down to `1e-3 delta`
/// from its face. 2D: the 101 x 101 tensor grid.
pub fn evaluation_grid(dim: usize, layers: &[BlendDescriptor]) -> Result<PointSet> {
    let coords = match dim {
        1 => {
            let mut xs: Vec<f64> = (0..=1000).map(|k| k as f64 / 1000.0).collect();
            for layer in layers {
                let face = layer.distance.face();
                let inward = layer.distance.slope();
                for k in 0..LAYER_REFINEMENT {
                    let frac = k as f64 / (LAYER_REFINEMENT - 1) as f64;
                    let dist = 10.0 * layer.delta * 1e-4f64.powf(frac);
                    xs.push((face + inward * dist).clamp(0.0, 1.0));
                }
            }
            xs.sort_by(f64::total_cmp);
            xs.dedup();
            xs
        }
        2 => {
            let mut c = Vec::with_capacity(2 * 101 * 101);
            for i in 0..=100 {
                for j in 0..=100 {
                    c.extend_from_slice(&[i as f64 / 100.0, j as f64 / 100.0]);
                }
            }
            c
        }
        _ => return Err(Error::config(format!("evaluation grids support dim 1 or 2, got {dim}"))),
    };
    Ok(PointSet { dim, role: PointRole::EvaluationGrid, coords })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::BoundaryDistance;
    use proptest::prelude::*;

    #[test]
    fn uniform_examples() {
        assert_eq!(uniform_collocation_1d(3).unwrap().coords, vec![0.25, 0.5, 0.75]);
        let two = uniform_collocation_1d(2).unwrap().coords;
        assert!((two[0] - 1.0 / 3.0).abs() < 1e-15 && (two[1] - 2.0 / 3.0).abs() < 1e-15);
        let pts = uniform_collocation_1d(600).unwrap().coords;
        assert_eq!(pts.len(), 600);
        let worst = pts.windows(2).map(|w| (w[1] - w[0] - 1.0 / 601.0).abs()).fold(0.0, f64::max);
        assert!(worst <= 1e-12);
        assert!(pts[0] > 0.0 && pts[599] < 1.0);
        assert!(uniform_collocation_1d(1).is_err());
    }

    #[test]
    fn lhs_single_point() {
        let s = lhs_2d(1, 9).unwrap();
        assert_eq!(s.len(), 1);
        assert!(s.coords.iter().all(|&c| c > 0.0 && c < 1.0));
        assert!(lhs_2d(0, 9).is_err());
    }

    #[test]
    fn lhs_is_reproducible() {
        assert_eq!(lhs_2d(600, 42).unwrap(), lhs_2d(600, 42).unwrap());
        assert_ne!(lhs_2d(600, 42).unwrap(), lhs_2d(600, 43).unwrap());
    }

    proptest! {
        #[test]
        fn lhs_stratifies_every_axis(n in 1usize..200, seed in any::<u64>()) {
            let s = lhs_2d(n, seed).unwrap();
            for axis in 0..2 {
                let mut counts = vec![0usize; n];
                for p in s.iter() {
                    prop_assert!(p[axis] > 0.0 && p[axis] < 1.0);
                    counts[((p[axis] * n as f64) as usize).min(n - 1)] += 1;
                }
                prop_assert!(counts.iter().all(|&c| c == 1));
            }
        }
    }

    #[test]
    fn boundary_examples() {
        assert_eq!(boundary_points(1, 7).unwrap().coords, vec![0.0, 1.0]);
        let b = boundary_points(2, 2).unwrap();
        assert_eq!(b.len(), 8);
        assert!(b.iter().all(|p| p.iter().any(|&c| c == 0.0 || c == 1.0)));
        let b = boundary_points(2, 50).unwrap();
        assert_eq!(b.len(), 200);
        for p in b.iter() {
            let d = p[0].min(1.0 - p[0]).min(p[1]).min(1.0 - p[1]);
            assert_eq!(d, 0.0);
            assert!(p.iter().all(|c| (0.0..=1.0).contains(c)));
        }
        assert!(boundary_points(3, 2).is_err());
    }

    #[test]
    fn evaluation_grid_refines_layers() {
        let layer = BlendDescriptor::new(BoundaryDistance::upper(0), 1e-5).unwrap();
        let g = evaluation_grid(1, &[layer]).unwrap();
        assert_eq!(g.len(), 1001 + LAYER_REFINEMENT);
        assert!(g.coords.windows(2).all(|w| w[0] < w[1]));
        let inside = g.coords.iter().filter(|&&x| 1.0 - x > 0.0 && 1.0 - x <= 10e-5 * (1.0 + 1e-12)).count();
        assert_eq!(inside, LAYER_REFINEMENT);
        assert_eq!(evaluation_grid(2, &[]).unwrap().len(), 101 * 101);
    }
}
