//! Uniform Cartesian momentum grid and grid-sampled distribution functions
//! with trilinear off-grid evaluation (zero extension outside the box).

use serde::{Deserialize, Serialize};

/// Cell-centered grid over [−p_max, p_max]³: axis coordinate
/// x_i = −p_max + (i + 1/2)·spacing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentumGrid {
    pub n_per_axis: usize,
    pub p_max: f64,
}

impl MomentumGrid {
    pub fn new(n_per_axis: usize, p_max: f64) -> Self {
        assert!(n_per_axis > 0 && p_max > 0.0);
        MomentumGrid { n_per_axis, p_max }
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        2.0 * self.p_max / self.n_per_axis as f64
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n_per_axis * self.n_per_axis * self.n_per_axis
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn axis_coord(&self, i: usize) -> f64 {
        -self.p_max + (i as f64 + 0.5) * self.spacing()
    }

    #[inline]
    pub fn flat_index(&self, ijk: [usize; 3]) -> usize {
        (ijk[0] * self.n_per_axis + ijk[1]) * self.n_per_axis + ijk[2]
    }

    #[inline]
    pub fn unflatten(&self, idx: usize) -> [usize; 3] {
        let n = self.n_per_axis;
        [idx / (n * n), (idx / n) % n, idx % n]
    }

    #[inline]
    pub fn node(&self, idx: usize) -> [f64; 3] {
        let [i, j, k] = self.unflatten(idx);
        [self.axis_coord(i), self.axis_coord(j), self.axis_coord(k)]
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(3)
    }

    /// Iterator over (flat index, node position).
    pub fn nodes(&self) -> impl Iterator<Item = (usize, [f64; 3])> + '_ {
        (0..self.len()).map(move |idx| (idx, self.node(idx)))
    }
}

/// Nonnegative distribution values at the grid nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    pub grid: MomentumGrid,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(grid: MomentumGrid) -> Self {
        GridFunction {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_fn(grid: MomentumGrid, mut f: impl FnMut([f64; 3]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.node(i))).collect();
        GridFunction { grid, values }
    }

    #[inline]
    pub fn at(&self, ijk: [usize; 3]) -> f64 {
        self.values[self.grid.flat_index(ijk)]
    }

    /// Trilinear interpolation; 0 outside the grid box.
    #[inline]
    pub fn interp(&self, p: [f64; 3]) -> f64 {
        let n = self.grid.n_per_axis as isize;
        let dx = self.grid.spacing();
        let inv = 1.0 / dx;
        let mut i0 = [0isize; 3];
        let mut fr = [0.0f64; 3];
        for d in 0..3 {
            let u = (p[d] + self.grid.p_max) * inv - 0.5;
            let f = u.floor();
            i0[d] = f as isize;
            fr[d] = u - f;
            if i0[d] < -1 || i0[d] >= n {
                return 0.0;
            }
        }
        let nn = self.grid.n_per_axis;
        let mut acc = 0.0;
        for ci in 0..2isize {
            let ii = i0[0] + ci;
            if ii < 0 || ii >= n {
                continue;
            }
            let wi = if ci == 1 { fr[0] } else { 1.0 - fr[0] };
            for cj in 0..2isize {
                let jj = i0[1] + cj;
                if jj < 0 || jj >= n {
                    continue;
                }
                let wj = if cj == 1 { fr[1] } else { 1.0 - fr[1] };
                for ck in 0..2isize {
                    let kk = i0[2] + ck;
                    if kk < 0 || kk >= n {
                        continue;
                    }
                    let wk = if ck == 1 { fr[2] } else { 1.0 - fr[2] };
                    let v = self.values[(ii as usize * nn + jj as usize) * nn + kk as usize];
                    acc += wi * wj * wk * v;
                }
            }
        }
        acc
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    /// Total mass Σ f Δ³.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// Index bounding box of the strictly positive support, or None for a
    /// zero function.
    pub fn support_bbox(&self) -> Option<([usize; 3], [usize; 3])> {
        let mut lo = [usize::MAX; 3];
        let mut hi = [0usize; 3];
        let mut any = false;
        for (idx, &v) in self.values.iter().enumerate() {
            if v > 0.0 {
                any = true;
                let ijk = self.grid.unflatten(idx);
                for d in 0..3 {
                    lo[d] = lo[d].min(ijk[d]);
                    hi[d] = hi[d].max(ijk[d]);
                }
            }
        }
        if any {
            Some((lo, hi))
        } else {
            None
        }
    }
}

/// Monotone envelope φ(E) = max { f(node) : node energy ≥ E }, binned in E.
/// Used to bound the product f(p')f(q') along the collision sphere through
/// energy conservation p'⁰ + q'⁰ = p⁰ + q⁰ and so skip far-field cells whose
/// contribution is provably negligible.
#[derive(Clone, Debug)]
pub struct EnergyEnvelope {
    e_min: f64,
    de: f64,
    /// φ at bin edges, non-increasing.
    phi: Vec<f64>,
    /// One-cell interpolation margin already folded into the lookup.
    margin: f64,
}

impl EnergyEnvelope {
    pub fn build(f: &GridFunction) -> Self {
        let dx = f.grid.spacing();
        let de = (dx / 2.0).min(0.25);
        let p_max = f.grid.p_max;
        let e_max = (1.0 + 3.0 * p_max * p_max).sqrt();
        let nbins = ((e_max - 1.0) / de).ceil() as usize + 2;
        let mut phi = vec![0.0f64; nbins];
        for (idx, &v) in f.values.iter().enumerate() {
            if v > 0.0 {
                let p = f.grid.node(idx);
                let e = (1.0 + p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
                let b = (((e - 1.0) / de) as usize).min(nbins - 1);
                if v > phi[b] {
                    phi[b] = v;
                }
            }
        }
        // Suffix max: φ(E) covers all nodes with energy ≥ E.
        for b in (0..nbins - 1).rev() {
            phi[b] = phi[b].max(phi[b + 1]);
        }
        EnergyEnvelope {
            e_min: 1.0,
            de,
            phi,
            // Trilinear interpolation reads nodes up to one cell away; the
            // energy varies by at most √3·dx across that reach (|∇p⁰| ≤ 1).
            margin: 1.7321 * dx,
        }
    }

    /// Upper bound for f evaluated anywhere with energy ≥ e.
    #[inline]
    pub fn max_above(&self, e: f64) -> f64 {
        let e = e - self.margin;
        if e <= self.e_min {
            return self.phi[0];
        }
        let b = ((e - self.e_min) / self.de) as usize;
        if b >= self.phi.len() {
            0.0
        } else {
            self.phi[b]
        }
    }

    /// Upper bound for max over energy splits e1 + e2 = e_total (e1, e2 ≥ 1)
    /// of f(x1)·f(x2) with x_i of energy e_i. Uses the one-sided bound
    /// max(e1, e2) ≥ e_total/2.
    #[inline]
    pub fn pair_bound(&self, e_total: f64) -> f64 {
        self.max_above(e_total * 0.5) * self.phi[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn grid_geometry() {
        let g = MomentumGrid::new(12, 6.0);
        assert_relative_eq!(g.spacing(), 1.0);
        assert_relative_eq!(g.axis_coord(0), -5.5);
        assert_relative_eq!(g.axis_coord(11), 5.5);
        assert_eq!(g.len(), 1728);
        let idx = g.flat_index([3, 7, 11]);
        assert_eq!(g.unflatten(idx), [3, 7, 11]);
    }

    #[test]
    fn interp_reproduces_nodes_and_is_linear() {
        let g = MomentumGrid::new(8, 4.0);
        let f = GridFunction::from_fn(g, |p| 1.0 + 0.5 * p[0] - 0.25 * p[1] + 0.125 * p[2]);
        // Exact at nodes.
        for (idx, p) in g.nodes() {
            assert_relative_eq!(f.interp(p), f.values[idx], max_relative = 1e-12);
        }
        // Exact for affine functions strictly inside the node hull.
        let p = [0.37, -1.2, 2.01];
        assert_relative_eq!(
            f.interp(p),
            1.0 + 0.5 * p[0] - 0.25 * p[1] + 0.125 * p[2],
            max_relative = 1e-12
        );
        // Zero extension.
        assert_eq!(f.interp([5.0, 0.0, 0.0]), 0.0);
    }

    #[test]
    fn envelope_bounds_function() {
        let g = MomentumGrid::new(10, 5.0);
        let f = GridFunction::from_fn(g, |p| {
            (-(1.0 + p.iter().map(|x| x * x).sum::<f64>()).sqrt()).exp()
        });
        let env = EnergyEnvelope::build(&f);
        for (_, p) in g.nodes() {
            let e = (1.0 + p.iter().map(|x| x * x).sum::<f64>()).sqrt();
            assert!(env.max_above(e) >= (-e).exp() - 1e-15);
        }
        assert!(env.max_above(100.0) == 0.0);
    }
}
