//! Hard-ball scattering kernel, post-collision map, and quadrature
//! evaluation of the gain term Q⁺, loss term Q⁻ and collision frequency L
//! in the center-of-momentum representation.

use crate::grid::{EnergyEnvelope, GridFunction};
use crate::kinematics::{g_relative, lift, s_invariant, EnergyMomentum};
use rayon::prelude::*;

/// Hard-ball cross section σ(g, θ) = c_sigma · g (isotropic in θ).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScatterKernel {
    pub c_sigma: f64,
}

impl ScatterKernel {
    pub fn hard_ball(c_sigma: f64) -> Self {
        assert!(c_sigma > 0.0, "kernel constant must be positive");
        ScatterKernel { c_sigma }
    }

    #[inline]
    pub fn sigma(&self, g: f64) -> f64 {
        self.c_sigma * g
    }
}

impl Default for ScatterKernel {
    fn default() -> Self {
        ScatterKernel::hard_ball(1.0)
    }
}

/// Quadrature on S²: Gauss–Legendre in cos θ × uniform midpoints in
/// azimuth. Weights sum to 4π.
#[derive(Clone, Debug)]
pub struct SphereQuadrature {
    pub nodes: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

/// Gauss–Legendre nodes/weights on (−1, 1) by Newton iteration on P_n.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            // Evaluate P_n and P_n' by the three-term recurrence.
            let (mut p0, mut p1) = (1.0f64, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dxs = p1 / dp;
            x -= dxs;
            if dxs.abs() < 1e-15 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0f64, x);
        for k in 2..=n {
            let kf = k as f64;
            let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        xs[i] = x;
        ws[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (xs, ws)
}

impl SphereQuadrature {
    pub fn product(n_polar: usize, n_azimuth: usize) -> Self {
        assert!(n_polar > 0 && n_azimuth > 0);
        let (ct, wct) = gauss_legendre(n_polar);
        let dphi = 2.0 * std::f64::consts::PI / n_azimuth as f64;
        let mut nodes = Vec::with_capacity(n_polar * n_azimuth);
        let mut weights = Vec::with_capacity(n_polar * n_azimuth);
        for (c, wc) in ct.iter().zip(&wct) {
            let st = (1.0 - c * c).sqrt();
            for k in 0..n_azimuth {
                let phi = (k as f64 + 0.5) * dphi;
                nodes.push([st * phi.cos(), st * phi.sin(), *c]);
                weights.push(wc * dphi);
            }
        }
        SphereQuadrature { nodes, weights }
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Collapse the node set onto one representative per antipodal pair
    /// (doubled weight). Valid only for integrands invariant under
    /// ω → −ω, which holds for the gain term with a θ-independent kernel:
    /// the flip just exchanges p' and q'. Falls back to the full set when
    /// the nodes are not antipodally symmetric.
    fn antipodal_reduced(&self) -> Vec<([f64; 3], f64)> {
        let mut used = vec![false; self.nodes.len()];
        let mut out = Vec::with_capacity(self.nodes.len() / 2 + 1);
        for i in 0..self.nodes.len() {
            if used[i] {
                continue;
            }
            let ni = self.nodes[i];
            let mut partner = None;
            for j in i + 1..self.nodes.len() {
                if used[j] {
                    continue;
                }
                let nj = self.nodes[j];
                let d = (ni[0] + nj[0]).abs() + (ni[1] + nj[1]).abs() + (ni[2] + nj[2]).abs();
                if d < 1e-12 {
                    partner = Some(j);
                    break;
                }
            }
            match partner {
                Some(j) => {
                    used[i] = true;
                    used[j] = true;
                    out.push((ni, self.weights[i] + self.weights[j]));
                }
                None => {
                    // Not symmetric: give up and use the full set.
                    return self
                        .nodes
                        .iter()
                        .cloned()
                        .zip(self.weights.iter().cloned())
                        .collect();
                }
            }
        }
        out
    }
}

impl Default for SphereQuadrature {
    fn default() -> Self {
        SphereQuadrature::product(16, 16)
    }
}

/// Post-collision momenta
/// p' = (p+q)/2 + (g/2)(ω + (γ−1)(p+q)((p+q)·ω)/|p+q|²), q' = p + q − p',
/// with γ = (p⁰+q⁰)/√s. The |p+q| → 0 limit of the correction term is 0.
pub fn post_collision(
    p: EnergyMomentum,
    q: EnergyMomentum,
    omega: [f64; 3],
) -> (EnergyMomentum, EnergyMomentum) {
    let n2w = omega[0] * omega[0] + omega[1] * omega[1] + omega[2] * omega[2];
    assert!((n2w - 1.0).abs() < 1e-12, "omega must be a unit vector");
    let g = g_relative(p, q);
    let s = s_invariant(p, q);
    let gamma = (p.energy() + q.energy()) / s.sqrt();
    let pv = p.spatial();
    let qv = q.spatial();
    let tot = [pv[0] + qv[0], pv[1] + qv[1], pv[2] + qv[2]];
    let n2 = tot[0] * tot[0] + tot[1] * tot[1] + tot[2] * tot[2];
    let kappa = if n2 < 1e-24 {
        0.0
    } else {
        (gamma - 1.0) * (tot[0] * omega[0] + tot[1] * omega[1] + tot[2] * omega[2]) / n2
    };
    let mut pp = [0.0; 3];
    let mut qp = [0.0; 3];
    for d in 0..3 {
        let delta = 0.5 * g * (omega[d] + kappa * tot[d]);
        pp[d] = 0.5 * tot[d] + delta;
        qp[d] = 0.5 * tot[d] - delta;
    }
    (lift(pp), lift(qp))
}

/// Tuning knobs for the gain-term quadrature.
#[derive(Clone, Copy, Debug)]
pub struct GainOpts {
    /// The dq midpoint sum runs over a box q_box_factor × the grid box:
    /// momenta q outside the grid still scatter into it (p' + q' = p + q),
    /// and truncating dq to the grid box loses those contributions.
    pub q_box_factor: f64,
    /// Skip a dq cell when an energy-envelope bound proves its relative
    /// contribution is below this threshold.
    pub skip_rel: f64,
    /// Interpolate f at post-collision momenta with tricubic Lagrange
    /// stencils instead of trilinear ones. Fourth-order accurate on smooth
    /// states; negative overshoots are treated as zero.
    pub cubic: bool,
}

impl Default for GainOpts {
    fn default() -> Self {
        GainOpts {
            q_box_factor: 2.0,
            skip_rel: 1e-8,
            cubic: false,
        }
    }
}

/// Prebuilt per-state tables shared by all output nodes of one evaluation.
struct GainContext {
    env: EnergyEnvelope,
    fmax: f64,
    /// Support box in momentum coordinates, expanded by one interpolation
    /// cell on each side.
    sup_lo: [f64; 3],
    sup_hi: [f64; 3],
    /// Extended q-box axis coordinates (midpoints, spacing = grid spacing).
    q_coords: Vec<f64>,
    /// Grid values with a two-cell zero halo: interpolation of points with
    /// every |component| ≤ p_max + dx never indexes out of bounds and
    /// agrees exactly with the zero-extended GridFunction::interp.
    padded: Vec<f64>,
    np: usize,
    p_max: f64,
    /// Rejection radius; beyond it the interpolant is treated as zero.
    /// p_max + dx for the trilinear stencil (matching the zero-extended
    /// GridFunction::interp), p_max for the wider cubic stencil.
    r_cut: f64,
    inv_dx: f64,
    dx3: f64,
    cubic: bool,
}

impl GainContext {
    fn build(f: &GridFunction, opts: &GainOpts) -> Option<Self> {
        let (blo, bhi) = f.support_bbox()?;
        let g = f.grid;
        let dx = g.spacing();
        let sup_lo = [
            g.axis_coord(blo[0]) - dx,
            g.axis_coord(blo[1]) - dx,
            g.axis_coord(blo[2]) - dx,
        ];
        let sup_hi = [
            g.axis_coord(bhi[0]) + dx,
            g.axis_coord(bhi[1]) + dx,
            g.axis_coord(bhi[2]) + dx,
        ];
        let mq = (g.n_per_axis as f64 * opts.q_box_factor).round() as usize;
        let half = mq as f64 * dx / 2.0;
        let q_coords = (0..mq).map(|i| -half + (i as f64 + 0.5) * dx).collect();
        let n = g.n_per_axis;
        let np = n + 4;
        let mut padded = vec![0.0; np * np * np];
        for i in 0..n {
            for j in 0..n {
                let src = (i * n + j) * n;
                let dst = ((i + 2) * np + (j + 2)) * np + 2;
                padded[dst..dst + n].copy_from_slice(&f.values[src..src + n]);
            }
        }
        Some(GainContext {
            env: EnergyEnvelope::build(f),
            fmax: f.max_value(),
            sup_lo,
            sup_hi,
            q_coords,
            padded,
            np,
            p_max: g.p_max,
            r_cut: if opts.cubic { g.p_max } else { g.p_max + dx },
            inv_dx: 1.0 / dx,
            dx3: g.cell_volume(),
            cubic: opts.cubic,
        })
    }

    /// Trilinear interpolation; caller guarantees |p_d| ≤ r_cut for all d.
    #[inline(always)]
    fn interp_in(&self, p: [f64; 3]) -> f64 {
        let np = self.np;
        let u0 = (p[0] + self.p_max) * self.inv_dx - 0.5;
        let u1 = (p[1] + self.p_max) * self.inv_dx - 0.5;
        let u2 = (p[2] + self.p_max) * self.inv_dx - 0.5;
        let f0 = u0.floor();
        let f1 = u1.floor();
        let f2 = u2.floor();
        let (a0, a1, a2) = (u0 - f0, u1 - f1, u2 - f2);
        // Halo shift: padded index = grid index + 2, and f_d ≥ −2.
        let i = (f0 + 2.0) as usize;
        let j = (f1 + 2.0) as usize;
        let k = (f2 + 2.0) as usize;
        let base = (i * np + j) * np + k;
        let v = &self.padded;
        let c00 = v[base] * (1.0 - a2) + v[base + 1] * a2;
        let c01 = v[base + np] * (1.0 - a2) + v[base + np + 1] * a2;
        let c10 = v[base + np * np] * (1.0 - a2) + v[base + np * np + 1] * a2;
        let c11 = v[base + np * np + np] * (1.0 - a2) + v[base + np * np + np + 1] * a2;
        let c0 = c00 * (1.0 - a1) + c01 * a1;
        let c1 = c10 * (1.0 - a1) + c11 * a1;
        c0 * (1.0 - a0) + c1 * a0
    }

    /// 1D cubic Lagrange weights on nodes {−1, 0, 1, 2} at fraction a.
    #[inline(always)]
    fn cubic_weights(a: f64) -> [f64; 4] {
        let am = a - 1.0;
        let ap = a + 1.0;
        let a2 = a - 2.0;
        [
            -a * am * a2 / 6.0,
            ap * am * a2 / 2.0,
            -ap * a * a2 / 2.0,
            ap * a * am / 6.0,
        ]
    }

    /// Tricubic Lagrange interpolation; caller guarantees |p_d| ≤ p_max.
    #[inline(always)]
    fn interp_cubic(&self, p: [f64; 3]) -> f64 {
        let np = self.np;
        let u0 = (p[0] + self.p_max) * self.inv_dx - 0.5;
        let u1 = (p[1] + self.p_max) * self.inv_dx - 0.5;
        let u2 = (p[2] + self.p_max) * self.inv_dx - 0.5;
        let f0 = u0.floor();
        let f1 = u1.floor();
        let f2 = u2.floor();
        let wx = Self::cubic_weights(u0 - f0);
        let wy = Self::cubic_weights(u1 - f1);
        let wz = Self::cubic_weights(u2 - f2);
        // Stencil start: grid index f − 1, halo shift +2 → f + 1 ≥ 0.
        let i = (f0 + 1.0) as usize;
        let j = (f1 + 1.0) as usize;
        let k = (f2 + 1.0) as usize;
        let v = &self.padded;
        let mut acc = 0.0;
        for (di, &wxi) in wx.iter().enumerate() {
            let mut py = 0.0;
            for (dj, &wyj) in wy.iter().enumerate() {
                let base = ((i + di) * np + (j + dj)) * np + k;
                let row = &v[base..base + 4];
                py += wyj
                    * (row[0] * wz[0] + row[1] * wz[1] + row[2] * wz[2] + row[3] * wz[3]);
            }
            acc += wxi * py;
        }
        acc
    }

    #[inline(always)]
    fn sample(&self, p: [f64; 3]) -> f64 {
        if self.cubic {
            self.interp_cubic(p)
        } else {
            self.interp_in(p)
        }
    }

    /// Q⁺(f, f)(p): midpoint sum over the extended q-box × sphere
    /// quadrature (antipodally reduced node list).
    fn gain_at(
        &self,
        pv: [f64; 3],
        kernel: &ScatterKernel,
        omegas: &[([f64; 3], f64)],
        opts: &GainOpts,
    ) -> f64 {
        let p0 = (1.0 + pv[0] * pv[0] + pv[1] * pv[1] + pv[2] * pv[2]).sqrt();
        let four_pi = 4.0 * std::f64::consts::PI;
        let skip_abs = opts.skip_rel * self.fmax * self.fmax;
        let pm = self.r_cut;
        let mut gain = 0.0;
        for &qx in &self.q_coords {
            let tx = pv[0] + qx;
            if tx < 2.0 * self.sup_lo[0] || tx > 2.0 * self.sup_hi[0] {
                continue;
            }
            for &qy in &self.q_coords {
                let ty = pv[1] + qy;
                if ty < 2.0 * self.sup_lo[1] || ty > 2.0 * self.sup_hi[1] {
                    continue;
                }
                for &qz in &self.q_coords {
                    let tz = pv[2] + qz;
                    if tz < 2.0 * self.sup_lo[2] || tz > 2.0 * self.sup_hi[2] {
                        continue;
                    }
                    let q0 = (1.0 + qx * qx + qy * qy + qz * qz).sqrt();
                    let mdot = -p0 * q0 + pv[0] * qx + pv[1] * qy + pv[2] * qz;
                    let g2 = 2.0 * (-mdot - 1.0);
                    if g2 <= 0.0 {
                        continue;
                    }
                    let g = g2.sqrt();
                    let rs = (g2 + 4.0).sqrt();
                    let vphi = g * rs / (p0 * q0);
                    let sigma = kernel.sigma(g);
                    if vphi * sigma * four_pi * self.env.pair_bound(p0 + q0) <= skip_abs {
                        continue;
                    }
                    let n2 = tx * tx + ty * ty + tz * tz;
                    let gamma = (p0 + q0) / rs;
                    let kap = if n2 < 1e-24 { 0.0 } else { (gamma - 1.0) / n2 };
                    let (hx, hy, hz) = (0.5 * tx, 0.5 * ty, 0.5 * tz);
                    let ghalf = 0.5 * g;
                    let mut acc = 0.0;
                    for &(om, w) in omegas {
                        let c = kap * (tx * om[0] + ty * om[1] + tz * om[2]);
                        let dxw = ghalf * (om[0] + c * tx);
                        let dyw = ghalf * (om[1] + c * ty);
                        let dzw = ghalf * (om[2] + c * tz);
                        let pp = [hx + dxw, hy + dyw, hz + dzw];
                        if pp[0].abs() > pm || pp[1].abs() > pm || pp[2].abs() > pm {
                            continue;
                        }
                        let f1 = self.sample(pp);
                        if f1 <= 0.0 {
                            continue;
                        }
                        let qp = [hx - dxw, hy - dyw, hz - dzw];
                        if qp[0].abs() > pm || qp[1].abs() > pm || qp[2].abs() > pm {
                            continue;
                        }
                        let f2 = self.sample(qp);
                        if f2 > 0.0 {
                            acc += w * f1 * f2;
                        }
                    }
                    gain += self.dx3 * vphi * sigma * acc;
                }
            }
        }
        gain
    }
}

/// Gain term Q⁺(f,f)(p) with default quadrature options.
pub fn q_gain(
    f: &GridFunction,
    p: EnergyMomentum,
    kernel: &ScatterKernel,
    sq: &SphereQuadrature,
) -> f64 {
    q_gain_opts(f, p, kernel, sq, &GainOpts::default())
}

pub fn q_gain_opts(
    f: &GridFunction,
    p: EnergyMomentum,
    kernel: &ScatterKernel,
    sq: &SphereQuadrature,
    opts: &GainOpts,
) -> f64 {
    match GainContext::build(f, opts) {
        Some(ctx) => ctx.gain_at(p.spatial(), kernel, &sq.antipodal_reduced(), opts),
        None => 0.0,
    }
}

/// Collision frequency Lf(p) = ∫ v_φ σ f(q) dω dq (midpoint dq sum over the
/// grid, sphere integral of the θ-independent kernel).
pub fn linear_l(
    f: &GridFunction,
    p: EnergyMomentum,
    kernel: &ScatterKernel,
    sq: &SphereQuadrature,
) -> f64 {
    linear_l_at(f, p.spatial(), kernel, sq.total_weight())
}

fn linear_l_at(f: &GridFunction, pv: [f64; 3], kernel: &ScatterKernel, sphere_w: f64) -> f64 {
    let p0 = (1.0 + pv[0] * pv[0] + pv[1] * pv[1] + pv[2] * pv[2]).sqrt();
    let mut acc = 0.0;
    for (idx, qv) in f.grid.nodes() {
        let fq = f.values[idx];
        if fq <= 0.0 {
            continue;
        }
        let q0 = (1.0 + qv[0] * qv[0] + qv[1] * qv[1] + qv[2] * qv[2]).sqrt();
        let mdot = -p0 * q0 + pv[0] * qv[0] + pv[1] * qv[1] + pv[2] * qv[2];
        let g2 = 2.0 * (-mdot - 1.0);
        if g2 <= 0.0 {
            continue;
        }
        let g = g2.sqrt();
        let vphi = g * (g2 + 4.0).sqrt() / (p0 * q0);
        acc += fq * vphi * kernel.sigma(g);
    }
    acc * f.grid.cell_volume() * sphere_w
}

/// Collision frequency Lf at every grid node (parallel).
pub fn linear_l_full(f: &GridFunction, kernel: &ScatterKernel, sq: &SphereQuadrature) -> GridFunction {
    let sphere_w = sq.total_weight();
    let values = (0..f.grid.len())
        .into_par_iter()
        .map(|idx| linear_l_at(f, f.grid.node(idx), kernel, sphere_w))
        .collect();
    GridFunction {
        grid: f.grid,
        values,
    }
}

/// Loss term Q⁻(f,f)(p) = f(p)·Lf(p).
pub fn q_loss(
    f: &GridFunction,
    p: EnergyMomentum,
    kernel: &ScatterKernel,
    sq: &SphereQuadrature,
) -> f64 {
    f.interp(p.spatial()) * linear_l(f, p, kernel, sq)
}

/// Q(f,f) = Q⁺ − Q⁻ at a subset of grid nodes (parallel over nodes).
pub fn collide_nodes(
    f: &GridFunction,
    kernel: &ScatterKernel,
    sq: &SphereQuadrature,
    opts: &GainOpts,
    nodes: &[usize],
) -> Vec<f64> {
    let ctx = match GainContext::build(f, opts) {
        Some(c) => c,
        None => return vec![0.0; nodes.len()],
    };
    let sphere_w = sq.total_weight();
    let omegas = sq.antipodal_reduced();
    nodes
        .par_iter()
        .map(|&idx| {
            let pv = f.grid.node(idx);
            let gain = ctx.gain_at(pv, kernel, &omegas, opts);
            let loss = f.values[idx] * linear_l_at(f, pv, kernel, sphere_w);
            gain - loss
        })
        .collect()
}

/// Q(f,f) at every grid node.
pub fn collide_full(
    f: &GridFunction,
    kernel: &ScatterKernel,
    sq: &SphereQuadrature,
    opts: &GainOpts,
) -> GridFunction {
    let nodes: Vec<usize> = (0..f.grid.len()).collect();
    GridFunction {
        grid: f.grid,
        values: collide_nodes(f, kernel, sq, opts, &nodes),
    }
}

/// Gain and collision frequency together (one context build), as needed by
/// the exponential-Euler step.
pub fn gain_and_l(
    f: &GridFunction,
    kernel: &ScatterKernel,
    sq: &SphereQuadrature,
    opts: &GainOpts,
) -> (GridFunction, GridFunction) {
    let grid = f.grid;
    let sphere_w = sq.total_weight();
    let ctx = GainContext::build(f, opts);
    let omegas = sq.antipodal_reduced();
    let pairs: Vec<(f64, f64)> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let pv = grid.node(idx);
            let gain = match &ctx {
                Some(c) => c.gain_at(pv, kernel, &omegas, opts),
                None => 0.0,
            };
            (gain, linear_l_at(f, pv, kernel, sphere_w))
        })
        .collect();
    let (gains, ls) = pairs.into_iter().unzip();
    (
        GridFunction {
            grid,
            values: gains,
        },
        GridFunction { grid, values: ls },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::{g_relative, lift, s_invariant};
    use approx::assert_relative_eq;

    #[test]
    fn sphere_quadrature_weights() {
        let sq = SphereQuadrature::product(16, 16);
        assert_relative_eq!(sq.total_weight(), 4.0 * std::f64::consts::PI, max_relative = 1e-12);
        // Degree-3 spherical polynomials integrate exactly (odd → 0,
        // ∫ z² dω = 4π/3).
        let mut z2 = 0.0;
        let mut xyz = 0.0;
        for (n, w) in sq.nodes.iter().zip(&sq.weights) {
            z2 += w * n[2] * n[2];
            xyz += w * n[0] * n[1] * n[2];
        }
        assert_relative_eq!(z2, 4.0 * std::f64::consts::PI / 3.0, max_relative = 1e-10);
        assert!(xyz.abs() < 1e-12);
    }

    #[test]
    fn post_collision_examples() {
        // Head-on collision: p+q = 0, g = 2, outgoing pair along ω.
        let p = lift([1.0, 0.0, 0.0]);
        let q = lift([-1.0, 0.0, 0.0]);
        let (pp, qp) = post_collision(p, q, [0.0, 0.0, 1.0]);
        assert_relative_eq!(pp.spatial()[2], 1.0, max_relative = 1e-12);
        assert_relative_eq!(qp.spatial()[2], -1.0, max_relative = 1e-12);
        // p = q: g = 0, pair unchanged.
        let (pp, qp) = post_collision(p, p, [0.0, 1.0, 0.0]);
        assert_relative_eq!(pp.spatial()[0], 1.0, max_relative = 1e-12);
        assert_relative_eq!(qp.spatial()[0], 1.0, max_relative = 1e-12);
    }

    #[test]
    fn post_collision_conserves() {
        let p = lift([0.8, -0.3, 2.1]);
        let q = lift([-1.4, 0.9, 0.2]);
        let om = {
            let v: [f64; 3] = [0.3, -0.5, 0.81];
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            [v[0] / n, v[1] / n, v[2] / n]
        };
        let (pp, qp) = post_collision(p, q, om);
        assert_relative_eq!(
            pp.energy() + qp.energy(),
            p.energy() + q.energy(),
            max_relative = 1e-12
        );
        for d in 0..3 {
            assert_relative_eq!(
                pp.spatial()[d] + qp.spatial()[d],
                p.spatial()[d] + q.spatial()[d],
                epsilon = 1e-12
            );
        }
        assert_relative_eq!(g_relative(pp, qp), g_relative(p, q), max_relative = 1e-9);
        assert_relative_eq!(s_invariant(pp, qp), s_invariant(p, q), max_relative = 1e-9);
        // Explicit microscopic energy formula
        // p'⁰ = (p⁰+q⁰)/2 + (g/(2√s))·ω·(p+q).
        let g = g_relative(p, q);
        let s = s_invariant(p, q);
        let tot = [
            p.spatial()[0] + q.spatial()[0],
            p.spatial()[1] + q.spatial()[1],
            p.spatial()[2] + q.spatial()[2],
        ];
        let omdot = om[0] * tot[0] + om[1] * tot[1] + om[2] * tot[2];
        let e_formula = 0.5 * (p.energy() + q.energy()) + 0.5 * g / s.sqrt() * omdot;
        assert_relative_eq!(pp.energy(), e_formula, max_relative = 1e-10);
    }

    #[test]
    fn gain_loss_zero_function() {
        let grid = crate::grid::MomentumGrid::new(6, 3.0);
        let f = crate::grid::GridFunction::zeros(grid);
        let kernel = ScatterKernel::default();
        let sq = SphereQuadrature::product(4, 4);
        let p = lift([0.5, 0.0, 0.0]);
        assert_eq!(q_gain(&f, p, &kernel, &sq), 0.0);
        assert_eq!(q_loss(&f, p, &kernel, &sq), 0.0);
        assert_eq!(linear_l(&f, p, &kernel, &sq), 0.0);
    }

    #[test]
    fn point_mass_linear_l() {
        // Single-cell mass m: Lf(p) ≈ m·v_φ·σ(g)·4π.
        let grid = crate::grid::MomentumGrid::new(6, 3.0);
        let mut f = crate::grid::GridFunction::zeros(grid);
        let idx = grid.flat_index([1, 2, 3]);
        f.values[idx] = 2.5;
        let q0v = grid.node(idx);
        let kernel = ScatterKernel::hard_ball(1.3);
        let sq = SphereQuadrature::product(8, 8);
        let p = lift([1.0, -0.5, 0.25]);
        let q = lift(q0v);
        let m = 2.5 * grid.cell_volume();
        let expect =
            m * crate::kinematics::moller_velocity(p, q) * kernel.sigma(g_relative(p, q))
                * 4.0
                * std::f64::consts::PI;
        assert_relative_eq!(linear_l(&f, p, &kernel, &sq), expect, max_relative = 1e-10);
        // q_loss = f(p)·L identity.
        let pn = lift(grid.node(17));
        assert_relative_eq!(
            q_loss(&f, pn, &kernel, &sq),
            f.interp(pn.spatial()) * linear_l(&f, pn, &kernel, &sq),
            max_relative = 1e-12
        );
    }

    #[test]
    fn gain_positive_and_far_support_zero() {
        let grid = crate::grid::MomentumGrid::new(8, 4.0);
        let f = crate::grid::GridFunction::from_fn(grid, |p| {
            (-(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]) / 0.8).exp()
        });
        let kernel = ScatterKernel::default();
        let sq = SphereQuadrature::product(6, 6);
        let g = q_gain(&f, lift([0.5, 0.0, 0.0]), &kernel, &sq);
        assert!(g > 0.0);
        // Indicator far from p with outcomes never reaching the support:
        // a single cell at the corner, evaluated at the opposite corner.
        let mut ind = crate::grid::GridFunction::zeros(grid);
        ind.values[grid.flat_index([0, 0, 0])] = 1.0;
        let gfar = q_gain(&ind, lift([3.5, 3.5, 3.5]), &kernel, &sq);
        assert_eq!(gfar, 0.0);
    }
}
