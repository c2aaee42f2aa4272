//! Jüttner (relativistic Maxwellian) distributions, modified Bessel
//! functions of the second kind, moment tensors, and fitting equilibrium
//! parameters from conserved moments.

use crate::grid::{GridFunction, MomentumGrid};
use crate::kinematics::{lift, minkowski_dot, EnergyMomentum, FourVector};
use crate::linalg;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EqError {
    #[error("invalid argument: {0}")]
    BadArgument(String),
    #[error("unphysical moment set: {0}")]
    Unphysical(String),
    #[error("moment matching did not converge; residual {residual:e}")]
    NoConvergence { residual: f64 },
}

/// Modified Bessel function of the second kind K_j(z) for j = 0..4,
/// evaluated as
/// K_j(z) = (2^j j!/(2j)!) z^j ∫₀^∞ e^{−z cosh t} sinh^{2j} t dt
/// (the cosh substitution of the λ-integral form), by step-halving
/// trapezoid quadrature. The substituted integrand is smooth and even, so
/// the trapezoid rule converges geometrically.
///
/// For z > 700 the result underflows f64 and 0 is returned.
pub fn bessel_k(j: usize, z: f64) -> Result<f64, EqError> {
    if j > 4 {
        return Err(EqError::BadArgument(format!("bessel order {j} > 4")));
    }
    if !(z > 0.0) {
        return Err(EqError::BadArgument(format!("bessel argument {z} <= 0")));
    }
    if z > 700.0 {
        return Ok(0.0);
    }
    // c_j = 2^j j! / (2j)!
    const C: [f64; 5] = [
        1.0,
        2.0 / 2.0,
        4.0 * 2.0 / 24.0,
        8.0 * 6.0 / 720.0,
        16.0 * 24.0 / 40320.0,
    ];
    let integrate = |h: f64| -> f64 {
        let mut total = if j == 0 { 0.5 * (-z).exp() } else { 0.0 };
        let mut t = h;
        loop {
            let e = -z * t.cosh();
            if e < -745.0 {
                break;
            }
            let term = e.exp() * t.sinh().powi(2 * j as i32);
            total += term;
            if t > 1.0 && term < 1e-320 {
                break;
            }
            t += h;
        }
        total * h
    };
    let mut h = 0.2;
    let mut prev = integrate(h);
    for _ in 0..8 {
        h *= 0.5;
        let cur = integrate(h);
        if (cur - prev).abs() <= 1e-13 * cur.abs() {
            prev = cur;
            break;
        }
        prev = cur;
    }
    Ok(C[j] * z.powi(j as i32) * prev)
}

/// Parameters (n, θ, u^μ) of a relativistic Maxwellian. `theta` stores the
/// product k_B·θ (k_B is fixed to 1: the distribution only ever depends on
/// that combination).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct JuttnerParams {
    pub n: f64,
    pub theta: f64,
    pub u: [f64; 4],
}

impl JuttnerParams {
    /// Build from density, temperature and spatial bulk velocity u⃗
    /// (the four-velocity is the mass-shell lift of u⃗).
    pub fn new(n: f64, theta: f64, u_spatial: [f64; 3]) -> Result<Self, EqError> {
        if !(n > 0.0) || !(theta > 0.0) {
            return Err(EqError::BadArgument(format!(
                "need n > 0 and theta > 0, got n = {n}, theta = {theta}"
            )));
        }
        let u4 = lift(u_spatial).four();
        Ok(JuttnerParams {
            n,
            theta,
            u: u4.0,
        })
    }

    pub fn u_four(&self) -> FourVector {
        FourVector(self.u)
    }

    /// The prefactor n / (4π kθ K₂(1/kθ)).
    pub fn normalization(&self) -> f64 {
        let z = 1.0 / self.theta;
        let k2 = bessel_k(2, z).expect("valid theta");
        self.n / (4.0 * std::f64::consts::PI * self.theta * k2)
    }
}

/// J(p) = n/(4π kθ K₂(1/kθ)) · exp(p^κ u_κ / kθ).
pub fn juttner_eval(params: &JuttnerParams, p: EnergyMomentum) -> f64 {
    params.normalization() * (minkowski_dot(p.four(), params.u_four()) / params.theta).exp()
}

/// Sample J at every grid node (normalization computed once).
pub fn juttner_on_grid(params: &JuttnerParams, grid: MomentumGrid) -> GridFunction {
    let norm = params.normalization();
    let u = params.u_four();
    let inv_theta = 1.0 / params.theta;
    GridFunction::from_fn(grid, |pv| {
        let p = lift(pv);
        norm * (minkowski_dot(p.four(), u) * inv_theta).exp()
    })
}

/// Conserved moments: particle number I⁰[h] and the energy-momentum column
/// T^{μ0}[h] = ∫ p^μ h dp.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentSet {
    pub i0: f64,
    pub t00: f64,
    pub t10: f64,
    pub t20: f64,
    pub t30: f64,
}

impl MomentSet {
    pub fn spatial(&self) -> [f64; 3] {
        [self.t10, self.t20, self.t30]
    }

    /// Physicality: I0 > 0, T00 ≥ I0, |T^{i0}| < T00.
    pub fn check(&self) -> Result<(), EqError> {
        if !(self.i0 > 0.0) {
            return Err(EqError::Unphysical(format!("I0 = {} must be > 0", self.i0)));
        }
        if self.t00 < self.i0 {
            return Err(EqError::Unphysical(format!(
                "T00 = {} below I0 = {} (p0 >= 1)",
                self.t00, self.i0
            )));
        }
        let tv = self.spatial();
        let tn = (tv[0] * tv[0] + tv[1] * tv[1] + tv[2] * tv[2]).sqrt();
        if tn >= self.t00 {
            return Err(EqError::Unphysical(format!(
                "|T^(i0)| = {tn} not below T00 = {}",
                self.t00
            )));
        }
        Ok(())
    }
}

/// Grid quadrature of the conserved moments of h.
pub fn moments(h: &GridFunction) -> MomentSet {
    let vol = h.grid.cell_volume();
    let mut i0 = 0.0;
    let mut t = [0.0f64; 4];
    for (idx, pv) in h.grid.nodes() {
        let v = h.values[idx];
        if v == 0.0 {
            continue;
        }
        let p0 = (1.0 + pv[0] * pv[0] + pv[1] * pv[1] + pv[2] * pv[2]).sqrt();
        i0 += v;
        t[0] += p0 * v;
        t[1] += pv[0] * v;
        t[2] += pv[1] * v;
        t[3] += pv[2] * v;
    }
    MomentSet {
        i0: i0 * vol,
        t00: t[0] * vol,
        t10: t[1] * vol,
        t20: t[2] * vol,
        t30: t[3] * vol,
    }
}

/// K₁(1/kθ)/K₂(1/kθ) + 4kθ (enthalpy per particle) and its kθ-derivative.
fn enthalpy(ktheta: f64) -> (f64, f64) {
    let z = 1.0 / ktheta;
    let k0 = bessel_k(0, z).unwrap();
    let k1 = bessel_k(1, z).unwrap();
    let k2 = bessel_k(2, z).unwrap();
    let k3 = bessel_k(3, z).unwrap();
    let r = k1 / k2;
    // K_j'(z) = −(K_{j−1} + K_{j+1})/2; d/dkθ = −z² d/dz.
    let dk1 = -(k0 + k2) / 2.0;
    let dk2 = -(k1 + k3) / 2.0;
    let dr_dz = (dk1 * k2 - k1 * dk2) / (k2 * k2);
    (r + 4.0 * ktheta, -z * z * dr_dz + 4.0)
}

/// Analytic Jüttner moments:
/// I⁰[J] = n u⁰, T^{μ0}[J] = n·h(kθ)·u^μ u⁰ + kθ n η^{μ0}.
pub fn juttner_moments(params: &JuttnerParams) -> MomentSet {
    let (h, _) = enthalpy(params.theta);
    let u = params.u;
    let n = params.n;
    MomentSet {
        i0: n * u[0],
        t00: n * h * u[0] * u[0] - params.theta * n,
        t10: n * h * u[1] * u[0],
        t20: n * h * u[2] * u[0],
        t30: n * h * u[3] * u[0],
    }
}

/// Recover (n, kθ, u) from a conserved-moment set: five equations, five
/// unknowns. Bracketing scan for kθ at the moment-velocity initial guess,
/// then damped Newton with the analytic Jacobian.
pub fn fit_juttner(m: &MomentSet) -> Result<JuttnerParams, EqError> {
    m.check()?;
    // Initial guess: bulk velocity from T^{i0}/T00, boosted to u = γv.
    let v = [m.t10 / m.t00, m.t20 / m.t00, m.t30 / m.t00];
    let v2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    let gamma = 1.0 / (1.0 - v2).sqrt();
    let mut u = [gamma * v[0], gamma * v[1], gamma * v[2]];
    let mut u0 = (1.0 + u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
    let mut n = m.i0 / u0;
    // Bracketing scan for kθ: F(kθ) = n h(kθ) (u⁰)² − kθ n − T00 is
    // monotone increasing.
    let eval_f = |kt: f64, n: f64, u0: f64| enthalpy(kt).0 * n * u0 * u0 - kt * n - m.t00;
    let (mut lo, mut hi) = (1e-3, 1e3);
    if eval_f(lo, n, u0) > 0.0 || eval_f(hi, n, u0) < 0.0 {
        return Err(EqError::Unphysical(
            "temperature outside [1e-3, 1e3]".into(),
        ));
    }
    for _ in 0..60 {
        let mid = (lo * hi).sqrt();
        if eval_f(mid, n, u0) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut kt = (lo * hi).sqrt();
    let scale = [m.i0, m.t00, m.t00, m.t00, m.t00];
    let mut last_res = f64::INFINITY;
    for _ in 0..100 {
        let (h, dh) = enthalpy(kt);
        let r = [
            n * u0 - m.i0,
            n * h * u[0] * u0 - m.t10,
            n * h * u[1] * u0 - m.t20,
            n * h * u[2] * u0 - m.t30,
            n * h * u0 * u0 - kt * n - m.t00,
        ];
        last_res = r
            .iter()
            .zip(&scale)
            .map(|(ri, s)| (ri / s).abs())
            .fold(0.0, f64::max);
        if last_res < 1e-13 {
            let params = JuttnerParams::new(n, kt, u)?;
            return Ok(params);
        }
        // Jacobian in x = (n, kθ, u¹, u², u³).
        let mut jac = vec![vec![0.0; 5]; 5];
        jac[0][0] = u0;
        for j in 0..3 {
            jac[0][2 + j] = n * u[j] / u0;
        }
        for i in 0..3 {
            jac[1 + i][0] = h * u[i] * u0;
            jac[1 + i][1] = n * dh * u[i] * u0;
            for j in 0..3 {
                jac[1 + i][2 + j] =
                    n * h * (if i == j { u0 } else { 0.0 } + u[i] * u[j] / u0);
            }
        }
        jac[4][0] = h * u0 * u0 - kt;
        jac[4][1] = n * dh * u0 * u0 - n;
        for j in 0..3 {
            jac[4][2 + j] = 2.0 * n * h * u[j];
        }
        let step = match linalg::solve(&jac, &r) {
            Some(s) => s,
            None => return Err(EqError::NoConvergence { residual: last_res }),
        };
        // Damp so n and kθ stay positive.
        let mut lambda = 1.0;
        while n - lambda * step[0] <= 0.0 || kt - lambda * step[1] <= 0.0 {
            lambda *= 0.5;
            if lambda < 1e-8 {
                return Err(EqError::NoConvergence { residual: last_res });
            }
        }
        n -= lambda * step[0];
        kt -= lambda * step[1];
        for j in 0..3 {
            u[j] -= lambda * step[2 + j];
        }
        u0 = (1.0 + u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
    }
    Err(EqError::NoConvergence { residual: last_res })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn bessel_golden_and_recurrence() {
        // Reference values from an independent high-resolution quadrature.
        assert_relative_eq!(bessel_k(0, 1.0).unwrap(), 0.42102443824070834, max_relative = 1e-11);
        assert_relative_eq!(bessel_k(1, 1.0).unwrap(), 0.6019072301972346, max_relative = 1e-11);
        assert_relative_eq!(bessel_k(2, 1.0).unwrap(), 1.6248388986351774, max_relative = 1e-11);
        // Recurrence K_{j+1} = K_{j−1} + (2j/z) K_j on a log grid.
        for i in 0..=30 {
            let z = 0.1 * (500.0f64).powf(i as f64 / 30.0);
            for j in 1..=3usize {
                let km = bessel_k(j - 1, z).unwrap();
                let kc = bessel_k(j, z).unwrap();
                let kp = bessel_k(j + 1, z).unwrap();
                let resid = (kp - km - 2.0 * j as f64 / z * kc).abs() / kp;
                assert!(resid < 1e-10, "recurrence residual {resid} at j={j} z={z}");
            }
        }
        // Asymptotics: K_j(z)e^z√z → √(π/2).
        let target = (std::f64::consts::PI / 2.0).sqrt();
        let v = bessel_k(1, 50.0).unwrap() * 50f64.exp() * 50f64.sqrt();
        assert!((v - target).abs() / target < 0.01);
        assert!(bessel_k(0, -1.0).is_err());
        assert!(bessel_k(5, 1.0).is_err());
        assert_eq!(bessel_k(2, 800.0).unwrap(), 0.0);
    }

    #[test]
    fn juttner_rest_frame_value() {
        // n = 4π K₂(1), kθ = 1: value at p = 0 is e^{−1}.
        let k2 = bessel_k(2, 1.0).unwrap();
        let params = JuttnerParams::new(4.0 * std::f64::consts::PI * k2, 1.0, [0.0; 3]).unwrap();
        let v = juttner_eval(&params, lift([0.0; 3]));
        assert_relative_eq!(v, (-1.0f64).exp(), max_relative = 1e-11);
    }

    #[test]
    fn juttner_lorentz_invariance() {
        // p^κ u_κ is a scalar: evaluating with boosted (u, p) is invariant.
        let params = JuttnerParams::new(1.3, 0.7, [0.2, -0.1, 0.4]).unwrap();
        let p = lift([0.5, 1.0, -0.3]);
        let base = juttner_eval(&params, p);
        let bp = crate::kinematics::lift([0.0, 0.6, 0.0]);
        let bq = crate::kinematics::lift([0.0, -0.6, 0.0]);
        let lam = crate::kinematics::com_boost(bp, bq).unwrap();
        let up = lam.apply(params.u_four());
        let pp = lam.apply(p.four());
        let params_b = JuttnerParams {
            n: params.n,
            theta: params.theta,
            u: up.0,
        };
        let boosted = juttner_eval(&params_b, lift(pp.spatial()));
        assert_relative_eq!(base, boosted, max_relative = 1e-9);
    }

    #[test]
    fn moments_point_mass() {
        let grid = MomentumGrid::new(6, 3.0);
        let mut h = GridFunction::zeros(grid);
        // Node nearest the origin is off-center for even n; use any node.
        let idx = grid.flat_index([3, 3, 3]);
        h.values[idx] = 2.0;
        let pv = grid.node(idx);
        let m = moments(&h);
        let mass = 2.0 * grid.cell_volume();
        assert_relative_eq!(m.i0, mass, max_relative = 1e-12);
        assert_relative_eq!(m.t10, pv[0] * mass, max_relative = 1e-12);
    }

    #[test]
    fn rest_frame_t00_identity() {
        // T00 = n(K₁/K₂ + 3kθ) at rest.
        let params = JuttnerParams::new(2.0, 1.0, [0.0; 3]).unwrap();
        let m = juttner_moments(&params);
        let k1 = bessel_k(1, 1.0).unwrap();
        let k2 = bessel_k(2, 1.0).unwrap();
        assert_relative_eq!(m.t00, 2.0 * (k1 / k2 + 3.0), max_relative = 1e-11);
        assert_relative_eq!(m.i0, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn fit_round_trip() {
        for (n, kt, u) in [
            (1.0, 1.0, [0.0, 0.0, 0.0]),
            (0.3, 0.45, [0.8, -0.4, 0.1]),
            (5.0, 2.5, [0.0, 0.0, 1.5]),
        ] {
            let params = JuttnerParams::new(n, kt, u).unwrap();
            let m = juttner_moments(&params);
            let fit = fit_juttner(&m).unwrap();
            assert_relative_eq!(fit.n, n, max_relative = 1e-9);
            assert_relative_eq!(fit.theta, kt, max_relative = 1e-9);
            for j in 0..3 {
                assert_relative_eq!(fit.u[1 + j], params.u[1 + j], epsilon = 1e-9, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn fit_rejects_unphysical() {
        let m = MomentSet {
            i0: 0.0,
            t00: 1.0,
            t10: 0.0,
            t20: 0.0,
            t30: 0.0,
        };
        assert!(fit_juttner(&m).is_err());
        let m = MomentSet {
            i0: 1.0,
            t00: 2.0,
            t10: 2.5,
            t20: 0.0,
            t30: 0.0,
        };
        assert!(fit_juttner(&m).is_err());
    }

    #[test]
    fn grid_moments_match_analytic() {
        // I⁰[J] = n u⁰ within grid truncation on a wide grid.
        let params = JuttnerParams::new(1.0, 1.0, [0.0; 3]).unwrap();
        let grid = MomentumGrid::new(24, 8.0);
        let j = juttner_on_grid(&params, grid);
        let m = moments(&j);
        assert_relative_eq!(m.i0, 1.0, max_relative = 0.01);
    }
}
