//! Four-vector algebra, collision invariants and the explicit
//! center-of-momentum Lorentz boost.

use thiserror::Error;

/// Minkowski metric diag(−1, 1, 1, 1) applied to an index: η_μμ.
#[inline]
pub fn eta(mu: usize) -> f64 {
    if mu == 0 {
        -1.0
    } else {
        1.0
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum KinError {
    #[error("relative momentum g vanishes (p = q): {0}")]
    DegeneratePair(&'static str),
    #[error("mass-shell violation: radicand {0} below tolerance")]
    MassShell(f64),
    #[error("non-finite component in input")]
    NonFinite,
}

/// A general Minkowski 4-vector (index 0 = time component).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FourVector(pub [f64; 4]);

impl FourVector {
    pub fn new(t: f64, x: f64, y: f64, z: f64) -> Self {
        FourVector([t, x, y, z])
    }

    #[inline]
    pub fn spatial(&self) -> [f64; 3] {
        [self.0[1], self.0[2], self.0[3]]
    }

    #[inline]
    pub fn t(&self) -> f64 {
        self.0[0]
    }
}

impl std::ops::Index<usize> for FourVector {
    type Output = f64;
    #[inline]
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl std::ops::Add for FourVector {
    type Output = FourVector;
    fn add(self, o: FourVector) -> FourVector {
        FourVector([
            self.0[0] + o.0[0],
            self.0[1] + o.0[1],
            self.0[2] + o.0[2],
            self.0[3] + o.0[3],
        ])
    }
}

impl std::ops::Sub for FourVector {
    type Output = FourVector;
    fn sub(self, o: FourVector) -> FourVector {
        FourVector([
            self.0[0] - o.0[0],
            self.0[1] - o.0[1],
            self.0[2] - o.0[2],
            self.0[3] - o.0[3],
        ])
    }
}

impl std::ops::Mul<FourVector> for f64 {
    type Output = FourVector;
    fn mul(self, v: FourVector) -> FourVector {
        FourVector([self * v.0[0], self * v.0[1], self * v.0[2], self * v.0[3]])
    }
}

/// An on-shell energy-momentum vector: p⁰ = √(1 + |p|²).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyMomentum {
    four: FourVector,
}

impl EnergyMomentum {
    #[inline]
    pub fn energy(&self) -> f64 {
        self.four.0[0]
    }

    #[inline]
    pub fn spatial(&self) -> [f64; 3] {
        self.four.spatial()
    }

    #[inline]
    pub fn four(&self) -> FourVector {
        self.four
    }
}

/// Lift a spatial momentum onto the mass shell: (√(1+|p|²), p).
pub fn lift(p: [f64; 3]) -> EnergyMomentum {
    assert!(
        p.iter().all(|c| c.is_finite()),
        "lift: non-finite momentum component"
    );
    let e = (1.0 + p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    EnergyMomentum {
        four: FourVector([e, p[0], p[1], p[2]]),
    }
}

/// Lorentz inner product −a⁰b⁰ + a·b.
#[inline]
pub fn minkowski_dot(a: FourVector, b: FourVector) -> f64 {
    -a.0[0] * b.0[0] + a.0[1] * b.0[1] + a.0[2] * b.0[2] + a.0[3] * b.0[3]
}

/// s = 2(−p^μ q_μ + 1), the squared center-of-momentum energy. Always ≥ 4
/// on the mass shell.
#[inline]
pub fn s_invariant(p: EnergyMomentum, q: EnergyMomentum) -> f64 {
    2.0 * (-minkowski_dot(p.four, q.four) + 1.0)
}

/// Relative momentum g = √(2(−p^μ q_μ − 1)); satisfies s = g² + 4.
///
/// The radicand is evaluated through p⁰q⁰ − 1 = (|p⃗|² + |q⃗|² +
/// |p⃗|²|q⃗|²)/(p⁰q⁰ + 1), which avoids the absolute round-off floor of the
/// direct product for small momenta. Round-off for p ≈ q can still make it
/// slightly negative; values within −1e-12 are clamped to 0. Anything below
/// that indicates inputs off the mass shell and panics.
#[inline]
pub fn g_relative(p: EnergyMomentum, q: EnergyMomentum) -> f64 {
    let pv = p.spatial();
    let qv = q.spatial();
    let np2 = pv[0] * pv[0] + pv[1] * pv[1] + pv[2] * pv[2];
    let nq2 = qv[0] * qv[0] + qv[1] * qv[1] + qv[2] * qv[2];
    let pq3 = pv[0] * qv[0] + pv[1] * qv[1] + pv[2] * qv[2];
    let p0q0m1 = (np2 + nq2 + np2 * nq2) / (p.energy() * q.energy() + 1.0);
    let r = 2.0 * (p0q0m1 - pq3);
    if r < 1e-12 {
        assert!(r >= -1e-12, "g_relative: mass-shell violation, radicand {r}");
        return 0.0;
    }
    r.sqrt()
}

/// Møller velocity v_φ = g√s / (p⁰q⁰).
#[inline]
pub fn moller_velocity(p: EnergyMomentum, q: EnergyMomentum) -> f64 {
    g_relative(p, q) * s_invariant(p, q).sqrt() / (p.energy() * q.energy())
}

/// Scattering cosine (p^μ−q^μ)(p'_μ−q'_μ)/g², clamped to [−1, 1].
pub fn scattering_cosine(
    p: EnergyMomentum,
    q: EnergyMomentum,
    pp: EnergyMomentum,
    qp: EnergyMomentum,
) -> Result<f64, KinError> {
    let g = g_relative(p, q);
    if g == 0.0 {
        return Err(KinError::DegeneratePair("scattering angle undefined"));
    }
    let c = minkowski_dot(p.four - q.four, pp.four - qp.four) / (g * g);
    Ok(c.clamp(-1.0, 1.0))
}

/// A proper Lorentz transformation Λ^μ_ν (row μ, column ν).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LorentzMatrix(pub [[f64; 4]; 4]);

impl LorentzMatrix {
    pub fn identity() -> Self {
        let mut m = [[0.0; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        LorentzMatrix(m)
    }

    /// Λ v (matrix action on a 4-vector).
    pub fn apply(&self, v: FourVector) -> FourVector {
        let mut out = [0.0; 4];
        for mu in 0..4 {
            let r = &self.0[mu];
            out[mu] = r[0] * v.0[0] + r[1] * v.0[1] + r[2] * v.0[2] + r[3] * v.0[3];
        }
        FourVector(out)
    }

    /// Inverse via Λ⁻¹ = η Λᵀ η.
    pub fn inverse(&self) -> LorentzMatrix {
        let mut m = [[0.0; 4]; 4];
        for mu in 0..4 {
            for nu in 0..4 {
                m[mu][nu] = eta(mu) * self.0[nu][mu] * eta(nu);
            }
        }
        LorentzMatrix(m)
    }

    /// Max entrywise deviation of ΛᵀηΛ from η.
    pub fn orthogonality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for mu in 0..4 {
            for nu in 0..4 {
                let mut s = 0.0;
                for k in 0..4 {
                    s += self.0[k][mu] * eta(k) * self.0[k][nu];
                }
                let target = if mu == nu { eta(mu) } else { 0.0 };
                worst = worst.max((s - target).abs());
            }
        }
        worst
    }

    pub fn det(&self) -> f64 {
        let m = &self.0;
        let mut d = 0.0;
        // Laplace expansion along row 0.
        for c in 0..4 {
            let mut sub = [[0.0; 3]; 3];
            for (r3, row) in m[1..].iter().enumerate() {
                let mut cc = 0;
                for c4 in 0..4 {
                    if c4 != c {
                        sub[r3][cc] = row[c4];
                        cc += 1;
                    }
                }
            }
            let det3 = sub[0][0] * (sub[1][1] * sub[2][2] - sub[1][2] * sub[2][1])
                - sub[0][1] * (sub[1][0] * sub[2][2] - sub[1][2] * sub[2][0])
                + sub[0][2] * (sub[1][0] * sub[2][1] - sub[1][1] * sub[2][0]);
            d += if c % 2 == 0 { 1.0 } else { -1.0 } * m[0][c] * det3;
        }
        d
    }
}

pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn norm3(a: [f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

/// The explicit center-of-momentum boost: maps p+q to (√s,0,0,0) and
/// −(p−q) to (0,0,0,g).
///
/// Rows 0 and 3 are fixed by those identities. Rows 1 and 2 carry a
/// 0/|p×q| degeneracy for collinear momenta; below the collinearity
/// threshold they are replaced by an orthonormal completion obtained by
/// Gram–Schmidt in the Minkowski inner product, which leaves the row-0/3
/// identities untouched.
pub fn com_boost(p: EnergyMomentum, q: EnergyMomentum) -> Result<LorentzMatrix, KinError> {
    let g = g_relative(p, q);
    if g == 0.0 {
        return Err(KinError::DegeneratePair("com_boost requires g > 0"));
    }
    let s = s_invariant(p, q);
    let rs = s.sqrt();
    let (p0, pv) = (p.energy(), p.spatial());
    let (q0, qv) = (q.energy(), q.spatial());
    let pxq = cross(pv, qv);
    let npxq = norm3(pxq);
    let np2 = pv[0] * pv[0] + pv[1] * pv[1] + pv[2] * pv[2];
    let nq2 = qv[0] * qv[0] + qv[1] * qv[1] + qv[2] * qv[2];
    let mut m = [[0.0; 4]; 4];
    m[0][0] = (p0 + q0) / rs;
    // p0 − q0 = (|p|² − |q|²)/(p0 + q0), cancellation-free for p ≈ q.
    m[3][0] = (np2 - nq2) / ((p0 + q0) * g);
    for i in 0..3 {
        m[0][i + 1] = -(pv[i] + qv[i]) / rs;
        m[3][i + 1] = -(pv[i] - qv[i]) / g;
    }
    let threshold = 1e-12 * (1.0 + norm3(pv)) * (1.0 + norm3(qv));
    if npxq >= threshold {
        // p0 + q0(p·q)_η = q0 p⃗·q⃗ − p0|q⃗|² (and symmetrically), avoiding
        // the O(1) cancellation that otherwise wrecks this row for small
        // momenta after the division by g·|p⃗×q⃗|.
        let pq3 = pv[0] * qv[0] + pv[1] * qv[1] + pv[2] * qv[2];
        let a_p = q0 * pq3 - p0 * nq2;
        let a_q = p0 * pq3 - q0 * np2;
        m[1][0] = 2.0 * npxq / (g * rs);
        for i in 0..3 {
            m[1][i + 1] = 2.0 * (pv[i] * a_p + qv[i] * a_q) / (g * rs * npxq);
            m[2][i + 1] = pxq[i] / npxq;
        }
    } else {
        // Collinear completion: η-orthonormalize fallback axes against
        // rows 0 and 3 (which are η-orthonormal by construction).
        let rows03 = [FourVector(m[0]), FourVector(m[3])];
        let mut found: Vec<FourVector> = Vec::with_capacity(2);
        for seed in [
            FourVector::new(0.0, 1.0, 0.0, 0.0),
            FourVector::new(0.0, 0.0, 1.0, 0.0),
            FourVector::new(0.0, 0.0, 0.0, 1.0),
        ] {
            if found.len() == 2 {
                break;
            }
            let mut v = seed;
            // Subtract η-projections; row 0 is time-like (η-norm −1).
            v = v + minkowski_dot(v, rows03[0]) * rows03[0];
            v = v - minkowski_dot(v, rows03[1]) * rows03[1];
            for w in &found {
                v = v - minkowski_dot(v, *w) * *w;
            }
            let n2 = minkowski_dot(v, v);
            if n2 > 1e-8 {
                found.push((1.0 / n2.sqrt()) * v);
            }
        }
        assert!(found.len() == 2, "com_boost: completion basis not found");
        m[1] = found[0].0;
        m[2] = found[1].0;
        // Fix orientation so det = +1.
        let cand = LorentzMatrix(m);
        if cand.det() < 0.0 {
            for c in 0..4 {
                m[2][c] = -m[2][c];
            }
        }
    }
    Ok(LorentzMatrix(m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn lift_energies() {
        assert_eq!(lift([0.0, 0.0, 0.0]).energy(), 1.0);
        assert_relative_eq!(lift([1.0, 0.0, 0.0]).energy(), 2f64.sqrt());
        assert_relative_eq!(lift([0.0, 3.0, 4.0]).energy(), 26f64.sqrt());
    }

    #[test]
    #[should_panic]
    fn lift_rejects_nan() {
        lift([f64::NAN, 0.0, 0.0]);
    }

    #[test]
    fn dot_examples() {
        let rest = lift([0.0, 0.0, 0.0]);
        let px = lift([1.0, 0.0, 0.0]);
        assert_relative_eq!(minkowski_dot(rest.four(), rest.four()), -1.0);
        assert_relative_eq!(minkowski_dot(px.four(), rest.four()), -2f64.sqrt());
        let e = FourVector::new(0.0, 1.0, 0.0, 0.0);
        assert_relative_eq!(minkowski_dot(e, e), 1.0);
    }

    #[test]
    fn s_g_examples() {
        let px = lift([1.0, 0.0, 0.0]);
        let mx = lift([-1.0, 0.0, 0.0]);
        let rest = lift([0.0, 0.0, 0.0]);
        assert_relative_eq!(s_invariant(px, px), 4.0);
        assert_relative_eq!(s_invariant(px, mx), 8.0);
        assert_relative_eq!(s_invariant(px, rest), 2.0 * (2f64.sqrt() + 1.0));
        assert_relative_eq!(g_relative(px, px), 0.0);
        assert_relative_eq!(g_relative(px, mx), 2.0);
        assert_relative_eq!(g_relative(px, rest), (2.0 * (2f64.sqrt() - 1.0)).sqrt());
    }

    #[test]
    fn moller_examples() {
        let px = lift([1.0, 0.0, 0.0]);
        let mx = lift([-1.0, 0.0, 0.0]);
        let rest = lift([0.0, 0.0, 0.0]);
        assert_relative_eq!(moller_velocity(px, px), 0.0);
        assert_relative_eq!(moller_velocity(px, rest), 2f64.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(moller_velocity(px, mx), 2.0 * 2f64.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn moller_cross_product_form() {
        // v_φ = g√s/(p⁰q⁰) equals 2·√(|p/p⁰ − q/q⁰|² − |p×q|²/(p⁰q⁰)²):
        // the g convention used here is twice the classical relative
        // momentum, so the textbook cross-product form carries a factor ½.
        let p = lift([0.7, -1.3, 2.2]);
        let q = lift([0.1, 0.4, -0.9]);
        let (p0, q0) = (p.energy(), q.energy());
        let (pv, qv) = (p.spatial(), q.spatial());
        let rel = [
            pv[0] / p0 - qv[0] / q0,
            pv[1] / p0 - qv[1] / q0,
            pv[2] / p0 - qv[2] / q0,
        ];
        let cr = cross(pv, qv);
        let alt = (norm3(rel).powi(2) - (norm3(cr) / (p0 * q0)).powi(2)).sqrt();
        assert_relative_eq!(moller_velocity(p, q), 2.0 * alt, max_relative = 1e-10);
    }

    #[test]
    fn scattering_cosine_trivial() {
        let p = lift([1.0, 0.2, 0.0]);
        let q = lift([-0.3, 0.0, 0.5]);
        assert_relative_eq!(scattering_cosine(p, q, p, q).unwrap(), 1.0);
        assert_relative_eq!(scattering_cosine(p, q, q, p).unwrap(), -1.0);
        assert!(scattering_cosine(p, p, p, p).is_err());
    }

    #[test]
    fn com_boost_identities() {
        let cases = [
            ([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]),
            ([0.3, -0.7, 1.1], [2.0, 0.4, -0.2]),
            ([1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]), // collinear completion path
            ([0.5, 0.5, 0.5], [1.0, 1.0, 1.0]),  // parallel, completion path
        ];
        for (a, b) in cases {
            let p = lift(a);
            let q = lift(b);
            let lam = com_boost(p, q).unwrap();
            let s = s_invariant(p, q);
            let g = g_relative(p, q);
            let tot = lam.apply(p.four() + q.four());
            let dif = lam.apply(p.four() - q.four());
            assert_relative_eq!(tot[0], s.sqrt(), max_relative = 1e-10);
            for i in 1..4 {
                assert!(tot[i].abs() < 1e-10 * s.sqrt());
            }
            assert!(dif[0].abs() < 1e-9);
            assert!(dif[1].abs() < 1e-9 && dif[2].abs() < 1e-9);
            assert_relative_eq!(-dif[3], g, max_relative = 1e-9);
            assert!(lam.orthogonality_defect() < 1e-12 * (1.0 + p.energy() * q.energy()));
            assert!((lam.det() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn inverse_round_trip() {
        let p = lift([0.9, -0.4, 1.7]);
        let q = lift([-1.2, 0.3, 0.8]);
        let lam = com_boost(p, q).unwrap();
        let v = FourVector::new(1.7, -0.2, 0.9, 3.0);
        let back = lam.inverse().apply(lam.apply(v));
        for i in 0..4 {
            assert_relative_eq!(back[i], v[i], epsilon = 1e-12, max_relative = 1e-12);
        }
        let w = FourVector::new(0.3, 1.0, -2.0, 0.5);
        assert_relative_eq!(
            minkowski_dot(lam.apply(v), lam.apply(w)),
            minkowski_dot(v, w),
            max_relative = 1e-11
        );
    }
}
