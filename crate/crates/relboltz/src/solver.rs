//! Time integration of ∂_t f = Q(f,f) on the momentum grid, plus all
//! per-step diagnostics: conserved moments, entropy, entropy production,
//! weighted norms, and L¹ distance to the moment-matched equilibrium.

use crate::collision::{
    collide_full, gain_and_l, linear_l_full, GainOpts, ScatterKernel, SphereQuadrature,
};
use crate::equilibrium::{fit_juttner, juttner_on_grid, moments, JuttnerParams};
use crate::grid::{GridFunction, MomentumGrid};
use crate::kinematics::lift;
use crate::linalg;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Rk4,
    ExpEuler,
}

/// Built-in initial conditions.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum InitKind {
    /// Jüttner equilibrium with the given parameters.
    Juttner { n: f64, theta: f64, u: [f64; 3] },
    /// Sum of two Jüttner components with distinct bulk velocities.
    TwoBump {
        n1: f64,
        theta1: f64,
        u1: [f64; 3],
        n2: f64,
        theta2: f64,
        u2: [f64; 3],
    },
    /// Constant value on the sub-box [lo, hi] (component-wise).
    Box {
        value: f64,
        lo: [f64; 3],
        hi: [f64; 3],
    },
    /// Truncated data min(1/ε, f₀)·1_{|p| < 1/ε} + ε e^{−p⁰} over a base
    /// initial condition.
    Truncated { eps: f64, base: std::boxed::Box<InitKind> },
    /// Resume from a prior state dump.
    File { path: String },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_per_axis: usize,
    pub p_max: f64,
    pub c_sigma: f64,
    pub n_polar: usize,
    pub n_azimuth: usize,
    pub q_box_factor: f64,
    /// None → 0.5 / max_p Lf₀(p).
    pub dt: Option<f64>,
    pub t_end: f64,
    pub scheme: Scheme,
    pub conserve_projection: bool,
    pub init: InitKind,
    /// Weight exponent for the diagnostic norms.
    pub rho: f64,
    /// Emit a diagnostics record every this many steps (≥ 1).
    pub output_every: usize,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_per_axis: 12,
            p_max: 6.0,
            c_sigma: 1.0,
            n_polar: 8,
            n_azimuth: 8,
            q_box_factor: 1.5,
            dt: None,
            t_end: 1.0,
            scheme: Scheme::ExpEuler,
            conserve_projection: false,
            init: InitKind::Juttner {
                n: 1.0,
                theta: 1.0,
                u: [0.0; 3],
            },
            rho: 3.0,
            output_every: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("initial condition: {0}")]
    Init(String),
    #[error("non-finite state at t = {t}; last good state retained")]
    Nan { t: f64, last_good: std::boxed::Box<GridFunction> },
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        let bad = |k: &str, m: &str| Err(SolveError::Config(format!("{k}: {m}")));
        if self.n_per_axis == 0 {
            return bad("grid.n_per_axis", "must be positive");
        }
        if !(self.p_max > 0.0) {
            return bad("grid.p_max", "must be positive");
        }
        if !(self.c_sigma > 0.0) {
            return bad("kernel.c_sigma", "must be positive");
        }
        if self.n_polar == 0 || self.n_azimuth == 0 {
            return bad("quadrature.n_polar/n_azimuth", "must be positive");
        }
        if !(self.q_box_factor >= 1.0) {
            return bad("quadrature.q_box_factor", "must be at least 1");
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                return bad("time.dt", "must be positive");
            }
        }
        if !(self.t_end >= 0.0) {
            return bad("time.t_end", "must be nonnegative");
        }
        if !(self.rho >= 0.0) {
            return bad("diagnostics.rho", "must be nonnegative");
        }
        if self.output_every == 0 {
            return bad("output.every", "must be positive");
        }
        Ok(())
    }

    pub fn grid(&self) -> MomentumGrid {
        MomentumGrid::new(self.n_per_axis, self.p_max)
    }

    pub fn kernel(&self) -> ScatterKernel {
        ScatterKernel::hard_ball(self.c_sigma)
    }

    pub fn quadrature(&self) -> SphereQuadrature {
        SphereQuadrature::product(self.n_polar, self.n_azimuth)
    }

    pub fn gain_opts(&self) -> GainOpts {
        GainOpts {
            q_box_factor: self.q_box_factor,
            ..GainOpts::default()
        }
    }
}

/// Build the initial state on the configured grid.
pub fn init_state(cfg: &SimConfig) -> Result<GridFunction, SolveError> {
    build_init(&cfg.init, cfg.grid())
}

fn build_init(init: &InitKind, grid: MomentumGrid) -> Result<GridFunction, SolveError> {
    match init {
        InitKind::Juttner { n, theta, u } => {
            let params = JuttnerParams::new(*n, *theta, *u)
                .map_err(|e| SolveError::Init(e.to_string()))?;
            Ok(juttner_on_grid(&params, grid))
        }
        InitKind::TwoBump {
            n1,
            theta1,
            u1,
            n2,
            theta2,
            u2,
        } => {
            let a = JuttnerParams::new(*n1, *theta1, *u1)
                .map_err(|e| SolveError::Init(e.to_string()))?;
            let b = JuttnerParams::new(*n2, *theta2, *u2)
                .map_err(|e| SolveError::Init(e.to_string()))?;
            let fa = juttner_on_grid(&a, grid);
            let fb = juttner_on_grid(&b, grid);
            Ok(GridFunction {
                grid,
                values: fa
                    .values
                    .iter()
                    .zip(&fb.values)
                    .map(|(x, y)| x + y)
                    .collect(),
            })
        }
        InitKind::Box { value, lo, hi } => {
            if *value < 0.0 {
                return Err(SolveError::Init("box value must be nonnegative".into()));
            }
            Ok(GridFunction::from_fn(grid, |p| {
                let inside = (0..3).all(|d| p[d] >= lo[d] && p[d] <= hi[d]);
                if inside {
                    *value
                } else {
                    0.0
                }
            }))
        }
        InitKind::Truncated { eps, base } => {
            if !(*eps > 0.0) {
                return Err(SolveError::Init("truncation eps must be positive".into()));
            }
            let f0 = build_init(base, grid)?;
            let cap = 1.0 / eps;
            let values = grid
                .nodes()
                .map(|(idx, p)| {
                    let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
                    let trunc = if r < cap { f0.values[idx].min(cap) } else { 0.0 };
                    trunc + eps * (-lift(p).energy()).exp()
                })
                .collect();
            Ok(GridFunction { grid, values })
        }
        InitKind::File { path } => {
            let bytes = std::fs::read(path)
                .map_err(|e| SolveError::Init(format!("cannot read {path}: {e}")))?;
            let (f, _rho) = crate::io::decode_state(&bytes)
                .map_err(|e| SolveError::Init(format!("{path}: {e}")))?;
            if f.grid.n_per_axis != grid.n_per_axis || f.grid.p_max != grid.p_max {
                return Err(SolveError::Init(format!(
                    "{path}: dump grid {}x{} p_max {} does not match configured grid",
                    f.grid.n_per_axis, f.grid.n_per_axis, f.grid.p_max
                )));
            }
            Ok(f)
        }
    }
}

/// One diagnostics row (one CSV line).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub mass: f64,
    pub momentum: [f64; 3],
    pub energy: f64,
    pub h: f64,
    pub d: f64,
    pub linf: f64,
    pub linf_rho: f64,
    pub l1_1: f64,
    pub l1_rho: f64,
    pub dist_l1_j: f64,
    pub clipped_mass: f64,
    pub cap_count: u64,
}

/// Entropy H(f) = ∫ f ln f dp with 0·ln 0 = 0.
pub fn entropy(f: &GridFunction) -> f64 {
    let s: f64 = f
        .values
        .iter()
        .map(|&v| if v > 0.0 { v * v.ln() } else { 0.0 })
        .sum();
    s * f.grid.cell_volume()
}

/// Entropy production D(f) ≥ 0 by quadrature over grid × grid × sphere.
/// Collision outcomes leaving the grid box are excluded: they are not part
/// of the discrete phase space, and a zero-by-truncation factor would
/// otherwise dominate D through the log cap. Terms where both products
/// f'f'_* and ff_* vanish contribute 0; otherwise the logarithm is capped
/// at ±700 and the cap occurrences counted. Returns (D, cap_count).
pub fn entropy_production(
    f: &GridFunction,
    kernel: &ScatterKernel,
    sq: &SphereQuadrature,
) -> (f64, u64) {
    let grid = f.grid;
    let n = grid.len();
    let dx3 = grid.cell_volume();
    let omegas: Vec<([f64; 3], f64)> = sq
        .nodes
        .iter()
        .cloned()
        .zip(sq.weights.iter().cloned())
        .collect();
    let (total, caps) = (0..n)
        .into_par_iter()
        .map(|i| {
            let fi = f.values[i];
            let pv = grid.node(i);
            let p0 = (1.0 + pv[0] * pv[0] + pv[1] * pv[1] + pv[2] * pv[2]).sqrt();
            let mut acc = 0.0;
            let mut caps = 0u64;
            // The (p, q) integrand is symmetric; run unordered pairs with
            // multiplicity 2 (1 on the diagonal).
            for j in i..n {
                let fj = f.values[j];
                let qv = grid.node(j);
                let q0 = (1.0 + qv[0] * qv[0] + qv[1] * qv[1] + qv[2] * qv[2]).sqrt();
                let mdot = -p0 * q0 + pv[0] * qv[0] + pv[1] * qv[1] + pv[2] * qv[2];
                let g2 = 2.0 * (-mdot - 1.0);
                if g2 <= 0.0 {
                    continue;
                }
                let g = g2.sqrt();
                let rs = (g2 + 4.0).sqrt();
                let vphi = g * rs / (p0 * q0);
                let sigma = kernel.sigma(g);
                let mult = if i == j { 1.0 } else { 2.0 };
                let x = fi * fj;
                let tot = [pv[0] + qv[0], pv[1] + qv[1], pv[2] + qv[2]];
                let n2 = tot[0] * tot[0] + tot[1] * tot[1] + tot[2] * tot[2];
                let gamma = (p0 + q0) / rs;
                let kap = if n2 < 1e-24 { 0.0 } else { (gamma - 1.0) / n2 };
                let ghalf = 0.5 * g;
                let mut inner = 0.0;
                let in_box = grid.p_max + 0.5 * grid.spacing();
                for &(om, w) in &omegas {
                    let c = kap * (tot[0] * om[0] + tot[1] * om[1] + tot[2] * om[2]);
                    let d0 = ghalf * (om[0] + c * tot[0]);
                    let d1 = ghalf * (om[1] + c * tot[1]);
                    let d2 = ghalf * (om[2] + c * tot[2]);
                    let pp = [0.5 * tot[0] + d0, 0.5 * tot[1] + d1, 0.5 * tot[2] + d2];
                    let qp = [0.5 * tot[0] - d0, 0.5 * tot[1] - d1, 0.5 * tot[2] - d2];
                    if pp.iter().chain(&qp).any(|&c| c.abs() > in_box) {
                        continue;
                    }
                    let y = f.interp(pp) * f.interp(qp);
                    if y <= 0.0 && x <= 0.0 {
                        continue;
                    }
                    let r = if y <= 0.0 || x <= 0.0 {
                        caps += 1;
                        if y <= 0.0 {
                            -700.0
                        } else {
                            700.0
                        }
                    } else {
                        (y / x).ln().clamp(-700.0, 700.0)
                    };
                    inner += w * (y - x) * r;
                }
                acc += mult * vphi * sigma * inner;
            }
            (acc, caps)
        })
        .reduce(|| (0.0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    (total * dx3 * dx3, caps)
}

/// (linf, linf_rho, l1_1, l1_rho) with weight (p⁰)^ρ.
pub fn norms(f: &GridFunction, rho: f64) -> (f64, f64, f64, f64) {
    let mut linf = 0.0f64;
    let mut linf_rho = 0.0f64;
    let mut l1_1 = 0.0;
    let mut l1_rho = 0.0;
    for (idx, p) in f.grid.nodes() {
        let v = f.values[idx];
        let p0 = (1.0 + p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        linf = linf.max(v);
        linf_rho = linf_rho.max(p0.powf(rho) * v);
        l1_1 += p0 * v.abs();
        l1_rho += p0.powf(rho) * v.abs();
    }
    let dx3 = f.grid.cell_volume();
    (linf, linf_rho, l1_1 * dx3, l1_rho * dx3)
}

/// Unweighted L¹ distance ∫ |f − g| dp.
pub fn l1_distance(f: &GridFunction, g: &GridFunction) -> f64 {
    f.values
        .iter()
        .zip(&g.values)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        * f.grid.cell_volume()
}

/// Per-step bookkeeping.
#[derive(Clone, Copy, Debug, Default)]
pub struct StepInfo {
    /// Mass removed by clipping negative values (rk4 only).
    pub clipped_mass: f64,
    /// Set when dt · max_p Lf(p) > 2 (explicit-scheme stability heuristic).
    pub dt_warning: bool,
}

/// Owns the quadrature machinery for repeated steps of one run.
pub struct Stepper {
    pub kernel: ScatterKernel,
    pub sq: SphereQuadrature,
    pub opts: GainOpts,
    pub scheme: Scheme,
}

impl Stepper {
    pub fn from_config(cfg: &SimConfig) -> Self {
        Stepper {
            kernel: cfg.kernel(),
            sq: cfg.quadrature(),
            opts: cfg.gain_opts(),
            scheme: cfg.scheme,
        }
    }

    pub fn step(&self, f: &GridFunction, dt: f64) -> (GridFunction, StepInfo) {
        match self.scheme {
            Scheme::Rk4 => self.step_rk4(f, dt),
            Scheme::ExpEuler => self.step_exp_euler(f, dt),
        }
    }

    /// Classical 4-stage explicit step; negative values clipped to zero
    /// with the removed mass recorded.
    pub fn step_rk4(&self, f: &GridFunction, dt: f64) -> (GridFunction, StepInfo) {
        let q = |g: &GridFunction| collide_full(g, &self.kernel, &self.sq, &self.opts);
        let axpy = |g: &GridFunction, c: f64, k: &GridFunction| GridFunction {
            grid: g.grid,
            values: g
                .values
                .iter()
                .zip(&k.values)
                .map(|(a, b)| (a + c * b).max(0.0))
                .collect(),
        };
        let k1 = q(f);
        let k2 = q(&axpy(f, 0.5 * dt, &k1));
        let k3 = q(&axpy(f, 0.5 * dt, &k2));
        let k4 = q(&axpy(f, dt, &k3));
        let mut clipped = 0.0;
        let values = (0..f.values.len())
            .map(|i| {
                let v = f.values[i]
                    + dt / 6.0
                        * (k1.values[i]
                            + 2.0 * k2.values[i]
                            + 2.0 * k3.values[i]
                            + k4.values[i]);
                if v < 0.0 {
                    clipped -= v;
                    0.0
                } else {
                    v
                }
            })
            .collect();
        let l = linear_l_full(f, &self.kernel, &self.sq);
        let max_l = l.values.iter().fold(0.0f64, |m, &v| m.max(v));
        (
            GridFunction {
                grid: f.grid,
                values,
            },
            StepInfo {
                clipped_mass: clipped * f.grid.cell_volume(),
                dt_warning: dt * max_l > 2.0,
            },
        )
    }

    /// Duhamel-form step
    /// f_{n+1} = e^{−dt·Lf_n} f_n + dt e^{−dt·Lf_n} Q⁺(f_n, f_n);
    /// nonnegative by construction, no clipping needed.
    pub fn step_exp_euler(&self, f: &GridFunction, dt: f64) -> (GridFunction, StepInfo) {
        let (gain, l) = gain_and_l(f, &self.kernel, &self.sq, &self.opts);
        let mut max_l = 0.0f64;
        let values = (0..f.values.len())
            .map(|i| {
                let lv = l.values[i];
                max_l = max_l.max(lv);
                let decay = (-dt * lv).exp();
                decay * (f.values[i] + dt * gain.values[i])
            })
            .collect();
        (
            GridFunction {
                grid: f.grid,
                values,
            },
            StepInfo {
                clipped_mass: 0.0,
                dt_warning: dt * max_l > 2.0,
            },
        )
    }

    /// Largest collision frequency over the grid (sets the stable dt scale).
    pub fn max_l(&self, f: &GridFunction) -> f64 {
        linear_l_full(f, &self.kernel, &self.sq)
            .values
            .iter()
            .fold(0.0f64, |m, &v| m.max(v))
    }
}

/// Rescale f in the span of the five collision invariants so its moments
/// match the target exactly (small least-squares correction). Negative
/// values produced by the correction are clipped; the clipped mass is
/// returned for the diagnostics row.
pub fn project_moments(f: &mut GridFunction, target: &crate::equilibrium::MomentSet) -> f64 {
    let grid = f.grid;
    let dx3 = grid.cell_volume();
    // ψ = (1, p¹, p², p³, p⁰); solve for λ with f ← f(1 + λ·ψ).
    let mut m = vec![vec![0.0; 5]; 5];
    let mut rhs = [0.0; 5];
    let cur = moments(f);
    rhs[0] = target.i0 - cur.i0;
    rhs[1] = target.t10 - cur.t10;
    rhs[2] = target.t20 - cur.t20;
    rhs[3] = target.t30 - cur.t30;
    rhs[4] = target.t00 - cur.t00;
    for (idx, p) in grid.nodes() {
        let v = f.values[idx];
        if v <= 0.0 {
            continue;
        }
        let p0 = (1.0 + p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        let psi = [1.0, p[0], p[1], p[2], p0];
        for a in 0..5 {
            for b in a..5 {
                m[a][b] += v * psi[a] * psi[b] * dx3;
            }
        }
    }
    for a in 0..5 {
        for b in 0..a {
            m[a][b] = m[b][a];
        }
    }
    let lambda = match linalg::solve(&m, &rhs) {
        Some(x) => x,
        None => return 0.0,
    };
    let mut clipped = 0.0;
    for (idx, p) in grid.nodes() {
        let p0 = (1.0 + p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        let fac = 1.0
            + lambda[0]
            + lambda[1] * p[0]
            + lambda[2] * p[1]
            + lambda[3] * p[2]
            + lambda[4] * p0;
        let v = f.values[idx] * fac;
        if v < 0.0 {
            clipped -= v;
            f.values[idx] = 0.0;
        } else {
            f.values[idx] = v;
        }
    }
    clipped * dx3
}

pub struct RunOutput {
    pub records: Vec<DiagnosticsRecord>,
    pub final_state: GridFunction,
    /// True if any step raised the dt stability warning.
    pub dt_warning: bool,
    /// Equilibrium fitted once from the initial moments (None if the fit
    /// was not possible, e.g. zero initial data).
    pub equilibrium: Option<GridFunction>,
}

/// Quadrature for the entropy-production diagnostic: cheaper than the main
/// rule; D is only used in sign/monotonicity checks.
fn diag_quadrature() -> SphereQuadrature {
    SphereQuadrature::product(8, 8)
}

fn diagnostics_row(
    f: &GridFunction,
    t: f64,
    cfg: &SimConfig,
    kernel: &ScatterKernel,
    j_eq: Option<&GridFunction>,
    clipped: f64,
) -> DiagnosticsRecord {
    let m = moments(f);
    let (d, caps) = entropy_production(f, kernel, &diag_quadrature());
    let (linf, linf_rho, l1_1, l1_rho) = norms(f, cfg.rho);
    DiagnosticsRecord {
        t,
        mass: m.i0,
        momentum: [m.t10, m.t20, m.t30],
        energy: m.t00,
        h: entropy(f),
        d,
        linf,
        linf_rho,
        l1_1,
        l1_rho,
        dist_l1_j: j_eq.map_or(0.0, |j| l1_distance(f, j)),
        clipped_mass: clipped,
        cap_count: caps,
    }
}

/// Integrate the configured scenario to t_end, emitting diagnostics at the
/// configured cadence. The distance-to-equilibrium target is fitted once
/// from the initial moments and never refitted. Aborts on non-finite state
/// with the last good state attached to the error.
pub fn run(cfg: &SimConfig) -> Result<RunOutput, SolveError> {
    cfg.validate()?;
    let stepper = Stepper::from_config(cfg);
    let mut f = init_state(cfg)?;
    let m0 = moments(&f);
    let j_eq = fit_juttner(&m0)
        .ok()
        .map(|params| juttner_on_grid(&params, f.grid));
    let dt = match cfg.dt {
        Some(dt) => dt,
        None => {
            let max_l = stepper.max_l(&f);
            if max_l > 0.0 {
                0.5 / max_l
            } else {
                return Err(SolveError::Config(
                    "time.dt: no default possible for a collisionless state".into(),
                ));
            }
        }
    };
    let n_steps = if cfg.t_end <= 0.0 {
        0
    } else {
        (cfg.t_end / dt).ceil() as usize
    };
    let mut records = Vec::new();
    records.push(diagnostics_row(&f, 0.0, cfg, &stepper.kernel, j_eq.as_ref(), 0.0));
    let mut warned = false;
    for step in 1..=n_steps {
        let (mut next, info) = stepper.step(&f, dt);
        warned |= info.dt_warning;
        let mut clipped = info.clipped_mass;
        if cfg.conserve_projection {
            clipped += project_moments(&mut next, &m0);
        }
        let t = step as f64 * dt;
        if next.values.iter().any(|v| !v.is_finite()) {
            return Err(SolveError::Nan {
                t,
                last_good: std::boxed::Box::new(f),
            });
        }
        f = next;
        if step % cfg.output_every == 0 || step == n_steps {
            records.push(diagnostics_row(
                &f,
                t,
                cfg,
                &stepper.kernel,
                j_eq.as_ref(),
                clipped,
            ));
        }
    }
    Ok(RunOutput {
        records,
        final_state: f,
        dt_warning: warned,
        equilibrium: j_eq,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn small_cfg() -> SimConfig {
        SimConfig {
            n_per_axis: 8,
            p_max: 4.0,
            n_polar: 6,
            n_azimuth: 6,
            ..SimConfig::default()
        }
    }

    #[test]
    fn entropy_conventions() {
        let grid = MomentumGrid::new(4, 2.0);
        let zero = GridFunction::zeros(grid);
        assert_eq!(entropy(&zero), 0.0);
        // Constant c on the whole box: H = c ln c · volume.
        let c = 2.5;
        let f = GridFunction::from_fn(grid, |_| c);
        let vol = (2.0 * grid.p_max).powi(3);
        assert_relative_eq!(entropy(&f), c * c.ln() * vol, max_relative = 1e-12);
        // e^{−p⁰}-shaped data has negative entropy (values < 1 dominate).
        let g = GridFunction::from_fn(grid, |p| (-lift(p).energy()).exp());
        assert!(entropy(&g) < 0.0);
    }

    #[test]
    fn norms_examples() {
        let grid = MomentumGrid::new(4, 2.0);
        let zero = GridFunction::zeros(grid);
        assert_eq!(norms(&zero, 3.0), (0.0, 0.0, 0.0, 0.0));
        let mut f = GridFunction::zeros(grid);
        let idx = grid.flat_index([3, 2, 1]);
        f.values[idx] = 1.0;
        let p = grid.node(idx);
        let p0 = lift(p).energy();
        let rho = 3.0;
        let (linf, linf_rho, l1_1, l1_rho) = norms(&f, rho);
        assert_eq!(linf, 1.0);
        assert_relative_eq!(linf_rho, p0.powf(rho), max_relative = 1e-12);
        assert_relative_eq!(l1_1, p0 * grid.cell_volume(), max_relative = 1e-12);
        assert_relative_eq!(l1_rho, p0.powf(rho) * grid.cell_volume(), max_relative = 1e-12);
        // ρ = 0 reduces the weighted L¹ norm to the plain mass.
        let (_, _, _, l1_0) = norms(&f, 0.0);
        assert_relative_eq!(l1_0, f.mass(), max_relative = 1e-12);
    }

    #[test]
    fn entropy_production_zero_and_sign() {
        let grid = MomentumGrid::new(6, 3.0);
        let zero = GridFunction::zeros(grid);
        let kernel = ScatterKernel::default();
        let sq = SphereQuadrature::product(4, 4);
        assert_eq!(entropy_production(&zero, &kernel, &sq).0, 0.0);
        // Two separated bumps: strictly positive production.
        let two = GridFunction::from_fn(grid, |p| {
            let a = [p[0] - 1.2, p[1], p[2]];
            let b = [p[0] + 1.2, p[1], p[2]];
            (-(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]) / 0.5).exp()
                + (-(b[0] * b[0] + b[1] * b[1] + b[2] * b[2]) / 0.5).exp()
        });
        let (d, _) = entropy_production(&two, &kernel, &sq);
        assert!(d > 0.0, "D = {d}");
    }

    #[test]
    fn exp_euler_zero_and_positivity() {
        let cfg = small_cfg();
        let stepper = Stepper::from_config(&cfg);
        let zero = GridFunction::zeros(cfg.grid());
        let (out, info) = stepper.step_exp_euler(&zero, 0.1);
        assert!(out.values.iter().all(|&v| v == 0.0));
        assert!(!info.dt_warning);
        // Random-ish nonnegative state stays nonnegative exactly.
        let f = GridFunction::from_fn(cfg.grid(), |p| {
            (p[0].sin().abs() + p[1].cos().abs()) * (-(p[2] * p[2])).exp()
        });
        let (out, _) = stepper.step_exp_euler(&f, 0.5);
        assert!(out.values.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn rk4_zero_state() {
        let cfg = small_cfg();
        let stepper = Stepper::from_config(&cfg);
        let zero = GridFunction::zeros(cfg.grid());
        let (out, info) = stepper.step_rk4(&zero, 0.1);
        assert!(out.values.iter().all(|&v| v == 0.0));
        assert_eq!(info.clipped_mass, 0.0);
    }

    #[test]
    fn projection_restores_moments() {
        let grid = MomentumGrid::new(8, 4.0);
        let f0 = GridFunction::from_fn(grid, |p| {
            (-(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]) / 1.1).exp()
        });
        let target = moments(&f0);
        // Perturb and project back.
        let mut f = GridFunction {
            grid,
            values: f0
                .values
                .iter()
                .enumerate()
                .map(|(i, v)| v * (1.0 + 0.05 * ((i % 7) as f64 - 3.0)))
                .collect(),
        };
        project_moments(&mut f, &target);
        let m = moments(&f);
        assert_relative_eq!(m.i0, target.i0, max_relative = 1e-10);
        assert_relative_eq!(m.t00, target.t00, max_relative = 1e-10);
        assert_relative_eq!(m.t10, target.t10, epsilon = 1e-10 * target.t00);
    }

    #[test]
    fn run_t_end_zero_single_record() {
        let mut cfg = small_cfg();
        cfg.t_end = 0.0;
        let out = run(&cfg).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.records[0].t, 0.0);
        assert!(out.records[0].mass > 0.0);
    }

    #[test]
    fn config_validation_names_keys() {
        let mut cfg = small_cfg();
        cfg.dt = Some(-1.0);
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("time.dt"), "{err}");
        let mut cfg = small_cfg();
        cfg.p_max = 0.0;
        assert!(cfg.validate().unwrap_err().to_string().contains("grid.p_max"));
    }

    #[test]
    fn truncated_init_structure() {
        let grid = MomentumGrid::new(8, 4.0);
        let base = InitKind::Juttner {
            n: 1.0,
            theta: 1.0,
            u: [0.0; 3],
        };
        let eps = 0.4;
        let f = build_init(
            &InitKind::Truncated {
                eps,
                base: std::boxed::Box::new(base.clone()),
            },
            grid,
        )
        .unwrap();
        let plain = build_init(&base, grid).unwrap();
        for (idx, p) in grid.nodes() {
            let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            let p0 = lift(p).energy();
            let expect = if r < 1.0 / eps {
                plain.values[idx].min(1.0 / eps)
            } else {
                0.0
            } + eps * (-p0).exp();
            assert_relative_eq!(f.values[idx], expect, max_relative = 1e-12);
        }
        // Floor keeps the state strictly positive everywhere.
        assert!(f.values.iter().all(|&v| v > 0.0));
    }
}
