//! Command-line front end: scenario execution, verification runs, moment
//! fitting, gain-representation comparison, and Bessel evaluation.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical abort.

use clap::{Parser, Subcommand};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use relboltz::carleman::{q_gain_carleman, q_gain_mollified};
use relboltz::collision::q_gain;
use relboltz::equilibrium::{bessel_k, fit_juttner, moments, EqError, MomentSet};
use relboltz::io::{write_csv, write_state};
use relboltz::kinematics::lift;
use relboltz::scenario::parse_scenario_with_overrides;
use relboltz::solver::{init_state, run, SimConfig, SolveError};
use relboltz::verify::{default_check_scenario, list_checks, run_check};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const CONFIG_HELP: &str = "\
Configuration keys (TOML; overridable with --set section.key=value):
  seed (0)                          seed for stochastic components
  grid.n_per_axis (12)              nodes per momentum axis
  grid.p_max (6.0)                  momentum-box half-width
  kernel.c_sigma (1.0)              hard-ball cross-section slope
  quadrature.n_polar (8)            polar nodes of the sphere rule
  quadrature.n_azimuth (8)          azimuthal nodes of the sphere rule
  quadrature.q_box_factor (1.5)     dq box size relative to the grid box
  time.dt (0.5 / max collision frequency)  time step
  time.t_end (1.0)                  final time
  time.scheme (exp_euler)           exp_euler or rk4
  time.conserve_projection (false)  re-project the five moments each step
  init.kind (juttner)               juttner, two_bump, box, truncated, file
  init.n / theta / u ([0,0,0])      juttner parameters
  init.n1/theta1/u1, n2/theta2/u2   two_bump parameters
  init.value / lo / hi              box parameters
  init.eps + [init.base]            truncated parameters
  init.path                         file parameter (prior state dump)
  diagnostics.rho (3.0)             weight exponent of the weighted norms
  output.every (1)                  steps between diagnostics rows

Environment: RELBOLT_THREADS caps the worker count (0 or unset = auto).";

#[derive(Parser)]
#[command(name = "relboltz", version, about = "Spatially homogeneous relativistic Boltzmann solver", after_long_help = CONFIG_HELP)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario and write the diagnostics CSV plus a final-state dump.
    Simulate {
        /// Scenario configuration file.
        config: PathBuf,
        /// Override a configuration key: section.key=value (repeatable).
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run verification checks and print one JSON report line per check.
    Verify {
        /// Check ids, or "all".
        #[arg(default_values_t = [String::from("all")])]
        checks: Vec<String>,
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Scenario file for the trajectory checks (default: built-in
        /// truncated two-bump scenario).
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
    },
    /// Fit equilibrium parameters from conserved moments.
    Fit {
        /// Take the moments from this scenario's initial condition.
        #[arg(long, conflicts_with = "moments")]
        config: Option<PathBuf>,
        /// Explicit moments: I0 T00 T10 T20 T30.
        #[arg(long, num_args = 5, value_names = ["I0", "T00", "T10", "T20", "T30"], allow_negative_numbers = true)]
        moments: Option<Vec<f64>>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
    },
    /// Compare the gain-term evaluators at sampled momenta.
    CarlemanCompare {
        /// Scenario configuration file (only grid, kernel, quadrature, and
        /// init are used).
        config: PathBuf,
        /// Number of sampled momenta.
        #[arg(long, default_value_t = 5)]
        points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Negative control: run the hypersurface evaluator at a
        /// deliberately coarse plane resolution.
        #[arg(long)]
        mismatch: bool,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
    },
    /// Evaluate the modified Bessel function of the second kind K_j(z).
    Bessel { j: usize, z: f64 },
}

fn main() -> ExitCode {
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    match Cli::parse().cmd {
        Cmd::Simulate { config, sets, out } => cmd_simulate(&config, &sets, &out),
        Cmd::Verify {
            checks,
            samples,
            seed,
            scenario,
            sets,
        } => cmd_verify(&checks, samples, seed, scenario.as_deref(), &sets),
        Cmd::Fit {
            config,
            moments,
            sets,
        } => cmd_fit(config.as_deref(), moments.as_deref(), &sets),
        Cmd::CarlemanCompare {
            config,
            points,
            seed,
            mismatch,
            sets,
        } => cmd_carleman_compare(&config, points, seed, mismatch, &sets),
        Cmd::Bessel { j, z } => cmd_bessel(j, z),
    }
}

fn configure_threads() -> Result<(), String> {
    let raw = match std::env::var("RELBOLT_THREADS") {
        Ok(v) => v,
        Err(_) => return Ok(()),
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| format!("RELBOLT_THREADS: not a worker count: {raw:?}"))?;
    if n == 0 {
        return Ok(()); // 0 = auto: leave the default pool.
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| format!("RELBOLT_THREADS: {e}"))
}

fn load_config(path: &Path, sets: &[String]) -> Result<SimConfig, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("{}: {e}", path.display()))?;
    parse_scenario_with_overrides(&text, sets).map_err(|e| e.to_string())
}

fn cmd_simulate(config: &Path, sets: &[String], out: &Path) -> ExitCode {
    let cfg = match load_config(config, sets) {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let output = match run(&cfg) {
        Ok(o) => o,
        Err(SolveError::Nan { t, .. }) => {
            eprintln!("error: state became non-finite at t = {t}");
            return ExitCode::from(3);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = std::fs::create_dir_all(out) {
        eprintln!("error: {}: {e}", out.display());
        return ExitCode::from(2);
    }
    let csv_path = out.join("diagnostics.csv");
    let state_path = out.join("final_state.bin");
    let write = || -> std::io::Result<()> {
        write_csv(std::fs::File::create(&csv_path)?, &output.records)?;
        write_state(std::fs::File::create(&state_path)?, &output.final_state, cfg.rho)?;
        Ok(())
    };
    if let Err(e) = write() {
        eprintln!("error: writing output: {e}");
        return ExitCode::from(2);
    }
    if output.dt_warning {
        eprintln!("warning: dt large against the collision frequency; results may be inaccurate");
    }
    let last = output.records.last().expect("at least the initial row");
    println!(
        "wrote {} ({} rows) and {}; final t = {:.6}, H = {:.6e}, dist to equilibrium = {:.6e}",
        csv_path.display(),
        output.records.len(),
        state_path.display(),
        last.t,
        last.h,
        last.dist_l1_j
    );
    ExitCode::SUCCESS
}

fn cmd_verify(
    checks: &[String],
    samples: u64,
    seed: u64,
    scenario: Option<&Path>,
    sets: &[String],
) -> ExitCode {
    let ids: Vec<&str> = if checks.iter().any(|c| c == "all") {
        list_checks().iter().map(|d| d.id).collect()
    } else {
        let mut ids = Vec::new();
        for c in checks {
            match list_checks().iter().find(|d| d.id == c.as_str()) {
                Some(d) => ids.push(d.id),
                None => {
                    eprintln!("error: unknown check id: {c}");
                    return ExitCode::from(2);
                }
            }
        }
        ids
    };
    let scen = match scenario {
        Some(path) => match load_config(path, sets) {
            Ok(c) => c,
            Err(msg) => {
                eprintln!("error: {msg}");
                return ExitCode::from(2);
            }
        },
        None => default_check_scenario(),
    };
    // Checks are independent; run them concurrently and print in registry
    // order.
    let reports: Vec<_> = ids
        .par_iter()
        .map(|id| run_check(id, samples, seed, Some(&scen)))
        .collect();
    let mut all_pass = true;
    for report in reports {
        match report {
            Ok(r) => {
                all_pass &= r.passed();
                println!("{}", r.to_json_line());
            }
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        }
    }
    if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn cmd_fit(config: Option<&Path>, explicit: Option<&[f64]>, sets: &[String]) -> ExitCode {
    let m = if let Some(vals) = explicit {
        MomentSet {
            i0: vals[0],
            t00: vals[1],
            t10: vals[2],
            t20: vals[3],
            t30: vals[4],
        }
    } else if let Some(path) = config {
        let cfg = match load_config(path, sets) {
            Ok(c) => c,
            Err(msg) => {
                eprintln!("error: {msg}");
                return ExitCode::from(2);
            }
        };
        match init_state(&cfg) {
            Ok(f) => moments(&f),
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        }
    } else {
        eprintln!("error: fit needs either --config or --moments");
        return ExitCode::from(2);
    };
    match fit_juttner(&m) {
        Ok(params) => {
            println!("{}", serde_json::to_string(&params).expect("finite parameters"));
            ExitCode::SUCCESS
        }
        Err(e @ EqError::NoConvergence { .. }) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn cmd_carleman_compare(
    config: &Path,
    points: usize,
    seed: u64,
    mismatch: bool,
    sets: &[String],
) -> ExitCode {
    let cfg = match load_config(config, sets) {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let f = match init_state(&cfg) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let kernel = cfg.kernel();
    let sq = cfg.quadrature();
    let res_fac = if mismatch { 4.0 } else { 0.5 };
    let eps = 0.25 * f.grid.spacing();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut all_ok = true;
    println!("p_x p_y p_z gain_com gain_plane mollified stderr rel_spread");
    for k in 0..points {
        // Sample inside the half-radius ball where the state is resolved.
        let z: f64 = 2.0 * rng.random::<f64>() - 1.0;
        let phi = 2.0 * std::f64::consts::PI * rng.random::<f64>();
        let rho = (1.0 - z * z).max(0.0).sqrt();
        let r = 0.5 * cfg.p_max * rng.random::<f64>().cbrt();
        let pv = [r * rho * phi.cos(), r * rho * phi.sin(), r * z];
        let p = lift(pv);
        let com = q_gain(&f, p, &kernel, &sq);
        let carl = q_gain_carleman(&f, p, &kernel, res_fac);
        let (est, se) = match q_gain_mollified(&f, p, &kernel, eps, 150_000, seed ^ k as u64) {
            Ok(v) => v,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        };
        let scale = com.abs().max(carl.value.abs());
        let spread = if scale > 1e-300 {
            (com - carl.value).abs() / scale
        } else {
            0.0
        };
        let moll_ok = scale <= 1e-300
            || (est - carl.value).abs() <= 3.0 * se
            || (est - carl.value).abs() / scale <= 0.05;
        all_ok &= spread <= 0.05 && moll_ok;
        println!(
            "{:+.6e} {:+.6e} {:+.6e} {:.10e} {:.10e} {:.10e} {:.3e} {:.4e}",
            pv[0], pv[1], pv[2], com, carl.value, est, se, spread
        );
    }
    if all_ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn cmd_bessel(j: usize, z: f64) -> ExitCode {
    match bessel_k(j, z) {
        Ok(v) => {
            println!("{v:.17e}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
