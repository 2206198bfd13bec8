//! Command-line entry point: simulate, eigens, korn, identities, project.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage/config error.

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use surfns::config::{preset, Config};
use surfns::dynamics::{
    build_initial_condition, fit_decay_rate, DecayFit, InitialCondition, Integrator, TimeControls,
};
use surfns::helmholtz::{helmholtz_project, Projector};
use surfns::io;
use surfns::killing::{analytic_killing_basis, korn_constant, numeric_killing_basis};
use surfns::stokes::{eigenpairs, StokesOperator};
use surfns::{build_geometry, Error};

#[derive(Parser)]
#[command(
    name = "surfns",
    about = "Incompressible surface Navier-Stokes with Navier slip on 2-D manifolds with boundary"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Config file (TOML with [geometry], [bc], [solver], [run])
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named preset (e.g. hemisphere-spindown, hemisphere-freeslip)
    #[arg(long)]
    preset: Option<String>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// PRNG seed override
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = available parallelism)
    #[arg(long)]
    threads: Option<usize>,
    /// Overwrite an existing output directory
    #[arg(long)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Time-integrate the projected Navier-Stokes evolution
    Simulate(CommonArgs),
    /// Smallest Stokes eigenpairs on the divergence-free subspace
    Eigens {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of eigenpairs
        #[arg(long)]
        k: Option<usize>,
    },
    /// Korn constant report (base and doubled resolution)
    Korn(CommonArgs),
    /// Identity battery (Green, deformation, commutator) with orders
    Identities {
        /// Base resolution (levels n/2, n, 2n)
        #[arg(long, default_value_t = 64)]
        resolution: usize,
        /// Optional report file
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One-shot Helmholtz projection of a field file (CSV i,j,u1,u2)
    Project {
        #[command(flatten)]
        common: CommonArgs,
        /// Field file; defaults to run.field_file from the config
        #[arg(long)]
        field: Option<PathBuf>,
    },
}

fn load_config(common: &CommonArgs) -> Result<(Config, String), Error> {
    let mut cfg = match (&common.config, &common.preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)?;
            Config::parse(&text)?
        }
        (None, Some(name)) => preset(name)?,
        (None, None) => {
            return Err(Error::Config(
                "either --config or --preset is required".into(),
            ))
        }
    };
    cfg.apply_env();
    if let Some(seed) = common.seed {
        if let Some(run) = &mut cfg.run {
            run.seed = seed;
        }
    }
    if let Some(t) = common.threads {
        cfg.solver.threads = t;
    }
    let echo = toml::to_string_pretty(&cfg).map_err(|e| Error::Config(e.to_string()))?;
    Ok((cfg, echo))
}

fn init_threads(threads: usize) {
    if threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
}

struct Machinery {
    op: StokesOperator,
    basis: surfns::killing::KillingBasis,
}

fn build_machinery(cfg: &Config) -> Result<Machinery, Error> {
    let spec = cfg.geometry_spec()?;
    let geom = build_geometry(&spec)?;
    let projector = Arc::new(Projector::new(&geom, cfg.poisson_method(), cfg.solver.tol)?);
    let bc = cfg.boundary_condition()?;
    let mu = cfg.run.as_ref().map(|r| r.mu_s).unwrap_or(1.0);
    let op = StokesOperator::new(&geom, bc, mu, &projector)?;
    let basis = analytic_killing_basis(&geom, bc.alpha());
    Ok(Machinery { op, basis })
}

fn out_dir(common: &CommonArgs) -> Result<PathBuf, Error> {
    let out = common
        .out
        .clone()
        .or_else(|| std::env::var("SURFNS_OUT").ok().map(PathBuf::from))
        .ok_or_else(|| Error::Config("--out is required".into()))?;
    let force = common.force || std::env::var("SURFNS_FORCE").is_ok();
    io::prepare_run_dir(&out, force)
}

fn cmd_simulate(common: &CommonArgs) -> Result<bool, Error> {
    let (cfg, echo) = load_config(common)?;
    init_threads(cfg.solver.threads);
    let dir = out_dir(common)?;
    let run = cfg
        .run
        .clone()
        .ok_or_else(|| Error::Config("a [run] section is required to simulate".into()))?;
    io::write_manifest(&dir, &echo, "simulate", run.seed)?;
    let m = build_machinery(&cfg)?;

    let ic = match run.initial.as_deref() {
        None | Some("random-div-free") => InitialCondition::RandomDivFree {
            seed: run.seed,
            amplitude: run.amplitude,
            remove_killing: run.remove_killing,
        },
        Some("zero") => InitialCondition::Zero,
        Some("rotation") => InitialCondition::Rotation {
            amplitude: run.amplitude,
        },
        Some("rotation-plus-random") => InitialCondition::RotationPlusRandom {
            rotation_amplitude: run.rotation_amplitude.unwrap_or(0.3),
            amplitude: run.amplitude,
            seed: run.seed,
        },
        Some("from-file") => {
            let path = run.field_file.clone().ok_or_else(|| {
                Error::Config("run.field_file is required for initial = 'from-file'".into())
            })?;
            InitialCondition::FromField(io::read_field_csv(path.as_ref(), &m.op.geom)?)
        }
        Some(other) => return Err(Error::Config(format!("unknown initial '{other}'"))),
    };
    let u0 = build_initial_condition(&m.op, &m.basis, &ic)?;

    let t_end = run.t_end.unwrap_or(1.0);
    let controls = TimeControls {
        dt: run.dt,
        t_end,
        c_cfl: run.c_cfl,
        adaptive_dt: run.adaptive_dt,
        advection: run.advection,
        sample_every: run.sample_every,
        solver_tol: cfg.solver.tol,
        stop_dist: run.stop_dist,
        max_steps: 10_000_000,
    };
    let (mut integ, mut state) = Integrator::new(&m.op, &m.basis, controls, &u0)?;
    let diag = integ.run(&mut state)?;
    io::write_diagnostics_csv(&dir.join("diagnostics.csv"), &diag)?;
    io::write_vtk_vector(&dir.join("final.vtk"), &state.u, "velocity")?;
    if run.vtk_every > 0 {
        io::write_vtk_scalar(
            &dir.join("pressure_potential.vtk"),
            &state.pressure_potential,
            "pressure_potential",
        )?;
    }

    let times: Vec<f64> = diag.samples.iter().map(|s| s.t).collect();
    let dist: Vec<f64> = diag.samples.iter().map(|s| s.dist_to_equilibrium).collect();
    let u0n = (2.0 * diag.samples[0].energy).sqrt();
    match fit_decay_rate(&times, &dist, 0.6, 1e-12 * u0n.max(1e-30)) {
        DecayFit::Fit { beta, r_squared } => {
            println!(
                "simulate: t = {:.4}, steps = {}, dist_to_equilibrium = {:.3e}, fitted beta = {:.4} (r2 = {:.4})",
                state.t,
                integ.steps_taken,
                dist.last().unwrap(),
                beta,
                r_squared
            );
        }
        DecayFit::Degenerate => {
            println!(
                "simulate: t = {:.4}, steps = {}, dist_to_equilibrium = {:.3e} (decay fit degenerate)",
                state.t,
                integ.steps_taken,
                dist.last().unwrap()
            );
        }
    }
    println!("diagnostics: {}", dir.join("diagnostics.csv").display());
    Ok(true)
}

fn cmd_eigens(common: &CommonArgs, k: Option<usize>) -> Result<bool, Error> {
    let (cfg, echo) = load_config(common)?;
    init_threads(cfg.solver.threads);
    let dir = out_dir(common)?;
    let seed = cfg.run.as_ref().map(|r| r.seed).unwrap_or(0);
    io::write_manifest(&dir, &echo, "eigens", seed)?;
    let m = build_machinery(&cfg)?;
    let k = k.or(cfg.run.as_ref().map(|r| r.k)).unwrap_or(10);
    let res = eigenpairs(&m.op, k, cfg.solver.eigen_tol)?;
    io::write_eigen_csv(&dir.join("eigenvalues.csv"), &res)?;
    for (i, f) in res.eigenfields.iter().enumerate().take(4) {
        io::write_vtk_vector(&dir.join(format!("eigenfield_{i}.vtk")), f, "eigenfield")?;
    }
    let mut ok = true;
    for (i, (v, r)) in res.eigenvalues.iter().zip(&res.residuals).enumerate() {
        println!("eigens: lambda_{i} = {v:.8e} (residual {r:.2e})");
        if *v < -1e-8 {
            ok = false;
        }
    }
    let nb = numeric_killing_basis(&m.op, 1e-6)?;
    println!(
        "eigens: kernel dimension {} (threshold 1e-6 * lambda_next), defect {:.2e}",
        nb.dim(),
        nb.defect
    );
    Ok(ok)
}

fn cmd_korn(common: &CommonArgs) -> Result<bool, Error> {
    let (cfg, echo) = load_config(common)?;
    init_threads(cfg.solver.threads);
    let dir = out_dir(common)?;
    let seed = cfg.run.as_ref().map(|r| r.seed).unwrap_or(0);
    io::write_manifest(&dir, &echo, "korn", seed)?;

    let mut rows = Vec::new();
    let (n1, n2) = (cfg.geometry.n1, cfg.geometry.n2);
    for scale in [1usize, 2] {
        let mut c2 = cfg.clone();
        c2.geometry.n1 = n1 * scale;
        c2.geometry.n2 = n2 * scale;
        let m = build_machinery(&c2)?;
        let c = korn_constant(&m.op, &m.basis)?;
        println!(
            "korn: resolution {}x{} -> C = {c:.6}",
            c2.geometry.n1, c2.geometry.n2
        );
        rows.push((c2.geometry.n1, c));
    }
    io::write_korn_csv(&dir.join("korn.csv"), &rows)?;
    let rel = (rows[0].1 - rows[1].1).abs() / rows[1].1;
    println!("korn: relative change under refinement {rel:.3e}");
    Ok(rel < 0.05)
}

fn cmd_identities(resolution: usize, out: Option<PathBuf>) -> Result<bool, Error> {
    let lines = surfns::battery::run_identities(resolution);
    let mut all = true;
    let mut report = String::new();
    for l in &lines {
        let line = surfns::battery::format_line(l);
        println!("{line}");
        report.push_str(&line);
        report.push('\n');
        all &= l.pass;
    }
    if let Some(path) = out {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        std::fs::write(path, report)?;
    }
    Ok(all)
}

fn cmd_project(common: &CommonArgs, field: Option<PathBuf>) -> Result<bool, Error> {
    let (cfg, echo) = load_config(common)?;
    init_threads(cfg.solver.threads);
    let dir = out_dir(common)?;
    let seed = cfg.run.as_ref().map(|r| r.seed).unwrap_or(0);
    io::write_manifest(&dir, &echo, "project", seed)?;
    let m = build_machinery(&cfg)?;
    let path = field
        .or_else(|| {
            cfg.run
                .as_ref()
                .and_then(|r| r.field_file.clone().map(PathBuf::from))
        })
        .ok_or_else(|| Error::Config("--field (or run.field_file) is required".into()))?;
    let u = io::read_field_csv(&path, &m.op.geom)?;
    let res = helmholtz_project(&m.op.projector, &u, cfg.solver.tol)?;
    io::write_field_csv(&dir.join("projected.csv"), &res.projected)?;
    io::write_vtk_vector(&dir.join("projected.vtk"), &res.projected, "projected")?;
    io::write_vtk_scalar(&dir.join("potential.vtk"), &res.potential, "potential")?;
    println!(
        "project: div residual {:.3e}, flux residual {:.3e}",
        res.residual_div, res.residual_flux
    );
    Ok(res.residual_div < 1e-8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Simulate(c) => cmd_simulate(c),
        Command::Eigens { common, k } => cmd_eigens(common, *k),
        Command::Korn(c) => cmd_korn(c),
        Command::Identities { resolution, out } => cmd_identities(*resolution, out.clone()),
        Command::Project { common, field } => cmd_project(common, field.clone()),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("verification failed");
            ExitCode::from(1)
        }
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
