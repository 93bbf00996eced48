//! `galcm`: command-line driver for the galactic centre-manifold toolkit.

mod commands;
mod config;
mod plot;

use clap::{Args, Parser, Subcommand};
use config::RunConfig;
use galcm::{Error, Result};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "galcm", version, about = "Saddle-point normal forms, invariant manifolds and connections in a barred galaxy potential")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Configuration file of `section.key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one configuration key, e.g. `--set model.omega=3`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    sets: Vec<String>,
    /// Output root; defaults to $GALCM_OUT, then the configured `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for parallel loops.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true)]
    v0: Option<f64>,
    #[arg(long, global = true)]
    r0: Option<f64>,
    #[arg(long = "p-phi", global = true)]
    p_phi: Option<f64>,
    #[arg(long = "q-phi", global = true)]
    q_phi: Option<f64>,
    #[arg(long, global = true)]
    omega: Option<f64>,
    /// Normal-form order N.
    #[arg(long, global = true)]
    order: Option<usize>,
    /// Saddle point, L1 or L2.
    #[arg(long, global = true)]
    point: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Lagrange points, saddle energy and linear frequencies.
    Equilibria {
        /// Also write the zero-velocity curve at this Jacobi energy.
        #[arg(long)]
        contour_energy: Option<f64>,
    },
    /// Build and store the normal-form reduction bundles.
    Reduce {
        /// centre-manifold, hyperbolic-normal-form or both.
        #[arg(long)]
        elimination: Option<String>,
    },
    /// Break-time maps of the truncated centre-manifold flow.
    Converge {
        /// Jacobi energies, comma list or start:end:steps.
        #[arg(long)]
        energy: Option<String>,
        /// Position tolerances (kpc).
        #[arg(long)]
        tol: Option<String>,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        t_max: Option<f64>,
        #[arg(long)]
        t_ref: Option<f64>,
    },
    /// Planar or vertical Lyapunov orbit.
    Orbit {
        #[arg(long)]
        kind: Option<String>,
        #[arg(long)]
        energy: Option<f64>,
    },
    /// Globalized invariant-manifold tubes.
    Manifold {
        /// planar-lyapunov, vertical-lyapunov or torus.
        #[arg(long)]
        object: Option<String>,
        #[arg(long)]
        energy: Option<f64>,
        #[arg(long)]
        eps: Option<f64>,
        /// Branch list, or `all`.
        #[arg(long)]
        branch: Option<String>,
        #[arg(long)]
        n_phase: Option<usize>,
        /// Record crossings of S, S' or I.
        #[arg(long)]
        surface: Option<String>,
    },
    /// First-return curve of a planar Lyapunov tube.
    Section {
        #[arg(long)]
        energy: Option<f64>,
        #[arg(long)]
        branch: Option<String>,
        #[arg(long)]
        surface: Option<String>,
        #[arg(long)]
        cut: Option<usize>,
        #[arg(long)]
        n_phase: Option<usize>,
    },
    /// Homoclinic and heteroclinic connections and the resulting morphology.
    Connect {
        #[arg(long)]
        energy: Option<String>,
        /// Energies above the saddle value, comma list.
        #[arg(long)]
        delta_e: Option<String>,
        /// outer or inner manifold branches.
        #[arg(long)]
        side: Option<String>,
        #[arg(long)]
        refine: Option<bool>,
        #[arg(long)]
        n_phase: Option<usize>,
    },
    /// Parameter sweeps of morphology or eigenvalues.
    Sweep {
        /// morphology or eigen.
        #[arg(long)]
        what: Option<String>,
        /// Parameter: p_phi, q_phi, omega, v0 or r0.
        #[arg(long)]
        vary: Option<String>,
        #[arg(long)]
        values: Option<String>,
        #[arg(long)]
        delta_e: Option<String>,
        #[arg(long)]
        n_phase: Option<usize>,
    },
    /// Render stored CSV output as SVG.
    Plot {
        /// tube, orbit, curve, contour, map or sweep.
        #[arg(long)]
        kind: String,
        /// Output SVG path.
        #[arg(long)]
        svg: Option<PathBuf>,
        inputs: Vec<PathBuf>,
    },
}

fn job(cfg: &mut RunConfig, key: &str, value: Option<impl ToString>) {
    if let Some(v) = value {
        cfg.job.insert(key.into(), v.to_string());
    }
}

fn resolve(g: &Global) -> Result<RunConfig> {
    let mut cfg = RunConfig::from_env();
    let env_out = std::env::var_os(config::OUTPUT_ENV).map(PathBuf::from);
    if let Some(path) = &g.config {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        cfg.apply_text(&text)?;
        if let Some(dir) = &env_out {
            cfg.output = dir.clone();
        }
    }
    for s in &g.sets {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("--set expects KEY=VALUE, got '{s}'")))?;
        cfg.set(k.trim(), v)?;
    }
    let flags = [
        ("model.v0", g.v0),
        ("model.r0", g.r0),
        ("model.p_phi", g.p_phi),
        ("model.q_phi", g.q_phi),
        ("model.omega", g.omega),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            cfg.set(k, &v.to_string())?;
        }
    }
    if let Some(n) = g.order {
        cfg.reduction.order = n;
    }
    if let Some(p) = &g.point {
        cfg.reduction.point = p.parse()?;
    }
    if let Some(out) = &g.out {
        cfg.output = out.clone();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = resolve(&cli.global)?;
    if let Some(n) = cli.global.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidArgument(format!("--jobs: {e}")))?;
    }
    let c = &mut cfg;
    match cli.command {
        Command::Equilibria { contour_energy } => {
            job(c, "contour_energy", contour_energy);
            commands::equilibria(c)
        }
        Command::Reduce { elimination } => {
            job(c, "elimination", elimination);
            if cli.global.point.is_some() {
                job(c, "point", Some(c.reduction.point.name()));
            }
            commands::reduce_cmd(c)
        }
        Command::Converge {
            energy,
            tol,
            grid,
            t_max,
            t_ref,
        } => {
            job(c, "energy", energy);
            job(c, "tol", tol);
            job(c, "grid", grid);
            job(c, "t_max", t_max);
            job(c, "t_ref", t_ref);
            commands::converge(c)
        }
        Command::Orbit { kind, energy } => {
            job(c, "kind", kind);
            job(c, "energy", energy);
            commands::orbit(c)
        }
        Command::Manifold {
            object,
            energy,
            eps,
            branch,
            n_phase,
            surface,
        } => {
            job(c, "object", object);
            job(c, "energy", energy);
            job(c, "eps", eps);
            job(c, "branch", branch);
            job(c, "n_phase", n_phase);
            job(c, "surface", surface);
            commands::manifold(c)
        }
        Command::Section {
            energy,
            branch,
            surface,
            cut,
            n_phase,
        } => {
            job(c, "energy", energy);
            job(c, "branch", branch);
            job(c, "surface", surface);
            job(c, "cut", cut);
            job(c, "n_phase", n_phase);
            commands::section(c)
        }
        Command::Connect {
            energy,
            delta_e,
            side,
            refine,
            n_phase,
        } => {
            job(c, "energy", energy);
            job(c, "delta_e", delta_e);
            job(c, "side", side);
            job(c, "refine", refine);
            job(c, "n_phase", n_phase);
            commands::connect(c)
        }
        Command::Sweep {
            what,
            vary,
            values,
            delta_e,
            n_phase,
        } => {
            job(c, "what", what);
            job(c, "vary", vary);
            job(c, "values", values);
            job(c, "delta_e", delta_e);
            job(c, "n_phase", n_phase);
            commands::sweep(c)
        }
        Command::Plot { kind, svg, inputs } => {
            job(c, "kind", Some(kind));
            job(c, "svg", svg.map(|p| p.display().to_string()));
            commands::plot(c, &inputs)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
