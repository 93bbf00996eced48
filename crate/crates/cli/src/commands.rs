//! One function per subcommand. Every command writes its files under the
//! output root together with a manifest that echoes the resolved
//! configuration and the hashes of its inputs and outputs.

use crate::config::RunConfig;
use crate::plot::{Figure, Heat, Line};
use galcm::connections::{
    classify_morphology, openness_ratio, shape_sweep, BranchSide, ConnectionOptions, ModelContext, MorphologyReport, SectionCurve,
    TubeSpec,
};
use galcm::convergence::{convergence_maps, domain_radius, ConvergenceOptions};
use galcm::dynamics::{
    globalize_manifold, invariant_curves, manifold_ics, planar_lyapunov, vertical_lyapunov, Branch, GlobalizeOptions, ManifoldSource,
    OrbitKind, Orientation, PeriodicOrbit, Sample, StopRule, Surface,
};
use galcm::equilibria::{eigen_sweep, find_lagrange_points, linearize, saddle_energy, RowFlag, SweepParam};
use galcm::model::{zero_velocity_curve, ContourOptions};
use galcm::ode::OdeOptions;
use galcm::reduction::{reduce, Elimination, Reduction};
use galcm::store::{csv_table, load_reduction, read_reduction_manifest, save_reduction, sha256_hex, write_hashed, CsvField, FileHash, Table};
use galcm::{Error, ModelParams, Result, SaddlePoint};
use serde::Serialize;
use std::path::{Path, PathBuf};

#[derive(Serialize)]
struct Manifest<'a, T: Serialize> {
    command: &'a str,
    config: &'a RunConfig,
    config_text: String,
    inputs: Vec<FileHash>,
    outputs: Vec<FileHash>,
    summary: T,
}

/// Output files of one run, collected for the manifest.
struct Run<'a> {
    cfg: &'a RunConfig,
    command: &'static str,
    dir: PathBuf,
    inputs: Vec<FileHash>,
    outputs: Vec<FileHash>,
}

impl<'a> Run<'a> {
    fn new(cfg: &'a RunConfig, command: &'static str) -> Result<Self> {
        let dir = cfg.output.join(command);
        std::fs::create_dir_all(&dir)?;
        Ok(Self {
            cfg,
            command,
            dir,
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, text: &str) -> Result<()> {
        if let Some(parent) = self.dir.join(name).parent() {
            std::fs::create_dir_all(parent)?;
        }
        let h = write_hashed(&self.dir, name, text)?;
        self.outputs.push(h);
        Ok(())
    }

    fn finish<T: Serialize>(self, summary: T) -> Result<()> {
        let m = Manifest {
            command: self.command,
            config: self.cfg,
            config_text: self.cfg.to_text(),
            inputs: self.inputs,
            outputs: self.outputs,
            summary,
        };
        std::fs::write(self.dir.join("manifest.json"), serde_json::to_string_pretty(&m)? + "\n")?;
        println!("wrote {}", self.dir.display());
        Ok(())
    }
}

/// Short, file-name-safe rendering of a number.
fn tag(v: f64) -> String {
    if v != 0.0 && v.abs() < 1e-3 {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

fn required(cfg: &RunConfig, key: &str) -> Result<f64> {
    cfg.job_f64(key)?
        .ok_or_else(|| Error::InvalidArgument(format!("missing --{} (job.{key})", key.replace('_', "-"))))
}

fn ode(cfg: &RunConfig) -> OdeOptions {
    OdeOptions::with_tolerances(cfg.integrator.rtol, cfg.integrator.atol)
}

fn sample_rows(samples: &[Sample]) -> Vec<Vec<CsvField>> {
    samples
        .iter()
        .map(|s| {
            let mut row: Vec<CsvField> = vec![s.t.into()];
            row.extend(s.state.iter().map(|&v| CsvField::from(v)));
            row.push(s.energy.into());
            row
        })
        .collect()
}

const TRAJ_HEADER: [&str; 8] = ["t", "x", "y", "z", "px", "py", "pz", "EJ"];

fn bundle_dir(cfg: &RunConfig, point: SaddlePoint, elimination: Elimination) -> PathBuf {
    cfg.output.join("reduce").join(format!("{}_{}", point.name(), elimination.name()))
}

/// Loads the reduction bundle a command depends on, checking that it was
/// built for the configured model and order.
fn need_reduction(run: &mut Run<'_>, point: SaddlePoint, elimination: Elimination) -> Result<Reduction> {
    let cfg = run.cfg;
    let dir = bundle_dir(cfg, point, elimination);
    let missing = || {
        Error::Artifact(format!(
            "no {} reduction bundle for {} at {}; run `galcm reduce --order {} --point {} --elimination {}` first",
            elimination.name(),
            point.name(),
            dir.display(),
            cfg.reduction.order,
            point.name(),
            elimination.name()
        ))
    };
    let m = read_reduction_manifest(&dir).map_err(|_| missing())?;
    if m.params != cfg.model || m.order != cfg.reduction.order {
        return Err(Error::Artifact(format!(
            "bundle at {} was built for other parameters or order {}; rerun `galcm reduce`",
            dir.display(),
            m.order
        )));
    }
    let text = std::fs::read(dir.join(galcm::store::MANIFEST))?;
    run.inputs.push(FileHash {
        name: dir.join(galcm::store::MANIFEST).display().to_string(),
        sha256: sha256_hex(&text),
    });
    load_reduction(&dir)
}

fn model_context(run: &mut Run<'_>) -> Result<ModelContext> {
    let l1 = need_reduction(run, SaddlePoint::L1, Elimination::HyperbolicNormalForm)?;
    let l2 = need_reduction(run, SaddlePoint::L2, Elimination::HyperbolicNormalForm)?;
    Ok(ModelContext {
        params: run.cfg.model,
        l1,
        l2,
    })
}

fn connection_options(cfg: &RunConfig) -> Result<ConnectionOptions> {
    let d = ConnectionOptions::default();
    Ok(ConnectionOptions {
        order: cfg.reduction.order,
        epsilon: cfg.job_f64("eps")?.unwrap_or(d.epsilon),
        n_phase: cfg.job_usize("n_phase")?.unwrap_or(d.n_phase),
        t_max: cfg.integrator.t_max,
        stop_radius: cfg.integrator.stop_radius,
        ode: ode(cfg),
        refine: cfg.job_str("refine").map_or(Ok(true), |v| v.parse().map_err(|_| Error::Parse(format!("job.refine: '{v}'"))))?,
        refine_epsilon: d.refine_epsilon,
        side: cfg.job_str("side").map_or(Ok(d.side), str::parse)?,
    })
}

fn contour_rows(params: &ModelParams, level: f64) -> String {
    let c = zero_velocity_curve(params, level, &ContourOptions::for_params(params));
    let mut out = format!("# level={}\nx,y\n", galcm::poly::fmt_f64(level));
    for (k, line) in c.polylines.iter().enumerate() {
        if k > 0 {
            out.push('\n');
        }
        for p in line {
            out.push_str(&format!("{},{}\n", galcm::poly::fmt_f64(p[0]), galcm::poly::fmt_f64(p[1])));
        }
    }
    out
}

pub const EQUILIBRIA_KEYS: &[&str] = &["contour_energy"];

pub fn equilibria(cfg: &RunConfig) -> Result<()> {
    cfg.check_job_keys(EQUILIBRIA_KEYS)?;
    let set = find_lagrange_points(&cfg.model)?;
    let mut run = Run::new(cfg, "equilibria")?;
    #[derive(Serialize)]
    struct Summary {
        no_saddle_points: bool,
        saddle_energy: Option<f64>,
        lambda: Option<f64>,
        omega1: Option<f64>,
        omega2: Option<f64>,
    }
    for (p, s, stab) in &set.points {
        println!("{p:?}  x={:.9} y={:.9}  {stab:?}", s.x, s.y);
    }
    if set.no_saddle_points {
        println!("no saddle points: the pattern speed is zero, only the central equilibrium exists");
        run.write("equilibria.json", &serde_json::to_string_pretty(&set)?)?;
        return run.finish(Summary {
            no_saddle_points: true,
            saddle_energy: None,
            lambda: None,
            omega1: None,
            omega2: None,
        });
    }
    let e = saddle_energy(&cfg.model)?;
    let lin = linearize(&cfg.model, SaddlePoint::L1)?;
    println!("E_J(L1) = {e:.3}");
    println!("lambda = {:.10}  omega1 = {:.10}  omega2 = {:.10}", lin.lambda, lin.omega1, lin.omega2);
    #[derive(Serialize)]
    struct Out<'a> {
        lagrange: &'a galcm::equilibria::LagrangeSet,
        saddle_energy: f64,
        l1: &'a galcm::Linearization,
        l2: &'a galcm::Linearization,
    }
    let lin2 = linearize(&cfg.model, SaddlePoint::L2)?;
    run.write(
        "equilibria.json",
        &serde_json::to_string_pretty(&Out {
            lagrange: &set,
            saddle_energy: e,
            l1: &lin,
            l2: &lin2,
        })?,
    )?;
    if let Some(level) = cfg.job_f64("contour_energy")? {
        run.write("zvc.csv", &contour_rows(&cfg.model, level))?;
    }
    run.finish(Summary {
        no_saddle_points: false,
        saddle_energy: Some(e),
        lambda: Some(lin.lambda),
        omega1: Some(lin.omega1),
        omega2: Some(lin.omega2),
    })
}

pub const REDUCE_KEYS: &[&str] = &["point", "elimination"];

pub fn reduce_cmd(cfg: &RunConfig) -> Result<()> {
    cfg.check_job_keys(REDUCE_KEYS)?;
    let points = match cfg.job_str("point").unwrap_or("both") {
        "both" => vec![SaddlePoint::L1, SaddlePoint::L2],
        p => vec![p.parse()?],
    };
    let elims = match cfg.job_str("elimination").unwrap_or("both") {
        "both" => vec![Elimination::CentreManifold, Elimination::HyperbolicNormalForm],
        e => vec![e.parse()?],
    };
    let mut run = Run::new(cfg, "reduce")?;
    #[derive(Serialize)]
    struct Entry {
        bundle: String,
        h0: f64,
        lambda: f64,
        omega1: f64,
        omega2: f64,
        mixing_monomials: usize,
        linear_residual: f64,
    }
    let mut summary = Vec::new();
    for &point in &points {
        for &elimination in &elims {
            let red = reduce(&cfg.model, point, cfg.reduction.order, elimination)?;
            let dir = bundle_dir(cfg, point, elimination);
            let m = save_reduction(&red, &dir)?;
            let name = format!("{}_{}", point.name(), elimination.name());
            for f in m.files {
                run.outputs.push(FileHash {
                    name: format!("{name}/{}", f.name),
                    ..f
                });
            }
            println!(
                "{name}: N={} h0={:.6} lambda={:.10} mixing monomials={}",
                red.order,
                red.h0,
                red.linearization.lambda,
                red.mixing_monomials()
            );
            summary.push(Entry {
                bundle: name,
                h0: red.h0,
                lambda: red.linearization.lambda,
                omega1: red.linearization.omega1,
                omega2: red.linearization.omega2,
                mixing_monomials: red.mixing_monomials(),
                linear_residual: red.linear_residual,
            });
        }
    }
    run.finish(summary)
}

pub const CONVERGE_KEYS: &[&str] = &["energy", "tol", "grid", "t_max", "t_ref"];

pub fn converge(cfg: &RunConfig) -> Result<()> {
    cfg.check_job_keys(CONVERGE_KEYS)?;
    let mut run = Run::new(cfg, "converge")?;
    let red = need_reduction(&mut run, cfg.reduction.point, Elimination::CentreManifold)?;
    let energies = cfg.job_list("energy")?.unwrap_or_else(|| vec![red.h0 + 5.0]);
    let tols = cfg.job_list("tol")?.unwrap_or_else(|| vec![1e-6, 1e-9]);
    let d = ConvergenceOptions::default();
    let opts = ConvergenceOptions {
        grid_n: cfg.job_usize("grid")?.unwrap_or(d.grid_n),
        t_max: cfg.job_f64("t_max")?.unwrap_or(d.t_max),
        ode: ode(cfg),
        ..d
    };
    let t_ref = cfg.job_f64("t_ref")?.unwrap_or(5.0);
    #[derive(Serialize)]
    struct Entry {
        file: String,
        energy: f64,
        tol: f64,
        feasible: usize,
        mean_t_break: f64,
        fraction_reaching_t_ref: f64,
        domain_radius: f64,
        note: String,
    }
    let mut summary = Vec::new();
    for &e in &energies {
        for map in convergence_maps(&red, e, &tols, &opts)? {
            let file = format!("map_E{}_tol{}.csv", tag(e), tag(map.tol));
            let text = csv_table(
                &[
                    ("point", map.point.name().into()),
                    ("order", map.order.to_string()),
                    ("energy", galcm::poly::fmt_f64(map.energy)),
                    ("tol", galcm::poly::fmt_f64(map.tol)),
                    ("t_max", galcm::poly::fmt_f64(map.t_max)),
                    ("grid", map.grid_n.to_string()),
                    ("radius", galcm::poly::fmt_f64(map.radius)),
                    ("note", map.note.clone()),
                ],
                &["q2", "p2", "x", "y", "t_break"],
                map.cells.iter().map(|c| vec![c.q2.into(), c.p2.into(), c.x.into(), c.y.into(), c.t_break.into()]),
            );
            run.write(&file, &text)?;
            println!(
                "E={e} tol={:e}: {} cells, mean t_break {:.3}, {:.1}% reach t={t_ref}",
                map.tol,
                map.n_feasible(),
                map.mean_t_break(),
                100.0 * map.fraction_at_least(t_ref)
            );
            summary.push(Entry {
                file,
                energy: e,
                tol: map.tol,
                feasible: map.n_feasible(),
                mean_t_break: map.mean_t_break(),
                fraction_reaching_t_ref: map.fraction_at_least(t_ref),
                domain_radius: domain_radius(&map, t_ref),
                note: map.note.clone(),
            });
        }
    }
    run.finish(summary)
}

pub const ORBIT_KEYS: &[&str] = &["kind", "energy"];

fn orbit_for(red: &Reduction, kind: OrbitKind, energy: f64) -> Result<PeriodicOrbit> {
    match kind {
        OrbitKind::PlanarLyapunov => planar_lyapunov(red, energy),
        OrbitKind::VerticalLyapunov => vertical_lyapunov(red, energy),
    }
}

pub fn orbit(cfg: &RunConfig) -> Result<()> {
    cfg.check_job_keys(ORBIT_KEYS)?;
    let kind: OrbitKind = cfg.job_str("kind").unwrap_or("planar").parse()?;
    let energy = required(cfg, "energy")?;
    let mut run = Run::new(cfg, "orbit")?;
    let red = need_reduction(&mut run, cfg.reduction.point, Elimination::HyperbolicNormalForm)?;
    let o = orbit_for(&red, kind, energy)?;
    let file = format!("{}_{}_E{}.csv", kind.name(), red.point.name(), tag(energy));
    let meta = [
        ("kind", kind.name().to_string()),
        ("point", red.point.name().into()),
        ("EJ", galcm::poly::fmt_f64(energy)),
        ("period", galcm::poly::fmt_f64(o.period)),
    ];
    run.write(&file, &csv_table(&meta, &TRAJ_HEADER, sample_rows(&o.trajectory.samples)))?;
    println!("{} around {}: period {:.10}, closure {:.3e}, refined {}", kind.name(), red.point.name(), o.period, o.closure, o.refined);
    #[derive(Serialize)]
    struct Summary {
        file: String,
        period: f64,
        closure: f64,
        refined: bool,
        nf_amplitude: f64,
        initial: galcm::PhaseState,
    }
    run.finish(Summary {
        file,
        period: o.period,
        closure: o.closure,
        refined: o.refined,
        nf_amplitude: o.nf_amplitude,
        initial: o.initial,
    })
}

pub const MANIFOLD_KEYS: &[&str] = &["object", "energy", "eps", "branch", "n_phase", "surface", "n_curves", "curve"];

pub fn manifold(cfg: &RunConfig) -> Result<()> {
    cfg.check_job_keys(MANIFOLD_KEYS)?;
    let energy = required(cfg, "energy")?;
    let eps = cfg.job_f64("eps")?.unwrap_or(1e-5);
    let n_phase = cfg.job_usize("n_phase")?.unwrap_or(50);
    let object = cfg.job_str("object").unwrap_or("planar-lyapunov");
    let branches: Vec<Branch> = match cfg.job_str("branch").unwrap_or("unstable-outer") {
        "all" => vec![Branch::UnstableInner, Branch::UnstableOuter, Branch::StableInner, Branch::StableOuter],
        list => list.split(',').map(|b| b.trim().parse()).collect::<Result<_>>()?,
    };
    let surface: Option<Surface> = cfg.job_str("surface").map(str::parse).transpose()?;
    let mut run = Run::new(cfg, "manifold")?;
    let red = need_reduction(&mut run, cfg.reduction.point, Elimination::HyperbolicNormalForm)?;
    let (orbit, curves);
    let source = if object == "torus" {
        let n = cfg.job_usize("n_curves")?.unwrap_or(5);
        curves = invariant_curves(&red, energy, n, n_phase.max(20))?;
        let k = cfg.job_usize("curve")?.unwrap_or(n.saturating_sub(1)).min(curves.len().saturating_sub(1));
        ManifoldSource::Torus(curves.get(k).ok_or_else(|| Error::InvalidArgument("no invariant curves".into()))?)
    } else {
        orbit = orbit_for(&red, object.parse()?, energy)?;
        ManifoldSource::Orbit(&orbit)
    };
    let x_l = red.equilibrium().x.abs();
    let opts = GlobalizeOptions {
        t_max: cfg.integrator.t_max,
        stop: StopRule::Radius(cfg.integrator.stop_radius * x_l),
        record: surface.map(|s| vec![(s, Orientation::Any)]).unwrap_or_default(),
        ode: ode(cfg),
        keep_dense: false,
    };
    #[derive(Serialize)]
    struct Tube {
        branch: String,
        energy: f64,
        trajectories: usize,
        failed: usize,
        events: usize,
    }
    let mut summary = Vec::new();
    for branch in branches {
        let ics = manifold_ics(&red, source, branch, eps, n_phase)?;
        let tube = globalize_manifold(&red.params, &ics, branch, &opts)?;
        let base = format!("{}_{}_{}", red.point.name(), object, branch.name());
        let mut events = Vec::new();
        for (k, tt) in tube.trajectories.iter().enumerate() {
            let meta = [
                ("branch", branch.name().to_string()),
                ("phase", galcm::poly::fmt_f64(tt.phase)),
                ("EJ", galcm::poly::fmt_f64(tube.energy)),
                ("status", format!("{:?}", tt.trajectory.status)),
            ];
            run.write(&format!("{base}/traj_{k:03}.csv"), &csv_table(&meta, &TRAJ_HEADER, sample_rows(&tt.trajectory.samples)))?;
            events.extend(tt.trajectory.crossings.iter().map(|c| {
                let mut row: Vec<CsvField> = vec![c.t.into()];
                row.extend(c.barycentric.to_array().iter().map(|&v| CsvField::from(v)));
                row
            }));
        }
        if let Some(s) = surface {
            let meta = [("surface", s.name().to_string())];
            run.write(&format!("{base}/events.csv"), &csv_table(&meta, &TRAJ_HEADER[..7], events.clone()))?;
        }
        println!("{base}: {} trajectories, {} section events", tube.trajectories.len(), events.len());
        summary.push(Tube {
            branch: branch.name().into(),
            energy: tube.energy,
            trajectories: tube.trajectories.len(),
            failed: tube.trajectories.iter().filter(|t| t.failed()).count(),
            events: events.len(),
        });
    }
    run.finish(summary)
}

fn curve_csv(c: &SectionCurve) -> String {
    let (a, b) = match c.surface {
        Surface::SPrime => ("y", "ydot"),
        _ => ("x", "xdot"),
    };
    let meta = [
        ("surface", c.surface.name().to_string()),
        ("EJ", galcm::poly::fmt_f64(c.energy)),
        ("tube", c.tube_id()),
        ("cut", c.cut.to_string()),
        ("closed", c.is_closed().to_string()),
        ("simple", c.simple.to_string()),
    ];
    csv_table(&meta, &["s", a, b], c.points.iter().map(|p| vec![p.phase.into(), p.coord.into(), p.vel.into()]))
}

pub const SECTION_KEYS: &[&str] = &["energy", "branch", "surface", "cut", "n_phase", "eps"];

pub fn section(cfg: &RunConfig) -> Result<()> {
    cfg.check_job_keys(SECTION_KEYS)?;
    let energy = required(cfg, "energy")?;
    let branch: Branch = cfg.job_str("branch").unwrap_or("unstable-outer").parse()?;
    let surface: Surface = cfg.job_str("surface").unwrap_or("S").parse()?;
    let cut = cfg.job_usize("cut")?.unwrap_or(1);
    let mut run = Run::new(cfg, "section")?;
    let ctx = model_context(&mut run)?;
    let opts = connection_options(cfg)?;
    let red = ctx.reduction(cfg.reduction.point);
    let orbit = planar_lyapunov(red, energy)?;
    orbit.require_refined()?;
    let spec = TubeSpec {
        red,
        orbit: &orbit,
        branch,
        epsilon: opts.epsilon,
    };
    let curve = ctx.section_curve(spec, surface, cut, &opts)?;
    let file = format!("{}_{}_cut{cut}.csv", curve.tube_id().replace(':', "_"), if surface == Surface::SPrime { "Sprime" } else { "S" });
    run.write(&file, &curve_csv(&curve))?;
    println!(
        "{}: {} points, closed {}, simple {}, {} missing",
        curve.tube_id(),
        curve.points.len(),
        curve.is_closed(),
        curve.simple,
        curve.missing
    );
    #[derive(Serialize)]
    struct Summary {
        file: String,
        surface: &'static str,
        energy: f64,
        tube: String,
        points: usize,
        missing: usize,
        closed: bool,
        simple: bool,
    }
    run.finish(Summary {
        file,
        surface: surface.name(),
        energy,
        tube: curve.tube_id(),
        points: curve.points.len(),
        missing: curve.missing,
        closed: curve.is_closed(),
        simple: curve.simple,
    })
}

pub const CONNECT_KEYS: &[&str] = &["energy", "delta_e", "side", "refine", "n_phase", "eps"];

#[derive(Serialize)]
struct ConnectionRecord {
    kind: &'static str,
    phase_u: f64,
    phase_s: f64,
    coord: f64,
    vel: f64,
    gap: f64,
    iterations: usize,
    start_distance: f64,
    end_distance: f64,
    file: String,
}

#[derive(Serialize)]
struct CandidateRecord {
    kind: &'static str,
    phase_u: f64,
    phase_s: f64,
    coord: f64,
    vel: f64,
    angle: f64,
    transversal: bool,
}

pub fn connect(cfg: &RunConfig) -> Result<()> {
    cfg.check_job_keys(CONNECT_KEYS)?;
    let mut run = Run::new(cfg, "connect")?;
    let ctx = model_context(&mut run)?;
    let opts = connection_options(cfg)?;
    let energies: Vec<f64> = match cfg.job_list("energy")? {
        Some(e) => e,
        None => {
            let des = cfg.job_list("delta_e")?.unwrap_or_else(|| vec![50.0, 100.0, 150.0]);
            des.iter().map(|d| ctx.saddle_energy() + d).collect()
        }
    };
    #[derive(Serialize)]
    struct Entry {
        energy: f64,
        delta_e: f64,
        side: BranchSide,
        class: &'static str,
        n_homoclinic: usize,
        n_heteroclinic: usize,
        r_s: Option<f64>,
        candidates: Vec<CandidateRecord>,
        connections: Vec<ConnectionRecord>,
        failures: Vec<String>,
        notes: Vec<String>,
    }
    let mut summary = Vec::new();
    for &e in &energies {
        let rep: MorphologyReport = classify_morphology(&ctx, e, &opts)?;
        let r_s = openness_ratio(&ctx, e, &opts).ok();
        let de = e - ctx.saddle_energy();
        let stem = format!("dE{}", tag((de * 1e6).round() / 1e6));
        let mut connections = Vec::new();
        let mut candidates = Vec::new();
        let mut failures = Vec::new();
        for set in rep.homoclinic.iter().chain(std::iter::once(&rep.heteroclinic)) {
            let kind = set.kind.name();
            run.write(&format!("{stem}/{kind}_unstable.csv"), &curve_csv(&set.unstable))?;
            run.write(&format!("{stem}/{kind}_stable.csv"), &curve_csv(&set.stable))?;
            candidates.extend(set.candidates.iter().map(|c| CandidateRecord {
                kind,
                phase_u: c.phase_u,
                phase_s: c.phase_s,
                coord: c.coord,
                vel: c.vel,
                angle: c.angle,
                transversal: c.transversal,
            }));
            failures.extend(set.failures.iter().cloned());
            for (i, c) in set.refined.iter().enumerate() {
                let file = format!("{stem}/{kind}_{i}.csv");
                run.write(&file, &csv_table(&[("kind", kind.into())], &TRAJ_HEADER, sample_rows(&c.trajectory)))?;
                connections.push(ConnectionRecord {
                    kind,
                    phase_u: c.phase_u,
                    phase_s: c.phase_s,
                    coord: c.coord,
                    vel: c.vel,
                    gap: c.gap,
                    iterations: c.iterations,
                    start_distance: c.start_distance,
                    end_distance: c.end_distance,
                    file,
                });
            }
        }
        println!(
            "dE={de:.3}: {} ({} homoclinic, {} heteroclinic transversal intersections; {} refined), R_s = {}",
            rep.class.name(),
            rep.n_homoclinic(),
            rep.n_heteroclinic(),
            connections.len(),
            r_s.map_or("n/a".into(), |r| format!("{r:.4}"))
        );
        summary.push(Entry {
            energy: e,
            delta_e: de,
            side: rep.side,
            class: rep.class.name(),
            n_homoclinic: rep.n_homoclinic(),
            n_heteroclinic: rep.n_heteroclinic(),
            r_s,
            candidates,
            connections,
            failures,
            notes: rep.notes,
        });
    }
    let text = serde_json::to_string_pretty(&summary)?;
    run.write("connections.json", &text)?;
    run.finish(summary)
}

pub const SWEEP_KEYS: &[&str] = &["vary", "values", "delta_e", "what", "side", "n_phase", "eps"];

pub fn sweep(cfg: &RunConfig) -> Result<()> {
    cfg.check_job_keys(SWEEP_KEYS)?;
    let vary: SweepParam = cfg.job_str("vary").unwrap_or("p_phi").parse()?;
    let values = cfg.job_list("values")?.unwrap_or_default();
    let what = cfg.job_str("what").unwrap_or("morphology");
    let mut run = Run::new(cfg, "sweep")?;
    let file = format!("{what}_{}.csv", vary.name());
    match what {
        "eigen" => {
            let rows = eigen_sweep(&cfg.model, vary, &values);
            let flag = |f: &RowFlag| match f {
                RowFlag::Ok => "ok".to_string(),
                RowFlag::Degenerate => "degenerate".into(),
                RowFlag::Invalid(r) => format!("invalid: {r}").replace(',', ";"),
            };
            for r in &rows {
                println!("{}={}: lambda {:.10} omega1 {:.10} omega2 {:.10} {}", vary.name(), r.value, r.lambda, r.omega1, r.omega2, flag(&r.flag));
            }
            let text = csv_table(
                &[("vary", vary.name().into())],
                &["param", "lambda", "omega1", "omega2", "flag"],
                rows.iter().map(|r| vec![r.value.into(), r.lambda.into(), r.omega1.into(), r.omega2.into(), CsvField::Text(flag(&r.flag))]),
            );
            run.write(&file, &text)?;
            run.finish(rows)
        }
        "morphology" => {
            let des = cfg.job_list("delta_e")?.unwrap_or_else(|| vec![50.0, 100.0, 150.0]);
            let opts = connection_options(cfg)?;
            let rows = shape_sweep(&cfg.model, vary, &values, &des, &opts);
            for r in &rows {
                println!(
                    "{}={} q_phi={:.4} dE={}: {} R_s={} homoclinic={} heteroclinic={}{}",
                    vary.name(),
                    r.param,
                    r.q_phi,
                    r.delta_e,
                    r.morphology.map_or("-", |m| m.name()),
                    r.r_s.map_or("-".into(), |v| format!("{v:.4}")),
                    r.n_homoclinic,
                    r.n_heteroclinic,
                    r.error.as_ref().map_or(String::new(), |e| format!(" ({e})"))
                );
            }
            let text = csv_table(
                &[("vary", vary.name().into())],
                &["param", "q_phi", "delta_e", "morphology", "R_s", "n_homo", "n_hetero", "error"],
                rows.iter().map(|r| {
                    vec![
                        r.param.into(),
                        r.q_phi.into(),
                        r.delta_e.into(),
                        r.morphology.map_or(CsvField::Empty, |m| m.name().into()),
                        r.r_s.into(),
                        r.n_homoclinic.into(),
                        r.n_heteroclinic.into(),
                        r.error.as_ref().map_or(CsvField::Empty, |e| CsvField::Text(e.replace(',', ";"))),
                    ]
                }),
            );
            run.write(&file, &text)?;
            run.finish(rows)
        }
        other => Err(Error::InvalidArgument(format!("unknown sweep kind '{other}' (expected morphology or eigen)"))),
    }
}

pub const PLOT_KEYS: &[&str] = &["kind", "svg"];

fn read_table(path: &Path) -> Result<Table> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Artifact(format!("{}: {e}", path.display())))?;
    Table::parse(&text)
}

/// Trajectory CSV files of a manifold tube directory, or the given files.
fn trajectory_files(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut files: Vec<PathBuf> = std::fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.file_name().is_some_and(|n| n.to_string_lossy().starts_with("traj_")))
                .collect();
            files.sort();
            out.extend(files);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

const COLORS: [&str; 6] = ["#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

pub fn figure(kind: &str, inputs: &[PathBuf], params: &ModelParams) -> Result<Figure> {
    let mut fig = Figure::default();
    match kind {
        "tube" | "orbit" => {
            fig.title = if kind == "tube" { "manifold tube".into() } else { "periodic orbit".into() };
            fig.xlabel = "x (kpc)".into();
            fig.ylabel = "y (kpc)".into();
            let mut level = None;
            for (k, f) in trajectory_files(inputs)?.iter().enumerate() {
                let t = read_table(f)?;
                level = level.or_else(|| t.meta("EJ").and_then(|v| v.parse::<f64>().ok()));
                let (x, y) = (t.numbers("x")?, t.numbers("y")?);
                fig.lines.push(Line {
                    points: x.into_iter().zip(y).map(|(a, b)| [a, b]).collect(),
                    color: if kind == "tube" { COLORS[0] } else { COLORS[k % COLORS.len()] },
                    width: 0.6,
                });
            }
            if let Some(level) = level {
                let c = zero_velocity_curve(params, level, &ContourOptions { grid: 400, ..ContourOptions::for_params(params) });
                fig.lines.extend(c.polylines.into_iter().map(|points| Line {
                    points,
                    color: "#888888",
                    width: 1.0,
                }));
            }
        }
        "curve" => {
            fig.title = "first-return curves".into();
            for (k, f) in inputs.iter().enumerate() {
                let t = read_table(f)?;
                let (a, b) = if t.column("y").is_ok() { ("y", "ydot") } else { ("x", "xdot") };
                fig.xlabel = format!("{a} (kpc)");
                fig.ylabel = format!("{b} (km/s)");
                let mut points: Vec<[f64; 2]> = t.numbers(a)?.into_iter().zip(t.numbers(b)?).map(|(u, v)| [u, v]).collect();
                if let Some(first) = points.first().copied() {
                    points.push(first);
                }
                fig.lines.push(Line {
                    points,
                    color: COLORS[k % COLORS.len()],
                    width: 1.2,
                });
            }
        }
        "contour" => {
            fig.title = "zero-velocity curve".into();
            fig.xlabel = "x (kpc)".into();
            fig.ylabel = "y (kpc)".into();
            for f in inputs {
                let text = std::fs::read_to_string(f).map_err(|e| Error::Artifact(format!("{}: {e}", f.display())))?;
                for block in text.split("\n\n") {
                    let points = block
                        .lines()
                        .filter(|l| !l.starts_with('#') && !l.starts_with('x'))
                        .filter_map(|l| l.split_once(','))
                        .filter_map(|(a, b)| Some([a.parse().ok()?, b.parse().ok()?]))
                        .collect();
                    fig.lines.push(Line {
                        points,
                        color: "#444444",
                        width: 1.0,
                    });
                }
            }
        }
        "map" => {
            let f = inputs.first().ok_or_else(|| Error::InvalidArgument("map plot needs one convergence CSV".into()))?;
            let t = read_table(f)?;
            let t_max: f64 = t.meta("t_max").and_then(|v| v.parse().ok()).unwrap_or(6.5);
            let grid: f64 = t.meta("grid").and_then(|v| v.parse().ok()).unwrap_or(1.0);
            let radius: f64 = t.meta("radius").and_then(|v| v.parse().ok()).unwrap_or(1.0);
            let (q, p, tb) = (t.numbers("q2")?, t.numbers("p2")?, t.numbers("t_break")?);
            fig.title = format!("break time, palette 0 to {t_max}");
            fig.xlabel = "q2".into();
            fig.ylabel = "p2".into();
            let size = 2.0 * radius / grid;
            fig.heat = Some(Heat {
                cells: q.into_iter().zip(p).zip(tb).map(|((a, b), v)| ([a, b], v.is_finite().then_some(v))).collect(),
                cell_size: [size, size],
                vmax: t_max,
            });
        }
        "sweep" => {
            let f = inputs.first().ok_or_else(|| Error::InvalidArgument("sweep plot needs one sweep CSV".into()))?;
            let t = read_table(f)?;
            fig.xlabel = t.meta("vary").unwrap_or("param").into();
            let (col, label) = if t.column("R_s").is_ok() { ("R_s", "R_s") } else { ("lambda", "lambda") };
            fig.ylabel = label.into();
            fig.title = format!("{label} along the sweep");
            let x = t.numbers("param")?;
            let y = t.numbers(col)?;
            let groups: Vec<f64> = t.numbers("delta_e").unwrap_or_else(|_| vec![0.0; x.len()]);
            let mut keys: Vec<f64> = groups.clone();
            keys.sort_by(f64::total_cmp);
            keys.dedup();
            for (k, g) in keys.iter().enumerate() {
                let points: Vec<[f64; 2]> = (0..x.len()).filter(|&i| groups[i] == *g && y[i].is_finite()).map(|i| [x[i], y[i]]).collect();
                fig.markers.extend(points.iter().copied());
                fig.lines.push(Line {
                    points,
                    color: COLORS[k % COLORS.len()],
                    width: 1.2,
                });
            }
        }
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown plot kind '{other}' (expected tube, orbit, curve, contour, map or sweep)"
            )))
        }
    }
    Ok(fig)
}

pub fn plot(cfg: &RunConfig, inputs: &[PathBuf]) -> Result<()> {
    cfg.check_job_keys(PLOT_KEYS)?;
    let kind = cfg
        .job_str("kind")
        .ok_or_else(|| Error::InvalidArgument("missing --kind".into()))?;
    for p in inputs {
        if !p.exists() {
            return Err(Error::Artifact(format!("{} does not exist", p.display())));
        }
    }
    let fig = figure(kind, inputs, &cfg.model)?;
    let out = cfg
        .job_str("svg")
        .map(PathBuf::from)
        .unwrap_or_else(|| cfg.output.join("plot").join(format!("{kind}.svg")));
    if let Some(parent) = out.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(&out, fig.to_svg())?;
    println!("wrote {}", out.display());
    Ok(())
}
