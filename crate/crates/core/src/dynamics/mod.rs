//! Trajectories of the full and reduced systems, Poincaré events, periodic
//! orbits, invariant curves and globalized invariant manifolds.

mod manifolds;
mod orbits;

pub use manifolds::{
    globalize_manifold, manifold_ic_at, manifold_ics, Branch, GlobalizeOptions, ManifoldSource, ManifoldTube, StopRule, TubeTrajectory,
};
pub use orbits::{invariant_curves, planar_lyapunov, vertical_lyapunov, InvariantCurve, OrbitKind, PeriodicOrbit};

use crate::error::{Error, Result};
use crate::model::{ModelParams, PhaseState};
use crate::ode::{find_root, DenseSegment, Dop853, OdeOptions};
use crate::poly::NVARS;
use crate::reduction::Reduction;
use serde::{Deserialize, Serialize};

/// Normal-form amplitude beyond which reduced integrations are flagged as
/// leaving the region where the truncated series is trustworthy.
pub const DOMAIN_WARN_RADIUS: f64 = 20.0;

/// Energy-drift bound of the full-frame integrator.
pub const ENERGY_DRIFT_BOUND: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrajFrame {
    Barycentric,
    NormalForm,
}

/// Poincaré surfaces used throughout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Surface {
    /// `y = 0, x > 0`.
    S,
    /// `x = 0, y > 0`.
    SPrime,
    /// `z = 0`.
    I,
    /// `s[k] = 0` for barycentric component `k`, without half-plane restriction.
    Plane(u8),
}

impl Surface {
    pub fn value(self, s: &[f64; NVARS]) -> f64 {
        match self {
            Surface::S => s[1],
            Surface::SPrime => s[0],
            Surface::I => s[2],
            Surface::Plane(k) => s[k as usize],
        }
    }

    /// Half-plane restriction of the surface.
    pub fn admits(self, s: &[f64; NVARS]) -> bool {
        match self {
            Surface::S => s[0] > 0.0,
            Surface::SPrime => s[1] > 0.0,
            Surface::I | Surface::Plane(_) => true,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Surface::S => "S",
            Surface::SPrime => "S'",
            Surface::I => "I",
            Surface::Plane(_) => "plane",
        }
    }
}

impl std::str::FromStr for Surface {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "S" | "s" => Ok(Surface::S),
            "S'" | "s'" | "Sprime" | "sprime" => Ok(Surface::SPrime),
            "I" | "i" => Ok(Surface::I),
            _ => Err(Error::Parse(format!("unknown surface '{s}' (expected S, S', I)"))),
        }
    }
}

/// Sign of the surface function's rate at an accepted crossing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    Any,
    Increasing,
    Decreasing,
}

impl Orientation {
    fn admits(self, rising: bool) -> bool {
        match self {
            Orientation::Any => true,
            Orientation::Increasing => rising,
            Orientation::Decreasing => !rising,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub state: [f64; NVARS],
    pub energy: f64,
}

/// A refined surface crossing. `state` is in the trajectory frame and
/// `barycentric` is the same point in the rotating barycentric frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub surface: Surface,
    pub t: f64,
    pub state: [f64; NVARS],
    pub barycentric: PhaseState,
    pub rising: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TrajStatus {
    Completed,
    LeftRadius,
    SectionLimit,
    Failed(String),
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub frame: TrajFrame,
    pub samples: Vec<Sample>,
    /// Continuous extension per accepted step, when requested.
    pub segments: Vec<DenseSegment<NVARS>>,
    pub crossings: Vec<Crossing>,
    pub status: TrajStatus,
    pub warnings: Vec<String>,
}

impl Trajectory {
    pub fn first(&self) -> &Sample {
        &self.samples[0]
    }

    pub fn last(&self) -> &Sample {
        self.samples.last().unwrap()
    }

    /// Largest `|E(t) − E(0)| / |E(0)|` over the samples.
    pub fn energy_drift(&self) -> f64 {
        let e0 = self.samples[0].energy;
        let scale = e0.abs().max(f64::MIN_POSITIVE);
        self.samples.iter().map(|s| (s.energy - e0).abs() / scale).fold(0.0, f64::max)
    }

    /// State at time `t` from the dense output.
    pub fn state_at(&self, t: f64) -> Option<[f64; NVARS]> {
        let idx = self.segments.partition_point(|s| {
            if s.h > 0.0 {
                s.t1() < t
            } else {
                s.t1() > t
            }
        });
        self.segments.get(idx).filter(|s| s.contains(t)).map(|s| s.eval(t))
    }

    pub fn duration(&self) -> f64 {
        self.last().t - self.first().t
    }
}

/// Options of a single integration run.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub ode: OdeOptions,
    pub keep_dense: bool,
    /// Surfaces whose crossings are recorded during the run.
    pub record: Vec<(Surface, Orientation)>,
    /// Stop when the barycentric planar radius exceeds this value.
    pub stop_radius: Option<f64>,
    /// Stop after this many recorded crossings (counted over all surfaces).
    pub max_crossings: Option<usize>,
    /// Ignore crossings closer than this to the start time.
    pub min_event_time: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            ode: OdeOptions::default(),
            keep_dense: true,
            record: Vec::new(),
            stop_radius: None,
            max_crossings: None,
            min_event_time: 0.0,
        }
    }
}

impl RunOptions {
    pub fn with_tolerance(tol: f64) -> Self {
        let mut o = Self::default();
        o.ode.rtol = tol;
        o.ode.atol = 0.1 * tol;
        o
    }
}

/// Event tolerance on the surface function.
const EVENT_TOL: f64 = 1e-13;

/// Shared driver: integrates `rhs` from `y0` at `t = 0` to `t_end` (either
/// sign), sampling each accepted step and recording the requested events.
fn run<F, E, M>(rhs: F, y0: [f64; NVARS], t_end: f64, opts: &RunOptions, frame: TrajFrame, energy: E, to_bary: M) -> Trajectory
where
    F: FnMut(f64, &[f64; NVARS], &mut [f64; NVARS]),
    E: Fn(&[f64; NVARS]) -> f64,
    M: Fn(&[f64; NVARS]) -> [f64; NVARS],
{
    let mut traj = Trajectory {
        frame,
        samples: vec![Sample {
            t: 0.0,
            state: y0,
            energy: energy(&y0),
        }],
        segments: Vec::new(),
        crossings: Vec::new(),
        status: TrajStatus::Completed,
        warnings: Vec::new(),
    };
    if t_end == 0.0 {
        return traj;
    }
    let mut ode = Dop853::new(rhs, 0.0, y0, t_end, opts.ode);
    let mut prev_bary = to_bary(&y0);
    while (t_end - ode.t()) * t_end.signum() > 0.0 {
        if let Err(e) = ode.step(t_end) {
            traj.status = TrajStatus::Failed(e.to_string());
            break;
        }
        let y = *ode.y();
        let bary = to_bary(&y);
        let mut seg = if opts.keep_dense { Some(ode.dense().clone()) } else { None };
        let mut stop = false;
        for &(surface, orient) in &opts.record {
            let (g0, g1) = (surface.value(&prev_bary), surface.value(&bary));
            if (g0 > 0.0) == (g1 > 0.0) || g1 == 0.0 {
                continue;
            }
            let seg = seg.get_or_insert_with(|| ode.dense().clone());
            let rising = (g1 > g0) == (seg.h > 0.0);
            if !orient.admits(rising) {
                continue;
            }
            let gt = |t: f64| surface.value(&to_bary(&seg.eval(t)));
            let tc = find_root(gt, seg.t0, seg.t1(), g0, g1, EVENT_TOL);
            if tc.abs() < opts.min_event_time {
                continue;
            }
            let state = seg.eval(tc);
            let mut barycentric = to_bary(&state);
            if !surface.admits(&barycentric) {
                continue;
            }
            // Snap the surface coordinate; the root finder leaves it below EVENT_TOL.
            match surface {
                Surface::S => barycentric[1] = 0.0,
                Surface::SPrime => barycentric[0] = 0.0,
                Surface::I => barycentric[2] = 0.0,
                Surface::Plane(k) => barycentric[k as usize] = 0.0,
            }
            traj.crossings.push(Crossing {
                surface,
                t: tc,
                state,
                barycentric: PhaseState::from_array(barycentric),
                rising,
            });
            if let Some(n) = opts.max_crossings {
                if traj.crossings.len() >= n {
                    stop = true;
                }
            }
        }
        traj.crossings.sort_by(|a, b| (a.t.abs()).total_cmp(&b.t.abs()));
        if let Some(seg) = seg.filter(|_| opts.keep_dense) {
            traj.segments.push(seg);
        }
        traj.samples.push(Sample {
            t: ode.t(),
            state: y,
            energy: energy(&y),
        });
        prev_bary = bary;
        if let Some(r) = opts.stop_radius {
            if bary[0].hypot(bary[1]) > r {
                traj.status = TrajStatus::LeftRadius;
                break;
            }
        }
        if stop {
            traj.status = TrajStatus::SectionLimit;
            break;
        }
    }
    traj
}

/// Integrates the full equations of motion from `t = 0` to `t_end`.
pub fn integrate_full(params: &ModelParams, state: &PhaseState, t_end: f64, opts: &RunOptions) -> Result<Trajectory> {
    params.validate()?;
    let rhs = |_t: f64, y: &[f64; NVARS], dy: &mut [f64; NVARS]| {
        *dy = params.eom(&PhaseState::from_array(*y)).to_array();
    };
    let e = |y: &[f64; NVARS]| params.hamiltonian(&PhaseState::from_array(*y));
    let mut traj = run(rhs, state.to_array(), t_end, opts, TrajFrame::Barycentric, e, |y| *y);
    check_status(&traj)?;
    let drift = traj.energy_drift();
    if drift > ENERGY_DRIFT_BOUND {
        traj.warnings.push(format!("relative energy drift {drift:e} exceeds {ENERGY_DRIFT_BOUND:e}"));
    }
    Ok(traj)
}

/// Integrates the reduced Hamiltonian's flow in normal-form coordinates.
/// Crossings are located on the barycentric images of the states.
pub fn integrate_reduced(red: &Reduction, nf: &[f64; NVARS], t_end: f64, opts: &RunOptions) -> Result<Trajectory> {
    let bundle = red.field_bundle();
    let mut scratch = Vec::new();
    let rhs = move |_t: f64, y: &[f64; NVARS], dy: &mut [f64; NVARS]| {
        bundle.eval_into(y, &mut scratch, dy);
    };
    let e = |y: &[f64; NVARS]| red.energy(y);
    let to_bary = |y: &[f64; NVARS]| red.nf_to_barycentric(y).to_array();
    let mut traj = run(rhs, *nf, t_end, opts, TrajFrame::NormalForm, e, to_bary);
    check_status(&traj)?;
    let peak = traj
        .samples
        .iter()
        .map(|s| s.state.iter().fold(0.0f64, |m, v| m.max(v.abs())))
        .fold(0.0, f64::max);
    if peak > DOMAIN_WARN_RADIUS {
        traj.warnings.push(format!(
            "normal-form amplitude {peak:.3} left the trusted domain (> {DOMAIN_WARN_RADIUS})"
        ));
    }
    Ok(traj)
}

fn check_status(traj: &Trajectory) -> Result<()> {
    if let TrajStatus::Failed(msg) = &traj.status {
        if traj.samples.len() <= 1 {
            return Err(Error::InvalidArgument(msg.clone()));
        }
    }
    Ok(())
}

/// Crossings of a trajectory with `surface`, located on its dense output.
pub fn poincare_crossings(
    traj: &Trajectory,
    surface: Surface,
    orientation: Orientation,
    to_bary: impl Fn(&[f64; NVARS]) -> [f64; NVARS],
) -> Vec<Crossing> {
    let mut out = Vec::new();
    for seg in &traj.segments {
        let (g0, g1) = (surface.value(&to_bary(&seg.eval(seg.t0))), surface.value(&to_bary(&seg.eval(seg.t1()))));
        if (g0 > 0.0) == (g1 > 0.0) || g1 == 0.0 {
            continue;
        }
        let rising = (g1 > g0) == (seg.h > 0.0);
        if !orientation.admits(rising) {
            continue;
        }
        let tc = find_root(|t| surface.value(&to_bary(&seg.eval(t))), seg.t0, seg.t1(), g0, g1, EVENT_TOL);
        let state = seg.eval(tc);
        let bary = to_bary(&state);
        if surface.admits(&bary) {
            out.push(Crossing {
                surface,
                t: tc,
                state,
                barycentric: PhaseState::from_array(bary),
                rising,
            });
        }
    }
    out
}

/// Solves `H = energy` for `py` at a state whose other components are given,
/// choosing the root nearest `py_hint`.
pub fn solve_py(params: &ModelParams, s: &PhaseState, energy: f64, py_hint: f64) -> Option<f64> {
    // ½py² − Ωx·py + rest = 0
    let rest = 0.5 * (s.px * s.px + s.pz * s.pz) + params.potential(s.position()) + params.omega * s.y * s.px - energy;
    let b = params.omega * s.x;
    let disc = b * b - 2.0 * rest;
    if disc < 0.0 {
        return None;
    }
    let r = disc.sqrt();
    let (a, c) = (b + r, b - r);
    Some(if (a - py_hint).abs() <= (c - py_hint).abs() { a } else { c })
}

/// Solves `H = energy` for the missing rotating-frame velocity on a section:
/// `ẏ` on S (given `x`, `ẋ`) or `ẋ` on S′ (given `y`, `ẏ`), planar motion,
/// with the sign fixed by the crossing orientation.
pub fn recover_section_velocity(params: &ModelParams, surface: Surface, coord: f64, vel: f64, energy: f64, rising: bool) -> Option<f64> {
    let pos = match surface {
        Surface::S => [coord, 0.0, 0.0],
        Surface::SPrime => [0.0, coord, 0.0],
        Surface::I | Surface::Plane(_) => return None,
    };
    // E = ½|v|² + Φ_eff
    let v2 = 2.0 * (energy - params.effective_potential(pos)) - vel * vel;
    if v2 < 0.0 {
        return None;
    }
    let v = v2.sqrt();
    Some(if rising { v } else { -v })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibria::saddle_state;
    use crate::SaddlePoint;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn equilibrium_stays_fixed_until_rounding_is_amplified() {
        // The rounded saddle state carries a force residual near 1e-13 that
        // the flow amplifies like e^{λt}; up to t = 2 it stays below 1e-10.
        let p = ModelParams::model1();
        let l1 = saddle_state(&p, SaddlePoint::L1).unwrap();
        let t = integrate_full(&p, &l1, 2.0, &RunOptions::default()).unwrap();
        assert!(t.last().state.iter().zip(l1.to_array()).all(|(a, b)| (a - b).abs() < 1e-10));
    }

    #[test]
    fn energy_drift_small_from_random_bottleneck_states() {
        let p = ModelParams::model1();
        let l1 = saddle_state(&p, SaddlePoint::L1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..3 {
            let mut s = l1;
            s.x += rng.random_range(-0.5..0.5);
            s.y += rng.random_range(-0.5..0.5);
            s.z += rng.random_range(-0.2..0.2);
            s.px += rng.random_range(-5.0..5.0);
            s.pz += rng.random_range(-5.0..5.0);
            let t = integrate_full(&p, &s, 20.0, &RunOptions::default()).unwrap();
            // Independent monitor: recompute the energy from the stored states.
            let e0 = p.hamiltonian(&s);
            let drift = t
                .samples
                .iter()
                .map(|x| (p.hamiltonian(&PhaseState::from_array(x.state)) - e0).abs() / e0.abs())
                .fold(0.0, f64::max);
            assert!(drift < 1e-10, "{drift:e}");
            assert!(t.warnings.is_empty());
        }
    }

    #[test]
    fn forward_then_backward_returns_to_start() {
        let p = ModelParams::model1();
        let s = PhaseState::new(5.0, 1.0, 0.3, 10.0, 150.0, 4.0);
        let f = integrate_full(&p, &s, 3.0, &RunOptions::default()).unwrap();
        let end = PhaseState::from_array(f.last().state);
        let b = integrate_full(&p, &end, -3.0, &RunOptions::default()).unwrap();
        assert!(PhaseState::from_array(b.last().state).distance(&s) < 1e-8);
    }

    #[test]
    fn planar_states_stay_planar() {
        let p = ModelParams::model1();
        let s = PhaseState::new(30.0, 3.0, 0.0, 4.0, 20.0, 0.0);
        let t = integrate_full(&p, &s, 5.0, &RunOptions::default()).unwrap();
        assert!(t.samples.iter().all(|x| x.state[2].abs() < 1e-12 && x.state[5].abs() < 1e-12));
    }

    #[test]
    fn dense_output_is_queryable_and_crossings_polished() {
        let p = ModelParams::model1();
        let s = PhaseState::new(10.0, 0.0, 0.0, 0.0, 120.0, 0.0);
        let mut o = RunOptions::default();
        o.record = vec![(Surface::S, Orientation::Any)];
        let t = integrate_full(&p, &s, 3.0, &o).unwrap();
        let mid = t.state_at(1.2345).unwrap();
        assert!(mid.iter().all(|v| v.is_finite()));
        let e0 = t.first().energy;
        for c in &t.crossings {
            let raw = t.state_at(c.t).unwrap();
            assert!(raw[1].abs() < 1e-12);
            assert!(c.barycentric.x > 0.0);
            assert!((p.hamiltonian(&c.barycentric) - e0).abs() / e0 < 1e-10);
        }
        let again = poincare_crossings(&t, Surface::S, Orientation::Any, |y| *y);
        assert_eq!(again.len(), t.crossings.len());
    }

    #[test]
    fn section_velocity_recovery_is_consistent() {
        let p = ModelParams::model1();
        let s = PhaseState::new(12.0, 0.0, 0.0, 7.0, 90.0, 0.0);
        let e = p.hamiltonian(&s);
        let v = s.velocity(p.omega);
        let ydot = recover_section_velocity(&p, Surface::S, s.x, v[0], e, v[1] > 0.0).unwrap();
        assert!((ydot - v[1]).abs() < 1e-9);
        let py = solve_py(&p, &PhaseState { py: 0.0, ..s }, e, 80.0).unwrap();
        assert!((py - 90.0).abs() < 1e-9);
    }
}
