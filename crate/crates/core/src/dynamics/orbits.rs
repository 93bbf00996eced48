use super::{integrate_full, integrate_reduced, solve_py, Crossing, Orientation, RunOptions, Surface, Trajectory};
use crate::error::{Error, Result};
use crate::model::PhaseState;
use crate::ode::{find_root, OdeOptions};
use crate::poly::NVARS;
use crate::reduction::Reduction;
use crate::SaddlePoint;
use serde::{Deserialize, Serialize};

const MAX_CORRECTIONS: usize = 50;
/// Target for the momentum residual at the half-period crossing.
const PX_TOL: f64 = 2e-13;
/// Largest half-period residual accepted once iterations stagnate.
const ACCEPT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OrbitKind {
    PlanarLyapunov,
    VerticalLyapunov,
}

impl OrbitKind {
    pub fn name(self) -> &'static str {
        match self {
            OrbitKind::PlanarLyapunov => "planar-lyapunov",
            OrbitKind::VerticalLyapunov => "vertical-lyapunov",
        }
    }

    /// Index of the centre pair `(q, p)` carrying the orbit.
    fn nf_pair(self) -> usize {
        match self {
            OrbitKind::PlanarLyapunov => 2,
            OrbitKind::VerticalLyapunov => 4,
        }
    }
}

impl std::str::FromStr for OrbitKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "planar-lyapunov" | "planar" => Ok(OrbitKind::PlanarLyapunov),
            "vertical-lyapunov" | "vertical" => Ok(OrbitKind::VerticalLyapunov),
            _ => Err(Error::Parse(format!("unknown orbit kind '{s}'"))),
        }
    }
}

/// A Lyapunov orbit refined in the full system.
#[derive(Debug, Clone)]
pub struct PeriodicOrbit {
    pub kind: OrbitKind,
    pub point: SaddlePoint,
    pub energy: f64,
    pub period: f64,
    /// Normal-form amplitude of the seed.
    pub nf_amplitude: f64,
    /// State on the symmetry plane where the period starts.
    pub initial: PhaseState,
    /// One period of the full-system flow with dense output.
    pub trajectory: Trajectory,
    /// `|state(T) − state(0)|`.
    pub closure: f64,
    /// False when differential correction failed and only the normal-form
    /// seed is reported.
    pub refined: bool,
    pub iterations: usize,
}

impl PeriodicOrbit {
    /// State at phase `s ∈ [0, 1)`.
    pub fn state_at_phase(&self, s: f64) -> PhaseState {
        let t = (s.rem_euclid(1.0) * self.period).min(self.trajectory.last().t);
        PhaseState::from_array(self.trajectory.state_at(t).unwrap_or(self.trajectory.first().state))
    }

    /// `n` states equally spaced in phase.
    pub fn phase_points(&self, n: usize) -> Vec<PhaseState> {
        (0..n).map(|k| self.state_at_phase(k as f64 / n as f64)).collect()
    }

    /// Fails with the correction error if the orbit was not refined.
    pub fn require_refined(&self) -> Result<&Self> {
        if self.refined {
            Ok(self)
        } else {
            Err(Error::CorrectionDivergence {
                iterations: self.iterations,
                residual: self.closure,
            })
        }
    }
}

fn correction_options() -> RunOptions {
    RunOptions {
        ode: OdeOptions::with_tolerances(1e-14, 1e-14),
        keep_dense: false,
        ..RunOptions::default()
    }
}

/// Normal-form amplitude on the orbit plane solving `center_h = ΔE`.
fn seed_amplitude(red: &Reduction, kind: OrbitKind, delta_e: f64) -> Result<f64> {
    let lin = &red.linearization;
    let omega = match kind {
        OrbitKind::PlanarLyapunov => lin.omega1,
        OrbitKind::VerticalLyapunov => lin.omega2,
    };
    let k = kind.nf_pair();
    let f = |r: f64| {
        let mut x = [0.0; NVARS];
        x[k] = r;
        red.center_h.evaluate(&x) - delta_e
    };
    let r_lin = (2.0 * delta_e / omega).sqrt();
    let (mut lo, mut hi) = (0.0, r_lin);
    let mut f_hi = f(hi);
    let mut tries = 0;
    while f_hi < 0.0 {
        lo = hi;
        hi *= 1.5;
        f_hi = f(hi);
        tries += 1;
        if tries > 40 {
            return Err(Error::RootNotFound("orbit amplitude".into()));
        }
    }
    let f_lo = f(lo);
    Ok(find_root(f, lo, hi, f_lo, f_hi, 1e-12 * delta_e.abs().max(1.0)))
}

/// Integrates the seed in the normal form and returns its first two crossings
/// of the symmetry plane.
fn seed_crossings(red: &Reduction, kind: OrbitKind, amp: f64, surface: Surface) -> Result<(Crossing, Crossing)> {
    let lin = &red.linearization;
    let omega = match kind {
        OrbitKind::PlanarLyapunov => lin.omega1,
        OrbitKind::VerticalLyapunov => lin.omega2,
    };
    let mut nf = [0.0; NVARS];
    nf[kind.nf_pair()] = amp;
    let opts = RunOptions {
        record: vec![(surface, Orientation::Any)],
        keep_dense: false,
        max_crossings: Some(2),
        ..RunOptions::default()
    };
    let t = integrate_reduced(red, &nf, 3.0 * std::f64::consts::TAU / omega, &opts)?;
    match t.crossings.as_slice() {
        [a, b, ..] => Ok((*a, *b)),
        _ => Err(Error::RootNotFound("normal-form seed never crossed its symmetry plane".into())),
    }
}

fn energy_above(red: &Reduction, energy: f64) -> Result<f64> {
    let delta = energy - red.h0;
    if delta <= 0.0 {
        return Err(Error::EnergyBelowEquilibrium { energy, h0: red.h0 });
    }
    Ok(delta)
}

/// State at the first crossing of `surface` after `t_min`, or `None`.
fn half_period_crossing(red: &Reduction, s: &PhaseState, surface: Surface, t_guess: f64) -> Option<Crossing> {
    let opts = RunOptions {
        record: vec![(surface, Orientation::Any)],
        max_crossings: Some(1),
        min_event_time: 0.3 * t_guess,
        ..correction_options()
    };
    let t = integrate_full(&red.params, s, 3.0 * t_guess, &opts).ok()?;
    t.crossings.first().copied()
}

fn finish(
    red: &Reduction,
    kind: OrbitKind,
    energy: f64,
    amp: f64,
    initial: PhaseState,
    half: f64,
    refined: bool,
    iterations: usize,
) -> Result<PeriodicOrbit> {
    let mut opts = correction_options();
    opts.keep_dense = true;
    let trajectory = integrate_full(&red.params, &initial, 2.0 * half, &opts)?;
    let closure = PhaseState::from_array(trajectory.last().state).distance(&initial);
    Ok(PeriodicOrbit {
        kind,
        point: red.point,
        energy,
        period: 2.0 * half,
        nf_amplitude: amp,
        initial,
        trajectory,
        closure,
        refined,
        iterations,
    })
}

/// Planar Lyapunov orbit at Jacobi energy `energy`, refined by shooting
/// between perpendicular crossings of `y = 0`.
pub fn planar_lyapunov(red: &Reduction, energy: f64) -> Result<PeriodicOrbit> {
    let kind = OrbitKind::PlanarLyapunov;
    let delta = energy_above(red, energy)?;
    let amp = seed_amplitude(red, kind, delta)?;
    let surface = Surface::Plane(1);
    let (c0, c1) = seed_crossings(red, kind, amp, surface)?;
    let mut half = c1.t - c0.t;
    let seed = c0.barycentric;
    let p = &red.params;
    let state_for = |x: f64| -> Option<PhaseState> {
        let mut s = PhaseState::new(x, 0.0, 0.0, 0.0, seed.py, 0.0);
        s.py = solve_py(p, &s, energy, seed.py)?;
        Some(s)
    };
    // Residual: px at the next perpendicular crossing.
    let residual = |x: f64, half: f64| -> Option<(f64, f64)> {
        let s = state_for(x)?;
        let c = half_period_crossing(red, &s, surface, half)?;
        Some((c.barycentric.px, c.t))
    };
    let mut xa = seed.x;
    let mut xb = seed.x + 1e-6 * seed.x.abs().max(1.0);
    let (mut fa, ta) = residual(xa, half).ok_or(Error::CorrectionDivergence { iterations: 0, residual: f64::NAN })?;
    let mut best = (fa.abs(), xa, ta);
    let mut it = 0;
    let mut stale = 0;
    while best.0 >= PX_TOL && it < MAX_CORRECTIONS && stale < 3 {
        it += 1;
        let Some((fb, tb)) = residual(xb, half) else { break };
        half = tb;
        if fb.abs() < best.0 {
            best = (fb.abs(), xb, tb);
            stale = 0;
        } else {
            stale += 1;
        }
        if fb == fa {
            break;
        }
        let xn = xb - fb * (xb - xa) / (fb - fa);
        xa = xb;
        fa = fb;
        xb = xn;
    }
    let (norm, x, half) = best;
    match state_for(x) {
        Some(s) if norm < ACCEPT_TOL => finish(red, kind, energy, amp, s, half, true, it),
        _ => {
            let s = PhaseState::new(seed.x, 0.0, 0.0, 0.0, seed.py, 0.0);
            finish(red, kind, energy, amp, s, c1.t - c0.t, false, it)
        }
    }
}

/// Vertical Lyapunov orbit at Jacobi energy `energy`, refined by shooting
/// between crossings of `z = 0` on the fixed set `y = px = 0`.
pub fn vertical_lyapunov(red: &Reduction, energy: f64) -> Result<PeriodicOrbit> {
    let kind = OrbitKind::VerticalLyapunov;
    let delta = energy_above(red, energy)?;
    let amp = seed_amplitude(red, kind, delta)?;
    let surface = Surface::I;
    let (c0, c1) = seed_crossings(red, kind, amp, surface)?;
    let mut half = c1.t - c0.t;
    let seed = c0.barycentric;
    let p = &red.params;
    let state_for = |u: [f64; 2]| -> Option<PhaseState> {
        let mut s = PhaseState::new(u[0], 0.0, 0.0, 0.0, seed.py, u[1]);
        s.py = solve_py(p, &s, energy, seed.py)?;
        Some(s)
    };
    let residual = |u: [f64; 2], half: f64| -> Option<([f64; 2], f64)> {
        let s = state_for(u)?;
        let c = half_period_crossing(red, &s, surface, half)?;
        Some(([c.barycentric.y, c.barycentric.px], c.t))
    };
    let mut u = [seed.x, seed.pz];
    let scale = [1e-6 * seed.x.abs().max(1.0), 1e-6 * seed.pz.abs().max(1.0)];
    let mut it = 0;
    // Best iterate so far; rounding sets a floor near 1e-10 on the residual.
    let mut best = (f64::INFINITY, u, half);
    let mut stale = 0;
    while it < MAX_CORRECTIONS && stale < 3 {
        let Some((f, t)) = residual(u, half) else { break };
        half = t;
        let norm = f[0].abs().max(f[1].abs());
        if norm < best.0 {
            best = (norm, u, t);
            stale = 0;
        } else {
            stale += 1;
        }
        if norm < PX_TOL {
            break;
        }
        it += 1;
        let mut jac = [[0.0; 2]; 2];
        let mut ok = true;
        for j in 0..2 {
            let mut v = u;
            v[j] += scale[j];
            match residual(v, half) {
                Some((g, _)) => {
                    for i in 0..2 {
                        jac[i][j] = (g[i] - f[i]) / scale[j];
                    }
                }
                None => ok = false,
            }
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if !ok || det == 0.0 {
            break;
        }
        u[0] -= (jac[1][1] * f[0] - jac[0][1] * f[1]) / det;
        u[1] -= (-jac[1][0] * f[0] + jac[0][0] * f[1]) / det;
    }
    let (norm, u, half) = best;
    let converged = norm < ACCEPT_TOL;
    match (converged, state_for(u)) {
        (true, Some(s)) => finish(red, kind, energy, amp, s, half, true, it),
        _ => {
            let s = PhaseState::new(seed.x, 0.0, 0.0, 0.0, seed.py, seed.pz);
            finish(red, kind, energy, amp, s, c1.t - c0.t, false, it)
        }
    }
}

/// Section curve of one quasi-periodic trajectory on `I = {z = 0}`.
#[derive(Debug, Clone)]
pub struct InvariantCurve {
    pub energy: f64,
    /// Normal-form initial condition of the generating trajectory.
    pub seed: [f64; NVARS],
    /// Interpolation parameter between the vertical axis (0) and the planar
    /// Lyapunov circle (1).
    pub alpha: f64,
    /// Crossings with `pz > 0`; `state` holds normal-form torus points.
    pub points: Vec<Crossing>,
}

impl InvariantCurve {
    /// Normal-form points on the generating torus.
    pub fn torus_samples(&self) -> Vec<[f64; NVARS]> {
        self.points.iter().map(|c| c.state).collect()
    }
}

/// Invariant curves on `z = 0`: `n_curves` seeds `(q2, p3) = (α·r, p3(α))`,
/// `α` evenly spread in `(0, 1]`, each integrated in the normal form until
/// `points_per_curve` upward crossings are found.
pub fn invariant_curves(red: &Reduction, energy: f64, n_curves: usize, points_per_curve: usize) -> Result<Vec<InvariantCurve>> {
    use rayon::prelude::*;
    let delta = energy_above(red, energy)?;
    let r = seed_amplitude(red, OrbitKind::PlanarLyapunov, delta)?;
    let omega2 = red.linearization.omega2;
    (1..=n_curves)
        .into_par_iter()
        .map(|k| {
            let alpha = k as f64 / n_curves as f64;
            let mut seed = [0.0; NVARS];
            seed[2] = alpha * r;
            let base = red.center_h.evaluate(&seed);
            let f = |p3: f64| {
                let mut x = seed;
                x[5] = p3;
                red.center_h.evaluate(&x) - delta
            };
            if base < delta {
                let mut hi = (2.0 * (delta - base) / omega2).sqrt().max(1e-9);
                let mut fh = f(hi);
                while fh < 0.0 {
                    hi *= 1.5;
                    fh = f(hi);
                }
                seed[5] = find_root(f, 0.0, hi, base - delta, fh, 1e-12 * delta);
            }
            let period = std::f64::consts::TAU / omega2;
            let opts = RunOptions {
                record: vec![(Surface::I, Orientation::Increasing)],
                keep_dense: false,
                max_crossings: Some(points_per_curve),
                ..RunOptions::default()
            };
            let t_end = 4.0 * period * points_per_curve as f64 + 10.0;
            let traj = integrate_reduced(red, &seed, t_end, &opts)?;
            Ok(InvariantCurve {
                energy,
                seed,
                alpha,
                points: traj.crossings,
            })
        })
        .collect()
}
