//! Practical convergence of the reduced Hamiltonian: how long a centre-manifold
//! initial condition integrated with the truncated normal form tracks the same
//! initial condition integrated in the full system.

use crate::error::{Error, Result};
use crate::model::PhaseState;
use crate::ode::{find_root, Dop853, OdeOptions};
use crate::poly::{PolyBundle, NVARS};
use crate::reduction::Reduction;
use crate::SaddlePoint;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Directions sampled when locating the boundary of the feasible disc.
const BOUNDARY_RAYS: usize = 72;

/// Reported with every map.
pub const CAVEAT: &str = "break times are lower bounds: the saddle instability of the full system \
                          amplifies any difference, so the reduced model is valid at least this long";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceOptions {
    pub grid_n: usize,
    pub t_max: f64,
    /// Comparison step, independent of the integrator's steps.
    pub dt: f64,
    #[serde(skip, default = "default_ode")]
    pub ode: OdeOptions,
}

fn default_ode() -> OdeOptions {
    OdeOptions::with_tolerances(1e-13, 1e-15)
}

impl Default for ConvergenceOptions {
    fn default() -> Self {
        Self {
            grid_n: 200,
            t_max: 6.5,
            dt: 0.01,
            ode: default_ode(),
        }
    }
}

/// One grid cell; `t_break` is `None` outside the feasible disc.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub q2: f64,
    pub p2: f64,
    /// `p3` solving the energy equation with `q3 = 0`.
    pub p3: Option<f64>,
    /// Barycentric position of the initial condition.
    pub x: f64,
    pub y: f64,
    pub t_break: Option<f64>,
}

impl Cell {
    pub fn amplitude(&self) -> f64 {
        self.q2.hypot(self.p2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceMap {
    pub point: SaddlePoint,
    pub order: usize,
    pub energy: f64,
    pub tol: f64,
    pub t_max: f64,
    pub grid_n: usize,
    /// Largest `(q2, p2)` amplitude on the planar Lyapunov orbit.
    pub radius: f64,
    /// Row-major over `p2`, then `q2`.
    pub cells: Vec<Cell>,
    pub note: String,
}

impl ConvergenceMap {
    pub fn feasible(&self) -> impl Iterator<Item = &Cell> {
        self.cells.iter().filter(|c| c.t_break.is_some())
    }

    pub fn n_feasible(&self) -> usize {
        self.feasible().count()
    }

    pub fn mean_t_break(&self) -> f64 {
        let (s, n) = self.feasible().fold((0.0, 0usize), |(s, n), c| (s + c.t_break.unwrap(), n + 1));
        s / n.max(1) as f64
    }

    /// Fraction of feasible cells with `t_break ≥ t`.
    pub fn fraction_at_least(&self, t: f64) -> f64 {
        let n = self.n_feasible();
        self.feasible().filter(|c| c.t_break.unwrap() >= t).count() as f64 / n.max(1) as f64
    }
}

/// Centre-plane amplitude at which `center_h(q2, p2, 0, 0)` reaches `delta`
/// along direction `theta`.
fn boundary_radius(red: &Reduction, delta: f64, theta: f64) -> Result<f64> {
    let f = |r: f64| {
        let mut x = [0.0; NVARS];
        x[2] = r * theta.cos();
        x[3] = r * theta.sin();
        red.center_h.evaluate(&x) - delta
    };
    let mut hi = (2.0 * delta / red.linearization.omega1).sqrt();
    let mut lo = 0.0;
    let mut tries = 0;
    while f(hi) < 0.0 {
        lo = hi;
        hi *= 1.5;
        tries += 1;
        if tries > 40 {
            return Err(Error::RootNotFound("planar amplitude".into()));
        }
    }
    Ok(find_root(f, lo, hi, f(lo), f(hi), 1e-13 * delta.max(1.0)))
}

/// `p3 ≥ 0` with `center_h(q2, p2, 0, p3) = delta`, if the point lies inside
/// the planar orbit.
fn solve_p3(red: &Reduction, delta: f64, q2: f64, p2: f64) -> Option<f64> {
    let f = |p3: f64| {
        let x = [0.0, 0.0, q2, p2, 0.0, p3];
        red.center_h.evaluate(&x) - delta
    };
    let f0 = f(0.0);
    if f0 >= 0.0 {
        return None;
    }
    let mut hi = (2.0 * -f0 / red.linearization.omega2).sqrt();
    let mut tries = 0;
    while f(hi) < 0.0 {
        hi *= 1.5;
        tries += 1;
        if tries > 40 {
            return None;
        }
    }
    let p3 = find_root(f, 0.0, hi, f0, f(hi), 1e-14 * delta.max(1.0));
    (f(p3).abs() <= 1e-9).then_some(p3)
}

/// Dense-output sampler at increasing times.
struct Sampler<F: FnMut(f64, &[f64; NVARS], &mut [f64; NVARS])> {
    ode: Dop853<NVARS, F>,
    t_end: f64,
}

impl<F: FnMut(f64, &[f64; NVARS], &mut [f64; NVARS])> Sampler<F> {
    fn new(rhs: F, y0: [f64; NVARS], t_end: f64, opts: OdeOptions) -> Self {
        Self {
            ode: Dop853::new(rhs, 0.0, y0, t_end, opts),
            t_end,
        }
    }

    fn at(&mut self, t: f64) -> Result<[f64; NVARS]> {
        if self.ode.steps() == 0 && t <= 0.0 {
            return Ok(*self.ode.y());
        }
        while self.ode.t() < t {
            self.ode.step(self.t_end)?;
        }
        if t == self.ode.t() {
            return Ok(*self.ode.y());
        }
        Ok(self.ode.dense().eval(t))
    }
}

/// Reduced flow and position map restricted to `q1 = p1 = 0`, which the
/// reduced flow leaves invariant.
struct CentreFlow {
    field: PolyBundle,
    position: PolyBundle,
}

impl CentreFlow {
    fn new(red: &Reduction) -> Self {
        Self {
            field: PolyBundle::field(&red.center_h),
            position: red.forward.restricted_bundle([true, true, false, false, false, false], &[0, 1, 2]),
        }
    }
}

/// Break times of one centre-manifold initial condition for every
/// tolerance: the first sample time at which the position difference
/// exceeds the tolerance, or `t_max` when it never does.
pub fn break_times(red: &Reduction, nf: &[f64; NVARS], tols: &[f64], opts: &ConvergenceOptions) -> Result<Vec<f64>> {
    cell_break_times(red, &CentreFlow::new(red), nf, tols, opts)
}

fn cell_break_times(red: &Reduction, flow: &CentreFlow, nf: &[f64; NVARS], tols: &[f64], opts: &ConvergenceOptions) -> Result<Vec<f64>> {
    if nf[0] != 0.0 || nf[1] != 0.0 {
        return Err(Error::InvalidArgument("initial condition is off the centre manifold".into()));
    }
    let mut scratch = Vec::new();
    let reduced_rhs = |_t: f64, y: &[f64; NVARS], dy: &mut [f64; NVARS]| flow.field.eval_into(y, &mut scratch, dy);
    let mut pos_scratch = Vec::new();
    let mut pos = [0.0; 3];
    let params = &red.params;
    let full_rhs = |_t: f64, y: &[f64; NVARS], dy: &mut [f64; NVARS]| {
        *dy = params.eom(&PhaseState::from_array(*y)).to_array();
    };
    let start = red.nf_to_barycentric(nf).to_array();
    let mut reduced = Sampler::new(reduced_rhs, *nf, opts.t_max, opts.ode);
    let mut full = Sampler::new(full_rhs, start, opts.t_max, opts.ode);
    let mut out = vec![f64::NAN; tols.len()];
    let mut open = tols.len();
    let n = (opts.t_max / opts.dt).round() as usize;
    for k in 0..=n {
        let t = (k as f64 * opts.dt).min(opts.t_max);
        flow.position.eval_into(&reduced.at(t)?, &mut pos_scratch, &mut pos);
        let b = full.at(t)?;
        let err = (pos[0] - b[0]).hypot(pos[1] - b[1]).hypot(pos[2] - b[2]);
        for (o, &tol) in out.iter_mut().zip(tols) {
            if o.is_nan() && err > tol {
                *o = t;
                open -= 1;
            }
        }
        if open == 0 {
            break;
        }
    }
    for o in out.iter_mut().filter(|o| o.is_nan()) {
        *o = opts.t_max;
    }
    Ok(out)
}

/// Convergence maps for several tolerances from a single set of integrations.
pub fn convergence_maps(red: &Reduction, energy: f64, tols: &[f64], opts: &ConvergenceOptions) -> Result<Vec<ConvergenceMap>> {
    let delta = energy - red.h0;
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!("energy {energy} is not above the saddle energy {}", red.h0)));
    }
    if opts.grid_n == 0 || !(opts.t_max > 0.0) || !(opts.dt > 0.0) {
        return Err(Error::InvalidArgument("grid size, t_max and dt must be positive".into()));
    }
    if tols.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::InvalidArgument("tolerances must be positive".into()));
    }
    let radius = (0..BOUNDARY_RAYS)
        .map(|k| boundary_radius(red, delta, std::f64::consts::TAU * k as f64 / BOUNDARY_RAYS as f64))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let n = opts.grid_n;
    let step = 2.0 * radius / n as f64;
    let flow = CentreFlow::new(red);
    let rows: Vec<(Cell, Vec<f64>)> = (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let q2 = -radius + (idx % n) as f64 * step + 0.5 * step;
            let p2 = -radius + (idx / n) as f64 * step + 0.5 * step;
            let p3 = solve_p3(red, delta, q2, p2);
            let nf = [0.0, 0.0, q2, p2, 0.0, p3.unwrap_or(0.0)];
            let bary = red.nf_to_barycentric(&nf);
            let times = match p3 {
                Some(_) => cell_break_times(red, &flow, &nf, tols, opts).ok(),
                None => None,
            };
            let cell = Cell {
                q2,
                p2,
                p3,
                x: bary.x,
                y: bary.y,
                t_break: None,
            };
            (cell, times.unwrap_or_default())
        })
        .collect();
    Ok(tols
        .iter()
        .enumerate()
        .map(|(k, &tol)| ConvergenceMap {
            point: red.point,
            order: red.order,
            energy,
            tol,
            t_max: opts.t_max,
            grid_n: n,
            radius,
            cells: rows
                .iter()
                .map(|(c, t)| Cell {
                    t_break: t.get(k).copied(),
                    ..c.clone()
                })
                .collect(),
            note: CAVEAT.into(),
        })
        .collect())
}

pub fn convergence_map(red: &Reduction, energy: f64, tol: f64, opts: &ConvergenceOptions) -> Result<ConvergenceMap> {
    Ok(convergence_maps(red, energy, &[tol], opts)?.remove(0))
}

/// Largest centre-plane amplitude up to which every feasible cell keeps
/// `t_break ≥ t_ref`; the full disc radius when no cell falls short.
pub fn domain_radius(map: &ConvergenceMap, t_ref: f64) -> f64 {
    let mut cells: Vec<&Cell> = map.feasible().collect();
    cells.sort_by(|a, b| a.amplitude().total_cmp(&b.amplitude()));
    let mut last = 0.0;
    for c in cells {
        if c.t_break.unwrap() < t_ref {
            return last;
        }
        last = c.amplitude();
    }
    map.radius
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;
    use crate::reduction::reduce_to_center_manifold;
    use proptest::prelude::*;
    use std::sync::OnceLock;

    fn red() -> &'static Reduction {
        static R: OnceLock<Reduction> = OnceLock::new();
        R.get_or_init(|| reduce_to_center_manifold(&ModelParams::model1(), SaddlePoint::L1, 10).unwrap())
    }

    fn small() -> ConvergenceOptions {
        ConvergenceOptions {
            grid_n: 6,
            t_max: 3.0,
            ..Default::default()
        }
    }

    fn maps() -> &'static Vec<ConvergenceMap> {
        static M: OnceLock<Vec<ConvergenceMap>> = OnceLock::new();
        M.get_or_init(|| convergence_maps(red(), 130300.178, &[1e-6, 1e-9], &small()).unwrap())
    }

    #[test]
    fn feasible_cells_sit_on_the_energy_level() {
        let r = red();
        let m = &maps()[0];
        assert_eq!(m.cells.len(), 36);
        assert!(m.n_feasible() > 20);
        for c in &m.cells {
            let nf = [0.0, 0.0, c.q2, c.p2, 0.0, c.p3.unwrap_or(0.0)];
            match c.t_break {
                Some(t) => {
                    assert!((r.center_h.evaluate(&nf) - (130300.178 - r.h0)).abs() < 1e-9);
                    assert!((0.0..=m.t_max).contains(&t));
                    let b = r.nf_to_barycentric(&nf);
                    assert_eq!((b.x, b.y), (c.x, c.y));
                }
                None => assert!(c.amplitude() > 0.5 * m.radius),
            }
        }
    }

    #[test]
    fn tighter_tolerance_breaks_earlier() {
        let [loose, tight] = &maps()[..] else { panic!() };
        for (a, b) in loose.cells.iter().zip(&tight.cells) {
            assert_eq!(a.t_break.is_some(), b.t_break.is_some());
            if let (Some(a), Some(b)) = (a.t_break, b.t_break) {
                assert!(b <= a);
            }
        }
        assert!(tight.mean_t_break() < loose.mean_t_break());
        assert!(domain_radius(tight, 2.0) <= domain_radius(loose, 2.0));
    }

    #[test]
    fn single_map_matches_joint_run() {
        let m = convergence_map(red(), 130300.178, 1e-9, &small()).unwrap();
        assert_eq!(m, maps()[1]);
    }

    #[test]
    fn zero_reference_time_gives_full_disc() {
        for m in maps() {
            assert_eq!(domain_radius(m, 0.0), m.radius);
            assert!(domain_radius(m, m.t_max + 1.0) == 0.0);
        }
    }

    #[test]
    fn domain_radius_stops_at_first_short_cell() {
        let cell = |q2: f64, t: f64| Cell {
            q2,
            p2: 0.0,
            p3: Some(0.0),
            x: 0.0,
            y: 0.0,
            t_break: Some(t),
        };
        let mut m = maps()[0].clone();
        m.radius = 1.0;
        m.cells = vec![cell(0.9, 5.0), cell(0.1, 5.0), cell(-0.5, 1.0), cell(0.3, 4.0)];
        assert_eq!(domain_radius(&m, 3.0), 0.3);
        assert_eq!(domain_radius(&m, 4.5), 0.1);
        assert_eq!(domain_radius(&m, 0.5), 1.0);
    }

    #[test]
    fn rejects_energy_below_saddle_and_off_manifold_points() {
        let r = red();
        assert!(convergence_map(r, r.h0 - 1.0, 1e-6, &small()).is_err());
        let o = ConvergenceOptions { grid_n: 0, ..small() };
        assert!(convergence_map(r, r.h0 + 5.0, 1e-6, &o).is_err());
        assert!(break_times(r, &[1e-3, 0.0, 0.1, 0.0, 0.0, 0.1], &[1e-6], &small()).is_err());
    }

    #[test]
    fn break_time_limits() {
        let r = red();
        let nf = [0.0, 0.0, 0.2, 0.1, 0.0, 0.3];
        let t = break_times(r, &nf, &[1.0, 1e-300], &small()).unwrap();
        assert_eq!(t[0], small().t_max);
        assert!(t[1] <= 0.05);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]
        #[test]
        fn break_time_is_monotone_in_tolerance(q2 in -0.5f64..0.5, p2 in -0.5f64..0.5, p3 in 0.0f64..0.5, a in -10.0f64..-4.0, b in -10.0f64..-4.0) {
            let nf = [0.0, 0.0, q2, p2, 0.0, p3];
            let (lo, hi) = (10f64.powf(a.min(b)), 10f64.powf(a.max(b)));
            let t = break_times(red(), &nf, &[lo, hi], &small()).unwrap();
            prop_assert!(t[0] <= t[1]);
        }
    }
}
