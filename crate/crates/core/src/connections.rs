//! First-return curves of manifold tubes, their intersections, refined
//! homoclinic/heteroclinic orbits and the resulting global morphology.

use crate::dynamics::{
    globalize_manifold, integrate_full, manifold_ic_at, planar_lyapunov, Branch, GlobalizeOptions, Orientation,
    PeriodicOrbit, RunOptions, Sample, StopRule, Surface, TrajStatus,
};
use crate::equilibria::{saddle_energy, SweepParam};
use crate::error::{Error, Result};
use crate::model::{ModelParams, PhaseState};
use crate::ode::OdeOptions;
use crate::reduction::{reduce, Elimination, Reduction};
use crate::SaddlePoint;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Minimum crossing angle (radians, in box-normalised section coordinates)
/// for an intersection to count as transversal.
pub const TRANSVERSAL_ANGLE: f64 = 1e-3;

/// Fraction of tube trajectories allowed to miss the surface.
pub const MISSING_FRACTION: f64 = 0.05;

/// Longest allowed curve segment, as a fraction of the bounding-box
/// diagonal; longer segments are subdivided in phase.
pub const MAX_SEGMENT: f64 = 0.02;

/// Phase spacing below which a long segment is declared a break.
const MIN_PHASE_STEP: f64 = 1e-6;

/// Section-coordinate agreement required of a refined connection.
pub const REFINE_TOL: f64 = 1e-10;

/// Normal-form distance from the orbits at which refined connections are
/// cut off.
pub const TAIL_DISTANCE: f64 = 1e-7;

/// Section coordinates: `(x, ẋ)` on S, `(y, ẏ)` on S′.
fn section_coords(surface: Surface, s: &PhaseState, omega: f64) -> Result<(f64, f64)> {
    let v = s.velocity(omega);
    match surface {
        Surface::S => Ok((s.x, v[0])),
        Surface::SPrime | Surface::Plane(0) => Ok((s.y, v[1])),
        Surface::Plane(1) => Ok((s.x, v[0])),
        _ => Err(Error::InvalidArgument(format!("surface {} has no planar section chart", surface.name()))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionPoint {
    pub phase: f64,
    pub coord: f64,
    pub vel: f64,
    /// Crossing time (negative for stable branches).
    pub t: f64,
    pub state: PhaseState,
    pub rising: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SectionCurve {
    pub surface: Surface,
    pub point: SaddlePoint,
    pub branch: Branch,
    pub cut: usize,
    pub energy: f64,
    pub points: Vec<SectionPoint>,
    pub missing: usize,
    /// Indices `i` whose segment to point `i + 1` (cyclically) is not part
    /// of the curve: the phase interval jumps between distant pieces.
    pub breaks: Vec<usize>,
    /// No proper self-crossings of the polyline.
    pub simple: bool,
}

impl SectionCurve {
    pub fn is_closed(&self) -> bool {
        self.breaks.is_empty()
    }

    /// Segments `(i, i + 1 mod n)` that belong to the curve.
    pub fn segments(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.points.len()).filter(|i| self.breaks.binary_search(i).is_err())
    }

    pub fn tube_id(&self) -> String {
        format!("{}:{}", self.point.name(), self.branch.name())
    }

    /// Largest distance between two curve points.
    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for a in &self.points {
            for b in &self.points {
                d = d.max((a.coord - b.coord).hypot(a.vel - b.vel));
            }
        }
        d
    }
}

/// Periodic orbit plus the data needed to place manifold initial conditions
/// at any phase.
#[derive(Clone, Copy)]
pub struct TubeSpec<'a> {
    pub red: &'a Reduction,
    pub orbit: &'a PeriodicOrbit,
    pub branch: Branch,
    pub epsilon: f64,
}

impl TubeSpec<'_> {
    pub fn ic_at(&self, phase: f64) -> PhaseState {
        manifold_ic_at(self.red, self.orbit, self.branch, self.epsilon, phase.rem_euclid(1.0))
    }
}

#[derive(Debug, Clone)]
pub struct ConnectionOptions {
    pub order: usize,
    pub epsilon: f64,
    pub n_phase: usize,
    pub t_max: f64,
    /// Stop radius in units of `|x_L|`.
    pub stop_radius: f64,
    pub ode: OdeOptions,
    pub refine: bool,
    /// Displacement of the tubes used during refinement.
    pub refine_epsilon: f64,
    pub side: BranchSide,
}

impl Default for ConnectionOptions {
    fn default() -> Self {
        Self {
            order: 15,
            epsilon: 1e-5,
            n_phase: 100,
            t_max: 30.0,
            stop_radius: 4.0,
            ode: OdeOptions::with_tolerances(1e-13, 1e-14),
            refine: true,
            refine_epsilon: 1e-3,
            side: BranchSide::Outer,
        }
    }
}

/// Reductions at both saddles of one model, shared across energies.
pub struct ModelContext {
    pub params: ModelParams,
    pub l1: Reduction,
    pub l2: Reduction,
}

impl ModelContext {
    pub fn new(params: &ModelParams, order: usize) -> Result<Self> {
        params.validate()?;
        let (l1, l2) = rayon::join(
            || reduce(params, SaddlePoint::L1, order, Elimination::HyperbolicNormalForm),
            || reduce(params, SaddlePoint::L2, order, Elimination::HyperbolicNormalForm),
        );
        Ok(Self {
            params: *params,
            l1: l1?,
            l2: l2?,
        })
    }

    pub fn reduction(&self, point: SaddlePoint) -> &Reduction {
        match point {
            SaddlePoint::L1 => &self.l1,
            SaddlePoint::L2 => &self.l2,
        }
    }

    pub fn x_l(&self) -> f64 {
        self.l1.equilibrium().x.abs()
    }

    pub fn saddle_energy(&self) -> f64 {
        self.l1.h0
    }

    /// Refined planar Lyapunov orbits around L1 and L2.
    pub fn lyapunov_pair(&self, energy: f64) -> Result<(PeriodicOrbit, PeriodicOrbit)> {
        let (a, b) = rayon::join(|| planar_lyapunov(&self.l1, energy), || planar_lyapunov(&self.l2, energy));
        let (a, b) = (a?, b?);
        a.require_refined()?;
        b.require_refined()?;
        Ok((a, b))
    }

    fn globalize(&self, record: Option<Surface>, cut: usize, opts: &ConnectionOptions) -> GlobalizeOptions {
        GlobalizeOptions {
            t_max: opts.t_max,
            stop: match record {
                Some(_) => StopRule::SectionHits(cut),
                None => StopRule::Radius(opts.stop_radius * self.x_l()),
            },
            record: record.map(|s| vec![(s, Orientation::Any)]).unwrap_or_default(),
            ode: opts.ode,
            keep_dense: false,
        }
    }

    /// Section curve of one tube at cut `cut` (1 = first return).
    pub fn section_curve(&self, spec: TubeSpec<'_>, surface: Surface, cut: usize, opts: &ConnectionOptions) -> Result<SectionCurve> {
        let ics: Vec<PhaseState> = (0..opts.n_phase).map(|k| spec.ic_at(k as f64 / opts.n_phase as f64)).collect();
        let mut g = self.globalize(Some(surface), cut, opts);
        // Runs that leave far outside never come back to an interior surface.
        g.stop = StopRule::SectionHits(cut);
        let tube = globalize_manifold(&self.params, &ics, spec.branch, &g)?;
        let mut curve = first_return_curve(&tube.trajectories, &self.params, spec.orbit.point, spec.branch, tube.energy, surface, cut)?;
        self.densify(&mut curve, spec, &g)?;
        Ok(curve)
    }

    /// Bisects long segments in phase until they are short or their phase
    /// interval falls below [`MIN_PHASE_STEP`]; what remains long is a break.
    fn densify(&self, curve: &mut SectionCurve, spec: TubeSpec<'_>, g: &GlobalizeOptions) -> Result<()> {
        let n0 = curve.points.len();
        let budget = 20 * n0.max(1);
        let mut added = 0;
        let mut missed: Vec<f64> = Vec::new();
        loop {
            let pts = &curve.points;
            let n = pts.len();
            let gap = |i: usize| (pts[(i + 1) % n].phase - pts[i].phase).rem_euclid(1.0);
            let mid = |i: usize| (pts[i].phase + 0.5 * gap(i)).rem_euclid(1.0);
            let todo = long_segments(pts, |i| gap(i) > MIN_PHASE_STEP && !missed.contains(&mid(i)));
            if todo.is_empty() || added >= budget {
                break;
            }
            let phases: Vec<f64> = todo.iter().map(|&i| mid(i)).collect();
            let ics: Vec<PhaseState> = phases.iter().map(|&ph| spec.ic_at(ph)).collect();
            let tube = globalize_manifold(&self.params, &ics, spec.branch, g)?;
            let mut fresh = Vec::new();
            for (tt, &ph) in tube.trajectories.iter().zip(&phases) {
                match tt.trajectory.crossings.iter().filter(|c| c.surface == curve.surface).nth(curve.cut - 1) {
                    Some(c) => {
                        let (coord, vel) = section_coords(curve.surface, &c.barycentric, self.params.omega)?;
                        fresh.push(SectionPoint {
                            phase: ph,
                            coord,
                            vel,
                            t: c.t,
                            state: c.barycentric,
                            rising: c.rising,
                        });
                    }
                    None => missed.push(ph),
                }
            }
            added += phases.len();
            curve.points.extend(fresh);
            curve.points.sort_by(|a, b| a.phase.total_cmp(&b.phase));
        }
        curve.breaks = long_segments(&curve.points, |_| true);
        curve.simple = self_crossings(curve) == 0;
        Ok(())
    }
}

/// Builds the cut-`cut` section curve from trajectories that recorded
/// crossings of `surface`. Points are ordered by source phase.
pub fn first_return_curve(
    trajectories: &[crate::dynamics::TubeTrajectory],
    params: &ModelParams,
    point: SaddlePoint,
    branch: Branch,
    energy: f64,
    surface: Surface,
    cut: usize,
) -> Result<SectionCurve> {
    if cut == 0 {
        return Err(Error::InvalidArgument("cut index starts at 1".into()));
    }
    let mut points = Vec::with_capacity(trajectories.len());
    let mut missing = 0;
    for tt in trajectories {
        let hit = tt.trajectory.crossings.iter().filter(|c| c.surface == surface).nth(cut - 1);
        match hit {
            Some(c) => {
                let (coord, vel) = section_coords(surface, &c.barycentric, params.omega)?;
                points.push(SectionPoint {
                    phase: tt.phase,
                    coord,
                    vel,
                    t: c.t,
                    state: c.barycentric,
                    rising: c.rising,
                });
            }
            None => missing += 1,
        }
    }
    let total = trajectories.len();
    if total == 0 || missing as f64 > MISSING_FRACTION * total as f64 {
        return Err(Error::IncompleteCurve { missing, total });
    }
    points.sort_by(|a, b| a.phase.total_cmp(&b.phase));
    let mut curve = SectionCurve {
        surface,
        point,
        branch,
        cut,
        energy,
        points,
        missing,
        breaks: Vec::new(),
        simple: true,
    };
    curve.breaks = long_segments(&curve.points, |_| true);
    curve.simple = self_crossings(&curve) == 0;
    Ok(curve)
}

/// Segments longer than [`MAX_SEGMENT`] of the bounding-box diagonal, or
/// joining crossings of opposite sense. `eligible` filters candidates.
fn long_segments(points: &[SectionPoint], eligible: impl Fn(usize) -> bool) -> Vec<usize> {
    let n = points.len();
    if n < 2 {
        return Vec::new();
    }
    let (mut lo, mut hi) = ((f64::MAX, f64::MAX), (f64::MIN, f64::MIN));
    for p in points {
        lo = (lo.0.min(p.coord), lo.1.min(p.vel));
        hi = (hi.0.max(p.coord), hi.1.max(p.vel));
    }
    let sx = (hi.0 - lo.0).max(f64::MIN_POSITIVE);
    let sy = (hi.1 - lo.1).max(f64::MIN_POSITIVE);
    (0..n)
        .filter(|&i| eligible(i))
        .filter(|&i| {
            let (a, b) = (&points[i], &points[(i + 1) % n]);
            a.rising != b.rising || ((a.coord - b.coord) / sx).hypot((a.vel - b.vel) / sy) > MAX_SEGMENT * std::f64::consts::SQRT_2
        })
        .collect()
}

fn orient(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

/// Strict crossing of segments `ab` and `cd`; returns the parameters along
/// each. Touching and collinear configurations are not crossings.
fn proper_crossing(a: (f64, f64), b: (f64, f64), c: (f64, f64), d: (f64, f64)) -> Option<(f64, f64)> {
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    if !(o1 * o2 < 0.0 && o3 * o4 < 0.0) {
        return None;
    }
    Some((o3 / (o3 - o4), o1 / (o1 - o2)))
}

/// True when the segments touch or overlap without crossing.
fn touches(a: (f64, f64), b: (f64, f64), c: (f64, f64), d: (f64, f64)) -> bool {
    let on = |p: (f64, f64), q: (f64, f64), r: (f64, f64)| {
        orient(p, q, r) == 0.0 && r.0 >= p.0.min(q.0) && r.0 <= p.0.max(q.0) && r.1 >= p.1.min(q.1) && r.1 <= p.1.max(q.1)
    };
    on(a, b, c) || on(a, b, d) || on(c, d, a) || on(c, d, b)
}

fn xy(p: &SectionPoint) -> (f64, f64) {
    (p.coord, p.vel)
}

fn self_crossings(curve: &SectionCurve) -> usize {
    let points = &curve.points;
    let n = points.len();
    let segs: Vec<usize> = curve.segments().collect();
    let mut count = 0;
    for (k, &i) in segs.iter().enumerate() {
        for &j in &segs[k + 1..] {
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let (a, b) = (xy(&points[i]), xy(&points[(i + 1) % n]));
            let (c, d) = (xy(&points[j]), xy(&points[(j + 1) % n]));
            if proper_crossing(a, b, c, d).is_some() {
                count += 1;
            }
        }
    }
    count
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub phase_u: f64,
    pub phase_s: f64,
    pub coord: f64,
    pub vel: f64,
    /// Crossing angle in `[0, π/2]` after normalising both axes by the
    /// joint bounding box.
    pub angle: f64,
    pub transversal: bool,
}

fn lerp_phase(a: f64, b: f64, t: f64) -> f64 {
    // Closing segment wraps from the last phase back to 1 + first.
    let b = if b < a { b + 1.0 } else { b };
    (a + t * (b - a)).rem_euclid(1.0)
}

/// Segment-pair intersections of two closed section polylines. Segments
/// whose endpoints cross the surface in different senses are skipped.
pub fn curve_intersections(c1: &SectionCurve, c2: &SectionCurve) -> Result<Vec<Candidate>> {
    if c1.surface != c2.surface {
        return Err(Error::IncomparableCurves(format!("surfaces {} and {}", c1.surface.name(), c2.surface.name())));
    }
    let de = (c1.energy - c2.energy).abs();
    if de >= 1e-9 * c1.energy.abs().max(1.0) {
        return Err(Error::IncomparableCurves(format!("energies differ by {de:e}")));
    }
    let all = c1.points.iter().chain(&c2.points);
    let (mut lo, mut hi) = ((f64::MAX, f64::MAX), (f64::MIN, f64::MIN));
    for p in all {
        lo = (lo.0.min(p.coord), lo.1.min(p.vel));
        hi = (hi.0.max(p.coord), hi.1.max(p.vel));
    }
    let scale = ((hi.0 - lo.0).max(f64::MIN_POSITIVE), (hi.1 - lo.1).max(f64::MIN_POSITIVE));
    let (n1, n2) = (c1.points.len(), c2.points.len());
    let segs2: Vec<usize> = c2.segments().collect();
    let mut out = Vec::new();
    for i in c1.segments() {
        let (p, q) = (&c1.points[i], &c1.points[(i + 1) % n1]);
        if p.rising != q.rising {
            continue;
        }
        for &j in &segs2 {
            let (r, s) = (&c2.points[j], &c2.points[(j + 1) % n2]);
            if r.rising != s.rising || r.rising != p.rising {
                continue;
            }
            let (a, b, c, d) = (xy(p), xy(q), xy(r), xy(s));
            if let Some((t1, t2)) = proper_crossing(a, b, c, d) {
                let u = ((b.0 - a.0) / scale.0, (b.1 - a.1) / scale.1);
                let v = ((d.0 - c.0) / scale.0, (d.1 - c.1) / scale.1);
                let cross = (u.0 * v.1 - u.1 * v.0).abs();
                let dot = (u.0 * v.0 + u.1 * v.1).abs();
                let angle = cross.atan2(dot);
                out.push(Candidate {
                    phase_u: lerp_phase(p.phase, q.phase, t1),
                    phase_s: lerp_phase(r.phase, s.phase, t2),
                    coord: a.0 + t1 * (b.0 - a.0),
                    vel: a.1 + t1 * (b.1 - a.1),
                    angle,
                    transversal: angle > TRANSVERSAL_ANGLE,
                });
            } else if touches(a, b, c, d) {
                let hit = if orient(a, b, c) == 0.0 { c } else { d };
                out.push(Candidate {
                    phase_u: p.phase,
                    phase_s: r.phase,
                    coord: hit.0,
                    vel: hit.1,
                    angle: 0.0,
                    transversal: false,
                });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConnectionKind {
    Homoclinic,
    Heteroclinic,
}

impl ConnectionKind {
    pub fn name(self) -> &'static str {
        match self {
            ConnectionKind::Homoclinic => "homoclinic",
            ConnectionKind::Heteroclinic => "heteroclinic",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Connection {
    pub kind: ConnectionKind,
    pub phase_u: f64,
    pub phase_s: f64,
    pub coord: f64,
    pub vel: f64,
    pub gap: f64,
    pub iterations: usize,
    /// Stitched trajectory, time starting at 0 on the unstable side.
    pub trajectory: Vec<Sample>,
    /// Normal-form distance of the ends from the departure and arrival
    /// orbits.
    pub start_distance: f64,
    pub end_distance: f64,
}

fn first_hit(params: &ModelParams, ic: &PhaseState, branch: Branch, surface: Surface, t_max: f64, ode: OdeOptions, keep: bool) -> Option<(SectionPoint, Vec<Sample>)> {
    let run = RunOptions {
        ode,
        keep_dense: false,
        record: vec![(surface, Orientation::Any)],
        stop_radius: None,
        max_crossings: Some(1),
        min_event_time: 0.0,
    };
    let traj = integrate_full(params, ic, branch.time_sign() * t_max, &run).ok()?;
    let c = traj.crossings.first()?;
    let (coord, vel) = section_coords(surface, &c.barycentric, params.omega).ok()?;
    let samples = if keep { traj.samples } else { Vec::new() };
    Some((
        SectionPoint {
            phase: f64::NAN,
            coord,
            vel,
            t: c.t,
            state: c.barycentric,
            rising: c.rising,
        },
        samples,
    ))
}

/// First crossing of `surface` by the tube trajectory started at `phase`.
pub fn section_point_at(params: &ModelParams, spec: TubeSpec<'_>, surface: Surface, phase: f64, opts: &ConnectionOptions) -> Option<SectionPoint> {
    first_hit(params, &spec.ic_at(phase), spec.branch, surface, opts.t_max, opts.ode, false).map(|(p, _)| SectionPoint { phase, ..p })
}

/// Normal-form hyperbolic amplitude `sqrt(q1² + p1²)` of a state, which
/// vanishes on the orbit.
pub fn distance_to_orbit(red: &Reduction, s: &PhaseState) -> f64 {
    let nf = red.barycentric_to_nf(s);
    nf[0].hypot(nf[1])
}

/// Floquet rate of the tube's orbit, measured by following one tube
/// trajectory for a short time and reading off its normal-form growth.
fn floquet_rate(params: &ModelParams, spec: TubeSpec<'_>, ode: OdeOptions) -> Result<f64> {
    let lambda = spec.red.linearization.lambda;
    let tau = 1.0 / lambda;
    let eps = spec.epsilon.max(1e-6);
    let probe = TubeSpec { epsilon: eps, ..spec };
    let run = RunOptions {
        ode,
        keep_dense: false,
        record: Vec::new(),
        stop_radius: None,
        max_crossings: None,
        min_event_time: 0.0,
    };
    let traj = integrate_full(params, &probe.ic_at(0.0), spec.branch.time_sign() * tau, &run)?;
    let grown = distance_to_orbit(spec.red, &PhaseState::from_array(traj.last().state));
    Ok((grown / eps).ln() / tau)
}

/// Solves `U(s_u) = S(s_s)` on the surface by damped Newton iteration on
/// the two phases, starting from a transversal candidate of tubes built
/// with `u.epsilon` and `s.epsilon`.
///
/// Refinement runs on tubes displaced by `opts.refine_epsilon` instead,
/// where rounding of the initial condition relative to the displacement is
/// small enough to resolve the tolerance. Those are the same manifolds, so
/// the candidate phases are shifted along the flow by
/// `ln(ε'/ε) / (λ_eff T)`. The stitched trajectory is then extended at both
/// ends by integrating back toward the orbits.
pub fn refine_connection(
    params: &ModelParams,
    candidate: &Candidate,
    u: TubeSpec<'_>,
    s: TubeSpec<'_>,
    surface: Surface,
    opts: &ConnectionOptions,
) -> Result<Connection> {
    if !candidate.transversal {
        return Err(Error::InvalidArgument("refinement needs a transversal candidate".into()));
    }
    let kind = if u.orbit.point == s.orbit.point {
        ConnectionKind::Homoclinic
    } else {
        ConnectionKind::Heteroclinic
    };
    let ode = opts.ode;
    let eps = opts.refine_epsilon;
    let shift = |spec: TubeSpec<'_>| -> Result<f64> {
        let rate = floquet_rate(params, spec, ode)?;
        Ok(spec.branch.time_sign() * (eps / spec.epsilon).ln() / (rate * spec.orbit.period))
    };
    let (mut su, mut ss) = (candidate.phase_u + shift(u)?, candidate.phase_s + shift(s)?);
    let u = TubeSpec { epsilon: eps, ..u };
    let s = TubeSpec { epsilon: eps, ..s };

    let eval = |spec: &TubeSpec<'_>, ph: f64| -> Result<SectionPoint> {
        first_hit(params, &spec.ic_at(ph), spec.branch, surface, opts.t_max, ode, false)
            .map(|(p, _)| p)
            .ok_or(Error::RefinementStall { gap: f64::INFINITY })
    };
    let residual = |a: &SectionPoint, b: &SectionPoint| (a.coord - b.coord, a.vel - b.vel);
    let norm = |r: (f64, f64)| r.0.hypot(r.1);

    let (mut pu, mut ps) = (eval(&u, su)?, eval(&s, ss)?);
    let mut gap = norm(residual(&pu, &ps));
    let mut iterations = 0;
    let mut h = 1e-7;
    let mut retries = 0;
    while gap >= REFINE_TOL && iterations < 40 {
        iterations += 1;
        let (du1, du0) = (eval(&u, su + h)?, eval(&u, su - h)?);
        let (ds1, ds0) = (eval(&s, ss + h)?, eval(&s, ss - h)?);
        let ju = ((du1.coord - du0.coord) / (2.0 * h), (du1.vel - du0.vel) / (2.0 * h));
        let js = ((ds1.coord - ds0.coord) / (2.0 * h), (ds1.vel - ds0.vel) / (2.0 * h));
        // r(su, ss) = U(su) - S(ss), Jacobian [ju, -js].
        let r = residual(&pu, &ps);
        let det = -ju.0 * js.1 + js.0 * ju.1;
        if det == 0.0 || !det.is_finite() {
            return Err(Error::RefinementStall { gap });
        }
        let dsu = (-r.0 * js.1 + js.0 * r.1) / det;
        let dss = (ju.0 * r.1 - ju.1 * r.0) / det;
        let mut step = 1.0;
        let mut improved = false;
        while step > 1e-4 {
            let (nu, ns) = (su - step * dsu, ss - step * dss);
            if let (Ok(a), Ok(b)) = (eval(&u, nu), eval(&s, ns)) {
                let g = norm(residual(&a, &b));
                if g < gap {
                    (su, ss, pu, ps, gap) = (nu, ns, a, b, g);
                    improved = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !improved {
            // Near the rounding floor a different difference step gives a
            // different Newton proposal.
            retries += 1;
            if retries > 4 {
                break;
            }
            h *= 0.3;
        }
    }
    if gap >= REFINE_TOL {
        return Err(Error::RefinementStall { gap });
    }

    let stall = Error::RefinementStall { gap };
    let (ic_u, ic_s) = (u.ic_at(su), s.ic_at(ss));
    let (_, fwd) = first_hit(params, &ic_u, u.branch, surface, opts.t_max, ode, true).ok_or(stall)?;
    let (_, bwd) = first_hit(params, &ic_s, s.branch, surface, opts.t_max, ode, true).ok_or(Error::RefinementStall { gap })?;
    let run = RunOptions {
        ode,
        keep_dense: false,
        record: Vec::new(),
        stop_radius: None,
        max_crossings: None,
        min_event_time: 0.0,
    };
    let t_ext = (eps / TAIL_DISTANCE).ln() / u.red.linearization.lambda;
    let head = integrate_full(params, &ic_u, -t_ext, &run)?;
    let tail = integrate_full(params, &ic_s, t_ext, &run)?;

    let mut trajectory: Vec<Sample> = head.samples.iter().rev().map(|p| Sample { t: p.t + t_ext, ..*p }).collect();
    trajectory.pop();
    trajectory.extend(fwd.iter().filter(|p| p.t <= pu.t).map(|p| Sample { t: p.t + t_ext, ..*p }));
    let t_cross = pu.t + t_ext;
    trajectory.extend(bwd.iter().rev().filter(|p| p.t >= ps.t).map(|p| Sample { t: t_cross + (p.t - ps.t), ..*p }));
    let t_end = trajectory.last().map(|p| p.t).unwrap_or(0.0);
    trajectory.extend(tail.samples.iter().skip(1).map(|p| Sample { t: t_end + p.t, ..*p }));

    let state = |p: Option<&Sample>| PhaseState::from_array(p.map(|p| p.state).unwrap_or_default());
    let start_distance = distance_to_orbit(u.red, &state(trajectory.first()));
    let end_distance = distance_to_orbit(s.red, &state(trajectory.last()));
    Ok(Connection {
        kind,
        phase_u: su.rem_euclid(1.0),
        phase_s: ss.rem_euclid(1.0),
        coord: pu.coord,
        vel: pu.vel,
        gap,
        iterations,
        trajectory,
        start_distance,
        end_distance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Morphology {
    R1,
    R1R2,
    Spiral,
}

impl Morphology {
    pub fn name(self) -> &'static str {
        match self {
            Morphology::R1 => "R1",
            Morphology::R1R2 => "R1R2",
            Morphology::Spiral => "spiral",
        }
    }
}

/// Intersection search between an unstable and a stable first-return curve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConnectionSet {
    pub kind: ConnectionKind,
    pub unstable: SectionCurve,
    pub stable: SectionCurve,
    pub candidates: Vec<Candidate>,
    pub refined: Vec<Connection>,
    /// Refinement failures, as messages, one per failed candidate.
    pub failures: Vec<String>,
}

impl ConnectionSet {
    pub fn transversal(&self) -> usize {
        self.candidates.iter().filter(|c| c.transversal).count()
    }
}

/// Which side of the bottlenecks the searched manifold branches leave on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum BranchSide {
    /// Branches leaving into the interior region.
    Inner,
    /// Branches leaving outward; these carry the rings and spiral arms.
    #[default]
    Outer,
}

impl BranchSide {
    pub fn name(self) -> &'static str {
        match self {
            BranchSide::Inner => "inner",
            BranchSide::Outer => "outer",
        }
    }

    fn branches(self) -> (Branch, Branch) {
        match self {
            BranchSide::Inner => (Branch::UnstableInner, Branch::StableInner),
            BranchSide::Outer => (Branch::UnstableOuter, Branch::StableOuter),
        }
    }
}

impl std::str::FromStr for BranchSide {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inner" => Ok(BranchSide::Inner),
            "outer" => Ok(BranchSide::Outer),
            _ => Err(Error::Parse(format!("unknown branch side '{s}' (expected inner or outer)"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MorphologyReport {
    pub params: ModelParams,
    pub energy: f64,
    pub side: BranchSide,
    pub class: Morphology,
    pub homoclinic: Option<ConnectionSet>,
    pub heteroclinic: ConnectionSet,
    /// Errors that did not affect the classification.
    pub notes: Vec<String>,
}

impl MorphologyReport {
    pub fn n_homoclinic(&self) -> usize {
        self.homoclinic.as_ref().map_or(0, |c| c.transversal())
    }

    pub fn n_heteroclinic(&self) -> usize {
        self.heteroclinic.transversal()
    }
}

/// Intersects the first-return curves of an unstable and a stable tube on
/// `surface` and, if enabled, refines every transversal candidate.
pub fn connection_set(
    ctx: &ModelContext,
    kind: ConnectionKind,
    u: TubeSpec<'_>,
    s: TubeSpec<'_>,
    surface: Surface,
    opts: &ConnectionOptions,
) -> Result<ConnectionSet> {
    let (cu, cs) = rayon::join(|| ctx.section_curve(u, surface, 1, opts), || ctx.section_curve(s, surface, 1, opts));
    let (unstable, stable) = (cu?, cs?);
    let candidates = curve_intersections(&unstable, &stable)?;
    let mut refined = Vec::new();
    let mut failures = Vec::new();
    if opts.refine {
        let results: Vec<Result<Connection>> = candidates
            .par_iter()
            .filter(|c| c.transversal)
            .map(|c| refine_connection(&ctx.params, c, u, s, surface, opts))
            .collect();
        for r in results {
            match r {
                Ok(c) => refined.push(c),
                Err(e) => failures.push(e.to_string()),
            }
        }
    }
    Ok(ConnectionSet {
        kind,
        unstable,
        stable,
        candidates,
        refined,
        failures,
    })
}

/// Homoclinic search: both branches of the L2 orbit on the given side, on
/// S (half a turn from L2).
///
/// Heteroclinic search on S′ (a quarter turn from either saddle): inner
/// branches pair the unstable tube of the L1 orbit with the stable tube of
/// the L2 orbit; outer branches, which circulate the other way, pair the
/// unstable tube of the L2 orbit with the stable tube of the L1 orbit.
///
/// Heteroclinic intersections give R1; otherwise homoclinic ones give R1R2;
/// neither gives spiral. When heteroclinic connections exist an incomplete
/// homoclinic curve (tubes captured by the partner orbit) is only noted.
pub fn classify_morphology(ctx: &ModelContext, energy: f64, opts: &ConnectionOptions) -> Result<MorphologyReport> {
    let (g1, g2) = ctx.lyapunov_pair(energy)?;
    let spec = |red, orbit, branch| TubeSpec {
        red,
        orbit,
        branch,
        epsilon: opts.epsilon,
    };
    let (bu, bs) = opts.side.branches();
    let (from, to) = match opts.side {
        BranchSide::Inner => ((&ctx.l1, &g1), (&ctx.l2, &g2)),
        BranchSide::Outer => ((&ctx.l2, &g2), (&ctx.l1, &g1)),
    };
    let (homo, hetero) = rayon::join(
        || connection_set(ctx, ConnectionKind::Homoclinic, spec(&ctx.l2, &g2, bu), spec(&ctx.l2, &g2, bs), Surface::S, opts),
        || connection_set(ctx, ConnectionKind::Heteroclinic, spec(from.0, from.1, bu), spec(to.0, to.1, bs), Surface::SPrime, opts),
    );
    let heteroclinic = hetero?;
    let mut notes = Vec::new();
    let homoclinic = match homo {
        Ok(h) => Some(h),
        Err(e) if heteroclinic.transversal() > 0 => {
            notes.push(format!("homoclinic search: {e}"));
            None
        }
        Err(e) => return Err(e),
    };
    let class = if heteroclinic.transversal() > 0 {
        Morphology::R1
    } else if homoclinic.as_ref().is_some_and(|h| h.transversal() > 0) {
        Morphology::R1R2
    } else {
        Morphology::Spiral
    };
    Ok(MorphologyReport {
        params: ctx.params,
        energy,
        side: opts.side,
        class,
        homoclinic,
        heteroclinic,
        notes,
    })
}

/// `|x|/|x_L|` at the first `y = 0, x < 0` crossing of the outermost
/// trajectory of the unstable outer tube of the L1 orbit.
pub fn openness_ratio(ctx: &ModelContext, energy: f64, opts: &ConnectionOptions) -> Result<f64> {
    let g1 = planar_lyapunov(&ctx.l1, energy)?;
    g1.require_refined()?;
    let spec = TubeSpec {
        red: &ctx.l1,
        orbit: &g1,
        branch: Branch::UnstableOuter,
        epsilon: opts.epsilon,
    };
    let ic = (0..opts.n_phase)
        .map(|k| spec.ic_at(k as f64 / opts.n_phase as f64))
        .max_by(|a, b| a.x.hypot(a.y).total_cmp(&b.x.hypot(b.y)))
        .ok_or_else(|| Error::InvalidArgument("n_phase must be positive".into()))?;
    let xl = ctx.x_l();
    let run = RunOptions {
        ode: opts.ode,
        keep_dense: false,
        record: vec![(Surface::Plane(1), Orientation::Any)],
        stop_radius: Some(opts.stop_radius * xl),
        max_crossings: None,
        min_event_time: 0.0,
    };
    let traj = integrate_full(&ctx.params, &ic, opts.t_max, &run)?;
    if let TrajStatus::Failed(m) = &traj.status {
        return Err(Error::InvalidArgument(m.clone()));
    }
    traj.crossings
        .iter()
        .find(|c| c.barycentric.x < 0.0)
        .map(|c| c.barycentric.x.abs() / xl)
        .ok_or(Error::NoCrossing)
}

/// Returns `q` when admissible for `p`, otherwise the midpoint of the
/// admissible interval `(p/√(1+p²), p)`. Planar runs do not depend on `q`.
pub fn admissible_q(p: f64, q: f64) -> f64 {
    let lo = p / (1.0 + p * p).sqrt();
    if q > lo && q < p {
        q
    } else {
        0.5 * (lo + p)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShapeRow {
    pub param: f64,
    pub q_phi: f64,
    pub delta_e: f64,
    pub morphology: Option<Morphology>,
    pub r_s: Option<f64>,
    pub n_homoclinic: usize,
    pub n_heteroclinic: usize,
    pub error: Option<String>,
}

/// One row per (parameter value, energy offset). Sweeps over `p_phi`
/// replace an inadmissible template `q_phi` via [`admissible_q`].
pub fn shape_sweep(template: &ModelParams, vary: SweepParam, values: &[f64], delta_es: &[f64], opts: &ConnectionOptions) -> Vec<ShapeRow> {
    values
        .par_iter()
        .flat_map_iter(|&v| {
            let mut params = vary.apply(template, v);
            if vary == SweepParam::PPhi {
                params.q_phi = admissible_q(params.p_phi, params.q_phi);
            }
            let ctx = ModelContext::new(&params, opts.order);
            let ej = saddle_energy(&params);
            delta_es
                .iter()
                .map(|&de| {
                    let mut row = ShapeRow {
                        param: v,
                        q_phi: params.q_phi,
                        delta_e: de,
                        morphology: None,
                        r_s: None,
                        n_homoclinic: 0,
                        n_heteroclinic: 0,
                        error: None,
                    };
                    let (ctx, ej) = match (&ctx, &ej) {
                        (Ok(c), Ok(e)) => (c, *e),
                        (Err(e), _) | (_, Err(e)) => {
                            row.error = Some(e.to_string());
                            return row;
                        }
                    };
                    let quick = ConnectionOptions {
                        refine: false,
                        ..opts.clone()
                    };
                    match classify_morphology(ctx, ej + de, &quick) {
                        Ok(rep) => {
                            row.morphology = Some(rep.class);
                            row.n_homoclinic = rep.n_homoclinic();
                            row.n_heteroclinic = rep.n_heteroclinic();
                        }
                        Err(e) => row.error = Some(e.to_string()),
                    }
                    match openness_ratio(ctx, ej + de, opts) {
                        Ok(r) => row.r_s = Some(r),
                        Err(e) => {
                            row.error.get_or_insert_with(|| e.to_string());
                        }
                    }
                    row
                })
                .collect::<Vec<_>>()
        })
        .collect()
}
