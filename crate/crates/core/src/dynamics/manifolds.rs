use super::{integrate_full, InvariantCurve, Orientation, PeriodicOrbit, RunOptions, Surface, TrajStatus, Trajectory};
use crate::error::{Error, Result};
use crate::model::{ModelParams, PhaseState};
use crate::ode::OdeOptions;
use crate::poly::NVARS;
use crate::reduction::{displacement_matrix, Reduction};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    UnstableInner,
    UnstableOuter,
    StableInner,
    StableOuter,
}

impl Branch {
    pub fn is_unstable(self) -> bool {
        matches!(self, Branch::UnstableInner | Branch::UnstableOuter)
    }

    pub fn is_outer(self) -> bool {
        matches!(self, Branch::UnstableOuter | Branch::StableOuter)
    }

    /// Integration direction that globalizes the branch.
    pub fn time_sign(self) -> f64 {
        if self.is_unstable() {
            1.0
        } else {
            -1.0
        }
    }

    /// The branch with the other stability and the same side.
    pub fn partner(self) -> Self {
        match self {
            Branch::UnstableInner => Branch::StableInner,
            Branch::UnstableOuter => Branch::StableOuter,
            Branch::StableInner => Branch::UnstableInner,
            Branch::StableOuter => Branch::UnstableOuter,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Branch::UnstableInner => "unstable-inner",
            Branch::UnstableOuter => "unstable-outer",
            Branch::StableInner => "stable-inner",
            Branch::StableOuter => "stable-outer",
        }
    }
}

impl std::str::FromStr for Branch {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unstable-inner" => Ok(Branch::UnstableInner),
            "unstable-outer" => Ok(Branch::UnstableOuter),
            "stable-inner" => Ok(Branch::StableInner),
            "stable-outer" => Ok(Branch::StableOuter),
            _ => Err(Error::Parse(format!("unknown branch '{s}'"))),
        }
    }
}

/// Invariant object whose manifolds are computed.
#[derive(Debug, Clone, Copy)]
pub enum ManifoldSource<'a> {
    Orbit(&'a PeriodicOrbit),
    Torus(&'a InvariantCurve),
}

/// Normal-form displacement `±ε` along `q1` (unstable) or `p1` (stable),
/// signed so that the outer branches leave away from the centre.
fn displacement(red: &Reduction, branch: Branch, epsilon: f64) -> [f64; NVARS] {
    let m = displacement_matrix(&red.linearization);
    let col = if branch.is_unstable() { 0 } else { 1 };
    let outward = (m[0][col] * red.point.sign()).signum();
    let side = if branch.is_outer() { 1.0 } else { -1.0 };
    let mut d = [0.0; NVARS];
    d[col] = side * outward * epsilon;
    d
}

/// Initial conditions on the branch: `n_phase` normal-form points along the
/// object, displaced by `±ε` in `q1` (unstable) or `p1` (stable).
pub fn manifold_ics(
    red: &Reduction,
    source: ManifoldSource<'_>,
    branch: Branch,
    epsilon: f64,
    n_phase: usize,
) -> Result<Vec<PhaseState>> {
    if !(0.0..=1e-3).contains(&epsilon) {
        return Err(Error::InvalidArgument(format!("epsilon {epsilon:e} outside [0, 1e-3]")));
    }
    let curve = match source {
        ManifoldSource::Orbit(o) => {
            return Ok((0..n_phase).map(|k| manifold_ic_at(red, o, branch, epsilon, k as f64 / n_phase as f64)).collect());
        }
        ManifoldSource::Torus(c) => c,
    };
    let all = curve.torus_samples();
    if all.is_empty() {
        return Err(Error::InvalidArgument("torus has no samples".into()));
    }
    let nf_points: Vec<[f64; NVARS]> = (0..n_phase).map(|k| all[k * all.len() / n_phase]).collect();
    let d = displacement(red, branch, epsilon);
    Ok(nf_points
        .iter()
        .map(|x| {
            let y: [f64; NVARS] = std::array::from_fn(|k| x[k] + d[k]);
            red.nf_to_barycentric(&y)
        })
        .collect())
}

/// Manifold initial condition at continuous phase `s` of a periodic orbit.
pub fn manifold_ic_at(red: &Reduction, orbit: &PeriodicOrbit, branch: Branch, epsilon: f64, s: f64) -> PhaseState {
    let x = red.barycentric_to_nf(&orbit.state_at_phase(s));
    let d = displacement(red, branch, epsilon);
    let y: [f64; NVARS] = std::array::from_fn(|k| x[k] + d[k]);
    red.nf_to_barycentric(&y)
}

/// Termination rules for globalization; the time limit always applies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StopRule {
    Time,
    Radius(f64),
    /// Stop after this many recorded section crossings.
    SectionHits(usize),
}

#[derive(Debug, Clone)]
pub struct GlobalizeOptions {
    pub t_max: f64,
    pub stop: StopRule,
    pub record: Vec<(Surface, Orientation)>,
    pub ode: OdeOptions,
    pub keep_dense: bool,
}

impl GlobalizeOptions {
    /// Time limit 30 and a stop radius of four saddle distances.
    pub fn defaults_for(params: &ModelParams) -> Self {
        let xl = (params.v0 * params.v0 / (params.omega * params.omega) - params.r0_sq()).max(0.0).sqrt();
        Self {
            t_max: 30.0,
            stop: StopRule::Radius(4.0 * xl),
            record: Vec::new(),
            ode: OdeOptions::default(),
            keep_dense: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TubeTrajectory {
    /// Phase parameter of the source point in `[0, 1)`.
    pub phase: f64,
    pub initial: PhaseState,
    pub trajectory: Trajectory,
}

impl TubeTrajectory {
    pub fn failed(&self) -> bool {
        matches!(self.trajectory.status, TrajStatus::Failed(_))
    }
}

#[derive(Debug, Clone)]
pub struct ManifoldTube {
    pub branch: Branch,
    pub energy: f64,
    pub trajectories: Vec<TubeTrajectory>,
}

/// Integrates every initial condition in the branch's time direction.
/// Per-trajectory failures are kept in each trajectory's status.
pub fn globalize_manifold(params: &ModelParams, ics: &[PhaseState], branch: Branch, opts: &GlobalizeOptions) -> Result<ManifoldTube> {
    params.validate()?;
    let run = RunOptions {
        ode: opts.ode,
        keep_dense: opts.keep_dense,
        record: opts.record.clone(),
        stop_radius: match opts.stop {
            StopRule::Radius(r) => Some(r),
            _ => None,
        },
        max_crossings: match opts.stop {
            StopRule::SectionHits(n) => Some(n),
            _ => None,
        },
        min_event_time: 0.0,
    };
    let t_end = branch.time_sign() * opts.t_max;
    let n = ics.len().max(1);
    let trajectories = ics
        .par_iter()
        .enumerate()
        .map(|(k, ic)| {
            let trajectory = integrate_full(params, ic, t_end, &run).unwrap_or_else(|e| Trajectory {
                frame: super::TrajFrame::Barycentric,
                samples: vec![super::Sample {
                    t: 0.0,
                    state: ic.to_array(),
                    energy: params.hamiltonian(ic),
                }],
                segments: Vec::new(),
                crossings: Vec::new(),
                status: TrajStatus::Failed(e.to_string()),
                warnings: Vec::new(),
            });
            TubeTrajectory {
                phase: k as f64 / n as f64,
                initial: *ic,
                trajectory,
            }
        })
        .collect();
    let energy = ics.first().map(|s| params.hamiltonian(s)).unwrap_or(f64::NAN);
    Ok(ManifoldTube {
        branch,
        energy,
        trajectories,
    })
}

#[cfg(test)]
mod tests {
    use super::super::planar_lyapunov;
    use super::*;
    use crate::reduction::{reduce, Elimination};
    use crate::SaddlePoint;

    fn setup() -> (Reduction, PeriodicOrbit) {
        let red = reduce(&ModelParams::model1(), SaddlePoint::L1, 10, Elimination::HyperbolicNormalForm).unwrap();
        let orbit = planar_lyapunov(&red, 130100.178).unwrap();
        (red, orbit)
    }

    #[test]
    fn zero_epsilon_recovers_orbit_points() {
        let (red, orbit) = setup();
        let ics = manifold_ics(&red, ManifoldSource::Orbit(&orbit), Branch::UnstableOuter, 0.0, 12).unwrap();
        for (ic, s) in ics.iter().zip(orbit.phase_points(12)) {
            assert!(ic.distance(&s) < 1e-9);
        }
    }

    #[test]
    fn displaced_energy_close_and_backward_approach() {
        let (red, orbit) = setup();
        let eps = 1e-5;
        let ics = manifold_ics(&red, ManifoldSource::Orbit(&orbit), Branch::UnstableOuter, eps, 8).unwrap();
        let lambda = red.linearization.lambda;
        for ic in &ics {
            let e = red.params.hamiltonian(ic);
            assert!(((e - orbit.energy) / orbit.energy).abs() < 1e-3);
            let back = integrate_full(&red.params, ic, -3.0, &RunOptions::with_tolerance(1e-14)).unwrap();
            let nf = red.barycentric_to_nf(&PhaseState::from_array(back.last().state));
            let dist = nf[0].hypot(nf[1]);
            assert!(dist < eps * (-lambda * 3.0).exp() * 10.0, "{dist:e}");
        }
    }

    #[test]
    fn outer_branch_leaves_outward() {
        let (red, orbit) = setup();
        let xl = 1400f64.sqrt();
        for (branch, outward) in [(Branch::UnstableOuter, true), (Branch::UnstableInner, false)] {
            let ics = manifold_ics(&red, ManifoldSource::Orbit(&orbit), branch, 1e-5, 4).unwrap();
            let mut opts = GlobalizeOptions::defaults_for(&red.params);
            opts.t_max = 6.0;
            let tube = globalize_manifold(&red.params, &ics, branch, &opts).unwrap();
            for tt in &tube.trajectories {
                let r = tt.trajectory.samples.iter().map(|s| s.state[0].hypot(s.state[1]));
                let far = if outward { r.fold(0.0, f64::max) > xl + 3.0 } else { r.fold(f64::MAX, f64::min) < xl - 3.0 };
                assert!(far, "{}", branch.name());
            }
        }
    }
}
