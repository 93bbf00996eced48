//! Lagrangian points of the rotating potential and the linear normal form
//! around the two saddle points.

use crate::error::{Error, Result};
use crate::model::{ModelParams, PhaseState, ViolationReport};
use nalgebra::Matrix4;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LagrangePoint {
    L1,
    L2,
    L3,
    L4,
    L5,
}

/// One of the two hyperbolic equilibria. L1 sits on the positive x-axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SaddlePoint {
    L1,
    L2,
}

impl SaddlePoint {
    pub fn other(self) -> Self {
        match self {
            SaddlePoint::L1 => SaddlePoint::L2,
            SaddlePoint::L2 => SaddlePoint::L1,
        }
    }

    /// `+1` for L1, `−1` for L2.
    pub fn sign(self) -> f64 {
        match self {
            SaddlePoint::L1 => 1.0,
            SaddlePoint::L2 => -1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SaddlePoint::L1 => "L1",
            SaddlePoint::L2 => "L2",
        }
    }
}

impl std::str::FromStr for SaddlePoint {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "L1" => Ok(SaddlePoint::L1),
            "L2" => Ok(SaddlePoint::L2),
            other => Err(Error::Parse(format!("unknown saddle point '{other}'"))),
        }
    }
}

impl From<SaddlePoint> for LagrangePoint {
    fn from(p: SaddlePoint) -> Self {
        match p {
            SaddlePoint::L1 => LagrangePoint::L1,
            SaddlePoint::L2 => LagrangePoint::L2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stability {
    /// saddle × centre × centre
    Hyperbolic,
    /// centre × centre × centre
    Elliptic,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LagrangeSet {
    pub points: Vec<(LagrangePoint, PhaseState, Stability)>,
    /// Set when the pattern speed vanishes and only L3 exists.
    pub no_saddle_points: bool,
}

impl LagrangeSet {
    pub fn get(&self, which: LagrangePoint) -> Option<PhaseState> {
        self.points.iter().find(|(p, ..)| *p == which).map(|(_, s, _)| *s)
    }
}

/// Equilibrium state (with co-rotating momenta) of a saddle point.
pub fn saddle_state(params: &ModelParams, point: SaddlePoint) -> Result<PhaseState> {
    if params.omega == 0.0 {
        return Err(Error::NoSaddlePoints);
    }
    let k = params.v0 * params.v0 / (params.omega * params.omega);
    let x2 = k - params.r0_sq();
    if x2 <= 0.0 {
        return Err(Error::NoSaddlePoints);
    }
    let x = point.sign() * x2.sqrt();
    Ok(PhaseState::new(x, 0.0, 0.0, 0.0, params.omega * x, 0.0))
}

/// Jacobi energy of the saddle points.
pub fn saddle_energy(params: &ModelParams) -> Result<f64> {
    Ok(params.hamiltonian(&saddle_state(params, SaddlePoint::L1)?))
}

pub fn find_lagrange_points(params: &ModelParams) -> Result<LagrangeSet> {
    params.validate()?;
    let origin = PhaseState::default();
    if params.omega == 0.0 {
        return Ok(LagrangeSet {
            points: vec![(LagrangePoint::L3, origin, Stability::Elliptic)],
            no_saddle_points: true,
        });
    }
    let w = params.omega;
    let k = params.v0 * params.v0 / (w * w);
    let l1 = saddle_state(params, SaddlePoint::L1)?;
    let l2 = saddle_state(params, SaddlePoint::L2)?;
    let y4 = (k - params.p_phi * params.p_phi * params.r0_sq()).sqrt();
    let l4 = PhaseState::new(0.0, y4, 0.0, -w * y4, 0.0, 0.0);
    let l5 = l4.rotated_pi();
    Ok(LagrangeSet {
        points: vec![
            (LagrangePoint::L1, l1, Stability::Hyperbolic),
            (LagrangePoint::L2, l2, Stability::Hyperbolic),
            (LagrangePoint::L3, origin, Stability::Elliptic),
            (LagrangePoint::L4, l4, Stability::Elliptic),
            (LagrangePoint::L5, l5, Stability::Elliptic),
        ],
        no_saddle_points: false,
    })
}

/// Linear behaviour around a saddle point and its symplectic normalising basis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Linearization {
    pub point: SaddlePoint,
    /// Homothecy scale: distance from the centre to the saddle (kpc).
    pub gamma: f64,
    /// `R0² + x_L² + y_L²/p²` (kpc²).
    pub k: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub lambda: f64,
    pub omega1: f64,
    pub omega2: f64,
    /// Planar stability matrix in `(x, y, px, py)` order.
    pub matrix_m: [[f64; 4]; 4],
    /// Columns `(v₊λ, u, v₋λ, v)` normalised so that `VᵀJV = J`.
    pub basis_v: [[f64; 4]; 4],
    /// Vertical scaling `(z_scale, pz_scale)`: `z = z_scale·Z`, `pz = pz_scale·P_Z`.
    pub vertical_scale: (f64, f64),
}

/// Roots `(λ², −ω1²)` of `s² + B s + C = 0` for the planar characteristic quartic.
fn quartic_roots(a: f64, b: f64, c: f64, d: f64) -> (f64, f64) {
    let bb = 2.0 * a * a + b * d - b * c;
    let cc = (a * a + b * c) * (a * a - b * d);
    let disc = (bb * bb - 4.0 * cc).max(0.0).sqrt();
    // Cancellation-free pair of roots.
    let q = -0.5 * (bb + bb.signum() * disc);
    let (r1, r2) = if q != 0.0 { (q, cc / q) } else { (0.0, 0.0) };
    (r1.max(r2), r1.min(r2))
}

/// Characteristic polynomial coefficients `(B, C)` of `μ⁴ + Bμ² + C`.
pub fn characteristic_coefficients(lin: &Linearization) -> (f64, f64) {
    let (a, b, c, d) = (lin.a, lin.b, lin.c, lin.d);
    (2.0 * a * a + b * d - b * c, (a * a + b * c) * (a * a - b * d))
}

pub fn linearize(params: &ModelParams, point: SaddlePoint) -> Result<Linearization> {
    let eq = saddle_state(params, point)?;
    let w = params.omega;
    let gamma = (eq.x * eq.x + eq.y * eq.y).sqrt();
    let p2 = params.p_phi * params.p_phi;
    let k = params.r0_sq() + eq.x * eq.x + eq.y * eq.y / p2;
    let v2 = params.v0 * params.v0;
    let a = w;
    let b = 1.0 / (gamma * gamma);
    let c = gamma * gamma / v2 * (v2 / (w * w) - 2.0 * params.r0_sq()) * w.powi(4);
    let d = w * w * gamma * gamma / p2;
    let (lambda_sq, minus_omega_sq) = quartic_roots(a, b, c, d);
    let scale = (2.0 * a * a + b * d - b * c).abs().max(a * a);
    if lambda_sq <= 1e-14 * scale || minus_omega_sq >= 0.0 {
        return Err(Error::DegenerateHyperbolicity { lambda_sq });
    }
    let lambda = lambda_sq.sqrt();
    let omega1 = (-minus_omega_sq).sqrt();
    let omega2 = (v2 / (k * params.q_phi * params.q_phi)).sqrt();
    let matrix_m = [
        [0.0, a, b, 0.0],
        [-a, 0.0, 0.0, b],
        [c, 0.0, 0.0, a],
        [0.0, -d, -a, 0.0],
    ];
    cross_check_eigenvalues(&matrix_m, lambda, omega1)?;
    let basis_v = symplectic_basis(&matrix_m, lambda, omega1)?;
    let zs = 1.0 / (gamma * omega2.sqrt());
    Ok(Linearization {
        point,
        gamma,
        k,
        a,
        b,
        c,
        d,
        lambda,
        omega1,
        omega2,
        matrix_m,
        basis_v,
        vertical_scale: (zs, 1.0 / zs),
    })
}

fn to_na(m: &[[f64; 4]; 4]) -> Matrix4<f64> {
    Matrix4::from_fn(|i, j| m[i][j])
}

/// General eigensolver check of the closed-form rates. The solver's absolute
/// error scales with the matrix norm, which dominates when the rates are small.
fn cross_check_eigenvalues(m: &[[f64; 4]; 4], lambda: f64, omega1: f64) -> Result<()> {
    let floor = 1e-10 * m.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
    let eig = to_na(m)
        .complex_eigenvalues()
        .iter()
        .copied()
        .collect::<Vec<_>>();
    let real = eig
        .iter()
        .filter(|z| z.im.abs() < 1e-6 * z.norm().max(1e-300))
        .map(|z| z.re.abs())
        .fold(0.0, f64::max);
    let imag = eig
        .iter()
        .filter(|z| z.re.abs() < 1e-6 * z.norm().max(1e-300))
        .map(|z| z.im.abs())
        .fold(0.0, f64::max);
    if (real - lambda).abs() > 1e-9 * lambda + floor {
        return Err(Error::EigenMismatch {
            closed: lambda,
            numeric: real,
        });
    }
    if (imag - omega1).abs() > 1e-9 * omega1 + floor {
        return Err(Error::EigenMismatch {
            closed: omega1,
            numeric: imag,
        });
    }
    Ok(())
}

fn det3(m: [[Complex64; 3]; 3]) -> Complex64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Null vector of `M − μI` from the cofactors of the best-conditioned row deletion.
fn null_vector(m: &[[f64; 4]; 4], mu: Complex64) -> [Complex64; 4] {
    let mut bmat = [[Complex64::new(0.0, 0.0); 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            bmat[i][j] = Complex64::new(m[i][j], 0.0) - if i == j { mu } else { Complex64::new(0.0, 0.0) };
        }
    }
    let mut best = [Complex64::new(0.0, 0.0); 4];
    let mut best_norm = -1.0;
    for skip_row in 0..4 {
        let rows: Vec<usize> = (0..4).filter(|&r| r != skip_row).collect();
        let mut v = [Complex64::new(0.0, 0.0); 4];
        for (j, vj) in v.iter_mut().enumerate() {
            let cols: Vec<usize> = (0..4).filter(|&c| c != j).collect();
            let mut sub = [[Complex64::new(0.0, 0.0); 3]; 3];
            for (r, &ri) in rows.iter().enumerate() {
                for (c, &ci) in cols.iter().enumerate() {
                    sub[r][c] = bmat[ri][ci];
                }
            }
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            *vj = det3(sub) * sign;
        }
        let n: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if n > best_norm {
            best_norm = n;
            best = v;
        }
    }
    best
}

/// `xᵀ J y` with `J = [[0, I], [−I, 0]]` in `(x, y, px, py)` order.
fn j_form(x: &[f64; 4], y: &[f64; 4]) -> f64 {
    x[0] * y[2] + x[1] * y[3] - x[2] * y[0] - x[3] * y[1]
}

fn symplectic_basis(m: &[[f64; 4]; 4], lambda: f64, omega1: f64) -> Result<[[f64; 4]; 4]> {
    let re = |v: [Complex64; 4]| -> [f64; 4] { [v[0].re, v[1].re, v[2].re, v[3].re] };
    let mut vp = re(null_vector(m, Complex64::new(lambda, 0.0)));
    if vp[0] < 0.0 {
        vp.iter_mut().for_each(|x| *x = -*x);
    }
    let mut vm = re(null_vector(m, Complex64::new(-lambda, 0.0)));
    let mut d_lambda = j_form(&vp, &vm);
    if d_lambda < 0.0 {
        vm.iter_mut().for_each(|x| *x = -*x);
        d_lambda = -d_lambda;
    }
    if !(d_lambda > 0.0) {
        return Err(Error::SignNormalization(format!("d_lambda = {d_lambda:e}")));
    }

    let w = null_vector(m, Complex64::new(0.0, omega1));
    // Rotate the phase so the first component is purely imaginary and positive.
    let phase = if w[0].norm() > 0.0 {
        Complex64::new(0.0, w[0].norm()) / w[0]
    } else {
        Complex64::new(1.0, 0.0)
    };
    let w: Vec<Complex64> = w.iter().map(|z| z * phase).collect();
    let u = [w[0].re, w[1].re, w[2].re, w[3].re];
    let v = [w[0].im, w[1].im, w[2].im, w[3].im];
    let d_omega = j_form(&u, &v);
    if !(d_omega > 0.0) {
        return Err(Error::SignNormalization(format!("d_omega1 = {d_omega:e}")));
    }
    let (sl, so) = (d_lambda.sqrt(), d_omega.sqrt());
    let cols = [
        vp.map(|x| x / sl),
        u.map(|x| x / so),
        vm.map(|x| x / sl),
        v.map(|x| x / so),
    ];
    let mut basis = [[0.0; 4]; 4];
    for (j, col) in cols.iter().enumerate() {
        for i in 0..4 {
            basis[i][j] = col[i];
        }
    }
    Ok(basis)
}

/// Linear change from real normal-form coordinates to the translated and
/// scaled coordinates around the saddle, in the interleaved variable order
/// `(x, px, y, py, z, pz)` used by polynomial series.
pub fn normal_form_matrix(lin: &Linearization) -> [[f64; 6]; 6] {
    // Position of (x, y, px, py) inside the interleaved ordering.
    const SLOT: [usize; 4] = [0, 2, 1, 3];
    let mut out = [[0.0; 6]; 6];
    for i in 0..4 {
        for j in 0..4 {
            out[SLOT[i]][SLOT[j]] = lin.basis_v[i][j];
        }
    }
    out[4][4] = lin.vertical_scale.0;
    out[5][5] = lin.vertical_scale.1;
    out
}

/// Which parameter an eigenvalue sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParam {
    Omega,
    PPhi,
    QPhi,
}

impl SweepParam {
    pub fn apply(self, params: &ModelParams, value: f64) -> ModelParams {
        match self {
            SweepParam::Omega => params.with_omega(value),
            SweepParam::PPhi => params.with_p_phi(value),
            SweepParam::QPhi => params.with_q_phi(value),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Omega => "omega",
            SweepParam::PPhi => "p_phi",
            SweepParam::QPhi => "q_phi",
        }
    }
}

impl std::str::FromStr for SweepParam {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "omega" | "Omega" => Ok(SweepParam::Omega),
            "p_phi" | "p" => Ok(SweepParam::PPhi),
            "q_phi" | "q" => Ok(SweepParam::QPhi),
            other => Err(Error::Parse(format!("unknown sweep parameter '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RowFlag {
    Ok,
    /// The saddle lost its hyperbolic direction.
    Degenerate,
    /// The instantiated parameters fail validation; rates are still reported.
    Invalid(ViolationReport),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub lambda: f64,
    pub omega1: f64,
    pub omega2: f64,
    pub flag: RowFlag,
}

/// Linear rates at L1 along a one-parameter family, in sweep order.
pub fn eigen_sweep(template: &ModelParams, vary: SweepParam, values: &[f64]) -> Vec<SweepRow> {
    values
        .iter()
        .map(|&value| {
            let p = vary.apply(template, value);
            let flag = match p.validate() {
                Ok(()) => RowFlag::Ok,
                Err(r) => RowFlag::Invalid(r),
            };
            match linearize(&p, SaddlePoint::L1) {
                Ok(lin) => SweepRow {
                    value,
                    lambda: lin.lambda,
                    omega1: lin.omega1,
                    omega2: lin.omega2,
                    flag,
                },
                Err(_) => {
                    let (omega1, omega2) = degenerate_rates(&p);
                    SweepRow {
                        value,
                        lambda: 0.0,
                        omega1,
                        omega2,
                        flag: if flag == RowFlag::Ok { RowFlag::Degenerate } else { flag },
                    }
                }
            }
        })
        .collect()
}

fn degenerate_rates(p: &ModelParams) -> (f64, f64) {
    let Ok(eq) = saddle_state(p, SaddlePoint::L1) else {
        return (f64::NAN, f64::NAN);
    };
    let w = p.omega;
    let g2 = eq.x * eq.x;
    let v2 = p.v0 * p.v0;
    let a = w;
    let b = 1.0 / g2;
    let c = g2 / v2 * (v2 / (w * w) - 2.0 * p.r0_sq()) * w.powi(4);
    let d = w * w * g2 / (p.p_phi * p.p_phi);
    let (_, s2) = quartic_roots(a, b, c, d);
    let k = p.r0_sq() + g2;
    ((-s2).max(0.0).sqrt(), (v2 / (k * p.q_phi * p.q_phi)).sqrt())
}

/// Evenly spaced values from `start` to `end` inclusive.
pub fn linspace(start: f64, end: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => vec![start],
        n => (0..n)
            .map(|i| start + (end - start) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}
