//! Reduction to the centre manifold of a saddle point: Taylor expansion of the
//! Hamiltonian, partial normal form removing every monomial with `i1 + j1 = 1`,
//! and polynomial coordinate maps between normal-form and barycentric frames.

use crate::equilibria::{linearize, normal_form_matrix, saddle_state, Linearization, SaddlePoint};
use crate::error::{Error, Result};
use crate::model::{ModelParams, PhaseState};
use crate::poly::{
    lie_transform, solve_homological, Divisors, Frame, HomoPoly, Monomial, PolyBundle, PolySeries, NVARS,
};
use nalgebra::Matrix6;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub const DEFAULT_ORDER: usize = 15;
pub const MAX_ORDER: usize = 20;

type CMat = [[Complex64; NVARS]; NVARS];

fn cplx(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn to_complex(m: &[[f64; NVARS]; NVARS]) -> CMat {
    std::array::from_fn(|i| std::array::from_fn(|j| cplx(m[i][j])))
}

fn cmat_mul(a: &CMat, b: &CMat) -> CMat {
    std::array::from_fn(|i| std::array::from_fn(|j| (0..NVARS).map(|k| a[i][k] * b[k][j]).sum()))
}

fn identity() -> CMat {
    std::array::from_fn(|i| std::array::from_fn(|j| cplx(if i == j { 1.0 } else { 0.0 })))
}

/// Complex variables in terms of real ones: `q = (x − i·p)/√2`, `p = (p − i·x)/√2`
/// on the two elliptic pairs.
pub fn realification_matrix() -> CMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut m = identity();
    for k in [2, 4] {
        m[k][k] = cplx(s);
        m[k][k + 1] = Complex64::new(0.0, -s);
        m[k + 1][k] = Complex64::new(0.0, -s);
        m[k + 1][k + 1] = cplx(s);
    }
    m
}

/// Real variables in terms of complex ones: `x = (q + i·p)/√2`, `p = (i·q + p)/√2`.
pub fn complexification_matrix() -> CMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut m = identity();
    for k in [2, 4] {
        m[k][k] = cplx(s);
        m[k][k + 1] = Complex64::new(0.0, s);
        m[k + 1][k] = Complex64::new(0.0, s);
        m[k + 1][k + 1] = cplx(s);
    }
    m
}

/// Taylor expansion to order `order` of the Hamiltonian around L1 after
/// translation and homothecy, composed with the linear change `lin_map`
/// (scaled interleaved coordinates `(x, px, y, py, z, pz)` as functions of the
/// new variables). The constant term is the saddle energy.
fn expand_with(params: &ModelParams, lin: &Linearization, order: usize, lin_map: &CMat, frame: Frame) -> Result<PolySeries> {
    let g = lin.gamma;
    let w = params.omega;
    let xl = g;
    let (p2, q2) = (params.p_phi * params.p_phi, params.q_phi * params.q_phi);
    let k_const = params.r0_sq() + xl * xl;

    let form = |row: usize| -> PolySeries {
        let h = HomoPoly::from_terms(1, (0..NVARS).map(|j| (Monomial::var(j), lin_map[row][j])));
        PolySeries::from_homo(frame, order, h)
    };
    let (sx, spx, sy, spy, sz, spz) = (form(0), form(1), form(2), form(3), form(4), form(5));
    let c = |v: f64| PolySeries::constant(frame, order, cplx(v));
    let sc = |s: &PolySeries, v: f64| s.scale(cplx(v));

    // ½|p|² with px = spx/γ, py = Ωx_L + spy/γ, pz = spz/γ.
    let kinetic = spx
        .mul(&spx)?
        .add(&spy.mul(&spy)?)?
        .add(&spz.mul(&spz)?)?
        .scale(cplx(0.5 / (g * g)))
        .add(&sc(&spy, w * xl / g))?
        .add(&c(0.5 * w * w * xl * xl))?;
    // −Ω(x·py − y·px) with x = x_L + γ sx, y = γ sy.
    let coriolis = c(w * xl * xl)
        .add(&sc(&spy, xl / g))?
        .add(&sc(&sx, g * w * xl))?
        .add(&sx.mul(&spy)?)?
        .sub(&sy.mul(&spx)?)?
        .scale(cplx(-w));
    // u = (R0² + x² + y²/p² + z²/q² − K)/K.
    let quad = sx
        .mul(&sx)?
        .add(&sy.mul(&sy)?.scale(cplx(1.0 / p2)))?
        .add(&sz.mul(&sz)?.scale(cplx(1.0 / q2)))?
        .scale(cplx(g * g));
    let u = sc(&sx, 2.0 * xl * g).add(&quad)?.scale(cplx(1.0 / k_const));
    let mut log1p = PolySeries::zero(frame, order);
    let mut um = u.clone();
    for m in 1..=order {
        let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
        log1p = log1p.add(&um.scale(cplx(sign / m as f64)))?;
        if m < order {
            um = um.mul(&u)?;
        }
    }
    let v2 = params.v0 * params.v0;
    let potential = log1p.scale(cplx(0.5 * v2)).add(&c(0.5 * v2 * k_const.ln()))?;
    kinetic.add(&coriolis)?.add(&potential)
}

/// Taylor series of the Hamiltonian in translated and scaled coordinates
/// `(x, px, y, py, z, pz)` around a saddle point, up to degree `order`.
pub fn expand_log_hamiltonian(params: &ModelParams, point: SaddlePoint, order: usize) -> Result<PolySeries> {
    if order < 2 {
        return Err(Error::InvalidArgument(format!("expansion order {order} must be at least 2")));
    }
    let lin = linearize(params, point)?;
    expand_with(params, &lin, order, &identity(), Frame::Real)
}

/// Whether a monomial is removed by the partial normal form.
pub fn is_mixing(m: Monomial) -> bool {
    m.hyperbolic_weight() == 1
}

/// Polynomial change of coordinates between the real normal-form frame and
/// the barycentric frame.
#[derive(Debug, Clone)]
pub struct CoordMap {
    pub direction: MapDirection,
    pub order: usize,
    /// Applied before the polynomials: `ξ = matrix·(b − offset)`.
    pub input: Option<Affine>,
    /// Six output components, in `(x, y, z, px, py, pz)` order for the forward
    /// map and `(q1, p1, q2, p2, q3, p3)` order for the inverse map.
    pub components: Vec<PolySeries>,
    compiled: PolyBundle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MapDirection {
    NfToBarycentric,
    BarycentricToNf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub offset: [f64; NVARS],
    pub matrix: [[f64; NVARS]; NVARS],
}

impl Affine {
    pub fn apply(&self, b: &[f64; NVARS]) -> [f64; NVARS] {
        let d: [f64; NVARS] = std::array::from_fn(|k| b[k] - self.offset[k]);
        std::array::from_fn(|i| (0..NVARS).map(|j| self.matrix[i][j] * d[j]).sum())
    }
}

impl CoordMap {
    pub fn new(direction: MapDirection, order: usize, input: Option<Affine>, components: Vec<PolySeries>) -> Self {
        let compiled = PolyBundle::new(&components.iter().collect::<Vec<_>>());
        Self {
            direction,
            order,
            input,
            components,
            compiled,
        }
    }

    pub fn apply(&self, x: &[f64; NVARS]) -> [f64; NVARS] {
        let arg = match &self.input {
            Some(a) => a.apply(x),
            None => *x,
        };
        let v = self.compiled.eval(&arg);
        std::array::from_fn(|k| v[k])
    }

    /// Components restricted to `zero_vars = 0`, compiled for repeated use.
    pub fn restricted_bundle(&self, zero_vars: [bool; NVARS], keep: &[usize]) -> PolyBundle {
        let comps: Vec<PolySeries> = keep.iter().map(|&k| self.components[k].restrict(zero_vars)).collect();
        PolyBundle::new(&comps.iter().collect::<Vec<_>>())
    }
}

/// Centre-manifold reduction around one saddle point.
#[derive(Debug, Clone)]
pub struct Reduction {
    pub params: ModelParams,
    pub point: SaddlePoint,
    pub order: usize,
    pub elimination: Elimination,
    /// Saddle energy, the constant term of the expansion.
    pub h0: f64,
    pub linearization: Linearization,
    /// Reduced Hamiltonian (real frame, degrees 2..N, constant removed).
    pub reduced_h: PolySeries,
    /// `reduced_h` with `q1 = p1 = 0`.
    pub center_h: PolySeries,
    /// Generators `G3..GN` in the complex frame.
    pub generators: Vec<HomoPoly>,
    /// Normal-form state to barycentric state.
    pub forward: CoordMap,
    /// Barycentric state to normal-form state.
    pub inverse: CoordMap,
    /// Smallest homological divisor modulus per degree.
    pub divisor_floor: Vec<(usize, f64)>,
    /// Largest deviation of the computed quadratic part from its diagonal form.
    pub quadratic_residual: f64,
    /// Largest degree-1 coefficient of the expansion before it was discarded.
    pub linear_residual: f64,
    field: PolyBundle,
    displacement: PolyBundle,
}

/// Linear map from real normal-form coordinates to barycentric displacements
/// in `(x, y, z, px, py, pz)` order.
pub fn displacement_matrix(lin: &Linearization) -> [[f64; NVARS]; NVARS] {
    let a = normal_form_matrix(lin);
    let g = lin.gamma;
    // (row in barycentric order, row in interleaved order, scale)
    let rows = [(0, 0, g), (1, 2, g), (2, 4, g), (3, 1, 1.0 / g), (4, 3, 1.0 / g), (5, 5, 1.0 / g)];
    let mut out = [[0.0; NVARS]; NVARS];
    for (rb, ri, s) in rows {
        let flip = if lin.point == SaddlePoint::L2 && matches!(rb, 0 | 1 | 3 | 4) { -1.0 } else { 1.0 };
        for j in 0..NVARS {
            out[rb][j] = flip * s * a[ri][j];
        }
    }
    out
}

/// Monomials cancelled by the normalizing transformation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Elimination {
    /// Only monomials with `i1 + j1 = 1`: the least work that makes
    /// `q1 = p1 = 0` invariant.
    #[default]
    CentreManifold,
    /// Every monomial with `i1 ≠ j1`; additionally makes `p1 = 0` and
    /// `q1 = 0` invariant, so they carry the unstable and stable manifolds.
    HyperbolicNormalForm,
}

impl Elimination {
    pub fn targets(self, m: Monomial) -> bool {
        match self {
            Elimination::CentreManifold => is_mixing(m),
            Elimination::HyperbolicNormalForm => m.exp(0) != m.exp(1),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Elimination::CentreManifold => "centre-manifold",
            Elimination::HyperbolicNormalForm => "hyperbolic-normal-form",
        }
    }
}

impl std::str::FromStr for Elimination {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "centre-manifold" | "center-manifold" => Ok(Elimination::CentreManifold),
            "hyperbolic-normal-form" => Ok(Elimination::HyperbolicNormalForm),
            _ => Err(Error::Parse(format!("unknown elimination set '{s}'"))),
        }
    }
}

/// Centre-manifold reduction cancelling the `i1 + j1 = 1` monomials.
pub fn reduce_to_center_manifold(params: &ModelParams, point: SaddlePoint, order: usize) -> Result<Reduction> {
    reduce(params, point, order, Elimination::CentreManifold)
}

pub fn reduce(params: &ModelParams, point: SaddlePoint, order: usize, elimination: Elimination) -> Result<Reduction> {
    params.validate()?;
    if !(3..=MAX_ORDER).contains(&order) {
        return Err(Error::InvalidArgument(format!("order {order} outside 3..={MAX_ORDER}")));
    }
    // Both saddles share the same expansion: L2 is the 180° image of L1.
    let lin = linearize(params, point)?;
    let lin1 = linearize(params, SaddlePoint::L1)?;
    let div = Divisors {
        lambda: lin.lambda,
        omega1: lin.omega1,
        omega2: lin.omega2,
    };
    let a_real = to_complex(&normal_form_matrix(&lin1));
    let to_complex_nf = cmat_mul(&a_real, &complexification_matrix());
    let mut h = expand_with(params, &lin1, order, &to_complex_nf, Frame::Complex)?;

    let h0 = h.h0();
    let linear_residual = h.part(1).norm();
    h.set_part(HomoPoly::zero(1));
    h.set_part(HomoPoly::zero(0));
    let mut diff = h.part(2).clone();
    diff.add_scaled(&div.h2(), cplx(-1.0));
    let quadratic_residual = diff.norm();
    if quadratic_residual > 1e-8 * (div.lambda + div.omega1 + div.omega2) {
        return Err(Error::SignNormalization(format!(
            "quadratic part is not diagonal (deviation {quadratic_residual:e})"
        )));
    }
    h.set_part(div.h2());

    let mut generators = Vec::with_capacity(order.saturating_sub(2));
    let mut divisor_floor = Vec::new();
    for n in 3..=order {
        let hn = h.part(n).clone();
        let floor = hn
            .iter()
            .filter(|(m, _)| elimination.targets(*m))
            .map(|(m, _)| div.divisor(m).norm())
            .fold(f64::INFINITY, f64::min);
        divisor_floor.push((n, floor));
        let g = solve_homological(&div, &hn, |m| elimination.targets(m))?;
        if !g.is_empty() {
            h = lie_transform(&h, &g)?;
        }
        h.part_mut(n).retain(|m, _| !elimination.targets(m));
        generators.push(g);
    }

    let realify = realification_matrix();
    let reduced_c = h.substitute_linear(&realify, Frame::Real);
    let reduced_h = reduced_c.real_part();
    let center_h = reduced_h.restrict([true, true, false, false, false, false]);

    let real_gens: Vec<HomoPoly> = generators
        .iter()
        .map(|g| {
            let s = PolySeries::from_homo(Frame::Complex, order, g.clone()).substitute_linear(&realify, Frame::Real);
            s.real_part().part(g.degree()).clone()
        })
        .collect();

    let eq = saddle_state(params, point)?.to_array();
    let m = displacement_matrix(&lin);
    let forward = build_forward(order, &real_gens, &eq, &m)?;
    let inverse = build_inverse(order, &real_gens, &eq, &m)?;
    Ok(Reduction::from_parts(ReductionParts {
        params: *params,
        point,
        order,
        elimination,
        h0,
        linearization: lin,
        reduced_h,
        center_h,
        generators,
        forward,
        inverse,
        divisor_floor,
        quadratic_residual,
        linear_residual,
    }))
}

/// Stored fields of a [`Reduction`]; the compiled evaluators are rebuilt.
pub struct ReductionParts {
    pub params: ModelParams,
    pub point: SaddlePoint,
    pub order: usize,
    pub elimination: Elimination,
    pub h0: f64,
    pub linearization: Linearization,
    pub reduced_h: PolySeries,
    pub center_h: PolySeries,
    pub generators: Vec<HomoPoly>,
    pub forward: CoordMap,
    pub inverse: CoordMap,
    pub divisor_floor: Vec<(usize, f64)>,
    pub quadratic_residual: f64,
    pub linear_residual: f64,
}

fn displacement_bundle(forward: &CoordMap) -> PolyBundle {
    let comps: Vec<PolySeries> = forward
        .components
        .iter()
        .map(|c| {
            let mut s = c.clone();
            s.set_part(HomoPoly::zero(0));
            s
        })
        .collect();
    PolyBundle::new(&comps.iter().collect::<Vec<_>>())
}

fn identity_components(order: usize) -> Vec<PolySeries> {
    (0..NVARS).map(|k| PolySeries::coordinate(Frame::Real, order, k)).collect()
}

fn build_forward(order: usize, gens: &[HomoPoly], eq: &[f64; NVARS], m: &[[f64; NVARS]; NVARS]) -> Result<CoordMap> {
    let mut xi = identity_components(order);
    for g in gens.iter().filter(|g| !g.is_empty()) {
        xi = xi.iter().map(|c| lie_transform(c, g)).collect::<Result<_>>()?;
    }
    let comps = (0..NVARS)
        .map(|r| {
            let mut s = PolySeries::constant(Frame::Real, order, cplx(eq[r]));
            for (j, x) in xi.iter().enumerate() {
                if m[r][j] != 0.0 {
                    s = s.add(&x.scale(cplx(m[r][j])))?;
                }
            }
            Ok(s)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CoordMap::new(MapDirection::NfToBarycentric, order, None, comps))
}

fn build_inverse(order: usize, gens: &[HomoPoly], eq: &[f64; NVARS], m: &[[f64; NVARS]; NVARS]) -> Result<CoordMap> {
    let mut y = identity_components(order);
    for g in gens.iter().rev().filter(|g| !g.is_empty()) {
        let neg = g.neg();
        y = y.iter().map(|c| lie_transform(c, &neg)).collect::<Result<_>>()?;
    }
    let inv = Matrix6::from_fn(|i, j| m[i][j])
        .try_inverse()
        .ok_or_else(|| Error::SignNormalization("singular normal-form basis".into()))?;
    let input = Affine {
        offset: *eq,
        matrix: std::array::from_fn(|i| std::array::from_fn(|j| inv[(i, j)])),
    };
    Ok(CoordMap::new(MapDirection::BarycentricToNf, order, Some(input), y))
}

impl Reduction {
    pub fn from_parts(p: ReductionParts) -> Self {
        let field = PolyBundle::field(&p.reduced_h);
        let displacement = displacement_bundle(&p.forward);
        Reduction {
            params: p.params,
            point: p.point,
            order: p.order,
            elimination: p.elimination,
            h0: p.h0,
            linearization: p.linearization,
            reduced_h: p.reduced_h,
            center_h: p.center_h,
            generators: p.generators,
            forward: p.forward,
            inverse: p.inverse,
            divisor_floor: p.divisor_floor,
            quadratic_residual: p.quadratic_residual,
            linear_residual: p.linear_residual,
            field,
            displacement,
        }
    }

    pub fn equilibrium(&self) -> PhaseState {
        PhaseState::from_array(std::array::from_fn(|k| self.forward.components[k].h0()))
    }

    pub fn nf_to_barycentric(&self, nf: &[f64; NVARS]) -> PhaseState {
        PhaseState::from_array(self.forward.apply(nf))
    }

    /// Barycentric displacement from the saddle, without adding the saddle state.
    pub fn nf_to_displacement(&self, nf: &[f64; NVARS]) -> PhaseState {
        let v = self.displacement.eval(nf);
        PhaseState::from_array(std::array::from_fn(|k| v[k]))
    }

    pub fn barycentric_to_nf(&self, state: &PhaseState) -> [f64; NVARS] {
        self.inverse.apply(&state.to_array())
    }

    /// Reduced Hamiltonian value (energy above the saddle).
    pub fn energy(&self, nf: &[f64; NVARS]) -> f64 {
        self.reduced_h.evaluate(nf)
    }

    pub fn field(&self, nf: &[f64; NVARS], scratch: &mut Vec<f64>, out: &mut [f64; NVARS]) {
        self.field.eval_into(nf, scratch, out);
    }

    pub fn field_bundle(&self) -> &PolyBundle {
        &self.field
    }

    pub fn center_restriction(&self) -> &PolySeries {
        &self.center_h
    }

    /// Count of eliminated-type monomials left in degrees 3..N.
    pub fn mixing_monomials(&self) -> usize {
        (3..=self.order)
            .map(|d| self.reduced_h.part(d).iter().filter(|(m, _)| is_mixing(*m)).count())
            .sum()
    }

    /// Inverse map composed with the forward map as a polynomial map in the
    /// real normal-form frame; the identity up to the truncation order.
    pub fn composition_check(&self) -> Result<f64> {
        let realify = realification_matrix();
        let gens: Vec<HomoPoly> = self
            .generators
            .iter()
            .map(|g| {
                PolySeries::from_homo(Frame::Complex, self.order, g.clone())
                    .substitute_linear(&realify, Frame::Real)
                    .real_part()
                    .part(g.degree())
                    .clone()
            })
            .collect();
        let mut comps = self.inverse.components.clone();
        for g in gens.iter().filter(|g| !g.is_empty()) {
            comps = comps.iter().map(|c| lie_transform(c, g)).collect::<Result<_>>()?;
        }
        let mut worst: f64 = 0.0;
        for (k, c) in comps.iter().enumerate() {
            let id = PolySeries::coordinate(Frame::Real, self.order, k);
            worst = worst.max(c.sub(&id)?.norm());
        }
        Ok(worst)
    }

    /// `H(nf_to_barycentric(s)) − h0 − reduced_h(s)`, computed without
    /// subtracting two full energies.
    pub fn hamiltonian_residual(&self, nf: &[f64; NVARS]) -> f64 {
        let base = self.equilibrium();
        let delta = self.nf_to_displacement(nf);
        self.params.hamiltonian_offset(&base, &delta) - self.energy(nf)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model1() -> ModelParams {
        ModelParams::model1()
    }

    #[test]
    fn realification_inverts_complexification() {
        let p = cmat_mul(&realification_matrix(), &complexification_matrix());
        for i in 0..NVARS {
            for j in 0..NVARS {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((p[i][j] - cplx(e)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn expansion_constant_and_linear_terms() {
        let h = expand_log_hamiltonian(&model1(), SaddlePoint::L1, 6).unwrap();
        assert!((h.h0() - 130055.178).abs() < 1e-3);
        // The linear terms cancel between the potential and the Coriolis term,
        // each of size Ω²·γ·x_L = 35000; what is left is rounding.
        let scale = 25.0 * 1400.0;
        assert!(h.part(1).norm() < 1e-15 * scale, "{}", h.part(1).norm());
    }

    #[test]
    fn expansion_matches_exact_hamiltonian() {
        // Taylor remainder test in scaled coordinates: the order-N residual
        // shrinks by ~2^(N+1) when the displacement halves.
        let m = model1();
        let order = 6;
        let h = expand_log_hamiltonian(&m, SaddlePoint::L1, order).unwrap();
        let lin = linearize(&m, SaddlePoint::L1).unwrap();
        let base = saddle_state(&m, SaddlePoint::L1).unwrap();
        let g = lin.gamma;
        let dir = [0.31, -0.52, 0.44, 0.27, -0.36, 0.49];
        let residual = |amp: f64| {
            let s: [f64; NVARS] = std::array::from_fn(|k| amp * dir[k]);
            let delta = PhaseState::new(g * s[0], g * s[2], g * s[4], s[1] / g, s[3] / g, s[5] / g);
            let mut hs = h.clone();
            hs.set_part(HomoPoly::zero(0));
            (m.hamiltonian_offset(&base, &delta) - hs.evaluate(&s)).abs()
        };
        let (r1, r2) = (residual(0.05), residual(0.025));
        assert!(r1 / r2 > 2f64.powi(order as i32 - 1), "{r1:e} {r2:e}");
    }

    #[test]
    fn complexified_quadratic_part_is_diagonal() {
        let r = reduce_to_center_manifold(&model1(), SaddlePoint::L1, 4).unwrap();
        assert!(r.quadratic_residual < 1e-12, "{:e}", r.quadratic_residual);
        assert!(r.linear_residual < 1e-15 * 25.0 * 1400.0, "{:e}", r.linear_residual);
        let lin = &r.linearization;
        let h2 = r.reduced_h.part(2);
        assert!((h2.get(Monomial::new([1, 1, 0, 0, 0, 0])).re - lin.lambda).abs() < 1e-12);
        assert!((h2.get(Monomial::new([0, 0, 2, 0, 0, 0])).re - 0.5 * lin.omega1).abs() < 1e-12);
        assert!((h2.get(Monomial::new([0, 0, 0, 2, 0, 0])).re - 0.5 * lin.omega1).abs() < 1e-12);
        assert!((h2.get(Monomial::new([0, 0, 0, 0, 2, 0])).re - 0.5 * lin.omega2).abs() < 1e-12);
        assert!((h2.get(Monomial::new([0, 0, 0, 0, 0, 2])).re - 0.5 * lin.omega2).abs() < 1e-12);
        assert_eq!(h2.len(), 5);
    }

    #[test]
    fn low_order_reduction_properties() {
        let r = reduce_to_center_manifold(&model1(), SaddlePoint::L1, 8).unwrap();
        assert_eq!(r.mixing_monomials(), 0);
        assert!(r.reduced_h.max_imag() == 0.0);
        assert!((r.h0 - 130055.178).abs() < 1e-3);
        assert!(r.composition_check().unwrap() < 1e-10);
        for (_, floor) in &r.divisor_floor {
            assert!(*floor >= r.linearization.lambda * (1.0 - 1e-12));
        }
        let origin = r.nf_to_barycentric(&[0.0; NVARS]);
        let l1 = saddle_state(&model1(), SaddlePoint::L1).unwrap();
        assert!(origin.distance(&l1) < 1e-12);
        let c = r.center_restriction();
        assert!(c.iter().all(|(m, _)| m.hyperbolic_weight() == 0));
    }

    #[test]
    fn maps_round_trip() {
        let r = reduce_to_center_manifold(&model1(), SaddlePoint::L1, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let y: [f64; NVARS] = std::array::from_fn(|_| rng.random_range(-1.0..1.0) * 1e-2);
            let back = r.barycentric_to_nf(&r.nf_to_barycentric(&y));
            for k in 0..NVARS {
                assert!((back[k] - y[k]).abs() < 1e-12, "{k}: {} vs {}", back[k], y[k]);
            }
        }
    }

    #[test]
    fn l2_is_rotated_l1() {
        let r1 = reduce_to_center_manifold(&model1(), SaddlePoint::L1, 6).unwrap();
        let r2 = reduce_to_center_manifold(&model1(), SaddlePoint::L2, 6).unwrap();
        assert!(r1.reduced_h.sub(&r2.reduced_h).unwrap().norm() < 1e-12);
        let y = [1e-2, -2e-2, 3e-2, 1e-2, -1e-2, 2e-2];
        let a = r1.nf_to_barycentric(&y).rotated_pi();
        let b = r2.nf_to_barycentric(&y);
        assert!(a.distance(&b) < 1e-12);
    }

    #[test]
    fn rejects_degenerate_and_bad_order() {
        let axi = model1().with_p_phi(1.0).with_q_phi(1.0);
        assert!(matches!(
            reduce_to_center_manifold(&axi, SaddlePoint::L1, 5),
            Err(Error::DegenerateHyperbolicity { .. })
        ));
        assert!(matches!(
            reduce_to_center_manifold(&model1(), SaddlePoint::L1, 2),
            Err(Error::InvalidArgument(_))
        ));
    }
}
