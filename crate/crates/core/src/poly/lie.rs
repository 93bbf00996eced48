use super::{HomoPoly, Monomial, PolySeries};
use crate::error::{Error, Result};
use num_complex::Complex64;
use rayon::prelude::*;

/// Diagonal action of `H2 = λ q1 p1 + iω1 q2 p2 + iω2 q3 p3` on monomials.
#[derive(Debug, Clone, Copy)]
pub struct Divisors {
    pub lambda: f64,
    pub omega1: f64,
    pub omega2: f64,
}

impl Divisors {
    /// `{H2, m} = divisor(m)·m`.
    pub fn divisor(&self, m: Monomial) -> Complex64 {
        let d = |k: usize| m.exp(2 * k + 1) as f64 - m.exp(2 * k) as f64;
        Complex64::new(self.lambda * d(0), self.omega1 * d(1) + self.omega2 * d(2))
    }

    /// The complex diagonal quadratic Hamiltonian.
    pub fn h2(&self) -> HomoPoly {
        HomoPoly::from_terms(
            2,
            [
                (Monomial::new([1, 1, 0, 0, 0, 0]), Complex64::new(self.lambda, 0.0)),
                (Monomial::new([0, 0, 1, 1, 0, 0]), Complex64::new(0.0, self.omega1)),
                (Monomial::new([0, 0, 0, 0, 1, 1]), Complex64::new(0.0, self.omega2)),
            ],
        )
    }
}

/// Solves `{H2, G} = −(targeted part of hn)` for `G`.
pub fn solve_homological(
    div: &Divisors,
    hn: &HomoPoly,
    target: impl Fn(Monomial) -> bool,
) -> Result<HomoPoly> {
    let mut g = HomoPoly::zero(hn.degree());
    for (m, c) in hn.sorted_terms() {
        if !target(m) {
            continue;
        }
        let d = div.divisor(m);
        if d.norm() == 0.0 {
            return Err(Error::ZeroDivisor(m.exps()));
        }
        g.add_term(m, -c / d);
    }
    Ok(g)
}

/// `Σ_k (1/k!) ad_G^k H` with `ad_G H = {H, G}`, truncated at `H.order()`.
///
/// The result is `H ∘ φ` where `φ` is the time-one flow of `G`.
pub fn lie_transform(h: &PolySeries, g: &HomoPoly) -> Result<PolySeries> {
    let gd = g.degree();
    if gd < 3 {
        return Err(Error::InvalidArgument(format!(
            "generator degree {gd} must be at least 3"
        )));
    }
    let n = h.order();
    let step = gd - 2;
    let contributions: Vec<Vec<HomoPoly>> = h
        .parts()
        .par_iter()
        .filter(|p| !p.is_empty() && p.degree() + step <= n)
        .map(|p| {
            let mut out = Vec::new();
            let mut t = p.clone();
            let mut k = 1.0;
            while t.degree() + step <= n {
                t = t.bracket(g).scale(Complex64::new(1.0 / k, 0.0));
                if t.is_empty() {
                    break;
                }
                out.push(t.clone());
                k += 1.0;
            }
            out
        })
        .collect();
    let mut result = h.clone();
    for terms in contributions {
        for t in terms {
            result.part_mut(t.degree()).add_assign(&t);
        }
    }
    Ok(result)
}

/// Applies [`lie_transform`] to every component of a polynomial map.
pub fn lie_transform_map(map: &[PolySeries], g: &HomoPoly) -> Result<Vec<PolySeries>> {
    map.iter().map(|c| lie_transform(c, g)).collect()
}

#[cfg(test)]
mod tests {
    use super::super::{Frame, NVARS};
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn div() -> Divisors {
        Divisors {
            lambda: 3.152,
            omega1: 9.2535,
            omega2: 7.6923,
        }
    }

    fn random_homo(rng: &mut ChaCha8Rng, degree: usize, count: usize) -> HomoPoly {
        let all = super::super::monomials_of_degree(degree);
        let mut p = HomoPoly::zero(degree);
        for _ in 0..count {
            let m = all[rng.random_range(0..all.len())];
            p.add_term(m, Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        }
        p
    }

    #[test]
    fn diagonal_action_matches_bracket() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h2 = div().h2();
        for d in 1..7 {
            for m in super::super::monomials_of_degree(d).into_iter().take(40) {
                let mp = HomoPoly::monomial(m, Complex64::new(1.0, 0.0));
                let b = h2.bracket(&mp);
                let expected = div().divisor(m);
                if expected.norm() == 0.0 {
                    assert!(b.is_empty());
                } else {
                    assert_eq!(b.len(), 1);
                    assert!((b.get(m) - expected).norm() < 1e-14);
                }
            }
        }
        let _ = rng.random::<u8>();
    }

    #[test]
    fn homological_single_monomial() {
        let m = Monomial::new([1, 0, 2, 0, 0, 0]);
        let c = Complex64::new(0.7, -0.2);
        let hn = HomoPoly::monomial(m, c);
        let g = solve_homological(&div(), &hn, |m| m.hyperbolic_weight() == 1).unwrap();
        let d = div();
        let expected = -c / Complex64::new(-d.lambda, -2.0 * d.omega1);
        assert!((g.get(m) - expected).norm() < 1e-15);
        let mut res = d.h2().bracket(&g);
        res.add_assign(&hn);
        assert!(res.norm() < 1e-14);
    }

    #[test]
    fn homological_residual_on_random_polynomial() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let hn = random_homo(&mut rng, 5, 80);
        let target = |m: Monomial| m.hyperbolic_weight() == 1;
        let g = solve_homological(&div(), &hn, target).unwrap();
        let mut res = div().h2().bracket(&g);
        res.add_assign(&hn.filter(target));
        assert!(res.norm() < 1e-14);
        let none = hn.filter(|m| m.hyperbolic_weight() != 1);
        assert!(solve_homological(&div(), &none, target).unwrap().is_empty());
    }

    #[test]
    fn zero_divisor_is_reported() {
        let hn = HomoPoly::monomial(Monomial::new([1, 1, 1, 1, 0, 0]), Complex64::new(1.0, 0.0));
        let r = solve_homological(&div(), &hn, |_| true);
        assert!(matches!(r, Err(Error::ZeroDivisor(_))));
    }

    #[test]
    fn transform_and_inverse_cancel() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let order = 8;
        let mut h = PolySeries::zero(Frame::Complex, order);
        for d in 2..=order {
            h.set_part(random_homo(&mut rng, d, 30));
        }
        let g = random_homo(&mut rng, 3, 12).scale(Complex64::new(0.1, 0.0));
        let fwd = lie_transform(&h, &g).unwrap();
        let back = lie_transform(&fwd, &g.neg()).unwrap();
        assert!(back.sub(&h).unwrap().norm() < 1e-11);
        let same = lie_transform(&h, &HomoPoly::zero(4)).unwrap();
        assert_eq!(same, h);
    }

    #[test]
    fn transform_equals_composition_with_flow() {
        // Real generator and real coordinates: the transformed function
        // evaluated at y equals the original evaluated at the time-one flow of y.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let order = 12;
        let mut g = HomoPoly::zero(3);
        for m in super::super::monomials_of_degree(3).into_iter().step_by(5) {
            g.add_term(m, Complex64::new(rng.random_range(-1.0..1.0), 0.0));
        }
        let mut h = PolySeries::zero(Frame::Real, order);
        h.set_part(div().h2().iter().fold(HomoPoly::zero(2), |mut acc, (m, _)| {
            acc.add_term(m, Complex64::new(1.0, 0.0));
            acc
        }));
        let mut h3 = HomoPoly::zero(3);
        h3.add_term(Monomial::new([0, 1, 1, 0, 1, 0]), Complex64::new(0.4, 0.0));
        h.set_part(h3);
        let hat = lie_transform(&h, &g).unwrap();

        let gs = PolySeries::from_homo(Frame::Real, order, g.clone());
        let y: [f64; NVARS] = std::array::from_fn(|_| rng.random_range(-1.0..1.0) * 1e-2);
        // Time-one flow of G by classical RK4 with small steps.
        let field = |x: &[f64; NVARS]| gs.hamiltonian_field(x);
        let mut x = y;
        let steps = 200;
        let dt = 1.0 / steps as f64;
        for _ in 0..steps {
            let k1 = field(&x);
            let a: [f64; NVARS] = std::array::from_fn(|i| x[i] + 0.5 * dt * k1[i]);
            let k2 = field(&a);
            let b: [f64; NVARS] = std::array::from_fn(|i| x[i] + 0.5 * dt * k2[i]);
            let k3 = field(&b);
            let c: [f64; NVARS] = std::array::from_fn(|i| x[i] + dt * k3[i]);
            let k4 = field(&c);
            x = std::array::from_fn(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
        }
        assert!((h.evaluate(&x) - hat.evaluate(&y)).abs() < 1e-10);
    }
}
