//! Sparse graded polynomials in the six canonical variables
//! `(q1, p1, q2, p2, q3, p3)`.

mod bundle;
mod lie;
mod serial;
mod series;

pub use bundle::PolyBundle;
pub use lie::{lie_transform, lie_transform_map, solve_homological, Divisors};
pub use serial::{fmt_f64, series_from_json, series_to_json};
pub use series::{Frame, PolySeries};

use num_complex::Complex64;
use rustc_hash::FxHashMap;
use std::fmt;

pub const NVARS: usize = 6;

/// Exponent vector packed one byte per variable, so that monomial
/// multiplication is integer addition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Monomial(pub u64);

impl Monomial {
    pub const ONE: Monomial = Monomial(0);

    pub fn new(e: [u8; NVARS]) -> Self {
        let mut m = 0u64;
        for (k, &x) in e.iter().enumerate() {
            m |= (x as u64) << (8 * k);
        }
        Monomial(m)
    }

    pub fn var(k: usize) -> Self {
        Monomial(1u64 << (8 * k))
    }

    #[inline]
    pub fn exp(self, k: usize) -> u32 {
        ((self.0 >> (8 * k)) & 0xff) as u32
    }

    pub fn exps(self) -> [u8; NVARS] {
        std::array::from_fn(|k| self.exp(k) as u8)
    }

    #[inline]
    pub fn degree(self) -> usize {
        (self.0.wrapping_mul(0x0101_0101_0101_0101) >> 56) as usize
    }

    /// `i1 + j1`: total power of the hyperbolic pair.
    pub fn hyperbolic_weight(self) -> u32 {
        self.exp(0) + self.exp(1)
    }

    #[inline]
    #[allow(clippy::should_implement_trait)]
    pub fn mul(self, o: Monomial) -> Monomial {
        Monomial(self.0 + o.0)
    }

    /// Divides by variable `k`, or `None` when its exponent is zero.
    pub fn div_var(self, k: usize) -> Option<Monomial> {
        (self.exp(k) > 0).then(|| Monomial(self.0 - (1u64 << (8 * k))))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.exps())
    }
}

/// Homogeneous polynomial with complex coefficients.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HomoPoly {
    degree: usize,
    terms: FxHashMap<Monomial, Complex64>,
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

impl HomoPoly {
    pub fn zero(degree: usize) -> Self {
        Self {
            degree,
            terms: FxHashMap::default(),
        }
    }

    pub fn monomial(m: Monomial, c: Complex64) -> Self {
        let mut p = Self::zero(m.degree());
        p.add_term(m, c);
        p
    }

    pub fn from_terms(degree: usize, terms: impl IntoIterator<Item = (Monomial, Complex64)>) -> Self {
        let mut p = Self::zero(degree);
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn get(&self, m: Monomial) -> Complex64 {
        self.terms.get(&m).copied().unwrap_or(ZERO)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Monomial, Complex64)> + '_ {
        self.terms.iter().map(|(m, c)| (*m, *c))
    }

    /// Terms in a fixed order (degree-independent lexicographic on packed exponents).
    pub fn sorted_terms(&self) -> Vec<(Monomial, Complex64)> {
        let mut v: Vec<_> = self.iter().collect();
        v.sort_unstable_by_key(|(m, _)| std::cmp::Reverse(m.exps()));
        v
    }

    /// Adds `c·m`, dropping the entry if it cancels to exactly zero.
    pub fn add_term(&mut self, m: Monomial, c: Complex64) {
        debug_assert_eq!(m.degree(), self.degree);
        if c == ZERO {
            return;
        }
        match self.terms.entry(m) {
            std::collections::hash_map::Entry::Occupied(mut e) => {
                let v = *e.get() + c;
                if v == ZERO {
                    e.remove();
                } else {
                    *e.get_mut() = v;
                }
            }
            std::collections::hash_map::Entry::Vacant(e) => {
                e.insert(c);
            }
        }
    }

    pub fn remove(&mut self, m: Monomial) -> Complex64 {
        self.terms.remove(&m).unwrap_or(ZERO)
    }

    pub fn retain(&mut self, mut keep: impl FnMut(Monomial, Complex64) -> bool) {
        self.terms.retain(|m, c| keep(*m, *c));
    }

    pub fn filter(&self, keep: impl Fn(Monomial) -> bool) -> Self {
        Self {
            degree: self.degree,
            terms: self.terms.iter().filter(|(m, _)| keep(**m)).map(|(m, c)| (*m, *c)).collect(),
        }
    }

    pub fn add_assign(&mut self, o: &HomoPoly) {
        assert_eq!(self.degree, o.degree, "degree mismatch in addition");
        for (m, c) in o.iter() {
            self.add_term(m, c);
        }
    }

    pub fn add_scaled(&mut self, o: &HomoPoly, s: Complex64) {
        assert_eq!(self.degree, o.degree, "degree mismatch in addition");
        for (m, c) in o.iter() {
            self.add_term(m, c * s);
        }
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut out = Self::zero(self.degree);
        for (m, c) in self.iter() {
            out.add_term(m, c * s);
        }
        out
    }

    pub fn neg(&self) -> Self {
        Self {
            degree: self.degree,
            terms: self.terms.iter().map(|(m, c)| (*m, -*c)).collect(),
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            degree: self.degree,
            terms: self.terms.iter().map(|(m, c)| (*m, c.conj())).collect(),
        }
    }

    pub fn mul(&self, o: &HomoPoly) -> HomoPoly {
        let mut out = HomoPoly::zero(self.degree + o.degree);
        out.terms.reserve(self.len().max(o.len()));
        for (ma, ca) in self.iter() {
            for (mb, cb) in o.iter() {
                *out.terms.entry(ma.mul(mb)).or_insert(ZERO) += ca * cb;
            }
        }
        out.terms.retain(|_, c| *c != ZERO);
        out
    }

    /// Largest coefficient modulus.
    pub fn norm(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Largest imaginary part modulus.
    pub fn max_imag(&self) -> f64 {
        self.terms.values().map(|c| c.im.abs()).fold(0.0, f64::max)
    }

    pub fn derivative(&self, k: usize) -> HomoPoly {
        let mut out = HomoPoly::zero(self.degree.saturating_sub(1));
        for (m, c) in self.iter() {
            if let Some(d) = m.div_var(k) {
                out.add_term(d, c * m.exp(k) as f64);
            }
        }
        out
    }

    /// Poisson bracket `{self, o} = Σ ∂self/∂q ∂o/∂p − ∂self/∂p ∂o/∂q`.
    pub fn bracket(&self, o: &HomoPoly) -> HomoPoly {
        let deg = self.degree + o.degree;
        if deg < 2 {
            return HomoPoly::zero(0);
        }
        let mut out = HomoPoly::zero(deg - 2);
        for (ma, ca) in self.iter() {
            for (mb, cb) in o.iter() {
                let prod = ma.mul(mb);
                let cc = ca * cb;
                for s in 0..3 {
                    let (i, j) = (ma.exp(2 * s) as i64, ma.exp(2 * s + 1) as i64);
                    let (k, l) = (mb.exp(2 * s) as i64, mb.exp(2 * s + 1) as i64);
                    let f = i * l - j * k;
                    if f != 0 {
                        let key = Monomial(prod.0 - (0x101u64 << (16 * s)));
                        *out.terms.entry(key).or_insert(ZERO) += cc * f as f64;
                    }
                }
            }
        }
        out.terms.retain(|_, c| *c != ZERO);
        out
    }

    pub fn evaluate(&self, z: &[Complex64; NVARS]) -> Complex64 {
        let pows = power_table(z, self.degree);
        self.iter()
            .map(|(m, c)| {
                let mut v = c;
                for (k, row) in pows.iter().enumerate() {
                    v *= row[m.exp(k) as usize];
                }
                v
            })
            .sum()
    }

    /// Drops coefficients with modulus below `threshold`.
    pub fn prune(&mut self, threshold: f64) {
        self.terms.retain(|_, c| c.norm() >= threshold);
    }
}

pub(crate) fn power_table(z: &[Complex64; NVARS], max: usize) -> [Vec<Complex64>; NVARS] {
    std::array::from_fn(|k| {
        let mut row = Vec::with_capacity(max + 1);
        let mut acc = Complex64::new(1.0, 0.0);
        for _ in 0..=max {
            row.push(acc);
            acc *= z[k];
        }
        row
    })
}

/// All exponent vectors of total degree `d`.
pub fn monomials_of_degree(d: usize) -> Vec<Monomial> {
    let mut out = Vec::new();
    let mut e = [0u8; NVARS];
    fn rec(k: usize, left: usize, e: &mut [u8; NVARS], out: &mut Vec<Monomial>) {
        if k == NVARS - 1 {
            e[k] = left as u8;
            out.push(Monomial::new(*e));
            return;
        }
        for x in (0..=left).rev() {
            e[k] = x as u8;
            rec(k + 1, left - x, e, out);
        }
    }
    rec(0, d, &mut e, &mut out);
    out
}
