use super::{power_table, HomoPoly, Monomial, NVARS};
use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Variable frame of a series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Frame {
    /// Real normal-form variables.
    Real,
    /// Complexified normal-form variables, where the quadratic part is diagonal.
    Complex,
}

impl Frame {
    pub fn tag(self) -> &'static str {
        match self {
            Frame::Real => "real-NF",
            Frame::Complex => "complex-NF",
        }
    }

    pub fn from_tag(s: &str) -> Result<Self> {
        match s {
            "real-NF" => Ok(Frame::Real),
            "complex-NF" => Ok(Frame::Complex),
            other => Err(Error::Parse(format!("unknown frame '{other}'"))),
        }
    }
}

/// Polynomial truncated at total degree `order`; `parts[d]` holds degree `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolySeries {
    frame: Frame,
    parts: Vec<HomoPoly>,
}

impl PolySeries {
    pub fn zero(frame: Frame, order: usize) -> Self {
        Self {
            frame,
            parts: (0..=order).map(HomoPoly::zero).collect(),
        }
    }

    /// Series holding the single coordinate function `var`.
    pub fn coordinate(frame: Frame, order: usize, var: usize) -> Self {
        let mut s = Self::zero(frame, order);
        s.parts[1].add_term(Monomial::var(var), Complex64::new(1.0, 0.0));
        s
    }

    pub fn constant(frame: Frame, order: usize, value: Complex64) -> Self {
        let mut s = Self::zero(frame, order);
        s.parts[0].add_term(Monomial::ONE, value);
        s
    }

    pub fn from_homo(frame: Frame, order: usize, h: HomoPoly) -> Self {
        let mut s = Self::zero(frame, order);
        if h.degree() <= order {
            let d = h.degree();
            s.parts[d] = h;
        }
        s
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn with_frame(mut self, frame: Frame) -> Self {
        self.frame = frame;
        self
    }

    pub fn order(&self) -> usize {
        self.parts.len() - 1
    }

    /// Constant term.
    pub fn h0(&self) -> f64 {
        self.parts[0].get(Monomial::ONE).re
    }

    pub fn part(&self, d: usize) -> &HomoPoly {
        &self.parts[d]
    }

    pub fn part_mut(&mut self, d: usize) -> &mut HomoPoly {
        &mut self.parts[d]
    }

    pub fn set_part(&mut self, h: HomoPoly) {
        let d = h.degree();
        self.parts[d] = h;
    }

    pub fn parts(&self) -> &[HomoPoly] {
        &self.parts
    }

    pub fn len(&self) -> usize {
        self.parts.iter().map(HomoPoly::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.iter().all(HomoPoly::is_empty)
    }

    pub fn get(&self, m: Monomial) -> Complex64 {
        self.parts
            .get(m.degree())
            .map(|p| p.get(m))
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn iter(&self) -> impl Iterator<Item = (Monomial, Complex64)> + '_ {
        self.parts.iter().flat_map(|p| p.iter())
    }

    /// Truncates or extends to a new order.
    pub fn with_order(&self, order: usize) -> Self {
        let mut s = Self::zero(self.frame, order);
        for d in 0..=order.min(self.order()) {
            s.parts[d] = self.parts[d].clone();
        }
        s
    }

    fn check_frame(&self, o: &PolySeries) -> Result<()> {
        if self.frame != o.frame {
            return Err(Error::FrameMismatch(self.frame.tag(), o.frame.tag()));
        }
        Ok(())
    }

    pub fn add(&self, o: &PolySeries) -> Result<PolySeries> {
        self.check_frame(o)?;
        let mut out = self.clone();
        for d in 0..=self.order().min(o.order()) {
            out.parts[d].add_assign(&o.parts[d]);
        }
        Ok(out)
    }

    pub fn sub(&self, o: &PolySeries) -> Result<PolySeries> {
        self.add(&o.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, s: Complex64) -> PolySeries {
        PolySeries {
            frame: self.frame,
            parts: self.parts.iter().map(|p| p.scale(s)).collect(),
        }
    }

    /// Product truncated at `self.order()`.
    pub fn mul(&self, o: &PolySeries) -> Result<PolySeries> {
        self.check_frame(o)?;
        let n = self.order();
        let mut out = PolySeries::zero(self.frame, n);
        for (da, a) in self.parts.iter().enumerate() {
            if a.is_empty() {
                continue;
            }
            for (db, b) in o.parts.iter().enumerate() {
                if da + db > n || b.is_empty() {
                    continue;
                }
                out.parts[da + db].add_assign(&a.mul(b));
            }
        }
        Ok(out)
    }

    /// `{self, g}` truncated at `self.order()`.
    pub fn bracket_homo(&self, g: &HomoPoly) -> PolySeries {
        let n = self.order();
        let mut out = PolySeries::zero(self.frame, n);
        for p in &self.parts {
            let d = p.degree() + g.degree();
            if d < 2 || d - 2 > n || p.is_empty() {
                continue;
            }
            out.parts[d - 2].add_assign(&p.bracket(g));
        }
        out
    }

    pub fn norm(&self) -> f64 {
        self.parts.iter().map(HomoPoly::norm).fold(0.0, f64::max)
    }

    pub fn max_imag(&self) -> f64 {
        self.parts.iter().map(HomoPoly::max_imag).fold(0.0, f64::max)
    }

    /// Zeroes imaginary parts after a realification.
    pub fn real_part(&self) -> PolySeries {
        PolySeries {
            frame: self.frame,
            parts: self
                .parts
                .iter()
                .map(|p| HomoPoly::from_terms(p.degree(), p.iter().map(|(m, c)| (m, Complex64::new(c.re, 0.0)))))
                .collect(),
        }
    }

    pub fn derivative(&self, k: usize) -> PolySeries {
        let n = self.order();
        let mut out = PolySeries::zero(self.frame, n);
        for p in self.parts.iter().skip(1) {
            out.set_part(p.derivative(k));
        }
        out
    }

    /// Substitutes `old_k = Σ_j m[k][j]·new_j` degree by degree.
    pub fn substitute_linear(&self, m: &[[Complex64; NVARS]; NVARS], to: Frame) -> PolySeries {
        let n = self.order();
        let forms: Vec<HomoPoly> = (0..NVARS)
            .map(|k| HomoPoly::from_terms(1, (0..NVARS).map(|j| (Monomial::var(j), m[k][j]))))
            .collect();
        // powers[k][e] = (linear form k)^e
        let powers: Vec<Vec<HomoPoly>> = forms
            .iter()
            .map(|f| {
                let mut row = vec![HomoPoly::monomial(Monomial::ONE, Complex64::new(1.0, 0.0))];
                for e in 1..=n {
                    let next = row[e - 1].mul(f);
                    row.push(next);
                }
                row
            })
            .collect();
        let mut out = PolySeries::zero(to, n);
        for part in &self.parts {
            let mut acc = HomoPoly::zero(part.degree());
            for (mono, c) in part.sorted_terms() {
                let mut prod = HomoPoly::monomial(Monomial::ONE, c);
                for (k, row) in powers.iter().enumerate() {
                    let e = mono.exp(k) as usize;
                    if e > 0 {
                        prod = prod.mul(&row[e]);
                    }
                }
                acc.add_assign(&prod);
            }
            out.parts[part.degree()] = acc;
        }
        out
    }

    /// Sets the variables flagged in `zero_vars` to zero.
    pub fn restrict(&self, zero_vars: [bool; NVARS]) -> PolySeries {
        let mut out = self.clone();
        for p in &mut out.parts {
            p.retain(|m, _| (0..NVARS).all(|k| !zero_vars[k] || m.exp(k) == 0));
        }
        out
    }

    pub fn evaluate_complex(&self, z: &[Complex64; NVARS]) -> Complex64 {
        let pows = power_table(z, self.order());
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

    /// Real-part evaluation at a real point.
    pub fn evaluate(&self, x: &[f64; NVARS]) -> f64 {
        let n = self.order();
        let pows: [Vec<f64>; NVARS] = std::array::from_fn(|k| {
            let mut row = vec![1.0; n + 1];
            for e in 1..=n {
                row[e] = row[e - 1] * x[k];
            }
            row
        });
        let mut sum = 0.0;
        for (m, c) in self.iter() {
            let mut v = c.re;
            for (k, row) in pows.iter().enumerate() {
                v *= row[m.exp(k) as usize];
            }
            sum += v;
        }
        sum
    }

    /// Hamiltonian vector field `(∂H/∂p1, −∂H/∂q1, ∂H/∂p2, −∂H/∂q2, ∂H/∂p3, −∂H/∂q3)`.
    pub fn hamiltonian_field(&self, x: &[f64; NVARS]) -> [f64; NVARS] {
        let g: [f64; NVARS] = std::array::from_fn(|k| self.derivative(k).evaluate(x));
        [g[1], -g[0], g[3], -g[2], g[5], -g[4]]
    }

    pub fn prune(&mut self, threshold: f64) {
        for p in &mut self.parts {
            p.prune(threshold);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sample(order: usize) -> PolySeries {
        let mut s = PolySeries::zero(Frame::Real, order);
        s.part_mut(2).add_term(Monomial::new([1, 1, 0, 0, 0, 0]), c(3.0, 0.0));
        s.part_mut(2).add_term(Monomial::new([0, 0, 2, 0, 0, 0]), c(0.5, 0.0));
        s.part_mut(3).add_term(Monomial::new([0, 1, 1, 0, 0, 1]), c(-1.25, 0.0));
        s.part_mut(4).add_term(Monomial::new([0, 0, 0, 2, 2, 0]), c(0.75, 0.0));
        s
    }

    #[test]
    fn frame_mismatch_is_rejected() {
        let a = PolySeries::zero(Frame::Real, 4);
        let b = PolySeries::zero(Frame::Complex, 4);
        assert!(matches!(a.add(&b), Err(Error::FrameMismatch(..))));
    }

    #[test]
    fn identity_substitution_is_neutral() {
        let s = sample(6);
        let mut id = [[c(0.0, 0.0); NVARS]; NVARS];
        for (k, row) in id.iter_mut().enumerate() {
            row[k] = c(1.0, 0.0);
        }
        assert_eq!(s.substitute_linear(&id, Frame::Real), s);
    }

    #[test]
    fn evaluation_matches_manual_sum() {
        let s = sample(6);
        let x = [0.3, -0.2, 0.7, 0.1, -0.4, 0.9];
        let manual = 3.0 * x[0] * x[1] + 0.5 * x[2] * x[2] - 1.25 * x[1] * x[2] * x[5]
            + 0.75 * x[3] * x[3] * x[4] * x[4];
        assert!((s.evaluate(&x) - manual).abs() < 1e-15);
    }

    #[test]
    fn field_matches_finite_differences() {
        let s = sample(6);
        let x = [0.3, -0.2, 0.7, 0.1, -0.4, 0.9];
        let f = s.hamiltonian_field(&x);
        let h = 1e-6;
        let grad: Vec<f64> = (0..NVARS)
            .map(|k| {
                let (mut a, mut b) = (x, x);
                a[k] += h;
                b[k] -= h;
                (s.evaluate(&a) - s.evaluate(&b)) / (2.0 * h)
            })
            .collect();
        let expected = [grad[1], -grad[0], grad[3], -grad[2], grad[5], -grad[4]];
        for k in 0..NVARS {
            assert!((f[k] - expected[k]).abs() < 1e-8 * (1.0 + expected[k].abs()));
        }
    }

    #[test]
    fn truncated_product() {
        let s = sample(4);
        let sq = s.mul(&s).unwrap();
        assert_eq!(sq.order(), 4);
        assert_eq!(sq.get(Monomial::new([2, 2, 0, 0, 0, 0])), c(9.0, 0.0));
        assert!(sq.part(3).is_empty() && sq.part(2).is_empty());
    }
}
