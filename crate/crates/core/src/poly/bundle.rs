use super::{Monomial, PolySeries, NVARS};
use rustc_hash::FxHashMap;

/// Several real polynomials over a shared monomial table, evaluated with one
/// multiplication per monomial.
///
/// Monomials are stored in degree order, each as its parent times one variable,
/// so a single forward sweep yields every monomial value.
#[derive(Debug, Clone)]
pub struct PolyBundle {
    parent: Vec<u32>,
    var: Vec<u8>,
    coefs: Vec<f64>,
    ncomp: usize,
}

impl PolyBundle {
    /// Compiles the real parts of `components`.
    pub fn new(components: &[&PolySeries]) -> Self {
        let ncomp = components.len();
        let mut used: FxHashMap<Monomial, Vec<f64>> = FxHashMap::default();
        for (c, s) in components.iter().enumerate() {
            for (m, v) in s.iter() {
                if v.re != 0.0 {
                    used.entry(m).or_insert_with(|| vec![0.0; ncomp])[c] += v.re;
                }
            }
        }
        // Close the set under the parent relation.
        let mut all: Vec<Monomial> = used.keys().copied().collect();
        let mut seen: rustc_hash::FxHashSet<Monomial> = all.iter().copied().collect();
        seen.insert(Monomial::ONE);
        let mut i = 0;
        while i < all.len() {
            if let Some((p, _)) = split(all[i]) {
                if seen.insert(p) {
                    all.push(p);
                }
            }
            i += 1;
        }
        all.push(Monomial::ONE);
        all.sort_unstable_by_key(|m| (m.degree(), std::cmp::Reverse(m.exps())));
        all.dedup();
        let index: FxHashMap<Monomial, u32> = all.iter().enumerate().map(|(i, m)| (*m, i as u32)).collect();
        let mut parent = Vec::with_capacity(all.len());
        let mut var = Vec::with_capacity(all.len());
        let mut coefs = vec![0.0; all.len() * ncomp];
        for (i, m) in all.iter().enumerate() {
            match split(*m) {
                Some((p, k)) => {
                    parent.push(index[&p]);
                    var.push(k as u8);
                }
                None => {
                    parent.push(0);
                    var.push(0);
                }
            }
            if let Some(row) = used.get(m) {
                coefs[i * ncomp..(i + 1) * ncomp].copy_from_slice(row);
            }
        }
        Self {
            parent,
            var,
            coefs,
            ncomp,
        }
    }

    /// Compiles the Hamiltonian vector field of `h`.
    pub fn field(h: &PolySeries) -> Self {
        let d: Vec<PolySeries> = (0..NVARS).map(|k| h.derivative(k)).collect();
        let neg = |s: &PolySeries| s.scale(num_complex::Complex64::new(-1.0, 0.0));
        let comps = [d[1].clone(), neg(&d[0]), d[3].clone(), neg(&d[2]), d[5].clone(), neg(&d[4])];
        Self::new(&comps.iter().collect::<Vec<_>>())
    }

    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    pub fn monomial_count(&self) -> usize {
        self.parent.len()
    }

    /// Evaluates every component into `out` using `scratch` for monomial values.
    pub fn eval_into(&self, x: &[f64; NVARS], scratch: &mut Vec<f64>, out: &mut [f64]) {
        let n = self.parent.len();
        scratch.clear();
        scratch.resize(n, 0.0);
        out[..self.ncomp].iter_mut().for_each(|v| *v = 0.0);
        scratch[0] = 1.0;
        for c in 0..self.ncomp {
            out[c] += self.coefs[c];
        }
        for i in 1..n {
            let v = scratch[self.parent[i] as usize] * x[self.var[i] as usize];
            scratch[i] = v;
            let row = &self.coefs[i * self.ncomp..(i + 1) * self.ncomp];
            for (o, c) in out.iter_mut().zip(row) {
                *o += v * c;
            }
        }
    }

    pub fn eval(&self, x: &[f64; NVARS]) -> Vec<f64> {
        let mut scratch = Vec::new();
        let mut out = vec![0.0; self.ncomp];
        self.eval_into(x, &mut scratch, &mut out);
        out
    }
}

fn split(m: Monomial) -> Option<(Monomial, usize)> {
    (0..NVARS).find(|&k| m.exp(k) > 0).map(|k| (m.div_var(k).unwrap(), k))
}
