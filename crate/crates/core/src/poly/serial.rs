use super::{Frame, Monomial, PolySeries, NVARS};
use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::Deserialize;
use std::fmt::Write as _;

/// 17 significant digits: enough to recover every binary64 value exactly.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Serialises a series with terms sorted by degree, then exponents.
pub fn series_to_json(s: &PolySeries) -> Result<String> {
    let mut out = String::new();
    let h0 = s.h0();
    if !h0.is_finite() {
        return Err(Error::InvalidArgument("non-finite constant term".into()));
    }
    write!(
        out,
        "{{\"frame\":\"{}\",\"N\":{},\"H0\":{},\"terms\":[",
        s.frame().tag(),
        s.order(),
        fmt_f64(h0)
    )
    .unwrap();
    let mut first = true;
    for d in 1..=s.order() {
        for (m, c) in s.part(d).sorted_terms() {
            if !(c.re.is_finite() && c.im.is_finite()) {
                return Err(Error::InvalidArgument(format!("non-finite coefficient at {m}")));
            }
            if !first {
                out.push(',');
            }
            first = false;
            let e = m.exps();
            write!(
                out,
                "\n{{\"e\":[{},{},{},{},{},{}],\"re\":{},\"im\":{}}}",
                e[0],
                e[1],
                e[2],
                e[3],
                e[4],
                e[5],
                fmt_f64(c.re),
                fmt_f64(c.im)
            )
            .unwrap();
        }
    }
    out.push_str("\n]}\n");
    Ok(out)
}

#[derive(Deserialize)]
struct RawTerm {
    e: [u8; NVARS],
    re: f64,
    im: f64,
}

#[derive(Deserialize)]
struct RawSeries {
    frame: String,
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "H0")]
    h0: f64,
    terms: Vec<RawTerm>,
}

pub fn series_from_json(text: &str) -> Result<PolySeries> {
    let raw: RawSeries = serde_json::from_str(text)?;
    let frame = Frame::from_tag(&raw.frame)?;
    let mut s = PolySeries::zero(frame, raw.n);
    s.part_mut(0).add_term(Monomial::ONE, Complex64::new(raw.h0, 0.0));
    for t in raw.terms {
        let m = Monomial::new(t.e);
        let d = m.degree();
        if d == 0 || d > raw.n {
            return Err(Error::Parse(format!("term {m} outside degrees 1..={}", raw.n)));
        }
        s.part_mut(d).add_term(m, Complex64::new(t.re, t.im));
    }
    Ok(s)
}
