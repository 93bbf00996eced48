//! Run configuration: `section.key = value` lines, `#` comments.
//!
//! Sections are `model`, `reduction`, `integrator`, `job` and `output`.
//! Later assignments win, so command-line overrides are applied by feeding
//! them through [`RunConfig::set`] after the file.

use galcm::{Error, ModelParams, Result, SaddlePoint};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::PathBuf;

pub const OUTPUT_ENV: &str = "GALCM_OUT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionSection {
    pub point: SaddlePoint,
    pub order: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorSection {
    pub rtol: f64,
    pub atol: f64,
    pub t_max: f64,
    /// Stop radius in units of the saddle distance.
    pub stop_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelParams,
    pub reduction: ReductionSection,
    pub integrator: IntegratorSection,
    pub job: BTreeMap<String, String>,
    pub output: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelParams::model1(),
            reduction: ReductionSection {
                point: SaddlePoint::L1,
                order: 15,
            },
            integrator: IntegratorSection {
                rtol: 1e-13,
                atol: 1e-14,
                t_max: 30.0,
                stop_radius: 4.0,
            },
            job: BTreeMap::new(),
            output: PathBuf::from("galcm-out"),
        }
    }
}

fn num(key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>().map_err(|_| Error::Parse(format!("{key}: '{v}' is not a number")))
}

impl RunConfig {
    /// Defaults, with the output root taken from the environment if set.
    pub fn from_env() -> Self {
        let mut c = Self::default();
        if let Some(dir) = std::env::var_os(OUTPUT_ENV) {
            c.output = dir.into();
        }
        c
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let (section, name) = key
            .split_once('.')
            .ok_or_else(|| Error::Parse(format!("key '{key}' is not of the form section.key")))?;
        let v = value.trim();
        match (section, name) {
            ("model", "v0") => self.model.v0 = num(key, v)?,
            ("model", "r0") => self.model.r0 = num(key, v)?,
            ("model", "r0_sq") => self.model.r0 = num(key, v)?.sqrt(),
            ("model", "p_phi") => self.model.p_phi = num(key, v)?,
            ("model", "q_phi") => self.model.q_phi = num(key, v)?,
            ("model", "omega") => self.model.omega = num(key, v)?,
            ("reduction", "point") => self.reduction.point = v.parse()?,
            ("reduction", "order") => {
                self.reduction.order = v.parse().map_err(|_| Error::Parse(format!("{key}: '{v}' is not an integer")))?
            }
            ("integrator", "rtol") => self.integrator.rtol = num(key, v)?,
            ("integrator", "atol") => self.integrator.atol = num(key, v)?,
            ("integrator", "t_max") => self.integrator.t_max = num(key, v)?,
            ("integrator", "stop_radius") => self.integrator.stop_radius = num(key, v)?,
            ("job", k) if !k.is_empty() => {
                self.job.insert(k.into(), v.into());
            }
            ("output", "dir") => self.output = v.into(),
            _ => return Err(Error::Parse(format!("unknown configuration key '{key}'"))),
        }
        Ok(())
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected 'section.key = value'", n + 1)))?;
            self.set(k.trim(), v).map_err(|e| Error::Parse(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    /// Rejects job keys the command does not understand.
    pub fn check_job_keys(&self, allowed: &[&str]) -> Result<()> {
        match self.job.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(Error::Parse(format!("unknown job key '{k}' (expected one of: {})", allowed.join(", ")))),
            None => Ok(()),
        }
    }

    /// The configuration in its own text format; parsing it reproduces `self`.
    pub fn to_text(&self) -> String {
        let f = galcm::poly::fmt_f64;
        let m = &self.model;
        let mut lines = vec![
            format!("model.v0 = {}", f(m.v0)),
            format!("model.r0 = {}", f(m.r0)),
            format!("model.p_phi = {}", f(m.p_phi)),
            format!("model.q_phi = {}", f(m.q_phi)),
            format!("model.omega = {}", f(m.omega)),
            format!("reduction.point = {}", self.reduction.point.name()),
            format!("reduction.order = {}", self.reduction.order),
            format!("integrator.rtol = {}", f(self.integrator.rtol)),
            format!("integrator.atol = {}", f(self.integrator.atol)),
            format!("integrator.t_max = {}", f(self.integrator.t_max)),
            format!("integrator.stop_radius = {}", f(self.integrator.stop_radius)),
        ];
        lines.extend(self.job.iter().map(|(k, v)| format!("job.{k} = {v}")));
        lines.push(format!("output.dir = {}", self.output.display()));
        lines.join("\n") + "\n"
    }

    pub fn job_str(&self, key: &str) -> Option<&str> {
        self.job.get(key).map(String::as_str)
    }

    pub fn job_f64(&self, key: &str) -> Result<Option<f64>> {
        self.job_str(key).map(|v| num(&format!("job.{key}"), v)).transpose()
    }

    pub fn job_usize(&self, key: &str) -> Result<Option<usize>> {
        self.job_str(key)
            .map(|v| v.parse().map_err(|_| Error::Parse(format!("job.{key}: '{v}' is not an integer"))))
            .transpose()
    }

    /// Comma-separated numbers, or `start:end:steps` for an inclusive range.
    pub fn job_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.job_str(key).map(|v| parse_list(&format!("job.{key}"), v)).transpose()
    }
}

pub fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    let v = v.trim();
    if v.is_empty() {
        return Ok(Vec::new());
    }
    if let [a, b, n] = v.split(':').collect::<Vec<_>>()[..] {
        let steps = n.trim().parse().map_err(|_| Error::Parse(format!("{key}: bad step count '{n}'")))?;
        return Ok(galcm::equilibria::linspace(num(key, a.trim())?, num(key, b.trim())?, steps));
    }
    v.split(',').map(|s| num(key, s.trim())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_sections_and_comments() {
        let mut c = RunConfig::default();
        c.apply_text("# model 2\nmodel.p_phi = 0.9   # flatter\nmodel.r0_sq=200\n\nreduction.point = l2\njob.energy = 130100.178\n")
            .unwrap();
        assert_eq!(c.model.p_phi, 0.9);
        assert_eq!(c.model.r0, 200f64.sqrt());
        assert_eq!(c.reduction.point, SaddlePoint::L2);
        assert_eq!(c.job_f64("energy").unwrap(), Some(130100.178));
    }

    #[test]
    fn rejects_unknown_keys() {
        let mut c = RunConfig::default();
        assert!(c.apply_text("model.mass = 3").is_err());
        assert!(c.apply_text("colour = red").is_err());
        assert!(c.apply_text("model.v0 = fast").is_err());
        c.set("job.eps", "1e-5").unwrap();
        assert!(c.check_job_keys(&["energy"]).is_err());
        assert!(c.check_job_keys(&["energy", "eps"]).is_ok());
    }

    #[test]
    fn lists_and_ranges() {
        assert_eq!(parse_list("k", "0.6, 0.7,0.95").unwrap(), vec![0.6, 0.7, 0.95]);
        assert_eq!(parse_list("k", "2:10:5").unwrap(), vec![2.0, 4.0, 6.0, 8.0, 10.0]);
        assert!(parse_list("k", "").unwrap().is_empty());
        assert!(parse_list("k", "1:2:x").is_err());
    }

    proptest! {
        #[test]
        fn text_round_trip(p in 0.5f64..1.0, w in 0.0f64..20.0, order in 3usize..20, e in 1e5f64..2e5) {
            let mut c = RunConfig::default();
            c.model.p_phi = p;
            c.model.omega = w;
            c.reduction.order = order;
            c.job.insert("energy".into(), galcm::poly::fmt_f64(e));
            let mut back = RunConfig::default();
            back.apply_text(&c.to_text()).unwrap();
            prop_assert_eq!(back, c);
        }
    }
}
