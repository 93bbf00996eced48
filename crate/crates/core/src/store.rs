//! On-disk artifacts: reduction bundles, CSV tables with `#` metadata lines
//! and content hashes.

use crate::equilibria::Linearization;
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::poly::{fmt_f64, series_from_json, series_to_json, Frame, HomoPoly, PolySeries, NVARS};
use crate::reduction::{Affine, CoordMap, Elimination, MapDirection, Reduction, ReductionParts};
use crate::SaddlePoint;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::Path;

pub const MANIFEST: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        write!(s, "{b:02x}").unwrap();
        s
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileHash {
    pub name: String,
    pub sha256: String,
}

/// Writes `text` to `dir/name` and returns its hash record.
pub fn write_hashed(dir: &Path, name: &str, text: &str) -> Result<FileHash> {
    std::fs::write(dir.join(name), text)?;
    Ok(FileHash {
        name: name.into(),
        sha256: sha256_hex(text.as_bytes()),
    })
}

/// Reads a file and checks it against its recorded hash.
pub fn read_verified(dir: &Path, h: &FileHash) -> Result<String> {
    let path = dir.join(&h.name);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::Artifact(format!("{}: {e}", path.display())))?;
    let got = sha256_hex(text.as_bytes());
    if got != h.sha256 {
        return Err(Error::Artifact(format!("{} does not match its recorded hash", path.display())));
    }
    Ok(text)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReductionManifest {
    pub params: ModelParams,
    pub point: SaddlePoint,
    #[serde(rename = "N")]
    pub order: usize,
    pub elimination: Elimination,
    pub h0: f64,
    pub lambda: f64,
    pub omega1: f64,
    pub omega2: f64,
    pub linearization: Linearization,
    pub divisor_floor: Vec<(usize, f64)>,
    pub quadratic_residual: f64,
    pub linear_residual: f64,
    pub inverse_input: Option<Affine>,
    pub files: Vec<FileHash>,
}

impl ReductionManifest {
    fn file(&self, name: &str) -> Result<&FileHash> {
        self.files
            .iter()
            .find(|f| f.name == name)
            .ok_or_else(|| Error::Artifact(format!("bundle lists no file '{name}'")))
    }
}

fn generator_name(degree: usize) -> String {
    format!("generator_{degree:02}.json")
}

fn map_name(direction: MapDirection, k: usize) -> String {
    match direction {
        MapDirection::NfToBarycentric => format!("forward_{k}.json"),
        MapDirection::BarycentricToNf => format!("inverse_{k}.json"),
    }
}

/// Writes the reduced Hamiltonian, its centre restriction, every generator
/// and both coordinate maps as series files plus a manifest.
pub fn save_reduction(red: &Reduction, dir: &Path) -> Result<ReductionManifest> {
    std::fs::create_dir_all(dir)?;
    let mut files = vec![
        write_hashed(dir, "reduced_h.json", &series_to_json(&red.reduced_h)?)?,
        write_hashed(dir, "center_h.json", &series_to_json(&red.center_h)?)?,
    ];
    for g in &red.generators {
        let s = PolySeries::from_homo(Frame::Complex, red.order, g.clone());
        files.push(write_hashed(dir, &generator_name(g.degree()), &series_to_json(&s)?)?);
    }
    for map in [&red.forward, &red.inverse] {
        for (k, c) in map.components.iter().enumerate() {
            files.push(write_hashed(dir, &map_name(map.direction, k), &series_to_json(c)?)?);
        }
    }
    let lin = &red.linearization;
    let manifest = ReductionManifest {
        params: red.params,
        point: red.point,
        order: red.order,
        elimination: red.elimination,
        h0: red.h0,
        lambda: lin.lambda,
        omega1: lin.omega1,
        omega2: lin.omega2,
        linearization: lin.clone(),
        divisor_floor: red.divisor_floor.clone(),
        quadratic_residual: red.quadratic_residual,
        linear_residual: red.linear_residual,
        inverse_input: red.inverse.input.clone(),
        files,
    };
    std::fs::write(dir.join(MANIFEST), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

pub fn read_reduction_manifest(dir: &Path) -> Result<ReductionManifest> {
    let path = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&path)
        .map_err(|_| Error::Artifact(format!("no reduction bundle at {} (run `reduce` first)", dir.display())))?;
    Ok(serde_json::from_str(&text)?)
}

/// Rebuilds a reduction from a bundle written by [`save_reduction`],
/// verifying every file hash.
pub fn load_reduction(dir: &Path) -> Result<Reduction> {
    let m = read_reduction_manifest(dir)?;
    let series = |name: &str| -> Result<PolySeries> { series_from_json(&read_verified(dir, m.file(name)?)?) };
    let generators = (3..=m.order)
        .map(|d| Ok(series(&generator_name(d))?.part(d).clone()))
        .collect::<Result<Vec<HomoPoly>>>()?;
    let map = |direction, input: Option<Affine>| -> Result<CoordMap> {
        let comps = (0..NVARS).map(|k| series(&map_name(direction, k))).collect::<Result<Vec<_>>>()?;
        Ok(CoordMap::new(direction, m.order, input, comps))
    };
    Ok(Reduction::from_parts(ReductionParts {
        params: m.params,
        point: m.point,
        order: m.order,
        elimination: m.elimination,
        h0: m.h0,
        linearization: m.linearization.clone(),
        reduced_h: series("reduced_h.json")?,
        center_h: series("center_h.json")?,
        generators,
        forward: map(MapDirection::NfToBarycentric, None)?,
        inverse: map(MapDirection::BarycentricToNf, m.inverse_input.clone())?,
        divisor_floor: m.divisor_floor.clone(),
        quadratic_residual: m.quadratic_residual,
        linear_residual: m.linear_residual,
    }))
}

/// CSV text with `# key=value` metadata lines, a header and rows of numbers
/// at 17 significant digits. Rows may carry trailing text columns.
pub fn csv_table(meta: &[(&str, String)], header: &[&str], rows: impl IntoIterator<Item = Vec<CsvField>>) -> String {
    let mut out = String::new();
    for (k, v) in meta {
        writeln!(out, "# {k}={v}").unwrap();
    }
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(CsvField::render).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub enum CsvField {
    Num(f64),
    Int(i64),
    Text(String),
    Empty,
}

impl CsvField {
    fn render(&self) -> String {
        match self {
            CsvField::Num(v) => fmt_f64(*v),
            CsvField::Int(v) => v.to_string(),
            CsvField::Text(s) => s.clone(),
            CsvField::Empty => String::new(),
        }
    }
}

impl From<f64> for CsvField {
    fn from(v: f64) -> Self {
        CsvField::Num(v)
    }
}

impl From<Option<f64>> for CsvField {
    fn from(v: Option<f64>) -> Self {
        v.map_or(CsvField::Empty, CsvField::Num)
    }
}

impl From<usize> for CsvField {
    fn from(v: usize) -> Self {
        CsvField::Int(v as i64)
    }
}

impl From<&str> for CsvField {
    fn from(v: &str) -> Self {
        CsvField::Text(v.into())
    }
}

/// A parsed CSV table; numeric cells that do not parse are kept as `NaN`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub meta: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn parse(text: &str) -> Result<Self> {
        let mut meta = Vec::new();
        let mut header = None;
        let mut rows = Vec::new();
        for line in text.lines() {
            if let Some(m) = line.strip_prefix('#') {
                let (k, v) = m.trim().split_once('=').ok_or_else(|| Error::Parse(format!("bad metadata line '{line}'")))?;
                meta.push((k.into(), v.into()));
            } else if line.is_empty() {
                continue;
            } else if header.is_none() {
                header = Some(line.split(',').map(String::from).collect::<Vec<_>>());
            } else {
                rows.push(line.split(',').map(String::from).collect());
            }
        }
        let header = header.ok_or_else(|| Error::Parse("table has no header".into()))?;
        if let Some(r) = rows.iter().find(|r: &&Vec<String>| r.len() != header.len()) {
            return Err(Error::Parse(format!("row has {} cells, header has {}", r.len(), header.len())));
        }
        Ok(Self { meta, header, rows })
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse(format!("no column '{name}'")))
    }

    pub fn numbers(&self, name: &str) -> Result<Vec<f64>> {
        let k = self.column(name)?;
        Ok(self.rows.iter().map(|r| r[k].parse().unwrap_or(f64::NAN)).collect())
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}
