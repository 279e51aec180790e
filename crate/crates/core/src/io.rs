//! Plain-text exports: snapshot CSVs with a JSON index, the energy report
//! stream, and steady states with a JSON sidecar.
//!
//! Every number is written with 17 significant digits and every line ends in
//! `\n`, so identical runs produce identical bytes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::energetics::EnergyReport;
use crate::error::{Error, Result};
use crate::measures::{grid_point, InverseCdf};
use crate::steady::{SteadyKind, SteadyState};

/// `{:.16e}`: 17 significant digits.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// `z,x` rows for every grid node.
pub fn write_inverse_cdf(path: &Path, x: &InverseCdf) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["z", "x"])?;
    for (z, v) in x.points() {
        w.write_record([fmt_num(z), fmt_num(v)])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a `z,x` CSV. The `z` column must be the midpoint grid of the
/// file's length.
pub fn read_inverse_cdf(path: &Path) -> Result<InverseCdf> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Input(format!("{}: missing column `{name}`", path.display())))
    };
    let (zc, xc) = (col("z")?, col("x")?);
    let mut zs = Vec::new();
    let mut xs = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let parse = |c: usize| -> Result<f64> {
            let s = rec.get(c).unwrap_or("").trim();
            s.parse()
                .map_err(|_| Error::Input(format!("{}: cannot parse `{s}`", path.display())))
        };
        zs.push(parse(zc)?);
        xs.push(parse(xc)?);
    }
    let n = xs.len();
    if let Some(i) = (0..n).find(|&i| (zs[i] - grid_point(n, i)).abs() > 1e-9) {
        return Err(Error::Input(format!(
            "{}: z[{i}] = {} is not the grid midpoint {}",
            path.display(),
            zs[i],
            grid_point(n, i)
        )));
    }
    InverseCdf::new(xs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryIndex {
    pub times: Vec<f64>,
    pub files: Vec<String>,
    pub min_slope: Vec<f64>,
}

/// Writes `snap_XXXXX.csv` for every recorded state plus `index.json` into
/// `dir`.
pub fn write_trajectory(dir: &Path, traj: &Trajectory) -> Result<TrajectoryIndex> {
    create_dir(dir)?;
    let mut index = TrajectoryIndex {
        times: Vec::new(),
        files: Vec::new(),
        min_slope: Vec::new(),
    };
    for (k, s) in traj.states.iter().enumerate() {
        let name = format!("snap_{k:05}.csv");
        write_inverse_cdf(&dir.join(&name), &s.x)?;
        index.times.push(s.t);
        index.files.push(name);
        index.min_slope.push(s.min_slope);
    }
    let json = serde_json::to_string_pretty(&index)? + "\n";
    write_text(&dir.join("index.json"), &json)?;
    Ok(index)
}

/// Reads an index and its snapshots, returning `(t, X)` pairs.
pub fn read_trajectory(dir: &Path) -> Result<Vec<(f64, InverseCdf)>> {
    let path = dir.join("index.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let index: TrajectoryIndex = serde_json::from_str(&text)?;
    if index.times.len() != index.files.len() {
        return Err(Error::Input(format!(
            "{}: {} times but {} files",
            path.display(),
            index.times.len(),
            index.files.len()
        )));
    }
    index
        .times
        .iter()
        .zip(&index.files)
        .map(|(&t, f)| Ok((t, read_inverse_cdf(&dir.join(f))?)))
        .collect()
}

const ENERGY_HEADER: [&str; 6] = ["t", "E", "D", "E_hat", "moment_qa", "moment_r"];

/// `t,E,D,E_hat,moment_qa,moment_r`; `E_hat` is empty when not computed.
pub fn write_energy_reports(path: &Path, reports: &[EnergyReport]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(ENERGY_HEADER)?;
    for r in reports {
        w.write_record([
            fmt_num(r.t),
            fmt_num(r.energy),
            fmt_num(r.dissipation),
            r.e_hat.map(fmt_num).unwrap_or_default(),
            fmt_num(r.moment_qa),
            fmt_num(r.moment_r),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_energy_reports(path: &Path) -> Result<Vec<EnergyReport>> {
    let mut r = csv::Reader::from_path(path)?;
    let headers: Vec<String> = r.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if headers != ENERGY_HEADER {
        return Err(Error::Input(format!(
            "{}: expected header {}",
            path.display(),
            ENERGY_HEADER.join(",")
        )));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let field = |c: usize| -> Result<Option<f64>> {
            let s = rec.get(c).unwrap_or("").trim();
            if s.is_empty() {
                return Ok(None);
            }
            s.parse()
                .map(Some)
                .map_err(|_| Error::Input(format!("{}: cannot parse `{s}`", path.display())))
        };
        let need = |c: usize| -> Result<f64> {
            field(c)?.ok_or_else(|| {
                Error::Input(format!("{}: empty `{}` field", path.display(), ENERGY_HEADER[c]))
            })
        };
        out.push(EnergyReport {
            t: need(0)?,
            energy: need(1)?,
            dissipation: need(2)?,
            e_hat: field(3)?,
            moment_qa: need(4)?,
            moment_r: need(5)?,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadySidecar {
    pub x_lo: Option<f64>,
    pub x_hi: Option<f64>,
    pub x_zero: Option<f64>,
    pub kind: SteadyKind,
}

impl From<&SteadyState> for SteadySidecar {
    fn from(s: &SteadyState) -> Self {
        Self {
            x_lo: Some(s.x_lo),
            x_hi: Some(s.x_hi),
            x_zero: Some(s.x_zero),
            kind: s.kind,
        }
    }
}

/// `<stem>.csv` and `<stem>.json` next to each other.
pub fn write_steady(stem: &Path, steady: &SteadyState) -> Result<(PathBuf, PathBuf)> {
    let csv_path = stem.with_extension("csv");
    write_inverse_cdf(&csv_path, &steady.x_star)?;
    let json_path = stem.with_extension("json");
    write_sidecar(&json_path, &SteadySidecar::from(steady))?;
    Ok((csv_path, json_path))
}

pub fn write_sidecar(path: &Path, sidecar: &SteadySidecar) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(sidecar)? + "\n"))
}
