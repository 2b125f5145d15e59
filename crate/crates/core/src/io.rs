//! CSV serialization of ensembles and stage traces.
//!
//! Floats are written in scientific notation with 17 significant digits, so
//! reading a file back reproduces every value bit for bit. `-inf` is written
//! literally.

use std::io::{Read, Write};

use crate::ensemble::{CachedLogs, Ensemble};
use crate::error::{Error, Result};
use crate::sampler::StageRecord;
use crate::scalar::Real;

pub const STAGE_HEADER: [&str; 7] = [
    "stage_index",
    "beta",
    "achieved_cov",
    "log_stage_evidence",
    "ess",
    "acceptance_rate",
    "gamma_sq",
];

/// Lossless 17-significant-digit rendering.
pub fn format_float<T: Real>(v: T) -> String {
    format!("{:.16e}", v.as_f64())
}

fn parse_float<T: Real>(s: &str) -> Result<T> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::Io(format!("not a number: {s:?}")))?;
    Ok(T::lit(v))
}

fn io_err(e: impl std::fmt::Display) -> Error {
    Error::Io(e.to_string())
}

pub fn write_stages_csv<T: Real, W: Write>(out: W, stages: &[StageRecord<T>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(STAGE_HEADER).map_err(io_err)?;
    for s in stages {
        w.write_record([
            s.stage_index.to_string(),
            format_float(s.beta),
            format_float(s.achieved_cov),
            format_float(s.log_stage_evidence),
            format_float(s.ess),
            format_float(s.acceptance_rate),
            format_float(s.gamma_sq),
        ])
        .map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn read_stages_csv<T: Real, R: Read>(input: R) -> Result<Vec<StageRecord<T>>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(io_err)?.clone();
    if header.iter().collect::<Vec<_>>() != STAGE_HEADER {
        return Err(Error::Io(format!("unexpected stage header {header:?}")));
    }
    r.records()
        .map(|rec| {
            let rec = rec.map_err(io_err)?;
            let f = |i: usize| parse_float::<T>(&rec[i]);
            Ok(StageRecord {
                stage_index: rec[0].trim().parse().map_err(io_err)?,
                beta: f(1)?,
                achieved_cov: f(2)?,
                log_stage_evidence: f(3)?,
                ess: f(4)?,
                acceptance_rate: f(5)?,
                gamma_sq: f(6)?,
            })
        })
        .collect()
}

pub fn ensemble_header(dim: usize) -> Vec<String> {
    (0..dim)
        .map(|i| format!("x{i}"))
        .chain(["log_prior", "log_like", "log_importance"].map(String::from))
        .collect()
}

/// One row per point: coordinates, then log prior, log likelihood, log importance.
pub fn write_ensemble_csv<T: Real, W: Write>(out: W, e: &Ensemble<T>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ensemble_header(e.dim())).map_err(io_err)?;
    for (p, l) in e.points().iter().zip(e.logs()) {
        let row: Vec<String> = p
            .iter()
            .copied()
            .chain([l.log_prior, l.log_like, l.log_importance])
            .map(format_float)
            .collect();
        w.write_record(row).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn read_ensemble_csv<T: Real, R: Read>(input: R) -> Result<Ensemble<T>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(io_err)?.clone();
    if header.len() < 4 {
        return Err(Error::Io("ensemble file needs coordinates plus three log columns".into()));
    }
    let dim = header.len() - 3;
    if header.iter().collect::<Vec<_>>() != ensemble_header(dim) {
        return Err(Error::Io(format!("unexpected ensemble header {header:?}")));
    }
    let mut points = Vec::new();
    let mut logs = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(io_err)?;
        let vals = rec.iter().map(parse_float::<T>).collect::<Result<Vec<T>>>()?;
        points.push(vals[..dim].to_vec());
        logs.push(CachedLogs {
            log_prior: vals[dim],
            log_like: vals[dim + 1],
            log_importance: vals[dim + 2],
        });
    }
    Ensemble::new(dim, points, logs)
}
