//! CSV output for operation counts, timings and PSF metrics.

use std::io::Write;

use anyhow::Result;
use orthobeam::analysis::{AmbiguityRow, PsfMetrics};
use orthobeam::complexity::OpCountReport;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OpRow {
    pub method: String,
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(rename = "Nb")]
    pub nb: u64,
    #[serde(rename = "L")]
    pub l: Option<u64>,
    pub additions: Option<u64>,
    pub multiplications: Option<u64>,
    pub sqrts: Option<u64>,
    pub total: u64,
    pub median_seconds: Option<f64>,
}

impl OpRow {
    pub fn new(r: &OpCountReport, median_seconds: Option<f64>) -> Self {
        Self {
            method: r.method.name().to_ascii_lowercase(),
            n: r.n,
            nb: r.nb,
            l: r.l,
            additions: r.additions,
            multiplications: r.multiplications,
            sqrts: r.sqrts,
            total: r.total,
            median_seconds,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsfRow {
    pub array: String,
    pub method: String,
    pub mlw_az_deg: f64,
    pub mlw_el_deg: f64,
    pub psll_db: f64,
}

impl From<&PsfMetrics> for PsfRow {
    fn from(m: &PsfMetrics) -> Self {
        Self {
            array: m.kind.to_string(),
            method: m.method.to_string(),
            mlw_az_deg: m.mlw_az_deg,
            mlw_el_deg: m.mlw_el_deg,
            psll_db: m.psll_db,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AmbiguityCsvRow {
    pub array: String,
    pub maxima_above_6db: usize,
    pub ghost_level_db: f64,
    pub ghosts_present: bool,
}

impl From<&AmbiguityRow> for AmbiguityCsvRow {
    fn from(r: &AmbiguityRow) -> Self {
        Self {
            array: r.kind.to_string(),
            maxima_above_6db: r.maxima_above_6db,
            ghost_level_db: r.ghost_level_db,
            ghosts_present: r.ghosts_present,
        }
    }
}

/// Header row plus one line per record.
pub fn write_csv<W: Write, R: Serialize>(out: W, rows: &[R]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_string<R: Serialize>(rows: &[R]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(&mut buf, rows)?;
    Ok(String::from_utf8(buf)?)
}
