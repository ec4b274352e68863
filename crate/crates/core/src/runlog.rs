//! Closed-loop run logs and their CSV form.
//!
//! Layout: `#`-prefixed metadata lines, then a header with the exact column
//! order of [`COLUMNS`], then one row per tick. Controller internals that do
//! not apply to the logged controller are left empty.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::metrics::{day_of, SampleRecord};

pub const COLUMNS: [&str; 12] = [
    "t_s",
    "irradiance_wm2",
    "ph",
    "q_cmd_lpm",
    "q_applied_lpm",
    "active",
    "theta_hat",
    "zeta_hat",
    "trend_or_eta",
    "q_ff_lpm",
    "fault",
    "event",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub t: f64,
    pub irradiance: f64,
    /// Measured pH.
    pub ph: f64,
    pub q_cmd: f64,
    pub q_applied: f64,
    pub active: bool,
    pub theta_hat: Option<f64>,
    pub zeta_hat: Option<f64>,
    pub trend_or_eta: Option<f64>,
    pub q_ff: Option<f64>,
    pub fault: bool,
    pub event: Option<String>,
    /// True biomass at the sample; kept in memory only.
    pub biomass: f64,
}

impl RunRow {
    pub fn to_record(&self) -> SampleRecord {
        SampleRecord {
            t: self.t,
            irradiance: self.irradiance,
            ph: self.ph,
            q_co2: self.q_applied,
            active: self.active,
            day_index: day_of(self.t),
            event: self.event.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LogMeta {
    pub controller: String,
    pub seed: u64,
    pub scenario_hash: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunLog {
    pub meta: LogMeta,
    pub rows: Vec<RunRow>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

impl RunLog {
    pub fn records(&self) -> Vec<SampleRecord> {
        self.rows.iter().map(RunRow::to_record).collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# tlr-esc run log")?;
        writeln!(out, "# controller: {}", self.meta.controller)?;
        writeln!(out, "# seed: {}", self.meta.seed)?;
        writeln!(out, "# scenario_sha256: {}", self.meta.scenario_hash)?;
        writeln!(out, "# version: {}", self.meta.version)?;
        writeln!(out, "{}", COLUMNS.join(","))?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.t,
                r.irradiance,
                r.ph,
                r.q_cmd,
                r.q_applied,
                flag(r.active),
                opt(r.theta_hat),
                opt(r.zeta_hat),
                opt(r.trend_or_eta),
                opt(r.q_ff),
                flag(r.fault),
                r.event.as_deref().unwrap_or(""),
            )?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(f);
        self.write_csv(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn read_csv<R: Read>(reader: R, origin: &str) -> Result<Self> {
        let fmt = |reason: String| Error::Format {
            path: origin.to_string(),
            reason,
        };
        let mut text = String::new();
        BufReader::new(reader)
            .read_to_string(&mut text)
            .map_err(|e| fmt(e.to_string()))?;
        let mut meta = LogMeta::default();
        for line in text.lines().take_while(|l| l.starts_with('#')) {
            let body = line.trim_start_matches('#').trim();
            if let Some((key, value)) = body.split_once(':') {
                let value = value.trim().to_string();
                match key.trim() {
                    "controller" => meta.controller = value,
                    "seed" => meta.seed = value.parse().unwrap_or_default(),
                    "scenario_sha256" => meta.scenario_hash = value,
                    "version" => meta.version = value,
                    _ => {}
                }
            }
        }

        #[derive(Deserialize)]
        struct Row {
            t_s: f64,
            irradiance_wm2: f64,
            ph: f64,
            q_cmd_lpm: f64,
            q_applied_lpm: f64,
            active: u8,
            theta_hat: Option<f64>,
            zeta_hat: Option<f64>,
            trend_or_eta: Option<f64>,
            q_ff_lpm: Option<f64>,
            fault: u8,
            event: Option<String>,
        }
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let headers = rdr.headers().map_err(|e| fmt(e.to_string()))?.clone();
        if headers.iter().collect::<Vec<_>>() != COLUMNS {
            return Err(fmt(format!("expected columns `{}`", COLUMNS.join(","))));
        }
        let mut rows = Vec::new();
        for (i, row) in rdr.deserialize::<Row>().enumerate() {
            let r = row.map_err(|e| fmt(format!("row {}: {e}", i + 1)))?;
            rows.push(RunRow {
                t: r.t_s,
                irradiance: r.irradiance_wm2,
                ph: r.ph,
                q_cmd: r.q_cmd_lpm,
                q_applied: r.q_applied_lpm,
                active: r.active != 0,
                theta_hat: r.theta_hat,
                zeta_hat: r.zeta_hat,
                trend_or_eta: r.trend_or_eta,
                q_ff: r.q_ff_lpm,
                fault: r.fault != 0,
                event: r.event.filter(|e| !e.is_empty()),
                biomass: f64::NAN,
            });
        }
        Ok(RunLog { meta, rows })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(f, &path.display().to_string())
    }
}

/// Read only the data lines of a log file, ignoring metadata.
pub fn data_lines<R: Read>(reader: R) -> std::io::Result<Vec<String>> {
    BufReader::new(reader)
        .lines()
        .filter(|l| !matches!(l, Ok(s) if s.starts_with('#')))
        .collect()
}
