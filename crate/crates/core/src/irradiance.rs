//! Synthetic and recorded solar irradiance profiles.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SECONDS_PER_DAY: f64 = 86_400.0;

/// Temporary attenuation of a profile, e.g. a passing cloud.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CloudEvent {
    pub start_s: f64,
    pub duration_s: f64,
    /// Fraction of irradiance that still reaches the reactor, in [0, 1].
    pub transmittance: f64,
}

/// Irradiance profile as written in a scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSpec {
    /// Half-sine between sunrise and sunset, repeated every day.
    ClearDay {
        peak: f64,
        sunrise_h: f64,
        sunset_h: f64,
    },
    Cloudy {
        peak: f64,
        sunrise_h: f64,
        sunset_h: f64,
        clouds: Vec<CloudEvent>,
    },
    Constant {
        value: f64,
    },
    /// CSV file with header `t_s,irradiance_wm2`.
    Trace {
        file: PathBuf,
    },
}

/// A validated profile ready for evaluation. Trace files are loaded eagerly.
#[derive(Debug, Clone, PartialEq)]
pub enum IrradianceProfile {
    ClearDay {
        peak: f64,
        sunrise_h: f64,
        sunset_h: f64,
    },
    Cloudy {
        peak: f64,
        sunrise_h: f64,
        sunset_h: f64,
        clouds: Vec<CloudEvent>,
    },
    Constant(f64),
    Trace(Vec<(f64, f64)>),
}

fn half_sine(t: f64, peak: f64, sunrise_h: f64, sunset_h: f64) -> f64 {
    let hour = t.rem_euclid(SECONDS_PER_DAY) / 3600.0;
    if hour <= sunrise_h || hour >= sunset_h {
        return 0.0;
    }
    let x = (hour - sunrise_h) / (sunset_h - sunrise_h);
    (peak * (PI * x).sin()).max(0.0)
}

impl IrradianceProfile {
    /// Resolve a spec, reading trace files relative to `base_dir`.
    pub fn from_spec(spec: &ProfileSpec, base_dir: Option<&Path>) -> Result<Self> {
        let check_day = |peak: f64, sunrise_h: f64, sunset_h: f64| -> Result<()> {
            if !(peak.is_finite() && peak >= 0.0) {
                return Err(Error::param("irradiance.peak", "must be finite and >= 0"));
            }
            if !(0.0..24.0).contains(&sunrise_h) || !(sunrise_h < sunset_h && sunset_h <= 24.0) {
                return Err(Error::param(
                    "irradiance.sunrise_h",
                    "need 0 <= sunrise_h < sunset_h <= 24",
                ));
            }
            Ok(())
        };
        match spec {
            ProfileSpec::ClearDay {
                peak,
                sunrise_h,
                sunset_h,
            } => {
                check_day(*peak, *sunrise_h, *sunset_h)?;
                Ok(IrradianceProfile::ClearDay {
                    peak: *peak,
                    sunrise_h: *sunrise_h,
                    sunset_h: *sunset_h,
                })
            }
            ProfileSpec::Cloudy {
                peak,
                sunrise_h,
                sunset_h,
                clouds,
            } => {
                check_day(*peak, *sunrise_h, *sunset_h)?;
                for (i, c) in clouds.iter().enumerate() {
                    if !(c.start_s.is_finite() && c.duration_s.is_finite() && c.duration_s > 0.0) {
                        return Err(Error::param(
                            format!("irradiance.clouds[{i}]"),
                            "start_s must be finite and duration_s > 0",
                        ));
                    }
                    if !(0.0..=1.0).contains(&c.transmittance) {
                        return Err(Error::param(
                            format!("irradiance.clouds[{i}].transmittance"),
                            "must lie in [0, 1]",
                        ));
                    }
                }
                Ok(IrradianceProfile::Cloudy {
                    peak: *peak,
                    sunrise_h: *sunrise_h,
                    sunset_h: *sunset_h,
                    clouds: clouds.clone(),
                })
            }
            ProfileSpec::Constant { value } => {
                if !(value.is_finite() && *value >= 0.0) {
                    return Err(Error::param("irradiance.value", "must be finite and >= 0"));
                }
                Ok(IrradianceProfile::Constant(*value))
            }
            ProfileSpec::Trace { file } => {
                let path = match base_dir {
                    Some(dir) if file.is_relative() => dir.join(file),
                    _ => file.clone(),
                };
                Ok(IrradianceProfile::Trace(load_trace(&path)?))
            }
        }
    }

    /// Irradiance [W/m²] at `t` seconds; never negative.
    pub fn at(&self, t: f64) -> f64 {
        match self {
            IrradianceProfile::ClearDay {
                peak,
                sunrise_h,
                sunset_h,
            } => half_sine(t, *peak, *sunrise_h, *sunset_h),
            IrradianceProfile::Cloudy {
                peak,
                sunrise_h,
                sunset_h,
                clouds,
            } => {
                let clear = half_sine(t, *peak, *sunrise_h, *sunset_h);
                clouds
                    .iter()
                    .filter(|c| t >= c.start_s && t < c.start_s + c.duration_s)
                    .fold(clear, |acc, c| acc * c.transmittance)
            }
            IrradianceProfile::Constant(v) => *v,
            IrradianceProfile::Trace(points) => interpolate(points, t),
        }
    }
}

fn interpolate(points: &[(f64, f64)], t: f64) -> f64 {
    let (first, last) = (points[0], points[points.len() - 1]);
    if t <= first.0 {
        return first.1;
    }
    if t >= last.0 {
        return last.1;
    }
    let idx = points.partition_point(|p| p.0 <= t);
    let (t0, i0) = points[idx - 1];
    let (t1, i1) = points[idx];
    i0 + (i1 - i0) * (t - t0) / (t1 - t0)
}

#[derive(Debug, Deserialize)]
struct TraceRow {
    t_s: f64,
    irradiance_wm2: f64,
}

/// Read an irradiance trace: header `t_s,irradiance_wm2`, strictly
/// increasing `t_s`, nonnegative irradiance.
pub fn load_trace(path: &Path) -> Result<Vec<(f64, f64)>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_trace(file, &path.display().to_string())
}

pub fn parse_trace<R: std::io::Read>(reader: R, origin: &str) -> Result<Vec<(f64, f64)>> {
    let fmt = |reason: String| Error::Format {
        path: origin.to_string(),
        reason,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| fmt(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["t_s", "irradiance_wm2"] {
        return Err(fmt(format!(
            "expected header `t_s,irradiance_wm2`, got `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut points: Vec<(f64, f64)> = Vec::new();
    for (i, row) in rdr.deserialize::<TraceRow>().enumerate() {
        let row = row.map_err(|e| fmt(format!("row {}: {e}", i + 1)))?;
        if !row.t_s.is_finite() || !row.irradiance_wm2.is_finite() || row.irradiance_wm2 < 0.0 {
            return Err(fmt(format!(
                "row {}: values must be finite, irradiance >= 0",
                i + 1
            )));
        }
        if let Some(&(prev, _)) = points.last() {
            if row.t_s <= prev {
                return Err(fmt(format!(
                    "row {}: timestamps must be strictly increasing ({} after {prev})",
                    i + 1,
                    row.t_s
                )));
            }
        }
        points.push((row.t_s, row.irradiance_wm2));
    }
    if points.is_empty() {
        return Err(fmt("trace has no rows".into()));
    }
    Ok(points)
}
