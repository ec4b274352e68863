//! Performance indicators over the active control windows and the
//! two-controller comparison report.
//!
//! Integrals use the trapezoid rule over consecutive sample pairs that are
//! both active, so gaps between active intervals contribute nothing. A pair
//! is credited to the day of its left sample, which keeps per-day totals
//! additive.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::irradiance::SECONDS_PER_DAY;

/// One timestamped row of a closed-loop log.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub t: f64,
    pub irradiance: f64,
    pub ph: f64,
    /// Flow actually delivered to the reactor [L/min].
    pub q_co2: f64,
    pub active: bool,
    pub day_index: i64,
    pub event: Option<String>,
}

pub fn day_of(t: f64) -> i64 {
    (t / SECONDS_PER_DAY).floor() as i64
}

/// Check ordering and flow sign of a log.
pub fn validate_records(records: &[SampleRecord]) -> Result<()> {
    for w in records.windows(2) {
        if !(w[1].t > w[0].t) {
            return Err(Error::Structural(format!(
                "log timestamps must increase: {} after {}",
                w[1].t, w[0].t
            )));
        }
    }
    if let Some(r) = records.iter().find(|r| !(r.q_co2 >= 0.0)) {
        return Err(Error::Structural(format!("negative flow at t = {}", r.t)));
    }
    Ok(())
}

/// Integral result that remembers whether any active sample contributed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gated {
    pub value: f64,
    /// True when the log held no active interval; `value` is then 0.
    pub no_active_samples: bool,
}

fn active_trapezoid<F>(records: &[SampleRecord], f: F) -> Gated
where
    F: Fn(&SampleRecord) -> f64,
{
    let mut value = 0.0;
    let mut any = false;
    for w in records.windows(2) {
        if w[0].active && w[1].active {
            value += 0.5 * (f(&w[0]) + f(&w[1])) * (w[1].t - w[0].t);
            any = true;
        }
    }
    Gated {
        value,
        no_active_samples: !any,
    }
}

/// Integral of `|pH - ph_sp|` over active time [pH·min].
pub fn iae(records: &[SampleRecord], ph_sp: f64) -> Gated {
    let g = active_trapezoid(records, |r| (r.ph - ph_sp).abs());
    Gated {
        value: g.value / 60.0,
        ..g
    }
}

/// Integral of the delivered flow over active time [L].
pub fn co2_consumption(records: &[SampleRecord]) -> Gated {
    let g = active_trapezoid(records, |r| r.q_co2);
    Gated {
        value: g.value / 60.0,
        ..g
    }
}

/// Integral of irradiance over active time [W/m²·s].
pub fn irradiance_integral(records: &[SampleRecord]) -> Gated {
    active_trapezoid(records, |r| r.irradiance)
}

/// CO₂ per unit biomass concentration [L per g/L].
pub fn eta_bio(co2_liters: f64, x_avg: f64) -> Result<f64> {
    if !(x_avg.is_finite() && x_avg > 0.0) {
        return Err(Error::InputDomain(format!(
            "biomass must be > 0, got {x_avg}"
        )));
    }
    Ok(co2_liters / x_avg)
}

/// How the irradiance integral is turned into the denominator of the
/// irradiance-normalised CO₂ metric.
///
/// The denominator is `∫I dt / irradiance_time_s`. With the default of
/// 36 000 s (ten hours, a typical active day) the metric is numerically the
/// CO₂ per mean active irradiance of a ten-hour day, in L/(W/m²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub ph_sp: f64,
    pub irradiance_time_s: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            ph_sp: 8.0,
            irradiance_time_s: 36_000.0,
        }
    }
}

/// `∫q dt / (∫I dt / irradiance_time_s)`, or `None` when no irradiance was
/// integrated.
pub fn eta_irr(records: &[SampleRecord], config: &MetricsConfig) -> Option<f64> {
    let co2 = co2_consumption(records).value;
    let irr = irradiance_integral(records).value;
    (irr > 0.0).then(|| co2 / (irr / config.irradiance_time_s))
}

/// Relative change of `x` against `baseline` in percent; `None` when the
/// baseline is zero.
pub fn delta_pct(x: f64, baseline: f64) -> Option<f64> {
    (baseline != 0.0 && baseline.is_finite() && x.is_finite())
        .then(|| (x - baseline) / baseline.abs() * 100.0)
}

/// Per-day average biomass concentration [g/L].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BiomassSeries(pub BTreeMap<i64, f64>);

impl BiomassSeries {
    pub fn get(&self, day: i64) -> Option<f64> {
        self.0.get(&day).copied()
    }

    pub fn from_reader<R: Read>(reader: R, origin: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            day_index: i64,
            x_avg_gpl: f64,
        }
        let fmt = |reason: String| Error::Format {
            path: origin.to_string(),
            reason,
        };
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut out = BTreeMap::new();
        for (i, row) in rdr.deserialize::<Row>().enumerate() {
            let row = row.map_err(|e| fmt(format!("row {}: {e}", i + 1)))?;
            if !(row.x_avg_gpl.is_finite() && row.x_avg_gpl > 0.0) {
                return Err(fmt(format!("row {}: x_avg_gpl must be > 0", i + 1)));
            }
            out.insert(row.day_index, row.x_avg_gpl);
        }
        Ok(BiomassSeries(out))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(f, &path.display().to_string())
    }

    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "day_index,x_avg_gpl")?;
        for (day, x) in &self.0 {
            writeln!(out, "{day},{x}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DayMetrics {
    pub day_index: i64,
    /// [pH·min]
    pub iae: f64,
    /// [L]
    pub co2: f64,
    /// [L per g/L]
    pub eta_bio: Option<f64>,
    pub eta_co2: Option<f64>,
    pub active_samples: usize,
}

/// Aggregate row: CO₂ is summed over days, the ratio metrics and IAE are
/// averaged over days (the layout of the published comparison table).
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub co2_total: f64,
    pub eta_bio_mean: Option<f64>,
    pub eta_co2_mean: Option<f64>,
    pub iae_mean: f64,
    pub iae_total: f64,
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let defined: Vec<f64> = values.flatten().collect();
    (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
}

impl Summary {
    pub fn from_days(days: &[DayMetrics]) -> Self {
        let n = days.len().max(1) as f64;
        let iae_total: f64 = days.iter().map(|d| d.iae).sum();
        Summary {
            co2_total: days.iter().map(|d| d.co2).sum(),
            eta_bio_mean: mean_defined(days.iter().map(|d| d.eta_bio)),
            eta_co2_mean: mean_defined(days.iter().map(|d| d.eta_co2)),
            iae_mean: iae_total / n,
            iae_total,
        }
    }
}

fn split_days(records: &[SampleRecord]) -> BTreeMap<i64, Vec<SampleRecord>> {
    // Each day's slice also takes the first sample of the next day so the
    // pair straddling midnight is credited to the left day.
    let mut days: BTreeMap<i64, Vec<SampleRecord>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        let entry = days.entry(r.day_index).or_default();
        entry.push(r.clone());
        if let Some(next) = records.get(i + 1) {
            if next.day_index != r.day_index {
                entry.push(next.clone());
            }
        }
    }
    days
}

/// Metrics for every day with active samples; inactive days are skipped with
/// a warning. Missing biomass or irradiance leaves the corresponding ratio
/// undefined and adds a warning.
pub fn day_metrics(
    records: &[SampleRecord],
    biomass: Option<&BiomassSeries>,
    config: &MetricsConfig,
    warnings: &mut Vec<String>,
) -> Vec<DayMetrics> {
    split_days(records)
        .into_iter()
        .filter_map(|(day, rows)| {
            // A lone closing sample at the end of the run spans no interval.
            if rows.len() < 2 {
                return None;
            }
            let co2 = co2_consumption(&rows);
            if co2.no_active_samples {
                warnings.push(format!("day {day}: no active samples, skipped"));
                return None;
            }
            let eta_bio = match biomass.and_then(|b| b.get(day)) {
                Some(x) => eta_bio(co2.value, x).ok(),
                None => {
                    warnings.push(format!("day {day}: no biomass value, CO2/biomass omitted"));
                    None
                }
            };
            let eta_co2 = eta_irr(&rows, config);
            if eta_co2.is_none() {
                warnings.push(format!(
                    "day {day}: zero integrated irradiance, eta_CO2 undefined"
                ));
            }
            let active_samples = rows
                .iter()
                .filter(|r| r.active && r.day_index == day)
                .count();
            Some(DayMetrics {
                day_index: day,
                iae: iae(&rows, config.ph_sp).value,
                co2: co2.value,
                eta_bio,
                eta_co2,
                active_samples,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub label: String,
    pub days: Vec<DayMetrics>,
    pub summary: Summary,
    pub baseline_label: Option<String>,
    pub baseline_days: Option<Vec<DayMetrics>>,
    pub baseline_summary: Option<Summary>,
    pub warnings: Vec<String>,
}

/// Relative changes for one row, in the order CO₂, CO₂/biomass, η_CO₂, IAE.
pub type DeltaRow = [Option<f64>; 4];

fn opt_delta(x: Option<f64>, b: Option<f64>) -> Option<f64> {
    x.zip(b).and_then(|(x, b)| delta_pct(x, b))
}

impl MetricsReport {
    pub fn single(
        label: &str,
        records: &[SampleRecord],
        biomass: Option<&BiomassSeries>,
        config: &MetricsConfig,
    ) -> Result<Self> {
        validate_records(records)?;
        let mut warnings = Vec::new();
        let days = day_metrics(records, biomass, config, &mut warnings);
        let summary = Summary::from_days(&days);
        Ok(MetricsReport {
            label: label.to_string(),
            days,
            summary,
            baseline_label: None,
            baseline_days: None,
            baseline_summary: None,
            warnings,
        })
    }

    /// Compare a log against a baseline log, pairing days by order.
    pub fn compare(
        label: &str,
        records: &[SampleRecord],
        biomass: Option<&BiomassSeries>,
        baseline_label: &str,
        baseline: &[SampleRecord],
        baseline_biomass: Option<&BiomassSeries>,
        config: &MetricsConfig,
    ) -> Result<Self> {
        let mut report = Self::single(label, records, biomass, config)?;
        validate_records(baseline)?;
        let mut warnings = Vec::new();
        let days = day_metrics(baseline, baseline_biomass, config, &mut warnings);
        if days.len() != report.days.len() {
            return Err(Error::Structural(format!(
                "day count mismatch: {} has {} days, {} has {}",
                label,
                report.days.len(),
                baseline_label,
                days.len()
            )));
        }
        report.warnings.extend(
            warnings
                .into_iter()
                .map(|w| format!("{baseline_label}: {w}")),
        );
        report.baseline_summary = Some(Summary::from_days(&days));
        report.baseline_days = Some(days);
        report.baseline_label = Some(baseline_label.to_string());
        Ok(report)
    }

    pub fn day_deltas(&self) -> Option<Vec<DeltaRow>> {
        let base = self.baseline_days.as_ref()?;
        Some(
            self.days
                .iter()
                .zip(base)
                .map(|(x, b)| {
                    [
                        delta_pct(x.co2, b.co2),
                        opt_delta(x.eta_bio, b.eta_bio),
                        opt_delta(x.eta_co2, b.eta_co2),
                        delta_pct(x.iae, b.iae),
                    ]
                })
                .collect(),
        )
    }

    pub fn summary_deltas(&self) -> Option<DeltaRow> {
        let b = self.baseline_summary.as_ref()?;
        let x = &self.summary;
        Some([
            delta_pct(x.co2_total, b.co2_total),
            opt_delta(x.eta_bio_mean, b.eta_bio_mean),
            opt_delta(x.eta_co2_mean, b.eta_co2_mean),
            delta_pct(x.iae_mean, b.iae_mean),
        ])
    }

    /// CSV with one row per day plus a `total_mean` row.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let cell = |v: Option<f64>| v.map(|v| format!("{v:.6}")).unwrap_or_default();
        let compared = self.baseline_days.is_some();
        if compared {
            writeln!(
                out,
                "day,co2_l,co2_baseline_l,co2_delta_pct,\
                 co2_per_biomass,co2_per_biomass_baseline,co2_per_biomass_delta_pct,\
                 eta_co2,eta_co2_baseline,eta_co2_delta_pct,\
                 iae_ph_min,iae_baseline_ph_min,iae_delta_pct"
            )?;
        } else {
            writeln!(out, "day,co2_l,co2_per_biomass,eta_co2,iae_ph_min")?;
        }
        let deltas = self.day_deltas();
        for (i, d) in self.days.iter().enumerate() {
            let values = [Some(d.co2), d.eta_bio, d.eta_co2, Some(d.iae)];
            let mut fields = vec![(i + 1).to_string()];
            match (&self.baseline_days, &deltas) {
                (Some(base), Some(deltas)) => {
                    let b = &base[i];
                    let base_values = [Some(b.co2), b.eta_bio, b.eta_co2, Some(b.iae)];
                    for k in 0..4 {
                        fields.push(cell(values[k]));
                        fields.push(cell(base_values[k]));
                        fields.push(cell(deltas[i][k]));
                    }
                }
                _ => fields.extend(values.iter().map(|v| cell(*v))),
            }
            writeln!(out, "{}", fields.join(","))?;
        }
        let s = &self.summary;
        let values = [
            Some(s.co2_total),
            s.eta_bio_mean,
            s.eta_co2_mean,
            Some(s.iae_mean),
        ];
        let mut fields = vec!["total_mean".to_string()];
        match (&self.baseline_summary, self.summary_deltas()) {
            (Some(b), Some(deltas)) => {
                let base_values = [
                    Some(b.co2_total),
                    b.eta_bio_mean,
                    b.eta_co2_mean,
                    Some(b.iae_mean),
                ];
                for k in 0..4 {
                    fields.push(cell(values[k]));
                    fields.push(cell(base_values[k]));
                    fields.push(cell(deltas[k]));
                }
            }
            _ => fields.extend(values.iter().map(|v| cell(*v))),
        }
        writeln!(out, "{}", fields.join(","))
    }

    /// Aligned text table.
    pub fn to_text(&self) -> String {
        let num = |v: Option<f64>, prec: usize| match v {
            Some(v) => format!("{v:.prec$}"),
            None => "n/a".to_string(),
        };
        let groups = [
            ("CO2 [L]", 0usize),
            ("CO2/Biomass [L/g]", 1),
            ("eta_CO2 [L/(W/m2)]", 3),
            ("IAE [pH*min]", 2),
        ];
        let compared = self.baseline_days.is_some();
        let width = 10;
        let mut s = String::new();
        let group_width = if compared { 3 * width } else { width };
        let _ = write!(s, "{:<12}", "");
        for (name, _) in groups {
            let _ = write!(s, "{name:>group_width$}");
        }
        s.push('\n');
        let _ = write!(s, "{:<12}", "Day");
        for _ in groups {
            let _ = write!(s, "{:>width$}", truncate(&self.label, width - 1));
            if compared {
                let base = self.baseline_label.as_deref().unwrap_or("baseline");
                let _ = write!(
                    s,
                    "{:>width$}{:>width$}",
                    truncate(base, width - 1),
                    "Delta[%]"
                );
            }
        }
        s.push('\n');
        let rule = "-".repeat(12 + 4 * group_width);
        s.push_str(&rule);
        s.push('\n');

        let row = |s: &mut String,
                   name: &str,
                   x: [Option<f64>; 4],
                   b: Option<[Option<f64>; 4]>,
                   d: Option<DeltaRow>| {
            let _ = write!(s, "{name:<12}");
            for (k, (_, prec)) in groups.iter().enumerate() {
                let _ = write!(s, "{:>width$}", num(x[k], *prec));
                if let (Some(b), Some(d)) = (b, d) {
                    let _ = write!(s, "{:>width$}{:>width$}", num(b[k], *prec), num(d[k], 1));
                }
            }
            s.push('\n');
        };
        let deltas = self.day_deltas();
        for (i, d) in self.days.iter().enumerate() {
            let x = [Some(d.co2), d.eta_bio, d.eta_co2, Some(d.iae)];
            let b = self.baseline_days.as_ref().map(|base| {
                [
                    Some(base[i].co2),
                    base[i].eta_bio,
                    base[i].eta_co2,
                    Some(base[i].iae),
                ]
            });
            row(
                &mut s,
                &(i + 1).to_string(),
                x,
                b,
                deltas.as_ref().map(|d| d[i]),
            );
        }
        s.push_str(&rule);
        s.push('\n');
        let sm = &self.summary;
        let x = [
            Some(sm.co2_total),
            sm.eta_bio_mean,
            sm.eta_co2_mean,
            Some(sm.iae_mean),
        ];
        let b = self.baseline_summary.as_ref().map(|b| {
            [
                Some(b.co2_total),
                b.eta_bio_mean,
                b.eta_co2_mean,
                Some(b.iae_mean),
            ]
        });
        row(&mut s, "Total/Mean", x, b, self.summary_deltas());
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        s
    }
}

fn truncate(s: &str, n: usize) -> &str {
    match s.char_indices().nth(n) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}
