//! Command-line front end. Exit status: 0 success, 1 validation or usage
//! error, 2 runtime fault.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::harness::{run, run_pair};
use crate::metrics::{BiomassSeries, MetricsConfig, MetricsReport};
use crate::plant::{Plant, PlantParams, PlantState};
use crate::runlog::RunLog;
use crate::scenario::Scenario;
use crate::sysid::{
    characterize, recommend_dither, write_report, DitherCriteria, DitherRecommendation,
    SurrogateUnderLight,
};

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "ESC_TLR_OUT";

#[derive(Debug, Parser)]
#[command(
    name = "tlr-esc",
    version,
    about = "Extremum seeking pH control simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Overrides {
    /// Output directory (default: $ESC_TLR_OUT or the current directory)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the scenario seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the sampling period [s]
    #[arg(long)]
    dt: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one closed-loop scenario and write its log
    Run {
        scenario: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run the scenario's ESC and the on-off baseline and compare them
    Compare {
        scenario: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Sinusoidal CO2 excitation of the scenario's plant
    Characterize {
        scenario: PathBuf,
        /// Comma-separated excitation periods [s]
        #[arg(long, value_delimiter = ',')]
        periods: Option<Vec<f64>>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Metrics for a run log, optionally against a baseline log
    Metrics {
        /// Run log CSV written by `run` or `compare`
        log: PathBuf,
        /// Baseline run log; adds delta columns to the report
        #[arg(long)]
        baseline: Option<PathBuf>,
        /// Biomass CSV (`day_index,x_avg_gpl`) for the first log
        #[arg(long)]
        biomass: Option<PathBuf>,
        /// Biomass CSV for the baseline log (defaults to --biomass)
        #[arg(long)]
        baseline_biomass: Option<PathBuf>,
        /// pH setpoint used for IAE
        #[arg(long, default_value_t = 8.0)]
        ph_sp: f64,
        /// Time constant turning the irradiance integral into the eta_CO2 denominator [s]
        #[arg(long, default_value_t = 36000.0)]
        irradiance_time_s: f64,
        /// Output directory (default: $ESC_TLR_OUT or the current directory)
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn out_dir(explicit: Option<PathBuf>) -> Result<PathBuf> {
    let dir = explicit
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

fn load_scenario(path: &Path, o: &Overrides) -> Result<Scenario> {
    let mut s = Scenario::load(path)?;
    if let Some(seed) = o.seed {
        s.seed = seed;
    }
    if let Some(dt) = o.dt {
        s.dt_s = dt;
    }
    s.validate()?;
    Ok(s)
}

fn write_file(path: &Path, body: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    body(&mut buf).map_err(|e| Error::io(path, e))?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

fn execute(cmd: Command, stdout: &mut dyn Write) -> Result<()> {
    let say = |stdout: &mut dyn Write, msg: String| {
        let _ = writeln!(stdout, "{msg}");
    };
    match cmd {
        Command::Run {
            scenario,
            overrides,
        } => {
            let s = load_scenario(&scenario, &overrides)?;
            let log = run(&s)?;
            let dir = out_dir(overrides.out)?;
            let path = dir.join("run_log.csv");
            log.save(&path)?;
            say(
                stdout,
                format!("wrote {} ({} rows)", path.display(), log.rows.len()),
            );
        }
        Command::Compare {
            scenario,
            overrides,
        } => {
            let s = load_scenario(&scenario, &overrides)?;
            let pair = run_pair(&s)?;
            let dir = out_dir(overrides.out)?;
            pair.esc.save(&dir.join("esc_log.csv"))?;
            pair.onoff.save(&dir.join("onoff_log.csv"))?;
            write_file(&dir.join("esc_biomass.csv"), |b| pair.esc_biomass.write(b))?;
            write_file(&dir.join("onoff_biomass.csv"), |b| {
                pair.onoff_biomass.write(b)
            })?;
            write_file(&dir.join("report.csv"), |b| pair.report.write_csv(b))?;
            let text = pair.report.to_text();
            write_file(&dir.join("report.txt"), |b| b.write_all(text.as_bytes()))?;
            say(stdout, text);
        }
        Command::Characterize {
            scenario,
            periods,
            overrides,
        } => {
            let mut s = load_scenario(&scenario, &overrides)?;
            if let Some(p) = periods {
                s.excitation.periods = p;
            }
            s.excitation.validate(s.dt_s)?;
            let ex = s.excitation.clone();
            let params = PlantParams {
                seed: s.seed,
                ..s.plant.clone()
            };
            let ph0 = params
                .equilibrium_ph(ex.bias, ex.irradiance, s.initial.biomass)
                .clamp(params.ph_min, params.ph_max);
            let responses = characterize(
                |_| {
                    Ok(SurrogateUnderLight {
                        plant: Plant::new(params.clone(), PlantState::new(ph0, s.initial.biomass))?,
                        irradiance: ex.irradiance,
                    })
                },
                &ex,
                s.dt_s,
            )?;
            let dir = out_dir(overrides.out)?;
            let path = dir.join("characterization.csv");
            write_file(&path, |b| write_report(b, &responses))?;
            let mut text = Vec::new();
            let _ = write_report(&mut text, &responses);
            say(stdout, String::from_utf8_lossy(&text).into_owned());
            match recommend_dither(&responses, &DitherCriteria::default()) {
                Ok(DitherRecommendation::Period(p)) => {
                    say(stdout, format!("recommended dither period: {p} s"))
                }
                Ok(DitherRecommendation::NoneAdmissible) => {
                    say(stdout, "no admissible dither period".into())
                }
                Err(e) => say(stdout, format!("no recommendation: {e}")),
            }
        }
        Command::Metrics {
            log,
            baseline,
            biomass,
            baseline_biomass,
            ph_sp,
            irradiance_time_s,
            out,
        } => {
            let config = MetricsConfig {
                ph_sp,
                irradiance_time_s,
            };
            let main = RunLog::load(&log)?;
            let bio = biomass.as_deref().map(BiomassSeries::load).transpose()?;
            let label = |l: &RunLog, fallback: &str| {
                if l.meta.controller.is_empty() {
                    fallback.to_string()
                } else {
                    l.meta.controller.clone()
                }
            };
            let report = match baseline {
                Some(b) => {
                    let base = RunLog::load(&b)?;
                    let base_bio = match baseline_biomass {
                        Some(p) => Some(BiomassSeries::load(&p)?),
                        None => bio.clone(),
                    };
                    let mut label_b = label(&base, "baseline");
                    let label_a = label(&main, "log");
                    if label_a == label_b {
                        label_b.push_str("_baseline");
                    }
                    MetricsReport::compare(
                        &label_a,
                        &main.records(),
                        bio.as_ref(),
                        &label_b,
                        &base.records(),
                        base_bio.as_ref(),
                        &config,
                    )?
                }
                None => MetricsReport::single(
                    &label(&main, "log"),
                    &main.records(),
                    bio.as_ref(),
                    &config,
                )?,
            };
            let dir = out_dir(out)?;
            write_file(&dir.join("report.csv"), |b| report.write_csv(b))?;
            let text = report.to_text();
            write_file(&dir.join("report.txt"), |b| b.write_all(text.as_bytes()))?;
            say(stdout, text);
        }
    }
    Ok(())
}

/// Parse `args` (including the program name) and execute. Returns the exit status.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{e}");
                    0
                }
                _ => {
                    let _ = write!(stderr, "{e}");
                    1
                }
            };
        }
    };
    match execute(cli.command, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}
