//! Scenario files: JSON documents describing one closed-loop experiment.
//! The schema is documented in `docs/scenario-schema.md`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baseline::{ActivationParams, OnOffParams};
use crate::detrend::DetrendParams;
use crate::error::{Error, Result};
use crate::esc::{CostSpec, EscParams, DEFAULT_DT};
use crate::irradiance::{CloudEvent, IrradianceProfile, ProfileSpec, SECONDS_PER_DAY};
use crate::metrics::MetricsConfig;
use crate::plant::{Event, PlantParams, PlantState};
use crate::sysid::ExcitationSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialState {
    pub ph: f64,
    pub biomass: f64,
}

impl Default for InitialState {
    fn default() -> Self {
        InitialState {
            ph: 7.9,
            biomass: 1.5,
        }
    }
}

impl InitialState {
    pub fn to_state(self) -> PlantState {
        PlantState::new(self.ph, self.biomass)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassicSpec {
    pub esc: EscParams,
    pub cost: CostSpec,
    pub reset_on_activation: bool,
}

impl Default for ClassicSpec {
    fn default() -> Self {
        ClassicSpec {
            esc: EscParams::default(),
            cost: CostSpec::default(),
            reset_on_activation: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ControllerSpec {
    OnOff(OnOffParams),
    EscClassic(ClassicSpec),
    EscDetrend(DetrendParams),
}

impl ControllerSpec {
    pub fn id(&self) -> &'static str {
        match self {
            ControllerSpec::OnOff(_) => "on_off",
            ControllerSpec::EscClassic(_) => "esc_classic",
            ControllerSpec::EscDetrend(_) => "esc_detrend",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduledEvent {
    pub t_s: f64,
    pub event: Event,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub duration_s: f64,
    #[serde(default = "default_dt")]
    pub dt_s: f64,
    #[serde(default)]
    pub seed: u64,
    pub irradiance: ProfileSpec,
    #[serde(default)]
    pub plant: PlantParams,
    #[serde(default)]
    pub initial: InitialState,
    pub controller: ControllerSpec,
    /// On-off arm used by paired runs.
    #[serde(default)]
    pub baseline: OnOffParams,
    #[serde(default)]
    pub activation: ActivationParams,
    #[serde(default)]
    pub events: Vec<ScheduledEvent>,
    #[serde(default)]
    pub metrics: MetricsConfig,
    #[serde(default)]
    pub excitation: ExcitationSpec,
    /// Directory that relative trace paths are resolved against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

fn prefixed(prefix: &str, err: Error) -> Error {
    match err {
        Error::InvalidParam { field, reason } => Error::InvalidParam {
            field: format!(
                "{prefix}.{}",
                field.trim_start_matches(&format!("{prefix}."))
            ),
            reason,
        },
        other => other,
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Scenario(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut s = Self::from_json(&text).map_err(|e| match e {
            Error::Scenario(msg) => Error::Scenario(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        s.base_dir = path.parent().map(Path::to_path_buf);
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("scenario serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn n_steps(&self) -> usize {
        (self.duration_s / self.dt_s + 1e-9).floor() as usize
    }

    /// Check every invariant, reporting the offending field path.
    pub fn validate(&self) -> Result<()> {
        if !(self.dt_s.is_finite() && self.dt_s > 0.0) {
            return Err(Error::param("dt_s", "must be > 0"));
        }
        if !(self.duration_s.is_finite() && self.duration_s >= self.dt_s) {
            return Err(Error::param("duration_s", "must be >= dt_s"));
        }
        self.plant.validate().map_err(|e| prefixed("plant", e))?;
        self.initial
            .to_state()
            .validate(&self.plant)
            .map_err(|e| Error::param("initial", e.to_string()))?;
        match &self.controller {
            ControllerSpec::OnOff(p) => p.validate().map_err(|e| prefixed("controller", e))?,
            ControllerSpec::EscClassic(c) => {
                let esc = EscParams {
                    dt: self.dt_s,
                    ..c.esc
                };
                esc.validate().map_err(|e| prefixed("controller.esc", e))?;
                self.check_setpoint(c.cost.ph_sp)?;
            }
            ControllerSpec::EscDetrend(d) => {
                let esc = EscParams {
                    dt: self.dt_s,
                    ..d.esc
                };
                esc.validate().map_err(|e| prefixed("controller.esc", e))?;
                d.feedforward
                    .validate()
                    .map_err(|e| prefixed("controller", e))?;
                d.saturation
                    .validate()
                    .map_err(|e| prefixed("controller", e))?;
                self.check_setpoint(d.cost.ph_sp)?;
            }
        }
        self.baseline.validate()?;
        self.activation.validate()?;
        if !(self.metrics.irradiance_time_s.is_finite() && self.metrics.irradiance_time_s > 0.0) {
            return Err(Error::param("metrics.irradiance_time_s", "must be > 0"));
        }
        for (i, ev) in self.events.iter().enumerate() {
            if !(ev.t_s.is_finite() && (0.0..=self.duration_s).contains(&ev.t_s)) {
                return Err(Error::param(
                    format!("events[{i}].t_s"),
                    "must lie within [0, duration_s]",
                ));
            }
            if i > 0 && ev.t_s < self.events[i - 1].t_s {
                return Err(Error::param(
                    format!("events[{i}].t_s"),
                    "events must be sorted by t_s",
                ));
            }
            ev.event
                .validate()
                .map_err(|e| Error::param(format!("events[{i}].event"), e.to_string()))?;
        }
        self.profile()?;
        Ok(())
    }

    fn check_setpoint(&self, ph_sp: f64) -> Result<()> {
        if !(ph_sp > self.plant.ph_min && ph_sp < self.plant.ph_max) {
            return Err(Error::param(
                "controller.cost.ph_sp",
                "must lie within the plant pH bounds",
            ));
        }
        Ok(())
    }

    pub fn profile(&self) -> Result<IrradianceProfile> {
        IrradianceProfile::from_spec(&self.irradiance, self.base_dir.as_deref())
            .map_err(|e| prefixed("irradiance", e))
    }

    /// Copy with the controller swapped for the on-off baseline.
    pub fn with_baseline_controller(&self) -> Self {
        Scenario {
            controller: ControllerSpec::OnOff(self.baseline),
            ..self.clone()
        }
    }

    /// Three days of outdoor-like operation with the detrending ESC:
    /// clear first and third days, passing clouds on day two and a short
    /// actuator communication loss on day three.
    pub fn default_three_day() -> Self {
        let day = SECONDS_PER_DAY;
        let cloud = |h: f64, minutes: f64, transmittance: f64| CloudEvent {
            start_s: day + h * 3600.0,
            duration_s: minutes * 60.0,
            transmittance,
        };
        Scenario {
            duration_s: 3.0 * day,
            dt_s: DEFAULT_DT,
            seed: 42,
            irradiance: ProfileSpec::Cloudy {
                peak: 900.0,
                sunrise_h: 6.0,
                sunset_h: 20.0,
                clouds: vec![
                    cloud(10.5, 40.0, 0.5),
                    cloud(13.0, 25.0, 0.3),
                    cloud(15.5, 60.0, 0.6),
                ],
            },
            plant: PlantParams::default(),
            initial: InitialState::default(),
            controller: ControllerSpec::EscDetrend(DetrendParams::default()),
            baseline: OnOffParams::default(),
            activation: ActivationParams::default(),
            events: vec![
                ScheduledEvent {
                    t_s: 2.0 * day + 11.0 * 3600.0,
                    event: Event::CommsFailureStart,
                },
                ScheduledEvent {
                    t_s: 2.0 * day + 11.0 * 3600.0 + 1200.0,
                    event: Event::CommsFailureEnd,
                },
            ],
            metrics: MetricsConfig::default(),
            excitation: ExcitationSpec::default(),
            base_dir: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_template_validates() {
        Scenario::default_three_day().validate().unwrap();
    }

    #[test]
    fn json_round_trip() {
        let s = Scenario::default_three_day();
        let back = Scenario::from_json(&s.to_json()).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.hash(), s.hash());
    }

    #[test]
    fn minimal_file_uses_defaults() {
        let s = Scenario::from_json(
            r#"{"duration_s": 60, "irradiance": {"type": "constant", "value": 0},
                "controller": {"type": "on_off"}}"#,
        )
        .unwrap();
        assert_eq!(s.dt_s, 10.0);
        assert_eq!(s.controller, ControllerSpec::OnOff(OnOffParams::default()));
        s.validate().unwrap();
    }

    #[test]
    fn detrend_fields_parse() {
        let s = Scenario::from_json(
            r#"{"duration_s": 60, "irradiance": {"type": "constant", "value": 0},
                "controller": {"type": "esc_detrend", "reset_on_activation": false,
                               "esc": {"amplitude": 0.5}, "feedforward": {"k_ff": 0.0}}}"#,
        )
        .unwrap();
        let ControllerSpec::EscDetrend(d) = s.controller else {
            panic!("wrong variant")
        };
        assert!(!d.reset_on_activation);
        assert_eq!(d.esc.amplitude, 0.5);
        assert_eq!(d.feedforward.k_ff, 0.0);
    }

    #[test]
    fn unknown_fields_rejected() {
        let err = Scenario::from_json(
            r#"{"duration_s": 60, "irradiance": {"type": "constant", "value": 0},
                "controller": {"type": "on_off"}, "bogus": 1}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("bogus"));
    }

    #[test]
    fn field_paths_in_errors() {
        let mut s = Scenario::default_three_day();
        s.plant.tau_ph = -1.0;
        assert!(s
            .validate()
            .unwrap_err()
            .to_string()
            .contains("plant.tau_ph"));

        let mut s = Scenario::default_three_day();
        if let ControllerSpec::EscDetrend(d) = &mut s.controller {
            d.esc.amplitude = 0.0;
        }
        assert!(s
            .validate()
            .unwrap_err()
            .to_string()
            .contains("controller.esc.amplitude"));

        let mut s = Scenario::default_three_day();
        s.events.reverse();
        assert!(s
            .validate()
            .unwrap_err()
            .to_string()
            .contains("events[1].t_s"));

        let mut s = Scenario::default_three_day();
        s.events[0].t_s = 1e9;
        assert!(s.validate().is_err());
    }
}
