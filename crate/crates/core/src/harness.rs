//! Fixed-step closed-loop execution of a scenario.
//!
//! Every tick: apply events scheduled up to now, evaluate irradiance, step
//! the activation gate (resetting the controller on activation), read the
//! sensor, compute the command (zero while inactive), mask it while the
//! actuator link is down, log the row, then advance the plant by `dt`.

use std::collections::BTreeMap;

use crate::baseline::{activation_step, onoff_step, OnOffParams, Transition};
use crate::detrend::DetrendEsc;
use crate::error::{Error, Result};
use crate::esc::{ClassicEsc, EscParams};
use crate::metrics::{day_of, BiomassSeries, MetricsReport};
use crate::plant::{Event, Plant, PlantParams};
use crate::runlog::{LogMeta, RunLog, RunRow};
use crate::scenario::{ControllerSpec, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlOutput {
    pub q_cmd: f64,
    pub theta_hat: Option<f64>,
    pub zeta_hat: Option<f64>,
    pub trend_or_eta: Option<f64>,
    pub q_ff: Option<f64>,
    pub fault: bool,
}

/// Any of the three controllers behind a uniform interface.
#[derive(Debug, Clone)]
pub enum Controller {
    OnOff {
        params: OnOffParams,
        injecting: bool,
    },
    Classic {
        esc: ClassicEsc,
        reset_on_activation: bool,
    },
    Detrend(DetrendEsc),
}

impl Controller {
    pub fn from_spec(spec: &ControllerSpec, dt: f64) -> Result<Self> {
        Ok(match *spec {
            ControllerSpec::OnOff(params) => {
                params.validate()?;
                Controller::OnOff {
                    params,
                    injecting: false,
                }
            }
            ControllerSpec::EscClassic(c) => Controller::Classic {
                esc: ClassicEsc::new(EscParams { dt, ..c.esc }, c.cost)?,
                reset_on_activation: c.reset_on_activation,
            },
            ControllerSpec::EscDetrend(mut p) => {
                p.esc.dt = dt;
                Controller::Detrend(DetrendEsc::new(p)?)
            }
        })
    }

    pub fn on_activation(&mut self) {
        match self {
            Controller::OnOff { injecting, .. } => *injecting = false,
            Controller::Classic {
                esc,
                reset_on_activation,
            } => {
                if *reset_on_activation {
                    esc.reset();
                }
            }
            Controller::Detrend(c) => {
                if c.params().reset_on_activation {
                    c.activation_reset();
                }
            }
        }
    }

    /// Inactive tick: command zero, controller clocks keep running.
    pub fn idle(&mut self) -> ControlOutput {
        match self {
            Controller::OnOff { injecting, .. } => {
                *injecting = false;
                ControlOutput::default()
            }
            Controller::Classic { esc, .. } => {
                esc.idle();
                let s = esc.state();
                ControlOutput {
                    q_cmd: 0.0,
                    theta_hat: Some(s.theta_hat),
                    zeta_hat: Some(s.zeta_hat),
                    trend_or_eta: Some(s.eta),
                    q_ff: None,
                    fault: false,
                }
            }
            Controller::Detrend(c) => {
                c.idle();
                let s = c.state();
                ControlOutput {
                    q_cmd: 0.0,
                    theta_hat: Some(s.theta_hat),
                    zeta_hat: Some(s.zeta_hat),
                    trend_or_eta: Some(s.eta),
                    q_ff: Some(0.0),
                    fault: false,
                }
            }
        }
    }

    pub fn step(&mut self, ph: f64, irradiance: f64) -> ControlOutput {
        match self {
            Controller::OnOff { params, injecting } => {
                let (out, q) = onoff_step(*injecting, ph, params);
                *injecting = out.injecting;
                ControlOutput {
                    q_cmd: q,
                    fault: out.fault,
                    ..ControlOutput::default()
                }
            }
            Controller::Classic { esc, .. } => {
                // The valve cannot deliver negative flow.
                let u = esc.step(ph).max(0.0);
                let s = esc.state();
                ControlOutput {
                    q_cmd: u,
                    theta_hat: Some(s.theta_hat),
                    zeta_hat: Some(s.zeta_hat),
                    trend_or_eta: Some(s.eta),
                    q_ff: None,
                    fault: s.fault,
                }
            }
            Controller::Detrend(c) => {
                let out = c.step(ph, irradiance);
                let s = c.state();
                ControlOutput {
                    q_cmd: out.q_cmd,
                    theta_hat: Some(s.theta_hat),
                    zeta_hat: Some(s.zeta_hat),
                    trend_or_eta: Some(out.trend),
                    q_ff: Some(out.q_ff),
                    fault: out.fault,
                }
            }
        }
    }
}

fn plant_for(scenario: &Scenario) -> Result<Plant> {
    let params = PlantParams {
        seed: scenario.seed,
        ..scenario.plant.clone()
    };
    Plant::new(params, scenario.initial.to_state())
}

/// Execute a scenario. Produces `floor(duration / dt) + 1` rows.
pub fn run(scenario: &Scenario) -> Result<RunLog> {
    scenario.validate()?;
    let profile = scenario.profile()?;
    let dt = scenario.dt_s;
    let mut plant = plant_for(scenario)?;
    let mut controller = Controller::from_spec(&scenario.controller, dt)?;
    let mut events: &[_] = &scenario.events;
    let mut active = false;
    let n = scenario.n_steps();
    let mut rows = Vec::with_capacity(n + 1);

    for k in 0..=n {
        let t = k as f64 * dt;
        let mut labels: Vec<String> = Vec::new();
        while let Some((ev, rest)) = events.split_first() {
            if ev.t_s > t + 1e-9 {
                break;
            }
            plant.apply_event(&ev.event)?;
            labels.push(ev.event.label());
            events = rest;
        }

        let irradiance = profile.at(t);
        let (now_active, transition) = activation_step(active, irradiance, &scenario.activation);
        active = now_active;
        if transition == Some(Transition::Activated) {
            controller.on_activation();
        }
        let ph = plant.measure();
        let out = if active {
            controller.step(ph, irradiance)
        } else {
            controller.idle()
        };
        let q_applied = if plant.state().comms_failed {
            0.0
        } else {
            out.q_cmd
        };

        rows.push(RunRow {
            t,
            irradiance,
            ph,
            q_cmd: out.q_cmd,
            q_applied,
            active,
            theta_hat: out.theta_hat,
            zeta_hat: out.zeta_hat,
            trend_or_eta: out.trend_or_eta,
            q_ff: out.q_ff,
            fault: out.fault,
            event: (!labels.is_empty()).then(|| labels.join(";")),
            biomass: plant.state().biomass,
        });
        if k < n {
            plant.step(q_applied, irradiance, dt)?;
        }
    }

    Ok(RunLog {
        meta: LogMeta {
            controller: scenario.controller.id().to_string(),
            seed: scenario.seed,
            scenario_hash: scenario.hash(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
        rows,
    })
}

/// Average true biomass per day over the active samples, falling back to
/// all samples of a day without activity.
pub fn biomass_series(log: &RunLog) -> BiomassSeries {
    let mut active: BTreeMap<i64, (f64, usize)> = BTreeMap::new();
    let mut all: BTreeMap<i64, (f64, usize)> = BTreeMap::new();
    for r in log.rows.iter().filter(|r| r.biomass.is_finite()) {
        let day = day_of(r.t);
        let e = all.entry(day).or_default();
        e.0 += r.biomass;
        e.1 += 1;
        if r.active {
            let e = active.entry(day).or_default();
            e.0 += r.biomass;
            e.1 += 1;
        }
    }
    BiomassSeries(
        all.into_iter()
            .map(|(day, (sum, n))| {
                let (s, c) = active.get(&day).copied().unwrap_or((sum, n));
                (day, s / c as f64)
            })
            .collect(),
    )
}

#[derive(Debug, Clone)]
pub struct PairResult {
    pub esc: RunLog,
    pub onoff: RunLog,
    pub esc_biomass: BiomassSeries,
    pub onoff_biomass: BiomassSeries,
    pub report: MetricsReport,
}

/// Run the template's controller and the on-off baseline on identical
/// conditions (seed, plant, irradiance, events) and compare them.
pub fn run_pair(template: &Scenario) -> Result<PairResult> {
    template.validate()?;
    if matches!(template.controller, ControllerSpec::OnOff(_)) {
        return Err(Error::Scenario(
            "paired runs need an ESC controller in the template".into(),
        ));
    }
    let baseline = template.with_baseline_controller();
    let (esc, onoff) = std::thread::scope(|s| {
        let a = s.spawn(|| run(template));
        let b = s.spawn(|| run(&baseline));
        (
            a.join().expect("esc run panicked"),
            b.join().expect("on-off run panicked"),
        )
    });
    let (esc, onoff) = (esc?, onoff?);
    let esc_biomass = biomass_series(&esc);
    let onoff_biomass = biomass_series(&onoff);
    let report = MetricsReport::compare(
        &esc.meta.controller,
        &esc.records(),
        Some(&esc_biomass),
        &onoff.meta.controller,
        &onoff.records(),
        Some(&onoff_biomass),
        &template.metrics,
    )?;
    Ok(PairResult {
        esc,
        onoff,
        esc_biomass,
        onoff_biomass,
        report,
    })
}

/// Scheduled events that landed on each row, for checks on event columns.
pub fn event_column(log: &RunLog) -> Vec<Option<String>> {
    log.rows.iter().map(|r| r.event.clone()).collect()
}

pub fn is_comms_event(e: &Event) -> bool {
    matches!(e, Event::CommsFailureStart | Event::CommsFailureEnd)
}
