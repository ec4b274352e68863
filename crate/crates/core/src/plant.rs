//! Surrogate thin-layer reactor: pH relaxes toward an equilibrium set by CO₂
//! injection, irradiance and biomass, while biomass grows with light.
//!
//! pH follows a first-order lag toward
//!
//! ```text
//! ph_eq = ph_ambient + gain_co2 · absorbed(q) + tau_ph · gain_photo · I · X
//! ```
//!
//! discretized exactly under a zero-order hold, so the step size does not
//! change the trajectory at the sample instants. `absorbed(q) = q / (1 + q / q_half)`
//! models gas-transfer saturation at high flows; with `co2_half_flow = None`
//! the equilibrium is affine in `q`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// RNG stream reserved for sensor noise. Other consumers must pick a
/// different stream so that adding one does not shift the others.
pub const NOISE_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantParams {
    /// pH time constant [s].
    pub tau_ph: f64,
    /// Small-signal static pH change per L/min of CO₂ (negative).
    pub gain_co2: f64,
    /// pH rise rate per W/m² per g/L [pH/(s·W/m²·g/L)].
    pub gain_photo: f64,
    /// Maximum specific growth rate [1/s].
    pub mu_max: f64,
    /// Half-saturation irradiance of the growth law [W/m²].
    pub light_half_sat: f64,
    /// Flow at which gas transfer efficiency has dropped to 50 % [L/min].
    pub co2_half_flow: Option<f64>,
    /// Zero-input equilibrium pH.
    pub ph_ambient: f64,
    pub ph_min: f64,
    pub ph_max: f64,
    /// Weight of the pH blend toward `ph_ambient` on dilution. The real
    /// reactor's response to dilution is not known; treat this as a guess.
    pub dilution_ph_weight: f64,
    /// Sensor noise standard deviation [pH].
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for PlantParams {
    fn default() -> Self {
        PlantParams {
            tau_ph: 180.0,
            gain_co2: -0.09,
            gain_photo: 1.2e-6,
            mu_max: 2.0e-6,
            light_half_sat: 200.0,
            co2_half_flow: Some(10.0),
            ph_ambient: 7.9,
            ph_min: 6.0,
            ph_max: 10.5,
            dilution_ph_weight: 1.0,
            noise_std: 0.005,
            seed: 0,
        }
    }
}

impl PlantParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("tau_ph", self.tau_ph),
            ("gain_co2", self.gain_co2),
            ("gain_photo", self.gain_photo),
            ("mu_max", self.mu_max),
            ("light_half_sat", self.light_half_sat),
            ("ph_ambient", self.ph_ambient),
            ("ph_min", self.ph_min),
            ("ph_max", self.ph_max),
            ("dilution_ph_weight", self.dilution_ph_weight),
            ("noise_std", self.noise_std),
        ] {
            if !v.is_finite() {
                return Err(Error::param(name, "must be finite"));
            }
        }
        if self.tau_ph <= 0.0 {
            return Err(Error::param("tau_ph", "must be > 0"));
        }
        if self.gain_co2 >= 0.0 {
            return Err(Error::param("gain_co2", "must be < 0 (CO2 acidifies)"));
        }
        if self.gain_photo < 0.0 {
            return Err(Error::param("gain_photo", "must be >= 0"));
        }
        if self.mu_max < 0.0 {
            return Err(Error::param("mu_max", "must be >= 0"));
        }
        if self.light_half_sat <= 0.0 {
            return Err(Error::param("light_half_sat", "must be > 0"));
        }
        if let Some(q_half) = self.co2_half_flow {
            if !(q_half.is_finite() && q_half > 0.0) {
                return Err(Error::param("co2_half_flow", "must be finite and > 0"));
            }
        }
        if !(self.ph_min < self.ph_ambient && self.ph_ambient < self.ph_max) {
            return Err(Error::param(
                "ph_ambient",
                "must satisfy ph_min < ph_ambient < ph_max",
            ));
        }
        if !(0.0..=1.0).contains(&self.dilution_ph_weight) {
            return Err(Error::param("dilution_ph_weight", "must lie in [0, 1]"));
        }
        if self.noise_std < 0.0 {
            return Err(Error::param("noise_std", "must be >= 0"));
        }
        Ok(())
    }

    /// Effectively absorbed CO₂ flow for an injected flow `q`.
    pub fn absorbed_flow(&self, q: f64) -> f64 {
        match self.co2_half_flow {
            Some(q_half) => q / (1.0 + q / q_half),
            None => q,
        }
    }

    /// Equilibrium pH for constant inputs, before clamping.
    pub fn equilibrium_ph(&self, q: f64, irradiance: f64, biomass: f64) -> f64 {
        self.ph_ambient
            + self.gain_co2 * self.absorbed_flow(q)
            + self.tau_ph * self.gain_photo * irradiance * biomass
    }

    fn light_factor(&self, irradiance: f64) -> f64 {
        irradiance / (irradiance + self.light_half_sat)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantState {
    pub ph: f64,
    /// Biomass concentration [g/L].
    pub biomass: f64,
    /// Seconds since scenario start.
    pub t: f64,
    /// Set while communication with the actuator is lost; injection is zero.
    #[serde(default)]
    pub comms_failed: bool,
}

impl PlantState {
    pub fn new(ph: f64, biomass: f64) -> Self {
        PlantState {
            ph,
            biomass,
            t: 0.0,
            comms_failed: false,
        }
    }

    pub fn validate(&self, params: &PlantParams) -> Result<()> {
        ensure_finite("ph", self.ph)?;
        ensure_finite("biomass", self.biomass)?;
        ensure_finite("t", self.t)?;
        if !(params.ph_min..=params.ph_max).contains(&self.ph) {
            return Err(Error::InputDomain(format!(
                "ph {} outside [{}, {}]",
                self.ph, params.ph_min, params.ph_max
            )));
        }
        if self.biomass <= 0.0 {
            return Err(Error::InputDomain("biomass must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    /// Replace `fraction` of the culture volume with fresh medium.
    Dilution {
        fraction: f64,
    },
    CommsFailureStart,
    CommsFailureEnd,
}

impl Event {
    pub fn label(&self) -> String {
        match self {
            Event::Dilution { fraction } => format!("dilution:{fraction}"),
            Event::CommsFailureStart => "comms_failure_start".into(),
            Event::CommsFailureEnd => "comms_failure_end".into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Event::Dilution { fraction } = *self {
            if !(fraction.is_finite() && fraction > 0.0 && fraction < 1.0) {
                return Err(Error::InputDomain(format!(
                    "dilution fraction must lie in (0, 1), got {fraction}"
                )));
            }
        }
        Ok(())
    }
}

/// Advance the plant by `dt` seconds with CO₂ flow `q_co2` [L/min] and
/// irradiance [W/m²] held constant over the step.
pub fn plant_step(
    state: &PlantState,
    params: &PlantParams,
    q_co2: f64,
    irradiance: f64,
    dt: f64,
) -> Result<PlantState> {
    ensure_finite("q_co2", q_co2)?;
    ensure_finite("irradiance", irradiance)?;
    ensure_finite("dt", dt)?;
    ensure_finite("ph", state.ph)?;
    ensure_finite("biomass", state.biomass)?;
    if dt <= 0.0 {
        return Err(Error::InputDomain(format!("dt must be > 0, got {dt}")));
    }
    if q_co2 < 0.0 {
        return Err(Error::InputDomain(format!(
            "q_co2 must be >= 0, got {q_co2}"
        )));
    }
    if irradiance < 0.0 {
        return Err(Error::InputDomain(format!(
            "irradiance must be >= 0, got {irradiance}"
        )));
    }

    let q = if state.comms_failed { 0.0 } else { q_co2 };
    let ph_eq = params.equilibrium_ph(q, irradiance, state.biomass);
    let decay = (-dt / params.tau_ph).exp();
    let ph = (ph_eq + (state.ph - ph_eq) * decay).clamp(params.ph_min, params.ph_max);
    let growth = params.mu_max * params.light_factor(irradiance) * dt;
    Ok(PlantState {
        ph,
        biomass: state.biomass * growth.exp(),
        t: state.t + dt,
        comms_failed: state.comms_failed,
    })
}

pub fn apply_event(state: &PlantState, params: &PlantParams, event: &Event) -> Result<PlantState> {
    event.validate()?;
    let mut next = *state;
    match *event {
        Event::Dilution { fraction } => {
            next.biomass *= 1.0 - fraction;
            let w = fraction * params.dilution_ph_weight;
            next.ph =
                (state.ph + w * (params.ph_ambient - state.ph)).clamp(params.ph_min, params.ph_max);
        }
        Event::CommsFailureStart => next.comms_failed = true,
        Event::CommsFailureEnd => next.comms_failed = false,
    }
    Ok(next)
}

/// Sensor reading: true pH plus seeded Gaussian noise, clamped to the
/// plant bounds. The plant state itself stays noise-free.
pub fn measure(state: &PlantState, params: &PlantParams, rng: &mut ChaCha8Rng) -> f64 {
    if params.noise_std == 0.0 {
        return state.ph;
    }
    let noise = Normal::new(0.0, params.noise_std)
        .expect("noise_std validated")
        .sample(rng);
    (state.ph + noise).clamp(params.ph_min, params.ph_max)
}

pub fn noise_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(NOISE_STREAM);
    rng
}

/// A plant instance bundling parameters, state and its noise stream.
#[derive(Debug, Clone)]
pub struct Plant {
    params: PlantParams,
    state: PlantState,
    rng: ChaCha8Rng,
}

impl Plant {
    pub fn new(params: PlantParams, initial: PlantState) -> Result<Self> {
        params.validate()?;
        initial.validate(&params)?;
        let rng = noise_rng(params.seed);
        Ok(Plant {
            params,
            state: initial,
            rng,
        })
    }

    pub fn params(&self) -> &PlantParams {
        &self.params
    }

    pub fn state(&self) -> &PlantState {
        &self.state
    }

    pub fn measure(&mut self) -> f64 {
        measure(&self.state, &self.params, &mut self.rng)
    }

    pub fn step(&mut self, q_co2: f64, irradiance: f64, dt: f64) -> Result<()> {
        self.state = plant_step(&self.state, &self.params, q_co2, irradiance, dt)?;
        Ok(())
    }

    pub fn apply_event(&mut self, event: &Event) -> Result<()> {
        self.state = apply_event(&self.state, &self.params, event)?;
        Ok(())
    }
}
