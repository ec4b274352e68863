//! Classical perturbation-based extremum seeking: sinusoidal dither, washout
//! (high-pass as `J - η` with `η` a first-order low-pass of `J`), demodulation
//! with the reference dither, low-pass gradient estimate and integral
//! adaptation of the operating point.
//!
//! Filters use the exact zero-order-hold pole `exp(-ω·dt)`, so each update is
//! `x += (1 - exp(-ω·dt)) · (input - x)`. The integrator is a forward
//! rectangle rule.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// Default dither period [s]: 15 minutes.
pub const DEFAULT_DITHER_PERIOD: f64 = 900.0;

/// Default sampling period [s].
pub const DEFAULT_DT: f64 = 10.0;

/// Tuning constants of the ESC loop.
///
/// `gain` is the integrator gain `k` in `dθ/dt = k·ζ`. The controller
/// minimizes the cost, so `k` must be negative whenever the demodulated
/// signal is positively correlated with the cost gradient (a plant with no
/// more than 90° phase lag at the dither frequency). For pH plants driven by
/// CO₂ the map from flow to cost already contains the negative plant gain,
/// so the same negative `k` still descends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EscParams {
    /// Dither amplitude `a` [L/min].
    pub amplitude: f64,
    /// Dither angular frequency [rad/s].
    pub omega_d: f64,
    /// Low-pass cutoff of the gradient estimate [rad/s].
    pub omega_l: f64,
    /// Washout cutoff [rad/s].
    pub omega_h: f64,
    /// Adaptation gain `k` [(L/min)/s per unit demodulated cost].
    pub gain: f64,
    /// Operating point after a reset [L/min].
    pub theta_init: f64,
    /// Sampling period [s].
    pub dt: f64,
}

impl Default for EscParams {
    fn default() -> Self {
        let omega_d = TAU / DEFAULT_DITHER_PERIOD;
        EscParams {
            amplitude: 1.0,
            omega_d,
            omega_l: omega_d / 3.0,
            omega_h: omega_d / 5.0,
            gain: -0.3,
            theta_init: 0.0,
            dt: DEFAULT_DT,
        }
    }
}

impl EscParams {
    /// Default filter ratios for a given dither period.
    pub fn with_period(period: f64, amplitude: f64, gain: f64) -> Self {
        let omega_d = TAU / period;
        EscParams {
            amplitude,
            omega_d,
            omega_l: omega_d / 3.0,
            omega_h: omega_d / 5.0,
            gain,
            ..EscParams::default()
        }
    }

    pub fn dither_period(&self) -> f64 {
        TAU / self.omega_d
    }

    /// Number of samples in one dither period, rounded to the nearest integer.
    pub fn samples_per_period(&self) -> usize {
        (self.dither_period() / self.dt).round().max(1.0) as usize
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("amplitude", self.amplitude),
            ("omega_d", self.omega_d),
            ("omega_l", self.omega_l),
            ("omega_h", self.omega_h),
            ("gain", self.gain),
            ("theta_init", self.theta_init),
            ("dt", self.dt),
        ] {
            if !v.is_finite() {
                return Err(Error::param(name, "must be finite"));
            }
        }
        if self.amplitude <= 0.0 {
            return Err(Error::param("amplitude", "must be > 0"));
        }
        if self.dt <= 0.0 {
            return Err(Error::param("dt", "must be > 0"));
        }
        if self.omega_d <= 0.0 {
            return Err(Error::param("omega_d", "must be > 0"));
        }
        if !(self.omega_l > 0.0 && self.omega_l < self.omega_d) {
            return Err(Error::param(
                "omega_l",
                "must satisfy 0 < omega_l < omega_d",
            ));
        }
        if !(self.omega_h > 0.0 && self.omega_h < self.omega_d) {
            return Err(Error::param(
                "omega_h",
                "must satisfy 0 < omega_h < omega_d",
            ));
        }
        if self.dt * self.omega_d >= PI {
            return Err(Error::param(
                "omega_d",
                "dither aliases: dt * omega_d must be < pi",
            ));
        }
        Ok(())
    }

    pub(crate) fn alpha_h(&self) -> f64 {
        -(-self.omega_h * self.dt).exp_m1()
    }

    pub(crate) fn alpha_l(&self) -> f64 {
        -(-self.omega_l * self.dt).exp_m1()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostForm {
    #[default]
    SquaredError,
    AbsError,
}

/// Cost `J = Ψ(pH)` minimized at the setpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostSpec {
    pub ph_sp: f64,
    pub form: CostForm,
}

impl Default for CostSpec {
    fn default() -> Self {
        CostSpec {
            ph_sp: 8.0,
            form: CostForm::SquaredError,
        }
    }
}

pub fn cost_eval(ph: f64, spec: &CostSpec) -> Result<f64> {
    ensure_finite("ph", ph)?;
    let e = ph - spec.ph_sp;
    Ok(match spec.form {
        CostForm::SquaredError => e * e,
        CostForm::AbsError => e.abs(),
    })
}

/// Internal loop state. `eta` is initialized lazily from the first cost
/// sample after a reset, which avoids a washout spike at start-up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EscState {
    pub theta_hat: f64,
    pub zeta_hat: f64,
    pub eta: f64,
    /// Dither phase in [0, 2π).
    pub phase: f64,
    pub t: f64,
    pub eta_ready: bool,
    /// Last emitted command; held on faults.
    pub last_u: f64,
    /// Set when the most recent step rejected its input.
    pub fault: bool,
}

pub fn esc_reset(params: &EscParams) -> EscState {
    EscState {
        theta_hat: params.theta_init,
        zeta_hat: 0.0,
        eta: 0.0,
        phase: 0.0,
        t: 0.0,
        eta_ready: false,
        last_u: params.theta_init,
        fault: false,
    }
}

impl EscState {
    pub fn dither(&self, params: &EscParams) -> f64 {
        params.amplitude * self.phase.sin()
    }

    pub(crate) fn advance_clock(&mut self, params: &EscParams) {
        self.phase = wrap_phase(self.phase + params.omega_d * params.dt);
        self.t += params.dt;
    }

    /// Washout stage: returns `J - η` after updating `η`.
    pub(crate) fn washout(&mut self, params: &EscParams, j: f64) -> f64 {
        if self.eta_ready {
            self.eta = low_pass(self.eta, j, params.alpha_h());
        } else {
            self.eta = j;
            self.eta_ready = true;
        }
        j - self.eta
    }

    /// Demodulate the conditioned cost and low-pass it into `zeta_hat`.
    pub(crate) fn demodulate(&mut self, params: &EscParams, conditioned: f64) {
        let demod = conditioned * self.dither(params);
        self.zeta_hat = low_pass(self.zeta_hat, demod, params.alpha_l());
    }

    pub(crate) fn integrated_theta(&self, params: &EscParams) -> f64 {
        self.theta_hat + params.dt * params.gain * self.zeta_hat
    }
}

/// One step of a first-order low-pass with ZOH coefficient `alpha`.
fn low_pass(y: f64, x: f64, alpha: f64) -> f64 {
    y + alpha * (x - y)
}

fn wrap_phase(phase: f64) -> f64 {
    let p = phase.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs.
    if p >= TAU {
        0.0
    } else {
        p
    }
}

/// One sample of the classical ESC loop. Returns the new state and the
/// command `u = θ̂ + a·sin(φ)`. A non-finite cost leaves the state unchanged
/// apart from the fault flag and repeats the previous command.
pub fn esc_step(state: &EscState, params: &EscParams, j: f64) -> (EscState, f64) {
    let mut next = *state;
    if !j.is_finite() {
        next.fault = true;
        return (next, state.last_u);
    }
    next.fault = false;
    let hp = next.washout(params, j);
    next.demodulate(params, hp);
    next.theta_hat = next.integrated_theta(params);
    let u = next.theta_hat + next.dither(params);
    next.last_u = u;
    next.advance_clock(params);
    (next, u)
}

/// Classical ESC bundled with its cost, driven by pH measurements.
#[derive(Debug, Clone)]
pub struct ClassicEsc {
    params: EscParams,
    cost: CostSpec,
    state: EscState,
}

impl ClassicEsc {
    pub fn new(params: EscParams, cost: CostSpec) -> Result<Self> {
        params.validate()?;
        Ok(ClassicEsc {
            params,
            cost,
            state: esc_reset(&params),
        })
    }

    pub fn params(&self) -> &EscParams {
        &self.params
    }

    pub fn state(&self) -> &EscState {
        &self.state
    }

    pub fn reset(&mut self) {
        let t = self.state.t;
        self.state = esc_reset(&self.params);
        self.state.t = t;
    }

    /// Advance the dither clock without adapting (controller inactive).
    pub fn idle(&mut self) {
        self.state.advance_clock(&self.params);
    }

    pub fn step(&mut self, ph: f64) -> f64 {
        let j = cost_eval(ph, &self.cost).unwrap_or(f64::NAN);
        let (next, u) = esc_step(&self.state, &self.params, j);
        self.state = next;
        u
    }
}
