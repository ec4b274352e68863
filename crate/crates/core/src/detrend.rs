//! ESC with the washout replaced by moving-window linear-regression
//! detrending, an irradiance feedforward term, output saturation with
//! conditional integration, and a reset on controller activation.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::esc::{cost_eval, esc_reset, CostSpec, EscParams, EscState};

/// Fixed-capacity window of `(t, J)` samples, most recent last.
#[derive(Debug, Clone, PartialEq)]
pub struct DetrendWindow {
    capacity: usize,
    samples: VecDeque<(f64, f64)>,
}

impl DetrendWindow {
    pub fn new(capacity: usize) -> Self {
        DetrendWindow {
            capacity: capacity.max(2),
            samples: VecDeque::with_capacity(capacity.max(2)),
        }
    }

    /// Window spanning one dither period of `params`.
    pub fn for_params(params: &EscParams) -> Self {
        Self::new(params.samples_per_period())
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn filled(&self) -> usize {
        self.samples.len()
    }

    pub fn samples(&self) -> impl Iterator<Item = &(f64, f64)> {
        self.samples.iter()
    }

    pub fn clear(&mut self) {
        self.samples.clear();
    }

    /// Append a sample, evicting the oldest when full. Timestamps must be
    /// strictly increasing.
    pub fn push(&mut self, t: f64, j: f64) -> Result<()> {
        if let Some(&(last, _)) = self.samples.back() {
            if !(t > last) {
                return Err(Error::Structural(format!(
                    "window timestamps must increase: {t} after {last}"
                )));
            }
        }
        if self.samples.len() == self.capacity {
            self.samples.pop_front();
        }
        self.samples.push_back((t, j));
        Ok(())
    }

    /// Least-squares line through the window evaluated at the newest
    /// timestamp, or `None` while fewer than two samples are held.
    pub fn trend_at_latest(&self) -> Result<Option<f64>> {
        let n = self.samples.len();
        if n < 2 {
            return Ok(None);
        }
        let nf = n as f64;
        let (sum_t, sum_j) = self
            .samples
            .iter()
            .fold((0.0, 0.0), |(st, sj), &(t, j)| (st + t, sj + j));
        let (t_mean, j_mean) = (sum_t / nf, sum_j / nf);
        let (mut s_tt, mut s_tj) = (0.0, 0.0);
        for &(t, j) in &self.samples {
            let dt = t - t_mean;
            s_tt += dt * dt;
            s_tj += dt * (j - j_mean);
        }
        if s_tt == 0.0 {
            return Err(Error::Structural(
                "degenerate window: equal timestamps".into(),
            ));
        }
        let slope = s_tj / s_tt;
        let (t_last, _) = *self.samples.back().expect("n >= 2");
        Ok(Some(j_mean + slope * (t_last - t_mean)))
    }
}

/// Residual of the newest sample from the window's regression line; zero
/// during warm-up (fewer than two samples).
pub fn detrend(window: &DetrendWindow) -> Result<f64> {
    let Some(trend) = window.trend_at_latest()? else {
        return Ok(0.0);
    };
    let (_, j_last) = *window.samples.back().expect("trend implies samples");
    Ok(j_last - trend)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeedforwardSpec {
    /// [L/min per W/m²]
    pub k_ff: f64,
    /// Cap on the feedforward flow [L/min].
    pub q_ff_max: f64,
}

impl Default for FeedforwardSpec {
    fn default() -> Self {
        FeedforwardSpec {
            k_ff: 0.002,
            q_ff_max: 8.0,
        }
    }
}

impl FeedforwardSpec {
    pub const NONE: FeedforwardSpec = FeedforwardSpec {
        k_ff: 0.0,
        q_ff_max: 0.0,
    };

    pub fn flow(&self, irradiance: f64) -> f64 {
        (self.k_ff * irradiance).min(self.q_ff_max)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k_ff.is_finite() && self.k_ff >= 0.0) {
            return Err(Error::param("feedforward.k_ff", "must be finite and >= 0"));
        }
        if !(self.q_ff_max >= 0.0) {
            return Err(Error::param("feedforward.q_ff_max", "must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SaturationSpec {
    pub q_min: f64,
    pub q_max: f64,
}

impl Default for SaturationSpec {
    fn default() -> Self {
        SaturationSpec {
            q_min: 0.0,
            q_max: 8.0,
        }
    }
}

impl SaturationSpec {
    pub const UNBOUNDED: SaturationSpec = SaturationSpec {
        q_min: f64::NEG_INFINITY,
        q_max: f64::INFINITY,
    };

    /// Admissible valve range: `0 <= q_min < q_max`.
    pub fn validate(&self) -> Result<()> {
        if !(self.q_min.is_finite() && self.q_min >= 0.0) {
            return Err(Error::param("saturation.q_min", "must be finite and >= 0"));
        }
        if !(self.q_max > self.q_min) {
            return Err(Error::param("saturation.q_max", "must exceed q_min"));
        }
        Ok(())
    }
}

/// Signal conditioning ahead of demodulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrendFilter {
    #[default]
    Regression,
    Washout,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetrendParams {
    pub esc: EscParams,
    pub cost: CostSpec,
    pub feedforward: FeedforwardSpec,
    pub saturation: SaturationSpec,
    pub filter: TrendFilter,
    /// Seed `θ̂` with the feedforward flow at activation instead of `theta_init`.
    pub reset_to_feedforward: bool,
    /// Whether a closed-loop harness should call [`DetrendEsc::activation_reset`]
    /// on every inactive→active transition.
    pub reset_on_activation: bool,
}

impl Default for DetrendParams {
    fn default() -> Self {
        DetrendParams {
            esc: EscParams::default(),
            cost: CostSpec::default(),
            feedforward: FeedforwardSpec::default(),
            saturation: SaturationSpec::default(),
            filter: TrendFilter::Regression,
            reset_to_feedforward: false,
            reset_on_activation: true,
        }
    }
}

impl DetrendParams {
    pub fn validate(&self) -> Result<()> {
        self.esc.validate()?;
        self.feedforward.validate()?;
        if !(self.saturation.q_min < self.saturation.q_max) {
            return Err(Error::param("saturation.q_max", "must exceed q_min"));
        }
        Ok(())
    }
}

/// What one controller sample produced, for logging.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetrendOutput {
    pub q_cmd: f64,
    pub q_raw: f64,
    pub q_ff: f64,
    /// Trend (regression) or `η` (washout) at the current sample.
    pub trend: f64,
    pub residual: f64,
    pub saturated: bool,
    pub fault: bool,
}

#[derive(Debug, Clone)]
pub struct DetrendEsc {
    params: DetrendParams,
    state: EscState,
    window: DetrendWindow,
    last_q: f64,
    seed_from_feedforward: bool,
}

impl DetrendEsc {
    pub fn new(params: DetrendParams) -> Result<Self> {
        params.validate()?;
        let state = esc_reset(&params.esc);
        let last_q = params
            .esc
            .theta_init
            .clamp(params.saturation.q_min, params.saturation.q_max);
        Ok(DetrendEsc {
            window: DetrendWindow::for_params(&params.esc),
            params,
            state,
            last_q,
            seed_from_feedforward: params.reset_to_feedforward,
        })
    }

    pub fn params(&self) -> &DetrendParams {
        &self.params
    }

    pub fn state(&self) -> &EscState {
        &self.state
    }

    pub fn window(&self) -> &DetrendWindow {
        &self.window
    }

    /// Reset on an inactive→active transition: empty window, zero gradient
    /// estimate, `θ̂ = theta_init`, dither phase zero, lazy cost init re-armed.
    /// The controller clock keeps running so timestamps stay monotonic.
    pub fn activation_reset(&mut self) {
        let t = self.state.t;
        self.state = esc_reset(&self.params.esc);
        self.state.t = t;
        self.window.clear();
        self.seed_from_feedforward = self.params.reset_to_feedforward;
    }

    /// Advance the controller clock by one sample without adapting.
    pub fn idle(&mut self) {
        self.state.advance_clock(&self.params.esc);
    }

    pub fn step(&mut self, ph: f64, irradiance: f64) -> DetrendOutput {
        let p = &self.params;
        let held = |state: &EscState, last_q: f64| DetrendOutput {
            q_cmd: last_q,
            q_raw: last_q,
            q_ff: 0.0,
            trend: state.eta,
            residual: 0.0,
            saturated: false,
            fault: true,
        };
        if !(ph.is_finite() && irradiance.is_finite() && irradiance >= 0.0) {
            self.state.fault = true;
            return held(&self.state, self.last_q);
        }
        let j = match cost_eval(ph, &p.cost) {
            Ok(j) => j,
            Err(_) => {
                self.state.fault = true;
                return held(&self.state, self.last_q);
            }
        };

        let mut next = self.state;
        next.fault = false;
        if self.seed_from_feedforward {
            next.theta_hat = p.feedforward.flow(irradiance);
            self.seed_from_feedforward = false;
        }
        let (residual, trend) = match p.filter {
            TrendFilter::Washout => {
                let hp = next.washout(&p.esc, j);
                (hp, next.eta)
            }
            TrendFilter::Regression => {
                if self.window.push(next.t, j).is_err() {
                    self.state.fault = true;
                    return held(&self.state, self.last_q);
                }
                let trend = self.window.trend_at_latest().ok().flatten().unwrap_or(j);
                next.eta = trend;
                (j - trend, trend)
            }
        };
        next.demodulate(&p.esc, residual);

        let dither = next.dither(&p.esc);
        let q_ff = p.feedforward.flow(irradiance);
        let theta_candidate = next.integrated_theta(&p.esc);
        let candidate_raw = theta_candidate + dither + q_ff;
        let in_range = |q: f64| q >= p.saturation.q_min && q <= p.saturation.q_max;
        let (q_raw, saturated) = if in_range(candidate_raw) {
            next.theta_hat = theta_candidate;
            (candidate_raw, false)
        } else {
            // Conditional integration: hold θ̂ when the update would saturate.
            let raw = next.theta_hat + dither + q_ff;
            (raw, !in_range(raw))
        };
        let q_cmd = q_raw.clamp(p.saturation.q_min, p.saturation.q_max);
        next.last_u = q_cmd;
        next.advance_clock(&p.esc);
        self.state = next;
        self.last_q = q_cmd;
        DetrendOutput {
            q_cmd,
            q_raw,
            q_ff,
            trend,
            residual,
            saturated,
            fault: false,
        }
    }
}
