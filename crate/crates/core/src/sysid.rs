//! Frequency-response characterization with fixed-period sinusoidal CO₂
//! excitation and a drift-robust least-squares sinusoid fit.

use std::f64::consts::TAU;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plant::Plant;

/// Least-squares fit of `y ≈ offset + slope·t + A·sin(ωt) + B·cos(ωt)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SineFit {
    /// `√(A² + B²)`
    pub amplitude: f64,
    /// `atan2(B, A)` [rad], so that the oscillation is `amplitude·sin(ωt + phase)`.
    pub phase: f64,
    pub offset: f64,
    pub slope: f64,
    pub rms: f64,
}

pub fn fit_sinusoid(samples: &[(f64, f64)], omega: f64) -> Result<SineFit> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::Estimation(format!("omega must be > 0, got {omega}")));
    }
    let n = samples.len();
    if n < 6 {
        return Err(Error::Estimation(format!(
            "need at least 6 samples, got {n}"
        )));
    }
    if samples
        .iter()
        .any(|&(t, y)| !(t.is_finite() && y.is_finite()))
    {
        return Err(Error::Estimation("samples must be finite".into()));
    }
    let period = TAU / omega;
    let t0 = samples[0].0;
    let t1 = samples[n - 1].0;
    let step = (t1 - t0) / (n - 1) as f64;
    if t1 - t0 + step < period * (1.0 - 1e-9) {
        return Err(Error::Estimation(format!(
            "samples span {:.1} s, less than one period ({period:.1} s)",
            t1 - t0 + step
        )));
    }

    let t_mean = samples.iter().map(|s| s.0).sum::<f64>() / n as f64;
    let design = DMatrix::from_fn(n, 4, |i, j| {
        let t = samples[i].0;
        match j {
            0 => 1.0,
            1 => t - t_mean,
            2 => (omega * t).sin(),
            _ => (omega * t).cos(),
        }
    });
    let y = DVector::from_iterator(n, samples.iter().map(|s| s.1));
    let svd = design.clone().svd(true, true);
    let s_max = svd.singular_values.max();
    let s_min = svd.singular_values.min();
    if !(s_min > s_max * 1e-10) {
        return Err(Error::Estimation("rank-deficient design".into()));
    }
    let coef = svd
        .solve(&y, s_max * 1e-12)
        .map_err(|e| Error::Estimation(e.to_string()))?;
    let resid = &y - &design * &coef;
    let (c0, slope, a, b) = (coef[0], coef[1], coef[2], coef[3]);
    Ok(SineFit {
        amplitude: a.hypot(b),
        phase: b.atan2(a),
        offset: c0 - slope * t_mean,
        slope,
        rms: (resid.norm_squared() / n as f64).sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExcitationSpec {
    /// Excitation periods [s].
    pub periods: Vec<f64>,
    /// Sinusoid amplitude [L/min].
    pub amplitude: f64,
    /// Mean flow [L/min].
    pub bias: f64,
    /// Cycles simulated per period, including the discarded ones.
    pub cycles_per_period: usize,
    /// Leading cycles dropped as transient before fitting.
    pub discard_cycles: usize,
    /// Constant irradiance held during surrogate characterization [W/m²].
    pub irradiance: f64,
}

impl Default for ExcitationSpec {
    fn default() -> Self {
        ExcitationSpec {
            periods: vec![300.0, 600.0, 900.0, 1200.0],
            amplitude: 2.0,
            bias: 4.0,
            cycles_per_period: 4,
            discard_cycles: 1,
            irradiance: 600.0,
        }
    }
}

impl ExcitationSpec {
    pub fn validate(&self, dt: f64) -> Result<()> {
        if self.periods.is_empty() {
            return Err(Error::param("excitation.periods", "must not be empty"));
        }
        for (i, &p) in self.periods.iter().enumerate() {
            if !(p.is_finite() && p > 2.0 * dt) {
                return Err(Error::param(
                    format!("excitation.periods[{i}]"),
                    format!("must exceed 2*dt = {}", 2.0 * dt),
                ));
            }
        }
        if !(self.amplitude.is_finite() && self.amplitude > 0.0) {
            return Err(Error::param("excitation.amplitude", "must be > 0"));
        }
        if !(self.bias.is_finite() && self.bias - self.amplitude >= 0.0) {
            return Err(Error::param(
                "excitation.bias",
                "bias - amplitude must be >= 0",
            ));
        }
        if !(self.irradiance.is_finite() && self.irradiance >= 0.0) {
            return Err(Error::param("excitation.irradiance", "must be >= 0"));
        }
        if self.discard_cycles == 0 {
            return Err(Error::param("excitation.discard_cycles", "must be >= 1"));
        }
        Ok(())
    }
}

/// Signal-to-noise ratio below which a response is flagged unreliable.
pub const MIN_RELIABLE_SNR: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FreqResponse {
    pub period: f64,
    /// Amplitude ratio, negative when the output is closer to anti-phase.
    pub gain: f64,
    /// Output phase minus input phase, wrapped into (-270°, 90°].
    pub phase_deg: f64,
    pub fit_residual_rms: f64,
    /// Output amplitude over residual RMS.
    pub snr: f64,
    pub reliable: bool,
}

impl FreqResponse {
    /// Phase lag behind the ideal reference: 0° for a positive gain, 180°
    /// for a negative one.
    pub fn lag_from_reference_deg(&self) -> f64 {
        if self.gain < 0.0 {
            -180.0 - self.phase_deg
        } else {
            -self.phase_deg
        }
    }
}

fn wrap_phase_deg(deg: f64) -> f64 {
    // into (-270, 90]
    let mut p = (deg + 270.0).rem_euclid(360.0) - 270.0;
    if p <= -270.0 {
        p += 360.0;
    }
    p
}

/// Compare fitted input and output sinusoids at one excitation period.
pub fn response_from_fits(period: f64, input: &SineFit, output: &SineFit) -> Result<FreqResponse> {
    if input.amplitude <= 0.0 {
        return Err(Error::Estimation("input shows no oscillation".into()));
    }
    let phase_deg = wrap_phase_deg((output.phase - input.phase).to_degrees());
    let magnitude = output.amplitude / input.amplitude;
    let snr = if output.rms > 0.0 {
        output.amplitude / output.rms
    } else {
        f64::INFINITY
    };
    Ok(FreqResponse {
        period,
        gain: if phase_deg < -90.0 {
            -magnitude
        } else {
            magnitude
        },
        phase_deg,
        fit_residual_rms: output.rms,
        snr,
        reliable: snr >= MIN_RELIABLE_SNR,
    })
}

/// Single-input single-output plant driven by a continuous-time excitation.
pub trait ExcitablePlant {
    /// Advance from `t_prev` to `t` under `excitation(·)` and return the
    /// (measured) output at `t`. Each plant chooses how to discretize the
    /// input over the interval.
    fn respond(&mut self, t_prev: f64, t: f64, excitation: &dyn Fn(f64) -> f64) -> Result<f64>;
}

fn midpoint(t_prev: f64, t: f64, excitation: &dyn Fn(f64) -> f64) -> f64 {
    excitation(0.5 * (t_prev + t))
}

/// Surrogate reactor under constant irradiance. The flow is held at the
/// interval midpoint value, which avoids the half-sample phase delay of a
/// plain zero-order hold.
pub struct SurrogateUnderLight {
    pub plant: Plant,
    pub irradiance: f64,
}

impl ExcitablePlant for SurrogateUnderLight {
    fn respond(&mut self, t_prev: f64, t: f64, excitation: &dyn Fn(f64) -> f64) -> Result<f64> {
        let q = midpoint(t_prev, t, excitation).max(0.0);
        self.plant.step(q, self.irradiance, t - t_prev)?;
        Ok(self.plant.measure())
    }
}

/// `K/(τs + 1)` with exact zero-order-hold stepping on the midpoint input
/// and optional seeded output noise. Reference plant with a known
/// frequency response.
pub struct FirstOrderSystem {
    pub gain: f64,
    pub tau: f64,
    pub y: f64,
    pub noise_std: f64,
    rng: rand_chacha::ChaCha8Rng,
}

impl FirstOrderSystem {
    pub fn new(gain: f64, tau: f64, noise_std: f64, seed: u64) -> Self {
        use rand::SeedableRng;
        FirstOrderSystem {
            gain,
            tau,
            y: 0.0,
            noise_std,
            rng: rand_chacha::ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl ExcitablePlant for FirstOrderSystem {
    fn respond(&mut self, t_prev: f64, t: f64, excitation: &dyn Fn(f64) -> f64) -> Result<f64> {
        use rand_distr::{Distribution, Normal};
        let target = self.gain * midpoint(t_prev, t, excitation);
        self.y = target + (self.y - target) * (-(t - t_prev) / self.tau).exp();
        if self.noise_std > 0.0 {
            let noise = Normal::new(0.0, self.noise_std)
                .map_err(|e| Error::InputDomain(e.to_string()))?
                .sample(&mut self.rng);
            Ok(self.y + noise)
        } else {
            Ok(self.y)
        }
    }
}

/// Memoryless `y = u`.
pub struct IdentityPlant;

impl ExcitablePlant for IdentityPlant {
    fn respond(&mut self, _t_prev: f64, t: f64, excitation: &dyn Fn(f64) -> f64) -> Result<f64> {
        Ok(excitation(t))
    }
}

/// Excite one plant at one period and estimate its response from the
/// samples after the discarded transient cycles.
pub fn characterize_period<P: ExcitablePlant>(
    plant: &mut P,
    spec: &ExcitationSpec,
    period: f64,
    dt: f64,
) -> Result<FreqResponse> {
    let discard = spec.discard_cycles.max(1);
    if spec.cycles_per_period <= discard {
        return Err(Error::Estimation(format!(
            "cycles_per_period must exceed the {discard} discarded transient cycle(s)"
        )));
    }
    let omega = TAU / period;
    let excitation = |t: f64| spec.bias + spec.amplitude * (omega * t).sin();
    let n = (spec.cycles_per_period as f64 * period / dt).round() as usize;
    let mut inputs = Vec::with_capacity(n);
    let mut outputs = Vec::with_capacity(n);
    for k in 1..n {
        let t = k as f64 * dt;
        let y = plant.respond(t - dt, t, &excitation)?;
        if t >= discard as f64 * period - 1e-9 {
            inputs.push((t, excitation(t)));
            outputs.push((t, y));
        }
    }
    let input_fit = fit_sinusoid(&inputs, omega)?;
    let output_fit = fit_sinusoid(&outputs, omega)?;
    response_from_fits(period, &input_fit, &output_fit)
}

/// Characterize every period of `spec` on fresh plant instances.
pub fn characterize<P, F>(
    mut make_plant: F,
    spec: &ExcitationSpec,
    dt: f64,
) -> Result<Vec<FreqResponse>>
where
    P: ExcitablePlant,
    F: FnMut(f64) -> Result<P>,
{
    spec.validate(dt)?;
    spec.periods
        .iter()
        .map(|&period| {
            let mut plant = make_plant(period)?;
            characterize_period(&mut plant, spec, period, dt)
        })
        .collect()
}

/// Estimate the response at `period` from logged `(t, q, y)` rows, skipping
/// the first period of the record.
pub fn characterize_log(rows: &[(f64, f64, f64)], period: f64) -> Result<FreqResponse> {
    let Some(&(t0, _, _)) = rows.first() else {
        return Err(Error::Estimation("empty log".into()));
    };
    let kept: Vec<_> = rows.iter().filter(|r| r.0 - t0 >= period - 1e-9).collect();
    let omega = TAU / period;
    let input: Vec<_> = kept.iter().map(|r| (r.0, r.1)).collect();
    let output: Vec<_> = kept.iter().map(|r| (r.0, r.2)).collect();
    let input_fit = fit_sinusoid(&input, omega)?;
    let output_fit = fit_sinusoid(&output, omega)?;
    response_from_fits(period, &input_fit, &output_fit)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DitherCriteria {
    /// Minimum |gain| as a fraction of the largest observed |gain|.
    pub gain_fraction: f64,
    /// Maximum lag behind the 0°/180° reference [deg].
    pub phase_budget_deg: f64,
}

impl Default for DitherCriteria {
    fn default() -> Self {
        DitherCriteria {
            gain_fraction: 0.5,
            phase_budget_deg: 60.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DitherRecommendation {
    Period(f64),
    NoneAdmissible,
}

/// Shortest reliable period with enough gain and little enough phase lag.
pub fn recommend_dither(
    responses: &[FreqResponse],
    criteria: &DitherCriteria,
) -> Result<DitherRecommendation> {
    let reliable: Vec<_> = responses.iter().filter(|r| r.reliable).collect();
    if reliable.len() < 2 {
        return Err(Error::InputDomain(format!(
            "need at least 2 reliable responses, got {}",
            reliable.len()
        )));
    }
    let max_gain = reliable.iter().map(|r| r.gain.abs()).fold(0.0, f64::max);
    let best = reliable
        .iter()
        .filter(|r| r.gain.abs() >= criteria.gain_fraction * max_gain)
        .filter(|r| r.lag_from_reference_deg().abs() <= criteria.phase_budget_deg)
        .map(|r| r.period)
        .fold(None, |acc: Option<f64>, p| {
            Some(acc.map_or(p, |a| a.min(p)))
        });
    Ok(best.map_or(
        DitherRecommendation::NoneAdmissible,
        DitherRecommendation::Period,
    ))
}

/// CSV report: `period_s,gain,phase_deg,rms,reliable`.
pub fn write_report<W: Write>(mut out: W, responses: &[FreqResponse]) -> std::io::Result<()> {
    writeln!(out, "period_s,gain,phase_deg,rms,reliable")?;
    for r in responses {
        writeln!(
            out,
            "{},{:.6},{:.3},{:.6},{}",
            r.period, r.gain, r.phase_deg, r.fit_residual_rms, r.reliable
        )?;
    }
    Ok(())
}
