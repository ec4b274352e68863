//! Property checks shared by the `invariants` test target and the acceptance
//! suite. Each check runs a deterministic proptest runner and reports the
//! minimal failing case as an error string.

use std::fmt::Debug;

use proptest::collection::vec;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

use tlr_esc::baseline::{activation_step, onoff_step, ActivationParams, OnOffParams, Transition};
use tlr_esc::detrend::{DetrendEsc, DetrendParams, DetrendWindow, FeedforwardSpec, SaturationSpec};
use tlr_esc::esc::{esc_reset, esc_step, EscParams};
use tlr_esc::metrics::{co2_consumption, delta_pct, iae, irradiance_integral, SampleRecord};
use tlr_esc::plant::{plant_step, Plant, PlantParams, PlantState};
use tlr_esc::sysid::{characterize, fit_sinusoid, ExcitationSpec, SurrogateUnderLight};

use super::oracles::sine_model_rms;

pub type Check = fn() -> Result<(), String>;

pub const ALL: &[(&str, Check)] = &[
    ("dither_bound", dither_bound),
    ("clamp_bound", clamp_bound),
    ("anti_windup", anti_windup),
    ("window_discipline", window_discipline),
    ("hysteresis_memory", hysteresis_memory),
    ("activation_partition", activation_partition),
    ("metric_additivity", metric_additivity),
    ("gating_zero_contribution", gating_zero_contribution),
    ("delta_antisymmetry", delta_antisymmetry),
    ("plant_clamp", plant_clamp),
    ("plant_monotone_static_map", plant_monotone_static_map),
    ("plant_determinism", plant_determinism),
    ("plant_frequency_ordering", plant_frequency_ordering),
    ("fit_optimality", fit_optimality),
    ("fit_scale_equivariance", fit_scale_equivariance),
];

pub fn run_all() -> Vec<(&'static str, Result<(), String>)> {
    ALL.iter().map(|&(name, check)| (name, check())).collect()
}

fn check<S>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String>
where
    S: Strategy,
    S::Value: Debug,
{
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner =
        TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

fn cost_sample() -> impl Strategy<Value = f64> {
    prop_oneof![
        20 => 0.0..5.0f64,
        1 => Just(f64::NAN),
        1 => Just(f64::INFINITY),
    ]
}

pub fn dither_bound() -> Result<(), String> {
    let s = (
        0.05..3.0f64,
        -2.0..2.0f64,
        -5.0..5.0f64,
        vec(cost_sample(), 1..400),
    );
    check(64, s, |(a, gain, theta0, costs)| {
        let params = EscParams {
            amplitude: a,
            gain,
            theta_init: theta0,
            ..EscParams::default()
        };
        let mut state = esc_reset(&params);
        for j in costs {
            let (next, u) = esc_step(&state, &params, j);
            state = next;
            prop_assert!((u - state.theta_hat).abs() <= a * (1.0 + 1e-12));
            prop_assert!((0.0..std::f64::consts::TAU).contains(&state.phase));
        }
        Ok(())
    })
}

#[derive(Debug, Clone)]
enum Input {
    Sample { ph: f64, irradiance: f64 },
    Reset,
}

fn detrend_inputs() -> impl Strategy<Value = Vec<Input>> {
    let sample = (6.0..10.5f64, 0.0..1500.0f64)
        .prop_map(|(ph, irradiance)| Input::Sample { ph, irradiance });
    vec(prop_oneof![40 => sample, 1 => Just(Input::Reset)], 1..400)
}

fn detrend_params() -> impl Strategy<Value = DetrendParams> {
    (
        0.1..2.0f64,
        -80.0..80.0f64,
        0.0..0.01f64,
        0.0..1.0f64,
        0.5..20.0f64,
    )
        .prop_map(|(amplitude, gain, k_ff, q_min_frac, q_max)| DetrendParams {
            esc: EscParams {
                amplitude,
                gain,
                ..EscParams::default()
            },
            feedforward: FeedforwardSpec {
                k_ff,
                ..FeedforwardSpec::default()
            },
            saturation: SaturationSpec {
                q_min: q_min_frac * q_max * 0.5,
                q_max,
            },
            ..DetrendParams::default()
        })
}

fn drive(
    params: DetrendParams,
    inputs: Vec<Input>,
    mut each: impl FnMut(
        &DetrendEsc,
        &DetrendEsc,
        &tlr_esc::detrend::DetrendOutput,
    ) -> Result<(), TestCaseError>,
) -> Result<(), TestCaseError> {
    let mut ctl = DetrendEsc::new(params).map_err(|e| TestCaseError::fail(e.to_string()))?;
    for input in inputs {
        match input {
            Input::Reset => ctl.activation_reset(),
            Input::Sample { ph, irradiance } => {
                let before = ctl.clone();
                let out = ctl.step(ph, irradiance);
                each(&before, &ctl, &out)?;
            }
        }
    }
    Ok(())
}

pub fn clamp_bound() -> Result<(), String> {
    check(
        64,
        (detrend_params(), detrend_inputs()),
        |(params, inputs)| {
            let sat = params.saturation;
            drive(params, inputs, |_, _, out| {
                prop_assert!(
                    out.q_cmd >= sat.q_min && out.q_cmd <= sat.q_max,
                    "q_cmd {}",
                    out.q_cmd
                );
                Ok(())
            })
        },
    )
}

pub fn anti_windup() -> Result<(), String> {
    check(
        64,
        (detrend_params(), detrend_inputs()),
        |(params, inputs)| {
            let mut saturated_steps = 0usize;
            drive(params, inputs, |before, after, out| {
                if out.saturated {
                    saturated_steps += 1;
                    prop_assert_eq!(before.state().theta_hat, after.state().theta_hat);
                }
                Ok(())
            })
        },
    )
}

pub fn window_discipline() -> Result<(), String> {
    check(
        64,
        (detrend_params(), detrend_inputs()),
        |(params, inputs)| {
            let cap = DetrendWindow::for_params(&params.esc).capacity();
            let mut since_reset = 0usize;
            let mut ctl =
                DetrendEsc::new(params).map_err(|e| TestCaseError::fail(e.to_string()))?;
            for input in inputs {
                match input {
                    Input::Reset => {
                        ctl.activation_reset();
                        since_reset = 0;
                        prop_assert_eq!(ctl.window().filled(), 0);
                    }
                    Input::Sample { ph, irradiance } => {
                        ctl.step(ph, irradiance);
                        since_reset += 1;
                        // never spans a reset and never exceeds one period
                        prop_assert_eq!(ctl.window().filled(), since_reset.min(cap));
                        let ts: Vec<f64> = ctl.window().samples().map(|s| s.0).collect();
                        prop_assert!(ts.windows(2).all(|w| w[1] > w[0]));
                    }
                }
            }
            Ok(())
        },
    )
}

pub fn hysteresis_memory() -> Result<(), String> {
    let p = OnOffParams::default();
    let inside = (p.ph_sp - p.band)..=(p.ph_sp + p.band);
    check(128, (any::<bool>(), vec(inside, 1..300)), |(start, phs)| {
        let mut injecting = start;
        for ph in phs {
            let (out, q) = onoff_step(injecting, ph, &p);
            prop_assert_eq!(out.injecting, start);
            prop_assert_eq!(q, if start { p.q_on } else { 0.0 });
            injecting = out.injecting;
        }
        Ok(())
    })
}

pub fn activation_partition() -> Result<(), String> {
    let p = ActivationParams::default();
    check(128, vec(0.0..300.0f64, 1..500), |irr| {
        let mut active = false;
        let mut open = false;
        for (k, &i) in irr.iter().enumerate() {
            let (next, transition) = activation_step(active, i, &p);
            match transition {
                Some(Transition::Activated) => {
                    prop_assert!(!open && i > p.i_on, "opening at {k} with I = {i}");
                    open = true;
                }
                Some(Transition::Deactivated) => {
                    prop_assert!(open && i < p.i_off, "closing at {k} with I = {i}");
                    open = false;
                }
                None => prop_assert_eq!(next, active),
            }
            prop_assert_eq!(next, open);
            active = next;
        }
        Ok(())
    })
}

fn record_strategy(n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<SampleRecord>> {
    vec(
        (
            1.0..60.0f64,
            0.0..1200.0f64,
            7.0..9.0f64,
            0.0..8.0f64,
            prop::bool::weighted(0.8),
        ),
        n,
    )
    .prop_map(|rows| {
        let mut t = 0.0;
        rows.into_iter()
            .map(|(gap, irradiance, ph, q_co2, active)| {
                t += gap;
                SampleRecord {
                    t,
                    irradiance,
                    ph,
                    q_co2,
                    active,
                    day_index: 0,
                    event: None,
                }
            })
            .collect()
    })
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

pub fn metric_additivity() -> Result<(), String> {
    check(
        128,
        record_strategy(2..200).prop_flat_map(|r| {
            let n = r.len();
            (Just(r), 0..n)
        }),
        |(records, split)| {
            let (left, right) = (&records[..=split], &records[split..]);
            let whole = [
                iae(&records, 8.0).value,
                co2_consumption(&records).value,
                irradiance_integral(&records).value,
            ];
            let parts = [
                iae(left, 8.0).value + iae(right, 8.0).value,
                co2_consumption(left).value + co2_consumption(right).value,
                irradiance_integral(left).value + irradiance_integral(right).value,
            ];
            for (w, p) in whole.iter().zip(parts) {
                prop_assert!(close(*w, p), "whole {w} vs parts {p}");
            }
            Ok(())
        },
    )
}

pub fn gating_zero_contribution() -> Result<(), String> {
    let junk = (0.0..2000.0f64, 0.0..14.0f64, 0.0..100.0f64);
    check(
        128,
        (record_strategy(2..200), vec(junk, 200)),
        |(records, junk)| {
            let mut scrambled = records.clone();
            for (r, (i, ph, q)) in scrambled.iter_mut().zip(junk) {
                if !r.active {
                    r.irradiance = i;
                    r.ph = ph;
                    r.q_co2 = q;
                }
            }
            prop_assert_eq!(iae(&records, 8.0), iae(&scrambled, 8.0));
            prop_assert_eq!(co2_consumption(&records), co2_consumption(&scrambled));
            prop_assert_eq!(
                irradiance_integral(&records),
                irradiance_integral(&scrambled)
            );
            let all_off: Vec<_> = records
                .iter()
                .cloned()
                .map(|r| SampleRecord { active: false, ..r })
                .collect();
            let g = co2_consumption(&all_off);
            prop_assert!(g.value == 0.0 && g.no_active_samples);
            prop_assert_eq!(iae(&all_off, 8.0).value, 0.0);
            Ok(())
        },
    )
}

pub fn delta_antisymmetry() -> Result<(), String> {
    check(256, (1e-3..1e4f64, 1e-3..1e4f64), |(a, b)| {
        let (ab, ba) = (delta_pct(a, b).unwrap(), delta_pct(b, a).unwrap());
        if a == b {
            prop_assert!(ab == 0.0 && ba == 0.0);
        } else {
            prop_assert!(ab * ba < 0.0, "{ab} and {ba}");
        }
        Ok(())
    })
}

pub fn plant_clamp() -> Result<(), String> {
    let steps = vec((0.0..60.0f64, 0.0..2000.0f64, 0.5..900.0f64), 1..200);
    check(64, (6.0..10.5f64, steps), |(ph0, steps)| {
        let params = PlantParams {
            co2_half_flow: None,
            ..PlantParams::default()
        };
        let mut state = PlantState::new(ph0, 1.5);
        for (q, i, dt) in steps {
            state = plant_step(&state, &params, q, i, dt)
                .map_err(|e| TestCaseError::fail(e.to_string()))?;
            prop_assert!(state.ph >= params.ph_min && state.ph <= params.ph_max);
            prop_assert!(state.biomass > 0.0);
        }
        Ok(())
    })
}

pub fn plant_monotone_static_map() -> Result<(), String> {
    check(
        128,
        (0.0..8.0f64, 0.01..8.0f64, 0.0..900.0f64, 0.5..3.0f64),
        |(q, dq, i, x)| {
            let params = PlantParams {
                mu_max: 0.0,
                ..PlantParams::default()
            };
            let steady = |q: f64| {
                let s =
                    plant_step(&PlantState::new(params.ph_ambient, x), &params, q, i, 1e5).unwrap();
                s.ph
            };
            let (lo, hi) = (steady(q + dq), steady(q));
            let clamped = lo <= params.ph_min || hi >= params.ph_max;
            prop_assert!(lo < hi || clamped, "q {q}: {hi}, q {}: {lo}", q + dq);
            Ok(())
        },
    )
}

pub fn plant_determinism() -> Result<(), String> {
    check(
        32,
        (any::<u64>(), vec((0.0..8.0f64, 0.0..1200.0f64), 1..200)),
        |(seed, inputs)| {
            let params = PlantParams {
                seed,
                ..PlantParams::default()
            };
            let mut a = Plant::new(params.clone(), PlantState::new(7.9, 1.5)).unwrap();
            let mut b = Plant::new(params, PlantState::new(7.9, 1.5)).unwrap();
            for (q, i) in inputs {
                prop_assert_eq!(a.measure().to_bits(), b.measure().to_bits());
                a.step(q, i, 10.0).unwrap();
                b.step(q, i, 10.0).unwrap();
                prop_assert_eq!(a.state(), b.state());
            }
            Ok(())
        },
    )
}

/// Response gain is non-increasing as the period shrinks, and the pH phase
/// relative to `-q` lies in (-180, 0].
pub fn plant_frequency_ordering() -> Result<(), String> {
    check(
        8,
        (60.0..400.0f64, -0.2..-0.02f64, any::<u64>()),
        |(tau, gain_co2, seed)| {
            let params = PlantParams {
                tau_ph: tau,
                gain_co2,
                mu_max: 0.0,
                noise_std: 0.0,
                seed,
                ..PlantParams::default()
            };
            let spec = ExcitationSpec::default();
            let responses = characterize(
                |_| {
                    Ok(SurrogateUnderLight {
                        plant: Plant::new(params.clone(), PlantState::new(params.ph_ambient, 1.5))?,
                        irradiance: spec.irradiance,
                    })
                },
                &spec,
                10.0,
            )
            .map_err(|e| TestCaseError::fail(e.to_string()))?;
            let mut by_period = responses.clone();
            by_period.sort_by(|a, b| a.period.total_cmp(&b.period));
            for w in by_period.windows(2) {
                prop_assert!(w[0].gain.abs() <= w[1].gain.abs() * (1.0 + 1e-9));
            }
            for r in &responses {
                let rel = r.phase_deg + 180.0;
                prop_assert!(
                    rel > -180.0 && rel <= 0.0,
                    "period {}: phase vs -q {rel}",
                    r.period
                );
            }
            Ok(())
        },
    )
}

fn noisy_sine() -> impl Strategy<Value = (Vec<(f64, f64)>, f64)> {
    (
        200.0..1500.0f64,
        (-5.0..5.0f64, -1e-3..1e-3f64, -3.0..3.0f64, -3.0..3.0f64),
        vec(-0.5..0.5f64, 200),
    )
        .prop_map(|(period, (c, m, a, b), noise)| {
            let omega = std::f64::consts::TAU / period;
            let samples = noise
                .iter()
                .enumerate()
                .map(|(k, e)| {
                    let t = 10.0 * k as f64;
                    (
                        t,
                        c + m * t + a * (omega * t).sin() + b * (omega * t).cos() + e,
                    )
                })
                .collect();
            (samples, omega)
        })
}

pub fn fit_optimality() -> Result<(), String> {
    let perturb = vec(
        (-0.2..0.2f64, -1e-4..1e-4f64, -0.2..0.2f64, -0.2..0.2f64),
        20,
    );
    check(
        64,
        (noisy_sine(), perturb),
        |((samples, omega), perturbations)| {
            let fit =
                fit_sinusoid(&samples, omega).map_err(|e| TestCaseError::fail(e.to_string()))?;
            let best = [
                fit.offset,
                fit.slope,
                fit.amplitude * fit.phase.cos(),
                fit.amplitude * fit.phase.sin(),
            ];
            let rms = sine_model_rms(&samples, omega, best);
            prop_assert!(
                close(rms, fit.rms),
                "reported {} vs recomputed {rms}",
                fit.rms
            );
            for (d0, d1, d2, d3) in perturbations {
                let candidate = [best[0] + d0, best[1] + d1, best[2] + d2, best[3] + d3];
                prop_assert!(sine_model_rms(&samples, omega, candidate) >= rms * (1.0 - 1e-12));
            }
            Ok(())
        },
    )
}

pub fn fit_scale_equivariance() -> Result<(), String> {
    let scale = prop_oneof![-20.0..-0.05f64, 0.05..20.0f64];
    check(64, (noisy_sine(), scale), |((samples, omega), c)| {
        let fit = fit_sinusoid(&samples, omega).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let scaled: Vec<_> = samples.iter().map(|&(t, y)| (t, c * y)).collect();
        let g = fit_sinusoid(&scaled, omega).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let k = c.abs();
        prop_assert!(close(g.amplitude, k * fit.amplitude));
        prop_assert!(close(g.offset, c * fit.offset));
        prop_assert!((g.slope - c * fit.slope).abs() <= 1e-9 * (1.0 + (c * fit.slope).abs()));
        prop_assert!(close(g.rms, k * fit.rms));
        let shift = if c < 0.0 { std::f64::consts::PI } else { 0.0 };
        let d = (g.phase - fit.phase - shift).rem_euclid(std::f64::consts::TAU);
        prop_assert!(d.min(std::f64::consts::TAU - d) < 1e-9);
        Ok(())
    })
}
