//! On-off hysteresis pH control and the irradiance activation gate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OnOffParams {
    pub ph_sp: f64,
    /// Half-width of the hysteresis band [pH].
    pub band: f64,
    /// Injection flow while on [L/min].
    pub q_on: f64,
}

impl Default for OnOffParams {
    fn default() -> Self {
        OnOffParams {
            ph_sp: 8.0,
            band: 0.1,
            q_on: 8.0,
        }
    }
}

impl OnOffParams {
    pub fn validate(&self) -> Result<()> {
        if !self.ph_sp.is_finite() {
            return Err(Error::param("baseline.ph_sp", "must be finite"));
        }
        if !(self.band.is_finite() && self.band > 0.0) {
            return Err(Error::param("baseline.band", "must be > 0"));
        }
        if !(self.q_on.is_finite() && self.q_on > 0.0) {
            return Err(Error::param("baseline.q_on", "must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OnOffOutput {
    pub injecting: bool,
    pub fault: bool,
}

/// Relay with memory: switch on strictly above `ph_sp + band`, off strictly
/// below `ph_sp - band`, otherwise keep the previous state. A non-finite
/// reading keeps the previous state and raises the fault flag.
pub fn onoff_step(injecting: bool, ph: f64, params: &OnOffParams) -> (OnOffOutput, f64) {
    let flow = |on: bool| if on { params.q_on } else { 0.0 };
    if !ph.is_finite() {
        return (
            OnOffOutput {
                injecting,
                fault: true,
            },
            flow(injecting),
        );
    }
    let next = if ph > params.ph_sp + params.band {
        true
    } else if ph < params.ph_sp - params.band {
        false
    } else {
        injecting
    };
    (
        OnOffOutput {
            injecting: next,
            fault: false,
        },
        flow(next),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActivationParams {
    /// Enable above this irradiance [W/m²].
    pub i_on: f64,
    /// Disable below this irradiance [W/m²].
    pub i_off: f64,
}

impl Default for ActivationParams {
    fn default() -> Self {
        ActivationParams {
            i_on: 100.0,
            i_off: 20.0,
        }
    }
}

impl ActivationParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.i_on.is_finite() && self.i_off.is_finite()) {
            return Err(Error::param("activation", "thresholds must be finite"));
        }
        if !(self.i_off < self.i_on) {
            return Err(Error::param("activation.i_off", "must be below i_on"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transition {
    Activated,
    Deactivated,
}

/// Irradiance hysteresis gate. Returns the new flag and the transition, if any.
pub fn activation_step(
    active: bool,
    irradiance: f64,
    params: &ActivationParams,
) -> (bool, Option<Transition>) {
    let next = if irradiance > params.i_on {
        true
    } else if irradiance < params.i_off {
        false
    } else {
        active
    };
    let transition = match (active, next) {
        (false, true) => Some(Transition::Activated),
        (true, false) => Some(Transition::Deactivated),
        _ => None,
    };
    (next, transition)
}

/// Replay the activation gate over an irradiance sequence, starting inactive.
pub fn replay_activation(irradiance: &[f64], params: &ActivationParams) -> Vec<bool> {
    let mut active = false;
    irradiance
        .iter()
        .map(|&i| {
            active = activation_step(active, i, params).0;
            active
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn switches_on_above_band() {
        let p = OnOffParams::default();
        for prior in [false, true] {
            let (out, q) = onoff_step(prior, 8.15, &p);
            assert!(out.injecting);
            assert_eq!(q, 8.0);
        }
    }

    #[test]
    fn switches_off_below_band() {
        let p = OnOffParams::default();
        for prior in [false, true] {
            let (out, q) = onoff_step(prior, 7.85, &p);
            assert!(!out.injecting);
            assert_eq!(q, 0.0);
        }
    }

    #[test]
    fn band_keeps_memory() {
        let p = OnOffParams::default();
        assert_eq!(onoff_step(true, 8.05, &p).1, 8.0);
        assert_eq!(onoff_step(false, 8.05, &p).1, 0.0);
        // boundaries are strict
        assert!(!onoff_step(false, 8.1, &p).0.injecting);
        assert!(onoff_step(true, 7.9, &p).0.injecting);
    }

    #[test]
    fn nan_holds_and_faults() {
        let (out, q) = onoff_step(true, f64::NAN, &OnOffParams::default());
        assert!(out.injecting && out.fault);
        assert_eq!(q, 8.0);
    }

    #[test]
    fn activation_examples() {
        let p = ActivationParams::default();
        assert_eq!(
            activation_step(false, 150.0, &p),
            (true, Some(Transition::Activated))
        );
        assert_eq!(activation_step(true, 50.0, &p), (true, None));
        assert_eq!(
            activation_step(true, 10.0, &p),
            (false, Some(Transition::Deactivated))
        );
        assert_eq!(activation_step(false, 50.0, &p), (false, None));
    }

    #[test]
    fn invalid_thresholds() {
        assert!(ActivationParams {
            i_on: 20.0,
            i_off: 20.0
        }
        .validate()
        .is_err());
        assert!(OnOffParams {
            band: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }
}
