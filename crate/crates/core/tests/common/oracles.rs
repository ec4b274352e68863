//! Independent reference computations used by the integration tests.

use num::{BigRational, ToPrimitive, Zero};

fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite input")
}

/// Latest-sample residual of the least-squares line through `samples`,
/// solved with exact rational arithmetic on the raw (uncentered) normal
/// equations.
pub fn line_residual_exact(samples: &[(f64, f64)]) -> f64 {
    let n = BigRational::from_integer(samples.len().into());
    let (mut st, mut sj, mut stt, mut stj) = (
        BigRational::zero(),
        BigRational::zero(),
        BigRational::zero(),
        BigRational::zero(),
    );
    for &(t, j) in samples {
        let (t, j) = (exact(t), exact(j));
        st += &t;
        sj += &j;
        stt += &t * &t;
        stj += &t * &j;
    }
    let det = &n * &stt - &st * &st;
    let slope = (&n * &stj - &st * &sj) / &det;
    let intercept = (&sj - &slope * &st) / &n;
    let &(t_last, j_last) = samples.last().expect("non-empty window");
    let fit = intercept + slope * exact(t_last);
    (exact(j_last) - fit).to_f64().expect("representable")
}

/// Gain and phase [deg] of `K / (1 + s tau)` at `period`.
pub fn first_order_response(gain: f64, tau: f64, period: f64) -> (f64, f64) {
    let wt = std::f64::consts::TAU / period * tau;
    (gain / (1.0 + wt * wt).sqrt(), -wt.atan().to_degrees())
}

/// RMS residual of `offset + slope t + a sin(wt) + b cos(wt)`.
pub fn sine_model_rms(samples: &[(f64, f64)], omega: f64, p: [f64; 4]) -> f64 {
    let [offset, slope, a, b] = p;
    let ss: f64 = samples
        .iter()
        .map(|&(t, y)| {
            let r = y - (offset + slope * t + a * (omega * t).sin() + b * (omega * t).cos());
            r * r
        })
        .sum();
    (ss / samples.len() as f64).sqrt()
}
