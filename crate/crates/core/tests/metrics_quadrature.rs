use tlr_esc::metrics::{co2_consumption, iae, SampleRecord};

fn sampled(dt: f64, f: impl Fn(f64) -> f64) -> Vec<SampleRecord> {
    let n = (3600.0 / dt).round() as usize;
    (0..=n)
        .map(|k| {
            let t = k as f64 * dt;
            SampleRecord {
                t,
                irradiance: 0.0,
                ph: 8.0 + f(t),
                q_co2: 2.0 + f(t),
                active: true,
                day_index: 0,
                event: None,
            }
        })
        .collect()
}

#[test]
fn trapezoid_error_is_second_order() {
    // f(t) = 0.1 (1 + sin(w t)) > 0 so |pH - sp| = f
    let w = std::f64::consts::TAU / 1300.0;
    let f = move |t: f64| 0.1 * (1.0 + (w * t).sin());
    let exact_min = 0.1 * (3600.0 + (1.0 - (w * 3600.0).cos()) / w) / 60.0;
    let err = |dt: f64| (iae(&sampled(dt, f), 8.0).value - exact_min).abs();
    let (e1, e2, e3) = (err(40.0), err(20.0), err(10.0));
    for (coarse, fine) in [(e1, e2), (e2, e3)] {
        let ratio = coarse / fine;
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }
    let co2_exact = 2.0 * 60.0 + exact_min;
    assert!((co2_consumption(&sampled(10.0, f)).value - co2_exact).abs() < 1e-3);
}
