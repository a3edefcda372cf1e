/// First time at which `series` has covered `fraction` of the way from its
/// initial value to `stationary`, linearly interpolated between grid points;
/// `None` if it never does. For a series starting at zero the target is
/// `fraction × stationary`.
pub fn prep_time(times: &[f64], series: &[f64], stationary: f64, fraction: f64) -> Option<f64> {
    let n = times.len().min(series.len());
    if n == 0 {
        return None;
    }
    let target = series[0] + fraction * (stationary - series[0]);
    let rising = stationary >= series[0];
    let reached = |x: f64| if rising { x >= target } else { x <= target };
    if reached(series[0]) {
        return Some(times[0]);
    }
    (1..n).find(|&i| reached(series[i])).map(|i| {
        let (x0, x1) = (series[i - 1], series[i]);
        let (t0, t1) = (times[i - 1], times[i]);
        t0 + (target - x0) / (x1 - x0) * (t1 - t0)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_and_ramp() {
        let t: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        assert_eq!(prep_time(&t, &[2.0; 11], 2.0, 0.7), Some(0.0));
        let p = prep_time(&t, &t, 1.0, 0.7).unwrap();
        assert!((p - 0.7).abs() < 1e-12);
        assert_eq!(prep_time(&t, &[0.0; 11], 1.0, 0.7), None);
    }

    #[test]
    fn decaying_series() {
        let t: Vec<f64> = (0..=10).map(|i| i as f64).collect();
        let x: Vec<f64> = t.iter().map(|s| 10.0 - s).collect();
        let p = prep_time(&t, &x, 0.0, 0.7).unwrap();
        assert!((p - 7.0).abs() < 1e-12);
    }
}
