//! Sample statistics over trajectories.

/// Sample mean and standard error (`ddof = 1`); the error is 0 for fewer than two samples.
pub fn mean_sem(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Delete-a-group jackknife for a statistic of `n` samples.
///
/// `stat` receives the retained sample indices. Returns the full-sample value
/// and the jackknife standard error over `groups` contiguous blocks.
pub fn jackknife<F>(n: usize, groups: usize, stat: F) -> (f64, f64)
where
    F: Fn(&[usize]) -> f64,
{
    let all: Vec<usize> = (0..n).collect();
    let full = stat(&all);
    let g = groups.min(n);
    if g < 2 {
        return (full, 0.0);
    }
    let bounds: Vec<usize> = (0..=g).map(|i| i * n / g).collect();
    let partial: Vec<f64> = (0..g)
        .map(|i| {
            let keep: Vec<usize> = all
                .iter()
                .copied()
                .filter(|&s| s < bounds[i] || s >= bounds[i + 1])
                .collect();
            stat(&keep)
        })
        .collect();
    let mean = partial.iter().sum::<f64>() / g as f64;
    let var = partial.iter().map(|x| (x - mean).powi(2)).sum::<f64>() * (g - 1) as f64 / g as f64;
    (full, var.sqrt())
}
