use crate::numerics::golden_max;

fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Number of ways to place `k` decayed sites on an `N`-ring with no two adjacent,
/// `N/(N-k) · C(N-k, k)`. Zero outside `0 ≤ k ≤ ⌊N/2⌋`.
pub fn and_count(n: usize, k: usize) -> u128 {
    if n == 0 || k > n / 2 {
        return 0;
    }
    if k == 0 {
        return 1;
    }
    let (n, k) = (n as u64, k as u64);
    binomial(n - k, k) * n as u128 / (n - k) as u128
}

/// Closed-form AND layer intensity `(k+1)(N-2k)(N-2k-1)/(N-k-1)`.
pub fn and_intensity(n: usize, k: usize) -> f64 {
    if k == 0 {
        return n as f64;
    }
    if 2 * k >= n {
        return 0.0;
    }
    let (n, k) = (n as f64, k as f64);
    (k + 1.0) * (n - 2.0 * k) * (n - 2.0 * k - 1.0) / (n - k - 1.0)
}

/// Thermodynamic AND rate `g(n) = (1-n)(2n-1)²/n` on `[1/2, 1]`, zero elsewhere.
pub fn g_and(n: f64) -> f64 {
    if !(0.5..=1.0).contains(&n) {
        return 0.0;
    }
    (1.0 - n) * (2.0 * n - 1.0).powi(2) / n
}

/// Density at which `g_and` peaks.
pub fn g_and_maximizer() -> f64 {
    golden_max(&g_and, 0.5, 1.0, 1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        assert_eq!(and_count(6, 0), 1);
        assert_eq!(and_count(6, 1), 6);
        assert_eq!(and_count(6, 2), 9);
        assert_eq!(and_count(6, 3), 2);
        assert_eq!(and_count(6, 4), 0);
    }

    #[test]
    fn count_matches_enumeration() {
        for n in 3..=14usize {
            for k in 0..=n / 2 {
                let brute = (0u64..1 << n)
                    .filter(|b| b.count_ones() as usize == k)
                    .filter(|b| (0..n).all(|j| !(b >> j & 1 == 1 && b >> ((j + 1) % n) & 1 == 1)))
                    .count() as u128;
                assert_eq!(and_count(n, k), brute, "N={n} k={k}");
            }
        }
    }

    #[test]
    fn intensities() {
        assert_eq!(and_intensity(6, 1), 6.0);
        assert_eq!(and_intensity(6, 3), 0.0);
        assert_eq!(and_intensity(4, 0), 4.0);
    }

    #[test]
    fn scaling_function() {
        assert_eq!(g_and(1.0), 0.0);
        assert_eq!(g_and(0.5), 0.0);
        assert!((g_and(0.75) - 1.0 / 12.0).abs() < 1e-15);
        assert_eq!(g_and(0.3), 0.0);
        let m = g_and_maximizer();
        assert!((m - 0.80).abs() < 0.01);
    }
}
