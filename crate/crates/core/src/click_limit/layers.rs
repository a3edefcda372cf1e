use serde::Serialize;

use crate::error::{Error, Result};
use crate::spin::{full_mask, ConstraintRule, MAX_SITES};

/// Maximum number of configurations held in one layer.
pub const LAYER_SUPPORT_LIMIT: usize = 1 << 26;

/// Log-norms `ln B_k = ln ‖F^k|⇑⟩‖²` and intensities `B_{k+1}/B_k`.
#[derive(Clone, Debug, Serialize)]
pub struct LayerSpectrum {
    pub rule: ConstraintRule,
    pub n_sites: usize,
    pub k_max: usize,
    /// `k_max + 1` entries, `log_norms[0] = 0`; `-inf` once a layer vanishes.
    pub log_norms: Vec<f64>,
    /// `k_max` entries.
    pub intensities: Vec<f64>,
}

impl LayerSpectrum {
    pub fn norms(&self) -> Vec<f64> {
        self.log_norms.iter().map(|l| l.exp()).collect()
    }
}

/// One normalised layer of the click cascade: sorted bitmasks and real amplitudes.
#[derive(Clone, Debug)]
pub struct Layer {
    pub configs: Vec<u64>,
    pub amps: Vec<f64>,
}

/// Iterates `F` on the fully excited state, renormalising every layer.
pub struct Cascade {
    rule: crate::spin::CompiledRule,
    layer: Layer,
    log_norm: f64,
}

impl Cascade {
    pub fn new(rule: &ConstraintRule, n: usize) -> Result<Self> {
        if n == 0 || n > MAX_SITES {
            return Err(Error::invalid(format!("chain length {n} outside 1..={MAX_SITES}")));
        }
        Ok(Self {
            rule: rule.compile(n),
            layer: Layer {
                configs: vec![full_mask(n)],
                amps: vec![1.0],
            },
            log_norm: 0.0,
        })
    }

    pub fn layer(&self) -> &Layer {
        &self.layer
    }

    pub fn log_norm(&self) -> f64 {
        self.log_norm
    }

    /// Applies `F` once and returns the squared norm ratio `B_{k+1}/B_k`.
    pub fn advance(&mut self) -> Result<f64> {
        let mut children: Vec<(u64, f64)> = Vec::new();
        for (&bits, &a) in self.layer.configs.iter().zip(&self.layer.amps) {
            for j in self.rule.emitters(bits) {
                children.push((bits ^ (1 << j), a));
            }
            if children.len() > 4 * LAYER_SUPPORT_LIMIT {
                return Err(Error::resource("layer support exceeds the sparse ceiling"));
            }
        }
        children.sort_unstable_by_key(|c| c.0);
        let mut configs = Vec::new();
        let mut amps: Vec<f64> = Vec::new();
        for (b, a) in children {
            if configs.last() == Some(&b) {
                *amps.last_mut().expect("nonempty") += a;
            } else {
                configs.push(b);
                amps.push(a);
            }
        }
        if configs.len() > LAYER_SUPPORT_LIMIT {
            return Err(Error::resource(format!(
                "layer support {} exceeds the ceiling {LAYER_SUPPORT_LIMIT}",
                configs.len()
            )));
        }
        let ratio: f64 = amps.iter().map(|a| a * a).sum();
        if ratio > 0.0 {
            let s = 1.0 / ratio.sqrt();
            amps.iter_mut().for_each(|a| *a *= s);
            self.log_norm += ratio.ln();
        } else {
            self.log_norm = f64::NEG_INFINITY;
        }
        self.layer = Layer { configs, amps };
        Ok(ratio)
    }
}

/// Layer norms and intensities of the cascade `F^k |⇑⟩` for `k ≤ k_max`.
pub fn layer_spectrum(rule: &ConstraintRule, n: usize, k_max: usize) -> Result<LayerSpectrum> {
    if k_max > n {
        return Err(Error::invalid(format!("k_max {k_max} exceeds N = {n}")));
    }
    let mut cascade = Cascade::new(rule, n)?;
    let mut log_norms = vec![0.0];
    let mut intensities = Vec::with_capacity(k_max);
    for _ in 0..k_max {
        if cascade.log_norm() == f64::NEG_INFINITY {
            log_norms.push(f64::NEG_INFINITY);
            intensities.push(0.0);
            continue;
        }
        let before = cascade.log_norm();
        cascade.advance()?;
        let after = cascade.log_norm();
        log_norms.push(after);
        intensities.push(if after == f64::NEG_INFINITY {
            0.0
        } else {
            (after - before).exp()
        });
    }
    Ok(LayerSpectrum {
        rule: rule.clone(),
        n_sites: n,
        k_max,
        log_norms,
        intensities,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::Boundary;

    #[test]
    fn east_three_sites() {
        let s = layer_spectrum(&ConstraintRule::east(Boundary::Periodic), 3, 3).unwrap();
        let b = s.norms();
        assert!((b[1] - 3.0).abs() < 1e-12 && (b[2] - 3.0).abs() < 1e-12);
        assert_eq!(b[3], 0.0);
        assert!((s.intensities[0] - 3.0).abs() < 1e-12);
        assert!((s.intensities[1] - 1.0).abs() < 1e-12);
        assert_eq!(s.intensities[2], 0.0);
    }

    #[test]
    fn and_six_sites() {
        let s = layer_spectrum(&ConstraintRule::and(Boundary::Periodic), 6, 3).unwrap();
        let expect = [1.0, 6.0, 36.0, 72.0];
        for (b, e) in s.norms().iter().zip(expect) {
            assert!((b - e).abs() < 1e-9 * e);
        }
        for (i, e) in s.intensities.iter().zip([6.0, 6.0, 2.0]) {
            assert!((i - e).abs() < 1e-12);
        }
    }

    #[test]
    fn dicke_five_sites() {
        let s = layer_spectrum(&ConstraintRule::dicke(Boundary::Periodic), 5, 5).unwrap();
        for (i, e) in s.intensities.iter().zip([5.0, 8.0, 9.0, 8.0, 5.0]) {
            assert!((i - e).abs() < 1e-12);
        }
    }

    #[test]
    fn k_max_beyond_n_rejected() {
        assert!(layer_spectrum(&ConstraintRule::east(Boundary::Periodic), 4, 5).is_err());
    }
}
