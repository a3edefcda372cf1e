//! Effective dissipative rates from cavity and Raman parameters.
//!
//! Eliminating a bad cavity gives `α = g²/(κ/2 + iΔ)`, a collective decay
//! rate `Γ = 2 Re α` and a dispersive shift `χ = Im α`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Validity margins below this value trigger a warning.
pub const VALIDITY_WARN_BELOW: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CavityParams {
    pub g: f64,
    pub kappa: f64,
    /// Detuning `Δ = ω_c − ω_s`.
    pub delta: f64,
    pub n_atoms: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveRates {
    pub gamma: f64,
    pub chi: f64,
}

/// Complex elimination coefficient `α = g²/(κ/2 + iΔ)`.
pub fn alpha(p: &CavityParams) -> Complex64 {
    Complex64::new(p.g * p.g, 0.0) / Complex64::new(p.kappa / 2.0, p.delta)
}

pub fn eliminate_cavity(p: &CavityParams) -> Result<EffectiveRates> {
    if !(p.kappa > 0.0) {
        return Err(Error::invalid(format!("kappa must be positive, got {}", p.kappa)));
    }
    let den = p.delta * p.delta + 0.25 * p.kappa * p.kappa;
    let g2 = p.g * p.g;
    Ok(EffectiveRates {
        gamma: g2 * p.kappa / den,
        chi: -g2 * p.delta / den,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidityMargin {
    /// `(Δ² + κ²)/(g² N)`; infinite when `g = 0`.
    pub margin: f64,
    pub warning: bool,
}

impl ValidityMargin {
    pub fn always_valid(&self) -> bool {
        self.margin.is_infinite()
    }
}

pub fn validity_margin(p: &CavityParams) -> ValidityMargin {
    let num = p.delta * p.delta + p.kappa * p.kappa;
    let den = p.g * p.g * p.n_atoms.max(1) as f64;
    let margin = if den == 0.0 { f64::INFINITY } else { num / den };
    ValidityMargin {
        margin,
        warning: margin < VALIDITY_WARN_BELOW,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RamanParams {
    pub g: f64,
    pub omega: f64,
    /// Intermediate-state detuning.
    pub delta_e: f64,
    /// Intermediate-state linewidth.
    pub gamma_e: f64,
    pub kappa: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RamanReduction {
    pub g_eff: f64,
    pub gamma_eff: f64,
    pub cooperativity: f64,
    /// `γ_eff / Γ` with `Γ = 4 g_eff²/κ`.
    pub loss_ratio: f64,
    /// `|Δ_e| / Ω`, large when the intermediate level is far detuned.
    pub detuning_ratio: f64,
    /// Photon-number-dependent light shift magnitude `g²/Δ_e`.
    pub light_shift: f64,
}

pub fn raman_reduce(r: &RamanParams) -> Result<RamanReduction> {
    if r.delta_e == 0.0 {
        return Err(Error::invalid("intermediate detuning must be nonzero"));
    }
    if !(r.gamma_e > 0.0 && r.kappa > 0.0) {
        return Err(Error::invalid("gamma_e and kappa must be positive"));
    }
    let ratio = r.omega / r.delta_e;
    let g_eff = r.g * ratio;
    let gamma_eff = r.gamma_e * ratio * ratio;
    let cooperativity = r.g * r.g / (r.gamma_e * r.kappa);
    let inverse = 1.0 / (4.0 * cooperativity);
    let loss_ratio = if g_eff == 0.0 {
        inverse
    } else {
        gamma_eff / (4.0 * g_eff * g_eff / r.kappa)
    };
    if ((loss_ratio - inverse) / inverse).abs() > 1e-12 {
        return Err(Error::numeric(format!(
            "loss ratio {loss_ratio} disagrees with 1/(4C) = {inverse}"
        )));
    }
    Ok(RamanReduction {
        g_eff,
        gamma_eff,
        cooperativity,
        loss_ratio,
        detuning_ratio: (r.delta_e / r.omega).abs(),
        light_shift: r.g * r.g / r.delta_e,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cav(g: f64, kappa: f64, delta: f64, n: usize) -> CavityParams {
        CavityParams {
            g,
            kappa,
            delta,
            n_atoms: n,
        }
    }

    #[test]
    fn resonant_elimination() {
        let r = eliminate_cavity(&cav(1.0, 2.0, 0.0, 1)).unwrap();
        assert_eq!(r.gamma, 2.0);
        assert_eq!(r.chi, 0.0);
    }

    #[test]
    fn detuned_elimination() {
        let r = eliminate_cavity(&cav(1.0, 2.0, 1.0, 1)).unwrap();
        assert!((r.gamma - 1.0).abs() < 1e-15);
        assert!((r.chi + 0.5).abs() < 1e-15);
    }

    #[test]
    fn rates_scale_with_g_squared() {
        let a = eliminate_cavity(&cav(0.7, 3.0, 1.3, 1)).unwrap();
        let b = eliminate_cavity(&cav(1.4, 3.0, 1.3, 1)).unwrap();
        assert!((b.gamma / a.gamma - 4.0).abs() < 1e-12);
        assert!((b.chi / a.chi - 4.0).abs() < 1e-12);
    }

    #[test]
    fn nonpositive_kappa_rejected() {
        assert!(eliminate_cavity(&cav(1.0, 0.0, 0.0, 1)).is_err());
        assert!(eliminate_cavity(&cav(1.0, -1.0, 0.0, 1)).is_err());
    }

    #[test]
    fn validity_examples() {
        let v = validity_margin(&cav(1.0, 40.0, 0.0, 10));
        assert_eq!(v.margin, 160.0);
        assert!(!v.warning);
        let v = validity_margin(&cav(1.0, 2.0, 0.0, 100));
        assert!((v.margin - 0.04).abs() < 1e-15);
        assert!(v.warning);
        assert!(validity_margin(&cav(0.0, 2.0, 0.0, 100)).always_valid());
    }

    #[test]
    fn raman_parameter_estimates() {
        let r = raman_reduce(&RamanParams {
            g: 2.0 * PI * 2.26,
            omega: 1.0,
            delta_e: 10.0,
            gamma_e: 2.0 * PI * 6.0,
            kappa: 2.0 * PI * 0.85,
        })
        .unwrap();
        assert!((r.gamma_eff / (2.0 * PI) - 0.06).abs() < 1e-12);
        assert!((r.g_eff / (2.0 * PI) - 0.226).abs() < 1e-12);
        assert!((r.cooperativity - 1.0).abs() < 0.01);
        assert!((r.loss_ratio - 1.0 / (4.0 * r.cooperativity)).abs() < 1e-12);
    }

    #[test]
    fn raman_zero_detuning_rejected() {
        let p = RamanParams {
            g: 1.0,
            omega: 1.0,
            delta_e: 0.0,
            gamma_e: 1.0,
            kappa: 1.0,
        };
        assert!(raman_reduce(&p).is_err());
    }
}
