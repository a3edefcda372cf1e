use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model_reduction::EffectiveRates;
use crate::spin::ConstraintRule;

/// Effective constrained spin model: `H = χ F†F + V₂ Σ n_j n_{j+2}`, collective
/// decay `√Γ F`, optional site loss `√γ_l σ_j⁻`, site dephasing `√γ_d σ_j^z`
/// and common-mode dephasing `√γ_c S^z`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveModel {
    pub rule: ConstraintRule,
    pub gamma: f64,
    pub chi: f64,
    pub gamma_loss: f64,
    pub gamma_deph_ind: f64,
    pub gamma_deph_common: f64,
    pub v_nnn: f64,
}

impl EffectiveModel {
    pub fn new(rule: ConstraintRule, gamma: f64) -> Self {
        Self {
            rule,
            gamma,
            chi: 0.0,
            gamma_loss: 0.0,
            gamma_deph_ind: 0.0,
            gamma_deph_common: 0.0,
            v_nnn: 0.0,
        }
    }

    pub fn from_rates(rule: ConstraintRule, rates: EffectiveRates) -> Self {
        Self {
            chi: rates.chi,
            ..Self::new(rule, rates.gamma)
        }
    }

    pub fn with_chi(mut self, chi: f64) -> Self {
        self.chi = chi;
        self
    }

    pub fn with_loss(mut self, rate: f64) -> Self {
        self.gamma_loss = rate;
        self
    }

    pub fn with_dephasing(mut self, individual: f64, common: f64) -> Self {
        self.gamma_deph_ind = individual;
        self.gamma_deph_common = common;
        self
    }

    pub fn with_tail(mut self, v_nnn: f64) -> Self {
        self.v_nnn = v_nnn;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("gamma", self.gamma),
            ("gamma_loss", self.gamma_loss),
            ("gamma_deph_ind", self.gamma_deph_ind),
            ("gamma_deph_common", self.gamma_deph_common),
        ];
        for (name, r) in rates {
            if !(r.is_finite() && r >= 0.0) {
                return Err(Error::invalid(format!("{name} must be finite and >= 0, got {r}")));
            }
        }
        if !self.chi.is_finite() || !self.v_nnn.is_finite() {
            return Err(Error::invalid("chi and v_nnn must be finite"));
        }
        Ok(())
    }

    /// Largest rate or energy scale, used to size integration steps.
    pub fn rate_scale(&self) -> f64 {
        [
            self.gamma,
            self.chi.abs(),
            self.gamma_loss,
            self.gamma_deph_ind,
            self.gamma_deph_common,
            self.v_nnn.abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Spins coupled to one lossy cavity mode.
///
/// With `rwa` the Hamiltonian is `Δ a†a + g(a†F + aF†)` in the frame rotating
/// with the atoms; otherwise the lab-frame form
/// `ω_c a†a + (ω_c − Δ) S^z + g(a + a†)(F + F†)` is used.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FullCavityModel {
    pub rule: ConstraintRule,
    pub g: f64,
    pub kappa: f64,
    pub delta: f64,
    /// Fock cutoff; `None` selects it automatically.
    pub n_max: Option<usize>,
    pub rwa: bool,
    /// Cavity frequency for the non-RWA Hamiltonian.
    pub omega_c: f64,
}

impl FullCavityModel {
    pub fn new(rule: ConstraintRule, g: f64, kappa: f64, delta: f64) -> Self {
        Self {
            rule,
            g,
            kappa,
            delta,
            n_max: None,
            rwa: true,
            omega_c: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa.is_finite() && self.kappa >= 0.0) {
            return Err(Error::invalid(format!("kappa must be >= 0, got {}", self.kappa)));
        }
        if !self.g.is_finite() || !self.delta.is_finite() || !self.omega_c.is_finite() {
            return Err(Error::invalid("g, delta and omega_c must be finite"));
        }
        if self.n_max == Some(0) {
            return Err(Error::invalid("n_max must be at least 1"));
        }
        Ok(())
    }
}

/// Uniform time grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_start: f64,
    pub t_end: f64,
    pub n_points: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, n_points: usize) -> Result<Self> {
        if n_points < 2 || !(t_end > t_start) || !t_start.is_finite() || !t_end.is_finite() {
            return Err(Error::invalid(format!(
                "time grid needs t_end > t_start and n_points >= 2, got [{t_start}, {t_end}] x {n_points}"
            )));
        }
        Ok(Self {
            t_start,
            t_end,
            n_points,
        })
    }

    pub fn step(&self) -> f64 {
        (self.t_end - self.t_start) / (self.n_points - 1) as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        if i + 1 == self.n_points {
            self.t_end
        } else {
            self.t_start + i as f64 * self.step()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.time(i)).collect()
    }
}
