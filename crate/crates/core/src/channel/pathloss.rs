use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// How LoS flags and K-factors are assigned to links.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkRegime {
    /// BS-RIS links are LoS (the RISs are placed for it); user links draw
    /// their LoS flag from the distance-dependent probability.
    #[default]
    Probabilistic,
    /// Every link is LoS with the distance-dependent K-factor.
    LosDominated,
    /// Every link is NLoS (K = 0).
    NlosDominated,
    /// Every link is deterministic LoS (K = infinity).
    PureLos,
}

/// Distance-dependent large-scale model. Gains are in dB relative to 1 and
/// follow `intercept - slope * log10(d)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathLossConfig {
    pub los_intercept_db: f64,
    pub los_slope_db: f64,
    pub nlos_intercept_db: f64,
    pub nlos_slope_db: f64,
    /// `P_LoS(d) = min(d1/d, 1) (1 - exp(-d/d2)) + exp(-d/d2)`.
    pub los_prob_d1: f64,
    pub los_prob_d2: f64,
    /// `K(d)[dB] = intercept - slope * d`.
    pub k_factor_intercept_db: f64,
    pub k_factor_slope_db_per_m: f64,
    pub noise_power_dbm: f64,
    pub regime: LinkRegime,
}

impl Default for PathLossConfig {
    fn default() -> Self {
        Self {
            los_intercept_db: -30.18,
            los_slope_db: 26.0,
            nlos_intercept_db: -34.53,
            nlos_slope_db: 38.0,
            los_prob_d1: 18.0,
            los_prob_d2: 36.0,
            k_factor_intercept_db: 13.0,
            k_factor_slope_db_per_m: 0.03,
            noise_power_dbm: -92.0,
            regime: LinkRegime::Probabilistic,
        }
    }
}

/// Which hop a link belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LinkClass {
    Direct,
    BsRis,
    RisUe,
}

impl PathLossConfig {
    pub fn validate(&self) -> Result<()> {
        if self.los_slope_db < 0.0 || self.nlos_slope_db < 0.0 {
            return Err(Error::InvalidScenario(
                "path-loss slopes must be >= 0 (gain non-increasing in distance)".into(),
            ));
        }
        if !(self.los_prob_d1 > 0.0 && self.los_prob_d2 > 0.0) {
            return Err(Error::InvalidScenario("LoS probability distances must be > 0".into()));
        }
        Ok(())
    }

    pub fn noise_power_w(&self) -> f64 {
        10f64.powf((self.noise_power_dbm - 30.0) / 10.0)
    }

    pub fn gain_db(&self, distance: f64, los: bool) -> f64 {
        let (a, b) = if los {
            (self.los_intercept_db, self.los_slope_db)
        } else {
            (self.nlos_intercept_db, self.nlos_slope_db)
        };
        a - b * distance.log10()
    }

    /// Linear large-scale power gain.
    pub fn gain(&self, distance: f64, los: bool) -> f64 {
        10f64.powf(self.gain_db(distance, los) / 10.0)
    }

    pub fn los_probability(&self, distance: f64) -> f64 {
        let e = (-distance / self.los_prob_d2).exp();
        let p = (self.los_prob_d1 / distance).min(1.0) * (1.0 - e) + e;
        p.clamp(0.0, 1.0)
    }

    /// Linear Rician K-factor for a LoS link.
    pub fn rician_k(&self, distance: f64) -> f64 {
        10f64.powf((self.k_factor_intercept_db - self.k_factor_slope_db_per_m * distance) / 10.0)
    }

    /// LoS flag and K-factor for one link under the configured regime.
    pub fn draw_link<R: Rng + ?Sized>(&self, class: LinkClass, distance: f64, rng: &mut R) -> (bool, f64) {
        let los = match self.regime {
            LinkRegime::PureLos => return (true, f64::INFINITY),
            LinkRegime::LosDominated => true,
            LinkRegime::NlosDominated => false,
            LinkRegime::Probabilistic => match class {
                LinkClass::BsRis => true,
                _ => rng.random::<f64>() < self.los_probability(distance),
            },
        };
        (los, if los { self.rician_k(distance) } else { 0.0 })
    }
}
