use rand::Rng;
use serde::{Deserialize, Serialize};

use super::pathloss::PathLossConfig;
use super::phase::PhaseShiftConfig;
use crate::rng::{StreamKey, Tag};
use crate::{Error, Result};

/// Axis-aligned rectangle in the horizontal plane, meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Area {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    /// BS antennas.
    pub m: usize,
    /// Elements per RIS.
    pub n: usize,
    /// Users.
    pub k: usize,
    pub bs_position: [f64; 2],
    /// One entry per RIS; an empty list disables the RIS links.
    pub ris_positions: Vec<[f64; 2]>,
    pub ue_area: Area,
    /// Height of the BS and the RISs above the users, meters.
    pub altitude_gap: f64,
    /// BS ULA spacing in wavelengths.
    pub d_b_over_lambda: f64,
    /// RIS UPA spacing in wavelengths.
    pub d_r_over_lambda: f64,
    /// Elements per UPA row; `None` uses `min(N, 5)`.
    pub upa_row_len: Option<usize>,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            m: 40,
            n: 25,
            k: 10,
            bs_position: [0.0, 0.0],
            ris_positions: vec![[10.0, 30.0], [10.0, -30.0]],
            ue_area: Area {
                min: [150.0, -50.0],
                max: [250.0, 50.0],
            },
            altitude_gap: 10.0,
            d_b_over_lambda: 0.5,
            d_r_over_lambda: 0.25,
            upa_row_len: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioConfig {
    pub pilot_power_w: f64,
    pub downlink_power_w: f64,
    /// Overrides the pilot SNR derived from power and noise.
    pub rho_ul: Option<f64>,
    /// Overrides the downlink SNR derived from power and noise.
    pub rho_d: Option<f64>,
    pub tau_c: usize,
    /// Defaults to the number of users.
    pub tau_p: Option<usize>,
}

impl Default for RadioConfig {
    fn default() -> Self {
        Self {
            pilot_power_w: 0.1,
            downlink_power_w: 10.0,
            rho_ul: None,
            rho_d: None,
            tau_c: 500,
            tau_p: None,
        }
    }
}

/// The sectioned on-disk form of a [`Scenario`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub geometry: GeometryConfig,
    pub radio: RadioConfig,
    pub phase: PhaseShiftConfig,
    pub pathloss: PathLossConfig,
    pub seed: u64,
}

/// Validated geometry and radio parameters.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Scenario {
    pub m: usize,
    pub n: usize,
    pub l: usize,
    pub k: usize,
    pub bs_position: [f64; 2],
    pub ris_positions: Vec<[f64; 2]>,
    pub ue_area: Area,
    pub altitude_gap: f64,
    pub d_b_over_lambda: f64,
    pub d_r_over_lambda: f64,
    pub upa_row_len: usize,
    pub rho_ul: f64,
    pub rho_d: f64,
    pub tau_c: usize,
    pub tau_p: usize,
    /// Phase values are always populated, one row per RIS.
    pub phase: PhaseShiftConfig,
    pub pathloss: PathLossConfig,
    pub seed: u64,
}

impl Scenario {
    pub fn from_config(cfg: &ScenarioConfig) -> Result<Self> {
        let g = &cfg.geometry;
        let r = &cfg.radio;
        let l = g.ris_positions.len();
        let tau_p = r.tau_p.unwrap_or(g.k);
        let noise_w = cfg.pathloss.noise_power_w();
        let rho_ul = r.rho_ul.unwrap_or(r.pilot_power_w / noise_w);
        let rho_d = r.rho_d.unwrap_or(r.downlink_power_w / noise_w);
        let upa_row_len = g.upa_row_len.unwrap_or(g.n.min(5));

        let mut phase = cfg.phase.clone();
        if phase.theta.is_empty() {
            phase.theta = draw_phases(cfg.seed, l, g.n);
        }

        let scenario = Self {
            m: g.m,
            n: g.n,
            l,
            k: g.k,
            bs_position: g.bs_position,
            ris_positions: g.ris_positions.clone(),
            ue_area: g.ue_area,
            altitude_gap: g.altitude_gap,
            d_b_over_lambda: g.d_b_over_lambda,
            d_r_over_lambda: g.d_r_over_lambda,
            upa_row_len,
            rho_ul,
            rho_d,
            tau_c: r.tau_c,
            tau_p,
            phase,
            pathloss: cfg.pathloss.clone(),
            seed: cfg.seed,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    /// Default geometry with the given array sizes.
    pub fn with_sizes(m: usize, n: usize, seed: u64) -> Result<Self> {
        let mut cfg = ScenarioConfig {
            seed,
            ..Default::default()
        };
        cfg.geometry.m = m;
        cfg.geometry.n = n;
        Self::from_config(&cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidScenario(msg));
        if self.m == 0 || self.n == 0 || self.k == 0 {
            return bad(format!("M={}, N={}, K={} must all be >= 1", self.m, self.n, self.k));
        }
        if !(self.k <= self.tau_p && self.tau_p <= self.tau_c) {
            return bad(format!(
                "need K <= tau_p <= tau_c, got K={}, tau_p={}, tau_c={}",
                self.k, self.tau_p, self.tau_c
            ));
        }
        if !(self.rho_ul > 0.0 && self.rho_d > 0.0) || !self.rho_ul.is_finite() || !self.rho_d.is_finite() {
            return bad(format!("SNRs must be positive, got {} / {}", self.rho_ul, self.rho_d));
        }
        if !(self.d_b_over_lambda > 0.0 && self.d_r_over_lambda > 0.0) {
            return bad("array spacings must be positive".into());
        }
        if self.upa_row_len == 0 {
            return bad("UPA row length must be >= 1".into());
        }
        let a = &self.ue_area;
        if !(a.min[0] <= a.max[0] && a.min[1] <= a.max[1]) {
            return bad(format!("empty user area {a:?}"));
        }
        if self.altitude_gap < 0.0 {
            return bad("altitude gap must be >= 0".into());
        }
        self.phase.validate(self.l, self.n)?;
        self.pathloss.validate()?;
        Ok(())
    }
}

/// Uniform phases in [-pi, pi), fixed for the lifetime of a scenario.
pub fn draw_phases(seed: u64, l: usize, n: usize) -> Vec<Vec<f64>> {
    let root = StreamKey::new(seed);
    (0..l)
        .map(|ell| {
            let mut rng = root.child(Tag::Phases, ell as u64).rng();
            (0..n)
                .map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
                .collect()
        })
        .collect()
}
