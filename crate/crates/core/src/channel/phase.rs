use serde::{Deserialize, Serialize};

use crate::linalg::{CMatrix, CVector, C64};
use crate::{Error, Result};

/// Practical reflection model: the amplitude of an element depends on the
/// phase it applies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseShiftConfig {
    pub a_min: f64,
    pub b: f64,
    /// Radians.
    pub phi: f64,
    /// `theta[l][n]` in [-pi, pi). Empty means "draw uniformly from the seed".
    pub theta: Vec<Vec<f64>>,
}

impl Default for PhaseShiftConfig {
    fn default() -> Self {
        Self {
            a_min: 0.2,
            b: 1.6,
            phi: 0.43 * std::f64::consts::PI,
            theta: Vec::new(),
        }
    }
}

impl PhaseShiftConfig {
    pub fn validate(&self, l: usize, n: usize) -> Result<()> {
        if !(0.0..=1.0).contains(&self.a_min) || self.b < 0.0 || self.phi < 0.0 {
            return Err(Error::InvalidScenario(format!(
                "phase model needs a_min in [0,1], b >= 0, phi >= 0; got {}, {}, {}",
                self.a_min, self.b, self.phi
            )));
        }
        if self.theta.len() != l || self.theta.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidScenario(format!("phase table must be {l} x {n}")));
        }
        Ok(())
    }
}

pub fn phase_amplitude(theta: f64, cfg: &PhaseShiftConfig) -> f64 {
    let s = ((theta - cfg.phi).sin() + 1.0) / 2.0;
    // sin can overshoot 1 by an ulp
    (1.0 - cfg.a_min) * s.clamp(0.0, 1.0).powf(cfg.b) + cfg.a_min
}

/// `a(theta) e^{j theta}`.
pub fn reflection_coefficient(theta: f64, cfg: &PhaseShiftConfig) -> C64 {
    C64::from_polar(phase_amplitude(theta, cfg), theta)
}

/// Diagonal of the phase-shift matrix of RIS `ell`.
pub fn phase_diagonal(cfg: &PhaseShiftConfig, ell: usize) -> CVector {
    CVector::from_iterator(
        cfg.theta[ell].len(),
        cfg.theta[ell].iter().map(|&t| reflection_coefficient(t, cfg)),
    )
}

pub fn build_phase_matrix(cfg: &PhaseShiftConfig, ell: usize) -> CMatrix {
    CMatrix::from_diagonal(&phase_diagonal(cfg, ell))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cfg_with(theta: Vec<f64>) -> PhaseShiftConfig {
        PhaseShiftConfig {
            theta: vec![theta],
            ..Default::default()
        }
    }

    #[test]
    fn amplitude_extremes() {
        let cfg = PhaseShiftConfig::default();
        assert!((phase_amplitude(cfg.phi + PI / 2.0, &cfg) - 1.0).abs() < 1e-15);
        assert!((phase_amplitude(cfg.phi - PI / 2.0, &cfg) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn amplitude_at_zero_matches_direct_evaluation() {
        let cfg = PhaseShiftConfig::default();
        // (1 - 0.2) * ((sin(-0.43 pi) + 1) / 2)^1.6 + 0.2
        let s: f64 = ((-0.43 * PI).sin() + 1.0) / 2.0;
        let expected = 0.8 * s.powf(1.6) + 0.2;
        let got = phase_amplitude(0.0, &cfg);
        assert!((got - expected).abs() < 1e-15);
        assert!(got > 0.2 && got < 1.0);
    }

    #[test]
    fn amplitude_stays_in_range_on_dense_grid() {
        let cfg = PhaseShiftConfig::default();
        for i in 0..100_000 {
            let t = -PI + 2.0 * PI * i as f64 / 100_000.0;
            let a = phase_amplitude(t, &cfg);
            assert!((0.2..=1.0).contains(&a), "a({t}) = {a}");
        }
    }

    #[test]
    fn phase_matrix_is_diagonal_with_expected_moduli() {
        let cfg = PhaseShiftConfig::default();
        let top = cfg.phi + PI / 2.0 - 2.0 * PI;
        let m = build_phase_matrix(&cfg_with(vec![top; 3]), 0);
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert_eq!(m[(i, j)], C64::new(0.0, 0.0));
                }
            }
            assert!((m[(i, i)].norm() - 1.0).abs() < 1e-15);
            assert!((m[(i, i)] - C64::from_polar(1.0, top)).norm() < 1e-15);
        }

        let bottom = build_phase_matrix(&cfg_with(vec![cfg.phi - PI / 2.0]), 0);
        assert_eq!(bottom.shape(), (1, 1));
        assert!((bottom[(0, 0)].norm() - 0.2).abs() < 1e-15);
    }
}
