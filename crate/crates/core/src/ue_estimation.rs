//! User-side estimation of the effective channel gain `alpha_kk`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::downlink::CoherenceSimulator;
use crate::linalg::{CVector, C64};
use crate::rng::{StreamKey, Tag};
use crate::{Error, Result};

/// Reported in place of `-inf` when the estimates are exact.
pub const NMSE_FLOOR_DB: f64 = -300.0;

/// `xi = (1/n) sum_n |y(n)|^2`.
pub fn sample_mean_power(y: &CVector) -> Result<f64> {
    if y.is_empty() {
        return Err(Error::EmptyInput("downlink samples"));
    }
    Ok(y.iter().map(|v| v.norm_sqr()).sum::<f64>() / y.len() as f64)
}

/// Channel statistics a user is assumed to know.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UeStatistics {
    pub mean_alpha_kk: C64,
    /// `E{sum_{k' != k} |alpha_kk'|^2} + 1`.
    pub delta_k: f64,
    /// `rho_d eta_k E{||u_k||^2}`.
    pub power_feature: f64,
    pub mc_samples: usize,
}

/// Monte-Carlo statistics of user `k` over `mc_samples` fresh intervals.
pub fn genie_statistics(sim: &CoherenceSimulator, k: usize, mc_samples: usize, key: &StreamKey) -> Result<UeStatistics> {
    if mc_samples == 0 {
        return Err(Error::EmptyInput("Monte-Carlo samples"));
    }
    let mut mean = C64::from(0.0);
    let mut interference = 0.0;
    for j in 0..mc_samples as u64 {
        let iv = sim.draw(&key.child(Tag::Genie, j))?;
        mean += iv.gains.desired(k);
        interference += iv.gains.interference_power(k);
    }
    let n = mc_samples as f64;
    let budget = sim.budget();
    Ok(UeStatistics {
        mean_alpha_kk: mean / n,
        delta_k: interference / n + 1.0,
        power_feature: budget.rho_d * budget.eta[k] * sim.stats(k).e_norm2_u,
        mc_samples,
    })
}

/// `delta_k` alone.
pub fn interference_noise_power(sim: &CoherenceSimulator, k: usize, mc_samples: usize, key: &StreamKey) -> Result<f64> {
    Ok(genie_statistics(sim, k, mc_samples, key)?.delta_k)
}

/// `E{alpha_kk}`.
pub fn hardening_bound_estimate(stats: &UeStatistics) -> C64 {
    stats.mean_alpha_kk
}

/// `sqrt(xi - delta)` when positive, otherwise the mean gain.
pub fn model_based_estimate(xi_k: f64, stats: &UeStatistics) -> C64 {
    if xi_k > stats.delta_k {
        C64::from((xi_k - stats.delta_k).sqrt())
    } else {
        stats.mean_alpha_kk
    }
}

/// Which of the four features a regressor sees.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSet {
    /// (i)-(iv).
    Full,
    /// (i), (ii), (iii).
    BaselineA,
    /// (i), (ii), (iv).
    BaselineB,
}

impl FeatureSet {
    pub fn indices(self) -> &'static [usize] {
        match self {
            FeatureSet::Full => &[0, 1, 2, 3],
            FeatureSet::BaselineA => &[0, 1, 2],
            FeatureSet::BaselineB => &[0, 1, 3],
        }
    }

    pub fn width(self) -> usize {
        self.indices().len()
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureSet::Full => "full",
            FeatureSet::BaselineA => "baseline_a",
            FeatureSet::BaselineB => "baseline_b",
        }
    }
}

/// Regression target derived from the complex gain.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelKind {
    #[default]
    RealPart,
    Magnitude,
}

impl LabelKind {
    pub fn target(self, alpha: C64) -> f64 {
        match self {
            LabelKind::RealPart => alpha.re,
            LabelKind::Magnitude => alpha.norm(),
        }
    }
}

/// One training/evaluation sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub xi: f64,
    pub delta: f64,
    pub power_feature: f64,
    pub mean_alpha_mag: f64,
    pub label_alpha: C64,
}

impl FeatureRecord {
    /// Features (i)-(iv) in order.
    pub fn features(&self) -> [f64; 4] {
        [self.xi, self.delta, self.power_feature, self.mean_alpha_mag]
    }

    pub fn select(&self, set: FeatureSet) -> Vec<f64> {
        let all = self.features();
        set.indices().iter().map(|&i| all[i]).collect()
    }
}

pub fn build_feature_record(xi_k: f64, stats: &UeStatistics, label_alpha: C64) -> Result<FeatureRecord> {
    let rec = FeatureRecord {
        xi: xi_k,
        delta: stats.delta_k,
        power_feature: stats.power_feature,
        mean_alpha_mag: stats.mean_alpha_kk.norm(),
        label_alpha,
    };
    if rec.features().iter().any(|x| !x.is_finite()) || !label_alpha.re.is_finite() || !label_alpha.im.is_finite() {
        return Err(Error::NonFinite("feature record"));
    }
    Ok(rec)
}

/// `10 log10(sum |alpha - alpha_hat|^2 / sum |alpha|^2)`.
pub fn nmse(estimates: &[C64], truths: &[C64]) -> Result<f64> {
    if estimates.len() != truths.len() {
        return Err(Error::DimensionMismatch {
            what: "estimates",
            expected: truths.len(),
            got: estimates.len(),
        });
    }
    if truths.is_empty() {
        return Err(Error::EmptyInput("NMSE truths"));
    }
    let (err, pow) = sums(estimates, truths, 0..truths.len());
    ratio_db(err, pow)
}

fn sums(estimates: &[C64], truths: &[C64], idx: impl Iterator<Item = usize>) -> (f64, f64) {
    idx.fold((0.0, 0.0), |(e, p), i| {
        (e + (truths[i] - estimates[i]).norm_sqr(), p + truths[i].norm_sqr())
    })
}

fn ratio_db(err: f64, pow: f64) -> Result<f64> {
    if pow <= 0.0 {
        return Err(Error::AllZeroTruth);
    }
    if err <= 0.0 {
        return Ok(NMSE_FLOOR_DB);
    }
    Ok((10.0 * (err / pow).log10()).max(NMSE_FLOOR_DB))
}

/// NMSE with a percentile bootstrap interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NmseSummary {
    pub nmse_db: f64,
    pub ci_low_db: f64,
    pub ci_high_db: f64,
    pub samples: usize,
}

impl NmseSummary {
    pub fn half_width_db(&self) -> f64 {
        (self.ci_high_db - self.ci_low_db) / 2.0
    }

    /// Strictly below `other` with disjoint intervals.
    pub fn clearly_below(&self, other: &NmseSummary) -> bool {
        self.nmse_db < other.nmse_db && self.ci_high_db < other.ci_low_db
    }
}

/// Bootstrap over records: `resamples` draws of `n` indices with
/// replacement; the interval is the central `level` mass of the resampled
/// NMSE values. The same key gives the same index draws, so estimators
/// evaluated on the same truths share resamples.
pub fn nmse_bootstrap(
    estimates: &[C64],
    truths: &[C64],
    resamples: usize,
    level: f64,
    key: &StreamKey,
) -> Result<NmseSummary> {
    let point = nmse(estimates, truths)?;
    let n = truths.len();
    if resamples == 0 {
        return Ok(NmseSummary {
            nmse_db: point,
            ci_low_db: point,
            ci_high_db: point,
            samples: n,
        });
    }
    let mut values = Vec::with_capacity(resamples);
    for b in 0..resamples as u64 {
        let mut rng = key.child(Tag::Bootstrap, b).rng();
        let (err, pow) = sums(estimates, truths, (0..n).map(|_| rng.random_range(0..n)));
        // a resample of all-zero truths carries no information; skip it
        if let Ok(v) = ratio_db(err, pow) {
            values.push(v);
        }
    }
    if values.is_empty() {
        return Err(Error::AllZeroTruth);
    }
    values.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok(NmseSummary {
        nmse_db: point,
        ci_low_db: quantile(&values, tail),
        ci_high_db: quantile(&values, 1.0 - tail),
        samples: n,
    })
}

/// Linear-interpolated quantile of sorted values.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{large_scale_key, sample_large_scale, LinkGain, LinkRegime, Scenario, ScenarioConfig};
    use crate::downlink::{downlink_receive, EffectiveGains};
    use crate::linalg::CMatrix;
    use proptest::prelude::*;

    fn stats(mean: C64, delta: f64) -> UeStatistics {
        UeStatistics {
            mean_alpha_kk: mean,
            delta_k: delta,
            power_feature: 3.0,
            mc_samples: 1000,
        }
    }

    fn scenario(k: usize, regime: LinkRegime, rho_d: f64) -> Scenario {
        let mut cfg = ScenarioConfig::default();
        cfg.pathloss.regime = regime;
        cfg.geometry.m = 8;
        cfg.geometry.n = 4;
        cfg.geometry.k = k;
        cfg.radio.rho_ul = Some(1.0);
        cfg.radio.rho_d = Some(rho_d);
        Scenario::from_config(&cfg).unwrap()
    }

    #[test]
    fn sample_power_examples() {
        let y = CVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(-1.0, 0.0), C64::new(0.0, -1.0)]);
        assert_eq!(sample_mean_power(&y).unwrap(), 1.0);
        assert_eq!(sample_mean_power(&CVector::zeros(5)).unwrap(), 0.0);
        assert!(matches!(sample_mean_power(&CVector::zeros(0)), Err(Error::EmptyInput(_))));
        let gains = EffectiveGains {
            alpha: CMatrix::from_element(1, 1, C64::from(3.0)),
        };
        let w = crate::downlink::downlink_receive_scaled(&gains, 0, 490, &StreamKey::new(1), 0.0);
        assert!((sample_mean_power(&w).unwrap() - 9.0).abs() < 1e-12);
    }

    #[test]
    fn single_user_delta_is_one() {
        let scn = scenario(1, LinkRegime::Probabilistic, 5.0);
        let ls = sample_large_scale(&scn, &large_scale_key(1, 0)).unwrap();
        let sim = CoherenceSimulator::new(&scn, &ls).unwrap();
        assert_eq!(interference_noise_power(&sim, 0, 10, &StreamKey::new(2)).unwrap(), 1.0);
    }

    #[test]
    fn silent_downlink_delta_is_one() {
        let scn = scenario(3, LinkRegime::Probabilistic, 1e-300);
        let mut ls = sample_large_scale(&scn, &large_scale_key(1, 0)).unwrap();
        ls.map_links(|_, g| *g = LinkGain::new(1.0, 1.0));
        let sim = CoherenceSimulator::new(&scn, &ls).unwrap();
        let d = interference_noise_power(&sim, 0, 10, &StreamKey::new(2)).unwrap();
        assert!((d - 1.0).abs() < 1e-250);
    }

    #[test]
    fn delta_matches_brute_force_average() {
        let mut cfg = ScenarioConfig::default();
        cfg.seed = 4;
        let scn = Scenario::from_config(&cfg).unwrap();
        let ls = sample_large_scale(&scn, &large_scale_key(4, 0)).unwrap();
        let sim = CoherenceSimulator::new(&scn, &ls).unwrap();
        let st = genie_statistics(&sim, 0, 1000, &StreamKey::new(5)).unwrap();
        // independent draws, straight accumulation of |alpha_0k'|^2
        let draws = 10_000u64;
        let vals: Vec<f64> = (0..draws)
            .map(|j| {
                let iv = sim.draw(&StreamKey::new(6).child(Tag::Record, j)).unwrap();
                (1..10).map(|i| iv.gains.alpha[(0, i)].norm_sqr()).sum::<f64>()
            })
            .collect();
        let mean = vals.iter().sum::<f64>() / draws as f64;
        let var_b = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
        // the genie average has its own Monte-Carlo error over 1000 draws
        let se = (var_b / draws as f64 + var_b / 1000.0).sqrt();
        assert!((st.delta_k - 1.0 - mean).abs() < 3.0 * se, "{} vs {mean} (se {se})", st.delta_k - 1.0);
    }

    #[test]
    fn pure_los_hardening_is_exact() {
        let scn = scenario(2, LinkRegime::PureLos, 5.0);
        let ls = sample_large_scale(&scn, &large_scale_key(1, 0)).unwrap();
        let sim = CoherenceSimulator::new(&scn, &ls).unwrap();
        let st = genie_statistics(&sim, 0, 20, &StreamKey::new(2)).unwrap();
        let iv = sim.draw(&StreamKey::new(3)).unwrap();
        let truth = iv.gains.desired(0);
        assert!((hardening_bound_estimate(&st) - truth).norm() < 1e-12 * truth.norm());
        // an all-LoS chain is deterministic, so the means agree to rounding
        assert!(nmse(&[hardening_bound_estimate(&st)], &[truth]).unwrap() < -200.0);
    }

    #[test]
    fn hardening_estimator_passes_the_mean_through() {
        let st = stats(C64::new(1.5, -0.25), 2.0);
        assert_eq!(hardening_bound_estimate(&st), C64::new(1.5, -0.25));
    }

    #[test]
    fn model_based_branches() {
        let st = stats(C64::new(0.7, 0.1), 3.0);
        assert_eq!(model_based_estimate(7.0, &st), C64::from(2.0));
        assert_eq!(model_based_estimate(3.0, &st), st.mean_alpha_kk);
        assert_eq!(model_based_estimate(0.5, &st), st.mean_alpha_kk);
    }

    #[test]
    fn model_based_concentrates_for_a_single_user() {
        let gains = EffectiveGains {
            alpha: CMatrix::from_element(1, 1, C64::from(2.0)),
        };
        let st = stats(C64::from(2.0), 1.0);
        let hits = (0..1000u64)
            .filter(|&t| {
                let y = downlink_receive(&gains, 0, 490, &StreamKey::new(7).child(Tag::Record, t));
                (model_based_estimate(sample_mean_power(&y).unwrap(), &st) - C64::from(2.0)).norm() <= 0.2
            })
            .count();
        assert!(hits >= 950, "{hits}");
    }

    #[test]
    fn feature_layouts() {
        let st = stats(C64::new(0.0, -2.0), 1.5);
        let rec = build_feature_record(4.0, &st, C64::new(1.0, 0.5)).unwrap();
        assert_eq!(rec.features(), [4.0, 1.5, 3.0, 2.0]);
        assert_eq!(rec.select(FeatureSet::Full), vec![4.0, 1.5, 3.0, 2.0]);
        assert_eq!(rec.select(FeatureSet::BaselineA), vec![4.0, 1.5, 3.0]);
        assert_eq!(rec.select(FeatureSet::BaselineB), vec![4.0, 1.5, 2.0]);
        assert!(matches!(build_feature_record(f64::NAN, &st, C64::from(1.0)), Err(Error::NonFinite(_))));
    }

    #[test]
    fn label_kinds() {
        assert_eq!(LabelKind::RealPart.target(C64::new(3.0, 4.0)), 3.0);
        assert_eq!(LabelKind::Magnitude.target(C64::new(3.0, 4.0)), 5.0);
    }

    #[test]
    fn nmse_examples() {
        let t = [C64::new(1.0, 2.0), C64::new(-0.5, 0.0)];
        assert_eq!(nmse(&t, &t).unwrap(), NMSE_FLOOR_DB);
        assert!(nmse(&[C64::from(0.0); 2], &t).unwrap().abs() < 1e-12);
        assert!(matches!(nmse(&t, &[C64::from(0.0); 2]), Err(Error::AllZeroTruth)));
        assert!(nmse(&t[..1], &t).is_err());
        // half the error power of the truth is -3.01 dB
        let est = [C64::new(1.0, 2.0) * (1.0 - 0.5f64.sqrt()), C64::new(-0.5, 0.0) * (1.0 - 0.5f64.sqrt())];
        assert!((nmse(&est, &t).unwrap() - 10.0 * 0.5f64.log10()).abs() < 1e-12);
    }

    #[test]
    fn bootstrap_interval_contains_point_and_is_reproducible() {
        let truths: Vec<C64> = (0..500).map(|i| C64::new(1.0 + (i % 7) as f64, 0.3)).collect();
        let est: Vec<C64> = truths.iter().enumerate().map(|(i, t)| t + C64::from(((i * 37) % 11) as f64 / 20.0)).collect();
        let a = nmse_bootstrap(&est, &truths, 300, 0.95, &StreamKey::new(3)).unwrap();
        let b = nmse_bootstrap(&est, &truths, 300, 0.95, &StreamKey::new(3)).unwrap();
        assert_eq!(a, b);
        assert!(a.ci_low_db <= a.nmse_db && a.nmse_db <= a.ci_high_db);
        assert!(a.half_width_db() > 0.0);
        let exact = nmse_bootstrap(&truths, &truths, 10, 0.95, &StreamKey::new(3)).unwrap();
        assert!(!exact.clearly_below(&exact));
    }

    proptest! {
        #[test]
        fn nmse_is_invariant_to_common_rotation(
            pairs in proptest::collection::vec(((-5.0..5.0f64, -5.0..5.0f64), (-5.0..5.0f64, -5.0..5.0f64)), 1..40),
            angle in -3.2..3.2f64,
        ) {
            let truths: Vec<C64> = pairs.iter().map(|(t, _)| C64::new(t.0, t.1)).collect();
            prop_assume!(truths.iter().any(|t| t.norm() > 1e-3));
            let est: Vec<C64> = pairs.iter().map(|(_, e)| C64::new(e.0, e.1)).collect();
            let rot = C64::from_polar(1.0, angle);
            let a = nmse(&est, &truths).unwrap();
            let rt: Vec<C64> = truths.iter().map(|x| x * rot).collect();
            let re: Vec<C64> = est.iter().map(|x| x * rot).collect();
            let b = nmse(&re, &rt).unwrap();
            prop_assert!((a - b).abs() < 1e-9 || (a == NMSE_FLOOR_DB && b == NMSE_FLOOR_DB));
        }

        #[test]
        fn model_based_is_total(xi in 0.0..1e6f64, delta in 1.0..1e6f64, re in -10.0..10.0f64) {
            let v = model_based_estimate(xi, &stats(C64::new(re, 0.0), delta));
            prop_assert!(v.re.is_finite() && v.im.is_finite());
            if xi > delta {
                prop_assert!(v.re >= 0.0 && v.im == 0.0);
            }
        }
    }
}
