use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{GeometryConfig, LinkRegime, PathLossConfig, PhaseShiftConfig, RadioConfig, Scenario, ScenarioConfig};
use crate::ue_estimation::{FeatureSet, LabelKind};
use crate::{Error, Result};

/// The estimators an experiment can evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Hardening,
    ModelBased,
    Learned,
    BaselineA,
    BaselineB,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 5] = [
        EstimatorKind::Hardening,
        EstimatorKind::ModelBased,
        EstimatorKind::Learned,
        EstimatorKind::BaselineA,
        EstimatorKind::BaselineB,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Hardening => "hardening",
            EstimatorKind::ModelBased => "model_based",
            EstimatorKind::Learned => "learned",
            EstimatorKind::BaselineA => "baseline_a",
            EstimatorKind::BaselineB => "baseline_b",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == s)
    }

    /// Feature set of a learned estimator.
    pub fn feature_set(self) -> Option<FeatureSet> {
        match self {
            EstimatorKind::Learned => Some(FeatureSet::Full),
            EstimatorKind::BaselineA => Some(FeatureSet::BaselineA),
            EstimatorKind::BaselineB => Some(FeatureSet::BaselineB),
            _ => None,
        }
    }
}

/// Record counts of the three splits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSizes {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl SplitSizes {
    pub fn total(&self) -> usize {
        self.train + self.val + self.test
    }
}

/// The `[experiment]` section.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    /// Overrides `[pathloss] regime` when set.
    pub regime: Option<LinkRegime>,
    /// `(M, N)` pairs.
    pub sizes: Vec<[usize; 2]>,
    pub large_scale: usize,
    pub small_scale: usize,
    /// Fresh draws behind every user-side expectation.
    pub genie_samples: usize,
    pub split: SplitSizes,
    /// Shuffle records individually instead of by large-scale realization.
    pub flat_split: bool,
    pub estimators: Vec<EstimatorKind>,
    /// The typical user whose gain is estimated.
    pub user: usize,
    pub label: LabelKind,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub bootstrap_resamples: usize,
    pub confidence: f64,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            regime: None,
            sizes: vec![[40, 25]],
            large_scale: 200,
            small_scale: 250,
            genie_samples: 1000,
            split: SplitSizes {
                train: 30_000,
                val: 5_000,
                test: 15_000,
            },
            flat_split: false,
            estimators: EstimatorKind::ALL.to_vec(),
            user: 0,
            label: LabelKind::RealPart,
            epochs: 40,
            batch_size: 128,
            learning_rate: 0.01,
            bootstrap_resamples: 1000,
            confidence: 0.95,
        }
    }
}

/// A complete run description: the scenario sections plus `[experiment]`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub geometry: GeometryConfig,
    pub radio: RadioConfig,
    pub phase: PhaseShiftConfig,
    pub pathloss: PathLossConfig,
    pub experiment: ExperimentSection,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// The full-scale profile: 2000 x 1000 records, 200 epochs, both sizes.
    pub fn full_profile() -> Self {
        let mut cfg = Self::default();
        let e = &mut cfg.experiment;
        e.sizes = vec![[40, 25], [100, 64]];
        e.large_scale = 2000;
        e.small_scale = 1000;
        e.split = SplitSizes {
            train: 400_000,
            val: 100_000,
            test: 1_500_000,
        };
        e.epochs = 200;
        cfg
    }

    pub fn regime(&self) -> LinkRegime {
        self.experiment.regime.unwrap_or(self.pathloss.regime)
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.experiment;
        let bad = |m: String| Err(Error::Config(m));
        if e.sizes.is_empty() {
            return bad("experiment.sizes must list at least one (M, N) pair".into());
        }
        if e.large_scale == 0 || e.small_scale == 0 || e.genie_samples == 0 {
            return bad("large_scale, small_scale and genie_samples must be >= 1".into());
        }
        let total = e.large_scale * e.small_scale;
        if e.split.total() != total {
            return bad(format!(
                "split sizes {} + {} + {} must sum to the {total} records",
                e.split.train, e.split.val, e.split.test
            ));
        }
        if !e.flat_split
            && [e.split.train, e.split.val, e.split.test].iter().any(|s| s % e.small_scale != 0)
        {
            return bad(format!(
                "split sizes must be multiples of small_scale = {} when splitting by large-scale realization",
                e.small_scale
            ));
        }
        if e.estimators.is_empty() {
            return bad("experiment.estimators is empty".into());
        }
        if e.user >= self.geometry.k {
            return bad(format!("user {} out of range for K = {}", e.user, self.geometry.k));
        }
        if e.batch_size == 0 || !(e.learning_rate > 0.0) {
            return bad("batch_size and learning_rate must be positive".into());
        }
        if !(e.confidence > 0.0 && e.confidence < 1.0) {
            return bad("confidence must lie in (0, 1)".into());
        }
        for &[m, n] in &e.sizes {
            self.scenario(m, n)?;
        }
        Ok(())
    }

    /// Scenario for one `(M, N)` cell, with the experiment regime applied.
    pub fn scenario(&self, m: usize, n: usize) -> Result<Scenario> {
        let mut geometry = self.geometry.clone();
        geometry.m = m;
        geometry.n = n;
        let mut pathloss = self.pathloss.clone();
        pathloss.regime = self.regime();
        let phase = self.phase.clone();
        if !phase.theta.is_empty() && phase.theta.iter().any(|row| row.len() != n) {
            return Err(Error::Config(format!("[phase] theta rows must have N = {n} entries")));
        }
        Scenario::from_config(&ScenarioConfig {
            geometry,
            radio: self.radio.clone(),
            phase,
            pathloss,
            seed: self.seed,
        })
    }

    /// SHA-256 of the canonical TOML form, hex encoded.
    pub fn hash(&self) -> String {
        hex(&Sha256::digest(self.to_toml().as_bytes()))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
