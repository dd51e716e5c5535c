use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::{Array1, Array2};
use rismimo_nn::{read_checkpoint, train, write_checkpoint, AdamConfig, Estimator, Mlp, Samples, TrainConfig, TrainedModel};
use serde::{Deserialize, Serialize};

use super::config::{EstimatorKind, ExperimentConfig};
use super::dataset::{generate_dataset, Dataset, DatasetRecord};
use super::split::{split_dataset, SplitIndices};
use crate::channel::LinkRegime;
use crate::linalg::C64;
use crate::rng::{StreamKey, Tag};
use crate::ue_estimation::{
    hardening_bound_estimate, model_based_estimate, nmse_bootstrap, FeatureSet, LabelKind, NmseSummary,
};
use crate::{Error, Result};

pub const VERSION: &str = concat!("rismimo ", env!("CARGO_PKG_VERSION"));

/// One `(estimator, regime, M, N)` cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub estimator: EstimatorKind,
    pub regime: LinkRegime,
    pub m: usize,
    pub n: usize,
    pub summary: NmseSummary,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<CellResult>,
}

impl ResultTable {
    pub fn get(&self, estimator: EstimatorKind, m: usize, n: usize) -> Option<&CellResult> {
        self.rows.iter().find(|r| r.estimator == estimator && r.m == m && r.n == n)
    }

    /// Wall-clock free, so identical runs give identical bytes.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("estimator,regime,m,n,nmse_db,ci_low_db,ci_high_db,half_width_db,samples\n");
        for r in &self.rows {
            let s = &r.summary;
            out.push_str(&format!(
                "{},{},{},{},{:.6},{:.6},{:.6},{:.6},{}\n",
                r.estimator.name(),
                regime_name(r.regime),
                r.m,
                r.n,
                s.nmse_db,
                s.ci_low_db,
                s.ci_high_db,
                s.half_width_db(),
                s.samples
            ));
        }
        out
    }
}

pub fn regime_name(r: LinkRegime) -> &'static str {
    match r {
        LinkRegime::Probabilistic => "probabilistic",
        LinkRegime::LosDominated => "los_dominated",
        LinkRegime::NlosDominated => "nlos_dominated",
        LinkRegime::PureLos => "pure_los",
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub estimator: EstimatorKind,
    pub m: usize,
    pub n: usize,
    pub epochs: usize,
    pub best_epoch: usize,
    pub training_seconds: f64,
    pub inference_seconds_per_1e5: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub estimator: EstimatorKind,
    pub m: usize,
    pub n: usize,
    pub seed: u64,
    pub config_hash: String,
    pub training_seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub seed: u64,
    pub config_hash: String,
    pub regime: LinkRegime,
    pub config: ExperimentConfig,
    pub rows: Vec<ManifestRow>,
    pub generation_seconds: Vec<(usize, usize, f64)>,
    pub timings: Vec<TimingRecord>,
    pub files: Vec<String>,
}

impl Manifest {
    pub fn new(cfg: &ExperimentConfig) -> Self {
        Self {
            version: VERSION.to_string(),
            seed: cfg.seed,
            config_hash: cfg.hash(),
            regime: cfg.regime(),
            config: cfg.clone(),
            rows: Vec::new(),
            generation_seconds: Vec::new(),
            timings: Vec::new(),
            files: Vec::new(),
        }
    }
}

/// Feature matrix and regression targets of the selected records.
pub fn samples(records: &[DatasetRecord], idx: &[usize], set: FeatureSet, label: LabelKind) -> Result<Samples> {
    let width = set.width();
    let mut x = Array2::zeros((idx.len(), width));
    let mut y = Array1::zeros(idx.len());
    for (row, &i) in idx.iter().enumerate() {
        for (c, v) in records[i].features(set).into_iter().enumerate() {
            x[(row, c)] = v;
        }
        y[row] = label.target(records[i].alpha);
    }
    Ok(Samples::new(x, y)?)
}

/// Seed of the training shuffle for one cell and feature set.
pub fn training_seed(seed: u64, m: usize, n: usize, set: FeatureSet) -> u64 {
    StreamKey::new(seed)
        .child(Tag::Training, ((m as u64) << 32) | n as u64)
        .child(Tag::Training, set as u64)
        .derive_u64()
}

/// Trains one regressor on the training split, selecting on validation.
pub fn train_cell(
    ds: &Dataset,
    split: &SplitIndices,
    set: FeatureSet,
    cfg: &ExperimentConfig,
) -> Result<(TrainedModel, f64)> {
    let e = &cfg.experiment;
    let tr = samples(&ds.records, &split.train, set, e.label)?;
    let va = samples(&ds.records, &split.val, set, e.label)?;
    let seed = training_seed(cfg.seed, ds.header.m, ds.header.n, set);
    let mut init = StreamKey::new(seed).child(Tag::Init, 0).rng();
    let model = Mlp::estimator(set.width(), &mut init);
    let tc = TrainConfig {
        epochs: e.epochs,
        batch_size: e.batch_size,
        adam: AdamConfig {
            lr: e.learning_rate,
            ..AdamConfig::default()
        },
        seed,
    };
    let start = Instant::now();
    let trained = train(model, &tr, &va, &tc)?;
    Ok((trained, start.elapsed().as_secs_f64()))
}

/// Estimates of `kind` for the selected records.
pub fn estimate(
    kind: EstimatorKind,
    records: &[DatasetRecord],
    idx: &[usize],
    model: Option<&Estimator>,
) -> Result<Vec<C64>> {
    match kind.feature_set() {
        None => Ok(idx
            .iter()
            .map(|&i| {
                let r = &records[i];
                match kind {
                    EstimatorKind::Hardening => hardening_bound_estimate(&r.stats()),
                    _ => model_based_estimate(r.xi, &r.stats()),
                }
            })
            .collect()),
        Some(set) => {
            let model = model.ok_or_else(|| Error::MissingModel(kind.name().to_string()))?;
            let x = samples(records, idx, set, LabelKind::RealPart)?.features;
            Ok(model.predict_batch(x.view())?)
        }
    }
}

/// NMSE of every requested estimator on the test split. Bootstrap
/// resamples are shared across estimators.
pub fn evaluate(
    ds: &Dataset,
    split: &SplitIndices,
    kinds: &[EstimatorKind],
    models: &BTreeMap<EstimatorKind, Estimator>,
    cfg: &ExperimentConfig,
) -> Result<Vec<CellResult>> {
    let e = &cfg.experiment;
    let truths: Vec<C64> = split.test.iter().map(|&i| ds.records[i].alpha).collect();
    let key = StreamKey::new(cfg.seed).child(Tag::Bootstrap, ((ds.header.m as u64) << 32) | ds.header.n as u64);
    kinds
        .iter()
        .map(|&kind| {
            let est = estimate(kind, &ds.records, &split.test, models.get(&kind))?;
            Ok(CellResult {
                estimator: kind,
                regime: ds.header.regime,
                m: ds.header.m,
                n: ds.header.n,
                summary: nmse_bootstrap(&est, &truths, e.bootstrap_resamples, e.confidence, &key)?,
            })
        })
        .collect()
}

/// Everything a run produced, before it is written out.
#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub table: ResultTable,
    pub manifest: Manifest,
    pub datasets: Vec<Dataset>,
    pub splits: Vec<SplitIndices>,
    pub models: Vec<(usize, usize, EstimatorKind, Estimator)>,
    pub histories: Vec<(usize, usize, EstimatorKind, TrainedModel)>,
}

/// Generates, splits, trains and evaluates every `(M, N)` cell.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let e = &cfg.experiment;
    let mut manifest = Manifest::new(cfg);
    let mut table = ResultTable::default();
    let mut out = ExperimentOutput {
        table: ResultTable::default(),
        manifest: Manifest::new(cfg),
        datasets: Vec::new(),
        splits: Vec::new(),
        models: Vec::new(),
        histories: Vec::new(),
    };
    for &[m, n] in &e.sizes {
        let start = Instant::now();
        let ds = generate_dataset(cfg, m, n)?;
        manifest.generation_seconds.push((m, n, start.elapsed().as_secs_f64()));
        let split = split_dataset(&ds.records, e.split, cfg.seed, e.flat_split)?;

        let mut models = BTreeMap::new();
        for &kind in &e.estimators {
            let mut training_seed_used = None;
            if let Some(set) = kind.feature_set() {
                let (trained, secs) = train_cell(&ds, &split, set, cfg)?;
                let t0 = Instant::now();
                estimate(kind, &ds.records, &split.test, Some(&trained.estimator))?;
                let per = t0.elapsed().as_secs_f64() * 1e5 / split.test.len().max(1) as f64;
                manifest.timings.push(TimingRecord {
                    estimator: kind,
                    m,
                    n,
                    epochs: trained.history.len(),
                    best_epoch: trained.best_epoch,
                    training_seconds: secs,
                    inference_seconds_per_1e5: per,
                });
                training_seed_used = Some(training_seed(cfg.seed, m, n, set));
                models.insert(kind, trained.estimator.clone());
                out.models.push((m, n, kind, trained.estimator.clone()));
                out.histories.push((m, n, kind, trained));
            }
            manifest.rows.push(ManifestRow {
                estimator: kind,
                m,
                n,
                seed: cfg.seed,
                config_hash: manifest.config_hash.clone(),
                training_seed: training_seed_used,
            });
        }
        table.rows.extend(evaluate(&ds, &split, &e.estimators, &models, cfg)?);
        out.datasets.push(ds);
        out.splits.push(split);
    }
    out.table = table;
    out.manifest = manifest;
    Ok(out)
}

/// File name for a per-cell artifact: plain when the run has one size.
pub fn artifact_name(stem: &str, ext: &str, m: usize, n: usize, single: bool) -> String {
    if single {
        format!("{stem}.{ext}")
    } else {
        format!("{stem}_M{m}_N{n}.{ext}")
    }
}

pub fn model_stem(kind: EstimatorKind) -> &'static str {
    match kind {
        EstimatorKind::Learned => "model",
        EstimatorKind::BaselineA => "model_baseline_a",
        EstimatorKind::BaselineB => "model_baseline_b",
        _ => "model_other",
    }
}

pub fn save_model(path: &Path, model: &Estimator, tag: &str) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_checkpoint(&mut f, model, tag)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<(Estimator, String)> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path).map_err(|e| {
        Error::MissingModel(format!("{}: {e}", path.display()))
    })?);
    Ok(read_checkpoint(&mut f)?)
}

/// Writes `results.csv`, `manifest.json`, datasets, splits and checkpoints.
pub fn write_outputs(dir: &Path, out: &mut ExperimentOutput) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let single = out.datasets.len() == 1;
    let mut written = Vec::new();
    for (ds, split) in out.datasets.iter().zip(&out.splits) {
        let (m, n) = (ds.header.m, ds.header.n);
        let p = dir.join(artifact_name("dataset", "bin", m, n, single));
        ds.save(&p)?;
        written.push(p);
        let p = dir.join(artifact_name("split", "json", m, n, single));
        std::fs::write(&p, serde_json::to_vec(split)?)?;
        written.push(p);
    }
    for (m, n, kind, model) in &out.models {
        let p = dir.join(artifact_name(model_stem(*kind), "ckpt", *m, *n, single));
        save_model(&p, model, &format!("{} M={m} N={n}", kind.name()))?;
        written.push(p);
    }
    let p = dir.join("results.csv");
    std::fs::write(&p, out.table.to_csv())?;
    written.push(p);
    let manifest_path = dir.join("manifest.json");
    written.push(manifest_path.clone());
    out.manifest.files = written
        .iter()
        .filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()))
        .collect();
    std::fs::write(&manifest_path, serde_json::to_vec_pretty(&out.manifest)?)?;
    Ok(written)
}
