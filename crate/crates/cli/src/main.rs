//! `rismimo`: simulate, generate datasets, train and compare gain estimators.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rismimo::channel::{large_scale_key, sample_large_scale, LinkRegime};
use rismimo::downlink::CoherenceSimulator;
use rismimo::linalg::norm_sqr;
use rismimo::pipeline::*;
use rismimo::rng::Tag;
use rismimo::ue_estimation::{genie_statistics, hardening_bound_estimate, model_based_estimate, sample_mean_power};
use serde_json::json;

#[derive(Parser)]
#[command(name = "rismimo", version, about = "RIS-assisted downlink massive MIMO: effective-gain estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one coherence interval and dump every intermediate quantity as JSON.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Large-scale realization index.
        #[arg(long, default_value_t = 0)]
        index: u64,
        /// Small-scale draw index within the realization.
        #[arg(long, default_value_t = 0)]
        draw: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate the feature dataset of every (M, N) cell.
    GenDataset {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also write a CSV export next to each binary dataset.
        #[arg(long)]
        csv: bool,
    },
    /// Split a dataset into train/validation/test indices.
    Split {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Train the learned estimators of a split dataset.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long = "split-file")]
        split_file: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Evaluate estimators on the test split of a stored dataset.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long = "split-file")]
        split_file: PathBuf,
        /// Directory holding the checkpoints; defaults to the dataset's directory.
        #[arg(long)]
        models: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run the whole pipeline and print the NMSE table.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Profile {
    Desk,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum RegimeArg {
    Probabilistic,
    LosDominated,
    NlosDominated,
    PureLos,
}

impl From<RegimeArg> for LinkRegime {
    fn from(r: RegimeArg) -> Self {
        match r {
            RegimeArg::Probabilistic => LinkRegime::Probabilistic,
            RegimeArg::LosDominated => LinkRegime::LosDominated,
            RegimeArg::NlosDominated => LinkRegime::NlosDominated,
            RegimeArg::PureLos => LinkRegime::PureLos,
        }
    }
}

/// Config file plus per-field overrides.
#[derive(Args, Clone)]
struct Common {
    /// TOML experiment config; defaults to the selected profile.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "desk")]
    profile: Profile,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    regime: Option<RegimeArg>,
    /// Comma-separated MxN pairs, e.g. `40x25,100x64`.
    #[arg(long)]
    sizes: Option<String>,
    #[arg(long)]
    large_scale: Option<usize>,
    #[arg(long)]
    small_scale: Option<usize>,
    #[arg(long)]
    genie_samples: Option<usize>,
    /// Record counts `TRAIN,VAL,TEST`; by default 60/10/30 % of the realizations.
    #[arg(long)]
    split: Option<String>,
    #[arg(long)]
    flat_split: bool,
    /// Comma-separated subset of hardening, model_based, learned, baseline_a, baseline_b.
    #[arg(long)]
    estimators: Option<String>,
    #[arg(long)]
    user: Option<usize>,
    #[arg(long)]
    users: Option<usize>,
    #[arg(long)]
    tau_c: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    bootstrap: Option<usize>,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, self.profile) {
            (Some(p), _) => ExperimentConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
            (None, Profile::Desk) => ExperimentConfig::default(),
            (None, Profile::Full) => ExperimentConfig::full_profile(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(k) = self.users {
            cfg.geometry.k = k;
            if cfg.radio.tau_p.is_some_and(|t| t < k) {
                cfg.radio.tau_p = Some(k);
            }
        }
        if let Some(t) = self.tau_c {
            cfg.radio.tau_c = t;
        }
        let e = &mut cfg.experiment;
        if let Some(r) = self.regime {
            e.regime = Some(r.into());
        }
        if let Some(s) = &self.sizes {
            e.sizes = parse_sizes(s)?;
        }
        let resized = self.large_scale.is_some() || self.small_scale.is_some();
        if let Some(v) = self.large_scale {
            e.large_scale = v;
        }
        if let Some(v) = self.small_scale {
            e.small_scale = v;
        }
        if let Some(v) = self.genie_samples {
            e.genie_samples = v;
        }
        e.flat_split |= self.flat_split;
        if let Some(s) = &self.split {
            e.split = parse_split(s)?;
        } else if resized {
            e.split = default_split(e.large_scale, e.small_scale);
        }
        if let Some(s) = &self.estimators {
            e.estimators = s
                .split(',')
                .map(|x| EstimatorKind::parse(x.trim()).with_context(|| format!("unknown estimator `{x}`")))
                .collect::<Result<_>>()?;
        }
        if let Some(v) = self.user {
            e.user = v;
        }
        if let Some(v) = self.epochs {
            e.epochs = v;
        }
        if let Some(v) = self.batch_size {
            e.batch_size = v;
        }
        if let Some(v) = self.learning_rate {
            e.learning_rate = v;
        }
        if let Some(v) = self.bootstrap {
            e.bootstrap_resamples = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Config for work on an existing dataset: the dataset's header decides
    /// the cell, counts and user; the split follows the record count.
    fn config_for(&self, header: &DatasetHeader) -> Result<ExperimentConfig> {
        let mut cfg = self.config()?;
        if self.seed.is_none() {
            cfg.seed = header.seed;
        }
        let e = &mut cfg.experiment;
        e.sizes = vec![[header.m, header.n]];
        e.regime = Some(header.regime);
        e.user = header.user;
        e.genie_samples = header.genie_samples;
        if e.large_scale != header.large_scale || e.small_scale != header.small_scale {
            e.large_scale = header.large_scale;
            e.small_scale = header.small_scale;
            if self.split.is_none() {
                e.split = default_split(e.large_scale, e.small_scale);
            }
        }
        cfg.geometry.k = header.k;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_sizes(s: &str) -> Result<Vec<[usize; 2]>> {
    s.split(',')
        .map(|pair| {
            let (m, n) = pair.trim().split_once(['x', 'X']).with_context(|| format!("bad size `{pair}`, want MxN"))?;
            Ok([m.parse()?, n.parse()?])
        })
        .collect()
}

fn parse_split(s: &str) -> Result<SplitSizes> {
    let v: Vec<usize> = s.split(',').map(|x| x.trim().parse()).collect::<Result<_, _>>()?;
    ensure!(v.len() == 3, "--split wants TRAIN,VAL,TEST");
    Ok(SplitSizes {
        train: v[0],
        val: v[1],
        test: v[2],
    })
}

/// 60/10/30 % of the large-scale realizations.
fn default_split(large: usize, small: usize) -> SplitSizes {
    let val = large / 10;
    let test = (3 * large) / 10;
    SplitSizes {
        train: (large - val - test) * small,
        val: val * small,
        test: test * small,
    }
}

fn read_split(path: &Path) -> Result<SplitIndices> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(serde_json::from_slice(&bytes)?)
}

fn load_dataset(path: &Path) -> Result<Dataset> {
    Dataset::load(path).with_context(|| format!("loading {}", path.display()))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    std::fs::write(path, serde_json::to_vec_pretty(value)?).with_context(|| format!("writing {}", path.display()))
}

fn c(v: rismimo::linalg::C64) -> serde_json::Value {
    json!([v.re, v.im])
}

fn simulate(common: &Common, index: u64, draw: u64, out: Option<&Path>) -> Result<()> {
    let cfg = common.config()?;
    let [m, n] = cfg.experiment.sizes[0];
    let scn = cfg.scenario(m, n)?;
    let user = cfg.experiment.user;
    let ls_key = large_scale_key(scn.seed, index);
    let ls = sample_large_scale(&scn, &ls_key)?;
    let sim = CoherenceSimulator::new(&scn, &ls)?;
    let stats = genie_statistics(&sim, user, cfg.experiment.genie_samples, &ls_key.child(Tag::Genie, 0))?;
    let key = ls_key.child(Tag::Record, draw);
    let iv = sim.draw(&key)?;
    let y = sim.receive(&iv, user, &key);
    let xi = sample_mean_power(&y)?;

    let users: Vec<_> = (0..scn.k)
        .map(|k| {
            let u = &iv.channel.u[k];
            let err = norm_sqr(&(u - &iv.estimates[k]));
            json!({
                "user": k,
                "position": ls.ue_positions[k],
                "direct": ls.direct[k],
                "ris": ls.ris_ue.iter().map(|row| row[k]).collect::<Vec<_>>(),
                "norm2_u": norm_sqr(u),
                "e_norm2_u": sim.stats(k).e_norm2_u,
                "e_norm2_uhat": sim.stats(k).e_norm2_uhat,
                "estimate_relative_error": err / norm_sqr(u),
                "alpha_row": (0..scn.k).map(|j| c(iv.gains.alpha[(k, j)])).collect::<Vec<_>>(),
                "desired": c(iv.gains.desired(k)),
                "interference_power": iv.gains.interference_power(k),
            })
        })
        .collect();
    let report = json!({
        "seed": scn.seed,
        "m": m,
        "n": n,
        "l": scn.l,
        "k": scn.k,
        "regime": experiment::regime_name(cfg.regime()),
        "rho_ul": scn.rho_ul,
        "rho_d": scn.rho_d,
        "tau_c": scn.tau_c,
        "tau_p": scn.tau_p,
        "large_scale_index": index,
        "draw": draw,
        "bs_position": scn.bs_position,
        "ris_positions": scn.ris_positions,
        "bs_ris": ls.bs_ris,
        "users": users,
        "typical_user": {
            "user": user,
            "downlink_samples": y.len(),
            "xi": xi,
            "delta": stats.delta_k,
            "mean_alpha": c(stats.mean_alpha_kk),
            "power_feature": stats.power_feature,
            "alpha": c(iv.gains.desired(user)),
            "hardening_estimate": c(hardening_bound_estimate(&stats)),
            "model_based_estimate": c(model_based_estimate(xi, &stats)),
        },
    });
    let text = serde_json::to_string_pretty(&report)?;
    println!("{text}");
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("simulate.json"), text)?;
    }
    Ok(())
}

fn gen_dataset(common: &Common, out: &Path, csv: bool) -> Result<()> {
    let cfg = common.config()?;
    std::fs::create_dir_all(out)?;
    let single = cfg.experiment.sizes.len() == 1;
    let mut manifest = Manifest::new(&cfg);
    for &[m, n] in &cfg.experiment.sizes {
        let start = Instant::now();
        let ds = generate_dataset(&cfg, m, n)?;
        let secs = start.elapsed().as_secs_f64();
        manifest.generation_seconds.push((m, n, secs));
        let name = artifact_name("dataset", "bin", m, n, single);
        ds.save(&out.join(&name))?;
        manifest.files.push(name.clone());
        if csv {
            let csv_name = artifact_name("dataset", "csv", m, n, single);
            let mut f = std::io::BufWriter::new(std::fs::File::create(out.join(&csv_name))?);
            ds.write_csv(&mut f)?;
            manifest.files.push(csv_name);
        }
        eprintln!("M={m} N={n}: {} records in {secs:.1} s -> {}", ds.len(), out.join(name).display());
    }
    manifest.files.push("manifest.json".into());
    std::fs::write(out.join("manifest.json"), serde_json::to_vec_pretty(&manifest)?)?;
    Ok(())
}

fn split(common: &Common, dataset: &Path, out: &Path) -> Result<()> {
    let ds = load_dataset(dataset)?;
    let cfg = common.config_for(&ds.header)?;
    let e = &cfg.experiment;
    let s = split_dataset(&ds.records, e.split, cfg.seed, e.flat_split)?;
    std::fs::create_dir_all(out)?;
    let path = out.join("split.json");
    std::fs::write(&path, serde_json::to_vec(&s)?)?;
    eprintln!(
        "train {} / val {} / test {} -> {}",
        s.train.len(),
        s.val.len(),
        s.test.len(),
        path.display()
    );
    Ok(())
}

fn train(common: &Common, dataset: &Path, split_file: &Path, out: &Path) -> Result<()> {
    let ds = load_dataset(dataset)?;
    let cfg = common.config_for(&ds.header)?;
    let split = read_split(split_file)?;
    std::fs::create_dir_all(out)?;
    let (m, n) = (ds.header.m, ds.header.n);
    let mut report = Vec::new();
    let kinds: Vec<_> = cfg.experiment.estimators.iter().filter(|k| k.feature_set().is_some()).collect();
    ensure!(!kinds.is_empty(), "no learned estimator requested");
    for &kind in kinds {
        let set = kind.feature_set().expect("learned estimator");
        let (trained, secs) = train_cell(&ds, &split, set, &cfg)?;
        let t0 = Instant::now();
        estimate(kind, &ds.records, &split.test, Some(&trained.estimator))?;
        let per = t0.elapsed().as_secs_f64() * 1e5 / split.test.len().max(1) as f64;
        let name = artifact_name(model_stem(kind), "ckpt", m, n, true);
        save_model(&out.join(&name), &trained.estimator, &format!("{} M={m} N={n}", kind.name()))?;
        eprintln!(
            "{}: best epoch {} val mse {:.6e}, {secs:.1} s -> {}",
            kind.name(),
            trained.best_epoch,
            trained.history[trained.best_epoch].val_mse,
            out.join(&name).display()
        );
        report.push(json!({
            "estimator": kind.name(),
            "checkpoint": name,
            "training_seed": training_seed(cfg.seed, m, n, set),
            "epochs": trained.history.len(),
            "best_epoch": trained.best_epoch,
            "training_seconds": secs,
            "inference_seconds_per_1e5": per,
            "initial_train_mse": trained.initial_train_mse,
            "train_mse": trained.history.iter().map(|h| h.train_mse).collect::<Vec<_>>(),
            "val_mse": trained.history.iter().map(|h| h.val_mse).collect::<Vec<_>>(),
        }));
    }
    write_json(
        &out.join("training.json"),
        &json!({"seed": cfg.seed, "config_hash": cfg.hash(), "m": m, "n": n, "models": report}),
    )
}

fn check_table(table: &ResultTable, kinds: &[EstimatorKind], sizes: &[[usize; 2]]) -> Result<()> {
    for &[m, n] in sizes {
        for &k in kinds {
            let Some(cell) = table.get(k, m, n) else {
                bail!("missing result cell {} M={m} N={n}", k.name());
            };
            let s = &cell.summary;
            ensure!(
                s.nmse_db.is_finite() && s.ci_low_db <= s.ci_high_db,
                "invalid NMSE for {} M={m} N={n}: {s:?}",
                k.name()
            );
        }
    }
    Ok(())
}

fn print_table(table: &ResultTable) {
    println!("{:<12} {:>5} {:>5} {:>11} {:>24} {:>9}", "estimator", "M", "N", "NMSE [dB]", "CI [dB]", "samples");
    for r in &table.rows {
        let s = &r.summary;
        println!(
            "{:<12} {:>5} {:>5} {:>11.3} {:>24} {:>9}",
            r.estimator.name(),
            r.m,
            r.n,
            s.nmse_db,
            format!("[{:.3}, {:.3}]", s.ci_low_db, s.ci_high_db),
            s.samples
        );
    }
}

fn evaluate_cmd(common: &Common, dataset: &Path, split_file: &Path, models: Option<&Path>, out: &Path) -> Result<()> {
    let ds = load_dataset(dataset)?;
    let cfg = common.config_for(&ds.header)?;
    let split = read_split(split_file)?;
    let dir = match models {
        Some(d) => d.to_path_buf(),
        None => dataset.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    let (m, n) = (ds.header.m, ds.header.n);
    let mut loaded = BTreeMap::new();
    let mut manifest = Manifest::new(&cfg);
    for &kind in &cfg.experiment.estimators {
        let mut seed = None;
        if let Some(set) = kind.feature_set() {
            let (model, _) = load_model(&dir.join(artifact_name(model_stem(kind), "ckpt", m, n, true)))?;
            loaded.insert(kind, model);
            seed = Some(training_seed(cfg.seed, m, n, set));
        }
        manifest.rows.push(ManifestRow {
            estimator: kind,
            m,
            n,
            seed: cfg.seed,
            config_hash: manifest.config_hash.clone(),
            training_seed: seed,
        });
    }
    let table = ResultTable {
        rows: evaluate(&ds, &split, &cfg.experiment.estimators, &loaded, &cfg)?,
    };
    check_table(&table, &cfg.experiment.estimators, &cfg.experiment.sizes)?;
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("results.csv"), table.to_csv())?;
    manifest.files = vec!["results.csv".into(), "manifest.json".into()];
    std::fs::write(out.join("manifest.json"), serde_json::to_vec_pretty(&manifest)?)?;
    print_table(&table);
    Ok(())
}

fn compare(common: &Common, out: &Path) -> Result<()> {
    let cfg = common.config()?;
    let start = Instant::now();
    let mut result = run_experiment(&cfg)?;
    check_table(&result.table, &cfg.experiment.estimators, &cfg.experiment.sizes)?;
    write_outputs(out, &mut result)?;
    print_table(&result.table);
    for t in &result.manifest.timings {
        println!(
            "{:<12} M={} N={}: trained {:.1} s ({} epochs, best {}), inference {:.4} s per 1e5",
            t.estimator.name(),
            t.m,
            t.n,
            t.training_seconds,
            t.epochs,
            t.best_epoch,
            t.inference_seconds_per_1e5
        );
    }
    eprintln!("done in {:.1} s -> {}", start.elapsed().as_secs_f64(), out.display());
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate { common, index, draw, out } => simulate(&common, index, draw, out.as_deref()),
        Command::GenDataset { common, out, csv } => gen_dataset(&common, &out, csv),
        Command::Split { common, dataset, out } => split(&common, &dataset, &out),
        Command::Train {
            common,
            dataset,
            split_file,
            out,
        } => train(&common, &dataset, &split_file, &out),
        Command::Evaluate {
            common,
            dataset,
            split_file,
            models,
            out,
        } => evaluate_cmd(&common, &dataset, &split_file, models.as_deref(), &out),
        Command::Compare { common, out } => compare(&common, &out),
    }
}
