//! Feature datasets and their on-disk form.
//!
//! Binary layout, all integers and floats little-endian:
//!
//! | field          | type                                     |
//! |----------------|------------------------------------------|
//! | magic          | 8 bytes `RISDSET\0`                      |
//! | version        | u32 (currently 1)                        |
//! | schema         | u32 length + ASCII column list           |
//! | header         | u32 length + UTF-8 JSON [`DatasetHeader`]|
//! | record count   | u64                                      |
//! | records        | `ls: u32, ss: u32` then seven f64        |
//!
//! The seven floats are `xi, delta, power_feature, mean_alpha_re,
//! mean_alpha_im, alpha_re, alpha_im`, matching the schema string.

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::channel::{large_scale_key, sample_large_scale, LinkRegime, Scenario};
use crate::downlink::CoherenceSimulator;
use crate::linalg::C64;
use crate::rng::Tag;
use crate::ue_estimation::{genie_statistics, sample_mean_power, FeatureRecord, FeatureSet, UeStatistics};
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"RISDSET\0";
const VERSION: u32 = 1;
pub const SCHEMA: &str =
    "ls:u32,ss:u32,xi:f64,delta:f64,power_feature:f64,mean_alpha_re:f64,mean_alpha_im:f64,alpha_re:f64,alpha_im:f64";
const RECORD_BYTES: usize = 8 + 7 * 8;

/// One small-scale sample of the typical user.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DatasetRecord {
    pub ls_index: u32,
    pub ss_index: u32,
    pub xi: f64,
    pub delta: f64,
    pub power_feature: f64,
    /// The user's `E{alpha_kk}`; feature (iv) is its modulus.
    pub mean_alpha: C64,
    /// The true `alpha_kk`.
    pub alpha: C64,
}

impl DatasetRecord {
    pub fn stats(&self) -> UeStatistics {
        UeStatistics {
            mean_alpha_kk: self.mean_alpha,
            delta_k: self.delta,
            power_feature: self.power_feature,
            mc_samples: 0,
        }
    }

    pub fn feature_record(&self) -> FeatureRecord {
        FeatureRecord {
            xi: self.xi,
            delta: self.delta,
            power_feature: self.power_feature,
            mean_alpha_mag: self.mean_alpha.norm(),
            label_alpha: self.alpha,
        }
    }

    pub fn features(&self, set: FeatureSet) -> Vec<f64> {
        self.feature_record().select(set)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub seed: u64,
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub user: usize,
    pub regime: LinkRegime,
    pub large_scale: usize,
    pub small_scale: usize,
    pub genie_samples: usize,
    pub tau_c: usize,
    pub tau_p: usize,
    pub config_hash: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub records: Vec<DatasetRecord>,
}

/// Records of large-scale realization `index`: genie statistics once, then
/// one record per small-scale draw.
pub fn generate_realization(
    scn: &Scenario,
    index: u64,
    user: usize,
    small_scale: usize,
    genie_samples: usize,
) -> Result<Vec<DatasetRecord>> {
    let ls_key = large_scale_key(scn.seed, index);
    let ls = sample_large_scale(scn, &ls_key)?;
    let sim = CoherenceSimulator::new(scn, &ls)?;
    let stats = genie_statistics(&sim, user, genie_samples, &ls_key.child(Tag::Genie, 0))?;
    (0..small_scale as u64)
        .map(|j| {
            let key = ls_key.child(Tag::Record, j);
            let iv = sim.draw(&key)?;
            let y = sim.receive(&iv, user, &key);
            Ok(DatasetRecord {
                ls_index: index as u32,
                ss_index: j as u32,
                xi: sample_mean_power(&y)?,
                delta: stats.delta_k,
                power_feature: stats.power_feature,
                mean_alpha: stats.mean_alpha_kk,
                alpha: iv.gains.desired(user),
            })
        })
        .collect()
}

/// The dataset of one `(M, N)` cell. Large-scale realizations are
/// generated in parallel; the output does not depend on the thread count.
pub fn generate_dataset(cfg: &ExperimentConfig, m: usize, n: usize) -> Result<Dataset> {
    let e = &cfg.experiment;
    let scn = cfg.scenario(m, n)?;
    let chunks: Vec<Vec<DatasetRecord>> = (0..e.large_scale as u64)
        .into_par_iter()
        .map(|i| generate_realization(&scn, i, e.user, e.small_scale, e.genie_samples))
        .collect::<Result<_>>()?;
    Ok(Dataset {
        header: DatasetHeader {
            seed: cfg.seed,
            m,
            n,
            k: scn.k,
            user: e.user,
            regime: cfg.regime(),
            large_scale: e.large_scale,
            small_scale: e.small_scale,
            genie_samples: e.genie_samples,
            tau_c: scn.tau_c,
            tau_p: scn.tau_p,
            config_hash: cfg.hash(),
        },
        records: chunks.into_iter().flatten().collect(),
    })
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Dataset(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&self.header).expect("header serializes");
        let mut out = Vec::with_capacity(64 + header.len() + self.records.len() * RECORD_BYTES);
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, VERSION);
        put_u32(&mut out, SCHEMA.len() as u32);
        out.extend_from_slice(SCHEMA.as_bytes());
        put_u32(&mut out, header.len() as u32);
        out.extend_from_slice(&header);
        out.extend_from_slice(&(self.records.len() as u64).to_le_bytes());
        for r in &self.records {
            put_u32(&mut out, r.ls_index);
            put_u32(&mut out, r.ss_index);
            for v in [r.xi, r.delta, r.power_feature, r.mean_alpha.re, r.mean_alpha.im, r.alpha.re, r.alpha.im] {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut c = Cursor { buf, pos: 0 };
        if c.take(8)? != MAGIC {
            return Err(Error::Dataset("not a dataset file (bad magic)".into()));
        }
        let version = c.u32()?;
        if version != VERSION {
            return Err(Error::Dataset(format!("unsupported dataset version {version}")));
        }
        let len = c.u32()? as usize;
        let schema = c.take(len)?;
        if schema != SCHEMA.as_bytes() {
            return Err(Error::Dataset(format!("unexpected schema {:?}", String::from_utf8_lossy(schema))));
        }
        let len = c.u32()? as usize;
        let header: DatasetHeader = serde_json::from_slice(c.take(len)?)?;
        let count = c.u64()? as usize;
        if buf.len() - c.pos != count.saturating_mul(RECORD_BYTES) {
            return Err(Error::Dataset(format!(
                "{count} records need {} bytes, found {}",
                count.saturating_mul(RECORD_BYTES),
                buf.len() - c.pos
            )));
        }
        let mut records = Vec::with_capacity(count);
        for _ in 0..count {
            let ls_index = c.u32()?;
            let ss_index = c.u32()?;
            let mut v = [0.0; 7];
            for x in v.iter_mut() {
                *x = c.f64()?;
            }
            records.push(DatasetRecord {
                ls_index,
                ss_index,
                xi: v[0],
                delta: v[1],
                power_feature: v[2],
                mean_alpha: C64::new(v[3], v[4]),
                alpha: C64::new(v[5], v[6]),
            });
        }
        Ok(Self { header, records })
    }

    pub fn write<W: Write>(&self, out: &mut W) -> Result<()> {
        out.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read<R: Read>(input: &mut R) -> Result<Self> {
        let mut buf = Vec::new();
        input.read_to_end(&mut buf)?;
        Self::from_bytes(&buf)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    /// Human-readable export; floats use the shortest round-trip form.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "{}", SCHEMA.split(',').map(|c| c.split(':').next().unwrap()).collect::<Vec<_>>().join(","))?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.ls_index,
                r.ss_index,
                r.xi,
                r.delta,
                r.power_feature,
                r.mean_alpha.re,
                r.mean_alpha.im,
                r.alpha.re,
                r.alpha.im
            )?;
        }
        Ok(())
    }
}
