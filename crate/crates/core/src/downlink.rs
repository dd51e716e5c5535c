//! Maximum-ratio precoding, effective channel gains and the downlink
//! waveform seen by each user.

use rand::RngCore;

use crate::bs_estimation::{
    compute_scaled_covariance, mmse_estimate, project_pilot, receive_uplink_pilots, MmseStatistics, PilotBook,
};
use crate::channel::{sample_small_scale, ChannelRealization, LargeScaleRealization, Scenario};
use crate::linalg::{cn, CMatrix, CVector, C64};
use crate::rng::{StreamKey, Tag};
use crate::{Error, Result};

/// Precoding vectors and power-control coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct PrecoderSet {
    pub a: Vec<CVector>,
    pub eta: Vec<f64>,
}

/// `a_k = u_hat_k / sqrt(E{||u_hat_k||^2})`.
pub fn mr_precoder(u_hat_k: &CVector, e_norm2_uhat_k: f64) -> Result<CVector> {
    if !(e_norm2_uhat_k > 0.0) || !e_norm2_uhat_k.is_finite() {
        return Err(Error::DegenerateChannel(format!(
            "estimate power {e_norm2_uhat_k} cannot normalize a precoder"
        )));
    }
    Ok(u_hat_k / C64::from(e_norm2_uhat_k.sqrt()))
}

/// `alpha[(k, k')] = sqrt(rho_d eta_k') u_k^H a_k'`.
#[derive(Clone, Debug, PartialEq)]
pub struct EffectiveGains {
    pub alpha: CMatrix,
}

impl EffectiveGains {
    pub fn users(&self) -> usize {
        self.alpha.nrows()
    }

    pub fn desired(&self, k: usize) -> C64 {
        self.alpha[(k, k)]
    }

    /// `sum_{k' != k} |alpha_kk'|^2`.
    pub fn interference_power(&self, k: usize) -> f64 {
        (0..self.users()).filter(|&j| j != k).map(|j| self.alpha[(k, j)].norm_sqr()).sum()
    }
}

pub fn effective_gains(ch: &ChannelRealization, precoders: &PrecoderSet, rho_d: f64) -> Result<EffectiveGains> {
    let k = ch.u.len();
    if precoders.a.len() != k || precoders.eta.len() != k {
        return Err(Error::DimensionMismatch {
            what: "precoders",
            expected: k,
            got: precoders.a.len().min(precoders.eta.len()),
        });
    }
    let mut alpha = CMatrix::zeros(k, k);
    for (j, (a, eta)) in precoders.a.iter().zip(&precoders.eta).enumerate() {
        let amp = (rho_d * eta).sqrt();
        for (i, u) in ch.u.iter().enumerate() {
            alpha[(i, j)] = u.dotc(a) * amp;
        }
    }
    Ok(EffectiveGains { alpha })
}

const QPSK_AMP: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Gray-mapped QPSK: bit 0 picks the sign of the real part, bit 1 the
/// imaginary part.
pub fn qpsk(bits: u64) -> C64 {
    let re = if bits & 1 == 0 { QPSK_AMP } else { -QPSK_AMP };
    let im = if bits & 2 == 0 { QPSK_AMP } else { -QPSK_AMP };
    C64::new(re, im)
}

/// The data symbols `s_k'(n)` of stream `user` in the interval keyed by `key`.
pub fn qpsk_symbols(key: &StreamKey, user: usize, n: usize) -> Vec<C64> {
    let mut rng = key.child(Tag::Downlink, user as u64).rng();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let mut word = rng.next_u64();
        for _ in 0..32.min(n - out.len()) {
            out.push(qpsk(word & 3));
            word >>= 2;
        }
    }
    out
}

fn noise_key(key: &StreamKey, k: usize) -> StreamKey {
    key.child(Tag::Downlink, (1 << 32) + k as u64)
}

/// `y_k(n) = sum_k' alpha_kk' s_k'(n) + w_k(n)` with CN(0,1) noise.
pub fn downlink_receive(gains: &EffectiveGains, k: usize, n_symbols: usize, key: &StreamKey) -> CVector {
    downlink_receive_scaled(gains, k, n_symbols, key, 1.0)
}

/// As [`downlink_receive`] with the noise standard deviation scaled by
/// `noise_scale`.
pub fn downlink_receive_scaled(
    gains: &EffectiveGains,
    k: usize,
    n_symbols: usize,
    key: &StreamKey,
    noise_scale: f64,
) -> CVector {
    let mut y = if noise_scale != 0.0 {
        let mut rng = noise_key(key, k).rng();
        CVector::from_fn(n_symbols, |_, _| cn(&mut rng) * noise_scale)
    } else {
        CVector::zeros(n_symbols)
    };
    for j in 0..gains.users() {
        let alpha = gains.alpha[(k, j)];
        if alpha == C64::from(0.0) {
            continue;
        }
        for (yn, s) in y.iter_mut().zip(qpsk_symbols(key, j, n_symbols)) {
            *yn += alpha * s;
        }
    }
    y
}

/// Powers and lengths governing one coherence interval.
#[derive(Clone, Debug, PartialEq)]
pub struct LinkBudget {
    pub rho_ul: f64,
    pub rho_d: f64,
    pub tau_c: usize,
    pub tau_p: usize,
    pub eta: Vec<f64>,
}

impl LinkBudget {
    /// Equal power allocation `eta_k = 1/K`.
    pub fn from_scenario(scn: &Scenario) -> Self {
        Self {
            rho_ul: scn.rho_ul,
            rho_d: scn.rho_d,
            tau_c: scn.tau_c,
            tau_p: scn.tau_p,
            eta: vec![1.0 / scn.k as f64; scn.k],
        }
    }

    pub fn data_symbols(&self) -> usize {
        self.tau_c - self.tau_p
    }
}

/// One simulated coherence interval.
#[derive(Clone, Debug)]
pub struct CoherenceInterval {
    pub channel: ChannelRealization,
    pub estimates: Vec<CVector>,
    pub precoders: PrecoderSet,
    pub gains: EffectiveGains,
}

/// Runs the uplink-estimate / precode chain for fresh small-scale draws of
/// a fixed large-scale realization.
#[derive(Clone, Debug)]
pub struct CoherenceSimulator<'a> {
    ls: &'a LargeScaleRealization,
    pilots: PilotBook,
    stats: Vec<MmseStatistics>,
    budget: LinkBudget,
}

impl<'a> CoherenceSimulator<'a> {
    pub fn new(scn: &Scenario, ls: &'a LargeScaleRealization) -> Result<Self> {
        let pilots = PilotBook::identity(scn.tau_p, scn.k)?;
        Self::with_budget(ls, pilots, LinkBudget::from_scenario(scn))
    }

    pub fn with_budget(ls: &'a LargeScaleRealization, pilots: PilotBook, budget: LinkBudget) -> Result<Self> {
        let k = ls.k();
        if pilots.users() != k || budget.eta.len() != k {
            return Err(Error::DimensionMismatch {
                what: "users in pilots / power control",
                expected: k,
                got: pilots.users().min(budget.eta.len()),
            });
        }
        if budget.tau_p != pilots.tau_p() || budget.tau_c < budget.tau_p {
            return Err(Error::InvalidScenario(format!(
                "inconsistent tau_p={} / tau_c={} for a pilot length of {}",
                budget.tau_p,
                budget.tau_c,
                pilots.tau_p()
            )));
        }
        let stats = (0..k)
            .map(|i| compute_scaled_covariance(ls, i, budget.rho_ul, budget.tau_p))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            ls,
            pilots,
            stats,
            budget,
        })
    }

    pub fn large_scale(&self) -> &LargeScaleRealization {
        self.ls
    }

    pub fn stats(&self, k: usize) -> &MmseStatistics {
        &self.stats[k]
    }

    pub fn budget(&self) -> &LinkBudget {
        &self.budget
    }

    pub fn pilots(&self) -> &PilotBook {
        &self.pilots
    }

    /// Channel from `key / small-scale`, pilot noise from `key / pilot`.
    pub fn draw(&self, key: &StreamKey) -> Result<CoherenceInterval> {
        let channel = sample_small_scale(self.ls, &key.child(Tag::SmallScale, 0));
        self.draw_with_channel(channel, key)
    }

    pub fn draw_with_channel(&self, channel: ChannelRealization, key: &StreamKey) -> Result<CoherenceInterval> {
        let y_p = receive_uplink_pilots(&channel, &self.pilots, self.budget.rho_ul, &key.child(Tag::PilotNoise, 0))?;
        let mut estimates = Vec::with_capacity(self.stats.len());
        let mut a = Vec::with_capacity(self.stats.len());
        for (k, stats) in self.stats.iter().enumerate() {
            let y_pk = project_pilot(&y_p, &self.pilots.pilot(k))?;
            let u_hat = mmse_estimate(&y_pk, stats)?;
            a.push(mr_precoder(&u_hat, stats.e_norm2_uhat)?);
            estimates.push(u_hat);
        }
        let precoders = PrecoderSet {
            a,
            eta: self.budget.eta.clone(),
        };
        let gains = effective_gains(&channel, &precoders, self.budget.rho_d)?;
        Ok(CoherenceInterval {
            channel,
            estimates,
            precoders,
            gains,
        })
    }

    /// Downlink samples of user `k` in the interval keyed by `key`.
    pub fn receive(&self, interval: &CoherenceInterval, k: usize, key: &StreamKey) -> CVector {
        downlink_receive(&interval.gains, k, self.budget.data_symbols(), &key.child(Tag::Downlink, 0))
    }
}
