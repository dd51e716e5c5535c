//! Uplink pilot reception and linear MMSE estimation of the aggregated
//! channel at the base station.

use nalgebra::Cholesky;
use nalgebra::Dyn;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::channel::{ChannelRealization, LargeScaleRealization};
use crate::linalg::{cn_matrix, cn_vector, hermitian_part, norm_sqr, real_trace, CMatrix, CVector, MaxAbs, C64};
use crate::rng::StreamKey;
use crate::{Error, Result};

/// Mutually orthonormal pilot sequences, one column per user.
#[derive(Clone, Debug, PartialEq)]
pub struct PilotBook {
    columns: CMatrix,
}

impl PilotBook {
    /// Columns of the `tau_p x tau_p` identity.
    pub fn identity(tau_p: usize, k: usize) -> Result<Self> {
        Self::check_len(tau_p, k)?;
        Ok(Self {
            columns: CMatrix::identity(tau_p, k),
        })
    }

    /// Columns of the unitary DFT matrix.
    pub fn dft(tau_p: usize, k: usize) -> Result<Self> {
        Self::check_len(tau_p, k)?;
        let scale = 1.0 / (tau_p as f64).sqrt();
        let columns = CMatrix::from_fn(tau_p, k, |t, i| {
            let angle = -2.0 * std::f64::consts::PI * (t * i) as f64 / tau_p as f64;
            C64::from_polar(scale, angle)
        });
        Ok(Self { columns })
    }

    /// Accepts any matrix whose columns are orthonormal to 1e-10.
    pub fn from_columns(columns: CMatrix) -> Result<Self> {
        Self::check_len(columns.nrows(), columns.ncols())?;
        let gram = columns.adjoint() * &columns;
        let defect = (gram - CMatrix::identity(columns.ncols(), columns.ncols())).max_abs();
        if defect > 1e-10 {
            return Err(Error::InvalidScenario(format!("pilots are not orthonormal (defect {defect:e})")));
        }
        Ok(Self { columns })
    }

    fn check_len(tau_p: usize, k: usize) -> Result<()> {
        if k == 0 || tau_p < k {
            return Err(Error::InvalidScenario(format!("{k} orthogonal pilots need tau_p >= K, got {tau_p}")));
        }
        Ok(())
    }

    pub fn tau_p(&self) -> usize {
        self.columns.nrows()
    }

    pub fn users(&self) -> usize {
        self.columns.ncols()
    }

    pub fn pilot(&self, k: usize) -> CVector {
        self.columns.column(k).into_owned()
    }

    pub fn columns(&self) -> &CMatrix {
        &self.columns
    }
}

/// `Y_p = sum_k sqrt(rho tau_p) u_k phi_k^H + W_p` with unit-variance noise
/// drawn from `key`.
pub fn receive_uplink_pilots(
    ch: &ChannelRealization,
    pilots: &PilotBook,
    rho_ul: f64,
    key: &StreamKey,
) -> Result<CMatrix> {
    receive_uplink_pilots_scaled(ch, pilots, rho_ul, key, 1.0)
}

/// As [`receive_uplink_pilots`] with the noise standard deviation scaled by
/// `noise_scale` (0 gives the noiseless signal).
pub fn receive_uplink_pilots_scaled(
    ch: &ChannelRealization,
    pilots: &PilotBook,
    rho_ul: f64,
    key: &StreamKey,
    noise_scale: f64,
) -> Result<CMatrix> {
    if ch.u.len() != pilots.users() {
        return Err(Error::DimensionMismatch {
            what: "pilot book users",
            expected: ch.u.len(),
            got: pilots.users(),
        });
    }
    let m = ch.u.first().map_or(0, |u| u.len());
    let tau_p = pilots.tau_p();
    let amp = C64::from((rho_ul * tau_p as f64).sqrt());
    let mut y = if noise_scale != 0.0 {
        cn_matrix(&mut key.rng(), m, tau_p) * C64::from(noise_scale)
    } else {
        CMatrix::zeros(m, tau_p)
    };
    for (k, u) in ch.u.iter().enumerate() {
        let phi = pilots.columns.column(k);
        y.gerc(amp, u, &phi, C64::from(1.0));
    }
    Ok(y)
}

/// `y_pk = Y_p phi_k`.
pub fn project_pilot(y_p: &CMatrix, phi_k: &CVector) -> Result<CVector> {
    if y_p.ncols() != phi_k.len() {
        return Err(Error::DimensionMismatch {
            what: "pilot length",
            expected: y_p.ncols(),
            got: phi_k.len(),
        });
    }
    Ok(y_p * phi_k)
}

/// `E{u_k}`: the LoS part of the direct link plus the all-LoS cascades.
pub fn compute_prior_mean(ls: &LargeScaleRealization, k: usize) -> CVector {
    let mut mu = &ls.g_los[k] * C64::from(ls.direct[k].beta_los().sqrt());
    for ell in 0..ls.l() {
        let w = (ls.bs_ris[ell].beta_los() * ls.ris_ue[ell][k].beta_los()).sqrt();
        if w > 0.0 {
            mu += ls.cascade_los(ell, k) * C64::from(w);
        }
    }
    mu
}

/// Covariance of `u_k`.
pub fn compute_covariance(ls: &LargeScaleRealization, k: usize) -> CMatrix {
    let m = ls.m;
    let mut diag = ls.direct[k].beta_nlos();
    let mut r = CMatrix::zeros(m, m);
    for ell in 0..ls.l() {
        let b1 = ls.bs_ris[ell];
        let b2 = ls.ris_ue[ell][k];
        let phi = &ls.phases[ell];
        // LoS BS-RIS hop, NLoS RIS-user hop
        let w = b1.beta_los() * b2.beta_nlos();
        if w > 0.0 {
            let mut h_phi = ls.h_los[ell].clone();
            for (j, mut col) in h_phi.column_iter_mut().enumerate() {
                col *= phi[j];
            }
            r.gemm(C64::from(w), &h_phi, &h_phi.adjoint(), C64::from(1.0));
        }
        // NLoS BS-RIS hop: white at the BS
        let b1n = b1.beta_nlos();
        if b1n > 0.0 {
            let pz: f64 = phi.iter().zip(ls.z_los[ell][k].iter()).map(|(p, z)| (p * z).norm_sqr()).sum();
            let tr: f64 = phi.iter().map(|p| p.norm_sqr()).sum();
            diag += b1n * (b2.beta_los() * pz + b2.beta_nlos() * tr);
        }
    }
    for i in 0..m {
        r[(i, i)] += C64::from(diag);
    }
    hermitian_part(&r)
}

/// First and second-order statistics of one user's aggregated channel and
/// the resulting linear MMSE filter.
#[derive(Clone, Debug)]
pub struct MmseStatistics {
    pub mu: CVector,
    /// `sqrt(rho tau_p) R`.
    pub c: CMatrix,
    pub r: CMatrix,
    /// `sqrt(rho tau_p)`.
    pub scale: f64,
    /// `E{||u||^2} = ||mu||^2 + tr R`.
    pub e_norm2_u: f64,
    /// `E{||u_hat||^2}` of the estimate produced by [`mmse_estimate`].
    pub e_norm2_uhat: f64,
    c_yy_mat: CMatrix,
    c_yy: Cholesky<C64, Dyn>,
}

impl MmseStatistics {
    /// `sqrt(rho tau_p) C + I`.
    pub fn c_yy(&self) -> &CMatrix {
        &self.c_yy_mat
    }

    /// `A = C (sqrt(rho tau_p) C + I)^{-1}`.
    pub fn filter(&self) -> CMatrix {
        // C and C_yy commute and are Hermitian, so A = (C_yy^{-1} C)^H.
        self.c_yy.solve(&self.c).adjoint()
    }
}

impl Serialize for MmseStatistics {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let pairs = |it: &mut dyn Iterator<Item = &C64>| it.map(|x| [x.re, x.im]).collect::<Vec<_>>();
        let mut st = s.serialize_struct("MmseStatistics", 5)?;
        st.serialize_field("mu", &pairs(&mut self.mu.iter()))?;
        // column-major, as stored
        st.serialize_field("r", &pairs(&mut self.r.iter()))?;
        st.serialize_field("scale", &self.scale)?;
        st.serialize_field("e_norm2_u", &self.e_norm2_u)?;
        st.serialize_field("e_norm2_uhat", &self.e_norm2_uhat)?;
        st.end()
    }
}

/// Builds the prior mean, the scaled covariance and the MMSE filter for
/// user `k`.
pub fn compute_scaled_covariance(
    ls: &LargeScaleRealization,
    k: usize,
    rho_ul: f64,
    tau_p: usize,
) -> Result<MmseStatistics> {
    if k >= ls.k() {
        return Err(Error::DimensionMismatch {
            what: "user index",
            expected: ls.k(),
            got: k,
        });
    }
    let m = ls.m;
    let scale = (rho_ul * tau_p as f64).sqrt();
    let mu = compute_prior_mean(ls, k);
    let r = compute_covariance(ls, k);
    let c = &r * C64::from(scale);
    let c_yy_mat = &c * C64::from(scale) + CMatrix::identity(m, m);
    let c_yy = Cholesky::new(c_yy_mat.clone()).ok_or(Error::IllConditioned { residual: f64::NAN })?;
    let e_norm2_u = norm_sqr(&mu) + real_trace(&r);
    // E||u_hat||^2 = ||mu||^2 + tr(A C_yy A^H) = ||mu||^2 + tr(A C)
    let x = c_yy.solve(&c);
    let extra: f64 = (0..m).map(|i| (0..m).map(|j| (x[(j, i)].conj() * c[(j, i)]).re).sum::<f64>()).sum();
    let stats = MmseStatistics {
        e_norm2_uhat: norm_sqr(&mu) + extra.max(0.0),
        mu,
        c,
        r,
        scale,
        e_norm2_u,
        c_yy_mat,
        c_yy,
    };
    if !stats.e_norm2_u.is_finite() || !stats.e_norm2_uhat.is_finite() {
        return Err(Error::NonFinite("MMSE statistics"));
    }
    Ok(stats)
}

/// `u_hat = mu + C (sqrt(rho tau_p) C + I)^{-1} (y - sqrt(rho tau_p) mu)`,
/// solved against the Cholesky factor with a residual check.
pub fn mmse_estimate(y_pk: &CVector, stats: &MmseStatistics) -> Result<CVector> {
    if y_pk.len() != stats.mu.len() {
        return Err(Error::DimensionMismatch {
            what: "projected pilot",
            expected: stats.mu.len(),
            got: y_pk.len(),
        });
    }
    let b = y_pk - &stats.mu * C64::from(stats.scale);
    let x = stats.c_yy.solve(&b);
    let resid = (&stats.c_yy_mat * &x - &b).norm();
    let bn = b.norm();
    if !(resid <= 1e-9 * bn.max(f64::MIN_POSITIVE)) && bn > 0.0 {
        return Err(Error::IllConditioned { residual: resid / bn });
    }
    Ok(&stats.mu + &stats.c * x)
}

/// Monte-Carlo `E{||u_hat||^2}` over `draws` uplink realizations, using the
/// exact distribution of the projected observation `sqrt(rho tau_p) u + w`.
pub fn monte_carlo_norm2_uhat(
    ls: &LargeScaleRealization,
    k: usize,
    stats: &MmseStatistics,
    draws: usize,
    key: &StreamKey,
) -> Result<f64> {
    use crate::channel::{sample_small_scale, small_scale_key};
    use crate::rng::Tag;
    if draws == 0 {
        return Err(Error::EmptyInput("Monte-Carlo draws"));
    }
    let mut acc = 0.0;
    for j in 0..draws as u64 {
        let ch = sample_small_scale(ls, &small_scale_key(key, j));
        let w = cn_vector(&mut key.child(Tag::PilotNoise, j).rng(), ls.m);
        let y = &ch.u[k] * C64::from(stats.scale) + w;
        acc += norm_sqr(&mmse_estimate(&y, stats)?);
    }
    Ok(acc / draws as f64)
}
