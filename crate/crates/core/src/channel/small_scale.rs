use super::large_scale::LargeScaleRealization;
use crate::linalg::{cn_matrix, cn_vector, CMatrix, CVector, C64};
use crate::rng::{StreamKey, Tag};

/// One small-scale fading draw.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization {
    pub g: Vec<CVector>,
    pub h: Vec<CMatrix>,
    /// `z[l][k]`.
    pub z: Vec<Vec<CVector>>,
    /// Aggregated channel per user.
    pub u: Vec<CVector>,
}

fn rician<T>(los: &T, beta_los: f64, beta_nlos: f64, nlos: impl FnOnce() -> T) -> T
where
    T: Clone + std::ops::Mul<C64, Output = T> + std::ops::Add<Output = T>,
{
    let mean = los.clone() * C64::from(beta_los.sqrt());
    if beta_nlos > 0.0 {
        mean + nlos() * C64::from(beta_nlos.sqrt())
    } else {
        mean
    }
}

/// Draws every link of the realization. Each link has its own stream under
/// `key`, so the result does not depend on evaluation order.
pub fn sample_small_scale(ls: &LargeScaleRealization, key: &StreamKey) -> ChannelRealization {
    let (m, n, l, k) = (ls.m, ls.n, ls.l(), ls.k());
    let g: Vec<CVector> = (0..k)
        .map(|i| {
            let gain = ls.direct[i];
            rician(&ls.g_los[i], gain.beta_los(), gain.beta_nlos(), || {
                cn_vector(&mut key.child(Tag::LinkDirect, i as u64).rng(), m)
            })
        })
        .collect();
    let h: Vec<CMatrix> = (0..l)
        .map(|ell| {
            let gain = ls.bs_ris[ell];
            rician(&ls.h_los[ell], gain.beta_los(), gain.beta_nlos(), || {
                cn_matrix(&mut key.child(Tag::LinkBsRis, ell as u64).rng(), m, n)
            })
        })
        .collect();
    let z: Vec<Vec<CVector>> = (0..l)
        .map(|ell| {
            (0..k)
                .map(|i| {
                    let gain = ls.ris_ue[ell][i];
                    rician(&ls.z_los[ell][i], gain.beta_los(), gain.beta_nlos(), || {
                        cn_vector(&mut key.child(Tag::LinkRisUe, (ell * k + i) as u64).rng(), n)
                    })
                })
                .collect()
        })
        .collect();
    let u = aggregate(ls, &g, &h, &z);
    ChannelRealization { g, h, z, u }
}

/// `u_k = g_k + sum_l H_l Phi_l z_lk`.
pub fn aggregate(ls: &LargeScaleRealization, g: &[CVector], h: &[CMatrix], z: &[Vec<CVector>]) -> Vec<CVector> {
    let mut u = g.to_vec();
    for (ell, h_l) in h.iter().enumerate() {
        // scale columns of H by the phase diagonal once per RIS
        let mut h_phi = h_l.clone();
        for (j, mut col) in h_phi.column_iter_mut().enumerate() {
            col *= ls.phases[ell][j];
        }
        for (i, u_i) in u.iter_mut().enumerate() {
            *u_i += &h_phi * &z[ell][i];
        }
    }
    u
}

/// Key of small-scale draw `index` under a large-scale key.
pub fn small_scale_key(ls_key: &StreamKey, index: u64) -> StreamKey {
    ls_key.child(Tag::SmallScale, index)
}
