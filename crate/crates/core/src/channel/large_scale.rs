use rand::Rng;
use serde::Serialize;

use super::pathloss::LinkClass;
use super::phase::phase_diagonal;
use super::scenario::Scenario;
use super::steering::{steering_ula, steering_upa_rows};
use crate::linalg::{CMatrix, CVector};
use crate::rng::{StreamKey, Tag};
use crate::{Error, Result};

/// Large-scale description of one link.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LinkGain {
    /// Linear power gain.
    pub beta: f64,
    /// Linear Rician K-factor; infinite for a deterministic link.
    pub k_factor: f64,
    pub los: bool,
    pub distance: f64,
}

impl LinkGain {
    pub fn new(beta: f64, k_factor: f64) -> Self {
        Self {
            beta,
            k_factor,
            los: k_factor > 0.0,
            distance: f64::NAN,
        }
    }

    pub fn beta_los(&self) -> f64 {
        if self.k_factor.is_infinite() {
            self.beta
        } else {
            self.beta * self.k_factor / (self.k_factor + 1.0)
        }
    }

    pub fn beta_nlos(&self) -> f64 {
        if self.k_factor.is_infinite() {
            0.0
        } else {
            self.beta / (self.k_factor + 1.0)
        }
    }
}

/// Everything that stays fixed across small-scale fades.
#[derive(Clone, Debug, PartialEq)]
pub struct LargeScaleRealization {
    pub m: usize,
    pub n: usize,
    pub ue_positions: Vec<[f64; 2]>,
    /// BS to user `k`.
    pub direct: Vec<LinkGain>,
    /// BS to RIS `l`.
    pub bs_ris: Vec<LinkGain>,
    /// `ris_ue[l][k]`.
    pub ris_ue: Vec<Vec<LinkGain>>,
    pub g_los: Vec<CVector>,
    pub h_los: Vec<CMatrix>,
    pub z_los: Vec<Vec<CVector>>,
    /// Diagonals of the phase-shift matrices.
    pub phases: Vec<CVector>,
}

impl LargeScaleRealization {
    pub fn l(&self) -> usize {
        self.bs_ris.len()
    }

    pub fn k(&self) -> usize {
        self.direct.len()
    }

    pub fn phase_matrix(&self, ell: usize) -> CMatrix {
        CMatrix::from_diagonal(&self.phases[ell])
    }

    /// `H_bar_l Phi_l z_bar_lk`.
    pub fn cascade_los(&self, ell: usize, k: usize) -> CVector {
        let pz = self.phases[ell].component_mul(&self.z_los[ell][k]);
        &self.h_los[ell] * pz
    }

    /// Same realization with every RIS link removed.
    pub fn without_ris(&self) -> Self {
        Self {
            bs_ris: Vec::new(),
            ris_ue: Vec::new(),
            h_los: Vec::new(),
            z_los: Vec::new(),
            phases: Vec::new(),
            ..self.clone()
        }
    }

    /// Apply `f` to every link gain, e.g. to force a regime in tests.
    pub fn map_links(&mut self, mut f: impl FnMut(LinkClass, &mut LinkGain)) {
        self.direct.iter_mut().for_each(|g| f(LinkClass::Direct, g));
        self.bs_ris.iter_mut().for_each(|g| f(LinkClass::BsRis, g));
        self.ris_ue.iter_mut().flatten().for_each(|g| f(LinkClass::RisUe, g));
    }
}

fn azimuth(from: [f64; 2], to: [f64; 2]) -> f64 {
    (to[1] - from[1]).atan2(to[0] - from[0])
}

fn horizontal(from: [f64; 2], to: [f64; 2]) -> f64 {
    (to[0] - from[0]).hypot(to[1] - from[1])
}

fn wrap_2pi(theta: f64) -> f64 {
    let t = theta.rem_euclid(2.0 * std::f64::consts::PI);
    // rem_euclid may round up to exactly 2 pi
    if t >= 2.0 * std::f64::consts::PI {
        0.0
    } else {
        t
    }
}

/// Draws user positions, LoS flags and gains and builds the LoS components.
///
/// Angles: the BS ULA lies on the y-axis so its angle is the azimuth from
/// the x-axis; RIS angles are azimuths in [0, 2 pi) and elevations below
/// the surface from the altitude gap (zero towards the BS).
pub fn sample_large_scale(scn: &Scenario, key: &StreamKey) -> Result<LargeScaleRealization> {
    let (m, n, l, k) = (scn.m, scn.n, scn.l, scn.k);
    let pl = &scn.pathloss;
    let gap = scn.altitude_gap;

    let ue_positions: Vec<[f64; 2]> = (0..k)
        .map(|i| {
            let mut rng = key.child(Tag::UePosition, i as u64).rng();
            let a = &scn.ue_area;
            let x = if a.max[0] > a.min[0] { rng.random_range(a.min[0]..a.max[0]) } else { a.min[0] };
            let y = if a.max[1] > a.min[1] { rng.random_range(a.min[1]..a.max[1]) } else { a.min[1] };
            [x, y]
        })
        .collect();

    let link = |class: LinkClass, tag: Tag, idx: usize, d: f64| -> Result<LinkGain> {
        if !(d > 0.0) {
            return Err(Error::DegenerateGeometry(format!("{class:?} link {idx} has zero length")));
        }
        let mut rng = key.child(tag, idx as u64).rng();
        let (los, k_factor) = pl.draw_link(class, d, &mut rng);
        Ok(LinkGain {
            beta: pl.gain(d, los),
            k_factor,
            los,
            distance: d,
        })
    };

    let mut direct = Vec::with_capacity(k);
    let mut g_los = Vec::with_capacity(k);
    for (i, &p) in ue_positions.iter().enumerate() {
        let d = horizontal(scn.bs_position, p).hypot(gap);
        direct.push(link(LinkClass::Direct, Tag::LinkDirect, i, d)?);
        g_los.push(steering_ula(m, azimuth(scn.bs_position, p), scn.d_b_over_lambda));
    }

    let mut bs_ris = Vec::with_capacity(l);
    let mut h_los = Vec::with_capacity(l);
    let mut ris_ue = Vec::with_capacity(l);
    let mut z_los = Vec::with_capacity(l);
    let mut phases = Vec::with_capacity(l);
    for (ell, &r) in scn.ris_positions.iter().enumerate() {
        let d = horizontal(scn.bs_position, r);
        bs_ris.push(link(LinkClass::BsRis, Tag::LinkBsRis, ell, d)?);
        let a_b = steering_ula(m, azimuth(scn.bs_position, r), scn.d_b_over_lambda);
        let a_r = steering_upa_rows(n, wrap_2pi(azimuth(r, scn.bs_position)), 0.0, scn.d_r_over_lambda, scn.upa_row_len);
        h_los.push(&a_b * a_r.adjoint());

        let mut gains = Vec::with_capacity(k);
        let mut zs = Vec::with_capacity(k);
        for (i, &p) in ue_positions.iter().enumerate() {
            let h = horizontal(r, p);
            gains.push(link(LinkClass::RisUe, Tag::LinkRisUe, ell * k + i, h.hypot(gap))?);
            let psi = gap.atan2(h);
            zs.push(steering_upa_rows(n, wrap_2pi(azimuth(r, p)), psi, scn.d_r_over_lambda, scn.upa_row_len));
        }
        ris_ue.push(gains);
        z_los.push(zs);
        phases.push(phase_diagonal(&scn.phase, ell));
    }

    Ok(LargeScaleRealization {
        m,
        n,
        ue_positions,
        direct,
        bs_ris,
        ris_ue,
        g_los,
        h_los,
        z_los,
        phases,
    })
}

/// Realization `index` of a scenario's large-scale family.
pub fn large_scale_key(seed: u64, index: u64) -> StreamKey {
    StreamKey::new(seed).child(Tag::LargeScale, index)
}
