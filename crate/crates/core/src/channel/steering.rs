use std::f64::consts::PI;

use crate::linalg::{CVector, C64};

/// ULA response: entry `m` (0-based) is `exp(j 2 pi m s sin(theta))`.
pub fn steering_ula(m: usize, theta: f64, spacing_ratio: f64) -> CVector {
    let step = 2.0 * PI * spacing_ratio * theta.sin();
    CVector::from_fn(m, |i, _| C64::from_polar(1.0, step * i as f64))
}

/// UPA response with `min(N, 5)` elements per row.
pub fn steering_upa(n: usize, theta: f64, psi: f64, spacing_ratio: f64) -> CVector {
    steering_upa_rows(n, theta, psi, spacing_ratio, n.min(5))
}

/// UPA response for element `n` (0-based) at row `n / row_len`, column
/// `n % row_len`.
pub fn steering_upa_rows(n: usize, theta: f64, psi: f64, spacing_ratio: f64, row_len: usize) -> CVector {
    let row_len = row_len.max(1);
    let row_step = psi.sin() * theta.sin();
    let col_step = psi.sin() * theta.cos();
    CVector::from_fn(n, |i, _| {
        let row = (i / row_len) as f64;
        let col = (i - (i / row_len) * row_len) as f64;
        C64::from_polar(1.0, 2.0 * PI * spacing_ratio * (row * row_step + col * col_step))
    })
}
