//! Link-level Monte-Carlo simulation of RIS-assisted downlink massive MIMO.
//!
//! The crate covers the full chain for one coherence interval:
//!
//! * [`channel`]: scenario geometry, large-scale fading, LoS steering
//!   components, RIS phase-shift matrices and Rician small-scale draws.
//! * [`bs_estimation`]: orthogonal uplink pilots and the closed-form linear
//!   MMSE estimate of each user's aggregated (direct + cascaded) channel.
//! * [`downlink`]: maximum-ratio precoding, effective channel gains and the
//!   received downlink waveform.
//! * [`ue_estimation`]: user-side effective-gain estimators (hardening bound,
//!   blind sample-power estimator, learned regressor features) and NMSE.
//! * [`pipeline`]: dataset generation, splitting, training, evaluation and
//!   the on-disk formats used by the command-line tool.

pub mod bs_estimation;
pub mod channel;
pub mod downlink;
pub mod error;
pub mod linalg;
pub mod pipeline;
pub mod rng;
pub mod ue_estimation;

pub use error::{Error, Result};
