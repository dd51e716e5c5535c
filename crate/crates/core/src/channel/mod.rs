//! Geometry, large-scale parameters and Rician small-scale fading.

mod large_scale;
mod pathloss;
mod phase;
mod scenario;
mod small_scale;
mod steering;

pub use large_scale::{large_scale_key, sample_large_scale, LargeScaleRealization, LinkGain};
pub use pathloss::{LinkClass, LinkRegime, PathLossConfig};
pub use phase::{build_phase_matrix, phase_amplitude, phase_diagonal, reflection_coefficient, PhaseShiftConfig};
pub use scenario::{draw_phases, Area, GeometryConfig, RadioConfig, Scenario, ScenarioConfig};
pub use small_scale::{aggregate, sample_small_scale, small_scale_key, ChannelRealization};
pub use steering::{steering_ula, steering_upa, steering_upa_rows};
