//! Statistics of coefficient distributions: histograms, power-law fits,
//! the truncated power-law model with its convolution, and the term-count
//! recurrence.

mod density;
mod fit;
mod histogram;
mod model;
mod recurrence;

pub use density::{DensityEvolver, DEFAULT_GRID};
pub use fit::{fit_m_mle, fit_m_regression, FitMethod, FitReport, MIN_FIT_SAMPLES};
pub use histogram::{histogram, CoefficientHistogram};
pub use model::{convolution_density, moment_estimate, r_theta, s_theta, write_s_theta_sweep, PowerLawModel};
pub use recurrence::{
    detect_eta_spikes, merge_pair_correlation, predict_term_count_step, replay_term_counts, EtaSpike,
    MergeCorrelation, Replay, DEFAULT_SPIKE_THRESHOLD,
};
