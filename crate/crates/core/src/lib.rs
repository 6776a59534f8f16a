//! Security analysis for Gaussian-modulated coherent-state CV-QKD with a
//! noisy, monitored source.
//!
//! Three layers:
//!
//! - [`gaussian`]: covariance-matrix algebra for zero-mean Gaussian states
//!   (constructors, beamsplitters, lossy channels, homodyne conditioning,
//!   symplectic spectra, von Neumann entropy).
//! - [`schemes`]: asymptotic key rates against collective attacks with
//!   reverse reconciliation for the untrusted-noise baseline, the active
//!   optical-switch monitor and the passive beamsplitter monitor, plus
//!   secure-distance search and tap-transmittance optimisation.
//! - [`finite_size`]: maximum-likelihood source-noise estimation from monitor
//!   data, its confidence bound, and a seeded Monte Carlo simulator.
//!
//! All quantities are in shot-noise units; entropies and rates in bits.

pub mod error;
pub mod finite_size;
pub mod gaussian;
pub mod schemes;

pub use error::{Error, Result};
pub use finite_size::{
    confidence_bound, coverage_diagnostic, mle_sigma2, simulate_monitor, z_from_epsilon,
    CoverageReport, FiniteSizeEstimate, MleEstimate, MonitorBatch, DEFAULT_EPS_SM,
};
pub use gaussian::{mutual_info_het_hom, CovarianceMatrix, TwoModeStdForm};
pub use schemes::{
    distance_to_eta, keyrate, keyrate_active, keyrate_passive, keyrate_untrusted, optimize_t,
    secure_distance, ChannelParams, KeyRateBreakdown, ProtocolParams, Scheme, TOptimum,
};
