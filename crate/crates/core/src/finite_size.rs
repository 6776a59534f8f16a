//! Finite-size estimation of the source-noise variance from monitor data.
//!
//! The monitor records `m` homodyne outcomes `y_i` of variance `V + χs`. The
//! maximum-likelihood estimate is `σ̂² = (1/m) Σ y_i² − V`, and the
//! pessimistic bound used for the key rate is
//! `σ²_min = σ̂² − z σ̂² √2 / √m`, where `z` solves `1 − erf(z/√2) = ε_SM`.
//!
//! Synthetic batches come from ChaCha8 (`seed_from_u64`) feeding a
//! Box–Muller transform, so a seed fixes the output bit-for-bit on every
//! platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::function::erf::erfc;

use crate::error::{check, Error, Result};

/// Default failure probability of the monitor estimate.
pub const DEFAULT_EPS_SM: f64 = 1e-10;

const Z_BRACKET_HI: f64 = 40.0;
const Z_TOL: f64 = 1e-12;

/// Homodyne outcomes from the source monitor together with the known
/// modulation-side variance `V`.
#[derive(Debug, Clone, PartialEq)]
pub struct MonitorBatch {
    samples: Vec<f64>,
    v: f64,
}

impl MonitorBatch {
    pub fn new(samples: Vec<f64>, v: f64) -> Result<Self> {
        check(v >= 1.0, "V", v, "V >= 1")?;
        if samples.is_empty() {
            return Err(Error::Domain {
                name: "m",
                value: 0.0,
                constraint: "m >= 1 samples",
            });
        }
        Ok(Self { samples, v })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn v(&self) -> f64 {
        self.v
    }

    pub fn m(&self) -> usize {
        self.samples.len()
    }
}

/// Maximum-likelihood estimate of the source-noise variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleEstimate {
    pub sigma_hat2: f64,
    pub m: usize,
}

impl MleEstimate {
    /// Negative estimates are small-sample fluctuations; they are kept as-is.
    pub fn is_negative(&self) -> bool {
        self.sigma_hat2 < 0.0
    }
}

pub fn mle_sigma2(batch: &MonitorBatch) -> Result<MleEstimate> {
    let m = batch.m();
    check(m >= 2, "m", m as f64, "m >= 2 samples")?;
    let mean_square = batch.samples.iter().map(|y| y * y).sum::<f64>() / m as f64;
    Ok(MleEstimate {
        sigma_hat2: mean_square - batch.v,
        m,
    })
}

/// Two-sided Gaussian quantile: the `z > 0` with `1 − erf(z/√2) = eps_sm`.
pub fn z_from_epsilon(eps_sm: f64) -> Result<f64> {
    check(
        eps_sm > 0.0 && eps_sm < 0.5,
        "eps_sm",
        eps_sm,
        "0 < eps_sm < 0.5",
    )?;
    let tail = |z: f64| erfc(z / std::f64::consts::SQRT_2);
    let (mut lo, mut hi) = (0.0, Z_BRACKET_HI);
    while hi - lo > Z_TOL {
        let mid = 0.5 * (lo + hi);
        if tail(mid) > eps_sm {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiniteSizeEstimate {
    pub sigma_hat2: f64,
    pub sigma_min2: f64,
    pub delta_chi_s: f64,
    pub epsilon_sm: f64,
    pub z: f64,
    pub m: usize,
}

/// Lower confidence bound on the source-noise variance.
pub fn confidence_bound(sigma_hat2: f64, m: usize, eps_sm: f64) -> Result<FiniteSizeEstimate> {
    check(m >= 2, "m", m as f64, "m >= 2")?;
    check(sigma_hat2.is_finite(), "sigma_hat2", sigma_hat2, "finite")?;
    let z = z_from_epsilon(eps_sm)?;
    let delta_chi_s = z * sigma_hat2 * std::f64::consts::SQRT_2 / (m as f64).sqrt();
    Ok(FiniteSizeEstimate {
        sigma_hat2,
        sigma_min2: sigma_hat2 - delta_chi_s,
        delta_chi_s,
        epsilon_sm: eps_sm,
        z,
        m,
    })
}

/// Draws `m` zero-mean Gaussian outcomes of variance `V + χs`.
pub fn simulate_monitor(v: f64, chi_s: f64, m: usize, seed: u64) -> Result<MonitorBatch> {
    check(v >= 1.0, "V", v, "V >= 1")?;
    check(chi_s >= 0.0, "chi_s", chi_s, "chi_s >= 0")?;
    check(m >= 1, "m", m as f64, "m >= 1")?;
    let sd = (v + chi_s).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(m);
    while samples.len() < m {
        let (g0, g1) = box_muller(&mut rng);
        samples.push(sd * g0);
        if samples.len() < m {
            samples.push(sd * g1);
        }
    }
    MonitorBatch::new(samples, v)
}

fn box_muller(rng: &mut ChaCha8Rng) -> (f64, f64) {
    // u1 in (0, 1] keeps the logarithm finite.
    let u1 = 1.0 - rng.random::<f64>();
    let u2 = rng.random::<f64>();
    let radius = (-2.0 * u1.ln()).sqrt();
    let angle = std::f64::consts::TAU * u2;
    (radius * angle.cos(), radius * angle.sin())
}

/// Empirical behaviour of the estimator over repeated simulated blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    pub trials: usize,
    /// Fraction of trials whose bound exceeded the true `χs`.
    pub failure_rate: f64,
    pub mean_sigma_hat2: f64,
    pub empirical_sd: f64,
    /// Dispersion implied by the bound: `√2 · mean(σ̂²) / √m`.
    pub implied_sd: f64,
    /// Moment-based dispersion: `√2 · (V + χs) / √m`.
    pub moment_sd: f64,
}

/// Runs `trials` simulate → estimate → bound pipelines; trial `k` is seeded
/// with `seed + k`.
pub fn coverage_diagnostic(
    v: f64,
    chi_s: f64,
    m: usize,
    eps_sm: f64,
    trials: usize,
    seed: u64,
) -> Result<CoverageReport> {
    check(trials >= 100, "trials", trials as f64, "trials >= 100")?;
    check(m >= 2, "m", m as f64, "m >= 2")?;
    z_from_epsilon(eps_sm)?;
    let outcomes = (0..trials)
        .into_par_iter()
        .map(|k| {
            let batch = simulate_monitor(v, chi_s, m, seed.wrapping_add(k as u64))?;
            let est = mle_sigma2(&batch)?;
            confidence_bound(est.sigma_hat2, m, eps_sm)
        })
        .collect::<Result<Vec<_>>>()?;

    let n = trials as f64;
    let failures = outcomes.iter().filter(|e| e.sigma_min2 > chi_s).count();
    let mean = outcomes.iter().map(|e| e.sigma_hat2).sum::<f64>() / n;
    let var = outcomes
        .iter()
        .map(|e| (e.sigma_hat2 - mean).powi(2))
        .sum::<f64>()
        / (n - 1.0);
    let root_m = (m as f64).sqrt();
    Ok(CoverageReport {
        trials,
        failure_rate: failures as f64 / n,
        mean_sigma_hat2: mean,
        empirical_sd: var.sqrt(),
        implied_sd: std::f64::consts::SQRT_2 * mean / root_m,
        moment_sd: std::f64::consts::SQRT_2 * (v + chi_s) / root_m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mle_degenerate_and_arithmetic() {
        let zero = MonitorBatch::new(vec![0.0; 10], 1.0).unwrap();
        let est = mle_sigma2(&zero).unwrap();
        assert_eq!(est.sigma_hat2, -1.0);
        assert!(est.is_negative());

        let pair = MonitorBatch::new(vec![2.0, -2.0], 1.0).unwrap();
        let est = mle_sigma2(&pair).unwrap();
        assert_eq!(est.sigma_hat2, 3.0);
        assert!(!est.is_negative());
    }

    #[test]
    fn mle_needs_two_samples() {
        assert!(MonitorBatch::new(vec![], 1.0).is_err());
        let single = MonitorBatch::new(vec![1.0], 1.0).unwrap();
        assert!(mle_sigma2(&single).is_err());
        assert!(MonitorBatch::new(vec![1.0, 2.0], 0.5).is_err());
    }

    #[test]
    fn z_domain() {
        assert!(z_from_epsilon(0.0).is_err());
        assert!(z_from_epsilon(0.5).is_err());
        assert!(z_from_epsilon(0.999).is_err());
        assert!(z_from_epsilon(1e-10).unwrap() > 6.4);
    }

    #[test]
    fn bound_examples() {
        let e = confidence_bound(0.0, 1000, 1e-10).unwrap();
        assert_eq!(e.delta_chi_s, 0.0);
        assert_eq!(e.sigma_min2, 0.0);

        let e = confidence_bound(0.1, 100_000_000, 1e-10).unwrap();
        assert!((e.delta_chi_s - 9.145e-5).abs() < 1e-7, "{e:?}");
        assert_eq!(e.sigma_min2, e.sigma_hat2 - e.delta_chi_s);

        let quad = confidence_bound(0.1, 400_000_000, 1e-10).unwrap();
        assert!((quad.delta_chi_s * 2.0 - e.delta_chi_s).abs() < 1e-18);

        assert!(confidence_bound(0.1, 1, 1e-10).is_err());
    }

    #[test]
    fn simulation_is_deterministic() {
        let a = simulate_monitor(40.0, 0.1, 1001, 7).unwrap();
        let b = simulate_monitor(40.0, 0.1, 1001, 7).unwrap();
        let c = simulate_monitor(40.0, 0.1, 1001, 8).unwrap();
        assert_eq!(a.m(), 1001);
        assert!(a
            .samples()
            .iter()
            .zip(b.samples())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_ne!(a, c);
    }

    #[test]
    fn vacuum_statistics() {
        let m = 100_000;
        let batch = simulate_monitor(1.0, 0.0, m, 11).unwrap();
        let var = batch.samples().iter().map(|y| y * y).sum::<f64>() / m as f64;
        assert!((var - 1.0).abs() < 3.0 * (2.0 / m as f64).sqrt(), "{var}");
    }

    #[test]
    fn coverage_totality() {
        let r = coverage_diagnostic(40.0, 0.1, 50, 0.01, 100, 3).unwrap();
        assert_eq!(r.trials, 100);
        assert!((0.0..=1.0).contains(&r.failure_rate));
        assert!(r.empirical_sd > 0.0);
        assert!(coverage_diagnostic(40.0, 0.1, 50, 0.01, 99, 3).is_err());
    }
}
