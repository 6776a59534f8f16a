//! Asymptotic secret key rates for the three source-noise treatments.
//!
//! Every rate is `β·I(a:b) − S(E:b)` under reverse reconciliation, with Bob
//! homodyning and Alice heterodyning her half of the entangled pair. The
//! mutual information always comes from the state Alice and Bob actually
//! share. The Holevo bound comes from the state Eve is granted:
//!
//! - untrusted: the actual (mixed) state, so Eve purifies the source noise too;
//! - active switch: the actual state with its source noise folded into a
//!   pure EPR pair of variance `V + χs`, rate scaled by the unsampled fraction
//!   `1 − r`;
//! - passive beamsplitter: that same pure EPR pair with a vacuum monitor port
//!   mixed in on a beamsplitter of transmittance `T` before the channel; the
//!   monitor output stays on Alice's side.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{check, Error, Result};
use crate::gaussian::{mutual_info_het_hom, CovarianceMatrix, TwoModeStdForm};

/// Below this transmittance the channel noise `χ` is treated as divergent.
pub const MIN_ETA: f64 = 1e-6;
/// Coarse scan step for [`secure_distance`], km.
pub const SCAN_STEP_KM: f64 = 0.5;
/// Bisection resolution for [`secure_distance`], km.
pub const BISECTION_TOL_KM: f64 = 0.01;
/// Default distance cap for [`secure_distance`], km.
pub const DEFAULT_D_MAX_KM: f64 = 100.0;

/// Fiber attenuation: `10^(−α d / 10)`.
pub fn distance_to_eta(distance_km: f64, alpha_db_per_km: f64) -> Result<f64> {
    check(distance_km >= 0.0, "d", distance_km, "d >= 0")?;
    check(alpha_db_per_km > 0.0, "alpha", alpha_db_per_km, "alpha > 0")?;
    Ok(10f64.powf(-alpha_db_per_km * distance_km / 10.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    /// Source noise attributed to the eavesdropper; no monitor.
    Untrusted,
    /// Random optical switch diverting a fraction `r` of pulses to a monitor.
    ActiveSwitch,
    /// Beamsplitter tap of transmittance `T` feeding a monitor.
    PassiveBeamsplitter,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [
        Scheme::Untrusted,
        Scheme::ActiveSwitch,
        Scheme::PassiveBeamsplitter,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Scheme::Untrusted => "untrusted",
            Scheme::ActiveSwitch => "active_switch",
            Scheme::PassiveBeamsplitter => "passive_bs",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "untrusted" => Ok(Scheme::Untrusted),
            "active_switch" | "active" => Ok(Scheme::ActiveSwitch),
            "passive_bs" | "passive" => Ok(Scheme::PassiveBeamsplitter),
            other => Err(format!(
                "unknown scheme '{other}' (expected untrusted, active_switch or passive_bs)"
            )),
        }
    }
}

/// Fiber link: length, attenuation and excess noise (input-referred, SNU).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    distance_km: f64,
    alpha_db_per_km: f64,
    epsilon: f64,
}

impl ChannelParams {
    pub fn new(distance_km: f64, alpha_db_per_km: f64, epsilon: f64) -> Result<Self> {
        check(distance_km >= 0.0, "d", distance_km, "d >= 0")?;
        check(alpha_db_per_km > 0.0, "alpha", alpha_db_per_km, "alpha > 0")?;
        check(epsilon >= 0.0, "eps", epsilon, "eps >= 0")?;
        Ok(Self {
            distance_km,
            alpha_db_per_km,
            epsilon,
        })
    }

    pub fn distance_km(&self) -> f64 {
        self.distance_km
    }

    pub fn alpha_db_per_km(&self) -> f64 {
        self.alpha_db_per_km
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn eta(&self) -> f64 {
        10f64.powf(-self.alpha_db_per_km * self.distance_km / 10.0)
    }

    /// Total input-referred channel noise `(1 − η)/η + ε`.
    pub fn chi(&self) -> f64 {
        let eta = self.eta();
        (1.0 - eta) / eta + self.epsilon
    }

    pub fn with_distance(self, distance_km: f64) -> Result<Self> {
        Self::new(distance_km, self.alpha_db_per_km, self.epsilon)
    }

    fn transmittance(&self) -> Result<f64> {
        let eta = self.eta();
        if eta < MIN_ETA {
            Err(Error::ChannelOpaque { eta })
        } else {
            Ok(eta)
        }
    }
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            distance_km: 0.0,
            alpha_db_per_km: 0.2,
            epsilon: 0.1,
        }
    }
}

/// One parameter point shared by all three schemes.
///
/// Defaults: `V = 40`, `χs = 0.1`, `β = 0.8`, `r = 0.5`, `T = 0.5`,
/// `ε = 0.1`, `α = 0.2 dB/km`, `d = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolParams {
    v: f64,
    chi_s: f64,
    beta: f64,
    r: f64,
    t: f64,
    channel: ChannelParams,
}

impl ProtocolParams {
    pub fn new(
        v: f64,
        chi_s: f64,
        beta: f64,
        r: f64,
        t: f64,
        channel: ChannelParams,
    ) -> Result<Self> {
        check(v >= 1.0, "V", v, "V >= 1")?;
        check(chi_s >= 0.0, "chi_s", chi_s, "chi_s >= 0")?;
        check((0.0..=1.0).contains(&beta), "beta", beta, "0 <= beta <= 1")?;
        check((0.0..1.0).contains(&r), "r", r, "0 <= r < 1")?;
        check(t > 0.0 && t <= 1.0, "T", t, "0 < T <= 1")?;
        Ok(Self {
            v,
            chi_s,
            beta,
            r,
            t,
            channel,
        })
    }

    pub fn v(&self) -> f64 {
        self.v
    }

    pub fn chi_s(&self) -> f64 {
        self.chi_s
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn channel(&self) -> &ChannelParams {
        &self.channel
    }

    pub fn with_v(self, v: f64) -> Result<Self> {
        Self::new(v, self.chi_s, self.beta, self.r, self.t, self.channel)
    }

    pub fn with_chi_s(self, chi_s: f64) -> Result<Self> {
        Self::new(self.v, chi_s, self.beta, self.r, self.t, self.channel)
    }

    pub fn with_beta(self, beta: f64) -> Result<Self> {
        Self::new(self.v, self.chi_s, beta, self.r, self.t, self.channel)
    }

    pub fn with_r(self, r: f64) -> Result<Self> {
        Self::new(self.v, self.chi_s, self.beta, r, self.t, self.channel)
    }

    pub fn with_t(self, t: f64) -> Result<Self> {
        Self::new(self.v, self.chi_s, self.beta, self.r, t, self.channel)
    }

    pub fn with_channel(self, channel: ChannelParams) -> Self {
        Self { channel, ..self }
    }

    pub fn with_distance(self, distance_km: f64) -> Result<Self> {
        Ok(self.with_channel(self.channel.with_distance(distance_km)?))
    }

    pub fn with_epsilon(self, epsilon: f64) -> Result<Self> {
        let c = self.channel;
        Ok(self.with_channel(ChannelParams::new(
            c.distance_km,
            c.alpha_db_per_km,
            epsilon,
        )?))
    }
}

impl Default for ProtocolParams {
    fn default() -> Self {
        Self {
            v: 40.0,
            chi_s: 0.1,
            beta: 0.8,
            r: 0.5,
            t: 0.5,
            channel: ChannelParams::default(),
        }
    }
}

/// Result of one key-rate evaluation, bits per pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyRateBreakdown {
    pub scheme: Scheme,
    pub i_ab: f64,
    pub s_eb: f64,
    pub key_rate: f64,
    pub secure: bool,
}

impl KeyRateBreakdown {
    fn new(scheme: Scheme, i_ab: f64, s_eb: f64, key_rate: f64) -> Self {
        Self {
            scheme,
            i_ab,
            s_eb,
            key_rate,
            secure: key_rate > 0.0,
        }
    }
}

/// Holevo bound `S(E:b)` for a state Eve purifies: `S(all) − S(rest | x_b)`.
fn holevo_reverse(state: &CovarianceMatrix, bob: usize) -> Result<f64> {
    let s_total = state.entropy()?;
    let s_conditional = state.condition_on_homodyne(bob)?.entropy()?;
    Ok(s_total - s_conditional)
}

/// Alice-Bob mutual information from a two-mode marginal in standard form.
fn mutual_info(ab: &CovarianceMatrix) -> Result<f64> {
    let TwoModeStdForm { a, b, c } = TwoModeStdForm::from_cm(ab)?;
    mutual_info_het_hom(a, b, c)
}

/// Actual two-mode state after the channel: `a = V`, `b = η(V + χs + χ)`,
/// `c = √(η(V² − 1))`.
fn actual_two_mode(p: &ProtocolParams, eta: f64) -> Result<CovarianceMatrix> {
    CovarianceMatrix::noisy_source(p.v, p.chi_s)?.fiber_channel(1, eta, p.channel.epsilon)
}

pub fn keyrate_untrusted(p: &ProtocolParams) -> Result<KeyRateBreakdown> {
    let eta = p.channel.transmittance()?;
    let state = actual_two_mode(p, eta)?;
    let i_ab = mutual_info(&state)?;
    let s_eb = holevo_reverse(&state, 1)?;
    Ok(KeyRateBreakdown::new(
        Scheme::Untrusted,
        i_ab,
        s_eb,
        p.beta * i_ab - s_eb,
    ))
}

pub fn keyrate_active(p: &ProtocolParams) -> Result<KeyRateBreakdown> {
    let eta = p.channel.transmittance()?;
    let i_ab = mutual_info(&actual_two_mode(p, eta)?)?;
    let substituted =
        CovarianceMatrix::epr(p.v + p.chi_s)?.fiber_channel(1, eta, p.channel.epsilon)?;
    let s_eb = holevo_reverse(&substituted, 1)?;
    Ok(KeyRateBreakdown::new(
        Scheme::ActiveSwitch,
        i_ab,
        s_eb,
        (1.0 - p.r) * (p.beta * i_ab - s_eb),
    ))
}

pub fn keyrate_passive(p: &ProtocolParams) -> Result<KeyRateBreakdown> {
    let eta = p.channel.transmittance()?;
    let eps = p.channel.epsilon;
    // Modes: 0 = A, 1 = B (B2 after the tap), 2 = monitor port (M0, then M).
    let tap = |source: CovarianceMatrix| -> Result<CovarianceMatrix> {
        source
            .direct_sum(&CovarianceMatrix::vacuum(1))
            .beamsplitter(1, 2, p.t)?
            .fiber_channel(1, eta, eps)
    };
    let actual = tap(CovarianceMatrix::noisy_source(p.v, p.chi_s)?)?;
    let i_ab = mutual_info(&actual.marginal(&[0, 1])?)?;
    let substituted = tap(CovarianceMatrix::epr(p.v + p.chi_s)?)?;
    let s_eb = holevo_reverse(&substituted, 1)?;
    Ok(KeyRateBreakdown::new(
        Scheme::PassiveBeamsplitter,
        i_ab,
        s_eb,
        p.beta * i_ab - s_eb,
    ))
}

pub fn keyrate(scheme: Scheme, p: &ProtocolParams) -> Result<KeyRateBreakdown> {
    match scheme {
        Scheme::Untrusted => keyrate_untrusted(p),
        Scheme::ActiveSwitch => keyrate_active(p),
        Scheme::PassiveBeamsplitter => keyrate_passive(p),
    }
}

/// Largest distance in `[0, d_max]` with a positive key rate.
///
/// Scans a 0.5 km grid for the last positive point, then bisects the
/// following interval down to 0.01 km. Returns `Some(d_max)` if the rate is
/// still positive at the cap and `None` if it is not positive at `d = 0`.
pub fn secure_distance(scheme: Scheme, p: &ProtocolParams, d_max: f64) -> Result<Option<f64>> {
    check(d_max >= 0.0, "d_max", d_max, "d_max >= 0")?;
    let rate_at = |d: f64| -> Result<f64> { Ok(keyrate(scheme, &p.with_distance(d)?)?.key_rate) };

    if rate_at(0.0)? <= 0.0 {
        return Ok(None);
    }
    let steps = (d_max / SCAN_STEP_KM).ceil() as usize;
    let grid = |k: usize| (k as f64 * SCAN_STEP_KM).min(d_max);
    let mut last_positive = 0;
    for k in 1..=steps {
        if rate_at(grid(k))? > 0.0 {
            last_positive = k;
        }
    }
    if last_positive == steps {
        return Ok(Some(d_max));
    }
    let (mut lo, mut hi) = (grid(last_positive), grid(last_positive + 1));
    while hi - lo > BISECTION_TOL_KM {
        let mid = 0.5 * (lo + hi);
        if rate_at(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(lo))
}

/// Outcome of the tap-transmittance search.
#[derive(Debug, Clone, PartialEq)]
pub struct TOptimum {
    pub t_best: f64,
    pub d_best: f64,
    /// `(T, secure distance)` per grid point; insecure points report 0.
    pub table: Vec<(f64, f64)>,
}

/// Exhaustive passive-scheme secure-distance search over `t_grid`.
///
/// Ties go to the smaller `T`.
pub fn optimize_t(p: &ProtocolParams, t_grid: &[f64], d_max: f64) -> Result<TOptimum> {
    if t_grid.is_empty() {
        return Err(Error::Contract("T grid is empty".into()));
    }
    let table = t_grid
        .par_iter()
        .map(|&t| {
            let d = secure_distance(Scheme::PassiveBeamsplitter, &p.with_t(t)?, d_max)?;
            Ok((t, d.unwrap_or(0.0)))
        })
        .collect::<Result<Vec<_>>>()?;

    let (mut t_best, mut d_best) = table[0];
    for &(t, d) in &table[1..] {
        if d > d_best || (d == d_best && t < t_best) {
            t_best = t;
            d_best = d;
        }
    }
    Ok(TOptimum {
        t_best,
        d_best,
        table,
    })
}
