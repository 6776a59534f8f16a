use cvqkd::schemes::DEFAULT_D_MAX_KM;
use cvqkd::{
    confidence_bound, coverage_diagnostic, keyrate, mle_sigma2, optimize_t, secure_distance,
    simulate_monitor, Scheme,
};
use rayon::prelude::*;

use crate::config::{FiniteSizeMode, RunConfig};
use crate::csv::{format_sig9, CsvTable};
use crate::{CliError, EXIT_INSECURE, EXIT_OK};

pub const KEYRATE_HEADER: &[&str] = &[
    "scheme", "d_km", "eta", "chi", "i_ab", "s_eb", "key_rate", "secure",
];
pub const SWEEP_HEADER: &[&str] = &["scheme", "d_km", "key_rate"];
pub const GRID_HEADER: &[&str] = &["T", "d_km", "key_rate"];
pub const GRID_FOOTER_HEADER: &[&str] = &["T", "secure_distance_km"];
pub const ANALYTIC_HEADER: &[&str] = &[
    "sigma_hat2",
    "m",
    "eps_sm",
    "z",
    "delta_chi_s",
    "sigma_min2",
];
pub const SIMULATE_HEADER: &[&str] = &[
    "V",
    "chi_s",
    "m",
    "seed",
    "sigma_hat2",
    "negative",
    "z",
    "delta_chi_s",
    "sigma_min2",
];
pub const COVERAGE_HEADER: &[&str] = &[
    "trials",
    "failure_rate",
    "mean_sigma_hat2",
    "empirical_sd",
    "implied_sd",
    "moment_sd",
];

/// Tables to emit, a one-line summary, and the process exit code.
#[derive(Debug, Clone)]
pub struct CommandOutput {
    pub tables: Vec<CsvTable>,
    pub summary: String,
    pub exit_code: i32,
}

pub fn cmd_keyrate(cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    let scheme = match cfg.schemes.as_slice() {
        [] => Scheme::PassiveBeamsplitter,
        [one] => *one,
        _ => return Err(CliError::invalid("keyrate takes exactly one --scheme")),
    };
    let p = &cfg.params;
    let k = keyrate(scheme, p)?;
    let channel = p.channel();
    let mut table = CsvTable::new(KEYRATE_HEADER);
    table.push(vec![
        scheme.tag().into(),
        channel.distance_km().into(),
        channel.eta().into(),
        channel.chi().into(),
        k.i_ab.into(),
        k.s_eb.into(),
        k.key_rate.into(),
        k.secure.into(),
    ]);
    let summary = format!(
        "{scheme} at d = {} km: key rate {} bits/pulse ({})",
        format_sig9(channel.distance_km()),
        format_sig9(k.key_rate),
        if k.secure { "secure" } else { "insecure" }
    );
    Ok(CommandOutput {
        tables: vec![table],
        summary,
        exit_code: if k.secure { EXIT_OK } else { EXIT_INSECURE },
    })
}

pub fn cmd_sweep_distance(cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    let schemes: Vec<Scheme> = if cfg.schemes.is_empty() {
        Scheme::ALL.to_vec()
    } else {
        cfg.schemes.clone()
    };
    let distances = cfg.d_range.values();
    let points: Vec<(Scheme, f64)> = schemes
        .iter()
        .flat_map(|&s| distances.iter().map(move |&d| (s, d)))
        .collect();
    let rates = points
        .par_iter()
        .map(|&(s, d)| Ok(keyrate(s, &cfg.params.with_distance(d)?)?.key_rate))
        .collect::<Result<Vec<f64>, cvqkd::Error>>()?;

    let mut table = CsvTable::new(SWEEP_HEADER);
    for (&(s, d), &k) in points.iter().zip(&rates) {
        table.push(vec![s.tag().into(), d.into(), k.into()]);
    }

    let mut parts = Vec::new();
    for &s in &schemes {
        let last = points
            .iter()
            .zip(&rates)
            .rfind(|((scheme, _), &k)| *scheme == s && k > 0.0)
            .map(|((_, d), _)| *d);
        parts.push(match last {
            Some(d) => format!("{s} last secure grid point {} km", format_sig9(d)),
            None => format!("{s} insecure on grid"),
        });
    }
    Ok(CommandOutput {
        tables: vec![table],
        summary: parts.join("; "),
        exit_code: EXIT_OK,
    })
}

pub fn cmd_grid_t(cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    let ts = cfg.t_range.values();
    if ts.first().is_some_and(|&t| t < 0.01 - 1e-12) || ts.last().is_some_and(|&t| t > 0.99 + 1e-12)
    {
        return Err(CliError::invalid(format!(
            "T range [{}, {}] must lie within [0.01, 0.99]",
            cfg.t_range.start, cfg.t_range.stop
        )));
    }
    let distances = cfg.d_range.values();
    let points: Vec<(f64, f64)> = ts
        .iter()
        .flat_map(|&t| distances.iter().map(move |&d| (t, d)))
        .collect();
    let rates = points
        .par_iter()
        .map(|&(t, d)| {
            let p = cfg.params.with_t(t)?.with_distance(d)?;
            Ok(keyrate(Scheme::PassiveBeamsplitter, &p)?.key_rate)
        })
        .collect::<Result<Vec<f64>, cvqkd::Error>>()?;

    let mut grid = CsvTable::new(GRID_HEADER);
    for (&(t, d), &k) in points.iter().zip(&rates) {
        grid.push(vec![t.into(), d.into(), k.into()]);
    }

    let opt = optimize_t(&cfg.params, &ts, DEFAULT_D_MAX_KM)?;
    let mut footer = CsvTable::new(GRID_FOOTER_HEADER);
    for &(t, d) in &opt.table {
        footer.push(vec![t.into(), d.into()]);
    }
    let reference =
        secure_distance(Scheme::PassiveBeamsplitter, &cfg.params, DEFAULT_D_MAX_KM)?.unwrap_or(0.0);
    let summary = format!(
        "best T = {} with secure distance {} km; T = {} gives {} km",
        format_sig9(opt.t_best),
        format_sig9(opt.d_best),
        format_sig9(cfg.params.t()),
        format_sig9(reference)
    );
    Ok(CommandOutput {
        tables: vec![grid, footer],
        summary,
        exit_code: EXIT_OK,
    })
}

pub fn cmd_finite_size(cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    if cfg.m < 2 {
        return Err(CliError::invalid(format!("m = {} violates m >= 2", cfg.m)));
    }
    let m = usize::try_from(cfg.m).map_err(|_| CliError::invalid("m too large"))?;
    match cfg.mode {
        FiniteSizeMode::Analytic => {
            let sigma_hat2 = cfg.sigma_hat2.unwrap_or(cfg.params.chi_s());
            let e = confidence_bound(sigma_hat2, m, cfg.eps_sm)?;
            let mut table = CsvTable::new(ANALYTIC_HEADER);
            table.push(vec![
                e.sigma_hat2.into(),
                cfg.m.into(),
                e.epsilon_sm.into(),
                e.z.into(),
                e.delta_chi_s.into(),
                e.sigma_min2.into(),
            ]);
            let summary = format!(
                "z = {}, delta_chi_s = {}, sigma_min2 = {}",
                format_sig9(e.z),
                format_sig9(e.delta_chi_s),
                format_sig9(e.sigma_min2)
            );
            Ok(CommandOutput {
                tables: vec![table],
                summary,
                exit_code: EXIT_OK,
            })
        }
        FiniteSizeMode::Simulate => {
            let (v, chi_s) = (cfg.params.v(), cfg.params.chi_s());
            let batch = simulate_monitor(v, chi_s, m, cfg.seed)?;
            let mle = mle_sigma2(&batch)?;
            drop(batch);
            let e = confidence_bound(mle.sigma_hat2, m, cfg.eps_sm)?;
            let mut table = CsvTable::new(SIMULATE_HEADER);
            table.push(vec![
                v.into(),
                chi_s.into(),
                cfg.m.into(),
                cfg.seed.into(),
                e.sigma_hat2.into(),
                mle.is_negative().into(),
                e.z.into(),
                e.delta_chi_s.into(),
                e.sigma_min2.into(),
            ]);
            let mut tables = vec![table];
            let mut summary = format!(
                "sigma_hat2 = {}{}, sigma_min2 = {}",
                format_sig9(e.sigma_hat2),
                if mle.is_negative() { " (negative)" } else { "" },
                format_sig9(e.sigma_min2)
            );
            if cfg.trials > 0 {
                let trials = usize::try_from(cfg.trials)
                    .map_err(|_| CliError::invalid("trials too large"))?;
                let r = coverage_diagnostic(v, chi_s, m, cfg.eps_sm, trials, cfg.seed)?;
                let mut cov = CsvTable::new(COVERAGE_HEADER);
                cov.push(vec![
                    r.trials.into(),
                    r.failure_rate.into(),
                    r.mean_sigma_hat2.into(),
                    r.empirical_sd.into(),
                    r.implied_sd.into(),
                    r.moment_sd.into(),
                ]);
                tables.push(cov);
                summary.push_str(&format!(
                    "; failure rate {} over {} trials, sd {} (implied {}, moment {})",
                    format_sig9(r.failure_rate),
                    r.trials,
                    format_sig9(r.empirical_sd),
                    format_sig9(r.implied_sd),
                    format_sig9(r.moment_sd)
                ));
            }
            Ok(CommandOutput {
                tables,
                summary,
                exit_code: EXIT_OK,
            })
        }
    }
}
