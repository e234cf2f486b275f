use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use serde::Deserialize;

use super::output::{header, opt, write_atomic, Table};
use super::{EXIT_FAIL, EXIT_PASS};
use crate::coupling::{check_scenario, run_coupled, survey, CoupledConfig, SeedOutcome, SurveyOptions, DEFAULT_FIRST_X};
use crate::engine::derive_seed;
use crate::error::{Error, Result};
use crate::gibbs::{exact_stationarity_check, StationarityOptions, DEFAULT_MAX_STATES};

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct GibbsArgs {
    #[arg(long, conflicts_with = "kernel")]
    pub preset: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub kernel: Option<String>,
    /// Half-width of the site window (default 2).
    #[arg(long)]
    pub w: Option<i64>,
    /// Largest |eta(x)| in the box (default 3).
    #[arg(long = "H")]
    #[serde(rename = "H")]
    pub h: Option<i64>,
    #[arg(long)]
    pub max_states: Option<usize>,
    /// Pass threshold for the change-of-measure residual (default 1e-9).
    #[arg(long)]
    pub rn_tolerance: Option<f64>,
    /// Pass when the interior residual is at most this multiple of the leakage (default 5).
    #[arg(long)]
    pub leakage_factor: Option<f64>,
    /// Also write the report to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run on kernels that are not positive definite.
    #[arg(long)]
    #[serde(default)]
    pub allow_indefinite: bool,
}
merge_fields!(GibbsArgs with kernel { w, h, max_states, rn_tolerance, leakage_factor, out } switches { allow_indefinite });

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

pub(crate) fn cmd_gibbs_check(args: GibbsArgs, out: &mut dyn Write) -> Result<u8> {
    let (kernel, _, kflags) = args.kernel_args().resolve()?;
    let w = args.w.unwrap_or(2);
    let h = args.h.unwrap_or(3);
    let max_states = args.max_states.unwrap_or(DEFAULT_MAX_STATES);
    let rn_tol = args.rn_tolerance.unwrap_or(1e-9);
    let factor = args.leakage_factor.unwrap_or(5.0);
    let mut hargs = vec!["gibbs-check".to_string()];
    hargs.extend(kflags);
    hargs.extend(["--w".into(), w.to_string(), "--H".into(), h.to_string()]);
    hargs.extend(["--max-states".into(), max_states.to_string()]);
    hargs.extend(["--rn-tolerance".into(), rn_tol.to_string(), "--leakage-factor".into(), factor.to_string()]);
    if args.allow_indefinite {
        hargs.push("--allow-indefinite".into());
    }

    let mut options = StationarityOptions::new(w, h);
    options.allow_indefinite = args.allow_indefinite;
    options.max_states = max_states;
    let report = exact_stationarity_check(&kernel, &options)?;
    let checks = [
        ("rn_identity", report.rn_within(rn_tol)),
        ("interior_residual_vs_leakage", report.residual_within(factor)),
        ("shift_composition", report.composition_exact),
    ];
    let mut text = format!("{report}\n\n[checks]\n");
    for (name, ok) in checks {
        text.push_str(&format!("{name} = {}\n", verdict(ok)));
    }
    out.write_all(text.as_bytes())?;
    if let Some(path) = &args.out {
        write_atomic(path, format!("{}\n{text}", header(&hargs)).as_bytes())?;
    }
    Ok(if checks.iter().all(|c| c.1) { EXIT_PASS } else { EXIT_FAIL })
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct CouplingArgs {
    /// Preset supplying kernel and start (default second_derivative).
    #[arg(long, conflicts_with = "kernel")]
    pub preset: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub kernel: Option<String>,
    #[arg(long)]
    pub steps: Option<u64>,
    /// Number of seeds (default 100).
    #[arg(long)]
    pub seeds: Option<u64>,
    #[arg(long)]
    pub master_seed: Option<u64>,
    /// First x at which the scenario conditions are checked (default 3).
    #[arg(long)]
    pub first_x: Option<i64>,
    /// Accepted X_n / sqrt(2n) on seeds that stay within 2 of their maximum (default "0.95,1.05").
    #[arg(long)]
    pub ratio_band: Option<String>,
    /// Require a zero recursion residual at every x >= this (default 1).
    #[arg(long)]
    pub recursion_from: Option<i64>,
    /// Audit events A, B, C on [0, ABC_X_MAX] for every seed.
    #[arg(long)]
    pub abc_x_max: Option<i64>,
    /// Sampled unrealized keys per site for event A (default 10000).
    #[arg(long)]
    pub abc_samples: Option<usize>,
    /// Per-seed CSV (default coupling.csv).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Scenario CSV (per-x records) of the first seed.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
}
merge_fields!(CouplingArgs with kernel {
    steps, seeds, master_seed, first_x, ratio_band, recursion_from, abc_x_max, abc_samples, out, scenario
} switches {});

fn parse_band(s: &str) -> Result<(f64, f64)> {
    let bad = || Error::Config(format!("--ratio-band {s:?}: expected LO,HI"));
    let (lo, hi) = s.split_once(',').ok_or_else(bad)?;
    let (lo, hi): (f64, f64) = (lo.trim().parse().map_err(|_| bad())?, hi.trim().parse().map_err(|_| bad())?);
    if lo > hi {
        return Err(bad());
    }
    Ok((lo, hi))
}

fn stats(values: &[f64]) -> Option<(f64, f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    Some((min, mean, max))
}

pub(crate) fn cmd_coupling_check(args: CouplingArgs, out: &mut dyn Write) -> Result<u8> {
    let mut kargs = args.kernel_args();
    if kargs.preset.is_none() && kargs.kernel.is_none() {
        kargs.preset = Some("second_derivative".into());
    }
    let (kernel, profile, kflags) = kargs.resolve()?;
    let steps = args.steps.ok_or_else(|| Error::Config("--steps is required".into()))?;
    let seeds = args.seeds.unwrap_or(100);
    let master = args.master_seed.unwrap_or(0);
    let first_x = args.first_x.unwrap_or(DEFAULT_FIRST_X);
    let band_spec = args.ratio_band.clone().unwrap_or_else(|| "0.95,1.05".into());
    let band = parse_band(&band_spec)?;
    let recursion_from = args.recursion_from.unwrap_or(1);
    let abc = args.abc_x_max.map(|x| (x, args.abc_samples.unwrap_or(10_000)));
    if seeds == 0 {
        return Err(Error::Config("--seeds must be at least 1".into()));
    }
    if steps > 10_000_000 {
        return Err(Error::Resource(format!("coupling-check keeps the full history; {steps} steps exceeds 10^7")));
    }
    let mut hargs = vec!["coupling-check".to_string()];
    hargs.extend(kflags);
    hargs.extend(["--steps".into(), steps.to_string(), "--seeds".into(), seeds.to_string()]);
    hargs.extend(["--master-seed".into(), master.to_string(), "--first-x".into(), first_x.to_string()]);
    hargs.extend(["--ratio-band".into(), format!("{},{}", band.0, band.1)]);
    hargs.extend(["--recursion-from".into(), recursion_from.to_string()]);
    if let Some((x, n)) = abc {
        hargs.extend(["--abc-x-max".into(), x.to_string(), "--abc-samples".into(), n.to_string()]);
    }
    let head = header(&hargs);

    let base = CoupledConfig { kernel, initial_profile: profile, steps, seed: 0 };
    let outcomes = survey(&base, seeds, master, SurveyOptions { first_x, abc })?;

    let mut columns = vec![
        "seed",
        "final_position",
        "ratio",
        "max_backtrack",
        "good",
        "good_through",
        "x_max",
        "recursion_failures",
        "first_recursion_failure",
        "parity_violations",
        "sigma_ratio_200",
    ];
    if abc.is_some() {
        columns.extend(["event_a", "event_b", "event_c"]);
    }
    let mut table = Table::new(&head, &columns);
    for o in &outcomes {
        let mut row = vec![
            o.seed.to_string(),
            o.final_position.to_string(),
            o.ratio.to_string(),
            o.max_backtrack.to_string(),
            o.good.to_string(),
            o.good_through.to_string(),
            o.x_max.to_string(),
            o.recursion_failure_sites.len().to_string(),
            opt(o.recursion_failure_sites.first()),
            o.parity_violations.to_string(),
            opt(o.sigma_ratio_200),
        ];
        if let Some(r) = &o.abc {
            row.extend([r.a.to_string(), r.b.to_string(), r.c.to_string()]);
        }
        table.row(row);
    }
    let path = args.out.clone().unwrap_or_else(|| PathBuf::from("coupling.csv"));
    write_atomic(&path, &table.into_bytes())?;
    if let Some(scenario_path) = &args.scenario {
        let run = run_coupled(&CoupledConfig { seed: derive_seed(master, 0), ..base.clone() })?;
        let report = check_scenario(&run, first_x)?;
        let mut bytes = format!("{head}\n").into_bytes();
        bytes.extend_from_slice(report.to_csv().as_bytes());
        write_atomic(scenario_path, &bytes)?;
    }

    let near: Vec<&SeedOutcome> = outcomes.iter().filter(|o| o.stays_near_maximum()).collect();
    let n = outcomes.len() as f64;
    let good = outcomes.iter().filter(|o| o.good).count();
    let ratios: Vec<f64> = near.iter().map(|o| o.ratio).collect();
    let in_band = ratios.iter().filter(|r| **r >= band.0 && **r <= band.1).count();
    let clean = near.iter().filter(|o| o.recursion_failures_from(recursion_from) == 0).count();
    let clean_from_50 = near.iter().filter(|o| o.recursion_failures_from(50) == 0).count();
    let parity: usize = outcomes.iter().map(|o| o.parity_violations).sum();
    let sigma: Vec<f64> = outcomes.iter().filter(|o| o.good_through >= 200).filter_map(|o| o.sigma_ratio_200).collect();

    writeln!(out, "[coupling]")?;
    writeln!(out, "seeds = {seeds}")?;
    writeln!(out, "steps = {steps}")?;
    writeln!(out, "near_maximum = {} ({:.3})", near.len(), near.len() as f64 / n)?;
    writeln!(out, "good_scenario = {good} ({:.3}) from x = {first_x}", good as f64 / n)?;
    if let Some((lo, mean, hi)) = stats(&ratios) {
        writeln!(out, "ratio_near_maximum = min {lo:.4} mean {mean:.4} max {hi:.4}")?;
    }
    writeln!(out, "ratio_in_band = {in_band}/{}", near.len())?;
    writeln!(out, "recursion_clean_from_{recursion_from} = {clean}/{}", near.len())?;
    writeln!(out, "recursion_clean_from_50 = {clean_from_50}/{}", near.len())?;
    if let Some((lo, mean, hi)) = stats(&sigma) {
        writeln!(out, "sigma_200_over_x2 = min {lo:.3} mean {mean:.3} max {hi:.3} over {} seeds", sigma.len())?;
    }
    writeln!(out, "parity_violations = {parity}")?;
    if abc.is_some() {
        let reports: Vec<_> = outcomes.iter().filter_map(|o| o.abc.as_ref()).collect();
        let count = |f: &dyn Fn(&crate::coupling::AbcReport) -> bool| reports.iter().filter(|r| f(r)).count();
        writeln!(out, "event_a = {}/{}", count(&|r| r.a), reports.len())?;
        writeln!(out, "event_b = {}/{}", count(&|r| r.b), reports.len())?;
        writeln!(out, "event_c = {}/{}", count(&|r| r.c), reports.len())?;
        writeln!(out, "events_abc = {}/{}", count(&|r| r.all()), reports.len())?;
    }

    let checks = [
        ("near_maximum_positive", !near.is_empty()),
        ("ratio_band", !near.is_empty() && in_band == near.len()),
        ("recursion_exact", !near.is_empty() && clean == near.len()),
    ];
    writeln!(out, "\n[checks]")?;
    for (name, ok) in checks {
        writeln!(out, "{name} = {}", verdict(ok))?;
    }
    writeln!(out, "wrote {}", path.display())?;
    Ok(if checks.iter().all(|c| c.1) { EXIT_PASS } else { EXIT_FAIL })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_parsing() {
        assert_eq!(parse_band("0.9,1.1").unwrap(), (0.9, 1.1));
        assert!(parse_band("1.1,0.9").is_err());
        assert!(parse_band("0.9").is_err());
    }
}
