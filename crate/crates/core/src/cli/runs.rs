use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Args;
use rayon::prelude::*;
use serde::Deserialize;

use super::output::{header, opt, write_atomic, Table};
use super::{EXIT_FAIL, EXIT_PASS};
use crate::analysis::{classify_phase, scaling_exponent, Classification, PhaseLabel, PhaseThresholds};
use crate::engine::{derive_seed, run, InitialProfile, RunConfig, DEFAULT_CHECKPOINT_RATIO};
use crate::error::{Error, Result};
use crate::kernel::critical_ratio;
use crate::{predict_stuck_size, Kernel};

const CLASSIFICATION_COLUMNS: [&str; 11] =
    ["a", "b", "kernel", "seed", "slope", "stderr", "label", "k_sites", "sqrt_ratio", "log_ratio", "growth_ratio"];

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunArgs {
    #[arg(long, conflicts_with = "kernel")]
    pub preset: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub kernel: Option<String>,
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Geometric spacing of the trajectory checkpoints.
    #[arg(long)]
    pub checkpoint_ratio: Option<f64>,
    /// Directory for the CSV files (default: current directory).
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// File name stem: NAME_trajectory.csv and NAME_profile.csv.
    #[arg(long)]
    pub name: Option<String>,
    /// Print the fitted scaling exponent.
    #[arg(long)]
    #[serde(default)]
    pub slope: bool,
    /// Use 1 - u for every uniform draw u.
    #[arg(long)]
    #[serde(default)]
    pub antithetic: bool,
}
merge_fields!(RunArgs with kernel { steps, seed, checkpoint_ratio, out_dir, name } switches { slope, antithetic });

fn required<T>(v: Option<T>, flag: &str) -> Result<T> {
    v.ok_or_else(|| Error::Config(format!("--{flag} is required")))
}

pub(crate) fn cmd_run(args: RunArgs, out: &mut dyn Write) -> Result<u8> {
    let (kernel, profile, kflags) = args.kernel_args().resolve()?;
    let steps = required(args.steps, "steps")?;
    let seed = args.seed.unwrap_or(0);
    let ratio = args.checkpoint_ratio.unwrap_or(DEFAULT_CHECKPOINT_RATIO);
    let mut hargs = vec!["run".to_string()];
    hargs.extend(kflags);
    hargs.extend(["--steps".into(), steps.to_string(), "--seed".into(), seed.to_string()]);
    hargs.extend(["--checkpoint-ratio".into(), ratio.to_string()]);
    if args.antithetic {
        hargs.push("--antithetic".into());
    }
    let head = header(&hargs);

    let mut config = RunConfig::new(kernel, steps, seed).with_profile(profile);
    config.checkpoint_ratio = ratio;
    config.antithetic = args.antithetic;
    let summary = run(&config)?;

    let mut traj = Table::new(&head, &["n", "position", "range_min", "range_max"]);
    for c in &summary.checkpoints {
        traj.row([c.n.to_string(), c.position.to_string(), c.range_min.to_string(), c.range_max.to_string()]);
    }
    let mut prof = Table::new(&head, &["edge_left_endpoint", "count", "initial_value"]);
    for (edge, count, initial) in summary.final_profile().rows() {
        prof.row([edge.to_string(), count.to_string(), initial.to_string()]);
    }
    let dir = args.out_dir.unwrap_or_else(|| PathBuf::from("."));
    let name = args.name.unwrap_or_else(|| "run".into());
    let traj_path = dir.join(format!("{name}_trajectory.csv"));
    let prof_path = dir.join(format!("{name}_profile.csv"));
    write_atomic(&traj_path, &traj.into_bytes())?;
    write_atomic(&prof_path, &prof.into_bytes())?;

    let last = summary.checkpoints.last().expect("checkpoint at n = 0");
    writeln!(out, "steps = {}", summary.steps())?;
    writeln!(out, "final_position = {}", summary.final_position())?;
    writeln!(out, "range = [{}, {}]", last.range_min, last.range_max)?;
    writeln!(out, "max_backtrack = {}", summary.max_backtrack)?;
    if args.slope {
        match scaling_exponent(&summary) {
            Ok(e) if e.stuck => writeln!(out, "slope = 0 (range frozen)")?,
            Ok(e) => writeln!(out, "slope = {:.4} +- {:.4}", e.slope, e.stderr)?,
            Err(e) => writeln!(out, "slope = n/a ({e})")?,
        }
    }
    writeln!(out, "wrote {} and {}", traj_path.display(), prof_path.display())?;
    Ok(EXIT_PASS)
}

/// Canonical `--thresholds` value, or `None` for the defaults.
fn thresholds_flag(t: &PhaseThresholds) -> Option<String> {
    if *t == PhaseThresholds::default() {
        return None;
    }
    let pair = |(a, b): (f64, f64)| format!("[{a:?},{b:?}]");
    Some(format!(
        "logarithmic_slope={:?},slow_slope={:?},log_ratio={},ballistic_slope={:?},sqrt_backtrack={},sqrt_ratio={},diffusive={}",
        t.logarithmic_slope,
        t.slow_slope,
        pair(t.log_ratio),
        t.ballistic_slope,
        t.sqrt_backtrack,
        pair(t.sqrt_ratio),
        pair(t.diffusive)
    ))
}

/// Parses `key=value,...` (TOML inline-table syntax without braces).
fn parse_thresholds(s: &str) -> Result<PhaseThresholds> {
    #[derive(Deserialize)]
    struct Wrap {
        t: PhaseThresholds,
    }
    toml::from_str::<Wrap>(&format!("t = {{{s}}}"))
        .map(|w| w.t)
        .map_err(|e| Error::Config(format!("--thresholds: {}", e.message())))
}

fn effective_thresholds(flag: &Option<String>, file: &PhaseThresholds) -> Result<PhaseThresholds> {
    match flag {
        Some(s) => parse_thresholds(s),
        None => Ok(file.clone()),
    }
}

fn classify_seed(
    kernel: &Kernel,
    profile: &InitialProfile,
    steps: u64,
    seed: u64,
    thresholds: &PhaseThresholds,
) -> Result<Classification> {
    let summary = run(&RunConfig::new(kernel.clone(), steps, seed).with_profile(profile.clone()))?;
    Ok(classify_phase(&summary, kernel, thresholds))
}

fn fmt_f64(v: f64) -> String {
    v.to_string()
}

fn label_text(label: &PhaseLabel) -> String {
    match label {
        PhaseLabel::Stuck(k) => format!("stuck({k})"),
        other => other.to_string(),
    }
}

/// Columns `slope .. growth_ratio` of a classification row.
fn classification_fields(c: &Result<Classification>) -> Vec<String> {
    match c {
        Ok(c) => vec![
            opt(c.exponent.map(|e| fmt_f64(e.slope))),
            opt(c.exponent.map(|e| fmt_f64(e.stderr))),
            c.label.to_string(),
            opt(c.k_sites()),
            opt(c.sqrt.map(|s| fmt_f64(s.ratio))),
            opt(c.log.map(|l| fmt_f64(l.log_ratio))),
            opt(c.log.map(|l| fmt_f64(l.growth_ratio))),
        ],
        Err(_) => vec![String::new(), String::new(), "failed".into(), String::new(), String::new(), String::new(), String::new()],
    }
}

fn ab_fields(kernel: &Kernel) -> [String; 2] {
    match kernel.symmetric_ab() {
        Some((a, b)) => [fmt_f64(a), fmt_f64(b)],
        None => [String::new(), String::new()],
    }
}

fn tally(counts: &mut BTreeMap<String, usize>, c: &Result<Classification>) {
    let key = match c {
        Ok(c) => label_text(&c.label),
        Err(_) => "failed".into(),
    };
    *counts.entry(key).or_insert(0) += 1;
}

fn print_tally(out: &mut dyn Write, counts: &BTreeMap<String, usize>) -> Result<()> {
    for (label, n) in counts {
        writeln!(out, "{label}: {n}")?;
    }
    Ok(())
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ClassifyArgs {
    #[arg(long, conflicts_with = "kernel")]
    pub preset: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub kernel: Option<String>,
    #[arg(long)]
    pub steps: Option<u64>,
    /// Number of seeds (default 8).
    #[arg(long)]
    pub seeds: Option<u64>,
    #[arg(long)]
    pub master_seed: Option<u64>,
    /// Classification thresholds as key=value pairs, e.g. "slow_slope=0.05".
    #[arg(long)]
    pub thresholds: Option<String>,
    /// Output CSV (default classify.csv).
    #[arg(long)]
    pub out: Option<PathBuf>,
}
merge_fields!(ClassifyArgs with kernel { steps, seeds, master_seed, thresholds, out } switches {});

pub(crate) fn cmd_classify(args: ClassifyArgs, file_thresholds: &PhaseThresholds, out: &mut dyn Write) -> Result<u8> {
    let (kernel, profile, kflags) = args.kernel_args().resolve()?;
    let steps = required(args.steps, "steps")?;
    let seeds = args.seeds.unwrap_or(8);
    let master = args.master_seed.unwrap_or(0);
    let thresholds = effective_thresholds(&args.thresholds, file_thresholds)?;
    if seeds == 0 {
        return Err(Error::Config("--seeds must be at least 1".into()));
    }
    let mut hargs = vec!["classify".to_string()];
    hargs.extend(kflags);
    hargs.extend(["--steps".into(), steps.to_string(), "--seeds".into(), seeds.to_string()]);
    hargs.extend(["--master-seed".into(), master.to_string()]);
    if let Some(t) = thresholds_flag(&thresholds) {
        hargs.extend(["--thresholds".into(), t]);
    }

    let results: Vec<(u64, Result<Classification>)> = (0..seeds)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(master, i);
            (seed, classify_seed(&kernel, &profile, steps, seed, &thresholds))
        })
        .collect();

    let mut table = Table::new(&header(&hargs), &CLASSIFICATION_COLUMNS);
    let [a, b] = ab_fields(&kernel);
    let mut counts = BTreeMap::new();
    for (seed, c) in &results {
        let mut row = vec![a.clone(), b.clone(), kernel.literal(), seed.to_string()];
        row.extend(classification_fields(c));
        table.row(row);
        tally(&mut counts, c);
    }
    let path = args.out.unwrap_or_else(|| PathBuf::from("classify.csv"));
    write_atomic(&path, &table.into_bytes())?;
    writeln!(out, "kernel = {}", kernel.literal())?;
    print_tally(out, &counts)?;
    writeln!(out, "wrote {}", path.display())?;
    Ok(if results.iter().any(|(_, c)| c.is_err()) { EXIT_FAIL } else { EXIT_PASS })
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct SweepArgs {
    /// "rect" (a-range x b-range) or "circle" ((b, a) = (cos t, sin t)).
    #[arg(long)]
    pub grid: Option<String>,
    /// MIN:MAX:STEP, inclusive.
    #[arg(long, allow_hyphen_values = true)]
    pub a_range: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub b_range: Option<String>,
    /// Number of equally spaced angles on the circle.
    #[arg(long)]
    pub angles: Option<u64>,
    #[arg(long)]
    pub seeds: Option<u64>,
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long)]
    pub master_seed: Option<u64>,
    #[arg(long)]
    pub thresholds: Option<String>,
    /// Output CSV (default sweep.csv). Completed points are kept under OUT.parts/ until the sweep finishes.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Ignore completed points from an earlier, interrupted sweep.
    #[arg(long)]
    #[serde(default)]
    pub fresh: bool,
}
merge_fields!(SweepArgs { grid, a_range, b_range, angles, seeds, steps, master_seed, thresholds, out } switches { fresh });

/// Rounds away floating noise from grid arithmetic.
fn tidy(v: f64) -> f64 {
    let r = (v * 1e12).round() / 1e12;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn parse_range(s: &str, flag: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || Error::Config(format!("--{flag} {s:?}: expected MIN:MAX:STEP"));
    let [lo, hi, step] = parts.as_slice() else { return Err(bad()) };
    let (lo, hi, step): (f64, f64, f64) =
        (lo.trim().parse().map_err(|_| bad())?, hi.trim().parse().map_err(|_| bad())?, step.trim().parse().map_err(|_| bad())?);
    if !(step > 0.0) || !lo.is_finite() || !hi.is_finite() {
        return Err(bad());
    }
    if hi < lo {
        return Ok(Vec::new());
    }
    let count = ((hi - lo) / step + 1e-9).floor() as u64 + 1;
    if count > 1_000_000 {
        return Err(Error::Config(format!("--{flag} {s:?} has {count} points")));
    }
    Ok((0..count).map(|i| tidy(lo + i as f64 * step)).collect())
}

fn sweep_points(args: &SweepArgs) -> Result<(Vec<(f64, f64)>, Vec<String>)> {
    let grid = args.grid.as_deref().unwrap_or("rect");
    match grid {
        "rect" => {
            let a_spec = required(args.a_range.clone(), "a-range")?;
            let b_spec = required(args.b_range.clone(), "b-range")?;
            let a_vals = parse_range(&a_spec, "a-range")?;
            let b_vals = parse_range(&b_spec, "b-range")?;
            let points = a_vals.iter().flat_map(|&a| b_vals.iter().map(move |&b| (a, b))).collect();
            Ok((points, vec!["--grid".into(), "rect".into(), "--a-range".into(), a_spec, "--b-range".into(), b_spec]))
        }
        "circle" => {
            let n = required(args.angles, "angles")?;
            let points = (0..n)
                .map(|i| {
                    let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                    (tidy(t.sin()), tidy(t.cos()))
                })
                .collect();
            Ok((points, vec!["--grid".into(), "circle".into(), "--angles".into(), n.to_string()]))
        }
        other => Err(Error::Config(format!("--grid {other:?}: expected rect or circle"))),
    }
}

/// One grid point's rows, reused from a completion marker when present.
struct PointJob<'a> {
    index: usize,
    kernel: Result<Kernel>,
    parts: &'a Path,
    head: &'a str,
    fresh: bool,
}

struct PointResult {
    rows: Vec<u8>,
    failed: bool,
    resumed: bool,
    labels: Vec<Result<Classification>>,
}

fn part_path(parts: &Path, index: usize) -> PathBuf {
    parts.join(format!("point-{index:06}.csv"))
}

/// Rows of a completed point, if its marker exists and belongs to the same sweep.
fn read_marker(path: &Path, head: &str) -> Option<Vec<u8>> {
    let text = fs::read(path).ok()?;
    let newline = text.iter().position(|&c| c == b'\n')?;
    (&text[..newline] == head.as_bytes()).then(|| text[newline + 1..].to_vec())
}

fn run_point<F>(job: PointJob<'_>, seeds: u64, point_seed: u64, lead: &[String], classify: F) -> Result<PointResult>
where
    F: Fn(&Kernel, u64) -> Result<Classification> + Sync,
{
    let marker = part_path(job.parts, job.index);
    if !job.fresh {
        if let Some(rows) = read_marker(&marker, job.head) {
            return Ok(PointResult { rows, failed: false, resumed: true, labels: Vec::new() });
        }
    }
    let labels: Vec<(u64, Result<Classification>)> = (0..seeds)
        .into_par_iter()
        .map(|j| {
            let seed = derive_seed(point_seed, j);
            let c = match &job.kernel {
                Ok(k) => classify(k, seed),
                Err(e) => Err(Error::Config(e.to_string())),
            };
            (seed, c)
        })
        .collect();
    let mut table = Table::bare();
    for (seed, c) in &labels {
        let mut row = lead.to_vec();
        row.push(seed.to_string());
        row.extend(classification_fields(c));
        table.row(row);
    }
    let rows = table.into_bytes();
    let failed = labels.iter().any(|(_, c)| c.is_err());
    if !failed {
        let mut marked = job.head.as_bytes().to_vec();
        marked.push(b'\n');
        marked.extend_from_slice(&rows);
        write_atomic(&marker, &marked)?;
    }
    Ok(PointResult { rows, failed, resumed: false, labels: labels.into_iter().map(|(_, c)| c).collect() })
}

pub(crate) fn cmd_sweep(args: SweepArgs, file_thresholds: &PhaseThresholds, out: &mut dyn Write) -> Result<u8> {
    let (points, grid_flags) = sweep_points(&args)?;
    if points.is_empty() {
        return Err(Error::Config("the sweep grid is empty".into()));
    }
    let seeds = args.seeds.unwrap_or(8);
    if seeds == 0 {
        return Err(Error::Config("--seeds must be at least 1".into()));
    }
    let steps = required(args.steps, "steps")?;
    let master = args.master_seed.unwrap_or(0);
    let thresholds = effective_thresholds(&args.thresholds, file_thresholds)?;
    let mut hargs = vec!["sweep".to_string()];
    hargs.extend(grid_flags);
    hargs.extend(["--seeds".into(), seeds.to_string(), "--steps".into(), steps.to_string()]);
    hargs.extend(["--master-seed".into(), master.to_string()]);
    if let Some(t) = thresholds_flag(&thresholds) {
        hargs.extend(["--thresholds".into(), t]);
    }
    let head = header(&hargs);
    let path = args.out.clone().unwrap_or_else(|| PathBuf::from("sweep.csv"));
    let mut parts = path.as_os_str().to_owned();
    parts.push(".parts");
    let parts = PathBuf::from(parts);

    let zero = InitialProfile::zero();
    let results: Vec<PointResult> = points
        .par_iter()
        .enumerate()
        .map(|(i, &(a, b))| {
            let job = PointJob { index: i, kernel: Kernel::new_symmetric(a, b), parts: &parts, head: &head, fresh: args.fresh };
            let lead = vec![fmt_f64(a), fmt_f64(b), job.kernel.as_ref().map_or(format!("{a},{b}"), |k| k.literal())];
            run_point(job, seeds, derive_seed(master, i as u64), &lead, |k, seed| {
                classify_seed(k, &zero, steps, seed, &thresholds)
            })
        })
        .collect::<Result<_>>()?;

    let mut bytes = Table::new(&head, &CLASSIFICATION_COLUMNS).into_bytes();
    let mut counts = BTreeMap::new();
    for r in &results {
        bytes.extend_from_slice(&r.rows);
        for c in &r.labels {
            tally(&mut counts, c);
        }
    }
    write_atomic(&path, &bytes)?;
    let failed = results.iter().filter(|r| r.failed).count();
    let resumed = results.iter().filter(|r| r.resumed).count();
    if failed == 0 {
        let _ = fs::remove_dir_all(&parts);
    }
    writeln!(out, "points = {}", points.len())?;
    writeln!(out, "seeds_per_point = {seeds}")?;
    writeln!(out, "resumed_points = {resumed}")?;
    writeln!(out, "failed_points = {failed}")?;
    print_tally(out, &counts)?;
    writeln!(out, "wrote {}", path.display())?;
    Ok(if failed > 0 { EXIT_FAIL } else { EXIT_PASS })
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct StuckScanArgs {
    /// Smallest ladder index k (default 1).
    #[arg(long)]
    pub k_min: Option<u64>,
    /// Largest ladder index k (default 8).
    #[arg(long)]
    pub k_max: Option<u64>,
    /// Offsets added to each A_k, comma separated (default "-0.02,0.02").
    #[arg(long, allow_hyphen_values = true)]
    pub offsets: Option<String>,
    /// |a| at every point (default 1).
    #[arg(long)]
    pub scale: Option<f64>,
    #[arg(long)]
    pub seeds: Option<u64>,
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long)]
    pub master_seed: Option<u64>,
    #[arg(long)]
    pub thresholds: Option<String>,
    /// Output CSV (default stuck_scan.csv).
    #[arg(long)]
    pub out: Option<PathBuf>,
}
merge_fields!(StuckScanArgs { k_min, k_max, offsets, scale, seeds, steps, master_seed, thresholds, out } switches {});

pub(crate) fn cmd_stuck_scan(args: StuckScanArgs, file_thresholds: &PhaseThresholds, out: &mut dyn Write) -> Result<u8> {
    let k_min = args.k_min.unwrap_or(1);
    let k_max = args.k_max.unwrap_or(8);
    let offsets_spec = args.offsets.clone().unwrap_or_else(|| "-0.02,0.02".into());
    let offsets: Vec<f64> = offsets_spec
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| Error::Config(format!("--offsets {offsets_spec:?}"))))
        .collect::<Result<_>>()?;
    let scale = args.scale.unwrap_or(1.0);
    let seeds = args.seeds.unwrap_or(4);
    let steps = required(args.steps, "steps")?;
    let master = args.master_seed.unwrap_or(0);
    let thresholds = effective_thresholds(&args.thresholds, file_thresholds)?;
    if k_min < 1 || k_max < k_min || offsets.is_empty() || !(scale > 0.0) || seeds == 0 {
        return Err(Error::Config("stuck-scan needs 1 <= k-min <= k-max, offsets, scale > 0 and seeds >= 1".into()));
    }
    let mut hargs = vec!["stuck-scan".to_string()];
    hargs.extend(["--k-min".into(), k_min.to_string(), "--k-max".into(), k_max.to_string()]);
    hargs.extend(["--offsets".into(), offsets.iter().map(|o| o.to_string()).collect::<Vec<_>>().join(",")]);
    hargs.extend(["--scale".into(), scale.to_string(), "--seeds".into(), seeds.to_string()]);
    hargs.extend(["--steps".into(), steps.to_string(), "--master-seed".into(), master.to_string()]);
    if let Some(t) = thresholds_flag(&thresholds) {
        hargs.extend(["--thresholds".into(), t]);
    }

    let mut points = Vec::new();
    for k in k_min..=k_max {
        let a_k = critical_ratio(k)?;
        for &off in &offsets {
            points.push(a_k + off);
        }
    }
    let zero = InitialProfile::zero();
    let results: Vec<(f64, f64, Option<u64>, Vec<(u64, Result<Classification>)>)> = points
        .par_iter()
        .enumerate()
        .map(|(i, &ratio)| {
            let (a, b) = (-scale, ratio * scale);
            let kernel = Kernel::new_symmetric(a, b);
            let point_seed = derive_seed(master, i as u64);
            let rows = (0..seeds)
                .into_par_iter()
                .map(|j| {
                    let seed = derive_seed(point_seed, j);
                    let c = match &kernel {
                        Ok(k) => classify_seed(k, &zero, steps, seed, &thresholds),
                        Err(e) => Err(Error::Config(e.to_string())),
                    };
                    (seed, c)
                })
                .collect();
            (ratio, b, predict_stuck_size(a, b), rows)
        })
        .collect();

    let mut table = Table::new(
        &header(&hargs),
        &["ratio", "a", "b", "predicted_sites", "seed", "label", "k_sites", "slope"],
    );
    let mut any_failed = false;
    for (ratio, b, predicted, rows) in &results {
        let mut at_prediction = 0;
        let mut smaller = 0;
        for (seed, c) in rows {
            let fields = classification_fields(c);
            any_failed |= c.is_err();
            if let (Ok(c), Some(p)) = (c, predicted) {
                match c.k_sites() {
                    Some(k) if k == *p => at_prediction += 1,
                    Some(k) if k < *p => smaller += 1,
                    _ => {}
                }
            }
            table.row([
                fmt_f64(tidy(*ratio)),
                fmt_f64(-scale),
                fmt_f64(tidy(*b)),
                opt(*predicted),
                seed.to_string(),
                fields[2].clone(),
                fields[3].clone(),
                fields[0].clone(),
            ]);
        }
        writeln!(
            out,
            "ratio = {:.4} predicted = {} stuck_at_prediction = {at_prediction}/{seeds} stuck_smaller = {smaller}",
            ratio,
            opt(*predicted)
        )?;
    }
    let path = args.out.unwrap_or_else(|| PathBuf::from("stuck_scan.csv"));
    write_atomic(&path, &table.into_bytes())?;
    writeln!(out, "wrote {}", path.display())?;
    Ok(if any_failed { EXIT_FAIL } else { EXIT_PASS })
}
