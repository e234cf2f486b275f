//! Offline classification of finished runs.
//!
//! Everything here is a pure function of a [`RunSummary`], so runs can be
//! analysed in any order and in parallel.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::engine::RunSummary;
use crate::error::{Error, Result};
use crate::Kernel;

/// Fewest checkpoints a slope is fitted to.
pub const MIN_CHECKPOINTS: usize = 8;
/// Shortest run [`detect_stuck`] will judge.
pub const MIN_STUCK_STEPS: u64 = 10_000;

/// Description of the finite-time stuck proxy, written into output metadata.
pub const STUCK_PROXY: &str = "stuck: range frozen over the last half of checkpoints and \
the sites visited after steps/2 all revisited after 3*steps/4";

/// Least-squares growth exponent of `max_{m<=n} |X_m - X_0|` against `n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExponentEstimate {
    pub slope: f64,
    pub stderr: f64,
    /// First and last checkpoint time used by the fit.
    pub window: (u64, u64),
    /// The displacement did not grow anywhere inside the window.
    pub stuck: bool,
}

pub fn scaling_exponent(summary: &RunSummary) -> Result<ExponentEstimate> {
    let cps = &summary.checkpoints;
    if cps.len() < MIN_CHECKPOINTS {
        return Err(Error::Insufficient(format!(
            "{} checkpoints, need at least {MIN_CHECKPOINTS}",
            cps.len()
        )));
    }
    let floor = (summary.steps() as f64).sqrt();
    let window: Vec<_> = cps.iter().filter(|c| c.n > 0 && c.n as f64 >= floor).collect();
    let (first, last) = match (window.first(), window.last()) {
        (Some(f), Some(l)) if window.len() >= 2 => (f, l),
        _ => return Err(Error::Insufficient("fewer than two checkpoints past sqrt(steps)".into())),
    };
    let span = (first.n, last.n);
    let disp: Vec<i64> = window.iter().map(|c| summary.max_displacement(c)).collect();
    if disp.iter().all(|&d| d == disp[0]) {
        return Ok(ExponentEstimate { slope: 0.0, stderr: 0.0, window: span, stuck: true });
    }
    let points: Vec<(f64, f64)> = window
        .iter()
        .zip(&disp)
        .filter(|(_, &d)| d > 0)
        .map(|(c, &d)| ((c.n as f64).ln(), (d as f64).ln()))
        .collect();
    let (slope, stderr) = least_squares_slope(&points)
        .ok_or_else(|| Error::Insufficient("fewer than two checkpoints with nonzero displacement".into()))?;
    Ok(ExponentEstimate { slope, stderr, window: span, stuck: false })
}

/// Slope and its standard error. `None` for fewer than two distinct abscissae.
fn least_squares_slope(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    let m = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let stderr = if points.len() > 2 {
        let ssr: f64 = points.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum();
        (ssr / (m - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Some((slope, stderr))
}

/// Closed interval of sites a run ended up confined to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct StuckInterval {
    pub min: i64,
    pub max: i64,
}

impl StuckInterval {
    pub fn sites(&self) -> u64 {
        (self.max - self.min) as u64 + 1
    }
}

/// Finite-time stuck proxy.
///
/// A run counts as stuck when its lifetime range did not move over the last
/// half of the checkpoints, and every site it visited during the second half
/// of the run was visited again during the last quarter. The returned
/// interval is the second-half interval: a walk may wander over a wide range
/// before settling, so the lifetime range overstates the trap.
pub fn detect_stuck(summary: &RunSummary) -> Option<(StuckInterval, u64)> {
    if summary.steps() < MIN_STUCK_STEPS {
        return None;
    }
    let cps = &summary.checkpoints;
    let mid = &cps[cps.len() / 2];
    let last = cps.last()?;
    if (mid.range_min, mid.range_max) != (last.range_min, last.range_max) {
        return None;
    }
    let (late, tail) = (summary.late, summary.tail);
    if (late.min, late.max) != (tail.min, tail.max) {
        return None;
    }
    let interval = StuckInterval { min: late.min, max: late.max };
    Some((interval, interval.sites()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SqrtSignature {
    /// `X_n / sqrt(2n)` at the last checkpoint.
    pub ratio: f64,
    /// `max_{m<=n} (S_m - X_m)`.
    pub max_backtrack: u64,
}

pub fn sqrt_signature(summary: &RunSummary) -> Result<SqrtSignature> {
    let n = summary.steps();
    if n == 0 {
        return Err(Error::Insufficient("empty run".into()));
    }
    let x = (summary.final_position() - summary.initial_position) as f64;
    Ok(SqrtSignature { ratio: x / (2.0 * n as f64).sqrt(), max_backtrack: summary.max_backtrack })
}

/// Fewest sites in the range for [`log_signature`].
pub const MIN_LOG_RANGE: u64 = 6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LogSignature {
    /// `X_n log 2 / log n`.
    pub log_ratio: f64,
    /// Mean over interior sites `y` of `L(y + 1/2) / L(y - 1/2)`.
    pub growth_ratio: f64,
}

pub fn log_signature(summary: &RunSummary) -> Result<LogSignature> {
    let last = summary.checkpoints.last().ok_or_else(|| Error::Insufficient("no checkpoints".into()))?;
    let sites = (last.range_max - last.range_min) as u64 + 1;
    if sites < MIN_LOG_RANGE {
        return Err(Error::Insufficient(format!("range of {sites} sites, need {MIN_LOG_RANGE}")));
    }
    let n = summary.steps() as f64;
    let x = (summary.final_position() - summary.initial_position) as f64;
    let profile = summary.final_profile();
    let ratios: Vec<f64> = (last.range_min + 1..last.range_max)
        .filter_map(|y| {
            let below = profile.value(y - 1);
            (below > 0.0).then(|| profile.value(y) / below)
        })
        .collect();
    if ratios.is_empty() {
        return Err(Error::Insufficient("no interior site with positive local time".into()));
    }
    Ok(LogSignature {
        log_ratio: x * std::f64::consts::LN_2 / n.ln(),
        growth_ratio: ratios.iter().sum::<f64>() / ratios.len() as f64,
    })
}

/// Range grew only to the right over the last half of the checkpoints and
/// the walker ends at its maximum.
pub fn grows_rightward(summary: &RunSummary) -> bool {
    let cps = &summary.checkpoints;
    match (cps.get(cps.len() / 2), cps.last()) {
        (Some(mid), Some(last)) => {
            mid.range_min == last.range_min && last.range_max > mid.range_max && last.position == last.range_max
        }
        _ => false,
    }
}

/// Band edges for [`classify_phase`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseThresholds {
    /// Below this slope a run is logarithmic when its log ratio agrees.
    pub logarithmic_slope: f64,
    /// Lower edge of the slow band.
    pub slow_slope: f64,
    /// Accepted range of `X_n log 2 / log n` for the logarithmic label.
    pub log_ratio: (f64, f64),
    pub ballistic_slope: f64,
    pub sqrt_backtrack: u64,
    pub sqrt_ratio: (f64, f64),
    pub diffusive: (f64, f64),
}

impl Default for PhaseThresholds {
    fn default() -> Self {
        PhaseThresholds {
            logarithmic_slope: 0.2,
            slow_slope: 0.1,
            log_ratio: (0.5, 2.0),
            ballistic_slope: 0.9,
            sqrt_backtrack: 2,
            sqrt_ratio: (0.9, 1.1),
            diffusive: (0.45, 0.55),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "label", content = "sites", rename_all = "snake_case")]
pub enum PhaseLabel {
    Stuck(u64),
    Logarithmic,
    SlowTrapped,
    DiffusiveBand,
    SuperdiffusiveBand,
    SqrtDeterministic,
    Ballistic,
    Unclassified,
}

impl fmt::Display for PhaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PhaseLabel::Stuck(_) => "stuck",
            PhaseLabel::Logarithmic => "logarithmic",
            PhaseLabel::SlowTrapped => "slow_trapped",
            PhaseLabel::DiffusiveBand => "diffusive_band",
            PhaseLabel::SuperdiffusiveBand => "superdiffusive_band",
            PhaseLabel::SqrtDeterministic => "sqrt_deterministic",
            PhaseLabel::Ballistic => "ballistic",
            PhaseLabel::Unclassified => "unclassified",
        })
    }
}

/// A label together with the statistics that produced it. Statistics that
/// could not be computed for the run are `None`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Classification {
    pub label: PhaseLabel,
    pub exponent: Option<ExponentEstimate>,
    pub stuck: Option<(StuckInterval, u64)>,
    pub sqrt: Option<SqrtSignature>,
    pub log: Option<LogSignature>,
    /// Kernel literal, when the kernel was supplied.
    pub kernel: String,
}

impl Classification {
    pub fn k_sites(&self) -> Option<u64> {
        self.stuck.map(|s| s.1)
    }
}

/// Phase label by the decision tree: stuck, logarithmic, ballistic,
/// square-root, then the slope bands.
pub fn classify_phase(summary: &RunSummary, kernel: &Kernel, thresholds: &PhaseThresholds) -> Classification {
    let exponent = scaling_exponent(summary).ok();
    let stuck = detect_stuck(summary);
    let sqrt = sqrt_signature(summary).ok();
    let log = log_signature(summary).ok();
    let t = thresholds;
    let within = |v: f64, (lo, hi): (f64, f64)| v >= lo && v <= hi;

    let label = if let Some((_, k)) = stuck {
        PhaseLabel::Stuck(k)
    } else if let Some(e) = exponent {
        let s = e.slope;
        if s < t.logarithmic_slope && log.is_some_and(|l| within(l.log_ratio, t.log_ratio)) {
            PhaseLabel::Logarithmic
        } else if s > t.ballistic_slope {
            PhaseLabel::Ballistic
        } else if sqrt.is_some_and(|q| q.max_backtrack <= t.sqrt_backtrack && within(q.ratio, t.sqrt_ratio)) {
            PhaseLabel::SqrtDeterministic
        } else if within(s, t.diffusive) {
            PhaseLabel::DiffusiveBand
        } else if s > t.diffusive.1 && s <= t.ballistic_slope {
            PhaseLabel::SuperdiffusiveBand
        } else if s > t.slow_slope && s < t.diffusive.0 {
            PhaseLabel::SlowTrapped
        } else {
            PhaseLabel::Unclassified
        }
    } else {
        PhaseLabel::Unclassified
    };
    Classification { label, exponent, stuck, sqrt, log, kernel: kernel.literal() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{preset, run, RunConfig};
    use proptest::prelude::*;

    fn summary(traj: &[i64]) -> RunSummary {
        RunSummary::from_trajectory(traj, 1.05).unwrap()
    }

    /// Nearest-neighbour path through the given waypoints.
    fn through(points: &[i64]) -> Vec<i64> {
        let mut out = vec![points[0]];
        for &p in &points[1..] {
            let mut x = *out.last().unwrap();
            while x != p {
                x += (p - x).signum();
                out.push(x);
            }
        }
        out
    }

    fn oscillate(lo: i64, hi: i64, steps: usize) -> Vec<i64> {
        let mut out = through(&[0, lo, hi]);
        let mut up = false;
        while out.len() <= steps {
            let x = *out.last().unwrap();
            let next = if up { x + 1 } else { x - 1 };
            out.push(next);
            if next == hi {
                up = false;
            } else if next == lo {
                up = true;
            }
        }
        out.truncate(steps + 1);
        out
    }

    #[test]
    fn straight_line_has_unit_slope() {
        let traj: Vec<i64> = (0..=100_000).collect();
        let e = scaling_exponent(&summary(&traj)).unwrap();
        assert!((e.slope - 1.0).abs() < 1e-9, "{e:?}");
        assert!(!e.stuck);
        assert!(e.stderr < 1e-9);
    }

    #[test]
    fn square_root_path_has_half_slope() {
        let n = 200_000u64;
        let waypoints: Vec<i64> = (0..=n).map(|m| ((2 * m) as f64).sqrt().floor() as i64).collect();
        // Keep the path nearest-neighbour by bouncing in place when the target does not move.
        let mut traj = vec![0i64];
        for m in 1..=n as usize {
            let target = waypoints[m];
            let x = *traj.last().unwrap();
            traj.push(if target > x { x + 1 } else if x > 0 && (m % 2 == 1) { x - 1 } else { x + 1 });
        }
        let s = summary(&traj);
        let e = scaling_exponent(&s).unwrap();
        assert!((e.slope - 0.5).abs() < 0.01, "{e:?}");
    }

    #[test]
    fn constant_range_is_flagged() {
        let s = summary(&oscillate(0, 1, 50_000));
        let e = scaling_exponent(&s).unwrap();
        assert_eq!(e.slope, 0.0);
        assert!(e.stuck);
    }

    #[test]
    fn too_few_checkpoints() {
        let s = RunSummary::from_trajectory(&[0, 1, 2], 2.0).unwrap();
        assert!(matches!(scaling_exponent(&s), Err(Error::Insufficient(_))));
    }

    #[test]
    fn stuck_on_settled_interval() {
        let mut traj = through(&[0, -20, 15, 3]);
        traj.extend(oscillate(0, 10, 60_000).into_iter().skip(1).map(|x| x + 3));
        let s = summary(&traj);
        let (interval, k) = detect_stuck(&s).unwrap();
        assert_eq!(k, 11);
        assert_eq!(interval, StuckInterval { min: 3, max: 13 });
    }

    #[test]
    fn single_edge_is_two_sites() {
        let s = summary(&oscillate(0, 1, 20_000));
        assert_eq!(detect_stuck(&s).map(|x| x.1), Some(2));
    }

    #[test]
    fn short_runs_are_not_judged() {
        let s = summary(&oscillate(0, 1, 9_999));
        assert_eq!(detect_stuck(&s), None);
    }

    #[test]
    fn late_range_growth_is_not_stuck() {
        let mut traj = oscillate(0, 3, 40_000);
        let x = *traj.last().unwrap();
        traj.extend(through(&[x, 30]).into_iter().skip(1));
        assert_eq!(detect_stuck(&summary(&traj)), None);
    }

    #[test]
    fn abandoned_sites_are_not_stuck() {
        // Settles on [0, 5] but only visits [0, 2] in the last quarter.
        let mut traj = oscillate(0, 5, 30_000);
        let x = *traj.last().unwrap();
        traj.extend(through(&[x, 0]).into_iter().skip(1));
        traj.extend(oscillate(0, 2, 12_000).into_iter().skip(1));
        assert_eq!(detect_stuck(&summary(&traj)), None);
    }

    #[test]
    fn sqrt_signature_of_empty_run() {
        let s = summary(&[4]);
        assert!(sqrt_signature(&s).is_err());
    }

    #[test]
    fn sqrt_signature_values() {
        let traj = through(&[0, 4, 2, 10]);
        let s = summary(&traj);
        let q = sqrt_signature(&s).unwrap();
        assert_eq!(q.max_backtrack, 2);
        assert!((q.ratio - 10.0 / (2.0 * 14.0f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn log_signature_needs_range() {
        let s = summary(&oscillate(0, 3, 1000));
        assert!(matches!(log_signature(&s), Err(Error::Insufficient(_))));
    }

    #[test]
    fn log_signature_of_geometric_profile() {
        // Edge y + 1/2 crossed 3^y times for y = 0..6, ending at 6.
        let mut traj = vec![0i64];
        for y in 0..6i64 {
            for _ in 0..(3i64.pow(y as u32) - 1) / 2 {
                traj.push(y + 1);
                traj.push(y);
            }
            traj.push(y + 1);
        }
        let s = summary(&traj);
        let l = log_signature(&s).unwrap();
        assert!((l.growth_ratio - 3.0).abs() < 1e-12, "{l:?}");
        assert!((l.log_ratio - 6.0 * std::f64::consts::LN_2 / (s.steps() as f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn classify_synthetic() {
        let k = Kernel::new_symmetric(0.0, 1.0).unwrap();
        let t = PhaseThresholds::default();
        let line: Vec<i64> = (0..=100_000).collect();
        assert_eq!(classify_phase(&summary(&line), &k, &t).label, PhaseLabel::Ballistic);
        let osc = oscillate(0, 1, 100_000);
        assert_eq!(classify_phase(&summary(&osc), &k, &t).label, PhaseLabel::Stuck(2));
        let empty = summary(&[0, 1]);
        assert_eq!(classify_phase(&empty, &k, &t).label, PhaseLabel::Unclassified);
    }

    #[test]
    fn classification_is_pure() {
        let (k, p) = preset("tsrw").unwrap();
        let s = run(&RunConfig::new(k.clone(), 20_000, 9).with_profile(p)).unwrap();
        let t = PhaseThresholds::default();
        assert_eq!(classify_phase(&s, &k, &t), classify_phase(&s.clone(), &k, &t));
    }

    #[test]
    fn thresholds_parse_from_toml() {
        let t: PhaseThresholds = toml::from_str("ballistic_slope = 0.8\nsqrt_ratio = [0.95, 1.05]").unwrap();
        assert_eq!(t.ballistic_slope, 0.8);
        assert_eq!(t.sqrt_ratio, (0.95, 1.05));
        assert_eq!(t.diffusive, PhaseThresholds::default().diffusive);
    }

    fn walk() -> impl Strategy<Value = Vec<i64>> {
        (prop::collection::vec(any::<bool>(), 10_000..14_000), -5i64..5).prop_map(|(moves, x0)| {
            let mut out = vec![x0];
            for m in moves {
                let x = *out.last().unwrap();
                out.push(if m { x + 1 } else { x - 1 });
            }
            out
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn stuck_never_fires_on_late_growth(traj in walk()) {
            let s = summary(&traj);
            if let Some((interval, k)) = detect_stuck(&s) {
                let cps = &s.checkpoints;
                let mid = &cps[cps.len() / 2];
                let last = cps.last().unwrap();
                prop_assert_eq!(mid.range_max - mid.range_min, last.range_max - last.range_min);
                prop_assert!(k >= 1);
                let late = &traj[(s.steps() - s.steps() / 2) as usize..];
                prop_assert_eq!(*late.iter().min().unwrap(), interval.min);
                prop_assert_eq!(*late.iter().max().unwrap(), interval.max);
            }
        }

        #[test]
        fn exponent_is_bounded(traj in walk()) {
            let e = scaling_exponent(&summary(&traj)).unwrap();
            prop_assert!(e.stderr >= 0.0);
            prop_assert!(e.window.1 <= traj.len() as u64 - 1);
            prop_assert!(e.window.0 <= e.window.1);
        }
    }
}
