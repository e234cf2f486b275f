//! A walk driven by a fixed family of independent signs instead of fresh
//! uniforms, and checkers for the square-root scenario built on it.
//!
//! The family is indexed by `(x, 2j, k)`: site, doubled bias and visit rank.
//! At step `n` the walker at `x` with drift `D` reads `xi(x, -2D, k)` where
//! `k` counts earlier steps taken from `x` with the same drift. Each key is
//! read at most once, and `P(xi = +1) = F(D)`, so the walk has the same law
//! as the engine's.

use std::collections::BTreeMap;

use rustc_hash::FxHashMap as HashMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::engine::{derive_seed, logistic, mix64, preset, Direction, InitialProfile, LocalTimeProfile, Walk, WalkState};
use crate::error::{Error, Result};
use crate::Kernel;

/// Key of one sign: site, doubled bias `2j`, visit rank `k >= 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct XiKey {
    pub x: i64,
    pub twice_j: i64,
    pub k: u64,
}

/// Lazily evaluated family of independent signs with `P(+1) = F(-j)`.
///
/// Values are a pure function of `(seed, key)`; the memo records which keys
/// were read, in first-read order.
#[derive(Clone, Debug)]
pub struct XiFamily {
    seed: u64,
    /// Index over `order`, rebuilt lazily.
    memo: HashMap<XiKey, i8>,
    order: Vec<(XiKey, i8)>,
}

impl XiFamily {
    pub fn new(seed: u64) -> Self {
        XiFamily { seed, memo: HashMap::default(), order: Vec::new() }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Probability of `+1` for doubled bias `twice_j`.
    pub fn plus_probability(twice_j: i64) -> f64 {
        logistic(-(twice_j as f64) / 2.0)
    }

    /// Uniform in `[0, 1)` attached to a key.
    fn uniform(&self, key: XiKey) -> f64 {
        let mut h = mix64(self.seed ^ 0x243f_6a88_85a3_08d3);
        h = mix64(h ^ key.x as u64);
        h = mix64(h ^ key.twice_j as u64);
        h = mix64(h ^ key.k);
        (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Value of the sign without recording the read.
    pub fn peek(&self, key: XiKey) -> Result<i8> {
        if key.k < 1 {
            return Err(Error::Domain(format!("visit rank k must be >= 1, got {}", key.k)));
        }
        Ok(if self.uniform(key) < Self::plus_probability(key.twice_j) { 1 } else { -1 })
    }

    pub fn xi(&mut self, x: i64, twice_j: i64, k: u64) -> Result<i8> {
        let key = XiKey { x, twice_j, k };
        if self.memo.len() < self.order.len() {
            self.memo.extend(self.order.iter().copied());
        }
        if let Some(&v) = self.memo.get(&key) {
            return Ok(v);
        }
        let v = self.peek(key)?;
        self.memo.insert(key, v);
        self.order.push((key, v));
        Ok(v)
    }

    /// Reads a key the caller guarantees has not been read before.
    fn xi_fresh(&mut self, key: XiKey) -> Result<i8> {
        let v = self.peek(key)?;
        self.order.push((key, v));
        Ok(v)
    }

    /// Keys read so far, in first-read order.
    pub fn realized(&self) -> impl Iterator<Item = (XiKey, i8)> + '_ {
        self.order.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoupledConfig {
    pub kernel: Kernel,
    pub initial_profile: InitialProfile,
    pub steps: u64,
    pub seed: u64,
}

impl CoupledConfig {
    /// The second-difference walk from its preset start.
    pub fn second_derivative(steps: u64, seed: u64) -> Self {
        let (kernel, initial_profile) = preset("second_derivative").expect("built-in preset");
        CoupledConfig { kernel, initial_profile, steps, seed }
    }
}

#[derive(Clone, Debug)]
pub struct CoupledRun {
    pub trajectory: Vec<i64>,
    pub family: XiFamily,
    pub initial_profile: InitialProfile,
    /// Steps at which the walker stood at `x >= 2` with an odd doubled bias.
    pub parity_violations: Vec<u64>,
    pub final_profile: LocalTimeProfile,
}

impl CoupledRun {
    pub fn final_position(&self) -> i64 {
        *self.trajectory.last().expect("trajectory starts at X_0")
    }

    pub fn steps(&self) -> u64 {
        self.trajectory.len() as u64 - 1
    }
}

/// Runs the walk off the sign family seeded by `config.seed`.
pub fn run_coupled(config: &CoupledConfig) -> Result<CoupledRun> {
    let mut family = XiFamily::new(config.seed);
    let state = WalkState::new(0, config.initial_profile.clone(), config.seed);
    let mut walk = Walk::new(&config.kernel, state);
    // Visit counts per site, keyed by doubled bias; sites are dense around the walker.
    let mut visits: Vec<HashMap<i64, u64>> = Vec::new();
    let mut visits_origin = 0i64;
    let mut trajectory = Vec::with_capacity(config.steps as usize + 1);
    let mut parity_violations = Vec::new();
    trajectory.push(0);
    for n in 0..config.steps {
        let x = walk.position();
        let twice_d = 2.0 * walk.drift();
        if twice_d.fract() != 0.0 || !twice_d.is_finite() {
            return Err(Error::Domain(format!("drift {} at step {n} is not a half-integer", twice_d / 2.0)));
        }
        let twice_j = -(twice_d as i64);
        if x >= 2 && twice_j % 2 != 0 {
            parity_violations.push(n);
        }
        if visits.is_empty() || x < visits_origin {
            let grow = (visits_origin - x).max(16) as usize;
            visits.splice(0..0, std::iter::repeat_with(HashMap::default).take(grow));
            visits_origin -= grow as i64;
        }
        let slot = (x - visits_origin) as usize;
        if slot >= visits.len() {
            visits.resize_with(slot + 16, HashMap::default);
        }
        let k = visits[slot].entry(twice_j).or_insert(0);
        *k += 1;
        let dir = if family.xi_fresh(XiKey { x, twice_j, k: *k })? > 0 { Direction::Right } else { Direction::Left };
        walk.force(dir)?;
        trajectory.push(walk.position());
    }
    let final_profile = walk.into_state().profile;
    Ok(CoupledRun {
        trajectory,
        family,
        initial_profile: config.initial_profile.clone(),
        parity_violations,
        final_profile,
    })
}

/// `sigma_x` for `x = 1..=max(X)`: the first time the edge `{x-1, x}` has
/// been crossed more than `floor(x/8)` times while the walker is at `x - 1`.
/// Entry `i` holds `sigma_{i+1}`.
pub fn sigma_times(trajectory: &[i64]) -> Vec<Option<u64>> {
    let top = trajectory.iter().copied().max().unwrap_or(0).max(0);
    let bottom = trajectory.iter().copied().min().unwrap_or(0);
    let mut sigma = vec![None; top as usize];
    // crossings[e - bottom] counts edge {e, e + 1}.
    let mut crossings = vec![0u64; (top - bottom + 1) as usize];
    for (n, pair) in trajectory.windows(2).enumerate() {
        let edge = pair[0].min(pair[1]);
        crossings[(edge - bottom) as usize] += 1;
        let at = pair[1];
        let x = at + 1;
        if x >= 1 && x <= top {
            let slot = &mut sigma[(x - 1) as usize];
            if slot.is_none() && crossings[(at - bottom) as usize] > (x / 8) as u64 {
                *slot = Some(n as u64 + 1);
            }
        }
    }
    sigma
}

/// One row of the scenario report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioRecord {
    pub x: i64,
    pub sigma: Option<u64>,
    /// The four conditions; `None` when not evaluated.
    pub conditions: [Option<bool>; 4],
    /// `sum_{j <= 0} 1{xi_j = -1} - sum_{j > 0} 1{xi_j = +1}` over realized keys with `k = 1`.
    pub increment: i64,
    /// The alternative count `sum_{j >= 0} 1{xi_j = +1} - sum_{j < 0} 1{xi_j = -1}`
    /// over the same keys, kept for comparison.
    pub displayed_increment: i64,
    /// `L_{sigma(x+1)}(x - 1/2) - L_{sigma(x)}(x - 3/2) - 2 * increment`.
    pub recursion_residual: Option<f64>,
}

impl ScenarioRecord {
    pub fn condition_holds(&self) -> bool {
        self.conditions.iter().all(|c| *c == Some(true))
    }

    pub fn recursion_ok(&self) -> Option<bool> {
        self.recursion_residual.map(|r| r == 0.0)
    }

    /// Recursion residual with `displayed_increment` in place of `increment`.
    pub fn displayed_residual(&self) -> Option<f64> {
        self.recursion_residual.map(|r| r + 2.0 * (self.increment - self.displayed_increment) as f64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioFailure {
    pub x: i64,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub records: Vec<ScenarioRecord>,
    pub first_x: i64,
    /// Largest `x` with `sigma_x` defined.
    pub x_max: i64,
    pub max_backtrack: u64,
    pub good: bool,
    /// Largest `x` such that every check on `[first_x, x]` passes.
    pub good_through: i64,
    pub first_failure: Option<ScenarioFailure>,
    pub parity_violations: usize,
    pub final_ratio: f64,
}

impl ScenarioReport {
    pub fn record(&self, x: i64) -> Option<&ScenarioRecord> {
        self.records.iter().find(|r| r.x == x)
    }

    /// `sigma_x / x^2`.
    pub fn sigma_ratio(&self, x: i64) -> Option<f64> {
        let s = self.record(x)?.sigma?;
        Some(s as f64 / (x * x) as f64)
    }

    /// Largest recursion residual in absolute value over `x >= from`.
    pub fn max_recursion_residual(&self, from: i64) -> f64 {
        self.records
            .iter()
            .filter(|r| r.x >= from)
            .filter_map(|r| r.recursion_residual)
            .fold(0.0, |m, r| m.max(r.abs()))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,sigma_x,e1,e2,e3,e4,M_x,recursion_ok\n");
        let opt = |c: Option<bool>| c.map_or(String::new(), |b| b.to_string());
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.x,
                r.sigma.map_or(String::new(), |s| s.to_string()),
                opt(r.conditions[0]),
                opt(r.conditions[1]),
                opt(r.conditions[2]),
                opt(r.conditions[3]),
                r.increment,
                opt(r.recursion_ok()),
            );
        }
        let failure = self
            .first_failure
            .as_ref()
            .map_or("none".to_string(), |f| format!("x={} {}", f.x, f.reason));
        let _ = writeln!(out, "# good={} first_failure={failure}", self.good);
        out
    }
}

/// First `x` at which the conditions are checked by default.
pub const DEFAULT_FIRST_X: i64 = 3;

/// Per-site `(increment, displayed_increment)` over realized `k = 1`, integer-`j` keys.
fn increments(family: &XiFamily) -> BTreeMap<i64, (i64, i64)> {
    let mut out = BTreeMap::new();
    for (key, v) in family.realized() {
        if key.k != 1 || key.twice_j % 2 != 0 {
            continue;
        }
        let j = key.twice_j / 2;
        let entry = out.entry(key.x).or_insert((0, 0));
        entry.0 += increment_term(j, v);
        entry.1 += match (j >= 0, v) {
            (true, 1) => 1,
            (false, -1) => -1,
            _ => 0,
        };
    }
    out
}

/// Contribution of `xi_j = v` to the increment.
fn increment_term(j: i64, v: i8) -> i64 {
    match (j <= 0, v) {
        (true, -1) => 1,
        (false, 1) => -1,
        _ => 0,
    }
}

/// Checks the square-root scenario on a finished coupled run.
pub fn check_scenario(run: &CoupledRun, first_x: i64) -> Result<ScenarioReport> {
    let traj = &run.trajectory;
    if traj.len() < 2 {
        return Err(Error::Insufficient("scenario check needs a recorded step history".into()));
    }
    let sigma = sigma_times(traj);
    let sig = |x: i64| if x >= 1 { sigma.get((x - 1) as usize).copied().flatten() } else { None };
    let x_max = (1..=sigma.len() as i64).rev().find(|&x| sig(x).is_some()).unwrap_or(0);

    // Replay to read local times at each sigma and first hitting times.
    let mut first_hit: HashMap<i64, u64> = HashMap::default();
    let mut at_sigma: HashMap<i64, (f64, f64)> = HashMap::default();
    let mut due: BTreeMap<u64, Vec<i64>> = BTreeMap::new();
    for x in 1..=x_max {
        if let Some(s) = sig(x) {
            due.entry(s).or_default().push(x);
        }
    }
    let mut profile = LocalTimeProfile::new(run.initial_profile.clone());
    let mut running_max = traj[0];
    let mut max_backtrack = 0u64;
    let mut backtrack_failure = None;
    first_hit.insert(traj[0], 0);
    for (n, pair) in traj.windows(2).enumerate() {
        let n = n as u64 + 1;
        let to = pair[1];
        profile.record_crossing(pair[0].min(to));
        first_hit.entry(to).or_insert(n);
        running_max = running_max.max(to);
        let back = (running_max - to) as u64;
        if back > max_backtrack {
            max_backtrack = back;
            if back > 2 && backtrack_failure.is_none() {
                backtrack_failure = Some((n, running_max));
            }
        }
        if let Some(xs) = due.get(&n) {
            for &x in xs {
                // Walker at x - 1: edges x - 3/2 and x - 5/2 have left endpoints x - 2 and x - 3.
                at_sigma.insert(x, (profile.value(x - 2), profile.value(x - 3)));
            }
        }
    }

    let incs = increments(&run.family);
    let mut records = Vec::new();
    let mut first_failure: Option<ScenarioFailure> = None;
    let fail = |x: i64, reason: String, slot: &mut Option<ScenarioFailure>| {
        if slot.is_none() {
            *slot = Some(ScenarioFailure { x, reason });
        }
    };

    for x in 1..=x_max {
        let s = sig(x);
        let mut conditions = [None; 4];
        if x >= first_x {
            conditions = evaluate_conditions(traj, x, s, sig(x - 1), &first_hit, at_sigma.get(&x).copied());
            for (i, c) in conditions.iter().enumerate() {
                if *c != Some(true) {
                    fail(x, format!("condition {} failed", i + 1), &mut first_failure);
                }
            }
        }
        let (increment, displayed_increment) = incs.get(&x).copied().unwrap_or((0, 0));
        let recursion_residual = match (at_sigma.get(&x), at_sigma.get(&(x + 1))) {
            (Some(&(here, _)), Some(&(next, _))) => Some(next - here - 2.0 * increment as f64),
            _ => None,
        };
        if x >= first_x && recursion_residual.is_some_and(|r| r != 0.0) {
            fail(x + 1, format!("recursion residual nonzero between {x} and {}", x + 1), &mut first_failure);
        }
        records.push(ScenarioRecord { x, sigma: s, conditions, increment, displayed_increment, recursion_residual });
    }
    if let Some((n, top)) = backtrack_failure {
        let failure = ScenarioFailure { x: top, reason: format!("walker more than 2 below its maximum at step {n}") };
        // Report whichever failure comes first in x.
        if first_failure.as_ref().is_none_or(|f| f.x > failure.x) {
            first_failure = Some(failure);
        }
    }

    let steps = traj.len() as f64 - 1.0;
    Ok(ScenarioReport {
        good: first_failure.is_none(),
        good_through: first_failure.as_ref().map_or(x_max, |f| (f.x - 1).min(x_max)),
        records,
        first_x,
        x_max,
        max_backtrack,
        first_failure,
        parity_violations: run.parity_violations.len(),
        final_ratio: run.final_position() as f64 / (2.0 * steps).sqrt(),
    })
}

fn evaluate_conditions(
    traj: &[i64],
    x: i64,
    sigma: Option<u64>,
    prev: Option<u64>,
    first_hit: &HashMap<i64, u64>,
    local: Option<(f64, f64)>,
) -> [Option<bool>; 4] {
    let Some(s) = sigma else {
        return [Some(false); 4];
    };
    let e1 = first_hit.get(&(x + 1)).is_none_or(|&h| h > s);
    let e2 = match prev {
        Some(p) if p <= s => traj[p as usize..=s as usize].iter().all(|&y| (x - 2..=x).contains(&y)),
        _ => false,
    };
    let last = (x / 10) as u64;
    let e3 = last <= s
        && (s - last + 1..=s).all(|m| traj[m as usize].min(traj[m as usize - 1]) == x - 1);
    let e4 = local.is_some_and(|(a, b)| {
        let root = (x as f64).sqrt().floor();
        let x = x as f64;
        (a - b).abs() <= root && 6.0 * a > x && 6.0 * b > x && a < 50.0 * x && b < 50.0 * x
    });
    [Some(e1), Some(e2), Some(e3), Some(e4)]
}

/// Per-seed digest of a coupled run and its scenario check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub final_position: i64,
    /// `X_n / sqrt(2n)`.
    pub ratio: f64,
    pub max_backtrack: u64,
    pub good: bool,
    pub good_through: i64,
    pub x_max: i64,
    /// Sites `x` whose pair `(x, x+1)` has a nonzero recursion residual.
    pub recursion_failure_sites: Vec<i64>,
    pub parity_violations: usize,
    pub sigma_ratio_200: Option<f64>,
    pub abc: Option<AbcReport>,
}

impl SeedOutcome {
    pub fn stays_near_maximum(&self) -> bool {
        self.max_backtrack <= 2
    }

    /// Recursion failures at sites `x >= from`.
    pub fn recursion_failures_from(&self, from: i64) -> usize {
        self.recursion_failure_sites.iter().filter(|&&x| x >= from).count()
    }
}

/// What [`survey`] checks beyond the scenario.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurveyOptions {
    pub first_x: i64,
    /// `(x_max, samples_per_x)` for [`check_abc`] on each run's family.
    pub abc: Option<(i64, usize)>,
}

impl Default for SurveyOptions {
    fn default() -> Self {
        SurveyOptions { first_x: DEFAULT_FIRST_X, abc: None }
    }
}

/// Runs `seeds` coupled walks with seeds `derive_seed(master, i)` in
/// parallel and checks each one. Results are in seed order.
pub fn survey(base: &CoupledConfig, seeds: u64, master: u64, options: SurveyOptions) -> Result<Vec<SeedOutcome>> {
    use rayon::prelude::*;
    (0..seeds)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(master, i);
            let run = run_coupled(&CoupledConfig { seed, ..base.clone() })?;
            let rep = check_scenario(&run, options.first_x)?;
            let abc = options.abc.map(|(x_max, samples)| check_abc(&run.family, x_max, samples)).transpose()?;
            let bad: Vec<i64> = rep
                .records
                .iter()
                .filter(|r| r.recursion_residual.is_some_and(|v| v != 0.0))
                .map(|r| r.x)
                .collect();
            Ok(SeedOutcome {
                seed,
                final_position: run.final_position(),
                ratio: rep.final_ratio,
                max_backtrack: rep.max_backtrack,
                good: rep.good,
                good_through: rep.good_through,
                x_max: rep.x_max,
                recursion_failure_sites: bad,
                parity_violations: rep.parity_violations,
                sigma_ratio_200: rep.sigma_ratio(200),
                abc,
            })
        })
        .collect()
}

/// Largest `|j|` examined for the integer-`j` events; beyond it a sign
/// against its bias has probability below `e^-80`.
pub const J_CUTOFF: i64 = 40;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AbcReport {
    pub x_max: i64,
    pub a: bool,
    /// Site of the first sign breaking event A, if any.
    pub a_failure: Option<XiKey>,
    pub a_realized_keys: usize,
    pub a_sampled_keys: usize,
    pub b: bool,
    pub b_failure: Option<i64>,
    pub c: bool,
    pub c_failure: Option<i64>,
    /// Increments `M^x` for `x = 0..=x_max`, over `|j| <= J_CUTOFF`, `k = 1`.
    pub increments: Vec<i64>,
}

impl AbcReport {
    pub fn all(&self) -> bool {
        self.a && self.b && self.c
    }
}

/// Full increment of site `x` over integer `|j| <= J_CUTOFF`.
pub fn increment(family: &XiFamily, x: i64) -> i64 {
    (-J_CUTOFF..=J_CUTOFF)
        .map(|j| increment_term(j, family.peek(XiKey { x, twice_j: 2 * j, k: 1 }).expect("k = 1")))
        .sum()
}

/// Audits the three events on `x in [0, x_max]`.
///
/// Event A (`xi_{j,k} = -1` and `xi_{-j,k} = +1` for all `j > sqrt(x)/100`,
/// `k <= 100 x^2`) is checked on every realized key in that range plus
/// `samples_per_x` keys drawn per site with `|j| <= J_CUTOFF`. Events B and C
/// use the integer-`j`, `k = 1` signs up to `J_CUTOFF`.
pub fn check_abc(family: &XiFamily, x_max: i64, samples_per_x: usize) -> Result<AbcReport> {
    if !(0..=500).contains(&x_max) {
        return Err(Error::Config(format!("x_max {x_max} outside [0, 500]")));
    }
    let violates_a = |key: XiKey, v: i8| -> bool {
        let x = key.x;
        let j = key.twice_j as f64 / 2.0;
        let threshold = (x.unsigned_abs() as f64).sqrt() / 100.0;
        let in_scope = (0..=x_max).contains(&x) && key.k <= 100 * (x * x) as u64 && j.abs() > threshold;
        in_scope && v != if j > 0.0 { -1 } else { 1 }
    };

    let mut a_failure = None;
    let mut a_realized = 0;
    for (key, v) in family.realized() {
        if (0..=x_max).contains(&key.x) {
            a_realized += 1;
            if a_failure.is_none() && violates_a(key, v) {
                a_failure = Some(key);
            }
        }
    }
    let mut a_sampled = 0;
    for x in 1..=x_max {
        let k_top = 100 * (x * x) as u64;
        for i in 0..samples_per_x as u64 {
            let h = mix64(derive_seed(family.seed() ^ 0xa0d1_7ed5, (x as u64) << 32 | i));
            let twice_j = (h % (4 * J_CUTOFF as u64 + 1)) as i64 - 2 * J_CUTOFF;
            let k = 1 + (h >> 32) % k_top;
            let key = XiKey { x, twice_j, k };
            a_sampled += 1;
            if a_failure.is_none() && violates_a(key, family.peek(key)?) {
                a_failure = Some(key);
            }
        }
    }

    let mut b_failure = None;
    for x in 0..=x_max {
        let exceptions = (1..=J_CUTOFF)
            .filter(|&j| {
                family.peek(XiKey { x, twice_j: 2 * j, k: 1 }).expect("k = 1") == 1
                    || family.peek(XiKey { x, twice_j: -2 * j, k: 1 }).expect("k = 1") == -1
            })
            .count() as f64;
        if exceptions > (x as f64).sqrt() / 100.0 {
            b_failure = Some(x);
            break;
        }
    }

    let increments: Vec<i64> = (0..=x_max).map(|x| increment(family, x)).collect();
    let mut c_failure = None;
    let mut partial = increments.first().copied().unwrap_or(0);
    for y in 1..=x_max {
        partial += increments[y as usize];
        let y_f = y as f64;
        if !(partial as f64 >= y_f / 4.0 && partial as f64 <= 4.0 * y_f) {
            c_failure = Some(y);
            break;
        }
    }

    Ok(AbcReport {
        x_max,
        a: a_failure.is_none(),
        a_failure,
        a_realized_keys: a_realized,
        a_sampled_keys: a_sampled,
        b: b_failure.is_none(),
        b_failure,
        c: c_failure.is_none(),
        c_failure,
        increments,
    })
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic two-sample KS critical value at level `alpha` in {0.10, 0.05, 0.01, 0.001}.
pub fn ks_critical(alpha: f64, n: usize, m: usize) -> Result<f64> {
    let c = match alpha {
        a if a == 0.10 => 1.224,
        a if a == 0.05 => 1.358,
        a if a == 0.01 => 1.628,
        a if a == 0.001 => 1.949,
        _ => return Err(Error::Config(format!("no tabulated KS constant for alpha = {alpha}"))),
    };
    let (n, m) = (n as f64, m as f64);
    Ok(c * ((n + m) / (n * m)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run, RunConfig};

    #[test]
    fn xi_law_and_memo() {
        assert_eq!(XiFamily::plus_probability(0), 0.5);
        let p1 = XiFamily::plus_probability(2);
        assert!((p1 - (-1f64).exp() / (1f64.exp() + (-1f64).exp())).abs() < 1e-15);
        assert!((p1 - 0.119_202_9).abs() < 1e-7);
        let mut fam = XiFamily::new(9);
        let v = fam.xi(3, 4, 2).unwrap();
        assert_eq!(fam.xi(3, 4, 2).unwrap(), v);
        assert_eq!(fam.len(), 1);
        assert!(matches!(fam.xi(3, 4, 0), Err(Error::Domain(_))));
        let mut again = XiFamily::new(9);
        assert_eq!(again.xi(3, 4, 2).unwrap(), v);
    }

    #[test]
    fn xi_at_zero_bias_is_fair() {
        let fam = XiFamily::new(1234);
        let n = 100_000;
        let mean = (1..=n).map(|k| fam.peek(XiKey { x: (k % 97) as i64, twice_j: 0, k }).unwrap() as f64).sum::<f64>()
            / n as f64;
        assert!(mean.abs() < 0.02, "{mean}");
    }

    #[test]
    fn empty_run() {
        let r = run_coupled(&CoupledConfig::second_derivative(0, 1)).unwrap();
        assert_eq!(r.trajectory, vec![0]);
        assert!(check_scenario(&r, DEFAULT_FIRST_X).is_err());
    }

    #[test]
    fn keys_are_read_once() {
        let r = run_coupled(&CoupledConfig::second_derivative(20_000, 5)).unwrap();
        assert_eq!(r.family.len() as u64, r.steps());
    }

    #[test]
    fn coupled_walk_is_the_engine_walk_with_hashed_uniforms() {
        // Same kernel, same start: replaying the engine with the family's uniforms reproduces the path.
        let cfg = CoupledConfig::second_derivative(5_000, 77);
        let r = run_coupled(&cfg).unwrap();
        let mut walk = Walk::new(&cfg.kernel, WalkState::new(0, cfg.initial_profile.clone(), 0));
        for (key, _) in r.family.realized() {
            walk.step_with(r.family.uniform(key)).unwrap();
        }
        assert_eq!(walk.position(), r.final_position());
    }

    #[test]
    fn sigma_on_hand_built_path() {
        // Crosses {0,1} twice and then sits at 0 and -1.
        let traj = [0, 1, 0, -1, 0, -1, 0, -1, 0, -1, 0, -1, 0];
        let s = sigma_times(&traj);
        assert_eq!(s, vec![Some(2)]);
        // Brute force.
        let brute = (0..traj.len()).find(|&n| {
            let crossings = traj[..=n].windows(2).filter(|w| w[0].min(w[1]) == 0).count();
            crossings > 0 && traj[n] == 0
        });
        assert_eq!(brute, Some(2));
    }

    #[test]
    fn sigma_undefined_without_enough_crossings() {
        // Edge {8,9} needs more than 1 crossing with the walker at 8.
        let mut traj: Vec<i64> = (0..=9).collect();
        traj.push(10);
        let s = sigma_times(&traj);
        assert_eq!(s.len(), 10);
        assert_eq!(s[8], None);
        assert_eq!(s[0], None);
    }

    #[test]
    fn visiting_ahead_breaks_condition_one() {
        // Reach 4 before ever returning to 2 after crossing {2,3}.
        let mut traj: Vec<i64> = vec![0, 1, 0, 1, 2, 1, 2, 3, 4, 3, 2];
        traj.extend([3, 2, 3, 2]);
        let run = CoupledRun {
            trajectory: traj,
            family: XiFamily::new(0),
            initial_profile: InitialProfile::zero(),
            parity_violations: vec![],
            final_profile: LocalTimeProfile::new(InitialProfile::zero()),
        };
        let rep = check_scenario(&run, 3).unwrap();
        let r3 = rep.record(3).unwrap();
        assert_eq!(r3.conditions[0], Some(false));
        assert!(!rep.good);
        assert_eq!(rep.first_failure.as_ref().unwrap().x, 3);
    }

    #[test]
    fn csv_layout() {
        let r = run_coupled(&CoupledConfig::second_derivative(3_000, 2)).unwrap();
        let rep = check_scenario(&r, DEFAULT_FIRST_X).unwrap();
        let csv = rep.to_csv();
        assert!(csv.starts_with("x,sigma_x,e1,e2,e3,e4,M_x,recursion_ok\n1,"));
        assert!(csv.lines().last().unwrap().starts_with("# good="));
    }

    #[test]
    fn increment_has_mean_one_half() {
        let n = 10_000;
        let mean = (0..n).map(|s| increment(&XiFamily::new(derive_seed(31, s)), 25) as f64).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.02, "{mean}");
    }

    #[test]
    fn c_fails_on_bad_partial_sums() {
        // Find a family whose first increments break the lower bound.
        let fam = (0..200).map(XiFamily::new).find(|f| increment(f, 0) + increment(f, 1) < 0).unwrap();
        let rep = check_abc(&fam, 5, 10).unwrap();
        assert!(!rep.c);
        assert_eq!(rep.c_failure, Some(1));
        assert!(!rep.all());
    }

    #[test]
    fn abc_bounds() {
        assert!(check_abc(&XiFamily::new(0), 501, 1).is_err());
        let rep = check_abc(&XiFamily::new(0), 3, 100).unwrap();
        assert_eq!(rep.a_sampled_keys, 300);
        assert_eq!(rep.increments.len(), 4);
    }

    #[test]
    fn ks_helpers() {
        assert_eq!(ks_statistic(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), 0.0);
        assert_eq!(ks_statistic(&[0.0, 0.0], &[1.0, 1.0]), 1.0);
        assert!((ks_statistic(&[1.0, 2.0, 3.0, 4.0], &[3.0, 4.0, 5.0, 6.0]) - 0.5).abs() < 1e-15);
        assert!((ks_critical(0.01, 2000, 2000).unwrap() - 0.051_482).abs() < 1e-5);
        assert!(ks_critical(0.02, 10, 10).is_err());
    }

    #[test]
    fn engine_and_coupled_agree_in_mean() {
        let seeds = 300;
        let mean = |xs: Vec<f64>| xs.iter().sum::<f64>() / xs.len() as f64;
        let coupled = mean(
            (0..seeds)
                .map(|s| run_coupled(&CoupledConfig::second_derivative(2_000, derive_seed(1, s))).unwrap().final_position() as f64)
                .collect(),
        );
        let (k, p) = preset("second_derivative").unwrap();
        let direct = mean(
            (0..seeds)
                .map(|s| run(&RunConfig::new(k.clone(), 2_000, derive_seed(2, s)).with_profile(p.clone())).unwrap().final_position() as f64)
                .collect(),
        );
        assert!((coupled - direct).abs() < 0.15 * direct.abs().max(1.0), "{coupled} vs {direct}");
    }

    #[test]
    fn sigma_increases_through_the_good_stretch() {
        let base = CoupledConfig::second_derivative(100_000, 0);
        let opts = SurveyOptions { first_x: 50, abc: Some((5, 10)) };
        let outcomes = survey(&base, 6, 11, opts).unwrap();
        let again = survey(&base, 6, 11, opts).unwrap();
        assert_eq!(outcomes, again);
        assert!(outcomes.iter().any(|o| o.good_through >= 60));
        for o in outcomes.iter().filter(|o| o.good_through >= 60) {
            let run = run_coupled(&CoupledConfig { seed: o.seed, ..base.clone() }).unwrap();
            let sigma = sigma_times(&run.trajectory);
            let stretch: Vec<u64> = sigma[49..o.good_through as usize].iter().map(|s| s.unwrap()).collect();
            assert!(stretch.windows(2).all(|w| w[0] < w[1]));
            let rep = check_scenario(&run, 50).unwrap();
            assert!(rep.max_backtrack <= 2 || rep.first_failure.is_some());
        }
    }

    proptest::proptest! {
        #[test]
        fn family_is_a_function_of_seed_and_key(seed: u64, x in -1000i64..1000, twice_j in -200i64..200, k in 1u64..10_000) {
            let mut a = XiFamily::new(seed);
            let b = XiFamily::new(seed);
            let key = XiKey { x, twice_j, k };
            let v = a.xi(x, twice_j, k).unwrap();
            proptest::prop_assert_eq!(v, b.peek(key).unwrap());
            proptest::prop_assert!(v == 1 || v == -1);
            proptest::prop_assert_eq!(a.realized().collect::<Vec<_>>(), vec![(key, v)]);
        }
    }
}
