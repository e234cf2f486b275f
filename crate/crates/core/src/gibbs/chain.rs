use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use super::{eta_drift, log_total_rate, precision_with, quadratic_log_weight, GradientProfile, PrecisionSign};
use crate::engine::{drift, logistic, mix64, InitialProfile, LocalTimeProfile};
use crate::error::{Error, Result};
use crate::Kernel;

/// Largest box [`exact_stationarity_check`] enumerates by default.
pub const DEFAULT_MAX_STATES: usize = 4_000_000;

const OUTSIDE: u32 = u32::MAX;

#[derive(Clone, Debug, PartialEq)]
pub struct StationarityOptions {
    /// Sites `[-window, window]`.
    pub window: i64,
    /// States with `|eta(x)| <= height`.
    pub height: i64,
    /// Run on kernels that are not positive definite. The box weights are
    /// normalizable for any kernel; only the infinite-volume measure is not.
    pub allow_indefinite: bool,
    pub max_states: usize,
    /// Number of pseudo-random test functions for the Dirichlet form check,
    /// on top of the fixed ones.
    pub random_test_functions: usize,
}

impl StationarityOptions {
    pub fn new(window: i64, height: i64) -> Self {
        StationarityOptions {
            window,
            height,
            allow_indefinite: false,
            max_states: DEFAULT_MAX_STATES,
            random_test_functions: 8,
        }
    }
}

/// Outcome of the truncated-chain check. Probabilities are normalized over
/// the box.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StationarityReport {
    pub kernel: String,
    pub window: i64,
    pub height: i64,
    pub states: usize,
    /// States whose two preimages both lie in the box.
    pub interior_states: usize,
    pub positive_definite: Option<bool>,
    pub sign: PrecisionSign,
    /// Mass leaving the box in one step under the stationary weights.
    pub leakage: f64,
    pub max_row_leakage: f64,
    /// `||pi P - pi||_1` over interior states, `pi = pi0 * tau`.
    pub interior_residual: f64,
    /// Same with `pi = pi0 / tau`, for comparison.
    pub interior_residual_inverse_tau: f64,
    /// `||pi P - pi||_1` over the whole box.
    pub box_residual: f64,
    /// Continuous-time balance of `pi0` over interior states, relative to total outflow.
    pub continuous_residual: f64,
    /// Largest change-of-measure residual over states whose right shift fits the window.
    pub rn_max_residual: f64,
    pub rn_states: usize,
    /// The same residual with the opposite precision sign.
    pub rn_max_residual_plain_sign: f64,
    pub composition_exact: bool,
    pub parity_preserved: bool,
    pub drift_identity_exact: bool,
    /// `min_f [D(f) / max f^2] + leakage` over the test functions.
    pub dirichlet_margin: f64,
    pub dirichlet_functions: usize,
}

impl StationarityReport {
    /// Interior residual within `factor` times the leakage.
    pub fn residual_within(&self, factor: f64) -> bool {
        self.interior_residual <= factor * self.leakage
    }

    pub fn rn_within(&self, tol: f64) -> bool {
        self.rn_max_residual < tol
    }
}

impl fmt::Display for StationarityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pd = match self.positive_definite {
            Some(true) => "yes",
            Some(false) => "no",
            None => "n/a",
        };
        writeln!(f, "[stationarity]")?;
        writeln!(f, "kernel = {}", self.kernel)?;
        writeln!(f, "window = {}", self.window)?;
        writeln!(f, "height = {}", self.height)?;
        writeln!(f, "states = {}", self.states)?;
        writeln!(f, "interior_states = {}", self.interior_states)?;
        writeln!(f, "positive_definite = {pd}")?;
        writeln!(f, "sign_convention = {}", self.sign)?;
        writeln!(f, "discrete_weight = pi0*tau")?;
        writeln!(f, "leakage = {:e}", self.leakage)?;
        writeln!(f, "max_row_leakage = {:e}", self.max_row_leakage)?;
        writeln!(f, "interior_residual = {:e}", self.interior_residual)?;
        writeln!(f, "interior_residual_inverse_tau = {:e}", self.interior_residual_inverse_tau)?;
        writeln!(f, "box_residual = {:e}", self.box_residual)?;
        writeln!(f, "continuous_residual = {:e}", self.continuous_residual)?;
        writeln!(f, "rn_max_residual = {:e}", self.rn_max_residual)?;
        writeln!(f, "rn_states = {}", self.rn_states)?;
        writeln!(f, "rn_max_residual_plain_sign = {:e}", self.rn_max_residual_plain_sign)?;
        writeln!(f, "composition_exact = {}", self.composition_exact)?;
        writeln!(f, "parity_preserved = {}", self.parity_preserved)?;
        writeln!(f, "drift_identity_exact = {}", self.drift_identity_exact)?;
        writeln!(f, "dirichlet_margin = {:e}", self.dirichlet_margin)?;
        write!(f, "dirichlet_functions = {}", self.dirichlet_functions)
    }
}

/// Mixed-radix indexing of the parity box, lexicographic in `(x, eta(x))`.
struct BoxIndex {
    window: i64,
    height: i64,
    /// Smallest admissible value and number of values, per site.
    digits: Vec<(i64, u64)>,
    len: usize,
}

impl BoxIndex {
    fn new(window: i64, height: i64, max_states: usize) -> Result<Self> {
        if window < 1 || height < 1 {
            return Err(Error::Config(format!("box needs window >= 1 and height >= 1, got {window}, {height}")));
        }
        let digits: Vec<(i64, u64)> = (-window..=window)
            .map(|x| {
                let odd = x == 0;
                let top = if (height % 2 == 1) == odd { height } else { height - 1 };
                (-top, (top as u64) + 1)
            })
            .collect();
        let len = digits
            .iter()
            .try_fold(1u64, |acc, &(_, n)| acc.checked_mul(n))
            .filter(|&n| n <= max_states as u64 && n < OUTSIDE as u64)
            .ok_or_else(|| {
                Error::Resource(format!(
                    "box w={window} H={height} exceeds the limit of {max_states} states"
                ))
            })?;
        Ok(BoxIndex { window, height, digits, len: len as usize })
    }

    fn state(&self, mut index: usize) -> GradientProfile {
        let mut values = vec![0; self.digits.len()];
        for (slot, &(lo, n)) in values.iter_mut().zip(&self.digits).rev() {
            let d = (index as u64 % n) as i64;
            index = (index as u64 / n) as usize;
            *slot = lo + 2 * d;
        }
        GradientProfile::from_dense(self.window, values)
    }

    fn index(&self, eta: &GradientProfile) -> u32 {
        if eta.window() != self.window || eta.max_abs() > self.height {
            return OUTSIDE;
        }
        let mut index = 0u64;
        for (&v, &(lo, n)) in eta.values().iter().zip(&self.digits) {
            index = index * n + ((v - lo) / 2) as u64;
        }
        index as u32
    }

    fn locate(&self, eta: Result<GradientProfile>) -> u32 {
        eta.map(|e| self.index(&e)).unwrap_or(OUTSIDE)
    }
}

struct Row {
    log_pi0: f64,
    drift: f64,
    right: u32,
    left: u32,
    right_pre: u32,
    left_pre: u32,
    eta0: i64,
    rn: Option<(f64, f64)>,
    laws_ok: bool,
    parity_ok: bool,
    drift_ok: bool,
}

fn build_row(index: usize, boxed: &BoxIndex, kernel: &Kernel, alpha: &BTreeMap<i64, f64>, plain: &BTreeMap<i64, f64>) -> Row {
    let eta = boxed.state(index);
    let d = eta_drift(&eta, kernel);
    let log_pi0 = quadratic_log_weight(&eta, alpha);
    let right = eta.shift_right();
    let left = eta.shift_left();

    let rn = right.as_ref().ok().map(|r| {
        let residual = |a: &BTreeMap<i64, f64>| {
            let lhs = quadratic_log_weight(r, a) - quadratic_log_weight(&eta, a);
            (lhs - (d - eta_drift(r, kernel))).abs()
        };
        (residual(alpha), residual(plain))
    });

    // Composition laws and parity on a padded copy, so every state of the box is checked.
    let wide = eta.with_window(boxed.window + 2).expect("padding cannot clip");
    let (r, l) = (wide.shift_right().expect("padded"), wide.shift_left().expect("padded"));
    let mut lr = wide.clone();
    lr.bump(0, 2).expect("in window");
    lr.bump(1, -2).expect("in window");
    let mut rl = wide.clone();
    rl.bump(-1, 2).expect("in window");
    rl.bump(0, -2).expect("in window");
    let laws_ok = r.shift_left().ok() == Some(lr) && l.shift_right().ok() == Some(rl);
    let parity_ok = r.in_omega() && l.in_omega();

    let profile = LocalTimeProfile::new(InitialProfile::from_values(
        eta.cumulative().into_iter().map(|(e, v)| (e, v as f64)),
    ));
    let drift_ok = drift(&profile, 0, kernel) == d;

    Row {
        log_pi0,
        drift: d,
        right: boxed.locate(right),
        left: boxed.locate(left),
        right_pre: boxed.locate(eta.right_preimage()),
        left_pre: boxed.locate(eta.left_preimage()),
        eta0: eta.get(0),
        rn,
        laws_ok,
        parity_ok,
        drift_ok,
    }
}

/// Normalized `exp(log_w)`, summed in index order.
fn normalize(log_w: &[f64]) -> Vec<f64> {
    let top = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = log_w.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    w
}

/// `pi P` accumulated in row order.
fn push_forward(pi: &[f64], rows: &[Row]) -> Vec<f64> {
    let mut out = vec![0.0; pi.len()];
    for (i, row) in rows.iter().enumerate() {
        let p = logistic(row.drift);
        if row.right != OUTSIDE {
            out[row.right as usize] += pi[i] * p;
        }
        if row.left != OUTSIDE {
            out[row.left as usize] += pi[i] * (1.0 - p);
        }
    }
    out
}

/// Enumerates the parity box, assembles the jump chain and measures how far
/// the stationary weights are from balance, next to how much mass the
/// truncation loses.
pub fn exact_stationarity_check(kernel: &Kernel, options: &StationarityOptions) -> Result<StationarityReport> {
    let positive_definite = kernel.is_positive_definite();
    match positive_definite {
        Ok(true) => {}
        Ok(false) if !options.allow_indefinite => return Err(Error::NotPositiveDefinite),
        Err(e) if !options.allow_indefinite => return Err(e),
        _ => {}
    }
    let boxed = BoxIndex::new(options.window, options.height, options.max_states)?;
    let alpha = precision_with(kernel, PrecisionSign::Negated);
    let plain = precision_with(kernel, PrecisionSign::Plain);

    let rows: Vec<Row> = (0..boxed.len)
        .into_par_iter()
        .map(|i| build_row(i, &boxed, kernel, &alpha, &plain))
        .collect();

    let log_pi: Vec<f64> = rows.iter().map(|r| r.log_pi0 + log_total_rate(r.drift)).collect();
    let log_pi_inv: Vec<f64> = rows.iter().map(|r| r.log_pi0 - log_total_rate(r.drift)).collect();
    let log_pi0: Vec<f64> = rows.iter().map(|r| r.log_pi0).collect();
    let pi = normalize(&log_pi);
    let pi_inv = normalize(&log_pi_inv);
    let pi0 = normalize(&log_pi0);

    let interior: Vec<bool> = rows.iter().map(|r| r.right_pre != OUTSIDE && r.left_pre != OUTSIDE).collect();
    let residual = |weights: &[f64], only_interior: bool| {
        let pushed = push_forward(weights, &rows);
        pushed
            .iter()
            .zip(weights)
            .zip(&interior)
            .filter(|(_, &inside)| inside || !only_interior)
            .map(|((a, b), _)| (a - b).abs())
            .sum::<f64>()
    };

    let mut leakage = 0.0;
    let mut max_row_leakage: f64 = 0.0;
    for (row, &w) in rows.iter().zip(&pi) {
        let p = logistic(row.drift);
        let leak = if row.right == OUTSIDE { p } else { 0.0 } + if row.left == OUTSIDE { 1.0 - p } else { 0.0 };
        leakage += w * leak;
        max_row_leakage = max_row_leakage.max(leak);
    }

    let mut imbalance = 0.0;
    let mut outflow = 0.0;
    for (i, row) in rows.iter().enumerate() {
        let tau = row.drift.exp() + (-row.drift).exp();
        outflow += pi0[i] * tau;
        if interior[i] {
            let (r, l) = (&rows[row.right_pre as usize], &rows[row.left_pre as usize]);
            let inflow = pi0[row.right_pre as usize] * r.drift.exp() + pi0[row.left_pre as usize] * (-l.drift).exp();
            imbalance += (inflow - pi0[i] * tau).abs();
        }
    }

    let (mut rn_max, mut rn_plain, mut rn_states) = (0.0f64, 0.0f64, 0usize);
    for (a, b) in rows.iter().filter_map(|r| r.rn) {
        rn_max = rn_max.max(a);
        rn_plain = rn_plain.max(b);
        rn_states += 1;
    }

    let (dirichlet_margin, dirichlet_functions) = dirichlet_margin(&rows, &pi, leakage, options.random_test_functions);

    Ok(StationarityReport {
        kernel: kernel.literal(),
        window: options.window,
        height: options.height,
        states: boxed.len,
        interior_states: interior.iter().filter(|&&b| b).count(),
        positive_definite: positive_definite.ok(),
        sign: PrecisionSign::Negated,
        leakage,
        max_row_leakage,
        interior_residual: residual(&pi, true),
        interior_residual_inverse_tau: residual(&pi_inv, true),
        box_residual: residual(&pi, false),
        continuous_residual: imbalance / outflow,
        rn_max_residual: rn_max,
        rn_states,
        rn_max_residual_plain_sign: rn_plain,
        composition_exact: rows.iter().all(|r| r.laws_ok),
        parity_preserved: rows.iter().all(|r| r.parity_ok),
        drift_identity_exact: rows.iter().all(|r| r.drift_ok),
        dirichlet_margin,
        dirichlet_functions,
    })
}

/// `sum pi f (I - P) f` with `f = 0` off the box, for a fixed family of test
/// functions; returns the smallest `D(f) / max f^2 + leakage`.
fn dirichlet_margin(rows: &[Row], pi: &[f64], leakage: f64, random: usize) -> (f64, usize) {
    let n = rows.len();
    let mut family: Vec<Vec<f64>> = vec![
        vec![1.0; n],
        rows.iter().map(|r| r.eta0 as f64).collect(),
        rows.iter().map(|r| r.drift).collect(),
        rows.iter().map(|r| r.log_pi0).collect(),
    ];
    for j in 0..random as u64 {
        family.push(
            (0..n as u64)
                .map(|i| (mix64(mix64(j ^ 0x5eed) ^ i) >> 11) as f64 * 2f64.powi(-52) - 1.0)
                .collect(),
        );
    }
    let margin = family
        .iter()
        .map(|f| {
            let scale = f.iter().fold(0.0f64, |m, v| m.max(v * v));
            if scale == 0.0 {
                return f64::INFINITY;
            }
            let mut form = 0.0;
            for (i, row) in rows.iter().enumerate() {
                let p = logistic(row.drift);
                let at = |j: u32| if j == OUTSIDE { 0.0 } else { f[j as usize] };
                let pf = p * at(row.right) + (1.0 - p) * at(row.left);
                form += pi[i] * f[i] * (f[i] - pf);
            }
            form / scale + leakage
        })
        .fold(f64::INFINITY, f64::min);
    (margin, family.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tsrw() -> Kernel {
        Kernel::new_symmetric(0.0, 1.0).unwrap()
    }

    #[test]
    fn box_enumeration_round_trips() {
        let b = BoxIndex::new(2, 3, DEFAULT_MAX_STATES).unwrap();
        assert_eq!(b.len, 324);
        for i in 0..b.len {
            let eta = b.state(i);
            assert!(eta.in_omega());
            assert!(eta.max_abs() <= 3);
            assert_eq!(b.index(&eta), i as u32);
        }
        // Lexicographic: the last site varies fastest.
        assert_eq!(b.state(0).values(), &[-2, -2, -3, -2, -2]);
        assert_eq!(b.state(1).values(), &[-2, -2, -3, -2, 0]);
    }

    #[test]
    fn box_sizes() {
        assert_eq!(BoxIndex::new(4, 5, DEFAULT_MAX_STATES).unwrap().len, 5usize.pow(8) * 6);
        assert!(matches!(BoxIndex::new(6, 7, DEFAULT_MAX_STATES), Err(Error::Resource(_))));
        assert!(BoxIndex::new(0, 3, DEFAULT_MAX_STATES).is_err());
    }

    #[test]
    fn tsrw_small_box() {
        let report = exact_stationarity_check(&tsrw(), &StationarityOptions::new(2, 3)).unwrap();
        assert_eq!(report.states, 324);
        assert!(report.leakage > 0.0);
        assert!(report.residual_within(5.0), "{report}");
        assert!(report.rn_within(1e-9));
        assert!(report.rn_max_residual_plain_sign > 1e-3);
        assert!(report.composition_exact && report.parity_preserved && report.drift_identity_exact);
        assert!(report.continuous_residual < 1e-12);
        assert!(report.dirichlet_margin >= -1e-12);
        // The 1/tau weighting is not stationary.
        assert!(report.interior_residual_inverse_tau > 1e3 * report.interior_residual.max(1e-16));
    }

    #[test]
    fn indefinite_kernel_is_gated() {
        let k = Kernel::new_symmetric(-1.0, 2.0).unwrap();
        let mut opts = StationarityOptions::new(2, 3);
        assert!(matches!(exact_stationarity_check(&k, &opts), Err(Error::NotPositiveDefinite)));
        opts.allow_indefinite = true;
        let report = exact_stationarity_check(&k, &opts).unwrap();
        assert_eq!(report.positive_definite, Some(false));
        assert!(report.rn_within(1e-9));
    }

    #[test]
    fn residual_trend_in_height() {
        let k = tsrw();
        let small = exact_stationarity_check(&k, &StationarityOptions::new(2, 3)).unwrap();
        let large = exact_stationarity_check(&k, &StationarityOptions::new(2, 5)).unwrap();
        // Leakage is dominated by mass shifted off the window edge, not by the height cutoff.
        assert!((large.leakage - small.leakage).abs() < 1e-2);
        assert!(small.interior_residual < 1e-14 && large.interior_residual < 1e-14);
    }

    #[test]
    fn report_text_is_keyed() {
        let report = exact_stationarity_check(&tsrw(), &StationarityOptions::new(1, 1)).unwrap();
        let text = report.to_string();
        assert!(text.starts_with("[stationarity]\nkernel = 0,1\nwindow = 1\nheight = 1\n"));
        assert!(text.contains("sign_convention = alpha=-c"));
    }
}
