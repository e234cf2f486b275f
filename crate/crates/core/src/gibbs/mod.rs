//! The environment seen from the walker, as a Markov chain on gradient
//! profiles `eta(x) = L(x + 1/2) - L(x - 1/2)`.
//!
//! Shift conventions follow directly from the definition of `eta`. A jump to
//! the right crosses the edge `1/2`, which raises `eta(0)` and lowers
//! `eta(1)` by one; recentring on the new position then gives
//!
//! ```text
//! R eta(x) = eta(x + 1) + delta_{-1}(x) - delta_0(x)
//! L eta(x) = eta(x - 1) + delta_0(x)    - delta_1(x)
//! ```
//!
//! so that `L R eta = eta + 2 delta_0 - 2 delta_1` and
//! `R L eta = eta + 2 delta_{-1} - 2 delta_0`.
//!
//! The Gibbs weight uses the precision sequence `alpha = -c`, where `c` are the
//! gradient coefficients of the drift (`D = sum_x c(x) eta(x)`). With this
//! sign the change of measure under `R` is exactly
//! `log pi0(R eta) - log pi0(eta) = D(eta) - D(R eta)`. The opposite sign is
//! available as [`PrecisionSign::Plain`] for comparison only.
//!
//! With right and left jump rates `exp(D)` and `exp(-D)`, `pi0` is invariant
//! for the continuous-time chain, whose total jump rate is
//! `tau = exp(D) + exp(-D)`. The jump chain is therefore stationary under
//! `pi0 * tau`.

mod chain;
mod moments;

pub use chain::{exact_stationarity_check, StationarityOptions, StationarityReport, DEFAULT_MAX_STATES};
pub use moments::{gradient_chain_moments, EdgeMoments, MomentConfig, MomentTable};

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::kernel::InteractionKernel;
use crate::scalar::Scalar;

/// Integer gradient profile on the window `[-w, w]`, zero outside.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct GradientProfile {
    window: i64,
    values: Vec<i64>,
}

impl GradientProfile {
    pub fn zero(window: i64) -> Self {
        assert!(window >= 0, "negative window");
        GradientProfile { window, values: vec![0; (2 * window + 1) as usize] }
    }

    /// Profile with the given site values; every site must lie in the window.
    pub fn from_values<I: IntoIterator<Item = (i64, i64)>>(window: i64, values: I) -> Result<Self> {
        let mut eta = GradientProfile::zero(window);
        for (x, v) in values {
            if x.abs() > window {
                return Err(Error::WindowOverflow { window });
            }
            eta.values[(x + window) as usize] = v;
        }
        Ok(eta)
    }

    pub(crate) fn from_dense(window: i64, values: Vec<i64>) -> Self {
        debug_assert_eq!(values.len() as i64, 2 * window + 1);
        GradientProfile { window, values }
    }

    /// The minimal state of the parity class: `eta(0) = 1`, zero elsewhere.
    pub fn minimal(window: i64) -> Self {
        let mut eta = GradientProfile::zero(window);
        eta.values[window as usize] = 1;
        eta
    }

    pub fn window(&self) -> i64 {
        self.window
    }

    pub fn get(&self, x: i64) -> i64 {
        if x.abs() > self.window {
            0
        } else {
            self.values[(x + self.window) as usize]
        }
    }

    pub fn values(&self) -> &[i64] {
        &self.values
    }

    /// `(x, eta(x))` for every site of the window.
    pub fn sites(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        self.values.iter().enumerate().map(move |(i, &v)| (i as i64 - self.window, v))
    }

    /// `eta(x) + 1{x = 0}` is even everywhere.
    pub fn in_omega(&self) -> bool {
        self.sites().all(|(x, v)| (v + i64::from(x == 0)) % 2 == 0)
    }

    pub fn max_abs(&self) -> i64 {
        self.values.iter().map(|v| v.abs()).max().unwrap_or(0)
    }

    pub fn sum(&self) -> i64 {
        self.values.iter().sum()
    }

    /// Same profile on another window; errors if a nonzero site would be cut.
    pub fn with_window(&self, window: i64) -> Result<Self> {
        let nonzero = self.sites().filter(|&(_, v)| v != 0);
        GradientProfile::from_values(window, nonzero)
    }

    /// `x -> -eta(-x)`, the gradient of the mirrored local-time profile.
    pub fn mirrored(&self) -> Self {
        let mut values = self.values.clone();
        values.reverse();
        values.iter_mut().for_each(|v| *v = -*v);
        GradientProfile { window: self.window, values }
    }

    /// Adds `delta` at site `x`, which must be in the window.
    pub fn bump(&mut self, x: i64, delta: i64) -> Result<()> {
        if x.abs() > self.window {
            return Err(Error::WindowOverflow { window: self.window });
        }
        self.values[(x + self.window) as usize] += delta;
        Ok(())
    }

    fn shifted(&self, by: i64) -> Result<Self> {
        let w = self.window;
        // The site that leaves the window must be empty.
        let leaving = if by > 0 { -w } else { w };
        if self.get(leaving) != 0 {
            return Err(Error::WindowOverflow { window: w });
        }
        let values = (-w..=w).map(|x| self.get(x + by)).collect();
        Ok(GradientProfile { window: w, values })
    }

    /// Environment after a jump to the right.
    pub fn shift_right(&self) -> Result<Self> {
        let mut out = self.shifted(1)?;
        out.bump(-1, 1)?;
        out.bump(0, -1)?;
        Ok(out)
    }

    /// Environment after a jump to the left.
    pub fn shift_left(&self) -> Result<Self> {
        let mut out = self.shifted(-1)?;
        out.bump(0, 1)?;
        out.bump(1, -1)?;
        Ok(out)
    }

    /// The state `R` maps onto `self`.
    pub fn right_preimage(&self) -> Result<Self> {
        let mut out = self.shifted(-1)?;
        out.bump(0, -1)?;
        out.bump(1, 1)?;
        Ok(out)
    }

    /// The state `L` maps onto `self`.
    pub fn left_preimage(&self) -> Result<Self> {
        let mut out = self.shifted(1)?;
        out.bump(-1, -1)?;
        out.bump(0, 1)?;
        Ok(out)
    }

    /// Local-time values on the edges `x + 1/2` for `x` in the window,
    /// taking `L = 0` to the left of the window.
    pub fn cumulative(&self) -> Vec<(i64, i64)> {
        let mut acc = 0;
        self.sites()
            .map(|(x, v)| {
                acc += v;
                (x, acc)
            })
            .collect()
    }
}

impl fmt::Debug for GradientProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "eta[{}..={}]{:?}", -self.window, self.window, self.values)
    }
}

fn lift<T: Scalar>(v: i64) -> T {
    T::from_i64(v).expect("integer representable in scalar type")
}

/// `sum_x c(x) eta(x)`, the drift felt by the walker in environment `eta`.
pub fn eta_drift<T: Scalar>(eta: &GradientProfile, kernel: &InteractionKernel<T>) -> T {
    kernel
        .eta_coeffs()
        .into_iter()
        .fold(T::zero(), |acc, (x, c)| acc + c * lift::<T>(eta.get(x)))
}

/// Sign of the precision sequence relative to the gradient coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PrecisionSign {
    /// `alpha = -c`; the convention under which the change-of-measure identity holds.
    #[default]
    Negated,
    /// `alpha = c`; kept for comparison.
    Plain,
}

impl fmt::Display for PrecisionSign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PrecisionSign::Negated => "alpha=-c",
            PrecisionSign::Plain => "alpha=+c",
        })
    }
}

pub(crate) fn precision_with<T: Scalar>(kernel: &InteractionKernel<T>, sign: PrecisionSign) -> BTreeMap<i64, T> {
    match sign {
        PrecisionSign::Negated => kernel.precision(),
        PrecisionSign::Plain => kernel.eta_coeffs(),
    }
}

/// `-1/2 sum_{x,y} eta(x) eta(y) alpha(y - x)` for an arbitrary precision map.
pub(crate) fn quadratic_log_weight<T: Scalar>(eta: &GradientProfile, alpha: &BTreeMap<i64, T>) -> T {
    let support: Vec<(i64, T)> = eta.sites().filter(|&(_, v)| v != 0).map(|(x, v)| (x, lift::<T>(v))).collect();
    let mut q = T::zero();
    for (x, ex) in &support {
        for (y, ey) in &support {
            if let Some(a) = alpha.get(&(y - x)) {
                q = q + ex.clone() * ey.clone() * a.clone();
            }
        }
    }
    let half = T::one() / (T::one() + T::one());
    -(half * q)
}

/// Unnormalized log Gibbs weight with zero boundary outside the window.
/// The kernel must be positive definite.
pub fn gibbs_log_weight<T: Scalar>(eta: &GradientProfile, kernel: &InteractionKernel<T>) -> Result<T> {
    if !kernel.is_positive_definite()? {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(quadratic_log_weight(eta, &kernel.precision()))
}

/// Log weight under either sign, without the positive-definiteness gate.
pub fn gibbs_log_weight_unchecked<T: Scalar>(
    eta: &GradientProfile,
    kernel: &InteractionKernel<T>,
    sign: PrecisionSign,
) -> T {
    quadratic_log_weight(eta, &precision_with(kernel, sign))
}

/// `|[log pi0(R eta) - log pi0(eta)] - [D(eta) - D(R eta)]|`.
pub fn rn_identity_residual<T: Scalar>(eta: &GradientProfile, kernel: &InteractionKernel<T>) -> Result<T> {
    if !kernel.is_positive_definite()? {
        return Err(Error::NotPositiveDefinite);
    }
    rn_identity_residual_with(eta, kernel, PrecisionSign::Negated)
}

/// [`rn_identity_residual`] under a chosen sign and without the gate.
pub fn rn_identity_residual_with<T: Scalar>(
    eta: &GradientProfile,
    kernel: &InteractionKernel<T>,
    sign: PrecisionSign,
) -> Result<T> {
    let alpha = precision_with(kernel, sign);
    let moved = eta.shift_right()?;
    let lhs = quadratic_log_weight(&moved, &alpha) - quadratic_log_weight(eta, &alpha);
    let rhs = eta_drift(eta, kernel) - eta_drift(&moved, kernel);
    Ok((lhs - rhs).abs())
}

/// `exp(D) + exp(-D)`, the total jump rate at `eta`.
pub fn waiting_time(eta: &GradientProfile, kernel: &InteractionKernel<f64>) -> f64 {
    total_rate(eta_drift(eta, kernel))
}

pub(crate) fn total_rate(d: f64) -> f64 {
    d.exp() + (-d).exp()
}

/// `log(exp(d) + exp(-d))` without overflow.
pub(crate) fn log_total_rate(d: f64) -> f64 {
    let a = d.abs();
    a + (-2.0 * a).exp().ln_1p()
}

/// Unnormalized log weight of the jump chain's stationary law, `log pi0 + log tau`.
pub fn discrete_stationary_logweight(eta: &GradientProfile, kernel: &InteractionKernel<f64>) -> Result<f64> {
    Ok(gibbs_log_weight(eta, kernel)? + log_total_rate(eta_drift(eta, kernel)))
}
