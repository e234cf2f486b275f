//! The stepping core.
//!
//! The drift is evaluated as a sum of weighted local-time *differences*
//! `sum_k w_k (L(p_k) - L(q_k))`. For a sum-zero kernel this equals
//! `sum_e a_e L(e)`, but it is bit-for-bit unchanged when a constant is added
//! to every edge (as long as the shifted values are exact), and for
//! left-right symmetric kernels the mirrored profile yields exactly `-D`.

mod presets;
mod profile;
mod rng;
mod run;

pub use presets::{preset, preset_literal, PRESET_NAMES};
pub use profile::{InitialProfile, LocalTimeProfile};
pub use rng::{derive_seed, mix64, StreamRng, RNG_ID};
pub use run::{checkpoint_times, run, Checkpoint, RunConfig, RunSummary, TailWindow, DEFAULT_CHECKPOINT_RATIO};

use crate::error::{Error, Result};
use crate::kernel::HalfOffset;
use crate::Kernel;

/// Beyond this drift magnitude the jump is deterministic.
pub const SATURATION: f64 = 400.0;

/// `F(d) = e^d / (e^d + e^-d)`, evaluated as `1 / (1 + e^{-2d})` for
/// `d >= 0` and as `1 - F(-d)` otherwise, so that `F(-d) + F(d) == 1`
/// exactly. Saturates to exactly 0 or 1 for `|d| > 400`.
pub fn jump_probability(d: f64) -> Result<f64> {
    if d.is_nan() {
        return Err(Error::Domain("drift is NaN".into()));
    }
    Ok(logistic(d))
}

#[inline(always)]
pub(crate) fn logistic(d: f64) -> f64 {
    if d > SATURATION {
        1.0
    } else if d < -SATURATION {
        0.0
    } else if d >= 0.0 {
        1.0 / (1.0 + (-2.0 * d).exp())
    } else {
        1.0 - 1.0 / (1.0 + (2.0 * d).exp())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    Left,
    Right,
}

impl Direction {
    pub fn delta(self) -> i64 {
        match self {
            Direction::Left => -1,
            Direction::Right => 1,
        }
    }
}

/// Kernel lowered to difference terms over edge offsets from the walker.
#[derive(Clone, Debug, PartialEq)]
pub struct CompiledKernel {
    terms: Vec<(i64, i64, f64)>,
    lo: i64,
    hi: i64,
}

impl CompiledKernel {
    pub fn new(kernel: &Kernel) -> Self {
        let weights = kernel.terms();
        let mut terms = Vec::with_capacity(weights.len());
        if kernel.is_symmetric() {
            // a_{-e} l(-e) + a_e l(e) = a_{-e} (l(-e) - l(e))
            for (o, w) in weights.iter().filter(|(o, _)| o.doubled() < 0) {
                terms.push((o.floor(), o.mirrored().floor(), *w));
            }
        } else {
            let reference = weights[0].0.floor();
            for (o, w) in &weights[1..] {
                terms.push((o.floor(), reference, *w));
            }
        }
        let (lo, hi) = kernel.support();
        CompiledKernel { terms, lo: lo.floor().min(-1) - 1, hi: hi.floor().max(0) + 1 }
    }

    #[inline(always)]
    pub fn drift(&self, profile: &LocalTimeProfile, position: i64) -> f64 {
        let mut d = 0.0;
        for &(p, q, w) in &self.terms {
            d += w * (profile.value_unchecked(position + p) - profile.value_unchecked(position + q));
        }
        d
    }

    /// Edge-offset range that must be resident around the walker.
    fn reach(&self) -> (i64, i64) {
        (self.lo, self.hi)
    }
}

/// `D` of the profile seen from `position`.
pub fn drift(profile: &LocalTimeProfile, position: i64, kernel: &Kernel) -> f64 {
    let compiled = CompiledKernel::new(kernel);
    let (lo, hi) = compiled.reach();
    if profile.covers(position + lo, position + hi) {
        compiled.drift(profile, position)
    } else {
        let mut widened = profile.clone();
        widened.cover(position + lo, position + hi);
        compiled.drift(&widened, position)
    }
}

/// Full simulation state.
#[derive(Clone, Debug, PartialEq)]
pub struct WalkState {
    pub position: i64,
    pub step: u64,
    pub profile: LocalTimeProfile,
    pub rng: StreamRng,
}

impl WalkState {
    pub fn new(position: i64, initial: InitialProfile, seed: u64) -> Self {
        WalkState { position, step: 0, profile: LocalTimeProfile::new(initial), rng: StreamRng::new(seed) }
    }

    /// `l(offset) = L(position + offset)`.
    pub fn local_time(&self, offset: HalfOffset) -> f64 {
        self.profile.value(offset.edge_from(self.position))
    }
}

/// A walk bound to its kernel.
#[derive(Clone, Debug)]
pub struct Walk {
    kernel: CompiledKernel,
    state: WalkState,
    antithetic: bool,
}

impl Walk {
    pub fn new(kernel: &Kernel, state: WalkState) -> Self {
        let mut walk = Walk { kernel: CompiledKernel::new(kernel), state, antithetic: false };
        walk.ensure_coverage();
        walk
    }

    /// Use `1 - u` in place of every uniform draw `u`.
    pub fn with_antithetic(mut self, antithetic: bool) -> Self {
        self.antithetic = antithetic;
        self
    }

    pub fn state(&self) -> &WalkState {
        &self.state
    }

    pub fn into_state(self) -> WalkState {
        self.state
    }

    pub fn position(&self) -> i64 {
        self.state.position
    }

    pub fn drift(&self) -> f64 {
        self.kernel.drift(&self.state.profile, self.state.position)
    }

    /// Draws one uniform and moves.
    #[inline]
    pub fn step(&mut self) -> Result<Direction> {
        let u = self.state.rng.uniform();
        let u = if self.antithetic { 1.0 - u } else { u };
        self.step_with(u)
    }

    /// Moves right iff `u < F(D)`.
    #[inline]
    pub fn step_with(&mut self, u: f64) -> Result<Direction> {
        let d = self.drift();
        if d.is_nan() {
            return Err(Error::Domain(format!("drift is NaN at step {}", self.state.step)));
        }
        let dir = if u < logistic(d) { Direction::Right } else { Direction::Left };
        self.apply(dir)?;
        Ok(dir)
    }

    /// Moves in `dir` without consuming a draw.
    pub fn force(&mut self, dir: Direction) -> Result<()> {
        self.apply(dir)
    }

    #[inline(always)]
    fn apply(&mut self, dir: Direction) -> Result<()> {
        let s = &mut self.state;
        let next_step = s.step.checked_add(1).ok_or(Error::RunLength(s.step))?;
        let edge = match dir {
            Direction::Right => s.position,
            Direction::Left => s.position - 1,
        };
        s.profile.increment(edge);
        s.position += dir.delta();
        s.step = next_step;
        self.ensure_coverage();
        Ok(())
    }

    #[inline(always)]
    fn ensure_coverage(&mut self) {
        let (lo, hi) = self.kernel.reach();
        let x = self.state.position;
        if !self.state.profile.covers(x + lo, x + hi) {
            self.state.profile.cover(x + lo, x + hi);
        }
    }
}

/// One step of `state` under `kernel`.
pub fn step(state: WalkState, kernel: &Kernel) -> Result<WalkState> {
    let mut walk = Walk::new(kernel, state);
    walk.step()?;
    Ok(walk.into_state())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn off(s: &str) -> HalfOffset {
        s.parse().unwrap()
    }

    #[test]
    fn logistic_examples() {
        assert_eq!(jump_probability(0.0).unwrap(), 0.5);
        // e / (e + 1/e), evaluated independently.
        let e = std::f64::consts::E;
        let expected = e / (e + 1.0 / e);
        assert!((jump_probability(1.0).unwrap() - expected).abs() < 1e-15);
        assert!((jump_probability(1.0).unwrap() - 0.880_797_078_0).abs() < 1e-10);
        assert_eq!(jump_probability(-1000.0).unwrap(), 0.0);
        assert_eq!(jump_probability(1000.0).unwrap(), 1.0);
        assert_eq!(jump_probability(f64::INFINITY).unwrap(), 1.0);
        assert_eq!(jump_probability(f64::NEG_INFINITY).unwrap(), 0.0);
        assert!(jump_probability(f64::NAN).is_err());
    }

    #[test]
    fn logistic_is_antisymmetric_and_monotone() {
        let mut prev = 0.0;
        for i in -40_000..=40_000 {
            let d = i as f64 / 1000.0;
            let p = logistic(d);
            assert!(p >= prev, "not monotone at {d}");
            assert!((logistic(-d) - (1.0 - p)).abs() <= f64::EPSILON);
            if d.abs() < 10.0 && i > -40_000 {
                assert!(p > prev, "not strictly increasing at {d}");
            }
            prev = p;
        }
    }

    #[test]
    fn drift_examples() {
        let tsrw = Kernel::new_symmetric(0.0, 1.0).unwrap();
        let fresh = LocalTimeProfile::new(InitialProfile::zero());
        assert_eq!(drift(&fresh, 0, &tsrw), 0.0);

        let half_laplacian = preset("second_derivative").unwrap();
        let profile = LocalTimeProfile::new(half_laplacian.1.clone());
        assert_eq!(drift(&profile, 0, &half_laplacian.0), 0.0);

        // Walker arrived at 1 from 0: l(-1/2) = 1, l(1/2) = 0.
        let mut walk = Walk::new(&tsrw, WalkState::new(0, InitialProfile::zero(), 1));
        walk.force(Direction::Right).unwrap();
        assert_eq!(walk.position(), 1);
        assert_eq!(walk.drift(), 1.0);
    }

    #[test]
    fn step_conserves_mass_and_draws_once() {
        let k = Kernel::new_symmetric(-1.1, 3.0).unwrap();
        let mut state = WalkState::new(0, InitialProfile::zero(), 9);
        for n in 1..=200u64 {
            let before = state.position;
            state = step(state, &k).unwrap();
            assert_eq!((state.position - before).abs(), 1);
            assert_eq!(state.profile.total(), n);
            assert_eq!(state.rng.draws(), n);
            assert_eq!(state.step, n);
        }
    }

    #[test]
    fn saturated_repulsion_goes_right() {
        let k = Kernel::new_symmetric(0.0, 1e6).unwrap();
        let initial = InitialProfile::from_values([(-1, 1.0)]);
        let mut walk = Walk::new(&k, WalkState::new(0, initial, 3));
        assert_eq!(walk.drift(), 1e6);
        for u in [0.0, 0.5, 1.0 - f64::EPSILON] {
            let mut w = walk.clone();
            assert_eq!(w.step_with(u).unwrap(), Direction::Right);
        }
        assert_eq!(walk.step().unwrap(), Direction::Right);
    }

    #[test]
    fn two_forced_right_steps_reproduce_coupling_start() {
        let (kernel, _) = preset("second_derivative").unwrap();
        let mut walk = Walk::new(&kernel, WalkState::new(0, InitialProfile::zero(), 0));
        walk.force(Direction::Right).unwrap();
        walk.force(Direction::Right).unwrap();
        let s = walk.state();
        assert_eq!(s.local_time(off("-1/2")), 1.0);
        assert_eq!(s.local_time(off("-3/2")), 1.0);
        assert_eq!(s.local_time(off("1/2")), 0.0);
        assert_eq!(s.local_time(off("3/2")), 0.0);
        let direct = WalkState::new(0, preset("second_derivative").unwrap().1, 0);
        assert_eq!(walk.drift(), Walk::new(&kernel, direct).drift());
    }

    #[test]
    fn run_length_overflow_is_an_error() {
        let k = Kernel::new_symmetric(0.0, 1.0).unwrap();
        let mut state = WalkState::new(0, InitialProfile::zero(), 0);
        state.step = u64::MAX;
        assert!(matches!(step(state, &k), Err(Error::RunLength(_))));
    }

    #[test]
    fn nan_drift_is_reported() {
        let k = Kernel::new_symmetric(0.0, 1.0).unwrap();
        let initial = InitialProfile::from_values([(-1, f64::INFINITY), (0, f64::INFINITY)]);
        let mut walk = Walk::new(&k, WalkState::new(0, initial, 0));
        assert!(matches!(walk.step(), Err(Error::Domain(_))));
    }
}
