use crate::engine::{InitialProfile, LocalTimeProfile, StreamRng, Walk, WalkState};
use crate::error::{Error, Result};
use crate::Kernel;

pub const DEFAULT_CHECKPOINT_RATIO: f64 = 1.05;

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub kernel: Kernel,
    pub steps: u64,
    pub seed: u64,
    pub initial_position: i64,
    pub initial_profile: InitialProfile,
    /// Geometric spacing of checkpoints, in `(1, 10]`.
    pub checkpoint_ratio: f64,
    pub record_trajectory: bool,
    /// Replace every draw `u` by `1 - u`.
    pub antithetic: bool,
}

impl RunConfig {
    pub fn new(kernel: Kernel, steps: u64, seed: u64) -> Self {
        RunConfig {
            kernel,
            steps,
            seed,
            initial_position: 0,
            initial_profile: InitialProfile::zero(),
            checkpoint_ratio: DEFAULT_CHECKPOINT_RATIO,
            record_trajectory: false,
            antithetic: false,
        }
    }

    pub fn with_profile(mut self, profile: InitialProfile) -> Self {
        self.initial_profile = profile;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.checkpoint_ratio > 1.0 && self.checkpoint_ratio <= 10.0) {
            return Err(Error::Config(format!("checkpoint ratio {} outside (1, 10]", self.checkpoint_ratio)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Checkpoint {
    pub n: u64,
    pub position: i64,
    pub range_min: i64,
    pub range_max: i64,
}

/// Sites visited from step `start` to the end of the run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TailWindow {
    pub start: u64,
    pub min: i64,
    pub max: i64,
}

impl TailWindow {
    /// Number of sites in `[min, max]`.
    pub fn sites(&self) -> u64 {
        (self.max - self.min) as u64 + 1
    }

    #[inline(always)]
    fn observe(&mut self, n: u64, x: i64) {
        if n == self.start {
            self.min = x;
            self.max = x;
        } else if n > self.start {
            self.min = self.min.min(x);
            self.max = self.max.max(x);
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub initial_position: i64,
    pub checkpoints: Vec<Checkpoint>,
    pub final_state: WalkState,
    /// `max_{m <= n} (S_m - X_m)` with `S` the running maximum.
    pub max_backtrack: u64,
    /// Positions visited during the second half of the run.
    pub late: TailWindow,
    /// Positions visited during the last quarter of the run.
    pub tail: TailWindow,
    pub trajectory: Option<Vec<i64>>,
}

impl RunSummary {
    pub fn steps(&self) -> u64 {
        self.final_state.step
    }

    pub fn final_position(&self) -> i64 {
        self.final_state.position
    }

    pub fn final_profile(&self) -> &LocalTimeProfile {
        &self.final_state.profile
    }

    /// `max_{m <= n} |X_m - X_0|` at checkpoint `c`.
    pub fn max_displacement(&self, c: &Checkpoint) -> i64 {
        (c.range_max - self.initial_position).max(self.initial_position - c.range_min)
    }

    /// Summary of a given trajectory, as if it had been simulated.
    pub fn from_trajectory(positions: &[i64], checkpoint_ratio: f64) -> Result<Self> {
        let (&x0, _) = positions
            .split_first()
            .ok_or_else(|| Error::Insufficient("empty trajectory".into()))?;
        let steps = positions.len() as u64 - 1;
        let mut recorder = Recorder::new(x0, steps, checkpoint_ratio)?;
        let mut state = WalkState::new(x0, InitialProfile::zero(), 0);
        for (n, pair) in positions.windows(2).enumerate() {
            let (from, to) = (pair[0], pair[1]);
            let edge = match to - from {
                1 => from,
                -1 => to,
                _ => return Err(Error::Config(format!("non-neighbour move {from} -> {to} at step {n}"))),
            };
            state.profile.cover(edge - 1, edge + 1);
            state.profile.increment(edge);
            state.position = to;
            state.step += 1;
            recorder.observe(state.step, to);
        }
        Ok(recorder.finish(state, Some(positions.to_vec())))
    }
}

/// Checkpoint times: 0, then `floor(ratio^i)` for `i = 0, 1, ...` below
/// `steps`, then `steps`.
pub fn checkpoint_times(steps: u64, ratio: f64) -> Vec<u64> {
    let mut times = vec![0];
    let mut i = 0i32;
    loop {
        let t = ratio.powi(i).floor();
        if !(t < steps as f64) {
            break;
        }
        let t = t as u64;
        if t > *times.last().expect("nonempty") {
            times.push(t);
        }
        i += 1;
    }
    if steps > 0 {
        times.push(steps);
    }
    times
}

struct Recorder {
    x0: i64,
    times: Vec<u64>,
    next: usize,
    checkpoints: Vec<Checkpoint>,
    range_min: i64,
    range_max: i64,
    max_backtrack: u64,
    late: TailWindow,
    tail: TailWindow,
}

impl Recorder {
    fn new(x0: i64, steps: u64, ratio: f64) -> Result<Self> {
        if !(ratio > 1.0 && ratio <= 10.0) {
            return Err(Error::Config(format!("checkpoint ratio {ratio} outside (1, 10]")));
        }
        let times = checkpoint_times(steps, ratio);
        let tail_start = steps - steps / 4;
        let late_start = steps - steps / 2;
        Ok(Recorder {
            x0,
            checkpoints: vec![Checkpoint { n: 0, position: x0, range_min: x0, range_max: x0 }],
            times,
            next: 1,
            range_min: x0,
            range_max: x0,
            max_backtrack: 0,
            late: TailWindow { start: late_start, min: x0, max: x0 },
            tail: TailWindow { start: tail_start, min: x0, max: x0 },
        })
    }

    #[inline(always)]
    fn observe(&mut self, n: u64, x: i64) {
        if x < self.range_min {
            self.range_min = x;
        } else if x > self.range_max {
            self.range_max = x;
        }
        let back = (self.range_max - x) as u64;
        if back > self.max_backtrack {
            self.max_backtrack = back;
        }
        self.late.observe(n, x);
        self.tail.observe(n, x);
        if self.next < self.times.len() && n == self.times[self.next] {
            self.checkpoints.push(Checkpoint { n, position: x, range_min: self.range_min, range_max: self.range_max });
            self.next += 1;
        }
    }

    fn finish(self, final_state: WalkState, trajectory: Option<Vec<i64>>) -> RunSummary {
        RunSummary {
            initial_position: self.x0,
            checkpoints: self.checkpoints,
            final_state,
            max_backtrack: self.max_backtrack,
            late: self.late,
            tail: self.tail,
            trajectory,
        }
    }
}

/// Simulates `config.steps` steps. A deterministic function of the config.
pub fn run(config: &RunConfig) -> Result<RunSummary> {
    config.validate()?;
    let x0 = config.initial_position;
    let mut recorder = Recorder::new(x0, config.steps, config.checkpoint_ratio)?;
    let state = WalkState {
        position: x0,
        step: 0,
        profile: LocalTimeProfile::new(config.initial_profile.clone()),
        rng: StreamRng::new(config.seed),
    };
    let mut walk = Walk::new(&config.kernel, state).with_antithetic(config.antithetic);
    let mut trajectory = config.record_trajectory.then(|| {
        let mut v = Vec::with_capacity(config.steps as usize + 1);
        v.push(x0);
        v
    });
    for n in 1..=config.steps {
        walk.step()?;
        let x = walk.position();
        recorder.observe(n, x);
        if let Some(t) = trajectory.as_mut() {
            t.push(x);
        }
    }
    Ok(recorder.finish(walk.into_state(), trajectory))
}
