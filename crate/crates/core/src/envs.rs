//! Desk-scale environments with known ground-truth reward.
//!
//! Two environments stand in for heavyweight control suites: a deterministic
//! gridworld with a sparse goal reward (+1 on every step that ends at the
//! goal, which is absorbing) and a bounded point mass with a dense reward
//! (negative squared distance to the origin). Both expose 2-d state features
//! and 2-d action features so downstream code never branches on the
//! environment kind.
//!
//! Per-step true rewards ride along inside each [`Trajectory`] but are only
//! readable by teacher and metrics code paths; reward-model training sees
//! states and actions exclusively.

use alloc::vec::Vec;
// Inherent float methods only exist with std; the Float trait fills in for no_std builds.
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Magnitude bound on each point-mass action component.
pub const POINT_ACTION_BOUND: f64 = 0.25;

/// Which environment to build.
#[derive(Debug, Clone, PartialEq)]
pub enum EnvKind {
    /// `size x size` cells, four move actions, absorbing goal in the corner
    /// opposite the start.
    Gridworld { size: usize },
    /// Position clamped to `[-half_width, half_width]^2`, velocity-free
    /// dynamics `s' = clamp(s + a)`.
    PointMass { half_width: f64 },
}

impl EnvKind {
    pub fn name(&self) -> &'static str {
        match self {
            EnvKind::Gridworld { .. } => "gridworld",
            EnvKind::PointMass { .. } => "pointmass",
        }
    }
}

/// Environment configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub kind: EnvKind,
    /// Segment length H; every rollout has exactly this many steps.
    pub horizon: usize,
    /// Discount used by the learning agent. Teachers take their own gamma
    /// argument (default 1, i.e. episodic returns).
    pub gamma: f64,
    pub seed: u64,
}

impl EnvSpec {
    pub fn gridworld(size: usize, horizon: usize) -> Self {
        EnvSpec {
            kind: EnvKind::Gridworld { size },
            horizon,
            gamma: 0.9,
            seed: 0,
        }
    }

    pub fn pointmass(half_width: f64, horizon: usize) -> Self {
        EnvSpec {
            kind: EnvKind::PointMass { half_width },
            horizon,
            gamma: 0.9,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon < 2 {
            return Err(Error::InvalidConfig(alloc::format!(
                "horizon must be at least 2, got {}",
                self.horizon
            )));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidConfig(alloc::format!(
                "gamma must lie in (0, 1], got {}",
                self.gamma
            )));
        }
        match self.kind {
            EnvKind::Gridworld { size } => {
                if size < 3 {
                    return Err(Error::InvalidConfig(alloc::format!(
                        "gridworld size must be at least 3, got {size}"
                    )));
                }
            }
            EnvKind::PointMass { half_width } => {
                if !(half_width > 0.0 && half_width.is_finite()) {
                    return Err(Error::InvalidConfig(alloc::format!(
                        "pointmass half_width must be positive, got {half_width}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A validated, immutable environment. Dynamics are deterministic; all
/// randomness comes from the policy and start-state sampling.
#[derive(Debug, Clone)]
pub struct Environment {
    spec: EnvSpec,
}

/// Builds an environment after validating its spec.
pub fn make_env(spec: EnvSpec) -> Result<Environment> {
    spec.validate()?;
    Ok(Environment { spec })
}

/// Fixed-length segment of states, actions and hidden per-step rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    state_dim: usize,
    action_dim: usize,
    states: Vec<f64>,
    actions: Vec<f64>,
    true_rewards: Vec<f64>,
    id: u64,
}

impl Trajectory {
    /// `states` must hold `len + 1` vectors and `actions`/`true_rewards`
    /// exactly `len`, all flattened.
    pub fn new(
        state_dim: usize,
        action_dim: usize,
        states: Vec<f64>,
        actions: Vec<f64>,
        true_rewards: Vec<f64>,
        id: u64,
    ) -> Result<Self> {
        if state_dim == 0 || action_dim == 0 {
            return Err(Error::InvalidConfig("zero state or action dimension".into()));
        }
        if actions.len() % action_dim != 0 || states.len() % state_dim != 0 {
            return Err(Error::DimensionMismatch {
                expected: action_dim,
                got: actions.len(),
            });
        }
        let len = actions.len() / action_dim;
        if states.len() / state_dim != len + 1 {
            return Err(Error::LengthMismatch {
                left: states.len() / state_dim,
                right: len + 1,
            });
        }
        if true_rewards.len() != len {
            return Err(Error::LengthMismatch {
                left: true_rewards.len(),
                right: len,
            });
        }
        Ok(Trajectory {
            state_dim,
            action_dim,
            states,
            actions,
            true_rewards,
            id,
        })
    }

    /// Number of steps H.
    pub fn len(&self) -> usize {
        self.true_rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.true_rewards.is_empty()
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    /// State at step `t`, valid for `t` in `0..=len`.
    pub fn state(&self, t: usize) -> &[f64] {
        &self.states[t * self.state_dim..(t + 1) * self.state_dim]
    }

    /// Action at step `t`, valid for `t` in `0..len`.
    pub fn action(&self, t: usize) -> &[f64] {
        &self.actions[t * self.action_dim..(t + 1) * self.action_dim]
    }

    /// Discounted ground-truth segment return.
    pub fn true_return(&self, gamma: f64) -> f64 {
        let mut acc = 0.0;
        let mut discount = 1.0;
        for r in &self.true_rewards {
            acc += discount * r;
            discount *= gamma;
        }
        acc
    }

    /// Flattened (states, actions) feature vector; per-step rewards are
    /// deliberately absent.
    pub fn features(&self) -> impl Iterator<Item = f64> + '_ {
        self.states.iter().chain(self.actions.iter()).copied()
    }

    pub fn feature_len(&self) -> usize {
        self.states.len() + self.actions.len()
    }
}

/// Discounted ground-truth return of a segment.
pub fn true_return(traj: &Trajectory, gamma: f64) -> f64 {
    traj.true_return(gamma)
}

/// Two distinct trajectories presented to a teacher.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPair {
    first: Trajectory,
    second: Trajectory,
}

impl TrajectoryPair {
    pub fn new(first: Trajectory, second: Trajectory) -> Result<Self> {
        if first.id == second.id {
            return Err(Error::InvalidConfig(alloc::format!(
                "trajectory pair requires distinct ids, both are {}",
                first.id
            )));
        }
        Ok(TrajectoryPair { first, second })
    }

    pub fn first(&self) -> &Trajectory {
        &self.first
    }

    pub fn second(&self) -> &Trajectory {
        &self.second
    }

    /// The same pair with the two trajectories exchanged.
    pub fn swapped(&self) -> TrajectoryPair {
        TrajectoryPair {
            first: self.second.clone(),
            second: self.first.clone(),
        }
    }
}

/// What a policy observes each step.
pub enum Observation<'a> {
    Grid { cell: usize, n_actions: usize },
    Point { position: &'a [f64], action_bound: f64 },
}

/// What a policy emits each step.
pub enum ActionChoice {
    Discrete(usize),
    Continuous([f64; 2]),
}

/// Anything that can drive a rollout.
pub trait Actor {
    fn act(&self, obs: &Observation<'_>, rng: &mut SeededRng) -> ActionChoice;
}

/// Uniform-random actions; the default data-collection policy.
#[derive(Debug, Clone, Default)]
pub struct UniformRandomPolicy;

impl Actor for UniformRandomPolicy {
    fn act(&self, obs: &Observation<'_>, rng: &mut SeededRng) -> ActionChoice {
        match obs {
            Observation::Grid { n_actions, .. } => {
                ActionChoice::Discrete(rng.gen_range(0..*n_actions))
            }
            Observation::Point { action_bound, .. } => {
                let b = *action_bound;
                ActionChoice::Continuous([rng.gen_range(-b..=b), rng.gen_range(-b..=b)])
            }
        }
    }
}

/// Where a rollout begins.
#[derive(Debug, Clone, Copy)]
pub(crate) enum StartState {
    /// Drawn from the collection start distribution (uniform non-goal cell /
    /// uniform position in bounds).
    Sampled,
    GridCell(usize),
}

/// Gridworld dynamics derived from an `EnvSpec`; rows/cols indexed from the top
/// left, goal at the bottom-right corner, start at the top-left.
#[derive(Debug, Clone, Copy)]
pub(crate) struct GridDyn {
    pub n: usize,
}

impl GridDyn {
    pub fn n_states(&self) -> usize {
        self.n * self.n
    }

    pub fn n_actions(&self) -> usize {
        4
    }

    pub fn goal(&self) -> usize {
        self.n * self.n - 1
    }

    /// (row, col) delta for each action: up, down, left, right.
    pub fn displacement(&self, action: usize) -> [f64; 2] {
        match action {
            0 => [-1.0, 0.0],
            1 => [1.0, 0.0],
            2 => [0.0, -1.0],
            3 => [0.0, 1.0],
            _ => panic!("gridworld action index {action} out of range"),
        }
    }

    /// Deterministic transition; the goal is absorbing and pays +1 on every
    /// step that ends there.
    pub fn step(&self, cell: usize, action: usize) -> (usize, f64) {
        let goal = self.goal();
        if cell == goal {
            return (goal, 1.0);
        }
        let n = self.n as isize;
        let (mut r, mut c) = ((cell / self.n) as isize, (cell % self.n) as isize);
        let d = self.displacement(action);
        r = (r + d[0] as isize).clamp(0, n - 1);
        c = (c + d[1] as isize).clamp(0, n - 1);
        let next = (r * n + c) as usize;
        let reward = if next == goal { 1.0 } else { 0.0 };
        (next, reward)
    }

    /// Normalized (row, col) features in [0, 1]^2.
    pub fn features(&self, cell: usize) -> [f64; 2] {
        let denom = (self.n - 1) as f64;
        [(cell / self.n) as f64 / denom, (cell % self.n) as f64 / denom]
    }

    pub fn sample_start(&self, rng: &mut SeededRng) -> usize {
        // Goal is the final index, so this range covers exactly the
        // non-goal cells.
        rng.gen_range(0..self.goal())
    }
}

/// Point-mass dynamics derived from an `EnvSpec`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PointDyn {
    pub half_width: f64,
}

impl PointDyn {
    pub fn step(&self, pos: [f64; 2], action: [f64; 2]) -> ([f64; 2], f64) {
        let b = self.half_width;
        let ab = POINT_ACTION_BOUND;
        let next = [
            (pos[0] + action[0].clamp(-ab, ab)).clamp(-b, b),
            (pos[1] + action[1].clamp(-ab, ab)).clamp(-b, b),
        ];
        let reward = -(next[0] * next[0] + next[1] * next[1]);
        (next, reward)
    }

    pub fn sample_start(&self, rng: &mut SeededRng) -> [f64; 2] {
        let b = self.half_width;
        [rng.gen_range(-b..=b), rng.gen_range(-b..=b)]
    }
}

impl Environment {
    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    pub fn horizon(&self) -> usize {
        self.spec.horizon
    }

    pub fn gamma(&self) -> f64 {
        self.spec.gamma
    }

    pub fn state_dim(&self) -> usize {
        2
    }

    pub fn action_dim(&self) -> usize {
        2
    }

    /// Reward-model input width: state and action features concatenated.
    pub fn step_feature_dim(&self) -> usize {
        self.state_dim() + self.action_dim()
    }

    /// Number of discrete states, for the gridworld.
    pub fn num_states(&self) -> Option<usize> {
        self.grid().map(|g| g.n_states())
    }

    /// Number of discrete actions, for the gridworld.
    pub fn num_actions(&self) -> Option<usize> {
        self.grid().map(|g| g.n_actions())
    }

    pub(crate) fn grid(&self) -> Option<GridDyn> {
        match self.spec.kind {
            EnvKind::Gridworld { size } => Some(GridDyn { n: size }),
            EnvKind::PointMass { .. } => None,
        }
    }

    pub(crate) fn point(&self) -> Option<PointDyn> {
        match self.spec.kind {
            EnvKind::PointMass { half_width } => Some(PointDyn { half_width }),
            EnvKind::Gridworld { .. } => None,
        }
    }

    /// Rolls one segment of exactly `horizon` steps from the collection
    /// start distribution. Identical (environment, policy, rng state) yield
    /// identical trajectories, including the id.
    pub fn rollout(&self, policy: &dyn Actor, rng: &mut SeededRng) -> Trajectory {
        self.rollout_from(StartState::Sampled, policy, rng)
    }

    pub(crate) fn rollout_from(
        &self,
        start: StartState,
        policy: &dyn Actor,
        rng: &mut SeededRng,
    ) -> Trajectory {
        let id: u64 = rng.gen();
        let h = self.spec.horizon;
        let mut states = Vec::with_capacity((h + 1) * 2);
        let mut actions = Vec::with_capacity(h * 2);
        let mut rewards = Vec::with_capacity(h);

        if let Some(grid) = self.grid() {
            let mut cell = match start {
                StartState::Sampled => grid.sample_start(rng),
                StartState::GridCell(c) => c,
            };
            for _ in 0..h {
                states.extend_from_slice(&grid.features(cell));
                let obs = Observation::Grid {
                    cell,
                    n_actions: grid.n_actions(),
                };
                let a = match policy.act(&obs, rng) {
                    ActionChoice::Discrete(a) => a,
                    ActionChoice::Continuous(_) => {
                        panic!("continuous action offered to a gridworld")
                    }
                };
                actions.extend_from_slice(&grid.displacement(a));
                let (next, r) = grid.step(cell, a);
                rewards.push(r);
                cell = next;
            }
            states.extend_from_slice(&grid.features(cell));
        } else {
            let point = self.point().expect("environment is gridworld or pointmass");
            let mut pos = match start {
                StartState::Sampled => point.sample_start(rng),
                StartState::GridCell(_) => panic!("grid start on a pointmass"),
            };
            for _ in 0..h {
                states.extend_from_slice(&pos);
                let obs = Observation::Point {
                    position: &pos,
                    action_bound: POINT_ACTION_BOUND,
                };
                let a = match policy.act(&obs, rng) {
                    ActionChoice::Continuous(a) => a,
                    ActionChoice::Discrete(_) => {
                        panic!("discrete action offered to a pointmass")
                    }
                };
                actions.extend_from_slice(&a);
                let (next, r) = point.step(pos, a);
                rewards.push(r);
                pos = next;
            }
            states.extend_from_slice(&pos);
        }

        Trajectory::new(2, 2, states, actions, rewards, id)
            .expect("rollout produces consistent lengths")
    }
}

/// Draws `n` pairs from the buffer, the two members of each pair sampled
/// uniformly without replacement; pairs are independent of each other.
pub fn sample_pairs(
    buffer: &[Trajectory],
    n: usize,
    rng: &mut SeededRng,
) -> Result<Vec<TrajectoryPair>> {
    if buffer.len() < 2 {
        return Err(Error::BufferTooSmall {
            len: buffer.len(),
            needed: 2,
        });
    }
    let mut pairs = Vec::with_capacity(n);
    for _ in 0..n {
        let i = rng.gen_range(0..buffer.len());
        let mut j = rng.gen_range(0..buffer.len() - 1);
        if j >= i {
            j += 1;
        }
        pairs.push(TrajectoryPair::new(buffer[i].clone(), buffer[j].clone())?);
    }
    Ok(pairs)
}
