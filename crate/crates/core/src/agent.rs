//! Desk-scale policy optimization and evaluation.
//!
//! Gridworlds are solved by tabular Q-learning with exploring starts;
//! the point mass by cross-entropy-method search over linear policies.
//! Either can train against the environment's true reward or against a
//! learned reward model queried once per transition. Evaluation always
//! scores episodes with the true reward — the evaluation path takes no
//! reward model at all, so a learned reward cannot leak into reported
//! returns.

use alloc::vec;
use alloc::vec::Vec;
// Inherent float methods only exist with std; the Float trait fills in for no_std builds.
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use crate::envs::{
    ActionChoice, Actor, Environment, Observation, StartState, POINT_ACTION_BOUND,
};
use crate::error::{Error, Result};
use crate::mathutil::{mean, population_std};
use crate::reward::RewardModel;
use crate::rng::{standard_normal, SeededRng};

/// Q-learning step size; the environments are deterministic, so large
/// updates are safe and mix the table quickly.
const Q_ALPHA: f64 = 0.5;
/// Behavior-policy exploration rate during Q-learning.
const Q_EPSILON: f64 = 0.1;
/// CEM population per iteration.
const CEM_POPULATION: usize = 64;
/// CEM elites kept per iteration.
const CEM_ELITES: usize = 8;
/// Rollouts per CEM candidate evaluation.
const CEM_EVAL_ROLLOUTS: usize = 2;
/// Acting noise of the returned linear-Gaussian policy.
const LINEAR_POLICY_STDDEV: f64 = 0.05;

/// Where the training reward comes from. Evaluation ignores this entirely.
pub enum RewardSource<'a> {
    True,
    Learned(&'a dyn RewardModel),
}

/// Tabular action values with an epsilon-greedy acting rule.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    pub n_states: usize,
    pub n_actions: usize,
    /// Row-major `n_states x n_actions`.
    pub q: Vec<f64>,
    /// Exploration rate used when acting; trained policies act greedily.
    pub epsilon: f64,
}

impl QTable {
    fn new(n_states: usize, n_actions: usize, initial_value: f64) -> Self {
        QTable {
            n_states,
            n_actions,
            q: vec![initial_value; n_states * n_actions],
            epsilon: 0.0,
        }
    }

    fn greedy(&self, state: usize) -> usize {
        let row = &self.q[state * self.n_actions..(state + 1) * self.n_actions];
        let mut best = 0;
        for (a, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = a;
            }
        }
        best
    }

    fn max_q(&self, state: usize) -> f64 {
        let row = &self.q[state * self.n_actions..(state + 1) * self.n_actions];
        row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
    }
}

/// Linear-Gaussian controller for the point mass: `a = W s + b + stddev * xi`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPolicy {
    /// Row-major 2x2.
    pub weights: [f64; 4],
    pub bias: [f64; 2],
    pub stddev: f64,
}

impl LinearPolicy {
    fn from_params(params: &[f64; 6], stddev: f64) -> Self {
        LinearPolicy {
            weights: [params[0], params[1], params[2], params[3]],
            bias: [params[4], params[5]],
            stddev,
        }
    }

    fn mean_action(&self, pos: &[f64]) -> [f64; 2] {
        [
            self.weights[0] * pos[0] + self.weights[1] * pos[1] + self.bias[0],
            self.weights[2] * pos[0] + self.weights[3] * pos[1] + self.bias[1],
        ]
    }
}

/// A trained policy for either environment kind.
#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    TabularQ(QTable),
    LinearGaussian(LinearPolicy),
}

impl Actor for Policy {
    fn act(&self, obs: &Observation<'_>, rng: &mut SeededRng) -> ActionChoice {
        match (self, obs) {
            (Policy::TabularQ(table), Observation::Grid { cell, n_actions }) => {
                let a = if table.epsilon > 0.0 && rng.gen::<f64>() < table.epsilon {
                    rng.gen_range(0..*n_actions)
                } else {
                    table.greedy(*cell)
                };
                ActionChoice::Discrete(a)
            }
            (Policy::LinearGaussian(lin), Observation::Point { position, .. }) => {
                let mean = lin.mean_action(position);
                let b = POINT_ACTION_BOUND;
                let noise = if lin.stddev > 0.0 {
                    [
                        lin.stddev * standard_normal(rng),
                        lin.stddev * standard_normal(rng),
                    ]
                } else {
                    [0.0, 0.0]
                };
                ActionChoice::Continuous([
                    (mean[0] + noise[0]).clamp(-b, b),
                    (mean[1] + noise[1]).clamp(-b, b),
                ])
            }
            _ => panic!("policy kind does not match the environment"),
        }
    }
}

/// Mean and spread of evaluation returns.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub mean_return: f64,
    pub std_return: f64,
    pub episodes: usize,
}

/// The untrained policy for an environment: optimistic Q-values or a zero
/// linear controller.
///
/// Both reward sources are bounded by 1 in magnitude (the true goal reward
/// by construction, learned rewards after centering and unit scaling), so
/// `1/(1-gamma)` is a genuine optimistic bound and every action gets tried
/// before the table settles. Without it the sparse goal is effectively
/// unreachable by undirected exploration on larger grids.
pub fn initial_policy(env: &Environment) -> Policy {
    if let Some(grid) = env.grid() {
        let gamma = env.gamma();
        let optimistic = if gamma < 1.0 {
            1.0 / (1.0 - gamma)
        } else {
            env.horizon() as f64
        };
        Policy::TabularQ(QTable::new(grid.n_states(), grid.n_actions(), optimistic))
    } else {
        Policy::LinearGaussian(LinearPolicy::from_params(&[0.0; 6], LINEAR_POLICY_STDDEV))
    }
}

/// Trains a fresh policy for `steps` environment steps against the chosen
/// reward source.
pub fn train_policy(
    env: &Environment,
    source: &RewardSource<'_>,
    steps: usize,
    rng: &mut SeededRng,
) -> Policy {
    let mut policy = initial_policy(env);
    improve_policy(&mut policy, env, source, steps, rng);
    policy
}

/// Continues training an existing policy; the harness uses this to carry a
/// policy across feedback rounds.
pub fn improve_policy(
    policy: &mut Policy,
    env: &Environment,
    source: &RewardSource<'_>,
    steps: usize,
    rng: &mut SeededRng,
) {
    if steps == 0 {
        return;
    }
    match policy {
        Policy::TabularQ(table) => q_learning(table, env, source, steps, rng),
        Policy::LinearGaussian(lin) => cem_search(lin, env, source, steps, rng),
    }
}

/// Centering/scaling for learned rewards before policy optimization.
///
/// Bradley-Terry training fixes return differences, not levels, so a learned
/// reward is typically a dense positive field whose interesting structure is
/// a small ripple on a large offset. Shifting to zero mean and scaling by
/// the largest deviation (an affine map, so the discounted-optimal policy is
/// unchanged) makes that structure visible against the optimistic
/// initialization. The statistics come from a deterministic probe of the
/// state-action space.
struct RewardScale {
    mean: f64,
    inv_scale: f64,
}

impl RewardScale {
    fn identity() -> Self {
        RewardScale {
            mean: 0.0,
            inv_scale: 1.0,
        }
    }

    fn from_probe(values: &[f64]) -> Self {
        let mean = crate::mathutil::mean(values);
        let max_dev = values
            .iter()
            .map(|v| (v - mean).abs())
            .fold(0.0f64, f64::max);
        RewardScale {
            mean,
            inv_scale: if max_dev > 1e-9 { 1.0 / max_dev } else { 1.0 },
        }
    }

    fn apply(&self, r: f64) -> f64 {
        (r - self.mean) * self.inv_scale
    }
}

fn grid_reward_scale(grid: &crate::envs::GridDyn, source: &RewardSource<'_>) -> RewardScale {
    match source {
        RewardSource::True => RewardScale::identity(),
        RewardSource::Learned(model) => {
            let mut probe = Vec::with_capacity(grid.n_states() * grid.n_actions());
            for cell in 0..grid.n_states() {
                for action in 0..grid.n_actions() {
                    probe.push(
                        model.step_reward(&grid.features(cell), &grid.displacement(action)),
                    );
                }
            }
            RewardScale::from_probe(&probe)
        }
    }
}

fn point_reward_scale(point: &crate::envs::PointDyn, source: &RewardSource<'_>) -> RewardScale {
    match source {
        RewardSource::True => RewardScale::identity(),
        RewardSource::Learned(model) => {
            // 9x9 position lattice crossed with a 3x3 action lattice.
            let b = point.half_width;
            let ab = POINT_ACTION_BOUND;
            let mut probe = Vec::new();
            for i in 0..9 {
                for j in 0..9 {
                    let pos = [-b + 2.0 * b * i as f64 / 8.0, -b + 2.0 * b * j as f64 / 8.0];
                    for ai in 0..3 {
                        for aj in 0..3 {
                            let act = [
                                -ab + ab * ai as f64,
                                -ab + ab * aj as f64,
                            ];
                            probe.push(model.step_reward(&pos, &act));
                        }
                    }
                }
            }
            RewardScale::from_probe(&probe)
        }
    }
}

/// Tabular Q-learning with exploring starts: each episode begins in a
/// uniformly random non-goal cell so sparse goal rewards propagate without a
/// shaped exploration bonus.
fn q_learning(
    table: &mut QTable,
    env: &Environment,
    source: &RewardSource<'_>,
    steps: usize,
    rng: &mut SeededRng,
) {
    let grid = env.grid().expect("q-learning needs a gridworld");
    let gamma = env.gamma();
    let horizon = env.horizon();
    let scale = grid_reward_scale(&grid, source);
    let mut done = 0usize;
    while done < steps {
        let mut cell = grid.sample_start(rng);
        for _ in 0..horizon {
            if done >= steps {
                break;
            }
            let action = if rng.gen::<f64>() < Q_EPSILON {
                rng.gen_range(0..grid.n_actions())
            } else {
                table.greedy(cell)
            };
            let (next, env_reward) = grid.step(cell, action);
            let reward = match source {
                RewardSource::True => env_reward,
                RewardSource::Learned(model) => scale.apply(
                    model.step_reward(&grid.features(cell), &grid.displacement(action)),
                ),
            };
            let target = reward + gamma * table.max_q(next);
            let idx = cell * table.n_actions + action;
            table.q[idx] += Q_ALPHA * (target - table.q[idx]);
            cell = next;
            done += 1;
        }
    }
}

/// Cross-entropy-method search over the six linear-policy parameters.
fn cem_search(
    lin: &mut LinearPolicy,
    env: &Environment,
    source: &RewardSource<'_>,
    steps: usize,
    rng: &mut SeededRng,
) {
    let point = env.point().expect("cem needs a pointmass");
    let horizon = env.horizon();
    let scale = point_reward_scale(&point, source);
    let steps_per_iteration = CEM_POPULATION * CEM_EVAL_ROLLOUTS * horizon;

    let mut mu = [
        lin.weights[0],
        lin.weights[1],
        lin.weights[2],
        lin.weights[3],
        lin.bias[0],
        lin.bias[1],
    ];
    let mut sigma = [0.5; 6];
    let mut used = 0usize;
    while used + steps_per_iteration <= steps.max(steps_per_iteration) && used < steps {
        let mut scored: Vec<(f64, [f64; 6])> = Vec::with_capacity(CEM_POPULATION);
        for _ in 0..CEM_POPULATION {
            let mut candidate = [0.0; 6];
            for (c, (m, s)) in candidate.iter_mut().zip(mu.iter().zip(sigma.iter())) {
                *c = m + s * standard_normal(rng);
            }
            let policy = LinearPolicy::from_params(&candidate, 0.0);
            let mut fitness = 0.0;
            for _ in 0..CEM_EVAL_ROLLOUTS {
                let mut pos = point.sample_start(rng);
                for _ in 0..horizon {
                    let a_mean = policy.mean_action(&pos);
                    let b = POINT_ACTION_BOUND;
                    let action = [a_mean[0].clamp(-b, b), a_mean[1].clamp(-b, b)];
                    let state = pos;
                    let (next, env_reward) = point.step(pos, action);
                    fitness += match source {
                        RewardSource::True => env_reward,
                        RewardSource::Learned(model) => {
                            scale.apply(model.step_reward(&state, &action))
                        }
                    };
                    pos = next;
                }
            }
            scored.push((fitness / CEM_EVAL_ROLLOUTS as f64, candidate));
        }
        used += steps_per_iteration;
        scored.sort_by(|a, b| b.0.total_cmp(&a.0));
        let elites = &scored[..CEM_ELITES];
        for d in 0..6 {
            let vals: Vec<f64> = elites.iter().map(|(_, c)| c[d]).collect();
            mu[d] = mean(&vals);
            sigma[d] = population_std(&vals).max(0.02);
        }
    }
    *lin = LinearPolicy::from_params(&mu, LINEAR_POLICY_STDDEV);
}

/// Scores a policy against the true reward. Gridworld episodes cycle
/// round-robin through the non-goal start cells, so `episodes` equal to a
/// multiple of their count averages every start exactly; point-mass starts
/// are drawn from the seeded generator. Returns are undiscounted episodic
/// sums.
pub fn evaluate(
    policy: &dyn Actor,
    env: &Environment,
    episodes: usize,
    rng: &mut SeededRng,
) -> Result<EvalResult> {
    if episodes == 0 {
        return Err(Error::InvalidConfig("evaluation needs at least one episode".into()));
    }
    let mut returns = Vec::with_capacity(episodes);
    for e in 0..episodes {
        let start = if let Some(grid) = env.grid() {
            StartState::GridCell(e % grid.goal())
        } else {
            StartState::Sampled
        };
        let traj = env.rollout_from(start, policy, rng);
        returns.push(traj.true_return(1.0));
    }
    Ok(EvalResult {
        mean_return: mean(&returns),
        std_return: population_std(&returns),
        episodes,
    })
}
