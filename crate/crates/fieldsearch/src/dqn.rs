//! Deep Q-learning: replay buffer, epsilon-greedy acting, TD updates
//! against a target network, the training loop, and checkpointing.
//!
//! Replay transitions store the compact environment state (drone cell,
//! battery fraction and the three grid masks) rather than materialized
//! tensors; states are expanded to network inputs per sampled batch.

use std::collections::VecDeque;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use ndarray::{Array1, Array4, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Action, SearchEnv, StateTensor};
use crate::grid::{Cell, Fov, GridMask};
use crate::nn::{huber_loss, NetworkSpec, QNetwork, SgdMomentum, ACTION_COUNT};
use crate::rng::{derive_seed, rng_from_seed, tag};
use crate::trace::EpisodeTrace;
use crate::{Error, Result};

/// Compact snapshot of everything state-dependent in the network input.
/// Together with the episode's prior map it materializes to a
/// [`StateTensor`].
#[derive(Debug, Clone)]
pub struct CompactState {
    pub drone: Cell,
    pub battery_frac: f32,
    pub found: GridMask,
    pub coverage: GridMask,
    pub observation: GridMask,
}

impl CompactState {
    pub fn of(env: &SearchEnv) -> Self {
        CompactState {
            drone: env.drone(),
            battery_frac: env.battery_frac(),
            found: env.found_map().clone(),
            coverage: env.coverage_map().clone(),
            observation: env.last_observation().clone(),
        }
    }

    pub fn materialize(&self, prior: &GridMask) -> StateTensor {
        let fov = Fov::new(self.observation.size());
        crate::env::build_state_tensor(
            self.found.size(),
            self.drone,
            self.battery_frac,
            &self.found,
            &self.coverage,
            prior,
            &self.observation,
            &fov,
        )
    }
}

/// One learning sample. The prior map is shared by both endpoint states
/// of the transition (it never changes within an episode).
#[derive(Debug, Clone)]
pub struct Transition {
    pub state: CompactState,
    pub action: Action,
    pub reward: f32,
    pub next_state: CompactState,
    pub done: bool,
    pub prior: Arc<GridMask>,
}

/// FIFO replay buffer with uniform sampling (with replacement).
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        ReplayBuffer {
            capacity,
            items: VecDeque::with_capacity(capacity.min(1 << 20)),
        }
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.items[i]
    }

    pub fn sample<'a>(&'a self, n: usize, rng: &mut impl Rng) -> Vec<&'a Transition> {
        (0..n)
            .map(|_| &self.items[rng.random_range(0..self.items.len())])
            .collect()
    }
}

/// Linear annealing from `start` to `end` over `decay_steps`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_steps: usize,
}

impl EpsilonSchedule {
    pub fn value(&self, step: usize) -> f64 {
        if self.decay_steps == 0 || step >= self.decay_steps {
            return self.end;
        }
        let frac = step as f64 / self.decay_steps as f64;
        self.start + (self.end - self.start) * frac
    }
}

/// Training hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Replay buffer size `n_buffer`.
    #[serde(alias = "n_buffer")]
    pub buffer_capacity: usize,
    /// Batch size `n_batch`.
    #[serde(alias = "n_batch")]
    pub batch_size: usize,
    /// Discount factor gamma.
    #[serde(alias = "gamma")]
    pub discount: f64,
    /// Learning rate alpha.
    #[serde(alias = "alpha")]
    pub learning_rate: f64,
    pub momentum: f64,
    pub grad_clip_norm: Option<f64>,
    /// Environment steps to run in total (`n_steps`).
    #[serde(alias = "n_steps")]
    pub total_steps: usize,
    /// Gradient updates happen every this many environment steps.
    pub train_every: usize,
    /// Greedy evaluation episodes per evaluation (`n_eval`).
    #[serde(alias = "n_eval")]
    pub eval_episodes: usize,
    /// Environment steps between evaluations.
    pub eval_period: usize,
    /// Gradient steps between hard target-network syncs.
    pub target_sync_period: usize,
    /// Fraction of the buffer that must be filled before updates start.
    pub warmup_fraction: f64,
    pub huber_delta: f64,
    pub epsilon: EpsilonSchedule,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let total_steps = 200_000;
        TrainConfig {
            buffer_capacity: 100_000,
            batch_size: 64,
            discount: 0.99,
            learning_rate: 1e-4,
            momentum: 0.9,
            grad_clip_norm: Some(10.0),
            total_steps,
            train_every: 1,
            eval_episodes: 25,
            eval_period: 10_000,
            target_sync_period: 1000,
            warmup_fraction: 0.5,
            huber_delta: 1.0,
            epsilon: EpsilonSchedule {
                start: 1.0,
                end: 0.05,
                decay_steps: total_steps / 10,
            },
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.batch_size > self.buffer_capacity {
            return Err(Error::Config(
                "batch_size must be in [1, buffer_capacity]".into(),
            ));
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return Err(Error::Config("discount must be in (0, 1]".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.warmup_fraction) {
            return Err(Error::Config("warmup_fraction must be in [0, 1]".into()));
        }
        for (name, v) in [("start", self.epsilon.start), ("end", self.epsilon.end)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("epsilon.{name} must be in [0, 1]")));
            }
        }
        if self.train_every == 0 || self.eval_period == 0 || self.target_sync_period == 0 {
            return Err(Error::Config(
                "train_every, eval_period and target_sync_period must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Stack state tensors into batched network inputs.
pub fn batch_inputs(states: &[StateTensor]) -> (Array4<f32>, Array4<f32>, Array1<f32>) {
    let b = states.len();
    let gd = states[0].global.dim();
    let ld = states[0].local.dim();
    let mut global = Array4::zeros((b, gd.0, gd.1, gd.2));
    let mut local = Array4::zeros((b, ld.0, ld.1, ld.2));
    let mut battery = Array1::zeros(b);
    for (i, s) in states.iter().enumerate() {
        global.index_axis_mut(Axis(0), i).assign(&s.global);
        local.index_axis_mut(Axis(0), i).assign(&s.local);
        battery[i] = s.battery_frac;
    }
    (global, local, battery)
}

/// Greedy action under the network: argmax Q, ties to the lowest index.
pub fn greedy_action(net: &QNetwork<f32>, state: &StateTensor) -> Result<Action> {
    let (g, l, b) = batch_inputs(std::slice::from_ref(state));
    let q = net.forward(&g, &l, &b)?;
    let mut best = 0;
    for a in 1..ACTION_COUNT {
        if q[[0, a]] > q[[0, best]] {
            best = a;
        }
    }
    Action::from_index(best)
}

/// Epsilon-greedy action selection.
pub fn act_epsilon_greedy(
    net: &QNetwork<f32>,
    state: &StateTensor,
    epsilon: f64,
    rng: &mut impl Rng,
) -> Result<Action> {
    if rng.random::<f64>() < epsilon {
        return Action::from_index(rng.random_range(0..ACTION_COUNT));
    }
    greedy_action(net, state)
}

/// One TD update on a uniformly sampled batch. Returns the Huber loss
/// before the parameter step.
pub fn train_step(
    net: &mut QNetwork<f32>,
    target: &QNetwork<f32>,
    batch: &[&Transition],
    discount: f64,
    huber_delta: f64,
    optimizer: &mut SgdMomentum<f32>,
) -> Result<f32> {
    let b = batch.len();
    let states: Vec<StateTensor> = batch.iter().map(|t| t.state.materialize(&t.prior)).collect();
    let next_states: Vec<StateTensor> = batch
        .iter()
        .map(|t| t.next_state.materialize(&t.prior))
        .collect();

    // TD targets from the frozen network: y = r + gamma * max_a Q'(s', a),
    // or y = r on terminal transitions.
    let (ng, nl, nb) = batch_inputs(&next_states);
    let next_q = target.forward(&ng, &nl, &nb)?;
    let mut targets = Array1::<f32>::zeros(b);
    for i in 0..b {
        let mut best = next_q[[i, 0]];
        for a in 1..ACTION_COUNT {
            best = best.max(next_q[[i, a]]);
        }
        targets[i] = batch[i].reward
            + if batch[i].done {
                0.0
            } else {
                discount as f32 * best
            };
    }

    let (g, l, bt) = batch_inputs(&states);
    let (q, cache) = net.forward_cached(&g, &l, &bt)?;
    let mut selected = Array1::<f32>::zeros(b);
    for i in 0..b {
        selected[i] = q[[i, batch[i].action.index()]];
    }
    let (loss, dsel) = huber_loss(&selected, &targets, huber_delta as f32);

    let mut dout = ndarray::Array2::<f32>::zeros(q.dim());
    for i in 0..b {
        dout[[i, batch[i].action.index()]] = dsel[i];
    }
    let grads = net.backward(&dout, &cache);
    optimizer.step(net, &grads);
    Ok(loss)
}

/// Saved network: shape manifest plus parameters, restorable bit-exactly.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub spec: NetworkSpec,
    pub params: Vec<f32>,
    /// Environment steps elapsed when the checkpoint was taken.
    pub train_step: u64,
    /// Mean greedy-evaluation reward; `None` before the first evaluation.
    pub eval_mean_reward: Option<f64>,
}

const CHECKPOINT_MAGIC: &[u8; 4] = b"FSQ1";

#[derive(Serialize, Deserialize)]
struct CheckpointManifest {
    spec: NetworkSpec,
    train_step: u64,
    eval_mean_reward: Option<f64>,
    param_count: usize,
}

impl Checkpoint {
    pub fn of(net: &QNetwork<f32>, train_step: u64, eval_mean_reward: Option<f64>) -> Self {
        Checkpoint {
            spec: net.spec().clone(),
            params: net.flat_params(),
            train_step,
            eval_mean_reward,
        }
    }

    pub fn build_network(&self) -> Result<QNetwork<f32>> {
        let mut net = QNetwork::zeros(self.spec.clone())?;
        net.set_flat_params(&self.params)?;
        Ok(net)
    }

    /// Binary layout: magic, little-endian u32 manifest length, JSON
    /// manifest, then parameters as little-endian f32.
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let manifest = serde_json::to_vec(&CheckpointManifest {
            spec: self.spec.clone(),
            train_step: self.train_step,
            eval_mean_reward: self.eval_mean_reward,
            param_count: self.params.len(),
        })?;
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&(manifest.len() as u32).to_le_bytes())?;
        w.write_all(&manifest)?;
        for p in &self.params {
            w.write_all(&p.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::Parse("not a checkpoint file".into()));
        }
        let mut len = [0u8; 4];
        r.read_exact(&mut len)?;
        let mut manifest = vec![0u8; u32::from_le_bytes(len) as usize];
        r.read_exact(&mut manifest)?;
        let manifest: CheckpointManifest = serde_json::from_slice(&manifest)?;
        let mut payload = vec![0u8; manifest.param_count * 4];
        r.read_exact(&mut payload)?;
        let params = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Ok(Checkpoint {
            spec: manifest.spec,
            params,
            train_step: manifest.train_step,
            eval_mean_reward: manifest.eval_mean_reward,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write(&mut f)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.is_file() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Self::read(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// One point of the training reward curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardLogEntry {
    pub env_step: u64,
    pub mean_eval_reward: f64,
}

pub struct TrainResult {
    /// Checkpoint with the highest mean evaluation reward.
    pub best: Checkpoint,
    /// Network state at the end of training.
    pub last: Checkpoint,
    pub reward_log: Vec<RewardLogEntry>,
    pub gradient_steps: u64,
}

/// Run one episode under the greedy policy, returning the summed reward
/// and the full trace.
pub fn run_greedy_episode(
    net: &QNetwork<f32>,
    env: &mut SearchEnv,
) -> Result<(f64, EpisodeTrace)> {
    let mut trace = EpisodeTrace::start(env);
    let mut total = 0.0;
    while !env.done() {
        let action = greedy_action(net, &env.state_tensor())?;
        let result = env.step(action)?;
        total += result.reward;
        trace.record(action, &result, env);
    }
    Ok((total, trace))
}

/// Train a Q-network. `env_factory` builds a fresh episode environment
/// from a seed; evaluation episodes use seeds from a separate stream.
/// Single-threaded and fully deterministic for a fixed master seed.
pub fn train<F>(
    env_factory: F,
    spec: NetworkSpec,
    config: &TrainConfig,
    master_seed: u64,
) -> Result<TrainResult>
where
    F: FnMut(u64) -> Result<SearchEnv>,
{
    train_from(env_factory, spec, config, master_seed, None)
}

/// [`train`], optionally continuing from a saved checkpoint. Resuming
/// restores the parameters and offsets the step counter so the reward
/// log continues where the previous run stopped; the replay buffer,
/// optimizer momentum and exploration schedule restart.
pub fn train_from<F>(
    mut env_factory: F,
    spec: NetworkSpec,
    config: &TrainConfig,
    master_seed: u64,
    resume: Option<&Checkpoint>,
) -> Result<TrainResult>
where
    F: FnMut(u64) -> Result<SearchEnv>,
{
    config.validate()?;
    let (mut net, step_offset) = match resume {
        Some(ck) => {
            if ck.spec != spec {
                return Err(Error::Config(
                    "checkpoint network shape differs from the configured network".into(),
                ));
            }
            (ck.build_network()?, ck.train_step)
        }
        None => {
            let mut init_rng = rng_from_seed(derive_seed(master_seed, tag::PARAM_INIT));
            (QNetwork::<f32>::init(spec, &mut init_rng)?, 0)
        }
    };
    let mut target = net.clone();
    let mut optimizer = SgdMomentum::new(
        config.learning_rate as f32,
        config.momentum as f32,
        config.grad_clip_norm.map(|c| c as f32),
    );
    let mut buffer = ReplayBuffer::new(config.buffer_capacity);
    let mut explore_rng = rng_from_seed(derive_seed(master_seed, tag::EXPLORE));
    let mut buffer_rng = rng_from_seed(derive_seed(master_seed, tag::BUFFER));
    let episode_base = derive_seed(master_seed, tag::FIELD);
    let eval_base = derive_seed(master_seed, tag::EVAL);

    let mut best = Checkpoint::of(&net, step_offset, None);
    let mut reward_log = Vec::new();
    if config.total_steps == 0 {
        let last = best.clone();
        return Ok(TrainResult {
            best,
            last,
            reward_log,
            gradient_steps: 0,
        });
    }

    let warmup = ((config.buffer_capacity as f64) * config.warmup_fraction).ceil() as usize;
    let mut episode = 0u64;
    let mut env = env_factory(derive_seed(episode_base, episode))?;
    let mut prior = Arc::new(env.prior_map().clone());
    let mut state = CompactState::of(&env);
    let mut gradient_steps = 0u64;
    let mut evals = 0u64;

    for env_step in 0..config.total_steps {
        let eps = config.epsilon.value(env_step);
        let action = act_epsilon_greedy(&net, &state.materialize(&prior), eps, &mut explore_rng)?;
        let result = env.step(action)?;
        let next_state = CompactState::of(&env);
        buffer.push(Transition {
            state,
            action,
            reward: result.reward as f32,
            next_state: next_state.clone(),
            done: result.done,
            prior: Arc::clone(&prior),
        });
        if result.done {
            episode += 1;
            env = env_factory(derive_seed(episode_base, episode))?;
            prior = Arc::new(env.prior_map().clone());
            state = CompactState::of(&env);
        } else {
            state = next_state;
        }

        if buffer.len() >= warmup && (env_step + 1) % config.train_every == 0 {
            let batch = buffer.sample(config.batch_size, &mut buffer_rng);
            train_step(
                &mut net,
                &target,
                &batch,
                config.discount,
                config.huber_delta,
                &mut optimizer,
            )?;
            gradient_steps += 1;
            if gradient_steps % config.target_sync_period as u64 == 0 {
                target = net.clone();
            }
        }

        let at_period = (env_step + 1) % config.eval_period == 0;
        let at_end = env_step + 1 == config.total_steps;
        if at_period || (at_end && !at_period) {
            let mut total = 0.0;
            for j in 0..config.eval_episodes {
                let seed = derive_seed(eval_base, (evals << 20) | j as u64);
                let mut eval_env = env_factory(seed)?;
                let (reward, _) = run_greedy_episode(&net, &mut eval_env)?;
                total += reward;
            }
            evals += 1;
            let mean = total / config.eval_episodes.max(1) as f64;
            reward_log.push(RewardLogEntry {
                env_step: step_offset + (env_step + 1) as u64,
                mean_eval_reward: mean,
            });
            if best.eval_mean_reward.is_none() || Some(mean) > best.eval_mean_reward {
                best = Checkpoint::of(&net, step_offset + (env_step + 1) as u64, Some(mean));
            }
        }
    }

    let last = Checkpoint::of(
        &net,
        step_offset + config.total_steps as u64,
        reward_log.last().map(|e| e.mean_eval_reward),
    );
    Ok(TrainResult {
        best,
        last,
        reward_log,
        gradient_steps,
    })
}

/// Write the reward log as CSV (`step,mean_eval_reward`).
pub fn write_reward_log<W: Write>(log: &[RewardLogEntry], mut w: W) -> Result<()> {
    writeln!(w, "step,mean_eval_reward")?;
    for e in log {
        writeln!(w, "{},{}", e.env_step, e.mean_eval_reward)?;
    }
    Ok(())
}
