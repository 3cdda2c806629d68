//! Fitness monotonic execution.
//!
//! Starting from one randomly initialized network, repeatedly pick a stored
//! solution (more often the better it performed), let it act and rewrite
//! itself for `L` environment steps, and store the resulting network with
//! the average reward it earned. Nothing outside the network ever changes
//! its weights.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::buffer::{LruBuffer, SamplingMode, Solution};
use crate::env::{EnvKind, Environment};
use crate::error::{Error, Result};
use crate::net::{act, check_chain, init_params, InputSpec, LayerDims, NetParams, NetScratch, UpdateRule};

/// Steps a sampled solution runs before its successor is stored.
pub const DEFAULT_STEPS_PER_EXECUTION: usize = 1000;
pub const DEFAULT_BUCKETS: usize = 100;
pub const DEFAULT_BUCKET_CAPACITY: usize = 100;
pub const DEFAULT_EXP_COEFF: f64 = 20.0;
pub const DEFAULT_HIDDEN_WIDTH: usize = 32;
pub const DEFAULT_LAYERS: usize = 3;

/// Creates a fresh environment for every execution window.
pub trait EnvFactory: Sync {
    fn make(&self) -> Result<Box<dyn Environment>>;
}

impl EnvFactory for EnvKind {
    fn make(&self) -> Result<Box<dyn Environment>> {
        self.build()
    }
}

impl<F> EnvFactory for F
where
    F: Fn() -> Box<dyn Environment> + Sync,
{
    fn make(&self) -> Result<Box<dyn Environment>> {
        Ok(self())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FmeConfig {
    /// Execution window `L`.
    pub steps_per_execution: usize,
    pub iterations: usize,
    pub num_buckets: usize,
    pub bucket_capacity: usize,
    pub exp_coeff: f64,
    pub mode: SamplingMode,
    pub seed: u64,
    pub dims: Vec<LayerDims>,
    pub input: InputSpec,
}

impl FmeConfig {
    /// Defaults for one of the built-in environments: three layers of 32
    /// units, 100 buckets of 100 solutions, windows of 1000 steps.
    pub fn for_env(kind: EnvKind, feed_reward: bool, iterations: usize, seed: u64) -> Self {
        let input = InputSpec::new(kind.obs_dim(), kind.action_count())
            .with_reward(feed_reward)
            .with_prev_action(kind.default_feed_prev_action());
        Self::with_input(kind, input, iterations, seed)
    }

    /// Defaults around an explicit input layout.
    pub fn with_input(kind: EnvKind, input: InputSpec, iterations: usize, seed: u64) -> Self {
        let dims = LayerDims::stack(input.width(), DEFAULT_HIDDEN_WIDTH, DEFAULT_LAYERS, kind.action_count())
            .expect("default dimensions are valid");
        Self {
            steps_per_execution: DEFAULT_STEPS_PER_EXECUTION,
            iterations,
            num_buckets: DEFAULT_BUCKETS,
            bucket_capacity: DEFAULT_BUCKET_CAPACITY,
            exp_coeff: DEFAULT_EXP_COEFF,
            mode: SamplingMode::Exponential,
            seed,
            dims,
            input,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps_per_execution == 0 || self.iterations == 0 {
            return Err(Error::Config("steps per execution and iterations must be positive".into()));
        }
        if self.num_buckets == 0 || self.bucket_capacity == 0 {
            return Err(Error::Config("bucket count and capacity must be positive".into()));
        }
        self.input.validate()?;
        check_chain(&self.dims)?;
        if self.dims[0].n_in != self.input.width() {
            return Err(Error::Config(format!(
                "first layer takes {} inputs but the input spec produces {}",
                self.dims[0].n_in,
                self.input.width()
            )));
        }
        let out = self.dims[self.dims.len() - 1].n_out;
        if out != self.input.action_count {
            return Err(Error::Config(format!(
                "last layer produces {out} logits for {} actions",
                self.input.action_count
            )));
        }
        Ok(())
    }

    fn check_env(&self, env: &dyn Environment) -> Result<()> {
        if env.obs_dim() != self.input.obs_dim || env.action_count() != self.input.action_count {
            return Err(Error::Config(format!(
                "environment has {} observations and {} actions, config expects {} and {}",
                env.obs_dim(),
                env.action_count(),
                self.input.obs_dim,
                self.input.action_count
            )));
        }
        Ok(())
    }
}

/// Outcome of one execution window.
#[derive(Debug, Clone)]
pub struct Execution {
    pub params: NetParams,
    pub total_reward: f64,
    /// Steps actually run; smaller than the window only after a numeric failure.
    pub steps: usize,
    pub episodes_finished: usize,
    pub failure: Option<Error>,
}

impl Execution {
    /// Average reward over the full window, so an aborted run is penalized.
    pub fn fitness(&self, window: usize) -> f64 {
        self.total_reward / window as f64
    }
}

/// Runs `params` for `steps` environment steps. Each step builds the input,
/// advances (and, unless frozen, rewrites) the network, samples an action and
/// steps the environment. Episode ends reset the environment and the reward
/// and action feedback; the weights carry over.
///
/// Numeric blow-ups end the window early and are reported in
/// [`Execution::failure`]; malformed configurations are returned as errors.
pub fn evaluate_execute<R: Rng>(
    mut params: NetParams,
    env: &mut dyn Environment,
    spec: &InputSpec,
    steps: usize,
    rule: UpdateRule,
    rng: &mut R,
) -> Result<Execution> {
    let mut scratch = NetScratch::default();
    let mut x = Vec::with_capacity(spec.width());
    let mut obs = env.reset(rng as &mut dyn RngCore);
    let mut prev_reward = 0.0;
    let mut prev_action = None;
    let mut total_reward = 0.0;
    let mut episodes_finished = 0;
    let mut done_steps = 0;
    let mut failure = None;

    for _ in 0..steps {
        spec.fill(&obs, prev_reward, prev_action, &mut x)?;
        let action = match params.step(&x, &mut scratch, rule) {
            Ok(logits) => act(logits, rng),
            Err(e @ Error::NumericInstability { .. }) => {
                failure = Some(e);
                break;
            }
            Err(e) => return Err(e),
        };
        let result = env.step(action, rng as &mut dyn RngCore)?;
        total_reward += result.reward;
        done_steps += 1;
        if result.done {
            episodes_finished += 1;
            obs = env.reset(rng as &mut dyn RngCore);
            prev_reward = 0.0;
            prev_action = None;
        } else {
            obs = result.obs;
            prev_reward = result.reward;
            prev_action = Some(action);
        }
    }

    Ok(Execution { params, total_reward, steps: done_steps, episodes_finished, failure })
}

/// One line of a run's learning curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryRow {
    pub iteration: usize,
    pub total_env_steps: u64,
    pub parent_fitness: f64,
    pub child_fitness: f64,
    /// Running maximum of all measured fitness values, bootstrap included.
    pub best_fitness: f64,
    pub nonempty_buckets: usize,
    pub range_min: f64,
    pub range_max: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunHistory {
    pub rows: Vec<HistoryRow>,
}

impl RunHistory {
    pub fn final_best(&self) -> Option<f64> {
        self.rows.last().map(|r| r.best_fitness)
    }

    /// First iteration whose running best reaches `target`.
    pub fn first_reaching(&self, target: f64) -> Option<usize> {
        self.rows.iter().find(|r| r.best_fitness >= target).map(|r| r.iteration)
    }

    /// Running best after `iteration` (clamped to the last row).
    pub fn best_at(&self, iteration: usize) -> Option<f64> {
        let idx = iteration.min(self.rows.len().checked_sub(1)?);
        Some(self.rows[idx].best_fitness)
    }
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub history: RunHistory,
    /// Highest-fitness solution ever measured (earliest on ties).
    pub best: Solution,
    pub buffer: LruBuffer,
}

/// How a search turns a sampled parent into a child.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Proposal {
    /// Run the parent self-modifying; the rewritten weights are the child.
    SelfModify,
    /// Add Gaussian noise to the parent and run the result frozen.
    Perturb { sigma: f64 },
}

/// Independent random stream `stream` derived from `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const BOOTSTRAP_STREAM: u64 = u64::MAX;

pub(crate) fn search(config: &FmeConfig, factory: &dyn EnvFactory, proposal: Proposal) -> Result<SearchOutcome> {
    config.validate()?;
    let window = config.steps_per_execution;
    let rule = match proposal {
        Proposal::SelfModify => UpdateRule::SelfModify,
        Proposal::Perturb { .. } => UpdateRule::Frozen,
    };
    let mut control = stream_rng(config.seed, 0);
    let mut buffer = LruBuffer::new(config.num_buckets, config.bucket_capacity, config.exp_coeff, config.mode)?;

    let initial = init_params(&config.dims, &mut control)?;
    let mut env = factory.make()?;
    config.check_env(env.as_ref())?;
    let mut exec_rng = stream_rng(config.seed, BOOTSTRAP_STREAM);
    let boot = evaluate_execute(initial, env.as_mut(), &config.input, window, rule, &mut exec_rng)?;
    let mut total_env_steps = boot.steps as u64;
    let boot_fitness = boot.fitness(window);
    let mut best = Solution::new(boot.params, boot_fitness, window as u64);
    best.stamp = buffer.insert(best.clone());

    let mut history = RunHistory { rows: Vec::with_capacity(config.iterations) };
    for iteration in 0..config.iterations {
        let parent = buffer.sample(&mut control)?;
        let mut exec_rng = stream_rng(config.seed, iteration as u64 + 1);
        let start = match proposal {
            Proposal::SelfModify => parent.params,
            Proposal::Perturb { sigma } => crate::baselines::perturb(&parent.params, sigma, &mut exec_rng),
        };
        let mut env = factory.make()?;
        let exec = evaluate_execute(start, env.as_mut(), &config.input, window, rule, &mut exec_rng)?;
        total_env_steps += exec.steps as u64;

        let child_fitness = exec.fitness(window);
        let mut child = Solution::new(exec.params, child_fitness, window as u64);
        if child_fitness > best.fitness {
            child.stamp = buffer.insert(child.clone());
            best = child;
        } else {
            buffer.insert(child);
        }

        let (range_min, range_max) = buffer.range().expect("buffer holds the bootstrap solution");
        history.rows.push(HistoryRow {
            iteration,
            total_env_steps,
            parent_fitness: parent.fitness,
            child_fitness,
            best_fitness: best.fitness,
            nonempty_buckets: buffer.nonempty_buckets(),
            range_min,
            range_max,
        });
    }

    Ok(SearchOutcome { history, best, buffer })
}

/// Runs fitness monotonic execution for `config.iterations` iterations in a
/// single deterministic worker.
pub fn fme_run(config: &FmeConfig, factory: &dyn EnvFactory) -> Result<SearchOutcome> {
    search(config, factory, Proposal::SelfModify)
}

const EVALUATION_STREAM: u64 = u64::MAX - 1;

/// Average reward per step of `params` over a fresh environment, on a random
/// stream no search iteration uses.
pub fn fresh_evaluation(
    params: &NetParams,
    factory: &dyn EnvFactory,
    input: &InputSpec,
    steps: usize,
    rule: UpdateRule,
    seed: u64,
) -> Result<f64> {
    if steps == 0 {
        return Err(Error::Config("evaluation needs at least one step".into()));
    }
    let mut env = factory.make()?;
    let mut rng = stream_rng(seed, EVALUATION_STREAM);
    let exec = evaluate_execute(params.clone(), env.as_mut(), input, steps, rule, &mut rng)?;
    Ok(exec.fitness(steps))
}

/// Runs `run` once per seed, in parallel, returning outcomes in seed order.
/// Every run is single-worker deterministic, so results do not depend on
/// the thread pool.
pub fn run_seeds<F>(config: &FmeConfig, seeds: &[u64], run: F) -> Result<Vec<SearchOutcome>>
where
    F: Fn(&FmeConfig) -> Result<SearchOutcome> + Sync,
{
    seeds
        .par_iter()
        .map(|&seed| {
            let cfg = FmeConfig { seed, ..config.clone() };
            run(&cfg)
        })
        .collect()
}
