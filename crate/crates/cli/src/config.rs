//! Experiment configuration: built-in defaults, then a `key=value` file,
//! then command-line flags.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use selfmod_core::fme::{
    DEFAULT_BUCKETS, DEFAULT_BUCKET_CAPACITY, DEFAULT_EXP_COEFF, DEFAULT_HIDDEN_WIDTH, DEFAULT_LAYERS,
    DEFAULT_STEPS_PER_EXECUTION,
};
use selfmod_core::{EnvKind, FmeConfig, InputSpec, LayerDims, SamplingMode};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Fme,
    Hillclimb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Sampling {
    Exponential,
    Greedy,
}

impl From<Sampling> for SamplingMode {
    fn from(s: Sampling) -> Self {
        match s {
            Sampling::Exponential => SamplingMode::Exponential,
            Sampling::Greedy => SamplingMode::Greedy,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Toggle {
    Auto,
    On,
    Off,
}

impl Toggle {
    pub fn resolve(self, auto: bool) -> bool {
        match self {
            Toggle::Auto => auto,
            Toggle::On => true,
            Toggle::Off => false,
        }
    }
}

pub const DEFAULT_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
pub const DEFAULT_NOISE_SIGMA: f64 = 0.1;
pub const DEFAULT_ITERATIONS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub env: String,
    pub mode: Mode,
    pub iterations: usize,
    pub seeds: Vec<u64>,
    pub steps_per_execution: usize,
    pub buckets: usize,
    pub capacity: usize,
    pub exp_coeff: f64,
    pub sampling: Sampling,
    pub hidden_width: usize,
    pub num_layers: usize,
    pub feed_reward: Toggle,
    pub feed_prev_action: Toggle,
    pub noise_sigma: f64,
    pub swap_low: u32,
    pub swap_high: u32,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            env: "bandit".into(),
            mode: Mode::Fme,
            iterations: DEFAULT_ITERATIONS,
            seeds: DEFAULT_SEEDS.to_vec(),
            steps_per_execution: DEFAULT_STEPS_PER_EXECUTION,
            buckets: DEFAULT_BUCKETS,
            capacity: DEFAULT_BUCKET_CAPACITY,
            exp_coeff: DEFAULT_EXP_COEFF,
            sampling: Sampling::Exponential,
            hidden_width: DEFAULT_HIDDEN_WIDTH,
            num_layers: DEFAULT_LAYERS,
            feed_reward: Toggle::Auto,
            feed_prev_action: Toggle::Auto,
            noise_sigma: DEFAULT_NOISE_SIGMA,
            swap_low: selfmod_core::env::DEFAULT_SWAP_LOW,
            swap_high: selfmod_core::env::DEFAULT_SWAP_HIGH,
            out: PathBuf::from("history.csv"),
        }
    }
}

/// Settings after `auto` choices have been made.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub config: ExperimentConfig,
    pub kind: EnvKind,
    pub feed_reward: bool,
    pub feed_prev_action: bool,
    pub fme: FmeConfig,
}

impl ExperimentConfig {
    pub fn env_kind(&self) -> Result<EnvKind, CliError> {
        let kind: EnvKind = self.env.parse().map_err(|e: selfmod_core::Error| CliError::Usage(e.to_string()))?;
        Ok(match kind {
            EnvKind::BanditSwap { .. } => EnvKind::BanditSwap { swap_low: self.swap_low, swap_high: self.swap_high },
            other => other,
        })
    }

    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let kind = self.env_kind()?;
        if self.seeds.is_empty() {
            return Err(CliError::Usage("at least one seed is required".into()));
        }
        if !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return Err(CliError::Usage(format!("noise sigma must be non-negative, got {}", self.noise_sigma)));
        }
        let feed_reward = self.feed_reward.resolve(kind.default_feed_reward());
        let feed_prev_action = self.feed_prev_action.resolve(kind.default_feed_prev_action());
        let input = InputSpec::new(kind.obs_dim(), kind.action_count())
            .with_reward(feed_reward)
            .with_prev_action(feed_prev_action);
        let dims = LayerDims::stack(input.width(), self.hidden_width, self.num_layers, kind.action_count())
            .map_err(|e| CliError::Usage(e.to_string()))?;
        let fme = FmeConfig {
            steps_per_execution: self.steps_per_execution,
            iterations: self.iterations,
            num_buckets: self.buckets,
            bucket_capacity: self.capacity,
            exp_coeff: self.exp_coeff,
            mode: self.sampling.into(),
            seed: self.seeds[0],
            dims,
            input,
        };
        fme.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        kind.build().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(Resolved { config: self.clone(), kind, feed_reward, feed_prev_action, fme })
    }

    /// Applies one `key=value` setting. Keys match the long flag names;
    /// underscores and dashes are interchangeable.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let key = key.trim().to_ascii_lowercase().replace('_', "-");
        let value = value.trim();
        let bad = |what: &str| CliError::Usage(format!("invalid value {value:?} for {key}: {what}"));
        match key.as_str() {
            "env" => self.env = value.to_string(),
            "mode" => self.mode = Mode::from_str(value, true).map_err(|e| bad(&e))?,
            "iterations" => self.iterations = value.parse().map_err(|_| bad("expected an integer"))?,
            "seeds" => self.seeds = parse_seeds(value).map_err(|e| bad(&e))?,
            "steps" | "l" => self.steps_per_execution = value.parse().map_err(|_| bad("expected an integer"))?,
            "buckets" | "m" => self.buckets = value.parse().map_err(|_| bad("expected an integer"))?,
            "capacity" | "c" => self.capacity = value.parse().map_err(|_| bad("expected an integer"))?,
            "exp-coeff" => self.exp_coeff = value.parse().map_err(|_| bad("expected a number"))?,
            "sampling" => self.sampling = Sampling::from_str(value, true).map_err(|e| bad(&e))?,
            "hidden-width" => self.hidden_width = value.parse().map_err(|_| bad("expected an integer"))?,
            "num-layers" => self.num_layers = value.parse().map_err(|_| bad("expected an integer"))?,
            "feed-reward" => self.feed_reward = Toggle::from_str(value, true).map_err(|e| bad(&e))?,
            "feed-prev-action" => self.feed_prev_action = Toggle::from_str(value, true).map_err(|e| bad(&e))?,
            "noise-sigma" => self.noise_sigma = value.parse().map_err(|_| bad("expected a number"))?,
            "swap-low" => self.swap_low = value.parse().map_err(|_| bad("expected an integer"))?,
            "swap-high" => self.swap_high = value.parse().map_err(|_| bad("expected an integer"))?,
            "out" => self.out = PathBuf::from(value),
            _ => return Err(CliError::Usage(format!("unknown setting {key:?}"))),
        }
        Ok(())
    }

    /// Reads a flat `key=value` file. Blank lines and `#` comments are skipped.
    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config file {}: {e}", path.display())))?;
        self.apply_text(&text)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected key=value", n + 1)))?;
            self.set(key, value)?;
        }
        Ok(())
    }

    pub fn apply_flags(&mut self, flags: &ConfigFlags) -> Result<(), CliError> {
        if let Some(v) = &flags.env {
            self.env = v.clone();
        }
        if let Some(v) = flags.mode {
            self.mode = v;
        }
        if let Some(v) = flags.iterations {
            self.iterations = v;
        }
        if let Some(v) = &flags.seeds {
            self.seeds = parse_seeds(v).map_err(CliError::Usage)?;
        }
        if let Some(v) = flags.steps {
            self.steps_per_execution = v;
        }
        if let Some(v) = flags.buckets {
            self.buckets = v;
        }
        if let Some(v) = flags.capacity {
            self.capacity = v;
        }
        if let Some(v) = flags.exp_coeff {
            self.exp_coeff = v;
        }
        if let Some(v) = flags.sampling {
            self.sampling = v;
        }
        if let Some(v) = flags.hidden_width {
            self.hidden_width = v;
        }
        if let Some(v) = flags.num_layers {
            self.num_layers = v;
        }
        if let Some(v) = flags.feed_reward {
            self.feed_reward = v;
        }
        if let Some(v) = flags.feed_prev_action {
            self.feed_prev_action = v;
        }
        if let Some(v) = flags.noise_sigma {
            self.noise_sigma = v;
        }
        if let Some(v) = flags.swap_low {
            self.swap_low = v;
        }
        if let Some(v) = flags.swap_high {
            self.swap_high = v;
        }
        if let Some(v) = &flags.out {
            self.out = v.clone();
        }
        Ok(())
    }

    /// Defaults, then `flags.config` if given, then the flags themselves.
    pub fn from_flags(flags: &ConfigFlags) -> Result<Self, CliError> {
        Self::layered(Self::default(), flags)
    }

    pub fn layered(base: Self, flags: &ConfigFlags) -> Result<Self, CliError> {
        let mut config = base;
        if let Some(path) = &flags.config {
            config.apply_file(path)?;
        }
        config.apply_flags(flags)?;
        Ok(config)
    }
}

/// Prints every setting, `auto` choices included, as `key=value` pairs that
/// [`ExperimentConfig::set`] accepts.
impl fmt::Display for Resolved {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = &self.config;
        let seeds: Vec<String> = c.seeds.iter().map(u64::to_string).collect();
        write!(
            f,
            "env={} mode={} iterations={} seeds={} steps={} buckets={} capacity={} exp_coeff={} sampling={} \
             hidden_width={} num_layers={} feed_reward={} feed_prev_action={} noise_sigma={}",
            self.kind.name(),
            c.mode.to_possible_value().expect("no skipped variants").get_name(),
            c.iterations,
            seeds.join(","),
            c.steps_per_execution,
            c.buckets,
            c.capacity,
            c.exp_coeff,
            c.sampling.to_possible_value().expect("no skipped variants").get_name(),
            c.hidden_width,
            c.num_layers,
            on_off(self.feed_reward),
            on_off(self.feed_prev_action),
            c.noise_sigma,
        )?;
        if let EnvKind::BanditSwap { swap_low, swap_high } = self.kind {
            write!(f, " swap_low={swap_low} swap_high={swap_high}")?;
        }
        Ok(())
    }
}

fn on_off(b: bool) -> &'static str {
    if b {
        "on"
    } else {
        "off"
    }
}

/// Accepts `3`, `0,1,2` or the half-open range `0..5`.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>, String> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| format!("bad seed range {s:?}"))?;
        let b: u64 = b.trim().parse().map_err(|_| format!("bad seed range {s:?}"))?;
        if b <= a {
            return Err(format!("empty seed range {s:?}"));
        }
        return Ok((a..b).collect());
    }
    s.split(',')
        .map(|p| p.trim().parse::<u64>().map_err(|_| format!("bad seed {p:?}")))
        .collect::<Result<Vec<_>, _>>()
        .and_then(|v| if v.is_empty() { Err("no seeds given".into()) } else { Ok(v) })
}

/// Flags shared by `run`, `sweep` and `preset`. Unset flags leave the
/// default or config-file value alone.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigFlags {
    /// Flat key=value file applied before the other flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// bandit, bandit-swap or cartpole.
    #[arg(long)]
    pub env: Option<String>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Comma list (`0,1,2`) or half-open range (`0..5`).
    #[arg(long)]
    pub seeds: Option<String>,
    /// Environment steps per execution.
    #[arg(long = "steps")]
    pub steps: Option<usize>,
    /// Number of fitness buckets.
    #[arg(long)]
    pub buckets: Option<usize>,
    /// Solutions kept per bucket.
    #[arg(long)]
    pub capacity: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub exp_coeff: Option<f64>,
    #[arg(long, value_enum)]
    pub sampling: Option<Sampling>,
    #[arg(long)]
    pub hidden_width: Option<usize>,
    #[arg(long)]
    pub num_layers: Option<usize>,
    #[arg(long, value_enum)]
    pub feed_reward: Option<Toggle>,
    #[arg(long, value_enum)]
    pub feed_prev_action: Option<Toggle>,
    /// Weight noise of the hill climber.
    #[arg(long, allow_hyphen_values = true)]
    pub noise_sigma: Option<f64>,
    #[arg(long)]
    pub swap_low: Option<u32>,
    #[arg(long)]
    pub swap_high: Option<u32>,
    /// Output path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
