//! Episodic environments: a two-armed bandit (optionally swapping its good
//! arm at random intervals) and the classic cart-pole balancing task.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub obs: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

/// Uniform contract for the built-in tasks. Randomness is always drawn from
/// the stream handed in by the caller so runs are reproducible.
pub trait Environment: Send {
    fn action_count(&self) -> usize;

    fn obs_dim(&self) -> usize;

    /// Starts a new episode and returns the first observation.
    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64>;

    fn step(&mut self, action: usize, rng: &mut dyn RngCore) -> Result<StepResult>;
}

/// State of a two-armed bandit whose good arm may swap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BanditState {
    pub good_arm: usize,
    pub swap_enabled: bool,
    pub steps_until_swap: u32,
    pub swap_low: u32,
    pub swap_high: u32,
}

impl BanditState {
    fn draw_countdown(&mut self, rng: &mut dyn RngCore) {
        self.steps_until_swap = rng.random_range(self.swap_low..=self.swap_high);
    }
}

pub const DEFAULT_SWAP_LOW: u32 = 50;
pub const DEFAULT_SWAP_HIGH: u32 = 150;

/// Two-armed bandit paying 1 for the good arm and 0 otherwise. Never
/// terminates.
#[derive(Debug, Clone)]
pub struct Bandit {
    state: BanditState,
}

impl Bandit {
    /// Stationary bandit whose good arm is always `good_arm`.
    pub fn stationary(good_arm: usize) -> Self {
        Self { state: BanditState { good_arm, swap_enabled: false, steps_until_swap: 1, swap_low: 1, swap_high: 1 } }
    }

    /// Bandit that swaps its arms after a countdown drawn uniformly from
    /// `[swap_low, swap_high]`. The good arm is drawn at every reset.
    pub fn swapping(swap_low: u32, swap_high: u32) -> Result<Self> {
        if swap_low == 0 || swap_low > swap_high {
            return Err(Error::Config(format!("invalid swap interval [{swap_low}, {swap_high}]")));
        }
        Ok(Self {
            state: BanditState { good_arm: 0, swap_enabled: true, steps_until_swap: swap_low, swap_low, swap_high },
        })
    }

    pub fn from_state(state: BanditState) -> Self {
        Self { state }
    }

    pub fn state(&self) -> &BanditState {
        &self.state
    }
}

/// One bandit pull. Public so the reward rule can be tested in isolation.
pub fn bandit_step(state: &mut BanditState, action: usize, rng: &mut dyn RngCore) -> Result<StepResult> {
    if action > 1 {
        return Err(Error::InvalidAction { action, action_count: 2 });
    }
    let reward = if action == state.good_arm { 1.0 } else { 0.0 };
    if state.swap_enabled {
        state.steps_until_swap -= 1;
        if state.steps_until_swap == 0 {
            state.good_arm = 1 - state.good_arm;
            state.draw_countdown(rng);
        }
    }
    Ok(StepResult { obs: Vec::new(), reward, done: false })
}

impl Environment for Bandit {
    fn action_count(&self) -> usize {
        2
    }

    fn obs_dim(&self) -> usize {
        0
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        if self.state.swap_enabled {
            self.state.good_arm = rng.random_range(0..2);
            self.state.draw_countdown(rng);
        }
        Vec::new()
    }

    fn step(&mut self, action: usize, rng: &mut dyn RngCore) -> Result<StepResult> {
        bandit_step(&mut self.state, action, rng)
    }
}

pub const GRAVITY: f64 = 9.8;
pub const CART_MASS: f64 = 1.0;
pub const POLE_MASS: f64 = 0.1;
pub const POLE_HALF_LENGTH: f64 = 0.5;
pub const FORCE_MAG: f64 = 10.0;
pub const TAU: f64 = 0.02;
pub const X_THRESHOLD: f64 = 2.4;
pub const THETA_THRESHOLD: f64 = 0.2095;
pub const MAX_EPISODE_STEPS: u32 = 200;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CartpoleState {
    pub x: f64,
    pub x_dot: f64,
    pub theta: f64,
    pub theta_dot: f64,
    pub step_count: u32,
}

impl CartpoleState {
    pub fn obs(&self) -> Vec<f64> {
        vec![self.x, self.x_dot, self.theta, self.theta_dot]
    }

    pub fn failed(&self) -> bool {
        self.x.abs() > X_THRESHOLD || self.theta.abs() > THETA_THRESHOLD
    }
}

/// Accelerations `(x_acc, theta_acc)` under horizontal force `force`.
pub fn cartpole_accelerations(s: &CartpoleState, force: f64) -> (f64, f64) {
    let total_mass = CART_MASS + POLE_MASS;
    let (sin, cos) = s.theta.sin_cos();
    let temp = (force + POLE_MASS * POLE_HALF_LENGTH * s.theta_dot * s.theta_dot * sin) / total_mass;
    let theta_acc =
        (GRAVITY * sin - cos * temp) / (POLE_HALF_LENGTH * (4.0 / 3.0 - POLE_MASS * cos * cos / total_mass));
    let x_acc = temp - POLE_MASS * POLE_HALF_LENGTH * theta_acc * cos / total_mass;
    (x_acc, theta_acc)
}

/// Advances one explicit Euler step. Action 0 pushes left, 1 pushes right.
/// Reward is 1 unless the pole fell or the cart left the track on this step.
pub fn cartpole_step(s: &mut CartpoleState, action: usize) -> Result<StepResult> {
    let force = match action {
        0 => -FORCE_MAG,
        1 => FORCE_MAG,
        _ => return Err(Error::InvalidAction { action, action_count: 2 }),
    };
    let (x_acc, theta_acc) = cartpole_accelerations(s, force);
    s.x += TAU * s.x_dot;
    s.x_dot += TAU * x_acc;
    s.theta += TAU * s.theta_dot;
    s.theta_dot += TAU * theta_acc;
    s.step_count += 1;

    let failed = s.failed();
    Ok(StepResult {
        obs: s.obs(),
        reward: if failed { 0.0 } else { 1.0 },
        done: failed || s.step_count >= MAX_EPISODE_STEPS,
    })
}

#[derive(Debug, Clone, Default)]
pub struct Cartpole {
    state: CartpoleState,
}

impl Cartpole {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn state(&self) -> &CartpoleState {
        &self.state
    }
}

impl Environment for Cartpole {
    fn action_count(&self) -> usize {
        2
    }

    fn obs_dim(&self) -> usize {
        4
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        let mut draw = || rng.random_range(-0.05..=0.05);
        self.state = CartpoleState { x: draw(), x_dot: draw(), theta: draw(), theta_dot: draw(), step_count: 0 };
        self.state.obs()
    }

    fn step(&mut self, action: usize, _rng: &mut dyn RngCore) -> Result<StepResult> {
        cartpole_step(&mut self.state, action)
    }
}

/// Built-in environments selectable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvKind {
    Bandit,
    BanditSwap { swap_low: u32, swap_high: u32 },
    Cartpole,
}

impl EnvKind {
    pub fn bandit_swap() -> Self {
        EnvKind::BanditSwap { swap_low: DEFAULT_SWAP_LOW, swap_high: DEFAULT_SWAP_HIGH }
    }

    pub fn name(&self) -> &'static str {
        match self {
            EnvKind::Bandit => "bandit",
            EnvKind::BanditSwap { .. } => "bandit-swap",
            EnvKind::Cartpole => "cartpole",
        }
    }

    pub fn obs_dim(&self) -> usize {
        match self {
            EnvKind::Cartpole => 4,
            _ => 0,
        }
    }

    pub fn action_count(&self) -> usize {
        2
    }

    /// Only the swapping bandit needs the reward to act well.
    pub fn default_feed_reward(&self) -> bool {
        matches!(self, EnvKind::BanditSwap { .. })
    }

    /// Bandits have no observation, so the last action is fed back instead;
    /// otherwise action sampling never reaches the weights.
    pub fn default_feed_prev_action(&self) -> bool {
        self.obs_dim() == 0
    }

    pub fn build(&self) -> Result<Box<dyn Environment>> {
        Ok(match *self {
            EnvKind::Bandit => Box::new(Bandit::stationary(0)),
            EnvKind::BanditSwap { swap_low, swap_high } => Box::new(Bandit::swapping(swap_low, swap_high)?),
            EnvKind::Cartpole => Box::new(Cartpole::new()),
        })
    }
}

impl FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bandit" => Ok(EnvKind::Bandit),
            "bandit-swap" => Ok(EnvKind::bandit_swap()),
            "cartpole" => Ok(EnvKind::Cartpole),
            other => Err(Error::UnknownEnvironment(other.to_string())),
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bandit_pays_good_arm_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut s = Bandit::stationary(0).state;
        assert_eq!(bandit_step(&mut s, 0, &mut rng).unwrap().reward, 1.0);
        assert_eq!(bandit_step(&mut s, 1, &mut rng).unwrap().reward, 0.0);
        assert!(!bandit_step(&mut s, 1, &mut rng).unwrap().done);
        assert_eq!(bandit_step(&mut s, 2, &mut rng).unwrap_err(), Error::InvalidAction { action: 2, action_count: 2 });
    }

    #[test]
    fn swap_happens_when_countdown_expires() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut s = BanditState { good_arm: 0, swap_enabled: true, steps_until_swap: 1, swap_low: 50, swap_high: 150 };
        assert_eq!(bandit_step(&mut s, 0, &mut rng).unwrap().reward, 1.0);
        assert_eq!(s.good_arm, 1);
        assert!((50..=150).contains(&s.steps_until_swap));
    }

    #[test]
    fn swap_count_stays_within_interval_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut env = Bandit::swapping(50, 150).unwrap();
        env.reset(&mut rng);
        let t = 20_000u32;
        let mut swaps = 0;
        let mut arm = env.state().good_arm;
        for _ in 0..t {
            env.step(0, &mut rng).unwrap();
            if env.state().good_arm != arm {
                swaps += 1;
                arm = env.state().good_arm;
            }
        }
        assert!(swaps as f64 >= t as f64 / 150.0 - 1.0 && swaps as f64 <= t as f64 / 50.0 + 1.0, "{swaps}");
    }

    #[test]
    fn invalid_swap_interval() {
        assert!(Bandit::swapping(0, 5).is_err());
        assert!(Bandit::swapping(6, 5).is_err());
    }

    #[test]
    fn cartpole_push_right_from_rest() {
        // temp = 10/1.1; theta_acc = -temp / (0.5 * (4/3 - 0.1/1.1));
        // x_acc = temp - 0.05 * theta_acc / 1.1.
        let temp: f64 = 10.0 / 1.1;
        let theta_acc = -temp / (0.5 * (4.0 / 3.0 - 0.1 / 1.1));
        let x_acc = temp - 0.05 * theta_acc / 1.1;
        assert!((theta_acc - (-14.634_146_341_463_415)).abs() < 1e-9);
        assert!((x_acc - 9.756_097_560_975_61).abs() < 1e-9);

        let mut s = CartpoleState::default();
        let r = cartpole_step(&mut s, 1).unwrap();
        assert_eq!(s.x, 0.0);
        assert_eq!(s.theta, 0.0);
        assert!((s.x_dot - 0.195_121_951_219_512_2).abs() < 1e-12);
        assert!((s.theta_dot - (-0.292_682_926_829_268_3)).abs() < 1e-12);
        assert_eq!(r.reward, 1.0);
        assert!(!r.done);
        assert_eq!(r.obs.len(), 4);
    }

    #[test]
    fn cartpole_terminates_on_angle() {
        let mut s = CartpoleState { theta: 0.22, ..Default::default() };
        let r = cartpole_step(&mut s, 0).unwrap();
        assert!(r.done);
        assert_eq!(r.reward, 0.0);
    }

    #[test]
    fn cartpole_rejects_bad_action() {
        let mut s = CartpoleState::default();
        assert!(cartpole_step(&mut s, 2).is_err());
    }

    #[test]
    fn cartpole_caps_episode_at_200() {
        // Balancing is not needed to test the cap: start upright at rest and
        // alternate pushes, which keeps the pole well inside the bounds.
        let mut s = CartpoleState::default();
        let mut total = 0.0;
        let mut steps = 0;
        loop {
            let a = if s.theta + 0.5 * s.theta_dot > 0.0 { 1 } else { 0 };
            let r = cartpole_step(&mut s, a).unwrap();
            total += r.reward;
            steps += 1;
            if r.done {
                break;
            }
        }
        assert_eq!(steps, 200);
        assert_eq!(total, 200.0);
    }

    #[test]
    fn unforced_pole_falls_away_from_upright() {
        // Integrate the equations with zero force.
        let mut s = CartpoleState { theta: 1e-3, ..Default::default() };
        let mut prev = s.theta.abs();
        for _ in 0..20 {
            let (x_acc, theta_acc) = cartpole_accelerations(&s, 0.0);
            s.x += TAU * s.x_dot;
            s.x_dot += TAU * x_acc;
            s.theta += TAU * s.theta_dot;
            s.theta_dot += TAU * theta_acc;
            assert!(s.theta.abs() >= prev);
            prev = s.theta.abs();
        }
        assert!(prev > 1e-3);
    }

    #[test]
    fn reset_draws_small_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut env = Cartpole::new();
        for _ in 0..100 {
            let obs = env.reset(&mut rng);
            assert!(obs.iter().all(|v| v.abs() <= 0.05));
        }
    }

    #[test]
    fn env_names_round_trip() {
        for name in ["bandit", "bandit-swap", "cartpole"] {
            assert_eq!(name.parse::<EnvKind>().unwrap().name(), name);
        }
        assert!(matches!("mountaincar".parse::<EnvKind>(), Err(Error::UnknownEnvironment(_))));
    }
}
