//! Self-referential fast-weight networks that improve without an optimizer.
//!
//! A network in this crate rewrites every one of its own weights while it
//! acts ([`net`]). New solutions come only from these self-modifications;
//! [`fme`] decides which stored solution to run next, favouring the ones
//! that earned more reward per step, and keeps the results in a
//! fitness-bucketed buffer ([`buffer`]). [`baselines`] swaps
//! self-modification for Gaussian weight noise to give a hill-climbing
//! comparison, [`env`] provides the bandit and cart-pole tasks, and
//! [`equivalence`] shows that a memory-based network can emulate the
//! self-referential one step for step.

pub mod baselines;
pub mod buffer;
pub mod env;
pub mod equivalence;
pub mod error;
pub mod fme;
pub mod net;

pub use baselines::{hillclimb_run, perturb, variance_sweep, SweepResult, SweepRow, DEFAULT_SIGMA_GRID};
pub use buffer::{LruBuffer, SamplingMode, Solution};
pub use env::{EnvKind, Environment, StepResult};
pub use equivalence::{memory_step, trace_compare, MemoryState, TraceComparison};
pub use error::{Error, Result};
pub use fme::{
    evaluate_execute, fme_run, fresh_evaluation, run_seeds, stream_rng, EnvFactory, Execution, FmeConfig, HistoryRow,
    RunHistory, SearchOutcome,
};
pub use net::{
    act, build_input, flatten_params, init_params, layer_step, net_step, unflatten_params, InputSpec, LayerDims,
    LayerWeights, NetParams, UpdateRule,
};
