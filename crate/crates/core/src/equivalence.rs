//! A memory-based network that emulates the self-referential one.
//!
//! The emulator keeps every weight of the self-referential network in its
//! hidden state `h` and uses a fixed procedure (unflatten, run one step,
//! flatten) as its transition function. That procedure has no free
//! variables of its own; all behaviour is determined by `h0`.

use crate::error::{Error, Result};
use crate::net::{flatten_params, flattened_len, unflatten_params, LayerDims, NetParams, NetScratch, UpdateRule};

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryState {
    pub h: Vec<f64>,
    pub arch: Vec<LayerDims>,
}

impl MemoryState {
    pub fn new(h: Vec<f64>, arch: Vec<LayerDims>) -> Result<Self> {
        let expected = flattened_len(&arch);
        if h.len() != expected {
            return Err(Error::Shape { expected, actual: h.len() });
        }
        Ok(Self { h, arch })
    }

    /// Stores the self-referential parameters in memory.
    pub fn from_params(params: &NetParams) -> Self {
        Self { h: flatten_params(params), arch: params.dims() }
    }

    /// Number of variables of the transition function that are not part of `h`.
    pub const fn free_parameters(&self) -> usize {
        0
    }
}

/// One emulator step: `(h, x) -> (h', logits)`.
pub fn memory_step(state: &MemoryState, x: &[f64]) -> Result<(MemoryState, Vec<f64>)> {
    let mut params = unflatten_params(&state.arch, &state.h)?;
    let mut scratch = NetScratch::default();
    let logits = params.step(x, &mut scratch, UpdateRule::SelfModify)?.to_vec();
    Ok((MemoryState { h: flatten_params(&params), arch: state.arch.clone() }, logits))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceComparison {
    pub passed: bool,
    pub max_deviation: f64,
    pub steps: usize,
}

/// Unrolls the self-referential network on `inputs` and returns every output.
pub fn self_referential_unroll(params0: &NetParams, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let mut params = params0.clone();
    let mut scratch = NetScratch::default();
    inputs.iter().map(|x| Ok(params.step(x, &mut scratch, UpdateRule::SelfModify)?.to_vec())).collect()
}

pub fn memory_unroll(h0: &MemoryState, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let mut state = h0.clone();
    let mut ys = Vec::with_capacity(inputs.len());
    for x in inputs {
        let (next, y) = memory_step(&state, x)?;
        state = next;
        ys.push(y);
    }
    Ok(ys)
}

/// Compares the outputs of the self-referential network started from
/// `params0` with those of the emulator started from `h0`.
pub fn compare_unrolls(
    params0: &NetParams,
    h0: &MemoryState,
    inputs: &[Vec<f64>],
    tol: f64,
) -> Result<TraceComparison> {
    let a = self_referential_unroll(params0, inputs)?;
    let b = memory_unroll(h0, inputs)?;
    let mut max_deviation: f64 = 0.0;
    for (ya, yb) in a.iter().zip(&b) {
        if ya.len() != yb.len() {
            return Err(Error::Shape { expected: ya.len(), actual: yb.len() });
        }
        for (p, q) in ya.iter().zip(yb) {
            let d = (p - q).abs();
            max_deviation = if d.is_nan() { f64::INFINITY } else { max_deviation.max(d) };
        }
    }
    Ok(TraceComparison { passed: max_deviation <= tol, max_deviation, steps: inputs.len() })
}

/// Unrolls both formulations from the same initial weights and compares outputs.
pub fn trace_compare(params0: &NetParams, inputs: &[Vec<f64>], tol: f64) -> Result<TraceComparison> {
    compare_unrolls(params0, &MemoryState::from_params(params0), inputs, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fme::stream_rng;
    use crate::net::{init_params, net_step};
    use rand::Rng;

    fn dims() -> Vec<LayerDims> {
        LayerDims::stack(3, 16, 3, 2).unwrap()
    }

    fn inputs(seed: u64, n: usize, width: usize) -> Vec<Vec<f64>> {
        let mut rng = stream_rng(seed, 1);
        (0..n).map(|_| (0..width).map(|_| rng.random_range(-2.0..2.0)).collect()).collect()
    }

    #[test]
    fn zero_memory_is_fixed() {
        let state = MemoryState::new(vec![0.0; flattened_len(&dims())], dims()).unwrap();
        let (next, y) = memory_step(&state, &[0.5, 1.0, -1.0]).unwrap();
        assert_eq!(next, state);
        assert_eq!(y, vec![0.0, 0.0]);
    }

    #[test]
    fn single_step_matches_net_step() {
        let p = init_params(&dims(), &mut stream_rng(1, 0)).unwrap();
        let x = [0.1, 0.2, 0.3];
        let (mem, y_mem) = memory_step(&MemoryState::from_params(&p), &x).unwrap();
        let (net, y_net) = net_step(&p, &x).unwrap();
        assert_eq!(mem.h, flatten_params(&net));
        assert_eq!(y_mem, y_net);
        assert_eq!(mem.free_parameters(), 0);
    }

    #[test]
    fn identical_ordering_is_exact() {
        let p = init_params(&dims(), &mut stream_rng(2, 0)).unwrap();
        let cmp = trace_compare(&p, &inputs(2, 300, 3), 0.0).unwrap();
        assert!(cmp.passed);
        assert_eq!(cmp.max_deviation, 0.0);
        assert_eq!(cmp.steps, 300);
    }

    #[test]
    fn corrupted_memory_is_detected() {
        let p = init_params(&dims(), &mut stream_rng(3, 0)).unwrap();
        let mut h0 = MemoryState::from_params(&p);
        let last = h0.h.len() - 1;
        h0.h[5] += 0.5;
        h0.h[last] -= 0.5;
        let cmp = compare_unrolls(&p, &h0, &inputs(3, 200, 3), 1e-12).unwrap();
        assert!(!cmp.passed);
        assert!(cmp.max_deviation > 0.0);
    }

    #[test]
    fn wrong_memory_size_rejected() {
        assert!(matches!(MemoryState::new(vec![0.0; 3], dims()), Err(Error::Shape { .. })));
    }
}
