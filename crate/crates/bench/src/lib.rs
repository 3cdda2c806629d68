//! Fixtures shared by the benchmarks.

use selfmod_core::{init_params, stream_rng, LayerDims, LruBuffer, NetParams, SamplingMode, Solution};

/// Default-sized network (three layers of 32 units, two actions) for `input` inputs.
pub fn default_network(input: usize, seed: u64) -> NetParams {
    let dims = LayerDims::stack(input, 32, 3, 2).expect("valid dimensions");
    init_params(&dims, &mut stream_rng(seed, 0)).expect("valid dimensions")
}

/// Default-sized buffer holding `n` solutions with fitness spread over [0, 1).
pub fn filled_buffer(n: usize, mode: SamplingMode) -> LruBuffer {
    let mut buffer = LruBuffer::new(100, 100, 20.0, mode).expect("valid buffer");
    let params = default_network(1, 0);
    for i in 0..n {
        let fitness = ((i * 7919) % n) as f64 / n as f64;
        buffer.insert(Solution::new(params.clone(), fitness, 1000));
    }
    buffer
}
