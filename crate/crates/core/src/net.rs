//! Self-referential fast-weight network.
//!
//! Every layer owns a single matrix `W` with `n_out + 2 n_in + 4` rows and
//! `n_in` columns. One step multiplies `W` by `tanh(x)` and splits the result
//! into the layer output `y`, a key `k`, a query `q` and four update rates.
//! The key and query are then fed back through the same `W` and the
//! difference of the two responses, scaled per row block by
//! `sigmoid(rate)`, is written back into `W` as an outer product with
//! `tanh(k)`. There are no other variables: the weights are the whole
//! state of a solution.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Number of learning-rate rows at the bottom of every layer matrix.
pub const RATE_ROWS: usize = 4;

/// Truncation bound of the initializer, in standard deviations.
pub const INIT_TRUNCATION: f64 = 2.0;

/// Row/column sizes of one self-referential layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LayerDims {
    pub n_in: usize,
    pub n_out: usize,
}

impl LayerDims {
    pub fn new(n_in: usize, n_out: usize) -> Result<Self> {
        if n_in == 0 || n_out == 0 {
            return Err(Error::Config(format!("layer dimensions must be positive, got {n_in}->{n_out}")));
        }
        Ok(Self { n_in, n_out })
    }

    /// Row count of the layer matrix.
    pub const fn rows(&self) -> usize {
        self.n_out + 2 * self.n_in + RATE_ROWS
    }

    /// Number of scalar weights in the layer.
    pub const fn len(&self) -> usize {
        self.rows() * self.n_in
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Index (0..4) of the y/k/q/rate block that `row` belongs to.
    pub const fn block_of_row(&self, row: usize) -> usize {
        if row < self.n_out {
            0
        } else if row < self.n_out + self.n_in {
            1
        } else if row < self.n_out + 2 * self.n_in {
            2
        } else {
            3
        }
    }

    /// Dimensions of a plain stack `input -> hidden x (layers - 1) -> output`.
    pub fn stack(input: usize, hidden: usize, layers: usize, output: usize) -> Result<Vec<Self>> {
        if layers == 0 {
            return Err(Error::Config("a network needs at least one layer".into()));
        }
        let mut widths = vec![input];
        widths.extend(std::iter::repeat_n(hidden, layers - 1));
        widths.push(output);
        widths.windows(2).map(|w| Self::new(w[0], w[1])).collect()
    }
}

/// Checks that `dims` is non-empty, positive and chain compatible.
pub fn check_chain(dims: &[LayerDims]) -> Result<()> {
    if dims.is_empty() {
        return Err(Error::Config("a network needs at least one layer".into()));
    }
    for d in dims {
        LayerDims::new(d.n_in, d.n_out)?;
    }
    for (i, pair) in dims.windows(2).enumerate() {
        if pair[0].n_out != pair[1].n_in {
            return Err(Error::Config(format!(
                "layer {i} outputs {} values but layer {} expects {}",
                pair[0].n_out,
                i + 1,
                pair[1].n_in
            )));
        }
    }
    Ok(())
}

/// Whether a step rewrites the weights or only reads them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateRule {
    SelfModify,
    /// Forward pass only; used by the hill-climbing baseline.
    Frozen,
}

/// Weight matrix of one self-referential layer, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights {
    dims: LayerDims,
    w: Vec<f64>,
}

impl LayerWeights {
    pub fn zeros(dims: LayerDims) -> Self {
        Self { dims, w: vec![0.0; dims.len()] }
    }

    pub fn from_vec(dims: LayerDims, w: Vec<f64>) -> Result<Self> {
        LayerDims::new(dims.n_in, dims.n_out)?;
        if w.len() != dims.len() {
            return Err(Error::Shape { expected: dims.len(), actual: w.len() });
        }
        Ok(Self { dims, w })
    }

    pub fn dims(&self) -> LayerDims {
        self.dims
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.w
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let n = self.dims.n_in;
        &self.w[row * n..(row + 1) * n]
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.w[row * self.dims.n_in + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.w[row * self.dims.n_in + col] = value;
    }

    pub fn is_finite(&self) -> bool {
        self.w.iter().all(|v| v.is_finite())
    }

    /// Runs one step in place. The output `y` is left in `scratch.y()`.
    /// Returns `false` if any output or updated weight is non-finite.
    pub fn step_in_place(&mut self, x: &[f64], scratch: &mut LayerScratch, rule: UpdateRule) -> bool {
        let LayerDims { n_in, n_out } = self.dims;
        debug_assert_eq!(x.len(), n_in);
        scratch.resize(self.dims);

        for (p, &xi) in scratch.psi_x.iter_mut().zip(x) {
            *p = squash(xi);
        }

        if rule == UpdateRule::Frozen {
            for (row, zi) in self.w.chunks_exact(n_in).zip(&mut scratch.z[..n_out]) {
                *zi = dot(row, &scratch.psi_x);
            }
            return all_finite(&scratch.z[..n_out]);
        }

        for (row, zi) in self.w.chunks_exact(n_in).zip(scratch.z.iter_mut()) {
            *zi = dot(row, &scratch.psi_x);
        }

        let (k, rest) = scratch.z[n_out..].split_at(n_in);
        let (q, rates) = rest.split_at(n_in);
        for ((pk, pq), (&ki, &qi)) in scratch.psi_k.iter_mut().zip(scratch.psi_q.iter_mut()).zip(k.iter().zip(q)) {
            *pk = squash(ki);
            *pq = squash(qi);
        }
        let mut block_rate = [0.0; RATE_ROWS];
        for (r, &b) in block_rate.iter_mut().zip(rates) {
            *r = sigmoid(b);
        }

        // Both responses are read from the pre-update matrix before any row is touched.
        for (row, (vb, v)) in self.w.chunks_exact(n_in).zip(scratch.v_key.iter_mut().zip(scratch.v_query.iter_mut())) {
            (*vb, *v) = dot2(row, &scratch.psi_k, &scratch.psi_q);
        }

        // With finite W, z, v and v_bar every increment is finite and smaller
        // than 2 in magnitude, so the rewritten matrix stays finite.
        if !(all_finite(&scratch.z) && all_finite(&scratch.v_key) && all_finite(&scratch.v_query)) {
            return false;
        }

        let boundaries = [n_out, n_out + n_in, n_out + 2 * n_in, self.dims.rows()];
        let mut start = 0;
        for (block, &end) in boundaries.iter().enumerate() {
            let rate = block_rate[block];
            for i in start..end {
                let delta = rate * (squash(scratch.v_query[i]) - squash(scratch.v_key[i]));
                let row = &mut self.w[i * n_in..(i + 1) * n_in];
                for (wij, &pk) in row.iter_mut().zip(&scratch.psi_k) {
                    *wij += delta * pk;
                }
            }
            start = end;
        }
        true
    }
}

#[inline]
fn all_finite(v: &[f64]) -> bool {
    v.iter().fold(true, |ok, x| ok & x.is_finite())
}

/// Reusable intermediate vectors for one layer.
#[derive(Debug, Clone, Default)]
pub struct LayerScratch {
    psi_x: Vec<f64>,
    z: Vec<f64>,
    psi_k: Vec<f64>,
    psi_q: Vec<f64>,
    v_key: Vec<f64>,
    v_query: Vec<f64>,
    n_out: usize,
}

impl LayerScratch {
    fn resize(&mut self, dims: LayerDims) {
        let rows = dims.rows();
        if self.z.len() == rows && self.psi_x.len() == dims.n_in {
            return;
        }
        self.psi_x.resize(dims.n_in, 0.0);
        self.z.resize(rows, 0.0);
        self.psi_k.resize(dims.n_in, 0.0);
        self.psi_q.resize(dims.n_in, 0.0);
        self.v_key.resize(rows, 0.0);
        self.v_query.resize(rows, 0.0);
        self.n_out = dims.n_out;
    }

    /// Output of the last step.
    pub fn y(&self) -> &[f64] {
        &self.z[..self.n_out]
    }

    /// Key of the last self-modifying step.
    pub fn key(&self) -> &[f64] {
        let n = self.psi_x.len();
        &self.z[self.n_out..self.n_out + n]
    }

    /// Query of the last self-modifying step.
    pub fn query(&self) -> &[f64] {
        let n = self.psi_x.len();
        &self.z[self.n_out + n..self.n_out + 2 * n]
    }
}

/// Dot product with four independent accumulators. The summation order is
/// fixed, so results are reproducible bit for bit.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let split = n - n % 4;
    let mut i = 0;
    while i < split {
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
        i += 4;
    }
    let mut tail = 0.0;
    while i < n {
        tail += a[i] * b[i];
        i += 1;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `(dot(a, b), dot(a, c))` with a single pass over `a`.
#[inline]
fn dot2(a: &[f64], b: &[f64], c: &[f64]) -> (f64, f64) {
    let n = a.len().min(b.len()).min(c.len());
    let (a, b, c) = (&a[..n], &b[..n], &c[..n]);
    let mut ab = [0.0f64; 4];
    let mut ac = [0.0f64; 4];
    let split = n - n % 4;
    let mut i = 0;
    while i < split {
        for l in 0..4 {
            ab[l] += a[i + l] * b[i + l];
            ac[l] += a[i + l] * c[i + l];
        }
        i += 4;
    }
    let (mut tb, mut tc) = (0.0, 0.0);
    while i < n {
        tb += a[i] * b[i];
        tc += a[i] * c[i];
        i += 1;
    }
    ((ab[0] + ab[1]) + (ab[2] + ab[3]) + tb, (ac[0] + ac[1]) + (ac[2] + ac[3]) + tc)
}

/// Hyperbolic tangent through a single `exp` call. Odd by construction,
/// exact at zero, and within a few 1e-16 of `f64::tanh` in absolute terms.
#[inline]
pub fn squash(x: f64) -> f64 {
    let e = (-2.0 * x.abs()).exp();
    ((1.0 - e) / (1.0 + e)).copysign(x)
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Pure form of a single layer step: returns the rewritten layer and `y`.
pub fn layer_step(layer: &LayerWeights, x: &[f64]) -> Result<(LayerWeights, Vec<f64>)> {
    if x.len() != layer.dims.n_in {
        return Err(Error::Shape { expected: layer.dims.n_in, actual: x.len() });
    }
    let mut next = layer.clone();
    let mut scratch = LayerScratch::default();
    if !next.step_in_place(x, &mut scratch, UpdateRule::SelfModify) {
        return Err(Error::NumericInstability { layer: 0 });
    }
    Ok((next, scratch.y().to_vec()))
}

/// The complete set of variables of one solution: an ordered stack of layers.
#[derive(Debug, Clone, PartialEq)]
pub struct NetParams {
    layers: Vec<LayerWeights>,
}

impl NetParams {
    pub fn new(layers: Vec<LayerWeights>) -> Result<Self> {
        let dims: Vec<_> = layers.iter().map(LayerWeights::dims).collect();
        check_chain(&dims)?;
        Ok(Self { layers })
    }

    pub fn zeros(dims: &[LayerDims]) -> Result<Self> {
        check_chain(dims)?;
        Ok(Self { layers: dims.iter().copied().map(LayerWeights::zeros).collect() })
    }

    pub fn layers(&self) -> &[LayerWeights] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [LayerWeights] {
        &mut self.layers
    }

    pub fn dims(&self) -> Vec<LayerDims> {
        self.layers.iter().map(LayerWeights::dims).collect()
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].dims.n_in
    }

    pub fn action_count(&self) -> usize {
        self.layers[self.layers.len() - 1].dims.n_out
    }

    pub fn num_weights(&self) -> usize {
        self.layers.iter().map(|l| l.w.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(LayerWeights::is_finite)
    }

    /// Runs every layer once, feeding each layer's `y` into the next, and
    /// returns the final `y` (the action logits).
    pub fn step<'s>(&mut self, x: &[f64], scratch: &'s mut NetScratch, rule: UpdateRule) -> Result<&'s [f64]> {
        if x.len() != self.input_width() {
            return Err(Error::Shape { expected: self.input_width(), actual: x.len() });
        }
        scratch.layers.resize_with(self.layers.len(), LayerScratch::default);
        let (first, rest) = scratch.layers.split_at_mut(1);
        if !self.layers[0].step_in_place(x, &mut first[0], rule) {
            return Err(Error::NumericInstability { layer: 0 });
        }
        let mut prev = &first[0];
        for (i, (layer, s)) in self.layers[1..].iter_mut().zip(rest.iter_mut()).enumerate() {
            if !layer.step_in_place(prev.y(), s, rule) {
                return Err(Error::NumericInstability { layer: i + 1 });
            }
            prev = s;
        }
        Ok(prev.y())
    }
}

/// Scratch space for [`NetParams::step`].
#[derive(Debug, Clone, Default)]
pub struct NetScratch {
    layers: Vec<LayerScratch>,
}

impl NetScratch {
    pub fn layer(&self, index: usize) -> &LayerScratch {
        &self.layers[index]
    }
}

/// Pure form of a network step: returns the rewritten parameters and the logits.
pub fn net_step(params: &NetParams, x: &[f64]) -> Result<(NetParams, Vec<f64>)> {
    let mut next = params.clone();
    let mut scratch = NetScratch::default();
    let logits = next.step(x, &mut scratch, UpdateRule::SelfModify)?.to_vec();
    Ok((next, logits))
}

/// Standard deviation of the (untruncated) initializer for a layer with `n_in` inputs.
pub fn init_std(n_in: usize) -> f64 {
    1.0 / (n_in as f64).sqrt()
}

/// Draws every entry of a layer from N(0, 1/n_in) truncated at two standard
/// deviations; out-of-range draws are resampled.
pub fn init_params<R: Rng + ?Sized>(dims: &[LayerDims], rng: &mut R) -> Result<NetParams> {
    check_chain(dims)?;
    let layers = dims
        .iter()
        .map(|&d| {
            let std = init_std(d.n_in);
            let w = (0..d.len())
                .map(|_| loop {
                    let z: f64 = rng.sample(StandardNormal);
                    if z.abs() <= INIT_TRUNCATION {
                        break z * std;
                    }
                })
                .collect();
            LayerWeights { dims: d, w }
        })
        .collect();
    Ok(NetParams { layers })
}

/// Softmax at temperature one.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= total);
    p
}

/// Samples an action index from `softmax(logits)`.
pub fn act<R: Rng + ?Sized>(logits: &[f64], rng: &mut R) -> usize {
    debug_assert!(!logits.is_empty());
    if logits.len() == 1 {
        return 0;
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = logits.iter().map(|&l| (l - max).exp()).sum();
    let mut u = rng.random::<f64>() * total;
    for (i, &l) in logits.iter().enumerate() {
        u -= (l - max).exp();
        if u < 0.0 {
            return i;
        }
    }
    logits.len() - 1
}

/// Which signals make up the network input, in order: observation, previous
/// reward, one-hot previous action, constant bias.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InputSpec {
    pub obs_dim: usize,
    pub feed_reward: bool,
    pub feed_prev_action: bool,
    pub include_bias: bool,
    pub action_count: usize,
}

impl InputSpec {
    pub fn new(obs_dim: usize, action_count: usize) -> Self {
        Self { obs_dim, feed_reward: false, feed_prev_action: false, include_bias: true, action_count }
    }

    pub fn with_reward(mut self, on: bool) -> Self {
        self.feed_reward = on;
        self
    }

    pub fn with_prev_action(mut self, on: bool) -> Self {
        self.feed_prev_action = on;
        self
    }

    pub fn with_bias(mut self, on: bool) -> Self {
        self.include_bias = on;
        self
    }

    pub fn width(&self) -> usize {
        self.obs_dim
            + usize::from(self.feed_reward)
            + if self.feed_prev_action { self.action_count } else { 0 }
            + usize::from(self.include_bias)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width() == 0 {
            return Err(Error::Config("network input would be empty".into()));
        }
        Ok(())
    }

    /// Writes the input vector into `out`, replacing its contents.
    pub fn fill(&self, obs: &[f64], prev_reward: f64, prev_action: Option<usize>, out: &mut Vec<f64>) -> Result<()> {
        if obs.len() != self.obs_dim {
            return Err(Error::Config(format!(
                "observation has {} entries, input spec expects {}",
                obs.len(),
                self.obs_dim
            )));
        }
        out.clear();
        out.extend_from_slice(obs);
        if self.feed_reward {
            out.push(prev_reward);
        }
        if self.feed_prev_action {
            let start = out.len();
            out.resize(start + self.action_count, 0.0);
            if let Some(a) = prev_action {
                if a >= self.action_count {
                    return Err(Error::InvalidAction { action: a, action_count: self.action_count });
                }
                out[start + a] = 1.0;
            }
        }
        if self.include_bias {
            out.push(1.0);
        }
        Ok(())
    }
}

pub fn build_input(spec: &InputSpec, obs: &[f64], prev_reward: f64, prev_action: Option<usize>) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(spec.width());
    spec.fill(obs, prev_reward, prev_action, &mut out)?;
    Ok(out)
}

/// Concatenates all layers, in order, row-major within each layer.
pub fn flatten_params(params: &NetParams) -> Vec<f64> {
    let mut out = Vec::with_capacity(params.num_weights());
    for layer in &params.layers {
        out.extend_from_slice(&layer.w);
    }
    out
}

pub fn flattened_len(dims: &[LayerDims]) -> usize {
    dims.iter().map(LayerDims::len).sum()
}

pub fn unflatten_params(dims: &[LayerDims], flat: &[f64]) -> Result<NetParams> {
    check_chain(dims)?;
    let expected = flattened_len(dims);
    if flat.len() != expected {
        return Err(Error::Shape { expected, actual: flat.len() });
    }
    let mut offset = 0;
    let layers = dims
        .iter()
        .map(|&d| {
            let w = flat[offset..offset + d.len()].to_vec();
            offset += d.len();
            LayerWeights { dims: d, w }
        })
        .collect();
    Ok(NetParams { layers })
}
