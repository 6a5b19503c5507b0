//! Single-layer LSTM with a linear output head.
//!
//! Gate equations, elementwise products written as `*`:
//!
//! ```text
//! i_t = sigmoid(W_xi x_t + W_hi h_{t-1} + b_i)
//! f_t = sigmoid(W_xf x_t + W_hf h_{t-1} + b_f)
//! g_t = tanh(W_xc x_t + W_hc h_{t-1} + b_c)
//! c_t = f_t * c_{t-1} + i_t * g_t
//! o_t = sigmoid(W_xo x_t + W_ho h_{t-1} + b_o)
//! h_t = o_t * tanh(c_t)
//! y   = w_y . h_T + b_y
//! ```

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    fn random<R: Rng>(rows: usize, cols: usize, bound: f64, rng: &mut R) -> Self {
        Self {
            rows,
            cols,
            data: (0..rows * cols)
                .map(|_| rng.random_range(-bound..bound))
                .collect(),
        }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    /// `out += self * v`
    fn mul_acc(&self, v: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            *o += row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    /// `out += self^T * v`
    fn mul_transpose_acc(&self, v: &[f64], out: &mut [f64]) {
        for (r, &vr) in v.iter().enumerate() {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * vr;
            }
        }
    }

    /// `self += a b^T`
    fn add_outer(&mut self, a: &[f64], b: &[f64]) {
        for (r, &ar) in a.iter().enumerate() {
            let row = &mut self.data[r * self.cols..(r + 1) * self.cols];
            for (x, bc) in row.iter_mut().zip(b) {
                *x += ar * bc;
            }
        }
    }
}

/// Weights of one gate: input weights, recurrent weights and bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub w_x: Matrix,
    pub w_h: Matrix,
    pub b: Vec<f64>,
}

impl Gate {
    fn zeros(hidden: usize, input: usize) -> Self {
        Self {
            w_x: Matrix::zeros(hidden, input),
            w_h: Matrix::zeros(hidden, hidden),
            b: vec![0.0; hidden],
        }
    }

    fn pre_activation(&self, x: &[f64], h: &[f64]) -> Vec<f64> {
        let mut a = self.b.clone();
        self.w_x.mul_acc(x, &mut a);
        self.w_h.mul_acc(h, &mut a);
        a
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub input_size: usize,
    pub hidden_size: usize,
    pub input_gate: Gate,
    pub forget_gate: Gate,
    pub cell_gate: Gate,
    pub output_gate: Gate,
    pub w_y: Vec<f64>,
    pub b_y: f64,
}

/// Hidden output and cell state after a step.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

/// Activations of one step, kept for backpropagation.
#[derive(Debug, Clone)]
struct StepCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    tanh_c: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl LstmParams {
    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        let gate = || Gate::zeros(hidden_size, input_size);
        Self {
            input_size,
            hidden_size,
            input_gate: gate(),
            forget_gate: gate(),
            cell_gate: gate(),
            output_gate: gate(),
            w_y: vec![0.0; hidden_size],
            b_y: 0.0,
        }
    }

    /// Uniform(-1/sqrt(hidden), 1/sqrt(hidden)) weights, forget-gate bias 1,
    /// zero output bias.
    pub fn init<R: Rng>(input_size: usize, hidden_size: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (hidden_size as f64).sqrt();
        let mut gate = |bias: f64| Gate {
            w_x: Matrix::random(hidden_size, input_size, bound, rng),
            w_h: Matrix::random(hidden_size, hidden_size, bound, rng),
            b: vec![bias; hidden_size],
        };
        let input_gate = gate(0.0);
        let forget_gate = gate(1.0);
        let cell_gate = gate(0.0);
        let output_gate = gate(0.0);
        let w_y = (0..hidden_size)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        Self {
            input_size,
            hidden_size,
            input_gate,
            forget_gate,
            cell_gate,
            output_gate,
            w_y,
            b_y: 0.0,
        }
    }

    fn gates(&self) -> [&Gate; 4] {
        [
            &self.input_gate,
            &self.forget_gate,
            &self.cell_gate,
            &self.output_gate,
        ]
    }

    /// Every parameter tensor as a flat slice, in a fixed order.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::with_capacity(14);
        for g in self.gates() {
            out.push(&g.w_x.data);
            out.push(&g.w_h.data);
            out.push(&g.b);
        }
        out.push(&self.w_y);
        out.push(std::slice::from_ref(&self.b_y));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::with_capacity(14);
        for g in [
            &mut self.input_gate,
            &mut self.forget_gate,
            &mut self.cell_gate,
            &mut self.output_gate,
        ] {
            out.push(&mut g.w_x.data);
            out.push(&mut g.w_h.data);
            out.push(&mut g.b);
        }
        out.push(&mut self.w_y);
        out.push(std::slice::from_mut(&mut self.b_y));
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.iter().all(|x| x.is_finite()))
    }

    /// `self += alpha * other`
    pub fn add_scaled(&mut self, other: &LstmParams, alpha: f64) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += alpha * s;
            }
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x *= alpha);
        }
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_size {
            return Err(Error::DimensionMismatch(format!(
                "input has {} entries, expected {}",
                x.len(),
                self.input_size
            )));
        }
        Ok(())
    }

    fn check_shapes(&self) -> Result<()> {
        let (h, n) = (self.hidden_size, self.input_size);
        let ok = self.gates().iter().all(|g| {
            g.w_x.rows == h
                && g.w_x.cols == n
                && g.w_x.data.len() == h * n
                && g.w_h.rows == h
                && g.w_h.cols == h
                && g.w_h.data.len() == h * h
                && g.b.len() == h
        }) && self.w_y.len() == h;
        if ok {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(
                "parameter tensors disagree with hidden/input sizes".into(),
            ))
        }
    }

    fn step(&self, x: &[f64], state: &LstmState) -> StepCache {
        let map = |v: Vec<f64>, f: fn(f64) -> f64| v.into_iter().map(f).collect::<Vec<_>>();
        let i = map(self.input_gate.pre_activation(x, &state.h), sigmoid);
        let f = map(self.forget_gate.pre_activation(x, &state.h), sigmoid);
        let g = map(self.cell_gate.pre_activation(x, &state.h), f64::tanh);
        let o = map(self.output_gate.pre_activation(x, &state.h), sigmoid);
        let c: Vec<f64> = (0..self.hidden_size)
            .map(|j| f[j] * state.c[j] + i[j] * g[j])
            .collect();
        StepCache {
            x: x.to_vec(),
            h_prev: state.h.clone(),
            c_prev: state.c.clone(),
            tanh_c: c.iter().map(|v| v.tanh()).collect(),
            i,
            f,
            g,
            o,
        }
    }
}

impl StepCache {
    fn state(&self) -> LstmState {
        let n = self.i.len();
        LstmState {
            c: (0..n)
                .map(|j| self.f[j] * self.c_prev[j] + self.i[j] * self.g[j])
                .collect(),
            h: (0..n).map(|j| self.o[j] * self.tanh_c[j]).collect(),
        }
    }
}

/// One LSTM step.
pub fn lstm_cell(params: &LstmParams, x: &[f64], state: &LstmState) -> Result<LstmState> {
    params.check_shapes()?;
    params.check_input(x)?;
    if state.h.len() != params.hidden_size || state.c.len() != params.hidden_size {
        return Err(Error::DimensionMismatch(format!(
            "state has sizes ({}, {}), expected {}",
            state.h.len(),
            state.c.len(),
            params.hidden_size
        )));
    }
    Ok(params.step(x, state).state())
}

fn run(params: &LstmParams, sequence: &[Vec<f64>]) -> Result<(f64, Vec<StepCache>)> {
    params.check_shapes()?;
    if sequence.is_empty() {
        return Err(Error::TooFewObservations { needed: 1, got: 0 });
    }
    let mut state = LstmState::zeros(params.hidden_size);
    let mut caches = Vec::with_capacity(sequence.len());
    for x in sequence {
        params.check_input(x)?;
        let cache = params.step(x, &state);
        state = cache.state();
        caches.push(cache);
    }
    let prediction = params.b_y
        + params
            .w_y
            .iter()
            .zip(&state.h)
            .map(|(w, h)| w * h)
            .sum::<f64>();
    Ok((prediction, caches))
}

/// Run the sequence from a zero state; the prediction is the output head
/// applied to the final hidden state.
pub fn lstm_forward(params: &LstmParams, sequence: &[Vec<f64>]) -> Result<(f64, Vec<LstmState>)> {
    let (prediction, caches) = run(params, sequence)?;
    Ok((prediction, caches.iter().map(StepCache::state).collect()))
}

/// Backpropagation through time for the loss `(prediction - target)^2`.
/// Returns the gradient (shaped like the parameters) and the loss.
pub fn lstm_gradients(
    params: &LstmParams,
    sequence: &[Vec<f64>],
    target: f64,
) -> Result<(LstmParams, f64)> {
    let (prediction, caches) = run(params, sequence)?;
    let err = prediction - target;
    let loss = err * err;
    if !loss.is_finite() {
        return Err(Error::NonFinite("loss".into()));
    }

    let n = params.hidden_size;
    let mut grad = LstmParams::zeros(params.input_size, n);
    let d_pred = 2.0 * err;
    let last = caches.last().expect("non-empty sequence").state();
    grad.b_y = d_pred;
    for j in 0..n {
        grad.w_y[j] = d_pred * last.h[j];
    }

    let mut dh: Vec<f64> = params.w_y.iter().map(|w| d_pred * w).collect();
    let mut dc = vec![0.0; n];
    let mut da = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];

    for cache in caches.iter().rev() {
        for j in 0..n {
            let tc = cache.tanh_c[j];
            let d_o = dh[j] * tc;
            dc[j] += dh[j] * cache.o[j] * (1.0 - tc * tc);
            let d_i = dc[j] * cache.g[j];
            let d_g = dc[j] * cache.i[j];
            let d_f = dc[j] * cache.c_prev[j];
            da[0][j] = d_i * cache.i[j] * (1.0 - cache.i[j]);
            da[1][j] = d_f * cache.f[j] * (1.0 - cache.f[j]);
            da[2][j] = d_g * (1.0 - cache.g[j] * cache.g[j]);
            da[3][j] = d_o * cache.o[j] * (1.0 - cache.o[j]);
            dc[j] *= cache.f[j];
        }

        let mut dh_prev = vec![0.0; n];
        let gate_grads = [
            &mut grad.input_gate,
            &mut grad.forget_gate,
            &mut grad.cell_gate,
            &mut grad.output_gate,
        ];
        for ((g, p), a) in gate_grads.into_iter().zip(params.gates()).zip(&da) {
            g.w_x.add_outer(a, &cache.x);
            g.w_h.add_outer(a, &cache.h_prev);
            for (b, v) in g.b.iter_mut().zip(a) {
                *b += v;
            }
            p.w_h.mul_transpose_acc(a, &mut dh_prev);
        }
        dh = dh_prev;

        if dh.iter().chain(&dc).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("backpropagated state gradient".into()));
        }
    }
    Ok((grad, loss))
}
