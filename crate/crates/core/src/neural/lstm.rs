//! A single LSTM direction with backpropagation through time.
//!
//! Gate weights are packed gate-major: rows `[0, u)` are the input gate,
//! then forget, output and candidate.

use rand::Rng;

use super::tensor::{add_assign, sigmoid, Matrix};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gate {
    Input = 0,
    Forget = 1,
    Output = 2,
    Candidate = 3,
}

impl Gate {
    pub const ALL: [Gate; 4] = [Gate::Input, Gate::Forget, Gate::Output, Gate::Candidate];
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstmCellParams<F> {
    pub units: usize,
    pub in_dim: usize,
    /// `4·units × in_dim`
    pub w_input: Matrix<F>,
    /// `4·units × units`
    pub w_recurrent: Matrix<F>,
    /// `4·units`
    pub bias: Vec<F>,
}

impl<F: Scalar> LstmCellParams<F> {
    pub fn zeros(units: usize, in_dim: usize) -> Self {
        Self {
            units,
            in_dim,
            w_input: Matrix::zeros(4 * units, in_dim),
            w_recurrent: Matrix::zeros(4 * units, units),
            bias: vec![F::zero(); 4 * units],
        }
    }

    /// Per-gate Glorot-uniform weights, zero biases except the forget gate at 1.
    pub(crate) fn init<R: Rng>(units: usize, in_dim: usize, rng: &mut R) -> Self {
        let mut w_input = Matrix::zeros(4 * units, in_dim);
        let mut w_recurrent = Matrix::zeros(4 * units, units);
        for g in Gate::ALL {
            let rows = g as usize * units..(g as usize + 1) * units;
            let wi = Matrix::<F>::glorot(units, in_dim, in_dim, units, rng);
            let wr = Matrix::<F>::glorot(units, units, units, units, rng);
            w_input.as_mut_slice()[rows.start * in_dim..rows.end * in_dim].copy_from_slice(wi.as_slice());
            w_recurrent.as_mut_slice()[rows.start * units..rows.end * units].copy_from_slice(wr.as_slice());
        }
        let mut bias = vec![F::zero(); 4 * units];
        bias[units..2 * units].iter_mut().for_each(|b| *b = F::one());
        Self {
            units,
            in_dim,
            w_input,
            w_recurrent,
            bias,
        }
    }

    pub fn gate_bias(&self, gate: Gate) -> &[F] {
        let u = self.units;
        &self.bias[gate as usize * u..(gate as usize + 1) * u]
    }

    /// Rows of the input weights belonging to `gate`, row-major.
    pub fn gate_input_weights(&self, gate: Gate) -> &[F] {
        let n = self.units * self.in_dim;
        &self.w_input.as_slice()[gate as usize * n..(gate as usize + 1) * n]
    }

    pub fn gate_recurrent_weights(&self, gate: Gate) -> &[F] {
        let n = self.units * self.units;
        &self.w_recurrent.as_slice()[gate as usize * n..(gate as usize + 1) * n]
    }

    pub fn param_count(&self) -> usize {
        self.w_input.as_slice().len() + self.w_recurrent.as_slice().len() + self.bias.len()
    }
}

/// Activations saved by a forward step for the backward pass.
#[derive(Clone, Debug)]
pub(crate) struct StepCache<F> {
    x: Vec<F>,
    h_prev: Vec<F>,
    c_prev: Vec<F>,
    /// Activated gates `[i, f, o, g]`.
    gates: Vec<F>,
    tanh_c: Vec<F>,
    pub(crate) c: Vec<F>,
    pub(crate) h: Vec<F>,
}

fn step_cached<F: Scalar>(cell: &LstmCellParams<F>, x: &[F], h_prev: &[F], c_prev: &[F]) -> StepCache<F> {
    let u = cell.units;
    let mut gates = cell.bias.clone();
    cell.w_input.matvec_add(x, &mut gates);
    cell.w_recurrent.matvec_add(h_prev, &mut gates);
    for z in &mut gates[..3 * u] {
        *z = sigmoid(*z);
    }
    for z in &mut gates[3 * u..] {
        *z = z.tanh();
    }
    let (i, rest) = gates.split_at(u);
    let (f, rest) = rest.split_at(u);
    let (o, g) = rest.split_at(u);
    let c: Vec<F> = (0..u).map(|k| f[k] * c_prev[k] + i[k] * g[k]).collect();
    let tanh_c: Vec<F> = c.iter().map(|v| v.tanh()).collect();
    let h = (0..u).map(|k| o[k] * tanh_c[k]).collect();
    StepCache {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        c_prev: c_prev.to_vec(),
        gates,
        tanh_c,
        c,
        h,
    }
}

/// One LSTM step: returns `(h, c)`.
pub fn lstm_step<F: Scalar>(
    cell: &LstmCellParams<F>,
    x: &[F],
    h_prev: &[F],
    c_prev: &[F],
) -> Result<(Vec<F>, Vec<F>)> {
    if x.len() != cell.in_dim || h_prev.len() != cell.units || c_prev.len() != cell.units {
        return Err(Error::ShapeMismatch(format!(
            "lstm step expects x[{}], h[{}], c[{}]; got x[{}], h[{}], c[{}]",
            cell.in_dim,
            cell.units,
            cell.units,
            x.len(),
            h_prev.len(),
            c_prev.len()
        )));
    }
    let cache = step_cached(cell, x, h_prev, c_prev);
    Ok((cache.h, cache.c))
}

/// Runs the cell over `xs` in the given order from zero state.
pub(crate) fn run_sequence<F: Scalar>(cell: &LstmCellParams<F>, xs: &[&[F]]) -> Vec<StepCache<F>> {
    let zeros = vec![F::zero(); cell.units];
    let mut caches: Vec<StepCache<F>> = Vec::with_capacity(xs.len());
    for x in xs {
        let (h_prev, c_prev) = match caches.last() {
            Some(prev) => (prev.h.as_slice(), prev.c.as_slice()),
            None => (zeros.as_slice(), zeros.as_slice()),
        };
        let step = step_cached(cell, x, h_prev, c_prev);
        caches.push(step);
    }
    caches
}

/// Backpropagates through a sequence run by [`run_sequence`].
///
/// `dh_out(s)` is the external gradient on the hidden state emitted at step
/// `s` (in processing order). Parameter gradients accumulate into `grads`;
/// the returned vectors are gradients w.r.t. each step's input.
pub(crate) fn backward_sequence<F: Scalar>(
    cell: &LstmCellParams<F>,
    caches: &[StepCache<F>],
    dh_out: impl Fn(usize) -> Option<Vec<F>>,
    grads: &mut LstmCellParams<F>,
) -> Vec<Vec<F>> {
    let u = cell.units;
    let mut dh_next = vec![F::zero(); u];
    let mut dc_next = vec![F::zero(); u];
    let mut dxs = vec![Vec::new(); caches.len()];
    let mut da = vec![F::zero(); 4 * u];
    for (s, cache) in caches.iter().enumerate().rev() {
        let mut dh = std::mem::replace(&mut dh_next, vec![F::zero(); u]);
        if let Some(ext) = dh_out(s) {
            add_assign(&mut dh, &ext);
        }
        let (i, rest) = cache.gates.split_at(u);
        let (f, rest) = rest.split_at(u);
        let (o, g) = rest.split_at(u);
        for k in 0..u {
            let one = F::one();
            let dc = dc_next[k] + dh[k] * o[k] * (one - cache.tanh_c[k] * cache.tanh_c[k]);
            let d_o = dh[k] * cache.tanh_c[k];
            let d_i = dc * g[k];
            let d_f = dc * cache.c_prev[k];
            let d_g = dc * i[k];
            dc_next[k] = dc * f[k];
            da[k] = d_i * i[k] * (one - i[k]);
            da[u + k] = d_f * f[k] * (one - f[k]);
            da[2 * u + k] = d_o * o[k] * (one - o[k]);
            da[3 * u + k] = d_g * (one - g[k] * g[k]);
        }
        grads.w_input.outer_add(&da, &cache.x);
        grads.w_recurrent.outer_add(&da, &cache.h_prev);
        add_assign(&mut grads.bias, &da);
        let mut dx = vec![F::zero(); cell.in_dim];
        cell.w_input.matvec_t_add(&da, &mut dx);
        cell.w_recurrent.matvec_t_add(&da, &mut dh_next);
        dxs[s] = dx;
    }
    dxs
}
