//! Single LSTM layer with full backpropagation through time.
//!
//! Gate pre-activations are `x·W_ihᵀ + h·W_hhᵀ + b`, packed as
//! `[input, forget, candidate, output]` blocks of width `H`.

use super::activation::sigmoid_scalar;
use super::linalg::{gemm_nn, gemm_nt, gemm_tn};
use super::tensor::{expect_axis, Tensor};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams<S> {
    /// `[4H, D]`
    pub w_ih: Tensor<S>,
    /// `[4H, H]`
    pub w_hh: Tensor<S>,
    /// `[4H]`
    pub bias: Tensor<S>,
}

impl<S: Scalar> LstmParams<S> {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmParams {
            w_ih: Tensor::zeros(&[4 * hidden, input]),
            w_hh: Tensor::zeros(&[4 * hidden, hidden]),
            bias: Tensor::zeros(&[4 * hidden]),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_hh.dim(1)
    }

    pub fn input(&self) -> usize {
        self.w_ih.dim(1)
    }

    fn validate(&self) -> Result<()> {
        const OP: &str = "lstm_layer";
        let h = self.hidden();
        expect_axis(OP, "W_hh rows", 4 * h, self.w_hh.dim(0))?;
        expect_axis(OP, "W_ih rows", 4 * h, self.w_ih.dim(0))?;
        expect_axis(OP, "bias", 4 * h, self.bias.numel())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstmOutput<S> {
    /// `[N, T, H]` (or `[T, H]` for an unbatched input).
    pub hidden: Tensor<S>,
    /// `[N, H]`
    pub h_final: Tensor<S>,
    /// `[N, H]`
    pub c_final: Tensor<S>,
}

/// Activations saved by the forward pass for backpropagation.
#[derive(Clone, Debug)]
pub struct LstmTrace<S> {
    batch: usize,
    steps: usize,
    /// Per step, `[N, 4H]` post-activation gates.
    gates: Vec<Vec<S>>,
    /// `T + 1` hidden states, index 0 is the initial state.
    h: Vec<Vec<S>>,
    /// `T + 1` cell states.
    c: Vec<Vec<S>>,
    /// Per step, `tanh(c_t)`.
    tanh_c: Vec<Vec<S>>,
}

pub struct LstmGrads<S> {
    pub d_input: Tensor<S>,
    pub params: LstmParams<S>,
    pub d_h0: Tensor<S>,
    pub d_c0: Tensor<S>,
}

fn seq_dims<S: Scalar>(x: &Tensor<S>) -> Result<(usize, usize, usize)> {
    match *x.shape() {
        [t, d] => Ok((1, t, d)),
        [n, t, d] => Ok((n, t, d)),
        _ => Err(Error::dim("lstm_layer", format!("expected [N, T, D] or [T, D], got {:?}", x.shape()))),
    }
}

pub fn lstm_layer<S: Scalar>(
    inputs: &Tensor<S>,
    params: &LstmParams<S>,
    initial: Option<(&Tensor<S>, &Tensor<S>)>,
) -> Result<LstmOutput<S>> {
    lstm_forward(inputs, params, initial).map(|(out, _)| out)
}

pub fn lstm_forward<S: Scalar>(
    inputs: &Tensor<S>,
    params: &LstmParams<S>,
    initial: Option<(&Tensor<S>, &Tensor<S>)>,
) -> Result<(LstmOutput<S>, LstmTrace<S>)> {
    const OP: &str = "lstm_layer";
    params.validate()?;
    let (n, steps, d) = seq_dims(inputs)?;
    if steps == 0 {
        return Err(Error::param(OP, "empty sequence"));
    }
    expect_axis(OP, "D (input features)", params.input(), d)?;
    let h = params.hidden();
    let g4 = 4 * h;

    let (h0, c0) = match initial {
        Some((h0, c0)) => {
            expect_axis(OP, "initial hidden", n * h, h0.numel())?;
            expect_axis(OP, "initial cell", n * h, c0.numel())?;
            (h0.data().to_vec(), c0.data().to_vec())
        }
        None => (vec![S::zero(); n * h], vec![S::zero(); n * h]),
    };

    // Input projections for every (item, step) row at once.
    let mut zx = vec![S::zero(); n * steps * g4];
    gemm_nt(n * steps, d, g4, inputs.data(), params.w_ih.data(), S::zero(), &mut zx);

    let mut trace = LstmTrace {
        batch: n,
        steps,
        gates: Vec::with_capacity(steps),
        h: vec![h0],
        c: vec![c0],
        tanh_c: Vec::with_capacity(steps),
    };
    let mut hidden = vec![S::zero(); n * steps * h];
    let bias = params.bias.data();
    for t in 0..steps {
        let mut z = vec![S::zero(); n * g4];
        for i in 0..n {
            let row = &mut z[i * g4..(i + 1) * g4];
            let src = &zx[(i * steps + t) * g4..(i * steps + t + 1) * g4];
            for ((dst, &a), &b) in row.iter_mut().zip(src).zip(bias) {
                *dst = a + b;
            }
        }
        gemm_nt(n, h, g4, &trace.h[t], params.w_hh.data(), S::one(), &mut z);

        let c_prev = &trace.c[t];
        let mut c = vec![S::zero(); n * h];
        let mut hn = vec![S::zero(); n * h];
        let mut tc = vec![S::zero(); n * h];
        for i in 0..n {
            let zi = &mut z[i * g4..(i + 1) * g4];
            for j in 0..h {
                let ig = sigmoid_scalar(zi[j]);
                let fg = sigmoid_scalar(zi[h + j]);
                let gg = zi[2 * h + j].tanh();
                let og = sigmoid_scalar(zi[3 * h + j]);
                zi[j] = ig;
                zi[h + j] = fg;
                zi[2 * h + j] = gg;
                zi[3 * h + j] = og;
                let k = i * h + j;
                c[k] = fg * c_prev[k] + ig * gg;
                tc[k] = c[k].tanh();
                hn[k] = og * tc[k];
            }
            hidden[(i * steps + t) * h..(i * steps + t + 1) * h].copy_from_slice(&hn[i * h..(i + 1) * h]);
        }
        trace.gates.push(z);
        trace.c.push(c);
        trace.h.push(hn);
        trace.tanh_c.push(tc);
    }

    let hidden_shape = if inputs.rank() == 2 { vec![steps, h] } else { vec![n, steps, h] };
    let out = LstmOutput {
        hidden: Tensor::new(&hidden_shape, hidden)?,
        h_final: Tensor::new(&[n, h], trace.h[steps].clone())?,
        c_final: Tensor::new(&[n, h], trace.c[steps].clone())?,
    };
    Ok((out, trace))
}

/// Backpropagation through time given the gradient w.r.t. every hidden output.
pub fn lstm_backward<S: Scalar>(
    inputs: &Tensor<S>,
    params: &LstmParams<S>,
    trace: &LstmTrace<S>,
    d_hidden: &Tensor<S>,
) -> Result<LstmGrads<S>> {
    const OP: &str = "lstm_backward";
    let (n, steps, d) = seq_dims(inputs)?;
    let h = params.hidden();
    let g4 = 4 * h;
    expect_axis(OP, "batch", trace.batch, n)?;
    expect_axis(OP, "steps", trace.steps, steps)?;
    expect_axis(OP, "upstream", n * steps * h, d_hidden.numel())?;

    let dh_all = d_hidden.data();
    let mut dz_all = vec![S::zero(); n * steps * g4];
    let mut d_w_hh = Tensor::zeros(params.w_hh.shape());
    let mut d_bias = Tensor::zeros(&[g4]);
    let mut dh_next = vec![S::zero(); n * h];
    let mut dc_next = vec![S::zero(); n * h];
    let mut dz = vec![S::zero(); n * g4];

    for t in (0..steps).rev() {
        let gates = &trace.gates[t];
        let c_prev = &trace.c[t];
        let tc = &trace.tanh_c[t];
        for i in 0..n {
            for j in 0..h {
                let k = i * h + j;
                let gi = &gates[i * g4..(i + 1) * g4];
                let (ig, fg, gg, og) = (gi[j], gi[h + j], gi[2 * h + j], gi[3 * h + j]);
                let dh = dh_all[(i * steps + t) * h + j] + dh_next[k];
                let dc = dh * og * (S::one() - tc[k] * tc[k]) + dc_next[k];
                let row = &mut dz[i * g4..(i + 1) * g4];
                row[j] = dc * gg * ig * (S::one() - ig);
                row[h + j] = dc * c_prev[k] * fg * (S::one() - fg);
                row[2 * h + j] = dc * ig * (S::one() - gg * gg);
                row[3 * h + j] = dh * tc[k] * og * (S::one() - og);
                dc_next[k] = dc * fg;
            }
        }
        gemm_tn(g4, n, h, &dz, &trace.h[t], S::one(), d_w_hh.data_mut());
        gemm_nn(n, g4, h, &dz, params.w_hh.data(), S::zero(), &mut dh_next);
        for i in 0..n {
            let row = &dz[i * g4..(i + 1) * g4];
            dz_all[(i * steps + t) * g4..(i * steps + t + 1) * g4].copy_from_slice(row);
            for (b, &g) in d_bias.data_mut().iter_mut().zip(row) {
                *b += g;
            }
        }
    }

    let mut d_input = Tensor::zeros(inputs.shape());
    gemm_nn(n * steps, g4, d, &dz_all, params.w_ih.data(), S::zero(), d_input.data_mut());
    let mut d_w_ih = Tensor::zeros(params.w_ih.shape());
    gemm_tn(g4, n * steps, d, &dz_all, inputs.data(), S::zero(), d_w_ih.data_mut());

    Ok(LstmGrads {
        d_input,
        params: LstmParams { w_ih: d_w_ih, w_hh: d_w_hh, bias: d_bias },
        d_h0: Tensor::new(&[n, h], dh_next)?,
        d_c0: Tensor::new(&[n, h], dc_next)?,
    })
}
