//! Dense feed-forward networks stored in a [`ParamSet`].
//!
//! A network with `L` layers owns `2L` entries, `l{i}.weight` with shape
//! `[in, out]` and `l{i}.bias` with shape `[out]`, in layer order. Hidden
//! layers use the configured activation, the output layer is affine.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::matrix::{gemm, Op};
use super::{Matrix, NnError, ParamSet, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    fn apply<T: Real>(self, x: T) -> T {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => {
                if x > T::zero() {
                    x
                } else {
                    T::zero()
                }
            }
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation output `y`.
    #[inline]
    fn derivative_from_output<T: Real>(self, y: T) -> T {
        match self {
            Activation::Tanh => T::one() - y * y,
            Activation::Relu => {
                if y > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Identity => T::one(),
        }
    }
}

/// Orthogonal initialization of a `[fan_in, fan_out]` weight matrix.
pub fn orthogonal<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, gain: f64, rng: &mut R) -> Vec<f64> {
    let (tall, short) = (fan_in.max(fan_out), fan_in.min(fan_out));
    let gauss = DMatrix::<f64>::from_fn(tall, short, |_, _| rng.sample(StandardNormal));
    let qr = gauss.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..short {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    let mut out = vec![0.0; fan_in * fan_out];
    for i in 0..fan_in {
        for j in 0..fan_out {
            let v = if fan_in >= fan_out { q[(i, j)] } else { q[(j, i)] };
            out[i * fan_out + j] = gain * v;
        }
    }
    out
}

/// Builds MLP parameters for `sizes = [in, h1, ..., out]`.
///
/// Hidden weights get orthogonal init with `hidden_gain`, the output layer
/// uses `output_gain`; biases start at zero.
pub fn init_mlp<T: Real, R: Rng + ?Sized>(
    sizes: &[usize],
    hidden_gain: f64,
    output_gain: f64,
    rng: &mut R,
) -> ParamSet<T> {
    assert!(sizes.len() >= 2, "an MLP needs at least input and output sizes");
    let mut params = ParamSet::new();
    let last = sizes.len() - 2;
    for (i, pair) in sizes.windows(2).enumerate() {
        let gain = if i == last { output_gain } else { hidden_gain };
        let w = orthogonal(pair[0], pair[1], gain, rng);
        params
            .push(
                format!("l{i}.weight"),
                vec![pair[0], pair[1]],
                w.into_iter().map(T::of).collect(),
            )
            .expect("fresh names");
        params
            .push(format!("l{i}.bias"), vec![pair[1]], vec![T::zero(); pair[1]])
            .expect("fresh names");
    }
    params
}

/// Checks the layer layout and returns `(in, out)` per layer.
pub fn layer_dims<T: Real>(params: &ParamSet<T>) -> Result<Vec<(usize, usize)>, NnError> {
    if params.is_empty() || params.len() % 2 != 0 {
        return Err(NnError::Config(format!(
            "MLP parameter set must hold weight/bias pairs, found {} entries",
            params.len()
        )));
    }
    let mut dims = Vec::with_capacity(params.len() / 2);
    for layer in 0..params.len() / 2 {
        let w = params.entry(2 * layer);
        let b = params.entry(2 * layer + 1);
        if w.shape.len() != 2 || b.shape.len() != 1 || w.shape[1] != b.shape[0] {
            return Err(NnError::Config(format!(
                "layer {layer}: weight shape {:?} and bias shape {:?} are inconsistent",
                w.shape, b.shape
            )));
        }
        if let Some(&(_, prev_out)) = dims.last() {
            if prev_out != w.shape[0] {
                return Err(NnError::Config(format!(
                    "layer {layer}: expects {} inputs but previous layer produces {prev_out}",
                    w.shape[0]
                )));
            }
        }
        dims.push((w.shape[0], w.shape[1]));
    }
    Ok(dims)
}

/// Layer outputs recorded by a forward pass, consumed by backward.
#[derive(Debug, Clone)]
pub struct Tape<T> {
    outputs: Vec<Matrix<T>>,
}

impl<T: Real> Tape<T> {
    pub fn output(&self) -> &Matrix<T> {
        self.outputs.last().expect("tape has at least one layer")
    }

    pub fn into_output(mut self) -> Matrix<T> {
        self.outputs.pop().expect("tape has at least one layer")
    }
}

pub fn mlp_forward_tape<T: Real>(
    params: &ParamSet<T>,
    input: &Matrix<T>,
    hidden: Activation,
) -> Result<Tape<T>, NnError> {
    let dims = layer_dims(params)?;
    if input.cols() != dims[0].0 {
        return Err(NnError::Config(format!(
            "layer 0: input has {} columns, expected {}",
            input.cols(),
            dims[0].0
        )));
    }
    let batch = input.rows();
    let mut outputs: Vec<Matrix<T>> = Vec::with_capacity(dims.len());
    for (layer, &(fan_in, fan_out)) in dims.iter().enumerate() {
        let x = if layer == 0 { input } else { &outputs[layer - 1] };
        let bias = params.values(2 * layer + 1);
        let mut y = Matrix::zeros(batch, fan_out);
        for r in 0..batch {
            y.row_mut(r).copy_from_slice(bias);
        }
        gemm(
            x.as_slice(),
            (batch, fan_in),
            Op::N,
            params.values(2 * layer),
            (fan_in, fan_out),
            Op::N,
            T::one(),
            y.as_mut_slice(),
        );
        let act = if layer + 1 == dims.len() {
            Activation::Identity
        } else {
            hidden
        };
        if act != Activation::Identity {
            for v in y.as_mut_slice() {
                *v = act.apply(*v);
            }
        }
        outputs.push(y);
    }
    Ok(Tape { outputs })
}

/// Pure forward pass: `[batch × in] → [batch × out]`.
pub fn mlp_forward<T: Real>(
    params: &ParamSet<T>,
    input: &Matrix<T>,
    hidden: Activation,
) -> Result<Matrix<T>, NnError> {
    Ok(mlp_forward_tape(params, input, hidden)?.into_output())
}

/// Backward pass from a recorded tape.
///
/// Returns gradients of `sum(upstream ⊙ output)` with respect to every
/// parameter and to the input.
pub fn mlp_backward_tape<T: Real>(
    params: &ParamSet<T>,
    input: &Matrix<T>,
    tape: &Tape<T>,
    upstream: &Matrix<T>,
    hidden: Activation,
) -> Result<(ParamSet<T>, Matrix<T>), NnError> {
    let dims = layer_dims(params)?;
    let out = tape.output();
    if upstream.rows() != out.rows() || upstream.cols() != out.cols() {
        return Err(NnError::Config(format!(
            "upstream gradient is {}x{}, network output is {}x{}",
            upstream.rows(),
            upstream.cols(),
            out.rows(),
            out.cols()
        )));
    }
    let batch = input.rows();
    let mut grads = params.zeros_like();
    let mut delta = upstream.clone();
    for layer in (0..dims.len()).rev() {
        let (fan_in, fan_out) = dims[layer];
        if layer + 1 != dims.len() && hidden != Activation::Identity {
            for (d, &y) in delta
                .as_mut_slice()
                .iter_mut()
                .zip(tape.outputs[layer].as_slice())
            {
                *d *= hidden.derivative_from_output(y);
            }
        }
        let x = if layer == 0 {
            input
        } else {
            &tape.outputs[layer - 1]
        };
        gemm(
            x.as_slice(),
            (batch, fan_in),
            Op::T,
            delta.as_slice(),
            (batch, fan_out),
            Op::N,
            T::zero(),
            grads.values_mut(2 * layer),
        );
        let db = grads.values_mut(2 * layer + 1);
        for r in 0..batch {
            for (acc, &d) in db.iter_mut().zip(delta.row(r)) {
                *acc += d;
            }
        }
        let mut prev = Matrix::zeros(batch, fan_in);
        gemm(
            delta.as_slice(),
            (batch, fan_out),
            Op::N,
            params.values(2 * layer),
            (fan_in, fan_out),
            Op::T,
            T::zero(),
            prev.as_mut_slice(),
        );
        delta = prev;
    }
    Ok((grads, delta))
}

/// Forward and backward in one call.
pub fn mlp_backward<T: Real>(
    params: &ParamSet<T>,
    input: &Matrix<T>,
    upstream: &Matrix<T>,
    hidden: Activation,
) -> Result<(ParamSet<T>, Matrix<T>), NnError> {
    let tape = mlp_forward_tape(params, input, hidden)?;
    mlp_backward_tape(params, input, &tape, upstream, hidden)
}
