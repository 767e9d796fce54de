use super::replay::SacBatch;
use crate::agent::TrainError;
use crate::nn::dist::{one_minus_tanh_sq, SQUASH_EPS};
use crate::nn::{
    mlp_backward_tape, mlp_forward, mlp_forward_tape, squashed_sample_and_log_prob, Activation,
    Matrix, NnError, ParamSet, Real, Tape,
};

pub const HIDDEN: Activation = Activation::Relu;

/// Clamp range for the actor's log standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogStdBounds {
    pub min: f64,
    pub max: f64,
}

/// Actor forward pass split into mean and clamped log-std columns.
struct ActorHeads<T> {
    tape: Tape<T>,
    mean: Matrix<T>,
    log_std: Matrix<T>,
    /// Whether each raw log-std lay inside the clamp range.
    in_bounds: Vec<bool>,
}

fn actor_heads<T: Real>(
    actor: &ParamSet<T>,
    observations: &Matrix<T>,
    bounds: LogStdBounds,
) -> Result<ActorHeads<T>, TrainError> {
    let tape = mlp_forward_tape(actor, observations, HIDDEN)?;
    let out = tape.output();
    if out.cols() % 2 != 0 {
        return Err(TrainError::Config(format!(
            "actor must output [mean, log_std] pairs, got {} columns",
            out.cols()
        )));
    }
    let d = out.cols() / 2;
    let mean = out.columns(0, d);
    let raw = out.columns(d, d);
    let (lo, hi) = (T::of(bounds.min), T::of(bounds.max));
    let in_bounds = raw.as_slice().iter().map(|&x| x >= lo && x <= hi).collect();
    let log_std = raw.map(|x| x.max(lo).min(hi));
    Ok(ActorHeads {
        tape,
        mean,
        log_std,
        in_bounds,
    })
}

/// Actor mean and clamped log-std, each `[batch × act_dim]`.
pub fn actor_distribution<T: Real>(
    actor: &ParamSet<T>,
    observations: &Matrix<T>,
    bounds: LogStdBounds,
) -> Result<(Matrix<T>, Matrix<T>), TrainError> {
    let h = actor_heads(actor, observations, bounds)?;
    Ok((h.mean, h.log_std))
}

/// Squashed actions in `(−1, 1)` and their log-densities for fixed `noise`.
pub fn sample_actions<T: Real>(
    actor: &ParamSet<T>,
    observations: &Matrix<T>,
    noise: &Matrix<T>,
    bounds: LogStdBounds,
) -> Result<(Matrix<T>, Vec<T>), TrainError> {
    let (mean, log_std) = actor_distribution(actor, observations, bounds)?;
    squash_rows(&mean, &log_std, noise)
}

fn squash_rows<T: Real>(
    mean: &Matrix<T>,
    log_std: &Matrix<T>,
    noise: &Matrix<T>,
) -> Result<(Matrix<T>, Vec<T>), TrainError> {
    if noise.rows() != mean.rows() || noise.cols() != mean.cols() {
        return Err(TrainError::Config(format!(
            "noise is {}x{}, actor output is {}x{}",
            noise.rows(),
            noise.cols(),
            mean.rows(),
            mean.cols()
        )));
    }
    let mut actions = Matrix::zeros(mean.rows(), mean.cols());
    let mut log_probs = Vec::with_capacity(mean.rows());
    for r in 0..mean.rows() {
        let (a, lp) = squashed_sample_and_log_prob(mean.row(r), log_std.row(r), noise.row(r))?;
        actions.row_mut(r).copy_from_slice(&a);
        log_probs.push(lp);
    }
    Ok((actions, log_probs))
}

/// `Q(s, a)` for every row.
pub fn q_values<T: Real>(
    critic: &ParamSet<T>,
    observations: &Matrix<T>,
    actions: &Matrix<T>,
) -> Result<Vec<T>, TrainError> {
    Ok(mlp_forward(critic, &observations.hstack(actions), HIDDEN)?.into_vec())
}

fn ensure_finite<T: Real>(what: &str, xs: &[T]) -> Result<(), TrainError> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(TrainError::Numeric {
            context: what.into(),
            detail: "non-finite value".into(),
        })
    }
}

/// `y = r + γ·(1 − terminated)·(min(Q′₁, Q′₂)(s′, a′) − α·log π(a′|s′))`
/// with `a′` drawn from the actor at `s′` using `noise`.
#[allow(clippy::too_many_arguments)]
pub fn critic_target<T: Real>(
    batch: &SacBatch<T>,
    target1: &ParamSet<T>,
    target2: &ParamSet<T>,
    actor: &ParamSet<T>,
    alpha: T,
    gamma: f64,
    noise: &Matrix<T>,
    bounds: LogStdBounds,
) -> Result<Vec<T>, TrainError> {
    let (next_actions, next_log_probs) =
        sample_actions(actor, &batch.next_observations, noise, bounds)?;
    let q1 = q_values(target1, &batch.next_observations, &next_actions)?;
    let q2 = q_values(target2, &batch.next_observations, &next_actions)?;
    let g = T::of(gamma);
    let y: Vec<T> = (0..batch.len())
        .map(|i| {
            if batch.terminated[i] {
                batch.rewards[i]
            } else {
                batch.rewards[i] + g * (q1[i].min(q2[i]) - alpha * next_log_probs[i])
            }
        })
        .collect();
    ensure_finite("critic target", &y)?;
    Ok(y)
}

#[derive(Debug, Clone)]
pub struct CriticLoss<T> {
    pub loss: T,
    pub grad1: ParamSet<T>,
    pub grad2: ParamSet<T>,
}

/// `Σₖ mean((Qₖ(s, a) − y)²)`; `y` is a constant.
pub fn critic_loss<T: Real>(
    q1: &ParamSet<T>,
    q2: &ParamSet<T>,
    batch: &SacBatch<T>,
    y: &[T],
) -> Result<CriticLoss<T>, TrainError> {
    let n = batch.len();
    if y.len() != n || n == 0 {
        return Err(TrainError::Config(format!(
            "critic loss: {} targets for a batch of {n}",
            y.len()
        )));
    }
    let input = batch.observations.hstack(&batch.actions);
    let inv_n = T::of(1.0 / n as f64);
    let two = T::of(2.0);
    let mut loss = T::zero();
    let mut grads = Vec::with_capacity(2);
    for critic in [q1, q2] {
        let tape = mlp_forward_tape(critic, &input, HIDDEN)?;
        let q = tape.output();
        let mut up = Matrix::zeros(n, 1);
        let mut sq = T::zero();
        for i in 0..n {
            let d = q.get(i, 0) - y[i];
            sq += d * d;
            up.set(i, 0, two * d * inv_n);
        }
        loss += sq * inv_n;
        grads.push(mlp_backward_tape(critic, &input, &tape, &up, HIDDEN)?.0);
    }
    ensure_finite("critic loss", &[loss])?;
    let grad2 = grads.pop().expect("two critics");
    let grad1 = grads.pop().expect("two critics");
    Ok(CriticLoss { loss, grad1, grad2 })
}

#[derive(Debug, Clone)]
pub struct ActorLoss<T> {
    pub loss: T,
    pub grad: ParamSet<T>,
    /// `log π(a|s)` of the reparameterized samples, reused by the alpha loss.
    pub log_probs: Vec<T>,
}

/// `mean(α·log π(a|s) − min(Q₁, Q₂)(s, a))` with `a` reparameterized through
/// fixed `noise`. Only the actor receives gradients.
pub fn actor_loss<T: Real>(
    actor: &ParamSet<T>,
    q1: &ParamSet<T>,
    q2: &ParamSet<T>,
    alpha: T,
    observations: &Matrix<T>,
    noise: &Matrix<T>,
    bounds: LogStdBounds,
) -> Result<ActorLoss<T>, TrainError> {
    let n = observations.rows();
    if n == 0 {
        return Err(TrainError::Config("actor loss on an empty batch".into()));
    }
    let heads = actor_heads(actor, observations, bounds)?;
    let (actions, log_probs) = squash_rows(&heads.mean, &heads.log_std, noise)?;
    let d = actions.cols();
    let input = observations.hstack(&actions);
    let t1 = mlp_forward_tape(q1, &input, HIDDEN)?;
    let t2 = mlp_forward_tape(q2, &input, HIDDEN)?;
    let inv_n = T::of(1.0 / n as f64);

    let mut up1 = Matrix::zeros(n, 1);
    let mut up2 = Matrix::zeros(n, 1);
    let mut loss = T::zero();
    for i in 0..n {
        let (a, b) = (t1.output().get(i, 0), t2.output().get(i, 0));
        if a <= b {
            up1.set(i, 0, -inv_n);
            loss += alpha * log_probs[i] - a;
        } else {
            up2.set(i, 0, -inv_n);
            loss += alpha * log_probs[i] - b;
        }
    }
    loss *= inv_n;
    ensure_finite("actor loss", &[loss])?;

    // dL/da from the critic term.
    let (_, g1) = mlp_backward_tape(q1, &input, &t1, &up1, HIDDEN)?;
    let (_, g2) = mlp_backward_tape(q2, &input, &t2, &up2, HIDDEN)?;
    let obs_dim = observations.cols();
    let eps = T::of(SQUASH_EPS);
    let two = T::of(2.0);
    let mut up = Matrix::zeros(n, 2 * d);
    for i in 0..n {
        for j in 0..d {
            let a = actions.get(i, j);
            let sigma = heads.log_std.get(i, j).exp();
            let one_minus = one_minus_tanh_sq(heads.mean.get(i, j) + sigma * noise.get(i, j));
            let g_a = g1.get(i, obs_dim + j)
                + g2.get(i, obs_dim + j)
                + alpha * inv_n * two * a / (one_minus + eps);
            let g_u = g_a * one_minus;
            up.set(i, j, g_u);
            let g_ls = if heads.in_bounds[i * d + j] {
                g_u * sigma * noise.get(i, j) - alpha * inv_n
            } else {
                T::zero()
            };
            up.set(i, d + j, g_ls);
        }
    }
    let (grad, _) = mlp_backward_tape(actor, observations, &heads.tape, &up, HIDDEN)?;
    Ok(ActorLoss {
        loss,
        grad,
        log_probs,
    })
}

/// `−mean(log α · (log π + target_entropy))` and its derivative in `log α`,
/// with `log π` held constant.
pub fn alpha_loss<T: Real>(log_alpha: T, log_probs: &[T], target_entropy: f64) -> (T, T) {
    let h = T::of(target_entropy);
    let mean = log_probs.iter().map(|&lp| lp + h).sum::<T>() / T::of(log_probs.len() as f64);
    (-log_alpha * mean, -mean)
}

/// `target ← (1 − τ)·target + τ·online`.
pub fn polyak_update<T: Real>(
    target: &mut ParamSet<T>,
    online: &ParamSet<T>,
    tau: f64,
) -> Result<(), NnError> {
    target.ensure_congruent(online)?;
    let t = T::of(tau);
    let keep = T::one() - t;
    for i in 0..target.len() {
        for (dst, &src) in target.values_mut(i).iter_mut().zip(online.values(i)) {
            *dst = keep * *dst + t * src;
        }
    }
    Ok(())
}
