use crate::agent::TrainError;
use crate::nn::dist::{categorical_entropy, log_softmax};
use crate::nn::{
    gaussian_entropy, gaussian_log_prob, mlp_backward_tape, mlp_forward_tape, Activation, Matrix,
    ParamSet, Real,
};

pub const HIDDEN: Activation = Activation::Tanh;

/// How the policy network's output parameterizes the action distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyHead {
    /// Outputs are the mean; the standard deviation is fixed.
    Gaussian { log_std: f64 },
    /// Outputs are logits; an action is one integral index.
    Categorical,
}

/// One minibatch of rollout data. `actions` has one row per sample: the
/// action vector for a Gaussian head, the index for a categorical one.
#[derive(Debug, Clone)]
pub struct Minibatch<T> {
    pub observations: Matrix<T>,
    pub actions: Matrix<T>,
    pub old_log_probs: Vec<T>,
    pub advantages: Vec<T>,
    pub returns: Vec<T>,
}

#[derive(Debug, Clone, Copy)]
pub struct LossCoefs {
    pub clip_range: f64,
    pub critic_coef: f64,
    pub entropy_coef: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PpoDiagnostics {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    /// `mean(old_log_prob − new_log_prob)`.
    pub approx_kl: f64,
}

#[derive(Debug, Clone)]
pub struct PpoLoss<T> {
    pub loss: T,
    pub diagnostics: PpoDiagnostics,
    pub policy_grad: ParamSet<T>,
    pub value_grad: ParamSet<T>,
}

/// Per-sample log-probability of `action` and its gradient with respect to
/// the network output row, plus entropy and its gradient.
struct HeadEval<T> {
    log_prob: T,
    d_log_prob: Vec<T>,
    entropy: T,
    d_entropy: Option<Vec<T>>,
}

fn eval_head<T: Real>(head: PolicyHead, out: &[T], action: &[T]) -> Result<HeadEval<T>, TrainError> {
    match head {
        PolicyHead::Gaussian { log_std } => {
            let ls = vec![T::of(log_std); out.len()];
            let log_prob = gaussian_log_prob(out, &ls, action)?;
            let inv_var = T::of((-2.0 * log_std).exp());
            let d_log_prob = out
                .iter()
                .zip(action)
                .map(|(&m, &a)| (a - m) * inv_var)
                .collect();
            Ok(HeadEval {
                log_prob,
                d_log_prob,
                entropy: gaussian_entropy(&ls),
                d_entropy: None,
            })
        }
        PolicyHead::Categorical => {
            let index = action[0].as_f64();
            if index < 0.0 || index.fract() != 0.0 || index as usize >= out.len() {
                return Err(TrainError::Config(format!(
                    "categorical action {index} outside 0..{}",
                    out.len()
                )));
            }
            let index = index as usize;
            let lsm = log_softmax(out);
            let entropy = categorical_entropy(&lsm);
            let mut d_log_prob = Vec::with_capacity(out.len());
            let mut d_entropy = Vec::with_capacity(out.len());
            for (k, &l) in lsm.iter().enumerate() {
                let p = l.exp();
                let hit = if k == index { T::one() } else { T::zero() };
                d_log_prob.push(hit - p);
                d_entropy.push(-p * (l + entropy));
            }
            Ok(HeadEval {
                log_prob: lsm[index],
                d_log_prob,
                entropy,
                d_entropy: Some(d_entropy),
            })
        }
    }
}

/// Log-probabilities of `actions` under the current policy.
pub fn log_probs<T: Real>(
    policy: &ParamSet<T>,
    head: PolicyHead,
    observations: &Matrix<T>,
    actions: &Matrix<T>,
) -> Result<Vec<T>, TrainError> {
    let out = mlp_forward_tape(policy, observations, HIDDEN)?.into_output();
    (0..out.rows())
        .map(|r| Ok(eval_head(head, out.row(r), actions.row(r))?.log_prob))
        .collect()
}

/// Clipped-surrogate loss with value and entropy terms, and its gradients.
///
/// `loss = −mean(min(ρA, clip(ρ, 1−ε, 1+ε)A)) + c_v·mean((V − R)²) − c_e·mean(H)`
/// with `ρ = exp(log π − log π_old)`. Advantages are used as given.
pub fn ppo_loss<T: Real>(
    policy: &ParamSet<T>,
    value: &ParamSet<T>,
    head: PolicyHead,
    batch: &Minibatch<T>,
    coefs: &LossCoefs,
) -> Result<PpoLoss<T>, TrainError> {
    let n = batch.observations.rows();
    if n == 0 {
        return Err(TrainError::Config("empty minibatch".into()));
    }
    for (name, len) in [
        ("actions", batch.actions.rows()),
        ("old_log_probs", batch.old_log_probs.len()),
        ("advantages", batch.advantages.len()),
        ("returns", batch.returns.len()),
    ] {
        if len != n {
            return Err(TrainError::Config(format!(
                "minibatch {name} has {len} rows, observations have {n}"
            )));
        }
    }
    let inv_n = T::of(1.0 / n as f64);
    let eps = T::of(coefs.clip_range);
    let lo = T::one() - eps;
    let hi = T::one() + eps;
    let ent_coef = T::of(coefs.entropy_coef);

    let p_tape = mlp_forward_tape(policy, &batch.observations, HIDDEN)?;
    let p_out = p_tape.output();
    let mut p_up = Matrix::zeros(n, p_out.cols());
    let mut surrogate = T::zero();
    let mut entropy_sum = T::zero();
    let mut kl_sum = T::zero();
    let mut clipped = 0usize;
    for r in 0..n {
        let h = eval_head(head, p_out.row(r), batch.actions.row(r))?;
        let log_ratio = h.log_prob - batch.old_log_probs[r];
        let ratio = log_ratio.exp();
        let adv = batch.advantages[r];
        let unclipped = ratio * adv;
        let clipped_term = ratio.max(lo).min(hi) * adv;
        let coef = if unclipped <= clipped_term {
            surrogate += unclipped;
            -adv * ratio * inv_n
        } else {
            surrogate += clipped_term;
            T::zero()
        };
        if (ratio - T::one()).abs() > eps {
            clipped += 1;
        }
        kl_sum -= log_ratio;
        entropy_sum += h.entropy;
        let up = p_up.row_mut(r);
        for (u, &d) in up.iter_mut().zip(&h.d_log_prob) {
            *u = coef * d;
        }
        if let Some(de) = h.d_entropy {
            for (u, d) in up.iter_mut().zip(de) {
                *u -= ent_coef * inv_n * d;
            }
        }
    }
    let policy_loss = -surrogate * inv_n;
    let entropy = entropy_sum * inv_n;

    let v_tape = mlp_forward_tape(value, &batch.observations, HIDDEN)?;
    let v_out = v_tape.output();
    if v_out.cols() != 1 {
        return Err(TrainError::Config(format!(
            "value network has {} outputs, expected 1",
            v_out.cols()
        )));
    }
    let critic = T::of(coefs.critic_coef);
    let two = T::of(2.0);
    let mut v_up = Matrix::zeros(n, 1);
    let mut sq = T::zero();
    for r in 0..n {
        let diff = v_out.get(r, 0) - batch.returns[r];
        sq += diff * diff;
        v_up.set(r, 0, two * critic * diff * inv_n);
    }
    let value_loss = sq * inv_n;
    let loss = policy_loss + critic * value_loss - ent_coef * entropy;

    let diagnostics = PpoDiagnostics {
        policy_loss: policy_loss.as_f64(),
        value_loss: value_loss.as_f64(),
        entropy: entropy.as_f64(),
        clip_fraction: clipped as f64 / n as f64,
        approx_kl: (kl_sum * inv_n).as_f64(),
    };
    if !loss.is_finite() {
        return Err(TrainError::Numeric {
            context: "ppo loss".into(),
            detail: format!("non-finite loss; {diagnostics:?}"),
        });
    }
    let (policy_grad, _) = mlp_backward_tape(policy, &batch.observations, &p_tape, &p_up, HIDDEN)?;
    let (value_grad, _) = mlp_backward_tape(value, &batch.observations, &v_tape, &v_up, HIDDEN)?;
    Ok(PpoLoss {
        loss,
        diagnostics,
        policy_grad,
        value_grad,
    })
}

/// Shifts to zero mean and scales by the sample standard deviation plus
/// 1e-8. A single advantage becomes zero.
pub fn normalize_advantages(advantages: &mut [f64]) {
    let n = advantages.len();
    if n == 0 {
        return;
    }
    let mean = advantages.iter().sum::<f64>() / n as f64;
    if n == 1 {
        advantages[0] = 0.0;
        return;
    }
    let var = advantages.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let denom = var.sqrt() + 1e-8;
    for a in advantages {
        *a = (*a - mean) / denom;
    }
}
