use crate::agent::TrainError;

/// Inputs laid out time-major: sample `(t, i)` lives at `t * nr_envs + i`.
#[derive(Debug, Clone, Copy)]
pub struct GaeInputs<'a> {
    pub rewards: &'a [f64],
    pub values: &'a [f64],
    /// `V(final observation)` for truncated samples; ignored elsewhere.
    pub final_values: &'a [f64],
    /// `V` of each env's state after the last step, one per env.
    pub bootstrap: &'a [f64],
    pub terminated: &'a [bool],
    pub truncated: &'a [bool],
    pub nr_envs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gae {
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

/// Generalized advantage estimation by backward recursion.
///
/// `δ_t = r_t + γ·V(s_{t+1})·(1 − terminated_t) − V(s_t)` and
/// `A_t = δ_t + γλ·(1 − done_t)·A_{t+1}`. A truncated step bootstraps from
/// the value of its final observation but still stops the recursion.
pub fn compute_gae(inputs: &GaeInputs<'_>, gamma: f64, lambda: f64) -> Result<Gae, TrainError> {
    let n = inputs.nr_envs;
    let len = inputs.rewards.len();
    if n == 0 || len % n != 0 {
        return Err(TrainError::Config(format!(
            "gae: {len} samples do not split across {n} envs"
        )));
    }
    for (name, l) in [
        ("values", inputs.values.len()),
        ("final_values", inputs.final_values.len()),
        ("terminated", inputs.terminated.len()),
        ("truncated", inputs.truncated.len()),
    ] {
        if l != len {
            return Err(TrainError::Config(format!(
                "gae: {name} has {l} entries, rewards has {len}"
            )));
        }
    }
    if inputs.bootstrap.len() != n {
        return Err(TrainError::Config(format!(
            "gae: bootstrap has {} entries for {n} envs",
            inputs.bootstrap.len()
        )));
    }
    let steps = len / n;
    let mut advantages = vec![0.0; len];
    for i in 0..n {
        let mut next_advantage = 0.0;
        for t in (0..steps).rev() {
            let k = t * n + i;
            let next_value = if inputs.truncated[k] {
                inputs.final_values[k]
            } else if t + 1 == steps {
                inputs.bootstrap[i]
            } else {
                inputs.values[k + n]
            };
            let not_terminal = if inputs.terminated[k] { 0.0 } else { 1.0 };
            let delta = inputs.rewards[k] + gamma * next_value * not_terminal - inputs.values[k];
            let carry = if inputs.terminated[k] || inputs.truncated[k] {
                0.0
            } else {
                next_advantage
            };
            next_advantage = delta + gamma * lambda * carry;
            advantages[k] = next_advantage;
        }
    }
    let returns = advantages
        .iter()
        .zip(inputs.values)
        .map(|(a, v)| a + v)
        .collect();
    Ok(Gae {
        advantages,
        returns,
    })
}
