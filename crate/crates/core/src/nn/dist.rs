//! Diagonal Gaussian, tanh-squashed Gaussian and categorical densities.

use super::{NnError, Real};

/// Added inside `log(1 - a² + ε)` so saturated actions stay finite.
pub const SQUASH_EPS: f64 = 1e-6;

pub const LN_2PI: f64 = 1.837_877_066_409_345_3;

fn check_finite<T: Real>(what: &str, xs: &[T]) -> Result<(), NnError> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(NnError::NonFinite {
            entry: what.to_string(),
        })
    }
}

/// `Σ −½((a−μ)/σ)² − log σ − ½ log 2π`.
pub fn gaussian_log_prob<T: Real>(mean: &[T], log_std: &[T], action: &[T]) -> Result<T, NnError> {
    if mean.len() != log_std.len() || mean.len() != action.len() {
        return Err(NnError::Config(format!(
            "gaussian dimensions differ: mean {}, log_std {}, action {}",
            mean.len(),
            log_std.len(),
            action.len()
        )));
    }
    check_finite("mean", mean)?;
    check_finite("log_std", log_std)?;
    check_finite("action", action)?;
    let half = T::of(0.5);
    let c = T::of(0.5 * LN_2PI);
    Ok(mean
        .iter()
        .zip(log_std)
        .zip(action)
        .map(|((&m, &ls), &a)| {
            let z = (a - m) / ls.exp();
            -half * z * z - ls - c
        })
        .sum())
}

/// `1 − tanh²(u)` without the cancellation of forming it from `tanh(u)`.
#[inline]
pub fn one_minus_tanh_sq<T: Real>(u: T) -> T {
    let c = u.cosh();
    T::one() / (c * c)
}

/// Reparameterized tanh-Gaussian sample and its log-density.
///
/// `action = tanh(μ + σ·noise)`; the log-density is the Gaussian term at the
/// pre-squash point minus `Σ log(1 − action² + ε)`.
pub fn squashed_sample_and_log_prob<T: Real>(
    mean: &[T],
    log_std: &[T],
    noise: &[T],
) -> Result<(Vec<T>, T), NnError> {
    if mean.len() != log_std.len() || mean.len() != noise.len() {
        return Err(NnError::Config("squashed gaussian dimensions differ".into()));
    }
    check_finite("noise", noise)?;
    let pre: Vec<T> = mean
        .iter()
        .zip(log_std)
        .zip(noise)
        .map(|((&m, &ls), &e)| m + ls.exp() * e)
        .collect();
    let base = gaussian_log_prob(mean, log_std, &pre)?;
    let eps = T::of(SQUASH_EPS);
    let mut correction = T::zero();
    let action: Vec<T> = pre
        .iter()
        .map(|&u| {
            correction += (one_minus_tanh_sq(u) + eps).ln();
            u.tanh()
        })
        .collect();
    Ok((action, base - correction))
}

/// `Σ (log σ + ½(1 + log 2π))`.
pub fn gaussian_entropy<T: Real>(log_std: &[T]) -> T {
    let c = T::of(0.5 * (1.0 + LN_2PI));
    log_std.iter().map(|&ls| ls + c).sum()
}

/// Numerically stable log-softmax of one row of logits.
pub fn log_softmax<T: Real>(logits: &[T]) -> Vec<T> {
    let max = logits
        .iter()
        .copied()
        .fold(T::neg_infinity(), |a, b| a.max(b));
    let lse = logits.iter().map(|&z| (z - max).exp()).sum::<T>().ln() + max;
    logits.iter().map(|&z| z - lse).collect()
}

pub fn categorical_entropy<T: Real>(log_probs: &[T]) -> T {
    -log_probs.iter().map(|&lp| lp.exp() * lp).sum::<T>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_normal_at_mode() {
        let lp = gaussian_log_prob(&[0.0f64], &[0.0], &[0.0]).unwrap();
        assert!((lp - (-0.918_938_533_204_672_7)).abs() < 1e-15);
        let lp1 = gaussian_log_prob(&[0.0f64], &[0.0], &[1.0]).unwrap();
        assert!((lp1 - (-0.5 - 0.5 * LN_2PI)).abs() < 1e-15);
    }

    #[test]
    fn non_finite_input_is_numeric_error() {
        assert!(matches!(
            gaussian_log_prob(&[f64::NAN], &[0.0], &[0.0]),
            Err(NnError::NonFinite { .. })
        ));
    }

    #[test]
    fn squash_at_zero() {
        let (a, lp) = squashed_sample_and_log_prob(&[0.0f64], &[0.0], &[0.0]).unwrap();
        assert_eq!(a, vec![0.0]);
        let expected = -0.5 * LN_2PI - (1.0 + SQUASH_EPS).ln();
        assert!((lp - expected).abs() < 1e-15);
    }

    #[test]
    fn entropy_values() {
        assert!((gaussian_entropy(&[0.0f64]) - 1.418_938_533_204_672_7).abs() < 1e-15);
        let ppo = gaussian_entropy(&[0.3f64.ln()]);
        assert!((ppo - (1.418_938_533_204_672_7 + 0.3f64.ln())).abs() < 1e-15);
        let three = gaussian_entropy(&[0.2f64, 0.2, 0.2]);
        assert!((three - 3.0 * gaussian_entropy(&[0.2f64])).abs() < 1e-14);
    }

    #[test]
    fn log_softmax_normalizes() {
        let lp = log_softmax(&[1.0f64, 2.0, -3.0]);
        let total: f64 = lp.iter().map(|x| x.exp()).sum();
        assert!((total - 1.0).abs() < 1e-15);
        let uniform = log_softmax(&[0.0f64, 0.0]);
        assert!((categorical_entropy(&uniform) - 2f64.ln()).abs() < 1e-15);
    }
}
