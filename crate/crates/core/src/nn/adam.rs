use super::{NnError, ParamSet, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment estimates congruent with one [`ParamSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub first_moment: ParamSet<T>,
    pub second_moment: ParamSet<T>,
    pub step_count: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(params: &ParamSet<T>) -> Self {
        Self {
            first_moment: params.zeros_like(),
            second_moment: params.zeros_like(),
            step_count: 0,
        }
    }
}

/// One bias-corrected Adam update.
///
/// Gradients are validated before anything is mutated, so a non-finite
/// gradient leaves parameters and state untouched.
pub fn adam_step<T: Real>(
    params: &mut ParamSet<T>,
    grads: &ParamSet<T>,
    state: &mut AdamState<T>,
    opt: &Adam,
) -> Result<(), NnError> {
    params.ensure_congruent(grads)?;
    params.ensure_congruent(&state.first_moment)?;
    for e in grads.entries() {
        if e.values.iter().any(|v| !v.is_finite()) {
            return Err(NnError::NonFinite {
                entry: e.name.clone(),
            });
        }
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let (b1, b2) = (T::of(opt.beta1), T::of(opt.beta2));
    let bc1 = 1.0 - opt.beta1.powi(t);
    let bc2 = 1.0 - opt.beta2.powi(t);
    let step_size = T::of(opt.lr / bc1);
    let bc2_sqrt = T::of(bc2.sqrt());
    let eps = T::of(opt.eps);
    for idx in 0..params.len() {
        let g = grads.values(idx);
        let m = state.first_moment.values_mut(idx);
        for (mi, &gi) in m.iter_mut().zip(g) {
            *mi = b1 * *mi + (T::one() - b1) * gi;
        }
        let v = state.second_moment.values_mut(idx);
        for (vi, &gi) in v.iter_mut().zip(g) {
            *vi = b2 * *vi + (T::one() - b2) * gi * gi;
        }
        let m = state.first_moment.values(idx);
        let v = state.second_moment.values(idx);
        let p = params.values_mut(idx);
        for ((pi, &mi), &vi) in p.iter_mut().zip(m).zip(v) {
            *pi -= step_size * mi / (vi.sqrt() / bc2_sqrt + eps);
        }
    }
    Ok(())
}
