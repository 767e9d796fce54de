use super::{ParamSet, Real};

/// Rescales all gradient sets jointly so their global L2 norm is at most
/// `max_norm`. Returns the norm before clipping.
pub fn clip_global_grad_norm<T: Real>(grads: &mut [&mut ParamSet<T>], max_norm: f64) -> f64 {
    assert!(max_norm > 0.0, "max_norm must be positive");
    let norm = grads
        .iter()
        .map(|g| {
            let n = g.l2_norm();
            n * n
        })
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        let factor = T::of(max_norm / norm);
        for g in grads.iter_mut() {
            g.scale(factor);
        }
    }
    norm
}
