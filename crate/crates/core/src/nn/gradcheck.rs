//! Central finite-difference gradient verification in double precision.

use super::ParamSet;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `(entry name, component index)` of the worst component.
    pub worst: Option<(String, usize)>,
}

/// Central-difference gradient of `loss` at `params`.
pub fn numeric_gradient<F>(mut loss: F, params: &ParamSet<f64>, h: f64) -> ParamSet<f64>
where
    F: FnMut(&ParamSet<f64>) -> f64,
{
    let mut probe = params.clone();
    let mut grad = params.zeros_like();
    for idx in 0..params.len() {
        for j in 0..params.values(idx).len() {
            let x = params.values(idx)[j];
            probe.values_mut(idx)[j] = x + h;
            let up = loss(&probe);
            probe.values_mut(idx)[j] = x - h;
            let down = loss(&probe);
            probe.values_mut(idx)[j] = x;
            grad.values_mut(idx)[j] = (up - down) / (2.0 * h);
        }
    }
    grad
}

/// Compares `analytic` against central differences of `loss`.
///
/// Relative error per component is `|a − n| / max(|a|, |n|, 1e-8)`.
pub fn finite_difference_check<F>(
    loss: F,
    params: &ParamSet<f64>,
    analytic: &ParamSet<f64>,
    h: f64,
) -> GradCheckReport
where
    F: FnMut(&ParamSet<f64>) -> f64,
{
    assert!(params.is_congruent(analytic), "analytic gradient shape mismatch");
    let numeric = numeric_gradient(loss, params, h);
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
    };
    for (a, n) in analytic.entries().iter().zip(numeric.entries()) {
        for (j, (&ga, &gn)) in a.values.iter().zip(&n.values).enumerate() {
            let denom = ga.abs().max(gn.abs()).max(1e-8);
            let rel = (ga - gn).abs() / denom;
            if rel > report.max_rel_error || rel.is_nan() {
                report.max_rel_error = rel;
                report.worst = Some((a.name.clone(), j));
            }
        }
    }
    report
}
