use thiserror::Error;

use super::{Grads, ParamStore};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter name and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
    pub coordinates: usize,
}

#[derive(Debug, Error, PartialEq)]
pub enum GradCheckError {
    #[error("objective is not finite when perturbing {param}[{index}]")]
    NonFinite { param: String, index: usize },
}

/// Compares analytic gradients against central differences
/// `(f(θ+ε) − f(θ−ε)) / 2ε`, one coordinate at a time, over every parameter
/// in `store`.
///
/// The relative error of a coordinate is `|a − n| / max(|a|, |n|, 1e-8)`.
/// `store` is restored to its original values before returning.
pub fn grad_check<F>(
    store: &mut ParamStore,
    analytic: &Grads,
    mut f: F,
    epsilon: f64,
) -> Result<GradCheckReport, GradCheckError>
where
    F: FnMut(&ParamStore) -> f64,
{
    assert_eq!(store.len(), analytic.len(), "gradient layout does not match parameters");
    let mut report = GradCheckReport { max_rel_error: 0.0, worst: None, coordinates: 0 };
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        let grad = analytic.get(id).to_dense();
        for k in 0..store.get(id).len() {
            let orig = store.get(id).as_slice()[k];
            store.get_mut(id).as_mut_slice()[k] = orig + epsilon;
            let plus = f(store);
            store.get_mut(id).as_mut_slice()[k] = orig - epsilon;
            let minus = f(store);
            store.get_mut(id).as_mut_slice()[k] = orig;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(GradCheckError::NonFinite { param: store.name(id).to_string(), index: k });
            }
            let numeric = (plus - minus) / (2.0 * epsilon);
            let a = grad.as_slice()[k];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            report.coordinates += 1;
            if report.worst.is_none() || rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = Some((store.name(id).to_string(), k));
            }
        }
    }
    Ok(report)
}
