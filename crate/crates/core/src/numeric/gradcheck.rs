//! Central finite-difference gradient checker.

use super::params::{Gradients, ParamId, ParamStore};
use crate::error::Result;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheck {
    /// `max |analytic − numeric| / max(|analytic|, |numeric|, 1e-12)`
    pub max_relative_error: f64,
    /// Parameter name and flat index where the maximum occurred.
    pub worst: Option<(String, usize)>,
    pub checked: usize,
}

/// Compares `analytic` against central differences of `loss_fn` for every
/// element of every parameter in `store`.
///
/// `loss_fn` must be a deterministic function of the parameters: any
/// sampling inside it has to run from a fixed seed, otherwise the result is
/// meaningless. Parameters are restored bit-for-bit after each probe.
pub fn finite_diff_check<F>(store: &mut ParamStore, analytic: &Gradients, eps: f64, mut loss_fn: F) -> Result<GradCheck>
where
    F: FnMut(&ParamStore) -> Result<f64>,
{
    let ids: Vec<ParamId> = store.ids().collect();
    let mut report = GradCheck {
        max_relative_error: 0.0,
        worst: None,
        checked: 0,
    };
    for id in ids {
        for k in 0..store.data(id).len() {
            let orig = store.data(id)[k];
            store.data_mut(id)[k] = orig + eps;
            let plus = loss_fn(store)?;
            store.data_mut(id)[k] = orig - eps;
            let minus = loss_fn(store)?;
            store.data_mut(id)[k] = orig;

            let numeric = (plus - minus) / (2.0 * eps);
            let exact = analytic.get(id)[k];
            let denom = exact.abs().max(numeric.abs()).max(1e-12);
            let rel = (exact - numeric).abs() / denom;
            report.checked += 1;
            if rel > report.max_relative_error || rel.is_nan() {
                report.max_relative_error = rel;
                report.worst = Some((store.get(id).name().to_string(), k));
            }
        }
    }
    Ok(report)
}
