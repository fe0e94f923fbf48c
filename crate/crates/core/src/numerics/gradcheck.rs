//! Central finite-difference verification of analytic gradients.

use serde::Serialize;

use super::{Graph, NodeId, NumericsError, ParamStore};

/// Denominator floor for the relative error, so entries whose true gradient
/// is numerically zero are judged on absolute error instead.
pub const REL_ERROR_FLOOR: f64 = 1e-5;

#[derive(Clone, Debug, Serialize)]
pub struct ParamCheck {
    pub name: String,
    pub entries: usize,
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    /// Entries whose relative error exceeds the tolerance.
    pub flagged: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradCheckReport {
    pub step: f64,
    pub tolerance: f64,
    pub params: Vec<ParamCheck>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.params.iter().all(|p| p.flagged == 0)
    }

    pub fn max_rel_error(&self) -> f64 {
        self.params.iter().map(|p| p.max_rel_error).fold(0.0, f64::max)
    }

    pub fn failing(&self) -> impl Iterator<Item = &ParamCheck> {
        self.params.iter().filter(|p| p.flagged > 0)
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Compares backward-pass gradients of `loss_fn` against central
/// differences with step `step`, for every entry of every parameter.
pub fn check_gradients<F>(
    store: &ParamStore,
    loss_fn: F,
    step: f64,
    tolerance: f64,
) -> Result<GradCheckReport, NumericsError>
where
    F: for<'a> Fn(&mut Graph<'a>, &'a ParamStore) -> Result<NodeId, NumericsError>,
{
    check_gradients_scaled(store, loss_fn, step, tolerance, 1.0)
}

/// Same as [`check_gradients`] but multiplies the analytic gradient by
/// `analytic_scale` first. A scale other than 1 is a negative control: the
/// report must flag it.
pub fn check_gradients_scaled<F>(
    store: &ParamStore,
    loss_fn: F,
    step: f64,
    tolerance: f64,
    analytic_scale: f64,
) -> Result<GradCheckReport, NumericsError>
where
    F: for<'a> Fn(&mut Graph<'a>, &'a ParamStore) -> Result<NodeId, NumericsError>,
{
    let mut analytic: Vec<Option<Vec<f64>>> = vec![None; store.len()];
    {
        let mut g = Graph::new();
        let loss = loss_fn(&mut g, store)?;
        for (id, grad) in g.backward(loss)?.into_params() {
            analytic[id.index()] = Some(grad.into_data());
        }
    }

    let eval = |s: &ParamStore| -> Result<f64, NumericsError> {
        let mut g = Graph::new();
        let loss = loss_fn(&mut g, s)?;
        Ok(g.value(loss).item())
    };

    let mut work = store.clone();
    let mut params = Vec::with_capacity(store.len());
    for id in store.ids() {
        let n = store.value(id).len();
        let mut check = ParamCheck {
            name: store.get(id).name.clone(),
            entries: n,
            max_rel_error: 0.0,
            worst_index: 0,
            analytic: 0.0,
            numeric: 0.0,
            flagged: 0,
        };
        for i in 0..n {
            let original = store.value(id).data()[i];
            work.value_mut(id).data_mut()[i] = original + step;
            let plus = eval(&work)?;
            work.value_mut(id).data_mut()[i] = original - step;
            let minus = eval(&work)?;
            work.value_mut(id).data_mut()[i] = original;

            let numeric = (plus - minus) / (2.0 * step);
            let a = analytic[id.index()].as_ref().map_or(0.0, |g| g[i]) * analytic_scale;
            let err = relative_error(a, numeric);
            if err > tolerance {
                check.flagged += 1;
            }
            if err > check.max_rel_error || i == 0 {
                check.max_rel_error = err;
                check.worst_index = i;
                check.analytic = a;
                check.numeric = numeric;
            }
        }
        params.push(check);
    }
    Ok(GradCheckReport {
        step,
        tolerance,
        params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Tensor;

    fn square_loss<'a>(g: &mut Graph<'a>, s: &'a ParamStore) -> Result<NodeId, NumericsError> {
        let theta = g.param(s, s.id("theta").unwrap());
        let sq = g.mul(theta, theta)?;
        g.sum_all(sq)
    }

    #[test]
    fn quadratic_is_exact() {
        let mut store = ParamStore::new();
        store.insert("theta", Tensor::scalar(1.0));
        let report = check_gradients(&store, square_loss, 1e-5, 1e-4).unwrap();
        assert!(report.passed());
        assert!(report.max_rel_error() < 1e-8, "{}", report.max_rel_error());
    }

    #[test]
    fn corrupted_gradient_is_flagged() {
        let mut store = ParamStore::new();
        store.insert("theta", Tensor::scalar(1.0));
        let report = check_gradients_scaled(&store, square_loss, 1e-5, 1e-4, 1.1).unwrap();
        assert!(!report.passed());
        assert_eq!(report.failing().count(), 1);
    }
}
