//! Central-difference verification of backward-pass gradients.

use super::graph::Grads;
use super::optim::ParamStore;
use super::tensor::Tensor;
use super::SubstrateError;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub worst_rel_err: f64,
    pub worst_param: Option<String>,
    pub worst_index: usize,
    pub coords_checked: usize,
    pub rel_tol: f64,
    pub pass: bool,
}

impl std::fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "grad_check {}: worst rel err {:.3e} (tol {:.1e}) over {} coords",
            if self.pass { "PASS" } else { "FAIL" },
            self.worst_rel_err,
            self.rel_tol,
            self.coords_checked,
        )?;
        if let Some(p) = &self.worst_param {
            write!(f, " at {}[{}]", p, self.worst_index)?;
        }
        Ok(())
    }
}

/// Central-difference step. Large enough that subtractive cancellation in
/// `f(x+h) − f(x−h)` stays well below the 1e-4 tolerance even for
/// small-magnitude gradient coordinates.
pub const DEFAULT_FD_STEP: f64 = 1e-4;

/// Compare analytic gradients against central finite differences of `eval`
/// for every coordinate of every parameter in `names`. Parameters are
/// perturbed in place and restored bit-exactly.
///
/// The relative error denominator is floored at 1e-6 so structurally-zero
/// gradients compare cleanly.
pub fn grad_check<F>(
    store: &mut ParamStore,
    names: &[String],
    analytic: &Grads,
    mut eval: F,
    rel_tol: f64,
    step: f64,
) -> Result<GradCheckReport, SubstrateError>
where
    F: FnMut(&ParamStore) -> Result<f64, SubstrateError>,
{
    let mut worst = 0.0f64;
    let mut worst_param = None;
    let mut worst_index = 0;
    let mut coords = 0usize;
    for name in names {
        let len = store.get(name)?.len();
        let zero = Tensor::zeros(store.get(name)?.shape());
        for i in 0..len {
            let orig = store.get(name)?.data()[i];
            store.get_mut(name)?.data_mut()[i] = orig + step;
            let f_plus = eval(store)?;
            store.get_mut(name)?.data_mut()[i] = orig - step;
            let f_minus = eval(store)?;
            store.get_mut(name)?.data_mut()[i] = orig;

            let numeric = (f_plus - f_minus) / (2.0 * step);
            let ana = analytic.get(name).unwrap_or(&zero).data()[i];
            let denom = numeric.abs().max(ana.abs()).max(1e-6);
            let rel = (numeric - ana).abs() / denom;
            coords += 1;
            if rel > worst {
                worst = rel;
                worst_param = Some(name.clone());
                worst_index = i;
            }
        }
    }
    Ok(GradCheckReport {
        worst_rel_err: worst,
        worst_param,
        worst_index,
        coords_checked: coords,
        rel_tol,
        pass: worst < rel_tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::substrate::graph::Graph;

    fn linear_store() -> (ParamStore, Vec<String>) {
        let mut store = ParamStore::new();
        store.insert("w", Tensor::vector(vec![0.3, -1.2, 2.0])).unwrap();
        (store, vec!["w".to_string()])
    }

    fn linear_loss(store: &ParamStore) -> Result<f64, SubstrateError> {
        // f(w) = Σ c_i w_i
        let mut g = Graph::new();
        let w = g.param(store, "w")?;
        let c = g.constant(Tensor::vector(vec![2.0, -0.5, 1.5]))?;
        let p = g.mul(w, c)?;
        let s = g.sum(p)?;
        Ok(g.value(s).item())
    }

    #[test]
    fn linear_map_is_exact() {
        let (mut store, names) = linear_store();
        let grads = {
            let mut g = Graph::new();
            let w = g.param(&store, "w").unwrap();
            let c = g.constant(Tensor::vector(vec![2.0, -0.5, 1.5])).unwrap();
            let p = g.mul(w, c).unwrap();
            let s = g.sum(p).unwrap();
            g.backward(s).unwrap()
        };
        let report =
            grad_check(&mut store, &names, &grads, linear_loss, 1e-8, DEFAULT_FD_STEP).unwrap();
        assert!(report.pass, "{report}");
    }

    #[test]
    fn corrupted_gradient_fails() {
        let (mut store, names) = linear_store();
        let mut grads = Grads::default();
        grads.insert("w".into(), Tensor::vector(vec![2.0, -0.5, 9.9]));
        let report =
            grad_check(&mut store, &names, &grads, linear_loss, 1e-4, DEFAULT_FD_STEP).unwrap();
        assert!(!report.pass);
        assert_eq!(report.worst_param.as_deref(), Some("w"));
        assert_eq!(report.worst_index, 2);
    }

    #[test]
    fn params_are_restored_exactly() {
        let (mut store, names) = linear_store();
        let before = store.get("w").unwrap().data().to_vec();
        let grads = Grads::default();
        let _ = grad_check(&mut store, &names, &grads, linear_loss, 1.0, DEFAULT_FD_STEP).unwrap();
        assert_eq!(store.get("w").unwrap().data(), before.as_slice());
    }
}
