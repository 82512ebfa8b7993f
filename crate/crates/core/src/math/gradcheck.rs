use super::param::{ParamId, ParamStore};
use super::tape::{NodeId, Tape};
use crate::error::{Error, Result};

/// Compares the tape gradient of a scalar function against central
/// differences `(f(θ+ε) − f(θ−ε)) / 2ε` for every entry of `params`.
///
/// Returns the largest relative error `|a − n| / max(|a|, |n|, 1e-8)`.
/// Gradients already in `store` are cleared first and hold the analytic
/// gradient on return.
pub fn grad_check<F>(store: &mut ParamStore, params: &[ParamId], eps: f64, f: F) -> Result<f64>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<NodeId>,
{
    if !(1e-6..=1e-3).contains(&eps) {
        return Err(Error::Config(format!(
            "grad_check eps {eps} outside [1e-6, 1e-3]"
        )));
    }
    let eval = |store: &ParamStore| -> Result<f64> {
        let mut tape = Tape::new();
        let out = f(&mut tape, store)?;
        let v = tape.value(out);
        if v.len() != 1 {
            return Err(Error::shape(
                "grad_check",
                "(1,)",
                format!("({},)", v.len()),
            ));
        }
        if !v[0].is_finite() {
            return Err(Error::NonFinite("grad_check objective".into()));
        }
        Ok(v[0])
    };

    store.zero_grads();
    let mut tape = Tape::new();
    let out = f(&mut tape, store)?;
    if !tape.scalar(out).is_finite() {
        return Err(Error::NonFinite("grad_check objective".into()));
    }
    tape.backward(out, store)?;

    let mut worst = 0.0f64;
    for &p in params {
        for k in 0..store.get(p).values.len() {
            let analytic = store.get(p).grad[k];
            let orig = store.get(p).values[k];
            store.get_mut(p).values[k] = orig + eps;
            let plus = eval(store);
            store.get_mut(p).values[k] = orig - eps;
            let minus = eval(store);
            store.get_mut(p).values[k] = orig;
            let numeric = (plus? - minus?) / (2.0 * eps);
            let denom = analytic.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max((analytic - numeric).abs() / denom);
        }
    }
    Ok(worst)
}
