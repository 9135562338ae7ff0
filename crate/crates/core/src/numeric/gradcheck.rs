use super::tape::{ParamId, ParamStore, Tape, Var};
use crate::error::{GapError, Result};

/// Worst relative error between reverse-mode and central-difference
/// gradients of `build` with respect to one parameter.
///
/// `build` replays the forward computation onto a fresh tape from the
/// current store contents and returns the scalar output. Relative error per
/// coordinate is `|a - b| / max(|a|, |b|, 1e-8)`.
pub fn finite_difference_check<F>(
    store: &mut ParamStore,
    param: ParamId,
    step: f64,
    mut build: F,
) -> Result<f64>
where
    F: FnMut(&ParamStore, &mut Tape) -> Result<Var>,
{
    if !(step > 0.0 && step.is_finite()) {
        return Err(GapError::InvalidArgument(format!(
            "finite-difference step must be positive, got {step}"
        )));
    }
    let mut tape = Tape::new();
    let out = build(store, &mut tape)?;
    let grads = tape.backward(out)?;
    let analytic = match grads.get(param) {
        Ok(g) => g.clone(),
        Err(_) => {
            let (r, c) = store.value(param).shape();
            crate::numeric::Matrix::zeros(r, c)
        }
    };

    let mut eval = |store: &ParamStore| -> Result<f64> {
        let mut tape = Tape::new();
        let out = build(store, &mut tape)?;
        Ok(tape.scalar(out))
    };

    let mut worst = 0.0f64;
    for k in 0..analytic.data().len() {
        let original = store.value(param).data()[k];
        store.value_mut(param).data_mut()[k] = original + step;
        let plus = eval(store)?;
        store.value_mut(param).data_mut()[k] = original - step;
        let minus = eval(store)?;
        store.value_mut(param).data_mut()[k] = original;
        let numeric = (plus - minus) / (2.0 * step);
        let a = analytic.data()[k];
        let denom = a.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((a - numeric).abs() / denom);
    }
    Ok(worst)
}
