use crate::error::{FpmdError, Result};
use crate::tensor::Scalar;

/// Range importance weights are clipped to after the max shift.
pub const WEIGHT_CLIP: (f64, f64) = (1e-4, 1e2);

/// Mirror-descent importance weights `exp((Q − max Q)/λ)`, clipped to
/// [`WEIGHT_CLIP`].
///
/// The shift multiplies every weight by one positive constant, which leaves
/// the minimizer of the weighted loss unchanged.
pub fn importance_weights<T: Scalar>(q: &[T], lambda: f64) -> Result<Vec<T>> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(FpmdError::InvalidArgument(format!(
            "temperature must be positive, got {lambda}"
        )));
    }
    if q.iter().any(|x| !x.is_finite()) {
        return Err(FpmdError::NonFinite("Q values for importance weights".into()));
    }
    let Some(max) = q.iter().copied().reduce(T::max) else {
        return Ok(Vec::new());
    };
    let lambda = T::from(lambda).unwrap();
    let (lo, hi) = (T::from(WEIGHT_CLIP.0).unwrap(), T::from(WEIGHT_CLIP.1).unwrap());
    Ok(q
        .iter()
        .map(|&x| ((x - max) / lambda).exp().max(lo).min(hi))
        .collect())
}
