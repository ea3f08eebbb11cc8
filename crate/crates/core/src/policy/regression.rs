use ndarray::ArrayView2;

use crate::error::{FpmdError, Result};
use crate::tensor::{Detached, Mlp, ParamGrads, Scalar};

#[derive(Debug, Clone)]
pub struct LossOutput<T> {
    pub loss: T,
    pub grads: ParamGrads<T>,
    pub mean_weight: T,
}

/// `mean_i w_i ‖f(x_i) − y_i‖²` and its gradient with respect to the network
/// parameters only. The target is detached, so nothing flows into whatever
/// produced it.
pub fn weighted_regression<T: Scalar>(
    net: &Mlp<T>,
    inputs: ArrayView2<'_, T>,
    target: &Detached<T>,
    weights: &[T],
) -> Result<LossOutput<T>> {
    let rows = inputs.nrows();
    if rows == 0 {
        return Err(FpmdError::InvalidArgument("empty batch".into()));
    }
    if weights.len() != rows {
        return Err(FpmdError::shape("loss weights", rows, weights.len()));
    }
    if target.view().dim() != (rows, net.out_dim()) {
        return Err(FpmdError::shape(
            "regression target",
            format!("{:?}", (rows, net.out_dim())),
            format!("{:?}", target.view().dim()),
        ));
    }
    let n = T::from(rows).unwrap();
    let two = T::from(2.0).unwrap();
    let mut loss = T::zero();
    let (_, grads, _) = net.grad_with(inputs, |out| {
        let mut residual = out - &target.view();
        for (mut row, &w) in residual.rows_mut().into_iter().zip(weights) {
            loss = loss + w * row.iter().fold(T::zero(), |acc, &x| acc + x * x);
            let scale = two * w / n;
            row.mapv_inplace(|x| x * scale);
        }
        Ok(residual)
    })?;
    let mean_weight = weights.iter().fold(T::zero(), |a, &w| a + w) / n;
    Ok(LossOutput {
        loss: loss / n,
        grads,
        mean_weight,
    })
}

