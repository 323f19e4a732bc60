use super::Tensor;
use crate::error::{Error, Result};

/// Element-wise integer power by repeated multiplication.
pub fn elementwise_pow(t: &Tensor, q: u32) -> Result<Tensor> {
    if q == 0 {
        return Err(Error::Input("power order must be at least 1".into()));
    }
    let data = t
        .data()
        .iter()
        .map(|&v| {
            let mut acc = v;
            for _ in 1..q {
                acc *= v;
            }
            acc
        })
        .collect();
    Ok(Tensor::from_parts(t.shape().clone(), data))
}

pub fn tanh_forward(t: &Tensor) -> Tensor {
    Tensor::from_parts(t.shape().clone(), t.data().iter().map(|v| v.tanh()).collect())
}

/// Backward through tanh given its *output* `activated`.
pub fn tanh_backward(activated: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    activated.expect_same_shape(grad_out, "tanh_backward")?;
    let data = activated
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(a, g)| g * (1.0 - a * a))
        .collect();
    Ok(Tensor::from_parts(activated.shape().clone(), data))
}

/// Max-shifted softmax over a flat logit vector.
pub fn softmax(logits: &Tensor) -> Result<Tensor> {
    if logits.len() < 2 {
        return Err(Error::Input(format!(
            "softmax needs at least 2 classes, got {}",
            logits.len()
        )));
    }
    let max = logits.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.data().iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(Tensor::from_parts(
        logits.shape().clone(),
        exps.into_iter().map(|e| e / total).collect(),
    ))
}

/// Returns `(−log softmax(logits)[target], softmax(logits) − onehot(target))`.
///
/// The loss is evaluated through log-sum-exp so a dominant correct logit
/// gives a loss of exactly zero instead of `-ln(1 - tiny)` noise.
pub fn cross_entropy_with_softmax(logits: &Tensor, target_class: usize) -> Result<(f64, Tensor)> {
    if target_class >= logits.len() {
        return Err(Error::Input(format!(
            "target class {target_class} out of range for {} logits",
            logits.len()
        )));
    }
    let probs = softmax(logits)?;
    let max = logits.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum: f64 = logits.data().iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    let loss = log_sum - (logits.data()[target_class] - max);
    let mut grad = probs;
    grad.data_mut()[target_class] -= 1.0;
    Ok((loss, grad))
}
