use super::error::{invalid, Result};
use super::graph::grad;
use super::tensor::{no_grad, Tensor};

/// Compares reverse-mode gradients of a scalar function against central finite
/// differences at `point`. Returns the largest `|analytic - numeric| / max(1, |numeric|)`
/// over every coordinate of every input.
pub fn grad_check<F>(f: F, point: &[Tensor<f64>], eps: f64) -> Result<f64>
where
    F: Fn(&[Tensor<f64>]) -> Result<Tensor<f64>>,
{
    if !(1e-7..=1e-4).contains(&eps) {
        return Err(invalid("grad_check", format!("eps {eps} outside [1e-7, 1e-4]")));
    }
    let leaves: Vec<Tensor<f64>> = point.iter().map(|t| t.leaf()).collect();
    let out = f(&leaves)?;
    let refs: Vec<&Tensor<f64>> = leaves.iter().collect();
    let analytic = grad(&out, &refs, false)?;

    let eval = |inputs: &[Tensor<f64>]| -> Result<f64> { no_grad(|| f(inputs))?.item() };
    let mut worst = 0.0f64;
    for (i, base) in point.iter().enumerate() {
        for j in 0..base.numel() {
            let mut shifted: Vec<Tensor<f64>> = point.to_vec();
            let mut plus = base.to_vec();
            plus[j] += eps;
            shifted[i] = Tensor::from_vec(plus, base.shape())?;
            let fp = eval(&shifted)?;
            let mut minus = base.to_vec();
            minus[j] -= eps;
            shifted[i] = Tensor::from_vec(minus, base.shape())?;
            let fm = eval(&shifted)?;
            let numeric = (fp - fm) / (2.0 * eps);
            let err = (analytic[i].data()[j] - numeric).abs() / numeric.abs().max(1.0);
            worst = worst.max(err);
        }
    }
    Ok(worst)
}
