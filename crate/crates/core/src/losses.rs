//! Adversarial objectives and regularizers.
//!
//! Critic losses use the Wasserstein difference form
//! `-mean C(x, y) + mean C(x_hat, y)` plus either the two zero-centered penalties
//! (R1 on clean data, R2 on generated data) or the interpolated gradient penalty.
//! Generator losses add an SNR or L1 reconstruction term to `-mean C(x_hat, y)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{grad, with_grad_mode, Tensor, TensorError};
use crate::models::{Critic, Enhancer, ModelError};
use crate::scalar::Scalar;

/// Floor inside the interpolated-penalty norm so its gradient stays finite at zero.
const GP_NORM_EPS: f64 = 1e-20;

#[derive(Debug, Error)]
pub enum LossError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("{term} is not finite ({value})")]
    NonFinite { term: &'static str, value: f64 },
    #[error("{0}")]
    InvalidArgument(String),
}

/// Reconstruction term added to the generator objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyMode {
    #[default]
    Snr,
    L1,
}

impl PenaltyMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PenaltyMode::Snr => "snr",
            PenaltyMode::L1 => "l1",
        }
    }
}

/// Regularizer of the critic objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DiscPenalty {
    #[default]
    R1R2,
    InterpGp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub lambda_snr: f64,
    pub lambda_l1: f64,
    pub gamma: f64,
    pub lambda_gp: f64,
    pub penalty_mode: PenaltyMode,
    pub disc_penalty: DiscPenalty,
    pub snr_eps: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_snr: 10.0,
            lambda_l1: 100.0,
            gamma: 10.0,
            lambda_gp: 10.0,
            penalty_mode: PenaltyMode::Snr,
            disc_penalty: DiscPenalty::R1R2,
            snr_eps: 1e-8,
        }
    }
}

impl LossWeights {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        for (name, val) in [
            ("lambda_snr", self.lambda_snr),
            ("lambda_l1", self.lambda_l1),
            ("gamma", self.gamma),
            ("lambda_gp", self.lambda_gp),
        ] {
            if !(val >= 0.0 && val.is_finite()) {
                v.push(format!("{name} must be finite and >= 0, got {val}"));
            }
        }
        if !(self.snr_eps > 0.0) {
            v.push(format!("snr_eps must be > 0, got {}", self.snr_eps));
        }
        v
    }

    /// Weight of the active generator penalty.
    pub fn penalty_weight(&self) -> f64 {
        match self.penalty_mode {
            PenaltyMode::Snr => self.lambda_snr,
            PenaltyMode::L1 => self.lambda_l1,
        }
    }
}

fn check_pair<T: Scalar>(op: &'static str, clean: &Tensor<T>, enhanced: &Tensor<T>) -> Result<(), LossError> {
    if clean.shape() != enhanced.shape() || clean.rank() != 2 {
        return Err(TensorError::ShapeMismatch {
            op,
            lhs: clean.shape().to_vec(),
            rhs: enhanced.shape().to_vec(),
        }
        .into());
    }
    Ok(())
}

fn finite<T: Scalar>(term: &'static str, t: &Tensor<T>) -> Result<f64, LossError> {
    let value = t.item()?.as_f64();
    if !value.is_finite() {
        return Err(LossError::NonFinite { term, value });
    }
    Ok(value)
}

/// Negative SNR in dB, averaged over the batch:
/// `mean_b -10 log10((|x|^2 + eps) / (|x - x_hat|^2 + eps))`.
pub fn snr_penalty<T: Scalar>(clean: &Tensor<T>, enhanced: &Tensor<T>, eps: f64) -> Result<Tensor<T>, LossError> {
    check_pair("snr_penalty", clean, enhanced)?;
    if !(eps > 0.0) {
        return Err(LossError::InvalidArgument(format!("snr eps must be > 0, got {eps}")));
    }
    let eps = T::lit(eps);
    let signal = clean.detach().square()?.sum_axis(1, false)?.add_scalar(eps)?.log10()?;
    let noise = clean.sub(enhanced)?.square()?.sum_axis(1, false)?.add_scalar(eps)?.log10()?;
    Ok(noise.sub(&signal)?.scale(T::lit(10.0))?.mean()?)
}

/// `sum |x_hat - x|` divided by the batch size.
pub fn l1_penalty<T: Scalar>(clean: &Tensor<T>, enhanced: &Tensor<T>) -> Result<Tensor<T>, LossError> {
    check_pair("l1_penalty", clean, enhanced)?;
    let batch = clean.shape()[0];
    Ok(enhanced.sub(clean)?.abs()?.sum()?.scale(T::lit(1.0 / batch as f64))?)
}

/// Generator penalty selected by `weights.penalty_mode`, unweighted.
pub fn generator_penalty<T: Scalar>(clean: &Tensor<T>, enhanced: &Tensor<T>, weights: &LossWeights) -> Result<Tensor<T>, LossError> {
    match weights.penalty_mode {
        PenaltyMode::Snr => snr_penalty(clean, enhanced, weights.snr_eps),
        PenaltyMode::L1 => l1_penalty(clean, enhanced),
    }
}

/// Per-item squared norm of the critic gradient with respect to `point`, kept differentiable
/// in the critic parameters.
fn critic_grad_sq_norm<T: Scalar, C: Critic<T> + ?Sized>(
    critic: &C,
    point: &Tensor<T>,
    noisy: &Tensor<T>,
) -> Result<Tensor<T>, LossError> {
    with_grad_mode(true, || {
        let input = point.detach().leaf();
        let scores = critic.score(&input, &noisy.detach())?;
        let g = grad(&scores.sum()?, &[&input], true)?.remove(0);
        Ok(g.square()?.sum_axis(1, false)?)
    })
}

/// Zero-centered gradient penalty `gamma/2 * E |grad_x C(x, y)|^2`, with the gradient taken
/// with respect to the candidate waveform only. Evaluated on clean data this is R1, on
/// generated data R2. The result is differentiable with respect to the critic parameters.
pub fn zero_centered_penalty<T: Scalar, C: Critic<T> + ?Sized>(
    critic: &C,
    candidate: &Tensor<T>,
    noisy: &Tensor<T>,
    gamma: f64,
) -> Result<Tensor<T>, LossError> {
    let sq = critic_grad_sq_norm(critic, candidate, noisy)?;
    Ok(with_grad_mode(true, || sq.mean()?.scale(T::lit(gamma / 2.0)))?)
}

/// Interpolated gradient penalty `lambda * E (|grad C(z, y)| - 1)^2` at
/// `z = mix * real + (1 - mix) * fake`, one mixing coefficient per batch item.
pub fn interp_gradient_penalty<T: Scalar, C: Critic<T> + ?Sized>(
    critic: &C,
    real: &Tensor<T>,
    fake: &Tensor<T>,
    noisy: &Tensor<T>,
    mix: &[T],
    lambda_gp: f64,
) -> Result<Tensor<T>, LossError> {
    check_pair("interp_gradient_penalty", real, fake)?;
    let (batch, len) = (real.shape()[0], real.shape()[1]);
    if mix.len() != batch {
        return Err(LossError::InvalidArgument(format!(
            "need one mixing coefficient per batch item ({batch}), got {}",
            mix.len()
        )));
    }
    let z: Vec<T> = real
        .data()
        .chunks(len)
        .zip(fake.data().chunks(len))
        .zip(mix)
        .flat_map(|((r, f), &e)| r.iter().zip(f).map(move |(&r, &f)| e * r + (T::one() - e) * f))
        .collect();
    let z = Tensor::from_vec(z, real.shape())?;
    let sq = critic_grad_sq_norm(critic, &z, noisy)?;
    Ok(with_grad_mode(true, || {
        sq.add_scalar(T::lit(GP_NORM_EPS))?
            .sqrt()?
            .add_scalar(-T::one())?
            .square()?
            .mean()?
            .scale(T::lit(lambda_gp))
    })?)
}

/// Critic objective and its components.
#[derive(Debug, Clone)]
pub struct DiscLoss<T: Scalar> {
    pub total: Tensor<T>,
    /// `-mean C(x, y) + mean C(x_hat, y)`.
    pub adversarial: f64,
    pub r1: f64,
    pub r2: f64,
    pub gp: f64,
}

/// Critic objective. `enhanced` is detached so no gradient reaches the generator.
/// `gp_mix` supplies the per-item interpolation coefficients and is only read in
/// interpolated-penalty mode.
pub fn discriminator_loss<T: Scalar, C: Critic<T> + ?Sized>(
    critic: &C,
    clean: &Tensor<T>,
    enhanced: &Tensor<T>,
    noisy: &Tensor<T>,
    weights: &LossWeights,
    gp_mix: Option<&[T]>,
) -> Result<DiscLoss<T>, LossError> {
    check_pair("discriminator_loss", clean, enhanced)?;
    let enhanced = enhanced.detach();
    let real = critic.score(clean, noisy)?.mean()?;
    let fake = critic.score(&enhanced, noisy)?.mean()?;
    let adversarial = fake.sub(&real)?;
    let adv_value = finite("critic adversarial loss", &adversarial)?;
    let mut total = adversarial;
    let (mut r1, mut r2, mut gp) = (0.0, 0.0, 0.0);
    match weights.disc_penalty {
        DiscPenalty::R1R2 => {
            let p1 = zero_centered_penalty(critic, clean, noisy, weights.gamma)?;
            let p2 = zero_centered_penalty(critic, &enhanced, noisy, weights.gamma)?;
            r1 = finite("R1 penalty", &p1)?;
            r2 = finite("R2 penalty", &p2)?;
            total = total.add(&p1)?.add(&p2)?;
        }
        DiscPenalty::InterpGp => {
            let mix = gp_mix.ok_or_else(|| LossError::InvalidArgument("interpolated penalty needs mixing coefficients".into()))?;
            let p = interp_gradient_penalty(critic, clean, &enhanced, noisy, mix, weights.lambda_gp)?;
            gp = finite("gradient penalty", &p)?;
            total = total.add(&p)?;
        }
    }
    finite("critic loss", &total)?;
    Ok(DiscLoss {
        total,
        adversarial: adv_value,
        r1,
        r2,
        gp,
    })
}

/// Generator objective and its components.
#[derive(Debug, Clone)]
pub struct GenLoss<T: Scalar> {
    pub total: Tensor<T>,
    /// `-mean C(x_hat, y)`.
    pub adversarial: f64,
    /// Unweighted value of the active penalty.
    pub penalty: f64,
}

/// Generator objective for an already computed enhancement `enhanced = G(noisy)`.
pub fn generator_loss_from<T: Scalar, C: Critic<T> + ?Sized>(
    critic: &C,
    clean: &Tensor<T>,
    enhanced: &Tensor<T>,
    noisy: &Tensor<T>,
    weights: &LossWeights,
) -> Result<GenLoss<T>, LossError> {
    check_pair("generator_loss", clean, enhanced)?;
    let adversarial = critic.score(enhanced, noisy)?.mean()?.neg()?;
    let penalty = generator_penalty(clean, enhanced, weights)?;
    let adv_value = finite("generator adversarial loss", &adversarial)?;
    let pen_value = finite("generator penalty", &penalty)?;
    let total = adversarial.add(&penalty.scale(T::lit(weights.penalty_weight()))?)?;
    finite("generator loss", &total)?;
    Ok(GenLoss {
        total,
        adversarial: adv_value,
        penalty: pen_value,
    })
}

/// Generator objective `-mean C(G(y), y) + lambda * penalty(x, G(y))`.
pub fn generator_loss<T: Scalar, C: Critic<T> + ?Sized, G: Enhancer<T> + ?Sized>(
    critic: &C,
    generator: &G,
    clean: &Tensor<T>,
    noisy: &Tensor<T>,
    weights: &LossWeights,
) -> Result<GenLoss<T>, LossError> {
    let enhanced = generator.enhance(noisy)?;
    generator_loss_from(critic, clean, &enhanced, noisy, weights)
}
