//! Composite layer functions built from the differentiable primitives.

use super::error::{Result, TensorError};
use super::tensor::Tensor;
use crate::scalar::Scalar;

fn channel_view<T: Scalar>(v: &Tensor<T>, like: &Tensor<T>, op: &'static str) -> Result<Tensor<T>> {
    let c = like.shape().get(1).copied().unwrap_or(0);
    if like.rank() < 2 || v.numel() != c {
        return Err(TensorError::ShapeMismatch {
            op,
            lhs: like.shape().to_vec(),
            rhs: v.shape().to_vec(),
        });
    }
    let mut view = vec![1; like.rank()];
    view[1] = c;
    v.reshape(&view)
}

impl<T: Scalar> Tensor<T> {
    /// Affine map over the trailing axis: `[..., F_in] x [F_out, F_in] + [F_out]`.
    pub fn linear(&self, weight: &Tensor<T>, bias: Option<&Tensor<T>>) -> Result<Tensor<T>> {
        let f_in = *self.shape().last().unwrap_or(&0);
        if weight.rank() != 2 || weight.shape()[1] != f_in || self.rank() == 0 {
            return Err(TensorError::ShapeMismatch {
                op: "linear",
                lhs: self.shape().to_vec(),
                rhs: weight.shape().to_vec(),
            });
        }
        let f_out = weight.shape()[0];
        let rows = self.numel() / f_in;
        let mut y = self.reshape(&[rows, f_in])?.matmul(&weight.swap_last2()?)?;
        if let Some(b) = bias {
            if b.shape() != [f_out] {
                return Err(TensorError::ShapeMismatch {
                    op: "linear bias",
                    lhs: vec![f_out],
                    rhs: b.shape().to_vec(),
                });
            }
            y = y.add(&b.reshape(&[1, f_out])?)?;
        }
        let mut out_shape = self.shape().to_vec();
        *out_shape.last_mut().unwrap() = f_out;
        y.reshape(&out_shape)
    }

    /// Per-instance, per-channel normalization of `[B, C, L]` over the length axis
    /// (population variance), followed by a per-channel affine map.
    pub fn instance_norm(&self, gain: &Tensor<T>, shift: &Tensor<T>, eps: T) -> Result<Tensor<T>> {
        if self.rank() != 3 {
            return Err(TensorError::ShapeMismatch {
                op: "instance_norm",
                lhs: self.shape().to_vec(),
                rhs: gain.shape().to_vec(),
            });
        }
        let shape = self.shape().to_vec();
        let stats = [shape[0], shape[1], 1];
        let inv_len = T::one() / T::lit(shape[2] as f64);
        let mean = self.sum_to(&stats)?.scale(inv_len)?;
        let centered = self.sub(&mean)?;
        let var = centered.square()?.sum_to(&stats)?.scale(inv_len)?;
        let inv_std = var.add_scalar(eps)?.powf(T::lit(-0.5))?;
        let scale = inv_std.mul(&channel_view(gain, self, "instance_norm gain")?)?;
        centered
            .mul(&scale)?
            .add(&channel_view(shift, self, "instance_norm shift")?)
    }

    /// Parametric ReLU with one trainable slope per channel (axis 1), or a single slope
    /// shared by every element when `alpha` has one element.
    pub fn prelu(&self, alpha: &Tensor<T>) -> Result<Tensor<T>> {
        let slope = if alpha.numel() == 1 && (self.rank() < 2 || self.shape()[1] != 1) {
            alpha.reshape(&vec![1; self.rank()])?
        } else {
            channel_view(alpha, self, "prelu")?
        };
        self.gated_scale(self, &slope)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_examples() {
        let x = Tensor::from_vec(vec![1.0, 2.0], &[2]).unwrap();
        let w = Tensor::from_vec(vec![1.0, 1.0, 1.0, -1.0], &[2, 2]).unwrap();
        let b = Tensor::from_vec(vec![0.0, 1.0], &[2]).unwrap();
        assert_eq!(x.linear(&w, Some(&b)).unwrap().data(), &[3.0, 0.0]);

        let eye = Tensor::from_vec(vec![1.0, 0.0, 0.0, 1.0], &[2, 2]).unwrap();
        let zero = Tensor::zeros(&[2]).unwrap();
        let x = Tensor::from_vec(vec![1.5, -2.0, 0.25, 9.0], &[2, 2]).unwrap();
        assert_eq!(x.linear(&eye, Some(&zero)).unwrap().data(), x.data());
    }

    #[test]
    fn framewise_linear_shape() {
        let x = Tensor::<f32>::zeros(&[1, 1023, 512]).unwrap();
        let w = Tensor::<f32>::zeros(&[32, 512]).unwrap();
        assert_eq!(x.linear(&w, None).unwrap().shape(), &[1, 1023, 32]);
    }

    #[test]
    fn instance_norm_examples() {
        let one = Tensor::from_vec(vec![1.0], &[1]).unwrap();
        let zero = Tensor::from_vec(vec![0.0], &[1]).unwrap();
        let x = Tensor::from_vec(vec![1.0, 2.0, 3.0], &[1, 1, 3]).unwrap();
        let y = x.instance_norm(&one, &zero, 1e-12).unwrap();
        let expect: [f64; 3] = [-1.224744871391589, 0.0, 1.224744871391589];
        for (a, b) in y.data().iter().zip(expect) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }

        let shift = Tensor::from_vec(vec![0.7], &[1]).unwrap();
        let c = Tensor::from_vec(vec![4.0; 3], &[1, 1, 3]).unwrap();
        assert_eq!(c.instance_norm(&one, &shift, 1e-5).unwrap().data(), &[0.7; 3]);

        let single = Tensor::from_vec(vec![5.0], &[1, 1, 1]).unwrap();
        assert_eq!(single.instance_norm(&one, &shift, 1e-5).unwrap().data(), &[0.7]);
    }

    #[test]
    fn prelu_examples() {
        let x = Tensor::from_vec(vec![-2.0, 0.0, 3.0], &[3]).unwrap();
        let a = |v: f64| Tensor::from_vec(vec![v], &[1]).unwrap();
        assert_eq!(x.prelu(&a(0.25)).unwrap().data(), &[-0.5, 0.0, 3.0]);
        assert_eq!(x.prelu(&a(0.0)).unwrap().data(), &[0.0, 0.0, 3.0]);
        assert_eq!(x.prelu(&a(1.0)).unwrap().data(), x.data());
    }
}
