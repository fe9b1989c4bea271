use crate::autodiff::{Tensor, TensorError};
use crate::scalar::Scalar;

/// Bias-corrected Adam with one first/second moment buffer per parameter tensor.
#[derive(Debug, Clone)]
pub struct Adam<T: Scalar> {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    steps: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Scalar> Adam<T> {
    /// Fresh optimizer for parameters of the given sizes.
    pub fn new(lr: f64, beta1: f64, beta2: f64, eps: f64, sizes: &[usize]) -> Self {
        Adam {
            lr,
            beta1,
            beta2,
            eps,
            steps: 0,
            m: sizes.iter().map(|&n| vec![T::zero(); n]).collect(),
            v: sizes.iter().map(|&n| vec![T::zero(); n]).collect(),
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn betas(&self) -> (f64, f64) {
        (self.beta1, self.beta2)
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Number of updates applied so far.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn moments(&self) -> (&[Vec<T>], &[Vec<T>]) {
        (&self.m, &self.v)
    }

    /// Restores saved state. Moment buffers must match the sizes given at construction.
    pub fn restore(&mut self, steps: u64, m: Vec<Vec<T>>, v: Vec<Vec<T>>) -> Result<(), TensorError> {
        let sizes = |b: &[Vec<T>]| b.iter().map(Vec::len).collect::<Vec<_>>();
        let expect = sizes(&self.m);
        if sizes(&m) != expect || sizes(&v) != expect {
            return Err(TensorError::ShapeMismatch {
                op: "adam restore",
                lhs: expect,
                rhs: sizes(&m),
            });
        }
        self.steps = steps;
        self.m = m;
        self.v = v;
        Ok(())
    }

    /// One update. Parameters are replaced by fresh leaves holding the new values.
    pub fn step(&mut self, params: &mut [&mut Tensor<T>], grads: &[Tensor<T>]) -> Result<(), TensorError> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(TensorError::ShapeMismatch {
                op: "adam step",
                lhs: vec![self.m.len()],
                rhs: vec![params.len(), grads.len()],
            });
        }
        for (p, g) in params.iter().zip(grads) {
            if p.shape() != g.shape() {
                return Err(TensorError::ShapeMismatch {
                    op: "adam step",
                    lhs: p.shape().to_vec(),
                    rhs: g.shape().to_vec(),
                });
            }
            if !g.all_finite() {
                return Err(TensorError::NonFinite {
                    context: format!("optimizer gradient of shape {:?}", g.shape()),
                });
            }
        }
        self.steps += 1;
        let t = self.steps as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2) = (T::lit(self.beta1), T::lit(self.beta2));
        let (a1, a2) = (T::lit(1.0 - self.beta1), T::lit(1.0 - self.beta2));
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            let mut next = p.to_vec();
            for (((w, &gi), mi), vi) in next.iter_mut().zip(g.data()).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = b1 * *mi + a1 * gi;
                *vi = b2 * *vi + a2 * gi * gi;
                let m_hat = mi.as_f64() / c1;
                let v_hat = vi.as_f64() / c2;
                *w = T::lit(w.as_f64() - self.lr * m_hat / (v_hat.sqrt() + self.eps));
            }
            **p = Tensor::parameter(next, p.shape())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_param(v: f64) -> Tensor<f64> {
        Tensor::parameter(vec![v], &[1]).unwrap()
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut opt: Adam<f64> = Adam::new(0.1, 0.5, 0.9, 1e-8, &[1]);
        let mut p = scalar_param(1.0);
        let g = Tensor::from_vec(vec![1.0], &[1]).unwrap();
        opt.step(&mut [&mut p], &[g]).unwrap();
        assert!((p.data()[0] - 0.9).abs() < 1e-7);
        assert!(p.requires_grad());
        assert_eq!(opt.steps(), 1);
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut opt: Adam<f64> = Adam::new(0.1, 0.5, 0.9, 1e-8, &[3]);
        let mut p = Tensor::parameter(vec![1.0, -2.0, 3.0], &[3]).unwrap();
        for _ in 0..3 {
            let g = Tensor::zeros(&[3]).unwrap();
            opt.step(&mut [&mut p], &[g]).unwrap();
        }
        assert_eq!(p.data(), &[1.0, -2.0, 3.0]);
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut opt: Adam<f64> = Adam::new(0.1, 0.5, 0.9, 1e-8, &[1]);
        let mut p = scalar_param(1.0);
        let g = Tensor::from_vec(vec![f64::NAN], &[1]).unwrap();
        assert!(matches!(opt.step(&mut [&mut p], &[g]), Err(TensorError::NonFinite { .. })));
        assert_eq!(opt.steps(), 0);
    }
}
