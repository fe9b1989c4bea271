//! Elementwise, reduction and shape operations. Every backward rule is written in terms
//! of these same differentiable ops so that gradients can be differentiated again.

use super::error::{invalid, Result, TensorError};
use super::tensor::{check_shape, Tensor};
use crate::scalar::Scalar;

/// `b` must match `a` or be broadcastable to it (same rank, unit extents elsewhere).
fn rhs_fits<T: Scalar>(op: &'static str, a: &Tensor<T>, b: &Tensor<T>) -> Result<()> {
    let ok = a.rank() == b.rank() && a.shape().iter().zip(b.shape()).all(|(&x, &y)| x == y || y == 1);
    if !ok {
        return Err(TensorError::ShapeMismatch {
            op,
            lhs: a.shape().to_vec(),
            rhs: b.shape().to_vec(),
        });
    }
    Ok(())
}

fn when<T: Scalar>(needed: bool, f: impl FnOnce() -> Result<Tensor<T>>) -> Result<Option<Tensor<T>>> {
    if needed {
        f().map(Some)
    } else {
        Ok(None)
    }
}

fn map<T: Scalar>(a: &Tensor<T>, f: impl Fn(T) -> T) -> Vec<T> {
    a.data().iter().map(|&x| f(x)).collect()
}

/// Applies `f` elementwise, repeating the unit extents of `b` across `a`'s shape.
fn zip<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, f: impl Fn(T, T) -> T) -> Vec<T> {
    if a.shape() == b.shape() {
        return a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    }
    let runs = broadcast_runs(b.shape(), a.shape());
    let mut wide = Vec::with_capacity(a.numel());
    expand_rec(b.data(), &runs, &mut wide);
    a.data().iter().zip(&wide).map(|(&x, &y)| f(x, y)).collect()
}

/// Collapses a (source, target) shape pair into runs of (extent, broadcast) dims,
/// dropping unit extents.
fn broadcast_runs(src: &[usize], dst: &[usize]) -> Vec<(usize, bool)> {
    let mut runs: Vec<(usize, bool)> = Vec::new();
    for (&s, &d) in src.iter().zip(dst) {
        if d == 1 {
            continue;
        }
        let b = s == 1;
        match runs.last_mut() {
            Some((ext, flag)) if *flag == b => *ext *= d,
            _ => runs.push((d, b)),
        }
    }
    runs
}

fn expand_rec<T: Copy>(src: &[T], runs: &[(usize, bool)], out: &mut Vec<T>) {
    let Some((&(extent, bcast), inner)) = runs.split_first() else {
        out.push(src[0]);
        return;
    };
    if inner.is_empty() {
        if bcast {
            out.extend(std::iter::repeat_n(src[0], extent));
        } else {
            out.extend_from_slice(&src[..extent]);
        }
        return;
    }
    let inner_src: usize = inner.iter().filter(|r| !r.1).map(|r| r.0).product();
    for i in 0..extent {
        let off = if bcast { 0 } else { i * inner_src };
        expand_rec(&src[off..], inner, out);
    }
}

fn reduce_rec<T: Scalar>(src: &[T], runs: &[(usize, bool)], acc: &mut [f64]) {
    let Some((&(extent, reduced), inner)) = runs.split_first() else {
        acc[0] += src[0].as_f64();
        return;
    };
    if inner.is_empty() {
        if reduced {
            acc[0] += src[..extent].iter().map(|v| v.as_f64()).sum::<f64>();
        } else {
            acc[..extent].iter_mut().zip(&src[..extent]).for_each(|(a, v)| *a += v.as_f64());
        }
        return;
    }
    let inner_src: usize = inner.iter().map(|r| r.0).product();
    let inner_acc: usize = inner.iter().filter(|r| !r.1).map(|r| r.0).product();
    for i in 0..extent {
        let acc_slice = if reduced { &mut acc[..] } else { &mut acc[i * inner_acc..] };
        reduce_rec(&src[i * inner_src..], inner, acc_slice);
    }
}

fn check_broadcastable(op: &'static str, small: &[usize], big: &[usize]) -> Result<()> {
    let ok = small.len() == big.len() && small.iter().zip(big).all(|(&s, &b)| s == b || s == 1);
    if !ok {
        return Err(TensorError::ShapeMismatch {
            op,
            lhs: small.to_vec(),
            rhs: big.to_vec(),
        });
    }
    Ok(())
}

impl<T: Scalar> Tensor<T> {
    /// Elementwise sum; `other` may have unit extents that repeat across `self`.
    pub fn add(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        rhs_fits("add", self, other)?;
        let data = zip(self, other, |a, b| a + b);
        let small = other.shape().to_vec();
        Ok(Tensor::record(data, self.shape().to_vec(), "add", &[self, other], move |_, need, g| {
            Ok(vec![when(need[0], || Ok(g.clone()))?, when(need[1], || g.sum_to(&small))?])
        }))
    }

    /// Elementwise difference; `other` may broadcast as in [`Tensor::add`].
    pub fn sub(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        rhs_fits("sub", self, other)?;
        let data = zip(self, other, |a, b| a - b);
        let small = other.shape().to_vec();
        Ok(Tensor::record(data, self.shape().to_vec(), "sub", &[self, other], move |_, need, g| {
            Ok(vec![when(need[0], || Ok(g.clone()))?, when(need[1], || g.sum_to(&small)?.neg())?])
        }))
    }

    /// Elementwise product; `other` may broadcast as in [`Tensor::add`].
    pub fn mul(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        rhs_fits("mul", self, other)?;
        let data = zip(self, other, |a, b| a * b);
        let small = other.shape().to_vec();
        Ok(Tensor::record(data, self.shape().to_vec(), "mul", &[self, other], move |inp, need, g| {
            Ok(vec![
                when(need[0], || g.mul(&inp[1]))?,
                when(need[1], || g.mul(&inp[0])?.sum_to(&small))?,
            ])
        }))
    }

    /// `self` where `gate > 0` and `alpha * self` elsewhere, with `alpha` broadcast over
    /// `self`. The gate is a constant: no gradient flows into it.
    pub fn gated_scale(&self, gate: &Tensor<T>, alpha: &Tensor<T>) -> Result<Tensor<T>> {
        if gate.shape() != self.shape() {
            return Err(TensorError::ShapeMismatch {
                op: "gated_scale",
                lhs: self.shape().to_vec(),
                rhs: gate.shape().to_vec(),
            });
        }
        rhs_fits("gated_scale", self, alpha)?;
        let slopes = zip(self, alpha, |_, a| a);
        let data = self
            .data()
            .iter()
            .zip(gate.data())
            .zip(&slopes)
            .map(|((&v, &m), &a)| if m > T::zero() { v } else { a * v })
            .collect();
        let gate = gate.detach();
        let small = alpha.shape().to_vec();
        Ok(Tensor::record(data, self.shape().to_vec(), "gated_scale", &[self, alpha], move |inp, need, g| {
            let gv = when(need[0], || g.gated_scale(&gate, &inp[1]))?;
            let ga = when(need[1], || {
                let u = g.mul(&inp[0])?;
                let zero = Tensor::zeros(&small)?;
                u.sub(&u.gated_scale(&gate, &zero)?)?.sum_to(&small)
            })?;
            Ok(vec![gv, ga])
        }))
    }

    /// Multiplication by a constant.
    pub fn scale(&self, c: T) -> Result<Tensor<T>> {
        let data = map(self, |a| a * c);
        Ok(Tensor::record(data, self.shape().to_vec(), "scale", &[self], move |_, _, g| {
            Ok(vec![Some(g.scale(c)?)])
        }))
    }

    pub fn add_scalar(&self, c: T) -> Result<Tensor<T>> {
        let data = map(self, |a| a + c);
        Ok(Tensor::record(data, self.shape().to_vec(), "add_scalar", &[self], |_, _, g| {
            Ok(vec![Some(g.clone())])
        }))
    }

    pub fn neg(&self) -> Result<Tensor<T>> {
        self.scale(-T::one())
    }

    pub fn square(&self) -> Result<Tensor<T>> {
        let data = map(self, |a| a * a);
        Ok(Tensor::record(data, self.shape().to_vec(), "square", &[self], |inp, _, g| {
            Ok(vec![Some(g.mul(&inp[0].scale(T::lit(2.0))?)?)])
        }))
    }

    /// Elementwise power with a constant exponent.
    pub fn powf(&self, p: T) -> Result<Tensor<T>> {
        let data = map(self, |a| a.powf(p));
        if let Some(i) = data.iter().position(|v| v.is_nan()) {
            if !self.data()[i].is_nan() {
                return Err(TensorError::Domain {
                    op: "powf",
                    detail: format!("{}^{} is undefined", self.data()[i], p),
                });
            }
        }
        Ok(Tensor::record(data, self.shape().to_vec(), "powf", &[self], move |inp, _, g| {
            let d = inp[0].powf(p - T::one())?.scale(p)?;
            Ok(vec![Some(g.mul(&d)?)])
        }))
    }

    pub fn sqrt(&self) -> Result<Tensor<T>> {
        self.powf(T::lit(0.5))
    }

    /// Base-10 logarithm; every element must be strictly positive.
    pub fn log10(&self) -> Result<Tensor<T>> {
        if let Some(&bad) = self.data().iter().find(|&&v| !(v > T::zero())) {
            return Err(TensorError::Domain {
                op: "log10",
                detail: format!("non-positive argument {bad}"),
            });
        }
        let data = map(self, |a| a.log10());
        Ok(Tensor::record(data, self.shape().to_vec(), "log10", &[self], |inp, _, g| {
            let inv_ln10 = T::one() / T::lit(std::f64::consts::LN_10);
            let d = inp[0].powf(-T::one())?.scale(inv_ln10)?;
            Ok(vec![Some(g.mul(&d)?)])
        }))
    }

    pub fn relu(&self) -> Result<Tensor<T>> {
        let data = map(self, |a| if a > T::zero() { a } else { T::zero() });
        Ok(Tensor::record(data, self.shape().to_vec(), "relu", &[self], |inp, _, g| {
            let mask = map(&inp[0], |a| if a > T::zero() { T::one() } else { T::zero() });
            let mask = Tensor::constant(mask, inp[0].shape().to_vec());
            Ok(vec![Some(g.mul(&mask)?)])
        }))
    }

    pub fn abs(&self) -> Result<Tensor<T>> {
        let data = map(self, |a| a.abs());
        Ok(Tensor::record(data, self.shape().to_vec(), "abs", &[self], |inp, _, g| {
            let sign = map(&inp[0], |a| {
                if a > T::zero() {
                    T::one()
                } else if a < T::zero() {
                    -T::one()
                } else {
                    T::zero()
                }
            });
            let sign = Tensor::constant(sign, inp[0].shape().to_vec());
            Ok(vec![Some(g.mul(&sign)?)])
        }))
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor<T>> {
        check_shape(shape, self.numel())?;
        if shape == self.shape() {
            return Ok(self.clone());
        }
        let from = self.shape().to_vec();
        Ok(Tensor::record(self.to_vec(), shape.to_vec(), "reshape", &[self], move |_, _, g| {
            Ok(vec![Some(g.reshape(&from)?)])
        }))
    }

    /// Repeats unit extents up to `shape` (same rank).
    pub fn broadcast_to(&self, shape: &[usize]) -> Result<Tensor<T>> {
        check_broadcastable("broadcast_to", self.shape(), shape)?;
        if shape == self.shape() {
            return Ok(self.clone());
        }
        let runs = broadcast_runs(self.shape(), shape);
        let mut data = Vec::with_capacity(shape.iter().product());
        expand_rec(self.data(), &runs, &mut data);
        let from = self.shape().to_vec();
        Ok(Tensor::record(data, shape.to_vec(), "broadcast_to", &[self], move |_, _, g| {
            Ok(vec![Some(g.sum_to(&from)?)])
        }))
    }

    /// Sums over the axes where `shape` has unit extent (same rank). Accumulates in f64.
    pub fn sum_to(&self, shape: &[usize]) -> Result<Tensor<T>> {
        check_broadcastable("sum_to", shape, self.shape())?;
        if shape == self.shape() {
            return Ok(self.clone());
        }
        let runs = broadcast_runs(shape, self.shape());
        let mut acc = vec![0.0f64; shape.iter().product()];
        reduce_rec(self.data(), &runs, &mut acc);
        let data = acc.into_iter().map(T::lit).collect();
        let from = self.shape().to_vec();
        Ok(Tensor::record(data, shape.to_vec(), "sum_to", &[self], move |_, _, g| {
            Ok(vec![Some(g.broadcast_to(&from)?)])
        }))
    }

    /// Sum of all elements as a rank-0 tensor.
    pub fn sum(&self) -> Result<Tensor<T>> {
        let ones = vec![1; self.rank()];
        self.sum_to(&ones)?.reshape(&[])
    }

    pub fn mean(&self) -> Result<Tensor<T>> {
        let n = self.numel();
        self.sum()?.scale(T::one() / T::lit(n as f64))
    }

    fn reduced_shape(&self, axis: usize) -> Result<Vec<usize>> {
        if axis >= self.rank() {
            return Err(invalid("reduce", format!("axis {axis} out of range for shape {:?}", self.shape())));
        }
        let mut s = self.shape().to_vec();
        s[axis] = 1;
        Ok(s)
    }

    pub fn sum_axis(&self, axis: usize, keepdim: bool) -> Result<Tensor<T>> {
        let kept = self.reduced_shape(axis)?;
        let s = self.sum_to(&kept)?;
        if keepdim {
            Ok(s)
        } else {
            let mut squeezed = kept;
            squeezed.remove(axis);
            s.reshape(&squeezed)
        }
    }

    pub fn mean_axis(&self, axis: usize, keepdim: bool) -> Result<Tensor<T>> {
        let n = *self
            .shape()
            .get(axis)
            .ok_or_else(|| invalid("mean_axis", format!("axis {axis} out of range for shape {:?}", self.shape())))?;
        self.sum_axis(axis, keepdim)?.scale(T::one() / T::lit(n as f64))
    }

    /// Swaps the two trailing axes (batched transpose).
    pub fn swap_last2(&self) -> Result<Tensor<T>> {
        let r = self.rank();
        if r < 2 {
            return Err(invalid("swap_last2", format!("rank {r} < 2")));
        }
        let (rows, cols) = (self.shape()[r - 2], self.shape()[r - 1]);
        let batch = self.numel() / (rows * cols);
        let src = self.data();
        let mut data = vec![T::zero(); self.numel()];
        for b in 0..batch {
            let s = &src[b * rows * cols..(b + 1) * rows * cols];
            let d = &mut data[b * rows * cols..(b + 1) * rows * cols];
            for i in 0..rows {
                for j in 0..cols {
                    d[j * rows + i] = s[i * cols + j];
                }
            }
        }
        let mut shape = self.shape().to_vec();
        shape.swap(r - 2, r - 1);
        Ok(Tensor::record(data, shape, "swap_last2", &[self], |_, _, g| Ok(vec![Some(g.swap_last2()?)])))
    }

    /// Matrix product of `[m, k]` and `[k, n]`.
    pub fn matmul(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        let mismatch = || TensorError::ShapeMismatch {
            op: "matmul",
            lhs: self.shape().to_vec(),
            rhs: other.shape().to_vec(),
        };
        if self.rank() != 2 || other.rank() != 2 || self.shape()[1] != other.shape()[0] {
            return Err(mismatch());
        }
        let (m, k, n) = (self.shape()[0], self.shape()[1], other.shape()[1]);
        let (a, b) = (self.data(), other.data());
        let mut data = vec![T::zero(); m * n];
        for i in 0..m {
            let row = &mut data[i * n..(i + 1) * n];
            for (p, &aip) in a[i * k..(i + 1) * k].iter().enumerate() {
                if aip == T::zero() {
                    continue;
                }
                row.iter_mut().zip(&b[p * n..(p + 1) * n]).for_each(|(c, &bv)| *c += aip * bv);
            }
        }
        Ok(Tensor::record(data, vec![m, n], "matmul", &[self, other], |inp, need, g| {
            Ok(vec![
                when(need[0], || g.matmul(&inp[1].swap_last2()?))?,
                when(need[1], || inp[0].swap_last2()?.matmul(g))?,
            ])
        }))
    }

    /// Joins tensors along `axis`; all other extents must agree.
    pub fn concat(parts: &[&Tensor<T>], axis: usize) -> Result<Tensor<T>> {
        let first = parts.first().ok_or_else(|| invalid("concat", "no inputs"))?;
        if axis >= first.rank() {
            return Err(invalid("concat", format!("axis {axis} out of range")));
        }
        for p in &parts[1..] {
            let ok = p.rank() == first.rank()
                && p.shape().iter().zip(first.shape()).enumerate().all(|(i, (a, b))| i == axis || a == b);
            if !ok {
                return Err(TensorError::ShapeMismatch {
                    op: "concat",
                    lhs: first.shape().to_vec(),
                    rhs: p.shape().to_vec(),
                });
            }
        }
        let outer: usize = first.shape()[..axis].iter().product();
        let inner: usize = first.shape()[axis + 1..].iter().product();
        let lens: Vec<usize> = parts.iter().map(|p| p.shape()[axis]).collect();
        let total: usize = lens.iter().sum();
        let mut data = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for (p, &len) in parts.iter().zip(&lens) {
                data.extend_from_slice(&p.data()[o * len * inner..(o + 1) * len * inner]);
            }
        }
        let mut shape = first.shape().to_vec();
        shape[axis] = total;
        Ok(Tensor::record(data, shape, "concat", parts, move |inp, need, g| {
            let mut start = 0;
            let mut out = Vec::with_capacity(inp.len());
            for (&n, &len) in need.iter().zip(&lens) {
                out.push(when(n, || g.narrow(axis, start, len))?);
                start += len;
            }
            Ok(out)
        }))
    }

    /// Slice `[start, start + len)` along `axis`.
    pub fn narrow(&self, axis: usize, start: usize, len: usize) -> Result<Tensor<T>> {
        if axis >= self.rank() || len == 0 || start + len > self.shape()[axis] {
            return Err(invalid(
                "narrow",
                format!("range {start}..{} on axis {axis} of {:?}", start + len, self.shape()),
            ));
        }
        let full = self.shape()[axis];
        let outer: usize = self.shape()[..axis].iter().product();
        let inner: usize = self.shape()[axis + 1..].iter().product();
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = (o * full + start) * inner;
            data.extend_from_slice(&self.data()[base..base + len * inner]);
        }
        let mut shape = self.shape().to_vec();
        shape[axis] = len;
        Ok(Tensor::record(data, shape, "narrow", &[self], move |_, _, g| {
            Ok(vec![Some(g.pad_axis(axis, start, full - start - len)?)])
        }))
    }

    /// Zero padding along `axis`.
    pub fn pad_axis(&self, axis: usize, before: usize, after: usize) -> Result<Tensor<T>> {
        if axis >= self.rank() {
            return Err(invalid("pad_axis", format!("axis {axis} out of range")));
        }
        let len = self.shape()[axis];
        let full = before + len + after;
        let outer: usize = self.shape()[..axis].iter().product();
        let inner: usize = self.shape()[axis + 1..].iter().product();
        let mut data = vec![T::zero(); outer * full * inner];
        for o in 0..outer {
            let dst = (o * full + before) * inner;
            data[dst..dst + len * inner].copy_from_slice(&self.data()[o * len * inner..(o + 1) * len * inner]);
        }
        let mut shape = self.shape().to_vec();
        shape[axis] = full;
        Ok(Tensor::record(data, shape, "pad_axis", &[self], move |_, _, g| {
            Ok(vec![Some(g.narrow(axis, before, len)?)])
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(v: &[f64], s: &[usize]) -> Tensor<f64> {
        Tensor::from_vec(v.to_vec(), s).unwrap()
    }

    #[test]
    fn relu_clamps_negatives() {
        assert_eq!(t(&[-1.0, 2.0], &[2]).relu().unwrap().data(), &[0.0, 2.0]);
    }

    #[test]
    fn sum_of_squares() {
        let a = t(&[3.0, 4.0], &[2]);
        assert_eq!(a.mul(&a).unwrap().sum().unwrap().item().unwrap(), 25.0);
    }

    #[test]
    fn empty_tensors_are_rejected() {
        assert!(matches!(
            Tensor::<f64>::from_vec(vec![], &[0]),
            Err(TensorError::InvalidShape { .. })
        ));
        let a = t(&[1.0, 2.0], &[2]);
        assert!(a.mean_axis(1, false).is_err());
    }

    #[test]
    fn log10_domain() {
        assert!(matches!(t(&[1.0, 0.0], &[2]).log10(), Err(TensorError::Domain { .. })));
        assert!(t(&[-3.0], &[1]).log10().is_err());
        assert!((t(&[100.0], &[1]).log10().unwrap().data()[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn broadcast_and_reduce_are_adjoint() {
        let v = t(&[1.0, 2.0, 3.0], &[1, 3, 1]);
        let b = v.broadcast_to(&[2, 3, 4]).unwrap();
        assert_eq!(&b.data()[..8], &[1.0, 1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 2.0]);
        assert_eq!(&b.data()[12..16], &[1.0; 4]);
        let s = b.sum_to(&[1, 3, 1]).unwrap();
        assert_eq!(s.data(), &[8.0, 16.0, 24.0]);
        let s2 = b.sum_to(&[2, 1, 4]).unwrap();
        assert_eq!(s2.data(), &[6.0; 8]);
    }

    #[test]
    fn shape_mismatch_names_both_shapes() {
        let err = t(&[1.0, 2.0], &[2]).add(&t(&[1.0, 2.0, 3.0], &[3])).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[2]") && msg.contains("[3]"), "{msg}");
    }

    #[test]
    fn concat_narrow_pad() {
        let a = t(&[1.0, 2.0, 3.0, 4.0], &[2, 2]);
        let b = t(&[5.0, 6.0], &[2, 1]);
        let c = Tensor::concat(&[&a, &b], 1).unwrap();
        assert_eq!(c.shape(), &[2, 3]);
        assert_eq!(c.data(), &[1.0, 2.0, 5.0, 3.0, 4.0, 6.0]);
        assert_eq!(c.narrow(1, 2, 1).unwrap().data(), b.data());
        let p = b.pad_axis(1, 1, 1).unwrap();
        assert_eq!(p.data(), &[0.0, 5.0, 0.0, 0.0, 6.0, 0.0]);
    }

    #[test]
    fn matmul_and_transpose() {
        let a = t(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[2, 3]);
        let b = a.swap_last2().unwrap();
        assert_eq!(b.data(), &[1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.data(), &[14.0, 32.0, 32.0, 77.0]);
    }

    #[test]
    fn backward_basic_rules() {
        let w = Tensor::parameter(vec![1.0, 2.0], &[2]).unwrap();
        w.square().unwrap().sum().unwrap().backward().unwrap();
        assert_eq!(w.grad().unwrap().data(), &[2.0, 4.0]);

        let x = t(&[0.5, -3.0], &[2]);
        let w = Tensor::parameter(vec![7.0, 1.0], &[2]).unwrap();
        w.mul(&x).unwrap().sum().unwrap().backward().unwrap();
        assert_eq!(w.grad().unwrap().data(), x.data());
    }

    #[test]
    fn backward_accumulates_until_zeroed() {
        let w = Tensor::parameter(vec![1.0, 2.0], &[2]).unwrap();
        for _ in 0..2 {
            w.square().unwrap().sum().unwrap().backward().unwrap();
        }
        assert_eq!(w.grad().unwrap().data(), &[4.0, 8.0]);
        w.zero_grad();
        assert!(w.grad().is_none());
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let w = Tensor::parameter(vec![1.0, 2.0], &[2]).unwrap();
        assert!(matches!(w.square().unwrap().backward(), Err(TensorError::NonScalarLoss { .. })));
    }

    #[test]
    fn nan_gradient_is_detected() {
        // d/dx sqrt(x) at 0 is infinite.
        let w = Tensor::parameter(vec![0.0, 1.0], &[2]).unwrap();
        let err = w.sqrt().unwrap().sum().unwrap().backward().unwrap_err();
        assert!(matches!(err, TensorError::NonFinite { .. }), "{err}");
    }
}
