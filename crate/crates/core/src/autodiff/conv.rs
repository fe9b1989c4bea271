//! Grouped, strided, dilated 1-D convolution over `[batch, channels, length]`.
//!
//! The forward map, its input-gradient (transposed convolution) and its weight-gradient
//! form a closed family: the derivatives of each member are expressed through the other
//! two, so any number of backward passes can be stacked.

use super::error::{invalid, Result, TensorError};
use super::tensor::Tensor;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub stride: usize,
    pub dilation: usize,
    pub padding: usize,
    pub groups: usize,
}

impl Default for ConvSpec {
    fn default() -> Self {
        ConvSpec {
            stride: 1,
            dilation: 1,
            padding: 0,
            groups: 1,
        }
    }
}

impl ConvSpec {
    pub fn new(stride: usize, dilation: usize, padding: usize, groups: usize) -> Self {
        ConvSpec {
            stride,
            dilation,
            padding,
            groups,
        }
    }

    /// Output length, or `None` when the padded input is shorter than the dilated kernel.
    pub fn output_len(&self, len: usize, kernel: usize) -> Option<usize> {
        let span = self.dilation * (kernel - 1) + 1;
        let padded = len + 2 * self.padding;
        (padded >= span).then(|| (padded - span) / self.stride + 1)
    }

    /// Valid output positions `t` for kernel tap `k`: `0 <= t*stride + k*dilation - padding < len`.
    fn tap_range(&self, k: usize, len: usize, out_len: usize) -> (usize, usize, isize) {
        let off = (k * self.dilation) as isize - self.padding as isize;
        let s = self.stride as isize;
        let lo = if off >= 0 { 0 } else { ((-off) + s - 1) / s };
        let hi = (len as isize - 1 - off).div_euclid(s) + 1;
        let hi = hi.clamp(0, out_len as isize);
        let lo = lo.min(hi);
        (lo as usize, hi as usize, off)
    }
}

#[derive(Debug, Clone, Copy)]
struct Dims {
    batch: usize,
    c_in: usize,
    c_out: usize,
    kernel: usize,
    len_in: usize,
    len_out: usize,
}

impl Dims {
    fn cin_per_group(&self, spec: &ConvSpec) -> usize {
        self.c_in / spec.groups
    }

    fn cout_per_group(&self, spec: &ConvSpec) -> usize {
        self.c_out / spec.groups
    }
}

fn validate(spec: &ConvSpec) -> Result<()> {
    if spec.stride == 0 || spec.dilation == 0 || spec.groups == 0 {
        return Err(invalid("conv1d", format!("stride, dilation and groups must be >= 1, got {spec:?}")));
    }
    Ok(())
}


/// Reduction width (`C_in/groups * K`) from which the column-buffer kernels are used.
const COLUMN_MIN: usize = 8;

fn use_columns(d: &Dims, spec: &ConvSpec) -> bool {
    d.cin_per_group(spec) * d.kernel >= COLUMN_MIN
}

/// Unrolled dot product with a fixed summation order.
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for i in 0..8 {
            acc[i] += x[i] * y[i];
        }
    }
    let mut tail = T::zero();
    for (&x, &y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// Gathers one group of one batch item into rows `cols[t] = [x[j, t*stride + k*dilation - padding]]_(j,k)`,
/// zero where the tap falls into padding.
fn im2col<T: Scalar>(x_item: &[T], grp: usize, d: &Dims, spec: &ConvSpec, cols: &mut [T]) {
    let cin_g = d.cin_per_group(spec);
    let n = cin_g * d.kernel;
    cols.iter_mut().for_each(|v| *v = T::zero());
    for j in 0..cin_g {
        let xrow = &x_item[(grp * cin_g + j) * d.len_in..][..d.len_in];
        for k in 0..d.kernel {
            let (lo, hi, off) = spec.tap_range(k, d.len_in, d.len_out);
            let col = j * d.kernel + k;
            for t in lo..hi {
                cols[t * n + col] = xrow[(t as isize * spec.stride as isize + off) as usize];
            }
        }
    }
}

/// Adjoint of `im2col`: scatter-adds column rows back into the input layout.
fn col2im_add<T: Scalar>(cols: &[T], grp: usize, d: &Dims, spec: &ConvSpec, gx_item: &mut [T]) {
    let cin_g = d.cin_per_group(spec);
    let n = cin_g * d.kernel;
    for j in 0..cin_g {
        let dst = &mut gx_item[(grp * cin_g + j) * d.len_in..][..d.len_in];
        for k in 0..d.kernel {
            let (lo, hi, off) = spec.tap_range(k, d.len_in, d.len_out);
            let col = j * d.kernel + k;
            for t in lo..hi {
                dst[(t as isize * spec.stride as isize + off) as usize] += cols[t * n + col];
            }
        }
    }
}

fn forward_columns<T: Scalar>(x: &[T], w: &[T], d: Dims, spec: &ConvSpec) -> Vec<T> {
    let n = d.cin_per_group(spec) * d.kernel;
    let cout_g = d.cout_per_group(spec);
    let mut out = vec![T::zero(); d.batch * d.c_out * d.len_out];
    let mut cols = vec![T::zero(); d.len_out * n];
    for b in 0..d.batch {
        let x_item = &x[b * d.c_in * d.len_in..][..d.c_in * d.len_in];
        for grp in 0..spec.groups {
            im2col(x_item, grp, &d, spec, &mut cols);
            for co in grp * cout_g..(grp + 1) * cout_g {
                let wrow = &w[co * n..][..n];
                let row = &mut out[(b * d.c_out + co) * d.len_out..][..d.len_out];
                for (t, o) in row.iter_mut().enumerate() {
                    *o = dot(wrow, &cols[t * n..][..n]);
                }
            }
        }
    }
    out
}

fn input_grad_columns<T: Scalar>(gy: &[T], w: &[T], d: Dims, spec: &ConvSpec) -> Vec<T> {
    let n = d.cin_per_group(spec) * d.kernel;
    let cout_g = d.cout_per_group(spec);
    let mut gx = vec![T::zero(); d.batch * d.c_in * d.len_in];
    let mut cols = vec![T::zero(); d.len_out * n];
    for b in 0..d.batch {
        for grp in 0..spec.groups {
            cols.iter_mut().for_each(|v| *v = T::zero());
            for co in grp * cout_g..(grp + 1) * cout_g {
                let wrow = &w[co * n..][..n];
                let grow = &gy[(b * d.c_out + co) * d.len_out..][..d.len_out];
                for (t, &g) in grow.iter().enumerate() {
                    if g != T::zero() {
                        cols[t * n..][..n].iter_mut().zip(wrow).for_each(|(c, &wv)| *c += g * wv);
                    }
                }
            }
            col2im_add(&cols, grp, &d, spec, &mut gx[b * d.c_in * d.len_in..][..d.c_in * d.len_in]);
        }
    }
    gx
}

fn weight_grad_columns<T: Scalar>(x: &[T], gy: &[T], d: Dims, spec: &ConvSpec) -> Vec<T> {
    let n = d.cin_per_group(spec) * d.kernel;
    let cout_g = d.cout_per_group(spec);
    let mut acc = vec![0.0f64; d.c_out * n];
    let mut part = vec![T::zero(); n];
    let mut cols = vec![T::zero(); d.len_out * n];
    for b in 0..d.batch {
        let x_item = &x[b * d.c_in * d.len_in..][..d.c_in * d.len_in];
        for grp in 0..spec.groups {
            im2col(x_item, grp, &d, spec, &mut cols);
            for co in grp * cout_g..(grp + 1) * cout_g {
                let grow = &gy[(b * d.c_out + co) * d.len_out..][..d.len_out];
                part.iter_mut().for_each(|v| *v = T::zero());
                for (t, &g) in grow.iter().enumerate() {
                    if g != T::zero() {
                        part.iter_mut().zip(&cols[t * n..][..n]).for_each(|(p, &c)| *p += g * c);
                    }
                }
                acc[co * n..][..n].iter_mut().zip(&part).for_each(|(a, &p)| *a += p.as_f64());
            }
        }
    }
    acc.into_iter().map(T::lit).collect()
}

fn forward_kernel<T: Scalar>(x: &[T], w: &[T], d: Dims, spec: &ConvSpec) -> Vec<T> {
    if use_columns(&d, spec) {
        forward_columns(x, w, d, spec)
    } else {
        forward_direct(x, w, d, spec)
    }
}

fn forward_direct<T: Scalar>(x: &[T], w: &[T], d: Dims, spec: &ConvSpec) -> Vec<T> {
    let cin_g = d.cin_per_group(spec);
    let cout_g = d.cout_per_group(spec);
    let mut out = vec![T::zero(); d.batch * d.c_out * d.len_out];
    for b in 0..d.batch {
        for co in 0..d.c_out {
            let grp = co / cout_g;
            let row = &mut out[(b * d.c_out + co) * d.len_out..][..d.len_out];
            for j in 0..cin_g {
                let ci = grp * cin_g + j;
                let xrow = &x[(b * d.c_in + ci) * d.len_in..][..d.len_in];
                for k in 0..d.kernel {
                    let wv = w[(co * cin_g + j) * d.kernel + k];
                    if wv == T::zero() {
                        continue;
                    }
                    let (lo, hi, off) = spec.tap_range(k, d.len_in, d.len_out);
                    if lo >= hi {
                        continue;
                    }
                    let start = (lo as isize * spec.stride as isize + off) as usize;
                    if spec.stride == 1 {
                        let src = &xrow[start..start + (hi - lo)];
                        row[lo..hi].iter_mut().zip(src).for_each(|(o, &xv)| *o += wv * xv);
                    } else {
                        let src = xrow[start..].iter().step_by(spec.stride);
                        row[lo..hi].iter_mut().zip(src).for_each(|(o, &xv)| *o += wv * xv);
                    }
                }
            }
        }
    }
    out
}

/// Adjoint of `forward_kernel` in the input: scatters `gy` back through the taps.
fn input_grad_kernel<T: Scalar>(gy: &[T], w: &[T], d: Dims, spec: &ConvSpec) -> Vec<T> {
    if use_columns(&d, spec) {
        input_grad_columns(gy, w, d, spec)
    } else {
        input_grad_direct(gy, w, d, spec)
    }
}

fn input_grad_direct<T: Scalar>(gy: &[T], w: &[T], d: Dims, spec: &ConvSpec) -> Vec<T> {
    let cin_g = d.cin_per_group(spec);
    let cout_g = d.cout_per_group(spec);
    let mut gx = vec![T::zero(); d.batch * d.c_in * d.len_in];
    for b in 0..d.batch {
        for ci in 0..d.c_in {
            let grp = ci / cin_g;
            let j = ci % cin_g;
            let dst = &mut gx[(b * d.c_in + ci) * d.len_in..][..d.len_in];
            for co in grp * cout_g..(grp + 1) * cout_g {
                let grow = &gy[(b * d.c_out + co) * d.len_out..][..d.len_out];
                for k in 0..d.kernel {
                    let wv = w[(co * cin_g + j) * d.kernel + k];
                    if wv == T::zero() {
                        continue;
                    }
                    let (lo, hi, off) = spec.tap_range(k, d.len_in, d.len_out);
                    if lo >= hi {
                        continue;
                    }
                    let start = (lo as isize * spec.stride as isize + off) as usize;
                    if spec.stride == 1 {
                        dst[start..start + (hi - lo)]
                            .iter_mut()
                            .zip(&grow[lo..hi])
                            .for_each(|(o, &g)| *o += wv * g);
                    } else {
                        dst[start..]
                            .iter_mut()
                            .step_by(spec.stride)
                            .zip(&grow[lo..hi])
                            .for_each(|(o, &g)| *o += wv * g);
                    }
                }
            }
        }
    }
    gx
}

/// Adjoint of `forward_kernel` in the weight: correlates input with `gy`, summing in f64.
fn weight_grad_kernel<T: Scalar>(x: &[T], gy: &[T], d: Dims, spec: &ConvSpec) -> Vec<T> {
    if use_columns(&d, spec) {
        weight_grad_columns(x, gy, d, spec)
    } else {
        weight_grad_direct(x, gy, d, spec)
    }
}

fn weight_grad_direct<T: Scalar>(x: &[T], gy: &[T], d: Dims, spec: &ConvSpec) -> Vec<T> {
    let cin_g = d.cin_per_group(spec);
    let cout_g = d.cout_per_group(spec);
    let mut gw = vec![T::zero(); d.c_out * cin_g * d.kernel];
    for co in 0..d.c_out {
        let grp = co / cout_g;
        for j in 0..cin_g {
            let ci = grp * cin_g + j;
            for k in 0..d.kernel {
                let (lo, hi, off) = spec.tap_range(k, d.len_in, d.len_out);
                let mut acc = 0.0f64;
                if lo < hi {
                    let start = (lo as isize * spec.stride as isize + off) as usize;
                    for b in 0..d.batch {
                        let xrow = &x[(b * d.c_in + ci) * d.len_in..][..d.len_in];
                        let grow = &gy[(b * d.c_out + co) * d.len_out..][..d.len_out];
                        let mut part = T::zero();
                        if spec.stride == 1 {
                            for (&g, &xv) in grow[lo..hi].iter().zip(&xrow[start..start + (hi - lo)]) {
                                part += g * xv;
                            }
                        } else {
                            for (&g, &xv) in grow[lo..hi].iter().zip(xrow[start..].iter().step_by(spec.stride)) {
                                part += g * xv;
                            }
                        }
                        acc += part.as_f64();
                    }
                }
                gw[(co * cin_g + j) * d.kernel + k] = T::lit(acc);
            }
        }
    }
    gw
}

fn weight_dims<T: Scalar>(x_shape: &[usize], w: &Tensor<T>, spec: &ConvSpec) -> Result<(usize, usize)> {
    let mismatch = || TensorError::ShapeMismatch {
        op: "conv1d",
        lhs: x_shape.to_vec(),
        rhs: w.shape().to_vec(),
    };
    if x_shape.len() != 3 || w.rank() != 3 {
        return Err(mismatch());
    }
    let c_in = x_shape[1];
    let (c_out, cin_g, kernel) = (w.shape()[0], w.shape()[1], w.shape()[2]);
    if c_in % spec.groups != 0 || c_out % spec.groups != 0 || cin_g * spec.groups != c_in {
        return Err(mismatch());
    }
    Ok((c_out, kernel))
}

impl<T: Scalar> Tensor<T> {
    /// Raw convolution without bias: `[B, C_in, L] * [C_out, C_in/groups, K] -> [B, C_out, L_out]`.
    pub fn conv1d_raw(&self, weight: &Tensor<T>, spec: ConvSpec) -> Result<Tensor<T>> {
        validate(&spec)?;
        let (c_out, kernel) = weight_dims(self.shape(), weight, &spec)?;
        let (batch, c_in, len_in) = (self.shape()[0], self.shape()[1], self.shape()[2]);
        let len_out = spec.output_len(len_in, kernel).ok_or(TensorError::LengthTooShort {
            op: "conv1d",
            len: len_in + 2 * spec.padding,
            needed: spec.dilation * (kernel - 1) + 1,
        })?;
        let d = Dims {
            batch,
            c_in,
            c_out,
            kernel,
            len_in,
            len_out,
        };
        let data = forward_kernel(self.data(), weight.data(), d, &spec);
        Ok(Tensor::record(
            data,
            vec![batch, c_out, len_out],
            "conv1d",
            &[self, weight],
            move |inp, need, g| {
                let gx = if need[0] {
                    Some(g.conv1d_input_grad(&inp[1], spec, len_in)?)
                } else {
                    None
                };
                let gw = if need[1] {
                    Some(inp[0].conv1d_weight_grad(g, spec, kernel)?)
                } else {
                    None
                };
                Ok(vec![gx, gw])
            },
        ))
    }

    /// Transposed convolution: gradient of `conv1d_raw` w.r.t. its input, given the
    /// output gradient `self` of shape `[B, C_out, L_out]`.
    pub fn conv1d_input_grad(&self, weight: &Tensor<T>, spec: ConvSpec, len_in: usize) -> Result<Tensor<T>> {
        validate(&spec)?;
        if self.rank() != 3 || weight.rank() != 3 || self.shape()[1] != weight.shape()[0] {
            return Err(TensorError::ShapeMismatch {
                op: "conv1d_input_grad",
                lhs: self.shape().to_vec(),
                rhs: weight.shape().to_vec(),
            });
        }
        let (batch, c_out, len_out) = (self.shape()[0], self.shape()[1], self.shape()[2]);
        let kernel = weight.shape()[2];
        let c_in = weight.shape()[1] * spec.groups;
        if spec.output_len(len_in, kernel) != Some(len_out) {
            return Err(invalid(
                "conv1d_input_grad",
                format!("input length {len_in} does not produce {len_out} outputs"),
            ));
        }
        let d = Dims {
            batch,
            c_in,
            c_out,
            kernel,
            len_in,
            len_out,
        };
        let data = input_grad_kernel(self.data(), weight.data(), d, &spec);
        Ok(Tensor::record(
            data,
            vec![batch, c_in, len_in],
            "conv1d_input_grad",
            &[self, weight],
            move |inp, need, g| {
                let ggy = if need[0] {
                    Some(g.conv1d_raw(&inp[1], spec)?)
                } else {
                    None
                };
                let gw = if need[1] {
                    Some(g.conv1d_weight_grad(&inp[0], spec, kernel)?)
                } else {
                    None
                };
                Ok(vec![ggy, gw])
            },
        ))
    }

    /// Gradient of `conv1d_raw` w.r.t. its weight: `self` is the input `[B, C_in, L]`,
    /// `gy` the output gradient.
    pub fn conv1d_weight_grad(&self, gy: &Tensor<T>, spec: ConvSpec, kernel: usize) -> Result<Tensor<T>> {
        validate(&spec)?;
        if self.rank() != 3 || gy.rank() != 3 || self.shape()[0] != gy.shape()[0] {
            return Err(TensorError::ShapeMismatch {
                op: "conv1d_weight_grad",
                lhs: self.shape().to_vec(),
                rhs: gy.shape().to_vec(),
            });
        }
        let (batch, c_in, len_in) = (self.shape()[0], self.shape()[1], self.shape()[2]);
        let (c_out, len_out) = (gy.shape()[1], gy.shape()[2]);
        if c_in % spec.groups != 0 || c_out % spec.groups != 0 || spec.output_len(len_in, kernel) != Some(len_out) {
            return Err(TensorError::ShapeMismatch {
                op: "conv1d_weight_grad",
                lhs: self.shape().to_vec(),
                rhs: gy.shape().to_vec(),
            });
        }
        let d = Dims {
            batch,
            c_in,
            c_out,
            kernel,
            len_in,
            len_out,
        };
        let data = weight_grad_kernel(self.data(), gy.data(), d, &spec);
        Ok(Tensor::record(
            data,
            vec![c_out, c_in / spec.groups, kernel],
            "conv1d_weight_grad",
            &[self, gy],
            move |inp, need, g| {
                let gx = if need[0] {
                    Some(inp[1].conv1d_input_grad(g, spec, len_in)?)
                } else {
                    None
                };
                let ggy = if need[1] {
                    Some(inp[0].conv1d_raw(g, spec)?)
                } else {
                    None
                };
                Ok(vec![gx, ggy])
            },
        ))
    }

    /// Convolution with optional per-output-channel bias.
    pub fn conv1d(&self, weight: &Tensor<T>, bias: Option<&Tensor<T>>, spec: ConvSpec) -> Result<Tensor<T>> {
        let y = self.conv1d_raw(weight, spec)?;
        match bias {
            None => Ok(y),
            Some(b) => {
                let c_out = y.shape()[1];
                if b.shape() != [c_out] {
                    return Err(TensorError::ShapeMismatch {
                        op: "conv1d bias",
                        lhs: vec![c_out],
                        rhs: b.shape().to_vec(),
                    });
                }
                y.add(&b.reshape(&[1, c_out, 1])?)
            }
        }
    }

    /// Sums `[B, F, K]` frames placed `hop` samples apart into `[B, (F-1)*hop + K]`.
    pub fn overlap_add(&self, hop: usize) -> Result<Tensor<T>> {
        if self.rank() != 3 || hop == 0 {
            return Err(invalid("overlap_add", format!("need [B, F, K] and hop >= 1, got {:?}", self.shape())));
        }
        let (batch, frames, width) = (self.shape()[0], self.shape()[1], self.shape()[2]);
        let len = (frames - 1) * hop + width;
        let mut data = vec![T::zero(); batch * len];
        for b in 0..batch {
            let dst = &mut data[b * len..(b + 1) * len];
            for f in 0..frames {
                let src = &self.data()[(b * frames + f) * width..][..width];
                dst[f * hop..f * hop + width].iter_mut().zip(src).for_each(|(o, &v)| *o += v);
            }
        }
        Ok(Tensor::record(data, vec![batch, len], "overlap_add", &[self], move |_, _, g| {
            Ok(vec![Some(g.extract_frames(width, hop)?)])
        }))
    }

    /// Cuts `[B, L]` into `[B, F, width]` frames `hop` samples apart (no padding; `L`
    /// must sit exactly on the frame grid).
    pub fn extract_frames(&self, width: usize, hop: usize) -> Result<Tensor<T>> {
        if self.rank() != 2 || hop == 0 || width == 0 {
            return Err(invalid("extract_frames", format!("need [B, L], got {:?}", self.shape())));
        }
        let (batch, len) = (self.shape()[0], self.shape()[1]);
        if len < width || (len - width) % hop != 0 {
            return Err(invalid("extract_frames", format!("length {len} is off the grid of width {width} hop {hop}")));
        }
        let frames = (len - width) / hop + 1;
        let mut data = Vec::with_capacity(batch * frames * width);
        for b in 0..batch {
            let row = &self.data()[b * len..(b + 1) * len];
            for f in 0..frames {
                data.extend_from_slice(&row[f * hop..f * hop + width]);
            }
        }
        Ok(Tensor::record(data, vec![batch, frames, width], "extract_frames", &[self], move |_, _, g| {
            Ok(vec![Some(g.overlap_add(hop)?)])
        }))
    }
}
