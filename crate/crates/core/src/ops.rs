//! Forward and backward kernels for the differentiable primitives.
//!
//! These are plain functions on [`Tensor`]s; the autograd graph records
//! which kernel produced each node and calls the matching backward kernel.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

/// Elementwise nonlinearity applied after a shared layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
}

pub fn sigmoid(v: Real) -> Real {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// `out[b, o] = sum_i W[o, i] x[b, i] + bias[o]`.
///
/// `x` may have any rank; everything after the leading axis is flattened.
pub fn affine_forward(w: &Tensor, bias: &Tensor, x: &Tensor) -> Result<Tensor> {
    let (m_out, m_in) = affine_dims(w, bias, x)?;
    let batch = x.rows();
    let wd = w.data();
    let xd = x.data();
    let mut out = vec![0.0; batch * m_out];
    for b in 0..batch {
        let xr = &xd[b * m_in..(b + 1) * m_in];
        for o in 0..m_out {
            let wr = &wd[o * m_in..(o + 1) * m_in];
            let dot: Real = wr.iter().zip(xr).map(|(a, b)| a * b).sum();
            out[b * m_out + o] = dot + bias.data()[o];
        }
    }
    Tensor::new(vec![batch, m_out], out)
}

/// Returns `(dW, dbias, dx)`; `dx` has the shape of `x`.
pub fn affine_backward(w: &Tensor, x: &Tensor, grad: &Tensor) -> (Tensor, Tensor, Tensor) {
    let (m_out, m_in) = (w.shape()[0], w.shape()[1]);
    let batch = x.rows();
    let (wd, xd, gd) = (w.data(), x.data(), grad.data());
    let mut gw = vec![0.0; m_out * m_in];
    let mut gb = vec![0.0; m_out];
    let mut gx = vec![0.0; batch * m_in];
    for b in 0..batch {
        let xr = &xd[b * m_in..(b + 1) * m_in];
        let gxr = &mut gx[b * m_in..(b + 1) * m_in];
        for o in 0..m_out {
            let g = gd[b * m_out + o];
            if g == 0.0 {
                continue;
            }
            gb[o] += g;
            let wr = &wd[o * m_in..(o + 1) * m_in];
            let gwr = &mut gw[o * m_in..(o + 1) * m_in];
            for i in 0..m_in {
                gwr[i] += g * xr[i];
                gxr[i] += g * wr[i];
            }
        }
    }
    (
        Tensor::new(w.shape().to_vec(), gw).expect("shape"),
        Tensor::new(vec![m_out], gb).expect("shape"),
        Tensor::new(x.shape().to_vec(), gx).expect("shape"),
    )
}

fn affine_dims(w: &Tensor, bias: &Tensor, x: &Tensor) -> Result<(usize, usize)> {
    if w.rank() != 2 {
        return Err(Error::dim(
            "affine",
            format!("weight must be rank 2, got {:?}", w.shape()),
        ));
    }
    let (m_out, m_in) = (w.shape()[0], w.shape()[1]);
    if bias.shape() != [m_out] {
        return Err(Error::dim(
            "affine",
            format!("bias {:?} does not match weight {:?}", bias.shape(), w.shape()),
        ));
    }
    if x.rank() < 2 || x.row_len() != m_in {
        return Err(Error::dim(
            "affine",
            format!("weight {:?} cannot apply to input {:?}", w.shape(), x.shape()),
        ));
    }
    Ok((m_out, m_in))
}

/// Same-size 3x3 cross-correlation with one pixel of zero padding.
pub fn conv2d_forward(k: &Tensor, bias: &Tensor, x: &Tensor) -> Result<Tensor> {
    let d = conv_dims(k, bias, x)?;
    let plane = d.h * d.w;
    let (kd, xd) = (k.data(), x.data());
    let mut out = vec![0.0; d.batch * d.c_out * plane];
    for b in 0..d.batch {
        for co in 0..d.c_out {
            let op = &mut out[(b * d.c_out + co) * plane..(b * d.c_out + co + 1) * plane];
            op.fill(bias.data()[co]);
            for ci in 0..d.c_in {
                let ip = &xd[(b * d.c_in + ci) * plane..(b * d.c_in + ci + 1) * plane];
                let kk = &kd[(co * d.c_in + ci) * 9..(co * d.c_in + ci + 1) * 9];
                for (tap, &wv) in kk.iter().enumerate() {
                    if wv == 0.0 {
                        continue;
                    }
                    let (dy, dx) = (tap as isize / 3 - 1, tap as isize % 3 - 1);
                    let Some((y0, y1)) = valid_span(d.h, dy) else { continue };
                    let Some((x0, x1)) = valid_span(d.w, dx) else { continue };
                    for y in y0..y1 {
                        let sy = (y as isize + dy) as usize;
                        let orow = &mut op[y * d.w + x0..y * d.w + x1];
                        let sx0 = (x0 as isize + dx) as usize;
                        let irow = &ip[sy * d.w + sx0..sy * d.w + sx0 + (x1 - x0)];
                        for (o, &v) in orow.iter_mut().zip(irow) {
                            *o += wv * v;
                        }
                    }
                }
            }
        }
    }
    Tensor::new(vec![d.batch, d.c_out, d.h, d.w], out)
}

/// Returns `(dK, dbias, dx)`.
pub fn conv2d_backward(k: &Tensor, x: &Tensor, grad: &Tensor) -> (Tensor, Tensor, Tensor) {
    let (c_out, c_in) = (k.shape()[0], k.shape()[1]);
    let (batch, h, w) = (x.shape()[0], x.shape()[2], x.shape()[3]);
    let plane = h * w;
    let (kd, xd, gd) = (k.data(), x.data(), grad.data());
    let mut gk = vec![0.0; kd.len()];
    let mut gb = vec![0.0; c_out];
    let mut gx = vec![0.0; xd.len()];
    for b in 0..batch {
        for co in 0..c_out {
            let gp = &gd[(b * c_out + co) * plane..(b * c_out + co + 1) * plane];
            gb[co] += gp.iter().sum::<Real>();
            for ci in 0..c_in {
                let base = (b * c_in + ci) * plane;
                let kbase = (co * c_in + ci) * 9;
                for tap in 0..9 {
                    let (dy, dx) = (tap as isize / 3 - 1, tap as isize % 3 - 1);
                    let Some((y0, y1)) = valid_span(h, dy) else { continue };
                    let Some((x0, x1)) = valid_span(w, dx) else { continue };
                    let wv = kd[kbase + tap];
                    let mut acc = 0.0;
                    for y in y0..y1 {
                        let sy = (y as isize + dy) as usize;
                        let sx0 = (x0 as isize + dx) as usize;
                        let grow = &gp[y * w + x0..y * w + x1];
                        let src = base + sy * w + sx0;
                        let irow = &xd[src..src + (x1 - x0)];
                        acc += grow.iter().zip(irow).map(|(a, b)| a * b).sum::<Real>();
                        let gxrow = &mut gx[src..src + (x1 - x0)];
                        for (o, &g) in gxrow.iter_mut().zip(grow) {
                            *o += wv * g;
                        }
                    }
                    gk[kbase + tap] += acc;
                }
            }
        }
    }
    (
        Tensor::new(k.shape().to_vec(), gk).expect("shape"),
        Tensor::new(vec![c_out], gb).expect("shape"),
        Tensor::new(x.shape().to_vec(), gx).expect("shape"),
    )
}

struct ConvDims {
    batch: usize,
    c_in: usize,
    c_out: usize,
    h: usize,
    w: usize,
}

fn conv_dims(k: &Tensor, bias: &Tensor, x: &Tensor) -> Result<ConvDims> {
    if k.rank() != 4 || k.shape()[2] != 3 || k.shape()[3] != 3 {
        return Err(Error::dim(
            "conv2d",
            format!("kernel must be c_out x c_in x 3 x 3, got {:?}", k.shape()),
        ));
    }
    if x.rank() != 4 {
        return Err(Error::dim(
            "conv2d",
            format!("input must be batch x c x h x w, got {:?}", x.shape()),
        ));
    }
    if x.shape()[1] != k.shape()[1] {
        return Err(Error::dim(
            "conv2d",
            format!(
                "kernel {:?} expects {} channels, input {:?}",
                k.shape(),
                k.shape()[1],
                x.shape()
            ),
        ));
    }
    if bias.shape() != [k.shape()[0]] {
        return Err(Error::dim(
            "conv2d",
            format!("bias {:?} vs kernel {:?}", bias.shape(), k.shape()),
        ));
    }
    Ok(ConvDims {
        batch: x.shape()[0],
        c_in: k.shape()[1],
        c_out: k.shape()[0],
        h: x.shape()[2],
        w: x.shape()[3],
    })
}

/// Output positions `p` in `0..n` for which `p + offset` is inside `0..n`.
fn valid_span(n: usize, offset: isize) -> Option<(usize, usize)> {
    let lo = (-offset).max(0) as usize;
    let hi = (n as isize - offset.max(0)).max(0) as usize;
    (lo < hi).then_some((lo, hi))
}

/// 2x2 max pooling with stride 2; trailing odd rows/columns are dropped.
///
/// Also returns, per output cell, the flat input index of the selected max.
pub fn maxpool2x2(x: &Tensor) -> Result<(Tensor, Vec<usize>)> {
    if x.rank() != 4 {
        return Err(Error::dim(
            "maxpool2x2",
            format!("input must be rank 4, got {:?}", x.shape()),
        ));
    }
    let (b, c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    if h < 2 || w < 2 {
        return Err(Error::dim("maxpool2x2", format!("spatial size {h}x{w} is below 2x2")));
    }
    let (oh, ow) = (h / 2, w / 2);
    let xd = x.data();
    let mut out = Vec::with_capacity(b * c * oh * ow);
    let mut arg = Vec::with_capacity(b * c * oh * ow);
    for plane in 0..b * c {
        let base = plane * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = base + 2 * oy * w + 2 * ox;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = base + (2 * oy + dy) * w + 2 * ox + dx;
                    if xd[idx] > xd[best] {
                        best = idx;
                    }
                }
                out.push(xd[best]);
                arg.push(best);
            }
        }
    }
    Ok((Tensor::new(vec![b, c, oh, ow], out)?, arg))
}

pub fn maxpool2x2_backward(argmax: &[usize], input_shape: &[usize], grad: &Tensor) -> Tensor {
    let mut gx = Tensor::zeros(input_shape);
    let gd = gx.data_mut();
    for (&src, &g) in argmax.iter().zip(grad.data()) {
        gd[src] += g;
    }
    gx
}

pub fn activate(kind: Activation, x: &Tensor) -> Tensor {
    match kind {
        Activation::Identity => x.clone(),
        Activation::Relu => x.map(|v| v.max(0.0)),
        Activation::Sigmoid => x.map(sigmoid),
    }
}

/// Backward of [`activate`], expressed through the forward output `y`.
pub fn activate_backward(kind: Activation, y: &Tensor, grad: &Tensor) -> Tensor {
    match kind {
        Activation::Identity => grad.clone(),
        Activation::Relu => y.zip_map(grad, |y, g| if y > 0.0 { g } else { 0.0 }).expect("shape"),
        Activation::Sigmoid => y.zip_map(grad, |y, g| g * y * (1.0 - y)).expect("shape"),
    }
}

/// `(outer, len, inner)` strides for iterating slices along `axis`.
pub(crate) fn axis_strides(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

/// Softmax along `axis`, computed with per-slice max subtraction.
pub fn softmax_axis(x: &Tensor, axis: usize) -> Result<Tensor> {
    if axis >= x.rank() {
        return Err(Error::dim(
            "softmax_axis",
            format!("axis {axis} out of range for {:?}", x.shape()),
        ));
    }
    let (outer, len, inner) = axis_strides(x.shape(), axis);
    let xd = x.data();
    let mut out = vec![0.0; xd.len()];
    for o in 0..outer {
        for i in 0..inner {
            let at = |j: usize| (o * len + j) * inner + i;
            let max = (0..len).map(|j| xd[at(j)]).fold(Real::NEG_INFINITY, Real::max);
            let mut total = 0.0;
            for j in 0..len {
                let e = (xd[at(j)] - max).exp();
                out[at(j)] = e;
                total += e;
            }
            for j in 0..len {
                out[at(j)] /= total;
            }
        }
    }
    Tensor::new(x.shape().to_vec(), out)
}

/// `dx = y * (g - sum_axis(g * y))`.
pub fn softmax_axis_backward(y: &Tensor, grad: &Tensor, axis: usize) -> Tensor {
    let (outer, len, inner) = axis_strides(y.shape(), axis);
    let (yd, gd) = (y.data(), grad.data());
    let mut gx = vec![0.0; yd.len()];
    for o in 0..outer {
        for i in 0..inner {
            let at = |j: usize| (o * len + j) * inner + i;
            let dot: Real = (0..len).map(|j| yd[at(j)] * gd[at(j)]).sum();
            for j in 0..len {
                gx[at(j)] = yd[at(j)] * (gd[at(j)] - dot);
            }
        }
    }
    Tensor::new(y.shape().to_vec(), gx).expect("shape")
}
