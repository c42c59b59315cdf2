//! 1-D convolution (cross-correlation) over `batch × channels × length` tensors.

use rand::Rng;
use rayon::prelude::*;

use super::gemm::{gemm, View};
use super::init::kaiming_uniform;
use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Conv1d<T> {
    /// `out_ch × in_ch × kernel`
    pub weight: Tensor<T>,
    /// `out_ch`
    pub bias: Tensor<T>,
    pub stride: usize,
    pub padding: usize,
}

#[derive(Clone, Debug)]
pub struct Conv1dCache<T> {
    input: Tensor<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Conv1dGrads<T> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

/// Output positions `t` for which tap `j` reads inside the unpadded input.
#[inline]
fn valid_range(len: usize, out_len: usize, stride: usize, padding: usize, tap: usize) -> (usize, usize) {
    let lo = if tap >= padding {
        0
    } else {
        (padding - tap).div_ceil(stride)
    };
    let hi = if len + padding > tap {
        ((len - 1 + padding - tap) / stride + 1).min(out_len)
    } else {
        0
    };
    (lo, hi.max(lo))
}

impl<T: Real> Conv1d<T> {
    /// Zero-initialized layer.
    pub fn zeros(in_ch: usize, out_ch: usize, kernel: usize, stride: usize, padding: usize) -> Result<Self> {
        if in_ch == 0 || out_ch == 0 || kernel == 0 || stride == 0 {
            return Err(Error::InvalidArgument(format!(
                "conv1d needs nonzero extents (in {in_ch}, out {out_ch}, kernel {kernel}, stride {stride})"
            )));
        }
        Ok(Self {
            weight: Tensor::zeros(&[out_ch, in_ch, kernel]),
            bias: Tensor::zeros(&[out_ch]),
            stride,
            padding,
        })
    }

    /// Kaiming-uniform weights over fan-in `in_ch · kernel`, zero bias.
    pub fn init<R: Rng + ?Sized>(
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut layer = Self::zeros(in_ch, out_ch, kernel, stride, padding)?;
        kaiming_uniform(&mut layer.weight, in_ch * kernel, rng);
        Ok(layer)
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn kernel(&self) -> usize {
        self.weight.shape()[2]
    }

    /// `⌊(len + 2·padding − kernel) / stride⌋ + 1`, or an error if that is below one.
    pub fn out_len(&self, len: usize) -> Result<usize> {
        let padded = len + 2 * self.padding;
        if padded < self.kernel() {
            return Err(Error::InvalidArgument(format!(
                "conv1d: input length {len} with padding {} is shorter than kernel {}",
                self.padding,
                self.kernel()
            )));
        }
        Ok((padded - self.kernel()) / self.stride + 1)
    }

    pub fn forward(&self, input: &Tensor<T>) -> Result<(Tensor<T>, Conv1dCache<T>)> {
        let out = self.forward_inference(input)?;
        Ok((
            out,
            Conv1dCache {
                input: input.clone(),
            },
        ))
    }

    /// Unfolds `batch × in_ch × len` into the `(in_ch·k) × (batch·out_len)`
    /// matrix whose column `(b, t)` holds the receptive field of output `t`.
    fn im2col(&self, x: &[T], batch: usize, len: usize, out_len: usize, ranges: &[(usize, usize)]) -> Vec<T> {
        let (in_ch, k) = (self.in_channels(), self.kernel());
        let (stride, pad) = (self.stride, self.padding);
        let n = batch * out_len;
        let mut col = vec![T::zero(); in_ch * k * n];
        col.par_chunks_mut(n).enumerate().for_each(|(row, dst)| {
            let (c, j) = (row / k, row % k);
            let (lo, hi) = ranges[j];
            if lo >= hi {
                return;
            }
            let start = lo * stride + j - pad;
            for b in 0..batch {
                let xc = &x[(b * in_ch + c) * len..(b * in_ch + c + 1) * len];
                let d = &mut dst[b * out_len + lo..b * out_len + hi];
                if stride == 1 {
                    d.copy_from_slice(&xc[start..start + (hi - lo)]);
                } else {
                    for (i, v) in d.iter_mut().enumerate() {
                        *v = xc[start + i * stride];
                    }
                }
            }
        });
        col
    }

    fn ranges(&self, len: usize, out_len: usize) -> Vec<(usize, usize)> {
        (0..self.kernel())
            .map(|j| valid_range(len, out_len, self.stride, self.padding, j))
            .collect()
    }

    pub fn forward_inference(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let (batch, in_ch, len) = input.dims3("conv1d_forward")?;
        if in_ch != self.in_channels() {
            return Err(Error::shape("conv1d_forward", self.in_channels(), in_ch));
        }
        let out_ch = self.out_channels();
        let kk = in_ch * self.kernel();
        let out_len = self.out_len(len)?;
        let n = batch * out_len;
        let col = self.im2col(input.data(), batch, len, out_len, &self.ranges(len, out_len));
        let mut flat = vec![T::zero(); out_ch * n];
        gemm(
            View::row_major(self.weight.data(), out_ch, kk),
            View::row_major(&col, kk, n),
            T::zero(),
            &mut flat,
        );
        let bias = self.bias.data();
        let mut out = Tensor::zeros(&[batch, out_ch, out_len]);
        for (b, y) in out.data_mut().chunks_mut(out_ch * out_len).enumerate() {
            for (o, row) in y.chunks_mut(out_len).enumerate() {
                let src = &flat[o * n + b * out_len..o * n + (b + 1) * out_len];
                for (v, &s) in row.iter_mut().zip(src) {
                    *v = s + bias[o];
                }
            }
        }
        Ok(out)
    }

    pub fn backward(
        &self,
        cache: &Conv1dCache<T>,
        grad_out: &Tensor<T>,
    ) -> Result<(Tensor<T>, Conv1dGrads<T>)> {
        let input = &cache.input;
        let (batch, in_ch, len) = input.dims3("conv1d_backward")?;
        let out_ch = self.out_channels();
        let k = self.kernel();
        let kk = in_ch * k;
        let out_len = self.out_len(len)?;
        let expected = [batch, out_ch, out_len];
        if grad_out.shape() != expected {
            return Err(Error::shape(
                "conv1d_backward",
                format!("{expected:?}"),
                format!("{:?}", grad_out.shape()),
            ));
        }
        let (stride, pad) = (self.stride, self.padding);
        let n = batch * out_len;
        let ranges = self.ranges(len, out_len);
        let col = self.im2col(input.data(), batch, len, out_len, &ranges);

        // `out_ch × (batch·out_len)`, matching the column order of `col`.
        let mut g = vec![T::zero(); out_ch * n];
        for (b, go) in grad_out.data().chunks(out_ch * out_len).enumerate() {
            for (o, row) in go.chunks(out_len).enumerate() {
                g[o * n + b * out_len..o * n + (b + 1) * out_len].copy_from_slice(row);
            }
        }
        let grad_b = Tensor::new(vec![out_ch], g.chunks(n.max(1)).map(|r| r.iter().copied().sum()).collect())?;
        let mut grad_w = Tensor::zeros(&[out_ch, in_ch, k]);
        gemm(
            View::row_major(&g, out_ch, n),
            View::row_major(&col, kk, n).t(),
            T::zero(),
            grad_w.data_mut(),
        );
        let mut dcol = col;
        gemm(
            View::row_major(self.weight.data(), out_ch, kk).t(),
            View::row_major(&g, out_ch, n),
            T::zero(),
            &mut dcol,
        );

        let mut grad_in = Tensor::zeros(&[batch, in_ch, len]);
        grad_in
            .data_mut()
            .par_chunks_mut(in_ch * len)
            .enumerate()
            .for_each(|(b, gi)| {
                for c in 0..in_ch {
                    let gic = &mut gi[c * len..(c + 1) * len];
                    for (j, &(lo, hi)) in ranges.iter().enumerate() {
                        if lo >= hi {
                            continue;
                        }
                        let start = lo * stride + j - pad;
                        let src = &dcol[(c * k + j) * n + b * out_len..][lo..hi];
                        for (i, &v) in src.iter().enumerate() {
                            gic[start + i * stride] += v;
                        }
                    }
                }
            });

        Ok((
            grad_in,
            Conv1dGrads {
                weight: grad_w,
                bias: grad_b,
            },
        ))
    }
}

impl<T> super::params::Params<T> for Conv1d<T> {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, super::params::ParamKind, &'a Tensor<T>)) {
        use super::params::{join, ParamKind};
        f(join(prefix, "weight"), ParamKind::Weight, &self.weight);
        f(join(prefix, "bias"), ParamKind::Bias, &self.bias);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, super::params::ParamKind, &mut Tensor<T>)) {
        use super::params::{join, ParamKind};
        f(join(prefix, "weight"), ParamKind::Weight, &mut self.weight);
        f(join(prefix, "bias"), ParamKind::Bias, &mut self.bias);
    }
}

impl<T> super::params::Grads<T> for Conv1dGrads<T> {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor<T>)) {
        use super::params::join;
        f(join(prefix, "weight"), &self.weight);
        f(join(prefix, "bias"), &self.bias);
    }
}
