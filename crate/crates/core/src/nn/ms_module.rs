//! Multi-scale module: a stride-2 reduce convolution feeding four parallel
//! branches of kernel width 1, 3, 5 and 7 whose outputs are concatenated
//! along the channel axis.
//!
//! Every convolution is followed by batch norm and ReLU. Each branch is
//! `k×1 conv → BN → ReLU → 1×1 gather conv → BN → ReLU` with same-padding,
//! so branch outputs keep the reduced length.

use rand::Rng;

use super::activation::{relu, relu_backward};
use super::batchnorm::{BatchNorm, BatchNormCache, BatchNormGrads};
use super::conv::{Conv1d, Conv1dCache, Conv1dGrads};
use super::params::{join, Grads, ParamKind, Params};
use super::tensor::{Real, Tensor};
use super::Mode;
use crate::error::{Error, Result};

pub const BRANCH_KERNELS: [usize; 4] = [1, 3, 5, 7];

/// `conv → BN → ReLU`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvBnRelu<T> {
    pub conv: Conv1d<T>,
    pub bn: BatchNorm<T>,
}

#[derive(Clone, Debug)]
pub struct ConvBnReluCache<T> {
    conv: Conv1dCache<T>,
    bn: BatchNormCache<T>,
    pre_act: Tensor<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvBnReluGrads<T> {
    pub conv: Conv1dGrads<T>,
    pub bn: BatchNormGrads<T>,
}

impl<T: Real> ConvBnRelu<T> {
    pub fn init<R: Rng + ?Sized>(
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(Self {
            conv: Conv1d::init(in_ch, out_ch, kernel, stride, padding, rng)?,
            bn: BatchNorm::new(out_ch),
        })
    }

    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<(Tensor<T>, ConvBnReluCache<T>)> {
        let (z, conv) = self.conv.forward(x)?;
        let (pre_act, bn) = self.bn.forward(&z, mode)?;
        let y = relu(&pre_act);
        Ok((y, ConvBnReluCache { conv, bn, pre_act }))
    }

    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let z = self.conv.forward_inference(x)?;
        Ok(relu(&self.bn.infer(&z)?))
    }

    pub fn backward(&self, cache: &ConvBnReluCache<T>, grad: &Tensor<T>) -> Result<(Tensor<T>, ConvBnReluGrads<T>)> {
        let g = relu_backward(&cache.pre_act, grad)?;
        let (g, bn) = self.bn.backward(&cache.bn, &g)?;
        let (g, conv) = self.conv.backward(&cache.conv, &g)?;
        Ok((g, ConvBnReluGrads { conv, bn }))
    }
}

impl<T> Params<T> for ConvBnRelu<T> {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, ParamKind, &'a Tensor<T>)) {
        self.conv.visit(prefix, f);
        self.bn.visit(&format!("{prefix}_bn"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, ParamKind, &mut Tensor<T>)) {
        self.conv.visit_mut(prefix, f);
        self.bn.visit_mut(&format!("{prefix}_bn"), f);
    }
}

impl<T> Grads<T> for ConvBnReluGrads<T> {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor<T>)) {
        self.conv.visit(prefix, f);
        self.bn.visit(&format!("{prefix}_bn"), f);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Branch<T> {
    pub conv: ConvBnRelu<T>,
    pub gather: ConvBnRelu<T>,
}

#[derive(Clone, Debug)]
pub struct BranchCache<T> {
    conv: ConvBnReluCache<T>,
    gather: ConvBnReluCache<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BranchGrads<T> {
    pub conv: ConvBnReluGrads<T>,
    pub gather: ConvBnReluGrads<T>,
}

impl<T: Real> Branch<T> {
    pub fn init<R: Rng + ?Sized>(channels: usize, kernel: usize, rng: &mut R) -> Result<Self> {
        if kernel.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!("branch kernel must be odd, got {kernel}")));
        }
        Ok(Self {
            conv: ConvBnRelu::init(channels, channels, kernel, 1, (kernel - 1) / 2, rng)?,
            gather: ConvBnRelu::init(channels, channels, 1, 1, 0, rng)?,
        })
    }

    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<(Tensor<T>, BranchCache<T>)> {
        let (h, conv) = self.conv.forward(x, mode)?;
        let (y, gather) = self.gather.forward(&h, mode)?;
        Ok((y, BranchCache { conv, gather }))
    }

    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.gather.infer(&self.conv.infer(x)?)
    }

    pub fn backward(&self, cache: &BranchCache<T>, grad: &Tensor<T>) -> Result<(Tensor<T>, BranchGrads<T>)> {
        let (g, gather) = self.gather.backward(&cache.gather, grad)?;
        let (g, conv) = self.conv.backward(&cache.conv, &g)?;
        Ok((g, BranchGrads { conv, gather }))
    }
}

impl<T> Params<T> for Branch<T> {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, ParamKind, &'a Tensor<T>)) {
        self.conv.visit(&join(prefix, "conv"), f);
        self.gather.visit(&join(prefix, "gather"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, ParamKind, &mut Tensor<T>)) {
        self.conv.visit_mut(&join(prefix, "conv"), f);
        self.gather.visit_mut(&join(prefix, "gather"), f);
    }
}

impl<T> Grads<T> for BranchGrads<T> {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor<T>)) {
        self.conv.visit(&join(prefix, "conv"), f);
        self.gather.visit(&join(prefix, "gather"), f);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MsModule<T> {
    pub reduce: ConvBnRelu<T>,
    pub branches: Vec<Branch<T>>,
}

#[derive(Clone, Debug)]
pub struct MsModuleCache<T> {
    reduce: ConvBnReluCache<T>,
    branches: Vec<BranchCache<T>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MsModuleGrads<T> {
    pub reduce: ConvBnReluGrads<T>,
    pub branches: Vec<BranchGrads<T>>,
}

/// Stacks `batch × c_i × L` parts along the channel axis.
pub fn concat_channels<T: Real>(parts: &[Tensor<T>]) -> Result<Tensor<T>> {
    let (batch, _, len) = parts[0].dims3("concat")?;
    let mut total = 0;
    for p in parts {
        let (b, c, l) = p.dims3("concat")?;
        if b != batch || l != len {
            return Err(Error::shape("concat", format!("[{batch}, _, {len}]"), format!("{:?}", p.shape())));
        }
        total += c;
    }
    let mut data = Vec::with_capacity(batch * total * len);
    for b in 0..batch {
        for p in parts {
            let c = p.shape()[1];
            data.extend_from_slice(&p.data()[b * c * len..(b + 1) * c * len]);
        }
    }
    Tensor::new(vec![batch, total, len], data)
}

/// Inverse of [`concat_channels`] for equal-width parts.
pub fn split_channels<T: Real>(t: &Tensor<T>, parts: usize) -> Result<Vec<Tensor<T>>> {
    let (batch, ch, len) = t.dims3("split")?;
    if parts == 0 || ch % parts != 0 {
        return Err(Error::shape("split", format!("channels divisible by {parts}"), ch));
    }
    let width = ch / parts;
    (0..parts)
        .map(|p| {
            let mut data = Vec::with_capacity(batch * width * len);
            for b in 0..batch {
                let start = (b * ch + p * width) * len;
                data.extend_from_slice(&t.data()[start..start + width * len]);
            }
            Tensor::new(vec![batch, width, len], data)
        })
        .collect()
}

impl<T: Real> MsModule<T> {
    pub fn init<R: Rng + ?Sized>(in_ch: usize, branch_ch: usize, rng: &mut R) -> Result<Self> {
        let reduce = ConvBnRelu::init(in_ch, branch_ch, 3, 2, 1, rng)?;
        let branches = BRANCH_KERNELS
            .iter()
            .map(|&k| Branch::init(branch_ch, k, rng))
            .collect::<Result<_>>()?;
        Ok(Self { reduce, branches })
    }

    pub fn in_channels(&self) -> usize {
        self.reduce.conv.in_channels()
    }

    pub fn out_channels(&self) -> usize {
        self.branches.iter().map(|b| b.gather.conv.out_channels()).sum()
    }

    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<(Tensor<T>, MsModuleCache<T>)> {
        let (_, ch, _) = x.dims3("ms_module_forward")?;
        if ch != self.in_channels() {
            return Err(Error::shape("ms_module_forward", self.in_channels(), ch));
        }
        let (r, reduce) = self.reduce.forward(x, mode)?;
        let mut outs = Vec::with_capacity(self.branches.len());
        let mut caches = Vec::with_capacity(self.branches.len());
        for branch in &mut self.branches {
            let (y, c) = branch.forward(&r, mode)?;
            outs.push(y);
            caches.push(c);
        }
        Ok((concat_channels(&outs)?, MsModuleCache { reduce, branches: caches }))
    }

    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (_, ch, _) = x.dims3("ms_module_forward")?;
        if ch != self.in_channels() {
            return Err(Error::shape("ms_module_forward", self.in_channels(), ch));
        }
        let r = self.reduce.infer(x)?;
        let outs = self
            .branches
            .iter()
            .map(|b| b.infer(&r))
            .collect::<Result<Vec<_>>>()?;
        concat_channels(&outs)
    }

    pub fn backward(&self, cache: &MsModuleCache<T>, grad: &Tensor<T>) -> Result<(Tensor<T>, MsModuleGrads<T>)> {
        let parts = split_channels(grad, self.branches.len())?;
        let mut grad_r: Option<Tensor<T>> = None;
        let mut branch_grads = Vec::with_capacity(self.branches.len());
        for ((branch, c), g) in self.branches.iter().zip(&cache.branches).zip(&parts) {
            let (gr, bg) = branch.backward(c, g)?;
            match &mut grad_r {
                None => grad_r = Some(gr),
                Some(acc) => {
                    for (a, &v) in acc.data_mut().iter_mut().zip(gr.data()) {
                        *a += v;
                    }
                }
            }
            branch_grads.push(bg);
        }
        let grad_r = grad_r.ok_or_else(|| Error::InvalidArgument("ms module without branches".into()))?;
        let (gx, reduce) = self.reduce.backward(&cache.reduce, &grad_r)?;
        Ok((gx, MsModuleGrads { reduce, branches: branch_grads }))
    }
}

impl<T> Params<T> for MsModule<T> {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, ParamKind, &'a Tensor<T>)) {
        self.reduce.visit(&join(prefix, "reduce"), f);
        for (i, b) in self.branches.iter().enumerate() {
            b.visit(&join(prefix, &format!("branch{}", i + 1)), f);
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, ParamKind, &mut Tensor<T>)) {
        self.reduce.visit_mut(&join(prefix, "reduce"), f);
        for (i, b) in self.branches.iter_mut().enumerate() {
            b.visit_mut(&join(prefix, &format!("branch{}", i + 1)), f);
        }
    }
}

impl<T> Grads<T> for MsModuleGrads<T> {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor<T>)) {
        self.reduce.visit(&join(prefix, "reduce"), f);
        for (i, b) in self.branches.iter().enumerate() {
            b.visit(&join(prefix, &format!("branch{}", i + 1)), f);
        }
    }
}
