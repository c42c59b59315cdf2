//! Per-channel batch normalization over `batch × channels × length`.

use super::tensor::{Real, Tensor};
use super::Mode;
use crate::error::{Error, Result};

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct BatchNorm<T> {
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
    pub running_mean: Tensor<T>,
    pub running_var: Tensor<T>,
    pub eps: T,
    pub momentum: T,
}

#[derive(Clone, Debug)]
pub struct BatchNormCache<T> {
    x_hat: Tensor<T>,
    inv_std: Vec<T>,
    mode: Mode,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchNormGrads<T> {
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
}

impl<T: Real> BatchNorm<T> {
    /// `gamma = 1`, `beta = 0`, running mean 0 and variance 1.
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: Tensor::full(&[channels], T::one()),
            beta: Tensor::zeros(&[channels]),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::full(&[channels], T::one()),
            eps: T::from_f64_lossy(BN_EPS),
            momentum: T::from_f64_lossy(BN_MOMENTUM),
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    /// Train mode normalizes with batch statistics over (batch, time) and
    /// folds them into the running averages; infer mode uses the running
    /// averages and leaves the layer untouched.
    pub fn forward(&mut self, input: &Tensor<T>, mode: Mode) -> Result<(Tensor<T>, BatchNormCache<T>)> {
        let (batch, ch, len) = input.dims3("batchnorm_forward")?;
        if ch != self.channels() {
            return Err(Error::shape("batchnorm_forward", self.channels(), ch));
        }
        if mode == Mode::Train && batch < 2 {
            return Err(Error::InvalidArgument(format!(
                "batch norm in train mode needs a batch of at least 2, got {batch}"
            )));
        }
        let x = input.data();
        let n = batch * len;
        let (mean, var) = match mode {
            Mode::Train => {
                let mut mean = vec![T::zero(); ch];
                let mut var = vec![T::zero(); ch];
                let nt = T::from_usize_lossy(n);
                for c in 0..ch {
                    let mut s = T::zero();
                    for b in 0..batch {
                        s += x[(b * ch + c) * len..(b * ch + c + 1) * len].iter().copied().sum();
                    }
                    let m = s / nt;
                    let mut q = T::zero();
                    for b in 0..batch {
                        for &v in &x[(b * ch + c) * len..(b * ch + c + 1) * len] {
                            q += (v - m) * (v - m);
                        }
                    }
                    mean[c] = m;
                    var[c] = q / nt;
                }
                let mom = self.momentum;
                let unbias = if n > 1 {
                    nt / T::from_usize_lossy(n - 1)
                } else {
                    T::one()
                };
                for c in 0..ch {
                    let rm = &mut self.running_mean.data_mut()[c];
                    *rm = (T::one() - mom) * *rm + mom * mean[c];
                    let rv = &mut self.running_var.data_mut()[c];
                    *rv = (T::one() - mom) * *rv + mom * var[c] * unbias;
                }
                (mean, var)
            }
            Mode::Infer => (
                self.running_mean.data().to_vec(),
                self.running_var.data().to_vec(),
            ),
        };
        let inv_std: Vec<T> = var.iter().map(|&v| (v + self.eps).sqrt().recip()).collect();

        let mut x_hat = Tensor::zeros(input.shape());
        let mut out = Tensor::zeros(input.shape());
        let (g, bt) = (self.gamma.data(), self.beta.data());
        for b in 0..batch {
            for c in 0..ch {
                let range = (b * ch + c) * len..(b * ch + c + 1) * len;
                let xs = &x[range.clone()];
                let xh = &mut x_hat.data_mut()[range.clone()];
                for (h, &v) in xh.iter_mut().zip(xs) {
                    *h = (v - mean[c]) * inv_std[c];
                }
                let ys = &mut out.data_mut()[range.clone()];
                for (y, &h) in ys.iter_mut().zip(&x_hat.data()[range]) {
                    *y = g[c] * h + bt[c];
                }
            }
        }
        Ok((out, BatchNormCache { x_hat, inv_std, mode }))
    }

    /// Inference-mode output without building a cache.
    pub fn infer(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let (_, ch, len) = input.dims3("batchnorm_forward")?;
        if ch != self.channels() {
            return Err(Error::shape("batchnorm_forward", self.channels(), ch));
        }
        let (g, bt) = (self.gamma.data(), self.beta.data());
        let (rm, rv) = (self.running_mean.data(), self.running_var.data());
        let scale: Vec<T> = (0..ch).map(|c| g[c] / (rv[c] + self.eps).sqrt()).collect();
        let mut out = input.clone();
        for (i, row) in out.data_mut().chunks_mut(len).enumerate() {
            let c = i % ch;
            for v in row {
                *v = (*v - rm[c]) * scale[c] + bt[c];
            }
        }
        Ok(out)
    }

    pub fn backward(
        &self,
        cache: &BatchNormCache<T>,
        grad_out: &Tensor<T>,
    ) -> Result<(Tensor<T>, BatchNormGrads<T>)> {
        cache.x_hat.same_shape(grad_out, "batchnorm_backward")?;
        let (batch, ch, len) = grad_out.dims3("batchnorm_backward")?;
        let g = grad_out.data();
        let xh = cache.x_hat.data();
        let mut grad_gamma = Tensor::zeros(&[ch]);
        let mut grad_beta = Tensor::zeros(&[ch]);
        for b in 0..batch {
            for c in 0..ch {
                let r = (b * ch + c) * len..(b * ch + c + 1) * len;
                let mut sg = T::zero();
                let mut sgx = T::zero();
                for (&gv, &hv) in g[r.clone()].iter().zip(&xh[r]) {
                    sg += gv;
                    sgx += gv * hv;
                }
                grad_beta.data_mut()[c] += sg;
                grad_gamma.data_mut()[c] += sgx;
            }
        }

        let mut grad_in = Tensor::zeros(grad_out.shape());
        let gamma = self.gamma.data();
        let nt = T::from_usize_lossy(batch * len);
        #[allow(clippy::needless_range_loop)]
        for b in 0..batch {
            for c in 0..ch {
                let r = (b * ch + c) * len..(b * ch + c + 1) * len;
                let scale = gamma[c] * cache.inv_std[c];
                let gi = &mut grad_in.data_mut()[r.clone()];
                match cache.mode {
                    Mode::Infer => {
                        for (d, &gv) in gi.iter_mut().zip(&g[r]) {
                            *d = scale * gv;
                        }
                    }
                    Mode::Train => {
                        // d/dx of gamma * (x - mean) / std with batch statistics.
                        let mean_g = grad_beta.data()[c] / nt;
                        let mean_gx = grad_gamma.data()[c] / nt;
                        for ((d, &gv), &hv) in gi.iter_mut().zip(&g[r.clone()]).zip(&xh[r]) {
                            *d = scale * (gv - mean_g - hv * mean_gx);
                        }
                    }
                }
            }
        }
        Ok((
            grad_in,
            BatchNormGrads {
                gamma: grad_gamma,
                beta: grad_beta,
            },
        ))
    }
}

impl<T> super::params::Params<T> for BatchNorm<T> {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, super::params::ParamKind, &'a Tensor<T>)) {
        use super::params::{join, ParamKind};
        f(join(prefix, "gamma"), ParamKind::BnAffine, &self.gamma);
        f(join(prefix, "beta"), ParamKind::BnAffine, &self.beta);
        f(join(prefix, "running_mean"), ParamKind::BnRunning, &self.running_mean);
        f(join(prefix, "running_var"), ParamKind::BnRunning, &self.running_var);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, super::params::ParamKind, &mut Tensor<T>)) {
        use super::params::{join, ParamKind};
        f(join(prefix, "gamma"), ParamKind::BnAffine, &mut self.gamma);
        f(join(prefix, "beta"), ParamKind::BnAffine, &mut self.beta);
        f(join(prefix, "running_mean"), ParamKind::BnRunning, &mut self.running_mean);
        f(join(prefix, "running_var"), ParamKind::BnRunning, &mut self.running_var);
    }
}

impl<T> super::params::Grads<T> for BatchNormGrads<T> {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor<T>)) {
        use super::params::join;
        f(join(prefix, "gamma"), &self.gamma);
        f(join(prefix, "beta"), &self.beta);
    }
}
