//! Fully connected layer `y = x·W + b`.

use rand::Rng;
use rayon::prelude::*;

use super::init::kaiming_uniform;
use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Dense<T> {
    /// `in_dim × out_dim`
    pub weight: Tensor<T>,
    /// `out_dim`
    pub bias: Tensor<T>,
}

#[derive(Clone, Debug)]
pub struct DenseCache<T> {
    input: Tensor<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseGrads<T> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Real> Dense<T> {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            weight: Tensor::zeros(&[in_dim, out_dim]),
            bias: Tensor::zeros(&[out_dim]),
        }
    }

    pub fn init<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let mut layer = Self::zeros(in_dim, out_dim);
        kaiming_uniform(&mut layer.weight, in_dim, rng);
        layer
    }

    pub fn in_dim(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn out_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn forward(&self, input: &Tensor<T>) -> Result<(Tensor<T>, DenseCache<T>)> {
        let out = self.forward_inference(input)?;
        Ok((out, DenseCache { input: input.clone() }))
    }

    pub fn forward_inference(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let (batch, in_dim) = input.dims2("dense_forward")?;
        if in_dim != self.in_dim() {
            return Err(Error::shape("dense_forward", self.in_dim(), in_dim));
        }
        let out_dim = self.out_dim();
        let w = self.weight.data();
        let mut out = Tensor::zeros(&[batch, out_dim]);
        out.data_mut()
            .par_chunks_mut(out_dim)
            .zip(input.data().par_chunks(in_dim))
            .for_each(|(y, x)| {
                y.copy_from_slice(self.bias.data());
                for (i, &xv) in x.iter().enumerate() {
                    for (yv, &wv) in y.iter_mut().zip(&w[i * out_dim..(i + 1) * out_dim]) {
                        *yv += xv * wv;
                    }
                }
            });
        Ok(out)
    }

    pub fn backward(&self, cache: &DenseCache<T>, grad_out: &Tensor<T>) -> Result<(Tensor<T>, DenseGrads<T>)> {
        let (batch, in_dim) = cache.input.dims2("dense_backward")?;
        let out_dim = self.out_dim();
        if grad_out.shape() != [batch, out_dim] {
            return Err(Error::shape(
                "dense_backward",
                format!("{:?}", [batch, out_dim]),
                format!("{:?}", grad_out.shape()),
            ));
        }
        let x = cache.input.data();
        let g = grad_out.data();
        let w = self.weight.data();

        let mut grad_in = Tensor::zeros(&[batch, in_dim]);
        grad_in
            .data_mut()
            .par_chunks_mut(in_dim)
            .zip(g.par_chunks(out_dim))
            .for_each(|(gi, go)| {
                for (i, giv) in gi.iter_mut().enumerate() {
                    *giv = w[i * out_dim..(i + 1) * out_dim]
                        .iter()
                        .zip(go)
                        .map(|(&a, &b)| a * b)
                        .sum();
                }
            });

        let mut grad_w = Tensor::zeros(&[in_dim, out_dim]);
        grad_w
            .data_mut()
            .par_chunks_mut(out_dim)
            .enumerate()
            .for_each(|(i, gw)| {
                for b in 0..batch {
                    let xv = x[b * in_dim + i];
                    for (gwv, &gv) in gw.iter_mut().zip(&g[b * out_dim..(b + 1) * out_dim]) {
                        *gwv += xv * gv;
                    }
                }
            });
        let mut grad_b = Tensor::zeros(&[out_dim]);
        for row in g.chunks(out_dim) {
            for (gb, &gv) in grad_b.data_mut().iter_mut().zip(row) {
                *gb += gv;
            }
        }
        Ok((grad_in, DenseGrads { weight: grad_w, bias: grad_b }))
    }
}

impl<T> super::params::Params<T> for Dense<T> {
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

impl<T> super::params::Grads<T> for DenseGrads<T> {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor<T>)) {
        use super::params::join;
        f(join(prefix, "weight"), &self.weight);
        f(join(prefix, "bias"), &self.bias);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{numeric_grad, rel_error};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_weights() {
        let mut d = Dense::<f64>::zeros(3, 3);
        for i in 0..3 {
            d.weight.data_mut()[i * 3 + i] = 1.0;
        }
        let x = Tensor::from_fn(&[2, 3], |i| i as f64 - 2.0);
        assert_eq!(d.forward_inference(&x).unwrap(), x);
    }

    #[test]
    fn zero_input_gives_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut d = Dense::<f64>::init(4, 2, &mut rng);
        d.bias = Tensor::new(vec![2], vec![0.5, -1.5]).unwrap();
        let y = d.forward_inference(&Tensor::zeros(&[3, 4])).unwrap();
        assert_eq!(y.data(), &[0.5, -1.5, 0.5, -1.5, 0.5, -1.5]);
    }

    #[test]
    fn dim_mismatch() {
        let d = Dense::<f32>::zeros(4, 2);
        assert!(d.forward_inference(&Tensor::zeros(&[1, 3])).is_err());
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut d = Dense::<f64>::init(5, 3, &mut rng);
        d.bias = Tensor::from_fn(&[3], |_| rng.random_range(-1.0..1.0));
        let x = Tensor::from_fn(&[4, 5], |_| rng.random_range(-1.0..1.0));
        let r = Tensor::from_fn(&[4, 3], |_| rng.random_range(-1.0..1.0));
        let (_, cache) = d.forward(&x).unwrap();
        let (gi, gp) = d.backward(&cache, &r).unwrap();
        assert!(rel_error(&gi, &numeric_grad(&x, |xp| d.forward_inference(xp).unwrap().dot(&r))) < 1e-8);
        let nw = numeric_grad(&d.weight, |wp| {
            let mut l = d.clone();
            l.weight = wp.clone();
            l.forward_inference(&x).unwrap().dot(&r)
        });
        assert!(rel_error(&gp.weight, &nw) < 1e-8);
        let nb = numeric_grad(&d.bias, |bp| {
            let mut l = d.clone();
            l.bias = bp.clone();
            l.forward_inference(&x).unwrap().dot(&r)
        });
        assert!(rel_error(&gp.bias, &nb) < 1e-8);
    }
}
