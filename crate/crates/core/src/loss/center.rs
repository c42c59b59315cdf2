//! Center loss `½ Σᵢ ‖xᵢ − c_{yᵢ}‖²` and the mini-batch center update.

use super::{check_labels, Reduction};
use crate::error::{Error, Result};
use crate::nn::{Real, Tensor};

/// Per-class feature centers with their update rate `alpha ∈ [0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Centers<T> {
    /// `num_classes × feature_dim`
    pub c: Tensor<T>,
    pub alpha: T,
}

impl<T: Real> Centers<T> {
    /// Zero centers.
    pub fn new(num_classes: usize, feature_dim: usize, alpha: T) -> Result<Self> {
        Self::from_tensor(Tensor::zeros(&[num_classes, feature_dim]), alpha)
    }

    pub fn from_tensor(c: Tensor<T>, alpha: T) -> Result<Self> {
        c.dims2("Centers")?;
        if !(alpha >= T::zero() && alpha <= T::one()) {
            return Err(Error::InvalidArgument(format!("center rate alpha = {alpha} is outside [0, 1]")));
        }
        if !c.all_finite() {
            return Err(Error::InvalidArgument("centers contain non-finite values".into()));
        }
        Ok(Self { c, alpha })
    }

    pub fn num_classes(&self) -> usize {
        self.c.shape()[0]
    }

    pub fn dim(&self) -> usize {
        self.c.shape()[1]
    }

    pub fn center(&self, class: usize) -> &[T] {
        let d = self.dim();
        &self.c.data()[class * d..(class + 1) * d]
    }

    fn check(&self, features: &Tensor<T>, labels: &[usize]) -> Result<usize> {
        let (m, d) = features.dims2("center_loss")?;
        if d != self.dim() {
            return Err(Error::shape("center_loss", self.dim(), d));
        }
        check_labels(labels, m, self.num_classes())?;
        Ok(m)
    }

    /// Moves each center toward its classes' batch features:
    /// `Δc_j = Σ_{yᵢ=j} (c_j − xᵢ) / (1 + n_j)`, `c_j ← c_j − α Δc_j`.
    /// Classes absent from the batch are left untouched.
    pub fn update(&mut self, features: &Tensor<T>, labels: &[usize]) -> Result<()> {
        self.check(features, labels)?;
        let d = self.dim();
        let k = self.num_classes();
        let mut delta = vec![T::zero(); k * d];
        let mut count = vec![0usize; k];
        for (x, &y) in features.data().chunks(d).zip(labels) {
            count[y] += 1;
            let c = &self.c.data()[y * d..(y + 1) * d];
            for ((dv, &cv), &xv) in delta[y * d..(y + 1) * d].iter_mut().zip(c).zip(x) {
                *dv += cv - xv;
            }
        }
        let alpha = self.alpha;
        for j in (0..k).filter(|&j| count[j] > 0) {
            let denom = T::from_usize_lossy(1 + count[j]);
            let c = &mut self.c.data_mut()[j * d..(j + 1) * d];
            for (cv, &dv) in c.iter_mut().zip(&delta[j * d..(j + 1) * d]) {
                *cv -= alpha * (dv / denom);
            }
        }
        Ok(())
    }
}

pub fn center_loss<T: Real>(
    features: &Tensor<T>,
    labels: &[usize],
    centers: &Centers<T>,
    reduction: Reduction,
) -> Result<T> {
    let m = centers.check(features, labels)?;
    let d = centers.dim();
    let half = T::from_f64_lossy(0.5);
    let total: T = features
        .data()
        .chunks(d)
        .zip(labels)
        .map(|(x, &y)| {
            x.iter()
                .zip(centers.center(y))
                .map(|(&a, &b)| (a - b) * (a - b))
                .sum::<T>()
        })
        .sum();
    Ok(half * total * reduction.factor::<T>(m))
}

/// `∂L_C/∂xᵢ = (xᵢ − c_{yᵢ})`, times the reduction factor. λ is applied by the caller.
pub fn center_loss_grad<T: Real>(
    features: &Tensor<T>,
    labels: &[usize],
    centers: &Centers<T>,
    reduction: Reduction,
) -> Result<Tensor<T>> {
    let m = centers.check(features, labels)?;
    let d = centers.dim();
    let scale = reduction.factor::<T>(m);
    let mut g = features.clone();
    for (row, &y) in g.data_mut().chunks_mut(d).zip(labels) {
        for (v, &c) in row.iter_mut().zip(centers.center(y)) {
            *v = (*v - c) * scale;
        }
    }
    Ok(g)
}
