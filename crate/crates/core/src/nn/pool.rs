//! Global average pooling over the temporal axis.

use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};

/// `batch × C × L → batch × C`, averaging each channel over time.
pub fn gap<T: Real>(input: &Tensor<T>) -> Result<Tensor<T>> {
    let (batch, ch, len) = input.dims3("gap")?;
    if len == 0 {
        return Err(Error::InvalidArgument("gap over zero-length input".into()));
    }
    let inv = T::from_usize_lossy(len).recip();
    let data = input
        .data()
        .chunks(len)
        .map(|row| row.iter().copied().sum::<T>() * inv)
        .collect();
    Tensor::new(vec![batch, ch], data)
}

/// Spreads each pooled gradient uniformly (`grad / L`) over its channel.
pub fn gap_backward<T: Real>(grad_out: &Tensor<T>, len: usize) -> Result<Tensor<T>> {
    let (batch, ch) = grad_out.dims2("gap_backward")?;
    if len == 0 {
        return Err(Error::InvalidArgument("gap over zero-length input".into()));
    }
    let inv = T::from_usize_lossy(len).recip();
    let mut data = Vec::with_capacity(batch * ch * len);
    for &g in grad_out.data() {
        data.extend(std::iter::repeat_n(g * inv, len));
    }
    Tensor::new(vec![batch, ch, len], data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{numeric_grad, rel_error};

    #[test]
    fn channel_means() {
        let x = Tensor::new(vec![1, 2, 2], vec![1.0f64, 3.0, 5.0, 7.0]).unwrap();
        assert_eq!(gap(&x).unwrap().data(), &[2.0, 6.0]);
    }

    #[test]
    fn constant_map() {
        let x = Tensor::full(&[2, 3, 5], 1.25f32);
        assert!(gap(&x).unwrap().data().iter().all(|&v| v == 1.25));
    }

    #[test]
    fn table_shape() {
        let x = Tensor::<f32>::zeros(&[1, 128, 32]);
        assert_eq!(gap(&x).unwrap().shape(), &[1, 128]);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let x = Tensor::from_fn(&[2, 3, 4], |i| (i as f64).sin());
        let r = Tensor::from_fn(&[2, 3], |i| (i as f64).cos());
        let g = gap_backward(&r, 4).unwrap();
        let n = numeric_grad(&x, |xp| gap(xp).unwrap().dot(&r));
        assert!(rel_error(&g, &n) < 1e-9);
    }
}
