use super::tensor::{Real, Tensor};
use crate::error::Result;

/// Elementwise `max(0, z)`.
pub fn relu<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Passes `grad_out` where the forward input was strictly positive.
/// The subgradient at exactly zero is taken as zero.
pub fn relu_backward<T: Real>(input: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    input.same_shape(grad_out, "relu_backward")?;
    let data = input
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&z, &g)| if z > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::new(input.shape().to_vec(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_cases() {
        let x = Tensor::new(vec![3], vec![-3.0f64, 2.5, 0.0]).unwrap();
        assert_eq!(relu(&x).data(), &[0.0, 2.5, 0.0]);
        let g = Tensor::full(&[3], 1.0);
        assert_eq!(relu_backward(&x, &g).unwrap().data(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn shape_mismatch() {
        let x = Tensor::<f32>::zeros(&[3]);
        assert!(relu_backward(&x, &Tensor::zeros(&[4])).is_err());
    }
}
