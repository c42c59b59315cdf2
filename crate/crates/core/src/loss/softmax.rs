use super::{check_labels, Reduction};
use crate::error::Result;
use crate::nn::{Real, Tensor};

/// Smallest probability fed to the logarithm.
pub const LOG_CLAMP: f64 = 1e-12;

/// Row-wise softmax of an `m × K` tensor, computed after subtracting each row's maximum.
pub fn softmax<T: Real>(logits: &Tensor<T>) -> Result<Tensor<T>> {
    let (_, k) = logits.dims2("softmax")?;
    let mut out = logits.clone();
    for row in out.data_mut().chunks_mut(k) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    Ok(out)
}

/// `−Σ ln p[i, yᵢ]`, divided by `m` under [`Reduction::Mean`].
pub fn cross_entropy<T: Real>(probs: &Tensor<T>, labels: &[usize], reduction: Reduction) -> Result<T> {
    let (m, k) = probs.dims2("cross_entropy")?;
    check_labels(labels, m, k)?;
    let floor = T::from_f64_lossy(LOG_CLAMP);
    let total: T = labels
        .iter()
        .enumerate()
        .map(|(i, &y)| -probs.data()[i * k + y].max(floor).ln())
        .sum();
    Ok(total * reduction.factor::<T>(m))
}

/// Gradient of `cross_entropy(softmax(logits))` with respect to the logits:
/// `(softmax − onehot) · factor`.
pub fn softmax_ce_backward<T: Real>(logits: &Tensor<T>, labels: &[usize], reduction: Reduction) -> Result<Tensor<T>> {
    let (m, k) = logits.dims2("softmax_ce_backward")?;
    check_labels(labels, m, k)?;
    let mut g = softmax(logits)?;
    let scale = reduction.factor::<T>(m);
    for (row, &y) in g.data_mut().chunks_mut(k).zip(labels) {
        row[y] -= T::one();
        for v in row.iter_mut() {
            *v *= scale;
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::nn::gradcheck::{numeric_grad, rel_error};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn t(shape: &[usize], v: &[f64]) -> Tensor<f64> {
        Tensor::new(shape.to_vec(), v.to_vec()).unwrap()
    }

    #[test]
    fn uniform_and_hand_values() {
        let p = softmax(&t(&[1, 3], &[0.0, 0.0, 0.0])).unwrap();
        assert!(p.data().iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
        let p = softmax(&t(&[1, 2], &[2f64.ln(), 0.0])).unwrap();
        assert!((p.data()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((p.data()[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn shift_invariance_and_overflow() {
        let z = t(&[1, 4], &[1.0, -2.0, 0.5, 3.0]);
        let a = softmax(&z).unwrap();
        let b = softmax(&z.map(|v| v + 1234.5)).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() < 1e-12);
        }
        let big = softmax(&t(&[1, 3], &[1e4, -1e4, 0.0])).unwrap();
        assert!(big.all_finite());
        assert!((big.data().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_values() {
        let p = t(&[1, 3], &[0.0, 1.0, 0.0]);
        assert_eq!(cross_entropy(&p, &[1], Reduction::Mean).unwrap(), 0.0);
        let u = softmax(&Tensor::<f64>::zeros(&[2, 8])).unwrap();
        let l = cross_entropy(&u, &[3, 7], Reduction::Mean).unwrap();
        assert!((l - 8f64.ln()).abs() < 1e-12);
        assert!((8f64.ln() - 2.0794).abs() < 1e-4);
        let s = cross_entropy(&u, &[3, 7], Reduction::Sum).unwrap();
        assert!((s - 2.0 * l).abs() < 1e-12);
        // clamped, not infinite
        assert!(cross_entropy(&p, &[0], Reduction::Sum).unwrap().is_finite());
    }

    #[test]
    fn label_out_of_range() {
        let p = t(&[1, 3], &[0.2, 0.3, 0.5]);
        assert!(matches!(
            cross_entropy(&p, &[3], Reduction::Mean),
            Err(Error::LabelOutOfRange { label: 3, classes: 3 })
        ));
        assert!(softmax_ce_backward(&p, &[0, 1], Reduction::Mean).is_err());
    }

    #[test]
    fn backward_values() {
        let g = softmax_ce_backward(&t(&[1, 2], &[0.0, 0.0]), &[0], Reduction::Mean).unwrap();
        assert_eq!(g.data(), &[-0.5, 0.5]);
        let g = softmax_ce_backward(&t(&[1, 3], &[0.0, 100.0, 0.0]), &[1], Reduction::Mean).unwrap();
        assert!(g.data().iter().all(|v| v.abs() < 1e-40));
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for reduction in [Reduction::Mean, Reduction::Sum] {
            let z = Tensor::from_fn(&[5, 8], |_| rng.random_range(-3.0..3.0));
            let y: Vec<usize> = (0..5).map(|_| rng.random_range(0..8)).collect();
            let g = softmax_ce_backward(&z, &y, reduction).unwrap();
            let n = numeric_grad(&z, |zp| cross_entropy(&softmax(zp).unwrap(), &y, reduction).unwrap());
            assert!(rel_error(&g, &n) < 1e-7);
        }
    }
}
