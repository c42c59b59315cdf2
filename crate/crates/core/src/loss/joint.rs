use super::center::{center_loss, center_loss_grad, Centers};
use super::softmax::{cross_entropy, softmax, softmax_ce_backward};
use super::Reduction;
use crate::error::{Error, Result};
use crate::nn::{Real, Tensor};

pub const DEFAULT_LAMBDA: f64 = 0.01;
pub const DEFAULT_ALPHA: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossConfig {
    /// Weight of the center-loss term.
    pub lambda: f64,
    pub reduction: Reduction,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            lambda: DEFAULT_LAMBDA,
            reduction: Reduction::Mean,
        }
    }
}

#[derive(Clone, Debug)]
pub struct JointLoss<T> {
    /// `softmax_loss + lambda · center_loss`
    pub total: T,
    pub softmax_loss: T,
    /// Unweighted center loss.
    pub center_loss: T,
    /// `∂L_S/∂logits`; the only gradient the classifier layer receives.
    pub grad_logits: Tensor<T>,
    /// `λ·∂L_C/∂features`, to be added to the feature-layer gradient.
    pub grad_features: Tensor<T>,
}

/// `L = L_S + λ·L_C` with both gradient streams.
pub fn joint_loss<T: Real>(
    logits: &Tensor<T>,
    features: &Tensor<T>,
    labels: &[usize],
    centers: &Centers<T>,
    config: &LossConfig,
) -> Result<JointLoss<T>> {
    if config.lambda.is_nan() || config.lambda < 0.0 {
        return Err(Error::InvalidArgument(format!("lambda = {} must be nonnegative", config.lambda)));
    }
    let (m, _) = logits.dims2("joint_loss")?;
    let (mf, _) = features.dims2("joint_loss")?;
    if m != mf {
        return Err(Error::shape("joint_loss", m, mf));
    }
    let lambda = T::from_f64_lossy(config.lambda);
    let softmax_loss = cross_entropy(&softmax(logits)?, labels, config.reduction)?;
    let grad_logits = softmax_ce_backward(logits, labels, config.reduction)?;
    let center = center_loss(features, labels, centers, config.reduction)?;
    let grad_features = center_loss_grad(features, labels, centers, config.reduction)?.map(|v| v * lambda);
    Ok(JointLoss {
        total: softmax_loss + lambda * center,
        softmax_loss,
        center_loss: center,
        grad_logits,
        grad_features,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{numeric_grad, rel_error};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn instance(seed: u64) -> (Tensor<f64>, Tensor<f64>, Vec<usize>, Centers<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = Tensor::from_fn(&[6, 8], |_| rng.random_range(-2.0..2.0));
        let x = Tensor::from_fn(&[6, 5], |_| rng.random_range(0.0..3.0));
        let y = (0..6).map(|_| rng.random_range(0..8)).collect();
        let c = Centers::from_tensor(Tensor::from_fn(&[8, 5], |_| rng.random_range(0.0..1.0)), 0.5).unwrap();
        (z, x, y, c)
    }

    #[test]
    fn zero_lambda_is_plain_softmax() {
        let (z, x, y, c) = instance(1);
        let cfg = LossConfig { lambda: 0.0, ..Default::default() };
        let j = joint_loss(&z, &x, &y, &c, &cfg).unwrap();
        let ce = cross_entropy(&softmax(&z).unwrap(), &y, Reduction::Mean).unwrap();
        assert_eq!(j.total, ce);
        assert_eq!(j.grad_logits, softmax_ce_backward(&z, &y, Reduction::Mean).unwrap());
        assert!(j.grad_features.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn features_at_centers() {
        let (z, _, y, c) = instance(2);
        let at: Vec<f64> = y.iter().flat_map(|&l| c.center(l).to_vec()).collect();
        let x = Tensor::new(vec![6, 5], at).unwrap();
        for lambda in [0.0, 0.01, 3.0] {
            let j = joint_loss(&z, &x, &y, &c, &LossConfig { lambda, ..Default::default() }).unwrap();
            assert_eq!(j.total, j.softmax_loss);
        }
    }

    #[test]
    fn feature_gradient_matches_finite_differences() {
        let (z, x, y, c) = instance(3);
        let cfg = LossConfig { lambda: 0.7, reduction: Reduction::Sum };
        let j = joint_loss(&z, &x, &y, &c, &cfg).unwrap();
        let n = numeric_grad(&x, |xp| joint_loss(&z, xp, &y, &c, &cfg).unwrap().total);
        assert!(rel_error(&j.grad_features, &n) < 1e-6);
        let n = numeric_grad(&z, |zp| joint_loss(zp, &x, &y, &c, &cfg).unwrap().total);
        assert!(rel_error(&j.grad_logits, &n) < 1e-6);
    }

    #[test]
    fn negative_lambda_rejected() {
        let (z, x, y, c) = instance(4);
        assert!(joint_loss(&z, &x, &y, &c, &LossConfig { lambda: -1.0, ..Default::default() }).is_err());
    }
}
