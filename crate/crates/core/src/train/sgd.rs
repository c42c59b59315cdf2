use crate::error::{Error, Result};
use crate::nn::{Grads, Params, Real, Tensor};

/// One momentum buffer per trainable parameter, in traversal order.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState<T> {
    pub velocity: Vec<Tensor<T>>,
}

impl<T: Real> OptimizerState<T> {
    pub fn new<P: Params<T>>(params: &P) -> Self {
        let velocity = params
            .named_params()
            .into_iter()
            .filter(|(_, kind, _)| kind.trainable())
            .map(|(_, _, t)| Tensor::zeros(t.shape()))
            .collect();
        Self { velocity }
    }

    pub fn reset(&mut self) {
        self.velocity.iter_mut().for_each(|v| v.fill(T::zero()));
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SgdConfig {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
}

/// `g' = g + wd·p` (conv/dense weights and biases only), `v ← μv + g'`, `p ← p − lr·v`.
/// Batch-norm running statistics are skipped entirely.
pub fn sgd_step<T: Real, P: Params<T>, G: Grads<T>>(
    params: &mut P,
    grads: &G,
    state: &mut OptimizerState<T>,
    config: &SgdConfig,
) -> Result<()> {
    let grads = grads.named_grads();
    if grads.len() != state.velocity.len() {
        return Err(Error::shape("sgd_step", state.velocity.len(), format!("{} gradients", grads.len())));
    }
    let lr = T::from_f64_lossy(config.lr);
    let mu = T::from_f64_lossy(config.momentum);
    let wd = T::from_f64_lossy(config.weight_decay);
    let mut i = 0;
    let mut failure = None;
    params.visit_mut("", &mut |name, kind, p| {
        if !kind.trainable() || failure.is_some() {
            return;
        }
        let Some((gname, g)) = grads.get(i) else {
            failure = Some(Error::shape("sgd_step", "a gradient", format!("none for {name}")));
            return;
        };
        let v = &mut state.velocity[i];
        i += 1;
        if g.shape() != p.shape() || v.shape() != p.shape() {
            failure = Some(Error::shape(
                "sgd_step",
                format!("{name} {:?}", p.shape()),
                format!("{gname} {:?}", g.shape()),
            ));
            return;
        }
        let decay = if kind.decayed() { wd } else { T::zero() };
        for ((pv, &gv), vv) in p.data_mut().iter_mut().zip(g.data()).zip(v.data_mut()) {
            *vv = mu * *vv + (gv + decay * *pv);
            *pv -= lr * *vv;
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    if i != state.velocity.len() {
        return Err(Error::shape("sgd_step", state.velocity.len(), format!("{i} trainable parameters")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::dense::DenseGrads;
    use crate::nn::{BatchNorm, Dense};

    fn scalar_dense(w: f64, b: f64) -> Dense<f64> {
        let mut d = Dense::zeros(1, 1);
        d.weight.data_mut()[0] = w;
        d.bias.data_mut()[0] = b;
        d
    }

    fn grads(w: f64, b: f64) -> DenseGrads<f64> {
        DenseGrads {
            weight: Tensor::full(&[1, 1], w),
            bias: Tensor::full(&[1], b),
        }
    }

    #[test]
    fn hand_iteration_with_momentum() {
        let mut d = scalar_dense(1.0, 0.0);
        let mut st = OptimizerState::new(&d);
        let cfg = SgdConfig { lr: 0.1, momentum: 0.9, weight_decay: 0.0 };
        for _ in 0..2 {
            sgd_step(&mut d, &grads(1.0, 0.0), &mut st, &cfg).unwrap();
        }
        assert!((d.weight.data()[0] - 0.71).abs() < 1e-12);
    }

    #[test]
    fn plain_gradient_step_and_zero_gradient() {
        let mut d = scalar_dense(2.0, -1.0);
        let mut st = OptimizerState::new(&d);
        let cfg = SgdConfig { lr: 0.5, momentum: 0.0, weight_decay: 0.0 };
        sgd_step(&mut d, &grads(0.4, -2.0), &mut st, &cfg).unwrap();
        assert_eq!((d.weight.data()[0], d.bias.data()[0]), (1.8, 0.0));
        let before = d.clone();
        let mut st = OptimizerState::new(&d);
        sgd_step(&mut d, &grads(0.0, 0.0), &mut st, &SgdConfig { momentum: 0.9, ..cfg }).unwrap();
        assert_eq!(d, before);
    }

    #[test]
    fn weight_decay_skips_batch_norm() {
        let mut bn = BatchNorm::<f64>::new(2);
        bn.running_var.fill(4.0);
        let before = bn.clone();
        let mut st = OptimizerState::new(&bn);
        assert_eq!(st.velocity.len(), 2);
        let g = crate::nn::batchnorm::BatchNormGrads {
            gamma: Tensor::zeros(&[2]),
            beta: Tensor::zeros(&[2]),
        };
        let cfg = SgdConfig { lr: 0.1, momentum: 0.9, weight_decay: 0.5 };
        sgd_step(&mut bn, &g, &mut st, &cfg).unwrap();
        assert_eq!(bn, before);

        let mut d = scalar_dense(1.0, 1.0);
        let mut st = OptimizerState::new(&d);
        sgd_step(&mut d, &grads(0.0, 0.0), &mut st, &cfg).unwrap();
        assert!((d.weight.data()[0] - 0.95).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut d = scalar_dense(1.0, 1.0);
        let mut st = OptimizerState::new(&d);
        let g = DenseGrads {
            weight: Tensor::zeros(&[2, 1]),
            bias: Tensor::zeros(&[1]),
        };
        let cfg = SgdConfig { lr: 0.1, momentum: 0.0, weight_decay: 0.0 };
        assert!(sgd_step(&mut d, &g, &mut st, &cfg).is_err());
    }
}
