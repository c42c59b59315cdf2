//! Named parameter traversal shared by the optimizer, checkpoints and tests.
//!
//! Parameter structs and their gradient mirrors walk their tensors in the
//! same order; gradients skip [`ParamKind::BnRunning`] entries.

use super::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamKind {
    /// Convolution or dense weights.
    Weight,
    Bias,
    /// BN `gamma`/`beta`: trained, never weight-decayed.
    BnAffine,
    /// BN running statistics: saved, never trained.
    BnRunning,
}

impl ParamKind {
    pub fn trainable(self) -> bool {
        self != ParamKind::BnRunning
    }

    pub fn decayed(self) -> bool {
        matches!(self, ParamKind::Weight | ParamKind::Bias)
    }
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

pub trait Params<T> {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, ParamKind, &'a Tensor<T>));
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, ParamKind, &mut Tensor<T>));

    fn named_params(&self) -> Vec<(String, ParamKind, &Tensor<T>)> {
        let mut out = Vec::new();
        self.visit("", &mut |n, k, t| out.push((n, k, t)));
        out
    }
}

pub trait Grads<T> {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor<T>));

    fn named_grads(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::new();
        self.visit("", &mut |n, t| out.push((n, t)));
        out
    }
}
