//! Softmax cross-entropy, center loss, and their λ-weighted combination.

pub mod center;
pub mod joint;
pub mod softmax;

pub use center::{center_loss, center_loss_grad, Centers};
pub use joint::{joint_loss, JointLoss, LossConfig};
pub use softmax::{cross_entropy, softmax, softmax_ce_backward};

use crate::error::{Error, Result};
use crate::nn::Real;

/// How per-sample losses are combined over a mini-batch.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Reduction {
    /// Divide the summed loss by the batch size.
    #[default]
    Mean,
    Sum,
}

impl Reduction {
    pub fn factor<T: Real>(self, batch: usize) -> T {
        match self {
            Reduction::Mean => T::from_usize_lossy(batch.max(1)).recip(),
            Reduction::Sum => T::one(),
        }
    }
}

impl std::str::FromStr for Reduction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Reduction::Mean),
            "sum" => Ok(Reduction::Sum),
            _ => Err(Error::InvalidArgument(format!("unknown reduction {s:?} (expected mean or sum)"))),
        }
    }
}

pub(crate) fn check_labels(labels: &[usize], batch: usize, classes: usize) -> Result<()> {
    if labels.len() != batch {
        return Err(Error::shape("labels", batch, labels.len()));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::LabelOutOfRange { label: bad, classes });
    }
    Ok(())
}
