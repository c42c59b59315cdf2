//! Automatic modulation classification with a multi-scale 1-D CNN trained
//! under joint softmax and center-loss supervision.
//!
//! - [`signalgen`]: synthetic I/Q corpus generation and the dataset file format.
//! - [`nn`]: tensors, layers, the [`MsNet`] model and checkpoints.
//! - [`loss`]: softmax cross-entropy, center loss and their combination.
//! - [`train`]: SGD and the two-stage training procedure.
//! - [`eval`]: accuracy metrics, feature export, PCA and dispersion.

mod binio;
pub mod error;
pub mod eval;
pub mod loss;
pub mod nn;
pub mod signalgen;
pub mod train;

pub use error::{Error, Result};
pub use loss::{Centers, LossConfig, Reduction};
pub use nn::{Mode, MsNet, MsNetConfig, Tensor};
pub use signalgen::{Dataset, GenConfig, IqFrame, ModulationScheme};
pub use train::{train_two_stage, Stage, TrainConfig, TrainReport, Trainer};
