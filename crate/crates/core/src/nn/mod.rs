//! Tensor numerics and the network layers, each with forward and backward passes.

pub mod activation;
pub mod batchnorm;
pub mod checkpoint;
pub mod conv;
pub mod dense;
pub(crate) mod gemm;
pub mod gradcheck;
pub mod init;
pub mod ms_module;
pub mod msnet;
pub mod params;
pub mod pool;
pub mod tensor;

pub use batchnorm::BatchNorm;
pub use conv::Conv1d;
pub use dense::Dense;
pub use ms_module::MsModule;
pub use msnet::{Forward, MsNet, MsNetConfig, MsNetGrads};
pub use params::{Grads, ParamKind, Params};
pub use tensor::{Real, Tensor};

/// Batch-norm behaviour for a forward pass.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics; running averages are updated.
    Train,
    /// Running statistics; the network is not modified.
    Infer,
}
