//! Prediction, accuracy metrics, feature export, PCA and dispersion.

pub mod features;
pub mod metrics;
pub mod pca;

pub use features::{export_features, intra_class_dispersion, write_features_csv, Dispersion, FeatureDump};
pub use metrics::{argmax_rows, evaluate, predict, write_confusion_csv, write_metrics_csv, Metrics};
pub use pca::{pca_2d, write_pca_csv, Pca};

use rayon::prelude::*;

use crate::error::Result;
use crate::nn::{Forward, MsNet, Tensor};
use crate::signalgen::Dataset;

/// Frames per inference call.
pub const INFER_CHUNK: usize = 256;

/// Inference-mode forward over the whole dataset in frame order.
pub(crate) fn infer_all(net: &MsNet<f32>, ds: &Dataset) -> Result<Vec<Forward<f32>>> {
    let idx: Vec<usize> = (0..ds.len()).collect();
    idx.par_chunks(INFER_CHUNK)
        .map(|chunk| net.infer(&ds.batch(chunk).0))
        .collect()
}

pub(crate) fn stack_rows(parts: impl IntoIterator<Item = Tensor<f32>>, width: usize) -> Result<Tensor<f32>> {
    let data: Vec<f32> = parts.into_iter().flat_map(Tensor::into_data).collect();
    let rows = data.len().checked_div(width).unwrap_or(0);
    Tensor::new(vec![rows, width], data)
}
