//! The full network: MS modules → GAP → dense feature layer → ReLU → dense classifier.

use rand::Rng;

use super::activation::{relu, relu_backward};
use super::dense::{Dense, DenseCache, DenseGrads};
use super::ms_module::{MsModule, MsModuleCache, MsModuleGrads};
use super::params::{Grads, ParamKind, Params};
use super::pool::{gap, gap_backward};
use super::tensor::{Real, Tensor};
use super::Mode;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MsNetConfig {
    pub in_channels: usize,
    /// Channels per branch; module output is four times this.
    pub branch_channels: usize,
    pub num_modules: usize,
    /// Width of the middle dense layer, i.e. the center-loss feature dimension.
    pub feature_dim: usize,
    pub num_classes: usize,
    /// Apply ReLU to the middle dense layer's output.
    pub feature_relu: bool,
}

impl Default for MsNetConfig {
    fn default() -> Self {
        Self {
            in_channels: 2,
            branch_channels: 32,
            num_modules: 2,
            feature_dim: 128,
            num_classes: 8,
            feature_relu: true,
        }
    }
}

impl MsNetConfig {
    /// Shortest admissible frame: every stride-2 reduction must leave at least 2 samples.
    pub fn min_len(&self) -> usize {
        1 << (self.num_modules + 1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MsNet<T> {
    pub config: MsNetConfig,
    pub modules: Vec<MsModule<T>>,
    /// Feature layer (`4·branch_channels → feature_dim`).
    pub fc1: Dense<T>,
    /// Classifier (`feature_dim → num_classes`).
    pub fc2: Dense<T>,
}

#[derive(Clone, Debug)]
pub struct MsNetCache<T> {
    modules: Vec<MsModuleCache<T>>,
    pooled_len: usize,
    fc1: DenseCache<T>,
    fc1_out: Tensor<T>,
    fc2: DenseCache<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MsNetGrads<T> {
    pub modules: Vec<MsModuleGrads<T>>,
    pub fc1: DenseGrads<T>,
    pub fc2: DenseGrads<T>,
}

/// Output of a forward pass.
#[derive(Clone, Debug)]
pub struct Forward<T> {
    /// `batch × feature_dim`, the vectors supervised by the center loss.
    pub features: Tensor<T>,
    /// `batch × num_classes`, pre-softmax.
    pub logits: Tensor<T>,
}

impl<T: Real> MsNet<T> {
    pub fn init<R: Rng + ?Sized>(config: MsNetConfig, rng: &mut R) -> Result<Self> {
        if config.num_modules == 0 || config.branch_channels == 0 {
            return Err(Error::InvalidArgument("MsNet needs at least one module with nonzero width".into()));
        }
        let width = 4 * config.branch_channels;
        let mut modules = Vec::with_capacity(config.num_modules);
        for i in 0..config.num_modules {
            let in_ch = if i == 0 { config.in_channels } else { width };
            modules.push(MsModule::init(in_ch, config.branch_channels, rng)?);
        }
        let fc1 = Dense::init(width, config.feature_dim, rng);
        let fc2 = Dense::init(config.feature_dim, config.num_classes, rng);
        Ok(Self { config, modules, fc1, fc2 })
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        let (_, ch, len) = x.dims3("msnet_forward")?;
        if ch != self.config.in_channels {
            return Err(Error::shape("msnet_forward", self.config.in_channels, ch));
        }
        if len < self.config.min_len() {
            return Err(Error::InvalidArgument(format!(
                "frame length {len} is too short; need at least {}",
                self.config.min_len()
            )));
        }
        Ok(())
    }

    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<(Forward<T>, MsNetCache<T>)> {
        self.check_input(x)?;
        let mut h = x.clone();
        let mut caches = Vec::with_capacity(self.modules.len());
        for m in &mut self.modules {
            let (y, c) = m.forward(&h, mode)?;
            h = y;
            caches.push(c);
        }
        let pooled_len = h.shape()[2];
        let pooled = gap(&h)?;
        let (fc1_out, fc1) = self.fc1.forward(&pooled)?;
        let features = if self.config.feature_relu {
            relu(&fc1_out)
        } else {
            fc1_out.clone()
        };
        let (logits, fc2) = self.fc2.forward(&features)?;
        Ok((
            Forward { features, logits },
            MsNetCache {
                modules: caches,
                pooled_len,
                fc1,
                fc1_out,
                fc2,
            },
        ))
    }

    /// Inference-mode forward; never mutates the network.
    pub fn infer(&self, x: &Tensor<T>) -> Result<Forward<T>> {
        self.check_input(x)?;
        let mut h = x.clone();
        for m in &self.modules {
            h = m.infer(&h)?;
        }
        let mut features = self.fc1.forward_inference(&gap(&h)?)?;
        if self.config.feature_relu {
            features = relu(&features);
        }
        let logits = self.fc2.forward_inference(&features)?;
        Ok(Forward { features, logits })
    }

    /// Per-sample output shape after each stage for a single `in_channels × len` input.
    pub fn layer_shapes(&self, len: usize) -> Result<Vec<(String, Vec<usize>)>> {
        let x = Tensor::zeros(&[1, self.config.in_channels, len]);
        self.check_input(&x)?;
        let mut shapes = Vec::new();
        let mut h = x;
        for (i, m) in self.modules.iter().enumerate() {
            h = m.infer(&h)?;
            shapes.push((format!("ms{}", i + 1), h.shape()[1..].to_vec()));
        }
        let pooled = gap(&h)?;
        shapes.push(("gap".into(), pooled.shape()[1..].to_vec()));
        let f = self.fc1.forward_inference(&pooled)?;
        shapes.push(("fc1".into(), f.shape()[1..].to_vec()));
        let l = self.fc2.forward_inference(&f)?;
        shapes.push(("fc2".into(), l.shape()[1..].to_vec()));
        Ok(shapes)
    }

    /// Backpropagates two gradient streams: `grad_logits` through the
    /// classifier, plus an optional direct `grad_features` (the center-loss
    /// term) added at the feature layer. The classifier weights only see
    /// `grad_logits`.
    pub fn backward(
        &self,
        cache: &MsNetCache<T>,
        grad_features: Option<&Tensor<T>>,
        grad_logits: &Tensor<T>,
    ) -> Result<MsNetGrads<T>> {
        let (mut g_feat, fc2) = self.fc2.backward(&cache.fc2, grad_logits)?;
        if let Some(gf) = grad_features {
            g_feat.same_shape(gf, "msnet_backward")?;
            for (a, &b) in g_feat.data_mut().iter_mut().zip(gf.data()) {
                *a += b;
            }
        }
        let g_fc1 = if self.config.feature_relu {
            relu_backward(&cache.fc1_out, &g_feat)?
        } else {
            g_feat
        };
        let (g_pool, fc1) = self.fc1.backward(&cache.fc1, &g_fc1)?;
        let mut g = gap_backward(&g_pool, cache.pooled_len)?;
        let mut module_grads = Vec::with_capacity(self.modules.len());
        for (m, c) in self.modules.iter().zip(&cache.modules).rev() {
            let (gx, mg) = m.backward(c, &g)?;
            g = gx;
            module_grads.push(mg);
        }
        module_grads.reverse();
        Ok(MsNetGrads {
            modules: module_grads,
            fc1,
            fc2,
        })
    }

    /// Network with the right layout and unspecified values, for loaders to fill in.
    pub(crate) fn skeleton(config: MsNetConfig) -> Result<Self> {
        use rand::SeedableRng;
        Self::init(config, &mut rand_chacha::ChaCha8Rng::seed_from_u64(0))
    }

    /// Converts every parameter to another scalar type.
    pub fn cast<U: Real>(&self) -> MsNet<U> {
        let mut out = MsNet::<U>::skeleton(self.config).expect("config already validated");
        let mut src = self.named_params().into_iter().map(|(_, _, t)| t.cast::<U>());
        out.visit_mut("", &mut |_, _, t| *t = src.next().expect("same layout"));
        out
    }
}

impl<T> Params<T> for MsNet<T> {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, ParamKind, &'a Tensor<T>)) {
        for (i, m) in self.modules.iter().enumerate() {
            m.visit(&super::params::join(prefix, &format!("ms{}", i + 1)), f);
        }
        self.fc1.visit(&super::params::join(prefix, "fc1"), f);
        self.fc2.visit(&super::params::join(prefix, "fc2"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, ParamKind, &mut Tensor<T>)) {
        for (i, m) in self.modules.iter_mut().enumerate() {
            m.visit_mut(&super::params::join(prefix, &format!("ms{}", i + 1)), f);
        }
        self.fc1.visit_mut(&super::params::join(prefix, "fc1"), f);
        self.fc2.visit_mut(&super::params::join(prefix, "fc2"), f);
    }
}

impl<T> Grads<T> for MsNetGrads<T> {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor<T>)) {
        for (i, m) in self.modules.iter().enumerate() {
            m.visit(&super::params::join(prefix, &format!("ms{}", i + 1)), f);
        }
        self.fc1.visit(&super::params::join(prefix, "fc1"), f);
        self.fc2.visit(&super::params::join(prefix, "fc2"), f);
    }
}
