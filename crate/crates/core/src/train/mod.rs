//! SGD with momentum, mini-batching and two-stage training.
//!
//! Stage S1 minimizes `L_S + λ·L_C`, updating the class centers after each
//! batch and then the network parameters. Stage S2 starts from the S1 model
//! and minimizes `L_S` alone with the centers frozen.

pub mod data;
pub mod report;
pub mod sgd;

pub use data::{epoch_batches, split_dataset};
pub use report::{write_report_csv, EpochRecord, Stage, TrainReport};
pub use sgd::{sgd_step, OptimizerState, SgdConfig};

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::eval::predict;
use crate::loss::{joint_loss, Centers, LossConfig, Reduction};
use crate::nn::checkpoint::save_checkpoint;
use crate::nn::{Grads, Mode, MsNet, MsNetConfig};
use crate::signalgen::Dataset;

pub const CKPT_S1: &str = "ckpt_s1.bin";
pub const CKPT_S2: &str = "ckpt_s2.bin";
pub const REPORT_FILE: &str = "train_report.csv";

/// Center rate that `center_lr` is measured against: `α_eff = α · center_lr / 1e-4`.
pub const CENTER_LR_REFERENCE: f64 = 1e-4;

/// ChaCha streams derived from the run seed.
pub const INIT_STREAM: u64 = 0;
pub const SHUFFLE_STREAM: u64 = 1;

pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub epochs_stage1: usize,
    pub epochs_stage2: usize,
    pub batch_size: usize,
    pub center_lr: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub seed: u64,
    pub reduction: Reduction,
    /// Share of each `(class, SNR)` group used for training.
    pub train_fraction: f64,
    /// Multiply the learning rate by `lr_step_gamma` every this many epochs
    /// of a stage; 0 keeps it constant.
    pub lr_step_epochs: usize,
    pub lr_step_gamma: f64,
    /// Stop a stage after this many epochs without a test-accuracy
    /// improvement; 0 always runs the full budget.
    pub early_stop_patience: usize,
    /// Fill the report's `seconds` column; when off it is 0 so reports are
    /// reproducible byte for byte.
    pub record_wall_time: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            momentum: 0.9,
            weight_decay: 5e-4,
            epochs_stage1: 40,
            epochs_stage2: 5,
            batch_size: 128,
            center_lr: 1e-4,
            lambda: crate::loss::joint::DEFAULT_LAMBDA,
            alpha: crate::loss::joint::DEFAULT_ALPHA,
            seed: 0,
            reduction: Reduction::Mean,
            train_fraction: 0.8,
            lr_step_epochs: 0,
            lr_step_gamma: 0.1,
            early_stop_patience: 0,
            record_wall_time: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr = {} must be positive", self.lr));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum = {} is outside [0, 1)", self.momentum));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!("weight_decay = {} must be nonnegative", self.weight_decay));
        }
        if self.batch_size < 2 {
            return bad(format!("batch_size = {} must be at least 2", self.batch_size));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda = {} must be nonnegative", self.lambda));
        }
        if !(0.0..=1.0).contains(&self.alpha_effective()) {
            return bad(format!(
                "effective center rate alpha·center_lr/1e-4 = {} is outside [0, 1]",
                self.alpha_effective()
            ));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return bad(format!("train_fraction = {} is outside (0, 1]", self.train_fraction));
        }
        if !(self.lr_step_gamma > 0.0 && self.lr_step_gamma.is_finite()) {
            return bad(format!("lr_step_gamma = {} must be positive", self.lr_step_gamma));
        }
        Ok(())
    }

    pub fn alpha_effective(&self) -> f64 {
        self.alpha * (self.center_lr / CENTER_LR_REFERENCE)
    }

    /// Learning rate for the 0-based epoch within a stage.
    pub fn lr_at(&self, stage_epoch: usize) -> f64 {
        match self.lr_step_epochs {
            0 => self.lr,
            step => self.lr * self.lr_step_gamma.powi((stage_epoch / step) as i32),
        }
    }

    fn loss_config(&self, stage: Stage) -> LossConfig {
        LossConfig {
            lambda: if stage == Stage::S1 { self.lambda } else { 0.0 },
            reduction: self.reduction,
        }
    }
}

/// Network, centers and optimizer state of one training run.
#[derive(Clone, Debug)]
pub struct Trainer {
    pub net: MsNet<f32>,
    pub centers: Centers<f32>,
    pub optimizer: OptimizerState<f32>,
    config: TrainConfig,
    shuffle_rng: ChaCha8Rng,
    epochs_done: usize,
}

impl Trainer {
    /// Fresh network drawn from the run seed, zero centers.
    pub fn new(config: TrainConfig, net_config: MsNetConfig) -> Result<Self> {
        config.validate()?;
        let net = MsNet::init(net_config, &mut seeded_rng(config.seed, INIT_STREAM))?;
        let centers = Centers::new(
            net_config.num_classes,
            net_config.feature_dim,
            config.alpha_effective() as f32,
        )?;
        Self::from_parts(config, net, centers)
    }

    pub fn from_parts(config: TrainConfig, net: MsNet<f32>, centers: Centers<f32>) -> Result<Self> {
        config.validate()?;
        if centers.c.shape() != [net.config.num_classes, net.config.feature_dim] {
            return Err(Error::shape(
                "Trainer",
                format!("{}×{} centers", net.config.num_classes, net.config.feature_dim),
                format!("{:?}", centers.c.shape()),
            ));
        }
        Ok(Self {
            optimizer: OptimizerState::new(&net),
            shuffle_rng: seeded_rng(config.seed, SHUFFLE_STREAM),
            net,
            centers,
            config,
            epochs_done: 0,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    /// Runs up to `epochs` epochs of `stage`, calling `on_epoch` after each.
    pub fn train_stage(
        &mut self,
        stage: Stage,
        epochs: usize,
        train: &Dataset,
        test: Option<&Dataset>,
        on_epoch: &mut dyn FnMut(&EpochRecord),
    ) -> Result<Vec<EpochRecord>> {
        if epochs > 0 && train.len() < 2 {
            return Err(Error::InvalidArgument("training needs at least two frames".into()));
        }
        let loss_cfg = self.config.loss_config(stage);
        let mut records = Vec::with_capacity(epochs);
        let mut best = f64::NEG_INFINITY;
        let mut stale = 0;
        for stage_epoch in 0..epochs {
            let start = Instant::now();
            let epoch = self.epochs_done + 1;
            let sgd = SgdConfig {
                lr: self.config.lr_at(stage_epoch),
                momentum: self.config.momentum,
                weight_decay: self.config.weight_decay,
            };
            let per_sample = |loss: f64, m: usize| match loss_cfg.reduction {
                Reduction::Mean => loss * m as f64,
                Reduction::Sum => loss,
            };
            let (mut sum_softmax, mut sum_center) = (0.0, 0.0);
            let mut correct = 0usize;
            let batches = epoch_batches(train.len(), self.config.batch_size, &mut self.shuffle_rng);
            for (b, idx) in batches.iter().enumerate() {
                let diverged = || Error::Diverged {
                    stage: stage.to_string(),
                    epoch,
                    batch: b + 1,
                };
                let (x, labels) = train.batch(idx);
                let (fwd, cache) = self.net.forward(&x, Mode::Train)?;
                let loss = joint_loss(&fwd.logits, &fwd.features, &labels, &self.centers, &loss_cfg)?;
                if !loss.total.is_finite() {
                    return Err(diverged());
                }
                let grad_features = (loss_cfg.lambda > 0.0).then_some(&loss.grad_features);
                let grads = self.net.backward(&cache, grad_features, &loss.grad_logits)?;
                let mut finite = true;
                grads.visit("", &mut |_, g| finite &= g.all_finite());
                if !finite {
                    return Err(diverged());
                }
                if stage == Stage::S1 {
                    self.centers.update(&fwd.features, &labels)?;
                }
                sgd_step(&mut self.net, &grads, &mut self.optimizer, &sgd)?;

                let m = idx.len();
                sum_softmax += per_sample(f64::from(loss.softmax_loss), m);
                sum_center += per_sample(loss_cfg.lambda * f64::from(loss.center_loss), m);
                correct += crate::eval::argmax_rows(&fwd.logits)?
                    .iter()
                    .zip(&labels)
                    .filter(|(p, t)| p == t)
                    .count();
            }
            let test_acc = match test {
                Some(t) if !t.is_empty() => Some(accuracy(&self.net, t)?),
                _ => None,
            };
            let n = train.len() as f64;
            let record = EpochRecord {
                stage,
                epoch,
                loss_total: (sum_softmax + sum_center) / n,
                loss_softmax: sum_softmax / n,
                loss_center: sum_center / n,
                train_acc: correct as f64 / n,
                test_acc,
                seconds: if self.config.record_wall_time {
                    start.elapsed().as_secs_f64()
                } else {
                    0.0
                },
            };
            on_epoch(&record);
            records.push(record);
            self.epochs_done += 1;

            if let (Some(acc), patience @ 1..) = (test_acc, self.config.early_stop_patience) {
                if acc > best {
                    best = acc;
                    stale = 0;
                } else {
                    stale += 1;
                    if stale >= patience {
                        break;
                    }
                }
            }
        }
        Ok(records)
    }
}

/// Fraction of `ds` classified correctly.
pub fn accuracy(net: &MsNet<f32>, ds: &Dataset) -> Result<f64> {
    let pred = predict(net, ds)?;
    let correct = pred
        .iter()
        .zip(&ds.frames)
        .filter(|(&p, f)| p == f.class_id as usize)
        .count();
    Ok(correct as f64 / ds.len().max(1) as f64)
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub net: MsNet<f32>,
    pub centers: Centers<f32>,
    pub report: TrainReport,
}

/// S1 from a fresh network, then S2 from the S1 result with a cleared
/// momentum buffer. With `out_dir`, writes `ckpt_s1.bin`, `ckpt_s2.bin`
/// (only when S2 runs) and `train_report.csv`.
pub fn train_two_stage(
    train: &Dataset,
    test: Option<&Dataset>,
    config: &TrainConfig,
    out_dir: Option<&Path>,
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    let net_config = MsNetConfig {
        num_classes: train.num_classes(),
        ..Default::default()
    };
    let mut trainer = Trainer::new(config.clone(), net_config)?;
    let mut report = TrainReport::default();
    report
        .records
        .extend(trainer.train_stage(Stage::S1, config.epochs_stage1, train, test, on_epoch)?);
    if let Some(dir) = out_dir {
        save_checkpoint(dir.join(CKPT_S1), &trainer.net, Some(&trainer.centers.c))?;
    }
    if config.epochs_stage2 > 0 {
        trainer.optimizer.reset();
        report
            .records
            .extend(trainer.train_stage(Stage::S2, config.epochs_stage2, train, test, on_epoch)?);
        if let Some(dir) = out_dir {
            save_checkpoint(dir.join(CKPT_S2), &trainer.net, Some(&trainer.centers.c))?;
        }
    }
    if let Some(dir) = out_dir {
        let mut w = BufWriter::new(File::create(dir.join(REPORT_FILE))?);
        write_report_csv(&mut w, &report)?;
        std::io::Write::flush(&mut w)?;
    }
    Ok(TrainOutcome {
        net: trainer.net,
        centers: trainer.centers,
        report,
    })
}
