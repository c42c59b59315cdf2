//! Run configuration: one flat JSON document, overridable from the command line.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use msnet::train::TrainConfig;
use msnet::{GenConfig, ModulationScheme, Reduction};
use serde::Deserialize;

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    // generation
    pub frames_per_class_per_snr: usize,
    pub snr_list: Vec<i16>,
    pub frame_len: usize,
    pub samples_per_symbol: usize,
    pub classes: Vec<String>,
    pub seed: u64,

    // training
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub epochs_stage1: usize,
    pub epochs_stage2: usize,
    pub batch_size: usize,
    pub center_lr: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub reduction: String,
    pub train_fraction: f64,
    pub lr_step_epochs: usize,
    pub lr_step_gamma: f64,
    pub early_stop_patience: usize,
    pub record_wall_time: bool,

    // paths
    pub dataset: PathBuf,
    pub out_dir: PathBuf,
    pub checkpoint: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let g = GenConfig::default();
        let t = TrainConfig::default();
        Self {
            frames_per_class_per_snr: g.frames_per_class_per_snr,
            snr_list: g.snr_list,
            frame_len: g.frame_len,
            samples_per_symbol: g.samples_per_symbol,
            classes: g.classes.iter().map(|c| c.name().to_string()).collect(),
            seed: g.seed,
            lr: t.lr,
            momentum: t.momentum,
            weight_decay: t.weight_decay,
            epochs_stage1: t.epochs_stage1,
            epochs_stage2: t.epochs_stage2,
            batch_size: t.batch_size,
            center_lr: t.center_lr,
            lambda: t.lambda,
            alpha: t.alpha,
            reduction: "mean".into(),
            train_fraction: t.train_fraction,
            lr_step_epochs: t.lr_step_epochs,
            lr_step_gamma: t.lr_step_gamma,
            early_stop_patience: t.early_stop_patience,
            record_wall_time: t.record_wall_time,
            dataset: PathBuf::from("dataset.iqds"),
            out_dir: PathBuf::from("out"),
            checkpoint: None,
        }
    }
}

/// Flags shared by every subcommand; each one overrides the config key of the same name.
#[derive(Args, Clone, Debug, Default)]
pub struct Overrides {
    /// JSON config file
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs_stage1: Option<usize>,
    #[arg(long)]
    pub epochs_stage2: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Comma-separated SNRs in dB, e.g. `-6,0,6`
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub snr_list: Option<Vec<i16>>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

/// Bad configuration content, as opposed to an unreadable file.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| ConfigError(format!("invalid config: {e}")).into())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn resolve(o: &Overrides) -> Result<Self> {
        let mut c = match &o.config {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        macro_rules! apply {
            ($($field:ident),*) => {$(
                if let Some(v) = &o.$field {
                    c.$field = v.clone();
                }
            )*};
        }
        apply!(seed, lambda, alpha, lr, epochs_stage1, epochs_stage2, batch_size, snr_list, out_dir, dataset);
        if o.checkpoint.is_some() {
            c.checkpoint = o.checkpoint.clone();
        }
        Ok(c)
    }

    pub fn gen_config(&self) -> Result<GenConfig> {
        let classes = self
            .classes
            .iter()
            .map(|name| name.parse::<ModulationScheme>().map_err(|e| ConfigError(e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        let g = GenConfig {
            frames_per_class_per_snr: self.frames_per_class_per_snr,
            snr_list: self.snr_list.clone(),
            frame_len: self.frame_len,
            samples_per_symbol: self.samples_per_symbol,
            seed: self.seed,
            classes,
        };
        g.validate().map_err(|e| ConfigError(e.to_string()))?;
        Ok(g)
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let reduction: Reduction = self.reduction.parse().map_err(|e: msnet::Error| ConfigError(e.to_string()))?;
        let t = TrainConfig {
            lr: self.lr,
            momentum: self.momentum,
            weight_decay: self.weight_decay,
            epochs_stage1: self.epochs_stage1,
            epochs_stage2: self.epochs_stage2,
            batch_size: self.batch_size,
            center_lr: self.center_lr,
            lambda: self.lambda,
            alpha: self.alpha,
            seed: self.seed,
            reduction,
            train_fraction: self.train_fraction,
            lr_step_epochs: self.lr_step_epochs,
            lr_step_gamma: self.lr_step_gamma,
            early_stop_patience: self.early_stop_patience,
            record_wall_time: self.record_wall_time,
        };
        t.validate().map_err(|e| ConfigError(e.to_string()))?;
        Ok(t)
    }

    /// Explicit checkpoint, else `ckpt_s2.bin` in the output directory if
    /// present, else `ckpt_s1.bin`.
    pub fn checkpoint_path(&self) -> Result<PathBuf> {
        if let Some(p) = &self.checkpoint {
            return Ok(p.clone());
        }
        for name in [msnet::train::CKPT_S2, msnet::train::CKPT_S1] {
            let p = self.out_dir.join(name);
            if p.exists() {
                return Ok(p);
            }
        }
        bail!(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("no checkpoint given and none found in {}", self.out_dir.display())
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        assert_eq!(RunConfig::parse("{}").unwrap(), RunConfig::default());
        let t = RunConfig::default().train_config().unwrap();
        assert_eq!(t, TrainConfig::default());
        assert_eq!(RunConfig::default().gen_config().unwrap(), GenConfig::default());
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::parse(r#"{"lamda": 0.1}"#).unwrap_err().to_string();
        assert!(err.contains("lamda"), "{err}");
    }

    #[test]
    fn flags_override_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        fs::write(&path, r#"{"seed": 3, "lambda": 0.5, "classes": ["bpsk", "QPSK"]}"#).unwrap();
        let o = Overrides {
            config: Some(path),
            lambda: Some(0.0),
            snr_list: Some(vec![-4, 2]),
            ..Default::default()
        };
        let c = RunConfig::resolve(&o).unwrap();
        assert_eq!((c.seed, c.lambda), (3, 0.0));
        assert_eq!(c.snr_list, vec![-4, 2]);
        assert_eq!(c.gen_config().unwrap().classes, vec![ModulationScheme::Bpsk, ModulationScheme::Qpsk]);
    }

    #[test]
    fn bad_values_are_config_errors() {
        let c = RunConfig { reduction: "median".into(), ..Default::default() };
        assert!(c.train_config().unwrap_err().is::<ConfigError>());
        let c = RunConfig { classes: vec!["OOK".into()], ..Default::default() };
        assert!(c.gen_config().unwrap_err().is::<ConfigError>());
    }
}
