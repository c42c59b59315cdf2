use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use msnet::eval::{
    evaluate, export_features, pca_2d, write_confusion_csv, write_features_csv, write_metrics_csv, write_pca_csv,
    FeatureDump,
};
use msnet::nn::checkpoint::load_checkpoint;
use msnet::signalgen::{generate_dataset, load_dataset, save_dataset};
use msnet::train::{split_dataset, train_two_stage};
use msnet::{Dataset, MsNet};

use crate::config::RunConfig;

pub const METRICS_FILE: &str = "metrics.csv";
pub const CONFUSION_FILE: &str = "confusion.csv";
pub const FEATURES_FILE: &str = "features.csv";
pub const PCA_FILE: &str = "pca.csv";

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> msnet::Result<()>) -> Result<()> {
    let mut w = create(path)?;
    f(&mut w).with_context(|| format!("writing {}", path.display()))?;
    w.flush().with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn generate(cfg: &RunConfig) -> Result<()> {
    let gen = cfg.gen_config()?;
    let ds = generate_dataset(&gen)?;
    if let Some(dir) = cfg.dataset.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    save_dataset(&cfg.dataset, &ds).with_context(|| format!("writing {}", cfg.dataset.display()))?;
    for ((class, snr), n) in ds.counts() {
        println!("class={} snr_db={snr} frames={n}", ds.class_names[class as usize]);
    }
    println!("total_frames={}", ds.len());
    Ok(())
}

fn load(cfg: &RunConfig) -> Result<Dataset> {
    load_dataset(&cfg.dataset).with_context(|| format!("reading dataset {}", cfg.dataset.display()))
}

fn test_split(cfg: &RunConfig) -> Result<Dataset> {
    let t = cfg.train_config()?;
    Ok(split_dataset(&load(cfg)?, t.train_fraction, t.seed)?.1)
}

fn load_net(cfg: &RunConfig) -> Result<MsNet<f32>> {
    let path = cfg.checkpoint_path()?;
    Ok(load_checkpoint(&path)
        .with_context(|| format!("reading checkpoint {}", path.display()))?
        .net)
}

pub fn train(cfg: &RunConfig) -> Result<()> {
    let tc = cfg.train_config()?;
    let ds = load(cfg)?;
    let (train, test) = split_dataset(&ds, tc.train_fraction, tc.seed)?;
    fs::create_dir_all(&cfg.out_dir).with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    eprintln!("training on {} frames, testing on {}", train.len(), test.len());
    let out = train_two_stage(&train, Some(&test), &tc, Some(&cfg.out_dir), &mut |r| {
        let test_acc = r.test_acc.map(|a| format!("{a:.4}")).unwrap_or_else(|| "-".into());
        eprintln!(
            "{} epoch {:>3}: loss {:.4} (softmax {:.4}, center {:.4}) train_acc {:.4} test_acc {test_acc}",
            r.stage, r.epoch, r.loss_total, r.loss_softmax, r.loss_center, r.train_acc
        );
    })?;
    if let Some(acc) = out.report.records.last().and_then(|r| r.test_acc) {
        println!("final_test_accuracy={acc}");
    }
    Ok(())
}

pub fn eval(cfg: &RunConfig) -> Result<()> {
    let net = load_net(cfg)?;
    let m = evaluate(&net, &test_split(cfg)?)?;
    write_with(&cfg.out_dir.join(METRICS_FILE), |w| write_metrics_csv(w, &m))?;
    write_with(&cfg.out_dir.join(CONFUSION_FILE), |w| write_confusion_csv(w, &m))?;
    println!("overall_accuracy={}", m.overall_accuracy);
    Ok(())
}

fn features_of(cfg: &RunConfig) -> Result<FeatureDump> {
    let net = load_net(cfg)?;
    Ok(export_features(&net, &test_split(cfg)?)?)
}

pub fn features(cfg: &RunConfig) -> Result<()> {
    let dump = features_of(cfg)?;
    write_with(&cfg.out_dir.join(FEATURES_FILE), |w| write_features_csv(w, &dump))?;
    println!("frames={} dim={}", dump.len(), dump.dim());
    Ok(())
}

pub fn pca(cfg: &RunConfig) -> Result<()> {
    let dump = features_of(cfg)?;
    let p = pca_2d(&dump.features.cast())?;
    write_with(&cfg.out_dir.join(PCA_FILE), |w| write_pca_csv(w, &dump, &p))?;
    println!("explained_variance={},{}", p.variances[0], p.variances[1]);
    Ok(())
}
