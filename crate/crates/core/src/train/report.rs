use std::fmt;
use std::io::Write;

use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stage {
    /// Joint softmax + center-loss training.
    S1,
    /// Softmax-only fine-tuning with frozen centers.
    S2,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::S1 => "S1",
            Stage::S2 => "S2",
        })
    }
}

/// Per-epoch training summary. Losses are per-sample means over the epoch;
/// `loss_center` is the weighted term `λ·L_C`, so
/// `loss_total = loss_softmax + loss_center`.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub stage: Stage,
    /// 1-based, counted across both stages.
    pub epoch: usize,
    pub loss_total: f64,
    pub loss_softmax: f64,
    pub loss_center: f64,
    pub train_acc: f64,
    pub test_acc: Option<f64>,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    pub records: Vec<EpochRecord>,
}

impl TrainReport {
    pub fn last(&self, stage: Stage) -> Option<&EpochRecord> {
        self.records.iter().rev().find(|r| r.stage == stage)
    }
}

pub const REPORT_HEADER: [&str; 8] = [
    "stage",
    "epoch",
    "loss_total",
    "loss_softmax",
    "loss_center",
    "train_acc",
    "test_acc",
    "seconds",
];

/// Writes the report; a missing test accuracy is an empty cell.
pub fn write_report_csv<W: Write>(w: W, report: &TrainReport) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(REPORT_HEADER)?;
    for r in &report.records {
        out.write_record([
            r.stage.to_string(),
            r.epoch.to_string(),
            r.loss_total.to_string(),
            r.loss_softmax.to_string(),
            r.loss_center.to_string(),
            r.train_acc.to_string(),
            r.test_acc.map(|a| a.to_string()).unwrap_or_default(),
            r.seconds.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let r = TrainReport {
            records: vec![EpochRecord {
                stage: Stage::S2,
                epoch: 3,
                loss_total: 1.5,
                loss_softmax: 1.25,
                loss_center: 0.25,
                train_acc: 0.5,
                test_acc: None,
                seconds: 0.0,
            }],
        };
        let mut buf = Vec::new();
        write_report_csv(&mut buf, &r).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "stage,epoch,loss_total,loss_softmax,loss_center,train_acc,test_acc,seconds\nS2,3,1.5,1.25,0.25,0.5,,0\n"
        );
    }
}
