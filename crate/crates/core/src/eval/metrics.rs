use std::collections::BTreeMap;
use std::io::Write;

use super::infer_all;
use crate::error::{Error, Result};
use crate::nn::{MsNet, Real, Tensor};
use crate::signalgen::Dataset;

/// Row-wise argmax; ties go to the lowest index.
pub fn argmax_rows<T: Real>(logits: &Tensor<T>) -> Result<Vec<usize>> {
    let (_, k) = logits.dims2("argmax_rows")?;
    if k == 0 {
        return Err(Error::InvalidArgument("argmax over zero classes".into()));
    }
    Ok(logits
        .data()
        .chunks(k)
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect())
}

/// Predicted class id per frame, using inference-mode batch norm.
pub fn predict(net: &MsNet<f32>, ds: &Dataset) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(ds.len());
    for f in infer_all(net, ds)? {
        out.extend(argmax_rows(&f.logits)?);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Metrics {
    pub class_names: Vec<String>,
    pub overall_accuracy: f64,
    /// `snr_db → (accuracy, frame count)`
    pub per_snr: BTreeMap<i16, (f64, usize)>,
    /// `K × K` counts, rows = true class, columns = predicted class.
    pub confusion: Vec<Vec<u64>>,
}

impl Metrics {
    /// Builds metrics from per-frame truth, SNR tag and prediction.
    pub fn from_predictions(
        class_names: Vec<String>,
        truth: &[usize],
        snr_db: &[i16],
        predicted: &[usize],
    ) -> Result<Self> {
        let n = truth.len();
        if n == 0 {
            return Err(Error::InvalidArgument("cannot evaluate an empty dataset".into()));
        }
        if snr_db.len() != n || predicted.len() != n {
            return Err(Error::shape("Metrics", n, format!("{} tags, {} predictions", snr_db.len(), predicted.len())));
        }
        let k = class_names.len();
        let mut confusion = vec![vec![0u64; k]; k];
        let mut buckets: BTreeMap<i16, (usize, usize)> = BTreeMap::new();
        let mut correct = 0usize;
        for ((&t, &p), &s) in truth.iter().zip(predicted).zip(snr_db) {
            if t >= k || p >= k {
                return Err(Error::LabelOutOfRange { label: t.max(p), classes: k });
            }
            confusion[t][p] += 1;
            let b = buckets.entry(s).or_default();
            b.1 += 1;
            if t == p {
                b.0 += 1;
                correct += 1;
            }
        }
        Ok(Self {
            class_names,
            overall_accuracy: correct as f64 / n as f64,
            per_snr: buckets
                .into_iter()
                .map(|(s, (c, total))| (s, (c as f64 / total as f64, total)))
                .collect(),
            confusion,
        })
    }

    pub fn total(&self) -> u64 {
        self.confusion.iter().flatten().sum()
    }
}

pub fn evaluate(net: &MsNet<f32>, ds: &Dataset) -> Result<Metrics> {
    let predicted = predict(net, ds)?;
    let truth: Vec<usize> = ds.frames.iter().map(|f| f.class_id as usize).collect();
    let snr: Vec<i16> = ds.frames.iter().map(|f| f.snr_db).collect();
    Metrics::from_predictions(ds.class_names.clone(), &truth, &snr, &predicted)
}

/// `snr_db,accuracy` per SNR, then an `overall` row.
pub fn write_metrics_csv<W: Write>(w: W, m: &Metrics) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["snr_db", "accuracy"])?;
    for (snr, (acc, _)) in &m.per_snr {
        out.write_record([snr.to_string(), acc.to_string()])?;
    }
    out.write_record(["overall".to_string(), m.overall_accuracy.to_string()])?;
    out.flush()?;
    Ok(())
}

/// Header `true\pred,<class names>`, then one row of counts per true class.
pub fn write_confusion_csv<W: Write>(w: W, m: &Metrics) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(std::iter::once("true\\pred").chain(m.class_names.iter().map(String::as_str)))?;
    for (name, row) in m.class_names.iter().zip(&m.confusion) {
        out.write_record(std::iter::once(name.clone()).chain(row.iter().map(u64::to_string)))?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|i| format!("c{i}")).collect()
    }

    #[test]
    fn argmax_ties_and_one_hot() {
        let t = Tensor::new(vec![3, 8], {
            let mut v = vec![0.0f32; 24];
            v[3] = 1.0;
            v[8 + 2] = 4.0;
            v[8 + 5] = 4.0;
            v
        })
        .unwrap();
        assert_eq!(argmax_rows(&t).unwrap(), vec![3, 2, 0]);
    }

    #[test]
    fn perfect_and_constant_predictors() {
        let truth = [0, 1, 2, 2, 1, 0, 2];
        let snr = [0, 0, 2, 2, 4, 4, 4];
        let m = Metrics::from_predictions(names(3), &truth, &snr, &truth).unwrap();
        assert_eq!(m.overall_accuracy, 1.0);
        for (i, row) in m.confusion.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                assert_eq!(c > 0, i == j);
            }
        }
        let m = Metrics::from_predictions(names(3), &truth, &snr, &[2; 7]).unwrap();
        assert_eq!(m.overall_accuracy, 3.0 / 7.0);
        assert_eq!(m.per_snr[&2], (1.0, 2));
        assert_eq!(m.per_snr[&0], (0.0, 2));
        assert_eq!(m.total(), 7);
    }

    #[test]
    fn empty_is_an_error() {
        assert!(Metrics::from_predictions(names(2), &[], &[], &[]).is_err());
    }

    #[test]
    fn csv_layout() {
        let m = Metrics::from_predictions(names(2), &[0, 1, 1], &[-2, -2, 6], &[0, 0, 1]).unwrap();
        let mut buf = Vec::new();
        write_metrics_csv(&mut buf, &m).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "snr_db,accuracy\n-2,0.5\n6,1\noverall,0.6666666666666666\n");
        let mut buf = Vec::new();
        write_confusion_csv(&mut buf, &m).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "true\\pred,c0,c1\nc0,1,0\nc1,1,1\n");
    }
}
