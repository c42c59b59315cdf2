use std::io::Write;

use super::{infer_all, stack_rows};
use crate::error::{Error, Result};
use crate::nn::{MsNet, Tensor};
use crate::signalgen::Dataset;

/// Middle-layer feature vector of every frame with its tags.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureDump {
    pub class_names: Vec<String>,
    pub class_ids: Vec<u8>,
    pub snr_db: Vec<i16>,
    /// `frames × feature_dim`
    pub features: Tensor<f32>,
}

impl FeatureDump {
    pub fn len(&self) -> usize {
        self.class_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.class_ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.shape()[1]
    }

    /// Class ids present in the dump, ascending.
    pub fn present_classes(&self) -> Vec<u8> {
        let mut ids = self.class_ids.clone();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Dispersion over the classes present in the dump.
    pub fn dispersion(&self) -> Result<Dispersion> {
        intra_class_dispersion(self, &self.present_classes())
    }
}

pub fn export_features(net: &MsNet<f32>, ds: &Dataset) -> Result<FeatureDump> {
    let dim = net.config.feature_dim;
    let features = stack_rows(infer_all(net, ds)?.into_iter().map(|f| f.features), dim)?;
    Ok(FeatureDump {
        class_names: ds.class_names.clone(),
        class_ids: ds.frames.iter().map(|f| f.class_id).collect(),
        snr_db: ds.frames.iter().map(|f| f.snr_db).collect(),
        features: if ds.is_empty() { Tensor::zeros(&[0, dim]) } else { features },
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dispersion {
    /// `(class_id, mean distance to the class centroid)`
    pub per_class: Vec<(u8, f64)>,
    /// Unweighted mean over classes.
    pub mean: f64,
}

/// Mean Euclidean distance of each class's features to their centroid.
pub fn intra_class_dispersion(dump: &FeatureDump, classes: &[u8]) -> Result<Dispersion> {
    if classes.is_empty() {
        return Err(Error::InvalidArgument("no classes to measure".into()));
    }
    let d = dump.dim();
    let mut per_class = Vec::with_capacity(classes.len());
    for &c in classes {
        let rows: Vec<&[f32]> = dump
            .features
            .data()
            .chunks(d)
            .zip(&dump.class_ids)
            .filter(|(_, &id)| id == c)
            .map(|(r, _)| r)
            .collect();
        if rows.is_empty() {
            let name = dump.class_names.get(c as usize).cloned().unwrap_or_else(|| c.to_string());
            return Err(Error::EmptyClass(name));
        }
        let n = rows.len() as f64;
        let mut centroid = vec![0.0f64; d];
        for r in &rows {
            for (m, &v) in centroid.iter_mut().zip(*r) {
                *m += f64::from(v);
            }
        }
        centroid.iter_mut().for_each(|m| *m /= n);
        let total: f64 = rows
            .iter()
            .map(|r| {
                r.iter()
                    .zip(&centroid)
                    .map(|(&v, &m)| (f64::from(v) - m).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .sum();
        per_class.push((c, total / n));
    }
    let mean = per_class.iter().map(|(_, v)| v).sum::<f64>() / per_class.len() as f64;
    Ok(Dispersion { per_class, mean })
}

pub(crate) fn class_label(names: &[String], id: u8) -> String {
    names.get(id as usize).cloned().unwrap_or_else(|| id.to_string())
}

/// `class,snr,f0,...,f{d-1}`; the class column holds the class name.
pub fn write_features_csv<W: Write>(w: W, dump: &FeatureDump) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let d = dump.dim();
    let header: Vec<String> = ["class".to_string(), "snr".to_string()]
        .into_iter()
        .chain((0..d).map(|i| format!("f{i}")))
        .collect();
    out.write_record(&header)?;
    for ((row, &c), &s) in dump.features.data().chunks(d.max(1)).zip(&dump.class_ids).zip(&dump.snr_db) {
        let rec: Vec<String> = [class_label(&dump.class_names, c), s.to_string()]
            .into_iter()
            .chain(row.iter().map(f32::to_string))
            .collect();
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dump(ids: &[u8], values: &[f32], d: usize) -> FeatureDump {
        FeatureDump {
            class_names: vec!["A".into(), "B".into(), "C".into()],
            class_ids: ids.to_vec(),
            snr_db: vec![0; ids.len()],
            features: Tensor::new(vec![ids.len(), d], values.to_vec()).unwrap(),
        }
    }

    #[test]
    fn hand_example() {
        let dsp = dump(&[0, 0], &[0.0, 2.0], 1).dispersion().unwrap();
        assert_eq!(dsp.per_class, vec![(0, 1.0)]);
        assert_eq!(dsp.mean, 1.0);
    }

    #[test]
    fn identical_features_have_zero_dispersion() {
        let d = dump(&[1, 1, 0, 0], &[3.0, 4.0, 3.0, 4.0, 0.0, 0.0, 6.0, 8.0], 2).dispersion().unwrap();
        assert_eq!(d.per_class, vec![(0, 5.0), (1, 0.0)]);
        assert_eq!(d.mean, 2.5);
    }

    #[test]
    fn translation_invariant() {
        let vals = [0.5, -1.0, 2.0, 0.25, 3.0, 1.0, -2.0, 0.0];
        let a = dump(&[0, 1, 0, 1], &vals, 2).dispersion().unwrap();
        let shifted: Vec<f32> = vals.iter().map(|v| v + 10.0).collect();
        let b = dump(&[0, 1, 0, 1], &shifted, 2).dispersion().unwrap();
        assert!((a.mean - b.mean).abs() < 1e-5);
    }

    #[test]
    fn missing_class_is_named() {
        let err = intra_class_dispersion(&dump(&[0], &[1.0], 1), &[0, 2]).unwrap_err();
        assert!(matches!(&err, Error::EmptyClass(n) if n == "C"));
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_features_csv(&mut buf, &dump(&[2, 0], &[1.5, 0.0, -2.0, 0.25], 2)).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "class,snr,f0,f1\nC,0,1.5,0\nA,0,-2,0.25\n");
    }
}
