//! Two-component PCA through the covariance matrix.
//!
//! The dominant eigenvector comes from repeated squaring of the normalized
//! covariance followed by plain power iteration; the second one from the
//! same procedure on the deflated matrix `C − λ₁v₁v₁ᵀ`.

use std::io::Write;

use super::features::{class_label, FeatureDump};
use crate::error::{Error, Result};
use crate::nn::Tensor;

const MAX_SQUARINGS: usize = 64;
const POLISH_ITERS: usize = 100;
/// A second eigenvalue below this fraction of the first counts as zero.
const DEGENERATE_RATIO: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// Unit principal axes, descending variance.
    pub components: [Vec<f64>; 2],
    /// Sample variance along each axis.
    pub variances: [f64; 2],
    /// `n × 2` projected coordinates.
    pub projection: Tensor<f64>,
}

fn frobenius(m: &[f64]) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn matmul_sym(a: &[f64], b: &[f64], d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for k in 0..d {
            let aik = a[i * d + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..d {
                out[i * d + j] += aik * b[k * d + j];
            }
        }
    }
    out
}

fn matvec(m: &[f64], v: &[f64]) -> Vec<f64> {
    m.chunks(v.len()).map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

fn remove_component(v: &mut [f64], u: &[f64]) {
    let p: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
    v.iter_mut().zip(u).for_each(|(a, b)| *a -= p * b);
}

/// Dominant eigenvector of a symmetric PSD matrix, kept orthogonal to `exclude`.
fn dominant(c: &[f64], d: usize, exclude: Option<&[f64]>) -> Option<Vec<f64>> {
    let scale = frobenius(c);
    if scale == 0.0 {
        return None;
    }
    let mut m: Vec<f64> = c.iter().map(|v| v / scale).collect();
    for _ in 0..MAX_SQUARINGS {
        let mut next = matmul_sym(&m, &m, d);
        let f = frobenius(&next);
        if f == 0.0 {
            break;
        }
        next.iter_mut().for_each(|v| *v /= f);
        let change = frobenius(&next.iter().zip(&m).map(|(a, b)| a - b).collect::<Vec<_>>());
        m = next;
        if change < 1e-15 {
            break;
        }
    }
    let col = (0..d)
        .max_by(|&a, &b| {
            let na: f64 = (0..d).map(|i| m[i * d + a].powi(2)).sum();
            let nb: f64 = (0..d).map(|i| m[i * d + b].powi(2)).sum();
            na.total_cmp(&nb).then(b.cmp(&a))
        })
        .expect("d > 0");
    let mut v: Vec<f64> = (0..d).map(|i| m[i * d + col]).collect();
    for _ in 0..POLISH_ITERS {
        if let Some(u) = exclude {
            remove_component(&mut v, u);
        }
        if normalize(&mut v) == 0.0 {
            return None;
        }
        let next = matvec(c, &v);
        if next.iter().all(|&x| x == 0.0) {
            break;
        }
        v = next;
    }
    if let Some(u) = exclude {
        remove_component(&mut v, u);
    }
    (normalize(&mut v) > 0.0).then_some(v)
}

/// Some unit vector orthogonal to `u`.
fn orthogonal_to(u: &[f64]) -> Vec<f64> {
    let j = (0..u.len())
        .min_by(|&a, &b| u[a].abs().total_cmp(&u[b].abs()))
        .expect("non-empty");
    let mut v = vec![0.0; u.len()];
    v[j] = 1.0;
    remove_component(&mut v, u);
    normalize(&mut v);
    v
}

/// Flips `v` so its largest-magnitude entry is positive.
fn fix_sign(v: &mut [f64]) {
    let mut k = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[k].abs() {
            k = i;
        }
    }
    if v[k] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn rayleigh(c: &[f64], v: &[f64]) -> f64 {
    matvec(c, v).iter().zip(v).map(|(a, b)| a * b).sum()
}

/// Projects `n × d` data (`n ≥ 3`, `d ≥ 2`) onto its two leading principal axes.
pub fn pca_2d(x: &Tensor<f64>) -> Result<Pca> {
    let (n, d) = x.dims2("pca_2d")?;
    if n < 3 || d < 2 {
        return Err(Error::InvalidArgument(format!("PCA needs at least 3 points in 2+ dimensions, got {n} × {d}")));
    }
    if !x.all_finite() {
        return Err(Error::InvalidArgument("PCA input contains non-finite values".into()));
    }
    let rows: Vec<&[f64]> = x.data().chunks(d).collect();
    if rows.iter().all(|r| *r == rows[0]) {
        return Err(Error::RankZero);
    }
    let mut mean = vec![0.0; d];
    for r in &rows {
        mean.iter_mut().zip(*r).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| r.iter().zip(&mean).map(|(v, m)| v - m).collect())
        .collect();
    let mut cov = vec![0.0; d * d];
    for r in &centered {
        for i in 0..d {
            for j in i..d {
                cov[i * d + j] += r[i] * r[j];
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let v = cov[i * d + j] / (n - 1) as f64;
            cov[i * d + j] = v;
            cov[j * d + i] = v;
        }
    }

    let mut v1 = dominant(&cov, d, None).ok_or(Error::RankZero)?;
    let l1 = rayleigh(&cov, &v1);
    let mut deflated = cov.clone();
    for i in 0..d {
        for j in 0..d {
            deflated[i * d + j] -= l1 * v1[i] * v1[j];
        }
    }
    let mut v2 = if frobenius(&deflated) <= DEGENERATE_RATIO * l1 {
        orthogonal_to(&v1)
    } else {
        dominant(&deflated, d, Some(&v1)).unwrap_or_else(|| orthogonal_to(&v1))
    };
    fix_sign(&mut v1);
    fix_sign(&mut v2);
    let l2 = rayleigh(&cov, &v2).max(0.0);

    let mut proj = Vec::with_capacity(2 * n);
    for r in &centered {
        for v in [&v1, &v2] {
            proj.push(r.iter().zip(v.iter()).map(|(a, b)| a * b).sum());
        }
    }
    Ok(Pca {
        mean,
        components: [v1, v2],
        variances: [l1, l2],
        projection: Tensor::new(vec![n, 2], proj)?,
    })
}

/// `class,snr,pc1,pc2` rows aligned with the dump.
pub fn write_pca_csv<W: Write>(w: W, dump: &FeatureDump, pca: &Pca) -> Result<()> {
    if pca.projection.shape()[0] != dump.len() {
        return Err(Error::shape("write_pca_csv", dump.len(), pca.projection.shape()[0]));
    }
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["class", "snr", "pc1", "pc2"])?;
    for ((p, &c), &s) in pca.projection.data().chunks(2).zip(&dump.class_ids).zip(&dump.snr_db) {
        out.write_record([class_label(&dump.class_names, c), s.to_string(), p[0].to_string(), p[1].to_string()])?;
    }
    out.flush()?;
    Ok(())
}
