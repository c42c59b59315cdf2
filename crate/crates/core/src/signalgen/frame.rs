use num_complex::Complex64;

use crate::error::{Error, Result};

/// One labeled `2 × N` frame: in-phase row followed by quadrature row.
#[derive(Clone, Debug, PartialEq)]
pub struct IqFrame {
    pub class_id: u8,
    pub snr_db: i16,
    samples: Vec<f32>,
}

impl IqFrame {
    pub fn from_rows(class_id: u8, snr_db: i16, i_row: &[f32], q_row: &[f32]) -> Result<Self> {
        if i_row.len() != q_row.len() || i_row.is_empty() {
            return Err(Error::shape("IqFrame::from_rows", "two equal non-empty rows", format!(
                "{} and {}",
                i_row.len(),
                q_row.len()
            )));
        }
        if i_row.iter().chain(q_row).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("frame contains non-finite samples".into()));
        }
        let mut samples = Vec::with_capacity(2 * i_row.len());
        samples.extend_from_slice(i_row);
        samples.extend_from_slice(q_row);
        Ok(Self { class_id, snr_db, samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len() / 2
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn i_row(&self) -> &[f32] {
        &self.samples[..self.len()]
    }

    pub fn q_row(&self) -> &[f32] {
        &self.samples[self.len()..]
    }

    /// Both rows back to back, the layout of one `2 × N` network input.
    pub fn as_slice(&self) -> &[f32] {
        &self.samples
    }

    pub fn to_complex(&self) -> Vec<Complex64> {
        self.i_row()
            .iter()
            .zip(self.q_row())
            .map(|(&i, &q)| Complex64::new(f64::from(i), f64::from(q)))
            .collect()
    }
}

/// Splits a complex frame of exactly `frame_len` samples into I and Q rows.
pub fn to_iq_frame(signal: &[Complex64], class_id: u8, snr_db: i16, frame_len: usize) -> Result<IqFrame> {
    if signal.len() != frame_len {
        return Err(Error::shape("to_iq_frame", frame_len, signal.len()));
    }
    let i_row: Vec<f32> = signal.iter().map(|s| s.re as f32).collect();
    let q_row: Vec<f32> = signal.iter().map(|s| s.im as f32).collect();
    IqFrame::from_rows(class_id, snr_db, &i_row, &q_row)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_follow_definition() {
        let s = [Complex64::new(1.0, 2.0), Complex64::new(3.0, 4.0)];
        let f = to_iq_frame(&s, 1, 10, 2).unwrap();
        assert_eq!(f.i_row(), &[1.0, 3.0]);
        assert_eq!(f.q_row(), &[2.0, 4.0]);
        assert_eq!(f.to_complex(), s.to_vec());
    }

    #[test]
    fn real_signal_has_zero_quadrature() {
        let s: Vec<_> = (0..5).map(|i| Complex64::new(i as f64, 0.0)).collect();
        assert!(to_iq_frame(&s, 0, 0, 5).unwrap().q_row().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn length_mismatch() {
        let s = [Complex64::new(1.0, 0.0)];
        assert!(to_iq_frame(&s, 0, 0, 2).is_err());
        assert!(IqFrame::from_rows(0, 0, &[1.0], &[1.0, 2.0]).is_err());
        assert!(IqFrame::from_rows(0, 0, &[f32::NAN], &[1.0]).is_err());
    }

    #[test]
    fn from_rows_round_trip() {
        let f = IqFrame::from_rows(3, -4, &[0.5, -1.0], &[2.0, 0.25]).unwrap();
        let g = to_iq_frame(&f.to_complex(), 3, -4, 2).unwrap();
        assert_eq!(f, g);
    }
}
