use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Mean `|s|²` over the sequence.
pub fn signal_power(signal: &[Complex64]) -> f64 {
    signal.iter().map(|s| s.norm_sqr()).sum::<f64>() / signal.len().max(1) as f64
}

/// Adds circularly-symmetric white Gaussian noise at `snr_db`, measured per
/// complex sample against the empirical power of `signal`. Noise variance is
/// split equally between I and Q. `snr_db = +∞` returns the input unchanged.
pub fn add_awgn<R: Rng + ?Sized>(signal: &[Complex64], snr_db: f64, rng: &mut R) -> Result<Vec<Complex64>> {
    if signal.is_empty() {
        return Err(Error::InvalidArgument("cannot add noise to an empty signal".into()));
    }
    if snr_db.is_nan() {
        return Err(Error::InvalidArgument("SNR is NaN".into()));
    }
    if snr_db == f64::INFINITY {
        return Ok(signal.to_vec());
    }
    let noise_var = signal_power(signal) / 10f64.powf(snr_db / 10.0);
    let sigma = (noise_var / 2.0).sqrt();
    Ok(signal
        .iter()
        .map(|&s| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            s + Complex64::new(re, im) * sigma
        })
        .collect())
}
