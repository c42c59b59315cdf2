//! Baseband symbol mapping and pulse shaping.
//!
//! Linear schemes (PSK, PAM, QAM) use Gray-coded constellations normalized
//! to unit average symbol energy, held for `sps` samples per symbol
//! (rectangular pulse). CPFSK and GFSK are binary continuous-phase schemes
//! with modulation index 0.5 and a constant unit envelope; GFSK filters the
//! frequency pulse with a Gaussian of BT = 0.35 spanning 4 symbols.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::ModulationScheme;
use crate::error::{Error, Result};

pub const FSK_MOD_INDEX: f64 = 0.5;
pub const GFSK_BT: f64 = 0.35;
pub const GFSK_SPAN_SYMBOLS: usize = 4;

fn gray_to_binary(mut g: u32) -> u32 {
    let mut b = g;
    while g > 0 {
        g >>= 1;
        b ^= g;
    }
    b
}

fn bits_value(bits: &[u8]) -> u32 {
    bits.iter().fold(0, |acc, &b| (acc << 1) | u32::from(b & 1))
}

/// Gray-coded PAM level in `{−(M−1), …, M−1}` (unnormalized).
fn pam_level(bits: &[u8]) -> f64 {
    let m = 1u32 << bits.len();
    2.0 * gray_to_binary(bits_value(bits)) as f64 - (m - 1) as f64
}

/// Maps one symbol's worth of bits to a unit-energy constellation point.
pub fn map_symbol(scheme: ModulationScheme, bits: &[u8]) -> Result<Complex64> {
    use ModulationScheme::*;
    if bits.len() != scheme.bits_per_symbol() {
        return Err(Error::InvalidArgument(format!(
            "{scheme} takes {} bits per symbol, got {}",
            scheme.bits_per_symbol(),
            bits.len()
        )));
    }
    let point = match scheme {
        Bpsk | Cpfsk | Gfsk => Complex64::new(1.0 - 2.0 * f64::from(bits[0] & 1), 0.0),
        Qpsk => Complex64::new(1.0 - 2.0 * f64::from(bits[0] & 1), 1.0 - 2.0 * f64::from(bits[1] & 1))
            / 2f64.sqrt(),
        Psk8 => {
            let k = gray_to_binary(bits_value(bits)) as f64;
            Complex64::from_polar(1.0, 2.0 * PI * k / 8.0)
        }
        Pam4 => Complex64::new(pam_level(bits) / 5f64.sqrt(), 0.0),
        Qam16 => Complex64::new(pam_level(&bits[..2]), pam_level(&bits[2..])) / 10f64.sqrt(),
        Qam64 => Complex64::new(pam_level(&bits[..3]), pam_level(&bits[3..])) / 42f64.sqrt(),
    };
    Ok(point)
}

/// Unit-area Gaussian frequency-shaping filter for GFSK.
pub fn gaussian_taps(sps: usize) -> Vec<f64> {
    let sigma = 2f64.ln().sqrt() / (2.0 * PI * GFSK_BT);
    let half = (GFSK_SPAN_SYMBOLS * sps / 2) as isize;
    let taps: Vec<f64> = (-half..=half)
        .map(|n| {
            let t = n as f64 / sps as f64;
            (-t * t / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.into_iter().map(|v| v / sum).collect()
}

/// Continuous-phase FSK from a per-sample frequency trajectory in units of
/// the peak deviation; each full symbol of `±1` advances phase by `±π·h`.
fn cpm(freq: &[f64], sps: usize) -> Vec<Complex64> {
    let step = PI * FSK_MOD_INDEX / sps as f64;
    let mut phase = 0.0f64;
    freq.iter()
        .map(|&f| {
            let s = Complex64::from_polar(1.0, phase);
            phase = (phase + step * f).rem_euclid(2.0 * PI);
            s
        })
        .collect()
}

/// Modulates `bits` (values 0/1) at `sps` samples per symbol.
pub fn modulate(scheme: ModulationScheme, bits: &[u8], sps: usize) -> Result<Vec<Complex64>> {
    if sps == 0 {
        return Err(Error::InvalidArgument("samples per symbol must be at least 1".into()));
    }
    let bps = scheme.bits_per_symbol();
    if !bits.len().is_multiple_of(bps) {
        return Err(Error::InvalidArgument(format!(
            "{} bits is not a multiple of {bps} bits per symbol for {scheme}",
            bits.len()
        )));
    }
    let symbols = bits
        .chunks(bps)
        .map(|b| map_symbol(scheme, b))
        .collect::<Result<Vec<_>>>()?;
    let held: Vec<Complex64> = symbols
        .iter()
        .flat_map(|&s| std::iter::repeat_n(s, sps))
        .collect();

    Ok(match scheme {
        ModulationScheme::Cpfsk => cpm(&held.iter().map(|s| s.re).collect::<Vec<_>>(), sps),
        ModulationScheme::Gfsk => {
            let taps = gaussian_taps(sps);
            let half = taps.len() / 2;
            let n = held.len();
            let freq: Vec<f64> = (0..n)
                .map(|i| {
                    taps.iter()
                        .enumerate()
                        .filter_map(|(j, &t)| {
                            let idx = (i + half).checked_sub(j)?;
                            (idx < n).then(|| t * held[idx].re)
                        })
                        .sum()
                })
                .collect();
            cpm(&freq, sps)
        }
        _ => held,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_bits(n: usize, seed: u64) -> Vec<u8> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(0..2u8)).collect()
    }

    fn power(s: &[Complex64]) -> f64 {
        s.iter().map(|v| v.norm_sqr()).sum::<f64>() / s.len() as f64
    }

    #[test]
    fn bpsk_mapping() {
        let s = modulate(ModulationScheme::Bpsk, &[0, 1], 1).unwrap();
        assert_eq!(s, vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)]);
    }

    #[test]
    fn pam4_levels() {
        let r5 = 5f64.sqrt();
        let s = modulate(ModulationScheme::Pam4, &[0, 0, 0, 1, 1, 1, 1, 0], 1).unwrap();
        let re: Vec<f64> = s.iter().map(|c| c.re * r5).collect();
        let expected = [-3.0, -1.0, 1.0, 3.0];
        for (a, b) in re.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(s.iter().all(|c| c.im == 0.0));
        // mean of {1, 9} over the four levels, normalized
        assert!((power(&s) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gray_neighbours_differ_by_one_bit() {
        for bits in 1..=3u32 {
            let m = 1u32 << bits;
            let mut by_level: Vec<(i64, u32)> = (0..m)
                .map(|v| {
                    let b: Vec<u8> = (0..bits).rev().map(|i| ((v >> i) & 1) as u8).collect();
                    (pam_level(&b) as i64, v)
                })
                .collect();
            by_level.sort();
            for w in by_level.windows(2) {
                assert_eq!((w[0].1 ^ w[1].1).count_ones(), 1);
            }
        }
    }

    #[test]
    fn qpsk_sits_on_odd_multiples_of_quarter_pi() {
        let s = modulate(ModulationScheme::Qpsk, &[0, 0, 0, 1, 1, 1, 1, 0], 1).unwrap();
        for c in s {
            let a = c.arg() / (PI / 4.0);
            assert!(((a.abs() - 1.0).abs() < 1e-12) || ((a.abs() - 3.0).abs() < 1e-12));
            assert!((c.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn qam16_monte_carlo_power() {
        let bits = random_bits(4 * 100_000, 7);
        let s = modulate(ModulationScheme::Qam16, &bits, 1).unwrap();
        assert!((power(&s) - 1.0).abs() < 1e-2);
        // exact: all 16 points once
        let all: Vec<u8> = (0..16u8).flat_map(|v| (0..4).rev().map(move |i| (v >> i) & 1)).collect();
        assert!((power(&modulate(ModulationScheme::Qam16, &all, 1).unwrap()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn every_scheme_has_unit_power() {
        for (i, scheme) in ModulationScheme::ALL.iter().enumerate() {
            let n = 20_000 * scheme.bits_per_symbol();
            let s = modulate(*scheme, &random_bits(n, i as u64), 8).unwrap();
            assert_eq!(s.len(), 20_000 * 8);
            assert!((power(&s) - 1.0).abs() < 0.02, "{scheme}: {}", power(&s));
        }
    }

    #[test]
    fn fsk_is_constant_envelope_and_continuous() {
        for scheme in [ModulationScheme::Cpfsk, ModulationScheme::Gfsk] {
            let s = modulate(scheme, &random_bits(200, 11), 8).unwrap();
            let max_step = PI * FSK_MOD_INDEX / 8.0 + 1e-9;
            for w in s.windows(2) {
                assert!((w[0].norm() - 1.0).abs() < 1e-12);
                let dphi = (w[1] * w[0].conj()).arg();
                assert!(dphi.abs() <= max_step, "{scheme} jumps by {dphi}");
            }
        }
    }

    #[test]
    fn gaussian_taps_have_unit_area() {
        let t = gaussian_taps(8);
        assert_eq!(t.len(), 33);
        assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bit_count_must_fill_symbols() {
        assert!(modulate(ModulationScheme::Qam64, &[0; 7], 1).is_err());
        assert!(modulate(ModulationScheme::Psk8, &[0; 6], 0).is_err());
        assert!(modulate(ModulationScheme::Psk8, &[0; 6], 2).is_ok());
    }
}
