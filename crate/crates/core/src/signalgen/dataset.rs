use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::channel::add_awgn;
use super::frame::{to_iq_frame, IqFrame};
use super::modulate::{modulate, GFSK_SPAN_SYMBOLS};
use super::ModulationScheme;
use crate::error::{Error, Result};
use crate::nn::Tensor;

/// Parameters of a synthetic corpus.
#[derive(Clone, Debug, PartialEq)]
pub struct GenConfig {
    pub frames_per_class_per_snr: usize,
    pub snr_list: Vec<i16>,
    pub frame_len: usize,
    pub samples_per_symbol: usize,
    pub seed: u64,
    /// Schemes to generate, in output order.
    pub classes: Vec<ModulationScheme>,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            frames_per_class_per_snr: 1000,
            snr_list: (-6..=14).step_by(2).collect(),
            frame_len: 128,
            samples_per_symbol: 8,
            seed: 0,
            classes: ModulationScheme::ALL.to_vec(),
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.snr_list.is_empty() {
            return Err(Error::InvalidArgument("snr_list is empty".into()));
        }
        if self.classes.is_empty() {
            return Err(Error::InvalidArgument("no classes selected".into()));
        }
        if self.samples_per_symbol == 0 || self.frame_len == 0 {
            return Err(Error::InvalidArgument("frame_len and samples_per_symbol must be positive".into()));
        }
        if !self.frame_len.is_multiple_of(self.samples_per_symbol) {
            return Err(Error::InvalidArgument(format!(
                "frame_len {} is not divisible by samples_per_symbol {}",
                self.frame_len, self.samples_per_symbol
            )));
        }
        Ok(())
    }

    pub fn total_frames(&self) -> usize {
        self.classes.len() * self.snr_list.len() * self.frames_per_class_per_snr
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub frame_len: usize,
    pub class_names: Vec<String>,
    pub frames: Vec<IqFrame>,
}

impl Dataset {
    pub fn new(frame_len: usize, class_names: Vec<String>, frames: Vec<IqFrame>) -> Result<Self> {
        let ds = Self {
            frame_len,
            class_names,
            frames,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.class_names.len() > u8::MAX as usize {
            return Err(Error::InvalidArgument("more than 255 classes".into()));
        }
        for (i, f) in self.frames.iter().enumerate() {
            if f.len() != self.frame_len {
                return Err(Error::shape("Dataset", self.frame_len, format!("frame {i} of length {}", f.len())));
            }
            if f.class_id as usize >= self.class_names.len() {
                return Err(Error::LabelOutOfRange {
                    label: f.class_id as usize,
                    classes: self.class_names.len(),
                });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    /// New dataset holding the frames at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            frame_len: self.frame_len,
            class_names: self.class_names.clone(),
            frames: indices.iter().map(|&i| self.frames[i].clone()).collect(),
        }
    }

    /// Stacks the frames at `indices` into a `batch × 2 × frame_len` tensor with their labels.
    pub fn batch(&self, indices: &[usize]) -> (Tensor<f32>, Vec<usize>) {
        let mut data = Vec::with_capacity(indices.len() * 2 * self.frame_len);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            data.extend_from_slice(self.frames[i].as_slice());
            labels.push(self.frames[i].class_id as usize);
        }
        let t = Tensor::new(vec![indices.len(), 2, self.frame_len], data).expect("frames share frame_len");
        (t, labels)
    }

    /// Frame counts keyed by `(class_id, snr_db)`.
    pub fn counts(&self) -> std::collections::BTreeMap<(u8, i16), usize> {
        let mut m = std::collections::BTreeMap::new();
        for f in &self.frames {
            *m.entry((f.class_id, f.snr_db)).or_insert(0) += 1;
        }
        m
    }
}

/// Extra symbols generated on each side of the frame so filter transients
/// and timing offsets stay outside the window.
const GUARD_SYMBOLS: usize = GFSK_SPAN_SYMBOLS;

fn generate_frame(config: &GenConfig, scheme: ModulationScheme, snr_db: i16, index: u64) -> Result<IqFrame> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index);

    let sps = config.samples_per_symbol;
    let n_sym = config.frame_len / sps + 2 * GUARD_SYMBOLS + 1;
    let bits: Vec<u8> = (0..n_sym * scheme.bits_per_symbol())
        .map(|_| rng.random_range(0..2u8))
        .collect();
    let baseband = modulate(scheme, &bits, sps)?;

    let offset = GUARD_SYMBOLS * sps + rng.random_range(0..sps);
    let rotation = Complex64::from_polar(1.0, rng.random_range(0.0..2.0 * PI));
    let window: Vec<Complex64> = baseband[offset..offset + config.frame_len]
        .iter()
        .map(|&s| s * rotation)
        .collect();
    let noisy = add_awgn(&window, f64::from(snr_db), &mut rng)?;
    to_iq_frame(&noisy, scheme.class_id(), snr_db, config.frame_len)
}

/// Builds the corpus ordered by class, then SNR, then frame index.
///
/// Frame `i` draws from its own ChaCha stream `(seed, i)`, so the output is
/// a pure function of `config` whatever the thread count.
pub fn generate_dataset(config: &GenConfig) -> Result<Dataset> {
    config.validate()?;
    let per = config.frames_per_class_per_snr;
    let jobs: Vec<(ModulationScheme, i16)> = config
        .classes
        .iter()
        .flat_map(|&c| config.snr_list.iter().map(move |&s| (c, s)))
        .collect();
    let frames = (0..config.total_frames())
        .into_par_iter()
        .map(|i| {
            let (scheme, snr) = jobs[i / per];
            generate_frame(config, scheme, snr, i as u64)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(config.frame_len, ModulationScheme::class_names(), frames)
}
