use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::signalgen::Dataset;

/// Shuffles `0..n` and cuts it into batches of `batch_size`; the last batch
/// may be short. A trailing batch of one is merged into the previous batch
/// because train-mode batch norm needs at least two samples.
pub fn epoch_batches<R: Rng + ?Sized>(n: usize, batch_size: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut batches: Vec<Vec<usize>> = order.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect();
    if batches.len() > 1 && batches.last().is_some_and(|b| b.len() == 1) {
        let last = batches.pop().expect("non-empty");
        batches.last_mut().expect("non-empty").extend(last);
    }
    batches
}

/// ChaCha stream used for the train/test split.
pub const SPLIT_STREAM: u64 = 2;

/// Splits each `(class, SNR)` group independently, putting `round(fraction·n)`
/// randomly chosen frames into the training set. Both halves keep the
/// dataset's frame order.
pub fn split_dataset(ds: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!("train fraction {train_fraction} is outside (0, 1]")));
    }
    let mut groups: BTreeMap<(u8, i16), Vec<usize>> = BTreeMap::new();
    for (i, f) in ds.frames.iter().enumerate() {
        groups.entry((f.class_id, f.snr_db)).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(SPLIT_STREAM);
    let mut in_train = vec![false; ds.len()];
    for members in groups.values_mut() {
        members.shuffle(&mut rng);
        let k = (train_fraction * members.len() as f64).round() as usize;
        for &i in &members[..k] {
            in_train[i] = true;
        }
    }
    let (train, test): (Vec<usize>, Vec<usize>) = (0..ds.len()).partition(|&i| in_train[i]);
    Ok((ds.subset(&train), ds.subset(&test)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signalgen::{generate_dataset, GenConfig};
    use proptest::prelude::*;

    #[test]
    fn ten_by_four() {
        let b = epoch_batches(10, 4, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), vec![4, 4, 2]);
    }

    #[test]
    fn trailing_singleton_is_merged() {
        let b = epoch_batches(9, 4, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), vec![4, 5]);
    }

    #[test]
    fn same_seed_same_batches() {
        let a = epoch_batches(50, 8, &mut ChaCha8Rng::seed_from_u64(3));
        let b = epoch_batches(50, 8, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn batches_form_a_permutation(n in 0usize..300, m in 2usize..64, seed in any::<u64>()) {
            let b = epoch_batches(n, m, &mut ChaCha8Rng::seed_from_u64(seed));
            let mut all: Vec<usize> = b.iter().flatten().copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            prop_assert!(b.iter().all(|x| x.len() <= m + 1 && (x.len() >= 2 || n < 2)));
        }
    }

    #[test]
    fn stratified_split() {
        let cfg = GenConfig {
            frames_per_class_per_snr: 10,
            snr_list: vec![0, 10],
            frame_len: 16,
            ..Default::default()
        };
        let ds = generate_dataset(&cfg).unwrap();
        let (train, test) = split_dataset(&ds, 0.8, 1).unwrap();
        assert!(train.counts().values().all(|&c| c == 8));
        assert!(test.counts().values().all(|&c| c == 2));
        assert_eq!(train.len() + test.len(), ds.len());
        let mut seen: Vec<_> = train.frames.iter().chain(&test.frames).map(|f| f.as_slice().to_vec()).collect();
        seen.sort_by(|a, b| a.partial_cmp(b).unwrap());
        seen.dedup();
        assert_eq!(seen.len(), ds.len());
        assert_eq!(split_dataset(&ds, 0.8, 1).unwrap(), (train, test));
        assert!(split_dataset(&ds, 0.0, 1).is_err());
    }
}
