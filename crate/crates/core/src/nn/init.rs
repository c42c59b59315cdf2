use rand::Rng;

use super::tensor::{Real, Tensor};

/// Fills `t` from `U(-b, b)` with `b = sqrt(6 / fan_in)` (He/Kaiming, ReLU gain).
pub fn kaiming_uniform<T: Real, R: Rng + ?Sized>(t: &mut Tensor<T>, fan_in: usize, rng: &mut R) {
    let bound = (6.0 / fan_in.max(1) as f64).sqrt();
    for v in t.data_mut() {
        *v = T::from_f64_lossy(rng.random_range(-bound..bound));
    }
}
