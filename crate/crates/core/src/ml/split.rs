use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::{ClassLabel, NUM_CLASSES};

use super::MlError;

/// Stratified train/test split over `labels`. Each class contributes
/// `round(n·train_fraction)` samples to the training side, clamped so both
/// sides get at least one. Returned index lists are sorted.
pub fn split(
    labels: &[ClassLabel],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), MlError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(MlError::BadFraction(train_fraction));
    }
    if labels.is_empty() {
        return Err(MlError::EmptyTraining);
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); NUM_CLASSES];
    for (i, l) in labels.iter().enumerate() {
        by_class[l.index()].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (c, mut members) in by_class.into_iter().enumerate() {
        match members.len() {
            0 => continue,
            1 => return Err(MlError::ClassTooSmall(ClassLabel::ALL[c])),
            n => {
                members.shuffle(&mut rng);
                let k = ((n as f64 * train_fraction).round() as usize).clamp(1, n - 1);
                train.extend_from_slice(&members[..k]);
                test.extend_from_slice(&members[k..]);
            }
        }
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}
