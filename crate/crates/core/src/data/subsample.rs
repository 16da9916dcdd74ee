use rand::seq::SliceRandom;

use super::LabeledDataset;
use crate::error::{Error, Result};
use crate::seed;

/// Seeded draw of `n` sample indices without replacement, sorted ascending.
///
/// When `stratified`, each fine class gets `n·count/P` samples with the
/// remainder handed out by largest fractional part, so class proportions
/// are preserved to within one sample.
pub fn subsample_indices(
    data: &LabeledDataset,
    n: usize,
    seed_: u64,
    stratified: bool,
) -> Result<Vec<usize>> {
    let p = data.len();
    if n > p {
        return Err(Error::domain(format!(
            "cannot draw {n} samples from a dataset of {p}"
        )));
    }
    let mut rng = seed::rng(seed_);
    let mut picked = if stratified {
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); data.k()];
        for (i, &c) in data.fine_labels().iter().enumerate() {
            by_class[c].push(i);
        }
        let mut quota: Vec<usize> = by_class.iter().map(|m| n * m.len() / p).collect();
        let mut left = n - quota.iter().sum::<usize>();
        let mut order: Vec<usize> = (0..data.k()).collect();
        // Largest remainder first; ties go to the lower class index.
        order.sort_by_key(|&c| std::cmp::Reverse((n * by_class[c].len()) % p));
        for c in order.into_iter().cycle() {
            if left == 0 {
                break;
            }
            if quota[c] < by_class[c].len() {
                quota[c] += 1;
                left -= 1;
            }
        }
        let mut picked = Vec::with_capacity(n);
        for (members, q) in by_class.iter_mut().zip(quota) {
            members.shuffle(&mut rng);
            picked.extend_from_slice(&members[..q]);
        }
        picked
    } else {
        let mut all: Vec<usize> = (0..p).collect();
        all.shuffle(&mut rng);
        all.truncate(n);
        all
    };
    picked.sort_unstable();
    Ok(picked)
}

pub fn subsample(
    data: &LabeledDataset,
    n: usize,
    seed_: u64,
    stratified: bool,
) -> Result<LabeledDataset> {
    Ok(data.select(&subsample_indices(data, n, seed_, stratified)?))
}
