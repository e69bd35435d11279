use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::rng::Rng;

/// Mean training loss per epoch.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epoch_loss: Vec<f64>,
    /// Active neurons skipped at the `cos = 1` gradient singularity.
    #[serde(default)]
    pub degenerate_grads: u64,
    /// Encoder rows re-drawn after collapsing.
    #[serde(default)]
    pub resuscitated: u64,
}

impl TrainHistory {
    pub fn first(&self) -> Option<f64> {
        self.epoch_loss.first().copied()
    }

    pub fn last(&self) -> Option<f64> {
        self.epoch_loss.last().copied()
    }
}

/// Shuffled mini-batches over `0..n`. A trailing batch smaller than
/// `min_batch` is merged into the one before it.
pub(crate) fn shuffled_batches(n: usize, batch_size: usize, min_batch: usize, rng: &mut Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut batches: Vec<Vec<usize>> = order.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect();
    if batches.len() > 1 && batches.last().is_some_and(|b| b.len() < min_batch) {
        let tail = batches.pop().unwrap_or_default();
        if let Some(prev) = batches.last_mut() {
            prev.extend(tail);
        }
    }
    batches
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn batches_cover_everything_once() {
        let b = shuffled_batches(11, 4, 2, &mut seeded(0));
        let mut all: Vec<usize> = b.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..11).collect::<Vec<_>>());
        assert_eq!(b.len(), 3);
    }

    #[test]
    fn singleton_tail_is_merged() {
        let b = shuffled_batches(9, 4, 2, &mut seeded(1));
        assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), vec![4, 5]);
    }
}
