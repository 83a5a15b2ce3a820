//! Fixed-capacity FIFO replay buffer.

use std::collections::VecDeque;

use rand::seq::index;
use rand::Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct ReplayBuffer<T> {
    capacity: usize,
    items: VecDeque<T>,
}

impl<T> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay buffer capacity must be > 0");
        Self {
            capacity,
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Append, evicting the oldest item when full.
    pub fn push(&mut self, item: T) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(item);
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.items.iter()
    }

    /// Up to `size` distinct items, uniformly without replacement.
    pub fn sample(&self, size: usize, rng: &mut (impl Rng + ?Sized)) -> Vec<&T> {
        let k = size.min(self.items.len());
        index::sample(rng, self.items.len(), k)
            .into_iter()
            .map(|i| &self.items[i])
            .collect()
    }
}

impl<T> Extend<T> for ReplayBuffer<T> {
    fn extend<I: IntoIterator<Item = T>>(&mut self, iter: I) {
        for x in iter {
            self.push(x);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    proptest! {
        #[test]
        fn evicts_oldest(cap in 1usize..50, extra in 0usize..50) {
            let mut b = ReplayBuffer::new(cap);
            b.extend(0..cap + extra);
            prop_assert_eq!(b.len(), cap);
            let kept: Vec<usize> = b.iter().copied().collect();
            let want: Vec<usize> = (extra..cap + extra).collect();
            prop_assert_eq!(kept, want);
        }

        #[test]
        fn samples_are_distinct(len in 1usize..60, size in 0usize..80, seed in any::<u64>()) {
            let mut b = ReplayBuffer::new(100);
            b.extend(0..len);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut s: Vec<usize> = b.sample(size, &mut rng).into_iter().copied().collect();
            prop_assert_eq!(s.len(), size.min(len));
            s.sort_unstable();
            s.dedup();
            prop_assert_eq!(s.len(), size.min(len));
        }
    }
}
