use std::collections::BTreeMap;

/// Time-ordered queue; equal times pop in insertion order.
#[derive(Clone, Debug)]
pub struct EventQueue<T> {
    items: BTreeMap<(u64, u64), T>,
    seq: u64,
}

impl<T> Default for EventQueue<T> {
    fn default() -> Self {
        Self { items: BTreeMap::new(), seq: 0 }
    }
}

impl<T> EventQueue<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, at_us: u64, item: T) {
        self.items.insert((at_us, self.seq), item);
        self.seq += 1;
    }

    pub fn pop(&mut self) -> Option<(u64, T)> {
        self.items.pop_first().map(|((t, _), item)| (t, item))
    }

    pub fn peek_time(&self) -> Option<u64> {
        self.items.keys().next().map(|(t, _)| *t)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}
