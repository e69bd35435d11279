/// Forward intermediates recorded during a batch, consumed by the backward
/// pass and cleared before the next batch.
#[derive(Debug, Clone)]
pub struct GradTape<E> {
    entries: Vec<E>,
}

impl<E> Default for GradTape<E> {
    fn default() -> Self {
        Self { entries: Vec::new() }
    }
}

impl<E> GradTape<E> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Self {
            entries: Vec::with_capacity(n),
        }
    }

    pub fn record(&mut self, entry: E) {
        self.entries.push(entry);
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[E] {
        &self.entries
    }
}
