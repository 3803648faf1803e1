use std::collections::VecDeque;

use crate::{HarnessError, Result};

/// Fixed-capacity FIFO of key embeddings; the oldest rows are evicted first.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyQueue {
    capacity: usize,
    dim: usize,
    rows: VecDeque<Vec<f64>>,
}

impl KeyQueue {
    pub fn new(capacity: usize, dim: usize) -> Result<Self> {
        if capacity == 0 || dim == 0 {
            return Err(HarnessError::Config("queue capacity and dimension must be positive".into()));
        }
        Ok(Self { capacity, dim, rows: VecDeque::with_capacity(capacity) })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.rows.len() == self.capacity
    }

    /// Appends `rows` in order, evicting from the front past capacity.
    pub fn enqueue<'a>(&mut self, rows: impl IntoIterator<Item = &'a [f64]>) -> Result<()> {
        for r in rows {
            if r.len() != self.dim {
                return Err(HarnessError::Shape(format!("queue row has {} values, expected {}", r.len(), self.dim)));
            }
            if self.rows.len() == self.capacity {
                self.rows.pop_front();
            }
            self.rows.push_back(r.to_vec());
        }
        Ok(())
    }

    /// Rows from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.rows.iter().map(Vec::as_slice)
    }
}
