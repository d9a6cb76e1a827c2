use crate::error::{invalid, Error, Result};

/// Complete binary tree of partial sums for `O(log N)` categorical sampling.
///
/// Node 1 is the root, node `c + i` the leaf of item `i` where `c` is the
/// power-of-two capacity. Unused leaves hold zero. Updates recompute every
/// ancestor from its two children, so internal nodes always equal the sum of
/// their children as evaluated in floating point.
#[derive(Debug, Clone)]
pub struct SumTree {
    len: usize,
    capacity: usize,
    nodes: Vec<f64>,
}

fn check_weight(w: f64) -> Result<()> {
    if w.is_finite() && w >= 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("weight {w} is not a finite nonnegative number")))
    }
}

impl SumTree {
    /// Builds the tree bottom-up in `O(N)`.
    pub fn build(weights: &[f64]) -> Result<Self> {
        if weights.is_empty() {
            return Err(invalid("sum tree needs at least one item"));
        }
        for &w in weights {
            check_weight(w)?;
        }
        let capacity = weights.len().next_power_of_two();
        let mut nodes = vec![0.0; 2 * capacity];
        nodes[capacity..capacity + weights.len()].copy_from_slice(weights);
        for i in (1..capacity).rev() {
            nodes[i] = nodes[2 * i] + nodes[2 * i + 1];
        }
        Ok(Self {
            len: weights.len(),
            capacity,
            nodes,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn total(&self) -> f64 {
        self.nodes[1]
    }

    pub fn get(&self, i: usize) -> f64 {
        self.nodes[self.capacity + i]
    }

    pub fn update(&mut self, i: usize, weight: f64) -> Result<()> {
        if i >= self.len {
            return Err(invalid(format!("index {i} out of range for {} items", self.len)));
        }
        check_weight(weight)?;
        let mut node = self.capacity + i;
        self.nodes[node] = weight;
        while node > 1 {
            node /= 2;
            self.nodes[node] = self.nodes[2 * node] + self.nodes[2 * node + 1];
        }
        Ok(())
    }

    /// The leaf `i` with `prefix(i-1) <= u * total < prefix(i)`.
    pub fn sample(&self, u: f64) -> Result<usize> {
        if !(0.0..1.0).contains(&u) {
            return Err(invalid(format!("u = {u} outside [0, 1)")));
        }
        let total = self.total();
        if total <= 0.0 {
            return Err(Error::EmptyDistribution);
        }
        let mut target = u * total;
        let mut node = 1;
        while node < self.capacity {
            let left = 2 * node;
            if target < self.nodes[left] {
                node = left;
            } else {
                target -= self.nodes[left];
                node = left + 1;
            }
        }
        let mut leaf = node - self.capacity;
        // rounding can push the descent past the last positive leaf
        while leaf > 0 && (leaf >= self.len || self.get(leaf) == 0.0) {
            leaf -= 1;
        }
        Ok(leaf)
    }

    /// Checks the parent-sum invariant with a relative tolerance.
    pub fn is_consistent(&self, rel_tol: f64) -> bool {
        (1..self.capacity).all(|i| {
            let sum = self.nodes[2 * i] + self.nodes[2 * i + 1];
            (self.nodes[i] - sum).abs() <= rel_tol * sum.abs().max(f64::MIN_POSITIVE)
        })
    }
}
