/// Binary indexed tree over nonnegative weights with prefix-sum inversion.
#[derive(Debug, Clone)]
pub struct FenwickTree {
    // 1-based; tree[0] unused
    tree: Vec<f64>,
    top_bit: usize,
}

impl FenwickTree {
    pub fn new(weights: &[f64]) -> Self {
        let n = weights.len();
        let mut tree = vec![0.0; n + 1];
        tree[1..].copy_from_slice(weights);
        for i in 1..=n {
            let j = i + (i & i.wrapping_neg());
            if j <= n {
                tree[j] += tree[i];
            }
        }
        let top_bit = if n == 0 { 0 } else { 1 << (usize::BITS - 1 - n.leading_zeros()) };
        FenwickTree { tree, top_bit }
    }

    pub fn len(&self) -> usize {
        self.tree.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Adds `delta` to weight `idx` (0-based).
    #[inline]
    pub fn add(&mut self, idx: usize, delta: f64) {
        let mut i = idx + 1;
        while i < self.tree.len() {
            self.tree[i] += delta;
            i += i & i.wrapping_neg();
        }
    }

    /// Sum of weights `0..end`.
    pub fn prefix_sum(&self, end: usize) -> f64 {
        let mut i = end.min(self.len());
        let mut sum = 0.0;
        while i > 0 {
            sum += self.tree[i];
            i &= i - 1;
        }
        sum
    }

    pub fn total(&self) -> f64 {
        self.prefix_sum(self.len())
    }

    /// Smallest 0-based index `i` whose inclusive prefix sum exceeds `target`.
    /// Returns `len()` if no prefix does (only possible through rounding).
    #[inline]
    pub fn find(&self, mut target: f64) -> usize {
        let mut pos = 0;
        let mut step = self.top_bit;
        while step > 0 {
            let next = pos + step;
            if next < self.tree.len() && self.tree[next] <= target {
                target -= self.tree[next];
                pos = next;
            }
            step >>= 1;
        }
        pos
    }
}
