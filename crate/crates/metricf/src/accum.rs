//! Sparse per-row gradient accumulation for sum-then-apply mini-batches.

/// Accumulates gradients for the subset of rows a mini-batch touches.
///
/// Rows are registered on first touch; `clear` resets only the touched
/// entries, so reuse across batches costs O(rows touched), not O(all rows).
/// The result of accumulation is independent of pair order within a batch
/// up to floating-point associativity.
#[derive(Debug)]
pub(crate) struct RowGradBuf {
    k: usize,
    slot: Vec<u32>,
    touched: Vec<u32>,
    grads: Vec<f64>,
}

const UNTOUCHED: u32 = u32::MAX;

impl RowGradBuf {
    pub fn new(n_rows: usize, k: usize) -> Self {
        Self {
            k,
            slot: vec![UNTOUCHED; n_rows],
            touched: Vec::new(),
            grads: Vec::new(),
        }
    }

    /// Gradient slice for `row`, zero-initialized on first touch.
    #[inline]
    pub fn row_mut(&mut self, row: u32) -> &mut [f64] {
        let mut s = self.slot[row as usize];
        if s == UNTOUCHED {
            s = self.touched.len() as u32;
            self.slot[row as usize] = s;
            self.touched.push(row);
            self.grads.resize(self.grads.len() + self.k, 0.0);
        }
        let start = s as usize * self.k;
        &mut self.grads[start..start + self.k]
    }

    /// Rows touched this batch, in first-touch order.
    pub fn touched(&self) -> &[u32] {
        &self.touched
    }

    /// Gradient slice for the idx-th touched row.
    pub fn grad_of(&self, idx: usize) -> &[f64] {
        &self.grads[idx * self.k..(idx + 1) * self.k]
    }

    /// Add every accumulated gradient into a dense row-major tensor.
    pub fn scatter_into(&self, dense: &mut [f64]) {
        for (idx, &row) in self.touched.iter().enumerate() {
            let dst = &mut dense[row as usize * self.k..(row as usize + 1) * self.k];
            for (d, g) in dst.iter_mut().zip(self.grad_of(idx)) {
                *d += g;
            }
        }
    }

    /// Forget this batch; keeps allocated capacity.
    pub fn clear(&mut self) {
        for &row in &self.touched {
            self.slot[row as usize] = UNTOUCHED;
        }
        self.touched.clear();
        self.grads.clear();
    }
}

/// Accumulate the position gradients of one pair: for each dimension j,
/// `two_coef * (pu[j] - qi[j])` is added to the user row and subtracted
/// from the item row.
#[inline]
pub(crate) fn add_pair_grads(
    two_coef: f64,
    pu: &[f64],
    qi: &[f64],
    gu: &mut [f64],
    gi: &mut [f64],
) {
    let k = pu.len();
    let (qi, gu, gi) = (&qi[..k], &mut gu[..k], &mut gi[..k]);
    for j in 0..k {
        let d = two_coef * (pu[j] - qi[j]);
        gu[j] += d;
        gi[j] -= d;
    }
}

/// `add_pair_grads` with a per-dimension scale (dropout's inverted mask).
#[inline]
pub(crate) fn add_pair_grads_scaled(
    two_coef: f64,
    pu: &[f64],
    qi: &[f64],
    s: &[f64],
    gu: &mut [f64],
    gi: &mut [f64],
) {
    let k = pu.len();
    let (qi, s, gu, gi) = (&qi[..k], &s[..k], &mut gu[..k], &mut gi[..k]);
    for j in 0..k {
        let d = two_coef * s[j] * (pu[j] - qi[j]);
        gu[j] += d;
        gi[j] -= d;
    }
}
