//! Learnable user/item positions, biases, the squared-Euclidean-distance
//! kernel with optional dimension dropout, and L2 norm clipping.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// User positions P (M x k) and item positions Q (N x k), stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    m: usize,
    n: usize,
    k: usize,
    p: Vec<f64>,
    q: Vec<f64>,
}

impl EmbeddingTable {
    /// Wrap existing row-major buffers. Lengths must be m*k and n*k.
    pub fn from_parts(m: usize, n: usize, k: usize, p: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        if p.len() != m * k {
            return Err(Error::Shape {
                what: "user positions",
                expected: m * k,
                got: p.len(),
            });
        }
        if q.len() != n * k {
            return Err(Error::Shape {
                what: "item positions",
                expected: n * k,
                got: q.len(),
            });
        }
        Ok(Self { m, n, k, p, q })
    }

    pub fn n_users(&self) -> usize {
        self.m
    }

    pub fn n_items(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn user_row(&self, u: usize) -> &[f64] {
        &self.p[u * self.k..(u + 1) * self.k]
    }

    pub fn item_row(&self, i: usize) -> &[f64] {
        &self.q[i * self.k..(i + 1) * self.k]
    }

    pub fn user_row_mut(&mut self, u: usize) -> &mut [f64] {
        &mut self.p[u * self.k..(u + 1) * self.k]
    }

    pub fn item_row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.q[i * self.k..(i + 1) * self.k]
    }

    /// Full user matrix, row-major.
    pub fn users_flat(&self) -> &[f64] {
        &self.p
    }

    /// Full item matrix, row-major.
    pub fn items_flat(&self) -> &[f64] {
        &self.q
    }
}

/// Per-user and per-item distance offsets plus the frozen global bias.
///
/// `mu` is the mean training distance (set once by the trainer) and `tau`
/// scales it at prediction time.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasTable {
    pub user: Vec<f64>,
    pub item: Vec<f64>,
    pub mu: f64,
    pub tau: f64,
}

/// Which dimensions a mini-batch keeps. Never drops all of them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DropoutMask {
    kept: Vec<bool>,
    keep_count: usize,
}

impl DropoutMask {
    /// The trivial mask that keeps every dimension.
    pub fn all_kept(k: usize) -> Self {
        Self {
            kept: vec![true; k],
            keep_count: k,
        }
    }

    pub fn k(&self) -> usize {
        self.kept.len()
    }

    pub fn keep_count(&self) -> usize {
        self.keep_count
    }

    pub fn kept(&self) -> &[bool] {
        &self.kept
    }

    /// Inverted-dropout factor k / keep_count applied to surviving dims.
    pub fn scale(&self) -> f64 {
        self.kept.len() as f64 / self.keep_count as f64
    }

    /// Per-dimension multipliers: scale() where kept, 0 where dropped.
    /// Shared by the loss and gradient paths so they round identically.
    pub fn scale_vector(&self) -> Vec<f64> {
        let s = self.scale();
        self.kept
            .iter()
            .map(|&keep| if keep { s } else { 0.0 })
            .collect()
    }
}

/// Draw fresh parameters, all entries i.i.d. Normal(0, std^2).
///
/// Draw order is fixed and documented: P row-major, then Q row-major, then
/// b_u, then b_i. Identical seeds give bitwise-identical tables.
pub fn init_params(
    m: usize,
    n: usize,
    k: usize,
    seed: u64,
    std: f64,
) -> Result<(EmbeddingTable, BiasTable)> {
    if m < 1 || n < 1 || k < 1 {
        return Err(Error::Config(format!(
            "m, n, k must all be >= 1 (got {m}, {n}, {k})"
        )));
    }
    if !std.is_finite() || std <= 0.0 {
        return Err(Error::Config(format!("init std must be > 0, got {std}")));
    }
    let normal =
        Normal::new(0.0, std).map_err(|e| Error::Config(format!("bad init distribution: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |len: usize| -> Vec<f64> { (0..len).map(|_| normal.sample(&mut rng)).collect() };
    let p = draw(m * k);
    let q = draw(n * k);
    let b_u = draw(m);
    let b_i = draw(n);
    let table = EmbeddingTable { m, n, k, p, q };
    let biases = BiasTable {
        user: b_u,
        item: b_i,
        mu: 0.0,
        tau: 0.0,
    };
    Ok((table, biases))
}

/// Unmasked squared distance, 8-lane unrolled so the compiler can vectorize
/// and pipeline the reduction. All unmasked distances in the crate go
/// through here, so they agree bitwise.
#[inline]
pub(crate) fn sq_dist_raw(p: &[f64], q: &[f64]) -> f64 {
    let mut acc = [0.0f64; 8];
    let pc = p.chunks_exact(8);
    let qc = q.chunks_exact(8);
    let pr = pc.remainder();
    let qr = qc.remainder();
    for (cp, cq) in pc.zip(qc) {
        for lane in 0..8 {
            let d = cp[lane] - cq[lane];
            acc[lane] += d * d;
        }
    }
    let mut tail = 0.0;
    for (a, b) in pr.iter().zip(qr.iter()) {
        let d = a - b;
        tail += d * d;
    }
    acc.iter().sum::<f64>() + tail
}

/// Scaled squared distance sum_j s_j * (p_j - q_j)^2; the masked-distance
/// kernel when `s` is a `DropoutMask::scale_vector`.
#[inline]
pub(crate) fn sq_dist_scaled(p: &[f64], q: &[f64], s: &[f64]) -> f64 {
    let mut acc = [0.0f64; 8];
    let pc = p.chunks_exact(8);
    let qc = q.chunks_exact(8);
    let sc = s.chunks_exact(8);
    let pr = pc.remainder();
    let qr = qc.remainder();
    let sr = sc.remainder();
    for ((cp, cq), cs) in pc.zip(qc).zip(sc) {
        for lane in 0..8 {
            let d = cp[lane] - cq[lane];
            acc[lane] += cs[lane] * (d * d);
        }
    }
    let mut tail = 0.0;
    for ((a, b), w) in pr.iter().zip(qr.iter()).zip(sr.iter()) {
        let d = a - b;
        tail += w * (d * d);
    }
    acc.iter().sum::<f64>() + tail
}

/// Squared Euclidean distance between two k-vectors.
///
/// Without a mask: sum_j (p_j - q_j)^2. With a mask: the surviving
/// dimensions are summed and rescaled by k / keep_count, which keeps the
/// expectation over masks equal to the unmasked distance.
pub fn squared_distance(p: &[f64], q: &[f64], mask: Option<&DropoutMask>) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Shape {
            what: "distance operands",
            expected: p.len(),
            got: q.len(),
        });
    }
    match mask {
        None => Ok(sq_dist_raw(p, q)),
        Some(m) => {
            if m.k() != p.len() {
                return Err(Error::Shape {
                    what: "dropout mask",
                    expected: p.len(),
                    got: m.k(),
                });
            }
            Ok(sq_dist_scaled(p, q, &m.scale_vector()))
        }
    }
}

/// Euclidean (unsquared) length of a vector.
pub fn l2_norm(v: &[f64]) -> f64 {
    let mut acc = [0.0f64; 8];
    let ch = v.chunks_exact(8);
    let rem = ch.remainder();
    for c in ch {
        for lane in 0..8 {
            acc[lane] += c[lane] * c[lane];
        }
    }
    let mut tail = 0.0;
    for a in rem {
        tail += a * a;
    }
    (acc.iter().sum::<f64>() + tail).sqrt()
}

/// Project `v` onto the L2 ball of radius `l`, in place.
///
/// Vectors already inside the ball are untouched; others are rescaled by
/// l / norm so the result sits on the boundary. Rescaling can leave the
/// recomputed norm a rounding error above `l`, so the scaling repeats until
/// the vector stops moving; this makes the projection exactly idempotent.
/// The origin is a fixed point.
pub fn clip_norm(v: &mut [f64], l: f64) {
    debug_assert!(l > 0.0, "clip radius must be positive");
    loop {
        let norm = l2_norm(v);
        if norm.is_nan() || norm <= l {
            return;
        }
        let scale = l / norm;
        let mut changed = false;
        for x in v.iter_mut() {
            let y = *x * scale;
            if y != *x {
                *x = y;
                changed = true;
            }
        }
        if !changed {
            return;
        }
    }
}

/// Sample a dropout mask: each dimension dropped independently with
/// probability `drop_rate`. A draw that would drop everything is resampled,
/// so at least one dimension always survives.
pub fn sample_mask<R: Rng>(k: usize, drop_rate: f64, rng: &mut R) -> Result<DropoutMask> {
    if k < 1 {
        return Err(Error::Config("mask dimension must be >= 1".into()));
    }
    if !(0.0..1.0).contains(&drop_rate) {
        return Err(Error::Config(format!(
            "drop_rate must be in [0, 1), got {drop_rate}"
        )));
    }
    if drop_rate == 0.0 {
        return Ok(DropoutMask::all_kept(k));
    }
    let mut kept = vec![true; k];
    loop {
        let mut keep_count = 0;
        for slot in kept.iter_mut() {
            let keep = !rng.gen_bool(drop_rate);
            *slot = keep;
            keep_count += keep as usize;
        }
        if keep_count > 0 {
            return Ok(DropoutMask { kept, keep_count });
        }
    }
}
