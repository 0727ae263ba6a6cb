//! Implicit-feedback ranking via metric factorization.
//!
//! Observed interactions (R = 1) pull the user and item together toward
//! distance z; every unobserved pair (R = 0) pushes them apart toward
//! distance a, with a > z >= 0. Each epoch sweeps the full user x item
//! grid in shuffled mini-batches, weighting observed pairs by
//! c = 1 + alpha * R. There are no bias terms; position rows are norm
//! clipped after every batch. Recommendation is by ascending distance.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::accum::{add_pair_grads, add_pair_grads_scaled, RowGradBuf};
use crate::dataset::{Dataset, IdMap, Triplet};
use crate::embeddings::{
    clip_norm, init_params, sample_mask, sq_dist_raw, sq_dist_scaled, DropoutMask, EmbeddingTable,
};
use crate::error::{Error, Result};
use crate::optimizer::AdagradState;
use crate::rating::EpochStats;

/// Largest full grid the trainer will enumerate. Each cell costs four bytes
/// in the shuffle index, so this caps that buffer at 800 MB.
const MAX_GRID_CELLS: u64 = 200_000_000;

/// Hyperparameters for implicit ranking training.
#[derive(Debug, Clone)]
pub struct RankingConfig {
    pub k: usize,
    pub eta: f64,
    /// Confidence boost for observed pairs: c = 1 + alpha * R.
    pub alpha: f64,
    /// Target distance of unobserved pairs.
    pub a: f64,
    /// Target distance of observed pairs.
    pub z: f64,
    /// Max L2 norm of any position row.
    pub l: f64,
    pub drop_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub init_std: f64,
}

impl Default for RankingConfig {
    /// The FilmTrust benchmark settings.
    fn default() -> Self {
        Self {
            k: 200,
            eta: 0.05,
            alpha: 4.0,
            a: 2.25,
            z: 0.0,
            l: 1.0,
            drop_rate: 0.0,
            epochs: 30,
            batch_size: 3072,
            seed: 42,
            init_std: 0.01,
        }
    }
}

impl RankingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::Config("k must be >= 1".into()));
        }
        if !self.eta.is_finite() || self.eta <= 0.0 {
            return Err(Error::Config(format!("eta must be > 0, got {}", self.eta)));
        }
        if self.alpha < 0.0 {
            return Err(Error::Config(format!(
                "alpha must be >= 0, got {}",
                self.alpha
            )));
        }
        if self.z.is_nan() || self.a.is_nan() || self.z < 0.0 || self.a <= self.z {
            return Err(Error::Config(format!(
                "target distances need a > z >= 0, got a = {}, z = {}",
                self.a, self.z
            )));
        }
        if !self.l.is_finite() || self.l <= 0.0 {
            return Err(Error::Config(format!(
                "clip norm l must be > 0, got {}",
                self.l
            )));
        }
        if !(0.0..1.0).contains(&self.drop_rate) {
            return Err(Error::Config(format!(
                "drop_rate must be in [0, 1), got {}",
                self.drop_rate
            )));
        }
        if self.batch_size < 1 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if !self.init_std.is_finite() || self.init_std <= 0.0 {
            return Err(Error::Config(format!(
                "init_std must be > 0, got {}",
                self.init_std
            )));
        }
        Ok(())
    }
}

/// Target distance for implicit feedback: Y = a(1 - R) + zR, i.e. z for
/// observed pairs and a for unobserved ones. Exact for R in {0, 1}.
pub fn implicit_to_distance(r: f64, a: f64, z: f64) -> f64 {
    a * (1.0 - r) + z * r
}

/// Confidence weight c = 1 + alpha * R.
pub fn implicit_confidence(r: f64, alpha: f64) -> f64 {
    1.0 + alpha * r
}

/// Result of `train_ranking`.
#[derive(Debug, Clone)]
pub struct TrainedRankingModel {
    pub embeddings: EmbeddingTable,
    pub config: RankingConfig,
    pub users: IdMap,
    pub items: IdMap,
    /// Sorted training items per user, used to exclude seen items when
    /// recommending.
    pub train_positives: Vec<Vec<u32>>,
    pub history: Vec<EpochStats>,
}

impl TrainedRankingModel {
    /// Squared distance between a user and an item; lower means more
    /// preferred.
    pub fn distance(&self, u: usize, i: usize) -> Result<f64> {
        self.check_user(u)?;
        self.check_item(i)?;
        Ok(self.distance_unchecked(u, i))
    }

    /// `distance` without the index checks; panics if `u` or `i` is out
    /// of range.
    pub fn distance_unchecked(&self, u: usize, i: usize) -> f64 {
        sq_dist_raw(self.embeddings.user_row(u), self.embeddings.item_row(i))
    }

    /// Distances from one user to every item. Entry i equals
    /// `distance(u, i)` bitwise.
    pub fn score_user(&self, u: usize) -> Result<Vec<f64>> {
        self.check_user(u)?;
        let pu = self.embeddings.user_row(u);
        Ok((0..self.embeddings.n_items())
            .map(|i| sq_dist_raw(pu, self.embeddings.item_row(i)))
            .collect())
    }

    /// Top-n items for a user by ascending distance, ties broken by item
    /// index. With `exclude_train` the user's training items are filtered
    /// out first. Returns fewer than n entries when the candidate pool is
    /// smaller.
    pub fn recommend_top_n(
        &self,
        u: usize,
        n: usize,
        exclude_train: bool,
    ) -> Result<Vec<(u32, f64)>> {
        self.check_user(u)?;
        if n == 0 {
            return Err(Error::Config("recommendation count must be >= 1".into()));
        }
        let pu = self.embeddings.user_row(u);
        let seen: &[u32] = if exclude_train {
            &self.train_positives[u]
        } else {
            &[]
        };
        let mut ranked: Vec<(u32, f64)> = (0..self.embeddings.n_items() as u32)
            .filter(|i| seen.binary_search(i).is_err())
            .map(|i| (i, sq_dist_raw(pu, self.embeddings.item_row(i as usize))))
            .collect();
        ranked.sort_unstable_by(|l, r| l.1.total_cmp(&r.1).then_with(|| l.0.cmp(&r.0)));
        ranked.truncate(n);
        Ok(ranked)
    }

    /// Recommend by raw user id, returning raw item ids.
    pub fn recommend_by_raw(
        &self,
        user: &str,
        n: usize,
        exclude_train: bool,
    ) -> Result<Vec<(String, f64)>> {
        let u = self.users.index_of(user).ok_or_else(|| Error::UnknownId {
            kind: "user",
            id: user.to_owned(),
        })?;
        let ranked = self.recommend_top_n(u as usize, n, exclude_train)?;
        Ok(ranked
            .into_iter()
            .map(|(i, d)| (self.items.raw(i).to_owned(), d))
            .collect())
    }

    fn check_user(&self, u: usize) -> Result<()> {
        if u >= self.embeddings.n_users() {
            return Err(Error::IndexOutOfRange {
                kind: "user",
                index: u,
                size: self.embeddings.n_users(),
            });
        }
        Ok(())
    }

    fn check_item(&self, i: usize) -> Result<()> {
        if i >= self.embeddings.n_items() {
            return Err(Error::IndexOutOfRange {
                kind: "item",
                index: i,
                size: self.embeddings.n_items(),
            });
        }
        Ok(())
    }
}

struct BatchOut {
    loss: f64,
    sq_err: f64,
}

/// One pass over a batch of (user, item, R) pairs: loss and optionally
/// gradients of sum c * (Y - d)^2. The single source of truth for the
/// ranking objective; the public loss, the public gradients, and the
/// trainer all route through here.
fn ranking_batch(
    emb: &EmbeddingTable,
    batch: &[Triplet],
    a: f64,
    z: f64,
    alpha: f64,
    scale: Option<&[f64]>,
    mut grads: Option<(&mut RowGradBuf, &mut RowGradBuf)>,
) -> BatchOut {
    let mut loss = 0.0;
    let mut sq_err = 0.0;
    for t in batch {
        let pu = emb.user_row(t.user as usize);
        let qi = emb.item_row(t.item as usize);
        let d = match scale {
            Some(s) => sq_dist_scaled(pu, qi, s),
            None => sq_dist_raw(pu, qi),
        };
        let r = t.value;
        let y = a * (1.0 - r) + z * r;
        let c = 1.0 + alpha * r;
        let resid = d - y;
        loss += c * resid * resid;
        sq_err += resid * resid;
        if let Some((gp, gq)) = grads.as_mut() {
            let two_coef = 4.0 * c * resid;
            let gu = gp.row_mut(t.user);
            let gi = gq.row_mut(t.item);
            match scale {
                Some(s) => add_pair_grads_scaled(two_coef, pu, qi, s, gu, gi),
                None => add_pair_grads(two_coef, pu, qi, gu, gi),
            }
        }
    }
    BatchOut { loss, sq_err }
}

fn check_batch_inputs(
    emb: &EmbeddingTable,
    batch: &[Triplet],
    mask: Option<&DropoutMask>,
) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    if let Some(m) = mask {
        if m.k() != emb.k() {
            return Err(Error::Shape {
                what: "dropout mask",
                expected: emb.k(),
                got: m.k(),
            });
        }
    }
    for t in batch {
        if t.value != 0.0 && t.value != 1.0 {
            return Err(Error::Config(format!(
                "implicit feedback must be 0 or 1, got {} for pair ({}, {})",
                t.value, t.user, t.item
            )));
        }
    }
    Ok(())
}

/// Batch training loss at the given positions. Pair values are the implicit
/// labels R in {0, 1}.
pub fn ranking_loss(
    emb: &EmbeddingTable,
    batch: &[Triplet],
    config: &RankingConfig,
    mask: Option<&DropoutMask>,
) -> Result<f64> {
    check_batch_inputs(emb, batch, mask)?;
    let scale = mask.map(|m| m.scale_vector());
    let out = ranking_batch(
        emb,
        batch,
        config.a,
        config.z,
        config.alpha,
        scale.as_deref(),
        None,
    );
    Ok(out.loss)
}

/// Dense batch gradients; same layout as the position tensors.
#[derive(Debug, Clone)]
pub struct RankingGrads {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

/// Loss and analytic gradients of `ranking_loss` with respect to every
/// position. Shares its accumulation path with the trainer.
pub fn ranking_gradients(
    emb: &EmbeddingTable,
    batch: &[Triplet],
    config: &RankingConfig,
    mask: Option<&DropoutMask>,
) -> Result<(f64, RankingGrads)> {
    check_batch_inputs(emb, batch, mask)?;
    let (m, n, k) = (emb.n_users(), emb.n_items(), emb.k());
    let scale = mask.map(|ma| ma.scale_vector());
    let mut gp = RowGradBuf::new(m, k);
    let mut gq = RowGradBuf::new(n, k);
    let out = ranking_batch(
        emb,
        batch,
        config.a,
        config.z,
        config.alpha,
        scale.as_deref(),
        Some((&mut gp, &mut gq)),
    );
    let mut grads = RankingGrads {
        p: vec![0.0; m * k],
        q: vec![0.0; n * k],
    };
    gp.scatter_into(&mut grads.p);
    gq.scatter_into(&mut grads.q);
    Ok((out.loss, grads))
}

/// Bit-per-cell membership test over the user x item grid.
struct PositiveGrid {
    bits: Vec<u64>,
}

impl PositiveGrid {
    fn new(cells: usize) -> Self {
        Self {
            bits: vec![0u64; cells.div_ceil(64)],
        }
    }

    #[inline]
    fn set(&mut self, lin: usize) {
        self.bits[lin / 64] |= 1u64 << (lin % 64);
    }

    #[inline]
    fn get(&self, lin: usize) -> bool {
        self.bits[lin / 64] & (1u64 << (lin % 64)) != 0
    }
}

fn grid_guards(m: usize, n: usize) -> Result<()> {
    let cells = m as u64 * n as u64;
    if cells > MAX_GRID_CELLS || cells > u32::MAX as u64 {
        return Err(Error::Config(format!(
            "full-grid ranking over {m} users x {n} items ({cells} cells) exceeds the supported size"
        )));
    }
    Ok(())
}

fn build_grid(train: &Dataset) -> Result<PositiveGrid> {
    let n = train.n_items();
    let mut grid = PositiveGrid::new(train.n_users() * n);
    for t in &train.triplets {
        if t.value != 1.0 {
            return Err(Error::Config(format!(
                "ranking training expects binarized interactions (every value 1), got {} for pair ({}, {})",
                t.value, t.user, t.item
            )));
        }
        grid.set(t.user as usize * n + t.item as usize);
    }
    Ok(grid)
}

/// Total loss of one unmasked pass over the entire user x item grid, with
/// R = 1 exactly on the training pairs. Mini-batch losses over any
/// partition of the grid sum to this (up to summation order).
pub fn ranking_full_loss(
    emb: &EmbeddingTable,
    train: &Dataset,
    config: &RankingConfig,
) -> Result<f64> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if emb.n_users() != train.n_users() || emb.n_items() != train.n_items() {
        return Err(Error::Shape {
            what: "embedding rows",
            expected: train.n_users() + train.n_items(),
            got: emb.n_users() + emb.n_items(),
        });
    }
    grid_guards(train.n_users(), train.n_items())?;
    let grid = build_grid(train)?;
    let n = train.n_items();
    let mut loss = 0.0;
    for u in 0..train.n_users() {
        let pu = emb.user_row(u);
        for i in 0..n {
            let d = sq_dist_raw(pu, emb.item_row(i));
            let r = if grid.get(u * n + i) { 1.0 } else { 0.0 };
            let y = config.a * (1.0 - r) + config.z * r;
            let c = 1.0 + config.alpha * r;
            let resid = d - y;
            loss += c * resid * resid;
        }
    }
    Ok(loss)
}

/// Train on a binarized implicit dataset. Every epoch visits all M*N
/// user-item cells once, shuffled, in mini-batches; observed cells carry
/// label 1 and confidence 1 + alpha, the rest label 0. All randomness
/// derives from `config.seed`.
pub fn train_ranking(train: &Dataset, config: &RankingConfig) -> Result<TrainedRankingModel> {
    train_ranking_with(train, config, |_| {})
}

/// `train_ranking` with a per-epoch observer.
pub fn train_ranking_with(
    train: &Dataset,
    config: &RankingConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<TrainedRankingModel> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let m = train.n_users();
    let n = train.n_items();
    let k = config.k;
    grid_guards(m, n)?;
    let grid = build_grid(train)?;

    let (mut emb, _) = init_params(m, n, k, config.seed, config.init_std)?;
    let mut st_p = AdagradState::new(m * k, config.eta);
    let mut st_q = AdagradState::new(n * k, config.eta);
    let mut gp = RowGradBuf::new(m, k);
    let mut gq = RowGradBuf::new(n, k);

    let cells = m * n;
    let mut order: Vec<u32> = (0..cells as u32).collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    shuffle_rng.set_stream(1);
    let mut mask_rng = ChaCha8Rng::seed_from_u64(config.seed);
    mask_rng.set_stream(2);

    let n32 = n as u32;
    let mut batch_buf: Vec<Triplet> = Vec::with_capacity(config.batch_size.min(cells));
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        let mut epoch_sq = 0.0;
        for (batch_idx, chunk) in order.chunks(config.batch_size).enumerate() {
            batch_buf.clear();
            batch_buf.extend(chunk.iter().map(|&lin| Triplet {
                user: lin / n32,
                item: lin % n32,
                value: if grid.get(lin as usize) { 1.0 } else { 0.0 },
            }));
            let scale = if config.drop_rate > 0.0 {
                Some(sample_mask(k, config.drop_rate, &mut mask_rng)?.scale_vector())
            } else {
                None
            };
            let out = ranking_batch(
                &emb,
                &batch_buf,
                config.a,
                config.z,
                config.alpha,
                scale.as_deref(),
                Some((&mut gp, &mut gq)),
            );
            if !out.loss.is_finite() {
                return Err(Error::Numeric {
                    what: "ranking training loss".into(),
                    epoch,
                    batch: batch_idx,
                });
            }
            epoch_loss += out.loss;
            epoch_sq += out.sq_err;

            let located = |e: Error| match e {
                Error::Numeric { what, .. } => Error::Numeric {
                    what,
                    epoch,
                    batch: batch_idx,
                },
                other => other,
            };
            for (idx, &row) in gp.touched().iter().enumerate() {
                let r = row as usize;
                st_p.update_slice(
                    r * k,
                    emb.user_row_mut(r),
                    gp.grad_of(idx),
                    "user positions",
                )
                .map_err(located)?;
                clip_norm(emb.user_row_mut(r), config.l);
            }
            for (idx, &row) in gq.touched().iter().enumerate() {
                let r = row as usize;
                st_q.update_slice(
                    r * k,
                    emb.item_row_mut(r),
                    gq.grad_of(idx),
                    "item positions",
                )
                .map_err(located)?;
                clip_norm(emb.item_row_mut(r), config.l);
            }
            gp.clear();
            gq.clear();
        }
        let pairs = cells as f64;
        let stats = EpochStats {
            epoch,
            loss: epoch_loss / pairs,
            rmse_train: (epoch_sq / pairs).sqrt(),
        };
        on_epoch(&stats);
        history.push(stats);
    }

    Ok(TrainedRankingModel {
        embeddings: emb,
        config: config.clone(),
        users: train.users.clone(),
        items: train.items.clone(),
        train_positives: train.user_items(),
        history,
    })
}
