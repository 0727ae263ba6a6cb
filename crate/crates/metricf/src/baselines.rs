//! Reference models the factorization is compared against: per-entity
//! rating averages, raw popularity ranking, and a biased inner-product
//! factorization trained with the same optimizer.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::accum::RowGradBuf;
use crate::dataset::{Dataset, IdMap, Triplet};
use crate::embeddings::{init_params, EmbeddingTable};
use crate::error::{Error, Result};
use crate::optimizer::AdagradState;
use crate::rating::EpochStats;

/// Which entity an `AverageModel` averages over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AverageKind {
    User,
    Item,
}

/// Predicts every pair as the mean training rating of its user (or item),
/// falling back to the global mean for entities with no training ratings.
#[derive(Debug, Clone)]
pub struct AverageModel {
    pub kind: AverageKind,
    /// One mean per user or per item, fallback already applied.
    pub means: Vec<f64>,
    pub global: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub users: IdMap,
    pub items: IdMap,
}

pub fn train_average(train: &Dataset, kind: AverageKind) -> Result<AverageModel> {
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let global = train.mean_value();
    let len = match kind {
        AverageKind::User => train.n_users(),
        AverageKind::Item => train.n_items(),
    };
    let mut sums = vec![0.0; len];
    let mut counts = vec![0u32; len];
    for t in &train.triplets {
        let idx = match kind {
            AverageKind::User => t.user as usize,
            AverageKind::Item => t.item as usize,
        };
        sums[idx] += t.value;
        counts[idx] += 1;
    }
    let means = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &c)| if c > 0 { s / c as f64 } else { global })
        .collect();
    Ok(AverageModel {
        kind,
        means,
        global,
        r_min: train.r_min,
        r_max: train.r_max,
        users: train.users.clone(),
        items: train.items.clone(),
    })
}

impl AverageModel {
    pub fn predict(&self, u: usize, i: usize) -> Result<f64> {
        let (kind, idx, size) = match self.kind {
            AverageKind::User => ("user", u, self.means.len()),
            AverageKind::Item => ("item", i, self.means.len()),
        };
        if idx >= size {
            return Err(Error::IndexOutOfRange {
                kind,
                index: idx,
                size,
            });
        }
        Ok(self.predict_unchecked(u, i))
    }

    /// `predict` without the index check; panics if the index is out of
    /// range.
    pub fn predict_unchecked(&self, u: usize, i: usize) -> f64 {
        match self.kind {
            AverageKind::User => self.means[u],
            AverageKind::Item => self.means[i],
        }
    }
}

/// Ranks items by raw training popularity, identically for every user.
#[derive(Debug, Clone)]
pub struct PopModel {
    /// Training interaction count per item.
    pub counts: Vec<u32>,
    pub users: IdMap,
    pub items: IdMap,
    pub train_positives: Vec<Vec<u32>>,
}

pub fn train_pop(train: &Dataset) -> Result<PopModel> {
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let mut counts = vec![0u32; train.n_items()];
    for t in &train.triplets {
        counts[t.item as usize] += 1;
    }
    Ok(PopModel {
        counts,
        users: train.users.clone(),
        items: train.items.clone(),
        train_positives: train.user_items(),
    })
}

impl PopModel {
    /// Ranking score; lower is better, so this is the negated count.
    pub fn score_unchecked(&self, i: usize) -> f64 {
        -(self.counts[i] as f64)
    }

    /// Most popular items first, ties by item index; same order for every
    /// user apart from the exclusion of that user's training items.
    pub fn recommend_top_n(
        &self,
        u: usize,
        n: usize,
        exclude_train: bool,
    ) -> Result<Vec<(u32, f64)>> {
        if u >= self.train_positives.len() {
            return Err(Error::IndexOutOfRange {
                kind: "user",
                index: u,
                size: self.train_positives.len(),
            });
        }
        if n == 0 {
            return Err(Error::Config("recommendation count must be >= 1".into()));
        }
        let seen: &[u32] = if exclude_train {
            &self.train_positives[u]
        } else {
            &[]
        };
        let mut ranked: Vec<(u32, f64)> = (0..self.counts.len() as u32)
            .filter(|i| seen.binary_search(i).is_err())
            .map(|i| (i, self.score_unchecked(i as usize)))
            .collect();
        ranked.sort_unstable_by(|l, r| l.1.total_cmp(&r.1).then_with(|| l.0.cmp(&r.0)));
        ranked.truncate(n);
        Ok(ranked)
    }
}

/// Hyperparameters for the biased inner-product baseline.
#[derive(Debug, Clone)]
pub struct SvdConfig {
    pub k: usize,
    pub eta: f64,
    pub lambda: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub init_std: f64,
}

impl Default for SvdConfig {
    fn default() -> Self {
        Self {
            k: 100,
            eta: 0.05,
            lambda: 0.05,
            epochs: 30,
            batch_size: 256,
            seed: 42,
            init_std: 0.01,
        }
    }
}

impl SvdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::Config("k must be >= 1".into()));
        }
        if !self.eta.is_finite() || self.eta <= 0.0 {
            return Err(Error::Config(format!("eta must be > 0, got {}", self.eta)));
        }
        if self.lambda < 0.0 {
            return Err(Error::Config(format!(
                "lambda must be >= 0, got {}",
                self.lambda
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

/// Biased inner-product factorization:
/// r_hat = global + b_u + b_i + p_u . q_i, L2-regularized, trained with the
/// same mini-batch Adagrad loop as the metric models.
#[derive(Debug, Clone)]
pub struct TrainedSvdModel {
    pub embeddings: EmbeddingTable,
    pub b_u: Vec<f64>,
    pub b_i: Vec<f64>,
    pub global: f64,
    pub config: SvdConfig,
    pub r_min: f64,
    pub r_max: f64,
    pub users: IdMap,
    pub items: IdMap,
    pub history: Vec<EpochStats>,
}

impl TrainedSvdModel {
    pub fn predict(&self, u: usize, i: usize) -> Result<f64> {
        if u >= self.embeddings.n_users() {
            return Err(Error::IndexOutOfRange {
                kind: "user",
                index: u,
                size: self.embeddings.n_users(),
            });
        }
        if i >= self.embeddings.n_items() {
            return Err(Error::IndexOutOfRange {
                kind: "item",
                index: i,
                size: self.embeddings.n_items(),
            });
        }
        Ok(self.predict_unchecked(u, i))
    }

    /// `predict` without the index check; panics if `u` or `i` is out of
    /// range.
    pub fn predict_unchecked(&self, u: usize, i: usize) -> f64 {
        let raw = self.global
            + self.b_u[u]
            + self.b_i[i]
            + dot(self.embeddings.user_row(u), self.embeddings.item_row(i));
        raw.clamp(self.r_min, self.r_max)
    }
}

/// Inner product, 8-lane unrolled like the distance kernel so reductions
/// pipeline; fixed summation order keeps results reproducible.
fn dot(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    let k = p.len();
    let q = &q[..k];
    let mut acc = [0.0f64; 8];
    let chunks = k / 8;
    for c in 0..chunks {
        let base = c * 8;
        for lane in 0..8 {
            acc[lane] += p[base + lane] * q[base + lane];
        }
    }
    let mut tail = 0.0;
    for j in chunks * 8..k {
        tail += p[j] * q[j];
    }
    (((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]))) + tail
}

struct BatchOut {
    loss: f64,
    sq_err: f64,
}

/// Batch objective sum (r_hat - r)^2 + lambda(|p_u|^2 + |q_i|^2 + b_u^2 + b_i^2),
/// summed per pair. Single source of truth for loss, gradients, and the
/// trainer.
fn svd_batch(
    emb: &EmbeddingTable,
    b_u: &[f64],
    b_i: &[f64],
    global: f64,
    batch: &[Triplet],
    lambda: f64,
    mut grads: Option<(
        &mut RowGradBuf,
        &mut RowGradBuf,
        &mut RowGradBuf,
        &mut RowGradBuf,
    )>,
) -> BatchOut {
    let mut loss = 0.0;
    let mut sq_err = 0.0;
    for t in batch {
        let u = t.user as usize;
        let i = t.item as usize;
        let pu = emb.user_row(u);
        let qi = emb.item_row(i);
        let resid = global + b_u[u] + b_i[i] + dot(pu, qi) - t.value;
        loss += resid * resid
            + lambda * (dot(pu, pu) + dot(qi, qi) + b_u[u] * b_u[u] + b_i[i] * b_i[i]);
        sq_err += resid * resid;
        if let Some((gp, gq, gbu, gbi)) = grads.as_mut() {
            let coef = 2.0 * resid;
            let two_lambda = 2.0 * lambda;
            let gu = gp.row_mut(t.user);
            let gi = gq.row_mut(t.item);
            let k = pu.len();
            let (qi, gu, gi) = (&qi[..k], &mut gu[..k], &mut gi[..k]);
            for j in 0..k {
                gu[j] += coef * qi[j] + two_lambda * pu[j];
                gi[j] += coef * pu[j] + two_lambda * qi[j];
            }
            gbu.row_mut(t.user)[0] += coef + two_lambda * b_u[u];
            gbi.row_mut(t.item)[0] += coef + two_lambda * b_i[i];
        }
    }
    BatchOut { loss, sq_err }
}

fn check_batch_inputs(
    emb: &EmbeddingTable,
    b_u: &[f64],
    b_i: &[f64],
    batch: &[Triplet],
) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    if b_u.len() != emb.n_users() {
        return Err(Error::Shape {
            what: "user biases",
            expected: emb.n_users(),
            got: b_u.len(),
        });
    }
    if b_i.len() != emb.n_items() {
        return Err(Error::Shape {
            what: "item biases",
            expected: emb.n_items(),
            got: b_i.len(),
        });
    }
    Ok(())
}

/// Batch training loss of the inner-product baseline.
pub fn svd_loss(
    emb: &EmbeddingTable,
    b_u: &[f64],
    b_i: &[f64],
    global: f64,
    batch: &[Triplet],
    config: &SvdConfig,
) -> Result<f64> {
    check_batch_inputs(emb, b_u, b_i, batch)?;
    Ok(svd_batch(emb, b_u, b_i, global, batch, config.lambda, None).loss)
}

/// Dense batch gradients of `svd_loss`.
#[derive(Debug, Clone)]
pub struct SvdGrads {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub b_u: Vec<f64>,
    pub b_i: Vec<f64>,
}

pub fn svd_gradients(
    emb: &EmbeddingTable,
    b_u: &[f64],
    b_i: &[f64],
    global: f64,
    batch: &[Triplet],
    config: &SvdConfig,
) -> Result<(f64, SvdGrads)> {
    check_batch_inputs(emb, b_u, b_i, batch)?;
    let (m, n, k) = (emb.n_users(), emb.n_items(), emb.k());
    let mut gp = RowGradBuf::new(m, k);
    let mut gq = RowGradBuf::new(n, k);
    let mut gbu = RowGradBuf::new(m, 1);
    let mut gbi = RowGradBuf::new(n, 1);
    let out = svd_batch(
        emb,
        b_u,
        b_i,
        global,
        batch,
        config.lambda,
        Some((&mut gp, &mut gq, &mut gbu, &mut gbi)),
    );
    let mut grads = SvdGrads {
        p: vec![0.0; m * k],
        q: vec![0.0; n * k],
        b_u: vec![0.0; m],
        b_i: vec![0.0; n],
    };
    gp.scatter_into(&mut grads.p);
    gq.scatter_into(&mut grads.q);
    gbu.scatter_into(&mut grads.b_u);
    gbi.scatter_into(&mut grads.b_i);
    Ok((out.loss, grads))
}

pub fn train_svd(train: &Dataset, config: &SvdConfig) -> Result<TrainedSvdModel> {
    train_svd_with(train, config, |_| {})
}

pub fn train_svd_with(
    train: &Dataset,
    config: &SvdConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<TrainedSvdModel> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let m = train.n_users();
    let n = train.n_items();
    let k = config.k;
    let (mut emb, _) = init_params(m, n, k, config.seed, config.init_std)?;
    let mut b_u = vec![0.0; m];
    let mut b_i = vec![0.0; n];
    let global = train.mean_value();

    let mut st_p = AdagradState::new(m * k, config.eta);
    let mut st_q = AdagradState::new(n * k, config.eta);
    let mut st_bu = AdagradState::new(m, config.eta);
    let mut st_bi = AdagradState::new(n, config.eta);
    let mut gp = RowGradBuf::new(m, k);
    let mut gq = RowGradBuf::new(n, k);
    let mut gbu = RowGradBuf::new(m, 1);
    let mut gbi = RowGradBuf::new(n, 1);

    let mut order = train.triplets.clone();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    shuffle_rng.set_stream(1);

    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        let mut epoch_sq = 0.0;
        for (batch_idx, batch) in order.chunks(config.batch_size).enumerate() {
            let out = svd_batch(
                &emb,
                &b_u,
                &b_i,
                global,
                batch,
                config.lambda,
                Some((&mut gp, &mut gq, &mut gbu, &mut gbi)),
            );
            if !out.loss.is_finite() {
                return Err(Error::Numeric {
                    what: "baseline training loss".into(),
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
                st_p.update_slice(r * k, emb.user_row_mut(r), gp.grad_of(idx), "user factors")
                    .map_err(located)?;
            }
            for (idx, &row) in gq.touched().iter().enumerate() {
                let r = row as usize;
                st_q.update_slice(r * k, emb.item_row_mut(r), gq.grad_of(idx), "item factors")
                    .map_err(located)?;
            }
            for (idx, &row) in gbu.touched().iter().enumerate() {
                let r = row as usize;
                st_bu
                    .update_slice(r, &mut b_u[r..r + 1], gbu.grad_of(idx), "user biases")
                    .map_err(located)?;
            }
            for (idx, &row) in gbi.touched().iter().enumerate() {
                let r = row as usize;
                st_bi
                    .update_slice(r, &mut b_i[r..r + 1], gbi.grad_of(idx), "item biases")
                    .map_err(located)?;
            }
            gp.clear();
            gq.clear();
            gbu.clear();
            gbi.clear();
        }
        let pairs = train.len() as f64;
        let stats = EpochStats {
            epoch,
            loss: epoch_loss / pairs,
            rmse_train: (epoch_sq / pairs).sqrt(),
        };
        on_epoch(&stats);
        history.push(stats);
    }

    Ok(TrainedSvdModel {
        embeddings: emb,
        b_u,
        b_i,
        global,
        config: config.clone(),
        r_min: train.r_min,
        r_max: train.r_max,
        users: train.users.clone(),
        items: train.items.clone(),
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{build_dataset, DedupPolicy, Interaction};

    fn ratings(rows: &[(&str, &str, f64)]) -> Dataset {
        let inters: Vec<Interaction> = rows
            .iter()
            .map(|&(u, i, v)| Interaction {
                user: u.to_owned(),
                item: i.to_owned(),
                value: v,
                timestamp: None,
            })
            .collect();
        build_dataset(&inters, 1.0, 5.0, DedupPolicy::KeepLast).unwrap()
    }

    #[test]
    fn user_average_hand_values() {
        let ds = ratings(&[("a", "x", 4.0), ("a", "y", 5.0), ("b", "x", 2.0)]);
        let model = train_average(&ds, AverageKind::User).unwrap();
        assert_eq!(model.predict(0, 0).unwrap(), 4.5);
        assert_eq!(model.predict(0, 1).unwrap(), 4.5);
        assert_eq!(model.predict(1, 0).unwrap(), 2.0);
        assert!(model.predict(2, 0).is_err());
    }

    #[test]
    fn item_average_hand_values() {
        let ds = ratings(&[("a", "x", 4.0), ("a", "y", 5.0), ("b", "x", 2.0)]);
        let model = train_average(&ds, AverageKind::Item).unwrap();
        assert_eq!(model.predict(0, 0).unwrap(), 3.0);
        assert_eq!(model.predict(1, 1).unwrap(), 5.0);
        let global = (4.0 + 5.0 + 2.0) / 3.0;
        assert_eq!(model.global, global);
    }

    #[test]
    fn averages_fall_back_to_global_for_unrated_entities() {
        // "c" only appears via a test-half interaction pattern: construct a
        // dataset where user c exists in the id space but has no train rows.
        let mut ds = ratings(&[("a", "x", 4.0), ("b", "x", 2.0), ("c", "y", 3.0)]);
        // drop c's only triplet while keeping the id maps
        ds.triplets.retain(|t| t.user != 2);
        let model = train_average(&ds, AverageKind::User).unwrap();
        assert_eq!(model.predict(2, 0).unwrap(), 3.0); // global mean of {4, 2}
    }

    #[test]
    fn pop_counts_and_ranks_by_popularity() {
        let ds = ratings(&[
            ("a", "x", 1.0),
            ("b", "x", 1.0),
            ("c", "x", 1.0),
            ("a", "y", 1.0),
            ("b", "y", 1.0),
            ("a", "z", 1.0),
        ]);
        let model = train_pop(&ds).unwrap();
        assert_eq!(model.counts, vec![3, 2, 1]);
        let top = model.recommend_top_n(2, 3, false).unwrap();
        let order: Vec<u32> = top.iter().map(|t| t.0).collect();
        assert_eq!(order, vec![0, 1, 2]);
        // user c has seen x; exclusion leaves y then z
        let top = model.recommend_top_n(2, 3, true).unwrap();
        let order: Vec<u32> = top.iter().map(|t| t.0).collect();
        assert_eq!(order, vec![1, 2]);
    }

    #[test]
    fn pop_breaks_count_ties_by_item_index() {
        let ds = ratings(&[
            ("a", "x", 1.0),
            ("b", "y", 1.0),
            ("c", "y", 1.0),
            ("c", "z", 1.0),
        ]);
        let model = train_pop(&ds).unwrap();
        // counts: x 1, y 2, z 1 -> y first, then x before z
        let order: Vec<u32> = model
            .recommend_top_n(0, 3, false)
            .unwrap()
            .iter()
            .map(|t| t.0)
            .collect();
        assert_eq!(order, vec![1, 0, 2]);
    }

    #[test]
    fn dot_matches_naive_product() {
        for k in [1usize, 7, 8, 9, 31, 64, 100] {
            let p: Vec<f64> = (0..k).map(|j| (j as f64 * 0.37).sin()).collect();
            let q: Vec<f64> = (0..k).map(|j| (j as f64 * 0.91).cos()).collect();
            let naive: f64 = p.iter().zip(&q).map(|(a, b)| a * b).sum();
            let got = dot(&p, &q);
            assert!(
                (got - naive).abs() <= 1e-12 * naive.abs().max(1.0),
                "k = {k}"
            );
        }
    }

    #[test]
    fn svd_gradients_match_finite_differences() {
        let ds = ratings(&[
            ("a", "x", 5.0),
            ("a", "y", 3.0),
            ("b", "x", 1.0),
            ("b", "z", 4.0),
            ("c", "y", 2.0),
        ]);
        let k = 3;
        let cfg = SvdConfig {
            k,
            lambda: 0.1,
            ..SvdConfig::default()
        };
        let (emb, _) = init_params(ds.n_users(), ds.n_items(), k, 7, 0.5).unwrap();
        let b_u: Vec<f64> = (0..ds.n_users()).map(|u| 0.1 * u as f64 - 0.1).collect();
        let b_i: Vec<f64> = (0..ds.n_items()).map(|i| 0.05 * i as f64).collect();
        let global = ds.mean_value();
        let (_, grads) = svd_gradients(&emb, &b_u, &b_i, global, &ds.triplets, &cfg).unwrap();
        let h = 1e-5;
        let check = |analytic: f64, numeric: f64| {
            let denom = analytic.abs().max(numeric.abs());
            if denom > 1e-10 {
                assert!(
                    (analytic - numeric).abs() / denom < 1e-4,
                    "analytic {analytic} vs numeric {numeric}"
                );
            }
        };
        for u in 0..ds.n_users() {
            for j in 0..k {
                let mut lo = emb.clone();
                let mut hi = emb.clone();
                lo.user_row_mut(u)[j] -= h;
                hi.user_row_mut(u)[j] += h;
                let numeric = (svd_loss(&hi, &b_u, &b_i, global, &ds.triplets, &cfg).unwrap()
                    - svd_loss(&lo, &b_u, &b_i, global, &ds.triplets, &cfg).unwrap())
                    / (2.0 * h);
                check(grads.p[u * k + j], numeric);
            }
        }
        for i in 0..ds.n_items() {
            let mut lo = emb.clone();
            let mut hi = emb.clone();
            lo.item_row_mut(i)[1] -= h;
            hi.item_row_mut(i)[1] += h;
            let numeric = (svd_loss(&hi, &b_u, &b_i, global, &ds.triplets, &cfg).unwrap()
                - svd_loss(&lo, &b_u, &b_i, global, &ds.triplets, &cfg).unwrap())
                / (2.0 * h);
            check(grads.q[i * k + 1], numeric);
        }
        for u in 0..ds.n_users() {
            let mut lo = b_u.clone();
            let mut hi = b_u.clone();
            lo[u] -= h;
            hi[u] += h;
            let numeric = (svd_loss(&emb, &hi, &b_i, global, &ds.triplets, &cfg).unwrap()
                - svd_loss(&emb, &lo, &b_i, global, &ds.triplets, &cfg).unwrap())
                / (2.0 * h);
            check(grads.b_u[u], numeric);
        }
    }

    #[test]
    fn svd_fits_a_tiny_dataset() {
        let ds = ratings(&[
            ("a", "x", 5.0),
            ("a", "y", 4.0),
            ("b", "x", 2.0),
            ("b", "y", 1.0),
            ("c", "x", 4.0),
            ("c", "y", 3.0),
        ]);
        let cfg = SvdConfig {
            k: 2,
            lambda: 0.001,
            epochs: 200,
            batch_size: 2,
            ..SvdConfig::default()
        };
        let model = train_svd(&ds, &cfg).unwrap();
        for t in &ds.triplets {
            let pred = model.predict(t.user as usize, t.item as usize).unwrap();
            assert!(
                (pred - t.value).abs() < 0.35,
                "pair ({}, {}): {pred} vs {}",
                t.user,
                t.item,
                t.value
            );
        }
        assert!(model.history.last().unwrap().loss < model.history[0].loss);
    }

    #[test]
    fn svd_training_is_deterministic() {
        let ds = ratings(&[("a", "x", 5.0), ("b", "x", 2.0), ("a", "y", 3.0)]);
        let cfg = SvdConfig {
            k: 4,
            epochs: 5,
            ..SvdConfig::default()
        };
        let m1 = train_svd(&ds, &cfg).unwrap();
        let m2 = train_svd(&ds, &cfg).unwrap();
        assert_eq!(m1.embeddings, m2.embeddings);
        assert_eq!(m1.b_u, m2.b_u);
    }

    #[test]
    fn svd_prediction_clamps_to_rating_range() {
        let ds = ratings(&[("a", "x", 5.0)]);
        let cfg = SvdConfig {
            k: 1,
            ..SvdConfig::default()
        };
        let mut model = train_svd(&ds, &cfg).unwrap();
        model.b_u[0] = 100.0;
        assert_eq!(model.predict(0, 0).unwrap(), 5.0);
        model.b_u[0] = -100.0;
        assert_eq!(model.predict(0, 0).unwrap(), 1.0);
    }

    #[test]
    fn svd_config_validation() {
        for bad in [
            SvdConfig {
                k: 0,
                ..SvdConfig::default()
            },
            SvdConfig {
                eta: 0.0,
                ..SvdConfig::default()
            },
            SvdConfig {
                lambda: -0.1,
                ..SvdConfig::default()
            },
            SvdConfig {
                batch_size: 0,
                ..SvdConfig::default()
            },
            SvdConfig {
                init_std: -1.0,
                ..SvdConfig::default()
            },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
