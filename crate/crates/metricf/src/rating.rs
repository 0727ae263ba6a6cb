//! Explicit-rating metric factorization.
//!
//! Ratings are converted to target distances Y = r_max - r, and the model
//! learns user/item positions plus biases so that the predicted distance
//! ||P_u - Q_i||^2 + b_u + b_i + tau*mu tracks Y. Training is mini-batch
//! Adagrad with confidence weighting on extreme ratings, dimension dropout,
//! and L2 norm clipping of the position rows. Predicted ratings are
//! r_max - Y_hat, clamped to the dataset's rating range.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::accum::{add_pair_grads, add_pair_grads_scaled, RowGradBuf};
use crate::dataset::{Dataset, IdMap, Triplet};
use crate::embeddings::{
    clip_norm, init_params, sample_mask, sq_dist_raw, sq_dist_scaled, BiasTable, DropoutMask,
    EmbeddingTable,
};
use crate::error::{Error, Result};
use crate::optimizer::AdagradState;

/// Shape of the confidence function g in c = 1 + alpha * g(r - r_max/2).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConfidenceKind {
    /// g(x) = |x|
    Absolute,
    /// g(x) = x^2
    Square,
    /// g(x) = ln(1 + |x|), kept nonnegative so c >= 1
    Log,
}

impl ConfidenceKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "absolute" | "abs" => Ok(Self::Absolute),
            "square" => Ok(Self::Square),
            "log" => Ok(Self::Log),
            other => Err(Error::Config(format!(
                "unknown confidence kind {other:?} (expected absolute, square, or log)"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Absolute => "absolute",
            Self::Square => "square",
            Self::Log => "log",
        }
    }

    #[inline]
    fn g(self, x: f64) -> f64 {
        match self {
            Self::Absolute => x.abs(),
            Self::Square => x * x,
            Self::Log => (1.0 + x.abs()).ln(),
        }
    }
}

/// Hyperparameters for rating training.
#[derive(Debug, Clone)]
pub struct RatingConfig {
    pub k: usize,
    pub eta: f64,
    pub alpha: f64,
    pub g_kind: ConfidenceKind,
    pub lambda: f64,
    pub tau: f64,
    /// Max L2 norm of any position row.
    pub l: f64,
    pub drop_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub init_std: f64,
}

impl Default for RatingConfig {
    /// The MovieLens-100K benchmark settings.
    fn default() -> Self {
        Self {
            k: 150,
            eta: 0.05,
            alpha: 0.2,
            g_kind: ConfidenceKind::Absolute,
            lambda: 0.01,
            tau: 0.90,
            l: 1.0,
            drop_rate: 0.05,
            epochs: 30,
            batch_size: 256,
            seed: 42,
            init_std: 0.01,
        }
    }
}

impl RatingConfig {
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
        if self.lambda < 0.0 {
            return Err(Error::Config(format!(
                "lambda must be >= 0, got {}",
                self.lambda
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

/// Per-epoch training progress.
#[derive(Debug, Clone, Copy)]
pub struct EpochStats {
    /// 1-based epoch number.
    pub epoch: usize,
    /// Epoch loss divided by the number of pairs visited.
    pub loss: f64,
    /// Root mean squared training residual (distance scale equals rating
    /// scale, so this tracks train RMSE up to clamping).
    pub rmse_train: f64,
}

/// Result of `train_rating`: parameters plus everything needed to map raw
/// ids and report training history.
#[derive(Debug, Clone)]
pub struct TrainedRatingModel {
    pub embeddings: EmbeddingTable,
    pub biases: BiasTable,
    pub config: RatingConfig,
    pub r_min: f64,
    pub r_max: f64,
    pub users: IdMap,
    pub items: IdMap,
    pub history: Vec<EpochStats>,
}

impl TrainedRatingModel {
    /// Predicted distance ||P_u - Q_i||^2 + b_u + b_i + tau*mu.
    pub fn predict_distance(&self, u: usize, i: usize) -> Result<f64> {
        self.check_indices(u, i)?;
        Ok(self.predict_distance_unchecked(u, i))
    }

    /// Predicted rating r_max - Y_hat, clamped to [r_min, r_max].
    pub fn predict_rating(&self, u: usize, i: usize) -> Result<f64> {
        self.check_indices(u, i)?;
        Ok(self.predict_rating_unchecked(u, i))
    }

    /// Predict from raw dataset ids.
    pub fn predict_rating_by_raw(&self, user: &str, item: &str) -> Result<f64> {
        let u = self.users.index_of(user).ok_or_else(|| Error::UnknownId {
            kind: "user",
            id: user.to_owned(),
        })?;
        let i = self.items.index_of(item).ok_or_else(|| Error::UnknownId {
            kind: "item",
            id: item.to_owned(),
        })?;
        self.predict_rating(u as usize, i as usize)
    }

    fn check_indices(&self, u: usize, i: usize) -> Result<()> {
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
        Ok(())
    }

    pub(crate) fn predict_distance_unchecked(&self, u: usize, i: usize) -> f64 {
        sq_dist_raw(self.embeddings.user_row(u), self.embeddings.item_row(i))
            + self.biases.user[u]
            + self.biases.item[i]
            + self.biases.tau * self.biases.mu
    }

    /// `predict_rating` without the index check; panics if `u` or `i` is
    /// out of range. Meant for tight evaluation loops over valid indices.
    pub fn predict_rating_unchecked(&self, u: usize, i: usize) -> f64 {
        (self.r_max - self.predict_distance_unchecked(u, i)).clamp(self.r_min, self.r_max)
    }
}

/// Similarity-to-distance conversion Y = r_max - r.
pub fn rating_to_distance(r: f64, r_max: f64) -> Result<f64> {
    if r > r_max {
        return Err(Error::ValueOutOfRange {
            value: r,
            r_min: f64::NEG_INFINITY,
            r_max,
        });
    }
    Ok(r_max - r)
}

/// Confidence weight c = 1 + alpha * g(r - r_max/2); extreme ratings carry
/// more weight than ambiguous mid-scale ones.
pub fn rating_confidence(r: f64, r_max: f64, alpha: f64, g_kind: ConfidenceKind) -> f64 {
    1.0 + alpha * g_kind.g(r - r_max / 2.0)
}

struct BatchOut {
    loss: f64,
    sq_err: f64,
}

/// One pass over a batch: loss (and optionally gradients) for
/// sum c * (Y - Y_hat)^2 + lambda * (b_u^2 + b_i^2), summed per pair.
/// The single source of truth for the rating objective; the public loss,
/// the public gradients, and the trainer all route through here.
#[allow(clippy::too_many_arguments)]
fn rating_batch(
    emb: &EmbeddingTable,
    biases: &BiasTable,
    r_max: f64,
    batch: &[Triplet],
    alpha: f64,
    g_kind: ConfidenceKind,
    lambda: f64,
    scale: Option<&[f64]>,
    mut grads: Option<(
        &mut RowGradBuf,
        &mut RowGradBuf,
        &mut RowGradBuf,
        &mut RowGradBuf,
    )>,
) -> BatchOut {
    let tau_mu = biases.tau * biases.mu;
    let half = r_max / 2.0;
    let mut loss = 0.0;
    let mut sq_err = 0.0;
    for t in batch {
        let u = t.user as usize;
        let i = t.item as usize;
        let pu = emb.user_row(u);
        let qi = emb.item_row(i);
        let d = match scale {
            Some(s) => sq_dist_scaled(pu, qi, s),
            None => sq_dist_raw(pu, qi),
        };
        let bu = biases.user[u];
        let bi = biases.item[i];
        let y = r_max - t.value;
        let y_hat = d + bu + bi + tau_mu;
        let c = 1.0 + alpha * g_kind.g(t.value - half);
        let resid = y_hat - y;
        loss += c * resid * resid + lambda * (bu * bu + bi * bi);
        sq_err += resid * resid;
        if let Some((gp, gq, gbu, gbi)) = grads.as_mut() {
            // d/dP_uj = 2 c resid * s_j * 2 (P_uj - Q_ij), and the mirror
            // image for Q; biases get 2 c resid plus their L2 pull.
            let coef = 2.0 * c * resid;
            let two_coef = 2.0 * coef;
            let gu = gp.row_mut(t.user);
            let gi = gq.row_mut(t.item);
            match scale {
                Some(s) => add_pair_grads_scaled(two_coef, pu, qi, s, gu, gi),
                None => add_pair_grads(two_coef, pu, qi, gu, gi),
            }
            gbu.row_mut(t.user)[0] += coef + 2.0 * lambda * bu;
            gbi.row_mut(t.item)[0] += coef + 2.0 * lambda * bi;
        }
    }
    BatchOut { loss, sq_err }
}

fn check_batch_inputs(
    emb: &EmbeddingTable,
    biases: &BiasTable,
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
    if biases.user.len() != emb.n_users() {
        return Err(Error::Shape {
            what: "user biases",
            expected: emb.n_users(),
            got: biases.user.len(),
        });
    }
    if biases.item.len() != emb.n_items() {
        return Err(Error::Shape {
            what: "item biases",
            expected: emb.n_items(),
            got: biases.item.len(),
        });
    }
    Ok(())
}

/// Batch training loss at the given parameters.
pub fn rating_loss(
    emb: &EmbeddingTable,
    biases: &BiasTable,
    r_max: f64,
    batch: &[Triplet],
    config: &RatingConfig,
    mask: Option<&DropoutMask>,
) -> Result<f64> {
    check_batch_inputs(emb, biases, batch, mask)?;
    let scale = mask.map(|m| m.scale_vector());
    let out = rating_batch(
        emb,
        biases,
        r_max,
        batch,
        config.alpha,
        config.g_kind,
        config.lambda,
        scale.as_deref(),
        None,
    );
    Ok(out.loss)
}

/// Dense batch gradients; same layout as the parameters.
#[derive(Debug, Clone)]
pub struct RatingGrads {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub b_u: Vec<f64>,
    pub b_i: Vec<f64>,
}

/// Loss and analytic gradients of `rating_loss` with respect to every
/// parameter. Shares its accumulation path with the trainer, so what this
/// returns is exactly what training applies.
pub fn rating_gradients(
    emb: &EmbeddingTable,
    biases: &BiasTable,
    r_max: f64,
    batch: &[Triplet],
    config: &RatingConfig,
    mask: Option<&DropoutMask>,
) -> Result<(f64, RatingGrads)> {
    check_batch_inputs(emb, biases, batch, mask)?;
    let (m, n, k) = (emb.n_users(), emb.n_items(), emb.k());
    let scale = mask.map(|ma| ma.scale_vector());
    let mut gp = RowGradBuf::new(m, k);
    let mut gq = RowGradBuf::new(n, k);
    let mut gbu = RowGradBuf::new(m, 1);
    let mut gbi = RowGradBuf::new(n, 1);
    let out = rating_batch(
        emb,
        biases,
        r_max,
        batch,
        config.alpha,
        config.g_kind,
        config.lambda,
        scale.as_deref(),
        Some((&mut gp, &mut gq, &mut gbu, &mut gbi)),
    );
    let mut grads = RatingGrads {
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

/// Train on an explicit-rating dataset. See the module docs for the
/// objective. All randomness (init, shuffling, dropout masks) derives from
/// `config.seed`, so identical inputs give bitwise-identical models.
pub fn train_rating(train: &Dataset, config: &RatingConfig) -> Result<TrainedRatingModel> {
    train_rating_with(train, config, |_| {})
}

/// `train_rating` with a per-epoch observer (progress logging hook).
pub fn train_rating_with(
    train: &Dataset,
    config: &RatingConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<TrainedRatingModel> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let m = train.n_users();
    let n = train.n_items();
    let k = config.k;
    let (mut emb, mut biases) = init_params(m, n, k, config.seed, config.init_std)?;
    biases.tau = config.tau;
    // global bias: mean target distance over the train half, frozen here
    biases.mu = train
        .triplets
        .iter()
        .map(|t| train.r_max - t.value)
        .sum::<f64>()
        / train.len() as f64;

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
    let mut mask_rng = ChaCha8Rng::seed_from_u64(config.seed);
    mask_rng.set_stream(2);

    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        let mut epoch_sq = 0.0;
        for (batch_idx, batch) in order.chunks(config.batch_size).enumerate() {
            let scale = if config.drop_rate > 0.0 {
                Some(sample_mask(k, config.drop_rate, &mut mask_rng)?.scale_vector())
            } else {
                None
            };
            let out = rating_batch(
                &emb,
                &biases,
                train.r_max,
                batch,
                config.alpha,
                config.g_kind,
                config.lambda,
                scale.as_deref(),
                Some((&mut gp, &mut gq, &mut gbu, &mut gbi)),
            );
            if !out.loss.is_finite() {
                return Err(Error::Numeric {
                    what: "rating training loss".into(),
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
            for (idx, &row) in gbu.touched().iter().enumerate() {
                let r = row as usize;
                st_bu
                    .update_slice(
                        r,
                        &mut biases.user[r..r + 1],
                        gbu.grad_of(idx),
                        "user biases",
                    )
                    .map_err(located)?;
            }
            for (idx, &row) in gbi.touched().iter().enumerate() {
                let r = row as usize;
                st_bi
                    .update_slice(
                        r,
                        &mut biases.item[r..r + 1],
                        gbi.grad_of(idx),
                        "item biases",
                    )
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

    Ok(TrainedRatingModel {
        embeddings: emb,
        biases,
        config: config.clone(),
        r_min: train.r_min,
        r_max: train.r_max,
        users: train.users.clone(),
        items: train.items.clone(),
        history,
    })
}
