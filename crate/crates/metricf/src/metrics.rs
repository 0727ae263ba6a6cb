//! Evaluation metrics for rating prediction (RMSE, MAE) and top-N ranking
//! (precision/recall at n, AP, MRR, NDCG), plus split-averaged reports.

use std::collections::{BTreeMap, HashSet};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::ranking::TrainedRankingModel;
use crate::rating::TrainedRatingModel;

/// Root mean squared error.
pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_paired(pred, truth)?;
    let sum: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((sum / pred.len() as f64).sqrt())
}

/// Mean absolute error.
pub fn mae(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_paired(pred, truth)?;
    let sum: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum();
    Ok(sum / pred.len() as f64)
}

fn check_paired(pred: &[f64], truth: &[f64]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::Shape {
            what: "prediction/truth",
            expected: truth.len(),
            got: pred.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::Empty("prediction list"));
    }
    Ok(())
}

/// Fraction of the top-n that is relevant: |top-n intersect relevant| / n.
pub fn precision_at(ranked: &[u32], relevant: &[u32], n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Config("precision cutoff must be >= 1".into()));
    }
    let rel: HashSet<u32> = relevant.iter().copied().collect();
    let hits = ranked.iter().take(n).filter(|i| rel.contains(i)).count();
    Ok(hits as f64 / n as f64)
}

/// Fraction of the relevant set found in the top-n.
pub fn recall_at(ranked: &[u32], relevant: &[u32], n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Config("recall cutoff must be >= 1".into()));
    }
    if relevant.is_empty() {
        return Err(Error::Empty("relevant set"));
    }
    let rel: HashSet<u32> = relevant.iter().copied().collect();
    let hits = ranked.iter().take(n).filter(|i| rel.contains(i)).count();
    Ok(hits as f64 / rel.len() as f64)
}

/// Average precision over the full list: the mean, over relevant items that
/// appear in `ranked`, of (relevant-so-far / rank). 0 when nothing relevant
/// is retrieved.
pub fn average_precision(ranked: &[u32], relevant: &[u32]) -> Result<f64> {
    if relevant.is_empty() {
        return Err(Error::Empty("relevant set"));
    }
    let rel: HashSet<u32> = relevant.iter().copied().collect();
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (pos, item) in ranked.iter().enumerate() {
        if rel.contains(item) {
            hits += 1;
            sum += hits as f64 / (pos + 1) as f64;
        }
    }
    if hits == 0 {
        return Ok(0.0);
    }
    Ok(sum / hits as f64)
}

/// Reciprocal rank of the first relevant item; 0 if none appears.
pub fn mrr(ranked: &[u32], relevant: &[u32]) -> f64 {
    let rel: HashSet<u32> = relevant.iter().copied().collect();
    for (pos, item) in ranked.iter().enumerate() {
        if rel.contains(item) {
            return 1.0 / (pos + 1) as f64;
        }
    }
    0.0
}

/// Normalized discounted cumulative gain with binary gains: a relevant item
/// at 1-based rank p contributes 1/log2(p+1). Evaluated over the full list
/// unless a cutoff is given. The ideal DCG packs the relevant items into the
/// top ranks.
pub fn ndcg(ranked: &[u32], relevant: &[u32], cutoff: Option<usize>) -> Result<f64> {
    if relevant.is_empty() {
        return Err(Error::Empty("relevant set"));
    }
    if let Some(0) = cutoff {
        return Err(Error::Config("ndcg cutoff must be >= 1".into()));
    }
    let rel: HashSet<u32> = relevant.iter().copied().collect();
    let limit = cutoff.unwrap_or(ranked.len());
    let mut dcg = 0.0;
    for (pos, item) in ranked.iter().take(limit).enumerate() {
        if rel.contains(item) {
            dcg += 1.0 / ((pos + 2) as f64).log2();
        }
    }
    let ideal_hits = rel.len().min(limit);
    let mut idcg = 0.0;
    for pos in 0..ideal_hits {
        idcg += 1.0 / ((pos + 2) as f64).log2();
    }
    Ok(dcg / idcg)
}

/// Rating metrics {rmse, mae} from any index-level predictor.
pub fn evaluate_rating_with<F>(predict: F, test: &Dataset) -> Result<BTreeMap<String, f64>>
where
    F: Fn(usize, usize) -> f64,
{
    if test.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let mut pred = Vec::with_capacity(test.len());
    let mut truth = Vec::with_capacity(test.len());
    for t in &test.triplets {
        pred.push(predict(t.user as usize, t.item as usize));
        truth.push(t.value);
    }
    let mut out = BTreeMap::new();
    out.insert("rmse".to_owned(), rmse(&pred, &truth)?);
    out.insert("mae".to_owned(), mae(&pred, &truth)?);
    Ok(out)
}

/// Rating metrics for a trained metric-factorization model.
pub fn evaluate_rating(
    model: &TrainedRatingModel,
    test: &Dataset,
) -> Result<BTreeMap<String, f64>> {
    evaluate_rating_with(|u, i| model.predict_rating_unchecked(u, i), test)
}

/// Ranking metrics from any scorer (lower score = better item), averaged
/// over users with at least one test positive.
///
/// Per user, the candidate list is every item minus that user's train
/// positives, ordered by ascending score with ties broken by item index;
/// the relevant set is the user's test positives. Produces map, mrr, ndcg
/// (full list), and precision/recall at each cutoff.
pub fn evaluate_ranking_with<F>(
    score: F,
    train: &Dataset,
    test: &Dataset,
    cutoffs: &[usize],
) -> Result<BTreeMap<String, f64>>
where
    F: Fn(usize, usize) -> f64,
{
    if test.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let m = train.n_users();
    let n = train.n_items();
    let train_pos = train.user_items();
    let test_pos = test.user_items();

    let mut sums: BTreeMap<String, f64> = BTreeMap::new();
    let mut users_counted = 0usize;
    let mut ranked: Vec<u32> = Vec::with_capacity(n);
    let mut scored: Vec<(f64, u32)> = Vec::with_capacity(n);

    for u in 0..m {
        let relevant = &test_pos[u];
        if relevant.is_empty() {
            continue;
        }
        let exclude = &train_pos[u];
        scored.clear();
        for i in 0..n as u32 {
            if exclude.binary_search(&i).is_err() {
                scored.push((score(u, i as usize), i));
            }
        }
        scored.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        ranked.clear();
        ranked.extend(scored.iter().map(|&(_, i)| i));

        let mut add = |key: &str, value: f64| {
            *sums.entry(key.to_owned()).or_insert(0.0) += value;
        };
        add("map", average_precision(&ranked, relevant)?);
        add("mrr", mrr(&ranked, relevant));
        add("ndcg", ndcg(&ranked, relevant, None)?);
        for &c in cutoffs {
            add(
                &format!("precision@{c}"),
                precision_at(&ranked, relevant, c)?,
            );
            add(&format!("recall@{c}"), recall_at(&ranked, relevant, c)?);
        }
        users_counted += 1;
    }
    if users_counted == 0 {
        return Err(Error::Empty("no users with test positives"));
    }
    Ok(sums
        .into_iter()
        .map(|(k, v)| (k, v / users_counted as f64))
        .collect())
}

/// Ranking metrics for a trained metric-factorization ranking model.
pub fn evaluate_ranking(
    model: &TrainedRankingModel,
    train: &Dataset,
    test: &Dataset,
    cutoffs: &[usize],
) -> Result<BTreeMap<String, f64>> {
    evaluate_ranking_with(|u, i| model.distance_unchecked(u, i), train, test, cutoffs)
}

/// Mean and standard deviation of one metric across splits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

/// Split-averaged metric report.
#[derive(Debug, Clone)]
pub struct EvalReport {
    /// metric name -> (mean, population std) over the repeats
    pub metrics: BTreeMap<String, MeanStd>,
    pub cutoffs: Vec<usize>,
    pub n_repeats: usize,
}

impl EvalReport {
    /// Aggregate per-split metric maps. Every run must carry the same keys.
    pub fn from_runs(runs: &[BTreeMap<String, f64>], cutoffs: &[usize]) -> Result<Self> {
        if runs.is_empty() {
            return Err(Error::Empty("metric runs"));
        }
        let keys: Vec<&String> = runs[0].keys().collect();
        let n = runs.len() as f64;
        let mut metrics = BTreeMap::new();
        for key in keys {
            let vals: Vec<f64> = runs
                .iter()
                .map(|r| {
                    r.get(key)
                        .copied()
                        .ok_or(Error::Empty("metric missing in a run"))
                })
                .collect::<Result<_>>()?;
            let mean = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            metrics.insert(
                key.clone(),
                MeanStd {
                    mean,
                    std: var.sqrt(),
                },
            );
        }
        Ok(Self {
            metrics,
            cutoffs: cutoffs.to_vec(),
            n_repeats: runs.len(),
        })
    }

    pub fn mean(&self, key: &str) -> Option<f64> {
        self.metrics.get(key).map(|m| m.mean)
    }

    /// JSON in the shape {"metric": {"mean": x, "std": y}, ...}.
    pub fn to_json(&self) -> serde_json::Value {
        let mut map = serde_json::Map::new();
        for (k, v) in &self.metrics {
            map.insert(
                k.clone(),
                serde_json::json!({ "mean": v.mean, "std": v.std }),
            );
        }
        serde_json::Value::Object(map)
    }

    /// Plain-text aligned table.
    pub fn text_table(&self) -> String {
        let width = self
            .metrics
            .keys()
            .map(|k| k.len())
            .max()
            .unwrap_or(6)
            .max(6);
        let mut out = format!("{:<width$}  {:>10}  {:>10}\n", "metric", "mean", "std");
        for (k, v) in &self.metrics {
            out.push_str(&format!("{k:<width$}  {:>10.4}  {:>10.4}\n", v.mean, v.std));
        }
        out
    }
}
