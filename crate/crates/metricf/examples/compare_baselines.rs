//! Fit the metric model and three reference predictors on the same split
//! and line up their held-out errors.
//!
//!     cargo run --example compare_baselines [ratings-file]

use std::path::PathBuf;

use metricf::baselines::{train_average, train_svd, AverageKind, SvdConfig};
use metricf::dataset::{load_dataset, random_split, DedupPolicy, Delimiter, SplitSpec};
use metricf::metrics::{evaluate_rating_with, mae, rmse};
use metricf::{train_rating, RatingConfig};

fn main() -> anyhow::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| {
            PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/u.data"))
        });
    let data = load_dataset(&path, Delimiter::Auto, 1.0, 5.0, DedupPolicy::KeepLast)?;
    let (train, test) = random_split(
        &data,
        &SplitSpec {
            train_fraction: 0.9,
            seed: 42,
            n_repeats: 1,
        },
        0,
    )?;
    println!("{} train / {} test interactions", train.len(), test.len());

    let mut rows: Vec<(&str, f64, f64)> = Vec::new();

    let metric = train_rating(&train, &RatingConfig::default())?;
    let scores = evaluate_rating_with(|u, i| metric.predict_rating_unchecked(u, i), &test)?;
    rows.push(("metric", scores["rmse"], scores["mae"]));

    let svd = train_svd(&train, &SvdConfig::default())?;
    let scores = evaluate_rating_with(|u, i| svd.predict_unchecked(u, i), &test)?;
    rows.push(("biased svd", scores["rmse"], scores["mae"]));

    for (name, kind) in [
        ("user average", AverageKind::User),
        ("item average", AverageKind::Item),
    ] {
        let model = train_average(&train, kind)?;
        let scores = evaluate_rating_with(|u, i| model.predict_unchecked(u, i), &test)?;
        rows.push((name, scores["rmse"], scores["mae"]));
    }

    // predicting the global mean everywhere, the floor any model must beat
    let mean = train.mean_value();
    let pred: Vec<f64> = vec![mean; test.len()];
    let truth: Vec<f64> = test.triplets.iter().map(|t| t.value).collect();
    rows.push(("global mean", rmse(&pred, &truth)?, mae(&pred, &truth)?));

    println!("{:<14} {:>8} {:>8}", "model", "rmse", "mae");
    for (name, r, m) in rows {
        println!("{name:<14} {r:>8.4} {m:>8.4}");
    }
    Ok(())
}
