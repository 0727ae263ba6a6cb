//! Train the rating model on MovieLens-style explicit feedback and score a
//! held-out split.
//!
//!     cargo run --example train_rating [ratings-file]
//!
//! The file defaults to the bundled MovieLens 100K dump. Expects one
//! `user <sep> item <sep> rating` triple per line; the separator is
//! auto-detected.

use std::path::PathBuf;

use metricf::dataset::{load_dataset, random_split, DedupPolicy, Delimiter, SplitSpec};
use metricf::metrics::evaluate_rating;
use metricf::rating::train_rating_with;
use metricf::RatingConfig;

fn main() -> anyhow::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| {
            PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/u.data"))
        });

    let data = load_dataset(&path, Delimiter::Auto, 1.0, 5.0, DedupPolicy::KeepLast)?;
    println!(
        "{}: {} ratings, {} users, {} items",
        path.display(),
        data.len(),
        data.n_users(),
        data.n_items()
    );

    let spec = SplitSpec {
        train_fraction: 0.9,
        seed: 42,
        n_repeats: 1,
    };
    let (train, test) = random_split(&data, &spec, 0)?;

    let config = RatingConfig::default();
    println!(
        "k = {}, eta = {}, {} epochs",
        config.k, config.eta, config.epochs
    );
    let model = train_rating_with(&train, &config, |s| {
        if s.epoch % 5 == 0 || s.epoch == 1 {
            println!(
                "epoch {:>2}  loss {:.4}  train rmse {:.4}",
                s.epoch, s.loss, s.rmse_train
            );
        }
    })?;

    let scores = evaluate_rating(&model, &test)?;
    println!(
        "held out rmse {:.4}  mae {:.4}",
        scores["rmse"], scores["mae"]
    );

    // spot check a few predictions against the truth
    for t in test.triplets.iter().take(5) {
        let pred = model.predict_rating(t.user as usize, t.item as usize)?;
        println!(
            "user {} item {}: predicted {:.2}, actual {}",
            test.users.raw(t.user),
            test.items.raw(t.item),
            pred,
            t.value
        );
    }
    Ok(())
}
