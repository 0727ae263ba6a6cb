//! Train the implicit-feedback ranking model and report top-N quality.
//!
//!     cargo run --example train_ranking [interactions-file]
//!
//! Defaults to the bundled FilmTrust ratings, which get binarized: every
//! observed pair becomes a positive, everything else is treated as
//! unobserved. With the default 200-dimensional config a full run takes a
//! couple of minutes on one core.

use std::path::PathBuf;
use std::time::Instant;

use metricf::dataset::{binarize, load_dataset, random_split, DedupPolicy, Delimiter, SplitSpec};
use metricf::metrics::evaluate_ranking;
use metricf::ranking::train_ranking_with;
use metricf::RankingConfig;

fn main() -> anyhow::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| {
            PathBuf::from(concat!(
                env!("CARGO_MANIFEST_DIR"),
                "/../../data/filmtrust.dat"
            ))
        });

    let raw = load_dataset(&path, Delimiter::Auto, 0.0, 5.0, DedupPolicy::KeepLast)?;
    let data = binarize(&raw);
    println!(
        "{}: {} positives, {} users, {} items",
        path.display(),
        data.len(),
        data.n_users(),
        data.n_items()
    );

    let spec = SplitSpec {
        train_fraction: 0.8,
        seed: 42,
        n_repeats: 1,
    };
    let (train, test) = random_split(&data, &spec, 0)?;

    let config = RankingConfig::default();
    let started = Instant::now();
    let model = train_ranking_with(&train, &config, |s| {
        println!("epoch {:>2}  loss {:.5}", s.epoch, s.loss);
    })?;
    println!("trained in {:.0}s", started.elapsed().as_secs_f64());

    let scores = evaluate_ranking(&model, &train, &test, &[5, 10])?;
    println!(
        "ndcg {:.4}  precision@10 {:.4}  recall@10 {:.4}  map {:.4}  mrr {:.4}",
        scores["ndcg"], scores["precision@10"], scores["recall@10"], scores["map"], scores["mrr"]
    );
    Ok(())
}
