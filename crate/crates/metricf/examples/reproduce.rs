//! The five-split rating benchmark as a library loop: split, train,
//! evaluate, aggregate. Equivalent to `metricf reproduce --recipe
//! ml100k-rating` minus the baseline comparison.
//!
//!     cargo run --example reproduce [ratings-file]
//!
//! Each repeat gets its own train/test partition and its own training seed,
//! so the reported standard deviation reflects genuine split-to-split
//! variation, not reshuffled minibatches of one split.

use std::path::PathBuf;
use std::time::Instant;

use metricf::cli::derive_train_seed;
use metricf::dataset::{load_dataset, random_split, DedupPolicy, Delimiter, SplitSpec};
use metricf::metrics::{evaluate_rating, EvalReport};
use metricf::{train_rating, RatingConfig};

fn main() -> anyhow::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| {
            PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/u.data"))
        });
    let data = load_dataset(&path, Delimiter::Auto, 1.0, 5.0, DedupPolicy::KeepLast)?;

    let spec = SplitSpec {
        train_fraction: 0.9,
        seed: 42,
        n_repeats: 5,
    };
    let base = RatingConfig::default();

    let started = Instant::now();
    let mut runs = Vec::new();
    for repeat in 0..spec.n_repeats {
        let (train, test) = random_split(&data, &spec, repeat)?;
        let config = RatingConfig {
            seed: derive_train_seed(spec.seed, repeat),
            ..base.clone()
        };
        let model = train_rating(&train, &config)?;
        let run = evaluate_rating(&model, &test)?;
        println!(
            "split {repeat}: rmse {:.4}  mae {:.4}",
            run["rmse"], run["mae"]
        );
        runs.push(run);
    }

    let report = EvalReport::from_runs(&runs, &[])?;
    println!(
        "\n{} splits in {:.0}s",
        spec.n_repeats,
        started.elapsed().as_secs_f64()
    );
    print!("{}", report.text_table());
    Ok(())
}
