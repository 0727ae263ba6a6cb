//! Produce top-10 lists for a few users.
//!
//!     cargo run --example recommend [interactions-file] [user-id ...]
//!
//! Trains a deliberately small ranking model (k = 50, 10 epochs) so the
//! example finishes quickly; expect better lists from the full config in
//! train_ranking.

use std::path::PathBuf;

use metricf::dataset::{binarize, load_dataset, DedupPolicy, Delimiter};
use metricf::{train_ranking, RankingConfig};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args.next().map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/../../data/filmtrust.dat"
        ))
    });
    let mut users: Vec<String> = args.collect();

    let data = binarize(&load_dataset(
        &path,
        Delimiter::Auto,
        0.0,
        5.0,
        DedupPolicy::KeepLast,
    )?);
    if users.is_empty() {
        // nobody asked for anyone in particular, pick the first three users
        users = (0..3.min(data.n_users() as u32))
            .map(|u| data.users.raw(u).to_owned())
            .collect();
    }

    let config = RankingConfig {
        k: 50,
        epochs: 10,
        ..RankingConfig::default()
    };
    let model = train_ranking(&data, &config)?;

    for user in &users {
        println!("top 10 for user {user}:");
        for (rank, (item, dist)) in model.recommend_by_raw(user, 10, true)?.iter().enumerate() {
            println!("  {:>2}. item {item}  (distance {dist:.3})", rank + 1);
        }
    }
    Ok(())
}
