//! Round-trip a trained model through its file format.
//!
//!     cargo run --example save_load_model
//!
//! Models serialize to a line-oriented text file with full float precision,
//! so a reloaded model reproduces the original predictions bit for bit. Id
//! maps are not stored in the file; they are rebuilt from the training data
//! on load, which is why the loader takes the id maps as arguments.

use metricf::dataset::{build_dataset, DedupPolicy, Interaction};
use metricf::model_io::{load_model, save_model, ModelFile};
use metricf::{train_rating, RatingConfig};

fn main() -> anyhow::Result<()> {
    // small synthetic rating matrix, values cycle through 1..=5
    let inters: Vec<Interaction> = (0..15u32)
        .flat_map(|u| (0..20u32).map(move |i| (u, i)))
        .filter(|(u, i)| (u + i) % 3 != 0)
        .map(|(u, i)| Interaction {
            user: format!("u{u}"),
            item: format!("i{i}"),
            value: ((u * 2 + i * 5) % 5 + 1) as f64,
            timestamp: None,
        })
        .collect();
    let data = build_dataset(&inters, 1.0, 5.0, DedupPolicy::Error)?;

    let config = RatingConfig {
        k: 8,
        epochs: 10,
        batch_size: 64,
        ..RatingConfig::default()
    };
    let model = train_rating(&data, &config)?;

    let path = std::env::temp_dir().join("metricf_example_model.mfm");
    save_model(&path, &ModelFile::from_rating(&model))?;
    println!(
        "wrote {} ({} bytes)",
        path.display(),
        std::fs::metadata(&path)?.len()
    );

    let reloaded = load_model(&path)?.into_rating_model(data.users.clone(), data.items.clone())?;

    let mut worst = 0.0f64;
    for u in 0..data.n_users() {
        for i in 0..data.n_items() {
            let a = model.predict_rating(u, i)?;
            let b = reloaded.predict_rating(u, i)?;
            worst = worst.max((a - b).abs());
        }
    }
    println!("largest prediction difference after reload: {worst:e}");
    assert_eq!(worst, 0.0, "round trip must be exact");

    println!(
        "sample: user u3 item i7 -> {:.3}",
        reloaded.predict_rating_by_raw("u3", "i7")?
    );
    std::fs::remove_file(&path)?;
    Ok(())
}
