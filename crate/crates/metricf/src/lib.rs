//! Metric factorization recommender.
//!
//! Users and items live as points in a shared k-dimensional space and
//! preference is the squared Euclidean distance between them: the closer a
//! user is to an item, the stronger the predicted interest. Training pushes
//! each user-item pair toward a target distance derived from the observed
//! feedback, weighted by a confidence term, using mini-batch Adagrad with
//! norm clipping and dimension dropout.
//!
//! Two models share that geometry:
//!
//! - [`rating::train_rating`] fits explicit ratings and predicts on the
//!   original rating scale with user/item bias terms.
//! - [`ranking::train_ranking`] fits binarized implicit feedback over the
//!   full user-item grid and ranks items by ascending distance.
//!
//! Alongside them live reference baselines ([`baselines`]), dataset loading
//! and splitting ([`dataset`]), evaluation metrics ([`metrics`]), model
//! persistence ([`model_io`]), and the command-line pipeline ([`cli`]).
//!
//! ```no_run
//! use metricf::dataset::{load_dataset, random_split, Delimiter, DedupPolicy, SplitSpec};
//! use metricf::rating::{train_rating, RatingConfig};
//! use metricf::metrics::evaluate_rating;
//!
//! # fn main() -> metricf::error::Result<()> {
//! let data = load_dataset(
//!     "data/u.data".as_ref(),
//!     Delimiter::Auto,
//!     1.0,
//!     5.0,
//!     DedupPolicy::KeepLast,
//! )?;
//! let spec = SplitSpec { train_fraction: 0.9, seed: 42, n_repeats: 5 };
//! let (train, test) = random_split(&data, &spec, 0)?;
//! let model = train_rating(&train, &RatingConfig::default())?;
//! let scores = evaluate_rating(&model, &test)?;
//! println!("rmse {}", scores["rmse"]);
//! # Ok(())
//! # }
//! ```

pub mod baselines;
pub mod cli;
pub mod dataset;
pub mod embeddings;
pub mod error;
pub mod metrics;
pub mod model_io;
pub mod optimizer;
pub mod ranking;
pub mod rating;

mod accum;

pub use dataset::{Dataset, Triplet};
pub use error::{Error, Result};
pub use ranking::{train_ranking, RankingConfig, TrainedRankingModel};
pub use rating::{train_rating, RatingConfig, TrainedRatingModel};
