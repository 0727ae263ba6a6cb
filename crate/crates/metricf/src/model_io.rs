//! Model persistence.
//!
//! One file per model: a single ASCII header line
//!
//! ```text
//! METRICF v1 <mode> <M> <N> <k> <r_min> <r_max> <tau> <mu>
//! ```
//!
//! followed by little-endian f64 arrays in fixed order: P (M*k, row-major),
//! Q (N*k), user biases, item biases. Which arrays are non-empty depends on
//! the mode. Floats in the header use Rust's shortest round-trip formatting,
//! and the binary arrays are copied verbatim, so save followed by load
//! reproduces every parameter bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::baselines::{AverageKind, AverageModel, PopModel, SvdConfig, TrainedSvdModel};
use crate::dataset::IdMap;
use crate::embeddings::{BiasTable, EmbeddingTable};
use crate::error::{Error, Result};
use crate::ranking::{RankingConfig, TrainedRankingModel};
use crate::rating::{RatingConfig, TrainedRatingModel};

/// What kind of predictor a model file holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelMode {
    Rating,
    Ranking,
    Svd,
    UserAvg,
    ItemAvg,
    Pop,
}

impl ModelMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Rating => "rating",
            Self::Ranking => "ranking",
            Self::Svd => "svd",
            Self::UserAvg => "useravg",
            Self::ItemAvg => "itemavg",
            Self::Pop => "pop",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "rating" => Some(Self::Rating),
            "ranking" => Some(Self::Ranking),
            "svd" => Some(Self::Svd),
            "useravg" => Some(Self::UserAvg),
            "itemavg" => Some(Self::ItemAvg),
            "pop" => Some(Self::Pop),
            _ => None,
        }
    }
}

/// In-memory image of a model file.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub mode: ModelMode,
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub tau: f64,
    pub mu: f64,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub b_u: Vec<f64>,
    pub b_i: Vec<f64>,
}

/// Expected array lengths (P, Q, b_u, b_i) for a mode, or a message saying
/// why the header is inconsistent.
fn expected_lens(
    mode: ModelMode,
    m: usize,
    n: usize,
    k: usize,
) -> std::result::Result<(usize, usize, usize, usize), String> {
    let mk = m.checked_mul(k).ok_or("M*k overflows")?;
    let nk = n.checked_mul(k).ok_or("N*k overflows")?;
    match mode {
        ModelMode::Rating | ModelMode::Svd => Ok((mk, nk, m, n)),
        ModelMode::Ranking => Ok((mk, nk, 0, 0)),
        ModelMode::UserAvg | ModelMode::ItemAvg | ModelMode::Pop => {
            if k != 0 {
                return Err(format!("mode {} requires k = 0, got {k}", mode.as_str()));
            }
            match mode {
                ModelMode::UserAvg => Ok((0, 0, m, 0)),
                _ => Ok((0, 0, 0, n)),
            }
        }
    }
}

impl ModelFile {
    fn check_shapes(&self) -> Result<()> {
        let (p, q, bu, bi) = expected_lens(self.mode, self.m, self.n, self.k)
            .map_err(|msg| Error::Config(format!("inconsistent model dimensions: {msg}")))?;
        for (what, expected, got) in [
            ("user positions", p, self.p.len()),
            ("item positions", q, self.q.len()),
            ("user biases", bu, self.b_u.len()),
            ("item biases", bi, self.b_i.len()),
        ] {
            if expected != got {
                return Err(Error::Shape {
                    what,
                    expected,
                    got,
                });
            }
        }
        Ok(())
    }

    pub fn from_rating(model: &TrainedRatingModel) -> Self {
        Self {
            mode: ModelMode::Rating,
            m: model.embeddings.n_users(),
            n: model.embeddings.n_items(),
            k: model.embeddings.k(),
            r_min: model.r_min,
            r_max: model.r_max,
            tau: model.biases.tau,
            mu: model.biases.mu,
            p: model.embeddings.users_flat().to_vec(),
            q: model.embeddings.items_flat().to_vec(),
            b_u: model.biases.user.clone(),
            b_i: model.biases.item.clone(),
        }
    }

    pub fn from_ranking(model: &TrainedRankingModel) -> Self {
        Self {
            mode: ModelMode::Ranking,
            m: model.embeddings.n_users(),
            n: model.embeddings.n_items(),
            k: model.embeddings.k(),
            r_min: 0.0,
            r_max: 1.0,
            tau: 0.0,
            mu: 0.0,
            p: model.embeddings.users_flat().to_vec(),
            q: model.embeddings.items_flat().to_vec(),
            b_u: Vec::new(),
            b_i: Vec::new(),
        }
    }

    pub fn from_svd(model: &TrainedSvdModel) -> Self {
        Self {
            mode: ModelMode::Svd,
            m: model.embeddings.n_users(),
            n: model.embeddings.n_items(),
            k: model.embeddings.k(),
            r_min: model.r_min,
            r_max: model.r_max,
            tau: 1.0,
            mu: model.global,
            p: model.embeddings.users_flat().to_vec(),
            q: model.embeddings.items_flat().to_vec(),
            b_u: model.b_u.clone(),
            b_i: model.b_i.clone(),
        }
    }

    pub fn from_average(model: &AverageModel) -> Self {
        let (mode, b_u, b_i) = match model.kind {
            AverageKind::User => (ModelMode::UserAvg, model.means.clone(), Vec::new()),
            AverageKind::Item => (ModelMode::ItemAvg, Vec::new(), model.means.clone()),
        };
        Self {
            mode,
            m: model.users.len(),
            n: model.items.len(),
            k: 0,
            r_min: model.r_min,
            r_max: model.r_max,
            tau: 0.0,
            mu: model.global,
            p: Vec::new(),
            q: Vec::new(),
            b_u,
            b_i,
        }
    }

    pub fn from_pop(model: &PopModel) -> Self {
        Self {
            mode: ModelMode::Pop,
            m: model.users.len(),
            n: model.items.len(),
            k: 0,
            r_min: 0.0,
            r_max: 1.0,
            tau: 0.0,
            mu: 0.0,
            p: Vec::new(),
            q: Vec::new(),
            b_u: Vec::new(),
            b_i: model.counts.iter().map(|&c| c as f64).collect(),
        }
    }

    fn check_maps(&self, users: &IdMap, items: &IdMap) -> Result<()> {
        if users.len() != self.m {
            return Err(Error::Shape {
                what: "user id map",
                expected: self.m,
                got: users.len(),
            });
        }
        if items.len() != self.n {
            return Err(Error::Shape {
                what: "item id map",
                expected: self.n,
                got: items.len(),
            });
        }
        Ok(())
    }

    fn wrong_mode(&self, wanted: &str) -> Error {
        Error::Config(format!(
            "model file holds a {} model, not {wanted}",
            self.mode.as_str()
        ))
    }

    /// Rebuild a rating predictor. The id maps come from the training data
    /// the model was fit on; training history and hyperparameters beyond
    /// what prediction needs are not stored in the file.
    pub fn into_rating_model(self, users: IdMap, items: IdMap) -> Result<TrainedRatingModel> {
        if self.mode != ModelMode::Rating {
            return Err(self.wrong_mode("rating"));
        }
        self.check_shapes()?;
        self.check_maps(&users, &items)?;
        let embeddings = EmbeddingTable::from_parts(self.m, self.n, self.k, self.p, self.q)?;
        Ok(TrainedRatingModel {
            embeddings,
            biases: BiasTable {
                user: self.b_u,
                item: self.b_i,
                mu: self.mu,
                tau: self.tau,
            },
            config: RatingConfig {
                k: self.k,
                tau: self.tau,
                ..RatingConfig::default()
            },
            r_min: self.r_min,
            r_max: self.r_max,
            users,
            items,
            history: Vec::new(),
        })
    }

    /// Rebuild a ranking predictor; `train_positives` is the per-user sorted
    /// item list from the training data, used to exclude seen items.
    pub fn into_ranking_model(
        self,
        users: IdMap,
        items: IdMap,
        train_positives: Vec<Vec<u32>>,
    ) -> Result<TrainedRankingModel> {
        if self.mode != ModelMode::Ranking {
            return Err(self.wrong_mode("ranking"));
        }
        self.check_shapes()?;
        self.check_maps(&users, &items)?;
        if train_positives.len() != self.m {
            return Err(Error::Shape {
                what: "per-user training items",
                expected: self.m,
                got: train_positives.len(),
            });
        }
        let embeddings = EmbeddingTable::from_parts(self.m, self.n, self.k, self.p, self.q)?;
        Ok(TrainedRankingModel {
            embeddings,
            config: RankingConfig {
                k: self.k,
                ..RankingConfig::default()
            },
            users,
            items,
            train_positives,
            history: Vec::new(),
        })
    }

    pub fn into_svd_model(self, users: IdMap, items: IdMap) -> Result<TrainedSvdModel> {
        if self.mode != ModelMode::Svd {
            return Err(self.wrong_mode("svd"));
        }
        self.check_shapes()?;
        self.check_maps(&users, &items)?;
        let embeddings = EmbeddingTable::from_parts(self.m, self.n, self.k, self.p, self.q)?;
        Ok(TrainedSvdModel {
            embeddings,
            b_u: self.b_u,
            b_i: self.b_i,
            global: self.mu,
            config: SvdConfig {
                k: self.k,
                ..SvdConfig::default()
            },
            r_min: self.r_min,
            r_max: self.r_max,
            users,
            items,
            history: Vec::new(),
        })
    }

    pub fn into_average_model(self, users: IdMap, items: IdMap) -> Result<AverageModel> {
        let kind = match self.mode {
            ModelMode::UserAvg => AverageKind::User,
            ModelMode::ItemAvg => AverageKind::Item,
            _ => return Err(self.wrong_mode("useravg or itemavg")),
        };
        self.check_shapes()?;
        self.check_maps(&users, &items)?;
        let means = match kind {
            AverageKind::User => self.b_u,
            AverageKind::Item => self.b_i,
        };
        Ok(AverageModel {
            kind,
            means,
            global: self.mu,
            r_min: self.r_min,
            r_max: self.r_max,
            users,
            items,
        })
    }

    pub fn into_pop_model(
        self,
        users: IdMap,
        items: IdMap,
        train_positives: Vec<Vec<u32>>,
    ) -> Result<PopModel> {
        if self.mode != ModelMode::Pop {
            return Err(self.wrong_mode("pop"));
        }
        self.check_shapes()?;
        self.check_maps(&users, &items)?;
        if train_positives.len() != self.m {
            return Err(Error::Shape {
                what: "per-user training items",
                expected: self.m,
                got: train_positives.len(),
            });
        }
        Ok(PopModel {
            counts: self.b_i.iter().map(|&c| c as u32).collect(),
            users,
            items,
            train_positives,
        })
    }
}

/// Write a model file; see the module docs for the layout.
pub fn save_model(path: &Path, model: &ModelFile) -> Result<()> {
    model.check_shapes()?;
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = fs::File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    let mut header = String::new();
    let _ = writeln!(
        header,
        "METRICF v1 {} {} {} {} {} {} {} {}",
        model.mode.as_str(),
        model.m,
        model.n,
        model.k,
        model.r_min,
        model.r_max,
        model.tau,
        model.mu
    );
    w.write_all(header.as_bytes()).map_err(io_err)?;
    for arr in [&model.p, &model.q, &model.b_u, &model.b_i] {
        for &x in arr.iter() {
            w.write_all(&x.to_le_bytes()).map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)?;
    Ok(())
}

/// Read a model file back; the inverse of `save_model`, bit for bit.
pub fn load_model(path: &Path) -> Result<ModelFile> {
    let bytes = fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let fmt_err = |msg: String| Error::ModelFormat {
        path: path.to_path_buf(),
        msg,
    };

    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| fmt_err("missing header line".into()))?;
    let header = std::str::from_utf8(&bytes[..nl])
        .map_err(|_| fmt_err("header is not valid UTF-8".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 10 || fields[0] != "METRICF" {
        return Err(fmt_err(format!(
            "bad header {header:?}: expected \"METRICF v1 <mode> <M> <N> <k> <r_min> <r_max> <tau> <mu>\""
        )));
    }
    if fields[1] != "v1" {
        return Err(fmt_err(format!(
            "unsupported format version {:?}",
            fields[1]
        )));
    }
    let mode = ModelMode::parse(fields[2])
        .ok_or_else(|| fmt_err(format!("unknown model mode {:?}", fields[2])))?;
    let dim = |s: &str, name: &str| -> Result<usize> {
        s.parse().map_err(|_| fmt_err(format!("bad {name} {s:?}")))
    };
    let num = |s: &str, name: &str| -> Result<f64> {
        let v: f64 = s
            .parse()
            .map_err(|_| fmt_err(format!("bad {name} {s:?}")))?;
        Ok(v)
    };
    let m = dim(fields[3], "user count")?;
    let n = dim(fields[4], "item count")?;
    let k = dim(fields[5], "dimension count")?;
    let r_min = num(fields[6], "r_min")?;
    let r_max = num(fields[7], "r_max")?;
    let tau = num(fields[8], "tau")?;
    let mu = num(fields[9], "mu")?;
    if r_min > r_max {
        return Err(fmt_err(format!("r_min {r_min} exceeds r_max {r_max}")));
    }

    let (lp, lq, lbu, lbi) = expected_lens(mode, m, n, k).map_err(fmt_err)?;
    let total = lp + lq + lbu + lbi;
    let body = &bytes[nl + 1..];
    let expected_bytes = total
        .checked_mul(8)
        .ok_or_else(|| fmt_err("size overflows".into()))?;
    if body.len() != expected_bytes {
        return Err(fmt_err(format!(
            "body holds {} bytes, expected {expected_bytes} ({total} parameters)",
            body.len()
        )));
    }
    let mut vals = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let mut take = |len: usize| -> Vec<f64> { vals.by_ref().take(len).collect() };
    let p = take(lp);
    let q = take(lq);
    let b_u = take(lbu);
    let b_i = take(lbi);
    Ok(ModelFile {
        mode,
        m,
        n,
        k,
        r_min,
        r_max,
        tau,
        mu,
        p,
        q,
        b_u,
        b_i,
    })
}
