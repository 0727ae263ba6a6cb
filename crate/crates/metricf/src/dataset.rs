//! Interaction loading, index mapping, train/test splitting.
//!
//! Raw files are plain text, one interaction per line:
//! `user<delim>item<delim>value[<delim>timestamp]`. Lines starting with `#`
//! and blank lines are skipped. Raw ids are kept as strings and mapped to
//! dense `u32` indices in first-appearance order.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// One raw interaction as read from disk, before indexing.
#[derive(Debug, Clone, PartialEq)]
pub struct Interaction {
    pub user: String,
    pub item: String,
    pub value: f64,
    /// Present when the line has a fourth field; parsed and then ignored.
    pub timestamp: Option<String>,
}

/// Field separator for interaction files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Delimiter {
    /// Detect per file: tab, then comma, then `::`, then any whitespace.
    #[default]
    Auto,
    Tab,
    Comma,
    /// The MovieLens-1M style `::` separator.
    DoubleColon,
    /// Any run of spaces/tabs.
    Whitespace,
}

impl Delimiter {
    /// Parse a CLI/config spelling.
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Self::Auto),
            "tab" | "\t" => Ok(Self::Tab),
            "comma" | "," => Ok(Self::Comma),
            "::" => Ok(Self::DoubleColon),
            "space" | "whitespace" => Ok(Self::Whitespace),
            other => Err(Error::Config(format!(
                "unknown delimiter {other:?} (expected auto, tab, comma, ::, or space)"
            ))),
        }
    }

    /// Pick a concrete delimiter by inspecting the first data line.
    fn detect(line: &str) -> Self {
        if line.contains('\t') {
            Self::Tab
        } else if line.contains("::") {
            Self::DoubleColon
        } else if line.contains(',') {
            Self::Comma
        } else {
            Self::Whitespace
        }
    }

    fn split<'a>(&self, line: &'a str) -> Vec<&'a str> {
        match self {
            Self::Auto => unreachable!("auto is resolved before splitting"),
            Self::Tab => line.split('\t').collect(),
            Self::Comma => line.split(',').collect(),
            Self::DoubleColon => line.split("::").collect(),
            Self::Whitespace => line.split_whitespace().collect(),
        }
    }
}

/// How to resolve repeated (user, item) pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DedupPolicy {
    /// Later feedback supersedes earlier.
    #[default]
    KeepLast,
    KeepFirst,
    /// Treat duplicates as a data error.
    Error,
}

impl DedupPolicy {
    /// Parse a CLI/config spelling.
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "keep-last" | "last" => Ok(Self::KeepLast),
            "keep-first" | "first" => Ok(Self::KeepFirst),
            "error" => Ok(Self::Error),
            other => Err(Error::Config(format!(
                "unknown dedup policy {other:?} (expected keep-last, keep-first, or error)"
            ))),
        }
    }
}

/// Bidirectional raw-id <-> dense-index map. Indices are assigned in
/// first-appearance order and are stable for a given input order.
#[derive(Debug, Clone, Default)]
pub struct IdMap {
    ids: Vec<String>,
    index: HashMap<String, u32>,
}

impl IdMap {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Existing index for a raw id, if seen.
    pub fn index_of(&self, raw: &str) -> Option<u32> {
        self.index.get(raw).copied()
    }

    /// Raw id for a dense index. Panics if out of range.
    pub fn raw(&self, index: u32) -> &str {
        &self.ids[index as usize]
    }

    pub(crate) fn get_or_insert(&mut self, raw: &str) -> u32 {
        if let Some(&i) = self.index.get(raw) {
            return i;
        }
        let i = self.ids.len() as u32;
        self.ids.push(raw.to_owned());
        self.index.insert(raw.to_owned(), i);
        i
    }
}

/// One indexed interaction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triplet {
    pub user: u32,
    pub item: u32,
    pub value: f64,
}

/// An indexed interaction set plus its id maps and value range.
///
/// Immutable after construction; splits share the maps (and therefore the
/// user/item counts) of the dataset they came from, so models trained on one
/// half can score entities that only appear in the other half.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub triplets: Vec<Triplet>,
    pub users: IdMap,
    pub items: IdMap,
    pub r_min: f64,
    pub r_max: f64,
}

impl Dataset {
    /// Number of distinct users (M).
    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    /// Number of distinct items (N).
    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn len(&self) -> usize {
        self.triplets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }

    /// Mean of stored values; 0 for an empty dataset.
    pub fn mean_value(&self) -> f64 {
        if self.triplets.is_empty() {
            return 0.0;
        }
        self.triplets.iter().map(|t| t.value).sum::<f64>() / self.triplets.len() as f64
    }

    /// Per-user sorted item-index lists (any stored triplet counts).
    pub fn user_items(&self) -> Vec<Vec<u32>> {
        let mut out = vec![Vec::new(); self.n_users()];
        for t in &self.triplets {
            out[t.user as usize].push(t.item);
        }
        for v in &mut out {
            v.sort_unstable();
        }
        out
    }
}

/// Split parameters shared by all repeats of an experiment.
#[derive(Debug, Clone, Copy)]
pub struct SplitSpec {
    /// Fraction of triplets assigned to the train half, in (0, 1).
    pub train_fraction: f64,
    pub seed: u64,
    pub n_repeats: u32,
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if self.train_fraction.is_nan() || self.train_fraction <= 0.0 || self.train_fraction >= 1.0
        {
            return Err(Error::Config(format!(
                "train_fraction must be in (0, 1), got {}",
                self.train_fraction
            )));
        }
        if self.n_repeats == 0 {
            return Err(Error::Config("n_repeats must be >= 1".into()));
        }
        Ok(())
    }
}

/// Read interactions from a delimited text file, in file order.
///
/// Each non-comment line needs at least user, item and a numeric value;
/// a fourth field is kept as an opaque timestamp, further fields error.
pub fn load_interactions(path: &Path, delimiter: Delimiter) -> Result<Vec<Interaction>> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    let mut delim = delimiter;
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if delim == Delimiter::Auto {
            delim = Delimiter::detect(trimmed);
        }
        let fields = delim.split(trimmed);
        let parse_err = |msg: String| Error::Parse {
            path: path.to_owned(),
            line: lineno,
            msg,
        };
        if fields.len() < 3 {
            return Err(parse_err(format!(
                "expected >= 3 fields, got {}",
                fields.len()
            )));
        }
        if fields.len() > 4 {
            return Err(parse_err(format!(
                "expected <= 4 fields, got {}",
                fields.len()
            )));
        }
        let value: f64 = fields[2]
            .trim()
            .parse()
            .map_err(|_| parse_err(format!("non-numeric value {:?}", fields[2])))?;
        out.push(Interaction {
            user: fields[0].trim().to_owned(),
            item: fields[1].trim().to_owned(),
            value,
            timestamp: fields.get(3).map(|s| s.trim().to_owned()),
        });
    }
    Ok(out)
}

/// Index raw interactions into a `Dataset`.
///
/// Indices are assigned in first-appearance order. Values outside
/// `[r_min, r_max]` are rejected; duplicate (user, item) pairs are resolved
/// by `dedup` (keep-last keeps the first occurrence's position in the
/// triplet list but overwrites its value).
pub fn build_dataset(
    interactions: &[Interaction],
    r_min: f64,
    r_max: f64,
    dedup: DedupPolicy,
) -> Result<Dataset> {
    if r_min >= r_max {
        return Err(Error::Config(format!(
            "r_min {r_min} must be < r_max {r_max}"
        )));
    }
    let mut users = IdMap::default();
    let mut items = IdMap::default();
    let mut triplets: Vec<Triplet> = Vec::with_capacity(interactions.len());
    let mut seen: HashMap<(u32, u32), usize> = HashMap::with_capacity(interactions.len());
    for inter in interactions {
        if inter.value.is_nan() || inter.value < r_min || inter.value > r_max {
            return Err(Error::ValueOutOfRange {
                value: inter.value,
                r_min,
                r_max,
            });
        }
        let u = users.get_or_insert(&inter.user);
        let i = items.get_or_insert(&inter.item);
        match seen.get(&(u, i)) {
            None => {
                seen.insert((u, i), triplets.len());
                triplets.push(Triplet {
                    user: u,
                    item: i,
                    value: inter.value,
                });
            }
            Some(&pos) => match dedup {
                DedupPolicy::KeepLast => triplets[pos].value = inter.value,
                DedupPolicy::KeepFirst => {}
                DedupPolicy::Error => {
                    return Err(Error::DuplicatePair {
                        user: inter.user.clone(),
                        item: inter.item.clone(),
                    })
                }
            },
        }
    }
    Ok(Dataset {
        triplets,
        users,
        items,
        r_min,
        r_max,
    })
}

/// Convenience: load + index in one call.
pub fn load_dataset(
    path: &Path,
    delimiter: Delimiter,
    r_min: f64,
    r_max: f64,
    dedup: DedupPolicy,
) -> Result<Dataset> {
    let interactions = load_interactions(path, delimiter)?;
    build_dataset(&interactions, r_min, r_max, dedup)
}

/// Partition triplets uniformly at random into train and test halves.
///
/// The generator is seeded from `(spec.seed, repeat_index)`, so every
/// `(seed, repeat)` pair names one fixed partition. The train half gets
/// `round(train_fraction * len)` triplets. Both halves share the parent's
/// id maps and value range; within each half, triplets keep their original
/// relative order.
pub fn random_split(
    dataset: &Dataset,
    spec: &SplitSpec,
    repeat_index: u32,
) -> Result<(Dataset, Dataset)> {
    spec.validate()?;
    if dataset.is_empty() {
        return Err(Error::Empty("dataset to split"));
    }
    if repeat_index >= spec.n_repeats {
        return Err(Error::Config(format!(
            "repeat_index {repeat_index} out of range (n_repeats {})",
            spec.n_repeats
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(repeat_index as u64);
    let n = dataset.len();
    let n_train = (spec.train_fraction * n as f64).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut in_train = vec![false; n];
    for &idx in &order[..n_train] {
        in_train[idx] = true;
    }
    let mut train = Vec::with_capacity(n_train);
    let mut test = Vec::with_capacity(n - n_train);
    for (idx, t) in dataset.triplets.iter().enumerate() {
        if in_train[idx] {
            train.push(*t);
        } else {
            test.push(*t);
        }
    }
    let half = |triplets: Vec<Triplet>| Dataset {
        triplets,
        users: dataset.users.clone(),
        items: dataset.items.clone(),
        r_min: dataset.r_min,
        r_max: dataset.r_max,
    };
    Ok((half(train), half(test)))
}

/// Map every stored value to 1 and the range to [0, 1]. Unobserved pairs
/// stay implicit (they read as 0 during ranking training). Idempotent.
pub fn binarize(dataset: &Dataset) -> Dataset {
    let mut out = dataset.clone();
    for t in &mut out.triplets {
        t.value = 1.0;
    }
    out.r_min = 0.0;
    out.r_max = 1.0;
    out
}

/// Write a dataset back to disk in the tab-separated interaction format,
/// using raw ids. Inverse of `load_dataset` up to delimiter choice.
pub fn save_interactions(dataset: &Dataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    let mut w = BufWriter::new(file);
    let io_err = |source| Error::Io {
        path: PathBuf::from(path),
        source,
    };
    for t in &dataset.triplets {
        writeln!(
            w,
            "{}\t{}\t{}",
            dataset.users.raw(t.user),
            dataset.items.raw(t.item),
            t.value
        )
        .map_err(io_err)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}
