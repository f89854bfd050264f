//! Genre-consistency evaluation and supporting tools.
//!
//! An item's genre is predicted by plurality vote over its `k` nearest labeled
//! neighbors (cosine). Unlabeled neighbors are skipped and the next nearest
//! labeled item takes their place. Ties between genres go to the genre whose
//! closest voter ranks highest.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use hashbrown::HashMap;
use num_traits::Float;
use rand::Rng;

use crate::corpus::{Corpus, SetBuilder, Vocabulary};
use crate::error::{Error, Result};
use crate::rng::seeded_rng;
use crate::similarity::ItemSpace;
use crate::trainer::{EmbeddingModel, Real};

/// Item token → genre label.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GenreCatalog {
    labels: HashMap<String, String>,
}

impl GenreCatalog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sets the label of `token`, replacing any previous one. Labels must be nonempty.
    pub fn insert(&mut self, token: impl Into<String>, label: impl Into<String>) -> Result<()> {
        let (token, label) = (token.into(), label.into());
        if label.trim().is_empty() {
            return Err(Error::InvalidConfig(alloc::format!(
                "empty genre label for {token:?}"
            )));
        }
        self.labels.insert(token, label);
        Ok(())
    }

    pub fn genre(&self, token: &str) -> Option<&str> {
        self.labels.get(token).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Entries sorted by token.
    pub fn entries(&self) -> Vec<(&str, &str)> {
        let mut out: Vec<(&str, &str)> = self
            .labels
            .iter()
            .map(|(t, g)| (t.as_str(), g.as_str()))
            .collect();
        out.sort_unstable();
        out
    }
}

/// Catalog labels resolved to dense genre indices for one item space.
struct LabeledSpace<'a> {
    space: &'a ItemSpace,
    genre_names: Vec<&'a str>,
    labels: Vec<Option<u32>>,
}

impl<'a> LabeledSpace<'a> {
    fn new(space: &'a ItemSpace, catalog: &'a GenreCatalog) -> Self {
        let mut names: Vec<&str> = catalog.labels.values().map(String::as_str).collect();
        names.sort_unstable();
        names.dedup();
        let lookup: HashMap<&str, u32> = names.iter().enumerate().map(|(i, &g)| (g, i as u32)).collect();
        let labels = space
            .tokens()
            .iter()
            .map(|t| catalog.genre(t).map(|g| lookup[g]))
            .collect();
        LabeledSpace {
            space,
            genre_names: names,
            labels,
        }
    }

    /// Plurality vote of the `k` nearest labeled neighbors of `item`.
    fn vote(&self, item: u32, k: usize) -> Option<Vote> {
        let n = self.space.len();
        let mut scores: Vec<(u32, f64)> = (0..n as u32)
            .filter(|&j| j != item)
            .map(|j| (j, self.space.similarity(item, j)))
            .collect();
        let order = |a: &(u32, f64), b: &(u32, f64)| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0));
        let mut window = (4 * k).min(scores.len());
        let voters: Vec<u32> = loop {
            if window < scores.len() {
                scores.select_nth_unstable_by(window - 1, order);
            }
            scores[..window].sort_unstable_by(order);
            let voters: Vec<u32> = scores[..window]
                .iter()
                .filter_map(|&(j, _)| self.labels[j as usize])
                .take(k)
                .collect();
            if voters.len() == k || window == scores.len() {
                break voters;
            }
            window = (window * 4).min(scores.len());
        };
        if voters.is_empty() {
            return None;
        }
        // (votes, rank of nearest voter) per genre
        let mut tally: BTreeMap<u32, (usize, usize)> = BTreeMap::new();
        for (rank, &g) in voters.iter().enumerate() {
            tally.entry(g).or_insert((0, rank)).0 += 1;
        }
        let (&genre, &(votes, _)) = tally
            .iter()
            .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.1 .1.cmp(&a.1 .1)))
            .expect("nonempty tally");
        Some(Vote {
            genre,
            votes,
            total: voters.len(),
        })
    }
}

struct Vote {
    genre: u32,
    votes: usize,
    total: usize,
}

/// Per-genre tallies in a [`ConsistencyReport`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GenreScore {
    pub correct: usize,
    pub evaluated: usize,
}

impl GenreScore {
    pub fn accuracy(&self) -> f64 {
        if self.evaluated == 0 {
            0.0
        } else {
            self.correct as f64 / self.evaluated as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport {
    /// Number of items considered.
    pub q: usize,
    pub k: usize,
    pub accuracy: f64,
    pub correct: usize,
    pub per_genre: BTreeMap<String, GenreScore>,
    pub evaluated_count: usize,
    /// Items without a catalog entry, without a vector, or without labeled neighbors.
    pub skipped_count: usize,
}

/// Genre consistency over the `q` most popular items (by set count).
pub fn genre_consistency(
    space: &ItemSpace,
    catalog: &GenreCatalog,
    vocab: &Vocabulary,
    q: usize,
    k: usize,
) -> Result<ConsistencyReport> {
    if q == 0 {
        return Err(Error::InvalidConfig("q must be at least 1".into()));
    }
    let mut items: Vec<u32> = (0..vocab.len() as u32).collect();
    items.sort_by(|&a, &b| vocab.count(b).cmp(&vocab.count(a)).then(a.cmp(&b)));
    items.truncate(q);
    genre_consistency_over(space, catalog, vocab, &items, k)
}

/// Genre consistency over an explicit list of vocabulary ids.
pub fn genre_consistency_over(
    space: &ItemSpace,
    catalog: &GenreCatalog,
    vocab: &Vocabulary,
    items: &[u32],
    k: usize,
) -> Result<ConsistencyReport> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    let labeled = LabeledSpace::new(space, catalog);
    let mut per_genre: BTreeMap<String, GenreScore> = BTreeMap::new();
    let (mut correct, mut evaluated) = (0, 0);
    for &item in items {
        let token = vocab.token(item);
        let (Some(row), Some(genre)) = (space.id(token), catalog.genre(token)) else {
            continue;
        };
        let Some(vote) = labeled.vote(row, k) else {
            continue;
        };
        let hit = labeled.genre_names[vote.genre as usize] == genre;
        let score = per_genre.entry(genre.to_string()).or_default();
        score.evaluated += 1;
        evaluated += 1;
        if hit {
            score.correct += 1;
            correct += 1;
        }
    }
    if evaluated == 0 {
        return Err(Error::EmptyEvaluableSet);
    }
    Ok(ConsistencyReport {
        q: items.len(),
        k,
        accuracy: correct as f64 / evaluated as f64,
        correct,
        per_genre,
        evaluated_count: evaluated,
        skipped_count: items.len() - evaluated,
    })
}

/// Items appearing in fewer than `threshold_users` sets, ascending by id.
pub fn unpopular_slice(vocab: &Vocabulary, corpus: &Corpus, threshold_users: u64) -> Vec<u32> {
    let counts = corpus.item_counts(vocab.len());
    (0..vocab.len() as u32)
        .filter(|&id| counts[id as usize] < threshold_users)
        .collect()
}

/// An item whose neighbors disagree with its catalog label.
#[derive(Debug, Clone, PartialEq)]
pub struct MislabelRecord {
    pub item: String,
    pub catalog_genre: String,
    pub predicted_genre: String,
    /// Fraction of the votes won by the predicted genre.
    pub vote_margin: f64,
}

/// Labeled items whose predicted genre differs from the catalog with vote
/// fraction at least `min_margin`, strongest disagreement first.
pub fn mislabel_report(
    space: &ItemSpace,
    catalog: &GenreCatalog,
    k: usize,
    min_margin: f64,
) -> Result<Vec<MislabelRecord>> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    let labeled = LabeledSpace::new(space, catalog);
    let mut out = Vec::new();
    for row in 0..space.len() as u32 {
        let Some(own) = labeled.labels[row as usize] else {
            continue;
        };
        let Some(vote) = labeled.vote(row, k) else {
            continue;
        };
        let margin = vote.votes as f64 / vote.total as f64;
        if vote.genre != own && margin >= min_margin {
            out.push(MislabelRecord {
                item: space.token(row).to_string(),
                catalog_genre: labeled.genre_names[own as usize].to_string(),
                predicted_genre: labeled.genre_names[vote.genre as usize].to_string(),
                vote_margin: margin,
            });
        }
    }
    out.sort_by(|a, b| b.vote_margin.total_cmp(&a.vote_margin).then_with(|| a.item.cmp(&b.item)));
    Ok(out)
}

/// Full-softmax `p(j | i) = exp(u_i·v_j) / Σ_k exp(u_i·v_k)`.
///
/// Costs `O(|W|·dim)` per call; meant as a reference for small vocabularies.
pub fn softmax_prob<T: Real>(model: &EmbeddingModel<T>, i: u32, j: u32) -> f64 {
    softmax_row(model, i)[j as usize]
}

/// `p(· | i)` over the whole vocabulary, computed with max subtraction.
pub fn softmax_row<T: Real>(model: &EmbeddingModel<T>, i: u32) -> Vec<f64> {
    let u = model.target_row(i);
    let logits: Vec<f64> = (0..model.len() as u32)
        .map(|k| {
            u.iter()
                .zip(model.context_row(k))
                .map(|(a, b)| a.to_f64().unwrap() * b.to_f64().unwrap())
                .sum()
        })
        .collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| Float::exp(l - max)).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Parameters of the synthetic genre corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub genres: usize,
    pub items_per_genre: usize,
    pub sets: usize,
    pub set_size: usize,
    /// Probability that a slot is replaced by a uniformly drawn out-of-genre item.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            genres: 13,
            items_per_genre: 100,
            sets: 50_000,
            set_size: 20,
            noise: 0.1,
            seed: 1,
        }
    }
}

impl SynthConfig {
    pub fn token(&self, genre: usize, rank: usize) -> String {
        let gw = digits(self.genres.saturating_sub(1));
        let iw = digits(self.items_per_genre.saturating_sub(1));
        alloc::format!("g{genre:0gw$}_i{rank:0iw$}")
    }

    pub fn genre_label(&self, genre: usize) -> String {
        let gw = digits(self.genres.saturating_sub(1));
        alloc::format!("genre{genre:0gw$}")
    }
}

fn digits(mut n: usize) -> usize {
    let mut d = 1;
    while n >= 10 {
        n /= 10;
        d += 1;
    }
    d
}

/// Generates sets that each draw `set_size` distinct items from one genre,
/// Zipf(1) by rank within the genre, then replace each slot with probability
/// `noise` by a distinct uniformly drawn item of another genre.
pub fn synth_corpus(config: &SynthConfig) -> Result<(Corpus, Vocabulary, GenreCatalog)> {
    let SynthConfig {
        genres,
        items_per_genre,
        sets,
        set_size,
        noise,
        seed,
    } = *config;
    if genres < 1 || items_per_genre < 1 || sets < 1 || set_size < 1 {
        return Err(Error::InvalidConfig("synthetic corpus parameters must be at least 1".into()));
    }
    if set_size > items_per_genre {
        return Err(Error::InvalidConfig(alloc::format!(
            "set_size {set_size} exceeds items_per_genre {items_per_genre}"
        )));
    }
    if !(0.0..=1.0).contains(&noise) {
        return Err(Error::InvalidConfig("noise must lie in [0, 1]".into()));
    }
    let tokens: Vec<Vec<String>> = (0..genres)
        .map(|g| (0..items_per_genre).map(|r| config.token(g, r)).collect())
        .collect();
    let weights: Vec<f64> = (0..items_per_genre).map(|r| 1.0 / (r + 1) as f64).collect();

    let mut rng = seeded_rng(seed, &[0x5e7]);
    let mut builder = SetBuilder::new();
    let mut keys: Vec<(f64, usize)> = Vec::with_capacity(items_per_genre);
    let mut slots: Vec<(usize, usize)> = Vec::with_capacity(set_size);
    for _ in 0..sets {
        let genre = rng.random_range(0..genres);
        // Weighted sampling without replacement: keep the largest ln(u)/w.
        keys.clear();
        keys.extend(weights.iter().enumerate().map(|(r, &w)| {
            let u: f64 = 1.0 - rng.random::<f64>();
            (Float::ln(u) / w, r)
        }));
        if set_size < keys.len() {
            keys.select_nth_unstable_by(set_size - 1, |a, b| b.0.total_cmp(&a.0));
        }
        slots.clear();
        slots.extend(keys[..set_size].iter().map(|&(_, r)| (genre, r)));
        slots.sort_unstable_by_key(|&(_, r)| r);
        if genres > 1 && noise > 0.0 {
            for s in 0..slots.len() {
                if rng.random::<f64>() < noise {
                    slots[s] = loop {
                        let mut g = rng.random_range(0..genres - 1);
                        if g >= genre {
                            g += 1;
                        }
                        let candidate = (g, rng.random_range(0..items_per_genre));
                        if !slots.contains(&candidate) {
                            break candidate;
                        }
                    };
                }
            }
        }
        builder.begin_set();
        for &(g, r) in &slots {
            builder.add(&tokens[g][r]);
        }
    }
    let (vocab, corpus, _) = builder.finish(1)?;
    let mut catalog = GenreCatalog::new();
    for (g, row) in tokens.into_iter().enumerate() {
        for t in row {
            catalog.insert(t, config.genre_label(g))?;
        }
    }
    Ok((corpus, vocab, catalog))
}
