//! Vocabulary and item-set corpus construction, plus frequency subsampling.
//!
//! Items are identified by dense `u32` ids. Within a set every id appears at most
//! once, so an item's occurrence count equals the number of sets containing it.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use hashbrown::{HashMap, HashSet};
use num_traits::Float;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::seeded_rng;

/// Bijection between item tokens and ids, with per-item occurrence counts.
///
/// Ids are ordered by descending count; ties keep first-appearance order.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, u32>,
    total: u64,
}

impl Vocabulary {
    /// Builds a vocabulary from explicit `(token, count)` entries in id order.
    pub fn from_counts<I, S>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, u64)>,
        S: Into<String>,
    {
        let mut tokens = Vec::new();
        let mut counts = Vec::new();
        let mut index = HashMap::new();
        for (token, count) in entries {
            let token = token.into();
            if count == 0 {
                return Err(Error::InvalidConfig(alloc::format!(
                    "item {token:?} has a zero count"
                )));
            }
            if index.insert(token.clone(), tokens.len() as u32).is_some() {
                return Err(Error::InvalidConfig(alloc::format!(
                    "duplicate item {token:?}"
                )));
            }
            tokens.push(token);
            counts.push(count);
        }
        let total = counts.iter().sum();
        Ok(Vocabulary {
            tokens,
            counts,
            index,
            total,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token(&self, id: u32) -> &str {
        &self.tokens[id as usize]
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn count(&self, id: u32) -> u64 {
        self.counts[id as usize]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Sum of all counts.
    pub fn total_tokens(&self) -> u64 {
        self.total
    }

    /// Relative frequency `count / total_tokens`.
    pub fn frequency(&self, id: u32) -> f64 {
        self.count(id) as f64 / self.total as f64
    }
}

/// A sequence of item sets stored contiguously.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Corpus {
    items: Vec<u32>,
    offsets: Vec<usize>,
}

impl Corpus {
    /// Validates and packs sets. Each set must be nonempty, duplicate-free and
    /// contain only ids below `vocab_len`.
    pub fn new<I, S>(sets: I, vocab_len: usize) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u32]>,
    {
        let mut corpus = Corpus::empty();
        let mut mark = vec![usize::MAX; vocab_len];
        for (n, set) in sets.into_iter().enumerate() {
            let set = set.as_ref();
            if set.is_empty() {
                return Err(Error::InvalidConfig(alloc::format!("set {n} is empty")));
            }
            for &id in set {
                let slot = mark.get_mut(id as usize).ok_or_else(|| {
                    Error::InvalidConfig(alloc::format!("set {n}: id {id} out of range"))
                })?;
                if *slot == n {
                    return Err(Error::InvalidConfig(alloc::format!(
                        "set {n}: duplicate id {id}"
                    )));
                }
                *slot = n;
            }
            corpus.push_set(set);
        }
        Ok(corpus)
    }

    pub(crate) fn empty() -> Self {
        Corpus {
            items: Vec::new(),
            offsets: vec![0],
        }
    }

    pub(crate) fn push_set(&mut self, set: &[u32]) {
        self.items.extend_from_slice(set);
        self.offsets.push(self.items.len());
    }

    /// Number of sets.
    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn set(&self, i: usize) -> &[u32] {
        &self.items[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[u32]> + '_ {
        (0..self.len()).map(move |i| self.set(i))
    }

    /// Total number of item occurrences over all sets.
    pub fn num_tokens(&self) -> usize {
        self.items.len()
    }

    /// Occurrence count per id, recomputed from the sets.
    pub fn item_counts(&self, vocab_len: usize) -> Vec<u64> {
        let mut counts = vec![0u64; vocab_len];
        for &id in &self.items {
            counts[id as usize] += 1;
        }
        counts
    }
}

/// Counters gathered while ingesting a stream.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestStats {
    /// Parsed events (events format) or parsed item tokens (baskets format).
    pub raw_events: u64,
    pub sets_emitted: u64,
    /// Distinct items removed by the `min_count` filter.
    pub items_dropped_minfreq: u64,
    /// Item occurrences removed by one-shot subsampling, when applied.
    pub tokens_dropped_subsample: u64,
}

/// Accumulates token sets with provisional ids, then finalizes into a
/// count-ordered vocabulary.
#[derive(Default)]
pub(crate) struct SetBuilder {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
    counts: Vec<u64>,
    items: Vec<u32>,
    offsets: Vec<usize>,
    mark: Vec<usize>,
    open: bool,
}

impl SetBuilder {
    pub(crate) fn new() -> Self {
        SetBuilder {
            offsets: vec![0],
            ..Default::default()
        }
    }

    /// Starts a new set; an unclosed previous set is closed first.
    pub(crate) fn begin_set(&mut self) {
        self.end_set();
        self.open = true;
    }

    pub(crate) fn end_set(&mut self) {
        if self.open {
            self.offsets.push(self.items.len());
            self.open = false;
        }
    }

    /// Adds an item to the current set; repeated items within a set are ignored.
    pub(crate) fn add(&mut self, token: &str) -> u32 {
        debug_assert!(self.open);
        let id = self.intern(token);
        let set_no = self.offsets.len() - 1;
        if self.mark[id as usize] != set_no {
            self.mark[id as usize] = set_no;
            self.counts[id as usize] += 1;
            self.items.push(id);
        }
        id
    }

    fn intern(&mut self, token: &str) -> u32 {
        if let Some(&id) = self.index.get(token) {
            return id;
        }
        let id = self.tokens.len() as u32;
        self.index.insert(token.to_string(), id);
        self.tokens.push(token.to_string());
        self.counts.push(0);
        self.mark.push(usize::MAX);
        id
    }

    pub(crate) fn finish(mut self, min_count: u64) -> Result<(Vocabulary, Corpus, IngestStats)> {
        self.end_set();
        let mut stats = IngestStats::default();
        let mut order: Vec<u32> = (0..self.tokens.len() as u32)
            .filter(|&id| {
                let keep = self.counts[id as usize] >= min_count;
                if !keep {
                    stats.items_dropped_minfreq += 1;
                }
                keep
            })
            .collect();
        // Stable sort keeps first appearance among equal counts.
        order.sort_by(|&a, &b| self.counts[b as usize].cmp(&self.counts[a as usize]));

        let mut remap = vec![u32::MAX; self.tokens.len()];
        for (new_id, &old) in order.iter().enumerate() {
            remap[old as usize] = new_id as u32;
        }
        let mut tokens: Vec<Option<String>> = self.tokens.into_iter().map(Some).collect();
        let vocab = Vocabulary::from_counts(order.iter().map(|&old| {
            (
                tokens[old as usize].take().expect("each id appears once"),
                self.counts[old as usize],
            )
        }))?;

        let mut corpus = Corpus::empty();
        let mut buf = Vec::new();
        for w in self.offsets.windows(2) {
            buf.clear();
            buf.extend(
                self.items[w[0]..w[1]]
                    .iter()
                    .map(|&old| remap[old as usize])
                    .filter(|&id| id != u32::MAX),
            );
            if !buf.is_empty() {
                corpus.push_set(&buf);
            }
        }
        if corpus.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        stats.sets_emitted = corpus.len() as u64;
        Ok((vocab, corpus, stats))
    }
}

fn check_min_count(min_count: u64) -> Result<()> {
    if min_count < 1 {
        return Err(Error::InvalidConfig("min_count must be at least 1".into()));
    }
    Ok(())
}

/// Groups `user_id<TAB>item_token` lines into one set per user, in order of
/// each user's first event. Blank lines are skipped; line numbers are 1-based.
pub fn ingest_events<I, S>(lines: I, min_count: u64) -> Result<(Vocabulary, Corpus, IngestStats)>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    check_min_count(min_count)?;
    let mut builder = SetBuilder::new();
    let mut users: HashMap<String, usize> = HashMap::new();
    let mut groups: Vec<Vec<u32>> = Vec::new();
    let mut seen: HashSet<(usize, u32)> = HashSet::new();
    let mut raw_events = 0u64;
    for (n, line) in lines.into_iter().enumerate() {
        let line = line.as_ref();
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |reason: &str| Error::MalformedLine {
            line: n + 1,
            reason: reason.to_string(),
        };
        let mut fields = line.split('\t');
        let (user, item) = match (fields.next(), fields.next(), fields.next()) {
            (Some(u), Some(i), None) => (u.trim(), i.trim()),
            _ => return Err(malformed("expected user_id<TAB>item_token")),
        };
        if user.is_empty() || item.is_empty() {
            return Err(malformed("empty field"));
        }
        if item.contains(char::is_whitespace) {
            return Err(malformed("item token contains whitespace"));
        }
        let group = match users.get(user) {
            Some(&g) => g,
            None => {
                users.insert(user.to_string(), groups.len());
                groups.push(Vec::new());
                groups.len() - 1
            }
        };
        let id = builder.intern(item);
        if seen.insert((group, id)) {
            groups[group].push(id);
            builder.counts[id as usize] += 1;
        }
        raw_events += 1;
    }
    for set in &groups {
        builder.items.extend_from_slice(set);
        builder.offsets.push(builder.items.len());
    }
    let (vocab, corpus, mut stats) = builder.finish(min_count)?;
    stats.raw_events = raw_events;
    Ok((vocab, corpus, stats))
}

/// One set per line, tokens separated by runs of spaces or tabs.
pub fn ingest_baskets<I, S>(lines: I, min_count: u64) -> Result<(Vocabulary, Corpus, IngestStats)>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    check_min_count(min_count)?;
    let mut builder = SetBuilder::new();
    let mut raw_events = 0u64;
    for line in lines {
        let mut tokens = line.as_ref().split_whitespace().peekable();
        if tokens.peek().is_none() {
            continue;
        }
        builder.begin_set();
        for token in tokens {
            builder.add(token);
            raw_events += 1;
        }
    }
    let (vocab, corpus, mut stats) = builder.finish(min_count)?;
    stats.raw_events = raw_events;
    Ok((vocab, corpus, stats))
}

/// `max(0, 1 - sqrt(rho / f))` with `f = count / total`.
pub fn discard_probability(count: u64, total: u64, rho: f64) -> f64 {
    if count == 0 {
        return 0.0;
    }
    let ratio = rho * total as f64 / count as f64;
    (1.0 - Float::sqrt(ratio)).clamp(0.0, 1.0)
}

/// Per-id discard probabilities for a vocabulary.
pub fn discard_table(vocab: &Vocabulary, rho: f64) -> Vec<f64> {
    vocab
        .counts()
        .iter()
        .map(|&c| discard_probability(c, vocab.total_tokens(), rho))
        .collect()
}

/// Drops each occurrence independently with its item's discard probability.
/// Sets left empty are removed. Deterministic for a fixed seed.
pub fn subsample(corpus: &Corpus, vocab: &Vocabulary, rho: f64, seed: u64) -> Corpus {
    let discard = discard_table(vocab, rho);
    let mut rng = seeded_rng(seed, &[0x5ab5]);
    subsample_with(corpus, &discard, &mut rng)
}

pub(crate) fn subsample_with<R: Rng + ?Sized>(
    corpus: &Corpus,
    discard: &[f64],
    rng: &mut R,
) -> Corpus {
    let mut out = Corpus::empty();
    let mut buf = Vec::new();
    for set in corpus.iter() {
        buf.clear();
        for &id in set {
            let p = discard[id as usize];
            if p <= 0.0 || rng.random::<f64>() >= p {
                buf.push(id);
            }
        }
        if !buf.is_empty() {
            out.push_set(&buf);
        }
    }
    out
}
