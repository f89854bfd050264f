//! Skip-gram with negative sampling over item sets.
//!
//! Every ordered pair of distinct items in a set is a positive `(target, context)`
//! example. For each positive pair `N` negative contexts are drawn from the
//! unigram distribution raised to the 3/4 power, and one step of stochastic
//! gradient ascent is taken on
//!
//! ```text
//! log σ(u_t·v_c) + Σ_k log σ(−u_t·v_k)
//! ```
//!
//! where `u` rows are target vectors and `v` rows are context vectors.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt::{self, Debug, Display};
use core::marker::PhantomData;
use core::ops::{AddAssign, Range};
use core::str::FromStr;
use core::sync::atomic::{AtomicU64, Ordering};

use num_traits::Float;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::corpus::{discard_table, subsample_with, Corpus, Vocabulary};
use crate::error::{Error, Result};
use crate::rng::{seeded_rng, ItemRng};

/// Floating point type usable for model parameters.
pub trait Real: Float + AddAssign + Debug + Default + Send + Sync + 'static {}

impl Real for f32 {}
impl Real for f64 {}

/// Logistic function, branched on sign so `exp` never overflows.
#[inline]
pub fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// `ln σ(x)` without forming `σ(x)` first.
#[inline]
pub fn log_sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Tabulated σ over [−6, 6] with 1000 bins, saturating outside.
#[derive(Debug, Clone)]
pub struct SigmoidTable {
    values: Vec<f32>,
}

impl SigmoidTable {
    const BINS: usize = 1000;
    const MAX: f32 = 6.0;

    pub fn new() -> Self {
        let values = (0..Self::BINS)
            .map(|i| {
                let x = (i as f64 + 0.5) / Self::BINS as f64 * 2.0 * Self::MAX as f64
                    - Self::MAX as f64;
                sigmoid(x) as f32
            })
            .collect();
        SigmoidTable { values }
    }

    #[inline]
    pub fn get(&self, x: f32) -> f32 {
        if x >= Self::MAX {
            1.0
        } else if x <= -Self::MAX {
            0.0
        } else {
            let bin = ((x + Self::MAX) * (Self::BINS as f32 / (2.0 * Self::MAX))) as usize;
            self.values[bin.min(Self::BINS - 1)]
        }
    }
}

impl Default for SigmoidTable {
    fn default() -> Self {
        Self::new()
    }
}

/// How positive pairs are formed from a set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairMode {
    /// Every ordered pair of distinct items.
    AllPairs,
    /// Shuffle the set, then use a symmetric context window of this radius.
    ShuffledWindow(usize),
}

impl Display for PairMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PairMode::AllPairs => f.write_str("all"),
            PairMode::ShuffledWindow(c) => write!(f, "window:{c}"),
        }
    }
}

impl FromStr for PairMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "all" {
            return Ok(PairMode::AllPairs);
        }
        let bad = || Error::InvalidConfig(alloc::format!("pair mode {s:?}: expected all or window:C"));
        let radius = s.strip_prefix("window:").ok_or_else(bad)?;
        match radius.parse::<usize>() {
            Ok(c) if c >= 1 => Ok(PairMode::ShuffledWindow(c)),
            _ => Err(bad()),
        }
    }
}

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub dim: usize,
    pub negatives: usize,
    pub epochs: usize,
    /// Subsampling threshold; `None` disables subsampling.
    pub rho: Option<f64>,
    pub initial_lr: f64,
    pub final_lr: f64,
    pub pair_mode: PairMode,
    pub seed: u64,
    pub threads: usize,
    /// Sets larger than this are downsampled per epoch before pair generation.
    pub max_set_size: usize,
    /// Subsample once before training instead of afresh every epoch.
    pub subsample_once: bool,
    /// Use the tabulated sigmoid in the update loop.
    pub fast_sigmoid: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 100,
            negatives: 15,
            epochs: 20,
            rho: Some(1e-3),
            initial_lr: 0.025,
            final_lr: 1e-4,
            pair_mode: PairMode::AllPairs,
            seed: 1,
            threads: 1,
            max_set_size: 500,
            subsample_once: false,
            fast_sigmoid: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if self.dim < 1 {
            return fail("dim must be at least 1");
        }
        if self.negatives < 1 {
            return fail("negatives must be at least 1");
        }
        if self.epochs < 1 {
            return fail("epochs must be at least 1");
        }
        if self.threads < 1 {
            return fail("threads must be at least 1");
        }
        if self.max_set_size < 2 {
            return fail("max_set_size must be at least 2");
        }
        if let Some(rho) = self.rho {
            if !(rho > 0.0) {
                return fail("rho must be positive");
            }
        }
        if !(self.final_lr > 0.0 && self.final_lr <= self.initial_lr && self.initial_lr.is_finite())
        {
            return fail("learning rates must satisfy 0 < final_lr <= initial_lr");
        }
        if let PairMode::ShuffledWindow(0) = self.pair_mode {
            return fail("window radius must be at least 1");
        }
        Ok(())
    }
}

/// Alias table realizing `P(i) ∝ counts[i]^0.75`.
#[derive(Debug, Clone)]
pub struct NegativeTable {
    threshold: Vec<u32>,
    alias: Vec<u32>,
    probs: Vec<f64>,
}

impl NegativeTable {
    pub fn from_vocab(vocab: &Vocabulary) -> Result<Self> {
        Self::from_counts(vocab.counts(), 0.75)
    }

    /// Builds the table for weights `count^power` (Vose's method).
    pub fn from_counts(counts: &[u64], power: f64) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let weights: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(power)).collect();
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0) {
            return Err(Error::InvalidConfig("all negative-sampling weights are zero".into()));
        }
        let n = weights.len();
        let probs: Vec<f64> = weights.iter().map(|w| w / sum).collect();
        let mut scaled: Vec<f64> = probs.iter().map(|p| p * n as f64).collect();
        let mut alias: Vec<u32> = (0..n as u32).collect();
        let mut accept = vec![1.0f64; n];
        let (mut small, mut large): (Vec<usize>, Vec<usize>) =
            (0..n).partition(|&i| scaled[i] < 1.0);
        while let (Some(&s), Some(&l)) = (small.last(), large.last()) {
            small.pop();
            accept[s] = scaled[s];
            alias[s] = l as u32;
            scaled[l] = (scaled[l] + scaled[s]) - 1.0;
            if scaled[l] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        // Leftovers are 1 up to rounding.
        for i in small.into_iter().chain(large) {
            accept[i] = 1.0;
        }
        let threshold = accept
            .iter()
            .map(|&a| {
                if a >= 1.0 {
                    u32::MAX
                } else {
                    (a * 4_294_967_296.0) as u32
                }
            })
            .collect();
        Ok(NegativeTable {
            threshold,
            alias,
            probs,
        })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Target probability of drawing `id`.
    pub fn probability(&self, id: u32) -> f64 {
        self.probs[id as usize]
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let r = rng.next_u64();
        let column = (((r >> 32) * self.threshold.len() as u64) >> 32) as usize;
        if (r as u32) < self.threshold[column] || self.threshold[column] == u32::MAX {
            column as u32
        } else {
            self.alias[column]
        }
    }
}

/// Positive pairs for a duplicate-free set.
pub fn generate_pairs<R: Rng + ?Sized>(set: &[u32], mode: PairMode, rng: &mut R) -> Vec<(u32, u32)> {
    let mut buf = set.to_vec();
    let mut out = Vec::new();
    pairs_into(&mut buf, mode, rng, &mut out);
    out
}

/// Window pairs over an already ordered sequence: each position paired with
/// every other position at distance at most `radius`.
pub fn window_pairs(ordered: &[u32], radius: usize) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    window_pairs_into(ordered, radius, &mut out);
    out
}

fn window_pairs_into(ordered: &[u32], radius: usize, out: &mut Vec<(u32, u32)>) {
    let k = ordered.len();
    for i in 0..k {
        let lo = i.saturating_sub(radius);
        let hi = (i + radius).min(k.saturating_sub(1));
        for j in lo..=hi {
            if j != i {
                out.push((ordered[i], ordered[j]));
            }
        }
    }
}

fn pairs_into<R: Rng + ?Sized>(
    set: &mut [u32],
    mode: PairMode,
    rng: &mut R,
    out: &mut Vec<(u32, u32)>,
) {
    out.clear();
    if set.len() < 2 {
        return;
    }
    match mode {
        PairMode::AllPairs => {
            for &a in set.iter() {
                for &b in set.iter() {
                    if a != b {
                        out.push((a, b));
                    }
                }
            }
        }
        PairMode::ShuffledWindow(radius) => {
            set.shuffle(rng);
            window_pairs_into(set, radius, out);
        }
    }
}

#[inline]
fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [T::zero(); 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        let x: &[T; 8] = x.try_into().unwrap();
        let y: &[T; 8] = y.try_into().unwrap();
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut sum = ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]));
    for (&x, &y) in ca.remainder().iter().zip(cb.remainder()) {
        sum += x * y;
    }
    sum
}

#[inline]
fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Target matrix `U` and context matrix `V`, both `|W| × dim`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel<T = f32> {
    vocab: Vocabulary,
    dim: usize,
    target: Vec<T>,
    context: Vec<T>,
}

impl<T: Real> EmbeddingModel<T> {
    /// `U` uniform in `[−0.5/dim, 0.5/dim]`, `V` zero.
    pub fn initialized(vocab: Vocabulary, dim: usize, seed: u64) -> Self {
        let mut rng = seeded_rng(seed, &[u64::MAX]);
        let scale = 1.0 / dim as f64;
        let target = (0..vocab.len() * dim)
            .map(|_| T::from((rng.random::<f64>() - 0.5) * scale).unwrap())
            .collect();
        let context = vec![T::zero(); vocab.len() * dim];
        EmbeddingModel {
            vocab,
            dim,
            target,
            context,
        }
    }

    pub fn from_parts(vocab: Vocabulary, dim: usize, target: Vec<T>, context: Vec<T>) -> Result<Self> {
        let expected = vocab.len() * dim;
        for len in [target.len(), context.len()] {
            if len != expected {
                return Err(Error::DimensionMismatch {
                    left: len,
                    right: expected,
                });
            }
        }
        Ok(EmbeddingModel {
            vocab,
            dim,
            target,
            context,
        })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    /// `U`, row-major.
    pub fn target(&self) -> &[T] {
        &self.target
    }

    /// `V`, row-major.
    pub fn context(&self) -> &[T] {
        &self.context
    }

    pub fn target_row(&self, id: u32) -> &[T] {
        let start = id as usize * self.dim;
        &self.target[start..start + self.dim]
    }

    pub fn context_row(&self, id: u32) -> &[T] {
        let start = id as usize * self.dim;
        &self.context[start..start + self.dim]
    }

    pub fn is_finite(&self) -> bool {
        self.target.iter().chain(&self.context).all(|x| x.is_finite())
    }

    /// `log σ(u_t·v_c) + Σ log σ(−u_t·v_n)`; never positive.
    pub fn pair_loss(&self, target: u32, context: u32, negatives: &[u32]) -> T {
        let u = self.target_row(target);
        let mut loss = log_sigmoid(dot(u, self.context_row(context)));
        for &n in negatives {
            loss += log_sigmoid(-dot(u, self.context_row(n)));
        }
        loss
    }

    /// One gradient-ascent step on [`pair_loss`](Self::pair_loss).
    pub fn sgns_step(&mut self, target: u32, context: u32, negatives: &[u32], lr: T) {
        let mut scratch = vec![T::zero(); self.dim];
        let dim = self.dim;
        let params = SharedParams::new(&mut self.target, &mut self.context, dim);
        params.sgns_update(target, context, negatives, lr, &mut scratch, sigmoid::<T>);
    }

    pub(crate) fn params(&mut self) -> SharedParams<'_, T> {
        let dim = self.dim;
        SharedParams::new(&mut self.target, &mut self.context, dim)
    }
}

/// Raw view of `U` and `V` shared by training workers.
///
/// Workers write rows without synchronization (Hogwild). Concurrent updates
/// may interleave on a row; the update is a bounded axpy so the result stays
/// finite. With a single worker the view is an ordinary exclusive borrow.
pub struct SharedParams<'a, T> {
    target: *mut T,
    context: *mut T,
    rows: usize,
    dim: usize,
    _borrow: PhantomData<&'a mut [T]>,
}

impl<T> Clone for SharedParams<'_, T> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<T> Copy for SharedParams<'_, T> {}

// SAFETY: the pointers come from an exclusive borrow that outlives every copy.
// Cross-thread writes are the deliberate Hogwild races; no worker frees or
// reallocates the buffers.
unsafe impl<T: Send> Send for SharedParams<'_, T> {}
unsafe impl<T: Send> Sync for SharedParams<'_, T> {}

impl<'a, T: Real> SharedParams<'a, T> {
    pub fn new(target: &'a mut [T], context: &'a mut [T], dim: usize) -> Self {
        assert_eq!(target.len(), context.len());
        assert!(dim > 0 && target.len() % dim == 0);
        SharedParams {
            rows: target.len() / dim,
            target: target.as_mut_ptr(),
            context: context.as_mut_ptr(),
            dim,
            _borrow: PhantomData,
        }
    }

    #[inline]
    #[allow(clippy::mut_from_ref)]
    unsafe fn row(&self, base: *mut T, id: u32) -> &mut [T] {
        let id = id as usize;
        assert!(id < self.rows);
        core::slice::from_raw_parts_mut(base.add(id * self.dim), self.dim)
    }

    /// Updates `v_c`, each `v_n` and finally `u_t`, accumulating the `u_t`
    /// gradient from the context rows as they were before their own update.
    #[inline]
    pub(crate) fn sgns_update<S: Fn(T) -> T>(
        &self,
        target: u32,
        context: u32,
        negatives: &[u32],
        lr: T,
        scratch: &mut [T],
        sig: S,
    ) {
        scratch.fill(T::zero());
        // SAFETY: `target` and `context` point to distinct allocations, so the
        // `u` row never aliases a `v` row within this thread.
        unsafe {
            let u = self.row(self.target, target);
            let samples =
                core::iter::once((context, T::one())).chain(negatives.iter().map(|&n| (n, T::zero())));
            for (id, label) in samples {
                let v = self.row(self.context, id);
                let g = (label - sig(dot(u, v))) * lr;
                axpy(g, v, scratch);
                axpy(g, u, v);
            }
            axpy(T::one(), scratch, u);
        }
    }
}

/// Subsampled sets and their visiting order for one epoch.
#[derive(Debug, Clone)]
pub struct EpochPlan {
    epoch: usize,
    sets: Corpus,
    order: Vec<u32>,
    chunks: Vec<Range<usize>>,
}

impl EpochPlan {
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn sets(&self) -> &Corpus {
        &self.sets
    }

    pub fn num_chunks(&self) -> usize {
        self.chunks.len()
    }
}

/// Owns the model during training and hands out per-chunk jobs.
///
/// Single-threaded callers run the jobs in order; the `itemvec` crate runs
/// them on scoped threads.
pub struct Trainer {
    config: TrainConfig,
    table: NegativeTable,
    discard: Option<Vec<f64>>,
    sigmoid_table: Option<SigmoidTable>,
    base: Corpus,
    model: EmbeddingModel<f32>,
    expected_pairs: f64,
    done: AtomicU64,
}

impl Trainer {
    pub fn new(corpus: &Corpus, vocab: &Vocabulary, config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        if corpus.is_empty() || vocab.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        // Negatives follow the pre-subsampling counts.
        let table = NegativeTable::from_vocab(vocab)?;
        let mut discard = config.rho.map(|rho| discard_table(vocab, rho));
        let base = match (&discard, config.subsample_once) {
            (Some(d), true) => {
                let mut rng = seeded_rng(config.seed, &[0x5ab5]);
                let thinned = subsample_with(corpus, d, &mut rng);
                discard = None;
                thinned
            }
            _ => corpus.clone(),
        };
        let per_epoch = expected_pairs(&base, discard.as_deref(), config);
        if !(per_epoch > 0.0) {
            return Err(Error::NothingToTrain);
        }
        Ok(Trainer {
            config: config.clone(),
            table,
            discard,
            sigmoid_table: config.fast_sigmoid.then(SigmoidTable::new),
            base,
            model: EmbeddingModel::initialized(vocab.clone(), config.dim, config.seed),
            expected_pairs: per_epoch * config.epochs as f64,
            done: AtomicU64::new(0),
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn model(&self) -> &EmbeddingModel<f32> {
        &self.model
    }

    /// Pairs processed so far.
    pub fn pairs_done(&self) -> u64 {
        self.done.load(Ordering::Relaxed)
    }

    /// Scheduled pair count over all epochs (an expectation under subsampling).
    pub fn expected_pairs(&self) -> f64 {
        self.expected_pairs
    }

    pub fn plan_epoch(&self, epoch: usize) -> EpochPlan {
        let sets = match &self.discard {
            Some(d) => {
                let mut rng = seeded_rng(self.config.seed, &[epoch as u64, 0]);
                subsample_with(&self.base, d, &mut rng)
            }
            None => self.base.clone(),
        };
        let mut order: Vec<u32> = (0..sets.len() as u32).collect();
        order.shuffle(&mut seeded_rng(self.config.seed, &[epoch as u64, 1]));
        let workers = self.config.threads.min(order.len()).max(1);
        let chunks = (0..workers)
            .map(|w| (w * order.len() / workers)..((w + 1) * order.len() / workers))
            .collect();
        EpochPlan {
            epoch,
            sets,
            order,
            chunks,
        }
    }

    /// Runs one epoch. `exec` receives one job per chunk and must run them all.
    pub fn run_epoch<F>(&mut self, plan: &EpochPlan, exec: F)
    where
        F: FnOnce(Vec<ChunkJob<'_>>),
    {
        let shared = JobContext {
            config: &self.config,
            table: &self.table,
            sigmoid_table: self.sigmoid_table.as_ref(),
            done: &self.done,
            expected_pairs: self.expected_pairs,
        };
        let params = self.model.params();
        let jobs = plan
            .chunks
            .iter()
            .enumerate()
            .map(|(w, range)| ChunkJob {
                params,
                ctx: JobContext { ..shared },
                sets: &plan.sets,
                order: &plan.order[range.clone()],
                rng: seeded_rng(self.config.seed, &[plan.epoch as u64, 2, w as u64]),
            })
            .collect();
        exec(jobs);
    }

    pub fn finish(self) -> Result<EmbeddingModel<f32>> {
        if self.pairs_done() == 0 {
            return Err(Error::NothingToTrain);
        }
        Ok(self.model)
    }
}

fn expected_pairs(corpus: &Corpus, discard: Option<&[f64]>, config: &TrainConfig) -> f64 {
    let cap = config.max_set_size as f64;
    corpus
        .iter()
        .map(|set| {
            let (s1, s2) = set.iter().fold((0.0, 0.0), |(s1, s2), &id| {
                let keep = discard.map_or(1.0, |d| 1.0 - d[id as usize]);
                (s1 + keep, s2 + keep * keep)
            });
            match config.pair_mode {
                PairMode::AllPairs => (s1 * s1 - s2).min(cap * (cap - 1.0)).max(0.0),
                PairMode::ShuffledWindow(radius) => {
                    // Small sets yield every ordered pair; beyond radius + 1 items
                    // the count grows linearly in the set size.
                    let c = radius as f64;
                    let k = s1.min(cap);
                    if k <= c + 1.0 {
                        (s1 * s1 - s2).max(0.0)
                    } else {
                        c * (2.0 * k - c - 1.0)
                    }
                }
            }
        })
        .sum()
}

#[derive(Clone, Copy)]
struct JobContext<'a> {
    config: &'a TrainConfig,
    table: &'a NegativeTable,
    sigmoid_table: Option<&'a SigmoidTable>,
    done: &'a AtomicU64,
    expected_pairs: f64,
}

/// A contiguous slice of one epoch's set order, with its own RNG stream.
pub struct ChunkJob<'a> {
    params: SharedParams<'a, f32>,
    ctx: JobContext<'a>,
    sets: &'a Corpus,
    order: &'a [u32],
    rng: ItemRng,
}

const SYNC_EVERY: u64 = 10_000;
const MAX_REDRAWS: usize = 8;

impl ChunkJob<'_> {
    /// Trains on every set of the chunk; returns the number of pairs processed.
    pub fn run(mut self) -> u64 {
        match self.ctx.sigmoid_table {
            Some(table) => self.run_with(|x| table.get(x)),
            None => self.run_with(sigmoid::<f32>),
        }
    }

    fn run_with<S: Fn(f32) -> f32 + Copy>(&mut self, sig: S) -> u64 {
        let config = self.ctx.config;
        let (lr0, lr1) = (config.initial_lr, config.final_lr);
        let mut scratch = vec![0f32; config.dim];
        let mut items = Vec::new();
        let mut pairs = Vec::new();
        let mut negatives = Vec::with_capacity(config.negatives);
        let mut base = self.ctx.done.load(Ordering::Relaxed);
        let mut local = 0u64;
        let mut total = 0u64;
        for &set_idx in self.order {
            items.clear();
            items.extend_from_slice(self.sets.set(set_idx as usize));
            if items.len() > config.max_set_size {
                let (chosen, _) = items.partial_shuffle(&mut self.rng, config.max_set_size);
                let chosen = chosen.to_vec();
                items = chosen;
            }
            pairs_into(&mut items, config.pair_mode, &mut self.rng, &mut pairs);
            for &(target, context) in &pairs {
                let progress = ((base + local) as f64 / self.ctx.expected_pairs).min(1.0);
                let lr = (lr0 - (lr0 - lr1) * progress).max(lr1) as f32;
                negatives.clear();
                for _ in 0..config.negatives {
                    let mut draw = self.ctx.table.sample(&mut self.rng);
                    let mut redraws = 0;
                    while draw == context && redraws < MAX_REDRAWS {
                        draw = self.ctx.table.sample(&mut self.rng);
                        redraws += 1;
                    }
                    if draw != context {
                        negatives.push(draw);
                    }
                }
                self.params
                    .sgns_update(target, context, &negatives, lr, &mut scratch, sig);
                local += 1;
                if local == SYNC_EVERY {
                    base = self.ctx.done.fetch_add(local, Ordering::Relaxed) + local;
                    total += local;
                    local = 0;
                }
            }
        }
        self.ctx.done.fetch_add(local, Ordering::Relaxed);
        total + local
    }
}

/// Single-threaded training. With a fixed seed the result is bit-reproducible.
///
/// `config.threads` still determines how each epoch is chunked, so results match
/// the parallel driver's chunking, but the chunks run one after another here.
pub fn train(corpus: &Corpus, vocab: &Vocabulary, config: &TrainConfig) -> Result<EmbeddingModel<f32>> {
    let mut trainer = Trainer::new(corpus, vocab, config)?;
    for epoch in 0..config.epochs {
        let plan = trainer.plan_epoch(epoch);
        trainer.run_epoch(&plan, |jobs| {
            for job in jobs {
                job.run();
            }
        });
    }
    trainer.finish()
}

/// Mean [`pair_loss`](EmbeddingModel::pair_loss) over all ordered pairs of the
/// corpus, with `negatives` draws per pair from a stream fixed by `seed`.
pub fn mean_pair_loss<T: Real>(
    model: &EmbeddingModel<T>,
    corpus: &Corpus,
    negatives: usize,
    seed: u64,
) -> Result<f64> {
    let table = NegativeTable::from_vocab(model.vocab())?;
    let mut rng = seeded_rng(seed, &[0x1055]);
    let mut sum = 0.0;
    let mut count = 0u64;
    let mut negs = Vec::with_capacity(negatives);
    for set in corpus.iter() {
        for &t in set {
            for &c in set {
                if t == c {
                    continue;
                }
                negs.clear();
                while negs.len() < negatives {
                    let n = table.sample(&mut rng);
                    if n != c || table.len() == 1 {
                        negs.push(n);
                    }
                }
                sum += model.pair_loss(t, c, &negs).to_f64().unwrap();
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::NothingToTrain);
    }
    Ok(sum / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::ingest_baskets;
    use alloc::string::{String, ToString};
    use rand::SeedableRng;

    fn vocab(n: usize) -> Vocabulary {
        Vocabulary::from_counts((0..n).map(|i| (alloc::format!("i{i}"), 1 + i as u64))).unwrap()
    }

    #[test]
    fn sigmoid_basics() {
        assert_eq!(sigmoid(0.0f64), 0.5);
        for x in [-30.0f64, -3.2, -0.1, 0.7, 5.0, 19.0] {
            assert!((sigmoid(-x) - (1.0 - sigmoid(x))).abs() < 1e-15);
        }
        // σ(37) = 1 − 8.53e−17, rounds to 1 in double precision
        let s = sigmoid(37.0f64);
        assert!(s <= 1.0 && 1.0 - s < 1e-16);
        for x in [700.0f64, -700.0, 745.0, -745.0] {
            let s = sigmoid(x);
            assert!(s.is_finite() && (0.0..=1.0).contains(&s));
        }
        assert!(sigmoid(-700.0f32) >= 0.0 && sigmoid(700.0f32) <= 1.0);
        assert!((log_sigmoid(-800.0f64) + 800.0).abs() < 1e-9);
    }

    #[test]
    fn sigmoid_table_close_to_exact() {
        let table = SigmoidTable::new();
        for i in -700..=700 {
            let x = i as f32 * 0.01;
            assert!((table.get(x) - sigmoid(x)).abs() < 0.01, "{x}");
        }
        assert_eq!(table.get(100.0), 1.0);
        assert_eq!(table.get(-100.0), 0.0);
    }

    #[test]
    fn pair_mode_parsing() {
        assert_eq!("all".parse::<PairMode>().unwrap(), PairMode::AllPairs);
        assert_eq!("window:3".parse::<PairMode>().unwrap(), PairMode::ShuffledWindow(3));
        assert!("window:0".parse::<PairMode>().is_err());
        assert!("window".parse::<PairMode>().is_err());
        assert_eq!(PairMode::ShuffledWindow(2).to_string(), "window:2");
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = [
            TrainConfig { epochs: 0, ..Default::default() },
            TrainConfig { dim: 0, ..Default::default() },
            TrainConfig { negatives: 0, ..Default::default() },
            TrainConfig { final_lr: 0.1, ..Default::default() },
            TrainConfig { final_lr: 0.0, ..Default::default() },
            TrainConfig { rho: Some(0.0), ..Default::default() },
            TrainConfig { threads: 0, ..Default::default() },
        ];
        for c in bad {
            assert!(matches!(c.validate(), Err(Error::InvalidConfig(_))), "{c:?}");
        }
    }

    #[test]
    fn all_pairs_enumeration() {
        let mut rng = seeded_rng(0, &[]);
        let pairs = generate_pairs(&[0, 1, 2], PairMode::AllPairs, &mut rng);
        assert_eq!(pairs, vec![(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)]);
        assert!(generate_pairs(&[5], PairMode::AllPairs, &mut rng).is_empty());
        assert!(generate_pairs(&[5], PairMode::ShuffledWindow(2), &mut rng).is_empty());
    }

    #[test]
    fn window_pairs_identity_order() {
        let pairs = window_pairs(&[0, 1, 2, 3], 1);
        assert_eq!(pairs, vec![(0, 1), (1, 0), (1, 2), (2, 1), (2, 3), (3, 2)]);
    }

    #[test]
    fn window_expectation_matches_enumeration() {
        let mut rng = seeded_rng(6, &[]);
        for radius in 1..5 {
            let config = TrainConfig {
                pair_mode: PairMode::ShuffledWindow(radius),
                ..TrainConfig::default()
            };
            for k in 1..12u32 {
                let set: Vec<u32> = (0..k).collect();
                let corpus = Corpus::new([set.clone()], k as usize).unwrap();
                let enumerated = generate_pairs(&set, config.pair_mode, &mut rng).len() as f64;
                assert_eq!(expected_pairs(&corpus, None, &config), enumerated, "k={k} c={radius}");
            }
        }
    }

    #[test]
    fn heavily_subsampled_window_still_trains() {
        let sets: Vec<Vec<u32>> = (0..200).map(|i| (0..3).map(|j| (i + j) % 6).collect()).collect();
        let corpus = Corpus::new(sets, 6).unwrap();
        let vocab = Vocabulary::from_counts(
            corpus.item_counts(6).iter().enumerate().map(|(i, &c)| (alloc::format!("i{i}"), c)),
        )
        .unwrap();
        let config = TrainConfig {
            dim: 4,
            epochs: 2,
            pair_mode: PairMode::ShuffledWindow(2),
            ..TrainConfig::default()
        };
        let model = train(&corpus, &vocab, &config).unwrap();
        assert!(model.is_finite());
    }

    #[test]
    fn shuffled_window_covers_set_items() {
        let mut rng = seeded_rng(4, &[]);
        let pairs = generate_pairs(&[3, 7, 9, 11, 12], PairMode::ShuffledWindow(1), &mut rng);
        assert_eq!(pairs.len(), 8);
        assert!(pairs.iter().all(|&(a, b)| a != b));
    }

    #[test]
    fn negative_table_probabilities() {
        let t = NegativeTable::from_counts(&[16, 1], 0.75).unwrap();
        assert!((t.probability(0) - 8.0 / 9.0).abs() < 1e-12);
        let t = NegativeTable::from_counts(&[1, 1], 0.75).unwrap();
        assert!((t.probability(0) - 0.5).abs() < 1e-15);
        let t = NegativeTable::from_counts(&[3], 0.75).unwrap();
        let mut rng = seeded_rng(1, &[]);
        assert!((0..1000).all(|_| t.sample(&mut rng) == 0));
        assert!(NegativeTable::from_counts(&[], 0.75).is_err());
    }

    #[test]
    fn negative_table_empirical_two_items() {
        let t = NegativeTable::from_counts(&[16, 1], 0.75).unwrap();
        let mut rng = seeded_rng(2, &[]);
        let n = 200_000;
        let hits = (0..n).filter(|_| t.sample(&mut rng) == 0).count() as f64 / n as f64;
        let p: f64 = 8.0 / 9.0;
        assert!((hits - p).abs() < 4.0 * (p * (1.0 - p) / n as f64).sqrt());
    }

    #[test]
    fn zero_target_step() {
        let v = vocab(4);
        let dim = 3;
        let target = vec![0.0f64; 12];
        let context: Vec<f64> = (0..12).map(|i| i as f64 * 0.1 - 0.4).collect();
        let mut model = EmbeddingModel::from_parts(v, dim, target, context.clone()).unwrap();
        let lr = 0.3;
        model.sgns_step(0, 1, &[2, 3], lr);
        // v rows unchanged since u_t = 0
        assert_eq!(model.context(), &context[..]);
        for k in 0..dim {
            let expected = lr * (0.5 * context[3 + k] - 0.5 * context[6 + k] - 0.5 * context[9 + k]);
            assert!((model.target_row(0)[k] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_lr_is_identity() {
        let mut model = EmbeddingModel::<f32>::initialized(vocab(5), 4, 3);
        let mut rng = ItemRng::seed_from_u64(5);
        let ctx: Vec<f32> = (0..20).map(|_| rng.random::<f32>() - 0.5).collect();
        model = EmbeddingModel::from_parts(model.vocab().clone(), 4, model.target().to_vec(), ctx).unwrap();
        let before = model.clone();
        model.sgns_step(1, 2, &[3, 4, 0], 0.0);
        assert_eq!(model, before);
    }

    #[test]
    fn pair_loss_values() {
        let model = EmbeddingModel::<f64>::from_parts(vocab(3), 2, vec![0.0; 6], vec![0.0; 6]).unwrap();
        let loss = model.pair_loss(0, 1, &[2, 2]);
        assert!((loss - 3.0 * 0.5f64.ln()).abs() < 1e-12);
        assert!((loss + 2.0794415416798357).abs() < 1e-12);

        // m = 2 concrete case against scalar evaluation
        let target = vec![0.3, -0.2, 1.1, 0.4, 0.0, 0.0];
        let context = vec![0.5, 0.25, -0.7, 0.9, 0.2, -1.3];
        let model = EmbeddingModel::<f64>::from_parts(vocab(3), 2, target, context).unwrap();
        let s = |x: f64| 1.0 / (1.0 + (-x).exp());
        let uc = 1.1 * 0.5 + 0.4 * 0.25;
        let un = 1.1 * 0.2 + 0.4 * -1.3;
        let expected = s(uc).ln() + s(-un).ln();
        assert!((model.pair_loss(1, 0, &[2]) - expected).abs() < 1e-14);

        // saturation
        let model = EmbeddingModel::<f64>::from_parts(vocab(2), 1, vec![50.0, 0.0], vec![50.0, -50.0]).unwrap();
        let loss = model.pair_loss(0, 0, &[1]);
        assert!(loss <= 0.0 && loss > -1e-300_f64.max(-1e-100));
    }

    #[test]
    fn training_separates_clusters() {
        // Two clusters of eight items; sets are random 4-subsets of one cluster.
        // Items a, b live in the first cluster, c, d in the second.
        let first = ["a", "b", "x1", "x2", "x3", "x4", "x5", "x6"];
        let second = ["c", "d", "y1", "y2", "y3", "y4", "y5", "y6"];
        let mut rng = seeded_rng(99, &[]);
        let mut lines: Vec<String> = Vec::new();
        for i in 0..400 {
            let mut pool = if i % 2 == 0 { first } else { second };
            pool.shuffle(&mut rng);
            lines.push(pool[..4].join(" "));
        }
        let (vocab, corpus, _) = ingest_baskets(&lines, 1).unwrap();
        let config = TrainConfig {
            dim: 10,
            negatives: 5,
            epochs: 5,
            rho: None,
            seed: 3,
            ..Default::default()
        };
        let before = EmbeddingModel::<f32>::initialized(vocab.clone(), config.dim, config.seed);
        let model = train(&corpus, &vocab, &config).unwrap();
        assert!(model.is_finite());
        let id = |t: &str| vocab.id(t).unwrap();
        let cos = |a: u32, b: u32| {
            let (x, y) = (model.target_row(a), model.target_row(b));
            let d: f32 = dot(x, y);
            d / (dot(x, x).sqrt() * dot(y, y).sqrt())
        };
        assert!(cos(id("a"), id("b")) > cos(id("a"), id("c")));
        assert!(cos(id("c"), id("d")) > cos(id("c"), id("a")));
        let l0 = mean_pair_loss(&before, &corpus, 5, 1).unwrap();
        let l1 = mean_pair_loss(&model, &corpus, 5, 1).unwrap();
        assert!(l1 > l0, "{l0} -> {l1}");
    }

    #[test]
    fn training_is_deterministic_and_chunk_stable() {
        let (vocab, corpus, _) =
            ingest_baskets(["a b c", "b c d", "a d", "e f", "f a b", "c e"], 1).unwrap();
        let config = TrainConfig {
            dim: 6,
            negatives: 3,
            epochs: 3,
            rho: Some(0.1),
            seed: 7,
            ..Default::default()
        };
        let m1 = train(&corpus, &vocab, &config).unwrap();
        let m2 = train(&corpus, &vocab, &config).unwrap();
        assert_eq!(m1, m2);
        let m3 = train(&corpus, &vocab, &TrainConfig { seed: 8, ..config.clone() }).unwrap();
        assert_ne!(m1, m3);
    }

    #[test]
    fn nothing_to_train() {
        let (vocab, corpus, _) = ingest_baskets(["a", "b"], 1).unwrap();
        let err = train(&corpus, &vocab, &TrainConfig { dim: 2, ..Default::default() }).unwrap_err();
        assert_eq!(err, Error::NothingToTrain);
    }

    #[test]
    fn epochs_zero_rejected() {
        let (vocab, corpus, _) = ingest_baskets(["a b"], 1).unwrap();
        let config = TrainConfig { epochs: 0, ..Default::default() };
        assert!(matches!(train(&corpus, &vocab, &config), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn large_sets_are_capped() {
        let line: String = (0..40).map(|i| alloc::format!("t{i} ")).collect();
        let (vocab, corpus, _) = ingest_baskets([line.as_str()], 1).unwrap();
        let config = TrainConfig {
            dim: 4,
            negatives: 1,
            epochs: 1,
            rho: None,
            max_set_size: 5,
            ..Default::default()
        };
        let mut trainer = Trainer::new(&corpus, &vocab, &config).unwrap();
        assert_eq!(trainer.expected_pairs(), 20.0);
        let plan = trainer.plan_epoch(0);
        trainer.run_epoch(&plan, |jobs| jobs.into_iter().for_each(|j| {
            j.run();
        }));
        assert_eq!(trainer.pairs_done(), 20);
    }
}

