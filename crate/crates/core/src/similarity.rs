//! Cosine similarity and exact nearest-neighbor queries over item vectors.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use hashbrown::HashMap;
use num_traits::Float;

use crate::error::{Error, Result};
use crate::svd::SvdModel;
use crate::trainer::{EmbeddingModel, Real};

/// Which learned vectors represent an item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// `u_i`
    Target,
    /// `v_i`
    Context,
    /// `u_i + v_i`
    Additive,
    /// `[u_i; v_i]`
    Concat,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Target => "target",
            Variant::Context => "context",
            Variant::Additive => "additive",
            Variant::Concat => "concat",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "target" => Ok(Variant::Target),
            "context" => Ok(Variant::Context),
            "additive" => Ok(Variant::Additive),
            "concat" => Ok(Variant::Concat),
            _ => Err(Error::InvalidConfig(alloc::format!(
                "unknown variant {s:?}: expected target, context, additive or concat"
            ))),
        }
    }
}

/// Item vectors ready for similarity queries. Row `i` belongs to `tokens[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemSpace {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
    dim: usize,
    vectors: Vec<f32>,
    norms: Vec<f64>,
    variant: Variant,
}

impl ItemSpace {
    pub fn new(tokens: Vec<String>, dim: usize, vectors: Vec<f32>, variant: Variant) -> Result<Self> {
        if vectors.len() != tokens.len() * dim {
            return Err(Error::DimensionMismatch {
                left: vectors.len(),
                right: tokens.len() * dim,
            });
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(Error::InvalidConfig(alloc::format!("duplicate item {t:?}")));
            }
        }
        let norms = if dim == 0 {
            alloc::vec![0.0; tokens.len()]
        } else {
            vectors.chunks_exact(dim).map(norm).collect()
        };
        Ok(ItemSpace {
            tokens,
            index,
            dim,
            vectors,
            norms,
            variant,
        })
    }

    /// Combines target rows and optional context rows (same item order) per `variant`.
    pub fn from_matrices(
        tokens: Vec<String>,
        dim: usize,
        target: &[f32],
        context: Option<&[f32]>,
        variant: Variant,
    ) -> Result<Self> {
        let need_context = |name| context.ok_or(Error::UnsupportedVariant(name));
        let vectors = match variant {
            Variant::Target => target.to_vec(),
            Variant::Context => need_context("context")?.to_vec(),
            Variant::Additive => {
                let ctx = need_context("additive")?;
                check_len(target.len(), ctx.len())?;
                target.iter().zip(ctx).map(|(u, v)| u + v).collect()
            }
            Variant::Concat => {
                let ctx = need_context("concat")?;
                check_len(target.len(), ctx.len())?;
                if dim == 0 {
                    Vec::new()
                } else {
                    target
                        .chunks_exact(dim)
                        .zip(ctx.chunks_exact(dim))
                        .flat_map(|(u, v)| u.iter().chain(v).copied())
                        .collect()
                }
            }
        };
        let width = if variant == Variant::Concat { 2 * dim } else { dim };
        ItemSpace::new(tokens, width, vectors, variant)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn token(&self, id: u32) -> &str {
        &self.tokens[id as usize]
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn row(&self, id: u32) -> &[f32] {
        let start = id as usize * self.dim;
        &self.vectors[start..start + self.dim]
    }

    pub fn vectors(&self) -> &[f32] {
        &self.vectors
    }

    /// Cosine between two rows, with cached norms.
    pub fn similarity(&self, a: u32, b: u32) -> f64 {
        cosine_with_norms(
            self.row(a),
            self.row(b),
            self.norms[a as usize],
            self.norms[b as usize],
        )
    }
}

fn check_len(left: usize, right: usize) -> Result<()> {
    if left != right {
        return Err(Error::DimensionMismatch { left, right });
    }
    Ok(())
}

impl<T: Real> EmbeddingModel<T> {
    /// Item vectors for one of the four representation choices.
    pub fn assemble(&self, variant: Variant) -> Result<ItemSpace> {
        let cast = |xs: &[T]| xs.iter().map(|x| x.to_f32().unwrap()).collect::<Vec<f32>>();
        ItemSpace::from_matrices(
            self.vocab().tokens().to_vec(),
            self.dim(),
            &cast(self.target()),
            Some(&cast(self.context())),
            variant,
        )
    }
}

impl SvdModel {
    /// The SVD baseline has a single matrix, exposed as [`Variant::Target`].
    pub fn assemble(&self, variant: Variant) -> Result<ItemSpace> {
        if variant != Variant::Target {
            return Err(Error::UnsupportedVariant(variant.name()));
        }
        let vectors = self.representation().iter().map(|&x| x as f32).collect();
        ItemSpace::new(self.vocab().tokens().to_vec(), self.dim(), vectors, Variant::Target)
    }
}

fn dot(x: &[f32], y: &[f32]) -> f64 {
    x.iter().zip(y).map(|(&a, &b)| a as f64 * b as f64).sum()
}

fn norm(x: &[f32]) -> f64 {
    Float::sqrt(dot(x, x))
}

const ZERO_NORM: f64 = 1e-12;

fn cosine_with_norms(x: &[f32], y: &[f32], nx: f64, ny: f64) -> f64 {
    if nx < ZERO_NORM || ny < ZERO_NORM {
        return 0.0;
    }
    (dot(x, y) / (nx * ny)).clamp(-1.0, 1.0)
}

/// `x·y / (‖x‖‖y‖)`, or 0 when either norm is below 1e-12.
pub fn cosine(x: &[f32], y: &[f32]) -> Result<f64> {
    check_len(x.len(), y.len())?;
    Ok(cosine_with_norms(x, y, norm(x), norm(y)))
}

/// Nearest neighbors of one item, best first.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborList {
    pub seed: u32,
    pub neighbors: Vec<(u32, f64)>,
    /// Fewer than `k` candidates were available.
    pub truncated: bool,
}

/// The `k` most cosine-similar items to `seed`, excluding `seed` and `exclude`.
/// Exact scan; ties go to the smaller id.
pub fn top_k(space: &ItemSpace, seed: u32, k: usize, exclude: &[u32]) -> Result<NeighborList> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    if seed as usize >= space.len() {
        return Err(Error::UnknownItem(alloc::format!("#{seed}")));
    }
    let mut scored: Vec<(u32, f64)> = (0..space.len() as u32)
        .filter(|&id| id != seed && !exclude.contains(&id))
        .map(|id| (id, space.similarity(seed, id)))
        .collect();
    let order = |a: &(u32, f64), b: &(u32, f64)| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0));
    let truncated = scored.len() < k;
    if !truncated && scored.len() > k {
        scored.select_nth_unstable_by(k - 1, order);
        scored.truncate(k);
    }
    scored.sort_unstable_by(order);
    Ok(NeighborList {
        seed,
        neighbors: scored,
        truncated,
    })
}

/// Full ranking of all other items by similarity to `seed` (same order as [`top_k`]).
pub fn ranking(space: &ItemSpace, seed: u32) -> Vec<(u32, f64)> {
    let k = space.len().saturating_sub(1).max(1);
    top_k(space, seed, k, &[]).map(|l| l.neighbors).unwrap_or_default()
}

impl NeighborList {
    /// `(token, score)` rows for display.
    pub fn with_tokens<'a>(&'a self, space: &'a ItemSpace) -> impl Iterator<Item = (&'a str, f64)> + 'a {
        self.neighbors.iter().map(move |&(id, s)| (space.token(id), s))
    }
}

impl ItemSpace {
    /// Copy of the space with every vector scaled by `factor`.
    pub fn scaled(&self, factor: f32) -> ItemSpace {
        let vectors = self.vectors.iter().map(|x| x * factor).collect();
        ItemSpace::new(self.tokens.clone(), self.dim, vectors, self.variant)
            .expect("same shape as an existing space")
    }
}
