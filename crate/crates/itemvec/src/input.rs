//! Corpus and genre catalog files.

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use itemvec_core::corpus::{ingest_baskets, ingest_events};
use itemvec_core::{Corpus, GenreCatalog, IngestStats, Vocabulary};

use crate::error::{Error, Result};

/// Layout of a corpus file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InputFormat {
    /// `user_id<TAB>item_token` per line; one set per user.
    #[default]
    Events,
    /// One set per line, tokens separated by spaces or tabs.
    Baskets,
}

impl fmt::Display for InputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InputFormat::Events => "events",
            InputFormat::Baskets => "baskets",
        })
    }
}

impl FromStr for InputFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "events" => Ok(InputFormat::Events),
            "baskets" => Ok(InputFormat::Baskets),
            _ => Err(format!("unknown format {s:?}: expected events or baskets")),
        }
    }
}

pub fn parse_corpus(
    text: &str,
    format: InputFormat,
    min_count: u64,
) -> Result<(Vocabulary, Corpus, IngestStats)> {
    let ingested = match format {
        InputFormat::Events => ingest_events(text.lines(), min_count),
        InputFormat::Baskets => ingest_baskets(text.lines(), min_count),
    };
    ingested.map_err(|e| match e {
        itemvec_core::Error::MalformedLine { line, reason } => Error::format(line, reason),
        other => other.into(),
    })
}

pub fn read_corpus(
    path: impl AsRef<Path>,
    format: InputFormat,
    min_count: u64,
) -> Result<(Vocabulary, Corpus, IngestStats)> {
    parse_corpus(&fs::read_to_string(path)?, format, min_count)
}

/// Writes `corpus` so that [`read_corpus`] with the same format yields the
/// same sets. Events use `u<index>` as the user id.
pub fn write_corpus<W: Write>(
    out: W,
    corpus: &Corpus,
    vocab: &Vocabulary,
    format: InputFormat,
) -> Result<()> {
    let mut out = BufWriter::new(out);
    for (i, set) in corpus.iter().enumerate() {
        match format {
            InputFormat::Events => {
                for &id in set {
                    writeln!(out, "u{i}\t{}", vocab.token(id))?;
                }
            }
            InputFormat::Baskets => {
                for (j, &id) in set.iter().enumerate() {
                    if j > 0 {
                        out.write_all(b" ")?;
                    }
                    out.write_all(vocab.token(id).as_bytes())?;
                }
                out.write_all(b"\n")?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

pub fn parse_catalog(text: &str) -> Result<GenreCatalog> {
    let mut catalog = GenreCatalog::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let (Some(token), Some(label), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(Error::format(n + 1, "expected item_token<TAB>genre_label"));
        };
        let (token, label) = (token.trim(), label.trim());
        if token.is_empty() || label.is_empty() {
            return Err(Error::format(n + 1, "empty field"));
        }
        catalog
            .insert(token, label)
            .map_err(|e| Error::format(n + 1, e.to_string()))?;
    }
    Ok(catalog)
}

pub fn read_catalog(path: impl AsRef<Path>) -> Result<GenreCatalog> {
    parse_catalog(&fs::read_to_string(path)?)
}

/// Entries sorted by token.
pub fn write_catalog<W: Write>(out: W, catalog: &GenreCatalog) -> Result<()> {
    let mut out = BufWriter::new(out);
    for (token, label) in catalog.entries() {
        writeln!(out, "{token}\t{label}")?;
    }
    out.flush()?;
    Ok(())
}
