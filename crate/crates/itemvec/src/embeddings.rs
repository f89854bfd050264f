//! word2vec-style embedding files.
//!
//! Text rows are written with the shortest decimal that parses back to the same
//! `f32`, so a text round trip is lossless.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use itemvec_core::{EmbeddingModel, ItemSpace, SvdModel, Variant};

use crate::error::{Error, Result};

/// On-disk encoding of an embedding file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Encoding {
    #[default]
    Text,
    /// Header line as in text, then per row the token, a space, `dim`
    /// little-endian `f32` values and a newline.
    Binary,
}

impl Encoding {
    pub fn binary(flag: bool) -> Self {
        if flag {
            Encoding::Binary
        } else {
            Encoding::Text
        }
    }
}

/// A dense row-major matrix with one token per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings {
    tokens: Vec<String>,
    dim: usize,
    values: Vec<f32>,
}

impl Embeddings {
    pub fn new(tokens: Vec<String>, dim: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != tokens.len() * dim {
            return Err(itemvec_core::Error::DimensionMismatch {
                left: values.len(),
                right: tokens.len() * dim,
            }
            .into());
        }
        for (i, token) in tokens.iter().enumerate() {
            check_token(token).map_err(|m| Error::format(i + 2, m))?;
        }
        Ok(Embeddings { tokens, dim, values })
    }

    /// The target matrix `U` of a trained model.
    pub fn target(model: &EmbeddingModel<f32>) -> Self {
        Embeddings {
            tokens: model.vocab().tokens().to_vec(),
            dim: model.dim(),
            values: model.target().to_vec(),
        }
    }

    /// The context matrix `V` of a trained model.
    pub fn context(model: &EmbeddingModel<f32>) -> Self {
        Embeddings {
            tokens: model.vocab().tokens().to_vec(),
            dim: model.dim(),
            values: model.context().to_vec(),
        }
    }

    /// The representation `U·diag(√S)` of the SVD baseline.
    pub fn svd(model: &SvdModel) -> Self {
        Embeddings {
            tokens: model.vocab().tokens().to_vec(),
            dim: model.dim(),
            values: model.representation().iter().map(|&x| x as f32).collect(),
        }
    }

    pub fn from_space(space: &ItemSpace) -> Self {
        Embeddings {
            tokens: space.tokens().to_vec(),
            dim: space.dim(),
            values: space.vectors().to_vec(),
        }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// Builds the similarity space for `variant`. `context` must hold the
    /// same tokens (in any order) and dimension as `self`.
    pub fn into_space(self, context: Option<&Embeddings>, variant: Variant) -> Result<ItemSpace> {
        let aligned = context.map(|c| c.aligned_to(&self.tokens, self.dim)).transpose()?;
        let space = ItemSpace::from_matrices(self.tokens, self.dim, &self.values, aligned.as_deref(), variant)?;
        Ok(space)
    }

    /// Rows reordered to follow `tokens`.
    fn aligned_to(&self, tokens: &[String], dim: usize) -> Result<Vec<f32>> {
        if self.dim != dim {
            return Err(itemvec_core::Error::DimensionMismatch { left: self.dim, right: dim }.into());
        }
        if self.tokens.len() != tokens.len() {
            return Err(itemvec_core::Error::DimensionMismatch {
                left: self.tokens.len(),
                right: tokens.len(),
            }
            .into());
        }
        if self.tokens == tokens {
            return Ok(self.values.clone());
        }
        let index: std::collections::HashMap<&str, usize> =
            self.tokens.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
        let mut out = Vec::with_capacity(self.values.len());
        for token in tokens {
            let &i = index
                .get(token.as_str())
                .ok_or_else(|| itemvec_core::Error::UnknownItem(token.clone()))?;
            out.extend_from_slice(self.row(i));
        }
        Ok(out)
    }

    pub fn write<W: Write>(&self, out: W, encoding: Encoding) -> Result<()> {
        let mut out = BufWriter::new(out);
        writeln!(out, "{} {}", self.len(), self.dim)?;
        for (i, token) in self.tokens.iter().enumerate() {
            out.write_all(token.as_bytes())?;
            match encoding {
                Encoding::Text => {
                    for v in self.row(i) {
                        write!(out, " {v}")?;
                    }
                }
                Encoding::Binary => {
                    out.write_all(b" ")?;
                    for v in self.row(i) {
                        out.write_all(&v.to_le_bytes())?;
                    }
                }
            }
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(input: R, encoding: Encoding) -> Result<Self> {
        let mut input = BufReader::new(input);
        match encoding {
            Encoding::Text => read_text(&mut input),
            Encoding::Binary => read_binary(&mut input),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>, encoding: Encoding) -> Result<()> {
        self.write(File::create(path)?, encoding)
    }

    pub fn load(path: impl AsRef<Path>, encoding: Encoding) -> Result<Self> {
        Embeddings::read(File::open(path)?, encoding)
    }
}

fn check_token(token: &str) -> std::result::Result<(), &'static str> {
    if token.is_empty() {
        Err("empty token")
    } else if token.contains(char::is_whitespace) {
        Err("token contains whitespace")
    } else {
        Ok(())
    }
}

fn parse<T: FromStr>(field: &str, line: usize, what: &str) -> Result<T> {
    field
        .parse()
        .map_err(|_| Error::format(line, format!("invalid {what} {field:?}")))
}

fn read_header<R: BufRead>(input: &mut R) -> Result<(usize, usize)> {
    let mut header = Vec::new();
    input.read_until(b'\n', &mut header)?;
    let header = std::str::from_utf8(&header).map_err(|_| Error::format(1, "header is not UTF-8"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let [rows, dim] = fields[..] else {
        return Err(Error::format(1, "expected header \"<rows> <dim>\""));
    };
    Ok((parse(rows, 1, "row count")?, parse(dim, 1, "dimension")?))
}

fn read_text<R: BufRead>(input: &mut R) -> Result<Embeddings> {
    let (rows, dim) = read_header(input)?;
    let mut tokens = Vec::with_capacity(rows);
    let mut values = Vec::with_capacity(rows * dim);
    let mut seen = HashSet::with_capacity(rows);
    for (n, line) in input.lines().enumerate() {
        let line_no = n + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if tokens.len() == rows {
            return Err(Error::format(line_no, format!("more than {rows} rows")));
        }
        let mut fields = line.split_whitespace();
        let token = fields.next().expect("line is not blank");
        let before = values.len();
        for field in fields {
            values.push(parse::<f32>(field, line_no, "value")?);
        }
        if values.len() - before != dim {
            return Err(Error::format(
                line_no,
                format!("expected {dim} values, found {}", values.len() - before),
            ));
        }
        if !seen.insert(token.to_string()) {
            return Err(Error::format(line_no, format!("duplicate token {token:?}")));
        }
        tokens.push(token.to_string());
    }
    if tokens.len() != rows {
        return Err(Error::format(
            tokens.len() + 2,
            format!("header announces {rows} rows, found {}", tokens.len()),
        ));
    }
    Ok(Embeddings { tokens, dim, values })
}

fn read_binary<R: BufRead>(input: &mut R) -> Result<Embeddings> {
    let (rows, dim) = read_header(input)?;
    let mut tokens = Vec::with_capacity(rows);
    let mut values = Vec::with_capacity(rows * dim);
    let mut seen = HashSet::with_capacity(rows);
    let mut raw = vec![0u8; 4 * dim];
    let mut token = Vec::new();
    for r in 0..rows {
        let record = r + 2;
        let truncated = || Error::format(record, "unexpected end of file");
        // Skip the separator left by the previous row.
        loop {
            let buf = input.fill_buf()?;
            match buf.first() {
                None => return Err(truncated()),
                Some(b) if b.is_ascii_whitespace() => input.consume(1),
                Some(_) => break,
            }
        }
        token.clear();
        input.read_until(b' ', &mut token)?;
        if token.pop() != Some(b' ') {
            return Err(truncated());
        }
        let text = String::from_utf8(token.clone()).map_err(|_| Error::format(record, "token is not UTF-8"))?;
        input.read_exact(&mut raw).map_err(|_| truncated())?;
        values.extend(raw.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])));
        if !seen.insert(text.clone()) {
            return Err(Error::format(record, format!("duplicate token {text:?}")));
        }
        tokens.push(text);
    }
    Ok(Embeddings { tokens, dim, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Embeddings {
        Embeddings::new(
            vec!["a".into(), "b".into(), "c".into()],
            2,
            vec![0.1, -2.5e-8, 3.0, f32::MIN_POSITIVE, -0.0, 1.0 / 3.0],
        )
        .unwrap()
    }

    fn round_trip(e: &Embeddings, encoding: Encoding) -> Embeddings {
        let mut buf = Vec::new();
        e.write(&mut buf, encoding).unwrap();
        Embeddings::read(&buf[..], encoding).unwrap()
    }

    #[test]
    fn text_round_trip_is_bit_exact() {
        let e = sample();
        let back = round_trip(&e, Encoding::Text);
        assert_eq!(back.tokens, e.tokens);
        let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back.values), bits(&e.values));
    }

    #[test]
    fn binary_round_trip_is_bit_exact() {
        let e = sample();
        assert_eq!(round_trip(&e, Encoding::Binary), e);
    }

    #[test]
    fn text_layout() {
        let e = Embeddings::new(vec!["x".into()], 2, vec![1.0, -0.5]).unwrap();
        let mut buf = Vec::new();
        e.write(&mut buf, Encoding::Text).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "1 2\nx 1 -0.5\n");
    }

    #[test]
    fn binary_header_matches_text() {
        let mut buf = Vec::new();
        sample().write(&mut buf, Encoding::Binary).unwrap();
        assert!(buf.starts_with(b"3 2\na "));
        assert_eq!(buf.len(), 4 + 3 * (2 + 8 + 1));
    }

    #[test]
    fn text_errors_carry_line_numbers() {
        let err = Embeddings::read(&b"2 2\na 1 2\nb 1\n"[..], Encoding::Text).unwrap_err();
        assert!(matches!(err, Error::Format { line: 3, .. }), "{err}");
        let err = Embeddings::read(&b"2 2\na 1 2\na 3 4\n"[..], Encoding::Text).unwrap_err();
        assert!(matches!(err, Error::Format { line: 3, .. }), "{err}");
        let err = Embeddings::read(&b"3 2\na 1 2\n"[..], Encoding::Text).unwrap_err();
        assert!(matches!(err, Error::Format { .. }));
        let err = Embeddings::read(&b"2\n"[..], Encoding::Text).unwrap_err();
        assert!(matches!(err, Error::Format { line: 1, .. }));
    }

    #[test]
    fn truncated_binary_is_rejected() {
        let mut buf = Vec::new();
        sample().write(&mut buf, Encoding::Binary).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(Embeddings::read(&buf[..], Encoding::Binary).is_err());
    }

    #[test]
    fn context_is_aligned_by_token() {
        let target = Embeddings::new(vec!["a".into(), "b".into()], 1, vec![1.0, 2.0]).unwrap();
        let context = Embeddings::new(vec!["b".into(), "a".into()], 1, vec![20.0, 10.0]).unwrap();
        let space = target.into_space(Some(&context), Variant::Additive).unwrap();
        assert_eq!(space.vectors(), &[11.0, 22.0]);
    }

    #[test]
    fn rejects_whitespace_tokens() {
        assert!(Embeddings::new(vec!["a b".into()], 1, vec![0.0]).is_err());
    }
}
