//! Text and TSV renderings of evaluation results.

use std::fmt::Write as _;
use std::io::{self, Write};

use itemvec_core::{ConsistencyReport, MislabelRecord};

/// Aligned human-readable table: summary line, then one row per genre.
pub fn consistency_text(title: &str, report: &ConsistencyReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{title}: accuracy {:.4} ({}/{}), k={}, items={}, skipped={}",
        report.accuracy, report.correct, report.evaluated_count, report.k, report.q, report.skipped_count
    );
    let width = report
        .per_genre
        .keys()
        .map(|g| g.chars().count())
        .max()
        .unwrap_or(0)
        .max("genre".len());
    let _ = writeln!(out, "  {:<width$}  {:>8}  {:>9}  {:>8}", "genre", "correct", "evaluated", "accuracy");
    for (genre, score) in &report.per_genre {
        let _ = writeln!(
            out,
            "  {genre:<width$}  {:>8}  {:>9}  {:>8.4}",
            score.correct,
            score.evaluated,
            score.accuracy()
        );
    }
    out
}

pub const CONSISTENCY_TSV_HEADER: &str = "slice\tgenre\tcorrect\tevaluated\taccuracy\tk\titems\tskipped";

/// One `*` row with the totals, then one row per genre.
pub fn write_consistency_tsv<W: Write>(out: &mut W, slice: &str, report: &ConsistencyReport) -> io::Result<()> {
    let tail = format!("{}\t{}\t{}", report.k, report.q, report.skipped_count);
    writeln!(
        out,
        "{slice}\t*\t{}\t{}\t{:.6}\t{tail}",
        report.correct, report.evaluated_count, report.accuracy
    )?;
    for (genre, score) in &report.per_genre {
        writeln!(
            out,
            "{slice}\t{genre}\t{}\t{}\t{:.6}\t{tail}",
            score.correct,
            score.evaluated,
            score.accuracy()
        )?;
    }
    Ok(())
}

pub fn write_mislabels_tsv<W: Write>(out: &mut W, records: &[MislabelRecord]) -> io::Result<()> {
    writeln!(out, "item\tcatalog_genre\tpredicted_genre\tvote_margin")?;
    for r in records {
        writeln!(
            out,
            "{}\t{}\t{}\t{:.6}",
            r.item, r.catalog_genre, r.predicted_genre, r.vote_margin
        )?;
    }
    Ok(())
}

/// `token<TAB>score` rows with six decimals.
pub fn write_neighbors<'a, W: Write>(
    out: &mut W,
    rows: impl IntoIterator<Item = (&'a str, f64)>,
) -> io::Result<()> {
    for (token, score) in rows {
        writeln!(out, "{token}\t{score:.6}")?;
    }
    Ok(())
}
