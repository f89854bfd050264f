use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use itemvec::{read_catalog, read_corpus, Embeddings, Encoding, InputFormat};

fn itemvec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_itemvec"))
        .arg("-q")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = itemvec(args);
    assert!(
        out.status.success(),
        "itemvec {}: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, format: &str) -> (std::path::PathBuf, std::path::PathBuf) {
    let corpus = dir.join(format!("corpus.{format}"));
    let catalog = dir.join("genres.tsv");
    ok(&[
        "synth", "--genres", "3", "--items-per-genre", "12", "--sets", "600", "--set-size", "5",
        "--noise", "0", "--seed", "2", "--format", format,
        "--out-corpus", s(&corpus), "--out-catalog", s(&catalog),
    ]);
    (corpus, catalog)
}

#[test]
fn synth_writes_readable_files() {
    let dir = tempfile::tempdir().unwrap();
    let (baskets, catalog) = synth(dir.path(), "baskets");
    let (events, _) = synth(dir.path(), "events");
    let (vb, cb, _) = read_corpus(&baskets, InputFormat::Baskets, 1).unwrap();
    let (ve, ce, _) = read_corpus(&events, InputFormat::Events, 1).unwrap();
    assert_eq!(cb.len(), 600);
    assert_eq!(vb.tokens(), ve.tokens());
    assert_eq!(cb, ce);
    let genres = read_catalog(&catalog).unwrap();
    assert_eq!(genres.len(), 36);
    assert_eq!(genres.genre("g0_i00"), Some("genre0"));
}

#[test]
fn train_similar_eval_export_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, catalog) = synth(dir.path(), "baskets");
    let (model, ctx) = (dir.path().join("m.vec"), dir.path().join("c.vec"));
    ok(&[
        "train", "--input", s(&corpus), "--format", "baskets", "--dim", "12", "--epochs", "5",
        "--negatives", "5", "--pair-mode", "window:2", "--no-subsample",
        "--output", s(&model), "--output-context", s(&ctx),
    ]);
    let target = Embeddings::load(&model, Encoding::Text).unwrap();
    assert_eq!((target.len(), target.dim()), (36, 12));

    let out = ok(&["similar", "--model", s(&model), "--seed-item", "g1_i00", "--k", "4"]);
    let rows: Vec<&str> = out.lines().collect();
    assert_eq!(rows.len(), 4);
    for row in &rows {
        let (token, score) = row.split_once('\t').unwrap();
        assert!(token.starts_with("g1_"), "{out}");
        assert_eq!(score.split_once('.').unwrap().1.len(), 6);
    }

    let report = dir.path().join("report.tsv");
    let out = ok(&[
        "eval-genre", "--model", s(&model), "--catalog", s(&catalog), "--corpus", s(&corpus),
        "--format", "baskets", "--top-q", "20", "--k", "4", "--unpopular-threshold", "1000",
        "--report-out", s(&report),
    ]);
    assert!(out.starts_with("top: accuracy"), "{out}");
    let tsv = fs::read_to_string(&report).unwrap();
    assert!(tsv.lines().any(|l| l.starts_with("top\t*\t")));
    assert!(tsv.lines().any(|l| l.starts_with("unpopular\t*\t")));

    let concat = dir.path().join("concat.bin");
    ok(&[
        "export", "--model", s(&model), "--context", s(&ctx), "--variant", "concat",
        "--output", s(&concat), "--output-binary",
    ]);
    let exported = Embeddings::load(&concat, Encoding::Binary).unwrap();
    assert_eq!(exported.dim(), 24);
    assert_eq!(&exported.row(0)[..12], target.row(0));
}

#[test]
fn svd_and_mislabels() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, catalog) = synth(dir.path(), "baskets");
    let model = dir.path().join("svd.vec");
    ok(&["svd", "--input", s(&corpus), "--format", "baskets", "--dim", "6", "--output", s(&model)]);
    let svd = Embeddings::load(&model, Encoding::Text).unwrap();
    assert_eq!(svd.dim(), 6);

    // Relabel one item; its neighbors should outvote the new label.
    let text = fs::read_to_string(&catalog).unwrap().replace("g0_i03\tgenre0", "g0_i03\tgenre2");
    let flipped = dir.path().join("flipped.tsv");
    fs::write(&flipped, text).unwrap();
    let out_path = dir.path().join("mislabels.tsv");
    ok(&["mislabels", "--model", s(&model), "--catalog", s(&flipped), "--k", "8", "--out", s(&out_path)]);
    let report = fs::read_to_string(&out_path).unwrap();
    let mut lines = report.lines();
    assert_eq!(lines.next(), Some("item\tcatalog_genre\tpredicted_genre\tvote_margin"));
    assert!(lines.any(|l| l.starts_with("g0_i03\tgenre2\tgenre0\t")), "{report}");
}

#[test]
fn errors_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.tsv");
    fs::write(&bad, "u1\ta\nu1 b\n").unwrap();
    let out = itemvec(&["train", "--input", s(&bad), "--output", s(&dir.path().join("m.vec"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let (corpus, _) = synth(dir.path(), "baskets");
    let model = dir.path().join("m.vec");
    ok(&["train", "--input", s(&corpus), "--format", "baskets", "--dim", "4", "--epochs", "1", "--output", s(&model)]);
    let out = itemvec(&["similar", "--model", s(&model), "--seed-item", "nope"]);
    assert!(!out.status.success());
    let out = itemvec(&["similar", "--model", s(&model), "--variant", "additive", "--seed-item", "g0_i00"]);
    assert!(!out.status.success());
    let out = itemvec(&["train", "--input", s(&corpus), "--pair-mode", "window:0", "--output", s(&model)]);
    assert!(!out.status.success());
}

#[test]
fn binary_model_files_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, _) = synth(dir.path(), "baskets");
    let (text, bin) = (dir.path().join("m.vec"), dir.path().join("m.bin"));
    for (path, extra) in [(&text, None), (&bin, Some("--binary"))] {
        let mut args = vec![
            "train", "--input", s(&corpus), "--format", "baskets", "--dim", "8", "--epochs", "2",
            "--seed", "3", "--output", s(path),
        ];
        args.extend(extra);
        ok(&args);
    }
    let a = ok(&["similar", "--model", s(&text), "--seed-item", "g2_i01"]);
    let b = ok(&["similar", "--model", s(&bin), "--binary", "--seed-item", "g2_i01"]);
    assert_eq!(a, b);
}
