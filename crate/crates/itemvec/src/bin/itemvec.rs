use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use itemvec::report::{
    consistency_text, write_consistency_tsv, write_mislabels_tsv, write_neighbors, CONSISTENCY_TSV_HEADER,
};
use itemvec::{read_catalog, read_corpus, write_catalog, write_corpus, Embeddings, Encoding, InputFormat};
use itemvec_core::{
    genre_consistency, genre_consistency_over, mislabel_report, svd_representation, synth_corpus, top_k,
    unpopular_slice, ItemSpace, PairMode, SynthConfig, TrainConfig, Variant,
};

/// Item embeddings from co-consumption sets.
#[derive(Parser)]
#[command(name = "itemvec", version)]
struct Cli {
    /// Only log warnings and errors.
    #[arg(short, long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train item2vec embeddings with skip-gram negative sampling.
    Train(TrainArgs),
    /// Build the co-occurrence SVD baseline.
    Svd(SvdArgs),
    /// Print the nearest neighbors of one or more items.
    Similar(SimilarArgs),
    /// Score genre consistency of nearest-neighbor votes.
    EvalGenre(EvalArgs),
    /// Generate a synthetic genre corpus and its catalog.
    Synth(SynthArgs),
    /// List catalog labels contradicted by the item's neighbors.
    Mislabels(MislabelArgs),
    /// Write one representation variant as an embedding file.
    Export(ExportArgs),
}

#[derive(Args)]
struct CorpusArgs {
    /// Corpus file.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = InputFormat::Events)]
    format: InputFormat,
    /// Drop items seen in fewer sets than this.
    #[arg(long, default_value_t = 1)]
    min_count: u64,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long, default_value_t = 100)]
    dim: usize,
    #[arg(long, default_value_t = 15)]
    negatives: usize,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    /// Subsampling threshold.
    #[arg(long, default_value_t = 1e-3)]
    rho: f64,
    /// Disable frequency subsampling.
    #[arg(long, conflicts_with = "subsample_once")]
    no_subsample: bool,
    /// Subsample once up front instead of every epoch.
    #[arg(long)]
    subsample_once: bool,
    #[arg(long, default_value_t = 0.025)]
    lr: f64,
    #[arg(long, default_value_t = 1e-4)]
    final_lr: f64,
    /// `all` or `window:C`.
    #[arg(long, default_value = "all")]
    pair_mode: PairMode,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Larger sets are downsampled to this many items each epoch.
    #[arg(long, default_value_t = 500)]
    max_set_size: usize,
    /// Use the tabulated sigmoid.
    #[arg(long)]
    fast_sigmoid: bool,
    /// Target vectors (the default representation).
    #[arg(long)]
    output: PathBuf,
    /// Also write the context vectors.
    #[arg(long)]
    output_context: Option<PathBuf>,
    /// Write little-endian binary instead of text.
    #[arg(long)]
    binary: bool,
}

#[derive(Args)]
struct SvdArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long, default_value_t = 40)]
    dim: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    binary: bool,
}

#[derive(Args)]
struct ModelArgs {
    /// Target (or single-matrix) embedding file.
    #[arg(long)]
    model: PathBuf,
    /// Context embedding file, needed by the context, additive and concat variants.
    #[arg(long)]
    context: Option<PathBuf>,
    #[arg(long, default_value_t = Variant::Target)]
    variant: Variant,
    /// Embedding files are binary.
    #[arg(long)]
    binary: bool,
}

impl ModelArgs {
    fn load(&self) -> Result<ItemSpace> {
        let encoding = Encoding::binary(self.binary);
        let target = Embeddings::load(&self.model, encoding)
            .with_context(|| format!("reading {}", self.model.display()))?;
        let context = match &self.context {
            Some(path) => Some(
                Embeddings::load(path, encoding).with_context(|| format!("reading {}", path.display()))?,
            ),
            None => None,
        };
        Ok(target.into_space(context.as_ref(), self.variant)?)
    }
}

#[derive(Args)]
struct SimilarArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Query item; repeat for several.
    #[arg(long = "seed-item", required = true)]
    seed_items: Vec<String>,
    #[arg(long, default_value_t = 4)]
    k: usize,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Genre catalog TSV.
    #[arg(long)]
    catalog: PathBuf,
    /// Corpus used for item popularity.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = InputFormat::Events)]
    format: InputFormat,
    #[arg(long, default_value_t = 1)]
    min_count: u64,
    /// Number of most popular items to evaluate.
    #[arg(long, default_value_t = 2500)]
    top_q: usize,
    #[arg(long, default_value_t = 8)]
    k: usize,
    /// Also evaluate items seen in fewer sets than this.
    #[arg(long)]
    unpopular_threshold: Option<u64>,
    /// Machine-readable TSV report.
    #[arg(long)]
    report_out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 13)]
    genres: usize,
    #[arg(long, default_value_t = 100)]
    items_per_genre: usize,
    #[arg(long, default_value_t = 50_000)]
    sets: usize,
    #[arg(long, default_value_t = 20)]
    set_size: usize,
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Corpus layout to write.
    #[arg(long, default_value_t = InputFormat::Baskets)]
    format: InputFormat,
    #[arg(long)]
    out_corpus: PathBuf,
    #[arg(long)]
    out_catalog: PathBuf,
}

#[derive(Args)]
struct MislabelArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    catalog: PathBuf,
    #[arg(long, default_value_t = 8)]
    k: usize,
    #[arg(long, default_value_t = 0.75)]
    min_margin: f64,
    /// Report file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    output: PathBuf,
    /// Write little-endian binary instead of text.
    #[arg(long)]
    output_binary: bool,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match cli.command {
        Command::Train(args) => train(args),
        Command::Svd(args) => svd(args),
        Command::Similar(args) => similar(args),
        Command::EvalGenre(args) => eval_genre(args),
        Command::Synth(args) => synth(args),
        Command::Mislabels(args) => mislabels(args),
        Command::Export(args) => export(args),
    }
}

fn load_corpus(args: &CorpusArgs) -> Result<(itemvec_core::Vocabulary, itemvec_core::Corpus)> {
    let (vocab, corpus, stats) = read_corpus(&args.input, args.format, args.min_count)
        .with_context(|| format!("reading {}", args.input.display()))?;
    log::info!(
        "{} events, {} sets, {} items ({} dropped below min-count)",
        stats.raw_events,
        stats.sets_emitted,
        vocab.len(),
        stats.items_dropped_minfreq
    );
    Ok((vocab, corpus))
}

fn train(args: TrainArgs) -> Result<()> {
    let (vocab, corpus) = load_corpus(&args.corpus)?;
    let config = TrainConfig {
        dim: args.dim,
        negatives: args.negatives,
        epochs: args.epochs,
        rho: (!args.no_subsample).then_some(args.rho),
        initial_lr: args.lr,
        final_lr: args.final_lr,
        pair_mode: args.pair_mode,
        seed: args.seed,
        threads: args.threads,
        max_set_size: args.max_set_size,
        subsample_once: args.subsample_once,
        fast_sigmoid: args.fast_sigmoid,
    };
    let model = itemvec::train(&corpus, &vocab, &config)?;
    let encoding = Encoding::binary(args.binary);
    Embeddings::target(&model)
        .save(&args.output, encoding)
        .with_context(|| format!("writing {}", args.output.display()))?;
    if let Some(path) = &args.output_context {
        Embeddings::context(&model)
            .save(path, encoding)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn svd(args: SvdArgs) -> Result<()> {
    let (vocab, corpus) = load_corpus(&args.corpus)?;
    let model = svd_representation(&corpus, &vocab, args.dim, args.seed)?;
    Embeddings::svd(&model)
        .save(&args.output, Encoding::binary(args.binary))
        .with_context(|| format!("writing {}", args.output.display()))?;
    Ok(())
}

fn similar(args: SimilarArgs) -> Result<()> {
    let space = args.model.load()?;
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    let several = args.seed_items.len() > 1;
    for item in &args.seed_items {
        let Some(id) = space.id(item) else {
            bail!("unknown item {item:?}");
        };
        let list = top_k(&space, id, args.k, &[])?;
        if several {
            writeln!(out, "# {item}")?;
        }
        write_neighbors(&mut out, list.with_tokens(&space))?;
    }
    out.flush()?;
    Ok(())
}

fn eval_genre(args: EvalArgs) -> Result<()> {
    let space = args.model.load()?;
    let catalog = read_catalog(&args.catalog).with_context(|| format!("reading {}", args.catalog.display()))?;
    let (vocab, corpus) = load_corpus(&CorpusArgs {
        input: args.corpus.clone(),
        format: args.format,
        min_count: args.min_count,
    })?;
    let mut reports = vec![("top", genre_consistency(&space, &catalog, &vocab, args.top_q, args.k)?)];
    if let Some(threshold) = args.unpopular_threshold {
        let items = unpopular_slice(&vocab, &corpus, threshold);
        if items.is_empty() {
            log::warn!("no item appears in fewer than {threshold} sets");
        } else {
            reports.push(("unpopular", genre_consistency_over(&space, &catalog, &vocab, &items, args.k)?));
        }
    }
    for (slice, report) in &reports {
        print!("{}", consistency_text(slice, report));
    }
    if let Some(path) = &args.report_out {
        let mut out = BufWriter::new(File::create(path).with_context(|| format!("writing {}", path.display()))?);
        writeln!(out, "{CONSISTENCY_TSV_HEADER}")?;
        for (slice, report) in &reports {
            write_consistency_tsv(&mut out, slice, report)?;
        }
        out.flush()?;
    }
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    let config = SynthConfig {
        genres: args.genres,
        items_per_genre: args.items_per_genre,
        sets: args.sets,
        set_size: args.set_size,
        noise: args.noise,
        seed: args.seed,
    };
    let (corpus, vocab, catalog) = synth_corpus(&config)?;
    let file = File::create(&args.out_corpus).with_context(|| format!("writing {}", args.out_corpus.display()))?;
    write_corpus(file, &corpus, &vocab, args.format)?;
    let file = File::create(&args.out_catalog).with_context(|| format!("writing {}", args.out_catalog.display()))?;
    write_catalog(file, &catalog)?;
    log::info!("{} sets over {} items", corpus.len(), vocab.len());
    Ok(())
}

fn mislabels(args: MislabelArgs) -> Result<()> {
    let space = args.model.load()?;
    let catalog = read_catalog(&args.catalog).with_context(|| format!("reading {}", args.catalog.display()))?;
    let records = mislabel_report(&space, &catalog, args.k, args.min_margin)?;
    match &args.out {
        Some(path) => {
            let mut out = BufWriter::new(File::create(path).with_context(|| format!("writing {}", path.display()))?);
            write_mislabels_tsv(&mut out, &records)?;
            out.flush()?;
            log::info!("{} suspected mislabels", records.len());
        }
        None => write_mislabels_tsv(&mut io::stdout().lock(), &records)?,
    }
    Ok(())
}

fn export(args: ExportArgs) -> Result<()> {
    let space = args.model.load()?;
    Embeddings::from_space(&space)
        .save(&args.output, Encoding::binary(args.output_binary))
        .with_context(|| format!("writing {}", args.output.display()))?;
    Ok(())
}
