//! Multi-threaded training driver.

use std::thread;
use std::time::Instant;

use itemvec_core::{ChunkJob, Corpus, EmbeddingModel, TrainConfig, Trainer, Vocabulary};

/// Trains with `config.threads` worker threads per epoch.
///
/// Workers update the shared matrices without locks. With `threads == 1` the
/// result is bit-identical to [`itemvec_core::train`] for the same seed.
pub fn train(
    corpus: &Corpus,
    vocab: &Vocabulary,
    config: &TrainConfig,
) -> itemvec_core::Result<EmbeddingModel<f32>> {
    let mut trainer = Trainer::new(corpus, vocab, config)?;
    log::info!(
        "training {} items, {} sets, dim {}, {} threads, ~{:.0} pairs",
        vocab.len(),
        corpus.len(),
        config.dim,
        config.threads,
        trainer.expected_pairs()
    );
    let start = Instant::now();
    for epoch in 0..config.epochs {
        let plan = trainer.plan_epoch(epoch);
        trainer.run_epoch(&plan, run_jobs);
        log::info!(
            "epoch {}/{}: {} pairs, {:.1}s",
            epoch + 1,
            config.epochs,
            trainer.pairs_done(),
            start.elapsed().as_secs_f64()
        );
    }
    trainer.finish()
}

fn run_jobs(jobs: Vec<ChunkJob<'_>>) {
    if jobs.len() == 1 {
        jobs.into_iter().for_each(|job| {
            job.run();
        });
        return;
    }
    thread::scope(|s| {
        for job in jobs {
            s.spawn(move || job.run());
        }
    });
}
