//! Hogwild skip-gram training: workers update shared tables without
//! locks. Results are statistically equivalent to single-threaded
//! training, not bit-identical.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Mutex;

use commshift_core::vectorspace::{initial_tables, train, Scratch, SkipGramTrainer, TableViewMut, TrainingCorpus};
use commshift_core::{EmbeddingSpace, SpaceError, TrainingConfig, Vocabulary};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

struct RawTable {
    ptr: *mut f32,
    len: usize,
}

struct SharedTables {
    main: RawTable,
    deviations: Vec<RawTable>,
    context: RawTable,
    dim: usize,
}

// The tables outlive every worker (scoped threads) and concurrent
// unsynchronized row updates are the accepted hogwild trade-off.
unsafe impl Send for SharedTables {}
unsafe impl Sync for SharedTables {}

impl RawTable {
    fn new(v: &mut [f32]) -> Self {
        RawTable {
            ptr: v.as_mut_ptr(),
            len: v.len(),
        }
    }

    /// # Safety
    /// The backing storage must stay alive and unmoved while the slice is in
    /// use. Other workers may write the same rows concurrently.
    unsafe fn slice<'a>(&self) -> &'a mut [f32] {
        unsafe { std::slice::from_raw_parts_mut(self.ptr, self.len) }
    }
}

impl SharedTables {
    /// # Safety
    /// See [`RawTable::slice`].
    unsafe fn view<'a>(&self) -> TableViewMut<'a> {
        unsafe {
            TableViewMut {
                main: self.main.slice(),
                deviations: self.deviations.iter().map(|d| d.slice()).collect(),
                context: self.context.slice(),
                dim: self.dim,
            }
        }
    }
}

/// Trains with `threads` workers; one thread falls back to the
/// deterministic trainer.
pub fn train_parallel(
    corpus: &TrainingCorpus,
    vocab: &Vocabulary,
    cfg: &TrainingConfig,
    threads: usize,
) -> Result<EmbeddingSpace, SpaceError> {
    if threads <= 1 {
        return train(corpus, vocab, cfg);
    }
    let trainer = SkipGramTrainer::new(corpus, cfg)?;
    let dim = cfg.dim;
    let (mut main, mut deviations, mut context) = initial_tables(vocab.len(), corpus.communities.len(), dim, cfg.seed);
    let shared = SharedTables {
        main: RawTable::new(&mut main),
        deviations: deviations.iter_mut().map(|d| RawTable::new(d)).collect(),
        context: RawTable::new(&mut context),
        dim,
    };
    let mut schedule: Vec<(usize, usize)> = corpus
        .documents
        .iter()
        .enumerate()
        .flat_map(|(c, docs)| (0..docs.len()).map(move |d| (c, d)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let processed = AtomicU64::new(0);
    let failed = AtomicBool::new(false);
    let failure: Mutex<Option<SpaceError>> = Mutex::new(None);

    for epoch in 0..cfg.epochs {
        schedule.shuffle(&mut rng);
        let chunk = schedule.len().div_ceil(threads);
        std::thread::scope(|s| {
            for (worker, shard) in schedule.chunks(chunk).enumerate() {
                let (shared, trainer, processed, failed, failure) = (&shared, &trainer, &processed, &failed, &failure);
                s.spawn(move || {
                    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ ((epoch as u64) << 32) ^ (worker as u64 + 1));
                    let mut scratch = Scratch::new(dim, cfg.negatives);
                    // SAFETY: `main`, `deviations` and `context` are not
                    // touched by this function while the scope is running.
                    let mut tables = unsafe { shared.view() };
                    for &(c, d) in shard {
                        if failed.load(Ordering::Relaxed) {
                            return;
                        }
                        let doc = &corpus.documents[c][d];
                        let lr = trainer.learning_rate(processed.load(Ordering::Relaxed));
                        let score = trainer.train_document(&mut tables, c, doc, lr, &mut rng, &mut scratch);
                        if !score.is_finite() {
                            failed.store(true, Ordering::Relaxed);
                            *failure.lock().unwrap() = Some(SpaceError::Diverged {
                                epoch,
                                community: corpus.communities[c].name.clone(),
                                document: d,
                                score,
                            });
                            return;
                        }
                        processed.fetch_add(doc.len() as u64, Ordering::Relaxed);
                    }
                });
            }
        });
        if let Some(e) = failure.lock().unwrap().take() {
            return Err(e);
        }
    }
    drop(shared);
    EmbeddingSpace::from_parts(
        vocab.clone(),
        corpus.communities.clone(),
        dim,
        main,
        deviations,
        context,
        cfg.clone(),
    )
}
