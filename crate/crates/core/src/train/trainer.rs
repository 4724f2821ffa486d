//! The training loop: seeded batch sampling, gradient accumulation, AdamW
//! steps, loss logging, and periodic checkpoints.
//!
//! Everything downstream of the seed is deterministic in single-worker mode:
//! batch composition, flip decisions, and the loss log reproduce byte for
//! byte across runs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{image_to_tensor, PatchPair, PatchStore, Split, PATCH_SIZE};
use crate::error::{Error, Result};
use crate::metrics::Rect;
use crate::model::{save_checkpoint, Checkpoint, Model};
use crate::scalar::{to_f64, Scalar};
use crate::tensor::Tape;
use crate::train::adamw::{adamw_step, OptimState};
use crate::train::config::OptimConfig;
use crate::train::schedule::lr_at;

/// One forward-ready sample: image tensor, flat binary targets, and optional
/// per-pixel weights (None means every pixel counts).
#[derive(Debug, Clone)]
pub struct TrainSample<S: Scalar> {
    pub image: crate::tensor::Tensor<S>,
    pub targets: Vec<u8>,
    pub weights: Option<Vec<S>>,
    pub dataset: String,
}

impl<S: Scalar> TrainSample<S> {
    pub fn from_patch(patch: &PatchPair, dataset: &str) -> Self {
        let weights = if patch.is_fully_valid() {
            None
        } else {
            Some(region_weights(patch.provenance.valid, PATCH_SIZE, PATCH_SIZE))
        };
        Self {
            image: image_to_tensor(&patch.image),
            targets: patch.mask.data().to_vec(),
            weights,
            dataset: dataset.to_string(),
        }
    }
}

fn region_weights<S: Scalar>(region: Rect, width: usize, height: usize) -> Vec<S> {
    let mut w = vec![S::zero(); width * height];
    for y in region.y..region.y + region.h {
        let row = y * width;
        for v in w[row + region.x..row + region.x + region.w].iter_mut() {
            *v = S::one();
        }
    }
    w
}

fn derive_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// One optimizer step over a batch. Gradients are accumulated per sample in
/// f64 (scaled by 1/batch), optionally clipped by global L2 norm, then
/// applied with `lr_at(state.t)`. Returns the mean loss.
pub fn train_step<S: Scalar>(
    model: &mut Model<S>,
    batch: &[TrainSample<S>],
    state: &mut OptimState,
    cfg: &OptimConfig,
    grad_clip: Option<f64>,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Train("empty batch".into()));
    }
    let lr = lr_at(cfg, state.t)?;
    let mut grads: Vec<Vec<f64>> =
        model.params().entries().iter().map(|p| vec![0.0; p.tensor.numel()]).collect();
    let scale = 1.0 / batch.len() as f64;
    let mut total = 0.0;

    for sample in batch {
        let mut tape = Tape::new();
        let bound = model.bind(&mut tape)?;
        let img = tape.leaf(sample.image.clone())?;
        let logits = model.forward(&mut tape, &bound, img)?;
        let loss = tape.softmax_cross_entropy(logits, &sample.targets, sample.weights.as_deref())?;
        let value = to_f64(tape.data(loss)[0]);
        if !value.is_finite() {
            return Err(Error::Train(format!("non-finite loss {value}")));
        }
        total += value * scale;
        tape.backward(loss)?;
        for (buf, &id) in grads.iter_mut().zip(bound.ids()) {
            if let Some(g) = tape.grad(id) {
                for (b, v) in buf.iter_mut().zip(g) {
                    *b += to_f64(*v) * scale;
                }
            }
        }
    }

    if let Some(clip) = grad_clip {
        if !(clip.is_finite() && clip > 0.0) {
            return Err(Error::Train(format!("gradient clip {clip} out of range")));
        }
        let norm = grads.iter().flatten().map(|g| g * g).sum::<f64>().sqrt();
        if norm > clip {
            let factor = clip / norm;
            for g in grads.iter_mut().flatten() {
                *g *= factor;
            }
        }
    }

    adamw_step(model.params_mut(), &grads, state, lr, cfg)?;
    Ok(total)
}

/// Full run configuration on top of the optimizer constants.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub optim: OptimConfig,
    /// Horizontal-flip augmentation (off by default).
    pub flip: bool,
    /// Global L2 gradient clip (off by default).
    pub grad_clip: Option<f64>,
    /// Round-robin datasets instead of size-proportional sampling.
    pub balanced: bool,
    /// Save a checkpoint every N iterations (0 = final only).
    pub checkpoint_every: u64,
}

impl TrainConfig {
    pub fn new(optim: OptimConfig) -> Self {
        Self { optim, flip: false, grad_clip: None, balanced: false, checkpoint_every: 0 }
    }
}

/// One loss-log line.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub iter: u64,
    pub lr: f64,
    pub loss: f64,
    pub mix: BTreeMap<String, usize>,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub log: Vec<LogRow>,
    pub checkpoint_paths: Vec<PathBuf>,
}

/// Render the loss log as CSV: `iter,lr,loss` plus one mix-count column per
/// dataset tag present in the corpus.
pub fn log_to_csv(log: &[LogRow], tags: &[String]) -> String {
    let mut out = String::from("iter,lr,loss");
    for tag in tags {
        out.push(',');
        out.push_str(tag);
    }
    out.push('\n');
    for row in log {
        out.push_str(&format!("{},{},{}", row.iter, row.lr, row.loss));
        for tag in tags {
            out.push_str(&format!(",{}", row.mix.get(tag).copied().unwrap_or(0)));
        }
        out.push('\n');
    }
    out
}

struct Pool {
    /// Indices into the sample vector, one pool per sampling group.
    groups: Vec<Vec<usize>>,
    cursors: Vec<usize>,
    next_group: usize,
    rng: ChaCha8Rng,
}

impl Pool {
    fn new(groups: Vec<Vec<usize>>, seed: u64) -> Self {
        let cursors = vec![usize::MAX; groups.len()];
        Self { groups, cursors, next_group: 0, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    fn draw(&mut self) -> usize {
        let g = self.next_group;
        self.next_group = (self.next_group + 1) % self.groups.len();
        let group = &mut self.groups[g];
        let cursor = &mut self.cursors[g];
        if *cursor >= group.len() {
            group.shuffle(&mut self.rng);
            *cursor = 0;
        }
        let idx = group[*cursor];
        *cursor += 1;
        idx
    }
}

/// Run the full loop over the train split of one or more stores. With
/// several stores ("fusion"), samples are drawn from the shuffled union, so
/// each patch is equally likely regardless of origin; `balanced` switches to
/// per-dataset round-robin. Writes `checkpoints/` and `logs/train_log.csv`
/// under `out_dir` when given.
pub fn train_loop<S: Scalar>(
    model: &mut Model<S>,
    stores: &[&PatchStore],
    cfg: &TrainConfig,
    out_dir: Option<&Path>,
) -> Result<TrainOutcome> {
    cfg.optim.validate()?;
    if stores.is_empty() {
        return Err(Error::Train("no corpus to train on".into()));
    }

    // Preload the train split; desk-scale corpora fit in memory easily.
    let mut patches: Vec<(PatchPair, String)> = Vec::new();
    for store in stores {
        for entry in store.entries_for_split(Split::Train) {
            patches.push((store.load_entry(entry)?, entry.dataset.to_string()));
        }
    }
    if patches.is_empty() {
        return Err(Error::Train("train split is empty".into()));
    }
    let mut tags: Vec<String> = patches.iter().map(|(_, t)| t.clone()).collect();
    tags.sort();
    tags.dedup();

    let groups: Vec<Vec<usize>> = if cfg.balanced {
        tags.iter()
            .map(|tag| {
                (0..patches.len()).filter(|i| &patches[*i].1 == tag).collect::<Vec<usize>>()
            })
            .collect()
    } else {
        vec![(0..patches.len()).collect()]
    };
    let mut pool = Pool::new(groups, derive_seed(cfg.optim.seed, 0xA11CE));
    let mut flip_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.optim.seed, 0xF11B));

    let ckpt_dir = out_dir.map(|d| d.join("checkpoints"));
    let log_dir = out_dir.map(|d| d.join("logs"));
    for dir in ckpt_dir.iter().chain(log_dir.iter()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }

    let mut state = OptimState::new(model.params());
    let mut log = Vec::with_capacity(cfg.optim.max_iters as usize);
    let mut checkpoint_paths = Vec::new();

    for t in 0..cfg.optim.max_iters {
        let lr = lr_at(&cfg.optim, t)?;
        let mut batch = Vec::with_capacity(cfg.optim.batch_size);
        let mut mix: BTreeMap<String, usize> = BTreeMap::new();
        for _ in 0..cfg.optim.batch_size {
            let (patch, tag) = &patches[pool.draw()];
            let flipped;
            let patch = if cfg.flip && flip_rng.gen_bool(0.5) {
                flipped = patch.flipped_horizontal();
                &flipped
            } else {
                patch
            };
            *mix.entry(tag.clone()).or_insert(0) += 1;
            batch.push(TrainSample::from_patch(patch, tag));
        }
        let loss = train_step(model, &batch, &mut state, &cfg.optim, cfg.grad_clip)?;
        log.push(LogRow { iter: t, lr, loss, mix });

        if cfg.checkpoint_every > 0 && (t + 1) % cfg.checkpoint_every == 0 {
            if let Some(dir) = &ckpt_dir {
                let path = dir.join(format!("ck_{:06}.ckpt", t + 1));
                save_checkpoint(&model.to_checkpoint(), &path)?;
                checkpoint_paths.push(path);
            }
        }
    }

    let checkpoint = model.to_checkpoint();
    if let Some(dir) = &ckpt_dir {
        let path = dir.join("ck_final.ckpt");
        save_checkpoint(&checkpoint, &path)?;
        checkpoint_paths.push(path);
    }
    if let Some(dir) = &log_dir {
        let path = dir.join("train_log.csv");
        std::fs::write(&path, log_to_csv(&log, &tags)).map_err(|e| Error::io(&path, e))?;
    }
    Ok(TrainOutcome { checkpoint, log, checkpoint_paths })
}
