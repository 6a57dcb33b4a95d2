//! Mini-batch training and batch prediction.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::corpus::{read_patch_data, Patch};
use crate::encode::{Dictionary, EncodedPatch};
use crate::error::{Error, Result};
use crate::model::{load_model, save_model, Hyperparameters, PatchNetModel};
use crate::nn::{add_l2_grad, bce, l2_penalty, AdamState, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub seed: u64,
    /// Rescale the batch gradient to at most this global L2 norm.
    pub clip: Option<f64>,
    /// Fraction of the training patches held out for a per-epoch
    /// validation loss. 0 disables.
    pub valid_ratio: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            seed: 0,
            clip: None,
            valid_ratio: 0.0,
        }
    }
}

/// One line of the loss log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
    pub valid_loss: Option<f64>,
}

impl EpochLog {
    /// `epoch<TAB>mean_loss`, plus `<TAB>valid_loss` when validating.
    pub fn line(&self) -> String {
        match self.valid_loss {
            Some(v) => format!("{}\t{:.6}\t{:.6}", self.epoch, self.mean_loss, v),
            None => format!("{}\t{:.6}", self.epoch, self.mean_loss),
        }
    }
}

fn require_labels(patches: &[Patch]) -> Result<Vec<bool>> {
    let missing: Vec<&str> = patches.iter().filter(|p| p.label.is_none()).map(|p| p.id.as_str()).collect();
    if !missing.is_empty() {
        return Err(Error::Data(format!("unlabeled patches in training data: {}", missing.join(", "))));
    }
    Ok(patches.iter().map(|p| p.label == Some(true)).collect())
}

fn scaled(t: &mut Tensor, factor: f64) {
    t.data_mut().iter_mut().for_each(|v| *v *= factor);
}

/// Mean cross-entropy of the model over encoded examples, without dropout.
pub fn mean_loss(model: &PatchNetModel, xs: &[EncodedPatch], labels: &[bool]) -> Result<f64> {
    if xs.is_empty() {
        return Ok(0.0);
    }
    let scores = score_encoded(model, xs)?;
    let total: f64 = scores
        .iter()
        .zip(labels)
        .map(|(&p, &y)| bce(p, if y { 1.0 } else { 0.0 }))
        .sum();
    Ok(total / xs.len() as f64)
}

/// Trains a fresh model on `patches`. The dictionary is built from the
/// training portion. `on_epoch` runs after every epoch with the log line and
/// the current model; with zero epochs it never runs.
pub fn fit(
    hyper: &Hyperparameters,
    patches: &[Patch],
    opts: &TrainOptions,
    mut on_epoch: impl FnMut(&EpochLog, &PatchNetModel) -> Result<()>,
) -> Result<PatchNetModel> {
    hyper.validate()?;
    let labels = require_labels(patches)?;
    if !(0.0..1.0).contains(&opts.valid_ratio) {
        return Err(Error::Config(format!("valid_ratio must be in [0, 1), got {}", opts.valid_ratio)));
    }
    if let Some(c) = opts.clip {
        if !(c > 0.0) {
            return Err(Error::Config(format!("clip must be > 0, got {c}")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let mut order: Vec<usize> = (0..patches.len()).collect();
    let n_valid = (patches.len() as f64 * opts.valid_ratio).round() as usize;
    if n_valid > 0 {
        order.shuffle(&mut rng);
    }
    let (valid_idx, train_idx) = order.split_at(n_valid);
    let train: Vec<Patch> = train_idx.iter().map(|&i| patches[i].clone()).collect();
    if train.is_empty() {
        return Err(Error::Data("no training patches".into()));
    }
    let dict = Dictionary::build(&train, 1, 1)?;
    let mut model = PatchNetModel::new(hyper.clone(), dict, &mut rng)?;
    let xs: Vec<EncodedPatch> = train.iter().map(|p| model.encode(p)).collect();
    let ys: Vec<bool> = train_idx.iter().map(|&i| labels[i]).collect();
    let valid_xs: Vec<EncodedPatch> = valid_idx.iter().map(|&i| model.encode(&patches[i])).collect();
    let valid_ys: Vec<bool> = valid_idx.iter().map(|&i| labels[i]).collect();

    let mut adam = AdamState::new(hyper.learning_rate);
    let mut step = 0usize;
    let mut perm: Vec<usize> = (0..xs.len()).collect();
    for epoch in 1..=hyper.num_epochs {
        perm.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in perm.chunks(hyper.batch_size) {
            step += 1;
            let seeds: Vec<u64> = batch.iter().map(|_| rng.gen()).collect();
            let results: Vec<(f64, BTreeMap<String, Tensor>)> = batch
                .par_iter()
                .zip(seeds.par_iter())
                .map(|(&i, &s)| model.example_grads(&xs[i], ys[i], None, &mut ChaCha8Rng::seed_from_u64(s)))
                .collect::<Result<_>>()?;
            let inv = 1.0 / batch.len() as f64;
            let mut data_loss = 0.0;
            let mut grads: BTreeMap<String, Tensor> = BTreeMap::new();
            for (l, g) in results {
                data_loss += l;
                for (name, t) in g {
                    match grads.get_mut(&name) {
                        Some(acc) => acc.data_mut().iter_mut().zip(t.data()).for_each(|(a, b)| *a += b),
                        None => {
                            grads.insert(name, t);
                        }
                    }
                }
            }
            grads.values_mut().for_each(|t| scaled(t, inv));
            let batch_loss = data_loss * inv + l2_penalty(&model.params, hyper.l2_reg_lambda);
            add_l2_grad(&model.params, hyper.l2_reg_lambda, &mut grads);
            let norm_sq: f64 = grads.values().map(Tensor::sum_squares).sum();
            if !batch_loss.is_finite() || !norm_sq.is_finite() {
                return Err(Error::NonFiniteLoss { step });
            }
            if let Some(c) = opts.clip {
                let norm = norm_sq.sqrt();
                if norm > c {
                    grads.values_mut().for_each(|t| scaled(t, c / norm));
                }
            }
            adam.step(&mut model.params, &grads)?;
            epoch_loss += batch_loss * batch.len() as f64;
        }
        let log = EpochLog {
            epoch,
            mean_loss: epoch_loss / xs.len() as f64,
            valid_loss: if valid_xs.is_empty() {
                None
            } else {
                Some(mean_loss(&model, &valid_xs, &valid_ys)?)
            },
        };
        on_epoch(&log, &model)?;
    }
    Ok(model)
}

/// Sibling log file of a model directory: `<model_dir>.train.log`.
pub fn log_path(model_dir: &Path) -> PathBuf {
    let mut s = model_dir.as_os_str().to_owned();
    s.push(".train.log");
    PathBuf::from(s)
}

/// Trains on a patch-data file, checkpointing into `model_dir` after every
/// epoch. Loss lines go to `log` and to [`log_path`].
pub fn train(
    data: &Path,
    hyper: &Hyperparameters,
    model_dir: &Path,
    opts: &TrainOptions,
    log: &mut dyn Write,
) -> Result<Vec<EpochLog>> {
    let patches = read_patch_data(data)?;
    let lp = log_path(model_dir);
    let mut file = std::fs::File::create(&lp).map_err(|e| Error::io(&lp, e))?;
    let mut logs = Vec::new();
    let model = fit(hyper, &patches, opts, |entry, model| {
        let line = entry.line();
        writeln!(log, "{line}").map_err(|e| Error::io(Path::new("<log>"), e))?;
        writeln!(file, "{line}").map_err(|e| Error::io(&lp, e))?;
        logs.push(*entry);
        save_model(model, model_dir)
    })?;
    if hyper.num_epochs == 0 {
        save_model(&model, model_dir)?;
    }
    Ok(logs)
}

pub fn score_encoded(model: &PatchNetModel, xs: &[EncodedPatch]) -> Result<Vec<f64>> {
    xs.par_iter().map(|x| model.score(x, None)).collect()
}

/// Scores patches in input order. Labels are stripped before encoding.
pub fn predict_patches(model: &PatchNetModel, patches: &[Patch]) -> Result<Vec<f64>> {
    patches
        .par_iter()
        .map(|p| model.score(&model.encode(&p.unlabeled()), None))
        .collect()
}

/// `<sha>\t<score>` lines with six decimals.
pub fn format_predictions(patches: &[Patch], scores: &[f64]) -> String {
    patches
        .iter()
        .zip(scores)
        .map(|(p, s)| format!("{}\t{s:.6}\n", p.id))
        .collect()
}

/// Loads `model_dir`, scores `data` and returns the prediction lines.
pub fn predict(data: &Path, model_dir: &Path) -> Result<String> {
    let model = load_model(model_dir)?;
    let patches = read_patch_data(data)?;
    let scores = predict_patches(&model, &patches)?;
    Ok(format_predictions(&patches, &scores))
}
