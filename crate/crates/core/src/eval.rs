//! Classification metrics and stratified k-fold cross-validation.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::Patch;
use crate::error::{Error, Result};
use crate::model::Hyperparameters;
use crate::train::{fit, predict_patches, TrainOptions};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn new(scores: &[f64], labels: &[bool], threshold: f64) -> Self {
        let mut c = Confusion::default();
        for (&s, &y) in scores.iter().zip(labels) {
            match (s >= threshold, y) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// `None` when only one class is present.
    pub auc: Option<f64>,
    pub threshold: f64,
    pub count: usize,
}

pub fn classification_metrics(scores: &[f64], labels: &[bool], threshold: f64) -> Result<EvalReport> {
    if scores.len() != labels.len() {
        return Err(Error::Data(format!("{} scores but {} labels", scores.len(), labels.len())));
    }
    if scores.is_empty() {
        return Err(Error::Data("no scores to evaluate".into()));
    }
    let c = Confusion::new(scores, labels, threshold);
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(EvalReport {
        accuracy: ratio(c.tp + c.tn, scores.len()),
        precision,
        recall,
        f1,
        auc: auc(scores, labels),
        threshold,
        count: scores.len(),
    })
}

/// Twice the Mann-Whitney U statistic (correctly ordered pairs count 2,
/// ties 1) and the number of positive/negative pairs.
pub fn auc_counts(scores: &[f64], labels: &[bool]) -> (u128, u128) {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let (mut twice_u, mut neg_below) = (0u128, 0u128);
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let (mut pos, mut neg) = (0u128, 0u128);
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if labels[order[j]] {
                pos += 1;
            } else {
                neg += 1;
            }
            j += 1;
        }
        twice_u += 2 * pos * neg_below + pos * neg;
        neg_below += neg;
        i = j;
    }
    let positives = labels.iter().filter(|&&y| y).count() as u128;
    (twice_u, positives * (labels.len() as u128 - positives))
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half. `None` without both classes.
pub fn auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let (twice_u, pairs) = auc_counts(scores, labels);
    (pairs > 0).then(|| twice_u as f64 / (2 * pairs) as f64)
}

pub fn format_auc(auc: Option<f64>) -> String {
    auc.map_or_else(|| "n/a".to_string(), |a| format!("{a:.3}"))
}

/// Fold of every example. Each class is shuffled with the seed and dealt
/// round-robin; negatives continue where positives stopped so fold sizes
/// differ by at most one.
pub fn stratified_folds(labels: &[bool], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::Config(format!("cross-validation needs k >= 2, got {k}")));
    }
    if labels.len() < k {
        return Err(Error::Data(format!("{} labeled patches cannot fill {k} folds", labels.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
    let mut neg: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::Data("cross-validation needs both classes".into()));
    }
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut fold = vec![0; labels.len()];
    for (n, &i) in pos.iter().chain(&neg).enumerate() {
        fold[i] = n % k;
    }
    Ok(fold)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub folds: Vec<EvalReport>,
    pub mean: EvalReport,
}

/// Unweighted mean over folds; AUC averages the folds where it is defined.
pub fn mean_report(folds: &[EvalReport]) -> EvalReport {
    let n = folds.len().max(1) as f64;
    let avg = |f: fn(&EvalReport) -> f64| folds.iter().map(f).sum::<f64>() / n;
    let aucs: Vec<f64> = folds.iter().filter_map(|r| r.auc).collect();
    EvalReport {
        accuracy: avg(|r| r.accuracy),
        precision: avg(|r| r.precision),
        recall: avg(|r| r.recall),
        f1: avg(|r| r.f1),
        auc: (!aucs.is_empty()).then(|| aucs.iter().sum::<f64>() / aucs.len() as f64),
        threshold: folds.first().map_or(DEFAULT_THRESHOLD, |r| r.threshold),
        count: folds.iter().map(|r| r.count).sum(),
    }
}

/// Trains on k-1 folds and scores the held-out fold, k times. Fold `i`
/// trains with seed `seed + i`.
pub fn kfold_cv(patches: &[Patch], k: usize, hyper: &Hyperparameters, opts: &TrainOptions) -> Result<CvReport> {
    let unlabeled: Vec<&str> = patches.iter().filter(|p| p.label.is_none()).map(|p| p.id.as_str()).collect();
    if !unlabeled.is_empty() {
        return Err(Error::Data(format!("unlabeled patches: {}", unlabeled.join(", "))));
    }
    let labels: Vec<bool> = patches.iter().map(|p| p.label == Some(true)).collect();
    let fold_of = stratified_folds(&labels, k, opts.seed)?;
    let mut folds = Vec::with_capacity(k);
    for fold in 0..k {
        let (test, train): (Vec<usize>, Vec<usize>) = (0..patches.len()).partition(|&i| fold_of[i] == fold);
        let train: Vec<Patch> = train.iter().map(|&i| patches[i].clone()).collect();
        let test_patches: Vec<Patch> = test.iter().map(|&i| patches[i].clone()).collect();
        let fold_opts = TrainOptions {
            seed: opts.seed.wrapping_add(fold as u64),
            ..opts.clone()
        };
        let model = fit(hyper, &train, &fold_opts, |_, _| Ok(()))?;
        let scores = predict_patches(&model, &test_patches)?;
        let test_labels: Vec<bool> = test.iter().map(|&i| labels[i]).collect();
        folds.push(classification_metrics(&scores, &test_labels, DEFAULT_THRESHOLD)?);
    }
    let mean = mean_report(&folds);
    Ok(CvReport { folds, mean })
}

/// Fixed-width table with columns Accuracy, Precision, Recall, F1, AUC.
pub fn format_table(cv: &CvReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<6} {:>9} {:>9} {:>9} {:>9} {:>9}",
        "Fold", "Accuracy", "Precision", "Recall", "F1", "AUC"
    );
    let row = |out: &mut String, name: &str, r: &EvalReport| {
        let _ = writeln!(
            out,
            "{name:<6} {:>9.3} {:>9.3} {:>9.3} {:>9.3} {:>9}",
            r.accuracy,
            r.precision,
            r.recall,
            r.f1,
            format_auc(r.auc)
        );
    };
    for (i, r) in cv.folds.iter().enumerate() {
        row(&mut out, &(i + 1).to_string(), r);
    }
    row(&mut out, "mean", &cv.mean);
    out
}

/// `key=value` lines: `fold<i>.<metric>` for each fold, then `mean.<metric>`.
pub fn format_key_values(cv: &CvReport) -> String {
    let mut out = String::new();
    let mut emit = |prefix: &str, r: &EvalReport| {
        let _ = writeln!(out, "{prefix}.accuracy={:.6}", r.accuracy);
        let _ = writeln!(out, "{prefix}.precision={:.6}", r.precision);
        let _ = writeln!(out, "{prefix}.recall={:.6}", r.recall);
        let _ = writeln!(out, "{prefix}.f1={:.6}", r.f1);
        let auc = r.auc.map_or_else(|| "n/a".to_string(), |a| format!("{a:.6}"));
        let _ = writeln!(out, "{prefix}.auc={auc}");
        let _ = writeln!(out, "{prefix}.count={}", r.count);
    };
    for (i, r) in cv.folds.iter().enumerate() {
        emit(&format!("fold{}", i + 1), r);
    }
    emit("mean", &cv.mean);
    out
}
