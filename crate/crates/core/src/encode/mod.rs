//! Vocabularies and fixed-shape integer encodings of preprocessed patches.
//!
//! Every patch becomes a message sequence of length `M` and a code tensor of
//! shape `F x 2 x H x N x L` (files, polarity, hunks, lines, words). Content
//! beyond a bound is truncated, keeping prefixes; unused positions hold the
//! `<pad>` index 0.

mod vocab;

pub use vocab::{Dictionary, Vocab, PAD, PAD_INDEX, UNK, UNK_INDEX};

use crate::corpus::{FileChange, LineKind, Patch};
use crate::error::{Error, Result};

/// Padding/truncation bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShapeConfig {
    /// Changed files per patch.
    pub files: usize,
    /// Hunks per file.
    pub hunks: usize,
    /// Lines per hunk and polarity.
    pub lines: usize,
    /// Tokens per line, annotation token included.
    pub words: usize,
    /// Message tokens.
    pub msg_len: usize,
}

impl Default for ShapeConfig {
    fn default() -> Self {
        ShapeConfig {
            files: 5,
            hunks: 8,
            lines: 10,
            words: 120,
            msg_len: 256,
        }
    }
}

impl ShapeConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [self.files, self.hunks, self.lines, self.words, self.msg_len];
        if dims.contains(&0) {
            return Err(Error::Config(format!("all shape bounds must be >= 1, got {self:?}")));
        }
        Ok(())
    }

    /// `[F, 2, H, N, L]`
    pub fn code_dims(&self) -> [usize; 5] {
        [self.files, 2, self.hunks, self.lines, self.words]
    }

    pub fn code_len(&self) -> usize {
        self.code_dims().iter().product()
    }

    /// Number of entries in one polarity plane (`H x N x L`).
    pub fn plane_len(&self) -> usize {
        self.hunks * self.lines * self.words
    }

    /// Flat offset of `[file, polarity, hunk, line, word]`.
    pub fn offset(&self, file: usize, polarity: usize, hunk: usize, line: usize, word: usize) -> usize {
        (((file * 2 + polarity) * self.hunks + hunk) * self.lines + line) * self.words + word
    }
}

/// Index tensors for one patch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedPatch {
    pub id: String,
    pub label: Option<bool>,
    pub msg: Vec<usize>,
    /// Row-major `F x 2 x H x N x L`; polarity 0 is removed code, 1 added.
    pub code: Vec<usize>,
    pub shape: ShapeConfig,
}

impl EncodedPatch {
    /// The `H x N x L` plane of one file and polarity.
    pub fn plane(&self, file: usize, kind: LineKind) -> &[usize] {
        let p = polarity_index(kind);
        let start = self.shape.offset(file, p, 0, 0, 0);
        &self.code[start..start + self.shape.plane_len()]
    }
}

pub fn polarity_index(kind: LineKind) -> usize {
    match kind {
        LineKind::Removed => 0,
        LineKind::Added => 1,
    }
}

/// First `msg_len` tokens, unknown tokens to `<unk>`, right-padded with 0.
pub fn encode_message(tokens: &[String], vocab: &Vocab, msg_len: usize) -> Vec<usize> {
    let mut out: Vec<usize> = tokens.iter().take(msg_len).map(|t| vocab.lookup(t)).collect();
    out.resize(msg_len, PAD_INDEX);
    out
}

pub fn encode_code(files: &[FileChange], vocab: &Vocab, shape: &ShapeConfig) -> Vec<usize> {
    let mut out = vec![PAD_INDEX; shape.code_len()];
    for (fi, file) in files.iter().take(shape.files).enumerate() {
        for (hi, hunk) in file.hunks.iter().take(shape.hunks).enumerate() {
            for kind in [LineKind::Removed, LineKind::Added] {
                let p = polarity_index(kind);
                for (li, line) in hunk.lines(kind).iter().take(shape.lines).enumerate() {
                    let words = std::iter::once(line.annotation.token())
                        .chain(line.tokens.iter().map(String::as_str))
                        .take(shape.words);
                    for (wi, w) in words.enumerate() {
                        out[shape.offset(fi, p, hi, li, wi)] = vocab.lookup(w);
                    }
                }
            }
        }
    }
    out
}

pub fn encode_patch(patch: &Patch, dict: &Dictionary, shape: &ShapeConfig) -> EncodedPatch {
    EncodedPatch {
        id: patch.id.clone(),
        label: patch.label,
        msg: encode_message(&patch.message_tokens, &dict.msg, shape.msg_len),
        code: encode_code(&patch.files, &dict.code, shape),
        shape: *shape,
    }
}
