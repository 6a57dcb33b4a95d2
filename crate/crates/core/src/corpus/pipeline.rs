//! Raw commit to [`Patch`], and the `getinfo` driver.

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::abstraction::{abstract_identifiers, count_callees, LineToken};
use super::ctoken::tokenize;
use super::diff::{parse_diff, DiffLine};
use super::expand::expand_scanned;
use super::git::{extract_commits, CommitEntry, CommitError, RawCommit};
use super::message::preprocess_message;
use super::patchdata::write_patch_data;
use super::rules::{CompiledRules, FileAnnotator, RuleConfig};
use super::scan::FileScan;
use super::types::{is_c_path, AnnotatedLine, Annotation, FileChange, Hunk, LineKind, Patch};
use super::PreprocessConfig;
use crate::encode::Dictionary;
use crate::error::Result;

/// A changed line before identifier abstraction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PendingLine {
    pub kind: LineKind,
    pub annotation: Annotation,
    pub tokens: Vec<LineToken>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PendingFile {
    pub path: String,
    pub hunks: Vec<Vec<PendingLine>>,
    /// Functions defined in either version of the file.
    pub defined: HashSet<String>,
}

/// A commit after every per-commit step; identifier abstraction still needs
/// corpus-wide callee counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PendingPatch {
    pub id: String,
    pub label: Option<bool>,
    pub message_tokens: Vec<String>,
    pub files: Vec<PendingFile>,
    pub changed_line_count: usize,
    pub warnings: Vec<String>,
}

impl PendingPatch {
    fn lines(&self) -> impl Iterator<Item = &[LineToken]> {
        self.files
            .iter()
            .flat_map(|f| f.hunks.iter().flatten())
            .map(|l| l.tokens.as_slice())
    }
}

fn line_tokens(scan: &FileScan, line: &DiffLine) -> Vec<LineToken> {
    if line.number >= 1 && line.number <= scan.line_count {
        scan.tokens_on_line(line.number)
            .map(|(i, t)| LineToken::new(t.kind, t.model_text(), scan.is_call[i]))
            .collect()
    } else {
        let toks = tokenize(&line.text);
        (0..toks.len())
            .map(|i| {
                let call = toks[i].kind == super::ctoken::TokKind::Ident && toks.get(i + 1).is_some_and(|n| n.is("("));
                LineToken::new(toks[i].kind, toks[i].model_text(), call)
            })
            .collect()
    }
}

fn pending_lines(
    kind: LineKind,
    scan: &FileScan,
    annotator: &FileAnnotator<'_>,
    rules: &CompiledRules<'_>,
    lines: &[DiffLine],
) -> Vec<PendingLine> {
    lines
        .iter()
        .map(|l| PendingLine {
            kind,
            annotation: annotator.annotate(l.number, rules),
            tokens: line_tokens(scan, l),
        })
        .filter(|l| !l.tokens.is_empty())
        .collect()
}

/// Per-commit preprocessing: message words, C-file hunks expanded,
/// annotated and tokenized. Commits without any C change are rejected.
pub fn preprocess_commit(
    raw: &RawCommit,
    config: &PreprocessConfig,
    rules: &RuleConfig,
) -> std::result::Result<PendingPatch, String> {
    let compiled = rules.compile();
    let diff = parse_diff(&raw.diff).map_err(|e| e.to_string())?;
    let mut files = Vec::new();
    let mut warnings = Vec::new();
    let mut changed_line_count = 0;
    for df in diff.iter().filter(|f| is_c_path(&f.path)) {
        changed_line_count += df.hunks.iter().map(|h| h.changed_lines()).sum::<usize>();
        let versions = raw.file_contents.get(&df.path).cloned().unwrap_or_default();
        let before = versions.before.unwrap_or_default();
        let after = versions.after.unwrap_or_default();
        let (bscan, ascan) = (FileScan::new(&before), FileScan::new(&after));
        let (bann, aann) = (FileAnnotator::new(&bscan, &compiled), FileAnnotator::new(&ascan, &compiled));
        let mut hunks = Vec::new();
        for h in &df.hunks {
            let e = expand_scanned((&bscan, &before), (&ascan, &after), h, config.max_statement_lines);
            warnings.extend(e.warnings.into_iter().map(|w| format!("{}: {w}", df.path)));
            let mut lines = pending_lines(LineKind::Removed, &bscan, &bann, &compiled, &e.hunk.removed);
            lines.extend(pending_lines(LineKind::Added, &ascan, &aann, &compiled, &e.hunk.added));
            if !lines.is_empty() {
                hunks.push(lines);
            }
        }
        if hunks.is_empty() {
            continue;
        }
        let defined = bscan
            .defined_functions()
            .into_iter()
            .chain(ascan.defined_functions())
            .map(String::from)
            .collect();
        files.push(PendingFile {
            path: df.path.clone(),
            hunks,
            defined,
        });
    }
    if files.is_empty() {
        return Err("no changed C code".into());
    }
    Ok(PendingPatch {
        id: raw.id.clone(),
        label: raw.label,
        message_tokens: preprocess_message(&raw.message, config),
        files,
        changed_line_count,
        warnings,
    })
}

/// Replaces identifiers given corpus-wide callee counts.
pub fn finish_patch(p: &PendingPatch, counts: &HashMap<String, usize>, min_count: usize) -> Patch {
    let files = p
        .files
        .iter()
        .map(|f| FileChange {
            path: f.path.clone(),
            hunks: f
                .hunks
                .iter()
                .map(|lines| {
                    let mut h = Hunk::default();
                    for l in lines {
                        let line = AnnotatedLine {
                            kind: l.kind,
                            annotation: l.annotation,
                            tokens: abstract_identifiers(&l.tokens, counts, &f.defined, min_count),
                        };
                        match l.kind {
                            LineKind::Removed => h.removed.push(line),
                            LineKind::Added => h.added.push(line),
                        }
                    }
                    h
                })
                .collect(),
        })
        .collect();
    Patch {
        id: p.id.clone(),
        label: p.label,
        message_tokens: p.message_tokens.clone(),
        files,
        changed_line_count: p.changed_line_count,
    }
}

#[derive(Debug, Default)]
pub struct Preprocessed {
    pub patches: Vec<Patch>,
    /// Commits dropped, with the reason.
    pub skipped: Vec<CommitError>,
    pub warnings: Vec<String>,
}

/// Preprocesses extracted commits, keeping input order.
pub fn preprocess_commits(raw: &[RawCommit], config: &PreprocessConfig, rules: &RuleConfig) -> Result<Preprocessed> {
    config.validate()?;
    let results: Vec<_> = raw.par_iter().map(|c| preprocess_commit(c, config, rules)).collect();
    let mut out = Preprocessed::default();
    let mut pending = Vec::new();
    for (c, r) in raw.iter().zip(results) {
        let skip = |reason: String| CommitError {
            rev: c.id.clone(),
            reason,
        };
        match r {
            Err(reason) => out.skipped.push(skip(reason)),
            Ok(p) => match config.max_changed_lines {
                Some(max) if p.changed_line_count > max => out.skipped.push(skip(format!(
                    "{} changed lines exceed the limit of {max}",
                    p.changed_line_count
                ))),
                _ => {
                    out.warnings.extend(p.warnings.iter().map(|w| format!("{}: {w}", p.id)));
                    pending.push(p);
                }
            },
        }
    }
    let counts = count_callees(pending.iter().flat_map(PendingPatch::lines));
    out.patches = pending
        .par_iter()
        .map(|p| finish_patch(p, &counts, config.callee_min_count))
        .collect();
    Ok(out)
}

#[derive(Debug)]
pub struct GetinfoReport {
    pub patch_data: PathBuf,
    pub dictionary: PathBuf,
    pub written: usize,
    pub skipped: Vec<CommitError>,
    pub warnings: Vec<String>,
}

/// Extracts, preprocesses and writes `<prefix>.out` and `<prefix>.dict`.
pub fn getinfo(
    entries: &[CommitEntry],
    repo: &Path,
    prefix: &Path,
    config: &PreprocessConfig,
    rules: &RuleConfig,
) -> Result<GetinfoReport> {
    let extraction = extract_commits(repo, entries)?;
    let pre = preprocess_commits(&extraction.commits, config, rules)?;
    let dict = if pre.patches.is_empty() {
        Dictionary::default()
    } else {
        Dictionary::build(&pre.patches, 1, 1)?
    };
    let (patch_data, dictionary) = write_patch_data(&pre.patches, &dict, prefix)?;
    let mut skipped = extraction.errors;
    skipped.extend(pre.skipped);
    Ok(GetinfoReport {
        patch_data,
        dictionary,
        written: pre.patches.len(),
        skipped,
        warnings: pre.warnings,
    })
}
