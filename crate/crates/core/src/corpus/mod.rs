//! Commit extraction and preprocessing.
//!
//! A commit becomes a [`Patch`]: stemmed message words plus, for each changed
//! C file, hunks of removed and added lines. Changed lines are widened to
//! whole statements or control headers, annotated as error checks, error
//! handling or normal code, and tokenized with most identifiers abstracted.

mod abstraction;
mod ctoken;
mod diff;
mod expand;
mod git;
mod message;
mod patchdata;
mod pipeline;
mod rules;
mod scan;
mod types;

#[cfg(test)]
pub(crate) mod testutil;

use std::collections::HashSet;

pub use abstraction::{abstract_identifiers, count_callees, LineToken, IDENTIFIER};
pub use ctoken::{tokenize, CToken, TokKind};
pub use diff::{parse_diff, DiffFile, DiffHunk, DiffLine};
pub use expand::{expand_change, expand_scanned, Expansion, DEFAULT_MAX_STATEMENT_LINES};
pub use git::{
    extract_commits, parse_commit_list, parse_label, read_commit_list, CommitEntry, CommitError, Extraction,
    FileVersions, RawCommit, Repo,
};
pub use message::{default_stopwords, preprocess_message};
pub use patchdata::{format_patch_data, output_paths, parse_patch_data, read_patch_data, write_patch_data, HEADER};
pub use pipeline::{
    finish_patch, getinfo, preprocess_commit, preprocess_commits, GetinfoReport, PendingFile, PendingLine,
    PendingPatch, Preprocessed,
};
pub use rules::{
    annotate_line, annotate_snippet, CompiledRules, ErrorCheckRules, ErrorHandleRules, FileAnnotator, RuleConfig,
};
pub use scan::{FileScan, Function, Guard, Unit, UnitKind};
pub use types::{is_c_path, is_commit_id, AnnotatedLine, Annotation, FileChange, Hunk, LineKind, Patch};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreprocessConfig {
    /// A called function keeps its name when it occurs at least this often.
    pub callee_min_count: usize,
    /// Commits with more removed plus added lines (before expansion) are
    /// dropped. `None` disables the filter.
    pub max_changed_lines: Option<usize>,
    pub stopwords: HashSet<String>,
    /// Drop `Signed-off-by:`-style trailer lines from messages.
    pub strip_trailers: bool,
    pub max_statement_lines: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            callee_min_count: 5,
            max_changed_lines: Some(100),
            stopwords: default_stopwords(),
            strip_trailers: true,
            max_statement_lines: DEFAULT_MAX_STATEMENT_LINES,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.callee_min_count == 0 {
            return Err(Error::Config("callee_min_count must be >= 1".into()));
        }
        Ok(())
    }
}
