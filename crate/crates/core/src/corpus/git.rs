//! Commit extraction through the `git` command line.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use rayon::prelude::*;

use super::diff::parse_diff;
use super::types::{is_c_path, is_commit_id};
use crate::error::{Error, Result};

/// One line of a commit list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommitEntry {
    pub rev: String,
    pub label: Option<bool>,
}

/// Before/after text of a touched file; `None` when the file does not exist
/// on that side.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FileVersions {
    pub before: Option<String>,
    pub after: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawCommit {
    pub id: String,
    pub label: Option<bool>,
    pub message: String,
    pub diff: String,
    /// Keyed by path; only C sources and headers are fetched.
    pub file_contents: BTreeMap<String, FileVersions>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommitError {
    pub rev: String,
    pub reason: String,
}

#[derive(Debug, Default)]
pub struct Extraction {
    pub commits: Vec<RawCommit>,
    pub errors: Vec<CommitError>,
}

pub fn parse_label(s: &str) -> Option<bool> {
    match s {
        "1" | "true" => Some(true),
        "0" | "false" => Some(false),
        _ => None,
    }
}

/// `<sha>[ <label>]` per line; blank lines and `#` comments are skipped.
pub fn parse_commit_list(text: &str, file: &str) -> Result<Vec<CommitEntry>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let rev = parts.next().unwrap_or_default().to_string();
        let label = match parts.next() {
            None => None,
            Some(l) => Some(parse_label(l).ok_or_else(|| Error::Parse {
                file: file.into(),
                line: n + 1,
                msg: format!("label must be one of true|false|1|0, got {l:?}"),
            })?),
        };
        if parts.next().is_some() {
            return Err(Error::Parse {
                file: file.into(),
                line: n + 1,
                msg: "expected `<sha> [label]`".into(),
            });
        }
        out.push(CommitEntry { rev, label });
    }
    Ok(out)
}

pub fn read_commit_list(path: &Path) -> Result<Vec<CommitEntry>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_commit_list(&text, &path.display().to_string())
}

pub struct Repo {
    path: PathBuf,
}

impl Repo {
    pub fn open(path: &Path) -> Result<Self> {
        let repo = Repo {
            path: path.to_path_buf(),
        };
        repo.git(&["rev-parse", "--git-dir"])
            .map_err(|e| Error::Git(format!("{} is not a readable git repository: {e}", path.display())))?;
        Ok(repo)
    }

    fn git_bytes(&self, args: &[&str]) -> Result<Vec<u8>> {
        let out = Command::new("git")
            .arg("-C")
            .arg(&self.path)
            .args(["-c", "core.quotePath=false"])
            .args(args)
            .output()
            .map_err(|e| Error::Git(format!("cannot run git: {e}")))?;
        if !out.status.success() {
            return Err(Error::Git(format!(
                "git {} failed: {}",
                args.join(" "),
                String::from_utf8_lossy(&out.stderr).trim()
            )));
        }
        Ok(out.stdout)
    }

    fn git(&self, args: &[&str]) -> Result<String> {
        self.git_bytes(args).map(|b| String::from_utf8_lossy(&b).into_owned())
    }

    /// Full id of a commit, or `None` if `rev` does not name one.
    pub fn resolve(&self, rev: &str) -> Option<String> {
        let spec = format!("{rev}^{{commit}}");
        self.git(&["rev-parse", "--verify", "--quiet", &spec])
            .ok()
            .map(|s| s.trim().to_string())
            .filter(|s| is_commit_id(s))
    }

    pub fn message(&self, id: &str) -> Result<String> {
        self.git(&["show", "-s", "--format=%B", id])
    }

    /// Zero-context unified diff of a commit against its first parent (or the
    /// empty tree for a root commit).
    pub fn diff(&self, id: &str) -> Result<String> {
        self.git(&[
            "diff-tree",
            "-p",
            "-r",
            "-U0",
            "--root",
            "--no-commit-id",
            "--no-color",
            "--no-renames",
            "--no-ext-diff",
            "--src-prefix=a/",
            "--dst-prefix=b/",
            id,
        ])
    }

    pub fn file_at(&self, rev: &str, path: &str) -> Option<String> {
        let spec = format!("{rev}:{path}");
        self.git_bytes(&["cat-file", "blob", &spec])
            .ok()
            .map(|b| String::from_utf8_lossy(&b).into_owned())
    }

    pub fn extract(&self, entry: &CommitEntry) -> std::result::Result<RawCommit, CommitError> {
        let fail = |reason: String| CommitError {
            rev: entry.rev.clone(),
            reason,
        };
        let id = self
            .resolve(&entry.rev)
            .ok_or_else(|| fail("not a commit in this repository".into()))?;
        let message = self.message(&id).map_err(|e| fail(e.to_string()))?;
        let diff = self.diff(&id).map_err(|e| fail(e.to_string()))?;
        if diff.trim().is_empty() {
            return Err(fail("empty diff (merge commit or no changes)".into()));
        }
        let files = parse_diff(&diff).map_err(|e| fail(e.to_string()))?;
        let parent = self.resolve(&format!("{id}^"));
        let mut file_contents = BTreeMap::new();
        for f in files.iter().filter(|f| is_c_path(&f.path)) {
            let before = parent.as_ref().and_then(|p| self.file_at(p, &f.path));
            let after = self.file_at(&id, &f.path);
            file_contents.insert(f.path.clone(), FileVersions { before, after });
        }
        Ok(RawCommit {
            id,
            label: entry.label,
            message,
            diff,
            file_contents,
        })
    }
}

/// Extracts every listed commit in list order. Commits that cannot be read
/// become error records; an unreadable repository is fatal.
pub fn extract_commits(repo_path: &Path, entries: &[CommitEntry]) -> Result<Extraction> {
    let repo = Repo::open(repo_path)?;
    let results: Vec<_> = entries.par_iter().map(|e| repo.extract(e)).collect();
    let mut out = Extraction::default();
    for r in results {
        match r {
            Ok(c) => out.commits.push(c),
            Err(e) => out.errors.push(e),
        }
    }
    Ok(out)
}
