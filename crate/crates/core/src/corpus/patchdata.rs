//! The patch-data file (`<prefix>.out`).
//!
//! Line-oriented UTF-8. After a fixed header line, each patch is:
//!
//! ```text
//! commit: <40-hex sha>
//! label: <1|0|->
//! lines: <changed line count before expansion>
//! msg: <space-separated message tokens>
//! file: <path>                       (repeated)
//! hunk:                              (repeated, within a file)
//! -|<annotation>|<space-separated tokens>   (removed lines)
//! +|<annotation>|<space-separated tokens>   (added lines)
//! ```
//!
//! Annotations are `err-check`, `err-handle` or `normal`. Removed lines of a
//! hunk precede its added lines. Tokens never contain whitespace, so the
//! token field is split on single spaces; it may itself contain `|`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::types::{is_commit_id, AnnotatedLine, Annotation, FileChange, Hunk, LineKind, Patch};
use crate::encode::Dictionary;
use crate::error::{Error, Result};

pub const HEADER: &str = "# patchnet patch-data v1";

pub fn format_patch_data(patches: &[Patch]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{HEADER}");
    for p in patches {
        let label = match p.label {
            Some(true) => "1",
            Some(false) => "0",
            None => "-",
        };
        let _ = writeln!(out, "commit: {}", p.id);
        let _ = writeln!(out, "label: {label}");
        let _ = writeln!(out, "lines: {}", p.changed_line_count);
        let _ = writeln!(out, "msg: {}", p.message_tokens.join(" "));
        for f in &p.files {
            let _ = writeln!(out, "file: {}", f.path);
            for h in &f.hunks {
                let _ = writeln!(out, "hunk:");
                for l in h.removed.iter().chain(&h.added) {
                    let _ = writeln!(out, "{}|{}|{}", l.kind.marker(), l.annotation, l.tokens.join(" "));
                }
            }
        }
    }
    out
}

pub fn parse_patch_data(text: &str, file: &str) -> Result<Vec<Patch>> {
    let err = |line: usize, msg: String| Error::Parse {
        file: file.into(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l)).peekable();
    match lines.next() {
        Some((_, HEADER)) => {}
        Some((n, other)) => return Err(err(n, format!("expected header {HEADER:?}, got {other:?}"))),
        None => return Err(err(1, "empty file (missing header)".into())),
    }

    let mut patches: Vec<Patch> = Vec::new();
    let field = |n: usize, line: &str, key: &str| -> Result<String> {
        line.strip_prefix(key)
            .map(|rest| rest.strip_prefix(' ').unwrap_or(rest).to_string())
            .ok_or_else(|| err(n, format!("expected `{key}`, got {line:?}")))
    };
    while let Some((n, line)) = lines.next() {
        let id = field(n, line, "commit:")?;
        if !is_commit_id(&id) {
            return Err(err(n, format!("invalid commit id {id:?}")));
        }
        let (n, line) = lines.next().ok_or_else(|| err(n + 1, "missing label".into()))?;
        let label = match field(n, line, "label:")?.as_str() {
            "1" => Some(true),
            "0" => Some(false),
            "-" => None,
            other => return Err(err(n, format!("invalid label {other:?}"))),
        };
        let (n, line) = lines.next().ok_or_else(|| err(n + 1, "missing line count".into()))?;
        let changed_line_count = field(n, line, "lines:")?
            .parse()
            .map_err(|_| err(n, format!("invalid line count in {line:?}")))?;
        let (n, line) = lines.next().ok_or_else(|| err(n + 1, "missing message".into()))?;
        let message_tokens = field(n, line, "msg:")?
            .split(' ')
            .filter(|t| !t.is_empty())
            .map(String::from)
            .collect();

        let mut files: Vec<FileChange> = Vec::new();
        while let Some(&(n, line)) = lines.peek() {
            if line.starts_with("commit:") {
                break;
            }
            lines.next();
            if let Some(path) = line.strip_prefix("file: ") {
                files.push(FileChange {
                    path: path.to_string(),
                    hunks: Vec::new(),
                });
            } else if line == "hunk:" {
                let f = files.last_mut().ok_or_else(|| err(n, "hunk before file".into()))?;
                f.hunks.push(Hunk::default());
            } else {
                let mut parts = line.splitn(3, '|');
                let (marker, ann, toks) = (parts.next(), parts.next(), parts.next());
                let (Some(marker), Some(ann), Some(toks)) = (marker, ann, toks) else {
                    return Err(err(n, format!("unrecognized line {line:?}")));
                };
                let kind = match marker {
                    "-" => LineKind::Removed,
                    "+" => LineKind::Added,
                    _ => return Err(err(n, format!("unknown line marker {marker:?}"))),
                };
                let annotation: Annotation = ann.parse().map_err(|e| err(n, e))?;
                let tokens: Vec<String> = toks.split(' ').filter(|t| !t.is_empty()).map(String::from).collect();
                if tokens.is_empty() {
                    return Err(err(n, "line without tokens".into()));
                }
                let hunk = files
                    .last_mut()
                    .and_then(|f| f.hunks.last_mut())
                    .ok_or_else(|| err(n, "code line outside a hunk".into()))?;
                if kind == LineKind::Removed && !hunk.added.is_empty() {
                    return Err(err(n, "removed line after added lines in a hunk".into()));
                }
                let line = AnnotatedLine {
                    kind,
                    annotation,
                    tokens,
                };
                match kind {
                    LineKind::Removed => hunk.removed.push(line),
                    LineKind::Added => hunk.added.push(line),
                }
            }
        }
        for f in &files {
            if f.hunks.is_empty() || f.hunks.iter().any(Hunk::is_empty) {
                return Err(err(n, format!("file {} of commit {id} has an empty hunk list or hunk", f.path)));
            }
        }
        patches.push(Patch {
            id,
            label,
            message_tokens,
            files,
            changed_line_count,
        });
    }
    Ok(patches)
}

pub fn read_patch_data(path: &Path) -> Result<Vec<Patch>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_patch_data(&text, &path.display().to_string())
}

/// Output paths for a prefix: `<prefix>.out` and `<prefix>.dict`.
pub fn output_paths(prefix: &Path) -> (PathBuf, PathBuf) {
    let mut out = prefix.as_os_str().to_owned();
    out.push(".out");
    let mut dict = prefix.as_os_str().to_owned();
    dict.push(".dict");
    (PathBuf::from(out), PathBuf::from(dict))
}

/// Writes the patch-data and dictionary files for `patches`. Every token of
/// every patch must be present in `dictionary`.
pub fn write_patch_data(patches: &[Patch], dictionary: &Dictionary, prefix: &Path) -> Result<(PathBuf, PathBuf)> {
    for p in patches {
        if let Some(t) = p.message_tokens.iter().find(|t| dictionary.msg.get(t).is_none()) {
            return Err(Error::Data(format!("message token {t:?} of {} missing from dictionary", p.id)));
        }
        if let Some(t) = p.code_token_lines().flatten().find(|t| dictionary.code.get(t).is_none()) {
            return Err(Error::Data(format!("code token {t:?} of {} missing from dictionary", p.id)));
        }
    }
    let (out, dict) = output_paths(prefix);
    std::fs::write(&out, format_patch_data(patches)).map_err(|e| Error::io(&out, e))?;
    dictionary.write(&dict)?;
    Ok((out, dict))
}
