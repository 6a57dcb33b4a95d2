use std::fmt;
use std::str::FromStr;

/// Which side of the diff a line comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LineKind {
    Removed,
    Added,
}

impl LineKind {
    pub fn marker(self) -> char {
        match self {
            LineKind::Removed => '-',
            LineKind::Added => '+',
        }
    }
}

/// Coarse semantic role of a changed line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Annotation {
    ErrorCheck,
    ErrorHandle,
    Normal,
}

impl Annotation {
    pub const ALL: [Annotation; 3] = [Annotation::ErrorCheck, Annotation::ErrorHandle, Annotation::Normal];

    /// Name used in the patch-data file.
    pub fn as_str(self) -> &'static str {
        match self {
            Annotation::ErrorCheck => "err-check",
            Annotation::ErrorHandle => "err-handle",
            Annotation::Normal => "normal",
        }
    }

    /// Reserved code-vocabulary token placed in front of each encoded line.
    pub fn token(self) -> &'static str {
        match self {
            Annotation::ErrorCheck => "<err-check>",
            Annotation::ErrorHandle => "<err-handle>",
            Annotation::Normal => "<normal>",
        }
    }
}

impl fmt::Display for Annotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Annotation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Annotation::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| format!("unknown annotation {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedLine {
    pub kind: LineKind,
    pub annotation: Annotation,
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Hunk {
    pub removed: Vec<AnnotatedLine>,
    pub added: Vec<AnnotatedLine>,
}

impl Hunk {
    pub fn lines(&self, kind: LineKind) -> &[AnnotatedLine] {
        match kind {
            LineKind::Removed => &self.removed,
            LineKind::Added => &self.added,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.removed.is_empty() && self.added.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileChange {
    pub path: String,
    pub hunks: Vec<Hunk>,
}

/// A preprocessed commit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Patch {
    pub id: String,
    pub label: Option<bool>,
    pub message_tokens: Vec<String>,
    pub files: Vec<FileChange>,
    /// Removed plus added lines as reported by the diff, before expansion.
    pub changed_line_count: usize,
}

impl Patch {
    /// Code tokens of every line, each line led by its annotation token.
    pub fn code_token_lines(&self) -> impl Iterator<Item = impl Iterator<Item = &str>> {
        self.files.iter().flat_map(|f| f.hunks.iter()).flat_map(|h| {
            h.removed.iter().chain(h.added.iter()).map(|l| {
                std::iter::once(l.annotation.token()).chain(l.tokens.iter().map(String::as_str))
            })
        })
    }

    pub fn hunk_count(&self) -> usize {
        self.files.iter().map(|f| f.hunks.len()).sum()
    }

    /// Copy with the label removed, as handed to prediction.
    pub fn unlabeled(&self) -> Patch {
        Patch {
            label: None,
            ..self.clone()
        }
    }
}

/// True when `id` is a full 40-character lowercase hex SHA-1.
pub fn is_commit_id(id: &str) -> bool {
    id.len() == 40 && id.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
}

/// True for paths the preprocessor understands (C sources and headers).
pub fn is_c_path(path: &str) -> bool {
    path.ends_with(".c") || path.ends_with(".h")
}
