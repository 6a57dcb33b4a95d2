//! Unified diff parsing. Each git hunk is split at context lines so a
//! [`DiffHunk`] is one contiguous run of removed and added lines.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiffLine {
    /// 1-based line number in the old (removed) or new (added) file.
    pub number: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DiffHunk {
    pub removed: Vec<DiffLine>,
    pub added: Vec<DiffLine>,
}

impl DiffHunk {
    pub fn is_empty(&self) -> bool {
        self.removed.is_empty() && self.added.is_empty()
    }

    pub fn changed_lines(&self) -> usize {
        self.removed.len() + self.added.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiffFile {
    /// Path in the new tree, or the old tree for deletions.
    pub path: String,
    pub hunks: Vec<DiffHunk>,
}

fn strip_prefix_path(raw: &str) -> Option<String> {
    let raw = raw.split('\t').next().unwrap_or(raw).trim_end();
    if raw == "/dev/null" {
        return None;
    }
    let unquoted = raw.trim_matches('"');
    Some(
        unquoted
            .strip_prefix("a/")
            .or_else(|| unquoted.strip_prefix("b/"))
            .unwrap_or(unquoted)
            .to_string(),
    )
}

/// `@@ -a[,b] +c[,d] @@` → (a, b, c, d)
fn parse_range_header(line: &str, lineno: usize) -> Result<(usize, usize, usize, usize)> {
    let bad = |msg: &str| Error::Diff {
        line: lineno,
        msg: format!("{msg}: {line:?}"),
    };
    let rest = line.strip_prefix("@@ ").ok_or_else(|| bad("malformed hunk header"))?;
    let end = rest.find(" @@").ok_or_else(|| bad("malformed hunk header"))?;
    let mut parts = rest[..end].split(' ');
    let mut range = |sign: char| -> Result<(usize, usize)> {
        let p = parts
            .next()
            .and_then(|p| p.strip_prefix(sign))
            .ok_or_else(|| bad("malformed hunk range"))?;
        let (start, count) = match p.split_once(',') {
            Some((s, c)) => (s, c),
            None => (p, "1"),
        };
        let start = start.parse().map_err(|_| bad("malformed hunk start"))?;
        let count = count.parse().map_err(|_| bad("malformed hunk count"))?;
        Ok((start, count))
    };
    let (a, b) = range('-')?;
    let (c, d) = range('+')?;
    if parts.next().is_some() {
        return Err(bad("malformed hunk header"));
    }
    Ok((a, b, c, d))
}

pub fn parse_diff(text: &str) -> Result<Vec<DiffFile>> {
    let lines: Vec<&str> = text.lines().collect();
    let mut files: Vec<DiffFile> = Vec::new();
    let mut old_path: Option<String> = None;
    let mut i = 0;
    while i < lines.len() {
        let line = lines[i];
        let lineno = i + 1;
        if line.starts_with("diff --git ") {
            old_path = None;
            // Placeholder path from the header, refined by ---/+++ lines.
            let path = line
                .rsplit_once(" b/")
                .map(|(_, p)| p.to_string())
                .unwrap_or_default();
            files.push(DiffFile { path, hunks: Vec::new() });
            i += 1;
        } else if let Some(p) = line.strip_prefix("--- ") {
            old_path = strip_prefix_path(p);
            i += 1;
        } else if let Some(p) = line.strip_prefix("+++ ") {
            let path = strip_prefix_path(p).or_else(|| old_path.clone()).unwrap_or_default();
            match files.last_mut() {
                Some(f) if f.hunks.is_empty() => f.path = path,
                _ => files.push(DiffFile { path, hunks: Vec::new() }),
            }
            i += 1;
        } else if line.starts_with("@@") {
            let (old_start, old_count, new_start, new_count) = parse_range_header(line, lineno)?;
            let file = files.last_mut().ok_or_else(|| Error::Diff {
                line: lineno,
                msg: "hunk before any file header".into(),
            })?;
            if old_count == 0 && new_count == 0 {
                return Err(Error::Diff {
                    line: lineno,
                    msg: "empty hunk".into(),
                });
            }
            // Pure insertions report the line *before* the insertion point.
            let mut old_no = if old_count == 0 { old_start + 1 } else { old_start };
            let mut new_no = if new_count == 0 { new_start + 1 } else { new_start };
            let (mut old_left, mut new_left) = (old_count, new_count);
            let mut current = DiffHunk::default();
            i += 1;
            while old_left > 0 || new_left > 0 {
                let Some(&body) = lines.get(i) else {
                    return Err(Error::Diff {
                        line: i + 1,
                        msg: "hunk body ends early".into(),
                    });
                };
                match body.chars().next() {
                    Some('-') if old_left > 0 => {
                        current.removed.push(DiffLine {
                            number: old_no,
                            text: body[1..].to_string(),
                        });
                        old_no += 1;
                        old_left -= 1;
                    }
                    Some('+') if new_left > 0 => {
                        current.added.push(DiffLine {
                            number: new_no,
                            text: body[1..].to_string(),
                        });
                        new_no += 1;
                        new_left -= 1;
                    }
                    Some(' ') | None if old_left > 0 && new_left > 0 => {
                        if !current.is_empty() {
                            file.hunks.push(std::mem::take(&mut current));
                        }
                        old_no += 1;
                        new_no += 1;
                        old_left -= 1;
                        new_left -= 1;
                    }
                    Some('\\') => {}
                    _ => {
                        return Err(Error::Diff {
                            line: i + 1,
                            msg: format!("unexpected line in hunk body: {body:?}"),
                        })
                    }
                }
                i += 1;
            }
            while lines.get(i).is_some_and(|l| l.starts_with('\\')) {
                i += 1;
            }
            if !current.is_empty() {
                file.hunks.push(current);
            }
        } else {
            // index/mode/similarity/binary lines and anything outside hunks
            i += 1;
        }
    }
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    const ONE: &str = "\
diff --git a/drivers/x.c b/drivers/x.c
index 1111111..2222222 100644
--- a/drivers/x.c
+++ b/drivers/x.c
@@ -10 +10,2 @@ static int probe(void)
-\tfoo(a);
+\tfoo(a, b);
+\tbar();
";

    #[test]
    fn single_hunk_counts() {
        let files = parse_diff(ONE).unwrap();
        assert_eq!(files.len(), 1);
        assert_eq!(files[0].path, "drivers/x.c");
        assert_eq!(files[0].hunks.len(), 1);
        let h = &files[0].hunks[0];
        assert_eq!(h.removed.len(), 1);
        assert_eq!(h.added.len(), 2);
        assert_eq!(h.removed[0], DiffLine { number: 10, text: "\tfoo(a);".into() });
        assert_eq!(h.added[1].number, 11);
    }

    #[test]
    fn two_files_in_order() {
        let text = format!(
            "{ONE}diff --git a/a.h b/a.h\nnew file mode 100644\n--- /dev/null\n+++ b/a.h\n@@ -0,0 +1 @@\n+int x;\n"
        );
        let files = parse_diff(&text).unwrap();
        let paths: Vec<_> = files.iter().map(|f| f.path.as_str()).collect();
        assert_eq!(paths, ["drivers/x.c", "a.h"]);
        assert_eq!(files[1].hunks[0].added[0].number, 1);
    }

    #[test]
    fn deleted_file_uses_old_path() {
        let text = "diff --git a/gone.c b/gone.c\ndeleted file mode 100644\n--- a/gone.c\n+++ /dev/null\n@@ -1,2 +0,0 @@\n-a;\n-b;\n";
        let files = parse_diff(text).unwrap();
        assert_eq!(files[0].path, "gone.c");
        assert_eq!(files[0].hunks[0].removed.len(), 2);
    }

    #[test]
    fn context_splits_hunks() {
        let text = "--- a/f.c\n+++ b/f.c\n@@ -1,5 +1,5 @@\n a;\n-b;\n+B;\n c;\n-d;\n+D;\n e;\n";
        let files = parse_diff(text).unwrap();
        assert_eq!(files[0].hunks.len(), 2);
        assert_eq!(files[0].hunks[1].removed[0].number, 4);
        assert_eq!(files[0].hunks[1].added[0].number, 4);
    }

    #[test]
    fn insertion_after_line() {
        let text = "--- a/f.c\n+++ b/f.c\n@@ -5,0 +6,2 @@\n+x;\n+y;\n";
        let h = &parse_diff(text).unwrap()[0].hunks[0];
        assert_eq!(h.added.iter().map(|l| l.number).collect::<Vec<_>>(), [6, 7]);
    }

    #[test]
    fn empty_hunk_body_is_an_error() {
        let text = "--- a/f.c\n+++ b/f.c\n@@ -1 +1 @@\n";
        assert!(matches!(parse_diff(text), Err(Error::Diff { line: 4, .. })));
        let text = "--- a/f.c\n+++ b/f.c\n@@ -1,0 +1,0 @@\n";
        assert!(matches!(parse_diff(text), Err(Error::Diff { line: 3, .. })));
    }

    #[test]
    fn malformed_header_names_line() {
        let text = "--- a/f.c\n+++ b/f.c\n@@ -x +1 @@\n+a\n";
        match parse_diff(text) {
            Err(Error::Diff { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn no_newline_marker_is_skipped() {
        let text = "--- a/f.c\n+++ b/f.c\n@@ -1 +1 @@\n-a\n\\ No newline at end of file\n+b\n\\ No newline at end of file\n";
        let h = &parse_diff(text).unwrap()[0].hunks[0];
        assert_eq!((h.removed.len(), h.added.len()), (1, 1));
    }
}
