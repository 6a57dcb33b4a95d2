//! Widening of changed lines to whole statements and control headers.

use std::collections::BTreeSet;

use super::diff::{DiffHunk, DiffLine};
use super::scan::{FileScan, UnitKind};

/// Statements longer than this are left unexpanded (large initializer tables
/// would otherwise swamp the hunk).
pub const DEFAULT_MAX_STATEMENT_LINES: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expansion {
    pub hunk: DiffHunk,
    pub warnings: Vec<String>,
}

/// Closure of `lines` under "add every line of a statement or control header
/// that covers a line already in the set".
fn expand_lines(scan: &FileScan, lines: &[usize], max_span: usize, warnings: &mut Vec<String>) -> BTreeSet<usize> {
    let mut set: BTreeSet<usize> = lines.iter().copied().collect();
    let mut queue: Vec<usize> = lines.to_vec();
    while let Some(line) = queue.pop() {
        if line == 0 || line > scan.line_count {
            warnings.push(format!("line {line} is outside the file; left unexpanded"));
            continue;
        }
        for unit in scan.units.iter().filter(|u| u.covers(line)) {
            if !matches!(unit.kind, UnitKind::Simple | UnitKind::Header) || unit.span() == 1 {
                continue;
            }
            if !unit.balanced {
                warnings.push(format!(
                    "unbalanced statement at lines {}-{}; line {line} left unexpanded",
                    unit.first_line, unit.last_line
                ));
                continue;
            }
            if unit.span() > max_span {
                warnings.push(format!(
                    "statement at lines {}-{} exceeds {max_span} lines; line {line} left unexpanded",
                    unit.first_line, unit.last_line
                ));
                continue;
            }
            for l in unit.first_line..=unit.last_line {
                if set.insert(l) {
                    queue.push(l);
                }
            }
        }
    }
    set
}

fn side(
    scan: &FileScan,
    text_lines: &[&str],
    original: &[DiffLine],
    max_span: usize,
    warnings: &mut Vec<String>,
) -> Vec<DiffLine> {
    if original.is_empty() {
        return Vec::new();
    }
    let numbers: Vec<usize> = original.iter().map(|l| l.number).collect();
    expand_lines(scan, &numbers, max_span, warnings)
        .into_iter()
        .map(|n| match original.iter().find(|l| l.number == n) {
            Some(l) => l.clone(),
            None => DiffLine {
                number: n,
                text: text_lines.get(n - 1).copied().unwrap_or_default().to_string(),
            },
        })
        .collect()
}

/// Expands a hunk given pre-scanned before/after versions of its file.
pub fn expand_scanned(
    before: (&FileScan, &str),
    after: (&FileScan, &str),
    hunk: &DiffHunk,
    max_span: usize,
) -> Expansion {
    let mut warnings = Vec::new();
    let before_lines: Vec<&str> = before.1.lines().collect();
    let after_lines: Vec<&str> = after.1.lines().collect();
    let removed = side(before.0, &before_lines, &hunk.removed, max_span, &mut warnings);
    let added = side(after.0, &after_lines, &hunk.added, max_span, &mut warnings);
    Expansion {
        hunk: DiffHunk { removed, added },
        warnings,
    }
}

/// Expands every changed line of `hunk` to its innermost enclosing simple
/// statement or control header. Removed lines are resolved against
/// `before`, added lines against `after`.
pub fn expand_change(before: &str, after: &str, hunk: &DiffHunk) -> Expansion {
    let b = FileScan::new(before);
    let a = FileScan::new(after);
    expand_scanned((&b, before), (&a, after), hunk, DEFAULT_MAX_STATEMENT_LINES)
}
