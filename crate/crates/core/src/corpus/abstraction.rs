use std::collections::{HashMap, HashSet};

use super::ctoken::TokKind;

/// Generic stand-in for abstracted identifiers.
pub const IDENTIFIER: &str = "identifier";

/// A code token before identifier abstraction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineToken {
    pub kind: TokKind,
    /// Literal placeholders already applied (`<num>`, `<str>`, `<chr>`).
    pub text: String,
    /// Identifier immediately followed by `(`.
    pub is_call: bool,
}

impl LineToken {
    pub fn new(kind: TokKind, text: impl Into<String>, is_call: bool) -> Self {
        LineToken {
            kind,
            text: text.into(),
            is_call,
        }
    }
}

/// Occurrences of each called name over a collection of lines.
pub fn count_callees<'a>(lines: impl IntoIterator<Item = &'a [LineToken]>) -> HashMap<String, usize> {
    let mut counts = HashMap::new();
    for line in lines {
        for t in line.iter().filter(|t| t.kind == TokKind::Ident && t.is_call) {
            *counts.entry(t.text.clone()).or_default() += 1;
        }
    }
    counts
}

/// Keeps a called function name verbatim when it is not defined in the
/// current file and occurs at least `min_count` times in the corpus; every
/// other identifier becomes [`IDENTIFIER`]. Keywords, literals and operators
/// pass through.
pub fn abstract_identifiers(
    line: &[LineToken],
    callee_counts: &HashMap<String, usize>,
    defined_in_file: &HashSet<String>,
    min_count: usize,
) -> Vec<String> {
    line.iter()
        .map(|t| {
            if t.kind != TokKind::Ident {
                return t.text.clone();
            }
            let keep = t.is_call
                && !defined_in_file.contains(&t.text)
                && callee_counts.get(&t.text).copied().unwrap_or(0) >= min_count;
            if keep {
                t.text.clone()
            } else {
                IDENTIFIER.to_string()
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(name: &str) -> LineToken {
        LineToken::new(TokKind::Ident, name, true)
    }

    fn counts(entries: &[(&str, usize)]) -> HashMap<String, usize> {
        entries.iter().map(|&(k, v)| (k.to_string(), v)).collect()
    }

    #[test]
    fn frequent_external_callee_kept() {
        let line = [call("kmalloc"), LineToken::new(TokKind::Punct, "(", false)];
        let out = abstract_identifiers(&line, &counts(&[("kmalloc", 7)]), &HashSet::new(), 5);
        assert_eq!(out, ["kmalloc", "("]);
    }

    #[test]
    fn local_variable_abstracted() {
        let line = [LineToken::new(TokKind::Ident, "tmp", false)];
        assert_eq!(abstract_identifiers(&line, &HashMap::new(), &HashSet::new(), 5), [IDENTIFIER]);
    }

    #[test]
    fn threshold_boundary() {
        let c = counts(&[("f4", 4), ("f5", 5), ("f6", 6)]);
        let line = [call("f4"), call("f5"), call("f6")];
        assert_eq!(abstract_identifiers(&line, &c, &HashSet::new(), 5), [IDENTIFIER, "f5", "f6"]);
        let c = counts(&[("helper", 3)]);
        assert_eq!(abstract_identifiers(&[call("helper")], &c, &HashSet::new(), 5), [IDENTIFIER]);
    }

    #[test]
    fn locally_defined_callee_abstracted() {
        let c = counts(&[("helper", 50)]);
        let defined: HashSet<String> = ["helper".to_string()].into();
        assert_eq!(abstract_identifiers(&[call("helper")], &c, &defined, 5), [IDENTIFIER]);
    }

    #[test]
    fn keywords_literals_operators_preserved() {
        let line = [
            LineToken::new(TokKind::Keyword, "return", false),
            LineToken::new(TokKind::Number, "<num>", false),
            LineToken::new(TokKind::Punct, "->", false),
            LineToken::new(TokKind::Str, "<str>", false),
        ];
        assert_eq!(
            abstract_identifiers(&line, &HashMap::new(), &HashSet::new(), 1),
            ["return", "<num>", "->", "<str>"]
        );
    }

    #[test]
    fn counting_only_sees_calls() {
        let a = [call("f"), LineToken::new(TokKind::Ident, "f", false), call("g")];
        let b = [call("f")];
        let c = count_callees([&a[..], &b[..]]);
        assert_eq!(c, counts(&[("f", 2), ("g", 1)]));
    }
}
