use proptest::prelude::*;

use super::types::{AnnotatedLine, Annotation, FileChange, Hunk, LineKind, Patch};

const CODE_POOL: &[&str] = &[
    "identifier", "kmalloc", "kfree", "if", "return", "goto", "(", ")", ";", "->", "||", "==", "<num>", "<str>", "NULL",
    "|", "=", "{", "}",
];

fn arb_line(kind: LineKind) -> impl Strategy<Value = AnnotatedLine> {
    (
        prop::sample::select(Annotation::ALL.to_vec()),
        prop::collection::vec(prop::sample::select(CODE_POOL), 1..6),
    )
        .prop_map(move |(annotation, toks)| AnnotatedLine {
            kind,
            annotation,
            tokens: toks.into_iter().map(String::from).collect(),
        })
}

fn arb_hunk() -> impl Strategy<Value = Hunk> {
    (
        prop::collection::vec(arb_line(LineKind::Removed), 0..4),
        prop::collection::vec(arb_line(LineKind::Added), 0..4),
    )
        .prop_filter("hunk must change something", |(r, a)| !(r.is_empty() && a.is_empty()))
        .prop_map(|(removed, added)| Hunk { removed, added })
}

fn arb_file() -> impl Strategy<Value = FileChange> {
    ("[a-z]{1,6}(/[a-z]{1,6})?\\.[ch]", prop::collection::vec(arb_hunk(), 1..4))
        .prop_map(|(path, hunks)| FileChange { path, hunks })
}

/// Structurally valid patches over a small token pool.
pub fn arb_patch() -> impl Strategy<Value = Patch> {
    (
        "[0-9a-f]{40}",
        prop::option::of(any::<bool>()),
        prop::collection::vec("[a-z0-9]{1,8}", 0..8),
        prop::collection::vec(arb_file(), 0..4),
        0usize..200,
    )
        .prop_map(|(id, label, message_tokens, files, changed_line_count)| Patch {
            id,
            label,
            message_tokens,
            files,
            changed_line_count,
        })
}
