//! Small generated corpora for smoke tests and demonstrations.
//!
//! [`xor_corpus`] labels each patch by whether its message marker and its
//! code marker disagree, so neither the message nor the code alone predicts
//! the label.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{AnnotatedLine, Annotation, FileChange, Hunk, LineKind, Patch};

const MSG_MARKERS: [&str; 2] = ["stabl", "featur"];
const CODE_MARKERS: [&str; 2] = ["kfree", "kmalloc"];
const MSG_NOISE: &[&str] = &["fix", "driver", "updat", "handl", "path", "error", "add", "remov", "check", "case"];
const CODE_NOISE: &[&str] = &["identifier", "=", ";", "(", ")", "->", "<num>", "if", "return", "NULL"];

fn noise<'a>(rng: &mut impl Rng, pool: &[&'a str]) -> Vec<&'a str> {
    let n = rng.gen_range(1..4);
    (0..n).map(|_| *pool.choose(rng).expect("nonempty pool")).collect()
}

/// `n` patches; the four (message marker, code marker) combinations occur
/// equally often up to rounding, and the label is their XOR.
pub fn xor_corpus(n: usize, seed: u64) -> Vec<Patch> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut patches = Vec::with_capacity(n);
    for i in 0..n {
        let (m, c) = (i % 2, (i / 2) % 2);
        let mut msg = noise(&mut rng, MSG_NOISE);
        let at = rng.gen_range(0..=msg.len());
        msg.insert(at, MSG_MARKERS[m]);
        let mut code = noise(&mut rng, CODE_NOISE);
        let at = rng.gen_range(0..=code.len());
        code.insert(at, CODE_MARKERS[c]);
        let context = noise(&mut rng, CODE_NOISE);
        let line = |kind, tokens: Vec<&str>| AnnotatedLine {
            kind,
            annotation: Annotation::Normal,
            tokens: tokens.into_iter().map(String::from).collect(),
        };
        patches.push(Patch {
            id: format!("{:040x}", (seed as u128) << 64 | i as u128),
            label: Some(m != c),
            message_tokens: msg.into_iter().map(String::from).collect(),
            files: vec![FileChange {
                path: "drivers/x.c".into(),
                hunks: vec![Hunk {
                    removed: vec![line(LineKind::Removed, context)],
                    added: vec![line(LineKind::Added, code)],
                }],
            }],
            changed_line_count: 2,
        });
    }
    patches.shuffle(&mut rng);
    patches
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_are_xor_and_balanced() {
        let ps = xor_corpus(20, 3);
        assert_eq!(ps.len(), 20);
        assert_eq!(ps.iter().filter(|p| p.label == Some(true)).count(), 10);
        for p in &ps {
            let m = p.message_tokens.iter().any(|t| t == MSG_MARKERS[1]);
            let c = p.files[0].hunks[0].added[0].tokens.iter().any(|t| t == CODE_MARKERS[1]);
            assert_eq!(p.label, Some(m != c));
        }
        assert_eq!(xor_corpus(20, 3), ps);
        let ids: std::collections::HashSet<_> = ps.iter().map(|p| &p.id).collect();
        assert_eq!(ids.len(), 20);
    }
}
