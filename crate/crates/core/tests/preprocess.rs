mod common;

use patchnet::corpus::{
    extract_commits, getinfo, parse_commit_list, read_patch_data, Annotation, CommitEntry, LineKind, Patch,
    PreprocessConfig, RuleConfig, IDENTIFIER,
};
use patchnet::encode::Dictionary;

fn run_getinfo(dir: &std::path::Path, fx: &common::Fixture) -> (Vec<Patch>, String, String, Vec<String>) {
    let entries = parse_commit_list(&fx.list(true), "list").unwrap();
    let prefix = dir.join("training_data");
    let report = getinfo(
        &entries,
        &fx.repo,
        &prefix,
        &PreprocessConfig::default(),
        &RuleConfig::default(),
    )
    .unwrap();
    let out = std::fs::read_to_string(&report.patch_data).unwrap();
    let dict = std::fs::read_to_string(&report.dictionary).unwrap();
    let patches = read_patch_data(&report.patch_data).unwrap();
    let skipped = report.skipped.iter().map(|s| s.rev.clone()).collect();
    (patches, out, dict, skipped)
}

fn lines(p: &Patch, kind: LineKind) -> Vec<&patchnet::corpus::AnnotatedLine> {
    p.files.iter().flat_map(|f| f.hunks.iter()).flat_map(|h| h.lines(kind).iter()).collect()
}

fn text(l: &patchnet::corpus::AnnotatedLine) -> String {
    l.tokens.join(" ")
}

#[test]
fn fixture_matches_golden_files() {
    let dir = tempfile::tempdir().unwrap();
    let fx = common::build(dir.path());
    let (_, out, dict, _) = run_getinfo(dir.path(), &fx);
    common::check_golden("fixture.out", &out);
    common::check_golden("fixture.dict", &dict);
    Dictionary::parse(&dict, "fixture.dict").unwrap();
}

#[test]
fn fixture_exercises_each_rule() {
    let dir = tempfile::tempdir().unwrap();
    let fx = common::build(dir.path());
    let (patches, _, _, skipped) = run_getinfo(dir.path(), &fx);
    let sha = |i: usize| fx.commits[i].0.clone();
    let by_id = |i: usize| patches.iter().find(|p| p.id == sha(i)).unwrap_or_else(|| panic!("commit {i} missing"));

    // README-only and oversized commits are dropped, everything else kept in order.
    assert_eq!(skipped, vec![sha(12), sha(13)]);
    let ids: Vec<_> = patches.iter().map(|p| p.id.clone()).collect();
    assert_eq!(ids, (0..12).map(sha).collect::<Vec<_>>());

    // Statement expansion: the unchanged continuation joins the hunk.
    let p = by_id(0);
    assert_eq!(lines(p, LineKind::Removed).len(), 2);
    assert_eq!(lines(p, LineKind::Added).len(), 2);
    assert_eq!(text(lines(p, LineKind::Added)[1]), "identifier ) ;");
    assert!(!p.message_tokens.iter().any(|t| t.contains("sign")));

    // Header expansion: changing the second line of a condition pulls in the first.
    let p = by_id(2);
    let added = lines(p, LineKind::Added);
    assert_eq!(added.len(), 2);
    assert!(text(added[0]).starts_with("if ("));
    assert!(added.iter().all(|l| l.annotation == Annotation::ErrorCheck));

    // Error handling inside an error branch.
    let p = by_id(3);
    assert!(lines(p, LineKind::Added).iter().any(|l| l.annotation == Annotation::ErrorHandle));

    // A new null check with its return.
    let p = by_id(4);
    let ann: Vec<_> = lines(p, LineKind::Added).iter().map(|l| l.annotation).collect();
    assert_eq!(ann, vec![Annotation::ErrorCheck, Annotation::ErrorHandle]);

    let p = by_id(5);
    assert!(lines(p, LineKind::Added).iter().all(|l| l.annotation == Annotation::Normal));

    // Callee threshold: f4 occurs four times, f5 five and f6 six.
    let tokens: Vec<String> = patches.iter().flat_map(|p| lines(p, LineKind::Added)).flat_map(|l| l.tokens.clone()).collect();
    assert!(!tokens.iter().any(|t| t == "f4"));
    assert!(tokens.iter().any(|t| t == "f5"));
    assert!(tokens.iter().any(|t| t == "f6"));
    assert!(tokens.iter().any(|t| t == IDENTIFIER));
    // Functions defined in the file are always abstracted.
    assert!(!tokens.iter().any(|t| t == "helper"));
}

#[test]
fn extraction_keeps_order_and_reports_bad_revisions() {
    let dir = tempfile::tempdir().unwrap();
    let fx = common::build(dir.path());
    let entries = vec![
        CommitEntry { rev: fx.commits[1].0.clone(), label: Some(false) },
        CommitEntry { rev: "0123456789abcdef0123456789abcdef01234567".into(), label: None },
        CommitEntry { rev: fx.commits[0].0.clone(), label: Some(true) },
    ];
    let ex = extract_commits(&fx.repo, &entries).unwrap();
    let ids: Vec<_> = ex.commits.iter().map(|c| c.id.as_str()).collect();
    assert_eq!(ids, vec![fx.commits[1].0.as_str(), fx.commits[0].0.as_str()]);
    assert_eq!(ex.errors.len(), 1);
    assert_eq!(ex.errors[0].rev, entries[1].rev);

    let c = &ex.commits[1];
    assert_eq!(c.label, Some(true));
    assert!(c.message.starts_with("Fix allocation size"));
    assert!(c.diff.contains("drv.c"));
    assert!(c.diff.contains("-\tbuf = kmalloc(64,"));
    assert!(c.diff.contains("+\tbuf = kmalloc(128,"));
    assert_eq!(c.file_contents.keys().collect::<Vec<_>>(), vec!["drv.c"]);
    let v = &c.file_contents["drv.c"];
    assert!(v.before.as_deref().unwrap().contains("kmalloc(64,"));
    assert!(v.after.as_deref().unwrap().contains("kmalloc(128,"));
}

#[test]
fn missing_repository_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(extract_commits(&dir.path().join("nope"), &[]).is_err());
}
