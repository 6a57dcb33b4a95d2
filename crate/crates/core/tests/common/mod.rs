#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

pub const BASE: &str = "\
#include <linux/slab.h>

struct dev;

static int helper(int x)
{
\treturn x + 1;
}

int probe(struct dev *d)
{
\tint err;
\tchar *buf;

\tbuf = kmalloc(64,
\t\t      GFP_KERNEL);
\tif (!buf)
\t\treturn -ENOMEM;
\terr = setup_dev(d);
\tif (err < 0)
\t\tgoto out_free;
\treturn helper(err);
out_free:
\tkfree(buf);
\treturn err;
}

void tune(struct dev *d)
{
}
";

pub struct Step {
    pub message: &'static str,
    pub label: Option<bool>,
    /// Applied in order to the previous content of each file.
    pub edits: Vec<(&'static str, Edit)>,
}

pub enum Edit {
    Replace(&'static str, &'static str),
    Write(String),
}

fn tune_call(after: &'static str, line: &'static str) -> Edit {
    Edit::Replace(after, line)
}

/// The crafted history after the base commit.
pub fn steps() -> Vec<Step> {
    let table: String = (0..120).map(|i| format!("int table_{i} = {i};\n")).collect();
    vec![
        Step {
            message: "Fix allocation size in probe\n\nThe buffer was too small.\n\nSigned-off-by: A Developer <dev@example.org>\n",
            label: Some(true),
            edits: vec![("drv.c", Edit::Replace("kmalloc(64,", "kmalloc(128,"))],
        },
        Step {
            message: "Retry on EAGAIN\n",
            label: Some(false),
            edits: vec![(
                "drv.c",
                Edit::Replace("\tif (err < 0)\n", "\tif (err < 0 &&\n\t    err != -EAGAIN)\n"),
            )],
        },
        Step {
            message: "Treat EBUSY like EAGAIN\n",
            label: Some(true),
            edits: vec![("drv.c", Edit::Replace("\t    err != -EAGAIN)\n", "\t    err != -EBUSY)\n"))],
        },
        Step {
            message: "Release the device on setup failure\n",
            label: Some(true),
            edits: vec![
                ("drv.c", Edit::Replace("\t\tgoto out_free;\n", "\t\tgoto out_put;\n")),
                ("drv.c", Edit::Replace("out_free:\n", "out_put:\n\tput_dev(d);\n")),
            ],
        },
        Step {
            message: "Check for a missing device\n",
            label: Some(true),
            edits: vec![(
                "drv.c",
                Edit::Replace("\tchar *buf;\n\n", "\tchar *buf;\n\n\tif (!d)\n\t\treturn -EINVAL;\n"),
            )],
        },
        Step {
            message: "Bump helper offset and export probe\n",
            label: Some(false),
            edits: vec![
                ("drv.c", Edit::Replace("return x + 1;", "return x + 2;")),
                ("drv.h", Edit::Write("int probe(struct dev *d);\n".into())),
            ],
        },
        Step {
            message: "Tune: first pass\n",
            label: Some(false),
            edits: vec![("drv.c", tune_call("{\n}\n", "{\n\tf6(d);\n\tf5(d);\n\tf4(d);\n}\n"))],
        },
        Step {
            message: "Tune: second pass\n",
            label: Some(false),
            edits: vec![("drv.c", tune_call("\tf4(d);\n}\n", "\tf4(d);\n\tf6(d);\n\tf5(d);\n\tf4(d);\n}\n"))],
        },
        Step {
            message: "Tune: third pass\n",
            label: Some(true),
            edits: vec![("drv.c", tune_call("\tf4(d);\n}\n", "\tf4(d);\n\tf6(d);\n\tf5(d);\n\tf4(d);\n}\n"))],
        },
        Step {
            message: "Tune: fourth pass\n",
            label: Some(false),
            edits: vec![("drv.c", tune_call("\tf4(d);\n}\n", "\tf4(d);\n\tf6(d);\n\tf5(d);\n\tf4(d);\n}\n"))],
        },
        Step {
            message: "Tune: fifth pass\n",
            label: Some(true),
            edits: vec![("drv.c", tune_call("\tf4(d);\n}\n", "\tf4(d);\n\tf6(d);\n\tf5(d);\n}\n"))],
        },
        Step {
            message: "Tune: final pass\n",
            label: Some(false),
            edits: vec![("drv.c", tune_call("\tf5(d);\n}\n", "\tf5(d);\n\tf6(d);\n}\n"))],
        },
        Step {
            message: "Document the driver\n",
            label: Some(false),
            edits: vec![("README", Edit::Write("A test driver.\n".into()))],
        },
        Step {
            message: "Add a large lookup table\n",
            label: Some(true),
            edits: vec![("table.c", Edit::Write(table))],
        },
    ]
}

fn git(repo: &Path, args: &[&str]) -> String {
    let out = Command::new("git")
        .arg("-C")
        .arg(repo)
        .args(["-c", "commit.gpgsign=false", "-c", "core.autocrlf=false"])
        .args(args)
        .env("GIT_AUTHOR_NAME", "Fixture Author")
        .env("GIT_AUTHOR_EMAIL", "author@example.org")
        .env("GIT_COMMITTER_NAME", "Fixture Author")
        .env("GIT_COMMITTER_EMAIL", "author@example.org")
        .env("GIT_AUTHOR_DATE", "2020-01-01T00:00:00+0000")
        .env("GIT_COMMITTER_DATE", "2020-01-01T00:00:00+0000")
        .env("GIT_CONFIG_NOSYSTEM", "1")
        .env("HOME", repo)
        .output()
        .expect("git runs");
    assert!(out.status.success(), "git {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

pub struct Fixture {
    pub repo: PathBuf,
    /// `(sha, label)` for every commit after the base, in history order.
    pub commits: Vec<(String, Option<bool>)>,
}

impl Fixture {
    /// Commit-list text for the given commits, labeled or not.
    pub fn list(&self, labeled: bool) -> String {
        self.commits
            .iter()
            .map(|(sha, label)| match (labeled, label) {
                (true, Some(l)) => format!("{sha} {}\n", if *l { 1 } else { 0 }),
                _ => format!("{sha}\n"),
            })
            .collect()
    }
}

/// Builds the fixture repository under `dir/repo`. Fixed identities and
/// dates make every sha reproducible.
pub fn build(dir: &Path) -> Fixture {
    let repo = dir.join("repo");
    std::fs::create_dir_all(&repo).unwrap();
    git(&repo, &["init", "-q"]);
    std::fs::write(repo.join("drv.c"), BASE).unwrap();
    git(&repo, &["add", "-A"]);
    git(&repo, &["commit", "-q", "-m", "Initial driver"]);
    let mut commits = Vec::new();
    for step in steps() {
        for (path, edit) in step.edits {
            let file = repo.join(path);
            let next = match edit {
                Edit::Write(text) => text,
                Edit::Replace(from, to) => {
                    let old = std::fs::read_to_string(&file).unwrap();
                    assert!(old.contains(from), "{from:?} not in {path}");
                    old.replacen(from, to, 1)
                }
            };
            std::fs::write(&file, next).unwrap();
        }
        git(&repo, &["add", "-A"]);
        git(&repo, &["commit", "-q", "-m", step.message]);
        commits.push((git(&repo, &["rev-parse", "HEAD"]).trim().to_string(), step.label));
    }
    Fixture { repo, commits }
}

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden")
}

/// Compares `actual` with a golden file, or rewrites the file when `BLESS`
/// is set.
pub fn check_golden(name: &str, actual: &str) {
    let path = golden_dir().join(name);
    if std::env::var_os("BLESS").is_some() {
        std::fs::create_dir_all(golden_dir()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("{}: {e} (run with BLESS=1 to create)", path.display()));
    assert!(expected == actual, "{} differs from the generated output:\n{actual}", path.display());
}

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn run(bin: &str, cwd: &Path, args: &[&str]) -> Run {
    let out = Command::new(bin).current_dir(cwd).args(args).output().expect("binary runs");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

pub fn getinfo_bin() -> &'static str {
    env!("CARGO_BIN_EXE_getinfo")
}

pub fn patchnet_bin() -> &'static str {
    env!("CARGO_BIN_EXE_patchnet")
}

/// Runs the getinfo, train and predict commands inside `dir` on the fixture
/// corpus and returns the three runs.
pub fn standard_commands(dir: &Path) -> (Fixture, [Run; 4]) {
    let fx = build(dir);
    std::fs::write(dir.join("commit_list_file"), fx.list(true)).unwrap();
    std::fs::write(dir.join("test_list_file"), fx.list(false)).unwrap();
    let repo = fx.repo.to_str().unwrap().to_string();
    let a = run(getinfo_bin(), dir, &["--commit_list", "commit_list_file", "--git", &repo, "-o", "training_data"]);
    let b = run(getinfo_bin(), dir, &["--commit_list", "test_list_file", "--git", &repo, "-o", "test_data"]);
    let c = run(patchnet_bin(), dir, &["--train", "--data", "training_data.out", "--model", "patchnet"]);
    let d = run(patchnet_bin(), dir, &["--predict", "--data", "test_data.out", "--model", "patchnet"]);
    (fx, [a, b, c, d])
}

pub fn dir_entries(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}
