//! Error-checking / error-handling line annotation.
//!
//! A line is *error-checking* when it belongs to an `if` header whose
//! condition looks like a failure test, and *error-handling* when it sits in
//! the branch of such a test and performs cleanup or leaves the function.
//! Both rule sets are plain data and can be loaded from a TOML file:
//!
//! ```toml
//! [error_check]
//! null_compare = true
//! negative_compare = true
//! negation = true
//! error_macro_pattern = "^E[A-Z]+$"
//! error_calls = ["IS_ERR", "IS_ERR_OR_NULL"]
//! error_vars = ["err", "ret"]
//! transparent_wrappers = ["unlikely", "likely"]
//!
//! [error_handle]
//! keywords = ["return", "goto"]
//! cleanup_substrings = ["free", "put", "release", "unlock", "destroy"]
//! ```

use std::path::Path;

use regex::Regex;
use serde::Deserialize;

use super::ctoken::{CToken, TokKind};
use super::scan::{FileScan, Guard};
use super::types::Annotation;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Deserialize, PartialEq, Eq)]
#[serde(default, deny_unknown_fields)]
pub struct ErrorCheckRules {
    /// `x == NULL` / `NULL == x`
    pub null_compare: bool,
    /// `x < 0`, `x == -1`, `x <= -EINVAL`, ...
    pub negative_compare: bool,
    /// `!x`, `!f(...)`
    pub negation: bool,
    /// Identifiers compared for equality that denote error codes.
    pub error_macro_pattern: String,
    pub error_calls: Vec<String>,
    /// Variables that are failure tests on their own: `if (err)`.
    pub error_vars: Vec<String>,
    /// Calls stripped from around a whole condition before matching.
    pub transparent_wrappers: Vec<String>,
}

impl Default for ErrorCheckRules {
    fn default() -> Self {
        ErrorCheckRules {
            null_compare: true,
            negative_compare: true,
            negation: true,
            error_macro_pattern: "^E[A-Z]+$".into(),
            error_calls: ["IS_ERR", "IS_ERR_OR_NULL", "IS_ERR_VALUE", "WARN_ON", "WARN_ON_ONCE"]
                .map(String::from)
                .to_vec(),
            error_vars: ["err", "ret", "rc", "error", "retval", "status"].map(String::from).to_vec(),
            transparent_wrappers: ["unlikely", "likely"].map(String::from).to_vec(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq, Eq)]
#[serde(default, deny_unknown_fields)]
pub struct ErrorHandleRules {
    pub keywords: Vec<String>,
    pub cleanup_substrings: Vec<String>,
}

impl Default for ErrorHandleRules {
    fn default() -> Self {
        ErrorHandleRules {
            keywords: ["return", "goto"].map(String::from).to_vec(),
            cleanup_substrings: ["free", "put", "release", "unlock", "destroy"].map(String::from).to_vec(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq, Eq)]
#[serde(default, deny_unknown_fields)]
pub struct RuleConfig {
    pub error_check: ErrorCheckRules,
    pub error_handle: ErrorHandleRules,
}

impl RuleConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RuleConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Regex::new(&cfg.error_check.error_macro_pattern)
            .map_err(|e| Error::Config(format!("error_macro_pattern: {e}")))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn compile(&self) -> CompiledRules<'_> {
        CompiledRules {
            rules: self,
            error_macro: Regex::new(&self.error_check.error_macro_pattern).unwrap_or_else(|_| Regex::new("^E[A-Z]+$").unwrap()),
        }
    }
}

pub struct CompiledRules<'a> {
    rules: &'a RuleConfig,
    error_macro: Regex,
}

impl CompiledRules<'_> {
    /// Whether the condition tokens of an `if` test for failure.
    pub fn is_failure_test(&self, cond: &[CToken]) -> bool {
        let r = &self.rules.error_check;
        let cond = strip_wrappers(cond, &r.transparent_wrappers);
        let is_operand_end = |t: &CToken| t.kind == TokKind::Ident || t.is(")") || t.is("]");
        if cond.len() == 1 && cond[0].kind == TokKind::Ident && r.error_vars.contains(&cond[0].text) {
            return true;
        }
        for (i, t) in cond.iter().enumerate() {
            let prev = i.checked_sub(1).map(|p| &cond[p]);
            let next = cond.get(i + 1);
            let after = cond.get(i + 2);
            if r.null_compare && t.is("==") {
                let lhs_null = prev.is_some_and(|p| p.is("NULL"));
                let rhs_null = next.is_some_and(|n| n.is("NULL"));
                if (rhs_null && prev.is_some_and(is_operand_end)) || (lhs_null && next.is_some_and(|n| n.kind == TokKind::Ident)) {
                    return true;
                }
            }
            if r.negative_compare && prev.is_some_and(is_operand_end) {
                if t.is("<") && next.is_some_and(|n| n.kind == TokKind::Number && is_zero(&n.text)) {
                    return true;
                }
                if (t.is("==") || t.is("<") || t.is("<=")) && next.is_some_and(|n| n.is("-")) {
                    if let Some(a) = after {
                        if a.kind == TokKind::Number || self.is_error_macro(a) {
                            return true;
                        }
                    }
                }
            }
            if t.is("==") && next.is_some_and(|n| self.is_error_macro(n)) && prev.is_some_and(is_operand_end) {
                return true;
            }
            if t.kind == TokKind::Ident
                && r.error_calls.contains(&t.text)
                && next.is_some_and(|n| n.is("("))
            {
                return true;
            }
            if r.negation && t.is("!") && next.is_some_and(|n| n.kind == TokKind::Ident) {
                return true;
            }
        }
        false
    }

    fn is_error_macro(&self, t: &CToken) -> bool {
        t.kind == TokKind::Ident && self.error_macro.is_match(&t.text)
    }

    /// Whether a line's tokens perform cleanup or leave the function.
    pub fn is_cleanup(&self, line: &[CToken], is_call: &[bool]) -> bool {
        let r = &self.rules.error_handle;
        line.iter().zip(is_call).any(|(t, &call)| {
            (t.kind == TokKind::Keyword && r.keywords.contains(&t.text))
                || (call && r.cleanup_substrings.iter().any(|s| t.text.contains(s.as_str())))
        })
    }
}

fn is_zero(num: &str) -> bool {
    let digits = num.trim_start_matches("0x").trim_start_matches("0X");
    !digits.is_empty() && digits.trim_end_matches(|c: char| c.is_ascii_alphabetic()).chars().all(|c| c == '0')
}

fn strip_wrappers<'a>(mut cond: &'a [CToken], wrappers: &[String]) -> &'a [CToken] {
    loop {
        let wrapped = cond.len() >= 3
            && cond[0].kind == TokKind::Ident
            && wrappers.contains(&cond[0].text)
            && cond[1].is("(")
            && cond[cond.len() - 1].is(")")
            && closes_at_end(&cond[1..]);
        if !wrapped {
            return cond;
        }
        cond = &cond[2..cond.len() - 1];
    }
}

/// The `(` at `toks[0]` is matched by the last token.
fn closes_at_end(toks: &[CToken]) -> bool {
    let mut depth = 0i32;
    for (i, t) in toks.iter().enumerate() {
        if t.is("(") {
            depth += 1;
        } else if t.is(")") {
            depth -= 1;
            if depth == 0 {
                return i == toks.len() - 1;
            }
        }
    }
    false
}

/// Caches the failure tests of one scanned file.
pub struct FileAnnotator<'s> {
    scan: &'s FileScan,
    checks: Vec<&'s Guard>,
}

impl<'s> FileAnnotator<'s> {
    pub fn new(scan: &'s FileScan, rules: &CompiledRules<'_>) -> Self {
        let checks = scan
            .guards
            .iter()
            .filter(|g| g.keyword == "if")
            .filter(|g| rules.is_failure_test(&scan.tokens[g.cond.0..g.cond.1.max(g.cond.0)]))
            .collect();
        FileAnnotator { scan, checks }
    }

    /// Annotation of source line `line` (1-based).
    pub fn annotate(&self, line: usize, rules: &CompiledRules<'_>) -> Annotation {
        let scan = self.scan;
        if self.checks.iter().any(|g| scan.units[g.header].covers(line)) {
            return Annotation::ErrorCheck;
        }
        let in_branch = self
            .checks
            .iter()
            .any(|g| g.body.is_some_and(|(a, b)| a <= line && line <= b));
        if in_branch {
            let (toks, calls): (Vec<CToken>, Vec<bool>) =
                scan.tokens_on_line(line).map(|(i, t)| (t.clone(), scan.is_call[i])).unzip();
            if rules.is_cleanup(&toks, &calls) {
                return Annotation::ErrorHandle;
            }
        }
        Annotation::Normal
    }
}

pub fn annotate_line(scan: &FileScan, line: usize, rules: &CompiledRules<'_>) -> Annotation {
    FileAnnotator::new(scan, rules).annotate(line, rules)
}

/// Annotates line `line` of a standalone function snippet.
pub fn annotate_snippet(function_src: &str, line: usize, rules: &RuleConfig) -> Annotation {
    let scan = FileScan::new(function_src);
    annotate_line(&scan, line, &rules.compile())
}
