//! Brace/paren/semicolon scanner that recovers statement extents, control
//! headers, `if` bodies and function definitions from a token stream. It
//! does not parse C; it only needs to be right about where statements start
//! and end in ordinary kernel-style code, and to notice when it is lost.

use std::collections::HashSet;

use super::ctoken::{tokenize, CToken, TokKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnitKind {
    /// Statement or declaration terminated by `;`.
    Simple,
    /// `if`/`for`/`while`/`switch` keyword through its closing parenthesis.
    Header,
    /// Tokens before a `{` that opens a block (function signature, `else {`, ...).
    Opener,
    /// Labels, `case`, lone `else`/`do`.
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Unit {
    pub kind: UnitKind,
    /// Token index range, inclusive.
    pub first_tok: usize,
    pub last_tok: usize,
    pub first_line: usize,
    pub last_line: usize,
    /// False when the scanner lost track of nesting inside this unit.
    pub balanced: bool,
}

impl Unit {
    pub fn covers(&self, line: usize) -> bool {
        self.first_line <= line && line <= self.last_line
    }

    pub fn span(&self) -> usize {
        self.last_line - self.first_line + 1
    }
}

/// A control header together with the line range of the statement or block
/// it guards.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Guard {
    pub keyword: String,
    /// Index into [`FileScan::units`] of the header.
    pub header: usize,
    /// Token index range of the condition, exclusive of the parentheses.
    pub cond: (usize, usize),
    pub body: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Function {
    pub name: String,
    pub first_line: usize,
    pub last_line: usize,
}

#[derive(Debug, Clone, Default)]
pub struct FileScan {
    pub tokens: Vec<CToken>,
    /// For each token: an identifier immediately followed by `(`.
    pub is_call: Vec<bool>,
    pub units: Vec<Unit>,
    pub guards: Vec<Guard>,
    pub functions: Vec<Function>,
    pub line_count: usize,
}

enum Brace {
    Function(usize),
    Block(Vec<usize>),
}

struct Open {
    kind: UnitKind,
    first_tok: usize,
    paren: i32,
    saw_paren: bool,
    init_brace: usize,
    has_eq: bool,
    balanced: bool,
    len: usize,
}

impl FileScan {
    pub fn new(src: &str) -> Self {
        let tokens = tokenize(src);
        let line_count = src.lines().count().max(tokens.last().map_or(0, |t| t.line));
        let is_call = (0..tokens.len())
            .map(|i| {
                tokens[i].kind == TokKind::Ident && tokens.get(i + 1).is_some_and(|n| n.is("("))
            })
            .collect();
        let mut scan = FileScan {
            tokens,
            is_call,
            line_count,
            ..Default::default()
        };
        scan.run();
        scan
    }

    pub fn tokens_on_line(&self, line: usize) -> impl Iterator<Item = (usize, &CToken)> {
        let start = self.tokens.partition_point(|t| t.line < line);
        self.tokens[start..]
            .iter()
            .take_while(move |t| t.line == line)
            .enumerate()
            .map(move |(k, t)| (start + k, t))
    }

    /// Names of functions defined in this file.
    pub fn defined_functions(&self) -> HashSet<&str> {
        self.functions.iter().map(|f| f.name.as_str()).collect()
    }

    fn close(&mut self, open: Open, last_tok: usize, kind: UnitKind, balanced: bool) -> usize {
        self.units.push(Unit {
            kind,
            first_tok: open.first_tok,
            last_tok,
            first_line: self.tokens[open.first_tok].line,
            last_line: self.tokens[last_tok].line,
            balanced: balanced && open.balanced,
        });
        self.units.len() - 1
    }

    fn run(&mut self) {
        let mut cur: Option<Open> = None;
        let mut braces: Vec<Brace> = Vec::new();
        // Guards whose body has not started yet.
        let mut pending: Vec<usize> = Vec::new();
        // Guards whose body is the unit currently open.
        let mut body_of_cur: Vec<usize> = Vec::new();

        let n = self.tokens.len();
        let mut i = 0;
        while i < n {
            if self.tokens[i].preproc {
                i += 1;
                continue;
            }
            let text = self.tokens[i].text.clone();

            if cur.is_none() {
                match text.as_str() {
                    "{" => {
                        braces.push(Brace::Block(std::mem::take(&mut pending)));
                        for &g in braces.last().map(block_guards).unwrap_or(&[]) {
                            self.guards[g].body = Some((self.tokens[i].line, self.tokens[i].line));
                        }
                        i += 1;
                        continue;
                    }
                    "}" => {
                        self.pop_brace(&mut braces, i);
                        i += 1;
                        continue;
                    }
                    ";" => {
                        let line = self.tokens[i].line;
                        for g in pending.drain(..) {
                            self.guards[g].body = Some((line, line));
                        }
                        i += 1;
                        continue;
                    }
                    _ => {}
                }
                let unit_kind = match text.as_str() {
                    "if" | "for" | "while" | "switch" => UnitKind::Header,
                    "else" | "do" => {
                        // A lone keyword; whatever follows is its own unit.
                        let open = Open::new(UnitKind::Other, i);
                        self.close(open, i, UnitKind::Other, true);
                        i += 1;
                        continue;
                    }
                    "case" | "default" => UnitKind::Other,
                    _ => UnitKind::Simple,
                };
                if unit_kind != UnitKind::Header {
                    body_of_cur = std::mem::take(&mut pending);
                }
                cur = Some(Open::new(unit_kind, i));
            }

            let open = cur.as_mut().expect("unit open");
            open.len += 1;
            match text.as_str() {
                "(" => {
                    open.paren += 1;
                    open.saw_paren = true;
                }
                ")" => {
                    open.paren -= 1;
                    if open.paren < 0 {
                        open.balanced = false;
                        open.paren = 0;
                    }
                    if open.kind == UnitKind::Header && open.paren == 0 && open.saw_paren {
                        let open = cur.take().unwrap();
                        let keyword = self.tokens[open.first_tok].text.clone();
                        let cond = (open.first_tok + 2, i);
                        let u = self.close(open, i, UnitKind::Header, true);
                        self.guards.push(Guard {
                            keyword,
                            header: u,
                            cond,
                            body: None,
                        });
                        pending.push(self.guards.len() - 1);
                    }
                }
                ";" if open.paren == 0 => {
                    let open = cur.take().unwrap();
                    let balanced = open.init_brace == 0;
                    let kind = if open.kind == UnitKind::Header { UnitKind::Header } else { UnitKind::Simple };
                    let u = self.close(open, i, kind, balanced);
                    self.finish_body(&mut body_of_cur, u);
                }
                ":" if open.paren == 0
                    && (open.kind == UnitKind::Other
                        || (open.len == 2 && self.tokens[open.first_tok].kind == TokKind::Ident)) =>
                {
                    let open = cur.take().unwrap();
                    self.close(open, i, UnitKind::Other, true);
                    // A label does not consume a pending body.
                    pending.append(&mut body_of_cur);
                }
                "=" if open.paren == 0 => open.has_eq = true,
                "{" if open.paren == 0 => {
                    if open.has_eq {
                        open.init_brace += 1;
                    } else {
                        let open = cur.take().unwrap();
                        let at_top = braces.is_empty();
                        let sig_end = i.saturating_sub(1);
                        let name = if at_top { self.function_name(open.first_tok, sig_end) } else { None };
                        let u = self.close(open, sig_end, UnitKind::Opener, true);
                        match name {
                            Some(name) => {
                                let first_line = self.units[u].first_line;
                                self.functions.push(Function {
                                    name,
                                    first_line,
                                    last_line: first_line,
                                });
                                braces.push(Brace::Function(self.functions.len() - 1));
                            }
                            None => {
                                let guards = std::mem::take(&mut body_of_cur);
                                for &g in &guards {
                                    self.guards[g].body = Some((self.units[u].first_line, self.tokens[i].line));
                                }
                                braces.push(Brace::Block(guards));
                            }
                        }
                    }
                }
                "}" if open.paren == 0 => {
                    if open.init_brace > 0 {
                        open.init_brace -= 1;
                    } else {
                        // Statement missing its terminator.
                        let open = cur.take().unwrap();
                        let last = i.saturating_sub(1).max(open.first_tok);
                        let u = self.close(open, last, UnitKind::Simple, false);
                        self.finish_body(&mut body_of_cur, u);
                        self.pop_brace(&mut braces, i);
                    }
                }
                _ => {}
            }
            i += 1;
        }
        if let Some(open) = cur.take() {
            let last = (0..n).rev().find(|&k| !self.tokens[k].preproc).unwrap_or(open.first_tok);
            let kind = open.kind;
            let u = self.close(open, last, kind, false);
            self.finish_body(&mut body_of_cur, u);
        }
        // Unclosed functions end at the last line.
        let last_line = self.line_count;
        for b in braces {
            if let Brace::Function(f) = b {
                self.functions[f].last_line = last_line;
            }
        }
    }

    fn finish_body(&mut self, guards: &mut Vec<usize>, unit: usize) {
        let (a, b) = (self.units[unit].first_line, self.units[unit].last_line);
        for g in guards.drain(..) {
            self.guards[g].body = Some((a, b));
        }
    }

    fn pop_brace(&mut self, braces: &mut Vec<Brace>, close_tok: usize) {
        let line = self.tokens[close_tok].line;
        match braces.pop() {
            Some(Brace::Function(f)) => self.functions[f].last_line = line,
            Some(Brace::Block(guards)) => {
                for g in guards {
                    if let Some((a, _)) = self.guards[g].body {
                        self.guards[g].body = Some((a, line));
                    }
                }
            }
            None => {}
        }
    }

    /// Identifier before the first top-level `(` of a signature, if the
    /// signature has a parameter list.
    fn function_name(&self, first: usize, last: usize) -> Option<String> {
        (first..=last)
            .find(|&k| self.tokens[k].is("("))
            .filter(|&k| k > first)
            .map(|k| &self.tokens[k - 1])
            .filter(|t| t.kind == TokKind::Ident)
            .map(|t| t.text.clone())
    }
}

fn block_guards(b: &Brace) -> &[usize] {
    match b {
        Brace::Block(g) => g,
        Brace::Function(_) => &[],
    }
}

impl Open {
    fn new(kind: UnitKind, first_tok: usize) -> Self {
        Open {
            kind,
            first_tok,
            paren: 0,
            saw_paren: false,
            init_brace: 0,
            has_eq: false,
            balanced: true,
            len: 0,
        }
    }
}
