//! Lexer for C source that is good enough for statement scanning: comments
//! are dropped, literals are classified, multi-character operators stay whole
//! and preprocessor directives are flagged.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokKind {
    Ident,
    Keyword,
    Number,
    Str,
    Char,
    Punct,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CToken {
    pub kind: TokKind,
    pub text: String,
    /// 1-based source line of the token's first character.
    pub line: usize,
    /// Part of a `#` directive.
    pub preproc: bool,
}

impl CToken {
    pub fn is(&self, text: &str) -> bool {
        self.text == text
    }

    /// Spelling fed to the model: literals collapse to placeholders.
    pub fn model_text(&self) -> &str {
        match self.kind {
            TokKind::Number => "<num>",
            TokKind::Str => "<str>",
            TokKind::Char => "<chr>",
            _ => &self.text,
        }
    }
}

pub const KEYWORDS: &[&str] = &[
    "auto", "break", "case", "char", "const", "continue", "default", "do", "double", "else", "enum",
    "extern", "float", "for", "goto", "if", "inline", "int", "long", "register", "restrict", "return",
    "short", "signed", "sizeof", "static", "struct", "switch", "typedef", "union", "unsigned", "void",
    "volatile", "while", "_Bool", "_Complex", "_Imaginary", "_Alignas", "_Alignof", "_Atomic",
    "_Generic", "_Noreturn", "_Static_assert", "_Thread_local", "asm", "__asm__", "typeof",
    "__typeof__", "__attribute__", "__inline__", "__volatile__",
];

pub fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

const OPERATORS: &[&str] = &[
    ">>=", "<<=", "...", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "+=", "-=",
    "*=", "/=", "%=", "&=", "^=", "|=", "##",
];

pub fn tokenize(src: &str) -> Vec<CToken> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = 1;
    // Only whitespace seen so far on the current line.
    let mut line_start = true;
    let mut in_directive = false;

    let push = |out: &mut Vec<CToken>, kind, text: String, line, preproc| {
        out.push(CToken {
            kind,
            text,
            line,
            preproc,
        })
    };

    while i < chars.len() {
        let c = chars[i];
        match c {
            '\n' => {
                line += 1;
                i += 1;
                line_start = true;
                in_directive = false;
            }
            '\\' if chars.get(i + 1) == Some(&'\n') => {
                // Line splice keeps a directive alive.
                line += 1;
                i += 2;
            }
            '\\' if chars.get(i + 1) == Some(&'\r') && chars.get(i + 2) == Some(&'\n') => {
                line += 1;
                i += 3;
            }
            c if c.is_whitespace() => i += 1,
            '/' if chars.get(i + 1) == Some(&'/') => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '/' if chars.get(i + 1) == Some(&'*') => {
                i += 2;
                while i < chars.len() && !(chars[i] == '*' && chars.get(i + 1) == Some(&'/')) {
                    if chars[i] == '\n' {
                        line += 1;
                    }
                    i += 1;
                }
                i = (i + 2).min(chars.len());
            }
            '#' if line_start => {
                in_directive = true;
                line_start = false;
                push(&mut out, TokKind::Punct, "#".into(), line, true);
                i += 1;
            }
            '"' | '\'' => {
                let start_line = line;
                let quote = c;
                i += 1;
                while i < chars.len() && chars[i] != quote && chars[i] != '\n' {
                    if chars[i] == '\\' && i + 1 < chars.len() {
                        if chars[i + 1] == '\n' {
                            line += 1;
                        }
                        i += 1;
                    }
                    i += 1;
                }
                if i < chars.len() && chars[i] == quote {
                    i += 1;
                }
                let kind = if quote == '"' { TokKind::Str } else { TokKind::Char };
                let text: String = if quote == '"' { "<str>".into() } else { "<chr>".into() };
                push(&mut out, kind, text, start_line, in_directive);
                line_start = false;
            }
            c if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) => {
                let start = i;
                while i < chars.len() {
                    let d = chars[i];
                    let exponent_sign = (d == '+' || d == '-') && matches!(chars[i - 1], 'e' | 'E' | 'p' | 'P');
                    if d.is_ascii_alphanumeric() || d == '.' || d == '_' || exponent_sign {
                        i += 1;
                    } else {
                        break;
                    }
                }
                push(&mut out, TokKind::Number, chars[start..i].iter().collect(), line, in_directive);
                line_start = false;
            }
            c if c.is_alphabetic() || c == '_' || c == '$' => {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '$') {
                    i += 1;
                }
                let text: String = chars[start..i].iter().collect();
                let kind = if is_keyword(&text) { TokKind::Keyword } else { TokKind::Ident };
                push(&mut out, kind, text, line, in_directive);
                line_start = false;
            }
            _ => {
                let op = OPERATORS.iter().find(|op| {
                    op.chars()
                        .enumerate()
                        .all(|(k, oc)| chars.get(i + k) == Some(&oc))
                });
                let text = match op {
                    Some(op) => op.to_string(),
                    None => c.to_string(),
                };
                i += text.chars().count();
                push(&mut out, TokKind::Punct, text, line, in_directive);
                line_start = false;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(src: &str) -> Vec<String> {
        tokenize(src).into_iter().map(|t| t.model_text().to_string()).collect()
    }

    #[test]
    fn operators_and_literals() {
        assert_eq!(
            texts(r#"if (p->x == 0x1F && s != "a;b") c <<= 'q';"#),
            ["if", "(", "p", "->", "x", "==", "<num>", "&&", "s", "!=", "<str>", ")", "c", "<<=", "<chr>", ";"]
        );
    }

    #[test]
    fn comments_are_dropped_and_lines_tracked() {
        let toks = tokenize("a /* one\n two */ b // c\nd");
        let got: Vec<(&str, usize)> = toks.iter().map(|t| (t.text.as_str(), t.line)).collect();
        assert_eq!(got, [("a", 1), ("b", 2), ("d", 3)]);
    }

    #[test]
    fn directives_are_flagged_across_splices() {
        let toks = tokenize("#define X(a) \\\n  foo(a)\nint y;");
        assert!(toks.iter().take_while(|t| t.text != "int").all(|t| t.preproc));
        assert!(!toks.iter().find(|t| t.text == "int").unwrap().preproc);
        assert_eq!(toks.iter().find(|t| t.text == "foo").unwrap().line, 2);
    }

    #[test]
    fn numbers_with_exponents_and_suffixes() {
        assert_eq!(texts("1.5e-3f + 10UL - .5"), ["<num>", "+", "<num>", "-", "<num>"]);
    }

    #[test]
    fn unterminated_string_stops_at_newline() {
        assert_eq!(texts("x = \"abc\ny;"), ["x", "=", "<str>", "y", ";"]);
    }
}
