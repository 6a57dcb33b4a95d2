use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::corpus::Patch;
use crate::error::{Error, Result};

pub const PAD: &str = "<pad>";
pub const UNK: &str = "<unk>";
pub const PAD_INDEX: usize = 0;
pub const UNK_INDEX: usize = 1;

/// Dense token table with `<pad>` at 0 and `<unk>` at 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Default for Vocab {
    fn default() -> Self {
        Self::from_tokens(Vec::<String>::new())
    }
}

impl Vocab {
    /// Reserved entries followed by `tokens` in the given order. Duplicates
    /// and reserved names in `tokens` are skipped.
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut v = Vocab {
            tokens: Vec::new(),
            index: HashMap::new(),
        };
        for t in [PAD.to_string(), UNK.to_string()]
            .into_iter()
            .chain(tokens.into_iter().map(Into::into))
        {
            if !v.index.contains_key(&t) {
                v.index.insert(t.clone(), v.tokens.len());
                v.tokens.push(t);
            }
        }
        v
    }

    /// Keeps tokens seen at least `min_count` times, ordered by frequency
    /// (descending) then lexicographically.
    pub fn build<'a, I>(tokens: I, min_count: usize) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for t in tokens {
            *counts.entry(t).or_default() += 1;
        }
        let mut kept: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|&(t, c)| c >= min_count.max(1) && t != PAD && t != UNK)
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        Self::from_tokens(kept.into_iter().map(|(t, _)| t))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    /// Never true: the reserved entries are always present.
    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Index of `token`, or [`UNK_INDEX`] when absent.
    pub fn lookup(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK_INDEX)
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.tokens.get(index).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// Message and code vocabularies. The code table is shared by removed and
/// added lines.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Dictionary {
    pub msg: Vocab,
    pub code: Vocab,
}

impl Dictionary {
    /// Builds both vocabularies from a training corpus. Annotation tokens are
    /// counted like any other code token.
    pub fn build(patches: &[Patch], msg_min_count: usize, code_min_count: usize) -> Result<Self> {
        if patches.is_empty() {
            return Err(Error::Data("cannot build a dictionary from an empty corpus".into()));
        }
        let msg = Vocab::build(
            patches.iter().flat_map(|p| p.message_tokens.iter().map(String::as_str)),
            msg_min_count,
        );
        let code = Vocab::build(patches.iter().flat_map(|p| p.code_token_lines().flatten()), code_min_count);
        Ok(Dictionary { msg, code })
    }

    /// `[msg]` section then `[code]` section, one token per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (header, vocab) in [("[msg]", &self.msg), ("[code]", &self.code)] {
            let _ = writeln!(out, "{header}");
            for t in vocab.tokens() {
                let _ = writeln!(out, "{t}");
            }
        }
        out
    }

    pub fn parse(text: &str, file: &str) -> Result<Self> {
        let mut sections: [Option<Vec<&str>>; 2] = [None, None];
        let mut current: Option<usize> = None;
        for (n, line) in text.lines().enumerate() {
            match line {
                "[msg]" if sections[0].is_none() => {
                    sections[0] = Some(Vec::new());
                    current = Some(0);
                }
                "[code]" if sections[1].is_none() => {
                    sections[1] = Some(Vec::new());
                    current = Some(1);
                }
                _ => match current {
                    Some(i) if !line.is_empty() && !line.contains(char::is_whitespace) => {
                        sections[i].get_or_insert_with(Vec::new).push(line)
                    }
                    Some(_) => {
                        return Err(Error::Parse {
                            file: file.into(),
                            line: n + 1,
                            msg: format!("invalid token {line:?}"),
                        })
                    }
                    None => {
                        return Err(Error::Parse {
                            file: file.into(),
                            line: n + 1,
                            msg: "token before any section header".into(),
                        })
                    }
                },
            }
        }
        let section = |s: Option<Vec<&str>>, name: &str| -> Result<Vocab> {
            let s = s.ok_or_else(|| Error::format(file, format!("missing [{name}] section")))?;
            if s.len() < 2 || s[0] != PAD || s[1] != UNK {
                return Err(Error::format(file, format!("[{name}] must start with {PAD} and {UNK}")));
            }
            let v = Vocab::from_tokens(s.iter().copied());
            if v.len() != s.len() {
                return Err(Error::format(file, format!("duplicate token in [{name}]")));
            }
            Ok(v)
        };
        let [msg, code] = sections;
        Ok(Dictionary {
            msg: section(msg, "msg")?,
            code: section(code, "code")?,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_count_filters_and_orders() {
        let v = Vocab::build(["a", "b", "a"], 2);
        assert_eq!(v.tokens(), &["<pad>", "<unk>", "a"]);
        assert_eq!(v.lookup("b"), UNK_INDEX);
    }

    #[test]
    fn ties_break_lexicographically() {
        let v = Vocab::build(["c", "b", "z", "z"], 1);
        assert_eq!(v.tokens(), &["<pad>", "<unk>", "z", "b", "c"]);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(Dictionary::build(&[], 1, 1).is_err());
    }

    #[test]
    fn text_round_trip() {
        let d = Dictionary {
            msg: Vocab::from_tokens(["fix", "leak"]),
            code: Vocab::from_tokens(["<normal>", "identifier", "->"]),
        };
        let text = d.to_text();
        assert!(text.starts_with("[msg]\n<pad>\n<unk>\nfix\nleak\n[code]\n<pad>\n"));
        assert_eq!(Dictionary::parse(&text, "d").unwrap(), d);
    }

    #[test]
    fn malformed_dictionaries_rejected() {
        assert!(Dictionary::parse("[msg]\n<pad>\n<unk>\n", "d").is_err());
        assert!(Dictionary::parse("x\n[msg]\n", "d").is_err());
        assert!(Dictionary::parse("[msg]\nfoo\n[code]\n<pad>\n<unk>\n", "d").is_err());
        assert!(Dictionary::parse("[msg]\n<pad>\n<unk>\na\na\n[code]\n<pad>\n<unk>\n", "d").is_err());
    }
}
