use std::collections::HashSet;

use rust_stemmers::{Algorithm, Stemmer};

use super::PreprocessConfig;

const STOPWORDS: &str = include_str!("stopwords.txt");

/// The shipped English stop-word list.
pub fn default_stopwords() -> HashSet<String> {
    STOPWORDS
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect()
}

/// Trailer lines such as `Signed-off-by:` or `Cc:` carry people and mailing
/// lists rather than a description of the change.
fn is_trailer(line: &str) -> bool {
    let Some((key, _)) = line.trim().split_once(':') else {
        return false;
    };
    !key.is_empty()
        && !key.contains(' ')
        && (key.ends_with("-by") || matches!(key, "Cc" | "Link" | "Fixes" | "Closes" | "Bug" | "Change-Id"))
}

pub(crate) fn stemmer() -> Stemmer {
    Stemmer::create(Algorithm::English)
}

/// Lowercases, splits on anything that is not alphanumeric, drops stop words
/// and stems what remains, keeping order.
pub fn preprocess_message(text: &str, config: &PreprocessConfig) -> Vec<String> {
    let stemmer = stemmer();
    text.lines()
        .filter(|l| !(config.strip_trailers && is_trailer(l)))
        .flat_map(|l| l.split(|c: char| !c.is_alphanumeric()))
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .filter(|w| !config.stopwords.contains(w))
        .map(|w| stemmer.stem(&w).into_owned())
        .collect()
}
