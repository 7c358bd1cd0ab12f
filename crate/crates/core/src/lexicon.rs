//! Word-list files and whole-phrase matching.
//!
//! Word-list format: UTF-8, one entry per line, `#` starts a comment,
//! blank lines are ignored. Surrounding whitespace is trimmed.

use std::path::Path;

use regex::{Regex, RegexBuilder};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("cannot read word list {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("word list {0} has no entries")]
    Empty(String),
    #[error("word list {name} contains a blank phrase")]
    BlankPhrase { name: String },
    #[error("cannot compile matcher for {name}: {source}")]
    Compile {
        name: String,
        #[source]
        source: regex::Error,
    },
}

/// Parse word-list text into its entries, in file order.
pub fn parse_word_list(text: &str) -> Vec<String> {
    text.lines()
        .map(|line| match line.find('#') {
            Some(i) => &line[..i],
            None => line,
        })
        .map(str::trim)
        .filter(|line| !line.is_empty())
        .map(str::to_string)
        .collect()
}

pub fn read_word_list(path: &Path) -> Result<Vec<String>, LexiconError> {
    let text = std::fs::read_to_string(path).map_err(|source| LexiconError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let entries = parse_word_list(&text);
    if entries.is_empty() {
        return Err(LexiconError::Empty(path.display().to_string()));
    }
    Ok(entries)
}

/// Builds the regex source for one phrase: internal whitespace matches any
/// run of whitespace, apostrophes match straight or curly forms, and word
/// boundaries are anchored at either end that starts or ends with a word
/// character.
fn phrase_pattern(phrase: &str) -> String {
    let mut out = String::new();
    let starts_word = phrase.chars().next().is_some_and(is_word_char);
    let ends_word = phrase.chars().last().is_some_and(is_word_char);
    if starts_word {
        out.push_str(r"\b");
    }
    let mut pending_space = false;
    for ch in phrase.chars() {
        if ch.is_whitespace() {
            pending_space = true;
            continue;
        }
        if pending_space {
            out.push_str(r"\s+");
            pending_space = false;
        }
        match ch {
            '\'' | '\u{2019}' => out.push_str("['\u{2019}]"),
            '-' => out.push_str(r"[-\s]?"),
            _ => out.push_str(&regex::escape(ch.encode_utf8(&mut [0; 4]))),
        }
    }
    if ends_word {
        out.push_str(r"\b");
    }
    out
}

pub(crate) fn is_word_char(ch: char) -> bool {
    ch.is_alphanumeric() || ch == '_'
}

/// Whole-phrase matcher over a fixed list of phrases.
///
/// Alternatives are tried longest-first so that at any position the longest
/// listed phrase wins.
#[derive(Debug, Clone)]
pub struct PhraseMatcher {
    regex: Regex,
    phrases: Vec<String>,
}

impl PhraseMatcher {
    pub fn new<S: AsRef<str>>(
        name: &str,
        phrases: &[S],
        case_sensitive: bool,
    ) -> Result<Self, LexiconError> {
        let mut cleaned: Vec<String> = Vec::with_capacity(phrases.len());
        for p in phrases {
            let p = p.as_ref().trim();
            if p.is_empty() {
                return Err(LexiconError::BlankPhrase {
                    name: name.to_string(),
                });
            }
            cleaned.push(p.to_string());
        }
        if cleaned.is_empty() {
            return Err(LexiconError::Empty(name.to_string()));
        }
        let mut ordered = cleaned.clone();
        ordered.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        ordered.dedup();
        let source = ordered
            .iter()
            .map(|p| phrase_pattern(p))
            .collect::<Vec<_>>()
            .join("|");
        let regex = RegexBuilder::new(&format!("(?:{source})"))
            .case_insensitive(!case_sensitive)
            .size_limit(64 << 20)
            .build()
            .map_err(|source| LexiconError::Compile {
                name: name.to_string(),
                source,
            })?;
        Ok(Self {
            regex,
            phrases: cleaned,
        })
    }

    pub fn phrases(&self) -> &[String] {
        &self.phrases
    }

    /// Byte ranges of all non-overlapping matches, left to right.
    pub fn find_iter<'t>(&'t self, text: &'t str) -> impl Iterator<Item = (usize, usize)> + 't {
        self.regex.find_iter(text).map(|m| (m.start(), m.end()))
    }

    pub fn is_match(&self, text: &str) -> bool {
        self.regex.is_match(text)
    }

    pub fn count(&self, text: &str) -> usize {
        self.regex.find_iter(text).count()
    }
}
