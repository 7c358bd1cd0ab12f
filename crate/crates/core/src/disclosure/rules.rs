//! Rule sets: declarative detection rules and the crisis lexicon.
//!
//! A rule set file is TOML:
//!
//! ```toml
//! [crisis]
//! source = "crisis.txt"
//!
//! [[rule]]
//! id = "given-names"
//! category = "person_name"
//! kind = "gazetteer"        # or "word_list" / "pattern"
//! source = "given_names.txt"
//! case_sensitive = false
//! ```
//!
//! Word-list and gazetteer sources are paths relative to the rule set file;
//! pattern sources are regular expressions. A pattern containing a capture
//! group named `m` reports only that group. When `[crisis]` is absent the
//! bundled crisis lexicon is used.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use regex::{Regex, RegexBuilder};
use serde::Deserialize;
use thiserror::Error;

use crate::lexicon::{parse_word_list, LexiconError, PhraseMatcher};
use crate::model::{SensitiveSpan, SpanCategory};

use super::SpanDetector;

const BUNDLED_RULES: &str = include_str!("../../lexicons/rules.toml");

fn bundled_file(name: &str) -> Option<&'static str> {
    match name {
        "given_names.txt" => Some(include_str!("../../lexicons/given_names.txt")),
        "places.txt" => Some(include_str!("../../lexicons/places.txt")),
        "crisis.txt" => Some(include_str!("../../lexicons/crisis.txt")),
        _ => None,
    }
}

pub const CRISIS_RULE_ID: &str = "crisis-lexicon";

#[derive(Debug, Error)]
pub enum RuleError {
    #[error("cannot read rule set {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("rule set parse error: {0}")]
    Parse(String),
    #[error("duplicate rule id {0:?}")]
    DuplicateRuleId(String),
    #[error("rule {id:?}: invalid pattern: {source}")]
    BadPattern {
        id: String,
        #[source]
        source: regex::Error,
    },
    #[error("rule {id:?}: {source}")]
    Lexicon {
        id: String,
        #[source]
        source: LexiconError,
    },
    #[error("bundled lexicon {0:?} does not exist")]
    UnknownBundledFile(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Matcher {
    WordList(PathBuf),
    Pattern(String),
    Gazetteer(PathBuf),
}

/// Declarative form of one rule, as written in the rule set file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetectionRule {
    pub rule_id: String,
    pub category: SpanCategory,
    pub matcher: Matcher,
    pub case_sensitive: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleFile {
    crisis: Option<CrisisSection>,
    #[serde(default)]
    rule: Vec<RuleEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CrisisSection {
    source: PathBuf,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
enum MatcherKind {
    WordList,
    Gazetteer,
    Pattern,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleEntry {
    id: String,
    category: SpanCategory,
    kind: MatcherKind,
    source: String,
    #[serde(default)]
    case_sensitive: bool,
}

/// Where word-list paths inside a rule set are read from.
enum FileSource<'a> {
    Dir(&'a Path),
    Bundled,
}

impl FileSource<'_> {
    fn read(&self, rel: &Path) -> Result<(String, String), LexiconError> {
        match self {
            FileSource::Dir(dir) => {
                let path = if rel.is_relative() {
                    dir.join(rel)
                } else {
                    rel.to_path_buf()
                };
                let text =
                    std::fs::read_to_string(&path).map_err(|source| LexiconError::Io {
                        path: path.display().to_string(),
                        source,
                    })?;
                Ok((path.display().to_string(), text))
            }
            FileSource::Bundled => {
                let name = rel.to_string_lossy().to_string();
                bundled_file(&name)
                    .map(|t| (name.clone(), t.to_string()))
                    .ok_or(LexiconError::Io {
                        path: name,
                        source: std::io::Error::from(std::io::ErrorKind::NotFound),
                    })
            }
        }
    }

    fn entries(&self, rel: &Path) -> Result<Vec<String>, LexiconError> {
        let (name, text) = self.read(rel)?;
        let entries = parse_word_list(&text);
        if entries.is_empty() {
            return Err(LexiconError::Empty(name));
        }
        Ok(entries)
    }
}

#[derive(Debug, Clone)]
enum CompiledMatcher {
    Phrases(PhraseMatcher),
    Pattern { regex: Regex, group: Option<usize> },
}

#[derive(Debug, Clone)]
struct CompiledRule {
    rule: DetectionRule,
    matcher: CompiledMatcher,
}

/// Crisis phrases, stored lowercase and matched as whole phrases.
#[derive(Debug, Clone)]
pub struct CrisisLexicon {
    matcher: PhraseMatcher,
}

impl CrisisLexicon {
    pub fn new<S: AsRef<str>>(phrases: &[S]) -> Result<Self, LexiconError> {
        let lowered: Vec<String> = phrases.iter().map(|p| p.as_ref().to_lowercase()).collect();
        Ok(Self {
            matcher: PhraseMatcher::new(CRISIS_RULE_ID, &lowered, false)?,
        })
    }

    pub fn bundled() -> Self {
        let phrases = parse_word_list(bundled_file("crisis.txt").expect("bundled crisis list"));
        Self::new(&phrases).expect("bundled crisis lexicon is valid")
    }

    pub fn phrases(&self) -> &[String] {
        self.matcher.phrases()
    }
}

impl SpanDetector for CrisisLexicon {
    fn detect(&self, text: &str) -> Vec<SensitiveSpan> {
        self.matcher
            .find_iter(text)
            .map(|(start, end)| SensitiveSpan {
                start,
                end,
                category: SpanCategory::CrisisIndicator,
                matched_text: text[start..end].to_string(),
                rule_id: CRISIS_RULE_ID.to_string(),
            })
            .collect()
    }
}

/// A loaded, compiled rule set together with its crisis lexicon.
#[derive(Debug, Clone)]
pub struct RuleSet {
    rules: Vec<CompiledRule>,
    crisis: CrisisLexicon,
}

impl RuleSet {
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_RULES, FileSource::Bundled).expect("bundled rule set is valid")
    }

    pub fn load(path: &Path) -> Result<Self, RuleError> {
        let text = std::fs::read_to_string(path).map_err(|source| RuleError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let dir = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, FileSource::Dir(dir))
    }

    /// Parses rule set text whose relative paths refer to `dir`.
    pub fn from_str_in(text: &str, dir: &Path) -> Result<Self, RuleError> {
        Self::parse(text, FileSource::Dir(dir))
    }

    fn parse(text: &str, files: FileSource<'_>) -> Result<Self, RuleError> {
        let file: RuleFile = toml::from_str(text).map_err(|e| RuleError::Parse(e.to_string()))?;
        let crisis = match &file.crisis {
            Some(section) => {
                let phrases =
                    files
                        .entries(&section.source)
                        .map_err(|source| RuleError::Lexicon {
                            id: CRISIS_RULE_ID.to_string(),
                            source,
                        })?;
                CrisisLexicon::new(&phrases).map_err(|source| RuleError::Lexicon {
                    id: CRISIS_RULE_ID.to_string(),
                    source,
                })?
            }
            None => CrisisLexicon::bundled(),
        };
        let mut seen = HashSet::new();
        seen.insert(CRISIS_RULE_ID.to_string());
        let mut rules = Vec::with_capacity(file.rule.len());
        for entry in file.rule {
            if !seen.insert(entry.id.clone()) {
                return Err(RuleError::DuplicateRuleId(entry.id));
            }
            let matcher = match entry.kind {
                MatcherKind::Pattern => Matcher::Pattern(entry.source.clone()),
                MatcherKind::WordList => Matcher::WordList(PathBuf::from(&entry.source)),
                MatcherKind::Gazetteer => Matcher::Gazetteer(PathBuf::from(&entry.source)),
            };
            let rule = DetectionRule {
                rule_id: entry.id,
                category: entry.category,
                matcher,
                case_sensitive: entry.case_sensitive,
            };
            rules.push(compile(rule, &files)?);
        }
        Ok(Self { rules, crisis })
    }

    pub fn rules(&self) -> impl Iterator<Item = &DetectionRule> {
        self.rules.iter().map(|r| &r.rule)
    }

    pub fn crisis(&self) -> &CrisisLexicon {
        &self.crisis
    }
}

fn compile(rule: DetectionRule, files: &FileSource<'_>) -> Result<CompiledRule, RuleError> {
    let lexicon_err = |source| RuleError::Lexicon {
        id: rule.rule_id.clone(),
        source,
    };
    let matcher = match &rule.matcher {
        Matcher::Pattern(source) => {
            let regex = RegexBuilder::new(source)
                .case_insensitive(!rule.case_sensitive)
                .build()
                .map_err(|source| RuleError::BadPattern {
                    id: rule.rule_id.clone(),
                    source,
                })?;
            let group = regex
                .capture_names()
                .position(|name| name == Some("m"));
            CompiledMatcher::Pattern { regex, group }
        }
        Matcher::WordList(path) | Matcher::Gazetteer(path) => {
            let entries = files.entries(path).map_err(lexicon_err)?;
            let phrases = PhraseMatcher::new(&rule.rule_id, &entries, rule.case_sensitive)
                .map_err(lexicon_err)?;
            CompiledMatcher::Phrases(phrases)
        }
    };
    Ok(CompiledRule { rule, matcher })
}

fn span(text: &str, start: usize, end: usize, rule: &DetectionRule) -> SensitiveSpan {
    SensitiveSpan {
        start,
        end,
        category: rule.category,
        matched_text: text[start..end].to_string(),
        rule_id: rule.rule_id.clone(),
    }
}

impl SpanDetector for RuleSet {
    fn detect(&self, text: &str) -> Vec<SensitiveSpan> {
        let mut out = Vec::new();
        for compiled in &self.rules {
            let rule = &compiled.rule;
            match &compiled.matcher {
                CompiledMatcher::Phrases(m) => {
                    out.extend(m.find_iter(text).map(|(s, e)| span(text, s, e, rule)));
                }
                CompiledMatcher::Pattern {
                    regex,
                    group: Some(g),
                } => {
                    for caps in regex.captures_iter(text) {
                        if let Some(m) = caps.get(*g).filter(|m| !m.is_empty()) {
                            out.push(span(text, m.start(), m.end(), rule));
                        }
                    }
                }
                CompiledMatcher::Pattern { regex, group: None } => {
                    out.extend(
                        regex
                            .find_iter(text)
                            .filter(|m| !m.is_empty())
                            .map(|m| span(text, m.start(), m.end(), rule)),
                    );
                }
            }
        }
        out.extend(self.crisis.detect(text));
        out
    }
}
