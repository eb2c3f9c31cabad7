//! Cross-checking a detector label against a caption of the same crop.
//!
//! Captions are matched against a [`Lexicon`] of canonical labels and their
//! synonym phrases. A caption *supports* a label when the label or one of
//! its synonyms appears in it as whole words. It *contradicts* the label
//! when there is no support but some other canonical label is found by
//! leftmost-longest phrase matching.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BUILTIN_LEXICON: &str = include_str!("default_lexicon.json");

/// Lowercases and splits on anything that is not alphanumeric.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    entries: BTreeMap<String, BTreeSet<String>>,
    phrases: HashMap<Vec<String>, String>,
    longest: usize,
}

impl Lexicon {
    /// Builds a lexicon from canonical label -> synonyms. Canonical labels
    /// match themselves; every phrase must belong to exactly one label.
    pub fn new(map: BTreeMap<String, Vec<String>>) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut phrases: HashMap<Vec<String>, String> = HashMap::new();
        for (label, synonyms) in map {
            let canonical = tokenize(&label).join(" ");
            if canonical.is_empty() {
                return Err(Error::validation("empty canonical label in lexicon"));
            }
            let mut set = BTreeSet::new();
            for phrase in std::iter::once(&label).chain(&synonyms) {
                let tokens = tokenize(phrase);
                if tokens.is_empty() {
                    return Err(Error::validation(format!(
                        "empty synonym for {canonical:?}"
                    )));
                }
                match phrases.get(&tokens) {
                    Some(owner) if *owner != canonical => {
                        return Err(Error::validation(format!(
                            "phrase {:?} maps to both {owner:?} and {canonical:?}",
                            tokens.join(" ")
                        )))
                    }
                    _ => {}
                }
                set.insert(tokens.join(" "));
                phrases.insert(tokens, canonical.clone());
            }
            if entries.insert(canonical.clone(), set).is_some() {
                return Err(Error::validation(format!(
                    "duplicate canonical label {canonical:?}"
                )));
            }
        }
        let longest = phrases.keys().map(Vec::len).max().unwrap_or(0);
        Ok(Self {
            entries,
            phrases,
            longest,
        })
    }

    /// COCO object labels plus common household items, with synonyms.
    pub fn builtin() -> Self {
        Self::from_json(BUILTIN_LEXICON).expect("builtin lexicon is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let map: BTreeMap<String, Vec<String>> =
            serde_json::from_str(text).map_err(|e| Error::validation(format!("lexicon: {e}")))?;
        Self::new(map)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| e.context(format!("lexicon {}", path.display())))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Canonical label owning `phrase`, if any.
    pub fn canonical(&self, phrase: &str) -> Option<&str> {
        self.phrases.get(&tokenize(phrase)).map(String::as_str)
    }

    pub fn synonyms(&self, canonical: &str) -> Option<&BTreeSet<String>> {
        self.entries.get(canonical)
    }

    /// Leftmost-longest phrase matches in `tokens`, as (phrase, canonical).
    fn scan<'a>(&'a self, tokens: &[String]) -> Vec<(String, &'a str)> {
        let mut found = Vec::new();
        let mut pos = 0;
        while pos < tokens.len() {
            let max = self.longest.min(tokens.len() - pos);
            let hit = (1..=max).rev().find_map(|len| {
                let window = &tokens[pos..pos + len];
                self.phrases
                    .get(window)
                    .map(|c| (len, window.join(" "), c.as_str()))
            });
            match hit {
                Some((len, phrase, canonical)) => {
                    found.push((phrase, canonical));
                    pos += len;
                }
                None => pos += 1,
            }
        }
        found
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Override,
    FlagOnly,
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "override" => Ok(Policy::Override),
            "flag_only" | "flag-only" | "flag" => Ok(Policy::FlagOnly),
            other => Err(Error::validation(format!(
                "unknown caption policy {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Kept,
    Overridden,
    Flagged,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Action::Kept => "kept",
            Action::Overridden => "overridden",
            Action::Flagged => "flagged",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reconciliation {
    pub original_label: String,
    pub final_label: String,
    pub action: Action,
    pub matched_phrases: Vec<String>,
}

fn contains_phrase(tokens: &[String], phrase: &[String]) -> bool {
    !phrase.is_empty() && tokens.windows(phrase.len()).any(|w| w == phrase)
}

pub fn reconcile(
    label: &str,
    caption: &str,
    lexicon: &Lexicon,
    policy: Policy,
) -> Result<Reconciliation> {
    let tokens = tokenize(caption);
    if tokens.is_empty() {
        return Err(Error::validation("empty caption"));
    }

    // Labels missing from the lexicon act as their own single-phrase entry.
    let own: BTreeSet<String>;
    let supporting = match lexicon.canonical(label).and_then(|c| lexicon.synonyms(c)) {
        Some(set) => set,
        None => {
            own = BTreeSet::from([tokenize(label).join(" ")]);
            &own
        }
    };
    let support: Vec<String> = supporting
        .iter()
        .filter(|p| contains_phrase(&tokens, &tokenize(p)))
        .cloned()
        .collect();
    let kept = |matched_phrases| Reconciliation {
        original_label: label.to_owned(),
        final_label: label.to_owned(),
        action: Action::Kept,
        matched_phrases,
    };
    if !support.is_empty() {
        return Ok(kept(support));
    }

    let matches = lexicon.scan(&tokens);
    let Some((_, canonical)) = matches
        .iter()
        .min_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.1.cmp(b.1)))
    else {
        return Ok(kept(Vec::new()));
    };
    let matched_phrases = matches.iter().map(|(p, _)| p.clone()).collect();
    Ok(match policy {
        Policy::Override => Reconciliation {
            original_label: label.to_owned(),
            final_label: (*canonical).to_owned(),
            action: Action::Overridden,
            matched_phrases,
        },
        Policy::FlagOnly => Reconciliation {
            original_label: label.to_owned(),
            final_label: label.to_owned(),
            action: Action::Flagged,
            matched_phrases,
        },
    })
}
