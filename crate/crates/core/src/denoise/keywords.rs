use std::collections::BTreeSet;

use thiserror::Error;

const BUILTIN: &str = include_str!("../../data/reasoning_keywords.txt");

#[derive(Debug, Error, PartialEq)]
pub enum KeywordTableError {
    #[error("line {line}: expected `phrase => action, ...`")]
    Malformed { line: usize },
}

#[derive(Debug, Clone)]
struct Entry {
    words: Vec<String>,
    actions: BTreeSet<String>,
}

/// Phrase-to-action-type table used to read the intended action out of
/// free-form reasoning text.
#[derive(Debug, Clone)]
pub struct KeywordTable {
    entries: Vec<Entry>,
}

fn words(s: &str) -> Vec<String> {
    s.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

impl KeywordTable {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN).expect("builtin keyword table is well-formed")
    }

    pub fn parse(src: &str) -> Result<Self, KeywordTableError> {
        let mut entries = Vec::new();
        for (i, raw) in src.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (phrase, actions) = line
                .split_once("=>")
                .ok_or(KeywordTableError::Malformed { line: i + 1 })?;
            let phrase = words(phrase);
            let actions: BTreeSet<String> = actions
                .split(',')
                .map(|a| a.trim().to_ascii_lowercase())
                .filter(|a| !a.is_empty())
                .collect();
            if phrase.is_empty() || actions.is_empty() {
                return Err(KeywordTableError::Malformed { line: i + 1 });
            }
            entries.push(Entry {
                words: phrase,
                actions,
            });
        }
        Ok(KeywordTable { entries })
    }

    /// Action types named by the earliest (then longest) matching phrase.
    pub fn named_actions(&self, reasoning: &str) -> Option<&BTreeSet<String>> {
        let text = words(reasoning);
        for start in 0..text.len() {
            let best = self
                .entries
                .iter()
                .filter(|e| text[start..].starts_with(&e.words))
                .max_by_key(|e| e.words.len());
            if let Some(e) = best {
                return Some(&e.actions);
            }
        }
        None
    }

    /// True when the reasoning names an action and `action_type` is not among
    /// the ones it names. Reasoning without a known phrase is never flagged.
    pub fn mismatch(&self, reasoning: &str, action_type: &str) -> bool {
        self.named_actions(reasoning)
            .is_some_and(|set| !set.contains(action_type))
    }
}
