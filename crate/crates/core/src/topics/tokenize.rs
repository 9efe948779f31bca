use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::PaperId;

const STOPWORDS_TXT: &str = include_str!("stopwords.txt");

fn stopwords() -> &'static HashSet<&'static str> {
    static WORDS: OnceLock<HashSet<&'static str>> = OnceLock::new();
    WORDS.get_or_init(|| {
        STOPWORDS_TXT
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect()
    })
}

pub fn is_stopword(word: &str) -> bool {
    stopwords().contains(word)
}

/// Lowercase alphanumeric runs of at least three characters from the title
/// followed by the abstract, stopwords removed.
pub fn tokenize(title: &str, abstract_text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for text in [title, abstract_text] {
        for raw in text.split(|c: char| !c.is_alphanumeric()) {
            if raw.chars().count() < 3 {
                continue;
            }
            let word = raw.to_lowercase();
            if !is_stopword(&word) {
                tokens.push(word);
            }
        }
    }
    tokens
}

/// Sorted word list with a reverse index.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Vocabulary {
    words: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl Vocabulary {
    /// Keep words occurring in at least `min_df` distinct documents.
    pub fn build<S: AsRef<str>>(documents: &[Vec<S>], min_df: usize) -> Self {
        let mut df: BTreeMap<&str, usize> = BTreeMap::new();
        for doc in documents {
            let distinct: BTreeSet<&str> = doc.iter().map(AsRef::as_ref).collect();
            for w in distinct {
                *df.entry(w).or_insert(0) += 1;
            }
        }
        Self::from_words(
            df.into_iter()
                .filter(|&(_, n)| n >= min_df)
                .map(|(w, _)| w.to_string())
                .collect(),
        )
    }

    pub fn from_words(mut words: Vec<String>) -> Self {
        words.sort();
        words.dedup();
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        Vocabulary { words, index }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn word(&self, id: usize) -> &str {
        &self.words[id]
    }

    pub fn id(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    /// Map tokens to ids, dropping out-of-vocabulary tokens.
    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().filter_map(|t| self.id(t.as_ref())).collect()
    }
}

/// A paper as a bag of vocabulary ids, in token order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub paper_id: PaperId,
    pub tokens: Vec<usize>,
}

impl Document {
    /// Empty documents are allowed; they keep their prior topic mix.
    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}
