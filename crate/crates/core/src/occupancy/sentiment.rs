use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::translate::Translator;
use crate::ingest::Review;

const BUILTIN_LEXICON: &str = include_str!("../../data/lexicon.tsv");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LexiconError {
    #[error("lexicon line {line}: {message}")]
    Line { line: usize, message: String },
}

/// Token polarities plus the negation words that flip the next scored token.
#[derive(Debug, Clone, PartialEq)]
pub struct SentimentLexicon {
    entries: BTreeMap<String, f64>,
    negators: BTreeSet<String>,
}

impl SentimentLexicon {
    pub fn new(entries: BTreeMap<String, f64>) -> Result<Self, LexiconError> {
        for (token, polarity) in &entries {
            if !(-1.0..=1.0).contains(polarity) {
                return Err(LexiconError::Line {
                    line: 0,
                    message: format!("polarity {polarity} of {token:?} outside [-1, 1]"),
                });
            }
        }
        let entries = entries.into_iter().map(|(k, v)| (k.to_lowercase(), v)).collect();
        Ok(SentimentLexicon {
            entries,
            negators: ["not", "no", "never"].iter().map(|s| s.to_string()).collect(),
        })
    }

    pub fn with_negators<I: IntoIterator<Item = String>>(mut self, negators: I) -> Self {
        self.negators = negators.into_iter().map(|n| n.to_lowercase()).collect();
        self
    }

    /// Parses `token<TAB>polarity` lines. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (token, value) = raw.split_once('\t').ok_or_else(|| LexiconError::Line {
                line,
                message: "expected token<TAB>polarity".into(),
            })?;
            let token = token.trim().to_lowercase();
            if token.is_empty() {
                return Err(LexiconError::Line {
                    line,
                    message: "empty token".into(),
                });
            }
            let polarity: f64 = value.trim().parse().map_err(|_| LexiconError::Line {
                line,
                message: format!("polarity {:?} is not a number", value.trim()),
            })?;
            if !(-1.0..=1.0).contains(&polarity) {
                return Err(LexiconError::Line {
                    line,
                    message: format!("polarity {polarity} outside [-1, 1]"),
                });
            }
            entries.insert(token, polarity);
        }
        SentimentLexicon::new(entries)
    }

    pub fn polarity(&self, token: &str) -> Option<f64> {
        self.entries.get(token).copied()
    }

    pub fn is_negator(&self, token: &str) -> bool {
        self.negators.contains(token)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, f64)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Mean polarity of the matched tokens of one text; 0 with no matches.
    ///
    /// A negator flips the sign of the next matched token. Consecutive
    /// negators cancel.
    pub fn score_text(&self, text: &str) -> f64 {
        let lowered = text.to_lowercase();
        let mut negate = false;
        let mut sum = 0.0;
        let mut hits = 0usize;
        for token in tokenize(&lowered) {
            if self.is_negator(token) {
                negate = !negate;
                continue;
            }
            if let Some(p) = self.polarity(token) {
                sum += if negate { -p } else { p };
                hits += 1;
                negate = false;
            }
        }
        if hits == 0 {
            0.0
        } else {
            (sum / hits as f64).clamp(-1.0, 1.0)
        }
    }
}

/// Source text of the starter lexicon shipped with the crate.
pub fn builtin_lexicon_tsv() -> &'static str {
    BUILTIN_LEXICON
}

/// The starter lexicon shipped with the crate.
pub fn builtin_lexicon() -> SentimentLexicon {
    SentimentLexicon::parse(BUILTIN_LEXICON).expect("bundled lexicon is valid")
}

/// Splits on runs of non-alphanumeric characters.
pub fn tokenize(text: &str) -> impl Iterator<Item = &str> {
    text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SentimentScore {
    pub score: f64,
    /// Reviews whose translation failed; they score 0.
    pub translation_failures: usize,
}

/// Average sentiment over a listing's reviews, in [-1, 1].
///
/// Per-review scores are summed in sorted order so the result does not
/// depend on review order.
pub fn sentiment_score(reviews: &[&Review], lexicon: &SentimentLexicon, translator: &dyn Translator) -> SentimentScore {
    if reviews.is_empty() {
        return SentimentScore {
            score: 0.0,
            translation_failures: 0,
        };
    }
    let mut failures = 0;
    let mut scores: Vec<f64> = reviews
        .iter()
        .map(|r| match translator.translate(r) {
            Ok(text) => lexicon.score_text(&text),
            Err(e) => {
                log::debug!("translation of review {} failed: {e}", r.review_id);
                failures += 1;
                0.0
            }
        })
        .collect();
    scores.sort_by(f64::total_cmp);
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    SentimentScore {
        score: mean.clamp(-1.0, 1.0),
        translation_failures: failures,
    }
}
