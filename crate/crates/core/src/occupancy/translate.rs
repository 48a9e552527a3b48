//! Review translation.
//!
//! Scoring works on English text. Translation is pluggable: the default is
//! the identity, and [`CachedTranslator`] / [`CacheOnlyTranslator`] read a
//! JSON object `{review_id: translated_text}` that an external service can
//! populate offline. No network access is ever needed to score a run.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use thiserror::Error;

use crate::ingest::Review;
use crate::registry::Registry;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TranslateError {
    #[error("no translation available for review {0}")]
    Unavailable(String),
    #[error("translator setup: {0}")]
    Setup(String),
}

pub trait Translator: Send + Sync {
    fn name(&self) -> &'static str;
    fn translate(&self, review: &Review) -> Result<String, TranslateError>;
}

pub struct IdentityTranslator;

impl Translator for IdentityTranslator {
    fn name(&self) -> &'static str {
        "identity"
    }

    fn translate(&self, review: &Review) -> Result<String, TranslateError> {
        Ok(review.text.clone())
    }
}

fn is_english(review: &Review) -> bool {
    review
        .language
        .as_deref()
        .map_or(true, |tag| tag.eq_ignore_ascii_case("en") || tag.to_ascii_lowercase().starts_with("en-"))
}

fn load_cache(path: &Path) -> Result<BTreeMap<String, String>, TranslateError> {
    if !path.exists() {
        return Ok(BTreeMap::new());
    }
    let text = fs::read_to_string(path)
        .map_err(|e| TranslateError::Setup(format!("reading {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| TranslateError::Setup(format!("parsing {}: {e}", path.display())))
}

/// Serves translations from a pre-populated cache file. English (or untagged)
/// reviews pass through; other reviews missing from the cache fail.
pub struct CacheOnlyTranslator {
    cache: BTreeMap<String, String>,
}

impl CacheOnlyTranslator {
    pub fn load(path: &Path) -> Result<Self, TranslateError> {
        Ok(CacheOnlyTranslator {
            cache: load_cache(path)?,
        })
    }

    pub fn from_map(cache: BTreeMap<String, String>) -> Self {
        CacheOnlyTranslator { cache }
    }
}

impl Translator for CacheOnlyTranslator {
    fn name(&self) -> &'static str {
        "cache"
    }

    fn translate(&self, review: &Review) -> Result<String, TranslateError> {
        if let Some(text) = self.cache.get(&review.review_id) {
            return Ok(text.clone());
        }
        if is_english(review) {
            return Ok(review.text.clone());
        }
        Err(TranslateError::Unavailable(review.review_id.clone()))
    }
}

/// Wraps another translator with a read-through cache keyed by review id.
/// Readers share the lock; inserts are serialized.
pub struct CachedTranslator {
    inner: Arc<dyn Translator>,
    cache: RwLock<BTreeMap<String, String>>,
    path: Option<PathBuf>,
}

impl CachedTranslator {
    pub fn new(inner: Arc<dyn Translator>) -> Self {
        CachedTranslator {
            inner,
            cache: RwLock::new(BTreeMap::new()),
            path: None,
        }
    }

    pub fn with_file(inner: Arc<dyn Translator>, path: &Path) -> Result<Self, TranslateError> {
        Ok(CachedTranslator {
            inner,
            cache: RwLock::new(load_cache(path)?),
            path: Some(path.to_owned()),
        })
    }

    pub fn len(&self) -> usize {
        self.cache.read().expect("cache lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Writes the cache back to its file, if it has one.
    pub fn save(&self) -> Result<(), TranslateError> {
        let Some(path) = &self.path else { return Ok(()) };
        let cache = self.cache.read().expect("cache lock poisoned");
        let text = serde_json::to_string_pretty(&*cache).expect("string map serializes");
        fs::write(path, text).map_err(|e| TranslateError::Setup(format!("writing {}: {e}", path.display())))
    }
}

impl Translator for CachedTranslator {
    fn name(&self) -> &'static str {
        "cached"
    }

    fn translate(&self, review: &Review) -> Result<String, TranslateError> {
        if let Some(hit) = self.cache.read().expect("cache lock poisoned").get(&review.review_id) {
            return Ok(hit.clone());
        }
        let text = self.inner.translate(review)?;
        self.cache
            .write()
            .expect("cache lock poisoned")
            .entry(review.review_id.clone())
            .or_insert_with(|| text.clone());
        Ok(text)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TranslatorOptions {
    pub cache_path: Option<PathBuf>,
}

/// Builds a translator from run options.
pub trait TranslatorFactory: Send + Sync {
    fn name(&self) -> &'static str;
    fn build(&self, options: &TranslatorOptions) -> Result<Arc<dyn Translator>, TranslateError>;
}

struct IdentityFactory;

impl TranslatorFactory for IdentityFactory {
    fn name(&self) -> &'static str {
        "identity"
    }

    fn build(&self, _options: &TranslatorOptions) -> Result<Arc<dyn Translator>, TranslateError> {
        Ok(Arc::new(IdentityTranslator))
    }
}

struct CacheFactory;

impl TranslatorFactory for CacheFactory {
    fn name(&self) -> &'static str {
        "cache"
    }

    fn build(&self, options: &TranslatorOptions) -> Result<Arc<dyn Translator>, TranslateError> {
        let path = options
            .cache_path
            .as_deref()
            .ok_or_else(|| TranslateError::Setup("the cache translator needs a translation cache path".into()))?;
        Ok(Arc::new(CacheOnlyTranslator::load(path)?))
    }
}

pub const DEFAULT_TRANSLATOR: &str = "identity";

pub fn translators() -> Registry<dyn TranslatorFactory> {
    let mut reg: Registry<dyn TranslatorFactory> = Registry::new("translator");
    reg.register("identity", Arc::new(IdentityFactory));
    reg.register("cache", Arc::new(CacheFactory));
    reg
}
