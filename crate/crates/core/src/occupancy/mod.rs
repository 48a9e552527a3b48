//! Review-based occupancy estimation.
//!
//! Yearly occupied nights are inferred from the number of reviews in the
//! trailing window:
//!
//! ```text
//! nights = reviews / (review_rate + bias) * max(avg_nights, min_nights)
//! bias   = sentiment_score * bias_factor
//! ```
//!
//! With `bias = 0` this is the plain review-rate model. A positive bias
//! enlarges the denominator and therefore *lowers* the estimate; the
//! `invert_bias` switch negates the bias for callers who want better reviews
//! to mean more nights.

mod sentiment;
mod translate;

use std::sync::Arc;

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::Review;
use crate::registry::Registry;

pub use sentiment::{builtin_lexicon, builtin_lexicon_tsv, sentiment_score, tokenize, LexiconError, SentimentLexicon, SentimentScore};
pub use translate::{
    translators, CacheOnlyTranslator, CachedTranslator, IdentityTranslator, TranslateError, Translator,
    TranslatorFactory, TranslatorOptions, DEFAULT_TRANSLATOR,
};

/// Average stay reported for Dublin listings.
pub const DUBLIN_AVG_NIGHTS: f64 = 4.6;
/// Average stay used by the original San Francisco model.
pub const SAN_FRANCISCO_AVG_NIGHTS: f64 = 5.5;
/// Fallback average stay when a city's figure is unknown.
pub const UNKNOWN_CITY_AVG_NIGHTS: f64 = 3.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OccupancyError {
    #[error("occupancy configuration: {0}")]
    Config(String),
    #[error("sentiment score {0} outside [-1, 1]")]
    ScoreOutOfRange(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OccupancyConfig {
    pub review_rate: f64,
    pub avg_nights: f64,
    pub bias_factor: f64,
    pub window_days: u32,
    pub cap_nights: u32,
    pub invert_bias: bool,
}

impl Default for OccupancyConfig {
    fn default() -> Self {
        OccupancyConfig {
            review_rate: 0.5,
            avg_nights: DUBLIN_AVG_NIGHTS,
            bias_factor: 0.1,
            window_days: 365,
            cap_nights: 365,
            invert_bias: false,
        }
    }
}

impl OccupancyConfig {
    pub fn validate(&self) -> Result<(), OccupancyError> {
        let fail = |m: String| Err(OccupancyError::Config(m));
        if !(self.review_rate > 0.0 && self.review_rate <= 1.0) {
            return fail(format!("review_rate must be in (0, 1], got {}", self.review_rate));
        }
        if !(self.avg_nights > 0.0 && self.avg_nights.is_finite()) {
            return fail(format!("avg_nights must be positive, got {}", self.avg_nights));
        }
        if !(self.bias_factor.is_finite() && self.review_rate - self.bias_factor.abs() > 0.0) {
            return fail(format!(
                "review_rate - |bias_factor| must be positive, got {} - {}",
                self.review_rate, self.bias_factor
            ));
        }
        if self.window_days == 0 || self.cap_nights == 0 {
            return fail("window_days and cap_nights must be positive".into());
        }
        Ok(())
    }
}

/// Keeps reviews dated in `(as_of - window_days, as_of]`.
pub fn reviews_in_window<'a>(reviews: &'a [Review], as_of: NaiveDate, window_days: u32) -> Vec<&'a Review> {
    let start = as_of - Duration::days(window_days as i64);
    reviews.iter().filter(|r| r.date > start && r.date <= as_of).collect()
}

/// Scales a sentiment score in [-1, 1] into a review-rate adjustment.
pub fn sentiment_bias(score: f64, bias_factor: f64) -> Result<f64, OccupancyError> {
    if !(-1.0..=1.0).contains(&score) {
        return Err(OccupancyError::ScoreOutOfRange(score));
    }
    Ok(score * bias_factor)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nights {
    pub raw: f64,
    pub capped: f64,
}

pub fn estimate_occupancy(
    review_count: usize,
    bias: f64,
    min_nights: u32,
    cfg: &OccupancyConfig,
) -> Result<Nights, OccupancyError> {
    let denominator = cfg.review_rate + bias;
    if !(denominator > 0.0) {
        return Err(OccupancyError::Config(format!(
            "review_rate + bias = {denominator} is not positive"
        )));
    }
    let stay = cfg.avg_nights.max(min_nights as f64);
    let raw = review_count as f64 / denominator * stay;
    Ok(Nights {
        raw,
        capped: raw.min(cfg.cap_nights as f64),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyEstimate {
    pub post_id: String,
    pub review_count_window: usize,
    #[serde(serialize_with = "crate::fixed::serialize")]
    pub sentiment_score: f64,
    /// `sentiment_score * bias_factor`.
    #[serde(serialize_with = "crate::fixed::serialize")]
    pub sentiment_bias: f64,
    /// Bias actually added to the review rate by the model.
    #[serde(serialize_with = "crate::fixed::serialize")]
    pub applied_bias: f64,
    #[serde(serialize_with = "crate::fixed::serialize")]
    pub raw_nights: f64,
    #[serde(serialize_with = "crate::fixed::serialize")]
    pub capped_nights: f64,
}

/// Turns a review count and sentiment score into an occupancy estimate.
pub trait OccupancyModel: Send + Sync {
    fn name(&self) -> &'static str;

    /// Bias added to the review rate for a listing with this score.
    fn applied_bias(&self, sentiment_score: f64, cfg: &OccupancyConfig) -> Result<f64, OccupancyError>;

    fn estimate(
        &self,
        post_id: &str,
        review_count: usize,
        sentiment_score: f64,
        min_nights: u32,
        cfg: &OccupancyConfig,
    ) -> Result<OccupancyEstimate, OccupancyError> {
        let bias = sentiment_bias(sentiment_score, cfg.bias_factor)?;
        let applied = self.applied_bias(sentiment_score, cfg)?;
        let nights = estimate_occupancy(review_count, applied, min_nights, cfg)?;
        Ok(OccupancyEstimate {
            post_id: post_id.to_owned(),
            review_count_window: review_count,
            sentiment_score,
            sentiment_bias: bias,
            applied_bias: applied,
            raw_nights: nights.raw,
            capped_nights: nights.capped,
        })
    }
}

/// Review rate adjusted by the sentiment bias.
pub struct SentimentAdjusted;

impl OccupancyModel for SentimentAdjusted {
    fn name(&self) -> &'static str {
        "sentiment"
    }

    fn applied_bias(&self, sentiment_score: f64, cfg: &OccupancyConfig) -> Result<f64, OccupancyError> {
        let bias = sentiment_bias(sentiment_score, cfg.bias_factor)?;
        Ok(if cfg.invert_bias { -bias } else { bias })
    }
}

/// Fixed review rate; sentiment is ignored.
pub struct FixedReviewRate;

impl OccupancyModel for FixedReviewRate {
    fn name(&self) -> &'static str {
        "san_francisco"
    }

    fn applied_bias(&self, sentiment_score: f64, _cfg: &OccupancyConfig) -> Result<f64, OccupancyError> {
        if !(-1.0..=1.0).contains(&sentiment_score) {
            return Err(OccupancyError::ScoreOutOfRange(sentiment_score));
        }
        Ok(0.0)
    }
}

pub const DEFAULT_OCCUPANCY_MODEL: &str = "sentiment";

pub fn occupancy_models() -> Registry<dyn OccupancyModel> {
    let mut reg: Registry<dyn OccupancyModel> = Registry::new("occupancy model");
    for m in [
        Arc::new(SentimentAdjusted) as Arc<dyn OccupancyModel>,
        Arc::new(FixedReviewRate),
    ] {
        reg.register(m.name(), m);
    }
    reg
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn review(id: &str, date: NaiveDate) -> Review {
        Review {
            review_id: id.into(),
            post_id: "p".into(),
            date,
            text: String::new(),
            language: None,
        }
    }

    #[test]
    fn window_is_half_open() {
        let as_of = NaiveDate::from_ymd_opt(2024, 6, 30).unwrap();
        let reviews = vec![
            review("today", as_of),
            review("edge", as_of - Duration::days(365)),
            review("inside", as_of - Duration::days(364)),
            review("future", as_of + Duration::days(1)),
        ];
        let kept: Vec<&str> = reviews_in_window(&reviews, as_of, 365)
            .iter()
            .map(|r| r.review_id.as_str())
            .collect();
        assert_eq!(kept, vec!["today", "inside"]);
        assert!(reviews_in_window(&[], as_of, 365).is_empty());
    }

    #[test]
    fn bias_examples() {
        assert_eq!(sentiment_bias(0.0, 0.1).unwrap(), 0.0);
        assert_eq!(sentiment_bias(1.0, 0.1).unwrap(), 0.1);
        assert_eq!(sentiment_bias(-1.0, 0.1).unwrap(), -0.1);
        assert_eq!(sentiment_bias(1.5, 0.1), Err(OccupancyError::ScoreOutOfRange(1.5)));
    }

    #[test]
    fn occupancy_examples() {
        let cfg = OccupancyConfig::default();
        assert_eq!(estimate_occupancy(10, 0.0, 2, &cfg).unwrap().raw, 92.0);
        assert_eq!(estimate_occupancy(0, 0.0, 2, &cfg).unwrap().raw, 0.0);
        let n = estimate_occupancy(10, 0.1, 2, &cfg).unwrap();
        assert!((n.raw - 76.67).abs() < 0.01);
        assert_eq!(estimate_occupancy(10, 0.0, 7, &cfg).unwrap().raw, 140.0);
        let heavy = estimate_occupancy(100, 0.0, 2, &cfg).unwrap();
        assert!((heavy.raw - 920.0).abs() < 1e-9);
        assert_eq!(heavy.capped, 365.0);
        assert!(estimate_occupancy(1, -0.5, 2, &cfg).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(OccupancyConfig::default().validate().is_ok());
        let bad = OccupancyConfig { review_rate: 0.05, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = OccupancyConfig { review_rate: 1.5, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = OccupancyConfig { cap_nights: 0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn model_registry_and_invert() {
        let reg = occupancy_models();
        let cfg = OccupancyConfig::default();
        let sentiment = reg.get("sentiment").unwrap();
        let fixed = reg.get("san_francisco").unwrap();
        let e = sentiment.estimate("p", 10, 1.0, 2, &cfg).unwrap();
        assert!((e.raw_nights - 76.666_666).abs() < 1e-5);
        assert_eq!(e.sentiment_bias, 0.1);
        let inv = OccupancyConfig { invert_bias: true, ..cfg };
        let e = sentiment.estimate("p", 10, 1.0, 2, &inv).unwrap();
        assert_eq!(e.applied_bias, -0.1);
        assert!((e.raw_nights - 115.0).abs() < 1e-9);
        let e = fixed.estimate("p", 10, 1.0, 2, &cfg).unwrap();
        assert_eq!(e.raw_nights, 92.0);
        let sf = OccupancyConfig { avg_nights: SAN_FRANCISCO_AVG_NIGHTS, ..cfg };
        assert_eq!(fixed.estimate("p", 10, 0.3, 2, &sf).unwrap().raw_nights, 110.0);
    }

    proptest! {
        #[test]
        fn nondecreasing_in_reviews_and_min_nights(
            count in 0usize..500,
            min_nights in 1u32..40,
            score in -1.0f64..=1.0,
        ) {
            let cfg = OccupancyConfig::default();
            let bias = sentiment_bias(score, cfg.bias_factor).unwrap();
            let base = estimate_occupancy(count, bias, min_nights, &cfg).unwrap();
            let more_reviews = estimate_occupancy(count + 1, bias, min_nights, &cfg).unwrap();
            let longer_stays = estimate_occupancy(count, bias, min_nights + 1, &cfg).unwrap();
            prop_assert!(more_reviews.raw >= base.raw);
            prop_assert!(longer_stays.raw >= base.raw);
            prop_assert!(base.capped <= cfg.cap_nights as f64);
            prop_assert!(base.raw >= 0.0);
        }
    }
}
