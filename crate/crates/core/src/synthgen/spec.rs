use std::path::Path;

use chrono::NaiveDate;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::GeoPoint;
use crate::occupancy::{occupancy_models, OccupancyConfig, DEFAULT_OCCUPANCY_MODEL};
use crate::residence::{principal_selectors, SimilarityThresholds, DEFAULT_PRINCIPAL_SELECTOR};
use crate::rules::RulesConfig;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecError {
    #[error("invalid world spec: {0}")]
    Invalid(String),
    #[error("unsatisfiable world spec: {0}")]
    Unsatisfiable(String),
    #[error("reading world spec: {0}")]
    Io(String),
}

/// Inclusive integer range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountRange {
    pub min: u32,
    pub max: u32,
}

impl CountRange {
    pub const fn new(min: u32, max: u32) -> Self {
        CountRange { min, max }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        rng.gen_range(self.min..=self.max)
    }
}

/// Half-open real range `[min, max)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NightsRange {
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZoneLayout {
    pub count: u32,
    /// Side of each square zone.
    pub size_m: f64,
    /// Distance between neighbouring zones, and from the zones to the band
    /// of out-of-zone residences.
    pub gap_m: f64,
    /// South-west corner of the first zone.
    pub origin: GeoPoint,
}

impl Default for ZoneLayout {
    fn default() -> Self {
        ZoneLayout {
            count: 3,
            size_m: 3000.0,
            gap_m: 1000.0,
            origin: GeoPoint { lat: 53.33, lon: -6.36 },
        }
    }
}

/// Relative weights of review tone per listing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SentimentMix {
    pub positive: f64,
    pub neutral: f64,
    pub negative: f64,
}

impl Default for SentimentMix {
    fn default() -> Self {
        SentimentMix {
            positive: 0.6,
            neutral: 0.25,
            negative: 0.15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldSpec {
    pub seed: u64,
    pub as_of: NaiveDate,
    pub zones: ZoneLayout,
    pub owners: u32,
    pub residences_per_owner: CountRange,
    pub posts_per_residence: CountRange,
    /// Photos of the dwelling itself; outdoor shots come on top.
    pub photos_per_post: CountRange,
    pub outdoor_photos_per_post: CountRange,
    /// Share of dwelling photos the scene classifier left as "unknown".
    pub unknown_label_fraction: f64,
    pub embedding_dim: usize,
    /// Lowest cosine between two photos of the same dwelling.
    pub intra_similarity: f64,
    /// Highest cosine between photos of different dwellings.
    pub inter_ceiling: f64,
    /// Share of residences holding a granted short-term letting permit.
    pub permit_coverage: f64,
    /// Share of unpermitted residences with a refused or unrelated application.
    pub decoy_permit_fraction: f64,
    pub outside_zone_fraction: f64,
    pub private_room_fraction: f64,
    /// Share of posts with a minimum stay long enough to be exempt.
    pub long_term_fraction: f64,
    pub min_nights: CountRange,
    /// Target nights let per year, before review counts are derived.
    pub occupancy_nights: NightsRange,
    /// Reviews older than the occupancy window.
    pub old_reviews_per_post: CountRange,
    pub sentiment: SentimentMix,
    pub jitter_radius_m: f64,
    /// Lattice step between residence locations.
    pub residence_spacing_m: f64,
    /// Minimum distance from a residence to a zone edge.
    pub boundary_margin_m: f64,
    pub principal_strategy: String,
    pub occupancy_model: String,
    pub similarity: SimilarityThresholds,
    pub occupancy: OccupancyConfig,
    pub rules: RulesConfig,
}

impl Default for WorldSpec {
    fn default() -> Self {
        WorldSpec {
            seed: 42,
            as_of: NaiveDate::from_ymd_opt(2024, 6, 30).unwrap(),
            zones: ZoneLayout::default(),
            owners: 60,
            residences_per_owner: CountRange::new(1, 3),
            posts_per_residence: CountRange::new(1, 3),
            photos_per_post: CountRange::new(2, 4),
            outdoor_photos_per_post: CountRange::new(0, 2),
            unknown_label_fraction: 0.1,
            embedding_dim: 64,
            intra_similarity: 0.97,
            inter_ceiling: 0.5,
            permit_coverage: 0.3,
            decoy_permit_fraction: 0.2,
            outside_zone_fraction: 0.1,
            private_room_fraction: 0.25,
            long_term_fraction: 0.05,
            min_nights: CountRange::new(1, 4),
            occupancy_nights: NightsRange { min: 0.0, max: 200.0 },
            old_reviews_per_post: CountRange::new(0, 3),
            sentiment: SentimentMix::default(),
            jitter_radius_m: 150.0,
            residence_spacing_m: 400.0,
            boundary_margin_m: 160.0,
            principal_strategy: DEFAULT_PRINCIPAL_SELECTOR.into(),
            occupancy_model: DEFAULT_OCCUPANCY_MODEL.into(),
            similarity: SimilarityThresholds::default(),
            occupancy: OccupancyConfig::default(),
            rules: RulesConfig::default(),
        }
    }
}

fn fraction(name: &str, x: f64) -> Result<(), SpecError> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(SpecError::Invalid(format!("{name} must be in [0, 1], got {x}")))
    }
}

fn range(name: &str, r: CountRange, min_allowed: u32) -> Result<(), SpecError> {
    if r.min < min_allowed || r.min > r.max {
        return Err(SpecError::Invalid(format!(
            "{name} needs {min_allowed} <= min <= max, got {}..={}",
            r.min, r.max
        )));
    }
    Ok(())
}

impl WorldSpec {
    pub fn from_file(path: &Path) -> Result<Self, SpecError> {
        let text = std::fs::read_to_string(path).map_err(|e| SpecError::Io(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| SpecError::Invalid(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("world spec serializes to TOML")
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        let invalid = |m: String| Err(SpecError::Invalid(m));
        if self.intra_similarity <= self.inter_ceiling {
            return Err(SpecError::Unsatisfiable(format!(
                "intra_similarity {} must exceed inter_ceiling {}",
                self.intra_similarity, self.inter_ceiling
            )));
        }
        if self.intra_similarity <= self.similarity.pair_high || self.intra_similarity >= 1.0 {
            return invalid(format!(
                "intra_similarity {} must lie in (pair_high = {}, 1)",
                self.intra_similarity, self.similarity.pair_high
            ));
        }
        if self.inter_ceiling >= self.similarity.pair_high || self.inter_ceiling <= -1.0 {
            return invalid(format!(
                "inter_ceiling {} must lie in (-1, pair_high = {})",
                self.inter_ceiling, self.similarity.pair_high
            ));
        }
        if self.inter_ceiling.acos() + self.intra_similarity.acos() >= std::f64::consts::PI {
            return Err(SpecError::Unsatisfiable(
                "no pair of dwelling directions is far enough apart for these targets".into(),
            ));
        }
        self.similarity.validate().map_err(|e| SpecError::Invalid(e.to_string()))?;
        self.occupancy.validate().map_err(|e| SpecError::Invalid(e.to_string()))?;
        self.rules.validate().map_err(SpecError::Invalid)?;
        if !principal_selectors().contains(&self.principal_strategy) {
            return invalid(format!("unknown principal strategy {:?}", self.principal_strategy));
        }
        if !occupancy_models().contains(&self.occupancy_model) {
            return invalid(format!("unknown occupancy model {:?}", self.occupancy_model));
        }
        if self.owners == 0 {
            return invalid("owners must be at least 1".into());
        }
        range("residences_per_owner", self.residences_per_owner, 1)?;
        range("posts_per_residence", self.posts_per_residence, 1)?;
        range("photos_per_post", self.photos_per_post, 1)?;
        range("outdoor_photos_per_post", self.outdoor_photos_per_post, 0)?;
        range("min_nights", self.min_nights, 1)?;
        range("old_reviews_per_post", self.old_reviews_per_post, 0)?;
        if self.min_nights.max >= self.rules.long_term_min_nights {
            return invalid(format!(
                "min_nights must stay below the long-term threshold {}",
                self.rules.long_term_min_nights
            ));
        }
        for (name, x) in [
            ("unknown_label_fraction", self.unknown_label_fraction),
            ("permit_coverage", self.permit_coverage),
            ("decoy_permit_fraction", self.decoy_permit_fraction),
            ("outside_zone_fraction", self.outside_zone_fraction),
            ("private_room_fraction", self.private_room_fraction),
            ("long_term_fraction", self.long_term_fraction),
        ] {
            fraction(name, x)?;
        }
        let mix = self.sentiment;
        if [mix.positive, mix.neutral, mix.negative].iter().any(|w| *w < 0.0 || !w.is_finite())
            || mix.positive + mix.neutral + mix.negative <= 0.0
        {
            return invalid("sentiment weights must be non-negative with a positive sum".into());
        }
        let n = self.occupancy_nights;
        if !(n.min >= 0.0 && n.min < n.max && n.max <= self.occupancy.cap_nights as f64) {
            return invalid(format!(
                "occupancy_nights must satisfy 0 <= min < max <= {}, got {}..{}",
                self.occupancy.cap_nights, n.min, n.max
            ));
        }
        if self.embedding_dim < 2 {
            return invalid("embedding_dim must be at least 2".into());
        }
        let z = &self.zones;
        z.origin.validate().map_err(|e| SpecError::Invalid(e.to_string()))?;
        if z.count == 0 || !(z.size_m > 2.0 * self.boundary_margin_m) || !(z.gap_m > self.boundary_margin_m) {
            return invalid("zones need count >= 1, size_m > 2 * boundary_margin_m and gap_m > boundary_margin_m".into());
        }
        if !(self.jitter_radius_m > 0.0 && self.residence_spacing_m > 0.0 && self.boundary_margin_m >= 0.0) {
            return invalid("jitter_radius_m and residence_spacing_m must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid_and_round_trips() {
        let spec = WorldSpec::default();
        spec.validate().unwrap();
        let back: WorldSpec = toml::from_str(&spec.to_toml()).unwrap();
        assert_eq!(back, spec);
        let partial: WorldSpec = toml::from_str("seed = 7\nowners = 3\n[zones]\ncount = 1\n").unwrap();
        assert_eq!(partial.seed, 7);
        assert_eq!(partial.zones.size_m, 3000.0);
    }

    #[test]
    fn separation_targets_are_checked() {
        let spec = WorldSpec {
            intra_similarity: 0.5,
            inter_ceiling: 0.6,
            ..WorldSpec::default()
        };
        assert!(matches!(spec.validate(), Err(SpecError::Unsatisfiable(_))));
        let spec = WorldSpec {
            intra_similarity: 0.94,
            ..WorldSpec::default()
        };
        assert!(matches!(spec.validate(), Err(SpecError::Invalid(_))));
        let spec = WorldSpec {
            inter_ceiling: 0.96,
            intra_similarity: 0.98,
            ..WorldSpec::default()
        };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn bad_ranges() {
        let spec = WorldSpec {
            photos_per_post: CountRange::new(3, 2),
            ..WorldSpec::default()
        };
        assert!(spec.validate().is_err());
        let spec = WorldSpec {
            permit_coverage: 1.5,
            ..WorldSpec::default()
        };
        assert!(spec.validate().is_err());
    }
}
