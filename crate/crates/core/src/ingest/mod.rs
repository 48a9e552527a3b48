//! Parsing, validation and cross-linking of the input datasets.
//!
//! Every line-delimited parser follows the same policy: records that fail a
//! per-record check are collected as [`Reject`]s with their line number and
//! the run continues. Corpus-level problems (duplicate ids, inconsistent
//! embedding dimension, unreadable streams) are hard [`IngestError`]s.

mod parse;
mod validate;
mod zones;

use std::collections::BTreeMap;
use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{GeoPoint, GeoPolygon};

pub use parse::{
    parse_embeddings, parse_listings, parse_owners, parse_permits, parse_reviews,
    write_embeddings, write_listings, write_owners, write_permits, write_reviews,
};
pub use validate::{validate_corpus, Severity, ValidationReport, Violation, ViolationKind};
pub use zones::{parse_zones, zones_to_geojson};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("duplicate {kind} id {id:?} on line {line}")]
    DuplicateId {
        kind: &'static str,
        id: String,
        line: usize,
    },
    #[error("embedding dimension mismatch for photo {photo_id:?}: expected {expected}, found {found}")]
    DimensionMismatch {
        photo_id: String,
        expected: usize,
        found: usize,
    },
    #[error("zones document: {0}")]
    Zones(String),
    #[error(transparent)]
    Geo(#[from] crate::geo::GeoError),
}

/// A record that could not be turned into an entity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    pub line: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub reason: String,
}

/// An accepted record that deserves attention.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Warning {
    pub line: usize,
    pub id: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParseOutput<T> {
    pub records: Vec<T>,
    pub rejects: Vec<Reject>,
    pub warnings: Vec<Warning>,
}

impl<T> Default for ParseOutput<T> {
    fn default() -> Self {
        ParseOutput {
            records: Vec::new(),
            rejects: Vec::new(),
            warnings: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoomType {
    EntireHome,
    PrivateRoom,
    SharedRoom,
}

impl RoomType {
    /// Airbnb's display string.
    pub fn display_name(self) -> &'static str {
        match self {
            RoomType::EntireHome => "Entire home/apt",
            RoomType::PrivateRoom => "Private room",
            RoomType::SharedRoom => "Shared room",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RoomType::EntireHome => "entire_home",
            RoomType::PrivateRoom => "private_room",
            RoomType::SharedRoom => "shared_room",
        }
    }

    /// Accepts the display strings and the snake_case names.
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "Entire home/apt" | "entire_home" => Some(RoomType::EntireHome),
            "Private room" | "private_room" => Some(RoomType::PrivateRoom),
            "Shared room" | "shared_room" => Some(RoomType::SharedRoom),
            _ => None,
        }
    }

    pub fn is_room_share(self) -> bool {
        matches!(self, RoomType::PrivateRoom | RoomType::SharedRoom)
    }
}

impl fmt::Display for RoomType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneLabel {
    Indoor,
    Outdoor,
    Unknown,
}

impl SceneLabel {
    pub const ALLOWED: &'static [&'static str] = &["indoor", "outdoor", "unknown"];

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "indoor" => Some(SceneLabel::Indoor),
            "outdoor" => Some(SceneLabel::Outdoor),
            "unknown" => Some(SceneLabel::Unknown),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SceneLabel::Indoor => "indoor",
            SceneLabel::Outdoor => "outdoor",
            SceneLabel::Unknown => "unknown",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PermitDecision {
    Granted,
    Refused,
    Pending,
    Unknown,
}

impl PermitDecision {
    pub const ALLOWED: &'static [&'static str] = &["granted", "refused", "pending", "unknown"];

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "granted" => Some(PermitDecision::Granted),
            "refused" => Some(PermitDecision::Refused),
            "pending" => Some(PermitDecision::Pending),
            "unknown" => Some(PermitDecision::Unknown),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PermitDecision::Granted => "granted",
            PermitDecision::Refused => "refused",
            PermitDecision::Pending => "pending",
            PermitDecision::Unknown => "unknown",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Listing {
    pub post_id: String,
    pub owner_id: String,
    pub room_type: RoomType,
    pub min_nights: u32,
    pub public_location: GeoPoint,
    pub photo_ids: Vec<String>,
    pub created_date: NaiveDate,
    pub title: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Owner {
    pub owner_id: String,
    pub listing_count: u32,
    /// Any further fields of the owner record, kept verbatim.
    pub metadata: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Review {
    pub review_id: String,
    pub post_id: String,
    pub date: NaiveDate,
    pub text: String,
    pub language: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhotoRecord {
    pub photo_id: String,
    pub post_id: String,
    pub scene_label: SceneLabel,
    /// Absent for photos the extractor could not decode.
    pub embedding: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PermitApplication {
    pub app_id: String,
    pub boundary: GeoPolygon,
    pub description: String,
    pub decision: PermitDecision,
}

/// All parsed inputs of one run.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub listings: Vec<Listing>,
    pub owners: Vec<Owner>,
    pub reviews: Vec<Review>,
    pub photos: Vec<PhotoRecord>,
    pub permits: Vec<PermitApplication>,
    pub zones: Vec<crate::geo::RentPressureZone>,
}
