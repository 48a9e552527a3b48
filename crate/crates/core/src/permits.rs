//! Short-term-letting permits and proximity matching of listings to them.
//!
//! Listing coordinates are published with up to 150 m of random offset, so a
//! listing is considered covered by any granted permit whose centroid lies
//! within the matching radius (boundary inclusive). Several listings around
//! one permit all match it; [`permit_multiplicity`] reports that fan-out.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::geo::{haversine_distance, polygon_centroid, GeoPoint};
use crate::ingest::{Listing, PermitApplication, PermitDecision};

pub const DEFAULT_RADIUS_M: f64 = 150.0;

pub fn default_keywords() -> Vec<String> {
    [
        "short-term let",
        "short term let",
        "short-term letting",
        "change of use",
        "tourism",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Permit {
    pub permit_id: String,
    pub location: GeoPoint,
    pub description: String,
    pub granted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermitMatch {
    pub post_id: String,
    /// Granted permits within the radius, sorted by id.
    pub permit_ids: Vec<String>,
    /// Distance to the nearest granted permit within the radius.
    pub nearest_distance_m: Option<f64>,
}

impl PermitMatch {
    pub fn is_matched(&self) -> bool {
        !self.permit_ids.is_empty()
    }
}

/// Keeps applications whose description mentions any keyword
/// (case-insensitive) and locates each at its boundary centroid.
pub fn filter_short_term_permits(applications: &[PermitApplication], keywords: &[String]) -> Vec<Permit> {
    let needles: Vec<String> = keywords.iter().map(|k| k.to_lowercase()).collect();
    applications
        .iter()
        .filter(|app| {
            let haystack = app.description.to_lowercase();
            needles.iter().any(|k| !k.is_empty() && haystack.contains(k.as_str()))
        })
        .map(|app| Permit {
            permit_id: app.app_id.clone(),
            location: polygon_centroid(&app.boundary),
            description: app.description.clone(),
            granted: app.decision == PermitDecision::Granted,
        })
        .collect()
}

pub fn match_permits(listing: &Listing, permits: &[Permit], radius_m: f64) -> PermitMatch {
    let mut hits: Vec<(&str, f64)> = permits
        .iter()
        .filter(|p| p.granted)
        .map(|p| (p.permit_id.as_str(), haversine_distance(listing.public_location, p.location)))
        .filter(|(_, d)| *d <= radius_m)
        .collect();
    let nearest = hits.iter().map(|(_, d)| *d).min_by(f64::total_cmp);
    hits.sort_by(|a, b| a.0.cmp(b.0));
    PermitMatch {
        post_id: listing.post_id.clone(),
        permit_ids: hits.into_iter().map(|(id, _)| id.to_owned()).collect(),
        nearest_distance_m: nearest,
    }
}

/// Number of listings matched to each permit that matched at least one.
pub fn permit_multiplicity<'a, I>(matches: I) -> BTreeMap<String, usize>
where
    I: IntoIterator<Item = &'a [String]>,
{
    let mut counts = BTreeMap::new();
    for ids in matches {
        for id in ids {
            *counts.entry(id.clone()).or_insert(0) += 1;
        }
    }
    counts
}

/// How many permits were matched by exactly k listings, keyed by k.
pub fn multiplicity_histogram(multiplicity: &BTreeMap<String, usize>) -> BTreeMap<usize, usize> {
    let mut hist = BTreeMap::new();
    for k in multiplicity.values() {
        *hist.entry(*k).or_insert(0) += 1;
    }
    hist
}
