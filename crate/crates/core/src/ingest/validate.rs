use std::collections::{BTreeMap, HashSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::Corpus;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    /// Blocks the run.
    Hard,
    /// Reported only.
    Soft,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    UnknownOwner,
    OrphanReview,
    OrphanPhoto,
    CountMismatch,
    FutureReview,
    MissingPhoto,
}

impl ViolationKind {
    pub fn severity(self) -> Severity {
        match self {
            ViolationKind::FutureReview | ViolationKind::MissingPhoto => Severity::Soft,
            _ => Severity::Hard,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ViolationKind::UnknownOwner => "unknown owner",
            ViolationKind::OrphanReview => "orphan review",
            ViolationKind::OrphanPhoto => "orphan photo",
            ViolationKind::CountMismatch => "count mismatch",
            ViolationKind::FutureReview => "future review",
            ViolationKind::MissingPhoto => "missing photo",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub severity: Severity,
    pub entity_ids: Vec<String>,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn hard_count(&self) -> usize {
        self.violations
            .iter()
            .filter(|v| v.severity == Severity::Hard)
            .count()
    }

    pub fn is_accepted(&self) -> bool {
        self.hard_count() == 0
    }

    fn push(&mut self, kind: ViolationKind, entity_ids: Vec<String>, message: String) {
        self.violations.push(Violation {
            kind,
            severity: kind.severity(),
            entity_ids,
            message: format!("{}: {message}", kind.label()),
        });
    }
}

/// Checks referential integrity across the parsed datasets. Reviews dated
/// after `as_of` are reported as soft violations.
pub fn validate_corpus(corpus: &Corpus, as_of: Option<NaiveDate>) -> ValidationReport {
    let mut report = ValidationReport::default();

    let owner_ids: HashSet<&str> = corpus.owners.iter().map(|o| o.owner_id.as_str()).collect();
    let post_ids: HashSet<&str> = corpus.listings.iter().map(|l| l.post_id.as_str()).collect();
    let photo_ids: HashSet<&str> = corpus.photos.iter().map(|p| p.photo_id.as_str()).collect();

    let mut per_owner: BTreeMap<&str, u32> = BTreeMap::new();
    for listing in &corpus.listings {
        *per_owner.entry(listing.owner_id.as_str()).or_default() += 1;
        if !owner_ids.contains(listing.owner_id.as_str()) {
            report.push(
                ViolationKind::UnknownOwner,
                vec![listing.post_id.clone(), listing.owner_id.clone()],
                format!("listing {} references unknown owner {}", listing.post_id, listing.owner_id),
            );
        }
        let missing: Vec<&String> = listing
            .photo_ids
            .iter()
            .filter(|id| !photo_ids.contains(id.as_str()))
            .collect();
        if !missing.is_empty() {
            let mut ids = vec![listing.post_id.clone()];
            ids.extend(missing.iter().map(|s| s.to_string()));
            report.push(
                ViolationKind::MissingPhoto,
                ids,
                format!("listing {} lists {} photo(s) without embeddings", listing.post_id, missing.len()),
            );
        }
    }

    for owner in &corpus.owners {
        let actual = per_owner.get(owner.owner_id.as_str()).copied().unwrap_or(0);
        if actual != owner.listing_count {
            report.push(
                ViolationKind::CountMismatch,
                vec![owner.owner_id.clone()],
                format!(
                    "owner {} declares listing_count={} but {} listing(s) reference it",
                    owner.owner_id, owner.listing_count, actual
                ),
            );
        }
    }

    for review in &corpus.reviews {
        if !post_ids.contains(review.post_id.as_str()) {
            report.push(
                ViolationKind::OrphanReview,
                vec![review.review_id.clone(), review.post_id.clone()],
                format!("review {} references unknown post {}", review.review_id, review.post_id),
            );
        }
        if let Some(as_of) = as_of {
            if review.date > as_of {
                report.push(
                    ViolationKind::FutureReview,
                    vec![review.review_id.clone()],
                    format!("review {} is dated {} after as-of {}", review.review_id, review.date, as_of),
                );
            }
        }
    }

    for photo in &corpus.photos {
        if !post_ids.contains(photo.post_id.as_str()) {
            report.push(
                ViolationKind::OrphanPhoto,
                vec![photo.photo_id.clone(), photo.post_id.clone()],
                format!("photo {} references unknown post {}", photo.photo_id, photo.post_id),
            );
        }
    }

    report
}
