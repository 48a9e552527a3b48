//! Short-term letting rules for Rent Pressure Zones as a fixed decision table.
//!
//! Exemptions are checked first, in this order:
//!
//! | # | condition                                            | code          |
//! |---|------------------------------------------------------|---------------|
//! | 1 | listing outside every zone                           | `NOT_IN_RPZ`  |
//! | 2 | minimum stay of 15 nights or more                    | `LONG_TERM_ONLY` |
//! | 3 | private/shared room in the presumed principal home   | `HOME_SHARING` |
//! | 4 | a granted permit within the matching radius          | `PERMIT_HELD` |
//!
//! Otherwise a listing that is not the owner's presumed principal residence
//! is a potential breach (`NON_PRINCIPAL_NO_PERMIT`). A whole principal home
//! is a potential breach above 90 estimated nights, near breach above 70,
//! and compliant below that.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geo::GeoPoint;
use crate::ingest::{Listing, RoomType};
use crate::occupancy::OccupancyEstimate;
use crate::permits::{multiplicity_histogram, permit_multiplicity, PermitMatch};
use crate::residence::PostLink;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Exempt,
    Compliant,
    NearBreach,
    PotentialBreach,
}

impl Verdict {
    pub const ALL: [Verdict; 4] = [
        Verdict::Exempt,
        Verdict::Compliant,
        Verdict::NearBreach,
        Verdict::PotentialBreach,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Exempt => "exempt",
            Verdict::Compliant => "compliant",
            Verdict::NearBreach => "near_breach",
            Verdict::PotentialBreach => "potential_breach",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RuleCode {
    NotInRpz,
    LongTermOnly,
    HomeSharing,
    PermitHeld,
    NonPrincipalNoPermit,
    #[serde(rename = "OVER_90_DAYS")]
    Over90Days,
    #[serde(rename = "NEAR_90_DAYS")]
    Near90Days,
    #[serde(rename = "WITHIN_90_DAYS")]
    Within90Days,
}

impl RuleCode {
    pub const ALL: [RuleCode; 8] = [
        RuleCode::NotInRpz,
        RuleCode::LongTermOnly,
        RuleCode::HomeSharing,
        RuleCode::PermitHeld,
        RuleCode::NonPrincipalNoPermit,
        RuleCode::Over90Days,
        RuleCode::Near90Days,
        RuleCode::Within90Days,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RuleCode::NotInRpz => "NOT_IN_RPZ",
            RuleCode::LongTermOnly => "LONG_TERM_ONLY",
            RuleCode::HomeSharing => "HOME_SHARING",
            RuleCode::PermitHeld => "PERMIT_HELD",
            RuleCode::NonPrincipalNoPermit => "NON_PRINCIPAL_NO_PERMIT",
            RuleCode::Over90Days => "OVER_90_DAYS",
            RuleCode::Near90Days => "NEAR_90_DAYS",
            RuleCode::Within90Days => "WITHIN_90_DAYS",
        }
    }

    /// The only verdict this code can accompany.
    pub fn verdict(self) -> Verdict {
        match self {
            RuleCode::NotInRpz | RuleCode::LongTermOnly | RuleCode::HomeSharing | RuleCode::PermitHeld => {
                Verdict::Exempt
            }
            RuleCode::NonPrincipalNoPermit | RuleCode::Over90Days => Verdict::PotentialBreach,
            RuleCode::Near90Days => Verdict::NearBreach,
            RuleCode::Within90Days => Verdict::Compliant,
        }
    }
}

impl fmt::Display for RuleCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RulesConfig {
    /// Whole-home lettings above this many nights breach the annual cap.
    pub breach_nights: f64,
    /// Lower bound of the near-breach band `(near_breach_nights, breach_nights]`.
    pub near_breach_nights: f64,
    /// Minimum stays at or above this are not short-term lettings.
    pub long_term_min_nights: u32,
}

impl Default for RulesConfig {
    fn default() -> Self {
        RulesConfig {
            breach_nights: 90.0,
            near_breach_nights: 70.0,
            long_term_min_nights: 15,
        }
    }
}

impl RulesConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.near_breach_nights >= 0.0 && self.near_breach_nights <= self.breach_nights) {
            return Err(format!(
                "need 0 <= near_breach_nights <= breach_nights, got {} and {}",
                self.near_breach_nights, self.breach_nights
            ));
        }
        if self.long_term_min_nights == 0 {
            return Err("long_term_min_nights must be positive".into());
        }
        Ok(())
    }
}

/// Everything the pipeline learned about one listing.
#[derive(Debug, Clone, PartialEq)]
pub struct ListingEvidence {
    pub listing: Listing,
    pub zone: Option<String>,
    pub cluster_id: String,
    pub in_principal_cluster: bool,
    pub principal_cluster_id: String,
    pub cluster_post_ids: Vec<String>,
    pub cluster_links: Vec<PostLink>,
    pub permit_match: PermitMatch,
    pub radius_m: f64,
    pub occupancy: OccupancyEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidenceEvidence {
    pub cluster_id: String,
    pub cluster_post_ids: Vec<String>,
    pub in_principal_cluster: bool,
    pub principal_cluster_id: String,
    pub links: Vec<PostLink>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermitEvidence {
    pub permit_ids: Vec<String>,
    #[serde(serialize_with = "crate::fixed::option::serialize")]
    pub nearest_distance_m: Option<f64>,
    #[serde(serialize_with = "crate::fixed::serialize")]
    pub radius_m: f64,
}

/// Self-contained explanation attached to every finding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FindingEvidence {
    pub reason: String,
    pub zone: Option<String>,
    pub room_type: RoomType,
    pub min_nights: u32,
    #[serde(serialize_with = "crate::fixed::point::serialize")]
    pub public_location: GeoPoint,
    pub residence: ResidenceEvidence,
    pub permit: PermitEvidence,
    pub occupancy: OccupancyEstimate,
    pub thresholds: RulesConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreachFinding {
    pub post_id: String,
    pub owner_id: String,
    pub verdict: Verdict,
    pub rule_code: RuleCode,
    pub evidence: FindingEvidence,
}

/// First applicable exemption, if any.
pub fn classify_exemptions(ev: &ListingEvidence, cfg: &RulesConfig) -> Option<(Verdict, RuleCode)> {
    let code = if ev.zone.is_none() {
        RuleCode::NotInRpz
    } else if ev.listing.min_nights >= cfg.long_term_min_nights {
        RuleCode::LongTermOnly
    } else if ev.listing.room_type.is_room_share() && ev.in_principal_cluster {
        RuleCode::HomeSharing
    } else if ev.permit_match.is_matched() {
        RuleCode::PermitHeld
    } else {
        return None;
    };
    Some((Verdict::Exempt, code))
}

fn decide(ev: &ListingEvidence, cfg: &RulesConfig) -> (RuleCode, String) {
    if let Some((_, code)) = classify_exemptions(ev, cfg) {
        let reason = match code {
            RuleCode::NotInRpz => "listing is not inside a Rent Pressure Zone".to_string(),
            RuleCode::LongTermOnly => format!(
                "minimum stay of {} nights is at least {}",
                ev.listing.min_nights, cfg.long_term_min_nights
            ),
            RuleCode::HomeSharing => "room letting in the owner's presumed principal residence".to_string(),
            _ => format!("granted permit(s) within {} m: {}", ev.radius_m, ev.permit_match.permit_ids.join(", ")),
        };
        return (code, reason);
    }
    let nights = ev.occupancy.capped_nights;
    if !ev.in_principal_cluster {
        (
            RuleCode::NonPrincipalNoPermit,
            format!(
                "residence {} is not the owner's presumed principal residence ({}) and no granted permit was found",
                ev.cluster_id, ev.principal_cluster_id
            ),
        )
    } else if ev.listing.room_type == RoomType::EntireHome && nights > cfg.breach_nights {
        (
            RuleCode::Over90Days,
            format!("estimated {nights:.2} nights exceeds {}", cfg.breach_nights),
        )
    } else if ev.listing.room_type == RoomType::EntireHome && nights > cfg.near_breach_nights {
        (
            RuleCode::Near90Days,
            format!(
                "estimated {nights:.2} nights is within ({}, {}]",
                cfg.near_breach_nights, cfg.breach_nights
            ),
        )
    } else {
        (
            RuleCode::Within90Days,
            format!("estimated {nights:.2} nights is at most {}", cfg.near_breach_nights),
        )
    }
}

pub fn evaluate_listing(ev: &ListingEvidence, cfg: &RulesConfig) -> BreachFinding {
    let (rule_code, reason) = decide(ev, cfg);
    BreachFinding {
        post_id: ev.listing.post_id.clone(),
        owner_id: ev.listing.owner_id.clone(),
        verdict: rule_code.verdict(),
        rule_code,
        evidence: FindingEvidence {
            reason,
            zone: ev.zone.clone(),
            room_type: ev.listing.room_type,
            min_nights: ev.listing.min_nights,
            public_location: ev.listing.public_location,
            residence: ResidenceEvidence {
                cluster_id: ev.cluster_id.clone(),
                cluster_post_ids: ev.cluster_post_ids.clone(),
                in_principal_cluster: ev.in_principal_cluster,
                principal_cluster_id: ev.principal_cluster_id.clone(),
                links: ev.cluster_links.clone(),
            },
            permit: PermitEvidence {
                permit_ids: ev.permit_match.permit_ids.clone(),
                nearest_distance_m: ev.permit_match.nearest_distance_m,
                radius_m: ev.radius_m,
            },
            occupancy: ev.occupancy.clone(),
            thresholds: *cfg,
        },
    }
}

/// Corpus-level statistics derived from findings alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub artifact_version: String,
    pub listing_count: usize,
    pub in_rpz_count: usize,
    pub verdict_counts: BTreeMap<Verdict, usize>,
    pub rule_code_counts: BTreeMap<RuleCode, usize>,
    pub potential_breach_count: usize,
    pub near_breach_count: usize,
    /// Potential breaches over in-zone listings; absent with no in-zone listings.
    #[serde(serialize_with = "crate::fixed::option::serialize")]
    pub breach_rate: Option<f64>,
    /// Listings matched per permit.
    pub permit_multiplicity: BTreeMap<String, usize>,
    /// Permits per multiplicity value.
    pub permit_multiplicity_histogram: BTreeMap<usize, usize>,
}

pub fn summarize_findings(findings: &[BreachFinding]) -> RunSummary {
    let mut verdict_counts: BTreeMap<Verdict, usize> = Verdict::ALL.iter().map(|v| (*v, 0)).collect();
    let mut rule_code_counts: BTreeMap<RuleCode, usize> = RuleCode::ALL.iter().map(|c| (*c, 0)).collect();
    for f in findings {
        *verdict_counts.entry(f.verdict).or_default() += 1;
        *rule_code_counts.entry(f.rule_code).or_default() += 1;
    }
    let in_rpz_count = findings.iter().filter(|f| f.evidence.zone.is_some()).count();
    let potential_breach_count = verdict_counts[&Verdict::PotentialBreach];
    let multiplicity = permit_multiplicity(findings.iter().map(|f| f.evidence.permit.permit_ids.as_slice()));
    RunSummary {
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        listing_count: findings.len(),
        in_rpz_count,
        potential_breach_count,
        near_breach_count: verdict_counts[&Verdict::NearBreach],
        breach_rate: (in_rpz_count > 0).then(|| potential_breach_count as f64 / in_rpz_count as f64),
        permit_multiplicity_histogram: multiplicity_histogram(&multiplicity),
        permit_multiplicity: multiplicity,
        verdict_counts,
        rule_code_counts,
    }
}

/// Evaluates every listing; findings come back sorted by post id.
pub fn evaluate_corpus(evidence: &[ListingEvidence], cfg: &RulesConfig) -> (Vec<BreachFinding>, RunSummary) {
    let mut findings: Vec<BreachFinding> = evidence.iter().map(|ev| evaluate_listing(ev, cfg)).collect();
    findings.sort_by(|a, b| a.post_id.cmp(&b.post_id));
    let summary = summarize_findings(&findings);
    (findings, summary)
}
