use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;

use serde::Serialize;
use thiserror::Error;

use super::world::GroundTruthRecord;
use crate::rules::{BreachFinding, Verdict};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("reading ground truth: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed ground truth on line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("post ids differ: only in findings {only_in_findings:?}, only in ground truth {only_in_truth:?}")]
    PostMismatch {
        only_in_findings: Vec<String>,
        only_in_truth: Vec<String>,
    },
}

pub fn read_ground_truth<R: BufRead>(reader: R) -> Result<Vec<GroundTruthRecord>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| EvalError::Malformed {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Confusion counts and scores for one positive class. A score is absent
/// when its denominator is zero.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BinaryScores {
    pub true_positive: usize,
    pub false_positive: usize,
    pub false_negative: usize,
    pub true_negative: usize,
    #[serde(serialize_with = "crate::fixed::option::serialize")]
    pub precision: Option<f64>,
    #[serde(serialize_with = "crate::fixed::option::serialize")]
    pub recall: Option<f64>,
    #[serde(serialize_with = "crate::fixed::option::serialize")]
    pub f1: Option<f64>,
}

impl BinaryScores {
    fn from_pairs<'a, I>(pairs: I, positive: Verdict) -> Self
    where
        I: IntoIterator<Item = (Verdict, Verdict)> + 'a,
    {
        let mut s = BinaryScores::default();
        for (truth, predicted) in pairs {
            match (truth == positive, predicted == positive) {
                (true, true) => s.true_positive += 1,
                (false, true) => s.false_positive += 1,
                (true, false) => s.false_negative += 1,
                (false, false) => s.true_negative += 1,
            }
        }
        let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
        s.precision = ratio(s.true_positive, s.true_positive + s.false_positive);
        s.recall = ratio(s.true_positive, s.true_positive + s.false_negative);
        s.f1 = ratio(
            2 * s.true_positive,
            2 * s.true_positive + s.false_positive + s.false_negative,
        );
        s
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ClusteringScore {
    pub owners: usize,
    pub owners_recovered: usize,
    #[serde(serialize_with = "crate::fixed::option::serialize")]
    pub recovery_fraction: Option<f64>,
    pub mismatched_owners: Vec<String>,
}

/// Permit matches that exist only because a public coordinate was moved.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct JitterEffect {
    /// (listing, permit) matches the true location would not produce.
    pub extra_matches: usize,
    pub listings_with_extra_matches: usize,
    /// Extra matches per permit.
    pub extra_matches_per_permit: BTreeMap<String, usize>,
    /// True matches the public location lost.
    pub lost_matches: usize,
    /// Listings matched per permit in the findings.
    pub permit_multiplicity: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub listing_count: usize,
    /// Scores with `potential_breach` as the positive class.
    pub potential_breach: BinaryScores,
    pub per_verdict: BTreeMap<Verdict, BinaryScores>,
    /// Ground-truth verdict, then detected verdict.
    pub confusion: BTreeMap<Verdict, BTreeMap<Verdict, usize>>,
    pub rule_code_agreement: usize,
    pub clustering: ClusteringScore,
    pub jitter: JitterEffect,
}

impl Metrics {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("metrics serialize");
        s.push('\n');
        s
    }
}

type Partition = BTreeSet<BTreeSet<String>>;

fn partitions<'a, I>(items: I) -> BTreeMap<String, Partition>
where
    I: IntoIterator<Item = (&'a str, &'a str, &'a str)>,
{
    let mut groups: BTreeMap<&str, BTreeMap<&str, BTreeSet<String>>> = BTreeMap::new();
    for (owner, group, post) in items {
        groups
            .entry(owner)
            .or_default()
            .entry(group)
            .or_default()
            .insert(post.to_owned());
    }
    groups
        .into_iter()
        .map(|(owner, g)| (owner.to_owned(), g.into_values().collect()))
        .collect()
}

/// Scores a run's findings against ground truth.
pub fn evaluate_detector(findings: &[BreachFinding], truth: &[GroundTruthRecord]) -> Result<Metrics, EvalError> {
    let found: BTreeMap<&str, &BreachFinding> = findings.iter().map(|f| (f.post_id.as_str(), f)).collect();
    let expected: BTreeMap<&str, &GroundTruthRecord> = truth.iter().map(|t| (t.post_id.as_str(), t)).collect();
    let only_in_findings: Vec<String> = found
        .keys()
        .filter(|k| !expected.contains_key(*k))
        .map(|k| k.to_string())
        .collect();
    let only_in_truth: Vec<String> = expected
        .keys()
        .filter(|k| !found.contains_key(*k))
        .map(|k| k.to_string())
        .collect();
    if !only_in_findings.is_empty() || !only_in_truth.is_empty() {
        return Err(EvalError::PostMismatch {
            only_in_findings,
            only_in_truth,
        });
    }

    let pairs: Vec<(Verdict, Verdict)> = expected
        .iter()
        .map(|(id, t)| (t.verdict, found[id].verdict))
        .collect();
    let mut confusion: BTreeMap<Verdict, BTreeMap<Verdict, usize>> = Verdict::ALL
        .iter()
        .map(|t| (*t, Verdict::ALL.iter().map(|p| (*p, 0)).collect()))
        .collect();
    for (t, p) in &pairs {
        *confusion.get_mut(t).unwrap().get_mut(p).unwrap() += 1;
    }

    let recovered = partitions(
        findings
            .iter()
            .map(|f| (f.owner_id.as_str(), f.evidence.residence.cluster_id.as_str(), f.post_id.as_str())),
    );
    let true_parts = partitions(
        truth
            .iter()
            .map(|t| (t.owner_id.as_str(), t.residence_id.as_str(), t.post_id.as_str())),
    );
    let mismatched_owners: Vec<String> = true_parts
        .iter()
        .filter(|(owner, part)| recovered.get(*owner) != Some(part))
        .map(|(owner, _)| owner.clone())
        .collect();
    let owners = true_parts.len();
    let clustering = ClusteringScore {
        owners,
        owners_recovered: owners - mismatched_owners.len(),
        recovery_fraction: (owners > 0).then(|| (owners - mismatched_owners.len()) as f64 / owners as f64),
        mismatched_owners,
    };

    let mut jitter = JitterEffect::default();
    for (id, t) in &expected {
        let detected: BTreeSet<&str> = found[id].evidence.permit.permit_ids.iter().map(String::as_str).collect();
        let actual: BTreeSet<&str> = t.permit_ids.iter().map(String::as_str).collect();
        let extra: Vec<&&str> = detected.difference(&actual).collect();
        if !extra.is_empty() {
            jitter.listings_with_extra_matches += 1;
        }
        for p in extra {
            jitter.extra_matches += 1;
            *jitter.extra_matches_per_permit.entry(p.to_string()).or_default() += 1;
        }
        jitter.lost_matches += actual.difference(&detected).count();
        for p in detected {
            *jitter.permit_multiplicity.entry(p.to_string()).or_default() += 1;
        }
    }

    Ok(Metrics {
        listing_count: pairs.len(),
        potential_breach: BinaryScores::from_pairs(pairs.iter().copied(), Verdict::PotentialBreach),
        per_verdict: Verdict::ALL
            .iter()
            .map(|v| (*v, BinaryScores::from_pairs(pairs.iter().copied(), *v)))
            .collect(),
        confusion,
        rule_code_agreement: expected
            .iter()
            .filter(|(id, t)| found[*id].rule_code == t.rule_code)
            .count(),
        clustering,
        jitter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{haversine_distance, GeoPoint, GeoPolygon};
    use crate::ingest::{Listing, PermitApplication, PermitDecision, RoomType};
    use crate::occupancy::OccupancyEstimate;
    use crate::permits::{filter_short_term_permits, match_permits, default_keywords, PermitMatch};
    use crate::rules::{evaluate_listing, ListingEvidence, RuleCode, RulesConfig};
    use chrono::NaiveDate;

    fn listing(post: &str, at: GeoPoint) -> Listing {
        Listing {
            post_id: post.into(),
            owner_id: format!("o-{post}"),
            room_type: RoomType::EntireHome,
            min_nights: 2,
            public_location: at,
            photo_ids: vec![],
            created_date: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
            title: String::new(),
        }
    }

    fn finding(l: &Listing, permit_match: PermitMatch, nights: f64) -> BreachFinding {
        let ev = ListingEvidence {
            listing: l.clone(),
            zone: Some("Z".into()),
            cluster_id: l.post_id.clone(),
            in_principal_cluster: true,
            principal_cluster_id: l.post_id.clone(),
            cluster_post_ids: vec![l.post_id.clone()],
            cluster_links: vec![],
            permit_match,
            radius_m: 150.0,
            occupancy: OccupancyEstimate {
                post_id: l.post_id.clone(),
                review_count_window: 0,
                sentiment_score: 0.0,
                sentiment_bias: 0.0,
                applied_bias: 0.0,
                raw_nights: nights,
                capped_nights: nights,
            },
        };
        evaluate_listing(&ev, &RulesConfig::default())
    }

    fn truth_of(f: &BreachFinding, residence: &str, permit_ids: Vec<String>) -> GroundTruthRecord {
        GroundTruthRecord {
            post_id: f.post_id.clone(),
            owner_id: f.owner_id.clone(),
            residence_id: residence.into(),
            true_location: f.evidence.public_location,
            zone: f.evidence.zone.clone(),
            principal: true,
            permit_ids,
            true_nights: f.evidence.occupancy.capped_nights,
            verdict: f.verdict,
            rule_code: f.rule_code,
        }
    }

    fn no_match(post: &str) -> PermitMatch {
        PermitMatch {
            post_id: post.into(),
            permit_ids: vec![],
            nearest_distance_m: None,
        }
    }

    #[test]
    fn identical_findings_score_perfectly() {
        let a = finding(&listing("a", GeoPoint { lat: 53.3, lon: -6.2 }), no_match("a"), 120.0);
        let b = finding(&listing("b", GeoPoint { lat: 53.3, lon: -6.2 }), no_match("b"), 10.0);
        let truth = vec![truth_of(&a, "r1", vec![]), truth_of(&b, "r2", vec![])];
        let m = evaluate_detector(&[a, b], &truth).unwrap();
        assert_eq!(m.potential_breach.precision, Some(1.0));
        assert_eq!(m.potential_breach.recall, Some(1.0));
        assert_eq!(m.clustering.recovery_fraction, Some(1.0));
        assert_eq!(m.rule_code_agreement, 2);
    }

    #[test]
    fn all_compliant_detector_has_zero_recall() {
        let breach = finding(&listing("a", GeoPoint { lat: 53.3, lon: -6.2 }), no_match("a"), 120.0);
        let quiet = finding(&listing("a", GeoPoint { lat: 53.3, lon: -6.2 }), no_match("a"), 10.0);
        let truth = vec![truth_of(&breach, "r1", vec![])];
        let m = evaluate_detector(&[quiet], &truth).unwrap();
        assert_eq!(m.potential_breach.recall, Some(0.0));
        assert_eq!(m.potential_breach.precision, None);
    }

    #[test]
    fn mismatched_posts_are_listed() {
        let a = finding(&listing("a", GeoPoint { lat: 53.3, lon: -6.2 }), no_match("a"), 1.0);
        let b = finding(&listing("b", GeoPoint { lat: 53.3, lon: -6.2 }), no_match("b"), 1.0);
        let err = evaluate_detector(&[a.clone()], &[truth_of(&b, "r", vec![])]).unwrap_err();
        match err {
            EvalError::PostMismatch {
                only_in_findings,
                only_in_truth,
            } => {
                assert_eq!(only_in_findings, vec!["a"]);
                assert_eq!(only_in_truth, vec!["b"]);
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn neighbour_permit_counts_as_jitter_extra() {
        // Two dwellings 40 m apart; only the first holds a permit.
        let home_a = GeoPoint { lat: 53.35, lon: -6.26 };
        let home_b = crate::geo::destination_point(home_a, std::f64::consts::FRAC_PI_2, 40.0);
        assert!((haversine_distance(home_a, home_b) - 40.0).abs() < 1e-6);
        let d = 8.0 / 111_195.0;
        let boundary = GeoPolygon::new(vec![
            GeoPoint { lat: home_a.lat - d, lon: home_a.lon - d },
            GeoPoint { lat: home_a.lat - d, lon: home_a.lon + d },
            GeoPoint { lat: home_a.lat + d, lon: home_a.lon + d },
            GeoPoint { lat: home_a.lat + d, lon: home_a.lon - d },
        ])
        .unwrap();
        let apps = vec![PermitApplication {
            app_id: "PA1".into(),
            boundary,
            description: "Change of use to short-term letting".into(),
            decision: PermitDecision::Granted,
        }];
        let permits = filter_short_term_permits(&apps, &default_keywords());
        let (la, lb) = (listing("a", home_a), listing("b", home_b));
        let (ma, mb) = (match_permits(&la, &permits, 150.0), match_permits(&lb, &permits, 150.0));
        assert!(ma.is_matched() && mb.is_matched());

        let fa = finding(&la, ma, 120.0);
        let fb = finding(&lb, mb, 120.0);
        assert_eq!(fb.rule_code, RuleCode::PermitHeld);
        let truth = vec![truth_of(&fa, "ra", vec!["PA1".into()]), {
            let mut t = truth_of(&fb, "rb", vec![]);
            t.verdict = Verdict::PotentialBreach;
            t.rule_code = RuleCode::Over90Days;
            t
        }];
        let m = evaluate_detector(&[fa, fb], &truth).unwrap();
        assert_eq!(m.jitter.extra_matches, 1);
        assert_eq!(m.jitter.extra_matches_per_permit["PA1"], 1);
        assert_eq!(m.jitter.permit_multiplicity["PA1"], 2);
        assert_eq!(m.potential_breach.recall, Some(0.0));
    }
}
