//! Principal-residence identification from listing photos.
//!
//! Outdoor photos are discarded, the remaining embeddings of two posts are
//! compared, and posts that pass the similarity rule are linked. Connected
//! components of the link graph are residences. One residence per owner is
//! presumed to be the principal one, chosen by a named [`PrincipalSelector`].

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use chrono::NaiveDate;
use petgraph::unionfind::UnionFind;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{PhotoRecord, SceneLabel};
use crate::registry::Registry;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimilarityError {
    #[error("vector has zero norm")]
    DegenerateVector,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("invalid similarity thresholds: {0}")]
    InvalidThresholds(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimilarityThresholds {
    /// A photo pair above this counts toward the multi-photo rule.
    pub pair_high: f64,
    /// A single pair at or above this links two posts on its own. Stands in
    /// for "identical photo": independently encoded copies never reach 1.0.
    pub pair_exact: f64,
    /// Distinct high-similarity pairs needed by the multi-photo rule.
    pub min_high_pairs: usize,
}

impl Default for SimilarityThresholds {
    fn default() -> Self {
        SimilarityThresholds {
            pair_high: 0.95,
            pair_exact: 0.999,
            min_high_pairs: 2,
        }
    }
}

impl SimilarityThresholds {
    pub fn validate(&self) -> Result<(), SimilarityError> {
        if !(self.pair_high > 0.0 && self.pair_high < self.pair_exact && self.pair_exact <= 1.0) {
            return Err(SimilarityError::InvalidThresholds(format!(
                "need 0 < pair_high < pair_exact <= 1, got pair_high={} pair_exact={}",
                self.pair_high, self.pair_exact
            )));
        }
        if self.min_high_pairs < 1 {
            return Err(SimilarityError::InvalidThresholds(
                "min_high_pairs must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IndoorSelection {
    pub photos: Vec<PhotoRecord>,
    pub unknown_kept: usize,
    pub outdoor_dropped: usize,
}

/// Drops outdoor photos. Unknown-labelled photos are kept and tallied.
pub fn filter_indoor(photos: &[PhotoRecord]) -> IndoorSelection {
    let mut out = IndoorSelection::default();
    for photo in photos {
        match photo.scene_label {
            SceneLabel::Indoor => out.photos.push(photo.clone()),
            SceneLabel::Unknown => {
                out.unknown_kept += 1;
                out.photos.push(photo.clone());
            }
            SceneLabel::Outdoor => out.outdoor_dropped += 1,
        }
    }
    out
}

pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64, SimilarityError> {
    if u.len() != v.len() {
        return Err(SimilarityError::DimensionMismatch(u.len(), v.len()));
    }
    let (mut dot, mut nu, mut nv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Err(SimilarityError::DegenerateVector);
    }
    Ok((dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchRule {
    /// Enough distinct photos on both sides above `pair_high`.
    MultiPhoto,
    /// One pair at or above `pair_exact`.
    IdenticalPhoto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotoPair {
    pub photo_a: String,
    pub photo_b: String,
    #[serde(serialize_with = "crate::fixed::serialize")]
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidenceMatch {
    pub same: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rule: Option<MatchRule>,
    pub pairs: Vec<PhotoPair>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl ResidenceMatch {
    fn no(note: Option<&str>) -> Self {
        ResidenceMatch {
            same: false,
            rule: None,
            pairs: Vec::new(),
            note: note.map(str::to_owned),
        }
    }
}

fn usable(photos: &[PhotoRecord]) -> Vec<(&str, &[f64])> {
    photos
        .iter()
        .filter_map(|p| {
            let v = p.embedding.as_deref()?;
            v.iter().any(|x| *x != 0.0).then_some((p.photo_id.as_str(), v))
        })
        .collect()
}

/// Kuhn's augmenting-path matching on the bipartite graph `adj` (A -> B).
fn max_matching(adj: &[Vec<usize>], b_len: usize) -> Vec<Option<usize>> {
    fn augment(
        a: usize,
        adj: &[Vec<usize>],
        seen: &mut [bool],
        owner_of_b: &mut [Option<usize>],
    ) -> bool {
        for &b in &adj[a] {
            if seen[b] {
                continue;
            }
            seen[b] = true;
            if owner_of_b[b].map_or(true, |other| augment(other, adj, seen, owner_of_b)) {
                owner_of_b[b] = Some(a);
                return true;
            }
        }
        false
    }

    let mut owner_of_b = vec![None; b_len];
    for a in 0..adj.len() {
        let mut seen = vec![false; b_len];
        augment(a, adj, &mut seen, &mut owner_of_b);
    }
    owner_of_b
}

/// Decides whether two posts show the same dwelling.
///
/// Both photo lists should already be indoor-filtered. Photos without a
/// usable vector are ignored.
pub fn posts_same_residence(
    photos_a: &[PhotoRecord],
    photos_b: &[PhotoRecord],
    thresholds: &SimilarityThresholds,
) -> ResidenceMatch {
    let a = usable(photos_a);
    let b = usable(photos_b);
    if a.is_empty() || b.is_empty() {
        return ResidenceMatch::no(Some("insufficient photos"));
    }

    let mut sims = vec![vec![f64::NAN; b.len()]; a.len()];
    for (i, (_, va)) in a.iter().enumerate() {
        for (j, (_, vb)) in b.iter().enumerate() {
            if let Ok(s) = cosine_similarity(va, vb) {
                sims[i][j] = s;
            }
        }
    }

    let adj: Vec<Vec<usize>> = sims
        .iter()
        .map(|row| {
            let mut js: Vec<usize> = (0..row.len()).filter(|&j| row[j] > thresholds.pair_high).collect();
            js.sort_by(|&x, &y| row[y].total_cmp(&row[x]).then(x.cmp(&y)));
            js
        })
        .collect();
    let matching = max_matching(&adj, b.len());
    let mut matched: Vec<PhotoPair> = matching
        .iter()
        .enumerate()
        .filter_map(|(j, owner)| owner.map(|i| (i, j)))
        .map(|(i, j)| PhotoPair {
            photo_a: a[i].0.to_owned(),
            photo_b: b[j].0.to_owned(),
            similarity: sims[i][j],
        })
        .collect();
    if matched.len() >= thresholds.min_high_pairs {
        matched.sort_by(|x, y| x.photo_a.cmp(&y.photo_a).then(x.photo_b.cmp(&y.photo_b)));
        return ResidenceMatch {
            same: true,
            rule: Some(MatchRule::MultiPhoto),
            pairs: matched,
            note: None,
        };
    }

    let mut best: Option<(usize, usize)> = None;
    for i in 0..a.len() {
        for j in 0..b.len() {
            if sims[i][j] >= thresholds.pair_exact
                && best.map_or(true, |(bi, bj)| sims[i][j] > sims[bi][bj])
            {
                best = Some((i, j));
            }
        }
    }
    match best {
        Some((i, j)) => ResidenceMatch {
            same: true,
            rule: Some(MatchRule::IdenticalPhoto),
            pairs: vec![PhotoPair {
                photo_a: a[i].0.to_owned(),
                photo_b: b[j].0.to_owned(),
                similarity: sims[i][j],
            }],
            note: None,
        },
        None => ResidenceMatch::no(None),
    }
}

/// Everything the clustering step needs about one post.
#[derive(Debug, Clone, PartialEq)]
pub struct PostInput {
    pub post_id: String,
    pub owner_id: String,
    /// Indoor-filtered photos.
    pub photos: Vec<PhotoRecord>,
    pub recent_review_count: usize,
    pub created_date: NaiveDate,
}

/// A link between two posts judged to be the same dwelling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostLink {
    pub post_a: String,
    pub post_b: String,
    pub rule: MatchRule,
    pub pairs: Vec<PhotoPair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidenceCluster {
    /// Smallest post id in the cluster.
    pub cluster_id: String,
    pub owner_id: String,
    pub post_ids: BTreeSet<String>,
    pub presumed_principal: bool,
    pub recent_review_count: usize,
    pub earliest_created: NaiveDate,
    /// Other owners whose posts were linked to this dwelling (global mode).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub shared_with: Vec<String>,
}

/// Summary of one candidate cluster handed to a [`PrincipalSelector`].
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterFacts {
    pub cluster_id: String,
    pub post_count: usize,
    pub recent_review_count: usize,
    pub earliest_created: NaiveDate,
}

/// Picks which of an owner's residences is presumed to be the principal one.
pub trait PrincipalSelector: Send + Sync {
    fn name(&self) -> &'static str;
    /// Index into `candidates` (never empty) of the principal residence.
    fn select(&self, candidates: &[ClusterFacts]) -> usize;
}

fn pick_min_by<F>(candidates: &[ClusterFacts], key: F) -> usize
where
    F: Fn(&ClusterFacts, &ClusterFacts) -> std::cmp::Ordering,
{
    (0..candidates.len())
        .min_by(|&x, &y| key(&candidates[x], &candidates[y]))
        .expect("selector called with no candidates")
}

/// Most reviews in the window, then earliest listing, then smallest id.
pub struct MostRecentReviews;

impl PrincipalSelector for MostRecentReviews {
    fn name(&self) -> &'static str {
        "most_recent_reviews"
    }

    fn select(&self, candidates: &[ClusterFacts]) -> usize {
        pick_min_by(candidates, |a, b| {
            b.recent_review_count
                .cmp(&a.recent_review_count)
                .then(a.earliest_created.cmp(&b.earliest_created))
                .then(a.cluster_id.cmp(&b.cluster_id))
        })
    }
}

/// Earliest listed dwelling, then most reviews, then smallest id.
pub struct EarliestListed;

impl PrincipalSelector for EarliestListed {
    fn name(&self) -> &'static str {
        "earliest_listed"
    }

    fn select(&self, candidates: &[ClusterFacts]) -> usize {
        pick_min_by(candidates, |a, b| {
            a.earliest_created
                .cmp(&b.earliest_created)
                .then(b.recent_review_count.cmp(&a.recent_review_count))
                .then(a.cluster_id.cmp(&b.cluster_id))
        })
    }
}

/// The dwelling with the most posts, then most reviews, then smallest id.
pub struct LargestCluster;

impl PrincipalSelector for LargestCluster {
    fn name(&self) -> &'static str {
        "largest_cluster"
    }

    fn select(&self, candidates: &[ClusterFacts]) -> usize {
        pick_min_by(candidates, |a, b| {
            b.post_count
                .cmp(&a.post_count)
                .then(b.recent_review_count.cmp(&a.recent_review_count))
                .then(a.cluster_id.cmp(&b.cluster_id))
        })
    }
}

pub const DEFAULT_PRINCIPAL_SELECTOR: &str = "most_recent_reviews";

pub fn principal_selectors() -> Registry<dyn PrincipalSelector> {
    let mut reg: Registry<dyn PrincipalSelector> = Registry::new("principal selector");
    for s in [
        Arc::new(MostRecentReviews) as Arc<dyn PrincipalSelector>,
        Arc::new(EarliestListed),
        Arc::new(LargestCluster),
    ] {
        reg.register(s.name(), s);
    }
    reg
}

/// Links every pair of posts that passes the similarity rule and returns the
/// connected components (each sorted, ordered by smallest member) plus links.
pub fn partition_posts(
    posts: &[&PostInput],
    thresholds: &SimilarityThresholds,
) -> (Vec<Vec<String>>, Vec<PostLink>) {
    let mut order: Vec<usize> = (0..posts.len()).collect();
    order.sort_by(|&x, &y| posts[x].post_id.cmp(&posts[y].post_id));
    let sorted: Vec<&PostInput> = order.iter().map(|&i| posts[i]).collect();

    let pairs: Vec<(usize, usize)> = (0..sorted.len())
        .flat_map(|i| ((i + 1)..sorted.len()).map(move |j| (i, j)))
        .collect();
    let links: Vec<(usize, usize, ResidenceMatch)> = pairs
        .par_iter()
        .filter_map(|&(i, j)| {
            let m = posts_same_residence(&sorted[i].photos, &sorted[j].photos, thresholds);
            m.same.then_some((i, j, m))
        })
        .collect();

    let mut uf = UnionFind::<usize>::new(sorted.len());
    for (i, j, _) in &links {
        uf.union(*i, *j);
    }
    let mut groups: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for (i, post) in sorted.iter().enumerate() {
        groups.entry(uf.find(i)).or_default().push(post.post_id.clone());
    }
    let mut components: Vec<Vec<String>> = groups.into_values().collect();
    components.sort();

    let links = links
        .into_iter()
        .map(|(i, j, m)| PostLink {
            post_a: sorted[i].post_id.clone(),
            post_b: sorted[j].post_id.clone(),
            rule: m.rule.expect("linked posts carry a rule"),
            pairs: m.pairs,
        })
        .collect();
    (components, links)
}

fn build_clusters(
    owner_id: &str,
    components: Vec<Vec<String>>,
    by_id: &BTreeMap<&str, &PostInput>,
    selector: &dyn PrincipalSelector,
) -> Vec<ResidenceCluster> {
    let mut clusters: Vec<ResidenceCluster> = components
        .into_iter()
        .map(|ids| {
            let members: Vec<&PostInput> = ids.iter().map(|id| by_id[id.as_str()]).collect();
            ResidenceCluster {
                cluster_id: ids[0].clone(),
                owner_id: owner_id.to_owned(),
                recent_review_count: members.iter().map(|p| p.recent_review_count).sum(),
                earliest_created: members.iter().map(|p| p.created_date).min().unwrap(),
                post_ids: ids.into_iter().collect(),
                presumed_principal: false,
                shared_with: Vec::new(),
            }
        })
        .collect();
    clusters.sort_by(|a, b| a.cluster_id.cmp(&b.cluster_id));
    if !clusters.is_empty() {
        let facts: Vec<ClusterFacts> = clusters
            .iter()
            .map(|c| ClusterFacts {
                cluster_id: c.cluster_id.clone(),
                post_count: c.post_ids.len(),
                recent_review_count: c.recent_review_count,
                earliest_created: c.earliest_created,
            })
            .collect();
        let principal = selector.select(&facts);
        clusters[principal].presumed_principal = true;
    }
    clusters
}

/// Groups one owner's posts into residences and marks the principal one.
pub fn cluster_residences(
    owner_id: &str,
    posts: &[PostInput],
    thresholds: &SimilarityThresholds,
    selector: &dyn PrincipalSelector,
) -> (Vec<ResidenceCluster>, Vec<PostLink>) {
    let refs: Vec<&PostInput> = posts.iter().collect();
    let (components, links) = partition_posts(&refs, thresholds);
    let by_id: BTreeMap<&str, &PostInput> = posts.iter().map(|p| (p.post_id.as_str(), p)).collect();
    (build_clusters(owner_id, components, &by_id, selector), links)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClusterOutcome {
    /// Sorted by (owner_id, cluster_id).
    pub clusters: Vec<ResidenceCluster>,
    /// Sorted by (post_a, post_b).
    pub links: Vec<PostLink>,
}

/// Clusters every owner's posts.
///
/// With `global_dedup` posts are compared across owners as well; each owner
/// still gets a partition of their own posts, and clusters that touch other
/// owners list them in `shared_with`.
pub fn cluster_all(
    posts: &[PostInput],
    thresholds: &SimilarityThresholds,
    selector: &dyn PrincipalSelector,
    global_dedup: bool,
) -> ClusterOutcome {
    let mut by_owner: BTreeMap<&str, Vec<&PostInput>> = BTreeMap::new();
    for p in posts {
        by_owner.entry(p.owner_id.as_str()).or_default().push(p);
    }
    let by_id: BTreeMap<&str, &PostInput> = posts.iter().map(|p| (p.post_id.as_str(), p)).collect();

    let mut outcome = if global_dedup {
        let all: Vec<&PostInput> = posts.iter().collect();
        let (components, links) = partition_posts(&all, thresholds);
        let mut clusters = Vec::new();
        for (owner, owned) in &by_owner {
            let mine: BTreeSet<&str> = owned.iter().map(|p| p.post_id.as_str()).collect();
            let mut parts = Vec::new();
            let mut sharers: BTreeMap<String, Vec<String>> = BTreeMap::new();
            for comp in &components {
                let part: Vec<String> = comp.iter().filter(|id| mine.contains(id.as_str())).cloned().collect();
                if part.is_empty() {
                    continue;
                }
                let others: BTreeSet<String> = comp
                    .iter()
                    .map(|id| by_id[id.as_str()].owner_id.clone())
                    .filter(|o| o != owner)
                    .collect();
                sharers.insert(part[0].clone(), others.into_iter().collect());
                parts.push(part);
            }
            let mut owner_clusters = build_clusters(owner, parts, &by_id, selector);
            for c in &mut owner_clusters {
                c.shared_with = sharers.remove(&c.cluster_id).unwrap_or_default();
            }
            clusters.extend(owner_clusters);
        }
        ClusterOutcome { clusters, links }
    } else {
        let results: Vec<(Vec<ResidenceCluster>, Vec<PostLink>)> = by_owner
            .par_iter()
            .map(|(owner, owned)| {
                let (components, links) = partition_posts(owned, thresholds);
                (build_clusters(owner, components, &by_id, selector), links)
            })
            .collect();
        let mut outcome = ClusterOutcome::default();
        for (clusters, links) in results {
            outcome.clusters.extend(clusters);
            outcome.links.extend(links);
        }
        outcome
    };
    outcome
        .clusters
        .sort_by(|a, b| a.owner_id.cmp(&b.owner_id).then(a.cluster_id.cmp(&b.cluster_id)));
    outcome
        .links
        .sort_by(|a, b| a.post_a.cmp(&b.post_a).then(a.post_b.cmp(&b.post_b)));
    outcome
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn photo(id: &str, post: &str, v: Vec<f64>) -> PhotoRecord {
        PhotoRecord {
            photo_id: id.into(),
            post_id: post.into(),
            scene_label: SceneLabel::Indoor,
            embedding: Some(v),
        }
    }

    /// Unit vector in the (e0, e_k) plane with cosine `c` to e0.
    fn at_cos(c: f64, k: usize, dim: usize) -> Vec<f64> {
        let mut v = vec![0.0; dim];
        v[0] = c;
        v[k] = (1.0 - c * c).sqrt();
        v
    }

    fn basis(k: usize, dim: usize) -> Vec<f64> {
        let mut v = vec![0.0; dim];
        v[k] = 1.0;
        v
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let s = cosine_similarity(&[1.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!((s - 0.70711).abs() < 1e-5);
        assert_eq!(
            cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]),
            Err(SimilarityError::DegenerateVector)
        );
        assert!(matches!(
            cosine_similarity(&[1.0], &[1.0, 0.0]),
            Err(SimilarityError::DimensionMismatch(1, 2))
        ));
    }

    #[test]
    fn indoor_filter_policy() {
        let mut ps = vec![
            photo("a", "p", vec![1.0]),
            photo("b", "p", vec![1.0]),
            photo("c", "p", vec![1.0]),
        ];
        ps[1].scene_label = SceneLabel::Outdoor;
        let sel = filter_indoor(&ps);
        assert_eq!(sel.photos.iter().map(|p| p.photo_id.as_str()).collect::<Vec<_>>(), ["a", "c"]);
        assert_eq!(sel.outdoor_dropped, 1);

        for p in &mut ps {
            p.scene_label = SceneLabel::Outdoor;
        }
        assert!(filter_indoor(&ps).photos.is_empty());

        let mixed = vec![photo("a", "p", vec![1.0]), {
            let mut u = photo("u", "p", vec![1.0]);
            u.scene_label = SceneLabel::Unknown;
            u
        }];
        let sel = filter_indoor(&mixed);
        assert_eq!(sel.photos.len(), 2);
        assert_eq!(sel.unknown_kept, 1);
    }

    /// Posts A={p1,p2}, B={q1,q2}: sim(p1,q1)=c1, sim(p2,q2)=c2, the
    /// cross pairs are orthogonal. Dimension 6 keeps the noise axes apart.
    fn two_pair_fixture(c1: f64, c2: f64) -> (Vec<PhotoRecord>, Vec<PhotoRecord>) {
        let dim = 6;
        let a = vec![photo("p1", "A", basis(0, dim)), photo("p2", "A", basis(1, dim))];
        let mut q1 = vec![0.0; dim];
        q1[0] = c1;
        q1[2] = (1.0 - c1 * c1).sqrt();
        let mut q2 = vec![0.0; dim];
        q2[1] = c2;
        q2[3] = (1.0 - c2 * c2).sqrt();
        let b = vec![photo("q1", "B", q1), photo("q2", "B", q2)];
        (a, b)
    }

    #[test]
    fn two_high_pairs_link_posts() {
        let (a, b) = two_pair_fixture(0.97, 0.96);
        let m = posts_same_residence(&a, &b, &SimilarityThresholds::default());
        assert!(m.same);
        assert_eq!(m.rule, Some(MatchRule::MultiPhoto));
        assert_eq!(m.pairs.len(), 2);
        assert_eq!((m.pairs[0].photo_a.as_str(), m.pairs[0].photo_b.as_str()), ("p1", "q1"));
        assert!((m.pairs[0].similarity - 0.97).abs() < 1e-12);
    }

    #[test]
    fn single_high_pair_is_not_enough() {
        let (a, b) = two_pair_fixture(0.97, 0.5);
        let m = posts_same_residence(&a, &b, &SimilarityThresholds::default());
        assert!(!m.same);
    }

    #[test]
    fn single_identical_pair_links_posts() {
        let (a, b) = two_pair_fixture(1.0, 0.5);
        let m = posts_same_residence(&a, &b, &SimilarityThresholds::default());
        assert!(m.same);
        assert_eq!(m.rule, Some(MatchRule::IdenticalPhoto));
        assert_eq!(m.pairs.len(), 1);
    }

    #[test]
    fn one_generic_photo_cannot_match_twice() {
        // both A photos resemble the single B photo
        let dim = 4;
        let a = vec![photo("p1", "A", at_cos(0.97, 1, dim)), photo("p2", "A", at_cos(0.97, 2, dim))];
        let b = vec![photo("q1", "B", basis(0, dim)), photo("q2", "B", basis(3, dim))];
        let m = posts_same_residence(&a, &b, &SimilarityThresholds::default());
        assert!(!m.same);
    }

    #[test]
    fn empty_side_is_insufficient() {
        let (a, _) = two_pair_fixture(0.97, 0.96);
        let m = posts_same_residence(&a, &[], &SimilarityThresholds::default());
        assert!(!m.same);
        assert_eq!(m.note.as_deref(), Some("insufficient photos"));
    }

    #[test]
    fn thresholds_validate() {
        assert!(SimilarityThresholds::default().validate().is_ok());
        let bad = SimilarityThresholds { pair_high: 0.999, pair_exact: 0.95, min_high_pairs: 2 };
        assert!(bad.validate().is_err());
        let bad = SimilarityThresholds { min_high_pairs: 0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    fn post(id: &str, center: usize, dim: usize, reviews: usize, day: u32) -> PostInput {
        // two photos, each at cosine 0.98 to the residence centre axis
        let photos = (0..2)
            .map(|k| {
                let mut v = vec![0.0; dim];
                v[center] = 0.99;
                v[dim - 1 - k] = (1.0 - 0.99f64 * 0.99).sqrt();
                photo(&format!("{id}-{k}"), id, v)
            })
            .collect();
        PostInput {
            post_id: id.into(),
            owner_id: "o".into(),
            photos,
            recent_review_count: reviews,
            created_date: NaiveDate::from_ymd_opt(2020, 1, day).unwrap(),
        }
    }

    fn partition_of(clusters: &[ResidenceCluster]) -> Vec<Vec<String>> {
        let mut p: Vec<Vec<String>> = clusters.iter().map(|c| c.post_ids.iter().cloned().collect()).collect();
        p.sort();
        p
    }

    #[test]
    fn chain_links_are_transitive() {
        // A-B share photos, B-C share different photos, A-C share nothing
        let dim = 8;
        let mk = |id: &str, axes: [usize; 2]| PostInput {
            post_id: id.into(),
            owner_id: "o".into(),
            photos: axes.iter().enumerate().map(|(k, &a)| photo(&format!("{id}{k}"), id, basis(a, dim))).collect(),
            recent_review_count: 0,
            created_date: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
        };
        let posts = vec![mk("A", [0, 1]), mk("B", [0, 1]), mk("C", [0, 1])];
        let (clusters, _) = cluster_residences("o", &posts, &Default::default(), &MostRecentReviews);
        assert_eq!(clusters.len(), 1);

        let posts = vec![
            mk("A", [0, 1]),
            PostInput {
                photos: vec![
                    photo("B0", "B", basis(0, dim)),
                    photo("B1", "B", basis(1, dim)),
                    photo("B2", "B", basis(2, dim)),
                    photo("B3", "B", basis(3, dim)),
                ],
                ..mk("B", [0, 1])
            },
            mk("C", [2, 3]),
        ];
        let (clusters, links) = cluster_residences("o", &posts, &Default::default(), &MostRecentReviews);
        assert_eq!(partition_of(&clusters), vec![vec!["A", "B", "C"]]);
        assert_eq!(links.len(), 2);
        assert_eq!(clusters[0].cluster_id, "A");
    }

    #[test]
    fn unrelated_posts_stay_apart() {
        let dim = 8;
        let posts = vec![post("A", 0, dim, 1, 1), post("B", 1, dim, 5, 2)];
        let (clusters, _) = cluster_residences("o", &posts, &Default::default(), &MostRecentReviews);
        assert_eq!(partition_of(&clusters), vec![vec!["A"], vec!["B"]]);
        let principal: Vec<_> = clusters.iter().filter(|c| c.presumed_principal).collect();
        assert_eq!(principal.len(), 1);
        assert_eq!(principal[0].cluster_id, "B");
    }

    #[test]
    fn two_centres_give_two_pairs() {
        let dim = 8;
        let posts = vec![post("A", 0, dim, 3, 4), post("B", 0, dim, 0, 9), post("C", 1, dim, 1, 1), post("D", 1, dim, 2, 2)];
        let (clusters, _) = cluster_residences("o", &posts, &Default::default(), &MostRecentReviews);
        assert_eq!(partition_of(&clusters), vec![vec!["A", "B"], vec!["C", "D"]]);
        // tie on 3 reviews: C/D created earlier
        let principal = clusters.iter().find(|c| c.presumed_principal).unwrap();
        assert_eq!(principal.cluster_id, "C");
        let (clusters, _) = cluster_residences("o", &posts, &Default::default(), &EarliestListed);
        assert_eq!(clusters.iter().find(|c| c.presumed_principal).unwrap().cluster_id, "C");
    }

    #[test]
    fn selectors_are_registered() {
        let reg = principal_selectors();
        for name in ["most_recent_reviews", "earliest_listed", "largest_cluster"] {
            assert_eq!(reg.get(name).unwrap().name(), name);
        }
        assert!(reg.get("coin_flip").is_err());
    }

    #[test]
    fn global_mode_links_across_owners() {
        let dim = 8;
        let mut a = post("A", 0, dim, 1, 1);
        a.owner_id = "o1".into();
        let mut b = post("B", 0, dim, 1, 1);
        b.owner_id = "o2".into();
        let posts = vec![a, b];
        let th = SimilarityThresholds::default();
        let local = cluster_all(&posts, &th, &MostRecentReviews, false);
        assert!(local.links.is_empty());
        assert!(local.clusters.iter().all(|c| c.shared_with.is_empty()));
        let global = cluster_all(&posts, &th, &MostRecentReviews, true);
        assert_eq!(global.links.len(), 1);
        assert_eq!(global.clusters.len(), 2);
        assert_eq!(global.clusters[0].shared_with, vec!["o2".to_string()]);
        assert!(global.clusters.iter().all(|c| c.presumed_principal));
    }

    fn arb_vec(dim: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-1.0f64..1.0, dim).prop_filter("non-zero", |v| v.iter().any(|x| x.abs() > 1e-3))
    }

    proptest! {
        #[test]
        fn same_residence_is_symmetric(
            a in proptest::collection::vec(arb_vec(3), 1..4),
            b in proptest::collection::vec(arb_vec(3), 1..4),
            high in 0.5f64..0.95,
        ) {
            let pa: Vec<_> = a.into_iter().enumerate().map(|(i, v)| photo(&format!("a{i}"), "A", v)).collect();
            let pb: Vec<_> = b.into_iter().enumerate().map(|(i, v)| photo(&format!("b{i}"), "B", v)).collect();
            let th = SimilarityThresholds { pair_high: high, ..Default::default() };
            prop_assert_eq!(
                posts_same_residence(&pa, &pb, &th).same,
                posts_same_residence(&pb, &pa, &th).same
            );
        }

        #[test]
        fn clustering_is_a_partition_and_order_free(
            vecs in proptest::collection::vec(proptest::collection::vec(arb_vec(3), 2..3), 1..7),
            scale in 0.01f64..100.0,
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let th = SimilarityThresholds { pair_high: 0.8, ..Default::default() };
            let posts: Vec<PostInput> = vecs.iter().enumerate().map(|(i, vs)| PostInput {
                post_id: format!("p{i}"),
                owner_id: "o".into(),
                photos: vs.iter().enumerate().map(|(k, v)| photo(&format!("p{i}-{k}"), "x", v.clone())).collect(),
                recent_review_count: i,
                created_date: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
            }).collect();
            let (base, _) = cluster_residences("o", &posts, &th, &MostRecentReviews);

            let covered: BTreeSet<String> = base.iter().flat_map(|c| c.post_ids.iter().cloned()).collect();
            let total: usize = base.iter().map(|c| c.post_ids.len()).sum();
            prop_assert_eq!(total, posts.len());
            prop_assert_eq!(covered.len(), posts.len());
            prop_assert_eq!(base.iter().filter(|c| c.presumed_principal).count(), 1);

            let mut shuffled = posts.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let (again, _) = cluster_residences("o", &shuffled, &th, &MostRecentReviews);
            prop_assert_eq!(&again, &base);

            let scaled: Vec<PostInput> = posts.iter().map(|p| PostInput {
                photos: p.photos.iter().map(|ph| PhotoRecord {
                    embedding: ph.embedding.as_ref().map(|v| v.iter().map(|x| x * scale).collect()),
                    ..ph.clone()
                }).collect(),
                ..p.clone()
            }).collect();
            let (scaled_clusters, _) = cluster_residences("o", &scaled, &th, &MostRecentReviews);
            prop_assert_eq!(partition_of(&scaled_clusters), partition_of(&base));
        }
    }
}
