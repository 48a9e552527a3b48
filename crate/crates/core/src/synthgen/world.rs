use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDate};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::spec::{SpecError, WorldSpec};
use super::{entity_rng, jitter_coordinate, GROUND_TRUTH_FILE};
use crate::geo::{find_zone, meters_per_degree_lat, meters_per_degree_lon, GeoPoint, GeoPolygon, RentPressureZone};
use crate::ingest::{
    write_embeddings, write_listings, write_owners, write_permits, write_reviews, zones_to_geojson, Listing, Owner,
    PermitApplication, PermitDecision, PhotoRecord, Review, RoomType, SceneLabel,
};
use crate::occupancy::{
    builtin_lexicon, builtin_lexicon_tsv, occupancy_models, sentiment_score, IdentityTranslator, OccupancyEstimate,
    OccupancyModel, SentimentLexicon,
};
use crate::permits::{default_keywords, filter_short_term_permits, match_permits, DEFAULT_RADIUS_M};
use crate::report::{InputPaths, RunConfig};
use crate::residence::{principal_selectors, ClusterFacts};
use crate::rules::{evaluate_listing, ListingEvidence, RuleCode, RulesConfig, Verdict};

/// The verdict the rules give a post on its true facts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthRecord {
    pub post_id: String,
    pub owner_id: String,
    pub residence_id: String,
    #[serde(serialize_with = "crate::fixed::point::serialize")]
    pub true_location: GeoPoint,
    pub zone: Option<String>,
    pub principal: bool,
    /// Granted short-term permits within the radius of the true location.
    pub permit_ids: Vec<String>,
    #[serde(serialize_with = "crate::fixed::serialize")]
    pub true_nights: f64,
    pub verdict: Verdict,
    pub rule_code: RuleCode,
}

/// A generated world: run inputs plus ground truth.
#[derive(Debug, Clone)]
pub struct World {
    pub spec: WorldSpec,
    pub zones: Vec<RentPressureZone>,
    pub owners: Vec<Owner>,
    pub listings: Vec<Listing>,
    pub reviews: Vec<Review>,
    pub photos: Vec<PhotoRecord>,
    pub permits: Vec<PermitApplication>,
    pub truth: Vec<GroundTruthRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum PermitPlan {
    Granted,
    Refused,
    Unrelated,
    Missing,
}

#[derive(Debug, Clone)]
struct ResidencePlan {
    id: String,
    owner_id: String,
    post_ids: Vec<String>,
    inside: bool,
    permit: PermitPlan,
    location: GeoPoint,
    center: Vec<f64>,
}

struct PostGen {
    listing: Listing,
    photos: Vec<PhotoRecord>,
    reviews: Vec<Review>,
    window_reviews: usize,
    sentiment: f64,
    true_nights: f64,
}

#[derive(Debug, Clone, Copy)]
enum Tone {
    Positive,
    Neutral,
    Negative,
}

const POSITIVE_REVIEWS: &[&str] = &[
    "Great location and a lovely host, would definitely stay again.",
    "Spotless apartment with amazing views. Highly recommend!",
    "Beautiful place, very comfortable beds and a friendly welcome.",
    "Excellent stay. The flat was clean, bright and cosy.",
    "Wonderful host, perfect location for exploring the city.",
];

const NEUTRAL_REVIEWS: &[&str] = &[
    "We stayed for three nights during a work trip.",
    "The apartment is on the second floor near the bus stop.",
    "Check-in was at four and checkout at eleven.",
    "Stayed here with family over the weekend.",
];

const NEGATIVE_REVIEWS: &[&str] = &[
    "Dirty bathroom and a noisy street, would not recommend.",
    "The flat was cold and the host was rude.",
    "Terrible experience, broken shower and smelly carpets.",
    "Disappointing stay. Not clean and very uncomfortable.",
];

const TITLES: &[&str] = &[
    "Bright city-centre apartment",
    "Cosy room near the canal",
    "Modern two-bed flat",
    "Quiet townhouse with garden",
    "Studio close to the station",
    "Spacious family home",
];

fn offset(origin: GeoPoint, east_m: f64, north_m: f64) -> GeoPoint {
    GeoPoint {
        lat: origin.lat + north_m / meters_per_degree_lat(),
        lon: origin.lon + east_m / meters_per_degree_lon(origin.lat),
    }
}

fn square(center: GeoPoint, half_side_m: f64) -> GeoPolygon {
    let h = half_side_m;
    GeoPolygon::new(vec![
        offset(center, -h, -h),
        offset(center, h, -h),
        offset(center, h, h),
        offset(center, -h, h),
    ])
    .expect("square has four distinct vertices")
}

fn build_zones(spec: &WorldSpec) -> Vec<RentPressureZone> {
    let z = &spec.zones;
    (0..z.count)
        .map(|i| {
            let x0 = i as f64 * (z.size_m + z.gap_m);
            let ring = vec![
                offset(z.origin, x0, 0.0),
                offset(z.origin, x0 + z.size_m, 0.0),
                offset(z.origin, x0 + z.size_m, z.size_m),
                offset(z.origin, x0, z.size_m),
            ];
            let polygon = GeoPolygon::new(ring).expect("zone square is a valid polygon");
            RentPressureZone::new(format!("Synthetic RPZ {}", i + 1), vec![polygon]).expect("zone has a boundary")
        })
        .collect()
}

/// Lattice points at least `boundary_margin_m` inside some zone.
fn inside_slots(spec: &WorldSpec) -> Vec<GeoPoint> {
    let z = &spec.zones;
    let m = spec.boundary_margin_m;
    let step = spec.residence_spacing_m;
    let mut slots = Vec::new();
    for i in 0..z.count {
        let x0 = i as f64 * (z.size_m + z.gap_m);
        let mut y = m;
        while y <= z.size_m - m {
            let mut x = m;
            while x <= z.size_m - m {
                slots.push(offset(z.origin, x0 + x, y));
                x += step;
            }
            y += step;
        }
    }
    slots
}

/// Lattice points in a band south of the zones.
fn outside_slots(spec: &WorldSpec, needed: usize) -> Vec<GeoPoint> {
    let z = &spec.zones;
    let width = z.count as f64 * (z.size_m + z.gap_m) - z.gap_m;
    let step = spec.residence_spacing_m;
    let per_row = (width / step).floor() as usize + 1;
    let rows = needed.div_ceil(per_row).max(1);
    let mut slots = Vec::with_capacity(rows * per_row);
    for r in 0..rows {
        for c in 0..per_row {
            slots.push(offset(z.origin, c as f64 * step, -z.gap_m - r as f64 * step));
        }
    }
    slots
}

fn random_unit<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-3 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Per-residence embedding directions, pairwise far enough apart that photos
/// of different residences stay below the inter-similarity ceiling.
fn place_centers(spec: &WorldSpec, residences: &mut [ResidencePlan]) -> Result<(), SpecError> {
    const MAX_ATTEMPTS: usize = 20_000;
    let limit = (spec.inter_ceiling.acos() + spec.intra_similarity.acos()).cos();
    let mut placed: Vec<Vec<f64>> = Vec::with_capacity(residences.len());
    for res in residences.iter_mut() {
        let mut rng = entity_rng(spec.seed, &format!("residence/{}/embedding", res.id));
        let center = (0..MAX_ATTEMPTS)
            .map(|_| random_unit(&mut rng, spec.embedding_dim))
            .find(|c| placed.iter().all(|p| dot(c, p) <= limit))
            .ok_or_else(|| {
                SpecError::Unsatisfiable(format!(
                    "could not separate {} residences in {} dimensions; raise embedding_dim",
                    placed.len() + 1,
                    spec.embedding_dim
                ))
            })?;
        placed.push(center.clone());
        res.center = center;
    }
    Ok(())
}

fn round6_vec(v: Vec<f64>) -> Vec<f64> {
    v.into_iter().map(crate::fixed::round6).collect()
}

/// A unit vector at angle `theta` from `center`, in a random direction.
fn photo_vector<R: Rng>(rng: &mut R, center: &[f64], theta: f64) -> Vec<f64> {
    let noise = loop {
        let g = random_unit(rng, center.len());
        let along = dot(&g, center);
        let orth: Vec<f64> = g.iter().zip(center).map(|(x, c)| x - along * c).collect();
        let norm = orth.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-3 {
            break orth.into_iter().map(|x| x / norm).collect::<Vec<f64>>();
        }
    };
    let (s, c) = theta.sin_cos();
    center.iter().zip(&noise).map(|(a, n)| a * c + n * s).collect()
}

fn band(nights: f64, rules: &RulesConfig) -> u8 {
    if nights > rules.breach_nights {
        2
    } else if nights > rules.near_breach_nights {
        1
    } else {
        0
    }
}

struct PostContext<'a> {
    spec: &'a WorldSpec,
    lexicon: &'a SentimentLexicon,
    model: &'a dyn OccupancyModel,
}

impl PostContext<'_> {
    fn review(&self, post_id: &str, label: &str, tone: Tone, days_back: std::ops::Range<i64>) -> Review {
        let review_id = format!("{post_id}-{label}");
        let mut rng = entity_rng(self.spec.seed, &format!("review/{review_id}"));
        let pool = match tone {
            Tone::Positive => POSITIVE_REVIEWS,
            Tone::Neutral => NEUTRAL_REVIEWS,
            Tone::Negative => NEGATIVE_REVIEWS,
        };
        Review {
            review_id,
            post_id: post_id.to_owned(),
            date: self.spec.as_of - Duration::days(rng.gen_range(days_back)),
            text: pool.choose(&mut rng).expect("review pool is not empty").to_string(),
            language: Some("en".into()),
        }
    }

    fn window_reviews(&self, post_id: &str, tone: Tone, n: usize) -> Vec<Review> {
        let window = self.spec.occupancy.window_days as i64;
        (0..n)
            .map(|k| self.review(post_id, &format!("r{k:03}"), tone, 0..window))
            .collect()
    }

    fn score(&self, reviews: &[Review]) -> f64 {
        let refs: Vec<&Review> = reviews.iter().collect();
        sentiment_score(&refs, self.lexicon, &IdentityTranslator).score
    }

    /// Draws a target occupancy and the in-window reviews that reproduce an
    /// estimate in the same verdict band.
    fn occupancy<R: Rng>(
        &self,
        rng: &mut R,
        post_id: &str,
        tone: Tone,
        min_nights: u32,
    ) -> Result<(f64, Vec<Review>, f64), SpecError> {
        let spec = self.spec;
        let cfg = &spec.occupancy;
        let rules = &spec.rules;
        let stay = cfg.avg_nights.max(min_nights as f64);
        for _ in 0..500 {
            let target = rng.gen_range(spec.occupancy_nights.min..spec.occupancy_nights.max);
            if (target - rules.near_breach_nights).abs() < 2.0 || (target - rules.breach_nights).abs() < 2.0 {
                continue;
            }
            let mut reviews = self.window_reviews(post_id, tone, 1);
            let mut n = usize::MAX;
            let mut score = self.score(&reviews);
            for _ in 0..20 {
                let bias = self
                    .model
                    .applied_bias(score, cfg)
                    .map_err(|e| SpecError::Invalid(e.to_string()))?;
                let wanted = (target * (cfg.review_rate + bias) / stay).round().max(0.0) as usize;
                if wanted == n {
                    break;
                }
                n = wanted;
                reviews = self.window_reviews(post_id, tone, n);
                score = self.score(&reviews);
            }
            let estimate = self
                .model
                .estimate(post_id, reviews.len(), score, min_nights, cfg)
                .map_err(|e| SpecError::Invalid(e.to_string()))?;
            let bias = self
                .model
                .applied_bias(score, cfg)
                .map_err(|e| SpecError::Invalid(e.to_string()))?;
            let consistent = (target * (cfg.review_rate + bias) / stay).round() as usize == reviews.len();
            if consistent && band(estimate.capped_nights, rules) == band(target, rules) {
                return Ok((target, reviews, score));
            }
        }
        Err(SpecError::Unsatisfiable(format!(
            "no review count reproduces the occupancy band for {post_id}"
        )))
    }

    fn post(&self, res: &ResidencePlan, post_id: &str) -> Result<PostGen, SpecError> {
        let spec = self.spec;
        let mut rng = entity_rng(spec.seed, &format!("post/{post_id}"));

        let room_type = if rng.gen_bool(spec.private_room_fraction) {
            if rng.gen_bool(0.2) {
                RoomType::SharedRoom
            } else {
                RoomType::PrivateRoom
            }
        } else {
            RoomType::EntireHome
        };
        let min_nights = if rng.gen_bool(spec.long_term_fraction) {
            let lt = spec.rules.long_term_min_nights;
            rng.gen_range(lt..=lt + 16)
        } else {
            spec.min_nights.sample(&mut rng)
        };
        let earliest = NaiveDate::from_ymd_opt(2015, 1, 1).unwrap();
        let span = (spec.as_of - earliest).num_days().max(1);
        let created_date = earliest + Duration::days(rng.gen_range(0..span));
        let title = TITLES.choose(&mut rng).unwrap().to_string();

        let weights = [spec.sentiment.positive, spec.sentiment.neutral, spec.sentiment.negative];
        let total: f64 = weights.iter().sum();
        let mut pick = rng.gen_range(0.0..total);
        let mut tone = Tone::Negative;
        for (w, t) in weights.iter().zip([Tone::Positive, Tone::Neutral, Tone::Negative]) {
            if pick < *w {
                tone = t;
                break;
            }
            pick -= w;
        }

        let mut jitter_rng = entity_rng(spec.seed, &format!("post/{post_id}/jitter"));
        let public_location = jitter_coordinate(res.location, spec.jitter_radius_m, &mut jitter_rng);

        // Slightly inside the intra bound so six-decimal rounding cannot cross it.
        let theta = 0.99 * spec.intra_similarity.acos() / 2.0;
        let indoor = spec.photos_per_post.sample(&mut rng);
        let outdoor = spec.outdoor_photos_per_post.sample(&mut rng);
        let mut photos = Vec::new();
        for k in 0..indoor + outdoor {
            let photo_id = format!("{post_id}-ph{k:02}");
            let mut prng = entity_rng(spec.seed, &format!("photo/{photo_id}"));
            let (label, vector) = if k < indoor {
                let label = if prng.gen_bool(spec.unknown_label_fraction) {
                    SceneLabel::Unknown
                } else {
                    SceneLabel::Indoor
                };
                (label, photo_vector(&mut prng, &res.center, theta))
            } else {
                (SceneLabel::Outdoor, random_unit(&mut prng, spec.embedding_dim))
            };
            photos.push(PhotoRecord {
                photo_id,
                post_id: post_id.to_owned(),
                scene_label: label,
                embedding: Some(round6_vec(vector)),
            });
        }

        let (true_nights, mut reviews, sentiment) = self.occupancy(&mut rng, post_id, tone, min_nights)?;
        let window_reviews = reviews.len();
        let window = spec.occupancy.window_days as i64;
        for k in 0..spec.old_reviews_per_post.sample(&mut rng) {
            reviews.push(self.review(post_id, &format!("o{k:03}"), tone, window + 1..window + 700));
        }

        Ok(PostGen {
            listing: Listing {
                post_id: post_id.to_owned(),
                owner_id: res.owner_id.clone(),
                room_type,
                min_nights,
                public_location,
                photo_ids: photos.iter().map(|p| p.photo_id.clone()).collect(),
                created_date,
                title,
            },
            photos,
            reviews,
            window_reviews,
            sentiment,
            true_nights,
        })
    }
}

fn plan_residences(spec: &WorldSpec) -> Result<(Vec<Owner>, Vec<ResidencePlan>), SpecError> {
    let mut owners = Vec::new();
    let mut residences = Vec::new();
    let mut next_post = 1usize;
    for o in 1..=spec.owners {
        let owner_id = format!("o{o:04}");
        let mut rng = entity_rng(spec.seed, &format!("owner/{owner_id}"));
        let n_res = spec.residences_per_owner.sample(&mut rng);
        let mut listing_count = 0;
        for _ in 0..n_res {
            let id = format!("r{:05}", residences.len() + 1);
            let mut rrng = entity_rng(spec.seed, &format!("residence/{id}"));
            let n_posts = spec.posts_per_residence.sample(&mut rrng);
            let inside = !rrng.gen_bool(spec.outside_zone_fraction);
            let permit = if rrng.gen_bool(spec.permit_coverage) {
                PermitPlan::Granted
            } else if rrng.gen_bool(spec.decoy_permit_fraction) {
                if rrng.gen_bool(0.5) {
                    PermitPlan::Refused
                } else {
                    PermitPlan::Unrelated
                }
            } else {
                PermitPlan::Missing
            };
            let post_ids = (0..n_posts)
                .map(|_| {
                    let id = format!("p{next_post:05}");
                    next_post += 1;
                    id
                })
                .collect();
            listing_count += n_posts;
            residences.push(ResidencePlan {
                id,
                owner_id: owner_id.clone(),
                post_ids,
                inside,
                permit,
                location: GeoPoint { lat: 0.0, lon: 0.0 },
                center: Vec::new(),
            });
        }
        let mut metadata = BTreeMap::new();
        metadata.insert("host_name".to_string(), serde_json::Value::from(format!("Host {o}")));
        owners.push(Owner {
            owner_id,
            listing_count,
            metadata,
        });
    }

    let inside_needed = residences.iter().filter(|r| r.inside).count();
    let mut inside = inside_slots(spec);
    if inside.len() < inside_needed {
        return Err(SpecError::Unsatisfiable(format!(
            "zones hold {} residences at {} m spacing but {inside_needed} are needed",
            inside.len(),
            spec.residence_spacing_m
        )));
    }
    let mut outside = outside_slots(spec, residences.len() - inside_needed);
    inside.shuffle(&mut entity_rng(spec.seed, "layout/inside"));
    outside.shuffle(&mut entity_rng(spec.seed, "layout/outside"));
    let (mut i, mut o) = (inside.into_iter(), outside.into_iter());
    for res in &mut residences {
        res.location = if res.inside { i.next() } else { o.next() }.expect("enough slots were generated");
    }
    place_centers(spec, &mut residences)?;
    Ok((owners, residences))
}

fn permit_application(res: &ResidencePlan, index: usize) -> Option<PermitApplication> {
    let (description, decision) = match res.permit {
        PermitPlan::Granted => (
            "Change of use of dwelling to short-term letting",
            PermitDecision::Granted,
        ),
        PermitPlan::Refused => (
            "Permission for short-term letting of apartment",
            PermitDecision::Refused,
        ),
        PermitPlan::Unrelated => ("Single-storey extension to rear of dwelling", PermitDecision::Granted),
        PermitPlan::Missing => return None,
    };
    Some(PermitApplication {
        app_id: format!("PA{index:05}"),
        boundary: square(res.location, 12.0),
        description: description.into(),
        decision,
    })
}

/// Builds a world from `spec`. Same spec, same world, on any thread count.
pub fn generate_world(spec: &WorldSpec) -> Result<World, SpecError> {
    spec.validate()?;
    let zones = build_zones(spec);
    let (owners, residences) = plan_residences(spec)?;

    let lexicon = builtin_lexicon();
    let model = occupancy_models()
        .get(&spec.occupancy_model)
        .map_err(|e| SpecError::Invalid(e.to_string()))?;
    let ctx = PostContext {
        spec,
        lexicon: &lexicon,
        model: model.as_ref(),
    };

    let jobs: Vec<(usize, &str)> = residences
        .iter()
        .enumerate()
        .flat_map(|(r, res)| res.post_ids.iter().map(move |p| (r, p.as_str())))
        .collect();
    let posts: Vec<PostGen> = jobs
        .par_iter()
        .map(|&(r, post_id)| ctx.post(&residences[r], post_id))
        .collect::<Result<_, _>>()?;
    let by_post: BTreeMap<&str, &PostGen> = posts.iter().map(|p| (p.listing.post_id.as_str(), p)).collect();

    let permits: Vec<PermitApplication> = residences
        .iter()
        .enumerate()
        .filter_map(|(i, res)| permit_application(res, i + 1))
        .collect();
    let short_term = filter_short_term_permits(&permits, &default_keywords());

    let selector = principal_selectors()
        .get(&spec.principal_strategy)
        .map_err(|e| SpecError::Invalid(e.to_string()))?;
    let mut principal_of: BTreeMap<&str, String> = BTreeMap::new();
    let mut by_owner: BTreeMap<&str, Vec<&ResidencePlan>> = BTreeMap::new();
    for res in &residences {
        by_owner.entry(res.owner_id.as_str()).or_default().push(res);
    }
    for (owner, list) in &by_owner {
        let mut facts: Vec<(ClusterFacts, &str)> = list
            .iter()
            .map(|res| {
                let members: Vec<&PostGen> = res.post_ids.iter().map(|p| by_post[p.as_str()]).collect();
                let facts = ClusterFacts {
                    cluster_id: res.post_ids.iter().min().unwrap().clone(),
                    post_count: members.len(),
                    recent_review_count: members.iter().map(|m| m.window_reviews).sum(),
                    earliest_created: members.iter().map(|m| m.listing.created_date).min().unwrap(),
                };
                (facts, res.id.as_str())
            })
            .collect();
        facts.sort_by(|a, b| a.0.cluster_id.cmp(&b.0.cluster_id));
        let plain: Vec<ClusterFacts> = facts.iter().map(|f| f.0.clone()).collect();
        principal_of.insert(owner, facts[selector.select(&plain)].1.to_owned());
    }

    let mut truth = Vec::with_capacity(posts.len());
    for res in &residences {
        let cluster_id = res.post_ids.iter().min().unwrap().clone();
        let principal_res = residences
            .iter()
            .find(|r| r.id == principal_of[res.owner_id.as_str()])
            .unwrap();
        for post_id in &res.post_ids {
            let gen = by_post[post_id.as_str()];
            let true_listing = Listing {
                public_location: res.location,
                ..gen.listing.clone()
            };
            let permit_match = match_permits(&true_listing, &short_term, DEFAULT_RADIUS_M);
            let zone = find_zone(res.location, &zones).map(str::to_owned);
            let ev = ListingEvidence {
                listing: true_listing,
                zone: zone.clone(),
                cluster_id: cluster_id.clone(),
                in_principal_cluster: principal_res.id == res.id,
                principal_cluster_id: principal_res.post_ids.iter().min().unwrap().clone(),
                cluster_post_ids: res.post_ids.clone(),
                cluster_links: Vec::new(),
                permit_match: permit_match.clone(),
                radius_m: DEFAULT_RADIUS_M,
                occupancy: OccupancyEstimate {
                    post_id: post_id.clone(),
                    review_count_window: gen.window_reviews,
                    sentiment_score: gen.sentiment,
                    sentiment_bias: gen.sentiment * spec.occupancy.bias_factor,
                    applied_bias: model
                        .applied_bias(gen.sentiment, &spec.occupancy)
                        .map_err(|e| SpecError::Invalid(e.to_string()))?,
                    raw_nights: gen.true_nights,
                    capped_nights: gen.true_nights.min(spec.occupancy.cap_nights as f64),
                },
            };
            let finding = evaluate_listing(&ev, &spec.rules);
            truth.push(GroundTruthRecord {
                post_id: post_id.clone(),
                owner_id: res.owner_id.clone(),
                residence_id: res.id.clone(),
                true_location: res.location,
                zone,
                principal: principal_res.id == res.id,
                permit_ids: permit_match.permit_ids,
                true_nights: gen.true_nights,
                verdict: finding.verdict,
                rule_code: finding.rule_code,
            });
        }
    }
    truth.sort_by(|a, b| a.post_id.cmp(&b.post_id));

    let mut listings = Vec::with_capacity(posts.len());
    let mut photos = Vec::new();
    let mut reviews = Vec::new();
    for p in posts {
        listings.push(p.listing);
        photos.extend(p.photos);
        reviews.extend(p.reviews);
    }
    listings.sort_by(|a, b| a.post_id.cmp(&b.post_id));
    photos.sort_by(|a, b| a.photo_id.cmp(&b.photo_id));
    reviews.sort_by(|a, b| a.review_id.cmp(&b.review_id));

    Ok(World {
        spec: spec.clone(),
        zones,
        owners,
        listings,
        reviews,
        photos,
        permits,
        truth,
    })
}

impl World {
    /// Run configuration for this world, with paths relative to its directory.
    pub fn run_config(&self) -> RunConfig {
        let spec = &self.spec;
        RunConfig {
            inputs: InputPaths {
                listings: Some("listings.jsonl".into()),
                owners: Some("owners.jsonl".into()),
                reviews: Some("reviews.jsonl".into()),
                zones: Some("zones.geojson".into()),
                permits: Some("permits.jsonl".into()),
                embeddings: Some("embeddings.jsonl".into()),
                lexicon: Some("lexicon.tsv".into()),
            },
            as_of: Some(spec.as_of),
            out: Some("out".into()),
            seed: Some(spec.seed),
            principal_strategy: spec.principal_strategy.clone(),
            occupancy_model: spec.occupancy_model.clone(),
            occupancy: spec.occupancy,
            similarity: spec.similarity,
            rules: spec.rules,
            ..RunConfig::default()
        }
    }

    pub fn ground_truth_jsonl(&self) -> String {
        let mut out = String::new();
        for t in &self.truth {
            out.push_str(&serde_json::to_string(t).expect("truth serializes"));
            out.push('\n');
        }
        out
    }

    /// Writes the input files, `ground_truth.jsonl`, `spec.toml` and
    /// `config.toml` into `dir`. Returns the written paths.
    pub fn write_to(&self, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let mut put = |name: &str, body: Vec<u8>| -> std::io::Result<()> {
            let path = dir.join(name);
            fs::write(&path, body)?;
            written.push(path);
            Ok(())
        };
        let mut buf = Vec::new();
        write_listings(&mut buf, &self.listings)?;
        put("listings.jsonl", std::mem::take(&mut buf))?;
        write_owners(&mut buf, &self.owners)?;
        put("owners.jsonl", std::mem::take(&mut buf))?;
        write_reviews(&mut buf, &self.reviews)?;
        put("reviews.jsonl", std::mem::take(&mut buf))?;
        write_permits(&mut buf, &self.permits)?;
        put("permits.jsonl", std::mem::take(&mut buf))?;
        write_embeddings(&mut buf, &self.photos)?;
        put("embeddings.jsonl", std::mem::take(&mut buf))?;
        let mut zones = serde_json::to_string_pretty(&zones_to_geojson(&self.zones)).expect("geojson serializes");
        zones.push('\n');
        put("zones.geojson", zones.into_bytes())?;
        put("lexicon.tsv", builtin_lexicon_tsv().as_bytes().to_vec())?;
        put(GROUND_TRUTH_FILE, self.ground_truth_jsonl().into_bytes())?;
        put("spec.toml", self.spec.to_toml().into_bytes())?;
        put("config.toml", self.run_config().to_toml().into_bytes())?;
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::haversine_distance;
    use crate::residence::cosine_similarity;
    use crate::synthgen::CountRange;

    fn small() -> WorldSpec {
        WorldSpec {
            owners: 8,
            zones: crate::synthgen::ZoneLayout {
                count: 1,
                ..Default::default()
            },
            embedding_dim: 32,
            ..WorldSpec::default()
        }
    }

    #[test]
    fn single_post_world() {
        let spec = WorldSpec {
            owners: 1,
            residences_per_owner: CountRange::new(1, 1),
            posts_per_residence: CountRange::new(1, 1),
            ..small()
        };
        let world = generate_world(&spec).unwrap();
        assert_eq!(world.listings.len(), 1);
        assert_eq!(world.truth.len(), 1);
        assert!(world.truth[0].principal);
        assert_eq!(world.owners[0].listing_count, 1);
    }

    #[test]
    fn deterministic() {
        let a = generate_world(&small()).unwrap();
        let b = generate_world(&small()).unwrap();
        assert_eq!(a.ground_truth_jsonl(), b.ground_truth_jsonl());
        assert_eq!(a.photos, b.photos);
        assert_eq!(a.reviews, b.reviews);
        let other = generate_world(&WorldSpec { seed: 43, ..small() }).unwrap();
        assert_ne!(a.ground_truth_jsonl(), other.ground_truth_jsonl());
    }

    #[test]
    fn similarity_targets_hold() {
        let spec = small();
        let world = generate_world(&spec).unwrap();
        let residence: BTreeMap<&str, &str> = world
            .truth
            .iter()
            .map(|t| (t.post_id.as_str(), t.residence_id.as_str()))
            .collect();
        let indoor: Vec<&PhotoRecord> = world
            .photos
            .iter()
            .filter(|p| p.scene_label != SceneLabel::Outdoor)
            .collect();
        for (i, a) in indoor.iter().enumerate() {
            for b in &indoor[i + 1..] {
                let s = cosine_similarity(a.embedding.as_ref().unwrap(), b.embedding.as_ref().unwrap()).unwrap();
                if residence[a.post_id.as_str()] == residence[b.post_id.as_str()] {
                    assert!(s >= spec.intra_similarity, "{} {} {s}", a.photo_id, b.photo_id);
                } else {
                    assert!(s <= spec.inter_ceiling, "{} {} {s}", a.photo_id, b.photo_id);
                }
            }
        }
    }

    #[test]
    fn public_points_within_radius_and_zone_stable() {
        let world = generate_world(&small()).unwrap();
        for (l, t) in world.listings.iter().zip(&world.truth) {
            assert_eq!(l.post_id, t.post_id);
            assert!(haversine_distance(l.public_location, t.true_location) <= 150.01);
            assert_eq!(find_zone(l.public_location, &world.zones), t.zone.as_deref());
        }
    }

    #[test]
    fn full_permit_coverage_single_residences_have_no_breaches() {
        let spec = WorldSpec {
            residences_per_owner: CountRange::new(1, 1),
            permit_coverage: 1.0,
            ..small()
        };
        let world = generate_world(&spec).unwrap();
        assert!(world.truth.iter().all(|t| t.verdict != Verdict::PotentialBreach));
    }

    #[test]
    fn crowded_zones_are_rejected() {
        let spec = WorldSpec {
            owners: 50,
            residences_per_owner: CountRange::new(3, 3),
            outside_zone_fraction: 0.0,
            ..small()
        };
        assert!(matches!(generate_world(&spec), Err(SpecError::Unsatisfiable(_))));
    }
}
