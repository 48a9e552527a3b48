use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::{self, File};
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::config::RunConfig;
use super::{
    summary_json, PipelineError, CLUSTERS_FILE, DIAGNOSTICS_FILE, FINDINGS_FILE, SUMMARY_FILE, VIOLATIONS_FILE,
};
use crate::geo::find_zone;
use crate::ingest::{
    parse_embeddings, parse_listings, parse_owners, parse_permits, parse_reviews, parse_zones, validate_corpus,
    Corpus, PhotoRecord, Reject, Review, Severity, ValidationReport, Violation, Warning,
};
use crate::occupancy::{
    builtin_lexicon, occupancy_models, reviews_in_window, sentiment_score, translators, OccupancyEstimate,
    SentimentLexicon, TranslatorOptions,
};
use crate::permits::{filter_short_term_permits, match_permits, PermitMatch};
use crate::residence::{cluster_all, filter_indoor, principal_selectors, PostInput, ResidenceCluster};
use crate::rules::{evaluate_corpus, BreachFinding, ListingEvidence, RunSummary};

/// Known blind spots, echoed into every diagnostics file.
pub const LIMITATIONS: &[&str] = &[
    "student accommodation, corporate rental and rent-a-room exemptions leave no trace in the inputs and are not detected",
    "public coordinates are anonymized up to 150 m from the true location, so one permit can match several nearby listings",
    "occupancy is estimated from review counts, not observed",
    "the principal residence is inferred by a configurable heuristic",
];

/// Parsed inputs plus everything the parsers set aside.
#[derive(Debug, Clone)]
pub struct LoadedCorpus {
    pub corpus: Corpus,
    pub lexicon: SentimentLexicon,
    pub rejects: BTreeMap<String, Vec<Reject>>,
    pub warnings: BTreeMap<String, Vec<Warning>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyChoice {
    pub principal_selector: String,
    pub occupancy_model: String,
    pub translator: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PhotoStats {
    pub total: usize,
    pub outdoor_dropped: usize,
    pub unknown_kept: usize,
    pub without_embedding: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PermitStats {
    pub applications: usize,
    pub short_term: usize,
    pub granted_short_term: usize,
    pub matched_listings: usize,
    pub matched_permits: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ClusterStats {
    pub clusters: usize,
    pub multi_post_clusters: usize,
    pub owners_with_multiple_residences: usize,
    pub cross_owner_clusters: usize,
    pub links: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub artifact_version: String,
    pub config: RunConfig,
    pub strategies: StrategyChoice,
    pub rejects: BTreeMap<String, Vec<Reject>>,
    pub warnings: BTreeMap<String, Vec<Warning>>,
    pub soft_violations: Vec<Violation>,
    pub photos: PhotoStats,
    /// Posts left with no usable indoor photo; they form singleton residences.
    pub posts_without_usable_photos: Vec<String>,
    pub translation_failures: usize,
    pub permits: PermitStats,
    pub clusters: ClusterStats,
    pub limitations: Vec<String>,
}

/// Everything a successful run produces, before it is written out.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub findings: Vec<BreachFinding>,
    pub summary: RunSummary,
    pub clusters: Vec<ResidenceCluster>,
    pub diagnostics: Diagnostics,
}

fn jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("record serializes"));
        out.push('\n');
    }
    out
}

impl RunArtifacts {
    pub fn findings_jsonl(&self) -> String {
        jsonl(&self.findings)
    }

    pub fn summary_json(&self) -> String {
        summary_json(&self.summary)
    }

    pub fn clusters_jsonl(&self) -> String {
        jsonl(&self.clusters)
    }

    pub fn diagnostics_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.diagnostics).expect("diagnostics serialize");
        s.push('\n');
        s
    }

    pub fn write_to(&self, dir: &Path) -> Result<(), PipelineError> {
        fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
        for (name, body) in [
            (FINDINGS_FILE, self.findings_jsonl()),
            (SUMMARY_FILE, self.summary_json()),
            (CLUSTERS_FILE, self.clusters_jsonl()),
            (DIAGNOSTICS_FILE, self.diagnostics_json()),
        ] {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| PipelineError::io(&path, e))?;
        }
        Ok(())
    }
}

fn open(path: &Path) -> Result<BufReader<File>, PipelineError> {
    match File::open(path) {
        Ok(f) => Ok(BufReader::new(f)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(PipelineError::MissingInput(path.to_owned())),
        Err(e) => Err(PipelineError::io(path, e)),
    }
}

fn read_to_string(path: &Path) -> Result<String, PipelineError> {
    let mut text = String::new();
    open(path)?
        .read_to_string(&mut text)
        .map_err(|e| PipelineError::io(path, e))?;
    Ok(text)
}

fn required(p: &Option<PathBuf>, name: &str) -> Result<PathBuf, PipelineError> {
    p.clone()
        .ok_or_else(|| PipelineError::Config(format!("no path given for {name}")))
}

/// Parses every input named by the config. Record-level problems become
/// rejects; duplicate ids and malformed documents are errors.
pub fn load_corpus(cfg: &RunConfig) -> Result<LoadedCorpus, PipelineError> {
    let i = &cfg.inputs;
    let mut rejects = BTreeMap::new();
    let mut warnings = BTreeMap::new();
    let mut keep = |name: &str, r: Vec<Reject>, w: Vec<Warning>| {
        rejects.insert(name.to_string(), r);
        warnings.insert(name.to_string(), w);
    };

    let listings = parse_listings(open(&required(&i.listings, "listings")?)?)?;
    let owners = parse_owners(open(&required(&i.owners, "owners")?)?)?;
    let reviews = parse_reviews(open(&required(&i.reviews, "reviews")?)?)?;
    let permits = parse_permits(open(&required(&i.permits, "permits")?)?)?;
    let photos = parse_embeddings(open(&required(&i.embeddings, "embeddings")?)?)?;
    let zones = parse_zones(&read_to_string(&required(&i.zones, "zones")?)?)?;
    let lexicon = match &i.lexicon {
        Some(path) => SentimentLexicon::parse(&read_to_string(path)?)
            .map_err(|e| PipelineError::Input(format!("{}: {e}", path.display())))?,
        None => builtin_lexicon(),
    };

    keep("listings", listings.rejects, listings.warnings);
    keep("owners", owners.rejects, owners.warnings);
    keep("reviews", reviews.rejects, reviews.warnings);
    keep("permits", permits.rejects, permits.warnings);
    keep("embeddings", photos.rejects, photos.warnings);

    Ok(LoadedCorpus {
        corpus: Corpus {
            listings: listings.records,
            owners: owners.records,
            reviews: reviews.records,
            photos: photos.records,
            permits: permits.records,
            zones,
        },
        lexicon,
        rejects,
        warnings,
    })
}

/// Loads and validates the corpus, then runs every stage in memory.
pub fn execute(cfg: &RunConfig) -> Result<RunArtifacts, PipelineError> {
    cfg.validate()?;
    cfg.check_inputs_exist()?;
    match cfg.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| PipelineError::Runtime(format!("building thread pool: {e}")))?;
            pool.install(|| execute_stages(cfg))
        }
        None => execute_stages(cfg),
    }
}

/// Like [`execute`], and writes the output files into `cfg.out`. A rejected
/// corpus leaves a violations file there instead.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunArtifacts, PipelineError> {
    let out = cfg
        .out
        .clone()
        .ok_or_else(|| PipelineError::Config("no output directory given".into()))?;
    match execute(cfg) {
        Ok(artifacts) => {
            artifacts.write_to(&out)?;
            Ok(artifacts)
        }
        Err(PipelineError::Validation { report, .. }) => {
            let path = write_violations(&out, &report)?;
            Err(PipelineError::Validation {
                report,
                violations_file: Some(path),
            })
        }
        Err(e) => Err(e),
    }
}

pub fn write_violations(dir: &Path, report: &ValidationReport) -> Result<PathBuf, PipelineError> {
    fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
    let path = dir.join(VIOLATIONS_FILE);
    let mut body = serde_json::to_string_pretty(report).expect("report serializes");
    body.push('\n');
    fs::write(&path, body).map_err(|e| PipelineError::io(&path, e))?;
    Ok(path)
}

fn execute_stages(cfg: &RunConfig) -> Result<RunArtifacts, PipelineError> {
    let as_of = cfg.as_of.expect("validated config has as_of");
    let config_err = |e: crate::registry::UnknownStrategy| PipelineError::Config(e.to_string());
    let selector = principal_selectors().get(&cfg.principal_strategy).map_err(config_err)?;
    let model = occupancy_models().get(&cfg.occupancy_model).map_err(config_err)?;
    let translator = translators()
        .get(&cfg.translator)
        .map_err(config_err)?
        .build(&TranslatorOptions {
            cache_path: cfg.translation_cache.clone(),
        })
        .map_err(|e| PipelineError::Config(e.to_string()))?;

    let loaded = load_corpus(cfg)?;
    let report = validate_corpus(&loaded.corpus, Some(as_of));
    if !report.is_accepted() {
        return Err(PipelineError::Validation {
            report,
            violations_file: None,
        });
    }
    let corpus = &loaded.corpus;

    let mut photos_by_post: HashMap<&str, Vec<PhotoRecord>> = HashMap::new();
    for photo in &corpus.photos {
        photos_by_post.entry(photo.post_id.as_str()).or_default().push(photo.clone());
    }
    let mut reviews_by_post: HashMap<&str, Vec<Review>> = HashMap::new();
    for review in &corpus.reviews {
        reviews_by_post.entry(review.post_id.as_str()).or_default().push(review.clone());
    }
    let no_reviews: Vec<Review> = Vec::new();

    let mut photo_stats = PhotoStats {
        total: corpus.photos.len(),
        without_embedding: corpus.photos.iter().filter(|p| p.embedding.is_none()).count(),
        ..PhotoStats::default()
    };

    // Per-listing sentiment and window counts.
    let per_listing: Vec<(usize, crate::occupancy::SentimentScore)> = corpus
        .listings
        .par_iter()
        .map(|l| {
            let reviews = reviews_by_post.get(l.post_id.as_str()).unwrap_or(&no_reviews);
            let window = reviews_in_window(reviews, as_of, cfg.occupancy.window_days);
            let score = sentiment_score(&window, &loaded.lexicon, translator.as_ref());
            (window.len(), score)
        })
        .collect();

    let mut posts = Vec::with_capacity(corpus.listings.len());
    let mut without_usable = Vec::new();
    for (listing, (recent, _)) in corpus.listings.iter().zip(&per_listing) {
        let photos = photos_by_post.get(listing.post_id.as_str()).map(Vec::as_slice).unwrap_or(&[]);
        let selection = filter_indoor(photos);
        photo_stats.outdoor_dropped += selection.outdoor_dropped;
        photo_stats.unknown_kept += selection.unknown_kept;
        if !selection.photos.iter().any(|p| p.embedding.is_some()) {
            without_usable.push(listing.post_id.clone());
        }
        posts.push(PostInput {
            post_id: listing.post_id.clone(),
            owner_id: listing.owner_id.clone(),
            photos: selection.photos,
            recent_review_count: *recent,
            created_date: listing.created_date,
        });
    }
    without_usable.sort();

    let outcome = cluster_all(&posts, &cfg.similarity, selector.as_ref(), cfg.global_dedup);

    let permits = filter_short_term_permits(&corpus.permits, &cfg.permit_keywords);
    let matches: Vec<PermitMatch> = corpus
        .listings
        .par_iter()
        .map(|l| match_permits(l, &permits, cfg.radius_m))
        .collect();

    let estimates: Vec<OccupancyEstimate> = corpus
        .listings
        .par_iter()
        .zip(per_listing.par_iter())
        .map(|(l, (count, score))| {
            model
                .estimate(&l.post_id, *count, score.score, l.min_nights, &cfg.occupancy)
                .map_err(|e| PipelineError::Runtime(format!("occupancy for {}: {e}", l.post_id)))
        })
        .collect::<Result<_, _>>()?;

    let cluster_of: HashMap<&str, &ResidenceCluster> = outcome
        .clusters
        .iter()
        .flat_map(|c| c.post_ids.iter().map(move |p| (p.as_str(), c)))
        .collect();
    let principal_of: HashMap<&str, &str> = outcome
        .clusters
        .iter()
        .filter(|c| c.presumed_principal)
        .map(|c| (c.owner_id.as_str(), c.cluster_id.as_str()))
        .collect();

    let evidence: Vec<ListingEvidence> = corpus
        .listings
        .iter()
        .zip(matches)
        .zip(estimates)
        .map(|((listing, permit_match), occupancy)| {
            let cluster = cluster_of[listing.post_id.as_str()];
            let links = outcome
                .links
                .iter()
                .filter(|k| cluster.post_ids.contains(&k.post_a) || cluster.post_ids.contains(&k.post_b))
                .cloned()
                .collect();
            ListingEvidence {
                listing: listing.clone(),
                zone: find_zone(listing.public_location, &corpus.zones).map(str::to_owned),
                cluster_id: cluster.cluster_id.clone(),
                in_principal_cluster: cluster.presumed_principal,
                principal_cluster_id: principal_of[listing.owner_id.as_str()].to_owned(),
                cluster_post_ids: cluster.post_ids.iter().cloned().collect(),
                cluster_links: links,
                permit_match,
                radius_m: cfg.radius_m,
                occupancy,
            }
        })
        .collect();

    let (findings, summary) = evaluate_corpus(&evidence, &cfg.rules);

    let residences_per_owner = outcome.clusters.iter().fold(BTreeMap::<&str, usize>::new(), |mut m, c| {
        *m.entry(c.owner_id.as_str()).or_default() += 1;
        m
    });
    let matched_permits: BTreeSet<&str> = findings
        .iter()
        .flat_map(|f| f.evidence.permit.permit_ids.iter().map(String::as_str))
        .collect();

    let diagnostics = Diagnostics {
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        strategies: StrategyChoice {
            principal_selector: selector.name().to_string(),
            occupancy_model: model.name().to_string(),
            translator: translator.name().to_string(),
        },
        rejects: loaded.rejects.clone(),
        warnings: loaded.warnings.clone(),
        soft_violations: report
            .violations
            .into_iter()
            .filter(|v| v.severity == Severity::Soft)
            .collect(),
        photos: photo_stats,
        posts_without_usable_photos: without_usable,
        translation_failures: per_listing.iter().map(|(_, s)| s.translation_failures).sum(),
        permits: PermitStats {
            applications: corpus.permits.len(),
            short_term: permits.len(),
            granted_short_term: permits.iter().filter(|p| p.granted).count(),
            matched_listings: findings.iter().filter(|f| !f.evidence.permit.permit_ids.is_empty()).count(),
            matched_permits: matched_permits.len(),
        },
        clusters: ClusterStats {
            clusters: outcome.clusters.len(),
            multi_post_clusters: outcome.clusters.iter().filter(|c| c.post_ids.len() > 1).count(),
            owners_with_multiple_residences: residences_per_owner.values().filter(|&&n| n > 1).count(),
            cross_owner_clusters: outcome.clusters.iter().filter(|c| !c.shared_with.is_empty()).count(),
            links: outcome.links.len(),
        },
        limitations: LIMITATIONS.iter().map(|s| s.to_string()).collect(),
    };

    Ok(RunArtifacts {
        findings,
        summary,
        clusters: outcome.clusters,
        diagnostics,
    })
}
