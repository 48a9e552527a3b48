use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::occupancy::{occupancy_models, translators, OccupancyConfig, DEFAULT_OCCUPANCY_MODEL, DEFAULT_TRANSLATOR};
use crate::permits::{default_keywords, DEFAULT_RADIUS_M};
use crate::residence::{principal_selectors, SimilarityThresholds, DEFAULT_PRINCIPAL_SELECTOR};
use crate::rules::RulesConfig;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputPaths {
    pub listings: Option<PathBuf>,
    pub owners: Option<PathBuf>,
    pub reviews: Option<PathBuf>,
    pub zones: Option<PathBuf>,
    pub permits: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    /// Falls back to the bundled starter lexicon.
    pub lexicon: Option<PathBuf>,
}

/// Everything a run needs. Loaded from a TOML file and/or CLI flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub inputs: InputPaths,
    pub as_of: Option<NaiveDate>,
    pub out: Option<PathBuf>,
    pub radius_m: f64,
    pub permit_keywords: Vec<String>,
    pub principal_strategy: String,
    pub occupancy_model: String,
    pub translator: String,
    pub translation_cache: Option<PathBuf>,
    pub global_dedup: bool,
    /// Worker threads; the global pool when unset.
    pub threads: Option<usize>,
    /// Only used by the synthetic-world subcommands.
    pub seed: Option<u64>,
    pub occupancy: OccupancyConfig,
    pub similarity: SimilarityThresholds,
    pub rules: RulesConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            inputs: InputPaths::default(),
            as_of: None,
            out: None,
            radius_m: DEFAULT_RADIUS_M,
            permit_keywords: default_keywords(),
            principal_strategy: DEFAULT_PRINCIPAL_SELECTOR.into(),
            occupancy_model: DEFAULT_OCCUPANCY_MODEL.into(),
            translator: DEFAULT_TRANSLATOR.into(),
            translation_cache: None,
            global_dedup: false,
            threads: None,
            seed: None,
            occupancy: OccupancyConfig::default(),
            similarity: SimilarityThresholds::default(),
            rules: RulesConfig::default(),
        }
    }
}

fn resolve(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

impl RunConfig {
    /// Reads a TOML config. Relative paths are taken relative to the file.
    pub fn from_file(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                PipelineError::MissingInput(path.to_owned())
            } else {
                PipelineError::Config(format!("reading {}: {e}", path.display()))
            }
        })?;
        let mut cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let i = &mut self.inputs;
        for p in [
            &mut i.listings,
            &mut i.owners,
            &mut i.reviews,
            &mut i.zones,
            &mut i.permits,
            &mut i.embeddings,
            &mut i.lexicon,
        ] {
            resolve(base, p);
        }
        resolve(base, &mut self.out);
        resolve(base, &mut self.translation_cache);
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("run config serializes to TOML")
    }

    /// Checks everything except input file existence.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let config = |m: String| Err(PipelineError::Config(m));
        if self.as_of.is_none() {
            return config("as_of date is required".into());
        }
        if !(self.radius_m > 0.0 && self.radius_m.is_finite()) {
            return config(format!("radius_m must be positive, got {}", self.radius_m));
        }
        if self.permit_keywords.iter().all(|k| k.trim().is_empty()) {
            return config("permit_keywords must contain at least one keyword".into());
        }
        if self.threads == Some(0) {
            return config("threads must be at least 1".into());
        }
        self.occupancy.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        self.similarity.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        self.rules.validate().map_err(PipelineError::Config)?;
        for (registered, name) in [
            (principal_selectors().contains(&self.principal_strategy), &self.principal_strategy),
            (occupancy_models().contains(&self.occupancy_model), &self.occupancy_model),
            (translators().contains(&self.translator), &self.translator),
        ] {
            if !registered {
                return config(format!("unknown strategy {name:?}"));
            }
        }
        let i = &self.inputs;
        for (name, p) in [
            ("listings", &i.listings),
            ("owners", &i.owners),
            ("reviews", &i.reviews),
            ("zones", &i.zones),
            ("permits", &i.permits),
            ("embeddings", &i.embeddings),
        ] {
            if p.is_none() {
                return config(format!("no path given for {name}"));
            }
        }
        Ok(())
    }

    /// Fails with the first configured input that does not exist.
    pub fn check_inputs_exist(&self) -> Result<(), PipelineError> {
        let i = &self.inputs;
        for p in [
            &i.listings,
            &i.owners,
            &i.reviews,
            &i.zones,
            &i.permits,
            &i.embeddings,
            &i.lexicon,
        ]
        .into_iter()
        .flatten()
        {
            if !p.exists() {
                return Err(PipelineError::MissingInput(p.clone()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_and_relative_paths() {
        let text = r#"
            as_of = "2024-06-30"
            out = "out"
            global_dedup = true

            [inputs]
            listings = "listings.jsonl"
            lexicon = "/abs/lexicon.tsv"

            [occupancy]
            invert_bias = true
        "#;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, text).unwrap();
        let cfg = RunConfig::from_file(&path).unwrap();
        assert_eq!(cfg.inputs.listings, Some(dir.path().join("listings.jsonl")));
        assert_eq!(cfg.inputs.lexicon, Some(PathBuf::from("/abs/lexicon.tsv")));
        assert!(cfg.global_dedup);
        assert!(cfg.occupancy.invert_bias);
        assert_eq!(cfg.occupancy.review_rate, 0.5);
        let back: RunConfig = toml::from_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn validation_errors() {
        let mut cfg = RunConfig::default();
        assert!(matches!(cfg.validate(), Err(PipelineError::Config(_))));
        cfg.as_of = NaiveDate::from_ymd_opt(2024, 1, 1);
        for name in ["listings", "owners", "reviews", "zones", "permits", "embeddings"] {
            let p = Some(PathBuf::from(format!("{name}.jsonl")));
            match name {
                "listings" => cfg.inputs.listings = p,
                "owners" => cfg.inputs.owners = p,
                "reviews" => cfg.inputs.reviews = p,
                "zones" => cfg.inputs.zones = p,
                "permits" => cfg.inputs.permits = p,
                _ => cfg.inputs.embeddings = p,
            }
        }
        assert!(cfg.validate().is_ok());
        assert!(matches!(cfg.check_inputs_exist(), Err(PipelineError::MissingInput(_))));

        let bad = RunConfig { principal_strategy: "tallest".into(), ..cfg.clone() };
        assert!(bad.validate().unwrap_err().to_string().contains("tallest"));
        let bad = RunConfig { radius_m: 0.0, ..cfg.clone() };
        assert!(bad.validate().is_err());
        assert!(toml::from_str::<RunConfig>("colour = 1").is_err());
    }
}
