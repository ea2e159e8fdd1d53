//! Pipeline configuration: a single JSON document, with CLI flags able to
//! override individual values.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cluster::{NormalizationMode, DEFAULT_ALPHA_M, DEFAULT_MIN_POINTS};
use crate::error::{Error, Result};
use crate::extract::ExtractorConfig;

/// One labeled input file (an annotation span file or a gazetteer). The
/// label names the source in outputs, e.g. `matches_<source>.csv`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedInput {
    pub path: PathBuf,
    pub source: String,
}

/// Everything [`crate::pipeline::run_pipeline`] needs, deserialized from
/// JSON. Unknown keys are rejected so typos fail loudly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    /// Name of the region the ads come from; recorded in diagnostics.
    pub region_id: String,
    /// Ads CSV to ingest.
    pub ads: Option<PathBuf>,
    /// External annotation span files (JSONL), pooled with the built-in
    /// extractors.
    pub annotations: Vec<NamedInput>,
    /// Annotator ground-truth JSONL; enables curve + threshold selection.
    pub ground_truth: Option<PathBuf>,
    /// Gazetteer CSVs to compare the selected names against.
    pub gazetteers: Vec<NamedInput>,
    /// Optional newline-separated list of terms to drop from the final
    /// selection (manually excluded non-places).
    pub exclusions: Option<PathBuf>,
    /// Base of the distance-threshold ladder, meters; must exceed 1.
    pub alpha_m: f64,
    /// Entropy-sum count discount.
    pub mode: NormalizationMode,
    /// Minimum spatially-filtered points for a term to be rankable.
    pub min_points: usize,
    /// Score cutoff for the final name list; when absent it is selected
    /// from the precision-recall curve, which requires ground truth.
    pub threshold: Option<f64>,
    /// Run the capitalized-run extractor.
    pub capitalized_extractor: bool,
    /// Run the location-cue extractor.
    pub cue_extractor: bool,
    /// Replaces the built-in cue phrase list when present.
    pub cues: Option<Vec<String>>,
    /// Replaces the built-in stopword list when present.
    pub stopwords: Option<Vec<String>>,
    /// Accept only these labels from external annotation files.
    pub label_allowlist: Option<Vec<String>>,
    /// Directory all artifacts are written into.
    pub out_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            region_id: "region".to_string(),
            ads: None,
            annotations: Vec::new(),
            ground_truth: None,
            gazetteers: Vec::new(),
            exclusions: None,
            alpha_m: DEFAULT_ALPHA_M,
            mode: NormalizationMode::InvSqrt,
            min_points: DEFAULT_MIN_POINTS,
            threshold: None,
            capitalized_extractor: true,
            cue_extractor: true,
            cues: None,
            stopwords: None,
            label_allowlist: None,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl PipelineConfig {
    /// Checks every invariant a full pipeline run depends on.
    pub fn validate(&self) -> Result<()> {
        if self.region_id.is_empty() {
            return Err(Error::Config("region_id must not be empty".to_string()));
        }
        if self.ads.is_none() {
            return Err(Error::Config("no ads file configured".to_string()));
        }
        if !self.alpha_m.is_finite() || self.alpha_m <= 1.0 {
            return Err(Error::Config(format!(
                "alpha_m must be finite and > 1, got {}",
                self.alpha_m
            )));
        }
        if self.min_points < 2 {
            return Err(Error::Config(format!(
                "min_points must be at least 2, got {}",
                self.min_points
            )));
        }
        if let Some(t) = self.threshold {
            if !t.is_finite() || !(0.0..=1.0).contains(&t) {
                return Err(Error::Config(format!(
                    "threshold must be in [0, 1], got {t}"
                )));
            }
        }
        if self.ground_truth.is_none() && self.threshold.is_none() {
            return Err(Error::Config(
                "no ground truth and no explicit threshold: \
                 the final name list would have no cutoff"
                    .to_string(),
            ));
        }
        if !self.capitalized_extractor && !self.cue_extractor && self.annotations.is_empty() {
            return Err(Error::Config(
                "both built-in extractors are disabled and no annotation \
                 files are configured; nothing would be extracted"
                    .to_string(),
            ));
        }
        let mut labels: BTreeSet<&str> = BTreeSet::new();
        for input in self.annotations.iter().chain(&self.gazetteers) {
            if input.source.is_empty() {
                return Err(Error::Config(format!(
                    "input `{}` has an empty source label",
                    input.path.display()
                )));
            }
            // Labels end up in output filenames (`matches_<source>.csv`).
            if !input
                .source
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
            {
                return Err(Error::Config(format!(
                    "source label `{}` may only use letters, digits, `_`, and `-`",
                    input.source
                )));
            }
        }
        for g in &self.gazetteers {
            if !labels.insert(&g.source) {
                return Err(Error::Config(format!(
                    "gazetteer source label `{}` is used twice; \
                     match reports would overwrite each other",
                    g.source
                )));
            }
        }
        Ok(())
    }

    /// Materializes the extractor word lists, applying any overrides.
    pub fn extractor_config(&self) -> ExtractorConfig {
        let mut cfg = ExtractorConfig::default();
        if let Some(stopwords) = &self.stopwords {
            cfg.stopwords = stopwords.iter().map(|s| s.to_lowercase()).collect();
        }
        if let Some(cues) = &self.cues {
            cfg.cues = cues.iter().map(|s| s.to_lowercase()).collect();
        }
        if let Some(labels) = &self.label_allowlist {
            cfg.label_allowlist = Some(labels.iter().cloned().collect());
        }
        cfg
    }
}

/// Loads a JSON config file. Unknown keys are rejected here; semantic
/// checks are deferred to [`PipelineConfig::validate`] so that values a
/// caller will still override (CLI flags win over file values) don't have
/// to be present in the file.
pub fn load_config(path: &Path) -> Result<PipelineConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("config `{}` is invalid: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn valid() -> PipelineConfig {
        PipelineConfig {
            ads: Some(PathBuf::from("ads.csv")),
            ground_truth: Some(PathBuf::from("truth.jsonl")),
            ..PipelineConfig::default()
        }
    }

    #[test]
    fn default_config_with_inputs_validates() {
        assert!(valid().validate().is_ok());
    }

    #[test]
    fn numeric_invariants_are_enforced() {
        let mut c = valid();
        c.alpha_m = 1.0;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = valid();
        c.min_points = 1;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = valid();
        c.threshold = Some(1.5);
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn cutoff_must_come_from_somewhere() {
        let mut c = valid();
        c.ground_truth = None;
        c.threshold = None;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        c.threshold = Some(0.4);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn span_sources_must_exist_and_labels_must_be_unique() {
        let mut c = valid();
        c.capitalized_extractor = false;
        c.cue_extractor = false;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        c.annotations.push(NamedInput {
            path: PathBuf::from("spans.jsonl"),
            source: "ner".to_string(),
        });
        assert!(c.validate().is_ok());

        let mut c = valid();
        for _ in 0..2 {
            c.gazetteers.push(NamedInput {
                path: PathBuf::from("g.csv"),
                source: "osm".to_string(),
            });
        }
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn json_roundtrip_and_unknown_keys() {
        let c = valid();
        let text = serde_json::to_string(&c).unwrap();
        let back: PipelineConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);

        let with_typo = r#"{"ads": "ads.csv", "treshold": 0.5}"#;
        assert!(serde_json::from_str::<PipelineConfig>(with_typo).is_err());
    }

    #[test]
    fn overrides_reach_the_extractor_config() {
        let mut c = valid();
        c.cues = Some(vec!["Beside".to_string()]);
        c.stopwords = Some(vec!["THE".to_string()]);
        c.label_allowlist = Some(vec!["LOC".to_string()]);
        let ex = c.extractor_config();
        assert_eq!(ex.cues, vec!["beside"]);
        assert!(ex.stopwords.contains("the"));
        assert_eq!(ex.stopwords.len(), 1);
        assert!(ex.label_allowlist.unwrap().contains("LOC"));
    }
}
