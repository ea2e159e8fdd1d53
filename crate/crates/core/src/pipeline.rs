//! End-to-end orchestration: ingest → dedup → extract → union → rank →
//! (curve + threshold when ground truth exists) → select → footprints →
//! gazetteer comparison, with every artifact written into the configured
//! output directory.
//!
//! Errors are wrapped with the stage they occurred in, so a failed run
//! names the failing stage. Outputs are byte-identical across runs and
//! thread counts: per-term parallelism never reorders results.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::cluster::{
    rank_candidates, spatial_filter, write_ranked_csv, ScaleSet, SsiResult,
};
use crate::config::PipelineConfig;
use crate::corpus::{dedup, load_corpus, write_ads_csv};
use crate::error::{Error, Result};
use crate::eval::{
    load_annotation_records, majority_vote, pr_curve, select_threshold, write_curve_csv,
    DEFAULT_QUORUM, DEFAULT_TOP_N,
};
use crate::extract::{
    extract_builtin, load_external_annotations, union_candidates, write_candidates_csv,
    CandidateSet, UnionReport,
};
use crate::footprint::{convex_hull, write_geojson, Footprint};
use crate::gazetteer::{compare, load_gazetteer, write_match_report_csv};

/// What a pipeline run did, stage by stage.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineReport {
    pub region_id: String,
    /// Usable ads in the input file.
    pub ads_loaded: usize,
    /// Input rows skipped as malformed.
    pub rows_skipped: usize,
    /// Ads left after near-duplicate removal.
    pub ads_deduped: usize,
    /// Mention spans per extractor / annotation source.
    pub spans_by_source: BTreeMap<String, usize>,
    /// Annotation lines skipped as malformed, per source label.
    pub annotation_lines_skipped: BTreeMap<String, usize>,
    /// Spans dropped while pooling.
    pub union: UnionReport,
    /// Distinct candidate terms after pooling.
    pub candidate_terms: usize,
    /// Terms that survived spatial filtering and were scored.
    pub ranked_terms: usize,
    /// Score cutoff used for the final list.
    pub threshold: f64,
    /// True when the cutoff came from the precision-recall curve rather
    /// than from configuration.
    pub threshold_selected: bool,
    /// Terms excluded by the exclusion list.
    pub excluded_terms: usize,
    /// Final name list, best score first.
    pub selected_terms: Vec<String>,
    /// Every file the run wrote.
    pub artifacts: Vec<PathBuf>,
}

fn create_file(stage: &str, path: &Path) -> Result<std::fs::File> {
    std::fs::File::create(path).map_err(|e| Error::stage(stage, Error::io(path, e)))
}

/// Loads the optional exclusion list: one name per line, normalized like
/// every other term; blank lines and names that normalize away are
/// ignored.
fn load_exclusions(path: &Path) -> Result<BTreeSet<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(crate::extract::normalize_term)
        .filter(|t| !t.is_empty())
        .collect())
}

/// Builds one term's footprint from its spatially filtered points: the
/// convex hull where one exists, otherwise (fewer than three distinct
/// points, or all collinear) the points themselves.
fn term_footprint(set: &CandidateSet, term: &str) -> Result<Footprint> {
    let entry = set.entries.get(term).ok_or_else(|| {
        Error::Internal(format!("selected term `{term}` has no candidate entry"))
    })?;
    let filtered = spatial_filter(&entry.points)?;
    match convex_hull(&filtered) {
        Ok(poly) => Ok(Footprint::Polygon(poly)),
        Err(Error::DegenerateGeometry(_)) => Ok(Footprint::Points(filtered)),
        Err(e) => Err(e),
    }
}

/// Runs the whole pipeline. `threads` caps per-term parallelism in the
/// rank and footprint stages; `None` lets the runtime pick. The outputs
/// are byte-identical for any thread count.
pub fn run_pipeline(config: &PipelineConfig, threads: Option<usize>) -> Result<PipelineReport> {
    config.validate().map_err(|e| Error::stage("config", e))?;
    let out_dir = &config.out_dir;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::stage("config", Error::io(out_dir, e)))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::stage("config", Error::Config(format!("thread pool: {e}"))))?;

    let mut artifacts = Vec::new();

    // --- ingest ---------------------------------------------------------
    let ads_path = config.ads.as_ref().expect("validate checked ads");
    let load = load_corpus(ads_path, &config.region_id).map_err(|e| Error::stage("ingest", e))?;
    let corpus = dedup(&load.corpus);
    let deduped_path = out_dir.join("deduped.csv");
    write_ads_csv(&corpus.ads, create_file("ingest", &deduped_path)?)
        .map_err(|e| Error::stage("ingest", e))?;
    artifacts.push(deduped_path);

    // --- extract ----------------------------------------------------------
    let ex_cfg = config.extractor_config();
    let mut spans = extract_builtin(
        &corpus,
        &ex_cfg,
        config.capitalized_extractor,
        config.cue_extractor,
    );
    let mut annotation_lines_skipped = BTreeMap::new();
    for input in &config.annotations {
        let loaded = load_external_annotations(&input.path, &input.source, &ex_cfg)
            .map_err(|e| Error::stage("extract", e))?;
        annotation_lines_skipped.insert(input.source.clone(), loaded.skipped_lines.len());
        spans.extend(loaded.spans);
    }
    let mut spans_by_source: BTreeMap<String, usize> = BTreeMap::new();
    for span in &spans {
        *spans_by_source.entry(span.source.clone()).or_default() += 1;
    }

    // --- union ------------------------------------------------------------
    let (candidates, union_report) = union_candidates(&corpus, &spans);
    let candidates_path = out_dir.join("candidates.csv");
    write_candidates_csv(&candidates, create_file("union", &candidates_path)?)
        .map_err(|e| Error::stage("union", e))?;
    artifacts.push(candidates_path);

    // --- rank -------------------------------------------------------------
    let scales = ScaleSet::new(config.alpha_m).map_err(|e| Error::stage("rank", e))?;
    let ranked: Vec<SsiResult> = pool
        .install(|| rank_candidates(&candidates, &scales, config.mode, config.min_points))
        .map_err(|e| Error::stage("rank", e))?;
    let ranked_path = out_dir.join("ranked.csv");
    write_ranked_csv(&ranked, create_file("rank", &ranked_path)?)
        .map_err(|e| Error::stage("rank", e))?;
    artifacts.push(ranked_path);

    // --- evaluate (only with ground truth) ---------------------------------
    let mut threshold_selected = false;
    let threshold = if let Some(gt_path) = &config.ground_truth {
        let stage = |e| Error::stage("evaluate", e);
        let records = load_annotation_records(gt_path).map_err(stage)?;
        let truth = majority_vote(&records, DEFAULT_QUORUM).map_err(stage)?;
        let curve = pr_curve(&ranked, &truth).map_err(stage)?;
        let curve_path = out_dir.join("curve.csv");
        write_curve_csv(&curve, create_file("evaluate", &curve_path)?).map_err(stage)?;
        artifacts.push(curve_path);
        match config.threshold {
            Some(t) => t,
            None => {
                threshold_selected = true;
                select_threshold(&curve, DEFAULT_TOP_N).map_err(stage)?
            }
        }
    } else {
        config.threshold.expect("validate checked the cutoff")
    };

    // --- select -------------------------------------------------------------
    let exclusions = match &config.exclusions {
        Some(path) => load_exclusions(path).map_err(|e| Error::stage("select", e))?,
        None => BTreeSet::new(),
    };
    let mut excluded_terms = 0usize;
    let mut selected_terms = Vec::new();
    for r in &ranked {
        if r.normalized_score > threshold {
            continue;
        }
        if exclusions.contains(&r.term) {
            excluded_terms += 1;
        } else {
            selected_terms.push(r.term.clone());
        }
    }
    let threshold_path = out_dir.join("threshold.txt");
    let mut tf = create_file("select", &threshold_path)?;
    writeln!(tf, "{threshold}").map_err(|e| Error::stage("select", Error::io(&threshold_path, e)))?;
    artifacts.push(threshold_path);
    let selected_path = out_dir.join("selected_terms.txt");
    let mut sf = create_file("select", &selected_path)?;
    for term in &selected_terms {
        writeln!(sf, "{term}")
            .map_err(|e| Error::stage("select", Error::io(&selected_path, e)))?;
    }
    artifacts.push(selected_path);

    // --- footprint -----------------------------------------------------------
    let features: Vec<(String, Footprint)> = pool
        .install(|| {
            selected_terms
                .par_iter()
                .map(|term| Ok((term.clone(), term_footprint(&candidates, term)?)))
                .collect::<Result<_>>()
        })
        .map_err(|e| Error::stage("footprint", e))?;
    let geojson_path = out_dir.join("footprints.geojson");
    write_geojson(&features, create_file("footprint", &geojson_path)?)
        .map_err(|e| Error::stage("footprint", e))?;
    artifacts.push(geojson_path);

    // --- compare ---------------------------------------------------------------
    for g in &config.gazetteers {
        let stage = |e| Error::stage("compare", e);
        let loaded = load_gazetteer(&g.path, &g.source).map_err(stage)?;
        let report = compare(&selected_terms, &loaded.entries);
        let path = out_dir.join(format!("matches_{}.csv", g.source));
        write_match_report_csv(&report, create_file("compare", &path)?).map_err(stage)?;
        artifacts.push(path);
    }

    Ok(PipelineReport {
        region_id: config.region_id.clone(),
        ads_loaded: load.corpus.ads.len(),
        rows_skipped: load.skipped.len(),
        ads_deduped: corpus.ads.len(),
        spans_by_source,
        annotation_lines_skipped,
        union: union_report,
        candidate_terms: candidates.entries.len(),
        ranked_terms: ranked.len(),
        threshold,
        threshold_selected,
        excluded_terms,
        selected_terms,
        artifacts,
    })
}
