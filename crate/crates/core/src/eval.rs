//! Ground-truth construction and precision/recall evaluation.
//!
//! Human annotators each mark the place names they see in a sample of ads
//! (one JSONL record per annotator per post). [`majority_vote`] keeps only
//! names two or more annotators agreed on, per post; the union over posts
//! is the relevant set. [`score`] compares an extracted name set against
//! that relevant set, [`pr_curve`] sweeps the score threshold from 0.00 to
//! 1.00 in steps of 0.01, and [`select_threshold`] picks the operating
//! point: among the thresholds with the top-10 F-scores (boundary ties all
//! admitted), the one with the highest recall, smallest threshold on a
//! further tie.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::Deserialize;

use crate::cluster::SsiResult;
use crate::error::{Error, Result};
use crate::extract::normalize_term;

/// Names one annotator assigned to one post.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationRecord {
    pub post_id: String,
    pub annotator_id: String,
    /// Normalized place names; may be empty if the annotator saw none.
    pub names: BTreeSet<String>,
}

/// Names that met the agreement quorum.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GroundTruth {
    /// Agreed names per post; posts with no agreed names are absent.
    pub per_post: BTreeMap<String, BTreeSet<String>>,
    /// Union of all per-post agreed names.
    pub all_names: BTreeSet<String>,
}

/// Precision, recall, and their harmonic mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
}

impl Metrics {
    /// Builds metrics from precision and recall; F is 0 when both are 0.
    pub fn from_pr(precision: f64, recall: f64) -> Metrics {
        let f_score = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Metrics {
            precision,
            recall,
            f_score,
        }
    }

    /// Builds metrics from hit/extracted/relevant counts.
    pub fn from_counts(hits: usize, extracted: usize, relevant: usize) -> Metrics {
        debug_assert!(relevant > 0, "relevant set must be non-empty");
        let precision = if extracted == 0 {
            0.0
        } else {
            hits as f64 / extracted as f64
        };
        let recall = hits as f64 / relevant as f64;
        Metrics::from_pr(precision, recall)
    }
}

/// Precision/recall at each threshold of the 0.00..=1.00 sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct PrCurve {
    /// `(threshold, metrics)` pairs, thresholds strictly increasing.
    pub points: Vec<(f64, Metrics)>,
}

/// Default agreement quorum: a name needs two annotators.
pub const DEFAULT_QUORUM: usize = 2;

/// Default size of the F-score shortlist used by [`select_threshold`].
pub const DEFAULT_TOP_N: usize = 10;

// ---------------------------------------------------------------------------
// Annotation loading
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
struct JsonRecord {
    post_id: String,
    annotator_id: String,
    names: Vec<String>,
}

/// Reads annotator records from a JSONL file: one
/// `{"post_id", "annotator_id", "names": [...]}` object per line.
///
/// Names are normalized on load (names normalizing to nothing are
/// dropped); blank lines are skipped; a repeated (post_id, annotator_id)
/// pair is an error, since it would make the vote count ambiguous.
pub fn load_annotation_records(path: &Path) -> Result<Vec<AnnotationRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_annotation_records_from(BufReader::new(file), path)
}

/// [`load_annotation_records`] over any reader; `origin` names the source
/// in errors.
pub fn load_annotation_records_from<R: Read>(
    reader: R,
    origin: &Path,
) -> Result<Vec<AnnotationRecord>> {
    let mut records = Vec::new();
    let mut seen: BTreeSet<(String, String)> = BTreeSet::new();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = idx as u64 + 1;
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: JsonRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            line: line_no,
            message: format!("malformed annotation record: {e}"),
        })?;
        let key = (raw.post_id.clone(), raw.annotator_id.clone());
        if !seen.insert(key) {
            return Err(Error::Data {
                path: origin.to_path_buf(),
                message: format!(
                    "annotator `{}` appears twice for post `{}`",
                    raw.annotator_id, raw.post_id
                ),
            });
        }
        let names = raw
            .names
            .iter()
            .map(|n| normalize_term(n))
            .filter(|n| !n.is_empty())
            .collect();
        records.push(AnnotationRecord {
            post_id: raw.post_id,
            annotator_id: raw.annotator_id,
            names,
        });
    }
    Ok(records)
}

// ---------------------------------------------------------------------------
// Majority vote
// ---------------------------------------------------------------------------

/// Keeps, per post, the names at least `quorum` distinct annotators
/// assigned to that post.
///
/// Errors if the records mention fewer distinct annotators than the
/// quorum — agreement would be impossible by construction.
pub fn majority_vote(records: &[AnnotationRecord], quorum: usize) -> Result<GroundTruth> {
    if quorum == 0 {
        return Err(Error::Config("agreement quorum must be positive".to_string()));
    }
    let annotators: BTreeSet<&str> = records.iter().map(|r| r.annotator_id.as_str()).collect();
    if annotators.len() < quorum {
        return Err(Error::TooFewAnnotators {
            have: annotators.len(),
            need: quorum,
        });
    }

    // post → name → distinct annotators who labeled it there.
    let mut votes: BTreeMap<&str, BTreeMap<&str, BTreeSet<&str>>> = BTreeMap::new();
    for rec in records {
        let per_name = votes.entry(rec.post_id.as_str()).or_default();
        for name in &rec.names {
            per_name
                .entry(name.as_str())
                .or_default()
                .insert(rec.annotator_id.as_str());
        }
    }

    let mut truth = GroundTruth::default();
    for (post_id, per_name) in votes {
        let agreed: BTreeSet<String> = per_name
            .into_iter()
            .filter(|(_, who)| who.len() >= quorum)
            .map(|(name, _)| name.to_string())
            .collect();
        if !agreed.is_empty() {
            truth.all_names.extend(agreed.iter().cloned());
            truth.per_post.insert(post_id.to_string(), agreed);
        }
    }
    Ok(truth)
}

// ---------------------------------------------------------------------------
// Scoring
// ---------------------------------------------------------------------------

/// Precision/recall of an extracted name set against the agreed names.
///
/// Matching is exact equality of normalized names. Empty extracted set →
/// precision 0; empty ground truth is an error (recall undefined).
pub fn score(extracted: &BTreeSet<String>, truth: &GroundTruth) -> Result<Metrics> {
    if truth.all_names.is_empty() {
        return Err(Error::EmptyGroundTruth);
    }
    let hits = extracted.intersection(&truth.all_names).count();
    Ok(Metrics::from_counts(
        hits,
        extracted.len(),
        truth.all_names.len(),
    ))
}

/// Sweeps the score threshold from 0.00 to 1.00 in steps of 0.01.
///
/// At each threshold `t` the extracted set is every term whose normalized
/// score is `<= t` (lower score = more spatially clustered), so the
/// extracted sets are nested and recall is non-decreasing. Returns 101
/// points.
pub fn pr_curve(ranked: &[SsiResult], truth: &GroundTruth) -> Result<PrCurve> {
    if truth.all_names.is_empty() {
        return Err(Error::EmptyGroundTruth);
    }
    let mut min_score: BTreeMap<&str, f64> = BTreeMap::new();
    for r in ranked {
        if !r.normalized_score.is_finite() || !(0.0..=1.0).contains(&r.normalized_score) {
            return Err(Error::InvalidInput(format!(
                "term `{}` has normalized score {} outside [0, 1]",
                r.term, r.normalized_score
            )));
        }
        min_score
            .entry(r.term.as_str())
            .and_modify(|s| *s = s.min(r.normalized_score))
            .or_insert(r.normalized_score);
    }
    let mut by_score: Vec<(f64, &str)> = min_score.into_iter().map(|(t, s)| (s, t)).collect();
    by_score.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));

    let mut extracted: BTreeSet<String> = BTreeSet::new();
    let mut cursor = 0;
    let mut points = Vec::with_capacity(101);
    for i in 0..=100u32 {
        let t = f64::from(i) / 100.0;
        while cursor < by_score.len() && by_score[cursor].0 <= t {
            extracted.insert(by_score[cursor].1.to_string());
            cursor += 1;
        }
        points.push((t, score(&extracted, truth)?));
    }
    Ok(PrCurve { points })
}

/// Picks the operating threshold from a curve.
///
/// Thresholds are ranked by F-score descending and the best `top_n` are
/// shortlisted — every threshold tying the F-score at the cut boundary is
/// admitted, so the shortlist never depends on sort order. The shortlisted
/// threshold with the highest recall wins; a recall tie goes to the
/// smallest threshold.
pub fn select_threshold(curve: &PrCurve, top_n: usize) -> Result<f64> {
    if curve.points.is_empty() {
        return Err(Error::InvalidInput(
            "threshold selection needs a non-empty curve".to_string(),
        ));
    }
    if top_n == 0 {
        return Err(Error::Config(
            "threshold shortlist size must be positive".to_string(),
        ));
    }
    let mut by_f: Vec<&(f64, Metrics)> = curve.points.iter().collect();
    by_f.sort_by(|a, b| b.1.f_score.total_cmp(&a.1.f_score));
    let cut = by_f[top_n.min(by_f.len()) - 1].1.f_score;
    let best = by_f
        .iter()
        .filter(|(_, m)| m.f_score >= cut)
        .max_by(|a, b| {
            a.1.recall
                .total_cmp(&b.1.recall)
                .then_with(|| b.0.total_cmp(&a.0))
        })
        .expect("shortlist is non-empty");
    Ok(best.0)
}

// ---------------------------------------------------------------------------
// Curve CSV
// ---------------------------------------------------------------------------

pub const CURVE_HEADER: [&str; 4] = ["threshold", "precision", "recall", "f_score"];

/// Writes a curve as CSV: thresholds at two decimals, metrics at nine.
pub fn write_curve_csv<W: Write>(curve: &PrCurve, out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let io_err = |e: csv::Error| Error::InvalidInput(format!("csv write failed: {e}"));
    wtr.write_record(CURVE_HEADER).map_err(io_err)?;
    for (t, m) in &curve.points {
        wtr.write_record([
            format!("{t:.2}"),
            format!("{:.9}", m.precision),
            format!("{:.9}", m.recall),
            format!("{:.9}", m.f_score),
        ])
        .map_err(io_err)?;
    }
    wtr.flush()
        .map_err(|e| Error::InvalidInput(format!("csv flush failed: {e}")))?;
    Ok(())
}

/// Reads a curve CSV produced by [`write_curve_csv`].
pub fn read_curve_csv<R: Read>(reader: R, origin: &Path) -> Result<PrCurve> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Data {
            path: origin.to_path_buf(),
            message: format!("unreadable header: {e}"),
        })?
        .clone();
    if headers.iter().ne(CURVE_HEADER.iter().copied()) {
        return Err(Error::Data {
            path: origin.to_path_buf(),
            message: format!(
                "malformed header `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut points = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let line = idx as u64 + 2;
        let parse_err = |msg: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            message: msg,
        };
        let rec = rec.map_err(|e| parse_err(format!("unparseable record: {e}")))?;
        let num = |i: usize| -> Result<f64> {
            rec.get(i)
                .unwrap_or("")
                .parse()
                .map_err(|e| parse_err(format!("{e}")))
        };
        points.push((
            num(0)?,
            Metrics {
                precision: num(1)?,
                recall: num(2)?,
                f_score: num(3)?,
            },
        ));
    }
    Ok(PrCurve { points })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(post: &str, who: &str, names: &[&str]) -> AnnotationRecord {
        AnnotationRecord {
            post_id: post.to_string(),
            annotator_id: who.to_string(),
            names: names.iter().map(|n| normalize_term(n)).collect(),
        }
    }

    fn names(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    // -- majority vote ---------------------------------------------------------

    #[test]
    fn two_of_three_annotators_keep_a_name() {
        let records = vec![
            rec("p1", "a1", &["hyde park", "downtown"]),
            rec("p1", "a2", &["hyde park"]),
            rec("p1", "a3", &[]),
        ];
        let truth = majority_vote(&records, DEFAULT_QUORUM).unwrap();
        assert_eq!(truth.per_post["p1"], names(&["hyde park"]));
        assert_eq!(truth.all_names, names(&["hyde park"]));
    }

    #[test]
    fn unanimous_names_survive_and_singletons_do_not() {
        let records = vec![
            rec("p1", "a1", &["greenbelt", "ann morrison park"]),
            rec("p1", "a2", &["greenbelt", "bsu"]),
            rec("p1", "a3", &["greenbelt"]),
        ];
        let truth = majority_vote(&records, 2).unwrap();
        assert_eq!(truth.per_post["p1"], names(&["greenbelt"]));
    }

    #[test]
    fn votes_count_per_post_not_across_posts() {
        let records = vec![
            rec("p1", "a1", &["soho"]),
            rec("p2", "a2", &["soho"]),
            rec("p2", "a3", &["soho"]),
        ];
        let truth = majority_vote(&records, 2).unwrap();
        assert!(!truth.per_post.contains_key("p1"));
        assert_eq!(truth.per_post["p2"], names(&["soho"]));
    }

    #[test]
    fn too_few_annotators_is_an_error() {
        let records = vec![rec("p1", "a1", &["soho"])];
        assert!(matches!(
            majority_vote(&records, 2),
            Err(Error::TooFewAnnotators { have: 1, need: 2 })
        ));
    }

    #[test]
    fn vote_is_invariant_under_reordering_and_renaming() {
        let records = vec![
            rec("p1", "a1", &["north end"]),
            rec("p1", "a2", &["north end", "k-town"]),
            rec("p2", "a2", &["k-town"]),
            rec("p2", "a3", &["k-town"]),
        ];
        let base = majority_vote(&records, 2).unwrap();

        let mut reversed = records.clone();
        reversed.reverse();
        assert_eq!(majority_vote(&reversed, 2).unwrap(), base);

        let renamed: Vec<AnnotationRecord> = records
            .iter()
            .map(|r| AnnotationRecord {
                annotator_id: format!("annotator-{}", r.annotator_id),
                ..r.clone()
            })
            .collect();
        assert_eq!(majority_vote(&renamed, 2).unwrap(), base);
    }

    // -- scoring -----------------------------------------------------------

    fn truth_of(items: &[&str]) -> GroundTruth {
        let set = names(items);
        GroundTruth {
            per_post: [("p".to_string(), set.clone())].into_iter().collect(),
            all_names: set,
        }
    }

    #[test]
    fn harmonic_mean_matches_reference_value() {
        let m = Metrics::from_pr(0.600, 0.684);
        assert!((m.f_score - 0.639_252_336_448_598_1).abs() < 1e-12, "{}", m.f_score);
    }

    #[test]
    fn count_based_metrics_match_hand_arithmetic() {
        // 3 extracted, 2 of them among 4 relevant.
        let m = Metrics::from_counts(2, 3, 4);
        assert!((m.precision - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.recall, 0.5);
        assert!((m.f_score - 4.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_retrieval_scores_one() {
        let truth = truth_of(&["a", "b"]);
        let m = score(&names(&["a", "b"]), &truth).unwrap();
        assert_eq!((m.precision, m.recall, m.f_score), (1.0, 1.0, 1.0));
    }

    #[test]
    fn empty_extraction_scores_zero() {
        let truth = truth_of(&["a"]);
        let m = score(&BTreeSet::new(), &truth).unwrap();
        assert_eq!((m.precision, m.recall, m.f_score), (0.0, 0.0, 0.0));
    }

    #[test]
    fn empty_ground_truth_is_an_error() {
        let truth = GroundTruth::default();
        assert!(matches!(
            score(&names(&["a"]), &truth),
            Err(Error::EmptyGroundTruth)
        ));
    }

    #[test]
    fn f_is_zero_iff_a_side_is_zero_and_bounded_by_twice_the_min() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let p: f64 = rng.gen_range(0.0..=1.0);
            let r: f64 = rng.gen_range(0.0..=1.0);
            let m = Metrics::from_pr(p, r);
            assert_eq!(m.f_score == 0.0, p == 0.0 || r == 0.0);
            assert!(m.f_score <= 2.0 * p.min(r) + 1e-15);
        }
    }

    // -- curve ---------------------------------------------------------------

    fn ranked_item(term: &str, score: f64) -> SsiResult {
        SsiResult {
            term: term.to_string(),
            n_raw: 5,
            n_filtered: 4,
            entropies: Vec::new(),
            entropy_sum: score,
            adjusted_sum: score,
            normalized_score: score,
        }
    }

    #[test]
    fn curve_has_101_nested_points() {
        let ranked = vec![
            ranked_item("a", 0.0),
            ranked_item("b", 0.25),
            ranked_item("c", 0.5),
            ranked_item("d", 1.0),
        ];
        let truth = truth_of(&["a", "b", "zzz"]);
        let curve = pr_curve(&ranked, &truth).unwrap();
        assert_eq!(curve.points.len(), 101);
        assert_eq!(curve.points[0].0, 0.0);
        assert_eq!(curve.points[100].0, 1.0);
        for w in curve.points.windows(2) {
            assert!(w[1].0 > w[0].0);
            assert!(w[1].1.recall >= w[0].1.recall);
        }
        // t = 0.00: only `a` extracted → precision 1, recall 1/3.
        let first = curve.points[0].1;
        assert_eq!(first.precision, 1.0);
        assert!((first.recall - 1.0 / 3.0).abs() < 1e-15);
        // t = 1.00: everything extracted → precision 2/4, recall 2/3.
        let last = curve.points[100].1;
        assert_eq!(last.precision, 0.5);
        assert!((last.recall - 2.0 / 3.0).abs() < 1e-15);
        // The curve's maximum recall is reached at t = 1.
        let max_r = curve
            .points
            .iter()
            .map(|(_, m)| m.recall)
            .fold(0.0, f64::max);
        assert_eq!(last.recall, max_r);
    }

    #[test]
    fn curve_rejects_out_of_range_scores() {
        let truth = truth_of(&["a"]);
        assert!(pr_curve(&[ranked_item("a", 1.5)], &truth).is_err());
        assert!(pr_curve(&[ranked_item("a", f64::NAN)], &truth).is_err());
    }

    #[test]
    fn threshold_inclusion_is_inclusive_at_the_boundary() {
        let ranked = vec![ranked_item("a", 0.5)];
        let truth = truth_of(&["a"]);
        let curve = pr_curve(&ranked, &truth).unwrap();
        // t = 0.50 is the 51st point; `a` must be included exactly there.
        assert_eq!(curve.points[49].1.recall, 0.0);
        assert_eq!(curve.points[50].1.recall, 1.0);
    }

    // -- threshold selection ------------------------------------------------

    fn curve_of(points: &[(f64, f64, f64)]) -> PrCurve {
        PrCurve {
            points: points
                .iter()
                .map(|&(t, p, r)| (t, Metrics::from_pr(p, r)))
                .collect(),
        }
    }

    #[test]
    fn equal_f_prefers_higher_recall() {
        // F peaks at t = 0.4 and 0.6 jointly (F(0.8, 0.4) = F(0.4, 0.8));
        // the 0.6 threshold carries the higher recall and must win, whether
        // the shortlist admits everything or only the tying pair.
        let curve = curve_of(&[
            (0.2, 0.3, 0.1),
            (0.4, 0.8, 0.4),
            (0.6, 0.4, 0.8),
            (0.8, 0.2, 0.5),
            (1.0, 0.1, 0.6),
        ]);
        assert_eq!(select_threshold(&curve, 10).unwrap(), 0.6);
        assert_eq!(select_threshold(&curve, 2).unwrap(), 0.6);
    }

    #[test]
    fn recall_tie_prefers_smaller_threshold() {
        let curve = curve_of(&[(0.2, 0.5, 0.5), (0.4, 0.5, 0.5), (0.6, 0.1, 0.1)]);
        assert_eq!(select_threshold(&curve, 10).unwrap(), 0.2);
    }

    #[test]
    fn boundary_f_ties_are_all_admitted() {
        // Shortlist size 1, but two thresholds tie the best F; the second
        // has higher recall and must win despite the size-1 cut.
        let curve = curve_of(&[(0.1, 0.8, 0.4), (0.2, 0.4, 0.8), (0.3, 0.1, 0.1)]);
        assert_eq!(select_threshold(&curve, 1).unwrap(), 0.2);
    }

    #[test]
    fn shortlist_restricts_the_recall_hunt() {
        // Highest recall overall sits at a low-F threshold that must not
        // enter a size-2 shortlist.
        let curve = curve_of(&[(0.1, 0.9, 0.6), (0.2, 0.9, 0.5), (0.3, 0.05, 1.0)]);
        assert_eq!(select_threshold(&curve, 2).unwrap(), 0.1);
    }

    #[test]
    fn singleton_curve_returns_its_threshold() {
        let curve = curve_of(&[(0.42, 0.5, 0.5)]);
        assert_eq!(select_threshold(&curve, 10).unwrap(), 0.42);
    }

    #[test]
    fn selection_always_returns_a_curve_threshold() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let n = rng.gen_range(1..=101);
            let pts: Vec<(f64, f64, f64)> = (0..n)
                .map(|i| {
                    (
                        i as f64 / 100.0,
                        rng.gen_range(0.0..=1.0),
                        rng.gen_range(0.0..=1.0),
                    )
                })
                .collect();
            let curve = curve_of(&pts);
            let t = select_threshold(&curve, 10).unwrap();
            assert!(curve.points.iter().any(|&(pt, _)| pt == t));
        }
    }

    // -- annotation loading ---------------------------------------------------

    #[test]
    fn jsonl_records_load_and_normalize() {
        let data = concat!(
            r#"{"post_id": "p1", "annotator_id": "a1", "names": [" Hyde  Park ", "SoHo!!"]}"#,
            "\n\n",
            r#"{"post_id": "p1", "annotator_id": "a2", "names": []}"#,
            "\n",
        );
        let recs =
            load_annotation_records_from(data.as_bytes(), Path::new("gt.jsonl")).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].names, names(&["hyde park", "soho"]));
        assert!(recs[1].names.is_empty());
    }

    #[test]
    fn duplicate_post_annotator_pair_is_rejected() {
        let data = concat!(
            r#"{"post_id": "p1", "annotator_id": "a1", "names": ["x"]}"#,
            "\n",
            r#"{"post_id": "p1", "annotator_id": "a1", "names": ["y"]}"#,
            "\n",
        );
        let err =
            load_annotation_records_from(data.as_bytes(), Path::new("gt.jsonl")).unwrap_err();
        assert!(matches!(err, Error::Data { .. }), "{err}");
    }

    #[test]
    fn malformed_line_reports_its_number() {
        let data = concat!(
            r#"{"post_id": "p1", "annotator_id": "a1", "names": []}"#,
            "\n",
            "not json\n",
        );
        let err =
            load_annotation_records_from(data.as_bytes(), Path::new("gt.jsonl")).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other}"),
        }
    }

    // -- curve CSV -------------------------------------------------------------

    #[test]
    fn curve_csv_roundtrips_to_nine_decimals() {
        let ranked = vec![
            ranked_item("a", 0.0),
            ranked_item("b", 0.3),
            ranked_item("c", 0.9),
        ];
        let truth = truth_of(&["a", "c"]);
        let curve = pr_curve(&ranked, &truth).unwrap();
        let mut buf = Vec::new();
        write_curve_csv(&curve, &mut buf).unwrap();
        let back = read_curve_csv(buf.as_slice(), Path::new("curve.csv")).unwrap();
        assert_eq!(back.points.len(), 101);
        for ((t1, m1), (t2, m2)) in curve.points.iter().zip(&back.points) {
            assert_eq!(*t1, *t2);
            assert!((m1.precision - m2.precision).abs() < 5e-10);
            assert!((m1.recall - m2.recall).abs() < 5e-10);
            assert!((m1.f_score - m2.f_score).abs() < 5e-10);
        }
    }

    #[test]
    fn curve_csv_rejects_wrong_header() {
        let data = "a,b,c,d\n0.1,0.2,0.3,0.4\n";
        assert!(read_curve_csv(data.as_bytes(), Path::new("x.csv")).is_err());
    }
}
