//! Candidate place-name extraction.
//!
//! Two cheap built-in heuristics propose mention spans directly from ad
//! text: [`extract_capitalized`] collects short runs of capitalized tokens,
//! and [`extract_preposition_cue`] collects short token runs that follow
//! location cues such as "near" or "minutes from". Neither understands
//! language; they exist so the pipeline runs end to end without an external
//! tagger, and they are deliberately recall-oriented — the geographic
//! ranking downstream is what separates real place names from noise.
//!
//! Higher-quality spans from an external NER system can be ingested from
//! JSONL via [`load_external_annotations`] and pooled with the built-ins by
//! [`union_candidates`], which also validates every span against the corpus
//! and groups mentions by normalized term with one geotag per mentioning ad.
//!
//! All span offsets count Unicode scalar values, not bytes.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::Deserialize;

use crate::corpus::{Corpus, RowSkip};
use crate::error::{Error, Result};
use crate::geo::GeoPoint;

// ---------------------------------------------------------------------------
// Spans and candidate sets
// ---------------------------------------------------------------------------

/// One proposed place-name mention inside one ad text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MentionSpan {
    pub post_id: String,
    /// Start offset in Unicode scalar values, inclusive.
    pub start: usize,
    /// End offset in Unicode scalar values, exclusive.
    pub end: usize,
    /// Exact text slice covered by `[start, end)`.
    pub surface: String,
    /// Which extractor or annotation source proposed the span.
    pub source: String,
}

/// All pooled evidence for one normalized term.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateEntry {
    pub term: String,
    pub mentions: Vec<MentionSpan>,
    /// Distinct mentioning ads, sorted by post id.
    pub post_ids: Vec<String>,
    /// Ad locations parallel to `post_ids`.
    pub points: Vec<GeoPoint>,
}

/// Candidate terms keyed by normalized term.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CandidateSet {
    pub entries: BTreeMap<String, CandidateEntry>,
}

/// Spans discarded while pooling, by reason.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct UnionReport {
    /// post_id not present in the corpus.
    pub unknown_post: usize,
    /// Offsets empty, inverted, or past the end of the ad text.
    pub bad_offsets: usize,
    /// `surface` disagrees with the corpus text slice.
    pub surface_mismatch: usize,
    /// Normalization left nothing (pure punctuation).
    pub empty_term: usize,
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Tunable word lists and thresholds for the built-in extractors.
///
/// These are configuration rather than constants: region-specific corpora
/// calibrate their own stopword and cue inventories.
#[derive(Debug, Clone)]
pub struct ExtractorConfig {
    /// Words (lowercase) that may not begin or end a capitalized run and
    /// that are skipped between a cue and the tokens it introduces.
    pub stopwords: BTreeSet<String>,
    /// Cue phrases (lowercase, possibly multi-word) that introduce places.
    pub cues: Vec<String>,
    /// When more than this fraction of the uppercase-bearing tokens of a
    /// text are fully capitalized, the text is treated as typed-in-caps and
    /// [`extract_capitalized`] yields nothing (the cue extractor still
    /// applies). Capitalization carries no signal in such ads.
    pub caps_guard_fraction: f64,
    /// Accepted external annotation labels; `None` accepts every label.
    pub label_allowlist: Option<BTreeSet<String>>,
}

const ARTICLES: &[&str] = &["a", "an", "the"];
const CONJUNCTIONS: &[&str] = &["and", "or", "nor", "but"];
const PREPOSITIONS: &[&str] = &[
    "about", "above", "across", "after", "against", "along", "among",
    "around", "at", "before", "behind", "below", "beneath", "beside",
    "between", "beyond", "by", "down", "during", "for", "from", "in",
    "inside", "into", "near", "of", "off", "on", "onto", "out", "outside",
    "over", "past", "since", "through", "to", "toward", "towards", "under",
    "until", "up", "upon", "with", "within", "without",
];
const MONTHS: &[&str] = &[
    "january", "february", "march", "april", "may", "june", "july",
    "august", "september", "october", "november", "december",
];
const WEEKDAYS: &[&str] = &[
    "monday", "tuesday", "wednesday", "thursday", "friday", "saturday",
    "sunday",
];

/// Cue phrases that commonly introduce a place in rental-ad prose.
pub const DEFAULT_CUES: &[&str] = &[
    "in",
    "near",
    "at",
    "close to",
    "minutes from",
    "walking distance to",
    "heart of",
];

impl Default for ExtractorConfig {
    fn default() -> Self {
        let stopwords = ARTICLES
            .iter()
            .chain(CONJUNCTIONS)
            .chain(PREPOSITIONS)
            .chain(MONTHS)
            .chain(WEEKDAYS)
            .map(|s| s.to_string())
            .collect();
        ExtractorConfig {
            stopwords,
            cues: DEFAULT_CUES.iter().map(|s| s.to_string()).collect(),
            caps_guard_fraction: 0.8,
            label_allowlist: None,
        }
    }
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

/// Canonical form of a term: Unicode-lowercased, leading/trailing
/// punctuation and whitespace stripped, internal whitespace runs collapsed
/// to single spaces. Internal hyphens and apostrophes survive. May return
/// an empty string (callers discard those).
pub fn normalize_term(raw: &str) -> String {
    let lowered = raw.to_lowercase();
    let trimmed = lowered.trim_matches(|c: char| !c.is_alphanumeric());
    trimmed.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Splits an already-normalized term or name into comparison tokens:
/// whitespace-separated words with any leading/trailing punctuation (for
/// example wrapping parentheses) removed. Empty tokens are dropped.
pub fn normalized_tokens(s: &str) -> Vec<String> {
    s.split_whitespace()
        .map(|w| {
            w.trim_matches(|c: char| !c.is_alphanumeric())
                .to_lowercase()
        })
        .filter(|w| !w.is_empty())
        .collect()
}

// ---------------------------------------------------------------------------
// Tokenization shared by the built-in extractors
// ---------------------------------------------------------------------------

#[derive(Debug)]
struct Token {
    /// First char offset of the token's alphanumeric core.
    core_start: usize,
    /// Past-the-end char offset of the core.
    core_end: usize,
    /// The core itself.
    core: String,
    /// Punctuation before the core ("(Ann" → true).
    leading_junk: bool,
    /// Punctuation after the core ("Park)," → true); terminates runs.
    trailing_junk: bool,
}

fn tokenize(chars: &[char]) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        while i < chars.len() && chars[i].is_whitespace() {
            i += 1;
        }
        let start = i;
        while i < chars.len() && !chars[i].is_whitespace() {
            i += 1;
        }
        if start == i {
            break;
        }
        let mut core_start = start;
        while core_start < i && !chars[core_start].is_alphanumeric() {
            core_start += 1;
        }
        let mut core_end = i;
        while core_end > core_start && !chars[core_end - 1].is_alphanumeric() {
            core_end -= 1;
        }
        tokens.push(Token {
            core_start,
            core_end,
            core: chars[core_start..core_end].iter().collect(),
            leading_junk: core_start > start,
            trailing_junk: core_end < i,
        });
    }
    tokens
}

fn span_from(chars: &[char], post_id: &str, start: usize, end: usize, source: &str) -> MentionSpan {
    MentionSpan {
        post_id: post_id.to_string(),
        start,
        end,
        surface: chars[start..end].iter().collect(),
        source: source.to_string(),
    }
}

fn is_stopword(cfg: &ExtractorConfig, token: &Token) -> bool {
    cfg.stopwords.contains(&token.core.to_lowercase())
}

// ---------------------------------------------------------------------------
// Built-in extractor: capitalized runs
// ---------------------------------------------------------------------------

fn qualifies_capitalized(core: &str) -> bool {
    let chars: Vec<char> = core.chars().collect();
    if chars.len() >= 2 && chars[0].is_uppercase() && chars[1].is_lowercase() {
        return true;
    }
    // Short acronyms: 2–6 letters, all uppercase.
    (2..=6).contains(&chars.len()) && chars.iter().all(|c| c.is_alphabetic() && c.is_uppercase())
}

/// The caps guard never fires on fewer fully-capitalized tokens than this:
/// one or two acronyms ("BSU", "NY") are signal, not shouting.
const CAPS_GUARD_MIN_ALLCAPS: usize = 3;

fn caps_guard_trips(cfg: &ExtractorConfig, tokens: &[Token]) -> bool {
    let mut upper_bearing = 0usize;
    let mut all_caps = 0usize;
    for t in tokens {
        let mut has_alpha = false;
        let mut has_upper = false;
        let mut has_lower = false;
        for c in t.core.chars() {
            if c.is_alphabetic() {
                has_alpha = true;
                if c.is_uppercase() {
                    has_upper = true;
                } else if c.is_lowercase() {
                    has_lower = true;
                }
            }
        }
        if has_alpha && has_upper {
            upper_bearing += 1;
            if !has_lower {
                all_caps += 1;
            }
        }
    }
    all_caps >= CAPS_GUARD_MIN_ALLCAPS
        && (all_caps as f64) > cfg.caps_guard_fraction * (upper_bearing as f64)
}

/// Proposes spans from runs of capitalized tokens.
///
/// A token joins a run when it is either Titlecase (an uppercase letter
/// immediately followed by a lowercase one) or an all-uppercase word of 2–6
/// letters. Runs break at non-qualifying tokens and at punctuation between
/// tokens; stopwords are trimmed from both ends of a run, and only runs of
/// one to four tokens are kept. Texts typed almost entirely in capitals
/// yield nothing — see [`ExtractorConfig::caps_guard_fraction`].
pub fn extract_capitalized(post_id: &str, text: &str, cfg: &ExtractorConfig) -> Vec<MentionSpan> {
    let chars: Vec<char> = text.chars().collect();
    let tokens = tokenize(&chars);
    if caps_guard_trips(cfg, &tokens) {
        return Vec::new();
    }

    let mut spans = Vec::new();
    let mut run: Vec<&Token> = Vec::new();
    let flush = |run: &mut Vec<&Token>, spans: &mut Vec<MentionSpan>| {
        let mut lo = 0usize;
        let mut hi = run.len();
        while lo < hi && is_stopword(cfg, run[lo]) {
            lo += 1;
        }
        while hi > lo && is_stopword(cfg, run[hi - 1]) {
            hi -= 1;
        }
        let trimmed = &run[lo..hi];
        if (1..=4).contains(&trimmed.len()) {
            spans.push(span_from(
                &chars,
                post_id,
                trimmed[0].core_start,
                trimmed[trimmed.len() - 1].core_end,
                "capitalized",
            ));
        }
        run.clear();
    };

    for token in &tokens {
        if qualifies_capitalized(&token.core) {
            if let Some(prev) = run.last() {
                // Punctuation between tokens ends the run.
                if prev.trailing_junk || token.leading_junk {
                    flush(&mut run, &mut spans);
                }
            }
            run.push(token);
        } else if !run.is_empty() {
            flush(&mut run, &mut spans);
        }
    }
    if !run.is_empty() {
        flush(&mut run, &mut spans);
    }
    spans
}

// ---------------------------------------------------------------------------
// Built-in extractor: preposition/cue runs
// ---------------------------------------------------------------------------

fn cue_words(cfg: &ExtractorConfig) -> Vec<Vec<String>> {
    let mut cues: Vec<Vec<String>> = cfg
        .cues
        .iter()
        .map(|c| c.split_whitespace().map(|w| w.to_lowercase()).collect())
        .filter(|c: &Vec<String>| !c.is_empty())
        .collect();
    // Longest first so "walking distance to" wins over a hypothetical "to".
    cues.sort_by_key(|c| std::cmp::Reverse(c.len()));
    cues
}

/// Returns the length in tokens of the longest cue starting at `i`, if any.
fn match_cue(cues: &[Vec<String>], tokens: &[Token], i: usize) -> Option<usize> {
    'cue: for cue in cues {
        if i + cue.len() > tokens.len() {
            continue;
        }
        for (j, word) in cue.iter().enumerate() {
            let t = &tokens[i + j];
            if !t.core.eq_ignore_ascii_case(word) {
                continue 'cue;
            }
            // Punctuation inside the phrase breaks it ("close, to").
            if j + 1 < cue.len() && (t.trailing_junk || tokens[i + j + 1].leading_junk) {
                continue 'cue;
            }
        }
        return Some(cue.len());
    }
    None
}

/// Proposes spans from token runs that follow a cue phrase.
///
/// After each cue ("in", "near", "minutes from", ...) leading stopwords are
/// skipped and up to four following tokens are collected; collection stops
/// at punctuation, at the start of another cue phrase, or at the cap. Cues
/// match case-insensitively, so shouted ads still yield spans here.
pub fn extract_preposition_cue(
    post_id: &str,
    text: &str,
    cfg: &ExtractorConfig,
) -> Vec<MentionSpan> {
    let chars: Vec<char> = text.chars().collect();
    let tokens = tokenize(&chars);
    let cues = cue_words(cfg);
    let mut spans = Vec::new();

    for i in 0..tokens.len() {
        let Some(cue_len) = match_cue(&cues, &tokens, i) else {
            continue;
        };
        // Punctuation right after the cue means it introduces nothing.
        if tokens[i + cue_len - 1].trailing_junk {
            continue;
        }

        let mut j = i + cue_len;
        // Skip articles and other stopwords between cue and content.
        let mut blocked = false;
        while j < tokens.len()
            && !tokens[j].core.is_empty()
            && is_stopword(cfg, &tokens[j])
            && match_cue(&cues, &tokens, j).is_none()
        {
            if tokens[j].trailing_junk {
                blocked = true;
                break;
            }
            j += 1;
        }
        if blocked || j >= tokens.len() {
            continue;
        }

        let mut collected: Vec<&Token> = Vec::new();
        while j < tokens.len() && collected.len() < 4 {
            let t = &tokens[j];
            if t.core.is_empty() || match_cue(&cues, &tokens, j).is_some() {
                break;
            }
            if !collected.is_empty() && t.leading_junk {
                break;
            }
            collected.push(t);
            if t.trailing_junk {
                break;
            }
            j += 1;
        }
        if !collected.is_empty() {
            spans.push(span_from(
                &chars,
                post_id,
                collected[0].core_start,
                collected[collected.len() - 1].core_end,
                "cue",
            ));
        }
    }
    spans
}

// ---------------------------------------------------------------------------
// External annotations
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
struct JsonSpan {
    start: usize,
    end: usize,
    text: String,
    #[serde(default)]
    label: String,
}

#[derive(Debug, Deserialize)]
struct JsonAnnotation {
    post_id: String,
    spans: Vec<JsonSpan>,
}

/// External spans plus per-line diagnostics.
#[derive(Debug, Clone, Default)]
pub struct AnnotationLoad {
    pub spans: Vec<MentionSpan>,
    /// Lines that were not valid annotation records.
    pub skipped_lines: Vec<RowSkip>,
    /// Spans removed by the label allow-list.
    pub filtered_by_label: usize,
}

/// Reads NER annotations from JSONL: one `{"post_id", "spans": [...]}`
/// object per line, each span carrying `start`/`end` char offsets, the
/// covered `text`, and a `label`. Malformed lines are collected rather than
/// fatal. Spans are filtered by the configured label allow-list; offsets
/// and surfaces are validated later, against the corpus, by
/// [`union_candidates`].
pub fn load_external_annotations(
    path: &Path,
    source: &str,
    cfg: &ExtractorConfig,
) -> Result<AnnotationLoad> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_external_annotations_from(file, source, cfg)
}

/// Reader-based variant of [`load_external_annotations`].
pub fn load_external_annotations_from<R: Read>(
    reader: R,
    source: &str,
    cfg: &ExtractorConfig,
) -> Result<AnnotationLoad> {
    let mut out = AnnotationLoad::default();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = idx as u64 + 1;
        let line = line.map_err(|e| Error::io(Path::new("<annotations>"), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: JsonAnnotation = match serde_json::from_str(&line) {
            Ok(rec) => rec,
            Err(e) => {
                out.skipped_lines.push(RowSkip {
                    line: line_no,
                    reason: format!("invalid annotation record: {e}"),
                });
                continue;
            }
        };
        for span in rec.spans {
            if let Some(allow) = &cfg.label_allowlist {
                if !allow.contains(&span.label) {
                    out.filtered_by_label += 1;
                    continue;
                }
            }
            out.spans.push(MentionSpan {
                post_id: rec.post_id.clone(),
                start: span.start,
                end: span.end,
                surface: span.text,
                source: source.to_string(),
            });
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Pooling
// ---------------------------------------------------------------------------

/// Runs the enabled built-in extractors over every ad.
pub fn extract_builtin(
    corpus: &Corpus,
    cfg: &ExtractorConfig,
    capitalized: bool,
    preposition_cue: bool,
) -> Vec<MentionSpan> {
    let mut spans = Vec::new();
    for ad in &corpus.ads {
        if capitalized {
            spans.extend(extract_capitalized(&ad.post_id, &ad.text, cfg));
        }
        if preposition_cue {
            spans.extend(extract_preposition_cue(&ad.post_id, &ad.text, cfg));
        }
    }
    spans
}

/// Pools spans from any number of extractors into per-term candidates.
///
/// Every span is validated against the corpus: spans for unknown ads, spans
/// with offsets outside the ad text, and spans whose `surface` disagrees
/// with the text slice are dropped and counted. Surviving spans are grouped
/// by normalized term; each entry records one location per distinct
/// mentioning ad, ordered by post id, so the result does not depend on the
/// order extractors ran in.
pub fn union_candidates(corpus: &Corpus, spans: &[MentionSpan]) -> (CandidateSet, UnionReport) {
    let ads: HashMap<&str, (&str, GeoPoint)> = corpus
        .ads
        .iter()
        .map(|ad| (ad.post_id.as_str(), (ad.text.as_str(), ad.location)))
        .collect();

    let mut report = UnionReport::default();
    let mut pooled: BTreeMap<String, (Vec<MentionSpan>, BTreeSet<String>)> = BTreeMap::new();

    for span in spans {
        let Some(&(text, _)) = ads.get(span.post_id.as_str()) else {
            report.unknown_post += 1;
            continue;
        };
        let n_chars = text.chars().count();
        if span.start >= span.end || span.end > n_chars {
            report.bad_offsets += 1;
            continue;
        }
        let slice: String = text
            .chars()
            .skip(span.start)
            .take(span.end - span.start)
            .collect();
        if slice != span.surface {
            report.surface_mismatch += 1;
            continue;
        }
        let term = normalize_term(&span.surface);
        if term.is_empty() {
            report.empty_term += 1;
            continue;
        }
        let slot = pooled.entry(term).or_default();
        slot.0.push(span.clone());
        slot.1.insert(span.post_id.clone());
    }

    let entries = pooled
        .into_iter()
        .map(|(term, (mentions, posts))| {
            let post_ids: Vec<String> = posts.into_iter().collect();
            let points = post_ids.iter().map(|id| ads[id.as_str()].1).collect();
            (
                term.clone(),
                CandidateEntry {
                    term,
                    mentions,
                    post_ids,
                    points,
                },
            )
        })
        .collect();

    (CandidateSet { entries }, report)
}

// ---------------------------------------------------------------------------
// Candidate CSV
// ---------------------------------------------------------------------------

pub const CANDIDATES_HEADER: [&str; 4] = ["term", "post_id", "longitude", "latitude"];

/// Writes a candidate set as CSV, one row per (term, mentioning ad).
/// Coordinates use shortest round-trip formatting, so reading the file
/// back reproduces them exactly. Mention spans are not serialized.
pub fn write_candidates_csv<W: Write>(set: &CandidateSet, out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let io_err = |e: csv::Error| Error::InvalidInput(format!("csv write failed: {e}"));
    wtr.write_record(CANDIDATES_HEADER).map_err(io_err)?;
    for entry in set.entries.values() {
        for (post_id, point) in entry.post_ids.iter().zip(&entry.points) {
            wtr.write_record([
                entry.term.as_str(),
                post_id,
                &point.lon_deg.to_string(),
                &point.lat_deg.to_string(),
            ])
            .map_err(io_err)?;
        }
    }
    wtr.flush()
        .map_err(|e| Error::InvalidInput(format!("csv flush failed: {e}")))?;
    Ok(())
}

/// Reads a candidate CSV back into a [`CandidateSet`] (without mention
/// spans). Rows for the same term are grouped; a repeated (term, post_id)
/// pair keeps the first location.
pub fn read_candidates_csv<R: Read>(reader: R, origin: &Path) -> Result<CandidateSet> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Data {
            path: origin.to_path_buf(),
            message: format!("unreadable header: {e}"),
        })?
        .clone();
    if headers.iter().ne(CANDIDATES_HEADER.iter().copied()) {
        return Err(Error::Data {
            path: origin.to_path_buf(),
            message: format!(
                "malformed header `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut pooled: BTreeMap<String, BTreeMap<String, GeoPoint>> = BTreeMap::new();
    for (idx, rec) in rdr.records().enumerate() {
        let line = idx as u64 + 2;
        let parse_err = |msg: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            message: msg,
        };
        let rec = rec.map_err(|e| parse_err(format!("unparseable record: {e}")))?;
        let get = |i: usize| rec.get(i).unwrap_or("");
        let term = get(0).to_string();
        if term.is_empty() {
            return Err(parse_err("empty term".to_string()));
        }
        let lon: f64 = get(2).parse().map_err(|e| parse_err(format!("{e}")))?;
        let lat: f64 = get(3).parse().map_err(|e| parse_err(format!("{e}")))?;
        let point = GeoPoint::new(lat, lon).map_err(|e| parse_err(e.to_string()))?;
        pooled
            .entry(term)
            .or_default()
            .entry(get(1).to_string())
            .or_insert(point);
    }
    let entries = pooled
        .into_iter()
        .map(|(term, posts)| {
            let (post_ids, points) = posts.into_iter().unzip();
            (
                term.clone(),
                CandidateEntry {
                    term,
                    mentions: Vec::new(),
                    post_ids,
                    points,
                },
            )
        })
        .collect();
    Ok(CandidateSet { entries })
}
