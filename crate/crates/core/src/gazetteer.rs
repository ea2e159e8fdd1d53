//! Matching harvested place names against existing gazetteers.
//!
//! A harvested name is only interesting if the gazetteer does not already
//! know it. Each term is classified by the first rule that fires:
//! *direct* — its normalized form equals an entry's normalized name,
//! optionally ignoring spaces so spelling variants like "green belt" hit
//! "Greenbelt"; *indirect* — its token sequence appears contiguously
//! inside an entry's name tokens, the way "bsu" sits inside "Boise State
//! University (BSU) Education Building"; otherwise *unmatched*, the list
//! handed to a human for review since it may be a genuinely new place
//! name. Entry coordinates are loaded but play no part in matching.

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::Path;

use crate::corpus::RowSkip;
use crate::error::{Error, Result};
use crate::extract::normalize_term;
use crate::geo::GeoPoint;

/// One gazetteer row.
#[derive(Debug, Clone, PartialEq)]
pub struct GazetteerEntry {
    /// Name as it appears in the file.
    pub name: String,
    /// Normalized name used for direct matching.
    pub name_norm: String,
    /// Normalized name split on whitespace, each token stripped of edge
    /// punctuation, so "(BSU)" participates as the bare token "bsu".
    pub name_tokens: Vec<String>,
    pub location: Option<GeoPoint>,
    pub feature_type: Option<String>,
    /// Label of the gazetteer this entry came from.
    pub source: String,
}

/// Terms partitioned by match category. A term appears in exactly one
/// list, decided by rule order: direct, then indirect, then unmatched.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MatchReport {
    pub direct: Vec<(String, Vec<GazetteerEntry>)>,
    pub indirect: Vec<(String, Vec<GazetteerEntry>)>,
    /// Candidates for manual review — possibly new place names.
    pub unmatched: Vec<String>,
}

impl MatchReport {
    pub fn counts(&self) -> (usize, usize, usize) {
        (self.direct.len(), self.indirect.len(), self.unmatched.len())
    }
}

/// Loaded entries plus the rows that had to be skipped.
#[derive(Debug, Clone)]
pub struct GazetteerLoad {
    pub entries: Vec<GazetteerEntry>,
    pub skipped: Vec<RowSkip>,
}

pub const GAZETTEER_HEADER: [&str; 4] = ["name", "latitude", "longitude", "feature_type"];

/// Splits a normalized name into matching tokens: whitespace-separated,
/// each trimmed of non-alphanumeric edges, empties dropped.
pub fn name_tokens(name_norm: &str) -> Vec<String> {
    name_norm
        .split_whitespace()
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()).to_string())
        .filter(|t| !t.is_empty())
        .collect()
}

fn entry_from(name: &str, location: Option<GeoPoint>, feature_type: &str, source: &str) -> GazetteerEntry {
    let name_norm = normalize_term(name);
    let name_tokens = name_tokens(&name_norm);
    GazetteerEntry {
        name: name.to_string(),
        name_norm,
        name_tokens,
        location,
        feature_type: if feature_type.is_empty() {
            None
        } else {
            Some(feature_type.to_string())
        },
        source: source.to_string(),
    }
}

/// Loads a gazetteer CSV (`name,latitude,longitude,feature_type`;
/// coordinates may be empty). Rows with an empty name or unusable
/// coordinates are skipped and reported, not fatal.
pub fn load_gazetteer(path: &Path, source: &str) -> Result<GazetteerLoad> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_gazetteer_from(file, source, path)
}

/// [`load_gazetteer`] over any reader; `origin` names the source in
/// errors.
pub fn load_gazetteer_from<R: Read>(reader: R, source: &str, origin: &Path) -> Result<GazetteerLoad> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Data {
            path: origin.to_path_buf(),
            message: format!("unreadable header: {e}"),
        })?
        .clone();
    if headers.iter().ne(GAZETTEER_HEADER.iter().copied()) {
        return Err(Error::Data {
            path: origin.to_path_buf(),
            message: format!(
                "malformed header `{}` (expected `{}`)",
                headers.iter().collect::<Vec<_>>().join(","),
                GAZETTEER_HEADER.join(",")
            ),
        });
    }

    let mut entries = Vec::new();
    let mut skipped = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let line = idx as u64 + 2;
        let rec = match rec {
            Ok(rec) => rec,
            Err(e) => {
                skipped.push(RowSkip {
                    line,
                    reason: format!("unparseable row: {e}"),
                });
                continue;
            }
        };
        let get = |i: usize| rec.get(i).unwrap_or("").trim();
        let name = get(0);
        if name.is_empty() || normalize_term(name).is_empty() {
            skipped.push(RowSkip {
                line,
                reason: "empty name".to_string(),
            });
            continue;
        }
        let (lat_raw, lon_raw) = (get(1), get(2));
        let location = match (lat_raw.is_empty(), lon_raw.is_empty()) {
            (true, true) => None,
            (false, false) => {
                let parsed = lat_raw
                    .parse::<f64>()
                    .and_then(|lat| lon_raw.parse::<f64>().map(|lon| (lat, lon)));
                match parsed {
                    Ok((lat, lon)) => match GeoPoint::new(lat, lon) {
                        Ok(p) => Some(p),
                        Err(e) => {
                            skipped.push(RowSkip {
                                line,
                                reason: format!("bad coordinates: {e}"),
                            });
                            continue;
                        }
                    },
                    Err(e) => {
                        skipped.push(RowSkip {
                            line,
                            reason: format!("bad coordinates: {e}"),
                        });
                        continue;
                    }
                }
            }
            _ => {
                skipped.push(RowSkip {
                    line,
                    reason: "half-specified coordinates".to_string(),
                });
                continue;
            }
        };
        entries.push(entry_from(name, location, get(3), source));
    }
    Ok(GazetteerLoad { entries, skipped })
}

/// Entries whose normalized name equals the term. With
/// `space_insensitive`, equality is also tried after deleting all spaces
/// from both sides, catching one-word/two-word spelling variants.
pub fn direct_match<'a>(
    term: &str,
    entries: &'a [GazetteerEntry],
    space_insensitive: bool,
) -> Vec<&'a GazetteerEntry> {
    let squash = |s: &str| s.chars().filter(|c| !c.is_whitespace()).collect::<String>();
    let term_squashed = squash(term);
    entries
        .iter()
        .filter(|e| {
            e.name_norm == term
                || (space_insensitive && !term_squashed.is_empty() && squash(&e.name_norm) == term_squashed)
        })
        .collect()
}

/// Entries whose name tokens contain the term's token sequence as a
/// contiguous run. Single generic tokens ("park") match broadly by
/// design; the unmatched list, not this rule, is what gets human review.
pub fn indirect_match<'a>(term: &str, entries: &'a [GazetteerEntry]) -> Vec<&'a GazetteerEntry> {
    let term_tokens = name_tokens(term);
    if term_tokens.is_empty() {
        return Vec::new();
    }
    entries
        .iter()
        .filter(|e| {
            e.name_tokens.len() >= term_tokens.len()
                && e.name_tokens
                    .windows(term_tokens.len())
                    .any(|w| w == term_tokens.as_slice())
        })
        .collect()
}

/// Classifies every term by the first matching rule: direct, then
/// indirect, then unmatched. Report order follows term order; the
/// classification itself depends on neither term nor entry order.
pub fn compare(terms: &[String], entries: &[GazetteerEntry]) -> MatchReport {
    let mut report = MatchReport::default();
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    for term in terms {
        if !seen.insert(term.as_str()) {
            continue;
        }
        let direct = direct_match(term, entries, true);
        if !direct.is_empty() {
            report
                .direct
                .push((term.clone(), direct.into_iter().cloned().collect()));
            continue;
        }
        let indirect = indirect_match(term, entries);
        if !indirect.is_empty() {
            report
                .indirect
                .push((term.clone(), indirect.into_iter().cloned().collect()));
            continue;
        }
        report.unmatched.push(term.clone());
    }
    report
}

pub const MATCH_REPORT_HEADER: [&str; 4] = ["term", "category", "matched_name", "source"];

/// Writes a match report as CSV, one row per (term, matched entry) and
/// one bare row per unmatched term.
pub fn write_match_report_csv<W: Write>(report: &MatchReport, out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let io_err = |e: csv::Error| Error::InvalidInput(format!("csv write failed: {e}"));
    wtr.write_record(MATCH_REPORT_HEADER).map_err(io_err)?;
    for (category, matches) in [("direct", &report.direct), ("indirect", &report.indirect)] {
        for (term, entries) in matches {
            for entry in entries {
                wtr.write_record([term.as_str(), category, &entry.name, &entry.source])
                    .map_err(io_err)?;
            }
        }
    }
    for term in &report.unmatched {
        wtr.write_record([term.as_str(), "unmatched", "", ""])
            .map_err(io_err)?;
    }
    wtr.flush()
        .map_err(|e| Error::InvalidInput(format!("csv flush failed: {e}")))?;
    Ok(())
}
