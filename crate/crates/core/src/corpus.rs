//! Corpus loading and duplicate collapsing for geotagged rental ads.
//!
//! Input is RFC 4180 CSV with the exact header
//! `post_id,repost_id,post_time,longitude,latitude,text`. Rows that cannot
//! be used (missing/invalid coordinates, bad timestamps, empty ids or texts)
//! are skipped and reported with their line numbers rather than aborting the
//! load; the load only fails outright when the header is wrong, the file is
//! unreadable, or every data row is unusable.
//!
//! Listing sites re-publish ads aggressively, so [`dedup`] collapses the two
//! dominant duplicate shapes: explicit reposts (an ad carrying the id of an
//! earlier ad as its `repost_id`) and copy-paste duplicates (ads sharing
//! their first fifty characters of raw text). The earliest posting always
//! wins, and the result is independent of input order.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDateTime, SecondsFormat, Utc};

use crate::error::{Error, Result};
use crate::geo::GeoPoint;

/// Number of leading characters (Unicode scalar values) compared when
/// collapsing copy-paste duplicates.
pub const DUP_PREFIX_CHARS: usize = 50;

pub const ADS_HEADER: [&str; 6] = [
    "post_id",
    "repost_id",
    "post_time",
    "longitude",
    "latitude",
    "text",
];

/// One geotagged rental advertisement.
#[derive(Debug, Clone, PartialEq)]
pub struct Advertisement {
    pub post_id: String,
    /// Id of the ad this one re-publishes, when the site reported one.
    pub repost_id: Option<String>,
    pub post_time: DateTime<Utc>,
    pub location: GeoPoint,
    pub text: String,
}

/// A named collection of ads from one region.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub region_id: String,
    pub ads: Vec<Advertisement>,
}

/// A data row that could not be turned into an [`Advertisement`].
#[derive(Debug, Clone, PartialEq)]
pub struct RowSkip {
    /// 1-based line number in the source file.
    pub line: u64,
    pub reason: String,
}

/// Result of loading an ads file: the usable rows plus skip diagnostics.
#[derive(Debug, Clone)]
pub struct CorpusLoad {
    pub corpus: Corpus,
    pub skipped: Vec<RowSkip>,
}

/// Loads an ads CSV file. See the module docs for the error policy.
pub fn load_corpus(path: &Path, region_id: &str) -> Result<CorpusLoad> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_corpus_from(file, region_id, path)
}

/// Loads an ads CSV from any reader; `origin` names the source in errors.
pub fn load_corpus_from<R: Read>(
    reader: R,
    region_id: &str,
    origin: &Path,
) -> Result<CorpusLoad> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);

    let headers = rdr
        .headers()
        .map_err(|e| Error::Data {
            path: origin.to_path_buf(),
            message: format!("unreadable header: {e}"),
        })?
        .clone();
    if headers.iter().ne(ADS_HEADER.iter().copied()) {
        return Err(Error::Data {
            path: origin.to_path_buf(),
            message: format!(
                "malformed header: expected `{}`, found `{}`",
                ADS_HEADER.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }

    let mut ads = Vec::new();
    let mut skipped = Vec::new();
    let mut rows_seen: u64 = 0;

    for (idx, record) in rdr.records().enumerate() {
        rows_seen += 1;
        // Fall back to a 1-based data-row count when the reader cannot
        // report a file position (it always can for real files).
        let line_of = |rec: &Option<csv::Position>| {
            rec.as_ref().map(|p| p.line()).unwrap_or(idx as u64 + 2)
        };
        match record {
            Err(e) => {
                skipped.push(RowSkip {
                    line: line_of(&e.position().cloned()),
                    reason: format!("unparseable record: {e}"),
                });
            }
            Ok(rec) => {
                let line = line_of(&rec.position().cloned());
                match parse_row(&rec) {
                    Ok(ad) => ads.push(ad),
                    Err(reason) => skipped.push(RowSkip { line, reason }),
                }
            }
        }
    }

    if rows_seen > 0 && ads.is_empty() {
        return Err(Error::Data {
            path: origin.to_path_buf(),
            message: format!("all {rows_seen} data rows were unusable"),
        });
    }

    Ok(CorpusLoad {
        corpus: Corpus {
            region_id: region_id.to_string(),
            ads,
        },
        skipped,
    })
}

fn parse_row(rec: &csv::StringRecord) -> std::result::Result<Advertisement, String> {
    let field = |i: usize| rec.get(i).unwrap_or("");

    let post_id = field(0).trim();
    if post_id.is_empty() {
        return Err("empty post_id".to_string());
    }
    let repost_id = match field(1).trim() {
        "" => None,
        other => Some(other.to_string()),
    };
    let post_time = parse_time(field(2).trim())?;
    let lon = parse_coord(field(3), "longitude")?;
    let lat = parse_coord(field(4), "latitude")?;
    let location =
        GeoPoint::new(lat, lon).map_err(|e| format!("invalid coordinates: {e}"))?;
    let text = field(5);
    if text.trim().is_empty() {
        return Err("empty text".to_string());
    }

    Ok(Advertisement {
        post_id: post_id.to_string(),
        repost_id,
        post_time,
        location,
        text: text.to_string(),
    })
}

fn parse_time(s: &str) -> std::result::Result<DateTime<Utc>, String> {
    if s.is_empty() {
        return Err("missing post_time".to_string());
    }
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Ok(t.with_timezone(&Utc));
    }
    // Offset-free ISO timestamps are treated as UTC.
    if let Ok(t) = NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S") {
        return Ok(t.and_utc());
    }
    Err(format!("unparseable post_time `{s}`"))
}

fn parse_coord(raw: &str, what: &str) -> std::result::Result<f64, String> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Err(format!("missing {what}"));
    }
    raw.parse::<f64>()
        .map_err(|_| format!("unparseable {what} `{raw}`"))
}

/// Writes ads in the same CSV schema [`load_corpus`] reads.
///
/// Coordinates are written with shortest round-trip formatting, so a
/// write/load cycle reproduces the ads exactly.
pub fn write_ads_csv<W: Write>(ads: &[Advertisement], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let io_err = |e: csv::Error| Error::InvalidInput(format!("csv write failed: {e}"));
    wtr.write_record(ADS_HEADER).map_err(io_err)?;
    for ad in ads {
        wtr.write_record([
            ad.post_id.as_str(),
            ad.repost_id.as_deref().unwrap_or(""),
            &ad.post_time.to_rfc3339_opts(SecondsFormat::Secs, true),
            &format!("{}", ad.location.lon_deg),
            &format!("{}", ad.location.lat_deg),
            ad.text.as_str(),
        ])
        .map_err(io_err)?;
    }
    wtr.flush().map_err(|e| Error::InvalidInput(format!("csv flush failed: {e}")))?;
    Ok(())
}

fn text_prefix(text: &str) -> String {
    text.chars().take(DUP_PREFIX_CHARS).collect()
}

/// Collapses reposts and copy-paste duplicates; the earliest ad wins.
///
/// Ads are visited in (post_time, post_id) order. An ad is dropped when its
/// id was already claimed (as post_id or repost_id) by a retained ad, when
/// its repost_id points at a retained ad, or when its first
/// [`DUP_PREFIX_CHARS`] characters of raw text match a retained ad's.
/// The pass is idempotent and insensitive to the input ordering; retained
/// ads come back sorted by posting time.
pub fn dedup(corpus: &Corpus) -> Corpus {
    let mut order: Vec<&Advertisement> = corpus.ads.iter().collect();
    order.sort_by(|a, b| {
        a.post_time
            .cmp(&b.post_time)
            .then_with(|| a.post_id.cmp(&b.post_id))
            .then_with(|| a.repost_id.cmp(&b.repost_id))
            .then_with(|| a.text.cmp(&b.text))
    });

    let mut seen_ids: HashSet<&str> = HashSet::new();
    let mut seen_prefixes: HashSet<String> = HashSet::new();
    let mut kept: Vec<Advertisement> = Vec::new();

    for ad in order {
        if seen_ids.contains(ad.post_id.as_str()) {
            continue;
        }
        if let Some(repost) = &ad.repost_id {
            if seen_ids.contains(repost.as_str()) {
                continue;
            }
        }
        let prefix = text_prefix(&ad.text);
        if seen_prefixes.contains(&prefix) {
            continue;
        }

        seen_ids.insert(&ad.post_id);
        if let Some(repost) = &ad.repost_id {
            seen_ids.insert(repost);
        }
        seen_prefixes.insert(prefix);
        kept.push(ad.clone());
    }

    Corpus {
        region_id: corpus.region_id.clone(),
        ads: kept,
    }
}
