//! Synthetic corpus generator for end-to-end validation.
//!
//! Plants a configurable number of fictional place names as tight spatial
//! clusters inside a region box, plus the same kind of mentions for "noise"
//! terms whose ads are scattered uniformly over the box. Every ad also gets
//! unanimous three-annotator ground truth: the planted term for cluster
//! ads, nothing for noise ads. A pipeline that works should recover the
//! planted names at low scores and push the noise terms toward 1.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::corpus::{write_ads_csv, Advertisement, Corpus};
use crate::error::{Error, Result};
use crate::eval::AnnotationRecord;
use crate::gazetteer::GAZETTEER_HEADER;
use crate::geo::{meters_per_degree, GeoPoint};

/// Center latitude of the synthetic region (an inland mid-latitude city,
/// so the longitude scale factor is materially below 1).
pub const REGION_CENTER_LAT: f64 = 43.615;
/// Center longitude of the synthetic region.
pub const REGION_CENTER_LON: f64 = -116.20;

const FIRSTS: [&str; 12] = [
    "North", "South", "East", "West", "Old", "New", "Upper", "Lower",
    "Royal", "Grand", "Silver", "Golden",
];
const SECONDS: [&str; 16] = [
    "Vista", "Park", "Heights", "Hollow", "Ridge", "Grove", "Meadows",
    "Crossing", "Landing", "Terrace", "Commons", "Gardens", "Point",
    "Harbor", "Glen", "Square",
];

/// Parameters of one synthetic corpus.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthSpec {
    /// Fictional place names planted as spatial clusters.
    pub n_place_terms: usize,
    /// Names mentioned equally often but scattered over the whole box.
    pub n_noise_terms: usize,
    /// Ads generated per term (one mention each, distinct ads).
    pub mentions_per_term: usize,
    /// Standard deviation, in meters per axis, of cluster ad positions
    /// around their place center.
    pub cluster_sigma_m: f64,
    /// Side length of the square region box, kilometers.
    pub region_box_km: f64,
    /// RNG seed; equal specs produce byte-identical corpora.
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_place_terms: 10,
            n_noise_terms: 10,
            mentions_per_term: 15,
            cluster_sigma_m: 300.0,
            region_box_km: 40.0,
            seed: 7,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_place_terms == 0 {
            return Err(Error::Config(
                "need at least one planted place term".to_string(),
            ));
        }
        if self.mentions_per_term == 0 {
            return Err(Error::Config(
                "need at least one mention per term".to_string(),
            ));
        }
        let pool = FIRSTS.len() * SECONDS.len();
        let wanted = self.n_place_terms + self.n_noise_terms;
        if wanted > pool {
            return Err(Error::Config(format!(
                "asked for {wanted} distinct terms but the name pool has {pool}"
            )));
        }
        if !self.cluster_sigma_m.is_finite() || self.cluster_sigma_m <= 0.0 {
            return Err(Error::Config(format!(
                "cluster_sigma_m must be positive, got {}",
                self.cluster_sigma_m
            )));
        }
        if !self.region_box_km.is_finite() || self.region_box_km <= 0.0 {
            return Err(Error::Config(format!(
                "region_box_km must be positive, got {}",
                self.region_box_km
            )));
        }
        Ok(())
    }
}

/// One planted cluster term.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedPlace {
    /// Normalized term, as the pipeline will report it.
    pub term: String,
    /// Display form as it appears in ad texts.
    pub display: String,
    /// True cluster center.
    pub center: GeoPoint,
}

/// The generated corpus plus everything needed to check answers.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub corpus: Corpus,
    /// Unanimous per-ad annotations from three synthetic annotators.
    pub records: Vec<AnnotationRecord>,
    pub places: Vec<PlantedPlace>,
    /// Normalized noise terms.
    pub noise_terms: Vec<String>,
}

fn ad_text(idx: usize, display: &str) -> String {
    let uid = format!("u{idx:04}");
    match idx % 3 {
        0 => format!(
            "unit {uid} available now. walking distance to {display}. \
             quiet street and fresh paint."
        ),
        1 => format!("unit {uid} just listed. minutes from {display}, with parking included."),
        _ => format!("unit {uid} cozy spot in {display}. utilities included monthly."),
    }
}

/// Generates a corpus per `spec`. Deterministic in the seed.
pub fn generate(spec: &SynthSpec) -> Result<SynthOutput> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut pool: Vec<String> = FIRSTS
        .iter()
        .flat_map(|f| SECONDS.iter().map(move |s| format!("{f} {s}")))
        .collect();
    pool.shuffle(&mut rng);
    let n_terms = spec.n_place_terms + spec.n_noise_terms;
    let displays: Vec<String> = pool.into_iter().take(n_terms).collect();

    let mpd = meters_per_degree();
    let cos0 = REGION_CENTER_LAT.to_radians().cos();
    let half_m = spec.region_box_km * 500.0;
    let half_lat = half_m / mpd;
    let half_lon = half_m / (mpd * cos0);

    // Cluster centers stay inside the inner 80% of the box so their
    // mention clouds don't straddle the edge.
    let centers: Vec<GeoPoint> = (0..spec.n_place_terms)
        .map(|_| {
            let lat = REGION_CENTER_LAT + rng.gen_range(-0.8 * half_lat..0.8 * half_lat);
            let lon = REGION_CENTER_LON + rng.gen_range(-0.8 * half_lon..0.8 * half_lon);
            GeoPoint::new(lat, lon)
        })
        .collect::<Result<_>>()?;

    let offset = Normal::new(0.0, spec.cluster_sigma_m)
        .map_err(|e| Error::Config(format!("bad cluster sigma: {e}")))?;
    let t0: DateTime<Utc> = Utc.with_ymd_and_hms(2026, 3, 1, 8, 0, 0).unwrap();

    let mut ads = Vec::new();
    let mut records = Vec::new();
    let mut idx = 0usize;
    for (term_idx, display) in displays.iter().enumerate() {
        let term = crate::extract::normalize_term(display);
        let names: BTreeSet<String> = if term_idx < spec.n_place_terms {
            std::iter::once(term.clone()).collect()
        } else {
            BTreeSet::new()
        };
        for _ in 0..spec.mentions_per_term {
            let location = if term_idx < spec.n_place_terms {
                let c = centers[term_idx];
                let east_m: f64 = offset.sample(&mut rng);
                let north_m: f64 = offset.sample(&mut rng);
                GeoPoint::new(
                    c.lat_deg + north_m / mpd,
                    c.lon_deg + east_m / (mpd * cos0),
                )?
            } else {
                GeoPoint::new(
                    REGION_CENTER_LAT + rng.gen_range(-half_lat..half_lat),
                    REGION_CENTER_LON + rng.gen_range(-half_lon..half_lon),
                )?
            };
            let post_id = format!("ad-{idx:05}");
            for annotator in ["a1", "a2", "a3"] {
                records.push(AnnotationRecord {
                    post_id: post_id.clone(),
                    annotator_id: annotator.to_string(),
                    names: names.clone(),
                });
            }
            ads.push(Advertisement {
                post_id,
                repost_id: None,
                post_time: t0 + Duration::seconds(idx as i64 * 137),
                location,
                text: ad_text(idx, display),
            });
            idx += 1;
        }
    }

    let places = displays[..spec.n_place_terms]
        .iter()
        .zip(&centers)
        .map(|(display, &center)| PlantedPlace {
            term: crate::extract::normalize_term(display),
            display: display.clone(),
            center,
        })
        .collect();
    let noise_terms = displays[spec.n_place_terms..]
        .iter()
        .map(|d| crate::extract::normalize_term(d))
        .collect();

    Ok(SynthOutput {
        corpus: Corpus {
            region_id: "synthetic".to_string(),
            ads,
        },
        records,
        places,
        noise_terms,
    })
}

/// Paths written by [`synth_to_dir`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthFiles {
    pub ads: PathBuf,
    pub ground_truth: PathBuf,
    pub centers: PathBuf,
}

#[derive(Serialize)]
struct JsonRecord<'a> {
    post_id: &'a str,
    annotator_id: &'a str,
    names: Vec<&'a str>,
}

/// Generates a corpus and writes it into `dir` as three files: `ads.csv`
/// (ingestable corpus), `ground_truth.jsonl` (annotator records), and
/// `centers.csv` (true cluster centers, in gazetteer schema with feature
/// type `planted`, usable as a known-good gazetteer).
pub fn synth_to_dir(spec: &SynthSpec, dir: &Path) -> Result<(SynthOutput, SynthFiles)> {
    let out = generate(spec)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let files = SynthFiles {
        ads: dir.join("ads.csv"),
        ground_truth: dir.join("ground_truth.jsonl"),
        centers: dir.join("centers.csv"),
    };

    let ads_file = std::fs::File::create(&files.ads).map_err(|e| Error::io(&files.ads, e))?;
    write_ads_csv(&out.corpus.ads, ads_file)?;

    let mut gt = std::io::BufWriter::new(
        std::fs::File::create(&files.ground_truth).map_err(|e| Error::io(&files.ground_truth, e))?,
    );
    for rec in &out.records {
        let row = JsonRecord {
            post_id: &rec.post_id,
            annotator_id: &rec.annotator_id,
            names: rec.names.iter().map(String::as_str).collect(),
        };
        let line = serde_json::to_string(&row)
            .map_err(|e| Error::Internal(format!("annotation record serialization: {e}")))?;
        gt.write_all(line.as_bytes())
            .and_then(|()| gt.write_all(b"\n"))
            .map_err(|e| Error::io(&files.ground_truth, e))?;
    }
    gt.flush().map_err(|e| Error::io(&files.ground_truth, e))?;

    let mut centers = csv::Writer::from_writer(
        std::fs::File::create(&files.centers).map_err(|e| Error::io(&files.centers, e))?,
    );
    centers
        .write_record(GAZETTEER_HEADER)
        .map_err(|e| Error::Internal(format!("centers csv: {e}")))?;
    for place in &out.places {
        centers
            .write_record([
                place.display.as_str(),
                &place.center.lat_deg.to_string(),
                &place.center.lon_deg.to_string(),
                "planted",
            ])
            .map_err(|e| Error::Internal(format!("centers csv: {e}")))?;
    }
    centers
        .flush()
        .map_err(|e| Error::io(&files.centers, e))?;

    Ok((out, files))
}
