//! Multi-scale geographic clusterness ranking.
//!
//! A term used as a real place name is mentioned by ads that huddle around
//! the place; a term that merely looks like a name is mentioned from all
//! over the region. To measure huddling without picking one magic radius,
//! each term's point set is examined across a ladder of distance thresholds
//! `r_k = alpha^k`. At each scale, points within `r_k` of each other are
//! connected, and the Shannon entropy (base 2) of the resulting
//! component-size distribution is recorded; the per-scale entropies are
//! summed until the set first becomes fully connected. Tightly clustered
//! sets collapse to one component within a few scales and accumulate little
//! entropy; dispersed sets stay fragmented across many scales and
//! accumulate a lot.
//!
//! Because the raw sum grows with the number of points, [`ssi`] can divide
//! it by a function of the point count — see [`NormalizationMode`].
//!
//! Before any of that, [`spatial_filter`] trims each term's long-distance
//! stragglers (geocoding noise, cross-town reposts): points farther from
//! the set's medoid than the third quartile of medoid distances are
//! dropped. [`rank_candidates`] runs the whole chain over a candidate set
//! and min-max normalizes the adjusted sums into comparable scores, lowest
//! (most clustered) first.

mod union_find;

pub use union_find::DisjointSet;

use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extract::CandidateSet;
use crate::geo::{haversine_m, GeoPoint};

/// Default ladder base: scales double starting at 2 m.
pub const DEFAULT_ALPHA_M: f64 = 2.0;

/// Default minimum filtered points for a term to be rankable.
pub const DEFAULT_MIN_POINTS: usize = 3;

// ---------------------------------------------------------------------------
// Scale ladder and normalization modes
// ---------------------------------------------------------------------------

/// Geometric ladder of distance thresholds `r_k = alpha^k`, k = 1, 2, ...
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleSet {
    alpha_m: f64,
}

impl ScaleSet {
    /// Requires `alpha > 1` so the ladder actually grows.
    pub fn new(alpha_m: f64) -> Result<ScaleSet> {
        if !alpha_m.is_finite() || alpha_m <= 1.0 {
            return Err(Error::Config(format!(
                "scale base alpha must be finite and > 1, got {alpha_m}"
            )));
        }
        Ok(ScaleSet { alpha_m })
    }

    pub fn alpha_m(&self) -> f64 {
        self.alpha_m
    }

    /// Threshold distance at scale index `k` (1-based), in meters.
    pub fn radius_m(&self, k: u32) -> f64 {
        self.alpha_m.powi(k as i32)
    }
}

impl Default for ScaleSet {
    fn default() -> Self {
        ScaleSet {
            alpha_m: DEFAULT_ALPHA_M,
        }
    }
}

/// How the raw entropy sum is discounted for point count `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationMode {
    /// Raw sum, no discount.
    None,
    /// Divide by `sqrt(n)`.
    InvSqrt,
    /// Divide by `n`.
    InvLinear,
    /// Divide by `log2(n)`; needs `n >= 2`.
    InvLog,
}

impl NormalizationMode {
    pub const ALL: [NormalizationMode; 4] = [
        NormalizationMode::None,
        NormalizationMode::InvSqrt,
        NormalizationMode::InvLinear,
        NormalizationMode::InvLog,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            NormalizationMode::None => "none",
            NormalizationMode::InvSqrt => "inv_sqrt",
            NormalizationMode::InvLinear => "inv_linear",
            NormalizationMode::InvLog => "inv_log",
        }
    }
}

impl FromStr for NormalizationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<NormalizationMode> {
        match s {
            "none" => Ok(NormalizationMode::None),
            "inv_sqrt" => Ok(NormalizationMode::InvSqrt),
            "inv_linear" => Ok(NormalizationMode::InvLinear),
            "inv_log" => Ok(NormalizationMode::InvLog),
            other => Err(Error::Config(format!(
                "unknown normalization mode `{other}` \
                 (expected none, inv_sqrt, inv_linear, or inv_log)"
            ))),
        }
    }
}

impl std::fmt::Display for NormalizationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Applies the count discount to a raw entropy sum. `n` must be at least 2
/// (log2(1) = 0 would divide by zero); rankable point sets always are.
pub fn apply_adjustment(entropy_sum: f64, n: usize, mode: NormalizationMode) -> f64 {
    debug_assert!(n >= 2, "adjustment needs n >= 2, got {n}");
    let n = n as f64;
    match mode {
        NormalizationMode::None => entropy_sum,
        NormalizationMode::InvSqrt => entropy_sum / n.sqrt(),
        NormalizationMode::InvLinear => entropy_sum / n,
        NormalizationMode::InvLog => entropy_sum / n.log2(),
    }
}

// ---------------------------------------------------------------------------
// Entropy
// ---------------------------------------------------------------------------

/// Shannon entropy (base 2) of the component-size distribution.
///
/// `sizes` are the connected-component sizes at one scale; they must be
/// positive and sum to `n`. Exactly 0.0 for a single component.
pub fn entropy_at_scale(sizes: &[usize], n: usize) -> Result<f64> {
    if n == 0 || sizes.is_empty() {
        return Err(Error::Internal(
            "entropy of an empty point set requested".to_string(),
        ));
    }
    if sizes.contains(&0) || sizes.iter().sum::<usize>() != n {
        return Err(Error::Internal(format!(
            "component sizes {sizes:?} do not partition {n} points"
        )));
    }
    let n = n as f64;
    let mut acc = 0.0;
    for &s in sizes {
        let p = s as f64 / n;
        acc += p * p.log2();
    }
    let e = -acc;
    // Normalize the -0.0 a fully-merged set produces.
    Ok(if e == 0.0 { 0.0 } else { e })
}

// ---------------------------------------------------------------------------
// Scale-structure evaluation
// ---------------------------------------------------------------------------

/// Clusterness measurements for one term.
#[derive(Debug, Clone, PartialEq)]
pub struct SsiResult {
    /// Normalized term (empty when [`ssi`] is called on bare points).
    pub term: String,
    /// Point count before spatial filtering.
    pub n_raw: usize,
    /// Point count actually measured.
    pub n_filtered: usize,
    /// `(k, entropy)` per scale, k ascending, ending at the first scale
    /// with a single component (whose entropy is exactly 0).
    pub entropies: Vec<(u32, f64)>,
    /// Sum of the per-scale entropies.
    pub entropy_sum: f64,
    /// `entropy_sum` after the count discount.
    pub adjusted_sum: f64,
    /// Min-max normalized `adjusted_sum`, set by [`rank_candidates`];
    /// 0 is most clustered.
    pub normalized_score: f64,
}

/// Measures multi-scale clusterness of a point set (at least 2 points).
///
/// Walks the scale ladder from k = 1, connecting pairs with distance
/// `<= radius_m(k)` incrementally in a disjoint-set forest, recording the
/// component-size entropy at every scale, and stopping at the first scale
/// where all points form one component. Coincident points connect at k = 1
/// like any pair within the first radius.
pub fn ssi(points: &[GeoPoint], scales: &ScaleSet, mode: NormalizationMode) -> Result<SsiResult> {
    let n = points.len();
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "clusterness needs at least 2 points, got {n}"
        )));
    }

    let mut edges = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            edges.push((haversine_m(points[i], points[j]), i, j));
        }
    }
    edges.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut ds = DisjointSet::new(n);
    let mut entropies = Vec::new();
    let mut entropy_sum = 0.0;
    let mut next_edge = 0;
    let mut k: u32 = 1;
    loop {
        let r = scales.radius_m(k);
        while next_edge < edges.len() && edges[next_edge].0 <= r {
            let (_, i, j) = edges[next_edge];
            ds.union(i, j);
            next_edge += 1;
        }
        let e = entropy_at_scale(&ds.component_sizes(), n)?;
        entropies.push((k, e));
        entropy_sum += e;
        if ds.components() == 1 {
            break;
        }
        k += 1;
    }

    let adjusted_sum = apply_adjustment(entropy_sum, n, mode);
    Ok(SsiResult {
        term: String::new(),
        n_raw: n,
        n_filtered: n,
        entropies,
        entropy_sum,
        adjusted_sum,
        normalized_score: 0.0,
    })
}

// ---------------------------------------------------------------------------
// Medoid and spatial filter
// ---------------------------------------------------------------------------

/// Index of the point minimizing the sum of great-circle distances to all
/// others; ties resolve to the lowest index.
pub fn medoid(points: &[GeoPoint]) -> Result<usize> {
    if points.is_empty() {
        return Err(Error::InvalidInput(
            "medoid of an empty point set requested".to_string(),
        ));
    }
    let mut best = 0;
    let mut best_sum = f64::INFINITY;
    for i in 0..points.len() {
        let mut sum = 0.0;
        for j in 0..points.len() {
            if i != j {
                sum += haversine_m(points[i], points[j]);
            }
        }
        if sum < best_sum {
            best_sum = sum;
            best = i;
        }
    }
    Ok(best)
}

/// Third quartile by linear interpolation between order statistics at
/// 1-based position `(n + 1) * 0.75`, clamped into `[1, n]`.
fn third_quartile(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    debug_assert!(n > 0);
    let h = ((n as f64 + 1.0) * 0.75).clamp(1.0, n as f64);
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if frac == 0.0 || lo >= n {
        sorted[lo - 1]
    } else {
        sorted[lo - 1] + frac * (sorted[lo] - sorted[lo - 1])
    }
}

/// Drops a term's long-distance stragglers before clusterness measurement.
///
/// Keeps exactly the points whose distance to the set's medoid is at most
/// the third quartile of all medoid distances, preserving input order. The
/// medoid itself (distance 0) always survives. Geocoding noise and
/// cross-town reposts land in the dropped quartile; they would otherwise
/// smear the scale structure of an actually-tight cluster.
pub fn spatial_filter(points: &[GeoPoint]) -> Result<Vec<GeoPoint>> {
    let m = medoid(points)?;
    let dists: Vec<f64> = points.iter().map(|&p| haversine_m(points[m], p)).collect();
    let mut sorted = dists.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let q3 = third_quartile(&sorted);
    Ok(points
        .iter()
        .zip(&dists)
        .filter(|(_, &d)| d <= q3)
        .map(|(&p, _)| p)
        .collect())
}

// ---------------------------------------------------------------------------
// Ranking
// ---------------------------------------------------------------------------

/// Measures every candidate term and ranks them most-clustered first.
///
/// Terms with fewer than `min_points` points after [`spatial_filter`] are
/// dropped. Adjusted sums are min-max normalized into `[0, 1]` (all 0 when
/// every term scored identically); the result is sorted by score ascending,
/// ties broken by larger filtered point count, then by term. Per-term
/// measurement is parallel, but the output is bit-identical regardless of
/// thread count.
pub fn rank_candidates(
    candidates: &CandidateSet,
    scales: &ScaleSet,
    mode: NormalizationMode,
    min_points: usize,
) -> Result<Vec<SsiResult>> {
    if min_points < 2 {
        return Err(Error::Config(format!(
            "min_points must be at least 2, got {min_points}"
        )));
    }

    let entries: Vec<_> = candidates.entries.values().collect();
    let mut results: Vec<SsiResult> = entries
        .par_iter()
        .map(|entry| -> Result<Option<SsiResult>> {
            if entry.points.is_empty() {
                return Ok(None);
            }
            let filtered = spatial_filter(&entry.points)?;
            if filtered.len() < min_points {
                return Ok(None);
            }
            let mut res = ssi(&filtered, scales, mode)?;
            res.term = entry.term.clone();
            res.n_raw = entry.points.len();
            res.n_filtered = filtered.len();
            Ok(res.into())
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    if results.is_empty() {
        return Ok(results);
    }

    let min = results
        .iter()
        .map(|r| r.adjusted_sum)
        .fold(f64::INFINITY, f64::min);
    let max = results
        .iter()
        .map(|r| r.adjusted_sum)
        .fold(f64::NEG_INFINITY, f64::max);
    for r in &mut results {
        r.normalized_score = if max > min {
            (r.adjusted_sum - min) / (max - min)
        } else {
            0.0
        };
    }

    results.sort_by(|a, b| {
        a.normalized_score
            .total_cmp(&b.normalized_score)
            .then_with(|| b.n_filtered.cmp(&a.n_filtered))
            .then_with(|| a.term.cmp(&b.term))
    });
    Ok(results)
}

// ---------------------------------------------------------------------------
// Ranked-output CSV
// ---------------------------------------------------------------------------

pub const RANKED_HEADER: [&str; 6] = [
    "term",
    "n_raw",
    "n_filtered",
    "entropy_sum",
    "adjusted_sum",
    "normalized_score",
];

/// Serializes a float losslessly (18 significant digits round-trip f64).
fn fmt_f64(x: f64) -> String {
    format!("{x:.17e}")
}

/// Writes ranked results as CSV. Floats carry 18 significant digits, so
/// reading the file back reproduces them exactly.
pub fn write_ranked_csv<W: Write>(results: &[SsiResult], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let io_err = |e: csv::Error| Error::InvalidInput(format!("csv write failed: {e}"));
    wtr.write_record(RANKED_HEADER).map_err(io_err)?;
    for r in results {
        wtr.write_record([
            r.term.as_str(),
            &r.n_raw.to_string(),
            &r.n_filtered.to_string(),
            &fmt_f64(r.entropy_sum),
            &fmt_f64(r.adjusted_sum),
            &fmt_f64(r.normalized_score),
        ])
        .map_err(io_err)?;
    }
    wtr.flush()
        .map_err(|e| Error::InvalidInput(format!("csv flush failed: {e}")))?;
    Ok(())
}

/// Reads a ranked CSV back. Per-scale entropies are not serialized, so
/// `entropies` comes back empty.
pub fn read_ranked_csv<R: Read>(reader: R, origin: &std::path::Path) -> Result<Vec<SsiResult>> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Data {
            path: origin.to_path_buf(),
            message: format!("unreadable header: {e}"),
        })?
        .clone();
    if headers.iter().ne(RANKED_HEADER.iter().copied()) {
        return Err(Error::Data {
            path: origin.to_path_buf(),
            message: format!("malformed header `{}`", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut out = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let line = idx as u64 + 2;
        let parse_err = |msg: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            message: msg,
        };
        let rec = rec.map_err(|e| parse_err(format!("unparseable record: {e}")))?;
        let get = |i: usize| rec.get(i).unwrap_or("");
        let num =
            |i: usize| -> Result<f64> { get(i).parse().map_err(|e| parse_err(format!("{e}"))) };
        let count = |i: usize| -> Result<usize> {
            get(i).parse().map_err(|e| parse_err(format!("{e}")))
        };
        out.push(SsiResult {
            term: get(0).to_string(),
            n_raw: count(1)?,
            n_filtered: count(2)?,
            entropies: Vec::new(),
            entropy_sum: num(3)?,
            adjusted_sum: num(4)?,
            normalized_score: num(5)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::CandidateEntry;
    use crate::geo::meters_per_degree;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    /// Point at metric east/north offsets from the equator origin.
    fn at_m(east: f64, north: f64) -> GeoPoint {
        let deg = meters_per_degree();
        GeoPoint::new(north / deg, east / deg).unwrap()
    }

    const LOG2_6: f64 = 2.584_962_500_721_156;
    const LOG2_6_OVER_SQRT_6: f64 = 1.055_306_521_832_604_3;

    // -- entropy -------------------------------------------------------------

    #[test]
    fn entropy_of_singletons_matches_closed_form() {
        assert_eq!(entropy_at_scale(&[1, 1, 1, 1], 4).unwrap(), 2.0);
        let e6 = entropy_at_scale(&[1; 6], 6).unwrap();
        assert!((e6 - LOG2_6).abs() < 1e-12, "got {e6}");
    }

    #[test]
    fn entropy_of_partial_merges() {
        assert_eq!(entropy_at_scale(&[2, 2], 4).unwrap(), 1.0);
        let e = entropy_at_scale(&[3, 1], 4).unwrap();
        assert!((e - 0.811_278_124_459_132_9).abs() < 1e-12, "got {e}");
        assert_eq!(entropy_at_scale(&[2, 1, 1], 4).unwrap(), 1.5);
    }

    #[test]
    fn entropy_of_single_component_is_exactly_zero() {
        let e = entropy_at_scale(&[7], 7).unwrap();
        assert_eq!(e, 0.0);
        assert!(e.is_sign_positive());
    }

    #[test]
    fn entropy_rejects_bad_partitions() {
        assert!(entropy_at_scale(&[2, 1], 4).is_err());
        assert!(entropy_at_scale(&[], 0).is_err());
        assert!(entropy_at_scale(&[0, 4], 4).is_err());
    }

    // -- adjustment ----------------------------------------------------------

    #[test]
    fn adjustment_worked_values() {
        let a = apply_adjustment(2.0, 4, NormalizationMode::InvSqrt);
        assert!((a - 1.0).abs() < 1e-12, "got {a}");
        let a = apply_adjustment(LOG2_6, 6, NormalizationMode::InvSqrt);
        assert!((a - LOG2_6_OVER_SQRT_6).abs() < 1e-12, "got {a}");
        assert_eq!(apply_adjustment(3.0, 8, NormalizationMode::None), 3.0);
        assert_eq!(apply_adjustment(3.0, 8, NormalizationMode::InvLinear), 0.375);
        assert_eq!(apply_adjustment(3.0, 8, NormalizationMode::InvLog), 1.0);
    }

    // -- scale ladder ----------------------------------------------------------

    #[test]
    fn scale_ladder_grows_geometrically() {
        let s = ScaleSet::default();
        assert_eq!(s.radius_m(1), 2.0);
        assert_eq!(s.radius_m(2), 4.0);
        assert_eq!(s.radius_m(10), 1024.0);
        assert!(ScaleSet::new(1.0).is_err());
        assert!(ScaleSet::new(0.5).is_err());
        assert!(ScaleSet::new(f64::NAN).is_err());
        assert!(ScaleSet::new(1.5).is_ok());
    }

    // -- ssi ----------------------------------------------------------------

    #[test]
    fn four_isolated_points_merging_at_second_scale() {
        // Square, circumradius 1.6 m: pairwise distances 2.26 and 3.2 m,
        // all above r_1 = 2 and at or below r_2 = 4.
        let pts = [at_m(1.6, 0.0), at_m(0.0, 1.6), at_m(-1.6, 0.0), at_m(0.0, -1.6)];
        let res = ssi(&pts, &ScaleSet::default(), NormalizationMode::InvSqrt).unwrap();
        assert_eq!(res.entropies.len(), 2);
        assert_eq!(res.entropies[0], (1, 2.0));
        assert_eq!(res.entropies[1], (2, 0.0));
        assert_eq!(res.entropy_sum, 2.0);
        assert!((res.adjusted_sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn six_isolated_points_merging_at_second_scale() {
        // Regular pentagon (circumradius 2.05 m) plus its center: minimum
        // pairwise distance 2.05 m > r_1, maximum 3.90 m <= r_2.
        let mut pts = vec![at_m(0.0, 0.0)];
        for i in 0..5 {
            let theta = 2.0 * std::f64::consts::PI * i as f64 / 5.0;
            pts.push(at_m(2.05 * theta.cos(), 2.05 * theta.sin()));
        }
        let res = ssi(&pts, &ScaleSet::default(), NormalizationMode::InvSqrt).unwrap();
        assert!((res.entropy_sum - LOG2_6).abs() < 1e-9, "sum {}", res.entropy_sum);
        assert!(
            (res.adjusted_sum - LOG2_6_OVER_SQRT_6).abs() < 1e-9,
            "adjusted {}",
            res.adjusted_sum
        );
    }

    #[test]
    fn two_pairs_then_full_merge() {
        let pts = [at_m(0.0, 0.0), at_m(1.0, 0.0), at_m(3.5, 0.0), at_m(4.5, 0.0)];
        let res = ssi(&pts, &ScaleSet::default(), NormalizationMode::None).unwrap();
        assert_eq!(res.entropies, vec![(1, 1.0), (2, 0.0)]);
        assert_eq!(res.entropy_sum, 1.0);
    }

    #[test]
    fn points_within_first_radius_have_zero_sum_under_every_mode() {
        let pts = [at_m(0.0, 0.0), at_m(0.5, 0.0), at_m(1.0, 0.0)];
        for mode in NormalizationMode::ALL {
            let res = ssi(&pts, &ScaleSet::default(), mode).unwrap();
            assert_eq!(res.entropy_sum, 0.0, "mode {mode}");
            assert_eq!(res.adjusted_sum, 0.0, "mode {mode}");
            assert_eq!(res.entropies, vec![(1, 0.0)], "mode {mode}");
        }
    }

    #[test]
    fn coincident_points_connect_at_first_scale() {
        let pts = [at_m(0.0, 0.0), at_m(0.0, 0.0), at_m(100.0, 0.0)];
        let res = ssi(&pts, &ScaleSet::default(), NormalizationMode::None).unwrap();
        // k = 1: sizes {2, 1} → entropy of the (2/3, 1/3) split.
        let e1 = res.entropies[0].1;
        assert!((e1 - 0.918_295_834_054_489_6).abs() < 1e-12, "got {e1}");
    }

    #[test]
    fn ssi_rejects_tiny_sets() {
        assert!(ssi(&[], &ScaleSet::default(), NormalizationMode::None).is_err());
        assert!(ssi(&[at_m(0.0, 0.0)], &ScaleSet::default(), NormalizationMode::None).is_err());
    }

    #[test]
    fn per_scale_entropy_never_increases() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n = rng.gen_range(2..=12);
            let pts: Vec<GeoPoint> = (0..n)
                .map(|_| at_m(rng.gen_range(-5e4..5e4), rng.gen_range(-5e4..5e4)))
                .collect();
            let res = ssi(&pts, &ScaleSet::default(), NormalizationMode::None).unwrap();
            for w in res.entropies.windows(2) {
                assert!(w[1].1 <= w[0].1 + 1e-12, "entropies {:?}", res.entropies);
            }
            let last = res.entropies.last().unwrap();
            assert_eq!(last.1, 0.0);
            let sum: f64 = res.entropies.iter().map(|(_, e)| e).sum();
            assert_eq!(sum, res.entropy_sum);
        }
    }

    #[test]
    fn adjustment_identity_within_one_ulp() {
        // Division then multiplication can be off by one ulp in IEEE 754,
        // never more.
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..200 {
            let n = rng.gen_range(2usize..=40);
            let pts: Vec<GeoPoint> = (0..n)
                .map(|_| at_m(rng.gen_range(-2e4..2e4), rng.gen_range(-2e4..2e4)))
                .collect();
            let res = ssi(&pts, &ScaleSet::default(), NormalizationMode::InvSqrt).unwrap();
            let back = res.adjusted_sum * (n as f64).sqrt();
            let tol = res.entropy_sum * f64::EPSILON;
            assert!(
                (back - res.entropy_sum).abs() <= tol,
                "n={n} sum={} back={back}",
                res.entropy_sum
            );
        }
    }

    #[test]
    fn entropy_sum_invariant_under_translation_away_from_thresholds() {
        let scales = ScaleSet::default();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut tested = 0;
        'outer: for _ in 0..200 {
            let n = rng.gen_range(3..=10);
            let pts: Vec<GeoPoint> = (0..n)
                .map(|_| at_m(rng.gen_range(-1e4..1e4), rng.gen_range(-1e4..1e4)))
                .collect();
            // Rotating both points around the pole preserves pairwise
            // distances exactly; only the last-bit rounding of the shifted
            // longitudes can move a distance across a threshold. Skip the
            // (measure-zero-ish) sets with a pair sitting within a sliver
            // of a threshold radius.
            for i in 0..pts.len() {
                for j in (i + 1)..pts.len() {
                    let d = haversine_m(pts[i], pts[j]);
                    let k = d.log2().round();
                    for k in [k - 1.0, k, k + 1.0] {
                        let r = 2f64.powf(k);
                        if r > 0.0 && (d - r).abs() < 1e-6 * r {
                            continue 'outer;
                        }
                    }
                }
            }
            let base = ssi(&pts, &scales, NormalizationMode::None).unwrap();
            let shifted: Vec<GeoPoint> = pts
                .iter()
                .map(|p| GeoPoint::new(p.lat_deg, p.lon_deg + 0.5).unwrap())
                .collect();
            let moved = ssi(&shifted, &scales, NormalizationMode::None).unwrap();
            assert_eq!(base.entropy_sum, moved.entropy_sum);
            assert_eq!(base.entropies, moved.entropies);
            tested += 1;
        }
        assert!(tested >= 150, "only {tested} sets were eligible");
    }

    // -- brute-force cross-check ----------------------------------------------

    /// Per-scale BFS components, recomputed from scratch at every scale.
    fn ssi_brute_force(points: &[GeoPoint], scales: &ScaleSet) -> Vec<(u32, f64)> {
        let n = points.len();
        let mut out = Vec::new();
        let mut k = 1u32;
        loop {
            let r = scales.radius_m(k);
            let mut seen = vec![false; n];
            let mut sizes = Vec::new();
            for start in 0..n {
                if seen[start] {
                    continue;
                }
                let mut queue = vec![start];
                seen[start] = true;
                let mut size = 0usize;
                while let Some(i) = queue.pop() {
                    size += 1;
                    for j in 0..n {
                        if !seen[j] && haversine_m(points[i], points[j]) <= r {
                            seen[j] = true;
                            queue.push(j);
                        }
                    }
                }
                sizes.push(size);
            }
            sizes.sort_unstable();
            let e = entropy_at_scale(&sizes, n).unwrap();
            out.push((k, e));
            if sizes.len() == 1 {
                break;
            }
            k += 1;
        }
        out
    }

    #[test]
    fn union_find_ladder_matches_per_scale_bfs() {
        let scales = ScaleSet::default();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..50 {
            let n = rng.gen_range(2..=12);
            let pts: Vec<GeoPoint> = (0..n)
                .map(|_| at_m(rng.gen_range(-5e4..5e4), rng.gen_range(-5e4..5e4)))
                .collect();
            let fast = ssi(&pts, &scales, NormalizationMode::None).unwrap();
            let slow = ssi_brute_force(&pts, &scales);
            assert_eq!(fast.entropies.len(), slow.len());
            for ((k1, e1), (k2, e2)) in fast.entropies.iter().zip(&slow) {
                assert_eq!(k1, k2);
                assert!((e1 - e2).abs() <= 1e-9, "k={k1} fast={e1} slow={e2}");
            }
        }
    }

    // -- medoid and spatial filter ---------------------------------------------

    #[test]
    fn medoid_of_collinear_triple_is_the_middle() {
        let pts = [at_m(0.0, 0.0), at_m(100.0, 0.0), at_m(300.0, 0.0)];
        assert_eq!(medoid(&pts).unwrap(), 1);
    }

    #[test]
    fn medoid_of_singleton_is_itself() {
        assert_eq!(medoid(&[at_m(5.0, 5.0)]).unwrap(), 0);
        assert!(medoid(&[]).is_err());
    }

    #[test]
    fn medoid_tie_takes_lowest_index() {
        let pts = [at_m(0.0, 0.0), at_m(10.0, 0.0)];
        assert_eq!(medoid(&pts).unwrap(), 0);
    }

    #[test]
    fn medoid_matches_brute_force_on_random_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..100 {
            let n = rng.gen_range(1..=9);
            let pts: Vec<GeoPoint> = (0..n)
                .map(|_| at_m(rng.gen_range(-1e4..1e4), rng.gen_range(-1e4..1e4)))
                .collect();
            let mut best = 0;
            let mut best_sum = f64::INFINITY;
            for i in 0..pts.len() {
                let sum: f64 = pts.iter().map(|&p| haversine_m(pts[i], p)).sum();
                if sum < best_sum {
                    best_sum = sum;
                    best = i;
                }
            }
            assert_eq!(medoid(&pts).unwrap(), best);
        }
    }

    #[test]
    fn filter_drops_the_far_quartile() {
        // Distances from the medoid (index 0): 0, 10, 20, 1000. The third
        // quartile interpolates to 755, so the 1000 m straggler goes. The
        // straggler sits off the cluster's axis: on a line the two middle
        // points would tie for the distance-sum minimum.
        let pts = [at_m(0.0, 0.0), at_m(10.0, 0.0), at_m(-20.0, 0.0), at_m(0.0, 1000.0)];
        assert_eq!(medoid(&pts).unwrap(), 0);
        let kept = spatial_filter(&pts).unwrap();
        assert_eq!(kept, vec![pts[0], pts[1], pts[2]]);
    }

    #[test]
    fn filter_keeps_single_points_and_duplicates() {
        let kept = spatial_filter(&[at_m(1.0, 1.0)]).unwrap();
        assert_eq!(kept.len(), 1);

        let dup = [at_m(1.0, 1.0); 4];
        assert_eq!(spatial_filter(&dup).unwrap().len(), 4);
    }

    #[test]
    fn filter_preserves_input_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let pts: Vec<GeoPoint> = (0..20)
            .map(|_| at_m(rng.gen_range(-500.0..500.0), rng.gen_range(-500.0..500.0)))
            .collect();
        let kept = spatial_filter(&pts).unwrap();
        let mut cursor = 0;
        for k in &kept {
            let pos = pts[cursor..].iter().position(|p| p == k).unwrap();
            cursor += pos + 1;
        }
    }

    #[test]
    fn filter_retention_matches_independent_quantile() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..200 {
            let n = rng.gen_range(1..=25);
            let pts: Vec<GeoPoint> = (0..n)
                .map(|_| at_m(rng.gen_range(-2e4..2e4), rng.gen_range(-2e4..2e4)))
                .collect();
            let m = medoid(&pts).unwrap();
            let dists: Vec<f64> = pts.iter().map(|&p| haversine_m(pts[m], p)).collect();
            let mut sorted = dists.clone();
            sorted.sort_by(|a, b| a.total_cmp(b));
            // Independent quantile: same definition, separate arithmetic.
            let h = ((n as f64 + 1.0) * 0.75).min(n as f64).max(1.0);
            let idx = h.floor() as usize - 1;
            let q3 = if h.fract() == 0.0 || idx + 1 >= n {
                sorted[idx]
            } else {
                sorted[idx] * (1.0 - h.fract()) + sorted[idx + 1] * h.fract()
            };
            let expect: Vec<GeoPoint> = pts
                .iter()
                .zip(&dists)
                .filter(|(_, &d)| d <= q3)
                .map(|(&p, _)| p)
                .collect();
            let got = spatial_filter(&pts).unwrap();
            // The two quantile computations can differ by float rounding
            // only when a distance sits exactly on the boundary; random
            // continuous inputs never do.
            assert_eq!(got, expect, "n={n}");
        }
    }

    // -- rank_candidates -------------------------------------------------------

    fn entry(term: &str, points: Vec<GeoPoint>) -> (String, CandidateEntry) {
        let post_ids = (0..points.len()).map(|i| format!("{term}-{i}")).collect();
        (
            term.to_string(),
            CandidateEntry {
                term: term.to_string(),
                mentions: Vec::new(),
                post_ids,
                points,
            },
        )
    }

    fn set_of(entries: Vec<(String, CandidateEntry)>) -> CandidateSet {
        CandidateSet {
            entries: entries.into_iter().collect::<BTreeMap<_, _>>(),
        }
    }

    #[test]
    fn too_small_candidates_never_appear() {
        let clustered: Vec<GeoPoint> = (0..6).map(|i| at_m(i as f64, 0.0)).collect();
        let set = set_of(vec![
            entry("tiny", vec![at_m(0.0, 0.0), at_m(5.0, 0.0)]),
            entry("solid", clustered),
        ]);
        let ranked = rank_candidates(
            &set,
            &ScaleSet::default(),
            NormalizationMode::InvSqrt,
            DEFAULT_MIN_POINTS,
        )
        .unwrap();
        assert_eq!(ranked.len(), 1);
        assert_eq!(ranked[0].term, "solid");
    }

    #[test]
    fn clustered_term_scores_below_dispersed_term() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let tight: Vec<GeoPoint> = (0..30)
            .map(|_| at_m(rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0)))
            .collect();
        let spread: Vec<GeoPoint> = (0..30)
            .map(|_| at_m(rng.gen_range(-2e4..2e4), rng.gen_range(-2e4..2e4)))
            .collect();
        for mode in NormalizationMode::ALL {
            let set = set_of(vec![
                entry("plaza", tight.clone()),
                entry("whatever", spread.clone()),
            ]);
            let ranked = rank_candidates(&set, &ScaleSet::default(), mode, 3).unwrap();
            assert_eq!(ranked[0].term, "plaza", "mode {mode}");
            assert_eq!(ranked[0].normalized_score, 0.0, "mode {mode}");
            assert_eq!(ranked[1].normalized_score, 1.0, "mode {mode}");
        }
    }

    #[test]
    fn identical_adjusted_sums_normalize_to_zero() {
        let pts = vec![at_m(0.0, 0.0), at_m(3.0, 0.0), at_m(6.0, 0.0)];
        let set = set_of(vec![entry("one", pts.clone()), entry("two", pts)]);
        let ranked =
            rank_candidates(&set, &ScaleSet::default(), NormalizationMode::None, 3).unwrap();
        assert!(ranked.iter().all(|r| r.normalized_score == 0.0));
    }

    #[test]
    fn ties_order_by_size_then_term() {
        // All-coincident sets have zero entropy sum whatever their size,
        // so every entry ties at score 0.
        let coin = |n: usize| vec![at_m(0.0, 0.0); n];
        let set = set_of(vec![
            entry("gamma", coin(3)),
            entry("alpha", coin(3)),
            entry("beta", coin(5)),
        ]);
        let ranked =
            rank_candidates(&set, &ScaleSet::default(), NormalizationMode::None, 3).unwrap();
        let order: Vec<&str> = ranked.iter().map(|r| r.term.as_str()).collect();
        assert_eq!(order, vec!["beta", "alpha", "gamma"]);
    }

    #[test]
    fn scores_span_the_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let mut entries = Vec::new();
        for t in 0..8 {
            let spread = 10f64.powi(t % 5);
            let pts: Vec<GeoPoint> = (0..10)
                .map(|_| {
                    at_m(
                        rng.gen_range(-spread..spread),
                        rng.gen_range(-spread..spread),
                    )
                })
                .collect();
            entries.push(entry(&format!("t{t}"), pts));
        }
        let ranked = rank_candidates(
            &set_of(entries),
            &ScaleSet::default(),
            NormalizationMode::InvSqrt,
            3,
        )
        .unwrap();
        assert!(ranked.iter().all(|r| (0.0..=1.0).contains(&r.normalized_score)));
        assert_eq!(ranked.first().unwrap().normalized_score, 0.0);
        assert_eq!(ranked.last().unwrap().normalized_score, 1.0);
    }

    #[test]
    fn min_points_below_two_is_rejected() {
        let set = set_of(vec![entry("x", vec![at_m(0.0, 0.0); 3])]);
        assert!(matches!(
            rank_candidates(&set, &ScaleSet::default(), NormalizationMode::None, 1),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn ranked_csv_roundtrips_exactly() {
        let set = set_of(vec![
            entry("plaza", (0..5).map(|i| at_m(i as f64 * 3.0, 0.0)).collect()),
            entry("park", (0..4).map(|i| at_m(0.0, i as f64 * 7.0)).collect()),
        ]);
        let ranked =
            rank_candidates(&set, &ScaleSet::default(), NormalizationMode::InvSqrt, 3).unwrap();
        let mut buf = Vec::new();
        write_ranked_csv(&ranked, &mut buf).unwrap();
        let back = read_ranked_csv(buf.as_slice(), std::path::Path::new("t.csv")).unwrap();
        assert_eq!(back.len(), ranked.len());
        for (a, b) in ranked.iter().zip(&back) {
            assert_eq!(a.term, b.term);
            assert_eq!(a.n_raw, b.n_raw);
            assert_eq!(a.n_filtered, b.n_filtered);
            assert_eq!(a.entropy_sum, b.entropy_sum);
            assert_eq!(a.adjusted_sum, b.adjusted_sum);
            assert_eq!(a.normalized_score, b.normalized_score);
        }
    }
}
