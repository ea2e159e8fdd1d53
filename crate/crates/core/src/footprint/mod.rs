//! Rough spatial footprints for extracted place names.
//!
//! Given the geotagged mentions of one place name, two footprint shapes
//! can be built: the convex hull of the points ([`hull::convex_hull`]) and
//! a kernel-density contour enclosing most of the estimated density mass
//! ([`kde::kde_surface`] + [`kde::kde_contour`]). Both are computed in a
//! local equirectangular plane around the point set (longitude scaled by
//! the cosine of the mean latitude), which is accurate at city scale; the
//! projection refuses work above 85° latitude or for extents over 500 km,
//! where the flat-plane approximation breaks down. [`to_geojson`] packages
//! named footprints as a GeoJSON FeatureCollection, degrading degenerate
//! (collinear or coincident) point sets to MultiPoint features instead of
//! failing the batch.

pub mod hull;
pub mod kde;

pub use hull::convex_hull;
pub use kde::{kde_contour, kde_surface, DensityGrid};

use std::io::Write;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::geo::{meters_per_degree, GeoPoint};

/// Highest latitude at which the local planar approximation is accepted.
pub const MAX_PLANE_LAT_DEG: f64 = 85.0;

/// Largest point-set extent (either axis) the local plane accepts.
pub const MAX_PLANE_EXTENT_M: f64 = 500_000.0;

// ---------------------------------------------------------------------------
// Polygon
// ---------------------------------------------------------------------------

/// A simple polygon as an open ring: the first vertex is not repeated at
/// the end, vertices run counterclockwise in the lon/lat plane.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    pub ring: Vec<GeoPoint>,
}

impl Polygon {
    /// Validates vertex count, openness, and counterclockwise orientation.
    pub fn new(ring: Vec<GeoPoint>) -> Result<Polygon> {
        if ring.len() < 3 {
            return Err(Error::DegenerateGeometry(format!(
                "polygon needs at least 3 vertices, got {}",
                ring.len()
            )));
        }
        if ring.first() == ring.last() {
            return Err(Error::InvalidInput(
                "polygon ring must be open (first vertex not repeated)".to_string(),
            ));
        }
        if shoelace_deg(&ring) <= 0.0 {
            return Err(Error::InvalidInput(
                "polygon ring must be counterclockwise".to_string(),
            ));
        }
        Ok(Polygon { ring })
    }
}

/// Twice the signed area of a ring in the (lon, lat) degree plane;
/// positive for counterclockwise.
pub(crate) fn shoelace_deg(ring: &[GeoPoint]) -> f64 {
    let mut acc = 0.0;
    for i in 0..ring.len() {
        let a = ring[i];
        let b = ring[(i + 1) % ring.len()];
        acc += a.lon_deg * b.lat_deg - b.lon_deg * a.lat_deg;
    }
    acc
}

/// Even-odd containment test in the (lon, lat) degree plane. Points
/// exactly on an edge may land on either side; use [`convex_contains`]
/// when boundary tolerance matters.
pub fn polygon_contains(poly: &Polygon, p: GeoPoint) -> bool {
    let ring = &poly.ring;
    let (x, y) = (p.lon_deg, p.lat_deg);
    let mut inside = false;
    let mut j = ring.len() - 1;
    for i in 0..ring.len() {
        let (xi, yi) = (ring[i].lon_deg, ring[i].lat_deg);
        let (xj, yj) = (ring[j].lon_deg, ring[j].lat_deg);
        if (yi > y) != (yj > y) {
            let x_cross = xi + (y - yi) / (yj - yi) * (xj - xi);
            if x < x_cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Containment test for a convex counterclockwise ring with a boundary
/// tolerance expressed in degrees of perpendicular distance.
pub fn convex_contains(poly: &Polygon, p: GeoPoint, tol_deg: f64) -> bool {
    let ring = &poly.ring;
    for i in 0..ring.len() {
        let a = ring[i];
        let b = ring[(i + 1) % ring.len()];
        let (ex, ey) = (b.lon_deg - a.lon_deg, b.lat_deg - a.lat_deg);
        let cross = ex * (p.lat_deg - a.lat_deg) - ey * (p.lon_deg - a.lon_deg);
        let len = ex.hypot(ey);
        if len > 0.0 && cross / len < -tol_deg {
            return false;
        }
    }
    true
}

// ---------------------------------------------------------------------------
// Local planar projection
// ---------------------------------------------------------------------------

/// Equirectangular plane around a point set's centroid: x east, y north,
/// in meters. Positive-scaled and affine in (lon, lat), so hulls and
/// containment computed here agree with the degree plane.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LocalPlane {
    pub lat0_deg: f64,
    pub lon0_deg: f64,
    pub cos_lat0: f64,
}

impl LocalPlane {
    pub fn around(points: &[GeoPoint]) -> Result<LocalPlane> {
        if points.is_empty() {
            return Err(Error::InvalidInput(
                "cannot build a local plane around no points".to_string(),
            ));
        }
        let n = points.len() as f64;
        let lat0_deg = points.iter().map(|p| p.lat_deg).sum::<f64>() / n;
        let lon0_deg = points.iter().map(|p| p.lon_deg).sum::<f64>() / n;
        if lat0_deg.abs() > MAX_PLANE_LAT_DEG {
            return Err(Error::InvalidInput(format!(
                "planar footprint approximation is invalid above {MAX_PLANE_LAT_DEG}° \
                 latitude (centroid at {lat0_deg:.3}°)"
            )));
        }
        let cos_lat0 = lat0_deg.to_radians().cos();
        let mpd = meters_per_degree();
        let lat_span = points.iter().map(|p| p.lat_deg).fold(f64::NEG_INFINITY, f64::max)
            - points.iter().map(|p| p.lat_deg).fold(f64::INFINITY, f64::min);
        let lon_span = points.iter().map(|p| p.lon_deg).fold(f64::NEG_INFINITY, f64::max)
            - points.iter().map(|p| p.lon_deg).fold(f64::INFINITY, f64::min);
        if lat_span * mpd > MAX_PLANE_EXTENT_M || lon_span * cos_lat0 * mpd > MAX_PLANE_EXTENT_M {
            return Err(Error::InvalidInput(format!(
                "point set spans more than {MAX_PLANE_EXTENT_M} m; \
                 too large for a planar footprint"
            )));
        }
        Ok(LocalPlane {
            lat0_deg,
            lon0_deg,
            cos_lat0,
        })
    }

    pub fn to_xy(self, p: GeoPoint) -> (f64, f64) {
        let mpd = meters_per_degree();
        (
            (p.lon_deg - self.lon0_deg) * self.cos_lat0 * mpd,
            (p.lat_deg - self.lat0_deg) * mpd,
        )
    }

    pub fn to_point(self, x: f64, y: f64) -> GeoPoint {
        let mpd = meters_per_degree();
        GeoPoint {
            lat_deg: self.lat0_deg + y / mpd,
            lon_deg: self.lon0_deg + x / (self.cos_lat0 * mpd),
        }
    }
}

// ---------------------------------------------------------------------------
// GeoJSON
// ---------------------------------------------------------------------------

/// The footprint attached to one name: a polygon when the geometry allows
/// it, the bare points when it does not.
#[derive(Debug, Clone, PartialEq)]
pub enum Footprint {
    Polygon(Polygon),
    Points(Vec<GeoPoint>),
}

/// Builds a GeoJSON FeatureCollection: one Feature per named footprint,
/// geometry `Polygon` (ring closed, coordinates `[lon, lat]`) or
/// `MultiPoint` for degenerate point sets, with the name under
/// `properties.name`.
pub fn to_geojson(features: &[(String, Footprint)]) -> Value {
    let features: Vec<Value> = features
        .iter()
        .map(|(name, footprint)| {
            let geometry = match footprint {
                Footprint::Polygon(poly) => {
                    let mut ring: Vec<[f64; 2]> =
                        poly.ring.iter().map(|p| [p.lon_deg, p.lat_deg]).collect();
                    ring.push(ring[0]);
                    json!({ "type": "Polygon", "coordinates": [ring] })
                }
                Footprint::Points(points) => {
                    let coords: Vec<[f64; 2]> =
                        points.iter().map(|p| [p.lon_deg, p.lat_deg]).collect();
                    json!({ "type": "MultiPoint", "coordinates": coords })
                }
            };
            json!({
                "type": "Feature",
                "properties": { "name": name },
                "geometry": geometry,
            })
        })
        .collect();
    json!({ "type": "FeatureCollection", "features": features })
}

/// Serializes [`to_geojson`] output, pretty-printed with a trailing
/// newline.
pub fn write_geojson<W: Write>(features: &[(String, Footprint)], mut out: W) -> Result<()> {
    let doc = to_geojson(features);
    let text = serde_json::to_string_pretty(&doc)
        .map_err(|e| Error::Internal(format!("GeoJSON serialization failed: {e}")))?;
    out.write_all(text.as_bytes())
        .and_then(|_| out.write_all(b"\n"))
        .map_err(|e| Error::InvalidInput(format!("GeoJSON write failed: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    #[test]
    fn polygon_rejects_degenerate_rings() {
        assert!(Polygon::new(vec![p(0.0, 0.0), p(0.0, 1.0)]).is_err());
        // Closed ring (first repeated).
        assert!(Polygon::new(vec![p(0.0, 0.0), p(0.0, 1.0), p(1.0, 0.0), p(0.0, 0.0)]).is_err());
        // Clockwise ring.
        assert!(Polygon::new(vec![p(0.0, 0.0), p(1.0, 0.0), p(0.0, 1.0)]).is_err());
        // Counterclockwise triangle is fine.
        assert!(Polygon::new(vec![p(0.0, 0.0), p(0.0, 1.0), p(1.0, 0.0)]).is_ok());
    }

    #[test]
    fn containment_tests_agree_on_a_square() {
        let square = Polygon::new(vec![p(0.0, 0.0), p(0.0, 1.0), p(1.0, 1.0), p(1.0, 0.0)])
            .unwrap();
        let inside = p(0.5, 0.5);
        let outside = p(1.5, 0.5);
        assert!(polygon_contains(&square, inside));
        assert!(!polygon_contains(&square, outside));
        assert!(convex_contains(&square, inside, 1e-9));
        assert!(!convex_contains(&square, outside, 1e-9));
        // Boundary vertex: tolerated by the convex test.
        assert!(convex_contains(&square, p(0.0, 0.0), 1e-9));
    }

    #[test]
    fn plane_roundtrips_points() {
        let pts = vec![p(43.6, -116.2), p(43.61, -116.21), p(43.59, -116.19)];
        let plane = LocalPlane::around(&pts).unwrap();
        for &pt in &pts {
            let (x, y) = plane.to_xy(pt);
            let back = plane.to_point(x, y);
            assert!((back.lat_deg - pt.lat_deg).abs() < 1e-12);
            assert!((back.lon_deg - pt.lon_deg).abs() < 1e-12);
        }
    }

    #[test]
    fn plane_rejects_polar_and_continental_inputs() {
        let polar = vec![p(88.0, 10.0), p(88.1, 10.1), p(88.2, 10.2)];
        assert!(LocalPlane::around(&polar).is_err());
        let wide = vec![p(40.0, 0.0), p(40.0, 20.0), p(41.0, 10.0)];
        assert!(LocalPlane::around(&wide).is_err());
    }

    #[test]
    fn geojson_polygon_feature_closes_its_ring() {
        let tri = Polygon::new(vec![p(0.0, 0.0), p(0.0, 1.0), p(1.0, 0.0)]).unwrap();
        let doc = to_geojson(&[("plaza".to_string(), Footprint::Polygon(tri))]);
        assert_eq!(doc["type"], "FeatureCollection");
        let features = doc["features"].as_array().unwrap();
        assert_eq!(features.len(), 1);
        assert_eq!(features[0]["properties"]["name"], "plaza");
        let ring = features[0]["geometry"]["coordinates"][0].as_array().unwrap();
        assert_eq!(ring.len(), 4);
        assert_eq!(ring.first(), ring.last());
        // Coordinates are [lon, lat].
        assert_eq!(ring[1][0], 1.0);
        assert_eq!(ring[1][1], 0.0);
    }

    #[test]
    fn geojson_handles_empty_and_degenerate_inputs() {
        let doc = to_geojson(&[]);
        assert_eq!(doc["features"].as_array().unwrap().len(), 0);

        let pts = Footprint::Points(vec![p(1.0, 2.0), p(1.0, 3.0)]);
        let doc = to_geojson(&[("line".to_string(), pts)]);
        let geom = &doc["features"][0]["geometry"];
        assert_eq!(geom["type"], "MultiPoint");
        assert_eq!(geom["coordinates"].as_array().unwrap().len(), 2);
    }
}
