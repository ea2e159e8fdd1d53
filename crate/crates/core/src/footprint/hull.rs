//! Convex hull of a geotagged point set.

use crate::error::{Error, Result};
use crate::footprint::{LocalPlane, Polygon};
use crate::geo::GeoPoint;

/// Smallest convex polygon containing all points, computed by monotone
/// chain in the local equirectangular plane.
///
/// The returned ring is counterclockwise and contains only strict corner
/// vertices — points lying on a hull edge are excluded. Needs at least 3
/// distinct, non-collinear points; collinear input is a
/// [`Error::DegenerateGeometry`], which callers can downgrade to a bare
/// point list.
pub fn convex_hull(points: &[GeoPoint]) -> Result<Polygon> {
    if points.len() < 3 {
        return Err(Error::DegenerateGeometry(format!(
            "convex hull needs at least 3 points, got {}",
            points.len()
        )));
    }
    let plane = LocalPlane::around(points)?;
    let mut projected: Vec<(f64, f64, GeoPoint)> = points
        .iter()
        .map(|&p| {
            let (x, y) = plane.to_xy(p);
            (x, y, p)
        })
        .collect();
    projected.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.total_cmp(&b.1)));
    projected.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1);
    if projected.len() < 3 {
        return Err(Error::DegenerateGeometry(format!(
            "only {} distinct points; no hull exists",
            projected.len()
        )));
    }

    let cross = |o: &(f64, f64, GeoPoint), a: &(f64, f64, GeoPoint), b: &(f64, f64, GeoPoint)| {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };

    let mut lower: Vec<(f64, f64, GeoPoint)> = Vec::new();
    for p in &projected {
        while lower.len() >= 2 && cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= 0.0
        {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<(f64, f64, GeoPoint)> = Vec::new();
    for p in projected.iter().rev() {
        while upper.len() >= 2 && cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= 0.0
        {
            upper.pop();
        }
        upper.push(*p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);

    if lower.len() < 3 {
        return Err(Error::DegenerateGeometry(
            "all points are collinear; no hull exists".to_string(),
        ));
    }
    Polygon::new(lower.into_iter().map(|(_, _, p)| p).collect())
}
