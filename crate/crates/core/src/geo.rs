//! Planar and spherical geometry on WGS84 coordinates.
//!
//! Centroids are computed in plain lat/lon space. Permit polygons span well
//! under a kilometre, where the planar error is far below the 150 m matching
//! radius. Distances use a spherical Earth of radius [`EARTH_RADIUS_M`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mean Earth radius in metres used by every distance computation.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Rings whose absolute signed area falls below this (square degrees) fall
/// back to the vertex mean.
pub const DEGENERATE_AREA_SQ_DEG: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("invalid coordinate: lat={lat}, lon={lon}")]
    InvalidCoordinate { lat: f64, lon: f64 },
    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),
    #[error("invalid zone: {0}")]
    InvalidZone(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, GeoError> {
        let point = GeoPoint { lat, lon };
        point.validate()?;
        Ok(point)
    }

    pub fn validate(&self) -> Result<(), GeoError> {
        let ok = self.lat.is_finite()
            && self.lon.is_finite()
            && (-90.0..=90.0).contains(&self.lat)
            && (-180.0..=180.0).contains(&self.lon);
        if ok {
            Ok(())
        } else {
            Err(GeoError::InvalidCoordinate {
                lat: self.lat,
                lon: self.lon,
            })
        }
    }
}

/// A simple polygon ring. The ring is stored open: a closing vertex equal to
/// the first one is dropped on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct GeoPolygon {
    exterior: Vec<GeoPoint>,
}

impl GeoPolygon {
    pub fn new(mut exterior: Vec<GeoPoint>) -> Result<Self, GeoError> {
        if exterior.len() > 1 && exterior.first() == exterior.last() {
            exterior.pop();
        }
        if exterior.len() < 3 {
            return Err(GeoError::InvalidPolygon(format!(
                "ring has {} distinct vertices, need at least 3",
                exterior.len()
            )));
        }
        for p in &exterior {
            if !p.lat.is_finite() || !p.lon.is_finite() {
                return Err(GeoError::InvalidPolygon(format!(
                    "non-finite vertex ({}, {})",
                    p.lat, p.lon
                )));
            }
        }
        Ok(GeoPolygon { exterior })
    }

    pub fn exterior(&self) -> &[GeoPoint] {
        &self.exterior
    }

    fn edges(&self) -> impl Iterator<Item = (GeoPoint, GeoPoint)> + '_ {
        let n = self.exterior.len();
        (0..n).map(move |i| (self.exterior[i], self.exterior[(i + 1) % n]))
    }

    /// True when two non-adjacent edges properly cross (bow-tie rings).
    pub fn is_self_intersecting(&self) -> bool {
        let edges: Vec<_> = self.edges().collect();
        let n = edges.len();
        for i in 0..n {
            for j in (i + 1)..n {
                // adjacent edges share a vertex
                if j == i + 1 || (i == 0 && j == n - 1) {
                    continue;
                }
                if segments_cross(edges[i], edges[j]) {
                    return true;
                }
            }
        }
        false
    }
}

fn orient(a: GeoPoint, b: GeoPoint, c: GeoPoint) -> f64 {
    (b.lon - a.lon) * (c.lat - a.lat) - (b.lat - a.lat) * (c.lon - a.lon)
}

fn segments_cross(s: (GeoPoint, GeoPoint), t: (GeoPoint, GeoPoint)) -> bool {
    let d1 = orient(t.0, t.1, s.0);
    let d2 = orient(t.0, t.1, s.1);
    let d3 = orient(s.0, s.1, t.0);
    let d4 = orient(s.0, s.1, t.1);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RentPressureZone {
    pub name: String,
    pub boundary: Vec<GeoPolygon>,
}

impl RentPressureZone {
    pub fn new(name: impl Into<String>, boundary: Vec<GeoPolygon>) -> Result<Self, GeoError> {
        let name = name.into();
        if name.trim().is_empty() {
            return Err(GeoError::InvalidZone("zone name is empty".into()));
        }
        if boundary.is_empty() {
            return Err(GeoError::InvalidZone(format!("zone {name:?} has no polygon parts")));
        }
        Ok(RentPressureZone { name, boundary })
    }

    pub fn contains(&self, point: GeoPoint) -> bool {
        self.boundary.iter().any(|part| point_in_polygon(point, part))
    }
}

/// Area-weighted (shoelace) centroid in planar lat/lon space.
///
/// Vertices are shifted to the first vertex before accumulation so the
/// result is translation-equivariant to within rounding.
pub fn polygon_centroid(polygon: &GeoPolygon) -> GeoPoint {
    let ring = polygon.exterior();
    let origin = ring[0];
    let n = ring.len();

    let mut twice_area = 0.0;
    let mut cx = 0.0;
    let mut cy = 0.0;
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        let (x0, y0) = (a.lat - origin.lat, a.lon - origin.lon);
        let (x1, y1) = (b.lat - origin.lat, b.lon - origin.lon);
        let cross = x0 * y1 - x1 * y0;
        twice_area += cross;
        cx += (x0 + x1) * cross;
        cy += (y0 + y1) * cross;
    }

    if (twice_area / 2.0).abs() < DEGENERATE_AREA_SQ_DEG {
        let (sum_lat, sum_lon) = ring
            .iter()
            .fold((0.0, 0.0), |(la, lo), p| (la + p.lat, lo + p.lon));
        return GeoPoint {
            lat: sum_lat / n as f64,
            lon: sum_lon / n as f64,
        };
    }

    let scale = 1.0 / (3.0 * twice_area);
    GeoPoint {
        lat: origin.lat + cx * scale,
        lon: origin.lon + cy * scale,
    }
}

/// Even-odd ray crossing test (PNPOLY). Points exactly on an edge may land
/// either way.
pub fn point_in_polygon(point: GeoPoint, polygon: &GeoPolygon) -> bool {
    let ring = polygon.exterior();
    let (x, y) = (point.lon, point.lat);
    let mut inside = false;
    let mut j = ring.len() - 1;
    for i in 0..ring.len() {
        let (xi, yi) = (ring[i].lon, ring[i].lat);
        let (xj, yj) = (ring[j].lon, ring[j].lat);
        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// Great-circle distance in metres.
pub fn haversine_distance(a: GeoPoint, b: GeoPoint) -> f64 {
    let dlat = (b.lat.to_radians() - a.lat.to_radians()).abs();
    let dlon = (b.lon.to_radians() - a.lon.to_radians()).abs();
    let h = (dlat / 2.0).sin().powi(2)
        + a.lat.to_radians().cos() * b.lat.to_radians().cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Point reached by travelling `distance_m` from `origin` along the initial
/// `bearing_rad` (clockwise from north) on the sphere.
pub fn destination_point(origin: GeoPoint, bearing_rad: f64, distance_m: f64) -> GeoPoint {
    let delta = distance_m / EARTH_RADIUS_M;
    let phi1 = origin.lat.to_radians();
    let lambda1 = origin.lon.to_radians();
    let sin_phi2 = phi1.sin() * delta.cos() + phi1.cos() * delta.sin() * bearing_rad.cos();
    let phi2 = sin_phi2.clamp(-1.0, 1.0).asin();
    let lambda2 = lambda1
        + (bearing_rad.sin() * delta.sin() * phi1.cos()).atan2(delta.cos() - phi1.sin() * sin_phi2);
    let mut lon = lambda2.to_degrees();
    if lon > 180.0 {
        lon -= 360.0;
    } else if lon < -180.0 {
        lon += 360.0;
    }
    GeoPoint {
        lat: phi2.to_degrees(),
        lon,
    }
}

/// Metres spanned by one degree of latitude on the sphere.
pub fn meters_per_degree_lat() -> f64 {
    EARTH_RADIUS_M * std::f64::consts::PI / 180.0
}

/// Metres spanned by one degree of longitude at `lat`.
pub fn meters_per_degree_lon(lat: f64) -> f64 {
    meters_per_degree_lat() * lat.to_radians().cos()
}

/// Name of the first zone, in input order, containing `point`.
pub fn find_zone(point: GeoPoint, zones: &[RentPressureZone]) -> Option<&str> {
    zones
        .iter()
        .find(|zone| zone.contains(point))
        .map(|zone| zone.name.as_str())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint { lat, lon }
    }

    fn poly(coords: &[(f64, f64)]) -> GeoPolygon {
        GeoPolygon::new(coords.iter().map(|&(a, b)| pt(a, b)).collect()).unwrap()
    }

    fn unit_square() -> GeoPolygon {
        poly(&[(0.0, 0.0), (0.0, 1.0), (1.0, 1.0), (1.0, 0.0)])
    }

    fn l_shape() -> GeoPolygon {
        poly(&[(0.0, 0.0), (2.0, 0.0), (2.0, 1.0), (1.0, 1.0), (1.0, 2.0), (0.0, 2.0)])
    }

    #[test]
    fn centroid_square_triangle_l_shape() {
        let c = polygon_centroid(&unit_square());
        assert!((c.lat - 0.5).abs() < 1e-12 && (c.lon - 0.5).abs() < 1e-12);

        let c = polygon_centroid(&poly(&[(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]));
        assert!((c.lat - 1.0 / 3.0).abs() < 1e-12 && (c.lon - 1.0 / 3.0).abs() < 1e-12);

        // 2x1 rectangle centred (1.0, 0.5) plus unit square centred (0.5, 1.5)
        let expected = (2.0 * 1.0 + 1.0 * 0.5) / 3.0;
        let c = polygon_centroid(&l_shape());
        assert!((c.lat - expected).abs() < 1e-12, "{c:?}");
        assert!((c.lon - expected).abs() < 1e-12, "{c:?}");
        assert!((c.lat - 0.8333).abs() < 1e-4);
    }

    #[test]
    fn centroid_degenerate_ring_uses_vertex_mean() {
        let c = polygon_centroid(&poly(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)]));
        assert!((c.lat - 1.0).abs() < 1e-12 && (c.lon - 1.0).abs() < 1e-12);
    }

    #[test]
    fn polygon_needs_three_vertices() {
        assert!(matches!(
            GeoPolygon::new(vec![pt(0.0, 0.0), pt(1.0, 1.0)]),
            Err(GeoError::InvalidPolygon(_))
        ));
        // a closed triangle with 4 entries is still a triangle
        let closed = GeoPolygon::new(vec![pt(0.0, 0.0), pt(1.0, 0.0), pt(0.0, 1.0), pt(0.0, 0.0)]);
        assert_eq!(closed.unwrap().exterior().len(), 3);
        assert!(GeoPolygon::new(vec![pt(0.0, 0.0), pt(1.0, 0.0), pt(0.0, 0.0)]).is_err());
    }

    #[test]
    fn pnpoly_examples() {
        assert!(point_in_polygon(pt(0.5, 0.5), &unit_square()));
        assert!(!point_in_polygon(pt(1.5, 0.5), &unit_square()));
        assert!(!point_in_polygon(pt(1.5, 1.5), &l_shape()));
        assert!(point_in_polygon(pt(0.5, 1.5), &l_shape()));
    }

    #[test]
    fn haversine_examples() {
        let dublin = pt(53.3498, -6.2603);
        assert_eq!(haversine_distance(dublin, dublin), 0.0);
        let d = haversine_distance(pt(0.0, 0.0), pt(0.0, 1.0));
        assert!((d - 111_194.93).abs() < 0.01, "{d}");
        let d = haversine_distance(pt(0.0, 0.0), pt(90.0, 0.0));
        assert!((d - 10_007_543.4).abs() < 0.1, "{d}");
    }

    #[test]
    fn destination_point_round_trips_distance() {
        let origin = pt(53.35, -6.26);
        for k in 0..16 {
            let bearing = k as f64 * std::f64::consts::PI / 8.0;
            let p = destination_point(origin, bearing, 150.0);
            assert!((haversine_distance(origin, p) - 150.0).abs() < 1e-6);
        }
    }

    #[test]
    fn find_zone_first_match_wins() {
        let a = RentPressureZone::new("A", vec![unit_square()]).unwrap();
        let b = RentPressureZone::new(
            "B",
            vec![poly(&[(0.5, 0.5), (0.5, 2.0), (2.0, 2.0), (2.0, 0.5)])],
        )
        .unwrap();
        let zones = vec![a.clone(), b.clone()];
        assert_eq!(find_zone(pt(0.75, 0.75), &zones), Some("A"));
        assert_eq!(find_zone(pt(0.75, 0.75), &[b.clone(), a.clone()]), Some("B"));
        assert_eq!(find_zone(pt(1.5, 1.5), &zones), Some("B"));
        assert_eq!(find_zone(pt(5.0, 5.0), &zones), None);
    }

    #[test]
    fn zone_requires_name_and_parts() {
        assert!(RentPressureZone::new(" ", vec![unit_square()]).is_err());
        assert!(RentPressureZone::new("Cork", vec![]).is_err());
    }

    #[test]
    fn bow_tie_is_self_intersecting() {
        let bow = poly(&[(0.0, 0.0), (1.0, 1.0), (1.0, 0.0), (0.0, 1.0)]);
        assert!(bow.is_self_intersecting());
        assert!(!unit_square().is_self_intersecting());
        assert!(!l_shape().is_self_intersecting());
    }

    #[test]
    fn point_validation() {
        assert!(GeoPoint::new(91.0, 0.0).is_err());
        assert!(GeoPoint::new(0.0, f64::NAN).is_err());
        assert!(GeoPoint::new(-90.0, 180.0).is_ok());
    }
}
