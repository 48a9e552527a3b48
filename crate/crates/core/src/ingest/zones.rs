use serde_json::{json, Value};

use super::parse::{point_from_lon_lat, point_to_lon_lat};
use super::IngestError;
use crate::geo::{GeoError, GeoPolygon, RentPressureZone};

const NAME_PROPERTIES: [&str; 2] = ["ENGLISH", "name"];

/// Reads a GeoJSON `FeatureCollection` of zone boundaries.
///
/// Only exterior rings are used; interior rings (holes) are ignored.
pub fn parse_zones(document: &str) -> Result<Vec<RentPressureZone>, IngestError> {
    let doc: Value = serde_json::from_str(document)
        .map_err(|e| IngestError::Zones(format!("not a JSON document: {e}")))?;
    let features = doc
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| IngestError::Zones("missing \"features\" array".into()))?;

    let mut zones = Vec::with_capacity(features.len());
    for (idx, feature) in features.iter().enumerate() {
        let name = NAME_PROPERTIES
            .iter()
            .find_map(|key| {
                feature
                    .get("properties")
                    .and_then(|p| p.get(*key))
                    .and_then(Value::as_str)
                    .filter(|s| !s.trim().is_empty())
            })
            .ok_or_else(|| {
                IngestError::Zones(format!(
                    "feature {idx} has no \"ENGLISH\" or \"name\" property"
                ))
            })?;

        let geometry = feature
            .get("geometry")
            .ok_or_else(|| IngestError::Zones(format!("feature {name:?} has no geometry")))?;
        let kind = geometry.get("type").and_then(Value::as_str).unwrap_or("");
        let coords = geometry
            .get("coordinates")
            .and_then(Value::as_array)
            .ok_or_else(|| IngestError::Zones(format!("feature {name:?} has no coordinates")))?;

        let polygons: Vec<&Vec<Value>> = match kind {
            "Polygon" => vec![coords],
            "MultiPolygon" => coords
                .iter()
                .map(|p| {
                    p.as_array().ok_or_else(|| {
                        IngestError::Zones(format!("feature {name:?}: malformed MultiPolygon"))
                    })
                })
                .collect::<Result<_, _>>()?,
            other => {
                return Err(IngestError::Zones(format!(
                    "feature {name:?} has unsupported geometry type {other:?}"
                )))
            }
        };

        let mut parts = Vec::with_capacity(polygons.len());
        for rings in polygons {
            let exterior = rings.first().and_then(Value::as_array).ok_or_else(|| {
                IngestError::Zones(format!("feature {name:?}: polygon without exterior ring"))
            })?;
            let vertices = exterior
                .iter()
                .map(point_from_lon_lat)
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| IngestError::Zones(format!("feature {name:?}: {e}")))?;
            parts.push(GeoPolygon::new(vertices).map_err(|e| match e {
                GeoError::InvalidPolygon(msg) => {
                    GeoError::InvalidPolygon(format!("zone {name:?}: {msg}"))
                }
                other => other,
            })?);
        }
        zones.push(RentPressureZone::new(name, parts)?);
    }
    Ok(zones)
}

/// Inverse of [`parse_zones`]: one feature per zone with a closed ring per part.
pub fn zones_to_geojson(zones: &[RentPressureZone]) -> Value {
    let features: Vec<Value> = zones
        .iter()
        .map(|zone| {
            let parts: Vec<Value> = zone
                .boundary
                .iter()
                .map(|poly| {
                    let mut ring: Vec<[f64; 2]> =
                        poly.exterior().iter().map(|p| point_to_lon_lat(*p)).collect();
                    ring.push(ring[0]);
                    json!([ring])
                })
                .collect();
            let geometry = if parts.len() == 1 {
                json!({ "type": "Polygon", "coordinates": parts[0] })
            } else {
                json!({ "type": "MultiPolygon", "coordinates": parts })
            };
            json!({
                "type": "Feature",
                "properties": { "ENGLISH": zone.name },
                "geometry": geometry,
            })
        })
        .collect();
    json!({ "type": "FeatureCollection", "features": features })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::GeoPoint;

    fn square(lon0: f64, lat0: f64, side: f64) -> Value {
        json!([[
            [lon0, lat0],
            [lon0 + side, lat0],
            [lon0 + side, lat0 + side],
            [lon0, lat0 + side],
            [lon0, lat0]
        ]])
    }

    #[test]
    fn single_square_zone() {
        let doc = json!({
            "type": "FeatureCollection",
            "features": [{
                "type": "Feature",
                "properties": { "ENGLISH": "Dublin City" },
                "geometry": { "type": "Polygon", "coordinates": square(-6.3, 53.3, 0.1) }
            }]
        });
        let zones = parse_zones(&doc.to_string()).unwrap();
        assert_eq!(zones.len(), 1);
        assert_eq!(zones[0].name, "Dublin City");
        assert_eq!(zones[0].boundary.len(), 1);
        // (lon, lat) on the wire becomes (lat, lon) internally
        assert_eq!(zones[0].boundary[0].exterior()[1], GeoPoint { lat: 53.3, lon: -6.2 });
        assert!(zones[0].contains(GeoPoint { lat: 53.35, lon: -6.25 }));
    }

    #[test]
    fn two_point_ring_is_invalid() {
        let doc = json!({
            "features": [{
                "properties": { "name": "Bad" },
                "geometry": { "type": "Polygon", "coordinates": [[[0, 0], [1, 1]]] }
            }]
        });
        assert!(matches!(
            parse_zones(&doc.to_string()),
            Err(IngestError::Geo(GeoError::InvalidPolygon(_)))
        ));
    }

    #[test]
    fn missing_name_is_a_validation_error() {
        let doc = json!({
            "features": [{
                "properties": { "COUNTY": "Cork" },
                "geometry": { "type": "Polygon", "coordinates": square(0.0, 0.0, 1.0) }
            }]
        });
        let err = parse_zones(&doc.to_string()).unwrap_err();
        assert!(err.to_string().contains("ENGLISH"));
    }

    #[test]
    fn multipolygon_becomes_one_zone_with_two_parts() {
        let doc = json!({
            "features": [{
                "properties": { "name": "Galway" },
                "geometry": {
                    "type": "MultiPolygon",
                    "coordinates": [square(0.0, 0.0, 1.0), square(5.0, 5.0, 1.0)]
                }
            }]
        });
        let zones = parse_zones(&doc.to_string()).unwrap();
        assert_eq!(zones.len(), 1);
        assert_eq!(zones[0].boundary.len(), 2);
        assert!(zones[0].contains(GeoPoint { lat: 5.5, lon: 5.5 }));
        assert!(!zones[0].contains(GeoPoint { lat: 3.0, lon: 3.0 }));

        let back = parse_zones(&zones_to_geojson(&zones).to_string()).unwrap();
        assert_eq!(back, zones);
    }
}
