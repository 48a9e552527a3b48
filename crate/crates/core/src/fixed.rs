//! Six-decimal rounding for serialized floats, so output files are byte-stable.

use serde::Serializer;

pub fn round6(x: f64) -> f64 {
    let r = (x * 1e6).round() / 1e6;
    // avoid "-0.0" in output
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(round6(*x))
}

pub mod option {
    use serde::Serializer;

    pub fn serialize<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match x {
            Some(v) => s.serialize_some(&super::round6(*v)),
            None => s.serialize_none(),
        }
    }
}

pub mod point {
    use serde::{Serialize, Serializer};

    use crate::geo::GeoPoint;

    pub fn serialize<S: Serializer>(p: &GeoPoint, s: S) -> Result<S::Ok, S::Error> {
        GeoPoint {
            lat: super::round6(p.lat),
            lon: super::round6(p.lon),
        }
        .serialize(s)
    }
}
