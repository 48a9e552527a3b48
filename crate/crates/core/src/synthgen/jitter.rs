use std::f64::consts::PI;

use rand::Rng;

use crate::geo::{destination_point, GeoPoint};

/// Moves `point` to `u`, `v`-determined spot in the disk of `radius_m`.
///
/// The offset distance is `radius_m * sqrt(u)` and the bearing `2 pi v`, so
/// uniform `u`, `v` give a point uniform over the disk area.
pub fn jitter_from_uniforms(point: GeoPoint, radius_m: f64, u: f64, v: f64) -> GeoPoint {
    let r = radius_m * u.sqrt();
    if r == 0.0 {
        return point;
    }
    destination_point(point, 2.0 * PI * v, r)
}

/// Anonymizes a coordinate the way the listing site does: a uniform random
/// point within `radius_m` of the true location.
pub fn jitter_coordinate<R: Rng + ?Sized>(point: GeoPoint, radius_m: f64, rng: &mut R) -> GeoPoint {
    assert!(radius_m > 0.0, "jitter radius must be positive");
    let u: f64 = rng.gen();
    let v: f64 = rng.gen();
    jitter_from_uniforms(point, radius_m, u, v)
}
