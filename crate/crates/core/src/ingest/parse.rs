use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use chrono::NaiveDate;
use serde::Serialize;
use serde_json::{Map, Value};

use super::{
    IngestError, Listing, Owner, ParseOutput, PermitApplication, PermitDecision, PhotoRecord,
    Reject, Review, RoomType, SceneLabel, Warning,
};
use crate::geo::{GeoPoint, GeoPolygon};

enum RecordError {
    Reject(String),
    Fatal(IngestError),
}

impl From<String> for RecordError {
    fn from(reason: String) -> Self {
        RecordError::Reject(reason)
    }
}

struct Built<T> {
    record: T,
    warnings: Vec<String>,
}

impl<T> From<T> for Built<T> {
    fn from(record: T) -> Self {
        Built {
            record,
            warnings: Vec::new(),
        }
    }
}

/// Typed access to one JSON object with field-naming error messages.
struct Fields<'a>(&'a Map<String, Value>);

impl<'a> Fields<'a> {
    fn get(&self, name: &str) -> Result<&'a Value, String> {
        match self.0.get(name) {
            Some(Value::Null) | None => Err(format!("missing field \"{name}\"")),
            Some(v) => Ok(v),
        }
    }

    fn str(&self, name: &str) -> Result<&'a str, String> {
        self.get(name)?
            .as_str()
            .ok_or_else(|| format!("field \"{name}\" must be a string"))
    }

    fn non_empty_str(&self, name: &str) -> Result<&'a str, String> {
        let s = self.str(name)?;
        if s.trim().is_empty() {
            return Err(format!("field \"{name}\" must not be empty"));
        }
        Ok(s)
    }

    fn opt_str(&self, name: &str) -> Result<Option<&'a str>, String> {
        match self.0.get(name) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => v
                .as_str()
                .map(Some)
                .ok_or_else(|| format!("field \"{name}\" must be a string")),
        }
    }

    fn uint(&self, name: &str) -> Result<u64, String> {
        self.get(name)?
            .as_u64()
            .ok_or_else(|| format!("field \"{name}\" must be a non-negative integer"))
    }

    fn number(&self, name: &str) -> Result<f64, String> {
        self.get(name)?
            .as_f64()
            .ok_or_else(|| format!("field \"{name}\" must be a number"))
    }

    fn date(&self, name: &str) -> Result<NaiveDate, String> {
        let s = self.str(name)?;
        NaiveDate::parse_from_str(s, "%Y-%m-%d")
            .map_err(|_| format!("field \"{name}\" must be an ISO-8601 date (YYYY-MM-DD), got {s:?}"))
    }

    fn str_list(&self, name: &str) -> Result<Vec<String>, String> {
        let arr = self
            .get(name)?
            .as_array()
            .ok_or_else(|| format!("field \"{name}\" must be an array of strings"))?;
        arr.iter()
            .map(|v| {
                v.as_str()
                    .map(str::to_owned)
                    .ok_or_else(|| format!("field \"{name}\" must be an array of strings"))
            })
            .collect()
    }
}

fn parse_stream<R, T>(
    reader: R,
    kind: &'static str,
    id_field: &'static str,
    id_of: fn(&T) -> &str,
    mut build: impl FnMut(&Fields<'_>) -> Result<Built<T>, RecordError>,
) -> Result<ParseOutput<T>, IngestError>
where
    R: BufRead,
{
    let mut out = ParseOutput::default();
    let mut seen: HashMap<String, usize> = HashMap::new();

    for (idx, raw) in reader.split(b'\n').enumerate() {
        let line_no = idx + 1;
        let mut bytes = raw?;
        if bytes.last() == Some(&b'\r') {
            bytes.pop();
        }
        let text = match String::from_utf8(bytes) {
            Ok(t) => t,
            Err(_) => {
                out.rejects.push(Reject {
                    line: line_no,
                    id: None,
                    reason: "line is not valid UTF-8".into(),
                });
                continue;
            }
        };
        if text.trim().is_empty() {
            continue;
        }
        let value: Value = match serde_json::from_str(&text) {
            Ok(v) => v,
            Err(e) => {
                out.rejects.push(Reject {
                    line: line_no,
                    id: None,
                    reason: format!("malformed record: {e}"),
                });
                continue;
            }
        };
        let Some(obj) = value.as_object() else {
            out.rejects.push(Reject {
                line: line_no,
                id: None,
                reason: "record is not an object".into(),
            });
            continue;
        };
        let fields = Fields(obj);
        let id_hint = obj.get(id_field).and_then(Value::as_str).map(str::to_owned);

        match build(&fields) {
            Ok(built) => {
                let id = id_of(&built.record).to_owned();
                if seen.insert(id.clone(), line_no).is_some() {
                    return Err(IngestError::DuplicateId {
                        kind,
                        id,
                        line: line_no,
                    });
                }
                out.warnings
                    .extend(built.warnings.into_iter().map(|message| Warning {
                        line: line_no,
                        id: id.clone(),
                        message,
                    }));
                out.records.push(built.record);
            }
            Err(RecordError::Reject(reason)) => out.rejects.push(Reject {
                line: line_no,
                id: id_hint,
                reason,
            }),
            Err(RecordError::Fatal(e)) => return Err(e),
        }
    }
    Ok(out)
}

fn parse_point(value: &Value, name: &str) -> Result<GeoPoint, String> {
    let obj = value
        .as_object()
        .ok_or_else(|| format!("field \"{name}\" must be an object with lat and lon"))?;
    let f = Fields(obj);
    let lat = f.number("lat").map_err(|e| format!("{name}: {e}"))?;
    let lon = f.number("lon").map_err(|e| format!("{name}: {e}"))?;
    GeoPoint::new(lat, lon).map_err(|e| format!("{name}: {e}"))
}

/// Converts one `[lon, lat]` wire pair into an internal point.
pub(crate) fn point_from_lon_lat(value: &Value) -> Result<GeoPoint, String> {
    let pair = value
        .as_array()
        .filter(|a| a.len() >= 2)
        .ok_or_else(|| "coordinate must be a [lon, lat] array".to_string())?;
    let lon = pair[0]
        .as_f64()
        .ok_or_else(|| "coordinate longitude must be a number".to_string())?;
    let lat = pair[1]
        .as_f64()
        .ok_or_else(|| "coordinate latitude must be a number".to_string())?;
    GeoPoint::new(lat, lon).map_err(|e| e.to_string())
}

pub(crate) fn point_to_lon_lat(p: GeoPoint) -> [f64; 2] {
    [p.lon, p.lat]
}

pub fn parse_listings<R: BufRead>(reader: R) -> Result<ParseOutput<Listing>, IngestError> {
    parse_stream(reader, "listing", "post_id", |l: &Listing| &l.post_id, |f| {
        let room_raw = f.str("room_type")?;
        let room_type = RoomType::parse(room_raw).ok_or_else(|| {
            format!(
                "field \"room_type\" has unknown value {room_raw:?} (expected one of \"Entire home/apt\", \"Private room\", \"Shared room\")"
            )
        })?;
        let min_nights = match f.get("min_nights")?.as_u64() {
            Some(n) if n >= 1 && n <= u32::MAX as u64 => n as u32,
            _ => return Err("field \"min_nights\" must be an integer >= 1".to_string().into()),
        };
        Ok(Listing {
            post_id: f.non_empty_str("post_id")?.to_owned(),
            owner_id: f.non_empty_str("owner_id")?.to_owned(),
            room_type,
            min_nights,
            public_location: parse_point(f.get("public_location")?, "public_location")?,
            photo_ids: f.str_list("photo_ids")?,
            created_date: f.date("created_date")?,
            title: f.opt_str("title")?.unwrap_or_default().to_owned(),
        }
        .into())
    })
}

pub fn parse_owners<R: BufRead>(reader: R) -> Result<ParseOutput<Owner>, IngestError> {
    parse_stream(reader, "owner", "owner_id", |o: &Owner| &o.owner_id, |f| {
        let owner_id = f.non_empty_str("owner_id")?.to_owned();
        let count = f.uint("listing_count")?;
        let listing_count = u32::try_from(count)
            .map_err(|_| "field \"listing_count\" is out of range".to_string())?;
        let metadata: BTreeMap<String, Value> = f
            .0
            .iter()
            .filter(|(k, _)| k.as_str() != "owner_id" && k.as_str() != "listing_count")
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        Ok(Owner {
            owner_id,
            listing_count,
            metadata,
        }
        .into())
    })
}

pub fn parse_reviews<R: BufRead>(reader: R) -> Result<ParseOutput<Review>, IngestError> {
    parse_stream(reader, "review", "review_id", |r: &Review| &r.review_id, |f| {
        Ok(Review {
            review_id: f.non_empty_str("review_id")?.to_owned(),
            post_id: f.non_empty_str("post_id")?.to_owned(),
            date: f.date("date")?,
            text: f.str("text")?.to_owned(),
            language: f.opt_str("language")?.map(str::to_owned),
        }
        .into())
    })
}

pub fn parse_permits<R: BufRead>(reader: R) -> Result<ParseOutput<PermitApplication>, IngestError> {
    parse_stream(
        reader,
        "permit application",
        "app_id",
        |p: &PermitApplication| &p.app_id,
        |f| {
            let app_id = f.non_empty_str("app_id")?.to_owned();
            let ring = f
                .get("boundary")?
                .as_array()
                .ok_or_else(|| "field \"boundary\" must be an array of [lon, lat] pairs".to_string())?;
            let vertices = ring
                .iter()
                .map(point_from_lon_lat)
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| format!("boundary: {e}"))?;
            let boundary = GeoPolygon::new(vertices).map_err(|e| format!("boundary: {e}"))?;
            let description = f.non_empty_str("description")?.to_owned();
            let decision_raw = f.str("decision")?;
            let decision = PermitDecision::parse(decision_raw).ok_or_else(|| {
                format!(
                    "field \"decision\" has unknown value {decision_raw:?} (allowed: {})",
                    PermitDecision::ALLOWED.join(", ")
                )
            })?;
            let mut warnings = Vec::new();
            if boundary.is_self_intersecting() {
                warnings.push("boundary ring is self-intersecting; accepted without repair".into());
            }
            Ok(Built {
                record: PermitApplication {
                    app_id,
                    boundary,
                    description,
                    decision,
                },
                warnings,
            })
        },
    )
}

/// Parses the embeddings file. The first record carrying a vector fixes the
/// corpus dimension; any later vector of a different length is a hard error.
pub fn parse_embeddings<R: BufRead>(reader: R) -> Result<ParseOutput<PhotoRecord>, IngestError> {
    let mut dimension: Option<usize> = None;
    parse_stream(
        reader,
        "photo",
        "photo_id",
        |p: &PhotoRecord| &p.photo_id,
        |f| {
            let photo_id = f.non_empty_str("photo_id")?.to_owned();
            let post_id = f.non_empty_str("post_id")?.to_owned();
            let label_raw = f.str("scene_label")?;
            let scene_label = SceneLabel::parse(label_raw).ok_or_else(|| {
                format!(
                    "field \"scene_label\" has unknown value {label_raw:?} (allowed: {})",
                    SceneLabel::ALLOWED.join(", ")
                )
            })?;

            let vector = match f.0.get("vector") {
                None | Some(Value::Null) => None,
                Some(Value::Array(items)) if items.is_empty() => None,
                Some(Value::Array(items)) => Some(
                    items
                        .iter()
                        .map(|v| v.as_f64().filter(|x| x.is_finite()))
                        .collect::<Option<Vec<f64>>>()
                        .ok_or_else(|| "field \"vector\" must contain finite numbers".to_string())?,
                ),
                Some(_) => return Err("field \"vector\" must be an array of numbers".to_string().into()),
            };

            match &vector {
                Some(v) => {
                    let declared = f.uint("dim")? as usize;
                    if declared != v.len() {
                        return Err(format!(
                            "field \"dim\" is {declared} but vector has {} entries",
                            v.len()
                        )
                        .into());
                    }
                    match dimension {
                        None => dimension = Some(v.len()),
                        Some(d) if d != v.len() => {
                            return Err(RecordError::Fatal(IngestError::DimensionMismatch {
                                photo_id,
                                expected: d,
                                found: v.len(),
                            }))
                        }
                        Some(_) => {}
                    }
                    if scene_label != SceneLabel::Unknown && v.iter().all(|x| *x == 0.0) {
                        return Err("labeled photo has a zero-norm vector".to_string().into());
                    }
                }
                None if scene_label != SceneLabel::Unknown => {
                    return Err(format!(
                        "missing field \"vector\" (only unknown-labeled photos may omit it)"
                    )
                    .into());
                }
                None => {}
            }

            Ok(PhotoRecord {
                photo_id,
                post_id,
                scene_label,
                embedding: vector,
            }
            .into())
        },
    )
}

#[derive(Serialize)]
struct ListingWire<'a> {
    post_id: &'a str,
    owner_id: &'a str,
    room_type: &'static str,
    min_nights: u32,
    public_location: GeoPoint,
    photo_ids: &'a [String],
    created_date: String,
    title: &'a str,
}

#[derive(Serialize)]
struct ReviewWire<'a> {
    review_id: &'a str,
    post_id: &'a str,
    date: String,
    text: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    language: Option<&'a str>,
}

#[derive(Serialize)]
struct PermitWire<'a> {
    app_id: &'a str,
    boundary: Vec<[f64; 2]>,
    description: &'a str,
    decision: &'static str,
}

#[derive(Serialize)]
struct PhotoWire<'a> {
    photo_id: &'a str,
    post_id: &'a str,
    scene_label: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    vector: Option<&'a [f64]>,
}

fn write_line<W: Write, S: Serialize>(w: &mut W, value: &S) -> std::io::Result<()> {
    serde_json::to_writer(&mut *w, value)?;
    w.write_all(b"\n")
}

pub fn write_listings<W: Write>(mut w: W, listings: &[Listing]) -> std::io::Result<()> {
    for l in listings {
        write_line(
            &mut w,
            &ListingWire {
                post_id: &l.post_id,
                owner_id: &l.owner_id,
                room_type: l.room_type.display_name(),
                min_nights: l.min_nights,
                public_location: l.public_location,
                photo_ids: &l.photo_ids,
                created_date: l.created_date.format("%Y-%m-%d").to_string(),
                title: &l.title,
            },
        )?;
    }
    Ok(())
}

pub fn write_owners<W: Write>(mut w: W, owners: &[Owner]) -> std::io::Result<()> {
    for o in owners {
        let mut obj = Map::new();
        obj.insert("owner_id".into(), Value::from(o.owner_id.clone()));
        obj.insert("listing_count".into(), Value::from(o.listing_count));
        for (k, v) in &o.metadata {
            obj.insert(k.clone(), v.clone());
        }
        write_line(&mut w, &obj)?;
    }
    Ok(())
}

pub fn write_reviews<W: Write>(mut w: W, reviews: &[Review]) -> std::io::Result<()> {
    for r in reviews {
        write_line(
            &mut w,
            &ReviewWire {
                review_id: &r.review_id,
                post_id: &r.post_id,
                date: r.date.format("%Y-%m-%d").to_string(),
                text: &r.text,
                language: r.language.as_deref(),
            },
        )?;
    }
    Ok(())
}

pub fn write_permits<W: Write>(mut w: W, permits: &[PermitApplication]) -> std::io::Result<()> {
    for p in permits {
        write_line(
            &mut w,
            &PermitWire {
                app_id: &p.app_id,
                boundary: p.boundary.exterior().iter().map(|v| point_to_lon_lat(*v)).collect(),
                description: &p.description,
                decision: p.decision.as_str(),
            },
        )?;
    }
    Ok(())
}

pub fn write_embeddings<W: Write>(mut w: W, photos: &[PhotoRecord]) -> std::io::Result<()> {
    for p in photos {
        write_line(
            &mut w,
            &PhotoWire {
                photo_id: &p.photo_id,
                post_id: &p.post_id,
                scene_label: p.scene_label.as_str(),
                dim: p.embedding.as_ref().map(Vec::len),
                vector: p.embedding.as_deref(),
            },
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const LISTING: &str = r#"{"post_id":"p1","owner_id":"o1","room_type":"Entire home/apt","min_nights":2,"public_location":{"lat":53.34,"lon":-6.26},"photo_ids":["ph1","ph2"],"created_date":"2021-03-04","title":"Flat near Temple Bar"}"#;

    #[test]
    fn one_valid_listing() {
        let out = parse_listings(LISTING.as_bytes()).unwrap();
        assert_eq!(out.records.len(), 1);
        assert!(out.rejects.is_empty());
        let l = &out.records[0];
        assert_eq!(l.room_type, RoomType::EntireHome);
        assert_eq!(l.public_location, GeoPoint { lat: 53.34, lon: -6.26 });
        assert_eq!(l.photo_ids, vec!["ph1", "ph2"]);
    }

    #[test]
    fn zero_min_nights_is_rejected() {
        let bad = LISTING.replace("\"min_nights\":2", "\"min_nights\":0");
        let out = parse_listings(bad.as_bytes()).unwrap();
        assert!(out.records.is_empty());
        assert_eq!(out.rejects.len(), 1);
        assert!(out.rejects[0].reason.contains("min_nights"));
        assert_eq!(out.rejects[0].line, 1);
        assert_eq!(out.rejects[0].id.as_deref(), Some("p1"));
    }

    #[test]
    fn duplicate_post_id_is_an_error() {
        let input = format!("{LISTING}\n{LISTING}\n");
        match parse_listings(input.as_bytes()) {
            Err(IngestError::DuplicateId { id, line, .. }) => {
                assert_eq!(id, "p1");
                assert_eq!(line, 2);
            }
            other => panic!("expected duplicate id error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_room_type_and_garbage_lines_are_rejected() {
        let bad = LISTING.replace("Entire home/apt", "Hotel room");
        let input = format!("{bad}\nnot json\n\n[1,2]\n{LISTING}\n");
        let out = parse_listings(input.as_bytes()).unwrap();
        assert_eq!(out.records.len(), 1);
        let lines: Vec<_> = out.rejects.iter().map(|r| r.line).collect();
        assert_eq!(lines, vec![1, 2, 4]);
        assert!(out.rejects[0].reason.contains("room_type"));
    }

    #[test]
    fn owner_metadata_is_preserved() {
        let line = r#"{"owner_id":"o1","listing_count":2,"superhost":true,"name":"Aoife"}"#;
        let out = parse_owners(line.as_bytes()).unwrap();
        let owner = &out.records[0];
        assert_eq!(owner.listing_count, 2);
        assert_eq!(owner.metadata.len(), 2);
        let mut buf = Vec::new();
        write_owners(&mut buf, &out.records).unwrap();
        let again = parse_owners(buf.as_slice()).unwrap();
        assert_eq!(again.records, out.records);
    }

    const PERMIT: &str = r#"{"app_id":"a1","boundary":[[-6.0,53.0],[-6.0,53.001],[-5.999,53.001],[-5.999,53.0]],"description":"Change of use to short-term letting","decision":"granted"}"#;

    #[test]
    fn permit_with_four_vertices() {
        let out = parse_permits(PERMIT.as_bytes()).unwrap();
        assert_eq!(out.records.len(), 1);
        let p = &out.records[0];
        assert_eq!(p.boundary.exterior().len(), 4);
        // wire order is [lon, lat]
        assert_eq!(p.boundary.exterior()[1], GeoPoint { lat: 53.001, lon: -6.0 });
        assert_eq!(p.decision, PermitDecision::Granted);
        assert!(out.warnings.is_empty());
    }

    #[test]
    fn permit_missing_description_is_rejected() {
        let bad = PERMIT.replace(r#""description":"Change of use to short-term letting","#, "");
        let out = parse_permits(bad.as_bytes()).unwrap();
        assert!(out.records.is_empty());
        assert!(out.rejects[0].reason.contains("description"));
    }

    #[test]
    fn bow_tie_permit_is_accepted_with_warning() {
        let bow = r#"{"app_id":"a2","boundary":[[0,0],[1,1],[0,1],[1,0]],"description":"short-term let","decision":"pending"}"#;
        let out = parse_permits(bow.as_bytes()).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.warnings.len(), 1);
        assert_eq!(out.warnings[0].id, "a2");
    }

    #[test]
    fn embeddings_dimension_rules() {
        let a = r#"{"photo_id":"x1","post_id":"p1","scene_label":"indoor","dim":4,"vector":[1,0,0,0]}"#;
        let b = r#"{"photo_id":"x2","post_id":"p1","scene_label":"outdoor","dim":4,"vector":[0,1,0,0]}"#;
        let c = r#"{"photo_id":"x3","post_id":"p1","scene_label":"indoor","dim":5,"vector":[0,1,0,0,0]}"#;
        let out = parse_embeddings(format!("{a}\n{b}\n").as_bytes()).unwrap();
        assert_eq!(out.records.len(), 2);

        match parse_embeddings(format!("{a}\n{c}\n").as_bytes()) {
            Err(IngestError::DimensionMismatch { photo_id, expected, found }) => {
                assert_eq!((photo_id.as_str(), expected, found), ("x3", 4, 5));
            }
            other => panic!("expected dimension mismatch, got {other:?}"),
        }

        let garden = a.replace("indoor", "garden");
        let out = parse_embeddings(garden.as_bytes()).unwrap();
        assert!(out.records.is_empty());
        let reason = &out.rejects[0].reason;
        assert!(reason.contains("indoor") && reason.contains("outdoor") && reason.contains("unknown"));
    }

    #[test]
    fn embeddings_unknown_without_vector_and_zero_norm() {
        let undecodable = r#"{"photo_id":"x9","post_id":"p1","scene_label":"unknown"}"#;
        let zero = r#"{"photo_id":"x8","post_id":"p1","scene_label":"indoor","dim":2,"vector":[0,0]}"#;
        let out = parse_embeddings(format!("{undecodable}\n{zero}\n").as_bytes()).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.records[0].embedding, None);
        assert!(out.rejects[0].reason.contains("zero-norm"));
    }

    #[test]
    fn listing_round_trip() {
        let out = parse_listings(LISTING.as_bytes()).unwrap();
        let mut buf = Vec::new();
        write_listings(&mut buf, &out.records).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().trim_end(), LISTING);
    }

    fn arb_listing() -> impl Strategy<Value = Listing> {
        (
            "[a-z0-9]{1,8}",
            "[a-z0-9]{1,8}",
            prop_oneof![
                Just(RoomType::EntireHome),
                Just(RoomType::PrivateRoom),
                Just(RoomType::SharedRoom)
            ],
            1u32..60,
            -90.0f64..90.0,
            -180.0f64..180.0,
            proptest::collection::vec("[a-z0-9]{1,6}", 0..4),
            0i64..20_000,
            ".{0,20}",
        )
            .prop_map(|(post, owner, room, nights, lat, lon, photos, day, title)| Listing {
                post_id: post,
                owner_id: owner,
                room_type: room,
                min_nights: nights,
                public_location: GeoPoint { lat, lon },
                photo_ids: photos,
                created_date: NaiveDate::from_ymd_opt(1990, 1, 1).unwrap()
                    + chrono::Duration::days(day),
                title,
            })
    }

    proptest! {
        #[test]
        fn parsing_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..512)) {
            let _ = parse_listings(bytes.as_slice());
            let _ = parse_permits(bytes.as_slice());
            let _ = parse_embeddings(bytes.as_slice());
            let _ = parse_reviews(bytes.as_slice());
            let _ = parse_owners(bytes.as_slice());
        }

        #[test]
        fn listings_serialize_parse_round_trip(listing in arb_listing()) {
            let mut buf = Vec::new();
            write_listings(&mut buf, std::slice::from_ref(&listing)).unwrap();
            let out = parse_listings(buf.as_slice()).unwrap();
            prop_assert!(out.rejects.is_empty());
            prop_assert_eq!(&out.records[0], &listing);
            let mut again = Vec::new();
            write_listings(&mut again, &out.records).unwrap();
            prop_assert_eq!(buf, again);
        }

        #[test]
        fn line_order_does_not_change_entity_set(seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let lines: Vec<String> = (0..12)
                .map(|i| LISTING.replace("\"p1\"", &format!("\"p{i}\"")))
                .collect();
            let mut shuffled = lines.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let ids = |ls: &[String]| {
                let out = parse_listings(ls.join("\n").as_bytes()).unwrap();
                out.records.into_iter().map(|l| l.post_id).collect::<std::collections::BTreeSet<_>>()
            };
            prop_assert_eq!(ids(&lines), ids(&shuffled));
        }
    }
}
