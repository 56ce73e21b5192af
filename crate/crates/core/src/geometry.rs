//! Polygon geometry read from GeoJSON feature collections.

use std::fs;
use std::path::Path;

use serde_json::Value;
use thiserror::Error;

use crate::ingest::Point;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid GeoJSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("feature {index}: {reason}")]
    Feature { index: usize, reason: String },
    #[error("region {region_id:?}: ring {ring} is not closed or has fewer than 4 positions")]
    UnclosedRing { region_id: String, ring: usize },
    #[error("region {region_id:?}: non-finite coordinate")]
    NonFinite { region_id: String },
    #[error("duplicate region id {0:?} in geometry")]
    DuplicateRegion(String),
}

/// Closed ring of positions, first position repeated last.
pub type Ring = Vec<Point>;

#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    pub exterior: Ring,
    pub holes: Vec<Ring>,
}

impl Polygon {
    pub fn new(exterior: Ring) -> Self {
        Self {
            exterior,
            holes: Vec::new(),
        }
    }

    pub fn rings(&self) -> impl Iterator<Item = &Ring> {
        std::iter::once(&self.exterior).chain(self.holes.iter())
    }
}

/// The polygon or multipolygon footprint of one region.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionGeometry {
    pub region_id: String,
    pub polygons: Vec<Polygon>,
}

impl RegionGeometry {
    pub fn new(region_id: impl Into<String>, polygons: Vec<Polygon>) -> Self {
        Self {
            region_id: region_id.into(),
            polygons,
        }
    }

    /// Axis-aligned rectangle `[x0, x1] × [y0, y1]`, counter-clockwise.
    pub fn rectangle(region_id: impl Into<String>, x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        let ring = vec![
            Point::new(x0, y0),
            Point::new(x1, y0),
            Point::new(x1, y1),
            Point::new(x0, y1),
            Point::new(x0, y0),
        ];
        Self::new(region_id, vec![Polygon::new(ring)])
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        for (r, ring) in self.polygons.iter().flat_map(|p| p.rings()).enumerate() {
            if ring.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
                return Err(GeometryError::NonFinite {
                    region_id: self.region_id.clone(),
                });
            }
            if ring.len() < 4 || ring.first() != ring.last() {
                return Err(GeometryError::UnclosedRing {
                    region_id: self.region_id.clone(),
                    ring: r,
                });
            }
        }
        Ok(())
    }

    /// Area-weighted centroid of the largest exterior ring.
    ///
    /// Degenerate (zero-area) rings fall back to the vertex mean.
    pub fn centroid(&self) -> Option<Point> {
        let ring = self
            .polygons
            .iter()
            .map(|p| &p.exterior)
            .max_by(|a, b| ring_area(a).abs().total_cmp(&ring_area(b).abs()))?;
        let area = ring_area(ring);
        if area == 0.0 {
            let open = &ring[..ring.len().saturating_sub(1).max(1)];
            let n = open.len() as f64;
            let (sx, sy) = open.iter().fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
            return Some(Point::new(sx / n, sy / n));
        }
        // Shift to the first vertex to keep the cross products small.
        let o = ring[0];
        let (mut cx, mut cy) = (0.0, 0.0);
        for w in ring.windows(2) {
            let (ax, ay) = (w[0].x - o.x, w[0].y - o.y);
            let (bx, by) = (w[1].x - o.x, w[1].y - o.y);
            let cross = ax * by - bx * ay;
            cx += (ax + bx) * cross;
            cy += (ay + by) * cross;
        }
        Some(Point::new(o.x + cx / (6.0 * area), o.y + cy / (6.0 * area)))
    }
}

/// Signed shoelace area; positive for counter-clockwise rings.
pub fn ring_area(ring: &[Point]) -> f64 {
    if ring.is_empty() {
        return 0.0;
    }
    let o = ring[0];
    ring.windows(2)
        .map(|w| (w[0].x - o.x) * (w[1].y - o.y) - (w[1].x - o.x) * (w[0].y - o.y))
        .sum::<f64>()
        / 2.0
}

/// Parsed feature collection: the raw document (kept for re-export) and the
/// region footprints in feature order.
#[derive(Debug, Clone)]
pub struct GeoCollection {
    pub document: Value,
    pub regions: Vec<RegionGeometry>,
}

pub fn load_geojson(path: impl AsRef<Path>) -> Result<GeoCollection, GeometryError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| GeometryError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_geojson(&text)
}

pub fn parse_geojson(text: &str) -> Result<GeoCollection, GeometryError> {
    let document: Value = serde_json::from_str(text)?;
    let features = document
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| GeometryError::Feature {
            index: 0,
            reason: "document is not a FeatureCollection".into(),
        })?;

    let mut regions = Vec::with_capacity(features.len());
    let mut seen = std::collections::HashSet::new();
    for (index, feature) in features.iter().enumerate() {
        let fail = |reason: &str| GeometryError::Feature {
            index,
            reason: reason.into(),
        };
        let region_id = feature_region_id(feature).ok_or_else(|| fail("missing \"region_id\" property"))?;
        if !seen.insert(region_id.clone()) {
            return Err(GeometryError::DuplicateRegion(region_id));
        }
        let geometry = feature.get("geometry").ok_or_else(|| fail("missing geometry"))?;
        let coords = geometry.get("coordinates").ok_or_else(|| fail("missing coordinates"))?;
        let polygons = match geometry.get("type").and_then(Value::as_str) {
            Some("Polygon") => vec![parse_polygon(coords).ok_or_else(|| fail("bad Polygon coordinates"))?],
            Some("MultiPolygon") => coords
                .as_array()
                .ok_or_else(|| fail("bad MultiPolygon coordinates"))?
                .iter()
                .map(|p| parse_polygon(p).ok_or_else(|| fail("bad MultiPolygon coordinates")))
                .collect::<Result<_, _>>()?,
            _ => return Err(fail("geometry must be Polygon or MultiPolygon")),
        };
        let region = RegionGeometry::new(region_id, polygons);
        region.validate()?;
        regions.push(region);
    }
    Ok(GeoCollection { document, regions })
}

/// `region_id` property as a string; numeric ids are accepted.
pub fn feature_region_id(feature: &Value) -> Option<String> {
    match feature.get("properties")?.get("region_id")? {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn parse_polygon(value: &Value) -> Option<Polygon> {
    let mut rings = value
        .as_array()?
        .iter()
        .map(parse_ring)
        .collect::<Option<Vec<_>>>()?
        .into_iter();
    let exterior = rings.next()?;
    Some(Polygon {
        exterior,
        holes: rings.collect(),
    })
}

fn parse_ring(value: &Value) -> Option<Ring> {
    value
        .as_array()?
        .iter()
        .map(|pos| {
            let pos = pos.as_array()?;
            Some(Point::new(pos.first()?.as_f64()?, pos.get(1)?.as_f64()?))
        })
        .collect()
}

/// Builds a FeatureCollection of the given footprints with a `region_id`
/// property on each feature.
pub fn to_geojson(regions: &[RegionGeometry]) -> Value {
    let position = |p: &Point| serde_json::json!([p.x, p.y]);
    let ring = |r: &Ring| Value::Array(r.iter().map(position).collect());
    let polygon = |p: &Polygon| Value::Array(p.rings().map(ring).collect());
    let features = regions
        .iter()
        .map(|region| {
            let geometry = if region.polygons.len() == 1 {
                serde_json::json!({"type": "Polygon", "coordinates": polygon(&region.polygons[0])})
            } else {
                serde_json::json!({
                    "type": "MultiPolygon",
                    "coordinates": region.polygons.iter().map(polygon).collect::<Vec<_>>(),
                })
            };
            serde_json::json!({
                "type": "Feature",
                "properties": {"region_id": region.region_id},
                "geometry": geometry,
            })
        })
        .collect::<Vec<_>>();
    serde_json::json!({"type": "FeatureCollection", "features": features})
}
