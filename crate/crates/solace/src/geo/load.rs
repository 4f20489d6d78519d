//! Loader for the four-file GeoJSON environment profile.
//!
//! Expected files: building footprints, road centerlines, safe areas, soil
//! zones. All geometry must be in a projected CRS in meters; inputs whose
//! coordinates all fit longitude/latitude ranges are refused. Polygons carry
//! a single exterior ring (no holes), which is normalized to CCW here.
//! Internal ids are dense and positional: feature order in the file.

use std::path::{Path, PathBuf};

use serde_json::Value;

use super::geom::{self, Bbox, Point2D};
use super::graph::{GraphBuilder, SegmentOutcome};
use super::{
    BuildingFootprint, BuildingId, Environment, GeoConfig, GeoError, SafeArea, SafeAreaId,
    SoilZone, SoilZoneId, Typology, VulnerabilityClass,
};

#[derive(Debug, Clone)]
pub struct GeoPaths {
    pub buildings: PathBuf,
    pub roads: PathBuf,
    pub safe_areas: PathBuf,
    pub soil: PathBuf,
}

pub fn load_environment(paths: &GeoPaths, config: GeoConfig) -> Result<Environment, GeoError> {
    let building_feats = read_features(&paths.buildings)?;
    let road_feats = read_features(&paths.roads)?;
    let safe_feats = read_features(&paths.safe_areas)?;
    let soil_feats = read_features(&paths.soil)?;

    let mut all_coords: Vec<Point2D> = Vec::new();

    let mut buildings = Vec::new();
    for (i, feat) in building_feats.iter().enumerate() {
        let path = path_str(&paths.buildings);
        let ring = polygon_ring(feat, &path, i)?;
        all_coords.extend_from_slice(&ring);
        let props = properties(feat, &path, i)?;
        let height = number_prop(props, "height", &path, i)?;
        if !(height > 0.0) {
            return Err(profile(&path, i, "height must be > 0"));
        }
        let typology = string_prop(props, "typology", &path, i)?;
        let typology = Typology::parse(typology).ok_or_else(|| {
            profile(
                &path,
                i,
                &format!("unknown typology {typology:?} (expected home/work/school/public)"),
            )
        })?;
        let vulnerability = string_prop(props, "vulnerability_class", &path, i)?;
        let vulnerability = VulnerabilityClass::parse(vulnerability).ok_or_else(|| {
            profile(
                &path,
                i,
                &format!("unknown vulnerability_class {vulnerability:?} (expected masonry/concrete)"),
            )
        })?;
        let damage_probabilities = damage_table(props, &path, i)?;
        buildings.push(BuildingFootprint {
            id: BuildingId(i as u32),
            centroid: geom::ring_centroid(&ring),
            bbox: Bbox::of_ring(&ring),
            ring,
            height,
            typology,
            vulnerability,
            damage_probabilities,
        });
    }

    let mut safe_areas = Vec::new();
    for (i, feat) in safe_feats.iter().enumerate() {
        let path = path_str(&paths.safe_areas);
        let ring = polygon_ring(feat, &path, i)?;
        all_coords.extend_from_slice(&ring);
        safe_areas.push(SafeArea {
            id: SafeAreaId(i as u32),
            centroid: geom::ring_centroid(&ring),
            bbox: Bbox::of_ring(&ring),
            ring,
        });
    }

    let mut soil_zones = Vec::new();
    for (i, feat) in soil_feats.iter().enumerate() {
        let path = path_str(&paths.soil);
        let ring = polygon_ring(feat, &path, i)?;
        all_coords.extend_from_slice(&ring);
        let props = properties(feat, &path, i)?;
        let modifier = number_prop(props, "intensity_modifier", &path, i)?;
        if modifier.fract() != 0.0 || !(-1.0..=1.0).contains(&modifier) {
            return Err(profile(&path, i, "intensity_modifier must be -1, 0, or 1"));
        }
        soil_zones.push(SoilZone {
            id: SoilZoneId(i as u32),
            bbox: Bbox::of_ring(&ring),
            intensity_modifier: modifier as i8,
            ring,
        });
    }

    let mut lines: Vec<(usize, Vec<Point2D>, f64)> = Vec::new();
    for (i, feat) in road_feats.iter().enumerate() {
        let path = path_str(&paths.roads);
        let line = linestring(feat, &path, i)?;
        all_coords.extend_from_slice(&line);
        let props = properties(feat, &path, i)?;
        let width = number_prop(props, "width", &path, i)?;
        if !(width > 0.0) {
            return Err(profile(&path, i, "width must be > 0"));
        }
        lines.push((i, line, width));
    }

    // Refuse degree-shaped input before interpreting anything in meters.
    if !all_coords.is_empty()
        && all_coords
            .iter()
            .all(|p| p.x.abs() <= 180.0 && p.y.abs() <= 90.0)
    {
        return Err(GeoError::LonLatLike);
    }

    let mut builder = GraphBuilder::new(config.snap_tolerance);
    for (i, line, width) in &lines {
        for (s, pair) in line.windows(2).enumerate() {
            if let SegmentOutcome::Collapsed = builder.add_segment(pair[0], pair[1], *width) {
                return Err(GeoError::ZeroLengthSegment {
                    path: path_str(&paths.roads),
                    feature: *i,
                    segment: s,
                });
            }
        }
    }
    let graph = builder.build();

    Environment::assemble(buildings, safe_areas, soil_zones, graph, config)
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn profile(path: &str, feature: usize, msg: &str) -> GeoError {
    GeoError::Profile {
        path: path.to_string(),
        feature,
        msg: msg.to_string(),
    }
}

fn read_features(path: &Path) -> Result<Vec<Value>, GeoError> {
    let text = std::fs::read_to_string(path).map_err(|source| GeoError::Io {
        path: path_str(path),
        source,
    })?;
    let root: Value = serde_json::from_str(&text).map_err(|source| GeoError::Json {
        path: path_str(path),
        source,
    })?;
    let kind = root.get("type").and_then(Value::as_str);
    if kind != Some("FeatureCollection") {
        return Err(GeoError::File {
            path: path_str(path),
            msg: "root object must be a FeatureCollection".to_string(),
        });
    }
    let features = root
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| GeoError::File {
            path: path_str(path),
            msg: "missing features array".to_string(),
        })?;
    Ok(features.to_vec())
}

fn properties<'a>(feat: &'a Value, path: &str, i: usize) -> Result<&'a Value, GeoError> {
    feat.get("properties")
        .filter(|p| p.is_object())
        .ok_or_else(|| profile(path, i, "missing properties object"))
}

fn number_prop(props: &Value, key: &str, path: &str, i: usize) -> Result<f64, GeoError> {
    props
        .get(key)
        .and_then(Value::as_f64)
        .ok_or_else(|| profile(path, i, &format!("missing numeric property {key:?}")))
}

fn string_prop<'a>(props: &'a Value, key: &str, path: &str, i: usize) -> Result<&'a str, GeoError> {
    props
        .get(key)
        .and_then(Value::as_str)
        .ok_or_else(|| profile(path, i, &format!("missing string property {key:?}")))
}

fn geometry<'a>(feat: &'a Value, want: &str, path: &str, i: usize) -> Result<&'a Value, GeoError> {
    if feat.get("type").and_then(Value::as_str) != Some("Feature") {
        return Err(profile(path, i, "not a Feature"));
    }
    let geom = feat
        .get("geometry")
        .ok_or_else(|| profile(path, i, "missing geometry"))?;
    let kind = geom.get("type").and_then(Value::as_str);
    if kind != Some(want) {
        return Err(profile(
            path,
            i,
            &format!("geometry must be {want}, got {kind:?}"),
        ));
    }
    Ok(geom)
}

fn position(v: &Value, path: &str, i: usize) -> Result<Point2D, GeoError> {
    let arr = v
        .as_array()
        .filter(|a| a.len() >= 2)
        .ok_or_else(|| profile(path, i, "position must be [x, y]"))?;
    let x = arr[0]
        .as_f64()
        .ok_or_else(|| profile(path, i, "non-numeric coordinate"))?;
    let y = arr[1]
        .as_f64()
        .ok_or_else(|| profile(path, i, "non-numeric coordinate"))?;
    if !x.is_finite() || !y.is_finite() {
        return Err(profile(path, i, "non-finite coordinate"));
    }
    Ok(Point2D::new(x, y))
}

/// Exterior ring of a Polygon feature: closed in the file, returned open and
/// CCW. Holes are rejected.
fn polygon_ring(feat: &Value, path: &str, i: usize) -> Result<Vec<Point2D>, GeoError> {
    let geom_v = geometry(feat, "Polygon", path, i)?;
    let rings = geom_v
        .get("coordinates")
        .and_then(Value::as_array)
        .ok_or_else(|| profile(path, i, "missing coordinates"))?;
    if rings.is_empty() {
        return Err(profile(path, i, "polygon has no rings"));
    }
    if rings.len() > 1 {
        return Err(profile(path, i, "interior rings (holes) are not supported"));
    }
    let raw = rings[0]
        .as_array()
        .ok_or_else(|| profile(path, i, "ring must be an array of positions"))?;
    let mut ring: Vec<Point2D> = raw
        .iter()
        .map(|v| position(v, path, i))
        .collect::<Result<_, _>>()?;
    if ring.len() < 4 || ring.first().map(|p| (p.x, p.y)) != ring.last().map(|p| (p.x, p.y)) {
        return Err(profile(
            path,
            i,
            "ring must be closed (first position repeated last) with >= 3 distinct vertices",
        ));
    }
    ring.pop(); // drop the closing duplicate
    if !geom::ring_is_simple(&ring) {
        return Err(profile(path, i, "ring is degenerate or self-intersecting"));
    }
    let area = geom::ring_signed_area(&ring);
    if area.abs() < 1e-9 {
        return Err(profile(path, i, "ring encloses no area"));
    }
    if area < 0.0 {
        ring.reverse();
    }
    Ok(ring)
}

fn linestring(feat: &Value, path: &str, i: usize) -> Result<Vec<Point2D>, GeoError> {
    let geom_v = geometry(feat, "LineString", path, i)?;
    let raw = geom_v
        .get("coordinates")
        .and_then(Value::as_array)
        .ok_or_else(|| profile(path, i, "missing coordinates"))?;
    if raw.len() < 2 {
        return Err(profile(path, i, "LineString needs at least 2 positions"));
    }
    raw.iter().map(|v| position(v, path, i)).collect()
}

/// Optional per-building damage table: object keyed by intensity level
/// ("1".."12"), probabilities in [0,1], non-decreasing with level.
fn damage_table(
    props: &Value,
    path: &str,
    i: usize,
) -> Result<Option<Vec<(u8, f64)>>, GeoError> {
    let Some(v) = props.get("damage_probabilities") else {
        return Ok(None);
    };
    let obj = v
        .as_object()
        .ok_or_else(|| profile(path, i, "damage_probabilities must be an object"))?;
    let mut table: Vec<(u8, f64)> = Vec::with_capacity(obj.len());
    for (k, val) in obj {
        let level: u8 = k
            .parse()
            .ok()
            .filter(|l| (1..=12).contains(l))
            .ok_or_else(|| {
                profile(
                    path,
                    i,
                    &format!("damage_probabilities key {k:?} is not an intensity level 1..12"),
                )
            })?;
        let p = val
            .as_f64()
            .filter(|p| (0.0..=1.0).contains(p))
            .ok_or_else(|| {
                profile(
                    path,
                    i,
                    &format!("damage_probabilities[{k:?}] must be a probability in [0,1]"),
                )
            })?;
        table.push((level, p));
    }
    table.sort_by_key(|(l, _)| *l);
    if table.windows(2).any(|w| w[1].1 < w[0].1) {
        return Err(profile(
            path,
            i,
            "damage probabilities must be non-decreasing with intensity",
        ));
    }
    Ok(Some(table))
}
