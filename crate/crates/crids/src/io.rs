//! Input loading and tabular output: delimited site/elevation/cost
//! tables and geo-interchange feature layers.
//!
//! Sites arrive as UTF-8 comma-separated text with a header row. Headers
//! resolve through the config's alias map, then canonical factor names,
//! then short codes; anything else rides along as per-site metadata.

use std::collections::BTreeMap;
use std::path::Path;

use crate::config::{ColumnRole, RunConfig};
use crate::error::{Error, Result};
use crate::geo::{Attributes, ElevationSample, Feature, FeatureLayer, Geometry, LayerKind};
use crate::model::{AdaptationKind, Factor, Point, Site};

fn parse_error(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

fn csv_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| parse_error(path, 0, e.to_string()))
}

fn record_line(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

/// Load the sites table. Requires `id`, `x`, and `y` columns (possibly
/// via aliases); factor columns fill the raw map, empty cells mean the
/// factor is unmeasured, and unrecognized columns become metadata.
pub fn load_sites(path: &Path, config: &RunConfig) -> Result<Vec<Site>> {
    let mut reader = csv_reader(path)?;
    let headers = reader
        .headers()
        .map_err(|e| parse_error(path, 1, e.to_string()))?
        .clone();

    let mut id_col = None;
    let mut x_col = None;
    let mut y_col = None;
    let mut factor_cols: Vec<(usize, Factor)> = Vec::new();
    let mut metadata_cols: Vec<(usize, String)> = Vec::new();
    for (i, header) in headers.iter().enumerate() {
        match config.resolve_column(header) {
            ColumnRole::Id => id_col = Some(i),
            ColumnRole::X => x_col = Some(i),
            ColumnRole::Y => y_col = Some(i),
            ColumnRole::Factor(factor) => factor_cols.push((i, factor)),
            ColumnRole::Metadata => metadata_cols.push((i, header.to_string())),
        }
    }
    let id_col = id_col.ok_or_else(|| parse_error(path, 1, "missing required column 'id'"))?;
    let x_col = x_col.ok_or_else(|| parse_error(path, 1, "missing required column 'x'"))?;
    let y_col = y_col.ok_or_else(|| parse_error(path, 1, "missing required column 'y'"))?;

    let mut sites = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e
                .position()
                .map(|p| p.line())
                .unwrap_or(0);
            parse_error(path, line, e.to_string())
        })?;
        let line = record_line(&record);
        let field = |i: usize| record.get(i).unwrap_or("");

        let id = field(id_col).to_string();
        if id.is_empty() {
            return Err(parse_error(path, line, "empty site id"));
        }
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateSite { id });
        }
        let parse_f64 = |i: usize, what: &str| -> Result<f64> {
            let text = field(i);
            text.parse::<f64>().map_err(|_| {
                parse_error(path, line, format!("cannot parse {what} value '{text}'"))
            })
        };
        let mut site = Site::new(id, parse_f64(x_col, "x")?, parse_f64(y_col, "y")?);
        for &(i, factor) in &factor_cols {
            let text = field(i);
            if text.is_empty() {
                continue;
            }
            let value = text.parse::<f64>().map_err(|_| {
                parse_error(
                    path,
                    line,
                    format!("cannot parse {} value '{text}'", factor.name()),
                )
            })?;
            site.raw.insert(factor, value);
        }
        for &(i, ref header) in &metadata_cols {
            let text = field(i);
            if !text.is_empty() {
                site.metadata.insert(header.clone(), text.to_string());
            }
        }
        sites.push(site);
    }
    Ok(sites)
}

/// Write sites back out: `id,x,y`, factor columns in registry order for
/// every factor any site carries, then metadata columns. Numbers use
/// shortest round-trip formatting so a load of the output reproduces the
/// input values exactly.
pub fn write_sites(path: &Path, sites: &[Site]) -> Result<()> {
    let factors: Vec<Factor> = Factor::ALL
        .into_iter()
        .filter(|f| sites.iter().any(|s| s.raw.contains_key(f)))
        .collect();
    let mut metadata_keys: Vec<String> = Vec::new();
    for site in sites {
        for key in site.metadata.keys() {
            if !metadata_keys.contains(key) {
                metadata_keys.push(key.clone());
            }
        }
    }
    metadata_keys.sort();

    let mut writer =
        csv::Writer::from_path(path).map_err(|e| parse_error(path, 0, e.to_string()))?;
    let mut header = vec!["id".to_string(), "x".to_string(), "y".to_string()];
    header.extend(factors.iter().map(|f| f.name().to_string()));
    header.extend(metadata_keys.iter().cloned());
    writer
        .write_record(&header)
        .map_err(|e| parse_error(path, 0, e.to_string()))?;
    for site in sites {
        let mut row = vec![
            site.id.clone(),
            format!("{}", site.point.x),
            format!("{}", site.point.y),
        ];
        for factor in &factors {
            row.push(match site.raw.get(factor) {
                Some(v) => format!("{v}"),
                None => String::new(),
            });
        }
        for key in &metadata_keys {
            row.push(site.metadata.get(key).cloned().unwrap_or_default());
        }
        writer
            .write_record(&row)
            .map_err(|e| parse_error(path, 0, e.to_string()))?;
    }
    writer
        .flush()
        .map_err(|e| parse_error(path, 0, e.to_string()))?;
    Ok(())
}

/// Load per-site elevation samples: columns `id`, `ground_elevation`,
/// `groundwater_elevation`.
pub fn load_elevations(path: &Path) -> Result<BTreeMap<String, ElevationSample>> {
    let mut reader = csv_reader(path)?;
    let headers = reader
        .headers()
        .map_err(|e| parse_error(path, 1, e.to_string()))?
        .clone();
    let find = |names: &[&str]| {
        headers
            .iter()
            .position(|h| names.contains(&h))
    };
    let id_col = find(&["id", "site_id", "APNO"])
        .ok_or_else(|| parse_error(path, 1, "missing required column 'id'"))?;
    let ground_col = find(&["ground_elevation"])
        .ok_or_else(|| parse_error(path, 1, "missing required column 'ground_elevation'"))?;
    let gw_col = find(&["groundwater_elevation"])
        .ok_or_else(|| parse_error(path, 1, "missing required column 'groundwater_elevation'"))?;

    let mut samples = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            parse_error(path, e.position().map(|p| p.line()).unwrap_or(0), e.to_string())
        })?;
        let line = record_line(&record);
        let id = record.get(id_col).unwrap_or("").to_string();
        if id.is_empty() {
            return Err(parse_error(path, line, "empty site id"));
        }
        let parse = |i: usize, what: &str| -> Result<f64> {
            let text = record.get(i).unwrap_or("");
            let v: f64 = text.parse().map_err(|_| {
                parse_error(path, line, format!("cannot parse {what} value '{text}'"))
            })?;
            if !v.is_finite() {
                return Err(parse_error(path, line, format!("{what} must be finite, got {v}")));
            }
            Ok(v)
        };
        let sample = ElevationSample {
            site_id: id.clone(),
            ground_elevation: parse(ground_col, "ground_elevation")?,
            groundwater_elevation: parse(gw_col, "groundwater_elevation")?,
        };
        if samples.insert(id.clone(), sample).is_some() {
            return Err(Error::DuplicateSite { id });
        }
    }
    Ok(samples)
}

/// Load per-site option costs: columns `id`, `option`, `cost`. `option`
/// takes the option's name or numeric id.
pub fn load_costs(path: &Path) -> Result<BTreeMap<AdaptationKind, BTreeMap<String, f64>>> {
    let mut reader = csv_reader(path)?;
    let headers = reader
        .headers()
        .map_err(|e| parse_error(path, 1, e.to_string()))?
        .clone();
    let find = |names: &[&str]| headers.iter().position(|h| names.contains(&h));
    let id_col = find(&["id", "site_id", "APNO"])
        .ok_or_else(|| parse_error(path, 1, "missing required column 'id'"))?;
    let option_col = find(&["option", "kind"])
        .ok_or_else(|| parse_error(path, 1, "missing required column 'option'"))?;
    let cost_col = find(&["cost"])
        .ok_or_else(|| parse_error(path, 1, "missing required column 'cost'"))?;

    let mut costs: BTreeMap<AdaptationKind, BTreeMap<String, f64>> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            parse_error(path, e.position().map(|p| p.line()).unwrap_or(0), e.to_string())
        })?;
        let line = record_line(&record);
        let id = record.get(id_col).unwrap_or("").to_string();
        let option_text = record.get(option_col).unwrap_or("");
        let kind = AdaptationKind::from_name(option_text)
            .or_else(|| option_text.parse::<u8>().ok().and_then(AdaptationKind::from_id))
            .ok_or_else(|| {
                parse_error(path, line, format!("unknown adaptation option '{option_text}'"))
            })?;
        let cost_text = record.get(cost_col).unwrap_or("");
        let cost: f64 = cost_text.parse().map_err(|_| {
            parse_error(path, line, format!("cannot parse cost value '{cost_text}'"))
        })?;
        if !(cost >= 0.0) || !cost.is_finite() {
            return Err(parse_error(path, line, format!("cost must be nonnegative, got {cost}")));
        }
        costs.entry(kind).or_default().insert(id, cost);
    }
    Ok(costs)
}

fn json_point(value: &serde_json::Value) -> Option<Point> {
    let coords = value.as_array()?;
    Some(Point {
        x: coords.first()?.as_f64()?,
        y: coords.get(1)?.as_f64()?,
    })
}

fn json_path(value: &serde_json::Value) -> Option<Vec<Point>> {
    value
        .as_array()?
        .iter()
        .map(json_point)
        .collect::<Option<Vec<Point>>>()
}

/// Drop consecutive duplicate vertices; keeps the path's endpoints.
fn dedup_consecutive(mut vertices: Vec<Point>) -> Vec<Point> {
    vertices.dedup();
    vertices
}

fn close_ring(mut ring: Vec<Point>) -> Vec<Point> {
    if ring.first() != ring.last() {
        if let Some(&first) = ring.first() {
            ring.push(first);
        }
    }
    ring
}

fn json_rings(
    value: &serde_json::Value,
    layer: &str,
    index: usize,
) -> Result<(Vec<Point>, Vec<Vec<Point>>)> {
    let rings: Vec<Vec<Point>> = value
        .as_array()
        .and_then(|rings| rings.iter().map(json_path).collect())
        .ok_or_else(|| Error::BadGeometry {
            layer: layer.to_string(),
            index,
            message: "polygon coordinates are not arrays of rings".into(),
        })?;
    let mut rings = rings.into_iter();
    let outer = rings.next().ok_or_else(|| Error::BadGeometry {
        layer: layer.to_string(),
        index,
        message: "polygon has no rings".into(),
    })?;
    let outer = close_ring(dedup_consecutive(outer));
    if outer.len() < 4 {
        return Err(Error::BadGeometry {
            layer: layer.to_string(),
            index,
            message: "outer ring has fewer than 3 distinct vertices".into(),
        });
    }
    let holes: Vec<Vec<Point>> = rings
        .map(|ring| close_ring(dedup_consecutive(ring)))
        .collect();
    Ok((outer, holes))
}

/// Parse one geo-interchange document (a FeatureCollection of features
/// with projected coordinates) into a layer named `name`. Multi-part
/// geometries are split into one feature per part, all sharing the
/// source feature's attributes. The collection must be homogeneous; its
/// kind is taken from the first feature.
pub fn load_layer(path: &Path, name: &str) -> Result<FeatureLayer> {
    let text = std::fs::read_to_string(path)?;
    let doc: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| parse_error(path, e.line() as u64, e.to_string()))?;
    let features_json = doc
        .get("features")
        .and_then(|f| f.as_array())
        .ok_or_else(|| parse_error(path, 0, "document has no 'features' array"))?;

    let mut features: Vec<Feature> = Vec::new();
    for (index, feature_json) in features_json.iter().enumerate() {
        let bad = |message: String| Error::BadGeometry {
            layer: name.to_string(),
            index,
            message,
        };
        let geometry_json = feature_json
            .get("geometry")
            .filter(|g| !g.is_null())
            .ok_or_else(|| bad("feature has no geometry".into()))?;
        let geom_type = geometry_json
            .get("type")
            .and_then(|t| t.as_str())
            .ok_or_else(|| bad("geometry has no type".into()))?;
        let coordinates = geometry_json
            .get("coordinates")
            .ok_or_else(|| bad("geometry has no coordinates".into()))?;
        let attributes: Attributes = feature_json
            .get("properties")
            .and_then(|p| p.as_object())
            .map(|obj| obj.iter().map(|(k, v)| (k.clone(), v.clone())).collect())
            .unwrap_or_default();

        let mut push = |geometry: Geometry| {
            features.push(Feature {
                geometry,
                attributes: attributes.clone(),
            })
        };
        match geom_type {
            "Point" => {
                let p = json_point(coordinates)
                    .ok_or_else(|| bad("point coordinates are not [x, y]".into()))?;
                push(Geometry::Point(p));
            }
            "MultiPoint" => {
                let points = json_path(coordinates)
                    .ok_or_else(|| bad("multipoint coordinates are not positions".into()))?;
                for p in points {
                    push(Geometry::Point(p));
                }
            }
            "LineString" => {
                let vertices = dedup_consecutive(
                    json_path(coordinates)
                        .ok_or_else(|| bad("linestring coordinates are not positions".into()))?,
                );
                if vertices.len() < 2 {
                    return Err(bad("linestring has fewer than 2 distinct vertices".into()));
                }
                push(Geometry::Polyline(vertices));
            }
            "MultiLineString" => {
                let lines = coordinates
                    .as_array()
                    .ok_or_else(|| bad("multilinestring coordinates are not arrays".into()))?;
                for line in lines {
                    let vertices = dedup_consecutive(
                        json_path(line)
                            .ok_or_else(|| bad("linestring part is not positions".into()))?,
                    );
                    if vertices.len() < 2 {
                        return Err(bad("linestring part has fewer than 2 distinct vertices".into()));
                    }
                    push(Geometry::Polyline(vertices));
                }
            }
            "Polygon" => {
                let (outer, holes) = json_rings(coordinates, name, index)?;
                push(Geometry::Polygon { outer, holes });
            }
            "MultiPolygon" => {
                let polygons = coordinates
                    .as_array()
                    .ok_or_else(|| bad("multipolygon coordinates are not arrays".into()))?;
                for polygon in polygons {
                    let (outer, holes) = json_rings(polygon, name, index)?;
                    push(Geometry::Polygon { outer, holes });
                }
            }
            other => return Err(bad(format!("unsupported geometry type '{other}'"))),
        }
    }

    let kind = match features.first().map(|f| &f.geometry) {
        Some(Geometry::Point(_)) | None => LayerKind::Points,
        Some(Geometry::Polyline(_)) => LayerKind::Polylines,
        Some(Geometry::Polygon { .. }) => LayerKind::Polygons,
    };
    FeatureLayer::new(name, kind, features)
}

/// Load every `.geojson`/`.json` document in a directory, keyed and
/// named by file stem, in name order.
pub fn load_layers_dir(dir: &Path) -> Result<BTreeMap<String, FeatureLayer>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .map(|entry| entry.path())
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()),
                Some("geojson") | Some("json")
            )
        })
        .collect();
    paths.sort();
    let mut layers = BTreeMap::new();
    for path in paths {
        let name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_string();
        let layer = load_layer(&path, &name)?;
        layers.insert(name, layer);
    }
    Ok(layers)
}
