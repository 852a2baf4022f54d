//! Geospatial feature extraction: derive raw factor values for each site
//! from feature layers (nearest distances, zone membership, flood
//! exposure) and from per-site elevation samples (vertical separation
//! under a sea-level-rise scenario).
//!
//! All geometry is planar Euclidean in a projected coordinate system
//! (US ft). Inputs are expected pre-projected; no CRS handling here.

mod grid;

pub use grid::GridIndex;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Factor, Point, Scenario, Site};

/// Per-feature attribute map, as parsed from the layer document.
pub type Attributes = BTreeMap<String, serde_json::Value>;

/// One geometry. Polygon rings are stored closed (first vertex repeated
/// at the end); holes subtract from the outer ring.
#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    Point(Point),
    Polyline(Vec<Point>),
    Polygon {
        outer: Vec<Point>,
        holes: Vec<Vec<Point>>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feature {
    pub geometry: Geometry,
    pub attributes: Attributes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Points,
    Polylines,
    Polygons,
}

impl LayerKind {
    pub fn name(self) -> &'static str {
        match self {
            LayerKind::Points => "points",
            LayerKind::Polylines => "polylines",
            LayerKind::Polygons => "polygons",
        }
    }
}

/// A named collection of features of one geometry kind.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureLayer {
    pub name: String,
    pub kind: LayerKind,
    pub features: Vec<Feature>,
}

impl FeatureLayer {
    /// Build a layer, checking every feature against the declared kind.
    pub fn new(name: impl Into<String>, kind: LayerKind, features: Vec<Feature>) -> Result<Self> {
        let name = name.into();
        for (index, feature) in features.iter().enumerate() {
            let found = match feature.geometry {
                Geometry::Point(_) => LayerKind::Points,
                Geometry::Polyline(_) => LayerKind::Polylines,
                Geometry::Polygon { .. } => LayerKind::Polygons,
            };
            if found != kind {
                return Err(Error::GeometryKind {
                    layer: name,
                    expected: kind.name().to_string(),
                    found: found.name().to_string(),
                });
            }
            if let Geometry::Polyline(vertices) = &feature.geometry {
                if vertices.len() < 2 {
                    return Err(Error::BadGeometry {
                        layer: name,
                        index,
                        message: "polyline has fewer than 2 distinct vertices".into(),
                    });
                }
            }
        }
        Ok(FeatureLayer {
            name,
            kind,
            features,
        })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

/// Euclidean distance from `p` to the closest point of segment `ab`.
/// A degenerate segment (`a == b`) reduces to point distance.
pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    let foot = Point {
        x: a.x + t * dx,
        y: a.y + t * dy,
    };
    p.distance(foot)
}

fn on_any_ring_boundary(p: Point, rings: &[&[Point]]) -> bool {
    rings.iter().any(|ring| {
        ring.windows(2)
            .any(|seg| point_segment_distance(p, seg[0], seg[1]) == 0.0)
    })
}

fn ray_crossings_odd(p: Point, ring: &[Point]) -> bool {
    let mut inside = false;
    for seg in ring.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        if (a.y > p.y) != (b.y > p.y) {
            let x_int = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x_int {
                inside = !inside;
            }
        }
    }
    inside
}

/// Even-odd point-in-polygon test. Points on any ring boundary (outer or
/// hole) count as inside; interior points of holes count as outside.
pub fn point_in_polygon(p: Point, outer: &[Point], holes: &[Vec<Point>]) -> bool {
    let mut rings: Vec<&[Point]> = vec![outer];
    rings.extend(holes.iter().map(|h| h.as_slice()));
    if on_any_ring_boundary(p, &rings) {
        return true;
    }
    rings
        .iter()
        .fold(false, |acc, ring| acc ^ ray_crossings_odd(p, ring))
}

/// Minimum distance from `p` to one feature. Zero for a point inside a
/// polygon; otherwise distance to the nearest vertex, segment, or ring.
pub fn feature_distance(p: Point, feature: &Feature) -> f64 {
    match &feature.geometry {
        Geometry::Point(q) => p.distance(*q),
        Geometry::Polyline(vertices) => vertices
            .windows(2)
            .map(|seg| point_segment_distance(p, seg[0], seg[1]))
            .fold(f64::INFINITY, f64::min),
        Geometry::Polygon { outer, holes } => {
            if point_in_polygon(p, outer, holes) {
                return 0.0;
            }
            let mut best = f64::INFINITY;
            for ring in std::iter::once(outer).chain(holes.iter()) {
                for seg in ring.windows(2) {
                    best = best.min(point_segment_distance(p, seg[0], seg[1]));
                }
            }
            best
        }
    }
}

/// Exhaustive nearest-feature scan: the oracle the grid index must match
/// exactly. Ties go to the lowest feature ordinal. Returns `None` for an
/// empty layer.
pub fn nearest_brute_force(p: Point, layer: &FeatureLayer) -> Option<(f64, usize)> {
    let mut best: Option<(f64, usize)> = None;
    for (ordinal, feature) in layer.features.iter().enumerate() {
        let d = feature_distance(p, feature);
        if best.map_or(true, |(bd, _)| d < bd) {
            best = Some((d, ordinal));
        }
    }
    best
}

/// Grid-accelerated nearest-feature query with the brute-force contract:
/// identical distance and identical tie-break (lowest ordinal).
pub fn nearest_feature_distance(
    p: Point,
    layer: &FeatureLayer,
    index: &GridIndex,
) -> Result<(f64, usize)> {
    if layer.is_empty() {
        return Err(Error::EmptyLayer {
            layer: layer.name.clone(),
        });
    }
    let mut best: Option<(f64, usize)> = None;
    if layer.kind == LayerKind::Polygons {
        // Containment short-circuits to distance zero; the segment search
        // below can still find a lower ordinal touching the point.
        for (ordinal, feature) in layer.features.iter().enumerate() {
            if let Geometry::Polygon { outer, holes } = &feature.geometry {
                if point_in_polygon(p, outer, holes) {
                    best = Some((0.0, ordinal));
                    break;
                }
            }
        }
    }
    let from_segments = index.nearest(p);
    let combined = match (best, from_segments) {
        (Some(a), Some(b)) => {
            if (b.0, b.1) < (a.0, a.1) {
                b
            } else {
                a
            }
        }
        (Some(a), None) => a,
        (None, Some(b)) => b,
        (None, None) => {
            return Err(Error::EmptyLayer {
                layer: layer.name.clone(),
            })
        }
    };
    Ok(combined)
}

/// Pre-sampled elevations for one site: parcel-average ground level and
/// wet-season maximum groundwater level, both ft above datum.
#[derive(Debug, Clone, PartialEq)]
pub struct ElevationSample {
    pub site_id: String,
    pub ground_elevation: f64,
    pub groundwater_elevation: f64,
}

/// Vertical separation between the drainfield bottom and the scenario
/// groundwater table:
/// `ground - drainfield_depth - (groundwater + slr * response_ratio)`.
/// Negative means the drainfield sits below the projected table.
pub fn vertical_separation(sample: &ElevationSample, scenario: &Scenario) -> f64 {
    sample.ground_elevation
        - scenario.drainfield_depth
        - (sample.groundwater_elevation + scenario.groundwater_rise())
}

/// How one factor's raw value is derived from geodata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FactorBinding {
    /// Raw value is the nearest-feature distance to the named layer.
    Distance { layer: String },
    /// Raw value is the named attribute of a containing polygon (largest
    /// wins if several contain the site), or 0 outside every polygon.
    FloodZone {
        layer: String,
        #[serde(default = "default_bfe_attribute")]
        attribute: String,
    },
    /// Raw value flags polygon membership: `inside` when the site falls
    /// in any feature of the layer, `outside` otherwise.
    ZoneMembership {
        layer: String,
        #[serde(default = "zero")]
        inside: f64,
        #[serde(default = "one")]
        outside: f64,
    },
    /// Raw value is the vertical separation computed from the site's
    /// elevation sample under the run scenario.
    Elevation,
    /// No geospatial source: the factor arrives pre-extracted or stays
    /// unmeasured. Lets an overlay config switch off a default binding.
    #[serde(rename = "none")]
    Unbound,
}

fn default_bfe_attribute() -> String {
    "BFE".to_string()
}

fn zero() -> f64 {
    0.0
}

fn one() -> f64 {
    1.0
}

impl FactorBinding {
    pub fn layer_name(&self) -> Option<&str> {
        match self {
            FactorBinding::Distance { layer }
            | FactorBinding::FloodZone { layer, .. }
            | FactorBinding::ZoneMembership { layer, .. } => Some(layer),
            FactorBinding::Elevation | FactorBinding::Unbound => None,
        }
    }
}

/// Default factor-to-layer bindings. Layer names here are the expected
/// file stems under the layers directory.
pub fn standard_bindings() -> BTreeMap<Factor, FactorBinding> {
    let mut bindings = BTreeMap::new();
    let distance = |layer: &str| FactorBinding::Distance {
        layer: layer.to_string(),
    };
    bindings.insert(Factor::WetlandDistance, distance("wetlands"));
    bindings.insert(Factor::WellheadDistance, distance("wellheads"));
    bindings.insert(Factor::CanalDistance, distance("canals"));
    bindings.insert(Factor::DrainageDistance, distance("drainage"));
    bindings.insert(Factor::SewerDistance, distance("sewer"));
    bindings.insert(Factor::OverflowDistance, distance("overflow"));
    bindings.insert(
        Factor::FloodExposure,
        FactorBinding::FloodZone {
            layer: "flood_zones".to_string(),
            attribute: default_bfe_attribute(),
        },
    );
    bindings.insert(
        Factor::WellfieldProtectionZone,
        FactorBinding::ZoneMembership {
            layer: "wellfield_zones".to_string(),
            inside: 0.0,
            outside: 1.0,
        },
    );
    bindings.insert(
        Factor::MoratoriumStatus,
        FactorBinding::ZoneMembership {
            layer: "moratorium_basins".to_string(),
            inside: 0.0,
            outside: 1.0,
        },
    );
    bindings.insert(Factor::VerticalSeparation, FactorBinding::Elevation);
    bindings
}

/// Numeric attribute lookup tolerating numbers encoded as strings.
pub fn attribute_f64(attributes: &Attributes, key: &str) -> Option<f64> {
    match attributes.get(key)? {
        serde_json::Value::Number(n) => n.as_f64(),
        serde_json::Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
}

fn containing_polygons<'a>(
    p: Point,
    layer: &'a FeatureLayer,
) -> impl Iterator<Item = &'a Feature> + 'a {
    layer.features.iter().filter(move |f| match &f.geometry {
        Geometry::Polygon { outer, holes } => point_in_polygon(p, outer, holes),
        _ => false,
    })
}

struct ResolvedBinding<'a> {
    factor: Factor,
    binding: &'a FactorBinding,
    layer: Option<&'a FeatureLayer>,
    index: Option<GridIndex>,
}

/// Fill each site's raw map from the bound layers and elevation samples.
///
/// Raw values already present on a site are treated as pre-extracted and
/// left untouched, so datasets can mix measured columns with geodata.
/// Returns human-readable warnings (missing elevation samples, polygons
/// without the expected attribute); a site that cannot be covered is a
/// warning, not an error. A binding whose layer is absent is an error,
/// but only if some site actually needs it.
pub fn extract_features(
    sites: &mut [Site],
    layers: &BTreeMap<String, FeatureLayer>,
    samples: &BTreeMap<String, ElevationSample>,
    scenario: &Scenario,
    bindings: &BTreeMap<Factor, FactorBinding>,
    cell_size: f64,
) -> Result<Vec<String>> {
    // Resolve bindings up front: figure out which factors any site still
    // needs, fail on missing layers, and build each distance index once.
    let mut resolved: Vec<ResolvedBinding> = Vec::new();
    for (&factor, binding) in bindings {
        if matches!(binding, FactorBinding::Unbound) {
            continue;
        }
        let needed = sites.iter().any(|s| !s.raw.contains_key(&factor));
        if !needed {
            continue;
        }
        let layer = match binding.layer_name() {
            Some(name) => match layers.get(name) {
                Some(layer) => Some(layer),
                None => {
                    return Err(Error::MissingLayer {
                        factor,
                        layer: name.to_string(),
                    })
                }
            },
            None => None,
        };
        if let (
            FactorBinding::FloodZone { .. } | FactorBinding::ZoneMembership { .. },
            Some(layer),
        ) = (binding, layer)
        {
            if layer.kind != LayerKind::Polygons {
                return Err(Error::GeometryKind {
                    layer: layer.name.clone(),
                    expected: LayerKind::Polygons.name().to_string(),
                    found: layer.kind.name().to_string(),
                });
            }
        }
        let index = match (binding, layer) {
            (FactorBinding::Distance { .. }, Some(layer)) => {
                if layer.is_empty() {
                    return Err(Error::EmptyLayer {
                        layer: layer.name.clone(),
                    });
                }
                Some(GridIndex::build(layer, cell_size)?)
            }
            _ => None,
        };
        resolved.push(ResolvedBinding {
            factor,
            binding,
            layer,
            index,
        });
    }

    let warnings_per_site: Vec<Result<Vec<String>>> = crate::par::map_mut(sites, |site| {
        let mut warnings = Vec::new();
        for rb in &resolved {
            if site.raw.contains_key(&rb.factor) {
                continue;
            }
            match rb.binding {
                FactorBinding::Distance { .. } => {
                    let layer = rb.layer.expect("resolved above");
                    let index = rb.index.as_ref().expect("built above");
                    let (distance, _) = nearest_feature_distance(site.point, layer, index)?;
                    site.raw.insert(rb.factor, distance);
                }
                FactorBinding::FloodZone { attribute, .. } => {
                    let layer = rb.layer.expect("resolved above");
                    let mut value = 0.0f64;
                    for feature in containing_polygons(site.point, layer) {
                        match attribute_f64(&feature.attributes, attribute) {
                            Some(v) => value = value.max(v),
                            None => warnings.push(format!(
                                "site {}: containing {} polygon lacks attribute {attribute}, treated as 0",
                                site.id, layer.name
                            )),
                        }
                    }
                    site.raw.insert(rb.factor, value);
                }
                FactorBinding::ZoneMembership { inside, outside, .. } => {
                    let layer = rb.layer.expect("resolved above");
                    let hit = containing_polygons(site.point, layer).next().is_some();
                    site.raw
                        .insert(rb.factor, if hit { *inside } else { *outside });
                }
                FactorBinding::Elevation => match samples.get(&site.id) {
                    Some(sample) => {
                        site.raw
                            .insert(rb.factor, vertical_separation(sample, scenario));
                    }
                    None => warnings.push(format!(
                        "site {}: no elevation sample, vertical separation not derived",
                        site.id
                    )),
                },
                FactorBinding::Unbound => unreachable!("skipped during resolution"),
            }
        }
        Ok(warnings)
    });

    let mut warnings = Vec::new();
    for per_site in warnings_per_site {
        warnings.extend(per_site?);
    }
    Ok(warnings)
}
