//! Uniform-grid spatial index over a layer's segments.
//!
//! Every feature is flattened to segments (points become degenerate
//! segments) and registered in each cell its bounding box overlaps.
//! Nearest queries expand square rings of cells outward from the query
//! point and stop only when the best hit is strictly closer than any
//! unexplored cell can be, so results match a brute-force scan exactly,
//! tie-breaks included.

use crate::error::{Error, Result};
use crate::geo::{point_segment_distance, FeatureLayer, Geometry};
use crate::model::Point;

/// Total cell cap; the cell size grows until the grid fits. Guards
/// against pathological extent to cell-size ratios.
const MAX_CELLS: i64 = 1 << 22;

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: Point,
    b: Point,
    feature: u32,
}

#[derive(Debug, Clone)]
pub struct GridIndex {
    cell_size: f64,
    min_x: f64,
    min_y: f64,
    nx: i64,
    ny: i64,
    cells: Vec<Vec<u32>>,
    segments: Vec<Segment>,
}

impl GridIndex {
    /// Build an index over every segment of the layer. The effective cell
    /// size may be larger than requested if the layer's extent would
    /// otherwise need more than `MAX_CELLS` cells.
    pub fn build(layer: &FeatureLayer, cell_size: f64) -> Result<Self> {
        if !(cell_size > 0.0) || !cell_size.is_finite() {
            return Err(Error::InvalidParameter {
                factor: None,
                message: format!("grid cell size must be positive, got {cell_size}"),
            });
        }
        if layer.is_empty() {
            return Err(Error::EmptyLayer {
                layer: layer.name.clone(),
            });
        }

        let mut segments = Vec::new();
        for (ordinal, feature) in layer.features.iter().enumerate() {
            let feature_id = ordinal as u32;
            match &feature.geometry {
                Geometry::Point(p) => segments.push(Segment {
                    a: *p,
                    b: *p,
                    feature: feature_id,
                }),
                Geometry::Polyline(vertices) => {
                    push_path_segments(&mut segments, vertices, feature_id);
                }
                Geometry::Polygon { outer, holes } => {
                    push_path_segments(&mut segments, outer, feature_id);
                    for hole in holes {
                        push_path_segments(&mut segments, hole, feature_id);
                    }
                }
            }
        }

        let mut min_x = f64::INFINITY;
        let mut min_y = f64::INFINITY;
        let mut max_x = f64::NEG_INFINITY;
        let mut max_y = f64::NEG_INFINITY;
        for seg in &segments {
            min_x = min_x.min(seg.a.x).min(seg.b.x);
            min_y = min_y.min(seg.a.y).min(seg.b.y);
            max_x = max_x.max(seg.a.x).max(seg.b.x);
            max_y = max_y.max(seg.a.y).max(seg.b.y);
        }

        let mut cell = cell_size;
        let (mut nx, mut ny) = grid_dims(min_x, min_y, max_x, max_y, cell);
        while nx.saturating_mul(ny) > MAX_CELLS {
            cell *= 2.0;
            (nx, ny) = grid_dims(min_x, min_y, max_x, max_y, cell);
        }

        let mut cells = vec![Vec::new(); (nx * ny) as usize];
        for (i, seg) in segments.iter().enumerate() {
            let lo_x = seg.a.x.min(seg.b.x);
            let hi_x = seg.a.x.max(seg.b.x);
            let lo_y = seg.a.y.min(seg.b.y);
            let hi_y = seg.a.y.max(seg.b.y);
            let ix0 = clamp_cell(((lo_x - min_x) / cell).floor() as i64, nx);
            let ix1 = clamp_cell(((hi_x - min_x) / cell).floor() as i64, nx);
            let iy0 = clamp_cell(((lo_y - min_y) / cell).floor() as i64, ny);
            let iy1 = clamp_cell(((hi_y - min_y) / cell).floor() as i64, ny);
            for iy in iy0..=iy1 {
                for ix in ix0..=ix1 {
                    cells[(iy * nx + ix) as usize].push(i as u32);
                }
            }
        }

        Ok(GridIndex {
            cell_size: cell,
            min_x,
            min_y,
            nx,
            ny,
            cells,
            segments,
        })
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    /// Nearest segment's (distance, feature ordinal) under lexicographic
    /// (distance, ordinal) order, or `None` for an index with no
    /// segments. Read-only and safe to call concurrently.
    pub fn nearest(&self, p: Point) -> Option<(f64, usize)> {
        if self.segments.is_empty() {
            return None;
        }
        // The query's conceptual cell, deliberately unclamped: cells at
        // Chebyshev ring k are then at least (k - 1) * cell_size away
        // from p, which is what the stopping rule relies on.
        let cx = ((p.x - self.min_x) / self.cell_size).floor() as i64;
        let cy = ((p.y - self.min_y) / self.cell_size).floor() as i64;
        let max_ring = self.max_ring(cx, cy);

        let mut best: Option<(f64, u32)> = None;
        for ring in 0..=max_ring {
            self.scan_ring(p, cx, cy, ring, &mut best);
            if let Some((dist, _)) = best {
                // Unexplored rings start at (ring + 1) - 1 cells away. A
                // strict comparison keeps equal-distance candidates in
                // play so ordinal tie-breaks match brute force.
                if dist < ring as f64 * self.cell_size {
                    break;
                }
            }
        }
        best.map(|(d, f)| (d, f as usize))
    }

    /// Largest ring that still touches the grid from (cx, cy).
    fn max_ring(&self, cx: i64, cy: i64) -> i64 {
        let dx = (-cx).max(cx - (self.nx - 1)).max(0);
        let dy = (-cy).max(cy - (self.ny - 1)).max(0);
        // From a cell inside the grid, the farthest grid cell is at most
        // max(nx, ny) rings out; from outside, the offset adds on top.
        dx.max(dy) + self.nx.max(self.ny)
    }

    fn scan_ring(&self, p: Point, cx: i64, cy: i64, ring: i64, best: &mut Option<(f64, u32)>) {
        let mut visit = |ix: i64, iy: i64| {
            if ix < 0 || iy < 0 || ix >= self.nx || iy >= self.ny {
                return;
            }
            for &seg_id in &self.cells[(iy * self.nx + ix) as usize] {
                let seg = self.segments[seg_id as usize];
                let d = point_segment_distance(p, seg.a, seg.b);
                let candidate = (d, seg.feature);
                if best.map_or(true, |(bd, bf)| candidate < (bd, bf)) {
                    *best = Some(candidate);
                }
            }
        };
        if ring == 0 {
            visit(cx, cy);
            return;
        }
        for ix in (cx - ring)..=(cx + ring) {
            visit(ix, cy - ring);
            visit(ix, cy + ring);
        }
        for iy in (cy - ring + 1)..=(cy + ring - 1) {
            visit(cx - ring, iy);
            visit(cx + ring, iy);
        }
    }
}

fn push_path_segments(segments: &mut Vec<Segment>, vertices: &[Point], feature: u32) {
    let before = segments.len();
    for seg in vertices.windows(2) {
        if seg[0] != seg[1] {
            segments.push(Segment {
                a: seg[0],
                b: seg[1],
                feature,
            });
        }
    }
    // A path that collapsed to a single location still needs presence in
    // the index; keep one degenerate segment.
    if segments.len() == before {
        if let Some(&p) = vertices.first() {
            segments.push(Segment {
                a: p,
                b: p,
                feature,
            });
        }
    }
}

fn grid_dims(min_x: f64, min_y: f64, max_x: f64, max_y: f64, cell: f64) -> (i64, i64) {
    let nx = (((max_x - min_x) / cell).floor() as i64 + 1).max(1);
    let ny = (((max_y - min_y) / cell).floor() as i64 + 1).max(1);
    (nx, ny)
}

fn clamp_cell(i: i64, n: i64) -> i64 {
    i.clamp(0, n - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{nearest_brute_force, Attributes, Feature, LayerKind};
    use rand::{Rng, SeedableRng};

    fn pt(x: f64, y: f64) -> Point {
        Point { x, y }
    }

    fn random_polyline_layer(rng: &mut impl Rng, segments: usize, extent: f64) -> FeatureLayer {
        let features = (0..segments)
            .map(|_| {
                let a = pt(rng.gen_range(0.0..extent), rng.gen_range(0.0..extent));
                let b = pt(
                    (a.x + rng.gen_range(-300.0..300.0)).clamp(0.0, extent),
                    (a.y + rng.gen_range(-300.0..300.0)).clamp(0.0, extent),
                );
                let b = if a == b { pt(b.x + 1.0, b.y) } else { b };
                Feature {
                    geometry: Geometry::Polyline(vec![a, b]),
                    attributes: Attributes::new(),
                }
            })
            .collect();
        FeatureLayer::new("lines", LayerKind::Polylines, features).unwrap()
    }

    #[test]
    fn singleton_point_layer() {
        let layer = FeatureLayer::new(
            "one",
            LayerKind::Points,
            vec![Feature {
                geometry: Geometry::Point(pt(10.0, 10.0)),
                attributes: Attributes::new(),
            }],
        )
        .unwrap();
        let index = GridIndex::build(&layer, 500.0).unwrap();
        assert_eq!(index.nearest(pt(10.0, 14.0)), Some((4.0, 0)));
        assert_eq!(index.nearest(pt(10000.0, 10.0)), Some((9990.0, 0)));
    }

    #[test]
    fn matches_brute_force_on_random_layers() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xD15);
        for round in 0..5 {
            let layer = random_polyline_layer(&mut rng, 500, 5000.0);
            // Vary cell size across rounds, including awkward ones.
            let cell = [500.0, 120.0, 37.5, 2000.0, 9999.0][round];
            let index = GridIndex::build(&layer, cell).unwrap();
            for _ in 0..200 {
                // Queries land inside and well outside the indexed extent.
                let q = pt(rng.gen_range(-2000.0..7000.0), rng.gen_range(-2000.0..7000.0));
                let got = index.nearest(q).unwrap();
                let want = nearest_brute_force(q, &layer).unwrap();
                assert_eq!(got.0.to_bits(), want.0.to_bits());
                assert_eq!(got.1, want.1);
            }
        }
    }

    #[test]
    fn degenerate_layer_within_one_cell() {
        let features = vec![
            Feature {
                geometry: Geometry::Point(pt(1.0, 1.0)),
                attributes: Attributes::new(),
            },
            Feature {
                geometry: Geometry::Point(pt(1.5, 1.0)),
                attributes: Attributes::new(),
            },
        ];
        let layer = FeatureLayer::new("tiny", LayerKind::Points, features).unwrap();
        let index = GridIndex::build(&layer, 500.0).unwrap();
        let q = pt(1.4, 1.0);
        let want = nearest_brute_force(q, &layer).unwrap();
        assert_eq!(want.1, 1);
        assert_eq!(index.nearest(q), Some(want));
    }

    #[test]
    fn equidistant_features_resolve_to_lowest_ordinal() {
        let features = vec![
            Feature {
                geometry: Geometry::Point(pt(0.0, 7.0)),
                attributes: Attributes::new(),
            },
            Feature {
                geometry: Geometry::Point(pt(0.0, -7.0)),
                attributes: Attributes::new(),
            },
        ];
        let layer = FeatureLayer::new("pair", LayerKind::Points, features).unwrap();
        let index = GridIndex::build(&layer, 3.0).unwrap();
        assert_eq!(index.nearest(pt(0.0, 0.0)), Some((7.0, 0)));
    }

    #[test]
    fn nearest_never_beats_any_single_feature() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let layer = random_polyline_layer(&mut rng, 100, 1000.0);
        let index = GridIndex::build(&layer, 250.0).unwrap();
        for _ in 0..50 {
            let q = pt(rng.gen_range(0.0..1000.0), rng.gen_range(0.0..1000.0));
            let (best, _) = index.nearest(q).unwrap();
            for feature in &layer.features {
                assert!(best <= crate::geo::feature_distance(q, feature) + 1e-12);
            }
        }
    }

    #[test]
    fn cell_cap_grows_cell_size() {
        let features = vec![
            Feature {
                geometry: Geometry::Point(pt(0.0, 0.0)),
                attributes: Attributes::new(),
            },
            Feature {
                geometry: Geometry::Point(pt(1e9, 1e9)),
                attributes: Attributes::new(),
            },
        ];
        let layer = FeatureLayer::new("vast", LayerKind::Points, features).unwrap();
        let index = GridIndex::build(&layer, 1.0).unwrap();
        assert!(index.cell_size() > 1.0);
        assert_eq!(index.nearest(pt(3.0, 4.0)), Some((5.0, 0)));
    }

    #[test]
    fn rejects_bad_cell_size_and_empty_layer() {
        let layer = FeatureLayer::new("empty", LayerKind::Points, vec![]).unwrap();
        assert!(GridIndex::build(&layer, 500.0).is_err());

        let nonempty = FeatureLayer::new(
            "one",
            LayerKind::Points,
            vec![Feature {
                geometry: Geometry::Point(pt(0.0, 0.0)),
                attributes: Attributes::new(),
            }],
        )
        .unwrap();
        assert!(GridIndex::build(&nonempty, 0.0).is_err());
        assert!(GridIndex::build(&nonempty, -5.0).is_err());
        assert!(GridIndex::build(&nonempty, f64::NAN).is_err());
    }
}
