//! Uniform-grid spatial index over environment objects.
//!
//! Objects are registered in every cell their bounding box covers; disc
//! queries gather candidates from the covered cell range and then apply the
//! exact ring-distance test. Results are ascending by (kind, id), so queries
//! are deterministic regardless of build order.

use serde::{Deserialize, Serialize};

use super::geom::{dist_point_ring, Bbox, Point2D};
use super::Environment;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ObjectKind {
    Building,
    SafeArea,
    SoilZone,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ObjectRef {
    pub kind: ObjectKind,
    pub id: u32,
}

#[derive(Debug, Clone)]
pub struct SpatialIndex {
    origin: Point2D,
    cell: f64,
    cols: usize,
    rows: usize,
    cells: Vec<Vec<ObjectRef>>,
}

impl SpatialIndex {
    pub fn build(items: &[(ObjectRef, Bbox)], bounds: Bbox, cell: f64) -> SpatialIndex {
        assert!(cell > 0.0, "cell size must be positive");
        let cols = (((bounds.max_x - bounds.min_x) / cell).ceil() as usize).max(1);
        let rows = (((bounds.max_y - bounds.min_y) / cell).ceil() as usize).max(1);
        let mut index = SpatialIndex {
            origin: Point2D::new(bounds.min_x, bounds.min_y),
            cell,
            cols,
            rows,
            cells: vec![Vec::new(); cols * rows],
        };
        for (obj, bbox) in items {
            let (c0, r0) = index.cell_of(Point2D::new(bbox.min_x, bbox.min_y));
            let (c1, r1) = index.cell_of(Point2D::new(bbox.max_x, bbox.max_y));
            for r in r0..=r1 {
                for c in c0..=c1 {
                    index.cells[r * cols + c].push(*obj);
                }
            }
        }
        for cell in &mut index.cells {
            cell.sort();
            cell.dedup();
        }
        index
    }

    fn cell_of(&self, p: Point2D) -> (usize, usize) {
        let c = ((p.x - self.origin.x) / self.cell).floor();
        let r = ((p.y - self.origin.y) / self.cell).floor();
        (
            (c.max(0.0) as usize).min(self.cols - 1),
            (r.max(0.0) as usize).min(self.rows - 1),
        )
    }

    /// Ids of all objects whose filled geometry intersects the disc, sorted
    /// ascending by (kind, id).
    pub fn query_disc(&self, env: &Environment, center: Point2D, radius: f64) -> Vec<ObjectRef> {
        assert!(radius >= 0.0, "radius must be non-negative");
        let (c0, r0) = self.cell_of(Point2D::new(center.x - radius, center.y - radius));
        let (c1, r1) = self.cell_of(Point2D::new(center.x + radius, center.y + radius));
        let mut hits: Vec<ObjectRef> = Vec::new();
        for r in r0..=r1 {
            for c in c0..=c1 {
                for obj in &self.cells[r * self.cols + c] {
                    let ring: &[Point2D] = match obj.kind {
                        ObjectKind::Building => &env.buildings[obj.id as usize].ring,
                        ObjectKind::SafeArea => &env.safe_areas[obj.id as usize].ring,
                        ObjectKind::SoilZone => &env.soil_zones[obj.id as usize].ring,
                    };
                    if dist_point_ring(center, ring) <= radius {
                        hits.push(*obj);
                    }
                }
            }
        }
        hits.sort();
        hits.dedup();
        hits
    }
}
