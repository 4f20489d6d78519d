//! Street-level environment: building footprints, road graph, safe areas and
//! soil zones, loaded from a strict GeoJSON profile in projected meters.
//!
//! The environment is immutable after load. Street blocking is expressed as a
//! separate edge set owned by the caller (each simulation run derives its own
//! from debris), so one loaded environment can serve many parallel runs.

pub mod geom;
mod graph;
mod index;
mod load;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub use geom::{Bbox, Point2D};
pub use graph::{
    apply_debris_blocking, nearest_node, route_between, route_to_nearest_safe_area, BlockingRule,
    Route, RouteResult,
};
pub use index::{ObjectKind, ObjectRef, SpatialIndex};
pub use load::{load_environment, GeoPaths};

macro_rules! id_type {
    ($name:ident) => {
        #[derive(
            Debug,
            Clone,
            Copy,
            PartialEq,
            Eq,
            PartialOrd,
            Ord,
            Hash,
            Serialize,
            Deserialize,
        )]
        pub struct $name(pub u32);

        impl $name {
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }

        impl std::fmt::Display for $name {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

id_type!(BuildingId);
id_type!(SafeAreaId);
id_type!(SoilZoneId);
id_type!(NodeId);
id_type!(EdgeId);

/// What a building is used for; drives population placement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Typology {
    Home,
    Work,
    School,
    Public,
}

impl Typology {
    pub fn parse(s: &str) -> Option<Typology> {
        match s {
            "home" => Some(Typology::Home),
            "work" => Some(Typology::Work),
            "school" => Some(Typology::School),
            "public" => Some(Typology::Public),
            _ => None,
        }
    }
}

/// Structural class used to look up damage probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VulnerabilityClass {
    Masonry,
    Concrete,
}

impl VulnerabilityClass {
    pub fn parse(s: &str) -> Option<VulnerabilityClass> {
        match s {
            "masonry" => Some(VulnerabilityClass::Masonry),
            "concrete" => Some(VulnerabilityClass::Concrete),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BuildingFootprint {
    pub id: BuildingId,
    /// CCW exterior ring, open (no repeated closing vertex).
    pub ring: Vec<Point2D>,
    pub height: f64,
    pub typology: Typology,
    pub vulnerability: VulnerabilityClass,
    /// Per-building damage probability by intensity level, when the source
    /// data carries one; otherwise the model-level defaults apply.
    pub damage_probabilities: Option<Vec<(u8, f64)>>,
    pub centroid: Point2D,
    pub bbox: Bbox,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SafeArea {
    pub id: SafeAreaId,
    pub ring: Vec<Point2D>,
    pub centroid: Point2D,
    pub bbox: Bbox,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SoilZone {
    pub id: SoilZoneId,
    pub ring: Vec<Point2D>,
    /// Added to the event intensity for anything inside the zone.
    pub intensity_modifier: i8,
    pub bbox: Bbox,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub pos: Point2D,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Edge {
    pub id: EdgeId,
    pub a: NodeId,
    pub b: NodeId,
    pub length: f64,
    pub width: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoadGraph {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    /// Incident edge ids per node, ascending.
    pub adjacency: Vec<Vec<EdgeId>>,
}

impl RoadGraph {
    pub fn other_end(&self, edge: EdgeId, from: NodeId) -> NodeId {
        let e = &self.edges[edge.index()];
        if e.a == from {
            e.b
        } else {
            e.a
        }
    }
}

/// Set of impassable edges. Runs own their copy; the loaded baseline is empty.
pub type BlockedSet = BTreeSet<EdgeId>;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GeoConfig {
    /// Road endpoints closer than this merge into one node (meters).
    pub snap_tolerance: f64,
    /// Spatial index cell size (meters).
    pub cell_size: f64,
}

impl Default for GeoConfig {
    fn default() -> Self {
        GeoConfig {
            snap_tolerance: 0.5,
            cell_size: 25.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Environment {
    pub buildings: Vec<BuildingFootprint>,
    pub safe_areas: Vec<SafeArea>,
    pub soil_zones: Vec<SoilZone>,
    pub graph: RoadGraph,
    pub index: SpatialIndex,
    pub bbox: Bbox,
    pub config: GeoConfig,
    /// Nodes inside or on the boundary of a safe area, with the smallest
    /// containing area id. Ascending node order.
    pub safe_nodes: Vec<(NodeId, SafeAreaId)>,
}

impl Environment {
    /// Build an environment from already-parsed parts, running the structural
    /// validations (soil zones disjoint, road graph connected) and deriving
    /// the spatial index, bounding box, and safe-node table.
    pub fn assemble(
        buildings: Vec<BuildingFootprint>,
        safe_areas: Vec<SafeArea>,
        soil_zones: Vec<SoilZone>,
        graph: RoadGraph,
        config: GeoConfig,
    ) -> Result<Environment, GeoError> {
        for i in 0..soil_zones.len() {
            for j in (i + 1)..soil_zones.len() {
                if geom::rings_overlap(&soil_zones[i].ring, &soil_zones[j].ring) {
                    return Err(GeoError::SoilOverlap {
                        a: soil_zones[i].id,
                        b: soil_zones[j].id,
                    });
                }
            }
        }
        let sizes = component_sizes(&graph);
        if sizes.len() > 1 {
            return Err(GeoError::Disconnected {
                components: sizes.len(),
                sizes,
            });
        }

        let mut bbox: Option<Bbox> = None;
        let mut grow = |b: Bbox| {
            bbox = Some(match bbox {
                Some(acc) => acc.union(b),
                None => b,
            });
        };
        for b in &buildings {
            grow(b.bbox);
        }
        for a in &safe_areas {
            grow(a.bbox);
        }
        for z in &soil_zones {
            grow(z.bbox);
        }
        for n in &graph.nodes {
            grow(Bbox::of_segment(n.pos, n.pos));
        }
        let bbox = bbox.unwrap_or(Bbox {
            min_x: 0.0,
            min_y: 0.0,
            max_x: 1.0,
            max_y: 1.0,
        });

        let mut items: Vec<(ObjectRef, Bbox)> = Vec::new();
        for b in &buildings {
            items.push((
                ObjectRef {
                    kind: ObjectKind::Building,
                    id: b.id.0,
                },
                b.bbox,
            ));
        }
        for a in &safe_areas {
            items.push((
                ObjectRef {
                    kind: ObjectKind::SafeArea,
                    id: a.id.0,
                },
                a.bbox,
            ));
        }
        for z in &soil_zones {
            items.push((
                ObjectRef {
                    kind: ObjectKind::SoilZone,
                    id: z.id.0,
                },
                z.bbox,
            ));
        }
        let index = SpatialIndex::build(&items, bbox, config.cell_size);

        let mut safe_nodes = Vec::new();
        for n in &graph.nodes {
            let mut hit: Option<SafeAreaId> = None;
            for a in &safe_areas {
                if a.bbox.contains(n.pos) && geom::point_in_ring(n.pos, &a.ring) {
                    hit = Some(match hit {
                        Some(cur) => cur.min(a.id),
                        None => a.id,
                    });
                }
            }
            if let Some(area) = hit {
                safe_nodes.push((n.id, area));
            }
        }

        Ok(Environment {
            buildings,
            safe_areas,
            soil_zones,
            graph,
            index,
            bbox,
            config,
            safe_nodes,
        })
    }

    /// Objects of any kind whose geometry intersects the disc, ascending by
    /// (kind, id). Backed by the spatial index.
    pub fn neighbors_within(&self, center: Point2D, radius: f64) -> Vec<ObjectRef> {
        self.index.query_disc(self, center, radius)
    }

    /// The soil zone containing the point, if any (zones do not overlap).
    pub fn soil_zone_at(&self, p: Point2D) -> Option<SoilZoneId> {
        self.neighbors_within(p, 0.0)
            .into_iter()
            .find_map(|r| match r.kind {
                ObjectKind::SoilZone => {
                    let z = &self.soil_zones[r.id as usize];
                    geom::point_in_ring(p, &z.ring).then_some(z.id)
                }
                _ => None,
            })
    }

    /// Smallest-id safe area containing the point, if any.
    pub fn safe_area_at(&self, p: Point2D) -> Option<SafeAreaId> {
        self.neighbors_within(p, 0.0)
            .into_iter()
            .find_map(|r| match r.kind {
                ObjectKind::SafeArea => {
                    let a = &self.safe_areas[r.id as usize];
                    geom::point_in_ring(p, &a.ring).then_some(a.id)
                }
                _ => None,
            })
    }

    pub fn buildings_of(&self, typology: Typology) -> Vec<BuildingId> {
        self.buildings
            .iter()
            .filter(|b| b.typology == typology)
            .map(|b| b.id)
            .collect()
    }

    pub fn node_pos(&self, n: NodeId) -> Point2D {
        self.graph.nodes[n.index()].pos
    }
}

fn component_sizes(graph: &RoadGraph) -> Vec<usize> {
    let n = graph.nodes.len();
    if n == 0 {
        return Vec::new();
    }
    let mut seen = vec![false; n];
    let mut sizes = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut stack = vec![start];
        seen[start] = true;
        let mut size = 0;
        while let Some(u) = stack.pop() {
            size += 1;
            for &eid in &graph.adjacency[u] {
                let v = graph.other_end(eid, NodeId(u as u32)).index();
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        sizes.push(size);
    }
    sizes
}

#[derive(Debug, thiserror::Error)]
pub enum GeoError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: invalid JSON: {source}")]
    Json {
        path: String,
        source: serde_json::Error,
    },
    #[error("{path}, feature {feature}: {msg}")]
    Profile {
        path: String,
        feature: usize,
        msg: String,
    },
    #[error("{path}: {msg}")]
    File { path: String, msg: String },
    #[error(
        "coordinates look like longitude/latitude degrees (all within \
         [-180,180]x[-90,90]); supply a projected CRS in meters"
    )]
    LonLatLike,
    #[error("{path}, feature {feature}: segment {segment} collapses to a point after snapping")]
    ZeroLengthSegment {
        path: String,
        feature: usize,
        segment: usize,
    },
    #[error("road graph is disconnected: {components} components (sizes {sizes:?})")]
    Disconnected {
        components: usize,
        sizes: Vec<usize>,
    },
    #[error("soil zones {a} and {b} overlap")]
    SoilOverlap { a: SoilZoneId, b: SoilZoneId },
}

/// Small connected town shared by unit tests across modules: a 3x3 street
/// grid (100 m spacing), buildings of every use hanging off it, two safe
/// plazas over the northern corners, one soft-soil zone in the middle.
#[cfg(test)]
pub(crate) fn test_town() -> Environment {
    let p = Point2D::new;
    let square = |x0: f64, y0: f64, s: f64| vec![p(x0, y0), p(x0 + s, y0), p(x0 + s, y0 + s), p(x0, y0 + s)];

    let mut b = graph::GraphBuilder::new(0.5);
    for y in [1900.0, 2000.0, 2100.0] {
        for x0 in [1900.0, 2000.0] {
            b.add_segment(p(x0, y), p(x0 + 100.0, y), 8.0);
        }
    }
    for x in [1900.0, 2000.0, 2100.0] {
        for y0 in [1900.0, 2000.0] {
            b.add_segment(p(x, y0), p(x, y0 + 100.0), 8.0);
        }
    }
    let graph = b.build();

    let building = |id: u32, ring: Vec<Point2D>, height: f64, ty: Typology, vu: VulnerabilityClass| {
        let centroid = geom::ring_centroid(&ring);
        let bbox = Bbox::of_ring(&ring);
        BuildingFootprint {
            id: BuildingId(id),
            ring,
            height,
            typology: ty,
            vulnerability: vu,
            damage_probabilities: None,
            centroid,
            bbox,
        }
    };
    let buildings = vec![
        building(0, square(1850.0, 1900.0, 30.0), 10.0, Typology::Home, VulnerabilityClass::Masonry),
        building(1, square(1850.0, 2000.0, 30.0), 10.0, Typology::Home, VulnerabilityClass::Masonry),
        building(2, square(2000.0, 1850.0, 30.0), 20.0, Typology::Work, VulnerabilityClass::Concrete),
        building(3, square(2050.0, 1850.0, 30.0), 20.0, Typology::Work, VulnerabilityClass::Concrete),
        building(4, square(1900.0, 2120.0, 30.0), 15.0, Typology::School, VulnerabilityClass::Concrete),
        building(5, square(2120.0, 2000.0, 30.0), 8.0, Typology::Public, VulnerabilityClass::Masonry),
    ];

    let safe = |id: u32, cx: f64, cy: f64| {
        let ring = square(cx - 20.0, cy - 20.0, 40.0);
        let centroid = geom::ring_centroid(&ring);
        let bbox = Bbox::of_ring(&ring);
        SafeArea {
            id: SafeAreaId(id),
            ring,
            centroid,
            bbox,
        }
    };
    let soil_ring = square(1950.0, 1950.0, 100.0);
    let soil = SoilZone {
        id: SoilZoneId(0),
        bbox: Bbox::of_ring(&soil_ring),
        ring: soil_ring,
        intensity_modifier: 1,
    };
    Environment::assemble(
        buildings,
        vec![safe(0, 2100.0, 2100.0), safe(1, 1900.0, 2100.0)],
        vec![soil],
        graph,
        GeoConfig::default(),
    )
    .unwrap()
}
