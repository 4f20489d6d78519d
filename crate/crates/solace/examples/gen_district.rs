//! Generates the bundled district: a 13x10 street grid with two plazas,
//! a dense masonry tower cluster between them, concrete offices and schools
//! mid-grid, and homes along the perimeter.
//!
//! Writes districts/district_a/{buildings,roads,safe_areas,soil}.geojson
//! and reloads the result through the regular loader as a self-check.
//!
//!     cargo run --example gen_district [out_dir]
//!
//! The layout is deliberate. Daytime crowds (work, school) sit near the
//! plazas while homes are far out, so daytime runs clear faster than night
//! runs. The tower cluster flanks every street of a 3x3 node pocket; at
//! high intensity most towers collapse and their debris seals the pocket,
//! trapping the workers inside, which drags high-intensity daytime runs
//! below even the night baseline.

use std::path::PathBuf;

use serde_json::{json, Value};

use solace::geo::{load_environment, GeoConfig, GeoPaths, Point2D};

// Grid frame: columns at x = X0 + 100c, rows at y = Y0 + 100r.
const X0: f64 = 1000.0;
const Y0: f64 = 1000.0;
const COLS: usize = 13;
const ROWS: usize = 10;
const SPACING: f64 = 100.0;
const ROAD_WIDTH: f64 = 8.0;

// Tower cluster: the 3x3 node block spanning columns 6..=8, rows 3..=5.
const CBD_COLS: (usize, usize) = (6, 8);
const CBD_ROWS: (usize, usize) = (3, 5);
/// Tower height; debris apron = 0.5 x height = 15 m, enough to cross a
/// street whose centerline is 8 m from the facade.
const TOWER_HEIGHT: f64 = 30.0;
const TOWER_SIDE: f64 = 24.0;
/// Moat towers are slimmer so four fit along one block without touching
/// the cross streets at the nodes.
const MOAT_TOWER_SIDE: f64 = 18.0;
/// Tower center offset from the flanked street centerline.
const TOWER_OFFSET: f64 = 20.0;

fn is_plaza_node(p: Point2D) -> bool {
    [node(5, 4), node(9, 4)]
        .iter()
        .any(|q| (q.x - p.x).abs() < 1e-9 && (q.y - p.y).abs() < 1e-9)
}

const OFFICE_COUNT: usize = 64;
const HOME_HEIGHT: f64 = 10.0;
const OFFICE_HEIGHT: f64 = 20.0;
const SCHOOL_HEIGHT: f64 = 15.0;
/// Homes only settle in boundary cells at least this far (street distance)
/// from every plaza.
const HOME_MIN_DIST: f64 = 700.0;

fn node(c: usize, r: usize) -> Point2D {
    Point2D::new(X0 + SPACING * c as f64, Y0 + SPACING * r as f64)
}

fn square(center: Point2D, side: f64) -> Vec<(f64, f64)> {
    let h = side / 2.0;
    vec![
        (center.x - h, center.y - h),
        (center.x + h, center.y - h),
        (center.x + h, center.y + h),
        (center.x - h, center.y + h),
    ]
}

fn polygon_feature(props: Value, ring: &[(f64, f64)]) -> Value {
    let mut coords: Vec<[f64; 2]> = ring.iter().map(|&(x, y)| [x, y]).collect();
    coords.push([ring[0].0, ring[0].1]);
    json!({
        "type": "Feature",
        "properties": props,
        "geometry": { "type": "Polygon", "coordinates": [coords] }
    })
}

fn line_feature(width: f64, pts: &[Point2D]) -> Value {
    let coords: Vec<[f64; 2]> = pts.iter().map(|p| [p.x, p.y]).collect();
    json!({
        "type": "Feature",
        "properties": { "width": width },
        "geometry": { "type": "LineString", "coordinates": coords }
    })
}

fn collection(features: Vec<Value>) -> Value {
    json!({ "type": "FeatureCollection", "features": features })
}

fn building(
    typology: &str,
    vulnerability: &str,
    height: f64,
    center: Point2D,
    side: f64,
) -> Value {
    polygon_feature(
        json!({
            "typology": typology,
            "vulnerability_class": vulnerability,
            "height": height,
        }),
        &square(center, side),
    )
}

fn in_cbd(c: usize, r: usize) -> bool {
    (CBD_COLS.0..=CBD_COLS.1).contains(&c) && (CBD_ROWS.0..=CBD_ROWS.1).contains(&r)
}

/// Grid edges touching the tower pocket. `moat` marks streets leaving the
/// pocket; they are flanked four-deep so high intensity reliably seals
/// them, while internal streets get a single tower and stay mostly
/// passable at moderate intensity.
struct FlankedEdge {
    a: Point2D,
    b: Point2D,
    moat: bool,
}

fn flanked_edges() -> Vec<FlankedEdge> {
    let mut edges = Vec::new();
    let mut push = |a: (usize, usize), b: (usize, usize)| {
        let inside = in_cbd(a.0, a.1) as usize + in_cbd(b.0, b.1) as usize;
        if inside > 0 {
            edges.push(FlankedEdge {
                a: node(a.0, a.1),
                b: node(b.0, b.1),
                moat: inside == 1,
            });
        }
    };
    for c in 0..COLS {
        for r in 0..ROWS {
            if c + 1 < COLS {
                push((c, r), (c + 1, r));
            }
            if r + 1 < ROWS {
                push((c, r), (c, r + 1));
            }
        }
    }
    edges
}

fn main() {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("districts/district_a"));
    std::fs::create_dir_all(&out).expect("create output directory");

    let mut buildings: Vec<Value> = Vec::new();

    // Residential quarters: boundary-band cells whose centers are at least
    // HOME_MIN_DIST of street distance from every plaza, two houses per
    // cell. Night runs start everyone out here; day runs only the stay-at-
    // home groups. Houses keep enough setback from the street centerlines
    // that their debris apron (5 m) can never block.
    let plaza_nodes = [node(5, 4), node(9, 4)];
    let mut home_cells: Vec<(usize, usize)> = Vec::new();
    for c in 0..COLS - 1 {
        for r in 0..ROWS - 1 {
            let boundary = c == 0 || c == COLS - 2 || r == 0 || r == ROWS - 2;
            if !boundary || (c, r) == (COLS - 2, 1) {
                continue;
            }
            let center = Point2D::new(
                X0 + SPACING * c as f64 + 50.0,
                Y0 + SPACING * r as f64 + 50.0,
            );
            let near = plaza_nodes
                .iter()
                .map(|p| (p.x - center.x).abs() + (p.y - center.y).abs())
                .fold(f64::INFINITY, f64::min);
            if near >= HOME_MIN_DIST {
                home_cells.push((c, r));
            }
        }
    }
    let mut homes = 0;
    for &(c, r) in &home_cells {
        let base = node(c, r);
        for dy in [20.0, 80.0] {
            buildings.push(building(
                "home",
                "masonry",
                HOME_HEIGHT,
                Point2D::new(base.x + 50.0, base.y + dy),
                22.0,
            ));
            homes += 1;
        }
    }

    // Tower cluster: masonry towers flanking every street out of the
    // pocket (the moat), two per side at staggered slots, debris apron
    // wide enough to cross the centerline. The slots shift along the
    // street when an endpoint is a plaza node so no footprint enters a
    // plaza or clips the streets crossing at the far node. Pocket-internal
    // streets get a single concrete office instead: same jobs, but sturdy
    // enough that the interior stays passable at moderate intensity.
    let mut towers = 0;
    let mut offices_in_pocket = 0;
    for edge in flanked_edges() {
        let along = Point2D::new(
            (edge.b.x - edge.a.x) / SPACING,
            (edge.b.y - edge.a.y) / SPACING,
        );
        let perp = Point2D::new(-along.y, along.x);
        // Footprint plus apron must stay inside the block (slot 24..76)
        // so debris never clips the cross streets at the end nodes.
        let slots: &[f64] = if !edge.moat {
            &[50.0]
        } else if is_plaza_node(edge.a) {
            &[48.0, 74.0]
        } else if is_plaza_node(edge.b) {
            &[26.0, 52.0]
        } else {
            &[30.0, 70.0]
        };
        let signs: &[f64] = if edge.moat { &[-1.0, 1.0] } else { &[-1.0] };
        for &slot in slots {
            for &sign in signs {
                let center = Point2D::new(
                    edge.a.x + along.x * slot + perp.x * sign * TOWER_OFFSET,
                    edge.a.y + along.y * slot + perp.y * sign * TOWER_OFFSET,
                );
                if edge.moat {
                    buildings.push(building(
                        "work",
                        "masonry",
                        TOWER_HEIGHT,
                        center,
                        MOAT_TOWER_SIDE,
                    ));
                    towers += 1;
                } else {
                    buildings.push(building("work", "concrete", OFFICE_HEIGHT, center, TOWER_SIDE));
                    offices_in_pocket += 1;
                }
            }
        }
    }

    // Concrete offices in the mid-grid belt outside the pocket. Their
    // apron (10 m) stays short of the nearest centerline (20 m).
    let mut offices = 0;
    'office: for r in 2..=6 {
        for c in 1..COLS - 1 {
            if in_cbd(c, r) || in_cbd(c + 1, r) || (r == 4 && (c == 4 || c == 5 || c == 9)) {
                continue;
            }
            let base = node(c, r);
            for dx in [28.0, 72.0] {
                if offices == OFFICE_COUNT {
                    break 'office;
                }
                buildings.push(building(
                    "work",
                    "concrete",
                    OFFICE_HEIGHT,
                    Point2D::new(base.x + dx, base.y + 32.0),
                    24.0,
                ));
                offices += 1;
            }
        }
    }

    // Two schools: one beside the west plaza, one out in the northeast so
    // its classes arrive as a clearly later wave.
    buildings.push(building(
        "school",
        "concrete",
        SCHOOL_HEIGHT,
        Point2D::new(1430.0, 1430.0),
        36.0,
    ));
    buildings.push(building(
        "school",
        "concrete",
        SCHOOL_HEIGHT,
        Point2D::new(2150.0, 1150.0),
        36.0,
    ));

    // Civic buildings near the plazas, for texture.
    buildings.push(building("public", "masonry", 8.0, Point2D::new(1460.0, 1340.0), 20.0));
    buildings.push(building("public", "masonry", 8.0, Point2D::new(1940.0, 1340.0), 20.0));

    // Full street grid, one polyline per grid line with a vertex at every
    // crossing so the loader snaps them into shared nodes.
    let mut roads: Vec<Value> = Vec::new();
    for c in 0..COLS {
        let pts: Vec<Point2D> = (0..ROWS).map(|r| node(c, r)).collect();
        roads.push(line_feature(ROAD_WIDTH, &pts));
    }
    for r in 0..ROWS {
        let pts: Vec<Point2D> = (0..COLS).map(|c| node(c, r)).collect();
        roads.push(line_feature(ROAD_WIDTH, &pts));
    }

    // Plazas centered on grid nodes so each contains a routable node.
    let safe_areas = vec![
        polygon_feature(json!({ "name": "west plaza" }), &square(node(5, 4), 70.0)),
        polygon_feature(json!({ "name": "east plaza" }), &square(node(9, 4), 70.0)),
    ];

    // Soft basin under the tower cluster, firm rock in the northwest.
    let soil = vec![
        polygon_feature(
            json!({ "intensity_modifier": 1 }),
            &[(1560.0, 1260.0), (1840.0, 1260.0), (1840.0, 1540.0), (1560.0, 1540.0)],
        ),
        polygon_feature(
            json!({ "intensity_modifier": -1 }),
            &[(1000.0, 1700.0), (1200.0, 1700.0), (1200.0, 1900.0), (1000.0, 1900.0)],
        ),
    ];

    let files = [
        ("buildings.geojson", collection(buildings)),
        ("roads.geojson", collection(roads)),
        ("safe_areas.geojson", collection(safe_areas)),
        ("soil.geojson", collection(soil)),
    ];
    for (name, value) in &files {
        let path = out.join(name);
        std::fs::write(&path, serde_json::to_string_pretty(value).expect("serialize"))
            .unwrap_or_else(|e| panic!("write {}: {e}", path.display()));
    }

    // Self-check: the generated profile must load cleanly.
    let env = load_environment(
        &GeoPaths {
            buildings: out.join("buildings.geojson"),
            roads: out.join("roads.geojson"),
            safe_areas: out.join("safe_areas.geojson"),
            soil: out.join("soil.geojson"),
        },
        GeoConfig::default(),
    )
    .expect("generated district must load");

    println!("district written to {}", out.display());
    println!(
        "buildings: {} ({homes} homes, {towers} towers, {} offices of which {offices_in_pocket} in the pocket, 2 schools, 2 public)",
        env.buildings.len(),
        offices + offices_in_pocket,
    );
    println!(
        "graph: {} nodes, {} edges, {} safe nodes, {} safe areas",
        env.graph.nodes.len(),
        env.graph.edges.len(),
        env.safe_nodes.len(),
        env.safe_areas.len()
    );
}
