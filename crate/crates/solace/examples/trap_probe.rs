//! Prints who gets trapped in a daytime run and where they started,
//! for tuning the bundled district. Usage:
//!
//!     cargo run --release --example trap_probe <district_dir> [seeds]

use std::collections::BTreeMap;
use std::path::PathBuf;

use solace::engine::{run, RunSpec, Scenario};
use solace::geo::{load_environment, GeoConfig, GeoPaths, Point2D};

fn main() {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().expect("usage: trap_probe <district_dir> [seeds]"));
    let seeds: u64 = args.next().map(|s| s.parse().unwrap()).unwrap_or(10);

    let env = load_environment(
        &GeoPaths {
            buildings: dir.join("buildings.geojson"),
            roads: dir.join("roads.geojson"),
            safe_areas: dir.join("safe_areas.geojson"),
            soil: dir.join("soil.geojson"),
        },
        GeoConfig::default(),
    )
    .expect("district loads");

    for seed in 1..=seeds {
        let mut spec = RunSpec::default();
        spec.scenario = Scenario {
            seed,
            ..Scenario::default()
        };
        spec.sim.record_positions = true;
        let out = run(&env, &spec).expect("run succeeds");

        let frames = out.positions.as_ref().expect("positions recorded");
        let trapped: Vec<usize> = out
            .trace
            .iter()
            .filter(|r| r.event == "trapped")
            .map(|r| r.agent.index())
            .collect();
        let mut by_cell: BTreeMap<(i64, i64), usize> = BTreeMap::new();
        for &id in &trapped {
            let p = frames[0][id];
            *by_cell
                .entry(((p.x / 100.0) as i64, (p.y / 100.0) as i64))
                .or_default() += 1;
        }
        println!(
            "seed {seed}: trapped={} blocked_edges={} cells={:?}",
            trapped.len(),
            out.blocked_edges.len(),
            by_cell
        );
        let gx = |p: Point2D| ((p.x - 1000.0) / 100.0, (p.y - 1000.0) / 100.0);
        let blocked: Vec<_> = out
            .blocked_edges
            .iter()
            .map(|&e| {
                let edge = &env.graph.edges[e.index()];
                (
                    gx(env.node_pos(edge.a)),
                    gx(env.node_pos(edge.b)),
                )
            })
            .collect();
        println!("  blocked: {blocked:?}");
        if !trapped.is_empty() {
            let sample = trapped[0];
            let p = frames[0][sample];
            println!(
                "  e.g. agent {sample} group={:?} started at ({:.0},{:.0})",
                out.agent_groups[sample], p.x, p.y
            );
        }
    }
}
