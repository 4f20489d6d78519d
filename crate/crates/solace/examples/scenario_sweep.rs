//! Runs the four stock scenarios over a band of seeds against the bundled
//! district and prints final-arrival summaries plus seed-paired win rates.
//!
//!     cargo run --release --example scenario_sweep [district_dir] [seeds]

use std::path::PathBuf;
use std::time::Instant;

use solace::engine::{batch_map, MetricsFrame, RunResult, RunSpec, Scenario};
use solace::geo::{load_environment, GeoConfig, GeoPaths};
use solace::population::TimeOfDay;

fn stock_scenarios() -> Vec<Scenario> {
    let day = Scenario::default();
    vec![
        Scenario { name: "S1".into(), ..day.clone() },
        Scenario {
            name: "S2".into(),
            time_of_day: TimeOfDay::Night,
            ..day.clone()
        },
        Scenario {
            name: "S3".into(),
            include_disabled: true,
            ..day.clone()
        },
        Scenario {
            name: "S4".into(),
            intensity: 8,
            ..day
        },
    ]
}

/// What the sweep keeps from each run: enough for summaries and pairing.
struct Reduced {
    scenario: String,
    seed: u64,
    last: MetricsFrame,
    trapped: u32,
    arrived: u32,
    n: u32,
}

fn reduce(r: RunResult) -> Reduced {
    let last = *r.frames.last().expect("frames");
    Reduced {
        scenario: r.scenario,
        seed: r.seed,
        last,
        trapped: last.trapped,
        arrived: last.all.arrived,
        n: r.population.all,
    }
}

fn main() {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("districts/district_a"));
    let seeds: u64 = std::env::args()
        .nth(2)
        .and_then(|s| s.parse().ok())
        .unwrap_or(10);

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

    let mut specs: Vec<RunSpec> = Vec::new();
    for scenario in stock_scenarios() {
        for seed in 1..=seeds {
            let mut spec = RunSpec::default();
            spec.scenario = Scenario { seed, ..scenario.clone() };
            specs.push(spec);
        }
    }

    let t0 = Instant::now();
    let reduced = batch_map(&env, &specs, 1, reduce).expect("batch");
    let elapsed = t0.elapsed();
    println!(
        "{} runs in {:.1}s ({:.2}s per run)\n",
        reduced.len(),
        elapsed.as_secs_f64(),
        elapsed.as_secs_f64() / reduced.len() as f64
    );

    for name in ["S1", "S2", "S3", "S4"] {
        let rows: Vec<&Reduced> = reduced.iter().filter(|r| r.scenario == name).collect();
        let n = rows.len() as f64;
        let mean = |f: &dyn Fn(&Reduced) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / n;
        println!(
            "{name}: all={:.4} adult={:.4} elderly={:.4} child={:.4} disabled={:.4} trapped={:.0} arrived={:.0}/{}",
            mean(&|r| r.last.all.fraction),
            mean(&|r| r.last.adult.fraction),
            mean(&|r| r.last.elderly.fraction),
            mean(&|r| r.last.child.fraction),
            mean(&|r| r.last.disabled.fraction),
            mean(&|r| r.trapped as f64),
            mean(&|r| r.arrived as f64),
            rows[0].n
        );
    }

    let wins = |a: &str, b: &str| {
        let fa: Vec<(u64, f64)> = reduced
            .iter()
            .filter(|r| r.scenario == a)
            .map(|r| (r.seed, r.last.all.fraction))
            .collect();
        let fb: Vec<(u64, f64)> = reduced
            .iter()
            .filter(|r| r.scenario == b)
            .map(|r| (r.seed, r.last.all.fraction))
            .collect();
        let mut w = 0;
        for (s, va) in &fa {
            if let Some((_, vb)) = fb.iter().find(|(sb, _)| sb == s) {
                if va > vb {
                    w += 1;
                }
            }
        }
        (w, fa.len())
    };
    let (w12, n12) = wins("S1", "S2");
    let (w24, n24) = wins("S2", "S4");
    println!("\nS1>S2 in {w12}/{n12} pairs, S2>S4 in {w24}/{n24} pairs");
}
