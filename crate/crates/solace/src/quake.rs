//! Earthquake damage: local intensity from soil, per-building collapse
//! sampling, and debris footprints that block streets.
//!
//! Each building gets exactly one uniform draw per run, consumed in
//! ascending building id order and compared against its collapse
//! probability. Because probability tables are non-decreasing in intensity,
//! replaying the same seed at a higher intensity collapses a superset of the
//! buildings, which keeps scenario comparisons monotone in hazard.

use serde::{Deserialize, Serialize};

use crate::geo::{
    geom, BuildingFootprint, BuildingId, Environment, Point2D, VulnerabilityClass,
};
use crate::rng::uniform;
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EarthquakeEvent {
    /// Macroseismic intensity of the event before soil effects, 1..=12.
    pub intensity: u8,
}

impl EarthquakeEvent {
    pub fn validate(&self) -> Result<(), QuakeError> {
        if !(1..=12).contains(&self.intensity) {
            return Err(QuakeError::BadIntensity(self.intensity));
        }
        Ok(())
    }
}

/// Collapse probabilities per intensity level for one vulnerability class.
/// Levels must be 1..=12 with non-decreasing probabilities; lookups use the
/// nearest defined level, ties resolved toward the lower one.
pub type DamageTable = Vec<(u8, f64)>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DamageModel {
    pub masonry: DamageTable,
    pub concrete: DamageTable,
    /// Debris extends outward from the footprint hull by this fraction of
    /// the building height.
    pub debris_width_fraction: f64,
}

impl Default for DamageModel {
    fn default() -> Self {
        DamageModel {
            masonry: vec![(6, 0.25), (8, 0.70)],
            concrete: vec![(6, 0.05), (8, 0.30)],
            debris_width_fraction: 0.5,
        }
    }
}

impl DamageModel {
    pub fn class_table(&self, class: VulnerabilityClass) -> &DamageTable {
        match class {
            VulnerabilityClass::Masonry => &self.masonry,
            VulnerabilityClass::Concrete => &self.concrete,
        }
    }

    pub fn validate(&self) -> Result<(), QuakeError> {
        for (name, table) in [("masonry", &self.masonry), ("concrete", &self.concrete)] {
            let mut last: Option<(u8, f64)> = None;
            for &(level, p) in table {
                if !(1..=12).contains(&level) {
                    return Err(QuakeError::BadTable(format!(
                        "{name}: level {level} outside 1..=12"
                    )));
                }
                if !(0.0..=1.0).contains(&p) {
                    return Err(QuakeError::BadTable(format!(
                        "{name}: probability {p} outside [0,1]"
                    )));
                }
                if let Some((pl, pp)) = last {
                    if level <= pl {
                        return Err(QuakeError::BadTable(format!(
                            "{name}: levels must be strictly increasing ({pl} then {level})"
                        )));
                    }
                    if p < pp {
                        return Err(QuakeError::BadTable(format!(
                            "{name}: probabilities must be non-decreasing ({pp} then {p})"
                        )));
                    }
                }
                last = Some((level, p));
            }
        }
        if !(self.debris_width_fraction >= 0.0) {
            return Err(QuakeError::BadTable(
                "debris_width_fraction must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum QuakeError {
    #[error("event intensity {0} outside 1..=12")]
    BadIntensity(u8),
    #[error("damage table invalid: {0}")]
    BadTable(String),
}

/// Event intensity shifted by the soil zone under the building centroid,
/// clamped back into 1..=12.
pub fn local_intensity(env: &Environment, event: EarthquakeEvent, b: &BuildingFootprint) -> u8 {
    let modifier = env
        .soil_zone_at(b.centroid)
        .map(|z| env.soil_zones[z.index()].intensity_modifier)
        .unwrap_or(0);
    (event.intensity as i16 + modifier as i16).clamp(1, 12) as u8
}

/// Nearest-level lookup in a damage table, ties toward the lower level.
/// Empty tables mean the building never collapses.
pub fn table_probability(table: &DamageTable, intensity: u8) -> f64 {
    let mut best: Option<(u8, u8, f64)> = None;
    for &(level, p) in table {
        let dist = level.abs_diff(intensity);
        let better = match best {
            None => true,
            Some((bd, bl, _)) => dist < bd || (dist == bd && level < bl),
        };
        if better {
            best = Some((dist, level, p));
        }
    }
    best.map(|(_, _, p)| p).unwrap_or(0.0)
}

/// Collapse probability for one building: its own table when the footprint
/// carries one, the model's class table otherwise.
pub fn damage_probability(
    model: &DamageModel,
    b: &BuildingFootprint,
    local_intensity: u8,
) -> f64 {
    match &b.damage_probabilities {
        Some(table) => table_probability(table, local_intensity),
        None => table_probability(model.class_table(b.vulnerability), local_intensity),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BuildingDamage {
    pub building: BuildingId,
    pub local_intensity: u8,
    pub probability: f64,
    pub collapsed: bool,
}

/// One uniform draw per building, ascending id.
pub fn sample_damage<R: Rng>(
    env: &Environment,
    model: &DamageModel,
    event: EarthquakeEvent,
    rng: &mut R,
) -> Vec<BuildingDamage> {
    env.buildings
        .iter()
        .map(|b| {
            let li = local_intensity(env, event, b);
            let p = damage_probability(model, b, li);
            let u = uniform(rng, 0.0, 1.0);
            BuildingDamage {
                building: b.id,
                local_intensity: li,
                probability: p,
                collapsed: u < p,
            }
        })
        .collect()
}

/// Rubble apron around a collapsed building: the convex hull of the
/// footprint pushed outward by `debris_width_fraction * height`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DebrisZone {
    pub building: BuildingId,
    pub ring: Vec<Point2D>,
}

impl AsRef<[Point2D]> for DebrisZone {
    fn as_ref(&self) -> &[Point2D] {
        &self.ring
    }
}

pub fn generate_debris(
    env: &Environment,
    model: &DamageModel,
    damage: &[BuildingDamage],
) -> Vec<DebrisZone> {
    damage
        .iter()
        .filter(|d| d.collapsed)
        .map(|d| {
            let b = &env.buildings[d.building.index()];
            let hull = geom::convex_hull(&b.ring);
            let width = model.debris_width_fraction * b.height;
            DebrisZone {
                building: d.building,
                ring: geom::offset_convex_ring(&hull, width),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::test_town;
    use crate::rng::stream_rng;
    use approx::assert_relative_eq;

    #[test]
    fn nearest_level_lookup_with_low_tie() {
        let table = vec![(6, 0.25), (8, 0.70)];
        assert_relative_eq!(table_probability(&table, 4), 0.25);
        assert_relative_eq!(table_probability(&table, 6), 0.25);
        // 7 is equally far from 6 and 8; the lower level wins.
        assert_relative_eq!(table_probability(&table, 7), 0.25);
        assert_relative_eq!(table_probability(&table, 8), 0.70);
        assert_relative_eq!(table_probability(&table, 12), 0.70);
        assert_relative_eq!(table_probability(&Vec::new(), 8), 0.0);
    }

    #[test]
    fn default_model_probabilities() {
        let m = DamageModel::default();
        m.validate().unwrap();
        let env = test_town();
        let masonry_home = &env.buildings[0];
        let concrete_work = &env.buildings[2];
        assert_relative_eq!(damage_probability(&m, masonry_home, 6), 0.25);
        assert_relative_eq!(damage_probability(&m, masonry_home, 8), 0.70);
        assert_relative_eq!(damage_probability(&m, concrete_work, 6), 0.05);
        assert_relative_eq!(damage_probability(&m, concrete_work, 8), 0.30);
    }

    #[test]
    fn per_building_table_overrides_class_defaults() {
        let m = DamageModel::default();
        let env = test_town();
        let mut b = env.buildings[0].clone();
        b.damage_probabilities = Some(vec![(6, 0.9)]);
        assert_relative_eq!(damage_probability(&m, &b, 6), 0.9);
        assert_relative_eq!(damage_probability(&m, &b, 12), 0.9);
    }

    #[test]
    fn soil_zone_shifts_and_clamps_intensity() {
        let env = test_town();
        // No building centroid sits in the town's soil zone.
        let outside = &env.buildings[0];
        assert_eq!(
            local_intensity(&env, EarthquakeEvent { intensity: 6 }, outside),
            6
        );
        // Fake a footprint whose centroid is inside the modifier +1 zone.
        let mut inside = env.buildings[0].clone();
        inside.centroid = Point2D::new(2000.0, 2000.0);
        assert_eq!(
            local_intensity(&env, EarthquakeEvent { intensity: 6 }, &inside),
            7
        );
        assert_eq!(
            local_intensity(&env, EarthquakeEvent { intensity: 12 }, &inside),
            12
        );
    }

    #[test]
    fn same_seed_higher_intensity_collapses_superset() {
        let env = test_town();
        let m = DamageModel::default();
        for seed in 0..50u64 {
            let d6 = sample_damage(
                &env,
                &m,
                EarthquakeEvent { intensity: 6 },
                &mut stream_rng(seed, "damage"),
            );
            let d8 = sample_damage(
                &env,
                &m,
                EarthquakeEvent { intensity: 8 },
                &mut stream_rng(seed, "damage"),
            );
            for (a, b) in d6.iter().zip(&d8) {
                assert!(
                    !a.collapsed || b.collapsed,
                    "seed {seed}: building {} collapsed at 6 but not at 8",
                    a.building
                );
            }
        }
    }

    #[test]
    fn collapse_rate_matches_probability() {
        let env = test_town();
        let m = DamageModel::default();
        let mut rng = stream_rng(7, "damage-mc");
        let n = 100_000;
        let mut hits = 0u32;
        for _ in 0..n {
            let d = sample_damage(&env, &m, EarthquakeEvent { intensity: 6 }, &mut rng);
            // Building 0 is masonry with default p = 0.25 at intensity 6.
            if d[0].collapsed {
                hits += 1;
            }
        }
        let rate = hits as f64 / n as f64;
        assert!((rate - 0.25).abs() < 0.02, "rate {rate}");
    }

    #[test]
    fn debris_surrounds_footprint_and_scales_with_height() {
        let env = test_town();
        let m = DamageModel::default();
        let b = &env.buildings[0];
        let damage = vec![BuildingDamage {
            building: b.id,
            local_intensity: 8,
            probability: 1.0,
            collapsed: true,
        }];
        let zones = generate_debris(&env, &m, &damage);
        assert_eq!(zones.len(), 1);
        let ring = &zones[0].ring;
        // Every footprint vertex is strictly inside the apron.
        for &v in &b.ring {
            assert!(geom::point_in_ring(v, ring));
        }
        // Height 10, fraction 0.5: the square's sides move out by 5 m.
        let bbox = geom::Bbox::of_ring(ring);
        assert_relative_eq!(bbox.min_x, b.bbox.min_x - 5.0, epsilon = 1e-9);
        assert_relative_eq!(bbox.max_y, b.bbox.max_y + 5.0, epsilon = 1e-9);

        let flat = DamageModel {
            debris_width_fraction: 0.0,
            ..DamageModel::default()
        };
        let zero = generate_debris(&env, &flat, &damage);
        assert_relative_eq!(
            geom::ring_signed_area(&zero[0].ring),
            geom::ring_signed_area(&geom::convex_hull(&b.ring)),
            max_relative = 1e-12
        );
    }

    #[test]
    fn table_validation_rejects_bad_shapes() {
        let mut m = DamageModel::default();
        m.masonry = vec![(6, 0.5), (8, 0.4)];
        assert!(m.validate().is_err());
        m.masonry = vec![(6, 0.5), (6, 0.6)];
        assert!(m.validate().is_err());
        m.masonry = vec![(0, 0.5)];
        assert!(m.validate().is_err());
        m.masonry = vec![(6, 1.5)];
        assert!(m.validate().is_err());
        assert!(EarthquakeEvent { intensity: 0 }.validate().is_err());
        assert!(EarthquakeEvent { intensity: 13 }.validate().is_err());
        assert!(EarthquakeEvent { intensity: 8 }.validate().is_ok());
    }
}
