//! Synthetic population: age groups placed by time of day, household and
//! workplace ties, mobility and disability attributes.
//!
//! Counts are exact absolute numbers per (age group, location kind) taken
//! from census-style defaults; the same people are at home by night and
//! spread across work, school, and outdoor locations by day, so per group the
//! day total always equals the night total. Every child belongs to a
//! household with one or two adult parents sharing a home building, and each
//! school in use gets at least one relocated adult marked as teacher.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geo::{geom, BuildingId, Environment, Point2D, Typology};
use crate::rng::{chance, uniform};
use crate::social::{AttachmentProfile, RelationKind, SocialNetwork};
use crate::AgentId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AgeGroup {
    #[serde(rename = "child_0_2")]
    Child0_2,
    #[serde(rename = "child_3_14")]
    Child3_14,
    #[serde(rename = "adult_15_29")]
    Adult15_29,
    #[serde(rename = "adult_30_59")]
    Adult30_59,
    #[serde(rename = "elderly_60_plus")]
    Elderly60Plus,
}

impl AgeGroup {
    pub const ALL: [AgeGroup; 5] = [
        AgeGroup::Child0_2,
        AgeGroup::Child3_14,
        AgeGroup::Adult15_29,
        AgeGroup::Adult30_59,
        AgeGroup::Elderly60Plus,
    ];

    pub fn is_child(self) -> bool {
        matches!(self, AgeGroup::Child0_2 | AgeGroup::Child3_14)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocationKind {
    Home,
    Work,
    School,
    Public,
    Outdoors,
}

impl LocationKind {
    pub const ALL: [LocationKind; 5] = [
        LocationKind::Home,
        LocationKind::Work,
        LocationKind::School,
        LocationKind::Public,
        LocationKind::Outdoors,
    ];

    fn typology(self) -> Option<Typology> {
        match self {
            LocationKind::Home => Some(Typology::Home),
            LocationKind::Work => Some(Typology::Work),
            LocationKind::School => Some(Typology::School),
            LocationKind::Public => Some(Typology::Public),
            LocationKind::Outdoors => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeOfDay {
    Day,
    Night,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Civilian,
    Teacher,
}

/// Per age group: disability percentage range, walking speed cap, and
/// (day, night) head counts per location kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    /// Percent range [lo, hi]; one rate is drawn per run from this range.
    pub disabled_pct: (f64, f64),
    /// Upper bound of the walking speed draw (m/s).
    pub speed_cap: f64,
    pub counts: BTreeMap<LocationKind, (u32, u32)>,
}

impl GroupSpec {
    pub fn count(&self, loc: LocationKind, tod: TimeOfDay) -> u32 {
        let (day, night) = self.counts.get(&loc).copied().unwrap_or((0, 0));
        match tod {
            TimeOfDay::Day => day,
            TimeOfDay::Night => night,
        }
    }

    pub fn total(&self, tod: TimeOfDay) -> u32 {
        LocationKind::ALL.iter().map(|l| self.count(*l, tod)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PopulationSpec {
    pub groups: BTreeMap<AgeGroup, GroupSpec>,
    /// Speed draws are uniform on [floor_frac * cap, cap].
    pub speed_floor_frac: f64,
    /// Disabled agents walk at this multiple of their drawn speed.
    pub disabled_speed_mult: f64,
    /// Probability a household has a single parent instead of two.
    pub single_parent_prob: f64,
    /// One teacher is assigned per this many children at a school.
    pub children_per_teacher: u32,
}

impl Default for PopulationSpec {
    fn default() -> Self {
        let mut groups = BTreeMap::new();
        let counts = |pairs: &[(LocationKind, (u32, u32))]| {
            pairs.iter().copied().collect::<BTreeMap<_, _>>()
        };
        groups.insert(
            AgeGroup::Child0_2,
            GroupSpec {
                disabled_pct: (0.0, 0.0),
                speed_cap: 0.0,
                counts: counts(&[
                    (LocationKind::Home, (75, 83)),
                    (LocationKind::Outdoors, (8, 0)),
                ]),
            },
        );
        groups.insert(
            AgeGroup::Child3_14,
            GroupSpec {
                disabled_pct: (0.0, 0.0),
                speed_cap: 2.23,
                counts: counts(&[
                    (LocationKind::Home, (0, 331)),
                    (LocationKind::School, (298, 0)),
                    (LocationKind::Outdoors, (33, 0)),
                ]),
            },
        );
        groups.insert(
            AgeGroup::Adult15_29,
            GroupSpec {
                disabled_pct: (1.2, 2.8),
                speed_cap: 3.83,
                counts: counts(&[
                    (LocationKind::Home, (209, 1842)),
                    (LocationKind::Work, (547, 0)),
                    (LocationKind::School, (902, 0)),
                    (LocationKind::Outdoors, (184, 0)),
                ]),
            },
        );
        groups.insert(
            AgeGroup::Adult30_59,
            GroupSpec {
                disabled_pct: (1.3, 12.3),
                speed_cap: 3.83,
                counts: counts(&[
                    (LocationKind::Home, (0, 1243)),
                    (LocationKind::Work, (1119, 0)),
                    (LocationKind::Outdoors, (124, 0)),
                ]),
            },
        );
        groups.insert(
            AgeGroup::Elderly60Plus,
            GroupSpec {
                disabled_pct: (10.2, 36.1),
                speed_cap: 1.11,
                counts: counts(&[
                    (LocationKind::Home, (553, 853)),
                    (LocationKind::Work, (215, 0)),
                    (LocationKind::Outdoors, (85, 0)),
                ]),
            },
        );
        PopulationSpec {
            groups,
            speed_floor_frac: 0.5,
            disabled_speed_mult: 0.5,
            single_parent_prob: 0.3,
            children_per_teacher: 40,
        }
    }
}

impl PopulationSpec {
    pub fn validate(&self) -> Result<(), PopulationError> {
        for (group, spec) in &self.groups {
            let (lo, hi) = spec.disabled_pct;
            if !(0.0..=100.0).contains(&lo) || !(0.0..=100.0).contains(&hi) || lo > hi {
                return Err(PopulationError::BadSpec(format!(
                    "{group:?}: disabled_pct range [{lo}, {hi}] invalid"
                )));
            }
            if !(spec.speed_cap >= 0.0) {
                return Err(PopulationError::BadSpec(format!(
                    "{group:?}: speed_cap must be >= 0"
                )));
            }
        }
        if !(self.speed_floor_frac > 0.0 && self.speed_floor_frac <= 1.0) {
            return Err(PopulationError::BadSpec(
                "speed_floor_frac must be in (0,1]".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.single_parent_prob) {
            return Err(PopulationError::BadSpec(
                "single_parent_prob must be in [0,1]".into(),
            ));
        }
        if self.children_per_teacher == 0 {
            return Err(PopulationError::BadSpec(
                "children_per_teacher must be >= 1".into(),
            ));
        }
        Ok(())
    }

    pub fn total(&self, tod: TimeOfDay) -> u32 {
        self.groups.values().map(|g| g.total(tod)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HouseholdId(pub u32);

impl HouseholdId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Household {
    pub id: HouseholdId,
    pub home: BuildingId,
    /// Members with their role in the household (Parent or Child).
    pub members: Vec<(AgentId, RelationKind)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Agent {
    pub id: AgentId,
    pub age_group: AgeGroup,
    pub location: LocationKind,
    pub building: Option<BuildingId>,
    pub position: Point2D,
    pub disabled: bool,
    /// Walking speed (m/s); zero for infants.
    pub vmax: f64,
    pub role: Role,
    pub household: Option<HouseholdId>,
}

#[derive(Debug, Clone)]
pub struct Synthesis {
    pub agents: Vec<Agent>,
    pub households: Vec<Household>,
    pub network: SocialNetwork,
    /// Disability rate drawn for each group this run (post include_disabled).
    pub disability_rates: BTreeMap<AgeGroup, f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum PopulationError {
    #[error("population spec invalid: {0}")]
    BadSpec(String),
    #[error("no buildings of use {0:?} but {1} agents must be placed there")]
    MissingBuildings(LocationKind, u32),
    #[error("no road edges to place outdoor agents on")]
    NoRoadEdges,
    #[error("not enough adults aged 30-59 to parent all children: need {needed}, have {available}")]
    InsufficientParents { needed: u32, available: u32 },
    #[error("no adult aged 30-59 available to teach at school building {0}")]
    InsufficientTeachers(BuildingId),
}

/// Uniform point inside a ring (rejection sampling from the bounding box,
/// centroid fallback). Always uses at least two draws.
fn jitter_in<R: Rng>(rng: &mut R, ring: &[Point2D]) -> Point2D {
    let bbox = geom::Bbox::of_ring(ring);
    for _ in 0..64 {
        let p = Point2D::new(
            uniform(rng, bbox.min_x, bbox.max_x),
            uniform(rng, bbox.min_y, bbox.max_y),
        );
        if geom::point_in_ring(p, ring) {
            return p;
        }
    }
    geom::ring_centroid(ring)
}

fn pick<'a, T, R: Rng>(rng: &mut R, pool: &'a [T]) -> &'a T {
    let idx = (uniform(rng, 0.0, pool.len() as f64) as usize).min(pool.len() - 1);
    &pool[idx]
}

/// Draw the per-run disability rate for a percent range.
pub fn draw_disability_rate<R: Rng>(rng: &mut R, pct_range: (f64, f64)) -> f64 {
    uniform(rng, pct_range.0, pct_range.1) / 100.0
}

/// Build the full population for one run.
///
/// Draw order is fixed: per-group disability rates, then per-agent attribute
/// draws in id order, then placement draws in id order, then household
/// formation, then teacher assignment. Identical seeds reproduce identical
/// populations byte for byte.
pub fn synthesize_population<R: Rng>(
    spec: &PopulationSpec,
    env: &Environment,
    tod: TimeOfDay,
    include_disabled: bool,
    profile: AttachmentProfile,
    rng: &mut R,
) -> Result<Synthesis, PopulationError> {
    spec.validate()?;

    let mut rates = BTreeMap::new();
    for group in AgeGroup::ALL {
        let Some(gspec) = spec.groups.get(&group) else {
            continue;
        };
        rates.insert(group, draw_disability_rate(rng, gspec.disabled_pct));
    }

    // Attribute draws happen for every agent regardless of include_disabled
    // so populations stay aligned across scenario variants of one seed.
    let mut agents: Vec<Agent> = Vec::new();
    for group in AgeGroup::ALL {
        let Some(gspec) = spec.groups.get(&group) else {
            continue;
        };
        for loc in LocationKind::ALL {
            for _ in 0..gspec.count(loc, tod) {
                let raw_disabled = chance(rng, rates[&group]);
                let disabled = include_disabled && raw_disabled && !group.is_child();
                let base = uniform(
                    rng,
                    spec.speed_floor_frac * gspec.speed_cap,
                    gspec.speed_cap,
                );
                let vmax = if disabled {
                    base * spec.disabled_speed_mult
                } else {
                    base
                };
                agents.push(Agent {
                    id: AgentId(agents.len() as u32),
                    age_group: group,
                    location: loc,
                    building: None,
                    position: Point2D::new(0.0, 0.0),
                    disabled,
                    vmax,
                    role: Role::Civilian,
                    household: None,
                });
            }
        }
    }

    // Placement.
    let pools: BTreeMap<LocationKind, Vec<BuildingId>> = LocationKind::ALL
        .iter()
        .filter_map(|loc| {
            loc.typology()
                .map(|t| (*loc, env.buildings_of(t)))
        })
        .collect();
    for i in 0..agents.len() {
        let loc = agents[i].location;
        match loc.typology() {
            Some(_) => {
                let pool = &pools[&loc];
                if pool.is_empty() {
                    let needed = agents.iter().filter(|a| a.location == loc).count() as u32;
                    return Err(PopulationError::MissingBuildings(loc, needed));
                }
                let b = *pick(rng, pool);
                agents[i].building = Some(b);
                agents[i].position = jitter_in(rng, &env.buildings[b.index()].ring);
            }
            None => {
                if env.graph.edges.is_empty() {
                    return Err(PopulationError::NoRoadEdges);
                }
                let e = pick(rng, &env.graph.edges);
                let t = uniform(rng, 0.0, 1.0);
                let a = env.node_pos(e.a);
                let b = env.node_pos(e.b);
                agents[i].position =
                    Point2D::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y));
            }
        }
    }

    // Households: every child gets 1-2 parents sharing a home building.
    let mut network = SocialNetwork::new(agents.len(), profile);
    let mut households: Vec<Household> = Vec::new();
    let mut child_ids: Vec<AgentId> = agents
        .iter()
        .filter(|a| a.age_group.is_child())
        .map(|a| a.id)
        .collect();
    let mut parent_pool: Vec<AgentId> = agents
        .iter()
        .filter(|a| a.age_group == AgeGroup::Adult30_59)
        .map(|a| a.id)
        .collect();
    let available_parents = parent_pool.len() as u32;
    child_ids.shuffle(rng);
    parent_pool.shuffle(rng);
    let homes = &pools[&LocationKind::Home];
    let mut next_child = 0;
    while next_child < child_ids.len() {
        if homes.is_empty() {
            return Err(PopulationError::MissingBuildings(
                LocationKind::Home,
                child_ids.len() as u32,
            ));
        }
        let u = uniform(rng, 0.0, 1.0);
        let size = if u < 0.5 {
            1
        } else if u < 0.85 {
            2
        } else {
            3
        }
        .min(child_ids.len() - next_child);
        let children = &child_ids[next_child..next_child + size];
        next_child += size;
        let n_parents = if chance(rng, spec.single_parent_prob) { 1 } else { 2 };
        if parent_pool.len() < n_parents {
            return Err(PopulationError::InsufficientParents {
                needed: n_parents as u32,
                available: available_parents,
            });
        }
        let parents: Vec<AgentId> = parent_pool.drain(..n_parents).collect();
        let home = *pick(rng, homes);
        let hid = HouseholdId(households.len() as u32);
        let mut members: Vec<(AgentId, RelationKind)> = Vec::new();
        for &p in &parents {
            members.push((p, RelationKind::Parent));
        }
        for &c in children {
            members.push((c, RelationKind::Child));
        }
        for &(m, _) in &members {
            agents[m.index()].household = Some(hid);
            if agents[m.index()].location == LocationKind::Home {
                agents[m.index()].building = Some(home);
                agents[m.index()].position = jitter_in(rng, &env.buildings[home.index()].ring);
            }
        }
        for &p in &parents {
            for &c in children {
                network.add_link(p, c, RelationKind::Child);
            }
        }
        if let [p1, p2] = parents[..] {
            network.add_link(p1, p2, RelationKind::Partner);
        }
        for i in 0..children.len() {
            for j in (i + 1)..children.len() {
                network.add_link(children[i], children[j], RelationKind::Sibling);
            }
        }
        households.push(Household {
            id: hid,
            home,
            members,
        });
    }

    // Teachers: one adult (30-59, placed at work) per started group of
    // children at each school, relocated there and linked to every child.
    if tod == TimeOfDay::Day {
        let mut by_school: BTreeMap<BuildingId, Vec<AgentId>> = BTreeMap::new();
        for a in &agents {
            if a.age_group.is_child() && a.location == LocationKind::School {
                by_school.entry(a.building.unwrap()).or_default().push(a.id);
            }
        }
        let mut candidates: Vec<AgentId> = agents
            .iter()
            .filter(|a| {
                a.age_group == AgeGroup::Adult30_59 && a.location == LocationKind::Work
            })
            .map(|a| a.id)
            .collect();
        candidates.shuffle(rng);
        // Childless adults first so parents keep their own children in focus.
        candidates.sort_by_key(|id| agents[id.index()].household.is_some());
        let mut cursor = 0;
        for (school, children) in &by_school {
            let needed = children.len().div_ceil(spec.children_per_teacher as usize);
            for _ in 0..needed {
                let Some(&teacher) = candidates.get(cursor) else {
                    return Err(PopulationError::InsufficientTeachers(*school));
                };
                cursor += 1;
                let t = teacher.index();
                agents[t].role = Role::Teacher;
                agents[t].building = Some(*school);
                agents[t].position = jitter_in(rng, &env.buildings[school.index()].ring);
                for &c in children {
                    network.add_link(teacher, c, RelationKind::Colleague);
                }
            }
        }
    }

    // Colleagues: everyone working in the same building, pairwise. Existing
    // (closer) links win.
    let mut by_workplace: BTreeMap<BuildingId, Vec<AgentId>> = BTreeMap::new();
    for a in &agents {
        if a.location == LocationKind::Work {
            by_workplace.entry(a.building.unwrap()).or_default().push(a.id);
        }
    }
    for (_, ids) in by_workplace {
        for i in 0..ids.len() {
            for j in (i + 1)..ids.len() {
                network.add_link(ids[i], ids[j], RelationKind::Colleague);
            }
        }
    }

    debug_assert!(network.validate().is_ok());
    if !include_disabled {
        rates.values_mut().for_each(|r| *r = 0.0);
    }
    Ok(Synthesis {
        agents,
        households,
        network,
        disability_rates: rates,
    })
}
