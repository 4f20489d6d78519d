//! Discrete-time scheduler wiring geography, population, damage, and
//! behavior into reproducible runs.
//!
//! A run synthesizes the population, fires the earthquake at t = 0, blocks
//! debris-covered streets, then ticks in two phases: every agent first reads
//! a frozen snapshot of positions and states to revise beliefs and propose
//! an action, then all proposals commit in ascending id order. Identical
//! (scenario, seed, config, environment) inputs reproduce byte-identical
//! outputs.

mod batch;
mod csv;

pub use batch::{
    batch_map, batch_run, paired_comparison, summarize, summarize_finals, PairedComparison,
    SummaryRow,
};
pub use csv::{result_csv, summary_csv, trace_csv};

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::behavior::{
    build_desires, choose_pre_evacuation, select_intention, AgentState, BehaviorConfig, Beliefs,
    Intention, KinBelief, KinStatus, PlanContext, PlanKind,
};
use crate::geo::{
    apply_debris_blocking, nearest_node, route_between, route_to_nearest_safe_area, BlockedSet,
    BlockingRule, Environment, NodeId, Point2D, Route, RouteResult,
};
use crate::population::{synthesize_population, AgeGroup, PopulationSpec, Role, TimeOfDay};
use crate::quake::{generate_debris, sample_damage, DamageModel, EarthquakeEvent};
use crate::rng::Streams;
use crate::social::{
    bond_strength, perception_distance, AttachmentProfile, BondTable, RelationKind,
};
use crate::AgentId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub time_of_day: TimeOfDay,
    pub intensity: u8,
    pub include_disabled: bool,
    /// Perception exponent override; defaults to 1.0 by day, 0.2 by night.
    pub k_override: Option<f64>,
    pub profile: AttachmentProfile,
    pub seed: u64,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            name: "S1".into(),
            time_of_day: TimeOfDay::Day,
            intensity: 6,
            include_disabled: false,
            k_override: None,
            profile: AttachmentProfile::Altruistic,
            seed: 1,
        }
    }
}

impl Scenario {
    pub fn perception_k(&self) -> f64 {
        self.k_override.unwrap_or(match self.time_of_day {
            TimeOfDay::Day => 1.0,
            TimeOfDay::Night => 0.2,
        })
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if !(1..=12).contains(&self.intensity) {
            return Err(EngineError::BadConfig(format!(
                "scenario {}: intensity {} outside 1..=12",
                self.name, self.intensity
            )));
        }
        let k = self.perception_k();
        if !(k > 0.0 && k <= 1.0) {
            return Err(EngineError::BadConfig(format!(
                "scenario {}: perception exponent {k} outside (0,1]",
                self.name
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    /// Record a metrics frame every this many ticks.
    pub cadence: u32,
    /// Keep per-frame agent positions in memory (tests and visualization).
    pub record_positions: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 1.0,
            horizon: 1000.0,
            cadence: 1,
            record_positions: false,
        }
    }
}

impl SimConfig {
    pub fn ticks(&self) -> u64 {
        (self.horizon / self.dt).round() as u64
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if !(self.dt > 0.0) {
            return Err(EngineError::BadConfig("dt must be > 0".into()));
        }
        let ticks = self.horizon / self.dt;
        if !(self.horizon > 0.0) || (ticks - ticks.round()).abs() > 1e-9 {
            return Err(EngineError::BadConfig(
                "horizon must be a positive multiple of dt".into(),
            ));
        }
        if self.cadence == 0 {
            return Err(EngineError::BadConfig("cadence must be >= 1".into()));
        }
        Ok(())
    }
}

/// Everything one run needs besides the environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSpec {
    pub scenario: Scenario,
    pub population: PopulationSpec,
    pub bonds: BondTable,
    pub behavior: BehaviorConfig,
    pub damage: DamageModel,
    pub sim: SimConfig,
    /// Baseline perception distance in meters.
    pub pd_normal: f64,
    pub blocking: BlockingRule,
}

impl Default for RunSpec {
    fn default() -> Self {
        RunSpec {
            scenario: Scenario::default(),
            population: PopulationSpec::default(),
            bonds: BondTable::default(),
            behavior: BehaviorConfig::default(),
            damage: DamageModel::default(),
            sim: SimConfig::default(),
            pd_normal: 50.0,
            blocking: BlockingRule::default(),
        }
    }
}

impl RunSpec {
    pub fn validate(&self) -> Result<(), EngineError> {
        self.scenario.validate()?;
        self.sim.validate()?;
        self.population
            .validate()
            .map_err(|e| EngineError::BadConfig(e.to_string()))?;
        self.bonds.validate().map_err(EngineError::BadConfig)?;
        self.behavior.validate().map_err(EngineError::BadConfig)?;
        self.damage
            .validate()
            .map_err(|e| EngineError::BadConfig(e.to_string()))?;
        if !(self.pd_normal > 0.0) {
            return Err(EngineError::BadConfig("pd_normal must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryFrame {
    pub arrived: u32,
    pub fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsFrame {
    pub t: f64,
    pub adult: CategoryFrame,
    pub elderly: CategoryFrame,
    pub child: CategoryFrame,
    pub disabled: CategoryFrame,
    pub all: CategoryFrame,
    pub trapped: u32,
    pub enroute: u32,
    pub preevac: u32,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CategoryCounts {
    pub adult: u32,
    pub elderly: u32,
    pub child: u32,
    pub disabled: u32,
    pub all: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub agent: AgentId,
    pub event: String,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Tallies {
    pub arrived: u32,
    pub trapped: u32,
    pub enroute: u32,
    pub preevac: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunResult {
    pub scenario: String,
    pub seed: u64,
    pub frames: Vec<MetricsFrame>,
    pub trace: Vec<TraceRow>,
    pub tallies: Tallies,
    pub population: CategoryCounts,
    /// Arrival time per agent, latched at first safe-area entry.
    pub arrival_times: Vec<Option<f64>>,
    pub agent_groups: Vec<AgeGroup>,
    pub agent_disabled: Vec<bool>,
    pub agent_vmax: Vec<f64>,
    pub blocked_edges: BlockedSet,
    pub collapsed_buildings: u32,
    /// Per-frame agent positions when record_positions was set.
    pub positions: Option<Vec<Vec<Point2D>>>,
}

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("{0}")]
    BadConfig(String),
    #[error(transparent)]
    Population(#[from] crate::population::PopulationError),
    #[error(transparent)]
    Quake(#[from] crate::quake::QuakeError),
    #[error("run '{scenario}' seed {seed} failed: {source}")]
    RunFailed {
        scenario: String,
        seed: u64,
        #[source]
        source: Box<EngineError>,
    },
}

/// Trace event names. Every agent state transition is recorded, plus the
/// social side effects (calls, sightings, abandoned searches, re-entries).
pub mod events {
    pub const PRE_EVACUATING: &str = "pre_evacuating";
    pub const EVACUATING: &str = "evacuating";
    pub const SEEKING: &str = "seeking";
    pub const GROUPING: &str = "grouping";
    pub const FOLLOWING: &str = "following";
    pub const ARRIVED: &str = "arrived";
    pub const TRAPPED: &str = "trapped";
    pub const SEEK_ABANDONED: &str = "seek_abandoned";
    pub const CALL: &str = "call";
    pub const RE_ENTERED: &str = "re_entered";
    pub const PERCEIVED: &str = "perceived";
}

/// Cached waypoint path with progress.
#[derive(Debug, Clone)]
struct Walk {
    waypoints: Vec<Point2D>,
    next: usize,
    purpose: WalkPurpose,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum WalkPurpose {
    Evacuate,
    Seek { target: AgentId, dest: Point2D },
}

struct AgentRt {
    age_group: AgeGroup,
    disabled: bool,
    vmax: f64,
    role: Role,
    felt: bool,
    seek_family: bool,
    /// Household members with this agent's view of the relation, sorted by
    /// (priority rank, id). Empty for children: they follow, never seek.
    kin: Vec<(AgentId, RelationKind)>,
    /// For children: linked parents and teachers, sorted by (rank, id).
    guardians: Vec<(AgentId, RelationKind)>,
    /// kin and guardians merged: everyone this agent scans for.
    contacts: Vec<(AgentId, RelationKind)>,
    /// For teachers: linked pupils.
    pupils: Vec<AgentId>,
    pos: Point2D,
    state: AgentState,
    beliefs: Beliefs,
    walk: Option<Walk>,
    return_budget: u32,
    arrival_time: Option<f64>,
    called: BTreeSet<AgentId>,
    sighted: BTreeSet<AgentId>,
}

impl AgentRt {
    fn is_child(&self) -> bool {
        self.age_group.is_child()
    }

    fn carried_by(&self) -> Option<AgentId> {
        match self.state {
            AgentState::Following {
                leader,
                carried: true,
            } => Some(leader),
            _ => None,
        }
    }
}

/// Frozen per-agent view read by everyone during the proposal phase.
#[derive(Debug, Clone, Copy)]
struct Snap {
    pos: Point2D,
    vmax: f64,
    attached_to: Option<AgentId>,
    arrived: bool,
    trapped: bool,
    /// Still pre-evacuating or idle, so a teacher keeps waiting for them.
    waiting_pupil: bool,
}

#[derive(Debug, Clone, Default)]
struct Proposal {
    new_pos: Option<Point2D>,
    new_state: Option<AgentState>,
    /// Adopt this agent as a follower (bool = carried).
    claim: Option<(AgentId, bool)>,
    spend_return_budget: bool,
    events: Vec<(&'static str, String)>,
}

pub fn run(env: &Environment, spec: &RunSpec) -> Result<RunResult, EngineError> {
    spec.validate()?;
    let scenario = &spec.scenario;
    let mut streams = Streams::new(scenario.seed);
    let k = scenario.perception_k();
    let event = EarthquakeEvent {
        intensity: scenario.intensity,
    };
    event.validate()?;

    let synthesis = synthesize_population(
        &spec.population,
        env,
        scenario.time_of_day,
        scenario.include_disabled,
        scenario.profile,
        &mut streams.population,
    )?;
    let damage = sample_damage(env, &spec.damage, event, &mut streams.damage);
    let debris = generate_debris(env, &spec.damage, &damage);
    let blocked = apply_debris_blocking(env, &debris, &BlockedSet::new(), spec.blocking);
    let collapsed = damage.iter().filter(|d| d.collapsed).count() as u32;

    let egoistic = scenario.profile == AttachmentProfile::Egoistic;
    let n = synthesis.agents.len();

    // Static per-agent wiring from the social network.
    let mut agents: Vec<AgentRt> = Vec::with_capacity(n);
    for a in &synthesis.agents {
        let local = (scenario.intensity as i16
            + env
                .soil_zone_at(a.position)
                .map(|z| env.soil_zones[z.index()].intensity_modifier as i16)
                .unwrap_or(0))
        .clamp(1, 12) as u8;
        let felt = local >= spec.behavior.felt_threshold;
        let mut kin: Vec<(AgentId, RelationKind)> = Vec::new();
        let mut guardians: Vec<(AgentId, RelationKind)> = Vec::new();
        let mut pupils: Vec<AgentId> = Vec::new();
        for &(other, relation) in synthesis.network.neighbors(a.id) {
            let other_agent = &synthesis.agents[other.index()];
            match relation {
                RelationKind::Partner
                | RelationKind::Child
                | RelationKind::Parent
                | RelationKind::Sibling
                    if !a.age_group.is_child() =>
                {
                    kin.push((other, relation));
                }
                RelationKind::Parent if a.age_group.is_child() => {
                    guardians.push((other, relation));
                }
                RelationKind::Colleague
                    if a.age_group.is_child() && other_agent.role == Role::Teacher =>
                {
                    guardians.push((other, relation));
                }
                RelationKind::Colleague
                    if a.role == Role::Teacher && other_agent.age_group.is_child() =>
                {
                    pupils.push(other);
                }
                _ => {}
            }
        }
        kin.sort_by_key(|(id, rel)| (rel.priority_rank(), *id));
        guardians.sort_by_key(|(id, rel)| (rel.priority_rank(), *id));
        pupils.sort();
        let contacts: Vec<(AgentId, RelationKind)> =
            kin.iter().chain(guardians.iter()).copied().collect();
        agents.push(AgentRt {
            age_group: a.age_group,
            disabled: a.disabled,
            vmax: a.vmax,
            role: a.role,
            felt,
            seek_family: false,
            kin,
            guardians,
            contacts,
            pupils,
            pos: a.position,
            state: AgentState::Normal,
            beliefs: Beliefs::default(),
            walk: None,
            return_budget: spec.behavior.return_budget,
            arrival_time: None,
            called: BTreeSet::new(),
            sighted: BTreeSet::new(),
        });
    }

    // Kin beliefs start at scenario-initial positions: people know where
    // their family began the day.
    let initial_positions: Vec<Point2D> = agents.iter().map(|a| a.pos).collect();
    for i in 0..n {
        let kin = agents[i].kin.clone();
        for (other, relation) in kin {
            agents[i].beliefs.kin.insert(
                other,
                KinBelief::new(relation, initial_positions[other.index()]),
            );
        }
    }

    let mut trace: Vec<TraceRow> = Vec::new();

    // Pre-evacuation draws happen for every agent in id order so the
    // behavior stream stays aligned across scenario variants; agents who
    // did not feel the shaking discard theirs and stay Normal.
    for i in 0..n {
        let choice = choose_pre_evacuation(&spec.behavior.pre_evacuation, &mut streams.behavior);
        if !agents[i].felt {
            continue;
        }
        agents[i].seek_family = choice.seek_family && !egoistic && !agents[i].is_child();
        agents[i].beliefs.self_unsafe = true;
        agents[i].state = AgentState::PreEvacuating {
            remaining: choice.delay,
        };
        trace.push(TraceRow {
            t: 0.0,
            agent: AgentId(i as u32),
            event: events::PRE_EVACUATING.into(),
            detail: format!("delay={:.2}", choice.delay),
        });
    }

    // Bond-derived perception radii per relation kind.
    let profile = scenario.profile;
    let bonds = spec.bonds.clone();
    let pd_normal = spec.pd_normal;
    let pd_of = move |relation: RelationKind| -> f64 {
        perception_distance(pd_normal, k, bond_strength(&bonds, relation, profile))
    };

    let mut state = SimState {
        env,
        spec,
        blocked: &blocked,
        agents,
        trace,
        evac_routes: BTreeMap::new(),
        seek_routes: BTreeMap::new(),
        carry_radius: spec.behavior.carry_radius,
        stale_after: spec.behavior.stale_after,
        egoistic,
        pd_child: pd_of(RelationKind::Child),
    };

    let ticks = spec.sim.ticks();
    let dt = spec.sim.dt;
    let mut frames: Vec<MetricsFrame> = Vec::with_capacity(ticks as usize + 1);
    let mut positions: Option<Vec<Vec<Point2D>>> = spec.sim.record_positions.then(Vec::new);

    frames.push(state.frame(0.0));
    if let Some(p) = positions.as_mut() {
        p.push(state.agents.iter().map(|a| a.pos).collect());
    }

    for tick in 1..=ticks {
        let now = tick as f64 * dt;
        state.step(now, dt, &pd_of);
        if tick % spec.sim.cadence as u64 == 0 {
            frames.push(state.frame(now));
            if let Some(p) = positions.as_mut() {
                p.push(state.agents.iter().map(|a| a.pos).collect());
            }
        }
    }

    let last = *frames.last().expect("at least the initial frame");
    let tallies = Tallies {
        arrived: last.all.arrived,
        trapped: last.trapped,
        enroute: last.enroute,
        preevac: last.preevac,
    };
    Ok(RunResult {
        scenario: scenario.name.clone(),
        seed: scenario.seed,
        frames,
        trace: state.trace,
        tallies,
        population: category_population(&state.agents),
        arrival_times: state.agents.iter().map(|a| a.arrival_time).collect(),
        agent_groups: state.agents.iter().map(|a| a.age_group).collect(),
        agent_disabled: state.agents.iter().map(|a| a.disabled).collect(),
        agent_vmax: state.agents.iter().map(|a| a.vmax).collect(),
        blocked_edges: blocked.clone(),
        collapsed_buildings: collapsed,
        positions,
    })
}

fn category_population(agents: &[AgentRt]) -> CategoryCounts {
    let mut c = CategoryCounts::default();
    for a in agents {
        c.all += 1;
        if a.disabled {
            c.disabled += 1;
        }
        match a.age_group {
            AgeGroup::Child0_2 | AgeGroup::Child3_14 => c.child += 1,
            AgeGroup::Adult15_29 | AgeGroup::Adult30_59 => c.adult += 1,
            AgeGroup::Elderly60Plus => c.elderly += 1,
        }
    }
    c
}

/// One agent's contribution to a metrics frame.
#[derive(Debug, Clone, Copy)]
pub(crate) struct MetricsRow {
    pub group: AgeGroup,
    pub disabled: bool,
    pub arrived: bool,
    pub trapped: bool,
    pub preevac: bool,
}

/// Arrived counts and fractions per category. Categories with zero
/// population report fraction 0. Arrived wins over trapped/preevac because
/// arrivals are latched; the remainder is en route (idle included).
pub(crate) fn compute_metrics(t: f64, rows: impl Iterator<Item = MetricsRow>) -> MetricsFrame {
    let mut pop = CategoryCounts::default();
    let mut arr = CategoryCounts::default();
    let mut trapped = 0;
    let mut preevac = 0;
    let mut enroute = 0;
    for r in rows {
        let is_child = r.group.is_child();
        let is_elderly = r.group == AgeGroup::Elderly60Plus;
        pop.all += 1;
        if r.disabled {
            pop.disabled += 1;
        }
        if is_child {
            pop.child += 1;
        } else if is_elderly {
            pop.elderly += 1;
        } else {
            pop.adult += 1;
        }
        if r.arrived {
            arr.all += 1;
            if r.disabled {
                arr.disabled += 1;
            }
            if is_child {
                arr.child += 1;
            } else if is_elderly {
                arr.elderly += 1;
            } else {
                arr.adult += 1;
            }
        } else if r.trapped {
            trapped += 1;
        } else if r.preevac {
            preevac += 1;
        } else {
            enroute += 1;
        }
    }
    let frac = |arrived: u32, population: u32| CategoryFrame {
        arrived,
        fraction: if population == 0 {
            0.0
        } else {
            arrived as f64 / population as f64
        },
    };
    let frame = MetricsFrame {
        t,
        adult: frac(arr.adult, pop.adult),
        elderly: frac(arr.elderly, pop.elderly),
        child: frac(arr.child, pop.child),
        disabled: frac(arr.disabled, pop.disabled),
        all: frac(arr.all, pop.all),
        trapped,
        enroute,
        preevac,
    };
    debug_assert_eq!(
        frame.all.arrived + frame.trapped + frame.enroute + frame.preevac,
        pop.all
    );
    frame
}

struct SimState<'a> {
    env: &'a Environment,
    spec: &'a RunSpec,
    blocked: &'a BlockedSet,
    agents: Vec<AgentRt>,
    trace: Vec<TraceRow>,
    /// Route caches keyed by graph nodes; debris is static after t = 0.
    evac_routes: BTreeMap<NodeId, RouteResult>,
    seek_routes: BTreeMap<(NodeId, NodeId), Option<Route>>,
    carry_radius: f64,
    stale_after: f64,
    egoistic: bool,
    /// Perception radius a parent has for its own child.
    pd_child: f64,
}

impl<'a> SimState<'a> {
    fn frame(&self, t: f64) -> MetricsFrame {
        compute_metrics(
            t,
            self.agents.iter().map(|a| MetricsRow {
                group: a.age_group,
                disabled: a.disabled,
                arrived: a.arrival_time.is_some(),
                trapped: a.arrival_time.is_none() && a.state == AgentState::Trapped,
                preevac: a.arrival_time.is_none()
                    && matches!(a.state, AgentState::PreEvacuating { .. }),
            }),
        )
    }

    fn snapshot(&self) -> Vec<Snap> {
        self.agents
            .iter()
            .map(|a| Snap {
                pos: a.pos,
                vmax: a.vmax,
                attached_to: match a.state {
                    AgentState::Following { leader, .. } => Some(leader),
                    _ => None,
                },
                arrived: matches!(a.state, AgentState::Arrived { .. }),
                trapped: a.state == AgentState::Trapped,
                waiting_pupil: matches!(
                    a.state,
                    AgentState::Normal | AgentState::PreEvacuating { .. }
                ),
            })
            .collect()
    }

    /// Leader walking pace: slowed to the slowest walking follower.
    /// Carried infants ride and do not slow anyone.
    fn follower_pace(&self) -> Vec<f64> {
        let mut pace: Vec<f64> = self.agents.iter().map(|a| a.vmax).collect();
        for a in &self.agents {
            if let AgentState::Following {
                leader,
                carried: false,
            } = a.state
            {
                if a.vmax > 0.0 {
                    let l = leader.index();
                    pace[l] = pace[l].min(a.vmax);
                }
            }
        }
        pace
    }

    fn step(&mut self, now: f64, dt: f64, pd_of: &impl Fn(RelationKind) -> f64) {
        let snap = self.snapshot();
        let pace = self.follower_pace();
        let n = self.agents.len();
        let mut proposals: Vec<Proposal> = Vec::with_capacity(n);
        for i in 0..n {
            let p = self.propose(i, &snap, &pace, now, dt, pd_of);
            proposals.push(p);
        }
        self.commit(proposals, &snap, now);
    }

    /// Phase A for one agent: revise its own beliefs from the snapshot and
    /// produce a proposal. Only `agents[i]` is mutated (beliefs, caches).
    fn propose(
        &mut self,
        i: usize,
        snap: &[Snap],
        pace: &[f64],
        now: f64,
        dt: f64,
        pd_of: &impl Fn(RelationKind) -> f64,
    ) -> Proposal {
        let mut p = Proposal::default();
        let state = self.agents[i].state.clone();
        match state {
            AgentState::Trapped | AgentState::Normal | AgentState::Leading { .. } => p,
            AgentState::Arrived { .. } => {
                self.perceive(i, snap, now, pd_of);
                let a = &self.agents[i];
                if self.egoistic || a.return_budget == 0 {
                    return p;
                }
                let kin = self.kin_statuses(i, snap);
                let desires = build_desires(false, a.seek_family, true, a.return_budget, &kin);
                if let Some(Intention {
                    plan: PlanKind::Seek(target),
                    ..
                }) = select_intention(&desires, PlanContext::default())
                {
                    p.spend_return_budget = true;
                    p.new_state = Some(AgentState::Seeking { target });
                    p.events
                        .push((events::RE_ENTERED, format!("target={target}")));
                    p.events.push((events::SEEKING, format!("target={target}")));
                    if self.agents[i].called.insert(target) {
                        p.events.push((events::CALL, format!("target={target}")));
                    }
                }
                p
            }
            AgentState::PreEvacuating { remaining } => {
                self.perceive(i, snap, now, pd_of);
                if let Some(area) = self.env.safe_area_at(self.agents[i].pos) {
                    p.new_state = Some(AgentState::Arrived { area });
                    p.events.push((events::ARRIVED, format!("area={area}")));
                    return p;
                }
                if remaining > 0.0 {
                    p.new_state = Some(AgentState::PreEvacuating {
                        remaining: (remaining - dt).max(0.0),
                    });
                    return p;
                }
                self.act(i, snap, pace, now, dt, pd_of, &mut p);
                p
            }
            AgentState::Evacuating | AgentState::Seeking { .. } | AgentState::Following { .. } => {
                if self.agents[i].carried_by().is_some() {
                    // Carried infants are moved by their carrier.
                    return p;
                }
                self.perceive(i, snap, now, pd_of);
                self.act(i, snap, pace, now, dt, pd_of, &mut p);
                p
            }
        }
    }

    /// Distance-gated sightings of behavior-relevant contacts: household
    /// kin, a child's guardians. Strangers carry no behavioral weight here,
    /// so the hot loop does not scan them.
    fn perceive(&mut self, i: usize, snap: &[Snap], now: f64, pd_of: &impl Fn(RelationKind) -> f64) {
        if self.egoistic {
            return;
        }
        let pos = snap[i].pos;
        for ci in 0..self.agents[i].contacts.len() {
            let (other, relation) = self.agents[i].contacts[ci];
            let o = other.index();
            let d = pos.dist(snap[o].pos);
            if d > pd_of(relation) {
                continue;
            }
            if self.agents[i].sighted.insert(other) {
                self.trace.push(TraceRow {
                    t: now,
                    agent: AgentId(i as u32),
                    event: events::PERCEIVED.into(),
                    detail: format!("other={other}"),
                });
            }
            let seen_safe = snap[o].arrived;
            let seen_in_care = snap[o].attached_to.is_some_and(|leader| {
                self.agents[leader.index()]
                    .kin
                    .iter()
                    .any(|&(kid, rel)| kid == other && rel == RelationKind::Child)
            });
            if let Some(kb) = self.agents[i].beliefs.kin.get_mut(&other) {
                kb.note_sighting(snap[o].pos, now, seen_safe);
                // Seeing a missing child already in a parent's care, or any
                // missing adult alive and moving, settles the worry.
                if seen_in_care || kb.relation != RelationKind::Child {
                    kb.known_safe = true;
                }
            }
        }
    }

    fn kin_statuses(&self, i: usize, snap: &[Snap]) -> Vec<KinStatus> {
        let a = &self.agents[i];
        let me = AgentId(i as u32);
        a.kin
            .iter()
            .map(|&(other, relation)| {
                let kb = &a.beliefs.kin[&other];
                let o = other.index();
                let attached_to_me = snap[o].attached_to == Some(me);
                // A child in sight needs no search; arrivals are known via
                // the phone-call channel the trace logs as `call`.
                let child_in_sight = relation == RelationKind::Child
                    && a.pos.dist(snap[o].pos) <= self.pd_child;
                let missing =
                    !kb.known_safe && !attached_to_me && !snap[o].arrived && !child_in_sight;
                KinStatus {
                    id: other,
                    relation,
                    missing,
                    abandoned: kb.abandoned,
                }
            })
            .collect()
    }

    /// Pick the plan and movement for an active agent.
    #[allow(clippy::too_many_arguments)]
    fn act(
        &mut self,
        i: usize,
        snap: &[Snap],
        pace: &[f64],
        now: f64,
        dt: f64,
        pd_of: &impl Fn(RelationKind) -> f64,
        p: &mut Proposal,
    ) {
        let kin = self.kin_statuses(i, snap);
        let a = &self.agents[i];
        let leader = self.current_leader(i, snap, pd_of);
        let teacher_waiting = self.spec.behavior.teacher_grouping
            && a.role == Role::Teacher
            && !self.egoistic
            && self.has_waiting_pupil(i, snap, pd_of);
        let desires = build_desires(self.egoistic, a.seek_family, false, a.return_budget, &kin);
        let Some(intention) = select_intention(
            &desires,
            PlanContext {
                teacher_waiting,
                leader,
            },
        ) else {
            return;
        };
        match intention.plan {
            PlanKind::Stay => {}
            PlanKind::Evacuate => self.plan_evacuate(i, snap, pace, dt, p),
            PlanKind::Group => self.plan_group(i, p),
            PlanKind::Follow(l) => self.plan_follow(i, l, snap, dt, p),
            PlanKind::Seek(target) => self.plan_seek(i, target, snap, pace, now, dt, pd_of, p),
        }
    }

    /// The leader this agent should follow, if any: its current one while
    /// alive, otherwise (walking children only) the best perceivable
    /// guardian by (relation rank, distance, id).
    fn current_leader(
        &self,
        i: usize,
        snap: &[Snap],
        pd_of: &impl Fn(RelationKind) -> f64,
    ) -> Option<AgentId> {
        let a = &self.agents[i];
        if let AgentState::Following { leader, .. } = a.state {
            if !snap[leader.index()].trapped {
                return Some(leader);
            }
        }
        if !a.is_child() || a.vmax == 0.0 || self.egoistic {
            return None;
        }
        let mut best: Option<(u8, f64, AgentId)> = None;
        for &(g, relation) in &a.guardians {
            let s = snap[g.index()];
            if s.trapped || s.arrived || s.attached_to.is_some() {
                continue;
            }
            let d = a.pos.dist(s.pos);
            if d > pd_of(relation) {
                continue;
            }
            let key = (relation.priority_rank(), d, g);
            if best.map_or(true, |b| key < b) {
                best = Some(key);
            }
        }
        best.map(|(_, _, g)| g)
    }

    fn has_waiting_pupil(
        &self,
        i: usize,
        snap: &[Snap],
        pd_of: &impl Fn(RelationKind) -> f64,
    ) -> bool {
        let a = &self.agents[i];
        let pd = pd_of(RelationKind::Colleague);
        a.pupils.iter().any(|pup| {
            let s = snap[pup.index()];
            s.waiting_pupil && a.pos.dist(s.pos) <= pd
        })
    }

    fn plan_evacuate(&mut self, i: usize, _snap: &[Snap], pace: &[f64], dt: f64, p: &mut Proposal) {
        if self.env.safe_area_at(self.agents[i].pos).is_some() {
            // Already standing in a safe area: become an evacuee and let
            // the post-commit arrival sweep latch it this same tick.
            if !matches!(self.agents[i].state, AgentState::Evacuating) {
                p.new_state = Some(AgentState::Evacuating);
                p.events.push((events::EVACUATING, String::new()));
            }
            self.agents[i].walk = None;
            return;
        }
        let needs_route = !matches!(
            self.agents[i].walk,
            Some(Walk {
                purpose: WalkPurpose::Evacuate,
                ..
            })
        );
        if needs_route {
            let node = nearest_node(self.env, self.agents[i].pos);
            let anchor = self.env.node_pos(node);
            let route = self
                .evac_routes
                .entry(node)
                .or_insert_with(|| route_to_nearest_safe_area(self.env, self.blocked, anchor));
            let waypoints = match route {
                RouteResult::Unreachable => {
                    p.new_state = Some(AgentState::Trapped);
                    p.events.push((events::TRAPPED, "no_route".into()));
                    return;
                }
                RouteResult::AlreadySafe(_) => vec![self.env.node_pos(node)],
                RouteResult::Route(r) => r.nodes.iter().map(|n| self.env.node_pos(*n)).collect(),
            };
            self.agents[i].walk = Some(Walk {
                waypoints,
                next: 0,
                purpose: WalkPurpose::Evacuate,
            });
        }
        if !matches!(self.agents[i].state, AgentState::Evacuating) {
            p.new_state = Some(AgentState::Evacuating);
            p.events.push((events::EVACUATING, String::new()));
        }
        let (new_pos, next) = {
            let a = &self.agents[i];
            let w = a.walk.as_ref().expect("walk just ensured");
            advance(a.pos, &w.waypoints, w.next, pace[i] * dt)
        };
        if let Some(w) = self.agents[i].walk.as_mut() {
            w.next = next;
        }
        p.new_pos = Some(new_pos);
    }

    fn plan_group(&mut self, i: usize, p: &mut Proposal) {
        // Gathering means standing fast at the school while pupils finish
        // their pre-evacuation and attach.
        if !matches!(self.agents[i].state, AgentState::Evacuating) {
            p.new_state = Some(AgentState::Evacuating);
            p.events.push((
                events::GROUPING,
                format!("pupils={}", self.agents[i].pupils.len()),
            ));
            p.events.push((events::EVACUATING, String::new()));
        }
        self.agents[i].walk = None;
    }

    fn plan_follow(&mut self, i: usize, leader: AgentId, snap: &[Snap], dt: f64, p: &mut Proposal) {
        let a = &self.agents[i];
        let was = match a.state {
            AgentState::Following { leader: l, .. } => Some(l),
            _ => None,
        };
        if was != Some(leader) {
            p.new_state = Some(AgentState::Following {
                leader,
                carried: false,
            });
            p.events
                .push((events::FOLLOWING, format!("leader={leader}")));
        }
        let target = snap[leader.index()].pos;
        let d = a.pos.dist(target);
        if d > 1e-12 {
            let f = (a.vmax * dt).min(d) / d;
            p.new_pos = Some(Point2D::new(
                a.pos.x + (target.x - a.pos.x) * f,
                a.pos.y + (target.y - a.pos.y) * f,
            ));
        }
        self.agents[i].walk = None;
    }

    #[allow(clippy::too_many_arguments)]
    fn plan_seek(
        &mut self,
        i: usize,
        target: AgentId,
        snap: &[Snap],
        pace: &[f64],
        now: f64,
        dt: f64,
        pd_of: &impl Fn(RelationKind) -> f64,
        p: &mut Proposal,
    ) {
        let relation = self.agents[i].beliefs.kin[&target].relation;
        if !matches!(self.agents[i].state, AgentState::Seeking { target: t } if t == target) {
            p.new_state = Some(AgentState::Seeking { target });
            p.events.push((events::SEEKING, format!("target={target}")));
            if self.agents[i].called.insert(target) {
                p.events.push((events::CALL, format!("target={target}")));
            }
            self.agents[i].walk = None;
        }
        let t_idx = target.index();
        let d = self.agents[i].pos.dist(snap[t_idx].pos);
        if d <= pd_of(relation) {
            // Children get escorted (or carried); sightings of adults were
            // already settled during perception.
            if snap[t_idx].vmax == 0.0 {
                if d <= self.carry_radius {
                    p.claim = Some((target, true));
                } else {
                    // Final approach straight to the infant.
                    let a = &self.agents[i];
                    let f = (a.vmax * dt).min(d) / d.max(1e-12);
                    p.new_pos = Some(Point2D::new(
                        a.pos.x + (snap[t_idx].pos.x - a.pos.x) * f,
                        a.pos.y + (snap[t_idx].pos.y - a.pos.y) * f,
                    ));
                }
            } else if snap[t_idx].attached_to != Some(AgentId(i as u32)) {
                p.claim = Some((target, false));
            }
            return;
        }

        let dest = self.agents[i].beliefs.kin[&target].believed_position(now, self.stale_after);
        let have_walk = matches!(
            self.agents[i].walk,
            Some(Walk { purpose: WalkPurpose::Seek { target: t, dest: wd }, .. })
                if t == target && wd == dest
        );
        if !have_walk {
            let from = nearest_node(self.env, self.agents[i].pos);
            let to = nearest_node(self.env, dest);
            let (pf, pt) = (self.env.node_pos(from), self.env.node_pos(to));
            let route = self
                .seek_routes
                .entry((from, to))
                .or_insert_with(|| route_between(self.env, self.blocked, pf, pt));
            let waypoints = match route {
                None => {
                    self.abandon_seek(i, target, p);
                    return;
                }
                Some(r) => {
                    let mut w: Vec<Point2D> =
                        r.nodes.iter().map(|n| self.env.node_pos(*n)).collect();
                    w.push(dest);
                    w
                }
            };
            self.agents[i].walk = Some(Walk {
                waypoints,
                next: 0,
                purpose: WalkPurpose::Seek { target, dest },
            });
        }
        let arrive_eps = (self.agents[i].vmax * dt).max(1.0);
        let exhausted = {
            let w = self.agents[i].walk.as_ref().expect("walk just ensured");
            w.next >= w.waypoints.len()
        };
        if exhausted || self.agents[i].pos.dist(dest) <= arrive_eps {
            // Reached where they believed the person was; nobody there.
            self.abandon_seek(i, target, p);
            return;
        }
        let (new_pos, next) = {
            let a = &self.agents[i];
            let w = a.walk.as_ref().expect("walk exists");
            advance(a.pos, &w.waypoints, w.next, pace[i] * dt)
        };
        if let Some(w) = self.agents[i].walk.as_mut() {
            w.next = next;
        }
        p.new_pos = Some(new_pos);
    }

    fn abandon_seek(&mut self, i: usize, target: AgentId, p: &mut Proposal) {
        if let Some(kb) = self.agents[i].beliefs.kin.get_mut(&target) {
            kb.abandoned = true;
        }
        self.agents[i].walk = None;
        p.events
            .push((events::SEEK_ABANDONED, format!("target={target}")));
    }

    /// Phase B: apply proposals in ascending id order, resolve adoption
    /// claims, sync carried infants, then run post-move arrival checks.
    fn commit(&mut self, proposals: Vec<Proposal>, snap: &[Snap], now: f64) {
        let n = self.agents.len();
        // A target's own Following proposal wins over claims; otherwise the
        // smallest claiming id adopts.
        let mut claimed_by: BTreeMap<AgentId, (AgentId, bool)> = BTreeMap::new();
        for (i, p) in proposals.iter().enumerate() {
            if let Some((target, carried)) = p.claim {
                let t = target.index();
                let self_attaches =
                    matches!(proposals[t].new_state, Some(AgentState::Following { .. }));
                if snap[t].trapped || snap[t].arrived || self_attaches {
                    continue;
                }
                claimed_by
                    .entry(target)
                    .or_insert((AgentId(i as u32), carried));
            }
        }

        for i in 0..n {
            let p = &proposals[i];
            let id = AgentId(i as u32);
            if let Some(pos) = p.new_pos {
                debug_assert!(
                    pos.dist(self.agents[i].pos) <= self.agents[i].vmax * self.spec.sim.dt + 1e-9,
                    "agent {i} overran its speed"
                );
                self.agents[i].pos = pos;
            }
            if p.spend_return_budget {
                self.agents[i].return_budget = self.agents[i].return_budget.saturating_sub(1);
            }
            if let Some((leader, carried)) = claimed_by.get(&id).copied() {
                self.transition(i, AgentState::Following { leader, carried }, now);
                self.trace.push(TraceRow {
                    t: now,
                    agent: id,
                    event: events::FOLLOWING.into(),
                    detail: if carried {
                        format!("leader={leader} carried")
                    } else {
                        format!("leader={leader}")
                    },
                });
                self.trace.push(TraceRow {
                    t: now,
                    agent: leader,
                    event: events::GROUPING.into(),
                    detail: format!("follower={id}"),
                });
                self.agents[i].walk = None;
                continue;
            }
            match p.new_state.clone() {
                Some(state) => {
                    let timer_update = matches!(
                        (&self.agents[i].state, &state),
                        (
                            AgentState::PreEvacuating { .. },
                            AgentState::PreEvacuating { .. }
                        )
                    );
                    if timer_update {
                        self.agents[i].state = state;
                    } else {
                        self.transition(i, state, now);
                        for (event, detail) in &p.events {
                            self.trace.push(TraceRow {
                                t: now,
                                agent: id,
                                event: (*event).into(),
                                detail: detail.clone(),
                            });
                        }
                    }
                }
                None => {
                    for (event, detail) in &p.events {
                        self.trace.push(TraceRow {
                            t: now,
                            agent: id,
                            event: (*event).into(),
                            detail: detail.clone(),
                        });
                    }
                }
            }
        }

        // Carried infants ride their carrier's committed position.
        for i in 0..n {
            if let Some(carrier) = self.agents[i].carried_by() {
                self.agents[i].pos = self.agents[carrier.index()].pos;
            }
        }

        // Movers that crossed into a safe area arrive now; seekers pass
        // through on purpose.
        for i in 0..n {
            let arrivable = matches!(
                self.agents[i].state,
                AgentState::Evacuating | AgentState::Following { .. }
            );
            if !arrivable {
                continue;
            }
            if let Some(area) = self.env.safe_area_at(self.agents[i].pos) {
                self.transition(i, AgentState::Arrived { area }, now);
                self.trace.push(TraceRow {
                    t: now,
                    agent: AgentId(i as u32),
                    event: events::ARRIVED.into(),
                    detail: format!("area={area}"),
                });
            }
        }
    }

    fn transition(&mut self, i: usize, to: AgentState, now: f64) {
        debug_assert!(
            AgentState::transition_allowed(&self.agents[i].state, &to),
            "agent {i}: illegal transition {} -> {} at t={now}",
            self.agents[i].state.name(),
            to.name()
        );
        if let AgentState::Arrived { .. } = to {
            self.agents[i].arrival_time.get_or_insert(now);
            self.agents[i].walk = None;
        }
        self.agents[i].state = to;
    }
}

/// Walk along waypoints with a movement budget; returns the new position
/// and the index of the next unreached waypoint.
fn advance(
    mut pos: Point2D,
    waypoints: &[Point2D],
    mut next: usize,
    mut budget: f64,
) -> (Point2D, usize) {
    while budget > 1e-12 && next < waypoints.len() {
        let wp = waypoints[next];
        let d = pos.dist(wp);
        if d <= budget {
            pos = wp;
            budget -= d;
            next += 1;
        } else {
            let f = budget / d;
            pos = Point2D::new(pos.x + (wp.x - pos.x) * f, pos.y + (wp.y - pos.y) * f);
            budget = 0.0;
        }
    }
    (pos, next)
}
