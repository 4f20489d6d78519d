//! Decision layer: pre-evacuation choices with delays, beliefs about self
//! and kin, prioritized desires, intention selection, and the agent state
//! machine.
//!
//! The model is a small belief-desire-intention loop. Feeling the quake
//! makes an agent believe it is unsafe; household members it cannot
//! currently see are believed missing. Desires rank wanting kin safe above
//! wanting oneself safe, so a parent inclined to seek family walks toward a
//! missing child's believed position before heading for a safe area. The
//! highest-priority desire becomes the intention, realized by the first
//! applicable plan: evacuate, seek a person, group pupils (teachers), follow
//! a leader, or stay put.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geo::{Point2D, SafeAreaId};
use crate::rng::{chance, uniform};
use crate::social::RelationKind;
use crate::AgentId;

/// Things people do between feeling a quake and starting to move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreEvacKind {
    SeekFamily,
    Milling,
    Herding,
    ProtectProperty,
    SeekPets,
    HelpOthers,
}

impl PreEvacKind {
    pub const ALL: [PreEvacKind; 6] = [
        PreEvacKind::SeekFamily,
        PreEvacKind::Milling,
        PreEvacKind::Herding,
        PreEvacKind::ProtectProperty,
        PreEvacKind::SeekPets,
        PreEvacKind::HelpOthers,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreEvacSpec {
    pub kind: PreEvacKind,
    pub probability: f64,
    /// Uniform duration range [min, max] in seconds.
    pub duration: (f64, f64),
}

/// Seeking family is a movement plan, not a timed activity, so its duration
/// is zero; the others only delay departure.
pub fn default_pre_evacuation() -> Vec<PreEvacSpec> {
    vec![
        PreEvacSpec {
            kind: PreEvacKind::SeekFamily,
            probability: 0.4,
            duration: (0.0, 0.0),
        },
        PreEvacSpec {
            kind: PreEvacKind::Milling,
            probability: 0.5,
            duration: (10.0, 60.0),
        },
        PreEvacSpec {
            kind: PreEvacKind::Herding,
            probability: 0.3,
            duration: (5.0, 30.0),
        },
        PreEvacSpec {
            kind: PreEvacKind::ProtectProperty,
            probability: 0.2,
            duration: (20.0, 90.0),
        },
        PreEvacSpec {
            kind: PreEvacKind::SeekPets,
            probability: 0.1,
            duration: (15.0, 60.0),
        },
        PreEvacSpec {
            kind: PreEvacKind::HelpOthers,
            probability: 0.15,
            duration: (10.0, 60.0),
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BehaviorConfig {
    /// Local intensity at or above this makes an agent feel unsafe and act.
    pub felt_threshold: u8,
    /// Sightings older than this fall back to the target's initial position.
    pub stale_after: f64,
    /// An adult this close to an infant can pick it up and carry it.
    pub carry_radius: f64,
    /// Teachers gather their pupils before leaving.
    pub teacher_grouping: bool,
    /// How many times an arrived parent may go back for a missing child.
    pub return_budget: u32,
    pub pre_evacuation: Vec<PreEvacSpec>,
}

impl Default for BehaviorConfig {
    fn default() -> Self {
        BehaviorConfig {
            felt_threshold: 5,
            stale_after: 120.0,
            carry_radius: 2.0,
            teacher_grouping: true,
            return_budget: 1,
            pre_evacuation: default_pre_evacuation(),
        }
    }
}

impl BehaviorConfig {
    pub fn validate(&self) -> Result<(), String> {
        for spec in &self.pre_evacuation {
            if !(0.0..=1.0).contains(&spec.probability) {
                return Err(format!(
                    "{:?}: probability {} outside [0,1]",
                    spec.kind, spec.probability
                ));
            }
            let (lo, hi) = spec.duration;
            if !(lo >= 0.0 && hi >= lo) {
                return Err(format!("{:?}: duration range [{lo}, {hi}] invalid", spec.kind));
            }
        }
        if !(self.stale_after >= 0.0) {
            return Err("stale_after must be >= 0".into());
        }
        if !(self.carry_radius >= 0.0) {
            return Err("carry_radius must be >= 0".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreEvacChoice {
    /// Selected behaviors with their drawn durations, in table order.
    pub behaviors: Vec<(PreEvacKind, f64)>,
    /// Sum of the drawn durations.
    pub delay: f64,
    /// Whether family seeking was among the selections.
    pub seek_family: bool,
}

/// Independent inclusion per table row (one chance draw each, always
/// consumed); one duration draw per included row.
pub fn choose_pre_evacuation<R: Rng>(table: &[PreEvacSpec], rng: &mut R) -> PreEvacChoice {
    let mut behaviors = Vec::new();
    let mut delay = 0.0;
    let mut seek_family = false;
    for spec in table {
        if !chance(rng, spec.probability) {
            continue;
        }
        let d = uniform(rng, spec.duration.0, spec.duration.1);
        if spec.kind == PreEvacKind::SeekFamily {
            seek_family = true;
        }
        delay += d;
        behaviors.push((spec.kind, d));
    }
    PreEvacChoice {
        behaviors,
        delay,
        seek_family,
    }
}

/// What an agent believes about one household member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KinBelief {
    pub relation: RelationKind,
    /// Where the person started the scenario; the fallback search location.
    pub initial: Point2D,
    pub last_known: Point2D,
    pub last_seen_t: Option<f64>,
    pub known_safe: bool,
    /// A completed but fruitless search suppresses further seeking.
    pub abandoned: bool,
}

impl KinBelief {
    pub fn new(relation: RelationKind, initial: Point2D) -> Self {
        KinBelief {
            relation,
            initial,
            last_known: initial,
            last_seen_t: None,
            known_safe: false,
            abandoned: false,
        }
    }

    pub fn note_sighting(&mut self, pos: Point2D, t: f64, in_safe_area: bool) {
        self.last_known = pos;
        self.last_seen_t = Some(t);
        if in_safe_area {
            self.known_safe = true;
        }
    }

    /// Recent sightings are trusted; stale ones fall back to the initial
    /// position (people return to where they expect someone to be).
    pub fn believed_position(&self, now: f64, stale_after: f64) -> Point2D {
        match self.last_seen_t {
            Some(ts) if now - ts <= stale_after => self.last_known,
            _ => self.initial,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Beliefs {
    pub self_unsafe: bool,
    pub self_safe: bool,
    pub kin: BTreeMap<AgentId, KinBelief>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DesireKind {
    /// Get this person to safety.
    KinSafe(AgentId),
    /// Get myself to safety.
    BeSafe,
    /// Remain in the safe area.
    StaySafe,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Desire {
    pub kind: DesireKind,
    /// 1 is highest. Unique within one agent at one tick.
    pub priority: u32,
}

/// Snapshot of one kin relationship for desire generation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinStatus {
    pub id: AgentId,
    pub relation: RelationKind,
    pub missing: bool,
    pub abandoned: bool,
}

const PRIORITY_BE_SAFE: u32 = 100;
const PRIORITY_STAY_SAFE: u32 = 200;

/// Desires, sorted by ascending priority number.
///
/// Egoistic agents only ever want themselves safe. For altruistic agents a
/// missing household member produces a KinSafe desire that outranks BeSafe,
/// gated by the family-seeking inclination; once arrived, only a parent with
/// return budget left goes back out, and only for a missing child.
pub fn build_desires(
    egoistic: bool,
    seek_family: bool,
    arrived: bool,
    return_budget: u32,
    kin: &[KinStatus],
) -> Vec<Desire> {
    let mut desires = Vec::new();
    if !egoistic {
        let mut eligible: Vec<&KinStatus> = kin
            .iter()
            .filter(|k| k.missing && !k.abandoned)
            .filter(|k| {
                if arrived {
                    k.relation == RelationKind::Child && return_budget > 0
                } else {
                    seek_family
                }
            })
            .collect();
        eligible.sort_by_key(|k| (k.relation.priority_rank(), k.id));
        for (i, k) in eligible.iter().enumerate() {
            desires.push(Desire {
                kind: DesireKind::KinSafe(k.id),
                priority: 1 + i as u32,
            });
        }
    }
    desires.push(if arrived {
        Desire {
            kind: DesireKind::StaySafe,
            priority: PRIORITY_STAY_SAFE,
        }
    } else {
        Desire {
            kind: DesireKind::BeSafe,
            priority: PRIORITY_BE_SAFE,
        }
    });
    desires.sort_by_key(|d| d.priority);
    desires
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanKind {
    Evacuate,
    Seek(AgentId),
    /// Teacher gathering pupils before evacuating with them.
    Group,
    Follow(AgentId),
    Stay,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intention {
    pub desire: DesireKind,
    pub plan: PlanKind,
}

/// Context needed to turn the winning desire into a plan.
#[derive(Debug, Clone, Copy, Default)]
pub struct PlanContext {
    /// Teacher with gatherable pupils still unaccounted for.
    pub teacher_waiting: bool,
    /// A currently valid leader to follow (existing or newly perceivable).
    pub leader: Option<AgentId>,
}

/// Deterministic: the minimum priority number wins, and the plan is the
/// first applicable one for that desire.
pub fn select_intention(desires: &[Desire], ctx: PlanContext) -> Option<Intention> {
    let best = desires.iter().min_by_key(|d| d.priority)?;
    let plan = match best.kind {
        DesireKind::KinSafe(target) => PlanKind::Seek(target),
        DesireKind::StaySafe => PlanKind::Stay,
        DesireKind::BeSafe => {
            if let Some(leader) = ctx.leader {
                PlanKind::Follow(leader)
            } else if ctx.teacher_waiting {
                PlanKind::Group
            } else {
                PlanKind::Evacuate
            }
        }
    };
    Some(Intention {
        desire: best.kind,
        plan,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AgentState {
    Normal,
    PreEvacuating { remaining: f64 },
    Evacuating,
    Seeking { target: AgentId },
    Leading { followers: Vec<AgentId> },
    Following { leader: AgentId, carried: bool },
    Arrived { area: SafeAreaId },
    Trapped,
}

impl AgentState {
    pub fn name(&self) -> &'static str {
        match self {
            AgentState::Normal => "normal",
            AgentState::PreEvacuating { .. } => "pre_evacuating",
            AgentState::Evacuating => "evacuating",
            AgentState::Seeking { .. } => "seeking",
            AgentState::Leading { .. } => "leading",
            AgentState::Following { .. } => "following",
            AgentState::Arrived { .. } => "arrived",
            AgentState::Trapped => "trapped",
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, AgentState::Trapped)
    }

    /// Legal state-machine moves. Same-variant updates (countdown ticks,
    /// route changes) are not transitions and never pass through here;
    /// seek retargets and leader switches are, and are allowed.
    pub fn transition_allowed(from: &AgentState, to: &AgentState) -> bool {
        use AgentState::*;
        match (from, to) {
            (Normal, PreEvacuating { .. } | Following { .. } | Arrived { .. }) => true,
            (
                PreEvacuating { .. },
                Evacuating | Seeking { .. } | Following { .. } | Arrived { .. } | Trapped,
            ) => true,
            (
                Evacuating,
                Seeking { .. } | Leading { .. } | Following { .. } | Arrived { .. } | Trapped,
            ) => true,
            (Seeking { .. }, Evacuating | Seeking { .. } | Leading { .. } | Trapped) => true,
            (Leading { .. }, Evacuating | Seeking { .. } | Leading { .. } | Arrived { .. } | Trapped) => true,
            (Following { .. }, Following { .. } | Evacuating | Arrived { .. } | Trapped) => true,
            (Arrived { .. }, Seeking { .. }) => true,
            _ => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn zero_probabilities_mean_no_delay() {
        let table: Vec<PreEvacSpec> = default_pre_evacuation()
            .into_iter()
            .map(|mut s| {
                s.probability = 0.0;
                s
            })
            .collect();
        let mut rng = stream_rng(1, "behavior");
        for _ in 0..100 {
            let c = choose_pre_evacuation(&table, &mut rng);
            assert!(c.behaviors.is_empty());
            assert_eq!(c.delay, 0.0);
            assert!(!c.seek_family);
        }
    }

    #[test]
    fn single_certain_behavior_bounds_delay() {
        let table = vec![PreEvacSpec {
            kind: PreEvacKind::Milling,
            probability: 1.0,
            duration: (10.0, 20.0),
        }];
        let mut rng = stream_rng(2, "behavior");
        for _ in 0..1000 {
            let c = choose_pre_evacuation(&table, &mut rng);
            assert_eq!(c.behaviors.len(), 1);
            assert!((10.0..=20.0).contains(&c.delay), "delay {}", c.delay);
        }
    }

    #[test]
    fn inclusion_rates_match_probabilities() {
        let table = default_pre_evacuation();
        let mut rng = stream_rng(3, "behavior");
        let n = 100_000;
        let mut counts = BTreeMap::new();
        for _ in 0..n {
            let c = choose_pre_evacuation(&table, &mut rng);
            for (kind, d) in &c.behaviors {
                *counts.entry(*kind).or_insert(0u32) += 1;
                assert!(*d >= 0.0);
            }
        }
        for spec in &table {
            let rate = counts.get(&spec.kind).copied().unwrap_or(0) as f64 / n as f64;
            assert!(
                (rate - spec.probability).abs() < 0.01,
                "{:?}: rate {rate} vs p {}",
                spec.kind,
                spec.probability
            );
        }
    }

    #[test]
    fn delay_is_sum_of_durations() {
        let mut rng = stream_rng(4, "behavior");
        for _ in 0..1000 {
            let c = choose_pre_evacuation(&default_pre_evacuation(), &mut rng);
            let sum: f64 = c.behaviors.iter().map(|(_, d)| d).sum();
            assert_eq!(c.delay, sum);
            let has_seek = c
                .behaviors
                .iter()
                .any(|(k, _)| *k == PreEvacKind::SeekFamily);
            assert_eq!(c.seek_family, has_seek);
        }
    }

    fn kin(id: u32, relation: RelationKind, missing: bool) -> KinStatus {
        KinStatus {
            id: AgentId(id),
            relation,
            missing,
            abandoned: false,
        }
    }

    #[test]
    fn unsafe_agent_with_only_besafe_evacuates() {
        let desires = build_desires(false, false, false, 1, &[]);
        assert_eq!(desires.len(), 1);
        assert_eq!(desires[0].kind, DesireKind::BeSafe);
        let it = select_intention(&desires, PlanContext::default()).unwrap();
        assert_eq!(it.plan, PlanKind::Evacuate);
    }

    #[test]
    fn arrived_parent_with_missing_child_goes_back() {
        let ks = [kin(7, RelationKind::Child, true)];
        let desires = build_desires(false, false, true, 1, &ks);
        assert_eq!(desires[0].kind, DesireKind::KinSafe(AgentId(7)));
        let it = select_intention(&desires, PlanContext::default()).unwrap();
        assert_eq!(it.plan, PlanKind::Seek(AgentId(7)));

        // Without budget the parent stays put.
        let desires = build_desires(false, false, true, 0, &ks);
        let it = select_intention(&desires, PlanContext::default()).unwrap();
        assert_eq!(it.plan, PlanKind::Stay);
    }

    #[test]
    fn empty_desires_mean_no_intention() {
        assert!(select_intention(&[], PlanContext::default()).is_none());
    }

    #[test]
    fn children_outrank_partners_and_ties_break_by_id() {
        let ks = [
            kin(9, RelationKind::Partner, true),
            kin(5, RelationKind::Child, true),
            kin(3, RelationKind::Child, true),
        ];
        let desires = build_desires(false, true, false, 1, &ks);
        let order: Vec<DesireKind> = desires.iter().map(|d| d.kind).collect();
        assert_eq!(
            order,
            vec![
                DesireKind::KinSafe(AgentId(3)),
                DesireKind::KinSafe(AgentId(5)),
                DesireKind::KinSafe(AgentId(9)),
                DesireKind::BeSafe,
            ]
        );
        let prios: Vec<u32> = desires.iter().map(|d| d.priority).collect();
        let mut unique = prios.clone();
        unique.dedup();
        assert_eq!(prios, unique);
    }

    #[test]
    fn inclination_gates_seeking_before_arrival() {
        let ks = [kin(2, RelationKind::Partner, true)];
        let with = build_desires(false, true, false, 1, &ks);
        assert!(matches!(with[0].kind, DesireKind::KinSafe(_)));
        let without = build_desires(false, false, false, 1, &ks);
        assert_eq!(without[0].kind, DesireKind::BeSafe);
        // Abandoned searches stay abandoned.
        let mut k = ks[0];
        k.abandoned = true;
        let back = build_desires(false, true, false, 1, &[k]);
        assert_eq!(back[0].kind, DesireKind::BeSafe);
    }

    #[test]
    fn egoistic_agents_never_seek_or_follow() {
        let ks = [kin(2, RelationKind::Child, true)];
        let desires = build_desires(true, true, false, 1, &ks);
        assert_eq!(desires.len(), 1);
        assert_eq!(desires[0].kind, DesireKind::BeSafe);
        let ctx = PlanContext {
            teacher_waiting: false,
            leader: None,
        };
        assert_eq!(
            select_intention(&desires, ctx).unwrap().plan,
            PlanKind::Evacuate
        );
    }

    #[test]
    fn besafe_prefers_follow_then_group_then_evacuate() {
        let desires = build_desires(false, false, false, 1, &[]);
        let follow = select_intention(
            &desires,
            PlanContext {
                teacher_waiting: true,
                leader: Some(AgentId(4)),
            },
        )
        .unwrap();
        assert_eq!(follow.plan, PlanKind::Follow(AgentId(4)));
        let group = select_intention(
            &desires,
            PlanContext {
                teacher_waiting: true,
                leader: None,
            },
        )
        .unwrap();
        assert_eq!(group.plan, PlanKind::Group);
    }

    #[test]
    fn identical_inputs_give_identical_intentions() {
        let ks = [
            kin(4, RelationKind::Partner, true),
            kin(6, RelationKind::Child, true),
        ];
        let a = select_intention(
            &build_desires(false, true, false, 1, &ks),
            PlanContext::default(),
        );
        let b = select_intention(
            &build_desires(false, true, false, 1, &ks),
            PlanContext::default(),
        );
        assert_eq!(a, b);
    }

    #[test]
    fn stale_sightings_fall_back_to_initial_position() {
        let mut kb = KinBelief::new(RelationKind::Child, Point2D::new(10.0, 10.0));
        assert_eq!(kb.believed_position(50.0, 120.0), Point2D::new(10.0, 10.0));
        kb.note_sighting(Point2D::new(40.0, 0.0), 100.0, false);
        assert_eq!(
            kb.believed_position(150.0, 120.0),
            Point2D::new(40.0, 0.0)
        );
        assert_eq!(
            kb.believed_position(221.0, 120.0),
            Point2D::new(10.0, 10.0)
        );
        assert!(!kb.known_safe);
        kb.note_sighting(Point2D::new(41.0, 0.0), 160.0, true);
        assert!(kb.known_safe);
    }

    #[test]
    fn transition_table_rejects_illegal_moves() {
        use AgentState::*;
        let arrived = Arrived {
            area: SafeAreaId(0),
        };
        let seeking = Seeking {
            target: AgentId(1),
        };
        let preevac = PreEvacuating { remaining: 5.0 };
        let following = Following {
            leader: AgentId(2),
            carried: false,
        };
        assert!(AgentState::transition_allowed(&Normal, &preevac));
        assert!(AgentState::transition_allowed(&preevac, &Evacuating));
        assert!(AgentState::transition_allowed(&preevac, &seeking));
        assert!(AgentState::transition_allowed(&Evacuating, &arrived));
        assert!(AgentState::transition_allowed(&Evacuating, &Trapped));
        assert!(AgentState::transition_allowed(&arrived, &seeking));
        assert!(AgentState::transition_allowed(&seeking, &Evacuating));
        assert!(AgentState::transition_allowed(&following, &arrived));
        assert!(AgentState::transition_allowed(&preevac, &Trapped));
        assert!(AgentState::transition_allowed(&following, &Trapped));

        assert!(!AgentState::transition_allowed(&arrived, &Evacuating));
        assert!(!AgentState::transition_allowed(&Trapped, &Evacuating));
        assert!(!AgentState::transition_allowed(&Normal, &Evacuating));
        assert!(!AgentState::transition_allowed(&arrived, &Trapped));
        assert!(!AgentState::transition_allowed(&following, &seeking));
    }

    #[test]
    fn config_validation_catches_bad_tables() {
        let mut cfg = BehaviorConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.pre_evacuation[0].probability = 1.5;
        assert!(cfg.validate().is_err());
        let mut cfg = BehaviorConfig::default();
        cfg.pre_evacuation[1].duration = (30.0, 10.0);
        assert!(cfg.validate().is_err());
    }
}
