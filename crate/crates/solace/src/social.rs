//! Social attachment: bond strengths, perception distances, and the relation
//! priority order that decides whom an agent attends to first.
//!
//! The perception distance an agent has for another person scales a baseline
//! visibility range by the strength of the bond between them:
//!
//! ```text
//! pd(other) = pd_normal^k * (1 + bond / 10)
//! ```
//!
//! where `k` in (0, 1] captures ambient conditions (daylight 1.0, night 0.2,
//! fog 0.8). Weak light collapses the baseline sharply, so at night even a
//! partner is only noticed a few meters away. Egoistic agents have every bond
//! at zero and perceive nobody but themselves.

use serde::{Deserialize, Serialize};

use crate::geo::Point2D;
use crate::AgentId;

/// What the other person is to me. `Myself` anchors the scale at bond zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationKind {
    Myself,
    Child,
    Partner,
    Parent,
    Sibling,
    Kin,
    Friend,
    Acquaintance,
    Colleague,
    Stranger,
}

impl RelationKind {
    /// Reciprocal kind as seen from the other side of the link.
    pub fn reciprocal(self) -> RelationKind {
        match self {
            RelationKind::Child => RelationKind::Parent,
            RelationKind::Parent => RelationKind::Child,
            other => other,
        }
    }

    /// Fixed attention rank: children first, then partners, then parents,
    /// then everyone else by descending default bond. Lower is sought first.
    pub fn priority_rank(self) -> u8 {
        match self {
            RelationKind::Child => 0,
            RelationKind::Partner => 1,
            RelationKind::Parent => 2,
            RelationKind::Friend => 3,
            RelationKind::Sibling => 4,
            RelationKind::Kin => 5,
            RelationKind::Acquaintance => 6,
            RelationKind::Colleague => 7,
            RelationKind::Stranger => 8,
            RelationKind::Myself => 9,
        }
    }
}

/// Whether agents care about anyone besides themselves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AttachmentProfile {
    #[default]
    Altruistic,
    /// All bonds zero; perception of others is empty.
    Egoistic,
}

/// Bond strength per relation kind, on a 0..10 scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BondTable {
    pub child: f64,
    pub partner: f64,
    pub parent: f64,
    pub sibling: f64,
    pub kin: f64,
    pub friend: f64,
    pub acquaintance: f64,
    pub colleague: f64,
    pub stranger: f64,
}

impl Default for BondTable {
    /// Survey-derived defaults for the relations with measured values;
    /// children are placed above partners (strongest attachment), and
    /// colleagues default to the acquaintance level.
    fn default() -> Self {
        BondTable {
            child: 9.5,
            partner: 8.82,
            parent: 7.77,
            sibling: 7.51,
            kin: 5.29,
            friend: 7.57,
            acquaintance: 3.84,
            colleague: 3.84,
            stranger: 2.17,
        }
    }
}

impl BondTable {
    pub fn get(&self, kind: RelationKind) -> f64 {
        match kind {
            RelationKind::Myself => 0.0,
            RelationKind::Child => self.child,
            RelationKind::Partner => self.partner,
            RelationKind::Parent => self.parent,
            RelationKind::Sibling => self.sibling,
            RelationKind::Kin => self.kin,
            RelationKind::Friend => self.friend,
            RelationKind::Acquaintance => self.acquaintance,
            RelationKind::Colleague => self.colleague,
            RelationKind::Stranger => self.stranger,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for kind in ALL_KINDS {
            let v = self.get(kind);
            if !(v.is_finite() && v >= 0.0) {
                return Err(format!("bond for {kind:?} must be finite and >= 0, got {v}"));
            }
        }
        Ok(())
    }
}

const ALL_KINDS: [RelationKind; 10] = [
    RelationKind::Myself,
    RelationKind::Child,
    RelationKind::Partner,
    RelationKind::Parent,
    RelationKind::Sibling,
    RelationKind::Kin,
    RelationKind::Friend,
    RelationKind::Acquaintance,
    RelationKind::Colleague,
    RelationKind::Stranger,
];

/// Ambient perception conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentBias {
    /// Exponent on the baseline perception distance, in (0, 1].
    pub k: f64,
}

impl EnvironmentBias {
    pub const DAY: EnvironmentBias = EnvironmentBias { k: 1.0 };
    pub const NIGHT: EnvironmentBias = EnvironmentBias { k: 0.2 };
    pub const FOG: EnvironmentBias = EnvironmentBias { k: 0.8 };
}

/// Bond strength under a profile: egoistic agents bond with nobody.
pub fn bond_strength(table: &BondTable, kind: RelationKind, profile: AttachmentProfile) -> f64 {
    match profile {
        AttachmentProfile::Egoistic => 0.0,
        AttachmentProfile::Altruistic => table.get(kind),
    }
}

/// Distance at which an agent notices someone it has `bond` with.
/// `pd_normal` is the unencumbered baseline (meters), `k` the ambient
/// exponent in (0, 1]. Monotone in both `k` and `bond`.
pub fn perception_distance(pd_normal: f64, k: f64, bond: f64) -> f64 {
    debug_assert!(pd_normal > 0.0, "baseline perception must be positive");
    debug_assert!(k > 0.0 && k <= 1.0, "ambient exponent must be in (0,1]");
    debug_assert!(bond >= 0.0, "bond must be non-negative");
    pd_normal.powf(k) * (1.0 + bond / 10.0)
}

/// Undirected social ties with per-direction kinds. If A lists B, B lists A
/// with the reciprocal kind; at most one link per pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SocialNetwork {
    pub profile: AttachmentProfile,
    /// Indexed by agent id; each list ascending by neighbor id.
    links: Vec<Vec<(AgentId, RelationKind)>>,
}

impl SocialNetwork {
    pub fn new(agent_count: usize, profile: AttachmentProfile) -> Self {
        SocialNetwork {
            profile,
            links: vec![Vec::new(); agent_count],
        }
    }

    pub fn agent_count(&self) -> usize {
        self.links.len()
    }

    /// Insert a link; `kind` is what `b` is to `a`. Existing links win (the
    /// closer tie registered first is kept).
    pub fn add_link(&mut self, a: AgentId, b: AgentId, kind: RelationKind) {
        assert_ne!(a, b, "no self links");
        if self.lookup(a, b).is_some() {
            return;
        }
        let fwd = &mut self.links[a.index()];
        let pos = fwd.partition_point(|(id, _)| *id < b);
        fwd.insert(pos, (b, kind));
        let rev = &mut self.links[b.index()];
        let pos = rev.partition_point(|(id, _)| *id < a);
        rev.insert(pos, (a, kind.reciprocal()));
    }

    fn lookup(&self, a: AgentId, b: AgentId) -> Option<RelationKind> {
        self.links[a.index()]
            .binary_search_by_key(&b, |(id, _)| *id)
            .ok()
            .map(|i| self.links[a.index()][i].1)
    }

    /// What `b` is to `a`; strangers when unlinked.
    pub fn relation(&self, a: AgentId, b: AgentId) -> RelationKind {
        if a == b {
            return RelationKind::Myself;
        }
        self.lookup(a, b).unwrap_or(RelationKind::Stranger)
    }

    /// All linked neighbors of `a`, ascending by id.
    pub fn neighbors(&self, a: AgentId) -> &[(AgentId, RelationKind)] {
        &self.links[a.index()]
    }

    /// Symmetry and reciprocity audit.
    pub fn validate(&self) -> Result<(), String> {
        for (i, list) in self.links.iter().enumerate() {
            let a = AgentId(i as u32);
            for &(b, kind) in list {
                match self.lookup(b, a) {
                    Some(back) if back == kind.reciprocal() => {}
                    Some(back) => {
                        return Err(format!(
                            "asymmetric kinds: {a} sees {b} as {kind:?}, {b} sees {a} as {back:?}"
                        ))
                    }
                    None => return Err(format!("one-sided link {a} -> {b}")),
                }
            }
        }
        Ok(())
    }
}

/// Sort key ordering agents by relation priority, then ascending id.
pub fn relation_priority_order(mut items: Vec<(AgentId, RelationKind)>) -> Vec<(AgentId, RelationKind)> {
    items.sort_by_key(|(id, kind)| (kind.priority_rank(), *id));
    items
}

/// One noticed person.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Percept {
    pub id: AgentId,
    pub kind: RelationKind,
    pub distance: f64,
}

/// Which of the candidates the agent notices, ordered by relation priority,
/// then distance, then id. Egoistic agents notice nobody.
pub fn perceive(
    observer: AgentId,
    observer_pos: Point2D,
    candidates: &[(AgentId, Point2D)],
    network: &SocialNetwork,
    bias: EnvironmentBias,
    pd_normal: f64,
    bonds: &BondTable,
) -> Vec<Percept> {
    if network.profile == AttachmentProfile::Egoistic {
        return Vec::new();
    }
    let mut out: Vec<Percept> = Vec::new();
    for &(id, pos) in candidates {
        if id == observer {
            continue;
        }
        let kind = network.relation(observer, id);
        let bond = bond_strength(bonds, kind, network.profile);
        let reach = perception_distance(pd_normal, bias.k, bond);
        let distance = observer_pos.dist(pos);
        if distance <= reach {
            out.push(Percept { id, kind, distance });
        }
    }
    out.sort_by(|a, b| {
        (a.kind.priority_rank(), a.distance, a.id)
            .partial_cmp(&(b.kind.priority_rank(), b.distance, b.id))
            .unwrap()
    });
    out
}
