//! Agent-based pedestrian evacuation simulator for seismic crises.
//!
//! The model couples a planar street environment ([`geo`]), a synthetic
//! population with family and workplace ties ([`population`], [`social`]),
//! building damage and street-blocking debris ([`quake`]), and a belief/
//! desire/intention behavior layer ([`behavior`]) under a deterministic,
//! seed-reproducible tick engine ([`engine`]). Agents under threat first
//! secure the people they are attached to (children, partners, pupils) and
//! only then move to safety; how far away they can notice one another is a
//! function of the bond between them and of ambient conditions.

pub mod behavior;
pub mod engine;
pub mod geo;
pub mod population;
pub mod quake;
pub mod rng;
pub mod social;

use serde::{Deserialize, Serialize};

/// Identifier of one simulated person. Dense, assigned in synthesis order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AgentId(pub u32);

impl AgentId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl std::fmt::Display for AgentId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}
