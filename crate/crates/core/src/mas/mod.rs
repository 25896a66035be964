//! The four-role agent system: epsilon-decomposition (ED), violation
//! detection (VD), linear-programming solver (LPS) and distributed
//! generation (DG) agents, with the typed messages they exchange.
//!
//! Delivery is organized in synchronous rounds by the scenario engine; all
//! agent inputs are frozen inboxes and all outputs append-only outboxes, so
//! stepping order inside a phase cannot change results. Agents hold no grid
//! access: every electrical fact reaches them through assignments or
//! messages.

mod agents;
mod codec;

pub use agents::{
    carry_over_outage_state, ed_initialize, ed_reorganize, instantiate_agents, DgState, EdState,
    LpsOutput, LpsState, LpsTelemetry, ReorgTrigger, ReorganizeOutcome, VdState,
};
pub use codec::{decode_message, encode_message, CodecError};

use std::fmt;

use crate::grid::DgMode;
use crate::regulation::InsufficientReason;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Role {
    Ed,
    Vd,
    Lps,
    Dg,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Role::Ed => "ED",
            Role::Vd => "VD",
            Role::Lps => "LPS",
            Role::Dg => "DG",
        };
        write!(f, "{s}")
    }
}

/// Agent address: role plus index. VD index is the bus id, DG index the DG
/// unit id, LPS index the subnetwork id; the single ED agent has index 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct AgentId {
    pub role: Role,
    pub index: usize,
}

impl AgentId {
    pub fn ed() -> AgentId {
        AgentId { role: Role::Ed, index: 0 }
    }
    pub fn vd(bus: usize) -> AgentId {
        AgentId { role: Role::Vd, index: bus }
    }
    pub fn lps(subnetwork: usize) -> AgentId {
        AgentId { role: Role::Lps, index: subnetwork }
    }
    pub fn dg(dg: usize) -> AgentId {
        AgentId { role: Role::Dg, index: dg }
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.role, self.index)
    }
}

/// FIPA-ACL performative subset used by the protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Performative {
    Inform,
    Request,
    Confirm,
    QueryIf,
    Failure,
}

/// Typed message payloads.
#[derive(Debug, Clone, PartialEq)]
pub enum MessageContent {
    /// A bus voltage outside limits; the bus is the sending VD's bus.
    Violation { bus: usize, voltage: f64 },
    /// Setpoint adjustment order (or its confirmation echo).
    Adjust { dg: usize, delta: f64, mode: DgMode },
    /// DG availability and, when online, its (upper, lower) surplus.
    DgStatus {
        dg: usize,
        available: bool,
        surplus: (f64, f64),
    },
    /// LPS asking the ED for a finer epsilon.
    EscalationRequest { reason: InsufficientReason },
    /// ED announcing a new epsilon before re-assignment.
    ReorganizeNotice { epsilon: f64 },
    /// LPS asking the ED to restore the initial epsilon.
    RestoreRequest,
    /// Subnetwork membership notice; `None` marks a bus uncontrollable at
    /// the current epsilon (its VD reports straight to the ED).
    Assignment {
        subnetwork: Option<usize>,
        members: Vec<AgentId>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub performative: Performative,
    pub sender: AgentId,
    pub destination: AgentId,
    /// Round counter at send time.
    pub time: usize,
    pub content: MessageContent,
}
