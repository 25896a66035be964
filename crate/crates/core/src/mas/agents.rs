//! ED / VD / LPS / DG agent state machines.
//!
//! Protocol outline: the ED decomposes the sensitivity matrix and assigns
//! agents to subnetworks; VD agents watch their bus and report violations to
//! their subnetwork's LPS; the LPS plans adjustments for the closest DGs or
//! escalates to the ED for a finer epsilon; DG agents apply setpoint orders
//! and report availability changes. When a tripped DG returns, its LPS
//! resets the adjustments made during the outage and asks the ED to restore
//! the initial epsilon.

use std::collections::BTreeMap;

use crate::decomposition::{
    decompose_for_grid, Decomposition, DecompositionError, EpsilonLadder, LadderStep,
};
use crate::grid::{DgMode, DgUnit, GridModel};
use crate::powerflow::SensitivityMatrix;
use crate::regulation::{
    InsufficientReason, PlanOutcome, PlannerView, RegulationPlan, Violation, VoltageLimits,
};

use super::{AgentId, Message, MessageContent, Performative};

/// Epsilon-decomposition agent: owns the ladder and the current partition.
#[derive(Debug, Clone)]
pub struct EdState {
    pub mode: DgMode,
    pub limits: VoltageLimits,
    pub ladder: EpsilonLadder,
    pub decomposition: Decomposition,
}

/// What pushed the ED to reorganize.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReorgTrigger {
    /// One or more subnetworks escalated; move one rung finer.
    Escalate,
    /// Network back to normal; reset to the initial epsilon.
    Restore,
}

#[derive(Debug)]
pub enum ReorganizeOutcome {
    Reorganized { state: EdState, messages: Vec<Message> },
    /// No finer epsilon left; the violation is beyond the ladder.
    Exhausted,
}

/// Decomposes at the ladder head and emits one assignment per LPS and VD
/// agent. The caller instantiates agent states from the result.
pub fn ed_initialize(
    grid: &GridModel,
    sens: &SensitivityMatrix,
    mode: DgMode,
    ladder: EpsilonLadder,
    limits: VoltageLimits,
    round: usize,
) -> Result<(EdState, Vec<Message>), DecompositionError> {
    let decomposition = decompose_for_grid(grid, sens, mode, ladder.current())?;
    let messages = assignment_messages(&decomposition, round);
    Ok((
        EdState {
            mode,
            limits,
            ladder,
            decomposition,
        },
        messages,
    ))
}

/// Steps the ladder (finer on escalation, initial on restore), re-decomposes
/// and re-emits assignments. Agents keep running; only their subnetwork
/// knowledge is replaced.
pub fn ed_reorganize(
    state: &EdState,
    trigger: ReorgTrigger,
    grid: &GridModel,
    sens: &SensitivityMatrix,
    round: usize,
) -> Result<ReorganizeOutcome, DecompositionError> {
    let mut ladder = state.ladder.clone();
    let step = match trigger {
        ReorgTrigger::Escalate => LadderStep::Finer,
        ReorgTrigger::Restore => LadderStep::RestoreInitial,
    };
    let epsilon = match ladder.step(step) {
        Ok(e) => e,
        Err(DecompositionError::LadderExhausted) => return Ok(ReorganizeOutcome::Exhausted),
        Err(e) => return Err(e),
    };
    let decomposition = decompose_for_grid(grid, sens, state.mode, epsilon)?;
    let mut messages: Vec<Message> = decomposition
        .subnetworks
        .iter()
        .map(|sub| Message {
            performative: Performative::Inform,
            sender: AgentId::ed(),
            destination: AgentId::lps(sub.id),
            time: round,
            content: MessageContent::ReorganizeNotice { epsilon },
        })
        .collect();
    messages.extend(assignment_messages(&decomposition, round));
    Ok(ReorganizeOutcome::Reorganized {
        state: EdState {
            mode: state.mode,
            limits: state.limits,
            ladder,
            decomposition,
        },
        messages,
    })
}

fn assignment_messages(dec: &Decomposition, round: usize) -> Vec<Message> {
    let mut messages = Vec::new();
    for sub in &dec.subnetworks {
        let mut members = vec![AgentId::lps(sub.id)];
        members.extend(sub.bus_ids.iter().map(|&b| AgentId::vd(b)));
        members.extend(sub.dg_ids.iter().map(|&d| AgentId::dg(d)));
        let content = MessageContent::Assignment {
            subnetwork: Some(sub.id),
            members,
        };
        messages.push(Message {
            performative: Performative::Inform,
            sender: AgentId::ed(),
            destination: AgentId::lps(sub.id),
            time: round,
            content: content.clone(),
        });
        for &bus in &sub.bus_ids {
            messages.push(Message {
                performative: Performative::Inform,
                sender: AgentId::ed(),
                destination: AgentId::vd(bus),
                time: round,
                content: content.clone(),
            });
        }
    }
    // Buses no DG can reach at this epsilon: their VDs report to the ED.
    for &bus in &dec.uncontrollable_buses {
        messages.push(Message {
            performative: Performative::Inform,
            sender: AgentId::ed(),
            destination: AgentId::vd(bus),
            time: round,
            content: MessageContent::Assignment {
                subnetwork: None,
                members: Vec::new(),
            },
        });
    }
    messages
}

/// Violation-detection agent for one monitored bus.
#[derive(Debug, Clone)]
pub struct VdState {
    pub bus: usize,
    pub limits: VoltageLimits,
    /// None when the bus is uncontrollable at the current epsilon.
    pub subnetwork: Option<usize>,
}

impl VdState {
    /// Checks the measured voltage; outside the closed band it reports to
    /// its LPS, or straight to the ED when no subnetwork covers the bus.
    pub fn monitor(&self, v_now: f64, round: usize) -> Option<Message> {
        self.limits.check(v_now)?;
        Some(match self.subnetwork {
            Some(sub) => Message {
                performative: Performative::Inform,
                sender: AgentId::vd(self.bus),
                destination: AgentId::lps(sub),
                time: round,
                content: MessageContent::Violation {
                    bus: self.bus,
                    voltage: v_now,
                },
            },
            None => Message {
                performative: Performative::Request,
                sender: AgentId::vd(self.bus),
                destination: AgentId::ed(),
                time: round,
                content: MessageContent::EscalationRequest {
                    reason: InsufficientReason::UncontrollableBus,
                },
            },
        })
    }
}

/// Per-round electrical telemetry an LPS receives for its own buses and
/// transformer terminals.
#[derive(Debug, Clone, Default)]
pub struct LpsTelemetry {
    pub v: BTreeMap<usize, f64>,
    pub theta: BTreeMap<usize, f64>,
}

/// Linear-programming solver agent: the control agent of one subnetwork.
#[derive(Debug, Clone)]
pub struct LpsState {
    pub subnetwork: usize,
    pub view: PlannerView,
    /// Net adjustments commanded while a subnetwork DG is out, keyed by DG;
    /// undone when the outage ends.
    pub outage_adjustments: BTreeMap<usize, f64>,
}

/// Result of one LPS planning step.
#[derive(Debug, Clone, Default)]
pub struct LpsOutput {
    pub messages: Vec<Message>,
    pub plan: Option<RegulationPlan>,
    pub escalated: Option<InsufficientReason>,
}

impl LpsState {
    pub fn new(subnetwork: usize, view: PlannerView) -> LpsState {
        LpsState {
            subnetwork,
            view,
            outage_adjustments: BTreeMap::new(),
        }
    }

    fn id(&self) -> AgentId {
        AgentId::lps(self.subnetwork)
    }

    /// Processes a DG status notice. A formerly tripped unit coming back
    /// triggers the restore sequence: undo the outage adjustments, then ask
    /// the ED for the initial epsilon.
    pub fn receive_status(
        &mut self,
        dg: usize,
        available: bool,
        surplus: (f64, f64),
        round: usize,
    ) -> Vec<Message> {
        let was_available = self
            .view
            .dg_facts
            .get(&dg)
            .map(|f| f.available)
            .unwrap_or(true);
        self.view.set_dg_status(dg, available, surplus);
        if !available || was_available {
            return Vec::new();
        }
        // Back online: reset the DGs used during the outage first, then
        // request restoration.
        let mut messages: Vec<Message> = self
            .outage_adjustments
            .iter()
            .filter(|(_, &delta)| delta != 0.0)
            .map(|(&dg_id, &delta)| Message {
                performative: Performative::Request,
                sender: self.id(),
                destination: AgentId::dg(dg_id),
                time: round,
                content: MessageContent::Adjust {
                    dg: dg_id,
                    delta: -delta,
                    mode: self.view.mode,
                },
            })
            .collect();
        self.outage_adjustments.clear();
        messages.push(Message {
            performative: Performative::Request,
            sender: self.id(),
            destination: AgentId::ed(),
            time: round,
            content: MessageContent::RestoreRequest,
        });
        messages
    }

    /// Plans for the round's violations: adjustment orders to the closest
    /// available DGs, or an escalation request when the subnetwork cannot
    /// resolve them.
    pub fn handle(
        &mut self,
        telemetry: &LpsTelemetry,
        violations: &[Violation],
        round: usize,
    ) -> LpsOutput {
        if violations.is_empty() {
            return LpsOutput::default();
        }
        let involved = self.view.closest_available(violations);
        let outcome = if involved.is_empty() {
            PlanOutcome::Insufficient(InsufficientReason::DgUnavailable)
        } else {
            self.view
                .plan(&telemetry.v, &telemetry.theta, violations, &involved)
        };
        match outcome {
            PlanOutcome::Plan(plan) => {
                let during_outage = self.view.dg_facts.values().any(|f| !f.available);
                let messages = plan
                    .adjustments
                    .iter()
                    .map(|(&dg, &delta)| {
                        if during_outage {
                            *self.outage_adjustments.entry(dg).or_insert(0.0) += delta;
                        }
                        Message {
                            performative: Performative::Request,
                            sender: self.id(),
                            destination: AgentId::dg(dg),
                            time: round,
                            content: MessageContent::Adjust {
                                dg,
                                delta,
                                mode: plan.mode,
                            },
                        }
                    })
                    .collect();
                LpsOutput {
                    messages,
                    plan: Some(plan),
                    escalated: None,
                }
            }
            PlanOutcome::Insufficient(reason) => LpsOutput {
                messages: vec![Message {
                    performative: Performative::Request,
                    sender: self.id(),
                    destination: AgentId::ed(),
                    time: round,
                    content: MessageContent::EscalationRequest { reason },
                }],
                plan: None,
                escalated: Some(reason),
            },
        }
    }
}

/// Distributed-generation agent mirroring its unit's operating point.
#[derive(Debug, Clone)]
pub struct DgState {
    pub unit: DgUnit,
    pub mode: DgMode,
    pub lps: AgentId,
}

impl DgState {
    /// Applies adjustment orders from the inbox; confirms each applied order
    /// and reports a failure for any order outside the unit's surplus (which
    /// would indicate a planning bug).
    pub fn step(&mut self, inbox: &[Message], round: usize) -> Vec<Message> {
        let mut out = Vec::new();
        for msg in inbox {
            let MessageContent::Adjust { dg, delta, mode } = msg.content else {
                continue;
            };
            if dg != self.unit.id {
                continue;
            }
            let ok = match mode {
                DgMode::Pfc => {
                    let target = self.unit.q0 + delta;
                    let ok = target <= self.unit.q_cap + 1e-9
                        && target >= -self.unit.q_abs_cap - 1e-9;
                    if ok {
                        self.unit.q0 = target.clamp(-self.unit.q_abs_cap, self.unit.q_cap);
                    }
                    ok
                }
                DgMode::Upf => {
                    let target = self.unit.p0 + delta;
                    let ok = target <= self.unit.p_cap + 1e-9 && target >= -1e-9;
                    if ok {
                        self.unit.p0 = target.clamp(0.0, self.unit.p_cap);
                    }
                    ok
                }
            };
            out.push(Message {
                performative: if ok {
                    Performative::Confirm
                } else {
                    Performative::Failure
                },
                sender: AgentId::dg(self.unit.id),
                destination: msg.sender,
                time: round,
                content: msg.content.clone(),
            });
        }
        out
    }

    /// Availability change from a scenario event; announces the new status
    /// (with surplus when online) to the subnetwork's LPS.
    pub fn set_availability(&mut self, available: bool, round: usize) -> Message {
        self.unit.available = available;
        let surplus = if available {
            self.unit.surplus(self.mode).expect("available unit")
        } else {
            (0.0, 0.0)
        };
        Message {
            performative: Performative::Inform,
            sender: AgentId::dg(self.unit.id),
            destination: self.lps,
            time: round,
            content: MessageContent::DgStatus {
                dg: self.unit.id,
                available,
                surplus,
            },
        }
    }
}

/// Builds the VD, LPS and DG agent states matching a decomposition. Called
/// at initialization and after every reorganization; LPS outage bookkeeping
/// is carried over separately.
pub fn instantiate_agents(
    grid: &GridModel,
    ed: &EdState,
    sens: &SensitivityMatrix,
) -> (Vec<VdState>, Vec<LpsState>, Vec<DgState>) {
    let dec = &ed.decomposition;
    let vds = dec
        .row_buses
        .iter()
        .map(|&bus| VdState {
            bus,
            limits: ed.limits,
            subnetwork: dec.subnetwork_of_bus(bus).map(|s| s.id),
        })
        .collect();
    let lpss = dec
        .subnetworks
        .iter()
        .map(|sub| {
            LpsState::new(
                sub.id,
                PlannerView::for_subnetwork(grid, dec, sens, sub, ed.limits, ed.mode),
            )
        })
        .collect();
    let dgs = grid
        .dgs
        .iter()
        .map(|unit| DgState {
            unit: unit.clone(),
            mode: ed.mode,
            lps: dec
                .subnetwork_of_dg(unit.id)
                .map(|s| AgentId::lps(s.id))
                .unwrap_or_else(AgentId::ed),
        })
        .collect();
    (vds, lpss, dgs)
}

/// Carries LPS outage bookkeeping across a reorganization: a new LPS
/// inherits the recorded adjustments of every old LPS it shares a DG with.
pub fn carry_over_outage_state(new_lpss: &mut [LpsState], old_lpss: &[LpsState]) {
    for new in new_lpss.iter_mut() {
        for old in old_lpss {
            if old
                .view
                .col_dgs
                .iter()
                .any(|dg| new.view.col_dgs.contains(dg))
            {
                for (&dg, &delta) in &old.outage_adjustments {
                    *new.outage_adjustments.entry(dg).or_insert(0.0) += delta;
                }
            }
        }
    }
}
