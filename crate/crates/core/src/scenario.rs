//! End-to-end simulation driver: event timeline, the round loop
//! (events -> power flow -> agents -> apply -> re-solve -> log), the two
//! comparison baselines and the report/CSV machinery.
//!
//! Rounds are synchronous. Within a round the phases run in a fixed order
//! (events, pre-solve, DG status delivery, VD monitoring, LPS planning, ED
//! reorganization, DG application, post-solve); inside each phase agents are
//! stepped in ascending id order, so a scenario replays bit-identically.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;
use serde::Serialize;
use thiserror::Error;

use crate::decomposition::{decompose_for_grid, DecompositionError, EpsilonLadder};
use crate::grid::{DgMode, GridModel};
use crate::mas::{
    carry_over_outage_state, ed_initialize, ed_reorganize, encode_message, instantiate_agents,
    AgentId, DgState, EdState, LpsState, LpsTelemetry, Message, MessageContent, Performative,
    ReorgTrigger, ReorganizeOutcome,
};
use crate::powerflow::{
    compute_losses, compute_sensitivity, solve_power_flow, Init, PowerFlowError,
    PowerFlowSolution, DEFAULT_MAX_ITER,
};
use crate::regulation::{Violation, ViolationKind, VoltageLimits};

/// Epsilon used by the no-partitioning baseline: keeps every nonzero
/// coupling, so the retained matrix equals the full sensitivity block.
const GLOBAL_EPSILON: f64 = f64::MIN_POSITIVE;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    DgTrip { dg: usize },
    DgRestore { dg: usize },
    LoadScale { bus: usize, factor: f64 },
    ForceEpsilon { epsilon: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEvent {
    pub round: usize,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Proposed,
    Global,
    Local,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Method::Proposed => "proposed",
            Method::Global => "global",
            Method::Local => "local",
        };
        write!(f, "{s}")
    }
}

impl std::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "proposed" => Ok(Method::Proposed),
            "global" => Ok(Method::Global),
            "local" => Ok(Method::Local),
            other => Err(format!("unknown method `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub mode: DgMode,
    pub ladder: Vec<f64>,
    pub limits: VoltageLimits,
    pub max_rounds: usize,
    pub pf_tol: f64,
    pub method: Method,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    PowerFlow(#[from] PowerFlowError),
    #[error(transparent)]
    Decomposition(#[from] DecompositionError),
    #[error("scenario file error: {0}")]
    File(String),
    #[error("event references unknown {what} {id}")]
    UnknownEventTarget { what: &'static str, id: usize },
    #[error("load_scale factor must be positive")]
    NonPositiveFactor,
    #[error("force_epsilon value {0} is not on the ladder")]
    EpsilonNotOnLadder(f64),
    #[error("reports cover different scenarios and cannot be compared")]
    MismatchedScenarios,
}

/// One planning action taken in a round.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanRecord {
    pub subnetwork: usize,
    pub lp_size: (usize, usize),
    pub involved_dgs: Vec<usize>,
    /// Buses whose voltage the plan constrained (for the local baseline,
    /// the bus the DG acted on).
    pub involved_buses: Vec<usize>,
    pub adjustments: BTreeMap<usize, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    /// Epsilon in force during the round (None for the local baseline).
    pub epsilon: Option<f64>,
    /// Violations detected at the start-of-round solution.
    pub violations: Vec<Violation>,
    pub plans: Vec<PlanRecord>,
    /// Post-control voltages per bus.
    pub voltages: Vec<f64>,
    pub p_loss: f64,
    pub q_loss: f64,
    pub messages: usize,
    pub escalations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub method: Method,
    pub rounds: Vec<RoundRecord>,
    pub resolved: bool,
    pub total_escalations: usize,
    /// Encoded message lines in delivery order.
    pub message_log: Vec<String>,
    /// Voltages right after the first disturbance, before any control.
    pub disturbed_voltages: Vec<f64>,
    pub final_voltages: Vec<f64>,
    pub unresolved_reason: Option<String>,
    /// Identifies the (grid, events) pair for comparison safety.
    pub scenario_key: String,
}

impl SimReport {
    /// Distinct DGs that actually participated in control.
    pub fn involved_dgs(&self) -> Vec<usize> {
        let mut set = std::collections::BTreeSet::new();
        for round in &self.rounds {
            for plan in &round.plans {
                set.extend(plan.involved_dgs.iter().copied());
            }
        }
        set.into_iter().collect()
    }

    /// Distinct buses constrained by any plan.
    pub fn involved_buses(&self) -> Vec<usize> {
        let mut set = std::collections::BTreeSet::new();
        for round in &self.rounds {
            for plan in &round.plans {
                set.extend(plan.involved_buses.iter().copied());
            }
        }
        set.into_iter().collect()
    }

    pub fn final_losses(&self) -> (f64, f64) {
        self.rounds
            .last()
            .map(|r| (r.p_loss, r.q_loss))
            .unwrap_or((0.0, 0.0))
    }
}

fn scenario_key(grid: &GridModel, events: &[ScenarioEvent]) -> String {
    format!(
        "buses={} branches={} dgs={} events={events:?}",
        grid.n_buses(),
        grid.branches.len(),
        grid.dgs.len()
    )
}

fn validate_events(grid: &GridModel, events: &[ScenarioEvent]) -> Result<(), ScenarioError> {
    for ev in events {
        match ev.kind {
            EventKind::DgTrip { dg } | EventKind::DgRestore { dg } => {
                if grid.dg(dg).is_none() {
                    return Err(ScenarioError::UnknownEventTarget { what: "DG", id: dg });
                }
            }
            EventKind::LoadScale { bus, factor } => {
                if grid.bus(bus).is_none() {
                    return Err(ScenarioError::UnknownEventTarget { what: "bus", id: bus });
                }
                if factor <= 0.0 {
                    return Err(ScenarioError::NonPositiveFactor);
                }
            }
            EventKind::ForceEpsilon { .. } => {}
        }
    }
    Ok(())
}

fn detect_violations(
    sol: &PowerFlowSolution,
    monitored: &[usize],
    limits: &VoltageLimits,
) -> Vec<Violation> {
    monitored
        .iter()
        .filter_map(|&bus| {
            limits.check(sol.v[bus]).map(|kind| Violation {
                bus,
                voltage: sol.v[bus],
                kind,
            })
        })
        .collect()
}

fn telemetry_for(lps: &LpsState, sol: &PowerFlowSolution) -> LpsTelemetry {
    let mut t = LpsTelemetry::default();
    for &bus in &lps.view.row_buses {
        t.v.insert(bus, sol.v[bus]);
    }
    for pr in &lps.view.protectors {
        t.theta.insert(pr.primary_bus, sol.theta[pr.primary_bus]);
        t.theta.insert(pr.secondary_bus, sol.theta[pr.secondary_bus]);
    }
    t
}

fn set_dg_availability(grid: &mut GridModel, dg: usize, available: bool) {
    if let Some(unit) = grid.dgs.iter_mut().find(|u| u.id == dg) {
        unit.available = available;
    }
}

/// New agent shells keep the freshly computed wiring but inherit the old
/// agents' operating points (agents are redeployed, not restarted).
fn sync_dg_agents(old: &[DgState], new: Vec<DgState>) -> Vec<DgState> {
    new.into_iter()
        .map(|mut agent| {
            if let Some(prev) = old.iter().find(|o| o.unit.id == agent.unit.id) {
                agent.unit = prev.unit.clone();
            }
            agent
        })
        .collect()
}

/// Runs the proposed self-organizing method over the event timeline.
pub fn run_scenario(
    grid: &GridModel,
    config: &SimConfig,
    events: &[ScenarioEvent],
) -> Result<SimReport, ScenarioError> {
    let ladder = EpsilonLadder::new(config.ladder.clone())?;
    for ev in events {
        if let EventKind::ForceEpsilon { epsilon } = ev.kind {
            if !config.ladder.contains(&epsilon) {
                return Err(ScenarioError::EpsilonNotOnLadder(epsilon));
            }
        }
    }
    run_mas(grid, config, events, ladder, Method::Proposed)
}

/// Centralized benchmark: the same loop with every nonzero coupling
/// retained, so one planner sees the whole network's sensitivities and all
/// coupled DGs are candidates.
pub fn run_global_baseline(
    grid: &GridModel,
    config: &SimConfig,
    events: &[ScenarioEvent],
) -> Result<SimReport, ScenarioError> {
    let ladder = EpsilonLadder::new(vec![GLOBAL_EPSILON]).expect("valid single-rung ladder");
    run_mas(grid, config, events, ladder, Method::Global)
}

fn run_mas(
    grid0: &GridModel,
    config: &SimConfig,
    events: &[ScenarioEvent],
    ladder: EpsilonLadder,
    method: Method,
) -> Result<SimReport, ScenarioError> {
    validate_events(grid0, events)?;

    let mut grid = grid0.clone();
    let monitored = grid.monitored_buses();
    let dg_buses = grid.dg_buses();
    let base = solve_power_flow(&grid, Init::Flat, config.pf_tol, DEFAULT_MAX_ITER)?;
    let mut report = SimReport {
        method,
        rounds: Vec::new(),
        resolved: false,
        total_escalations: 0,
        message_log: Vec::new(),
        disturbed_voltages: base.v.clone(),
        final_voltages: base.v.clone(),
        unresolved_reason: None,
        scenario_key: scenario_key(grid0, events),
    };
    if !base.converged {
        report.unresolved_reason = Some("initial power flow diverged".into());
        return Ok(report);
    }
    let sens = compute_sensitivity(&grid, &base, &dg_buses, &monitored)?;

    let (mut ed, init_messages) =
        ed_initialize(&grid, &sens, config.mode, ladder, config.limits, 0)?;
    let (mut vds, mut lpss, mut dgs) = instantiate_agents(&grid, &ed, &sens);
    let log = |report: &mut SimReport, m: &Message| {
        report.message_log.push(encode_message(m));
    };
    for m in &init_messages {
        log(&mut report, m);
    }

    let mut warm = Some(base);
    let mut disturbed_recorded = false;

    for round in 0..config.max_rounds {
        let log_start = if round == 0 { 0 } else { report.message_log.len() };
        let mut ladder_exhausted = false;
        let mut escalated_this_round = false;
        let mut reorganized_this_round = false;

        // Phase 1: events due this round.
        let mut status_messages: Vec<Message> = Vec::new();
        let mut grid_dirty = false;
        for ev in events.iter().filter(|e| e.round == round) {
            match ev.kind {
                EventKind::DgTrip { dg } => {
                    grid_dirty = true;
                    set_dg_availability(&mut grid, dg, false);
                    if let Some(agent) = dgs.iter_mut().find(|d| d.unit.id == dg) {
                        status_messages.push(agent.set_availability(false, round));
                    }
                }
                EventKind::DgRestore { dg } => {
                    grid_dirty = true;
                    set_dg_availability(&mut grid, dg, true);
                    if let Some(agent) = dgs.iter_mut().find(|d| d.unit.id == dg) {
                        status_messages.push(agent.set_availability(true, round));
                    }
                }
                EventKind::LoadScale { bus, factor } => {
                    grid_dirty = true;
                    for load in grid.loads.iter_mut().filter(|l| l.bus == bus) {
                        load.p *= factor;
                        load.q *= factor;
                    }
                }
                EventKind::ForceEpsilon { epsilon } => {
                    let mut new_ladder = ed.ladder.clone();
                    new_ladder
                        .jump_to(epsilon)
                        .map_err(|_| ScenarioError::EpsilonNotOnLadder(epsilon))?;
                    let decomposition = decompose_for_grid(&grid, &sens, config.mode, epsilon)?;
                    ed = EdState {
                        mode: ed.mode,
                        limits: ed.limits,
                        ladder: new_ladder,
                        decomposition,
                    };
                    reorganized_this_round = true;
                    let (new_vds, mut new_lpss, new_dgs) = instantiate_agents(&grid, &ed, &sens);
                    carry_over_outage_state(&mut new_lpss, &lpss);
                    vds = new_vds;
                    dgs = sync_dg_agents(&dgs, new_dgs);
                    lpss = new_lpss;
                    for sub in &ed.decomposition.subnetworks {
                        let m = Message {
                            performative: Performative::Inform,
                            sender: AgentId::ed(),
                            destination: AgentId::lps(sub.id),
                            time: round,
                            content: MessageContent::ReorganizeNotice { epsilon },
                        };
                        log(&mut report, &m);
                    }
                }
            }
        }

        let epsilon_in_force = ed.ladder.current();

        // Phase 2: pre-control power flow.
        let init = match &warm {
            Some(sol) => Init::Warm(sol),
            None => Init::Flat,
        };
        let pre = solve_power_flow(&grid, init, config.pf_tol, DEFAULT_MAX_ITER)?;
        if !pre.converged {
            report.unresolved_reason = Some(format!("power flow diverged in round {round}"));
            report.final_voltages = pre.v;
            return Ok(report);
        }

        // Phase 3: deliver DG status notices; a returning DG triggers its
        // LPS's restore sequence (reset orders plus a restore request).
        let mut restore_requested = false;
        let mut adjust_inbox: Vec<Message> = Vec::new();
        for msg in &status_messages {
            log(&mut report, msg);
            let MessageContent::DgStatus {
                dg,
                available,
                surplus,
            } = msg.content
            else {
                continue;
            };
            let Some(lps) = lpss
                .iter_mut()
                .find(|l| AgentId::lps(l.subnetwork) == msg.destination)
            else {
                continue;
            };
            for out in lps.receive_status(dg, available, surplus, round) {
                match &out.content {
                    MessageContent::RestoreRequest => restore_requested = true,
                    MessageContent::Adjust { .. } => adjust_inbox.push(out.clone()),
                    _ => {}
                }
                log(&mut report, &out);
            }
        }

        // Phase 4: VD monitoring on the pre-control solution.
        let violations = detect_violations(&pre, &monitored, &config.limits);
        if !violations.is_empty() && !disturbed_recorded {
            report.disturbed_voltages = pre.v.clone();
            disturbed_recorded = true;
        }
        let mut escalation_requests = 0usize;
        let mut lps_inbox: BTreeMap<usize, Vec<Violation>> = BTreeMap::new();
        for vd in &vds {
            let Some(v) = violations.iter().find(|v| v.bus == vd.bus) else {
                continue;
            };
            let Some(msg) = vd.monitor(v.voltage, round) else {
                continue;
            };
            match &msg.content {
                MessageContent::Violation { .. } => {
                    lps_inbox.entry(msg.destination.index).or_default().push(*v);
                }
                MessageContent::EscalationRequest { .. } => escalation_requests += 1,
                _ => {}
            }
            log(&mut report, &msg);
        }

        // Phase 5: LPS planning.
        let mut plans: Vec<PlanRecord> = Vec::new();
        for lps in lpss.iter_mut() {
            let Some(viols) = lps_inbox.get(&lps.subnetwork) else {
                continue;
            };
            let telemetry = telemetry_for(lps, &pre);
            let out = lps.handle(&telemetry, viols, round);
            for m in &out.messages {
                if matches!(m.content, MessageContent::Adjust { .. }) {
                    adjust_inbox.push(m.clone());
                }
                log(&mut report, m);
            }
            if out.escalated.is_some() {
                escalation_requests += 1;
            }
            if let Some(plan) = out.plan {
                plans.push(PlanRecord {
                    subnetwork: lps.subnetwork,
                    lp_size: plan.lp_size,
                    involved_dgs: plan.adjustments.keys().copied().collect(),
                    involved_buses: plan.predicted_v.keys().copied().collect(),
                    adjustments: plan.adjustments.clone(),
                });
            }
        }

        // Phase 6: DG agents apply adjustment orders under the partition
        // that issued them; the grid mirrors the agents' operating points.
        adjust_inbox.sort_by_key(|m| (m.destination.index, m.sender.index));
        let applied_any = !adjust_inbox.is_empty();
        for agent in dgs.iter_mut() {
            let inbox: Vec<Message> = adjust_inbox
                .iter()
                .filter(|m| m.destination == AgentId::dg(agent.unit.id))
                .cloned()
                .collect();
            if inbox.is_empty() {
                continue;
            }
            for m in agent.step(&inbox, round) {
                log(&mut report, &m);
            }
            if let Some(unit) = grid.dgs.iter_mut().find(|u| u.id == agent.unit.id) {
                *unit = agent.unit.clone();
            }
        }

        // Phase 7: ED reorganization, debounced to one ladder step per
        // round. A restore request wins over simultaneous escalations; an
        // unresolved violation re-escalates next round anyway.
        if restore_requested || escalation_requests > 0 {
            let trigger = if restore_requested {
                ReorgTrigger::Restore
            } else {
                ReorgTrigger::Escalate
            };
            match ed_reorganize(&ed, trigger, &grid, &sens, round)? {
                ReorganizeOutcome::Reorganized { state, messages } => {
                    reorganized_this_round = true;
                    if trigger == ReorgTrigger::Escalate {
                        report.total_escalations += 1;
                        escalated_this_round = true;
                    }
                    ed = state;
                    let (new_vds, mut new_lpss, new_dgs) = instantiate_agents(&grid, &ed, &sens);
                    carry_over_outage_state(&mut new_lpss, &lpss);
                    vds = new_vds;
                    dgs = sync_dg_agents(&dgs, new_dgs);
                    lpss = new_lpss;
                    for m in &messages {
                        log(&mut report, m);
                    }
                }
                ReorganizeOutcome::Exhausted => {
                    ladder_exhausted = true;
                }
            }
        }

        // Phase 8: post-control power flow and the round record.
        let post = if grid_dirty || applied_any {
            let p = solve_power_flow(&grid, Init::Warm(&pre), config.pf_tol, DEFAULT_MAX_ITER)?;
            if !p.converged {
                report.unresolved_reason = Some(format!("power flow diverged in round {round}"));
                report.final_voltages = p.v;
                return Ok(report);
            }
            p
        } else {
            pre.clone()
        };
        let (p_loss, q_loss) = compute_losses(&grid, &post);
        report.rounds.push(RoundRecord {
            round,
            epsilon: Some(epsilon_in_force),
            violations,
            plans,
            voltages: post.v.clone(),
            p_loss,
            q_loss,
            messages: report.message_log.len() - log_start,
            escalations: usize::from(escalated_this_round),
        });
        report.final_voltages = post.v.clone();

        if ladder_exhausted {
            report.unresolved_reason = Some("epsilon ladder exhausted".into());
            return Ok(report);
        }

        // Termination: nothing outstanding and nothing scheduled. A round
        // that reorganized always runs one more monitoring round under the
        // new partition first.
        let post_violations = detect_violations(&post, &monitored, &config.limits);
        let future_events = events.iter().any(|e| e.round > round);
        if post_violations.is_empty() && !future_events && !reorganized_this_round {
            report.resolved = true;
            return Ok(report);
        }
        warm = Some(post);
    }

    report.unresolved_reason = Some("max rounds reached with pending violations".into());
    Ok(report)
}

/// Uncoordinated baseline: each DG watches only its own bus and corrects it
/// with its own self-sensitivity. No messages, no cooperation.
pub fn run_local_baseline(
    grid0: &GridModel,
    config: &SimConfig,
    events: &[ScenarioEvent],
) -> Result<SimReport, ScenarioError> {
    validate_events(grid0, events)?;
    let mut grid = grid0.clone();
    let monitored = grid.monitored_buses();
    let dg_buses = grid.dg_buses();
    let base = solve_power_flow(&grid, Init::Flat, config.pf_tol, DEFAULT_MAX_ITER)?;
    let mut report = SimReport {
        method: Method::Local,
        rounds: Vec::new(),
        resolved: false,
        total_escalations: 0,
        message_log: Vec::new(),
        disturbed_voltages: base.v.clone(),
        final_voltages: base.v.clone(),
        unresolved_reason: None,
        scenario_key: scenario_key(grid0, events),
    };
    if !base.converged {
        report.unresolved_reason = Some("initial power flow diverged".into());
        return Ok(report);
    }
    let sens = compute_sensitivity(&grid, &base, &dg_buses, &monitored)?;

    let mut warm = Some(base);
    let mut disturbed_recorded = false;
    for round in 0..config.max_rounds {
        for ev in events.iter().filter(|e| e.round == round) {
            match ev.kind {
                EventKind::DgTrip { dg } => set_dg_availability(&mut grid, dg, false),
                EventKind::DgRestore { dg } => set_dg_availability(&mut grid, dg, true),
                EventKind::LoadScale { bus, factor } => {
                    for load in grid.loads.iter_mut().filter(|l| l.bus == bus) {
                        load.p *= factor;
                        load.q *= factor;
                    }
                }
                EventKind::ForceEpsilon { .. } => {}
            }
        }
        let init = match &warm {
            Some(sol) => Init::Warm(sol),
            None => Init::Flat,
        };
        let pre = solve_power_flow(&grid, init, config.pf_tol, DEFAULT_MAX_ITER)?;
        if !pre.converged {
            report.unresolved_reason = Some(format!("power flow diverged in round {round}"));
            return Ok(report);
        }
        let violations = detect_violations(&pre, &monitored, &config.limits);
        if !violations.is_empty() && !disturbed_recorded {
            report.disturbed_voltages = pre.v.clone();
            disturbed_recorded = true;
        }

        // Every available DG corrects its own bus only, from the same
        // snapshot: Delta = (V_limit - V0) / A[bus][self], clamped to its
        // surplus.
        let block = match config.mode {
            DgMode::Pfc => &sens.a_vq,
            DgMode::Upf => &sens.a_vp,
        };
        let mut plans: Vec<PlanRecord> = Vec::new();
        let mut orders: Vec<(usize, f64)> = Vec::new();
        for unit in grid.dgs.iter().filter(|u| u.available) {
            let Some(v) = violations.iter().find(|v| v.bus == unit.bus) else {
                continue;
            };
            let Some(row) = sens.v_row_of(unit.bus) else {
                continue;
            };
            let col = sens.col_of(unit.bus).expect("DG bus column");
            let self_sens = block[(row, col)];
            if self_sens.abs() < 1e-12 {
                continue;
            }
            let target = match v.kind {
                ViolationKind::Under => config.limits.v_lower,
                ViolationKind::Over => config.limits.v_upper,
            };
            let raw = (target - v.voltage) / self_sens;
            let (upper, lower) = unit.surplus(config.mode).expect("available unit");
            let delta = raw.clamp(lower, upper);
            if delta != 0.0 {
                orders.push((unit.id, delta));
                plans.push(PlanRecord {
                    subnetwork: 0,
                    lp_size: (0, 0),
                    involved_dgs: vec![unit.id],
                    involved_buses: vec![unit.bus],
                    adjustments: BTreeMap::from([(unit.id, delta)]),
                });
            }
        }
        for (dg, delta) in &orders {
            let unit = grid.dgs.iter_mut().find(|u| u.id == *dg).expect("dg");
            match config.mode {
                DgMode::Pfc => unit.q0 = (unit.q0 + delta).clamp(-unit.q_abs_cap, unit.q_cap),
                DgMode::Upf => unit.p0 = (unit.p0 + delta).clamp(0.0, unit.p_cap),
            }
        }

        let post = solve_power_flow(&grid, Init::Warm(&pre), config.pf_tol, DEFAULT_MAX_ITER)?;
        if !post.converged {
            report.unresolved_reason = Some(format!("power flow diverged in round {round}"));
            return Ok(report);
        }
        let (p_loss, q_loss) = compute_losses(&grid, &post);
        let stuck = orders.is_empty();
        report.rounds.push(RoundRecord {
            round,
            epsilon: None,
            violations,
            plans,
            voltages: post.v.clone(),
            p_loss,
            q_loss,
            messages: 0,
            escalations: 0,
        });
        report.final_voltages = post.v.clone();

        let post_violations = detect_violations(&post, &monitored, &config.limits);
        let future_events = events.iter().any(|e| e.round > round);
        if post_violations.is_empty() && !future_events {
            report.resolved = true;
            return Ok(report);
        }
        if stuck && !future_events {
            report.unresolved_reason =
                Some("local control cannot reach the violating buses".into());
            return Ok(report);
        }
        warm = Some(post);
    }
    report.unresolved_reason = Some("max rounds reached with pending violations".into());
    Ok(report)
}

/// Side-by-side metrics for reports of the same scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub method: Method,
    pub involved_dgs: usize,
    pub involved_nodes: usize,
    pub p_loss: f64,
    pub q_loss: f64,
    pub resolved: bool,
    pub escalations: usize,
}

/// Builds the comparison table; all reports must stem from the same grid
/// and event timeline.
pub fn compare(reports: &[SimReport]) -> Result<ComparisonTable, ScenarioError> {
    let Some(first) = reports.first() else {
        return Ok(ComparisonTable { rows: Vec::new() });
    };
    if reports.iter().any(|r| r.scenario_key != first.scenario_key) {
        return Err(ScenarioError::MismatchedScenarios);
    }
    let rows = reports
        .iter()
        .map(|r| {
            let (p_loss, q_loss) = r.final_losses();
            ComparisonRow {
                method: r.method,
                involved_dgs: r.involved_dgs().len(),
                involved_nodes: r.involved_buses().len(),
                p_loss,
                q_loss,
                resolved: r.resolved,
                escalations: r.total_escalations,
            }
        })
        .collect();
    Ok(ComparisonTable { rows })
}

// --- scenario file ---------------------------------------------------------

#[derive(Debug, Deserialize)]
struct ScenarioFile {
    config: ScenarioFileConfig,
    #[serde(default)]
    events: Vec<ScenarioEvent>,
}

#[derive(Debug, Deserialize)]
struct ScenarioFileConfig {
    mode: DgMode,
    ladder: Vec<f64>,
    v_lower: f64,
    v_upper: f64,
    max_rounds: usize,
    #[serde(default = "default_pf_tol")]
    pf_tol: f64,
    #[serde(default = "default_method")]
    method: Method,
}

fn default_pf_tol() -> f64 {
    1e-8
}

fn default_method() -> Method {
    Method::Proposed
}

/// Loads a scenario file: a `[config]` block plus an `[[events]]` list.
pub fn load_scenario<P: AsRef<Path>>(
    path: P,
) -> Result<(SimConfig, Vec<ScenarioEvent>), ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::File(e.to_string()))?;
    parse_scenario(&text)
}

/// Parses scenario TOML text. See [`load_scenario`].
pub fn parse_scenario(text: &str) -> Result<(SimConfig, Vec<ScenarioEvent>), ScenarioError> {
    let file: ScenarioFile =
        toml::from_str(text).map_err(|e| ScenarioError::File(e.to_string()))?;
    if file.config.max_rounds == 0 {
        return Err(ScenarioError::File("max_rounds must be at least 1".into()));
    }
    let config = SimConfig {
        mode: file.config.mode,
        ladder: file.config.ladder,
        limits: VoltageLimits::new(file.config.v_lower, file.config.v_upper),
        max_rounds: file.config.max_rounds,
        pf_tol: file.config.pf_tol,
        method: file.config.method,
    };
    Ok((config, file.events))
}

/// Dispatches on the configured method.
pub fn run_method(
    grid: &GridModel,
    config: &SimConfig,
    events: &[ScenarioEvent],
    method: Method,
) -> Result<SimReport, ScenarioError> {
    match method {
        Method::Proposed => run_scenario(grid, config, events),
        Method::Global => run_global_baseline(grid, config, events),
        Method::Local => run_local_baseline(grid, config, events),
    }
}

// --- CSV rendering ---------------------------------------------------------

/// Per-round report CSV. Fixed column order:
/// round,epsilon,violations,plans,involved_dgs,involved_nodes,escalations,messages,p_loss,q_loss
pub fn report_csv(report: &SimReport) -> String {
    let mut out = String::from(
        "round,epsilon,violations,plans,involved_dgs,involved_nodes,escalations,messages,p_loss,q_loss\n",
    );
    for r in &report.rounds {
        let epsilon = match r.epsilon {
            Some(e) => format!("{e}"),
            None => String::new(),
        };
        let involved_dgs: std::collections::BTreeSet<usize> = r
            .plans
            .iter()
            .flat_map(|p| p.involved_dgs.iter().copied())
            .collect();
        let involved_nodes: std::collections::BTreeSet<usize> = r
            .plans
            .iter()
            .flat_map(|p| p.involved_buses.iter().copied())
            .collect();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{:.6},{:.6}\n",
            r.round,
            epsilon,
            r.violations.len(),
            r.plans.len(),
            involved_dgs.len(),
            involved_nodes.len(),
            r.escalations,
            r.messages,
            r.p_loss,
            r.q_loss
        ));
    }
    out
}

/// Per-bus voltage trajectory CSV: bus,v_round_0,...,v_round_n.
pub fn voltages_csv(report: &SimReport) -> String {
    let mut out = String::from("bus");
    for r in &report.rounds {
        out.push_str(&format!(",v_round_{}", r.round));
    }
    out.push('\n');
    let n = report
        .rounds
        .first()
        .map(|r| r.voltages.len())
        .unwrap_or(0);
    for bus in 0..n {
        out.push_str(&bus.to_string());
        for r in &report.rounds {
            out.push_str(&format!(",{:.6}", r.voltages[bus]));
        }
        out.push('\n');
    }
    out
}

/// Comparison CSV mirroring the case-study result tables.
pub fn comparison_csv(table: &ComparisonTable) -> String {
    let mut out =
        String::from("method,involved_dgs,involved_nodes,p_loss,q_loss,resolved,escalations\n");
    for row in &table.rows {
        out.push_str(&format!(
            "{},{},{},{:.6},{:.6},{},{}\n",
            row.method,
            row.involved_dgs,
            row.involved_nodes,
            row.p_loss,
            row.q_loss,
            row.resolved,
            row.escalations
        ));
    }
    out
}

/// Voltage profile CSV for plotting: bus,v_before,v_after_<method>...
pub fn voltage_profile_csv(reports: &[SimReport]) -> String {
    let mut out = String::from("bus,v_before");
    for r in reports {
        out.push_str(&format!(",v_after_{}", r.method));
    }
    out.push('\n');
    let Some(first) = reports.first() else {
        return out;
    };
    for bus in 0..first.disturbed_voltages.len() {
        out.push_str(&format!("{},{:.6}", bus, first.disturbed_voltages[bus]));
        for r in reports {
            out.push_str(&format!(",{:.6}", r.final_voltages[bus]));
        }
        out.push('\n');
    }
    out
}

/// Subnetwork count table over an epsilon sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub epsilon: f64,
    pub subnetworks: usize,
    pub max_block: usize,
    pub uncontrollable_buses: usize,
}

/// Decomposes the grid at each epsilon and reports the partition shape.
pub fn sweep(
    grid: &GridModel,
    epsilons: &[f64],
    mode: DgMode,
    pf_tol: f64,
) -> Result<Vec<SweepRow>, ScenarioError> {
    let sol = solve_power_flow(grid, Init::Flat, pf_tol, DEFAULT_MAX_ITER)?;
    if !sol.converged {
        return Err(ScenarioError::PowerFlow(PowerFlowError::UnconvergedInput));
    }
    let sens = compute_sensitivity(grid, &sol, &grid.dg_buses(), &grid.monitored_buses())?;
    let mut rows = Vec::with_capacity(epsilons.len());
    for &epsilon in epsilons {
        let dec = decompose_for_grid(grid, &sens, mode, epsilon)?;
        let max_block = dec
            .subnetworks
            .iter()
            .map(|s| s.bus_ids.len() + s.dg_ids.len())
            .max()
            .unwrap_or(0);
        rows.push(SweepRow {
            epsilon,
            subnetworks: dec.subnetworks.len(),
            max_block,
            uncontrollable_buses: dec.uncontrollable_buses.len(),
        });
    }
    Ok(rows)
}

/// Sweep CSV: epsilon,subnetworks,max_block,uncontrollable_buses.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("epsilon,subnetworks,max_block,uncontrollable_buses\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.epsilon, row.subnetworks, row.max_block, row.uncontrollable_buses
        ));
    }
    out
}
