//! Electrical network data model in per-unit, plus file ingestion.
//!
//! A [`GridModel`] is immutable after load: every control action in the rest
//! of the crate produces a new model value instead of mutating in place, so
//! models can be shared read-only across threads.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Bus role in the power-flow problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusKind {
    Slack,
    Pq,
}

/// Voltage level of a bus: primary feeders vs the meshed secondary network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VoltageLevel {
    Primary,
    Secondary,
}

/// DG operating mode: reactive-power dispatch (PFC) or active-power-only (UPF).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DgMode {
    Pfc,
    Upf,
}

impl fmt::Display for DgMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DgMode::Pfc => write!(f, "pfc"),
            DgMode::Upf => write!(f, "upf"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: usize,
    pub kind: BusKind,
    pub base_kv: f64,
    pub level: VoltageLevel,
}

/// π-model line segment. Parallel branches between the same pair of buses are
/// allowed and distinguished by id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub id: usize,
    pub from: usize,
    pub to: usize,
    pub r: f64,
    pub x: f64,
    #[serde(default)]
    pub b_shunt: f64,
}

/// Network transformer between a primary and a secondary bus.
///
/// `theta_shift` is the fixed phase shift in radians; `has_protector` marks
/// units fitted with a network protector that trips on reverse active flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transformer {
    pub id: usize,
    pub primary_bus: usize,
    pub secondary_bus: usize,
    pub r: f64,
    pub x: f64,
    pub tap: f64,
    #[serde(default)]
    pub theta_shift: f64,
    #[serde(default)]
    pub has_protector: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Load {
    pub bus: usize,
    pub p: f64,
    pub q: f64,
}

/// Distributed generation unit with its capability box.
///
/// Surplus headroom is derived, not stored: `p_sur = p_cap - p0`,
/// `q_sur = q_cap - q0`, and absorption headroom `q_abs_cap + q0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgUnit {
    pub id: usize,
    pub bus: usize,
    pub mode: DgMode,
    pub p0: f64,
    pub q0: f64,
    pub p_cap: f64,
    pub q_cap: f64,
    #[serde(default)]
    pub q_abs_cap: f64,
    #[serde(default = "default_true")]
    pub available: bool,
}

fn default_true() -> bool {
    true
}

impl DgUnit {
    /// Adjustment headroom `(upper, lower)` around the current operating point.
    ///
    /// PFC mode bounds reactive adjustments by injection and absorption caps;
    /// UPF mode bounds active adjustments by capacity above and curtailment to
    /// zero below. Unavailable units must be excluded by the caller.
    pub fn surplus(&self, mode: DgMode) -> Result<(f64, f64), GridError> {
        if !self.available {
            return Err(GridError::DgUnavailable { dg: self.id });
        }
        Ok(match mode {
            DgMode::Pfc => (self.q_cap - self.q0, -(self.q_abs_cap + self.q0)),
            DgMode::Upf => (self.p_cap - self.p0, -self.p0),
        })
    }
}

/// Whole-network model. All electrical quantities are per-unit on `s_base`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridModel {
    pub s_base: f64,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub transformers: Vec<Transformer>,
    pub loads: Vec<Load>,
    pub dgs: Vec<DgUnit>,
}

#[derive(Debug, Error)]
pub enum GridError {
    #[error("failed to read grid file: {0}")]
    Io(#[from] std::io::Error),
    #[error("grid file parse error: {0}")]
    Parse(String),
    #[error("grid validation failed:\n{}", format_issues(.0))]
    Invalid(Vec<ValidationIssue>),
    #[error("DG {dg} is unavailable and has no surplus")]
    DgUnavailable { dg: usize },
}

fn format_issues(issues: &[ValidationIssue]) -> String {
    issues
        .iter()
        .map(|i| format!("  - {i}"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// One violated model invariant, naming the offending element.
#[derive(Debug, Clone, PartialEq)]
pub enum ValidationIssue {
    NoSlackBus,
    MultipleSlackBuses { bus_ids: Vec<usize> },
    NonDenseBusIds { expected: usize, found: Vec<usize> },
    NonPositiveBaseKv { bus: usize },
    NonPositiveSBase,
    BranchSelfLoop { branch: usize },
    BranchZeroImpedance { branch: usize },
    BranchEndpointMissing { branch: usize, bus: usize },
    DuplicateBranchId { id: usize },
    TransformerNonPositiveTap { transformer: usize },
    TransformerEndpointMissing { transformer: usize, bus: usize },
    TransformerLevelMismatch { transformer: usize },
    DuplicateTransformerId { id: usize },
    LoadBusMissing { bus: usize },
    LoadOnNonPqBus { bus: usize },
    DgBusMissing { dg: usize, bus: usize },
    DgOutsideCapability { dg: usize },
    DuplicateDgId { id: usize },
    Disconnected { component: Vec<usize> },
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use ValidationIssue::*;
        match self {
            NoSlackBus => write!(f, "no slack bus defined"),
            MultipleSlackBuses { bus_ids } => {
                write!(f, "more than one slack bus: {bus_ids:?}")
            }
            NonDenseBusIds { expected, found } => write!(
                f,
                "bus ids must be dense 0..{expected}, found {found:?}"
            ),
            NonPositiveBaseKv { bus } => write!(f, "bus {bus} has non-positive base_kv"),
            NonPositiveSBase => write!(f, "s_base must be positive"),
            BranchSelfLoop { branch } => write!(f, "branch {branch} connects a bus to itself"),
            BranchZeroImpedance { branch } => {
                write!(f, "branch {branch} has zero series impedance")
            }
            BranchEndpointMissing { branch, bus } => {
                write!(f, "branch {branch} references missing bus {bus}")
            }
            DuplicateBranchId { id } => write!(f, "duplicate branch id {id}"),
            TransformerNonPositiveTap { transformer } => {
                write!(f, "transformer {transformer} has non-positive tap")
            }
            TransformerEndpointMissing { transformer, bus } => {
                write!(f, "transformer {transformer} references missing bus {bus}")
            }
            TransformerLevelMismatch { transformer } => write!(
                f,
                "transformer {transformer} must connect a primary bus to a secondary bus"
            ),
            DuplicateTransformerId { id } => write!(f, "duplicate transformer id {id}"),
            LoadBusMissing { bus } => write!(f, "load references missing bus {bus}"),
            LoadOnNonPqBus { bus } => write!(f, "load on non-PQ bus {bus}"),
            DgBusMissing { dg, bus } => write!(f, "DG {dg} references missing bus {bus}"),
            DgOutsideCapability { dg } => {
                write!(f, "DG {dg} operating point outside its capability box")
            }
            DuplicateDgId { id } => write!(f, "duplicate DG id {id}"),
            Disconnected { component } => {
                write!(f, "grid is disconnected; isolated component: {component:?}")
            }
        }
    }
}

/// Unit system of the values in a grid file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
enum FileUnits {
    /// Everything already per-unit on `s_base`.
    #[default]
    Pu,
    /// Powers in MW/MVAr, impedances in ohms and shunts in siemens referred
    /// to the from/primary side base voltage.
    Physical,
}

#[derive(Debug, Serialize, Deserialize)]
struct GridFile {
    s_base: f64,
    #[serde(default, skip_serializing_if = "is_pu")]
    units: FileUnits,
    #[serde(default)]
    buses: Vec<Bus>,
    #[serde(default)]
    branches: Vec<Branch>,
    #[serde(default)]
    transformers: Vec<Transformer>,
    #[serde(default)]
    loads: Vec<Load>,
    #[serde(default)]
    dgs: Vec<DgUnit>,
}

fn is_pu(u: &FileUnits) -> bool {
    *u == FileUnits::Pu
}

/// Loads and validates a grid model from a TOML network file.
///
/// Values are converted to per-unit on `s_base` at load time when the file
/// declares `units = "physical"`.
pub fn load_grid<P: AsRef<Path>>(path: P) -> Result<GridModel, GridError> {
    let text = std::fs::read_to_string(path)?;
    parse_grid(&text)
}

/// Parses a grid model from TOML text. See [`load_grid`].
pub fn parse_grid(text: &str) -> Result<GridModel, GridError> {
    let file: GridFile = toml::from_str(text).map_err(|e| GridError::Parse(e.to_string()))?;
    let mut grid = GridModel {
        s_base: file.s_base,
        buses: file.buses,
        branches: file.branches,
        transformers: file.transformers,
        loads: file.loads,
        dgs: file.dgs,
    };
    grid.buses.sort_by_key(|b| b.id);
    if file.units == FileUnits::Physical {
        convert_physical(&mut grid);
    }
    let issues = grid.validate();
    if issues.is_empty() {
        Ok(grid)
    } else {
        Err(GridError::Invalid(issues))
    }
}

fn convert_physical(grid: &mut GridModel) {
    let s_base = grid.s_base;
    // Impedance base of the from/primary side; ohms -> pu, siemens -> pu.
    let z_base = |buses: &[Bus], bus: usize| -> f64 {
        let kv = buses
            .iter()
            .find(|b| b.id == bus)
            .map(|b| b.base_kv)
            .unwrap_or(1.0);
        kv * kv / s_base
    };
    for br in &mut grid.branches {
        let zb = z_base(&grid.buses, br.from);
        br.r /= zb;
        br.x /= zb;
        br.b_shunt *= zb;
    }
    for tr in &mut grid.transformers {
        let zb = z_base(&grid.buses, tr.primary_bus);
        tr.r /= zb;
        tr.x /= zb;
    }
    for load in &mut grid.loads {
        load.p /= s_base;
        load.q /= s_base;
    }
    for dg in &mut grid.dgs {
        dg.p0 /= s_base;
        dg.q0 /= s_base;
        dg.p_cap /= s_base;
        dg.q_cap /= s_base;
        dg.q_abs_cap /= s_base;
    }
}

/// Serializes a model back to the network file format (always per-unit).
pub fn grid_to_toml(grid: &GridModel) -> String {
    let file = GridFile {
        s_base: grid.s_base,
        units: FileUnits::Pu,
        buses: grid.buses.clone(),
        branches: grid.branches.clone(),
        transformers: grid.transformers.clone(),
        loads: grid.loads.clone(),
        dgs: grid.dgs.clone(),
    };
    toml::to_string(&file).expect("grid model serializes")
}

/// Writes a model to disk in the network file format.
pub fn save_grid<P: AsRef<Path>>(grid: &GridModel, path: P) -> Result<(), GridError> {
    std::fs::write(path, grid_to_toml(grid))?;
    Ok(())
}

impl GridModel {
    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn bus(&self, id: usize) -> Option<&Bus> {
        self.buses.get(id).filter(|b| b.id == id)
    }

    pub fn dg(&self, id: usize) -> Option<&DgUnit> {
        self.dgs.iter().find(|d| d.id == id)
    }

    pub fn slack_bus(&self) -> Option<usize> {
        self.buses
            .iter()
            .find(|b| b.kind == BusKind::Slack)
            .map(|b| b.id)
    }

    /// Net scheduled injection (p, q) at a bus: available DG output minus load.
    pub fn scheduled_injection(&self, bus: usize) -> (f64, f64) {
        let mut p = 0.0;
        let mut q = 0.0;
        for dg in self.dgs.iter().filter(|d| d.bus == bus && d.available) {
            p += dg.p0;
            q += dg.q0;
        }
        for load in self.loads.iter().filter(|l| l.bus == bus) {
            p -= load.p;
            q -= load.q;
        }
        (p, q)
    }

    /// Checks every model invariant; the report is empty iff the model is valid.
    pub fn validate(&self) -> Vec<ValidationIssue> {
        let mut issues = Vec::new();
        let n = self.buses.len();

        if self.s_base <= 0.0 {
            issues.push(ValidationIssue::NonPositiveSBase);
        }

        let mut ids: Vec<usize> = self.buses.iter().map(|b| b.id).collect();
        ids.sort_unstable();
        if ids != (0..n).collect::<Vec<_>>() {
            issues.push(ValidationIssue::NonDenseBusIds {
                expected: n,
                found: ids,
            });
        }

        let slack_ids: Vec<usize> = self
            .buses
            .iter()
            .filter(|b| b.kind == BusKind::Slack)
            .map(|b| b.id)
            .collect();
        match slack_ids.len() {
            0 if n > 0 => issues.push(ValidationIssue::NoSlackBus),
            0 | 1 => {}
            _ => issues.push(ValidationIssue::MultipleSlackBuses { bus_ids: slack_ids }),
        }

        for bus in &self.buses {
            if bus.base_kv <= 0.0 {
                issues.push(ValidationIssue::NonPositiveBaseKv { bus: bus.id });
            }
        }

        let bus_exists = |id: usize| self.buses.iter().any(|b| b.id == id);

        let mut branch_ids = BTreeSet::new();
        for br in &self.branches {
            if !branch_ids.insert(br.id) {
                issues.push(ValidationIssue::DuplicateBranchId { id: br.id });
            }
            if br.from == br.to {
                issues.push(ValidationIssue::BranchSelfLoop { branch: br.id });
            }
            if br.r == 0.0 && br.x == 0.0 {
                issues.push(ValidationIssue::BranchZeroImpedance { branch: br.id });
            }
            for bus in [br.from, br.to] {
                if !bus_exists(bus) {
                    issues.push(ValidationIssue::BranchEndpointMissing {
                        branch: br.id,
                        bus,
                    });
                }
            }
        }

        let mut tr_ids = BTreeSet::new();
        for tr in &self.transformers {
            if !tr_ids.insert(tr.id) {
                issues.push(ValidationIssue::DuplicateTransformerId { id: tr.id });
            }
            if tr.tap <= 0.0 {
                issues.push(ValidationIssue::TransformerNonPositiveTap {
                    transformer: tr.id,
                });
            }
            let mut endpoints_ok = true;
            for bus in [tr.primary_bus, tr.secondary_bus] {
                if !bus_exists(bus) {
                    issues.push(ValidationIssue::TransformerEndpointMissing {
                        transformer: tr.id,
                        bus,
                    });
                    endpoints_ok = false;
                }
            }
            if endpoints_ok {
                let p_level = self.bus_level(tr.primary_bus);
                let s_level = self.bus_level(tr.secondary_bus);
                if p_level != Some(VoltageLevel::Primary) || s_level != Some(VoltageLevel::Secondary)
                {
                    issues.push(ValidationIssue::TransformerLevelMismatch {
                        transformer: tr.id,
                    });
                }
            }
        }

        for load in &self.loads {
            if !bus_exists(load.bus) {
                issues.push(ValidationIssue::LoadBusMissing { bus: load.bus });
            } else if self.bus_kind(load.bus) != Some(BusKind::Pq) {
                issues.push(ValidationIssue::LoadOnNonPqBus { bus: load.bus });
            }
        }

        let mut dg_ids = BTreeSet::new();
        for dg in &self.dgs {
            if !dg_ids.insert(dg.id) {
                issues.push(ValidationIssue::DuplicateDgId { id: dg.id });
            }
            if !bus_exists(dg.bus) {
                issues.push(ValidationIssue::DgBusMissing {
                    dg: dg.id,
                    bus: dg.bus,
                });
            }
            let p_ok = 0.0 <= dg.p0 && dg.p0 <= dg.p_cap;
            let q_ok = -dg.q_abs_cap <= dg.q0 && dg.q0 <= dg.q_cap;
            if !p_ok || !q_ok {
                issues.push(ValidationIssue::DgOutsideCapability { dg: dg.id });
            }
        }

        // Connectivity over branches ∪ transformers, only meaningful once ids
        // are dense and endpoints exist.
        if issues.iter().all(|i| {
            !matches!(
                i,
                ValidationIssue::NonDenseBusIds { .. }
                    | ValidationIssue::BranchEndpointMissing { .. }
                    | ValidationIssue::TransformerEndpointMissing { .. }
            )
        }) && n > 0
        {
            let root = self.slack_bus().unwrap_or(0);
            for component in self.components() {
                if !component.contains(&root) {
                    issues.push(ValidationIssue::Disconnected { component });
                }
            }
        }

        issues
    }

    fn bus_kind(&self, id: usize) -> Option<BusKind> {
        self.buses.iter().find(|b| b.id == id).map(|b| b.kind)
    }

    fn bus_level(&self, id: usize) -> Option<VoltageLevel> {
        self.buses.iter().find(|b| b.id == id).map(|b| b.level)
    }

    /// Connected components of the undirected graph of branches ∪ transformers,
    /// each sorted ascending; components themselves ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.buses.len();
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        let add = |a: usize, b: usize, adj: &mut Vec<Vec<usize>>| {
            if a < n && b < n {
                adj[a].push(b);
                adj[b].push(a);
            }
        };
        for br in &self.branches {
            add(br.from, br.to, &mut adj);
        }
        for tr in &self.transformers {
            add(tr.primary_bus, tr.secondary_bus, &mut adj);
        }
        let mut seen = vec![false; n];
        let mut components = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut stack = vec![start];
            let mut comp = Vec::new();
            seen[start] = true;
            while let Some(u) = stack.pop() {
                comp.push(u);
                for &v in &adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
            comp.sort_unstable();
            components.push(comp);
        }
        components
    }

    /// Buses whose voltage the regulation layer monitors: all secondary buses
    /// plus every transformer terminal bus. The slack bus is excluded since
    /// its voltage is fixed.
    pub fn monitored_buses(&self) -> Vec<usize> {
        let slack = self.slack_bus();
        let mut set: BTreeSet<usize> = self
            .buses
            .iter()
            .filter(|b| b.level == VoltageLevel::Secondary)
            .map(|b| b.id)
            .collect();
        for tr in &self.transformers {
            set.insert(tr.primary_bus);
            set.insert(tr.secondary_bus);
        }
        if let Some(s) = slack {
            set.remove(&s);
        }
        set.into_iter().collect()
    }

    /// Terminal buses of all transformers, ascending and deduplicated.
    pub fn transformer_terminal_buses(&self) -> Vec<usize> {
        let mut set = BTreeSet::new();
        for tr in &self.transformers {
            set.insert(tr.primary_bus);
            set.insert(tr.secondary_bus);
        }
        set.into_iter().collect()
    }

    /// Buses hosting at least one DG, ascending and deduplicated.
    pub fn dg_buses(&self) -> Vec<usize> {
        let mut set = BTreeSet::new();
        for dg in &self.dgs {
            set.insert(dg.bus);
        }
        set.into_iter().collect()
    }
}
