//! Voltage-regulation planning: assemble the per-subnetwork LP from retained
//! sensitivities, solve it, and turn the solution into DG setpoint changes.
//!
//! The LP uses only the decomposed (retained) voltage couplings - that is the
//! information a subnetwork's control agent actually has. [`PlannerView`]
//! packages exactly that knowledge so an agent can plan without any access
//! to the global grid model; transformer-angle rows come from the full
//! sensitivity matrix of the subnetwork's own transformers.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::decomposition::{Decomposition, Subnetwork};
use crate::grid::{DgMode, GridModel};
use crate::lp::{self, Constraint, LpProblem, LpStatus, Objective, Relation};
use crate::powerflow::{PowerFlowSolution, SensitivityMatrix};

/// Feasibility slack used when applying plans; solver tolerance, far below
/// any physical bound.
const APPLY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoltageLimits {
    pub v_lower: f64,
    pub v_upper: f64,
}

impl VoltageLimits {
    pub fn new(v_lower: f64, v_upper: f64) -> Self {
        assert!(0.0 < v_lower && v_lower < v_upper);
        VoltageLimits { v_lower, v_upper }
    }

    /// Classifies a voltage; inside the closed band means no violation.
    pub fn check(&self, voltage: f64) -> Option<ViolationKind> {
        if voltage < self.v_lower {
            Some(ViolationKind::Under)
        } else if voltage > self.v_upper {
            Some(ViolationKind::Over)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    Under,
    Over,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub bus: usize,
    pub voltage: f64,
    pub kind: ViolationKind,
}

/// Optimal adjustment set for one subnetwork.
#[derive(Debug, Clone, PartialEq)]
pub struct RegulationPlan {
    pub mode: DgMode,
    /// DG id -> adjustment (reactive for PFC, active for UPF), pu.
    pub adjustments: BTreeMap<usize, f64>,
    /// Linear prediction of post-control voltage at every constrained bus.
    pub predicted_v: BTreeMap<usize, f64>,
    pub lp_size: (usize, usize),
}

/// Why a subnetwork could not produce a plan; drives escalation to the ED.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InsufficientReason {
    DgUnavailable,
    LpInfeasible,
    UncontrollableBus,
}

impl fmt::Display for InsufficientReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            InsufficientReason::DgUnavailable => "dg_unavailable",
            InsufficientReason::LpInfeasible => "lp_infeasible",
            InsufficientReason::UncontrollableBus => "uncontrollable_bus",
        };
        write!(f, "{s}")
    }
}

impl std::str::FromStr for InsufficientReason {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "dg_unavailable" => Ok(InsufficientReason::DgUnavailable),
            "lp_infeasible" => Ok(InsufficientReason::LpInfeasible),
            "uncontrollable_bus" => Ok(InsufficientReason::UncontrollableBus),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlanOutcome {
    Plan(RegulationPlan),
    Insufficient(InsufficientReason),
}

#[derive(Debug, Error)]
pub enum RegulationError {
    #[error("adjustment of {delta} pu for DG {dg} exceeds its surplus bounds")]
    AdjustmentExceedsSurplus { dg: usize, delta: f64 },
    #[error("plan references DG {dg} which is not in the grid")]
    UnknownDg { dg: usize },
}

/// What a planner knows about one DG unit of its subnetwork.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DgFacts {
    pub id: usize,
    pub bus: usize,
    pub available: bool,
    /// Mode-specific adjustment headroom (upper, lower).
    pub surplus: (f64, f64),
}

/// What a planner knows about one protector transformer of its subnetwork.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtectorFacts {
    pub transformer: usize,
    pub primary_bus: usize,
    pub secondary_bus: usize,
    pub theta_shift: f64,
    /// Angle sensitivity difference (primary minus secondary) per DG column,
    /// aligned with the view's DG order.
    pub coeffs: Vec<f64>,
}

/// Self-contained planning knowledge for one subnetwork: retained coupling
/// rows, influence ranges, DG surplus facts and protector rows. This is
/// exactly the payload a control agent receives in its assignment; it holds
/// no reference to the global grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannerView {
    pub subnetwork: Subnetwork,
    pub epsilon: f64,
    pub mode: DgMode,
    pub limits: VoltageLimits,
    /// Retained couplings, rows over `row_buses`, columns over `col_dgs`.
    pub retained: DMatrix<f64>,
    pub row_buses: Vec<usize>,
    pub col_dgs: Vec<usize>,
    pub influence: BTreeMap<usize, BTreeSet<usize>>,
    pub dg_facts: BTreeMap<usize, DgFacts>,
    pub protectors: Vec<ProtectorFacts>,
}

impl PlannerView {
    /// Restricts global decomposition and sensitivity data down to one
    /// subnetwork's knowledge.
    pub fn for_subnetwork(
        grid: &GridModel,
        dec: &Decomposition,
        sens: &SensitivityMatrix,
        sub: &Subnetwork,
        limits: VoltageLimits,
        mode: DgMode,
    ) -> PlannerView {
        let row_buses: Vec<usize> = sub.bus_ids.iter().copied().collect();
        let col_dgs: Vec<usize> = sub.dg_ids.iter().copied().collect();
        let mut retained = DMatrix::zeros(row_buses.len(), col_dgs.len());
        for (r, &bus) in row_buses.iter().enumerate() {
            let src_r = dec.row_of(bus).expect("subnetwork bus has a row");
            for (c, &dg) in col_dgs.iter().enumerate() {
                let src_c = dec.col_of(dg).expect("subnetwork DG has a column");
                retained[(r, c)] = dec.retained[(src_r, src_c)];
            }
        }
        let influence: BTreeMap<usize, BTreeSet<usize>> = col_dgs
            .iter()
            .map(|dg| (*dg, dec.influence[dg].clone()))
            .collect();
        let dg_facts: BTreeMap<usize, DgFacts> = col_dgs
            .iter()
            .map(|&id| {
                let dg = grid.dg(id).expect("DG exists");
                let surplus = if dg.available {
                    dg.surplus(mode).expect("available DG has surplus")
                } else {
                    (0.0, 0.0)
                };
                (
                    id,
                    DgFacts {
                        id,
                        bus: dg.bus,
                        available: dg.available,
                        surplus,
                    },
                )
            })
            .collect();
        let block = match mode {
            DgMode::Pfc => &sens.a_theta_q,
            DgMode::Upf => &sens.a_theta_p,
        };
        let protectors = grid
            .transformers
            .iter()
            .filter(|t| t.has_protector && sub.transformer_ids.contains(&t.id))
            .map(|t| {
                let p_row = sens.theta_row_of(t.primary_bus).expect("terminal row");
                let s_row = sens.theta_row_of(t.secondary_bus).expect("terminal row");
                let coeffs = col_dgs
                    .iter()
                    .map(|&dg_id| {
                        let bus = grid.dg(dg_id).expect("DG exists").bus;
                        let col = sens.col_of(bus).expect("DG bus column");
                        block[(p_row, col)] - block[(s_row, col)]
                    })
                    .collect();
                ProtectorFacts {
                    transformer: t.id,
                    primary_bus: t.primary_bus,
                    secondary_bus: t.secondary_bus,
                    theta_shift: t.theta_shift,
                    coeffs,
                }
            })
            .collect();
        PlannerView {
            subnetwork: sub.clone(),
            epsilon: dec.epsilon,
            mode,
            limits,
            retained,
            row_buses,
            col_dgs,
            influence,
            dg_facts,
            protectors,
        }
    }

    pub fn row_of(&self, bus: usize) -> Option<usize> {
        self.row_buses.iter().position(|&b| b == bus)
    }

    pub fn col_of(&self, dg: usize) -> Option<usize> {
        self.col_dgs.iter().position(|&d| d == dg)
    }

    /// Closest *available* DGs across all violating buses, ascending by id.
    pub fn closest_available(&self, violations: &[Violation]) -> Vec<usize> {
        let mut set = BTreeSet::new();
        for v in violations {
            for (&dg, range) in &self.influence {
                if range.contains(&v.bus) && self.dg_facts[&dg].available {
                    set.insert(dg);
                }
            }
        }
        set.into_iter().collect()
    }

    /// Marks a DG available/unavailable and updates its surplus facts.
    pub fn set_dg_status(&mut self, dg: usize, available: bool, surplus: (f64, f64)) {
        if let Some(facts) = self.dg_facts.get_mut(&dg) {
            facts.available = available;
            facts.surplus = if available { surplus } else { (0.0, 0.0) };
        }
    }

    /// Assembles the LP over the given involved DGs. Voltage rows cover the
    /// union of their influence ranges plus every violating bus; `v0` must
    /// provide the present voltage at each constrained bus and `theta0` the
    /// angle at each protector terminal.
    pub fn build_lp(
        &self,
        v0: &BTreeMap<usize, f64>,
        theta0: &BTreeMap<usize, f64>,
        violations: &[Violation],
        dgs: &[usize],
    ) -> LpProblem {
        debug_assert!(dgs.windows(2).all(|w| w[0] < w[1]), "DG ids sorted");
        let n_vars = dgs.len();
        let any_under = violations.iter().any(|v| v.kind == ViolationKind::Under);
        let any_over = violations.iter().any(|v| v.kind == ViolationKind::Over);

        let mut var_bounds = Vec::with_capacity(n_vars);
        for &dg_id in dgs {
            let (upper, lower) = self.dg_facts[&dg_id].surplus;
            // Undervoltage wants injections, overvoltage wants reductions;
            // with both present the full range stays open.
            let (lo, hi) = match (any_under, any_over) {
                (true, false) => (lower.max(0.0), upper.max(0.0)),
                (false, true) => (lower.min(0.0), upper.min(0.0)),
                _ => (lower, upper),
            };
            var_bounds.push((lo, hi));
        }

        let mut buses: BTreeSet<usize> = violations.iter().map(|v| v.bus).collect();
        for &dg_id in dgs {
            if let Some(influence) = self.influence.get(&dg_id) {
                buses.extend(influence.iter().copied());
            }
        }

        let mut constraints = Vec::with_capacity(2 * buses.len());
        for &bus in &buses {
            let row = self.row_of(bus).expect("constrained bus has a row");
            let coeffs: Vec<f64> = dgs
                .iter()
                .map(|&dg_id| {
                    let col = self.col_of(dg_id).expect("involved DG has a column");
                    self.retained[(row, col)]
                })
                .collect();
            let v = v0[&bus];
            constraints.push(Constraint {
                coeffs: coeffs.clone(),
                relation: Relation::Ge,
                rhs: self.limits.v_lower - v,
            });
            constraints.push(Constraint {
                coeffs,
                relation: Relation::Le,
                rhs: self.limits.v_upper - v,
            });
        }

        // Network protectors: keep the primary-side angle ahead of the
        // shifted secondary-side angle so active power cannot reverse.
        for pr in &self.protectors {
            let coeffs: Vec<f64> = dgs
                .iter()
                .map(|&dg_id| pr.coeffs[self.col_of(dg_id).expect("column")])
                .collect();
            let margin0 =
                theta0[&pr.primary_bus] - (theta0[&pr.secondary_bus] + pr.theta_shift);
            constraints.push(Constraint {
                coeffs,
                relation: Relation::Ge,
                rhs: -margin0,
            });
        }

        // Objective directions follow the violation being corrected; UPF
        // always uses the max-min form.
        let objective = match (self.mode, any_under) {
            (DgMode::Upf, _) => Objective::MaximizeMin,
            (DgMode::Pfc, true) => Objective::MinimizeMax,
            (DgMode::Pfc, false) => Objective::MaximizeMin,
        };

        LpProblem {
            n_vars,
            objective,
            var_bounds,
            constraints,
        }
    }

    /// Builds and solves the LP, translating the result into a plan or an
    /// `insufficient` signal that triggers epsilon escalation.
    pub fn plan(
        &self,
        v0: &BTreeMap<usize, f64>,
        theta0: &BTreeMap<usize, f64>,
        violations: &[Violation],
        dgs: &[usize],
    ) -> PlanOutcome {
        if dgs.is_empty() {
            return PlanOutcome::Insufficient(InsufficientReason::DgUnavailable);
        }
        let problem = self.build_lp(v0, theta0, violations, dgs);
        let lp_size = (problem.n_vars, problem.constraints.len());
        let solution = lp::solve(&problem);
        match solution.status {
            LpStatus::Optimal => {
                let adjustments: BTreeMap<usize, f64> = dgs
                    .iter()
                    .zip(&solution.x)
                    .map(|(&dg, &x)| (dg, x))
                    .collect();
                let mut buses: BTreeSet<usize> = violations.iter().map(|v| v.bus).collect();
                for &dg_id in dgs {
                    if let Some(influence) = self.influence.get(&dg_id) {
                        buses.extend(influence.iter().copied());
                    }
                }
                let mut predicted_v = BTreeMap::new();
                for &bus in &buses {
                    let row = self.row_of(bus).expect("constrained bus row");
                    let mut v = v0[&bus];
                    for (&dg_id, &x) in &adjustments {
                        let col = self.col_of(dg_id).expect("column");
                        v += self.retained[(row, col)] * x;
                    }
                    predicted_v.insert(bus, v);
                }
                PlanOutcome::Plan(RegulationPlan {
                    mode: self.mode,
                    adjustments,
                    predicted_v,
                    lp_size,
                })
            }
            LpStatus::Infeasible => PlanOutcome::Insufficient(InsufficientReason::LpInfeasible),
            LpStatus::Unbounded => {
                debug_assert!(false, "surplus bounds keep regulation LPs bounded");
                PlanOutcome::Insufficient(InsufficientReason::LpInfeasible)
            }
        }
    }
}

/// The closest DGs to a bus: exactly those whose influence range contains it,
/// ascending by id. Empty means the bus is uncontrollable at this epsilon and
/// the caller must escalate.
pub fn closest_dgs(dec: &Decomposition, bus: usize) -> Vec<usize> {
    dec.influence
        .iter()
        .filter(|(_, buses)| buses.contains(&bus))
        .map(|(&dg, _)| dg)
        .collect()
}

fn telemetry(
    view: &PlannerView,
    sol: &PowerFlowSolution,
) -> (BTreeMap<usize, f64>, BTreeMap<usize, f64>) {
    let mut v0 = BTreeMap::new();
    for &bus in &view.row_buses {
        v0.insert(bus, sol.v[bus]);
    }
    let mut theta0 = BTreeMap::new();
    for pr in &view.protectors {
        theta0.insert(pr.primary_bus, sol.theta[pr.primary_bus]);
        theta0.insert(pr.secondary_bus, sol.theta[pr.secondary_bus]);
    }
    (v0, theta0)
}

/// Assembles the voltage-regulation LP for one subnetwork from global data.
/// See [`PlannerView::build_lp`] for the constraint layout.
#[allow(clippy::too_many_arguments)]
pub fn build_lp(
    sub: &Subnetwork,
    dec: &Decomposition,
    sens: &SensitivityMatrix,
    sol: &PowerFlowSolution,
    violations: &[Violation],
    dgs: &[usize],
    limits: &VoltageLimits,
    mode: DgMode,
    grid: &GridModel,
) -> LpProblem {
    let view = PlannerView::for_subnetwork(grid, dec, sens, sub, *limits, mode);
    let (v0, theta0) = telemetry(&view, sol);
    view.build_lp(&v0, &theta0, violations, dgs)
}

/// Builds and solves the subnetwork LP from global data. See
/// [`PlannerView::plan`].
#[allow(clippy::too_many_arguments)]
pub fn plan_regulation(
    sub: &Subnetwork,
    dec: &Decomposition,
    sens: &SensitivityMatrix,
    sol: &PowerFlowSolution,
    violations: &[Violation],
    dgs: &[usize],
    limits: &VoltageLimits,
    mode: DgMode,
    grid: &GridModel,
) -> PlanOutcome {
    if dgs.is_empty() {
        return PlanOutcome::Insufficient(InsufficientReason::DgUnavailable);
    }
    let view = PlannerView::for_subnetwork(grid, dec, sens, sub, *limits, mode);
    let (v0, theta0) = telemetry(&view, sol);
    view.plan(&v0, &theta0, violations, dgs)
}

/// Applies a plan, producing a new grid with updated DG setpoints. Rejects
/// any adjustment outside the unit's surplus (beyond solver tolerance);
/// that would indicate an assembly or solver bug.
pub fn apply_plan(grid: &GridModel, plan: &RegulationPlan) -> Result<GridModel, RegulationError> {
    let mut next = grid.clone();
    for (&dg_id, &delta) in &plan.adjustments {
        let dg = next
            .dgs
            .iter_mut()
            .find(|d| d.id == dg_id)
            .ok_or(RegulationError::UnknownDg { dg: dg_id })?;
        match plan.mode {
            DgMode::Pfc => {
                let target = dg.q0 + delta;
                if target > dg.q_cap + APPLY_TOL || target < -dg.q_abs_cap - APPLY_TOL {
                    return Err(RegulationError::AdjustmentExceedsSurplus { dg: dg_id, delta });
                }
                dg.q0 = target.clamp(-dg.q_abs_cap, dg.q_cap);
            }
            DgMode::Upf => {
                let target = dg.p0 + delta;
                if target > dg.p_cap + APPLY_TOL || target < -APPLY_TOL {
                    return Err(RegulationError::AdjustmentExceedsSurplus { dg: dg_id, delta });
                }
                dg.p0 = target.clamp(0.0, dg.p_cap);
            }
        }
    }
    Ok(next)
}
