//! Dense bounded-variable simplex for the small max-min / min-max programs
//! the regulation layer produces.
//!
//! Problems here are tiny (a handful of variables, tens of constraints), so
//! the solver favors determinism over numerical sophistication: two-phase
//! primal simplex on a dense tableau with Bland's anti-cycling rule and
//! lowest-index tie-breaking everywhere.

use thiserror::Error;

/// Objective family. The max-min and min-max forms are reduced to a plain
/// linear objective through the slack-variable transform in
/// [`to_standard_form`].
#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    MaximizeMin,
    MinimizeMax,
    MaximizeLinear(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub n_vars: usize,
    pub objective: Objective,
    /// Per-variable (lower, upper); infinities allowed.
    pub var_bounds: Vec<(f64, f64)>,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Values of the original problem variables (empty unless optimal).
    pub x: Vec<f64>,
    /// For max-min problems the achieved min, for min-max the achieved max,
    /// for linear objectives the objective value. NaN unless optimal.
    pub objective_value: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct SimplexConfig {
    pub feasibility_tol: f64,
    pub pivot_tol: f64,
}

impl Default for SimplexConfig {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-9,
            pivot_tol: 1e-10,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum LpError {
    #[error("objective is already linear; standard-form transform applies only to max-min/min-max")]
    AlreadyLinear,
    #[error("malformed problem: {0}")]
    Malformed(String),
}

impl LpProblem {
    fn check_shape(&self) -> Result<(), LpError> {
        if self.var_bounds.len() != self.n_vars {
            return Err(LpError::Malformed(format!(
                "expected {} bounds, found {}",
                self.n_vars,
                self.var_bounds.len()
            )));
        }
        for (j, &(lo, hi)) in self.var_bounds.iter().enumerate() {
            if lo > hi {
                return Err(LpError::Malformed(format!("variable {j} has lower > upper")));
            }
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if c.coeffs.len() != self.n_vars {
                return Err(LpError::Malformed(format!(
                    "constraint {i} has {} coefficients, expected {}",
                    c.coeffs.len(),
                    self.n_vars
                )));
            }
            if !c.coeffs.iter().all(|v| v.is_finite()) || !c.rhs.is_finite() {
                return Err(LpError::Malformed(format!("constraint {i} has non-finite entries")));
            }
        }
        if let Objective::MaximizeLinear(c) = &self.objective {
            if c.len() != self.n_vars {
                return Err(LpError::Malformed("objective length mismatch".into()));
            }
        }
        Ok(())
    }
}

/// Rewrites a max-min or min-max problem as a plain linear program by adding
/// one slack variable and one coupling constraint per original variable.
///
/// `maximize min x_i` becomes `maximize y` with `x_i >= y`; `minimize max x_i`
/// becomes `maximize -z` with `x_i <= z`. The added variable is the last one.
pub fn to_standard_form(p: &LpProblem) -> Result<LpProblem, LpError> {
    p.check_shape()?;
    let n = p.n_vars;
    let (relation, obj_coeff) = match p.objective {
        Objective::MaximizeMin => (Relation::Ge, 1.0),
        Objective::MinimizeMax => (Relation::Le, -1.0),
        Objective::MaximizeLinear(_) => return Err(LpError::AlreadyLinear),
    };
    let mut constraints: Vec<Constraint> = p
        .constraints
        .iter()
        .map(|c| {
            let mut coeffs = c.coeffs.clone();
            coeffs.push(0.0);
            Constraint {
                coeffs,
                relation: c.relation,
                rhs: c.rhs,
            }
        })
        .collect();
    // x_i - y >= 0 for max-min, x_i - z <= 0 for min-max.
    for i in 0..n {
        let mut coeffs = vec![0.0; n + 1];
        coeffs[i] = 1.0;
        coeffs[n] = -1.0;
        constraints.push(Constraint {
            coeffs,
            relation,
            rhs: 0.0,
        });
    }
    let mut objective = vec![0.0; n + 1];
    objective[n] = obj_coeff;
    let mut var_bounds = p.var_bounds.clone();
    var_bounds.push((f64::NEG_INFINITY, f64::INFINITY));
    Ok(LpProblem {
        n_vars: n + 1,
        objective: Objective::MaximizeLinear(objective),
        var_bounds,
        constraints,
    })
}

/// Solves the problem with default tolerances.
pub fn solve(p: &LpProblem) -> LpSolution {
    solve_with(p, SimplexConfig::default())
}

/// Solves the problem. Deterministic: identical inputs give identical output.
pub fn solve_with(p: &LpProblem, cfg: SimplexConfig) -> LpSolution {
    p.check_shape().expect("well-formed problem");
    match &p.objective {
        Objective::MaximizeLinear(c) => {
            let (status, x, value) = simplex_maximize(p, c, cfg);
            LpSolution {
                status,
                x,
                objective_value: value,
            }
        }
        Objective::MaximizeMin => {
            let std = to_standard_form(p).expect("transformable");
            let sol = solve_with(&std, cfg);
            strip_added_var(sol, p.n_vars, 1.0)
        }
        Objective::MinimizeMax => {
            // min max x_i == -(max min -x_i): negate variables, solve the
            // max-min image, negate back.
            let negated = LpProblem {
                n_vars: p.n_vars,
                objective: Objective::MaximizeMin,
                var_bounds: p.var_bounds.iter().map(|&(lo, hi)| (-hi, -lo)).collect(),
                constraints: p
                    .constraints
                    .iter()
                    .map(|c| Constraint {
                        coeffs: c.coeffs.iter().map(|v| -v).collect(),
                        relation: c.relation,
                        rhs: c.rhs,
                    })
                    .collect(),
            };
            let sol = solve_with(&negated, cfg);
            LpSolution {
                status: sol.status,
                x: sol.x.iter().map(|v| -v).collect(),
                objective_value: -sol.objective_value,
            }
        }
    }
}

fn strip_added_var(sol: LpSolution, n: usize, sign: f64) -> LpSolution {
    match sol.status {
        LpStatus::Optimal => LpSolution {
            status: LpStatus::Optimal,
            objective_value: sign * sol.objective_value,
            x: sol.x[..n].to_vec(),
        },
        status => LpSolution {
            status,
            x: Vec::new(),
            objective_value: f64::NAN,
        },
    }
}

/// Dense two-phase bounded-variable simplex, maximizing `c . x`.
fn simplex_maximize(p: &LpProblem, c: &[f64], cfg: SimplexConfig) -> (LpStatus, Vec<f64>, f64) {
    let n_struct = p.n_vars;
    let m = p.constraints.len();

    // Columns: structural vars, then one slack per row, artificials appended
    // as needed. Every row reads  sum_j a[i][j] x_j = rhs_i  with the slack
    // sign absorbed into its bounds (<=: slack in [0, inf), >=: (-inf, 0]).
    let mut n_total = n_struct + m;
    let mut a: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut lower = vec![0.0; n_total];
    let mut upper = vec![0.0; n_total];
    for (j, &(lo, hi)) in p.var_bounds.iter().enumerate() {
        lower[j] = lo;
        upper[j] = hi;
    }
    for (i, con) in p.constraints.iter().enumerate() {
        let mut row = vec![0.0; n_total];
        row[..n_struct].copy_from_slice(&con.coeffs);
        row[n_struct + i] = 1.0;
        a.push(row);
        let s = n_struct + i;
        match con.relation {
            Relation::Le => {
                lower[s] = 0.0;
                upper[s] = f64::INFINITY;
            }
            Relation::Ge => {
                lower[s] = f64::NEG_INFINITY;
                upper[s] = 0.0;
            }
        }
    }

    // Nonbasic starting point: finite bound nearest the problem, or 0 if free.
    let mut x = vec![0.0; n_total];
    for j in 0..n_struct {
        x[j] = if lower[j].is_finite() {
            lower[j]
        } else if upper[j].is_finite() {
            upper[j]
        } else {
            0.0
        };
    }

    // Choose a starting basis of slacks, adding an artificial wherever the
    // slack value needed to satisfy the row falls outside the slack's bounds.
    let mut basis = Vec::with_capacity(m);
    let mut artificials: Vec<usize> = Vec::new();
    let mut phase1_cost: Vec<f64> = Vec::new();
    for i in 0..m {
        let s = n_struct + i;
        let resid = p.constraints[i].rhs
            - (0..n_struct)
                .map(|j| a[i][j] * x[j])
                .sum::<f64>();
        if resid >= lower[s] - cfg.feasibility_tol && resid <= upper[s] + cfg.feasibility_tol {
            x[s] = resid;
            basis.push(s);
        } else {
            // Pin the slack at its violated bound and absorb the rest in an
            // artificial variable driven to zero by phase 1.
            let pin = if resid > upper[s] { upper[s] } else { lower[s] };
            x[s] = pin;
            let t_val = resid - pin;
            let t = n_total;
            n_total += 1;
            for (r, row) in a.iter_mut().enumerate() {
                row.push(if r == i { 1.0 } else { 0.0 });
            }
            if t_val >= 0.0 {
                lower.push(0.0);
                upper.push(f64::INFINITY);
                phase1_cost.push(-1.0);
            } else {
                lower.push(f64::NEG_INFINITY);
                upper.push(0.0);
                phase1_cost.push(1.0);
            }
            x.push(t_val);
            basis.push(t);
            artificials.push(t);
        }
    }

    let mut tableau = Tableau {
        a,
        x,
        basis,
        lower,
        upper,
        cfg,
    };

    if !artificials.is_empty() {
        // Phase 1: maximize -(total artificial infeasibility).
        let mut c1 = vec![0.0; tableau.n_total()];
        for (k, &t) in artificials.iter().enumerate() {
            c1[t] = phase1_cost[k];
        }
        match tableau.optimize(&c1) {
            LpStatus::Optimal => {}
            // Phase 1 objective is bounded above by zero, so this is unreachable.
            status => return (status, Vec::new(), f64::NAN),
        }
        let infeasibility: f64 = artificials.iter().map(|&t| tableau.x[t].abs()).sum();
        if infeasibility > cfg.feasibility_tol {
            return (LpStatus::Infeasible, Vec::new(), f64::NAN);
        }
        // Pin artificials at zero for phase 2.
        for &t in &artificials {
            tableau.lower[t] = 0.0;
            tableau.upper[t] = 0.0;
            tableau.x[t] = 0.0;
        }
    }

    let mut c2 = vec![0.0; tableau.n_total()];
    c2[..n_struct].copy_from_slice(c);
    match tableau.optimize(&c2) {
        LpStatus::Optimal => {
            let x: Vec<f64> = tableau.x[..n_struct].to_vec();
            let value = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
            (LpStatus::Optimal, x, value)
        }
        status => (status, Vec::new(), f64::NAN),
    }
}

struct Tableau {
    /// Current tableau rows (B^{-1} A maintained by pivoting).
    a: Vec<Vec<f64>>,
    /// Current value of every variable, basic and nonbasic.
    x: Vec<f64>,
    /// Basic variable per row.
    basis: Vec<usize>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cfg: SimplexConfig,
}

impl Tableau {
    fn n_total(&self) -> usize {
        self.lower.len()
    }

    fn is_basic(&self, j: usize) -> bool {
        self.basis.contains(&j)
    }

    /// Runs the simplex loop to optimality (or detects unboundedness) for the
    /// maximization objective `c`.
    fn optimize(&mut self, c: &[f64]) -> LpStatus {
        let m = self.a.len();
        let n = self.n_total();
        // Bland's rule terminates finitely; the cap only guards against bugs.
        let max_iters = 10_000 * (n + m + 1);
        for _ in 0..max_iters {
            // Reduced costs d_j = c_j - c_B . column_j.
            let mut entering = None;
            for j in 0..n {
                if self.is_basic(j) {
                    continue;
                }
                let mut d = c[j];
                for i in 0..m {
                    let cb = c[self.basis[i]];
                    if cb != 0.0 {
                        d -= cb * self.a[i][j];
                    }
                }
                let can_increase = self.x[j] < self.upper[j] - self.cfg.pivot_tol;
                let can_decrease = self.x[j] > self.lower[j] + self.cfg.pivot_tol;
                let dir = if d > self.cfg.pivot_tol && can_increase {
                    1.0
                } else if d < -self.cfg.pivot_tol && can_decrease {
                    -1.0
                } else {
                    continue;
                };
                entering = Some((j, dir));
                break; // Bland: lowest index wins.
            }
            let Some((j, dir)) = entering else {
                return LpStatus::Optimal;
            };

            // Ratio test: largest step t >= 0 along +-e_j staying in bounds.
            let mut t_best = if dir > 0.0 {
                self.upper[j] - self.x[j]
            } else {
                self.x[j] - self.lower[j]
            };
            let mut blocking: Option<usize> = None;
            for i in 0..m {
                let delta = -dir * self.a[i][j];
                if delta.abs() <= self.cfg.pivot_tol {
                    continue;
                }
                let b_var = self.basis[i];
                let limit = if delta > 0.0 {
                    (self.upper[b_var] - self.x[b_var]) / delta
                } else {
                    (self.lower[b_var] - self.x[b_var]) / delta
                };
                let limit = limit.max(0.0);
                let better = match blocking {
                    _ if limit < t_best - self.cfg.pivot_tol => true,
                    Some(r) if (limit - t_best).abs() <= self.cfg.pivot_tol => {
                        self.basis[i] < self.basis[r]
                    }
                    None if limit <= t_best + self.cfg.pivot_tol && limit < t_best => true,
                    _ => false,
                };
                if better {
                    t_best = limit;
                    blocking = Some(i);
                }
            }

            if t_best.is_infinite() {
                return LpStatus::Unbounded;
            }

            // Move the entering variable and update all basic values.
            self.x[j] += dir * t_best;
            for i in 0..m {
                let delta = -dir * self.a[i][j];
                if delta != 0.0 {
                    let b_var = self.basis[i];
                    self.x[b_var] += delta * t_best;
                }
            }

            match blocking {
                None => {
                    // Bound flip: snap exactly onto the bound reached.
                    self.x[j] = if dir > 0.0 { self.upper[j] } else { self.lower[j] };
                }
                Some(r) => {
                    let leaving = self.basis[r];
                    // Snap the leaving variable onto the bound it hit.
                    let delta_r = -dir * self.a[r][j];
                    self.x[leaving] = if delta_r > 0.0 {
                        self.upper[leaving]
                    } else {
                        self.lower[leaving]
                    };
                    self.pivot(r, j);
                }
            }
        }
        unreachable!("simplex iteration cap exceeded; anti-cycling rule violated");
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let m = self.a.len();
        let pivot_val = self.a[row][col];
        debug_assert!(pivot_val.abs() > self.cfg.pivot_tol);
        let inv = 1.0 / pivot_val;
        for v in self.a[row].iter_mut() {
            *v *= inv;
        }
        for i in 0..m {
            if i == row {
                continue;
            }
            let factor = self.a[i][col];
            if factor != 0.0 {
                let (pivot_row, other_row) = if i < row {
                    let (head, tail) = self.a.split_at_mut(row);
                    (&tail[0], &mut head[i])
                } else {
                    let (head, tail) = self.a.split_at_mut(i);
                    (&head[row], &mut tail[0])
                };
                for (o, p) in other_row.iter_mut().zip(pivot_row.iter()) {
                    *o -= factor * p;
                }
            }
        }
        self.basis[row] = col;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bounds(b: &[(f64, f64)]) -> Vec<(f64, f64)> {
        b.to_vec()
    }

    #[test]
    fn standard_form_of_max_min_adds_var_and_constraints() {
        let p = LpProblem {
            n_vars: 2,
            objective: Objective::MaximizeMin,
            var_bounds: bounds(&[(0.0, 1.0), (0.0, 1.0)]),
            constraints: vec![Constraint {
                coeffs: vec![1.0, 1.0],
                relation: Relation::Le,
                rhs: 1.5,
            }],
        };
        let std = to_standard_form(&p).unwrap();
        assert_eq!(std.n_vars, 3);
        assert_eq!(std.constraints.len(), 3);
        assert_eq!(
            std.objective,
            Objective::MaximizeLinear(vec![0.0, 0.0, 1.0])
        );
        // Added rows are x_i - y >= 0.
        assert_eq!(std.constraints[1].coeffs, vec![1.0, 0.0, -1.0]);
        assert_eq!(std.constraints[1].relation, Relation::Ge);
    }

    #[test]
    fn standard_form_of_single_var_min_max() {
        let p = LpProblem {
            n_vars: 1,
            objective: Objective::MinimizeMax,
            var_bounds: bounds(&[(0.2, 1.0)]),
            constraints: vec![],
        };
        let std = to_standard_form(&p).unwrap();
        assert_eq!(std.constraints.len(), 1);
        assert_eq!(std.constraints[0].relation, Relation::Le);
        // Optimum of the transformed problem puts z at x1's optimum.
        let sol = solve(&std);
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.x[1] - 0.2).abs() < 1e-9);
        let direct = solve(&p);
        assert!((direct.objective_value - 0.2).abs() < 1e-9);
    }

    #[test]
    fn standard_form_rejects_linear_objective() {
        let p = LpProblem {
            n_vars: 1,
            objective: Objective::MaximizeLinear(vec![1.0]),
            var_bounds: bounds(&[(0.0, 1.0)]),
            constraints: vec![],
        };
        assert_eq!(to_standard_form(&p), Err(LpError::AlreadyLinear));
    }

    #[test]
    fn maximize_y_against_single_bounded_var() {
        // maximize y s.t. x1 >= y, 0 <= x1 <= 0.5.
        let p = LpProblem {
            n_vars: 2,
            objective: Objective::MaximizeLinear(vec![0.0, 1.0]),
            var_bounds: bounds(&[(0.0, 0.5), (f64::NEG_INFINITY, f64::INFINITY)]),
            constraints: vec![Constraint {
                coeffs: vec![1.0, -1.0],
                relation: Relation::Ge,
                rhs: 0.0,
            }],
        };
        let sol = solve(&p);
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.x[0] - 0.5).abs() < 1e-9);
        assert!((sol.x[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn max_min_splits_a_shared_cap_evenly() {
        // maximize min(x1, x2) with x1 + x2 <= 0.6: pushing both up equally
        // is optimal, so x1 = x2 = 0.3.
        let p = LpProblem {
            n_vars: 2,
            objective: Objective::MaximizeMin,
            var_bounds: bounds(&[(-1.0, 1.0), (-1.0, 1.0)]),
            constraints: vec![Constraint {
                coeffs: vec![1.0, 1.0],
                relation: Relation::Le,
                rhs: 0.6,
            }],
        };
        let sol = solve(&p);
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective_value - 0.3).abs() < 1e-9);
    }

    #[test]
    fn min_max_splits_a_shared_requirement_evenly() {
        // minimize max(x1, x2) with x1 + x2 >= 0.6: x1 = x2 = 0.3.
        let p = LpProblem {
            n_vars: 2,
            objective: Objective::MinimizeMax,
            var_bounds: bounds(&[(-1.0, 1.0), (-1.0, 1.0)]),
            constraints: vec![Constraint {
                coeffs: vec![1.0, 1.0],
                relation: Relation::Ge,
                rhs: 0.6,
            }],
        };
        let sol = solve(&p);
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective_value - 0.3).abs() < 1e-9);
        assert!((sol.x[0] - 0.3).abs() < 1e-9);
        assert!((sol.x[1] - 0.3).abs() < 1e-9);
    }

    #[test]
    fn conflicting_bound_and_constraint_is_infeasible() {
        let p = LpProblem {
            n_vars: 1,
            objective: Objective::MaximizeLinear(vec![1.0]),
            var_bounds: bounds(&[(0.0, 1.0)]),
            constraints: vec![Constraint {
                coeffs: vec![1.0],
                relation: Relation::Ge,
                rhs: 2.0,
            }],
        };
        assert_eq!(solve(&p).status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_detected() {
        let p = LpProblem {
            n_vars: 1,
            objective: Objective::MaximizeLinear(vec![1.0]),
            var_bounds: bounds(&[(0.0, f64::INFINITY)]),
            constraints: vec![],
        };
        assert_eq!(solve(&p).status, LpStatus::Unbounded);
    }

    #[test]
    fn min_max_matches_its_standard_form_route() {
        // The negation route and the explicit z-form must agree.
        let p = LpProblem {
            n_vars: 3,
            objective: Objective::MinimizeMax,
            var_bounds: bounds(&[(0.0, 1.0), (0.0, 0.8), (0.0, 0.9)]),
            constraints: vec![
                Constraint {
                    coeffs: vec![1.0, 1.0, 0.5],
                    relation: Relation::Ge,
                    rhs: 1.2,
                },
                Constraint {
                    coeffs: vec![0.2, 1.0, 1.0],
                    relation: Relation::Ge,
                    rhs: 0.7,
                },
            ],
        };
        let via_negation = solve(&p);
        let std = to_standard_form(&p).unwrap();
        let via_z = solve(&std);
        assert_eq!(via_negation.status, LpStatus::Optimal);
        assert_eq!(via_z.status, LpStatus::Optimal);
        // z is the added last variable and carries the min-max value.
        assert!((via_negation.objective_value - via_z.x[3]).abs() < 1e-8);
    }

    #[test]
    fn weak_duality_spot_check() {
        // maximize 3x1 + 2x2 s.t. x1 + x2 <= 4, x1 <= 2, x >= 0.
        // Hand dual point y = (2, 1) is feasible (y1+y2 >= 3, y1 >= 2) with
        // dual objective 4*2 + 2*1 = 10, an upper bound on the primal.
        let p = LpProblem {
            n_vars: 2,
            objective: Objective::MaximizeLinear(vec![3.0, 2.0]),
            var_bounds: bounds(&[(0.0, f64::INFINITY), (0.0, f64::INFINITY)]),
            constraints: vec![
                Constraint {
                    coeffs: vec![1.0, 1.0],
                    relation: Relation::Le,
                    rhs: 4.0,
                },
                Constraint {
                    coeffs: vec![1.0, 0.0],
                    relation: Relation::Le,
                    rhs: 2.0,
                },
            ],
        };
        let sol = solve(&p);
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!(sol.objective_value <= 10.0 + 1e-9);
        assert!((sol.objective_value - 10.0).abs() < 1e-9);
    }

    #[test]
    fn identical_problems_solve_identically() {
        let p = LpProblem {
            n_vars: 2,
            objective: Objective::MaximizeMin,
            var_bounds: bounds(&[(-0.3, 0.4), (-0.2, 0.5)]),
            constraints: vec![Constraint {
                coeffs: vec![0.7, -0.3],
                relation: Relation::Le,
                rhs: 0.11,
            }],
        };
        let a = solve(&p);
        let b = solve(&p);
        assert_eq!(a.status, b.status);
        assert_eq!(a.x.len(), b.x.len());
        for (u, v) in a.x.iter().zip(&b.x) {
            assert_eq!(u.to_bits(), v.to_bits());
        }
        assert_eq!(a.objective_value.to_bits(), b.objective_value.to_bits());
    }

    #[test]
    fn solution_respects_feasibility_tolerance() {
        let p = LpProblem {
            n_vars: 2,
            objective: Objective::MinimizeMax,
            var_bounds: bounds(&[(0.0, 0.5), (0.0, 0.5)]),
            constraints: vec![
                Constraint {
                    coeffs: vec![1.0, 2.0],
                    relation: Relation::Ge,
                    rhs: 0.9,
                },
                Constraint {
                    coeffs: vec![1.0, -1.0],
                    relation: Relation::Le,
                    rhs: 0.2,
                },
            ],
        };
        let sol = solve(&p);
        assert_eq!(sol.status, LpStatus::Optimal);
        for c in &p.constraints {
            let lhs: f64 = c.coeffs.iter().zip(&sol.x).map(|(a, x)| a * x).sum();
            match c.relation {
                Relation::Le => assert!(lhs <= c.rhs + 1e-9),
                Relation::Ge => assert!(lhs >= c.rhs - 1e-9),
            }
        }
        for (j, &(lo, hi)) in p.var_bounds.iter().enumerate() {
            assert!(sol.x[j] >= lo - 1e-9 && sol.x[j] <= hi + 1e-9);
        }
    }
}
