//! Shared oracles for the integration suites. Everything here is an
//! independent computation path: no code from the solver modules it checks.
#![allow(dead_code)] // each suite uses its own subset

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use selfgrid_core::grid::GridModel;

/// Dense bus admittance matrix assembled independently of the solver's
/// implementation (same physics, separate code).
pub fn oracle_ybus(grid: &GridModel) -> DMatrix<Complex64> {
    let n = grid.n_buses();
    let mut y = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for br in &grid.branches {
        let ys = Complex64::new(1.0, 0.0) / Complex64::new(br.r, br.x);
        let sh = Complex64::new(0.0, br.b_shunt / 2.0);
        y[(br.from, br.from)] += ys + sh;
        y[(br.to, br.to)] += ys + sh;
        y[(br.from, br.to)] -= ys;
        y[(br.to, br.from)] -= ys;
    }
    for tr in &grid.transformers {
        let ys = Complex64::new(1.0, 0.0) / Complex64::new(tr.r, tr.x);
        let t = Complex64::from_polar(tr.tap, tr.theta_shift);
        y[(tr.primary_bus, tr.primary_bus)] += ys / (tr.tap * tr.tap);
        y[(tr.primary_bus, tr.secondary_bus)] -= ys / t.conj();
        y[(tr.secondary_bus, tr.primary_bus)] -= ys / t;
        y[(tr.secondary_bus, tr.secondary_bus)] += ys;
    }
    y
}

/// Fixed-point (Gauss-Seidel) power flow oracle. Slow but entirely
/// independent of the Newton-Raphson path under test.
pub fn gauss_seidel(grid: &GridModel, tol: f64, max_iter: usize) -> Option<Vec<Complex64>> {
    let n = grid.n_buses();
    let ybus = oracle_ybus(grid);
    let slack = grid.slack_bus().expect("slack bus");
    let mut v: Vec<Complex64> = vec![Complex64::new(1.0, 0.0); n];
    let mut scheduled: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); n];
    for (bus, s) in scheduled.iter_mut().enumerate() {
        let (p, q) = grid.scheduled_injection(bus);
        *s = Complex64::new(p, q);
    }
    for _ in 0..max_iter {
        let mut worst: f64 = 0.0;
        for bus in 0..n {
            if bus == slack {
                continue;
            }
            let mut sum = Complex64::new(0.0, 0.0);
            for k in 0..n {
                if k != bus {
                    sum += ybus[(bus, k)] * v[k];
                }
            }
            let new_v = ((scheduled[bus] / v[bus]).conj() - sum) / ybus[(bus, bus)];
            worst = worst.max((new_v - v[bus]).norm());
            v[bus] = new_v;
        }
        if worst < tol {
            return Some(v);
        }
    }
    None
}

/// Union-find partition oracle over a thresholded bipartite matrix: rows are
/// buses, columns DGs, joined where `|normalized| >= epsilon`. Returns the
/// set partition of (row ids, col ids) pairs, with DG-free groups dropped.
pub struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    pub fn find(&mut self, a: usize) -> usize {
        if self.parent[a] != a {
            let root = self.find(self.parent[a]);
            self.parent[a] = root;
        }
        self.parent[a]
    }

    pub fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Groups of (bus ids, dg ids) from an independent union-find over the
/// thresholded matrix; groups without a DG are dropped to match the
/// subnetwork definition.
pub fn union_find_groups(
    a: &DMatrix<f64>,
    row_buses: &[usize],
    col_dgs: &[usize],
    epsilon: f64,
) -> Vec<(Vec<usize>, Vec<usize>)> {
    let max = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(max > 0.0);
    let n_rows = a.nrows();
    let mut uf = UnionFind::new(n_rows + a.ncols());
    for r in 0..n_rows {
        for c in 0..a.ncols() {
            if (a[(r, c)] / max).abs() >= epsilon {
                uf.union(r, n_rows + c);
            }
        }
    }
    let mut groups: BTreeMap<usize, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for c in 0..a.ncols() {
        let root = uf.find(n_rows + c);
        groups.entry(root).or_default().1.push(col_dgs[c]);
    }
    for r in 0..n_rows {
        let root = uf.find(r);
        // Only rows joined to some DG column belong to a group.
        if let Some(entry) = groups.get_mut(&root) {
            entry.0.push(row_buses[r]);
        }
    }
    let mut out: Vec<(Vec<usize>, Vec<usize>)> = groups.into_values().collect();
    for (buses, dgs) in &mut out {
        buses.sort_unstable();
        dgs.sort_unstable();
    }
    out.sort_by_key(|(_, dgs)| dgs[0]);
    out
}

pub fn fixture_path(name: &str) -> String {
    format!(
        "{}/../../fixtures/{name}",
        env!("CARGO_MANIFEST_DIR")
    )
}

/// Brute-force LP oracle: seeded random max-min / min-max problems checked
/// against an exhaustive 1e-3-step grid scan.
pub mod lp_oracle {
    use rand::rngs::StdRng;
    use rand::Rng;
    use selfgrid_core::lp::{solve, Constraint, LpProblem, LpStatus, Objective, Relation};

    const STEP: f64 = 1e-3;

    /// Draws a problem with at most `max_vars` variables and 8 constraints whose
    /// feasible set contains a ball around the bound-box midpoint, so both the
    /// LP and the grid oracle always find a point.
    pub fn random_problem(rng: &mut StdRng, max_vars: usize) -> LpProblem {
        let n = rng.gen_range(1..=max_vars);
        let mut var_bounds = Vec::with_capacity(n);
        for _ in 0..n {
            // Bounds on the 1e-3 grid keep the oracle scan exact.
            let lo = -(rng.gen_range(50..=300) as f64) * STEP;
            let hi = (rng.gen_range(50..=300) as f64) * STEP;
            var_bounds.push((lo, hi));
        }
        let mid: Vec<f64> = var_bounds.iter().map(|(lo, hi)| (lo + hi) / 2.0).collect();
        let n_cons = rng.gen_range(0..=8);
        let mut constraints = Vec::with_capacity(n_cons);
        for _ in 0..n_cons {
            let coeffs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let at_mid: f64 = coeffs.iter().zip(&mid).map(|(c, x)| c * x).sum();
            let margin = rng.gen_range(0.05..0.3);
            let relation = if rng.gen() { Relation::Le } else { Relation::Ge };
            let rhs = match relation {
                Relation::Le => at_mid + margin,
                Relation::Ge => at_mid - margin,
            };
            constraints.push(Constraint {
                coeffs,
                relation,
                rhs,
            });
        }
        let objective = if rng.gen() {
            Objective::MaximizeMin
        } else {
            Objective::MinimizeMax
        };
        LpProblem {
            n_vars: n,
            objective,
            var_bounds,
            constraints,
        }
    }

    /// Exhaustive 1e-3-step scan. The innermost variable is reduced analytically
    /// to its feasible interval, which is exact because the objective is
    /// monotone in the last coordinate once the others are fixed.
    pub fn grid_search(p: &LpProblem) -> Option<f64> {
        let maximize_min = matches!(p.objective, Objective::MaximizeMin);
        let n = p.n_vars;
        let mut best: Option<f64> = None;
        let mut point = vec![0.0; n];
        scan(p, 0, &mut point, maximize_min, &mut best);
        best
    }

    fn scan(p: &LpProblem, depth: usize, point: &mut Vec<f64>, maximize_min: bool, best: &mut Option<f64>) {
        let (lo, hi) = p.var_bounds[depth];
        if depth + 1 == p.n_vars {
            // Intersect the constraints down to an interval for the last var.
            let (mut flo, mut fhi) = (lo, hi);
            for c in &p.constraints {
                let partial: f64 = c
                    .coeffs
                    .iter()
                    .take(depth)
                    .zip(point.iter())
                    .map(|(a, x)| a * x)
                    .sum();
                let a = c.coeffs[depth];
                let slack = c.rhs - partial;
                match c.relation {
                    Relation::Le => {
                        if a.abs() < 1e-12 {
                            if partial > c.rhs + 1e-9 {
                                return;
                            }
                        } else if a > 0.0 {
                            fhi = fhi.min(slack / a);
                        } else {
                            flo = flo.max(slack / a);
                        }
                    }
                    Relation::Ge => {
                        if a.abs() < 1e-12 {
                            if partial < c.rhs - 1e-9 {
                                return;
                            }
                        } else if a > 0.0 {
                            flo = flo.max(slack / a);
                        } else {
                            fhi = fhi.min(slack / a);
                        }
                    }
                }
            }
            // Snap to grid points inside [flo, fhi].
            let k_lo = ((flo - lo) / STEP - 1e-9).ceil().max(0.0) as i64;
            let k_hi = (((fhi - lo) / STEP) + 1e-9).floor() as i64;
            let k_max = ((hi - lo) / STEP + 0.5) as i64;
            let k_hi = k_hi.min(k_max);
            if k_lo > k_hi {
                return;
            }
            // The objective is monotone in the last coordinate: pick the
            // extreme feasible grid value.
            let k = if maximize_min { k_hi } else { k_lo };
            let x_last = lo + k as f64 * STEP;
            let value = if maximize_min {
                point.iter().take(depth).fold(x_last, |m, &x| m.min(x))
            } else {
                point.iter().take(depth).fold(x_last, |m, &x| m.max(x))
            };
            *best = Some(match *best {
                None => value,
                Some(b) if maximize_min => b.max(value),
                Some(b) => b.min(value),
            });
            return;
        }
        let steps = ((hi - lo) / STEP + 0.5) as i64;
        for k in 0..=steps {
            point[depth] = lo + k as f64 * STEP;
            scan(p, depth + 1, point, maximize_min, best);
        }
    }

    /// Checks one instance: equal feasibility verdicts, objective agreement
    /// within 2e-3 and constraint satisfaction within 1e-9.
    pub fn check_instance(p: &LpProblem) -> Result<(), String> {
        let sol = solve(p);
        let oracle = grid_search(p);
        match (sol.status, oracle) {
            (LpStatus::Optimal, Some(expected)) => {
                if (sol.objective_value - expected).abs() > 2e-3 {
                    return Err(format!(
                        "objective {} vs oracle {expected}",
                        sol.objective_value
                    ));
                }
                for (j, &(lo, hi)) in p.var_bounds.iter().enumerate() {
                    if sol.x[j] < lo - 1e-9 || sol.x[j] > hi + 1e-9 {
                        return Err(format!("bound violation on x{j}"));
                    }
                }
                for (i, c) in p.constraints.iter().enumerate() {
                    let lhs: f64 = c.coeffs.iter().zip(&sol.x).map(|(a, x)| a * x).sum();
                    let ok = match c.relation {
                        Relation::Le => lhs <= c.rhs + 1e-9,
                        Relation::Ge => lhs >= c.rhs - 1e-9,
                    };
                    if !ok {
                        return Err(format!("constraint {i} violated by {lhs} vs {}", c.rhs));
                    }
                }
                Ok(())
            }
            (LpStatus::Infeasible, None) => Ok(()),
            (status, oracle) => Err(format!("status {status:?} vs oracle {oracle:?}")),
        }
    }
}
