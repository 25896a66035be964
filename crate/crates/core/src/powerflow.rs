//! Newton-Raphson AC power flow on the meshed grid, sensitivity extraction
//! from the Jacobian, and loss accounting.
//!
//! Formulation: polar NR with a single slack bus and PQ buses everywhere
//! else; DGs enter as negative loads at their buses. Transformers are
//! π-branches with complex ratio `tap * e^{j theta_shift}` on the primary
//! side.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::grid::{BusKind, GridModel};

pub const DEFAULT_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 30;

/// Slack bus setpoint: 1.0 pu at angle zero.
const SLACK_V: f64 = 1.0;
const SLACK_THETA: f64 = 0.0;

#[derive(Debug, Clone, PartialEq)]
pub struct PowerFlowSolution {
    /// Voltage magnitude per bus, pu.
    pub v: Vec<f64>,
    /// Voltage angle per bus, radians.
    pub theta: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub mismatch_inf_norm: f64,
}

/// Initial iterate for the solver.
#[derive(Debug, Clone, Copy)]
pub enum Init<'a> {
    /// 1.0 pu, zero angle everywhere.
    Flat,
    /// Start from a previous solution of a similar grid.
    Warm(&'a PowerFlowSolution),
}

/// Columns of the inverse power-flow Jacobian restricted to injection
/// variables at selected buses.
///
/// `a_vp[r][c]` is the voltage response at `v_row_buses[r]` per unit of
/// active injection at `col_buses[c]`; `a_vq` the reactive counterpart.
/// `a_theta_p` / `a_theta_q` carry the angle responses at every transformer
/// terminal bus. Rows belonging to the slack bus are identically zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityMatrix {
    pub a_vp: DMatrix<f64>,
    pub a_vq: DMatrix<f64>,
    pub a_theta_p: DMatrix<f64>,
    pub a_theta_q: DMatrix<f64>,
    pub v_row_buses: Vec<usize>,
    pub theta_row_buses: Vec<usize>,
    pub col_buses: Vec<usize>,
}

impl SensitivityMatrix {
    pub fn v_row_of(&self, bus: usize) -> Option<usize> {
        self.v_row_buses.iter().position(|&b| b == bus)
    }

    pub fn theta_row_of(&self, bus: usize) -> Option<usize> {
        self.theta_row_buses.iter().position(|&b| b == bus)
    }

    pub fn col_of(&self, bus: usize) -> Option<usize> {
        self.col_buses.iter().position(|&b| b == bus)
    }
}

#[derive(Debug, Error)]
pub enum PowerFlowError {
    #[error("singular Jacobian at iteration {iteration}")]
    SingularJacobian { iteration: usize },
    #[error("operation requires a converged power-flow solution")]
    UnconvergedInput,
    #[error("bus {bus} is not part of the grid")]
    UnknownBus { bus: usize },
}

/// Bus-to-equation layout: P rows then Q rows, each over non-slack buses in
/// ascending bus order; variables laid out identically (theta block, then V).
#[derive(Debug, Clone)]
pub struct StateIndex {
    /// Position of a bus among the non-slack buses, by bus id.
    pub pos: Vec<Option<usize>>,
    pub n_free: usize,
}

impl StateIndex {
    fn new(grid: &GridModel) -> Self {
        let n = grid.n_buses();
        let mut pos = vec![None; n];
        let mut next = 0;
        for bus in &grid.buses {
            if bus.kind != BusKind::Slack {
                pos[bus.id] = Some(next);
                next += 1;
            }
        }
        StateIndex { pos, n_free: next }
    }

    pub fn p_row(&self, bus: usize) -> Option<usize> {
        self.pos.get(bus).copied().flatten()
    }

    pub fn q_row(&self, bus: usize) -> Option<usize> {
        self.pos.get(bus).copied().flatten().map(|p| p + self.n_free)
    }
}

/// Dense bus admittance matrix from branches and transformers.
pub fn assemble_ybus(grid: &GridModel) -> DMatrix<Complex64> {
    let n = grid.n_buses();
    let mut y = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for br in &grid.branches {
        let ys = Complex64::new(br.r, br.x).inv();
        let sh = Complex64::new(0.0, br.b_shunt / 2.0);
        y[(br.from, br.from)] += ys + sh;
        y[(br.to, br.to)] += ys + sh;
        y[(br.from, br.to)] -= ys;
        y[(br.to, br.from)] -= ys;
    }
    for tr in &grid.transformers {
        let ys = Complex64::new(tr.r, tr.x).inv();
        let t = Complex64::from_polar(tr.tap, tr.theta_shift);
        let (p, s) = (tr.primary_bus, tr.secondary_bus);
        y[(p, p)] += ys / (tr.tap * tr.tap);
        y[(p, s)] -= ys / t.conj();
        y[(s, p)] -= ys / t;
        y[(s, s)] += ys;
    }
    y
}

fn calc_injections(
    ybus: &DMatrix<Complex64>,
    v: &[f64],
    theta: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let n = v.len();
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    for i in 0..n {
        let mut pi = 0.0;
        let mut qi = 0.0;
        for k in 0..n {
            let y = ybus[(i, k)];
            if y.re == 0.0 && y.im == 0.0 {
                continue;
            }
            let dt = theta[i] - theta[k];
            let (sin, cos) = dt.sin_cos();
            pi += v[k] * (y.re * cos + y.im * sin);
            qi += v[k] * (y.re * sin - y.im * cos);
        }
        p[i] = v[i] * pi;
        q[i] = v[i] * qi;
    }
    (p, q)
}

fn mismatch(
    grid: &GridModel,
    idx: &StateIndex,
    p_calc: &[f64],
    q_calc: &[f64],
) -> DVector<f64> {
    let mut f = DVector::zeros(2 * idx.n_free);
    for bus in &grid.buses {
        if let Some(row) = idx.p_row(bus.id) {
            let (p_sched, q_sched) = grid.scheduled_injection(bus.id);
            f[row] = p_sched - p_calc[bus.id];
            f[row + idx.n_free] = q_sched - q_calc[bus.id];
        }
    }
    f
}

fn jacobian(
    grid: &GridModel,
    ybus: &DMatrix<Complex64>,
    idx: &StateIndex,
    v: &[f64],
    theta: &[f64],
    p_calc: &[f64],
    q_calc: &[f64],
) -> DMatrix<f64> {
    let nf = idx.n_free;
    let mut j = DMatrix::zeros(2 * nf, 2 * nf);
    for bus_i in &grid.buses {
        let Some(ri) = idx.p_row(bus_i.id) else { continue };
        let i = bus_i.id;
        for bus_k in &grid.buses {
            let Some(ck) = idx.p_row(bus_k.id) else { continue };
            let k = bus_k.id;
            let y = ybus[(i, k)];
            if i == k {
                j[(ri, ck)] = -q_calc[i] - y.im * v[i] * v[i];
                j[(ri, ck + nf)] = p_calc[i] / v[i] + y.re * v[i];
                j[(ri + nf, ck)] = p_calc[i] - y.re * v[i] * v[i];
                j[(ri + nf, ck + nf)] = q_calc[i] / v[i] - y.im * v[i];
            } else {
                if y.re == 0.0 && y.im == 0.0 {
                    continue;
                }
                let dt = theta[i] - theta[k];
                let (sin, cos) = dt.sin_cos();
                let gs_bc = y.re * sin - y.im * cos;
                let gc_bs = y.re * cos + y.im * sin;
                j[(ri, ck)] = v[i] * v[k] * gs_bc;
                j[(ri, ck + nf)] = v[i] * gc_bs;
                j[(ri + nf, ck)] = -v[i] * v[k] * gc_bs;
                j[(ri + nf, ck + nf)] = v[i] * gs_bc;
            }
        }
    }
    j
}

/// Solves the AC power flow. Non-convergence is reported through the
/// `converged` flag, not as an error; a singular Jacobian is an error naming
/// the iteration where factorization failed.
pub fn solve_power_flow(
    grid: &GridModel,
    init: Init,
    tol: f64,
    max_iter: usize,
) -> Result<PowerFlowSolution, PowerFlowError> {
    assert!(tol > 0.0, "tolerance must be positive");
    let n = grid.n_buses();
    let ybus = assemble_ybus(grid);
    let idx = StateIndex::new(grid);

    let (mut v, mut theta) = match init {
        Init::Flat => (vec![SLACK_V; n], vec![SLACK_THETA; n]),
        Init::Warm(sol) => (sol.v.clone(), sol.theta.clone()),
    };
    if let Some(slack) = grid.slack_bus() {
        v[slack] = SLACK_V;
        theta[slack] = SLACK_THETA;
    }

    let mut iterations = 0;
    loop {
        let (p_calc, q_calc) = calc_injections(&ybus, &v, &theta);
        let f = mismatch(grid, &idx, &p_calc, &q_calc);
        let norm = f.amax();
        if norm <= tol {
            return Ok(PowerFlowSolution {
                v,
                theta,
                converged: true,
                iterations,
                mismatch_inf_norm: norm,
            });
        }
        if iterations >= max_iter {
            return Ok(PowerFlowSolution {
                v,
                theta,
                converged: false,
                iterations,
                mismatch_inf_norm: norm,
            });
        }
        iterations += 1;
        let j = jacobian(grid, &ybus, &idx, &v, &theta, &p_calc, &q_calc);
        let lu = j.lu();
        let Some(dx) = lu.solve(&f) else {
            return Err(PowerFlowError::SingularJacobian { iteration: iterations });
        };
        for bus in &grid.buses {
            if let Some(p) = idx.pos[bus.id] {
                theta[bus.id] += dx[p];
                v[bus.id] += dx[p + idx.n_free];
            }
        }
    }
}

/// The power-flow Jacobian evaluated at a solution, with its index layout.
pub fn power_flow_jacobian(
    grid: &GridModel,
    sol: &PowerFlowSolution,
) -> (DMatrix<f64>, StateIndex) {
    let ybus = assemble_ybus(grid);
    let idx = StateIndex::new(grid);
    let (p_calc, q_calc) = calc_injections(&ybus, &sol.v, &sol.theta);
    let j = jacobian(grid, &ybus, &idx, &sol.v, &sol.theta, &p_calc, &q_calc);
    (j, idx)
}

/// State response columns (d theta, d V per bus) to unit P and Q injections
/// at each requested bus: one LU factorization, one solve per column.
pub fn injection_response_columns(
    grid: &GridModel,
    sol: &PowerFlowSolution,
    buses: &[usize],
) -> Result<(DMatrix<f64>, DMatrix<f64>), PowerFlowError> {
    if !sol.converged {
        return Err(PowerFlowError::UnconvergedInput);
    }
    let (j, idx) = power_flow_jacobian(grid, sol);
    let n_eq = 2 * idx.n_free;
    let lu = j.lu();
    let mut p_cols = DMatrix::zeros(n_eq, buses.len());
    let mut q_cols = DMatrix::zeros(n_eq, buses.len());
    for (c, &bus) in buses.iter().enumerate() {
        let p_row = idx
            .p_row(bus)
            .ok_or(PowerFlowError::UnknownBus { bus })?;
        let q_row = idx.q_row(bus).expect("PQ bus has a Q row");
        for (rhs_row, cols) in [(p_row, &mut p_cols), (q_row, &mut q_cols)] {
            let mut e = DVector::zeros(n_eq);
            e[rhs_row] = 1.0;
            let col = lu
                .solve(&e)
                .ok_or(PowerFlowError::SingularJacobian { iteration: 0 })?;
            cols.set_column(c, &col);
        }
    }
    Ok((p_cols, q_cols))
}

/// Extracts the voltage and transformer-angle sensitivity blocks for the
/// given injection buses.
pub fn compute_sensitivity(
    grid: &GridModel,
    sol: &PowerFlowSolution,
    dg_buses: &[usize],
    monitored_buses: &[usize],
) -> Result<SensitivityMatrix, PowerFlowError> {
    let (p_cols, q_cols) = injection_response_columns(grid, sol, dg_buses)?;
    let idx = StateIndex::new(grid);
    let theta_buses = grid.transformer_terminal_buses();
    let n_cols = dg_buses.len();

    let mut a_vp = DMatrix::zeros(monitored_buses.len(), n_cols);
    let mut a_vq = DMatrix::zeros(monitored_buses.len(), n_cols);
    for (r, &bus) in monitored_buses.iter().enumerate() {
        if let Some(q_row) = idx.q_row(bus) {
            for c in 0..n_cols {
                a_vp[(r, c)] = p_cols[(q_row, c)];
                a_vq[(r, c)] = q_cols[(q_row, c)];
            }
        }
        // Slack rows stay zero: its voltage is fixed.
    }
    let mut a_theta_p = DMatrix::zeros(theta_buses.len(), n_cols);
    let mut a_theta_q = DMatrix::zeros(theta_buses.len(), n_cols);
    for (r, &bus) in theta_buses.iter().enumerate() {
        if let Some(t_row) = idx.p_row(bus) {
            for c in 0..n_cols {
                a_theta_p[(r, c)] = p_cols[(t_row, c)];
                a_theta_q[(r, c)] = q_cols[(t_row, c)];
            }
        }
    }

    Ok(SensitivityMatrix {
        a_vp,
        a_vq,
        a_theta_p,
        a_theta_q,
        v_row_buses: monitored_buses.to_vec(),
        theta_row_buses: theta_buses,
        col_buses: dg_buses.to_vec(),
    })
}

/// Total (p, q) losses: sending-end plus receiving-end complex power summed
/// over every branch and transformer.
pub fn compute_losses(grid: &GridModel, sol: &PowerFlowSolution) -> (f64, f64) {
    let mut total = Complex64::new(0.0, 0.0);
    let volt = |bus: usize| Complex64::from_polar(sol.v[bus], sol.theta[bus]);
    for br in &grid.branches {
        let ys = Complex64::new(br.r, br.x).inv();
        let sh = Complex64::new(0.0, br.b_shunt / 2.0);
        let (vf, vt) = (volt(br.from), volt(br.to));
        let i_f = (ys + sh) * vf - ys * vt;
        let i_t = (ys + sh) * vt - ys * vf;
        total += vf * i_f.conj() + vt * i_t.conj();
    }
    for tr in &grid.transformers {
        let ys = Complex64::new(tr.r, tr.x).inv();
        let t = Complex64::from_polar(tr.tap, tr.theta_shift);
        let (vp, vs) = (volt(tr.primary_bus), volt(tr.secondary_bus));
        let i_p = ys / (tr.tap * tr.tap) * vp - ys / t.conj() * vs;
        let i_s = -(ys / t) * vp + ys * vs;
        total += vp * i_p.conj() + vs * i_s.conj();
    }
    (total.re, total.im)
}
