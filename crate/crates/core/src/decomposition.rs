//! Epsilon decomposition of sensitivity blocks into autonomous subnetworks,
//! and the epsilon ladder that drives self-reorganization.
//!
//! Thresholding the normalized coupling matrix splits the bus-DG bipartite
//! graph into connected components; each DG-bearing component is a
//! subnetwork that can regulate its own voltage with purely local knowledge.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use thiserror::Error;

use crate::grid::{DgMode, GridModel};
use crate::powerflow::SensitivityMatrix;

#[derive(Debug, Error, PartialEq)]
pub enum DecompositionError {
    #[error("cannot normalize an all-zero matrix")]
    AllZeroMatrix,
    #[error("epsilon {0} outside the open interval (0, 1)")]
    EpsilonOutOfRange(f64),
    #[error("matrix is {rows}x{cols} but index lists have {row_ids} row ids and {col_ids} column ids")]
    DimensionMismatch {
        rows: usize,
        cols: usize,
        row_ids: usize,
        col_ids: usize,
    },
    #[error("epsilon ladder must be a nonempty strictly descending list inside (0, 1)")]
    MalformedLadder,
    #[error("epsilon ladder exhausted: no finer value available")]
    LadderExhausted,
}

/// One autonomous control group: the DGs, the buses they influence, and the
/// transformers with a terminal inside the group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subnetwork {
    pub id: usize,
    pub dg_ids: BTreeSet<usize>,
    pub bus_ids: BTreeSet<usize>,
    pub transformer_ids: BTreeSet<usize>,
}

/// Result of thresholding a coupling matrix at a given epsilon.
///
/// The split is exact: `retained + epsilon * residual` reconstructs the
/// input (up to one rounding per discarded entry). Buses whose retained row
/// is entirely zero are uncontrollable at this epsilon and belong to no
/// subnetwork.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub epsilon: f64,
    pub retained: DMatrix<f64>,
    pub residual: DMatrix<f64>,
    pub subnetworks: Vec<Subnetwork>,
    /// DG id -> buses the DG can still influence through retained couplings.
    pub influence: BTreeMap<usize, BTreeSet<usize>>,
    pub row_buses: Vec<usize>,
    pub col_dgs: Vec<usize>,
    pub uncontrollable_buses: BTreeSet<usize>,
}

impl Decomposition {
    pub fn row_of(&self, bus: usize) -> Option<usize> {
        self.row_buses.iter().position(|&b| b == bus)
    }

    pub fn col_of(&self, dg: usize) -> Option<usize> {
        self.col_dgs.iter().position(|&d| d == dg)
    }

    /// The subnetwork a bus belongs to, if any.
    pub fn subnetwork_of_bus(&self, bus: usize) -> Option<&Subnetwork> {
        self.subnetworks.iter().find(|s| s.bus_ids.contains(&bus))
    }

    pub fn subnetwork_of_dg(&self, dg: usize) -> Option<&Subnetwork> {
        self.subnetworks.iter().find(|s| s.dg_ids.contains(&dg))
    }

    /// Structural equality: same partition and influence map, ignoring the
    /// floating-point payload.
    pub fn same_structure(&self, other: &Decomposition) -> bool {
        self.subnetworks == other.subnetworks
            && self.influence == other.influence
            && self.uncontrollable_buses == other.uncontrollable_buses
    }
}

/// Scales a matrix so its largest absolute entry becomes exactly 1.
pub fn normalize(a: &DMatrix<f64>) -> Result<DMatrix<f64>, DecompositionError> {
    let max = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max == 0.0 {
        return Err(DecompositionError::AllZeroMatrix);
    }
    Ok(a.map(|v| v / max))
}

/// Thresholds `a` at `epsilon` (after normalization) and groups rows and
/// columns into subnetworks via connected components of the retained
/// bipartite graph.
pub fn epsilon_decompose(
    a: &DMatrix<f64>,
    row_buses: &[usize],
    col_dgs: &[usize],
    epsilon: f64,
) -> Result<Decomposition, DecompositionError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(DecompositionError::EpsilonOutOfRange(epsilon));
    }
    if a.nrows() != row_buses.len() || a.ncols() != col_dgs.len() {
        return Err(DecompositionError::DimensionMismatch {
            rows: a.nrows(),
            cols: a.ncols(),
            row_ids: row_buses.len(),
            col_ids: col_dgs.len(),
        });
    }
    let normalized = normalize(a)?;
    let mut retained = DMatrix::zeros(a.nrows(), a.ncols());
    let mut residual = DMatrix::zeros(a.nrows(), a.ncols());
    for r in 0..a.nrows() {
        for c in 0..a.ncols() {
            if normalized[(r, c)].abs() >= epsilon {
                retained[(r, c)] = a[(r, c)];
            } else {
                residual[(r, c)] = a[(r, c)] / epsilon;
            }
        }
    }

    // Connected components over bus nodes [0, n_rows) and DG nodes
    // [n_rows, n_rows + n_cols), linked where a coupling was retained.
    let n_rows = a.nrows();
    let n_cols = a.ncols();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n_rows + n_cols];
    for r in 0..n_rows {
        for c in 0..n_cols {
            if retained[(r, c)] != 0.0 {
                adj[r].push(n_rows + c);
                adj[n_rows + c].push(r);
            }
        }
    }
    let mut component = vec![usize::MAX; n_rows + n_cols];
    let mut n_components = 0;
    for start in 0..(n_rows + n_cols) {
        if component[start] != usize::MAX {
            continue;
        }
        let id = n_components;
        n_components += 1;
        let mut stack = vec![start];
        component[start] = id;
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if component[v] == usize::MAX {
                    component[v] = id;
                    stack.push(v);
                }
            }
        }
    }

    // A subnetwork is a component containing at least one DG; buses in
    // DG-free components have no retained coupling at all.
    let mut groups: BTreeMap<usize, (BTreeSet<usize>, BTreeSet<usize>)> = BTreeMap::new();
    for (c, &dg) in col_dgs.iter().enumerate() {
        groups
            .entry(component[n_rows + c])
            .or_default()
            .0
            .insert(dg);
    }
    let mut uncontrollable_buses = BTreeSet::new();
    for (r, &bus) in row_buses.iter().enumerate() {
        match groups.get_mut(&component[r]) {
            Some(group) => {
                group.1.insert(bus);
            }
            None => {
                uncontrollable_buses.insert(bus);
            }
        }
    }

    // Deterministic subnetwork ids: ascending by smallest DG id.
    let mut ordered: Vec<(BTreeSet<usize>, BTreeSet<usize>)> =
        groups.into_values().collect();
    ordered.sort_by_key(|(dgs, _)| *dgs.iter().next().expect("subnetwork has a DG"));
    let subnetworks: Vec<Subnetwork> = ordered
        .into_iter()
        .enumerate()
        .map(|(id, (dg_ids, bus_ids))| Subnetwork {
            id,
            dg_ids,
            bus_ids,
            transformer_ids: BTreeSet::new(),
        })
        .collect();

    let mut influence: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for (c, &dg) in col_dgs.iter().enumerate() {
        let mut buses = BTreeSet::new();
        for (r, &bus) in row_buses.iter().enumerate() {
            if retained[(r, c)] != 0.0 {
                buses.insert(bus);
            }
        }
        influence.insert(dg, buses);
    }

    Ok(Decomposition {
        epsilon,
        retained,
        residual,
        subnetworks,
        influence,
        row_buses: row_buses.to_vec(),
        col_dgs: col_dgs.to_vec(),
        uncontrollable_buses,
    })
}

/// Builds the per-DG coupling matrix for a mode (a_vq for PFC, a_vp for UPF)
/// and decomposes it, attaching subnetwork transformers from the grid.
pub fn decompose_for_grid(
    grid: &GridModel,
    sens: &SensitivityMatrix,
    mode: DgMode,
    epsilon: f64,
) -> Result<Decomposition, DecompositionError> {
    let (matrix, row_buses, col_dgs) = coupling_matrix(grid, sens, mode);
    let mut dec = epsilon_decompose(&matrix, &row_buses, &col_dgs, epsilon)?;
    attach_transformers(&mut dec, grid);
    Ok(dec)
}

/// Per-DG coupling matrix: one column per DG unit, selecting its bus column
/// from the sensitivity block that drives the mode's LP.
pub fn coupling_matrix(
    grid: &GridModel,
    sens: &SensitivityMatrix,
    mode: DgMode,
) -> (DMatrix<f64>, Vec<usize>, Vec<usize>) {
    let block = match mode {
        DgMode::Pfc => &sens.a_vq,
        DgMode::Upf => &sens.a_vp,
    };
    let mut dgs: Vec<&crate::grid::DgUnit> = grid.dgs.iter().collect();
    dgs.sort_by_key(|d| d.id);
    let col_dgs: Vec<usize> = dgs.iter().map(|d| d.id).collect();
    let mut matrix = DMatrix::zeros(block.nrows(), dgs.len());
    for (c, dg) in dgs.iter().enumerate() {
        let bus_col = sens
            .col_of(dg.bus)
            .expect("every DG bus has a sensitivity column");
        matrix.set_column(c, &block.column(bus_col));
    }
    (matrix, sens.v_row_buses.clone(), col_dgs)
}

fn attach_transformers(dec: &mut Decomposition, grid: &GridModel) {
    for sub in &mut dec.subnetworks {
        for tr in &grid.transformers {
            if sub.bus_ids.contains(&tr.primary_bus) || sub.bus_ids.contains(&tr.secondary_bus) {
                sub.transformer_ids.insert(tr.id);
            }
        }
    }
}

/// Row and column orders that gather each subnetwork's rows and columns into
/// contiguous runs; applying them to `retained` yields a block-diagonal
/// matrix. Uncontrollable (all-zero) rows are appended last.
pub fn block_permutation(dec: &Decomposition) -> (Vec<usize>, Vec<usize>) {
    let mut row_order = Vec::with_capacity(dec.row_buses.len());
    let mut col_order = Vec::with_capacity(dec.col_dgs.len());
    for sub in &dec.subnetworks {
        for (r, bus) in dec.row_buses.iter().enumerate() {
            if sub.bus_ids.contains(bus) {
                row_order.push(r);
            }
        }
        for (c, dg) in dec.col_dgs.iter().enumerate() {
            if sub.dg_ids.contains(dg) {
                col_order.push(c);
            }
        }
    }
    for (r, bus) in dec.row_buses.iter().enumerate() {
        if dec.uncontrollable_buses.contains(bus) {
            row_order.push(r);
        }
    }
    (row_order, col_order)
}

/// Ordered schedule of epsilon values the ED agent steps through, largest
/// (most subdivided) first.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonLadder {
    values: Vec<f64>,
    current: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LadderStep {
    /// Move to the next smaller epsilon to widen influence ranges.
    Finer,
    /// Reset to the initial epsilon after the network returns to normal.
    RestoreInitial,
}

impl EpsilonLadder {
    pub fn new(values: Vec<f64>) -> Result<Self, DecompositionError> {
        if values.is_empty()
            || !values.iter().all(|&e| e > 0.0 && e < 1.0)
            || !values.windows(2).all(|w| w[0] > w[1])
        {
            return Err(DecompositionError::MalformedLadder);
        }
        Ok(EpsilonLadder { values, current: 0 })
    }

    pub fn current(&self) -> f64 {
        self.values[self.current]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at_initial(&self) -> bool {
        self.current == 0
    }

    /// Forces the ladder onto one of its own values.
    pub fn jump_to(&mut self, epsilon: f64) -> Result<(), DecompositionError> {
        match self.values.iter().position(|&e| e == epsilon) {
            Some(i) => {
                self.current = i;
                Ok(())
            }
            None => Err(DecompositionError::MalformedLadder),
        }
    }

    pub fn step(&mut self, direction: LadderStep) -> Result<f64, DecompositionError> {
        match direction {
            LadderStep::Finer => {
                if self.current + 1 >= self.values.len() {
                    return Err(DecompositionError::LadderExhausted);
                }
                self.current += 1;
            }
            LadderStep::RestoreInitial => {
                self.current = 0;
            }
        }
        Ok(self.current())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m2(values: [[f64; 2]; 2]) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[values[0][0], values[0][1], values[1][0], values[1][1]])
    }

    #[test]
    fn normalize_scales_by_global_max() {
        let a = m2([[2.0, 0.5], [0.5, 2.0]]);
        let n = normalize(&a).unwrap();
        assert_eq!(n, m2([[1.0, 0.25], [0.25, 1.0]]));
    }

    #[test]
    fn normalize_identity_is_identity() {
        let a = DMatrix::<f64>::identity(3, 3);
        assert_eq!(normalize(&a).unwrap(), a);
    }

    #[test]
    fn normalize_rejects_zero_matrix() {
        let a = DMatrix::<f64>::zeros(2, 2);
        assert_eq!(normalize(&a), Err(DecompositionError::AllZeroMatrix));
    }

    #[test]
    fn weak_off_diagonals_split_into_singletons() {
        let a = m2([[1.0, 0.1], [0.1, 1.0]]);
        let dec = epsilon_decompose(&a, &[10, 20], &[1, 2], 0.5).unwrap();
        assert_eq!(dec.subnetworks.len(), 2);
        assert_eq!(dec.subnetworks[0].dg_ids, BTreeSet::from([1]));
        assert_eq!(dec.subnetworks[0].bus_ids, BTreeSet::from([10]));
        assert_eq!(dec.subnetworks[1].dg_ids, BTreeSet::from([2]));
        assert_eq!(dec.influence[&1], BTreeSet::from([10]));
    }

    #[test]
    fn small_epsilon_keeps_everything_together() {
        let a = m2([[1.0, 0.1], [0.1, 1.0]]);
        let dec = epsilon_decompose(&a, &[10, 20], &[1, 2], 0.05).unwrap();
        assert_eq!(dec.subnetworks.len(), 1);
        assert_eq!(dec.subnetworks[0].dg_ids, BTreeSet::from([1, 2]));
        assert_eq!(dec.influence[&1], BTreeSet::from([10, 20]));
    }

    #[test]
    fn epsilon_out_of_range_is_rejected() {
        let a = m2([[1.0, 0.0], [0.0, 1.0]]);
        assert!(matches!(
            epsilon_decompose(&a, &[0, 1], &[0, 1], 1.0),
            Err(DecompositionError::EpsilonOutOfRange(_))
        ));
        assert!(matches!(
            epsilon_decompose(&a, &[0, 1], &[0, 1], 0.0),
            Err(DecompositionError::EpsilonOutOfRange(_))
        ));
    }

    #[test]
    fn split_reconstructs_input_exactly() {
        let a = DMatrix::from_row_slice(2, 3, &[0.9, -0.02, 0.4, 0.001, -1.3, 0.25]);
        let dec = epsilon_decompose(&a, &[0, 1], &[0, 1, 2], 0.3).unwrap();
        for r in 0..2 {
            for c in 0..3 {
                let rebuilt = dec.retained[(r, c)] + dec.epsilon * dec.residual[(r, c)];
                let orig = a[(r, c)];
                assert!(
                    (rebuilt - orig).abs() <= orig.abs() * f64::EPSILON,
                    "entry ({r},{c})"
                );
            }
        }
    }

    #[test]
    fn two_singleton_permutation_is_identity() {
        let a = m2([[1.0, 0.1], [0.1, 1.0]]);
        let dec = epsilon_decompose(&a, &[10, 20], &[1, 2], 0.5).unwrap();
        let (rows, cols) = block_permutation(&dec);
        assert_eq!(rows, vec![0, 1]);
        assert_eq!(cols, vec![0, 1]);
    }

    #[test]
    fn permuted_matrix_is_block_diagonal() {
        // Three groups interleaved across rows/cols.
        let a = DMatrix::from_row_slice(
            4,
            3,
            &[
                1.0, 0.0, 0.0, // bus 0 -> dg 0
                0.0, 0.0, 0.8, // bus 1 -> dg 2
                0.0, 0.9, 0.0, // bus 2 -> dg 1
                1.0, 0.0, 0.0, // bus 3 -> dg 0
            ],
        );
        let dec = epsilon_decompose(&a, &[0, 1, 2, 3], &[0, 1, 2], 0.5).unwrap();
        assert_eq!(dec.subnetworks.len(), 3);
        let (rows, cols) = block_permutation(&dec);
        let permuted = {
            let mut m = DMatrix::zeros(4, 3);
            for (ri, &r) in rows.iter().enumerate() {
                for (ci, &c) in cols.iter().enumerate() {
                    m[(ri, ci)] = dec.retained[(r, c)];
                }
            }
            m
        };
        // Exhaustively scan: every entry outside the diagonal blocks is zero.
        let mut spans = Vec::new();
        let (mut r0, mut c0) = (0, 0);
        for sub in &dec.subnetworks {
            spans.push((r0..r0 + sub.bus_ids.len(), c0..c0 + sub.dg_ids.len()));
            r0 += sub.bus_ids.len();
            c0 += sub.dg_ids.len();
        }
        for r in 0..4 {
            for c in 0..3 {
                let inside = spans
                    .iter()
                    .any(|(rs, cs)| rs.contains(&r) && cs.contains(&c));
                if !inside {
                    assert_eq!(permuted[(r, c)], 0.0, "off-block entry at ({r},{c})");
                }
            }
        }
    }

    #[test]
    fn single_subnetwork_has_no_off_block_region() {
        let a = m2([[1.0, 0.6], [0.6, 1.0]]);
        let dec = epsilon_decompose(&a, &[0, 1], &[0, 1], 0.5).unwrap();
        assert_eq!(dec.subnetworks.len(), 1);
        let (rows, cols) = block_permutation(&dec);
        assert_eq!(rows.len(), 2);
        assert_eq!(cols.len(), 2);
    }

    #[test]
    fn ladder_steps_finer_and_restores() {
        let mut ladder = EpsilonLadder::new(vec![0.012, 0.010, 0.008]).unwrap();
        assert_eq!(ladder.current(), 0.012);
        assert_eq!(ladder.step(LadderStep::Finer).unwrap(), 0.010);
        assert_eq!(ladder.step(LadderStep::Finer).unwrap(), 0.008);
        assert_eq!(
            ladder.step(LadderStep::Finer),
            Err(DecompositionError::LadderExhausted)
        );
        assert_eq!(ladder.step(LadderStep::RestoreInitial).unwrap(), 0.012);
    }

    #[test]
    fn malformed_ladders_are_rejected() {
        assert!(EpsilonLadder::new(vec![]).is_err());
        assert!(EpsilonLadder::new(vec![0.5, 0.5]).is_err());
        assert!(EpsilonLadder::new(vec![0.1, 0.2]).is_err());
        assert!(EpsilonLadder::new(vec![1.2, 0.5]).is_err());
    }

    #[test]
    fn uncontrollable_rows_are_tracked() {
        let a = DMatrix::from_row_slice(3, 1, &[1.0, 0.05, 0.9]);
        let dec = epsilon_decompose(&a, &[5, 6, 7], &[0], 0.5).unwrap();
        assert_eq!(dec.uncontrollable_buses, BTreeSet::from([6]));
        assert_eq!(dec.subnetworks.len(), 1);
        assert_eq!(dec.subnetworks[0].bus_ids, BTreeSet::from([5, 7]));
    }
}
