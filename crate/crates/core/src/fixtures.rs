//! Synthetic meshed test grids.
//!
//! All fixtures are deterministic; the TOML twins under `fixtures/` at the
//! workspace root are generated from these builders and kept in sync by a
//! test. `SELFGRID_SEED` overrides the seed used by randomized test-fixture
//! generation.

use crate::grid::{
    Branch, Bus, BusKind, DgMode, DgUnit, GridModel, Load, Transformer, VoltageLevel,
};

pub const DEFAULT_SEED: u64 = 0x53454c46; // "SELF"

/// Seed for randomized fixture generation, overridable via `SELFGRID_SEED`.
pub fn seed_from_env() -> u64 {
    std::env::var("SELFGRID_SEED")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(DEFAULT_SEED)
}

fn slack(id: usize) -> Bus {
    Bus {
        id,
        kind: BusKind::Slack,
        base_kv: 13.8,
        level: VoltageLevel::Primary,
    }
}

fn primary(id: usize) -> Bus {
    Bus {
        id,
        kind: BusKind::Pq,
        base_kv: 13.8,
        level: VoltageLevel::Primary,
    }
}

fn secondary(id: usize) -> Bus {
    Bus {
        id,
        kind: BusKind::Pq,
        base_kv: 0.48,
        level: VoltageLevel::Secondary,
    }
}

struct GridBuilder {
    grid: GridModel,
    next_branch: usize,
    next_transformer: usize,
}

impl GridBuilder {
    fn new(s_base: f64) -> Self {
        GridBuilder {
            grid: GridModel {
                s_base,
                buses: Vec::new(),
                branches: Vec::new(),
                transformers: Vec::new(),
                loads: Vec::new(),
                dgs: Vec::new(),
            },
            next_branch: 0,
            next_transformer: 0,
        }
    }

    fn branch(&mut self, from: usize, to: usize, r: f64, x: f64) {
        self.grid.branches.push(Branch {
            id: self.next_branch,
            from,
            to,
            r,
            x,
            b_shunt: 0.0,
        });
        self.next_branch += 1;
    }

    fn transformer(&mut self, primary_bus: usize, secondary_bus: usize, protector: bool) {
        self.grid.transformers.push(Transformer {
            id: self.next_transformer,
            primary_bus,
            secondary_bus,
            r: 0.004,
            x: 0.03,
            tap: 1.0,
            theta_shift: 0.0,
            has_protector: protector,
        });
        self.next_transformer += 1;
    }

    fn load(&mut self, bus: usize, p: f64, q: f64) {
        self.grid.loads.push(Load { bus, p, q });
    }

    fn dg(&mut self, id: usize, bus: usize, p0: f64, q0: f64, q_cap: f64) {
        self.grid.dgs.push(DgUnit {
            id,
            bus,
            mode: DgMode::Pfc,
            p0,
            q0,
            p_cap: p0 + 0.08,
            q_cap,
            q_abs_cap: q_cap,
            available: true,
        });
    }

    /// 2x4 meshed ladder: top row `base..base+4`, bottom `base+4..base+8`,
    /// chained rows plus one rung per column.
    fn ladder_cluster(&mut self, base: usize, r: f64, x: f64) {
        for i in 0..8 {
            self.grid.buses.push(secondary(base + i));
        }
        for i in 0..3 {
            self.branch(base + i, base + i + 1, r, x);
            self.branch(base + 4 + i, base + 4 + i + 1, r, x);
        }
        for i in 0..4 {
            self.branch(base + i, base + 4 + i, r, x);
        }
    }
}

/// Two buses: slack plus a PQ bus over a purely reactive branch. The
/// smallest valid grid.
pub fn two_bus() -> GridModel {
    let mut b = GridBuilder::new(10.0);
    b.grid.buses.push(slack(0));
    b.grid.buses.push(primary(1));
    b.branch(0, 1, 0.0, 0.1);
    b.load(1, 0.5, 0.2);
    b.grid
}

/// Four buses behind one transformer, tuned so the cross-couplings of the
/// two DGs sit between 0.3 and 0.5 after normalization: an epsilon sweep
/// over [0.3, 0.5] flips the partition from one subnetwork to two.
pub fn grid4() -> GridModel {
    let mut b = GridBuilder::new(10.0);
    b.grid.buses.push(slack(0));
    b.grid.buses.push(secondary(1));
    b.grid.buses.push(secondary(2));
    b.grid.buses.push(secondary(3));
    // Shared path (transformer) vs private branches sets the coupling ratio.
    b.grid.transformers.push(Transformer {
        id: 0,
        primary_bus: 0,
        secondary_bus: 1,
        r: 0.012,
        x: 0.08,
        tap: 1.0,
        theta_shift: 0.0,
        has_protector: false,
    });
    b.next_transformer = 1;
    b.branch(1, 2, 0.033, 0.12);
    b.branch(1, 3, 0.033, 0.12);
    b.load(2, 0.1, 0.04);
    b.load(3, 0.1, 0.04);
    b.dg(0, 2, 0.05, 0.0, 0.25);
    b.dg(1, 3, 0.05, 0.0, 0.25);
    b.grid
}

/// The 30-bus heavily meshed fixture: a slack bus, two primary feeders and
/// three meshed secondary clusters (A and B on feeder one, bridged by a weak
/// tie; C alone on feeder two, so feeder-two events cannot couple into A/B).
/// 6 DGs, 4 transformers, 30 buses.
pub fn grid30() -> GridModel {
    let mut b = GridBuilder::new(10.0);
    b.grid.buses.push(slack(0));
    for id in 1..=5 {
        b.grid.buses.push(primary(id));
    }
    // Feeder one: 0-1-2-3 with a 1-3 loop; feeder two: 0-4-5.
    b.branch(0, 1, 0.002, 0.01);
    b.branch(1, 2, 0.002, 0.01);
    b.branch(2, 3, 0.002, 0.01);
    b.branch(1, 3, 0.003, 0.015);
    b.branch(0, 4, 0.002, 0.01);
    b.branch(4, 5, 0.002, 0.01);

    let (r, x) = (0.06, 0.04);
    b.ladder_cluster(6, r, x); // cluster A: 6..13
    b.ladder_cluster(14, r, x); // cluster B: 14..21
    b.ladder_cluster(22, r, x); // cluster C: 22..29

    b.transformer(1, 6, false); // A, head column top
    b.transformer(2, 10, false); // A, head column bottom
    b.transformer(3, 14, false); // B
    b.transformer(5, 22, false); // C

    // Weak tie bridging A's far corner to B's entry row.
    b.branch(13, 18, 0.25, 0.18);

    for bus in 6..30 {
        b.load(bus, 0.088, 0.035);
    }
    // Heavier corners pull the far ends of each cluster down.
    b.load(13, 0.08, 0.032);
    b.load(9, 0.03, 0.012);
    b.load(20, 0.045, 0.018);
    b.load(21, 0.04, 0.016);
    b.load(28, 0.045, 0.018);
    b.load(29, 0.04, 0.016);

    b.dg(0, 7, 0.12, 0.03, 0.34); // A, near the head infeeds
    b.dg(1, 13, 0.28, 0.09, 0.34); // A, far corner
    b.dg(2, 16, 0.25, 0.07, 0.34); // B, top row
    b.dg(3, 20, 0.25, 0.07, 0.34); // B, bottom row
    b.dg(4, 24, 0.25, 0.07, 0.34); // C, top row
    b.dg(5, 28, 0.25, 0.07, 0.34); // C, bottom row
    b.grid
}

/// A 28-bus secondary ring fed at two antipodal points, with 8 DGs spaced
/// around it. Couplings decay with ring distance in both directions, so at
/// the scenario epsilon the whole ring is a single subnetwork while each bus
/// is covered by only the few DGs electrically closest to it.
pub fn grid_cs1() -> GridModel {
    let mut b = GridBuilder::new(10.0);
    b.grid.buses.push(slack(0));
    b.grid.buses.push(primary(1));
    b.grid.buses.push(primary(2));
    b.branch(0, 1, 0.002, 0.01);
    b.branch(0, 2, 0.002, 0.01);
    // Ring of 28 buses: 3..=30 with the closing edge 30-3.
    let (r, x) = (0.05, 0.035);
    for bus in 3..=30 {
        b.grid.buses.push(secondary(bus));
    }
    for bus in 3..30 {
        // The stretch past bus 27 is weaker cable: electrically remote.
        let (rr, xx) = match bus {
            27 => (0.09, 0.063),
            28 | 29 => (0.16, 0.11),
            _ => (r, x),
        };
        b.branch(bus, bus + 1, rr, xx);
    }
    b.branch(30, 3, 0.09, 0.063);
    b.transformer(1, 3, false);
    b.transformer(2, 17, false);
    for bus in 3..=30 {
        b.load(bus, 0.042, 0.017);
    }
    b.load(28, 0.01, 0.004);
    b.load(29, 0.15, 0.06);
    b.load(30, 0.01, 0.004);

    // Two DGs on the left arc, six packed along the right arc: the right
    // arc groups into one large subnetwork.
    b.dg(0, 6, 0.15, 0.03, 0.3);
    b.dg(1, 12, 0.15, 0.03, 0.3);
    b.dg(2, 19, 0.12, 0.02, 0.3);
    b.dg(3, 21, 0.12, 0.02, 0.3);
    b.dg(4, 23, 0.12, 0.02, 0.3);
    b.dg(5, 25, 0.12, 0.02, 0.3);
    b.dg(6, 27, 0.12, 0.02, 0.3);
    b.dg(7, 29, 0.22, 0.05, 0.3);
    b.grid
}

/// Small secondary mesh behind a protector transformer operating near
/// reverse flow: UPF injections push toward tripping it, so the protector
/// constraint binds during regulation.
pub fn grid_protector() -> GridModel {
    let mut b = GridBuilder::new(10.0);
    b.grid.buses.push(slack(0));
    b.grid.buses.push(primary(1));
    b.branch(0, 1, 0.002, 0.01);
    // 2x3 ladder: top 2,3,4; bottom 5,6,7.
    let (r, x) = (0.06, 0.04);
    for id in 2..8 {
        b.grid.buses.push(secondary(id));
    }
    b.branch(2, 3, r, x);
    b.branch(3, 4, r, x);
    b.branch(5, 6, r, x);
    b.branch(6, 7, r, x);
    b.branch(2, 5, r, x);
    b.branch(3, 6, r, x);
    b.branch(4, 7, r, x);
    b.grid.transformers.push(Transformer {
        id: 0,
        primary_bus: 1,
        secondary_bus: 2,
        r: 0.008,
        x: 0.06,
        tap: 1.0,
        theta_shift: 0.0,
        has_protector: true,
    });
    b.next_transformer = 1;
    for bus in 2..8 {
        b.load(bus, 0.06, 0.024);
    }
    b.load(7, 0.03, 0.012);
    // UPF units with plenty of active headroom.
    b.grid.dgs.push(DgUnit {
        id: 0,
        bus: 4,
        mode: DgMode::Upf,
        p0: 0.04,
        q0: 0.0,
        p_cap: 0.5,
        q_cap: 0.0,
        q_abs_cap: 0.0,
        available: true,
    });
    b.grid.dgs.push(DgUnit {
        id: 1,
        bus: 6,
        mode: DgMode::Upf,
        p0: 0.04,
        q0: 0.0,
        p_cap: 0.45,
        q_cap: 0.0,
        q_abs_cap: 0.0,
        available: true,
    });
    b.grid
}

/// All named fixtures, matching the file names under `fixtures/`.
pub fn all() -> Vec<(&'static str, GridModel)> {
    vec![
        ("two_bus", two_bus()),
        ("grid4", grid4()),
        ("grid30", grid30()),
        ("grid_cs1", grid_cs1()),
        ("grid_protector", grid_protector()),
    ]
}
