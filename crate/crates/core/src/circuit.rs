//! Phasor-domain model of the 600 Hz component circuit of a DC feed with a
//! single pole-to-earth fault, and the closed-form fault locator for the
//! train-beyond-fault case.
//!
//! Topology (earth is the reference node, ideal):
//!
//! ```text
//!   P0 ──z_r·a── F ──z_r·b── Tp        (positive rail; F and Tp swap
//!   │            │           │          order when the fault lies beyond
//!  R_p          R_f         z_t         the train)
//!   │            │           │
//!  earth       earth         Tn
//!   │                        │
//!  R_n                       │
//!   │                        │
//!   N0 ─────────z_r·L_t──────┘         (negative rail)
//!
//!   source: E in series with Z_s, from N0 (−) to P0 (+)
//! ```

use num_complex::Complex64;

use crate::{Error, Result};

/// A 600 Hz quantity as a complex amplitude (V, A or Ω).
pub type Phasor = Complex64;

/// Segments shorter than this collapse into a single node.
pub const MERGE_TOLERANCE_KM: f64 = 1e-9;

/// Default threshold on |i_p − i_n| below which no fault is reported.
pub const DEFAULT_EPS_CURRENT: f64 = 1e-9;

/// DC output of the traction rectifiers.
pub const NOMINAL_DC_VOLTAGE: f64 = 750.0;

/// Ratio of the fundamental 12-pulse ripple amplitude to the DC mean.
pub const TWELVE_PULSE_RIPPLE_RATIO: f64 = 2.0 / 143.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkScenario {
    pub line_length_km: f64,
    pub z_rail_per_km: Phasor,
    pub z_train: Phasor,
    pub train_pos_km: f64,
    pub fault_pos_km: f64,
    pub fault_resistance_ohm: f64,
    pub bleed_pos_ohm: f64,
    pub bleed_neg_ohm: f64,
    pub source_emf: Phasor,
    pub source_impedance: Phasor,
}

impl Default for NetworkScenario {
    fn default() -> Self {
        Self {
            line_length_km: 10.0,
            z_rail_per_km: Phasor::new(0.03, 0.45),
            z_train: Phasor::new(1.5, 12.0),
            train_pos_km: 8.0,
            fault_pos_km: 5.0,
            fault_resistance_ohm: 100.0,
            bleed_pos_ohm: 200.0,
            bleed_neg_ohm: 100.0,
            source_emf: Phasor::new(NOMINAL_DC_VOLTAGE * TWELVE_PULSE_RIPPLE_RATIO, 0.0),
            source_impedance: Phasor::new(0.02, 0.35),
        }
    }
}

fn finite(z: Phasor) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

impl NetworkScenario {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidScenario(msg));
        let reals = [
            ("line_length_km", self.line_length_km),
            ("train_pos_km", self.train_pos_km),
            ("fault_pos_km", self.fault_pos_km),
            ("fault_resistance_ohm", self.fault_resistance_ohm),
            ("bleed_pos_ohm", self.bleed_pos_ohm),
            ("bleed_neg_ohm", self.bleed_neg_ohm),
        ];
        for (name, v) in reals {
            if !v.is_finite() {
                return bad(format!("{name} is not finite"));
            }
        }
        let phasors = [
            ("z_rail_per_km", self.z_rail_per_km),
            ("z_train", self.z_train),
            ("source_emf", self.source_emf),
            ("source_impedance", self.source_impedance),
        ];
        for (name, z) in phasors {
            if !finite(z) {
                return bad(format!("{name} is not finite"));
            }
        }
        if !(0.0..=self.line_length_km).contains(&self.fault_pos_km) {
            return bad(format!(
                "fault position {} km outside [0, {}]",
                self.fault_pos_km, self.line_length_km
            ));
        }
        if !(self.train_pos_km > 0.0 && self.train_pos_km <= self.line_length_km) {
            return bad(format!(
                "train position {} km outside (0, {}]",
                self.train_pos_km, self.line_length_km
            ));
        }
        if self.fault_resistance_ohm <= 0.0 {
            return bad("fault resistance must be positive".into());
        }
        if self.bleed_pos_ohm <= 0.0 || self.bleed_neg_ohm <= 0.0 {
            return bad("bleed resistances must be positive".into());
        }
        if self.z_rail_per_km.norm() == 0.0 {
            return bad("rail impedance must be nonzero".into());
        }
        Ok(())
    }

    pub fn with_fault_at(mut self, fault_pos_km: f64) -> Self {
        self.fault_pos_km = fault_pos_km;
        self
    }
}

/// Substation-side observables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementSet {
    /// Positive pole to earth.
    pub v_p: Phasor,
    /// Negative pole to earth.
    pub v_n: Phasor,
    /// Current leaving the substation on the positive rail.
    pub i_p: Phasor,
    /// Current returning to the substation on the negative rail.
    pub i_n: Phasor,
    /// Rectifier loop current.
    pub i_d: Phasor,
}

impl MeasurementSet {
    pub fn scale(&self, k: Phasor) -> Self {
        Self {
            v_p: self.v_p * k,
            v_n: self.v_n * k,
            i_p: self.i_p * k,
            i_n: self.i_n * k,
            i_d: self.i_d * k,
        }
    }

    /// `(|v_p|, |v_n|, |i_p|, |i_n|)`
    pub fn magnitudes(&self) -> [f64; 4] {
        [self.v_p.norm(), self.v_n.norm(), self.i_p.norm(), self.i_n.norm()]
    }
}

// Physical node labels. Earth is node 0.
const EARTH: usize = 0;
const P0: usize = 1;
const N0: usize = 2;
const FAULT: usize = 3;
const TRAIN_P: usize = 4;
const TRAIN_N: usize = 5;
const NODE_COUNT: usize = 6;

#[derive(Debug, Clone, Copy)]
struct Branch {
    from: usize,
    to: usize,
    impedance: Phasor,
}

/// Node voltages and branch set of one solved scenario.
#[derive(Debug, Clone)]
pub struct NetworkSolution {
    scenario: NetworkScenario,
    /// Voltage of every physical node (merged nodes share a value).
    voltages: [Phasor; NODE_COUNT],
    /// Representative of each physical node after merging.
    group: [usize; NODE_COUNT],
    branches: Vec<Branch>,
    i_d: Phasor,
}

struct Netlist {
    branches: Vec<Branch>,
    group: [usize; NODE_COUNT],
}

fn find(parent: &mut [usize; NODE_COUNT], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn build_netlist(s: &NetworkScenario) -> Netlist {
    let zr = s.z_rail_per_km;
    let mut parent = [0, 1, 2, 3, 4, 5];
    let mut branches = Vec::with_capacity(8);
    let mut series = |parent: &mut [usize; NODE_COUNT], a: usize, b: usize, z: Phasor, zero: bool| {
        if zero {
            let (ra, rb) = (find(parent, a), find(parent, b));
            if ra != rb {
                // keep the lower label as representative so earth stays 0
                parent[ra.max(rb)] = ra.min(rb);
            }
        } else {
            branches.push(Branch { from: a, to: b, impedance: z });
        }
    };

    let (lf, lt) = (s.fault_pos_km, s.train_pos_km);
    if lf <= lt {
        series(&mut parent, P0, FAULT, zr * lf, lf < MERGE_TOLERANCE_KM);
        series(&mut parent, FAULT, TRAIN_P, zr * (lt - lf), lt - lf < MERGE_TOLERANCE_KM);
    } else {
        series(&mut parent, P0, TRAIN_P, zr * lt, false);
        series(&mut parent, TRAIN_P, FAULT, zr * (lf - lt), lf - lt < MERGE_TOLERANCE_KM);
    }
    series(&mut parent, TRAIN_P, TRAIN_N, s.z_train, s.z_train.norm() == 0.0);
    series(&mut parent, TRAIN_N, N0, zr * lt, false);
    series(&mut parent, FAULT, EARTH, s.fault_resistance_ohm.into(), false);
    series(&mut parent, P0, EARTH, s.bleed_pos_ohm.into(), false);
    series(&mut parent, N0, EARTH, s.bleed_neg_ohm.into(), false);

    let mut group = [0; NODE_COUNT];
    for (i, g) in group.iter_mut().enumerate() {
        *g = find(&mut parent, i);
    }
    Netlist { branches, group }
}

/// Dense complex Gaussian elimination with partial pivoting, in place.
/// `a` is row-major `n × n`.
pub(crate) fn solve_dense(a: &mut [Phasor], b: &mut [Phasor], n: usize) -> Result<Vec<Phasor>> {
    debug_assert_eq!(a.len(), n * n);
    let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(Error::UnsolvableNetwork("zero admittance matrix".into()));
    }
    for k in 0..n {
        let (pivot_row, pivot_mag) = (k..n)
            .map(|i| (i, a[i * n + k].norm()))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pivot_mag <= scale * 1e-14 {
            return Err(Error::UnsolvableNetwork(format!(
                "singular admittance matrix (pivot {pivot_mag:e} at column {k})"
            )));
        }
        if pivot_row != k {
            for j in 0..n {
                a.swap(k * n + j, pivot_row * n + j);
            }
            b.swap(k, pivot_row);
        }
        let pivot = a[k * n + k];
        for i in (k + 1)..n {
            let factor = a[i * n + k] / pivot;
            if factor == Phasor::new(0.0, 0.0) {
                continue;
            }
            for j in k..n {
                let akj = a[k * n + j];
                a[i * n + j] -= factor * akj;
            }
            let bk = b[k];
            b[i] -= factor * bk;
        }
    }
    let mut x = vec![Phasor::new(0.0, 0.0); n];
    for i in (0..n).rev() {
        let mut acc = b[i];
        for j in (i + 1)..n {
            acc -= a[i * n + j] * x[j];
        }
        x[i] = acc / a[i * n + i];
    }
    if x.iter().any(|z| !finite(*z)) {
        return Err(Error::UnsolvableNetwork("non-finite node voltage".into()));
    }
    Ok(x)
}

/// Solves the scenario by modified nodal analysis and returns the full
/// solution (use [`NetworkSolution::measurements`] for the observables).
pub fn solve(scenario: &NetworkScenario) -> Result<NetworkSolution> {
    scenario.validate()?;
    let Netlist { branches, group } = build_netlist(scenario);

    // compact unknown index for every non-earth group representative
    let mut index = [usize::MAX; NODE_COUNT];
    let mut n_nodes = 0;
    for node in 0..NODE_COUNT {
        let g = group[node];
        if g != group[EARTH] && index[g] == usize::MAX {
            index[g] = n_nodes;
            n_nodes += 1;
        }
    }
    let unknown = |node: usize| {
        let g = group[node];
        (g != group[EARTH]).then(|| index[g])
    };

    // one extra unknown for the source current
    let n = n_nodes + 1;
    let src = n_nodes;
    let mut a = vec![Phasor::new(0.0, 0.0); n * n];
    let mut rhs = vec![Phasor::new(0.0, 0.0); n];

    for br in &branches {
        let y = br.impedance.inv();
        let (u, v) = (unknown(br.from), unknown(br.to));
        if let Some(u) = u {
            a[u * n + u] += y;
        }
        if let Some(v) = v {
            a[v * n + v] += y;
        }
        if let (Some(u), Some(v)) = (u, v) {
            if u != v {
                a[u * n + v] -= y;
                a[v * n + u] -= y;
            } else {
                a[u * n + u] -= y * 2.0;
            }
        }
    }
    let p = unknown(P0).expect("positive bus is never earthed");
    let q = unknown(N0).expect("negative bus is never earthed");
    // i_d is injected into P0 and drawn from N0
    a[p * n + src] -= Phasor::new(1.0, 0.0);
    a[q * n + src] += Phasor::new(1.0, 0.0);
    // V(P0) − V(N0) − Z_s·i_d = E
    a[src * n + p] += Phasor::new(1.0, 0.0);
    a[src * n + q] -= Phasor::new(1.0, 0.0);
    a[src * n + src] -= scenario.source_impedance;
    rhs[src] = scenario.source_emf;

    let x = solve_dense(&mut a, &mut rhs, n)?;

    let mut voltages = [Phasor::new(0.0, 0.0); NODE_COUNT];
    for (node, v) in voltages.iter_mut().enumerate() {
        if let Some(u) = unknown(node) {
            *v = x[u];
        }
    }
    Ok(NetworkSolution {
        scenario: *scenario,
        voltages,
        group,
        branches,
        i_d: x[src],
    })
}

/// Measurements for one scenario.
pub fn solve_network(scenario: &NetworkScenario) -> Result<MeasurementSet> {
    Ok(solve(scenario)?.measurements())
}

impl NetworkSolution {
    pub fn scenario(&self) -> &NetworkScenario {
        &self.scenario
    }

    pub fn measurements(&self) -> MeasurementSet {
        let s = &self.scenario;
        let v = &self.voltages;
        // the negative rail has no leakage, so its substation current is
        // also the train current
        let i_n = (v[TRAIN_N] - v[N0]) / (s.z_rail_per_km * s.train_pos_km);
        let i_fault = v[FAULT] / s.fault_resistance_ohm;
        MeasurementSet {
            v_p: v[P0],
            v_n: v[N0],
            i_p: i_fault + i_n,
            i_n,
            i_d: self.i_d,
        }
    }

    fn branch_current(&self, br: &Branch) -> Phasor {
        (self.voltages[br.from] - self.voltages[br.to]) / br.impedance
    }

    /// Largest magnitude among all branch currents, the source included.
    pub fn max_branch_current(&self) -> f64 {
        self.branches
            .iter()
            .map(|b| self.branch_current(b).norm())
            .fold(self.i_d.norm(), f64::max)
    }

    /// Net current leaving each (merged) node, earth excluded. Computed from
    /// node voltages and branch impedances only.
    pub fn kcl_residuals(&self) -> Vec<Phasor> {
        let mut net = [Phasor::new(0.0, 0.0); NODE_COUNT];
        for br in &self.branches {
            let i = self.branch_current(br);
            net[self.group[br.from]] += i;
            net[self.group[br.to]] -= i;
        }
        net[self.group[P0]] -= self.i_d;
        net[self.group[N0]] += self.i_d;
        (0..NODE_COUNT)
            .filter(|&n| self.group[n] == n && n != self.group[EARTH])
            .map(|n| net[n])
            .collect()
    }

    /// Worst KCL residual relative to the largest branch current.
    pub fn kcl_relative_residual(&self) -> f64 {
        let worst = self.kcl_residuals().iter().map(|z| z.norm()).fold(0.0, f64::max);
        let scale = self.max_branch_current();
        if scale == 0.0 {
            worst
        } else {
            worst / scale
        }
    }
}

/// Known line and train parameters needed by the closed-form locator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocatorParams {
    pub z_rail_per_km: Phasor,
    pub z_train: Phasor,
    pub train_pos_km: f64,
    pub line_length_km: f64,
    pub eps_current: f64,
}

impl LocatorParams {
    pub fn from_scenario(s: &NetworkScenario) -> Self {
        Self {
            z_rail_per_km: s.z_rail_per_km,
            z_train: s.z_train,
            train_pos_km: s.train_pos_km,
            line_length_km: s.line_length_km,
            eps_current: DEFAULT_EPS_CURRENT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultEstimate {
    pub distance_km: f64,
    /// Full complex quotient before taking the real part.
    pub quotient: Phasor,
    /// False when the imaginary part exceeds 1e-6 of the magnitude.
    pub consistent: bool,
    /// False when the distance is negative or beyond the line end.
    pub in_range: bool,
}

/// Closed-form distance to the fault, valid when the train is beyond it:
///
/// `L_f = Re[(v_p − v_n − Z_t·i_n − 2·L_t·Z_r·i_n) / (Z_r·(i_p − i_n))]`
pub fn analytic_fault_location(m: &MeasurementSet, params: &LocatorParams) -> Result<FaultEstimate> {
    let diff = m.i_p - m.i_n;
    if diff.norm() <= params.eps_current {
        return Err(Error::NoDetectableFault(diff.norm()));
    }
    let zr = params.z_rail_per_km;
    let numerator =
        m.v_p - m.v_n - params.z_train * m.i_n - zr * m.i_n * (2.0 * params.train_pos_km);
    let quotient = numerator / (zr * diff);
    let distance_km = quotient.re;
    Ok(FaultEstimate {
        distance_km,
        quotient,
        consistent: quotient.im.abs() <= 1e-6 * quotient.norm(),
        in_range: (0.0..=params.line_length_km).contains(&distance_km),
    })
}

/// `|R_p(i_d − i_p) + R_n(i_d − i_n) − (v_p − v_n)|` in volts.
pub fn eq1_consistency(m: &MeasurementSet, bleed_pos_ohm: f64, bleed_neg_ohm: f64) -> f64 {
    let lhs = (m.i_d - m.i_p) * bleed_pos_ohm + (m.i_d - m.i_n) * bleed_neg_ohm;
    (lhs - (m.v_p - m.v_n)).norm()
}
