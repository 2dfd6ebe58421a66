//! Nonlinear function families `f`, `h`, `b(t)` and the control inputs built
//! from them.
//!
//! The families are closed enums so that antiderivatives and sector bounds
//! have exact or well-conditioned forms.

use serde::{Deserialize, Serialize};

use crate::dynamics::{LeaderState, SystemState};
use crate::graph::Topology;

/// Velocity feedback nonlinearity `f`, applied componentwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", from = "RawVelocityShape")]
pub enum VelocityShape {
    /// `f(z) = z`
    Linear,
    /// `f(z) = z + omega * sin(z)`
    SinePerturbed { omega: f64 },
}

impl VelocityShape {
    pub fn eval(&self, z: f64) -> f64 {
        match *self {
            VelocityShape::Linear => z,
            VelocityShape::SinePerturbed { omega } => z + omega * z.sin(),
        }
    }

    /// `f'(z)`. Exposed for analysis; no assumption constrains it.
    pub fn derivative(&self, z: f64) -> f64 {
        match *self {
            VelocityShape::Linear => 1.0,
            VelocityShape::SinePerturbed { omega } => 1.0 + omega * z.cos(),
        }
    }

    /// `f(z)/z`, continuously extended by `f'(0)` at the origin.
    pub fn slope_ratio(&self, z: f64) -> f64 {
        if z == 0.0 {
            self.derivative(0.0)
        } else {
            self.eval(z) / z
        }
    }

    pub fn is_linear(&self) -> bool {
        match *self {
            VelocityShape::Linear => true,
            VelocityShape::SinePerturbed { omega } => omega == 0.0,
        }
    }
}

/// Position coupling nonlinearity `h`, applied componentwise to `p_j - p_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", from = "RawCouplingShape")]
pub enum CouplingShape {
    /// `h(z) = z`
    Linear,
    /// `h(z) = z + z^3`
    LinearPlusCubic,
}

impl CouplingShape {
    pub fn eval(&self, z: f64) -> f64 {
        match self {
            CouplingShape::Linear => z,
            CouplingShape::LinearPlusCubic => z + z * z * z,
        }
    }

    /// `H(x) = integral of h from 0 to x`. Even, nonnegative, `H(0) = 0`.
    pub fn antiderivative(&self, x: f64) -> f64 {
        let x2 = x * x;
        match self {
            CouplingShape::Linear => 0.5 * x2,
            CouplingShape::LinearPlusCubic => 0.5 * x2 + 0.25 * x2 * x2,
        }
    }
}

// Unit variants of internally tagged enums accept stray keys; these mirrors
// use empty struct variants so unknown keys are rejected.
#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawVelocityShape {
    Linear {},
    SinePerturbed { omega: f64 },
}

impl From<RawVelocityShape> for VelocityShape {
    fn from(raw: RawVelocityShape) -> Self {
        match raw {
            RawVelocityShape::Linear {} => VelocityShape::Linear,
            RawVelocityShape::SinePerturbed { omega } => VelocityShape::SinePerturbed { omega },
        }
    }
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawCouplingShape {
    Linear {},
    LinearPlusCubic {},
}

impl From<RawCouplingShape> for CouplingShape {
    fn from(raw: RawCouplingShape) -> Self {
        match raw {
            RawCouplingShape::Linear {} => CouplingShape::Linear,
            RawCouplingShape::LinearPlusCubic {} => CouplingShape::LinearPlusCubic,
        }
    }
}

/// Time-varying velocity gain `b(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GainProfile {
    /// `b(t) = b0`
    Constant { b0: f64 },
    /// `b(t) = b0 + a * cos(t)`
    Cosine { b0: f64, a: f64 },
}

impl GainProfile {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            GainProfile::Constant { b0 } => b0,
            GainProfile::Cosine { b0, a } => b0 + a * t.cos(),
        }
    }

    /// Closed-form `(inf, sup)` of `b(t)` over all `t`.
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            GainProfile::Constant { b0 } => (b0, b0),
            GainProfile::Cosine { b0, a } => (b0 - a.abs(), b0 + a.abs()),
        }
    }

    /// The constant value, if the profile does not depend on time.
    pub fn as_constant(&self) -> Option<f64> {
        match *self {
            GainProfile::Constant { b0 } => Some(b0),
            GainProfile::Cosine { b0, a: 0.0 } => Some(b0),
            GainProfile::Cosine { .. } => None,
        }
    }
}

/// Protocol definition: shared shapes plus one gain profile per agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSpec {
    pub f: VelocityShape,
    pub h: CouplingShape,
    pub gains: Vec<GainProfile>,
    /// Velocity shape of the leader. Falls back to `f` when absent.
    pub leader_f: Option<VelocityShape>,
    pub leader_gain: Option<GainProfile>,
}

impl ProtocolSpec {
    pub fn leader_shape(&self) -> VelocityShape {
        self.leader_f.unwrap_or(self.f)
    }
}

pub fn eval_f(shape: VelocityShape, z: f64) -> f64 {
    shape.eval(z)
}

pub fn eval_h(shape: CouplingShape, z: f64) -> f64 {
    shape.eval(z)
}

pub fn antiderivative_h(shape: CouplingShape, x: f64) -> f64 {
    shape.antiderivative(x)
}

pub fn eval_b(profile: GainProfile, t: f64) -> f64 {
    profile.eval(t)
}

/// Sampling grid over `z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZGrid {
    pub z_min: f64,
    pub z_max: f64,
    pub samples: usize,
}

impl ZGrid {
    fn points(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.samples.max(2);
        let step = (self.z_max - self.z_min) / (n - 1) as f64;
        (0..n).map(move |k| self.z_min + step * k as f64)
    }
}

/// Grids used by [`validate_assumptions_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationGrids {
    /// Grid for the sign and oddness checks on `f` and `h`.
    pub assumptions: ZGrid,
    /// Grid for the sector constants of `f`.
    pub sector: ZGrid,
}

impl Default for ValidationGrids {
    fn default() -> Self {
        ValidationGrids {
            assumptions: ZGrid {
                z_min: -10.0,
                z_max: 10.0,
                samples: 10_000,
            },
            sector: ZGrid {
                z_min: -50.0,
                z_max: 50.0,
                samples: 1_000_000,
            },
        }
    }
}

/// Sector bounds `k <= f(z)/z <= k_bar`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sector {
    pub k: f64,
    pub k_bar: f64,
}

impl Sector {
    pub fn combine(self, other: Sector) -> Sector {
        Sector {
            k: self.k.min(other.k),
            k_bar: self.k_bar.max(other.k_bar),
        }
    }
}

/// Computes the sector constants of `f` over `grid`: a uniform scan followed
/// by golden-section refinement around the best grid points.
pub fn sector_bounds(shape: VelocityShape, grid: &ZGrid) -> Sector {
    if shape.is_linear() {
        return Sector { k: 1.0, k_bar: 1.0 };
    }
    let ratio = |z: f64| shape.slope_ratio(z);
    let points: Vec<f64> = grid.points().collect();
    let (mut i_min, mut i_max) = (0, 0);
    let (mut r_min, mut r_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for (idx, &z) in points.iter().enumerate() {
        let r = ratio(z);
        if r < r_min {
            r_min = r;
            i_min = idx;
        }
        if r > r_max {
            r_max = r;
            i_max = idx;
        }
    }
    let bracket = |idx: usize| {
        let lo = points[idx.saturating_sub(1)];
        let hi = points[(idx + 1).min(points.len() - 1)];
        (lo, hi)
    };
    let (lo, hi) = bracket(i_min);
    let k = golden_section(ratio, lo, hi).min(r_min);
    let (lo, hi) = bracket(i_max);
    let k_bar = (-golden_section(|z| -ratio(z), lo, hi)).max(r_max);
    // The extension at z = 0 is a limit value; keep it inside the sector when
    // the grid brackets the origin.
    let (k, k_bar) = if grid.z_min <= 0.0 && grid.z_max >= 0.0 {
        let r0 = ratio(0.0);
        (k.min(r0), k_bar.max(r0))
    } else {
        (k, k_bar)
    };
    Sector { k, k_bar }
}

/// Minimum value of `g` on `[lo, hi]`, assuming unimodality.
fn golden_section(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut g1, mut g2) = (g(x1), g(x2));
    for _ in 0..200 {
        if hi - lo <= 1e-14 * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
        if g1 < g2 {
            hi = x2;
            x2 = x1;
            g2 = g1;
            x1 = hi - inv_phi * (hi - lo);
            g1 = g(x1);
        } else {
            lo = x1;
            x1 = x2;
            g1 = g2;
            x2 = lo + inv_phi * (hi - lo);
            g2 = g(x2);
        }
    }
    g1.min(g2).min(g(lo)).min(g(hi))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCheck {
    pub assumption: String,
    pub passed: bool,
    /// Failures of this check reject the scenario.
    pub blocking: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<AssumptionCheck>,
    /// Sector of the agents' `f`.
    pub sector: Sector,
    /// Sector of the leader's `f`, in leader mode.
    pub leader_sector: Option<Sector>,
    /// `(b, b_bar)` over every agent gain and the leader gain.
    pub gain_bounds: (f64, f64),
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn blocking_failures(&self) -> impl Iterator<Item = &AssumptionCheck> {
        self.checks.iter().filter(|c| c.blocking && !c.passed)
    }

    /// Combined sector over agents and leader.
    pub fn combined_sector(&self) -> Sector {
        match self.leader_sector {
            Some(s) => self.sector.combine(s),
            None => self.sector,
        }
    }
}

pub fn validate_assumptions(spec: &ProtocolSpec) -> ValidationReport {
    validate_assumptions_with(spec, &ValidationGrids::default())
}

pub fn validate_assumptions_with(spec: &ProtocolSpec, grids: &ValidationGrids) -> ValidationReport {
    let mut checks = Vec::new();

    let mut shapes = vec![("f", spec.f)];
    if spec.leader_gain.is_some() || spec.leader_f.is_some() {
        shapes.push(("f_L", spec.leader_shape()));
    }
    for (name, shape) in &shapes {
        let bad = grids
            .assumptions
            .points()
            .find(|&z| z != 0.0 && !(z * shape.eval(z) > 0.0));
        let zero_ok = shape.eval(0.0) == 0.0;
        checks.push(AssumptionCheck {
            assumption: format!("{name} sign condition"),
            passed: zero_ok && bad.is_none(),
            blocking: false,
            detail: match (zero_ok, bad) {
                (false, _) => format!("{name}(0) != 0"),
                (true, Some(z)) => format!("z*{name}(z) <= 0 at z = {z}"),
                (true, None) => format!("{name}(0) = 0 and z*{name}(z) > 0 on the grid"),
            },
        });
    }

    let h = spec.h;
    let odd_violation = grids.assumptions.points().find(|&z| h.eval(-z) != -h.eval(z));
    let sign_violation = grids.assumptions.points().find(|&z| z != 0.0 && !(z * h.eval(z) > 0.0));
    let h_zero = h.eval(0.0) == 0.0;
    checks.push(AssumptionCheck {
        assumption: "h oddness and sign".into(),
        passed: h_zero && odd_violation.is_none() && sign_violation.is_none(),
        blocking: false,
        detail: if let Some(z) = odd_violation {
            format!("h(-z) != -h(z) at z = {z}")
        } else if let Some(z) = sign_violation {
            format!("z*h(z) <= 0 at z = {z}")
        } else if !h_zero {
            "h(0) != 0".into()
        } else {
            "h odd, h(0) = 0 and z*h(z) > 0 on the grid".into()
        },
    });

    let mut profiles: Vec<(String, GainProfile)> = spec
        .gains
        .iter()
        .enumerate()
        .map(|(i, g)| (format!("b_{}", i + 1), *g))
        .collect();
    if let Some(g) = spec.leader_gain {
        profiles.push(("b_L".into(), g));
    }
    let mut gain_lo = f64::INFINITY;
    let mut gain_hi = f64::NEG_INFINITY;
    let mut failures = Vec::new();
    for (name, g) in &profiles {
        let (lo, hi) = g.bounds();
        if !(lo > 0.0) || !hi.is_finite() {
            failures.push(format!("{name}: inf b(t) = {lo}"));
        }
        gain_lo = gain_lo.min(lo);
        gain_hi = gain_hi.max(hi);
    }
    checks.push(AssumptionCheck {
        assumption: "gain positivity".into(),
        passed: failures.is_empty(),
        blocking: true,
        detail: if failures.is_empty() {
            format!("{gain_lo} <= b(t) <= {gain_hi} for every profile")
        } else {
            failures.join("; ")
        },
    });

    let sector = sector_bounds(spec.f, &grids.sector);
    let leader_sector = spec
        .leader_gain
        .map(|_| sector_bounds(spec.leader_shape(), &grids.sector));

    ValidationReport {
        checks,
        sector,
        leader_sector,
        gain_bounds: (gain_lo, gain_hi),
        warnings: Vec::new(),
    }
}

/// Writes `-b_i(t) f(q_i) + sum_j c_ij h(p_j - p_i)` for agent `i` into `out`,
/// plus `c_iL h(p_L - p_i)` when `leader_p` is given.
#[allow(clippy::too_many_arguments)]
pub(crate) fn control_into(
    i: usize,
    n_dims: usize,
    p: &[f64],
    q: &[f64],
    leader_p: Option<&[f64]>,
    t: f64,
    topo: &Topology,
    spec: &ProtocolSpec,
    out: &mut [f64],
) {
    let b = spec.gains[i].eval(t);
    let base = i * n_dims;
    for l in 0..n_dims {
        out[l] = -b * spec.f.eval(q[base + l]);
    }
    for &(j, c) in topo.neighbors(i) {
        let other = j * n_dims;
        for l in 0..n_dims {
            out[l] += c * spec.h.eval(p[other + l] - p[base + l]);
        }
    }
    if let Some(pl) = leader_p {
        let c = topo.leader_weight(i);
        if c != 0.0 {
            for l in 0..n_dims {
                out[l] += c * spec.h.eval(pl[l] - p[base + l]);
            }
        }
    }
}

/// Control input `u_i1 + u_i2` of agent `i` without a leader.
pub fn control_leaderless(i: usize, state: &SystemState, t: f64, topo: &Topology, spec: &ProtocolSpec) -> Vec<f64> {
    let mut out = vec![0.0; state.n_dims];
    control_into(i, state.n_dims, &state.p, &state.q, None, t, topo, spec, &mut out);
    out
}

/// Control input of agent `i` including the leader coupling `c_iL h(p_L - p_i)`.
pub fn control_leader(
    i: usize,
    state: &SystemState,
    leader: &LeaderState,
    t: f64,
    topo: &Topology,
    spec: &ProtocolSpec,
) -> Vec<f64> {
    let mut out = vec![0.0; state.n_dims];
    control_into(
        i,
        state.n_dims,
        &state.p,
        &state.q,
        Some(&leader.p),
        t,
        topo,
        spec,
        &mut out,
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Edge, LeaderLink};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn sine(omega: f64) -> VelocityShape {
        VelocityShape::SinePerturbed { omega }
    }

    #[test]
    fn f_examples() {
        assert_eq!(eval_f(sine(0.5), 0.0), 0.0);
        assert_eq!(eval_f(sine(0.0), 1.7), 1.7);
        assert!((eval_f(sine(0.5), PI / 2.0) - (PI / 2.0 + 0.5)).abs() < 1e-15);
        assert_eq!(sine(0.5).derivative(0.0), 1.5);
    }

    #[test]
    fn h_examples() {
        use CouplingShape::*;
        assert_eq!(eval_h(LinearPlusCubic, 1.0), 2.0);
        assert_eq!(eval_h(LinearPlusCubic, -2.0), -10.0);
        assert_eq!(eval_h(Linear, 0.37), 0.37);
        assert_eq!(antiderivative_h(LinearPlusCubic, 0.0), 0.0);
        assert_eq!(antiderivative_h(LinearPlusCubic, 1.0), 0.75);
    }

    #[test]
    fn antiderivative_matches_quadrature() {
        // Composite Simpson on h as an independent check of the closed forms.
        for shape in [CouplingShape::Linear, CouplingShape::LinearPlusCubic] {
            for &x in &[-2.3, -0.4, 0.9, 3.1] {
                let n = 2000;
                let dx = x / n as f64;
                let mut acc = shape.eval(0.0) + shape.eval(x);
                for k in 1..n {
                    let w = if k % 2 == 1 { 4.0 } else { 2.0 };
                    acc += w * shape.eval(k as f64 * dx);
                }
                let simpson = acc * dx / 3.0;
                assert!((simpson - shape.antiderivative(x)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn gain_examples() {
        let g1 = GainProfile::Cosine { b0: 0.2, a: 0.15 };
        assert!((eval_b(g1, 0.0) - 0.35).abs() < 1e-15);
        assert_eq!(eval_b(GainProfile::Constant { b0: 0.6 }, 123.4), 0.6);
        let g2 = GainProfile::Cosine { b0: 0.4, a: 0.15 };
        assert!((eval_b(g2, PI) - 0.25).abs() < 1e-15);
        assert_eq!(GainProfile::Cosine { b0: 0.4, a: 0.0 }.as_constant(), Some(0.4));
        assert_eq!(g2.as_constant(), None);
    }

    fn spec_with(f: VelocityShape, gains: Vec<GainProfile>) -> ProtocolSpec {
        ProtocolSpec {
            f,
            h: CouplingShape::LinearPlusCubic,
            gains,
            leader_f: None,
            leader_gain: None,
        }
    }

    #[test]
    fn sine_sector_constants() {
        let report = validate_assumptions(&spec_with(sine(0.5), vec![GainProfile::Constant { b0: 1.0 }]));
        assert!(report.all_passed());
        // min sin(z)/z = -0.217233628211222 at z = 4.493409457909064
        let k_expected = 1.0 - 0.5 * 0.217_233_628_211_221_7;
        assert!((report.sector.k - k_expected).abs() < 1e-9, "{:?}", report.sector);
        assert!((report.sector.k - 0.8914).abs() < 1e-4);
        assert!((report.sector.k_bar - 1.5).abs() < 1e-9);
    }

    #[test]
    fn linear_sector_is_unit() {
        let report = validate_assumptions(&spec_with(
            VelocityShape::Linear,
            vec![GainProfile::Constant { b0: 1.0 }],
        ));
        assert!(report.all_passed());
        assert_eq!(report.sector, Sector { k: 1.0, k_bar: 1.0 });
    }

    #[test]
    fn gain_lower_bound_violation_blocks() {
        let report = validate_assumptions(&spec_with(
            VelocityShape::Linear,
            vec![GainProfile::Cosine { b0: 0.1, a: 0.15 }],
        ));
        let failed: Vec<_> = report.blocking_failures().collect();
        assert_eq!(failed.len(), 1);
        assert_eq!(failed[0].assumption, "gain positivity");
    }

    #[test]
    fn large_omega_fails_sign_check() {
        let report = validate_assumptions(&spec_with(sine(6.0), vec![GainProfile::Constant { b0: 1.0 }]));
        assert!(!report.checks[0].passed);
        assert!(!report.checks[0].blocking);
        assert!(report.sector.k < 0.0);
    }

    fn two_agents(p: [f64; 2], q: [f64; 2]) -> SystemState {
        SystemState {
            t: 0.0,
            n_dims: 1,
            p: p.to_vec(),
            q: q.to_vec(),
            leader: None,
        }
    }

    #[test]
    fn linear_pair_control() {
        let topo = Topology::new(
            2,
            &[Edge {
                i: 0,
                j: 1,
                weight: 1.0,
            }],
            &[],
        )
        .unwrap();
        let spec = ProtocolSpec {
            f: VelocityShape::Linear,
            h: CouplingShape::Linear,
            gains: vec![GainProfile::Constant { b0: 1.0 }; 2],
            leader_f: None,
            leader_gain: None,
        };
        let s = two_agents([0.0, 1.0], [0.0, 0.0]);
        assert_eq!(control_leaderless(0, &s, 0.0, &topo, &spec), vec![1.0]);
        assert_eq!(control_leaderless(1, &s, 0.0, &topo, &spec), vec![-1.0]);

        let rest = two_agents([0.0, 0.0], [0.0, 0.0]);
        assert_eq!(control_leaderless(0, &rest, 0.0, &topo, &spec), vec![0.0]);
    }

    #[test]
    fn fig2_agent1_control_at_t0() {
        // -b1 f(q1) + c12 h(p2 - p1) with b1 = 0.2, q1 = 0.3, c12 = 0.6,
        // p2 - p1 = 0.2: -0.06 + 0.6 * (0.2 + 0.008) = 0.0648
        let edges: Vec<Edge> = (0..5)
            .map(|i| Edge {
                i,
                j: i + 1,
                weight: 0.2 * (2 * i + 3) as f64,
            })
            .collect();
        let topo = Topology::new(6, &edges, &[]).unwrap();
        let spec = spec_with(
            VelocityShape::Linear,
            (1..=6).map(|i| GainProfile::Constant { b0: 0.2 * i as f64 }).collect(),
        );
        let state = SystemState {
            t: 0.0,
            n_dims: 1,
            p: (1..=6).map(|i| 0.2 * i as f64).collect(),
            q: (1..=6).map(|i| 0.3 * i as f64).collect(),
            leader: None,
        };
        let u = control_leaderless(0, &state, 0.0, &topo, &spec);
        assert!((u[0] - 0.0648).abs() < 1e-14, "{u:?}");
    }

    #[test]
    fn fig3_agent1_control_at_t0() {
        // b1(0) = 0.35, q1 = 0.4: -0.35 * (0.4 + 0.5 sin 0.4)
        // c12 = 0.9, p2 - p1 = -0.3: 0.9 * (-0.3 - 0.027)
        // c1L = 1, pL - p1 = 1.3: 1.3 + 2.197
        let edges: Vec<Edge> = (0..4)
            .map(|i| Edge {
                i,
                j: i + 1,
                weight: 0.3 * (2 * i + 3) as f64,
            })
            .collect();
        let topo = Topology::new(5, &edges, &[LeaderLink { agent: 0, weight: 1.0 }]).unwrap();
        let spec = ProtocolSpec {
            f: sine(0.5),
            h: CouplingShape::LinearPlusCubic,
            gains: (1..=5)
                .map(|i| GainProfile::Cosine {
                    b0: 0.2 * i as f64,
                    a: 0.15,
                })
                .collect(),
            leader_f: Some(VelocityShape::Linear),
            leader_gain: Some(GainProfile::Constant { b0: 0.6 }),
        };
        let state = SystemState {
            t: 0.0,
            n_dims: 1,
            p: (1..=5).map(|i| -0.3 * i as f64).collect(),
            q: (1..=5).map(|i| 0.4 * i as f64).collect(),
            leader: Some(LeaderState {
                p: vec![1.0],
                q: vec![0.3],
            }),
        };
        let expected = -0.35 * (0.4 + 0.5 * 0.4f64.sin()) + 0.9 * (-0.3 - 0.027) + (1.3 + 2.197);
        let u = control_leader(0, &state, state.leader.as_ref().unwrap(), 0.0, &topo, &spec);
        assert!((u[0] - expected).abs() < 1e-13, "{} vs {expected}", u[0]);

        // Agent 2 has no leader link: leader-mode and leaderless inputs agree.
        let with = control_leader(1, &state, state.leader.as_ref().unwrap(), 0.0, &topo, &spec);
        let without = control_leaderless(1, &state, 0.0, &topo, &spec);
        assert_eq!(with, without);
    }

    #[test]
    fn coincident_with_leader_keeps_neighbor_terms() {
        let topo = Topology::new(
            2,
            &[Edge {
                i: 0,
                j: 1,
                weight: 2.0,
            }],
            &[LeaderLink { agent: 0, weight: 1.0 }],
        )
        .unwrap();
        let spec = ProtocolSpec {
            f: sine(0.3),
            h: CouplingShape::LinearPlusCubic,
            gains: vec![GainProfile::Constant { b0: 1.0 }; 2],
            leader_f: None,
            leader_gain: Some(GainProfile::Constant { b0: 1.0 }),
        };
        let state = two_agents([0.5, 1.5], [0.0, 0.2]);
        let leader = LeaderState {
            p: vec![0.5],
            q: vec![0.0],
        };
        let u = control_leader(0, &state, &leader, 0.0, &topo, &spec);
        assert_eq!(u, vec![2.0 * 2.0]);
    }

    #[test]
    fn shapes_reject_stray_keys() {
        let ok: CouplingShape = serde_json::from_str(r#"{"kind":"linear_plus_cubic"}"#).unwrap();
        assert_eq!(ok, CouplingShape::LinearPlusCubic);
        assert!(serde_json::from_str::<CouplingShape>(r#"{"kind":"linear","scale":2}"#).is_err());
        assert!(serde_json::from_str::<VelocityShape>(r#"{"kind":"linear","omega":0.5}"#).is_err());
        assert!(serde_json::from_str::<GainProfile>(r#"{"kind":"constant","b0":1,"a":0.1}"#).is_err());
        let f = VelocityShape::SinePerturbed { omega: 0.25 };
        let back: VelocityShape = serde_json::from_str(&serde_json::to_string(&f).unwrap()).unwrap();
        assert_eq!(back, f);
    }

    proptest! {
        #[test]
        fn h_is_odd(z in -1e3f64..1e3) {
            for s in [CouplingShape::Linear, CouplingShape::LinearPlusCubic] {
                prop_assert_eq!(s.eval(-z), -s.eval(z));
                prop_assert_eq!(s.antiderivative(-z), s.antiderivative(z));
                prop_assert!(s.antiderivative(z) >= 0.0);
            }
        }

        #[test]
        fn f_within_sector(z in -200f64..200.0, omega in 0.0f64..0.95) {
            prop_assume!(z != 0.0);
            let shape = sine(omega);
            let grids = ValidationGrids {
                sector: ZGrid { z_min: -50.0, z_max: 50.0, samples: 20_001 },
                ..Default::default()
            };
            let s = sector_bounds(shape, &grids.sector);
            let r = shape.eval(z) / z;
            prop_assert!(s.k - 1e-9 <= r && r <= s.k_bar + 1e-9, "{} not in {:?}", r, s);
        }

        #[test]
        fn coupling_is_antisymmetric_and_translation_invariant(
            p in proptest::collection::vec(-3f64..3.0, 4),
            q in proptest::collection::vec(-3f64..3.0, 4),
            pl in -3f64..3.0,
            shift in -10f64..10.0,
        ) {
            let edges = [
                Edge { i: 0, j: 1, weight: 0.7 },
                Edge { i: 1, j: 2, weight: 1.3 },
                Edge { i: 1, j: 3, weight: 0.4 },
            ];
            let topo = Topology::new(4, &edges, &[LeaderLink { agent: 2, weight: 0.9 }]).unwrap();
            let h = CouplingShape::LinearPlusCubic;
            for e in &edges {
                let ij = e.weight * h.eval(p[e.j] - p[e.i]);
                let ji = e.weight * h.eval(p[e.i] - p[e.j]);
                prop_assert_eq!(ij, -ji);
            }

            let spec = ProtocolSpec {
                f: sine(0.5),
                h,
                gains: vec![GainProfile::Cosine { b0: 0.5, a: 0.2 }; 4],
                leader_f: None,
                leader_gain: Some(GainProfile::Constant { b0: 0.6 }),
            };
            let state = SystemState { t: 0.0, n_dims: 1, p: p.clone(), q: q.clone(), leader: None };
            let shifted = SystemState {
                p: p.iter().map(|x| x + shift).collect(),
                ..state.clone()
            };
            let leader = LeaderState { p: vec![pl], q: vec![0.0] };
            let leader_shifted = LeaderState { p: vec![pl + shift], q: vec![0.0] };
            for i in 0..4 {
                let a = control_leader(i, &state, &leader, 0.7, &topo, &spec);
                let b = control_leader(i, &shifted, &leader_shifted, 0.7, &topo, &spec);
                prop_assert!((a[0] - b[0]).abs() <= 1e-9 * (1.0 + a[0].abs()));
            }
        }
    }
}
