//! Closed-loop agent and leader dynamics, fixed-step RK4 integration and the
//! closed-form leader trajectory.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::Topology;
use crate::protocols::{self, GainProfile, ProtocolSpec, ValidationGrids, ValidationReport, VelocityShape};

/// Leader position and velocity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderState {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

/// Positions and velocities of all agents at time `t`.
///
/// `p` and `q` are row-major `N x n_dims`: component `l` of agent `i` lives at
/// `i * n_dims + l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    pub t: f64,
    pub n_dims: usize,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub leader: Option<LeaderState>,
}

impl SystemState {
    pub fn n_agents(&self) -> usize {
        self.p.len().checked_div(self.n_dims).unwrap_or(0)
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.p[i * self.n_dims..(i + 1) * self.n_dims]
    }

    pub fn velocity(&self, i: usize) -> &[f64] {
        &self.q[i * self.n_dims..(i + 1) * self.n_dims]
    }

    pub fn is_finite(&self) -> bool {
        let leader_ok = self
            .leader
            .as_ref()
            .is_none_or(|l| l.p.iter().chain(&l.q).all(|x| x.is_finite()));
        leader_ok && self.p.iter().chain(&self.q).all(|x| x.is_finite()) && self.t.is_finite()
    }

    fn to_flat(&self) -> Vec<f64> {
        let mut y = Vec::with_capacity(2 * self.p.len() + 2 * self.n_dims);
        y.extend_from_slice(&self.p);
        y.extend_from_slice(&self.q);
        if let Some(l) = &self.leader {
            y.extend_from_slice(&l.p);
            y.extend_from_slice(&l.q);
        }
        y
    }

    fn from_flat(t: f64, n_agents: usize, n_dims: usize, has_leader: bool, y: &[f64]) -> Self {
        let m = n_agents * n_dims;
        SystemState {
            t,
            n_dims,
            p: y[..m].to_vec(),
            q: y[m..2 * m].to_vec(),
            leader: has_leader.then(|| LeaderState {
                p: y[2 * m..2 * m + n_dims].to_vec(),
                q: y[2 * m + n_dims..2 * m + 2 * n_dims].to_vec(),
            }),
        }
    }
}

/// Time derivative of a [`SystemState`].
#[derive(Debug, Clone, PartialEq)]
pub struct StateDerivative {
    pub dp: Vec<f64>,
    pub dq: Vec<f64>,
    pub leader: Option<LeaderState>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Leaderless,
    Leader,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSettings {
    pub dt: f64,
    pub t_end: f64,
    /// Steps between recorded samples.
    pub record_every: usize,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        IntegratorSettings {
            dt: 1e-3,
            t_end: 50.0,
            record_every: 100,
        }
    }
}

impl IntegratorSettings {
    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

/// Consensus detection thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub pos_tol: f64,
    pub vel_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            pos_tol: 1e-3,
            vel_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub mode: Mode,
    pub n_agents: usize,
    pub n_dims: usize,
    pub masses: Vec<f64>,
    pub topology: Topology,
    pub protocol: ProtocolSpec,
    pub initial: SystemState,
    pub integrator: IntegratorSettings,
    pub tolerances: Tolerances,
}

impl Scenario {
    /// Structural checks plus the blocking hypotheses: gain bounds and the
    /// topology condition of the mode. Cheap; run before every simulation.
    pub fn check(&self) -> Result<()> {
        let n = self.n_agents;
        let dims = self.n_dims;
        if n == 0 || dims == 0 {
            return Err(Error::validation("Dimensions", "n_agents and n_dims must be positive"));
        }
        if self.topology.n_agents() != n {
            return Err(Error::validation(
                "Dimensions",
                format!("topology has {} agents, scenario {n}", self.topology.n_agents()),
            ));
        }
        if self.masses.len() != n {
            return Err(Error::validation(
                "Dimensions",
                format!("{} masses for {n} agents", self.masses.len()),
            ));
        }
        if let Some((i, m)) = self
            .masses
            .iter()
            .enumerate()
            .find(|(_, m)| !(**m > 0.0) || !m.is_finite())
        {
            return Err(Error::validation("PositiveMass", format!("m_{} = {m}", i + 1)));
        }
        if self.protocol.gains.len() != n {
            return Err(Error::validation(
                "Dimensions",
                format!("{} gain profiles for {n} agents", self.protocol.gains.len()),
            ));
        }
        let init = &self.initial;
        if init.n_dims != dims || init.p.len() != n * dims || init.q.len() != n * dims {
            return Err(Error::validation(
                "Dimensions",
                "initial state does not match n_agents x n_dims",
            ));
        }
        if !init.is_finite() {
            return Err(Error::validation(
                "FiniteInitialState",
                "initial state has non-finite entries",
            ));
        }
        let s = &self.integrator;
        if !(s.dt > 0.0) || !s.dt.is_finite() {
            return Err(Error::validation(
                "Integrator",
                format!("dt = {} must be positive", s.dt),
            ));
        }
        if !(s.t_end > s.dt) || !s.t_end.is_finite() {
            return Err(Error::validation(
                "Integrator",
                format!("t_end = {} must exceed dt", s.t_end),
            ));
        }
        if s.record_every == 0 {
            return Err(Error::validation("Integrator", "record_every must be at least 1"));
        }
        let tol = &self.tolerances;
        if !(tol.pos_tol > 0.0) || !(tol.vel_tol > 0.0) {
            return Err(Error::validation("Tolerances", "tolerances must be positive"));
        }

        match self.mode {
            Mode::Leaderless => {
                if self.protocol.leader_gain.is_some() || init.leader.is_some() || self.topology.has_leader_links() {
                    return Err(Error::validation(
                        "LeaderlessMode",
                        "leaderless scenario must not define a leader gain, leader state or leader links",
                    ));
                }
                if !self.topology.is_connected() {
                    return Err(Error::validation("Connectivity", "graph not connected"));
                }
            }
            Mode::Leader => {
                if self.protocol.leader_gain.is_none() {
                    return Err(Error::validation("LeaderMode", "leader gain missing"));
                }
                match &init.leader {
                    Some(l) if l.p.len() == dims && l.q.len() == dims => {}
                    Some(_) => return Err(Error::validation("Dimensions", "leader state does not match n_dims")),
                    None => return Err(Error::validation("LeaderMode", "leader initial state missing")),
                }
                if !self.topology.has_leader_links() {
                    return Err(Error::validation("LeaderMode", "no leader links"));
                }
                if !self.topology.leader_reaches_all() {
                    return Err(Error::validation(
                        "LeaderReachability",
                        "leader has no path to every agent",
                    ));
                }
            }
        }

        for (i, g) in self
            .protocol
            .gains
            .iter()
            .chain(self.protocol.leader_gain.iter())
            .enumerate()
        {
            let (lo, hi) = g.bounds();
            if !(lo > 0.0) || !hi.is_finite() {
                let name = if i < n {
                    format!("b_{}", i + 1)
                } else {
                    "b_L".to_string()
                };
                return Err(Error::validation(
                    "GainBounds",
                    format!("{name}: inf b(t) = {lo} is not positive"),
                ));
            }
        }
        Ok(())
    }

    /// Full validation: [`Scenario::check`] plus the assumption report.
    pub fn validate(&self) -> Result<ValidationReport> {
        self.validate_with(&ValidationGrids::default())
    }

    pub fn validate_with(&self, grids: &ValidationGrids) -> Result<ValidationReport> {
        self.check()?;
        let mut report = protocols::validate_assumptions_with(&self.protocol, grids);
        if let Some(c) = report.blocking_failures().next() {
            return Err(Error::validation(c.assumption.clone(), c.detail.clone()));
        }
        if self.mode == Mode::Leader && self.masses.iter().any(|&m| m != 1.0) {
            report
                .warnings
                .push("leader mode with masses != 1: tracking guarantee only covers unit masses".into());
        }
        Ok(report)
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn fingerprint(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("scenario serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    fn has_leader(&self) -> bool {
        self.mode == Mode::Leader
    }

    /// Right-hand side on the flat layout `[p, q, p_L, q_L]`.
    fn rhs_flat(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        let n = self.n_agents;
        let dims = self.n_dims;
        let m = n * dims;
        let (p, rest) = y.split_at(m);
        let (q, leader) = rest.split_at(m);
        let leader_p = if self.has_leader() { Some(&leader[..dims]) } else { None };

        dy[..m].copy_from_slice(q);
        for i in 0..n {
            let out = &mut dy[m + i * dims..m + (i + 1) * dims];
            protocols::control_into(i, dims, p, q, leader_p, t, &self.topology, &self.protocol, out);
            let inv_mass = 1.0 / self.masses[i];
            for v in out.iter_mut() {
                *v *= inv_mass;
            }
        }
        if self.has_leader() {
            let ql = &leader[dims..2 * dims];
            let b = self.protocol.leader_gain.expect("checked").eval(t);
            let f = self.protocol.leader_shape();
            dy[2 * m..2 * m + dims].copy_from_slice(ql);
            for l in 0..dims {
                dy[2 * m + dims + l] = -b * f.eval(ql[l]);
            }
        }
    }
}

/// Time-indexed samples of a simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<SystemState>,
    pub scenario_fingerprint: String,
}

impl Trajectory {
    pub fn initial(&self) -> &SystemState {
        &self.samples[0]
    }

    pub fn last(&self) -> &SystemState {
        self.samples.last().expect("trajectory is never empty")
    }
}

fn ensure_finite(state: &SystemState) -> Result<()> {
    if state.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFiniteState { t: state.t })
    }
}

fn check_shape(state: &SystemState, scenario: &Scenario) -> Result<()> {
    let m = scenario.n_agents * scenario.n_dims;
    let leader_ok = match (&state.leader, scenario.mode) {
        (None, Mode::Leaderless) => true,
        (Some(l), Mode::Leader) => l.p.len() == scenario.n_dims && l.q.len() == scenario.n_dims,
        _ => false,
    };
    if state.n_dims != scenario.n_dims || state.p.len() != m || state.q.len() != m || !leader_ok {
        return Err(Error::validation("Dimensions", "state does not match scenario"));
    }
    Ok(())
}

/// `p_i' = q_i`, `q_i' = u_i / m_i`, and in leader mode `p_L' = q_L`,
/// `q_L' = -b_L(t) f_L(q_L)`.
pub fn rhs(state: &SystemState, scenario: &Scenario) -> Result<StateDerivative> {
    check_shape(state, scenario)?;
    ensure_finite(state)?;
    let y = state.to_flat();
    let mut dy = vec![0.0; y.len()];
    scenario.rhs_flat(state.t, &y, &mut dy);
    let d = SystemState::from_flat(state.t, scenario.n_agents, scenario.n_dims, scenario.has_leader(), &dy);
    Ok(StateDerivative {
        dp: d.p,
        dq: d.q,
        leader: d.leader,
    })
}

/// Classical RK4 on the flat state.
struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    fn new(len: usize) -> Self {
        Rk4 {
            k1: vec![0.0; len],
            k2: vec![0.0; len],
            k3: vec![0.0; len],
            k4: vec![0.0; len],
            tmp: vec![0.0; len],
        }
    }

    fn step(&mut self, scenario: &Scenario, t: f64, dt: f64, y: &mut [f64]) {
        let half = 0.5 * dt;
        scenario.rhs_flat(t, y, &mut self.k1);
        for (tmp, (y, k)) in self.tmp.iter_mut().zip(y.iter().zip(&self.k1)) {
            *tmp = y + half * k;
        }
        scenario.rhs_flat(t + half, &self.tmp, &mut self.k2);
        for (tmp, (y, k)) in self.tmp.iter_mut().zip(y.iter().zip(&self.k2)) {
            *tmp = y + half * k;
        }
        scenario.rhs_flat(t + half, &self.tmp, &mut self.k3);
        for (tmp, (y, k)) in self.tmp.iter_mut().zip(y.iter().zip(&self.k3)) {
            *tmp = y + dt * k;
        }
        scenario.rhs_flat(t + dt, &self.tmp, &mut self.k4);
        let sixth = dt / 6.0;
        for (idx, y) in y.iter_mut().enumerate() {
            *y += sixth * (self.k1[idx] + 2.0 * self.k2[idx] + 2.0 * self.k3[idx] + self.k4[idx]);
        }
    }
}

/// One RK4 step of size `scenario.integrator.dt`.
pub fn step_rk4(state: &SystemState, scenario: &Scenario) -> Result<SystemState> {
    check_shape(state, scenario)?;
    ensure_finite(state)?;
    let dt = scenario.integrator.dt;
    let mut y = state.to_flat();
    Rk4::new(y.len()).step(scenario, state.t, dt, &mut y);
    let next = SystemState::from_flat(
        state.t + dt,
        scenario.n_agents,
        scenario.n_dims,
        scenario.has_leader(),
        &y,
    );
    if next.is_finite() {
        Ok(next)
    } else {
        Err(Error::NonFiniteState { t: state.t })
    }
}

/// Integrates the scenario from its initial state to `t_end`.
///
/// Samples are taken every `record_every` steps starting with the initial
/// state; the final state is always recorded, so the last spacing can be
/// shorter when the step count is not a multiple of `record_every`.
pub fn simulate(scenario: &Scenario) -> Result<Trajectory> {
    scenario.check()?;
    let settings = scenario.integrator;
    let dt = settings.dt;
    let n_steps = settings.n_steps();
    let has_leader = scenario.has_leader();
    let t0 = scenario.initial.t;

    let mut y = scenario.initial.to_flat();
    let mut rk = Rk4::new(y.len());
    let mut samples = Vec::with_capacity(n_steps / settings.record_every + 2);
    samples.push(scenario.initial.clone());

    for k in 0..n_steps {
        let t = t0 + k as f64 * dt;
        rk.step(scenario, t, dt, &mut y);
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteState { t });
        }
        let step = k + 1;
        if step % settings.record_every == 0 || step == n_steps {
            samples.push(SystemState::from_flat(
                t0 + step as f64 * dt,
                scenario.n_agents,
                scenario.n_dims,
                has_leader,
                &y,
            ));
        }
    }

    Ok(Trajectory {
        samples,
        scenario_fingerprint: scenario.fingerprint(),
    })
}

/// Exact leader trajectory for constant `b_L` and linear `f`:
/// `p_L(t) = p_L0 + q_L0/b_L - (q_L0/b_L) exp(-b_L t)`, `q_L(t) = q_L0 exp(-b_L t)`.
pub fn leader_closed_form(initial: &LeaderState, gain: GainProfile, f: VelocityShape, t: f64) -> Result<LeaderState> {
    let b = gain
        .as_constant()
        .ok_or_else(|| Error::HypothesisViolated("leader gain is time-varying".into()))?;
    if !f.is_linear() {
        return Err(Error::HypothesisViolated("leader f is nonlinear".into()));
    }
    if !(b > 0.0) {
        return Err(Error::HypothesisViolated(format!("leader gain {b} is not positive")));
    }
    let decay = (-b * t).exp();
    let p = initial
        .p
        .iter()
        .zip(&initial.q)
        .map(|(p0, q0)| p0 + q0 / b - (q0 / b) * decay)
        .collect();
    let q = initial.q.iter().map(|q0| q0 * decay).collect();
    Ok(LeaderState { p, q })
}

/// Tracking errors `(p_i - p_L, q_i - q_L)`, row-major like the state.
pub fn error_view(state: &SystemState) -> Result<(Vec<f64>, Vec<f64>)> {
    let leader = state.leader.as_ref().ok_or(Error::NoLeader)?;
    let dims = state.n_dims;
    let p_hat = state
        .p
        .iter()
        .enumerate()
        .map(|(idx, p)| p - leader.p[idx % dims])
        .collect();
    let q_hat = state
        .q
        .iter()
        .enumerate()
        .map(|(idx, q)| q - leader.q[idx % dims])
        .collect();
    Ok((p_hat, q_hat))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Edge, LeaderLink};
    use crate::protocols::CouplingShape;

    fn single_damped(q0: f64, dt: f64, t_end: f64) -> Scenario {
        Scenario {
            mode: Mode::Leaderless,
            n_agents: 1,
            n_dims: 1,
            masses: vec![1.0],
            topology: Topology::new(1, &[], &[]).unwrap(),
            protocol: ProtocolSpec {
                f: VelocityShape::Linear,
                h: CouplingShape::Linear,
                gains: vec![GainProfile::Constant { b0: 1.0 }],
                leader_f: None,
                leader_gain: None,
            },
            initial: SystemState {
                t: 0.0,
                n_dims: 1,
                p: vec![0.0],
                q: vec![q0],
                leader: None,
            },
            integrator: IntegratorSettings {
                dt,
                t_end,
                record_every: 1,
            },
            tolerances: Tolerances::default(),
        }
    }

    fn pair_with_leader() -> Scenario {
        Scenario {
            mode: Mode::Leader,
            n_agents: 2,
            n_dims: 1,
            masses: vec![1.0, 1.0],
            topology: Topology::new(
                2,
                &[Edge {
                    i: 0,
                    j: 1,
                    weight: 1.0,
                }],
                &[LeaderLink { agent: 0, weight: 1.0 }],
            )
            .unwrap(),
            protocol: ProtocolSpec {
                f: VelocityShape::SinePerturbed { omega: 0.5 },
                h: CouplingShape::LinearPlusCubic,
                gains: vec![GainProfile::Cosine { b0: 0.5, a: 0.1 }; 2],
                leader_f: None,
                leader_gain: Some(GainProfile::Constant { b0: 0.6 }),
            },
            initial: SystemState {
                t: 0.0,
                n_dims: 1,
                p: vec![0.3, 0.3],
                q: vec![0.0, 0.0],
                leader: Some(LeaderState {
                    p: vec![0.3],
                    q: vec![0.0],
                }),
            },
            integrator: IntegratorSettings::default(),
            tolerances: Tolerances::default(),
        }
    }

    #[test]
    fn pure_damping_rhs() {
        let s = single_damped(1.0, 0.1, 1.0);
        let d = rhs(&s.initial, &s).unwrap();
        assert_eq!(d.dp, vec![1.0]);
        assert_eq!(d.dq, vec![-1.0]);
    }

    #[test]
    fn consensus_at_rest_is_equilibrium() {
        let s = pair_with_leader();
        let d = rhs(&s.initial, &s).unwrap();
        assert!(d.dp.iter().chain(&d.dq).all(|&v| v == 0.0));
        let l = d.leader.unwrap();
        assert_eq!((l.p[0], l.q[0]), (0.0, 0.0));

        let next = step_rk4(&s.initial, &s).unwrap();
        assert_eq!(next.p, s.initial.p);
        assert_eq!(next.q, s.initial.q);
        assert_eq!(next.leader, s.initial.leader);
        assert!((next.t - 1e-3).abs() < 1e-18);
    }

    #[test]
    fn rk4_single_step_matches_exponential() {
        let s = single_damped(1.0, 0.1, 1.0);
        let next = step_rk4(&s.initial, &s).unwrap();
        assert!((next.q[0] - (-0.1f64).exp()).abs() < 1e-7);
        // p(t) = 1 - exp(-t)
        assert!((next.p[0] - (1.0 - (-0.1f64).exp())).abs() < 1e-7);
    }

    #[test]
    fn resting_single_agent_stays_put() {
        let mut s = single_damped(0.0, 1e-2, 5.0);
        s.initial.p = vec![2.5];
        let traj = simulate(&s).unwrap();
        assert!(traj.samples.iter().all(|x| x.p == vec![2.5] && x.q == vec![0.0]));
        assert_eq!(traj.samples.len(), 501);
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let s = single_damped(1.0, 0.1, 1.0);
        let mut bad = s.initial.clone();
        bad.q[0] = f64::NAN;
        assert!(matches!(rhs(&bad, &s), Err(Error::NonFiniteState { .. })));
        assert!(matches!(step_rk4(&bad, &s), Err(Error::NonFiniteState { .. })));
    }

    #[test]
    fn blow_up_reports_time() {
        // Negative-damping-like growth via an enormous step on a cubic coupling.
        let mut s = single_damped(1.0, 1.0, 100.0);
        s.n_agents = 2;
        s.masses = vec![1e-6, 1e-6];
        s.topology = Topology::new(
            2,
            &[Edge {
                i: 0,
                j: 1,
                weight: 1e3,
            }],
            &[],
        )
        .unwrap();
        s.protocol.h = CouplingShape::LinearPlusCubic;
        s.protocol.gains = vec![GainProfile::Constant { b0: 1.0 }; 2];
        s.initial.p = vec![0.0, 10.0];
        s.initial.q = vec![0.0, 0.0];
        match simulate(&s) {
            Err(Error::NonFiniteState { t }) => assert!((0.0..100.0).contains(&t)),
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn record_grid() {
        let mut s = single_damped(1.0, 0.01, 1.0);
        s.integrator.record_every = 10;
        let traj = simulate(&s).unwrap();
        assert_eq!(traj.samples.len(), 11);
        for (k, x) in traj.samples.iter().enumerate() {
            assert!((x.t - 0.1 * k as f64).abs() < 1e-12);
        }
        assert_eq!(traj.initial(), &s.initial);
    }

    #[test]
    fn leader_closed_form_basics() {
        let init = LeaderState {
            p: vec![1.0],
            q: vec![0.3],
        };
        let g = GainProfile::Constant { b0: 0.6 };
        let at0 = leader_closed_form(&init, g, VelocityShape::Linear, 0.0).unwrap();
        assert_eq!(at0, init);
        let late = leader_closed_form(&init, g, VelocityShape::Linear, 200.0).unwrap();
        assert!((late.p[0] - 1.5).abs() < 1e-15);
        assert!(late.q[0].abs() < 1e-50);

        let varying = GainProfile::Cosine { b0: 0.6, a: 0.15 };
        assert!(matches!(
            leader_closed_form(&init, varying, VelocityShape::Linear, 1.0),
            Err(Error::HypothesisViolated(_))
        ));
        assert!(matches!(
            leader_closed_form(&init, g, VelocityShape::SinePerturbed { omega: 0.5 }, 1.0),
            Err(Error::HypothesisViolated(_))
        ));
    }

    #[test]
    fn error_view_subtracts_leader() {
        let state = SystemState {
            t: 0.0,
            n_dims: 1,
            p: vec![2.0, 0.5],
            q: vec![0.1, 0.0],
            leader: Some(LeaderState {
                p: vec![0.5],
                q: vec![0.0],
            }),
        };
        let (p_hat, q_hat) = error_view(&state).unwrap();
        assert_eq!(p_hat, vec![1.5, 0.0]);
        assert_eq!(q_hat, vec![0.1, 0.0]);

        let no_leader = SystemState { leader: None, ..state };
        assert!(matches!(error_view(&no_leader), Err(Error::NoLeader)));
    }

    #[test]
    fn check_rejects_structural_problems() {
        let mut s = single_damped(1.0, 0.1, 1.0);
        s.masses = vec![0.0];
        assert!(matches!(s.check(), Err(Error::ValidationFailed { rule, .. }) if rule == "PositiveMass"));

        let mut s = single_damped(1.0, 0.1, 0.05);
        s.integrator.t_end = 0.05;
        assert!(s.check().is_err());

        let mut s = pair_with_leader();
        s.protocol.leader_gain = None;
        assert!(s.check().is_err());

        let mut s = pair_with_leader();
        s.masses = vec![2.0, 1.0];
        let report = s.validate().unwrap();
        assert_eq!(report.warnings.len(), 1);

        let mut s = single_damped(1.0, 0.1, 1.0);
        s.n_agents = 2;
        s.masses = vec![1.0, 1.0];
        s.protocol.gains = vec![GainProfile::Constant { b0: 1.0 }; 2];
        s.topology = Topology::new(2, &[], &[]).unwrap();
        s.initial.p = vec![0.0, 1.0];
        s.initial.q = vec![0.0, 0.0];
        assert!(matches!(s.check(), Err(Error::ValidationFailed { rule, .. }) if rule == "Connectivity"));
    }

    #[test]
    fn fingerprint_tracks_content() {
        let a = single_damped(1.0, 0.1, 1.0);
        let mut b = a.clone();
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.initial.q[0] = 1.0 + 1e-15;
        assert_ne!(a.fingerprint(), b.fingerprint());
    }
}
