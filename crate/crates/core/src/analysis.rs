//! Analytic objects over states and trajectories: Lyapunov functions, the
//! conserved quantity and consensus-value predictors, the leader-mode gain
//! bound, and finite-horizon consensus detection.

use serde::{Deserialize, Serialize};

use crate::dynamics::{error_view, LeaderState, Mode, Scenario, SystemState, Trajectory};
use crate::error::{Error, Result};
use crate::graph::Topology;
use crate::protocols::{self, GainProfile, ProtocolSpec, VelocityShape};

/// Default margin applied on top of [`leader_gain_bound`] when choosing `M`.
pub const DEFAULT_GAIN_MARGIN: f64 = 1.01;

/// Per-sample slack for monotonicity checks, relative to `1 + V`.
pub const MONOTONICITY_SLACK: f64 = 1e-9;

/// Leaderless Lyapunov function
/// `V = 1/2 sum_i m_i |q_i|^2 + 1/2 sum_i sum_{j in N_i} sum_l c_ij H(p_jl - p_il)`.
///
/// The double sum visits each unordered pair twice, hence the 1/2.
pub fn lyapunov_leaderless(state: &SystemState, topo: &Topology, spec: &ProtocolSpec, masses: &[f64]) -> f64 {
    let dims = state.n_dims;
    let mut kinetic = 0.0;
    let mut potential = 0.0;
    for (i, m) in masses.iter().enumerate() {
        let qi = state.velocity(i);
        kinetic += m * qi.iter().map(|x| x * x).sum::<f64>();
        let pi = state.position(i);
        for &(j, c) in topo.neighbors(i) {
            let pj = state.position(j);
            for l in 0..dims {
                potential += c * spec.h.antiderivative(pj[l] - pi[l]);
            }
        }
    }
    0.5 * kinetic + 0.5 * potential
}

/// Leader-mode Lyapunov function in the tracking errors, for unit masses:
///
/// `V = M/(2bk) |q_L|^2 + 1/(bk) sum_i |q^_i|^2 + 2/(bk) sum_i c_iL H(p^_i)
///      + 1/(bk) sum_i sum_{j in N_i} c_ij H(p^_j - p^_i)`.
pub fn lyapunov_leader(
    state: &SystemState,
    topo: &Topology,
    spec: &ProtocolSpec,
    m_weight: f64,
    b: f64,
    k: f64,
) -> Result<f64> {
    if !(b > 0.0) || !(k > 0.0) {
        return Err(Error::HypothesisViolated(format!(
            "b = {b} and k = {k} must be positive"
        )));
    }
    let leader = state.leader.as_ref().ok_or(Error::NoLeader)?;
    let (p_hat, q_hat) = error_view(state)?;
    let dims = state.n_dims;
    let bk = b * k;

    let leader_kinetic: f64 = leader.q.iter().map(|x| x * x).sum();
    let error_kinetic: f64 = q_hat.iter().map(|x| x * x).sum();
    let mut leader_potential = 0.0;
    let mut pair_potential = 0.0;
    for i in 0..topo.n_agents() {
        let c_il = topo.leader_weight(i);
        let pi = &p_hat[i * dims..(i + 1) * dims];
        if c_il != 0.0 {
            leader_potential += c_il * pi.iter().map(|&x| spec.h.antiderivative(x)).sum::<f64>();
        }
        for &(j, c) in topo.neighbors(i) {
            let pj = &p_hat[j * dims..(j + 1) * dims];
            for l in 0..dims {
                pair_potential += c * spec.h.antiderivative(pj[l] - pi[l]);
            }
        }
    }
    Ok(m_weight / (2.0 * bk) * leader_kinetic + error_kinetic / bk + 2.0 / bk * leader_potential + pair_potential / bk)
}

/// Strict lower bound on `M` for the leader-mode Lyapunov function to be
/// nonincreasing: `2N(bk b_bar k_bar + 3 b^2 k^2 + 2 b_bar^2 k_bar^2) / (b^2 k^2)`.
pub fn leader_gain_bound(n_agents: usize, b: f64, b_bar: f64, k: f64, k_bar: f64) -> Result<f64> {
    let all_positive = [b, b_bar, k, k_bar].iter().all(|&x| x > 0.0 && x.is_finite());
    if n_agents == 0 || !all_positive || b > b_bar || k > k_bar {
        return Err(Error::InvalidBounds(format!(
            "need N >= 1, 0 < b <= b_bar, 0 < k <= k_bar; got N = {n_agents}, b = {b}, b_bar = {b_bar}, k = {k}, k_bar = {k_bar}"
        )));
    }
    let bk = b * k;
    let bk_bar = b_bar * k_bar;
    Ok(2.0 * n_agents as f64 * (bk * bk_bar + 3.0 * bk * bk + 2.0 * bk_bar * bk_bar) / (bk * bk))
}

fn constant_gains(spec: &ProtocolSpec) -> Result<Vec<f64>> {
    if !spec.f.is_linear() {
        return Err(Error::HypothesisViolated(
            "nonlinear f: consensus-value formula inapplicable".into(),
        ));
    }
    spec.gains
        .iter()
        .enumerate()
        .map(|(i, g)| {
            g.as_constant().ok_or_else(|| {
                Error::HypothesisViolated(format!(
                    "time-varying gain b_{}: consensus-value formula inapplicable",
                    i + 1
                ))
            })
        })
        .collect()
}

/// Conserved quantity `alpha = sum_i (b_i p_i + m_i q_i)` for linear `f` and
/// constant gains without a leader.
pub fn invariant_alpha(state: &SystemState, masses: &[f64], spec: &ProtocolSpec) -> Result<Vec<f64>> {
    if state.leader.is_some() {
        return Err(Error::HypothesisViolated(
            "invariant defined without a leader only".into(),
        ));
    }
    let gains = constant_gains(spec)?;
    let dims = state.n_dims;
    let mut alpha = vec![0.0; dims];
    for (i, (b, m)) in gains.iter().zip(masses).enumerate() {
        let (p, q) = (state.position(i), state.velocity(i));
        for l in 0..dims {
            alpha[l] += b * p[l] + m * q[l];
        }
    }
    Ok(alpha)
}

/// Leaderless consensus value `alpha(0) / sum_i b_i`.
pub fn predicted_consensus_leaderless(initial: &SystemState, masses: &[f64], spec: &ProtocolSpec) -> Result<Vec<f64>> {
    let alpha = invariant_alpha(initial, masses, spec)?;
    let beta: f64 = constant_gains(spec)?.iter().sum();
    Ok(alpha.into_iter().map(|a| a / beta).collect())
}

/// Leader-mode consensus value `p_L(0) + q_L(0) / b_L` for constant `b_L` and
/// linear leader `f`.
pub fn predicted_consensus_leader(initial: &LeaderState, gain: GainProfile, f: VelocityShape) -> Result<Vec<f64>> {
    if !f.is_linear() {
        return Err(Error::HypothesisViolated(
            "nonlinear leader f: consensus-value formula inapplicable".into(),
        ));
    }
    let b = gain.as_constant().ok_or_else(|| {
        Error::HypothesisViolated("time-varying leader gain: consensus-value formula inapplicable".into())
    })?;
    if !(b > 0.0) {
        return Err(Error::HypothesisViolated(format!("leader gain {b} is not positive")));
    }
    Ok(initial.p.iter().zip(&initial.q).map(|(p, q)| p + q / b).collect())
}

/// Closed-form consensus value for a scenario, when the hypotheses hold.
pub fn predict(scenario: &Scenario) -> Result<Vec<f64>> {
    match scenario.mode {
        Mode::Leaderless => {
            if !scenario.topology.is_connected() {
                return Err(Error::HypothesisViolated("graph not connected".into()));
            }
            predicted_consensus_leaderless(&scenario.initial, &scenario.masses, &scenario.protocol)
        }
        Mode::Leader => {
            if !scenario.topology.leader_reaches_all() {
                return Err(Error::HypothesisViolated("leader has no path to every agent".into()));
            }
            let leader = scenario.initial.leader.as_ref().ok_or(Error::NoLeader)?;
            let gain = scenario
                .protocol
                .leader_gain
                .ok_or_else(|| Error::HypothesisViolated("leader gain missing".into()))?;
            predicted_consensus_leader(leader, gain, scenario.protocol.leader_shape())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusReport {
    pub achieved: bool,
    /// Earliest sample time from which both criteria hold through the end.
    pub t_consensus: Option<f64>,
    pub final_spread: f64,
    pub final_speed: f64,
    pub predicted_value: Option<Vec<f64>>,
    /// Why `predicted_value` is absent, when it is.
    pub prediction_note: Option<String>,
    /// Mean final position per component.
    pub observed_value: Vec<f64>,
    pub pos_tol: f64,
    pub vel_tol: f64,
}

/// `(spread, speed)` of one sample: relative to the leader when present,
/// otherwise pairwise spread and absolute speed.
fn spread_and_speed(state: &SystemState) -> (f64, f64) {
    let dims = state.n_dims;
    let n = state.n_agents();
    match &state.leader {
        Some(leader) => {
            let spread = state
                .p
                .iter()
                .enumerate()
                .map(|(idx, p)| (p - leader.p[idx % dims]).abs())
                .fold(0.0, f64::max);
            let speed = state
                .q
                .iter()
                .enumerate()
                .map(|(idx, q)| (q - leader.q[idx % dims]).abs())
                .fold(0.0, f64::max);
            (spread, speed)
        }
        None => {
            let mut spread: f64 = 0.0;
            for l in 0..dims {
                let component = (0..n).map(|i| state.p[i * dims + l]);
                let (lo, hi) = component.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
                spread = spread.max(hi - lo);
            }
            let speed = state.q.iter().map(|q| q.abs()).fold(0.0, f64::max);
            (spread, speed)
        }
    }
}

/// Finite-horizon consensus check over a trajectory.
pub fn detect_consensus(traj: &Trajectory, pos_tol: f64, vel_tol: f64) -> ConsensusReport {
    let holds: Vec<bool> = traj
        .samples
        .iter()
        .map(|s| {
            let (spread, speed) = spread_and_speed(s);
            spread <= pos_tol && speed <= vel_tol
        })
        .collect();
    let first_of_tail = holds.iter().rposition(|&h| !h).map_or(0, |k| k + 1);
    let t_consensus = traj
        .samples
        .get(first_of_tail)
        .filter(|_| first_of_tail < holds.len())
        .map(|s| s.t);

    let last = traj.last();
    let (final_spread, final_speed) = spread_and_speed(last);
    let n = last.n_agents().max(1);
    let observed_value = (0..last.n_dims)
        .map(|l| (0..n).map(|i| last.p[i * last.n_dims + l]).sum::<f64>() / n as f64)
        .collect();

    ConsensusReport {
        achieved: t_consensus.is_some(),
        t_consensus,
        final_spread,
        final_speed,
        predicted_value: None,
        prediction_note: None,
        observed_value,
        pos_tol,
        vel_tol,
    }
}

/// [`detect_consensus`] with the scenario's tolerances, plus the closed-form
/// prediction when its hypotheses hold.
pub fn assess(traj: &Trajectory, scenario: &Scenario) -> ConsensusReport {
    let tol = scenario.tolerances;
    let mut report = detect_consensus(traj, tol.pos_tol, tol.vel_tol);
    match predict(scenario) {
        Ok(v) => report.predicted_value = Some(v),
        Err(e) => report.prediction_note = Some(e.to_string()),
    }
    report
}

/// Constants used by the leader-mode Lyapunov function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeaderLyapunovParams {
    pub b: f64,
    pub b_bar: f64,
    pub k: f64,
    pub k_bar: f64,
    /// Strict lower bound on `M`.
    pub gain_bound: f64,
    pub m_weight: f64,
}

/// `(b, b_bar)` over all agent and leader gains, `(k, k_bar)` over agent and
/// leader sectors, and `M = margin * bound` unless `m_weight` is given.
pub fn leader_lyapunov_params(scenario: &Scenario, m_weight: Option<f64>) -> Result<LeaderLyapunovParams> {
    if scenario.mode != Mode::Leader {
        return Err(Error::NoLeader);
    }
    if scenario.masses.iter().any(|&m| m != 1.0) {
        return Err(Error::HypothesisViolated(
            "leader-mode Lyapunov function assumes unit masses".into(),
        ));
    }
    let report = protocols::validate_assumptions(&scenario.protocol);
    let (b, b_bar) = report.gain_bounds;
    let sector = report.combined_sector();
    let gain_bound = leader_gain_bound(scenario.n_agents, b, b_bar, sector.k, sector.k_bar)?;
    Ok(LeaderLyapunovParams {
        b,
        b_bar,
        k: sector.k,
        k_bar: sector.k_bar,
        gain_bound,
        m_weight: m_weight.unwrap_or(DEFAULT_GAIN_MARGIN * gain_bound),
    })
}

/// Mode-appropriate Lyapunov function evaluated at every sample.
pub fn lyapunov_series(traj: &Trajectory, scenario: &Scenario, m_weight: Option<f64>) -> Result<Vec<(f64, f64)>> {
    match scenario.mode {
        Mode::Leaderless => Ok(traj
            .samples
            .iter()
            .map(|s| {
                (
                    s.t,
                    lyapunov_leaderless(s, &scenario.topology, &scenario.protocol, &scenario.masses),
                )
            })
            .collect()),
        Mode::Leader => {
            let params = leader_lyapunov_params(scenario, m_weight)?;
            traj.samples
                .iter()
                .map(|s| {
                    lyapunov_leader(
                        s,
                        &scenario.topology,
                        &scenario.protocol,
                        params.m_weight,
                        params.b,
                        params.k,
                    )
                    .map(|v| (s.t, v))
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityVerdict {
    pub nonincreasing: bool,
    /// Largest `V(t_{s+1}) - V(t_s) - slack * (1 + V(t_s))` seen; `<= 0` when
    /// the series passes.
    pub worst_excess: f64,
    /// Time of the sample pair with the worst excess.
    pub worst_at: Option<f64>,
}

/// Checks `V(t_{s+1}) <= V(t_s) + slack * (1 + V(t_s))` for every pair.
pub fn check_nonincreasing(series: &[(f64, f64)], slack: f64) -> MonotonicityVerdict {
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_at = None;
    for w in series.windows(2) {
        let (_, v0) = w[0];
        let (t1, v1) = w[1];
        let excess = v1 - v0 - slack * (1.0 + v0.abs());
        if excess > worst_excess {
            worst_excess = excess;
            worst_at = Some(t1);
        }
    }
    if series.len() < 2 {
        worst_excess = 0.0;
    }
    MonotonicityVerdict {
        nonincreasing: worst_excess <= 0.0,
        worst_excess,
        worst_at,
    }
}

/// `max_t |alpha(t) - alpha(0)| / (1 + |alpha(0)|)` over components.
pub fn alpha_drift(traj: &Trajectory, scenario: &Scenario) -> Result<f64> {
    let alpha0 = invariant_alpha(traj.initial(), &scenario.masses, &scenario.protocol)?;
    let mut drift: f64 = 0.0;
    for s in &traj.samples {
        let alpha = invariant_alpha(s, &scenario.masses, &scenario.protocol)?;
        for (a, a0) in alpha.iter().zip(&alpha0) {
            drift = drift.max((a - a0).abs() / (1.0 + a0.abs()));
        }
    }
    Ok(drift)
}
