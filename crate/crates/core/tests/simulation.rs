use proptest::prelude::*;

use nlconsensus::analysis::{self, detect_consensus};
use nlconsensus::dynamics::{leader_closed_form, IntegratorSettings, Scenario, SystemState, Tolerances};
use nlconsensus::graph::{Edge, Topology};
use nlconsensus::protocols::{CouplingShape, GainProfile, ProtocolSpec, VelocityShape};
use nlconsensus::scenario_file::{bundled, load_scenario_str};
use nlconsensus::{simulate, Mode};

fn bundled_scenario(name: &str) -> Scenario {
    load_scenario_str(bundled::get(name).unwrap()).unwrap().scenario
}

fn with_integrator(mut s: Scenario, dt: f64, t_end: f64, record_every: usize) -> Scenario {
    s.integrator = IntegratorSettings {
        dt,
        t_end,
        record_every,
    };
    s
}

fn end_distance(a: &SystemState, b: &SystemState) -> f64 {
    let mut d: f64 = 0.0;
    for (x, y) in a.p.iter().zip(&b.p).chain(a.q.iter().zip(&b.q)) {
        d = d.max((x - y).abs());
    }
    d
}

#[test]
fn halving_the_step_divides_the_error_by_sixteen() {
    for name in ["fig2a", "fig3a"] {
        let base = bundled_scenario(name);
        let reference = simulate(&with_integrator(base.clone(), 1.0 / 1280.0, 2.0, 1)).unwrap();
        let coarse = simulate(&with_integrator(base.clone(), 1.0 / 40.0, 2.0, 1)).unwrap();
        let fine = simulate(&with_integrator(base, 1.0 / 80.0, 2.0, 1)).unwrap();
        let e_coarse = end_distance(coarse.last(), reference.last());
        let e_fine = end_distance(fine.last(), reference.last());
        let ratio = e_coarse / e_fine;
        assert!((12.0..20.0).contains(&ratio), "{name}: ratio {ratio}");
    }
}

#[test]
fn runs_are_bitwise_reproducible() {
    let s = with_integrator(bundled_scenario("fig3a"), 1e-3, 5.0, 10);
    let a = simulate(&s).unwrap();
    let b = simulate(&s).unwrap();
    assert_eq!(a, b);
}

#[test]
fn translating_every_position_translates_the_trajectory() {
    let shift = 3.25;
    for name in ["fig2a", "fig3a"] {
        let s = with_integrator(bundled_scenario(name), 1e-3, 10.0, 100);
        let mut moved = s.clone();
        moved.initial.p.iter_mut().for_each(|p| *p += shift);
        if let Some(leader) = moved.initial.leader.as_mut() {
            leader.p.iter_mut().for_each(|p| *p += shift);
        }
        let a = simulate(&s).unwrap();
        let b = simulate(&moved).unwrap();
        for (x, y) in a.samples.iter().zip(&b.samples) {
            for (p, pm) in x.p.iter().zip(&y.p) {
                assert!((pm - p - shift).abs() <= 1e-10);
            }
            for (q, qm) in x.q.iter().zip(&y.q) {
                assert!((qm - q).abs() <= 1e-10);
            }
        }
    }
}

#[test]
fn leader_tracks_its_closed_form() {
    let s = with_integrator(bundled_scenario("fig3b"), 1e-3, 20.0, 50);
    let traj = simulate(&s).unwrap();
    let leader0 = s.initial.leader.clone().unwrap();
    for sample in &traj.samples {
        let exact = leader_closed_form(
            &leader0,
            GainProfile::Constant { b0: 0.6 },
            VelocityShape::Linear,
            sample.t,
        )
        .unwrap();
        let got = sample.leader.as_ref().unwrap();
        assert!((got.p[0] - exact.p[0]).abs() <= 1e-8);
        assert!((got.q[0] - exact.q[0]).abs() <= 1e-8);
    }
}

#[test]
fn two_dimensional_agents_converge_componentwise() {
    let mut s = with_integrator(bundled_scenario("fig2b"), 1e-3, 40.0, 100);
    let n = s.n_agents;
    s.n_dims = 2;
    s.initial.n_dims = 2;
    let p: Vec<f64> = (0..n).flat_map(|i| [s.initial.p[i], -s.initial.p[i]]).collect();
    let q: Vec<f64> = (0..n).flat_map(|i| [s.initial.q[i], 0.5 * s.initial.q[i]]).collect();
    s.initial.p = p;
    s.initial.q = q;
    s.check().unwrap();
    let predicted = analysis::predict(&s).unwrap();
    let traj = simulate(&s).unwrap();
    let last = traj.last();
    for i in 0..n {
        for (x, want) in last.position(i).iter().zip(&predicted) {
            assert!((x - want).abs() < 1e-4);
        }
    }
    assert!(detect_consensus(&traj, 1e-3, 1e-3).achieved);
}

fn three_agent_scenario(masses: [f64; 3], gains: [f64; 3], weights: [f64; 2], p: [f64; 3], q: [f64; 3]) -> Scenario {
    let edges = [
        Edge {
            i: 0,
            j: 1,
            weight: weights[0],
        },
        Edge {
            i: 1,
            j: 2,
            weight: weights[1],
        },
    ];
    Scenario {
        mode: Mode::Leaderless,
        n_agents: 3,
        n_dims: 1,
        masses: masses.to_vec(),
        topology: Topology::new(3, &edges, &[]).unwrap(),
        protocol: ProtocolSpec {
            f: VelocityShape::Linear,
            h: CouplingShape::LinearPlusCubic,
            gains: gains.iter().map(|&b0| GainProfile::Constant { b0 }).collect(),
            leader_f: None,
            leader_gain: None,
        },
        initial: SystemState {
            t: 0.0,
            n_dims: 1,
            p: p.to_vec(),
            q: q.to_vec(),
            leader: None,
        },
        integrator: IntegratorSettings {
            dt: 2e-3,
            t_end: 80.0,
            record_every: 1000,
        },
        tolerances: Tolerances::default(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn three_agents_settle_on_the_invariant_ratio(
        masses in proptest::array::uniform3(0.5f64..1.5),
        gains in proptest::array::uniform3(0.5f64..1.5),
        weights in proptest::array::uniform2(0.5f64..1.5),
        p in proptest::array::uniform3(-1.0f64..1.0),
        q in proptest::array::uniform3(-1.0f64..1.0),
    ) {
        let s = three_agent_scenario(masses, gains, weights, p, q);
        let alpha: f64 = (0..3).map(|i| gains[i] * p[i] + masses[i] * q[i]).sum();
        let expected = alpha / gains.iter().sum::<f64>();
        let predicted = analysis::predict(&s).unwrap()[0];
        prop_assert!((predicted - expected).abs() <= 1e-12);
        let traj = simulate(&s).unwrap();
        for &pi in &traj.last().p {
            prop_assert!((pi - expected).abs() <= 1e-4);
        }
    }
}
