//! On-disk scenario format (strict JSON, 1-based agent indices) and the
//! bundled scenario library.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{IntegratorSettings, LeaderState, Mode, Scenario, SystemState, Tolerances};
use crate::error::{Error, Result};
use crate::graph::{Edge, LeaderLink, Topology, TopologyError};
use crate::protocols::{CouplingShape, GainProfile, ProtocolSpec, ValidationReport, VelocityShape};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub mode: Mode,
    pub n_agents: usize,
    #[serde(default = "one")]
    pub n_dims: usize,
    pub masses: Vec<f64>,
    pub topology: TopologyFile,
    pub protocol: ProtocolFile,
    pub initial: InitialFile,
    #[serde(default)]
    pub integrator: IntegratorSettings,
    #[serde(default)]
    pub tolerances: Tolerances,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyFile {
    pub edges: Vec<EdgeFile>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub leader_links: Vec<LeaderLinkFile>,
}

/// Edge between 1-based agents `i` and `j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeFile {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeaderLinkFile {
    pub agent: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolFile {
    pub f: VelocityShape,
    pub h: CouplingShape,
    pub gains: Vec<GainProfile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leader_f: Option<VelocityShape>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leader_gain: Option<GainProfile>,
}

/// Initial positions and velocities, one `n_dims` vector per agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialFile {
    pub p: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leader: Option<LeaderFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeaderFile {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

fn to_zero_based(index: usize, n_agents: usize) -> std::result::Result<usize, TopologyError> {
    if index == 0 || index > n_agents {
        Err(TopologyError::IndexOutOfRange { index, n_agents })
    } else {
        Ok(index - 1)
    }
}

fn flatten(rows: &[Vec<f64>], n_agents: usize, n_dims: usize, what: &str) -> Result<Vec<f64>> {
    if rows.len() != n_agents || rows.iter().any(|r| r.len() != n_dims) {
        return Err(Error::validation(
            "Dimensions",
            format!("initial.{what} must hold {n_agents} vectors of length {n_dims}"),
        ));
    }
    Ok(rows.concat())
}

impl ScenarioFile {
    /// Converts to the internal representation (0-based indices) and runs
    /// the structural checks. Does not compute the assumption report.
    pub fn to_scenario(&self) -> Result<Scenario> {
        let n = self.n_agents;
        let topo_err = |e: TopologyError| Error::validation(e.rule(), e.to_string());
        let edges = self
            .topology
            .edges
            .iter()
            .map(|e| {
                Ok(Edge {
                    i: to_zero_based(e.i, n)?,
                    j: to_zero_based(e.j, n)?,
                    weight: e.weight,
                })
            })
            .collect::<std::result::Result<Vec<_>, TopologyError>>()
            .map_err(topo_err)?;
        let links = self
            .topology
            .leader_links
            .iter()
            .map(|l| {
                Ok(LeaderLink {
                    agent: to_zero_based(l.agent, n)?,
                    weight: l.weight,
                })
            })
            .collect::<std::result::Result<Vec<_>, TopologyError>>()
            .map_err(topo_err)?;
        let topology = Topology::new(n, &edges, &links).map_err(topo_err)?;

        let initial = SystemState {
            t: 0.0,
            n_dims: self.n_dims,
            p: flatten(&self.initial.p, n, self.n_dims, "p")?,
            q: flatten(&self.initial.q, n, self.n_dims, "q")?,
            leader: self.initial.leader.as_ref().map(|l| LeaderState {
                p: l.p.clone(),
                q: l.q.clone(),
            }),
        };

        let scenario = Scenario {
            mode: self.mode,
            n_agents: n,
            n_dims: self.n_dims,
            masses: self.masses.clone(),
            topology,
            protocol: ProtocolSpec {
                f: self.protocol.f,
                h: self.protocol.h,
                gains: self.protocol.gains.clone(),
                leader_f: self.protocol.leader_f,
                leader_gain: self.protocol.leader_gain,
            },
            initial,
            integrator: self.integrator,
            tolerances: self.tolerances,
        };
        scenario.check()?;
        Ok(scenario)
    }

    pub fn from_scenario(scenario: &Scenario, description: Option<String>) -> Self {
        let dims = scenario.n_dims;
        let rows = |v: &[f64]| v.chunks(dims).map(|c| c.to_vec()).collect::<Vec<_>>();
        ScenarioFile {
            description,
            mode: scenario.mode,
            n_agents: scenario.n_agents,
            n_dims: dims,
            masses: scenario.masses.clone(),
            topology: TopologyFile {
                edges: scenario
                    .topology
                    .edges()
                    .map(|e| EdgeFile {
                        i: e.i + 1,
                        j: e.j + 1,
                        weight: e.weight,
                    })
                    .collect(),
                leader_links: scenario
                    .topology
                    .leader_links()
                    .map(|l| LeaderLinkFile {
                        agent: l.agent + 1,
                        weight: l.weight,
                    })
                    .collect(),
            },
            protocol: ProtocolFile {
                f: scenario.protocol.f,
                h: scenario.protocol.h,
                gains: scenario.protocol.gains.clone(),
                leader_f: scenario.protocol.leader_f,
                leader_gain: scenario.protocol.leader_gain,
            },
            initial: InitialFile {
                p: rows(&scenario.initial.p),
                q: rows(&scenario.initial.q),
                leader: scenario.initial.leader.as_ref().map(|l| LeaderFile {
                    p: l.p.clone(),
                    q: l.q.clone(),
                }),
            },
            integrator: scenario.integrator,
            tolerances: scenario.tolerances,
        }
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario file serializes")
    }
}

/// Deserializes a scenario file, reporting the offending key path.
pub fn parse_scenario_file(text: &str) -> Result<ScenarioFile> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Parse {
            path,
            message: e.into_inner().to_string(),
        }
    })
}

/// A parsed, fully validated scenario with its assumption report.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub file: ScenarioFile,
    pub scenario: Scenario,
    pub report: ValidationReport,
}

pub fn load_scenario_str(text: &str) -> Result<LoadedScenario> {
    let file = parse_scenario_file(text)?;
    let scenario = file.to_scenario()?;
    let report = scenario.validate()?;
    Ok(LoadedScenario { file, scenario, report })
}

/// Reads, parses and validates a scenario file.
pub fn parse_scenario(path: impl AsRef<Path>) -> Result<LoadedScenario> {
    let text = std::fs::read_to_string(path)?;
    load_scenario_str(&text)
}

/// Scenarios shipped with the crate.
pub mod bundled {
    pub const FIG2A: &str = include_str!("../scenarios/fig2a.json");
    pub const FIG2B: &str = include_str!("../scenarios/fig2b.json");
    pub const FIG3A: &str = include_str!("../scenarios/fig3a.json");
    pub const FIG3B: &str = include_str!("../scenarios/fig3b.json");

    pub const ALL: [(&str, &str); 4] = [("fig2a", FIG2A), ("fig2b", FIG2B), ("fig3a", FIG3A), ("fig3b", FIG3B)];

    /// Looks up a bundled scenario by name, with or without `.json`.
    pub fn get(name: &str) -> Option<&'static str> {
        let stem = name.strip_suffix(".json").unwrap_or(name);
        ALL.iter().find(|(n, _)| *n == stem).map(|(_, text)| *text)
    }
}
