//! Weighted undirected interconnection graph between agents, with optional
//! links from a leader node.
//!
//! Agent indices are 0-based inside the library. Scenario files use 1-based
//! indices and convert at the parse boundary.

use std::collections::{BTreeMap, VecDeque};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TopologyError {
    #[error("topology needs at least one agent")]
    NoAgents,
    #[error("agent index {index} out of range for {n_agents} agents")]
    IndexOutOfRange { index: usize, n_agents: usize },
    #[error("non-positive weight {weight} on link {link}")]
    NonPositiveWeight { link: String, weight: f64 },
    #[error("duplicate edge between agents {0} and {1}")]
    DuplicateEdge(usize, usize),
    #[error("self-loop on agent {0}")]
    SelfLoop(usize),
    #[error("duplicate leader link to agent {0}")]
    DuplicateLeaderLink(usize),
}

impl TopologyError {
    /// Short rule name, used in validation diagnostics.
    pub fn rule(&self) -> &'static str {
        match self {
            TopologyError::NoAgents => "NoAgents",
            TopologyError::IndexOutOfRange { .. } => "IndexOutOfRange",
            TopologyError::NonPositiveWeight { .. } => "NonPositiveWeight",
            TopologyError::DuplicateEdge(..) => "DuplicateEdge",
            TopologyError::SelfLoop(_) => "SelfLoop",
            TopologyError::DuplicateLeaderLink(_) => "DuplicateLeaderLink",
        }
    }
}

/// An undirected edge `{i, j}` with weight `c_ij = c_ji > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

/// A link from the leader to agent `agent` with weight `c_iL > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeaderLink {
    pub agent: usize,
    pub weight: f64,
}

/// Validated, immutable topology.
///
/// Each unordered pair is stored once (keyed `(min, max)`), so `c_ij = c_ji`
/// holds by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    n_agents: usize,
    edges: BTreeMap<(usize, usize), f64>,
    leader_weights: Vec<f64>,
    neighbors: Vec<Vec<(usize, f64)>>,
}

impl Topology {
    /// Builds and validates a topology from 0-based edge and leader-link lists.
    pub fn new(n_agents: usize, edges: &[Edge], leader_links: &[LeaderLink]) -> Result<Self, TopologyError> {
        if n_agents == 0 {
            return Err(TopologyError::NoAgents);
        }
        let check_index = |index: usize| {
            if index >= n_agents {
                Err(TopologyError::IndexOutOfRange { index, n_agents })
            } else {
                Ok(())
            }
        };

        let mut map = BTreeMap::new();
        for e in edges {
            check_index(e.i)?;
            check_index(e.j)?;
            if e.i == e.j {
                return Err(TopologyError::SelfLoop(e.i));
            }
            if !(e.weight > 0.0) || !e.weight.is_finite() {
                return Err(TopologyError::NonPositiveWeight {
                    link: format!("({}, {})", e.i, e.j),
                    weight: e.weight,
                });
            }
            let key = (e.i.min(e.j), e.i.max(e.j));
            if map.insert(key, e.weight).is_some() {
                return Err(TopologyError::DuplicateEdge(key.0, key.1));
            }
        }

        let mut leader_weights = vec![0.0; n_agents];
        for link in leader_links {
            check_index(link.agent)?;
            if !(link.weight > 0.0) || !link.weight.is_finite() {
                return Err(TopologyError::NonPositiveWeight {
                    link: format!("(leader, {})", link.agent),
                    weight: link.weight,
                });
            }
            if leader_weights[link.agent] != 0.0 {
                return Err(TopologyError::DuplicateLeaderLink(link.agent));
            }
            leader_weights[link.agent] = link.weight;
        }

        let mut neighbors = vec![Vec::new(); n_agents];
        for (&(i, j), &w) in &map {
            neighbors[i].push((j, w));
            neighbors[j].push((i, w));
        }

        Ok(Topology {
            n_agents,
            edges: map,
            leader_weights,
            neighbors,
        })
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    /// Edges in canonical `(i < j)` order.
    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.edges.iter().map(|(&(i, j), &weight)| Edge { i, j, weight })
    }

    pub fn leader_links(&self) -> impl Iterator<Item = LeaderLink> + '_ {
        self.leader_weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0.0)
            .map(|(agent, &weight)| LeaderLink { agent, weight })
    }

    pub fn has_leader_links(&self) -> bool {
        self.leader_weights.iter().any(|&w| w > 0.0)
    }

    /// `c_ij`, zero when the pair is not connected.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let key = (i.min(j), i.max(j));
        self.edges.get(&key).copied().unwrap_or(0.0)
    }

    /// `c_iL`, zero when the leader does not talk to agent `i`.
    pub fn leader_weight(&self, i: usize) -> f64 {
        self.leader_weights[i]
    }

    /// Neighbor set `N_i` with weights.
    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.neighbors[i]
    }

    /// Graph Laplacian: `l_ii = sum_j c_ij`, `l_ij = -c_ij`. Leader links are
    /// not part of it.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let mut l = DMatrix::zeros(self.n_agents, self.n_agents);
        for (&(i, j), &w) in &self.edges {
            l[(i, j)] = -w;
            l[(j, i)] = -w;
        }
        for i in 0..self.n_agents {
            l[(i, i)] = self.neighbors[i].iter().map(|&(_, w)| w).sum();
        }
        l
    }

    /// Whether the agent graph (leader excluded) is connected.
    pub fn is_connected(&self) -> bool {
        self.bfs_from(&[0]).into_iter().all(|seen| seen)
    }

    /// Whether every agent is reachable from the leader through leader links
    /// followed by agent edges.
    pub fn leader_reaches_all(&self) -> bool {
        let roots: Vec<usize> = self.leader_links().map(|l| l.agent).collect();
        if roots.is_empty() {
            return false;
        }
        self.bfs_from(&roots).into_iter().all(|seen| seen)
    }

    fn bfs_from(&self, roots: &[usize]) -> Vec<bool> {
        let mut seen = vec![false; self.n_agents];
        let mut queue = VecDeque::new();
        for &r in roots {
            if !seen[r] {
                seen[r] = true;
                queue.push_back(r);
            }
        }
        while let Some(v) = queue.pop_front() {
            for &(u, _) in &self.neighbors[v] {
                if !seen[u] {
                    seen[u] = true;
                    queue.push_back(u);
                }
            }
        }
        seen
    }
}

#[derive(Serialize, Deserialize)]
struct RawTopology {
    n_agents: usize,
    edges: Vec<Edge>,
    leader_links: Vec<LeaderLink>,
}

impl Serialize for Topology {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        RawTopology {
            n_agents: self.n_agents,
            edges: self.edges().collect(),
            leader_links: self.leader_links().collect(),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for Topology {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let raw = RawTopology::deserialize(de)?;
        Topology::new(raw.n_agents, &raw.edges, &raw.leader_links).map_err(serde::de::Error::custom)
    }
}
