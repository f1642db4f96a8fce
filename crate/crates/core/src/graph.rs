//! Undirected communication topology among actuator agents.
//!
//! Nodes are indexed from 0 internally. Configuration files and reports use
//! 1-based ids; conversion happens at the scenario boundary.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("a communication graph needs at least 2 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("edge ({0}, {1}) references a node outside 1..={2}")]
    NodeOutOfRange(usize, usize, usize),
    #[error("communication graph is disconnected: {} unreachable from node 1", describe_nodes(.unreachable))]
    Disconnected { unreachable: Vec<usize> },
    #[error("node {node} is out of range for a graph with {count} nodes")]
    UnknownNode { node: usize, count: usize },
}

fn describe_nodes(nodes: &[usize]) -> String {
    let ids: Vec<String> = nodes.iter().map(|n| n.to_string()).collect();
    if nodes.len() == 1 {
        format!("node {}", ids[0])
    } else {
        format!("nodes {}", ids.join(", "))
    }
}

/// Shape of the room-level topology.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    Ring,
    Path,
    Complete,
    /// Explicit 1-based edge list.
    Custom(Vec<(usize, usize)>),
}

/// Connected, undirected, unweighted graph without self-loops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommGraph {
    adjacency: Vec<Vec<usize>>,
}

impl CommGraph {
    /// Builds a graph on `n` nodes. Custom edges are 1-based.
    pub fn build(topology: &Topology, n: usize) -> Result<Self, GraphError> {
        if n < 2 {
            return Err(GraphError::TooFewNodes(n));
        }
        let edges: Vec<(usize, usize)> = match topology {
            Topology::Path => (0..n - 1).map(|i| (i, i + 1)).collect(),
            Topology::Ring => {
                let mut e: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
                if n > 2 {
                    e.push((0, n - 1));
                }
                e
            }
            Topology::Complete => (0..n)
                .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                .collect(),
            Topology::Custom(list) => {
                let mut e = Vec::with_capacity(list.len());
                for &(a, b) in list {
                    if a == 0 || b == 0 || a > n || b > n {
                        return Err(GraphError::NodeOutOfRange(a, b, n));
                    }
                    e.push((a - 1, b - 1));
                }
                e
            }
        };
        Self::from_edges(n, &edges)
    }

    /// Builds a graph from 0-based edges. Duplicate edges collapse.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        if n < 2 {
            return Err(GraphError::TooFewNodes(n));
        }
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(GraphError::NodeOutOfRange(a + 1, b + 1, n));
            }
            if a == b {
                return Err(GraphError::SelfLoop(a + 1));
            }
            if !adjacency[a].contains(&b) {
                adjacency[a].push(b);
                adjacency[b].push(a);
            }
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        let unreachable = unreachable_from_first(&adjacency);
        if !unreachable.is_empty() {
            return Err(GraphError::Disconnected {
                unreachable: unreachable.into_iter().map(|i| i + 1).collect(),
            });
        }
        Ok(Self { adjacency })
    }

    /// Adds one extra node linked to each of the given existing nodes (0-based).
    pub fn with_hub(&self, links: &[usize]) -> Result<Self, GraphError> {
        let hub = self.node_count();
        let mut edges = self.edges();
        edges.extend(links.iter().map(|&i| (i, hub)));
        Self::from_edges(hub + 1, &edges)
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    /// Edges as 0-based pairs with `i < j`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, list) in self.adjacency.iter().enumerate() {
            out.extend(list.iter().filter(|&&j| j > i).map(|&j| (i, j)));
        }
        out
    }

    pub fn neighbors(&self, i: usize) -> Result<&[usize], GraphError> {
        self.adjacency
            .get(i)
            .map(Vec::as_slice)
            .ok_or(GraphError::UnknownNode {
                node: i,
                count: self.node_count(),
            })
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency
            .get(i)
            .is_some_and(|l| l.binary_search(&j).is_ok())
    }

    /// Dense 0/1 adjacency matrix.
    pub fn adjacency_matrix(&self) -> DMatrix<f64> {
        let n = self.node_count();
        DMatrix::from_fn(n, n, |i, j| if self.has_edge(i, j) { 1.0 } else { 0.0 })
    }

    pub fn laplacian(&self) -> DMatrix<f64> {
        let n = self.node_count();
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                self.degree(i) as f64
            } else if self.has_edge(i, j) {
                -1.0
            } else {
                0.0
            }
        })
    }

    pub fn is_connected(&self) -> bool {
        unreachable_from_first(&self.adjacency).is_empty()
    }
}

/// Connectivity test for an arbitrary 0-based edge list on `n` nodes.
pub fn is_connected(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut adjacency = vec![Vec::new(); n];
    for &(a, b) in edges {
        if a < n && b < n {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
    }
    unreachable_from_first(&adjacency).is_empty()
}

fn unreachable_from_first(adjacency: &[Vec<usize>]) -> Vec<usize> {
    let n = adjacency.len();
    if n == 0 {
        return Vec::new();
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    while let Some(i) = queue.pop_front() {
        for &j in &adjacency[i] {
            if !seen[j] {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    (0..n).filter(|&i| !seen[i]).collect()
}
