//! Network topology: a symmetric, irreflexive neighbor relation.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;
use core::fmt;

use crate::params::{NodeId, ProtocolParams};

/// Undirected neighbor relation over node ids `0..n_nodes`.
///
/// Edges are stored explicitly (normalized with the lower id first) so that
/// analyses can enumerate them; iteration order is deterministic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    n_nodes: usize,
    edges: BTreeSet<(NodeId, NodeId)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TopologyError {
    SelfLoop(NodeId),
    OutOfRange { node: NodeId, n_nodes: usize },
}

impl fmt::Display for TopologyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TopologyError::SelfLoop(id) => write!(f, "edge {id}-{id} is reflexive"),
            TopologyError::OutOfRange { node, n_nodes } => {
                write!(f, "node {node} out of range (N = {n_nodes})")
            }
        }
    }
}

impl Topology {
    /// Builds a topology from an edge list; duplicates are merged.
    pub fn from_edges(
        n_nodes: usize,
        edges: impl IntoIterator<Item = (NodeId, NodeId)>,
    ) -> Result<Self, TopologyError> {
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(TopologyError::SelfLoop(a));
            }
            for node in [a, b] {
                if node >= n_nodes {
                    return Err(TopologyError::OutOfRange { node, n_nodes });
                }
            }
            set.insert((a.min(b), a.max(b)));
        }
        Ok(Self {
            n_nodes,
            edges: set,
        })
    }

    /// Complete graph over `n` nodes.
    pub fn clique(n: usize) -> Self {
        let mut edges = BTreeSet::new();
        for a in 0..n {
            for b in a + 1..n {
                edges.insert((a, b));
            }
        }
        Self { n_nodes: n, edges }
    }

    /// Path `0 - 1 - ... - n-1`.
    pub fn line(n: usize) -> Self {
        let edges = (0..n.saturating_sub(1)).map(|a| (a, a + 1)).collect();
        Self { n_nodes: n, edges }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    /// Symmetric, irreflexive neighbor predicate.
    pub fn neighbor(&self, a: NodeId, b: NodeId) -> bool {
        a != b && self.edges.contains(&(a.min(b), a.max(b)))
    }

    /// Neighbors of `id` in ascending order.
    pub fn neighbors(&self, id: NodeId) -> Vec<NodeId> {
        (0..self.n_nodes).filter(|&j| self.neighbor(id, j)).collect()
    }

    pub fn degree(&self, id: NodeId) -> usize {
        self.neighbors(id).len()
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n_nodes).map(|id| self.degree(id)).max().unwrap_or(0)
    }

    /// Normalized edge list in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.edges.iter().copied()
    }
}

/// Returns every neighbor pair assigned the same transmission slot; an
/// empty list means the allocation is admissible.
pub fn validate_slot_allocation(p: &ProtocolParams, t: &Topology) -> Vec<(NodeId, NodeId)> {
    t.edges()
        .filter(|&(a, b)| p.tx_slot.get(a) == p.tx_slot.get(b))
        .collect()
}
