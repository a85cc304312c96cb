//! Road graph with passenger-related node annotations and stop points.

use crate::ids::{NodeId, PassengerId, StopId};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Cruise speed the edge travel times are quoted at.
pub const NOMINAL_SPEED_MPS: f64 = 10.0;

/// Platform usable only at or below this slope.
pub const PLATFORM_MAX_SLOPE_DEG: f64 = 5.0;
/// Platform usable only at or below this curb height.
pub const PLATFORM_MAX_CURB_CM: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    #[serde(default)]
    pub x: f64,
    #[serde(default)]
    pub y: f64,
    #[serde(default)]
    pub known_to: BTreeSet<PassengerId>,
    #[serde(default)]
    pub suitable_for_platform: bool,
    #[serde(default)]
    pub care_facility: bool,
}

impl Node {
    pub fn new(id: &str, x: f64, y: f64) -> Self {
        Node {
            id: NodeId::new(id),
            x,
            y,
            known_to: BTreeSet::new(),
            suitable_for_platform: false,
            care_facility: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub a: NodeId,
    pub b: NodeId,
    /// Travel time at nominal speed, whole seconds.
    pub travel_s: u64,
}

impl Edge {
    pub fn new(a: &str, b: &str, travel_s: u64) -> Self {
        Edge {
            a: NodeId::new(a),
            b: NodeId::new(b),
            travel_s,
        }
    }
}

/// A place at a node where the vehicle can halt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopPoint {
    pub id: StopId,
    pub node: NodeId,
    pub lateral_slot: u32,
    pub slope_deg: f64,
    pub curb_height_cm: f64,
    pub platform_usable: bool,
}

impl StopPoint {
    /// Builds a stop and derives `platform_usable` from its topography.
    pub fn new(id: &str, node: &str, lateral_slot: u32, slope_deg: f64, curb_height_cm: f64) -> Self {
        StopPoint {
            id: StopId::new(id),
            node: NodeId::new(node),
            lateral_slot,
            slope_deg,
            curb_height_cm,
            platform_usable: platform_usable(slope_deg, curb_height_cm),
        }
    }
}

pub fn platform_usable(slope_deg: f64, curb_height_cm: f64) -> bool {
    slope_deg <= PLATFORM_MAX_SLOPE_DEG && curb_height_cm <= PLATFORM_MAX_CURB_CM
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MapError {
    #[error("duplicate node `{0}`")]
    DuplicateNode(NodeId),
    #[error("edge references unknown node `{0}`")]
    UnknownNode(NodeId),
    #[error("edge {0}-{1} has non-positive travel time")]
    NonPositiveTravel(NodeId, NodeId),
    #[error("self loop at `{0}`")]
    SelfLoop(NodeId),
    #[error("duplicate edge {0}-{1}")]
    DuplicateEdge(NodeId, NodeId),
    #[error("stop `{0}` references unknown node `{1}`")]
    StopUnknownNode(StopId, NodeId),
    #[error("duplicate stop `{0}`")]
    DuplicateStop(StopId),
    #[error("stop `{0}` platform_usable flag contradicts its slope/curb")]
    InconsistentStop(StopId),
}

/// Undirected road graph; edge costs are travel seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadGraph {
    nodes: Vec<Node>,
    index: BTreeMap<NodeId, usize>,
    adjacency: BTreeMap<NodeId, Vec<(NodeId, u64)>>,
    edges: Vec<Edge>,
    stops: Vec<StopPoint>,
}

impl RoadGraph {
    pub fn new(nodes: Vec<Node>, edges: Vec<Edge>, stops: Vec<StopPoint>) -> Result<Self, MapError> {
        let mut index = BTreeMap::new();
        for (i, n) in nodes.iter().enumerate() {
            if index.insert(n.id.clone(), i).is_some() {
                return Err(MapError::DuplicateNode(n.id.clone()));
            }
        }
        let mut adjacency: BTreeMap<NodeId, Vec<(NodeId, u64)>> =
            nodes.iter().map(|n| (n.id.clone(), Vec::new())).collect();
        let mut seen = BTreeSet::new();
        for e in &edges {
            for end in [&e.a, &e.b] {
                if !index.contains_key(end) {
                    return Err(MapError::UnknownNode(end.clone()));
                }
            }
            if e.a == e.b {
                return Err(MapError::SelfLoop(e.a.clone()));
            }
            if e.travel_s == 0 {
                return Err(MapError::NonPositiveTravel(e.a.clone(), e.b.clone()));
            }
            let key = if e.a < e.b {
                (e.a.clone(), e.b.clone())
            } else {
                (e.b.clone(), e.a.clone())
            };
            if !seen.insert(key) {
                return Err(MapError::DuplicateEdge(e.a.clone(), e.b.clone()));
            }
            adjacency.get_mut(&e.a).unwrap().push((e.b.clone(), e.travel_s));
            adjacency.get_mut(&e.b).unwrap().push((e.a.clone(), e.travel_s));
        }
        for list in adjacency.values_mut() {
            list.sort();
        }
        let mut stop_ids = BTreeSet::new();
        for s in &stops {
            if !index.contains_key(&s.node) {
                return Err(MapError::StopUnknownNode(s.id.clone(), s.node.clone()));
            }
            if !stop_ids.insert(s.id.clone()) {
                return Err(MapError::DuplicateStop(s.id.clone()));
            }
            if s.platform_usable != platform_usable(s.slope_deg, s.curb_height_cm) {
                return Err(MapError::InconsistentStop(s.id.clone()));
            }
        }
        Ok(RoadGraph {
            nodes,
            index,
            adjacency,
            edges,
            stops,
        })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn stops(&self) -> &[StopPoint] {
        &self.stops
    }

    pub fn node(&self, id: &NodeId) -> Option<&Node> {
        self.index.get(id).map(|&i| &self.nodes[i])
    }

    pub fn contains(&self, id: &NodeId) -> bool {
        self.index.contains_key(id)
    }

    /// Neighbours sorted by node id.
    pub fn neighbors(&self, id: &NodeId) -> &[(NodeId, u64)] {
        self.adjacency.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn travel_s(&self, a: &NodeId, b: &NodeId) -> Option<u64> {
        self.neighbors(a).iter().find(|(n, _)| n == b).map(|&(_, t)| t)
    }

    pub fn edge_length_m(&self, a: &NodeId, b: &NodeId) -> Option<f64> {
        self.travel_s(a, b).map(|t| t as f64 * NOMINAL_SPEED_MPS)
    }

    pub fn stops_at(&self, node: &NodeId) -> Vec<&StopPoint> {
        self.stops.iter().filter(|s| &s.node == node).collect()
    }

    pub fn stop(&self, id: &crate::ids::StopId) -> Option<&StopPoint> {
        self.stops.iter().find(|s| &s.id == id)
    }

    /// Cartesian position of a point `along_m` metres from `from` towards `to`.
    pub fn interpolate(&self, from: &NodeId, to: &NodeId, along_m: f64) -> Option<(f64, f64)> {
        let a = self.node(from)?;
        let b = self.node(to)?;
        let len = self.edge_length_m(from, to)?;
        let f = (along_m / len).clamp(0.0, 1.0);
        Some((a.x + (b.x - a.x) * f, a.y + (b.y - a.y) * f))
    }

    /// Sum of edge lengths along a node path; `None` if a hop is not an edge.
    pub fn path_length_m(&self, path: &[NodeId]) -> Option<f64> {
        path.windows(2).map(|w| self.edge_length_m(&w[0], &w[1])).sum()
    }

    /// Returns a copy with every edge travel time multiplied by `factor`.
    pub fn scaled(&self, factor: u64) -> RoadGraph {
        let edges = self
            .edges
            .iter()
            .map(|e| Edge {
                travel_s: e.travel_s * factor,
                ..e.clone()
            })
            .collect();
        RoadGraph::new(self.nodes.clone(), edges, self.stops.clone()).expect("scaling preserves validity")
    }
}

/// The reference graph used across examples and canonical scenarios.
///
/// A-B 300 s, B-C 300 s, A-D 600 s, D-C 600 s, B-H 120 s; H is a care facility.
pub fn reference_graph() -> RoadGraph {
    let mut nodes = vec![
        Node::new("A", 0.0, 0.0),
        Node::new("B", 3000.0, 0.0),
        Node::new("C", 6000.0, 0.0),
        Node::new("D", 3000.0, -4000.0),
        Node::new("H", 3000.0, 1200.0),
    ];
    for n in &mut nodes {
        n.suitable_for_platform = n.id.as_str() != "D";
    }
    nodes[4].care_facility = true;
    let edges = vec![
        Edge::new("A", "B", 300),
        Edge::new("B", "C", 300),
        Edge::new("A", "D", 600),
        Edge::new("D", "C", 600),
        Edge::new("B", "H", 120),
    ];
    let stops = vec![
        StopPoint::new("A1", "A", 1, 1.0, 12.0),
        StopPoint::new("A2", "A", 2, 3.0, 15.0),
        StopPoint::new("B1", "B", 1, 2.0, 10.0),
        StopPoint::new("C1", "C", 1, 2.0, 15.0),
        StopPoint::new("C2", "C", 2, 8.0, 15.0),
        StopPoint::new("D1", "D", 1, 9.0, 25.0),
        StopPoint::new("H1", "H", 1, 0.5, 10.0),
    ];
    RoadGraph::new(nodes, edges, stops).expect("reference graph is valid")
}
