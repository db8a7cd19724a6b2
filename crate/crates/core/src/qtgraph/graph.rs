use std::collections::VecDeque;

use super::{GraphError, TypeBlueprint};

/// A finite graph whose vertices carry a type label, stored as sorted
/// adjacency lists in compressed-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    type_of: Vec<usize>,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    blueprint: TypeBlueprint,
}

impl Graph {
    /// Builds a graph from an undirected edge list.
    ///
    /// Rejects loops, duplicate edges and type labels outside the blueprint.
    /// Does not check the blueprint counts; use [`verify_realization`] for that.
    pub fn from_edges(
        type_of: Vec<usize>,
        edges: &[(usize, usize)],
        blueprint: TypeBlueprint,
    ) -> Result<Self, GraphError> {
        let n = type_of.len();
        if n == 0 {
            return Err(GraphError::SizeTooSmall {
                what: "vertex count",
                min: 1,
                got: 0,
            });
        }
        if let Some(v) = type_of.iter().position(|&t| t >= blueprint.n_types()) {
            return Err(GraphError::TypeOutOfRange {
                vertex: v,
                ty: type_of[v],
            });
        }
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(GraphError::VertexOutOfRange {
                    vertex: u.max(v),
                    n,
                });
            }
            if u == v {
                return Err(GraphError::SelfLoop { vertex: u });
            }
            adj[u].push(v);
            adj[v].push(u);
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut neighbors = Vec::with_capacity(2 * edges.len());
        offsets.push(0);
        for (u, list) in adj.iter_mut().enumerate() {
            list.sort_unstable();
            if let Some(w) = list.windows(2).find(|w| w[0] == w[1]) {
                return Err(GraphError::MultiEdge { u, v: w[0] });
            }
            neighbors.extend_from_slice(list);
            offsets.push(neighbors.len());
        }
        Ok(Self {
            type_of,
            offsets,
            neighbors,
            blueprint,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.type_of.len()
    }

    pub fn num_edges(&self) -> usize {
        self.neighbors.len() / 2
    }

    pub fn n_types(&self) -> usize {
        self.blueprint.n_types()
    }

    pub fn blueprint(&self) -> &TypeBlueprint {
        &self.blueprint
    }

    pub fn type_of(&self, v: usize) -> usize {
        self.type_of[v]
    }

    pub fn types(&self) -> &[usize] {
        &self.type_of
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    /// Offset of `v`'s first slot in the flat neighbour array.
    pub(crate) fn slot_offset(&self, v: usize) -> usize {
        self.offsets[v]
    }

    /// Edges `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.num_edges());
        for u in 0..self.num_vertices() {
            for &v in self.neighbors(u) {
                if u < v {
                    out.push((u, v));
                }
            }
        }
        out
    }

    /// Number of vertices of each type.
    pub fn type_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_types()];
        for &t in &self.type_of {
            sizes[t] += 1;
        }
        sizes
    }

    /// Vertices of each type, in increasing order.
    pub fn vertices_by_type(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_types()];
        for (v, &t) in self.type_of.iter().enumerate() {
            out[t].push(v);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        let n = self.num_vertices();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &v in self.neighbors(u) {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == n
    }
}

/// First vertex whose neighbourhood disagrees with the blueprint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RealizationFailure {
    pub vertex: usize,
    pub neighbor_type: usize,
    pub expected: u32,
    pub found: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RealizationReport {
    pub passed: bool,
    pub first_failure: Option<RealizationFailure>,
    /// Set when adjacency is asymmetric or contains a loop.
    pub structural_defect: Option<usize>,
    pub empirical_proportions: Vec<f64>,
    /// Largest `|#V_i/#V - p_i|` over types.
    pub proportion_gap: f64,
    pub connected: bool,
}

/// Checks every vertex's per-type neighbour counts against the blueprint.
pub fn verify_realization(g: &Graph) -> RealizationReport {
    let bp = g.blueprint();
    let nt = bp.n_types();
    let mut structural_defect = None;
    let mut first_failure = None;
    let mut tally = vec![0u32; nt];
    for v in 0..g.num_vertices() {
        let list = g.neighbors(v);
        if structural_defect.is_none() {
            let broken = list.iter().any(|&u| u == v || g.neighbors(u).binary_search(&v).is_err());
            if broken {
                structural_defect = Some(v);
            }
        }
        if first_failure.is_some() {
            continue;
        }
        tally.iter_mut().for_each(|c| *c = 0);
        for &u in list {
            tally[g.type_of(u)] += 1;
        }
        let ty = g.type_of(v);
        if let Some(j) = (0..nt).find(|&j| tally[j] != bp.count(ty, j)) {
            first_failure = Some(RealizationFailure {
                vertex: v,
                neighbor_type: j,
                expected: bp.count(ty, j),
                found: tally[j],
            });
        }
    }
    let n = g.num_vertices() as f64;
    let empirical_proportions: Vec<f64> = g.type_sizes().iter().map(|&c| c as f64 / n).collect();
    let proportion_gap = empirical_proportions
        .iter()
        .zip(bp.proportions())
        .map(|(e, p)| (e - p).abs())
        .fold(0.0, f64::max);
    RealizationReport {
        passed: first_failure.is_none() && structural_defect.is_none(),
        first_failure,
        structural_defect,
        empirical_proportions,
        proportion_gap,
        connected: g.is_connected(),
    }
}
