use std::fmt;
use std::str::FromStr;

use super::{Graph, GraphError, TypeBlueprint};

/// Built-in quasi-transitive families. Infinite examples (comb, strip, Z^2)
/// are closed periodically so that every vertex sees the exact blueprint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// n-cycle, one type of degree 2.
    Cycle(usize),
    /// `n` degree-4 hubs on a ring, each consecutive pair joined through two
    /// degree-2 vertices. Type 0 has degree 2, type 1 degree 4.
    Bipartite24(usize),
    /// m x n periodic grid with parity types A, B, C, D (indices 0..4), an
    /// A-D diagonal per A vertex and C-C edges at horizontal distance two.
    DecoratedGrid(usize, usize),
    /// L x L periodic square lattice.
    Torus2D(usize),
    /// Cycle backbone of length n (type 0) with one pendant leaf per
    /// backbone vertex (type 1).
    Comb(usize),
    /// Cycle of length n crossed with a 3-vertex path. Type 0 is the two
    /// boundary rows (degree 3), type 1 the middle row (degree 4).
    Strip3(usize),
    /// Complete graph on n vertices, one type of degree n - 1.
    Complete(usize),
}

impl Family {
    pub fn blueprint(&self) -> TypeBlueprint {
        let counts = match self {
            Family::Cycle(_) => vec![vec![2]],
            Family::Bipartite24(_) => vec![vec![0, 2], vec![4, 0]],
            Family::DecoratedGrid(..) => vec![
                vec![0, 2, 2, 1],
                vec![2, 0, 0, 2],
                vec![2, 0, 2, 2],
                vec![1, 2, 2, 0],
            ],
            Family::Torus2D(_) => vec![vec![4]],
            Family::Comb(_) => vec![vec![2, 1], vec![1, 0]],
            Family::Strip3(_) => vec![vec![2, 1], vec![2, 2]],
            Family::Complete(n) => vec![vec![((*n).max(2) - 1) as u32]],
        };
        TypeBlueprint::new(counts).expect("built-in blueprints are consistent")
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Cycle(n) => write!(f, "cycle:{n}"),
            Family::Bipartite24(n) => write!(f, "bipartite24:{n}"),
            Family::DecoratedGrid(m, n) => write!(f, "decorated:{m}:{n}"),
            Family::Torus2D(l) => write!(f, "torus:{l}"),
            Family::Comb(n) => write!(f, "comb:{n}"),
            Family::Strip3(n) => write!(f, "strip:{n}"),
            Family::Complete(n) => write!(f, "complete:{n}"),
        }
    }
}

impl FromStr for Family {
    type Err = GraphError;

    /// Parses `cycle:7`, `bipartite24:8`, `decorated:8:6`, `torus:50`,
    /// `comb:10`, `strip:10`, `complete:100`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || GraphError::Parse(format!("unrecognised graph family `{s}`"));
        let mut parts = s.split(':');
        let name = parts.next().ok_or_else(bad)?;
        let nums: Vec<usize> = parts
            .map(|p| p.parse::<usize>().map_err(|_| bad()))
            .collect::<Result<_, _>>()?;
        match (name, nums.as_slice()) {
            ("cycle", [n]) => Ok(Family::Cycle(*n)),
            ("bipartite24", [n]) => Ok(Family::Bipartite24(*n)),
            ("decorated", [m, n]) => Ok(Family::DecoratedGrid(*m, *n)),
            ("torus", [l]) => Ok(Family::Torus2D(*l)),
            ("comb", [n]) => Ok(Family::Comb(*n)),
            ("strip", [n]) => Ok(Family::Strip3(*n)),
            ("complete", [n]) => Ok(Family::Complete(*n)),
            _ => Err(bad()),
        }
    }
}

fn at_least(what: &'static str, min: usize, got: usize) -> Result<(), GraphError> {
    if got < min {
        Err(GraphError::SizeTooSmall { what, min, got })
    } else {
        Ok(())
    }
}

/// Builds one member of a built-in family.
pub fn build_family(family: Family) -> Result<Graph, GraphError> {
    if let Family::Complete(n) = family {
        at_least("complete graph order", 2, n)?;
    }
    let blueprint = family.blueprint();
    let (types, edges) = match family {
        Family::Cycle(n) => {
            at_least("cycle length", 3, n)?;
            (vec![0; n], (0..n).map(|i| (i, (i + 1) % n)).collect())
        }
        Family::Bipartite24(n) => {
            at_least("hub count", 2, n)?;
            // u_i = i, w_i = n + i (degree 2); hub v_i = 2n + i.
            let hub = |i: usize| 2 * n + (i % n);
            let mut edges = Vec::with_capacity(4 * n);
            for i in 0..n {
                for side in [i, n + i] {
                    edges.push((side, hub(i)));
                    edges.push((side, hub(i + 1)));
                }
            }
            let mut types = vec![0; 2 * n];
            types.extend(std::iter::repeat_n(1, n));
            (types, edges)
        }
        Family::DecoratedGrid(m, n) => {
            if m % 2 == 1 || n % 2 == 1 {
                return Err(GraphError::OddGridDimension { m, n });
            }
            at_least("decorated grid width", 6, m)?;
            at_least("decorated grid height", 4, n)?;
            let id = |x: usize, y: usize| (x % m) * n + (y % n);
            let mut types = vec![0; m * n];
            let mut edges = Vec::new();
            for x in 0..m {
                for y in 0..n {
                    let ty = match (x % 2, y % 2) {
                        (0, 0) => 0,
                        (0, 1) => 1,
                        (1, 0) => 2,
                        _ => 3,
                    };
                    types[id(x, y)] = ty;
                    edges.push((id(x, y), id(x + 1, y)));
                    edges.push((id(x, y), id(x, y + 1)));
                    match ty {
                        0 => edges.push((id(x, y), id(x + 1, y + 1))),
                        // each C vertex owns its edge to the right; the left
                        // one belongs to the C vertex two columns back
                        2 => edges.push((id(x, y), id(x + 2, y))),
                        _ => {}
                    }
                }
            }
            (types, edges)
        }
        Family::Torus2D(l) => {
            at_least("torus side", 3, l)?;
            let id = |x: usize, y: usize| (x % l) * l + (y % l);
            let mut edges = Vec::with_capacity(2 * l * l);
            for x in 0..l {
                for y in 0..l {
                    edges.push((id(x, y), id(x + 1, y)));
                    edges.push((id(x, y), id(x, y + 1)));
                }
            }
            (vec![0; l * l], edges)
        }
        Family::Comb(n) => {
            at_least("comb backbone", 3, n)?;
            let mut edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
            edges.extend((0..n).map(|i| (i, n + i)));
            let mut types = vec![0; n];
            types.extend(std::iter::repeat_n(1, n));
            (types, edges)
        }
        Family::Strip3(n) => {
            at_least("strip length", 3, n)?;
            // rows 0 and 2 are boundary, row 1 is the middle
            let id = |x: usize, row: usize| row * n + (x % n);
            let mut edges = Vec::with_capacity(5 * n);
            for x in 0..n {
                for row in 0..3 {
                    edges.push((id(x, row), id(x + 1, row)));
                }
                edges.push((id(x, 0), id(x, 1)));
                edges.push((id(x, 1), id(x, 2)));
            }
            let mut types = vec![0; n];
            types.extend(std::iter::repeat_n(1, n));
            types.extend(std::iter::repeat_n(0, n));
            (types, edges)
        }
        Family::Complete(n) => {
            let edges = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
            (vec![0; n], edges)
        }
    };
    Graph::from_edges(types, &edges, blueprint)
}
