use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Graph, GraphError, TypeBlueprint};

/// Full restarts allowed before [`GraphError::MatchingFailed`].
pub const DEFAULT_RESTART_BUDGET: usize = 100;

/// Switch attempts per edge within one restart before giving up on it.
const SWITCH_ATTEMPTS_PER_EDGE: usize = 50;

/// Per-type vertex counts `round(p_i * target_size)`, checked for the
/// parity and size conditions a simple realization needs.
pub fn feasible_type_sizes(bp: &TypeBlueprint, target_size: usize) -> Result<Vec<usize>, GraphError> {
    let nt = bp.n_types();
    let sizes: Vec<usize> = bp
        .proportions()
        .iter()
        .map(|p| (p * target_size as f64).round() as usize)
        .collect();
    let infeasible = |reason: String| GraphError::InfeasibleSize {
        size: target_size,
        reason,
    };
    if sizes.iter().sum::<usize>() != target_size {
        return Err(infeasible(format!("rounded type sizes {sizes:?} do not sum to the target")));
    }
    if let Some(i) = sizes.iter().position(|&c| c == 0) {
        return Err(infeasible(format!("type {i} would be empty")));
    }
    for i in 0..nt {
        for j in 0..nt {
            let (ci, cj) = (sizes[i], sizes[j]);
            let (nij, nji) = (bp.count(i, j) as usize, bp.count(j, i) as usize);
            if ci * nij != cj * nji {
                return Err(infeasible(format!(
                    "#V_{i}*n_{i}({j}) = {} != #V_{j}*n_{j}({i}) = {}",
                    ci * nij,
                    cj * nji
                )));
            }
            if i == j && (ci * nij) % 2 == 1 {
                return Err(infeasible(format!("odd stub count within type {i}")));
            }
            let room = if i == j { cj - 1 } else { cj };
            if nij > room {
                return Err(infeasible(format!(
                    "type {i} needs {nij} distinct neighbours of type {j} but only {room} exist"
                )));
            }
        }
    }
    Ok(sizes)
}

/// Random simple graph realizing `bp` on `target_size` vertices.
///
/// Vertices are laid out type by type. For every unordered type pair the
/// half-edges are matched uniformly at random; loops and repeated edges are
/// then removed by degree-preserving double-edge switches inside the same
/// block. A block that cannot be repaired triggers a full restart. The output
/// depends only on `(bp, target_size, seed)`. Connectivity is not enforced;
/// check [`super::verify_realization`].
pub fn build_configuration_model(
    bp: &TypeBlueprint,
    target_size: usize,
    seed: u64,
) -> Result<Graph, GraphError> {
    build_configuration_model_with_budget(bp, target_size, seed, DEFAULT_RESTART_BUDGET)
}

pub fn build_configuration_model_with_budget(
    bp: &TypeBlueprint,
    target_size: usize,
    seed: u64,
    restarts: usize,
) -> Result<Graph, GraphError> {
    let sizes = feasible_type_sizes(bp, target_size)?;
    let mut start = vec![0usize; sizes.len() + 1];
    for (i, &c) in sizes.iter().enumerate() {
        start[i + 1] = start[i] + c;
    }
    let types: Vec<usize> = sizes
        .iter()
        .enumerate()
        .flat_map(|(i, &c)| std::iter::repeat_n(i, c))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    'restart: for _ in 0..restarts.max(1) {
        let mut edges = Vec::new();
        for i in 0..sizes.len() {
            for j in i..sizes.len() {
                let nij = bp.count(i, j) as usize;
                if nij == 0 {
                    continue;
                }
                let block = if i == j {
                    match_within(start[i]..start[i + 1], nij, &mut rng)
                } else {
                    let nji = bp.count(j, i) as usize;
                    match_between(start[i]..start[i + 1], nij, start[j]..start[j + 1], nji, &mut rng)
                };
                match block {
                    Some(b) => edges.extend(b),
                    None => continue 'restart,
                }
            }
        }
        return Graph::from_edges(types, &edges, bp.clone());
    }
    Err(GraphError::MatchingFailed { budget: restarts })
}

fn key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

fn match_within(range: std::ops::Range<usize>, per_vertex: usize, rng: &mut ChaCha8Rng) -> Option<Vec<(usize, usize)>> {
    let mut stubs: Vec<usize> = range.flat_map(|v| std::iter::repeat_n(v, per_vertex)).collect();
    stubs.shuffle(rng);
    let edges: Vec<(usize, usize)> = stubs.chunks_exact(2).map(|p| (p[0], p[1])).collect();
    repair(edges, false, rng)
}

fn match_between(
    left: std::ops::Range<usize>,
    per_left: usize,
    right: std::ops::Range<usize>,
    per_right: usize,
    rng: &mut ChaCha8Rng,
) -> Option<Vec<(usize, usize)>> {
    let ls: Vec<usize> = left.flat_map(|v| std::iter::repeat_n(v, per_left)).collect();
    let mut rs: Vec<usize> = right.flat_map(|v| std::iter::repeat_n(v, per_right)).collect();
    debug_assert_eq!(ls.len(), rs.len());
    rs.shuffle(rng);
    repair(ls.into_iter().zip(rs).collect(), true, rng)
}

/// Removes loops and repeated edges by double-edge switches.
/// For bipartite blocks the first coordinate always stays on the left side.
fn repair(mut edges: Vec<(usize, usize)>, bipartite: bool, rng: &mut ChaCha8Rng) -> Option<Vec<(usize, usize)>> {
    let mut mult: HashMap<(usize, usize), u32> = HashMap::with_capacity(edges.len());
    for &(a, b) in &edges {
        *mult.entry(key(a, b)).or_insert(0) += 1;
    }
    let is_bad = |e: (usize, usize), mult: &HashMap<(usize, usize), u32>| e.0 == e.1 || mult[&key(e.0, e.1)] > 1;
    let mut budget = SWITCH_ATTEMPTS_PER_EDGE * edges.len().max(1);
    loop {
        let bad: Vec<usize> = (0..edges.len()).filter(|&e| is_bad(edges[e], &mult)).collect();
        if bad.is_empty() {
            return Some(edges);
        }
        if edges.len() < 2 {
            return None;
        }
        for e in bad {
            if !is_bad(edges[e], &mult) {
                continue;
            }
            loop {
                if budget == 0 {
                    return None;
                }
                budget -= 1;
                let f = rng.random_range(0..edges.len());
                if f == e {
                    continue;
                }
                let (a, b) = edges[e];
                let (c, d) = edges[f];
                let (n1, n2) = if bipartite || rng.random_bool(0.5) {
                    ((a, d), (c, b))
                } else {
                    ((a, c), (b, d))
                };
                if n1.0 == n1.1 || n2.0 == n2.1 || key(n1.0, n1.1) == key(n2.0, n2.1) {
                    continue;
                }
                if mult.get(&key(n1.0, n1.1)).copied().unwrap_or(0) > 0
                    || mult.get(&key(n2.0, n2.1)).copied().unwrap_or(0) > 0
                {
                    continue;
                }
                for old in [(a, b), (c, d)] {
                    let m = mult.get_mut(&key(old.0, old.1)).expect("edge present");
                    *m -= 1;
                }
                *mult.entry(key(n1.0, n1.1)).or_insert(0) += 1;
                *mult.entry(key(n2.0, n2.1)).or_insert(0) += 1;
                edges[e] = n1;
                edges[f] = n2;
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qtgraph::verify_realization;

    #[test]
    fn two_four_blueprint_realizes() {
        let bp = TypeBlueprint::new(vec![vec![0, 2], vec![4, 0]]).unwrap();
        for seed in 0..20 {
            let g = build_configuration_model(&bp, 24, seed).unwrap();
            assert_eq!(g.type_sizes(), vec![16, 8]);
            assert!(verify_realization(&g).passed, "seed {seed}");
        }
    }

    #[test]
    fn two_regular_on_five_is_a_cycle() {
        let bp = TypeBlueprint::new(vec![vec![2]]).unwrap();
        let g = build_configuration_model(&bp, 5, 3).unwrap();
        let r = verify_realization(&g);
        assert!(r.passed);
        // 5 = 3 + 2 is impossible for simple cycles, so C5 is the only option
        assert!(r.connected);
    }

    #[test]
    fn infeasible_sizes() {
        let bp = TypeBlueprint::new(vec![vec![0, 2], vec![4, 0]]).unwrap();
        assert!(matches!(
            build_configuration_model(&bp, 7, 0),
            Err(GraphError::InfeasibleSize { size: 7, .. })
        ));
        let cubic = TypeBlueprint::new(vec![vec![3]]).unwrap();
        assert!(matches!(
            build_configuration_model(&cubic, 5, 0),
            Err(GraphError::InfeasibleSize { .. })
        ));
        // a 4-regular simple graph needs at least 5 vertices
        let quartic = TypeBlueprint::new(vec![vec![4]]).unwrap();
        assert!(build_configuration_model(&quartic, 4, 0).is_err());
        assert!(build_configuration_model(&quartic, 5, 0).is_ok());
    }

    #[test]
    fn five_orbit_graph_realizes() {
        let bp = TypeBlueprint::new(vec![
            vec![0, 24, 2, 0, 3],
            vec![24, 0, 2, 0, 1],
            vec![2, 2, 0, 4, 0],
            vec![0, 0, 4, 0, 0],
            vec![3, 1, 0, 0, 0],
        ])
        .unwrap();
        let g = build_configuration_model(&bp, 500, 11).unwrap();
        let r = verify_realization(&g);
        assert!(r.passed);
        assert_eq!(g.type_sizes(), vec![100; 5]);
    }

    #[test]
    fn zero_budget_counts_as_one_attempt() {
        let bp = TypeBlueprint::new(vec![vec![2]]).unwrap();
        assert!(build_configuration_model_with_budget(&bp, 6, 1, 0).is_ok());
    }

    #[test]
    fn same_seed_same_graph() {
        let bp = TypeBlueprint::new(vec![vec![1, 2], vec![1, 3]]).unwrap();
        let a = build_configuration_model(&bp, 60, 42).unwrap();
        let b = build_configuration_model(&bp, 60, 42).unwrap();
        assert_eq!(a, b);
        let c = build_configuration_model(&bp, 60, 43).unwrap();
        assert_ne!(a.edges(), c.edges());
    }
}
