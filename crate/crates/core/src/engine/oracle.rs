use std::collections::HashMap;

use super::{EngineError, InitialCondition, SimConfig, VertexState, YyRule};
use crate::qtgraph::Graph;

/// Largest graph the exact oracle accepts (3^10 = 59049 states).
pub const ORACLE_MAX_VERTICES: usize = 10;

/// Largest `Lambda * dt` per uniformization chunk, keeping `exp(-Lambda dt)`
/// well above underflow.
const MAX_CHUNK: f64 = 30.0;
const POISSON_TAIL: f64 = 1e-13;

/// Expected per-type `[X, Y, Z]` counts at the requested times.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub times: Vec<f64>,
    /// `[time][type][state]`.
    pub expected: Vec<Vec<[f64; 3]>>,
    pub reachable_states: usize,
}

fn decode(code: u32, v: usize) -> usize {
    (code / 3u32.pow(v as u32) % 3) as usize
}

/// Exact expected counts for the memoryless dynamics by uniformization of
/// the master equation over the states reachable from the start.
///
/// Needs a law with a constant hazard (exponential or never). A
/// proportion-type initial condition is treated as the uniform mixture over
/// all placements the simulator could draw.
pub fn exact_oracle(g: &Graph, cfg: &SimConfig, times: &[f64]) -> Result<OracleResult, EngineError> {
    let n = g.num_vertices();
    if n > ORACLE_MAX_VERTICES {
        return Err(EngineError::TooManyVertices {
            n,
            max: ORACLE_MAX_VERTICES,
        });
    }
    let mu = cfg.law.markov_rate().ok_or(EngineError::NonExponentialLaw(cfg.law))?;
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(EngineError::InvalidTimes);
    }
    cfg.validate(n, g.n_types())?;

    let initial = initial_distribution(g, &cfg.initial)?;
    let pow3: Vec<u32> = (0..n).map(|v| 3u32.pow(v as u32)).collect();
    let edges = g.edges();

    // breadth-first enumeration of reachable states with their out-rates
    let mut index: HashMap<u32, usize> = HashMap::new();
    let mut codes: Vec<u32> = Vec::new();
    let mut queue = Vec::new();
    for &(c, _) in &initial {
        if let std::collections::hash_map::Entry::Vacant(e) = index.entry(c) {
            e.insert(codes.len());
            codes.push(c);
            queue.push(c);
        }
    }
    let mut transitions: Vec<Vec<(u32, f64)>> = Vec::new();
    let mut head = 0;
    while head < queue.len() {
        let code = queue[head];
        head += 1;
        let out = outgoing(code, n, &pow3, &edges, cfg.lambda, mu, cfg.yy_rule);
        for &(to, _) in &out {
            if let std::collections::hash_map::Entry::Vacant(e) = index.entry(to) {
                e.insert(codes.len());
                codes.push(to);
                queue.push(to);
            }
        }
        transitions.push(out);
    }
    let m = codes.len();
    let trans: Vec<Vec<(usize, f64)>> = transitions
        .into_iter()
        .map(|out| out.into_iter().map(|(c, r)| (index[&c], r)).collect())
        .collect();
    let exit: Vec<f64> = trans.iter().map(|o| o.iter().map(|x| x.1).sum()).collect();
    let big = exit.iter().copied().fold(0.0, f64::max);

    let mut p = vec![0.0; m];
    for &(c, w) in &initial {
        p[index[&c]] += w;
    }

    let mut expected = Vec::with_capacity(times.len());
    let mut now = 0.0;
    for &t in times {
        let mut remaining = t - now;
        if big > 0.0 {
            while remaining > 0.0 {
                let dt = remaining.min(MAX_CHUNK / big);
                p = uniformize(&p, &trans, &exit, big, dt);
                remaining -= dt;
            }
        }
        now = t;
        let mut e = vec![[0.0; 3]; g.n_types()];
        for (i, &w) in p.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for v in 0..n {
                e[g.type_of(v)][decode(codes[i], v)] += w;
            }
        }
        expected.push(e);
    }
    Ok(OracleResult {
        times: times.to_vec(),
        expected,
        reachable_states: m,
    })
}

fn outgoing(code: u32, n: usize, pow3: &[u32], edges: &[(usize, usize)], lambda: f64, mu: f64, rule: YyRule) -> Vec<(u32, f64)> {
    let st = |v: usize| decode(code, v);
    let mut out = Vec::new();
    for &(u, v) in edges {
        match (st(u), st(v)) {
            (0, 1) => out.push((code + pow3[u], lambda)),
            (1, 0) => out.push((code + pow3[v], lambda)),
            (1, 2) => out.push((code + pow3[u], lambda)),
            (2, 1) => out.push((code + pow3[v], lambda)),
            (1, 1) => match rule {
                YyRule::BothStifle => out.push((code + pow3[u] + pow3[v], lambda)),
                YyRule::InitiatorOnly => {
                    out.push((code + pow3[u], lambda / 2.0));
                    out.push((code + pow3[v], lambda / 2.0));
                }
            },
            _ => {}
        }
    }
    if mu > 0.0 {
        for v in 0..n {
            if st(v) == 1 {
                out.push((code + pow3[v], mu));
            }
        }
    }
    out
}

/// `p exp(Q dt)` with `Q` given by its jumps and exit rates.
fn uniformize(p: &[f64], trans: &[Vec<(usize, f64)>], exit: &[f64], big: f64, dt: f64) -> Vec<f64> {
    let a = big * dt;
    let mut weight = (-a).exp();
    let mut cum = weight;
    let mut term = p.to_vec();
    let mut acc: Vec<f64> = term.iter().map(|x| x * weight).collect();
    let mut k = 0usize;
    while 1.0 - cum > POISSON_TAIL {
        let mut next = vec![0.0; p.len()];
        for (i, &w) in term.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            next[i] += w * (1.0 - exit[i] / big);
            for &(j, r) in &trans[i] {
                next[j] += w * r / big;
            }
        }
        term = next;
        k += 1;
        weight *= a / k as f64;
        cum += weight;
        for (s, t) in acc.iter_mut().zip(&term) {
            *s += weight * t;
        }
        if k > 10_000 {
            break;
        }
    }
    acc
}

/// Starting codes with their probabilities.
fn initial_distribution(g: &Graph, init: &InitialCondition) -> Result<Vec<(u32, f64)>, EngineError> {
    let encode = |s: &[VertexState]| -> u32 {
        s.iter()
            .enumerate()
            .map(|(v, x)| x.index() as u32 * 3u32.pow(v as u32))
            .sum()
    };
    match init {
        InitialCondition::Explicit(s) => Ok(vec![(encode(s), 1.0)]),
        InitialCondition::Proportions(props) => {
            let mut partial: Vec<Vec<VertexState>> = vec![vec![VertexState::Ignorant; g.num_vertices()]];
            for (k, members) in g.vertices_by_type().into_iter().enumerate() {
                let size = members.len();
                let ny = (props[k][1] * size as f64).round() as usize;
                let nz = (props[k][2] * size as f64).round() as usize;
                if ny + nz > size {
                    return Err(EngineError::ProportionRoundingImpossible {
                        ty: k,
                        size,
                        spreaders: ny,
                        stiflers: nz,
                    });
                }
                let labels = placements(size, ny, nz);
                let mut next = Vec::with_capacity(partial.len() * labels.len());
                for base in &partial {
                    for lab in &labels {
                        let mut s = base.clone();
                        for (i, &l) in lab.iter().enumerate() {
                            s[members[i]] = l;
                        }
                        next.push(s);
                    }
                }
                partial = next;
            }
            let w = 1.0 / partial.len() as f64;
            Ok(partial.iter().map(|s| (encode(s), w)).collect())
        }
    }
}

/// All labelings of `size` slots with exactly `ny` spreaders and `nz` stiflers.
fn placements(size: usize, ny: usize, nz: usize) -> Vec<Vec<VertexState>> {
    fn rec(i: usize, ny: usize, nz: usize, cur: &mut Vec<VertexState>, out: &mut Vec<Vec<VertexState>>, size: usize) {
        if i == size {
            if ny == 0 && nz == 0 {
                out.push(cur.clone());
            }
            return;
        }
        if size - i < ny + nz {
            return;
        }
        if ny > 0 {
            cur.push(VertexState::Spreader);
            rec(i + 1, ny - 1, nz, cur, out, size);
            cur.pop();
        }
        if nz > 0 {
            cur.push(VertexState::Stifler);
            rec(i + 1, ny, nz - 1, cur, out, size);
            cur.pop();
        }
        cur.push(VertexState::Ignorant);
        rec(i + 1, ny, nz, cur, out, size);
        cur.pop();
    }
    let mut out = Vec::new();
    rec(0, ny, nz, &mut Vec::new(), &mut out, size);
    out
}
