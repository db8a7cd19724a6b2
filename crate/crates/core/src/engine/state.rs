use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EngineError, InitialCondition, SimConfig, Trajectory, VertexState, YyRule};
use crate::qtgraph::Graph;

const XY: u8 = 0;
const YY: u8 = 1;
const YZ: u8 = 2;
const INACTIVE: u8 = u8::MAX;

fn category(a: VertexState, b: VertexState) -> u8 {
    use VertexState::*;
    match (a, b) {
        (Ignorant, Spreader) | (Spreader, Ignorant) => XY,
        (Spreader, Spreader) => YY,
        (Spreader, Stifler) | (Stifler, Spreader) => YZ,
        _ => INACTIVE,
    }
}

/// Edge numbering shared by every run on the same graph.
#[derive(Debug, Clone)]
struct EdgeIndex {
    ends: Vec<(usize, usize)>,
    /// Edge id of every adjacency slot, aligned with the graph's flat
    /// neighbour array.
    slot_edge: Vec<u32>,
}

impl EdgeIndex {
    fn new(g: &Graph) -> Self {
        let ends = g.edges();
        let mut slot_edge = vec![0u32; 2 * ends.len()];
        for (id, &(u, v)) in ends.iter().enumerate() {
            let su = g.slot_offset(u) + g.neighbors(u).binary_search(&v).expect("symmetric adjacency");
            let sv = g.slot_offset(v) + g.neighbors(v).binary_search(&u).expect("symmetric adjacency");
            slot_edge[su] = id as u32;
            slot_edge[sv] = id as u32;
        }
        Self { ends, slot_edge }
    }
}

/// A scheduled spontaneous stifling. Ordered by time, then vertex.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Pending {
    time: f64,
    vertex: usize,
}

impl Eq for Pending {}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Pending {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.vertex.cmp(&other.vertex))
    }
}

/// Per-type event counters.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventCounters {
    /// Ignorant-to-spreader conversions, by type of the converted vertex.
    pub conversions: Vec<u64>,
    /// Contact stiflings, by type of the spreader that stops.
    pub contact_stiflings: Vec<u64>,
    /// Spontaneous stiflings, by type.
    pub spontaneous_stiflings: Vec<u64>,
    /// Every applied event, including stale-free spontaneous ones.
    pub events: u64,
}

impl EventCounters {
    fn new(n_types: usize) -> Self {
        Self {
            conversions: vec![0; n_types],
            contact_stiflings: vec![0; n_types],
            spontaneous_stiflings: vec![0; n_types],
            events: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Spontaneous { vertex: usize },
    Conversion { ignorant: usize, spreader: usize },
    ContactStifle { spreader: usize, other: usize },
    SpreaderPair { u: usize, v: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepOutcome {
    Event { time: f64, kind: EventKind },
    /// Nothing left to happen before the horizon.
    End,
}

/// Prepared simulator for one graph; cheap to reuse across runs.
#[derive(Debug, Clone)]
pub struct Simulator<'g> {
    graph: &'g Graph,
    edges: EdgeIndex,
}

/// Mutable state of one run.
#[derive(Debug, Clone)]
pub struct SimState {
    states: Vec<VertexState>,
    counts: Vec<[u64; 3]>,
    edge_cat: Vec<u8>,
    /// Position of each edge inside its category list.
    edge_pos: Vec<u32>,
    cat_edges: [Vec<u32>; 3],
    pending: BinaryHeap<Reverse<Pending>>,
    clock: f64,
    counters: EventCounters,
    rng: ChaCha8Rng,
}

impl SimState {
    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn state_of(&self, v: usize) -> VertexState {
        self.states[v]
    }

    pub fn states(&self) -> &[VertexState] {
        &self.states
    }

    /// `[X_k, Y_k, Z_k]` per type.
    pub fn counts(&self) -> &[[u64; 3]] {
        &self.counts
    }

    /// `(n_XY, n_YY, n_YZ)`.
    pub fn category_counts(&self) -> (usize, usize, usize) {
        (
            self.cat_edges[XY as usize].len(),
            self.cat_edges[YY as usize].len(),
            self.cat_edges[YZ as usize].len(),
        )
    }

    /// Queue entries, stale ones included.
    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    /// Queue entries that still belong to a spreader.
    pub fn live_pending(&self) -> usize {
        self.pending
            .iter()
            .filter(|p| self.states[p.0.vertex] == VertexState::Spreader)
            .count()
    }

    pub fn counters(&self) -> &EventCounters {
        &self.counters
    }
}

impl<'g> Simulator<'g> {
    pub fn new(graph: &'g Graph) -> Self {
        Self {
            graph,
            edges: EdgeIndex::new(graph),
        }
    }

    pub fn graph(&self) -> &Graph {
        self.graph
    }

    /// Initial state for `cfg` driven by replica stream `stream` of `seed`.
    pub fn init_with_stream(&self, cfg: &SimConfig, seed: u64, stream: u64) -> Result<SimState, EngineError> {
        let g = self.graph;
        cfg.validate(g.num_vertices(), g.n_types())?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let states = match &cfg.initial {
            InitialCondition::Explicit(states) => states.clone(),
            InitialCondition::Proportions(props) => {
                let mut states = vec![VertexState::Ignorant; g.num_vertices()];
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
                    // spreaders first, then stiflers, the rest stay ignorant
                    for (rank, idx) in sample(&mut rng, size, ny + nz).into_iter().enumerate() {
                        states[members[idx]] = if rank < ny {
                            VertexState::Spreader
                        } else {
                            VertexState::Stifler
                        };
                    }
                }
                states
            }
        };

        let nt = g.n_types();
        let mut counts = vec![[0u64; 3]; nt];
        for (v, s) in states.iter().enumerate() {
            counts[g.type_of(v)][s.index()] += 1;
        }
        let mut st = SimState {
            edge_cat: vec![INACTIVE; self.edges.ends.len()],
            edge_pos: vec![u32::MAX; self.edges.ends.len()],
            cat_edges: [Vec::new(), Vec::new(), Vec::new()],
            pending: BinaryHeap::new(),
            clock: 0.0,
            counters: EventCounters::new(nt),
            counts,
            states,
            rng,
        };
        for e in 0..self.edges.ends.len() {
            let (u, v) = self.edges.ends[e];
            let c = category(st.states[u], st.states[v]);
            self.place_edge(&mut st, e, c);
        }
        for v in 0..g.num_vertices() {
            if st.states[v] == VertexState::Spreader {
                self.schedule(&mut st, cfg, v);
            }
        }
        Ok(st)
    }

    pub fn init(&self, cfg: &SimConfig) -> Result<SimState, EngineError> {
        self.init_with_stream(cfg, cfg.seed, 0)
    }

    fn schedule(&self, st: &mut SimState, cfg: &SimConfig, v: usize) {
        let eta = cfg.law.sample(&mut st.rng);
        if eta.is_finite() {
            st.pending.push(Reverse(Pending {
                time: st.clock + eta,
                vertex: v,
            }));
        }
    }

    fn place_edge(&self, st: &mut SimState, e: usize, new_cat: u8) {
        let old = st.edge_cat[e];
        if old == new_cat {
            return;
        }
        if old != INACTIVE {
            let list = &mut st.cat_edges[old as usize];
            let pos = st.edge_pos[e] as usize;
            let last = *list.last().expect("edge is listed");
            list.swap_remove(pos);
            if last as usize != e {
                st.edge_pos[last as usize] = pos as u32;
            }
        }
        if new_cat != INACTIVE {
            let list = &mut st.cat_edges[new_cat as usize];
            st.edge_pos[e] = list.len() as u32;
            list.push(e as u32);
        } else {
            st.edge_pos[e] = u32::MAX;
        }
        st.edge_cat[e] = new_cat;
    }

    fn set_state(&self, st: &mut SimState, v: usize, to: VertexState) {
        let g = self.graph;
        let from = st.states[v];
        let k = g.type_of(v);
        st.counts[k][from.index()] -= 1;
        st.counts[k][to.index()] += 1;
        st.states[v] = to;
        let base = g.slot_offset(v);
        for (i, &u) in g.neighbors(v).iter().enumerate() {
            let e = self.edges.slot_edge[base + i] as usize;
            let c = category(to, st.states[u]);
            self.place_edge(st, e, c);
        }
    }

    /// Time and kind of the next event, or `None` when nothing is left.
    /// Does not apply the event; the clock is untouched.
    fn propose(&self, st: &mut SimState, cfg: &SimConfig) -> Option<(f64, Proposal)> {
        while let Some(Reverse(head)) = st.pending.peek() {
            // a vertex enters the spreader state at most once, so any entry
            // for a non-spreader is stale
            if st.states[head.vertex] == VertexState::Spreader {
                break;
            }
            st.pending.pop();
        }
        let t_stifle = st.pending.peek().map_or(f64::INFINITY, |p| p.0.time);
        let active = st.cat_edges.iter().map(Vec::len).sum::<usize>();
        let t_contact = if active > 0 {
            let u: f64 = st.rng.random();
            st.clock - (-u).ln_1p() / (cfg.lambda * active as f64)
        } else {
            f64::INFINITY
        };
        if t_stifle.is_infinite() && t_contact.is_infinite() {
            return None;
        }
        // ties go to the scheduled stifling
        if t_stifle <= t_contact {
            Some((t_stifle, Proposal::Stifle))
        } else {
            Some((t_contact, Proposal::Contact))
        }
    }

    fn apply(&self, st: &mut SimState, cfg: &SimConfig, time: f64, proposal: Proposal) -> EventKind {
        let g = self.graph;
        st.clock = time;
        st.counters.events += 1;
        let kind = match proposal {
            Proposal::Stifle => {
                let Reverse(p) = st.pending.pop().expect("proposed stifling is queued");
                self.set_state(st, p.vertex, VertexState::Stifler);
                st.counters.spontaneous_stiflings[g.type_of(p.vertex)] += 1;
                EventKind::Spontaneous { vertex: p.vertex }
            }
            Proposal::Contact => {
                let sizes = st.cat_edges.each_ref().map(Vec::len);
                let total = sizes.iter().sum::<usize>();
                let mut pick = st.rng.random_range(0..total);
                let mut cat = 0;
                while pick >= sizes[cat] {
                    pick -= sizes[cat];
                    cat += 1;
                }
                let e = st.cat_edges[cat][pick] as usize;
                let (u, v) = self.edges.ends[e];
                match cat as u8 {
                    XY => {
                        let (x, y) = if st.states[u] == VertexState::Ignorant { (u, v) } else { (v, u) };
                        self.set_state(st, x, VertexState::Spreader);
                        st.counters.conversions[g.type_of(x)] += 1;
                        self.schedule(st, cfg, x);
                        EventKind::Conversion { ignorant: x, spreader: y }
                    }
                    YZ => {
                        let (y, z) = if st.states[u] == VertexState::Spreader { (u, v) } else { (v, u) };
                        self.set_state(st, y, VertexState::Stifler);
                        st.counters.contact_stiflings[g.type_of(y)] += 1;
                        EventKind::ContactStifle { spreader: y, other: z }
                    }
                    _ => match cfg.yy_rule {
                        YyRule::BothStifle => {
                            for w in [u, v] {
                                self.set_state(st, w, VertexState::Stifler);
                                st.counters.contact_stiflings[g.type_of(w)] += 1;
                            }
                            EventKind::SpreaderPair { u, v }
                        }
                        YyRule::InitiatorOnly => {
                            let (w, other) = if st.rng.random_bool(0.5) { (u, v) } else { (v, u) };
                            self.set_state(st, w, VertexState::Stifler);
                            st.counters.contact_stiflings[g.type_of(w)] += 1;
                            EventKind::ContactStifle { spreader: w, other }
                        }
                    },
                }
            }
        };
        if cfg.debug_checks {
            assert!(self.recount_matches(st), "category counts drifted at t = {time}");
        }
        debug_assert!(self.conserves(st));
        kind
    }

    /// Advances by one event unless the next one falls after `cfg.t_max`.
    pub fn step(&self, st: &mut SimState, cfg: &SimConfig) -> StepOutcome {
        match self.propose(st, cfg) {
            Some((time, p)) if time <= cfg.t_max => StepOutcome::Event {
                time,
                kind: self.apply(st, cfg, time, p),
            },
            _ => StepOutcome::End,
        }
    }

    /// Full recount of the per-type counts and the edge categories.
    pub fn recount_matches(&self, st: &SimState) -> bool {
        let g = self.graph;
        let mut counts = vec![[0u64; 3]; g.n_types()];
        for (v, s) in st.states.iter().enumerate() {
            counts[g.type_of(v)][s.index()] += 1;
        }
        let mut cats = [0usize; 3];
        for (e, &(u, v)) in self.edges.ends.iter().enumerate() {
            let c = category(st.states[u], st.states[v]);
            if c != st.edge_cat[e] {
                return false;
            }
            if c != INACTIVE {
                cats[c as usize] += 1;
                if st.cat_edges[c as usize][st.edge_pos[e] as usize] as usize != e {
                    return false;
                }
            }
        }
        counts == st.counts && cats == st.cat_edges.each_ref().map(Vec::len)
    }

    fn conserves(&self, st: &SimState) -> bool {
        let sizes = self.graph.type_sizes();
        st.counts
            .iter()
            .zip(sizes)
            .all(|(c, n)| c.iter().sum::<u64>() == n as u64)
    }

    /// Runs one trajectory on replica stream `stream` of `seed`.
    pub fn run_stream(&self, cfg: &SimConfig, seed: u64, stream: u64) -> Result<Trajectory, EngineError> {
        let steps = cfg.grid_steps()?;
        let mut st = self.init_with_stream(cfg, seed, stream)?;
        let mut traj = Trajectory::with_capacity(self.graph.type_sizes(), steps, cfg.grid_dt);
        let grid_time = |i: usize| i as f64 * cfg.grid_dt;
        let mut next = 0usize;
        while let Some((time, p)) = self.propose(&mut st, cfg) {
            if time > cfg.t_max {
                break;
            }
            // left-continuous: a grid point at an event time sees the
            // pre-event state
            while next <= steps && grid_time(next) <= time {
                traj.push(&st.counts);
                next += 1;
            }
            self.apply(&mut st, cfg, time, p);
        }
        while next <= steps {
            traj.push(&st.counts);
            next += 1;
        }
        traj.set_counters(st.counters);
        Ok(traj)
    }

    pub fn run(&self, cfg: &SimConfig) -> Result<Trajectory, EngineError> {
        self.run_stream(cfg, cfg.seed, 0)
    }
}

#[derive(Debug, Clone, Copy)]
enum Proposal {
    Stifle,
    Contact,
}

/// Initial state of a run of `cfg` on `g`.
pub fn init_state(g: &Graph, cfg: &SimConfig) -> Result<SimState, EngineError> {
    Simulator::new(g).init(cfg)
}

/// One trajectory recorded on the uniform grid `0, dt, ..., t_max`.
pub fn run(g: &Graph, cfg: &SimConfig) -> Result<Trajectory, EngineError> {
    Simulator::new(g).run(cfg)
}
