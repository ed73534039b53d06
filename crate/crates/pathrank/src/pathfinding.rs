use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashSet};

use crate::error::{Error, Result};
use crate::network::{CostKind, RoadNetwork, VertexId};

/// Simple (loop-free) path through a road network. Construction checks the
/// structural invariants; edge existence is checked against a concrete
/// network by [`Path::validate`] or any cost computation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Path {
    vertices: Vec<VertexId>,
}

impl Path {
    pub fn new(vertices: Vec<VertexId>) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::validation("path must visit at least 2 vertices"));
        }
        let mut seen = HashSet::with_capacity(vertices.len());
        for v in &vertices {
            if !seen.insert(v.0) {
                return Err(Error::validation(format!("path revisits vertex {v}")));
            }
        }
        Ok(Path { vertices })
    }

    pub fn vertices(&self) -> &[VertexId] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        false // invariant: at least 2 vertices
    }

    pub fn source(&self) -> VertexId {
        self.vertices[0]
    }

    pub fn dest(&self) -> VertexId {
        *self.vertices.last().unwrap()
    }

    /// Consecutive vertex pairs, i.e. the directed edge set of the path.
    pub fn edge_pairs(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.vertices.windows(2).map(|w| (w[0].0, w[1].0))
    }

    /// Check every hop exists in `net`.
    pub fn validate(&self, net: &RoadNetwork) -> Result<()> {
        for (a, b) in self.edge_pairs() {
            if net.edge_between(VertexId(a), VertexId(b)).is_none() {
                return Err(Error::validation(format!("no edge {a} -> {b}")));
            }
        }
        Ok(())
    }

    pub fn cost(&self, net: &RoadNetwork, kind: CostKind) -> Result<f64> {
        net.path_cost(&self.vertices, kind)
    }

    /// Space-separated vertex ids, the on-disk representation.
    pub fn to_line(&self) -> String {
        let mut s = String::new();
        for (i, v) in self.vertices.iter().enumerate() {
            if i > 0 {
                s.push(' ');
            }
            s.push_str(&v.to_string());
        }
        s
    }

    pub fn parse_tokens<'a, I: Iterator<Item = &'a str>>(tokens: I) -> Result<Self> {
        let mut vertices = Vec::new();
        for t in tokens {
            let id: u32 = t
                .parse()
                .map_err(|_| Error::validation(format!("bad vertex id {t:?}")))?;
            vertices.push(VertexId(id));
        }
        Path::new(vertices)
    }
}

fn check_endpoints(net: &RoadNetwork, source: VertexId, dest: VertexId) -> Result<()> {
    if !net.contains_vertex(source) || !net.contains_vertex(dest) {
        return Err(Error::validation(format!(
            "endpoint outside 0..{}: {source} -> {dest}",
            net.vertex_count()
        )));
    }
    if source == dest {
        return Err(Error::validation(format!(
            "source and destination coincide at {source}"
        )));
    }
    Ok(())
}

/// Edges and vertices removed from consideration during a spur search.
#[derive(Debug, Default, Clone)]
struct GraphFilter {
    vertices: HashSet<u32>,
    edges: HashSet<(u32, u32)>,
}

impl GraphFilter {
    fn blocks_edge(&self, from: VertexId, to: VertexId) -> bool {
        self.vertices.contains(&from.0)
            || self.vertices.contains(&to.0)
            || self.edges.contains(&(from.0, to.0))
    }
}

#[derive(PartialEq)]
struct HeapEntry {
    cost: f64,
    vertex: u32,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; reverse for smallest-cost-first.
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Cost of the cheapest path from each vertex to `dest` under the filter,
/// infinity where unreachable. Dijkstra over reversed edges; costs are
/// strictly positive so the first settle is final.
fn reverse_distances(
    net: &RoadNetwork,
    dest: VertexId,
    kind: CostKind,
    filter: &GraphFilter,
) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; net.vertex_count()];
    if filter.vertices.contains(&dest.0) {
        return dist;
    }
    dist[dest.0 as usize] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(HeapEntry { cost: 0.0, vertex: dest.0 });
    while let Some(HeapEntry { cost, vertex }) = heap.pop() {
        if cost > dist[vertex as usize] {
            continue;
        }
        for edge in net.incoming(VertexId(vertex)) {
            if filter.blocks_edge(edge.from, edge.to) {
                continue;
            }
            let next = edge.cost(kind) + cost;
            let slot = &mut dist[edge.from.0 as usize];
            if next < *slot {
                *slot = next;
                heap.push(HeapEntry { cost: next, vertex: edge.from.0 });
            }
        }
    }
    dist
}

/// Walk from `source` towards `dest` always taking the smallest-id successor
/// that lies on some cheapest path. `dist` must come from
/// [`reverse_distances`] with the same filter.
///
/// Tightness uses exact float equality: a successor is on a cheapest path iff
/// edge.cost + dist[to] == dist[from], and Dijkstra assigned dist[from] as
/// exactly that sum for at least one edge, so the comparison never misses due
/// to rounding. Each tight hop strictly decreases dist (costs are positive),
/// so the walk terminates and never revisits a vertex.
fn tight_lex_path(
    net: &RoadNetwork,
    source: VertexId,
    dest: VertexId,
    kind: CostKind,
    filter: &GraphFilter,
    dist: &[f64],
) -> Path {
    let mut vertices = vec![source];
    let mut cur = source;
    while cur != dest {
        let here = dist[cur.0 as usize];
        let mut chosen = None;
        for edge in net.outgoing(cur) {
            if filter.blocks_edge(edge.from, edge.to) {
                continue;
            }
            let through = dist[edge.to.0 as usize];
            if through.is_finite() && edge.cost(kind) + through == here {
                chosen = Some(edge.to);
                break; // outgoing() is sorted by id, first tight edge is lex-min
            }
        }
        cur = chosen.expect("finite dist implies a tight outgoing edge");
        vertices.push(cur);
    }
    Path { vertices }
}

fn shortest_filtered(
    net: &RoadNetwork,
    source: VertexId,
    dest: VertexId,
    kind: CostKind,
    filter: &GraphFilter,
) -> Option<(Path, f64)> {
    if filter.vertices.contains(&source.0) {
        return None;
    }
    let dist = reverse_distances(net, dest, kind, filter);
    let total = dist[source.0 as usize];
    if !total.is_finite() {
        return None;
    }
    Some((tight_lex_path(net, source, dest, kind, filter, &dist), total))
}

/// Cheapest path from `source` to `dest` under `kind`. Among equal-cost
/// optima the lexicographically smallest vertex sequence is returned, which
/// pins down one answer on tie-rich graphs.
pub fn shortest_path(
    net: &RoadNetwork,
    source: VertexId,
    dest: VertexId,
    kind: CostKind,
) -> Result<Path> {
    check_endpoints(net, source, dest)?;
    shortest_filtered(net, source, dest, kind, &GraphFilter::default())
        .map(|(p, _)| p)
        .ok_or(Error::NoPath { from: source.0, to: dest.0 })
}

#[derive(PartialEq)]
struct Candidate {
    cost: f64,
    vertices: Vec<VertexId>,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        // max-heap -> reverse: cheapest first, lexicographic vertex order
        // breaking cost ties so the stream is deterministic.
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.vertices.cmp(&self.vertices))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Lazy k-shortest-simple-paths stream (Yen's method). Each `next()` yields
/// the next cheapest simple path, ties broken by vertex sequence; the caller
/// decides how many to pull, so diversity filtering can keep scanning without
/// committing to a fixed k up front.
pub struct YenStream<'a> {
    net: &'a RoadNetwork,
    dest: VertexId,
    kind: CostKind,
    yielded: Vec<Vec<VertexId>>,
    pool: BinaryHeap<Candidate>,
    pooled: HashSet<Vec<VertexId>>,
    state: StreamState,
}

enum StreamState {
    Fresh(VertexId),
    Running,
    Done,
}

impl<'a> YenStream<'a> {
    pub fn new(
        net: &'a RoadNetwork,
        source: VertexId,
        dest: VertexId,
        kind: CostKind,
    ) -> Result<Self> {
        check_endpoints(net, source, dest)?;
        Ok(YenStream {
            net,
            dest,
            kind,
            yielded: Vec::new(),
            pool: BinaryHeap::new(),
            pooled: HashSet::new(),
            state: StreamState::Fresh(source),
        })
    }

    /// Expand spur paths off the most recently yielded path.
    fn expand_last(&mut self) {
        let base = self.yielded.last().expect("expand only after a yield").clone();
        for spur_idx in 0..base.len() - 1 {
            let spur = base[spur_idx];
            let root = &base[..=spur_idx];
            let mut filter = GraphFilter::default();
            // Root vertices (minus the spur itself) must stay off the spur
            // path, otherwise root + spur could revisit them.
            for v in &root[..spur_idx] {
                filter.vertices.insert(v.0);
            }
            // Ban the continuation edge of every already-yielded path that
            // shares this root, so the spur search cannot reproduce one.
            for prev in &self.yielded {
                if prev.len() > spur_idx + 1 && prev[..=spur_idx] == *root {
                    filter.edges.insert((prev[spur_idx].0, prev[spur_idx + 1].0));
                }
            }
            if let Some((spur_path, _)) = shortest_filtered(self.net, spur, self.dest, self.kind, &filter)
            {
                let mut vertices = root[..spur_idx].to_vec();
                vertices.extend_from_slice(spur_path.vertices());
                if self.pooled.insert(vertices.clone()) {
                    let cost = self
                        .net
                        .path_cost(&vertices, self.kind)
                        .expect("spur concatenation uses existing edges");
                    self.pool.push(Candidate { cost, vertices });
                }
            }
        }
    }
}

impl Iterator for YenStream<'_> {
    type Item = Path;

    fn next(&mut self) -> Option<Path> {
        match self.state {
            StreamState::Done => None,
            StreamState::Fresh(source) => {
                self.state = StreamState::Running;
                match shortest_filtered(self.net, source, self.dest, self.kind, &GraphFilter::default())
                {
                    None => {
                        self.state = StreamState::Done;
                        None
                    }
                    Some((path, _)) => {
                        self.pooled.insert(path.vertices().to_vec());
                        self.yielded.push(path.vertices().to_vec());
                        Some(path)
                    }
                }
            }
            StreamState::Running => {
                self.expand_last();
                match self.pool.pop() {
                    None => {
                        self.state = StreamState::Done;
                        None
                    }
                    Some(c) => {
                        self.yielded.push(c.vertices.clone());
                        Some(Path { vertices: c.vertices })
                    }
                }
            }
        }
    }
}

/// Distance-weighted Jaccard similarity over directed edge sets: total
/// distance of shared edges divided by total distance of the union. 1 iff the
/// edge sets coincide, 0 iff disjoint. Sums run in sorted edge order so the
/// result does not depend on path direction or input order beyond symmetry.
pub fn weighted_jaccard(net: &RoadNetwork, a: &Path, b: &Path) -> Result<f64> {
    a.validate(net)?;
    b.validate(net)?;
    let ea: BTreeSet<(u32, u32)> = a.edge_pairs().collect();
    let eb: BTreeSet<(u32, u32)> = b.edge_pairs().collect();
    let weight = |&(f, t): &(u32, u32)| {
        net.edge_between(VertexId(f), VertexId(t))
            .expect("validated edge")
            .distance
    };
    let inter: f64 = ea.intersection(&eb).map(weight).sum();
    let union: f64 = ea.union(&eb).map(weight).sum();
    Ok(inter / union)
}

#[derive(Debug, Clone, Copy)]
pub struct DiversifiedParams {
    /// Target number of mutually diverse paths.
    pub k: usize,
    /// Similarity threshold: an accepted set is pairwise weighted-Jaccard
    /// strictly below delta.
    pub delta: f64,
    /// Upper bound on how many stream paths are examined before giving up on
    /// filling k slots.
    pub max_candidates: usize,
}

impl DiversifiedParams {
    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::config("k must be >= 1"));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::config(format!(
                "delta must be in (0, 1], got {}",
                self.delta
            )));
        }
        if self.max_candidates < self.k {
            return Err(Error::config(format!(
                "max_candidates {} smaller than k {}",
                self.max_candidates, self.k
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct DiversifiedOutcome {
    pub paths: Vec<Path>,
    /// How many stream paths were pulled in total.
    pub examined: usize,
    /// True when the candidate cap stopped the scan before k slots filled.
    pub cap_hit: bool,
}

/// Greedy diversified top-k: scan paths in cost order and accept one iff its
/// weighted Jaccard similarity to every previously accepted path is < delta.
/// The cheapest path is always accepted.
pub fn diversified_top_k(
    net: &RoadNetwork,
    source: VertexId,
    dest: VertexId,
    kind: CostKind,
    params: &DiversifiedParams,
) -> Result<DiversifiedOutcome> {
    params.validate()?;
    let stream = YenStream::new(net, source, dest, kind)?;
    let mut paths: Vec<Path> = Vec::with_capacity(params.k);
    let mut examined = 0;
    let mut cap_hit = false;
    for candidate in stream {
        if examined == params.max_candidates {
            cap_hit = true;
            break;
        }
        examined += 1;
        let diverse = paths
            .iter()
            .map(|p| weighted_jaccard(net, &candidate, p))
            .collect::<Result<Vec<f64>>>()?
            .iter()
            .all(|&sim| sim < params.delta);
        if diverse {
            paths.push(candidate);
            if paths.len() == params.k {
                break;
            }
        }
    }
    if paths.is_empty() {
        return Err(Error::NoPath { from: source.0, to: dest.0 });
    }
    Ok(DiversifiedOutcome { paths, examined, cap_hit })
}

/// Diversified top-k under every cost kind, concatenated in the fixed
/// [`CostKind::ALL`] order with exact duplicates (same vertex sequence)
/// dropped keeping the first occurrence.
pub fn multi_cost_diversified(
    net: &RoadNetwork,
    source: VertexId,
    dest: VertexId,
    params: &DiversifiedParams,
) -> Result<DiversifiedOutcome> {
    let mut paths: Vec<Path> = Vec::new();
    let mut seen: HashSet<Vec<VertexId>> = HashSet::new();
    let mut examined = 0;
    let mut cap_hit = false;
    for kind in CostKind::ALL {
        let outcome = diversified_top_k(net, source, dest, kind, params)?;
        examined += outcome.examined;
        cap_hit |= outcome.cap_hit;
        for p in outcome.paths {
            if seen.insert(p.vertices().to_vec()) {
                paths.push(p);
            }
        }
    }
    Ok(DiversifiedOutcome { paths, examined, cap_hit })
}

/// Plain top-k: the k cheapest simple paths (fewer when the graph runs out).
pub fn top_k_paths(
    net: &RoadNetwork,
    source: VertexId,
    dest: VertexId,
    kind: CostKind,
    k: usize,
) -> Result<Vec<Path>> {
    if k == 0 {
        return Err(Error::config("k must be >= 1"));
    }
    let paths: Vec<Path> = YenStream::new(net, source, dest, kind)?.take(k).collect();
    if paths.is_empty() {
        return Err(Error::NoPath { from: source.0, to: dest.0 });
    }
    Ok(paths)
}
