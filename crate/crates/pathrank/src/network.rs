use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Index into the vertex table of a [`RoadNetwork`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VertexId(pub u32);

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Directed road segment. All three costs are strictly positive; units are
/// metres, seconds and millilitres but nothing downstream depends on that.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub from: VertexId,
    pub to: VertexId,
    pub distance: f64,
    pub travel_time: f64,
    pub fuel: f64,
}

impl Edge {
    pub fn cost(&self, kind: CostKind) -> f64 {
        match kind {
            CostKind::Distance => self.distance,
            CostKind::TravelTime => self.travel_time,
            CostKind::Fuel => self.fuel,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CostKind {
    Distance,
    TravelTime,
    Fuel,
}

impl CostKind {
    /// Fixed iteration order used everywhere a result aggregates over all
    /// three costs; changing it would change multi-cost candidate order.
    pub const ALL: [CostKind; 3] = [CostKind::Distance, CostKind::TravelTime, CostKind::Fuel];

    pub fn as_str(&self) -> &'static str {
        match self {
            CostKind::Distance => "distance",
            CostKind::TravelTime => "travel-time",
            CostKind::Fuel => "fuel",
        }
    }
}

impl fmt::Display for CostKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for CostKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "distance" => Ok(CostKind::Distance),
            "travel-time" => Ok(CostKind::TravelTime),
            "fuel" => Ok(CostKind::Fuel),
            other => Err(Error::config(format!(
                "unknown cost kind {other:?}, expected distance, travel-time or fuel"
            ))),
        }
    }
}

/// Directed multigraph-free road graph: at most one edge per ordered vertex
/// pair, no self loops, strictly positive finite costs.
///
/// Adjacency lists are kept sorted by neighbour id so every traversal in the
/// crate enumerates edges in a platform-independent order.
#[derive(Debug, Clone)]
pub struct RoadNetwork {
    vertex_count: usize,
    edges: Vec<Edge>,
    outgoing: Vec<Vec<usize>>,
    incoming: Vec<Vec<usize>>,
    by_pair: HashMap<(u32, u32), usize>,
}

impl RoadNetwork {
    pub fn new(vertex_count: usize) -> Result<Self> {
        if vertex_count == 0 {
            return Err(Error::validation("network needs at least one vertex"));
        }
        Ok(RoadNetwork {
            vertex_count,
            edges: Vec::new(),
            outgoing: vec![Vec::new(); vertex_count],
            incoming: vec![Vec::new(); vertex_count],
            by_pair: HashMap::new(),
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn contains_vertex(&self, v: VertexId) -> bool {
        (v.0 as usize) < self.vertex_count
    }

    pub fn add_edge(&mut self, edge: Edge) -> Result<()> {
        if !self.contains_vertex(edge.from) || !self.contains_vertex(edge.to) {
            return Err(Error::validation(format!(
                "edge {} -> {} references a vertex outside 0..{}",
                edge.from, edge.to, self.vertex_count
            )));
        }
        if edge.from == edge.to {
            return Err(Error::validation(format!("self loop at vertex {}", edge.from)));
        }
        for (name, value) in [
            ("distance", edge.distance),
            ("travel_time", edge.travel_time),
            ("fuel", edge.fuel),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::validation(format!(
                    "edge {} -> {}: {name} must be finite and > 0, got {value}",
                    edge.from, edge.to
                )));
            }
        }
        let key = (edge.from.0, edge.to.0);
        if self.by_pair.contains_key(&key) {
            return Err(Error::validation(format!(
                "duplicate edge {} -> {}",
                edge.from, edge.to
            )));
        }
        let idx = self.edges.len();
        let out = &mut self.outgoing[edge.from.0 as usize];
        let pos = out
            .binary_search_by_key(&edge.to.0, |&e| self.edges[e].to.0)
            .unwrap_err();
        out.insert(pos, idx);
        let inc = &mut self.incoming[edge.to.0 as usize];
        let pos = inc
            .binary_search_by_key(&edge.from.0, |&e| self.edges[e].from.0)
            .unwrap_err();
        inc.insert(pos, idx);
        self.by_pair.insert(key, idx);
        self.edges.push(edge);
        Ok(())
    }

    /// Outgoing edges of `v`, sorted by target id.
    pub fn outgoing(&self, v: VertexId) -> impl Iterator<Item = &Edge> + '_ {
        self.outgoing[v.0 as usize].iter().map(move |&i| &self.edges[i])
    }

    /// Incoming edges of `v`, sorted by source id.
    pub fn incoming(&self, v: VertexId) -> impl Iterator<Item = &Edge> + '_ {
        self.incoming[v.0 as usize].iter().map(move |&i| &self.edges[i])
    }

    pub fn edge_between(&self, from: VertexId, to: VertexId) -> Option<&Edge> {
        self.by_pair.get(&(from.0, to.0)).map(|&i| &self.edges[i])
    }

    /// Total cost of a vertex sequence, summed front to back. Every
    /// consecutive pair must be an edge.
    pub fn path_cost(&self, vertices: &[VertexId], kind: CostKind) -> Result<f64> {
        if vertices.len() < 2 {
            return Err(Error::validation("path cost needs at least 2 vertices"));
        }
        let mut total = 0.0;
        for pair in vertices.windows(2) {
            let edge = self.edge_between(pair[0], pair[1]).ok_or_else(|| {
                Error::validation(format!("no edge {} -> {}", pair[0], pair[1]))
            })?;
            total += edge.cost(kind);
        }
        Ok(total)
    }

    /// Minimum hop count from `from` to `to` ignoring costs, `None` when
    /// unreachable.
    pub fn hop_distance(&self, from: VertexId, to: VertexId) -> Option<usize> {
        if !self.contains_vertex(from) || !self.contains_vertex(to) {
            return None;
        }
        if from == to {
            return Some(0);
        }
        let mut hops = vec![usize::MAX; self.vertex_count];
        hops[from.0 as usize] = 0;
        let mut queue = std::collections::VecDeque::from([from]);
        while let Some(u) = queue.pop_front() {
            let next = hops[u.0 as usize] + 1;
            for edge in self.outgoing(u) {
                let slot = &mut hops[edge.to.0 as usize];
                if *slot == usize::MAX {
                    *slot = next;
                    if edge.to == to {
                        return Some(next);
                    }
                    queue.push_back(edge.to);
                }
            }
        }
        None
    }

    /// Serialize as one header line (`vertex_count`) followed by one line per
    /// edge: `from to distance travel_time fuel`. Edges appear in insertion
    /// order; floats use shortest round-trip formatting, so load(save(n))
    /// reproduces every cost bit for bit.
    pub fn save<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", self.vertex_count)?;
        for e in &self.edges {
            writeln!(w, "{} {} {} {} {}", e.from, e.to, e.distance, e.travel_time, e.fuel)?;
        }
        Ok(())
    }

    pub fn load<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let (_, first) = lines
            .next()
            .ok_or_else(|| Error::parse(1, "empty network file"))?;
        let first = first?;
        let vertex_count: usize = first
            .trim()
            .parse()
            .map_err(|_| Error::parse(1, format!("expected vertex count, got {first:?}")))?;
        let mut net = RoadNetwork::new(vertex_count)
            .map_err(|e| Error::parse(1, e.to_string()))?;
        for (i, line) in lines {
            let line_no = i + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 5 {
                return Err(Error::parse(
                    line_no,
                    format!("expected 5 fields, got {}", fields.len()),
                ));
            }
            let from: u32 = fields[0]
                .parse()
                .map_err(|_| Error::parse(line_no, format!("bad vertex id {:?}", fields[0])))?;
            let to: u32 = fields[1]
                .parse()
                .map_err(|_| Error::parse(line_no, format!("bad vertex id {:?}", fields[1])))?;
            let mut costs = [0.0f64; 3];
            for (slot, raw) in costs.iter_mut().zip(&fields[2..]) {
                *slot = raw
                    .parse()
                    .map_err(|_| Error::parse(line_no, format!("bad cost value {raw:?}")))?;
            }
            net.add_edge(Edge {
                from: VertexId(from),
                to: VertexId(to),
                distance: costs[0],
                travel_time: costs[1],
                fuel: costs[2],
            })
            .map_err(|e| Error::parse(line_no, e.to_string()))?;
        }
        Ok(net)
    }
}

/// Speed cap used by the synthetic grid generator, in m/s.
const GRID_MAX_SPEED: f64 = 25.0;
const GRID_MIN_SPEED: f64 = 8.0;

/// Build a `rows x cols` lattice with bidirectional edges between orthogonal
/// neighbours. The two directions of a road are sampled independently, so
/// forward and backward costs differ like they do on real roads.
///
/// Per directed edge: distance ~ U[50, 500] m, speed ~ U[8, 25] m/s,
/// travel_time = distance / speed, and fuel grows when speed drops below the
/// cap: distance * (0.06 + 0.04 / (speed / 25)).
pub fn grid_network(rows: usize, cols: usize, seed: u64) -> Result<RoadNetwork> {
    if rows < 2 || cols < 2 {
        return Err(Error::config("grid needs at least 2 rows and 2 cols"));
    }
    if rows * cols > 250_000 {
        return Err(Error::config("grid larger than 250k vertices"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = RoadNetwork::new(rows * cols)?;
    let vid = |r: usize, c: usize| VertexId((r * cols + c) as u32);
    let mut sample = |net: &mut RoadNetwork, from: VertexId, to: VertexId| -> Result<()> {
        let distance = rng.gen_range(50.0..=500.0);
        let speed = rng.gen_range(GRID_MIN_SPEED..=GRID_MAX_SPEED);
        net.add_edge(Edge {
            from,
            to,
            distance,
            travel_time: distance / speed,
            fuel: distance * (0.06 + 0.04 / (speed / GRID_MAX_SPEED)),
        })
    };
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                sample(&mut net, vid(r, c), vid(r, c + 1))?;
                sample(&mut net, vid(r, c + 1), vid(r, c))?;
            }
            if r + 1 < rows {
                sample(&mut net, vid(r, c), vid(r + 1, c))?;
                sample(&mut net, vid(r + 1, c), vid(r, c))?;
            }
        }
    }
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edge(from: u32, to: u32, d: f64) -> Edge {
        Edge {
            from: VertexId(from),
            to: VertexId(to),
            distance: d,
            travel_time: d / 10.0,
            fuel: d / 100.0,
        }
    }

    #[test]
    fn rejects_bad_edges() {
        let mut net = RoadNetwork::new(3).unwrap();
        assert!(net.add_edge(edge(0, 0, 1.0)).is_err(), "self loop");
        assert!(net.add_edge(edge(0, 3, 1.0)).is_err(), "vertex out of range");
        assert!(net.add_edge(edge(0, 1, 0.0)).is_err(), "zero cost");
        assert!(net.add_edge(edge(0, 1, -2.0)).is_err(), "negative cost");
        assert!(net.add_edge(edge(0, 1, f64::NAN)).is_err(), "nan cost");
        net.add_edge(edge(0, 1, 1.0)).unwrap();
        assert!(net.add_edge(edge(0, 1, 2.0)).is_err(), "duplicate");
        assert_eq!(net.edge_count(), 1);
    }

    #[test]
    fn adjacency_is_sorted_by_neighbour() {
        let mut net = RoadNetwork::new(5).unwrap();
        for to in [4u32, 1, 3, 2] {
            net.add_edge(edge(0, to, 1.0)).unwrap();
        }
        let order: Vec<u32> = net.outgoing(VertexId(0)).map(|e| e.to.0).collect();
        assert_eq!(order, vec![1, 2, 3, 4]);
        for from in [3u32, 1, 2] {
            net.add_edge(edge(from, 4, 1.0)).unwrap();
        }
        let order: Vec<u32> = net.incoming(VertexId(4)).map(|e| e.from.0).collect();
        assert_eq!(order, vec![0, 1, 2, 3]);
    }

    #[test]
    fn path_cost_sums_each_kind() {
        let mut net = RoadNetwork::new(3).unwrap();
        net.add_edge(edge(0, 1, 100.0)).unwrap();
        net.add_edge(edge(1, 2, 300.0)).unwrap();
        let p = [VertexId(0), VertexId(1), VertexId(2)];
        assert_eq!(net.path_cost(&p, CostKind::Distance).unwrap(), 400.0);
        assert_eq!(net.path_cost(&p, CostKind::TravelTime).unwrap(), 40.0);
        assert_eq!(net.path_cost(&p, CostKind::Fuel).unwrap(), 4.0);
        let missing = [VertexId(0), VertexId(2)];
        assert!(net.path_cost(&missing, CostKind::Distance).is_err());
        assert!(net.path_cost(&p[..1], CostKind::Distance).is_err());
    }

    #[test]
    fn hop_distance_ignores_costs() {
        let mut net = RoadNetwork::new(4).unwrap();
        // 0 -> 1 -> 2 -> 3 plus an expensive shortcut 0 -> 3
        net.add_edge(edge(0, 1, 1.0)).unwrap();
        net.add_edge(edge(1, 2, 1.0)).unwrap();
        net.add_edge(edge(2, 3, 1.0)).unwrap();
        net.add_edge(edge(0, 3, 9000.0)).unwrap();
        assert_eq!(net.hop_distance(VertexId(0), VertexId(3)), Some(1));
        assert_eq!(net.hop_distance(VertexId(1), VertexId(3)), Some(2));
        assert_eq!(net.hop_distance(VertexId(3), VertexId(0)), None);
        assert_eq!(net.hop_distance(VertexId(2), VertexId(2)), Some(0));
    }

    #[test]
    fn save_load_round_trips_exactly() {
        let net = grid_network(3, 4, 7).unwrap();
        let mut buf = Vec::new();
        net.save(&mut buf).unwrap();
        let loaded = RoadNetwork::load(buf.as_slice()).unwrap();
        assert_eq!(loaded.vertex_count(), net.vertex_count());
        assert_eq!(loaded.edge_count(), net.edge_count());
        for (a, b) in net.edges().iter().zip(loaded.edges()) {
            assert_eq!(a, b, "costs must round trip bit for bit");
        }
    }

    #[test]
    fn load_reports_line_numbers() {
        let text = "2\n0 1 10 1 1\n0 1 oops 1 1\n";
        let err = RoadNetwork::load(text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        let text = "2\n0 1 10 1\n";
        let err = RoadNetwork::load(text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("expected 5 fields"), "{err}");
    }

    #[test]
    fn grid_has_lattice_shape() {
        let net = grid_network(3, 4, 0).unwrap();
        assert_eq!(net.vertex_count(), 12);
        // horizontal roads: 3 rows * 3 gaps, vertical: 2 gaps * 4 cols, both directions
        assert_eq!(net.edge_count(), 2 * (3 * 3 + 2 * 4));
        // corner vertex 0 connects to 1 and 4 only
        let out: Vec<u32> = net.outgoing(VertexId(0)).map(|e| e.to.0).collect();
        assert_eq!(out, vec![1, 4]);
        // interior vertex 5 (row 1, col 1) has degree 4 both ways
        assert_eq!(net.outgoing(VertexId(5)).count(), 4);
        assert_eq!(net.incoming(VertexId(5)).count(), 4);
    }

    #[test]
    fn grid_is_deterministic_per_seed() {
        let a = grid_network(4, 4, 42).unwrap();
        let b = grid_network(4, 4, 42).unwrap();
        assert_eq!(a.edges(), b.edges());
        let c = grid_network(4, 4, 43).unwrap();
        assert_ne!(a.edges(), c.edges());
    }

    #[test]
    fn grid_costs_are_internally_consistent() {
        // Recover speed from each edge's own distance/travel_time and check it
        // stays in the sampled band and reproduces the fuel formula.
        let net = grid_network(5, 5, 11).unwrap();
        for e in net.edges() {
            let speed = e.distance / e.travel_time;
            assert!(
                (GRID_MIN_SPEED - 1e-9..=GRID_MAX_SPEED + 1e-9).contains(&speed),
                "speed {speed} outside sample range"
            );
            let fuel = e.distance * (0.06 + 0.04 / (speed / GRID_MAX_SPEED));
            assert!(
                (fuel - e.fuel).abs() <= 1e-9 * e.fuel,
                "fuel mismatch: {} vs {}",
                fuel,
                e.fuel
            );
        }
    }
}
