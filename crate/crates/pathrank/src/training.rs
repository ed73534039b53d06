use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{CostKind, RoadNetwork, VertexId};
use crate::pathfinding::{
    diversified_top_k, multi_cost_diversified, shortest_path, top_k_paths, weighted_jaccard,
    DiversifiedParams, Path, YenStream,
};

/// One observed trip: who drove and the exact vertex sequence they took.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub driver: String,
    pub path: Path,
}

/// A candidate path labelled with its weighted-Jaccard similarity to the
/// trajectory it was generated for, plus the candidate's raw per-cost totals
/// (used as auxiliary regression targets after normalization).
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingInstance {
    pub path: Path,
    pub label: f64,
    /// distance, travel_time, fuel totals of `path`, in that order, raw.
    pub aux: [f64; 3],
}

/// Candidate generation strategies. `TkX` is plain top-k under one cost,
/// `DTkX` its diversity-filtered variant, `DTkM` the union of all three
/// diversified sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StrategyKind {
    TkDI,
    TkTT,
    TkFC,
    DTkDI,
    DTkTT,
    DTkFC,
    DTkM,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 7] = [
        StrategyKind::TkDI,
        StrategyKind::TkTT,
        StrategyKind::TkFC,
        StrategyKind::DTkDI,
        StrategyKind::DTkTT,
        StrategyKind::DTkFC,
        StrategyKind::DTkM,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            StrategyKind::TkDI => "TkDI",
            StrategyKind::TkTT => "TkTT",
            StrategyKind::TkFC => "TkFC",
            StrategyKind::DTkDI => "D-TkDI",
            StrategyKind::DTkTT => "D-TkTT",
            StrategyKind::DTkFC => "D-TkFC",
            StrategyKind::DTkM => "D-TkM",
        }
    }

    pub fn is_diversified(&self) -> bool {
        !matches!(self, StrategyKind::TkDI | StrategyKind::TkTT | StrategyKind::TkFC)
    }

    /// The single cost the strategy optimizes, `None` for the multi-cost one.
    pub fn cost_kind(&self) -> Option<CostKind> {
        match self {
            StrategyKind::TkDI | StrategyKind::DTkDI => Some(CostKind::Distance),
            StrategyKind::TkTT | StrategyKind::DTkTT => Some(CostKind::TravelTime),
            StrategyKind::TkFC | StrategyKind::DTkFC => Some(CostKind::Fuel),
            StrategyKind::DTkM => None,
        }
    }
}

impl std::fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                Error::config(format!(
                    "unknown strategy {s:?}, expected one of TkDI, TkTT, TkFC, D-TkDI, D-TkTT, D-TkFC, D-TkM"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Strategy {
    pub kind: StrategyKind,
    pub k: usize,
    /// Similarity threshold, only meaningful for diversified kinds.
    pub delta: f64,
    pub max_candidates: usize,
}

impl Strategy {
    pub fn new(kind: StrategyKind, k: usize, delta: f64, max_candidates: usize) -> Result<Self> {
        let s = Strategy { kind, k, delta, max_candidates };
        s.diversified_params().validate_as_strategy(kind)?;
        Ok(s)
    }

    fn diversified_params(&self) -> DiversifiedParams {
        DiversifiedParams { k: self.k, delta: self.delta, max_candidates: self.max_candidates }
    }
}

trait StrategyValidation {
    fn validate_as_strategy(&self, kind: StrategyKind) -> Result<()>;
}

impl StrategyValidation for DiversifiedParams {
    fn validate_as_strategy(&self, kind: StrategyKind) -> Result<()> {
        if self.k == 0 {
            return Err(Error::config("k must be >= 1"));
        }
        if kind.is_diversified() {
            if !(self.delta > 0.0 && self.delta <= 1.0) {
                return Err(Error::config(format!("delta must be in (0, 1], got {}", self.delta)));
            }
            if self.max_candidates < self.k {
                return Err(Error::config(format!(
                    "max_candidates {} smaller than k {}",
                    self.max_candidates, self.k
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GeneratedInstances {
    pub instances: Vec<TrainingInstance>,
    /// The diversified scan hit its candidate cap at least once.
    pub cap_hit: bool,
    /// No candidates could be generated (endpoints unreachable); the caller
    /// gets an empty list plus this flag instead of a hard error.
    pub empty: bool,
}

fn label_paths(net: &RoadNetwork, truth: &Path, paths: Vec<Path>) -> Result<Vec<TrainingInstance>> {
    paths
        .into_iter()
        .map(|p| {
            let label = weighted_jaccard(net, truth, &p)?;
            let aux = [
                p.cost(net, CostKind::Distance)?,
                p.cost(net, CostKind::TravelTime)?,
                p.cost(net, CostKind::Fuel)?,
            ];
            Ok(TrainingInstance { path: p, label, aux })
        })
        .collect()
}

/// Generate the candidate set for one trajectory under `strategy` and label
/// each candidate against the driver's actual path.
pub fn generate_instances(
    net: &RoadNetwork,
    trajectory: &Trajectory,
    strategy: &Strategy,
) -> Result<GeneratedInstances> {
    trajectory.path.validate(net)?;
    let source = trajectory.path.source();
    let dest = trajectory.path.dest();
    let params = strategy.diversified_params();
    let outcome = match strategy.kind {
        StrategyKind::TkDI | StrategyKind::TkTT | StrategyKind::TkFC => {
            let kind = strategy.kind.cost_kind().unwrap();
            match top_k_paths(net, source, dest, kind, strategy.k) {
                Ok(paths) => Ok((paths, false)),
                Err(e) => Err(e),
            }
        }
        StrategyKind::DTkDI | StrategyKind::DTkTT | StrategyKind::DTkFC => {
            let kind = strategy.kind.cost_kind().unwrap();
            diversified_top_k(net, source, dest, kind, &params).map(|o| (o.paths, o.cap_hit))
        }
        StrategyKind::DTkM => {
            multi_cost_diversified(net, source, dest, &params).map(|o| (o.paths, o.cap_hit))
        }
    };
    match outcome {
        Ok((paths, cap_hit)) => Ok(GeneratedInstances {
            instances: label_paths(net, &trajectory.path, paths)?,
            cap_hit,
            empty: false,
        }),
        Err(Error::NoPath { .. }) => {
            Ok(GeneratedInstances { instances: Vec::new(), cap_hit: false, empty: true })
        }
        Err(e) => Err(e),
    }
}

/// A trajectory together with its generated training instances.
#[derive(Debug, Clone)]
pub struct LabeledTrajectory {
    pub trajectory: Trajectory,
    pub instances: Vec<TrainingInstance>,
}

/// Split trajectory groups into train/val/test by shuffling group indices.
/// Fractions must sum to 1; val and test sizes round down, the remainder goes
/// to train, so nothing is dropped.
pub fn split_dataset<T>(
    mut groups: Vec<T>,
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    let (ft, fv, fe) = fractions;
    for f in [ft, fv, fe] {
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::config(format!("split fraction {f} outside [0, 1]")));
        }
    }
    if (ft + fv + fe - 1.0).abs() > 1e-9 {
        return Err(Error::config(format!(
            "split fractions must sum to 1, got {}",
            ft + fv + fe
        )));
    }
    let n = groups.len();
    if n < 3 {
        return Err(Error::validation(format!("need at least 3 groups to split, got {n}")));
    }
    let n_val = (fv * n as f64).floor() as usize;
    let n_test = (fe * n as f64).floor() as usize;
    let n_train = n - n_val - n_test;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    // pull items out in shuffled order without cloning
    let mut slots: Vec<Option<T>> = groups.drain(..).map(Some).collect();
    let mut take = |idx: &[usize]| -> Vec<T> {
        idx.iter().map(|&i| slots[i].take().expect("index used once")).collect()
    };
    let train = take(&order[..n_train]);
    let val = take(&order[n_train..n_train + n_val]);
    let test = take(&order[n_train + n_val..]);
    Ok((train, val, test))
}

/// Per-cost affine normalizer fitted on training data only: x -> (x - mean) / std
/// with population std, guarded to 1 when a cost is constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxNormalizer {
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

impl AuxNormalizer {
    pub fn fit(instances: &[TrainingInstance]) -> Result<Self> {
        if instances.len() < 2 {
            return Err(Error::validation(format!(
                "normalizer needs at least 2 instances, got {}",
                instances.len()
            )));
        }
        let n = instances.len() as f64;
        let mut mean = [0.0; 3];
        for inst in instances {
            for (m, x) in mean.iter_mut().zip(inst.aux) {
                *m += x;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut var = [0.0; 3];
        for inst in instances {
            for ((v, x), m) in var.iter_mut().zip(inst.aux).zip(mean) {
                *v += (x - m) * (x - m);
            }
        }
        let mut std = [0.0; 3];
        for (s, v) in std.iter_mut().zip(var) {
            let sd = (v / n).sqrt();
            *s = if sd > 0.0 { sd } else { 1.0 };
        }
        Ok(AuxNormalizer { mean, std })
    }

    pub fn apply(&self, aux: [f64; 3]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for i in 0..3 {
            out[i] = (aux[i] - self.mean[i]) / self.std[i];
        }
        out
    }
}

/// Controls for sampling synthetic "driver" trajectories on a network.
#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    pub count: usize,
    /// The cost every synthetic driver prefers.
    pub preference: CostKind,
    /// Probability that a trip takes the second-cheapest path instead of the
    /// cheapest, injecting label noise.
    pub noise_prob: f64,
    pub seed: u64,
}

/// Endpoints closer than this many hops make degenerate ranking cases, so
/// sampling rejects them.
const MIN_TRIP_HOPS: usize = 3;
const DRIVER_POOL: usize = 10;

/// Sample trajectories whose drivers mostly follow the cheapest path under
/// `preference`. Endpoint pairs are rejection-sampled to be at least
/// MIN_TRIP_HOPS apart; drivers cycle through a pool of 10 ids.
pub fn make_synthetic_trajectories(
    net: &RoadNetwork,
    cfg: &SyntheticConfig,
) -> Result<Vec<Trajectory>> {
    if cfg.count == 0 {
        return Err(Error::config("synthetic count must be >= 1"));
    }
    if !(0.0..=1.0).contains(&cfg.noise_prob) {
        return Err(Error::config(format!(
            "noise probability {} outside [0, 1]",
            cfg.noise_prob
        )));
    }
    let n = net.vertex_count() as u32;
    if n < 2 {
        return Err(Error::validation("network too small to sample trips"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(cfg.count);
    let mut attempts = 0usize;
    let max_attempts = cfg.count.saturating_mul(1000);
    while out.len() < cfg.count {
        attempts += 1;
        if attempts > max_attempts {
            return Err(Error::validation(format!(
                "gave up sampling trips after {max_attempts} attempts; network may be too \
                 disconnected for {} trajectories",
                cfg.count
            )));
        }
        let source = VertexId(rng.gen_range(0..n));
        let dest = VertexId(rng.gen_range(0..n));
        if source == dest {
            continue;
        }
        match net.hop_distance(source, dest) {
            Some(h) if h >= MIN_TRIP_HOPS => {}
            _ => continue,
        }
        let noisy = rng.gen::<f64>() < cfg.noise_prob;
        let path = if noisy {
            // second-cheapest; fall back to cheapest when there is only one
            let mut stream = YenStream::new(net, source, dest, cfg.preference)?;
            let first = stream.next().ok_or(Error::NoPath { from: source.0, to: dest.0 })?;
            stream.next().unwrap_or(first)
        } else {
            shortest_path(net, source, dest, cfg.preference)?
        };
        let driver = format!("driver-{:02}", out.len() % DRIVER_POOL);
        out.push(Trajectory { driver, path });
    }
    Ok(out)
}

/// One trajectory per line: `driver_id v0 v1 ...`.
pub fn write_trajectories<W: Write>(mut w: W, trajectories: &[Trajectory]) -> Result<()> {
    for t in trajectories {
        writeln!(w, "{} {}", t.driver, t.path.to_line())?;
    }
    Ok(())
}

pub fn read_trajectories<R: BufRead>(r: R, net: &RoadNetwork) -> Result<Vec<Trajectory>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let driver = tokens
            .next()
            .ok_or_else(|| Error::parse(line_no, "missing driver id"))?
            .to_string();
        let path = Path::parse_tokens(tokens)
            .map_err(|e| Error::parse(line_no, e.to_string()))?;
        path.validate(net).map_err(|e| Error::parse(line_no, e.to_string()))?;
        out.push(Trajectory { driver, path });
    }
    Ok(out)
}

/// Instance files carry the label, the three raw cost totals and the vertex
/// sequence: `label dist tt fuel v0 v1 ...`. Floats round-trip exactly.
pub fn write_instances<W: Write>(mut w: W, instances: &[TrainingInstance]) -> Result<()> {
    for inst in instances {
        writeln!(
            w,
            "{} {} {} {} {}",
            inst.label,
            inst.aux[0],
            inst.aux[1],
            inst.aux[2],
            inst.path.to_line()
        )?;
    }
    Ok(())
}

pub fn read_instances<R: BufRead>(r: R, net: &RoadNetwork) -> Result<Vec<TrainingInstance>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < 6 {
            return Err(Error::parse(
                line_no,
                format!("expected label, 3 costs and >= 2 vertices, got {} fields", fields.len()),
            ));
        }
        let mut nums = [0.0f64; 4];
        for (slot, raw) in nums.iter_mut().zip(&fields[..4]) {
            *slot = raw
                .parse()
                .map_err(|_| Error::parse(line_no, format!("bad float {raw:?}")))?;
        }
        if !(0.0..=1.0).contains(&nums[0]) {
            return Err(Error::parse(line_no, format!("label {} outside [0, 1]", nums[0])));
        }
        let path = Path::parse_tokens(fields[4..].iter().copied())
            .map_err(|e| Error::parse(line_no, e.to_string()))?;
        path.validate(net).map_err(|e| Error::parse(line_no, e.to_string()))?;
        out.push(TrainingInstance {
            path,
            label: nums[0],
            aux: [nums[1], nums[2], nums[3]],
        });
    }
    Ok(out)
}

/// Group trajectories by driver id, preserving first-seen driver order and
/// per-driver trajectory order.
pub fn group_by_driver(trajectories: Vec<Trajectory>) -> Vec<(String, Vec<Trajectory>)> {
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut groups: Vec<(String, Vec<Trajectory>)> = Vec::new();
    for t in trajectories {
        match index.get(&t.driver) {
            Some(&i) => groups[i].1.push(t),
            None => {
                index.insert(t.driver.clone(), groups.len());
                groups.push((t.driver.clone(), vec![t]));
            }
        }
    }
    groups
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::grid_network;

    fn sample_net() -> RoadNetwork {
        grid_network(4, 4, 9).unwrap()
    }

    fn sample_traj(net: &RoadNetwork) -> Trajectory {
        Trajectory {
            driver: "d0".into(),
            path: shortest_path(net, VertexId(0), VertexId(15), CostKind::Distance).unwrap(),
        }
    }

    #[test]
    fn strategy_parsing_round_trips() {
        for kind in StrategyKind::ALL {
            assert_eq!(kind.as_str().parse::<StrategyKind>().unwrap(), kind);
        }
        assert!("TkXX".parse::<StrategyKind>().is_err());
    }

    #[test]
    fn labels_are_jaccard_against_truth() {
        let net = sample_net();
        let traj = sample_traj(&net);
        let strategy = Strategy::new(StrategyKind::TkDI, 5, 0.0, 5).unwrap();
        let got = generate_instances(&net, &traj, &strategy).unwrap();
        assert_eq!(got.instances.len(), 5);
        assert!(!got.empty && !got.cap_hit);
        // the cheapest candidate is the trajectory itself, label 1
        assert_eq!(got.instances[0].path, traj.path);
        assert_eq!(got.instances[0].label, 1.0);
        for inst in &got.instances {
            let expect = weighted_jaccard(&net, &traj.path, &inst.path).unwrap();
            assert_eq!(inst.label, expect);
            assert_eq!(inst.aux[0], inst.path.cost(&net, CostKind::Distance).unwrap());
            assert_eq!(inst.aux[1], inst.path.cost(&net, CostKind::TravelTime).unwrap());
            assert_eq!(inst.aux[2], inst.path.cost(&net, CostKind::Fuel).unwrap());
        }
    }

    #[test]
    fn valid_trajectory_never_yields_empty_candidates() {
        // A trajectory that validates proves its endpoints are connected, so
        // the strategy always finds at least the trajectory's own route; the
        // `empty` flag exists for defensive handling of NoPath only.
        let mut net = RoadNetwork::new(3).unwrap();
        for (f, t) in [(0u32, 1u32), (1, 2)] {
            net.add_edge(crate::network::Edge {
                from: VertexId(f),
                to: VertexId(t),
                distance: 1.0,
                travel_time: 1.0,
                fuel: 1.0,
            })
            .unwrap();
        }
        let traj = Trajectory {
            driver: "d".into(),
            path: Path::new(vec![VertexId(0), VertexId(1)]).unwrap(),
        };
        let strategy = Strategy::new(StrategyKind::DTkDI, 2, 0.5, 10).unwrap();
        let ok = generate_instances(&net, &traj, &strategy).unwrap();
        assert!(!ok.empty);
        assert_eq!(ok.instances.len(), 1, "only one simple path 0->1 exists");

        // the underlying NoPath case that `empty` guards against
        let err = diversified_top_k(
            &net,
            VertexId(2),
            VertexId(0),
            CostKind::Distance,
            &DiversifiedParams { k: 2, delta: 0.5, max_candidates: 10 },
        );
        assert!(matches!(err, Err(Error::NoPath { .. })));
    }

    #[test]
    fn diversified_strategy_instances_respect_threshold() {
        let net = sample_net();
        let traj = sample_traj(&net);
        let strategy = Strategy::new(StrategyKind::DTkDI, 4, 0.6, 200).unwrap();
        let got = generate_instances(&net, &traj, &strategy).unwrap();
        for (i, a) in got.instances.iter().enumerate() {
            for b in &got.instances[i + 1..] {
                let sim = weighted_jaccard(&net, &a.path, &b.path).unwrap();
                assert!(sim < 0.6, "pair too similar: {sim}");
            }
        }
    }

    #[test]
    fn multi_strategy_unions_three_kinds() {
        let net = sample_net();
        let traj = sample_traj(&net);
        let strategy = Strategy::new(StrategyKind::DTkM, 3, 0.8, 200).unwrap();
        let got = generate_instances(&net, &traj, &strategy).unwrap();
        let per_kind = Strategy::new(StrategyKind::DTkDI, 3, 0.8, 200).unwrap();
        let single = generate_instances(&net, &traj, &per_kind).unwrap();
        assert!(got.instances.len() >= single.instances.len());
        assert!(got.instances.len() <= 9);
    }

    #[test]
    fn split_partitions_without_loss() {
        let items: Vec<usize> = (0..103).collect();
        let (tr, va, te) = split_dataset(items, (0.7, 0.1, 0.2), 77).unwrap();
        assert_eq!(va.len(), 10); // floor(0.1 * 103)
        assert_eq!(te.len(), 20); // floor(0.2 * 103)
        assert_eq!(tr.len(), 73); // remainder
        let mut all: Vec<usize> = tr.iter().chain(&va).chain(&te).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..103).collect::<Vec<_>>());
    }

    #[test]
    fn split_is_deterministic_and_seed_sensitive() {
        let a = split_dataset((0..50).collect::<Vec<_>>(), (0.7, 0.1, 0.2), 1).unwrap();
        let b = split_dataset((0..50).collect::<Vec<_>>(), (0.7, 0.1, 0.2), 1).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        assert_eq!(a.2, b.2);
        let c = split_dataset((0..50).collect::<Vec<_>>(), (0.7, 0.1, 0.2), 2).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn split_rejects_bad_fractions() {
        assert!(split_dataset(vec![1, 2, 3], (0.5, 0.2, 0.2), 0).is_err());
        assert!(split_dataset(vec![1, 2, 3], (1.2, -0.1, -0.1), 0).is_err());
        assert!(split_dataset(vec![1, 2], (0.7, 0.1, 0.2), 0).is_err());
    }

    #[test]
    fn normalizer_matches_hand_moments() {
        let net = sample_net();
        let mk = |aux: [f64; 3]| TrainingInstance {
            path: Path::new(vec![VertexId(0), VertexId(1)]).unwrap(),
            label: 0.5,
            aux,
        };
        let insts = vec![mk([100.0, 10.0, 5.0]), mk([300.0, 10.0, 7.0])];
        let norm = AuxNormalizer::fit(&insts).unwrap();
        assert_eq!(norm.mean[0], 200.0);
        assert_eq!(norm.std[0], 100.0); // population std of {100, 300}
        assert_eq!(norm.std[1], 1.0); // constant cost falls back to 1
        let z = norm.apply([300.0, 10.0, 6.0]);
        assert_eq!(z[0], 1.0);
        assert_eq!(z[1], 0.0);
        assert!(AuxNormalizer::fit(&insts[..1]).is_err());
        let _ = net;
    }

    #[test]
    fn synthetic_trips_follow_preference() {
        let net = sample_net();
        let cfg = SyntheticConfig {
            count: 12,
            preference: CostKind::TravelTime,
            noise_prob: 0.0,
            seed: 4,
        };
        let trips = make_synthetic_trajectories(&net, &cfg).unwrap();
        assert_eq!(trips.len(), 12);
        for t in &trips {
            let best =
                shortest_path(&net, t.path.source(), t.path.dest(), CostKind::TravelTime).unwrap();
            assert_eq!(t.path, best, "noise-free trips take the cheapest path");
            let hops = net.hop_distance(t.path.source(), t.path.dest()).unwrap();
            assert!(hops >= MIN_TRIP_HOPS);
        }
        // driver pool cycles
        assert_eq!(trips[0].driver, "driver-00");
        assert_eq!(trips[10].driver, "driver-00");
        assert_eq!(trips[11].driver, "driver-01");
    }

    #[test]
    fn synthetic_noise_takes_second_best() {
        let net = sample_net();
        let cfg = SyntheticConfig {
            count: 10,
            preference: CostKind::Distance,
            noise_prob: 1.0,
            seed: 8,
        };
        let trips = make_synthetic_trajectories(&net, &cfg).unwrap();
        for t in &trips {
            let mut stream =
                YenStream::new(&net, t.path.source(), t.path.dest(), CostKind::Distance).unwrap();
            let first = stream.next().unwrap();
            let second = stream.next().unwrap_or(first);
            assert_eq!(t.path, second);
        }
    }

    #[test]
    fn synthetic_is_deterministic() {
        let net = sample_net();
        let cfg =
            SyntheticConfig { count: 6, preference: CostKind::Fuel, noise_prob: 0.3, seed: 99 };
        let a = make_synthetic_trajectories(&net, &cfg).unwrap();
        let b = make_synthetic_trajectories(&net, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn trajectory_files_round_trip() {
        let net = sample_net();
        let cfg =
            SyntheticConfig { count: 5, preference: CostKind::Distance, noise_prob: 0.5, seed: 3 };
        let trips = make_synthetic_trajectories(&net, &cfg).unwrap();
        let mut buf = Vec::new();
        write_trajectories(&mut buf, &trips).unwrap();
        let back = read_trajectories(buf.as_slice(), &net).unwrap();
        assert_eq!(trips, back);
    }

    #[test]
    fn instance_files_round_trip_bit_exact() {
        let net = sample_net();
        let traj = sample_traj(&net);
        let strategy = Strategy::new(StrategyKind::DTkM, 3, 0.8, 100).unwrap();
        let got = generate_instances(&net, &traj, &strategy).unwrap();
        let mut buf = Vec::new();
        write_instances(&mut buf, &got.instances).unwrap();
        let back = read_instances(buf.as_slice(), &net).unwrap();
        assert_eq!(got.instances, back);
    }

    #[test]
    fn instance_reader_rejects_garbage() {
        let net = sample_net();
        let bad_label = "1.5 1 1 1 0 1\n";
        assert!(read_instances(bad_label.as_bytes(), &net).is_err());
        let short = "0.5 1 1 0 1\n";
        let err = read_instances(short.as_bytes(), &net).unwrap_err();
        assert!(err.to_string().contains("line 1"));
        let bad_edge = "0.5 1 1 1 0 15\n";
        assert!(read_instances(bad_edge.as_bytes(), &net).is_err());
    }

    #[test]
    fn grouping_preserves_order() {
        let net = sample_net();
        let trips = make_synthetic_trajectories(
            &net,
            &SyntheticConfig {
                count: 25,
                preference: CostKind::Distance,
                noise_prob: 0.0,
                seed: 10,
            },
        )
        .unwrap();
        let groups = group_by_driver(trips.clone());
        assert_eq!(groups.len(), DRIVER_POOL);
        assert_eq!(groups[0].0, "driver-00");
        let total: usize = groups.iter().map(|(_, g)| g.len()).sum();
        assert_eq!(total, 25);
    }
}
