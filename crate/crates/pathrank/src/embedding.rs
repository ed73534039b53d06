use std::io::{BufRead, Write};

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::network::{RoadNetwork, VertexId};

/// Dense per-vertex embedding table, one row per vertex id.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    values: Array2<f64>,
}

impl EmbeddingMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::validation("embedding matrix must be non-empty"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("embedding matrix contains non-finite values"));
        }
        Ok(EmbeddingMatrix { values })
    }

    pub fn vertex_count(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn row(&self, v: VertexId) -> ndarray::ArrayView1<'_, f64> {
        self.values.row(v.0 as usize)
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    /// Text format: header `vertex_count dim`, then one line per vertex,
    /// `id value...` with values at 9 significant digits of scientific
    /// notation. Cosine-level geometry survives the truncation; exact bits do
    /// not, so tests comparing matrices load both sides through this format.
    pub fn save<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {}", self.vertex_count(), self.dim())?;
        for (i, row) in self.values.rows().into_iter().enumerate() {
            let mut line = i.to_string();
            for v in row {
                line.push(' ');
                line.push_str(&format!("{v:.9e}"));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn load<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| Error::parse(1, "empty embedding file"))?;
        let header = header?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::parse(1, format!("bad header {header:?}"))))
            .collect::<Result<_>>()?;
        if dims.len() != 2 {
            return Err(Error::parse(1, "header must be: vertex_count dim"));
        }
        let (n, m) = (dims[0], dims[1]);
        let mut values = Array2::zeros((n, m));
        let mut seen = vec![false; n];
        for (i, line) in lines {
            let line_no = i + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut tokens = line.split_whitespace();
            let id: usize = tokens
                .next()
                .unwrap()
                .parse()
                .map_err(|_| Error::parse(line_no, "bad vertex id"))?;
            if id >= n {
                return Err(Error::parse(line_no, format!("vertex id {id} out of range 0..{n}")));
            }
            if std::mem::replace(&mut seen[id], true) {
                return Err(Error::parse(line_no, format!("duplicate vertex id {id}")));
            }
            let mut row = values.row_mut(id);
            let mut count = 0;
            for t in tokens {
                if count == m {
                    return Err(Error::parse(line_no, format!("more than {m} values")));
                }
                row[count] = t
                    .parse()
                    .map_err(|_| Error::parse(line_no, format!("bad float {t:?}")))?;
                count += 1;
            }
            if count != m {
                return Err(Error::parse(line_no, format!("expected {m} values, got {count}")));
            }
        }
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(Error::parse(0, format!("missing row for vertex {missing}")));
        }
        EmbeddingMatrix::new(values)
    }
}

/// Biased random-walk parameters. `p` penalizes returning to the previous
/// vertex, `q` penalizes leaving the previous vertex's neighbourhood;
/// `weighted` scales step probabilities by inverse edge distance so short
/// hops are preferred.
#[derive(Debug, Clone)]
pub struct WalkConfig {
    pub walks_per_vertex: usize,
    /// Number of vertices per walk (a stuck walk ends early).
    pub walk_length: usize,
    pub p: f64,
    pub q: f64,
    pub weighted: bool,
    pub seed: u64,
}

impl WalkConfig {
    fn validate(&self) -> Result<()> {
        if self.walks_per_vertex == 0 || self.walk_length == 0 {
            return Err(Error::config("walks_per_vertex and walk_length must be >= 1"));
        }
        if !(self.p > 0.0 && self.p.is_finite()) || !(self.q > 0.0 && self.q.is_finite()) {
            return Err(Error::config(format!(
                "p and q must be finite and > 0, got p={} q={}",
                self.p, self.q
            )));
        }
        Ok(())
    }
}

/// SplitMix64 finalizer; decorrelates structured seed material (vertex ids,
/// walk indices) before it reaches ChaCha.
fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D049BB133111EB);
    x ^ (x >> 31)
}

pub(crate) fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    mix64(seed ^ mix64(a.wrapping_shl(32) ^ b))
}

/// Pick an index proportionally to `weights` (all >= 0, at least one > 0).
fn weighted_pick<R: Rng>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut x = rng.gen::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        x -= w;
        if x < 0.0 {
            return i;
        }
    }
    weights.len() - 1 // only reachable through accumulated rounding
}

fn single_walk(net: &RoadNetwork, cfg: &WalkConfig, start: VertexId, walk_idx: usize) -> Vec<VertexId> {
    let mut rng =
        ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, start.0 as u64, walk_idx as u64));
    let mut walk = Vec::with_capacity(cfg.walk_length);
    walk.push(start);
    while walk.len() < cfg.walk_length {
        let cur = *walk.last().unwrap();
        let prev = if walk.len() >= 2 { Some(walk[walk.len() - 2]) } else { None };
        let mut targets = Vec::new();
        let mut weights = Vec::new();
        for edge in net.outgoing(cur) {
            targets.push(edge.to);
            weights.push(if cfg.weighted { 1.0 / edge.distance } else { 1.0 });
        }
        if targets.is_empty() {
            break;
        }
        // Max-normalize base weights: with equal distances every weight
        // becomes exactly 1, making weighted and unweighted runs identical.
        let max = weights.iter().fold(f64::MIN, |a, &b| a.max(b));
        for w in &mut weights {
            *w /= max;
        }
        if let Some(prev) = prev {
            for (w, &t) in weights.iter_mut().zip(&targets) {
                *w *= if t == prev {
                    1.0 / cfg.p
                } else if net.edge_between(prev, t).is_some() {
                    1.0
                } else {
                    1.0 / cfg.q
                };
            }
        }
        walk.push(targets[weighted_pick(&weights, &mut rng)]);
    }
    walk
}

/// One walk per (start vertex, repeat index) pair, every vertex as a start.
/// Each walk draws from its own seeded generator, so the corpus is
/// independent of thread scheduling.
pub fn generate_walks(net: &RoadNetwork, cfg: &WalkConfig) -> Result<Vec<Vec<VertexId>>> {
    cfg.validate()?;
    let jobs: Vec<(u32, usize)> = (0..net.vertex_count() as u32)
        .flat_map(|v| (0..cfg.walks_per_vertex).map(move |i| (v, i)))
        .collect();
    Ok(jobs
        .par_iter()
        .map(|&(v, i)| single_walk(net, cfg, VertexId(v), i))
        .collect())
}

#[derive(Debug, Clone)]
pub struct SkipGramConfig {
    pub dim: usize,
    /// Symmetric context window in corpus positions.
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl SkipGramConfig {
    fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::config("embedding dim must be >= 1"));
        }
        if self.window == 0 {
            return Err(Error::config("window must be >= 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(format!(
                "learning rate must be finite and > 0, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Cumulative unigram^0.75 table for negative sampling.
struct NoiseTable {
    cumulative: Vec<f64>,
    total: f64,
}

impl NoiseTable {
    fn from_counts(counts: &[u64]) -> Result<Self> {
        let mut cumulative = Vec::with_capacity(counts.len());
        let mut total = 0.0;
        for &c in counts {
            total += (c as f64).powf(0.75);
            cumulative.push(total);
        }
        if total <= 0.0 {
            return Err(Error::validation("walk corpus is empty"));
        }
        Ok(NoiseTable { cumulative, total })
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let x = rng.gen::<f64>() * self.total;
        // first index with cumulative > x
        match self.cumulative.binary_search_by(|c| c.total_cmp(&x)) {
            Ok(i) => i + 1,
            Err(i) => i,
        }
        .min(self.cumulative.len() - 1)
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Skip-gram with negative sampling over the walk corpus. Returns the input
/// matrix as the embedding. Zero epochs returns the seeded initialization
/// untouched, which gives reruns a fixed point to compare against.
pub fn train_skipgram(
    walks: &[Vec<VertexId>],
    vertex_count: usize,
    cfg: &SkipGramConfig,
) -> Result<EmbeddingMatrix> {
    cfg.validate()?;
    if walks.is_empty() {
        return Err(Error::validation("walk corpus is empty"));
    }
    let mut counts = vec![0u64; vertex_count];
    for walk in walks {
        for v in walk {
            let slot = counts.get_mut(v.0 as usize).ok_or_else(|| {
                Error::validation(format!("walk vertex {v} outside 0..{vertex_count}"))
            })?;
            *slot += 1;
        }
    }
    let noise = NoiseTable::from_counts(&counts)?;

    let m = cfg.dim;
    let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 0x696e6974, 0)); // "init"
    let span = 0.5 / m as f64;
    let mut input = Array2::zeros((vertex_count, m));
    for v in input.iter_mut() {
        *v = init_rng.gen_range(-span..span);
    }
    let mut output: Array2<f64> = Array2::zeros((vertex_count, m));

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 0x747261696e, 1)); // "train"
    let lr = cfg.learning_rate;
    let mut center_buf = Array1::zeros(m);
    let mut acc = Array1::zeros(m);
    for _ in 0..cfg.epochs {
        for walk in walks {
            for (pos, &center) in walk.iter().enumerate() {
                let lo = pos.saturating_sub(cfg.window);
                let hi = (pos + cfg.window).min(walk.len() - 1);
                for ctx_pos in lo..=hi {
                    if ctx_pos == pos {
                        continue;
                    }
                    let context = walk[ctx_pos].0 as usize;
                    let center = center.0 as usize;
                    center_buf.assign(&input.row(center));
                    acc.fill(0.0);
                    for neg in 0..=cfg.negatives {
                        let (target, label) = if neg == 0 {
                            (context, 1.0)
                        } else {
                            let t = noise.sample(&mut rng);
                            if t == context {
                                continue; // skip accidental positives
                            }
                            (t, 0.0)
                        };
                        let z = center_buf.dot(&output.row(target));
                        let g = (sigmoid(z) - label) * lr;
                        acc.scaled_add(g, &output.row(target));
                        output.row_mut(target).scaled_add(-g, &center_buf);
                    }
                    input.row_mut(center).scaled_add(-1.0, &acc);
                }
            }
        }
    }
    EmbeddingMatrix::new(input)
}
