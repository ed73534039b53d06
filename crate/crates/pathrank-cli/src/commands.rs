//! One function per subcommand. Every command follows the same shape:
//! validate inputs up front, compute, write declared outputs, then drop a
//! manifest next to the primary output so the run can be replayed.

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path as FsPath, PathBuf};

use pathrank::{
    diversified_top_k, evaluate, generate_instances, generate_walks, load_checkpoint,
    make_synthetic_trajectories, multi_cost_diversified, predict_and_rank, read_instances,
    read_trajectories, save_checkpoint, split_dataset, top_k_paths, train, train_skipgram,
    write_instances, write_trajectories, CostBaseline, CostKind, DiversifiedParams, EmbeddingMatrix,
    EmbeddingMode, Error, EvalCase, EvalReport, GeneratedInstances, Path, PathScorer, Result,
    RoadNetwork, SkipGramConfig, Strategy, StrategyKind, TrainConfig, TrainingInstance, Trajectory,
    VertexId, WalkConfig,
};
use rayon::prelude::*;

use crate::cli::{
    EmbedArgs, EvaluateArgs, GenDataArgs, GenNetworkArgs, PathsArgs, RankArgs, RerunArgs,
    SweepArgs, TrainArgs,
};
use crate::config::{env_snapshot, parse_fractions, parse_list, Layers};
use crate::manifest::Manifest;

/// Invocation context threaded into every command: the argv being executed
/// (recorded in the manifest) and, on rerun, the frozen environment snapshot
/// that replaces the live process environment.
pub struct RunCtx<'a> {
    pub argv: &'a [String],
    pub fixed_env: Option<&'a BTreeMap<String, String>>,
}

fn require_file(path: &FsPath) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("missing input file: {}", path.display()),
        )))
    }
}

fn open_in(path: &FsPath) -> Result<BufReader<File>> {
    require_file(path)?;
    Ok(BufReader::new(File::open(path)?))
}

fn create_out(path: &FsPath) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// Commands never write over their own inputs.
fn check_distinct(inputs: &[&FsPath], outputs: &[&FsPath]) -> Result<()> {
    let abs = |p: &FsPath| std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf());
    for out in outputs {
        if inputs.iter().any(|i| abs(i) == abs(out)) {
            return Err(Error::validation(format!(
                "output {} would overwrite an input file",
                out.display()
            )));
        }
    }
    Ok(())
}

/// Attach the file name to parse errors, which only carry line numbers.
fn with_file<T>(path: &FsPath, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Parse { line, msg } => {
            Error::Parse { line, msg: format!("{}: {msg}", path.display()) }
        }
        other => other,
    })
}

fn load_network(path: &FsPath) -> Result<RoadNetwork> {
    with_file(path, RoadNetwork::load(open_in(path)?))
}

fn load_trajectories(path: &FsPath, net: &RoadNetwork) -> Result<Vec<Trajectory>> {
    with_file(path, read_trajectories(open_in(path)?, net))
}

fn write_manifest(
    ctx: &RunCtx,
    env: BTreeMap<String, String>,
    inputs: &[&FsPath],
    outputs: &[&FsPath],
    anchor: &FsPath,
) -> Result<()> {
    let mut m = Manifest::new(ctx.argv.to_vec(), env);
    for p in inputs {
        m.record_input(p)?;
    }
    for p in outputs {
        m.record_output(p);
    }
    let mpath = Manifest::manifest_path(anchor);
    m.save(&mpath)?;
    println!("manifest -> {}", mpath.display());
    Ok(())
}

fn parse_mode(raw: &str) -> Result<EmbeddingMode> {
    match raw {
        "random" => Ok(EmbeddingMode::RandomInit),
        "frozen" => Ok(EmbeddingMode::PretrainedFrozen),
        "trainable" => Ok(EmbeddingMode::PretrainedTrainable),
        other => Err(Error::config(format!(
            "embedding mode {other:?} (expected random, frozen, or trainable)"
        ))),
    }
}

/// Candidate generation for one strategy; the bool reports a hit budget cap.
fn run_strategy(
    net: &RoadNetwork,
    source: VertexId,
    dest: VertexId,
    strategy: &Strategy,
) -> Result<(Vec<Path>, bool)> {
    let params = DiversifiedParams {
        k: strategy.k,
        delta: strategy.delta,
        max_candidates: strategy.max_candidates,
    };
    match strategy.kind {
        StrategyKind::TkDI | StrategyKind::TkTT | StrategyKind::TkFC => {
            let kind = strategy.kind.cost_kind().unwrap();
            Ok((top_k_paths(net, source, dest, kind, strategy.k)?, false))
        }
        StrategyKind::DTkDI | StrategyKind::DTkTT | StrategyKind::DTkFC => {
            let kind = strategy.kind.cost_kind().unwrap();
            let out = diversified_top_k(net, source, dest, kind, &params)?;
            Ok((out.paths, out.cap_hit))
        }
        StrategyKind::DTkM => {
            let out = multi_cost_diversified(net, source, dest, &params)?;
            Ok((out.paths, out.cap_hit))
        }
    }
}

// ---------------------------------------------------------------------------
// gen-network

pub fn gen_network(ctx: &RunCtx, args: &GenNetworkArgs) -> Result<()> {
    let net = pathrank::grid_network(args.rows, args.cols, args.seed)?;
    check_distinct(&[], &[&args.out])?;
    net.save(&mut create_out(&args.out)?)?;
    println!(
        "network: {}x{} grid, {} vertices, {} edges -> {}",
        args.rows,
        args.cols,
        net.vertex_count(),
        net.edge_count(),
        args.out.display()
    );
    write_manifest(ctx, BTreeMap::new(), &[], &[&args.out], &args.out)
}

// ---------------------------------------------------------------------------
// paths

pub fn paths(ctx: &RunCtx, args: &PathsArgs) -> Result<()> {
    let net = load_network(&args.network)?;
    let cost: CostKind = args.cost.parse()?;
    let kind = match args.strategy.as_str() {
        "topk" => match cost {
            CostKind::Distance => StrategyKind::TkDI,
            CostKind::TravelTime => StrategyKind::TkTT,
            CostKind::Fuel => StrategyKind::TkFC,
        },
        "diversified" => match cost {
            CostKind::Distance => StrategyKind::DTkDI,
            CostKind::TravelTime => StrategyKind::DTkTT,
            CostKind::Fuel => StrategyKind::DTkFC,
        },
        "multicost" => StrategyKind::DTkM,
        other => {
            return Err(Error::config(format!(
                "strategy {other:?} (expected topk, diversified, or multicost)"
            )))
        }
    };
    let strategy = Strategy::new(kind, args.k, args.delta, args.max_candidates)?;
    let (found, cap_hit) = run_strategy(&net, VertexId(args.source), VertexId(args.dest), &strategy)?;

    check_distinct(&[&args.network], &[&args.out])?;
    let mut w = create_out(&args.out)?;
    for p in &found {
        writeln!(w, "{}", p.to_line())?;
    }
    w.flush()?;
    println!(
        "{}: {} paths from {} to {}{} -> {}",
        strategy.kind.as_str(),
        found.len(),
        args.source,
        args.dest,
        if cap_hit { " (candidate cap hit)" } else { "" },
        args.out.display()
    );
    write_manifest(ctx, BTreeMap::new(), &[&args.network], &[&args.out], &args.out)
}

// ---------------------------------------------------------------------------
// gen-data

/// Instance generation for a block of trajectories, parallel per trajectory.
fn instances_for(
    net: &RoadNetwork,
    trajectories: &[Trajectory],
    strategy: &Strategy,
) -> Result<(Vec<TrainingInstance>, usize, usize)> {
    let generated: Vec<GeneratedInstances> = trajectories
        .par_iter()
        .map(|t| generate_instances(net, t, strategy))
        .collect::<Result<_>>()?;
    let mut instances = Vec::new();
    let mut unreachable = 0;
    let mut capped = 0;
    for g in generated {
        unreachable += g.empty as usize;
        capped += g.cap_hit as usize;
        instances.extend(g.instances);
    }
    Ok((instances, unreachable, capped))
}

fn suffixed(base: &FsPath, suffix: &str) -> PathBuf {
    let mut name = base.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(suffix);
    base.with_file_name(name)
}

fn emit_block(
    net: &RoadNetwork,
    strategy: &Strategy,
    base: &FsPath,
    tag: Option<&str>,
    trajectories: &[Trajectory],
    outputs: &mut Vec<PathBuf>,
) -> Result<()> {
    let dot_tag = tag.map(|t| format!(".{t}")).unwrap_or_default();
    let traj_path = suffixed(base, &format!("{dot_tag}.trajectories.txt"));
    let inst_path = suffixed(base, &format!("{dot_tag}.instances.txt"));

    write_trajectories(&mut create_out(&traj_path)?, trajectories)?;
    let (instances, unreachable, capped) = instances_for(net, trajectories, strategy)?;
    write_instances(&mut create_out(&inst_path)?, &instances)?;
    println!(
        "{}: {} trajectories -> {} instances ({} unreachable, {} cap-hit) -> {}",
        tag.unwrap_or("all"),
        trajectories.len(),
        instances.len(),
        unreachable,
        capped,
        inst_path.display()
    );
    outputs.push(traj_path);
    outputs.push(inst_path);
    Ok(())
}

pub fn gen_data(ctx: &RunCtx, args: &GenDataArgs) -> Result<()> {
    let net = load_network(&args.network)?;
    let kind: StrategyKind = args.strategy.parse()?;
    let strategy = Strategy::new(kind, args.k, args.delta, args.max_candidates)?;

    let mut inputs: Vec<&FsPath> = vec![&args.network];
    let trajectories = match &args.trajectories {
        Some(path) => {
            inputs.push(path);
            load_trajectories(path, &net)?
        }
        None => make_synthetic_trajectories(
            &net,
            &pathrank::SyntheticConfig {
                count: args.count,
                preference: args.preference.parse()?,
                noise_prob: args.noise,
                seed: args.seed,
            },
        )?,
    };

    let mut outputs = Vec::new();
    match &args.split {
        Some(raw) => {
            let fractions = parse_fractions(raw)?;
            let (tr, va, te) = split_dataset(trajectories, fractions, args.seed)?;
            emit_block(&net, &strategy, &args.out, Some("train"), &tr, &mut outputs)?;
            emit_block(&net, &strategy, &args.out, Some("val"), &va, &mut outputs)?;
            emit_block(&net, &strategy, &args.out, Some("test"), &te, &mut outputs)?;
        }
        None => emit_block(&net, &strategy, &args.out, None, &trajectories, &mut outputs)?,
    }

    let out_refs: Vec<&FsPath> = outputs.iter().map(PathBuf::as_path).collect();
    check_distinct(&inputs, &out_refs)?;
    write_manifest(ctx, BTreeMap::new(), &inputs, &out_refs, &args.out)
}

// ---------------------------------------------------------------------------
// embed

fn embed_pipeline(
    net: &RoadNetwork,
    walk_cfg: &WalkConfig,
    sg_cfg: &SkipGramConfig,
) -> Result<(EmbeddingMatrix, usize)> {
    let walks = generate_walks(net, walk_cfg)?;
    let matrix = train_skipgram(&walks, net.vertex_count(), sg_cfg)?;
    Ok((matrix, walks.len()))
}

pub fn embed(ctx: &RunCtx, args: &EmbedArgs) -> Result<()> {
    let net = load_network(&args.network)?;
    let walk_cfg = WalkConfig {
        walks_per_vertex: args.walks_per_vertex,
        walk_length: args.walk_length,
        p: args.p,
        q: args.q,
        weighted: args.weighted,
        seed: args.seed,
    };
    let sg_cfg = SkipGramConfig {
        dim: args.dim,
        window: args.window,
        negatives: args.negatives,
        epochs: args.epochs,
        learning_rate: args.learning_rate,
        seed: args.seed,
    };
    let (matrix, walk_count) = embed_pipeline(&net, &walk_cfg, &sg_cfg)?;
    check_distinct(&[&args.network], &[&args.out])?;
    matrix.save(&mut create_out(&args.out)?)?;
    println!(
        "embedding: {} vertices x {} dims from {} walks -> {}",
        net.vertex_count(),
        args.dim,
        walk_count,
        args.out.display()
    );
    write_manifest(ctx, BTreeMap::new(), &[&args.network], &[&args.out], &args.out)
}

// ---------------------------------------------------------------------------
// train

const TRAIN_KEYS: &[&str] = &[
    "network",
    "train_instances",
    "val_instances",
    "embedding",
    "embedding_mode",
    "dim",
    "z_max",
    "aux_tasks",
    "alpha",
    "lambda",
    "learning_rate",
    "batch_size",
    "epochs",
    "seed",
    "checkpoint_out",
    "log_out",
];

pub fn train_cmd(ctx: &RunCtx, args: &TrainArgs) -> Result<()> {
    if let Some(cfg) = &args.config {
        require_file(cfg)?;
    }
    let env = env_snapshot(TRAIN_KEYS, ctx.fixed_env);
    let layers = Layers::new(args.config.as_deref(), TRAIN_KEYS, env.clone())?;

    let network: PathBuf = layers.get_req("network", args.network.clone())?;
    let train_path: PathBuf = layers.get_req("train_instances", args.train_instances.clone())?;
    let val_path: PathBuf = layers.get_req("val_instances", args.val_instances.clone())?;
    let embedding_path: Option<PathBuf> = layers.get_opt("embedding", args.embedding.clone())?;
    let checkpoint_out: PathBuf = layers.get_req("checkpoint_out", args.checkpoint_out.clone())?;
    let log_out: Option<PathBuf> = layers.get_opt("log_out", args.log_out.clone())?;

    let cfg = TrainConfig {
        dim: layers.get_or("dim", args.dim, 64)?,
        z_max: layers.get_or("z_max", args.z_max, 64)?,
        aux_tasks: layers.get_or("aux_tasks", args.aux_tasks, 0)?,
        alpha: layers.get_or("alpha", args.alpha, 0.0)?,
        lambda: layers.get_or("lambda", args.lambda, 1e-4)?,
        learning_rate: layers.get_or("learning_rate", args.learning_rate, 1e-3)?,
        batch_size: layers.get_or("batch_size", args.batch_size, 32)?,
        max_epochs: layers.get_or("epochs", args.epochs, 50)?,
        embedding_mode: parse_mode(&layers.get_or(
            "embedding_mode",
            args.embedding_mode.clone(),
            "random".to_string(),
        )?)?,
        seed: layers.get_or("seed", args.seed, 0)?,
    };

    let net = load_network(&network)?;
    let train_set = with_file(&train_path, read_instances(open_in(&train_path)?, &net))?;
    let val_set = with_file(&val_path, read_instances(open_in(&val_path)?, &net))?;
    let pretrained = match &embedding_path {
        Some(p) => Some(with_file(p, EmbeddingMatrix::load(open_in(p)?))?),
        None => None,
    };

    let mut inputs: Vec<&FsPath> = vec![&network, &train_path, &val_path];
    if let Some(p) = &embedding_path {
        inputs.push(p);
    }
    if let Some(p) = &args.config {
        inputs.push(p);
    }
    let mut outputs: Vec<&FsPath> = vec![&checkpoint_out];
    if let Some(p) = &log_out {
        outputs.push(p);
    }
    check_distinct(&inputs, &outputs)?;

    let outcome = train(&train_set, &val_set, &cfg, pretrained.as_ref(), net.vertex_count())?;

    save_checkpoint(&outcome.model, &mut create_out(&checkpoint_out)?)?;
    if let Some(p) = &log_out {
        let mut w = create_out(p)?;
        writeln!(w, "epoch,train_mse,val_mse,checkpointed")?;
        for row in &outcome.log {
            writeln!(w, "{},{},{},{}", row.epoch, row.train_mse, row.val_mse, row.checkpointed)?;
        }
        w.flush()?;
    }

    let best = outcome.log.iter().rev().find(|e| e.checkpointed);
    match best {
        Some(e) => println!(
            "trained {} epochs; checkpoint from epoch {} (train mse {:.6e}, val mse {:.6e}) -> {}",
            outcome.log.len(),
            e.epoch,
            e.train_mse,
            e.val_mse,
            checkpoint_out.display()
        ),
        None => println!(
            "trained {} epochs; no epoch improved on the initial parameters -> {}",
            outcome.log.len(),
            checkpoint_out.display()
        ),
    }
    write_manifest(ctx, env, &inputs, &outputs, &checkpoint_out)
}

// ---------------------------------------------------------------------------
// rank

const RANK_KEYS: &[&str] = &[
    "checkpoint",
    "network",
    "source",
    "dest",
    "strategy",
    "k",
    "delta",
    "max_candidates",
    "out",
];

pub fn rank(ctx: &RunCtx, args: &RankArgs) -> Result<()> {
    if let Some(cfg) = &args.config {
        require_file(cfg)?;
    }
    let env = env_snapshot(RANK_KEYS, ctx.fixed_env);
    let layers = Layers::new(args.config.as_deref(), RANK_KEYS, env.clone())?;

    let checkpoint: PathBuf = layers.get_req("checkpoint", args.checkpoint.clone())?;
    let network: PathBuf = layers.get_req("network", args.network.clone())?;
    let source: u32 = layers.get_req("source", args.source)?;
    let dest: u32 = layers.get_req("dest", args.dest)?;
    let kind: StrategyKind =
        layers.get_or("strategy", args.strategy.clone(), "D-TkM".to_string())?.parse()?;
    let k: usize = layers.get_or("k", args.k, 10)?;
    let delta: f64 = layers.get_or("delta", args.delta, 0.8)?;
    let max_candidates: usize = layers.get_or("max_candidates", args.max_candidates, 200)?;
    let out: PathBuf = layers.get_req("out", args.out.clone())?;

    let net = load_network(&network)?;
    let model = with_file(&checkpoint, load_checkpoint(open_in(&checkpoint)?))?;
    let strategy = Strategy::new(kind, k, delta, max_candidates)?;
    let (candidates, cap_hit) = run_strategy(&net, VertexId(source), VertexId(dest), &strategy)?;
    let ranked = predict_and_rank(&model, &candidates)?;

    let mut inputs: Vec<&FsPath> = vec![&checkpoint, &network];
    if let Some(p) = &args.config {
        inputs.push(p);
    }
    check_distinct(&inputs, &[&out])?;
    let mut w = create_out(&out)?;
    for sc in &ranked {
        writeln!(w, "{} {}", sc.score, candidates[sc.index].to_line())?;
    }
    w.flush()?;
    println!(
        "ranked {} {} candidates from {} to {}{} with {} -> {}",
        ranked.len(),
        strategy.kind.as_str(),
        source,
        dest,
        if cap_hit { " (candidate cap hit)" } else { "" },
        model.name(),
        out.display()
    );
    write_manifest(ctx, env, &inputs, &[&out], &out)
}

// ---------------------------------------------------------------------------
// evaluate

/// Candidates pooled over every generation strategy, first occurrence wins.
fn pooled_case(
    net: &RoadNetwork,
    trajectory: &Trajectory,
    k: usize,
    delta: f64,
    max_candidates: usize,
) -> Result<EvalCase> {
    let mut seen: HashSet<Vec<u32>> = HashSet::new();
    let mut pool = Vec::new();
    for kind in StrategyKind::ALL {
        let strategy = Strategy::new(kind, k, delta, max_candidates)?;
        let generated = generate_instances(net, trajectory, &strategy)?;
        for inst in generated.instances {
            let key: Vec<u32> = inst.path.vertices().iter().map(|v| v.0).collect();
            if seen.insert(key) {
                pool.push(inst.path);
            }
        }
    }
    Ok(EvalCase { trajectory: trajectory.clone(), candidates: pool })
}

fn pooled_cases(
    net: &RoadNetwork,
    trajectories: &[Trajectory],
    k: usize,
    delta: f64,
    max_candidates: usize,
) -> Result<Vec<EvalCase>> {
    trajectories
        .par_iter()
        .map(|t| pooled_case(net, t, k, delta, max_candidates))
        .collect()
}

/// Drop cases whose candidate pool exceeds the model's padded length; every
/// scorer must see the same cases for the comparison to mean anything.
fn within_z_max(cases: Vec<EvalCase>, z_max: usize) -> (Vec<EvalCase>, usize) {
    let before = cases.len();
    let kept: Vec<EvalCase> =
        cases.into_iter().filter(|c| c.candidates.iter().all(|p| p.len() <= z_max)).collect();
    let dropped = before - kept.len();
    (kept, dropped)
}

fn report_lines(report: &EvalReport, machine: &mut String) {
    for line in report.machine_lines().lines() {
        machine.push_str(&report.scorer);
        machine.push(',');
        machine.push_str(line);
        machine.push('\n');
    }
}

pub fn evaluate_cmd(ctx: &RunCtx, args: &EvaluateArgs) -> Result<()> {
    let net = load_network(&args.network)?;
    let trajectories = load_trajectories(&args.trajectories, &net)?;
    let model = match &args.checkpoint {
        Some(p) => Some(with_file(p, load_checkpoint(open_in(p)?))?),
        None => None,
    };

    let mut cases = pooled_cases(&net, &trajectories, args.k, args.delta, args.max_candidates)?;
    if let Some(model) = &model {
        let (kept, dropped) = within_z_max(cases, model.params.z_max);
        cases = kept;
        if dropped > 0 {
            println!("dropped {dropped} trajectories with candidates longer than z_max");
        }
    }
    if cases.is_empty() {
        return Err(Error::validation("no evaluable trajectories left"));
    }

    let mut scorers: Vec<Box<dyn PathScorer>> = Vec::new();
    if let Some(model) = model {
        scorers.push(Box::new(model));
    }
    for kind in CostKind::ALL {
        scorers.push(Box::new(CostBaseline(kind)));
    }

    let mut machine = String::new();
    for scorer in &scorers {
        let report = evaluate(scorer.as_ref(), &net, &cases)?;
        println!("{}", report.human_table());
        report_lines(&report, &mut machine);
    }

    let mut inputs: Vec<&FsPath> = vec![&args.network, &args.trajectories];
    if let Some(p) = &args.checkpoint {
        inputs.push(p);
    }
    check_distinct(&inputs, &[&args.out])?;
    let mut w = create_out(&args.out)?;
    w.write_all(machine.as_bytes())?;
    w.flush()?;
    println!("machine-readable report -> {}", args.out.display());
    write_manifest(ctx, BTreeMap::new(), &inputs, &[&args.out], &args.out)
}

// ---------------------------------------------------------------------------
// sweep

const SWEEP_KEYS: &[&str] = &[
    "network",
    "trajectories",
    "count",
    "preference",
    "noise",
    "seed",
    "split",
    "strategies",
    "dims",
    "alphas",
    "k",
    "delta",
    "max_candidates",
    "z_max",
    "aux_tasks",
    "lambda",
    "learning_rate",
    "batch_size",
    "epochs",
    "embedding_mode",
    "walks_per_vertex",
    "walk_length",
    "p",
    "q",
    "weighted",
    "window",
    "negatives",
    "embed_epochs",
    "embed_learning_rate",
    "out",
];

struct SweepRow {
    strategy: StrategyKind,
    dim: usize,
    alpha: f64,
    outcome: Result<(Option<f64>, Option<f64>, f64, f64)>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "-".to_string())
}

pub fn sweep(ctx: &RunCtx, args: &SweepArgs) -> Result<()> {
    require_file(&args.config)?;
    let env = env_snapshot(SWEEP_KEYS, ctx.fixed_env);
    let layers = Layers::new(Some(&args.config), SWEEP_KEYS, env.clone())?;

    let network: PathBuf = layers.get_req("network", None)?;
    let net = load_network(&network)?;
    let seed: u64 = layers.get_or("seed", None, 0)?;

    let trajectories_path: Option<PathBuf> = layers.get_opt("trajectories", None)?;
    let trajectories = match &trajectories_path {
        Some(p) => load_trajectories(p, &net)?,
        None => make_synthetic_trajectories(
            &net,
            &pathrank::SyntheticConfig {
                count: layers.get_or("count", None, 120)?,
                preference: layers.get_or("preference", None, "travel-time".to_string())?.parse()?,
                noise_prob: layers.get_or("noise", None, 0.2)?,
                seed,
            },
        )?,
    };

    let fractions = parse_fractions(&layers.get_or("split", None, "0.7,0.1,0.2".to_string())?)?;
    let (train_trajs, val_trajs, test_trajs) = split_dataset(trajectories, fractions, seed)?;
    if val_trajs.is_empty() || test_trajs.is_empty() {
        return Err(Error::validation(
            "sweep needs non-empty validation and test splits; raise count or adjust split",
        ));
    }

    let strategies = parse_list::<StrategyKind>("strategies", &layers.get_req::<String>("strategies", None)?)?;
    let dims = parse_list::<usize>("dims", &layers.get_req::<String>("dims", None)?)?;
    let alphas = parse_list::<f64>("alphas", &layers.get_req::<String>("alphas", None)?)?;

    let k: usize = layers.get_or("k", None, 3)?;
    let delta: f64 = layers.get_or("delta", None, 0.8)?;
    let max_candidates: usize = layers.get_or("max_candidates", None, 200)?;
    let z_max: usize = layers.get_or("z_max", None, 64)?;
    let aux_tasks: usize = layers.get_or("aux_tasks", None, 3)?;
    let lambda: f64 = layers.get_or("lambda", None, 1e-4)?;
    let learning_rate: f64 = layers.get_or("learning_rate", None, 1e-3)?;
    let batch_size: usize = layers.get_or("batch_size", None, 32)?;
    let epochs: usize = layers.get_or("epochs", None, 30)?;
    let mode = parse_mode(&layers.get_or("embedding_mode", None, "random".to_string())?)?;
    let out: PathBuf = layers.get_req("out", args.out.clone())?;

    // shared across cells: test candidate pools and per-strategy instance sets
    let (cases, dropped) =
        within_z_max(pooled_cases(&net, &test_trajs, k, delta, max_candidates)?, z_max);
    if dropped > 0 {
        println!("dropped {dropped} test trajectories with candidates longer than z_max");
    }
    if cases.is_empty() {
        return Err(Error::validation("no evaluable test trajectories left"));
    }

    let mut embeddings: BTreeMap<usize, EmbeddingMatrix> = BTreeMap::new();
    if mode.uses_pretrained() {
        let walk_cfg = WalkConfig {
            walks_per_vertex: layers.get_or("walks_per_vertex", None, 10)?,
            walk_length: layers.get_or("walk_length", None, 80)?,
            p: layers.get_or("p", None, 1.0)?,
            q: layers.get_or("q", None, 1.0)?,
            weighted: layers.get_or("weighted", None, false)?,
            seed,
        };
        for &dim in &dims {
            let sg_cfg = SkipGramConfig {
                dim,
                window: layers.get_or("window", None, 5)?,
                negatives: layers.get_or("negatives", None, 5)?,
                epochs: layers.get_or("embed_epochs", None, 5)?,
                learning_rate: layers.get_or("embed_learning_rate", None, 0.025)?,
                seed,
            };
            let (matrix, _) = embed_pipeline(&net, &walk_cfg, &sg_cfg)?;
            embeddings.insert(dim, matrix);
        }
    }

    let mut per_strategy: BTreeMap<&str, (Vec<TrainingInstance>, Vec<TrainingInstance>)> =
        BTreeMap::new();
    for kind in &strategies {
        let strategy = Strategy::new(*kind, k, delta, max_candidates)?;
        let (train_set, _, _) = instances_for(&net, &train_trajs, &strategy)?;
        let (val_set, _, _) = instances_for(&net, &val_trajs, &strategy)?;
        per_strategy.insert(kind.as_str(), (train_set, val_set));
    }

    let mut rows = Vec::new();
    for kind in &strategies {
        let (train_set, val_set) = &per_strategy[kind.as_str()];
        for &dim in &dims {
            for &alpha in &alphas {
                let cfg = TrainConfig {
                    dim,
                    z_max,
                    aux_tasks,
                    alpha,
                    lambda,
                    learning_rate,
                    batch_size,
                    max_epochs: epochs,
                    embedding_mode: mode,
                    seed,
                };
                let outcome = train(train_set, val_set, &cfg, embeddings.get(&dim), net.vertex_count())
                    .and_then(|o| {
                        let report = evaluate(&o.model, &net, &cases)?;
                        Ok((report.mae, report.mare, report.overall.tau, report.overall.rho))
                    });
                match &outcome {
                    Ok((mae, mare, tau, rho)) => println!(
                        "cell {} dim={} alpha={}: mae={} mare={} tau={:.4} rho={:.4}",
                        kind.as_str(),
                        dim,
                        alpha,
                        fmt_opt(*mae),
                        fmt_opt(*mare),
                        tau,
                        rho
                    ),
                    Err(e) => println!("cell {} dim={} alpha={}: failed: {e}", kind.as_str(), dim, alpha),
                }
                rows.push(SweepRow { strategy: *kind, dim, alpha, outcome });
            }
        }
    }

    let mut inputs: Vec<&FsPath> = vec![&args.config, &network];
    if let Some(p) = &trajectories_path {
        inputs.push(p);
    }
    check_distinct(&inputs, &[&out])?;
    let mut w = create_out(&out)?;
    writeln!(w, "strategy,dim,alpha,mae,mare,tau,rho,error")?;
    for row in &rows {
        match &row.outcome {
            Ok((mae, mare, tau, rho)) => writeln!(
                w,
                "{},{},{},{},{},{:.6},{:.6},",
                row.strategy.as_str(),
                row.dim,
                row.alpha,
                fmt_opt(*mae),
                fmt_opt(*mare),
                tau,
                rho
            )?,
            Err(e) => writeln!(
                w,
                "{},{},{},,,,,{}",
                row.strategy.as_str(),
                row.dim,
                row.alpha,
                e.to_string().replace(',', ";")
            )?,
        }
    }
    w.flush()?;
    println!("{} sweep rows -> {}", rows.len(), out.display());
    write_manifest(ctx, env, &inputs, &[&out], &out)
}

// ---------------------------------------------------------------------------
// rerun

pub fn rerun(args: &RerunArgs) -> Result<()> {
    let manifest = Manifest::load(&args.manifest)?;
    manifest.verify_inputs()?;
    if manifest.argv.first().map(String::as_str) == Some("rerun") {
        return Err(Error::validation("manifest records a rerun; nothing to replay"));
    }
    println!("rerun: inputs verified, replaying: pathrank {}", manifest.argv.join(" "));
    crate::run_argv(&manifest.argv, Some(&manifest.env))
}
