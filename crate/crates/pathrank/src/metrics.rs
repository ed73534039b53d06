use std::collections::HashSet;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::network::{CostKind, RoadNetwork};
use crate::pathfinding::{weighted_jaccard, Path};
use crate::training::Trajectory;

pub fn mean_absolute_error(estimates: &[f64], truth: &[f64]) -> Result<f64> {
    check_pairs(estimates, truth)?;
    let total: f64 = estimates.iter().zip(truth).map(|(e, t)| (e - t).abs()).sum();
    Ok(total / truth.len() as f64)
}

/// Mean absolute relative error. Zero-truth entries would divide by zero, so
/// they are rejected up front.
pub fn mean_absolute_relative_error(estimates: &[f64], truth: &[f64]) -> Result<f64> {
    check_pairs(estimates, truth)?;
    if truth.iter().any(|&t| t == 0.0) {
        return Err(Error::validation(
            "relative error undefined when a true value is exactly 0",
        ));
    }
    let total: f64 = estimates
        .iter()
        .zip(truth)
        .map(|(e, t)| ((e - t) / t).abs())
        .sum();
    Ok(total / truth.len() as f64)
}

fn check_pairs(estimates: &[f64], truth: &[f64]) -> Result<()> {
    if estimates.len() != truth.len() {
        return Err(Error::validation(format!(
            "length mismatch: {} estimates vs {} truths",
            estimates.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::validation("error metrics need at least one pair"));
    }
    Ok(())
}

/// A total order over items 0..n as a permutation: position 0 holds the
/// top-ranked item. No ties; callers with tied scores must break them before
/// building the list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankedList(Vec<usize>);

impl RankedList {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        if order.is_empty() {
            return Err(Error::validation("ranking must not be empty"));
        }
        let mut seen = HashSet::with_capacity(order.len());
        for &i in &order {
            if !seen.insert(i) {
                return Err(Error::validation(format!("item {i} ranked twice")));
            }
        }
        Ok(RankedList(order))
    }

    pub fn items(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Map item -> 1-based rank. Errors when the two lists rank different
    /// item sets.
    fn positions_against(&self, other: &RankedList) -> Result<Vec<(usize, usize)>> {
        if self.len() != other.len() {
            return Err(Error::validation(format!(
                "rankings cover {} vs {} items",
                self.len(),
                other.len()
            )));
        }
        let mut other_pos = std::collections::HashMap::with_capacity(other.len());
        for (rank, &item) in other.0.iter().enumerate() {
            other_pos.insert(item, rank + 1);
        }
        self.0
            .iter()
            .enumerate()
            .map(|(rank, item)| {
                let o = other_pos.get(item).ok_or_else(|| {
                    Error::validation(format!("item {item} missing from second ranking"))
                })?;
                Ok((rank + 1, *o))
            })
            .collect()
    }
}

/// Kendall rank correlation: (concordant - discordant) / (n(n-1)/2).
/// Both rankings are strict total orders, so every pair is one or the other.
pub fn kendall_tau(truth: &RankedList, estimate: &RankedList) -> Result<f64> {
    let pairs = truth.positions_against(estimate)?;
    let n = pairs.len();
    if n < 2 {
        return Err(Error::validation("rank correlation needs at least 2 items"));
    }
    let mut concordant = 0i64;
    let mut discordant = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            // truth ranks are increasing by construction, so the pair agrees
            // iff the estimate ranks are increasing too
            if pairs[i].1 < pairs[j].1 {
                concordant += 1;
            } else {
                discordant += 1;
            }
        }
    }
    Ok((concordant - discordant) as f64 / (n * (n - 1) / 2) as f64)
}

/// Spearman rank correlation: 1 - 6 * sum(d^2) / (n(n^2-1)) with d the
/// per-item rank difference. Valid for distinct ranks.
pub fn spearman_rho(truth: &RankedList, estimate: &RankedList) -> Result<f64> {
    let pairs = truth.positions_against(estimate)?;
    let n = pairs.len();
    if n < 2 {
        return Err(Error::validation("rank correlation needs at least 2 items"));
    }
    let d2: f64 = pairs
        .iter()
        .map(|&(a, b)| {
            let d = a as f64 - b as f64;
            d * d
        })
        .sum();
    let nf = n as f64;
    Ok(1.0 - 6.0 * d2 / (nf * (nf * nf - 1.0)))
}

/// Rank candidate indices by descending score, ties kept in input order.
/// The returned flag reports whether any tie was broken that way.
pub fn rank_by_scores_desc(scores: &[f64]) -> (RankedList, bool) {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut tied = false;
    for w in idx.windows(2) {
        if scores[w[0]] == scores[w[1]] {
            tied = true;
            break;
        }
    }
    (RankedList(idx), tied)
}

/// Scores candidate paths for a trajectory; higher means better.
pub trait PathScorer: Sync {
    fn score(&self, net: &RoadNetwork, trajectory: &Trajectory, candidate: &Path) -> Result<f64>;

    /// True when scores estimate the similarity label itself, making MAE and
    /// MARE against labels meaningful. Cost heuristics return false.
    fn is_similarity_estimate(&self) -> bool;

    fn name(&self) -> String;
}

/// Ranks by total path cost under one kind, cheapest first. Scores are
/// negated costs so that "higher is better" holds.
pub struct CostBaseline(pub CostKind);

impl PathScorer for CostBaseline {
    fn score(&self, net: &RoadNetwork, _trajectory: &Trajectory, candidate: &Path) -> Result<f64> {
        Ok(-candidate.cost(net, self.0)?)
    }

    fn is_similarity_estimate(&self) -> bool {
        false
    }

    fn name(&self) -> String {
        format!("cost-baseline-{}", self.0)
    }
}

/// One ranking problem: a trajectory and the candidate set to order.
#[derive(Debug, Clone)]
pub struct EvalCase {
    pub trajectory: Trajectory,
    pub candidates: Vec<Path>,
}

/// Trajectory distance buckets in km. Everything above the last bound only
/// counts towards the overall row.
const BUCKETS: [(f64, f64, &str); 3] =
    [(0.0, 5.0, "0-5km"), (5.0, 10.0, "5-10km"), (10.0, 15.0, "10-15km")];

#[derive(Debug, Clone, Default)]
pub struct MetricRow {
    pub cases: usize,
    pub tau: f64,
    pub rho: f64,
}

#[derive(Debug, Clone)]
pub struct PerTrajectory {
    pub index: usize,
    pub distance_km: f64,
    pub candidate_count: usize,
    pub tau: f64,
    pub rho: f64,
    pub tied_scores: bool,
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub scorer: String,
    pub similarity_estimates: bool,
    pub overall: MetricRow,
    pub buckets: Vec<(String, MetricRow)>,
    /// Macro MAE/MARE of scores against labels; only present when the scorer
    /// estimates similarities.
    pub mae: Option<f64>,
    pub mare: Option<f64>,
    pub per_trajectory: Vec<PerTrajectory>,
    /// Cases dropped for having fewer than 2 candidates.
    pub skipped_small: usize,
    /// Cases where the scorer produced at least one exact tie.
    pub tied_cases: usize,
}

struct CaseOutcome {
    index: usize,
    distance_km: f64,
    skipped: bool,
    candidate_count: usize,
    tau: f64,
    rho: f64,
    tied: bool,
    mae: Option<f64>,
    mare: Option<f64>,
}

/// Rank every case with `scorer` and macro-average rank correlations against
/// the weighted-Jaccard ground truth, overall and per distance bucket.
/// Ground-truth ties (equal labels) keep candidate input order.
pub fn evaluate(scorer: &dyn PathScorer, net: &RoadNetwork, cases: &[EvalCase]) -> Result<EvalReport> {
    if cases.is_empty() {
        return Err(Error::validation("evaluation needs at least one case"));
    }
    let outcomes: Vec<CaseOutcome> = cases
        .par_iter()
        .enumerate()
        .map(|(index, case)| evaluate_case(scorer, net, index, case))
        .collect::<Result<_>>()?;

    let mut overall = MetricRow::default();
    let mut buckets: Vec<(String, MetricRow)> = BUCKETS
        .iter()
        .map(|&(_, _, name)| (name.to_string(), MetricRow::default()))
        .collect();
    let mut per_trajectory = Vec::new();
    let mut skipped_small = 0;
    let mut tied_cases = 0;
    let mut mae_sum = 0.0;
    let mut mare_sum = 0.0;
    let mut mare_count = 0usize;
    for o in &outcomes {
        if o.skipped {
            skipped_small += 1;
            continue;
        }
        overall.cases += 1;
        overall.tau += o.tau;
        overall.rho += o.rho;
        if o.tied {
            tied_cases += 1;
        }
        if let Some(m) = o.mae {
            mae_sum += m;
        }
        if let Some(m) = o.mare {
            mare_sum += m;
            mare_count += 1;
        }
        for (&(lo, hi, _), (_, row)) in BUCKETS.iter().zip(&mut buckets) {
            if o.distance_km > lo && o.distance_km <= hi {
                row.cases += 1;
                row.tau += o.tau;
                row.rho += o.rho;
            }
        }
        per_trajectory.push(PerTrajectory {
            index: o.index,
            distance_km: o.distance_km,
            candidate_count: o.candidate_count,
            tau: o.tau,
            rho: o.rho,
            tied_scores: o.tied,
        });
    }
    if overall.cases == 0 {
        return Err(Error::validation(
            "every case was skipped (fewer than 2 candidates each)",
        ));
    }
    let finish = |row: &mut MetricRow| {
        if row.cases > 0 {
            row.tau /= row.cases as f64;
            row.rho /= row.cases as f64;
        }
    };
    finish(&mut overall);
    for (_, row) in &mut buckets {
        finish(row);
    }
    let sim = scorer.is_similarity_estimate();
    Ok(EvalReport {
        scorer: scorer.name(),
        similarity_estimates: sim,
        mae: sim.then(|| mae_sum / overall.cases as f64),
        mare: (sim && mare_count > 0).then(|| mare_sum / mare_count as f64),
        overall,
        buckets,
        per_trajectory,
        skipped_small,
        tied_cases,
    })
}

fn evaluate_case(
    scorer: &dyn PathScorer,
    net: &RoadNetwork,
    index: usize,
    case: &EvalCase,
) -> Result<CaseOutcome> {
    let distance_km = case.trajectory.path.cost(net, CostKind::Distance)? / 1000.0;
    if case.candidates.len() < 2 {
        return Ok(CaseOutcome {
            index,
            distance_km,
            skipped: true,
            candidate_count: case.candidates.len(),
            tau: 0.0,
            rho: 0.0,
            tied: false,
            mae: None,
            mare: None,
        });
    }
    let labels: Vec<f64> = case
        .candidates
        .iter()
        .map(|c| weighted_jaccard(net, &case.trajectory.path, c))
        .collect::<Result<_>>()?;
    let scores: Vec<f64> = case
        .candidates
        .iter()
        .map(|c| scorer.score(net, &case.trajectory, c))
        .collect::<Result<_>>()?;
    let (truth, _) = rank_by_scores_desc(&labels);
    let (estimate, tied) = rank_by_scores_desc(&scores);
    let tau = kendall_tau(&truth, &estimate)?;
    let rho = spearman_rho(&truth, &estimate)?;
    let (mae, mare) = if scorer.is_similarity_estimate() {
        let mae = mean_absolute_error(&scores, &labels)?;
        // zero labels (disjoint candidate) make MARE undefined; skip those cases
        let mare = if labels.iter().all(|&l| l != 0.0) {
            Some(mean_absolute_relative_error(&scores, &labels)?)
        } else {
            None
        };
        (Some(mae), mare)
    } else {
        (None, None)
    };
    Ok(CaseOutcome {
        index,
        distance_km,
        skipped: false,
        candidate_count: case.candidates.len(),
        tau,
        rho,
        tied,
        mae,
        mare,
    })
}

impl EvalReport {
    /// Fixed-width table for human eyes.
    pub fn human_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scorer: {}", self.scorer);
        let _ = writeln!(
            s,
            "cases: {} ranked, {} skipped (<2 candidates), {} with tied scores",
            self.overall.cases, self.skipped_small, self.tied_cases
        );
        let _ = writeln!(s, "{:<10} {:>7} {:>9} {:>9}", "bucket", "cases", "tau", "rho");
        let _ = writeln!(
            s,
            "{:<10} {:>7} {:>9.4} {:>9.4}",
            "overall", self.overall.cases, self.overall.tau, self.overall.rho
        );
        for (name, row) in &self.buckets {
            let _ = writeln!(s, "{:<10} {:>7} {:>9.4} {:>9.4}", name, row.cases, row.tau, row.rho);
        }
        if let Some(mae) = self.mae {
            let _ = writeln!(s, "mae: {mae:.6}");
        }
        if let Some(mare) = self.mare {
            let _ = writeln!(s, "mare: {mare:.6}");
        }
        s
    }

    /// One `metric,bucket,value` line per aggregate, for scripts.
    pub fn machine_lines(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "cases,overall,{}", self.overall.cases);
        let _ = writeln!(s, "skipped,overall,{}", self.skipped_small);
        let _ = writeln!(s, "tied,overall,{}", self.tied_cases);
        let _ = writeln!(s, "tau,overall,{:.6}", self.overall.tau);
        let _ = writeln!(s, "rho,overall,{:.6}", self.overall.rho);
        for (name, row) in &self.buckets {
            let _ = writeln!(s, "cases,{name},{}", row.cases);
            let _ = writeln!(s, "tau,{name},{:.6}", row.tau);
            let _ = writeln!(s, "rho,{name},{:.6}", row.rho);
        }
        if let Some(mae) = self.mae {
            let _ = writeln!(s, "mae,overall,{mae:.6}");
        }
        if let Some(mare) = self.mare {
            let _ = writeln!(s, "mare,overall,{mare:.6}");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{grid_network, VertexId};
    use crate::pathfinding::shortest_path;

    #[test]
    fn error_metrics_match_hand_values() {
        let est = [1.0, 2.0, 4.0];
        let truth = [1.0, 1.0, 2.0];
        assert_eq!(mean_absolute_error(&est, &truth).unwrap(), 1.0);
        assert_eq!(mean_absolute_relative_error(&est, &truth).unwrap(), (0.0 + 1.0 + 1.0) / 3.0);
        assert!(mean_absolute_error(&est, &truth[..2]).is_err());
        assert!(mean_absolute_relative_error(&est, &[1.0, 0.0, 2.0]).is_err());
        assert!(mean_absolute_error(&[], &[]).is_err());
    }

    #[test]
    fn mare_is_scale_invariant() {
        let est = [1.5, 4.0, 2.0];
        let truth = [1.0, 5.0, 2.5];
        let a = mean_absolute_relative_error(&est, &truth).unwrap();
        let scaled_est: Vec<f64> = est.iter().map(|e| e * 1000.0).collect();
        let scaled_truth: Vec<f64> = truth.iter().map(|t| t * 1000.0).collect();
        let b = mean_absolute_relative_error(&scaled_est, &scaled_truth).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn ranked_list_rejects_duplicates() {
        assert!(RankedList::new(vec![0, 1, 0]).is_err());
        assert!(RankedList::new(vec![]).is_err());
        let a = RankedList::new(vec![0, 1, 2]).unwrap();
        let b = RankedList::new(vec![0, 1, 3]).unwrap();
        assert!(kendall_tau(&a, &b).is_err(), "different item sets");
    }

    #[test]
    fn worked_three_item_example() {
        // truth P1 > P2 > P3, estimate P2 > P3 > P1
        let truth = RankedList::new(vec![1, 2, 3]).unwrap();
        let est = RankedList::new(vec![2, 3, 1]).unwrap();
        // pairs: (P1,P2) discordant, (P1,P3) discordant, (P2,P3) concordant
        let tau = kendall_tau(&truth, &est).unwrap();
        assert!((tau - (1.0 - 2.0) / 3.0).abs() < 1e-12);
        // rank differences: P1: 1-3=-2, P2: 2-1=1, P3: 3-2=1 -> d2 = 6
        let rho = spearman_rho(&truth, &est).unwrap();
        assert!((rho - (1.0 - 6.0 * 6.0 / (3.0 * 8.0))).abs() < 1e-12);
        assert_eq!(rho, -0.5);
    }

    #[test]
    fn identical_and_reversed_rankings_hit_the_bounds() {
        let a = RankedList::new(vec![4, 2, 7, 1]).unwrap();
        let rev = RankedList::new(vec![1, 7, 2, 4]).unwrap();
        assert_eq!(kendall_tau(&a, &a).unwrap(), 1.0);
        assert_eq!(spearman_rho(&a, &a).unwrap(), 1.0);
        assert_eq!(kendall_tau(&a, &rev).unwrap(), -1.0);
        assert_eq!(spearman_rho(&a, &rev).unwrap(), -1.0);
    }

    #[test]
    fn score_ranking_is_stable_on_ties() {
        let (rank, tied) = rank_by_scores_desc(&[0.3, 0.9, 0.3, 0.5]);
        assert_eq!(rank.items(), &[1, 3, 0, 2]);
        assert!(tied);
        let (rank, tied) = rank_by_scores_desc(&[0.1, 0.2]);
        assert_eq!(rank.items(), &[1, 0]);
        assert!(!tied);
    }

    #[test]
    fn cost_baseline_prefers_cheap_paths() {
        let net = grid_network(3, 3, 1).unwrap();
        let traj = Trajectory {
            driver: "d".into(),
            path: shortest_path(&net, VertexId(0), VertexId(8), CostKind::Distance).unwrap(),
        };
        let scorer = CostBaseline(CostKind::Distance);
        let s_best = scorer.score(&net, &traj, &traj.path).unwrap();
        let longer = crate::pathfinding::top_k_paths(&net, VertexId(0), VertexId(8), CostKind::Distance, 3)
            .unwrap()
            .pop()
            .unwrap();
        let s_worse = scorer.score(&net, &traj, &longer).unwrap();
        assert!(s_best > s_worse);
        assert!(!scorer.is_similarity_estimate());
    }

    /// Scorer that reproduces the label exactly; rank metrics must be perfect
    /// and MAE zero.
    struct OracleScorer;

    impl PathScorer for OracleScorer {
        fn score(&self, net: &RoadNetwork, trajectory: &Trajectory, candidate: &Path) -> Result<f64> {
            weighted_jaccard(net, &trajectory.path, candidate)
        }

        fn is_similarity_estimate(&self) -> bool {
            true
        }

        fn name(&self) -> String {
            "oracle".into()
        }
    }

    fn eval_cases(net: &RoadNetwork) -> Vec<EvalCase> {
        let trips = crate::training::make_synthetic_trajectories(
            net,
            &crate::training::SyntheticConfig {
                count: 8,
                preference: CostKind::Distance,
                noise_prob: 0.0,
                seed: 21,
            },
        )
        .unwrap();
        trips
            .into_iter()
            .map(|trajectory| {
                let candidates = crate::pathfinding::top_k_paths(
                    net,
                    trajectory.path.source(),
                    trajectory.path.dest(),
                    CostKind::Distance,
                    4,
                )
                .unwrap();
                EvalCase { trajectory, candidates }
            })
            .collect()
    }

    #[test]
    fn oracle_scorer_gets_perfect_correlation() {
        let net = grid_network(5, 5, 17).unwrap();
        let cases = eval_cases(&net);
        let report = evaluate(&OracleScorer, &net, &cases).unwrap();
        assert_eq!(report.overall.cases, cases.len());
        assert_eq!(report.overall.tau, 1.0);
        assert_eq!(report.overall.rho, 1.0);
        assert_eq!(report.mae, Some(0.0));
        assert_eq!(report.skipped_small, 0);
        let bucket_cases: usize = report.buckets.iter().map(|(_, r)| r.cases).sum();
        assert!(bucket_cases <= report.overall.cases);
    }

    #[test]
    fn small_cases_are_skipped_not_fatal() {
        let net = grid_network(5, 5, 17).unwrap();
        let mut cases = eval_cases(&net);
        let lone = cases[0].candidates[0].clone();
        cases.push(EvalCase { trajectory: cases[0].trajectory.clone(), candidates: vec![lone] });
        let report = evaluate(&OracleScorer, &net, &cases).unwrap();
        assert_eq!(report.skipped_small, 1);
        assert_eq!(report.overall.cases, cases.len() - 1);
    }

    #[test]
    fn report_formats_include_all_buckets() {
        let net = grid_network(5, 5, 17).unwrap();
        let report = evaluate(&OracleScorer, &net, &eval_cases(&net)).unwrap();
        let human = report.human_table();
        assert!(human.contains("overall"));
        assert!(human.contains("0-5km"));
        let machine = report.machine_lines();
        assert!(machine.contains("tau,overall,1.000000"));
        assert!(machine.contains("mae,overall,0.000000"));
        for line in machine.lines() {
            assert_eq!(line.split(',').count(), 3, "bad line {line:?}");
        }
    }

    #[test]
    fn cost_baseline_report_omits_error_metrics() {
        let net = grid_network(5, 5, 17).unwrap();
        let report =
            evaluate(&CostBaseline(CostKind::Distance), &net, &eval_cases(&net)).unwrap();
        assert_eq!(report.mae, None);
        assert_eq!(report.mare, None);
        assert!(!report.machine_lines().contains("mae"));
    }
}
