//! Evaluation metrics (level MSE, permutation-invariant Chamfer distance,
//! path-metric distortion) and the experiment harnesses: matched generator
//! rollouts, the IFS benchmark suites, and the ablation studies.

use crate::error::{Error, Result};
use crate::generators::{
    ifs_as_generator, ifs_family, sample_neural_cfg, Generator, NeuralCfgConfig,
};
use crate::hierarchy::{rollout, Hierarchy};
use crate::kdtree::KdTree;
use crate::learn::{
    affine_baseline, avg_residual_baseline, canonicalize_children, learnable_const_baseline,
    permute_children, train_cfp, Activation, TrainConfig, DEFAULT_HIDDEN,
};
use crate::linalg::dist_p;
use crate::rng::SeedStream;
use crate::scalar::Scalar;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Per-level metric triple for one method on one trial.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelMetrics {
    pub level: usize,
    pub mse: f64,
    pub pi_cd: f64,
    pub dpt_distortion: f64,
}

/// Held-out evaluation of one method on one trial.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialResult {
    pub method: String,
    pub seed: u64,
    pub generator: String,
    pub levels: Vec<LevelMetrics>,
    /// Instrumentation flag: the rollout was regenerated from the root and
    /// the trained rule alone, with no ground-truth nodes injected.
    pub rollout_from_root_only: bool,
}

/// Coordinate-averaged mean squared error (1/(d·n)) Σ ‖x̂_i − x_i‖² between
/// slot-aligned level arrays.
pub fn mse_level<S: Scalar>(pred: &[Vec<S>], truth: &[Vec<S>], d: usize) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::InvalidArgument(format!(
            "level length mismatch: {} vs {}",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::InvalidArgument("empty level".into()));
    }
    let sum: f64 = pred
        .iter()
        .zip(truth)
        .map(|(p, t)| {
            p.iter()
                .zip(t)
                .map(|(a, b)| {
                    let e = (*a - *b).f64();
                    e * e
                })
                .sum::<f64>()
        })
        .sum();
    Ok(sum / (d as f64 * pred.len() as f64))
}

fn mean_nn_sq<S: Scalar>(from: &[Vec<S>], to: &[Vec<S>]) -> f64 {
    let total: f64 = if to.len() <= 64 {
        from.iter()
            .map(|q| {
                to.iter()
                    .map(|r| {
                        let d = dist_p(q, r, 2.0).f64();
                        d * d
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .sum()
    } else {
        // consecutive queries are spatially close (siblings in the
        // hierarchy), so the previous neighbour seeds a tight radius
        let tree = KdTree::build(to);
        let mut hint = None;
        let mut sum = 0.0f64;
        for q in from {
            let (i, d) = tree.nearest_seeded(q, 2.0, hint);
            hint = Some(i);
            sum += d.f64() * d.f64();
        }
        sum
    };
    total / from.len() as f64
}

/// Symmetric Chamfer distance with squared Euclidean cost: the two directed
/// mean nearest-neighbour terms summed.
pub fn pi_cd<S: Scalar>(a: &[Vec<S>], b: &[Vec<S>]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("pi_cd needs non-empty sets".into()));
    }
    Ok(mean_nn_sq(a, b) + mean_nn_sq(b, a))
}

/// Weighted root distances d_root(u) with Euclidean parent-child edges,
/// indexed [level][flat index], for the truncation at `depth`.
fn root_distances<S: Scalar>(h: &Hierarchy<S>, depth: usize) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0f64]];
    for l in 1..=depth {
        let level: Vec<f64> = h.levels[l]
            .iter()
            .enumerate()
            .map(|(i, x)| out[l - 1][i / h.k] + dist_p(x, &h.levels[l - 1][i / h.k], 2.0).f64())
            .collect();
        out.push(level);
    }
    out
}

/// LCA-formula path distance between nodes (lu, iu) and (lv, iv).
fn pair_distance(d_root: &[Vec<f64>], k: usize, lu: usize, iu: usize, lv: usize, iv: usize) -> f64 {
    let (mut au, mut av) = (iu, iv);
    let (mut ju, mut jv) = (lu, lv);
    while ju > jv {
        au /= k;
        ju -= 1;
    }
    while jv > ju {
        av /= k;
        jv -= 1;
    }
    while au != av {
        au /= k;
        av /= k;
        ju -= 1;
    }
    d_root[lu][iu] + d_root[lv][iv] - 2.0 * d_root[ju][au]
}

/// Exact diameter of the tree path metric by double sweep: farthest node
/// from the root, then farthest from that node.
fn path_metric_diameter(d_root: &[Vec<f64>], k: usize, depth: usize) -> f64 {
    let mut far = (0usize, 0usize);
    let mut best = 0.0f64;
    for l in 0..=depth {
        for (i, &d) in d_root[l].iter().enumerate() {
            if d > best {
                best = d;
                far = (l, i);
            }
        }
    }
    let mut diam = 0.0f64;
    for l in 0..=depth {
        for i in 0..d_root[l].len() {
            diam = diam.max(pair_distance(d_root, k, far.0, far.1, l, i));
        }
    }
    diam
}

/// Above this many unordered pairs the distortion numerator is estimated on
/// a seeded random pair sample; the denominator stays exact.
pub const DPT_PAIR_BUDGET: usize = 200_000;

/// Normalized path-metric distortion of the truncation at `depth`: the mean
/// absolute pairwise discrepancy between the predicted and true tree path
/// metrics (Euclidean parent-child edge weights, LCA closed form), divided
/// by the exact diameter of the true truncation.
pub fn dpt_distortion<S: Scalar>(
    pred: &Hierarchy<S>,
    truth: &Hierarchy<S>,
    depth: usize,
    pair_budget: usize,
) -> Result<f64> {
    if pred.k != truth.k || pred.d != truth.d {
        return Err(Error::InvalidArgument(
            "topology mismatch between predicted and true hierarchies".into(),
        ));
    }
    if depth > pred.depth() || depth > truth.depth() {
        return Err(Error::InvalidArgument(format!(
            "depth {depth} exceeds hierarchy depths {} / {}",
            pred.depth(),
            truth.depth()
        )));
    }
    let k = truth.k;
    let dr_pred = root_distances(pred, depth);
    let dr_true = root_distances(truth, depth);
    let n: usize = (0..=depth).map(|l| dr_true[l].len()).sum();
    if n < 2 {
        return Err(Error::InvalidArgument("need at least two nodes".into()));
    }
    let diam = path_metric_diameter(&dr_true, k, depth);
    if diam == 0.0 {
        return Err(Error::InvalidArgument(
            "degenerate true hierarchy: zero diameter".into(),
        ));
    }
    // global index -> (level, flat index)
    let locate = {
        let mut bounds = vec![0usize];
        for l in 0..=depth {
            bounds.push(bounds[l] + dr_true[l].len());
        }
        move |g: usize| {
            let l = bounds.partition_point(|&b| b <= g) - 1;
            (l, g - bounds[l])
        }
    };
    let total_pairs = n * (n - 1) / 2;
    let mean_abs = if total_pairs <= pair_budget {
        let mut sum = 0.0f64;
        for gi in 0..n {
            let (lu, iu) = locate(gi);
            for gj in (gi + 1)..n {
                let (lv, iv) = locate(gj);
                sum += (pair_distance(&dr_pred, k, lu, iu, lv, iv)
                    - pair_distance(&dr_true, k, lu, iu, lv, iv))
                .abs();
            }
        }
        sum / total_pairs as f64
    } else {
        // seeded Monte Carlo estimate, deterministic in (depth, n, budget)
        let mut rng = SeedStream::new(0x6470_7400 ^ (depth as u64) << 32 ^ n as u64);
        let mut sum = 0.0f64;
        let mut used = 0usize;
        while used < pair_budget {
            let gi = (rng.next_u64() % n as u64) as usize;
            let gj = (rng.next_u64() % n as u64) as usize;
            if gi == gj {
                continue;
            }
            let (lu, iu) = locate(gi);
            let (lv, iv) = locate(gj);
            sum += (pair_distance(&dr_pred, k, lu, iu, lv, iv)
                - pair_distance(&dr_true, k, lu, iu, lv, iv))
            .abs();
            used += 1;
        }
        sum / used as f64
    };
    Ok(mean_abs / diam)
}

/// Dijkstra oracle for the same path metric (small truncations only).
pub fn dpt_pair_oracle<S: Scalar>(
    h: &Hierarchy<S>,
    depth: usize,
    lu: usize,
    iu: usize,
    lv: usize,
    iv: usize,
) -> f64 {
    use crate::hierarchy::Address;
    use crate::metric::MetricView;
    let mut weights = vec![Vec::new()];
    for l in 1..=depth {
        weights.push(
            h.levels[l]
                .iter()
                .enumerate()
                .map(|(i, x)| dist_p(x, &h.levels[l - 1][i / h.k], 2.0).f64())
                .collect(),
        );
    }
    let view = MetricView {
        scheme: crate::metric::WeightScheme::Pt,
        k: h.k,
        s: h.s,
        weights,
        slacks: Vec::new(),
        substituted_edges: Vec::new(),
    };
    view.dijkstra_distance(
        &Address::from_flat(lu, iu, h.k),
        &Address::from_flat(lv, iv, h.k),
    )
    .unwrap()
}

fn evaluate_method<S: Scalar>(
    method: &str,
    seed: u64,
    gen: &Generator<S>,
    pred: &Hierarchy<S>,
    truth: &Hierarchy<S>,
    eval_levels: std::ops::RangeInclusive<usize>,
    pair_budget: usize,
) -> Result<TrialResult> {
    // the predicted hierarchy must be a pure rollout: root matches and the
    // first refinement regenerates from the rule alone
    let mut from_root_only = pred.levels[0][0] == truth.levels[0][0];
    let regen = rollout(gen, &pred.levels[0][0], pred.s, 1, false)?;
    for (a, b) in regen.levels[1].iter().zip(&pred.levels[1]) {
        if dist_p(a, b, 2.0).f64() > 1e-12 {
            from_root_only = false;
        }
    }
    let mut levels = Vec::new();
    for l in eval_levels {
        levels.push(LevelMetrics {
            level: l,
            mse: mse_level(&pred.levels[l], &truth.levels[l], truth.d)?,
            pi_cd: pi_cd(&pred.levels[l], &truth.levels[l])?,
            dpt_distortion: dpt_distortion(pred, truth, l, pair_budget)?,
        });
    }
    Ok(TrialResult {
        method: method.into(),
        seed,
        generator: truth.generator_tag.clone(),
        levels,
        rollout_from_root_only: from_root_only,
    })
}

/// Train the four methods on the observed prefix of `truth` and roll each
/// out from the root; returns results in a fixed method order.
fn run_methods<S: Scalar>(
    truth: &Hierarchy<S>,
    l_train: usize,
    l_tot: usize,
    eval_levels: std::ops::RangeInclusive<usize>,
    hidden: &[usize],
    cfg: &TrainConfig,
    pair_budget: usize,
) -> Result<Vec<TrialResult>> {
    let (cfp, _) = train_cfp(truth, l_train, hidden, Activation::Relu, cfg)?;
    let avg = avg_residual_baseline(truth, l_train)?;
    let (cst, _) = learnable_const_baseline(truth, l_train, cfg)?;
    let (aff, _) = affine_baseline(truth, l_train, cfg)?;
    let mut out = Vec::new();
    for (name, g) in [("cfp", &cfp), ("avg", &avg), ("const", &cst), ("affine", &aff)] {
        let pred = rollout(g, &truth.levels[0][0], truth.s, l_tot, false)?;
        out.push(evaluate_method(
            name,
            cfg.seed,
            g,
            &pred,
            truth,
            eval_levels.clone(),
            pair_budget,
        )?);
    }
    Ok(out)
}

/// Configuration of the matched neural-generator rollout experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatchedCfgConfig {
    pub d: usize,
    pub k: usize,
    pub s: f64,
    pub l_train: usize,
    pub l_tot: usize,
    pub trials: u64,
    pub neural: NeuralCfgConfig,
    pub train: TrainConfig,
    pub hidden: Vec<usize>,
    pub pair_budget: usize,
}

impl Default for MatchedCfgConfig {
    fn default() -> Self {
        MatchedCfgConfig {
            d: 2,
            k: 3,
            s: 0.5,
            l_train: 2,
            l_tot: 11,
            trials: 9,
            neural: NeuralCfgConfig::default(),
            train: TrainConfig::default(),
            hidden: DEFAULT_HIDDEN.to_vec(),
            pair_budget: DPT_PAIR_BUDGET,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatchedCfgTrial {
    /// Requested trial index.
    pub trial: u64,
    /// Generator trial id actually used after resampling.
    pub generator_trial: u64,
    /// Trial ids rejected by the residual-norm admissibility guard.
    pub resampled: Vec<u64>,
    pub results: Vec<TrialResult>,
}

/// Per (method, level) aggregate: mean and std of log₁₀ MSE over trials
/// (the mean is the log of the geometric mean).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelSummary {
    pub method: String,
    pub level: usize,
    pub log10_mse_mean: f64,
    pub log10_mse_std: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatchedCfgReport {
    pub config: MatchedCfgConfig,
    pub trials: Vec<MatchedCfgTrial>,
    pub summary: Vec<LevelSummary>,
    /// Trials where the learned predictor beats the average-residual
    /// baseline at every held-out level.
    pub cfp_beats_avg_trials: usize,
    /// Same against the affine baseline.
    pub cfp_beats_affine_trials: usize,
}

fn run_one_matched_trial<S: Scalar>(cfg: &MatchedCfgConfig, t: u64) -> Result<MatchedCfgTrial> {
    let mut resampled = Vec::new();
    let mut gen_trial = t;
    let truth = loop {
        let g: Generator<S> = sample_neural_cfg(cfg.d, cfg.k, &cfg.neural, gen_trial)?;
        match rollout(&g, &vec![S::zero(); cfg.d], cfg.s, cfg.l_tot, false) {
            Ok(h) => break h,
            Err(Error::AdmissibilityViolation { .. }) => {
                resampled.push(gen_trial);
                gen_trial += cfg.trials;
                if resampled.len() > 20 {
                    return Err(Error::Validation(format!(
                        "trial {t}: admissibility guard rejected {} generators",
                        resampled.len()
                    )));
                }
            }
            Err(e) => return Err(e),
        }
    };
    let train = TrainConfig {
        seed: 3000 + t,
        ..cfg.train.clone()
    };
    let results = run_methods(
        &truth,
        cfg.l_train,
        cfg.l_tot,
        (cfg.l_train + 1)..=cfg.l_tot,
        &cfg.hidden,
        &train,
        cfg.pair_budget,
    )?;
    Ok(MatchedCfgTrial {
        trial: t,
        generator_trial: gen_trial,
        resampled,
        results,
    })
}

fn beats_everywhere(results: &[TrialResult], method: &str, baseline: &str) -> bool {
    let a = results.iter().find(|r| r.method == method).unwrap();
    let b = results.iter().find(|r| r.method == baseline).unwrap();
    a.levels
        .iter()
        .zip(&b.levels)
        .all(|(x, y)| x.mse < y.mse)
}

/// T-trial matched-generator experiment: sample a ground-truth neural rule,
/// roll out the target hierarchy, fit all methods on the observed prefix,
/// roll each out from the root alone, and aggregate held-out errors.
pub fn run_matched_cfg_experiment<S: Scalar>(cfg: &MatchedCfgConfig) -> Result<MatchedCfgReport> {
    let trials: Vec<MatchedCfgTrial> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_one_matched_trial::<S>(cfg, t))
        .collect::<Result<_>>()?;
    let mut summary = Vec::new();
    for method in ["cfp", "avg", "const", "affine"] {
        for l in (cfg.l_train + 1)..=cfg.l_tot {
            let logs: Vec<f64> = trials
                .iter()
                .map(|tr| {
                    tr.results
                        .iter()
                        .find(|r| r.method == method)
                        .unwrap()
                        .levels
                        .iter()
                        .find(|m| m.level == l)
                        .unwrap()
                        .mse
                        .max(1e-300)
                        .log10()
                })
                .collect();
            let mean = logs.iter().sum::<f64>() / logs.len() as f64;
            let var = logs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                / logs.len() as f64;
            summary.push(LevelSummary {
                method: method.into(),
                level: l,
                log10_mse_mean: mean,
                log10_mse_std: var.sqrt(),
            });
        }
    }
    let cfp_beats_avg_trials = trials
        .iter()
        .filter(|t| beats_everywhere(&t.results, "cfp", "avg"))
        .count();
    let cfp_beats_affine_trials = trials
        .iter()
        .filter(|t| beats_everywhere(&t.results, "cfp", "affine"))
        .count();
    Ok(MatchedCfgReport {
        config: cfg.clone(),
        trials,
        summary,
        cfp_beats_avg_trials,
        cfp_beats_affine_trials,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IfsSuite {
    Nonlinear,
    Affine,
}

impl IfsSuite {
    pub fn families(self) -> [&'static str; 4] {
        match self {
            IfsSuite::Nonlinear => ["nl-sierpinski", "nl-cantor", "nl-koch", "nl-random"],
            IfsSuite::Affine => ["sierpinski", "cantor", "koch", "random-affine"],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IfsBenchConfig {
    pub suite: IfsSuite,
    pub seeds: u64,
    pub l_train: usize,
    pub l_tot: usize,
    pub train: TrainConfig,
    pub hidden: Vec<usize>,
}

impl Default for IfsBenchConfig {
    fn default() -> Self {
        IfsBenchConfig {
            suite: IfsSuite::Nonlinear,
            seeds: 5,
            l_train: 2,
            l_tot: 5,
            train: TrainConfig::default(),
            hidden: DEFAULT_HIDDEN.to_vec(),
        }
    }
}

/// One (benchmark, method) cell: mean ± std over seeds of the level-averaged
/// metric values. Raw (not 10⁻³) units.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchCell {
    pub benchmark: String,
    pub method: String,
    pub mse_mean: f64,
    pub mse_std: f64,
    pub pi_cd_mean: f64,
    pub pi_cd_std: f64,
    pub dpt_mean: f64,
    pub dpt_std: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IfsBenchReport {
    pub config: IfsBenchConfig,
    /// Every (benchmark, seed, method) trial with per-level metrics.
    pub raw: Vec<(String, TrialResult)>,
    pub cells: Vec<BenchCell>,
    /// Uniform average of the per-benchmark seed means, per method, in the
    /// order (mse, pi_cd, dpt).
    pub macro_avg: Vec<(String, [f64; 3])>,
}

fn mean_std(vals: &[f64]) -> (f64, f64) {
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64;
    (mean, var.sqrt())
}

/// Level-averaged metric triple of one trial over its held-out levels.
fn level_avg(tr: &TrialResult) -> [f64; 3] {
    let n = tr.levels.len() as f64;
    [
        tr.levels.iter().map(|m| m.mse).sum::<f64>() / n,
        tr.levels.iter().map(|m| m.pi_cd).sum::<f64>() / n,
        tr.levels.iter().map(|m| m.dpt_distortion).sum::<f64>() / n,
    ]
}

/// Four-benchmark IFS suite: per (family, seed), train all methods on the
/// observed prefix of the depth-`l_tot` rollout and evaluate the held-out
/// levels; aggregate mean ± std over seeds and the uniform macro average.
pub fn run_ifs_benchmark<S: Scalar>(cfg: &IfsBenchConfig) -> Result<IfsBenchReport> {
    let families = cfg.suite.families();
    let jobs: Vec<(usize, u64)> = (0..families.len())
        .flat_map(|f| (0..cfg.seeds).map(move |s| (f, s)))
        .collect();
    let raw: Vec<Vec<(String, TrialResult)>> = jobs
        .par_iter()
        .map(|&(f, seed)| {
            let name = families[f];
            // random families resample per seed; fixed ones ignore the stream
            let mut rng = SeedStream::new(7000 + seed).fork(f as u64);
            let fam = ifs_family::<S>(name, &mut rng)?;
            let root = fam.root.clone();
            let g = ifs_as_generator(fam);
            let truth = rollout(&g, &root, 1.0, cfg.l_tot, false)?;
            let train = TrainConfig {
                seed: 8000 + 97 * f as u64 + seed,
                ..cfg.train.clone()
            };
            let results = run_methods(
                &truth,
                cfg.l_train,
                cfg.l_tot,
                (cfg.l_train + 1)..=cfg.l_tot,
                &cfg.hidden,
                &train,
                DPT_PAIR_BUDGET,
            )?;
            Ok(results.into_iter().map(|r| (name.to_string(), r)).collect())
        })
        .collect::<Result<_>>()?;
    let raw: Vec<(String, TrialResult)> = raw.into_iter().flatten().collect();

    let mut cells = Vec::new();
    let mut per_method_family_means: Vec<(String, Vec<[f64; 3]>)> = Vec::new();
    for method in ["cfp", "avg", "const", "affine"] {
        let mut family_means = Vec::new();
        for name in families {
            let triples: Vec<[f64; 3]> = raw
                .iter()
                .filter(|(n, r)| n == name && r.method == method)
                .map(|(_, r)| level_avg(r))
                .collect();
            let col = |i: usize| triples.iter().map(|t| t[i]).collect::<Vec<_>>();
            let (mse_mean, mse_std) = mean_std(&col(0));
            let (pi_mean, pi_std) = mean_std(&col(1));
            let (dpt_mean, dpt_std) = mean_std(&col(2));
            family_means.push([mse_mean, pi_mean, dpt_mean]);
            cells.push(BenchCell {
                benchmark: name.into(),
                method: method.into(),
                mse_mean,
                mse_std,
                pi_cd_mean: pi_mean,
                pi_cd_std: pi_std,
                dpt_mean,
                dpt_std,
            });
        }
        per_method_family_means.push((method.into(), family_means));
    }
    let macro_avg = per_method_family_means
        .into_iter()
        .map(|(m, fams)| {
            let n = fams.len() as f64;
            let mut acc = [0.0; 3];
            for t in &fams {
                for i in 0..3 {
                    acc[i] += t[i] / n;
                }
            }
            (m, acc)
        })
        .collect();
    Ok(IfsBenchReport {
        config: cfg.clone(),
        raw,
        cells,
        macro_avg,
    })
}

/// One ablation row: a setting label, method, level, and the reported error
/// (plain MSE, or normalized MSE for the scale ablation).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationRow {
    pub setting: String,
    pub method: String,
    pub level: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AblationKind {
    Depth,
    Scale,
    Ordering,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationConfig {
    pub kind: AblationKind,
    pub trials: u64,
    pub l_tot: usize,
    pub neural: NeuralCfgConfig,
    pub train: TrainConfig,
    pub hidden: Vec<usize>,
}

impl Default for AblationConfig {
    fn default() -> Self {
        AblationConfig {
            kind: AblationKind::Depth,
            trials: 3,
            l_tot: 8,
            neural: NeuralCfgConfig::default(),
            train: TrainConfig::default(),
            hidden: DEFAULT_HIDDEN.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationReport {
    pub config: AblationConfig,
    /// Geometric-mean errors over trials, one row per (setting, method, level).
    pub rows: Vec<AblationRow>,
}

fn admissible_truth<S: Scalar>(
    cfg: &NeuralCfgConfig,
    base_trial: u64,
    stride: u64,
    s: f64,
    depth: usize,
) -> Result<Hierarchy<S>> {
    let mut t = base_trial;
    for _ in 0..20 {
        let g: Generator<S> = sample_neural_cfg(2, 3, cfg, t)?;
        match rollout(&g, &[S::zero(), S::zero()], s, depth, false) {
            Ok(h) => return Ok(h),
            Err(Error::AdmissibilityViolation { .. }) => t += stride,
            Err(e) => return Err(e),
        }
    }
    Err(Error::Validation("no admissible generator in 20 draws".into()))
}

fn geo_mean(vals: &[f64]) -> f64 {
    let m = vals.iter().map(|v| v.max(1e-300).log10()).sum::<f64>() / vals.len() as f64;
    10f64.powf(m)
}

/// Depth, scale, and child-ordering ablations on matched neural-generator
/// hierarchies (d=2, K=3).
pub fn run_ablations<S: Scalar>(cfg: &AblationConfig) -> Result<AblationReport> {
    let methods = ["cfp", "avg", "const", "affine"];
    // per-trial rows collected as (setting, method, level, value)
    let per_trial: Vec<Vec<AblationRow>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| -> Result<Vec<AblationRow>> {
            let mut rows = Vec::new();
            let train = TrainConfig {
                seed: 3000 + t,
                ..cfg.train.clone()
            };
            match cfg.kind {
                AblationKind::Depth => {
                    let truth = admissible_truth::<S>(&cfg.neural, t, cfg.trials, 0.5, cfg.l_tot)?;
                    for l_train in [1usize, 2, 3] {
                        let results = run_methods(
                            &truth,
                            l_train,
                            cfg.l_tot,
                            (l_train + 1)..=cfg.l_tot,
                            &cfg.hidden,
                            &train,
                            0, // mse only matters here; keep dpt cheap
                        )?;
                        for r in &results {
                            for m in &r.levels {
                                rows.push(AblationRow {
                                    setting: format!("l_train={l_train}"),
                                    method: r.method.clone(),
                                    level: m.level,
                                    value: m.mse,
                                });
                            }
                        }
                    }
                }
                AblationKind::Scale => {
                    for s in [0.3, 0.5, 0.7, 0.85] {
                        let truth = admissible_truth::<S>(&cfg.neural, t, cfg.trials, s, cfg.l_tot)?;
                        let results = run_methods(
                            &truth,
                            2,
                            cfg.l_tot,
                            3..=cfg.l_tot,
                            &cfg.hidden,
                            &train,
                            0,
                        )?;
                        let root = truth.levels[0][0].clone();
                        for r in &results {
                            for m in &r.levels {
                                // normalize by the level's mean squared
                                // distance to the root
                                let n_l = truth.levels[m.level].len() as f64;
                                let denom = truth.levels[m.level]
                                    .iter()
                                    .map(|x| {
                                        let d = dist_p(x, &root, 2.0).f64();
                                        d * d
                                    })
                                    .sum::<f64>()
                                    / n_l;
                                rows.push(AblationRow {
                                    setting: format!("s={s}"),
                                    method: r.method.clone(),
                                    level: m.level,
                                    value: m.mse / denom,
                                });
                            }
                        }
                    }
                }
                AblationKind::Ordering => {
                    let truth = admissible_truth::<S>(&cfg.neural, t, cfg.trials, 0.5, cfg.l_tot)?;
                    let mut perm_rng = SeedStream::new(6000 + t);
                    let permuted = permute_children(&truth, &mut perm_rng);
                    let (canon, _) = canonicalize_children(&permuted)?;
                    for (setting, variant) in [
                        ("original", &truth),
                        ("permuted", &permuted),
                        ("canonicalized", &canon),
                    ] {
                        let results =
                            run_methods(variant, 2, cfg.l_tot, 3..=cfg.l_tot, &cfg.hidden, &train, 0)?;
                        for r in &results {
                            for m in &r.levels {
                                rows.push(AblationRow {
                                    setting: setting.into(),
                                    method: r.method.clone(),
                                    level: m.level,
                                    value: m.mse,
                                });
                            }
                        }
                    }
                }
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    // geometric mean over trials per (setting, method, level)
    let mut rows = Vec::new();
    if let Some(first) = per_trial.first() {
        for (i, proto) in first.iter().enumerate() {
            let vals: Vec<f64> = per_trial.iter().map(|tr| tr[i].value).collect();
            let _ = methods; // fixed order guaranteed by run_methods
            rows.push(AblationRow {
                setting: proto.setting.clone(),
                method: proto.method.clone(),
                level: proto.level,
                value: geo_mean(&vals),
            });
        }
    }
    Ok(AblationReport {
        config: cfg.clone(),
        rows,
    })
}

/// Raw trial rows: trial, method, level, mse, pi_cd, dpt.
pub fn trials_csv(trials: &[MatchedCfgTrial]) -> String {
    let mut out = String::from("trial,method,level,mse,pi_cd,dpt\n");
    for t in trials {
        for r in &t.results {
            for m in &r.levels {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    t.trial, r.method, m.level, m.mse, m.pi_cd, m.dpt_distortion
                ));
            }
        }
    }
    out
}

/// Aggregated benchmark rows: benchmark, method, metric, mean, std.
/// Raw units; any 10⁻³ scaling belongs to display code.
pub fn bench_csv(cells: &[BenchCell]) -> String {
    let mut out = String::from("benchmark,method,metric,mean,std\n");
    for c in cells {
        for (metric, mean, std) in [
            ("mse", c.mse_mean, c.mse_std),
            ("pi_cd", c.pi_cd_mean, c.pi_cd_std),
            ("dpt", c.dpt_mean, c.dpt_std),
        ] {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                c.benchmark, c.method, metric, mean, std
            ));
        }
    }
    out
}

/// Matched-experiment summary rows: method, level, log10 gmean, log10 std.
pub fn summary_csv(summary: &[LevelSummary]) -> String {
    let mut out = String::from("method,level,log10_mse_mean,log10_mse_std\n");
    for s in summary {
        out.push_str(&format!(
            "{},{},{},{}\n",
            s.method, s.level, s.log10_mse_mean, s.log10_mse_std
        ));
    }
    out
}

/// Ablation rows: setting, method, level, value.
pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut out = String::from("setting,method,level,value\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.setting, r.method, r.level, r.value
        ));
    }
    out
}
