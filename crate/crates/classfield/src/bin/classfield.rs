//! Command-line front end: generator sampling, rollouts, training, metric
//! evaluation, benchmark/ablation harnesses, bound verification, and SVG
//! plotting. Every command writes its outputs atomically into an output
//! directory together with the exact RunConfig that produced them.

use clap::{Parser, Subcommand, ValueEnum};
use classfield::error::{Error, Result};
use classfield::eval::{
    dpt_distortion, mse_level, pi_cd, run_ablations, run_ifs_benchmark,
    run_matched_cfg_experiment, summary_csv, trials_csv, AblationConfig, AblationKind,
    IfsBenchConfig, IfsSuite, MatchedCfgConfig, DPT_PAIR_BUDGET,
};
use classfield::generators::{
    check_cfg_axioms, ifs_as_generator, ifs_family, sample_neural_cfg, Generator, NeuralCfgConfig,
};
use classfield::hierarchy::{level_csv, load_hierarchy, rollout, save_hierarchy, voronoi_cells};
use classfield::learn::{
    affine_baseline, avg_residual_baseline, learnable_const_baseline, train_cfp, Activation,
    TrainConfig, DEFAULT_HIDDEN,
};
use classfield::metric::{
    plan_truncation, tree_distance, truncation_gap, MetricView, PlannerInputs,
};
use classfield::plot::{parse_summary_csv, render_level_curves};
use classfield::rng::SeedStream;
use classfield::util::write_atomic;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "classfield",
    about = "Hierarchy generators, learned refinement predictors, and metric bound checks"
)]
struct Cli {
    /// Worker threads for the parallel harnesses (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// JSON run configuration; explicit flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GenKind {
    Neural,
    Ifs,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Cfp,
    Avg,
    Const,
    Affine,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    Nonlinear,
    Affine,
    Matched,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Ablation {
    Depth,
    Scale,
    Ordering,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a generator and write it as JSON.
    Gen {
        #[arg(long, value_enum, default_value = "neural")]
        kind: GenKind,
        /// IFS family name (kind=ifs): sierpinski, cantor, koch,
        /// random-affine, or their nl- variants.
        #[arg(long)]
        family: Option<String>,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        /// Trial index: neural generators draw template/parameter seeds
        /// 1000+t / 2000+t; random IFS families fork the stream from it.
        #[arg(long)]
        trial: Option<u64>,
    },
    /// Roll out a saved generator from the root.
    Rollout {
        #[arg(long)]
        generator: Option<PathBuf>,
        #[arg(long)]
        depth: Option<usize>,
        /// Scale factor; defaults to the generator's natural scale (1 for
        /// IFS) or 0.5.
        #[arg(long)]
        s: Option<f64>,
        /// Root coordinates, comma separated; defaults per generator kind.
        #[arg(long)]
        root: Option<String>,
        /// Also emit a CSV of the centres at this level.
        #[arg(long)]
        level_csv: Option<usize>,
    },
    /// Fit a refinement rule on the observed prefix of a saved hierarchy.
    Train {
        #[arg(long)]
        hierarchy: Option<PathBuf>,
        #[arg(long)]
        l_train: Option<usize>,
        #[arg(long, value_enum)]
        method: Option<Method>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compare a predicted hierarchy against ground truth level by level.
    Eval {
        #[arg(long)]
        pred: Option<PathBuf>,
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        level_lo: Option<usize>,
        #[arg(long)]
        level_hi: Option<usize>,
    },
    /// Run a benchmark suite: the IFS tables or the matched-generator
    /// rollout experiment.
    Bench {
        #[arg(value_enum)]
        suite: Suite,
        #[arg(long)]
        seeds: Option<u64>,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run an ablation study (depth, scale, or child ordering).
    Ablate {
        #[arg(value_enum)]
        which: Ablation,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Verify metric bounds: truncation gap against a deeper reference,
    /// generator axioms, the tree-metric oracle, and the planner.
    Verify {
        #[arg(long)]
        s: Option<f64>,
        #[arg(long)]
        level: Option<usize>,
        #[arg(long)]
        trial: Option<u64>,
        #[arg(long)]
        n_samples: Option<usize>,
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Render a summary CSV (method,level,log10_mse_mean,log10_mse_std) as
    /// a static SVG with a log-scale MSE axis.
    Plot {
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        title: Option<String>,
    },
}

/// The full parameter record of one run, serialized into the output
/// directory so the run can be reproduced byte for byte.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
enum RunConfig {
    Gen {
        kind: String,
        family: Option<String>,
        d: usize,
        k: usize,
        trial: u64,
        neural: NeuralCfgConfig,
    },
    Rollout {
        generator: PathBuf,
        depth: usize,
        s: Option<f64>,
        root: Option<Vec<f64>>,
        level_csv: Option<usize>,
    },
    Train {
        hierarchy: PathBuf,
        l_train: usize,
        method: String,
        hidden: Vec<usize>,
        train: TrainConfig,
    },
    Eval {
        pred: PathBuf,
        truth: PathBuf,
        level_lo: usize,
        level_hi: usize,
        pair_budget: usize,
    },
    BenchIfs(IfsBenchConfig),
    BenchMatched(MatchedCfgConfig),
    Ablate(AblationConfig),
    Verify {
        s: f64,
        level: usize,
        trial: u64,
        n_samples: usize,
        eps: f64,
        neural: NeuralCfgConfig,
    },
    Plot {
        csv: PathBuf,
        title: String,
    },
}

fn load_config(path: &Option<PathBuf>) -> Result<Option<RunConfig>> {
    match path {
        None => Ok(None),
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            Ok(Some(serde_json::from_str(&text)?))
        }
    }
}

/// Global seed fallback: explicit flag, else CLASSFIELD_SEED, else 0.
fn seed_fallback(explicit: Option<u64>) -> u64 {
    explicit
        .or_else(|| {
            std::env::var("CLASSFIELD_SEED")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or(0)
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    write_atomic(&dir.join(name), serde_json::to_string_pretty(value)?.as_bytes())
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<()> {
    write_atomic(&dir.join(name), text.as_bytes())
}

fn usage(msg: &str) -> ! {
    eprintln!("usage error: {msg}");
    std::process::exit(2);
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidArgument(format!("--jobs: {e}")))?;
    }
    std::fs::create_dir_all(&cli.out_dir)?;
    let dir = cli.out_dir.clone();
    let base = load_config(&cli.config)?;

    match cli.command {
        Command::Gen {
            kind,
            family,
            d,
            k,
            trial,
        } => {
            let (mut cfg_kind, mut cfg_family, mut cfg_d, mut cfg_k, mut cfg_trial, mut neural) = (
                "neural".to_string(),
                None,
                2usize,
                3usize,
                0u64,
                NeuralCfgConfig::default(),
            );
            if let Some(RunConfig::Gen {
                kind,
                family,
                d,
                k,
                trial,
                neural: n,
            }) = base
            {
                cfg_kind = kind;
                cfg_family = family;
                cfg_d = d;
                cfg_k = k;
                cfg_trial = trial;
                neural = n;
            }
            if kind == GenKind::Ifs {
                cfg_kind = "ifs".into();
            }
            if let Some(f) = family {
                cfg_family = Some(f);
            }
            let d = d.unwrap_or(cfg_d);
            let k = k.unwrap_or(cfg_k);
            let trial = trial.unwrap_or(seed_fallback(Some(cfg_trial)));
            let g: Generator<f64> = if cfg_kind == "ifs" {
                let name = cfg_family
                    .clone()
                    .unwrap_or_else(|| usage("--family is required for --kind ifs"));
                let mut rng = SeedStream::new(7000 + trial);
                ifs_as_generator(ifs_family(&name, &mut rng)?)
            } else {
                sample_neural_cfg(d, k, &neural, trial)?
            };
            write_json(&dir, "generator.json", &g)?;
            write_json(
                &dir,
                "run_config.json",
                &RunConfig::Gen {
                    kind: cfg_kind,
                    family: cfg_family,
                    d,
                    k,
                    trial,
                    neural,
                },
            )?;
            println!("wrote {}", dir.join("generator.json").display());
        }

        Command::Rollout {
            generator,
            depth,
            s,
            root,
            level_csv: lvl,
        } => {
            let mut cfg = match base {
                Some(RunConfig::Rollout {
                    generator,
                    depth,
                    s,
                    root,
                    level_csv,
                }) => RunConfig::Rollout {
                    generator,
                    depth,
                    s,
                    root,
                    level_csv,
                },
                _ => RunConfig::Rollout {
                    generator: PathBuf::from("generator.json"),
                    depth: 4,
                    s: None,
                    root: None,
                    level_csv: None,
                },
            };
            if let RunConfig::Rollout {
                generator: g_path,
                depth: d_cfg,
                s: s_cfg,
                root: r_cfg,
                level_csv: l_cfg,
            } = &mut cfg
            {
                if let Some(g) = generator {
                    *g_path = g;
                }
                if let Some(d) = depth {
                    *d_cfg = d;
                }
                if s.is_some() {
                    *s_cfg = s;
                }
                if let Some(r) = root {
                    let parsed: std::result::Result<Vec<f64>, _> =
                        r.split(',').map(|v| v.trim().parse()).collect();
                    *r_cfg = Some(parsed.map_err(|e| {
                        Error::InvalidArgument(format!("bad --root: {e}"))
                    })?);
                }
                if lvl.is_some() {
                    *l_cfg = lvl;
                }
                let text = std::fs::read_to_string(&*g_path)?;
                let g: Generator<f64> = serde_json::from_str(&text)?;
                let s_used = s_cfg.or(g.natural_scale()).unwrap_or(0.5);
                let root_used = r_cfg.clone().unwrap_or_else(|| g.default_root());
                let h = rollout(&g, &root_used, s_used, *d_cfg, false)?;
                save_hierarchy(&h, &dir.join("hierarchy.json"))?;
                if let Some(l) = *l_cfg {
                    write_text(&dir, &format!("level_{l}.csv"), &level_csv(&h, l))?;
                }
                println!(
                    "rolled out {} nodes to depth {}",
                    h.node_count(),
                    h.depth()
                );
            }
            write_json(&dir, "run_config.json", &cfg)?;
        }

        Command::Train {
            hierarchy,
            l_train,
            method,
            epochs,
            lr,
            seed,
        } => {
            let (mut path, mut lt, mut m, mut hidden, mut tc) = (
                PathBuf::from("hierarchy.json"),
                2usize,
                "cfp".to_string(),
                DEFAULT_HIDDEN.to_vec(),
                TrainConfig::default(),
            );
            if let Some(RunConfig::Train {
                hierarchy,
                l_train,
                method,
                hidden: h,
                train,
            }) = base
            {
                path = hierarchy;
                lt = l_train;
                m = method;
                hidden = h;
                tc = train;
            }
            if let Some(p) = hierarchy {
                path = p;
            }
            if let Some(l) = l_train {
                lt = l;
            }
            if let Some(v) = method {
                m = match v {
                    Method::Cfp => "cfp",
                    Method::Avg => "avg",
                    Method::Const => "const",
                    Method::Affine => "affine",
                }
                .into();
            }
            if let Some(e) = epochs {
                tc.epochs = e;
            }
            if let Some(l) = lr {
                tc.lr = l;
            }
            tc.seed = seed_fallback(seed.or(Some(tc.seed)));
            let h = load_hierarchy::<f64>(&path)?;
            let (g, history): (Generator<f64>, Vec<f64>) = match m.as_str() {
                "cfp" => train_cfp(&h, lt, &hidden, Activation::Relu, &tc)?,
                "avg" => (avg_residual_baseline(&h, lt)?, Vec::new()),
                "const" => learnable_const_baseline(&h, lt, &tc)?,
                "affine" => affine_baseline(&h, lt, &tc)?,
                other => usage(&format!("unknown method '{other}'")),
            };
            write_json(&dir, "model.json", &g)?;
            let mut curve = String::from("epoch,loss\n");
            for (e, l) in history.iter().enumerate() {
                curve.push_str(&format!("{e},{l}\n"));
            }
            write_text(&dir, "curve.csv", &curve)?;
            write_json(
                &dir,
                "run_config.json",
                &RunConfig::Train {
                    hierarchy: path,
                    l_train: lt,
                    method: m,
                    hidden,
                    train: tc,
                },
            )?;
            if let Some(l) = history.last() {
                println!("final training loss {l:.3e}");
            }
        }

        Command::Eval {
            pred,
            truth,
            level_lo,
            level_hi,
        } => {
            let (mut p, mut t, mut lo, mut hi, mut budget) = (
                PathBuf::from("pred.json"),
                PathBuf::from("truth.json"),
                1usize,
                0usize,
                DPT_PAIR_BUDGET,
            );
            if let Some(RunConfig::Eval {
                pred,
                truth,
                level_lo,
                level_hi,
                pair_budget,
            }) = base
            {
                p = pred;
                t = truth;
                lo = level_lo;
                hi = level_hi;
                budget = pair_budget;
            }
            if let Some(v) = pred {
                p = v;
            }
            if let Some(v) = truth {
                t = v;
            }
            if let Some(v) = level_lo {
                lo = v;
            }
            if let Some(v) = level_hi {
                hi = v;
            }
            let hp = load_hierarchy::<f64>(&p)?;
            let ht = load_hierarchy::<f64>(&t)?;
            if hi == 0 {
                hi = hp.depth().min(ht.depth());
            }
            let mut csv = String::from("level,mse,pi_cd,dpt\n");
            for l in lo..=hi {
                let mse = mse_level(&hp.levels[l], &ht.levels[l], ht.d)?;
                let cd = pi_cd(&hp.levels[l], &ht.levels[l])?;
                let dpt = dpt_distortion(&hp, &ht, l, budget)?;
                csv.push_str(&format!("{l},{mse},{cd},{dpt}\n"));
            }
            write_text(&dir, "metrics.csv", &csv)?;
            write_json(
                &dir,
                "run_config.json",
                &RunConfig::Eval {
                    pred: p,
                    truth: t,
                    level_lo: lo,
                    level_hi: hi,
                    pair_budget: budget,
                },
            )?;
            println!("wrote {}", dir.join("metrics.csv").display());
        }

        Command::Bench {
            suite,
            seeds,
            trials,
            epochs,
            seed,
        } => match suite {
            Suite::Matched => {
                let mut cfg = match base {
                    Some(RunConfig::BenchMatched(c)) => c,
                    _ => MatchedCfgConfig::default(),
                };
                if let Some(t) = trials {
                    cfg.trials = t;
                }
                if let Some(e) = epochs {
                    cfg.train.epochs = e;
                }
                cfg.train.seed = seed_fallback(seed.or(Some(cfg.train.seed)));
                let report = run_matched_cfg_experiment::<f64>(&cfg)?;
                write_text(&dir, "trials.csv", &trials_csv(&report.trials))?;
                write_text(&dir, "summary.csv", &summary_csv(&report.summary))?;
                write_json(&dir, "report.json", &report)?;
                write_json(&dir, "run_config.json", &RunConfig::BenchMatched(cfg))?;
                println!(
                    "cfp beats avg everywhere in {}/{} trials, affine in {}/{}",
                    report.cfp_beats_avg_trials,
                    report.trials.len(),
                    report.cfp_beats_affine_trials,
                    report.trials.len()
                );
            }
            Suite::Nonlinear | Suite::Affine => {
                let mut cfg = match base {
                    Some(RunConfig::BenchIfs(c)) => c,
                    _ => IfsBenchConfig::default(),
                };
                cfg.suite = if suite == Suite::Nonlinear {
                    IfsSuite::Nonlinear
                } else {
                    IfsSuite::Affine
                };
                if let Some(s) = seeds {
                    cfg.seeds = s;
                }
                if let Some(e) = epochs {
                    cfg.train.epochs = e;
                }
                cfg.train.seed = seed_fallback(seed.or(Some(cfg.train.seed)));
                let report = run_ifs_benchmark::<f64>(&cfg)?;
                write_text(&dir, "bench.csv", &classfield::eval::bench_csv(&report.cells))?;
                let mut raw = String::from("benchmark,method,seed,level,mse,pi_cd,dpt\n");
                for (name, r) in &report.raw {
                    for m in &r.levels {
                        raw.push_str(&format!(
                            "{},{},{},{},{},{},{}\n",
                            name, r.method, r.seed, m.level, m.mse, m.pi_cd, m.dpt_distortion
                        ));
                    }
                }
                write_text(&dir, "raw.csv", &raw)?;
                write_json(&dir, "report.json", &report)?;
                write_json(&dir, "run_config.json", &RunConfig::BenchIfs(cfg))?;
                for (m, t) in &report.macro_avg {
                    println!(
                        "{m:>6}: macro mse {:.3}e-3  pi_cd {:.3}e-3  dpt {:.3}e-3",
                        t[0] * 1e3,
                        t[1] * 1e3,
                        t[2] * 1e3
                    );
                }
            }
        },

        Command::Ablate {
            which,
            trials,
            epochs,
        } => {
            let mut cfg = match base {
                Some(RunConfig::Ablate(c)) => c,
                _ => AblationConfig::default(),
            };
            cfg.kind = match which {
                Ablation::Depth => AblationKind::Depth,
                Ablation::Scale => AblationKind::Scale,
                Ablation::Ordering => AblationKind::Ordering,
            };
            if let Some(t) = trials {
                cfg.trials = t;
            }
            if let Some(e) = epochs {
                cfg.train.epochs = e;
            }
            let report = run_ablations::<f64>(&cfg)?;
            write_text(&dir, "ablation.csv", &classfield::eval::ablation_csv(&report.rows))?;
            write_json(&dir, "report.json", &report)?;
            write_json(&dir, "run_config.json", &RunConfig::Ablate(cfg))?;
            println!("wrote {}", dir.join("ablation.csv").display());
        }

        Command::Verify {
            s,
            level,
            trial,
            n_samples,
            eps,
        } => {
            let (mut vs, mut vl, mut vt, mut vn, mut ve, mut neural) = (
                0.5f64,
                4usize,
                0u64,
                50_000usize,
                0.1f64,
                NeuralCfgConfig::default(),
            );
            if let Some(RunConfig::Verify {
                s,
                level,
                trial,
                n_samples,
                eps,
                neural: n,
            }) = base
            {
                vs = s;
                vl = level;
                vt = trial;
                vn = n_samples;
                ve = eps;
                neural = n;
            }
            if let Some(v) = s {
                vs = v;
            }
            if let Some(v) = level {
                vl = v;
            }
            if let Some(v) = trial {
                vt = v;
            }
            if let Some(v) = n_samples {
                vn = v;
            }
            if let Some(v) = eps {
                ve = v;
            }
            let g: Generator<f64> = sample_neural_cfg(2, 3, &neural, vt)?;
            let lambda_max = g.certified_lambda_max();
            let h = rollout(&g, &[0.0, 0.0], vs, vl + 4, false)?;
            let mut rng = SeedStream::new(9000 + vt);
            let cells = voronoi_cells(&h, 2.0, vn, lambda_max, &mut rng)?;
            let view = MetricView::cell(&h, &cells, lambda_max)?;
            let trunc = truncation_gap(&h, &view, vl, vs, lambda_max)?;
            let neural_g = match &g {
                Generator::PackedNeural(n) => n,
                _ => unreachable!("sampled generator is always neural"),
            };
            let probes: Vec<Vec<f64>> = (0..1000)
                .map(|_| classfield::generators::ball_sample(2, &mut rng))
                .collect::<Result<_>>()?;
            let axioms = check_cfg_axioms(
                &g,
                &probes,
                neural_g.sigma_min * neural_g.packing.epsilon,
                neural_g.sigma_min * neural_g.packing.lambda_minus,
                neural_g.sigma_max * neural_g.packing.lambda_plus,
            );
            // tree-metric closed form vs path sum on sampled pairs
            let tree = MetricView::tree(&h)?;
            let mut oracle_ok = true;
            for _ in 0..200 {
                let la = (rng.next_u64() % (h.depth() as u64 + 1)) as usize;
                let lb = (rng.next_u64() % (h.depth() as u64 + 1)) as usize;
                let a = classfield::hierarchy::Address::from_flat(
                    la,
                    (rng.next_u64() % h.levels[la].len() as u64) as usize,
                    h.k,
                );
                let b = classfield::hierarchy::Address::from_flat(
                    lb,
                    (rng.next_u64() % h.levels[lb].len() as u64) as usize,
                    h.k,
                );
                let closed = tree_distance(&a, &b, vs)?;
                if (tree.path_distance(&a, &b)? - closed).abs() > 1e-12 {
                    oracle_ok = false;
                }
            }
            let (sigma_min, sigma_max, pack_eps, lambda_plus) = match &g {
                Generator::PackedNeural(n) => (
                    n.sigma_min,
                    n.sigma_max,
                    n.packing.epsilon,
                    n.packing.lambda_plus,
                ),
                _ => (0.1, 1.0, ve, 1.0),
            };
            let planner = plan_truncation(&PlannerInputs {
                eps: ve,
                s: vs,
                lambda_max,
                k: h.k,
                l_minus: 0,
                l_plus: vl,
                delta: classfield::metric::tree_diameter(vs, vl) * 0.05,
                l_r: classfield::generators::neural_lipschitz_bound(neural_g, 200, &mut rng)?,
                sigma_min,
                sigma_max,
                lambda_plus,
                pack_eps,
            })?;
            #[derive(Serialize)]
            struct VerifyReport<A, B, C> {
                lambda_max: f64,
                truncation: A,
                axioms: B,
                planner: C,
                tree_oracle_ok: bool,
                ok: bool,
            }
            let ok = trunc.ok && axioms.ok() && oracle_ok;
            let report = VerifyReport {
                lambda_max,
                truncation: &trunc,
                axioms: &axioms,
                planner: &planner,
                tree_oracle_ok: oracle_ok,
                ok,
            };
            write_json(&dir, "verify.json", &report)?;
            write_json(
                &dir,
                "run_config.json",
                &RunConfig::Verify {
                    s: vs,
                    level: vl,
                    trial: vt,
                    n_samples: vn,
                    eps: ve,
                    neural,
                },
            )?;
            println!(
                "truncation gap {:.4} <= bound {:.4} + slack {:.4}: {}",
                trunc.gap,
                trunc.bound,
                trunc.slack,
                if trunc.ok { "pass" } else { "FAIL" }
            );
            println!("overall: {}", if ok { "pass" } else { "FAIL" });
            if !ok {
                return Err(Error::Validation("verification failed".into()));
            }
        }

        Command::Plot { csv, title } => {
            let (mut path, mut t) = (PathBuf::from("summary.csv"), "held-out MSE".to_string());
            if let Some(RunConfig::Plot { csv, title }) = base {
                path = csv;
                t = title;
            }
            if let Some(p) = csv {
                path = p;
            }
            if let Some(v) = title {
                t = v;
            }
            let rows = parse_summary_csv(&std::fs::read_to_string(&path)?)?;
            let svg = render_level_curves(&rows, &t)?;
            write_text(&dir, "plot.svg", &svg)?;
            write_json(&dir, "run_config.json", &RunConfig::Plot { csv: path, title: t })?;
            println!("wrote {}", dir.join("plot.svg").display());
        }
    }
    Ok(())
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::InvalidArgument(_) => "invalid_argument",
        Error::PackingFailure { .. } => "packing_failure",
        Error::AdmissibilityViolation { .. } => "admissibility_violation",
        Error::Validation(_) => "validation",
        Error::EmptyCell(_) => "empty_cell",
        Error::TrainingFailure(_) => "training_failure",
        Error::Parse(_) => "parse",
        Error::Io(_) => "io",
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        let report = serde_json::json!({
            "error": { "kind": error_kind(&e), "message": e.to_string() }
        });
        eprintln!("{report}");
        std::process::exit(1);
    }
}
