//! `ranksmith` command-line interface.
//!
//! Subcommands: `gen` (synthetic datasets), `train` (encoder fitting),
//! `eval` (retrieval + prediction metrics), `predict` (per-query years),
//! `ann-build` (approximate index files), `bin-sim` (year-bin similarity
//! matrices). All randomness flows from a single `--seed`; submodule seeds
//! are derived by fixed offsets so every command is reproducible bit for bit.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ranksmith::{
    bin_similarity, build_ann, curve_to_csv, generate, load_features, load_features_csv,
    mae_vs_k_curve, random_baseline_metrics, retrieval_metrics, save_features,
    save_features_csv, split, train, AnnConfig, AnnIndex, Encoder, LabeledItem, LossConfig,
    Objective, OptimizerConfig, RankError, RelevanceKind, RelevanceSpec, Result, SupportSet,
    SyntheticSpec, Temperature, TrainConfig, YearSpan,
};

use config::{parse_ks, parse_split, parse_years, ConfigMap};

// Fixed offsets deriving submodule seeds from --seed.
const SEED_SPLIT: u64 = 1;
const SEED_ENCODER: u64 = 2;
const SEED_TRAIN: u64 = 3;
const SEED_SUPPORT: u64 = 4;
const SEED_ANN: u64 = 5;
const SEED_BASELINE: u64 = 6;
const SEED_BINSIM: u64 = 7;

#[derive(Parser)]
#[command(name = "ranksmith", version, about = "Year-aware embedding training and retrieval")]
struct Cli {
    /// Master seed; all randomness derives from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores); RANKSMITH_THREADS is the fallback.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// key=value file supplying defaults; explicit flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic year-labeled feature dataset.
    Gen {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        /// Year span as min:max.
        #[arg(long)]
        years: Option<String>,
        /// Feature dimension.
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long = "noise-sigma")]
        noise_sigma: Option<f64>,
        #[arg(long = "distractor-dims")]
        distractor_dims: Option<usize>,
    },
    /// Train an encoder with a smooth ranking loss.
    Train {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Training log CSV (default: <out>-log.csv).
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        years: Option<String>,
        /// Fractions train:val:test.
        #[arg(long)]
        split: Option<String>,
        /// Draw equal per-year counts into val/test.
        #[arg(long)]
        balanced: bool,
        /// affine | free-table
        #[arg(long)]
        encoder: Option<String>,
        #[arg(long = "dim-out")]
        dim_out: Option<usize>,
        /// smooth-ndcg | smooth-ap
        #[arg(long)]
        loss: Option<String>,
        #[arg(long)]
        tau: Option<f64>,
        /// clipped-linear | inverse-linear | exp-inverse
        #[arg(long)]
        relevance: Option<String>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long = "positive-gap")]
        positive_gap: Option<i32>,
        #[arg(long = "batch-size")]
        batch_size: Option<usize>,
        #[arg(long)]
        iterations: Option<u64>,
        #[arg(long = "eval-every")]
        eval_every: Option<u64>,
        /// adam | sgd
        #[arg(long)]
        optimizer: Option<String>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        momentum: Option<f64>,
        #[arg(long)]
        beta1: Option<f64>,
        #[arg(long)]
        beta2: Option<f64>,
        #[arg(long)]
        epsilon: Option<f64>,
        /// L2-normalize embeddings before the loss.
        #[arg(long)]
        normalize: bool,
    },
    /// Evaluate a trained model on the test split.
    Eval {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Report JSON output path (also printed to stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        years: Option<String>,
        #[arg(long)]
        split: Option<String>,
        #[arg(long)]
        balanced: bool,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        relevance: Option<String>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long = "positive-gap")]
        positive_gap: Option<i32>,
        /// Use weighted k-NN for the headline MAE.
        #[arg(long)]
        weighted: bool,
        /// Use the approximate index for the headline MAE.
        #[arg(long)]
        ann: bool,
        /// Support set: `full` or a sample size.
        #[arg(long)]
        support: Option<String>,
        #[arg(long)]
        trees: Option<usize>,
        #[arg(long)]
        leaf: Option<usize>,
        #[arg(long)]
        budget: Option<usize>,
        /// k sweep, e.g. 1,2,5,10,20.
        #[arg(long)]
        curve: Option<String>,
        #[arg(long = "curve-out")]
        curve_out: Option<PathBuf>,
        #[arg(long = "bin-sim-out")]
        bin_sim_out: Option<PathBuf>,
        #[arg(long = "bin-width")]
        bin_width: Option<i32>,
    },
    /// Predict years for query features against a support set.
    Predict {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        support: Option<PathBuf>,
        #[arg(long)]
        queries: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        years: Option<String>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        weighted: bool,
        /// Query through an approximate index instead of an exact scan.
        #[arg(long)]
        ann: bool,
        /// Load a prebuilt index file (implies --ann).
        #[arg(long)]
        index: Option<PathBuf>,
        #[arg(long)]
        trees: Option<usize>,
        #[arg(long)]
        leaf: Option<usize>,
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Build and save an approximate nearest-neighbor index.
    AnnBuild {
        #[arg(long)]
        model: Option<PathBuf>,
        /// Support features the index is built over.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        years: Option<String>,
        #[arg(long)]
        trees: Option<usize>,
        #[arg(long)]
        leaf: Option<usize>,
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Emit the year-bin similarity matrix of an embedded split.
    BinSim {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        years: Option<String>,
        #[arg(long)]
        split: Option<String>,
        #[arg(long)]
        balanced: bool,
        /// test | train | all
        #[arg(long)]
        part: Option<String>,
        #[arg(long = "bin-width")]
        bin_width: Option<i32>,
    },
}

fn exit_code_for(err: &RankError) -> u8 {
    match err {
        RankError::Io { .. } | RankError::Parse { .. } => 4,
        RankError::NonFiniteLoss { .. } => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = ConfigMap::load(cli.config.as_deref())?;
    let seed = cfg.get(cli.seed, "seed", 42u64)?;
    let threads = match cli.threads {
        Some(t) => t,
        None => match std::env::var("RANKSMITH_THREADS") {
            Ok(v) => v.parse().map_err(|e| RankError::InvalidParameter {
                name: "RANKSMITH_THREADS",
                reason: format!("{e}"),
            })?,
            Err(_) => cfg.get(None, "threads", 0usize)?,
        },
    };
    if threads > 0 {
        // ignore the error if a pool already exists (tests call run() twice)
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    match cli.command {
        Command::Gen {
            out,
            n,
            years,
            dim,
            noise_sigma,
            distractor_dims,
        } => cmd_gen(&cfg, seed, out, n, years, dim, noise_sigma, distractor_dims),
        Command::Train { .. } => cmd_train(&cfg, seed, cli.command),
        Command::Eval { .. } => cmd_eval(&cfg, seed, cli.command),
        Command::Predict { .. } => cmd_predict(&cfg, seed, cli.command),
        Command::AnnBuild {
            model,
            data,
            out,
            years,
            trees,
            leaf,
            budget,
        } => cmd_ann_build(&cfg, seed, model, data, out, years, trees, leaf, budget),
        Command::BinSim { .. } => cmd_bin_sim(&cfg, seed, cli.command),
    }
}

fn load_items(path: &Path, span: YearSpan) -> Result<Vec<LabeledItem>> {
    if path.extension().is_some_and(|e| e == "csv") {
        load_features_csv(path, span)
    } else {
        load_features(path, span)
    }
}

fn embed_items(enc: &Encoder, items: &[LabeledItem]) -> Result<Vec<LabeledItem>> {
    let mut out = items.to_vec();
    for item in &mut out {
        item.embedding = Some(enc.encode_item(item)?);
    }
    Ok(out)
}

fn support_from(
    enc: &Encoder,
    items: &[LabeledItem],
    selector: &str,
    seed: u64,
) -> Result<SupportSet> {
    let full = SupportSet::from_items(&embed_items(enc, items)?)?;
    if selector == "full" {
        return Ok(full);
    }
    let n: usize = selector.parse().map_err(|_| RankError::InvalidParameter {
        name: "support",
        reason: format!("expected `full` or a sample size, got {selector:?}"),
    })?;
    full.sample(n, seed)
}

#[allow(clippy::too_many_arguments)]
fn cmd_gen(
    cfg: &ConfigMap,
    seed: u64,
    out: Option<PathBuf>,
    n: Option<usize>,
    years: Option<String>,
    dim: Option<usize>,
    noise_sigma: Option<f64>,
    distractor_dims: Option<usize>,
) -> Result<()> {
    let out = cfg.require_path(out, "out")?;
    let defaults = SyntheticSpec::default();
    let span = parse_years(&cfg.get(years, "years", "1930:1999".to_string())?)?;
    let spec = SyntheticSpec {
        n_items: cfg.get(n, "n", defaults.n_items)?,
        span,
        d_in: cfg.get(dim, "dim", defaults.d_in)?,
        noise_sigma: cfg.get(noise_sigma, "noise-sigma", defaults.noise_sigma)?,
        distractor_dims: cfg.get(distractor_dims, "distractor-dims", defaults.distractor_dims)?,
        seed,
    };
    let items = generate(&spec)?;
    if out.extension().is_some_and(|e| e == "csv") {
        save_features_csv(&items, &out)?;
    } else {
        save_features(&items, &out)?;
    }
    println!(
        "wrote {} items (dim {}, years {}:{}) to {}",
        items.len(),
        spec.d_in,
        span.min,
        span.max,
        out.display()
    );
    Ok(())
}

fn cmd_train(cfg: &ConfigMap, seed: u64, command: Command) -> Result<()> {
    let Command::Train {
        data,
        out,
        log,
        years,
        split: split_arg,
        balanced,
        encoder,
        dim_out,
        loss,
        tau,
        relevance,
        gamma,
        positive_gap,
        batch_size,
        iterations,
        eval_every,
        optimizer,
        lr,
        momentum,
        beta1,
        beta2,
        epsilon,
        normalize,
    } = command
    else {
        unreachable!()
    };
    let data = cfg.require_path(data, "data")?;
    let out = cfg.require_path(out, "out")?;
    let log_path = cfg.get_path(log, "log").unwrap_or_else(|| {
        let mut name = out.file_stem().unwrap_or_default().to_os_string();
        name.push("-log.csv");
        out.with_file_name(name)
    });
    let span = parse_years(&cfg.get(years, "years", "1930:1999".to_string())?)?;
    let items = load_items(&data, span)?;
    let fractions = parse_split(&cfg.get(split_arg, "split", "0.93:0:0.07".to_string())?)?;
    let balanced = cfg.get_flag(balanced, "balanced");
    let (train_items, val_items, _) =
        split(&items, fractions, seed.wrapping_add(SEED_SPLIT), balanced)?;

    let loss_cfg = resolve_loss(cfg, loss, tau, relevance, gamma, positive_gap)?;
    let optimizer = resolve_optimizer(cfg, optimizer, lr, momentum, beta1, beta2, epsilon)?;
    let train_cfg = TrainConfig {
        batch_size: cfg.get(batch_size, "batch-size", 64)?,
        max_iterations: cfg.get(iterations, "iterations", 2000)?,
        optimizer,
        loss: loss_cfg,
        seed: seed.wrapping_add(SEED_TRAIN),
        eval_every: cfg.get(eval_every, "eval-every", 100)?,
        normalize: cfg.get_flag(normalize, "normalize"),
        val_k: 10,
    };

    let encoder_kind = cfg.get(encoder, "encoder", "affine".to_string())?;
    let d_out = cfg.get(dim_out, "dim-out", 16)?;
    let enc_seed = seed.wrapping_add(SEED_ENCODER);
    let mut enc = match encoder_kind.as_str() {
        "affine" => {
            let d_in = train_items
                .first()
                .map(|i| i.features.dim())
                .ok_or(RankError::Empty("train split"))?;
            Encoder::init_affine(d_in, d_out, enc_seed)?
        }
        "free-table" => {
            let ids: Vec<u64> = train_items.iter().map(|i| i.id).collect();
            Encoder::init_free_table(&ids, d_out, enc_seed)?
        }
        other => {
            return Err(RankError::InvalidParameter {
                name: "encoder",
                reason: format!("expected affine or free-table, got {other:?}"),
            })
        }
    };

    let val = (!val_items.is_empty()).then_some(val_items.as_slice());
    match train(&train_items, val, &train_cfg, &mut enc) {
        Ok(log) => {
            enc.save(&out)?;
            log.write_csv(&log_path)?;
            if let Some(last) = log.records.last() {
                let mae = last
                    .val_mae
                    .map(|m| format!("{m:.4}"))
                    .unwrap_or_else(|| "-".to_string());
                println!(
                    "iteration={} loss={:.6} ndcg={:.4} mae={}",
                    last.iteration,
                    last.loss,
                    last.val_ndcg.unwrap_or(last.train_ndcg),
                    mae
                );
            }
            Ok(())
        }
        Err(err @ RankError::NonFiniteLoss { .. }) => {
            // keep the last finite parameters on disk for inspection
            enc.save(&out)?;
            eprintln!("checkpoint with last finite parameters kept at {}", out.display());
            Err(err)
        }
        Err(other) => Err(other),
    }
}

fn resolve_loss(
    cfg: &ConfigMap,
    loss: Option<String>,
    tau: Option<f64>,
    relevance: Option<String>,
    gamma: Option<f64>,
    positive_gap: Option<i32>,
) -> Result<LossConfig> {
    let objective = match cfg.get(loss, "loss", "smooth-ndcg".to_string())?.as_str() {
        "smooth-ndcg" => Objective::SmoothNdcg,
        "smooth-ap" => Objective::SmoothAp,
        other => {
            return Err(RankError::InvalidParameter {
                name: "loss",
                reason: format!("expected smooth-ndcg or smooth-ap, got {other:?}"),
            })
        }
    };
    Ok(LossConfig {
        objective,
        tau: Temperature::new(cfg.get(tau, "tau", 0.01)?)?,
        relevance: resolve_relevance(cfg, relevance, gamma)?,
        positive_gap: cfg.get(positive_gap, "positive-gap", 0)?,
    })
}

fn resolve_relevance(
    cfg: &ConfigMap,
    relevance: Option<String>,
    gamma: Option<f64>,
) -> Result<RelevanceSpec> {
    let kind: RelevanceKind = cfg
        .get(relevance, "relevance", "clipped-linear".to_string())?
        .parse()?;
    RelevanceSpec::new(kind, cfg.get(gamma, "gamma", 10.0)?)
}

#[allow(clippy::too_many_arguments)]
fn resolve_optimizer(
    cfg: &ConfigMap,
    optimizer: Option<String>,
    lr: Option<f64>,
    momentum: Option<f64>,
    beta1: Option<f64>,
    beta2: Option<f64>,
    epsilon: Option<f64>,
) -> Result<OptimizerConfig> {
    match cfg.get(optimizer, "optimizer", "adam".to_string())?.as_str() {
        "adam" => Ok(OptimizerConfig::Adam {
            lr: cfg.get(lr, "lr", 1e-3)?,
            beta1: cfg.get(beta1, "beta1", 0.9)?,
            beta2: cfg.get(beta2, "beta2", 0.999)?,
            epsilon: cfg.get(epsilon, "epsilon", 1e-8)?,
        }),
        "sgd" => Ok(OptimizerConfig::Sgd {
            lr: cfg.get(lr, "lr", 1e-2)?,
            momentum: cfg.get(momentum, "momentum", 0.9)?,
        }),
        other => Err(RankError::InvalidParameter {
            name: "optimizer",
            reason: format!("expected adam or sgd, got {other:?}"),
        }),
    }
}

fn ann_mae(
    index: &AnnIndex,
    queries: &[LabeledItem],
    k: usize,
    weighted: bool,
) -> Result<f64> {
    let mut sum = 0.0;
    for q in queries {
        let embedding = q.embedding.as_ref().ok_or(RankError::Empty("embedding"))?;
        let pred = index.predict(embedding, k, weighted)?;
        sum += f64::from((pred.year - q.year).abs());
    }
    Ok(sum / queries.len() as f64)
}

fn cmd_eval(cfg: &ConfigMap, seed: u64, command: Command) -> Result<()> {
    let Command::Eval {
        data,
        model,
        out,
        years,
        split: split_arg,
        balanced,
        k,
        relevance,
        gamma,
        positive_gap,
        weighted,
        ann,
        support,
        trees,
        leaf,
        budget,
        curve,
        curve_out,
        bin_sim_out,
        bin_width,
    } = command
    else {
        unreachable!()
    };
    let data = cfg.require_path(data, "data")?;
    let model = cfg.require_path(model, "model")?;
    let span = parse_years(&cfg.get(years, "years", "1930:1999".to_string())?)?;
    let items = load_items(&data, span)?;
    let fractions = parse_split(&cfg.get(split_arg, "split", "0.93:0:0.07".to_string())?)?;
    let balanced = cfg.get_flag(balanced, "balanced");
    let (train_items, _, test_items) =
        split(&items, fractions, seed.wrapping_add(SEED_SPLIT), balanced)?;
    if test_items.is_empty() {
        return Err(RankError::Empty("test split"));
    }
    let enc = Encoder::load(&model)?;
    let k = cfg.get(k, "k", 10)?;
    let rel = resolve_relevance(cfg, relevance, gamma)?;
    let positive_gap = cfg.get(positive_gap, "positive-gap", 0)?;
    let weighted = cfg.get_flag(weighted, "weighted");
    let use_ann = cfg.get_flag(ann, "ann");

    let selector = cfg.get(support, "support", "full".to_string())?;
    let support_set = support_from(&enc, &train_items, &selector, seed.wrapping_add(SEED_SUPPORT))?;
    let queries = embed_items(&enc, &test_items)?;

    let plain = retrieval_metrics(&queries, &support_set, &rel, positive_gap, k, false)?;
    let weighted_report = retrieval_metrics(&queries, &support_set, &rel, positive_gap, k, true)?;
    println!("mae.plain.exact = {:.6}", plain.mae.unwrap_or(f64::NAN));
    println!(
        "mae.weighted.exact = {:.6}",
        weighted_report.mae.unwrap_or(f64::NAN)
    );

    let mut headline = if weighted { weighted_report.clone() } else { plain.clone() };
    if use_ann {
        let ann_cfg = AnnConfig {
            tree_count: cfg.get(trees, "trees", 16)?,
            leaf_capacity: cfg.get(leaf, "leaf", 32)?,
            search_budget: cfg.get(budget, "budget", 2048)?,
            seed: seed.wrapping_add(SEED_ANN),
        };
        let index = build_ann(&support_set, &ann_cfg)?;
        let plain_ann = ann_mae(&index, &queries, k, false)?;
        let weighted_ann = ann_mae(&index, &queries, k, true)?;
        println!("mae.plain.ann = {plain_ann:.6}");
        println!("mae.weighted.ann = {weighted_ann:.6}");
        headline.mae = Some(if weighted { weighted_ann } else { plain_ann });
    }
    println!(
        "map = {}  ndcg = {}  (skipped {} of {})",
        headline.map.map(|v| format!("{v:.6}")).unwrap_or_else(|| "-".into()),
        headline.ndcg.map(|v| format!("{v:.6}")).unwrap_or_else(|| "-".into()),
        headline.n_skipped,
        headline.n_queries
    );

    let baseline = random_baseline_metrics(
        &queries,
        &support_set,
        &rel,
        positive_gap,
        seed.wrapping_add(SEED_BASELINE),
    )?;
    println!(
        "random baseline: mae = {:.4}  ndcg = {:.4}",
        baseline.mae.unwrap_or(f64::NAN),
        baseline.ndcg.unwrap_or(f64::NAN)
    );

    if let Some(curve_spec) = cfg.get_opt(curve, "curve") {
        let ks = parse_ks(&curve_spec)?;
        let curve_path = cfg.require_path(curve_out, "curve-out")?;
        let pairs = mae_vs_k_curve(&queries, &support_set, &ks, weighted)?;
        std::fs::write(&curve_path, curve_to_csv(&pairs)).map_err(|e| RankError::Io {
            path: curve_path.clone(),
            source: e,
        })?;
        println!("wrote curve to {}", curve_path.display());
    }

    if let Some(bin_path) = cfg.get_path(bin_sim_out, "bin-sim-out") {
        let width = cfg.get(bin_width, "bin-width", 5)?;
        let matrix = bin_similarity(&queries, width, seed.wrapping_add(SEED_BINSIM))?;
        std::fs::write(&bin_path, matrix.to_csv()).map_err(|e| RankError::Io {
            path: bin_path.clone(),
            source: e,
        })?;
        println!("wrote bin similarity matrix to {}", bin_path.display());
    }

    let json = headline.to_json();
    println!("{json}");
    if let Some(out) = cfg.get_path(out, "out") {
        std::fs::write(&out, format!("{json}\n")).map_err(|e| RankError::Io {
            path: out.clone(),
            source: e,
        })?;
    }
    Ok(())
}

fn cmd_predict(cfg: &ConfigMap, seed: u64, command: Command) -> Result<()> {
    let Command::Predict {
        model,
        support,
        queries,
        out,
        years,
        k,
        weighted,
        ann,
        index,
        trees,
        leaf,
        budget,
    } = command
    else {
        unreachable!()
    };
    let model = cfg.require_path(model, "model")?;
    let support_path = cfg.require_path(support, "support")?;
    let queries_path = cfg.require_path(queries, "queries")?;
    let out = cfg.require_path(out, "out")?;
    let span = parse_years(&cfg.get(years, "years", "1930:1999".to_string())?)?;
    let k = cfg.get(k, "k", 10)?;
    let weighted = cfg.get_flag(weighted, "weighted");
    let index_path = cfg.get_path(index, "index");
    let use_ann = cfg.get_flag(ann, "ann") || index_path.is_some();

    let enc = Encoder::load(&model)?;
    let support_items = load_items(&support_path, span)?;
    let support_set = SupportSet::from_items(&embed_items(&enc, &support_items)?)?;
    let mut query_items = embed_items(&enc, &load_items(&queries_path, span)?)?;
    query_items.sort_by_key(|q| q.id);

    let index = if use_ann {
        Some(match index_path {
            Some(p) => AnnIndex::load(&p, &support_set)?,
            None => build_ann(
                &support_set,
                &AnnConfig {
                    tree_count: cfg.get(trees, "trees", 16)?,
                    leaf_capacity: cfg.get(leaf, "leaf", 32)?,
                    search_budget: cfg.get(budget, "budget", 2048)?,
                    seed: seed.wrapping_add(SEED_ANN),
                },
            )?,
        })
    } else {
        None
    };

    let mut csv = String::from("id,predicted_year,neighbors\n");
    for q in &query_items {
        let embedding = q.embedding.as_ref().expect("embedded above");
        let pred = match &index {
            Some(idx) => idx.predict(embedding, k, weighted)?,
            None if weighted => ranksmith::weighted_knn_predict(embedding, &support_set, k)?,
            None => ranksmith::knn_predict(embedding, &support_set, k)?,
        };
        let neighbors: Vec<String> = pred
            .neighbors
            .iter()
            .map(|n| format!("{}:{:.6}", n.id, n.similarity))
            .collect();
        csv.push_str(&format!("{},{},{}\n", q.id, pred.year, neighbors.join(";")));
    }
    std::fs::write(&out, csv).map_err(|e| RankError::Io {
        path: out.clone(),
        source: e,
    })?;
    println!("wrote {} predictions to {}", query_items.len(), out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_ann_build(
    cfg: &ConfigMap,
    seed: u64,
    model: Option<PathBuf>,
    data: Option<PathBuf>,
    out: Option<PathBuf>,
    years: Option<String>,
    trees: Option<usize>,
    leaf: Option<usize>,
    budget: Option<usize>,
) -> Result<()> {
    let model = cfg.require_path(model, "model")?;
    let data = cfg.require_path(data, "data")?;
    let out = cfg.require_path(out, "out")?;
    let span = parse_years(&cfg.get(years, "years", "1930:1999".to_string())?)?;
    let enc = Encoder::load(&model)?;
    let items = load_items(&data, span)?;
    let support = SupportSet::from_items(&embed_items(&enc, &items)?)?;
    let index = build_ann(
        &support,
        &AnnConfig {
            tree_count: cfg.get(trees, "trees", 16)?,
            leaf_capacity: cfg.get(leaf, "leaf", 32)?,
            search_budget: cfg.get(budget, "budget", 2048)?,
            seed: seed.wrapping_add(SEED_ANN),
        },
    )?;
    index.save(&out)?;
    println!(
        "built {} trees over {} items, saved to {}",
        index.tree_count(),
        index.len(),
        out.display()
    );
    Ok(())
}

fn cmd_bin_sim(cfg: &ConfigMap, seed: u64, command: Command) -> Result<()> {
    let Command::BinSim {
        model,
        data,
        out,
        years,
        split: split_arg,
        balanced,
        part,
        bin_width,
    } = command
    else {
        unreachable!()
    };
    let model = cfg.require_path(model, "model")?;
    let data = cfg.require_path(data, "data")?;
    let out = cfg.require_path(out, "out")?;
    let span = parse_years(&cfg.get(years, "years", "1930:1999".to_string())?)?;
    let items = load_items(&data, span)?;
    let fractions = parse_split(&cfg.get(split_arg, "split", "0.93:0:0.07".to_string())?)?;
    let balanced = cfg.get_flag(balanced, "balanced");
    let part = cfg.get(part, "part", "test".to_string())?;
    let (train_items, _, test_items) =
        split(&items, fractions, seed.wrapping_add(SEED_SPLIT), balanced)?;
    let chosen = match part.as_str() {
        "test" => test_items,
        "train" => train_items,
        "all" => items,
        other => {
            return Err(RankError::InvalidParameter {
                name: "part",
                reason: format!("expected test, train, or all, got {other:?}"),
            })
        }
    };
    let enc = Encoder::load(&model)?;
    let embedded = embed_items(&enc, &chosen)?;
    let width = cfg.get(bin_width, "bin-width", 5)?;
    let matrix = bin_similarity(&embedded, width, seed.wrapping_add(SEED_BINSIM))?;
    std::fs::write(&out, matrix.to_csv()).map_err(|e| RankError::Io {
        path: out.clone(),
        source: e,
    })?;
    let rho = ranksmith::gap_similarity_spearman(&matrix)?;
    println!(
        "wrote {}x{} matrix to {} (gap/similarity spearman {:.4})",
        matrix.bins.len(),
        matrix.bins.len(),
        out.display(),
        rho
    );
    Ok(())
}
