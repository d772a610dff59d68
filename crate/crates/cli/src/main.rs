//! `hyperbdd` — OBDD construction, classical variable reordering, and
//! learned variable orders from the command line.
//!
//! Every subcommand takes `--seed`, `--out`, and `--config PATH` with
//! optional trailing `key=value` overrides. Formulas are DIMACS files
//! (`-` reads standard input); order files hold one variable per line,
//! top level first.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::fs;
use std::io::{self, Read, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use hyperbdd::bdd::{format_order, parse_order, validate_order, BddManager, NodeId};
use hyperbdd::cnf::{parse_dimacs, Cnf, VarId};
use hyperbdd::harness::{
    bench, evaluate, gen_dataset, parse_config, read_dataset, split, synth_chain,
    to_train_samples, write_dataset, Algo, BenchConfig, LabeledSample,
};
use hyperbdd::hmpnn::{
    depth_to_order, load_model, predict, save_model, train, vocab_of, Model, ModelConfig,
    TrainConfig,
};
use hyperbdd::hypergraph::{cnf_to_hypergraph, feature_rank, Hypergraph3};
use hyperbdd::reorder::{
    exhaustive, genetic, random_swaps, sift, window_k, GaConfig, ReorderResult, EXHAUSTIVE_CAP,
    SIFT_MAX_GROWTH,
};

#[derive(Parser)]
#[command(
    name = "hyperbdd",
    version,
    about = "Reduced ordered BDDs from 3-CNF: build, reorder, and learn variable orders"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build the OBDD of a formula and print its size
    Build(BuildArgs),
    /// Improve a variable order with a classical algorithm
    Reorder(ReorderArgs),
    /// Labelled-corpus tools
    #[command(subcommand)]
    Dataset(DatasetCmd),
    /// Train the order predictor on a labelled dataset
    Train(TrainArgs),
    /// Predict a variable order with a trained model
    Predict(PredictArgs),
    /// Compare algorithms over a labelled corpus
    Bench(BenchArgs),
}

/// Flags shared by every subcommand.
#[derive(Args)]
struct Common {
    /// Seed for anything stochastic
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the subcommand's primary artifact to this path
    #[arg(long)]
    out: Option<PathBuf>,
    /// Config file of key=value lines (# comments)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Inline config overrides, applied after --config
    #[arg(value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct BuildArgs {
    /// DIMACS file, or - for standard input
    #[arg(long)]
    cnf: String,
    /// Order file (default: the formula's frequency order)
    #[arg(long)]
    order: Option<PathBuf>,
    /// Also write the clause hypergraph dump to this path
    #[arg(long)]
    hypergraph: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReorderAlg {
    Win2,
    Win3,
    Sift,
    Rand,
    Ga,
    Exhaustive,
}

impl ReorderAlg {
    fn name(self) -> &'static str {
        match self {
            ReorderAlg::Win2 => "win2",
            ReorderAlg::Win3 => "win3",
            ReorderAlg::Sift => "sift",
            ReorderAlg::Rand => "rand",
            ReorderAlg::Ga => "ga",
            ReorderAlg::Exhaustive => "exhaustive",
        }
    }
}

#[derive(Args)]
struct ReorderArgs {
    /// Algorithm to run
    #[arg(long, value_enum)]
    alg: ReorderAlg,
    /// DIMACS file, or - for standard input
    #[arg(long)]
    cnf: String,
    /// Initial order file (default: the formula's frequency order)
    #[arg(long)]
    order: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand)]
enum DatasetCmd {
    /// Generate a labelled corpus of seeds and mutants
    Gen(GenArgs),
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct TrainArgs {
    /// Labelled dataset (JSON lines), or - for standard input
    #[arg(long)]
    dataset: String,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct PredictArgs {
    /// Model checkpoint file
    #[arg(long)]
    ckpt: PathBuf,
    /// DIMACS file, or - for standard input
    #[arg(long)]
    cnf: String,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct BenchArgs {
    /// Labelled dataset (JSON lines), or - for standard input
    #[arg(long)]
    dataset: String,
    /// Model checkpoint, required when `predict` is benchmarked
    #[arg(long)]
    ckpt: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

/// The merged key=value settings, tracking reads so unknown keys can be
/// rejected instead of silently ignored.
struct Cfg {
    map: BTreeMap<String, String>,
    used: RefCell<BTreeSet<String>>,
}

impl Cfg {
    fn load(common: &Common) -> Result<Cfg> {
        let mut map = match &common.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                parse_config(&text)?
            }
            None => BTreeMap::new(),
        };
        for item in &common.overrides {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| anyhow!("override {item:?}: expected key=value"))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(Cfg { map, used: RefCell::new(BTreeSet::new()) })
    }

    fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        self.used.borrow_mut().insert(key.to_string());
        match self.map.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|e| anyhow!("config {key}={v}: {e}")),
        }
    }

    fn get_str(&self, key: &str, default: &str) -> String {
        self.used.borrow_mut().insert(key.to_string());
        self.map.get(key).cloned().unwrap_or_else(|| default.to_string())
    }

    fn has(&self, key: &str) -> bool {
        self.used.borrow_mut().insert(key.to_string());
        self.map.contains_key(key)
    }

    /// Rejects settings nothing consumed — almost always a typo.
    fn finish(self) -> Result<()> {
        let used = self.used.into_inner();
        let unknown: Vec<&str> = self
            .map
            .keys()
            .map(String::as_str)
            .filter(|k| !used.contains(*k))
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            bail!("unknown config keys: {}", unknown.join(", "));
        }
    }

    fn ga(&self, prefix: &str) -> Result<GaConfig> {
        let d = GaConfig::default();
        Ok(GaConfig {
            population: self.get(&format!("{prefix}population"), d.population)?,
            tournament: self.get(&format!("{prefix}tournament"), d.tournament)?,
            crossover_rate: self.get(&format!("{prefix}crossover"), d.crossover_rate)?,
            mutation_rate: self.get(&format!("{prefix}mutation"), d.mutation_rate)?,
            elitism: self.get(&format!("{prefix}elitism"), d.elitism)?,
            max_generations: self.get(&format!("{prefix}generations"), d.max_generations)?,
            stagnation: self.get(&format!("{prefix}stagnation"), d.stagnation)?,
        })
    }
}

fn read_text(path: &str, what: &str) -> Result<String> {
    if path == "-" {
        let mut text = String::new();
        io::stdin().read_to_string(&mut text).context("reading standard input")?;
        Ok(text)
    } else {
        fs::read_to_string(path).with_context(|| format!("reading {what} {path}"))
    }
}

fn read_cnf(path: &str) -> Result<Cnf> {
    Ok(parse_dimacs(&read_text(path, "formula")?)?)
}

fn read_samples(path: &str) -> Result<Vec<LabeledSample>> {
    Ok(read_dataset(&read_text(path, "dataset")?)?)
}

/// The starting order: the given file, or the formula's frequency order.
fn starting_order(cnf: &Cnf, path: Option<&Path>) -> Result<Vec<VarId>> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p)
                .with_context(|| format!("reading order file {}", p.display()))?;
            let order = parse_order(&text)?;
            validate_order(cnf.num_vars(), &order)?;
            Ok(order)
        }
        None => Ok(cnf.frequency_order()),
    }
}

/// Writes to --out when given, otherwise prints to stdout.
fn deliver(out: Option<&Path>, text: &str, what: &str) -> Result<()> {
    match out {
        Some(path) => {
            fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
            eprintln!("wrote {what} to {}", path.display());
        }
        None => {
            io::stdout().write_all(text.as_bytes()).context("writing to stdout")?;
        }
    }
    Ok(())
}

fn prebuild(cnf: &Cnf, order: &[VarId]) -> Result<(BddManager, NodeId)> {
    let mut mgr = BddManager::new(cnf.num_vars(), order)?;
    let root = mgr.build_cnf(cnf)?;
    Ok((mgr, root))
}

fn cmd_build(args: BuildArgs) -> Result<()> {
    let cfg = Cfg::load(&args.common)?;
    cfg.finish()?;
    let cnf = read_cnf(&args.cnf)?;
    let order = starting_order(&cnf, args.order.as_deref())?;
    let (mgr, root) = prebuild(&cnf, &order)?;
    println!("size {}", mgr.size(root));
    if let Some(path) = &args.hypergraph {
        fs::write(path, cnf_to_hypergraph(&cnf).dump())
            .with_context(|| format!("writing {}", path.display()))?;
        eprintln!("wrote hypergraph dump to {}", path.display());
    }
    if let Some(path) = &args.common.out {
        fs::write(path, mgr.to_dot(root)).with_context(|| format!("writing {}", path.display()))?;
        eprintln!("wrote DOT diagram to {}", path.display());
    }
    Ok(())
}

fn cmd_reorder(args: ReorderArgs) -> Result<()> {
    let cfg = Cfg::load(&args.common)?;
    let cnf = read_cnf(&args.cnf)?;
    let initial = starting_order(&cnf, args.order.as_deref())?;
    let seed = args.common.seed;

    let result: ReorderResult = match args.alg {
        ReorderAlg::Win2 | ReorderAlg::Win3 => {
            let (mut mgr, root) = prebuild(&cnf, &initial)?;
            window_k(&mut mgr, root, if args.alg == ReorderAlg::Win2 { 2 } else { 3 })?
        }
        ReorderAlg::Sift => {
            let growth = cfg.get("sift_growth", SIFT_MAX_GROWTH)?;
            let (mut mgr, root) = prebuild(&cnf, &initial)?;
            sift(&mut mgr, root, growth)
        }
        ReorderAlg::Rand => {
            let trials = cfg.get("trials", 50u64)?;
            let (mut mgr, root) = prebuild(&cnf, &initial)?;
            random_swaps(&mut mgr, root, trials, seed)
        }
        ReorderAlg::Ga => genetic(&cnf, &initial, &cfg.ga("ga_")?, seed)?,
        ReorderAlg::Exhaustive => {
            let cap = cfg.get("cap", EXHAUSTIVE_CAP)?;
            exhaustive(&cnf, &initial, cap)?
        }
    };
    cfg.finish()?;

    println!(
        "{} {} {} {:.6} {:.6}",
        args.alg.name(),
        result.initial_size,
        result.final_size,
        result.eta,
        result.elapsed
    );
    if let Some(path) = &args.common.out {
        fs::write(path, format_order(&result.order))
            .with_context(|| format!("writing {}", path.display()))?;
        eprintln!("wrote order to {}", path.display());
    }
    Ok(())
}

fn cmd_dataset_gen(args: GenArgs) -> Result<()> {
    use rand::{Rng, SeedableRng};
    let cfg = Cfg::load(&args.common)?;

    // chain(2) is left out of the default corpus: it has only three distinct
    // polarity mutants, fewer than the default mutants-per-seed.
    let chains = cfg.get_str("chains", "4,6");
    let rand_count: usize = cfg.get("rand", 6)?;
    let vars_min: u32 = cfg.get("rand_vars_min", 8)?;
    let vars_max: u32 = cfg.get("rand_vars_max", 12)?;
    let ratio_min: f64 = cfg.get("ratio_min", 1.6)?;
    let ratio_max: f64 = cfg.get("ratio_max", 2.9)?;
    let mutants: usize = cfg.get("mutants", 4)?;
    let ga = cfg.ga("ga_")?;
    cfg.finish()?;
    if vars_min > vars_max || vars_min < 3 {
        bail!("rand_vars range {vars_min}..={vars_max} is invalid (need 3 <= min <= max)");
    }
    if !(ratio_min <= ratio_max && ratio_min > 0.0) {
        bail!("ratio range {ratio_min}..={ratio_max} is invalid");
    }

    let mut seeds: Vec<Cnf> = Vec::new();
    for part in chains.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let n: u32 = part.parse().map_err(|e| anyhow!("chains entry {part:?}: {e}"))?;
        seeds.push(synth_chain(n)?);
    }
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(args.common.seed);
    for _ in 0..rand_count {
        let n = rng.gen_range(vars_min..=vars_max);
        let ratio = rng.gen_range(ratio_min..=ratio_max);
        let clauses = ((n as f64 * ratio).round() as usize).max(1);
        seeds.push(hyperbdd::harness::random_cnf(n, clauses, rng.gen()));
    }
    if seeds.is_empty() {
        bail!("no seed formulas: chains is empty and rand=0");
    }

    let dataset = gen_dataset(&seeds, mutants, &ga, rng.gen())?;
    deliver(
        args.common.out.as_deref(),
        &write_dataset(&dataset),
        &format!("{} samples", dataset.len()),
    )
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let cfg = Cfg::load(&args.common)?;
    let h: usize = cfg.get("h", 16)?;
    let d_feat: usize = cfg.get("d_feat", h)?;
    let tc = TrainConfig {
        lr: cfg.get("lr", TrainConfig::default().lr)?,
        epochs: cfg.get("epochs", TrainConfig::default().epochs)?,
        batch_size: cfg.get("batch", TrainConfig::default().batch_size)?,
    };
    let holdout = if cfg.has("split") { Some(cfg.get("split", 0.8)?) } else { None };
    cfg.finish()?;

    let samples = read_samples(&args.dataset)?;
    let (train_set, test_set) = match holdout {
        Some(fraction) => split(&samples, fraction, args.common.seed)?,
        None => (samples.clone(), Vec::new()),
    };

    // The sign-key vocabulary is frozen from the whole corpus (inputs only,
    // never labels) so held-out formulas cannot miss.
    let hgs: Vec<Hypergraph3> = samples
        .iter()
        .map(|s| Ok(cnf_to_hypergraph(&s.cnf()?)))
        .collect::<Result<_>>()?;
    let model = Model::new(
        &ModelConfig { h, d_feat, ..ModelConfig::default() },
        &vocab_of(&hgs),
        args.common.seed,
    )?;

    let encoded = to_train_samples(&train_set, d_feat)?;
    let (trained, history) = train(&model, &encoded, &tc, args.common.seed)?;
    for (i, loss) in history.iter().enumerate() {
        println!("epoch {i} {loss:.6}");
    }
    if !test_set.is_empty() {
        let report = evaluate(&trained, &test_set)?;
        println!("held_out_mean_angle {:.6}", report.mean_angle);
        println!("held_out_mean_eta {:.6}", report.mean_eta);
    }
    match &args.common.out {
        Some(path) => {
            fs::write(path, save_model(&trained))
                .with_context(|| format!("writing {}", path.display()))?;
            eprintln!("wrote checkpoint to {}", path.display());
        }
        None => eprintln!("no --out given; checkpoint discarded"),
    }
    Ok(())
}

fn cmd_predict(args: PredictArgs) -> Result<()> {
    let cfg = Cfg::load(&args.common)?;
    cfg.finish()?;
    let text = fs::read_to_string(&args.ckpt)
        .with_context(|| format!("reading checkpoint {}", args.ckpt.display()))?;
    let model = load_model(&text)?;
    let cnf = read_cnf(&args.cnf)?;
    let hg = cnf_to_hypergraph(&cnf);
    let feats = feature_rank(&cnf, model.d_feat);
    let order = depth_to_order(&predict(&model, &hg, &feats)?);
    print!("{}", format_order(&order));
    if let Some(path) = &args.common.out {
        fs::write(path, format_order(&order))
            .with_context(|| format!("writing {}", path.display()))?;
        eprintln!("wrote order to {}", path.display());
    }
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let cfg = Cfg::load(&args.common)?;
    let default_algs =
        if args.ckpt.is_some() { "win2,win3,sift,rand,ga,predict" } else { "win2,win3,sift,rand,ga" };
    let algs_text = cfg.get_str("algs", default_algs);
    let bench_cfg = BenchConfig { rand_trials: cfg.get("trials", 50u64)?, ga: cfg.ga("ga_")? };
    cfg.finish()?;

    let mut algorithms = Vec::new();
    for part in algs_text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        algorithms
            .push(Algo::parse(part).ok_or_else(|| anyhow!("unknown algorithm {part:?}"))?);
    }
    if algorithms.is_empty() {
        bail!("algs is empty");
    }

    let model = match &args.ckpt {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading checkpoint {}", path.display()))?;
            Some(load_model(&text)?)
        }
        None => None,
    };
    let samples = read_samples(&args.dataset)?;
    let report = bench(&samples, &algorithms, model.as_ref(), &bench_cfg, args.common.seed)?;
    deliver(args.common.out.as_deref(), &report.table(), "benchmark table")
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Build(args) => cmd_build(args),
        Cmd::Reorder(args) => cmd_reorder(args),
        Cmd::Dataset(DatasetCmd::Gen(args)) => cmd_dataset_gen(args),
        Cmd::Train(args) => cmd_train(args),
        Cmd::Predict(args) => cmd_predict(args),
        Cmd::Bench(args) => cmd_bench(args),
    }
}
