//! Command-line entry points.
//!
//! Exit codes: 0 on success, 1 on argument or input-validation errors,
//! 2 on runtime errors while processing. Output files are written
//! atomically (temp file in the target directory, then rename), and all
//! warnings go to standard error.
//!
//! Resource files given as relative paths are also looked up under the
//! directory named by the `COREFKIT_RESOURCES` environment variable.

use std::collections::{BTreeMap, HashSet};
use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::adv_coref::{
    self, AdvConfig, ModelConfig, PreparedDoc, ToyDocument, Vocab,
};
use crate::conll_io::{self, Document};
use crate::coref_metrics::{
    self, cluster_head_names, conll_f1_from_stats, format_score_report, leakage_rate, pool_stats,
    CONLL_STAT_KEYS,
};
use crate::gap_eval;
use crate::gazetteer::{self, GazetteerSet, GeoNameIndex};
use crate::no_leakage;
use crate::sigtest::{
    mcnemar_exact, stratified_randomization_test, PairedBinaryOutcomes, StratifiedScores,
};

#[derive(Parser)]
#[command(
    name = "corefkit",
    version,
    about = "Coreference toolkit: no-leakage corpus perturbation, scoring, significance tests, and a small adversarially trained model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replace PER/GPE names in a corpus so none leak from a training set
    Perturb(PerturbArgs),
    /// Score predicted coreference against gold (MUC, B-cubed, CEAF-e, CoNLL F1)
    Score(ScoreArgs),
    /// Score pronoun-resolution predictions with per-gender F1 and bias
    GapScore(GapScoreArgs),
    /// Significance tests between two systems
    #[command(subcommand)]
    Sigtest(SigtestCommand),
    /// Head-name leakage rate between a training and a test corpus
    Leakage(LeakageArgs),
    /// Train the toy model with the adversarial objective
    TrainToy(TrainToyArgs),
    /// Verify analytic gradients against central finite differences
    GradCheck(GradCheckArgs),
}

#[derive(Args)]
struct PerturbArgs {
    /// Input corpus in the CoNLL column format
    #[arg(long = "in")]
    input: PathBuf,
    /// Output path for the perturbed corpus
    #[arg(long)]
    out: PathBuf,
    /// Census-style last-name file
    #[arg(long)]
    census: PathBuf,
    /// First-name file (name<TAB>male_proportion)
    #[arg(long)]
    first_names: PathBuf,
    /// GeoNames dump for GPE replacement; GPE names are left alone without it
    #[arg(long)]
    geonames: Option<PathBuf>,
    /// Training names to exclude, one per line
    #[arg(long)]
    train_names: Option<PathBuf>,
    /// Training corpus to collect head names from, as an alternative to --train-names
    #[arg(long)]
    train_corpus: Option<PathBuf>,
    /// Sampler seed; the same seed reproduces the output byte for byte
    #[arg(long)]
    seed: u64,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    /// Also write per-document statistics usable by `sigtest randomization`
    #[arg(long)]
    stats_out: Option<PathBuf>,
}

#[derive(Args)]
struct GapScoreArgs {
    /// Gold examples in the GAP TSV format
    #[arg(long)]
    gold: PathBuf,
    /// Predictions: TSV rows `ID<TAB>A-pred<TAB>B-pred` with TRUE/FALSE
    #[arg(long)]
    pred: PathBuf,
}

#[derive(Subcommand)]
enum SigtestCommand {
    /// Exact two-sided McNemar test from discordant-pair counts
    Mcnemar(McnemarArgs),
    /// Stratified approximate randomization test over per-document statistics
    Randomization(RandomizationArgs),
}

#[derive(Args)]
struct McnemarArgs {
    /// Instances where system A is correct and system B wrong
    #[arg(long)]
    b: u64,
    /// Instances where system B is correct and system A wrong
    #[arg(long)]
    c: u64,
}

#[derive(Args)]
struct RandomizationArgs {
    /// Per-document statistics of system A (written by `score --stats-out`)
    #[arg(long)]
    stats_a: PathBuf,
    /// Per-document statistics of system B
    #[arg(long)]
    stats_b: PathBuf,
    #[arg(long, default_value_t = 9999)]
    rounds: usize,
    #[arg(long)]
    seed: u64,
}

#[derive(Args)]
struct LeakageArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
}

#[derive(Args)]
struct TrainToyArgs {
    /// Toy dataset file; the built-in demo corpus is used when omitted
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    iterations: usize,
    #[arg(long, default_value_t = 0.1)]
    step: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.6)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
}

#[derive(Args)]
struct GradCheckArgs {
    #[arg(long, default_value_t = 0.6)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
}

enum CliError {
    Validation(String),
    Runtime(String),
}

fn runtime<E: std::fmt::Display>(err: E) -> CliError {
    CliError::Runtime(err.to_string())
}

/// Parses the arguments and runs the selected subcommand, returning the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            2
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Perturb(args) => perturb(args),
        Command::Score(args) => score(args),
        Command::GapScore(args) => gap_score(args),
        Command::Sigtest(SigtestCommand::Mcnemar(args)) => {
            let p = mcnemar_exact(PairedBinaryOutcomes { b: args.b, c: args.c });
            println!("p={p:.4}");
            Ok(())
        }
        Command::Sigtest(SigtestCommand::Randomization(args)) => randomization(args),
        Command::Leakage(args) => leakage(args),
        Command::TrainToy(args) => train_toy(args),
        Command::GradCheck(args) => grad_check(args),
    }
}

/// Resolves a resource path, trying `COREFKIT_RESOURCES` for relative
/// paths that do not exist as given.
fn resolve_resource(path: &Path) -> PathBuf {
    if path.is_relative() && !path.exists() {
        if let Ok(dir) = std::env::var("COREFKIT_RESOURCES") {
            let joined = Path::new(&dir).join(path);
            if joined.exists() {
                return joined;
            }
        }
    }
    path.to_path_buf()
}

fn read_file(path: &Path) -> Result<String, CliError> {
    let path = resolve_resource(path);
    if !path.exists() {
        return Err(CliError::Validation(format!(
            "{} does not exist",
            path.display()
        )));
    }
    fs::read_to_string(&path)
        .map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", path.display())))
}

fn read_corpus(path: &Path) -> Result<Vec<Document>, CliError> {
    conll_io::parse_document(&read_file(path)?)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn write_atomic(path: &Path, content: &str) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(runtime)?;
    tmp.write_all(content.as_bytes()).map_err(runtime)?;
    tmp.persist(path).map_err(runtime)?;
    Ok(())
}

fn perturb(args: PerturbArgs) -> Result<(), CliError> {
    let docs = read_corpus(&args.input)?;
    let last = gazetteer::load_census_last_names(&read_file(&args.census)?).map_err(runtime)?;
    let (male, female) =
        gazetteer::load_first_names(&read_file(&args.first_names)?).map_err(runtime)?;
    let geo = match &args.geonames {
        Some(path) => gazetteer::load_geonames(&read_file(path)?).map_err(runtime)?,
        None => GeoNameIndex::default(),
    };
    let mut gaz = GazetteerSet {
        last,
        male,
        female,
        geo,
    };

    let mut train_names: HashSet<String> = HashSet::new();
    if let Some(path) = &args.train_names {
        train_names.extend(gazetteer::load_training_names(&read_file(path)?));
    }
    if let Some(path) = &args.train_corpus {
        for doc in read_corpus(path)? {
            for name in cluster_head_names(&doc) {
                for token in name.split_whitespace() {
                    train_names.insert(token.to_string());
                }
                train_names.insert(name);
            }
        }
    }
    if !train_names.is_empty() {
        gaz = gaz.filter_training_names(&train_names);
    }

    let (perturbed, warnings) =
        no_leakage::perturb_corpus(&docs, &gaz, args.seed).map_err(runtime)?;
    for warning in &warnings {
        eprintln!("warning: {warning}");
    }
    write_atomic(&args.out, &conll_io::serialize_corpus(&perturbed))
}

fn score(args: ScoreArgs) -> Result<(), CliError> {
    let gold = read_corpus(&args.gold)?;
    let pred = read_corpus(&args.pred)?;
    let per_doc = coref_metrics::corpus_stats(&gold, &pred).map_err(runtime)?;
    let stats: Vec<[f64; 11]> = per_doc.values().copied().collect();
    print!("{}", format_score_report(&pool_stats(&stats)));
    if let Some(path) = &args.stats_out {
        write_atomic(path, &render_stats_file(&per_doc))?;
    }
    Ok(())
}

fn render_stats_file(per_doc: &BTreeMap<(String, usize), [f64; 11]>) -> String {
    let mut out = String::new();
    for ((key, part), stats) in per_doc {
        out.push_str(&format!("doc={key}#{part}\n"));
        for (name, value) in CONLL_STAT_KEYS.iter().zip(stats.iter()) {
            out.push_str(&format!("{name}={value}\n"));
        }
        out.push('\n');
    }
    out
}

/// Parses a per-document statistics file: blocks starting with `doc=<id>`
/// followed by one `key=value` line per statistic.
fn parse_stats_file(text: &str, path: &Path) -> Result<Vec<(String, Vec<f64>)>, CliError> {
    let bad = |line: usize, reason: String| {
        CliError::Runtime(format!("{}:{line}: {reason}", path.display()))
    };
    let mut strata: Vec<(String, Vec<f64>)> = Vec::new();
    let mut current: Option<(String, BTreeMap<String, f64>)> = None;
    let close = |current: &mut Option<(String, BTreeMap<String, f64>)>,
                     strata: &mut Vec<(String, Vec<f64>)>,
                     line: usize|
     -> Result<(), CliError> {
        if let Some((id, map)) = current.take() {
            let mut stats = Vec::with_capacity(CONLL_STAT_KEYS.len());
            for key in CONLL_STAT_KEYS {
                let value = map
                    .get(key)
                    .ok_or_else(|| bad(line, format!("document {id:?} is missing {key}")))?;
                stats.push(*value);
            }
            strata.push((id, stats));
        }
        Ok(())
    };
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let lineno = i + 1;
        if line.is_empty() {
            continue;
        }
        if let Some(id) = line.strip_prefix("doc=") {
            close(&mut current, &mut strata, lineno)?;
            current = Some((id.to_string(), BTreeMap::new()));
        } else if let Some((key, value)) = line.split_once('=') {
            let (_, map) = current
                .as_mut()
                .ok_or_else(|| bad(lineno, "statistic before any doc= line".into()))?;
            let parsed: f64 = value
                .trim()
                .parse()
                .map_err(|_| bad(lineno, format!("non-numeric value {value:?}")))?;
            map.insert(key.trim().to_string(), parsed);
        } else {
            return Err(bad(lineno, format!("unrecognized line {line:?}")));
        }
    }
    close(&mut current, &mut strata, text.lines().count())?;
    if strata.is_empty() {
        return Err(CliError::Runtime(format!(
            "{}: no document blocks found",
            path.display()
        )));
    }
    Ok(strata)
}

fn randomization(args: RandomizationArgs) -> Result<(), CliError> {
    let a = parse_stats_file(&read_file(&args.stats_a)?, &args.stats_a)?;
    let b = parse_stats_file(&read_file(&args.stats_b)?, &args.stats_b)?;
    let b_by_id: BTreeMap<&str, &Vec<f64>> =
        b.iter().map(|(id, s)| (id.as_str(), s)).collect();
    let mut system_a = Vec::with_capacity(a.len());
    let mut system_b = Vec::with_capacity(a.len());
    for (id, stats) in &a {
        let other = b_by_id.get(id.as_str()).ok_or_else(|| {
            CliError::Runtime(format!(
                "document {id:?} present in {} but not in {}",
                args.stats_a.display(),
                args.stats_b.display()
            ))
        })?;
        system_a.push(stats.clone());
        system_b.push((*other).clone());
    }
    if a.len() != b.len() {
        return Err(CliError::Runtime(format!(
            "{} has {} documents, {} has {}",
            args.stats_a.display(),
            a.len(),
            args.stats_b.display(),
            b.len()
        )));
    }
    let scores = StratifiedScores {
        system_a: &system_a,
        system_b: &system_b,
        metric: |pooled: &[f64]| {
            let mut stats = [0.0; 11];
            stats.copy_from_slice(pooled);
            conll_f1_from_stats(&stats)
        },
    };
    let p = stratified_randomization_test(&scores, args.rounds, args.seed).map_err(runtime)?;
    println!("p={p:.4}");
    Ok(())
}

fn gap_score(args: GapScoreArgs) -> Result<(), CliError> {
    let examples = gap_eval::parse_gap(&read_file(&args.gold)?).map_err(runtime)?;
    let raw = read_file(&args.pred)?;
    let mut by_id: BTreeMap<String, (bool, bool)> = BTreeMap::new();
    for (i, line) in raw.lines().enumerate() {
        if line.trim().is_empty() || (i == 0 && line.starts_with("ID\t")) {
            continue;
        }
        let lineno = i + 1;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(CliError::Runtime(format!(
                "{}:{lineno}: expected ID<TAB>A-pred<TAB>B-pred",
                args.pred.display()
            )));
        }
        let parse = |field: &str| match field.trim() {
            "TRUE" | "True" | "true" => Ok(true),
            "FALSE" | "False" | "false" => Ok(false),
            other => Err(CliError::Runtime(format!(
                "{}:{lineno}: expected TRUE/FALSE, found {other:?}",
                args.pred.display()
            ))),
        };
        by_id.insert(fields[0].to_string(), (parse(fields[1])?, parse(fields[2])?));
    }
    let predictions: Vec<(bool, bool)> = examples
        .iter()
        .map(|ex| {
            by_id.get(&ex.id).copied().ok_or_else(|| {
                CliError::Runtime(format!("no prediction for example {:?}", ex.id))
            })
        })
        .collect::<Result<_, _>>()?;
    let report = gap_eval::gap_report(&examples, &predictions).map_err(runtime)?;
    print!("{}", gap_eval::format_gap_report(&report));
    Ok(())
}

fn leakage(args: LeakageArgs) -> Result<(), CliError> {
    let train = read_corpus(&args.train)?;
    let test = read_corpus(&args.test)?;
    let rate = leakage_rate(&train, &test).map_err(runtime)?;
    println!("leakage_rate={rate:.4}");
    Ok(())
}

fn load_toy_docs(path: &Option<PathBuf>) -> Result<Vec<ToyDocument>, CliError> {
    match path {
        Some(p) => adv_coref::parse_toy_dataset(&read_file(p)?)
            .map_err(|e| CliError::Runtime(format!("{}: {e}", p.display()))),
        None => Ok(adv_coref::demo_dataset()),
    }
}

fn train_toy(args: TrainToyArgs) -> Result<(), CliError> {
    if !(0.0..=1.0).contains(&args.alpha) {
        return Err(CliError::Validation(format!(
            "alpha must be in [0, 1], got {}",
            args.alpha
        )));
    }
    if args.epsilon < 0.0 {
        return Err(CliError::Validation(format!(
            "epsilon must be nonnegative, got {}",
            args.epsilon
        )));
    }
    let docs = load_toy_docs(&args.data)?;
    let vocab = Vocab::build(&docs);
    let config = ModelConfig::toy(vocab.len());
    let dataset: Vec<PreparedDoc> = docs
        .iter()
        .map(|d| adv_coref::prepare_document(d, &vocab, config.max_width))
        .collect::<Result<_, _>>()
        .map_err(runtime)?;
    let cfg = AdvConfig {
        alpha: args.alpha,
        epsilon: args.epsilon,
    };
    let result = adv_coref::train(&dataset, config, &cfg, args.iterations, args.step, args.seed)
        .map_err(runtime)?;
    println!("# iteration base adversarial total");
    for (i, point) in result.curve.iter().enumerate() {
        println!(
            "{i} {:.6} {:.6} {:.6}",
            point.base, point.adversarial, point.total
        );
    }
    Ok(())
}

fn grad_check(args: GradCheckArgs) -> Result<(), CliError> {
    let (doc, params) = adv_coref::seed0_fixture();
    let cfg = AdvConfig {
        alpha: args.alpha,
        epsilon: args.epsilon,
    };
    let report = adv_coref::gradient_check(&doc, &params, &cfg).map_err(runtime)?;
    for (group, err) in &report.per_group {
        println!("group={group} max_rel_err={err:.3e}");
    }
    println!("max_relative_error={:.3e}", report.max_relative_error);
    if report.max_relative_error >= 1e-4 {
        return Err(CliError::Runtime(format!(
            "gradient check failed: max relative error {:.3e} >= 1e-4",
            report.max_relative_error
        )));
    }
    Ok(())
}
