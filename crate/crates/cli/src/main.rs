//! `pwsem`: segment password corpora into semantic factors, train and
//! smooth grammars over them, enumerate guesses, evaluate cracking
//! coverage, and compare corpora.
//!
//! Data goes to `--out` (or standard output); progress and summaries go to
//! standard error. All randomness flows from `--seed`.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use pwsem_core::analytics::{distribution, similarity_matrix, Level, SimilarityMode};
use pwsem_core::corpus::{load_bundle, load_password_file, ResourceBundle};
use pwsem_core::evaluator::{attack, estimate_coverage_mc};
use pwsem_core::format::{load_grammar, save_grammar, GRAMMAR_FORMAT_VERSION};
use pwsem_core::generator::{estimate_rank, generate};
use pwsem_core::model::{PasswordRecord, Segmentation, Sft, SmoothedGrammar, Universe};
use pwsem_core::segmenter::segment_corpus;
use pwsem_core::trainer::{
    default_universes, estimate_osf_weights_with, smooth_with_defaults, train, MeanMode, Weighting,
};

fn version_string() -> String {
    format!(
        "{} (grammar format {})",
        env!("CARGO_PKG_VERSION"),
        GRAMMAR_FORMAT_VERSION
    )
}

#[derive(Parser)]
#[command(
    name = "pwsem",
    version = version_string(),
    about = "Password semantics toolkit: segmentation, grammar training, guess enumeration, coverage evaluation and corpus analytics",
    arg_required_else_help = true
)]
struct Cli {
    /// Worker threads for batch stages (0 = one per core). Results are
    /// identical for any thread count.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment passwords into (factor, type) parts, one line per password.
    Segment(SegmentArgs),
    /// Train a grammar from a corpus and smooth it for unseen factors.
    Train(TrainArgs),
    /// Enumerate guesses from a grammar in descending probability order.
    Generate(GenerateArgs),
    /// Simulate a real attack against a target corpus and report coverage.
    Attack(AttackArgs),
    /// Estimate guess ranks or coverage by Monte Carlo sampling.
    Estimate(EstimateArgs),
    /// Corpus distributions at a chosen semantic level.
    Analyze(AnalyzeArgs),
    /// Pairwise similarity matrix of two or more corpora.
    Similarity(SimilarityArgs),
}

#[derive(Args)]
struct SegmentArgs {
    /// Password corpus: one password per line, or `password<TAB>count`.
    #[arg(long)]
    corpus: PathBuf,
    /// Resource manifest (key=path lines).
    #[arg(long)]
    bundle: PathBuf,
    /// Output file; `-` or omitted for standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    bundle: PathBuf,
    /// Grammar output file.
    #[arg(long)]
    out: PathBuf,
    /// Training-set split ratio used to estimate OSF weights.
    #[arg(long, default_value_t = 0.5)]
    ratio: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// user: duplicate-counted; unique: one vote per distinct password.
    #[arg(long, default_value = "user")]
    weighting: Weighting,
    /// How shared-factor probabilities are averaged: arithmetic|weighted.
    #[arg(long, default_value = "arithmetic")]
    mean: MeanMode,
    /// Skip smoothing and write the raw grammar.
    #[arg(long)]
    no_smooth: bool,
    /// Extra universe file overriding the defaults per SFT
    /// (`SFT<TAB>factor` or `SFT<TAB>@digits|@symbols<TAB>n` lines).
    #[arg(long)]
    universes: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    grammar: PathBuf,
    #[arg(long)]
    max_guesses: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Append `<TAB>probability` to every guess.
    #[arg(long)]
    with_prob: bool,
    /// Suppress repeated guess strings (derivations of equal text).
    #[arg(long)]
    dedup: bool,
}

#[derive(Args)]
struct AttackArgs {
    #[arg(long)]
    grammar: PathBuf,
    #[arg(long)]
    target: PathBuf,
    #[arg(long)]
    max_guesses: u64,
    /// Comma-separated guess counts; default: powers of 10 from 1000 up to
    /// the budget.
    #[arg(long)]
    checkpoints: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    grammar: PathBuf,
    #[arg(long)]
    bundle: PathBuf,
    /// Estimate the rank of one or more passwords.
    #[arg(long, conflicts_with = "target")]
    password: Vec<String>,
    /// Estimate coverage of a whole target corpus.
    #[arg(long)]
    target: Option<PathBuf>,
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Guess budget for coverage estimation.
    #[arg(long)]
    max_guesses: Option<u64>,
    #[arg(long)]
    checkpoints: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// One or more corpus files merged into a single corpus.
    #[arg(long, required = true, num_args = 1..)]
    corpus: Vec<PathBuf>,
    #[arg(long)]
    bundle: PathBuf,
    /// sf | sft | sft-group | sp | spl
    #[arg(long)]
    level: Level,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimilarityArgs {
    /// Two or more corpus files.
    #[arg(long, required = true, num_args = 2..)]
    corpora: Vec<PathBuf>,
    #[arg(long)]
    bundle: PathBuf,
    /// sft | sf-sft
    #[arg(long, default_value = "sft")]
    mode: SimilarityMode,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> std::process::ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
        {
            eprintln!("error: cannot configure {} threads: {e}", cli.threads);
            return std::process::ExitCode::from(1);
        }
    }
    match run(cli.command) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Segment(args) => cmd_segment(args),
        Command::Train(args) => cmd_train(args),
        Command::Generate(args) => cmd_generate(args),
        Command::Attack(args) => cmd_attack(args),
        Command::Estimate(args) => cmd_estimate(args),
        Command::Analyze(args) => cmd_analyze(args),
        Command::Similarity(args) => cmd_similarity(args),
    }
}

/// `--out` handling: `-` or absence selects standard output.
fn open_out(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    match path {
        Some(p) if p.as_os_str() != "-" => {
            let file =
                fs::File::create(p).with_context(|| format!("cannot create {}", p.display()))?;
            Ok(Box::new(BufWriter::new(file)))
        }
        _ => Ok(Box::new(BufWriter::new(std::io::stdout()))),
    }
}

fn read_corpus(path: &Path) -> Result<Vec<PasswordRecord>> {
    let records =
        load_password_file(path).with_context(|| format!("loading corpus {}", path.display()))?;
    if records.is_empty() {
        bail!("{}: corpus is empty", path.display());
    }
    Ok(records)
}

fn read_bundle(path: &Path) -> Result<ResourceBundle> {
    load_bundle(path).with_context(|| format!("loading bundle {}", path.display()))
}

fn segmented(path: &Path, bundle: &ResourceBundle) -> Result<Vec<(Segmentation, u64)>> {
    let records = read_corpus(path)?;
    Ok(segment_corpus(&records, bundle)?)
}

fn cmd_segment(args: SegmentArgs) -> Result<()> {
    let bundle = read_bundle(&args.bundle)?;
    let records = read_corpus(&args.corpus)?;
    let segs = segment_corpus(&records, &bundle)?;
    let mut out = open_out(&args.out)?;
    for (record, (seg, _)) in records.iter().zip(&segs) {
        writeln!(out, "{}\t{}", record.password(), seg)?;
    }
    out.flush()?;
    eprintln!("segmented {} passwords", records.len());
    Ok(())
}

/// Universe overrides: `SFT<TAB>factor` accumulates an explicit set;
/// `SFT<TAB>@digits<TAB>n` / `SFT<TAB>@symbols<TAB>n` select a generated
/// class. Entries replace the default universe of their SFT.
fn parse_universe_file(path: &Path) -> Result<BTreeMap<Sft, Universe>> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading universes {}", path.display()))?;
    let mut map: BTreeMap<Sft, Universe> = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let err = || format!("{}:{}: bad universe line", path.display(), lineno + 1);
        let sft: Sft = fields
            .first()
            .and_then(|t| t.parse().ok())
            .with_context(err)?;
        match fields.as_slice() {
            [_, "@digits", n] => {
                map.insert(sft, Universe::Digits(n.parse().with_context(err)?));
            }
            [_, "@symbols", n] => {
                map.insert(sft, Universe::Symbols(n.parse().with_context(err)?));
            }
            [_, factor] => {
                match map
                    .entry(sft)
                    .or_insert_with(|| Universe::Explicit(BTreeSet::new()))
                {
                    Universe::Explicit(set) => {
                        set.insert(factor.to_string());
                    }
                    _ => bail!("{}", err()),
                }
            }
            _ => bail!("{}", err()),
        }
    }
    Ok(map)
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    if !(args.ratio > 0.0 && args.ratio < 1.0) {
        bail!("--ratio must lie strictly between 0 and 1");
    }
    let bundle = read_bundle(&args.bundle)?;
    let records = read_corpus(&args.corpus)?;
    let grammar = train(&records, &bundle, args.weighting)?;
    let patterns = grammar.pattern_count();
    let sfts = grammar.sfts().count();

    let smoothed = if args.no_smooth {
        SmoothedGrammar::unsmoothed(grammar)
    } else {
        let weights =
            estimate_osf_weights_with(&records, args.ratio, &bundle, args.seed, args.mean)?;
        let mut universes = default_universes(&grammar, &bundle);
        if let Some(path) = &args.universes {
            for (sft, u) in parse_universe_file(path)? {
                universes.insert(sft, u);
            }
        }
        smooth_with_defaults(grammar, &weights, &universes)?
    };
    smoothed.check_normalization(1e-9)?;
    save_grammar(&smoothed, &args.out)?;
    eprintln!(
        "trained {} patterns over {} SFTs ({} smoothed) from {} records -> {}",
        patterns,
        sfts,
        smoothed.smoothed_sfts().count(),
        records.len(),
        args.out.display()
    );
    Ok(())
}

fn fmt_prob(p: f64) -> String {
    format!("{p:.16e}")
}

fn cmd_generate(args: GenerateArgs) -> Result<()> {
    let grammar = load_grammar(&args.grammar)?;
    let mut out = open_out(&args.out)?;
    let mut seen: HashSet<String> = HashSet::new();
    let emitted = generate(&grammar, args.max_guesses, |pw: &str, prob: f64| {
        if args.dedup && !seen.insert(pw.to_string()) {
            return Ok(());
        }
        if args.with_prob {
            writeln!(out, "{pw}\t{}", fmt_prob(prob))
        } else {
            writeln!(out, "{pw}")
        }
    })?;
    out.flush()?;
    eprintln!("emitted {emitted} guesses");
    Ok(())
}

fn parse_checkpoints(spec: &Option<String>, max_guesses: u64) -> Result<Vec<u64>> {
    let mut points = match spec {
        Some(list) => list
            .split(',')
            .map(|t| t.trim().parse::<u64>())
            .collect::<Result<Vec<u64>, _>>()
            .context("bad --checkpoints list")?,
        None => {
            // Powers of 10 from 1000 up to the budget.
            let mut points = Vec::new();
            let mut p = 1000u64;
            while p < max_guesses {
                points.push(p);
                p = p.saturating_mul(10);
            }
            points.push(max_guesses);
            points
        }
    };
    points.sort_unstable();
    points.dedup();
    Ok(points)
}

fn cmd_attack(args: AttackArgs) -> Result<()> {
    let grammar = load_grammar(&args.grammar)?;
    let target = read_corpus(&args.target)?;
    let checkpoints = parse_checkpoints(&args.checkpoints, args.max_guesses)?;
    let report = attack(&grammar, &target, args.max_guesses, &checkpoints)?;
    let mut out = open_out(&args.out)?;
    out.write_all(report.to_tsv().as_bytes())?;
    out.flush()?;
    let last = report.checkpoints.last().expect("at least one checkpoint");
    eprintln!(
        "attacked {} users / {} unique: r_po {:.4}, r_pa {:.4} at n={}",
        report.target_users, report.target_unique, last.r_po, last.r_pa, last.guesses
    );
    Ok(())
}

fn cmd_estimate(args: EstimateArgs) -> Result<()> {
    if args.samples == 0 {
        bail!("--samples must be at least 1");
    }
    let grammar = load_grammar(&args.grammar)?;
    let bundle = read_bundle(&args.bundle)?;
    let mut out = open_out(&args.out)?;
    if let Some(target) = &args.target {
        let records = read_corpus(target)?;
        let max = args
            .max_guesses
            .context("--max-guesses is required with --target")?;
        let checkpoints = parse_checkpoints(&args.checkpoints, max)?;
        let report = estimate_coverage_mc(
            &grammar,
            &records,
            &bundle,
            &checkpoints,
            args.samples,
            args.seed,
        )?;
        out.write_all(report.to_tsv().as_bytes())?;
        out.flush()?;
        return Ok(());
    }
    if args.password.is_empty() {
        bail!("provide --password PW (repeatable) or --target FILE");
    }
    writeln!(out, "password\tprobability\testimated_rank\tsamples")?;
    for pw in &args.password {
        let est = estimate_rank(&grammar, pw, &bundle, args.samples, args.seed)?;
        let rank = if est.estimated_rank.is_finite() {
            format!("{:.3}", est.estimated_rank)
        } else {
            "inf".to_string()
        };
        writeln!(
            out,
            "{pw}\t{}\t{rank}\t{}",
            fmt_prob(est.probability),
            est.sample_count
        )?;
    }
    out.flush()?;
    Ok(())
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<()> {
    let bundle = read_bundle(&args.bundle)?;
    let mut corpus = Vec::new();
    for path in &args.corpus {
        corpus.extend(segmented(path, &bundle)?);
    }
    let dist = distribution(&corpus, args.level)?;
    let mut out = open_out(&args.out)?;
    out.write_all(dist.to_tsv().as_bytes())?;
    out.flush()?;
    eprintln!("{} keys at level {:?}", dist.mass().len(), args.level);
    Ok(())
}

fn cmd_similarity(args: SimilarityArgs) -> Result<()> {
    let bundle = read_bundle(&args.bundle)?;
    let mut corpora = Vec::new();
    for path in &args.corpora {
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        corpora.push((label, segmented(path, &bundle)?));
    }
    let matrix = similarity_matrix(&corpora, args.mode)?;
    let mut out = open_out(&args.out)?;
    out.write_all(matrix.to_tsv().as_bytes())?;
    out.flush()?;
    Ok(())
}
