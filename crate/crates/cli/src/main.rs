//! `tle` command line: synthetic corpus generation, training, evaluation,
//! attention reporting and embedding export.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use tle_core::corpus::{ingest, IngestConfig};
use tle_core::eval::{evaluate, generate_synthetic, load_labels, RelevancePattern, SyntheticSpec};
use tle_core::params::{
    export_embeddings, load_checkpoint, load_pretrained_words, save_checkpoint, AdamHyper,
    ExportKind,
};
use tle_core::trainer::{config_digest, train, TrainMode};
use tle_core::{AttentionMode, Error, TrainConfig};

#[derive(Parser)]
#[command(
    name = "tle",
    version,
    about = "Timeline embeddings: train tweet/user vectors with word, temporal and user context"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train embeddings on a timeline corpus
    Train(TrainArgs),
    /// Evaluate a trained model on labeled entities
    Eval(EvalArgs),
    /// Generate a synthetic corpus with entity labels
    GenSynthetic(GenArgs),
    /// Print attention diagnostics recorded by a training run
    ReportAttention(ReportArgs),
    /// Export an embedding table as text vectors
    Export(ExportArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Timeline corpus file (TSV or JSON lines)
    #[arg(long)]
    corpus: PathBuf,

    /// Embedding dimension n
    #[arg(long, default_value_t = 200)]
    dim: usize,

    /// Word context window C_W
    #[arg(long, default_value_t = 10)]
    cw: usize,

    /// Temporal context size C_T; values tried in the reference sweep are
    /// {1, 2, 4, 6, 8, 10, 12, 14, 16}
    #[arg(long, default_value_t = 2)]
    ct: usize,

    /// Training epochs
    #[arg(long, default_value_t = 5)]
    epochs: usize,

    /// Adam learning rate
    #[arg(long, default_value_t = 0.001)]
    lr: f64,

    /// Include the user vector in the temporal model (0 or 1)
    #[arg(long, value_parser = clap::value_parser!(u8).range(0..=1), default_value_t = 1)]
    use_user: u8,

    /// Attention over temporal context
    #[arg(long, value_parser = parse_attention, default_value = "learned")]
    attention: AttentionMode,

    /// Pretrained word vectors (text format); matching words are copied in
    #[arg(long)]
    pretrained_words: Option<PathBuf>,

    /// Drop words seen fewer times than this
    #[arg(long, default_value_t = 1)]
    min_count: u64,

    /// Seed for initialization and shuffling
    #[arg(long, default_value_t = 42)]
    seed: u64,

    /// Worker threads; more than one selects throughput mode
    #[arg(long, default_value_t = 1)]
    workers: usize,

    /// Force the bitwise-reproducible single-writer contract
    #[arg(long)]
    deterministic: bool,

    /// Output directory for checkpoint and reports
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Corpus the model was trained on
    #[arg(long)]
    corpus: PathBuf,

    /// Entity label file
    #[arg(long)]
    labels: PathBuf,

    /// Trained checkpoint
    #[arg(long)]
    model: PathBuf,

    /// Drop words seen fewer times than this (must match training)
    #[arg(long, default_value_t = 1)]
    min_count: u64,

    /// Seed for the user-level split
    #[arg(long, default_value_t = 42)]
    seed: u64,

    /// Results JSON path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenArgs {
    /// Output directory for corpus.tsv and labels.tsv
    #[arg(long)]
    out: PathBuf,

    #[arg(long, default_value_t = 20)]
    users: usize,

    #[arg(long, default_value_t = 50)]
    tweets_per_user: usize,

    #[arg(long, default_value_t = 2)]
    topics: usize,

    #[arg(long, default_value_t = 50)]
    words_per_topic: usize,

    #[arg(long, default_value_t = 8)]
    tokens_per_tweet: usize,

    /// Consecutive same-topic tweets per block
    #[arg(long, default_value_t = 5)]
    block_len: usize,

    /// Which context offsets share the target's topic: `blocks` or `nearest`
    #[arg(long, value_parser = parse_relevance, default_value = "blocks")]
    relevance: RelevancePattern,

    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct ReportArgs {
    /// Training run directory containing the attention reports
    #[arg(long)]
    run: PathBuf,
}

#[derive(Args)]
struct ExportArgs {
    /// Trained checkpoint
    #[arg(long)]
    model: PathBuf,

    /// Corpus the model was trained on (supplies ids)
    #[arg(long)]
    corpus: PathBuf,

    /// Drop words seen fewer times than this (must match training)
    #[arg(long, default_value_t = 1)]
    min_count: u64,

    /// Table to export: words, tweets or users
    #[arg(long, value_parser = parse_export_kind)]
    which: ExportKind,

    /// Output vector file
    #[arg(long)]
    out: PathBuf,
}

fn parse_attention(s: &str) -> Result<AttentionMode, String> {
    s.parse()
}

fn parse_relevance(s: &str) -> Result<RelevancePattern, String> {
    s.parse()
}

fn parse_export_kind(s: &str) -> Result<ExportKind, String> {
    s.parse()
}

fn echo_config(command: &str, config: &impl serde::Serialize, hash: u64) {
    let echo = json!({
        "command": command,
        "config": config,
        "config_hash": format!("{hash:016x}"),
    });
    println!("{echo}");
}

fn hash_of(config: &impl serde::Serialize) -> u64 {
    config_digest(config)
}

fn write_file(path: &Path, contents: &str) -> Result<(), Error> {
    std::fs::write(path, contents).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

fn run_train(args: TrainArgs) -> Result<(), Error> {
    let mode = if args.deterministic || args.workers == 1 {
        TrainMode::Deterministic
    } else {
        TrainMode::Throughput
    };
    let config = TrainConfig {
        dim: args.dim,
        cw: args.cw,
        ct: args.ct,
        epochs: args.epochs,
        hyper: AdamHyper::with_lr(args.lr),
        use_user: args.use_user == 1,
        attention_mode: args.attention,
        seed: args.seed,
        mode,
        workers: args.workers,
        ..Default::default()
    };
    config.validate()?;
    let hash = config.config_hash();
    echo_config("train", &config, hash);

    let ingest_config = IngestConfig {
        min_count: args.min_count,
        ..Default::default()
    };
    let corpus = ingest(&args.corpus, &ingest_config)?;
    let pretrained = args
        .pretrained_words
        .as_deref()
        .map(load_pretrained_words)
        .transpose()?;

    let out = train(&corpus, &config, pretrained.as_ref())?;

    std::fs::create_dir_all(&args.out).map_err(|e| Error::Data(e.to_string()))?;
    save_checkpoint(
        &out.store,
        &out.adam,
        config.seed,
        hash,
        &args.out.join("checkpoint.tle"),
    )?;
    write_file(&args.out.join("loss_curve.csv"), &out.losses.to_csv())?;
    write_file(&args.out.join("attention.csv"), &out.attention.to_csv())?;
    write_file(
        &args.out.join("attention_full_context.csv"),
        &out.attention.full_context_csv(),
    )?;
    write_file(
        &args.out.join("config.json"),
        &serde_json::to_string_pretty(&config).expect("config serializes"),
    )?;

    let totals = out.losses.epoch_totals();
    eprintln!(
        "trained {} epochs on {} tweets / {} users; mean loss {} -> {}",
        config.epochs,
        corpus.tweets.len(),
        corpus.users.len(),
        totals.first().copied().unwrap_or(0.0),
        totals.last().copied().unwrap_or(0.0),
    );
    Ok(())
}

fn run_eval(args: EvalArgs) -> Result<(), Error> {
    let eval_config = json!({
        "corpus": args.corpus,
        "labels": args.labels,
        "model": args.model,
        "min_count": args.min_count,
        "seed": args.seed,
    });
    echo_config("eval", &eval_config, hash_of(&eval_config));

    let ingest_config = IngestConfig {
        min_count: args.min_count,
        ..Default::default()
    };
    let corpus = ingest(&args.corpus, &ingest_config)?;
    let checkpoint = load_checkpoint(&args.model)?;
    if checkpoint.store.shapes.tweets != corpus.tweets.len() {
        return Err(Error::Data(format!(
            "checkpoint was trained on {} tweets but the corpus has {}",
            checkpoint.store.shapes.tweets,
            corpus.tweets.len()
        )));
    }
    let records = load_labels(&args.labels)?;
    let results = evaluate(
        &checkpoint.store.tweet_vectors,
        &corpus,
        records,
        args.seed,
        checkpoint.config_hash,
    )?;
    let rendered = serde_json::to_string_pretty(&results).expect("results serialize");
    write_file(&args.out, &rendered)?;
    println!("{rendered}");
    Ok(())
}

fn run_gen(args: GenArgs) -> Result<(), Error> {
    let spec = SyntheticSpec {
        users: args.users,
        tweets_per_user: args.tweets_per_user,
        topics: args.topics,
        words_per_topic: args.words_per_topic,
        tokens_per_tweet: args.tokens_per_tweet,
        block_len: args.block_len,
        relevance: args.relevance,
        seed: args.seed,
    };
    echo_config("gen-synthetic", &spec, hash_of(&spec));
    let files = generate_synthetic(&spec)?;
    let (corpus_path, labels_path) = files.write_to(&args.out)?;
    eprintln!(
        "wrote {} and {}",
        corpus_path.display(),
        labels_path.display()
    );
    Ok(())
}

fn run_report(args: ReportArgs) -> Result<(), Error> {
    let report_config = json!({ "run": args.run });
    echo_config("report-attention", &report_config, hash_of(&report_config));

    let read = |name: &str| -> Result<Vec<Vec<String>>, Error> {
        let path = args.run.join(name);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        Ok(text
            .lines()
            .skip(1)
            .map(|l| l.split(',').map(str::to_string).collect())
            .collect())
    };
    let all = read("attention.csv")?;
    let full = read("attention_full_context.csv")?;
    if all.len() != full.len() {
        return Err(Error::Data(
            "attention reports disagree on row count".to_string(),
        ));
    }
    println!("epoch,offset,mean_attention,sample_count,full_context_mean,full_context_count");
    for (a, f) in all.iter().zip(&full) {
        if a.len() != 4 || f.len() != 4 {
            return Err(Error::Data("malformed attention report row".to_string()));
        }
        println!("{},{},{},{},{},{}", a[0], a[1], a[2], a[3], f[2], f[3]);
    }
    Ok(())
}

fn run_export(args: ExportArgs) -> Result<(), Error> {
    let export_config = json!({
        "model": args.model,
        "corpus": args.corpus,
        "which": format!("{:?}", args.which).to_lowercase(),
        "min_count": args.min_count,
        "out": args.out,
    });
    echo_config("export", &export_config, hash_of(&export_config));

    let ingest_config = IngestConfig {
        min_count: args.min_count,
        ..Default::default()
    };
    let corpus = ingest(&args.corpus, &ingest_config)?;
    let checkpoint = load_checkpoint(&args.model)?;
    let ids: Vec<String> = match args.which {
        ExportKind::Words => corpus.vocab.words().to_vec(),
        ExportKind::Tweets => corpus.tweets.iter().map(|t| t.tweet_id.clone()).collect(),
        ExportKind::Users => corpus.users.iter().map(|u| u.user_id.clone()).collect(),
    };
    export_embeddings(&checkpoint.store, args.which, &ids, &args.out)?;
    eprintln!("wrote {}", args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Usage problems exit 1; --help and --version exit 0.
            let _ = err.print();
            return if err.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };

    let result = match cli.command {
        Command::Train(args) => run_train(args),
        Command::Eval(args) => run_eval(args),
        Command::GenSynthetic(args) => run_gen(args),
        Command::ReportAttention(args) => run_report(args),
        Command::Export(args) => run_export(args),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            if err.is_numerical_error() {
                ExitCode::from(3)
            } else if matches!(err, Error::Config(_)) {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
