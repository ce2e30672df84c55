use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use querytax_core::pipeline::{self, PipelineConfig, Stage};
use querytax_core::synth::{self, SynthConfig};
use querytax_core::{ingest, Error};

#[derive(Parser)]
#[command(
    name = "querytax",
    version,
    about = "Mine hyponymy relations from search query logs"
)]
struct Cli {
    /// Configuration file with `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override one configuration key, e.g. `--set max_timespan=900`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Output directory (overrides `out_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for the parallel stages.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse input logs into records.tsv.
    Ingest,
    /// Split records into topical sessions.
    Sessionize,
    /// Remove navigational queries, spam and automated users.
    Filter,
    /// Build the query, session and n-gram indices.
    Index,
    /// Train the specialization/generalization cascade.
    Train,
    /// Detect specialization patterns.
    Detect,
    /// Extract weighted hyponymy relations.
    Extract,
    /// Sample for judges, verify against the graph and compute metrics.
    Evaluate,
    /// Run every stage in order.
    Pipeline,
    /// Summarize the artifacts in the output directory.
    Stats,
    /// Write a synthetic log with planted relations.
    Synth {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 100_000)]
        queries: usize,
        #[arg(long, default_value_t = 50)]
        planted: usize,
        #[arg(long, default_value_t = 90)]
        labeled: usize,
        #[arg(long, default_value_t = 5)]
        bots: usize,
    },
}

const PATH_KEYS: [&str; 9] = [
    "input",
    "counts",
    "site_names",
    "domain_suffixes",
    "url_markers",
    "labeled_pairs",
    "graph",
    "judgments",
    "out_dir",
];

/// Relative paths in a config file are taken relative to the file itself.
fn rebase_paths(table: &mut toml::Table, base: &Path) {
    let rebase = |v: &mut toml::Value| {
        if let toml::Value::String(s) = v {
            if Path::new(s.as_str()).is_relative() {
                *s = base.join(s.as_str()).to_string_lossy().into_owned();
            }
        }
    };
    for key in PATH_KEYS {
        match table.get_mut(key) {
            Some(toml::Value::Array(items)) => items.iter_mut().for_each(rebase),
            Some(v) => rebase(v),
            None => {}
        }
    }
}

fn load_config(cli: &Cli) -> anyhow::Result<PipelineConfig> {
    let mut table = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound => Error::MissingArtifact(path.clone()),
                _ => Error::Io(e),
            })?;
            let mut table = text
                .parse::<toml::Table>()
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            rebase_paths(&mut table, path.parent().unwrap_or(Path::new("")));
            table
        }
        None => toml::Table::new(),
    };
    for item in &cli.overrides {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{item}` is not KEY=VALUE")))?;
        let key = key.trim();
        let value = value.trim();
        // bare words are taken as strings
        let parsed = format!("v = {value}")
            .parse::<toml::Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(value.to_string()));
        table.insert(key.to_string(), parsed);
    }
    let mut cfg: PipelineConfig = table
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_synth(cli: &Cli, config: SynthConfig) -> anyhow::Result<()> {
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("synth"));
    std::fs::create_dir_all(&dir)?;
    let log = synth::generate(&config);
    let file = |name: &str| -> anyhow::Result<BufWriter<File>> {
        let path = dir.join(name);
        Ok(BufWriter::new(
            File::create(&path).with_context(|| format!("creating {}", path.display()))?,
        ))
    };
    ingest::write_generic(file("log.tsv")?, &log.records)?;
    synth::write_labeled(file("labeled.tsv")?, &log.labeled)?;
    synth::write_graph(file("graph.tsv")?, &log.graph)?;
    synth::write_planted(file("planted.tsv")?, &log.planted)?;
    println!(
        "synth: {} records, {} planted relations, {} labeled pairs written to {}",
        log.records.len(),
        log.planted.len(),
        log.labeled.len(),
        dir.display()
    );
    Ok(())
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    if let Command::Synth {
        seed,
        queries,
        planted,
        labeled,
        bots,
    } = cli.command
    {
        let config = SynthConfig {
            seed,
            target_queries: queries,
            planted,
            labeled_pairs: labeled,
            bots,
            noise_vocabulary: (queries / 25).clamp(50, 4000),
            ..Default::default()
        };
        return write_synth(cli, config);
    }
    let cfg = load_config(cli)?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let stage = match &cli.command {
        Command::Ingest => Stage::Ingest,
        Command::Sessionize => Stage::Sessionize,
        Command::Filter => Stage::Filter,
        Command::Index => Stage::Index,
        Command::Train => Stage::Train,
        Command::Detect => Stage::Detect,
        Command::Extract => Stage::Extract,
        Command::Evaluate => Stage::Evaluate,
        Command::Pipeline => {
            for line in pipeline::run_all(&cfg)? {
                println!("{line}");
            }
            return Ok(());
        }
        Command::Stats => {
            print!("{}", pipeline::stats(&cfg)?);
            return Ok(());
        }
        Command::Synth { .. } => unreachable!(),
    };
    println!("{}", stage.run(&cfg)?);
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Config(_)) => 2,
        Some(Error::MissingArtifact(_)) => 3,
        Some(Error::Data(_) | Error::Contract(_)) => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
