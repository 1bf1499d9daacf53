//! Command-line front end: benchmark generation, single training runs,
//! sweep matrices and report summaries. Every flag can also be supplied via
//! an environment variable with the `CLGRID_` prefix (e.g. `CLGRID_SETUP`).

use std::fs::File;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use clgrid::bench::{
    evaluate_run, format_table, load_records, run_experiment, summarize, ExperimentConfig,
};
use clgrid::clmethods::{run_continual_training, Method};
use clgrid::nnkit::save_checkpoint;
use clgrid::streamgen::{
    build_benchmark, make_task_ordering, write_manifest, BenchmarkCounts, Ordering,
    OrderingSource, Setup, TaskKey,
};
use clgrid::Result;

#[derive(Parser)]
#[command(name = "clgrid", about = "Continual imitation learning on a desk-scale grid world")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// Incremental setup: behavior or environment.
    #[arg(long, env = "CLGRID_SETUP", default_value = "behavior", value_parser = parse_setup)]
    setup: Setup,
    /// Benchmark construction seed.
    #[arg(long, env = "CLGRID_BENCHMARK_SEED", default_value_t = 0)]
    benchmark_seed: u64,
    /// Training episodes per task.
    #[arg(long, env = "CLGRID_TRAIN_COUNT", default_value_t = 300)]
    train_count: usize,
    #[arg(long, env = "CLGRID_VALID_SEEN", default_value_t = 30)]
    valid_seen: usize,
    #[arg(long, env = "CLGRID_VALID_UNSEEN", default_value_t = 30)]
    valid_unseen: usize,
    /// Disable Environment-IL subsampling (imbalanced mode).
    #[arg(long, env = "CLGRID_NO_BALANCE")]
    no_balance: bool,
}

impl BenchmarkArgs {
    fn counts(&self) -> BenchmarkCounts {
        let mut c = BenchmarkCounts::uniform(self.train_count, self.valid_seen, self.valid_unseen);
        c.balance = !self.no_balance;
        c
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build a benchmark and write its manifest.
    Gen {
        #[command(flatten)]
        benchmark: BenchmarkArgs,
        /// Manifest output path (JSON-lines).
        #[arg(long, env = "CLGRID_OUT", default_value = "benchmark_manifest.jsonl")]
        out: PathBuf,
    },
    /// One continual training run plus evaluation records.
    Train {
        #[command(flatten)]
        benchmark: BenchmarkArgs,
        #[arg(long, env = "CLGRID_METHOD", default_value = "cama")]
        method: String,
        #[arg(long, env = "CLGRID_SEED", default_value_t = 0)]
        seed: u64,
        /// Preset index (0-4) or an explicit comma-separated task list.
        #[arg(long, env = "CLGRID_ORDERING", default_value = "0")]
        ordering: String,
        #[arg(long, env = "CLGRID_MEMORY_SIZE")]
        memory_size: Option<usize>,
        /// Distillation weight on stored logits.
        #[arg(long, env = "CLGRID_ALPHA")]
        alpha: Option<f64>,
        #[arg(long, env = "CLGRID_ALPHA_A")]
        alpha_a: Option<f64>,
        #[arg(long, env = "CLGRID_ALPHA_C")]
        alpha_c: Option<f64>,
        #[arg(long, env = "CLGRID_QUEUE_N")]
        queue_n: Option<usize>,
        #[arg(long, env = "CLGRID_OUT", default_value = "runs")]
        out: PathBuf,
    },
    /// Run a methods x orderings x seeds matrix from a config file.
    Sweep {
        /// Experiment config (JSON, unknown keys rejected).
        #[arg(long, env = "CLGRID_CONFIG")]
        config: PathBuf,
        #[arg(long, env = "CLGRID_OUT", default_value = "runs")]
        out: PathBuf,
    },
    /// Summarize one or more results files.
    Report {
        /// results.jsonl paths.
        #[arg(required = true)]
        results: Vec<PathBuf>,
        /// Optional machine-readable summary (JSON) output path.
        #[arg(long, env = "CLGRID_OUT")]
        out: Option<PathBuf>,
    },
}

fn parse_setup(s: &str) -> std::result::Result<Setup, String> {
    match s {
        "behavior" => Ok(Setup::BehaviorIl),
        "environment" => Ok(Setup::EnvironmentIl),
        other => Err(format!("unknown setup '{other}' (behavior|environment)")),
    }
}

fn parse_ordering(setup: Setup, spec: &str) -> Result<Ordering> {
    if let Ok(i) = spec.parse::<usize>() {
        return make_task_ordering(setup, OrderingSource::Preset(i));
    }
    let keys = setup.task_keys();
    let mut sequence = Vec::new();
    for name in spec.split(',') {
        let name = name.trim();
        let key = keys
            .iter()
            .find(|k| k.label() == name)
            .ok_or_else(|| clgrid::Error::InvalidOrdering(format!("unknown task '{name}'")))?;
        sequence.push(*key);
    }
    make_task_ordering(setup, OrderingSource::Explicit(sequence))
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Gen { benchmark, out } => {
            let b = build_benchmark(benchmark.setup, benchmark.counts(), benchmark.benchmark_seed)?;
            let f = File::create(&out)?;
            write_manifest(&b, std::io::BufWriter::new(f))?;
            let total: usize = b.task_groups.iter().map(|(_, g)| g.len()).sum();
            println!(
                "benchmark: {} task groups, {} training episodes; manifest -> {}",
                b.task_groups.len(),
                total,
                out.display()
            );
        }
        Command::Train {
            benchmark,
            method,
            seed,
            ordering,
            memory_size,
            alpha,
            alpha_a,
            alpha_c,
            queue_n,
            out,
        } => {
            let method = Method::parse(&method)?;
            let b = build_benchmark(benchmark.setup, benchmark.counts(), benchmark.benchmark_seed)?;
            let ord = parse_ordering(benchmark.setup, &ordering)?;
            let mut cfg = clgrid::clmethods::MethodConfig::new(method);
            if let Some(v) = memory_size {
                cfg.memory_size = v;
            }
            if let Some(v) = alpha {
                cfg.distill_alpha = v;
            }
            if let Some(v) = alpha_a {
                cfg.alpha_a = v;
            }
            if let Some(v) = alpha_c {
                cfg.alpha_c = v;
            }
            if let Some(v) = queue_n {
                cfg.queue_n = v;
            }
            std::fs::create_dir_all(&out)?;
            let started = std::time::Instant::now();
            let run = run_continual_training(&cfg, &b, &ord, seed)?;
            let wall = started.elapsed().as_secs_f64();
            let ordering_label: Vec<String> =
                ord.sequence.iter().map(TaskKey::label).collect();
            let records = evaluate_run(
                &b,
                &ord,
                method,
                &run,
                &ordering_label.join(","),
                seed,
                wall,
            )?;
            let tag = format!("{}_s{seed}", method.name());
            save_checkpoint(&out.join(format!("{tag}.ckpt")), run.checkpoints.last().unwrap())?;
            let results = out.join("results.jsonl");
            let mut f = std::fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(&results)?;
            if f.metadata()?.len() == 0 {
                writeln!(f, "{{\"schema\":\"run-records/v1\"}}")?;
            }
            for r in &records {
                writeln!(f, "{}", serde_json::to_string(r)?)?;
            }
            println!("{}", format_table(&summarize(&records)));
            println!("records -> {}", results.display());
        }
        Command::Sweep { config, out } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let path = run_experiment(&cfg, &out)?;
            let records = load_records(&path)?;
            println!("{}", format_table(&summarize(&records)));
            println!("records -> {}", path.display());
        }
        Command::Report { results, out } => {
            let mut records = Vec::new();
            for p in &results {
                records.extend(load_records(p)?);
            }
            let summary = summarize(&records);
            print!("{}", format_table(&summary));
            if let Some(out) = out {
                std::fs::write(&out, serde_json::to_string_pretty(&summary)?)?;
                println!("summary -> {}", out.display());
            }
        }
    }
    Ok(())
}
