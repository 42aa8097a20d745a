//! `cdqn`: train, evaluate and duel causal / plain DQN agents on cart-pole.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use cdqn_core::cartpole::EnvSpec;
use cdqn_core::harness::{
    self, compare, duel, evaluate, render_chart, render_panels, run_training, write_metrics,
    Checkpoint, RunConfig,
};
use cdqn_core::kv::KvDoc;
use cdqn_core::scm::{self, ScmSpec};
use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "cdqn", version, about = "Causal deep Q-learning on cart-pole")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train one agent; any `--section.key value` flag overrides the config.
    Train(TrainArgs),
    /// Greedy rollouts of a saved checkpoint.
    Evaluate(EvaluateArgs),
    /// Head-to-head rounds between two checkpoints on paired seeds.
    Duel(DuelArgs),
    /// Estimator vs exact effect on random structural models.
    PeaceTest(PeaceTestArgs),
    /// Render CSV columns as an SVG line chart.
    Chart(ChartArgs),
    /// Train both agents on matched seeds and report medians and duel means.
    Compare(CompareArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, value_parser = ["dqn", "causal"])]
    agent: Option<String>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value_t = 10)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    max_steps: Option<usize>,
}

#[derive(Args, Debug)]
struct DuelArgs {
    #[arg(long = "a")]
    checkpoint_a: PathBuf,
    #[arg(long = "b")]
    checkpoint_b: PathBuf,
    #[arg(long, default_value_t = 100)]
    rounds: usize,
    #[arg(long, default_value_t = 5)]
    episodes_per_round: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV output path.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    chart: Option<PathBuf>,
    #[arg(long)]
    max_steps: Option<usize>,
}

#[derive(Args, Debug)]
struct PeaceTestArgs {
    /// Number of random models (seeds 0..n).
    #[arg(long, default_value_t = 5)]
    models: u64,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    /// Run on a model file instead of random models.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct ChartArgs {
    #[arg(long)]
    csv: PathBuf,
    /// Comma-separated column names.
    #[arg(long, value_delimiter = ',', required = true)]
    columns: Vec<String>,
    #[arg(long)]
    out: PathBuf,
    /// One panel per column instead of a shared panel.
    #[arg(long)]
    stacked: bool,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
    seeds: Vec<u64>,
    #[arg(long, default_value_t = 100)]
    rounds: usize,
    #[arg(long, default_value_t = 5)]
    episodes_per_round: usize,
}

/// Splits `--section.key value` / `--section.key=value` pairs out of argv.
fn extract_overrides(args: Vec<String>) -> anyhow::Result<(Vec<String>, KvDoc)> {
    let mut rest = Vec::with_capacity(args.len());
    let mut overrides = KvDoc::new();
    let mut iter = args.into_iter();
    while let Some(arg) = iter.next() {
        let Some(flag) = arg.strip_prefix("--").filter(|f| f.contains('.')) else {
            rest.push(arg);
            continue;
        };
        let (key, value) = match flag.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let v = iter
                    .next()
                    .with_context(|| format!("flag --{flag} needs a value"))
                    .map_err(|e| cdqn_core::Error::Config(e.to_string()))?;
                (flag.to_string(), v)
            }
        };
        overrides.set(key, value);
    }
    Ok((rest, overrides))
}

fn resolve_config(run: &RunArgs, overrides: &KvDoc) -> anyhow::Result<RunConfig> {
    let mut doc = match &run.config {
        Some(path) => KvDoc::load(path)?,
        None => KvDoc::new(),
    };
    doc.merge(overrides);
    if let Some(seed) = run.seed {
        doc.set("seed", seed);
    }
    if let Some(out) = &run.out {
        doc.set("train.out", out.display());
    }
    Ok(RunConfig::from_kv(&doc)?)
}

fn env_with(max_steps: Option<usize>) -> EnvSpec {
    let mut env = EnvSpec::default();
    if let Some(m) = max_steps {
        env.max_steps = m;
    }
    env
}

fn out_dir(config: &RunConfig) -> PathBuf {
    config
        .out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("runs"))
}

fn cmd_train(args: TrainArgs, overrides: &KvDoc) -> anyhow::Result<()> {
    let mut overrides = overrides.clone();
    if let Some(agent) = args.agent {
        overrides.set("agent.kind", agent);
    }
    let config = resolve_config(&args.run, &overrides)?;
    let dir = out_dir(&config);
    let outcome = run_training(&config)?;
    harness::write_run_outputs(&outcome, &dir)?;
    match outcome.episodes_to_solve {
        Some(ep) => println!("{} agent solved at episode {ep}", config.agent.kind),
        None => println!(
            "{} agent did not solve within {} episodes",
            config.agent.kind, config.max_episodes
        ),
    }
    println!("outputs written to {}", dir.display());
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> anyhow::Result<()> {
    let ckpt = Checkpoint::load(&args.checkpoint)?;
    let eval = evaluate(
        &ckpt.params,
        &env_with(args.max_steps),
        args.episodes,
        args.seed,
    )?;
    for (i, s) in eval.scores.iter().enumerate() {
        println!("episode {}: {s}", i + 1);
    }
    println!("mean score: {}", eval.mean());
    Ok(())
}

fn cmd_duel(args: DuelArgs) -> anyhow::Result<()> {
    let a = Checkpoint::load(&args.checkpoint_a)?;
    let b = Checkpoint::load(&args.checkpoint_b)?;
    let result = duel(
        &a.params,
        &b.params,
        &env_with(args.max_steps),
        args.rounds,
        args.episodes_per_round,
        args.seed,
    )?;
    write_metrics(&result, &args.out)?;
    if let Some(chart) = &args.chart {
        render_chart(&args.out, &["score_a".into(), "score_b".into()], chart)?;
    }
    println!(
        "{} rounds x {} episodes: mean A {:.2}, mean B {:.2}",
        args.rounds,
        args.episodes_per_round,
        result.mean_a(),
        result.mean_b()
    );
    Ok(())
}

fn cmd_peace_test(args: PeaceTestArgs) -> anyhow::Result<()> {
    if let Some(path) = &args.spec {
        let spec = ScmSpec::load(path)?;
        let samples = scm::sample_observational(&spec, args.samples, args.seed)?;
        let exact = scm::exact_peace(&spec)?;
        let est = cdqn_core::peace_from_samples(&samples)?;
        println!(
            "exact {exact:.6}  estimate {:.6}  naive {:.6}",
            est.peace,
            scm::naive_peace(&samples)?
        );
        if spec.separable.is_some() {
            println!(
                "separable at 1e-12: {}",
                scm::check_separability(&spec, 1e-12)?
            );
        }
        return Ok(());
    }
    let seeds: Vec<u64> = (0..args.models).collect();
    let rows = scm::identification_suite(&seeds, args.samples)?;
    println!("model  exact      estimate   rel_err   naive");
    let mut worst = 0.0f64;
    for r in &rows {
        worst = worst.max(r.relative_error());
        println!(
            "{:<6} {:<10.6} {:<10.6} {:<9.5} {:.6}",
            r.seed,
            r.exact,
            r.estimate,
            r.relative_error(),
            r.naive
        );
    }
    println!("worst relative error: {worst:.5}");
    Ok(())
}

fn cmd_chart(args: ChartArgs) -> anyhow::Result<()> {
    if args.stacked {
        let panels: Vec<Vec<String>> = args.columns.iter().map(|c| vec![c.clone()]).collect();
        render_panels(&args.csv, &panels, &args.out)?;
    } else {
        render_chart(&args.csv, &args.columns, &args.out)?;
    }
    Ok(())
}

fn cmd_compare(args: CompareArgs, overrides: &KvDoc) -> anyhow::Result<()> {
    let config = resolve_config(&args.run, overrides)?;
    if args.seeds.is_empty() {
        bail!(cdqn_core::Error::Config("need at least one seed".into()));
    }
    let dir = out_dir(&config);
    let (report, outcomes) = compare(&config, &args.seeds, args.rounds, args.episodes_per_round)?;
    for (seed, (dqn, causal)) in args.seeds.iter().zip(&outcomes) {
        harness::write_run_outputs(dqn, &dir.join(format!("dqn-{seed}")))?;
        harness::write_run_outputs(causal, &dir.join(format!("causal-{seed}")))?;
    }
    let table = report.table();
    let path = dir.join("comparison.txt");
    std::fs::write(&path, &table).with_context(|| path.display().to_string())?;
    print!("{table}");
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<cdqn_core::Error>() {
        Some(e) if e.is_usage() => 1,
        _ => 2,
    }
}

fn run(args: Vec<String>) -> Result<(), (u8, String)> {
    let (args, overrides) = extract_overrides(args).map_err(|e| (1, format!("{e:#}")))?;
    let cli = Cli::try_parse_from(args).map_err(|e| {
        let code = if e.use_stderr() { 1 } else { 0 };
        (code, e.to_string())
    })?;
    let command_takes_overrides = matches!(cli.command, Command::Train(_) | Command::Compare(_));
    if overrides.keys().next().is_some() && !command_takes_overrides {
        return Err((
            1,
            "config overrides are only accepted by train and compare".into(),
        ));
    }
    let result = match cli.command {
        Command::Train(a) => cmd_train(a, &overrides),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Duel(a) => cmd_duel(a),
        Command::PeaceTest(a) => cmd_peace_test(a),
        Command::Chart(a) => cmd_chart(a),
        Command::Compare(a) => cmd_compare(a, &overrides),
    };
    result.map_err(|e| (exit_code(&e), format!("error: {e:#}")))
}

fn main() -> ExitCode {
    match run(std::env::args().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err((0, msg)) => {
            print!("{msg}");
            ExitCode::SUCCESS
        }
        Err((code, msg)) => {
            eprintln!("{}", msg.trim_end());
            ExitCode::from(code)
        }
    }
}
