//! Command-line front end for the construction benchmark harness.

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use straightedge_core::bank::{instance_seed, instantiate, Bank, Problem};
use straightedge_core::baseline::{run_ngram_baseline, run_template_baseline};
use straightedge_core::dsl;
use straightedge_core::eval::{
    render_json, render_markdown, run_bench, BenchConfig, BenchOptions, BenchReport, DEFAULT_SEEDS,
};
use straightedge_core::prompt::{apply_rename, describe_scene, RenamePolicy};
use straightedge_core::verify::{verify_candidate, VerifyOptions, DEFAULT_INSTANCES};

#[derive(Parser)]
#[command(
    name = "straightedge",
    version,
    about = "Benchmark harness for straightedge-and-compass construction puzzles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Verify a solution file against a problem; exits 0 only when the
    /// candidate is fully correct.
    Verify {
        /// Problem bank JSON file.
        #[arg(long)]
        bank: PathBuf,
        /// Problem id to verify against.
        #[arg(long)]
        problem: String,
        /// File holding the candidate program.
        #[arg(long)]
        solution: PathBuf,
        /// Random instances to verify on.
        #[arg(long, default_value_t = DEFAULT_INSTANCES)]
        instances: usize,
        /// Base seed for instance sampling.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the benchmark and write reports plus transcripts.
    Bench {
        #[arg(long)]
        bank: PathBuf,
        /// Run configuration JSON file.
        #[arg(long)]
        config: PathBuf,
        /// Output directory for reports and transcripts.
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated pack names to restrict the run to.
        #[arg(long, value_delimiter = ',')]
        packs: Option<Vec<String>>,
        /// Harness seeds to average over.
        #[arg(long, default_value_t = DEFAULT_SEEDS)]
        seeds: usize,
    },
    /// Run a statistical baseline over the bank's reference corpus.
    Baseline {
        #[arg(long)]
        bank: PathBuf,
        /// One of: lcs, 1gram, 2gram, 3gram.
        #[arg(long)]
        method: String,
        /// Number of generation trials.
        #[arg(long)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the visual-relations description of a problem's scene.
    Vrp {
        #[arg(long)]
        bank: PathBuf,
        #[arg(long)]
        problem: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Rename a problem's identifiers and print the statement plus map.
    Rename {
        #[arg(long)]
        bank: PathBuf,
        #[arg(long)]
        problem: String,
        /// One of: x, +1, +2, +3 (or original for the identity).
        #[arg(long)]
        policy: String,
    },
    /// Re-render a finished bench run's report.
    Report {
        /// Bench output directory holding report.json.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        format: ReportFormat,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Md,
    Json,
}

fn load_bank(path: &Path) -> anyhow::Result<Bank> {
    Bank::load(path).with_context(|| format!("loading bank {}", path.display()))
}

fn find_problem<'a>(bank: &'a Bank, id: &str) -> anyhow::Result<&'a Problem> {
    bank.problems
        .iter()
        .find(|p| p.id == id)
        .with_context(|| format!("problem {id} is not in the bank"))
}

fn main() -> anyhow::Result<ExitCode> {
    match Cli::parse().command {
        Command::Verify { bank, problem, solution, instances, seed } => {
            let bank = load_bank(&bank)?;
            let problem = find_problem(&bank, &problem)?;
            let text = std::fs::read_to_string(&solution)
                .with_context(|| format!("reading solution {}", solution.display()))?;
            let candidate = dsl::parse(&text)
                .with_context(|| format!("parsing solution {}", solution.display()))?;
            let report =
                verify_candidate(problem, &candidate, &VerifyOptions { instances, seed })?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(if report.fully_correct { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Bench { bank, config, out, packs, seeds } => {
            let bank = load_bank(&bank)?;
            let config = BenchConfig::load(&config)?;
            let report = run_bench(&bank, &config, &out, &BenchOptions { packs, seeds })?;
            print!("{}", render_markdown(&report));
            Ok(ExitCode::SUCCESS)
        }
        Command::Baseline { bank, method, trials, seed } => {
            let bank = load_bank(&bank)?;
            let summary = match method.as_str() {
                "lcs" => run_template_baseline(&bank, trials, seed)?,
                "1gram" => run_ngram_baseline(&bank, 1, trials, seed)?,
                "2gram" => run_ngram_baseline(&bank, 2, trials, seed)?,
                "3gram" => run_ngram_baseline(&bank, 3, trials, seed)?,
                other => bail!("unknown baseline method {other}; use lcs, 1gram, 2gram, or 3gram"),
            };
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Vrp { bank, problem, seed } => {
            let bank = load_bank(&bank)?;
            let problem = find_problem(&bank, &problem)?;
            let scene = instantiate(problem, instance_seed(seed, &problem.id, 0))?;
            print!("{}", describe_scene(problem, &scene));
            Ok(ExitCode::SUCCESS)
        }
        Command::Rename { bank, problem, policy } => {
            let bank = load_bank(&bank)?;
            let problem = find_problem(&bank, &problem)?;
            let policy = RenamePolicy::parse(&policy)
                .with_context(|| format!("unknown rename policy {policy}; use x, +1, +2, or +3"))?;
            let renamed = apply_rename(problem, policy)?;
            let output = serde_json::json!({
                "statement": renamed.problem.statement,
                "map": renamed.map,
            });
            println!("{}", serde_json::to_string_pretty(&output)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { input, format } => {
            let path = input.join("report.json");
            let text = std::fs::read_to_string(&path)
                .with_context(|| format!("reading {}", path.display()))?;
            let report: BenchReport = serde_json::from_str(&text)?;
            match format {
                ReportFormat::Md => print!("{}", render_markdown(&report)),
                ReportFormat::Json => print!("{}", render_json(&report)?),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
