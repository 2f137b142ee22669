//! pass@k scoring, multi-seed aggregation, benchmark orchestration, and
//! report rendering.
//!
//! A benchmark run samples `n` independent dialogues per problem, counts
//! how many produced fully correct constructions, and scores the problem
//! with the unbiased pass@k estimator `1 − C(n−c, k) / C(n, k)`. Problem
//! scores average uniformly within a pack, pack scores average into the
//! overall figure, and the whole procedure repeats over several harness
//! seeds so every reported number carries a sample standard deviation.

use crate::agents::{
    run_dialogue, BackendConfig, ChatMessage, Configuration, DialogueSpec, RoleBackends,
    ScriptedBackend, TranscriptEntry,
};
use crate::bank::{instance_seed, instantiate, Bank, Problem};
use crate::baseline::{run_ngram_baseline, run_template_baseline};
use crate::dsl::{RenderStyle, ToolKind};
use crate::prompt::{
    adaptive_select, apply_rename, describe_scene, render_example, restore_candidate, scene_dump,
    AdaptiveConfig, Example, LexicalSimilarity, RenamePolicy, SelectError,
};
use crate::verify::{verify_candidate, VerifyOptions};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

/// Harness seeds a bench run averages over when not configured otherwise.
pub const DEFAULT_SEEDS: usize = 10;

/// Trials used for the baseline rates attached to a bench report.
const BASELINE_TRIALS: usize = 1000;
const BASELINE_SEED: u64 = 42;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    /// pass@k preconditions violated: needs 0 ≤ c ≤ n and 1 ≤ k ≤ n.
    #[error("pass@k domain error: n={n}, c={c}, k={k}")]
    Domain { n: usize, c: usize, k: usize },
    /// Aggregation found seeds covering different problem sets.
    #[error("seed {seed} covers a different problem set for {metric}")]
    SeedCoverageMismatch { seed: u64, metric: String },
    #[error("bad configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Bank(#[from] crate::bank::BankError),
    #[error(transparent)]
    Instantiate(#[from] crate::bank::InstantiateError),
    #[error(transparent)]
    Parse(#[from] crate::dsl::ParseError),
    #[error(transparent)]
    Rename(#[from] crate::dsl::RenameError),
    #[error(transparent)]
    Verify(#[from] crate::verify::VerifyError),
    #[error(transparent)]
    Baseline(#[from] crate::baseline::BaselineError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Unbiased pass@k: the probability that a uniformly chosen size-`k`
/// subset of the `n` samples contains at least one of the `c` correct
/// ones, evaluated as `1 − ∏ (n−c−i)/(n−i)` to avoid factorials.
pub fn pass_at_k(n: usize, c: usize, k: usize) -> Result<f64, EvalError> {
    if c > n || k < 1 || k > n {
        return Err(EvalError::Domain { n, c, k });
    }
    // Fewer wrong samples than the subset size: every subset has a hit.
    if n - c < k {
        return Ok(1.0);
    }
    let mut all_wrong = 1.0;
    for i in 0..k {
        all_wrong *= (n - c - i) as f64 / (n - i) as f64;
    }
    Ok(1.0 - all_wrong)
}

/// One problem's sampling outcome under one seed and sample budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub problem_id: String,
    pub pack: String,
    /// Samples drawn.
    pub n: usize,
    /// Samples whose candidate verified fully correct.
    pub c: usize,
    /// Configuration descriptor the samples ran under.
    pub config: String,
    pub seed: u64,
    /// Where the samples' dialogue transcripts were written.
    pub transcripts: String,
}

impl RunRecord {
    /// The metric this record feeds, named by its sample budget.
    pub fn metric(&self) -> String {
        format!("pass@{}", self.n)
    }
}

/// Mean and sample standard deviation over harness seeds, as fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub std: f64,
}

/// A finished benchmark: per-pack and overall metric aggregates plus the
/// run's metadata and the bank's baseline rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub config: String,
    pub feedback_mode: bool,
    pub temperature_pass1: f64,
    pub temperature_pass50: f64,
    /// Distinct harness seeds the aggregates run over.
    pub seeds: usize,
    /// Unix timestamp of report generation.
    pub generated_unix: u64,
    /// pack → metric name → aggregate.
    pub packs: BTreeMap<String, BTreeMap<String, Aggregate>>,
    /// metric name → aggregate of per-seed means over pack means.
    pub overall: BTreeMap<String, Aggregate>,
    /// Baseline method → fully-correct rate on the bundled corpus.
    pub baselines: BTreeMap<String, f64>,
}

/// Report metadata that does not come from the run records.
#[derive(Debug, Clone)]
pub struct ReportMeta {
    pub config: String,
    pub feedback_mode: bool,
    pub temperature_pass1: f64,
    pub temperature_pass50: f64,
    pub generated_unix: u64,
    pub baselines: BTreeMap<String, f64>,
}

fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let variance =
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (values.len() - 1) as f64;
    variance.sqrt()
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Fold run records into a report: pass@k per problem, uniform mean per
/// pack, macro mean over packs, then mean ± sample std across seeds.
/// Every seed must cover the same problem set for each metric.
pub fn aggregate(records: &[RunRecord], meta: &ReportMeta) -> Result<BenchReport, EvalError> {
    // metric → seed → pack → per-problem scores.
    let mut scores: BTreeMap<String, BTreeMap<u64, BTreeMap<&str, Vec<f64>>>> = BTreeMap::new();
    let mut coverage: BTreeMap<String, BTreeMap<u64, BTreeSet<&str>>> = BTreeMap::new();
    for record in records {
        let metric = record.metric();
        let value = pass_at_k(record.n, record.c, record.n)?;
        scores
            .entry(metric.clone())
            .or_default()
            .entry(record.seed)
            .or_default()
            .entry(record.pack.as_str())
            .or_default()
            .push(value);
        coverage
            .entry(metric)
            .or_default()
            .entry(record.seed)
            .or_default()
            .insert(record.problem_id.as_str());
    }
    for (metric, by_seed) in &coverage {
        let mut seeds = by_seed.iter();
        let Some((_, reference)) = seeds.next() else { continue };
        for (seed, set) in seeds {
            if set != reference {
                return Err(EvalError::SeedCoverageMismatch {
                    seed: *seed,
                    metric: metric.clone(),
                });
            }
        }
    }

    let mut packs: BTreeMap<String, BTreeMap<String, Aggregate>> = BTreeMap::new();
    let mut overall: BTreeMap<String, Aggregate> = BTreeMap::new();
    let mut seed_count = 0;
    for (metric, by_seed) in &scores {
        seed_count = by_seed.len();
        // Per-seed pack means, keyed by pack.
        let mut pack_series: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        let mut overall_series: Vec<f64> = Vec::new();
        for by_pack in by_seed.values() {
            let mut pack_means = Vec::new();
            for (pack, values) in by_pack {
                let m = mean(values);
                pack_series.entry(pack).or_default().push(m);
                pack_means.push(m);
            }
            overall_series.push(mean(&pack_means));
        }
        for (pack, series) in pack_series {
            packs.entry(pack.to_string()).or_default().insert(
                metric.clone(),
                Aggregate { mean: mean(&series), std: sample_std(&series) },
            );
        }
        overall.insert(
            metric.clone(),
            Aggregate { mean: mean(&overall_series), std: sample_std(&overall_series) },
        );
    }

    Ok(BenchReport {
        config: meta.config.clone(),
        feedback_mode: meta.feedback_mode,
        temperature_pass1: meta.temperature_pass1,
        temperature_pass50: meta.temperature_pass50,
        seeds: seed_count,
        generated_unix: meta.generated_unix,
        packs,
        overall,
        baselines: meta.baselines.clone(),
    })
}

/// Percentage with one decimal, rounding halves up: 0.3225 → 32.3.
fn percent_half_up(fraction: f64) -> f64 {
    // Snap to three decimals of a percent first so that binary dust like
    // 32.249999999 still counts as the half it denotes.
    let percent = (fraction * 1e5).round() / 1e3;
    (percent * 10.0 + 0.5).floor() / 10.0
}

/// Table cell in the "32.3 (± 1.3)" house style.
fn cell(aggregate: &Aggregate) -> String {
    format!("{:.1} (± {:.1})", percent_half_up(aggregate.mean), percent_half_up(aggregate.std))
}

/// Render the report as a markdown document with one pack per row.
pub fn render_markdown(report: &BenchReport) -> String {
    let mut out = String::new();
    out.push_str("# Benchmark report\n\n");
    out.push_str(&format!("- configuration: {}\n", report.config));
    out.push_str(&format!(
        "- feedback mode: {}\n",
        if report.feedback_mode { "on" } else { "off" }
    ));
    out.push_str(&format!(
        "- temperatures: {} (pass@1) / {} (pass@50)\n",
        report.temperature_pass1, report.temperature_pass50
    ));
    out.push_str(&format!("- seeds: {}\n", report.seeds));
    out.push_str(&format!("- generated (unix): {}\n\n", report.generated_unix));

    let metrics: Vec<&String> = report.overall.keys().collect();
    out.push_str("| Pack |");
    for metric in &metrics {
        out.push_str(&format!(" {metric} |"));
    }
    out.push('\n');
    out.push_str("| --- |");
    for _ in &metrics {
        out.push_str(" --- |");
    }
    out.push('\n');
    for (pack, by_metric) in &report.packs {
        out.push_str(&format!("| {pack} |"));
        for metric in &metrics {
            match by_metric.get(metric.as_str()) {
                Some(aggregate) => out.push_str(&format!(" {} |", cell(aggregate))),
                None => out.push_str(" — |"),
            }
        }
        out.push('\n');
    }
    out.push_str("| **overall** |");
    for metric in &metrics {
        out.push_str(&format!(" {} |", cell(&report.overall[metric.as_str()])));
    }
    out.push('\n');

    if !report.baselines.is_empty() {
        out.push_str("\n## Baselines\n\n| Method | Fully correct |\n| --- | --- |\n");
        for (method, rate) in &report.baselines {
            out.push_str(&format!("| {method} | {:.1}% |\n", percent_half_up(*rate)));
        }
    }
    out
}

/// Render the report as pretty JSON; loading and re-rendering the result
/// reproduces it byte for byte.
pub fn render_json(report: &BenchReport) -> Result<String, EvalError> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    Ok(text)
}

/// What the scene block of a solver prompt carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VrpMode {
    /// Prose description of the instantiated scene's objects and relations.
    On,
    #[default]
    Off,
    /// Raw object dump for picture-reading models.
    Vlm,
}

fn default_max_rounds() -> usize {
    5
}
fn default_temperature_pass1() -> f64 {
    0.2
}
fn default_temperature_pass50() -> f64 {
    0.6
}
fn default_rename_policy() -> String {
    "original".to_string()
}

/// A bench run's configuration file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchConfig {
    pub configuration: Configuration,
    #[serde(default)]
    pub feedback_mode: bool,
    #[serde(default = "default_max_rounds")]
    pub max_rounds: usize,
    #[serde(default = "default_temperature_pass1")]
    pub temperature_pass1: f64,
    #[serde(default = "default_temperature_pass50")]
    pub temperature_pass50: f64,
    #[serde(default)]
    pub adaptive: AdaptiveConfig,
    #[serde(default = "default_rename_policy")]
    pub rename_policy: String,
    #[serde(default)]
    pub vrp: VrpMode,
    /// Backend per role: "solver" is required, "validator" falls back to
    /// an inert stub for configurations that never consult one.
    pub backends: BTreeMap<String, BackendConfig>,
}

impl BenchConfig {
    pub fn load(path: &Path) -> Result<BenchConfig, EvalError> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Short descriptor for records and reports.
    pub fn descriptor(&self) -> String {
        if self.feedback_mode {
            format!("{}+feedback", self.configuration.label())
        } else {
            self.configuration.label().to_string()
        }
    }
}

/// Run-time options of the bench subcommand.
#[derive(Debug, Clone)]
pub struct BenchOptions {
    /// Restrict the run to these packs; `None` runs the whole bank.
    pub packs: Option<Vec<String>>,
    /// Harness seeds 0..seeds to average over.
    pub seeds: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions { packs: None, seeds: DEFAULT_SEEDS }
    }
}

/// Sample budgets for the two reported metrics.
const PASS1_SAMPLES: usize = 1;
const PASS50_SAMPLES: usize = 50;

/// Run the full benchmark: for every harness seed and problem, sample
/// dialogues at both budgets, verify candidates, and aggregate. Writes
/// `report.json`, `report.md`, `records.json`, and per-problem transcript
/// files under `out_dir`.
pub fn run_bench(
    bank: &Bank,
    config: &BenchConfig,
    out_dir: &Path,
    options: &BenchOptions,
) -> Result<BenchReport, EvalError> {
    let policy = RenamePolicy::parse(&config.rename_policy)
        .ok_or_else(|| EvalError::Config(format!("unknown rename policy {}", config.rename_policy)))?;
    let solver_config = config
        .backends
        .get("solver")
        .ok_or_else(|| EvalError::Config("backends.solver is required".to_string()))?;
    let validator_config = config.backends.get("validator");

    let problems: Vec<&Problem> = bank
        .problems
        .iter()
        .filter(|p| options.packs.as_ref().is_none_or(|packs| packs.contains(&p.pack)))
        .collect();
    if problems.is_empty() {
        return Err(EvalError::Config("no problems selected".to_string()));
    }

    fs::create_dir_all(out_dir)?;

    let mut records: Vec<RunRecord> = Vec::new();
    for seed in 0..options.seeds as u64 {
        let seed_dir = out_dir.join("transcripts").join(format!("seed{seed}"));
        fs::create_dir_all(&seed_dir)?;
        let mut seed_records = problems
            .par_iter()
            .map(|problem| {
                run_problem(bank, config, policy, solver_config, validator_config, problem, seed, &seed_dir, out_dir)
            })
            .collect::<Result<Vec<Vec<RunRecord>>, EvalError>>()?;
        records.extend(seed_records.drain(..).flatten());
    }

    // Baseline rates for the same problem selection the run covered.
    let sub_bank = Bank {
        format_version: bank.format_version,
        pack_order: bank.pack_order.clone(),
        problems: problems.iter().map(|p| (*p).clone()).collect(),
    };
    let mut baselines = BTreeMap::new();
    match run_template_baseline(&sub_bank, BASELINE_TRIALS, BASELINE_SEED) {
        Ok(summary) => {
            baselines.insert("lcs".to_string(), summary.fully_correct_rate);
        }
        // A corpus too small to mine shared sequences just goes unreported.
        Err(crate::baseline::BaselineError::InsufficientCorpus) => {}
        Err(error) => return Err(error.into()),
    }
    for order in 1..=3 {
        let summary = run_ngram_baseline(&sub_bank, order, BASELINE_TRIALS, BASELINE_SEED)?;
        baselines.insert(summary.method.clone(), summary.fully_correct_rate);
    }

    let meta = ReportMeta {
        config: config.descriptor(),
        feedback_mode: config.feedback_mode,
        temperature_pass1: config.temperature_pass1,
        temperature_pass50: config.temperature_pass50,
        generated_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        baselines,
    };
    let report = aggregate(&records, &meta)?;

    fs::write(out_dir.join("records.json"), serde_json::to_string_pretty(&records)?)?;
    fs::write(out_dir.join("report.json"), render_json(&report)?)?;
    fs::write(out_dir.join("report.md"), render_markdown(&report))?;
    Ok(report)
}

/// Benchmark one problem under one seed: both sample budgets, one record
/// each.
#[allow(clippy::too_many_arguments)]
fn run_problem(
    bank: &Bank,
    config: &BenchConfig,
    policy: RenamePolicy,
    solver_config: &BackendConfig,
    validator_config: Option<&BackendConfig>,
    problem: &Problem,
    seed: u64,
    seed_dir: &Path,
    out_dir: &Path,
) -> Result<Vec<RunRecord>, EvalError> {
    // Few-shot examples come from the problem's knowledge base, scored
    // against the original statement (the knowledge base is never renamed).
    let pool = bank.knowledge_for(&problem.id);
    let seed_pack = bank.pack_order.first().cloned().unwrap_or_default();
    let seed_problems: Vec<&Problem> = bank
        .problems
        .iter()
        .filter(|p| p.pack == seed_pack && p.id != problem.id)
        .collect();
    let solver_for_picks = solver_config.build();
    let self_pick = |prompt: &str| {
        solver_for_picks
            .complete(&[ChatMessage::user(prompt)], config.temperature_pass1)
            .ok()
    };
    let chosen = match adaptive_select(
        &problem.statement,
        &pool,
        &seed_problems,
        &config.adaptive,
        &LexicalSimilarity,
        Some(&self_pick),
    ) {
        Ok(problems) => problems,
        // A bank with nothing before this problem simply yields no examples.
        Err(SelectError::EmptyKnowledgeBase) => Vec::new(),
    };
    let examples_nl: Vec<Example> =
        chosen.iter().filter_map(|p| render_example(p, RenderStyle::Prose)).collect();
    let examples_gt: Vec<Example> =
        chosen.iter().filter_map(|p| render_example(p, RenderStyle::Canonical)).collect();

    let renamed = apply_rename(problem, policy)?;
    let scene_text = match config.vrp {
        VrpMode::Off => None,
        VrpMode::On | VrpMode::Vlm => {
            let scene =
                instantiate(&renamed.problem, instance_seed(seed, &renamed.problem.id, 0))?;
            Some(match config.vrp {
                VrpMode::On => describe_scene(&renamed.problem, &scene),
                _ => scene_dump(&scene),
            })
        }
    };
    let references = renamed.problem.parsed_references()?;
    let tools: Vec<ToolKind> = renamed
        .problem
        .tool_whitelist
        .clone()
        .unwrap_or_else(|| ToolKind::ALL.to_vec());

    let mut records = Vec::new();
    for (n, temperature) in
        [(PASS1_SAMPLES, config.temperature_pass1), (PASS50_SAMPLES, config.temperature_pass50)]
    {
        let spec = DialogueSpec {
            configuration: config.configuration,
            feedback: config.feedback_mode,
            max_rounds: config.max_rounds,
            temperature,
            statement: &renamed.problem.statement,
            examples_nl: &examples_nl,
            examples_gt: &examples_gt,
            scene: scene_text.as_deref(),
            tools: &tools,
            references: &references,
        };
        let mut correct = 0;
        let mut transcript: Vec<TranscriptEntry> = Vec::new();
        for _ in 0..n {
            // Fresh backends per sample: scripted replies replay from the
            // top, so every sample sees the same script.
            let solver = solver_config.build();
            let validator = validator_config
                .map(|c| c.build())
                .unwrap_or_else(|| Box::new(ScriptedBackend::new(Vec::<String>::new())));
            let backends = RoleBackends { solver: solver.as_ref(), validator: validator.as_ref() };
            let Ok(outcome) = run_dialogue(&spec, &backends) else { continue };
            transcript.extend(outcome.transcript);
            let Some(candidate) = outcome.candidate else { continue };
            // Candidates answer in the renamed label space; map them back
            // before verifying against the original problem.
            let Ok(restored) = restore_candidate(&candidate, &renamed.map) else { continue };
            let options = VerifyOptions { seed, ..VerifyOptions::default() };
            if verify_candidate(problem, &restored, &options)?.fully_correct {
                correct += 1;
            }
        }
        let path = seed_dir.join(format!("{}.pass{n}.jsonl", problem.id));
        let mut lines = String::new();
        for entry in &transcript {
            lines.push_str(&serde_json::to_string(&entry)?);
            lines.push('\n');
        }
        fs::write(&path, lines)?;
        let relative = path.strip_prefix(out_dir).unwrap_or(&path);
        records.push(RunRecord {
            problem_id: problem.id.clone(),
            pack: problem.pack.clone(),
            n,
            c: correct,
            config: config.descriptor(),
            seed,
            transcripts: relative.to_string_lossy().into_owned(),
        });
    }
    Ok(records)
}
