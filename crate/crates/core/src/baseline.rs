//! Statistical baselines that solve problems without reading them.
//!
//! Both baselines mine the reference solutions of the whole bank for step
//! statistics, generate candidates from those statistics alone, and score
//! the candidates with the same verifier the real solvers face:
//!
//! * the template baseline collects the most common shared step sequences
//!   across reference programs and replays one with freshly sampled
//!   arguments;
//! * the n-gram baselines sample one tool at a time from corpus n-gram
//!   frequencies and fill in arguments with an exponential bias toward
//!   recently created objects.
//!
//! Their pass rates calibrate the benchmark: a problem set a blind
//! statistical sampler does well on is too easy to say anything about a
//! solver's understanding.

use crate::bank::{instance_seed, instantiate, Bank, Problem};
use crate::dsl::{self, Program, Step, ToolKind};
use crate::geom::Scene;
use crate::mix_seed;
use crate::verify::{execute_program, verify_candidate, VerifyOptions};
use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Exponential recency decay for n-gram argument sampling: the newest label
/// carries weight 1 and every step back in creation order scales it by this
/// factor, so sampled steps tend to chain onto what was just drawn — the
/// way real constructions do.
const RECENCY_DECAY: f64 = 0.3;

/// Argument resampling budget per template step before the trial is
/// discarded.
const TEMPLATE_RESAMPLES: usize = 50;

/// How many templates the shared-sequence bank keeps.
const TEMPLATE_BANK_SIZE: usize = 5;

#[derive(Debug, thiserror::Error)]
pub enum BaselineError {
    /// Mining shared sequences takes at least two reference programs.
    #[error("baseline corpus needs at least two reference programs")]
    InsufficientCorpus,
    /// A stored reference failed to parse.
    #[error("reference program failed to parse: {0}")]
    BadReference(String),
    /// n-gram order outside the supported 1..=3.
    #[error("unsupported n-gram order {0}")]
    BadOrder(usize),
    /// A run needs at least one trial and one problem.
    #[error("baseline run needs at least one trial and one problem")]
    EmptyRun,
    #[error(transparent)]
    Verify(#[from] crate::verify::VerifyError),
}

/// Every reference program in the bank, in bank order.
pub fn reference_corpus(bank: &Bank) -> Result<Vec<Program>, BaselineError> {
    let mut corpus = Vec::new();
    for problem in &bank.problems {
        for reference in &problem.references {
            corpus
                .push(dsl::parse(reference).map_err(|e| BaselineError::BadReference(e.to_string()))?);
        }
    }
    Ok(corpus)
}

/// A mined step sequence: tool kinds with the output arity each step had at
/// the sequence's first occurrence in the corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub steps: Vec<(ToolKind, usize)>,
    /// Corpus programs containing the sequence.
    pub support: usize,
}

/// Mine the most widely shared contiguous step sequences of the corpus.
///
/// Every tool-kind subsequence of length two or more that occurs in at
/// least two programs is a candidate; candidates rank by length (longest
/// first), then by how many programs share them, then by first appearance.
/// The top [`TEMPLATE_BANK_SIZE`] survive.
pub fn build_template_bank(corpus: &[Program]) -> Result<Vec<Template>, BaselineError> {
    if corpus.len() < 2 {
        return Err(BaselineError::InsufficientCorpus);
    }
    struct Occurrence {
        programs: std::collections::BTreeSet<usize>,
        first_seen: usize,
        first_at: (usize, usize),
    }
    let kinds_per: Vec<Vec<ToolKind>> = corpus.iter().map(|p| p.tool_kinds()).collect();
    let mut sequences: BTreeMap<Vec<ToolKind>, Occurrence> = BTreeMap::new();
    let mut discovery = 0usize;
    for (p, kinds) in kinds_per.iter().enumerate() {
        for start in 0..kinds.len() {
            for end in start + 2..=kinds.len() {
                let key = kinds[start..end].to_vec();
                discovery += 1;
                let entry = sequences.entry(key).or_insert_with(|| Occurrence {
                    programs: std::collections::BTreeSet::new(),
                    first_seen: discovery,
                    first_at: (p, start),
                });
                entry.programs.insert(p);
            }
        }
    }
    let mut shared: Vec<(Vec<ToolKind>, Occurrence)> =
        sequences.into_iter().filter(|(_, occ)| occ.programs.len() >= 2).collect();
    shared.sort_by(|(ka, a), (kb, b)| {
        kb.len()
            .cmp(&ka.len())
            .then(b.programs.len().cmp(&a.programs.len()))
            .then(a.first_seen.cmp(&b.first_seen))
    });
    shared.truncate(TEMPLATE_BANK_SIZE);
    Ok(shared
        .into_iter()
        .map(|(kinds, occ)| {
            let (p, start) = occ.first_at;
            let steps = kinds
                .iter()
                .enumerate()
                .map(|(i, &kind)| (kind, corpus[p].steps[start + i].outputs.len()))
                .collect();
            Template { steps, support: occ.programs.len() }
        })
        .collect())
}

/// Fresh output labels that collide with nothing in the scene.
fn fresh_labels(scene: &Scene, count: usize, counter: &mut usize) -> Vec<String> {
    let mut labels = Vec::with_capacity(count);
    while labels.len() < count {
        *counter += 1;
        let label = format!("g{counter}");
        if !scene.contains(&label) {
            labels.push(label);
        }
    }
    labels
}

/// Instantiate a template on the trial's scene: choose a template uniformly
/// and sample each step's arguments from the labels available at that
/// point, retrying a step on execution failure up to the resampling budget.
/// Returns `None` when a step never executes — the trial is discarded (and
/// still counted).
fn generate_template_candidate(
    problem: &Problem,
    templates: &[Template],
    trial_seed: u64,
    rng: &mut ChaCha8Rng,
) -> Option<Program> {
    let template = templates.choose(rng)?;
    let mut scene = instantiate(problem, instance_seed(trial_seed, &problem.id, 0)).ok()?;
    let mut steps: Vec<Step> = Vec::new();
    let mut counter = 0usize;
    for &(tool, output_count) in &template.steps {
        let mut placed = false;
        for _ in 0..TEMPLATE_RESAMPLES {
            let labels: Vec<String> = scene.objects().iter().map(|o| o.label.clone()).collect();
            let args: Vec<String> =
                (0..tool.arity()).filter_map(|_| labels.choose(rng).cloned()).collect();
            let outputs = fresh_labels(&scene, output_count, &mut counter);
            let arg_refs: Vec<&str> = args.iter().map(String::as_str).collect();
            let output_refs: Vec<&str> = outputs.iter().map(String::as_str).collect();
            let step = Step::new(tool, &arg_refs, &output_refs);
            let mut fork = scene.clone();
            if execute_program(&mut fork, &Program::new(vec![step.clone()])).is_ok() {
                scene = fork;
                steps.push(step);
                placed = true;
                break;
            }
        }
        if !placed {
            return None;
        }
    }
    Some(Program::new(steps))
}

/// Tool n-gram counts over the corpus: (context of `order - 1` preceding
/// tools, next tool) → occurrences. Order 1 counts plain tool frequencies.
#[derive(Debug, Clone)]
pub struct NGramDb {
    order: usize,
    counts: BTreeMap<(Vec<ToolKind>, ToolKind), usize>,
}

impl NGramDb {
    pub fn build(corpus: &[Program], order: usize) -> Result<NGramDb, BaselineError> {
        if !(1..=3).contains(&order) {
            return Err(BaselineError::BadOrder(order));
        }
        let mut counts = BTreeMap::new();
        for program in corpus {
            let kinds = program.tool_kinds();
            for i in 0..kinds.len() {
                if i + 1 < order {
                    continue;
                }
                let context = kinds[i + 1 - order..i].to_vec();
                *counts.entry((context, kinds[i])).or_insert(0) += 1;
            }
        }
        Ok(NGramDb { order, counts })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Total observations; for order 1 this is the corpus step count.
    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    /// Continuations of a context with their counts, in tool order.
    pub fn continuations(&self, context: &[ToolKind]) -> Vec<(ToolKind, usize)> {
        self.counts
            .iter()
            .filter(|((c, _), _)| c.as_slice() == context)
            .map(|((_, next), count)| (*next, *count))
            .collect()
    }
}

/// Draw `arity` argument labels without replacement, weighting each label
/// by [`RECENCY_DECAY`] raised to its age in creation order. When the pool
/// is smaller than the arity, exhausted draws repeat a label uniformly
/// rather than stop short.
fn sample_recent_args(available: &[String], arity: usize, rng: &mut ChaCha8Rng) -> Vec<String> {
    let newest = available.len() - 1;
    let mut remaining: Vec<usize> = (0..available.len()).collect();
    let mut args = Vec::with_capacity(arity);
    while args.len() < arity {
        if remaining.is_empty() {
            args.push(available[rng.gen_range(0..available.len())].clone());
            continue;
        }
        let weights = remaining.iter().map(|&i| RECENCY_DECAY.powi((newest - i) as i32));
        let distribution = WeightedIndex::new(weights).expect("positive weights");
        let pick = distribution.sample(rng);
        args.push(available[remaining.remove(pick)].clone());
    }
    args
}

/// Sample one candidate by walking n-gram statistics for as many steps as
/// the problem's shortest reference has. Arguments are drawn from the
/// available labels with recency-decayed weights; nothing is executed or
/// retried, so geometrically inapplicable steps stay in and simply fail
/// verification.
fn generate_ngram_candidate(
    problem: &Problem,
    chain: &[NGramDb],
    rng: &mut ChaCha8Rng,
) -> Option<Program> {
    let references = problem.parsed_references().ok()?;
    let max_steps = references.iter().map(|r| r.steps.len()).min()?;
    let mut available: Vec<String> = problem.init_labels();
    let mut sampled_kinds: Vec<ToolKind> = Vec::new();
    let mut steps: Vec<Step> = Vec::new();
    let mut counter = 0usize;
    for index in 0..max_steps {
        // Back off to the longest context the corpus has seen.
        let mut weighted: Vec<(ToolKind, usize)> = Vec::new();
        for db in chain.iter().rev() {
            let need = db.order() - 1;
            if index < need {
                continue;
            }
            let context = &sampled_kinds[index - need..];
            let continuations = db.continuations(context);
            if !continuations.is_empty() {
                weighted = continuations;
                break;
            }
        }
        if weighted.is_empty() {
            return None;
        }
        let distribution = WeightedIndex::new(weighted.iter().map(|(_, c)| *c)).ok()?;
        let tool = weighted[distribution.sample(rng)].0;
        sampled_kinds.push(tool);

        let args = sample_recent_args(&available, tool.arity(), rng);
        let output_count = match tool.output_range() {
            (low, high) if low == high => low,
            (low, high) => rng.gen_range(low..=high),
        };
        let mut outputs = Vec::with_capacity(output_count);
        while outputs.len() < output_count {
            counter += 1;
            let label = format!("g{counter}");
            if !available.contains(&label) {
                outputs.push(label);
            }
        }
        available.extend(outputs.iter().cloned());
        let arg_refs: Vec<&str> = args.iter().map(String::as_str).collect();
        let output_refs: Vec<&str> = outputs.iter().map(String::as_str).collect();
        steps.push(Step::new(tool, &arg_refs, &output_refs));
    }
    Some(Program::new(steps))
}

/// One baseline run's results, in the shape the command line prints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSummary {
    pub method: String,
    pub trials: usize,
    pub fully_correct_rate: f64,
    pub tool_sequence_rate: f64,
    pub seed: u64,
}

fn run_trials(
    bank: &Bank,
    method: &str,
    trials: usize,
    seed: u64,
    mut generate: impl FnMut(&Problem, u64, &mut ChaCha8Rng) -> Option<Program>,
) -> Result<BaselineSummary, BaselineError> {
    if trials == 0 || bank.problems.is_empty() {
        return Err(BaselineError::EmptyRun);
    }
    let mut fully_correct = 0usize;
    let mut tool_sequence = 0usize;
    for trial in 0..trials {
        let problem = &bank.problems[trial % bank.problems.len()];
        let trial_seed = mix_seed(seed, trial as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
        let Some(candidate) = generate(problem, trial_seed, &mut rng) else { continue };
        let report = verify_candidate(
            problem,
            &candidate,
            &VerifyOptions { instances: 1, seed: trial_seed },
        )?;
        if report.fully_correct {
            fully_correct += 1;
        }
        if report.tool_sequence_correct {
            tool_sequence += 1;
        }
    }
    Ok(BaselineSummary {
        method: method.to_string(),
        trials,
        fully_correct_rate: fully_correct as f64 / trials as f64,
        tool_sequence_rate: tool_sequence as f64 / trials as f64,
        seed,
    })
}

/// Run the shared-sequence template baseline: trials cycle through the
/// bank's problems in order, and each trial replays one mined template with
/// sampled arguments against one sampled instance.
pub fn run_template_baseline(
    bank: &Bank,
    trials: usize,
    seed: u64,
) -> Result<BaselineSummary, BaselineError> {
    let corpus = reference_corpus(bank)?;
    let templates = build_template_bank(&corpus)?;
    run_trials(bank, "lcs", trials, seed, |problem, trial_seed, rng| {
        generate_template_candidate(problem, &templates, trial_seed, rng)
    })
}

/// Run an n-gram baseline of the given order (1, 2, or 3).
pub fn run_ngram_baseline(
    bank: &Bank,
    order: usize,
    trials: usize,
    seed: u64,
) -> Result<BaselineSummary, BaselineError> {
    let corpus = reference_corpus(bank)?;
    let chain: Vec<NGramDb> =
        (1..=order).map(|n| NGramDb::build(&corpus, n)).collect::<Result<_, _>>()?;
    run_trials(bank, &format!("{order}gram"), trials, seed, |problem, _trial_seed, rng| {
        generate_ngram_candidate(problem, &chain, rng)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    fn bundled_bank() -> Bank {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/problems.json");
        Bank::load(&path).expect("bundled bank loads")
    }

    fn contains_subsequence(haystack: &[ToolKind], needle: &[ToolKind]) -> bool {
        haystack.windows(needle.len()).any(|w| w == needle)
    }

    #[test]
    fn template_bank_holds_shared_sequences_ranked_by_length() {
        let bank = bundled_bank();
        let corpus = reference_corpus(&bank).unwrap();
        let templates = build_template_bank(&corpus).unwrap();
        assert!(!templates.is_empty());
        assert!(templates.len() <= TEMPLATE_BANK_SIZE);
        let kinds_per: Vec<Vec<ToolKind>> = corpus.iter().map(|p| p.tool_kinds()).collect();
        for template in &templates {
            assert!(template.steps.len() >= 2);
            let kinds: Vec<ToolKind> = template.steps.iter().map(|(k, _)| *k).collect();
            let support =
                kinds_per.iter().filter(|p| contains_subsequence(p, &kinds)).count();
            assert!(support >= 2, "{kinds:?} appears in {support} programs");
            assert_eq!(support, template.support);
        }
        // Ranked longest first.
        for pair in templates.windows(2) {
            assert!(pair[0].steps.len() >= pair[1].steps.len());
        }
    }

    #[test]
    fn template_bank_requires_two_programs() {
        let corpus = vec![dsl::parse("line(A, B) -> l").unwrap()];
        assert!(matches!(
            build_template_bank(&corpus),
            Err(BaselineError::InsufficientCorpus)
        ));
    }

    #[test]
    fn ngram_totals_follow_the_corpus_step_counts() {
        let bank = bundled_bank();
        let corpus = reference_corpus(&bank).unwrap();
        let total_steps: usize = corpus.iter().map(|p| p.steps.len()).sum();
        let unigram = NGramDb::build(&corpus, 1).unwrap();
        assert_eq!(unigram.total(), total_steps);
        // Every program loses its first step as a bigram context, and its
        // first two as a trigram context.
        let bigram = NGramDb::build(&corpus, 2).unwrap();
        assert_eq!(bigram.total(), total_steps - corpus.len());
        let trigram = NGramDb::build(&corpus, 3).unwrap();
        let expected: usize = corpus.iter().map(|p| p.steps.len().saturating_sub(2)).sum();
        assert_eq!(trigram.total(), expected);
        // Marginal consistency: continuations of the empty context are the
        // whole unigram table.
        let marginal: usize = unigram.continuations(&[]).iter().map(|(_, c)| c).sum();
        assert_eq!(marginal, total_steps);
        assert!(matches!(NGramDb::build(&corpus, 4), Err(BaselineError::BadOrder(4))));
    }

    #[test]
    fn baseline_runs_are_deterministic_and_bounded() {
        let bank = bundled_bank();
        let first = run_template_baseline(&bank, 40, 11).unwrap();
        let second = run_template_baseline(&bank, 40, 11).unwrap();
        assert_eq!(first, second);
        assert_eq!(first.method, "lcs");
        assert_eq!(first.trials, 40);
        assert!((0.0..=1.0).contains(&first.fully_correct_rate));
        assert!((0.0..=1.0).contains(&first.tool_sequence_rate));

        let first = run_ngram_baseline(&bank, 1, 40, 11).unwrap();
        let second = run_ngram_baseline(&bank, 1, 40, 11).unwrap();
        assert_eq!(first, second);
        assert_eq!(first.method, "1gram");
        // A different seed steers sampling differently.
        let other = run_ngram_baseline(&bank, 1, 40, 13).unwrap();
        assert_eq!(other.seed, 13);
    }

    #[test]
    fn higher_order_ngrams_run_end_to_end() {
        let bank = bundled_bank();
        for order in [2, 3] {
            let summary = run_ngram_baseline(&bank, order, 30, 5).unwrap();
            assert_eq!(summary.method, format!("{order}gram"));
            assert!((0.0..=1.0).contains(&summary.fully_correct_rate));
        }
    }

    #[test]
    fn summaries_serialize_with_the_documented_fields() {
        let summary = BaselineSummary {
            method: "lcs".into(),
            trials: 1000,
            fully_correct_rate: 0.031,
            tool_sequence_rate: 0.05,
            seed: 42,
        };
        let json = serde_json::to_string(&summary).unwrap();
        let mut last = 0;
        for field in ["method", "trials", "fully_correct_rate", "tool_sequence_rate", "seed"] {
            let at = json.find(&format!("\"{field}\"")).expect(field);
            assert!(at > last || last == 0, "{field} out of order");
            last = at;
        }
        let back: BaselineSummary = serde_json::from_str(&json).unwrap();
        assert_eq!(back, summary);
    }
}
