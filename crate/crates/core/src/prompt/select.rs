//! Adaptive few-shot selection: a similarity model scores the knowledge
//! base against the problem statement, a threshold-and-cap stage trims the
//! pool, and a second stage picks the final examples either by score or by
//! asking a model to choose.

use crate::bank::Problem;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BTreeMap;

/// Scores a query statement against a corpus of statements. Higher means
/// more similar; implementations must be deterministic.
pub trait SimilarityModel {
    /// One score per corpus entry, in corpus order.
    fn scores(&self, query: &str, corpus: &[&str]) -> Vec<f64>;
}

/// Deterministic lexical similarity: tf-idf weighted cosine over lowercased
/// word tokens. Not a learned model, but it ranks "bisect the angle" next
/// to other bisection problems and far from circle-packing ones, which is
/// what stage one needs.
#[derive(Debug, Clone, Copy, Default)]
pub struct LexicalSimilarity;

fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|t| t.len() >= 2)
        .map(str::to_ascii_lowercase)
        .collect()
}

fn weighted_counts(tokens: &[String], idf: &BTreeMap<String, f64>) -> BTreeMap<String, f64> {
    let mut counts: BTreeMap<String, f64> = BTreeMap::new();
    for token in tokens {
        *counts.entry(token.clone()).or_insert(0.0) += 1.0;
    }
    for (token, value) in counts.iter_mut() {
        // Unknown tokens keep a neutral weight of 1; they cannot match any
        // corpus document anyway.
        *value *= idf.get(token).copied().unwrap_or(1.0);
    }
    counts
}

fn cosine(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> f64 {
    let dot: f64 = a
        .iter()
        .filter_map(|(token, weight)| b.get(token).map(|other| weight * other))
        .sum();
    let norm = |v: &BTreeMap<String, f64>| v.values().map(|w| w * w).sum::<f64>().sqrt();
    let denominator = norm(a) * norm(b);
    if denominator <= f64::EPSILON {
        0.0
    } else {
        dot / denominator
    }
}

impl SimilarityModel for LexicalSimilarity {
    fn scores(&self, query: &str, corpus: &[&str]) -> Vec<f64> {
        let documents: Vec<Vec<String>> = corpus.iter().map(|d| words(d)).collect();
        let mut document_frequency: BTreeMap<String, usize> = BTreeMap::new();
        for document in &documents {
            let mut seen: Vec<&String> = document.iter().collect();
            seen.sort();
            seen.dedup();
            for token in seen {
                *document_frequency.entry(token.clone()).or_insert(0) += 1;
            }
        }
        let n = corpus.len() as f64;
        let idf: BTreeMap<String, f64> = document_frequency
            .into_iter()
            .map(|(token, df)| (token, ((1.0 + n) / (1.0 + df as f64)).ln() + 1.0))
            .collect();
        let query_vector = weighted_counts(&words(query), &idf);
        documents
            .iter()
            .map(|document| cosine(&query_vector, &weighted_counts(document, &idf)))
            .collect()
    }
}

/// Which second stage picks the final examples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SelectMode {
    /// Rank by similarity score and take the top `k`.
    #[default]
    #[serde(rename = "st")]
    Similarity,
    /// Ask a model to pick `k` of the shortlisted candidates by id, falling
    /// back to similarity ranking when the reply names none of them.
    #[serde(rename = "self")]
    SelfPick,
}

/// Tuning for adaptive example selection.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdaptiveConfig {
    /// Scores must strictly exceed this to survive stage one.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// Stage one keeps at most this many candidates.
    #[serde(default = "default_cap")]
    pub cap: usize,
    /// Number of examples stage two returns.
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub mode: SelectMode,
}

fn default_threshold() -> f64 {
    0.5
}
fn default_cap() -> usize {
    15
}
fn default_k() -> usize {
    5
}

impl Default for AdaptiveConfig {
    fn default() -> AdaptiveConfig {
        AdaptiveConfig {
            threshold: default_threshold(),
            cap: default_cap(),
            k: default_k(),
            mode: SelectMode::default(),
        }
    }
}

/// Why selection could not produce examples.
#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum SelectError {
    /// Both the knowledge base and the seed set are empty.
    #[error("no examples available: the knowledge base and the seed set are both empty")]
    EmptyKnowledgeBase,
}

/// Stage one: indices whose score strictly exceeds `threshold`, ordered by
/// descending score (ties keep corpus order), truncated to `cap`.
pub fn stage_one(scores: &[f64], threshold: f64, cap: usize) -> Vec<usize> {
    let mut indices: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] > threshold).collect();
    indices.sort_by(|&a, &b| {
        scores[b].partial_cmp(&scores[a]).unwrap_or(Ordering::Equal).then(a.cmp(&b))
    });
    indices.truncate(cap);
    indices
}

/// Build the stage-two question shown to a self-picking model.
fn self_pick_prompt(statement: &str, candidates: &[&Problem], k: usize) -> String {
    let mut out = String::from(
        "You are choosing worked examples to show alongside a construction problem.\n\
         \nProblem:\n",
    );
    out.push_str(statement);
    out.push_str("\n\nCandidate examples:\n");
    for candidate in candidates {
        out.push_str(&format!("- {}: {}\n", candidate.id, candidate.statement));
    }
    out.push_str(&format!(
        "\nReply with the ids of the {k} candidates most useful as worked examples, \
         comma separated, most useful first.\n"
    ));
    out
}

/// Ids mentioned in a reply, in order of appearance, restricted to known
/// candidates. Tokens must match ids exactly after trimming punctuation.
fn ids_in_reply<'a>(reply: &str, candidates: &[&'a Problem]) -> Vec<&'a Problem> {
    let mut picked: Vec<&Problem> = Vec::new();
    for token in reply
        .split(|c: char| c.is_whitespace() || c == ',' || c == ';')
        .map(|t| t.trim_matches(|c: char| !(c.is_ascii_alphanumeric() || c == '-' || c == '_')))
        .filter(|t| !t.is_empty())
    {
        if let Some(problem) = candidates.iter().find(|p| p.id == token) {
            if !picked.iter().any(|p| p.id == problem.id) {
                picked.push(problem);
            }
        }
    }
    picked
}

/// Two-stage adaptive selection of worked examples.
///
/// Scores every pool problem's statement against the query statement,
/// shortlists with [`stage_one`], then either takes the top `k` by score or
/// lets `self_pick` choose among the shortlist. When the pool is empty or
/// nothing clears the threshold, the seed problems stand in; when those are
/// empty too the selection fails.
pub fn adaptive_select<'a>(
    statement: &str,
    pool: &[&'a Problem],
    seeds: &[&'a Problem],
    config: &AdaptiveConfig,
    model: &dyn SimilarityModel,
    self_pick: Option<&dyn Fn(&str) -> Option<String>>,
) -> Result<Vec<&'a Problem>, SelectError> {
    let fallback = || -> Result<Vec<&'a Problem>, SelectError> {
        if seeds.is_empty() {
            Err(SelectError::EmptyKnowledgeBase)
        } else {
            Ok(seeds.iter().copied().take(config.k).collect())
        }
    };
    if pool.is_empty() {
        return fallback();
    }
    let corpus: Vec<&str> = pool.iter().map(|p| p.statement.as_str()).collect();
    let scores = model.scores(statement, &corpus);
    let shortlist_indices = stage_one(&scores, config.threshold, config.cap);
    if shortlist_indices.is_empty() {
        return fallback();
    }
    let shortlist: Vec<&Problem> = shortlist_indices.iter().map(|&i| pool[i]).collect();
    let by_score: Vec<&Problem> = shortlist.iter().copied().take(config.k).collect();
    match config.mode {
        SelectMode::Similarity => Ok(by_score),
        SelectMode::SelfPick => {
            let reply = self_pick.and_then(|ask| ask(&self_pick_prompt(statement, &shortlist, config.k)));
            let Some(reply) = reply else { return Ok(by_score) };
            let mut picked = ids_in_reply(&reply, &shortlist);
            if picked.is_empty() {
                return Ok(by_score);
            }
            picked.truncate(config.k);
            // Fill any shortfall from the score ranking, skipping picks.
            for problem in &by_score {
                if picked.len() >= config.k {
                    break;
                }
                if !picked.iter().any(|p| p.id == problem.id) {
                    picked.push(problem);
                }
            }
            Ok(picked)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bank::Bank;
    use std::path::Path;

    fn bundled_bank() -> Bank {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/problems.json");
        Bank::load(&path).expect("bundled bank loads")
    }

    #[test]
    fn stage_one_applies_strict_threshold_descending_order_and_cap() {
        let scores = [0.9, 0.7, 0.6, 0.4, 0.3];
        assert_eq!(stage_one(&scores, 0.5, 15), vec![0, 1, 2]);
        // Strictness: a score equal to the threshold is dropped.
        assert_eq!(stage_one(&scores, 0.6, 15), vec![0, 1]);
        // Unsorted input comes back sorted by score.
        let scrambled = [0.6, 0.9, 0.7];
        assert_eq!(stage_one(&scrambled, 0.5, 15), vec![1, 2, 0]);
        // Ties keep corpus order and the cap truncates.
        let tied = [0.8; 20];
        let kept = stage_one(&tied, 0.5, 15);
        assert_eq!(kept.len(), 15);
        assert_eq!(kept, (0..15).collect::<Vec<_>>());
        assert_eq!(&kept[..5], &[0, 1, 2, 3, 4]);
    }

    #[test]
    fn lexical_similarity_prefers_shared_vocabulary() {
        let model = LexicalSimilarity;
        let corpus = [
            "Bisect the angle at the vertex Q.",
            "Construct the circle inscribed in the triangle.",
            "Construct the midpoint of the segment.",
        ];
        let scores = model.scores("Bisect the given angle at P.", &corpus);
        assert_eq!(scores.len(), 3);
        assert!(scores[0] > scores[1], "bisection should outrank circle packing: {scores:?}");
        assert!(scores[0] > scores[2]);
        assert!(scores.iter().all(|s| (0.0..=1.0 + 1e-12).contains(s)));
        // Determinism.
        assert_eq!(scores, model.scores("Bisect the given angle at P.", &corpus));
    }

    #[test]
    fn empty_pool_falls_back_to_seeds() {
        let bank = bundled_bank();
        let seeds = bank.problems_in_pack("Seed");
        let config = AdaptiveConfig::default();
        let picked =
            adaptive_select("Construct something new.", &[], &seeds, &config, &LexicalSimilarity, None)
                .unwrap();
        assert_eq!(picked.len(), 5);
        assert!(picked.iter().all(|p| p.pack == "Seed"));
        let err =
            adaptive_select("Construct something new.", &[], &[], &config, &LexicalSimilarity, None)
                .unwrap_err();
        assert_eq!(err, SelectError::EmptyKnowledgeBase);
    }

    #[test]
    fn self_pick_honors_the_reply_and_falls_back_when_it_is_useless() {
        let bank = bundled_bank();
        let pool = bank.knowledge_for("rhombus-in-rectangle");
        let statement = &bank.problem("rhombus-in-rectangle").unwrap().statement;
        let config = AdaptiveConfig {
            threshold: 0.0,
            mode: SelectMode::SelfPick,
            ..AdaptiveConfig::default()
        };
        let ask: &dyn Fn(&str) -> Option<String> =
            &|_prompt| Some("Use midpoint, then draw-circle.".to_string());
        let picked =
            adaptive_select(statement, &pool, &[], &config, &LexicalSimilarity, Some(ask)).unwrap();
        assert_eq!(picked.len(), config.k);
        assert_eq!(picked[0].id, "midpoint");
        assert_eq!(picked[1].id, "draw-circle");

        let nonsense: &dyn Fn(&str) -> Option<String> = &|_prompt| Some("no ids here".to_string());
        let fallback =
            adaptive_select(statement, &pool, &[], &config, &LexicalSimilarity, Some(nonsense))
                .unwrap();
        let by_score =
            adaptive_select(statement, &pool, &[], &AdaptiveConfig { threshold: 0.0, ..AdaptiveConfig::default() }, &LexicalSimilarity, None)
                .unwrap();
        let fallback_ids: Vec<&str> = fallback.iter().map(|p| p.id.as_str()).collect();
        let score_ids: Vec<&str> = by_score.iter().map(|p| p.id.as_str()).collect();
        assert_eq!(fallback_ids, score_ids);
    }

    #[test]
    fn nothing_above_threshold_falls_back_to_seeds() {
        let bank = bundled_bank();
        let pool = bank.knowledge_for("rhombus-in-rectangle");
        let seeds = bank.problems_in_pack("Seed");
        let config = AdaptiveConfig { threshold: 0.999, ..AdaptiveConfig::default() };
        let picked = adaptive_select(
            "Entirely unrelated words about nothing.",
            &pool,
            &seeds,
            &config,
            &LexicalSimilarity,
            None,
        )
        .unwrap();
        assert!(picked.iter().all(|p| p.pack == "Seed"));
    }
}
