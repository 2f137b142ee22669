//! Chat backends and the staged solver/validator dialogues that produce
//! candidate constructions.
//!
//! A dialogue runs in up to two phases. In the plain-language phase a
//! solver talks through the construction and a validator reviews it; in the
//! formal phase the (possibly reviewed) plan is turned into a program in
//! the construction language and reviewed again. Each configured phase ends
//! in one of three ways, driven by the validator's per-step verdicts:
//!
//! * every step `Correct` — the phase is approved as it stands;
//! * any step `Incorrect` — the solver revises and the validator checks
//!   again, up to the round cap;
//! * only `Revise` suggestions — the solver folds them in once and the
//!   phase ends without another review pass.

use crate::dsl::{self, Program, ToolKind};
use crate::fnv1a;
use crate::prompt::{build_prompt, Example, PromptParts, Role, ELEMENTS_EXCERPTS, INCORRECT_EXAMPLES};
use crate::verify::matches_reference_prefix;
use once_cell::sync::Lazy;
use regex::Regex;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::{Duration, Instant};

/// One message in a chat conversation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: MessageRole,
    pub content: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageRole {
    System,
    User,
    Assistant,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> ChatMessage {
        ChatMessage { role: MessageRole::System, content: content.into() }
    }
    pub fn user(content: impl Into<String>) -> ChatMessage {
        ChatMessage { role: MessageRole::User, content: content.into() }
    }
    pub fn assistant(content: impl Into<String>) -> ChatMessage {
        ChatMessage { role: MessageRole::Assistant, content: content.into() }
    }
}

/// Why a backend failed to produce a reply.
#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum BackendError {
    /// A scripted backend ran out of queued replies.
    #[error("scripted backend has no replies left")]
    Exhausted,
    /// The credential environment variable for a remote backend is unset.
    #[error("credential environment variable `{0}` is not set")]
    MissingCredential(String),
    /// The remote endpoint kept failing after every retry.
    #[error("remote request failed: {0}")]
    Http(String),
    /// The remote endpoint answered with a body we could not read a
    /// completion from.
    #[error("malformed remote reply: {0}")]
    Malformed(String),
}

/// A chat completion provider. Implementations must be safe to share
/// across threads; the bench runner fans problems out in parallel.
pub trait ChatBackend: Send + Sync {
    /// Produce the assistant's next message for a conversation.
    fn complete(&self, messages: &[ChatMessage], temperature: f64)
        -> Result<String, BackendError>;
    /// Short label for transcripts.
    fn name(&self) -> &str;
}

/// Deterministic backend for tests and offline runs: replays a queue of
/// canned replies in order, ignoring the conversation entirely.
pub struct ScriptedBackend {
    replies: Mutex<VecDeque<String>>,
}

impl ScriptedBackend {
    pub fn new(replies: impl IntoIterator<Item = impl Into<String>>) -> ScriptedBackend {
        ScriptedBackend {
            replies: Mutex::new(replies.into_iter().map(Into::into).collect()),
        }
    }

    /// Number of replies still queued.
    pub fn remaining(&self) -> usize {
        self.replies.lock().expect("scripted queue lock").len()
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete(
        &self,
        _messages: &[ChatMessage],
        _temperature: f64,
    ) -> Result<String, BackendError> {
        self.replies
            .lock()
            .expect("scripted queue lock")
            .pop_front()
            .ok_or(BackendError::Exhausted)
    }

    fn name(&self) -> &str {
        "scripted"
    }
}

/// Process-wide pacing for remote requests: at most one request per
/// configured interval, shared across threads so parallel bench workers
/// cannot stampede an endpoint.
static LAST_REMOTE_REQUEST: Lazy<Mutex<Option<Instant>>> = Lazy::new(|| Mutex::new(None));

fn pace_remote_requests(min_interval: Duration) {
    let mut last = LAST_REMOTE_REQUEST.lock().expect("rate limiter lock");
    if let Some(previous) = *last {
        let elapsed = previous.elapsed();
        if elapsed < min_interval {
            std::thread::sleep(min_interval - elapsed);
        }
    }
    *last = Some(Instant::now());
}

/// An OpenAI-compatible chat-completions endpoint, called over HTTP with
/// retry and process-wide pacing. The credential is read from an
/// environment variable so keys never land in config files.
pub struct RemoteBackend {
    url: String,
    model: String,
    credential_env: String,
    min_interval: Duration,
    client: reqwest::blocking::Client,
}

impl RemoteBackend {
    pub fn new(
        url: impl Into<String>,
        model: impl Into<String>,
        credential_env: impl Into<String>,
        requests_per_minute: u32,
    ) -> RemoteBackend {
        let rpm = requests_per_minute.max(1);
        RemoteBackend {
            url: url.into(),
            model: model.into(),
            credential_env: credential_env.into(),
            min_interval: Duration::from_secs_f64(60.0 / rpm as f64),
            client: reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(120))
                .build()
                .expect("http client builds"),
        }
    }
}

impl ChatBackend for RemoteBackend {
    fn complete(
        &self,
        messages: &[ChatMessage],
        temperature: f64,
    ) -> Result<String, BackendError> {
        let key = std::env::var(&self.credential_env)
            .map_err(|_| BackendError::MissingCredential(self.credential_env.clone()))?;
        let body = serde_json::json!({
            "model": self.model,
            "messages": messages,
            "temperature": temperature,
        });
        let mut last_error = String::new();
        for attempt in 0..3u32 {
            if attempt > 0 {
                std::thread::sleep(Duration::from_secs(1 << attempt));
            }
            pace_remote_requests(self.min_interval);
            let sent = self
                .client
                .post(&self.url)
                .bearer_auth(&key)
                .json(&body)
                .send()
                .and_then(|r| r.error_for_status())
                .and_then(|r| r.json::<serde_json::Value>());
            match sent {
                Ok(value) => {
                    return value["choices"][0]["message"]["content"]
                        .as_str()
                        .map(str::to_string)
                        .ok_or_else(|| BackendError::Malformed(value.to_string()));
                }
                Err(e) => last_error = e.to_string(),
            }
        }
        Err(BackendError::Http(last_error))
    }

    fn name(&self) -> &str {
        &self.model
    }
}

/// Backend settings as they appear in a run configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendConfig {
    /// Canned replies, in order.
    Scripted {
        #[serde(default)]
        replies: Vec<String>,
    },
    /// OpenAI-compatible HTTP endpoint.
    Remote {
        url: String,
        model: String,
        /// Environment variable holding the bearer token.
        #[serde(default = "default_credential_env")]
        credential_env: String,
        #[serde(default = "default_requests_per_minute")]
        requests_per_minute: u32,
    },
}

fn default_credential_env() -> String {
    "CONSTRUCTION_API_KEY".to_string()
}

fn default_requests_per_minute() -> u32 {
    60
}

impl BackendConfig {
    pub fn build(&self) -> Box<dyn ChatBackend> {
        match self {
            BackendConfig::Scripted { replies } => Box::new(ScriptedBackend::new(replies.clone())),
            BackendConfig::Remote { url, model, credential_env, requests_per_minute } => Box::new(
                RemoteBackend::new(url, model, credential_env.clone(), *requests_per_minute),
            ),
        }
    }
}

/// A validator's judgement of one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Correct,
    Incorrect,
    Revise,
}

/// One parsed verdict line: `<tool> <k> : <verdict>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepVerdict {
    pub tool: String,
    pub step: usize,
    pub verdict: Verdict,
}

static VERDICT_LINE: Lazy<Regex> = Lazy::new(|| {
    Regex::new(r"(?im)^[\s\-*]*([a-z_]+)\s*(\d+)\s*:\s*(correct|incorrect|revise)\b").unwrap()
});

/// Pull the verdict lines out of a validator reply. Lines that do not match
/// the verdict grammar are ignored; a reply with no verdict lines at all is
/// treated by the dialogue as a blanket revision request.
pub fn parse_verdicts(text: &str) -> Vec<StepVerdict> {
    VERDICT_LINE
        .captures_iter(text)
        .filter_map(|c| {
            let verdict = match c[3].to_ascii_lowercase().as_str() {
                "correct" => Verdict::Correct,
                "incorrect" => Verdict::Incorrect,
                "revise" => Verdict::Revise,
                _ => return None,
            };
            Some(StepVerdict {
                tool: c[1].to_string(),
                step: c[2].parse().ok()?,
                verdict,
            })
        })
        .collect()
}

/// How a set of verdicts should steer the phase.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Assessment {
    /// Every judged step is correct.
    AllCorrect,
    /// At least one step is wrong; the revision must be reviewed again.
    HardReject,
    /// Suggestions only; fold them in once and move on. Also the reading of
    /// an empty or unparseable verdict reply.
    SoftRevise,
}

pub fn assess(verdicts: &[StepVerdict]) -> Assessment {
    if verdicts.iter().any(|v| v.verdict == Verdict::Incorrect) {
        Assessment::HardReject
    } else if verdicts.iter().all(|v| v.verdict == Verdict::Correct) && !verdicts.is_empty() {
        Assessment::AllCorrect
    } else {
        Assessment::SoftRevise
    }
}

static REVISION_LINE: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"^\s*(?:[A-Za-z_]+\s+)?(\d+)\s*:\s*(.+?)\s*$").unwrap());

/// Fold a revision reply into the previous proposal.
///
/// When every non-empty line of the reply is a replacement of the form
/// `<tool> <k>: <new step>` (tool optional), the named lines of the
/// previous proposal are patched in place; anything else replaces the
/// proposal wholesale.
pub fn incorporate_revision(previous: &str, reply: &str) -> String {
    let mut patches: Vec<(usize, String)> = Vec::new();
    for line in reply.lines().map(str::trim).filter(|l| !l.is_empty()) {
        match REVISION_LINE.captures(line) {
            Some(c) => match c[1].parse::<usize>() {
                Ok(k) => patches.push((k, c[2].to_string())),
                Err(_) => return reply.trim().to_string(),
            },
            None => return reply.trim().to_string(),
        }
    }
    if patches.is_empty() {
        return reply.trim().to_string();
    }
    let mut lines: Vec<String> = previous.lines().map(str::to_string).collect();
    let step_lines: Vec<usize> = lines
        .iter()
        .enumerate()
        .filter(|(_, l)| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('#')
        })
        .map(|(i, _)| i)
        .collect();
    for (k, replacement) in patches {
        match step_lines.get(k.wrapping_sub(1)) {
            Some(&index) => lines[index] = replacement,
            // A patch for a line that does not exist appends; the solver
            // may legitimately be adding a missing final step.
            None => lines.push(replacement),
        }
    }
    lines.join("\n")
}

/// Dialogue configurations: which phases run and whether a validator
/// reviews them. `S` is a solver turn, `SV` a solver turn with validation;
/// `NL` phases are plain language, `GT` phases are the formal language.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Configuration {
    #[serde(rename = "S_GT")]
    SGt,
    #[serde(rename = "SV_GT")]
    SvGt,
    #[serde(rename = "S_NL_S_GT")]
    SNlSGt,
    #[serde(rename = "SV_NL_SV_GT")]
    SvNlSvGt,
}

impl Configuration {
    pub fn has_nl_phase(self) -> bool {
        matches!(self, Configuration::SNlSGt | Configuration::SvNlSvGt)
    }
    pub fn validated(self) -> bool {
        matches!(self, Configuration::SvGt | Configuration::SvNlSvGt)
    }
    /// The configuration's wire name, as used in config files and reports.
    pub fn label(self) -> &'static str {
        match self {
            Configuration::SGt => "S_GT",
            Configuration::SvGt => "SV_GT",
            Configuration::SNlSGt => "S_NL_S_GT",
            Configuration::SvNlSvGt => "SV_NL_SV_GT",
        }
    }
}

/// How a dialogue ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DialogueStatus {
    /// A validator judged every step of the final proposal correct.
    Approved,
    /// The dialogue ran its course without a full approval: either no
    /// validator was configured, or the phase ended on folded-in
    /// suggestions.
    Settled,
    /// The validator kept rejecting until the round cap.
    RoundCapReached,
}

/// One backend call, recorded for the transcript. The prompt is stored as
/// a digest: transcripts are for auditing flow, not for replaying prompts.
#[derive(Debug, Clone, Serialize)]
pub struct TranscriptEntry {
    pub role: Role,
    pub round: usize,
    pub backend: String,
    pub prompt_digest: String,
    pub reply: String,
}

/// Everything a dialogue needs besides the backends.
#[derive(Debug, Clone)]
pub struct DialogueSpec<'a> {
    pub configuration: Configuration,
    /// Mechanical-feedback mode: the formal validator is replaced by a
    /// prefix check against the reference solutions (correct steps stay,
    /// the first wrong step is flagged), and the plain-language validator
    /// approves wholesale.
    pub feedback: bool,
    /// Validator turns allowed per phase before giving up.
    pub max_rounds: usize,
    pub temperature: f64,
    pub statement: &'a str,
    pub examples_nl: &'a [Example],
    pub examples_gt: &'a [Example],
    pub scene: Option<&'a str>,
    pub tools: &'a [ToolKind],
    /// Reference solutions; consulted only in feedback mode.
    pub references: &'a [Program],
}

/// The two seats at the table.
pub struct RoleBackends<'a> {
    pub solver: &'a dyn ChatBackend,
    pub validator: &'a dyn ChatBackend,
}

/// A finished dialogue: how it ended, the final formal text, and the
/// candidate program extracted from it.
#[derive(Debug, Clone)]
pub struct DialogueOutcome {
    pub status: DialogueStatus,
    pub final_text: String,
    pub candidate: Option<Program>,
    pub transcript: Vec<TranscriptEntry>,
}

fn digest(text: &str) -> String {
    format!("{:016x}", fnv1a(text))
}

struct DialogueRun<'a> {
    spec: &'a DialogueSpec<'a>,
    backends: &'a RoleBackends<'a>,
    transcript: Vec<TranscriptEntry>,
}

impl<'a> DialogueRun<'a> {
    fn call(
        &mut self,
        backend: &dyn ChatBackend,
        role: Role,
        round: usize,
        messages: &[ChatMessage],
    ) -> Result<String, BackendError> {
        let reply = backend.complete(messages, self.spec.temperature)?;
        let prompt_text: String = messages
            .iter()
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n---\n");
        self.transcript.push(TranscriptEntry {
            role,
            round,
            backend: backend.name().to_string(),
            prompt_digest: digest(&prompt_text),
            reply: reply.clone(),
        });
        Ok(reply)
    }

    fn solver_prompt(&self, role: Role, context: Vec<String>) -> String {
        let context_refs: Vec<&str> = context.iter().map(String::as_str).collect();
        build_prompt(&PromptParts {
            role,
            context: &context_refs,
            examples: if role.is_formal() { self.spec.examples_gt } else { self.spec.examples_nl },
            scene: self.spec.scene,
            statement: self.spec.statement,
            tools: self.spec.tools,
        })
    }

    fn validator_prompt(&self, role: Role) -> String {
        build_prompt(&PromptParts {
            role,
            context: &[ELEMENTS_EXCERPTS, INCORRECT_EXAMPLES],
            examples: &[],
            scene: self.spec.scene,
            statement: self.spec.statement,
            tools: self.spec.tools,
        })
    }

    /// Verdicts for a formal proposal in feedback mode: each step is
    /// correct while the tool sequence still prefix-matches a reference,
    /// and incorrect from the first departure on. Nothing about the
    /// reference itself is revealed.
    fn mechanical_verdicts(&self, proposal: &str) -> Vec<StepVerdict> {
        let Ok(extraction) = dsl::extract(proposal) else {
            return vec![StepVerdict {
                tool: "step".to_string(),
                step: 1,
                verdict: Verdict::Incorrect,
            }];
        };
        let kinds = extraction.program.tool_kinds();
        kinds
            .iter()
            .enumerate()
            .map(|(i, kind)| StepVerdict {
                tool: kind.name().to_string(),
                step: i + 1,
                verdict: if matches_reference_prefix(&kinds[..=i], self.spec.references) {
                    Verdict::Correct
                } else {
                    Verdict::Incorrect
                },
            })
            .collect()
    }

    /// Run one validated phase to completion. Returns the final proposal
    /// text and how the phase ended.
    fn validated_phase(
        &mut self,
        solver_role: Role,
        validator_role: Role,
        solver_system: &str,
        mut proposal: String,
    ) -> Result<(String, DialogueStatus), BackendError> {
        let validator_system = self.validator_prompt(validator_role);
        let mut conversation = vec![
            ChatMessage::system(solver_system.to_string()),
            ChatMessage::user("Solve the problem now.".to_string()),
            ChatMessage::assistant(proposal.clone()),
        ];
        for round in 1..=self.spec.max_rounds {
            let verdicts = if self.spec.feedback {
                if validator_role.is_formal() {
                    let verdicts = self.mechanical_verdicts(&proposal);
                    let text = verdicts
                        .iter()
                        .map(|v| format!("{} {} : {:?}", v.tool, v.step, v.verdict))
                        .collect::<Vec<_>>()
                        .join("\n");
                    self.transcript.push(TranscriptEntry {
                        role: validator_role,
                        round,
                        backend: "reference-check".to_string(),
                        prompt_digest: digest(&proposal),
                        reply: text,
                    });
                    verdicts
                } else {
                    // Plain-language feedback has no mechanical oracle;
                    // the plan passes through unchallenged.
                    return Ok((proposal, DialogueStatus::Approved));
                }
            } else {
                let messages = [
                    ChatMessage::system(validator_system.clone()),
                    ChatMessage::user(format!("Candidate solution:\n{proposal}")),
                ];
                let reply = self.call(self.backends.validator, validator_role, round, &messages)?;
                parse_verdicts(&reply)
            };
            let verdict_text = self
                .transcript
                .last()
                .map(|entry| entry.reply.clone())
                .unwrap_or_default();
            match assess(&verdicts) {
                Assessment::AllCorrect => return Ok((proposal, DialogueStatus::Approved)),
                Assessment::HardReject => {
                    conversation.push(ChatMessage::user(format!(
                        "A reviewer judged your steps:\n{verdict_text}\n\nRevise the solution. \
                         You may reply with replacement lines in the form `<tool> <k>: <new \
                         step>` for the steps that change, or restate the whole solution."
                    )));
                    let reply =
                        self.call(self.backends.solver, solver_role, round, &conversation)?;
                    proposal = incorporate_revision(&proposal, &reply);
                    conversation.push(ChatMessage::assistant(proposal.clone()));
                }
                Assessment::SoftRevise => {
                    conversation.push(ChatMessage::user(format!(
                        "A reviewer suggested improvements:\n{verdict_text}\n\nFold the \
                         suggestions into your solution. You may reply with replacement lines \
                         in the form `<tool> <k>: <new step>`, or restate the whole solution."
                    )));
                    let reply =
                        self.call(self.backends.solver, solver_role, round, &conversation)?;
                    proposal = incorporate_revision(&proposal, &reply);
                    return Ok((proposal, DialogueStatus::Settled));
                }
            }
        }
        Ok((proposal, DialogueStatus::RoundCapReached))
    }
}

/// Run one full dialogue and extract the candidate program from its final
/// formal text.
pub fn run_dialogue(
    spec: &DialogueSpec<'_>,
    backends: &RoleBackends<'_>,
) -> Result<DialogueOutcome, BackendError> {
    let mut run = DialogueRun { spec, backends, transcript: Vec::new() };

    let mut nl_plan: Option<String> = None;
    if spec.configuration.has_nl_phase() {
        let system = run.solver_prompt(Role::SolverNl, Vec::new());
        let opening =
            [ChatMessage::system(system.clone()), ChatMessage::user("Solve the problem now.")];
        let proposal = run.call(backends.solver, Role::SolverNl, 0, &opening)?;
        let plan = if spec.configuration.validated() {
            let (plan, _status) =
                run.validated_phase(Role::SolverNl, Role::ValidatorNl, &system, proposal)?;
            plan
        } else {
            proposal
        };
        nl_plan = Some(plan);
    }

    let mut gt_context = Vec::new();
    if let Some(plan) = &nl_plan {
        gt_context.push(format!("A reviewed plan for this construction, in plain language:\n{plan}"));
    }
    let system = run.solver_prompt(Role::SolverGt, gt_context);
    let opening =
        [ChatMessage::system(system.clone()), ChatMessage::user("Solve the problem now.")];
    let proposal = run.call(backends.solver, Role::SolverGt, 0, &opening)?;
    let (final_text, status) = if spec.configuration.validated() || spec.feedback {
        run.validated_phase(Role::SolverGt, Role::ValidatorGt, &system, proposal)?
    } else {
        (proposal, DialogueStatus::Settled)
    };

    let candidate = dsl::extract(&final_text).ok().map(|e| e.program);
    Ok(DialogueOutcome { status, final_text, candidate, transcript: run.transcript })
}

/// Run `n` independent dialogues and return each one's candidate program
/// (`None` where a dialogue failed or nothing could be extracted). Backend
/// errors on a sample count as a missing candidate rather than aborting
/// the batch: an unbiased estimate needs all `n` attempts reported.
pub fn sample_candidates(
    spec: &DialogueSpec<'_>,
    backends: &RoleBackends<'_>,
    n: usize,
) -> (Vec<Option<Program>>, Vec<TranscriptEntry>) {
    let mut candidates = Vec::with_capacity(n);
    let mut transcript = Vec::new();
    for _ in 0..n {
        match run_dialogue(spec, backends) {
            Ok(outcome) => {
                candidates.push(outcome.candidate);
                transcript.extend(outcome.transcript);
            }
            Err(_) => candidates.push(None),
        }
    }
    (candidates, transcript)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_lines_parse_and_stray_text_is_ignored() {
        let reply = "Looks close.\n\
                     circle 1 : Correct\n\
                     - intersect 2: Incorrect\n\
                     segment 3 : Revise\n\
                     The second step crosses the wrong pair.";
        let verdicts = parse_verdicts(reply);
        assert_eq!(verdicts.len(), 3);
        assert_eq!(verdicts[0], StepVerdict {
            tool: "circle".into(),
            step: 1,
            verdict: Verdict::Correct
        });
        assert_eq!(verdicts[1].verdict, Verdict::Incorrect);
        assert_eq!(verdicts[2].verdict, Verdict::Revise);
        assert!(parse_verdicts("no verdicts here").is_empty());
    }

    #[test]
    fn assessment_classes_follow_the_worst_verdict() {
        let correct = StepVerdict { tool: "line".into(), step: 1, verdict: Verdict::Correct };
        let incorrect = StepVerdict { tool: "line".into(), step: 2, verdict: Verdict::Incorrect };
        let revise = StepVerdict { tool: "line".into(), step: 3, verdict: Verdict::Revise };
        assert_eq!(assess(&[correct.clone()]), Assessment::AllCorrect);
        assert_eq!(assess(&[correct.clone(), incorrect]), Assessment::HardReject);
        assert_eq!(assess(&[correct, revise]), Assessment::SoftRevise);
        assert_eq!(assess(&[]), Assessment::SoftRevise);
    }

    #[test]
    fn revisions_patch_named_lines_or_replace_wholesale() {
        let previous = "circle(A, B) -> c1\ncircle(B, A) -> c2\nintersect(c1, c2) -> P, Q";
        let patched = incorporate_revision(previous, "circle 2: circle(B, C) -> c2");
        assert_eq!(patched, "circle(A, B) -> c1\ncircle(B, C) -> c2\nintersect(c1, c2) -> P, Q");
        // Multiple patches, tool names optional.
        let patched = incorporate_revision(previous, "1: line(A, B) -> l\n3: intersect(l, c2) -> P");
        assert!(patched.starts_with("line(A, B) -> l\n"));
        assert!(patched.ends_with("intersect(l, c2) -> P"));
        // Prose replaces wholesale.
        let replaced = incorporate_revision(previous, "Start over:\nline(A, B) -> l");
        assert_eq!(replaced, "Start over:\nline(A, B) -> l");
        // A patch past the end appends.
        let extended = incorporate_revision(previous, "segment 4: segment(P, Q) -> s");
        assert!(extended.ends_with("segment(P, Q) -> s"));
    }

    #[test]
    fn scripted_backends_replay_in_order_and_exhaust() {
        let backend = ScriptedBackend::new(["first", "second"]);
        let messages = [ChatMessage::user("hi")];
        assert_eq!(backend.complete(&messages, 0.0).unwrap(), "first");
        assert_eq!(backend.complete(&messages, 0.0).unwrap(), "second");
        assert_eq!(backend.complete(&messages, 0.0), Err(BackendError::Exhausted));
    }

    #[test]
    fn all_correct_verdicts_approve_immediately() {
        let spec = DialogueSpec {
            configuration: Configuration::SvGt,
            feedback: false,
            max_rounds: 5,
            temperature: 0.0,
            statement: "Construct the midpoint M of AB.",
            examples_nl: &[],
            examples_gt: &[],
            scene: None,
            tools: &ToolKind::ALL,
            references: &[],
        };
        let solver = ScriptedBackend::new([
            "circle(A, B) -> c1\ncircle(B, A) -> c2\nintersect(c1, c2) -> P, Q\nline(P, Q) -> m\nintersect(m, AB) -> M",
        ]);
        let validator = ScriptedBackend::new([
            "circle 1 : Correct\ncircle 2 : Correct\nintersect 3 : Correct\nline 4 : Correct\nintersect 5 : Correct",
        ]);
        let outcome = run_dialogue(&spec, &RoleBackends {
            solver: &solver,
            validator: &validator,
        })
        .unwrap();
        assert_eq!(outcome.status, DialogueStatus::Approved);
        assert_eq!(outcome.transcript.len(), 2);
        let program = outcome.candidate.expect("extracts");
        assert_eq!(program.steps.len(), 5);
        assert_eq!(solver.remaining(), 0);
        assert_eq!(validator.remaining(), 0);
    }

    #[test]
    fn hard_rejections_loop_until_the_round_cap() {
        let spec = DialogueSpec {
            configuration: Configuration::SvGt,
            feedback: false,
            max_rounds: 5,
            temperature: 0.0,
            statement: "Construct the midpoint M of AB.",
            examples_nl: &[],
            examples_gt: &[],
            scene: None,
            tools: &ToolKind::ALL,
            references: &[],
        };
        let solver = ScriptedBackend::new([
            "line(A, B) -> l",
            "line 1: ray(A, B) -> l",
            "line 1: ray(A, B) -> l",
            "line 1: ray(A, B) -> l",
            "line 1: ray(A, B) -> l",
            "line 1: ray(A, B) -> l",
        ]);
        let validator = ScriptedBackend::new([
            "line 1 : Incorrect",
            "ray 1 : Incorrect",
            "ray 1 : Incorrect",
            "ray 1 : Incorrect",
            "ray 1 : Incorrect",
        ]);
        let outcome = run_dialogue(&spec, &RoleBackends {
            solver: &solver,
            validator: &validator,
        })
        .unwrap();
        assert_eq!(outcome.status, DialogueStatus::RoundCapReached);
        // Exactly five validator turns were taken.
        let validator_turns = outcome
            .transcript
            .iter()
            .filter(|entry| entry.role == Role::ValidatorGt)
            .count();
        assert_eq!(validator_turns, 5);
        assert_eq!(validator.remaining(), 0);
    }

    #[test]
    fn soft_suggestions_fold_in_once_without_revalidation() {
        let spec = DialogueSpec {
            configuration: Configuration::SvNlSvGt,
            feedback: false,
            max_rounds: 5,
            temperature: 0.0,
            statement: "Construct the midpoint M of AB.",
            examples_nl: &[],
            examples_gt: &[],
            scene: None,
            tools: &ToolKind::ALL,
            references: &[],
        };
        // Six turns: plain solver, plain validator (suggestion), plain
        // solver folding it in; formal solver, formal validator
        // (suggestion), formal solver folding it in.
        let solver = ScriptedBackend::new([
            "1: Draw both circles.\n2: Join the crossings.",
            "2: Join the two circle crossings with a line.",
            "circle(A, B) -> c1\ncircle(B, A) -> c2\nintersect(c1, c2) -> P, Q\nline(P, Q) -> m\nintersect(m, AB) -> M",
            "line 4: line(P, Q) -> m",
        ]);
        let validator = ScriptedBackend::new([
            "step 2 : Revise",
            "line 4 : Revise\ncircle 1 : Correct",
        ]);
        let outcome = run_dialogue(&spec, &RoleBackends {
            solver: &solver,
            validator: &validator,
        })
        .unwrap();
        assert_eq!(outcome.status, DialogueStatus::Settled);
        assert_eq!(outcome.transcript.len(), 6);
        assert!(outcome.candidate.is_some());
        assert_eq!(solver.remaining(), 0);
        assert_eq!(validator.remaining(), 0);
    }

    #[test]
    fn feedback_mode_checks_formal_steps_against_references() {
        let reference = dsl::parse(
            "circle(A, B) -> c1\ncircle(B, A) -> c2\nintersect(c1, c2) -> P, Q\nline(P, Q) -> m\nintersect(m, AB) -> M",
        )
        .unwrap();
        let spec = DialogueSpec {
            configuration: Configuration::SvGt,
            feedback: true,
            max_rounds: 5,
            temperature: 0.0,
            statement: "Construct the midpoint M of AB.",
            examples_nl: &[],
            examples_gt: &[],
            scene: None,
            tools: &ToolKind::ALL,
            references: std::slice::from_ref(&reference),
        };
        let solver = ScriptedBackend::new([
            // Wrong third step, then a fix.
            "circle(A, B) -> c1\ncircle(B, A) -> c2\nsegment(A, B) -> s",
            "segment 3: intersect(c1, c2) -> P, Q\nsegment 4: line(P, Q) -> m\nsegment 5: intersect(m, AB) -> M",
        ]);
        let validator = ScriptedBackend::new(Vec::<String>::new());
        let outcome = run_dialogue(&spec, &RoleBackends {
            solver: &solver,
            validator: &validator,
        })
        .unwrap();
        // The mechanical check approves once the sequence matches.
        assert_eq!(outcome.status, DialogueStatus::Approved);
        assert_eq!(validator.remaining(), 0, "no backend validator calls in feedback mode");
        let mechanical: Vec<&TranscriptEntry> = outcome
            .transcript
            .iter()
            .filter(|entry| entry.backend == "reference-check")
            .collect();
        assert!(mechanical.len() >= 2);
        assert!(mechanical[0].reply.contains("circle 1 : Correct"));
        assert!(mechanical[0].reply.contains("segment 3 : Incorrect"));
    }
}
