//! Prompt assembly: renaming policies, few-shot selection, scene
//! descriptions, and deterministic prompt building.
//!
//! Everything here is a pure function of its inputs so that a prompt built
//! twice from the same pieces is byte-identical; the only nondeterminism in
//! the pipeline lives behind the chat backends.

mod scene;
mod select;

pub use scene::{describe_scene, scene_dump};
pub use select::{
    adaptive_select, stage_one, AdaptiveConfig, LexicalSimilarity, SelectError, SelectMode,
    SimilarityModel,
};

use crate::bank::{InitParam, Problem};
use crate::dsl::{
    self, invert_rename_map, rename_identifiers, rename_one, rename_statement_text, RenameError,
    RenderStyle, ToolKind,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// How identifiers in a problem are relabeled before prompting.
///
/// Renaming probes whether a solver keys on the customary letters (`M` for a
/// midpoint, `O` for a center) rather than on the geometry. All policies
/// produce an invertible map, so a candidate written against the renamed
/// problem can be mapped back and verified against the original.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RenamePolicy {
    /// Keep every name as authored.
    Original,
    /// Shift every single-letter uppercase point name forward by `k`
    /// positions in the alphabet, wrapping `Z` back to `A`. The shift is a
    /// bijection on the letters, so no two names can collide.
    Shift(u8),
    /// Rename only the statement's target to the literal `X`. When `X` is
    /// already taken the next free letter is used instead and recorded.
    TargetToX,
}

impl RenamePolicy {
    /// Parse the command-line / config spelling: `original`, `x`, `+1`,
    /// `+2`, or `+3`.
    pub fn parse(text: &str) -> Option<RenamePolicy> {
        match text {
            "original" => Some(RenamePolicy::Original),
            "x" | "X" => Some(RenamePolicy::TargetToX),
            _ => {
                let k: u8 = text.strip_prefix('+')?.parse().ok()?;
                (1..=25).contains(&k).then_some(RenamePolicy::Shift(k))
            }
        }
    }
}

/// A problem with its identifiers relabeled, plus the map that did it.
#[derive(Debug, Clone)]
pub struct RenamedProblem {
    pub problem: Problem,
    /// Map from original to renamed identifiers; invert it to translate a
    /// candidate back into the original labels.
    pub map: std::collections::BTreeMap<String, String>,
    /// Letter used instead of `X` when [`RenamePolicy::TargetToX`] found
    /// `X` already taken.
    pub fallback_letter: Option<String>,
}

/// Every identifier a problem mentions: statement tokens, initial-scene
/// labels, setup and reference programs, goals, and the target. Letters in
/// point-run tokens such as `AB` or `ABCD` are recorded individually so that
/// letter-level renames can check against them.
fn used_identifiers(problem: &Problem) -> BTreeSet<String> {
    let mut used = BTreeSet::new();
    let note = |token: &str, used: &mut BTreeSet<String>| {
        if (2..=4).contains(&token.len()) && token.chars().all(|c| c.is_ascii_uppercase()) {
            for c in token.chars() {
                used.insert(c.to_string());
            }
        }
        used.insert(token.to_string());
    };
    for token in problem
        .statement
        .split(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
        .filter(|t| !t.is_empty())
    {
        note(token, &mut used);
    }
    for label in problem.init_labels() {
        note(&label, &mut used);
    }
    let mut programs = vec![problem.init.program.clone()];
    programs.extend(problem.references.iter().cloned());
    for text in &programs {
        if let Ok(program) = dsl::parse(text) {
            for step in &program.steps {
                for name in step.args.iter().chain(step.outputs.iter()) {
                    note(name, &mut used);
                }
                if let Some(pick) = &step.pick {
                    for name in pick.idents() {
                        note(name, &mut used);
                    }
                }
            }
        }
    }
    for goal in &problem.goals {
        note(goal, &mut used);
    }
    note(&problem.target, &mut used);
    used
}

fn shift_letter(c: char, k: u8) -> char {
    let offset = (c as u8 - b'A' + k % 26) % 26;
    (b'A' + offset) as char
}

/// Build the rename map a policy prescribes for a problem.
fn policy_map(
    problem: &Problem,
    policy: RenamePolicy,
) -> (std::collections::BTreeMap<String, String>, Option<String>) {
    let mut map = std::collections::BTreeMap::new();
    match policy {
        RenamePolicy::Original => (map, None),
        RenamePolicy::Shift(k) => {
            for ident in used_identifiers(problem) {
                if ident.len() == 1 {
                    let c = ident.chars().next().unwrap();
                    if c.is_ascii_uppercase() {
                        let to = shift_letter(c, k);
                        if to != c {
                            map.insert(ident, to.to_string());
                        }
                    }
                }
            }
            (map, None)
        }
        RenamePolicy::TargetToX => {
            if problem.target == "X" {
                return (map, None);
            }
            let used = used_identifiers(problem);
            // X first, then wrap through the alphabet: Y, Z, A, B, ...
            let mut fallback = None;
            for i in 0..26u8 {
                let candidate = shift_letter('X', i).to_string();
                if candidate != problem.target && !used.contains(&candidate) {
                    if candidate != "X" {
                        fallback = Some(candidate.clone());
                    }
                    map.insert(problem.target.clone(), candidate);
                    break;
                }
            }
            (map, fallback)
        }
    }
}

/// Apply a rename map to every part of a problem: statement, initial-scene
/// labels, setup program, references, goals, and target. Programs are
/// re-rendered canonically.
pub fn apply_rename_map(
    problem: &Problem,
    map: &std::collections::BTreeMap<String, String>,
) -> Result<Problem, RenameError> {
    let mut renamed = problem.clone();
    renamed.statement = rename_statement_text(&problem.statement, map)?;
    renamed.target = rename_one(&problem.target, map);
    for goal in &mut renamed.goals {
        *goal = rename_one(goal, map);
    }
    let rename_program = |text: &str| -> Result<String, RenameError> {
        let program = dsl::parse(text).map_err(|_| RenameError::UnparseableProgram)?;
        Ok(dsl::render(&rename_identifiers(&program, map)?, RenderStyle::Canonical))
    };
    renamed.init.program = rename_program(&problem.init.program)?;
    for reference in &mut renamed.references {
        *reference = rename_program(reference)?;
    }
    for param in &mut renamed.init.params {
        let rename_label = |label: &mut String| *label = rename_one(label, map);
        match param {
            InitParam::PointInBox { name } => rename_label(name),
            InitParam::LengthRange { .. } | InitParam::AngleDeg { .. } => {}
            InitParam::Rectangle { points, center, .. }
            | InitParam::Square { points, center, .. } => {
                points.iter_mut().for_each(rename_label);
                if let Some(center) = center {
                    rename_label(center);
                }
            }
            InitParam::Triangle { points, .. } => points.iter_mut().for_each(rename_label),
            InitParam::AngleRays { vertex, arms, rays, .. } => {
                rename_label(vertex);
                arms.iter_mut().for_each(rename_label);
                rays.iter_mut().for_each(rename_label);
            }
            InitParam::Circle { label, center, .. } => {
                rename_label(label);
                if let Some(center) = center {
                    rename_label(center);
                }
            }
        }
    }
    Ok(renamed)
}

/// Relabel a problem according to a policy. The returned map translates
/// original names to renamed ones; [`invert_rename_map`] flips it so a
/// candidate against the renamed problem can be carried back.
pub fn apply_rename(
    problem: &Problem,
    policy: RenamePolicy,
) -> Result<RenamedProblem, RenameError> {
    let (map, fallback_letter) = policy_map(problem, policy);
    let renamed = apply_rename_map(problem, &map)?;
    Ok(RenamedProblem { problem: renamed, map, fallback_letter })
}

/// Translate a candidate program written against a renamed problem back
/// into the original labels. Identifiers the candidate invented (not in the
/// map) pass through untouched.
pub fn restore_candidate(
    candidate: &dsl::Program,
    map: &std::collections::BTreeMap<String, String>,
) -> Result<dsl::Program, RenameError> {
    rename_identifiers(candidate, &invert_rename_map(map))
}

/// Conversation roles in the solving pipeline. Natural-language roles talk
/// through a construction in prose; formal roles read and write the
/// construction language directly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    SolverNl,
    SolverGt,
    ValidatorNl,
    ValidatorGt,
}

impl Role {
    /// Instruction block that opens every prompt for this role.
    pub fn preamble(self) -> &'static str {
        match self {
            Role::SolverNl => include_str!("../../resources/roles/solver_nl.txt"),
            Role::SolverGt => include_str!("../../resources/roles/solver_gt.txt"),
            Role::ValidatorNl => include_str!("../../resources/roles/validator_nl.txt"),
            Role::ValidatorGt => include_str!("../../resources/roles/validator_gt.txt"),
        }
    }

    pub fn is_validator(self) -> bool {
        matches!(self, Role::ValidatorNl | Role::ValidatorGt)
    }

    /// Whether the role reads and writes the formal construction language.
    pub fn is_formal(self) -> bool {
        matches!(self, Role::SolverGt | Role::ValidatorGt)
    }

    /// Example-solution rendering appropriate for the role.
    pub fn render_style(self) -> RenderStyle {
        if self.is_formal() {
            RenderStyle::Canonical
        } else {
            RenderStyle::Prose
        }
    }
}

/// Classical construction results validators may lean on.
pub const ELEMENTS_EXCERPTS: &str = include_str!("../../resources/elements_excerpts.txt");

/// Annotated wrong constructions with their corrections, shown to
/// validators as counterexample patterns.
pub const INCORRECT_EXAMPLES: &str = include_str!("../../resources/incorrect_examples.txt");

/// One-line signature and description of a tool, for the allowed-tools
/// section of a prompt.
pub fn tool_description(tool: ToolKind) -> (&'static str, &'static str) {
    match tool {
        ToolKind::Line => ("line(A, B)", "the infinite straight line through points A and B"),
        ToolKind::Ray => ("ray(A, B)", "the ray that starts at A and passes through B"),
        ToolKind::Segment => ("segment(A, B)", "the segment with endpoints A and B"),
        ToolKind::Circle => ("circle(O, P)", "the circle centered at O passing through P"),
        ToolKind::Compass => {
            ("compass(O, A, B)", "the circle centered at O whose radius equals the distance |AB|")
        }
        ToolKind::PerpBisector => {
            ("perp_bisector(A, B)", "the perpendicular bisector line of points A and B")
        }
        ToolKind::Perpendicular => {
            ("perpendicular(l, P)", "the line through P perpendicular to the line-like object l")
        }
        ToolKind::Parallel => {
            ("parallel(l, P)", "the line through P parallel to the line-like object l")
        }
        ToolKind::AngleBisector => {
            ("angle_bisector(A, V, B)", "the ray from vertex V bisecting the angle AVB")
        }
        ToolKind::Intersect => (
            "intersect(u, v)",
            "the intersection point(s) of u and v; one point may be selected with \
             [near X], [far X], [left A B], or [right A B]",
        ),
        ToolKind::PointOn => ("point_on(u)", "an arbitrary point lying on the object u"),
        ToolKind::FreePoint => ("free_point()", "an arbitrary point of the plane"),
    }
}

/// Render the allowed-tools section: one `- signature: description` line per
/// tool, in the order given.
pub fn tool_catalog(tools: &[ToolKind]) -> String {
    let mut out = String::new();
    for tool in tools {
        let (signature, description) = tool_description(*tool);
        out.push_str(&format!("- {signature}: {description}.\n"));
    }
    out
}

/// A worked example shown in a prompt: problem statement plus a reference
/// solution rendered in the role's style.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub title: String,
    pub statement: String,
    pub solution: String,
}

/// Render a problem's first reference as a worked example. Returns `None`
/// when the problem has no parseable reference.
pub fn render_example(problem: &Problem, style: RenderStyle) -> Option<Example> {
    let program = dsl::parse(problem.references.first()?).ok()?;
    Some(Example {
        title: problem.title.clone(),
        statement: problem.statement.clone(),
        solution: dsl::render(&program, style),
    })
}

/// Everything that goes into one prompt, in the order it will appear.
#[derive(Debug, Clone)]
pub struct PromptParts<'a> {
    pub role: Role,
    /// Extra instruction blocks after the preamble (validator reference
    /// material, feedback notes).
    pub context: &'a [&'a str],
    pub examples: &'a [Example],
    /// Scene description; rendered under its own heading when present.
    pub scene: Option<&'a str>,
    pub statement: &'a str,
    /// Tools the solution may use, in catalog order.
    pub tools: &'a [ToolKind],
}

/// Assemble a prompt. Pure: the same parts produce the same bytes.
pub fn build_prompt(parts: &PromptParts) -> String {
    let mut out = String::new();
    let push_block = |out: &mut String, text: &str| {
        out.push_str(text);
        if !text.ends_with('\n') {
            out.push('\n');
        }
    };
    push_block(&mut out, parts.role.preamble());
    for block in parts.context {
        out.push('\n');
        push_block(&mut out, block);
    }
    if !parts.examples.is_empty() {
        out.push_str("\n## Worked examples\n");
        for (i, example) in parts.examples.iter().enumerate() {
            out.push_str(&format!(
                "\n### Example {}: {}\n\nProblem: {}\n\nSolution:\n",
                i + 1,
                example.title,
                example.statement
            ));
            push_block(&mut out, &example.solution);
        }
    }
    if let Some(scene) = parts.scene {
        out.push_str("\n## Scene\n\n");
        push_block(&mut out, scene);
    }
    out.push_str("\n## Problem\n\n");
    push_block(&mut out, parts.statement);
    out.push_str("\n## Allowed tools\n\n");
    out.push_str(&tool_catalog(parts.tools));
    out
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
    fn policy_parsing_covers_the_cli_spellings() {
        assert_eq!(RenamePolicy::parse("original"), Some(RenamePolicy::Original));
        assert_eq!(RenamePolicy::parse("x"), Some(RenamePolicy::TargetToX));
        assert_eq!(RenamePolicy::parse("+1"), Some(RenamePolicy::Shift(1)));
        assert_eq!(RenamePolicy::parse("+3"), Some(RenamePolicy::Shift(3)));
        assert_eq!(RenamePolicy::parse("+0"), None);
        assert_eq!(RenamePolicy::parse("+26"), None);
        assert_eq!(RenamePolicy::parse("shift"), None);
    }

    #[test]
    fn shift_renames_all_point_letters_bijectively() {
        let bank = bundled_bank();
        let problem = bank.problem("equilateral-triangle").unwrap();
        let renamed = apply_rename(problem, RenamePolicy::Shift(1)).unwrap();
        assert_eq!(renamed.map.get("A").map(String::as_str), Some("B"));
        assert_eq!(renamed.map.get("B").map(String::as_str), Some("C"));
        assert_eq!(renamed.map.get("C").map(String::as_str), Some("D"));
        assert!(renamed.problem.statement.contains("BC"));
        assert_eq!(renamed.problem.target, "D");
        assert!(renamed.fallback_letter.is_none());
        // The renamed problem still names distinct points.
        let restored =
            apply_rename_map(&renamed.problem, &invert_rename_map(&renamed.map)).unwrap();
        assert_eq!(restored.statement, problem.statement);
        assert_eq!(restored.goals, problem.goals);
        assert_eq!(restored.target, problem.target);
    }

    #[test]
    fn shift_wraps_z_to_a() {
        assert_eq!(shift_letter('Z', 1), 'A');
        assert_eq!(shift_letter('Y', 3), 'B');
        assert_eq!(shift_letter('A', 25), 'Z');
    }

    #[test]
    fn target_to_x_renames_only_the_target() {
        let bank = bundled_bank();
        let problem = bank.problem("root-two").unwrap();
        let renamed = apply_rename(problem, RenamePolicy::TargetToX).unwrap();
        assert_eq!(renamed.map.len(), 1);
        assert_eq!(renamed.map.get("C").map(String::as_str), Some("X"));
        assert!(renamed.fallback_letter.is_none());
        assert!(renamed.problem.statement.contains("a point X on the line AB"));
        assert!(renamed.problem.statement.contains("the length of AX"));
        assert_eq!(renamed.problem.target, "X");
    }

    #[test]
    fn target_to_x_scans_past_a_taken_x() {
        let bank = bundled_bank();
        // `draw-line` and `mark-intersection` already use X; the policy must
        // leave an X-target alone and pick a free letter when X is taken.
        let already_x = bank.problem("draw-line").unwrap();
        let renamed = apply_rename(already_x, RenamePolicy::TargetToX).unwrap();
        assert!(renamed.map.is_empty());
        assert_eq!(renamed.problem, *already_x);

        let mut crowded = bank.problem("root-two").unwrap().clone();
        crowded.statement.push_str(" A point X is also marked.");
        crowded.init.params.push(InitParam::PointInBox { name: "X".into() });
        let renamed = apply_rename(&crowded, RenamePolicy::TargetToX).unwrap();
        assert_eq!(renamed.map.get("C").map(String::as_str), Some("Y"));
        assert_eq!(renamed.fallback_letter.as_deref(), Some("Y"));
    }

    #[test]
    fn lowercase_targets_rename_to_x() {
        let bank = bundled_bank();
        let problem = bank.problem("halve-rectangle").unwrap();
        let renamed = apply_rename(problem, RenamePolicy::TargetToX).unwrap();
        assert_eq!(renamed.map.get("w").map(String::as_str), Some("X"));
        assert!(renamed.problem.statement.contains("a line X through E"));
        assert_eq!(renamed.problem.target, "X");
        let restored =
            apply_rename_map(&renamed.problem, &invert_rename_map(&renamed.map)).unwrap();
        assert_eq!(restored.statement, problem.statement);
    }

    #[test]
    fn renamed_references_still_parse_and_rename_back() {
        let bank = bundled_bank();
        for problem in &bank.problems {
            for policy in
                [RenamePolicy::Shift(1), RenamePolicy::Shift(2), RenamePolicy::TargetToX]
            {
                let renamed = apply_rename(problem, policy)
                    .unwrap_or_else(|e| panic!("{} under {policy:?}: {e}", problem.id));
                let restored =
                    apply_rename_map(&renamed.problem, &invert_rename_map(&renamed.map)).unwrap();
                assert_eq!(restored.statement, problem.statement, "{}", problem.id);
                assert_eq!(restored.goals, problem.goals, "{}", problem.id);
                assert_eq!(restored.target, problem.target, "{}", problem.id);
                let original = problem.parsed_references().unwrap();
                let back = restored.parsed_references().unwrap();
                assert_eq!(original, back, "{}", problem.id);
            }
        }
    }

    #[test]
    fn prompts_are_byte_stable_and_ordered() {
        let examples = vec![Example {
            title: "Sample".into(),
            statement: "Construct the midpoint M of AB.".into(),
            solution: "circle(A, B) -> c1\ncircle(B, A) -> c2".into(),
        }];
        let parts = PromptParts {
            role: Role::SolverGt,
            context: &[],
            examples: &examples,
            scene: Some("Points:\n- A is at (0.00, 0.00)."),
            statement: "Construct the point P.",
            tools: &[ToolKind::Circle, ToolKind::Intersect],
        };
        let once = build_prompt(&parts);
        let twice = build_prompt(&parts);
        assert_eq!(once, twice);
        let headings = ["## Worked examples", "## Scene", "## Problem", "## Allowed tools"];
        let mut last = 0;
        for heading in headings {
            let at = once.find(heading).unwrap_or_else(|| panic!("missing {heading}"));
            assert!(at > last, "{heading} out of order");
            last = at;
        }
        assert!(once.contains("- circle(O, P): the circle centered at O passing through P."));
        assert!(!once.contains("free_point"), "catalog lists only the allowed tools");
    }

    #[test]
    fn validator_prompts_carry_reference_material() {
        let parts = PromptParts {
            role: Role::ValidatorGt,
            context: &[ELEMENTS_EXCERPTS, INCORRECT_EXAMPLES],
            examples: &[],
            scene: None,
            statement: "Construct the point P.",
            tools: &[ToolKind::Circle],
        };
        let prompt = build_prompt(&parts);
        assert!(prompt.contains("equilateral triangle"));
        assert!(prompt.contains("Common mistakes"));
        assert!(prompt.contains("Correct\n"));
    }
}
