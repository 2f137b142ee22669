//! Program execution over concrete scenes, and end-to-end verification of a
//! candidate construction against a problem's reference solutions.
//!
//! Execution is deterministic: arbitrary-point tools draw from the scene's
//! own RNG, so two executions forked from the same scene clone see identical
//! samples. The one non-deterministic-looking spot — a two-point
//! intersection bound to a single output without a pick hint — is resolved
//! by an explicit choice vector, which lets verification run a bounded
//! depth-first search over all readings of an ambiguous candidate instead of
//! guessing one.
//!
//! A candidate is `fully_correct` when, on every sampled instance of the
//! problem, some reading of it constructs all goal objects (up to the match
//! tolerance), and it additionally respects the problem's tool whitelist and
//! passes static validation.

use crate::bank::{instance_seed, instantiate, Problem};
use crate::dsl::{self, static_validate, Pick, Program, ToolKind};
use crate::geom::{self, equivalent, GeomError, Point, SampleTarget, Scene, Shape, EPS_MATCH};
use serde::{Deserialize, Serialize};

/// Instances sampled per verification when the caller does not override it.
pub const DEFAULT_INSTANCES: usize = 5;
/// Most unhinted two-point choices the branch search will stack.
const BRANCH_DEPTH_CAP: usize = 8;
/// Most complete executions the branch search will attempt.
const BRANCH_LEAF_CAP: usize = 256;

/// Why a step failed during execution.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepErrorKind {
    #[error("the objects do not intersect")]
    NoIntersection,
    #[error("two intersection points were requested but the objects touch at one")]
    TangencyShortfall,
    #[error("degenerate input: {detail}")]
    DegenerateInput { detail: String },
    #[error("identifier `{name}` is not bound")]
    UnboundIdentifier { name: String },
    #[error("identifier `{name}` is already bound")]
    Rebinding { name: String },
    #[error("point sampling exhausted after {rejections} rejections")]
    SamplingExhausted { rejections: usize },
}

/// A step failure, with the 1-based index of the offending step.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
#[error("step {step}: {kind}")]
pub struct StepError {
    pub step: usize,
    pub kind: StepErrorKind,
}

fn geom_error_kind(err: GeomError) -> StepErrorKind {
    match err {
        GeomError::DegenerateInput(detail) => StepErrorKind::DegenerateInput { detail },
        GeomError::ArityMismatch { tool, expected, got } => StepErrorKind::DegenerateInput {
            detail: format!("{tool} takes {expected} argument(s), got {got}"),
        },
        GeomError::SamplingExhausted(rejections) => {
            StepErrorKind::SamplingExhausted { rejections }
        }
    }
}

/// Execute a program against a scene, resolving any unhinted two-point
/// intersection to the lexicographically first point.
pub fn execute_program(scene: &mut Scene, program: &Program) -> Result<(), StepError> {
    execute_with_choices(scene, program, &[]).map(|_| ())
}

/// Execute a program, resolving unhinted two-point single-output
/// intersections from `choices` in encounter order (0 = lexicographically
/// first point, missing entries default to 0). Returns how many such
/// decisions the run hit, which is what the branch search uses to decide
/// whether deeper exploration exists.
pub fn execute_with_choices(
    scene: &mut Scene,
    program: &Program,
    choices: &[usize],
) -> Result<usize, StepError> {
    let mut ambiguous = 0usize;
    for (idx, step) in program.steps.iter().enumerate() {
        let step_no = idx + 1;
        let fail = |kind: StepErrorKind| StepError { step: step_no, kind };
        let mut shapes = Vec::with_capacity(step.args.len());
        for arg in &step.args {
            shapes.push(*scene.get(arg).ok_or_else(|| {
                fail(StepErrorKind::UnboundIdentifier { name: arg.clone() })
            })?);
        }
        let bind = |scene: &mut Scene, label: &str, shape: Shape| {
            if scene.contains(label) {
                return Err(fail(StepErrorKind::Rebinding { name: label.to_string() }));
            }
            scene
                .push(label, shape)
                .map_err(|e| fail(geom_error_kind(e)))
        };
        match step.tool {
            ToolKind::Intersect => {
                let (a, b) = (shapes[0], shapes[1]);
                if a.is_point() || b.is_point() {
                    return Err(fail(StepErrorKind::DegenerateInput {
                        detail: "cannot intersect a point".to_string(),
                    }));
                }
                let pts = geom::intersect(&a, &b);
                if step.outputs.len() == 2 {
                    match pts.len() {
                        2 => {
                            bind(scene, &step.outputs[0], Shape::Point(pts[0]))?;
                            bind(scene, &step.outputs[1], Shape::Point(pts[1]))?;
                        }
                        1 => return Err(fail(StepErrorKind::TangencyShortfall)),
                        _ => return Err(fail(StepErrorKind::NoIntersection)),
                    }
                } else {
                    let point = match pts.len() {
                        0 => return Err(fail(StepErrorKind::NoIntersection)),
                        1 => pts[0],
                        _ => match &step.pick {
                            Some(pick) => apply_pick(pick, &pts, scene, step_no)?,
                            None => {
                                let choice = choices.get(ambiguous).copied().unwrap_or(0);
                                ambiguous += 1;
                                pts[choice.min(pts.len() - 1)]
                            }
                        },
                    };
                    bind(scene, &step.outputs[0], Shape::Point(point))?;
                }
            }
            ToolKind::PointOn => {
                let target = shapes[0];
                if target.is_point() {
                    return Err(fail(StepErrorKind::DegenerateInput {
                        detail: "cannot place an arbitrary point on a point".to_string(),
                    }));
                }
                let avoid = scene.points();
                let point = geom::sample_point(&SampleTarget::On(&target), scene.rng_mut(), &avoid)
                    .map_err(|e| fail(geom_error_kind(e)))?;
                bind(scene, &step.outputs[0], Shape::Point(point))?;
            }
            ToolKind::FreePoint => {
                let avoid = scene.points();
                let point = geom::sample_point(&SampleTarget::FreePlane, scene.rng_mut(), &avoid)
                    .map_err(|e| fail(geom_error_kind(e)))?;
                bind(scene, &step.outputs[0], Shape::Point(point))?;
            }
            _ => {
                let arg_refs: Vec<&Shape> = shapes.iter().collect();
                let shape =
                    geom::construct(step.tool, &arg_refs).map_err(|e| fail(geom_error_kind(e)))?;
                bind(scene, &step.outputs[0], shape)?;
            }
        }
    }
    Ok(ambiguous)
}

/// One executed step, as recorded by [`execute_trace`].
#[derive(Debug, Clone, Serialize)]
pub struct TraceStep {
    /// 1-based step index.
    pub step: usize,
    /// Labels and shapes the step bound, in binding order.
    pub bound: Vec<(String, Shape)>,
    /// Which reading an unhinted two-point intersection took, when the step
    /// had to make that decision.
    pub branch: Option<usize>,
    /// Worst distance from a bound point to the objects it was cut from;
    /// zero for non-intersection steps.
    pub residual: f64,
}

/// Execute a program step by step, recording what each step bound. The
/// scene is mutated exactly as [`execute_with_choices`] would mutate it;
/// the trace is the per-step story of that run.
pub fn execute_trace(
    scene: &mut Scene,
    program: &Program,
    choices: &[usize],
) -> Result<Vec<TraceStep>, StepError> {
    let mut trace = Vec::with_capacity(program.steps.len());
    let mut decisions = 0usize;
    for (idx, step) in program.steps.iter().enumerate() {
        let inputs: Vec<Shape> = step
            .args
            .iter()
            .filter_map(|a| scene.get(a).copied())
            .filter(|s| !s.is_point())
            .collect();
        let before = scene.len();
        let single = Program { steps: vec![step.clone()] };
        let consumed = execute_with_choices(scene, &single, &choices[decisions.min(choices.len())..])
            .map_err(|e| StepError { step: idx + 1, kind: e.kind })?;
        let bound: Vec<(String, Shape)> = scene.objects()[before..]
            .iter()
            .map(|o| (o.label.clone(), o.shape))
            .collect();
        let branch = (consumed > 0)
            .then(|| choices.get(decisions).copied().unwrap_or(0).min(1));
        let residual = if step.tool == ToolKind::Intersect {
            bound
                .iter()
                .filter_map(|(_, s)| s.as_point())
                .flat_map(|p| inputs.iter().map(move |obj| geom::distance_to(obj, p)))
                .fold(0.0, f64::max)
        } else {
            0.0
        };
        decisions += consumed;
        trace.push(TraceStep { step: idx + 1, bound, branch, residual });
    }
    Ok(trace)
}

/// Choose one of two intersection points according to a pick hint.
fn apply_pick(
    pick: &Pick,
    pts: &[Point],
    scene: &Scene,
    step_no: usize,
) -> Result<Point, StepError> {
    let fail = |kind: StepErrorKind| StepError { step: step_no, kind };
    let lookup = |name: &str| {
        scene
            .get(name)
            .copied()
            .ok_or_else(|| fail(StepErrorKind::UnboundIdentifier { name: name.to_string() }))
    };
    match pick {
        Pick::Near(x) | Pick::Far(x) => {
            let reference = lookup(x)?;
            let d0 = geom::distance_to(&reference, pts[0]);
            let d1 = geom::distance_to(&reference, pts[1]);
            let take_first = match pick {
                Pick::Near(_) => d0 <= d1,
                _ => d0 >= d1,
            };
            Ok(if take_first { pts[0] } else { pts[1] })
        }
        Pick::Left(a, b) | Pick::Right(a, b) => {
            let pa = lookup(a)?.as_point().ok_or_else(|| {
                fail(StepErrorKind::DegenerateInput {
                    detail: "side hint needs two points".to_string(),
                })
            })?;
            let pb = lookup(b)?.as_point().ok_or_else(|| {
                fail(StepErrorKind::DegenerateInput {
                    detail: "side hint needs two points".to_string(),
                })
            })?;
            let want_left = matches!(pick, Pick::Left(_, _));
            let on_side = |p: Point| {
                let cross = pb.sub(pa).cross(p.sub(pa));
                if want_left {
                    cross > 0.0
                } else {
                    cross < 0.0
                }
            };
            match (on_side(pts[0]), on_side(pts[1])) {
                (true, false) => Ok(pts[0]),
                (false, true) => Ok(pts[1]),
                _ => Err(fail(StepErrorKind::DegenerateInput {
                    detail: "side hint does not separate the intersection points".to_string(),
                })),
            }
        }
    }
}

/// Result of the bounded branch search over a candidate's readings.
#[derive(Debug, Clone)]
pub struct BranchOutcome {
    /// Some reading constructed every goal object.
    pub matched: bool,
    /// The search hit its depth or leaf budget before exhausting readings.
    pub truncated: bool,
    /// Error from the canonical (all-first-points) reading, when it failed.
    pub canonical_error: Option<StepError>,
}

/// Search all readings of `candidate` (both points of every unhinted
/// two-point intersection), bounded by the depth and leaf caps, for one
/// whose constructed objects cover every goal shape.
pub fn search_goal_match(base: &Scene, candidate: &Program, goals: &[Shape]) -> BranchOutcome {
    let mut search = BranchSearch {
        base,
        candidate,
        goals,
        base_len: base.len(),
        truncated: false,
        leaves: 0,
        canonical_error: None,
    };
    let mut prefix = Vec::new();
    let matched = search.run(&mut prefix);
    BranchOutcome {
        matched,
        truncated: search.truncated,
        canonical_error: search.canonical_error,
    }
}

struct BranchSearch<'a> {
    base: &'a Scene,
    candidate: &'a Program,
    goals: &'a [Shape],
    base_len: usize,
    truncated: bool,
    leaves: usize,
    canonical_error: Option<StepError>,
}

impl BranchSearch<'_> {
    fn run(&mut self, prefix: &mut Vec<usize>) -> bool {
        if self.leaves >= BRANCH_LEAF_CAP {
            self.truncated = true;
            return false;
        }
        let mut scene = self.base.clone();
        match execute_with_choices(&mut scene, self.candidate, prefix) {
            Err(err) => {
                self.leaves += 1;
                if prefix.iter().all(|c| *c == 0) && self.canonical_error.is_none() {
                    self.canonical_error = Some(err);
                }
                false
            }
            Ok(ambiguous) => {
                if ambiguous > prefix.len() && prefix.len() < BRANCH_DEPTH_CAP {
                    // An undecided choice point exists: branch on it.
                    prefix.push(0);
                    if self.run(prefix) {
                        prefix.pop();
                        return true;
                    }
                    *prefix.last_mut().expect("just pushed") = 1;
                    let found = self.run(prefix);
                    prefix.pop();
                    found
                } else {
                    if ambiguous > prefix.len() {
                        self.truncated = true;
                    }
                    self.leaves += 1;
                    goals_met(&scene, self.base_len, self.goals)
                }
            }
        }
    }
}

/// Every goal shape is matched by some object the candidate constructed
/// (given objects do not count).
fn goals_met(scene: &Scene, base_len: usize, goals: &[Shape]) -> bool {
    goals.iter().all(|goal| {
        scene.objects()[base_len..]
            .iter()
            .any(|obj| equivalent(goal, &obj.shape, EPS_MATCH))
    })
}

/// Whether the candidate's tool-kind sequence equals some reference's.
pub fn tool_sequence_matches(candidate: &Program, references: &[Program]) -> bool {
    let kinds = candidate.tool_kinds();
    references.iter().any(|r| r.tool_kinds() == kinds)
}

/// Whether `kinds` is a prefix of some reference's tool-kind sequence; the
/// mechanical step-feedback validator grades solver steps with this.
pub fn matches_reference_prefix(kinds: &[ToolKind], references: &[Program]) -> bool {
    references.iter().any(|r| r.tool_kinds().starts_with(kinds))
}

/// Verification knobs: how many instances to sample and from which base
/// seed their per-instance seeds are derived.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub instances: usize,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> VerifyOptions {
        VerifyOptions { instances: DEFAULT_INSTANCES, seed: 0 }
    }
}

/// Outcome on one sampled instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceReport {
    pub index: usize,
    pub seed: u64,
    pub verified: bool,
    /// Error from the canonical reading when the instance failed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub branch_budget_exceeded: bool,
}

/// Full verification verdict for one candidate against one problem.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyReport {
    pub problem_id: String,
    /// All instances verified, whitelist respected, statically valid.
    pub fully_correct: bool,
    /// Tool-kind sequence equals some reference solution's.
    pub tool_sequence_correct: bool,
    pub static_valid: bool,
    pub whitelist_ok: bool,
    pub diagnostics: Vec<String>,
    pub instances: Vec<InstanceReport>,
}

#[derive(Debug, thiserror::Error)]
pub enum VerifyError {
    #[error(transparent)]
    Instantiate(#[from] crate::bank::InstantiateError),
    #[error(transparent)]
    Parse(#[from] dsl::ParseError),
    #[error("problem lists no reference solutions")]
    NoReference,
    #[error("reference solution failed on instance {instance}: {source}")]
    ReferenceFailed { instance: usize, source: StepError },
    #[error("reference solution does not bind goal `{0}`")]
    MissingGoal(String),
}

/// Verify a candidate program against a problem.
///
/// Per instance: instantiate the scene, run the first reference solution on
/// a fork to obtain the goal shapes, then branch-search the candidate from
/// an identical fork. Identical forks share the sampling stream, so a
/// candidate that replays a reference verbatim reproduces its arbitrary
/// points exactly.
pub fn verify_candidate(
    problem: &Problem,
    candidate: &Program,
    opts: &VerifyOptions,
) -> Result<VerifyReport, VerifyError> {
    let references = problem.parsed_references()?;
    if references.is_empty() {
        return Err(VerifyError::NoReference);
    }
    let tool_sequence_correct = tool_sequence_matches(candidate, &references);
    let whitelist_ok = match &problem.tool_whitelist {
        Some(allowed) => candidate.steps.iter().all(|s| allowed.contains(&s.tool)),
        None => true,
    };
    let mut static_valid = true;
    let mut diagnostics = Vec::new();
    let mut instances = Vec::new();
    for index in 0..opts.instances {
        let seed = instance_seed(opts.seed, &problem.id, index);
        let scene = instantiate(problem, seed)?;
        if index == 0 {
            let labels: Vec<String> =
                scene.objects().iter().map(|o| o.label.clone()).collect();
            let findings = static_validate(candidate, &labels);
            static_valid = findings.is_empty();
            diagnostics = findings.iter().map(|f| f.to_string()).collect();
        }
        let mut reference_scene = scene.clone();
        execute_program(&mut reference_scene, &references[0])
            .map_err(|source| VerifyError::ReferenceFailed { instance: index, source })?;
        let goals: Vec<Shape> = problem
            .goals
            .iter()
            .map(|g| {
                reference_scene
                    .get(g)
                    .copied()
                    .ok_or_else(|| VerifyError::MissingGoal(g.clone()))
            })
            .collect::<Result<_, _>>()?;
        let outcome = search_goal_match(&scene, candidate, &goals);
        instances.push(InstanceReport {
            index,
            seed,
            verified: outcome.matched,
            error: if outcome.matched {
                None
            } else {
                outcome.canonical_error.map(|e| e.to_string())
            },
            branch_budget_exceeded: outcome.truncated,
        });
    }
    let all_verified = !instances.is_empty() && instances.iter().all(|i| i.verified);
    Ok(VerifyReport {
        problem_id: problem.id.clone(),
        fully_correct: all_verified && whitelist_ok && static_valid,
        tool_sequence_correct,
        static_valid,
        whitelist_ok,
        diagnostics,
        instances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;
    use approx::assert_abs_diff_eq;

    fn scene_with(points: &[(&str, f64, f64)]) -> Scene {
        let mut scene = Scene::new(11);
        for (label, x, y) in points {
            scene.push(label, Shape::Point(Point::new(*x, *y))).unwrap();
        }
        scene
    }

    #[test]
    fn equilateral_apex_lands_where_it_should() {
        let mut scene = scene_with(&[("A", 0.0, 0.0), ("B", 1.0, 0.0)]);
        let program = parse(
            "circle(A, B) -> c1\ncircle(B, A) -> c2\nintersect(c1, c2) [left A B] -> C",
        )
        .unwrap();
        execute_program(&mut scene, &program).unwrap();
        let apex = scene.get("C").unwrap().as_point().unwrap();
        assert_abs_diff_eq!(apex.x, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(apex.y, 0.75f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn near_and_far_picks_select_by_distance() {
        let base = scene_with(&[("A", 0.0, 0.0), ("B", 2.0, 0.0), ("C", 1.0, 0.0)]);
        let near = parse("circle(B, C) -> k\nline(A, C) -> l\nintersect(k, l) [near A] -> P")
            .unwrap();
        let mut scene = base.clone();
        execute_program(&mut scene, &near).unwrap();
        assert_abs_diff_eq!(scene.get("P").unwrap().as_point().unwrap().x, 1.0);
        let far = parse("circle(B, C) -> k\nline(A, C) -> l\nintersect(k, l) [far A] -> P")
            .unwrap();
        let mut scene = base.clone();
        execute_program(&mut scene, &far).unwrap();
        assert_abs_diff_eq!(scene.get("P").unwrap().as_point().unwrap().x, 3.0);
    }

    #[test]
    fn unhinted_choice_defaults_to_the_first_point() {
        let mut scene = scene_with(&[("A", 0.0, 0.0), ("B", 2.0, 0.0), ("C", 1.0, 0.0)]);
        let program = parse("circle(B, C) -> k\nline(A, C) -> l\nintersect(k, l) -> P").unwrap();
        let ambiguous = execute_with_choices(&mut scene, &program, &[]).unwrap();
        assert_eq!(ambiguous, 1);
        assert_abs_diff_eq!(scene.get("P").unwrap().as_point().unwrap().x, 1.0);
    }

    #[test]
    fn traces_record_bindings_branches_and_residuals() {
        let mut scene = scene_with(&[("A", 0.0, 0.0), ("B", 2.0, 0.0), ("C", 1.0, 0.0)]);
        let mut replay = scene.clone();
        let program = parse("circle(B, C) -> k\nline(A, C) -> l\nintersect(k, l) -> P").unwrap();
        let trace = execute_trace(&mut scene, &program, &[1]).unwrap();
        assert_eq!(trace.len(), 3);
        assert_eq!(trace[0].bound[0].0, "k");
        assert!(trace[0].branch.is_none() && trace[0].residual == 0.0);
        // The third step consumed the choice vector's branch 1 and bound a
        // point sitting on both source objects.
        assert_eq!(trace[2].branch, Some(1));
        assert_eq!(trace[2].bound, vec![("P".to_string(), scene.get("P").copied().unwrap())]);
        assert!(trace[2].residual < 1e-9);
        assert_abs_diff_eq!(scene.get("P").unwrap().as_point().unwrap().x, 3.0);
        // The trace run mutates the scene exactly as plain execution does.
        execute_with_choices(&mut replay, &program, &[1]).unwrap();
        assert_eq!(replay.objects(), scene.objects());
    }

    #[test]
    fn unbound_and_rebinding_are_step_errors() {
        let mut scene = scene_with(&[("A", 0.0, 0.0), ("B", 1.0, 0.0)]);
        let err = execute_program(&mut scene, &parse("line(A, Z) -> l").unwrap()).unwrap_err();
        assert_eq!(
            err,
            StepError {
                step: 1,
                kind: StepErrorKind::UnboundIdentifier { name: "Z".to_string() }
            }
        );
        let mut scene = scene_with(&[("A", 0.0, 0.0), ("B", 1.0, 0.0)]);
        let err = execute_program(&mut scene, &parse("line(A, B) -> A").unwrap()).unwrap_err();
        assert_eq!(
            err,
            StepError { step: 1, kind: StepErrorKind::Rebinding { name: "A".to_string() } }
        );
    }

    #[test]
    fn disjoint_objects_and_tangency_report_distinct_errors() {
        let mut scene =
            scene_with(&[("A", 0.0, 0.0), ("B", 0.5, 0.0), ("C", 9.0, 9.0), ("D", 9.5, 9.0)]);
        let disjoint =
            parse("circle(A, B) -> c1\ncircle(C, D) -> c2\nintersect(c1, c2) -> P").unwrap();
        let err = execute_program(&mut scene, &disjoint).unwrap_err();
        assert_eq!(err.kind, StepErrorKind::NoIntersection);

        let mut scene = scene_with(&[("A", 0.0, 0.0), ("B", 1.0, 0.0), ("C", 2.0, 0.0)]);
        let tangent =
            parse("circle(A, B) -> c1\ncircle(C, B) -> c2\nintersect(c1, c2) -> P, Q").unwrap();
        let err = execute_program(&mut scene, &tangent).unwrap_err();
        assert_eq!(err.kind, StepErrorKind::TangencyShortfall);
    }

    #[test]
    fn branch_search_finds_the_non_canonical_reading() {
        let base = scene_with(&[("A", 0.0, 0.0), ("B", 2.0, 0.0), ("C", 1.0, 0.0)]);
        let candidate = parse("circle(B, C) -> k\nline(A, C) -> l\nintersect(k, l) -> P").unwrap();
        let goals = [Shape::Point(Point::new(3.0, 0.0))];
        let outcome = search_goal_match(&base, &candidate, &goals);
        assert!(outcome.matched);
        assert!(!outcome.truncated);
    }

    #[test]
    fn goals_must_come_from_constructed_objects_not_givens() {
        let base = scene_with(&[("A", 0.0, 0.0), ("B", 2.0, 0.0), ("C", 1.0, 0.0)]);
        // The goal equals the given point C; a candidate that constructs
        // nothing matching it must fail even though C is in the scene.
        let candidate = parse("line(A, B) -> l").unwrap();
        let goals = [Shape::Point(Point::new(1.0, 0.0))];
        let outcome = search_goal_match(&base, &candidate, &goals);
        assert!(!outcome.matched);
    }

    #[test]
    fn branch_budget_truncates_deep_ambiguity() {
        let mut base = scene_with(&[("O", 0.0, 0.0), ("Q", 1.0, 0.0), ("A", -2.0, 0.0), ("B", 2.0, 0.0)]);
        execute_program(&mut base, &parse("circle(O, Q) -> c\nline(A, B) -> l").unwrap()).unwrap();
        let mut text = String::new();
        for i in 0..9 {
            text.push_str(&format!("intersect(c, l) -> P{i}\n"));
        }
        let candidate = parse(&text).unwrap();
        let goals = [Shape::Point(Point::new(9.0, 9.0))];
        let outcome = search_goal_match(&base, &candidate, &goals);
        assert!(!outcome.matched);
        assert!(outcome.truncated);
    }

    #[test]
    fn side_picks_separate_the_points() {
        let base = scene_with(&[("A", 0.0, 0.0), ("B", 1.0, 0.0)]);
        let left = parse("circle(A, B) -> c1\ncircle(B, A) -> c2\nintersect(c1, c2) [left A B] -> C")
            .unwrap();
        let mut scene = base.clone();
        execute_program(&mut scene, &left).unwrap();
        assert!(scene.get("C").unwrap().as_point().unwrap().y > 0.0);
        let right =
            parse("circle(A, B) -> c1\ncircle(B, A) -> c2\nintersect(c1, c2) [right A B] -> C")
                .unwrap();
        let mut scene = base.clone();
        execute_program(&mut scene, &right).unwrap();
        assert!(scene.get("C").unwrap().as_point().unwrap().y < 0.0);
    }

    #[test]
    fn prefix_matching_grades_partial_tool_sequences() {
        let reference = parse("circle(A, B) -> c1\ncircle(B, A) -> c2\nintersect(c1, c2) -> C")
            .unwrap();
        let refs = [reference];
        assert!(matches_reference_prefix(&[ToolKind::Circle], &refs));
        assert!(matches_reference_prefix(
            &[ToolKind::Circle, ToolKind::Circle, ToolKind::Intersect],
            &refs
        ));
        assert!(!matches_reference_prefix(&[ToolKind::Line], &refs));
    }
}
