//! The problem bank: JSON schema for construction puzzles, loading with
//! validation, and per-seed instantiation of a puzzle into a concrete scene.
//!
//! A problem describes *random families* of initial scenes rather than fixed
//! coordinates: its `init` block samples parameters (points, lengths,
//! angles, whole figures) and then runs a short setup program to draw the
//! given objects. Verification therefore checks a candidate on several
//! independently sampled instances, which is what rules out solutions that
//! only work for one lucky diagram.

use crate::dsl::{self, ident_is_valid, Program, ToolKind};
use crate::geom::{Point, Scene, Shape};
use crate::verify::{execute_program, StepError};
use crate::{fnv1a, mix_seed};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::TAU;
use std::path::Path;

/// Distance from an arm point to the vertex when instantiating a given
/// angle, before scene normalization rescales everything.
const ANGLE_ARM_LENGTH: f64 = 0.35;
/// Margin kept between normalized scene content and the unit box.
const BOX_MARGIN: f64 = 0.1;
/// Resample attempts before a constrained parameter gives up.
const CONSTRAINT_RETRIES: usize = 100;

/// One sampled quantity or figure in a problem's initial scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitParam {
    /// A point drawn uniformly from the unit box.
    PointInBox { name: String },
    /// A length drawn uniformly from `range`, optionally constrained
    /// against previously sampled lengths.
    LengthRange {
        name: String,
        range: [f64; 2],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        less_than: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        greater_than: Option<String>,
    },
    /// An angle in degrees drawn uniformly from `range`.
    AngleDeg { name: String, range: [f64; 2] },
    /// A rectangle with the four corners bound in perimeter order; `width`
    /// and `height` name previously sampled lengths. `center` optionally
    /// binds the rectangle's center point.
    Rectangle {
        points: [String; 4],
        width: String,
        height: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<String>,
    },
    /// A square, corners in perimeter order; `side` names a length.
    Square {
        points: [String; 4],
        side: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<String>,
    },
    /// A triangle resampled until every interior angle reaches the floor.
    Triangle { points: [String; 3], min_angle_deg: f64 },
    /// An angle given as two rays: the vertex point, one point on each arm,
    /// the two ray objects, and the name of the angle parameter between
    /// them.
    AngleRays {
        vertex: String,
        arms: [String; 2],
        rays: [String; 2],
        angle: String,
    },
    /// A circle object bound by label. Its center point is only added to
    /// the scene when `center` is given — leaving it out poses
    /// find-the-center style puzzles.
    Circle {
        label: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<String>,
        radius: String,
    },
}

impl InitParam {
    /// Scene labels this parameter binds, in binding order.
    pub fn labels(&self) -> Vec<&str> {
        match self {
            InitParam::PointInBox { name } => vec![name],
            InitParam::LengthRange { .. } | InitParam::AngleDeg { .. } => Vec::new(),
            InitParam::Rectangle { points, center, .. }
            | InitParam::Square { points, center, .. } => {
                let mut labels: Vec<&str> = points.iter().map(String::as_str).collect();
                if let Some(center) = center {
                    labels.push(center.as_str());
                }
                labels
            }
            InitParam::Triangle { points, .. } => points.iter().map(String::as_str).collect(),
            InitParam::AngleRays { vertex, arms, rays, .. } => {
                let mut labels = vec![vertex.as_str()];
                labels.extend(arms.iter().map(String::as_str));
                labels.extend(rays.iter().map(String::as_str));
                labels
            }
            InitParam::Circle { label, center, .. } => {
                let mut labels = Vec::new();
                if let Some(center) = center {
                    labels.push(center.as_str());
                }
                labels.push(label.as_str());
                labels
            }
        }
    }

    /// Name of the scalar this parameter defines, if it defines one.
    fn scalar_name(&self) -> Option<&str> {
        match self {
            InitParam::LengthRange { name, .. } | InitParam::AngleDeg { name, .. } => Some(name),
            _ => None,
        }
    }
}

/// How a problem's initial scene is built: sampled parameters, then a setup
/// program in the construction language drawing the given objects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Init {
    #[serde(default)]
    pub params: Vec<InitParam>,
    #[serde(default)]
    pub program: String,
}

/// One construction puzzle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub id: String,
    /// Progression pack this problem belongs to.
    pub pack: String,
    pub title: String,
    /// Natural-language statement shown to solvers.
    pub statement: String,
    /// The statement's target variable; identifier renaming pivots on it.
    pub target: String,
    pub init: Init,
    /// Reference solutions in the construction language; the first one
    /// defines the goal objects.
    pub references: Vec<String>,
    /// Labels bound by every reference whose shapes a candidate must
    /// reproduce.
    pub goals: Vec<String>,
    /// Tools a correct solution may use; `None` allows all of them.
    #[serde(default, rename = "tools", skip_serializing_if = "Option::is_none")]
    pub tool_whitelist: Option<Vec<ToolKind>>,
}

impl Problem {
    /// Parse every reference solution.
    pub fn parsed_references(&self) -> Result<Vec<Program>, dsl::ParseError> {
        self.references.iter().map(|r| dsl::parse(r)).collect()
    }

    /// Labels present in the initial scene, in binding order: parameter
    /// labels first, then outputs of the setup program.
    pub fn init_labels(&self) -> Vec<String> {
        let mut labels: Vec<String> = self
            .init
            .params
            .iter()
            .flat_map(|p| p.labels().into_iter().map(str::to_string))
            .collect();
        if let Ok(program) = dsl::parse(&self.init.program) {
            for step in &program.steps {
                labels.extend(step.outputs.iter().cloned());
            }
        }
        labels
    }
}

/// Bank file format revision this library reads and writes.
pub const BANK_FORMAT_VERSION: u32 = 1;

/// A full problem bank: pack progression order plus the problems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bank {
    pub format_version: u32,
    pub pack_order: Vec<String>,
    pub problems: Vec<Problem>,
}

#[derive(Debug, thiserror::Error)]
pub enum BankError {
    #[error("cannot read bank: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse bank JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("duplicate problem id `{0}`")]
    DuplicateId(String),
    #[error("problem `{id}` names pack `{pack}` which is not in pack_order")]
    UnknownPack { id: String, pack: String },
    #[error("problem `{id}`: {detail}")]
    Schema { id: String, detail: String },
    #[error("unsupported bank format_version {0} (expected {BANK_FORMAT_VERSION})")]
    FormatVersion(u32),
}

impl Bank {
    /// Load and validate a bank from a JSON file.
    pub fn load(path: &Path) -> Result<Bank, BankError> {
        Bank::from_json(&std::fs::read_to_string(path)?)
    }

    /// Parse and validate a bank from JSON text.
    pub fn from_json(text: &str) -> Result<Bank, BankError> {
        let bank: Bank = serde_json::from_str(text)?;
        bank.validate()?;
        Ok(bank)
    }

    fn validate(&self) -> Result<(), BankError> {
        if self.format_version != BANK_FORMAT_VERSION {
            return Err(BankError::FormatVersion(self.format_version));
        }
        let mut seen = BTreeSet::new();
        for problem in &self.problems {
            if !seen.insert(problem.id.as_str()) {
                return Err(BankError::DuplicateId(problem.id.clone()));
            }
            if !self.pack_order.iter().any(|p| p == &problem.pack) {
                return Err(BankError::UnknownPack {
                    id: problem.id.clone(),
                    pack: problem.pack.clone(),
                });
            }
            problem_schema(problem).map_err(|detail| BankError::Schema {
                id: problem.id.clone(),
                detail,
            })?;
        }
        Ok(())
    }

    /// Look a problem up by id.
    pub fn problem(&self, id: &str) -> Option<&Problem> {
        self.problems.iter().find(|p| p.id == id)
    }

    /// Position of a pack in the progression.
    pub fn pack_index(&self, pack: &str) -> Option<usize> {
        self.pack_order.iter().position(|p| p == pack)
    }

    /// Problems of one pack, in bank order.
    pub fn problems_in_pack(&self, pack: &str) -> Vec<&Problem> {
        self.problems.iter().filter(|p| p.pack == pack).collect()
    }

    /// The example pool a solver may draw on for `id`: every problem from
    /// strictly earlier packs. Problems in the first pack have no earlier
    /// pack, so they fall back to the other problems of that pack — the
    /// seeds bootstrap each other.
    pub fn knowledge_for(&self, id: &str) -> Vec<&Problem> {
        let Some(problem) = self.problem(id) else {
            return Vec::new();
        };
        let Some(pack_pos) = self.pack_index(&problem.pack) else {
            return Vec::new();
        };
        if pack_pos == 0 {
            self.problems
                .iter()
                .filter(|p| p.pack == problem.pack && p.id != id)
                .collect()
        } else {
            self.problems
                .iter()
                .filter(|p| self.pack_index(&p.pack).is_some_and(|i| i < pack_pos))
                .collect()
        }
    }
}

/// Per-problem schema checks beyond what serde enforces.
fn problem_schema(problem: &Problem) -> Result<(), String> {
    if problem.references.is_empty() {
        return Err("no reference solutions".to_string());
    }
    if problem.goals.is_empty() {
        return Err("no goal objects".to_string());
    }
    let mut scalars: BTreeMap<&str, &InitParam> = BTreeMap::new();
    let mut labels: BTreeSet<&str> = BTreeSet::new();
    for param in &problem.init.params {
        for label in param.labels() {
            if !ident_is_valid(label) {
                return Err(format!("init binds invalid identifier `{label}`"));
            }
            if !labels.insert(label) {
                return Err(format!("init binds `{label}` twice"));
            }
        }
        if let Some(name) = param.scalar_name() {
            if scalars.insert(name, param).is_some() {
                return Err(format!("init defines scalar `{name}` twice"));
            }
        }
        let scalar_ref = |name: &str, want_length: bool| -> Result<(), String> {
            match scalars.get(name) {
                Some(InitParam::LengthRange { .. }) if want_length => Ok(()),
                Some(InitParam::AngleDeg { .. }) if !want_length => Ok(()),
                _ => Err(format!(
                    "init references {} `{name}` before it is defined",
                    if want_length { "length" } else { "angle" }
                )),
            }
        };
        match param {
            InitParam::LengthRange { less_than, greater_than, .. } => {
                for other in less_than.iter().chain(greater_than.iter()) {
                    scalar_ref(other, true)?;
                }
            }
            InitParam::Rectangle { width, height, .. } => {
                scalar_ref(width, true)?;
                scalar_ref(height, true)?;
            }
            InitParam::Square { side, .. } => scalar_ref(side, true)?,
            InitParam::AngleRays { angle, .. } => scalar_ref(angle, false)?,
            InitParam::Circle { radius, .. } => scalar_ref(radius, true)?,
            _ => {}
        }
    }
    let init_program = dsl::parse(&problem.init.program)
        .map_err(|e| format!("init program does not parse: {e}"))?;
    let param_labels: Vec<String> = labels.iter().map(|l| l.to_string()).collect();
    let init_findings = dsl::static_validate(&init_program, &param_labels);
    if let Some(finding) = init_findings.first() {
        return Err(format!("init program is invalid: {finding}"));
    }
    let scene_labels = problem.init_labels();
    let references = problem
        .parsed_references()
        .map_err(|e| format!("reference does not parse: {e}"))?;
    for (i, reference) in references.iter().enumerate() {
        let findings = dsl::static_validate(reference, &scene_labels);
        if let Some(finding) = findings.first() {
            return Err(format!("reference {} is invalid: {finding}", i + 1));
        }
        if let Some(allowed) = &problem.tool_whitelist {
            if let Some(step) = reference.steps.iter().find(|s| !allowed.contains(&s.tool)) {
                return Err(format!(
                    "reference {} uses `{}` outside the tool whitelist",
                    i + 1,
                    step.tool.name()
                ));
            }
        }
    }
    for (i, reference) in references.iter().enumerate() {
        let outputs: BTreeSet<&str> = reference
            .steps
            .iter()
            .flat_map(|s| s.outputs.iter().map(String::as_str))
            .collect();
        if let Some(goal) = problem.goals.iter().find(|g| !outputs.contains(g.as_str())) {
            return Err(format!("goal `{goal}` is not bound by reference {}", i + 1));
        }
    }
    if !ident_is_valid(&problem.target) {
        return Err(format!("target `{}` is not a valid identifier", problem.target));
    }
    if !dsl::text_mentions_identifier(&problem.statement, &problem.target) {
        return Err(format!("target `{}` does not occur in the statement", problem.target));
    }
    Ok(())
}

#[derive(Debug, thiserror::Error)]
pub enum InstantiateError {
    #[error("init parameter is malformed: {0}")]
    BadParam(String),
    #[error("constraint on `{0}` unsatisfiable after {CONSTRAINT_RETRIES} attempts")]
    ConstraintUnsatisfiable(String),
    #[error("init program failed: {0}")]
    InitFailed(#[from] StepError),
    #[error("init program does not parse: {0}")]
    InitParse(#[from] dsl::ParseError),
    #[error("init binds `{0}` twice")]
    DuplicateLabel(String),
}

/// Seed for instance `index` of a problem under a benchmark base seed.
/// Mixing the problem id in decorrelates instances across problems that
/// share a base seed.
pub fn instance_seed(base_seed: u64, problem_id: &str, index: usize) -> u64 {
    mix_seed(mix_seed(base_seed, fnv1a(problem_id)), index as u64)
}

/// Raw sampled content before normalization into the unit box.
#[derive(Default)]
struct RawScene {
    points: Vec<(String, Point)>,
    circles: Vec<(String, Point, f64)>,
    /// vertex label, arm label, ray label — direction recomputed after
    /// normalization from the transformed points.
    rays: Vec<(String, String, String)>,
}

impl RawScene {
    fn point(&mut self, label: &str, p: Point) {
        self.points.push((label.to_string(), p));
    }

    fn lookup(&self, label: &str) -> Option<Point> {
        self.points
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, p)| *p)
    }
}

/// Build the concrete initial scene for one instance of a problem.
///
/// All randomness — parameter sampling and any arbitrary points the setup
/// program places — flows from a single stream seeded by `seed`, so equal
/// seeds give bit-identical scenes. Sampled figures are uniformly rescaled
/// into the unit box (margin [`BOX_MARGIN`]) before the setup program runs;
/// this preserves angles and length ratios while keeping every instance at
/// a comparable scale.
pub fn instantiate(problem: &Problem, seed: u64) -> Result<Scene, InstantiateError> {
    let mut scene = Scene::new(seed);
    let mut raw = RawScene::default();
    let mut lengths: BTreeMap<String, f64> = BTreeMap::new();
    let mut angles: BTreeMap<String, f64> = BTreeMap::new();

    for param in &problem.init.params {
        sample_param(param, &mut scene, &mut raw, &mut lengths, &mut angles)?;
    }
    normalize(&mut raw);

    for (label, point) in &raw.points {
        scene
            .push(label, Shape::Point(*point))
            .map_err(|_| InstantiateError::DuplicateLabel(label.clone()))?;
    }
    for (label, center, radius) in &raw.circles {
        scene
            .push(label, Shape::Circle { center: *center, radius: *radius })
            .map_err(|_| InstantiateError::DuplicateLabel(label.clone()))?;
    }
    for (vertex, arm, label) in &raw.rays {
        let origin = raw.lookup(vertex).ok_or_else(|| {
            InstantiateError::BadParam(format!("ray `{label}` references unknown `{vertex}`"))
        })?;
        let toward = raw.lookup(arm).ok_or_else(|| {
            InstantiateError::BadParam(format!("ray `{label}` references unknown `{arm}`"))
        })?;
        let dir = toward.sub(origin).normalize().ok_or_else(|| {
            InstantiateError::BadParam(format!("ray `{label}` has coincident endpoints"))
        })?;
        scene
            .push(label, Shape::Ray { origin, dir })
            .map_err(|_| InstantiateError::DuplicateLabel(label.clone()))?;
    }

    let init_program = dsl::parse(&problem.init.program)?;
    execute_program(&mut scene, &init_program)?;
    Ok(scene)
}

fn sample_param(
    param: &InitParam,
    scene: &mut Scene,
    raw: &mut RawScene,
    lengths: &mut BTreeMap<String, f64>,
    angles: &mut BTreeMap<String, f64>,
) -> Result<(), InstantiateError> {
    let missing =
        |name: &str| InstantiateError::BadParam(format!("scalar `{name}` is not defined"));
    match param {
        InitParam::PointInBox { name } => {
            let rng = scene.rng_mut();
            let p = Point::new(rng.gen::<f64>(), rng.gen::<f64>());
            raw.point(name, p);
        }
        InitParam::LengthRange { name, range, less_than, greater_than } => {
            let upper = less_than
                .as_ref()
                .map(|n| lengths.get(n).copied().ok_or_else(|| missing(n)))
                .transpose()?;
            let lower = greater_than
                .as_ref()
                .map(|n| lengths.get(n).copied().ok_or_else(|| missing(n)))
                .transpose()?;
            let rng = scene.rng_mut();
            let mut accepted = None;
            for _ in 0..CONSTRAINT_RETRIES {
                let v = sample_range(rng, range[0], range[1]);
                let ok = upper.map_or(true, |u| v < u) && lower.map_or(true, |l| v > l);
                if ok {
                    accepted = Some(v);
                    break;
                }
            }
            let v = accepted.ok_or_else(|| {
                InstantiateError::ConstraintUnsatisfiable(name.clone())
            })?;
            lengths.insert(name.clone(), v);
        }
        InitParam::AngleDeg { name, range } => {
            let v = sample_range(scene.rng_mut(), range[0], range[1]);
            angles.insert(name.clone(), v);
        }
        InitParam::Rectangle { points, width, height, center } => {
            let w = *lengths.get(width).ok_or_else(|| missing(width))?;
            let h = *lengths.get(height).ok_or_else(|| missing(height))?;
            place_parallelogram(scene, raw, points, center.as_deref(), w, h);
        }
        InitParam::Square { points, side, center } => {
            let s = *lengths.get(side).ok_or_else(|| missing(side))?;
            place_parallelogram(scene, raw, points, center.as_deref(), s, s);
        }
        InitParam::Triangle { points, min_angle_deg } => {
            let min_rad = min_angle_deg.to_radians();
            let mut accepted = None;
            for _ in 0..CONSTRAINT_RETRIES {
                let rng = scene.rng_mut();
                let candidate = [
                    Point::new(rng.gen::<f64>(), rng.gen::<f64>()),
                    Point::new(rng.gen::<f64>(), rng.gen::<f64>()),
                    Point::new(rng.gen::<f64>(), rng.gen::<f64>()),
                ];
                if triangle_min_angle(&candidate).is_some_and(|a| a >= min_rad) {
                    accepted = Some(candidate);
                    break;
                }
            }
            let corners = accepted.ok_or_else(|| {
                InstantiateError::ConstraintUnsatisfiable(format!(
                    "triangle {}{}{}",
                    points[0], points[1], points[2]
                ))
            })?;
            for (label, p) in points.iter().zip(corners) {
                raw.point(label, p);
            }
        }
        InitParam::AngleRays { vertex, arms, rays, angle } => {
            let degrees = *angles.get(angle).ok_or_else(|| missing(angle))?;
            let rng = scene.rng_mut();
            let v = Point::new(rng.gen::<f64>(), rng.gen::<f64>());
            let start = rng.gen::<f64>() * TAU;
            let turned = start + degrees.to_radians();
            raw.point(vertex, v);
            raw.point(
                &arms[0],
                v.add(Point::new(start.cos(), start.sin()).scale(ANGLE_ARM_LENGTH)),
            );
            raw.point(
                &arms[1],
                v.add(Point::new(turned.cos(), turned.sin()).scale(ANGLE_ARM_LENGTH)),
            );
            raw.rays.push((vertex.clone(), arms[0].clone(), rays[0].clone()));
            raw.rays.push((vertex.clone(), arms[1].clone(), rays[1].clone()));
        }
        InitParam::Circle { label, center, radius } => {
            let r = *lengths.get(radius).ok_or_else(|| missing(radius))?;
            let rng = scene.rng_mut();
            let c = Point::new(rng.gen::<f64>(), rng.gen::<f64>());
            if let Some(center) = center {
                raw.point(center, c);
            }
            raw.circles.push((label.clone(), c, r));
        }
    }
    Ok(())
}

/// Sample uniformly from `[lo, hi]`, tolerating a collapsed range.
fn sample_range(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

/// Bind a rectangle (or square) with random position and orientation,
/// corners in perimeter order, optionally binding the center point.
fn place_parallelogram(
    scene: &mut Scene,
    raw: &mut RawScene,
    points: &[String; 4],
    center: Option<&str>,
    w: f64,
    h: f64,
) {
    let rng = scene.rng_mut();
    let origin = Point::new(rng.gen::<f64>(), rng.gen::<f64>());
    let theta = rng.gen::<f64>() * TAU;
    let u = Point::new(theta.cos(), theta.sin());
    let v = u.perp();
    let corners = [
        origin,
        origin.add(u.scale(w)),
        origin.add(u.scale(w)).add(v.scale(h)),
        origin.add(v.scale(h)),
    ];
    for (label, p) in points.iter().zip(corners) {
        raw.point(label, p);
    }
    if let Some(label) = center {
        raw.point(label, origin.add(u.scale(w / 2.0)).add(v.scale(h / 2.0)));
    }
}

/// Smallest interior angle of a triangle, or `None` when degenerate.
fn triangle_min_angle(corners: &[Point; 3]) -> Option<f64> {
    let mut smallest = f64::INFINITY;
    for i in 0..3 {
        let a = corners[i];
        let u = corners[(i + 1) % 3].sub(a).normalize()?;
        let v = corners[(i + 2) % 3].sub(a).normalize()?;
        smallest = smallest.min(u.dot(v).clamp(-1.0, 1.0).acos());
    }
    Some(smallest)
}

/// Uniformly rescale and translate all raw content into the unit box,
/// leaving [`BOX_MARGIN`] on every side. Uniform scaling preserves angles,
/// parallelism, and length ratios.
fn normalize(raw: &mut RawScene) {
    let mut min = Point::new(f64::INFINITY, f64::INFINITY);
    let mut max = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut cover = |p: Point| {
        min = Point::new(min.x.min(p.x), min.y.min(p.y));
        max = Point::new(max.x.max(p.x), max.y.max(p.y));
    };
    for (_, p) in &raw.points {
        cover(*p);
    }
    for (_, c, r) in &raw.circles {
        cover(Point::new(c.x - r, c.y - r));
        cover(Point::new(c.x + r, c.y + r));
    }
    if !min.x.is_finite() {
        return;
    }
    let extent = (max.x - min.x).max(max.y - min.y);
    let usable = 1.0 - 2.0 * BOX_MARGIN;
    let scale = if extent > f64::EPSILON { usable / extent } else { 1.0 };
    let offset = Point::new(
        BOX_MARGIN + (usable - scale * (max.x - min.x)) / 2.0,
        BOX_MARGIN + (usable - scale * (max.y - min.y)) / 2.0,
    );
    let map = |p: Point| p.sub(min).scale(scale).add(offset);
    for (_, p) in raw.points.iter_mut() {
        *p = map(*p);
    }
    for (_, c, r) in raw.circles.iter_mut() {
        *c = map(*c);
        *r *= scale;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::EPS_SEPARATION;

    fn mini_bank_json() -> String {
        serde_json::json!({
            "format_version": 1,
            "pack_order": ["First", "Second"],
            "problems": [
                {
                    "id": "p1",
                    "pack": "First",
                    "title": "Equilateral triangle",
                    "statement": "Construct a point C making triangle ABC equilateral.",
                    "target": "C",
                    "init": {
                        "params": [
                            {"kind": "point_in_box", "name": "A"},
                            {"kind": "point_in_box", "name": "B"}
                        ],
                        "program": "segment(A, B) -> AB"
                    },
                    "references": [
                        "circle(A, B) -> c1\ncircle(B, A) -> c2\nintersect(c1, c2) [left A B] -> C"
                    ],
                    "goals": ["C"]
                },
                {
                    "id": "p2",
                    "pack": "First",
                    "title": "Midpoint",
                    "statement": "Construct the midpoint M of AB.",
                    "target": "M",
                    "init": {
                        "params": [
                            {"kind": "point_in_box", "name": "A"},
                            {"kind": "point_in_box", "name": "B"}
                        ],
                        "program": "segment(A, B) -> AB"
                    },
                    "references": [
                        "perp_bisector(A, B) -> pb\nintersect(pb, AB) -> M"
                    ],
                    "goals": ["M"]
                },
                {
                    "id": "p3",
                    "pack": "Second",
                    "title": "Doubled segment",
                    "statement": "Extend AB to a point D at twice its length.",
                    "target": "D",
                    "init": {
                        "params": [
                            {"kind": "point_in_box", "name": "A"},
                            {"kind": "point_in_box", "name": "B"}
                        ],
                        "program": "ray(A, B) -> r"
                    },
                    "references": [
                        "circle(B, A) -> c\nintersect(c, r) [far A] -> D"
                    ],
                    "goals": ["D"]
                }
            ]
        })
        .to_string()
    }

    #[test]
    fn mini_bank_loads_and_indexes() {
        let bank = Bank::from_json(&mini_bank_json()).unwrap();
        assert_eq!(bank.problems.len(), 3);
        assert_eq!(bank.problem("p2").unwrap().title, "Midpoint");
        assert_eq!(bank.pack_index("Second"), Some(1));
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let text = mini_bank_json().replace("\"id\":\"p2\"", "\"id\":\"p1\"");
        match Bank::from_json(&text) {
            Err(BankError::DuplicateId(id)) => assert_eq!(id, "p1"),
            other => panic!("expected duplicate id error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_pack_is_rejected() {
        let text = mini_bank_json().replace("\"pack\":\"Second\"", "\"pack\":\"Mystery\"");
        assert!(matches!(
            Bank::from_json(&text),
            Err(BankError::UnknownPack { pack, .. }) if pack == "Mystery"
        ));
    }

    #[test]
    fn goals_must_be_bound_by_every_reference() {
        let text = mini_bank_json().replace("\"goals\":[\"M\"]", "\"goals\":[\"Q\"]");
        assert!(matches!(
            Bank::from_json(&text),
            Err(BankError::Schema { id, .. }) if id == "p2"
        ));
    }

    #[test]
    fn references_must_respect_the_whitelist() {
        let text = mini_bank_json().replace(
            "\"goals\":[\"C\"]",
            "\"goals\":[\"C\"],\"tools\":[\"circle\"]",
        );
        assert!(matches!(
            Bank::from_json(&text),
            Err(BankError::Schema { id, .. }) if id == "p1"
        ));
    }

    #[test]
    fn knowledge_pool_is_strictly_earlier_packs() {
        let bank = Bank::from_json(&mini_bank_json()).unwrap();
        let pool: Vec<&str> = bank.knowledge_for("p3").iter().map(|p| p.id.as_str()).collect();
        assert_eq!(pool, ["p1", "p2"]);
        // First-pack problems bootstrap from their pack-mates.
        let pool: Vec<&str> = bank.knowledge_for("p1").iter().map(|p| p.id.as_str()).collect();
        assert_eq!(pool, ["p2"]);
    }

    #[test]
    fn instantiation_is_deterministic_per_seed() {
        let bank = Bank::from_json(&mini_bank_json()).unwrap();
        let problem = bank.problem("p1").unwrap();
        let a = instantiate(problem, 77).unwrap();
        let b = instantiate(problem, 77).unwrap();
        assert_eq!(a.objects(), b.objects());
        let c = instantiate(problem, 78).unwrap();
        assert_ne!(a.objects(), c.objects());
    }

    #[test]
    fn instantiation_normalizes_into_the_unit_box() {
        let bank = Bank::from_json(&mini_bank_json()).unwrap();
        let problem = bank.problem("p1").unwrap();
        for seed in 0..20 {
            let scene = instantiate(problem, seed).unwrap();
            for obj in scene.objects() {
                if let Shape::Point(p) = obj.shape {
                    assert!(p.x >= BOX_MARGIN - 1e-9 && p.x <= 1.0 - BOX_MARGIN + 1e-9);
                    assert!(p.y >= BOX_MARGIN - 1e-9 && p.y <= 1.0 - BOX_MARGIN + 1e-9);
                }
            }
            let a = scene.get("A").unwrap().as_point().unwrap();
            let b = scene.get("B").unwrap().as_point().unwrap();
            assert!(a.dist(b) > EPS_SEPARATION);
        }
    }

    #[test]
    fn instance_seeds_differ_across_problems_and_indices() {
        let s = instance_seed(7, "p1", 0);
        assert_ne!(s, instance_seed(7, "p1", 1));
        assert_ne!(s, instance_seed(7, "p2", 0));
        assert_ne!(s, instance_seed(8, "p1", 0));
        assert_eq!(s, instance_seed(7, "p1", 0));
    }

    #[test]
    fn rectangle_param_binds_perimeter_order_corners() {
        let text = serde_json::json!({
            "format_version": 1,
            "pack_order": ["First"],
            "problems": [{
                "id": "r1",
                "pack": "First",
                "title": "Rectangle diagonals",
                "statement": "Draw the diagonal d of rectangle ABCD.",
                "target": "d",
                "init": {
                    "params": [
                        {"kind": "length_range", "name": "w", "range": [0.6, 0.9]},
                        {"kind": "length_range", "name": "h", "range": [0.3, 0.5], "less_than": "w"},
                        {"kind": "rectangle", "points": ["A", "B", "C", "D"], "width": "w", "height": "h"}
                    ],
                    "program": "segment(A, B) -> AB\nsegment(B, C) -> BC\nsegment(C, D) -> CD\nsegment(D, A) -> DA"
                },
                "references": ["line(A, C) -> d"],
                "goals": ["d"]
            }]
        })
        .to_string();
        let bank = Bank::from_json(&text).unwrap();
        let problem = bank.problem("r1").unwrap();
        for seed in 0..10 {
            let scene = instantiate(problem, seed).unwrap();
            let corner = |l: &str| scene.get(l).unwrap().as_point().unwrap();
            let (a, b, c, d) = (corner("A"), corner("B"), corner("C"), corner("D"));
            let ab = b.sub(a);
            let dc = c.sub(d);
            // Opposite sides parallel and equal; adjacent sides orthogonal;
            // width strictly exceeds height.
            assert!(ab.sub(dc).norm() < 1e-9);
            assert!(ab.dot(d.sub(a)).abs() < 1e-9);
            assert!(ab.norm() > d.sub(a).norm());
        }
    }

    #[test]
    fn angle_rays_bind_the_requested_angle() {
        let text = serde_json::json!({
            "format_version": 1,
            "pack_order": ["First"],
            "problems": [{
                "id": "a1",
                "pack": "First",
                "title": "Given angle",
                "statement": "An angle of a fixed size at A has bisector w.",
                "target": "w",
                "init": {
                    "params": [
                        {"kind": "angle_deg", "name": "theta", "range": [54.0, 54.0]},
                        {"kind": "angle_rays", "vertex": "A", "arms": ["B", "P"], "rays": ["r1", "r2"], "angle": "theta"}
                    ],
                    "program": ""
                },
                "references": ["angle_bisector(B, A, P) -> w"],
                "goals": ["w"]
            }]
        })
        .to_string();
        let bank = Bank::from_json(&text).unwrap();
        let problem = bank.problem("a1").unwrap();
        for seed in 0..10 {
            let scene = instantiate(problem, seed).unwrap();
            let a = scene.get("A").unwrap().as_point().unwrap();
            let b = scene.get("B").unwrap().as_point().unwrap();
            let p = scene.get("P").unwrap().as_point().unwrap();
            let u = b.sub(a).normalize().unwrap();
            let v = p.sub(a).normalize().unwrap();
            let angle = u.dot(v).clamp(-1.0, 1.0).acos().to_degrees();
            assert!((angle - 54.0).abs() < 1e-9, "angle was {angle}");
            match scene.get("r1").unwrap() {
                Shape::Ray { origin, dir } => {
                    assert!(origin.dist(a) < 1e-12);
                    assert!(dir.sub(u).norm() < 1e-9);
                }
                other => panic!("r1 should be a ray, got {other:?}"),
            }
        }
    }

    #[test]
    fn impossible_length_constraint_reports_exhaustion() {
        let text = serde_json::json!({
            "format_version": 1,
            "pack_order": ["First"],
            "problems": [{
                "id": "c1",
                "pack": "First",
                "title": "Impossible lengths",
                "statement": "Unsatisfiable setup of diagonal d.",
                "target": "d",
                "init": {
                    "params": [
                        {"kind": "length_range", "name": "w", "range": [0.1, 0.2]},
                        {"kind": "length_range", "name": "h", "range": [0.5, 0.6], "less_than": "w"},
                        {"kind": "rectangle", "points": ["A", "B", "C", "D"], "width": "w", "height": "h"}
                    ],
                    "program": ""
                },
                "references": ["line(A, C) -> d"],
                "goals": ["d"]
            }]
        })
        .to_string();
        let bank = Bank::from_json(&text).unwrap();
        let problem = bank.problem("c1").unwrap();
        assert!(matches!(
            instantiate(problem, 3),
            Err(InstantiateError::ConstraintUnsatisfiable(name)) if name == "h"
        ));
    }

    #[test]
    fn circle_param_can_hide_its_center() {
        let text = serde_json::json!({
            "format_version": 1,
            "pack_order": ["First"],
            "problems": [{
                "id": "h1",
                "pack": "First",
                "title": "Hidden center",
                "statement": "A circle is given without its center; draw a chord bisector w.",
                "target": "w",
                "init": {
                    "params": [
                        {"kind": "length_range", "name": "r", "range": [0.3, 0.4]},
                        {"kind": "circle", "label": "c", "radius": "r"}
                    ],
                    "program": ""
                },
                "references": ["point_on(c) -> P\npoint_on(c) -> Q\nperp_bisector(P, Q) -> w"],
                "goals": ["w"]
            }]
        })
        .to_string();
        let bank = Bank::from_json(&text).unwrap();
        let problem = bank.problem("h1").unwrap();
        let scene = instantiate(problem, 5).unwrap();
        assert_eq!(scene.len(), 1);
        assert!(matches!(scene.get("c"), Some(Shape::Circle { .. })));
    }

    #[test]
    fn end_to_end_verification_of_a_reference_candidate() {
        let bank = Bank::from_json(&mini_bank_json()).unwrap();
        let problem = bank.problem("p1").unwrap();
        let candidate = dsl::parse(&problem.references[0]).unwrap();
        let report =
            crate::verify::verify_candidate(problem, &candidate, &Default::default()).unwrap();
        assert!(report.fully_correct, "report: {report:?}");
        assert!(report.tool_sequence_correct);
        // A pickless replay still verifies — the branch search covers both
        // readings of the final intersection.
        let pickless =
            dsl::parse("circle(A, B) -> c1\ncircle(B, A) -> c2\nintersect(c1, c2) -> C").unwrap();
        let report =
            crate::verify::verify_candidate(problem, &pickless, &Default::default()).unwrap();
        assert!(report.fully_correct);
        // A wrong construction fails every instance.
        let wrong = dsl::parse("perp_bisector(A, B) -> pb\nintersect(pb, AB) -> C").unwrap();
        let report =
            crate::verify::verify_candidate(problem, &wrong, &Default::default()).unwrap();
        assert!(!report.fully_correct);
        assert!(!report.tool_sequence_correct);
    }
}
