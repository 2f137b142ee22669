//! Tolerant extraction of construction programs from free-form step text.
//!
//! Model replies describe steps in prose ("Circle Tool: Create a circle with
//! center O and radius OE."), with loosely standardized prefixes, optional
//! numbering, and references like "the perpendicular bisector" back to
//! earlier steps. This module turns such text into a [`Program`]:
//!
//! * one step per line, recognizing `<Line Tool> 3:`, `Line Tool:`,
//!   `Circle:`, `Step 4:`, bare `4.`/`4:` numbering, and bullet markers;
//! * the tool is taken from the prefix when it names one, else from the
//!   longest keyword match in the body (so "perpendicular bisector" wins
//!   over "perpendicular", and "a line parallel to" is the parallel tool);
//! * "line segment" is read as the line tool — step text habitually says
//!   "draw a line segment from A to B" for a full line — while a bare
//!   "segment" keeps segment semantics;
//! * unnamed results get reserved `auto1`, `auto2`, … names, and later
//!   references to "the perpendicular bisector", "circle O", or a point
//!   pair like `AB` resolve to the step that made them;
//! * trailing clauses ("…, intersecting AB at E and CD at F") expand into
//!   explicit intersection steps;
//! * lines that clearly attempt a step but cannot be understood are
//!   reported in [`Extraction::skipped`] with a reason; chatter without any
//!   tool keyword is ignored outright.
//!
//! Extraction never fails on noise — the only error is a reply from which
//! no step at all could be recovered.

use super::{Pick, Program, Step, ToolKind};
use once_cell::sync::Lazy;
use regex::Regex;
use std::collections::HashMap;

/// A successfully extracted program plus the lines that looked like steps
/// but could not be turned into one.
#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub program: Program,
    pub skipped: Vec<SkippedLine>,
}

/// One line the extractor gave up on, with the reason.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedLine {
    pub line: String,
    pub reason: String,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum ExtractError {
    /// No line of the reply yielded a construction step.
    #[error("no construction steps could be extracted")]
    EmptyExtraction,
}

/// Extract a program from free-form reply text.
pub fn extract(text: &str) -> Result<Extraction, ExtractError> {
    let mut resolver = Resolver::default();
    let mut steps = Vec::new();
    let mut skipped = Vec::new();
    for raw in text.lines() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        match extract_line(line, &mut resolver) {
            Ok(mut found) => steps.append(&mut found),
            Err(Skip::Silent) => {}
            Err(Skip::Reason(reason)) => {
                skipped.push(SkippedLine { line: line.to_string(), reason })
            }
        }
    }
    if steps.is_empty() {
        return Err(ExtractError::EmptyExtraction);
    }
    Ok(Extraction { program: Program::new(steps), skipped })
}

/// Why a line produced no steps: plain chatter is dropped silently, failed
/// step attempts carry a reason into [`Extraction::skipped`].
enum Skip {
    Silent,
    Reason(String),
}

impl Skip {
    fn because(reason: impl Into<String>) -> Skip {
        Skip::Reason(reason.into())
    }
}

/// Tool family a prefix or keyword announces. Families group tools whose
/// exact kind is settled by the body ("Line Tool" covers line, ray, and
/// segment; "Circle Tool" covers circle and compass-copied radii).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Family {
    Line,
    Circle,
    Compass,
    PerpBisector,
    Perpendicular,
    Parallel,
    AngleBisector,
    Intersect,
    Point,
    Move,
}

/// Cross-line state: what earlier steps produced, so later references such
/// as "the perpendicular bisector" or the pair `AB` can be resolved.
#[derive(Default)]
struct Resolver {
    /// Output of each line/ray/segment step drawn through two named points.
    line_pairs: Vec<([String; 2], String)>,
    /// Latest circle output per center point name.
    circles_by_center: HashMap<String, String>,
    last_circle: Option<String>,
    last_perp_bisector: Option<String>,
    last_angle_bisector: Option<String>,
    last_bisector: Option<String>,
    last_perpendicular: Option<String>,
    last_parallel: Option<String>,
    last_linear: Option<String>,
    auto_counter: usize,
}

impl Resolver {
    fn next_auto(&mut self) -> String {
        self.auto_counter += 1;
        format!("auto{}", self.auto_counter)
    }

    /// Record what a freshly extracted step makes available to later lines.
    fn note(&mut self, step: &Step) {
        let out = match step.outputs.first() {
            Some(out) => out.clone(),
            None => return,
        };
        match step.tool {
            ToolKind::Line | ToolKind::Ray | ToolKind::Segment => {
                if step.args.len() == 2
                    && step.args.iter().all(|a| a.len() == 1)
                {
                    self.line_pairs
                        .push(([step.args[0].clone(), step.args[1].clone()], out.clone()));
                }
                self.last_linear = Some(out);
            }
            ToolKind::Circle | ToolKind::Compass => {
                if let Some(center) = step.args.first() {
                    self.circles_by_center.insert(center.clone(), out.clone());
                }
                self.last_circle = Some(out);
            }
            ToolKind::PerpBisector => {
                self.last_perp_bisector = Some(out.clone());
                self.last_bisector = Some(out.clone());
                self.last_linear = Some(out);
            }
            ToolKind::AngleBisector => {
                self.last_angle_bisector = Some(out.clone());
                self.last_bisector = Some(out.clone());
                self.last_linear = Some(out);
            }
            ToolKind::Perpendicular => {
                self.last_perpendicular = Some(out.clone());
                self.last_linear = Some(out);
            }
            ToolKind::Parallel => {
                self.last_parallel = Some(out.clone());
                self.last_linear = Some(out);
            }
            ToolKind::Intersect | ToolKind::PointOn | ToolKind::FreePoint => {}
        }
    }

    /// Find the output of an earlier line-family step through the two named
    /// points, in either order.
    fn lookup_pair(&self, a: char, b: char) -> Option<String> {
        let (a, b) = (a.to_string(), b.to_string());
        self.line_pairs
            .iter()
            .rev()
            .find(|([x, y], _)| (*x == a && *y == b) || (*x == b && *y == a))
            .map(|(_, out)| out.clone())
    }
}

static NUMBER_PREFIX: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"^(?:[-*•]\s*)?(?:(?:Step\s+)?\d+\s*[.):]\s*)?").unwrap());
static ANGLE_PREFIX: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"^<\s*([A-Za-z ]+?)\s*>\s*(?:\d+\s*)?:\s*").unwrap());
static PLAIN_PREFIX: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"^([A-Za-z ]+?)\s+Tool\s*(?:\d+\s*)?:\s*").unwrap());
static SHORT_PREFIX: Lazy<Regex> = Lazy::new(|| {
    Regex::new(
        r"^(Line|Ray|Segment|Circle|Compass|Perpendicular Bisector|Perpendicular|Parallel|Angle Bisector|Intersect|Intersection|Point|Move)\s*:\s*",
    )
    .unwrap()
});

fn family_from_prefix(name: &str) -> Option<Family> {
    let lowered = name.to_ascii_lowercase();
    let trimmed = lowered.trim_end_matches("tool").trim();
    match trimmed {
        "line" | "ray" | "segment" => Some(Family::Line),
        "circle" => Some(Family::Circle),
        "compass" => Some(Family::Compass),
        "perpendicular bisector" => Some(Family::PerpBisector),
        "perpendicular" => Some(Family::Perpendicular),
        "parallel" => Some(Family::Parallel),
        "angle bisector" => Some(Family::AngleBisector),
        "intersect" | "intersection" => Some(Family::Intersect),
        "point" => Some(Family::Point),
        "move" => Some(Family::Move),
        _ => None,
    }
}

static KW_INTERSECT: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"\bintersect(?:s|ed|ing|ion|ions)?\b").unwrap());
static KW_PERP_BISECTOR: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"\bperpendicular bisector\b").unwrap());
static KW_ANGLE_BISECTOR: Lazy<Regex> = Lazy::new(|| {
    Regex::new(r"\bangle bisector\b|\bbisector of (?:the )?angle\b|\bbisect (?:the )?angle\b")
        .unwrap()
});
static KW_PERPENDICULAR: Lazy<Regex> = Lazy::new(|| Regex::new(r"\bperpendicular\b").unwrap());
static KW_PARALLEL: Lazy<Regex> = Lazy::new(|| Regex::new(r"\bparallel\b").unwrap());
static KW_COMPASS: Lazy<Regex> = Lazy::new(|| Regex::new(r"\bcompass\b").unwrap());
static KW_CIRCLE: Lazy<Regex> = Lazy::new(|| Regex::new(r"\bcircle\b|\barc\b").unwrap());
static KW_LINE_SEGMENT: Lazy<Regex> = Lazy::new(|| Regex::new(r"\bline segment\b").unwrap());
static KW_SEGMENT: Lazy<Regex> = Lazy::new(|| Regex::new(r"\bsegment\b").unwrap());
static KW_RAY: Lazy<Regex> = Lazy::new(|| Regex::new(r"\bray\b").unwrap());
static KW_LINE: Lazy<Regex> = Lazy::new(|| Regex::new(r"\bline\b").unwrap());
static KW_POINT: Lazy<Regex> = Lazy::new(|| Regex::new(r"\bpoint\b").unwrap());

/// Pick the tool family from body keywords. Intersection verbs are checked
/// first because intersect steps routinely mention the objects ("the
/// perpendicular bisector and AB") that other keywords would match.
fn family_from_body(lower: &str) -> Option<Family> {
    if KW_INTERSECT.is_match(lower) {
        Some(Family::Intersect)
    } else if KW_PERP_BISECTOR.is_match(lower) {
        Some(Family::PerpBisector)
    } else if KW_ANGLE_BISECTOR.is_match(lower) {
        Some(Family::AngleBisector)
    } else if KW_COMPASS.is_match(lower) {
        Some(Family::Compass)
    } else if KW_PERPENDICULAR.is_match(lower) {
        Some(Family::Perpendicular)
    } else if KW_PARALLEL.is_match(lower) {
        Some(Family::Parallel)
    } else if KW_CIRCLE.is_match(lower) {
        Some(Family::Circle)
    } else if KW_LINE_SEGMENT.is_match(lower)
        || KW_SEGMENT.is_match(lower)
        || KW_RAY.is_match(lower)
        || KW_LINE.is_match(lower)
    {
        Some(Family::Line)
    } else if KW_POINT.is_match(lower) {
        Some(Family::Point)
    } else {
        None
    }
}

/// Trailing clause that continues a step with intersections:
/// "…, intersecting AB at E and CD at F" or "… and mark its intersection
/// with CD as E".
static TRAILING_INTERSECT: Lazy<Regex> = Lazy::new(|| {
    Regex::new(
        r"(?:,?\s+(?:intersecting|meeting|crossing|cutting)\s+|,?\s+(?:and\s+)?(?:then\s+)?mark(?:ing)?\s+(?:its|the)\s+intersections?\s+with\s+|\s+to\s+intersect\s+)(.+)$",
    )
    .unwrap()
});

/// One fragment of a trailing clause: object reference, then `at`/`as` and
/// the point name.
static TRAILING_FRAGMENT: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"^(.*?)\s+(?:at|as)\s+(?:point\s+)?([A-Za-z][A-Za-z0-9_]*)$").unwrap());

static PICK_NEAR: Lazy<Regex> = Lazy::new(|| {
    Regex::new(r"(?:nearer|nearest|closer|closest)\s+to\s+(?:point\s+)?([A-Za-z][A-Za-z0-9_]*)")
        .unwrap()
});
static PICK_FAR: Lazy<Regex> = Lazy::new(|| {
    Regex::new(r"(?:farther|farthest|further|furthest)\s+from\s+(?:point\s+)?([A-Za-z][A-Za-z0-9_]*)")
        .unwrap()
});
static PICK_SIDE: Lazy<Regex> = Lazy::new(|| {
    Regex::new(
        r"on\s+the\s+(left|right)\s+of\s+the\s+line\s+from\s+([A-Za-z][A-Za-z0-9_]*)\s+to\s+([A-Za-z][A-Za-z0-9_]*)",
    )
    .unwrap()
});

/// Explicit output naming: "as E", "call it P", "and name it F", …
static OUTPUT_AS: Lazy<Regex> = Lazy::new(|| {
    Regex::new(
        r"\b(?:as|obtaining|giving|yielding)\s+(?:points?\s+)?([A-Za-z][A-Za-z0-9_]*)(?:\s+and\s+(?:point\s+)?([A-Za-z][A-Za-z0-9_]*))?",
    )
    .unwrap()
});
static OUTPUT_CALL: Lazy<Regex> = Lazy::new(|| {
    Regex::new(
        r"\b(?:call|name|label)\s+(?:it|them|this\s+point|the\s+result)?\s*([A-Za-z][A-Za-z0-9_]*)(?:\s+and\s+([A-Za-z][A-Za-z0-9_]*))?",
    )
    .unwrap()
});

static CENTER_RE: Lazy<Regex> = Lazy::new(|| {
    Regex::new(r"(?:center(?:ed)?(?:\s+(?:at|on))?|around)\s+(?:point\s+)?([A-Za-z][A-Za-z0-9_]*)")
        .unwrap()
});
static ARBITRARY_RADIUS: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"\b(?:an?y|arbitrary|some|random)\s+radius\b").unwrap());
static RADIUS_DISTANCE: Lazy<Regex> = Lazy::new(|| {
    Regex::new(
        r"radius\s+(?:equal\s+to\s+)?(?:the\s+)?(?:distance|length)\s+(?:from\s+(?:point\s+)?([A-Za-z][A-Za-z0-9_]*)\s+to\s+(?:point\s+)?([A-Za-z][A-Za-z0-9_]*)|of\s+(?:segment\s+)?([A-Z]{2}))",
    )
    .unwrap()
});
static RADIUS_PAIR: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"radius\s+(?:equal\s+to\s+)?([A-Z]{2})\b").unwrap());
static THROUGH_POINT: Lazy<Regex> = Lazy::new(|| {
    Regex::new(r"(?:passing\s+)?through\s+(?:point\s+)?([A-Za-z][A-Za-z0-9_]*)").unwrap()
});

static PB_PAIR: Lazy<Regex> = Lazy::new(|| {
    Regex::new(r"bisector\s+of\s+(?:the\s+)?(?:segment\s+)?([A-Z]{2})\b").unwrap()
});
static ANGLE_TRIPLE: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"\bangle\s+(?:bisector\s+of\s+)?([A-Z]{3})\b|\bbisector\s+of\s+([A-Z]{3})\b").unwrap());
static ANGLE_AT: Lazy<Regex> = Lazy::new(|| {
    Regex::new(
        r"angle\s+at\s+(?:point\s+)?([A-Za-z][A-Za-z0-9_]*)\s+between\s+(?:point\s+)?([A-Za-z][A-Za-z0-9_]*)\s+and\s+(?:point\s+)?([A-Za-z][A-Za-z0-9_]*)",
    )
    .unwrap()
});

static PERP_TO: Lazy<Regex> = Lazy::new(|| {
    Regex::new(r"perpendicular\s+to\s+(.*?)\s+(?:through|at)\s+(?:point\s+)?([A-Za-z][A-Za-z0-9_]*)")
        .unwrap()
});
static PERP_FROM: Lazy<Regex> = Lazy::new(|| {
    Regex::new(r"perpendicular\s+from\s+(?:point\s+)?([A-Za-z][A-Za-z0-9_]*)\s+to\s+(.+)$").unwrap()
});
static PARALLEL_TO: Lazy<Regex> = Lazy::new(|| {
    Regex::new(
        r"parallel\s+to\s+(.*?)\s+(?:passing\s+through|through|at)\s+(?:point\s+)?([A-Za-z][A-Za-z0-9_]*)",
    )
    .unwrap()
});

static INTERSECTION_OF: Lazy<Regex> = Lazy::new(|| {
    Regex::new(r"intersections?(?:\s+points?)?\s+(?:of|between)\s+(.+)$").unwrap()
});
static INTERSECT_VERB: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"^\s*intersect\s+(.+)$").unwrap());

static POINT_ON: Lazy<Regex> = Lazy::new(|| {
    Regex::new(r"point\s+([A-Za-z][A-Za-z0-9_]*)\s+(?:on|along)\s+(.+)$").unwrap()
});
static POINT_ON_UNNAMED: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"point\s+(?:on|along)\s+(.+)$").unwrap());
static POINT_NAMED: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"point\s+(?:named\s+|called\s+)?([A-Za-z][A-Za-z0-9_]*)\s*$").unwrap());

/// Words after which a single letter or `c1`-style token is read as an
/// identifier. Positional capture keeps prose words and the pronoun "I"
/// from being mistaken for point names.
const MARKERS: &[&str] = &[
    "from", "to", "through", "of", "at", "as", "and", "between", "center", "centered", "on",
    "along", "point", "points", "radius", "vertex", "angle", "line", "ray", "segment", "circle",
    "bisector", "perpendicular", "parallel", "intersect", "intersecting", "label", "labeled",
    "call", "name", "naming", "obtaining", "mark",
];

fn is_pair_token(token: &str) -> bool {
    (2..=3).contains(&token.len()) && token.chars().all(|c| c.is_ascii_uppercase())
}

fn is_identish(token: &str) -> bool {
    if token.len() == 1 {
        return token != "a" && token.chars().all(|c| c.is_ascii_alphabetic());
    }
    token.chars().next().map(|c| c.is_ascii_alphabetic()).unwrap_or(false)
        && token.chars().any(|c| c.is_ascii_digit())
        && token.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Point names mentioned in a clause, in order: pair tokens split into
/// letters, plus single letters / digit-bearing names after marker words.
fn capture_points(body: &str) -> Vec<String> {
    let words: Vec<&str> = body
        .split(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
        .filter(|t| !t.is_empty())
        .collect();
    let mut out = Vec::new();
    for (i, word) in words.iter().enumerate() {
        if is_pair_token(word) {
            let after_marker =
                i > 0 && MARKERS.contains(&words[i - 1].to_ascii_lowercase().as_str());
            if after_marker {
                out.extend(word.chars().map(|c| c.to_string()));
            }
            continue;
        }
        if is_identish(word) {
            let after_marker =
                i > 0 && MARKERS.contains(&words[i - 1].to_ascii_lowercase().as_str());
            if after_marker {
                out.push(word.to_string());
            }
        }
    }
    out
}

/// Resolve an object reference string ("the perpendicular bisector", "AB",
/// "circle O", "c1") to the identifier it denotes.
fn resolve_obj(reference: &str, resolver: &Resolver) -> Result<String, String> {
    let cleaned = reference
        .trim()
        .trim_start_matches("the ")
        .trim()
        .trim_end_matches(|c: char| c == '.' || c == ',')
        .to_string();
    let lower = cleaned.to_ascii_lowercase();
    if lower.contains("other") || lower.contains("first") || lower.contains("second") {
        return Err(format!("ambiguous object reference `{reference}`"));
    }
    if lower.contains("perpendicular bisector") {
        return resolver
            .last_perp_bisector
            .clone()
            .ok_or_else(|| "no perpendicular bisector constructed yet".to_string());
    }
    if lower.contains("angle bisector") {
        return resolver
            .last_angle_bisector
            .clone()
            .ok_or_else(|| "no angle bisector constructed yet".to_string());
    }
    if lower.contains("bisector") {
        return resolver
            .last_bisector
            .clone()
            .ok_or_else(|| "no bisector constructed yet".to_string());
    }
    if lower.contains("perpendicular") {
        return resolver
            .last_perpendicular
            .clone()
            .ok_or_else(|| "no perpendicular constructed yet".to_string());
    }
    if lower.contains("parallel") {
        return resolver
            .last_parallel
            .clone()
            .ok_or_else(|| "no parallel line constructed yet".to_string());
    }
    let words: Vec<&str> = cleaned
        .split(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
        .filter(|t| !t.is_empty())
        .collect();
    if lower.contains("circle") || lower.contains("arc") {
        // "circle O" / "the circle with center O" / "circle c1".
        if let Some(center) = CENTER_RE
            .captures(&cleaned)
            .map(|c| c[1].to_string())
            .or_else(|| {
                words
                    .iter()
                    .skip_while(|w| !w.eq_ignore_ascii_case("circle") && !w.eq_ignore_ascii_case("arc"))
                    .nth(1)
                    .map(|w| w.to_string())
            })
        {
            if let Some(found) = resolver.circles_by_center.get(&center) {
                return Ok(found.clone());
            }
            if center.len() > 1 || center.chars().all(|c| c.is_ascii_lowercase()) {
                return Ok(center);
            }
            return Err(format!("no known circle centered at {center}"));
        }
        return resolver
            .last_circle
            .clone()
            .ok_or_else(|| "no circle to refer back to".to_string());
    }
    if lower.contains("line") || lower.contains("ray") || lower.contains("segment") {
        if let Some(pair) = words.iter().find(|w| is_pair_token(w) && w.len() == 2) {
            let letters: Vec<char> = pair.chars().collect();
            return Ok(resolver
                .lookup_pair(letters[0], letters[1])
                .unwrap_or_else(|| pair.to_string()));
        }
        if let Some(name) = words
            .iter()
            .find(|w| is_identish(w) && !MARKERS.contains(&w.to_ascii_lowercase().as_str()))
        {
            return Ok(name.to_string());
        }
        return resolver
            .last_linear
            .clone()
            .ok_or_else(|| "no line to refer back to".to_string());
    }
    if words.len() == 1 {
        let word = words[0];
        if is_pair_token(word) && word.len() == 2 {
            let letters: Vec<char> = word.chars().collect();
            return Ok(resolver
                .lookup_pair(letters[0], letters[1])
                .unwrap_or_else(|| word.to_string()));
        }
        if word.chars().next().map(|c| c.is_ascii_alphabetic()).unwrap_or(false)
            && word.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
        {
            return Ok(word.to_string());
        }
    }
    Err(format!("cannot resolve object reference `{reference}`"))
}

/// Explicitly named outputs of a clause, if any.
fn named_outputs(body: &str) -> Vec<String> {
    for re in [&*OUTPUT_AS, &*OUTPUT_CALL] {
        if let Some(caps) = re.captures(body) {
            let mut outs = vec![caps[1].to_string()];
            if let Some(second) = caps.get(2) {
                outs.push(second.as_str().to_string());
            }
            return outs;
        }
    }
    Vec::new()
}

fn parse_pick(body: &str) -> Option<Pick> {
    if let Some(caps) = PICK_NEAR.captures(body) {
        return Some(Pick::Near(caps[1].to_string()));
    }
    if let Some(caps) = PICK_FAR.captures(body) {
        return Some(Pick::Far(caps[1].to_string()));
    }
    if let Some(caps) = PICK_SIDE.captures(body) {
        let (a, b) = (caps[2].to_string(), caps[3].to_string());
        return Some(if &caps[1] == "left" { Pick::Left(a, b) } else { Pick::Right(a, b) });
    }
    None
}

fn extract_line(line: &str, resolver: &mut Resolver) -> Result<Vec<Step>, Skip> {
    // A line already written in the construction language is taken as-is;
    // replies from formally prompted solvers are mostly such lines with
    // chatter around them.
    let formal = NUMBER_PREFIX.replace(line, "");
    let formal = formal.trim().trim_end_matches('.');
    if formal.contains("->") {
        if let Ok(program) = super::parse(formal) {
            if !program.steps.is_empty() {
                for step in &program.steps {
                    resolver.note(step);
                }
                return Ok(program.steps);
            }
        }
    }

    // Peel numbering, then a tool prefix if present.
    let mut body = NUMBER_PREFIX.replace(line, "").into_owned();
    let mut family = None;
    if let Some(caps) = ANGLE_PREFIX.captures(&body) {
        family = family_from_prefix(&caps[1]);
        body = body[caps.get(0).unwrap().end()..].to_string();
    } else if let Some(caps) = PLAIN_PREFIX.captures(&body) {
        family = family_from_prefix(&caps[1]);
        body = body[caps.get(0).unwrap().end()..].to_string();
    } else if let Some(caps) = SHORT_PREFIX.captures(&body) {
        family = family_from_prefix(&caps[1]);
        body = body[caps.get(0).unwrap().end()..].to_string();
    }
    let body = body.trim().trim_end_matches('.').to_string();
    if body.is_empty() {
        return Err(Skip::Silent);
    }

    // Split trailing intersection clauses off the main clause.
    let (main, trailing) = match TRAILING_INTERSECT.captures(&body) {
        Some(caps) => {
            let split_at = caps.get(0).unwrap().start();
            (body[..split_at].to_string(), Some(caps[1].to_string()))
        }
        None => (body.clone(), None),
    };
    let lower = main.to_ascii_lowercase();

    let family = match family.or_else(|| family_from_body(&lower)) {
        Some(f) => f,
        None => return Err(Skip::Silent),
    };
    if family == Family::Move {
        return Err(Skip::because("move steps are display-only"));
    }

    let mut steps = extract_main(family, &main, &lower, resolver)?;
    for step in &steps {
        resolver.note(step);
    }

    if let Some(trail) = trailing {
        let base = steps
            .last()
            .and_then(|s| s.outputs.first())
            .cloned()
            .ok_or_else(|| Skip::because("intersection clause with no base object"))?;
        steps.extend(extract_trailing(&trail, &base, resolver)?);
    }
    Ok(steps)
}

/// Parse "OBJ at P and OBJ2 at Q"-style continuations into intersect steps
/// against `base`. A fragment without its own `at`/`as` names a second
/// intersection point of the previous fragment.
fn extract_trailing(
    trail: &str,
    base: &str,
    resolver: &mut Resolver,
) -> Result<Vec<Step>, Skip> {
    let mut steps: Vec<Step> = Vec::new();
    for fragment in trail.split(" and ") {
        let fragment = fragment.trim().trim_end_matches('.');
        if fragment.is_empty() {
            continue;
        }
        match TRAILING_FRAGMENT.captures(fragment) {
            Some(caps) => {
                let obj = resolve_obj(&caps[1], resolver).map_err(Skip::because)?;
                let point = caps[2].to_string();
                steps.push(Step {
                    tool: ToolKind::Intersect,
                    args: vec![base.to_string(), obj],
                    pick: None,
                    outputs: vec![point],
                });
            }
            None => {
                // Bare name: second output of the previous intersection.
                let name = fragment.trim_start_matches("point ").trim();
                match steps.last_mut() {
                    Some(prev) if prev.outputs.len() == 1 && is_identish(name) => {
                        prev.outputs.push(name.to_string());
                    }
                    _ => {
                        return Err(Skip::because(format!(
                            "cannot read intersection clause `{fragment}`"
                        )))
                    }
                }
            }
        }
    }
    Ok(steps)
}

fn extract_main(
    family: Family,
    main: &str,
    lower: &str,
    resolver: &mut Resolver,
) -> Result<Vec<Step>, Skip> {
    match family {
        Family::Line => extract_line_family(main, lower, resolver),
        Family::Circle => extract_circle_family(main, lower, resolver, false),
        Family::Compass => extract_circle_family(main, lower, resolver, true),
        Family::PerpBisector => extract_perp_bisector(main, resolver),
        Family::Perpendicular => extract_perpendicular(main, resolver),
        Family::Parallel => extract_parallel(main, resolver),
        Family::AngleBisector => extract_angle_bisector(main, resolver),
        Family::Intersect => extract_intersect(main, lower, resolver),
        Family::Point => extract_point(main, resolver),
        Family::Move => unreachable!("move lines are skipped before dispatch"),
    }
}

fn output_or_auto(main: &str, resolver: &mut Resolver) -> String {
    named_outputs(main)
        .into_iter()
        .next()
        .unwrap_or_else(|| resolver.next_auto())
}

fn extract_line_family(
    main: &str,
    lower: &str,
    resolver: &mut Resolver,
) -> Result<Vec<Step>, Skip> {
    let tool = if KW_LINE_SEGMENT.is_match(lower) {
        // "line segment" is step-text idiom for a full line.
        ToolKind::Line
    } else if KW_SEGMENT.is_match(lower) {
        ToolKind::Segment
    } else if KW_RAY.is_match(lower) {
        ToolKind::Ray
    } else {
        ToolKind::Line
    };
    let points = capture_points(main);
    if points.len() < 2 {
        return Err(Skip::because("could not find two points to draw through"));
    }
    let out = output_or_auto(main, resolver);
    Ok(vec![Step {
        tool,
        args: vec![points[0].clone(), points[1].clone()],
        pick: None,
        outputs: vec![out],
    }])
}

fn extract_circle_family(
    main: &str,
    lower: &str,
    resolver: &mut Resolver,
    compass_prefix: bool,
) -> Result<Vec<Step>, Skip> {
    let center = CENTER_RE
        .captures(main)
        .map(|c| c[1].to_string())
        .ok_or_else(|| Skip::because("circle step without a center"))?;
    let out = output_or_auto(main, resolver);

    if ARBITRARY_RADIUS.is_match(lower) {
        // Desugar: sample a free point, then draw the circle through it.
        let sampled = resolver.next_auto();
        let free = Step { tool: ToolKind::FreePoint, args: vec![], pick: None, outputs: vec![sampled.clone()] };
        let circle = Step {
            tool: ToolKind::Circle,
            args: vec![center, sampled],
            pick: None,
            outputs: vec![out],
        };
        return Ok(vec![free, circle]);
    }
    if let Some(caps) = RADIUS_DISTANCE.captures(main) {
        let (a, b) = match (caps.get(1), caps.get(2), caps.get(3)) {
            (Some(a), Some(b), _) => (a.as_str().to_string(), b.as_str().to_string()),
            (_, _, Some(pair)) => {
                let letters: Vec<String> = pair.as_str().chars().map(|c| c.to_string()).collect();
                (letters[0].clone(), letters[1].clone())
            }
            _ => unreachable!("regex guarantees one alternative matched"),
        };
        return Ok(vec![Step {
            tool: ToolKind::Compass,
            args: vec![center, a, b],
            pick: None,
            outputs: vec![out],
        }]);
    }
    if let Some(caps) = RADIUS_PAIR.captures(main) {
        let letters: Vec<String> = caps[1].chars().map(|c| c.to_string()).collect();
        if compass_prefix {
            return Ok(vec![Step {
                tool: ToolKind::Compass,
                args: vec![center, letters[0].clone(), letters[1].clone()],
                pick: None,
                outputs: vec![out],
            }]);
        }
        // "radius OE" with center O is the circle through E; a pair not
        // containing the center copies a distance, which needs the compass.
        if letters.contains(&center) {
            let other = letters
                .iter()
                .find(|l| **l != center)
                .cloned()
                .unwrap_or_else(|| center.clone());
            return Ok(vec![Step {
                tool: ToolKind::Circle,
                args: vec![center, other],
                pick: None,
                outputs: vec![out],
            }]);
        }
        return Ok(vec![Step {
            tool: ToolKind::Compass,
            args: vec![center, letters[0].clone(), letters[1].clone()],
            pick: None,
            outputs: vec![out],
        }]);
    }
    if let Some(caps) = THROUGH_POINT.captures(main) {
        let through = caps[1].to_string();
        let (tool, args) = if compass_prefix {
            (ToolKind::Compass, vec![center.clone(), center, through])
        } else {
            (ToolKind::Circle, vec![center, through])
        };
        return Ok(vec![Step { tool, args, pick: None, outputs: vec![out] }]);
    }
    Err(Skip::because("circle step without a radius specification"))
}

fn extract_perp_bisector(main: &str, resolver: &mut Resolver) -> Result<Vec<Step>, Skip> {
    let (a, b) = if let Some(caps) = PB_PAIR.captures(main) {
        let letters: Vec<String> = caps[1].chars().map(|c| c.to_string()).collect();
        (letters[0].clone(), letters[1].clone())
    } else {
        let after = match main.find("bisector") {
            Some(pos) => &main[pos..],
            None => main,
        };
        let points = capture_points(after);
        if points.len() < 2 {
            return Err(Skip::because("perpendicular bisector without two endpoints"));
        }
        (points[0].clone(), points[1].clone())
    };
    let out = output_or_auto(main, resolver);
    Ok(vec![Step {
        tool: ToolKind::PerpBisector,
        args: vec![a, b],
        pick: None,
        outputs: vec![out],
    }])
}

fn extract_perpendicular(main: &str, resolver: &mut Resolver) -> Result<Vec<Step>, Skip> {
    let (obj_ref, point) = if let Some(caps) = PERP_TO.captures(main) {
        (caps[1].to_string(), caps[2].to_string())
    } else if let Some(caps) = PERP_FROM.captures(main) {
        (caps[2].to_string(), caps[1].to_string())
    } else {
        return Err(Skip::because("perpendicular step without `to … through …` form"));
    };
    let obj = resolve_obj(&obj_ref, resolver).map_err(Skip::because)?;
    let out = output_or_auto(main, resolver);
    Ok(vec![Step {
        tool: ToolKind::Perpendicular,
        args: vec![obj, point],
        pick: None,
        outputs: vec![out],
    }])
}

fn extract_parallel(main: &str, resolver: &mut Resolver) -> Result<Vec<Step>, Skip> {
    let caps = PARALLEL_TO
        .captures(main)
        .ok_or_else(|| Skip::because("parallel step without `to … through …` form"))?;
    let obj = resolve_obj(&caps[1], resolver).map_err(Skip::because)?;
    let point = caps[2].to_string();
    let out = output_or_auto(main, resolver);
    Ok(vec![Step {
        tool: ToolKind::Parallel,
        args: vec![obj, point],
        pick: None,
        outputs: vec![out],
    }])
}

fn extract_angle_bisector(main: &str, resolver: &mut Resolver) -> Result<Vec<Step>, Skip> {
    let args = if let Some(caps) = ANGLE_AT.captures(main) {
        // "the angle at V between A and B": the vertex sits in the middle.
        vec![caps[2].to_string(), caps[1].to_string(), caps[3].to_string()]
    } else if let Some(caps) = ANGLE_TRIPLE.captures(main) {
        let triple = caps.get(1).or_else(|| caps.get(2)).unwrap().as_str();
        triple.chars().map(|c| c.to_string()).collect()
    } else {
        let points = capture_points(main);
        if points.len() < 3 {
            return Err(Skip::because("angle bisector without three points"));
        }
        points[..3].to_vec()
    };
    let out = output_or_auto(main, resolver);
    Ok(vec![Step { tool: ToolKind::AngleBisector, args, pick: None, outputs: vec![out] }])
}

fn extract_intersect(
    main: &str,
    lower: &str,
    resolver: &mut Resolver,
) -> Result<Vec<Step>, Skip> {
    // Cut the pick clause and output naming off before splitting the two
    // object references on " and ".
    let caps = INTERSECTION_OF
        .captures(main)
        .or_else(|| INTERSECT_VERB.captures(main))
        .ok_or_else(|| Skip::because("intersection step without `of X and Y` form"))?;
    let mut refs_blob = caps[1].to_string();
    let pick = parse_pick(main);
    if let Some(comma) = refs_blob.find(',') {
        refs_blob.truncate(comma);
    }
    let mut outputs = named_outputs(&refs_blob);
    if let Some(caps) = OUTPUT_AS.captures(&refs_blob) {
        refs_blob.truncate(caps.get(0).unwrap().start());
    } else if let Some(caps) = OUTPUT_CALL.captures(&refs_blob) {
        refs_blob.truncate(caps.get(0).unwrap().start());
    } else if let Some(pos) = refs_blob.rfind(" at ") {
        // "… of AB and CD at E": everything after `at` names the points.
        let tail = refs_blob[pos + 4..].trim().to_string();
        let names: Vec<String> = tail
            .split(" and ")
            .map(|t| t.trim().trim_start_matches("point ").trim().to_string())
            .filter(|t| is_identish(t))
            .collect();
        if !names.is_empty() && names.iter().all(|n| is_identish(n)) {
            outputs = names;
            refs_blob.truncate(pos);
        }
    }
    let refs: Vec<&str> = refs_blob
        .split(" and ")
        .map(|r| r.trim())
        .filter(|r| !r.is_empty())
        .collect();
    if refs.len() != 2 {
        return Err(Skip::because(format!(
            "expected two objects to intersect, found {}",
            refs.len()
        )));
    }
    let a = resolve_obj(refs[0], resolver).map_err(Skip::because)?;
    let b = resolve_obj(refs[1], resolver).map_err(Skip::because)?;
    if outputs.is_empty() {
        let plural = lower.contains("intersections");
        outputs.push(resolver.next_auto());
        if plural {
            outputs.push(resolver.next_auto());
        }
    }
    // A pick hint chooses one of two points, so it only makes sense when a
    // single output is bound.
    let pick = if outputs.len() == 1 { pick } else { None };
    Ok(vec![Step { tool: ToolKind::Intersect, args: vec![a, b], pick, outputs }])
}

fn extract_point(main: &str, resolver: &mut Resolver) -> Result<Vec<Step>, Skip> {
    if let Some(caps) = POINT_ON.captures(main) {
        let name = caps[1].to_string();
        let obj = resolve_obj(&caps[2], resolver).map_err(Skip::because)?;
        if name.eq_ignore_ascii_case("on") {
            return Err(Skip::because("point step without a usable name"));
        }
        return Ok(vec![Step {
            tool: ToolKind::PointOn,
            args: vec![obj],
            pick: None,
            outputs: vec![name],
        }]);
    }
    if let Some(caps) = POINT_ON_UNNAMED.captures(main) {
        let obj = resolve_obj(&caps[1], resolver).map_err(Skip::because)?;
        let out = output_or_auto(main, resolver);
        return Ok(vec![Step {
            tool: ToolKind::PointOn,
            args: vec![obj],
            pick: None,
            outputs: vec![out],
        }]);
    }
    let name = POINT_NAMED
        .captures(main)
        .map(|c| c[1].to_string())
        .or_else(|| named_outputs(main).into_iter().next())
        .unwrap_or_else(|| resolver.next_auto());
    Ok(vec![Step { tool: ToolKind::FreePoint, args: vec![], pick: None, outputs: vec![name] }])
}
