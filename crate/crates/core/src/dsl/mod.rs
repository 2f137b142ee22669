//! The construction program language.
//!
//! A program is a sequence of tool applications over named objects:
//!
//! ```text
//! circle(A, B) -> c1
//! circle(B, A) -> c2
//! intersect(c1, c2) [near A] -> C
//! ```
//!
//! Each step names a tool, its input identifiers, an optional pick hint that
//! disambiguates two-point intersections, and one or two output identifiers.
//! Identifiers match `[A-Za-z][A-Za-z0-9_]*`; names starting with `auto` are
//! reserved for intermediates invented by the free-text extractor and are
//! rejected by the parser. `#` starts a comment that runs to end of line.

mod extract;
mod rename;

pub use extract::{extract, ExtractError, Extraction, SkippedLine};
pub use rename::{
    invert_rename_map, rename_identifiers, rename_one, rename_statement_text,
    text_mentions_identifier, RenameError,
};

use serde::{Deserialize, Serialize};
use std::fmt;

/// Every tool a construction step can apply.
///
/// The first nine construct a new object from existing ones, `Intersect`
/// marks intersection points, and the last two introduce sampled points
/// (an arbitrary point on an object, or a free point of the plane).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolKind {
    Line,
    Ray,
    Segment,
    Circle,
    Compass,
    PerpBisector,
    Perpendicular,
    Parallel,
    AngleBisector,
    Intersect,
    PointOn,
    FreePoint,
}

impl ToolKind {
    pub const ALL: [ToolKind; 12] = [
        ToolKind::Line,
        ToolKind::Ray,
        ToolKind::Segment,
        ToolKind::Circle,
        ToolKind::Compass,
        ToolKind::PerpBisector,
        ToolKind::Perpendicular,
        ToolKind::Parallel,
        ToolKind::AngleBisector,
        ToolKind::Intersect,
        ToolKind::PointOn,
        ToolKind::FreePoint,
    ];

    /// Keyword used in the canonical grammar.
    pub fn name(self) -> &'static str {
        match self {
            ToolKind::Line => "line",
            ToolKind::Ray => "ray",
            ToolKind::Segment => "segment",
            ToolKind::Circle => "circle",
            ToolKind::Compass => "compass",
            ToolKind::PerpBisector => "perp_bisector",
            ToolKind::Perpendicular => "perpendicular",
            ToolKind::Parallel => "parallel",
            ToolKind::AngleBisector => "angle_bisector",
            ToolKind::Intersect => "intersect",
            ToolKind::PointOn => "point_on",
            ToolKind::FreePoint => "free_point",
        }
    }

    pub fn from_name(name: &str) -> Option<ToolKind> {
        ToolKind::ALL.into_iter().find(|t| t.name() == name)
    }

    /// Number of input identifiers the tool takes.
    pub fn arity(self) -> usize {
        match self {
            ToolKind::Line
            | ToolKind::Ray
            | ToolKind::Segment
            | ToolKind::Circle
            | ToolKind::PerpBisector
            | ToolKind::Perpendicular
            | ToolKind::Parallel
            | ToolKind::Intersect => 2,
            ToolKind::Compass | ToolKind::AngleBisector => 3,
            ToolKind::PointOn => 1,
            ToolKind::FreePoint => 0,
        }
    }

    /// Allowed number of output identifiers. Only `intersect` may bind two.
    pub fn output_range(self) -> (usize, usize) {
        match self {
            ToolKind::Intersect => (1, 2),
            _ => (1, 1),
        }
    }
}

impl fmt::Display for ToolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Disambiguation hint for a two-point intersection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pick {
    /// The intersection point nearest to the named object.
    Near(String),
    /// The intersection point farthest from the named object.
    Far(String),
    /// The point on the left of the directed line through the two named points.
    Left(String, String),
    /// The point on the right of the directed line through the two named points.
    Right(String, String),
}

impl Pick {
    /// Identifiers the hint refers to, in order.
    pub fn idents(&self) -> Vec<&str> {
        match self {
            Pick::Near(a) | Pick::Far(a) => vec![a],
            Pick::Left(a, b) | Pick::Right(a, b) => vec![a, b],
        }
    }

    fn render(&self) -> String {
        match self {
            Pick::Near(a) => format!("[near {a}]"),
            Pick::Far(a) => format!("[far {a}]"),
            Pick::Left(a, b) => format!("[left {a} {b}]"),
            Pick::Right(a, b) => format!("[right {a} {b}]"),
        }
    }
}

/// One tool application.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub tool: ToolKind,
    pub args: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pick: Option<Pick>,
    pub outputs: Vec<String>,
}

impl Step {
    pub fn new(tool: ToolKind, args: &[&str], outputs: &[&str]) -> Step {
        Step {
            tool,
            args: args.iter().map(|s| s.to_string()).collect(),
            pick: None,
            outputs: outputs.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn with_pick(mut self, pick: Pick) -> Step {
        self.pick = Some(pick);
        self
    }
}

/// A parsed construction program.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Program {
    pub steps: Vec<Step>,
}

impl Program {
    pub fn new(steps: Vec<Step>) -> Program {
        Program { steps }
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// The tool-kind sequence, used for sequence-level comparison and the
    /// n-gram statistics.
    pub fn tool_kinds(&self) -> Vec<ToolKind> {
        self.steps.iter().map(|s| s.tool).collect()
    }
}

/// Output style for [`render`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderStyle {
    /// The grammar above; `parse(render(p)) == p`.
    Canonical,
    /// One prose sentence per step ("Circle Tool: Construct the circle with
    /// center A and radius AB."), the shape solution text takes in prompts.
    Prose,
}

/// Parse errors carry 1-based line/column positions into the source text.
#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("syntax error at line {line}, column {col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("unknown tool `{name}` at line {line}")]
    UnknownTool { line: usize, name: String },
    #[error("arity mismatch at line {line}: {tool} takes {expected} argument(s), got {got}")]
    ArityMismatch {
        line: usize,
        tool: ToolKind,
        expected: usize,
        got: usize,
    },
    #[error("output count mismatch at line {line}: {tool} binds {expected}, got {got}")]
    OutputMismatch {
        line: usize,
        tool: ToolKind,
        expected: String,
        got: usize,
    },
}

pub fn ident_is_valid(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Whether a name uses the reserved prefix for extractor-invented
/// intermediates.
pub fn ident_is_reserved(name: &str) -> bool {
    name.starts_with("auto")
}

/// Parse canonical program text. Empty (or comment-only) input parses to the
/// empty program so that rendering round-trips.
pub fn parse(text: &str) -> Result<Program, ParseError> {
    let mut steps = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        };
        if line.trim().is_empty() {
            continue;
        }
        steps.push(parse_step(line, line_no)?);
    }
    Ok(Program { steps })
}

fn parse_step(line: &str, line_no: usize) -> Result<Step, ParseError> {
    let mut cursor = Cursor::new(line, line_no);
    cursor.skip_ws();
    let tool_name = cursor.take_ident_raw("tool name")?;
    let tool = ToolKind::from_name(&tool_name).ok_or_else(|| ParseError::UnknownTool {
        line: line_no,
        name: tool_name.clone(),
    })?;
    cursor.skip_ws();
    cursor.expect('(')?;
    let mut args = Vec::new();
    cursor.skip_ws();
    if !cursor.peek_is(')') {
        loop {
            cursor.skip_ws();
            args.push(cursor.take_ident()?);
            cursor.skip_ws();
            if cursor.peek_is(',') {
                cursor.advance();
            } else {
                break;
            }
        }
    }
    cursor.skip_ws();
    cursor.expect(')')?;
    if args.len() != tool.arity() {
        return Err(ParseError::ArityMismatch {
            line: line_no,
            tool,
            expected: tool.arity(),
            got: args.len(),
        });
    }
    cursor.skip_ws();
    let pick = if cursor.peek_is('[') {
        cursor.advance();
        cursor.skip_ws();
        let kind = cursor.take_ident_raw("pick kind")?;
        cursor.skip_ws();
        let first = cursor.take_ident()?;
        let pick = match kind.as_str() {
            "near" => Pick::Near(first),
            "far" => Pick::Far(first),
            "left" | "right" => {
                cursor.skip_ws();
                let second = cursor.take_ident()?;
                if kind == "left" {
                    Pick::Left(first, second)
                } else {
                    Pick::Right(first, second)
                }
            }
            other => {
                return Err(cursor.syntax(format!(
                    "pick hint must be near/far/left/right, got `{other}`"
                )))
            }
        };
        cursor.skip_ws();
        cursor.expect(']')?;
        if tool != ToolKind::Intersect {
            return Err(cursor.syntax(format!("pick hint is only allowed on intersect, not {tool}")));
        }
        Some(pick)
    } else {
        None
    };
    cursor.skip_ws();
    cursor.expect('-')?;
    cursor.expect('>')?;
    let mut outputs = Vec::new();
    loop {
        cursor.skip_ws();
        outputs.push(cursor.take_ident()?);
        cursor.skip_ws();
        if cursor.peek_is(',') {
            cursor.advance();
        } else {
            break;
        }
    }
    cursor.skip_ws();
    if !cursor.at_end() {
        return Err(cursor.syntax("trailing input after step".to_string()));
    }
    let (lo, hi) = tool.output_range();
    if outputs.len() < lo || outputs.len() > hi {
        return Err(ParseError::OutputMismatch {
            line: line_no,
            tool,
            expected: if lo == hi {
                lo.to_string()
            } else {
                format!("{lo}..{hi}")
            },
            got: outputs.len(),
        });
    }
    Ok(Step { tool, args, pick, outputs })
}

/// Tiny hand-rolled scanner; the grammar is line-oriented and regular, so a
/// cursor over chars keeps error positions precise without a parser crate.
struct Cursor<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    _text: &'a str,
}

impl<'a> Cursor<'a> {
    fn new(text: &'a str, line: usize) -> Cursor<'a> {
        Cursor { chars: text.chars().collect(), pos: 0, line, _text: text }
    }

    fn syntax(&self, msg: String) -> ParseError {
        ParseError::Syntax { line: self.line, col: self.pos + 1, msg }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.chars.len()
    }

    fn peek_is(&self, c: char) -> bool {
        self.chars.get(self.pos) == Some(&c)
    }

    fn advance(&mut self) {
        self.pos += 1;
    }

    fn skip_ws(&mut self) {
        while matches!(self.chars.get(self.pos), Some(c) if c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.peek_is(c) {
            self.advance();
            Ok(())
        } else {
            Err(self.syntax(format!(
                "expected `{c}`, found {}",
                self.chars
                    .get(self.pos)
                    .map(|c| format!("`{c}`"))
                    .unwrap_or_else(|| "end of line".to_string())
            )))
        }
    }

    fn take_ident_raw(&mut self, what: &str) -> Result<String, ParseError> {
        let start = self.pos;
        if !matches!(self.chars.get(self.pos), Some(c) if c.is_ascii_alphabetic()) {
            return Err(self.syntax(format!("expected {what}")));
        }
        self.pos += 1;
        while matches!(self.chars.get(self.pos), Some(c) if c.is_ascii_alphanumeric() || *c == '_')
        {
            self.pos += 1;
        }
        Ok(self.chars[start..self.pos].iter().collect())
    }

    fn take_ident(&mut self) -> Result<String, ParseError> {
        let ident = self.take_ident_raw("identifier")?;
        if ident_is_reserved(&ident) {
            return Err(self.syntax(format!(
                "`{ident}` uses the reserved `auto` prefix"
            )));
        }
        Ok(ident)
    }
}

/// Render a program in the requested style. Canonical output parses back to
/// the same program; prose output is what solution examples look like in
/// prompts, and [`extract`] recovers the tool-kind sequence from it.
pub fn render(program: &Program, style: RenderStyle) -> String {
    match style {
        RenderStyle::Canonical => {
            let lines: Vec<String> = program.steps.iter().map(render_canonical_step).collect();
            lines.join("\n")
        }
        RenderStyle::Prose => {
            let lines: Vec<String> = program.steps.iter().map(render_prose_step).collect();
            lines.join("\n")
        }
    }
}

fn render_canonical_step(step: &Step) -> String {
    let args = step.args.join(", ");
    let outputs = step.outputs.join(", ");
    match &step.pick {
        Some(pick) => format!("{}({}) {} -> {}", step.tool, args, pick.render(), outputs),
        None => format!("{}({}) -> {}", step.tool, args, outputs),
    }
}

/// True when every identifier is a single letter, which lets prose templates
/// join point names into the usual `AB`-style pair tokens.
fn all_single_letters(idents: &[String]) -> bool {
    idents.iter().all(|s| s.len() == 1)
}

fn pick_prose(pick: &Option<Pick>) -> String {
    match pick {
        None => String::new(),
        Some(Pick::Near(x)) => format!(", choosing the point nearer to {x}"),
        Some(Pick::Far(x)) => format!(", choosing the point farther from {x}"),
        Some(Pick::Left(a, b)) => {
            format!(", choosing the point on the left of the line from {a} to {b}")
        }
        Some(Pick::Right(a, b)) => {
            format!(", choosing the point on the right of the line from {a} to {b}")
        }
    }
}

fn render_prose_step(step: &Step) -> String {
    let a = |i: usize| step.args[i].clone();
    let out = |i: usize| step.outputs[i].clone();
    match step.tool {
        ToolKind::Line => format!("Line Tool: Construct the line through {} and {}.", a(0), a(1)),
        ToolKind::Ray => format!("Line Tool: Construct the ray from {} through {}.", a(0), a(1)),
        ToolKind::Segment => {
            format!("Line Tool: Construct the segment from {} to {}.", a(0), a(1))
        }
        ToolKind::Circle => {
            if all_single_letters(&step.args) {
                format!(
                    "Circle Tool: Construct the circle with center {} and radius {}{}.",
                    a(0),
                    a(0),
                    a(1)
                )
            } else {
                format!(
                    "Circle Tool: Construct the circle with center {} passing through {}.",
                    a(0),
                    a(1)
                )
            }
        }
        ToolKind::Compass => {
            if step.args[1].len() == 1 && step.args[2].len() == 1 {
                format!(
                    "Compass Tool: Construct the circle with center {} and radius equal to {}{}.",
                    a(0),
                    a(1),
                    a(2)
                )
            } else {
                format!(
                    "Compass Tool: Construct the circle with center {} and radius equal to the distance from {} to {}.",
                    a(0),
                    a(1),
                    a(2)
                )
            }
        }
        ToolKind::PerpBisector => {
            if all_single_letters(&step.args) {
                format!(
                    "Perpendicular Bisector Tool: Construct the perpendicular bisector of {}{}.",
                    a(0),
                    a(1)
                )
            } else {
                format!(
                    "Perpendicular Bisector Tool: Construct the perpendicular bisector of the segment from {} to {}.",
                    a(0),
                    a(1)
                )
            }
        }
        ToolKind::Perpendicular => format!(
            "Perpendicular Tool: Construct the perpendicular to {} through {}.",
            a(0),
            a(1)
        ),
        ToolKind::Parallel => format!(
            "Parallel Tool: Construct the line parallel to {} through {}.",
            a(0),
            a(1)
        ),
        ToolKind::AngleBisector => {
            if all_single_letters(&step.args) {
                format!(
                    "Angle Bisector Tool: Construct the angle bisector of {}{}{}.",
                    a(0),
                    a(1),
                    a(2)
                )
            } else {
                format!(
                    "Angle Bisector Tool: Construct the bisector of the angle at {} between {} and {}.",
                    a(1),
                    a(0),
                    a(2)
                )
            }
        }
        ToolKind::Intersect => {
            if step.outputs.len() == 2 {
                format!(
                    "Intersect Tool: Mark the intersections of {} and {} as {} and {}{}.",
                    a(0),
                    a(1),
                    out(0),
                    out(1),
                    pick_prose(&step.pick)
                )
            } else {
                format!(
                    "Intersect Tool: Mark the intersection of {} and {} as {}{}.",
                    a(0),
                    a(1),
                    out(0),
                    pick_prose(&step.pick)
                )
            }
        }
        ToolKind::PointOn => {
            format!("Point Tool: Mark an arbitrary point {} on {}.", out(0), a(0))
        }
        ToolKind::FreePoint => format!("Point Tool: Mark an arbitrary point {}.", out(0)),
    }
}

/// A static-validation finding. Step indices are 1-based to match the error
/// text a user sees.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Diagnostic {
    UnboundIdentifier { name: String, step: usize },
    Rebinding { name: String, step: usize },
    ArityMismatch { step: usize, tool: ToolKind, expected: usize, got: usize },
    OutputMismatch { step: usize, tool: ToolKind, got: usize },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::UnboundIdentifier { name, step } => {
                write!(f, "UnboundIdentifier {name} @ step {step}")
            }
            Diagnostic::Rebinding { name, step } => write!(f, "Rebinding {name} @ step {step}"),
            Diagnostic::ArityMismatch { step, tool, expected, got } => {
                write!(f, "ArityMismatch {tool} expects {expected} args, got {got} @ step {step}")
            }
            Diagnostic::OutputMismatch { step, tool, got } => {
                write!(f, "OutputMismatch {tool} binds {got} outputs @ step {step}")
            }
        }
    }
}

/// Check a program against an initial set of bound identifiers: every
/// argument (and pick referent) must be bound before use, no identifier may
/// be bound twice, and arities/output counts must match the tool.
///
/// All findings are returned, not just the first, so callers can surface a
/// complete picture of an invalid candidate.
pub fn static_validate(program: &Program, initial: &[String]) -> Vec<Diagnostic> {
    let mut bound: std::collections::HashSet<String> = initial.iter().cloned().collect();
    let mut findings = Vec::new();
    for (idx, step) in program.steps.iter().enumerate() {
        let step_no = idx + 1;
        if step.args.len() != step.tool.arity() {
            findings.push(Diagnostic::ArityMismatch {
                step: step_no,
                tool: step.tool,
                expected: step.tool.arity(),
                got: step.args.len(),
            });
        }
        let (lo, hi) = step.tool.output_range();
        if step.outputs.len() < lo || step.outputs.len() > hi {
            findings.push(Diagnostic::OutputMismatch {
                step: step_no,
                tool: step.tool,
                got: step.outputs.len(),
            });
        }
        for arg in &step.args {
            if !bound.contains(arg) {
                findings.push(Diagnostic::UnboundIdentifier { name: arg.clone(), step: step_no });
            }
        }
        if let Some(pick) = &step.pick {
            for ident in pick.idents() {
                if !bound.contains(ident) {
                    findings.push(Diagnostic::UnboundIdentifier {
                        name: ident.to_string(),
                        step: step_no,
                    });
                }
            }
        }
        for output in &step.outputs {
            if bound.contains(output) {
                findings.push(Diagnostic::Rebinding { name: output.clone(), step: step_no });
            } else {
                bound.insert(output.clone());
            }
        }
    }
    findings
}
