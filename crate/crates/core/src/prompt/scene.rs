//! Textual scene descriptions for prompts that carry visual context.
//!
//! [`describe_scene`] turns an instantiated scene into short declarative
//! sentences grouped into sections: declared figures, point coordinates,
//! drawn objects with the named points on them, and numeric relations
//! (parallels, equal lengths, isolated points). Every relation is measured
//! from the coordinates, so the text never claims more than the figure
//! shows. [`scene_dump`] is the raw alternative handed to an image-capable
//! model when descriptions are delegated instead of templated.

use crate::bank::{InitParam, Problem};
use crate::geom::{distance_to, GeoObject, Point, Scene, Shape, EPS_MATCH, EPS_SEPARATION};

/// Unit direction of a line-like shape.
fn direction(shape: &Shape) -> Option<Point> {
    match shape {
        Shape::Line { dir, .. } | Shape::Ray { dir, .. } => Some(*dir),
        Shape::Segment { a, b } => b.sub(*a).normalize(),
        _ => None,
    }
}

/// A point each line-like shape passes through.
fn anchor(shape: &Shape) -> Option<Point> {
    match shape {
        Shape::Line { anchor, .. } => Some(*anchor),
        Shape::Ray { origin, .. } => Some(*origin),
        Shape::Segment { a, .. } => Some(*a),
        _ => None,
    }
}

/// Distance from `p` to the infinite carrier line of a line-like shape.
fn carrier_distance(shape: &Shape, p: Point) -> f64 {
    match (anchor(shape), direction(shape)) {
        (Some(a), Some(d)) => p.sub(a).cross(d).abs(),
        _ => f64::INFINITY,
    }
}

fn join_names(names: &[&str]) -> String {
    match names {
        [] => String::new(),
        [only] => (*only).to_string(),
        [head @ .., last] => format!("{} and {}", head.join(", "), last),
    }
}

fn angle_between_degrees(vertex: Point, a: Point, b: Point) -> Option<f64> {
    let u = a.sub(vertex).normalize()?;
    let v = b.sub(vertex).normalize()?;
    Some(u.dot(v).clamp(-1.0, 1.0).acos().to_degrees())
}

/// Sentences for the figures a problem declares in its parameters. Only
/// declared structure is narrated here; everything measured lives in the
/// other sections.
fn shape_sentences(problem: &Problem, scene: &Scene) -> Vec<String> {
    let mut out = Vec::new();
    for param in &problem.init.params {
        match param {
            InitParam::PointInBox { .. }
            | InitParam::LengthRange { .. }
            | InitParam::AngleDeg { .. } => {}
            InitParam::Rectangle { points, center, .. } => {
                let name: String = points.concat();
                out.push(format!("{name} is a rectangle."));
                if let Some(center) = center {
                    out.push(format!("{center} is the center of {name}."));
                }
            }
            InitParam::Square { points, center, .. } => {
                let name: String = points.concat();
                out.push(format!("{name} is a square."));
                if let Some(center) = center {
                    out.push(format!("{center} is the center of {name}."));
                }
            }
            InitParam::Triangle { points, .. } => {
                out.push(format!("{} is a triangle.", points.concat()));
            }
            InitParam::AngleRays { vertex, arms, rays, .. } => {
                let corners = [
                    scene.get(vertex).and_then(Shape::as_point),
                    scene.get(&arms[0]).and_then(Shape::as_point),
                    scene.get(&arms[1]).and_then(Shape::as_point),
                ];
                if let [Some(v), Some(a), Some(b)] = corners {
                    if let Some(degrees) = angle_between_degrees(v, a, b) {
                        out.push(format!(
                            "Rays {} and {} set out from {vertex} and enclose an angle of \
                             {degrees:.1} degrees.",
                            rays[0], rays[1]
                        ));
                    }
                }
            }
            InitParam::Circle { label, center, .. } => {
                if let Some(Shape::Circle { radius, .. }) = scene.get(label) {
                    out.push(format!("{label} is a circle of radius {radius:.2}."));
                }
                if let Some(center) = center {
                    out.push(format!("{center} is the center of {label}."));
                }
            }
        }
    }
    out
}

/// Describe an instantiated scene as grouped declarative sentences.
///
/// The output is a pure function of the scene's coordinates and the
/// problem's declared parameters, so a prompt built from it is repeatable.
pub fn describe_scene(problem: &Problem, scene: &Scene) -> String {
    let objects = scene.objects();
    let named_points: Vec<(&str, Point)> = objects
        .iter()
        .filter_map(|o| o.shape.as_point().map(|p| (o.label.as_str(), p)))
        .collect();
    let drawn: Vec<&GeoObject> = objects.iter().filter(|o| !o.shape.is_point()).collect();

    let mut sections: Vec<(&str, Vec<String>)> = Vec::new();
    sections.push(("Shapes:", shape_sentences(problem, scene)));

    let points_section = named_points
        .iter()
        .map(|(label, p)| format!("{label} is at ({:.2}, {:.2}).", p.x, p.y))
        .collect();
    sections.push(("Points:", points_section));

    let mut objects_section = Vec::new();
    for object in &drawn {
        let on: Vec<&str> = named_points
            .iter()
            .filter(|(_, p)| distance_to(&object.shape, *p) <= EPS_MATCH)
            .map(|(label, _)| *label)
            .collect();
        let through = if on.is_empty() {
            String::new()
        } else {
            format!(" through {}", join_names(&on))
        };
        let description = match object.shape {
            Shape::Line { .. } => format!("{} is a line{through}.", object.label),
            Shape::Ray { .. } => format!("{} is a ray{through}.", object.label),
            Shape::Segment { .. } => format!("{} is a segment{through}.", object.label),
            Shape::Circle { center, radius } => {
                let center_name = named_points
                    .iter()
                    .find(|(_, p)| p.dist(center) <= EPS_MATCH)
                    .map(|(label, _)| format!(" centered at {label}"))
                    .unwrap_or_default();
                format!(
                    "{} is a circle of radius {radius:.2}{center_name}{through}.",
                    object.label
                )
            }
            Shape::Point(_) => unreachable!("points were filtered out"),
        };
        objects_section.push(description);
    }
    sections.push(("Objects:", objects_section));

    let mut relations = Vec::new();
    for (i, a) in drawn.iter().enumerate() {
        for b in drawn.iter().skip(i + 1) {
            let (Some(da), Some(db)) = (direction(&a.shape), direction(&b.shape)) else {
                continue;
            };
            let parallel = da.cross(db).abs() <= EPS_MATCH;
            // Collinear pairs are described by shared points, not as
            // parallels.
            let collinear = anchor(&b.shape)
                .map(|p| carrier_distance(&a.shape, p) <= EPS_SEPARATION)
                .unwrap_or(false);
            if parallel && !collinear {
                relations.push(format!("{} is parallel to {}.", a.label, b.label));
            }
        }
    }
    let segment_length = |shape: &Shape| match shape {
        Shape::Segment { a, b } => Some(a.dist(*b)),
        _ => None,
    };
    for (i, a) in drawn.iter().enumerate() {
        for b in drawn.iter().skip(i + 1) {
            let (Some(la), Some(lb)) = (segment_length(&a.shape), segment_length(&b.shape))
            else {
                continue;
            };
            if (la - lb).abs() <= EPS_MATCH {
                relations.push(format!("|{}| = |{}|.", a.label, b.label));
            }
        }
    }
    for (label, p) in &named_points {
        let lies_on_something =
            drawn.iter().any(|object| distance_to(&object.shape, *p) <= EPS_MATCH);
        if !lies_on_something {
            relations.push(format!("{label} is an isolated point."));
        }
    }
    sections.push(("Relations:", relations));

    let mut out = String::new();
    for (heading, sentences) in sections {
        if sentences.is_empty() {
            continue;
        }
        if !out.is_empty() {
            out.push('\n');
        }
        out.push_str(heading);
        out.push('\n');
        for sentence in sentences {
            out.push_str("- ");
            out.push_str(&sentence);
            out.push('\n');
        }
    }
    out
}

/// Raw labeled geometry of a scene as pretty JSON, for delegating the
/// description to an image-capable model instead of templating it.
pub fn scene_dump(scene: &Scene) -> String {
    serde_json::to_string_pretty(scene.objects()).expect("scene objects serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bank::{instance_seed, instantiate, Bank};
    use std::path::Path;

    fn bundled_bank() -> Bank {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/problems.json");
        Bank::load(&path).expect("bundled bank loads")
    }

    #[test]
    fn rectangle_scene_reports_parallels_lengths_and_the_isolated_point() {
        let bank = bundled_bank();
        let problem = bank.problem("halve-rectangle").unwrap();
        let scene = instantiate(problem, instance_seed(7, &problem.id, 0)).unwrap();
        let text = describe_scene(problem, &scene);
        assert!(text.contains("ABCD is a rectangle."), "{text}");
        assert!(text.contains("AB is parallel to CD."), "{text}");
        assert!(text.contains("BC is parallel to DA."), "{text}");
        assert!(text.contains("|AB| = |CD|."), "{text}");
        assert!(text.contains("|BC| = |DA|."), "{text}");
        assert!(text.contains("E is an isolated point."), "{text}");
        // The rectangle's sides differ, so no cross pair is reported equal.
        assert!(!text.contains("|AB| = |BC|"), "{text}");
        // Corners sit on sides, so they are not isolated.
        assert!(!text.contains("A is an isolated point."), "{text}");
        // Determinism: same scene, same text.
        let again = instantiate(problem, instance_seed(7, &problem.id, 0)).unwrap();
        assert_eq!(text, describe_scene(problem, &again));
    }

    #[test]
    fn descriptions_quote_coordinates_and_incidences() {
        let bank = bundled_bank();
        let problem = bank.problem("ray-meets-circle").unwrap();
        let scene = instantiate(problem, instance_seed(11, &problem.id, 0)).unwrap();
        let text = describe_scene(problem, &scene);
        let a = scene.get("A").unwrap().as_point().unwrap();
        assert!(text.contains(&format!("A is at ({:.2}, {:.2}).", a.x, a.y)), "{text}");
        // The ray starts at A and runs through B; both lie on it.
        assert!(text.contains("r is a ray through A and B."), "{text}");
        // The circle is centered at B and passes through A.
        assert!(text.contains("centered at B through A."), "{text}");
    }

    #[test]
    fn angle_scenes_report_the_measured_angle() {
        let bank = bundled_bank();
        let problem = bank.problem("bisect-right-angle").unwrap();
        let scene = instantiate(problem, instance_seed(3, &problem.id, 0)).unwrap();
        let text = describe_scene(problem, &scene);
        assert!(
            text.contains("Rays r1 and r2 set out from Q and enclose an angle of 90.0 degrees."),
            "{text}"
        );
    }

    #[test]
    fn scene_dump_is_valid_json_with_every_label() {
        let bank = bundled_bank();
        let problem = bank.problem("halve-rectangle").unwrap();
        let scene = instantiate(problem, instance_seed(5, &problem.id, 0)).unwrap();
        let dump = scene_dump(&scene);
        let value: serde_json::Value = serde_json::from_str(&dump).unwrap();
        let labels: Vec<&str> =
            value.as_array().unwrap().iter().filter_map(|o| o["label"].as_str()).collect();
        for expected in ["A", "B", "C", "D", "E", "AB", "BC", "CD", "DA"] {
            assert!(labels.contains(&expected), "missing {expected} in dump");
        }
    }
}
