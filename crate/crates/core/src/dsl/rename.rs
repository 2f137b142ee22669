//! Systematic identifier renaming with exact inverses.
//!
//! Prompt variants can relabel the points of a problem. Programs are renamed
//! token by token; prose statements additionally rename the letters inside
//! `AB`-style point-pair tokens, so `AC` follows `C -> X` to `AX`. A map is
//! rejected when applying it would merge two distinct names, which makes
//! every accepted rename invertible: [`invert_rename_map`] flips the map,
//! and applying the flipped map restores the original bytes.

use super::{ident_is_reserved, ident_is_valid, Program};
use std::collections::{BTreeMap, BTreeSet};

/// Why a rename map was rejected.
#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum RenameError {
    /// The map sends `from` to a name that already occurs and is not itself
    /// renamed away, which would merge two distinct objects.
    #[error("renaming `{from}` to `{to}` collides with an existing identifier")]
    Collision { from: String, to: String },
    /// Two identifiers are renamed to the same target.
    #[error("two identifiers are renamed to `{to}`")]
    DuplicateTarget { to: String },
    /// The target is not a usable identifier: lexically invalid, reserved,
    /// or a non-uppercase replacement for a point letter that occurs inside
    /// pair tokens like `AB` (where only single letters can stand in).
    #[error("`{to}` is not a usable rename target for `{from}`")]
    InvalidTarget { from: String, to: String },
    /// A stored program could not be parsed, so its identifiers cannot be
    /// renamed.
    #[error("program text failed to parse while renaming")]
    UnparseableProgram,
}

/// A 2-4 letter all-uppercase token, read as a run of point names: segment
/// and angle names like `AB` or `PQR`, and quadrilateral names like `ABCD`.
fn is_pair_token(token: &str) -> bool {
    (2..=4).contains(&token.len()) && token.chars().all(|c| c.is_ascii_uppercase())
}

fn is_single_upper(token: &str) -> bool {
    token.len() == 1 && token.chars().all(|c| c.is_ascii_uppercase())
}

/// Rename one token: exact matches win, then pair tokens are renamed letter
/// by letter, and anything else passes through unchanged.
pub fn rename_one(token: &str, map: &BTreeMap<String, String>) -> String {
    rename_token(token, map)
}

fn rename_token(token: &str, map: &BTreeMap<String, String>) -> String {
    if let Some(target) = map.get(token) {
        return target.clone();
    }
    if is_pair_token(token) {
        return token
            .chars()
            .map(|c| {
                let key = c.to_string();
                map.get(&key).cloned().unwrap_or(key)
            })
            .collect();
    }
    token.to_string()
}

/// Record a token into the used-identifier set, expanding pair tokens into
/// their letters so that per-letter renames see them.
fn note_used(token: &str, used: &mut BTreeSet<String>) {
    if is_pair_token(token) {
        for c in token.chars() {
            used.insert(c.to_string());
        }
    }
    used.insert(token.to_string());
}

fn validate(
    map: &BTreeMap<String, String>,
    used: &BTreeSet<String>,
) -> Result<(), RenameError> {
    let mut targets = BTreeSet::new();
    for (from, to) in map {
        if !ident_is_valid(to) || ident_is_reserved(to) {
            return Err(RenameError::InvalidTarget { from: from.clone(), to: to.clone() });
        }
        if is_single_upper(from) && !is_single_upper(to) {
            // A point letter that occurs inside a pair token can only be
            // replaced by another single letter; pair tokens are renamed
            // letter by letter and have no room for anything longer.
            let c = from.chars().next().unwrap();
            if used.iter().any(|t| is_pair_token(t) && t.contains(c)) {
                return Err(RenameError::InvalidTarget { from: from.clone(), to: to.clone() });
            }
        }
        if !targets.insert(to.clone()) {
            return Err(RenameError::DuplicateTarget { to: to.clone() });
        }
    }
    for (from, to) in map {
        if from == to {
            continue;
        }
        // Occupied target that is not itself renamed away: the rename would
        // conflate two names.
        if used.contains(from) && used.contains(to) && !map.contains_key(to) {
            return Err(RenameError::Collision { from: from.clone(), to: to.clone() });
        }
    }
    Ok(())
}

/// Apply a rename map to every identifier of a program: arguments, outputs,
/// and pick referents. Pair tokens such as `AB` follow their letters.
pub fn rename_identifiers(
    program: &Program,
    map: &BTreeMap<String, String>,
) -> Result<Program, RenameError> {
    let mut used = BTreeSet::new();
    for step in &program.steps {
        for name in step.args.iter().chain(step.outputs.iter()) {
            note_used(name, &mut used);
        }
        if let Some(pick) = &step.pick {
            for name in pick.idents() {
                note_used(name, &mut used);
            }
        }
    }
    validate(map, &used)?;
    let mut renamed = program.clone();
    for step in &mut renamed.steps {
        for name in step.args.iter_mut().chain(step.outputs.iter_mut()) {
            *name = rename_token(name, map);
        }
        if let Some(pick) = &mut step.pick {
            use super::Pick;
            *pick = match pick {
                Pick::Near(a) => Pick::Near(rename_token(a, map)),
                Pick::Far(a) => Pick::Far(rename_token(a, map)),
                Pick::Left(a, b) => Pick::Left(rename_token(a, map), rename_token(b, map)),
                Pick::Right(a, b) => Pick::Right(rename_token(a, map), rename_token(b, map)),
            };
        }
    }
    Ok(renamed)
}

/// Identifier-shaped tokens we treat as names inside prose: single letters
/// (except the article `a`), pair tokens, and `c1`-style object names. Prose
/// words never match, so renaming leaves the surrounding English alone.
fn text_token_is_ident(token: &str) -> bool {
    if token.len() == 1 {
        return token != "a" && token.chars().all(|c| c.is_ascii_alphabetic());
    }
    if is_pair_token(token) {
        return true;
    }
    let mut chars = token.chars();
    chars.next().map(|c| c.is_ascii_lowercase()).unwrap_or(false)
        && token.chars().any(|c| c.is_ascii_digit())
        && token.chars().all(|c| c.is_ascii_alphanumeric())
}

/// Apply a rename map to a prose statement. Only identifier-shaped tokens
/// are touched; everything else (including punctuation and spacing) is
/// preserved, so applying the inverted map restores the input byte for byte.
pub fn rename_statement_text(
    text: &str,
    map: &BTreeMap<String, String>,
) -> Result<String, RenameError> {
    let mut used = BTreeSet::new();
    for token in tokens(text) {
        if text_token_is_ident(token) || map.contains_key(token) {
            note_used(token, &mut used);
        }
    }
    validate(map, &used)?;
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(start) = rest.find(|c: char| c.is_ascii_alphanumeric() || c == '_') {
        out.push_str(&rest[..start]);
        let token_len = rest[start..]
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(rest.len() - start);
        let token = &rest[start..start + token_len];
        if text_token_is_ident(token) || map.contains_key(token) {
            out.push_str(&rename_token(token, map));
        } else {
            out.push_str(token);
        }
        rest = &rest[start + token_len..];
    }
    out.push_str(rest);
    Ok(out)
}

fn tokens(text: &str) -> impl Iterator<Item = &str> {
    text.split(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
        .filter(|t| !t.is_empty())
}

/// Whether a prose statement mentions an identifier, either as a standalone
/// token or — for single uppercase point names — inside a pair token such
/// as `AB` or `ABCD`.
pub fn text_mentions_identifier(text: &str, ident: &str) -> bool {
    tokens(text).any(|token| {
        token == ident
            || (is_single_upper(ident)
                && is_pair_token(token)
                && token.contains(ident.chars().next().unwrap()))
    })
}

/// Flip a rename map. Because accepted maps are injective and collision
/// free, renaming with the inverse undoes renaming with the original.
pub fn invert_rename_map(map: &BTreeMap<String, String>) -> BTreeMap<String, String> {
    map.iter().map(|(k, v)| (v.clone(), k.clone())).collect()
}
