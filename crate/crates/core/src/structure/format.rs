//! Line-oriented text format for structures and standalone CPSs.
//!
//! ```text
//! cps-hier v1
//! S: L R
//! meta: compact=true
//! player 1
//! B: {L,R} {R}
//! T: u
//! belief u
//!   given {L,R}: (L,v)=1/2 (R,v)=1/2
//!   given {R}: (R,v)=1
//! player 2
//! B: {L,R}
//! T: v
//! belief v
//!   given {L,R}: (R,u)=1
//! ```
//!
//! `#` starts a comment. Pairs that are not listed carry mass 0. A standalone
//! CPS file starts with `cps-hier cps v1`, declares its space with `X:` and
//! lists `given` lines keyed by plain atoms.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::cps::{ConditionalArray, ConditioningFamily};
use crate::measure::{Event, FiniteMeasure, FiniteSpace};
use crate::rational::Rational;

use super::{
    Player, Problem, RawBelief, RawConditional, RawStructure, StructureError, StructureIssue,
    StructureReport, TypeStructure,
};

pub const FORMAT_HEADER: &str = "cps-hier v1";
pub const CPS_HEADER: &str = "cps-hier cps v1";

pub(crate) fn syntax(line: usize, message: impl Into<String>) -> StructureError {
    StructureError::Syntax {
        line,
        message: message.into(),
    }
}

/// Non-empty lines with comments stripped, numbered from 1.
pub(crate) fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then_some((i + 1, l))
    })
}

/// Parses `{a,b} {c} {}` into label lists.
pub(crate) fn parse_events(line: usize, s: &str) -> Result<Vec<Vec<String>>, StructureError> {
    let mut out = Vec::new();
    let mut rest = s.trim();
    while !rest.is_empty() {
        let body = rest
            .strip_prefix('{')
            .ok_or_else(|| syntax(line, format!("expected `{{` at `{rest}`")))?;
        let close = body
            .find('}')
            .ok_or_else(|| syntax(line, "unterminated event, missing `}`"))?;
        out.push(parse_event_body(&body[..close]));
        rest = body[close + 1..].trim_start();
    }
    Ok(out)
}

fn parse_event_body(body: &str) -> Vec<String> {
    body.split(',')
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

/// Parses `given {a,b}: rest`, returning the condition and the rest.
pub(crate) fn parse_given(line: usize, s: &str) -> Result<(Vec<String>, &str), StructureError> {
    let s = s.trim_start();
    let body = s
        .strip_prefix('{')
        .ok_or_else(|| syntax(line, "expected `{` after `given`"))?;
    let close = body
        .find('}')
        .ok_or_else(|| syntax(line, "unterminated condition, missing `}`"))?;
    let cond = parse_event_body(&body[..close]);
    let rest = body[close + 1..]
        .trim_start()
        .strip_prefix(':')
        .ok_or_else(|| syntax(line, "expected `:` after the condition"))?;
    Ok((cond, rest))
}

pub(crate) fn parse_rational(line: usize, s: &str) -> Result<Rational, StructureError> {
    s.parse()
        .map_err(|e| syntax(line, format!("bad probability `{s}`: {e}")))
}

/// Labelled masses in file order.
pub(crate) type Masses<K> = Vec<(K, Rational)>;

pub(crate) fn parse_pair_masses(
    line: usize,
    s: &str,
) -> Result<Masses<(String, String)>, StructureError> {
    s.split_whitespace()
        .map(|tok| {
            let (lhs, value) = tok
                .split_once('=')
                .ok_or_else(|| syntax(line, format!("expected `(s,t)=p/q`, got `{tok}`")))?;
            let inner = lhs
                .strip_prefix('(')
                .and_then(|x| x.strip_suffix(')'))
                .ok_or_else(|| syntax(line, format!("expected a pair `(s,t)`, got `{lhs}`")))?;
            let (a, b) = inner
                .split_once(',')
                .ok_or_else(|| syntax(line, format!("expected a pair `(s,t)`, got `{lhs}`")))?;
            Ok((
                (a.trim().to_string(), b.trim().to_string()),
                parse_rational(line, value)?,
            ))
        })
        .collect()
}

pub(crate) fn parse_atom_masses(line: usize, s: &str) -> Result<Masses<String>, StructureError> {
    s.split_whitespace()
        .map(|tok| {
            let (atom, value) = tok
                .split_once('=')
                .ok_or_else(|| syntax(line, format!("expected `atom=p/q`, got `{tok}`")))?;
            Ok((atom.to_string(), parse_rational(line, value)?))
        })
        .collect()
}

pub(crate) fn labels(rest: &str) -> Vec<String> {
    rest.split_whitespace().map(str::to_string).collect()
}

/// Parses the raw form without semantic validation.
pub(crate) fn parse_raw(text: &str) -> Result<RawStructure, StructureError> {
    let mut lines = content_lines(text);
    match lines.next() {
        Some((_, FORMAT_HEADER)) => {}
        Some((n, other)) => {
            return Err(syntax(
                n,
                format!("expected header `{FORMAT_HEADER}`, got `{other}`"),
            ))
        }
        None => return Err(syntax(1, "empty file")),
    }
    let mut raw = RawStructure::default();
    let mut seen_s = false;
    let mut seen_player = [false; 2];
    let mut seen_b = [false; 2];
    let mut seen_t = [false; 2];
    let mut current: Option<Player> = None;

    for (n, line) in lines {
        let (keyword, rest) = match line.split_once(char::is_whitespace) {
            Some((k, r)) => (k, r.trim()),
            None => (line, ""),
        };
        match keyword {
            "S:" => {
                if std::mem::replace(&mut seen_s, true) {
                    return Err(syntax(n, "section S given twice"));
                }
                raw.s = labels(rest);
            }
            "meta:" => {
                for kv in rest.split_whitespace() {
                    let (k, v) = kv
                        .split_once('=')
                        .ok_or_else(|| syntax(n, format!("expected key=value, got `{kv}`")))?;
                    raw.metadata.push((k.to_string(), v.to_string()));
                }
            }
            "player" => {
                let p = Player::from_label(rest).ok_or_else(|| {
                    syntax(n, format!("unknown player `{rest}`, expected 1 or 2"))
                })?;
                if std::mem::replace(&mut seen_player[p.index()], true) {
                    return Err(syntax(n, format!("player {p} given twice")));
                }
                current = Some(p);
            }
            "B:" | "T:" | "belief" | "given" => {
                let p = current
                    .ok_or_else(|| syntax(n, format!("`{keyword}` outside a player block")))?;
                let rp = &mut raw.players[p.index()];
                match keyword {
                    "B:" => {
                        if std::mem::replace(&mut seen_b[p.index()], true) {
                            return Err(syntax(n, format!("B for player {p} given twice")));
                        }
                        rp.family = parse_events(n, rest)?;
                    }
                    "T:" => {
                        if std::mem::replace(&mut seen_t[p.index()], true) {
                            return Err(syntax(n, format!("T for player {p} given twice")));
                        }
                        rp.types = labels(rest);
                    }
                    "belief" => {
                        if rest.is_empty() || rest.contains(char::is_whitespace) {
                            return Err(syntax(n, "expected `belief <type>`"));
                        }
                        rp.beliefs.push(RawBelief {
                            type_label: rest.to_string(),
                            line: Some(n),
                            conditionals: Vec::new(),
                        });
                    }
                    _ => {
                        let belief = rp
                            .beliefs
                            .last_mut()
                            .ok_or_else(|| syntax(n, "`given` outside a belief block"))?;
                        let (condition, masses) = parse_given(n, rest)?;
                        belief.conditionals.push(RawConditional {
                            condition,
                            line: Some(n),
                            masses: parse_pair_masses(n, masses)?,
                        });
                    }
                }
            }
            other => return Err(syntax(n, format!("unknown keyword `{other}`"))),
        }
    }
    if !seen_s {
        return Err(syntax(1, "missing section S"));
    }
    for p in Player::BOTH {
        if !seen_player[p.index()] {
            return Err(syntax(1, format!("missing block for player {p}")));
        }
        if !seen_b[p.index()] {
            return Err(syntax(1, format!("missing B for player {p}")));
        }
        if !seen_t[p.index()] {
            return Err(syntax(1, format!("missing T for player {p}")));
        }
    }
    Ok(raw)
}

/// Parses and fully validates a structure file.
pub fn parse_structure(text: &str) -> Result<TypeStructure, StructureError> {
    TypeStructure::from_raw(&parse_raw(text)?)
}

pub(crate) fn write_event<'a>(out: &mut String, labels: impl Iterator<Item = &'a str>) {
    out.push('{');
    for (k, l) in labels.enumerate() {
        if k > 0 {
            out.push(',');
        }
        out.push_str(l);
    }
    out.push('}');
}

/// Canonical text. `parse_structure(serialize_structure(ts)) == ts`.
pub fn serialize_structure(ts: &TypeStructure) -> String {
    let mut out = String::new();
    out.push_str(FORMAT_HEADER);
    out.push('\n');
    let _ = writeln!(out, "S: {}", ts.s().labels().join(" "));
    if !ts.metadata().is_empty() {
        out.push_str("meta:");
        for (k, v) in ts.metadata() {
            let _ = write!(out, " {k}={v}");
        }
        out.push('\n');
    }
    for p in Player::BOTH {
        let pd = ts.player(p);
        let _ = writeln!(out, "player {p}");
        out.push_str("B:");
        for e in pd.family().events() {
            out.push(' ');
            write_event(&mut out, e.labels());
        }
        out.push('\n');
        let _ = writeln!(out, "T: {}", pd.types().labels().join(" "));
        let space = pd.belief_space();
        for (t, belief) in pd.beliefs().iter().enumerate() {
            let _ = writeln!(out, "belief {}", pd.types().label(t));
            for (b, m) in pd.family().events().iter().zip(belief.conditionals()) {
                out.push_str("  given ");
                write_event(&mut out, b.labels());
                out.push(':');
                for a in m.support() {
                    let _ = write!(out, " {}={}", space.label(a), m.mass(a));
                }
                out.push('\n');
            }
        }
    }
    out
}

/// Parses a standalone CPS file into an (unvalidated) conditional array.
/// The space and family keep their declared order.
pub fn parse_cps(text: &str) -> Result<ConditionalArray, StructureError> {
    let mut lines = content_lines(text);
    match lines.next() {
        Some((_, CPS_HEADER)) => {}
        Some((n, other)) => {
            return Err(syntax(
                n,
                format!("expected header `{CPS_HEADER}`, got `{other}`"),
            ))
        }
        None => return Err(syntax(1, "empty file")),
    }
    let mut space: Option<Arc<FiniteSpace>> = None;
    let mut rows: Vec<(usize, Vec<String>, Masses<String>)> = Vec::new();
    for (n, line) in lines {
        if let Some(rest) = line.strip_prefix("X:") {
            if space.is_some() {
                return Err(syntax(n, "section X given twice"));
            }
            let l = labels(rest);
            let mut sorted = l.clone();
            sorted.sort();
            if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
                return Err(StructureError::DuplicateLabel {
                    label: w[0].clone(),
                    context: "X".into(),
                });
            }
            space = Some(FiniteSpace::new(l).map_err(|e| syntax(n, e.to_string()))?);
        } else if let Some(rest) = line.strip_prefix("given") {
            let (cond, masses) = parse_given(n, rest)?;
            rows.push((n, cond, parse_atom_masses(n, masses)?));
        } else {
            return Err(syntax(n, format!("unexpected line `{line}`")));
        }
    }
    let space = space.ok_or_else(|| syntax(1, "missing section X"))?;
    let mut issues = Vec::new();
    let issue = |line, problem| StructureIssue {
        player: None,
        type_label: None,
        line: Some(line),
        problem,
    };
    let mut events = Vec::new();
    let mut measures = Vec::new();
    for (n, cond, masses) in rows {
        match Event::from_labels(&space, &cond) {
            Ok(e) => events.push(e),
            Err(e) => issues.push(issue(n, Problem::Measure(e))),
        }
        match FiniteMeasure::new(&space, masses) {
            Ok(m) => measures.push(m),
            Err(e) => issues.push(issue(n, Problem::Measure(e))),
        }
    }
    if !issues.is_empty() {
        return Err(StructureError::Validation(StructureReport { issues }));
    }
    let invalid = |e| {
        StructureError::Validation(StructureReport {
            issues: vec![StructureIssue {
                player: None,
                type_label: None,
                line: None,
                problem: Problem::Cps(e),
            }],
        })
    };
    let family = ConditioningFamily::new(&space, events).map_err(invalid)?;
    ConditionalArray::new(family, measures).map_err(invalid)
}

pub fn serialize_cps(array: &ConditionalArray) -> String {
    let mut out = String::new();
    out.push_str(CPS_HEADER);
    out.push('\n');
    let _ = writeln!(out, "X: {}", array.space().labels().join(" "));
    for (b, m) in array.iter() {
        out.push_str("given ");
        write_event(&mut out, b.labels());
        out.push(':');
        for a in m.support() {
            let _ = write!(out, " {}={}", array.space().label(a), m.mass(a));
        }
        out.push('\n');
    }
    out
}
