//! Text form of hierarchy points.
//!
//! ```text
//! cps-hier hierarchy v1
//! player 1
//! order 2
//! S: L R
//! B_1: {L,R} {R}
//! B_2: {L,R}
//! def @0 player 2 order 1
//!   given {L,R}: L=1
//! level 1
//!   given {L,R}: L=1/2 R=1/2
//!   given {R}: R=1
//! level 2
//!   given {L,R}: (L,@0)=1/2 (R,@0)=1/2
//!   given {R}: (R,@0)=1
//! ```
//!
//! Conditions are written as events on `S`; at levels above 1 they stand for
//! their cylinders. Definitions may only refer to earlier definitions.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::sync::Arc;

use crate::cps::{lift_family_onto, ConditionalArray, ConditioningFamily, Cps};
use crate::measure::{Event, FiniteMeasure, FiniteSpace};
use crate::structure::format::{
    content_lines, labels, parse_atom_masses, parse_events, parse_given, parse_pair_masses, syntax,
    write_event, Masses,
};
use crate::structure::{Player, StructureError};

use super::{q_index, HierarchyError, HierarchyPoint, HierarchyTable, PointDef};

pub const HIERARCHY_HEADER: &str = "cps-hier hierarchy v1";

fn write_cps(out: &mut String, cps: &Cps, base: &ConditioningFamily) {
    let space = cps.space();
    for (b, m) in base.events().iter().zip(cps.conditionals()) {
        out.push_str("  given ");
        write_event(out, b.labels());
        out.push(':');
        for a in m.support() {
            let _ = write!(out, " {}={}", space.label(a), m.mass(a));
        }
        out.push('\n');
    }
}

pub fn serialize_hierarchy(hp: &HierarchyPoint) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{HIERARCHY_HEADER}");
    let _ = writeln!(out, "player {}", hp.player());
    let _ = writeln!(out, "order {}", hp.order());
    let _ = writeln!(out, "S: {}", hp.s().labels().join(" "));
    for p in Player::BOTH {
        let _ = write!(out, "B_{p}:");
        for b in hp.family(p).events() {
            out.push(' ');
            write_event(&mut out, b.labels());
        }
        out.push('\n');
    }
    for (m, def) in hp.defs().iter().enumerate() {
        let _ = write!(out, "def @{m} player {} order {}", def.player, def.order);
        if let Some(r) = def.prefix {
            let _ = write!(out, " prefix @{r}");
        }
        out.push('\n');
        write_cps(&mut out, &def.top, hp.family(def.player));
    }
    for (k, level) in hp.levels().iter().enumerate() {
        let _ = writeln!(out, "level {}", k + 1);
        write_cps(&mut out, level, hp.family(hp.player()));
    }
    out
}

struct Block {
    line: usize,
    player: Player,
    order: usize,
    prefix: Option<usize>,
    rows: Vec<(usize, Vec<String>, String)>,
}

fn parse_ref(line: usize, s: &str) -> Result<usize, StructureError> {
    q_index(s).ok_or_else(|| syntax(line, format!("expected a reference `@m`, got `{s}`")))
}

fn parse_player(line: usize, s: &str) -> Result<Player, StructureError> {
    Player::from_label(s).ok_or_else(|| syntax(line, format!("unknown player `{s}`")))
}

fn parse_order(line: usize, s: &str) -> Result<usize, StructureError> {
    s.parse()
        .ok()
        .filter(|&n: &usize| n > 0)
        .ok_or_else(|| syntax(line, format!("expected a positive order, got `{s}`")))
}

/// Parses and canonicalizes a hierarchy point. Every level must be a CPS;
/// coherence is not required (see [`super::check_coherence`]).
pub fn parse_hierarchy(text: &str) -> Result<HierarchyPoint, HierarchyError> {
    let mut lines = content_lines(text).peekable();
    match lines.next() {
        Some((_, HIERARCHY_HEADER)) => {}
        Some((n, other)) => {
            return Err(syntax(
                n,
                format!("expected header `{HIERARCHY_HEADER}`, got `{other}`"),
            )
            .into())
        }
        None => return Err(syntax(1, "empty file").into()),
    }
    let mut player = None;
    let mut order = None;
    let mut s: Option<Arc<FiniteSpace>> = None;
    let mut fams: [Option<(usize, Vec<Vec<String>>)>; 2] = [None, None];
    let mut defs: Vec<Block> = Vec::new();
    let mut levels: Vec<Block> = Vec::new();
    let mut in_level = false;
    for (n, line) in lines {
        let words: Vec<&str> = line.split_whitespace().collect();
        if let Some(rest) = line.strip_prefix("given") {
            let (cond, masses) = parse_given(n, rest)?;
            let block = if in_level {
                levels.last_mut()
            } else {
                defs.last_mut()
            };
            let block = block.ok_or_else(|| syntax(n, "`given` outside a block"))?;
            block.rows.push((n, cond, masses.to_string()));
        } else if let Some(rest) = line.strip_prefix("S:") {
            s = Some(FiniteSpace::new(labels(rest)).map_err(|e| syntax(n, e.to_string()))?);
        } else if let Some(rest) = line.strip_prefix("B_1:") {
            fams[0] = Some((n, parse_events(n, rest)?));
        } else if let Some(rest) = line.strip_prefix("B_2:") {
            fams[1] = Some((n, parse_events(n, rest)?));
        } else if let ["player", p] = words[..] {
            player = Some(parse_player(n, p)?);
        } else if let ["order", k] = words[..] {
            order = Some(parse_order(n, k)?);
        } else if words.first() == Some(&"def") {
            if in_level {
                return Err(syntax(n, "definitions must precede levels").into());
            }
            let (m, p, k, prefix) = match words[..] {
                [_, m, "player", p, "order", k] => (m, p, k, None),
                [_, m, "player", p, "order", k, "prefix", r] => (m, p, k, Some(parse_ref(n, r)?)),
                _ => return Err(syntax(n, "expected `def @m player P order K [prefix @r]`").into()),
            };
            if parse_ref(n, m)? != defs.len() {
                return Err(syntax(n, format!("expected definition @{}", defs.len())).into());
            }
            defs.push(Block {
                line: n,
                player: parse_player(n, p)?,
                order: parse_order(n, k)?,
                prefix,
                rows: Vec::new(),
            });
        } else if let ["level", k] = words[..] {
            let k = parse_order(n, k)?;
            if k != levels.len() + 1 {
                return Err(syntax(n, format!("expected level {}", levels.len() + 1)).into());
            }
            in_level = true;
            levels.push(Block {
                line: n,
                player: Player::One,
                order: k,
                prefix: None,
                rows: Vec::new(),
            });
        } else {
            return Err(syntax(n, format!("unexpected line `{line}`")).into());
        }
    }
    let player = player.ok_or_else(|| syntax(1, "missing `player`"))?;
    let order = order.ok_or_else(|| syntax(1, "missing `order`"))?;
    let s = s.ok_or_else(|| syntax(1, "missing section S"))?;
    if levels.len() != order {
        return Err(syntax(
            1,
            format!("declared order {order} but found {} levels", levels.len()),
        )
        .into());
    }
    let mut families = Vec::new();
    for (k, fam) in fams.into_iter().enumerate() {
        let (n, events) = fam.ok_or_else(|| syntax(1, format!("missing section B_{}", k + 1)))?;
        let events = events
            .iter()
            .map(|e| Event::from_labels(&s, e))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| syntax(n, e.to_string()))?;
        families.push(ConditioningFamily::new(&s, events).map_err(|e| syntax(n, e.to_string()))?);
    }
    let families: [ConditioningFamily; 2] = families.try_into().expect("two families");

    let mut parsed_defs: Vec<PointDef> = Vec::new();
    for (m, block) in defs.iter().enumerate() {
        match (block.order, block.prefix) {
            (1, None) => {}
            (1, Some(_)) => {
                return Err(syntax(block.line, "order-1 definitions have no prefix").into())
            }
            (_, None) => return Err(syntax(block.line, "missing prefix").into()),
            (k, Some(r)) => {
                let ok =
                    r < m && parsed_defs[r].player == block.player && parsed_defs[r].order == k - 1;
                if !ok {
                    return Err(syntax(
                        block.line,
                        format!(
                            "prefix @{r} is not an earlier order-{} point of player {}",
                            k - 1,
                            block.player
                        ),
                    )
                    .into());
                }
            }
        }
        let top = block_cps(block, block.player, &s, &families, &parsed_defs)?;
        parsed_defs.push(PointDef {
            player: block.player,
            order: block.order,
            prefix: block.prefix,
            top,
        });
    }
    let mut parsed_levels = Vec::new();
    for block in &levels {
        parsed_levels.push(block_cps(block, player, &s, &families, &parsed_defs)?);
    }
    let raw = HierarchyPoint {
        player,
        s: s.clone(),
        families: families.clone(),
        defs: parsed_defs,
        levels: parsed_levels,
    };
    let table = HierarchyTable::new(s, families);
    let id = table.import(&raw)?;
    Ok(table.export(id))
}

fn block_cps(
    block: &Block,
    player: Player,
    s: &Arc<FiniteSpace>,
    families: &[ConditioningFamily; 2],
    defs: &[PointDef],
) -> Result<Cps, StructureError> {
    let base = &families[player.index()];
    if block.rows.len() != base.len() {
        return Err(syntax(
            block.line,
            format!(
                "expected {} conditionals, one per event of B_{player}",
                base.len()
            ),
        ));
    }
    for ((n, cond, _), b) in block.rows.iter().zip(base.events()) {
        let e = Event::from_labels(s, cond).map_err(|e| syntax(*n, e.to_string()))?;
        if e != *b {
            return Err(syntax(*n, format!("expected condition {b}, got {e}")));
        }
    }
    let (space, family, rows): (_, _, Vec<(usize, Masses<String>)>) = if block.order == 1 {
        let rows = block
            .rows
            .iter()
            .map(|(n, _, m)| Ok((*n, parse_atom_masses(*n, m)?)))
            .collect::<Result<_, StructureError>>()?;
        (s.clone(), base.clone(), rows)
    } else {
        let mut pairs = Vec::new();
        let mut refs = BTreeSet::new();
        for (n, _, m) in &block.rows {
            let row = parse_pair_masses(*n, m)?;
            for ((_, q), _) in &row {
                let r = parse_ref(*n, q)?;
                let ok = defs
                    .get(r)
                    .is_some_and(|d| d.player == player.other() && d.order == block.order - 1);
                if !ok {
                    return Err(syntax(
                        *n,
                        format!(
                            "@{r} is not an earlier order-{} point of player {}",
                            block.order - 1,
                            player.other()
                        ),
                    ));
                }
                refs.insert(r);
            }
            pairs.push((*n, row));
        }
        if refs.is_empty() {
            return Err(syntax(block.line, "a higher level needs at least one atom"));
        }
        let q = FiniteSpace::new(refs.iter().map(|r| format!("@{r}"))).expect("valid labels");
        let prod = FiniteSpace::product(s, &q);
        let family = lift_family_onto(base, &prod).into_family();
        let rows = pairs
            .into_iter()
            .map(|(n, row)| {
                let row = row
                    .into_iter()
                    .map(|((a, b), m)| (format!("({a},{b})"), m))
                    .collect();
                (n, row)
            })
            .collect();
        (prod, family, rows)
    };
    let mut measures = Vec::new();
    for (n, row) in rows {
        measures.push(FiniteMeasure::new(&space, row).map_err(|e| syntax(n, e.to_string()))?);
    }
    let array =
        ConditionalArray::new(family, measures).map_err(|e| syntax(block.line, e.to_string()))?;
    Cps::new(array).map_err(|e| syntax(block.line, e.to_string()))
}
