//! Command-line front end: validation, unfolding, partitions, comparison,
//! terminality and type-morphism checks over structure files.

use std::fmt::Write as _;
use std::io::IsTerminal;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use cps_hier::cps::validate_cps;
use cps_hier::hierarchy::{
    check_coherence, finitely_terminal_at, refine, refine_to_fixpoint, serialize_hierarchy,
    terminal_over, unfold, HierarchyError, Match, Partition, TerminalityReport,
};
use cps_hier::structure::{
    disjoint_union, parse_cps, parse_structure, verify_type_morphism, MorphismCandidate,
    MorphismVerdict, Player, StructureError, TypeStructure, FORMAT_HEADER,
};

#[derive(Parser, Debug)]
#[command(name = "cps-hier", version)]
#[command(about = "Check conditional type structures and their belief hierarchies")]
struct Cli {
    /// Output style
    #[arg(long, value_enum, global = true, default_value_t = Format::Human)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Human,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate a structure file or a standalone CPS file
    Validate { file: PathBuf },
    /// Write the order-n hierarchy of one type
    Unfold {
        file: PathBuf,
        #[arg(long)]
        player: String,
        #[arg(long = "type")]
        type_label: String,
        #[arg(long)]
        order: usize,
        /// Write here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Group types by equal hierarchies (at the fixpoint unless --order is given)
    Partition {
        file: PathBuf,
        #[arg(long)]
        order: Option<usize>,
    },
    /// Match the types of two structures by equal hierarchies
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        order: Option<usize>,
    },
    /// Check that every probe hierarchy is generated by some target type
    Terminal {
        target: PathBuf,
        probe: PathBuf,
        #[arg(long)]
        order: Option<usize>,
    },
    /// Check that a type map commutes with the belief maps
    Morphism {
        src: PathBuf,
        dst: PathBuf,
        /// Lines of the form `<player> <source type> <target type>`
        #[arg(long)]
        map: PathBuf,
    },
}

/// Exit status 1: the input was understood and the answer is negative.
/// Exit status 2: the input could not be read or parsed.
enum Failure {
    Domain(String),
    Input(String),
}

impl From<StructureError> for Failure {
    fn from(e: StructureError) -> Self {
        match e {
            StructureError::Syntax { .. } | StructureError::DuplicateLabel { .. } => {
                Failure::Input(e.to_string())
            }
            other => Failure::Domain(other.to_string()),
        }
    }
}

struct Out {
    format: Format,
    color: bool,
    text: String,
}

impl Out {
    fn paint(&self, code: &str, s: &str) -> String {
        if self.color {
            format!("\x1b[{code}m{s}\x1b[0m")
        } else {
            s.to_string()
        }
    }

    fn good(&self, s: &str) -> String {
        self.paint("32", s)
    }

    fn bad(&self, s: &str) -> String {
        self.paint("31", s)
    }

    fn line(&mut self, s: impl AsRef<str>) {
        self.text.push_str(s.as_ref());
        self.text.push('\n');
    }

    fn record(&mut self, v: serde_json::Value) {
        self.line(v.to_string());
    }
}

fn color_enabled() -> bool {
    match std::env::var("CPS_HIER_COLOR").as_deref() {
        Ok("always") => true,
        Ok("never") => false,
        _ => std::io::stdout().is_terminal(),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))
}

fn load(path: &Path) -> Result<TypeStructure, Failure> {
    parse_structure(&read(path)?).map_err(|e| match e {
        StructureError::Validation(report) => Failure::Domain(format!(
            "{} is not a valid structure:\n{}",
            path.display(),
            report.to_string().trim_end()
        )),
        other => Failure::Input(format!("{}: {other}", path.display())),
    })
}

fn parse_player(s: &str) -> Result<Player, Failure> {
    Player::from_label(s)
        .ok_or_else(|| Failure::Input(format!("unknown player `{s}`, expected 1 or 2")))
}

fn base_lines(ts: &TypeStructure) -> Vec<String> {
    let mut lines = vec![format!("S: {}", ts.s().labels().join(" "))];
    for p in Player::BOTH {
        let events: Vec<String> = ts
            .player(p)
            .family()
            .events()
            .iter()
            .map(|e| e.to_string())
            .collect();
        lines.push(format!("B_{p}: {}", events.join(" ")));
    }
    lines
}

/// Checks the shared base, rendering a line diff on mismatch.
fn same_base(a: &TypeStructure, b: &TypeStructure) -> Result<(), Failure> {
    if let Err(e) = a.check_same_base(b) {
        let mut msg = format!("{e}\n");
        for (x, y) in base_lines(a).iter().zip(base_lines(b)) {
            if *x == y {
                let _ = writeln!(msg, "  {x}");
            } else {
                let _ = writeln!(msg, "- {x}\n+ {y}");
            }
        }
        return Err(Failure::Domain(msg.trim_end().to_string()));
    }
    Ok(())
}

fn cmd_validate(out: &mut Out, file: &Path) -> Result<bool, Failure> {
    let text = read(file)?;
    let is_structure = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .find(|l| !l.is_empty())
        == Some(FORMAT_HEADER);
    let issues: Vec<String> = if is_structure {
        match parse_structure(&text) {
            Ok(_) => Vec::new(),
            Err(StructureError::Validation(report)) => {
                report.issues.iter().map(|i| i.to_string()).collect()
            }
            Err(e) => return Err(Failure::Input(format!("{}: {e}", file.display()))),
        }
    } else {
        match parse_cps(&text) {
            Ok(array) => validate_cps(&array)
                .violations
                .iter()
                .map(|v| v.to_string())
                .collect(),
            Err(StructureError::Validation(report)) => {
                report.issues.iter().map(|i| i.to_string()).collect()
            }
            Err(e) => return Err(Failure::Input(format!("{}: {e}", file.display()))),
        }
    };
    match out.format {
        Format::Json => out.record(json!({
            "file": file.display().to_string(),
            "kind": if is_structure { "structure" } else { "cps" },
            "valid": issues.is_empty(),
            "issues": issues,
        })),
        Format::Human if issues.is_empty() => {
            let ok = out.good("OK");
            out.line(ok);
        }
        Format::Human => {
            let head = out.bad("INVALID");
            out.line(format!("{head}: {} problem(s)", issues.len()));
            for i in &issues {
                out.line(format!("  {i}"));
            }
        }
    }
    Ok(issues.is_empty())
}

fn cmd_unfold(
    out: &mut Out,
    file: &Path,
    player: &str,
    type_label: &str,
    order: usize,
    dest: Option<&Path>,
) -> Result<bool, Failure> {
    let ts = load(file)?;
    let p = parse_player(player)?;
    let hp = unfold(&ts, p, type_label, order).map_err(|e| match e {
        HierarchyError::NonPositiveOrder => Failure::Domain(format!(
            "{e}\nusage: cps-hier unfold FILE --player P --type T --order N (N >= 1)"
        )),
        other => Failure::Domain(other.to_string()),
    })?;
    debug_assert!(check_coherence(&hp).is_valid());
    let text = serialize_hierarchy(&hp);
    let body = match out.format {
        Format::Human => text,
        Format::Json => {
            json!({
                "player": p,
                "type": type_label,
                "order": order,
                "definitions": hp.defs().len(),
                "hierarchy": text,
            })
            .to_string()
                + "\n"
        }
    };
    match dest {
        Some(path) => std::fs::write(path, body)
            .map_err(|e| Failure::Input(format!("cannot write {}: {e}", path.display())))?,
        None => out.text.push_str(&body),
    }
    Ok(true)
}

fn partition_at(ts: &TypeStructure, order: Option<usize>) -> (Partition, usize, bool) {
    match order {
        Some(n) => (refine(ts, n), n, false),
        None => {
            let (p, depth) = refine_to_fixpoint(ts);
            (p, depth, true)
        }
    }
}

fn order_note(order: usize, fixpoint: bool) -> String {
    if fixpoint {
        format!("order {order} (fixpoint)")
    } else {
        format!("order {order}")
    }
}

fn cmd_partition(out: &mut Out, file: &Path, order: Option<usize>) -> Result<bool, Failure> {
    let ts = load(file)?;
    let (part, n, fixpoint) = partition_at(&ts, order);
    match out.format {
        Format::Json => {
            for p in Player::BOTH {
                for (t, label) in ts.types(p).labels().iter().enumerate() {
                    out.record(json!({
                        "player": p,
                        "type": label,
                        "cell": part.cell_of(p, t),
                        "order": n,
                        "fixpoint": fixpoint,
                    }));
                }
            }
        }
        Format::Human => {
            out.line(format!("partition at {}", order_note(n, fixpoint)));
            for p in Player::BOTH {
                out.line(format!("player {p}"));
                for (c, cell) in part.labeled_cells(&ts, p).iter().enumerate() {
                    out.line(format!("  cell {c}: {}", cell.join(" ")));
                }
            }
        }
    }
    Ok(true)
}

fn cmd_compare(out: &mut Out, a: &Path, b: &Path, order: Option<usize>) -> Result<bool, Failure> {
    let (ta, tb) = (load(a)?, load(b)?);
    same_base(&ta, &tb)?;
    let union = disjoint_union(&ta, &tb)?;
    let u = &union.structure;
    let (part, n, fixpoint) = partition_at(u, order);
    let mut equivalent = true;
    if out.format == Format::Human {
        out.line(format!("cells of the union at {}", order_note(n, fixpoint)));
    }
    for p in Player::BOTH {
        if out.format == Format::Human {
            out.line(format!("player {p}"));
        }
        for (c, cell) in part.cells(p).iter().enumerate() {
            let side = |emb: &cps_hier::structure::Embedding, src: &TypeStructure| -> Vec<String> {
                (0..src.types(p).len())
                    .filter(|&t| cell.contains(&emb.apply(p, t)))
                    .map(|t| src.types(p).label(t).to_string())
                    .collect()
            };
            let (left, right) = (side(&union.left, &ta), side(&union.right, &tb));
            let shared = !left.is_empty() && !right.is_empty();
            equivalent &= shared;
            match out.format {
                Format::Json => out.record(json!({
                    "player": p,
                    "cell": c,
                    "a": left,
                    "b": right,
                    "order": n,
                    "fixpoint": fixpoint,
                })),
                Format::Human => {
                    let mark = if shared {
                        out.good("both")
                    } else {
                        out.bad("only")
                    };
                    out.line(format!(
                        "  cell {c} [{mark}]: a: {} | b: {}",
                        if left.is_empty() {
                            "-".into()
                        } else {
                            left.join(" ")
                        },
                        if right.is_empty() {
                            "-".into()
                        } else {
                            right.join(" ")
                        },
                    ));
                }
            }
        }
    }
    if out.format == Format::Human {
        let verdict = if equivalent {
            out.good("same hierarchies on both sides")
        } else {
            out.bad("hierarchy sets differ")
        };
        out.line(verdict);
    }
    Ok(equivalent)
}

fn render_terminality(out: &mut Out, report: &TerminalityReport) {
    match out.format {
        Format::Json => {
            for row in &report.rows {
                let (matched, failure) = match &row.outcome {
                    Match::Matched(m) => (m.clone(), None),
                    Match::Unmatched { order } => (Vec::new(), Some(*order)),
                };
                out.record(json!({
                    "player": row.player,
                    "type": row.probe_type,
                    "matched": matched,
                    "failure_order": failure,
                    "order": report.order,
                    "fixpoint": report.fixpoint,
                }));
            }
        }
        Format::Human => {
            out.line(format!(
                "probe types against target at {}",
                order_note(report.order, report.fixpoint)
            ));
            let width = report
                .rows
                .iter()
                .map(|r| r.probe_type.len())
                .chain(Some(4))
                .max()
                .unwrap_or(4);
            out.line(format!("player  {:width$}  result", "type"));
            for row in &report.rows {
                let result = match &row.outcome {
                    Match::Matched(m) => format!("{} {}", out.good("matched"), m.join(" ")),
                    Match::Unmatched { order } => {
                        format!("{} at order {order}", out.bad("unmatched"))
                    }
                };
                out.line(format!(
                    "{:<6}  {:width$}  {result}",
                    row.player.to_string(),
                    row.probe_type
                ));
            }
        }
    }
}

fn cmd_terminal(
    out: &mut Out,
    target: &Path,
    probe: &Path,
    order: Option<usize>,
) -> Result<bool, Failure> {
    let (tt, tp) = (load(target)?, load(probe)?);
    same_base(&tt, &tp)?;
    let report = match order {
        Some(n) => finitely_terminal_at(&tt, &tp, n)?,
        None => terminal_over(&tt, &tp)?,
    };
    render_terminality(out, &report);
    Ok(report.all_matched())
}

fn parse_map(text: &str) -> Result<Vec<(Player, String, String)>, Failure> {
    let mut pairs = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        match line.split_whitespace().collect::<Vec<_>>()[..] {
            [p, from, to] => pairs.push((parse_player(p)?, from.to_string(), to.to_string())),
            _ => {
                return Err(Failure::Input(format!(
                    "map line {}: expected `<player> <source type> <target type>`",
                    n + 1
                )))
            }
        }
    }
    Ok(pairs)
}

fn cmd_morphism(out: &mut Out, src: &Path, dst: &Path, map: &Path) -> Result<bool, Failure> {
    let (ts, td) = (load(src)?, load(dst)?);
    same_base(&ts, &td)?;
    let pairs = parse_map(&read(map)?)?;
    let phi = MorphismCandidate::from_labels(
        &ts,
        &td,
        pairs.iter().map(|(p, a, b)| (*p, a.as_str(), b.as_str())),
    )?;
    let verdict = verify_type_morphism(&ts, &td, &phi)?;
    match (&verdict, out.format) {
        (MorphismVerdict::Preserving, Format::Json) => out.record(json!({"preserving": true})),
        (MorphismVerdict::Broken(w), Format::Json) => out.record(json!({
            "preserving": false,
            "player": w.player,
            "source_type": w.source_type,
            "target_type": w.target_type,
            "condition": w.condition.to_string(),
            "event": w.event.to_string(),
            "pushed_mass": w.pushed_mass,
            "target_mass": w.target_mass,
        })),
        (MorphismVerdict::Preserving, Format::Human) => {
            let ok = out.good("OK");
            out.line(format!("{ok}: the map preserves beliefs"));
        }
        (MorphismVerdict::Broken(w), Format::Human) => {
            let head = out.bad("BROKEN");
            out.line(format!("{head}: {w}"));
        }
    }
    Ok(verdict == MorphismVerdict::Preserving)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut out = Out {
        format: cli.format,
        color: cli.format == Format::Human && color_enabled(),
        text: String::new(),
    };
    let result = match &cli.command {
        Command::Validate { file } => cmd_validate(&mut out, file),
        Command::Unfold {
            file,
            player,
            type_label,
            order,
            out: dest,
        } => cmd_unfold(&mut out, file, player, type_label, *order, dest.as_deref()),
        Command::Partition { file, order } => cmd_partition(&mut out, file, *order),
        Command::Compare { a, b, order } => cmd_compare(&mut out, a, b, *order),
        Command::Terminal {
            target,
            probe,
            order,
        } => cmd_terminal(&mut out, target, probe, *order),
        Command::Morphism { src, dst, map } => cmd_morphism(&mut out, src, dst, map),
    };
    print!("{}", out.text);
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Domain(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
