//! Plain-text instance files.
//!
//! ```text
//! # robust-instance v1
//! problem selection
//! n 4
//! p 2
//! N 3
//! c 5 5 3 3
//! c 3 8 9 7
//! c 3 2 1 6
//! ```
//!
//! Shortest-path instances replace `n`/`p` with `edges <m>`, one
//! `edge <idx> <from> <to>` line per edge, and `source <v>` / `sink <v>`.
//! `#` starts a comment anywhere on a line.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::UncertaintySet;
use crate::problems::ProblemSpec;

pub const HEADER: &str = "# robust-instance v1";

fn syntax(line: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        line,
        message: message.into(),
    }
}

fn parse_num<T: FromStr>(line: usize, token: Option<&str>, what: &str) -> Result<T> {
    let token = token.ok_or_else(|| syntax(line, format!("missing {what}")))?;
    token
        .parse()
        .map_err(|_| syntax(line, format!("invalid {what} '{token}'")))
}

fn set_once<T>(slot: &mut Option<T>, value: T, line: usize, key: &str) -> Result<()> {
    if slot.is_some() {
        return Err(syntax(line, format!("duplicate '{key}' directive")));
    }
    *slot = Some(value);
    Ok(())
}

#[derive(Clone, Copy, PartialEq)]
enum Kind {
    Selection,
    ShortestPath,
}

/// Parses an instance file into its uncertainty set and problem.
pub fn parse_instance(text: &str) -> Result<(UncertaintySet, ProblemSpec)> {
    let mut kind = None;
    let mut n: Option<usize> = None;
    let mut p: Option<usize> = None;
    let mut scenario_count: Option<usize> = None;
    let mut edge_count: Option<usize> = None;
    let mut edges: Vec<Option<(usize, usize)>> = Vec::new();
    let mut source = None;
    let mut sink = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let content = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = content.split_whitespace();
        let Some(key) = tokens.next() else { continue };
        match key {
            "problem" => {
                let k = match tokens.next() {
                    Some("selection") => Kind::Selection,
                    Some("shortestpath") => Kind::ShortestPath,
                    Some(other) => return Err(syntax(line, format!("unknown problem '{other}'"))),
                    None => return Err(syntax(line, "missing problem kind")),
                };
                set_once(&mut kind, k, line, key)?;
            }
            "n" => set_once(&mut n, parse_num(line, tokens.next(), "n")?, line, key)?,
            "p" => set_once(&mut p, parse_num(line, tokens.next(), "p")?, line, key)?,
            "N" => set_once(&mut scenario_count, parse_num(line, tokens.next(), "N")?, line, key)?,
            "edges" => {
                let m: usize = parse_num(line, tokens.next(), "edge count")?;
                set_once(&mut edge_count, m, line, key)?;
                edges = vec![None; m];
            }
            "edge" => {
                let m = edge_count.ok_or_else(|| syntax(line, "'edge' before 'edges'"))?;
                let e: usize = parse_num(line, tokens.next(), "edge index")?;
                let from = parse_num(line, tokens.next(), "edge tail")?;
                let to = parse_num(line, tokens.next(), "edge head")?;
                if e >= m {
                    return Err(syntax(line, format!("edge index {e} out of range 0..{m}")));
                }
                if edges[e].is_some() {
                    return Err(syntax(line, format!("edge {e} defined twice")));
                }
                edges[e] = Some((from, to));
            }
            "source" => set_once(
                &mut source,
                parse_num::<usize>(line, tokens.next(), "source")?,
                line,
                key,
            )?,
            "sink" => set_once(&mut sink, parse_num::<usize>(line, tokens.next(), "sink")?, line, key)?,
            "c" => {
                let row = tokens
                    .by_ref()
                    .map(|t| {
                        t.parse::<f64>()
                            .map_err(|_| syntax(line, format!("invalid cost '{t}'")))
                    })
                    .collect::<Result<Vec<f64>>>()?;
                if let Some(&v) = row.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                    return Err(Error::InvalidCost { value: v });
                }
                rows.push(row);
                continue;
            }
            other => return Err(syntax(line, format!("unknown directive '{other}'"))),
        }
        if let Some(extra) = tokens.next() {
            return Err(syntax(line, format!("unexpected token '{extra}'")));
        }
    }

    let end = last_line.max(1);
    let kind = kind.ok_or_else(|| syntax(end, "missing 'problem' directive"))?;
    let spec = match kind {
        Kind::Selection => {
            let n = n.ok_or_else(|| syntax(end, "missing 'n'"))?;
            let p = p.ok_or_else(|| syntax(end, "missing 'p'"))?;
            ProblemSpec::selection(n, p)?
        }
        Kind::ShortestPath => {
            edge_count.ok_or_else(|| syntax(end, "missing 'edges'"))?;
            let edges = edges
                .into_iter()
                .enumerate()
                .map(|(e, edge)| edge.ok_or_else(|| syntax(end, format!("edge {e} not defined"))))
                .collect::<Result<Vec<_>>>()?;
            let source = source.ok_or_else(|| syntax(end, "missing 'source'"))?;
            let sink = sink.ok_or_else(|| syntax(end, "missing 'sink'"))?;
            ProblemSpec::shortest_path(edges, source, sink)?
        }
    };
    let dim = spec.dimension();
    if let Some(row) = rows.iter().find(|r| r.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: row.len(),
        });
    }
    let declared = scenario_count.ok_or_else(|| syntax(end, "missing 'N'"))?;
    if declared != rows.len() {
        return Err(syntax(
            end,
            format!("N = {declared} but {} cost rows given", rows.len()),
        ));
    }
    let u = UncertaintySet::new(rows)?;
    Ok((u, spec))
}

/// Canonical text form; `parse_instance` inverts it exactly.
pub fn serialize_instance(u: &UncertaintySet, spec: &ProblemSpec) -> String {
    let mut out = String::new();
    out.push_str(HEADER);
    out.push('\n');
    match spec {
        ProblemSpec::Selection { n, p } => {
            let _ = writeln!(out, "problem selection\nn {n}\np {p}");
        }
        ProblemSpec::ShortestPath(g) => {
            let _ = writeln!(out, "problem shortestpath\nedges {}", g.edges().len());
            for (e, (a, b)) in g.edges().iter().enumerate() {
                let _ = writeln!(out, "edge {e} {a} {b}");
            }
            let _ = writeln!(out, "source {}\nsink {}", g.source(), g.sink());
        }
    }
    let _ = writeln!(out, "N {}", u.num_scenarios());
    for row in u.scenarios() {
        out.push('c');
        for v in row {
            // shortest representation that parses back to the same f64
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    }
    out
}
