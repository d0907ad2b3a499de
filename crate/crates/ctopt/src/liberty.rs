//! Liberty (.lib) subset parser: combinational cells with NLDM
//! delay/slew tables, pin capacitances, areas and boolean functions.
//!
//! Supported groups: `library`, `lu_table_template`, `cell`, `pin`,
//! `timing`, `cell_rise`/`cell_fall`, `rise_transition`/`fall_transition`,
//! `index_1`/`index_2`, `values`, plus `capacitance`, `area`, `function`,
//! `when`, `related_pin` attributes. Everything else is skipped. Units
//! are normalized to ns/fF at parse time.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logic::{parse_expr, BoolExpr};
use crate::lut::Lut2D;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Edge {
    Rise,
    Fall,
}

/// One timing arc of a cell, for a single signal edge and `when`
/// condition variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingArc {
    pub input: String,
    pub output: String,
    pub edge: Edge,
    pub when: Option<String>,
    pub delay: Lut2D,
    pub slew: Lut2D,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LibraryCell {
    pub name: String,
    /// Area in square micrometers.
    pub area: f64,
    /// (pin name, capacitance fF), in declaration order.
    pub input_pins: Vec<(String, f64)>,
    pub output_pins: Vec<String>,
    pub arcs: Vec<TimingArc>,
    /// Boolean function per output pin.
    pub functions: IndexMap<String, BoolExpr>,
}

impl LibraryCell {
    pub fn input_cap(&self, pin: &str) -> Option<f64> {
        self.input_pins.iter().find(|(n, _)| n == pin).map(|(_, c)| *c)
    }

    pub fn is_input(&self, pin: &str) -> bool {
        self.input_pins.iter().any(|(n, _)| n == pin)
    }

    pub fn is_output(&self, pin: &str) -> bool {
        self.output_pins.iter().any(|n| n == pin)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingLibrary {
    pub name: String,
    pub cells: IndexMap<String, LibraryCell>,
}

impl TimingLibrary {
    pub fn cell(&self, name: &str) -> Result<&LibraryCell> {
        self.cells.get(name).ok_or_else(|| Error::UnknownCell(name.to_string()))
    }

    /// Serialize back to Liberty text (normalized ns/fF units, one
    /// timing group per arc). `parse_liberty(to_liberty(lib))` yields an
    /// identical library for the supported subset.
    pub fn to_liberty(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("library ({}) {{\n", self.name));
        out.push_str("  time_unit : \"1ns\";\n");
        out.push_str("  capacitive_load_unit (1,ff);\n");
        for cell in self.cells.values() {
            out.push_str(&format!("  cell ({}) {{\n", cell.name));
            out.push_str(&format!("    area : {};\n", cell.area));
            for (pin, cap) in &cell.input_pins {
                out.push_str(&format!("    pin ({pin}) {{\n"));
                out.push_str("      direction : input;\n");
                out.push_str(&format!("      capacitance : {cap};\n"));
                out.push_str("    }\n");
            }
            for pin in &cell.output_pins {
                out.push_str(&format!("    pin ({pin}) {{\n"));
                out.push_str("      direction : output;\n");
                out.push_str(&format!(
                    "      function : \"{}\";\n",
                    cell.functions.get(pin).map(|f| f.to_string()).unwrap_or_default()
                ));
                for arc in cell.arcs.iter().filter(|a| &a.output == pin) {
                    out.push_str("      timing () {\n");
                    out.push_str(&format!("        related_pin : \"{}\";\n", arc.input));
                    if let Some(w) = &arc.when {
                        out.push_str(&format!("        when : \"{w}\";\n"));
                    }
                    let (dname, tname) = match arc.edge {
                        Edge::Rise => ("cell_rise", "rise_transition"),
                        Edge::Fall => ("cell_fall", "fall_transition"),
                    };
                    write_table(&mut out, dname, &arc.delay);
                    write_table(&mut out, tname, &arc.slew);
                    out.push_str("      }\n");
                }
                out.push_str("    }\n");
            }
            out.push_str("  }\n");
        }
        out.push_str("}\n");
        out
    }
}

fn write_table(out: &mut String, name: &str, lut: &Lut2D) {
    let axis = |a: &[f64]| a.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ");
    out.push_str(&format!("        {name} (t) {{\n"));
    out.push_str(&format!("          index_1 (\"{}\");\n", axis(&lut.slew_axis)));
    out.push_str(&format!("          index_2 (\"{}\");\n", axis(&lut.load_axis)));
    out.push_str("          values (");
    for (i, row) in lut.values.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(&format!("\"{}\"", axis(row)));
    }
    out.push_str(");\n        }\n");
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseWarning {
    pub line: usize,
    pub message: String,
}

/// Per (input pin, output pin): all arcs (edges and `when` variants)
/// resampled onto the union grid and merged by elementwise maximum.
pub fn worst_case_arcs(cell: &LibraryCell) -> IndexMap<(String, String), (Lut2D, Lut2D)> {
    let mut pairs: IndexMap<(String, String), (Vec<&Lut2D>, Vec<&Lut2D>)> = IndexMap::new();
    for arc in &cell.arcs {
        let entry = pairs
            .entry((arc.input.clone(), arc.output.clone()))
            .or_default();
        entry.0.push(&arc.delay);
        entry.1.push(&arc.slew);
    }
    pairs
        .into_iter()
        .map(|(k, (delays, slews))| {
            let d = Lut2D::union_max(&delays).expect("non-empty arc set");
            let s = Lut2D::union_max(&slews).expect("non-empty arc set");
            (k, (d, s))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// tokenizer

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Atom(String),
    Str(String),
    Punct(u8),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
}

fn tokenize(text: &str) -> Result<Vec<Token>> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut pos = 0;
    let mut line = 1;
    while pos < bytes.len() {
        let c = bytes[pos];
        match c {
            b'\n' => {
                line += 1;
                pos += 1;
            }
            b' ' | b'\t' | b'\r' => pos += 1,
            b'\\' => {
                // line continuation
                pos += 1;
                while pos < bytes.len() && (bytes[pos] == b' ' || bytes[pos] == b'\t' || bytes[pos] == b'\r') {
                    pos += 1;
                }
                if pos < bytes.len() && bytes[pos] == b'\n' {
                    line += 1;
                    pos += 1;
                }
            }
            b'/' if bytes.get(pos + 1) == Some(&b'*') => {
                pos += 2;
                loop {
                    if pos + 1 >= bytes.len() {
                        return Err(Error::Parse { line, msg: "unterminated comment".into() });
                    }
                    if bytes[pos] == b'\n' {
                        line += 1;
                    }
                    if bytes[pos] == b'*' && bytes[pos + 1] == b'/' {
                        pos += 2;
                        break;
                    }
                    pos += 1;
                }
            }
            b'/' if bytes.get(pos + 1) == Some(&b'/') => {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            }
            b'"' => {
                let start_line = line;
                pos += 1;
                let mut s = String::new();
                loop {
                    if pos >= bytes.len() {
                        return Err(Error::Parse { line: start_line, msg: "unterminated string".into() });
                    }
                    match bytes[pos] {
                        b'"' => {
                            pos += 1;
                            break;
                        }
                        b'\\' if bytes.get(pos + 1) == Some(&b'\n') => {
                            // continuation inside a quoted value list
                            line += 1;
                            pos += 2;
                        }
                        b'\n' => {
                            line += 1;
                            s.push('\n');
                            pos += 1;
                        }
                        b => {
                            s.push(b as char);
                            pos += 1;
                        }
                    }
                }
                toks.push(Token { tok: Tok::Str(s), line: start_line });
            }
            b'(' | b')' | b'{' | b'}' | b';' | b':' | b',' => {
                toks.push(Token { tok: Tok::Punct(c), line });
                pos += 1;
            }
            _ => {
                let start = pos;
                while pos < bytes.len()
                    && !bytes[pos].is_ascii_whitespace()
                    && !b"(){};:,\"\\".contains(&bytes[pos])
                {
                    pos += 1;
                }
                if pos == start {
                    return Err(Error::Parse {
                        line,
                        msg: format!("unexpected character `{}`", c as char),
                    });
                }
                toks.push(Token {
                    tok: Tok::Atom(std::str::from_utf8(&bytes[start..pos]).unwrap().to_string()),
                    line,
                });
            }
        }
    }
    Ok(toks)
}

// ---------------------------------------------------------------------------
// generic group tree

#[derive(Debug)]
struct Group {
    name: String,
    args: Vec<String>,
    line: usize,
    attrs: Vec<Attr>,
    groups: Vec<Group>,
}

#[derive(Debug)]
struct Attr {
    name: String,
    line: usize,
    /// Simple `name : value ;` holds one entry; complex `name (a, b);`
    /// holds the argument list.
    values: Vec<String>,
}

impl Group {
    fn find(&self, name: &str) -> Option<&Group> {
        self.groups.iter().find(|g| g.name == name)
    }

    fn attr(&self, name: &str) -> Option<&Attr> {
        self.attrs.iter().find(|a| a.name == name)
    }

    fn simple(&self, name: &str) -> Option<&str> {
        self.attr(name).and_then(|a| a.values.first()).map(|s| s.as_str())
    }
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn line(&self) -> usize {
        self.toks
            .get(self.pos.min(self.toks.len().saturating_sub(1)))
            .map(|t| t.line)
            .unwrap_or(0)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expect_punct(&mut self, p: u8) -> Result<usize> {
        let line = self.line();
        match self.bump() {
            Some(Token { tok: Tok::Punct(c), line }) if c == p => Ok(line),
            other => Err(Error::Parse {
                line: other.as_ref().map(|t| t.line).unwrap_or(line),
                msg: format!(
                    "expected `{}`, found {}",
                    p as char,
                    describe(other.as_ref().map(|t| &t.tok))
                ),
            }),
        }
    }

    /// Parses `name ( args... )` followed by `{ body }` (group) or `;`
    /// (complex attribute) or `: value ;` (simple attribute).
    fn statement(&mut self) -> Result<Statement> {
        let (name, line) = match self.bump() {
            Some(Token { tok: Tok::Atom(a), line }) => (a, line),
            other => {
                return Err(Error::Parse {
                    line: other.as_ref().map(|t| t.line).unwrap_or(0),
                    msg: format!("expected identifier, found {}", describe(other.as_ref().map(|t| &t.tok))),
                })
            }
        };
        match self.peek() {
            Some(Tok::Punct(b':')) => {
                self.bump();
                let value = match self.bump() {
                    Some(Token { tok: Tok::Atom(a), .. }) => a,
                    Some(Token { tok: Tok::Str(s), .. }) => s,
                    other => {
                        return Err(Error::Parse {
                            line,
                            msg: format!(
                                "expected attribute value, found {}",
                                describe(other.as_ref().map(|t| &t.tok))
                            ),
                        })
                    }
                };
                self.expect_punct(b';')?;
                Ok(Statement::Attr(Attr { name, line, values: vec![value] }))
            }
            Some(Tok::Punct(b'(')) => {
                self.bump();
                let mut args = Vec::new();
                loop {
                    match self.bump() {
                        Some(Token { tok: Tok::Punct(b')'), .. }) => break,
                        Some(Token { tok: Tok::Punct(b','), .. }) => {}
                        Some(Token { tok: Tok::Atom(a), .. }) => args.push(a),
                        Some(Token { tok: Tok::Str(s), .. }) => args.push(s),
                        other => {
                            return Err(Error::Parse {
                                line,
                                msg: format!(
                                    "expected `)` in argument list, found {}",
                                    describe(other.as_ref().map(|t| &t.tok))
                                ),
                            })
                        }
                    }
                }
                match self.peek() {
                    Some(Tok::Punct(b'{')) => {
                        self.bump();
                        let mut attrs = Vec::new();
                        let mut groups = Vec::new();
                        loop {
                            match self.peek() {
                                Some(Tok::Punct(b'}')) => {
                                    self.bump();
                                    break;
                                }
                                None => {
                                    return Err(Error::Parse {
                                        line,
                                        msg: format!("unbalanced braces: group `{name}` never closed"),
                                    })
                                }
                                _ => match self.statement()? {
                                    Statement::Attr(a) => attrs.push(a),
                                    Statement::Group(g) => groups.push(g),
                                },
                            }
                        }
                        Ok(Statement::Group(Group { name, args, line, attrs, groups }))
                    }
                    Some(Tok::Punct(b';')) => {
                        self.bump();
                        Ok(Statement::Attr(Attr { name, line, values: args }))
                    }
                    other => Err(Error::Parse {
                        line,
                        msg: format!("expected `{{` or `;`, found {}", describe(other)),
                    }),
                }
            }
            other => Err(Error::Parse {
                line,
                msg: format!("expected `:` or `(` after `{name}`, found {}", describe(other)),
            }),
        }
    }
}

enum Statement {
    Attr(Attr),
    Group(Group),
}

fn describe(tok: Option<&Tok>) -> String {
    match tok {
        None => "end of file".to_string(),
        Some(Tok::Atom(a)) => format!("`{a}`"),
        Some(Tok::Str(_)) => "string".to_string(),
        Some(Tok::Punct(p)) => format!("`{}`", *p as char),
    }
}

// ---------------------------------------------------------------------------
// extraction

/// Multiplier that converts a declared time unit to ns.
fn time_factor(unit: &str) -> Result<f64> {
    let u = unit.trim().trim_matches('"');
    let split = u.find(|c: char| c.is_ascii_alphabetic()).unwrap_or(u.len());
    let num: f64 = if split == 0 { 1.0 } else { u[..split].parse().map_err(|_| Error::Unit(u.into()))? };
    let factor = match u[split..].to_ascii_lowercase().as_str() {
        "s" => 1e9,
        "ms" => 1e6,
        "us" => 1e3,
        "ns" => 1.0,
        "ps" => 1e-3,
        "fs" => 1e-6,
        _ => return Err(Error::Unit(u.into())),
    };
    Ok(num * factor)
}

/// Multiplier that converts a declared capacitance unit to fF.
fn cap_factor(num: &str, unit: &str) -> Result<f64> {
    let n: f64 = num.trim().parse().map_err(|_| Error::Unit(format!("{num}{unit}")))?;
    let factor = match unit.trim().to_ascii_lowercase().as_str() {
        "f" => 1e15,
        "uf" => 1e9,
        "nf" => 1e6,
        "pf" => 1e3,
        "ff" => 1.0,
        _ => return Err(Error::Unit(unit.into())),
    };
    Ok(n * factor)
}

fn parse_float_list(raw: &[String], line: usize) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for chunk in raw {
        for piece in chunk.split([',', ' ', '\n', '\t']) {
            let piece = piece.trim();
            if piece.is_empty() {
                continue;
            }
            out.push(piece.parse::<f64>().map_err(|_| Error::Parse {
                line,
                msg: format!("malformed numeric list entry `{piece}`"),
            })?);
        }
    }
    Ok(out)
}

struct TableTemplate {
    index_1: Option<Vec<f64>>,
    index_2: Option<Vec<f64>>,
}

fn extract_table(
    group: &Group,
    templates: &IndexMap<String, TableTemplate>,
    time: f64,
    cap: f64,
    value_factor: f64,
) -> Result<Lut2D> {
    let template = group.args.first().and_then(|n| templates.get(n));
    let axis = |name: &str, fallback: Option<&Vec<f64>>| -> Result<Vec<f64>> {
        if let Some(attr) = group.attr(name) {
            parse_float_list(&attr.values, attr.line)
        } else if let Some(t) = fallback {
            Ok(t.clone())
        } else {
            Err(Error::Parse {
                line: group.line,
                msg: format!("table `{}` has no {name} and no template", group.name),
            })
        }
    };
    let slew_axis: Vec<f64> = axis("index_1", template.and_then(|t| t.index_1.as_ref()))?
        .iter()
        .map(|v| v * time)
        .collect();
    let load_axis: Vec<f64> = axis("index_2", template.and_then(|t| t.index_2.as_ref()))?
        .iter()
        .map(|v| v * cap)
        .collect();
    let values_attr = group.attr("values").ok_or(Error::Parse {
        line: group.line,
        msg: format!("table `{}` has no values", group.name),
    })?;
    let mut rows = Vec::new();
    for raw_row in &values_attr.values {
        let row = parse_float_list(std::slice::from_ref(raw_row), values_attr.line)?;
        rows.push(row.iter().map(|v| v * value_factor).collect::<Vec<f64>>());
    }
    // a single flat list is accepted when it matches the grid exactly
    if rows.len() == 1 && rows[0].len() == slew_axis.len() * load_axis.len() && slew_axis.len() > 1 {
        let flat = rows.remove(0);
        rows = flat.chunks(load_axis.len()).map(|c| c.to_vec()).collect();
    }
    Lut2D::new(slew_axis, load_axis, rows).map_err(|e| Error::Parse {
        line: values_attr.line,
        msg: format!("bad table `{}`: {e}", group.name),
    })
}

pub fn parse_liberty(text: &str) -> Result<(TimingLibrary, Vec<ParseWarning>)> {
    let toks = tokenize(text)?;
    let mut parser = Parser { toks, pos: 0 };
    let root = match parser.statement()? {
        Statement::Group(g) if g.name == "library" => g,
        Statement::Group(g) => {
            return Err(Error::Parse {
                line: g.line,
                msg: format!("expected `library`, found `{}`", g.name),
            })
        }
        Statement::Attr(a) => {
            return Err(Error::Parse {
                line: a.line,
                msg: format!("expected `library` group, found attribute `{}`", a.name),
            })
        }
    };
    if parser.peek().is_some() {
        return Err(Error::Parse {
            line: parser.line(),
            msg: "unbalanced braces: trailing input after library group".into(),
        });
    }

    let mut warnings = Vec::new();
    let time = time_factor(root.simple("time_unit").unwrap_or("1ns"))?;
    let cap = match root.attr("capacitive_load_unit") {
        Some(a) if a.values.len() == 2 => cap_factor(&a.values[0], &a.values[1])?,
        Some(a) => {
            return Err(Error::Parse {
                line: a.line,
                msg: "capacitive_load_unit expects (value, unit)".into(),
            })
        }
        None => 1.0,
    };

    let mut templates = IndexMap::new();
    for g in root.groups.iter().filter(|g| g.name == "lu_table_template") {
        let name = g.args.first().cloned().unwrap_or_default();
        let idx = |n: &str| -> Result<Option<Vec<f64>>> {
            g.attr(n).map(|a| parse_float_list(&a.values, a.line)).transpose()
        };
        templates.insert(name, TableTemplate { index_1: idx("index_1")?, index_2: idx("index_2")? });
    }

    let mut cells = IndexMap::new();
    'cells: for cg in root.groups.iter().filter(|g| g.name == "cell") {
        let name = match cg.args.first() {
            Some(n) => n.clone(),
            None => {
                warnings.push(ParseWarning { line: cg.line, message: "cell without a name dropped".into() });
                continue;
            }
        };
        let area: f64 = match cg.simple("area").and_then(|a| a.parse().ok()) {
            Some(a) if a > 0.0 => a,
            _ => {
                warnings.push(ParseWarning {
                    line: cg.line,
                    message: format!("cell `{name}` dropped: missing or non-positive area"),
                });
                continue;
            }
        };

        let mut input_pins = Vec::new();
        let mut output_pins = Vec::new();
        let mut functions = IndexMap::new();
        let mut timing_groups: Vec<(String, &Group)> = Vec::new();
        for pg in cg.groups.iter().filter(|g| g.name == "pin") {
            let pin = match pg.args.first() {
                Some(p) => p.clone(),
                None => {
                    warnings.push(ParseWarning {
                        line: pg.line,
                        message: format!("cell `{name}` dropped: unnamed pin"),
                    });
                    continue 'cells;
                }
            };
            match pg.simple("direction") {
                Some("input") => {
                    let c: Option<f64> = pg.simple("capacitance").and_then(|v| v.parse().ok());
                    match c {
                        Some(c) if c > 0.0 => input_pins.push((pin, c)),
                        _ => {
                            warnings.push(ParseWarning {
                                line: pg.line,
                                message: format!(
                                    "cell `{name}` dropped: input pin `{pin}` has no positive capacitance"
                                ),
                            });
                            continue 'cells;
                        }
                    }
                }
                Some("output") => {
                    match pg.simple("function").map(parse_expr) {
                        Some(Ok(f)) => {
                            functions.insert(pin.clone(), f);
                        }
                        Some(Err(e)) => {
                            warnings.push(ParseWarning {
                                line: pg.line,
                                message: format!("cell `{name}` dropped: bad function on `{pin}`: {e}"),
                            });
                            continue 'cells;
                        }
                        None => {
                            warnings.push(ParseWarning {
                                line: pg.line,
                                message: format!("cell `{name}` dropped: output `{pin}` has no function"),
                            });
                            continue 'cells;
                        }
                    }
                    for tg in pg.groups.iter().filter(|g| g.name == "timing") {
                        timing_groups.push((pin.clone(), tg));
                    }
                    output_pins.push(pin);
                }
                _ => {
                    // internal or undeclared direction: skip the pin
                }
            }
        }
        if input_pins.is_empty() || output_pins.is_empty() {
            warnings.push(ParseWarning {
                line: cg.line,
                message: format!("cell `{name}` dropped: no usable input/output pins"),
            });
            continue;
        }

        let cap_scale = cap;
        let _ = cap_scale;
        let mut arcs = Vec::new();
        for (output, tg) in timing_groups {
            let related = match tg.simple("related_pin") {
                Some(r) => r.trim_matches('"').to_string(),
                None => {
                    warnings.push(ParseWarning {
                        line: tg.line,
                        message: format!("cell `{name}`: timing group without related_pin skipped"),
                    });
                    continue;
                }
            };
            if !input_pins.iter().any(|(n, _)| *n == related) {
                warnings.push(ParseWarning {
                    line: tg.line,
                    message: format!(
                        "cell `{name}`: arc from undeclared pin `{related}` skipped"
                    ),
                });
                continue;
            }
            let when = tg.simple("when").map(|s| s.to_string());
            for (edge, dname, tname) in [
                (Edge::Rise, "cell_rise", "rise_transition"),
                (Edge::Fall, "cell_fall", "fall_transition"),
            ] {
                let (Some(dg), Some(sg)) = (tg.find(dname), tg.find(tname)) else {
                    continue;
                };
                let delay = extract_table(dg, &templates, time, cap, time)?;
                let slew = extract_table(sg, &templates, time, cap, time)?;
                arcs.push(TimingArc {
                    input: related.clone(),
                    output: output.clone(),
                    edge,
                    when: when.clone(),
                    delay,
                    slew,
                });
            }
        }

        cells.insert(
            name.clone(),
            LibraryCell { name, area, input_pins, output_pins, arcs, functions },
        );
    }

    let name = root.args.first().cloned().unwrap_or_else(|| "library".to_string());
    Ok((TimingLibrary { name, cells }, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin::NANGATE45_SUBSET;

    fn parsed() -> (TimingLibrary, Vec<ParseWarning>) {
        parse_liberty(NANGATE45_SUBSET).unwrap()
    }

    #[test]
    fn shipped_library_parses_clean() {
        let (lib, warnings) = parsed();
        assert!(warnings.is_empty(), "{warnings:?}");
        for cell in ["FA_X1", "HA_X1", "AND2_X1", "XOR2_X1", "OR2_X1", "INV_X1", "NAND2_X1"] {
            assert!(lib.cells.contains_key(cell), "missing {cell}");
        }
    }

    /// Independent grep-style extraction of the literal `area` and
    /// `capacitance` fields, compared against the parsed library.
    #[test]
    fn areas_and_caps_match_literal_fields() {
        let (lib, _) = parsed();
        let mut cell = String::new();
        let mut pin = String::new();
        let mut checked = 0;
        for line in NANGATE45_SUBSET.lines() {
            let t = line.trim();
            if let Some(rest) = t.strip_prefix("cell (") {
                cell = rest.trim_end_matches(") {").to_string();
            } else if let Some(rest) = t.strip_prefix("pin (") {
                pin = rest.trim_end_matches(") {").to_string();
            } else if let Some(rest) = t.strip_prefix("area : ") {
                let area: f64 = rest.trim_end_matches(';').parse().unwrap();
                assert_eq!(lib.cells[&cell].area, area, "area of {cell}");
                checked += 1;
            } else if let Some(rest) = t.strip_prefix("capacitance : ") {
                let cap: f64 = rest.trim_end_matches(';').parse().unwrap();
                assert_eq!(lib.cells[&cell].input_cap(&pin), Some(cap), "cap of {cell}/{pin}");
                checked += 1;
            }
        }
        assert!(checked > 15, "oracle saw only {checked} fields");
    }

    #[test]
    fn table_shapes_and_template_fallback() {
        let (lib, _) = parsed();
        // INV_X1 relies on the lu_table_template axes
        let inv = &lib.cells["INV_X1"];
        assert_eq!(inv.arcs.len(), 2); // rise + fall
        for arc in &inv.arcs {
            assert_eq!(arc.delay.slew_axis.len(), 7);
            assert_eq!(arc.delay.load_axis.len(), 7);
            assert_eq!(arc.delay.values.len(), 7);
        }
        // FA_X1 has `when` variants on A->CO plus plain arcs: 3 inputs x 2
        // outputs, A->CO doubled, 2 edges each
        let fa = &lib.cells["FA_X1"];
        assert_eq!(fa.arcs.len(), (6 + 1) * 2);
        assert!(fa.arcs.iter().any(|a| a.when.is_some()));
    }

    #[test]
    fn drops_cell_without_pins() {
        let text = r#"
library (t) {
  time_unit : "1ns";
  capacitive_load_unit (1,ff);
  cell (EMPTY) { area : 1.0; }
  cell (OK) {
    area : 2.0;
    pin (A) { direction : input; capacitance : 1.0; }
    pin (Z) { direction : output; function : "A"; }
  }
}
"#;
        let (lib, warnings) = parse_liberty(text).unwrap();
        assert!(!lib.cells.contains_key("EMPTY"));
        assert!(lib.cells.contains_key("OK"));
        assert_eq!(warnings.len(), 1);
        assert_eq!(warnings[0].line, 5);
    }

    #[test]
    fn unit_normalization_ps_pf() {
        let text = r#"
library (t) {
  time_unit : "1ps";
  capacitive_load_unit (1,pf);
  cell (C) {
    area : 1.0;
    pin (A) { direction : input; capacitance : 0.002; }
    pin (Z) {
      direction : output;
      function : "A";
      timing () {
        related_pin : "A";
        cell_rise (x) {
          index_1 ("100, 200");
          index_2 ("0.001, 0.002");
          values ("10, 20", "30, 40");
        }
        rise_transition (x) {
          index_1 ("100, 200");
          index_2 ("0.001, 0.002");
          values ("1, 2", "3, 4");
        }
      }
    }
  }
}
"#;
        let (lib, _) = parse_liberty(text).unwrap();
        let c = &lib.cells["C"];
        assert!((c.input_cap("A").unwrap() - 2.0).abs() < 1e-12); // 0.002 pF = 2 fF
        let arc = &c.arcs[0];
        assert_eq!(arc.delay.slew_axis, vec![0.1, 0.2]); // ps -> ns
        assert_eq!(arc.delay.load_axis, vec![1.0, 2.0]); // pF -> fF
        assert_eq!(arc.delay.values[0], vec![0.01, 0.02]);
        assert_eq!(arc.slew.values[1], vec![0.003, 0.004]);
    }

    #[test]
    fn unknown_unit_is_an_error() {
        let text = "library (t) { time_unit : \"1parsec\"; }";
        assert!(matches!(parse_liberty(text), Err(Error::Unit(_))));
    }

    #[test]
    fn unbalanced_braces_error_carries_line() {
        let text = "library (t) {\n  cell (C) {\n    area : 1.0;\n";
        match parse_liberty(text) {
            Err(Error::Parse { line, msg }) => {
                assert!(msg.contains("never closed"), "{msg}");
                assert!(line >= 1);
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_numeric_list_is_an_error() {
        let text = r#"
library (t) {
  cell (C) {
    area : 1.0;
    pin (A) { direction : input; capacitance : 1.0; }
    pin (Z) {
      direction : output;
      function : "A";
      timing () {
        related_pin : "A";
        cell_rise (x) {
          index_1 ("0.1, oops");
          index_2 ("1, 2");
          values ("1, 2", "3, 4");
        }
        rise_transition (x) {
          index_1 ("0.1, 0.2");
          index_2 ("1, 2");
          values ("1, 2", "3, 4");
        }
      }
    }
  }
}
"#;
        match parse_liberty(text) {
            Err(Error::Parse { line, msg }) => {
                assert!(msg.contains("oops"), "{msg}");
                assert_eq!(line, 12);
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn roundtrip_is_identity() {
        let (lib, _) = parsed();
        let text = lib.to_liberty();
        let (lib2, warnings) = parse_liberty(&text).unwrap();
        assert!(warnings.is_empty(), "{warnings:?}");
        assert_eq!(lib, lib2);
        let (lib3, _) = parse_liberty(&lib2.to_liberty()).unwrap();
        assert_eq!(lib2, lib3);
    }

    #[test]
    fn worst_case_merges_edges_and_conditions() {
        let (lib, _) = parsed();
        let fa = &lib.cells["FA_X1"];
        let wc = worst_case_arcs(fa);
        assert_eq!(wc.len(), 6); // 3 inputs x 2 outputs
        // dominance over every contributing arc at every union node
        for ((inp, out), (d, _)) in &wc {
            for arc in fa.arcs.iter().filter(|a| &a.input == inp && &a.output == out) {
                for (i, &s) in d.slew_axis.iter().enumerate() {
                    for (j, &l) in d.load_axis.iter().enumerate() {
                        assert!(d.values[i][j] >= arc.delay.eval(s, l) - 1e-12);
                    }
                }
            }
        }
        // single-pair identity: INV_X1 has one (rise, fall) pair merged
        let inv = &lib.cells["INV_X1"];
        let wc = worst_case_arcs(inv);
        let (d, _) = &wc[&("A".to_string(), "ZN".to_string())];
        for (i, &s) in d.slew_axis.iter().enumerate() {
            for (j, &l) in d.load_axis.iter().enumerate() {
                let expect = inv.arcs[0].delay.eval(s, l).max(inv.arcs[1].delay.eval(s, l));
                assert!((d.values[i][j] - expect).abs() < 1e-12);
            }
        }
    }
}
