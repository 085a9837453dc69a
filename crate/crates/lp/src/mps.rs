//! Free-format MPS reader and writer.
//!
//! Supported sections: `NAME`, `OBJSENSE`, `ROWS`, `COLUMNS`, `RHS`,
//! `BOUNDS` (`UP`, `LO`, `FX`, `PL`) and `ENDATA`. The objective constant
//! travels as the negated right-hand side of the objective row.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::LpError;
use crate::problem::{LpProblem, RowKind, Sense};

const OBJ_ROW: &str = "OBJ";

fn token(name: &str) -> String {
    let cleaned: String = name
        .chars()
        .map(|c| if c.is_whitespace() { '_' } else { c })
        .collect();
    if cleaned.is_empty() {
        "_".to_string()
    } else {
        cleaned
    }
}

/// Renders `problem` as free-format MPS. Column and row names have
/// whitespace replaced by `_`.
pub fn write_mps(problem: &LpProblem) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "NAME {}", token(&problem.name));
    let _ = writeln!(out, "OBJSENSE");
    let _ = writeln!(
        out,
        "    {}",
        match problem.sense {
            Sense::Minimize => "MIN",
            Sense::Maximize => "MAX",
        }
    );
    let _ = writeln!(out, "ROWS");
    let _ = writeln!(out, " N  {OBJ_ROW}");
    for row in problem.rows() {
        let kind = match row.kind {
            RowKind::Le => "L",
            RowKind::Ge => "G",
            RowKind::Eq => "E",
        };
        let _ = writeln!(out, " {kind}  {}", token(&row.name));
    }
    let mut by_column: Vec<Vec<(usize, f64)>> = vec![Vec::new(); problem.num_columns()];
    for (i, row) in problem.rows().iter().enumerate() {
        for &(j, a) in &row.coeffs {
            by_column[j].push((i, a));
        }
    }
    let _ = writeln!(out, "COLUMNS");
    for (j, col) in problem.columns().iter().enumerate() {
        let name = token(&col.name);
        let _ = writeln!(out, "    {name}  {OBJ_ROW}  {}", col.obj);
        for &(i, a) in &by_column[j] {
            let _ = writeln!(out, "    {name}  {}  {a}", token(&problem.rows()[i].name));
        }
    }
    let _ = writeln!(out, "RHS");
    if problem.objective_constant() != 0.0 {
        let _ = writeln!(out, "    RHS  {OBJ_ROW}  {}", -problem.objective_constant());
    }
    for row in problem.rows() {
        if row.rhs != 0.0 {
            let _ = writeln!(out, "    RHS  {}  {}", token(&row.name), row.rhs);
        }
    }
    let _ = writeln!(out, "BOUNDS");
    for col in problem.columns() {
        let name = token(&col.name);
        if col.lower == col.upper {
            let _ = writeln!(out, " FX BND  {name}  {}", col.lower);
            continue;
        }
        if col.lower != 0.0 {
            let _ = writeln!(out, " LO BND  {name}  {}", col.lower);
        }
        if col.upper.is_finite() {
            let _ = writeln!(out, " UP BND  {name}  {}", col.upper);
        }
    }
    let _ = writeln!(out, "ENDATA");
    out
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    None,
    ObjSense,
    Rows,
    Columns,
    Rhs,
    Bounds,
    Done,
}

fn parse_err(line: usize, message: impl Into<String>) -> LpError {
    LpError::Parse {
        line,
        message: message.into(),
    }
}

fn number(line: usize, s: &str) -> Result<f64, LpError> {
    s.parse::<f64>()
        .map_err(|_| parse_err(line, format!("expected a number, found `{s}`")))
}

/// Parses free-format MPS. Names are whitespace-free tokens.
pub fn read_mps(text: &str) -> Result<LpProblem, LpError> {
    let mut section = Section::None;
    let mut name = "LP".to_string();
    let mut sense = Sense::Minimize;
    let mut obj_row: Option<String> = None;
    let mut rows: Vec<(String, RowKind)> = Vec::new();
    let mut row_index: HashMap<String, usize> = HashMap::new();
    let mut columns: Vec<String> = Vec::new();
    let mut col_index: HashMap<String, usize> = HashMap::new();
    let mut obj: Vec<f64> = Vec::new();
    let mut entries: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    let mut constant = 0.0;
    let mut lower: Vec<f64> = Vec::new();
    let mut upper: Vec<f64> = Vec::new();

    for (k, raw) in text.lines().enumerate() {
        let ln = k + 1;
        let line = raw.trim_end();
        if line.trim().is_empty() || line.starts_with('*') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let indented = line.starts_with(' ') || line.starts_with('\t');
        if !indented {
            match fields[0] {
                "NAME" => {
                    if let Some(n) = fields.get(1) {
                        name = n.to_string();
                    }
                    section = Section::None;
                }
                "OBJSENSE" => {
                    section = Section::ObjSense;
                    if let Some(s) = fields.get(1) {
                        sense = parse_sense(ln, s)?;
                        section = Section::None;
                    }
                }
                "ROWS" => section = Section::Rows,
                "COLUMNS" => section = Section::Columns,
                "RHS" => section = Section::Rhs,
                "BOUNDS" => section = Section::Bounds,
                "ENDATA" => {
                    section = Section::Done;
                    break;
                }
                other => return Err(parse_err(ln, format!("unsupported section `{other}`"))),
            }
            continue;
        }
        match section {
            Section::ObjSense => {
                sense = parse_sense(ln, fields[0])?;
                section = Section::None;
            }
            Section::Rows => {
                if fields.len() != 2 {
                    return Err(parse_err(ln, "a row line needs a type and a name"));
                }
                let kind = match fields[0] {
                    "N" => {
                        if obj_row.is_none() {
                            obj_row = Some(fields[1].to_string());
                        }
                        continue;
                    }
                    "L" => RowKind::Le,
                    "G" => RowKind::Ge,
                    "E" => RowKind::Eq,
                    t => return Err(parse_err(ln, format!("unknown row type `{t}`"))),
                };
                if row_index.insert(fields[1].to_string(), rows.len()).is_some() {
                    return Err(parse_err(ln, format!("duplicate row `{}`", fields[1])));
                }
                rows.push((fields[1].to_string(), kind));
                rhs.push(0.0);
            }
            Section::Columns => {
                if fields.len() < 3 || fields.len() % 2 == 0 {
                    return Err(parse_err(ln, "a column line needs a name and row/value pairs"));
                }
                if fields[1] == "'MARKER'" {
                    return Err(parse_err(ln, "integer markers are not supported"));
                }
                let j = match col_index.get(fields[0]) {
                    Some(&j) => j,
                    None => {
                        let j = columns.len();
                        col_index.insert(fields[0].to_string(), j);
                        columns.push(fields[0].to_string());
                        obj.push(0.0);
                        entries.push(Vec::new());
                        lower.push(0.0);
                        upper.push(f64::INFINITY);
                        j
                    }
                };
                for pair in fields[1..].chunks(2) {
                    let v = number(ln, pair[1])?;
                    if obj_row.as_deref() == Some(pair[0]) {
                        obj[j] += v;
                    } else {
                        let &i = row_index
                            .get(pair[0])
                            .ok_or_else(|| parse_err(ln, format!("unknown row `{}`", pair[0])))?;
                        entries[j].push((i, v));
                    }
                }
            }
            Section::Rhs => {
                let pairs = if fields.len() % 2 == 1 { &fields[1..] } else { &fields[..] };
                if pairs.is_empty() {
                    return Err(parse_err(ln, "empty RHS line"));
                }
                for pair in pairs.chunks(2) {
                    if pair.len() != 2 {
                        return Err(parse_err(ln, "RHS entries come in row/value pairs"));
                    }
                    let v = number(ln, pair[1])?;
                    if obj_row.as_deref() == Some(pair[0]) {
                        constant = -v;
                    } else {
                        let &i = row_index
                            .get(pair[0])
                            .ok_or_else(|| parse_err(ln, format!("unknown row `{}`", pair[0])))?;
                        rhs[i] = v;
                    }
                }
            }
            Section::Bounds => {
                if fields.len() < 3 {
                    return Err(parse_err(ln, "a bound line needs a type, a set name and a column"));
                }
                let &j = col_index
                    .get(fields[2])
                    .ok_or_else(|| parse_err(ln, format!("unknown column `{}`", fields[2])))?;
                let value = || {
                    fields
                        .get(3)
                        .ok_or_else(|| parse_err(ln, "missing bound value"))
                        .and_then(|s| number(ln, s))
                };
                match fields[0] {
                    "UP" => upper[j] = value()?,
                    "LO" => lower[j] = value()?,
                    "FX" => {
                        let v = value()?;
                        lower[j] = v;
                        upper[j] = v;
                    }
                    "PL" => upper[j] = f64::INFINITY,
                    t => return Err(parse_err(ln, format!("unsupported bound type `{t}`"))),
                }
            }
            Section::None | Section::Done => {
                return Err(parse_err(ln, "data line outside of a section"));
            }
        }
    }
    if section != Section::Done {
        return Err(parse_err(text.lines().count(), "missing ENDATA"));
    }

    let mut problem = LpProblem::new(sense).with_name(name);
    for j in 0..columns.len() {
        problem.add_column(columns[j].clone(), obj[j], lower[j], upper[j]);
    }
    let mut by_row: Vec<Vec<(usize, f64)>> = vec![Vec::new(); rows.len()];
    for (j, list) in entries.iter().enumerate() {
        for &(i, a) in list {
            by_row[i].push((j, a));
        }
    }
    for (i, (rname, kind)) in rows.into_iter().enumerate() {
        problem.add_row(rname, by_row[i].iter().copied(), kind, rhs[i]);
    }
    problem.set_objective_constant(constant);
    problem.validate()?;
    Ok(problem)
}

fn parse_sense(line: usize, s: &str) -> Result<Sense, LpError> {
    match s {
        "MIN" | "MINIMIZE" => Ok(Sense::Minimize),
        "MAX" | "MAXIMIZE" => Ok(Sense::Maximize),
        _ => Err(parse_err(line, format!("unknown objective sense `{s}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_keeps_everything() {
        let mut p = LpProblem::new(Sense::Maximize).with_name("tiny");
        let x = p.add_column("x", 1.5, 0.0, 2.0);
        let y = p.add_column("y", -0.1, -1.0, f64::INFINITY);
        let z = p.add_column("z", 0.0, 3.0, 3.0);
        p.add_row("r1", [(x, 1.0), (y, 2.0)], RowKind::Le, 4.0);
        p.add_row("r2", [(y, 1.0), (z, -1.0)], RowKind::Ge, -2.5);
        p.add_row("r3", [(x, 1.0)], RowKind::Eq, 0.0);
        p.add_row("empty", [], RowKind::Le, 1.0);
        p.set_objective_constant(7.25);
        let back = read_mps(&write_mps(&p)).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn reports_bad_input() {
        assert!(matches!(read_mps("NAME x\nROWS\n N OBJ\n"), Err(LpError::Parse { .. })));
        let bad = "NAME x\nROWS\n N OBJ\n L r\nCOLUMNS\n    x OBJ abc\nENDATA\n";
        assert!(matches!(read_mps(bad), Err(LpError::Parse { line: 6, .. })));
    }
}
