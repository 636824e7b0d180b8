//! Fixed-format MPS export and solution CSV output.
//!
//! Field positions follow the classic layout (columns 2, 5, 15, 25, 40, 50).
//! Names longer than eight characters are written in full, which most
//! readers accept in their free-format mode.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{MilpModel, Sense, VarKind};
use crate::error::{Error, Result};

const OBJ_ROW: &str = "OBJ";

/// Renders `v` with 12 significant digits, shortest form.
pub fn format_number(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let rounded: f64 = format!("{v:.11e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

fn marker_line(out: &mut String, idx: usize, kind: &str) {
    writeln!(
        out,
        "    {:<8}  'MARKER'                 '{kind}'",
        format!("MARKER{idx}")
    )
    .unwrap();
}

fn field_line(out: &mut String, f1: &str, f2: &str, f3: &str, f4: &str) {
    // " F1 F2......F3......F4"
    let mut line = format!(" {f1:<2} {f2:<8}  {f3:<8}  {f4:>12}");
    while line.ends_with(' ') {
        line.pop();
    }
    out.push_str(&line);
    out.push('\n');
}

fn pair_line(out: &mut String, col: &str, row: &str, val: f64) {
    field_line(out, "", col, row, &format_number(val));
}

/// Serializes `model` as fixed-format MPS text.
pub fn mps_string(model: &MilpModel) -> String {
    let mut out = String::new();
    let name = if model.name.is_empty() { "MODEL" } else { &model.name };
    writeln!(out, "NAME          {name}").unwrap();
    out.push_str("ROWS\n");
    field_line(&mut out, "N", OBJ_ROW, "", "");
    for r in &model.rows {
        let t = match r.sense {
            Sense::Le => "L",
            Sense::Ge => "G",
            Sense::Eq => "E",
        };
        field_line(&mut out, t, &r.name, "", "");
    }

    // column-wise entries in row order
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); model.num_vars()];
    for (i, r) in model.rows.iter().enumerate() {
        for &(v, a) in &r.coeffs {
            cols[v.0].push((i, a));
        }
    }

    out.push_str("COLUMNS\n");
    let mut in_int = false;
    let mut marker = 0usize;
    for (j, v) in model.vars.iter().enumerate() {
        let integral = v.kind.is_integral();
        if integral && !in_int {
            marker_line(&mut out, marker, "INTORG");
            in_int = true;
        } else if !integral && in_int {
            marker_line(&mut out, marker, "INTEND");
            in_int = false;
            marker += 1;
        }
        if v.cost != 0.0 {
            pair_line(&mut out, &v.name, OBJ_ROW, v.cost);
        }
        for &(i, a) in &cols[j] {
            pair_line(&mut out, &v.name, &model.rows[i].name, a);
        }
        if v.cost == 0.0 && cols[j].is_empty() {
            // keep the column declared
            pair_line(&mut out, &v.name, OBJ_ROW, 0.0);
        }
    }
    if in_int {
        marker_line(&mut out, marker, "INTEND");
    }

    out.push_str("RHS\n");
    if model.objective_constant != 0.0 {
        pair_line(&mut out, "RHS", OBJ_ROW, -model.objective_constant);
    }
    for r in &model.rows {
        if r.rhs != 0.0 {
            pair_line(&mut out, "RHS", &r.name, r.rhs);
        }
    }

    out.push_str("BOUNDS\n");
    for v in &model.vars {
        let (lo, up) = (v.lower, v.upper);
        let b = |out: &mut String, t: &str, val: Option<f64>| {
            let num = val.map(format_number).unwrap_or_default();
            field_line(out, t, "BND", &v.name, &num);
        };
        if v.kind == VarKind::Binary && lo == 0.0 && up == 1.0 {
            b(&mut out, "BV", None);
            continue;
        }
        if lo == up {
            b(&mut out, "FX", Some(lo));
            continue;
        }
        match (lo.is_finite(), up.is_finite()) {
            (false, false) => b(&mut out, "FR", None),
            (false, true) => {
                b(&mut out, "MI", None);
                b(&mut out, "UP", Some(up));
            }
            (true, up_finite) => {
                if lo != 0.0 || v.kind.is_integral() {
                    b(&mut out, "LO", Some(lo));
                }
                if up_finite {
                    b(&mut out, "UP", Some(up));
                } else if v.kind.is_integral() {
                    b(&mut out, "PL", None);
                }
            }
        }
    }
    out.push_str("ENDATA\n");
    out
}

pub fn write_mps(model: &MilpModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, mps_string(model)).map_err(|e| Error::io(path, e))
}

/// Writes `# status=<status>` followed by `variable,value` rows.
pub fn write_solution_csv(
    model: &MilpModel,
    status: &str,
    objective: f64,
    x: &[f64],
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let mut out = format!(
        "# status={status} objective={}\nvariable,value\n",
        format_number(objective)
    );
    for (v, xi) in model.vars.iter().zip(x) {
        writeln!(out, "{},{}", v.name, format_number(*xi)).unwrap();
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::MilpModel;

    #[test]
    fn number_formatting() {
        assert_eq!(format_number(1.0), "1");
        assert_eq!(format_number(0.1), "0.1");
        assert_eq!(format_number(-2.5), "-2.5");
        assert_eq!(format_number(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_number(123456789012345.0), "123456789012000");
    }

    #[test]
    fn single_row_single_column() {
        let mut m = MilpModel::new("tiny");
        let x = m.add_continuous("x", 0.0, f64::INFINITY, 1.0);
        m.add_row("c1", [(x, 2.0)], Sense::Ge, 4.0);
        let text = mps_string(&m);
        let section = |name: &str| -> Vec<String> {
            text.lines()
                .skip_while(|l| *l != name)
                .skip(1)
                .take_while(|l| l.starts_with(' '))
                .map(str::to_owned)
                .collect()
        };
        let rows = section("ROWS");
        assert_eq!(rows.len(), 2);
        assert!(rows[0].trim_start().starts_with("N"));
        assert_eq!(rows.iter().filter(|l| l.contains("c1")).count(), 1);
        let cols = section("COLUMNS");
        assert_eq!(cols.len(), 2);
        assert!(cols.iter().any(|l| l.contains("OBJ")));
        assert!(cols.iter().any(|l| l.contains("c1") && l.ends_with('2')));
        assert!(text.starts_with("NAME          tiny\n"));
        assert!(text.ends_with("ENDATA\n"));
    }

    #[test]
    fn markers_bracket_integer_columns() {
        let mut m = MilpModel::new("mk");
        let a = m.add_continuous("a", 0.0, 1.0, 1.0);
        let b = m.add_binary("b", 1.0);
        let c = m.add_binary("c", 1.0);
        let d = m.add_continuous("d", 0.0, 1.0, 1.0);
        m.add_row("r", [(a, 1.0), (b, 1.0), (c, 1.0), (d, 1.0)], Sense::Le, 2.0);
        let text = mps_string(&m);
        let cols: Vec<&str> = text
            .lines()
            .skip_while(|l| *l != "COLUMNS")
            .skip(1)
            .take_while(|l| *l != "RHS")
            .collect();
        let start = cols.iter().position(|l| l.contains("INTORG")).unwrap();
        let end = cols.iter().position(|l| l.contains("INTEND")).unwrap();
        let inside: Vec<&str> = cols[start + 1..end]
            .iter()
            .map(|l| l.split_whitespace().next().unwrap())
            .collect();
        assert!(inside.iter().all(|n| *n == "b" || *n == "c"));
        assert!(inside.contains(&"b") && inside.contains(&"c"));
        assert_eq!(cols.iter().filter(|l| l.contains("INTORG")).count(), 1);
        assert!(text.contains(" BV BND       b"));
        assert_eq!(mps_string(&m), text);
    }
}
