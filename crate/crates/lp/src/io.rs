//! Plain-text exchange formats for [`SparseLp`].
//!
//! The triplet dump is a directory with three CSV files:
//!
//! * `matrix.csv` — `row,col,value` nonzeros,
//! * `rows.csv`   — `row,sense,rhs` with sense in `{<=,=,>=}`,
//! * `cols.csv`   — `col,cost,lower,upper,integer` where the bounds may be
//!   `-inf`/`inf` and `integer` is `0`/`1`.
//!
//! Files are UTF-8 with LF line endings; numbers round-trip exactly through
//! the shortest-representation float formatting. MPS export is write-only
//! and exists for cross-checks with third-party solvers.

use crate::problem::{LpBuilder, RowSense, SparseLp};
use crate::LpError;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

/// Write the triplet dump of `lp` into `dir`, creating it if necessary.
pub fn write_triplet_dir(lp: &SparseLp, dir: &Path) -> Result<(), LpError> {
    fs::create_dir_all(dir)?;

    let mut matrix = String::from("row,col,value\n");
    for j in 0..lp.num_cols {
        for (i, v) in lp.col_iter(j) {
            writeln!(matrix, "{i},{j},{v}").unwrap();
        }
    }
    fs::write(dir.join("matrix.csv"), matrix)?;

    let mut rows = String::from("row,sense,rhs\n");
    for i in 0..lp.num_rows {
        writeln!(rows, "{i},{},{}", lp.senses[i].as_str(), lp.rhs[i]).unwrap();
    }
    fs::write(dir.join("rows.csv"), rows)?;

    let mut cols = String::from("col,cost,lower,upper,integer\n");
    for j in 0..lp.num_cols {
        writeln!(
            cols,
            "{j},{},{},{},{}",
            lp.objective[j],
            fmt_bound(lp.lower[j]),
            fmt_bound(lp.upper[j]),
            u8::from(lp.integral[j]),
        )
        .unwrap();
    }
    fs::write(dir.join("cols.csv"), cols)?;
    Ok(())
}

fn fmt_bound(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".to_string()
    } else if v == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{v}")
    }
}

fn parse_bound(s: &str, file: &str, line: usize) -> Result<f64, LpError> {
    match s {
        "inf" | "+inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => parse_num(s, file, line),
    }
}

fn parse_num(s: &str, file: &str, line: usize) -> Result<f64, LpError> {
    let v: f64 = s.trim().parse().map_err(|_| LpError::Parse {
        file: file.to_string(),
        line,
        reason: format!("expected a number, found {s:?}"),
    })?;
    if v.is_nan() {
        return Err(LpError::Parse {
            file: file.to_string(),
            line,
            reason: "NaN is not a valid coefficient".into(),
        });
    }
    Ok(v)
}

fn parse_index(s: &str, file: &str, line: usize) -> Result<usize, LpError> {
    s.trim().parse().map_err(|_| LpError::Parse {
        file: file.to_string(),
        line,
        reason: format!("expected an index, found {s:?}"),
    })
}

fn split_fields<'a>(
    text: &'a str,
    expected: usize,
    header: &str,
    file: &str,
) -> Result<Vec<(usize, Vec<&'a str>)>, LpError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, first)) if first.trim() == header => {}
        _ => {
            return Err(LpError::Parse {
                file: file.to_string(),
                line: 1,
                reason: format!("missing header {header:?}"),
            })
        }
    }
    let mut out = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != expected {
            return Err(LpError::Parse {
                file: file.to_string(),
                line: idx + 1,
                reason: format!("expected {expected} fields, found {}", fields.len()),
            });
        }
        out.push((idx + 1, fields));
    }
    Ok(out)
}

/// Read a triplet dump back into a [`SparseLp`].
pub fn read_triplet_dir(dir: &Path) -> Result<SparseLp, LpError> {
    let rows_text = fs::read_to_string(dir.join("rows.csv"))?;
    let cols_text = fs::read_to_string(dir.join("cols.csv"))?;
    let matrix_text = fs::read_to_string(dir.join("matrix.csv"))?;

    let mut builder = LpBuilder::new();
    let mut integral = Vec::new();

    let col_recs = split_fields(&cols_text, 5, "col,cost,lower,upper,integer", "cols.csv")?;
    for (line, f) in &col_recs {
        let j = parse_index(f[0], "cols.csv", *line)?;
        if j != builder.num_cols() {
            return Err(LpError::Parse {
                file: "cols.csv".into(),
                line: *line,
                reason: format!("column indices must be dense and ordered, found {j}"),
            });
        }
        let cost = parse_num(f[1], "cols.csv", *line)?;
        let lo = parse_bound(f[2], "cols.csv", *line)?;
        let up = parse_bound(f[3], "cols.csv", *line)?;
        builder.add_col(cost, lo, up);
        integral.push(f[4].trim() == "1");
    }

    let row_recs = split_fields(&rows_text, 3, "row,sense,rhs", "rows.csv")?;
    let mut senses = Vec::new();
    let mut rhs = Vec::new();
    for (line, f) in &row_recs {
        let i = parse_index(f[0], "rows.csv", *line)?;
        if i != senses.len() {
            return Err(LpError::Parse {
                file: "rows.csv".into(),
                line: *line,
                reason: format!("row indices must be dense and ordered, found {i}"),
            });
        }
        let sense = RowSense::parse(f[1].trim()).ok_or_else(|| LpError::Parse {
            file: "rows.csv".into(),
            line: *line,
            reason: format!("unknown sense {:?}", f[1]),
        })?;
        senses.push(sense);
        rhs.push(parse_num(f[2], "rows.csv", *line)?);
    }

    let mut entries: Vec<Vec<(usize, f64)>> = vec![Vec::new(); senses.len()];
    let mat_recs = split_fields(&matrix_text, 3, "row,col,value", "matrix.csv")?;
    for (line, f) in &mat_recs {
        let i = parse_index(f[0], "matrix.csv", *line)?;
        let j = parse_index(f[1], "matrix.csv", *line)?;
        let v = parse_num(f[2], "matrix.csv", *line)?;
        if i >= senses.len() || j >= builder.num_cols() {
            return Err(LpError::Parse {
                file: "matrix.csv".into(),
                line: *line,
                reason: format!("entry ({i},{j}) outside the declared shape"),
            });
        }
        if !v.is_finite() {
            return Err(LpError::Parse {
                file: "matrix.csv".into(),
                line: *line,
                reason: "matrix coefficients must be finite".into(),
            });
        }
        entries[i].push((j, v));
    }
    for (i, row) in entries.into_iter().enumerate() {
        builder.add_row(senses[i], rhs[i], &row);
    }
    let mut lp = builder.build();
    lp.integral = integral;
    lp.validate()?;
    Ok(lp)
}

/// Export in fixed MPS format for cross-validation with external solvers.
pub fn write_mps(lp: &SparseLp, name: &str, out: &mut String) {
    out.push_str(&format!("NAME          {name}\n"));
    out.push_str("ROWS\n");
    out.push_str(" N  COST\n");
    for i in 0..lp.num_rows {
        let tag = match lp.senses[i] {
            RowSense::Le => 'L',
            RowSense::Eq => 'E',
            RowSense::Ge => 'G',
        };
        out.push_str(&format!(" {tag}  R{i}\n"));
    }
    out.push_str("COLUMNS\n");
    let mut in_int_block = false;
    for j in 0..lp.num_cols {
        if lp.integral[j] != in_int_block {
            if lp.integral[j] {
                out.push_str("    MARKER    'MARKER'    'INTORG'\n");
            } else {
                out.push_str("    MARKER    'MARKER'    'INTEND'\n");
            }
            in_int_block = lp.integral[j];
        }
        if lp.objective[j] != 0.0 {
            out.push_str(&format!("    C{j}  COST  {}\n", lp.objective[j]));
        }
        for (i, v) in lp.col_iter(j) {
            out.push_str(&format!("    C{j}  R{i}  {v}\n"));
        }
    }
    if in_int_block {
        out.push_str("    MARKER    'MARKER'    'INTEND'\n");
    }
    out.push_str("RHS\n");
    for i in 0..lp.num_rows {
        if lp.rhs[i] != 0.0 {
            out.push_str(&format!("    RHS  R{i}  {}\n", lp.rhs[i]));
        }
    }
    out.push_str("BOUNDS\n");
    for j in 0..lp.num_cols {
        let (lo, up) = (lp.lower[j], lp.upper[j]);
        if lo == up {
            out.push_str(&format!(" FX BND  C{j}  {lo}\n"));
            continue;
        }
        match (lo.is_finite(), up.is_finite()) {
            (true, true) => {
                out.push_str(&format!(" LO BND  C{j}  {lo}\n"));
                out.push_str(&format!(" UP BND  C{j}  {up}\n"));
            }
            (true, false) => {
                if lo != 0.0 {
                    out.push_str(&format!(" LO BND  C{j}  {lo}\n"));
                }
            }
            (false, true) => {
                out.push_str(&format!(" MI BND  C{j}\n"));
                out.push_str(&format!(" UP BND  C{j}  {up}\n"));
            }
            (false, false) => {
                out.push_str(&format!(" FR BND  C{j}\n"));
            }
        }
    }
    out.push_str("ENDATA\n");
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplet_roundtrip_preserves_problem() {
        let mut b = LpBuilder::new();
        let x = b.add_col(1.5, 0.0, f64::INFINITY);
        let y = b.add_integer_col(-2.0, -1.0, 4.0);
        let z = b.add_col(0.0, f64::NEG_INFINITY, f64::INFINITY);
        b.add_row(RowSense::Le, 10.0, &[(x, 1.0), (y, 2.5)]);
        b.add_row(RowSense::Eq, 0.25, &[(y, -1.0), (z, 1e-9)]);
        b.add_row(RowSense::Ge, -3.0, &[(x, 0.125), (z, 7.0)]);
        let lp = b.build();

        let dir = std::env::temp_dir().join(format!("boreas_lp_io_{}", std::process::id()));
        write_triplet_dir(&lp, &dir).unwrap();
        let lp2 = read_triplet_dir(&dir).unwrap();
        std::fs::remove_dir_all(&dir).ok();

        assert_eq!(lp.num_rows, lp2.num_rows);
        assert_eq!(lp.num_cols, lp2.num_cols);
        assert_eq!(lp.objective, lp2.objective);
        assert_eq!(lp.rhs, lp2.rhs);
        assert_eq!(lp.lower, lp2.lower);
        assert_eq!(lp.upper, lp2.upper);
        assert_eq!(lp.integral, lp2.integral);
        assert_eq!(lp.col_ptr, lp2.col_ptr);
        assert_eq!(lp.row_ind, lp2.row_ind);
        assert_eq!(lp.values, lp2.values);
    }

    #[test]
    fn rejects_out_of_shape_entries() {
        let dir = std::env::temp_dir().join(format!("boreas_lp_bad_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join("cols.csv"), "col,cost,lower,upper,integer\n0,1,0,inf,0\n").unwrap();
        std::fs::write(dir.join("rows.csv"), "row,sense,rhs\n0,<=,1\n").unwrap();
        std::fs::write(dir.join("matrix.csv"), "row,col,value\n0,5,1.0\n").unwrap();
        let err = read_triplet_dir(&dir).unwrap_err();
        std::fs::remove_dir_all(&dir).ok();
        assert!(matches!(err, LpError::Parse { .. }));
    }

    #[test]
    fn mps_contains_all_sections() {
        let mut b = LpBuilder::new();
        let x = b.add_col(1.0, 0.0, 5.0);
        b.add_row(RowSense::Ge, 2.0, &[(x, 1.0)]);
        let lp = b.build();
        let mut s = String::new();
        write_mps(&lp, "toy", &mut s);
        for section in ["NAME", "ROWS", "COLUMNS", "RHS", "BOUNDS", "ENDATA"] {
            assert!(s.contains(section), "missing {section}");
        }
    }
}
