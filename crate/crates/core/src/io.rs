//! Text formats: headerless CSV matrices, sample batches with a
//! `# n=<n> p=<p>` header line, and the number formatting shared by all
//! CSV outputs.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::SymmetricMatrix;
use crate::sampling::PotentialSamples;

/// Formats `v` with 9 significant digits, `%g` style: fixed notation for
/// decimal exponents in `[-5, 9)`, scientific otherwise, trailing zeros
/// trimmed.
pub fn format_sig9(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return if v.is_nan() {
            "nan".to_string()
        } else if v > 0.0 {
            "inf".to_string()
        } else {
            "-inf".to_string()
        };
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exponent) = sci.split_once('e').expect("scientific format");
    let exponent: i32 = exponent.parse().expect("integer exponent");
    if (-5..9).contains(&exponent) {
        let decimals = (8 - exponent).max(0) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        format!("{}e{exponent}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn parse_number(token: &str, line: usize) -> Result<f64> {
    token.trim().parse::<f64>().map_err(|_| Error::Parse {
        line,
        message: format!("not a number: `{}`", token.trim()),
    })
}

pub fn write_matrix_csv<W: Write>(mut w: W, m: &DMatrix<f64>) -> Result<()> {
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|v| format_sig9(*v)).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

/// Reads a headerless, comma-separated matrix. Blank lines and lines
/// starting with `#` are skipped.
pub fn read_matrix_csv<R: BufRead>(r: R) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let values = trimmed
            .split(',')
            .map(|t| parse_number(t, idx + 1))
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != values.len() {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: format!("expected {} columns, found {}", first.len(), values.len()),
                });
            }
        }
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(Error::InvalidInput("matrix file is empty".into()));
    }
    let (n, m) = (rows.len(), rows[0].len());
    Ok(DMatrix::from_row_iterator(n, m, rows.into_iter().flatten()))
}

pub fn read_symmetric_csv<R: BufRead>(r: R) -> Result<SymmetricMatrix> {
    SymmetricMatrix::new(read_matrix_csv(r)?)
}

pub fn write_samples_csv<W: Write>(mut w: W, samples: &PotentialSamples) -> Result<()> {
    writeln!(w, "# n={} p={}", samples.n(), samples.p())?;
    write_matrix_csv(w, samples.data())
}

/// Reads a sample batch; the `# n=<n> p=<p>` header, when present, must
/// agree with the data.
pub fn read_samples_csv<R: BufRead>(r: R) -> Result<PotentialSamples> {
    let mut lines = r.lines();
    let mut header: Option<(usize, usize)> = None;
    let mut body = String::new();
    if let Some(first) = lines.next() {
        let first = first?;
        if let Some(rest) = first.trim().strip_prefix('#') {
            header = Some(parse_samples_header(rest)?);
        } else {
            body.push_str(&first);
            body.push('\n');
        }
    }
    for line in lines {
        body.push_str(&line?);
        body.push('\n');
    }
    let data = read_matrix_csv(body.as_bytes()).map_err(|e| match e {
        // line numbers inside the body are offset by the header
        Error::Parse { line, message } if header.is_some() => Error::Parse {
            line: line + 1,
            message,
        },
        other => other,
    })?;
    if let Some((n, p)) = header {
        if data.shape() != (n, p) {
            return Err(Error::InvalidInput(format!(
                "sample header says n={n} p={p} but data is {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
    }
    PotentialSamples::new(data)
}

fn parse_samples_header(rest: &str) -> Result<(usize, usize)> {
    let mut n = None;
    let mut p = None;
    for field in rest.split_whitespace() {
        let bad = || Error::Parse {
            line: 1,
            message: format!("malformed sample header field `{field}`"),
        };
        let (key, value) = field.split_once('=').ok_or_else(bad)?;
        let value: usize = value.parse().map_err(|_| bad())?;
        match key {
            "n" => n = Some(value),
            "p" => p = Some(value),
            _ => return Err(bad()),
        }
    }
    match (n, p) {
        (Some(n), Some(p)) => Ok((n, p)),
        _ => Err(Error::Parse {
            line: 1,
            message: "sample header must be `# n=<n> p=<p>`".into(),
        }),
    }
}
