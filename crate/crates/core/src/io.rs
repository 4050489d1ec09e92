//! CSV import/export. Hand-rolled: the formats are plain numeric tables and
//! the error messages need row/column context. Floats are written with
//! Rust's shortest round-trip formatting, so a write/read cycle reproduces
//! the exact bits.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::market::MarketPath;

/// Renders a path as `t,S1,...,SN` rows.
pub fn path_to_csv(path: &MarketPath) -> String {
    let n = path.n_assets();
    let mut out = String::new();
    out.push('t');
    for i in 1..=n {
        let _ = write!(out, ",S{i}");
    }
    out.push('\n');
    for k in 0..path.len() {
        let _ = write!(out, "{}", path.grid.times()[k]);
        for i in 0..n {
            let _ = write!(out, ",{}", path.prices[i][k]);
        }
        out.push('\n');
    }
    out
}

/// Parses a `t,S1,...,SN` table. Prices must be strictly positive and times
/// strictly increasing from zero.
pub fn path_from_csv(text: &str) -> Result<MarketPath> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Csv("empty file".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.is_empty() || cols[0].trim() != "t" {
        return Err(Error::Csv(format!(
            "expected header starting with 't', got '{header}'"
        )));
    }
    let n = cols.len() - 1;
    if n < 2 {
        return Err(Error::Csv(format!("need at least 2 asset columns, got {n}")));
    }
    let mut times = Vec::new();
    let mut prices: Vec<Vec<f64>> = vec![Vec::new(); n];
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != n + 1 {
            return Err(Error::Csv(format!(
                "row {lineno}: expected {} fields, got {}",
                n + 1,
                fields.len()
            )));
        }
        let row = times.len();
        let t: f64 = fields[0]
            .trim()
            .parse()
            .map_err(|_| Error::Csv(format!("row {lineno}: bad time '{}'", fields[0])))?;
        if let Some(&prev) = times.last() {
            if !(t > prev) {
                return Err(Error::NonMonotoneTime { row, value: t });
            }
        } else if t != 0.0 {
            return Err(Error::Csv(format!("first time must be 0, got {t}")));
        }
        times.push(t);
        for i in 0..n {
            let s: f64 = fields[i + 1].trim().parse().map_err(|_| {
                Error::Csv(format!("row {lineno}: bad price '{}'", fields[i + 1]))
            })?;
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::NonPositivePrice {
                    row,
                    col: i,
                    value: s,
                });
            }
            prices[i].push(s);
        }
    }
    let grid = TimeGrid::new(times)?;
    MarketPath::new(grid, prices)
}

/// Loads a path from a CSV file on disk.
pub fn load_paths(file: &Path) -> Result<MarketPath> {
    let text = std::fs::read_to_string(file)?;
    path_from_csv(&text)
}

/// Writes a path to a CSV file.
pub fn save_paths(file: &Path, path: &MarketPath) -> Result<()> {
    std::fs::write(file, path_to_csv(path))?;
    Ok(())
}

/// Renders a generic numeric table with a time column.
pub fn series_to_csv(header: &[&str], t: &[f64], columns: &[&[f64]]) -> String {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for k in 0..t.len() {
        let _ = write!(out, "{}", t[k]);
        for col in columns {
            let _ = write!(out, ",{}", col[k]);
        }
        out.push('\n');
    }
    out
}

/// Ranks per asset as `t,rank1..rankN` rows (1-based ranks in the file).
pub fn ranks_to_csv(rv: &crate::ranks::RankView, grid: &TimeGrid) -> String {
    let n = rv.n_assets();
    let mut out = String::from("t");
    for i in 1..=n {
        let _ = write!(out, ",rank{i}");
    }
    out.push('\n');
    for k in 0..rv.len() {
        let _ = write!(out, "{}", grid.times()[k]);
        for i in 0..n {
            let _ = write!(out, ",{}", rv.u[i][k] + 1);
        }
        out.push('\n');
    }
    out
}

/// Market weights as `t,mu1..muN` rows.
pub fn weights_to_csv(mu: &[Vec<f64>], grid: &TimeGrid) -> String {
    let n = mu.len();
    let mut out = String::from("t");
    for i in 1..=n {
        let _ = write!(out, ",mu{i}");
    }
    out.push('\n');
    for k in 0..grid.len() {
        let _ = write!(out, "{}", grid.times()[k]);
        for row in mu {
            let _ = write!(out, ",{}", row[k]);
        }
        out.push('\n');
    }
    out
}

/// Local characteristics as CSV blocks: per step one row of drift rates
/// followed by one row of the covariance flattened row-major.
pub fn characteristics_to_csv(chars: &crate::characteristics::LocalCharacteristics) -> String {
    let n = chars.n_assets;
    let mut out = String::new();
    let _ = writeln!(out, "n_assets,{n}");
    for m in 0..chars.steps() {
        let _ = write!(out, "dO,{}", chars.d_o[m]);
        out.push('\n');
        let a = chars.alpha.at(m);
        out.push_str("alpha");
        for v in a {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
        let c = chars.cov.at(m);
        out.push('c');
        for i in 0..n {
            for j in 0..n {
                let _ = write!(out, ",{}", c[(i, j)]);
            }
        }
        out.push('\n');
    }
    out
}

/// Parses the block format written by [`characteristics_to_csv`].
pub fn characteristics_from_csv(
    text: &str,
) -> Result<crate::characteristics::LocalCharacteristics> {
    use crate::characteristics::{LocalCharacteristics, Series};
    let mut lines = text.lines();
    let head = lines
        .next()
        .ok_or_else(|| Error::Csv("empty characteristics file".into()))?;
    let n: usize = head
        .strip_prefix("n_assets,")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Csv(format!("bad header '{head}'")))?;
    let mut d_o = Vec::new();
    let mut alpha = Vec::new();
    let mut cov = Vec::new();
    let parse_row = |line: &str, tag: &str, expect: usize| -> Result<Vec<f64>> {
        let body = line
            .strip_prefix(tag)
            .and_then(|r| r.strip_prefix(','))
            .ok_or_else(|| Error::Csv(format!("expected '{tag}' row, got '{line}'")))?;
        let vals: Vec<f64> = body
            .split(',')
            .map(|v| v.trim().parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Csv(format!("bad number in '{line}'")))?;
        if vals.len() != expect {
            return Err(Error::Csv(format!(
                "expected {expect} values in '{tag}' row, got {}",
                vals.len()
            )));
        }
        Ok(vals)
    };
    while let Some(line) = lines.next() {
        if line.trim().is_empty() {
            continue;
        }
        d_o.push(parse_row(line, "dO", 1)?[0]);
        let a_line = lines
            .next()
            .ok_or_else(|| Error::Csv("truncated block: missing alpha row".into()))?;
        alpha.push(parse_row(a_line, "alpha", n)?);
        let c_line = lines
            .next()
            .ok_or_else(|| Error::Csv("truncated block: missing c row".into()))?;
        let flat = parse_row(c_line, "c", n * n)?;
        cov.push(nalgebra::DMatrix::from_fn(n, n, |i, j| flat[i * n + j]));
    }
    if d_o.is_empty() {
        return Err(Error::Csv("characteristics file has no steps".into()));
    }
    Ok(LocalCharacteristics {
        alpha: Series::PerStep(alpha),
        cov: Series::PerStep(cov),
        d_o,
        n_assets: n,
    })
}
