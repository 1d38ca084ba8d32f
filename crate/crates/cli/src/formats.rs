//! File formats: whitespace-separated matrices with `?` placeholders,
//! 1-based edge lists with optional node names, and CSV observation
//! tables. Writers use the shortest round-trip float representation so
//! write-then-read is exact.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use nalgebra::DMatrix;
use hrx_core::{PartialVariogram, UndirectedGraph};

/// A parsed matrix file: square, possibly with unspecified cells.
pub struct ParsedMatrix {
    pub d: usize,
    pub entries: Vec<Vec<Option<f64>>>,
}

impl ParsedMatrix {
    pub fn fully_specified(&self) -> bool {
        self.entries.iter().flatten().all(Option::is_some)
    }

    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        if !self.fully_specified() {
            bail!("matrix contains unspecified (\"?\") entries where a full matrix is required");
        }
        Ok(DMatrix::from_fn(self.d, self.d, |i, j| {
            self.entries[i][j].unwrap()
        }))
    }

    pub fn to_partial(&self) -> Result<PartialVariogram> {
        let mut p = PartialVariogram::unspecified(self.d);
        for i in 0..self.d {
            if self.entries[i][i] != Some(0.0) {
                bail!("diagonal entry ({},{}) must be specified as 0", i + 1, i + 1);
            }
            for j in (i + 1)..self.d {
                match (self.entries[i][j], self.entries[j][i]) {
                    (Some(a), Some(b)) => {
                        if (a - b).abs() > 1e-8 * a.abs().max(1.0) {
                            bail!(
                                "matrix is not symmetric at ({},{}): {} vs {}",
                                i + 1,
                                j + 1,
                                a,
                                b
                            );
                        }
                        p.set(i, j, 0.5 * (a + b));
                    }
                    (None, None) => {}
                    _ => bail!(
                        "specification is not symmetric at ({},{})",
                        i + 1,
                        j + 1
                    ),
                }
            }
        }
        Ok(p)
    }
}

/// Reads a matrix file: `#` starts a comment, an optional first line
/// `dim d` fixes the dimension, rows are whitespace-separated tokens that
/// are either numbers or the literal `?`.
pub fn read_matrix(path: &Path) -> Result<ParsedMatrix> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read matrix file {}", path.display()))?;
    let mut rows: Vec<Vec<Option<f64>>> = Vec::new();
    let mut declared_dim: Option<usize> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if rows.is_empty() && declared_dim.is_none() {
            if let Some(rest) = line.strip_prefix("dim ") {
                declared_dim = Some(
                    rest.trim()
                        .parse()
                        .with_context(|| format!("bad dimension header on line {}", lineno + 1))?,
                );
                continue;
            }
        }
        let row: Vec<Option<f64>> = line
            .split_whitespace()
            .map(|tok| {
                if tok == "?" {
                    Ok(None)
                } else {
                    tok.parse::<f64>()
                        .map(Some)
                        .with_context(|| format!("bad matrix entry '{tok}' on line {}", lineno + 1))
                }
            })
            .collect::<Result<_>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        bail!("matrix file {} holds no rows", path.display());
    }
    let d = declared_dim.unwrap_or(rows.len());
    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
        bail!(
            "matrix file {} is not a {}x{} table",
            path.display(),
            d,
            d
        );
    }
    Ok(ParsedMatrix { d, entries: rows })
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{}", m[(i, j)])).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    fs::write(path, out).with_context(|| format!("cannot write {}", path.display()))
}

pub fn write_partial_matrix(path: &Path, p: &PartialVariogram) -> Result<()> {
    let d = p.dim();
    let mut out = String::new();
    for i in 0..d {
        let row: Vec<String> = (0..d)
            .map(|j| match p.get(i, j) {
                Some(v) => format!("{v}"),
                None => "?".to_string(),
            })
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    fs::write(path, out).with_context(|| format!("cannot write {}", path.display()))
}

/// Reads an edge list: one `i j` pair per line (1-based indices or node
/// names), duplicates ignored, `#` comments, and an optional
/// `names: a b c …` header declaring the node set.
pub fn read_graph(path: &Path, expected_dim: Option<usize>) -> Result<UndirectedGraph> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read graph file {}", path.display()))?;
    let mut names: Option<Vec<String>> = None;
    let mut pairs: Vec<(String, String)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("names:") {
            names = Some(rest.split_whitespace().map(str::to_string).collect());
            continue;
        }
        let mut toks = line.split_whitespace();
        match (toks.next(), toks.next(), toks.next()) {
            (Some(a), Some(b), None) => pairs.push((a.to_string(), b.to_string())),
            _ => bail!(
                "graph file {} line {}: expected 'i j'",
                path.display(),
                lineno + 1
            ),
        }
    }
    let resolve = |tok: &str, names: &Option<Vec<String>>| -> Result<usize> {
        if let Some(names) = names {
            if let Some(pos) = names.iter().position(|n| n == tok) {
                return Ok(pos);
            }
        }
        let idx: usize = tok
            .parse()
            .with_context(|| format!("unknown node '{tok}'"))?;
        if idx == 0 {
            bail!("node indices are 1-based, got 0");
        }
        Ok(idx - 1)
    };
    let mut edges = Vec::new();
    let mut max_node = 0usize;
    for (a, b) in &pairs {
        let i = resolve(a, &names)?;
        let j = resolve(b, &names)?;
        max_node = max_node.max(i).max(j);
        if i != j && !edges.contains(&(i.min(j), i.max(j))) {
            edges.push((i.min(j), i.max(j)));
        }
    }
    let d = expected_dim
        .or(names.as_ref().map(Vec::len))
        .unwrap_or(max_node + 1);
    if max_node >= d {
        bail!(
            "graph file {} references node {} but the dimension is {}",
            path.display(),
            max_node + 1,
            d
        );
    }
    Ok(UndirectedGraph::new(d, &edges)?)
}

pub fn write_graph(path: &Path, g: &UndirectedGraph) -> Result<()> {
    let mut out = String::new();
    for (i, j) in g.edges() {
        out.push_str(&format!("{} {}\n", i + 1, j + 1));
    }
    fs::write(path, out).with_context(|| format!("cannot write {}", path.display()))
}

/// Reads a CSV observation table: header row of variable names, numeric
/// cells; rows holding empty, `NA` or `NaN` cells are dropped. Returns the
/// headers, the data and the number of dropped rows.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, DMatrix<f64>, usize)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot read csv file {}", path.display()))?;
    let headers: Vec<String> = reader
        .headers()
        .context("csv has no header row")?
        .iter()
        .map(str::to_string)
        .collect();
    let d = headers.len();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut dropped = 0usize;
    for (lineno, record) in reader.records().enumerate() {
        let record = record.with_context(|| format!("csv record {}", lineno + 2))?;
        if record.len() != d {
            bail!(
                "csv row {} has {} fields, expected {}",
                lineno + 2,
                record.len(),
                d
            );
        }
        let mut row = Vec::with_capacity(d);
        let mut missing = false;
        for cell in record.iter() {
            if cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan")
            {
                missing = true;
                break;
            }
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => row.push(v),
                Ok(_) => {
                    missing = true;
                    break;
                }
                Err(_) => bail!("csv row {}: bad numeric cell '{}'", lineno + 2, cell),
            }
        }
        if missing {
            dropped += 1;
        } else {
            rows.push(row);
        }
    }
    if rows.is_empty() {
        bail!("csv file {} holds no complete rows", path.display());
    }
    let n = rows.len();
    let data = DMatrix::from_fn(n, d, |i, j| rows[i][j]);
    Ok((headers, data, dropped))
}

pub fn write_csv(path: &Path, headers: &[String], data: &DMatrix<f64>) -> Result<()> {
    let mut out = String::new();
    out.push_str(&headers.join(","));
    out.push('\n');
    for i in 0..data.nrows() {
        let row: Vec<String> = (0..data.ncols())
            .map(|j| format!("{}", data[(i, j)]))
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out).with_context(|| format!("cannot write {}", path.display()))
}
