//! Readers and writers for the file formats used by the command-line tool.
//!
//! - Adjacency: dense CSV (optional header row) or an edge list with lines
//!   `u v [weight]`; `#` starts a comment.
//! - Generators: one permutation per line in one-line image notation,
//!   separated by spaces or commas.
//! - Hierarchical data: CSV with columns `branch_id, x..., y`. Exactly one
//!   row has an empty `y`; that row is the prediction target.
//! - Graph values: CSV with columns `vertex_id, value`; exactly one empty
//!   value marks the target vertex.
//! - Points: numeric CSV, one point per row (optional header).

use std::io::{BufRead, Read, Write};

use serde::Serialize;

use crate::calibrate::PredictionSet;
use crate::error::{Error, Result};
use crate::groups::Permutation;
use crate::sim::BenchResult;
use crate::transforms::SupBranch;

fn data_err(msg: impl Into<String>) -> Error {
    Error::Data(msg.into())
}

fn parse_f64(field: &str, what: &str, line: usize) -> Result<f64> {
    let v: f64 = field.trim().parse().map_err(|_| data_err(format!("line {line}: {what} '{field}' is not a number")))?;
    if !v.is_finite() {
        return Err(data_err(format!("line {line}: {what} must be finite")));
    }
    Ok(v)
}

fn csv_reader<R: Read>(r: R, has_headers: bool) -> csv::Reader<R> {
    csv::ReaderBuilder::new().has_headers(has_headers).trim(csv::Trim::All).comment(Some(b'#')).from_reader(r)
}

/// Dense adjacency matrix. A first row that does not parse as numbers is
/// treated as a header.
pub fn read_adjacency_csv<R: Read>(r: R) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (i, rec) in csv_reader(r, false).records().enumerate() {
        let rec = rec?;
        let parsed: Option<Vec<f64>> = rec.iter().map(|f| f.parse::<f64>().ok()).collect();
        match parsed {
            Some(row) => rows.push(row),
            None if i == 0 => continue,
            None => return Err(data_err(format!("adjacency row {} has a non-numeric entry", i + 1))),
        }
    }
    let n = rows.len();
    if n == 0 {
        return Err(Error::Empty("adjacency matrix"));
    }
    if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(data_err(format!("adjacency row {} has {} entries, expected {n}", i + 1, row.len())));
    }
    Ok(rows)
}

/// Numeric point cloud, one point per row. A first row that does not parse
/// as numbers is treated as a header.
pub fn read_points_csv<R: Read>(r: R) -> Result<Vec<Vec<f64>>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in csv_reader(r, false).records().enumerate() {
        let rec = rec?;
        let parsed: Option<Vec<f64>> = rec.iter().map(|f| f.parse::<f64>().ok().filter(|v| v.is_finite())).collect();
        match parsed {
            Some(row) => rows.push(row),
            None if i == 0 => continue,
            None => return Err(data_err(format!("point row {} has a non-numeric entry", i + 1))),
        }
    }
    let p = rows.first().ok_or(Error::Empty("point cloud"))?.len();
    if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != p) {
        return Err(data_err(format!("point row {} has {} coordinates, expected {p}", i + 1, row.len())));
    }
    Ok(rows)
}

/// Edge list `u v [weight]` with 0-based vertices. `vertices` fixes the
/// vertex count; otherwise it is one more than the largest index seen.
/// Edges are undirected and a repeated edge keeps the last weight.
pub fn read_edge_list<R: BufRead>(r: R, vertices: Option<usize>) -> Result<Vec<Vec<f64>>> {
    let mut edges = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let fields: Vec<&str> = body.split(|c: char| c.is_whitespace() || c == ',').filter(|f| !f.is_empty()).collect();
        if !(2..=3).contains(&fields.len()) {
            return Err(data_err(format!("line {}: expected 'u v [weight]'", i + 1)));
        }
        let vertex = |f: &str| f.parse::<usize>().map_err(|_| data_err(format!("line {}: bad vertex '{f}'", i + 1)));
        let (u, v) = (vertex(fields[0])?, vertex(fields[1])?);
        let w = fields.get(2).map_or(Ok(1.0), |f| parse_f64(f, "weight", i + 1))?;
        edges.push((u, v, w));
    }
    let seen = edges.iter().map(|&(u, v, _)| u.max(v) + 1).max().unwrap_or(0);
    let n = vertices.unwrap_or(seen);
    if n == 0 {
        return Err(Error::Empty("edge list"));
    }
    if seen > n {
        return Err(data_err(format!("edge list names vertex {} but the graph has {n}", seen - 1)));
    }
    let mut adj = vec![vec![0.0; n]; n];
    for (u, v, w) in edges {
        adj[u][v] = w;
        adj[v][u] = w;
    }
    Ok(adj)
}

/// Permutations in one-line notation, one per line.
pub fn read_generators<R: BufRead>(r: R) -> Result<Vec<Permutation>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let images = body
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|f| !f.is_empty())
            .map(|f| f.parse::<usize>().map_err(|_| data_err(format!("line {}: bad image '{f}'", i + 1))))
            .collect::<Result<Vec<_>>>()?;
        out.push(Permutation::from_images(images).map_err(|e| data_err(format!("line {}: {e}", i + 1)))?);
    }
    Ok(out)
}

/// Hierarchical data with the target moved to the end: branches keep the
/// order of first appearance except that the target's branch comes last.
#[derive(Clone, Debug, PartialEq)]
pub enum HierarchicalInput {
    Unsupervised { branch_ids: Vec<String>, observed: Vec<Vec<f64>> },
    Supervised { branch_ids: Vec<String>, branches: Vec<SupBranch>, x_star: Vec<f64> },
}

impl HierarchicalInput {
    pub fn branch_ids(&self) -> &[String] {
        match self {
            Self::Unsupervised { branch_ids, .. } | Self::Supervised { branch_ids, .. } => branch_ids,
        }
    }
}

/// Reads the hierarchical CSV. Two columns give unsupervised data; more
/// give covariates between `branch_id` and the last (response) column.
pub fn read_hierarchical_csv<R: Read>(r: R) -> Result<HierarchicalInput> {
    let mut rdr = csv_reader(r, true);
    let width = rdr.headers()?.len();
    if width < 2 {
        return Err(data_err("hierarchical CSV needs columns branch_id, [x...,] y"));
    }
    let p = width - 2;
    let mut ids: Vec<String> = Vec::new();
    let mut rows: Vec<Vec<(Vec<f64>, f64)>> = Vec::new();
    let mut target: Option<(usize, Vec<f64>)> = None;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        if rec.len() != width {
            return Err(data_err(format!("line {line}: expected {width} fields, found {}", rec.len())));
        }
        let id = rec[0].to_string();
        if id.is_empty() {
            return Err(data_err(format!("line {line}: empty branch_id")));
        }
        let b = match ids.iter().position(|x| *x == id) {
            Some(b) => b,
            None => {
                ids.push(id);
                rows.push(Vec::new());
                ids.len() - 1
            }
        };
        let x = (1..=p).map(|j| parse_f64(&rec[j], "covariate", line)).collect::<Result<Vec<f64>>>()?;
        let y = &rec[width - 1];
        if y.is_empty() {
            if target.is_some() {
                return Err(data_err(format!("line {line}: more than one row has an empty response")));
            }
            target = Some((b, x));
        } else {
            rows[b].push((x, parse_f64(y, "response", line)?));
        }
    }
    let (tb, x_star) = target.ok_or_else(|| data_err("no target row: mark it with an empty response"))?;
    let id = ids.remove(tb);
    ids.push(id);
    let last = rows.remove(tb);
    rows.push(last);
    let k = rows.len();
    if let Some(b) = rows[..k - 1].iter().position(Vec::is_empty) {
        return Err(data_err(format!("branch '{}' has no observed rows", ids[b])));
    }
    Ok(if p == 0 {
        HierarchicalInput::Unsupervised {
            branch_ids: ids,
            observed: rows.into_iter().map(|b| b.into_iter().map(|(_, y)| y).collect()).collect(),
        }
    } else {
        let branches = rows.into_iter().map(|b| {
            let (x, y) = b.into_iter().unzip();
            SupBranch { x, y }
        });
        HierarchicalInput::Supervised { branch_ids: ids, branches: branches.collect(), x_star }
    })
}

/// Vertex values indexed `0..n`, with exactly one `None` (the target).
pub fn read_graph_values<R: Read>(r: R) -> Result<(Vec<Option<f64>>, usize)> {
    let mut entries: Vec<(usize, Option<f64>)> = Vec::new();
    for (i, rec) in csv_reader(r, true).records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        if rec.len() != 2 {
            return Err(data_err(format!("line {line}: expected vertex_id,value")));
        }
        let v = rec[0].parse::<usize>().map_err(|_| data_err(format!("line {line}: bad vertex_id '{}'", &rec[0])))?;
        let value = if rec[1].is_empty() { None } else { Some(parse_f64(&rec[1], "value", line)?) };
        entries.push((v, value));
    }
    let n = entries.len();
    if n == 0 {
        return Err(Error::Empty("graph values"));
    }
    let mut values = vec![None; n];
    let mut seen = vec![false; n];
    for (v, value) in entries {
        if v >= n || seen[v] {
            return Err(data_err(format!("vertex ids must be 0..{n} without repeats (problem at {v})")));
        }
        seen[v] = true;
        values[v] = value;
    }
    let missing: Vec<usize> = (0..n).filter(|&v| values[v].is_none()).collect();
    match missing[..] {
        [t] => Ok((values, t)),
        [] => Err(data_err("no target vertex: leave one value empty")),
        _ => Err(data_err(format!("{} vertices have empty values; exactly one is allowed", missing.len()))),
    }
}

#[derive(Serialize)]
struct SetRow {
    candidate: f64,
    member: bool,
}

pub fn write_set_csv<W: Write>(w: W, set: &PredictionSet) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for (&candidate, &member) in set.candidates.iter().zip(&set.member) {
        wtr.serialize(SetRow { candidate, member })?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_set_json<W: Write>(w: W, set: &PredictionSet) -> Result<()> {
    serde_json::to_writer_pretty(w, &set.to_json())?;
    Ok(())
}

/// One row per method: `method, alpha, sigma2, mean_length, se_length,
/// mean_coverage, se_coverage, unbounded_rate`. An infinite mean length is
/// written as `inf`.
pub fn write_bench_csv<W: Write>(w: W, result: &BenchResult) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["method", "alpha", "sigma2", "mean_length", "se_length", "mean_coverage", "se_coverage", "unbounded_rate"])?;
    for r in &result.rows {
        wtr.write_record([
            r.method.name().to_string(),
            r.alpha.to_string(),
            r.sigma2.to_string(),
            r.mean_length.to_string(),
            r.se_length.to_string(),
            r.mean_coverage.to_string(),
            r.se_coverage.to_string(),
            r.unbounded_rate.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// JSON summary; infinite lengths become `null`.
pub fn write_bench_json<W: Write>(w: W, result: &BenchResult) -> Result<()> {
    serde_json::to_writer_pretty(w, result)?;
    Ok(())
}

/// Length and coverage per method, for external bar plots.
pub fn write_plot_csv<W: Write>(w: W, result: &BenchResult) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["method", "metric", "value", "se"])?;
    for r in &result.rows {
        wtr.write_record([r.method.name(), "length", &r.mean_length.to_string(), &r.se_length.to_string()])?;
        wtr.write_record([r.method.name(), "coverage", &r.mean_coverage.to_string(), &r.se_coverage.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}
