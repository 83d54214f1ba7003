//! CSV series. Floats use the shortest representation that parses back to
//! the same value, so a reload is exact.

use std::path::Path;

use congestion_core::flow::EdgeFlow;
use congestion_core::graph::{DirectedGraph, Metric};

use crate::error::CliError;

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("CSV output is UTF-8")
}

/// `edge,tail,head,flow,metric` with one row per edge in index order.
pub fn flow_csv(g: &DirectedGraph, i: &EdgeFlow, xi: &Metric) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["edge", "tail", "head", "flow", "metric"])
        .expect("in-memory write");
    for e in g.edge_ids() {
        let (x, y) = g.endpoints(e);
        w.write_record([
            e.0.to_string(),
            g.node_name(x).to_string(),
            g.node_name(y).to_string(),
            i[e].to_string(),
            xi.values()[e.0].to_string(),
        ])
        .expect("in-memory write");
    }
    finish(w)
}

/// A `t` column `0, 1, …` followed by the named series.
pub fn series_csv(columns: &[(&str, &[f64])]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t"];
    header.extend(columns.iter().map(|(name, _)| *name));
    w.write_record(&header).expect("in-memory write");
    let rows = columns.first().map_or(0, |(_, v)| v.len());
    for t in 0..rows {
        let mut record = vec![t.to_string()];
        record.extend(columns.iter().map(|(_, v)| v[t].to_string()));
        w.write_record(&record).expect("in-memory write");
    }
    finish(w)
}

pub fn distances_csv(g: &DirectedGraph, distances: &[f64]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["node", "distance"])
        .expect("in-memory write");
    for x in g.nodes() {
        w.write_record([g.node_name(x).to_string(), distances[x.0].to_string()])
            .expect("in-memory write");
    }
    finish(w)
}

fn read(path: &Path) -> Result<(csv::StringRecord, Vec<csv::StringRecord>), CliError> {
    let bad = |e: csv::Error| CliError::input(path.display().to_string(), e);
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::input(path.display().to_string(), format!("{other:?}")),
    })?;
    let header = r.headers().map_err(bad)?.clone();
    let rows = r.records().collect::<Result<Vec<_>, _>>().map_err(bad)?;
    Ok((header, rows))
}

fn column(path: &Path, header: &csv::StringRecord, name: &str) -> Result<usize, CliError> {
    header.iter().position(|h| h == name).ok_or_else(|| {
        CliError::input(
            path.display().to_string(),
            format!("missing column `{name}`"),
        )
    })
}

fn number(path: &Path, row: usize, name: &str, text: &str) -> Result<f64, CliError> {
    text.trim().parse().map_err(|_| {
        CliError::input(
            format!("{}: row {row}, column {name}", path.display()),
            format!("`{text}` is not a number"),
        )
    })
}

/// Reads the `flow` column of a flow CSV, checking that rows list the edges
/// of `g` in order.
pub fn read_flow(path: &Path, g: &DirectedGraph) -> Result<EdgeFlow, CliError> {
    let (header, rows) = read(path)?;
    let (tail, head, flow) = (
        column(path, &header, "tail")?,
        column(path, &header, "head")?,
        column(path, &header, "flow")?,
    );
    if rows.len() != g.edge_count() {
        return Err(CliError::input(
            path.display().to_string(),
            format!(
                "dimension mismatch: {} rows for {} edges",
                rows.len(),
                g.edge_count()
            ),
        ));
    }
    let mut values = Vec::with_capacity(rows.len());
    for (e, row) in g.edge_ids().zip(&rows) {
        let (x, y) = g.endpoints(e);
        let (t, h) = (row.get(tail).unwrap_or(""), row.get(head).unwrap_or(""));
        if t != g.node_name(x) || h != g.node_name(y) {
            return Err(CliError::input(
                format!("{}: row {}", path.display(), e.0 + 1),
                format!(
                    "edge ({t}, {h}) does not match graph edge ({}, {})",
                    g.node_name(x),
                    g.node_name(y)
                ),
            ));
        }
        values.push(number(path, e.0 + 1, "flow", row.get(flow).unwrap_or(""))?);
    }
    EdgeFlow::new(values).map_err(|e| CliError::input(path.display().to_string(), e))
}

/// Reads the named columns of a series CSV with exactly `len` rows.
pub fn read_series(path: &Path, names: &[&str], len: usize) -> Result<Vec<Vec<f64>>, CliError> {
    let (header, rows) = read(path)?;
    if rows.len() != len {
        return Err(CliError::input(
            path.display().to_string(),
            format!("dimension mismatch: {} rows, expected {len}", rows.len()),
        ));
    }
    names
        .iter()
        .map(|name| {
            let c = column(path, &header, name)?;
            rows.iter()
                .enumerate()
                .map(|(k, row)| number(path, k + 1, name, row.get(c).unwrap_or("")))
                .collect()
        })
        .collect()
}
