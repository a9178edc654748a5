//! File formats.
//!
//! Per-hypothesis CSVs have a header row and two columns, a 1-based
//! `hypothesis_id` and a value; every id in `1..=m` must appear exactly
//! once, in any order. Distance matrices are a header row followed by `m`
//! rows of `m` numbers. Tree files are JSON documents holding, for each
//! layer above the first, the nodes as arrays of 1-based child positions in
//! the layer below.

use std::fs::File;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use dart2::{AggregationTree, DistanceMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

fn open_csv(path: &Path) -> CliResult<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    match e.position() {
        Some(pos) => CliError::Parse {
            path: path.to_path_buf(),
            row: pos.line(),
            column: 1,
            message: e.to_string(),
        },
        None => CliError::format(path, e.to_string()),
    }
}

fn parse_field<T: FromStr>(
    path: &Path,
    row: u64,
    column: usize,
    raw: &str,
    what: &str,
) -> CliResult<T> {
    raw.parse().map_err(|_| CliError::Parse {
        path: path.to_path_buf(),
        row,
        column,
        message: format!("expected {what}, found {raw:?}"),
    })
}

fn read_header(path: &Path, reader: &mut csv::Reader<File>, expected: usize) -> CliResult<()> {
    let header = reader.headers().map_err(|e| csv_error(path, e))?;
    if header.is_empty() || header.iter().all(|h| h.is_empty()) {
        return Err(CliError::format(path, "missing header row"));
    }
    if expected > 0 && header.len() != expected {
        return Err(CliError::Parse {
            path: path.to_path_buf(),
            row: 1,
            column: header.len().min(expected) + 1,
            message: format!("header has {} columns, expected {expected}", header.len()),
        });
    }
    Ok(())
}

/// Reads `hypothesis_id,<value>` rows into a vector indexed by id − 1.
pub fn read_per_hypothesis<T: FromStr>(path: &Path, what: &str) -> CliResult<Vec<T>> {
    let mut reader = open_csv(path)?;
    read_header(path, &mut reader, 2)?;
    let mut rows: Vec<(usize, u64, T)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let row = record.position().map_or(0, |p| p.line());
        if record.len() != 2 {
            return Err(CliError::Parse {
                path: path.to_path_buf(),
                row,
                column: record.len().min(2) + 1,
                message: format!("expected 2 columns, found {}", record.len()),
            });
        }
        let id: usize = parse_field(path, row, 1, &record[0], "a positive integer id")?;
        let value: T = parse_field(path, row, 2, &record[1], what)?;
        rows.push((id, row, value));
    }
    let m = rows.len();
    if m == 0 {
        return Err(CliError::format(path, "no data rows"));
    }
    let mut slots: Vec<Option<T>> = (0..m).map(|_| None).collect();
    for (id, row, value) in rows {
        if id == 0 || id > m {
            return Err(CliError::Parse {
                path: path.to_path_buf(),
                row,
                column: 1,
                message: format!("hypothesis_id {id} outside 1..={m}"),
            });
        }
        if slots[id - 1].is_some() {
            return Err(CliError::Parse {
                path: path.to_path_buf(),
                row,
                column: 1,
                message: format!("hypothesis_id {id} appears more than once"),
            });
        }
        slots[id - 1] = Some(value);
    }
    Ok(slots
        .into_iter()
        .map(|v| v.expect("every id filled"))
        .collect())
}

pub fn read_distances(path: &Path) -> CliResult<DistanceMatrix> {
    let mut reader = open_csv(path)?;
    read_header(path, &mut reader, 0)?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let row = record.position().map_or(0, |p| p.line());
        let values = record
            .iter()
            .enumerate()
            .map(|(c, raw)| parse_field::<f64>(path, row, c + 1, raw, "a number"))
            .collect::<CliResult<Vec<_>>>()?;
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(CliError::format(path, "no data rows"));
    }
    Ok(DistanceMatrix::from_rows(rows)?)
}

pub fn read_locations(path: &Path) -> CliResult<Vec<[f64; 2]>> {
    let mut reader = open_csv(path)?;
    read_header(path, &mut reader, 2)?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let row = record.position().map_or(0, |p| p.line());
        let x = parse_field(path, row, 1, &record[0], "a number")?;
        let y = parse_field(path, row, 2, &record[1], "a number")?;
        out.push([x, y]);
    }
    if out.is_empty() {
        return Err(CliError::format(path, "no data rows"));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeFile {
    pub m: usize,
    pub max_children: usize,
    pub num_layers: usize,
    /// Layers 2..L; each node lists 1-based child positions.
    pub layers: Vec<Vec<Vec<usize>>>,
}

impl TreeFile {
    pub fn from_tree(tree: &AggregationTree) -> Self {
        Self {
            m: tree.m(),
            max_children: tree.max_children(),
            num_layers: tree.num_layers(),
            layers: tree
                .upper_children()
                .into_iter()
                .map(|l| {
                    l.into_iter()
                        .map(|n| n.into_iter().map(|c| c + 1).collect())
                        .collect()
                })
                .collect(),
        }
    }

    pub fn into_tree(self, path: &Path) -> CliResult<AggregationTree> {
        if self.num_layers != self.layers.len() + 1 {
            return Err(CliError::format(
                path,
                format!(
                    "num_layers is {} but {} upper layers are listed",
                    self.num_layers,
                    self.layers.len()
                ),
            ));
        }
        let mut upper = Vec::with_capacity(self.layers.len());
        for (k, layer) in self.layers.into_iter().enumerate() {
            let mut nodes = Vec::with_capacity(layer.len());
            for (pos, children) in layer.into_iter().enumerate() {
                if children.contains(&0) {
                    return Err(CliError::format(
                        path,
                        format!("layer {}, node {}: child ids are 1-based", k + 2, pos + 1),
                    ));
                }
                nodes.push(children.into_iter().map(|c| c - 1).collect());
            }
            upper.push(nodes);
        }
        Ok(AggregationTree::from_children(
            self.m,
            self.max_children,
            upper,
        )?)
    }
}

pub fn read_tree(path: &Path) -> CliResult<AggregationTree> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let doc: TreeFile = serde_json::from_reader(std::io::BufReader::new(file))
        .map_err(|e| CliError::format(path, e.to_string()))?;
    doc.into_tree(path)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Writes a CSV from pre-formatted rows.
pub fn write_csv(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let wrap = |e: csv::Error| CliError::format(path, e.to_string());
    w.write_record(header).map_err(wrap)?;
    for row in rows {
        w.write_record(&row).map_err(wrap)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn ensure_dir(path: &Path) -> CliResult<PathBuf> {
    std::fs::create_dir_all(path).map_err(|e| CliError::io(path, e))?;
    Ok(path.to_path_buf())
}
