//! CSV ingestion for sizes and distances.
//!
//! * sizes: header `id,value`
//! * distances, matrix form: first row and first column hold ids, cell `(i, j)`
//!   is the distance; the diagonal may be blank
//! * distances, long form: header `from,to,distance`; each unordered pair needs
//!   at least one direction

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::spatial_data::{RawSizeVector, SymmetryPolicy, ASYMMETRY_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceFormat {
    #[default]
    Matrix,
    Long,
}

impl std::str::FromStr for DistanceFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "matrix" => Ok(DistanceFormat::Matrix),
            "long" => Ok(DistanceFormat::Long),
            other => Err(Error::InvalidConfig(format!(
                "unknown distance format `{other}`"
            ))),
        }
    }
}

/// Distances keyed by id; the diagonal is zero and carries no meaning.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceTable {
    pub ids: Vec<String>,
    pub matrix: Matrix,
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    if let csv::ErrorKind::Io(_) = e.kind() {
        if let csv::ErrorKind::Io(io) = e.into_kind() {
            return Error::io(format!("reading {}", path.display()), io);
        }
        unreachable!()
    }
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: e.to_string(),
    }
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn reader(path: &Path, has_headers: bool) -> Result<csv::Reader<fs::File>> {
    csv::ReaderBuilder::new()
        .has_headers(has_headers)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| csv_error(path, e))
}

fn expect_header(path: &Path, rdr: &mut csv::Reader<fs::File>, expected: &[&str]) -> Result<()> {
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?;
    let found: Vec<&str> = headers.iter().collect();
    if found != expected {
        return Err(parse_error(
            path,
            1,
            format!(
                "expected header `{}`, got `{}`",
                expected.join(","),
                found.join(",")
            ),
        ));
    }
    Ok(())
}

fn parse_number(path: &Path, line: usize, column: &str, text: &str) -> Result<f64> {
    text.parse::<f64>()
        .map_err(|e| parse_error(path, line, format!("column `{column}`: `{text}`: {e}")))
}

pub fn load_sizes(path: &Path) -> Result<RawSizeVector> {
    let mut rdr = reader(path, true)?;
    expect_header(path, &mut rdr, &["id", "value"])?;
    let mut ids = Vec::new();
    let mut values = Vec::new();
    let mut seen = HashSet::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let id = record[0].to_string();
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId(id));
        }
        let value = parse_number(path, line, "value", &record[1])?;
        if !value.is_finite() {
            return Err(parse_error(path, line, "value is not finite"));
        }
        ids.push(id);
        values.push(value);
    }
    RawSizeVector::new(ids, values)
}

pub fn load_distances(
    path: &Path,
    format: DistanceFormat,
    policy: SymmetryPolicy,
) -> Result<DistanceTable> {
    let table = match format {
        DistanceFormat::Matrix => load_matrix_form(path)?,
        DistanceFormat::Long => load_long_form(path)?,
    };
    if policy == SymmetryPolicy::Strict {
        let (relative, i, j) = table.matrix.max_relative_asymmetry();
        if relative > ASYMMETRY_TOLERANCE {
            return Err(Error::AsymmetricInput { i, j, relative });
        }
    }
    Ok(table)
}

fn load_matrix_form(path: &Path) -> Result<DistanceTable> {
    let mut rdr = reader(path, false)?;
    let mut records = rdr.records();
    let header = records
        .next()
        .ok_or_else(|| parse_error(path, 1, "empty distance file"))?
        .map_err(|e| csv_error(path, e))?;
    let ids: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut unique = HashSet::new();
    for id in &ids {
        if !unique.insert(id) {
            return Err(Error::DuplicateId(id.clone()));
        }
    }
    let column_of: HashMap<&str, usize> = ids
        .iter()
        .enumerate()
        .map(|(k, id)| (id.as_str(), k))
        .collect();
    let n = ids.len();
    let mut matrix = Matrix::zeros(n, n);
    let mut filled = vec![false; n];
    let mut rows = 0;
    for record in records {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        rows += 1;
        if record.len() != n + 1 {
            return Err(Error::NonSquare {
                rows: rows.max(n),
                cols: record.len().saturating_sub(1),
            });
        }
        let row_id = &record[0];
        let i = *column_of
            .get(row_id)
            .ok_or_else(|| Error::IdMismatch(format!("row id `{row_id}` is not a column id")))?;
        if filled[i] {
            return Err(Error::DuplicateId(row_id.to_string()));
        }
        filled[i] = true;
        for (j, cell) in record.iter().skip(1).enumerate() {
            if i == j {
                continue;
            }
            matrix[(i, j)] = parse_number(path, line, &ids[j], cell)?;
        }
    }
    if rows != n {
        return Err(Error::NonSquare { rows, cols: n });
    }
    Ok(DistanceTable { ids, matrix })
}

fn load_long_form(path: &Path) -> Result<DistanceTable> {
    let mut rdr = reader(path, true)?;
    expect_header(path, &mut rdr, &["from", "to", "distance"])?;
    let mut ids: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut entries: HashMap<(usize, usize), f64> = HashMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let mut slot = |id: &str| -> usize {
            *index.entry(id.to_string()).or_insert_with(|| {
                ids.push(id.to_string());
                ids.len() - 1
            })
        };
        let (a, b) = (slot(&record[0]), slot(&record[1]));
        let d = parse_number(path, line, "distance", &record[2])?;
        if a == b {
            continue;
        }
        if entries.insert((a, b), d).is_some() {
            return Err(parse_error(
                path,
                line,
                format!("pair ({}, {}) listed twice", &record[0], &record[1]),
            ));
        }
    }
    let n = ids.len();
    let mut matrix = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            matrix[(i, j)] = match (entries.get(&(i, j)), entries.get(&(j, i))) {
                (Some(d), _) | (None, Some(d)) => *d,
                (None, None) => return Err(Error::MissingPair(ids[i].clone(), ids[j].clone())),
            };
        }
    }
    Ok(DistanceTable { ids, matrix })
}

/// Reorders `sizes` to follow the id order of `distances`.
pub fn align_sizes(sizes: &RawSizeVector, distances: &DistanceTable) -> Result<RawSizeVector> {
    if sizes.len() != distances.ids.len() {
        return Err(Error::IdMismatch(format!(
            "{} sizes but {} distance ids",
            sizes.len(),
            distances.ids.len()
        )));
    }
    let by_id: HashMap<&str, f64> = sizes
        .ids()
        .iter()
        .map(String::as_str)
        .zip(sizes.values().iter().copied())
        .collect();
    let mut values = Vec::with_capacity(sizes.len());
    for id in &distances.ids {
        let v = by_id
            .get(id.as_str())
            .ok_or_else(|| Error::IdMismatch(format!("distance id `{id}` has no size")))?;
        values.push(*v);
    }
    RawSizeVector::new(distances.ids.clone(), values)
}

pub fn write_sizes(path: &Path, sizes: &RawSizeVector) -> Result<()> {
    let mut out = String::from("id,value\n");
    for (id, v) in sizes.ids().iter().zip(sizes.values()) {
        out.push_str(&format!("{id},{v}\n"));
    }
    fs::write(path, out).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn write_distance_matrix(path: &Path, table: &DistanceTable) -> Result<()> {
    let mut out = String::from("id");
    for id in &table.ids {
        out.push(',');
        out.push_str(id);
    }
    out.push('\n');
    for (i, id) in table.ids.iter().enumerate() {
        out.push_str(id);
        for j in 0..table.ids.len() {
            out.push_str(&format!(",{}", table.matrix[(i, j)]));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}
