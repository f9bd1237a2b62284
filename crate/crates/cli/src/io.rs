//! Files in and out: the group manifest, data CSVs and JSON documents.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestGroup {
    pub name: String,
    /// Relative paths are resolved against the manifest's directory.
    pub path: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub groups: Vec<ManifestGroup>,
    /// Column-center each group before computing covariances.
    #[serde(default = "default_center")]
    pub center: bool,
}

fn default_center() -> bool {
    true
}

/// Data of every group, in manifest order.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub names: Vec<String>,
    pub variables: Vec<String>,
    pub data: Vec<DMatrix<f64>>,
    pub center: bool,
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_reader(std::io::BufReader::new(file)).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))
}

pub fn load_manifest(path: &Path) -> Result<Dataset> {
    let manifest: Manifest = read_json(path)?;
    if manifest.groups.is_empty() {
        return Err(CliError::input(format!("{}: manifest lists no groups", path.display())));
    }
    let base = path.parent().unwrap_or(Path::new("."));
    let mut variables: Option<Vec<String>> = None;
    let mut data = Vec::new();
    for group in &manifest.groups {
        let file = if group.path.is_absolute() { group.path.clone() } else { base.join(&group.path) };
        let (header, matrix) = read_matrix_csv(&file)?;
        match &variables {
            None => variables = Some(header),
            Some(first) if *first != header => {
                return Err(CliError::input(format!(
                    "{}: header differs from the first group's ({} vs {} columns)",
                    file.display(),
                    header.len(),
                    first.len()
                )))
            }
            Some(_) => {}
        }
        data.push(matrix);
    }
    Ok(Dataset {
        names: manifest.groups.iter().map(|g| g.name.clone()).collect(),
        variables: variables.unwrap_or_default(),
        data,
        center: manifest.center,
    })
}

/// A numeric CSV with a mandatory header row.
pub fn read_matrix_csv(path: &Path) -> Result<(Vec<String>, DMatrix<f64>)> {
    let bad = |message: String| CliError::Csv {
        path: path.to_path_buf(),
        message,
    };
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| bad(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(bad("missing header row".into()));
    }
    let mut values = Vec::new();
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        for (col, field) in record.iter().enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| bad(format!("line {line}, column {}: {field:?} is not a number", col + 1)))?;
            if !v.is_finite() {
                return Err(bad(format!("line {line}, column {}: value is not finite", col + 1)));
            }
            values.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(bad("no data rows".into()));
    }
    Ok((header.clone(), DMatrix::from_row_slice(rows, header.len(), &values)))
}

pub fn write_matrix_csv(path: &Path, header: &[String], matrix: &DMatrix<f64>) -> Result<()> {
    let mut w = csv_writer(path)?;
    write_row(&mut w, path, header.iter().map(String::as_str))?;
    for row in matrix.row_iter() {
        let fields: Vec<String> = row.iter().map(|v| num(*v)).collect();
        write_row(&mut w, path, fields.iter().map(String::as_str))?;
    }
    finish(w, path)
}

/// Full-precision scientific notation.
pub fn num(v: f64) -> String {
    format!("{v:e}")
}

pub type CsvOut = csv::Writer<BufWriter<File>>;

pub fn csv_writer(path: &Path) -> Result<CsvOut> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

pub fn write_row<'a>(w: &mut CsvOut, path: &Path, fields: impl IntoIterator<Item = &'a str>) -> Result<()> {
    w.write_record(fields).map_err(|e| CliError::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn finish(mut w: CsvOut, path: &Path) -> Result<()> {
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}
