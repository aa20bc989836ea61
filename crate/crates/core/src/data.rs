//! Feature matrices, CSV interchange and seeded splitting.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Dense row-major matrix of finite feature vectors. A row's id is its index.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    dim: usize,
    values: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::DimensionError("feature dimension must be at least 1".into()));
        }
        if !values.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: values.len().div_ceil(dim) * dim,
                found: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::DegenerateSample(format!(
                "non-finite value at row {}, column {}",
                pos / dim,
                pos % dim
            )));
        }
        Ok(Self { dim, values })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(Error::EmptyInput("no rows".into()));
        };
        let dim = first.as_ref().len();
        let mut values = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: row.len() });
            }
            values.extend_from_slice(row);
        }
        Self::new(dim, values)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.iter_rows().map(|r| r[j]).collect()
    }

    /// New matrix holding the given rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> Self {
        let mut values = Vec::with_capacity(rows.len() * self.dim);
        for &r in rows {
            values.extend_from_slice(self.row(r));
        }
        Self { dim: self.dim, values }
    }

    /// Applies `f` to every row, producing rows of dimension `dim`.
    pub fn map_rows(&self, dim: usize, mut f: impl FnMut(&[f64], &mut [f64])) -> Result<Self> {
        let mut values = vec![0.0; self.rows() * dim];
        for (src, dst) in self.iter_rows().zip(values.chunks_exact_mut(dim)) {
            f(src, dst);
        }
        Self::new(dim, values)
    }
}

/// Features with aligned binary labels (`true` = anomalous).
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    pub features: FeatureMatrix,
    pub labels: Vec<bool>,
}

impl LabeledSet {
    pub fn new(features: FeatureMatrix, labels: Vec<bool>) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::DimensionMismatch { expected: features.rows(), found: labels.len() });
        }
        Ok(Self { features, labels })
    }
}

pub fn load_csv(path: impl AsRef<Path>, has_header: bool) -> Result<FeatureMatrix> {
    read_csv(File::open(path)?, has_header)
}

/// Reads comma-separated numeric rows. Line numbers in errors are 1-based
/// physical lines, header included.
pub fn read_csv<R: Read>(reader: R, has_header: bool) -> Result<FeatureMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .quoting(false)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut dim = None;
    let mut values = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        let more = rdr.read_record(&mut record).map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        if !more {
            break;
        }
        let line = record.position().map_or(0, |p| p.line());
        let expected = *dim.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::Parse {
                line,
                message: format!("expected {expected} fields, found {}", record.len()),
            });
        }
        for field in record.iter() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line,
                message: format!("not a number: {field:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse { line, message: format!("non-finite value: {field:?}") });
            }
            values.push(v);
        }
    }
    match dim {
        Some(d) => FeatureMatrix::new(d, values),
        None => Err(Error::EmptyInput("no data rows".into())),
    }
}

pub fn write_csv(matrix: &FeatureMatrix, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_csv_to(matrix, &mut out)?;
    out.flush()?;
    Ok(())
}

/// Writes rows with 17 significant digits, enough to read back bit-exactly.
pub fn write_csv_to<W: Write>(matrix: &FeatureMatrix, out: &mut W) -> Result<()> {
    for row in matrix.iter_rows() {
        write_values(out, row)?;
    }
    Ok(())
}

pub(crate) fn write_values<W: Write>(out: &mut W, values: &[f64]) -> Result<()> {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.write_all(b",")?;
        }
        write!(out, "{}", format_real(*v))?;
    }
    out.write_all(b"\n")?;
    Ok(())
}

pub fn format_real(v: f64) -> String {
    format!("{v:.16e}")
}

/// One column of values, one per line.
pub fn write_column(values: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for v in values {
        writeln!(out, "{}", format_real(*v))?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<bool>> {
    read_labels(File::open(path)?)
}

/// Reads one `0`/`1` per line; blank lines are skipped.
pub fn read_labels<R: Read>(reader: R) -> Result<Vec<bool>> {
    let mut labels = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let line_no = i as u64 + 1;
        match line.trim() {
            "" => continue,
            "0" => labels.push(false),
            "1" => labels.push(true),
            other => {
                return Err(Error::Parse { line: line_no, message: format!("label must be 0 or 1, got {other:?}") })
            }
        }
    }
    if labels.is_empty() {
        return Err(Error::EmptyInput("no labels".into()));
    }
    Ok(labels)
}

pub fn write_labels(labels: &[bool], path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for &l in labels {
        writeln!(out, "{}", u8::from(l))?;
    }
    out.flush()?;
    Ok(())
}

/// Seeded split of `0..n` into a train half of `⌈n/2⌉` indices and the rest.
pub fn split_half_indices(n: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 2 {
        return Err(Error::EmptyInput(format!("need at least 2 rows to split, got {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    Rng::new(seed).shuffle(&mut order);
    let test = order.split_off(n.div_ceil(2));
    Ok((order, test))
}

pub fn split_half(matrix: &FeatureMatrix, seed: u64) -> Result<(FeatureMatrix, FeatureMatrix)> {
    let (train, test) = split_half_indices(matrix.rows(), seed)?;
    Ok((matrix.select(&train), matrix.select(&test)))
}
