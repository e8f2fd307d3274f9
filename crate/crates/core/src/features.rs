//! Feature standardization and the SCF1 / SCS1 file formats.
//!
//! SCF1 layout (all integers and floats little-endian):
//!
//! | field            | type                    |
//! |------------------|-------------------------|
//! | magic            | `b"SCF1"`               |
//! | version          | u32 = 1                 |
//! | feature width    | u64                     |
//! | row count        | u64                     |
//! | has labels       | u8 (0 or 1)             |
//! | path table bytes | u64, then UTF-8 text    |
//! | values           | rows × width × f32      |
//! | labels           | rows × u32 (if present) |
//!
//! SCS1 (standardizer) uses the same framing: magic `b"SCS1"`, version u32,
//! width u64, epsilon f64, then `width` means and `width` inverse standard
//! deviations as f64.

use std::io::{Read, Write};

use crate::binio::{ByteReader, ByteWriter};
use crate::error::{Result, ScatterError};
use crate::scattering::PathBlock;

pub const FEATURE_MAGIC: &[u8; 4] = b"SCF1";
pub const STANDARDIZER_MAGIC: &[u8; 4] = b"SCS1";
pub const FORMAT_VERSION: u32 = 1;

/// Standard deviations below this are treated as constant columns.
pub const DEFAULT_EPSILON: f64 = 1e-12;

// Sanity caps applied before allocating from header counts.
const MAX_WIDTH: u64 = 1 << 32;
const MAX_TEXT: u64 = 1 << 32;

/// Dense row-major matrix of feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(ScatterError::param(format!(
                "{} values do not form a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(ScatterError::param("rows have different lengths"));
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.rows).map(move |i| self.row(i))
    }
}

/// Per-column affine map `(v - mean) * inv_std`.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Zero for constant columns, which are thereby zeroed out.
    pub inv_std: Vec<f64>,
    pub epsilon: f64,
}

impl Standardizer {
    pub fn identity(width: usize) -> Self {
        Standardizer {
            mean: vec![0.0; width],
            inv_std: vec![1.0; width],
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn width(&self) -> usize {
        self.mean.len()
    }

    /// Columns whose standard deviation fell below epsilon at fit time.
    pub fn constant_columns(&self) -> Vec<usize> {
        self.inv_std
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_len(v.len())?;
        Ok(v
            .iter()
            .zip(&self.mean)
            .zip(&self.inv_std)
            .map(|((x, m), s)| (x - m) * s)
            .collect())
    }

    pub fn apply_matrix(&self, m: &Matrix) -> Result<Matrix> {
        self.check_len(m.cols())?;
        let mut out = m.clone();
        for i in 0..out.rows() {
            for ((x, mean), s) in out.row_mut(i).iter_mut().zip(&self.mean).zip(&self.inv_std) {
                *x = (*x - mean) * s;
            }
        }
        Ok(out)
    }

    /// Inverse map for non-constant columns; constant columns come back as
    /// their mean.
    pub fn unapply(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_len(v.len())?;
        Ok(v
            .iter()
            .zip(&self.mean)
            .zip(&self.inv_std)
            .map(|((x, m), s)| if *s == 0.0 { *m } else { x / s + m })
            .collect())
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if n != self.width() {
            return Err(ScatterError::param(format!(
                "vector of length {n} given to a standardizer of width {}",
                self.width()
            )));
        }
        Ok(())
    }

    pub fn write<W: Write>(&self, w: W) -> Result<()> {
        let mut out = ByteWriter::new(w);
        out.bytes(STANDARDIZER_MAGIC)?;
        out.u32(FORMAT_VERSION)?;
        out.u64(self.width() as u64)?;
        out.f64(self.epsilon)?;
        out.f64s(&self.mean)?;
        out.f64s(&self.inv_std)?;
        out.finish()?;
        Ok(())
    }

    pub fn read<R: Read>(r: R) -> Result<Self> {
        let mut input = ByteReader::new(r);
        input.magic(STANDARDIZER_MAGIC)?;
        read_version(&mut input)?;
        let width = input.count("width", MAX_WIDTH)?;
        let epsilon = input.f64("epsilon")?;
        let mean = input.f64s(width, "means")?;
        let inv_std = input.f64s(width, "inverse deviations")?;
        input.expect_end()?;
        Ok(Standardizer { mean, inv_std, epsilon })
    }
}

/// Per-column mean and population standard deviation of the training rows.
/// Columns with deviation below [`DEFAULT_EPSILON`] get `inv_std = 0`.
pub fn fit_standardizer(train: &Matrix) -> Result<Standardizer> {
    fit_standardizer_with_epsilon(train, DEFAULT_EPSILON)
}

pub fn fit_standardizer_with_epsilon(train: &Matrix, epsilon: f64) -> Result<Standardizer> {
    if train.rows() < 2 {
        return Err(ScatterError::param(format!(
            "need at least 2 rows to standardize, got {}",
            train.rows()
        )));
    }
    if train.data().iter().any(|v| !v.is_finite()) {
        return Err(ScatterError::Data("non-finite value in training features".into()));
    }
    // Welford's running update, column-wise.
    let cols = train.cols();
    let mut mean = vec![0.0; cols];
    let mut m2 = vec![0.0; cols];
    for (i, row) in train.iter_rows().enumerate() {
        let count = (i + 1) as f64;
        for ((x, m), s) in row.iter().zip(mean.iter_mut()).zip(m2.iter_mut()) {
            let delta = x - *m;
            *m += delta / count;
            *s += delta * (x - *m);
        }
    }
    let n = train.rows() as f64;
    let inv_std = m2
        .iter()
        .map(|s| {
            let std = (s / n).max(0.0).sqrt();
            if std < epsilon {
                0.0
            } else {
                1.0 / std
            }
        })
        .collect();
    Ok(Standardizer { mean, inv_std, epsilon })
}

/// Contents of an SCF1 file. Values are stored in single precision.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFile {
    /// One line per feature block, see [`PathBlock`]'s text form.
    pub path_table: String,
    pub width: usize,
    pub values: Vec<f32>,
    pub labels: Option<Vec<u32>>,
}

impl FeatureFile {
    pub fn new(path_table: String, width: usize, values: Vec<f32>, labels: Option<Vec<u32>>) -> Result<Self> {
        let f = FeatureFile {
            path_table,
            width,
            values,
            labels,
        };
        f.check()?;
        Ok(f)
    }

    /// Rounds a double-precision matrix to storage precision.
    pub fn from_matrix(path_table: String, m: &Matrix, labels: Option<Vec<u32>>) -> Result<Self> {
        Self::new(
            path_table,
            m.cols(),
            m.data().iter().map(|&v| v as f32).collect(),
            labels,
        )
    }

    fn check(&self) -> Result<()> {
        if self.width == 0 {
            if !self.values.is_empty() {
                return Err(ScatterError::param("zero-width feature file with values"));
            }
        } else if self.values.len() % self.width != 0 {
            return Err(ScatterError::param(format!(
                "{} values are not a whole number of rows of width {}",
                self.values.len(),
                self.width
            )));
        }
        if let Some(l) = &self.labels {
            if l.len() != self.rows() {
                return Err(ScatterError::param(format!(
                    "{} labels for {} rows",
                    l.len(),
                    self.rows()
                )));
            }
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        if self.width == 0 {
            0
        } else {
            self.values.len() / self.width
        }
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.width..(i + 1) * self.width]
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix {
            rows: self.rows(),
            cols: self.width,
            data: self.values.iter().map(|&v| f64::from(v)).collect(),
        }
    }

    /// Parses the path table back into blocks.
    pub fn path_blocks(&self) -> Result<Vec<PathBlock>> {
        self.path_table.lines().map(str::parse).collect()
    }

    pub fn write<W: Write>(&self, w: W) -> Result<()> {
        self.check()?;
        let mut out = ByteWriter::new(w);
        out.bytes(FEATURE_MAGIC)?;
        out.u32(FORMAT_VERSION)?;
        out.u64(self.width as u64)?;
        out.u64(self.rows() as u64)?;
        out.u8(u8::from(self.labels.is_some()))?;
        out.u64(self.path_table.len() as u64)?;
        out.bytes(self.path_table.as_bytes())?;
        out.f32s(&self.values)?;
        if let Some(labels) = &self.labels {
            out.u32s(labels)?;
        }
        out.finish()?;
        Ok(())
    }

    pub fn read<R: Read>(r: R) -> Result<Self> {
        let mut input = ByteReader::new(r);
        input.magic(FEATURE_MAGIC)?;
        read_version(&mut input)?;
        let width = input.count("feature width", MAX_WIDTH)?;
        let rows_at = input.offset();
        let rows = input.count("row count", u64::MAX)?;
        let total = rows.checked_mul(width).filter(|&t| (t as u64) <= MAX_WIDTH * 64);
        let Some(total) = total else {
            return Err(ScatterError::format(rows_at, format!("{rows} rows of width {width} is too large")));
        };
        let flag_at = input.offset();
        let has_labels = match input.u8("label flag")? {
            0 => false,
            1 => true,
            v => return Err(ScatterError::format(flag_at, format!("label flag must be 0 or 1, got {v}"))),
        };
        let text_len = input.count("path table length", MAX_TEXT)?;
        let text_at = input.offset();
        let mut text = vec![0u8; text_len];
        input.fill(&mut text, "path table")?;
        let path_table = String::from_utf8(text)
            .map_err(|e| ScatterError::format(text_at + e.utf8_error().valid_up_to() as u64, "path table is not UTF-8"))?;
        let values = input.f32s(total, "feature values")?;
        let labels = if has_labels {
            Some(input.u32s(rows, "labels")?)
        } else {
            None
        };
        input.expect_end()?;
        if width == 0 && rows != 0 {
            return Err(ScatterError::format(rows_at, "rows declared with zero width"));
        }
        Ok(FeatureFile {
            path_table,
            width,
            values,
            labels,
        })
    }
}

fn read_version<R: Read>(input: &mut ByteReader<R>) -> Result<()> {
    let at = input.offset();
    let v = input.u32("version")?;
    if v != FORMAT_VERSION {
        return Err(ScatterError::format(at, format!("unsupported version {v}")));
    }
    Ok(())
}

/// Text form of a path table, one block per line.
pub fn format_path_table(blocks: &[PathBlock]) -> String {
    blocks.iter().map(|b| format!("{b}\n")).collect()
}
