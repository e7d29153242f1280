//! Square real-valued images.

use crate::error::{Error, Result};

/// Pixel coordinate `(row, col)`.
pub type Coord = (usize, usize);

/// An `n x n` grid of real intensities stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    n: usize,
    values: Vec<f64>,
}

impl Image {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("image side must be positive"));
        }
        if values.len() != n * n {
            return Err(Error::invalid(format!("expected {} values for a {n}x{n} image, got {}", n * n, values.len())));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite value at ({}, {})", pos / n, pos % n)));
        }
        Ok(Self { n, values })
    }

    pub fn filled(n: usize, value: f64) -> Result<Self> {
        Self::new(n, vec![value; n * n])
    }

    /// Builds an image from nested rows; all rows must have the same length
    /// as the number of rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let mut values = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != n {
                return Err(Error::invalid(format!("row {i} has {} values, expected {n}", row.len())));
            }
            values.extend_from_slice(row);
        }
        Self::new(n, values)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n + col]
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.n..(row + 1) * self.n]
    }

    /// Applies `f` to every pixel. `f` must return finite values.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let values: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Self { n: self.n, values }
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub(crate) fn from_raw_unchecked(n: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), n * n);
        Self { n, values }
    }
}
