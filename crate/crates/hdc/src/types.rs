//! Shared value types: shapes, feature vectors, hypervectors.
//!
//! Features and hypervectors are stored as `f32` (matching the edge-device
//! memory framing); prototype accumulation and every norm computation happen
//! in `f64` to keep long sums tight.

use crate::error::{Error, Result};

/// Dimension metadata shared across the pipeline: input feature count,
/// hypervector dimensionality, and number of classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShapeMeta {
    input_dim: usize,
    hyper_dim: usize,
    classes: usize,
}

impl ShapeMeta {
    /// Validates `input_dim >= 1`, `hyper_dim >= 1`, `classes >= 2`.
    pub fn new(input_dim: usize, hyper_dim: usize, classes: usize) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::InvalidParam("input_dim must be >= 1".into()));
        }
        if hyper_dim == 0 {
            return Err(Error::InvalidParam("hyper_dim must be >= 1".into()));
        }
        if classes < 2 {
            return Err(Error::InvalidParam("classes must be >= 2".into()));
        }
        Ok(Self {
            input_dim,
            hyper_dim,
            classes,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hyper_dim(&self) -> usize {
        self.hyper_dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }
}

fn ensure_finite(values: &[f32], what: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// A raw real-valued input sample (unitless, caller-normalized).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Vec<f32>,
}

impl FeatureVector {
    /// Rejects NaN and infinite entries.
    pub fn new(values: Vec<f32>) -> Result<Self> {
        ensure_finite(&values, "FeatureVector")?;
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }
}

/// A length-D real vector produced by encoding.
///
/// RFF encodings keep every entry in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperVector {
    values: Vec<f32>,
}

impl HyperVector {
    /// Rejects NaN and infinite entries.
    pub fn new(values: Vec<f32>) -> Result<Self> {
        ensure_finite(&values, "HyperVector")?;
        Ok(Self { values })
    }

    /// Construction path for encoder output, which is finite by
    /// construction (finite inputs through finite-weight dot products and
    /// cosine).
    pub(crate) fn from_encoder(values: Vec<f32>) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }
}

/// A dense batch of encoded samples, row-major `n x dim`.
///
/// This is the cache the training loop re-reads every retraining epoch, so
/// it stays flat instead of boxing each row.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedBatch {
    dim: usize,
    rows: usize,
    data: Vec<f32>,
}

impl EncodedBatch {
    pub(crate) fn from_raw(dim: usize, rows: usize, data: Vec<f32>) -> Self {
        debug_assert_eq!(data.len(), dim * rows);
        Self { dim, rows, data }
    }

    /// Packs hypervectors into a batch; all rows must share one dimension.
    pub fn from_hypervectors(rows: &[HyperVector]) -> Result<Self> {
        let dim = rows.first().map_or(0, HyperVector::len);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::BatchRowMismatch {
                    row: i,
                    expected: dim,
                    got: row.len(),
                });
            }
        }
        let mut data = Vec::with_capacity(dim * rows.len());
        for row in rows {
            data.extend_from_slice(row.values());
        }
        Ok(Self {
            dim,
            rows: rows.len(),
            data,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.dim.max(1))
    }

    /// Row `i` as an owned hypervector.
    pub fn hypervector(&self, i: usize) -> HyperVector {
        HyperVector::from_encoder(self.row(i).to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_meta_validates() {
        assert!(ShapeMeta::new(1, 1, 2).is_ok());
        assert!(ShapeMeta::new(0, 1, 2).is_err());
        assert!(ShapeMeta::new(1, 0, 2).is_err());
        assert!(ShapeMeta::new(1, 1, 1).is_err());
    }

    #[test]
    fn feature_vector_rejects_non_finite() {
        assert!(FeatureVector::new(vec![1.0, f32::NAN]).is_err());
        assert!(FeatureVector::new(vec![1.0, f32::INFINITY]).is_err());
        assert!(FeatureVector::new(vec![1.0, -2.0]).is_ok());
    }

    #[test]
    fn hypervector_rejects_non_finite() {
        assert!(HyperVector::new(vec![f32::NEG_INFINITY]).is_err());
        assert!(HyperVector::new(vec![0.5]).is_ok());
    }

    #[test]
    fn batch_rejects_ragged_rows() {
        let a = HyperVector::new(vec![1.0, 2.0]).unwrap();
        let b = HyperVector::new(vec![1.0]).unwrap();
        let err = EncodedBatch::from_hypervectors(&[a, b]).unwrap_err();
        match err {
            Error::BatchRowMismatch { row, .. } => assert_eq!(row, 1),
            other => panic!("unexpected error {other:?}"),
        }
    }
}
