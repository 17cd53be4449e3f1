//! Random bases and the two feature-space encoders.
//!
//! Random Projection (RP) maps a sample linearly through Gaussian basis
//! rows; Random Fourier Features (RFF) adds a per-row uniform offset and a
//! cosine. A basis is fully determined by `(kind, hyper_dim, sigma_b, seed)`
//! plus the input dimension, so serialized models carry the seed instead of
//! the matrix.
//!
//! Layout is row-major with the hyper-dimension loop outermost, which makes
//! the `input_dim * hyper_dim` multiply-add count of one encode an exact,
//! auditable quantity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instrument::{count_activation, count_mul_add};
use crate::rng::{make_rng, Seed};
use crate::types::{EncodedBatch, FeatureVector, HyperVector};

/// Stream labels of the two draws a basis consumes; part of the frozen
/// format contract.
const STREAM_COEFFS: u32 = 0;
const STREAM_OFFSETS: u32 = 1;

/// Encoding transform selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    /// Linear projection, `h_i = x . b_i`.
    Rp,
    /// Cosine features, `h_i = cos(x . b_i + u_i)`.
    Rff,
}

impl EncoderKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EncoderKind::Rp => "rp",
            EncoderKind::Rff => "rff",
        }
    }
}

impl std::str::FromStr for EncoderKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rp" => Ok(EncoderKind::Rp),
            "rff" => Ok(EncoderKind::Rff),
            other => Err(Error::InvalidParam(format!(
                "unknown encoder kind {other:?} (expected \"rp\" or \"rff\")"
            ))),
        }
    }
}

/// Everything needed to regenerate a basis: transform kind, hypervector
/// dimensionality, basis spread, and seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub kind: EncoderKind,
    pub hyper_dim: usize,
    pub sigma_b: f64,
    pub seed: Seed,
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hyper_dim == 0 {
            return Err(Error::InvalidParam("hyper_dim must be >= 1".into()));
        }
        if !(self.sigma_b > 0.0) || !self.sigma_b.is_finite() {
            return Err(Error::InvalidParam(format!(
                "sigma_b must be positive and finite, got {}",
                self.sigma_b
            )));
        }
        Ok(())
    }
}

/// A materialized random basis: `hyper_dim x input_dim` Gaussian
/// coefficients plus `hyper_dim` uniform offsets in `[0, 2*pi)`.
///
/// The offsets are generated for RP bases too (RP ignores them at encode
/// time), so switching the kind never changes the coefficient draws.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    config: EncoderConfig,
    input_dim: usize,
    coeffs: Vec<f32>,
    offsets: Vec<f32>,
}

/// Draws a basis from the config's seed. Referentially transparent: the
/// same arguments always reproduce the same basis bitwise.
pub fn build_basis(config: &EncoderConfig, input_dim: usize) -> Result<Basis> {
    config.validate()?;
    if input_dim == 0 {
        return Err(Error::InvalidParam("input_dim must be >= 1".into()));
    }

    let d = config.hyper_dim;
    let mut coeff_rng = make_rng(config.seed, STREAM_COEFFS);
    let mut coeffs = Vec::with_capacity(d * input_dim);
    for _ in 0..d * input_dim {
        coeffs.push(coeff_rng.gaussian(config.sigma_b)? as f32);
    }

    let mut offset_rng = make_rng(config.seed, STREAM_OFFSETS);
    let mut offsets = Vec::with_capacity(d);
    for _ in 0..d {
        offsets.push(offset_rng.uniform(0.0, std::f64::consts::TAU)? as f32);
    }

    Ok(Basis {
        config: *config,
        input_dim,
        coeffs,
        offsets,
    })
}

/// Canonical dot-product kernel on widened operands: four independent
/// accumulators folded in a fixed order. Both encode paths feed it the same
/// widened values in the same order, so their outputs are bitwise
/// identical; the summation order is part of the deterministic-output
/// contract.
#[inline]
fn dot_wide(x: &[f64], w: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), w.len());
    let mut acc = [0.0f64; 4];
    let xc = x.chunks_exact(4);
    let wc = w.chunks_exact(4);
    let mut tail = 0.0f64;
    for (a, b) in xc.remainder().iter().zip(wc.remainder()) {
        tail += a * b;
    }
    for (a, b) in xc.zip(wc) {
        acc[0] += a[0] * b[0];
        acc[1] += a[1] * b[1];
        acc[2] += a[2] * b[2];
        acc[3] += a[3] * b[3];
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + tail
}

/// Exact f32 -> f64 widening, hoisted out of the dot kernel so operands
/// convert once per reuse instead of once per multiply.
#[inline]
fn widen_into(src: &[f32], dst: &mut Vec<f64>) {
    dst.clear();
    dst.extend(src.iter().map(|v| f64::from(*v)));
}

impl Basis {
    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hyper_dim(&self) -> usize {
        self.config.hyper_dim
    }

    /// Row `i` of the coefficient matrix.
    pub fn coeff_row(&self, i: usize) -> &[f32] {
        &self.coeffs[i * self.input_dim..(i + 1) * self.input_dim]
    }

    pub fn offsets(&self) -> &[f32] {
        &self.offsets
    }

    #[cfg(test)]
    pub(crate) fn from_parts(
        config: EncoderConfig,
        input_dim: usize,
        coeffs: Vec<f32>,
        offsets: Vec<f32>,
    ) -> Self {
        assert_eq!(coeffs.len(), config.hyper_dim * input_dim);
        assert_eq!(offsets.len(), config.hyper_dim);
        Self {
            config,
            input_dim,
            coeffs,
            offsets,
        }
    }

    #[inline]
    fn finish(&self, row: usize, pre: f64) -> f32 {
        match self.config.kind {
            EncoderKind::Rp => pre as f32,
            EncoderKind::Rff => (pre + f64::from(self.offsets[row])).cos() as f32,
        }
    }

    fn encode_into(&self, x: &[f32], out: &mut [f32]) {
        let j = self.input_dim;
        let mut x_wide = Vec::with_capacity(j);
        widen_into(x, &mut x_wide);
        let mut row_wide = Vec::with_capacity(j);
        for (i, h) in out.iter_mut().enumerate() {
            widen_into(&self.coeffs[i * j..(i + 1) * j], &mut row_wide);
            *h = self.finish(i, dot_wide(&x_wide, &row_wide));
        }
    }

    /// Encodes one sample into hyperspace.
    ///
    /// Records `input_dim * hyper_dim` multiply-adds (plus `hyper_dim`
    /// activations for RFF) on the active instrumentation scope.
    pub fn encode(&self, x: &FeatureVector) -> Result<HyperVector> {
        if x.len() != self.input_dim {
            return Err(Error::ShapeMismatch {
                what: "encode input",
                expected: self.input_dim,
                got: x.len(),
            });
        }
        let mut out = vec![0.0f32; self.hyper_dim()];
        self.encode_into(x.values(), &mut out);
        self.count_encode_ops(1);
        Ok(HyperVector::from_encoder(out))
    }

    /// Encodes a sequence of samples; elementwise identical to mapping
    /// [`Basis::encode`] over the inputs, with identical instrumentation.
    pub fn encode_batch(&self, xs: &[FeatureVector]) -> Result<Vec<HyperVector>> {
        for (row, x) in xs.iter().enumerate() {
            if x.len() != self.input_dim {
                return Err(Error::BatchRowMismatch {
                    row,
                    expected: self.input_dim,
                    got: x.len(),
                });
            }
        }
        let mut out = Vec::with_capacity(xs.len());
        for x in xs {
            let mut h = vec![0.0f32; self.hyper_dim()];
            self.encode_into(x.values(), &mut h);
            out.push(HyperVector::from_encoder(h));
        }
        self.count_encode_ops(xs.len() as u64);
        Ok(out)
    }

    /// Throughput path: encodes `rows` samples stored row-major in `flat`.
    ///
    /// Iterates basis rows over blocks of samples so the coefficient matrix
    /// streams from memory once per block instead of once per sample. Each
    /// individual dot product is computed exactly as in [`Basis::encode`],
    /// so outputs are bitwise identical to the per-sample path.
    pub fn encode_matrix(&self, flat: &[f32], rows: usize) -> Result<EncodedBatch> {
        if flat.len() != rows * self.input_dim {
            return Err(Error::ShapeMismatch {
                what: "encode matrix",
                expected: rows * self.input_dim,
                got: flat.len(),
            });
        }
        const BLOCK: usize = 16;
        let j = self.input_dim;
        let d = self.hyper_dim();
        let mut data = vec![0.0f32; rows * d];
        let mut block_wide = Vec::with_capacity(BLOCK * j);
        let mut row_wide = Vec::with_capacity(j);
        let mut block_start = 0;
        while block_start < rows {
            let block_end = (block_start + BLOCK).min(rows);
            widen_into(&flat[block_start * j..block_end * j], &mut block_wide);
            for i in 0..d {
                widen_into(&self.coeffs[i * j..(i + 1) * j], &mut row_wide);
                for (s, x) in block_wide.chunks_exact(j).enumerate() {
                    data[(block_start + s) * d + i] = self.finish(i, dot_wide(x, &row_wide));
                }
            }
            block_start = block_end;
        }
        self.count_encode_ops(rows as u64);
        Ok(EncodedBatch::from_raw(d, rows, data))
    }

    fn count_encode_ops(&self, samples: u64) {
        let jd = (self.input_dim as u64) * (self.hyper_dim() as u64);
        count_mul_add(samples * jd);
        if self.config.kind == EncoderKind::Rff {
            count_activation(samples * self.hyper_dim() as u64);
        }
    }
}
