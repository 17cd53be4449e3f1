//! Analytic cost model for the three pipeline stages, with exact-count
//! validation against measured operation counters.
//!
//! All formulas count one multiply-add as one op. Norm maintenance is
//! charged to the separate `norm_ops` bucket by the instrumentation and is
//! excluded here, as is basis generation (reported as its own line item).

use crate::encoder::EncoderKind;
use crate::error::{Error, Result};
use crate::instrument::OpCounter;

/// Workload description for a cost query.
#[derive(Debug, Clone, Copy)]
pub struct CostQuery {
    pub input_dim: usize,
    pub hyper_dim: usize,
    pub classes: usize,
    /// Sample count: training samples for training cost, query count for
    /// inference cost, total scanned samples for cached retraining cost.
    pub samples: u64,
    /// Total corrections applied during retraining.
    pub corrections: u64,
    pub kind: EncoderKind,
}

/// Exact operation counts per category; `total` is always the sum of the
/// four parts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CostBreakdown {
    pub encode_ops: u64,
    pub similarity_ops: u64,
    pub update_ops: u64,
    pub activation_ops: u64,
    pub total: u64,
}

impl CostBreakdown {
    fn new(encode_ops: u64, similarity_ops: u64, update_ops: u64, activation_ops: u64) -> Self {
        Self {
            encode_ops,
            similarity_ops,
            update_ops,
            activation_ops,
            total: encode_ops + similarity_ops + update_ops + activation_ops,
        }
    }
}

/// Retraining accounting mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RetrainAccounting {
    /// Each correction re-encodes its sample, scores it, and applies one
    /// prototype update: `P * D * (J + L + 1)`.
    PaperLiteral,
    /// What the model module actually executes: encode once, scan every
    /// sample each epoch, and on each correction update two prototypes and
    /// re-score the sample: `N_scanned * L * D + P * D * (L + 2)`.
    CachedEncodings,
}

fn check_dims(q: &CostQuery, need_classes: bool) -> Result<()> {
    if q.hyper_dim == 0 {
        return Err(Error::InvalidParam("hyper_dim must be >= 1".into()));
    }
    if need_classes && q.classes == 0 {
        return Err(Error::InvalidParam(
            "classes must be >= 1 for inference/retraining queries".into(),
        ));
    }
    Ok(())
}

/// Cost of classifying `samples` queries: encode `J*D`, compare `L*D`, plus
/// `D` activations per query for RFF.
pub fn inference_cost(q: &CostQuery) -> Result<CostBreakdown> {
    check_dims(q, true)?;
    let (j, d, l) = (q.input_dim as u64, q.hyper_dim as u64, q.classes as u64);
    let n = q.samples;
    let activations = match q.kind {
        EncoderKind::Rp => 0,
        EncoderKind::Rff => n * d,
    };
    Ok(CostBreakdown::new(n * j * d, n * l * d, 0, activations))
}

/// Cost of initial training over `samples` samples: encode `N*J*D`,
/// aggregate `N*D`, plus `N*D` activations for RFF.
pub fn training_cost(q: &CostQuery) -> Result<CostBreakdown> {
    check_dims(q, false)?;
    let (j, d) = (q.input_dim as u64, q.hyper_dim as u64);
    let n = q.samples;
    let activations = match q.kind {
        EncoderKind::Rp => 0,
        EncoderKind::Rff => n * d,
    };
    Ok(CostBreakdown::new(n * j * d, 0, n * d, activations))
}

/// Cost of retraining under the selected accounting mode.
pub fn retraining_cost(q: &CostQuery, mode: RetrainAccounting) -> Result<CostBreakdown> {
    check_dims(q, true)?;
    let (j, d, l) = (q.input_dim as u64, q.hyper_dim as u64, q.classes as u64);
    let p = q.corrections;
    Ok(match mode {
        RetrainAccounting::PaperLiteral => CostBreakdown::new(p * j * d, p * l * d, p * d, 0),
        RetrainAccounting::CachedEncodings => {
            // scans of all samples plus a re-score per correction
            CostBreakdown::new(0, (q.samples + p) * l * d, 2 * p * d, 0)
        }
    })
}

/// Which analytic formula a measurement is validated against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostModel {
    Inference,
    Training,
    Retraining(RetrainAccounting),
}

/// One bucket-level disagreement between formula and measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mismatch {
    pub bucket: &'static str,
    pub expected: u64,
    pub measured: u64,
}

/// Outcome of an exact-count validation.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub model: CostModel,
    pub breakdown: CostBreakdown,
    pub mismatches: Vec<Mismatch>,
}

impl ValidationReport {
    pub fn pass(&self) -> bool {
        self.mismatches.is_empty()
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.pass() {
            write!(f, "PASS ({:?}, total {})", self.model, self.breakdown.total)
        } else {
            write!(f, "FAIL ({:?})", self.model)?;
            for m in &self.mismatches {
                write!(
                    f,
                    " [{} expected {} measured {}]",
                    m.bucket, m.expected, m.measured
                )?;
            }
            Ok(())
        }
    }
}

/// Compares a measured counter against the analytic formula with zero
/// tolerance, bucket by bucket: multiply-adds against encode+similarity,
/// add/subs against updates, activations against activations. Norm
/// bookkeeping (`norm_ops`) is outside the formulas and ignored.
pub fn validate_against_measurement(
    q: &CostQuery,
    model: CostModel,
    measured: &OpCounter,
) -> Result<ValidationReport> {
    let breakdown = match model {
        CostModel::Inference => inference_cost(q)?,
        CostModel::Training => training_cost(q)?,
        CostModel::Retraining(mode) => retraining_cost(q, mode)?,
    };
    let expectations = [
        (
            "mul_add",
            breakdown.encode_ops + breakdown.similarity_ops,
            measured.mul_add,
        ),
        ("add_sub", breakdown.update_ops, measured.add_sub),
        ("activation", breakdown.activation_ops, measured.activation),
    ];
    let mismatches = expectations
        .into_iter()
        .filter(|(_, expected, got)| expected != got)
        .map(|(bucket, expected, measured)| Mismatch {
            bucket,
            expected,
            measured,
        })
        .collect();
    Ok(ValidationReport {
        model,
        breakdown,
        mismatches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn query(
        input_dim: usize,
        hyper_dim: usize,
        classes: usize,
        samples: u64,
        corrections: u64,
        kind: EncoderKind,
    ) -> CostQuery {
        CostQuery {
            input_dim,
            hyper_dim,
            classes,
            samples,
            corrections,
            kind,
        }
    }

    #[test]
    fn inference_cost_rp_exact() {
        let b = inference_cost(&query(10, 100, 3, 1, 0, EncoderKind::Rp)).unwrap();
        assert_eq!(b.encode_ops, 1000);
        assert_eq!(b.similarity_ops, 300);
        assert_eq!(b.activation_ops, 0);
        assert_eq!(b.total, 1300);
    }

    #[test]
    fn inference_cost_rff_adds_activations() {
        let b = inference_cost(&query(10, 100, 3, 1, 0, EncoderKind::Rff)).unwrap();
        assert_eq!(b.total, 1400);
    }

    #[test]
    fn inference_rejects_zero_hyper_dim() {
        assert!(inference_cost(&query(10, 0, 3, 1, 0, EncoderKind::Rp)).is_err());
        let unit = inference_cost(&query(10, 1, 3, 1, 0, EncoderKind::Rp)).unwrap();
        assert_eq!(unit.encode_ops, 10);
        assert_eq!(unit.similarity_ops, 3);
    }

    #[test]
    fn training_cost_exact() {
        let b = training_cost(&query(10, 100, 3, 100, 0, EncoderKind::Rp)).unwrap();
        assert_eq!(b.total, 110_000);
        assert_eq!(b.encode_ops, 100_000);
        assert_eq!(b.update_ops, 10_000);
    }

    #[test]
    fn training_cost_zero_samples() {
        let b = training_cost(&query(10, 100, 3, 0, 0, EncoderKind::Rff)).unwrap();
        assert_eq!(b.total, 0);
    }

    #[test]
    fn training_single_sample_is_encode_plus_aggregate() {
        let train = training_cost(&query(10, 100, 3, 1, 0, EncoderKind::Rp)).unwrap();
        let infer = inference_cost(&query(10, 100, 3, 1, 0, EncoderKind::Rp)).unwrap();
        assert_eq!(train.total, infer.encode_ops + 100);
    }

    #[test]
    fn retraining_paper_literal_exact() {
        let b = retraining_cost(
            &query(10, 100, 3, 0, 5, EncoderKind::Rp),
            RetrainAccounting::PaperLiteral,
        )
        .unwrap();
        assert_eq!(b.total, 7000); // 5 * 100 * (10 + 3 + 1)
    }

    #[test]
    fn retraining_zero_corrections_is_free_in_paper_mode() {
        let b = retraining_cost(
            &query(10, 100, 3, 0, 0, EncoderKind::Rp),
            RetrainAccounting::PaperLiteral,
        )
        .unwrap();
        assert_eq!(b.total, 0);
    }

    #[test]
    fn retraining_cached_mode_exact() {
        // one epoch, N=50 scanned, L=3, D=100, P=5
        let b = retraining_cost(
            &query(10, 100, 3, 50, 5, EncoderKind::Rp),
            RetrainAccounting::CachedEncodings,
        )
        .unwrap();
        assert_eq!(b.total, 17_500); // 50*3*100 + 5*100*5
        assert_eq!(b.similarity_ops, 55 * 300);
        assert_eq!(b.update_ops, 1000);
    }

    #[test]
    fn costs_are_linear_in_hyper_dim() {
        for kind in [EncoderKind::Rp, EncoderKind::Rff] {
            let base = training_cost(&query(64, 100, 3, 50, 0, kind)).unwrap();
            for scale in [2u64, 10, 100] {
                let scaled =
                    training_cost(&query(64, 100 * scale as usize, 3, 50, 0, kind)).unwrap();
                assert_eq!(scaled.total, base.total * scale);
            }
        }
    }

    #[test]
    fn validation_reports_mismatches() {
        let q = query(10, 100, 3, 1, 0, EncoderKind::Rp);
        let good = OpCounter {
            mul_add: 1300,
            ..Default::default()
        };
        let report = validate_against_measurement(&q, CostModel::Inference, &good).unwrap();
        assert!(report.pass());

        let bad = OpCounter {
            mul_add: 1299,
            add_sub: 7,
            ..Default::default()
        };
        let report = validate_against_measurement(&q, CostModel::Inference, &bad).unwrap();
        assert!(!report.pass());
        assert_eq!(report.mismatches.len(), 2);
        assert_eq!(report.mismatches[0].bucket, "mul_add");
        assert_eq!(report.mismatches[0].expected, 1300);
        assert_eq!(report.mismatches[0].measured, 1299);
    }

    #[test]
    fn zero_sample_inference_counts_zero() {
        let q = query(10, 100, 3, 0, 0, EncoderKind::Rff);
        let report =
            validate_against_measurement(&q, CostModel::Inference, &OpCounter::default()).unwrap();
        assert!(report.pass());
        assert_eq!(report.breakdown.total, 0);
    }
}
