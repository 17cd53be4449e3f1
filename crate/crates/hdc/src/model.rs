//! Class-prototype model: training, cosine-similarity inference, and
//! mistake-driven retraining.
//!
//! Prototypes accumulate in `f64` and cache their Euclidean norms, so
//! inference reduces to one dot product per class. Retraining scans the
//! training set in order; each misprediction immediately subtracts the
//! sample from the wrongly chosen prototype and adds it to the true one
//! (online perceptron-style corrections, no learning rate, no shuffling).

use crate::encoder::{build_basis, Basis, EncoderConfig};
use crate::error::{Error, Result};
use crate::instrument::{
    count_add_sub, count_mul_add, count_norm_ops, measure_time, scoped_count, OpCounter, Stage,
};
use crate::synthdata::Dataset;
use crate::types::{EncodedBatch, HyperVector, ShapeMeta};

/// One classification outcome: the winning label and the similarity against
/// every prototype.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// Index of the maximum similarity; ties break toward the lowest index.
    pub label: usize,
    /// Cosine similarity per class, clamped to `[-1, 1]`; exactly `0.0` for
    /// a zero-norm prototype or a zero-norm query.
    pub similarities: Vec<f64>,
}

/// Corrections and post-update training accuracy for one retraining epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochOutcome {
    /// Number of prototype corrections applied.
    pub corrections: u64,
    /// Fraction of samples whose prediction is correct after any correction
    /// applied to them (re-evaluated against the updated memory).
    pub accuracy_after: f64,
}

/// Per-epoch retraining history. The sum of `corrections_per_epoch` is the
/// total correction count that drives retraining cost.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RetrainStats {
    pub corrections_per_epoch: Vec<u64>,
    pub train_accuracy_per_epoch: Vec<f64>,
}

impl RetrainStats {
    pub fn epochs_run(&self) -> usize {
        self.corrections_per_epoch.len()
    }

    /// Total corrections across all epochs run.
    pub fn total_corrections(&self) -> u64 {
        self.corrections_per_epoch.iter().sum()
    }
}

/// Trained model: one prototype per class plus cached norms, and the
/// encoder configuration needed to regenerate the basis.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMemory {
    prototypes: Vec<f64>,
    norms: Vec<f64>,
    shape: ShapeMeta,
    encoder: EncoderConfig,
}

impl ClassMemory {
    /// Aggregates encoded samples into class prototypes (superposition).
    ///
    /// Empty classes get zero prototypes. Records one add/sub per element
    /// summed; norms are computed once at the end.
    pub fn train(
        encoder: &EncoderConfig,
        input_dim: usize,
        classes: usize,
        encoded: &EncodedBatch,
        labels: &[u32],
    ) -> Result<Self> {
        encoder.validate()?;
        let shape = ShapeMeta::new(input_dim, encoder.hyper_dim, classes)?;
        if encoded.rows() == 0 {
            return Err(Error::InvalidParam(
                "training requires at least one sample".into(),
            ));
        }
        if encoded.dim() != shape.hyper_dim() {
            return Err(Error::ShapeMismatch {
                what: "encoded batch",
                expected: shape.hyper_dim(),
                got: encoded.dim(),
            });
        }
        if labels.len() != encoded.rows() {
            return Err(Error::ShapeMismatch {
                what: "labels",
                expected: encoded.rows(),
                got: labels.len(),
            });
        }
        for &l in labels {
            if l as usize >= classes {
                return Err(Error::LabelOutOfRange {
                    label: l as usize,
                    classes,
                });
            }
        }

        let d = shape.hyper_dim();
        let mut prototypes = vec![0.0f64; classes * d];
        for (row, &label) in encoded.iter_rows().zip(labels) {
            let proto = &mut prototypes[label as usize * d..(label as usize + 1) * d];
            for (p, h) in proto.iter_mut().zip(row) {
                *p += f64::from(*h);
            }
        }
        count_add_sub(encoded.rows() as u64 * d as u64);

        let mut memory = Self {
            prototypes,
            norms: vec![0.0; classes],
            shape,
            encoder: *encoder,
        };
        memory.recompute_all_norms();
        Ok(memory)
    }

    pub(crate) fn from_parts(
        prototypes: Vec<f64>,
        norms: Vec<f64>,
        shape: ShapeMeta,
        encoder: EncoderConfig,
    ) -> Self {
        debug_assert_eq!(prototypes.len(), shape.classes() * shape.hyper_dim());
        debug_assert_eq!(norms.len(), shape.classes());
        Self {
            prototypes,
            norms,
            shape,
            encoder,
        }
    }

    pub fn shape(&self) -> ShapeMeta {
        self.shape
    }

    pub fn encoder(&self) -> &EncoderConfig {
        &self.encoder
    }

    pub fn prototype(&self, class: usize) -> &[f64] {
        let d = self.shape.hyper_dim();
        &self.prototypes[class * d..(class + 1) * d]
    }

    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    fn recompute_all_norms(&mut self) {
        let d = self.shape.hyper_dim();
        for (l, norm) in self.norms.iter_mut().enumerate() {
            let sq: f64 = self.prototypes[l * d..(l + 1) * d]
                .iter()
                .map(|p| p * p)
                .sum();
            *norm = sq.sqrt();
        }
        count_norm_ops(self.shape.classes() as u64 * (d as u64 + 1));
    }

    fn check_query(&self, h: &HyperVector) -> Result<()> {
        if h.len() != self.shape.hyper_dim() {
            return Err(Error::ShapeMismatch {
                what: "query hypervector",
                expected: self.shape.hyper_dim(),
                got: h.len(),
            });
        }
        Ok(())
    }

    /// Raw dot products of a query against every prototype.
    fn raw_dots(&self, h: &[f32]) -> Vec<f64> {
        let d = self.shape.hyper_dim();
        let dots: Vec<f64> = (0..self.shape.classes())
            .map(|l| {
                self.prototypes[l * d..(l + 1) * d]
                    .iter()
                    .zip(h)
                    .map(|(p, q)| p * f64::from(*q))
                    .sum()
            })
            .collect();
        count_mul_add(self.shape.classes() as u64 * d as u64);
        dots
    }

    fn query_norm(h: &[f32]) -> f64 {
        let sq: f64 = h.iter().map(|v| f64::from(*v) * f64::from(*v)).sum();
        count_norm_ops(h.len() as u64 + 1);
        sq.sqrt()
    }

    #[inline]
    fn cosine(dot: f64, proto_norm: f64, query_norm: f64) -> f64 {
        if proto_norm == 0.0 || query_norm == 0.0 {
            0.0
        } else {
            (dot / (proto_norm * query_norm)).clamp(-1.0, 1.0)
        }
    }

    fn sims_from_dots(&self, dots: &[f64], query_norm: f64) -> Vec<f64> {
        dots.iter()
            .zip(&self.norms)
            .map(|(dot, n)| Self::cosine(*dot, *n, query_norm))
            .collect()
    }

    /// Cosine similarity between the query and one class prototype, using
    /// the cached prototype norm. Records one dot product (D multiply-adds).
    pub fn similarity(&self, h: &HyperVector, class: usize) -> Result<f64> {
        self.check_query(h)?;
        if class >= self.shape.classes() {
            return Err(Error::ClassOutOfRange {
                index: class,
                classes: self.shape.classes(),
            });
        }
        let d = self.shape.hyper_dim();
        let dot: f64 = self.prototypes[class * d..(class + 1) * d]
            .iter()
            .zip(h.values())
            .map(|(p, q)| p * f64::from(*q))
            .sum();
        count_mul_add(d as u64);
        let qn = Self::query_norm(h.values());
        Ok(Self::cosine(dot, self.norms[class], qn))
    }

    /// Classifies a query against all prototypes; total function with
    /// lowest-index tie-breaking.
    pub fn infer(&self, h: &HyperVector) -> Result<Prediction> {
        self.check_query(h)?;
        let qn = Self::query_norm(h.values());
        let dots = self.raw_dots(h.values());
        let similarities = self.sims_from_dots(&dots, qn);
        Ok(Prediction {
            label: argmax_lowest(&similarities),
            similarities,
        })
    }

    /// Classifies every row of an encoded batch.
    pub fn classify_batch(&self, batch: &EncodedBatch) -> Result<Vec<usize>> {
        if batch.dim() != self.shape.hyper_dim() {
            return Err(Error::ShapeMismatch {
                what: "encoded batch",
                expected: self.shape.hyper_dim(),
                got: batch.dim(),
            });
        }
        Ok(batch
            .iter_rows()
            .map(|row| {
                let qn = Self::query_norm(row);
                let dots = self.raw_dots(row);
                let sims = self.sims_from_dots(&dots, qn);
                argmax_lowest(&sims)
            })
            .collect())
    }

    /// One pass of mistake-driven retraining over the samples, in order.
    ///
    /// Each sample is predicted with the current (already partially
    /// updated) memory. On a misprediction the wrong prototype loses the
    /// sample and the true one gains it, the two touched norms are
    /// refreshed, and the sample is re-scored against the updated memory;
    /// the re-scored prediction feeds `accuracy_after`.
    pub fn retrain_epoch(
        &mut self,
        encoded: &EncodedBatch,
        labels: &[u32],
    ) -> Result<EpochOutcome> {
        if encoded.dim() != self.shape.hyper_dim() {
            return Err(Error::ShapeMismatch {
                what: "encoded batch",
                expected: self.shape.hyper_dim(),
                got: encoded.dim(),
            });
        }
        if labels.len() != encoded.rows() {
            return Err(Error::ShapeMismatch {
                what: "labels",
                expected: encoded.rows(),
                got: labels.len(),
            });
        }
        let classes = self.shape.classes();
        for &l in labels {
            if l as usize >= classes {
                return Err(Error::LabelOutOfRange {
                    label: l as usize,
                    classes,
                });
            }
        }

        let d = self.shape.hyper_dim();
        let mut corrections = 0u64;
        let mut correct_after = 0usize;

        for (row, &label) in encoded.iter_rows().zip(labels) {
            let truth = label as usize;
            let qn = Self::query_norm(row);
            let dots = self.raw_dots(row);
            let sims = self.sims_from_dots(&dots, qn);
            let predicted = argmax_lowest(&sims);

            if predicted == truth {
                correct_after += 1;
                continue;
            }
            corrections += 1;

            for (p, h) in self.prototypes[predicted * d..(predicted + 1) * d]
                .iter_mut()
                .zip(row)
            {
                *p -= f64::from(*h);
            }
            for (p, h) in self.prototypes[truth * d..(truth + 1) * d]
                .iter_mut()
                .zip(row)
            {
                *p += f64::from(*h);
            }
            count_add_sub(2 * d as u64);

            // Incremental norm refresh from the pre-update dot products:
            // |C -+ H|^2 = |C|^2 -+ 2 C.H + |H|^2. Only the two roots are
            // new work; the epoch-end recompute bounds accumulated drift.
            let hsq = qn * qn;
            let wrong_sq = self.norms[predicted] * self.norms[predicted] - 2.0 * dots[predicted]
                + hsq;
            let true_sq = self.norms[truth] * self.norms[truth] + 2.0 * dots[truth] + hsq;
            self.norms[predicted] = wrong_sq.max(0.0).sqrt();
            self.norms[truth] = true_sq.max(0.0).sqrt();
            count_norm_ops(2);

            // Re-score against the updated memory; this post-update
            // prediction is what the per-epoch training accuracy reports.
            let dots_after = self.raw_dots(row);
            let sims_after = self.sims_from_dots(&dots_after, qn);
            if argmax_lowest(&sims_after) == truth {
                correct_after += 1;
            }
        }

        self.recompute_all_norms();

        let accuracy_after = if encoded.rows() == 0 {
            1.0
        } else {
            correct_after as f64 / encoded.rows() as f64
        };
        Ok(EpochOutcome {
            corrections,
            accuracy_after,
        })
    }
}

/// Index of the maximum value; ties break toward the lowest index.
fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Everything `fit` produces: the model, retraining history, the basis, and
/// the telemetry the tuner's metrics are built from.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub memory: ClassMemory,
    pub stats: RetrainStats,
    pub basis: Basis,
    /// Cached training-set encodings, reusable for evaluation on the
    /// training split.
    pub encoded: EncodedBatch,
    /// Wall-clock seconds for encoding, prototype construction, and all
    /// retraining epochs (basis generation excluded).
    pub train_time_s: f64,
    /// Wall-clock seconds spent generating the basis, reported separately.
    pub basis_time_s: f64,
    pub train_ops: OpCounter,
    pub retrain_ops: OpCounter,
}

/// Full training pipeline: build the basis, encode the training set once,
/// aggregate prototypes, then run mistake-driven retraining epochs.
///
/// With `early_stop`, retraining ends after the first epoch with zero
/// corrections. Encodings are cached and reused across epochs.
pub fn fit(
    dataset: &Dataset,
    config: &EncoderConfig,
    epochs: usize,
    early_stop: bool,
) -> Result<FitResult> {
    let (basis, basis_time) = measure_time(|| build_basis(config, dataset.input_dim()));
    let basis = basis?;

    let ((train_result, train_ops), train_span) = measure_time(|| {
        scoped_count(Stage::Train, || -> Result<_> {
            let encoded = basis.encode_matrix(dataset.features(), dataset.samples())?;
            let memory = ClassMemory::train(
                config,
                dataset.input_dim(),
                dataset.classes(),
                &encoded,
                dataset.labels(),
            )?;
            Ok((encoded, memory))
        })
    });
    let (encoded, mut memory) = train_result?;

    let ((stats_result, retrain_ops), retrain_span) = measure_time(|| {
        scoped_count(Stage::Retrain, || -> Result<RetrainStats> {
            let mut stats = RetrainStats::default();
            for _ in 0..epochs {
                let outcome = memory.retrain_epoch(&encoded, dataset.labels())?;
                stats.corrections_per_epoch.push(outcome.corrections);
                stats.train_accuracy_per_epoch.push(outcome.accuracy_after);
                if early_stop && outcome.corrections == 0 {
                    break;
                }
            }
            Ok(stats)
        })
    });
    let stats = stats_result?;

    Ok(FitResult {
        memory,
        stats,
        basis,
        encoded,
        train_time_s: (train_span + retrain_span).as_secs_f64(),
        basis_time_s: basis_time.as_secs_f64(),
        train_ops,
        retrain_ops,
    })
}
