//! Exact operation counting, wall-clock timing, and the energy proxy.
//!
//! Counts are recorded where the work happens, with the exact trip count the
//! loops execute, so the analytic cost model can be validated against them
//! with zero tolerance. The convention: one multiply-add is one op; norms
//! charge one op per element plus one for the root, all into `norm_ops`.
//!
//! Energy is a declared linear functional of the counters, not measured
//! watts; an external meter can be plugged in through [`EnergyProbe`]
//! without changing any contract.

use std::cell::RefCell;
use std::ops::{Add, AddAssign};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

/// Pipeline stage a counting scope is attributed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Encode,
    Train,
    Infer,
    Retrain,
}

/// Exact operation counts for one scope.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounter {
    /// Fused multiply-add equivalents (dot products, projections).
    pub mul_add: u64,
    /// Plain vector additions/subtractions (bundling, prototype updates).
    pub add_sub: u64,
    /// Nonlinear activations (cosine evaluations).
    pub activation: u64,
    /// Norm work: one per element plus one per root.
    pub norm_ops: u64,
}

impl OpCounter {
    /// Every op that participates in the analytic cost formulas
    /// (norm bookkeeping is reported separately).
    pub fn formula_ops(&self) -> u64 {
        self.mul_add + self.add_sub + self.activation
    }

    /// Grand total across all buckets.
    pub fn total(&self) -> u64 {
        self.formula_ops() + self.norm_ops
    }

    pub fn is_zero(&self) -> bool {
        *self == OpCounter::default()
    }
}

impl Add for OpCounter {
    type Output = OpCounter;
    fn add(self, rhs: OpCounter) -> OpCounter {
        OpCounter {
            mul_add: self.mul_add + rhs.mul_add,
            add_sub: self.add_sub + rhs.add_sub,
            activation: self.activation + rhs.activation,
            norm_ops: self.norm_ops + rhs.norm_ops,
        }
    }
}

impl AddAssign for OpCounter {
    fn add_assign(&mut self, rhs: OpCounter) {
        *self = *self + rhs;
    }
}

/// Per-stage counters as reported in metrics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageOps {
    pub encode: OpCounter,
    pub train: OpCounter,
    pub infer: OpCounter,
    pub retrain: OpCounter,
}

impl StageOps {
    /// Counter for E_train: everything spent during training, i.e. the
    /// train and retrain stages.
    pub fn training_total(&self) -> OpCounter {
        self.train + self.retrain
    }
}

struct Frame {
    stage: Stage,
    ops: OpCounter,
}

thread_local! {
    static SCOPES: RefCell<Vec<Frame>> = const { RefCell::new(Vec::new()) };
    static SCOPE_LOG: RefCell<Vec<(Stage, OpCounter)>> = const { RefCell::new(Vec::new()) };
}

/// Runs `body` inside a counting scope labelled `stage` and returns its
/// result together with the exact operations the body executed.
///
/// Scopes nest additively: when an inner scope closes, its counts fold into
/// the enclosing scope. Every closed scope is also appended to a thread-local
/// log retrievable with [`take_scope_log`].
pub fn scoped_count<T>(stage: Stage, body: impl FnOnce() -> T) -> (T, OpCounter) {
    struct Guard;
    impl Drop for Guard {
        fn drop(&mut self) {
            // Keeps the stack balanced if `body` panics.
            SCOPES.with(|s| {
                let mut stack = s.borrow_mut();
                if std::thread::panicking() {
                    stack.pop();
                }
            });
        }
    }

    SCOPES.with(|s| {
        s.borrow_mut().push(Frame {
            stage,
            ops: OpCounter::default(),
        })
    });
    let guard = Guard;
    let out = body();
    std::mem::forget(guard);

    let frame = SCOPES.with(|s| s.borrow_mut().pop().expect("scope stack underflow"));
    SCOPES.with(|s| {
        if let Some(parent) = s.borrow_mut().last_mut() {
            parent.ops += frame.ops;
        }
    });
    SCOPE_LOG.with(|l| l.borrow_mut().push((frame.stage, frame.ops)));
    (out, frame.ops)
}

/// Drains the log of closed scopes on this thread (inner scopes first).
pub fn take_scope_log() -> Vec<(Stage, OpCounter)> {
    SCOPE_LOG.with(|l| std::mem::take(&mut *l.borrow_mut()))
}

#[inline]
fn record(f: impl FnOnce(&mut OpCounter)) {
    SCOPES.with(|s| {
        if let Some(top) = s.borrow_mut().last_mut() {
            f(&mut top.ops);
        }
    });
}

#[inline]
pub(crate) fn count_mul_add(n: u64) {
    record(|c| c.mul_add += n);
}

#[inline]
pub(crate) fn count_add_sub(n: u64) {
    record(|c| c.add_sub += n);
}

#[inline]
pub(crate) fn count_activation(n: u64) {
    record(|c| c.activation += n);
}

#[inline]
pub(crate) fn count_norm_ops(n: u64) {
    record(|c| c.norm_ops += n);
}

/// Runs `body` and returns its result plus elapsed wall-clock time from the
/// monotonic clock.
pub fn measure_time<T>(body: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = body();
    (out, start.elapsed())
}

/// Median wall-clock milliseconds over `reps` runs of `body` (the result of
/// the last run is returned). Timing checks use medians because desk-scale
/// machines are noisy.
pub fn median_time_ms<T>(reps: usize, mut body: impl FnMut() -> T) -> (T, f64) {
    assert!(reps >= 1);
    let mut times = Vec::with_capacity(reps);
    let mut out = None;
    for _ in 0..reps {
        let (v, t) = measure_time(&mut body);
        out = Some(v);
        times.push(t.as_secs_f64() * 1e3);
    }
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    (out.unwrap(), times[times.len() / 2])
}

/// Linear op-count-to-joules proxy.
///
/// Adds, subtracts, and norm element work are charged at the multiply-add
/// rate; activations carry their own (heavier) constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyModel {
    pub joules_per_mul_add: f64,
    pub joules_per_activation: f64,
}

impl Default for EnergyModel {
    fn default() -> Self {
        Self {
            joules_per_mul_add: 1e-9,
            joules_per_activation: 5e-9,
        }
    }
}

impl EnergyModel {
    /// Deterministic joules for a counter; strictly monotone in every field.
    pub fn energy(&self, counter: &OpCounter) -> f64 {
        self.joules_per_mul_add
            * (counter.mul_add as f64 + counter.add_sub as f64 + counter.norm_ops as f64)
            + self.joules_per_activation * counter.activation as f64
    }
}

/// Optional external meter: a callback returning cumulative joules, sampled
/// at scope boundaries. When absent, the proxy model is used.
pub trait EnergyMeter {
    fn cumulative_joules(&self) -> f64;
}

/// Samples an optional meter around a measured region and falls back to the
/// proxy model at `finish`.
pub struct EnergyProbe<'a> {
    meter: Option<&'a dyn EnergyMeter>,
    start_joules: f64,
}

impl<'a> EnergyProbe<'a> {
    pub fn begin(meter: Option<&'a dyn EnergyMeter>) -> Self {
        Self {
            meter,
            start_joules: meter.map_or(0.0, EnergyMeter::cumulative_joules),
        }
    }

    pub fn finish(self, model: &EnergyModel, counter: &OpCounter) -> f64 {
        match self.meter {
            Some(m) => m.cumulative_joules() - self.start_joules,
            None => model.energy(counter),
        }
    }
}

/// The four evaluation metrics for one trained-and-tested configuration,
/// plus the exact per-stage op counts behind them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsRecord {
    /// Fraction of correctly classified test samples, in `[0, 1]`.
    pub accuracy: f64,
    /// Total time to encode and classify the entire test set, milliseconds.
    pub inference_time_ms: f64,
    /// Time to encode the training set, build prototypes, and run all
    /// retraining epochs, seconds. Basis generation is excluded.
    pub train_time_s: f64,
    /// Energy spent during training (train + retrain stages).
    pub energy_j: f64,
    /// Exact operation counts per stage.
    pub ops: StageOps,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_body_counts_zero() {
        let ((), ops) = scoped_count(Stage::Encode, || {});
        assert!(ops.is_zero());
    }

    #[test]
    fn scopes_nest_additively() {
        let (_, parent) = scoped_count(Stage::Train, || {
            let (_, a) = scoped_count(Stage::Encode, || count_mul_add(10));
            let (_, b) = scoped_count(Stage::Encode, || count_mul_add(32));
            count_add_sub(5);
            assert_eq!(a.mul_add, 10);
            assert_eq!(b.mul_add, 32);
        });
        assert_eq!(parent.mul_add, 42);
        assert_eq!(parent.add_sub, 5);
    }

    #[test]
    fn counting_outside_any_scope_is_noop() {
        count_mul_add(1000);
        let ((), ops) = scoped_count(Stage::Infer, || {});
        assert!(ops.is_zero());
    }

    #[test]
    fn scope_log_records_closed_scopes() {
        take_scope_log();
        scoped_count(Stage::Infer, || count_mul_add(7));
        let log = take_scope_log();
        assert_eq!(log.len(), 1);
        assert_eq!(log[0].0, Stage::Infer);
        assert_eq!(log[0].1.mul_add, 7);
        assert!(take_scope_log().is_empty());
    }

    #[test]
    fn counting_is_deterministic() {
        let run = || {
            scoped_count(Stage::Train, || {
                for i in 0..100 {
                    count_mul_add(i);
                    count_norm_ops(1);
                }
            })
            .1
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn elapsed_is_nonnegative() {
        let ((), t) = measure_time(|| {});
        assert!(t.as_secs_f64() >= 0.0);
    }

    #[test]
    fn energy_zero_counter_is_zero() {
        let m = EnergyModel::default();
        assert_eq!(m.energy(&OpCounter::default()), 0.0);
    }

    #[test]
    fn energy_default_rate() {
        let m = EnergyModel::default();
        let c = OpCounter {
            mul_add: 1_000_000_000,
            ..Default::default()
        };
        assert!((m.energy(&c) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn energy_is_linear() {
        let m = EnergyModel::default();
        let c = OpCounter {
            mul_add: 123,
            add_sub: 45,
            activation: 6,
            norm_ops: 78,
        };
        let doubled = c + c;
        assert!((m.energy(&doubled) - 2.0 * m.energy(&c)).abs() < 1e-18);
    }

    #[test]
    fn probe_prefers_external_meter() {
        struct Fake(std::cell::Cell<f64>);
        impl EnergyMeter for Fake {
            fn cumulative_joules(&self) -> f64 {
                let v = self.0.get();
                self.0.set(v + 2.5);
                v
            }
        }
        let meter = Fake(std::cell::Cell::new(10.0));
        let probe = EnergyProbe::begin(Some(&meter));
        let joules = probe.finish(&EnergyModel::default(), &OpCounter::default());
        assert!((joules - 2.5).abs() < 1e-12);

        let probe = EnergyProbe::begin(None);
        let c = OpCounter {
            mul_add: 1000,
            ..Default::default()
        };
        assert!((probe.finish(&EnergyModel::default(), &c) - 1e-6).abs() < 1e-18);
    }

    #[test]
    fn median_time_uses_middle_value() {
        let mut calls = 0;
        let (_, med) = median_time_ms(5, || {
            calls += 1;
        });
        assert_eq!(calls, 5);
        assert!(med >= 0.0);
    }
}
