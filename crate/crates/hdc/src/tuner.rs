//! Constrained multi-objective configuration search over
//! `(kind, hyper_dim, sigma_b)`.
//!
//! The search maximizes accuracy subject to accuracy/latency/time/energy
//! constraints. The first ten episodes are space-filling random draws
//! (hyper_dim log-uniform); afterwards, per-kind Gaussian-process
//! surrogates (Matern-5/2 kernel over the unit square of normalized log
//! dimension and sigma, fixed length scale 0.3, observation noise 1e-4,
//! constant mean) model accuracy and each cost metric. The acquisition is
//! expected improvement of accuracy over the best feasible incumbent,
//! weighted by the product of per-constraint feasibility probabilities, and
//! is maximized over 1024 seeded candidates per kind. A Pareto front over
//! all four metrics is tracked for reporting.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::encoder::{EncoderConfig, EncoderKind};
use crate::error::{Error, Result};
use crate::instrument::{
    measure_time, scoped_count, EnergyMeter, EnergyModel, EnergyProbe, MetricsRecord, Stage,
    StageOps,
};
use crate::model::fit;
use crate::rng::{derive_seed, make_rng, Seed, StreamRng};
use crate::synthdata::Split;

/// Random episodes before the surrogate takes over.
const STARTUP_TRIALS: usize = 10;
/// Acquisition candidates drawn per kind per episode.
const CANDIDATES_PER_KIND: usize = 1024;
/// Fixed Matern length scale per normalized input dimension.
const LENGTH_SCALE: f64 = 0.3;
/// GP observation noise variance.
const NOISE_VAR: f64 = 1e-4;
/// Retraining epochs per evaluation.
const TUNE_EPOCHS: usize = 20;
/// Default episode budget.
pub const DEFAULT_EPISODES: usize = 50;

const STREAM_SUGGEST: u32 = 30;

/// Search domain. `hyper_dim` is searched in log scale.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    pub kinds: Vec<EncoderKind>,
    pub dim_range: (usize, usize),
    pub sigma_range: (f64, f64),
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            kinds: vec![EncoderKind::Rp, EncoderKind::Rff],
            dim_range: (100, 50_000),
            sigma_range: (0.01, 2.0),
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        if self.kinds.is_empty() {
            return Err(Error::InvalidParam("search space has no encoder kinds".into()));
        }
        if self.dim_range.0 < 1 || self.dim_range.0 > self.dim_range.1 {
            return Err(Error::InvalidParam(format!(
                "bad hyper_dim range [{}, {}]",
                self.dim_range.0, self.dim_range.1
            )));
        }
        if !(self.sigma_range.0 > 0.0) || self.sigma_range.0 > self.sigma_range.1 {
            return Err(Error::InvalidParam(format!(
                "bad sigma range [{}, {}]",
                self.sigma_range.0, self.sigma_range.1
            )));
        }
        Ok(())
    }

    /// Whether a configuration lies inside this space.
    pub fn contains(&self, theta: &Theta) -> bool {
        self.kinds.contains(&theta.kind)
            && (self.dim_range.0..=self.dim_range.1).contains(&theta.hyper_dim)
            && (self.sigma_range.0..=self.sigma_range.1).contains(&theta.sigma_b)
    }
}

/// Feasibility bounds; any bound may be infinite (unconstrained).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constraints {
    pub acc_min: f64,
    pub inference_max_ms: f64,
    pub train_max_s: f64,
    pub energy_max_j: f64,
}

impl Default for Constraints {
    fn default() -> Self {
        Self {
            acc_min: 0.0,
            inference_max_ms: f64::INFINITY,
            train_max_s: f64::INFINITY,
            energy_max_j: f64::INFINITY,
        }
    }
}

impl Constraints {
    pub fn satisfied(&self, m: &MetricsRecord) -> bool {
        m.accuracy >= self.acc_min
            && m.inference_time_ms <= self.inference_max_ms
            && m.train_time_s <= self.train_max_s
            && m.energy_j <= self.energy_max_j
    }
}

/// One point of the search space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Theta {
    pub kind: EncoderKind,
    pub hyper_dim: usize,
    pub sigma_b: f64,
}

/// One completed evaluation.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub index: usize,
    pub theta: Theta,
    pub metrics: MetricsRecord,
    pub feasible: bool,
    pub rng_seed: Seed,
}

/// Indices of trials not dominated in
/// (accuracy up, inference time down, train time down, energy down).
/// Only feasible trials are admitted.
#[derive(Debug, Clone, Default)]
pub struct ParetoFront {
    members: Vec<usize>,
}

fn dominates(a: &MetricsRecord, b: &MetricsRecord) -> bool {
    let no_worse = a.accuracy >= b.accuracy
        && a.inference_time_ms <= b.inference_time_ms
        && a.train_time_s <= b.train_time_s
        && a.energy_j <= b.energy_j;
    let strictly_better = a.accuracy > b.accuracy
        || a.inference_time_ms < b.inference_time_ms
        || a.train_time_s < b.train_time_s
        || a.energy_j < b.energy_j;
    no_worse && strictly_better
}

fn exact_tie(a: &MetricsRecord, b: &MetricsRecord) -> bool {
    a.accuracy == b.accuracy
        && a.inference_time_ms == b.inference_time_ms
        && a.train_time_s == b.train_time_s
        && a.energy_j == b.energy_j
}

impl ParetoFront {
    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Standard four-objective dominance filtering; an exact tie on all
    /// four metrics keeps the earlier trial.
    pub fn insert(&mut self, trials: &[TrialRecord], index: usize) {
        let candidate = &trials[index];
        if !candidate.feasible {
            return;
        }
        for &m in &self.members {
            let member = &trials[m].metrics;
            if dominates(member, &candidate.metrics) || exact_tie(member, &candidate.metrics) {
                return;
            }
        }
        self.members
            .retain(|&m| !dominates(&candidate.metrics, &trials[m].metrics));
        self.members.push(index);
    }
}

/// Free-function form of [`ParetoFront::insert`].
pub fn pareto_insert(front: &mut ParetoFront, trials: &[TrialRecord], index: usize) {
    front.insert(trials, index);
}

/// The feasible trial with maximum accuracy; ties go to lower energy, then
/// to the earlier trial.
pub fn best_feasible(trials: &[TrialRecord]) -> Option<&TrialRecord> {
    trials
        .iter()
        .filter(|t| t.feasible)
        .fold(None, |best: Option<&TrialRecord>, t| match best {
            None => Some(t),
            Some(b) => {
                if t.metrics.accuracy > b.metrics.accuracy
                    || (t.metrics.accuracy == b.metrics.accuracy
                        && t.metrics.energy_j < b.metrics.energy_j)
                {
                    Some(t)
                } else {
                    Some(b)
                }
            }
        })
}

// ---------------------------------------------------------------------------
// Gaussian process surrogate
// ---------------------------------------------------------------------------

const SQRT_5: f64 = 2.236_067_977_499_79;

fn matern52(a: [f64; 2], b: [f64; 2]) -> f64 {
    let mut r2 = 0.0;
    for k in 0..2 {
        let d = (a[k] - b[k]) / LENGTH_SCALE;
        r2 += d * d;
    }
    let r = r2.sqrt();
    (1.0 + SQRT_5 * r + 5.0 / 3.0 * r2) * (-SQRT_5 * r).exp()
}

struct Gp {
    inputs: Vec<[f64; 2]>,
    alpha: DVector<f64>,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    y_mean: f64,
    y_std: f64,
}

impl Gp {
    /// Fits on standardized targets with unit signal variance and a
    /// constant (zero) mean; no hyperparameter estimation, so the fit is
    /// deterministic for a given history.
    fn fit(inputs: Vec<[f64; 2]>, targets: &[f64]) -> Option<Gp> {
        let n = targets.len();
        if n == 0 {
            return None;
        }
        let y_mean = targets.iter().sum::<f64>() / n as f64;
        let var = targets.iter().map(|y| (y - y_mean).powi(2)).sum::<f64>() / n as f64;
        let y_std = var.sqrt().max(1e-6);
        let standardized: Vec<f64> = targets.iter().map(|y| (y - y_mean) / y_std).collect();

        let k = DMatrix::from_fn(n, n, |i, j| {
            let v = matern52(inputs[i], inputs[j]);
            if i == j {
                v + NOISE_VAR
            } else {
                v
            }
        });
        let chol = nalgebra::Cholesky::new(k)?;
        let alpha = chol.solve(&DVector::from_column_slice(&standardized));
        Some(Gp {
            inputs,
            alpha,
            chol,
            y_mean,
            y_std,
        })
    }

    /// Posterior mean and standard deviation in raw target units.
    fn predict(&self, x: [f64; 2]) -> (f64, f64) {
        let k_star = DVector::from_fn(self.inputs.len(), |i, _| matern52(x, self.inputs[i]));
        let mean = k_star.dot(&self.alpha);
        let v = self.chol.solve(&k_star);
        let var = (1.0 - k_star.dot(&v)).max(1e-12);
        (
            self.y_mean + self.y_std * mean,
            self.y_std * var.sqrt(),
        )
    }
}

fn norm_pdf(x: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal CDF (Hart rational approximation, ~1e-7 absolute).
fn norm_cdf(x: f64) -> f64 {
    if x < -8.0 {
        return 0.0;
    }
    if x > 8.0 {
        return 1.0;
    }
    let t = 1.0 / (1.0 + 0.231_641_9 * x.abs());
    let poly = t
        * (0.319_381_530
            + t * (-0.356_563_782 + t * (1.781_477_937 + t * (-1.821_255_978 + t * 1.330_274_429))));
    let cdf = 1.0 - norm_pdf(x.abs()) * poly;
    if x >= 0.0 {
        cdf
    } else {
        1.0 - cdf
    }
}

/// Expected improvement for maximization.
fn expected_improvement(mean: f64, std: f64, incumbent: f64) -> f64 {
    if std < 1e-12 {
        return (mean - incumbent).max(0.0);
    }
    let z = (mean - incumbent) / std;
    ((mean - incumbent) * norm_cdf(z) + std * norm_pdf(z)).max(0.0)
}

// ---------------------------------------------------------------------------
// Suggestion
// ---------------------------------------------------------------------------

fn normalized(value: f64, lo: f64, hi: f64) -> f64 {
    if hi - lo <= 0.0 {
        0.5
    } else {
        (value - lo) / (hi - lo)
    }
}

fn gp_input(space: &SearchSpace, theta: &Theta) -> [f64; 2] {
    [
        normalized(
            (theta.hyper_dim as f64).ln(),
            (space.dim_range.0 as f64).ln(),
            (space.dim_range.1 as f64).ln(),
        ),
        normalized(theta.sigma_b, space.sigma_range.0, space.sigma_range.1),
    ]
}

fn random_theta(space: &SearchSpace, kinds: &[EncoderKind], rng: &mut StreamRng) -> Result<Theta> {
    let kind = kinds[rng.below(kinds.len() as u64) as usize];
    let (dmin, dmax) = space.dim_range;
    let hyper_dim = if dmin == dmax {
        dmin
    } else {
        let ln = rng.uniform((dmin as f64).ln(), (dmax as f64).ln())?;
        (ln.exp().round() as usize).clamp(dmin, dmax)
    };
    let (smin, smax) = space.sigma_range;
    let sigma_b = if smin == smax {
        smin
    } else {
        rng.uniform(smin, smax)?
    };
    Ok(Theta {
        kind,
        hyper_dim,
        sigma_b,
    })
}

struct KindSurrogate {
    kind: EncoderKind,
    accuracy: Gp,
    ln_inference: Gp,
    ln_train: Gp,
    ln_energy: Gp,
}

fn fit_surrogate(
    space: &SearchSpace,
    kind: EncoderKind,
    history: &[TrialRecord],
) -> Option<KindSurrogate> {
    let rows: Vec<&TrialRecord> = history.iter().filter(|t| t.theta.kind == kind).collect();
    if rows.is_empty() {
        return None;
    }
    let inputs: Vec<[f64; 2]> = rows.iter().map(|t| gp_input(space, &t.theta)).collect();
    let acc: Vec<f64> = rows.iter().map(|t| t.metrics.accuracy).collect();
    let ln = |v: f64| v.max(1e-12).ln();
    let infer: Vec<f64> = rows.iter().map(|t| ln(t.metrics.inference_time_ms)).collect();
    let train: Vec<f64> = rows.iter().map(|t| ln(t.metrics.train_time_s)).collect();
    let energy: Vec<f64> = rows.iter().map(|t| ln(t.metrics.energy_j)).collect();
    Some(KindSurrogate {
        kind,
        accuracy: Gp::fit(inputs.clone(), &acc)?,
        ln_inference: Gp::fit(inputs.clone(), &infer)?,
        ln_train: Gp::fit(inputs.clone(), &train)?,
        ln_energy: Gp::fit(inputs, &energy)?,
    })
}

impl KindSurrogate {
    /// Product of per-constraint satisfaction probabilities at `x`.
    fn feasibility(&self, x: [f64; 2], constraints: &Constraints) -> f64 {
        let mut p = 1.0;
        if constraints.acc_min > 0.0 {
            let (mean, std) = self.accuracy.predict(x);
            p *= norm_cdf((mean - constraints.acc_min) / std.max(1e-12));
        }
        for (gp, bound) in [
            (&self.ln_inference, constraints.inference_max_ms),
            (&self.ln_train, constraints.train_max_s),
            (&self.ln_energy, constraints.energy_max_j),
        ] {
            if bound.is_finite() {
                let (mean, std) = gp.predict(x);
                p *= norm_cdf((bound.max(1e-12).ln() - mean) / std.max(1e-12));
            }
        }
        p
    }
}

/// Proposes the next configuration to evaluate.
///
/// The first [`STARTUP_TRIALS`] suggestions are random draws; afterwards,
/// feasibility-weighted expected improvement over per-kind GP surrogates,
/// maximized over seeded candidates. Ties break by lower predicted energy,
/// then lower dimension, then kind declaration order.
pub fn suggest(
    history: &[TrialRecord],
    space: &SearchSpace,
    constraints: &Constraints,
    rng: &mut StreamRng,
) -> Result<Theta> {
    space.validate()?;
    if history.len() < STARTUP_TRIALS {
        return random_theta(space, &space.kinds, rng);
    }

    // A kind never tried yet gets explored before the surrogates weigh in.
    let unseen: Vec<EncoderKind> = space
        .kinds
        .iter()
        .copied()
        .filter(|k| !history.iter().any(|t| t.theta.kind == *k))
        .collect();
    if !unseen.is_empty() {
        return random_theta(space, &unseen, rng);
    }

    let incumbent = history
        .iter()
        .filter(|t| t.feasible)
        .map(|t| t.metrics.accuracy)
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))));

    let surrogates: Vec<KindSurrogate> = space
        .kinds
        .iter()
        .filter_map(|&kind| fit_surrogate(space, kind, history))
        .collect();
    if surrogates.is_empty() {
        return random_theta(space, &space.kinds, rng);
    }

    let mut best: Option<(f64, f64, usize, usize, Theta)> = None; // (acq, energy, dim, kind order)
    for (kind_order, surrogate) in surrogates.iter().enumerate() {
        for _ in 0..CANDIDATES_PER_KIND {
            let theta = random_theta(space, &[surrogate.kind], rng)?;
            let x = gp_input(space, &theta);
            let acq = match incumbent {
                Some(best_acc) => {
                    let (mean, std) = surrogate.accuracy.predict(x);
                    expected_improvement(mean, std, best_acc)
                        * surrogate.feasibility(x, constraints)
                }
                // No feasible point yet: chase feasibility alone.
                None => surrogate.feasibility(x, constraints),
            };
            let (ln_energy, _) = surrogate.ln_energy.predict(x);
            let candidate = (acq, ln_energy.exp(), theta.hyper_dim, kind_order, theta);
            let better = match &best {
                None => true,
                Some((b_acq, b_energy, b_dim, b_kind, _)) => {
                    (candidate.0, *b_energy, *b_dim, *b_kind)
                        > (*b_acq, candidate.1, candidate.2, candidate.3)
                    // tuple comparison reads: higher acq wins; on exact acq
                    // ties, lower energy, then lower dim, then earlier kind
                }
            };
            if better {
                best = Some(candidate);
            }
        }
    }
    Ok(best.expect("candidate set is never empty").4)
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

/// Runs the full train/test pipeline for one configuration and measures
/// the four metrics.
///
/// Training time and energy cover the fit (encoding, aggregation,
/// retraining; basis generation excluded). Inference time is the median
/// over `rep` timed repetitions of encoding plus classifying the entire
/// test set; operation counts come from a single counted run.
pub fn evaluate(
    theta: &Theta,
    split: &Split,
    epochs: usize,
    rep: usize,
    seed: Seed,
    early_stop: bool,
    energy_model: &EnergyModel,
    meter: Option<&dyn EnergyMeter>,
) -> Result<MetricsRecord> {
    let config = EncoderConfig {
        kind: theta.kind,
        hyper_dim: theta.hyper_dim,
        sigma_b: theta.sigma_b,
        seed,
    };
    let probe = EnergyProbe::begin(meter);
    let fitted = fit(&split.train, &config, epochs, early_stop)?;
    let energy_j = probe.finish(energy_model, &(fitted.train_ops + fitted.retrain_ops));

    let test = &split.test;
    let run_inference = || -> Result<Vec<usize>> {
        let encoded = fitted.basis.encode_matrix(test.features(), test.samples())?;
        fitted.memory.classify_batch(&encoded)
    };

    let ((predictions, infer_ops), first) =
        measure_time(|| scoped_count(Stage::Infer, run_inference));
    let predictions = predictions?;
    let mut times_ms = vec![first.as_secs_f64() * 1e3];
    for _ in 1..rep.max(1) {
        let (r, t) = measure_time(run_inference);
        r?;
        times_ms.push(t.as_secs_f64() * 1e3);
    }
    times_ms.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let inference_time_ms = times_ms[times_ms.len() / 2];

    let correct = predictions
        .iter()
        .zip(test.labels())
        .filter(|(p, l)| **p == **l as usize)
        .count();
    let accuracy = if test.samples() == 0 {
        0.0
    } else {
        correct as f64 / test.samples() as f64
    };

    Ok(MetricsRecord {
        accuracy,
        inference_time_ms,
        train_time_s: fitted.train_time_s,
        energy_j,
        ops: StageOps {
            encode: Default::default(),
            train: fitted.train_ops,
            infer: infer_ops,
            retrain: fitted.retrain_ops,
        },
    })
}

/// Flat JSON schema of one trial-log line.
#[derive(Serialize)]
struct TrialLogLine<'a> {
    index: usize,
    kind: &'a str,
    dim: usize,
    sigma_b: f64,
    accuracy: f64,
    inference_time_ms: f64,
    train_time_s: f64,
    energy_j: f64,
    feasible: bool,
    seed: u64,
}

/// Serializes one trial as a JSON line (the append-only trial log format).
pub fn trial_log_line(trial: &TrialRecord) -> String {
    serde_json::to_string(&TrialLogLine {
        index: trial.index,
        kind: trial.theta.kind.as_str(),
        dim: trial.theta.hyper_dim,
        sigma_b: trial.theta.sigma_b,
        accuracy: trial.metrics.accuracy,
        inference_time_ms: trial.metrics.inference_time_ms,
        train_time_s: trial.metrics.train_time_s,
        energy_j: trial.metrics.energy_j,
        feasible: trial.feasible,
        seed: trial.rng_seed.0,
    })
    .expect("trial log serialization cannot fail")
}

/// Full search trajectory plus the final front.
#[derive(Debug, Clone)]
pub struct TuneOutcome {
    pub trials: Vec<TrialRecord>,
    pub front: ParetoFront,
}

/// Core episode loop with an injectable evaluation function (used by tests
/// to substitute closed-form objectives).
///
/// Episode `i` derives its proposal stream and trial seed from `(seed, i)`
/// alone, so an interrupted run replayed from its log continues bitwise
/// identically.
pub fn run_with<F>(
    space: &SearchSpace,
    constraints: &Constraints,
    episodes: usize,
    seed: Seed,
    mut log: Option<&mut dyn Write>,
    mut eval_fn: F,
) -> Result<TuneOutcome>
where
    F: FnMut(&Theta, Seed) -> Result<MetricsRecord>,
{
    space.validate()?;
    let mut trials: Vec<TrialRecord> = Vec::with_capacity(episodes);
    let mut front = ParetoFront::default();

    for index in 0..episodes {
        let mut rng = make_rng(derive_seed(seed, 2 * index as u64), STREAM_SUGGEST);
        let theta = suggest(&trials, space, constraints, &mut rng)?;
        let rng_seed = derive_seed(seed, 2 * index as u64 + 1);
        let metrics = eval_fn(&theta, rng_seed)?;
        let feasible = constraints.satisfied(&metrics);
        let record = TrialRecord {
            index,
            theta,
            metrics,
            feasible,
            rng_seed,
        };
        if let Some(w) = log.as_deref_mut() {
            writeln!(w, "{}", trial_log_line(&record))
                .and_then(|_| w.flush())
                .map_err(|e| Error::io("trial log", e))?;
        }
        trials.push(record);
        front.insert(&trials, index);
    }
    Ok(TuneOutcome { trials, front })
}

/// Runs the search against real data: suggest, evaluate, record, repeat.
pub fn run(
    space: &SearchSpace,
    constraints: &Constraints,
    split: &Split,
    episodes: usize,
    seed: Seed,
    log: Option<&mut dyn Write>,
) -> Result<TuneOutcome> {
    let energy_model = EnergyModel::default();
    run_with(space, constraints, episodes, seed, log, |theta, trial_seed| {
        evaluate(
            theta,
            split,
            TUNE_EPOCHS,
            1,
            trial_seed,
            true,
            &energy_model,
            None,
        )
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metrics(acc: f64, infer: f64, train: f64, energy: f64) -> MetricsRecord {
        MetricsRecord {
            accuracy: acc,
            inference_time_ms: infer,
            train_time_s: train,
            energy_j: energy,
            ops: StageOps::default(),
        }
    }

    fn trial(index: usize, kind: EncoderKind, dim: usize, sigma: f64, m: MetricsRecord) -> TrialRecord {
        TrialRecord {
            index,
            theta: Theta {
                kind,
                hyper_dim: dim,
                sigma_b: sigma,
            },
            feasible: true,
            metrics: m,
            rng_seed: Seed(0),
        }
    }

    #[test]
    fn empty_history_gives_in_range_theta() {
        let space = SearchSpace::default();
        let mut rng = make_rng(Seed(1), 0);
        let theta = suggest(&[], &space, &Constraints::default(), &mut rng).unwrap();
        assert!(space.contains(&theta));
    }

    #[test]
    fn empty_kind_set_is_a_configuration_error() {
        let space = SearchSpace {
            kinds: vec![],
            ..Default::default()
        };
        let mut rng = make_rng(Seed(1), 0);
        assert!(suggest(&[], &space, &Constraints::default(), &mut rng).is_err());
    }

    #[test]
    fn single_point_space_returns_that_point() {
        let space = SearchSpace {
            kinds: vec![EncoderKind::Rff],
            dim_range: (500, 500),
            sigma_range: (0.7, 0.7),
        };
        let mut rng = make_rng(Seed(2), 0);
        for _ in 0..5 {
            let theta = suggest(&[], &space, &Constraints::default(), &mut rng).unwrap();
            assert_eq!(theta.kind, EncoderKind::Rff);
            assert_eq!(theta.hyper_dim, 500);
            assert_eq!(theta.sigma_b, 0.7);
        }
    }

    #[test]
    fn surrogate_prefers_the_kind_that_works() {
        // All RFF trials collapsed, all RP trials strong: the suggestion
        // should almost always continue with RP.
        let mut history = Vec::new();
        for i in 0..8 {
            let dim = 200 + 400 * i;
            history.push(trial(
                2 * i,
                EncoderKind::Rp,
                dim,
                0.2 + 0.2 * i as f64,
                metrics(0.90 + 0.005 * i as f64, 5.0 + i as f64, 0.5, 10.0 + i as f64),
            ));
            history.push(trial(
                2 * i + 1,
                EncoderKind::Rff,
                dim + 100,
                0.2 + 0.2 * i as f64,
                metrics(0.10 + 0.01 * i as f64, 5.0 + i as f64, 0.5, 10.0 + i as f64),
            ));
        }
        let space = SearchSpace::default();
        let constraints = Constraints::default();
        let mut rp_picks = 0;
        for call in 0..100 {
            let mut rng = make_rng(Seed(1000 + call), 0);
            let theta = suggest(&history, &space, &constraints, &mut rng).unwrap();
            if theta.kind == EncoderKind::Rp {
                rp_picks += 1;
            }
        }
        assert!(rp_picks >= 90, "RP picked only {rp_picks}/100 times");
    }

    #[test]
    fn suggestions_stay_in_range_after_startup() {
        let mut history = Vec::new();
        for i in 0..STARTUP_TRIALS + 2 {
            history.push(trial(
                i,
                if i % 2 == 0 { EncoderKind::Rp } else { EncoderKind::Rff },
                150 + i * 37,
                0.05 + 0.1 * i as f64,
                metrics(0.3 + 0.02 * i as f64, 1.0, 0.1, 1.0),
            ));
        }
        let space = SearchSpace {
            kinds: vec![EncoderKind::Rp, EncoderKind::Rff],
            dim_range: (120, 2000),
            sigma_range: (0.05, 1.3),
        };
        for call in 0..20 {
            let mut rng = make_rng(Seed(call), 0);
            let theta = suggest(&history, &space, &Constraints::default(), &mut rng).unwrap();
            assert!(space.contains(&theta), "{theta:?} escaped the space");
        }
    }

    #[test]
    fn pareto_insert_ignores_dominated_trials() {
        let trials = vec![
            trial(0, EncoderKind::Rp, 100, 0.5, metrics(0.9, 1.0, 1.0, 1.0)),
            trial(1, EncoderKind::Rp, 100, 0.5, metrics(0.8, 2.0, 2.0, 2.0)),
        ];
        let mut front = ParetoFront::default();
        front.insert(&trials, 0);
        front.insert(&trials, 1);
        assert_eq!(front.members(), &[0]);
    }

    #[test]
    fn pareto_insert_removes_newly_dominated_members() {
        let trials = vec![
            trial(0, EncoderKind::Rp, 100, 0.5, metrics(0.8, 2.0, 2.0, 2.0)),
            trial(1, EncoderKind::Rp, 100, 0.5, metrics(0.9, 1.0, 1.0, 1.0)),
        ];
        let mut front = ParetoFront::default();
        front.insert(&trials, 0);
        front.insert(&trials, 1);
        assert_eq!(front.members(), &[1]);
    }

    #[test]
    fn exact_ties_keep_the_earlier_trial() {
        let trials = vec![
            trial(0, EncoderKind::Rp, 100, 0.5, metrics(0.9, 1.0, 1.0, 1.0)),
            trial(1, EncoderKind::Rff, 200, 0.7, metrics(0.9, 1.0, 1.0, 1.0)),
        ];
        let mut front = ParetoFront::default();
        front.insert(&trials, 0);
        front.insert(&trials, 1);
        assert_eq!(front.members(), &[0]);
    }

    #[test]
    fn infeasible_trials_never_enter_the_front() {
        let mut t = trial(0, EncoderKind::Rp, 100, 0.5, metrics(0.99, 1.0, 1.0, 1.0));
        t.feasible = false;
        let trials = vec![t];
        let mut front = ParetoFront::default();
        front.insert(&trials, 0);
        assert!(front.is_empty());
    }

    #[test]
    fn front_matches_brute_force_dominance_oracle() {
        let mut rng = make_rng(Seed(77), 0);
        let trials: Vec<TrialRecord> = (0..100)
            .map(|i| {
                trial(
                    i,
                    EncoderKind::Rp,
                    100 + i,
                    0.5,
                    metrics(
                        rng.next_f64(),
                        1.0 + rng.next_f64() * 10.0,
                        rng.next_f64() * 5.0,
                        rng.next_f64() * 100.0,
                    ),
                )
            })
            .collect();
        let mut front = ParetoFront::default();
        for i in 0..trials.len() {
            front.insert(&trials, i);
        }
        let mut got: Vec<usize> = front.members().to_vec();
        got.sort_unstable();

        let mut expected: Vec<usize> = (0..trials.len())
            .filter(|&i| {
                !trials
                    .iter()
                    .any(|other| dominates(&other.metrics, &trials[i].metrics))
            })
            .collect();
        expected.sort_unstable();
        assert_eq!(got, expected);
    }

    #[test]
    fn best_feasible_breaks_ties_by_energy_then_index() {
        let trials = vec![
            trial(0, EncoderKind::Rp, 100, 0.5, metrics(0.9, 1.0, 1.0, 5.0)),
            trial(1, EncoderKind::Rp, 100, 0.5, metrics(0.9, 1.0, 1.0, 2.0)),
            trial(2, EncoderKind::Rp, 100, 0.5, metrics(0.9, 1.0, 1.0, 2.0)),
        ];
        assert_eq!(best_feasible(&trials).unwrap().index, 1);
    }

    /// Closed-form objective used to probe optimizer competence without
    /// real training: peak accuracy at dim 2000, sigma 1.3, costs
    /// proportional to dim.
    fn closed_form(theta: &Theta) -> MetricsRecord {
        let acc = (-((theta.hyper_dim as f64).ln() - 2000f64.ln()).powi(2)).exp()
            * (-(theta.sigma_b - 1.3).powi(2)).exp();
        let d = theta.hyper_dim as f64;
        metrics(acc, d / 1000.0, d / 10_000.0, d / 100.0)
    }

    #[test]
    fn run_is_deterministic_and_prefix_stable() {
        let space = SearchSpace {
            kinds: vec![EncoderKind::Rp],
            ..Default::default()
        };
        let constraints = Constraints::default();
        let go = |episodes| {
            run_with(&space, &constraints, episodes, Seed(42), None, |theta, _| {
                Ok(closed_form(theta))
            })
            .unwrap()
        };
        let a = go(20);
        let b = go(20);
        for (x, y) in a.trials.iter().zip(&b.trials) {
            assert_eq!(x.theta, y.theta);
            assert_eq!(x.metrics.accuracy, y.metrics.accuracy);
        }
        assert_eq!(a.front.members(), b.front.members());

        // episode i depends only on (seed, history), so shorter runs are
        // prefixes of longer ones: interrupted runs resume by replaying
        // the log
        let short = go(8);
        for (x, y) in short.trials.iter().zip(&a.trials) {
            assert_eq!(x.theta, y.theta);
        }
    }

    #[test]
    fn optimizer_locates_the_closed_form_peak() {
        let space = SearchSpace {
            kinds: vec![EncoderKind::Rp],
            ..Default::default()
        };
        let constraints = Constraints::default();
        let outcome = run_with(&space, &constraints, 50, Seed(7), None, |theta, _| {
            Ok(closed_form(theta))
        })
        .unwrap();
        let best = best_feasible(&outcome.trials).unwrap();
        let ratio = best.theta.hyper_dim as f64 / 2000.0;
        assert!(
            (0.5..=2.0).contains(&ratio),
            "best dim {} off target",
            best.theta.hyper_dim
        );
        assert!(
            (best.theta.sigma_b - 1.3).abs() <= 0.3,
            "best sigma {} off target",
            best.theta.sigma_b
        );
    }

    #[test]
    fn single_episode_front_contains_it_when_feasible() {
        let space = SearchSpace::default();
        let outcome = run_with(
            &space,
            &Constraints::default(),
            1,
            Seed(3),
            None,
            |theta, _| Ok(closed_form(theta)),
        )
        .unwrap();
        assert_eq!(outcome.trials.len(), 1);
        assert_eq!(outcome.front.members(), &[0]);

        let impossible = Constraints {
            acc_min: 1.01,
            ..Default::default()
        };
        let outcome = run_with(&space, &impossible, 1, Seed(3), None, |theta, _| {
            Ok(closed_form(theta))
        })
        .unwrap();
        assert!(outcome.front.is_empty());
    }

    #[test]
    fn trial_log_lines_are_flat_json() {
        let t = trial(3, EncoderKind::Rff, 1234, 0.5, metrics(0.8, 1.5, 0.2, 9.0));
        let line = trial_log_line(&t);
        let v: serde_json::Value = serde_json::from_str(&line).unwrap();
        assert_eq!(v["index"], 3);
        assert_eq!(v["kind"], "rff");
        assert_eq!(v["dim"], 1234);
        assert_eq!(v["feasible"], true);
        for key in [
            "sigma_b",
            "accuracy",
            "inference_time_ms",
            "train_time_s",
            "energy_j",
            "seed",
        ] {
            assert!(v.get(key).is_some(), "missing key {key}");
        }
    }
}
