//! Deterministic synthetic dataset generators, normalization, splitting,
//! and the binary dataset format.
//!
//! Two desk-scale task families stand in for the two sensing modalities the
//! engine targets:
//!
//! * [`gen_signal_task`] - multichannel windowed signals (90 channels x 10
//!   steps, 3 classes) where class identity lives in cross-channel phase
//!   relationships and quadratic channel interactions. No linear functional
//!   of the features separates the classes, so a nonlinear encoder is
//!   required.
//! * [`gen_image_task`] - small thermal-style frames (8 classes: four
//!   stripe segments in a bulk or overhang state) where faint spatial
//!   templates plus noise and small translations keep the classes
//!   near-linearly separable.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::rng::{make_rng, Seed};

/// Stream labels used by the generators; frozen so a seed always
/// regenerates the same dataset.
const STREAM_SIGNAL_CHANNEL_PHASES: u32 = 10;
const STREAM_SIGNAL_SAMPLES: u32 = 11;
const STREAM_IMAGE_SAMPLES: u32 = 12;
const STREAM_SPLIT: u32 = 20;

const SIGNAL_CHANNELS: usize = 90;
const SIGNAL_WINDOW: usize = 10;
const SIGNAL_CLASSES: usize = 3;
/// Carrier amplitude. Large against the additive noise so that the
/// standardized within-class geometry stays tight enough for exclusive
/// (large sigma_b) cosine encodings to resolve it.
const SIGNAL_AMPLITUDE: f64 = 20.0;
/// Strength of the class-conditional quadratic channel couplings.
const SIGNAL_COUPLING: f64 = 0.5;
const SIGNAL_NOISE_STD: f64 = 0.3;

const IMAGE_CLASSES: usize = 8;
const IMAGE_STRIPES: usize = 4;
/// Template intensities for the broad (bulk) band and the hotter, narrower
/// overhang core. Faint against the pixel noise on purpose: accuracies
/// should sit below saturation so configuration differences remain visible.
const IMAGE_BULK_INTENSITY: f32 = 0.22;
const IMAGE_OVERHANG_INTENSITY: f32 = 0.40;
const IMAGE_NOISE_STD: f64 = 0.5;

/// How a dataset was produced; carried along for reproducibility.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub generator: String,
    pub params: String,
    pub seed: Seed,
}

/// A labeled feature matrix: `samples x input_dim` rows with labels in
/// `[0, classes)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f32>,
    labels: Vec<u32>,
    input_dim: usize,
    classes: usize,
    provenance: Provenance,
}

impl Dataset {
    /// Validates shape, label range, and finiteness.
    pub fn new(
        features: Vec<f32>,
        labels: Vec<u32>,
        input_dim: usize,
        classes: usize,
        provenance: Provenance,
    ) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::InvalidParam("input_dim must be >= 1".into()));
        }
        if classes < 2 {
            return Err(Error::InvalidParam("classes must be >= 2".into()));
        }
        if features.len() != labels.len() * input_dim {
            return Err(Error::ShapeMismatch {
                what: "dataset features",
                expected: labels.len() * input_dim,
                got: features.len(),
            });
        }
        if !features.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("dataset features"));
        }
        for &l in &labels {
            if l as usize >= classes {
                return Err(Error::LabelOutOfRange {
                    label: l as usize,
                    classes,
                });
            }
        }
        Ok(Self {
            features,
            labels,
            input_dim,
            classes,
            provenance,
        })
    }

    pub fn samples(&self) -> usize {
        self.labels.len()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn features(&self) -> &[f32] {
        &self.features
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.features[i * self.input_dim..(i + 1) * self.input_dim]
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Per-class sample counts.
    pub fn label_histogram(&self) -> Vec<usize> {
        let mut hist = vec![0usize; self.classes];
        for &l in &self.labels {
            hist[l as usize] += 1;
        }
        hist
    }

    fn select(&self, indices: &[usize], provenance: Provenance) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.input_dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            features,
            labels,
            input_dim: self.input_dim,
            classes: self.classes,
            provenance,
        }
    }
}

/// A stratified train/test partition. `fraction` is the share of samples
/// assigned to the training side.
#[derive(Debug, Clone)]
pub struct Split {
    pub train: Dataset,
    pub test: Dataset,
    pub fraction: f64,
}

/// Signal-like task: 90 channels x 10 time steps (900 features), 3 balanced
/// classes, `n >= 30`.
///
/// Every channel carries one carrier period with a per-sample global phase;
/// the per-channel phase pattern (a class-indexed ramp over a fixed random
/// base) encodes the class, and a weak class-conditional product of two
/// neighbor channels adds quadratic structure. Because the global phase is
/// uniform, every linear functional of a class has a symmetric range around
/// zero, which is what makes the task linearly inseparable.
pub fn gen_signal_task(n: usize, seed: Seed) -> Result<Dataset> {
    if n < 30 {
        return Err(Error::InvalidParam(format!(
            "signal task needs n >= 30, got {n}"
        )));
    }
    let input_dim = SIGNAL_CHANNELS * SIGNAL_WINDOW;

    let mut phase_rng = make_rng(seed, STREAM_SIGNAL_CHANNEL_PHASES);
    let base_phases: Vec<f64> = (0..SIGNAL_CHANNELS)
        .map(|_| phase_rng.uniform(0.0, std::f64::consts::TAU))
        .collect::<Result<_>>()?;

    let class_phase = |class: usize, channel: usize| -> f64 {
        base_phases[channel]
            + std::f64::consts::TAU * (class * channel) as f64 / SIGNAL_CHANNELS as f64
    };

    let mut rng = make_rng(seed, STREAM_SIGNAL_SAMPLES);
    let mut features = Vec::with_capacity(n * input_dim);
    let mut labels = Vec::with_capacity(n);

    for sample in 0..n {
        let class = sample % SIGNAL_CLASSES;
        labels.push(class as u32);
        let global_phase = rng.uniform(0.0, std::f64::consts::TAU)?;
        for channel in 0..SIGNAL_CHANNELS {
            let own = class_phase(class, channel);
            // class-dependent coupling partners
            let partner_a = class_phase(class, (channel + 1 + class) % SIGNAL_CHANNELS);
            let partner_b = class_phase(class, (channel + 5 + 2 * class) % SIGNAL_CHANNELS);
            for step in 0..SIGNAL_WINDOW {
                let t = std::f64::consts::TAU * step as f64 / SIGNAL_WINDOW as f64;
                let carrier = SIGNAL_AMPLITUDE * (t + global_phase + own).sin();
                let interaction = SIGNAL_COUPLING
                    * (t + global_phase + partner_a).sin()
                    * (t + global_phase + partner_b).sin();
                let noise = rng.gaussian(SIGNAL_NOISE_STD)?;
                features.push((carrier + interaction + noise) as f32);
            }
        }
    }

    Dataset::new(
        features,
        labels,
        input_dim,
        SIGNAL_CLASSES,
        Provenance {
            generator: "signal".into(),
            params: format!(
                "channels={SIGNAL_CHANNELS} window={SIGNAL_WINDOW} amplitude={SIGNAL_AMPLITUDE} \
                 coupling={SIGNAL_COUPLING} noise_std={SIGNAL_NOISE_STD} n={n}"
            ),
            seed,
        },
    )
}

/// Image-like task: `side x side` frames, 8 classes (4 stripe segments,
/// each in a bulk or overhang state), `n >= 32`.
///
/// Class templates are faint intensity patterns; each sample is the
/// template shifted by up to one pixel and buried in Gaussian pixel noise.
/// The classes stay near-linearly separable, so a linear encoder with a
/// compact hyperspace already resolves them.
pub fn gen_image_task(n: usize, side: usize, seed: Seed) -> Result<Dataset> {
    if n < IMAGE_CLASSES * 4 {
        return Err(Error::InvalidParam(format!(
            "image task needs n >= {}, got {n}",
            IMAGE_CLASSES * 4
        )));
    }
    if side < 8 {
        return Err(Error::InvalidParam(format!(
            "image side must be >= 8, got {side}"
        )));
    }
    let input_dim = side * side;

    // Class templates: stripe k covers rows [k*side/4, (k+1)*side/4).
    // Bulk = broad band at moderate intensity; overhang = narrower, hotter
    // core over the stripe's right half.
    let stripe_height = side / IMAGE_STRIPES;
    let mut templates = vec![vec![0.0f32; input_dim]; IMAGE_CLASSES];
    for stripe in 0..IMAGE_STRIPES {
        let row0 = stripe * stripe_height;
        let bulk = &mut templates[stripe * 2];
        for r in row0..row0 + stripe_height {
            for c in 0..side {
                bulk[r * side + c] = IMAGE_BULK_INTENSITY;
            }
        }
        let overhang = &mut templates[stripe * 2 + 1];
        let core0 = row0 + stripe_height / 4;
        let core1 = row0 + (3 * stripe_height).div_ceil(4);
        for r in core0..core1.min(side) {
            for c in side / 2..side {
                overhang[r * side + c] = IMAGE_OVERHANG_INTENSITY;
            }
        }
    }

    let mut rng = make_rng(seed, STREAM_IMAGE_SAMPLES);
    let mut features = Vec::with_capacity(n * input_dim);
    let mut labels = Vec::with_capacity(n);

    for sample in 0..n {
        let class = sample % IMAGE_CLASSES;
        labels.push(class as u32);
        let dy = rng.below(3) as isize - 1;
        let dx = rng.below(3) as isize - 1;
        let template = &templates[class];
        for r in 0..side as isize {
            for c in 0..side as isize {
                let (sr, sc) = (r - dy, c - dx);
                let base = if (0..side as isize).contains(&sr) && (0..side as isize).contains(&sc)
                {
                    template[sr as usize * side + sc as usize]
                } else {
                    0.0
                };
                let noise = rng.gaussian(IMAGE_NOISE_STD)? as f32;
                features.push(base + noise);
            }
        }
    }

    Dataset::new(
        features,
        labels,
        input_dim,
        IMAGE_CLASSES,
        Provenance {
            generator: "image".into(),
            params: format!(
                "side={side} bulk={IMAGE_BULK_INTENSITY} overhang={IMAGE_OVERHANG_INTENSITY} \
                 noise_std={IMAGE_NOISE_STD} shift=1 n={n}"
            ),
            seed,
        },
    )
}

/// Per-feature mean/std statistics computed from a training set.
#[derive(Debug, Clone)]
pub struct Standardizer {
    means: Vec<f64>,
    stds: Vec<f64>,
}

const STD_FLOOR: f64 = 1e-8;

impl Standardizer {
    /// Computes statistics from `train` only.
    pub fn fit(train: &Dataset) -> Self {
        let j = train.input_dim();
        let n = train.samples() as f64;
        let mut means = vec![0.0f64; j];
        for row in train.features().chunks_exact(j) {
            for (m, v) in means.iter_mut().zip(row) {
                *m += f64::from(*v);
            }
        }
        for m in &mut means {
            *m /= n;
        }
        let mut vars = vec![0.0f64; j];
        for row in train.features().chunks_exact(j) {
            for ((var, v), m) in vars.iter_mut().zip(row).zip(&means) {
                let d = f64::from(*v) - m;
                *var += d * d;
            }
        }
        let stds = vars.iter().map(|v| (v / n).sqrt().max(STD_FLOOR)).collect();
        Self { means, stds }
    }

    /// Applies `(x - mean) / std` per feature. Constant features map to 0
    /// thanks to the std floor.
    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        if data.input_dim() != self.means.len() {
            return Err(Error::ShapeMismatch {
                what: "standardize input",
                expected: self.means.len(),
                got: data.input_dim(),
            });
        }
        let j = data.input_dim();
        let features = data
            .features()
            .chunks_exact(j)
            .flat_map(|row| {
                row.iter()
                    .zip(self.means.iter().zip(&self.stds))
                    .map(|(v, (m, s))| ((f64::from(*v) - m) / s) as f32)
            })
            .collect();
        Dataset::new(
            features,
            data.labels().to_vec(),
            j,
            data.classes(),
            data.provenance().clone(),
        )
    }
}

/// Standardizes `apply_to` with statistics taken from `train` only.
pub fn standardize(train: &Dataset, apply_to: &Dataset) -> Result<Dataset> {
    Standardizer::fit(train).apply(apply_to)
}

/// Stratified, seeded, disjoint split; `fraction` is the training share.
/// Per-class proportions are preserved within one sample.
pub fn split(dataset: &Dataset, fraction: f64, seed: Seed) -> Result<Split> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidParam(format!(
            "split fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let mut rng = make_rng(seed, STREAM_SPLIT);
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for class in 0..dataset.classes() {
        let mut members: Vec<usize> = (0..dataset.samples())
            .filter(|&i| dataset.labels()[i] as usize == class)
            .collect();
        rng.shuffle(&mut members);
        let take = (members.len() as f64 * fraction).round() as usize;
        train_idx.extend_from_slice(&members[..take]);
        test_idx.extend_from_slice(&members[take..]);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok(Split {
        train: dataset.select(&train_idx, dataset.provenance().clone()),
        test: dataset.select(&test_idx, dataset.provenance().clone()),
        fraction,
    })
}

// ---------------------------------------------------------------------------
// Binary dataset format
//
// magic "HDCD", then little-endian u32: version=1, N, J, L; then N u32
// labels; then N*J f32 features, row-major.
// ---------------------------------------------------------------------------

const DATASET_MAGIC: &[u8; 4] = b"HDCD";
const DATASET_VERSION: u32 = 1;

fn read_exact_or(
    reader: &mut impl Read,
    buf: &mut [u8],
    path: &Path,
    section: &'static str,
) -> Result<()> {
    reader.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Truncated {
                path: path.to_path_buf(),
                section,
            }
        } else {
            Error::io(path, e)
        }
    })
}

pub(crate) fn read_u32_le(
    reader: &mut impl Read,
    path: &Path,
    section: &'static str,
) -> Result<u32> {
    let mut buf = [0u8; 4];
    read_exact_or(reader, &mut buf, path, section)?;
    Ok(u32::from_le_bytes(buf))
}

/// Writes a dataset in the binary `HDCD` format.
pub fn write_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    let io_err = |e| Error::io(path, e);

    w.write_all(DATASET_MAGIC).map_err(io_err)?;
    for value in [
        DATASET_VERSION,
        dataset.samples() as u32,
        dataset.input_dim() as u32,
        dataset.classes() as u32,
    ] {
        w.write_all(&value.to_le_bytes()).map_err(io_err)?;
    }
    for label in dataset.labels() {
        w.write_all(&label.to_le_bytes()).map_err(io_err)?;
    }
    for value in dataset.features() {
        w.write_all(&value.to_le_bytes()).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Reads a dataset from the binary `HDCD` format, rejecting bad magic,
/// unsupported versions, and truncated payloads with distinct errors.
pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let mut r = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);

    let mut magic = [0u8; 4];
    read_exact_or(&mut r, &mut magic, path, "header")?;
    if &magic != DATASET_MAGIC {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            expected: "HDCD",
        });
    }
    let version = read_u32_le(&mut r, path, "header")?;
    if version != DATASET_VERSION {
        return Err(Error::BadVersion {
            path: path.to_path_buf(),
            found: version,
            expected: DATASET_VERSION,
        });
    }
    let n = read_u32_le(&mut r, path, "header")? as usize;
    let input_dim = read_u32_le(&mut r, path, "header")? as usize;
    let classes = read_u32_le(&mut r, path, "header")? as usize;

    let mut labels = Vec::with_capacity(n);
    let mut buf = [0u8; 4];
    for _ in 0..n {
        read_exact_or(&mut r, &mut buf, path, "labels")?;
        labels.push(u32::from_le_bytes(buf));
    }
    let mut features = Vec::with_capacity(n * input_dim);
    for _ in 0..n * input_dim {
        read_exact_or(&mut r, &mut buf, path, "features")?;
        features.push(f32::from_le_bytes(buf));
    }

    Dataset::new(
        features,
        labels,
        input_dim,
        classes,
        Provenance {
            generator: format!("file:{}", path.display()),
            params: String::new(),
            seed: Seed(0),
        },
    )
}
