//! Bit-exact model serialization.
//!
//! Layout (all little-endian): magic `"HDCM"`, u32 version=1, u32 kind code
//! (0=RP, 1=RFF), u32 hyper_dim, u32 input_dim, u32 classes, f64 sigma_b,
//! u64 basis seed; then `classes * hyper_dim` f64 prototype values and
//! `classes` f64 norms.
//!
//! The basis is not stored: a `hyper_dim x input_dim` matrix can run to
//! hundreds of megabytes while the seed is eight bytes and exact under the
//! frozen RNG contract, so loading regenerates it.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::encoder::{build_basis, Basis, EncoderConfig, EncoderKind};
use crate::error::{Error, Result};
use crate::model::ClassMemory;
use crate::rng::Seed;
use crate::types::ShapeMeta;

const MODEL_MAGIC: &[u8; 4] = b"HDCM";
const MODEL_VERSION: u32 = 1;

/// Writes a trained model to `path`.
pub fn save_model(memory: &ClassMemory, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    let io_err = |e| Error::io(path, e);

    let shape = memory.shape();
    let config = memory.encoder();
    let kind_code: u32 = match config.kind {
        EncoderKind::Rp => 0,
        EncoderKind::Rff => 1,
    };

    w.write_all(MODEL_MAGIC).map_err(io_err)?;
    for value in [
        MODEL_VERSION,
        kind_code,
        shape.hyper_dim() as u32,
        shape.input_dim() as u32,
        shape.classes() as u32,
    ] {
        w.write_all(&value.to_le_bytes()).map_err(io_err)?;
    }
    w.write_all(&config.sigma_b.to_le_bytes()).map_err(io_err)?;
    w.write_all(&config.seed.0.to_le_bytes()).map_err(io_err)?;

    for class in 0..shape.classes() {
        for value in memory.prototype(class) {
            w.write_all(&value.to_le_bytes()).map_err(io_err)?;
        }
    }
    for norm in memory.norms() {
        w.write_all(&norm.to_le_bytes()).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

fn read_f64_le(r: &mut impl Read, path: &Path, section: &'static str) -> Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Truncated {
                path: path.to_path_buf(),
                section,
            }
        } else {
            Error::io(path, e)
        }
    })?;
    Ok(f64::from_le_bytes(buf))
}

fn read_u64_le(r: &mut impl Read, path: &Path, section: &'static str) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Truncated {
                path: path.to_path_buf(),
                section,
            }
        } else {
            Error::io(path, e)
        }
    })?;
    Ok(u64::from_le_bytes(buf))
}

/// Loads a model and regenerates its basis from the stored seed.
///
/// The header is verified, and the stored norms are cross-checked against
/// norms recomputed from the prototypes (1e-9 relative).
pub fn load_model(path: impl AsRef<Path>) -> Result<(ClassMemory, Basis)> {
    let path = path.as_ref();
    let mut r = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Truncated {
                path: path.to_path_buf(),
                section: "header",
            }
        } else {
            Error::io(path, e)
        }
    })?;
    if &magic != MODEL_MAGIC {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            expected: "HDCM",
        });
    }

    let version = crate::synthdata::read_u32_le(&mut r, path, "header")?;
    if version != MODEL_VERSION {
        return Err(Error::BadVersion {
            path: path.to_path_buf(),
            found: version,
            expected: MODEL_VERSION,
        });
    }
    let kind_code = crate::synthdata::read_u32_le(&mut r, path, "header")?;
    let kind = match kind_code {
        0 => EncoderKind::Rp,
        1 => EncoderKind::Rff,
        other => {
            return Err(Error::InvalidParam(format!(
                "{}: unknown encoder kind code {other}",
                path.display()
            )))
        }
    };
    let hyper_dim = crate::synthdata::read_u32_le(&mut r, path, "header")? as usize;
    let input_dim = crate::synthdata::read_u32_le(&mut r, path, "header")? as usize;
    let classes = crate::synthdata::read_u32_le(&mut r, path, "header")? as usize;
    let sigma_b = read_f64_le(&mut r, path, "header")?;
    let seed = Seed(read_u64_le(&mut r, path, "header")?);

    let shape = ShapeMeta::new(input_dim, hyper_dim, classes)?;
    let config = EncoderConfig {
        kind,
        hyper_dim,
        sigma_b,
        seed,
    };

    let mut prototypes = Vec::with_capacity(classes * hyper_dim);
    for _ in 0..classes * hyper_dim {
        prototypes.push(read_f64_le(&mut r, path, "prototypes")?);
    }
    let mut norms = Vec::with_capacity(classes);
    for _ in 0..classes {
        norms.push(read_f64_le(&mut r, path, "norms")?);
    }
    if !prototypes.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("model prototypes"));
    }

    for (class, stored) in norms.iter().enumerate() {
        let recomputed: f64 = prototypes[class * hyper_dim..(class + 1) * hyper_dim]
            .iter()
            .map(|p| p * p)
            .sum::<f64>()
            .sqrt();
        if (stored - recomputed).abs() > 1e-9 * recomputed.abs().max(1.0) {
            return Err(Error::NormMismatch {
                path: path.to_path_buf(),
                class,
            });
        }
    }

    let basis = build_basis(&config, input_dim)?;
    let memory = ClassMemory::from_parts(prototypes, norms, shape, config);
    Ok((memory, basis))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fit;
    use crate::synthdata::gen_image_task;
    use crate::types::EncodedBatch;

    fn trained() -> (crate::model::FitResult, crate::synthdata::Dataset) {
        let data = gen_image_task(64, 8, Seed(3)).unwrap();
        let cfg = EncoderConfig {
            kind: EncoderKind::Rff,
            hyper_dim: 40,
            sigma_b: 0.05,
            seed: Seed(21),
        };
        (fit(&data, &cfg, 2, false).unwrap(), data)
    }

    #[test]
    fn model_round_trips_bitwise() {
        let (fitted, _) = trained();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.hdcm");
        save_model(&fitted.memory, &path).unwrap();
        let (loaded, basis) = load_model(&path).unwrap();
        assert_eq!(loaded, fitted.memory);
        assert_eq!(basis, fitted.basis);
    }

    #[test]
    fn loaded_model_predicts_identically() {
        let (fitted, data) = trained();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.hdcm");
        save_model(&fitted.memory, &path).unwrap();
        let (loaded, basis) = load_model(&path).unwrap();

        let queries: EncodedBatch = basis.encode_matrix(data.features(), data.samples()).unwrap();
        let expected = fitted.memory.classify_batch(&queries).unwrap();
        let got = loaded.classify_batch(&queries).unwrap();
        assert_eq!(expected, got);
    }

    #[test]
    fn distinct_errors_for_corrupt_files() {
        let (fitted, _) = trained();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.hdcm");
        save_model(&fitted.memory, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();

        let p = dir.path().join("magic.hdcm");
        let mut m = bytes.clone();
        m[0] = b'Z';
        std::fs::write(&p, &m).unwrap();
        assert!(matches!(load_model(&p), Err(Error::BadMagic { .. })));

        let p = dir.path().join("version.hdcm");
        let mut v = bytes.clone();
        v[4] = 3;
        std::fs::write(&p, &v).unwrap();
        assert!(matches!(
            load_model(&p),
            Err(Error::BadVersion { found: 3, .. })
        ));

        let p = dir.path().join("trunc.hdcm");
        std::fs::write(&p, &bytes[..bytes.len() - 9]).unwrap();
        match load_model(&p) {
            Err(Error::Truncated { section, .. }) => assert_eq!(section, "norms"),
            other => panic!("unexpected {other:?}"),
        }

        let p = dir.path().join("norms.hdcm");
        let mut b = bytes.clone();
        let len = b.len();
        // corrupt the final stored norm
        b[len - 1] ^= 0x40;
        std::fs::write(&p, &b).unwrap();
        assert!(matches!(load_model(&p), Err(Error::NormMismatch { .. })));
    }
}
