//! Binary weight files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! offset  size  field
//! 0       4     magic "SONN"
//! 4       2     format version (u16, currently 1)
//! 6       4     q_order (u32)
//! 10      12    input channels, height, width (3 × u32)
//! 22      4     block count B (u32)
//! 26      4·B   filters per block (u32 each)
//! ..      4·B   kernel size per block (u32 each)
//! ..      4     dense units (u32)
//! ..      4     classes (u32)
//! ..      8     parameter count N (u64)
//! ..      8·N   parameters as IEEE-754 f64, flat-view order
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use super::config::{param_count, ModelConfig};
use super::model::Model;
use crate::error::{Error, Result, WeightFileError};

pub const MAGIC: &[u8; 4] = b"SONN";
pub const FORMAT_VERSION: u16 = 1;

/// Serializes the config header and the flat parameters.
pub fn encode_weights(model: &Model) -> Vec<u8> {
    let cfg = model.config();
    let params = model.flatten();
    let mut out = Vec::with_capacity(64 + 8 * params.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    let mut put = |v: usize| out.extend_from_slice(&(v as u32).to_le_bytes());
    put(cfg.q_order as usize);
    cfg.input_shape.iter().for_each(|&d| put(d));
    put(cfg.filters.len());
    cfg.filters.iter().for_each(|&d| put(d));
    cfg.kernel_sizes.iter().for_each(|&d| put(d));
    put(cfg.dense_units);
    put(cfg.classes);
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for p in params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], WeightFileError> {
        if self.bytes.len() < self.at + n {
            return Err(WeightFileError::Truncated {
                expected: self.at + n,
                found: self.bytes.len(),
            });
        }
        let s = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize, WeightFileError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
}

/// Parses a weight file, taking the architecture from its header.
pub fn decode_weights(bytes: &[u8]) -> Result<Model> {
    let mut r = Reader { bytes, at: 0 };
    if r.take(4).map_err(|_| WeightFileError::CorruptHeader("file shorter than magic".into()))? != MAGIC {
        return Err(WeightFileError::CorruptHeader("bad magic, expected \"SONN\"".into()).into());
    }
    let version = u16::from_le_bytes(r.take(2)?.try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(WeightFileError::UnsupportedVersion(version).into());
    }
    let q_order = r.u32()? as u32;
    let input_shape = [r.u32()?, r.u32()?, r.u32()?];
    let blocks = r.u32()?;
    if blocks == 0 || blocks > 64 {
        return Err(WeightFileError::CorruptHeader(format!("implausible block count {blocks}")).into());
    }
    let filters = (0..blocks).map(|_| r.u32()).collect::<Result<Vec<_>, _>>()?;
    let kernel_sizes = (0..blocks).map(|_| r.u32()).collect::<Result<Vec<_>, _>>()?;
    let config = ModelConfig {
        q_order,
        input_shape,
        filters,
        kernel_sizes,
        dense_units: r.u32()?,
        classes: r.u32()?,
    };
    let expected = param_count(&config)
        .map_err(|e| WeightFileError::CorruptHeader(format!("header describes an invalid model: {e}")))?;
    let stored = u64::from_le_bytes(r.take(8)?.try_into().unwrap());
    if stored != expected as u64 {
        return Err(WeightFileError::CorruptHeader(format!(
            "header declares {stored} parameters, architecture has {expected}"
        ))
        .into());
    }
    let body = r.take(8 * expected)?;
    let params: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if r.at != bytes.len() {
        return Err(WeightFileError::CorruptHeader(format!(
            "{} trailing bytes after parameters",
            bytes.len() - r.at
        ))
        .into());
    }
    Model::from_flat(&config, &params)
}

pub fn save_weights(model: &Model, destination: &Path) -> Result<()> {
    let bytes = encode_weights(model);
    let mut f = fs::File::create(destination).map_err(|e| Error::io(destination, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(destination, e))
}

/// Loads a weight file and checks it was written for `config`.
pub fn load_weights(source: &Path, config: &ModelConfig) -> Result<Model> {
    let bytes = fs::read(source).map_err(|e| Error::io(source, e))?;
    let model = decode_weights(&bytes)?;
    if model.config() != config {
        return Err(WeightFileError::ConfigMismatch(format!(
            "file holds {:?}, expected {:?}",
            model.config(),
            config
        ))
        .into());
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selfonn::build_model;

    #[test]
    fn encode_decode_exact() {
        let model = build_model(&ModelConfig::reduced(3), 17).unwrap();
        let bytes = encode_weights(&model);
        assert_eq!(&bytes[..4], b"SONN");
        let back = decode_weights(&bytes).unwrap();
        assert_eq!(back, model);
        assert_eq!(encode_weights(&back), bytes);
    }

    #[test]
    fn distinct_errors() {
        let model = build_model(&ModelConfig::reduced(2), 1).unwrap();
        let bytes = encode_weights(&model);

        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_weights(&bad), Err(Error::WeightFile(WeightFileError::CorruptHeader(_)))));

        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(decode_weights(&bad), Err(Error::WeightFile(WeightFileError::UnsupportedVersion(9)))));

        assert!(matches!(
            decode_weights(&bytes[..bytes.len() - 3]),
            Err(Error::WeightFile(WeightFileError::Truncated { .. }))
        ));
        assert!(matches!(decode_weights(&bytes[..10]), Err(Error::WeightFile(WeightFileError::Truncated { .. }))));

        let mut bad = bytes.clone();
        bad.push(0);
        assert!(matches!(decode_weights(&bad), Err(Error::WeightFile(WeightFileError::CorruptHeader(_)))));
    }

    #[test]
    fn config_mismatch_on_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.sonn");
        let model = build_model(&ModelConfig::reduced(2), 1).unwrap();
        save_weights(&model, &path).unwrap();
        assert_eq!(load_weights(&path, &ModelConfig::reduced(2)).unwrap(), model);
        assert!(matches!(
            load_weights(&path, &ModelConfig::reduced(3)),
            Err(Error::WeightFile(WeightFileError::ConfigMismatch(_)))
        ));
    }
}
