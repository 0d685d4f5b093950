use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::data::FeatureSchema;
use crate::detectors::{DetectorKind, FittedDetector};
use crate::error::{Error, Result};
use crate::models::{Model, ModelSpec};
use crate::params::ModelParams;
use crate::scoring::Calibration;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"PRSC";
pub const VERSION: u32 = 1;

/// A trained model with everything needed to score new data.
///
/// Layout: `PRSC`, `u32` version, `u32` header length, TOML header (model
/// spec, schema, calibration scalars), then the parameter arrays as 32-bit
/// floats and the detector arrays as 64-bit floats. Every integer is little
/// endian; each array is `u32` name length, name, `u32` rank, `u32` dims,
/// then the values.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub spec: ModelSpec,
    pub schema: FeatureSchema,
    pub params: ModelParams,
    pub calibration: Option<Calibration>,
}

#[derive(Serialize, Deserialize)]
struct CalibrationHeader {
    detector: DetectorKind,
    proactive_threshold: f64,
    reactive_threshold: f64,
    quantile: f64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    model: ModelSpec,
    schema: FeatureSchema,
    #[serde(skip_serializing_if = "Option::is_none")]
    calibration: Option<CalibrationHeader>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| bad("truncated file"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("four bytes")))
    }

    fn array(&mut self, width: usize) -> Result<(String, Tensor)> {
        let n = self.u32()? as usize;
        let name = String::from_utf8(self.take(n)?.to_vec()).map_err(|_| bad("array name is not UTF-8"))?;
        let rank = self.u32()? as usize;
        let dims = (0..rank).map(|_| self.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let count = dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or_else(|| bad("array too large"))?;
        let raw = self.take(count.checked_mul(width).ok_or_else(|| bad("array too large"))?)?;
        let data = if width == 4 {
            raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect()
        } else {
            raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect()
        };
        Ok((name, Tensor::new(dims, data)?))
    }
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_array(out: &mut Vec<u8>, name: &str, t: &Tensor, wide: bool) {
    put_u32(out, name.len());
    out.extend_from_slice(name.as_bytes());
    put_u32(out, t.ndim());
    for &d in t.shape() {
        put_u32(out, d);
    }
    for &v in t.data() {
        if wide {
            out.extend_from_slice(&v.to_le_bytes());
        } else {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            model: self.spec.clone(),
            schema: self.schema.clone(),
            calibration: self.calibration.as_ref().map(|c| CalibrationHeader {
                detector: c.detector.kind(),
                proactive_threshold: c.proactive_threshold,
                reactive_threshold: c.reactive_threshold,
                quantile: c.quantile,
            }),
        };
        let text = toml::to_string(&header).map_err(|e| bad(e.to_string()))?;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, VERSION as usize);
        put_u32(&mut out, text.len());
        out.extend_from_slice(text.as_bytes());
        put_u32(&mut out, self.params.len());
        for (name, t) in self.params.iter() {
            put_array(&mut out, name, t, false);
        }
        let aux = self.calibration.as_ref().map(|c| c.detector.to_arrays()).unwrap_or_default();
        put_u32(&mut out, aux.len());
        for (name, t) in &aux {
            put_array(&mut out, name, t, true);
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(bad("not a checkpoint file"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(bad(format!("unsupported format version {version}, expected {VERSION}")));
        }
        let len = r.u32()? as usize;
        let text = std::str::from_utf8(r.take(len)?).map_err(|_| bad("header is not UTF-8"))?;
        let header: Header = toml::from_str(text).map_err(|e| bad(format!("bad header: {e}")))?;
        let n = r.u32()? as usize;
        let params = ModelParams::from_named((0..n).map(|_| r.array(4)).collect::<Result<_>>()?);
        let n_aux = r.u32()? as usize;
        let aux: IndexMap<String, Tensor> = (0..n_aux).map(|_| r.array(8)).collect::<Result<_>>()?;
        if r.pos != bytes.len() {
            return Err(bad("trailing bytes after the last array"));
        }
        let invalid = |e: Error| bad(format!("invalid header: {e}"));
        header.model.validate().map_err(invalid)?;
        header.schema.validate().map_err(invalid)?;
        if header.schema.n_features != header.model.n_features() {
            return Err(bad("schema and model disagree on the feature count"));
        }
        Model::new(header.model.clone()).map_err(invalid)?.layout().validate(&params)?;
        let calibration = header
            .calibration
            .map(|c| -> Result<Calibration> {
                Ok(Calibration {
                    detector: FittedDetector::from_arrays(c.detector, &aux)?,
                    proactive_threshold: c.proactive_threshold,
                    reactive_threshold: c.reactive_threshold,
                    quantile: c.quantile,
                })
            })
            .transpose()?;
        Ok(Checkpoint { spec: header.model, schema: header.schema, params, calibration })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::from_bytes(&bytes)
    }

    pub fn model(&self) -> Result<Model> {
        Model::new(self.spec.clone())
    }
}
