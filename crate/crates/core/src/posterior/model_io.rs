//! UDNN model file format.
//!
//! ```text
//! magic "UDNN" | version u32 | n_layers u32 | dims (n_layers+1) x u32 |
//! activation ids n_layers x u32 | per layer: weights f32 row-major, bias f32
//! ```
//!
//! Activation ids: 0 = sigmoid, 1 = softmax. The runtime accepts the
//! sigmoid-hidden / softmax-output pattern. Parameters are stored as f32,
//! so saving quantizes f64 models.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::posterior::MlpModel;

const MAGIC: &[u8; 4] = b"UDNN";
const VERSION: u32 = 1;
const ACT_SIGMOID: u32 = 0;
const ACT_SOFTMAX: u32 = 1;

pub fn save_model(path: &Path, model: &MlpModel) -> Result<()> {
    model.validate()?;
    let layers = model.num_layers();
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(layers as u32).to_le_bytes());
    for d in &model.dims {
        buf.extend_from_slice(&(*d as u32).to_le_bytes());
    }
    for l in 0..layers {
        let act = if l + 1 < layers { ACT_SIGMOID } else { ACT_SOFTMAX };
        buf.extend_from_slice(&act.to_le_bytes());
    }
    for l in 0..layers {
        for &v in &model.weights[l] {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
        for &v in &model.biases[l] {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    let tmp = {
        let mut name = path.file_name().unwrap_or_default().to_os_string();
        name.push(".tmp");
        path.with_file_name(name)
    };
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(&buf)?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<MlpModel> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err(Error::format("not a UDNN file"));
    }
    let u32_at = |at: usize| -> Result<u32> {
        bytes
            .get(at..at + 4)
            .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
            .ok_or_else(|| Error::format("truncated UDNN header"))
    };
    let version = u32_at(4)?;
    if version != VERSION {
        return Err(Error::format(format!("unsupported UDNN version {version}")));
    }
    let layers = u32_at(8)? as usize;
    if layers == 0 {
        return Err(Error::format("UDNN with zero layers"));
    }
    let mut at = 12;
    let mut dims = Vec::with_capacity(layers + 1);
    for _ in 0..=layers {
        dims.push(u32_at(at)? as usize);
        at += 4;
    }
    for l in 0..layers {
        let act = u32_at(at)?;
        at += 4;
        let expect = if l + 1 < layers { ACT_SIGMOID } else { ACT_SOFTMAX };
        if act != expect {
            return Err(Error::format(format!(
                "layer {l} activation id {act} unsupported (expected {expect})"
            )));
        }
    }
    let mut model = MlpModel::zeros(dims)?;
    for l in 0..layers {
        for k in 0..model.weights[l].len() {
            let b = bytes
                .get(at..at + 4)
                .ok_or_else(|| Error::format("truncated UDNN weights"))?;
            model.weights[l][k] = f32::from_le_bytes(b.try_into().unwrap()) as f64;
            at += 4;
        }
        for k in 0..model.biases[l].len() {
            let b = bytes
                .get(at..at + 4)
                .ok_or_else(|| Error::format("truncated UDNN biases"))?;
            model.biases[l][k] = f32::from_le_bytes(b.try_into().unwrap()) as f64;
            at += 4;
        }
    }
    if at != bytes.len() {
        return Err(Error::format("trailing bytes after UDNN payload"));
    }
    model.validate()?;
    Ok(model)
}
