//! `RBNN` model files.
//!
//! Layout, little-endian: magic `RBNN`; version u32; input height u32; input
//! width u32; kernel u32; conv layer count u32 and one u32 depth per layer;
//! hidden width u32; class count u32; leaky slope f64; dropout probability
//! f64; tensor count u32; then per tensor its rank u32, dims u32 × rank and
//! the f32 values. Optimizer state is not stored.

use std::path::Path;

use super::model::{Model, ModelConfig};
use super::tensor::Tensor;
use crate::binio::{Reader, Writer};
use crate::error::FormatError;

pub const MODEL_MAGIC: [u8; 4] = *b"RBNN";
pub const MODEL_VERSION: u32 = 1;

pub fn model_to_bytes(model: &Model<f32>) -> Vec<u8> {
    let c = model.config();
    let mut w = Writer::default();
    w.bytes(&MODEL_MAGIC);
    w.u32(MODEL_VERSION);
    w.u32(c.input_height as u32);
    w.u32(c.input_width as u32);
    w.u32(c.kernel as u32);
    w.u32(c.conv_depths.len() as u32);
    for &d in &c.conv_depths {
        w.u32(d as u32);
    }
    w.u32(c.fc_hidden as u32);
    w.u32(c.num_classes as u32);
    w.f64(c.leaky_slope);
    w.f64(c.dropout_p);
    w.u32(model.params.len() as u32);
    for t in &model.params {
        w.u32(t.shape().len() as u32);
        for &d in t.shape() {
            w.u32(d as u32);
        }
        w.f32_slice(t.data());
    }
    w.buf
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<Model<f32>, FormatError> {
    let mut r = Reader::new(bytes);
    r.magic(MODEL_MAGIC)?;
    let at = r.offset();
    let version = r.u32("version")?;
    if version != MODEL_VERSION {
        return Err(FormatError::Version { version, offset: at });
    }
    let input_height = r.u32("input height")? as usize;
    let input_width = r.u32("input width")? as usize;
    let kernel = r.u32("kernel")? as usize;
    let at = r.offset();
    let layers = r.u32("conv layer count")? as usize;
    if layers > 16 {
        return Err(FormatError::Invalid { offset: at, what: "conv layer count", detail: layers.to_string() });
    }
    let conv_depths = (0..layers).map(|_| r.u32("conv depth").map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
    let fc_hidden = r.u32("hidden width")? as usize;
    let num_classes = r.u32("class count")? as usize;
    let leaky_slope = r.f64("leaky slope")?;
    let dropout_p = r.f64("dropout probability")?;
    let config = ModelConfig { input_height, input_width, conv_depths, kernel, fc_hidden, num_classes, leaky_slope, dropout_p };
    config.check().map_err(|e| FormatError::Invalid { offset: at, what: "model config", detail: e.to_string() })?;
    let expected = config.param_shapes();
    let at = r.offset();
    let count = r.u32("tensor count")? as usize;
    if count != expected.len() {
        return Err(FormatError::Invalid { offset: at, what: "tensor count", detail: format!("{count}, expected {}", expected.len()) });
    }
    let mut params = Vec::with_capacity(count);
    for (name, shape) in &expected {
        let at = r.offset();
        let rank = r.u32("tensor rank")? as usize;
        if rank != shape.len() {
            return Err(FormatError::Invalid { offset: at, what: "tensor rank", detail: format!("{name}: {rank}") });
        }
        let dims = (0..rank).map(|_| r.u32("tensor dim").map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
        if &dims != shape {
            return Err(FormatError::Invalid { offset: at, what: "tensor shape", detail: format!("{name}: {dims:?}, expected {shape:?}") });
        }
        let data = r.f32_vec(shape.iter().product(), "tensor values")?;
        params.push(Tensor::from_vec(shape, data).expect("shape checked"));
    }
    r.finish()?;
    Ok(Model::from_params(config, params).expect("shapes checked"))
}

pub fn save_model(model: &Model<f32>, path: impl AsRef<Path>) -> Result<(), FormatError> {
    std::fs::write(path, model_to_bytes(model))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model<f32>, FormatError> {
    model_from_bytes(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_truncation() {
        let cfg = ModelConfig { input_height: 8, input_width: 8, conv_depths: vec![2], fc_hidden: 4, num_classes: 6, ..Default::default() };
        let m = Model::<f32>::new(cfg, 5).unwrap();
        let bytes = model_to_bytes(&m);
        let back = model_from_bytes(&bytes).unwrap();
        assert_eq!(back.params, m.params);
        assert_eq!(model_to_bytes(&back), bytes);
        for cut in [0, 3, 10, bytes.len() / 2, bytes.len() - 1] {
            assert!(model_from_bytes(&bytes[..cut]).is_err(), "cut {cut}");
        }
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(model_from_bytes(&bad), Err(FormatError::Version { version: 9, offset: 4 })));
    }
}
