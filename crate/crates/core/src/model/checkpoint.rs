//! Weight files: one named little-endian f32 array per parameter (running
//! batch-norm statistics included) in safetensors layout, with the model
//! configuration stored as JSON metadata.

use std::collections::HashMap;
use std::path::Path;

use lvsnet_tensor::{Float, Tensor};
use safetensors::tensor::{Dtype, SafeTensors, TensorView};

use super::LvsNet;
use crate::config::ModelConfig;
use crate::error::{Error, Result};

const CONFIG_KEY: &str = "model_config";

pub fn save_checkpoint<T: Float>(net: &LvsNet<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let buffers: Vec<(String, Vec<usize>, Vec<u8>)> = net
        .store
        .iter()
        .map(|(_, e)| {
            let bytes = e
                .value
                .data()
                .iter()
                .flat_map(|v| (v.to_f64_lossy() as f32).to_le_bytes())
                .collect();
            (e.name.clone(), e.value.shape().to_vec(), bytes)
        })
        .collect();
    let views = buffers
        .iter()
        .map(|(name, shape, bytes)| {
            TensorView::new(Dtype::F32, shape.clone(), bytes)
                .map(|v| (name.clone(), v))
                .map_err(|e| Error::Checkpoint(format!("{name}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let meta = HashMap::from([(CONFIG_KEY.to_string(), serde_json::to_string(net.config())?)]);
    safetensors::serialize_to_file(views, &Some(meta), path)
        .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))
}

/// Rebuilds the network described by the file's stored configuration and
/// fills every parameter from it.
pub fn load_checkpoint<T: Float>(path: impl AsRef<Path>) -> Result<LvsNet<T>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |msg: String| Error::Checkpoint(format!("{}: {msg}", path.display()));
    let (_, header) = SafeTensors::read_metadata(&bytes).map_err(|e| bad(e.to_string()))?;
    let cfg_json = header
        .metadata()
        .as_ref()
        .and_then(|m| m.get(CONFIG_KEY))
        .ok_or_else(|| bad("no stored model configuration".into()))?;
    let cfg: ModelConfig = serde_json::from_str(cfg_json)?;
    let mut net = LvsNet::<T>::new(&cfg)?;
    let file = SafeTensors::deserialize(&bytes).map_err(|e| bad(e.to_string()))?;
    let ids: Vec<_> = net.store.iter().map(|(id, e)| (id, e.name.clone())).collect();
    if file.len() != ids.len() {
        return Err(bad(format!("{} arrays for a model with {}", file.len(), ids.len())));
    }
    for (id, name) in ids {
        let view = file.tensor(&name).map_err(|_| bad(format!("missing array {name}")))?;
        if view.dtype() != Dtype::F32 {
            return Err(bad(format!("{name} is {:?}, expected F32", view.dtype())));
        }
        let data = view
            .data()
            .chunks_exact(4)
            .map(|c| T::lit(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64))
            .collect();
        let value = Tensor::from_vec(view.shape(), data)?;
        net.store.set(id, value).map_err(|e| bad(format!("{name}: {e}")))?;
    }
    Ok(net)
}
