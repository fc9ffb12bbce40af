//! Checkpoint files: `I2SC` magic, version, JSON config, raw parameters.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_f64, read_magic, read_u32, read_u64};
use crate::trainer::{Model, ModelConfig, TrainConfig};

const MAGIC: &[u8; 4] = b"I2SC";
const VERSION: u32 = 1;

/// Configuration echo stored in every checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub epoch: usize,
    pub step: usize,
    /// Tensor names and sizes in storage order.
    pub tensors: Vec<(String, usize)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub params: Vec<f64>,
}

impl Checkpoint {
    pub fn write(&self, mut w: impl Write) -> Result<()> {
        let json = serde_json::to_string(&self.meta)?;
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(json.len() as u64).to_le_bytes())?;
        w.write_all(json.as_bytes())?;
        w.write_all(&(self.params.len() as u64).to_le_bytes())?;
        for p in &self.params {
            w.write_all(&p.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read(mut r: impl Read) -> Result<Self> {
        read_magic(&mut r, MAGIC)?;
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let len = read_u64(&mut r)? as usize;
        if len > 1 << 24 {
            return Err(Error::Format(format!("config blob of {len} bytes is implausible")));
        }
        let mut json = vec![0u8; len];
        r.read_exact(&mut json)?;
        let meta: CheckpointMeta = serde_json::from_slice(&json)?;
        let n = read_u64(&mut r)? as usize;
        let declared: usize = meta.tensors.iter().map(|(_, s)| s).sum();
        if n != declared {
            return Err(Error::Format(format!(
                "checkpoint holds {n} parameters but its tensors declare {declared}"
            )));
        }
        let mut params = Vec::with_capacity(n);
        for _ in 0..n {
            params.push(read_f64(&mut r)?);
        }
        Ok(Checkpoint { meta, params })
    }

    /// Rebuild the model this checkpoint was taken from.
    pub fn into_model(self) -> Result<Model> {
        let mut model = Model::new(self.meta.model.clone())?;
        if model.param_names() != self.meta.tensors {
            return Err(Error::Config(
                "checkpoint tensors do not match the layout of its model config".into(),
            ));
        }
        model.set_params(&self.params)?;
        Ok(model)
    }
}

pub fn write_checkpoint(
    path: &Path,
    model: &Model,
    train: &TrainConfig,
    epoch: usize,
    step: usize,
) -> Result<()> {
    let ck = Checkpoint {
        meta: CheckpointMeta {
            model: model.config.clone(),
            train: train.clone(),
            epoch,
            step,
            tensors: model.param_names(),
        },
        params: model.params(),
    };
    let mut w = BufWriter::new(File::create(path)?);
    ck.write(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::read(BufReader::new(File::open(path)?))
}

pub fn load_checkpoint(path: &Path) -> Result<Model> {
    read_checkpoint(path)?.into_model()
}
