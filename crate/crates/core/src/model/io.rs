//! Model persistence: one GRVM file per tensor (weights, biases,
//! batchnorm parameters and running statistics) plus a TOML manifest.
//! Storage is f32, so a reloaded model reproduces eval-mode outputs to
//! single precision.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{load_toml, save_toml, ConfigError};
use crate::numerics::grvm;
use crate::numerics::matrix::Matrix;
use crate::numerics::nn::{BatchNorm, Dense};

use super::{GrooveHyper, GrooveModel, MlpStack};

#[derive(Debug, Serialize, Deserialize)]
pub struct ModelManifest {
    pub hyper: GrooveHyper,
    pub feat_x: usize,
    pub feat_y: usize,
    pub hidden1: usize,
    pub hidden2: usize,
    pub tensors: Vec<String>,
}

fn stack_tensors(prefix: &str, stack: &MlpStack) -> Vec<(String, Matrix)> {
    let bn = |name: &str, bn: &BatchNorm| {
        vec![
            (format!("{name}_gamma"), bn.gamma.clone()),
            (format!("{name}_beta"), bn.beta.clone()),
            (format!("{name}_mean"), Matrix::row_vector(&bn.running_mean)),
            (format!("{name}_var"), Matrix::row_vector(&bn.running_var)),
        ]
    };
    let mut out = vec![
        (format!("{prefix}_l1_w"), stack.l1.weight.clone()),
        (format!("{prefix}_l1_b"), stack.l1.bias.clone()),
    ];
    out.extend(bn(&format!("{prefix}_bn1"), &stack.bn1));
    out.push((format!("{prefix}_l2_w"), stack.l2.weight.clone()));
    out.push((format!("{prefix}_l2_b"), stack.l2.bias.clone()));
    out.extend(bn(&format!("{prefix}_bn2"), &stack.bn2));
    out.push((format!("{prefix}_l3_w"), stack.l3.weight.clone()));
    out.push((format!("{prefix}_l3_b"), stack.l3.bias.clone()));
    out
}

fn named_tensors(model: &GrooveModel) -> Vec<(String, Matrix)> {
    let mut out = stack_tensors("enc_x", &model.enc_x);
    out.extend(stack_tensors("enc_y", &model.enc_y));
    out.push(("coupling_w".into(), model.coupling.weight.clone()));
    out.push(("coupling_b".into(), model.coupling.bias.clone()));
    out.extend(stack_tensors("dec_x", &model.dec_x));
    out.extend(stack_tensors("dec_y", &model.dec_y));
    out
}

pub fn save_model(model: &GrooveModel, hidden: (usize, usize), dir: &Path) -> Result<(), ConfigError> {
    fs::create_dir_all(dir).map_err(|source| ConfigError::Write {
        path: dir.to_path_buf(),
        source,
    })?;
    let tensors = named_tensors(model);
    for (name, tensor) in &tensors {
        grvm::write_matrix(&dir.join(format!("{name}.grvm")), tensor)?;
    }
    let manifest = ModelManifest {
        hyper: model.hyper.clone(),
        feat_x: model.enc_x.in_dim(),
        feat_y: model.enc_y.in_dim(),
        hidden1: hidden.0,
        hidden2: hidden.1,
        tensors: tensors.into_iter().map(|(n, _)| n).collect(),
    };
    save_toml(&dir.join("manifest.toml"), &manifest, "model manifest")
}

struct TensorReader<'a> {
    dir: &'a Path,
}

impl TensorReader<'_> {
    fn read(&self, name: &str) -> Result<Matrix, ConfigError> {
        Ok(grvm::read_matrix(&self.dir.join(format!("{name}.grvm")))?)
    }

    fn dense(&self, prefix: &str) -> Result<Dense, ConfigError> {
        Ok(Dense {
            weight: self.read(&format!("{prefix}_w"))?,
            bias: self.read(&format!("{prefix}_b"))?,
        })
    }

    fn batchnorm(&self, prefix: &str) -> Result<BatchNorm, ConfigError> {
        let gamma = self.read(&format!("{prefix}_gamma"))?;
        let beta = self.read(&format!("{prefix}_beta"))?;
        let mean = self.read(&format!("{prefix}_mean"))?;
        let var = self.read(&format!("{prefix}_var"))?;
        Ok(BatchNorm {
            gamma,
            beta,
            running_mean: mean.data().to_vec(),
            running_var: var.data().to_vec(),
            momentum: 0.1,
        })
    }

    fn stack(&self, prefix: &str) -> Result<MlpStack, ConfigError> {
        Ok(MlpStack {
            l1: self.dense(&format!("{prefix}_l1"))?,
            bn1: self.batchnorm(&format!("{prefix}_bn1"))?,
            l2: self.dense(&format!("{prefix}_l2"))?,
            bn2: self.batchnorm(&format!("{prefix}_bn2"))?,
            l3: self.dense(&format!("{prefix}_l3"))?,
        })
    }
}

pub fn load_model(dir: &Path) -> Result<GrooveModel, ConfigError> {
    let manifest: ModelManifest = load_toml(&dir.join("manifest.toml"))?;
    let reader = TensorReader { dir };
    Ok(GrooveModel {
        enc_x: reader.stack("enc_x")?,
        enc_y: reader.stack("enc_y")?,
        coupling: reader.dense("coupling")?,
        dec_x: reader.stack("dec_x")?,
        dec_y: reader.stack("dec_y")?,
        hyper: manifest.hyper,
    })
}
