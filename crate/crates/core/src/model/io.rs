//! JSON model files.
//!
//! Floats are written in shortest round-trip form, which reproduces every
//! weight bit-for-bit on load.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Activation, DenseLayer, GnnModel};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const MODEL_FORMAT_VERSION: u32 = 1;
const READOUT: &str = "max_mean_concat";

#[derive(Serialize, Deserialize)]
struct LayerRecord {
    weight: Vec<Vec<f64>>,
    bias: Vec<f64>,
    activation: String,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    attr_dim: usize,
    num_classes: usize,
    gcn_layers: Vec<LayerRecord>,
    head_layers: Vec<LayerRecord>,
    readout: String,
}

impl LayerRecord {
    fn from_layer(layer: &DenseLayer) -> Self {
        Self {
            weight: layer.weight.to_rows(),
            bias: layer.bias.clone(),
            activation: layer.activation.name().to_string(),
        }
    }

    fn into_layer(self) -> Result<DenseLayer> {
        let activation = Activation::parse(&self.activation)?;
        let cols = self.bias.len();
        let weight = Matrix::from_rows(&self.weight, cols).ok_or_else(|| {
            Error::ShapeMismatch(format!("weight rows must all have {cols} columns to match the bias"))
        })?;
        DenseLayer::new(weight, self.bias, activation)
    }
}

impl GnnModel {
    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            attr_dim: self.attr_dim,
            num_classes: self.num_classes,
            gcn_layers: self.gcn_layers.iter().map(LayerRecord::from_layer).collect(),
            head_layers: self.head_layers.iter().map(LayerRecord::from_layer).collect(),
            readout: READOUT.to_string(),
        };
        serde_json::to_string_pretty(&file).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::VersionMismatch { found: file.format_version, expected: MODEL_FORMAT_VERSION });
        }
        if file.readout != READOUT {
            return Err(Error::Validation(format!("unsupported readout `{}`", file.readout)));
        }
        let gcn = file.gcn_layers.into_iter().map(LayerRecord::into_layer).collect::<Result<Vec<_>>>()?;
        let head = file.head_layers.into_iter().map(LayerRecord::into_layer).collect::<Result<Vec<_>>>()?;
        let model = GnnModel::new(gcn, head)?;
        if model.attr_dim != file.attr_dim || model.num_classes != file.num_classes {
            return Err(Error::ShapeMismatch(format!(
                "declared attr_dim {} / num_classes {} but layers give {} / {}",
                file.attr_dim, file.num_classes, model.attr_dim, model.num_classes
            )));
        }
        Ok(model)
    }
}

pub fn save_model(model: &GnnModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, model.to_json())?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<GnnModel> {
    GnnModel::from_json(&fs::read_to_string(path)?)
}
