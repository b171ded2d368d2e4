//! Full-batch Adam training on mean cross-entropy.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Architecture, GnnModel};
use crate::adam::Adam;
use crate::datasets::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self { lr: 0.001, epochs: 300, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub train_accuracy: f64,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: GnnModel,
    pub trace: Vec<EpochStats>,
    pub train_accuracy: f64,
    pub val_accuracy: Option<f64>,
    pub test_accuracy: Option<f64>,
}

/// Fits a freshly initialized model on the dataset's training split.
///
/// Graph gradients are computed in parallel and summed in split order, so the
/// result depends only on `params.seed`.
pub fn train(arch: &Architecture, dataset: &Dataset, params: &TrainParams) -> Result<TrainOutcome> {
    if dataset.graphs.is_empty() || dataset.split.train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if arch.attr_dim != dataset.attr_dim {
        return Err(Error::ShapeMismatch(format!(
            "architecture attr_dim {} vs dataset attr_dim {}",
            arch.attr_dim, dataset.attr_dim
        )));
    }
    let labels = dataset.labels()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut model = GnnModel::init(arch, &mut rng)?;
    let mut flat = model.flat_params();
    let mut adam = Adam::new(flat.len(), params.lr);
    let train_idx = &dataset.split.train;
    let scale = 1.0 / train_idx.len() as f64;

    let mut trace = Vec::with_capacity(params.epochs);
    for epoch in 0..params.epochs {
        let per_graph = train_idx
            .par_iter()
            .map(|&i| model.weight_gradients(&dataset.graphs[i], labels[i]))
            .collect::<Result<Vec<_>>>()?;
        let mut grad = vec![0.0; flat.len()];
        let mut loss = 0.0;
        let mut correct = 0usize;
        for (&i, (pred, g)) in train_idx.iter().zip(&per_graph) {
            loss += g.loss;
            correct += usize::from(pred.predicted_class == labels[i]);
            for (acc, v) in grad.iter_mut().zip(&g.flat) {
                *acc += v;
            }
        }
        loss *= scale;
        grad.iter_mut().for_each(|g| *g *= scale);
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteLoss {
                epoch,
                detail: format!("mean training loss {loss}"),
            });
        }
        let val_accuracy = accuracy(&model, dataset, &dataset.split.validation, &labels)?;
        trace.push(EpochStats {
            epoch,
            loss,
            train_accuracy: correct as f64 * scale,
            val_accuracy,
        });
        adam.update(&mut flat, &grad);
        model.set_flat_params(&flat);
    }

    let train_accuracy = accuracy(&model, dataset, train_idx, &labels)?.unwrap_or(0.0);
    let val_accuracy = accuracy(&model, dataset, &dataset.split.validation, &labels)?;
    let test_accuracy = accuracy(&model, dataset, &dataset.split.test, &labels)?;
    Ok(TrainOutcome { model, trace, train_accuracy, val_accuracy, test_accuracy })
}

/// Fraction of `indices` predicted correctly; `None` for an empty split.
pub(crate) fn accuracy(model: &GnnModel, dataset: &Dataset, indices: &[usize], labels: &[usize]) -> Result<Option<f64>> {
    if indices.is_empty() {
        return Ok(None);
    }
    let hits = indices
        .par_iter()
        .map(|&i| Ok(usize::from(model.forward(&dataset.graphs[i])?.predicted_class == labels[i])))
        .collect::<Result<Vec<_>>>()?;
    Ok(Some(hits.iter().sum::<usize>() as f64 / indices.len() as f64))
}
