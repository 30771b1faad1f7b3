//! The per-episode supervised model: CDF transform, feature extractor,
//! per-output sigmoid heads, inverse CDF.
//!
//! One model is trained per rebalance episode and stays bound to it via an
//! episode tag; its CDFs were fit on that episode's train block only, so a
//! model must never score records from another episode.

pub mod gradcheck;
pub mod mlp;
pub mod train;

use ndarray::Array2;

use crate::features::cdf::{CdfError, CdfGranularity, InputCdfSet, TargetCdfSet};
use crate::features::{FeatureGridSpec, FeatureTensor};
use crate::targets::{EstimateKind, FactorEstimate};

pub use mlp::{MlpArch, MlpNet};
pub use train::{cosine_lr, fit_transformed, FitOutcome, TrainConfig, TrainError};

/// Binds a trained model to the rebalance episode whose train block fit it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct EpisodeTag {
    pub rebalance_step: usize,
}

/// One raw (untransformed) training record: flattened tensor plus the
/// target triple (alpha, beta, residual).
#[derive(Debug, Clone)]
pub struct TrainRecord {
    pub inputs: Vec<f64>,
    pub target: [f64; 3],
}

#[derive(Debug, thiserror::Error)]
pub enum PredictError {
    #[error("tensor has {got} cells but the model's grid expects {want}")]
    GridMismatch { got: usize, want: usize },

    #[error("model is bound to episode {bound} but was asked to score episode {asked}")]
    EpisodeMismatch { bound: usize, asked: usize },
}

#[derive(Debug, thiserror::Error)]
pub enum PredictorBuildError {
    #[error(transparent)]
    Train(#[from] TrainError),

    #[error("CDF fit failed on {block} block: {source}")]
    Cdf {
        block: &'static str,
        #[source]
        source: CdfError,
    },
}

/// A trained predictor with its fitted transforms.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct PredictorModel {
    pub net: MlpNet,
    pub input_cdfs: InputCdfSet,
    pub target_cdfs: TargetCdfSet,
    pub grid: FeatureGridSpec,
    pub granularity: CdfGranularity,
    pub train_config: TrainConfig,
    pub episode: EpisodeTag,
    /// Best validation loss reached during training (transformed space).
    pub best_val_loss: f64,
    pub epochs_run: usize,
}

impl PredictorModel {
    /// Score one tensor: transform, run the network, map the sigmoid
    /// outputs back through the inverse target CDFs.
    pub fn forward(&self, tensor: &FeatureTensor) -> Result<FactorEstimate, PredictError> {
        let want = self.grid.n_cells();
        if tensor.values().len() != want {
            return Err(PredictError::GridMismatch { got: tensor.values().len(), want });
        }
        let mut row = tensor.values().to_vec();
        self.input_cdfs.transform_row(&mut row);
        let x = Array2::from_shape_vec((1, want), row).expect("row shape");
        let out = self.net.infer(&x);
        let inv = self.target_cdfs.inverse([out[(0, 0)], out[(0, 1)], out[(0, 2)]]);
        Ok(FactorEstimate {
            alpha: inv[0],
            beta: inv[1],
            residual: inv[2],
            kind: EstimateKind::Predicted,
        })
    }

    /// Guard used by the backtest: a model only scores its own episode.
    pub fn check_episode(&self, rebalance_step: usize) -> Result<(), PredictError> {
        if self.episode.rebalance_step != rebalance_step {
            return Err(PredictError::EpisodeMismatch {
                bound: self.episode.rebalance_step,
                asked: rebalance_step,
            });
        }
        Ok(())
    }

    pub fn save_json<W: std::io::Write>(&self, out: W) -> serde_json::Result<()> {
        serde_json::to_writer(out, self)
    }

    pub fn load_json<R: std::io::Read>(input: R) -> serde_json::Result<Self> {
        serde_json::from_reader(input)
    }
}

/// Fit CDFs on the train block, transform both blocks, train the network,
/// and assemble the episode-bound model.
pub fn train(
    train_records: &[TrainRecord],
    validation_records: &[TrainRecord],
    grid: &FeatureGridSpec,
    granularity: CdfGranularity,
    cfg: &TrainConfig,
    episode: EpisodeTag,
) -> Result<PredictorModel, PredictorBuildError> {
    if train_records.is_empty() {
        return Err(TrainError::EmptyBlock("train").into());
    }
    if validation_records.is_empty() {
        return Err(TrainError::EmptyBlock("validation").into());
    }
    let n_cells = grid.n_cells();

    let mut train_inputs = Vec::with_capacity(train_records.len() * n_cells);
    let mut train_targets = Vec::with_capacity(train_records.len());
    for r in train_records {
        assert_eq!(r.inputs.len(), n_cells, "record tensor width mismatch");
        train_inputs.extend_from_slice(&r.inputs);
        train_targets.push(r.target);
    }

    let input_cdfs = InputCdfSet::fit(&train_inputs, n_cells, grid, granularity)
        .map_err(|source| PredictorBuildError::Cdf { block: "train inputs", source })?;
    let target_cdfs = TargetCdfSet::fit(&train_targets)
        .map_err(|source| PredictorBuildError::Cdf { block: "train targets", source })?;

    let to_matrices = |records: &[TrainRecord]| -> (Array2<f64>, Array2<f64>) {
        let mut x = Array2::zeros((records.len(), n_cells));
        let mut y = Array2::zeros((records.len(), 3));
        for (k, r) in records.iter().enumerate() {
            let mut row = r.inputs.clone();
            input_cdfs.transform_row(&mut row);
            x.row_mut(k).assign(&ndarray::ArrayView1::from(&row));
            let t = target_cdfs.transform(r.target);
            y.row_mut(k).assign(&ndarray::ArrayView1::from(&t));
        }
        (x, y)
    };
    let (x_train, y_train) = to_matrices(train_records);
    let (x_val, y_val) = to_matrices(validation_records);

    let outcome = fit_transformed(&x_train, &y_train, &x_val, &y_val, cfg)?;
    Ok(PredictorModel {
        net: outcome.net,
        input_cdfs,
        target_cdfs,
        grid: grid.clone(),
        granularity,
        train_config: cfg.clone(),
        episode,
        best_val_loss: outcome.best_val_loss,
        epochs_run: outcome.epochs_run,
    })
}
