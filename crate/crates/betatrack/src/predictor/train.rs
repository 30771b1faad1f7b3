//! Mini-batch gradient descent with momentum, cosine-annealed learning
//! rate, L2 regularization and early stopping on validation loss.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::mlp::{MlpArch, MlpNet};

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub momentum: f64,
    pub l2: f64,
    pub initial_lr: f64,
    pub max_epochs: usize,
    /// Epochs without a new best validation loss before stopping.
    pub patience: usize,
    pub extractor_widths: Vec<usize>,
    pub head_hidden: usize,
    pub dropout: f64,
    pub leaky_slope: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 512,
            momentum: 0.1,
            l2: 1.0e-4,
            initial_lr: 1.0e-2,
            max_epochs: 100,
            patience: 10,
            extractor_widths: vec![64, 64],
            head_hidden: 64,
            dropout: 0.1,
            leaky_slope: 0.01,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err("batch_size and max_epochs must be positive".into());
        }
        if self.patience == 0 {
            return Err("patience must be at least 1".into());
        }
        if self.initial_lr <= 0.0 || self.momentum < 0.0 || self.l2 < 0.0 {
            return Err("learning rate must be positive; momentum and l2 non-negative".into());
        }
        Ok(())
    }

    pub fn arch(&self, input_dim: usize, outputs: usize) -> MlpArch {
        MlpArch {
            input_dim,
            extractor_widths: self.extractor_widths.clone(),
            head_hidden: self.head_hidden,
            outputs,
            dropout: self.dropout,
            leaky_slope: self.leaky_slope,
        }
    }
}

/// Cosine-annealed learning rate for a 0-based epoch index, decaying from
/// the initial rate to zero at `max_epochs`.
pub fn cosine_lr(initial: f64, epoch: usize, max_epochs: usize) -> f64 {
    if epoch >= max_epochs {
        return 0.0;
    }
    0.5 * initial * (1.0 + (std::f64::consts::PI * epoch as f64 / max_epochs as f64).cos())
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub net: MlpNet,
    pub best_val_loss: f64,
    pub epochs_run: usize,
    /// Training data loss (no L2) before the first update.
    pub initial_train_loss: f64,
    /// Training data loss at the final parameters.
    pub final_train_loss: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("insufficient data: {0} block is empty")]
    EmptyBlock(&'static str),

    #[error("invalid train config: {0}")]
    BadConfig(String),

    #[error("target/input row mismatch: {inputs} inputs vs {targets} targets")]
    RowMismatch { inputs: usize, targets: usize },
}

/// Train on already CDF-transformed matrices (rows = records). Inputs and
/// targets are expected to lie in (0, 1); the loss is plain MSE between the
/// sigmoid outputs and the targets, plus `l2 * sum(theta^2)`.
pub fn fit_transformed(
    x_train: &Array2<f64>,
    y_train: &Array2<f64>,
    x_val: &Array2<f64>,
    y_val: &Array2<f64>,
    cfg: &TrainConfig,
) -> Result<FitOutcome, TrainError> {
    cfg.validate().map_err(TrainError::BadConfig)?;
    if x_train.nrows() == 0 {
        return Err(TrainError::EmptyBlock("train"));
    }
    if x_val.nrows() == 0 {
        return Err(TrainError::EmptyBlock("validation"));
    }
    if x_train.nrows() != y_train.nrows() {
        return Err(TrainError::RowMismatch { inputs: x_train.nrows(), targets: y_train.nrows() });
    }
    if x_val.nrows() != y_val.nrows() {
        return Err(TrainError::RowMismatch { inputs: x_val.nrows(), targets: y_val.nrows() });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let arch = cfg.arch(x_train.ncols(), y_train.ncols());
    let mut net = MlpNet::new(arch, &mut rng);
    let mut velocity = vec![0.0; net.param_count()];

    let initial_train_loss = MlpNet::mse(&net.infer(x_train), y_train);
    let mut best_val = f64::INFINITY;
    let mut best_params: Vec<f64> = net.params().to_vec();
    let mut stale_epochs = 0usize;
    let mut epochs_run = 0usize;

    let n = x_train.nrows();
    let mut order: Vec<usize> = (0..n).collect();

    for epoch in 0..cfg.max_epochs {
        epochs_run = epoch + 1;
        let lr = cosine_lr(cfg.initial_lr, epoch, cfg.max_epochs);
        order.shuffle(&mut rng);

        for chunk in order.chunks(cfg.batch_size) {
            let xb = gather_rows(x_train, chunk);
            let yb = gather_rows(y_train, chunk);
            let cache = net.forward(&xb, Some(&mut rng));
            let mut grad = net.backward(&cache, &yb);
            if cfg.l2 > 0.0 {
                let two_l2 = 2.0 * cfg.l2;
                for (g, &p) in grad.iter_mut().zip(net.params()) {
                    *g += two_l2 * p;
                }
            }
            for ((v, g), p) in velocity.iter_mut().zip(&grad).zip(net.params_mut()) {
                *v = cfg.momentum * *v + g;
                *p -= lr * *v;
            }
        }

        let val_loss = MlpNet::mse(&net.infer(x_val), y_val);
        if val_loss < best_val {
            best_val = val_loss;
            best_params.copy_from_slice(net.params());
            stale_epochs = 0;
        } else {
            stale_epochs += 1;
            if stale_epochs >= cfg.patience {
                break;
            }
        }
    }

    net.set_params(best_params);
    let final_train_loss = MlpNet::mse(&net.infer(x_train), y_train);
    Ok(FitOutcome { net, best_val_loss: best_val, epochs_run, initial_train_loss, final_train_loss })
}

fn gather_rows(data: &Array2<f64>, rows: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((rows.len(), data.ncols()));
    for (k, &r) in rows.iter().enumerate() {
        out.row_mut(k).assign(&data.row(r));
    }
    out
}
