//! GCN and MLP node classifiers trained transductively: every forward pass
//! sees all node features and edges, only training labels enter the loss.

mod context;
mod eval;
mod model;
mod optim;
mod params;
mod train;

pub use context::{normalize_adjacency, ForwardContext};
pub use eval::{accuracy, evaluate, predict_logits};
pub use model::{forward_logits, loss_and_grad};
pub use optim::{Optimizer, OptimizerKind};
pub use params::{Architecture, LayerKind, LayerShape, ModelHeader, ModelParams};
pub use train::{train, LogRecord, Regime, TrainConfig, TrainMode, TrainOutcome};
