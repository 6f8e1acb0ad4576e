//! Binary classifier, FedAVG aggregation, and dataset handling.

pub mod data;
pub mod model;
pub mod partition;
pub mod train;

pub use data::{load_csv, make_synthetic, Dataset};
pub use model::{init_params, Architecture, ParamVector};
pub use partition::{local_split, partition, LocalSplit, PartitionMode};
pub use train::{
    evaluate, fedavg, local_train, local_train_with, objective_and_gradient, EvalScore, Proximal,
    TrainConfig,
};
