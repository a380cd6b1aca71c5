//! Framework-free MLP: forward/backward passes, loss, and optimizers.

pub mod arch;
pub mod batch;
pub mod loss;
pub mod mlp;
pub mod optim;
pub mod params;

pub use arch::MlpArchitecture;
pub use batch::{Matrix, MiniBatch};
pub use loss::softmax_cross_entropy;
pub use mlp::{backward, batch_loss, forward, Scratch};
pub use optim::{adam_step, sgd_step, AdamState};
pub use params::{init_params, init_params_with, LayerSegment, ParamLayout, ParamVector};
