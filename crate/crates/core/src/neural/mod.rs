//! From-scratch LSTM networks: layer recurrences with backpropagation through
//! time, a two-layer sequence network, Adam, and an early-stopping trainer.

pub mod adam;
pub mod lstm;
pub mod network;
pub mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use lstm::{LayerCache, LstmLayerWeights};
pub use network::{Bridge, ForwardPass, Gradients, Hyper, LstmEncoderDecoder};
pub use train::{predict, train, train_backtracking, window, TrainReport, Window};
