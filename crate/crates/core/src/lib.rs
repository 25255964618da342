//! Hybrid short-term electricity demand forecasting.
//!
//! A seasonal linear model captures calendar, holiday and capacity effects;
//! an LSTM encoder-decoder predicts what the linear model misses from
//! weather and clock features. Benchmarks (GEFCom "vanilla" regression,
//! random forest, plain and encoder-decoder LSTMs) and a day-ahead
//! backtesting harness are included.

pub mod ensembles;
pub mod evaluation;
pub mod error;
pub mod features;
pub mod ingest;
pub mod linear;
pub mod neural;
pub mod numerics;
pub mod pipeline;
pub mod series;

pub use error::{Error, Result};
