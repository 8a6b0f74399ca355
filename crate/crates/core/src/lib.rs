//! Classifier training with adaptive latent label representations.
//!
//! Each class is represented by a vector in the encoder's output space.
//! During training the vectors are periodically replaced by the class
//! centroids of the current batch encodings, and samples are pulled
//! towards their own class vector with a distance-softmax loss. A
//! one-hot softmax baseline, label-structure analysis against a class
//! hierarchy, data loaders and an experiment runner are included.

pub mod analysis;
pub mod autodiff;
pub mod checkpoint;
pub mod data;
pub mod encoder;
pub mod error;
pub mod harness;
pub mod kv;
pub mod lwal;
pub mod optim;
pub mod tensor;

pub use error::{Error, Result};
