//! Dataset loading, synthetic generation, splits and mini-batching.

pub mod csv;
mod dataset;
pub mod idx;
pub mod synth;

pub use self::csv::{load_csv, write_csv};
pub use dataset::{batches, epoch_seed, split, Batches, Dataset};
pub use idx::load_idx;
pub use synth::{gen_synthetic, SynthSpec, Synthetic};
