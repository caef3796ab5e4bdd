//! Low-latency multichannel auralization on uniform partitioned convolution.
//!
//! The engine splits each filter into block-sized partitions, keeps recent
//! input spectra in a frequency delay line and produces output by
//! overlap-save. [`Auralizer`] chains a synthesis convolver with a feedback
//! cancellation convolver whose estimate is subtracted from the next
//! microphone block.

pub mod auralizer;
pub mod backend;
pub mod bench;
pub mod config;
pub mod convolver;
pub mod dft;
pub mod error;
pub mod io;
pub mod oracle;
pub mod partition;
pub mod verify;

pub use auralizer::Auralizer;
pub use backend::{list_backends, Backend, BackendDescriptor, BackendKind};
pub use config::{latency_budget, partition_count, validate_config, AudioBlock, EngineConfig, Mode};
pub use convolver::Convolver;
pub use dft::{DftPlan, SpectrumBlock, TransformProvider};
pub use error::{Error, Result};
pub use partition::{FrequencyDelayLine, PartitionedFilterSet};
