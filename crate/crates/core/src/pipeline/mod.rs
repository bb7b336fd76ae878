//! Event generation, feature extraction, streaming detection and the
//! bootstrap evaluation harness.

mod bootstrap;
mod config;
mod events;
mod features;
mod stream;
mod synth;

pub use bootstrap::{evaluate_bootstrap, BootstrapResult, Trial, MIN_HEALTHY};
pub use config::PipelineConfig;
pub use events::{read_manifest, write_events, EventRecord, Label};
pub use features::{extract_features, feature_tensor, Features, STD_FLOOR};
pub use stream::{event_features, run_stream, run_stream_features, StreamOutput, LOCATION_MODE};
pub use synth::{synth_cp, synth_shm, ShmParams};
