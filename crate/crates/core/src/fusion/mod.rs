//! Event-ordered orchestration: merges multi-rate sensor streams, drives the
//! filter and turns consecutive camera frames into velocity updates.

mod runtime;
mod timeline;

pub use runtime::{
    matched_filter_config, run_fusion, FlowStats, FrameSource, FusionConfig, NavLog, NavRecord,
    NOISE_FLOOR,
};
pub use timeline::{merge_streams, SensorTimeline};
