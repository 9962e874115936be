//! Scene ingestion, run configuration and artifact emission.

pub mod config;
pub mod hologram;
pub mod report;
pub mod scene;

pub use config::{OpticsSection, RunConfig, SceneSection};
pub use hologram::{
    dequantize_phase, load_hologram, quantize_phase, save_hologram, sidecar_path, HologramMetadata, DEPTH_CONVENTION,
};
pub use report::{
    read_loss_csv, save_intensity_png, save_stack_and_report, write_json, write_loss_csv, WrittenArtifacts,
};
pub use scene::{load_scene, save_scene, synthetic_scene};
