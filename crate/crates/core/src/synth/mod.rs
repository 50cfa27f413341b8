//! Synthetic dual-view, dual-energy scans with ground truth.

pub mod color;
pub mod generate;
pub mod physics;
pub mod render;
pub mod scene;

pub use color::{false_color, FalseColorImage};
pub use generate::{generate_dataset, generate_scan, sample_scene, GeneratorConfig, ANNOTATIONS_FILE};
pub use physics::{HueClass, Material, Physics, PhysicsConfig};
pub use render::{render_view, render_views, RenderedView, ViewBox};
pub use scene::{SynthObject, SynthScene};
