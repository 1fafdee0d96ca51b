//! Text localization in videos and still images.
//!
//! The pipeline detects shot boundaries from color-moment signatures,
//! extracts keyframes at peaks of the distance to a temporally maximum
//! occurrence frame, enhances stroke edges with a multilevel wavelet
//! decomposition, scores pixels by the maximum gradient difference of
//! the Laplacian-filtered image, and confirms text regions with
//! Otsu binarization, geometric rules, dilation, and connected-component
//! analysis. An evaluation harness scores detections at the block level
//! (detection / false-positive / misdetection rates, precision, recall,
//! F measure), and a synthetic corpus generator provides deterministic
//! inputs with exact ground truth.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod gray;
pub mod keyframe;
pub mod media;
pub mod pipeline;
pub mod rect;
pub mod region;
pub mod saliency;
pub mod shot;
pub mod wavelet;

mod stats;

pub use error::{Error, Result};
pub use gray::{BinaryImage, GrayImage};
pub use media::{Frame, SourceKind};
pub use pipeline::{PipelineConfig, RunReport};
pub use rect::Rect;
pub use region::TextBox;
