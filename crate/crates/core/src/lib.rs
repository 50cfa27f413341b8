//! Detection evaluation for dual-view X-ray baggage scans.
//!
//! Box geometry, greedy matching with PR/AP, multi-view fusion, anchor
//! clustering, JSON-lines datasets, a synthetic dual-energy scan
//! generator, a heuristic baseline detector, and a timed pipeline.
//!
//! Geometry, metrics, fusion and anchors are generic over [`Scalar`]
//! (`f32` or `f64`); the aliases below name the common instantiations.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod anchors;
pub mod dataset;
pub mod detector;
pub mod error;
pub mod geometry;
pub mod metrics;
pub mod multiview;
pub mod pipeline;
pub mod plot;
pub mod scalar;
pub mod synth;

pub use anchors::{
    anchor_coverage, centered_iou, kmeans_anchors, kmeans_best_of, tile_anchors, AnchorConfig,
    BoxDims, Coverage, KMeansResult, TiledAnchor,
};
pub use dataset::{
    load_annotations, load_detections, save_annotations, save_detections, split_dataset,
    DatasetSplit, GroupBy, ScanAnnotation, SplitFractions,
};
pub use detector::{BaselineDetector, Detector, DetectorParams, RecordedDetector};
pub use error::{Error, Result};
pub use geometry::{iou, nms, BBox, ClassId, Detection, ObjectId, ScanId, View};
pub use metrics::{
    average_precision, match_detections, mean_ap, pr_curve, GroundTruthObject, MatchResult,
    PrCurve, PrPoint,
};
pub use multiview::{fuse_evaluation, fused_objects, single_view_evaluation, EvalMode, FusedObject};
pub use pipeline::{
    detect_all, evaluate, run_pipeline, with_jobs, Evaluation, LatencyReport, PipelineOutput,
};
pub use plot::{parse_pr_csv, plot_dims, plot_pr, PrSeries};
pub use scalar::Scalar;

pub type BBoxF32 = BBox<f32>;
pub type BBoxF64 = BBox<f64>;
pub type DetectionF32 = Detection<f32>;
pub type DetectionF64 = Detection<f64>;
pub type GroundTruthF32 = GroundTruthObject<f32>;
pub type GroundTruthF64 = GroundTruthObject<f64>;
pub type PrCurveF32 = PrCurve<f32>;
pub type PrCurveF64 = PrCurve<f64>;
pub type BoxDimsF32 = BoxDims<f32>;
pub type BoxDimsF64 = BoxDims<f64>;
