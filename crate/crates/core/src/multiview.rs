//! Object-level evaluation across the two views of a bag-scan.
//!
//! Each view is matched on its own exactly as in [`crate::metrics`]. A
//! physical object then counts as found at threshold `t` when any of its
//! view instances was claimed by a detection scoring at least `t`; the
//! object is credited at the best such score. Unclaimed detections stay
//! false positives in whichever view produced them, so the fused false
//! positive count is the per-view sum.

use std::collections::BTreeMap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::geometry::{BBox, ClassId, Detection, ObjectId, ScanId, View};
use crate::metrics::{
    format_significant, match_per_image, pr_curve, sweep, GroundTruthObject, PrCurve,
};
use crate::scalar::{cmp_scalar, Scalar};

/// Evaluation mode of a results table or curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EvalMode {
    /// Every view image scored independently.
    Single,
    /// Views merged per physical object.
    Fused,
}

impl EvalMode {
    pub fn as_str(self) -> &'static str {
        match self {
            EvalMode::Single => "single",
            EvalMode::Fused => "fused",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusedObject<T = f64> {
    pub scan_id: ScanId,
    pub object_id: ObjectId,
    pub class_id: ClassId,
    pub view_instances: Vec<(View, BBox<T>)>,
    /// Highest score of a detection that claimed this object in any view.
    pub best_score: Option<T>,
}

/// Rejects object ids whose class differs between views.
pub fn check_object_classes<T>(gts: &[GroundTruthObject<T>]) -> Result<()> {
    let mut classes: BTreeMap<(&ScanId, &ObjectId), ClassId> = BTreeMap::new();
    for g in gts {
        match classes.insert((&g.scan_id, &g.object_id), g.class_id) {
            Some(prev) if prev != g.class_id => {
                return Err(Error::Annotation(format!(
                    "object {} in scan {} is labelled {} in one view and {} in another",
                    g.object_id, g.scan_id, prev, g.class_id
                )))
            }
            _ => {}
        }
    }
    Ok(())
}

/// Physical objects of `class_id` with the best claiming score across views.
pub fn fused_objects<T: Scalar>(
    dets: &[Detection<T>],
    gts: &[GroundTruthObject<T>],
    class_id: ClassId,
    iou_threshold: T,
) -> Result<Vec<FusedObject<T>>> {
    check_object_classes(gts)?;
    let (objects, _) = fuse_class(dets, gts, class_id, iou_threshold);
    Ok(objects.into_values().collect())
}

type ObjectKey = (ScanId, ObjectId);

fn fuse_class<T: Scalar>(
    dets: &[Detection<T>],
    gts: &[GroundTruthObject<T>],
    class_id: ClassId,
    iou_threshold: T,
) -> (BTreeMap<ObjectKey, FusedObject<T>>, Vec<T>) {
    let mut objects: BTreeMap<ObjectKey, FusedObject<T>> = BTreeMap::new();
    for g in gts.iter().filter(|g| g.class_id == class_id) {
        objects
            .entry((g.scan_id.clone(), g.object_id.clone()))
            .or_insert_with(|| FusedObject {
                scan_id: g.scan_id.clone(),
                object_id: g.object_id.clone(),
                class_id,
                view_instances: Vec::new(),
                best_score: None,
            })
            .view_instances
            .push((g.view, g.bbox));
    }
    for obj in objects.values_mut() {
        obj.view_instances.sort_by_key(|(v, _)| *v);
    }

    let mut false_positive_scores = Vec::new();
    for image in match_per_image(dets, gts, class_id, iou_threshold) {
        for (score, claimed) in image.detections {
            match claimed {
                Some(g) => {
                    let obj = objects
                        .get_mut(&(g.scan_id.clone(), g.object_id.clone()))
                        .expect("claimed ground truth belongs to an object");
                    obj.best_score = Some(obj.best_score.map_or(score, |s| s.max(score)));
                }
                None => false_positive_scores.push(score),
            }
        }
    }
    (objects, false_positive_scores)
}

fn count_at_least<T: Scalar>(sorted_desc: &[T], t: T) -> usize {
    sorted_desc.partition_point(|&s| s >= t)
}

/// Fused PR curve per class present in the ground truth.
pub fn fuse_evaluation<T: Scalar>(
    dets: &[Detection<T>],
    gts: &[GroundTruthObject<T>],
    iou_threshold: T,
) -> Result<BTreeMap<ClassId, PrCurve<T>>> {
    if !(iou_threshold > T::zero() && iou_threshold < T::one()) {
        return Err(Error::ContractViolation(format!(
            "IoU threshold {iou_threshold} must lie in (0, 1)"
        )));
    }
    check_object_classes(gts)?;
    let mut curves = BTreeMap::new();
    for class_id in ClassId::ALL {
        if !gts.iter().any(|g| g.class_id == class_id) {
            continue;
        }
        let (objects, mut fp_scores) = fuse_class(dets, gts, class_id, iou_threshold);
        let mut found: Vec<T> = objects.values().filter_map(|o| o.best_score).collect();
        found.sort_by(|a, b| cmp_scalar(*b, *a));
        fp_scores.sort_by(|a, b| cmp_scalar(*b, *a));

        let thresholds = dets
            .iter()
            .filter(|d| d.class_id == class_id)
            .map(|d| d.score())
            .collect();
        let points = sweep(thresholds, objects.len(), |t| {
            (count_at_least(&found, t), count_at_least(&fp_scores, t))
        });
        curves.insert(class_id, PrCurve::from_points(class_id, points));
    }
    Ok(curves)
}

/// Standard per-image PR curve per class present in the ground truth.
pub fn single_view_evaluation<T: Scalar>(
    dets: &[Detection<T>],
    gts: &[GroundTruthObject<T>],
    iou_threshold: T,
) -> Result<BTreeMap<ClassId, PrCurve<T>>> {
    ClassId::ALL
        .into_iter()
        .filter(|c| gts.iter().any(|g| g.class_id == *c))
        .map(|c| pr_curve(dets, gts, c, iou_threshold).map(|curve| (c, curve)))
        .collect()
}

pub const MODE_CSV_HEADER: &str = "mode,threshold,precision,recall";

/// Single and fused curves of one class in one table, keyed by a `mode` column.
pub fn write_mode_csv<T: Scalar, W: Write>(
    curves: &[(EvalMode, &PrCurve<T>)],
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "{MODE_CSV_HEADER}")?;
    for (mode, curve) in curves {
        for p in &curve.points {
            writeln!(
                out,
                "{},{},{},{}",
                mode.as_str(),
                format_significant(p.threshold.to_f64_lossy(), 9),
                format_significant(p.precision.to_f64_lossy(), 9),
                format_significant(p.recall.to_f64_lossy(), 9)
            )?;
        }
    }
    Ok(())
}
