//! Boxes, overlap, and non-maximum suppression.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{cmp_scalar, Scalar};

/// Default IoU above which a lower-scoring box of the same class is suppressed.
pub const DEFAULT_NMS_IOU: f64 = 0.5;

/// The four threat categories.
///
/// The declaration order is the tie-break order used by [`nms`] and matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassId {
    Sharps,
    Blunts,
    Firearms,
    #[serde(rename = "lags")]
    Lags,
}

impl ClassId {
    pub const ALL: [ClassId; 4] = [
        ClassId::Sharps,
        ClassId::Blunts,
        ClassId::Firearms,
        ClassId::Lags,
    ];

    /// Lowercase name used in files.
    pub fn as_str(self) -> &'static str {
        match self {
            ClassId::Sharps => "sharps",
            ClassId::Blunts => "blunts",
            ClassId::Firearms => "firearms",
            ClassId::Lags => "lags",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == name)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let label = match self {
            ClassId::Sharps => "Sharps",
            ClassId::Blunts => "Blunts",
            ClassId::Firearms => "Firearms",
            ClassId::Lags => "LAGs",
        };
        f.pad(label)
    }
}

/// Which of the two near-orthogonal projections an image belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum View {
    Top,
    Side,
}

impl View {
    pub const BOTH: [View; 2] = [View::Top, View::Side];

    pub fn as_str(self) -> &'static str {
        match self {
            View::Top => "top",
            View::Side => "side",
        }
    }
}

impl fmt::Display for View {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

/// Identifier of one bag-scan (one pass through the tunnel, two views).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScanId(pub String);

impl From<&str> for ScanId {
    fn from(s: &str) -> Self {
        ScanId(s.to_owned())
    }
}

impl fmt::Display for ScanId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(&self.0)
    }
}

/// Identifier of a physical object, shared by its instances in both views.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectId(pub String);

impl From<&str> for ObjectId {
    fn from(s: &str) -> Self {
        ObjectId(s.to_owned())
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(&self.0)
    }
}

/// Axis-aligned box stored as center and dimensions in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox<T = f64> {
    cx: T,
    cy: T,
    w: T,
    h: T,
}

impl<T: Scalar> BBox<T> {
    /// Rejects non-finite values and non-positive dimensions.
    pub fn new(cx: T, cy: T, w: T, h: T) -> Result<Self> {
        if !(cx.is_finite() && cy.is_finite() && w.is_finite() && h.is_finite()) {
            return Err(Error::InvalidBox(format!(
                "non-finite component in ({cx}, {cy}, {w}, {h})"
            )));
        }
        if w <= T::zero() || h <= T::zero() {
            return Err(Error::InvalidBox(format!(
                "dimensions must be positive, got w={w} h={h}"
            )));
        }
        Ok(BBox { cx, cy, w, h })
    }

    pub fn from_corners(x0: T, y0: T, x1: T, y1: T) -> Result<Self> {
        let two = T::lit(2.0);
        Self::new((x0 + x1) / two, (y0 + y1) / two, x1 - x0, y1 - y0)
    }

    pub fn cx(&self) -> T {
        self.cx
    }

    pub fn cy(&self) -> T {
        self.cy
    }

    pub fn w(&self) -> T {
        self.w
    }

    pub fn h(&self) -> T {
        self.h
    }

    pub fn area(&self) -> T {
        self.w * self.h
    }

    /// `(x0, y0, x1, y1)`.
    pub fn corners(&self) -> (T, T, T, T) {
        let two = T::lit(2.0);
        let (hw, hh) = (self.w / two, self.h / two);
        (self.cx - hw, self.cy - hh, self.cx + hw, self.cy + hh)
    }

    pub fn translate(&self, dx: T, dy: T) -> Self {
        BBox {
            cx: self.cx + dx,
            cy: self.cy + dy,
            ..*self
        }
    }

    /// Area of the overlap rectangle, zero when disjoint or touching.
    pub fn intersection_area(&self, other: &Self) -> T {
        let (ax0, ay0, ax1, ay1) = self.corners();
        let (bx0, by0, bx1, by1) = other.corners();
        let iw = ax1.min(bx1) - ax0.max(bx0);
        let ih = ay1.min(by1) - ay0.max(by0);
        if iw <= T::zero() || ih <= T::zero() {
            T::zero()
        } else {
            iw * ih
        }
    }

    pub fn convert<U: Scalar>(&self) -> BBox<U> {
        let c = |v: T| U::lit(v.to_f64_lossy());
        BBox {
            cx: c(self.cx),
            cy: c(self.cy),
            w: c(self.w),
            h: c(self.h),
        }
    }

    fn lex_cmp(&self, other: &Self) -> Ordering {
        cmp_scalar(self.cx, other.cx)
            .then_with(|| cmp_scalar(self.cy, other.cy))
            .then_with(|| cmp_scalar(self.w, other.w))
            .then_with(|| cmp_scalar(self.h, other.h))
    }
}

/// Intersection over union; symmetric, in `[0, 1]`, exactly 1 for identical boxes.
pub fn iou<T: Scalar>(a: &BBox<T>, b: &BBox<T>) -> T {
    if a == b {
        return T::one();
    }
    let inter = a.intersection_area(b);
    if inter <= T::zero() {
        return T::zero();
    }
    let union = a.area() + b.area() - inter;
    (inter / union).min(T::one())
}

/// A scored, classified box from one view of one scan.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection<T = f64> {
    pub bbox: BBox<T>,
    pub class_id: ClassId,
    score: T,
    pub view: View,
    pub scan_id: ScanId,
}

impl<T: Scalar> Detection<T> {
    pub fn new(
        bbox: BBox<T>,
        class_id: ClassId,
        score: T,
        view: View,
        scan_id: ScanId,
    ) -> Result<Self> {
        if !(score >= T::zero() && score <= T::one()) {
            return Err(Error::InvalidScore(score.to_f64_lossy()));
        }
        Ok(Detection {
            bbox,
            class_id,
            score,
            view,
            scan_id,
        })
    }

    pub fn score(&self) -> T {
        self.score
    }
}

/// Processing order for detections: descending score, ties broken by
/// ascending `(class_id, cx, cy, w, h)`.
pub fn rank_order<T: Scalar>(a: &Detection<T>, b: &Detection<T>) -> Ordering {
    cmp_scalar(b.score, a.score)
        .then_with(|| a.class_id.cmp(&b.class_id))
        .then_with(|| a.bbox.lex_cmp(&b.bbox))
}

/// Class-aware greedy non-maximum suppression.
///
/// Detections are expected to come from a single `(scan, view)`. A box is
/// dropped when its IoU with an already kept box of the same class exceeds
/// `iou_threshold`. The result is sorted by [`rank_order`].
pub fn nms<T: Scalar>(dets: &[Detection<T>], iou_threshold: T) -> Vec<Detection<T>> {
    let mut order: Vec<&Detection<T>> = dets.iter().collect();
    order.sort_by(|a, b| rank_order(a, b));

    let mut kept: Vec<Detection<T>> = Vec::with_capacity(order.len());
    for det in order {
        let suppressed = kept
            .iter()
            .filter(|k| k.class_id == det.class_id)
            .any(|k| iou(&k.bbox, &det.bbox) > iou_threshold);
        if !suppressed {
            kept.push(det.clone());
        }
    }
    kept
}
