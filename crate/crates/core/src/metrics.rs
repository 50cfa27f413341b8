//! Detection-to-ground-truth matching and the precision/recall family of metrics.
//!
//! A detection is a true positive when it carries the right class and
//! overlaps a not-yet-claimed ground truth of that class with IoU at or
//! above the threshold. Detections are claimed greedily in [`rank_order`].
//! PR curves sweep the score threshold over every distinct detection score,
//! and AP integrates the precision envelope over recall.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use crate::error::{Error, Result};
use crate::geometry::{iou, rank_order, BBox, ClassId, Detection, ObjectId, ScanId, View};
use crate::scalar::{cmp_scalar, Scalar};

/// Default IoU a detection needs to claim a ground truth.
pub const DEFAULT_MATCH_IOU: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthObject<T = f64> {
    pub bbox: BBox<T>,
    pub class_id: ClassId,
    pub object_id: ObjectId,
    pub view: View,
    pub scan_id: ScanId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult<T = f64> {
    pub true_positives: Vec<(Detection<T>, GroundTruthObject<T>)>,
    pub false_positives: Vec<Detection<T>>,
    pub false_negatives: Vec<GroundTruthObject<T>>,
}

impl<T> MatchResult<T> {
    pub fn tp(&self) -> usize {
        self.true_positives.len()
    }

    pub fn fp(&self) -> usize {
        self.false_positives.len()
    }

    pub fn fn_(&self) -> usize {
        self.false_negatives.len()
    }
}

/// How the area under a PR curve is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ApMethod {
    /// Area under the monotone precision envelope, every recall step.
    #[default]
    AllPoints,
    /// Mean envelope precision sampled at recall 0, 0.1, ..., 1.
    ElevenPoint,
}

/// One operating point of a PR curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint<T = f64> {
    /// Detections with `score >= threshold` are kept. The first point of
    /// every curve uses `+inf`, where nothing survives.
    pub threshold: T,
    pub precision: T,
    pub recall: T,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl<T: Scalar> PrPoint<T> {
    pub fn from_counts(threshold: T, tp: usize, fp: usize, fn_: usize) -> Self {
        let (precision, recall) = precision_recall(tp, fp, fn_);
        PrPoint {
            threshold,
            precision,
            recall,
            tp,
            fp,
            fn_,
        }
    }
}

/// Points ordered by strictly decreasing threshold, so recall never decreases
/// along the vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PrCurve<T = f64> {
    pub class_id: ClassId,
    pub points: Vec<PrPoint<T>>,
    pub ap: T,
}

impl<T: Scalar> PrCurve<T> {
    /// Builds the curve and fills in its all-points AP.
    pub fn from_points(class_id: ClassId, points: Vec<PrPoint<T>>) -> Self {
        let ap = envelope_area(&points);
        PrCurve {
            class_id,
            points,
            ap,
        }
    }

    /// Counts at an arbitrary score threshold.
    pub fn point_at(&self, threshold: T) -> PrPoint<T> {
        // The survivors at `threshold` are those of the smallest listed
        // threshold that is still >= it.
        let mut best = self.points[0];
        for p in &self.points {
            if p.threshold >= threshold {
                best = *p;
            }
        }
        PrPoint { threshold, ..best }
    }

    pub fn total_ground_truth(&self) -> usize {
        let p = &self.points[0];
        p.tp + p.fn_
    }
}

/// `(precision, recall)` with precision 1 when nothing was detected and
/// recall 1 when there was nothing to find.
pub fn precision_recall<T: Scalar>(tp: usize, fp: usize, fn_: usize) -> (T, T) {
    let ratio = |num: usize, den: usize| {
        if den == 0 {
            T::one()
        } else {
            T::from_count(num) / T::from_count(den)
        }
    };
    (ratio(tp, tp + fp), ratio(tp, tp + fn_))
}

fn check_iou_threshold<T: Scalar>(iou_threshold: T) -> Result<()> {
    if iou_threshold > T::zero() && iou_threshold < T::one() {
        Ok(())
    } else {
        Err(Error::ContractViolation(format!(
            "IoU threshold {iou_threshold} must lie in (0, 1)"
        )))
    }
}

fn gt_order<T: Scalar>(a: &GroundTruthObject<T>, b: &GroundTruthObject<T>) -> std::cmp::Ordering {
    a.class_id
        .cmp(&b.class_id)
        .then_with(|| cmp_scalar(a.bbox.cx(), b.bbox.cx()))
        .then_with(|| cmp_scalar(a.bbox.cy(), b.bbox.cy()))
        .then_with(|| cmp_scalar(a.bbox.w(), b.bbox.w()))
        .then_with(|| cmp_scalar(a.bbox.h(), b.bbox.h()))
        .then_with(|| a.object_id.cmp(&b.object_id))
}

/// Greedy claim of ground truths. `dets` must already be in [`rank_order`].
/// Returns, per detection, the index of the claimed ground truth.
fn greedy_assign<T: Scalar>(
    dets: &[&Detection<T>],
    gts: &[&GroundTruthObject<T>],
    iou_threshold: T,
) -> Vec<Option<usize>> {
    let mut taken = vec![false; gts.len()];
    dets.iter()
        .map(|det| {
            let mut best: Option<(usize, T)> = None;
            for (gi, gt) in gts.iter().enumerate() {
                if taken[gi] || gt.class_id != det.class_id {
                    continue;
                }
                let overlap = iou(&det.bbox, &gt.bbox);
                if overlap < iou_threshold {
                    continue;
                }
                // Strictly greater keeps the earliest ground truth on IoU ties.
                if best.is_none_or(|(_, b)| overlap > b) {
                    best = Some((gi, overlap));
                }
            }
            let claimed = best.map(|(gi, _)| gi);
            if let Some(gi) = claimed {
                taken[gi] = true;
            }
            claimed
        })
        .collect()
}

fn check_unique_objects<'a, T: 'a>(
    gts: impl IntoIterator<Item = &'a GroundTruthObject<T>>,
) -> Result<()> {
    let mut seen = BTreeSet::new();
    for gt in gts {
        if !seen.insert((&gt.scan_id, gt.view, &gt.object_id)) {
            return Err(Error::ContractViolation(format!(
                "object {} appears twice in scan {} view {}",
                gt.object_id, gt.scan_id, gt.view
            )));
        }
    }
    Ok(())
}

/// Matches the detections of one `(scan, view)` against its ground truth.
pub fn match_detections<T: Scalar>(
    dets: &[Detection<T>],
    gts: &[GroundTruthObject<T>],
    iou_threshold: T,
) -> Result<MatchResult<T>> {
    check_iou_threshold(iou_threshold)?;
    let key = dets
        .first()
        .map(|d| (&d.scan_id, d.view))
        .or_else(|| gts.first().map(|g| (&g.scan_id, g.view)));
    if let Some(key) = key {
        let mixed = dets.iter().any(|d| (&d.scan_id, d.view) != key)
            || gts.iter().any(|g| (&g.scan_id, g.view) != key);
        if mixed {
            return Err(Error::ContractViolation(
                "match() needs detections and ground truth from a single (scan, view)".into(),
            ));
        }
    }
    check_unique_objects(gts)?;

    let mut ranked: Vec<&Detection<T>> = dets.iter().collect();
    ranked.sort_by(|a, b| rank_order(a, b));
    let mut ordered_gts: Vec<&GroundTruthObject<T>> = gts.iter().collect();
    ordered_gts.sort_by(|a, b| gt_order(a, b));

    let assignment = greedy_assign(&ranked, &ordered_gts, iou_threshold);
    let mut claimed = vec![false; ordered_gts.len()];
    let mut result = MatchResult {
        true_positives: Vec::new(),
        false_positives: Vec::new(),
        false_negatives: Vec::new(),
    };
    for (det, slot) in ranked.iter().zip(assignment) {
        match slot {
            Some(gi) => {
                claimed[gi] = true;
                result
                    .true_positives
                    .push(((*det).clone(), ordered_gts[gi].clone()));
            }
            None => result.false_positives.push((*det).clone()),
        }
    }
    result.false_negatives = ordered_gts
        .iter()
        .zip(&claimed)
        .filter(|(_, &c)| !c)
        .map(|(g, _)| (*g).clone())
        .collect();
    Ok(result)
}

/// Outcome of matching one class inside one image.
#[derive(Debug, Clone)]
pub(crate) struct ImageOutcome<'a, T> {
    /// `(score, claimed ground truth)` for each detection, in rank order.
    pub detections: Vec<(T, Option<&'a GroundTruthObject<T>>)>,
}

/// Runs the greedy match once per `(scan, view)` for a single class.
///
/// Because claims are made in rank order, the outcome at any score threshold
/// is the prefix of this full outcome made of detections at or above it.
pub(crate) fn match_per_image<'a, T: Scalar>(
    dets: &'a [Detection<T>],
    gts: &'a [GroundTruthObject<T>],
    class_id: ClassId,
    iou_threshold: T,
) -> Vec<ImageOutcome<'a, T>> {
    type Group<'a, T> = (Vec<&'a Detection<T>>, Vec<&'a GroundTruthObject<T>>);
    let mut groups: BTreeMap<(&ScanId, View), Group<'a, T>> = BTreeMap::new();
    for d in dets.iter().filter(|d| d.class_id == class_id) {
        groups.entry((&d.scan_id, d.view)).or_default().0.push(d);
    }
    for g in gts.iter().filter(|g| g.class_id == class_id) {
        groups.entry((&g.scan_id, g.view)).or_default().1.push(g);
    }

    groups
        .into_iter()
        .map(|(_, (mut ds, mut gs))| {
            ds.sort_by(|a, b| rank_order(a, b));
            gs.sort_by(|a, b| gt_order(a, b));
            let assignment = greedy_assign(&ds, &gs, iou_threshold);
            let detections = ds
                .iter()
                .zip(assignment)
                .map(|(d, slot)| (d.score(), slot.map(|gi| gs[gi])))
                .collect();
            ImageOutcome { detections }
        })
        .collect()
}

/// Sweeps the distinct scores of `scored` (score, is-true-positive) from high
/// to low, producing one point per distinct score after the `+inf` endpoint.
/// `tp_at` lets callers count true positives per threshold differently from
/// the per-detection flags (used by multi-view fusion).
pub(crate) fn sweep<T: Scalar>(
    mut scores: Vec<T>,
    total_positives: usize,
    mut tp_fp_at: impl FnMut(T) -> (usize, usize),
) -> Vec<PrPoint<T>> {
    scores.sort_by(|a, b| cmp_scalar(*b, *a));
    scores.dedup();
    let mut points = Vec::with_capacity(scores.len() + 1);
    points.push(PrPoint::from_counts(T::infinity(), 0, 0, total_positives));
    for t in scores {
        let (tp, fp) = tp_fp_at(t);
        points.push(PrPoint::from_counts(t, tp, fp, total_positives - tp));
    }
    points
}

/// Precision/recall curve for one class, pooling every `(scan, view)`.
pub fn pr_curve<T: Scalar>(
    dets: &[Detection<T>],
    gts: &[GroundTruthObject<T>],
    class_id: ClassId,
    iou_threshold: T,
) -> Result<PrCurve<T>> {
    check_iou_threshold(iou_threshold)?;
    check_unique_objects(gts)?;
    let total = gts.iter().filter(|g| g.class_id == class_id).count();
    if total == 0 {
        return Err(Error::UndefinedRecall(class_id));
    }

    let mut flags: Vec<(T, bool)> = match_per_image(dets, gts, class_id, iou_threshold)
        .into_iter()
        .flat_map(|img| img.detections.into_iter().map(|(s, g)| (s, g.is_some())))
        .collect();
    flags.sort_by(|a, b| cmp_scalar(b.0, a.0));

    let scores = flags.iter().map(|f| f.0).collect();
    let mut cursor = 0;
    let (mut tp, mut fp) = (0, 0);
    let points = sweep(scores, total, |t| {
        while cursor < flags.len() && flags[cursor].0 >= t {
            if flags[cursor].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            cursor += 1;
        }
        (tp, fp)
    });
    Ok(PrCurve::from_points(class_id, points))
}

/// All-points envelope area over points ordered by non-decreasing recall.
fn envelope_area<T: Scalar>(points: &[PrPoint<T>]) -> T {
    let mut envelope = vec![T::zero(); points.len()];
    let mut running = T::zero();
    for (i, p) in points.iter().enumerate().rev() {
        running = running.max(p.precision);
        envelope[i] = running;
    }
    let mut area = T::zero();
    let mut prev_recall = T::zero();
    for (p, env) in points.iter().zip(&envelope) {
        if p.recall > prev_recall {
            area = area + (p.recall - prev_recall) * *env;
            prev_recall = p.recall;
        }
    }
    area
}

fn eleven_point<T: Scalar>(points: &[PrPoint<T>]) -> T {
    let ten = T::from_count(10);
    let total: T = (0..=10)
        .map(|k| {
            let level = T::from_count(k) / ten;
            points
                .iter()
                .filter(|p| p.recall >= level)
                .map(|p| p.precision)
                .fold(T::zero(), T::max)
        })
        .sum();
    total / T::from_count(11)
}

/// Area under the precision envelope of `curve`, in `[0, 1]`.
pub fn average_precision<T: Scalar>(curve: &PrCurve<T>) -> T {
    average_precision_with(curve, ApMethod::AllPoints)
}

pub fn average_precision_with<T: Scalar>(curve: &PrCurve<T>, method: ApMethod) -> T {
    match method {
        ApMethod::AllPoints => envelope_area(&curve.points),
        ApMethod::ElevenPoint => eleven_point(&curve.points),
    }
}

/// Unweighted mean of per-class APs.
pub fn mean_ap<T: Scalar>(aps: &BTreeMap<ClassId, T>) -> Result<T> {
    if aps.is_empty() {
        return Err(Error::EmptyInput("mean AP needs at least one class"));
    }
    let sum: T = aps.values().copied().sum();
    Ok(sum / T::from_count(aps.len()))
}

/// Formats `x` with `digits` significant digits in positional notation.
pub fn format_significant(x: f64, digits: usize) -> String {
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x.is_nan() {
        return "nan".into();
    }
    if x == 0.0 {
        return format!("{:.*}", digits.saturating_sub(1), 0.0);
    }
    let magnitude = x.abs().log10().floor() as i64;
    let decimals = (digits as i64 - 1 - magnitude).max(0) as usize;
    let text = format!("{:.*}", decimals, x);
    // Rounding can carry into a new leading digit (9.99.. -> 10.0); redo once.
    let rounded: f64 = text.parse().unwrap_or(x);
    let magnitude2 = rounded.abs().log10().floor() as i64;
    if magnitude2 != magnitude && rounded != 0.0 {
        let decimals = (digits as i64 - 1 - magnitude2).max(0) as usize;
        return format!("{:.*}", decimals, x);
    }
    text
}

pub const PR_CSV_HEADER: &str = "threshold,precision,recall";

/// Writes `threshold,precision,recall` rows, 9 significant digits each.
pub fn write_pr_csv<T: Scalar, W: Write>(curve: &PrCurve<T>, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{PR_CSV_HEADER}")?;
    for p in &curve.points {
        writeln!(
            out,
            "{},{},{}",
            format_significant(p.threshold.to_f64_lossy(), 9),
            format_significant(p.precision.to_f64_lossy(), 9),
            format_significant(p.recall.to_f64_lossy(), 9)
        )?;
    }
    Ok(())
}

pub fn pr_csv_string<T: Scalar>(curve: &PrCurve<T>) -> String {
    let mut buf = Vec::new();
    write_pr_csv(curve, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii csv")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx(cx: f64, cy: f64, w: f64, h: f64) -> BBox {
        BBox::new(cx, cy, w, h).unwrap()
    }

    fn gt(id: &str, bbox: BBox, class_id: ClassId) -> GroundTruthObject {
        GroundTruthObject {
            bbox,
            class_id,
            object_id: id.into(),
            view: View::Top,
            scan_id: "s0".into(),
        }
    }

    fn det(bbox: BBox, class_id: ClassId, score: f64) -> Detection {
        Detection::new(bbox, class_id, score, View::Top, "s0".into()).unwrap()
    }

    #[test]
    fn exact_overlap_same_class_is_tp() {
        let g = gt("a", bx(10.0, 10.0, 8.0, 8.0), ClassId::Blunts);
        let d = det(g.bbox, ClassId::Blunts, 0.4);
        let r = match_detections(&[d], &[g], 0.5).unwrap();
        assert_eq!((r.tp(), r.fp(), r.fn_()), (1, 0, 0));
    }

    #[test]
    fn wrong_class_is_fp_and_fn() {
        let g = gt("a", bx(10.0, 10.0, 8.0, 8.0), ClassId::Firearms);
        let d = det(g.bbox, ClassId::Sharps, 0.9);
        let r = match_detections(&[d], &[g], 0.5).unwrap();
        assert_eq!((r.tp(), r.fp(), r.fn_()), (0, 1, 1));
    }

    /// Every injective assignment of detections to ground truths that respects
    /// class and threshold; picks the one with most TPs, then the one whose TP
    /// scores are lexicographically highest.
    fn exhaustive_best(
        dets: &[Detection],
        gts: &[GroundTruthObject],
        thr: f64,
    ) -> (usize, Vec<f64>) {
        fn rec(
            i: usize,
            dets: &[Detection],
            gts: &[GroundTruthObject],
            used: &mut Vec<bool>,
            thr: f64,
            scores: &mut Vec<f64>,
            best: &mut (usize, Vec<f64>),
        ) {
            if i == dets.len() {
                let mut s = scores.clone();
                s.sort_by(|a, b| b.partial_cmp(a).unwrap());
                if s.len() > best.0 || (s.len() == best.0 && s > best.1) {
                    *best = (s.len(), s);
                }
                return;
            }
            rec(i + 1, dets, gts, used, thr, scores, best);
            for (gi, g) in gts.iter().enumerate() {
                if !used[gi] && g.class_id == dets[i].class_id && iou(&dets[i].bbox, &g.bbox) >= thr
                {
                    used[gi] = true;
                    scores.push(dets[i].score());
                    rec(i + 1, dets, gts, used, thr, scores, best);
                    scores.pop();
                    used[gi] = false;
                }
            }
        }
        let mut best = (0, vec![]);
        rec(0, dets, gts, &mut vec![false; gts.len()], thr, &mut vec![], &mut best);
        best
    }

    #[test]
    fn two_candidates_one_ground_truth() {
        // Both detections overlap the ground truth with IoU 0.8.
        let g = gt("a", bx(10.0, 10.0, 10.0, 10.0), ClassId::Sharps);
        let shift = 10.0 / 9.0; // overlap 80/100 of a 10x10 box -> IoU 0.8
        let d1 = det(bx(10.0 + shift, 10.0, 10.0, 10.0), ClassId::Sharps, 0.9);
        let d2 = det(bx(10.0 - shift, 10.0, 10.0, 10.0), ClassId::Sharps, 0.7);
        assert!((iou(&d1.bbox, &g.bbox) - 0.8).abs() < 1e-12);

        let dets = vec![d2.clone(), d1.clone()];
        let (oracle_tp, oracle_scores) = exhaustive_best(&dets, std::slice::from_ref(&g), 0.5);
        assert_eq!((oracle_tp, oracle_scores.clone()), (1, vec![0.9]));

        let r = match_detections(&dets, &[g], 0.5).unwrap();
        assert_eq!((r.tp(), r.fp(), r.fn_()), (1, 1, 0));
        assert_eq!(r.true_positives[0].0.score(), 0.9);
        assert_eq!(r.false_positives[0].score(), 0.7);
    }

    #[test]
    fn mixed_images_are_rejected() {
        let g = gt("a", bx(10.0, 10.0, 8.0, 8.0), ClassId::Blunts);
        let mut d = det(g.bbox, ClassId::Blunts, 0.4);
        d.view = View::Side;
        assert!(matches!(
            match_detections(&[d], &[g], 0.5),
            Err(Error::ContractViolation(_))
        ));
    }

    #[test]
    fn bad_iou_threshold_is_rejected() {
        assert!(match_detections::<f64>(&[], &[], 1.0).is_err());
        assert!(match_detections::<f64>(&[], &[], 0.0).is_err());
    }

    #[test]
    fn precision_recall_conventions() {
        assert_eq!(precision_recall::<f64>(3, 1, 2), (0.75, 0.6));
        assert_eq!(precision_recall::<f64>(0, 0, 5), (1.0, 0.0));
        assert_eq!(precision_recall::<f64>(5, 0, 0), (1.0, 1.0));
    }

    /// Two ground truths, detections ranked TP@0.9, FP@0.8, TP@0.7.
    fn worked_example() -> (Vec<Detection>, Vec<GroundTruthObject>) {
        let g1 = gt("a", bx(10.0, 10.0, 10.0, 10.0), ClassId::Sharps);
        let g2 = gt("b", bx(60.0, 60.0, 10.0, 10.0), ClassId::Sharps);
        let dets = vec![
            det(g1.bbox, ClassId::Sharps, 0.9),
            det(bx(200.0, 200.0, 5.0, 5.0), ClassId::Sharps, 0.8),
            det(g2.bbox, ClassId::Sharps, 0.7),
        ];
        (dets, vec![g1, g2])
    }

    /// Brute force: re-match the survivors at every distinct score.
    fn brute_force_points(
        dets: &[Detection],
        gts: &[GroundTruthObject],
        thr: f64,
    ) -> Vec<(f64, f64)> {
        let mut scores: Vec<f64> = dets.iter().map(|d| d.score()).collect();
        scores.sort_by(|a, b| b.partial_cmp(a).unwrap());
        scores.dedup();
        scores
            .into_iter()
            .map(|t| {
                let kept: Vec<Detection> =
                    dets.iter().filter(|d| d.score() >= t).cloned().collect();
                let r = match_detections(&kept, gts, thr).unwrap();
                let p = r.tp() as f64 / (r.tp() + r.fp()) as f64;
                let rc = r.tp() as f64 / gts.len() as f64;
                (rc, p)
            })
            .collect()
    }

    #[test]
    fn worked_example_curve_and_ap() {
        let (dets, gts) = worked_example();
        let oracle = brute_force_points(&dets, &gts, 0.5);
        assert_eq!(oracle, vec![(0.5, 1.0), (0.5, 0.5), (1.0, 2.0 / 3.0)]);

        let curve = pr_curve(&dets, &gts, ClassId::Sharps, 0.5).unwrap();
        let got: Vec<(f64, f64)> = curve.points[1..]
            .iter()
            .map(|p| (p.recall, p.precision))
            .collect();
        assert_eq!(got, oracle);
        let head = curve.points[0];
        assert!(head.threshold.is_infinite());
        assert_eq!((head.recall, head.precision), (0.0, 1.0));

        // 0.5 * 1.0 + 0.5 * 2/3
        assert!((curve.ap - 0.8333333333333334).abs() < 1e-9);
        assert_eq!(average_precision(&curve), curve.ap);
    }

    #[test]
    fn perfect_and_empty_detectors() {
        let (_, gts) = worked_example();
        let perfect: Vec<Detection> = gts
            .iter()
            .map(|g| det(g.bbox, g.class_id, 0.99))
            .collect();
        let c = pr_curve(&perfect, &gts, ClassId::Sharps, 0.5).unwrap();
        let last = c.points.last().unwrap();
        assert_eq!((last.recall, last.precision), (1.0, 1.0));
        assert_eq!(c.ap, 1.0);

        let c = pr_curve(&[], &gts, ClassId::Sharps, 0.5).unwrap();
        assert_eq!(c.points.len(), 1);
        assert_eq!((c.points[0].recall, c.points[0].precision), (0.0, 1.0));
        assert_eq!(c.ap, 0.0);
    }

    #[test]
    fn missing_class_has_undefined_recall() {
        let (dets, gts) = worked_example();
        assert!(matches!(
            pr_curve(&dets, &gts, ClassId::Lags, 0.5),
            Err(Error::UndefinedRecall(ClassId::Lags))
        ));
    }

    #[test]
    fn point_at_arbitrary_threshold() {
        let (dets, gts) = worked_example();
        let c = pr_curve(&dets, &gts, ClassId::Sharps, 0.5).unwrap();
        assert_eq!(c.point_at(0.95).tp, 0);
        assert_eq!(c.point_at(0.85).tp, 1);
        assert_eq!(c.point_at(0.75).fp, 1);
        assert_eq!(c.point_at(0.0).tp, 2);
    }

    #[test]
    fn eleven_point_of_worked_example() {
        let (dets, gts) = worked_example();
        let c = pr_curve(&dets, &gts, ClassId::Sharps, 0.5).unwrap();
        // recall levels 0..=0.5 see precision 1, 0.6..=1.0 see 2/3
        let expected = (6.0 * 1.0 + 5.0 * (2.0 / 3.0)) / 11.0;
        assert!((average_precision_with(&c, ApMethod::ElevenPoint) - expected).abs() < 1e-12);
    }

    #[test]
    fn mean_ap_cases() {
        let m = |v: &[(ClassId, f64)]| mean_ap(&v.iter().copied().collect());
        assert!(m(&[]).is_err());
        assert_eq!(m(&[(ClassId::Sharps, 0.7)]).unwrap(), 0.7);
        assert_eq!(
            m(&[(ClassId::Sharps, 1.0), (ClassId::Blunts, 0.0)]).unwrap(),
            0.5
        );
        let row = m(&[
            (ClassId::Sharps, 0.786),
            (ClassId::Blunts, 0.980),
            (ClassId::Firearms, 0.947),
            (ClassId::Lags, 0.976),
        ])
        .unwrap();
        assert!((row - 0.92225).abs() < 1e-12);
        assert!((row - 0.9244).abs() <= 0.005);
    }

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(format_significant(2.0 / 3.0, 9), "0.666666667");
        assert_eq!(format_significant(1.0, 9), "1.00000000");
        assert_eq!(format_significant(0.0, 9), "0.00000000");
        assert_eq!(format_significant(0.5, 9), "0.500000000");
        assert_eq!(format_significant(9.9999999999, 9), "10.0000000");
        assert_eq!(format_significant(f64::INFINITY, 9), "inf");
    }

    #[test]
    fn csv_export() {
        let (dets, gts) = worked_example();
        let c = pr_curve(&dets, &gts, ClassId::Sharps, 0.5).unwrap();
        let csv = pr_csv_string(&c);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "threshold,precision,recall");
        assert_eq!(lines[1], "inf,1.00000000,0.00000000");
        assert_eq!(lines[4], "0.700000000,0.666666667,1.00000000");
    }
}
