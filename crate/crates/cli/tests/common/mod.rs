//! Independent oracles and random fixtures for the acceptance suite.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::Rng;

use dualview_core::geometry::{iou, rank_order};
use dualview_core::{BBox, ClassId, Detection, GroundTruthObject, ObjectId, ScanId, View};

/// Detections and ground truth of one image.
pub type ImageContents<'a> = (Vec<&'a Detection>, Vec<&'a GroundTruthObject>);

/// Greedy matching written out independently: detections in rank order
/// claim the unclaimed same-class ground truth of highest IoU (earliest in
/// `gts` order on ties) when that IoU reaches `thr`. Returns the number of
/// claims and the claimed ground-truth indices.
pub fn greedy_claims(
    dets: &[&Detection],
    gts: &[&GroundTruthObject],
    thr: f64,
    overlap: impl Fn(&BBox, &BBox) -> f64,
) -> Vec<Option<usize>> {
    let mut ranked: Vec<&Detection> = dets.to_vec();
    ranked.sort_by(|a, b| rank_order(a, b));
    let mut taken = vec![false; gts.len()];
    ranked
        .iter()
        .map(|d| {
            let mut best: Option<(usize, f64)> = None;
            for (i, g) in gts.iter().enumerate() {
                if taken[i] || g.class_id != d.class_id {
                    continue;
                }
                let o = overlap(&d.bbox, &g.bbox);
                if o >= thr && best.is_none_or(|(_, b)| o > b) {
                    best = Some((i, o));
                }
            }
            if let Some((i, _)) = best {
                taken[i] = true;
            }
            best.map(|(i, _)| i)
        })
        .collect()
}

/// Ground truth of one image sorted the way the library breaks IoU ties.
pub fn sorted_gts<'a>(gts: &[&'a GroundTruthObject]) -> Vec<&'a GroundTruthObject> {
    let mut v = gts.to_vec();
    v.sort_by(|a, b| {
        a.class_id
            .cmp(&b.class_id)
            .then(a.bbox.cx().total_cmp(&b.bbox.cx()))
            .then(a.bbox.cy().total_cmp(&b.bbox.cy()))
            .then(a.bbox.w().total_cmp(&b.bbox.w()))
            .then(a.bbox.h().total_cmp(&b.bbox.h()))
            .then(a.object_id.cmp(&b.object_id))
    });
    v
}

/// `(threshold, tp, fp)` at `+inf` and at every distinct score, obtained
/// by re-running the match from scratch on the surviving detections.
pub fn brute_force_counts(
    dets: &[Detection],
    gts: &[GroundTruthObject],
    class_id: ClassId,
    thr: f64,
) -> (usize, Vec<(f64, usize, usize)>) {
    let dets: Vec<&Detection> = dets.iter().filter(|d| d.class_id == class_id).collect();
    let gts: Vec<&GroundTruthObject> = gts.iter().filter(|g| g.class_id == class_id).collect();
    let mut scores: Vec<f64> = dets.iter().map(|d| d.score()).collect();
    scores.sort_by(|a, b| b.total_cmp(a));
    scores.dedup();

    let mut images: BTreeSet<(ScanId, View)> = BTreeSet::new();
    images.extend(dets.iter().map(|d| (d.scan_id.clone(), d.view)));
    images.extend(gts.iter().map(|g| (g.scan_id.clone(), g.view)));

    let mut rows = vec![(f64::INFINITY, 0, 0)];
    for &t in &scores {
        let (mut tp, mut fp) = (0, 0);
        for (scan, view) in &images {
            let d: Vec<&Detection> = dets
                .iter()
                .copied()
                .filter(|d| d.score() >= t && &d.scan_id == scan && d.view == *view)
                .collect();
            let g: Vec<&GroundTruthObject> = gts
                .iter()
                .copied()
                .filter(|g| &g.scan_id == scan && g.view == *view)
                .collect();
            let claims = greedy_claims(&d, &sorted_gts(&g), thr, iou);
            let hits = claims.iter().filter(|c| c.is_some()).count();
            tp += hits;
            fp += claims.len() - hits;
        }
        rows.push((t, tp, fp));
    }
    (gts.len(), rows)
}

/// All-points AP with the same floating-point operations as the library.
pub fn brute_force_ap_f64(total: usize, rows: &[(f64, usize, usize)]) -> f64 {
    let pr: Vec<(f64, f64)> = rows
        .iter()
        .map(|&(_, tp, fp)| {
            let p = if tp + fp == 0 { 1.0 } else { tp as f64 / (tp + fp) as f64 };
            let r = if total == 0 { 1.0 } else { tp as f64 / total as f64 };
            (p, r)
        })
        .collect();
    let mut env = vec![0.0; pr.len()];
    let mut run: f64 = 0.0;
    for i in (0..pr.len()).rev() {
        run = run.max(pr[i].0);
        env[i] = run;
    }
    let (mut area, mut prev) = (0.0, 0.0);
    for (i, &(_, r)) in pr.iter().enumerate() {
        if r > prev {
            area += (r - prev) * env[i];
            prev = r;
        }
    }
    area
}

fn rational(n: usize, d: usize) -> BigRational {
    BigRational::new(n.into(), d.into())
}

/// Exact rational IoU of boxes with exactly representable corners.
pub fn iou_rational(a: &BBox, b: &BBox) -> BigRational {
    let q = |x: f64| BigRational::from_float(x).expect("finite");
    let (ax0, ay0, ax1, ay1) = a.corners();
    let (bx0, by0, bx1, by1) = b.corners();
    let (ax0, ay0, ax1, ay1) = (q(ax0), q(ay0), q(ax1), q(ay1));
    let (bx0, by0, bx1, by1) = (q(bx0), q(by0), q(bx1), q(by1));
    let zero = BigRational::zero();
    let iw = (ax1.clone().min(bx1.clone()) - ax0.clone().max(bx0.clone())).max(zero.clone());
    let ih = (ay1.clone().min(by1.clone()) - ay0.clone().max(by0.clone())).max(zero);
    let inter = iw * ih;
    let union = (ax1 - ax0) * (ay1 - ay0) + (bx1 - bx0) * (by1 - by0) - inter.clone();
    inter / union
}

/// AP entirely in rational arithmetic, including the matching IoU.
pub fn rational_ap(
    dets: &[Detection],
    gts: &[GroundTruthObject],
    class_id: ClassId,
    thr: f64,
) -> f64 {
    let thr_q = BigRational::from_float(thr).expect("finite");
    let dets: Vec<&Detection> = dets.iter().filter(|d| d.class_id == class_id).collect();
    let gts: Vec<&GroundTruthObject> = gts.iter().filter(|g| g.class_id == class_id).collect();
    let total = gts.len();
    let mut scores: Vec<f64> = dets.iter().map(|d| d.score()).collect();
    scores.sort_by(|a, b| b.total_cmp(a));
    scores.dedup();

    let mut points = vec![(BigRational::from_integer(1.into()), BigRational::zero())];
    for &t in &scores {
        let (mut tp, mut fp) = (0, 0);
        let mut by_image: BTreeMap<(ScanId, View), ImageContents> =
            BTreeMap::new();
        for d in dets.iter().filter(|d| d.score() >= t) {
            by_image.entry((d.scan_id.clone(), d.view)).or_default().0.push(d);
        }
        for g in &gts {
            by_image.entry((g.scan_id.clone(), g.view)).or_default().1.push(g);
        }
        for (d, g) in by_image.values() {
            let g = sorted_gts(g);
            let mut ranked = d.clone();
            ranked.sort_by(|a, b| rank_order(a, b));
            let mut taken = vec![false; g.len()];
            for det in ranked {
                let mut best: Option<(usize, BigRational)> = None;
                for (i, gt) in g.iter().enumerate() {
                    if taken[i] {
                        continue;
                    }
                    let o = iou_rational(&det.bbox, &gt.bbox);
                    if o >= thr_q && best.as_ref().is_none_or(|(_, b)| &o > b) {
                        best = Some((i, o));
                    }
                }
                match best {
                    Some((i, _)) => {
                        taken[i] = true;
                        tp += 1;
                    }
                    None => fp += 1,
                }
            }
        }
        let p = if tp + fp == 0 { rational(1, 1) } else { rational(tp, tp + fp) };
        points.push((p, rational(tp, total)));
    }
    let mut env = vec![BigRational::zero(); points.len()];
    let mut run = BigRational::zero();
    for i in (0..points.len()).rev() {
        if points[i].0 > run {
            run = points[i].0.clone();
        }
        env[i] = run.clone();
    }
    let mut area = BigRational::zero();
    let mut prev = BigRational::zero();
    for (i, (_, r)) in points.iter().enumerate() {
        if *r > prev {
            area += (r - &prev) * &env[i];
            prev = r.clone();
        }
    }
    area.to_f64().expect("finite")
}

/// Length covered by cell centers of a `cell`-spaced grid inside `[lo, hi)`,
/// counting cells one by one.
fn raster_len(lo: f64, hi: f64, cell: f64) -> f64 {
    let first = (lo / cell).floor() as i64 - 1;
    let last = (hi / cell).ceil() as i64 + 1;
    let count = (first..=last)
        .filter(|&k| {
            let c = (k as f64 + 0.5) * cell;
            c >= lo && c < hi
        })
        .count();
    count as f64 * cell
}

/// IoU by counting `cell`-sized raster cells. Axis-aligned boxes make the
/// cell set a product of per-axis runs, so each axis is counted once.
pub fn raster_iou(a: &BBox, b: &BBox, cell: f64) -> f64 {
    let (ax0, ay0, ax1, ay1) = a.corners();
    let (bx0, by0, bx1, by1) = b.corners();
    let area_a = raster_len(ax0, ax1, cell) * raster_len(ay0, ay1, cell);
    let area_b = raster_len(bx0, bx1, cell) * raster_len(by0, by1, cell);
    let ix = if ax1.min(bx1) > ax0.max(bx0) {
        raster_len(ax0.max(bx0), ax1.min(bx1), cell)
    } else {
        0.0
    };
    let iy = if ay1.min(by1) > ay0.max(by0) {
        raster_len(ay0.max(by0), ay1.min(by1), cell)
    } else {
        0.0
    };
    let inter = ix * iy;
    inter / (area_a + area_b - inter)
}

/// Random instance for the AP oracles: integer-cornered boxes on a small
/// canvas so overlaps and score ties are frequent.
pub fn random_ap_instance<R: Rng>(rng: &mut R) -> (Vec<Detection>, Vec<GroundTruthObject>) {
    let classes = [ClassId::Sharps, ClassId::Firearms];
    let images: Vec<(ScanId, View)> = (0..rng.gen_range(1..=2))
        .flat_map(|s| View::BOTH.map(|v| (ScanId(format!("s{s}")), v)))
        .collect();
    let int_box = |rng: &mut R| {
        let x0 = f64::from(rng.gen_range(0..12));
        let y0 = f64::from(rng.gen_range(0..12));
        let w = f64::from(rng.gen_range(1..8));
        let h = f64::from(rng.gen_range(1..8));
        BBox::from_corners(x0, y0, x0 + w, y0 + h).unwrap()
    };
    let n_gt = rng.gen_range(1..=10);
    let gts = (0..n_gt)
        .map(|i| {
            let (scan_id, view) = images[rng.gen_range(0..images.len())].clone();
            GroundTruthObject {
                bbox: int_box(rng),
                class_id: classes[rng.gen_range(0..2)],
                object_id: ObjectId(format!("o{i}")),
                view,
                scan_id,
            }
        })
        .collect();
    let n_det = rng.gen_range(0..=20);
    let dets = (0..n_det)
        .map(|_| {
            let (scan_id, view) = images[rng.gen_range(0..images.len())].clone();
            let score = f64::from(rng.gen_range(1..=10)) / 10.0;
            Detection::new(int_box(rng), classes[rng.gen_range(0..2)], score, view, scan_id).unwrap()
        })
        .collect();
    (dets, gts)
}

/// Random two-view evaluation set. Each physical object has one view where
/// it is easy to see and one where it is often missed; true detections
/// score higher on average than clutter responses.
pub fn random_eval_set<R: Rng>(
    rng: &mut R,
    scans: std::ops::RangeInclusive<usize>,
) -> (Vec<Detection>, Vec<GroundTruthObject>) {
    let mut gts = Vec::new();
    let mut dets = Vec::new();
    let n_scans = rng.gen_range(scans.clone());
    for s in 0..n_scans {
        let scan_id = ScanId(format!("scan-{s:03}"));
        let n_obj = rng.gen_range(0..=2);
        for o in 0..n_obj {
            let class_id = ClassId::ALL[rng.gen_range(0..4)];
            let object_id = ObjectId(format!("t{o}"));
            let x0 = rng.gen_range(0.0..400.0);
            let w = rng.gen_range(20.0..200.0);
            let easy = View::BOTH[rng.gen_range(0..2)];
            for view in View::BOTH {
                let y0 = rng.gen_range(0.0..300.0);
                let h = rng.gen_range(20.0..120.0);
                let bbox = BBox::from_corners(x0, y0, x0 + w, y0 + h).unwrap();
                gts.push(GroundTruthObject {
                    bbox,
                    class_id,
                    object_id: object_id.clone(),
                    view,
                    scan_id: scan_id.clone(),
                });
                let p_detect = if view == easy {
                    rng.gen_range(0.75..1.0)
                } else {
                    rng.gen_range(0.2..0.7)
                };
                if rng.gen_bool(p_detect) {
                    let jitter = |rng: &mut R, s: f64| rng.gen_range(-0.08..0.08) * s;
                    let b = BBox::new(
                        bbox.cx() + jitter(rng, w),
                        bbox.cy() + jitter(rng, h),
                        w * (1.0 + jitter(rng, 1.0)),
                        h * (1.0 + jitter(rng, 1.0)),
                    )
                    .unwrap();
                    let score = rng.gen_range(0.45..1.0);
                    dets.push(Detection::new(b, class_id, score, view, scan_id.clone()).unwrap());
                }
            }
        }
        for view in View::BOTH {
            for _ in 0..rng.gen_range(0..=2) {
                let x0 = rng.gen_range(0.0..500.0);
                let y0 = rng.gen_range(0.0..350.0);
                let b = BBox::from_corners(x0, y0, x0 + 30.0, y0 + 30.0).unwrap();
                let class_id = ClassId::ALL[rng.gen_range(0..4)];
                let score = rng.gen_range(0.0..0.7);
                dets.push(Detection::new(b, class_id, score, view, scan_id.clone()).unwrap());
            }
        }
    }
    (dets, gts)
}
