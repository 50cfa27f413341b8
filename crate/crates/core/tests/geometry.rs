use dualview_core::{iou, nms, BBox, ClassId, Detection, ScanId, View};
use proptest::prelude::*;

fn arb_box() -> impl Strategy<Value = BBox> {
    (-500.0..500.0f64, -500.0..500.0f64, 1.0..300.0f64, 1.0..300.0f64)
        .prop_map(|(cx, cy, w, h)| BBox::new(cx, cy, w, h).unwrap())
}

fn arb_class() -> impl Strategy<Value = ClassId> {
    (0..4usize).prop_map(|i| ClassId::ALL[i])
}

fn arb_detections() -> impl Strategy<Value = Vec<Detection>> {
    let det = (
        (0.0..200.0f64, 0.0..200.0f64, 5.0..80.0f64, 5.0..80.0f64),
        arb_class(),
        0u32..=20,
    )
        .prop_map(|((cx, cy, w, h), class_id, s)| {
            let bbox = BBox::new(cx, cy, w, h).unwrap();
            Detection::new(bbox, class_id, f64::from(s) / 20.0, View::Top, ScanId::from("s")).unwrap()
        });
    prop::collection::vec(det, 0..30)
}

proptest! {
    #[test]
    fn iou_is_symmetric_and_bounded(a in arb_box(), b in arb_box()) {
        let ab = iou(&a, &b);
        prop_assert_eq!(ab, iou(&b, &a));
        prop_assert!((0.0..=1.0).contains(&ab));
    }

    #[test]
    fn iou_with_itself_is_one(a in arb_box()) {
        prop_assert!((iou(&a, &a) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn iou_is_translation_invariant(
        a in arb_box(),
        b in arb_box(),
        dx in -1000.0..1000.0f64,
        dy in -1000.0..1000.0f64,
    ) {
        let moved = iou(&a.translate(dx, dy), &b.translate(dx, dy));
        prop_assert!((moved - iou(&a, &b)).abs() < 1e-9);
    }

    #[test]
    fn single_and_double_precision_agree(a in arb_box(), b in arb_box()) {
        let narrow = iou(&a.convert::<f32>(), &b.convert::<f32>());
        prop_assert!((f64::from(narrow) - iou(&a, &b)).abs() < 1e-3);
    }

    #[test]
    fn contained_box_iou_is_area_ratio(a in arb_box(), f in 0.05..1.0f64) {
        let inner = BBox::new(a.cx(), a.cy(), a.w() * f, a.h()).unwrap();
        prop_assert!((iou(&a, &inner) - f).abs() < 1e-9);
    }

    #[test]
    fn nms_output_is_a_subset(dets in arb_detections(), thr in 0.1..0.9f64) {
        for k in nms(&dets, thr) {
            prop_assert!(dets.contains(&k));
        }
    }

    #[test]
    fn nms_leaves_no_overlapping_same_class_pair(dets in arb_detections(), thr in 0.1..0.9f64) {
        let kept = nms(&dets, thr);
        for (i, a) in kept.iter().enumerate() {
            for b in &kept[i + 1..] {
                prop_assert!(a.class_id != b.class_id || iou(&a.bbox, &b.bbox) <= thr);
            }
        }
    }

    #[test]
    fn nms_is_idempotent(dets in arb_detections(), thr in 0.1..0.9f64) {
        let once = nms(&dets, thr);
        prop_assert_eq!(nms(&once, thr), once);
    }

    #[test]
    fn nms_drops_only_covered_boxes(dets in arb_detections(), thr in 0.1..0.9f64) {
        let kept = nms(&dets, thr);
        for d in dets.iter().filter(|d| !kept.contains(d)) {
            let covered = kept.iter().any(|k| {
                k.class_id == d.class_id && k.score() >= d.score() && iou(&k.bbox, &d.bbox) > thr
            });
            prop_assert!(covered);
        }
    }
}
