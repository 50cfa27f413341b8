//! Annotation and detection files (JSON lines) and the view-paired splitter.
//!
//! One line holds one view of one bag-scan:
//!
//! ```text
//! {"scan_id":"scan-00000","bag_id":"bag-00000","view":"top","image_w":640,"image_h":640,
//!  "objects":[{"object_id":"t0","class":"firearms","cx":310.5,"cy":122.0,"w":180.0,"h":131.0}]}
//! ```
//!
//! Detection files use the same layout with `score` instead of `object_id`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BBox, ClassId, Detection, ObjectId, ScanId, View};
use crate::metrics::GroundTruthObject;

/// One annotated view image.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanAnnotation {
    pub scan_id: ScanId,
    pub bag_id: String,
    pub view: View,
    pub image_w: u32,
    pub image_h: u32,
    pub image_path: Option<PathBuf>,
    pub objects: Vec<GroundTruthObject>,
}

impl ScanAnnotation {
    /// Checks ids, object uniqueness, and that every box lies in the image.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let (w, h) = (f64::from(self.image_w), f64::from(self.image_h));
        if self.image_w == 0 || self.image_h == 0 {
            return Err("image dimensions must be positive".into());
        }
        let mut ids = BTreeSet::new();
        for obj in &self.objects {
            if obj.scan_id != self.scan_id || obj.view != self.view {
                return Err(format!("object {} belongs to another image", obj.object_id));
            }
            if !ids.insert(&obj.object_id) {
                return Err(format!("duplicate object_id {}", obj.object_id));
            }
            let (x0, y0, x1, y1) = obj.bbox.corners();
            const EPS: f64 = 1e-9;
            if x0 < -EPS || y0 < -EPS || x1 > w + EPS || y1 > h + EPS {
                return Err(format!(
                    "object {} box ({x0}, {y0})-({x1}, {y1}) leaves the {w}x{h} image",
                    obj.object_id
                ));
            }
        }
        Ok(())
    }

    /// File name of the color image inside a dataset directory.
    pub fn image_file_name(&self) -> String {
        image_file_name(&self.scan_id, self.view)
    }
}

pub fn image_file_name(scan_id: &ScanId, view: View) -> String {
    format!("{}_{}.png", scan_id, view.as_str())
}

#[derive(Serialize, Deserialize)]
struct ObjectRecord {
    object_id: String,
    class: String,
    cx: f64,
    cy: f64,
    w: f64,
    h: f64,
}

#[derive(Serialize, Deserialize)]
struct AnnotationRecord {
    scan_id: String,
    bag_id: String,
    view: View,
    image_w: u32,
    image_h: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    image_path: Option<String>,
    objects: Vec<ObjectRecord>,
}

#[derive(Serialize, Deserialize)]
struct DetectionObjectRecord {
    class: String,
    cx: f64,
    cy: f64,
    w: f64,
    h: f64,
    score: f64,
}

#[derive(Serialize, Deserialize)]
struct DetectionRecord {
    scan_id: String,
    bag_id: String,
    view: View,
    image_w: u32,
    image_h: u32,
    objects: Vec<DetectionObjectRecord>,
}

/// Boxes are written with three decimals.
fn round3(x: f64) -> f64 {
    let r = (x * 1000.0).round() / 1000.0;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn parse_class(name: &str) -> std::result::Result<ClassId, String> {
    ClassId::parse(name).ok_or_else(|| {
        format!("unknown class {name:?} (expected sharps, blunts, firearms or lags)")
    })
}

fn record_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Record {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Reads non-blank lines, handing each to `parse` with its 1-based number.
fn read_lines<T>(
    path: &Path,
    mut parse: impl FnMut(&str) -> std::result::Result<T, String>,
) -> Result<Vec<(usize, T)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = parse(&line).map_err(|m| record_error(path, i + 1, m))?;
        out.push((i + 1, value));
    }
    Ok(out)
}

fn annotation_from_record(rec: AnnotationRecord) -> std::result::Result<ScanAnnotation, String> {
    let scan_id = ScanId(rec.scan_id);
    let objects = rec
        .objects
        .into_iter()
        .map(|o| {
            let bbox = BBox::new(o.cx, o.cy, o.w, o.h)
                .map_err(|e| format!("object {}: {e}", o.object_id))?;
            Ok(GroundTruthObject {
                bbox,
                class_id: parse_class(&o.class)?,
                object_id: ObjectId(o.object_id),
                view: rec.view,
                scan_id: scan_id.clone(),
            })
        })
        .collect::<std::result::Result<Vec<_>, String>>()?;
    let anno = ScanAnnotation {
        scan_id,
        bag_id: rec.bag_id,
        view: rec.view,
        image_w: rec.image_w,
        image_h: rec.image_h,
        image_path: rec.image_path.map(PathBuf::from),
        objects,
    };
    anno.validate()?;
    Ok(anno)
}

pub fn parse_annotation_line(line: &str) -> std::result::Result<ScanAnnotation, String> {
    let rec: AnnotationRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
    annotation_from_record(rec)
}

/// Loads an annotation file, rejecting invalid records and repeated
/// `(scan_id, view)` pairs with the offending line number.
pub fn load_annotations(path: impl AsRef<Path>) -> Result<Vec<ScanAnnotation>> {
    let path = path.as_ref();
    let records = read_lines(path, parse_annotation_line)?;
    let mut seen = BTreeMap::new();
    let mut out = Vec::with_capacity(records.len());
    for (line, anno) in records {
        if let Some(first) = seen.insert((anno.scan_id.clone(), anno.view), line) {
            return Err(record_error(
                path,
                line,
                format!(
                    "scan {} already has a {} view on line {first}",
                    anno.scan_id, anno.view
                ),
            ));
        }
        out.push(anno);
    }
    Ok(out)
}

pub fn annotation_line(anno: &ScanAnnotation) -> String {
    let rec = AnnotationRecord {
        scan_id: anno.scan_id.0.clone(),
        bag_id: anno.bag_id.clone(),
        view: anno.view,
        image_w: anno.image_w,
        image_h: anno.image_h,
        image_path: anno
            .image_path
            .as_ref()
            .map(|p| p.to_string_lossy().into_owned()),
        objects: anno
            .objects
            .iter()
            .map(|o| ObjectRecord {
                object_id: o.object_id.0.clone(),
                class: o.class_id.as_str().to_owned(),
                cx: round3(o.bbox.cx()),
                cy: round3(o.bbox.cy()),
                w: round3(o.bbox.w()),
                h: round3(o.bbox.h()),
            })
            .collect(),
    };
    serde_json::to_string(&rec).expect("annotation serializes")
}

fn write_lines(path: &Path, lines: impl Iterator<Item = String>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for line in lines {
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn save_annotations(annos: &[ScanAnnotation], path: impl AsRef<Path>) -> Result<()> {
    write_lines(path.as_ref(), annos.iter().map(annotation_line))
}

pub fn parse_detection_line(line: &str) -> std::result::Result<Vec<Detection>, String> {
    let rec: DetectionRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let scan_id = ScanId(rec.scan_id);
    rec.objects
        .into_iter()
        .map(|o| {
            let bbox = BBox::new(o.cx, o.cy, o.w, o.h).map_err(|e| e.to_string())?;
            Detection::new(bbox, parse_class(&o.class)?, o.score, rec.view, scan_id.clone())
                .map_err(|e| e.to_string())
        })
        .collect()
}

pub fn load_detections(path: impl AsRef<Path>) -> Result<Vec<Detection>> {
    Ok(read_lines(path.as_ref(), parse_detection_line)?
        .into_iter()
        .flat_map(|(_, dets)| dets)
        .collect())
}

/// One line per annotated view, carrying that view's detections.
pub fn detection_lines(annos: &[ScanAnnotation], dets: &[Detection]) -> Vec<String> {
    let mut by_image: BTreeMap<(&ScanId, View), Vec<&Detection>> = BTreeMap::new();
    for d in dets {
        by_image.entry((&d.scan_id, d.view)).or_default().push(d);
    }
    annos
        .iter()
        .map(|a| {
            let objects = by_image
                .get(&(&a.scan_id, a.view))
                .map(|v| v.as_slice())
                .unwrap_or(&[])
                .iter()
                .map(|d| DetectionObjectRecord {
                    class: d.class_id.as_str().to_owned(),
                    cx: round3(d.bbox.cx()),
                    cy: round3(d.bbox.cy()),
                    w: round3(d.bbox.w()),
                    h: round3(d.bbox.h()),
                    score: d.score(),
                })
                .collect();
            let rec = DetectionRecord {
                scan_id: a.scan_id.0.clone(),
                bag_id: a.bag_id.clone(),
                view: a.view,
                image_w: a.image_w,
                image_h: a.image_h,
                objects,
            };
            serde_json::to_string(&rec).expect("detections serialize")
        })
        .collect()
}

pub fn save_detections(
    annos: &[ScanAnnotation],
    dets: &[Detection],
    path: impl AsRef<Path>,
) -> Result<()> {
    write_lines(path.as_ref(), detection_lines(annos, dets).into_iter())
}

/// All ground-truth objects of a set of annotations.
pub fn ground_truth(annos: &[ScanAnnotation]) -> Vec<GroundTruthObject> {
    annos.iter().flat_map(|a| a.objects.iter().cloned()).collect()
}

/// Unit that must not be divided between subsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GroupBy {
    /// Every scan of a bag, across all poses, stays together.
    Bag,
    /// Both views of one pass through the scanner stay together.
    #[default]
    BagScan,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitFractions {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions {
            train: 0.7,
            validation: 0.1,
            test: 0.2,
        }
    }
}

impl SplitFractions {
    fn validate(&self) -> Result<()> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|&f| !(f > 0.0)) || ((parts.iter().sum::<f64>()) - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "split fractions {parts:?} must be positive and sum to 1"
            )));
        }
        Ok(())
    }

    /// Largest-remainder sizes for `n` units; each is within one of `n * f`.
    pub fn sizes(&self, n: usize) -> [usize; 3] {
        let exact = [self.train, self.validation, self.test].map(|f| f * n as f64);
        let mut sizes = exact.map(|x| x.floor() as usize);
        let mut order = [0, 1, 2];
        order.sort_by(|&a, &b| {
            let ra = exact[a] - exact[a].floor();
            let rb = exact[b] - exact[b].floor();
            rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
        });
        let leftover = n - sizes.iter().sum::<usize>();
        for &i in order.iter().take(leftover) {
            sizes[i] += 1;
        }
        sizes
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct DatasetSplit {
    pub train: BTreeSet<ScanId>,
    pub validation: BTreeSet<ScanId>,
    pub test: BTreeSet<ScanId>,
}

/// Shuffles whole groups with a seeded generator and deals them out
/// train, validation, test.
pub fn split_dataset(
    annos: &[ScanAnnotation],
    fractions: SplitFractions,
    seed: u64,
    group_by: GroupBy,
) -> Result<DatasetSplit> {
    fractions.validate()?;
    let mut groups: BTreeMap<String, BTreeSet<ScanId>> = BTreeMap::new();
    for a in annos {
        let key = match group_by {
            GroupBy::Bag => a.bag_id.clone(),
            GroupBy::BagScan => a.scan_id.0.clone(),
        };
        groups.entry(key).or_default().insert(a.scan_id.clone());
    }
    // A scan id must not straddle two bags, or grouping by bag would leak it.
    let mut owner: BTreeMap<&ScanId, &str> = BTreeMap::new();
    for a in annos {
        if let Some(prev) = owner.insert(&a.scan_id, &a.bag_id) {
            if prev != a.bag_id {
                return Err(Error::Annotation(format!(
                    "scan {} is attributed to bags {prev} and {}",
                    a.scan_id, a.bag_id
                )));
            }
        }
    }
    let bag_scans = annos.iter().map(|a| &a.scan_id).collect::<BTreeSet<_>>().len();
    if bag_scans < 3 {
        return Err(Error::InvalidConfig(format!(
            "need at least 3 bag-scans to split, found {bag_scans}"
        )));
    }
    if groups.len() < 3 {
        return Err(Error::InvalidConfig(format!(
            "need at least 3 groups to split, found {}",
            groups.len()
        )));
    }

    let mut units: Vec<BTreeSet<ScanId>> = groups.into_values().collect();
    units.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let [n_train, n_val, _] = fractions.sizes(units.len());

    let mut split = DatasetSplit::default();
    for (i, unit) in units.into_iter().enumerate() {
        let target = if i < n_train {
            &mut split.train
        } else if i < n_train + n_val {
            &mut split.validation
        } else {
            &mut split.test
        };
        target.extend(unit);
    }
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn anno(scan: &str, bag: &str, view: View, objects: &[(&str, ClassId, [f64; 4])]) -> ScanAnnotation {
        let scan_id = ScanId::from(scan);
        ScanAnnotation {
            scan_id: scan_id.clone(),
            bag_id: bag.into(),
            view,
            image_w: 640,
            image_h: 430,
            image_path: None,
            objects: objects
                .iter()
                .map(|(id, c, [cx, cy, w, h])| GroundTruthObject {
                    bbox: BBox::new(*cx, *cy, *w, *h).unwrap(),
                    class_id: *c,
                    object_id: (*id).into(),
                    view,
                    scan_id: scan_id.clone(),
                })
                .collect(),
        }
    }

    #[test]
    fn schema_field_names() {
        let a = anno("s1", "b1", View::Side, &[("t0", ClassId::Lags, [10.0, 20.0, 4.0, 6.0])]);
        assert_eq!(
            annotation_line(&a),
            r#"{"scan_id":"s1","bag_id":"b1","view":"side","image_w":640,"image_h":430,"objects":[{"object_id":"t0","class":"lags","cx":10.0,"cy":20.0,"w":4.0,"h":6.0}]}"#
        );
    }

    #[test]
    fn zero_width_is_rejected() {
        let line = r#"{"scan_id":"s","bag_id":"b","view":"top","image_w":10,"image_h":10,"objects":[{"object_id":"o","class":"sharps","cx":5,"cy":5,"w":0,"h":2}]}"#;
        assert!(parse_annotation_line(line).is_err());
    }

    #[test]
    fn unknown_class_and_out_of_bounds() {
        let bad_class = r#"{"scan_id":"s","bag_id":"b","view":"top","image_w":10,"image_h":10,"objects":[{"object_id":"o","class":"knives","cx":5,"cy":5,"w":1,"h":2}]}"#;
        assert!(parse_annotation_line(bad_class).unwrap_err().contains("unknown class"));
        let outside = r#"{"scan_id":"s","bag_id":"b","view":"top","image_w":10,"image_h":10,"objects":[{"object_id":"o","class":"sharps","cx":9.5,"cy":5,"w":2,"h":2}]}"#;
        assert!(parse_annotation_line(outside).unwrap_err().contains("leaves"));
    }

    #[test]
    fn detection_lines_round_trip() {
        let a = anno("s1", "b1", View::Top, &[]);
        let d = Detection::new(
            BBox::new(10.0, 12.0, 3.0, 4.0).unwrap(),
            ClassId::Firearms,
            0.625,
            View::Top,
            "s1".into(),
        )
        .unwrap();
        let lines = detection_lines(&[a], std::slice::from_ref(&d));
        assert_eq!(lines.len(), 1);
        assert!(lines[0].contains(r#""score":0.625"#));
        assert!(!lines[0].contains("object_id"));
        assert_eq!(parse_detection_line(&lines[0]).unwrap(), vec![d]);
    }

    #[test]
    fn split_sizes_for_ten_scans() {
        let annos: Vec<ScanAnnotation> = (0..10)
            .flat_map(|i| {
                let s = format!("s{i}");
                View::BOTH.map(|v| anno(&s, &format!("b{i}"), v, &[]))
            })
            .collect();
        let split = split_dataset(&annos, SplitFractions::default(), 1, GroupBy::BagScan).unwrap();
        assert_eq!(
            (split.train.len(), split.validation.len(), split.test.len()),
            (7, 1, 2)
        );
        let again = split_dataset(&annos, SplitFractions::default(), 1, GroupBy::BagScan).unwrap();
        assert_eq!(split, again);
    }

    #[test]
    fn too_few_scans_and_bad_fractions() {
        let annos = vec![anno("a", "a", View::Top, &[]), anno("b", "b", View::Top, &[])];
        assert!(split_dataset(&annos, SplitFractions::default(), 0, GroupBy::BagScan).is_err());
        let bad = SplitFractions {
            train: 0.5,
            validation: 0.5,
            test: 0.5,
        };
        let annos: Vec<_> = ["a", "b", "c"].iter().map(|s| anno(s, s, View::Top, &[])).collect();
        assert!(split_dataset(&annos, bad, 0, GroupBy::BagScan).is_err());
    }

    #[test]
    fn group_by_bag_keeps_poses_together() {
        let annos: Vec<ScanAnnotation> = (0..12)
            .flat_map(|i| {
                let s = format!("s{i}");
                let b = format!("b{}", i / 3);
                View::BOTH.map(|v| anno(&s, &b, v, &[]))
            })
            .collect();
        let split = split_dataset(&annos, SplitFractions::default(), 9, GroupBy::Bag).unwrap();
        for bag in 0..4 {
            let scans: Vec<ScanId> = (0..3).map(|k| ScanId(format!("s{}", bag * 3 + k))).collect();
            let home = |set: &BTreeSet<ScanId>| scans.iter().filter(|s| set.contains(*s)).count();
            let counts = [home(&split.train), home(&split.validation), home(&split.test)];
            assert!(counts.contains(&3), "bag {bag} split across subsets: {counts:?}");
        }
    }

    #[test]
    fn largest_remainder_sizes() {
        let f = SplitFractions::default();
        assert_eq!(f.sizes(10), [7, 1, 2]);
        assert_eq!(f.sizes(3), [2, 0, 1]);
        assert_eq!(f.sizes(101).iter().sum::<usize>(), 101);
    }
}
