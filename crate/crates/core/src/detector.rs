//! Heuristic blob detector over false-color views, and the pluggable
//! detector contract it shares with recorded model output.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use image::{GrayImage, Luma, RgbImage};
use imageproc::region_labelling::{connected_components, Connectivity};

use crate::dataset::{load_detections, ScanAnnotation};
use crate::error::{Error, Result};
use crate::geometry::{nms, BBox, ClassId, Detection, ScanId, View, DEFAULT_NMS_IOU};
use crate::synth::color::{decode_image, DecodedPixel};
use crate::synth::physics::HueClass;

/// Produces detections for one view of one scan.
pub trait Detector: Sync {
    fn name(&self) -> &str;

    /// Whether [`Detector::detect`] reads the view image.
    fn needs_image(&self) -> bool {
        true
    }

    fn detect(&self, scan: &ScanAnnotation, image: Option<&RgbImage>) -> Result<Vec<Detection>>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreWeights {
    pub purity: f64,
    pub aspect: f64,
    pub area: f64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        ScoreWeights {
            purity: 0.5,
            aspect: 0.3,
            area: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorParams {
    /// Smallest blob kept, in pixels.
    pub min_blob_area: u32,
    /// Orange pixels at most this bright (high-band transmission) count as
    /// dense liquid.
    pub liquid_max_transmission: f64,
    /// Blue blobs filling less of their box than this may be L-profiles.
    pub l_profile_max_fill: f64,
    /// L-profiles are more compact than this long/short side ratio.
    pub l_profile_max_elongation: f64,
    /// Short side, in pixels, of a metal bar seen end-on.
    pub bar_min_short_side: u32,
    pub bar_max_transmission: f64,
    /// Long side, in pixels, of an intermediate-Z handle.
    pub handle_min_length: u32,
    pub handle_min_elongation: f64,
    pub sharp_min_elongation: f64,
    pub liquid_min_fill: f64,
    /// Blob area that earns the full area score.
    pub full_score_area: f64,
    pub weights: ScoreWeights,
    pub nms_iou: f64,
}

impl Default for DetectorParams {
    fn default() -> Self {
        DetectorParams {
            min_blob_area: 30,
            liquid_max_transmission: 0.6,
            l_profile_max_fill: 0.8,
            l_profile_max_elongation: 6.0,
            bar_min_short_side: 15,
            bar_max_transmission: 0.1,
            handle_min_length: 150,
            handle_min_elongation: 3.0,
            sharp_min_elongation: 3.0,
            liquid_min_fill: 0.5,
            full_score_area: 4000.0,
            weights: ScoreWeights::default(),
            nms_iou: DEFAULT_NMS_IOU,
        }
    }
}

impl DetectorParams {
    pub fn validate(&self) -> Result<()> {
        let w = &self.weights;
        let weights_ok = [w.purity, w.aspect, w.area].iter().all(|x| *x >= 0.0)
            && w.purity + w.aspect + w.area > 0.0;
        if self.min_blob_area < 1 {
            return Err(Error::InvalidConfig("minimum blob area must be at least 1".into()));
        }
        if !weights_ok || !(self.full_score_area > 0.0) {
            return Err(Error::InvalidConfig("score weights must be non-negative".into()));
        }
        if !(self.nms_iou > 0.0 && self.nms_iou <= 1.0) {
            return Err(Error::InvalidConfig(format!("NMS IoU {} outside (0, 1]", self.nms_iou)));
        }
        Ok(())
    }
}

/// Connected region of one mask.
#[derive(Debug, Clone)]
struct Blob {
    x0: u32,
    y0: u32,
    x1: u32,
    y1: u32,
    area: u32,
    sum_transmission: f64,
}

impl Blob {
    fn new(x: u32, y: u32) -> Self {
        Blob {
            x0: x,
            y0: y,
            x1: x,
            y1: y,
            area: 0,
            sum_transmission: 0.0,
        }
    }

    fn add(&mut self, x: u32, y: u32, t: f64) {
        self.x0 = self.x0.min(x);
        self.y0 = self.y0.min(y);
        self.x1 = self.x1.max(x);
        self.y1 = self.y1.max(y);
        self.area += 1;
        self.sum_transmission += t;
    }

    fn width(&self) -> u32 {
        self.x1 - self.x0 + 1
    }

    fn height(&self) -> u32 {
        self.y1 - self.y0 + 1
    }

    fn long_side(&self) -> u32 {
        self.width().max(self.height())
    }

    fn short_side(&self) -> u32 {
        self.width().min(self.height())
    }

    fn elongation(&self) -> f64 {
        f64::from(self.long_side()) / f64::from(self.short_side())
    }

    fn fill(&self) -> f64 {
        f64::from(self.area) / (f64::from(self.width()) * f64::from(self.height()))
    }

    fn mean_transmission(&self) -> f64 {
        self.sum_transmission / f64::from(self.area)
    }

    fn union(&self, other: &Blob) -> Blob {
        Blob {
            x0: self.x0.min(other.x0),
            y0: self.y0.min(other.y0),
            x1: self.x1.max(other.x1),
            y1: self.y1.max(other.y1),
            area: self.area + other.area,
            sum_transmission: self.sum_transmission + other.sum_transmission,
        }
    }

    fn bbox(&self) -> BBox {
        BBox::from_corners(
            f64::from(self.x0),
            f64::from(self.y0),
            f64::from(self.x1 + 1),
            f64::from(self.y1 + 1),
        )
        .expect("blob boxes are non-empty")
    }
}

/// Labelled mask: per-pixel labels (0 = outside) and blobs by label.
struct Components {
    labels: Vec<u32>,
    blobs: BTreeMap<u32, Blob>,
}

fn label_mask(
    width: u32,
    height: u32,
    pixels: &[DecodedPixel],
    keep: impl Fn(HueClass, f64) -> bool,
) -> Components {
    let mask = GrayImage::from_fn(width, height, |x, y| {
        match pixels[y as usize * width as usize + x as usize] {
            Some((hue, t)) if keep(hue, t) => Luma([255]),
            _ => Luma([0]),
        }
    });
    let labelled = connected_components(&mask, Connectivity::Four, Luma([0u8]));
    let mut blobs: BTreeMap<u32, Blob> = BTreeMap::new();
    for (x, y, l) in labelled.enumerate_pixels() {
        let l = l.0[0];
        if l != 0 {
            let t = pixels[y as usize * width as usize + x as usize].map_or(1.0, |p| p.1);
            blobs.entry(l).or_insert_with(|| Blob::new(x, y)).add(x, y, t);
        }
    }
    Components {
        labels: labelled.into_raw(),
        blobs,
    }
}

/// Pairs `(a_label, b_label)` of blobs that touch 4-adjacently.
fn adjacent_pairs(width: u32, height: u32, a: &Components, b: &Components) -> BTreeSet<(u32, u32)> {
    let (w, h) = (width as usize, height as usize);
    let mut pairs = BTreeSet::new();
    let mut check = |p: usize, q: usize| {
        if a.labels[p] != 0 && b.labels[q] != 0 {
            pairs.insert((a.labels[p], b.labels[q]));
        }
        if a.labels[q] != 0 && b.labels[p] != 0 {
            pairs.insert((a.labels[q], b.labels[p]));
        }
    };
    for y in 0..h {
        for x in 0..w {
            let p = y * w + x;
            if x + 1 < w {
                check(p, p + 1);
            }
            if y + 1 < h {
                check(p, p + w);
            }
        }
    }
    pairs
}

fn expected_elongation(class_id: ClassId) -> f64 {
    match class_id {
        ClassId::Sharps => 8.0,
        ClassId::Blunts => 3.0,
        ClassId::Firearms => 2.0,
        ClassId::Lags => 2.0,
    }
}

fn class_hues(class_id: ClassId) -> &'static [HueClass] {
    match class_id {
        ClassId::Sharps | ClassId::Firearms => &[HueClass::Blue],
        ClassId::Blunts => &[HueClass::Blue, HueClass::Green],
        ClassId::Lags => &[HueClass::Orange],
    }
}

/// Deterministic rule-based detector for synthetic false-color views.
#[derive(Debug, Clone, Default)]
pub struct BaselineDetector {
    pub params: DetectorParams,
}

impl BaselineDetector {
    pub fn new(params: DetectorParams) -> Result<Self> {
        params.validate()?;
        Ok(BaselineDetector { params })
    }

    fn score(&self, class_id: ClassId, blob: &Blob, pixels: &[DecodedPixel], width: u32) -> f64 {
        let hues = class_hues(class_id);
        let (mut material, mut matching) = (0u32, 0u32);
        for y in blob.y0..=blob.y1 {
            for x in blob.x0..=blob.x1 {
                if let Some((hue, _)) = pixels[y as usize * width as usize + x as usize] {
                    material += 1;
                    matching += u32::from(hues.contains(&hue));
                }
            }
        }
        let purity = f64::from(matching) / f64::from(material.max(1));
        let (e, want) = (blob.elongation(), expected_elongation(class_id));
        let aspect = if class_id == ClassId::Sharps {
            // any sufficiently slender blade fits
            (e / want).min(1.0)
        } else {
            e.min(want) / e.max(want)
        };
        let area = (f64::from(blob.area) / self.params.full_score_area).min(1.0);
        let w = &self.params.weights;
        let s = (w.purity * purity + w.aspect * aspect + w.area * area)
            / (w.purity + w.aspect + w.area);
        s.clamp(1e-6, 1.0)
    }

    /// Detects threats in one false-color view.
    pub fn detect_image(&self, image: &RgbImage, scan_id: &ScanId, view: View) -> Result<Vec<Detection>> {
        let p = &self.params;
        let (width, height) = image.dimensions();
        let pixels = decode_image(image)?;

        let metal = label_mask(width, height, &pixels, |h, _| h == HueClass::Blue);
        let mid = label_mask(width, height, &pixels, |h, _| h == HueClass::Green);
        let liquid = label_mask(width, height, &pixels, |h, t| {
            h == HueClass::Orange && t < p.liquid_max_transmission
        });
        let big = |b: &Blob| b.area >= p.min_blob_area;
        let dark_bar = |b: &Blob| {
            b.short_side() >= p.bar_min_short_side && b.mean_transmission() < p.bar_max_transmission
        };
        let handle_like = |b: &Blob| {
            big(b) && b.long_side() >= p.handle_min_length && b.elongation() >= p.handle_min_elongation
        };

        // A dense metal head joined to a long intermediate-Z shaft.
        let mut handles: BTreeMap<u32, Vec<&Blob>> = BTreeMap::new();
        for (m, g) in adjacent_pairs(width, height, &metal, &mid) {
            let (head, handle) = (&metal.blobs[&m], &mid.blobs[&g]);
            if dark_bar(head) && handle_like(handle) {
                handles.entry(m).or_default().push(handle);
            }
        }

        let mut found: Vec<(ClassId, Blob)> = Vec::new();
        for (label, blob) in metal.blobs.iter().filter(|(_, b)| big(b)) {
            let class_blob = if let Some(hs) = handles.get(label) {
                Some((ClassId::Blunts, hs.iter().fold(blob.clone(), |acc, h| acc.union(h))))
            } else if (blob.fill() < p.l_profile_max_fill
                && blob.elongation() < p.l_profile_max_elongation)
                || dark_bar(blob)
            {
                Some((ClassId::Firearms, blob.clone()))
            } else if blob.elongation() >= p.sharp_min_elongation {
                Some((ClassId::Sharps, blob.clone()))
            } else {
                None
            };
            found.extend(class_blob);
        }
        found.extend(
            liquid
                .blobs
                .values()
                .filter(|b| big(b) && b.fill() >= p.liquid_min_fill)
                .map(|b| (ClassId::Lags, b.clone())),
        );

        let dets = found
            .iter()
            .map(|(class_id, blob)| {
                Detection::new(
                    blob.bbox(),
                    *class_id,
                    self.score(*class_id, blob, &pixels, width),
                    view,
                    scan_id.clone(),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(nms(&dets, p.nms_iou))
    }
}

impl Detector for BaselineDetector {
    fn name(&self) -> &str {
        "baseline"
    }

    fn detect(&self, scan: &ScanAnnotation, image: Option<&RgbImage>) -> Result<Vec<Detection>> {
        let image = image.ok_or_else(|| {
            Error::ContractViolation(format!("no image supplied for {} {}", scan.scan_id, scan.view))
        })?;
        self.detect_image(image, &scan.scan_id, scan.view)
    }
}

/// Replays detections exported by another model.
#[derive(Debug, Clone, Default)]
pub struct RecordedDetector {
    by_image: BTreeMap<(ScanId, View), Vec<Detection>>,
}

impl RecordedDetector {
    pub fn new(dets: impl IntoIterator<Item = Detection>) -> Self {
        let mut by_image: BTreeMap<(ScanId, View), Vec<Detection>> = BTreeMap::new();
        for d in dets {
            by_image.entry((d.scan_id.clone(), d.view)).or_default().push(d);
        }
        RecordedDetector { by_image }
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Ok(Self::new(load_detections(path)?))
    }
}

impl Detector for RecordedDetector {
    fn name(&self) -> &str {
        "recorded"
    }

    fn needs_image(&self) -> bool {
        false
    }

    fn detect(&self, scan: &ScanAnnotation, _image: Option<&RgbImage>) -> Result<Vec<Detection>> {
        Ok(self
            .by_image
            .get(&(scan.scan_id.clone(), scan.view))
            .cloned()
            .unwrap_or_default())
    }
}
