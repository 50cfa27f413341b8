//! Seeded dataset generation: scene sampling, rendering, and file output.
//!
//! Every bag-scan draws from its own generator seeded from the master seed
//! and its index, so output does not depend on how work is scheduled.

use std::fs;
use std::path::{Path, PathBuf};

use image::{ImageBuffer, LumaA};
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataset::{save_annotations, ScanAnnotation};
use crate::error::{Error, Result};
use crate::geometry::{ClassId, ObjectId, ScanId, View};
use crate::metrics::GroundTruthObject;
use crate::pipeline::with_jobs;

use super::color::false_color;
use super::physics::Physics;
use super::render::{render_views, RenderedView};
use super::scene::{clutter_object, place, sample_bag, threat_object, SynthObject, SynthScene};

pub const ANNOTATIONS_FILE: &str = "annotations.jsonl";

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub n_scans: usize,
    pub seed: u64,
    /// Chance that a bag holds one threat.
    pub threat_prob: f64,
    /// Class probabilities in `ClassId::ALL` order.
    pub threat_mix: [f64; 4],
    pub max_clutter: usize,
    pub resolution_mm: f64,
    /// Consecutive scans sharing one bag's contents in new poses.
    pub scans_per_bag: usize,
    /// Worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            n_scans: 100,
            seed: 0,
            threat_prob: 0.9,
            threat_mix: [0.25; 4],
            max_clutter: 8,
            resolution_mm: 1.0,
            scans_per_bag: 1,
            jobs: None,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_scans == 0 {
            return bad("at least one scan is required".into());
        }
        if !(0.0..=1.0).contains(&self.threat_prob) {
            return bad(format!("threat probability {} outside [0, 1]", self.threat_prob));
        }
        let sum: f64 = self.threat_mix.iter().sum();
        if self.threat_mix.iter().any(|p| !(*p >= 0.0)) || (sum - 1.0).abs() > 1e-6 {
            return bad(format!(
                "threat mix {:?} must be non-negative and sum to 1",
                self.threat_mix
            ));
        }
        if !(self.resolution_mm > 0.0) {
            return bad(format!("resolution {} mm/px must be positive", self.resolution_mm));
        }
        if self.scans_per_bag == 0 {
            return bad("scans per bag must be at least 1".into());
        }
        if self.jobs == Some(0) {
            return bad("job count must be at least 1".into());
        }
        Ok(())
    }
}

/// SplitMix64 finalizer, used to derive independent stream seeds.
fn mix_seed(seed: u64, stream: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0xD1B5_4A32_D192_ED03))
        .wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Scene of one bag-scan with its identifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanScene {
    pub scan_id: ScanId,
    pub bag_id: String,
    pub scene: SynthScene,
}

/// Samples bag-scan `index` without rendering it.
pub fn sample_scene(config: &GeneratorConfig, index: usize) -> Result<ScanScene> {
    config.validate()?;
    let bag_index = index / config.scans_per_bag;
    let mut bag_rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, 1, bag_index as u64));
    let mut pose_rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, 2, index as u64));

    // Bag contents are fixed per bag; each scan re-poses them.
    let bag = sample_bag(&mut bag_rng);
    let mut items: Vec<SynthObject> = Vec::new();
    if bag_rng.gen_bool(config.threat_prob) {
        let mix = WeightedIndex::new(config.threat_mix).expect("validated mix");
        let class_id = ClassId::ALL[mix.sample(&mut bag_rng)];
        items.push(threat_object(&mut bag_rng, class_id, ObjectId("t0".into())));
    }
    let n_clutter = bag_rng.gen_range(0..=config.max_clutter);
    items.extend((0..n_clutter).map(|k| clutter_object(&mut bag_rng, ObjectId(format!("c{k}")))));

    let objects = items.iter().map(|o| place(&mut pose_rng, o, &bag)).collect();
    Ok(ScanScene {
        scan_id: ScanId(format!("scan-{index:05}")),
        bag_id: format!("bag-{bag_index:05}"),
        scene: SynthScene {
            bag,
            objects,
            clutter_seed: mix_seed(config.seed, 3, bag_index as u64),
        },
    })
}

/// Rendered bag-scan ready to be written.
#[derive(Debug, Clone)]
pub struct GeneratedScan {
    pub scan: ScanScene,
    pub top: RenderedView,
    pub side: RenderedView,
}

impl GeneratedScan {
    pub fn views(&self) -> [&RenderedView; 2] {
        [&self.top, &self.side]
    }

    pub fn annotation(&self, view: &RenderedView) -> ScanAnnotation {
        ScanAnnotation {
            scan_id: self.scan.scan_id.clone(),
            bag_id: self.scan.bag_id.clone(),
            view: view.view,
            image_w: view.width,
            image_h: view.height,
            image_path: None,
            objects: view
                .boxes
                .iter()
                .map(|b| GroundTruthObject {
                    bbox: b.bbox,
                    class_id: b.class_id,
                    object_id: b.object_id.clone(),
                    view: view.view,
                    scan_id: self.scan.scan_id.clone(),
                })
                .collect(),
        }
    }
}

pub fn generate_scan(
    config: &GeneratorConfig,
    physics: &Physics,
    index: usize,
) -> Result<GeneratedScan> {
    let scan = sample_scene(config, index)?;
    let (top, side) = render_views(&scan.scene, physics, config.resolution_mm)?;
    Ok(GeneratedScan { scan, top, side })
}

pub fn transmission_file_name(scan_id: &ScanId, view: View) -> String {
    format!("{}_{}_transmission.png", scan_id, view.as_str())
}

/// Both bands of a view as a 16-bit two-channel image: luma holds the low
/// band, alpha the high band, each scaled to `0..=65535`.
pub fn transmission_image(view: &RenderedView) -> ImageBuffer<LumaA<u16>, Vec<u16>> {
    let q = |t: f64| (t.clamp(0.0, 1.0) * 65535.0).round() as u16;
    ImageBuffer::from_fn(view.width, view.height, |x, y| {
        let i = view.index(x, y);
        LumaA([q(view.low[i]), q(view.high[i])])
    })
}

fn save_image<P, C>(image: &ImageBuffer<P, C>, path: &Path) -> Result<()>
where
    P: image::PixelWithColorType,
    [P::Subpixel]: image::EncodableLayout,
    C: std::ops::Deref<Target = [P::Subpixel]>,
{
    image.save(path).map_err(|source| Error::Image {
        path: path.to_owned(),
        source,
    })
}

fn write_scan(scan: &GeneratedScan, physics: &Physics, out_dir: &Path) -> Result<Vec<ScanAnnotation>> {
    scan.views()
        .into_iter()
        .map(|view| {
            let mut anno = scan.annotation(view);
            let name = anno.image_file_name();
            let colored = false_color(view, physics);
            if !colored.inconsistent.is_empty() {
                log::warn!(
                    "{} {}: {} pixels transparent in one band only",
                    anno.scan_id,
                    view.view,
                    colored.inconsistent.len()
                );
            }
            save_image(&colored.image, &out_dir.join(&name))?;
            save_image(
                &transmission_image(view),
                &out_dir.join(transmission_file_name(&anno.scan_id, view.view)),
            )?;
            anno.image_path = Some(PathBuf::from(name));
            Ok(anno)
        })
        .collect()
}

/// Renders `config.n_scans` bag-scans into `out_dir`: one color image and
/// one transmission image per view, plus `annotations.jsonl`.
pub fn generate_dataset(
    config: &GeneratorConfig,
    physics: &Physics,
    out_dir: impl AsRef<Path>,
) -> Result<Vec<ScanAnnotation>> {
    config.validate()?;
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let per_scan: Vec<Result<Vec<ScanAnnotation>>> = with_jobs(config.jobs, || {
        (0..config.n_scans)
            .into_par_iter()
            .map(|i| write_scan(&generate_scan(config, physics, i)?, physics, out_dir))
            .collect()
    })?;
    let mut annos = Vec::with_capacity(2 * config.n_scans);
    for r in per_scan {
        annos.extend(r?);
    }
    save_annotations(&annos, out_dir.join(ANNOTATIONS_FILE))?;
    Ok(annos)
}
