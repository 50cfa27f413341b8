//! Streaming detection with per-scan timing, and results tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use image::RgbImage;
use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::ScanAnnotation;
use crate::detector::Detector;
use crate::error::{Error, Result};
use crate::geometry::{ClassId, Detection, ScanId, View};
use crate::metrics::{format_significant, mean_ap, PrCurve};
use crate::multiview::{fuse_evaluation, single_view_evaluation, write_mode_csv, EvalMode};
use crate::plot::{plot_pr, PrSeries};

/// Per-scan latency budget in seconds.
pub const DEFAULT_LATENCY_BUDGET: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatencyReport {
    pub scans: usize,
    /// Detector wall time per bag-scan, both views together.
    pub per_scan_seconds: Vec<f64>,
    pub mean_seconds: f64,
    pub median_seconds: f64,
    /// Nearest-rank 95th percentile.
    pub p95_seconds: f64,
    pub budget_seconds: f64,
    pub pass: bool,
}

impl LatencyReport {
    pub fn from_times(per_scan_seconds: Vec<f64>, budget_seconds: f64) -> Self {
        let mut sorted = per_scan_seconds.clone();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let (mean, median, p95) = if n == 0 {
            (0.0, 0.0, 0.0)
        } else {
            let median = if n % 2 == 1 {
                sorted[n / 2]
            } else {
                (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
            };
            let rank = (0.95 * n as f64).ceil() as usize;
            (
                sorted.iter().sum::<f64>() / n as f64,
                median,
                sorted[rank.clamp(1, n) - 1],
            )
        };
        LatencyReport {
            scans: n,
            per_scan_seconds,
            mean_seconds: mean,
            median_seconds: median,
            p95_seconds: p95,
            budget_seconds,
            pass: p95 <= budget_seconds,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanError {
    pub scan_id: ScanId,
    pub view: View,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    /// Detections scoring above the display threshold.
    pub detections: Vec<Detection>,
    pub errors: Vec<ScanError>,
    pub report: LatencyReport,
}

/// Image location of a view: its recorded path relative to `image_dir`,
/// or the conventional file name.
pub fn image_path(anno: &ScanAnnotation, image_dir: &Path) -> PathBuf {
    match &anno.image_path {
        Some(p) if p.is_absolute() => p.clone(),
        Some(p) => image_dir.join(p),
        None => image_dir.join(anno.image_file_name()),
    }
}

pub fn load_image(path: &Path) -> Result<RgbImage> {
    image::open(path)
        .map(|img| img.to_rgb8())
        .map_err(|source| Error::Image {
            path: path.to_owned(),
            source,
        })
}

/// Runs `f` on a pool of `jobs` threads, or on the global pool for `None`.
pub fn with_jobs<R: Send>(jobs: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    match jobs {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidConfig(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

fn check_threshold(display_threshold: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&display_threshold) {
        return Err(Error::InvalidConfig(format!(
            "display threshold {display_threshold} outside [0, 1]"
        )));
    }
    Ok(())
}

/// Runs `detector` over every view, one bag at a time, timing only the
/// detector calls. Views whose image cannot be read are reported in
/// `errors` and skipped.
pub fn run_pipeline(
    annos: &[ScanAnnotation],
    image_dir: &Path,
    detector: &dyn Detector,
    display_threshold: f64,
    budget_seconds: f64,
) -> Result<PipelineOutput> {
    check_threshold(display_threshold)?;
    let mut order: Vec<&ScanAnnotation> = annos.iter().collect();
    order.sort_by(|a, b| (&a.bag_id, &a.scan_id, a.view).cmp(&(&b.bag_id, &b.scan_id, b.view)));

    let mut detections = Vec::new();
    let mut errors = Vec::new();
    let mut times: Vec<f64> = Vec::new();
    for scan in order.chunk_by(|a, b| a.scan_id == b.scan_id) {
        let mut elapsed = None;
        for anno in scan {
            let image = if detector.needs_image() {
                match load_image(&image_path(anno, image_dir)) {
                    Ok(img) => Some(img),
                    Err(e) => {
                        log::warn!("{} {}: {e}", anno.scan_id, anno.view);
                        errors.push(ScanError {
                            scan_id: anno.scan_id.clone(),
                            view: anno.view,
                            message: e.to_string(),
                        });
                        continue;
                    }
                }
            } else {
                None
            };
            let start = Instant::now();
            let found = detector.detect(anno, image.as_ref());
            *elapsed.get_or_insert(0.0) += start.elapsed().as_secs_f64();
            match found {
                Ok(dets) => detections.extend(
                    dets.into_iter()
                        .filter(|d| d.score() > display_threshold),
                ),
                Err(e) => errors.push(ScanError {
                    scan_id: anno.scan_id.clone(),
                    view: anno.view,
                    message: e.to_string(),
                }),
            }
        }
        times.extend(elapsed);
    }
    Ok(PipelineOutput {
        detections,
        errors,
        report: LatencyReport::from_times(times, budget_seconds),
    })
}

/// Runs `detector` over every view in parallel, without timing. Output
/// order follows `annos`, independent of scheduling.
pub fn detect_all(
    annos: &[ScanAnnotation],
    image_dir: &Path,
    detector: &dyn Detector,
    display_threshold: f64,
) -> Result<(Vec<Detection>, Vec<ScanError>)> {
    check_threshold(display_threshold)?;
    let per_view: Vec<Result<Vec<Detection>>> = annos
        .par_iter()
        .map(|anno| {
            let image = if detector.needs_image() {
                Some(load_image(&image_path(anno, image_dir))?)
            } else {
                None
            };
            detector.detect(anno, image.as_ref())
        })
        .collect();
    let mut detections = Vec::new();
    let mut errors = Vec::new();
    for (anno, r) in annos.iter().zip(per_view) {
        match r {
            Ok(dets) => detections.extend(dets.into_iter().filter(|d| d.score() > display_threshold)),
            Err(e) if e.is_io() => errors.push(ScanError {
                scan_id: anno.scan_id.clone(),
                view: anno.view,
                message: e.to_string(),
            }),
            Err(e) => return Err(e),
        }
    }
    Ok((detections, errors))
}

/// Per-class curves of one evaluation mode.
pub type ModeCurves = BTreeMap<ClassId, PrCurve>;

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub modes: Vec<(EvalMode, ModeCurves)>,
    /// Classes without ground truth, left out of every table.
    pub omitted: Vec<ClassId>,
}

/// Scores `dets` against the annotations in each requested mode.
pub fn evaluate(
    annos: &[ScanAnnotation],
    dets: &[Detection],
    modes: &[EvalMode],
    iou_threshold: f64,
) -> Result<Evaluation> {
    if modes.is_empty() {
        return Err(Error::EmptyInput("at least one evaluation mode"));
    }
    let gts = crate::dataset::ground_truth(annos);
    let omitted: Vec<ClassId> = ClassId::ALL
        .into_iter()
        .filter(|c| !gts.iter().any(|g| g.class_id == *c))
        .collect();
    for c in &omitted {
        log::warn!("no ground truth for class {c}; omitted from the results");
    }
    let mut out = Vec::new();
    for &mode in modes {
        let curves = match mode {
            EvalMode::Single => single_view_evaluation(dets, &gts, iou_threshold)?,
            EvalMode::Fused => fuse_evaluation(dets, &gts, iou_threshold)?,
        };
        out.push((mode, curves));
    }
    Ok(Evaluation {
        modes: out,
        omitted,
    })
}

impl Evaluation {
    pub fn classes(&self) -> Vec<ClassId> {
        self.modes
            .first()
            .map(|(_, c)| c.keys().copied().collect())
            .unwrap_or_default()
    }

    pub fn aps(&self, mode: EvalMode) -> Option<BTreeMap<ClassId, f64>> {
        self.modes
            .iter()
            .find(|(m, _)| *m == mode)
            .map(|(_, curves)| curves.iter().map(|(c, curve)| (*c, curve.ap)).collect())
    }

    /// Mean AP of `mode`; `None` when the mode was not evaluated or no
    /// class has ground truth.
    pub fn map(&self, mode: EvalMode) -> Option<f64> {
        self.aps(mode).and_then(|aps| mean_ap(&aps).ok())
    }

    /// Fixed-width table: one row per class, one AP column per mode, and a
    /// closing mAP row.
    pub fn table(&self) -> String {
        let mut s = format!("{:<10}", "Class");
        for (mode, _) in &self.modes {
            let _ = write!(s, " {:>8}", mode.as_str());
        }
        s.push('\n');
        for class_id in self.classes() {
            let _ = write!(s, "{:<10}", class_id.to_string());
            for (_, curves) in &self.modes {
                let _ = write!(s, " {:>8.4}", curves[&class_id].ap);
            }
            s.push('\n');
        }
        let _ = write!(s, "{:<10}", "mAP");
        for (mode, _) in &self.modes {
            match self.map(*mode) {
                Some(m) => {
                    let _ = write!(s, " {m:>8.4}");
                }
                None => {
                    let _ = write!(s, " {:>8}", "-");
                }
            }
        }
        s.push('\n');
        s
    }

    /// The table as CSV with 9 significant digits.
    pub fn table_csv(&self) -> String {
        let mut s = String::from("class");
        for (mode, _) in &self.modes {
            let _ = write!(s, ",{}_ap", mode.as_str());
        }
        s.push('\n');
        for class_id in self.classes() {
            s.push_str(class_id.as_str());
            for (_, curves) in &self.modes {
                let _ = write!(s, ",{}", format_significant(curves[&class_id].ap, 9));
            }
            s.push('\n');
        }
        s.push_str("map");
        for (mode, _) in &self.modes {
            let cell = self.map(*mode).map(|m| format_significant(m, 9)).unwrap_or_default();
            let _ = write!(s, ",{cell}");
        }
        s.push('\n');
        s
    }

    /// Curves of every class and mode, labelled `"<Class> (<mode>)"`.
    pub fn series(&self) -> Vec<PrSeries<'_>> {
        self.classes()
            .into_iter()
            .flat_map(|class_id| {
                self.modes.iter().map(move |(mode, curves)| PrSeries {
                    label: format!("{class_id} ({})", mode.as_str()),
                    curve: &curves[&class_id],
                })
            })
            .collect()
    }

    /// Writes `ap_table.csv`, `ap_table.txt`, one `pr_<class>.csv` per
    /// class, and `pr_curves.svg` into `out_dir`.
    pub fn write_outputs(&self, out_dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
        let mut written = Vec::new();
        let mut put = |name: String, bytes: Vec<u8>| -> Result<()> {
            let path = out_dir.join(name);
            fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
            written.push(path);
            Ok(())
        };
        put("ap_table.txt".into(), self.table().into_bytes())?;
        put("ap_table.csv".into(), self.table_csv().into_bytes())?;
        for class_id in self.classes() {
            let curves: Vec<(EvalMode, &PrCurve)> = self
                .modes
                .iter()
                .map(|(m, c)| (*m, &c[&class_id]))
                .collect();
            let mut buf = Vec::new();
            write_mode_csv(&curves, &mut buf).expect("writing to memory");
            put(format!("pr_{}.csv", class_id.as_str()), buf)?;
        }
        let series = self.series();
        if !series.is_empty() {
            put("pr_curves.svg".into(), plot_pr(&series)?.into_bytes())?;
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn latency_statistics() {
        let times: Vec<f64> = (1..=20).map(|i| f64::from(i) / 100.0).collect();
        let r = LatencyReport::from_times(times, 0.25);
        assert_eq!(r.scans, 20);
        assert!((r.mean_seconds - 0.105).abs() < 1e-12);
        assert!((r.median_seconds - 0.105).abs() < 1e-12);
        assert_eq!(r.p95_seconds, 0.19);
        assert!(r.pass);
        let slow = LatencyReport::from_times(vec![0.3], 0.25);
        assert!(!slow.pass);
    }

    #[test]
    fn empty_report() {
        let r = LatencyReport::from_times(Vec::new(), DEFAULT_LATENCY_BUDGET);
        assert_eq!(r.scans, 0);
        assert!(r.pass);
    }
}
