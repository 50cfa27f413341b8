//! Anchor grids, IoU k-means over box dimensions, and coverage statistics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::scalar::{cmp_scalar, Scalar};

/// Iteration cap for [`kmeans_anchors`].
pub const KMEANS_MAX_ITERATIONS: usize = 300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorConfig<T = f64> {
    pub base_size: T,
    pub stride: T,
    pub scales: Vec<T>,
    /// Width over height.
    pub aspect_ratios: Vec<T>,
}

impl<T: Scalar> AnchorConfig<T> {
    /// Conventional two-stage detector defaults for natural images.
    pub fn natural_image() -> Self {
        AnchorConfig {
            base_size: T::lit(256.0),
            stride: T::lit(16.0),
            scales: [0.25, 0.5, 1.0, 2.0].map(T::lit).to_vec(),
            aspect_ratios: [0.5, 1.0, 2.0].map(T::lit).to_vec(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: T| v > T::zero() && v.is_finite();
        if !positive(self.base_size) || !positive(self.stride) {
            return Err(Error::InvalidConfig(
                "anchor base size and stride must be positive".into(),
            ));
        }
        if self.scales.is_empty() || self.aspect_ratios.is_empty() {
            return Err(Error::InvalidConfig(
                "anchor scales and aspect ratios must be non-empty".into(),
            ));
        }
        if !self.scales.iter().chain(&self.aspect_ratios).all(|&v| positive(v)) {
            return Err(Error::InvalidConfig(
                "anchor scales and aspect ratios must be positive".into(),
            ));
        }
        Ok(())
    }

    /// One `(w, h)` per (scale, ratio) pair, scales outermost.
    pub fn dims(&self) -> Vec<BoxDims<T>> {
        let mut out = Vec::with_capacity(self.scales.len() * self.aspect_ratios.len());
        for &scale in &self.scales {
            for &ratio in &self.aspect_ratios {
                let root = ratio.sqrt();
                out.push(BoxDims {
                    w: self.base_size * scale * root,
                    h: self.base_size * scale / root,
                });
            }
        }
        out
    }
}

/// Width and height of a box, position ignored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxDims<T = f64> {
    pub w: T,
    pub h: T,
}

impl<T: Scalar> BoxDims<T> {
    pub fn new(w: T, h: T) -> Result<Self> {
        if w > T::zero() && h > T::zero() && w.is_finite() && h.is_finite() {
            Ok(BoxDims { w, h })
        } else {
            Err(Error::InvalidBox(format!("box dims must be positive, got {w}x{h}")))
        }
    }

    pub fn area(&self) -> T {
        self.w * self.h
    }
}

impl<T: Scalar> From<&BBox<T>> for BoxDims<T> {
    fn from(b: &BBox<T>) -> Self {
        BoxDims { w: b.w(), h: b.h() }
    }
}

/// IoU of two boxes sharing a center.
pub fn centered_iou<T: Scalar>(a: &BoxDims<T>, b: &BoxDims<T>) -> T {
    if a == b {
        return T::one();
    }
    let inter = a.w.min(b.w) * a.h.min(b.h);
    inter / (a.area() + b.area() - inter)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TiledAnchor<T = f64> {
    pub bbox: BBox<T>,
    /// The anchor reaches outside the image; anchors are never clipped.
    pub crosses_border: bool,
}

/// Places every (scale, ratio) anchor at the center of every stride cell.
pub fn tile_anchors<T: Scalar>(
    config: &AnchorConfig<T>,
    image_w: T,
    image_h: T,
) -> Result<Vec<TiledAnchor<T>>> {
    config.validate()?;
    if config.stride > image_w || config.stride > image_h {
        return Err(Error::InvalidConfig(format!(
            "stride {} exceeds image size {}x{}",
            config.stride, image_w, image_h
        )));
    }
    let cols = (image_w / config.stride).floor().to_usize().unwrap_or(0);
    let rows = (image_h / config.stride).floor().to_usize().unwrap_or(0);
    let dims = config.dims();
    let half = T::lit(0.5);

    let mut out = Vec::with_capacity(rows * cols * dims.len());
    for row in 0..rows {
        let cy = (T::from_count(row) + half) * config.stride;
        for col in 0..cols {
            let cx = (T::from_count(col) + half) * config.stride;
            for d in &dims {
                let bbox = BBox::new(cx, cy, d.w, d.h)?;
                let (x0, y0, x1, y1) = bbox.corners();
                let crosses_border =
                    x0 < T::zero() || y0 < T::zero() || x1 > image_w || y1 > image_h;
                out.push(TiledAnchor {
                    bbox,
                    crosses_border,
                });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult<T = f64> {
    /// Sorted by ascending area.
    pub centroids: Vec<BoxDims<T>>,
    /// Mean over all boxes of the best centered IoU to any centroid.
    pub mean_iou: T,
    /// Mean `1 - IoU` to the assigned centroid, after the initial
    /// assignment and after every iteration.
    pub objective_history: Vec<T>,
    pub iterations: usize,
}

fn distance<T: Scalar>(a: &BoxDims<T>, b: &BoxDims<T>) -> T {
    T::one() - centered_iou(a, b)
}

fn nearest<T: Scalar>(point: &BoxDims<T>, centroids: &[BoxDims<T>]) -> (usize, T) {
    let mut best = (0, distance(point, &centroids[0]));
    for (i, c) in centroids.iter().enumerate().skip(1) {
        let d = distance(point, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn objective<T: Scalar>(dims: &[BoxDims<T>], centroids: &[BoxDims<T>], assign: &[usize]) -> T {
    let total: T = dims
        .iter()
        .zip(assign)
        .map(|(p, &c)| distance(p, &centroids[c]))
        .sum();
    total / T::from_count(dims.len())
}

/// k-means++ seeding under the `1 - IoU` distance.
fn seed_centroids<T: Scalar>(dims: &[BoxDims<T>], k: usize, rng: &mut ChaCha8Rng) -> Vec<BoxDims<T>> {
    let mut centroids = vec![dims[rng.gen_range(0..dims.len())]];
    let mut closest: Vec<f64> = dims
        .iter()
        .map(|p| distance(p, &centroids[0]).to_f64_lossy())
        .collect();
    while centroids.len() < k {
        let weights: Vec<f64> = closest.iter().map(|d| d * d).collect();
        let total: f64 = weights.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = weights.iter().rposition(|&w| w > 0.0).unwrap_or(0);
            for (i, w) in weights.iter().enumerate() {
                if *w > 0.0 && target < *w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.gen_range(0..dims.len())
        };
        let c = dims[pick];
        for (d, p) in closest.iter_mut().zip(dims) {
            *d = d.min(distance(p, &c).to_f64_lossy());
        }
        centroids.push(c);
    }
    centroids
}

/// Clusters box dimensions with the `1 - IoU` distance of co-centered boxes.
///
/// Centroids move to the per-cluster mean of `(w, h)` only when that lowers
/// the cluster's total distance, and points only switch clusters when they
/// get strictly closer, so the objective never increases. Empty clusters
/// are re-seeded at the point farthest from its centroid. Stops when the
/// assignment is stable or after [`KMEANS_MAX_ITERATIONS`].
pub fn kmeans_anchors<T: Scalar>(
    dims: &[BoxDims<T>],
    k: usize,
    seed: u64,
) -> Result<KMeansResult<T>> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    if k > dims.len() {
        return Err(Error::InvalidConfig(format!(
            "k = {k} exceeds the number of boxes ({})",
            dims.len()
        )));
    }
    // Minimum improvement that counts as a change; keeps the summed
    // objective monotone under rounding.
    let slack = T::epsilon() * T::lit(1e4);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_centroids(dims, k, &mut rng);
    let mut assign: Vec<usize> = dims.iter().map(|p| nearest(p, &centroids).0).collect();
    let mut history = vec![objective(dims, &centroids, &assign)];
    let mut iterations = 0;

    while iterations < KMEANS_MAX_ITERATIONS {
        iterations += 1;

        let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
        for (i, &c) in assign.iter().enumerate() {
            members[c].push(i);
        }
        for (c, idx) in members.iter().enumerate() {
            if idx.is_empty() {
                continue;
            }
            let n = T::from_count(idx.len());
            let mean = BoxDims {
                w: idx.iter().map(|&i| dims[i].w).sum::<T>() / n,
                h: idx.iter().map(|&i| dims[i].h).sum::<T>() / n,
            };
            let cost = |centroid: &BoxDims<T>| -> T {
                idx.iter().map(|&i| distance(&dims[i], centroid)).sum()
            };
            if cost(&mean) < cost(&centroids[c]) - slack {
                centroids[c] = mean;
            }
        }

        let mut reseeded = false;
        let mut used = vec![false; dims.len()];
        for c in 0..k {
            if !members[c].is_empty() {
                continue;
            }
            let far = (0..dims.len())
                .filter(|&i| !used[i])
                .max_by(|&a, &b| {
                    cmp_scalar(
                        distance(&dims[a], &centroids[assign[a]]),
                        distance(&dims[b], &centroids[assign[b]]),
                    )
                    .then(b.cmp(&a))
                });
            if let Some(i) = far {
                used[i] = true;
                // A point already sitting on its centroid gains nothing from moving.
                reseeded |= distance(&dims[i], &centroids[assign[i]]) > slack;
                centroids[c] = dims[i];
            }
        }

        let mut changed = false;
        for (i, p) in dims.iter().enumerate() {
            let current = distance(p, &centroids[assign[i]]);
            let (best, d) = nearest(p, &centroids);
            if best != assign[i] && d < current - slack {
                assign[i] = best;
                changed = true;
            }
        }
        history.push(objective(dims, &centroids, &assign));
        if !changed && !reseeded {
            break;
        }
    }

    let mean_iou = dims
        .iter()
        .map(|p| T::one() - nearest(p, &centroids).1)
        .sum::<T>()
        / T::from_count(dims.len());
    centroids.sort_by(|a, b| cmp_scalar(a.area(), b.area()).then(cmp_scalar(a.w, b.w)));
    Ok(KMeansResult {
        centroids,
        mean_iou,
        objective_history: history,
        iterations,
    })
}

/// Runs [`kmeans_anchors`] once per seed and keeps the highest mean IoU
/// (first seed wins ties).
pub fn kmeans_best_of<T: Scalar>(
    dims: &[BoxDims<T>],
    k: usize,
    seeds: impl IntoIterator<Item = u64>,
) -> Result<KMeansResult<T>> {
    let mut best: Option<KMeansResult<T>> = None;
    for seed in seeds {
        let run = kmeans_anchors(dims, k, seed)?;
        if best.as_ref().is_none_or(|b| run.mean_iou > b.mean_iou) {
            best = Some(run);
        }
    }
    best.ok_or(Error::EmptyInput("kmeans_best_of needs at least one seed"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Coverage<T = f64> {
    pub mean: T,
    pub min: T,
    pub fraction_above_half: T,
    /// Best centered IoU per input box, in input order.
    pub best: Vec<T>,
}

/// How well a candidate set of anchor shapes covers ground-truth shapes.
pub fn anchor_coverage<T: Scalar>(
    candidates: &[BoxDims<T>],
    dims: &[BoxDims<T>],
) -> Result<Coverage<T>> {
    if candidates.is_empty() || dims.is_empty() {
        return Err(Error::EmptyInput(
            "coverage needs at least one candidate and one box",
        ));
    }
    let best: Vec<T> = dims
        .iter()
        .map(|d| T::one() - nearest(d, candidates).1)
        .collect();
    let n = T::from_count(best.len());
    let half = T::lit(0.5);
    Ok(Coverage {
        mean: best.iter().copied().sum::<T>() / n,
        min: best.iter().copied().fold(T::infinity(), T::min),
        fraction_above_half: T::from_count(best.iter().filter(|&&b| b > half).count()) / n,
        best,
    })
}
