//! Parallel-beam projection of a scene into the top and side views.
//!
//! Both images put the conveyor axis along the columns, so an object's
//! column span is the same in the two views. The top view looks down
//! (rows run across the tunnel width); the side view looks across the
//! tunnel (rows run from the roof down to the belt).

use crate::error::{Error, Result};
use crate::geometry::{BBox, ClassId, ObjectId, View};

use super::physics::{Band, Physics};
use super::scene::{Aabb, Axis, SynthScene, SCAN_DEPTH_MM, TUNNEL_HEIGHT_MM, TUNNEL_WIDTH_MM};

/// Ground-truth box of one threat in one view.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewBox {
    pub object_id: ObjectId,
    pub class_id: ClassId,
    pub bbox: BBox,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedView {
    pub view: View,
    pub width: u32,
    pub height: u32,
    pub resolution_mm: f64,
    /// Row-major `I / I0` in the low band.
    pub low: Vec<f64>,
    /// Row-major `I / I0` in the high band.
    pub high: Vec<f64>,
    /// Whether any material lies on the pixel's ray.
    pub material: Vec<bool>,
    pub boxes: Vec<ViewBox>,
}

impl RenderedView {
    pub fn index(&self, x: u32, y: u32) -> usize {
        y as usize * self.width as usize + x as usize
    }
}

/// Pixel layout of one view.
#[derive(Debug, Clone, Copy)]
pub struct ViewGeometry {
    pub view: View,
    /// Ray direction.
    pub along: Axis,
    /// Scene axis mapped to image rows.
    pub row_axis: Axis,
    /// Rows count downward from the top of the tunnel.
    pub flip_rows: bool,
    pub row_extent_mm: f64,
}

impl ViewGeometry {
    pub fn of(view: View) -> Self {
        match view {
            View::Top => ViewGeometry {
                view,
                along: Axis::Y,
                row_axis: Axis::X,
                flip_rows: false,
                row_extent_mm: TUNNEL_WIDTH_MM,
            },
            View::Side => ViewGeometry {
                view,
                along: Axis::X,
                row_axis: Axis::Y,
                flip_rows: true,
                row_extent_mm: TUNNEL_HEIGHT_MM,
            },
        }
    }

    pub fn size(&self, resolution_mm: f64) -> (u32, u32) {
        (
            (SCAN_DEPTH_MM / resolution_mm).ceil() as u32,
            (self.row_extent_mm / resolution_mm).ceil() as u32,
        )
    }

    /// Scene point on the ray through the center of pixel `(col, row)`.
    pub fn ray_point(&self, col: u32, row: u32, resolution_mm: f64) -> [f64; 3] {
        let mut p = [0.0; 3];
        p[Axis::Z.index()] = (f64::from(col) + 0.5) * resolution_mm;
        p[self.row_axis.index()] = self.row_coord(row, resolution_mm);
        p
    }

    fn row_coord(&self, row: u32, resolution_mm: f64) -> f64 {
        let r = (f64::from(row) + 0.5) * resolution_mm;
        if self.flip_rows {
            self.row_extent_mm - r
        } else {
            r
        }
    }

    /// Pixels whose centers fall inside `b`, as `(col0, row0, col1, row1)`
    /// with exclusive ends; `None` when no pixel center is covered.
    pub fn footprint(&self, b: &Aabb, resolution_mm: f64) -> Option<(u32, u32, u32, u32)> {
        let (w, h) = self.size(resolution_mm);
        let (z, r) = (Axis::Z.index(), self.row_axis.index());
        let cols = sampled_range(w, |c| (f64::from(c) + 0.5) * resolution_mm, b.min[z], b.max[z])?;
        let rows = sampled_range(h, |row| self.row_coord(row, resolution_mm), b.min[r], b.max[r])?;
        Some((cols.0, rows.0, cols.1, rows.1))
    }

    /// Pixel rectangle covering the projection of `b`, snapped outward and
    /// clipped to the image.
    pub fn outer_span(&self, b: &Aabb, resolution_mm: f64) -> (u32, u32, u32, u32) {
        let (w, h) = self.size(resolution_mm);
        let (z, r) = (Axis::Z.index(), self.row_axis.index());
        let (r0, r1) = if self.flip_rows {
            (self.row_extent_mm - b.max[r], self.row_extent_mm - b.min[r])
        } else {
            (b.min[r], b.max[r])
        };
        let lo = |v: f64, limit: u32| ((v / resolution_mm).floor().max(0.0) as u32).min(limit);
        let hi = |v: f64, limit: u32| ((v / resolution_mm).ceil().max(0.0) as u32).min(limit);
        (lo(b.min[z], w), lo(r0, h), hi(b.max[z], w), hi(r1, h))
    }
}

/// Index range `[first, last + 1)` of samples with `lo <= coord(i) < hi`.
fn sampled_range(n: u32, coord: impl Fn(u32) -> f64, lo: f64, hi: f64) -> Option<(u32, u32)> {
    let mut inside = (0..n).filter(|&i| (lo..hi).contains(&coord(i)));
    let first = inside.next()?;
    let last = inside.last().unwrap_or(first);
    Some((first, last + 1))
}

pub fn render_view(
    scene: &SynthScene,
    physics: &Physics,
    view: View,
    resolution_mm: f64,
) -> Result<RenderedView> {
    if !(resolution_mm > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "resolution must be positive, got {resolution_mm} mm/px"
        )));
    }
    let geom = ViewGeometry::of(view);
    let (width, height) = geom.size(resolution_mm);
    let n = width as usize * height as usize;
    let mut line_low = vec![0.0; n];
    let mut line_high = vec![0.0; n];
    let mut material = vec![false; n];

    for obj in &scene.objects {
        for part in &obj.parts {
            let mu_low = physics.linear_attenuation(&part.material, Band::Low);
            let mu_high = physics.linear_attenuation(&part.material, Band::High);
            let Some((c0, r0, c1, r1)) = geom.footprint(&part.shape.bounds(), resolution_mm)
            else {
                continue;
            };
            for row in r0..r1 {
                for col in c0..c1 {
                    let t = part
                        .shape
                        .chord(geom.along, geom.ray_point(col, row, resolution_mm));
                    if t > 0.0 {
                        let i = row as usize * width as usize + col as usize;
                        line_low[i] += mu_low * t;
                        line_high[i] += mu_high * t;
                        material[i] = true;
                    }
                }
            }
        }
    }

    let mut boxes = Vec::new();
    for obj in &scene.objects {
        let Some(class_id) = obj.threat_class() else {
            continue;
        };
        // Sub-pixel objects fall back to the outward-snapped extent.
        let bounds = obj.bounds();
        let (c0, r0, c1, r1) = geom
            .footprint(&bounds, resolution_mm)
            .unwrap_or_else(|| geom.outer_span(&bounds, resolution_mm));
        let bbox = BBox::from_corners(f64::from(c0), f64::from(r0), f64::from(c1), f64::from(r1))?;
        boxes.push(ViewBox {
            object_id: obj.id.clone(),
            class_id,
            bbox,
        });
    }

    Ok(RenderedView {
        view,
        width,
        height,
        resolution_mm,
        low: line_low.into_iter().map(|a| (-a).exp()).collect(),
        high: line_high.into_iter().map(|a| (-a).exp()).collect(),
        material,
        boxes,
    })
}

/// Renders the top and side views of `scene`.
pub fn render_views(
    scene: &SynthScene,
    physics: &Physics,
    resolution_mm: f64,
) -> Result<(RenderedView, RenderedView)> {
    Ok((
        render_view(scene, physics, View::Top, resolution_mm)?,
        render_view(scene, physics, View::Side, resolution_mm)?,
    ))
}
