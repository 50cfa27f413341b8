//! Parametric 3-D bag contents inside the scanner tunnel.
//!
//! Coordinates are millimetres: `x` across the tunnel width, `y` up from
//! the belt, `z` along the conveyor.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ClassId, ObjectId};

use super::physics::Material;

pub const TUNNEL_WIDTH_MM: f64 = 640.0;
pub const TUNNEL_HEIGHT_MM: f64 = 430.0;
/// Length of belt imaged per scan.
pub const SCAN_DEPTH_MM: f64 = 640.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X = 0,
    Y = 1,
    Z = 2,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        self as usize
    }

    /// The two axes other than `self`, in ascending order.
    pub fn others(self) -> [Axis; 2] {
        match self {
            Axis::X => [Axis::Y, Axis::Z],
            Axis::Y => [Axis::X, Axis::Z],
            Axis::Z => [Axis::X, Axis::Y],
        }
    }
}

/// Axis-aligned extent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn union(&self, other: &Aabb) -> Aabb {
        let mut out = *self;
        for i in 0..3 {
            out.min[i] = out.min[i].min(other.min[i]);
            out.max[i] = out.max[i].max(other.max[i]);
        }
        out
    }

    pub fn size(&self, axis: Axis) -> f64 {
        self.max[axis.index()] - self.min[axis.index()]
    }

    pub fn translate(&self, offset: [f64; 3]) -> Aabb {
        let mut out = *self;
        for (i, d) in offset.into_iter().enumerate() {
            out.min[i] += d;
            out.max[i] += d;
        }
        out
    }

    pub fn contains(&self, other: &Aabb) -> bool {
        (0..3).all(|i| other.min[i] >= self.min[i] && other.max[i] <= self.max[i])
    }
}

pub fn tunnel() -> Aabb {
    Aabb {
        min: [0.0; 3],
        max: [TUNNEL_WIDTH_MM, TUNNEL_HEIGHT_MM, SCAN_DEPTH_MM],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Shape {
    Cuboid(Aabb),
    Cylinder {
        axis: Axis,
        center: [f64; 3],
        radius: f64,
        half_length: f64,
    },
    Ellipsoid {
        center: [f64; 3],
        radii: [f64; 3],
    },
}

impl Shape {
    pub fn bounds(&self) -> Aabb {
        match *self {
            Shape::Cuboid(b) => b,
            Shape::Cylinder {
                axis,
                center,
                radius,
                half_length,
            } => {
                let mut half = [radius; 3];
                half[axis.index()] = half_length;
                Aabb {
                    min: [0, 1, 2].map(|i| center[i] - half[i]),
                    max: [0, 1, 2].map(|i| center[i] + half[i]),
                }
            }
            Shape::Ellipsoid { center, radii } => Aabb {
                min: [0, 1, 2].map(|i| center[i] - radii[i]),
                max: [0, 1, 2].map(|i| center[i] + radii[i]),
            },
        }
    }

    /// Length of the ray parallel to `along` through `point` inside the
    /// shape. The `along` component of `point` is ignored.
    pub fn chord(&self, along: Axis, point: [f64; 3]) -> f64 {
        let [u, v] = along.others();
        let (ui, vi, ai) = (u.index(), v.index(), along.index());
        match *self {
            Shape::Cuboid(b) => {
                let inside = point[ui] >= b.min[ui]
                    && point[ui] < b.max[ui]
                    && point[vi] >= b.min[vi]
                    && point[vi] < b.max[vi];
                if inside {
                    b.max[ai] - b.min[ai]
                } else {
                    0.0
                }
            }
            Shape::Cylinder {
                axis,
                center,
                radius,
                half_length,
            } => {
                if axis == along {
                    let du = point[ui] - center[ui];
                    let dv = point[vi] - center[vi];
                    if du * du + dv * dv < radius * radius {
                        2.0 * half_length
                    } else {
                        0.0
                    }
                } else {
                    let axial = (point[axis.index()] - center[axis.index()]).abs();
                    // the remaining coordinate measures distance from the axis
                    let side = if u == axis { vi } else { ui };
                    let d = point[side] - center[side];
                    if axial < half_length && d * d < radius * radius {
                        2.0 * (radius * radius - d * d).sqrt()
                    } else {
                        0.0
                    }
                }
            }
            Shape::Ellipsoid { center, radii } => {
                let du = (point[ui] - center[ui]) / radii[ui];
                let dv = (point[vi] - center[vi]) / radii[vi];
                let s = 1.0 - du * du - dv * dv;
                if s > 0.0 {
                    2.0 * radii[ai] * s.sqrt()
                } else {
                    0.0
                }
            }
        }
    }

    pub fn translate(&self, offset: [f64; 3]) -> Shape {
        let shift = |c: [f64; 3]| [0, 1, 2].map(|i| c[i] + offset[i]);
        match *self {
            Shape::Cuboid(b) => Shape::Cuboid(b.translate(offset)),
            Shape::Cylinder {
                axis,
                center,
                radius,
                half_length,
            } => Shape::Cylinder {
                axis,
                center: shift(center),
                radius,
                half_length,
            },
            Shape::Ellipsoid { center, radii } => Shape::Ellipsoid {
                center: shift(center),
                radii,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Part {
    pub shape: Shape,
    pub material: Material,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObjectKind {
    Threat(ClassId),
    Clutter,
}

/// One physical item; its parts must not overlap each other.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthObject {
    pub id: ObjectId,
    pub kind: ObjectKind,
    pub parts: Vec<Part>,
}

impl SynthObject {
    pub fn bounds(&self) -> Aabb {
        let mut parts = self.parts.iter().map(|p| p.shape.bounds());
        let first = parts.next().expect("object has at least one part");
        parts.fold(first, |acc, b| acc.union(&b))
    }

    pub fn threat_class(&self) -> Option<ClassId> {
        match self.kind {
            ObjectKind::Threat(c) => Some(c),
            ObjectKind::Clutter => None,
        }
    }

    pub fn translate(&self, offset: [f64; 3]) -> SynthObject {
        SynthObject {
            parts: self
                .parts
                .iter()
                .map(|p| Part {
                    shape: p.shape.translate(offset),
                    material: p.material,
                })
                .collect(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthScene {
    pub bag: Aabb,
    pub objects: Vec<SynthObject>,
    pub clutter_seed: u64,
}

impl SynthScene {
    pub fn empty() -> Self {
        SynthScene {
            bag: tunnel(),
            objects: Vec::new(),
            clutter_seed: 0,
        }
    }

    /// Every object must sit inside the tunnel and use valid materials.
    pub fn validate(&self) -> Result<()> {
        let t = tunnel();
        for obj in &self.objects {
            if obj.parts.is_empty() {
                return Err(Error::InvalidConfig(format!("object {} has no parts", obj.id)));
            }
            if !t.contains(&obj.bounds()) {
                return Err(Error::InvalidConfig(format!(
                    "object {} leaves the tunnel: {:?}",
                    obj.id,
                    obj.bounds()
                )));
            }
            for p in &obj.parts {
                Material::new(p.material.z, p.material.density)?;
            }
        }
        Ok(())
    }
}

fn uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo..=hi)
}

fn cuboid(min: [f64; 3], max: [f64; 3]) -> Shape {
    Shape::Cuboid(Aabb { min, max })
}

/// Builds a box from extents given along named axes.
fn box_on(axes: [Axis; 3], lo: [f64; 3], hi: [f64; 3]) -> Shape {
    let mut min = [0.0; 3];
    let mut max = [0.0; 3];
    for k in 0..3 {
        min[axes[k].index()] = lo[k];
        max[axes[k].index()] = hi[k];
    }
    cuboid(min, max)
}

/// Threat geometry at the origin; the caller positions it.
pub fn threat_object<R: Rng>(rng: &mut R, class_id: ClassId, id: ObjectId) -> SynthObject {
    let parts = match class_id {
        ClassId::Sharps => {
            // Thin blade lying with its long edge horizontal.
            let long = if rng.gen_bool(0.5) { Axis::X } else { Axis::Z };
            let [mut a, mut b] = long.others();
            if rng.gen_bool(0.5) {
                std::mem::swap(&mut a, &mut b);
            }
            let dims = [
                uniform(rng, 150.0, 250.0),
                uniform(rng, 18.0, 35.0),
                uniform(rng, 2.5, 4.0),
            ];
            vec![Part {
                shape: box_on([long, a, b], [0.0; 3], dims),
                material: Material::STEEL,
            }]
        }
        ClassId::Firearms => {
            // Barrel along `a`, grip along `b`, both `thick` deep along `c`.
            let c = if rng.gen_bool(0.5) { Axis::Y } else { Axis::X };
            let [mut a, mut b] = c.others();
            if rng.gen_bool(0.5) {
                std::mem::swap(&mut a, &mut b);
            }
            let barrel_len = uniform(rng, 150.0, 220.0);
            let barrel_w = uniform(rng, 28.0, 35.0);
            let grip_len = uniform(rng, 80.0, 120.0);
            let grip_w = uniform(rng, 28.0, 35.0);
            let thick = uniform(rng, 25.0, 35.0);
            let grip_at_start = rng.gen_bool(0.5);
            let grip_a = if grip_at_start {
                0.0
            } else {
                barrel_len - grip_w
            };
            vec![
                Part {
                    shape: box_on([a, b, c], [0.0; 3], [barrel_len, barrel_w, thick]),
                    material: Material::STEEL,
                },
                Part {
                    shape: box_on(
                        [a, b, c],
                        [grip_a, barrel_w, 0.0],
                        [grip_a + grip_w, barrel_w + grip_len, thick],
                    ),
                    material: Material::STEEL,
                },
            ]
        }
        ClassId::Blunts => {
            // Metal head along `a` (x or y), handle running along the belt.
            let a = if rng.gen_bool(0.5) { Axis::X } else { Axis::Y };
            let c = if a == Axis::X { Axis::Y } else { Axis::X };
            let head_len = uniform(rng, 80.0, 130.0);
            let head_side = uniform(rng, 25.0, 40.0);
            let handle_len = uniform(rng, 180.0, 300.0);
            let handle_side = uniform(rng, 20.0, head_side - 3.0);
            let off_a = (head_len - handle_side) / 2.0;
            let off_c = (head_side - handle_side) / 2.0;
            vec![
                Part {
                    shape: box_on([a, Axis::Z, c], [0.0; 3], [head_len, head_side, head_side]),
                    material: Material::STEEL,
                },
                Part {
                    shape: box_on(
                        [a, Axis::Z, c],
                        [off_a, head_side, off_c],
                        [off_a + handle_side, head_side + handle_len, off_c + handle_side],
                    ),
                    material: Material { z: 13.0, density: 1.6 },
                },
            ]
        }
        ClassId::Lags => {
            let axis = Axis::ALL[rng.gen_range(0..3)];
            let radius = uniform(rng, 30.0, 45.0);
            let half_length = uniform(rng, 70.0, 120.0);
            let mut center = [radius; 3];
            center[axis.index()] = half_length;
            vec![Part {
                shape: Shape::Cylinder {
                    axis,
                    center,
                    radius,
                    half_length,
                },
                material: Material {
                    z: 7.42,
                    density: uniform(rng, 1.0, 1.1),
                },
            }]
        }
    };
    SynthObject {
        id,
        kind: ObjectKind::Threat(class_id),
        parts,
    }
}

/// Benign item at the origin: mostly light organics, some intermediate-Z
/// items, and the occasional small piece of metal.
pub fn clutter_object<R: Rng>(rng: &mut R, id: ObjectId) -> SynthObject {
    let roll = rng.gen::<f64>();
    let (material, size_range, thin) = if roll < 0.70 {
        (
            Material {
                z: uniform(rng, 6.0, 8.0),
                density: uniform(rng, 0.03, 0.15),
            },
            (30.0, 200.0),
            None,
        )
    } else if roll < 0.95 {
        (
            Material {
                z: uniform(rng, 11.0, 15.0),
                density: uniform(rng, 0.3, 1.0),
            },
            (20.0, 120.0),
            Some((5.0, 30.0)),
        )
    } else {
        (Material::STEEL, (8.0, 40.0), Some((2.0, 6.0)))
    };
    let mut dims = [0.0; 3].map(|_: f64| uniform(rng, size_range.0, size_range.1));
    if let Some((lo, hi)) = thin {
        dims[rng.gen_range(0..3)] = uniform(rng, lo, hi);
    }
    let shape = if rng.gen_bool(0.5) {
        cuboid([0.0; 3], dims)
    } else {
        Shape::Ellipsoid {
            center: dims.map(|d| d / 2.0),
            radii: dims.map(|d| d / 2.0),
        }
    };
    SynthObject {
        id,
        kind: ObjectKind::Clutter,
        parts: vec![Part { shape, material }],
    }
}

/// Moves an origin-anchored object to a random spot inside `region`,
/// falling back to the tunnel when it does not fit.
pub fn place<R: Rng>(rng: &mut R, obj: &SynthObject, region: &Aabb) -> SynthObject {
    let b = obj.bounds();
    let t = tunnel();
    let fits = |r: &Aabb| Axis::ALL.iter().all(|&a| b.size(a) <= r.size(a));
    let target = if fits(region) { *region } else { t };
    let offset = [0, 1, 2].map(|i| {
        let lo = target.min[i] - b.min[i];
        let hi = target.max[i] - b.max[i];
        if hi > lo {
            uniform(rng, lo, hi)
        } else {
            lo
        }
    });
    obj.translate(offset)
}

/// Random bag extent inside the tunnel.
pub fn sample_bag<R: Rng>(rng: &mut R) -> Aabb {
    let size = [
        uniform(rng, 350.0, 600.0),
        uniform(rng, 150.0, 400.0),
        uniform(rng, 400.0, 620.0),
    ];
    let t = tunnel();
    let min = [0, 1, 2].map(|i| {
        if i == 1 {
            0.0 // resting on the belt
        } else {
            uniform(rng, 0.0, t.max[i] - size[i])
        }
    });
    Aabb {
        min,
        max: [0, 1, 2].map(|i| min[i] + size[i]),
    }
}
