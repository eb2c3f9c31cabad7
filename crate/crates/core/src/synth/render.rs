//! Depth rasterization of a synthetic layout.
//!
//! The scene is a table plane in front of a back wall, a person whose torso
//! is a flat quad and whose arm segments are capsules, and objects drawn as
//! camera-facing rectangles at their center depth. Nearest surface wins.

use super::{Layout, SynthConfig};
use crate::scene::{BoundingBox, Intrinsics, JointName, Point, Side};

const LIMB_RADIUS: f64 = 0.045;
const WALL_BEHIND_PERSON: f64 = 1.0;
const TABLE_HALF_WIDTH: f64 = 1.0;
// torso outline extends past the shoulder and hip joints
const TORSO_PAD: f64 = 0.06;

enum Primitive {
    Rect {
        bbox: BoundingBox,
        z: f64,
    },
    Capsule {
        a: (f64, f64),
        b: (f64, f64),
        za: f64,
        zb: f64,
        radius: f64,
    },
    Quad {
        corners: [(f64, f64); 4],
        z: f64,
    },
}

impl Primitive {
    fn pixel_bounds(&self) -> (f64, f64, f64, f64) {
        match self {
            Primitive::Rect { bbox, .. } => (bbox.x_min, bbox.x_max, bbox.y_min, bbox.y_max),
            Primitive::Capsule { a, b, radius, .. } => (
                a.0.min(b.0) - radius,
                a.0.max(b.0) + radius,
                a.1.min(b.1) - radius,
                a.1.max(b.1) + radius,
            ),
            Primitive::Quad { corners, .. } => corners.iter().fold(
                (
                    f64::INFINITY,
                    f64::NEG_INFINITY,
                    f64::INFINITY,
                    f64::NEG_INFINITY,
                ),
                |(u0, u1, v0, v1), &(u, v)| (u0.min(u), u1.max(u), v0.min(v), v1.max(v)),
            ),
        }
    }

    fn depth_at(&self, u: f64, v: f64) -> Option<f64> {
        match self {
            Primitive::Rect { bbox, z } => {
                (u >= bbox.x_min && u <= bbox.x_max && v >= bbox.y_min && v <= bbox.y_max)
                    .then_some(*z)
            }
            Primitive::Capsule {
                a,
                b,
                za,
                zb,
                radius,
            } => {
                let (dx, dy) = (b.0 - a.0, b.1 - a.1);
                let len2 = dx * dx + dy * dy;
                let t = if len2 > 0.0 {
                    (((u - a.0) * dx + (v - a.1) * dy) / len2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                let (px, py) = (a.0 + t * dx, a.1 + t * dy);
                let dist2 = (u - px).powi(2) + (v - py).powi(2);
                // perspective-correct: inverse depth is linear in screen space
                (dist2 <= radius * radius).then(|| 1.0 / ((1.0 - t) / za + t / zb))
            }
            Primitive::Quad { corners, z } => {
                let mut sign = 0.0;
                for k in 0..4 {
                    let (x0, y0) = corners[k];
                    let (x1, y1) = corners[(k + 1) % 4];
                    let cross = (x1 - x0) * (v - y0) - (y1 - y0) * (u - x0);
                    if cross != 0.0 {
                        if sign != 0.0 && cross.signum() != sign {
                            return None;
                        }
                        sign = cross.signum();
                    }
                }
                Some(*z)
            }
        }
    }
}

/// Projected box of a camera-facing rectangle centered at `center`.
pub(crate) fn object_box(k: &Intrinsics, center: &Point, width: f64, height: f64) -> BoundingBox {
    let (hw, hh) = (0.5 * width, 0.5 * height);
    BoundingBox::new(
        k.fx * (center.x - hw) / center.z + k.cx,
        k.fy * (center.y - hh) / center.z + k.cy,
        k.fx * (center.x + hw) / center.z + k.cx,
        k.fy * (center.y + hh) / center.z + k.cy,
    )
}

fn primitives(config: &SynthConfig, layout: &Layout) -> Vec<Primitive> {
    let k = &config.intrinsics;
    let mut prims = Vec::new();
    let joint = |name| layout.body[&name];
    let px = |p: Point| k.project(&p);

    let torso = [
        JointName::LeftShoulder,
        JointName::RightShoulder,
        JointName::RightHip,
        JointName::LeftHip,
    ];
    let center = torso
        .iter()
        .fold(Point::origin(), |acc, &n| acc + joint(n).coords / 4.0);
    prims.push(Primitive::Quad {
        corners: torso.map(|n| {
            let p = joint(n);
            px(Point::new(
                p.x + TORSO_PAD * (p.x - center.x).signum(),
                p.y + TORSO_PAD * (p.y - center.y).signum(),
                p.z,
            ))
        }),
        z: center.z,
    });

    for side in Side::BOTH {
        let chain = [
            joint(side.shoulder()),
            joint(side.elbow()),
            joint(side.wrist()),
        ];
        for seg in chain.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            prims.push(Primitive::Capsule {
                a: px(a),
                b: px(b),
                za: a.z,
                zb: b.z,
                radius: k.fx * LIMB_RADIUS / a.z.min(b.z),
            });
        }
    }

    for obj in &layout.objects {
        prims.push(Primitive::Rect {
            bbox: object_box(k, &obj.center, obj.width, obj.height),
            z: obj.center.z,
        });
    }
    prims
}

/// Noise-free depth raster of `layout`, row-major, sampled at pixel centers.
pub(crate) fn render_depth(config: &SynthConfig, layout: &Layout) -> Vec<f32> {
    let (w, h) = (config.image_width as usize, config.image_height as usize);
    let k = &config.intrinsics;
    let table_y = config.camera_height - config.table_height;
    let person = &layout.person;
    let wall = person.center.z + WALL_BEHIND_PERSON;

    let mut depth = vec![0.0f64; w * h];
    for j in 0..h {
        let yn = (j as f64 + 0.5 - k.cy) / k.fy;
        for i in 0..w {
            let xn = (i as f64 + 0.5 - k.cx) / k.fx;
            let mut z = wall;
            if yn > 0.0 {
                let zt = table_y / yn;
                if zt >= person.table_near
                    && zt <= person.table_far
                    && (xn * zt - person.center.x).abs() <= TABLE_HALF_WIDTH
                {
                    z = zt;
                }
            }
            depth[j * w + i] = z;
        }
    }

    for prim in primitives(config, layout) {
        let (u0, u1, v0, v1) = prim.pixel_bounds();
        let i0 = (u0 - 0.5).floor().max(0.0) as usize;
        let j0 = (v0 - 0.5).floor().max(0.0) as usize;
        let i1 = ((u1 - 0.5).ceil().max(0.0) as usize).min(w - 1);
        let j1 = ((v1 - 0.5).ceil().max(0.0) as usize).min(h - 1);
        if u1 < 0.0 || v1 < 0.0 {
            continue;
        }
        for j in j0..=j1 {
            for i in i0..=i1 {
                if let Some(z) = prim.depth_at(i as f64 + 0.5, j as f64 + 0.5) {
                    let cell = &mut depth[j * w + i];
                    if z < *cell {
                        *cell = z;
                    }
                }
            }
        }
    }
    depth.into_iter().map(|z| z as f32).collect()
}
