//! Lifting 2D pixel locations into camera-frame 3D points.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::scene::{is_valid_depth, DepthSource, Detection, JointName, Point, PoseSet};

/// Half-widths of the square windows tried when the exact pixel is a hole.
const HOLE_WINDOWS: [usize; 3] = [2, 4, 6];

/// Fraction of the box extent (per axis) sampled around a detection centroid.
const CENTRAL_FRACTION: f64 = 0.2;

/// Median of a non-empty slice; even counts average the middle pair.
pub(crate) fn median(values: &mut [f64]) -> f64 {
    debug_assert!(!values.is_empty());
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Inclusive pixel rectangle.
#[derive(Debug, Clone, Copy)]
struct PixelRect {
    i0: usize,
    i1: usize,
    j0: usize,
    j1: usize,
}

impl PixelRect {
    fn around(i: usize, j: usize, r: usize, width: usize, height: usize) -> Self {
        Self {
            i0: i.saturating_sub(r),
            i1: (i + r).min(width - 1),
            j0: j.saturating_sub(r),
            j1: (j + r).min(height - 1),
        }
    }
}

/// Robust value over a set of pixels: median depth, or componentwise median
/// point for point maps. `None` when no pixel in the set is valid.
enum Robust {
    Depth(f64),
    Point(Point),
}

fn robust_over(depth: &DepthSource, rect: PixelRect) -> Option<Robust> {
    match depth {
        DepthSource::DepthMap { width, data, .. } => {
            let mut zs: Vec<f64> = (rect.j0..=rect.j1)
                .flat_map(|j| (rect.i0..=rect.i1).map(move |i| data[j * width + i]))
                .filter(|&z| is_valid_depth(z))
                .map(f64::from)
                .collect();
            (!zs.is_empty()).then(|| Robust::Depth(median(&mut zs)))
        }
        DepthSource::PointMap { width, data, .. } => {
            let pts: Vec<[f32; 3]> = (rect.j0..=rect.j1)
                .flat_map(|j| (rect.i0..=rect.i1).map(move |i| data[j * width + i]))
                .filter(valid_point)
                .collect();
            if pts.is_empty() {
                return None;
            }
            let axis = |k: usize| {
                let mut vals: Vec<f64> = pts.iter().map(|p| f64::from(p[k])).collect();
                median(&mut vals)
            };
            Some(Robust::Point(Point::new(axis(0), axis(1), axis(2))))
        }
    }
}

fn valid_point(p: &[f32; 3]) -> bool {
    p.iter().all(|c| c.is_finite()) && p[2] > 0.0
}

fn finish(depth: &DepthSource, u: f64, v: f64, value: Robust) -> Point {
    match (depth, value) {
        (DepthSource::DepthMap { intrinsics, .. }, Robust::Depth(z)) => {
            intrinsics.back_project(u, v, z)
        }
        (_, Robust::Point(p)) => p,
        (DepthSource::PointMap { .. }, Robust::Depth(_)) => unreachable!("point maps yield points"),
    }
}

/// Samples pixel `(i, j)`, falling back to windowed medians over holes.
fn sample_with_fill(depth: &DepthSource, i: usize, j: usize) -> Option<Robust> {
    let (w, h) = (depth.width(), depth.height());
    robust_over(depth, PixelRect::around(i, j, 0, w, h)).or_else(|| {
        HOLE_WINDOWS
            .iter()
            .find_map(|&r| robust_over(depth, PixelRect::around(i, j, r, w, h)))
    })
}

fn pixel_index(depth: &DepthSource, u: f64, v: f64) -> Result<(usize, usize)> {
    let (w, h) = (depth.width(), depth.height());
    if !(u.is_finite() && v.is_finite()) || u < 0.0 || v < 0.0 || u >= w as f64 || v >= h as f64 {
        return Err(Error::OutOfBounds {
            u,
            v,
            width: w,
            height: h,
        });
    }
    Ok((u as usize, v as usize))
}

/// Lifts image location `(u, v)` to a camera-frame point.
///
/// Depth maps back-project `(u, v)` through the intrinsics at the depth of
/// the containing pixel; point maps return the stored point. Holes are
/// filled from the median of valid pixels in 5x5, 9x9 then 13x13 windows.
/// Returns `Ok(None)` when no valid depth is found.
pub fn lift_pixel(depth: &DepthSource, u: f64, v: f64) -> Result<Option<Point>> {
    let (i, j) = pixel_index(depth, u, v)?;
    Ok(sample_with_fill(depth, i, j).map(|r| finish(depth, u, v, r)))
}

/// Lifts a detection's box centroid using the median over the central
/// 20% x 20% of the box (at least 3x3 pixels around the centroid).
///
/// No hole filling is done outside that region.
pub fn lift_detection(depth: &DepthSource, det: &Detection) -> Result<Option<Point>> {
    let (cu, cv) = det.bbox.centroid();
    let (ci, cj) = pixel_index(depth, cu, cv)?;
    let (w, h) = (depth.width(), depth.height());

    // Pixels whose centers fall within the central band, widened to +-1
    // pixel around the centroid pixel.
    let band = |c: f64, extent: f64, center_px: usize, limit: usize| {
        let half = 0.5 * CENTRAL_FRACTION * extent;
        let lo = (c - half - 0.5).ceil().max(0.0) as usize;
        let hi = (c + half - 0.5).floor().max(0.0) as usize;
        let lo = lo.min(center_px.saturating_sub(1));
        let hi = hi.max(center_px + 1).min(limit - 1);
        (lo, hi)
    };
    let (i0, i1) = band(cu, det.bbox.width(), ci, w);
    let (j0, j1) = band(cv, det.bbox.height(), cj, h);
    let rect = PixelRect { i0, i1, j0, j1 };
    Ok(robust_over(depth, rect).map(|r| finish(depth, cu, cv, r)))
}

/// Lifts every landmark of `pose`. Off-frame landmarks sample the nearest
/// in-frame pixel; geometry still uses their true pixel location.
pub fn lift_pose(depth: &DepthSource, pose: &PoseSet) -> BTreeMap<JointName, Option<Point>> {
    let (w, h) = (depth.width() as f64, depth.height() as f64);
    pose.iter()
        .map(|lm| {
            let su = lm.u.clamp(0.0, w - 1.0);
            let sv = lm.v.clamp(0.0, h - 1.0);
            let lifted = pixel_index(depth, su, sv)
                .ok()
                .and_then(|(i, j)| sample_with_fill(depth, i, j))
                .map(|r| finish(depth, lm.u, lm.v, r));
            (lm.name, lifted)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{BoundingBox, Intrinsics, Landmark};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const K: Intrinsics = Intrinsics {
        fx: 100.0,
        fy: 100.0,
        cx: 50.0,
        cy: 50.0,
    };

    fn depth_map(width: usize, height: usize, fill: f32) -> DepthSource {
        DepthSource::DepthMap {
            width,
            height,
            intrinsics: K,
            data: vec![fill; width * height],
        }
    }

    fn set(depth: &mut DepthSource, i: usize, j: usize, z: f32) {
        if let DepthSource::DepthMap { width, data, .. } = depth {
            data[j * *width + i] = z;
        }
    }

    fn det(b: [f64; 4]) -> Detection {
        Detection {
            id: 1,
            label: "bottle".into(),
            confidence: 0.9,
            bbox: BoundingBox::new(b[0], b[1], b[2], b[3]),
        }
    }

    #[test]
    fn principal_point_maps_to_optical_axis() {
        let d = depth_map(200, 100, 2.0);
        let p = lift_pixel(&d, 50.0, 50.0).unwrap().unwrap();
        assert_eq!(p, Point::new(0.0, 0.0, 2.0));
    }

    #[test]
    fn pinhole_offset() {
        // (150 - 50) * 2 / 100 = 2
        let d = depth_map(200, 100, 2.0);
        let p = lift_pixel(&d, 150.0, 50.0).unwrap().unwrap();
        assert_relative_eq!(p.x, 2.0, epsilon = 1e-12);
        assert_eq!(p.y, 0.0);
        assert_eq!(p.z, 2.0);
    }

    #[test]
    fn all_invalid_is_absent_not_error() {
        let d = depth_map(4, 4, f32::NAN);
        for (u, v) in [(0.0, 0.0), (3.5, 2.0), (1.2, 3.9)] {
            assert_eq!(lift_pixel(&d, u, v).unwrap(), None);
        }
        let d = depth_map(4, 4, 0.0);
        assert_eq!(lift_pixel(&d, 2.0, 2.0).unwrap(), None);
    }

    #[test]
    fn out_of_bounds_is_error() {
        let d = depth_map(4, 4, 1.0);
        assert!(matches!(
            lift_pixel(&d, 4.0, 0.0),
            Err(Error::OutOfBounds { .. })
        ));
        assert!(matches!(
            lift_pixel(&d, -0.1, 0.0),
            Err(Error::OutOfBounds { .. })
        ));
        assert!(matches!(
            lift_pixel(&d, f64::NAN, 0.0),
            Err(Error::OutOfBounds { .. })
        ));
    }

    #[test]
    fn hole_filled_from_5x5_median() {
        // Hole at (10, 10); 5x5 window holds 24 valid values: 12 at 1.0, 12 at 2.0
        // -> even count, middle pair (1.0, 2.0) -> 1.5.
        let mut d = depth_map(30, 30, f32::NAN);
        let mut k = 0;
        for j in 8..=12 {
            for i in 8..=12 {
                if (i, j) == (10, 10) {
                    continue;
                }
                set(&mut d, i, j, if k % 2 == 0 { 1.0 } else { 2.0 });
                k += 1;
            }
        }
        let p = lift_pixel(&d, 10.3, 10.7).unwrap().unwrap();
        assert_eq!(p.z, 1.5);
    }

    #[test]
    fn hole_fill_escalates_to_13x13() {
        let mut d = depth_map(40, 40, -1.0);
        set(&mut d, 26, 20, 3.0); // 6 pixels away: outside 9x9, inside 13x13
        let p = lift_pixel(&d, 20.0, 20.0).unwrap().unwrap();
        assert_eq!(p.z, 3.0);
        set(&mut d, 26, 20, -1.0);
        set(&mut d, 27, 20, 3.0); // 7 away: beyond every window
        assert_eq!(lift_pixel(&d, 20.0, 20.0).unwrap(), None);
    }

    #[test]
    fn detection_on_constant_field() {
        let d = depth_map(100, 100, 2.0);
        let p = lift_detection(&d, &det([40.0, 40.0, 60.0, 60.0]))
            .unwrap()
            .unwrap();
        assert_eq!(p, Point::new(0.0, 0.0, 2.0));
    }

    #[test]
    fn detection_uses_region_median() {
        // Central region of [40,60]^2 is pixels 48..=51 per axis; keep 9 of them
        // valid: seven at 2.0 and two outliers at 9.0. Sorted median -> 2.0.
        let mut d = depth_map(100, 100, f32::NAN);
        let cells = [
            (48, 48),
            (49, 48),
            (50, 48),
            (48, 49),
            (49, 49),
            (50, 49),
            (48, 50),
        ];
        for (i, j) in cells {
            set(&mut d, i, j, 2.0);
        }
        set(&mut d, 51, 51, 9.0);
        set(&mut d, 50, 50, 9.0);
        let p = lift_detection(&d, &det([40.0, 40.0, 60.0, 60.0]))
            .unwrap()
            .unwrap();
        assert_eq!(p.z, 2.0);
        assert_eq!((p.x, p.y), (0.0, 0.0));
    }

    #[test]
    fn detection_with_invalid_center_is_absent() {
        let mut d = depth_map(100, 100, 2.0);
        for j in 45..=55 {
            for i in 45..=55 {
                set(&mut d, i, j, 0.0);
            }
        }
        let det = det([40.0, 40.0, 60.0, 60.0]);
        assert_eq!(lift_detection(&d, &det).unwrap(), None);
        // the corners themselves still lift
        assert!(lift_pixel(&d, 40.0, 40.0).unwrap().is_some());
    }

    #[test]
    fn tiny_box_still_samples_3x3() {
        let mut d = depth_map(100, 100, 5.0);
        for j in 19..=21 {
            for i in 19..=21 {
                set(&mut d, i, j, 1.0);
            }
        }
        let p = lift_detection(&d, &det([20.0, 20.0, 21.0, 21.0]))
            .unwrap()
            .unwrap();
        assert_eq!(p.z, 1.0);
    }

    fn pose(wrist: (f64, f64)) -> PoseSet {
        PoseSet::new(JointName::REQUIRED.iter().map(|&name| {
            let (u, v) = if name == JointName::RightWrist {
                wrist
            } else {
                (30.0, 30.0)
            };
            Landmark {
                name,
                u,
                v,
                visibility: 1.0,
            }
        }))
        .unwrap()
    }

    #[test]
    fn pose_on_constant_depth_scales_pixels() {
        let d = depth_map(100, 100, 2.0);
        let lifted = lift_pose(&d, &pose((70.0, 10.0)));
        let w = lifted[&JointName::RightWrist].unwrap();
        assert_relative_eq!(w.x, (70.0 - 50.0) * 2.0 / 100.0);
        assert_relative_eq!(w.y, (10.0 - 50.0) * 2.0 / 100.0);
        assert!(lifted.values().all(|p| p.unwrap().z == 2.0));
    }

    #[test]
    fn pose_wrist_in_hole_uses_neighborhood() {
        let mut d = depth_map(100, 100, 1.5);
        set(&mut d, 70, 10, f32::NAN);
        let lifted = lift_pose(&d, &pose((70.2, 10.2)));
        assert_eq!(lifted[&JointName::RightWrist].unwrap().z, 1.5);
    }

    #[test]
    fn off_frame_wrist_clamps_for_sampling() {
        let mut d = depth_map(100, 100, 3.0);
        set(&mut d, 99, 0, 1.25);
        let lifted = lift_pose(&d, &pose((110.0, -8.0)));
        let w = lifted[&JointName::RightWrist].unwrap();
        assert_eq!(w.z, 1.25);
        assert_relative_eq!(w.x, (110.0 - 50.0) * 1.25 / 100.0);
    }

    #[test]
    fn point_map_matches_depth_map_at_pixel_centers() {
        let mut d = depth_map(20, 10, 2.0);
        set(&mut d, 3, 4, 2.5);
        set(&mut d, 7, 7, f32::NAN);
        let pm = d.to_point_map();
        for j in 0..10 {
            for i in 0..20 {
                let (u, v) = (i as f64 + 0.5, j as f64 + 0.5);
                let a = lift_pixel(&d, u, v).unwrap().unwrap();
                let b = lift_pixel(&pm, u, v).unwrap().unwrap();
                assert!((a - b).norm() <= 1e-6 * a.coords.norm(), "{a} vs {b}");
            }
        }
    }

    proptest! {
        #[test]
        fn depth_scaling_scales_lift(k in 0.1f32..10.0, u in 0.0f64..20.0, v in 0.0f64..10.0) {
            let base: Vec<f32> = (0..200).map(|i| 1.0 + (i % 7) as f32 * 0.3).collect();
            let d1 = DepthSource::DepthMap { width: 20, height: 10, intrinsics: K, data: base.clone() };
            let d2 = DepthSource::DepthMap {
                width: 20, height: 10, intrinsics: K,
                data: base.iter().map(|z| z * k).collect(),
            };
            let a = lift_pixel(&d1, u, v).unwrap().unwrap();
            let b = lift_pixel(&d2, u, v).unwrap().unwrap();
            let scaled = a * f64::from(k);
            prop_assert!((b - scaled).norm() <= 1e-6 * scaled.coords.norm());
        }
    }
}
