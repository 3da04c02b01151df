//! Forward warping of an RGB-D view into a displaced camera.

use super::image::{DepthImage, RgbImage, VoidMask};
use super::render::CameraMount;
use crate::error::{Error, Result};
use crate::geometry::{backproject, inverse, project, CameraIntrinsics, Point3D, Pose2D};

/// Re-render `rgb` as seen from a body displaced by `offset` (its pose in the
/// source body frame). Every valid source pixel is backprojected, moved into
/// the displaced camera and splatted onto the nearest destination pixel;
/// the nearest surface wins. Destination pixels nobody lands on are void.
pub fn warp_view(
    rgb: &RgbImage,
    depth: &DepthImage,
    offset: &Pose2D,
    k: &CameraIntrinsics,
    mount: &CameraMount,
) -> Result<(RgbImage, VoidMask)> {
    k.validate()?;
    let dims = (k.width, k.height);
    for got in [(rgb.width, rgb.height), (depth.width, depth.height)] {
        if got != dims {
            return Err(Error::Dimensions { got, expected: dims });
        }
    }
    let into_offset = inverse(offset);
    let mut out = RgbImage::new(k.width, k.height);
    let mut zbuf = vec![f64::INFINITY; k.width * k.height];
    for v in 0..k.height {
        for u in 0..k.width {
            let z = depth.get(u, v) as f64;
            let Ok(p) = backproject(u as f64, v as f64, z, k) else {
                continue;
            };
            // Camera (x right, y down, z forward) to body (x right, y forward).
            let (bx, by) = into_offset.transform_point(p.x, p.z + mount.forward);
            let Ok(((pu, pv), pz)) = project(&Point3D::new(bx, p.y, by - mount.forward), k) else {
                continue;
            };
            let (du, dv) = (pu.round(), pv.round());
            if du < 0.0 || dv < 0.0 || du >= k.width as f64 || dv >= k.height as f64 {
                continue;
            }
            let i = dv as usize * k.width + du as usize;
            if pz < zbuf[i] {
                zbuf[i] = pz;
                out.set(du as usize, dv as usize, rgb.get(u, v));
            }
        }
    }
    let mask = VoidMask {
        width: k.width,
        height: k.height,
        data: zbuf.iter().map(|z| z.is_finite()).collect(),
    };
    Ok((out, mask))
}

/// Fraction of valid warped pixels whose largest per-channel difference from
/// `oracle` is at most `tol`.
pub fn agreement(warped: &RgbImage, mask: &VoidMask, oracle: &RgbImage, tol: u8) -> f64 {
    let mut total = 0usize;
    let mut ok = 0usize;
    for i in 0..mask.data.len() {
        if !mask.data[i] {
            continue;
        }
        total += 1;
        let a = &warped.data[3 * i..3 * i + 3];
        let b = &oracle.data[3 * i..3 * i + 3];
        if a.iter().zip(b).all(|(x, y)| x.abs_diff(*y) <= tol) {
            ok += 1;
        }
    }
    if total == 0 {
        0.0
    } else {
        ok as f64 / total as f64
    }
}
