use super::scene::Triangle;
use super::vec3::Vec3;
use crate::error::{Error, Result};
use crate::lsystem::GrowthFunction;

/// Triangulated leaf blade in its local frame.
///
/// The midrib starts at the origin heading along +X and bends toward +Y on
/// a circular arc whose total turn is `curvature_deg`. At arc-length
/// fraction `u` the blade is `width(u)` wide, spanning the direction
/// `cos(twist)·Z + sin(twist)·n(u)`, with `n(u)` the in-plane normal of the
/// midrib: twist 0 gives a ribbon perpendicular to the bending plane, twist
/// 90° a flat blade lying in it. Texture coordinates run `u` along the
/// midrib and `v` across the blade with the midvein at `v = 0.5`.
pub fn leaf_blade(
    length: f64,
    width: impl Fn(f64) -> f64,
    curvature_deg: f64,
    twist_deg: f64,
    segments: usize,
) -> Result<Vec<Triangle>> {
    if !(length > 0.0) || !length.is_finite() {
        return Err(Error::invalid(format!("leaf length must be positive, got {length}")));
    }
    if segments < 2 {
        return Err(Error::invalid("a leaf needs at least two segments"));
    }
    let theta = curvature_deg.to_radians();
    let (ct, st) = (twist_deg.to_radians().cos(), twist_deg.to_radians().sin());
    let rows: Vec<(Vec3, Vec3, f64)> = (0..=segments)
        .map(|i| {
            let u = i as f64 / segments as f64;
            let s = u * length;
            let (center, normal) = if theta.abs() < 1e-12 {
                (Vec3::new(s, 0.0, 0.0), Vec3::Y)
            } else {
                let r = length / theta;
                let phi = s / r;
                (
                    Vec3::new(r * phi.sin(), r * (1.0 - phi.cos()), 0.0),
                    Vec3::new(-phi.sin(), phi.cos(), 0.0),
                )
            };
            let w = width(u).max(0.0);
            let w = if w.is_finite() { w } else { 0.0 };
            let across = Vec3::Z * ct + normal * st;
            (center - across * (0.5 * w), center + across * (0.5 * w), u)
        })
        .collect();
    let mut tris = Vec::with_capacity(2 * segments);
    for pair in rows.windows(2) {
        let (a0, a1, u0) = pair[0];
        let (b0, b1, u1) = pair[1];
        tris.push(Triangle {
            v: [a0, b0, b1],
            uv: [[u0, 0.0], [u1, 0.0], [u1, 1.0]],
        });
        tris.push(Triangle {
            v: [a0, b1, a1],
            uv: [[u0, 0.0], [u1, 1.0], [u0, 1.0]],
        });
    }
    Ok(tris)
}

/// Leaf surface whose width at arc-length fraction `u` is `width_fn.at(u)`.
pub fn leaf_surface(length: f64, width_fn: &GrowthFunction, curvature_deg: f64, segments: usize) -> Result<Vec<Triangle>> {
    leaf_blade(length, |u| width_fn.at(u), curvature_deg, 0.0, segments)
}

/// Tip of the midrib for a blade of the given length and curvature.
pub fn midrib_tip(length: f64, curvature_deg: f64) -> Vec3 {
    let theta = curvature_deg.to_radians();
    if theta.abs() < 1e-12 {
        return Vec3::new(length, 0.0, 0.0);
    }
    let r = length / theta;
    Vec3::new(r * theta.sin(), r * (1.0 - theta.cos()), 0.0)
}
