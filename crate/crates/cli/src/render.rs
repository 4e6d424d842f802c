//! Diagnostic renderings as images with values in `[0,1]`.

use metamorph_core::{Deformation, Image, ScalarField};

/// HSV with `V = 1` to RGB; `hue` in radians.
fn hsv_to_rgb(hue: f64, sat: f64) -> [f64; 3] {
    let h = hue.rem_euclid(std::f64::consts::TAU) / std::f64::consts::FRAC_PI_3;
    let sector = (h.floor() as usize).min(5);
    let f = h - sector as f64;
    let (p, q, t) = (1.0 - sat, 1.0 - sat * f, 1.0 - sat * (1.0 - f));
    match sector {
        0 => [1.0, t, p],
        1 => [q, 1.0, p],
        2 => [p, 1.0, t],
        3 => [p, q, 1.0],
        4 => [t, p, 1.0],
        _ => [1.0, p, q],
    }
}

/// Largest nodal magnitude of `K(Φ_k - 𝟙)` over all `k`.
pub fn max_motion(deformations: &[Deformation]) -> f64 {
    let k = deformations.len() as f64;
    deformations.iter().map(|phi| k * phi.displacement().max_norm()).fold(0.0, f64::max)
}

/// Colour wheel of the motion field `K(Φ - 𝟙)`: hue is the direction,
/// saturation the magnitude relative to `scale`. No motion is white.
pub fn motion_image(phi: &Deformation, k: usize, scale: f64) -> Image {
    let grid = *phi.grid();
    let d = phi.displacement();
    let mut rgb = [vec![0.0; grid.num_nodes()], vec![0.0; grid.num_nodes()], vec![0.0; grid.num_nodes()]];
    for i in 0..grid.num_nodes() {
        let (vx, vy) = (k as f64 * d.x.values()[i], k as f64 * d.y.values()[i]);
        let mag = vx.hypot(vy);
        let sat = if scale > 0.0 { (mag / scale).min(1.0) } else { 0.0 };
        let c = hsv_to_rgb(vy.atan2(vx), sat);
        for ch in 0..3 {
            rgb[ch][i] = c[ch];
        }
    }
    let fields = rgb.into_iter().map(|v| ScalarField::new(grid, v).expect("sizes match")).collect();
    Image::new(fields).expect("three channels on one grid")
}

/// Largest `|Z_l|` over all maps and channels.
pub fn max_abs(images: &[Image]) -> f64 {
    images
        .iter()
        .flat_map(|im| im.channels().iter().flat_map(|c| c.values().iter()))
        .fold(0.0, |m, v| m.max(v.abs()))
}

/// Signed gray map `0.5 + 0.5 z / scale`, so zero is mid gray.
pub fn signed_map(z: &Image, scale: f64) -> Image {
    let mut out = z.clone();
    for ch in out.channels_mut() {
        for v in ch.values_mut() {
            *v = if scale > 0.0 { 0.5 + 0.5 * *v / scale } else { 0.5 };
        }
    }
    out
}
