//! Read-only diagnostics of a computed path: transport paths, accumulated
//! material derivatives and continuous-time frames.

use alloc::format;
use alloc::vec::Vec;

use super::DiscretePath;
use crate::fem::{Deformation, Image, Point, ScalarField};
use crate::{Error, Result};

/// `X_0 = x`, `X_k = Φ_k(X_{k-1})` (clamped onto the domain).
pub fn transport_path(deformations: &[Deformation], x: Point) -> Vec<Point> {
    let mut out = Vec::with_capacity(deformations.len() + 1);
    let mut cur = x;
    out.push(cur);
    for phi in deformations {
        cur = phi.grid().clamp(phi.apply(cur));
        out.push(cur);
    }
    out
}

/// `Z_l = K Σ_{k=1}^{l} (U_k∘Φ_k - U_{k-1})∘X_{k-1}` at every node, per channel.
pub fn accumulated_material_derivative(path: &DiscretePath, l: usize) -> Result<Image> {
    let k_total = path.k();
    if l == 0 || l > k_total {
        return Err(Error::InvalidInput(format!("l must lie in 1..={k_total}, got {l}")));
    }
    let grid = *path.grid();
    let kf = k_total as f64;
    let mut channels = Vec::with_capacity(path.images[0].num_channels());
    for c in 0..path.images[0].num_channels() {
        let values = (0..grid.num_nodes())
            .map(|node| {
                let xs = transport_path(&path.deformations[..l], grid.node_position(node));
                let mut z = 0.0;
                for k in 1..=l {
                    let x = xs[k - 1];
                    let warped = path.images[k].channel(c).eval(path.deformations[k - 1].apply(x));
                    z += warped - path.images[k - 1].channel(c).eval(x);
                }
                kf * z
            })
            .collect();
        channels.push(ScalarField::new(grid, values)?);
    }
    Image::new(channels)
}

/// Spectral norm of a 2×2 matrix.
fn spectral_norm(b: [[f64; 2]; 2]) -> f64 {
    let (p, q, r, s) = (b[0][0], b[0][1], b[1][0], b[1][1]);
    let f2 = p * p + q * q + r * r + s * s;
    let det = p * s - q * r;
    libm::sqrt(0.5 * (f2 + libm::sqrt((f2 * f2 - 4.0 * det * det).max(0.0))))
}

/// `max_x ‖DΦ(x) - 𝟙‖₂`. The displacement gradient is affine in each cell,
/// so the maximum is attained at cell corners.
pub fn displacement_gradient_bound(phi: &Deformation) -> f64 {
    let grid = phi.grid();
    let mut worst = 0.0f64;
    for cell in 0..grid.num_cells() {
        for (xi, eta) in [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)] {
            let j = phi.jacobian_local(cell, xi, eta);
            worst = worst.max(spectral_norm([[j[0][0] - 1.0, j[0][1]], [j[1][0], j[1][1] - 1.0]]));
        }
    }
    worst
}

/// A frame of the continuous-time image curve.
#[derive(Clone, Debug)]
pub struct Frame {
    pub image: Image,
    /// `max_nodes |y_k(t, x) - y|` of the inverted transport map (0 at node times).
    pub max_residual: f64,
    /// Segment used, 1-based; 0 when `t` hit a node time exactly.
    pub segment: usize,
}

/// Evaluates the image curve at `t ∈ [0,1]`.
///
/// Inside segment `k`, nodes `y` are pulled back through
/// `y_k(t, x) = x + (t - t_{k-1}) K (Φ_k(x) - x)` by fixed-point iteration
/// and the result blends `U_{k-1}` and `U_k∘Φ_k` linearly in time. At node
/// times `t = k/K` the stored image `U_k` is returned unchanged.
pub fn time_interpolate(path: &DiscretePath, t: f64, inversion_tol: f64, inversion_maxiter: usize) -> Result<Frame> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidInput(format!("t must lie in [0,1], got {t}")));
    }
    let k_total = path.k();
    let kf = k_total as f64;
    let s = t * kf;
    let nearest = libm::round(s);
    if (s - nearest).abs() <= 1e-12 {
        return Ok(Frame { image: path.images[nearest as usize].clone(), max_residual: 0.0, segment: 0 });
    }
    let seg = (libm::floor(s) as usize + 1).min(k_total);
    let factor = s - (seg - 1) as f64; // (t - t_{k-1}) K ∈ (0, 1)
    let phi = &path.deformations[seg - 1];
    let lip = displacement_gradient_bound(phi);
    if factor * lip >= 1.0 {
        return Err(Error::NonContractive { segment: seg, lipschitz: lip });
    }

    let grid = *path.grid();
    let disp = phi.displacement();
    let (prev, next) = (&path.images[seg - 1], &path.images[seg]);
    let mut max_residual = 0.0f64;
    let mut channels: Vec<Vec<f64>> = (0..prev.num_channels()).map(|_| Vec::with_capacity(grid.num_nodes())).collect();
    for node in 0..grid.num_nodes() {
        let y = grid.node_position(node);
        let mut x = y;
        let mut converged = false;
        for _ in 0..inversion_maxiter {
            let nx = grid.clamp(y - disp.eval(x) * factor);
            let step = (nx - x).norm();
            x = nx;
            if step <= inversion_tol {
                converged = true;
                break;
            }
        }
        let residual = (x + disp.eval(x) * factor - y).norm();
        if !converged && residual > inversion_tol {
            return Err(Error::NonContractive { segment: seg, lipschitz: lip });
        }
        max_residual = max_residual.max(residual);
        let warped = phi.apply(x);
        for (c, out) in channels.iter_mut().enumerate() {
            let a = prev.channel(c).eval(x);
            out.push(a + factor * (next.channel(c).eval(warped) - a));
        }
    }
    let image = Image::new(channels.into_iter().map(|v| ScalarField::new(grid, v)).collect::<Result<Vec<_>>>()?)?;
    Ok(Frame { image, max_residual, segment: seg })
}
