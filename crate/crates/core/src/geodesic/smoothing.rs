use alloc::vec;
use alloc::vec::Vec;

use crate::fem::{Image, ScalarField};

/// Default pre-smoothing variance in domain units: `5/4 h` for color, `5/8 h`
/// for grayscale input.
pub fn default_sigma2(h: f64, color: bool) -> f64 {
    if color {
        1.25 * h
    } else {
        0.625 * h
    }
}

/// Normalized, truncated 1D Gaussian with standard deviation `sigma_px`
/// (pixels), radius `⌈3σ⌉`.
pub fn gaussian_kernel(sigma_px: f64) -> Vec<f64> {
    let radius = libm::ceil(3.0 * sigma_px) as usize;
    let mut k: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let d = i as f64 - radius as f64;
            libm::exp(-d * d / (2.0 * sigma_px * sigma_px))
        })
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

fn convolve_rows(src: &[f64], nx: usize, ny: usize, k: &[f64], transpose: bool) -> Vec<f64> {
    let r = (k.len() / 2) as isize;
    let mut out = vec![0.0; src.len()];
    let (len, lines) = if transpose { (ny, nx) } else { (nx, ny) };
    let at = |line: usize, i: usize| if transpose { i * nx + line } else { line * nx + i };
    for line in 0..lines {
        for i in 0..len {
            let mut s = 0.0;
            for (j, w) in k.iter().enumerate() {
                let src_i = (i as isize + j as isize - r).clamp(0, len as isize - 1) as usize;
                s += w * src[at(line, src_i)];
            }
            out[at(line, i)] = s;
        }
    }
    out
}

/// Separable Gaussian filter per channel with variance `sigma2` in domain
/// units; borders replicate the edge value. `sigma2 = 0` is the identity.
pub fn presmooth(image: &Image, sigma2: f64) -> Image {
    if !(sigma2 > 0.0) {
        return image.clone();
    }
    let grid = *image.grid();
    let sigma_px = libm::sqrt(sigma2) / grid.h();
    let k = gaussian_kernel(sigma_px);
    let channels = image
        .channels()
        .iter()
        .map(|ch| {
            let rows = convolve_rows(ch.values(), grid.nx(), grid.ny(), &k, false);
            let both = convolve_rows(&rows, grid.nx(), grid.ny(), &k, true);
            ScalarField::new(grid, both).expect("convolution keeps values finite")
        })
        .collect();
    Image::new(channels).expect("same grid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::Grid;

    #[test]
    fn constant_is_unchanged() {
        let g = Grid::new(12, 9).unwrap();
        let im = Image::constant(g, 3, 0.4);
        let s = presmooth(&im, default_sigma2(g.h(), true));
        for ch in s.channels() {
            assert!(ch.values().iter().all(|v| (v - 0.4).abs() < 1e-15));
        }
    }

    #[test]
    fn zero_variance_is_identity() {
        let g = Grid::new(5, 5).unwrap();
        let im = Image::gray(ScalarField::from_fn(g, |p| p.x * p.y));
        assert_eq!(presmooth(&im, 0.0), im);
    }

    #[test]
    fn impulse_spreads_to_unit_mass_gaussian() {
        let g = Grid::new(17, 17).unwrap();
        let mut v = vec![0.0; g.num_nodes()];
        v[g.node_index(8, 8)] = 1.0;
        let im = Image::gray(ScalarField::new(g, v).unwrap());
        // σ = 2 px keeps the ±6 px support inside the grid
        let sigma2 = (2.0 * g.h()) * (2.0 * g.h());
        let s = presmooth(&im, sigma2);
        let vals = s.channel(0).values();
        assert!((vals.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let k = gaussian_kernel(2.0);
        let r = k.len() / 2;
        for dy in 0..k.len() {
            for dx in 0..k.len() {
                let got = vals[g.node_index(8 + dx - r, 8 + dy - r)];
                assert!((got - k[dx] * k[dy]).abs() < 1e-15);
            }
        }
        assert_eq!(vals[g.node_index(1, 8)], 0.0);
    }
}
