//! Invariant checks on small synthetic inputs, run by `metamorph validate`.

use metamorph_core::energy::{density, density_derivative, pair_energy, pair_energy_and_gradient, second_derivative_check, MaterialParams};
use metamorph_core::fem::{quad_integrate, FemOperators};
use metamorph_core::geodesic::{time_interpolate, DiscretePath};
use metamorph_core::image_solve::{assemble_system, solve_images, SolveOptions};
use metamorph_core::{Deformation, Grid, Image, Point, Result, ScalarField, VectorField};

use crate::fields::{decode_deformation, encode_deformation};

pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, outcome: Result<(bool, String)>) -> Check {
    match outcome {
        Ok((passed, detail)) => Check { name, passed, detail },
        Err(e) => Check { name, passed: false, detail: e.to_string() },
    }
}

fn bubble(g: Grid, a: f64, phase: f64) -> Deformation {
    Deformation::from_displacement_masked(VectorField::from_fn(g, |p| {
        let w = p.x * (1.0 - p.x) * p.y * (1.0 - p.y);
        Point::new(a * w * (3.0 * p.y + phase).sin(), a * w * (2.0 * p.x - phase).cos())
    }))
}

fn smooth_image(g: Grid, phase: f64) -> Image {
    Image::gray(ScalarField::from_fn(g, |p| 0.5 + 0.4 * (4.0 * p.x + phase).sin() * (3.0 * p.y - phase).cos()))
}

fn ogden_identity() -> Result<(bool, String)> {
    let p = MaterialParams::ogden(1.0, 0.5, 1.5, 1.5, 0.5, 1e-5, 1e-2)?;
    let id = [[1.0, 0.0], [0.0, 1.0]];
    let w = density(&id, &p)?;
    let dw = density_derivative(&id, &p)?;
    let dnorm = dw.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
    let mut worst = 0.0f64;
    for i in 0..4 {
        let t = i as f64;
        let b = [[(1.3 * t).sin(), (0.7 * t + 1.0).cos()], [(2.1 * t).cos(), (0.4 * t - 1.0).sin()]];
        let (fd, exact) = second_derivative_check(&b, &p)?;
        worst = worst.max((fd - exact).abs() / exact.abs());
    }
    Ok((w == 0.0 && dnorm < 1e-10 && worst < 1e-4, format!("W(1)={w:e} |DW(1)|={dnorm:e} rel={worst:e}")))
}

fn quadrature() -> Result<(bool, String)> {
    let g = Grid::new(5, 4)?;
    let (w, hgt) = (g.width(), g.height());
    let f = |p: Point| (1.0 + p.x - 2.0 * p.x.powi(3)) * (0.5 - p.y * p.y + 3.0 * p.y.powi(3));
    let ix = w - w.powi(4) / 2.0 + w * w / 2.0;
    let iy = 0.5 * hgt - hgt.powi(3) / 3.0 + 0.75 * hgt.powi(4);
    let err = (quad_integrate(&g, f) - ix * iy).abs();
    Ok((err < 1e-12, format!("error={err:e}")))
}

fn gradient() -> Result<(bool, String)> {
    let g = Grid::new(6, 6)?;
    let ops = FemOperators::new(g);
    let (a, b) = (smooth_image(g, 0.0), smooth_image(g, 0.4));
    let phi = bubble(g, 0.6, 0.2);
    let mut worst = 0.0f64;
    for params in [MaterialParams::simplified(1e-3, 1e-2)?, MaterialParams::ogden(1.0, 0.5, 1.5, 1.5, 0.5, 1e-5, 1e-2)?] {
        let (_, grad) = pair_energy_and_gradient(&ops, &a, &b, &phi, &params)?;
        for d in 0..4 {
            let dir = bubble(g, 1.0, 1.7 * d as f64);
            let eps = 1e-6;
            let shifted = |s: f64| -> Result<f64> {
                let disp = VectorField::from_flat(
                    g,
                    &phi.displacement().to_flat().iter().zip(dir.displacement().to_flat()).map(|(u, v)| u + s * v).collect::<Vec<_>>(),
                )?;
                Ok(pair_energy(&ops, &a, &b, &Deformation::from_displacement(disp)?, &params)?.total())
            };
            let fd = (shifted(eps)? - shifted(-eps)?) / (2.0 * eps);
            let an: f64 = grad.to_flat().iter().zip(dir.displacement().to_flat()).map(|(x, y)| x * y).sum();
            worst = worst.max((fd - an).abs() / an.abs().max(1e-12));
        }
    }
    Ok((worst < 1e-5, format!("max rel error={worst:e}")))
}

fn image_solve_symmetry() -> Result<(bool, String)> {
    let g = Grid::new(4, 4)?;
    let ops = FemOperators::new(g);
    let warps: Vec<_> = (0..3).map(|k| bubble(g, 0.8, k as f64)).collect();
    let sys = assemble_system(&ops, &warps)?;
    let n = (sys.blocks()) * g.num_nodes();
    let dense = sys.to_dense();
    let mut asym = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            asym = asym.max((dense[i * n + j] - dense[j * n + i]).abs());
        }
    }
    Ok((asym == 0.0, format!("max asymmetry={asym:e}")))
}

fn identity_path() -> Result<(bool, String)> {
    let g = Grid::new(5, 5)?;
    let ops = FemOperators::new(g);
    let ids = vec![Deformation::identity(g); 4];
    let sys = assemble_system(&ops, &ids)?;
    let (a, b) = (Image::constant(g, 1, 0.0), Image::constant(g, 1, 1.0));
    let (images, _) = solve_images(&sys, &a, &b, None, SolveOptions::default())?;
    let err = images
        .iter()
        .enumerate()
        .flat_map(|(k, im)| im.channel(0).values().iter().map(move |v| (v - (k + 1) as f64 / 4.0).abs()))
        .fold(0.0, f64::max);
    Ok((err < 1e-8, format!("max error={err:e}")))
}

fn maximum_principle() -> Result<(bool, String)> {
    let g = Grid::new(6, 5)?;
    let ops = FemOperators::new(g);
    let sys = assemble_system(&ops, &vec![Deformation::identity(g); 4])?;
    let (a, b) = (smooth_image(g, 0.3), smooth_image(g, 2.0));
    let (lo, hi) = {
        let (la, ha) = a.range();
        let (lb, hb) = b.range();
        (la.min(lb), ha.max(hb))
    };
    let (images, _) = solve_images(&sys, &a, &b, None, SolveOptions::default())?;
    let excess = images
        .iter()
        .map(|im| {
            let (l, h) = im.range();
            (lo - l).max(h - hi)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((excess <= 1e-9, format!("max excess={excess:e}")))
}

fn file_round_trip() -> Result<(bool, String)> {
    let phi = bubble(Grid::new(7, 5)?, 0.3, 0.1);
    let bytes = encode_deformation(&phi);
    let same = decode_deformation(&bytes).map(|back| encode_deformation(&back) == bytes).unwrap_or(false);
    Ok((same, format!("{} bytes", bytes.len())))
}

fn interpolation_nodes() -> Result<(bool, String)> {
    let g = Grid::new(6, 6)?;
    let mut path = DiscretePath::linear_blend(&smooth_image(g, 0.0), &smooth_image(g, 1.0), 4)?;
    path.deformations = (0..4).map(|k| bubble(g, 0.3, k as f64)).collect();
    let mut exact = true;
    for k in 0..=4 {
        exact &= time_interpolate(&path, k as f64 / 4.0, 1e-10, 50)?.image == path.images[k];
    }
    let mid = time_interpolate(&path, 0.375, 1e-10, 50)?;
    Ok((exact && mid.max_residual < 1e-9, format!("mid-segment residual={:e}", mid.max_residual)))
}

pub fn run_checks() -> Vec<Check> {
    vec![
        check("ogden density at the identity", ogden_identity()),
        check("simpson quadrature of cubics", quadrature()),
        check("deformation gradient vs finite differences", gradient()),
        check("image-solve matrix symmetry", image_solve_symmetry()),
        check("identity-warp path of constants", identity_path()),
        check("maximum principle at identity warps", maximum_principle()),
        check("deformation file round trip", file_round_trip()),
        check("time interpolation at node times", interpolation_nodes()),
    ]
}
