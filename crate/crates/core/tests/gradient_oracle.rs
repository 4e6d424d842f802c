use approx::assert_relative_eq;
use metamorph_core::energy::{deformation_gradient, pair_energy, MaterialParams};
use metamorph_core::fem::FemOperators;
use metamorph_core::{Deformation, Grid, Image, Point, ScalarField, VectorField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random combination of a few low-frequency modes.
fn smooth_scalar(rng: &mut ChaCha8Rng, g: Grid, amplitude: f64) -> ScalarField {
    let modes: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(0.5..3.0), rng.gen_range(0.5..3.0), rng.gen_range(0.0..6.0)))
        .collect();
    ScalarField::from_fn(g, |p| {
        amplitude * modes.iter().map(|&(c, a, b, ph)| c * (a * p.x + b * p.y + ph).sin()).sum::<f64>()
    })
}

fn smooth_field(rng: &mut ChaCha8Rng, g: Grid, amplitude: f64) -> VectorField {
    let x = smooth_scalar(rng, g, amplitude);
    let y = smooth_scalar(rng, g, amplitude);
    VectorField::from_fn(g, |p| Point::new(x.eval(p), y.eval(p)))
}

fn masked(v: VectorField) -> VectorField {
    Deformation::from_displacement_masked(v).into_displacement()
}

fn shifted(phi: &Deformation, v: &VectorField, t: f64) -> Deformation {
    let d: Vec<f64> = phi.displacement().to_flat().iter().zip(v.to_flat()).map(|(a, b)| a + t * b).collect();
    Deformation::from_displacement(VectorField::from_flat(*phi.grid(), &d).unwrap()).unwrap()
}

fn check_model(params: &MaterialParams, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = Grid::new(8, 8).unwrap();
    let ops = FemOperators::new(g);
    let u_prev = Image::gray(smooth_scalar(&mut rng, g, 0.5));
    let u_next = Image::gray(smooth_scalar(&mut rng, g, 0.5));
    let phi = Deformation::from_displacement_masked(smooth_field(&mut rng, g, 0.02));
    let grad = deformation_gradient(&ops, &u_prev, &u_next, &phi, params).unwrap();
    let eps = 1e-6;
    for _ in 0..20 {
        let v = masked(smooth_field(&mut rng, g, 1.0));
        let analytic: f64 = grad.to_flat().iter().zip(v.to_flat()).map(|(a, b)| a * b).sum();
        let plus = pair_energy(&ops, &u_prev, &u_next, &shifted(&phi, &v, eps), params).unwrap().total();
        let minus = pair_energy(&ops, &u_prev, &u_next, &shifted(&phi, &v, -eps), params).unwrap().total();
        let fd = (plus - minus) / (2.0 * eps);
        assert_relative_eq!(fd, analytic, max_relative = 1e-5);
    }
}

#[test]
fn ogden_gradient_matches_central_differences() {
    check_model(&MaterialParams::ogden(1.0, 0.5, 1.5, 1.5, 0.5, 1e-5, 1e-2).unwrap(), 11);
}

#[test]
fn simplified_gradient_matches_central_differences() {
    check_model(&MaterialParams::simplified(1e-3, 1e-2).unwrap(), 12);
}

#[test]
fn higher_order_gradient_matches_central_differences_for_m4() {
    let params = MaterialParams::simplified(1e-2, 1e-1).unwrap().with_order(4).unwrap();
    check_model(&params, 13);
}
