use metamorph_core::fem::FemOperators;
use metamorph_core::image_solve::{assemble_system, solve_images, SolveOptions};
use metamorph_core::linalg::LinearOperator;
use metamorph_core::{Deformation, Grid, Image, Point, ScalarField, VectorField};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_warp(rng: &mut ChaCha8Rng, g: Grid, amplitude: f64) -> Deformation {
    let c: [f64; 4] = core::array::from_fn(|_| rng.gen_range(-1.0..1.0));
    let f = [rng.gen_range(1.0..4.0), rng.gen_range(1.0..4.0)];
    Deformation::from_displacement_masked(VectorField::from_fn(g, |p| {
        Point::new(
            amplitude * (c[0] * (f[0] * p.x).sin() + c[1] * (f[1] * p.y).cos()),
            amplitude * (c[2] * (f[1] * p.x).cos() + c[3] * (f[0] * p.y).sin()),
        )
    }))
}

fn random_image(rng: &mut ChaCha8Rng, g: Grid) -> Image {
    let values = (0..g.num_nodes()).map(|_| rng.gen_range(0.0..1.0)).collect();
    Image::gray(ScalarField::new(g, values).unwrap())
}

#[test]
fn cg_matches_dense_direct_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = Grid::new(4, 4).unwrap();
    let ops = FemOperators::new(g);
    let phis: Vec<Deformation> = (0..3).map(|_| random_warp(&mut rng, g, 0.08)).collect();
    let (a, b) = (random_image(&mut rng, g), random_image(&mut rng, g));
    let sys = assemble_system(&ops, &phis).unwrap();
    let dim = sys.dim();
    let dense = DMatrix::from_row_slice(dim, dim, &sys.to_dense());
    let rhs = DVector::from_vec(sys.rhs(a.channel(0), b.channel(0)));
    let direct = dense.clone().cholesky().expect("system is SPD").solve(&rhs);

    let (images, reports) = solve_images(&sys, &a, &b, None, SolveOptions { tol: 1e-12, max_iter: None }).unwrap();
    assert!(reports[0].residual <= 1e-12);
    let n = g.num_nodes();
    for (blk, im) in images.iter().enumerate() {
        for (i, v) in im.channel(0).values().iter().enumerate() {
            assert!((v - direct[blk * n + i]).abs() < 1e-8);
        }
    }
    let min_eig = dense.symmetric_eigen().eigenvalues.min();
    assert!(min_eig > 0.0, "minimum eigenvalue {min_eig}");
}

#[test]
fn assembled_system_is_exactly_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let g = Grid::new(5, 5).unwrap();
    let ops = FemOperators::new(g);
    let phis: Vec<Deformation> = (0..3).map(|_| random_warp(&mut rng, g, 0.06)).collect();
    let sys = assemble_system(&ops, &phis).unwrap();
    let dim = sys.dim();
    let d = sys.to_dense();
    for i in 0..dim {
        for j in 0..i {
            assert_eq!(d[i * dim + j], d[j * dim + i], "asymmetry at ({i}, {j})");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn identity_warps_obey_the_maximum_principle(
        seed in any::<u64>(),
        k in 2usize..6,
        nx in 3usize..7,
        ny in 3usize..7,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = Grid::new(nx, ny).unwrap();
        let ops = FemOperators::new(g);
        let phis: Vec<Deformation> = (0..k).map(|_| Deformation::identity(g)).collect();
        let (a, b) = (random_image(&mut rng, g), random_image(&mut rng, g));
        let (lo, hi) = a.channel(0).values().iter().chain(b.channel(0).values())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let sys = assemble_system(&ops, &phis).unwrap();
        let (images, _) = solve_images(&sys, &a, &b, None, SolveOptions { tol: 1e-13, max_iter: None }).unwrap();
        for im in &images {
            for &v in im.channel(0).values() {
                prop_assert!(v >= lo - 1e-9 && v <= hi + 1e-9, "{v} outside [{lo}, {hi}]");
            }
        }
    }
}
