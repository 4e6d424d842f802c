use metamorph_core::energy::MaterialParams;
use metamorph_core::geodesic::{
    accumulated_material_derivative, alternate, presmooth, prolongate, time_interpolate, transport_path, warp_midpoint,
    DiscretePath, SolverConfig, Workspace,
};
use metamorph_core::image_solve::{assemble_system, SolveOptions};
use metamorph_core::linalg::LinearOperator;
use metamorph_core::{Deformation, Error, Grid, Image, Point, ScalarField, VectorField};
use nalgebra::{DMatrix, DVector};

fn disk(g: Grid, cx: f64, cy: f64, r: f64) -> Image {
    Image::gray(ScalarField::from_fn(g, |p| if (p.x - cx).powi(2) + (p.y - cy).powi(2) <= r * r { 1.0 } else { 0.0 }))
}

fn swirl(g: Grid, amplitude: f64, phase: f64) -> Deformation {
    Deformation::from_displacement_masked(VectorField::from_fn(g, |p| {
        let bubble = p.x * (1.0 - p.x) * p.y * (1.0 - p.y);
        Point::new(amplitude * bubble * (3.0 * p.y + phase).sin(), amplitude * bubble * (2.0 * p.x - phase).cos())
    }))
}

fn smooth(g: Grid, a: f64, b: f64) -> Image {
    Image::gray(ScalarField::from_fn(g, |p| (a * p.x).sin() * (b * p.y).cos() + 0.3 * p.x * p.y))
}

#[test]
fn alternation_descends_and_ends_on_the_dense_image_solution() {
    let g = Grid::new(11, 11).unwrap();
    let h = g.h();
    let params = MaterialParams::simplified(1e-3, 1e-2).unwrap();
    let mut cfg = SolverConfig::new(params, 1, 0.0);
    cfg.max_sweeps = 6;
    cfg.solve = SolveOptions { tol: 1e-13, max_iter: None };
    let a = presmooth(&disk(g, 0.5 - h, 0.5, 0.25), (1.5 * h).powi(2));
    let b = presmooth(&disk(g, 0.5 + h, 0.5, 0.25), (1.5 * h).powi(2));
    let ws = Workspace::new(g, &cfg.registration).unwrap();
    let mut path = prolongate(&ws, &DiscretePath::endpoints(a.clone(), b.clone()).unwrap(), &cfg).unwrap();
    let report = alternate(&ws, &mut path, &cfg).unwrap();

    let mut before = report.initial.total();
    for s in &report.sweeps {
        assert!(s.after_registration.total() <= before + 1e-10);
        assert!(s.after_solve.total() <= s.after_registration.total() + 1e-10);
        before = s.after_solve.total();
    }
    assert!(before < report.initial.total());

    let sys = assemble_system(&ws.ops, &path.deformations).unwrap();
    let dim = sys.dim();
    let dense = DMatrix::from_row_slice(dim, dim, &sys.to_dense());
    let rhs = DVector::from_vec(sys.rhs(a.channel(0), b.channel(0)));
    let oracle = dense.cholesky().unwrap().solve(&rhs);
    for (v, w) in path.images[1].channel(0).values().iter().zip(oracle.iter()) {
        assert!((v - w).abs() < 1e-8, "{v} vs {w}");
    }
    assert_eq!(path.images[0], a);
    assert_eq!(path.images[2], b);
}

#[test]
fn prolongation_of_a_constant_path_stays_constant() {
    let g = Grid::new(7, 7).unwrap();
    let u = smooth(g, 2.0, 3.0);
    let cfg = SolverConfig::new(MaterialParams::ogden(1.0, 0.5, 1.5, 1.5, 0.5, 1e-5, 1e-2).unwrap(), 2, 0.0);
    let ws = Workspace::new(g, &cfg.registration).unwrap();
    let coarse = DiscretePath::linear_blend(&u, &u, 2).unwrap();
    let fine = prolongate(&ws, &coarse, &cfg).unwrap();
    assert_eq!(fine.images.len(), 5);
    assert!(fine.images.iter().all(|im| *im == u));
    assert!(fine.deformations.iter().all(Deformation::is_identity));
}

#[test]
fn midpoint_warp_matches_pointwise_evaluation() {
    let g = Grid::new(9, 8).unwrap();
    let u = smooth(g, 3.0, 2.0);
    let phi = swirl(g, 0.6, 0.4);
    let out = warp_midpoint(&u, &phi);
    for node in 0..g.num_nodes() {
        let x = g.node_position(node);
        let d = phi.displacement().eval(x);
        let want = u.channel(0).eval(Point::new(x.x + 0.5 * d.x, x.y + 0.5 * d.y));
        assert_eq!(out.channel(0).values()[node], want);
    }
}

#[test]
fn transport_path_composes_the_deformations() {
    let g = Grid::new(9, 9).unwrap();
    let phis = [swirl(g, 0.8, 0.1), swirl(g, -0.5, 1.3), swirl(g, 0.3, 2.0)];
    let x = Point::new(0.37, 0.61);
    let xs = transport_path(&phis, x);
    assert_eq!(xs.len(), 4);
    let mut cur = x;
    for (k, phi) in phis.iter().enumerate() {
        let d = phi.displacement();
        cur = Point::new(cur.x + d.x.eval(cur), cur.y + d.y.eval(cur));
        assert!((xs[k + 1] - cur).norm() < 1e-15);
    }
    let ids = [Deformation::identity(g), Deformation::identity(g)];
    assert!(transport_path(&ids, x).iter().all(|&p| p == x));
}

fn path_with(images: Vec<Image>, deformations: Vec<Deformation>) -> DiscretePath {
    DiscretePath { level: 1, images, deformations }
}

#[test]
fn accumulated_material_derivative_telescopes() {
    let g = Grid::new(8, 9).unwrap();
    let images = vec![smooth(g, 1.0, 2.0), smooth(g, 2.0, 1.5), smooth(g, 3.0, 1.0)];
    let phis = vec![swirl(g, 0.7, 0.2), swirl(g, -0.4, 0.9)];
    let path = path_with(images.clone(), phis.clone());
    let z2 = accumulated_material_derivative(&path, 2).unwrap();
    for node in 0..g.num_nodes() {
        let x0 = g.node_position(node);
        let x1 = phis[0].apply(x0);
        let x2 = phis[1].apply(x1);
        let want = 2.0 * (images[2].channel(0).eval(x2) - images[0].channel(0).eval(x0));
        assert!((z2.channel(0).values()[node] - want).abs() < 1e-12);
    }

    let ids = vec![Deformation::identity(g), Deformation::identity(g)];
    let path = path_with(images.clone(), ids.clone());
    let z1 = accumulated_material_derivative(&path, 1).unwrap();
    for ((z, u1), u0) in z1.channel(0).values().iter().zip(images[1].channel(0).values()).zip(images[0].channel(0).values()) {
        assert!((z - 2.0 * (u1 - u0)).abs() < 1e-12);
    }
    let constant = path_with(vec![images[0].clone(); 3], ids);
    assert!(accumulated_material_derivative(&constant, 2).unwrap().channel(0).values().iter().all(|&v| v == 0.0));
    assert!(accumulated_material_derivative(&constant, 3).is_err());
}

#[test]
fn time_interpolation_contract() {
    let g = Grid::new(10, 10).unwrap();
    let images = vec![smooth(g, 1.0, 2.0), smooth(g, 2.0, 1.5), smooth(g, 3.0, 1.0)];
    let path = path_with(images.clone(), vec![swirl(g, 1.5, 0.3), swirl(g, -1.2, 1.1)]);
    for (k, im) in images.iter().enumerate() {
        let frame = time_interpolate(&path, k as f64 / 2.0, 1e-12, 200).unwrap();
        assert_eq!(&frame.image, im);
    }
    for t in [0.1, 0.25, 0.4, 0.6, 0.77, 0.95] {
        let frame = time_interpolate(&path, t, 1e-12, 200).unwrap();
        assert!(frame.max_residual < 1e-9, "t={t}: residual {}", frame.max_residual);
    }

    let still = path_with(images.clone(), vec![Deformation::identity(g), Deformation::identity(g)]);
    let mid = time_interpolate(&still, 0.25, 1e-12, 200).unwrap();
    for ((v, a), b) in mid.image.channel(0).values().iter().zip(images[0].channel(0).values()).zip(images[1].channel(0).values()) {
        assert!((v - 0.5 * (a + b)).abs() < 1e-15);
    }

    let wild = path_with(images, vec![swirl(g, 40.0, 0.0), Deformation::identity(g)]);
    assert!(matches!(time_interpolate(&wild, 0.45, 1e-12, 200), Err(Error::NonContractive { segment: 1, .. })));
    assert!(time_interpolate(&still, 1.5, 1e-12, 200).is_err());
}
