use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::density::Density;
use super::params::{MaterialParams, Model};
use crate::fem::{Deformation, FemOperators, Image, VectorField};
use crate::linalg::dot;
use crate::{Error, Result};

/// Contributions of one segment `W^D[U_{k-1}, U_k, Φ_k]`, without the factor `K`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PairEnergy {
    /// `Σ w W(DΦ)` (plus `2|D|` with the identity offset).
    pub density: f64,
    /// `γ Σ_n ⟨M y_n, y_n⟩`.
    pub higher_order: f64,
    /// `(1/δ) Σ w |U_k∘Φ - U_{k-1}|²`, summed over channels.
    pub matching: f64,
}

impl PairEnergy {
    pub fn total(&self) -> f64 {
        self.density + self.higher_order + self.matching
    }
}

/// Per-segment energies of a path.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PathEnergy {
    pub segments: Vec<PairEnergy>,
}

impl PathEnergy {
    /// Number of segments `K`.
    pub fn k(&self) -> usize {
        self.segments.len()
    }

    /// `Σ_k W^D_k`.
    pub fn unscaled(&self) -> f64 {
        self.segments.iter().map(PairEnergy::total).sum()
    }

    /// `E_K = K Σ_k W^D_k`.
    pub fn total(&self) -> f64 {
        self.k() as f64 * self.unscaled()
    }
}

fn check_images(ops: &FemOperators, u_prev: &Image, u_next: &Image) -> Result<()> {
    if u_prev.num_channels() != u_next.num_channels() {
        return Err(Error::InvalidInput(format!(
            "channel counts differ: {} vs {}",
            u_prev.num_channels(),
            u_next.num_channels()
        )));
    }
    if u_prev.grid() != &ops.grid || u_next.grid() != &ops.grid {
        return Err(Error::InvalidInput("images must share the operator grid".into()));
    }
    Ok(())
}

/// Higher-order term `γ Σ_n ⟨M y_n, y_n⟩`, `y_n = (M_L⁻¹ S)^{m/2} d_n`, on
/// the displacement components `d_n` of `Φ`.
pub fn higher_order_energy(ops: &FemOperators, phi: &Deformation, params: &MaterialParams) -> f64 {
    higher_order(ops, phi, params, None)
}

fn higher_order(ops: &FemOperators, phi: &Deformation, params: &MaterialParams, grad: Option<&mut [f64]>) -> f64 {
    if params.gamma == 0.0 {
        return 0.0;
    }
    let power = params.m / 2;
    let n = ops.grid.num_nodes();
    let d = phi.displacement();
    let mut energy = 0.0;
    let mut grad = grad;
    for (comp, field) in [&d.x, &d.y].into_iter().enumerate() {
        let y = ops.laplace_power(field.values(), power);
        let my = ops.mass.mul_vec(&y);
        energy += dot(&my, &y);
        if let Some(g) = grad.as_deref_mut() {
            let back = ops.laplace_power_transpose(&my, power);
            for (gi, bi) in g[comp * n..(comp + 1) * n].iter_mut().zip(&back) {
                *gi += 2.0 * params.gamma * bi;
            }
        }
    }
    params.gamma * energy
}

/// One registration subproblem with `U_prev` pre-sampled at the quadrature
/// points, for repeated evaluation at varying `Φ`.
#[derive(Clone, Debug)]
pub struct PairProblem<'a> {
    ops: &'a FemOperators,
    u_next: &'a Image,
    params: &'a MaterialParams,
    density: Density,
    weights: Vec<f64>,
    /// `U_prev` per channel at every quadrature point, cell-major.
    prev: Vec<Vec<f64>>,
}

impl<'a> PairProblem<'a> {
    pub fn new(ops: &'a FemOperators, u_prev: &'a Image, u_next: &'a Image, params: &'a MaterialParams) -> Result<Self> {
        check_images(ops, u_prev, u_next)?;
        let density = Density::new(params)?;
        let grid = &ops.grid;
        let points = ops.rule.points();
        let prev = u_prev
            .channels()
            .iter()
            .map(|ch| {
                let mut v = Vec::with_capacity(grid.num_cells() * points.len());
                for cell in 0..grid.num_cells() {
                    for q in 0..points.len() {
                        // located like the warped point so that Φ = 𝟙 compares bit-identical values
                        let here = grid.locate(ops.rule.position(grid, cell, q));
                        v.push(ch.eval_local(here.cell, here.xi, here.eta));
                    }
                }
                v
            })
            .collect();
        let weights = (0..u_prev.num_channels()).map(|c| params.channel_weight(c)).collect();
        Ok(PairProblem { ops, u_next, params, density, weights, prev })
    }

    pub fn energy(&self, phi: &Deformation) -> Result<PairEnergy> {
        self.evaluate(phi, None)
    }

    pub fn energy_and_gradient(&self, phi: &Deformation) -> Result<(PairEnergy, VectorField)> {
        let mut g = vec![0.0; 2 * self.ops.grid.num_nodes()];
        let e = self.evaluate(phi, Some(&mut g))?;
        Ok((e, VectorField::from_flat(self.ops.grid, &g)?))
    }

    fn evaluate(&self, phi: &Deformation, mut grad: Option<&mut [f64]>) -> Result<PairEnergy> {
        let (ops, params, density) = (self.ops, self.params, &self.density);
        let grid = &ops.grid;
        if phi.grid() != grid {
            return Err(Error::InvalidInput("deformation must live on the operator grid".into()));
        }
        let n = grid.num_nodes();
        let inv_h = 1.0 / grid.h();
        let inv_delta = 1.0 / params.delta;
        let points = ops.rule.points();
        let next = self.u_next.channels();

        let h = grid.h();
        let nx = grid.nx();
        let basis = points.map(|qp| crate::fem::grid_basis(qp.xi, qp.eta));
        let dbasis = points.map(|qp| crate::fem::grid_basis_grad(qp.xi, qp.eta));
        let (dx, dy) = (phi.displacement().x.values(), phi.displacement().y.values());

        let mut out = PairEnergy::default();
        for cell in 0..grid.num_cells() {
            let nodes = grid.cell_nodes(cell);
            let origin = grid.cell_origin(cell);
            let vx = nodes.map(|i| dx[i]);
            let vy = nodes.map(|i| dy[i]);
            for (q, qp) in points.iter().enumerate() {
                let (b, db) = (&basis[q], &dbasis[q]);
                let (mut gx, mut gy) = ([0.0; 2], [0.0; 2]);
                for a in 0..4 {
                    gx[0] += db[a][0] * vx[a];
                    gx[1] += db[a][1] * vx[a];
                    gy[0] += db[a][0] * vy[a];
                    gy[1] += db[a][1] * vy[a];
                }
                let jac = [[1.0 + gx[0] * inv_h, gx[1] * inv_h], [gy[0] * inv_h, 1.0 + gy[1] * inv_h]];
                out.density += qp.weight * density.value(&jac);

                let disp_x = b[0] * vx[0] + b[1] * vx[1] + b[2] * vx[2] + b[3] * vx[3];
                let disp_y = b[0] * vy[0] + b[1] * vy[1] + b[2] * vy[2] + b[3] * vy[3];
                let warped = crate::fem::Point::new(origin.x + qp.xi * h + disp_x, origin.y + qp.eta * h + disp_y);
                let (ll, txi, teta) = grid.locate_corner(warped);
                let tb = crate::fem::grid_basis(txi, teta);
                let tdb = crate::fem::grid_basis_grad(txi, teta);
                let corners = [ll, ll + 1, ll + nx, ll + nx + 1];
                let idx = cell * points.len() + q;
                let mut gsum = [0.0; 2];
                for (c, ch) in next.iter().enumerate() {
                    let u = ch.values();
                    let v = corners.map(|i| u[i]);
                    let value = tb[0] * v[0] + tb[1] * v[1] + tb[2] * v[2] + tb[3] * v[3];
                    let diff = value - self.prev[c][idx];
                    out.matching += qp.weight * self.weights[c] * diff * diff;
                    if grad.is_some() {
                        let mut gu = [0.0; 2];
                        for a in 0..4 {
                            gu[0] += tdb[a][0] * v[a];
                            gu[1] += tdb[a][1] * v[a];
                        }
                        gsum[0] += self.weights[c] * diff * (gu[0] * inv_h);
                        gsum[1] += self.weights[c] * diff * (gu[1] * inv_h);
                    }
                }

                if let Some(g) = grad.as_deref_mut() {
                    let p = density.derivative(&jac)?;
                    for a in 0..4 {
                        let (bx, by) = (db[a][0] * inv_h, db[a][1] * inv_h);
                        let i = nodes[a];
                        g[i] += qp.weight * (p[0][0] * bx + p[0][1] * by + 2.0 * inv_delta * gsum[0] * b[a]);
                        g[n + i] += qp.weight * (p[1][0] * bx + p[1][1] * by + 2.0 * inv_delta * gsum[1] * b[a]);
                    }
                }
            }
        }
        out.matching *= inv_delta;
        if params.model == Model::Simplified && params.identity_offset {
            out.density += 2.0 * grid.area();
        }
        out.higher_order = higher_order(ops, phi, params, grad.as_deref_mut());

        if let Some(g) = grad {
            for i in (0..n).filter(|&i| grid.is_boundary(i)) {
                g[i] = 0.0;
                g[n + i] = 0.0;
            }
        }
        Ok(out)
    }
}

/// Pair energy `W^D[U_prev, U_next, Φ]` evaluated with Simpson quadrature.
///
/// An Ogden state with non-positive Jacobian determinant somewhere yields an
/// infinite density term rather than an error.
pub fn pair_energy(
    ops: &FemOperators,
    u_prev: &Image,
    u_next: &Image,
    phi: &Deformation,
    params: &MaterialParams,
) -> Result<PairEnergy> {
    PairProblem::new(ops, u_prev, u_next, params)?.energy(phi)
}

/// Pair energy together with its nodal gradient with respect to `Φ`
/// (boundary rows zero).
pub fn pair_energy_and_gradient(
    ops: &FemOperators,
    u_prev: &Image,
    u_next: &Image,
    phi: &Deformation,
    params: &MaterialParams,
) -> Result<(PairEnergy, VectorField)> {
    PairProblem::new(ops, u_prev, u_next, params)?.energy_and_gradient(phi)
}

/// Nodal representation of `Θ ↦ ∂_Φ W^D[U_prev, U_next, Φ](Θ)`.
pub fn deformation_gradient(
    ops: &FemOperators,
    u_prev: &Image,
    u_next: &Image,
    phi: &Deformation,
    params: &MaterialParams,
) -> Result<VectorField> {
    pair_energy_and_gradient(ops, u_prev, u_next, phi, params).map(|(_, g)| g)
}

/// `E_K = K Σ_k W^D[U_{k-1}, U_k, Φ_k]` with per-segment breakdown.
pub fn path_energy(
    ops: &FemOperators,
    images: &[Image],
    deformations: &[Deformation],
    params: &MaterialParams,
) -> Result<PathEnergy> {
    if images.len() != deformations.len() + 1 || deformations.is_empty() {
        return Err(Error::InvalidInput(format!(
            "a path with {} deformations needs {} images, got {}",
            deformations.len(),
            deformations.len() + 1,
            images.len()
        )));
    }
    let segments = images
        .windows(2)
        .zip(deformations)
        .map(|(pair, phi)| pair_energy(ops, &pair[0], &pair[1], phi, params))
        .collect::<Result<Vec<_>>>()?;
    Ok(PathEnergy { segments })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{Grid, Point, QuadRule, ScalarField};
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ogden() -> MaterialParams {
        MaterialParams::ogden(1.0, 0.5, 1.5, 1.5, 0.5, 1e-5, 1e-2).unwrap()
    }

    fn smooth_image(grid: Grid, a: f64, b: f64) -> Image {
        Image::gray(ScalarField::from_fn(grid, |p| {
            0.5 + 0.4 * libm::sin(a * p.x + 0.3) * libm::cos(b * p.y - 0.2)
        }))
    }

    fn random_warp(grid: Grid, amp: f64, rng: &mut ChaCha8Rng) -> Deformation {
        let c: [f64; 4] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(1.0..3.0), rng.gen_range(1.0..3.0)];
        let (w, h) = (grid.width(), grid.height());
        let d = VectorField::from_fn(grid, |p| {
            let bump = libm::sin(core::f64::consts::PI * p.x / w) * libm::sin(core::f64::consts::PI * p.y / h);
            Point::new(amp * c[0] * bump * libm::cos(c[2] * p.y), amp * c[1] * bump * libm::sin(c[3] * p.x))
        });
        Deformation::from_displacement_masked(d)
    }

    #[test]
    fn zero_energy_at_rest() {
        let g = Grid::new(6, 6).unwrap();
        let ops = FemOperators::new(g);
        let u = smooth_image(g, 3.0, 2.0);
        let e = pair_energy(&ops, &u, &u, &Deformation::identity(g), &ogden()).unwrap();
        assert!(e.density == 0.0 && e.higher_order == 0.0 && e.matching == 0.0);
    }

    #[test]
    fn constant_images_matching_term() {
        let g = Grid::new(5, 4).unwrap();
        let ops = FemOperators::new(g);
        let mut p = ogden();
        p.delta = 0.1;
        let e = pair_energy(&ops, &Image::constant(g, 1, 0.0), &Image::constant(g, 1, 1.0), &Deformation::identity(g), &p)
            .unwrap();
        assert!((e.matching - 10.0 * g.area()).abs() < 1e-12);
    }

    #[test]
    fn matches_brute_force_quadrature() {
        let g = Grid::new(6, 6).unwrap();
        let ops = FemOperators::new(g);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let phi = random_warp(g, 0.05, &mut rng);
        let (u0, u1) = (smooth_image(g, 2.0, 5.0), smooth_image(g, 4.0, 1.0));
        for params in [ogden(), MaterialParams::simplified(1e-3, 1e-2).unwrap()] {
            let e = pair_energy(&ops, &u0, &u1, &phi, &params).unwrap();
            // oracle: global evaluation at physical quadrature points, finite differences for DΦ inside the cell
            let rule = QuadRule::for_grid(&g);
            let w = Density::new(&params).unwrap();
            let (mut dens, mut matching) = (0.0, 0.0);
            for cell in 0..g.num_cells() {
                let o = g.cell_origin(cell);
                for (q, qp) in rule.points().iter().enumerate() {
                    let x = rule.position(&g, cell, q);
                    let y = phi.apply(x);
                    let diff = u1.channel(0).eval(y) - u0.channel(0).eval(x);
                    matching += qp.weight * diff * diff / params.delta;
                    // bilinear displacement: DΦ from nodal differences of the owning cell
                    let nd = g.cell_nodes(cell);
                    let dx = phi.displacement().x.values();
                    let dy = phi.displacement().y.values();
                    let (xi, eta) = ((x.x - o.x) / g.h(), (x.y - o.y) / g.h());
                    let ddx = |v: &[f64]| ((v[nd[1]] - v[nd[0]]) * (1.0 - eta) + (v[nd[3]] - v[nd[2]]) * eta) / g.h();
                    let ddy = |v: &[f64]| ((v[nd[2]] - v[nd[0]]) * (1.0 - xi) + (v[nd[3]] - v[nd[1]]) * xi) / g.h();
                    let a = [[1.0 + ddx(dx), ddy(dx)], [ddx(dy), 1.0 + ddy(dy)]];
                    dens += qp.weight * w.value(&a);
                }
            }
            assert!((e.density - dens).abs() < 1e-12, "{} vs {dens}", e.density);
            assert!((e.matching - matching).abs() < 1e-12);
        }
    }

    #[test]
    fn higher_order_examples() {
        let g = Grid::new(5, 5).unwrap();
        let ops = FemOperators::new(g);
        let p = ogden();
        assert_eq!(higher_order_energy(&ops, &Deformation::identity(g), &p), 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let phi = random_warp(g, 0.1, &mut rng);
        let e = higher_order_energy(&ops, &phi, &p);
        // dense oracle
        let n = g.num_nodes();
        let m = ops.mass.to_dense();
        let s = ops.stiffness.to_dense();
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                l[i * n + j] = s[i * n + j] / ops.lumped[i];
            }
        }
        let matvec = |a: &[f64], v: &[f64]| -> Vec<f64> { (0..n).map(|i| (0..n).map(|j| a[i * n + j] * v[j]).sum()).collect() };
        let mut oracle = 0.0;
        for comp in [&phi.displacement().x, &phi.displacement().y] {
            let y = matvec(&l, &matvec(&l, comp.values()));
            oracle += dot(&matvec(&m, &y), &y);
        }
        oracle *= p.gamma;
        assert!((e - oracle).abs() <= 1e-12 * oracle.abs(), "{e} vs {oracle}");

        let mut p2 = p.clone();
        p2.gamma *= 2.0;
        assert_eq!(higher_order_energy(&ops, &phi, &p2), 2.0 * e);
    }

    #[test]
    fn identity_offset_adds_twice_the_area() {
        let g = Grid::new(5, 7).unwrap();
        let ops = FemOperators::new(g);
        let u = smooth_image(g, 1.0, 1.0);
        let mut p = MaterialParams::simplified(1e-3, 1e-2).unwrap();
        let id = Deformation::identity(g);
        assert_eq!(pair_energy(&ops, &u, &u, &id, &p).unwrap().density, 0.0);
        p.identity_offset = true;
        assert!((pair_energy(&ops, &u, &u, &id, &p).unwrap().density - 2.0 * g.area()).abs() < 1e-15);
    }

    #[test]
    fn gradient_zero_at_rest_and_on_boundary() {
        let g = Grid::new(7, 7).unwrap();
        let ops = FemOperators::new(g);
        let u = Image::constant(g, 2, 0.3);
        let grad = deformation_gradient(&ops, &u, &u, &Deformation::identity(g), &ogden()).unwrap();
        assert!(grad.max_norm() < 1e-14);

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let phi = random_warp(g, 0.05, &mut rng);
        let grad = deformation_gradient(&ops, &smooth_image(g, 3.0, 1.0), &smooth_image(g, 1.0, 4.0), &phi, &ogden()).unwrap();
        for i in (0..g.num_nodes()).filter(|&i| g.is_boundary(i)) {
            assert_eq!((grad.x.values()[i], grad.y.values()[i]), (0.0, 0.0));
        }
        assert!(grad.max_norm() > 0.0);
    }

    #[test]
    fn inadmissible_gradient_is_an_error() {
        let g = Grid::new(5, 5).unwrap();
        let ops = FemOperators::new(g);
        let mut d = VectorField::zeros(g);
        d.x.values_mut()[12] = 0.4; // folds neighbouring cells
        let phi = Deformation::from_displacement(d).unwrap();
        let u = Image::constant(g, 1, 0.0);
        assert!(matches!(deformation_gradient(&ops, &u, &u, &phi, &ogden()), Err(Error::Inadmissible(_))));
        assert_eq!(pair_energy(&ops, &u, &u, &phi, &ogden()).unwrap().density, f64::INFINITY);
    }

    #[test]
    fn channel_permutation_invariance() {
        let g = Grid::new(6, 5).unwrap();
        let ops = FemOperators::new(g);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let phi = random_warp(g, 0.05, &mut rng);
        let a = Image::new(vec![smooth_image(g, 1.0, 2.0).channel(0).clone(), smooth_image(g, 3.0, 1.0).channel(0).clone()]).unwrap();
        let b = Image::new(vec![smooth_image(g, 2.0, 2.0).channel(0).clone(), smooth_image(g, 1.0, 3.0).channel(0).clone()]).unwrap();
        let swap = |im: &Image| Image::new(vec![im.channel(1).clone(), im.channel(0).clone()]).unwrap();
        let e1 = pair_energy(&ops, &a, &b, &phi, &ogden()).unwrap();
        let e2 = pair_energy(&ops, &swap(&a), &swap(&b), &phi, &ogden()).unwrap();
        assert!((e1.matching - e2.matching).abs() <= 1e-15 * e1.matching);
        assert_eq!(e1.density, e2.density);
    }

    #[test]
    fn path_energy_sums_segments() {
        let g = Grid::new(5, 5).unwrap();
        let ops = FemOperators::new(g);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let imgs = [smooth_image(g, 1.0, 1.0), smooth_image(g, 2.0, 1.5), smooth_image(g, 3.0, 2.0)];
        let phis = [random_warp(g, 0.04, &mut rng), random_warp(g, 0.04, &mut rng)];
        let p = ogden();
        let e = path_energy(&ops, &imgs, &phis, &p).unwrap();
        let direct = pair_energy(&ops, &imgs[0], &imgs[1], &phis[0], &p).unwrap().total()
            + pair_energy(&ops, &imgs[1], &imgs[2], &phis[1], &p).unwrap().total();
        assert_eq!(e.k(), 2);
        assert!((e.total() - 2.0 * direct).abs() < 1e-14);
        let single = path_energy(&ops, &imgs[..2], &phis[..1], &p).unwrap();
        assert_eq!(single.total(), pair_energy(&ops, &imgs[0], &imgs[1], &phis[0], &p).unwrap().total());
        assert!(path_energy(&ops, &imgs, &phis[..1], &p).is_err());
    }
}
