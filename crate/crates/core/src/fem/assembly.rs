use alloc::vec::Vec;

use super::field::Deformation;
use super::grid::{bilinear_basis, bilinear_basis_grad, CellCoords, Grid};
use super::quadrature::QuadRule;
use super::sparse::CsrMatrix;

/// Located image of a quadrature point under a deformation (`None` = identity).
#[inline]
fn warp_locate(grid: &Grid, rule: &QuadRule, warp: Option<&Deformation>, cell: usize, q: usize) -> CellCoords {
    let p = match warp {
        Some(phi) => {
            let qp = &rule.points()[q];
            phi.apply_local(cell, qp.xi, qp.eta)
        }
        None => rule.position(grid, cell, q),
    };
    grid.locate(p)
}

/// `M[Φ,Ψ]_{ij} = Σ_l Σ_q w_q (Θ^i∘Φ)(x_q) (Θ^j∘Ψ)(x_q)`, assembled cell by cell.
///
/// `None` stands for the identity deformation. Entries are accumulated in a
/// fixed traversal order, so `assemble_warped_mass(g, a, b)` is the exact
/// transpose of `assemble_warped_mass(g, b, a)`.
pub fn assemble_warped_mass(grid: &Grid, phi: Option<&Deformation>, psi: Option<&Deformation>) -> CsrMatrix {
    let rule = QuadRule::for_grid(grid);
    let n = grid.num_nodes();
    let mut triplets = Vec::with_capacity(grid.num_cells() * 9 * 16);
    for cell in 0..grid.num_cells() {
        for (q, qp) in rule.points().iter().enumerate() {
            let a = warp_locate(grid, &rule, phi, cell, q);
            let b = warp_locate(grid, &rule, psi, cell, q);
            let (na, ba) = (grid.cell_nodes(a.cell), a.basis());
            let (nb, bb) = (grid.cell_nodes(b.cell), b.basis());
            for beta in 0..4 {
                for beta2 in 0..4 {
                    triplets.push((na[beta], nb[beta2], qp.weight * (ba[beta] * bb[beta2])));
                }
            }
        }
    }
    CsrMatrix::from_triplets(n, n, triplets)
}

/// Standard mass matrix `M[𝟙,𝟙]`.
pub fn assemble_mass(grid: &Grid) -> CsrMatrix {
    assemble_warped_mass(grid, None, None)
}

/// `S_{ij} = Σ_l Σ_q w_q ∇Θ^i(x_q)·∇Θ^j(x_q)` with cell-local gradients.
pub fn assemble_stiffness(grid: &Grid) -> CsrMatrix {
    let rule = QuadRule::for_grid(grid);
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    let mut local = [[0.0; 4]; 4];
    for qp in rule.points() {
        let g = bilinear_basis_grad(qp.xi, qp.eta);
        for a in 0..4 {
            for b in 0..4 {
                local[a][b] += qp.weight * inv_h2 * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
            }
        }
    }
    let n = grid.num_nodes();
    let mut triplets = Vec::with_capacity(grid.num_cells() * 16);
    for cell in 0..grid.num_cells() {
        let nodes = grid.cell_nodes(cell);
        for a in 0..4 {
            for b in 0..4 {
                triplets.push((nodes[a], nodes[b], local[a][b]));
            }
        }
    }
    CsrMatrix::from_triplets(n, n, triplets)
}

/// Row sums of the standard mass matrix.
pub fn lumped_mass(grid: &Grid) -> Vec<f64> {
    let rule = QuadRule::for_grid(grid);
    let mut local = [0.0; 4];
    for qp in rule.points() {
        let b = bilinear_basis(qp.xi, qp.eta);
        for a in 0..4 {
            local[a] += qp.weight * b[a];
        }
    }
    let mut diag = alloc::vec![0.0; grid.num_nodes()];
    for cell in 0..grid.num_cells() {
        for (a, &i) in grid.cell_nodes(cell).iter().enumerate() {
            diag[i] += local[a];
        }
    }
    diag
}

/// Grid-only operators shared by the energy, registration and image solve.
#[derive(Clone, Debug)]
pub struct FemOperators {
    pub grid: Grid,
    pub rule: QuadRule,
    pub mass: CsrMatrix,
    pub stiffness: CsrMatrix,
    pub lumped: Vec<f64>,
}

impl FemOperators {
    pub fn new(grid: Grid) -> Self {
        FemOperators {
            grid,
            rule: QuadRule::for_grid(&grid),
            mass: assemble_mass(&grid),
            stiffness: assemble_stiffness(&grid),
            lumped: lumped_mass(&grid),
        }
    }

    /// `(M_L⁻¹ S)^power v`.
    pub fn laplace_power(&self, v: &[f64], power: usize) -> Vec<f64> {
        let mut cur = v.to_vec();
        let mut tmp = alloc::vec![0.0; v.len()];
        for _ in 0..power {
            self.stiffness.mul_vec_into(&cur, &mut tmp);
            for ((c, t), l) in cur.iter_mut().zip(&tmp).zip(&self.lumped) {
                *c = t / l;
            }
        }
        cur
    }

    /// `((M_L⁻¹ S)^power)ᵀ v = (S M_L⁻¹)^power v`.
    pub fn laplace_power_transpose(&self, v: &[f64], power: usize) -> Vec<f64> {
        let mut cur = v.to_vec();
        let mut tmp = alloc::vec![0.0; v.len()];
        for _ in 0..power {
            for ((t, c), l) in tmp.iter_mut().zip(&cur).zip(&self.lumped) {
                *t = c / l;
            }
            self.stiffness.mul_vec_into(&tmp, &mut cur);
        }
        cur
    }
}
