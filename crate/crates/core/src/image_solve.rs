//! Optimal intermediate images for fixed deformations.
//!
//! With `Φ_1..Φ_K` fixed, the path energy is a strictly convex quadratic in
//! the interior images `U_1..U_{K-1}`. Its minimizer solves the symmetric
//! block-tridiagonal system `A[Φ] Ū = R[Φ]` with
//!
//! ```text
//! A_{k,k}   = M[Φ_k,Φ_k] + M[𝟙,𝟙]
//! A_{k,k-1} = -M[Φ_k,𝟙]
//! A_{k,k+1} = -M[Φ_{k+1},𝟙]ᵀ
//! R_1 = M[Φ_1,𝟙] Ū_A,  R_{K-1} = M[Φ_K,𝟙]ᵀ Ū_B
//! ```
//!
//! Rows of `M[Φ,Ψ]` belong to the basis function composed with `Φ`, so the
//! matching term of segment `k` has the cross term `Ū_kᵀ M[Φ_k,𝟙] Ū_{k-1}`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::fem::{assemble_warped_mass, CsrMatrix, Deformation, FemOperators, Grid, Image, ScalarField};
use crate::linalg::{pcg, CgOptions, CgReport, LinearOperator};
use crate::{Error, Result};

/// Matrix part of the block system for `K` segments.
#[derive(Clone, Debug)]
pub struct BlockTridiagonal {
    grid: Grid,
    segments: usize,
    mass: CsrMatrix,
    /// `M[Φ_k,Φ_k]` for `k = 1..K-1`.
    warped: Vec<CsrMatrix>,
    /// `M[Φ_k,𝟙]` for `k = 1..K`.
    coupling: Vec<CsrMatrix>,
    /// `M[Φ_k,𝟙]ᵀ` for `k = 1..K`.
    coupling_t: Vec<CsrMatrix>,
}

/// Assembles `A[Φ]` for `Φ_1..Φ_K`, `K ≥ 2`.
pub fn assemble_system(ops: &FemOperators, deformations: &[Deformation]) -> Result<BlockTridiagonal> {
    let k = deformations.len();
    if k < 2 {
        return Err(Error::InvalidInput(format!("need K >= 2 deformations for interior images, got {k}")));
    }
    if deformations.iter().any(|d| d.grid() != &ops.grid) {
        return Err(Error::InvalidInput("deformations must share the operator grid".into()));
    }
    let grid = &ops.grid;
    let warped = deformations[..k - 1]
        .iter()
        .map(|phi| assemble_warped_mass(grid, Some(phi), Some(phi)))
        .collect();
    let coupling: Vec<CsrMatrix> = deformations.iter().map(|phi| assemble_warped_mass(grid, Some(phi), None)).collect();
    let coupling_t = coupling.iter().map(CsrMatrix::transpose).collect();
    Ok(BlockTridiagonal { grid: *grid, segments: k, mass: ops.mass.clone(), warped, coupling, coupling_t })
}

impl BlockTridiagonal {
    /// Number of time segments `K`.
    pub fn segments(&self) -> usize {
        self.segments
    }

    /// Number of interior images `K - 1`.
    pub fn blocks(&self) -> usize {
        self.segments - 1
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Right-hand side `R[Φ]` for one channel.
    pub fn rhs(&self, u_a: &ScalarField, u_b: &ScalarField) -> Vec<f64> {
        let n = self.grid.num_nodes();
        let mut r = vec![0.0; n * self.blocks()];
        self.coupling[0].mul_vec_add(1.0, u_a.values(), &mut r[..n]);
        let last = self.blocks() - 1;
        self.coupling_t[self.segments - 1].mul_vec_add(1.0, u_b.values(), &mut r[last * n..]);
        r
    }

    /// Dense row-major copy of the full `(K-1)n × (K-1)n` matrix.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.grid.num_nodes();
        let dim = n * self.blocks();
        let mut d = vec![0.0; dim * dim];
        let mut put = |bi: usize, bj: usize, m: &CsrMatrix, s: f64| {
            for (r, c, v) in m.entries() {
                d[(bi * n + r) * dim + bj * n + c] += s * v;
            }
        };
        for b in 0..self.blocks() {
            put(b, b, &self.warped[b], 1.0);
            put(b, b, &self.mass, 1.0);
            if b > 0 {
                // A_{k,k-1} = -M[Φ_k,𝟙], k = b + 1
                put(b, b - 1, &self.coupling[b], -1.0);
            }
            if b + 1 < self.blocks() {
                // A_{k,k+1} = -M[Φ_{k+1},𝟙]ᵀ
                put(b, b + 1, &self.coupling_t[b + 1], -1.0);
            }
        }
        d
    }
}

impl LinearOperator for BlockTridiagonal {
    fn dim(&self) -> usize {
        self.grid.num_nodes() * self.blocks()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.grid.num_nodes();
        for b in 0..self.blocks() {
            let out = &mut y[b * n..(b + 1) * n];
            let xb = &x[b * n..(b + 1) * n];
            self.warped[b].mul_vec_into(xb, out);
            self.mass.mul_vec_add(1.0, xb, out);
            if b > 0 {
                self.coupling[b].mul_vec_add(-1.0, &x[(b - 1) * n..b * n], out);
            }
            if b + 1 < self.blocks() {
                self.coupling_t[b + 1].mul_vec_add(-1.0, &x[(b + 1) * n..(b + 2) * n], out);
            }
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        let md = self.mass.diagonal();
        self.warped
            .iter()
            .flat_map(|w| w.diagonal().into_iter().zip(md.clone()).map(|(a, b)| a + b))
            .collect()
    }
}

/// Stopping rule for [`solve_images`]; `max_iter = None` means `1000·K`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: Option<usize>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: 1e-8, max_iter: None }
    }
}

/// Solves for `U_1..U_{K-1}`, one CG run per channel on the stacked vector.
///
/// `initial`, when given, holds `K-1` images used as the starting guess.
pub fn solve_images(
    system: &BlockTridiagonal,
    u_a: &Image,
    u_b: &Image,
    initial: Option<&[Image]>,
    opts: SolveOptions,
) -> Result<(Vec<Image>, Vec<CgReport>)> {
    if u_a.num_channels() != u_b.num_channels() {
        return Err(Error::InvalidInput("endpoint images have different channel counts".into()));
    }
    if u_a.grid() != system.grid() || u_b.grid() != system.grid() {
        return Err(Error::InvalidInput("endpoint images must live on the system grid".into()));
    }
    if let Some(init) = initial {
        if init.len() != system.blocks() || init.iter().any(|im| im.num_channels() != u_a.num_channels()) {
            return Err(Error::InvalidInput("initial guess does not match the system".into()));
        }
    }
    let n = system.grid.num_nodes();
    let cg = CgOptions { tol: opts.tol, max_iter: opts.max_iter.unwrap_or(1000 * system.segments()) };
    let mut per_block: Vec<Vec<ScalarField>> = vec![Vec::new(); system.blocks()];
    let mut reports = Vec::with_capacity(u_a.num_channels());
    for c in 0..u_a.num_channels() {
        let rhs = system.rhs(u_a.channel(c), u_b.channel(c));
        let mut x = match initial {
            Some(init) => init.iter().flat_map(|im| im.channel(c).values().iter().copied()).collect(),
            None => vec![0.0; rhs.len()],
        };
        reports.push(pcg(system, &rhs, &mut x, cg)?);
        for (b, chunk) in x.chunks_exact(n).enumerate() {
            per_block[b].push(ScalarField::new(system.grid, chunk.to_vec())?);
        }
    }
    let images = per_block.into_iter().map(Image::new).collect::<Result<Vec<_>>>()?;
    Ok((images, reports))
}

/// Pointwise optimality condition of the spatially continuous problem:
/// `(u_next + u_prev · detinv) / (1 + detinv)`.
pub fn pointwise_image_formula(u_prev: f64, u_next: f64, detinv: f64) -> f64 {
    (u_next + u_prev * detinv) / (1.0 + detinv)
}
