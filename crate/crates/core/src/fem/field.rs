use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::grid::{bilinear_basis, bilinear_basis_grad, Grid, Point};
use crate::{Error, Result};

/// Nodal coefficients of a bilinear finite element function.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_nodes() {
            return Err(Error::InvalidInput(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.num_nodes()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite value at node {i}")));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        ScalarField { grid, values: vec![c; grid.num_nodes()] }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Nodal interpolation of `f`.
    pub fn from_fn(grid: Grid, mut f: impl FnMut(Point) -> f64) -> Self {
        let values = (0..grid.num_nodes()).map(|i| f(grid.node_position(i))).collect();
        ScalarField { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    fn cell_values(&self, cell: usize) -> [f64; 4] {
        let n = self.grid.cell_nodes(cell);
        [self.values[n[0]], self.values[n[1]], self.values[n[2]], self.values[n[3]]]
    }

    /// Value at `p` (clamped onto the domain).
    #[inline]
    pub fn eval(&self, p: Point) -> f64 {
        let c = self.grid.locate(p);
        self.eval_local(c.cell, c.xi, c.eta)
    }

    /// Value at local coordinates of a given cell.
    #[inline]
    pub fn eval_local(&self, cell: usize, xi: f64, eta: f64) -> f64 {
        let v = self.cell_values(cell);
        let b = bilinear_basis(xi, eta);
        b[0] * v[0] + b[1] * v[1] + b[2] * v[2] + b[3] * v[3]
    }

    /// Gradient of the interpolant in the containing cell (lower-left rule on edges).
    #[inline]
    pub fn gradient(&self, p: Point) -> Point {
        let c = self.grid.locate(p);
        self.gradient_local(c.cell, c.xi, c.eta)
    }

    #[inline]
    pub fn gradient_local(&self, cell: usize, xi: f64, eta: f64) -> Point {
        let v = self.cell_values(cell);
        let g = bilinear_basis_grad(xi, eta);
        let inv_h = 1.0 / self.grid.h();
        let mut out = Point::default();
        for a in 0..4 {
            out.x += g[a][0] * v[a];
            out.y += g[a][1] * v[a];
        }
        out * inv_h
    }
}

/// Two nodal component arrays on one grid.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub x: ScalarField,
    pub y: ScalarField,
}

impl VectorField {
    pub fn new(x: ScalarField, y: ScalarField) -> Result<Self> {
        if x.grid() != y.grid() {
            return Err(Error::InvalidInput("vector components live on different grids".into()));
        }
        Ok(VectorField { x, y })
    }

    pub fn zeros(grid: Grid) -> Self {
        VectorField { x: ScalarField::zeros(grid), y: ScalarField::zeros(grid) }
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut(Point) -> Point) -> Self {
        let mut out = Self::zeros(grid);
        for i in 0..grid.num_nodes() {
            let v = f(grid.node_position(i));
            out.x.values[i] = v.x;
            out.y.values[i] = v.y;
        }
        out
    }

    pub fn grid(&self) -> &Grid {
        self.x.grid()
    }

    #[inline]
    pub fn eval(&self, p: Point) -> Point {
        let c = self.grid().locate(p);
        self.eval_local(c.cell, c.xi, c.eta)
    }

    #[inline]
    pub fn eval_local(&self, cell: usize, xi: f64, eta: f64) -> Point {
        Point::new(self.x.eval_local(cell, xi, eta), self.y.eval_local(cell, xi, eta))
    }

    /// Stacked nodal vector `[x..., y...]`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 * self.x.values.len());
        v.extend_from_slice(&self.x.values);
        v.extend_from_slice(&self.y.values);
        v
    }

    pub fn from_flat(grid: Grid, flat: &[f64]) -> Result<Self> {
        let n = grid.num_nodes();
        if flat.len() != 2 * n {
            return Err(Error::InvalidInput(format!(
                "expected {} stacked values, got {}",
                2 * n,
                flat.len()
            )));
        }
        VectorField::new(
            ScalarField::new(grid, flat[..n].to_vec())?,
            ScalarField::new(grid, flat[n..].to_vec())?,
        )
    }

    pub fn max_norm(&self) -> f64 {
        self.x
            .values
            .iter()
            .zip(&self.y.values)
            .map(|(a, b)| libm::hypot(*a, *b))
            .fold(0.0, f64::max)
    }
}

/// A deformation `Φ = 𝟙 + d`, stored through its displacement `d`.
///
/// The displacement vanishes on boundary nodes, so `Φ = 𝟙` on `∂D`.
#[derive(Clone, Debug, PartialEq)]
pub struct Deformation {
    displacement: VectorField,
}

impl Deformation {
    pub fn identity(grid: Grid) -> Self {
        Deformation { displacement: VectorField::zeros(grid) }
    }

    /// Wraps a displacement; fails if it is nonzero on a boundary node.
    pub fn from_displacement(displacement: VectorField) -> Result<Self> {
        let grid = *displacement.grid();
        for i in (0..grid.num_nodes()).filter(|&i| grid.is_boundary(i)) {
            if displacement.x.values[i] != 0.0 || displacement.y.values[i] != 0.0 {
                return Err(Error::InvalidInput(format!(
                    "deformation displacement must vanish on the boundary (node {i})"
                )));
            }
        }
        Ok(Deformation { displacement })
    }

    /// Like [`Deformation::from_displacement`] but zeroes boundary values instead of failing.
    pub fn from_displacement_masked(mut displacement: VectorField) -> Self {
        let grid = *displacement.grid();
        for i in (0..grid.num_nodes()).filter(|&i| grid.is_boundary(i)) {
            displacement.x.values[i] = 0.0;
            displacement.y.values[i] = 0.0;
        }
        Deformation { displacement }
    }

    pub fn grid(&self) -> &Grid {
        self.displacement.grid()
    }

    pub fn displacement(&self) -> &VectorField {
        &self.displacement
    }

    pub fn into_displacement(self) -> VectorField {
        self.displacement
    }

    pub fn is_identity(&self) -> bool {
        self.displacement.x.values.iter().all(|&v| v == 0.0)
            && self.displacement.y.values.iter().all(|&v| v == 0.0)
    }

    /// `Φ(p) = p + d(p)`, without clamping the result.
    #[inline]
    pub fn apply(&self, p: Point) -> Point {
        p + self.displacement.eval(p)
    }

    #[inline]
    pub fn apply_local(&self, cell: usize, xi: f64, eta: f64) -> Point {
        let g = self.grid();
        let o = g.cell_origin(cell);
        let p = Point::new(o.x + xi * g.h(), o.y + eta * g.h());
        p + self.displacement.eval_local(cell, xi, eta)
    }

    /// Jacobian `DΦ` inside a cell as `[[∂x Φ¹, ∂y Φ¹], [∂x Φ², ∂y Φ²]]`.
    #[inline]
    pub fn jacobian_local(&self, cell: usize, xi: f64, eta: f64) -> [[f64; 2]; 2] {
        let gx = self.displacement.x.gradient_local(cell, xi, eta);
        let gy = self.displacement.y.gradient_local(cell, xi, eta);
        [[1.0 + gx.x, gx.y], [gy.x, 1.0 + gy.y]]
    }
}

/// Multi-channel image; every channel lives on the same grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    channels: Vec<ScalarField>,
}

impl Image {
    pub fn new(channels: Vec<ScalarField>) -> Result<Self> {
        let first = channels
            .first()
            .ok_or_else(|| Error::InvalidInput("image needs at least one channel".into()))?;
        if channels.iter().any(|c| c.grid() != first.grid()) {
            return Err(Error::InvalidInput("image channels live on different grids".into()));
        }
        Ok(Image { channels })
    }

    pub fn gray(field: ScalarField) -> Self {
        Image { channels: vec![field] }
    }

    pub fn constant(grid: Grid, channels: usize, c: f64) -> Self {
        Image { channels: vec![ScalarField::constant(grid, c); channels.max(1)] }
    }

    pub fn grid(&self) -> &Grid {
        self.channels[0].grid()
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn channels(&self) -> &[ScalarField] {
        &self.channels
    }

    pub fn channels_mut(&mut self) -> &mut [ScalarField] {
        &mut self.channels
    }

    pub fn channel(&self, c: usize) -> &ScalarField {
        &self.channels[c]
    }

    /// Appends a channel, e.g. a segmentation mask.
    pub fn push_channel(&mut self, field: ScalarField) -> Result<()> {
        if field.grid() != self.grid() {
            return Err(Error::InvalidInput("extra channel lives on a different grid".into()));
        }
        self.channels.push(field);
        Ok(())
    }

    /// Nodal interpolation of `x ↦ self(map(x))`, channel by channel.
    pub fn pull_back(&self, map: impl Fn(Point) -> Point) -> Image {
        let grid = *self.grid();
        let pts: Vec<Point> = (0..grid.num_nodes()).map(|i| map(grid.node_position(i))).collect();
        let channels = self
            .channels
            .iter()
            .map(|ch| ScalarField { grid, values: pts.iter().map(|&p| ch.eval(p)).collect() })
            .collect();
        Image { channels }
    }

    /// Minimum and maximum nodal value over all channels.
    pub fn range(&self) -> (f64, f64) {
        self.channels
            .iter()
            .flat_map(|c| c.values.iter())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}
