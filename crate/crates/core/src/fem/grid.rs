use core::ops::{Add, Mul, Sub};

use alloc::format;

use crate::{Error, Result};

/// A point of the image domain, in domain units.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn norm(self) -> f64 {
        libm::hypot(self.x, self.y)
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

/// Cell index plus local coordinates `(xi, eta) ∈ [0,1]²` of a located point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellCoords {
    pub cell: usize,
    pub xi: f64,
    pub eta: f64,
}

impl CellCoords {
    /// Values of the four local basis functions.
    #[inline]
    pub fn basis(&self) -> [f64; 4] {
        bilinear_basis(self.xi, self.eta)
    }
}

#[inline]
pub(crate) fn bilinear_basis(xi: f64, eta: f64) -> [f64; 4] {
    let (mx, my) = (1.0 - xi, 1.0 - eta);
    [mx * my, xi * my, mx * eta, xi * eta]
}

/// Reference-cell derivatives `(∂ξ, ∂η)` of the four local basis functions.
#[inline]
pub(crate) fn bilinear_basis_grad(xi: f64, eta: f64) -> [[f64; 2]; 4] {
    let (mx, my) = (1.0 - xi, 1.0 - eta);
    [[-my, -mx], [my, -xi], [-eta, mx], [eta, xi]]
}

/// Regular grid of `nx × ny` nodes with spacing `h` covering
/// `[0, (nx-1)h] × [0, (ny-1)h]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    nx: usize,
    ny: usize,
    h: f64,
}

impl Grid {
    /// One node per pixel, `h = 1 / (max(width, height) - 1)`.
    pub fn new(width_px: usize, height_px: usize) -> Result<Self> {
        if width_px < 2 || height_px < 2 {
            return Err(Error::InvalidInput(format!(
                "grid needs at least 2x2 nodes, got {width_px}x{height_px}"
            )));
        }
        let h = 1.0 / (width_px.max(height_px) - 1) as f64;
        Ok(Grid { nx: width_px, ny: height_px, h })
    }

    /// Grid with an explicit mesh size.
    pub fn with_spacing(nx: usize, ny: usize, h: f64) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidInput(format!(
                "grid needs at least 2x2 nodes, got {nx}x{ny}"
            )));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidInput(format!("mesh size must be positive, got {h}")));
        }
        Ok(Grid { nx, ny, h })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn num_nodes(&self) -> usize {
        self.nx * self.ny
    }

    pub fn num_cells(&self) -> usize {
        (self.nx - 1) * (self.ny - 1)
    }

    pub fn width(&self) -> f64 {
        (self.nx - 1) as f64 * self.h
    }

    pub fn height(&self) -> f64 {
        (self.ny - 1) as f64 * self.h
    }

    /// Area `|D|` of the domain rectangle.
    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    #[inline]
    pub fn node_index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    #[inline]
    pub fn node_position(&self, node: usize) -> Point {
        let (ix, iy) = (node % self.nx, node / self.nx);
        Point::new(ix as f64 * self.h, iy as f64 * self.h)
    }

    #[inline]
    pub fn is_boundary(&self, node: usize) -> bool {
        let (ix, iy) = (node % self.nx, node / self.nx);
        ix == 0 || iy == 0 || ix + 1 == self.nx || iy + 1 == self.ny
    }

    pub fn boundary_mask(&self) -> alloc::vec::Vec<bool> {
        (0..self.num_nodes()).map(|i| self.is_boundary(i)).collect()
    }

    /// Lower-left corner of a cell.
    #[inline]
    pub fn cell_origin(&self, cell: usize) -> Point {
        let cx = self.nx - 1;
        Point::new((cell % cx) as f64 * self.h, (cell / cx) as f64 * self.h)
    }

    /// Global node indices of a cell in local order (ll, lr, ul, ur).
    #[inline]
    pub fn cell_nodes(&self, cell: usize) -> [usize; 4] {
        let cx = self.nx - 1;
        let ll = self.node_index(cell % cx, cell / cx);
        [ll, ll + 1, ll + self.nx, ll + self.nx + 1]
    }

    /// Componentwise projection onto the domain rectangle.
    #[inline]
    pub fn clamp(&self, p: Point) -> Point {
        Point::new(p.x.clamp(0.0, self.width()), p.y.clamp(0.0, self.height()))
    }

    /// Containing cell of the clamped point. Points on shared edges belong to
    /// the cell with the smaller index (lower-left rule).
    #[inline]
    pub fn locate(&self, p: Point) -> CellCoords {
        let p = self.clamp(p);
        let (ix, xi) = locate_axis(p.x / self.h, self.nx - 1);
        let (iy, eta) = locate_axis(p.y / self.h, self.ny - 1);
        CellCoords { cell: iy * (self.nx - 1) + ix, xi, eta }
    }

    /// [`Grid::locate`] returning the lower-left node of the cell instead of its index.
    #[inline]
    pub(crate) fn locate_corner(&self, p: Point) -> (usize, f64, f64) {
        let p = self.clamp(p);
        let (ix, xi) = locate_axis(p.x / self.h, self.nx - 1);
        let (iy, eta) = locate_axis(p.y / self.h, self.ny - 1);
        (iy * self.nx + ix, xi, eta)
    }
}

#[inline]
fn locate_axis(s: f64, cells: usize) -> (usize, f64) {
    // s >= 0 after clamping, so truncation is floor and `ceil(s) - 1` follows
    let t = s as usize;
    let i = if t as f64 == s { t.saturating_sub(1) } else { t }.min(cells - 1);
    (i, s - i as f64)
}
