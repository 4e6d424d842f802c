use super::grid::{Grid, Point};

const SIMPSON_NODES: [f64; 3] = [0.0, 0.5, 1.0];
const SIMPSON_WEIGHTS: [f64; 3] = [1.0 / 6.0, 4.0 / 6.0, 1.0 / 6.0];

/// One quadrature point of a cell: local coordinates and weight (already
/// scaled by the cell area).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadPoint {
    pub xi: f64,
    pub eta: f64,
    pub weight: f64,
}

/// Tensor-product Simpson rule, 9 points per cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadRule {
    points: [QuadPoint; 9],
}

impl QuadRule {
    pub fn simpson(h: f64) -> Self {
        let area = h * h;
        let mut points = [QuadPoint { xi: 0.0, eta: 0.0, weight: 0.0 }; 9];
        for (q, p) in points.iter_mut().enumerate() {
            let (a, b) = (q % 3, q / 3);
            *p = QuadPoint {
                xi: SIMPSON_NODES[a],
                eta: SIMPSON_NODES[b],
                weight: area * (SIMPSON_WEIGHTS[a] * SIMPSON_WEIGHTS[b]),
            };
        }
        QuadRule { points }
    }

    pub fn for_grid(grid: &Grid) -> Self {
        Self::simpson(grid.h())
    }

    pub fn points(&self) -> &[QuadPoint; 9] {
        &self.points
    }

    /// Physical position of quadrature point `q` in `cell`.
    #[inline]
    pub fn position(&self, grid: &Grid, cell: usize, q: usize) -> Point {
        let o = grid.cell_origin(cell);
        let p = &self.points[q];
        Point::new(o.x + p.xi * grid.h(), o.y + p.eta * grid.h())
    }
}

/// `Σ_cells Σ_q w_q f(x_q)`.
///
/// Accumulates with the integer multipliers `1, 4, 16` and divides by 36
/// once, so dyadic integrands such as `x⁴` on the unit cell give the
/// correctly rounded value.
pub fn quad_integrate(grid: &Grid, mut f: impl FnMut(Point) -> f64) -> f64 {
    const MULT: [f64; 3] = [1.0, 4.0, 1.0];
    let rule = QuadRule::for_grid(grid);
    let mut total = 0.0;
    for cell in 0..grid.num_cells() {
        for q in 0..9 {
            total += MULT[q % 3] * MULT[q / 3] * f(rule.position(grid, cell, q));
        }
    }
    total / 36.0 * (grid.h() * grid.h())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn quartic_on_the_unit_cell() {
        let g = Grid::new(2, 2).unwrap();
        assert_eq!(quad_integrate(&g, |p| p.x * p.x * p.x * p.x), 5.0 / 24.0);
    }

    #[test]
    fn weights_sum_to_cell_area() {
        let r = QuadRule::simpson(0.25);
        let s: f64 = r.points().iter().map(|p| p.weight).sum();
        assert!((s - 0.0625).abs() < 1e-16);
        assert!(r.points().iter().all(|p| p.weight > 0.0));
    }

    #[test]
    fn integrate_examples() {
        let g = Grid::new(5, 3).unwrap();
        assert!((quad_integrate(&g, |_| 1.0) - g.area()).abs() < 1e-15);
        let unit = Grid::new(2, 2).unwrap();
        let v = quad_integrate(&unit, |p| p.x.powi(3) * p.y.powi(3));
        assert_eq!(v, 1.0 / 16.0);
        let v = quad_integrate(&unit, |p| p.x.powi(4));
        assert!((v - 5.0 / 24.0).abs() < 1e-16);
    }

    fn poly(c: &[f64; 16], x: f64, y: f64) -> f64 {
        let mut s = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                s += c[4 * i + j] * x.powi(i as i32) * y.powi(j as i32);
            }
        }
        s
    }

    fn poly_integral(c: &[f64; 16], x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
        let mut s = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                let ix = (x1.powi(i + 1) - x0.powi(i + 1)) / (i + 1) as f64;
                let iy = (y1.powi(j + 1) - y0.powi(j + 1)) / (j + 1) as f64;
                s += c[(4 * i + j) as usize] * ix * iy;
            }
        }
        s
    }

    proptest! {
        #[test]
        fn exact_for_bicubics(c in proptest::array::uniform16(-1.0f64..1.0), n in 2usize..6) {
            let g = Grid::new(n, n + 1).unwrap();
            let q = quad_integrate(&g, |p| poly(&c, p.x, p.y));
            let exact = poly_integral(&c, 0.0, g.width(), 0.0, g.height());
            prop_assert!((q - exact).abs() < 1e-12);
        }
    }
}
