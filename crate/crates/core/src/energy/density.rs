use super::params::{ogden_coeffs, MaterialParams, Model, OgdenCoeffs};
use crate::{Error, Result};

/// Row-major 2×2 matrix, `a[i][j]`.
pub type Mat2 = [[f64; 2]; 2];

/// Ogden states with `det A` at or below this value have infinite energy.
pub const DET_BARRIER: f64 = 1e-12;

#[inline]
fn det(a: &Mat2) -> f64 {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

/// Cofactor matrix, `∂ det A / ∂A`.
#[inline]
fn cofactor(a: &Mat2) -> Mat2 {
    [[a[1][1], -a[1][0]], [-a[0][1], a[0][0]]]
}

#[inline]
fn frob2(a: &Mat2) -> f64 {
    a[0][0] * a[0][0] + a[0][1] * a[0][1] + a[1][0] * a[1][0] + a[1][1] * a[1][1]
}

/// A density `W` prepared for repeated evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Density {
    /// `tr_id = 2^q` is `tr(𝟙ᵀ𝟙)^q`.
    Ogden { c: OgdenCoeffs, q: f64, r: f64, s: f64, tr_id: f64 },
    Simplified,
}

impl Density {
    pub fn new(params: &MaterialParams) -> Result<Self> {
        Ok(match params.model {
            Model::Ogden => Density::Ogden {
                c: ogden_coeffs(params.lambda, params.mu, params.q, params.r, params.s)?,
                q: params.q,
                r: params.r,
                s: params.s,
                tr_id: libm::pow(2.0, params.q),
            },
            Model::Simplified => Density::Simplified,
        })
    }

    /// `W(A)`; `+∞` for Ogden states with `det A ≤` [`DET_BARRIER`].
    ///
    /// The Ogden density is evaluated as
    /// `a1 (|A|^{2q} - 2^q) + a2 (det^r - 1) + a3 (det^{-s} - 1)`, which equals
    /// the form with `a4` because `a4 = -(a1 2^q + a2 + a3)`; this keeps
    /// `W(𝟙)` exactly zero in floating point.
    #[inline]
    pub fn value(&self, a: &Mat2) -> f64 {
        match *self {
            Density::Ogden { c, q, r, s, tr_id } => {
                let d = det(a);
                if d <= DET_BARRIER {
                    return f64::INFINITY;
                }
                c.a1 * (libm::pow(frob2(a), q) - tr_id) + c.a2 * (libm::pow(d, r) - 1.0) + c.a3 * (libm::pow(d, -s) - 1.0)
            }
            Density::Simplified => {
                let (e00, e11) = (a[0][0] - 1.0, a[1][1] - 1.0);
                e00 * e00 + a[0][1] * a[0][1] + a[1][0] * a[1][0] + e11 * e11
            }
        }
    }

    /// `W_{,A}(A)`.
    #[inline]
    pub fn derivative(&self, a: &Mat2) -> Result<Mat2> {
        match *self {
            Density::Ogden { c, q, r, s, .. } => {
                let d = det(a);
                if d <= DET_BARRIER {
                    return Err(Error::Inadmissible(alloc::format!("det DΦ = {d:e}")));
                }
                let f = 2.0 * q * c.a1 * libm::pow(frob2(a), q - 1.0);
                let g = r * c.a2 * libm::pow(d, r - 1.0) - s * c.a3 * libm::pow(d, -s - 1.0);
                let cof = cofactor(a);
                Ok([
                    [f * a[0][0] + g * cof[0][0], f * a[0][1] + g * cof[0][1]],
                    [f * a[1][0] + g * cof[1][0], f * a[1][1] + g * cof[1][1]],
                ])
            }
            Density::Simplified => Ok([[2.0 * (a[0][0] - 1.0), 2.0 * a[0][1]], [2.0 * a[1][0], 2.0 * (a[1][1] - 1.0)]]),
        }
    }
}

/// `W(A)` for the configured model.
pub fn density(a: &Mat2, params: &MaterialParams) -> Result<f64> {
    Ok(Density::new(params)?.value(a))
}

/// Fréchet derivative of [`density`].
pub fn density_derivative(a: &Mat2, params: &MaterialParams) -> Result<Mat2> {
    Density::new(params)?.derivative(a)
}

/// Returns `(½ D²W(𝟙)(B,B)` by central second differences,
/// `λ/2 (tr B)² + μ tr((sym B)²))`. For the Ogden density both agree.
pub fn second_derivative_check(b: &Mat2, params: &MaterialParams) -> Result<(f64, f64)> {
    let w = Density::new(params)?;
    let t = 1e-4;
    let shifted = |sign: f64| -> Mat2 {
        [[1.0 + sign * t * b[0][0], sign * t * b[0][1]], [sign * t * b[1][0], 1.0 + sign * t * b[1][1]]]
    };
    let id = [[1.0, 0.0], [0.0, 1.0]];
    let fd = 0.5 * (w.value(&shifted(1.0)) - 2.0 * w.value(&id) + w.value(&shifted(-1.0))) / (t * t);
    let tr = b[0][0] + b[1][1];
    let off = 0.5 * (b[0][1] + b[1][0]);
    let sym2 = b[0][0] * b[0][0] + b[1][1] * b[1][1] + 2.0 * off * off;
    Ok((fd, 0.5 * params.lambda * tr * tr + params.mu * sym2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const ID: Mat2 = [[1.0, 0.0], [0.0, 1.0]];

    fn reference() -> MaterialParams {
        MaterialParams::ogden(1.0, 0.5, 1.5, 1.5, 0.5, 1e-5, 1e-2).unwrap()
    }

    fn random_admissible(rng: &mut ChaCha8Rng) -> Mat2 {
        loop {
            let a = [[rng.gen_range(0.3..1.8), rng.gen_range(-0.5..0.5)], [rng.gen_range(-0.5..0.5), rng.gen_range(0.3..1.8)]];
            if det(&a) > 0.05 {
                return a;
            }
        }
    }

    #[test]
    fn ogden_examples() {
        let p = reference();
        assert_eq!(density(&ID, &p).unwrap(), 0.0);
        let v = density(&[[2.0, 0.0], [0.0, 2.0]], &p).unwrap();
        assert!((v - 2.75).abs() < 1e-13, "{v}");
        assert_eq!(density(&[[1.0, 0.0], [0.0, -1.0]], &p).unwrap(), f64::INFINITY);
        assert!(density_derivative(&[[1.0, 0.0], [0.0, -1.0]], &p).is_err());
    }

    #[test]
    fn derivative_vanishes_at_identity() {
        let d = density_derivative(&ID, &reference()).unwrap();
        assert!(frob2(&d).sqrt() < 1e-10);
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let p = reference();
        let w = Density::new(&p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let a = random_admissible(&mut rng);
            let d = w.derivative(&a).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    let eps = 1e-6;
                    let (mut ap, mut am) = (a, a);
                    ap[i][j] += eps;
                    am[i][j] -= eps;
                    let fd = (w.value(&ap) - w.value(&am)) / (2.0 * eps);
                    assert!((fd - d[i][j]).abs() <= 1e-6 * d[i][j].abs().max(1.0), "{fd} vs {}", d[i][j]);
                }
            }
        }
    }

    #[test]
    fn simplified_derivative() {
        let p = MaterialParams::simplified(1e-3, 1e-2).unwrap();
        let a = [[1.3, -0.2], [0.4, 0.9]];
        let d = density_derivative(&a, &p).unwrap();
        assert_eq!(d, [[2.0 * 0.30000000000000004, -0.4], [0.8, 2.0 * (0.9 - 1.0)]]);
        assert_eq!(density(&ID, &p).unwrap(), 0.0);
    }

    #[test]
    fn second_variation_examples() {
        let p = reference();
        let (fd, exact) = second_derivative_check(&[[0.0; 2]; 2], &p).unwrap();
        assert_eq!((fd, exact), (0.0, 0.0));
        let (fd, exact) = second_derivative_check(&ID, &p).unwrap();
        assert!((exact - 3.0).abs() < 1e-15);
        assert!((fd - 3.0).abs() < 1e-5, "{fd}");
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let b = [[rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)], [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]];
            let (fd, exact) = second_derivative_check(&b, &p).unwrap();
            assert!((fd - exact).abs() <= 1e-4 * exact.abs(), "{fd} vs {exact}");
        }
    }

    #[test]
    fn frame_indifference() {
        let w = Density::new(&reference()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let a = random_admissible(&mut rng);
            let th: f64 = rng.gen_range(0.0..core::f64::consts::TAU);
            let (c, s) = (libm::cos(th), libm::sin(th));
            let ra = [
                [c * a[0][0] - s * a[1][0], c * a[0][1] - s * a[1][1]],
                [s * a[0][0] + c * a[1][0], s * a[0][1] + c * a[1][1]],
            ];
            assert!((w.value(&ra) - w.value(&a)).abs() < 1e-10);
        }
    }
}
