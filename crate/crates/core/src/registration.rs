//! Single-pair registration: minimizes `W^D[U_prev, U_next, ·]` over one
//! deformation with Fletcher–Reeves nonlinear CG in a regularized `H¹` metric.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::energy::{MaterialParams, PairEnergy, PairProblem};
use crate::fem::{CsrMatrix, Deformation, FemOperators, Image, VectorField};
use crate::linalg::{dot, BandCholesky};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegistrationOptions {
    pub max_iterations: usize,
    /// Stop once `‖g‖_{H¹*}` drops below this fraction of its initial value.
    pub gradient_tolerance: f64,
    /// Stop once `‖g‖_{H¹*}` drops below this absolute value.
    pub gradient_abs_tolerance: f64,
    pub armijo_c: f64,
    pub backtrack_factor: f64,
    pub max_backtracks: usize,
    pub restart_period: usize,
    /// Weight `ε` of the stiffness part in `M + εS`.
    pub h1_epsilon: f64,
}

impl Default for RegistrationOptions {
    fn default() -> Self {
        RegistrationOptions {
            max_iterations: 200,
            gradient_tolerance: 1e-4,
            gradient_abs_tolerance: 1e-12,
            armijo_c: 1e-4,
            backtrack_factor: 0.5,
            max_backtracks: 30,
            restart_period: 10,
            h1_epsilon: 1.0,
        }
    }
}

impl RegistrationOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.gradient_tolerance, self.armijo_c, self.h1_epsilon];
        if positive.iter().any(|&v| !(v > 0.0 && v.is_finite()))
            || self.gradient_abs_tolerance < 0.0
            || self.max_iterations == 0
            || self.restart_period == 0
        {
            return Err(Error::InvalidParameters("registration options must be positive".into()));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(Error::InvalidParameters(format!(
                "backtrack factor must lie in (0,1), got {}",
                self.backtrack_factor
            )));
        }
        Ok(())
    }
}

/// The metric `M + εS` with boundary rows and columns replaced by the
/// identity, held together with its banded Cholesky factor.
#[derive(Clone, Debug)]
pub struct H1Metric {
    matrix: CsrMatrix,
    factor: BandCholesky,
}

impl H1Metric {
    pub fn new(ops: &FemOperators, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidParameters(format!("H1 epsilon must be positive, got {epsilon}")));
        }
        let matrix = ops.mass.add_scaled(epsilon, &ops.stiffness).constrain_identity(&ops.grid.boundary_mask());
        let factor = BandCholesky::new(&matrix)?;
        Ok(H1Metric { matrix, factor })
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    /// Solves `(M + εS) g̃ = g` componentwise.
    pub fn precondition(&self, g: &VectorField) -> Result<VectorField> {
        let grid = *g.grid();
        let mut out = g.clone();
        for dst in [&mut out.x, &mut out.y] {
            self.factor.solve_in_place(dst.values_mut());
        }
        debug_assert_eq!(*out.grid(), grid);
        Ok(out)
    }
}

/// One-shot [`H1Metric::precondition`].
pub fn h1_precondition(ops: &FemOperators, g: &VectorField, epsilon: f64) -> Result<VectorField> {
    H1Metric::new(ops, epsilon)?.precondition(g)
}

#[derive(Clone, Debug)]
pub struct RegistrationResult {
    pub deformation: Deformation,
    pub iterations: usize,
    /// Pair energy before the first and after every accepted step.
    pub energy_trace: Vec<f64>,
    pub energy: PairEnergy,
    /// The line search found no acceptable step.
    pub stalled: bool,
}

fn vdot(a: &VectorField, b: &VectorField) -> f64 {
    dot(a.x.values(), b.x.values()) + dot(a.y.values(), b.y.values())
}

/// Minimizes the pair energy over `Φ`, starting at `phi_init`.
pub fn register(
    ops: &FemOperators,
    u_prev: &Image,
    u_next: &Image,
    phi_init: &Deformation,
    params: &MaterialParams,
    opts: &RegistrationOptions,
) -> Result<RegistrationResult> {
    let metric = H1Metric::new(ops, opts.h1_epsilon)?;
    register_with_metric(ops, &metric, u_prev, u_next, phi_init, params, opts)
}

/// [`register`] with a prebuilt metric, for repeated calls on one grid.
pub fn register_with_metric(
    ops: &FemOperators,
    metric: &H1Metric,
    u_prev: &Image,
    u_next: &Image,
    phi_init: &Deformation,
    params: &MaterialParams,
    opts: &RegistrationOptions,
) -> Result<RegistrationResult> {
    opts.validate()?;
    let grid = ops.grid;
    let n = grid.num_nodes();
    let problem = PairProblem::new(ops, u_prev, u_next, params)?;
    let mut phi = phi_init.clone();
    let (mut energy, mut grad) = match problem.energy_and_gradient(&phi) {
        Ok(v) => v,
        Err(Error::Inadmissible(msg)) => return Err(Error::Inadmissible(format!("initial deformation: {msg}"))),
        Err(e) => return Err(e),
    };
    let mut trace = vec![energy.total()];
    let mut pgrad = metric.precondition(&grad)?;
    let mut gg = vdot(&pgrad, &grad);
    let gg0 = gg;
    let done = |gg: f64| {
        let norm = libm::sqrt(gg.max(0.0));
        norm <= opts.gradient_abs_tolerance || norm <= opts.gradient_tolerance * libm::sqrt(gg0)
    };
    if libm::sqrt(gg.max(0.0)) <= opts.gradient_abs_tolerance {
        return Ok(RegistrationResult { deformation: phi, iterations: 0, energy_trace: trace, energy, stalled: false });
    }

    let mut dir: Vec<f64> = pgrad.to_flat().iter().map(|v| -v).collect();
    let mut step = 1.0;
    let mut stalled = false;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        let g_flat = grad.to_flat();
        let mut slope = dot(&g_flat, &dir);
        if slope >= 0.0 {
            dir = pgrad.to_flat().iter().map(|v| -v).collect();
            slope = -gg;
        }
        let base = phi.displacement().to_flat();
        let e0 = energy.total();
        let mut sigma = step;
        let mut accepted = None;
        for _ in 0..=opts.max_backtracks {
            let trial: Vec<f64> = base.iter().zip(&dir).map(|(b, d)| b + sigma * d).collect();
            let candidate = Deformation::from_displacement_masked(VectorField::from_flat(grid, &trial)?);
            let trial = match problem.energy_and_gradient(&candidate) {
                Ok(v) => Some(v),
                Err(Error::Inadmissible(_)) => None,
                Err(e) => return Err(e),
            };
            if let Some((e, g)) = trial {
                if e.total().is_finite() && e.total() <= e0 + opts.armijo_c * sigma * slope {
                    accepted = Some((candidate, e, g));
                    break;
                }
            }
            sigma *= opts.backtrack_factor;
        }
        let Some((candidate, e_new, g_new)) = accepted else {
            stalled = true;
            break;
        };
        iterations += 1;
        step = 2.0 * sigma;
        phi = candidate;
        energy = e_new;
        trace.push(energy.total());
        grad = g_new;
        let pgrad_new = metric.precondition(&grad)?;
        let gg_new = vdot(&pgrad_new, &grad);
        if done(gg_new) {
            break;
        }
        let beta = if iterations % opts.restart_period == 0 { 0.0 } else { gg_new / gg };
        let pg = pgrad_new.to_flat();
        for (d, p) in dir.iter_mut().zip(&pg) {
            *d = -p + beta * *d;
        }
        for i in (0..n).filter(|&i| grid.is_boundary(i)) {
            dir[i] = 0.0;
            dir[n + i] = 0.0;
        }
        pgrad = pgrad_new;
        gg = gg_new;
    }
    Ok(RegistrationResult { deformation: phi, iterations, energy_trace: trace, energy, stalled })
}
