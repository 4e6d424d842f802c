//! Cascadic alternating minimization of the discrete path energy.
//!
//! Level `j` uses `K = 2^j` time steps. Each level starts from the previous
//! one by inserting warped midpoint images and then alternates between
//! registering every segment and solving for the interior images until the
//! images stop changing.

mod diagnostics;
mod smoothing;

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

pub use diagnostics::{
    accumulated_material_derivative, displacement_gradient_bound, time_interpolate, transport_path, Frame,
};
pub use smoothing::{default_sigma2, gaussian_kernel, presmooth};

use crate::energy::{path_energy, MaterialParams, PathEnergy};
use crate::fem::{Deformation, FemOperators, Grid, Image};
use crate::image_solve::{assemble_system, solve_images, SolveOptions};
use crate::registration::{register_with_metric, H1Metric, RegistrationOptions};
use crate::{Error, Result};

/// Images `U_0..U_K` and deformations `Φ_1..Φ_K` at one cascade level.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscretePath {
    pub level: usize,
    pub images: Vec<Image>,
    pub deformations: Vec<Deformation>,
}

impl DiscretePath {
    /// Two-image path `(U_A, U_B)` with an identity deformation (level 0).
    pub fn endpoints(a: Image, b: Image) -> Result<Self> {
        if a.grid() != b.grid() || a.num_channels() != b.num_channels() {
            return Err(Error::InvalidInput("endpoint images differ in size or channel count".into()));
        }
        let id = Deformation::identity(*a.grid());
        Ok(DiscretePath { level: 0, images: alloc::vec![a, b], deformations: alloc::vec![id] })
    }

    /// Affine blend `U_k = (1 - k/K) U_A + (k/K) U_B` with identity deformations.
    pub fn linear_blend(a: &Image, b: &Image, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidInput("K must be positive".into()));
        }
        let mut path = Self::endpoints(a.clone(), b.clone())?;
        let grid = *a.grid();
        path.images = (0..=k)
            .map(|i| {
                let t = i as f64 / k as f64;
                let mut im = a.clone();
                for (ch, (ca, cb)) in im.channels_mut().iter_mut().zip(a.channels().iter().zip(b.channels())) {
                    for ((v, va), vb) in ch.values_mut().iter_mut().zip(ca.values()).zip(cb.values()) {
                        *v = (1.0 - t) * va + t * vb;
                    }
                }
                im
            })
            .collect();
        path.deformations = (0..k).map(|_| Deformation::identity(grid)).collect();
        Ok(path)
    }

    pub fn k(&self) -> usize {
        self.deformations.len()
    }

    pub fn grid(&self) -> &Grid {
        self.images[0].grid()
    }

    pub fn energy(&self, ops: &FemOperators, params: &MaterialParams) -> Result<PathEnergy> {
        path_energy(ops, &self.images, &self.deformations, params)
    }

    fn interior_flat(&self) -> Vec<f64> {
        self.images[1..self.images.len() - 1]
            .iter()
            .flat_map(|im| im.channels().iter().flat_map(|c| c.values().iter().copied()))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    /// Finest level `J`; the result has `K = 2^J` segments.
    pub levels: usize,
    /// Stop alternating once `‖Ū_old - Ū‖₂ ≤ threshold`.
    pub threshold: f64,
    pub max_sweeps: usize,
    /// Gaussian pre-smoothing variance in domain units.
    pub sigma2: f64,
    pub params: MaterialParams,
    pub registration: RegistrationOptions,
    /// Iteration cap of each warm-started registration inside a sweep;
    /// progress carries over to the next sweep.
    pub sweep_iterations: usize,
    pub solve: SolveOptions,
}

impl SolverConfig {
    pub fn new(params: MaterialParams, levels: usize, sigma2: f64) -> Self {
        SolverConfig {
            levels,
            threshold: 1e-6,
            max_sweeps: 100,
            sigma2,
            params,
            registration: RegistrationOptions::default(),
            sweep_iterations: 10,
            solve: SolveOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 {
            return Err(Error::InvalidParameters("at least one level is required".into()));
        }
        if !(self.threshold > 0.0) || self.max_sweeps == 0 || self.sweep_iterations == 0 {
            return Err(Error::InvalidParameters("threshold, max_sweeps and sweep_iterations must be positive".into()));
        }
        if !(self.sigma2 >= 0.0) {
            return Err(Error::InvalidParameters(format!("sigma2 must be non-negative, got {}", self.sigma2)));
        }
        self.params.validate()?;
        self.registration.validate()
    }
}

/// Nodal interpolation of `x ↦ U_b(x + ½(Φ(x) - x))`.
pub fn warp_midpoint(u_b: &Image, phi: &Deformation) -> Image {
    if phi.is_identity() {
        return u_b.clone();
    }
    let disp = phi.displacement();
    u_b.pull_back(|x| x + disp.eval(x) * 0.5)
}

/// Energies recorded during one alternation sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRecord {
    /// 1-based; sweep 0 is the state before alternating.
    pub sweep: usize,
    pub after_registration: PathEnergy,
    pub after_solve: PathEnergy,
    /// `‖Ū_old - Ū‖₂` over all interior images and channels.
    pub change: f64,
    pub registration_iterations: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlternationReport {
    pub initial: PathEnergy,
    pub sweeps: Vec<SweepRecord>,
    pub converged: bool,
}

/// Shared per-grid state: FEM operators and the registration metric.
#[derive(Clone, Debug)]
pub struct Workspace {
    pub ops: FemOperators,
    pub metric: H1Metric,
}

impl Workspace {
    pub fn new(grid: Grid, registration: &RegistrationOptions) -> Result<Self> {
        let ops = FemOperators::new(grid);
        let metric = H1Metric::new(&ops, registration.h1_epsilon)?;
        Ok(Workspace { ops, metric })
    }
}

/// Doubles `K`: keeps the coarse images at even indices and inserts the
/// warped midpoint of each registered coarse pair. New deformations are `𝟙`.
pub fn prolongate(ws: &Workspace, coarse: &DiscretePath, config: &SolverConfig) -> Result<DiscretePath> {
    let grid = *coarse.grid();
    let mut images = Vec::with_capacity(2 * coarse.k() + 1);
    for (k, pair) in coarse.images.windows(2).enumerate() {
        // the coarse deformation already matches this pair; use it as warm start
        let reg = register_with_metric(
            &ws.ops,
            &ws.metric,
            &pair[0],
            &pair[1],
            &coarse.deformations[k],
            &config.params,
            &config.registration,
        )?;
        images.push(pair[0].clone());
        images.push(warp_midpoint(&pair[1], &reg.deformation));
    }
    images.push(coarse.images[coarse.k()].clone());
    let deformations = (0..2 * coarse.k()).map(|_| Deformation::identity(grid)).collect();
    Ok(DiscretePath { level: coarse.level + 1, images, deformations })
}

/// Alternates registration of every segment and the interior image solve
/// until the interior images change by at most `threshold`.
pub fn alternate(ws: &Workspace, path: &mut DiscretePath, config: &SolverConfig) -> Result<AlternationReport> {
    let params = &config.params;
    let k = path.k();
    let initial = path.energy(&ws.ops, params)?;
    let mut sweeps = Vec::new();
    let mut converged = false;
    let reg_opts = RegistrationOptions { max_iterations: config.sweep_iterations, ..config.registration };
    for sweep in 1..=config.max_sweeps {
        let wrap = |e: Error| Error::Sweep { sweep, source: Box::new(e) };
        let old = path.interior_flat();
        let mut iterations = 0;
        for seg in 0..k {
            let reg = register_with_metric(
                &ws.ops,
                &ws.metric,
                &path.images[seg],
                &path.images[seg + 1],
                &path.deformations[seg],
                params,
                &reg_opts,
            )
            .map_err(wrap)?;
            iterations += reg.iterations;
            path.deformations[seg] = reg.deformation;
        }
        let after_registration = path.energy(&ws.ops, params).map_err(wrap)?;
        if k >= 2 {
            let system = assemble_system(&ws.ops, &path.deformations).map_err(wrap)?;
            let (interior, _) =
                solve_images(&system, &path.images[0], &path.images[k], Some(&path.images[1..k]), config.solve)
                    .map_err(wrap)?;
            for (dst, src) in path.images[1..k].iter_mut().zip(interior) {
                *dst = src;
            }
        }
        let after_solve = path.energy(&ws.ops, params).map_err(wrap)?;
        let new = path.interior_flat();
        let change = libm::sqrt(old.iter().zip(&new).map(|(a, b)| (a - b) * (a - b)).sum::<f64>());
        sweeps.push(SweepRecord { sweep, after_registration, after_solve, change, registration_iterations: iterations });
        if change <= config.threshold {
            converged = true;
            break;
        }
    }
    Ok(AlternationReport { initial, sweeps, converged })
}

/// Final state and alternation history of one cascade level.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelRecord {
    pub path: DiscretePath,
    pub report: AlternationReport,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CascadicResult {
    /// Pre-smoothed endpoints.
    pub endpoints: (Image, Image),
    pub levels: Vec<LevelRecord>,
}

impl CascadicResult {
    /// Path at the finest level.
    pub fn path(&self) -> &DiscretePath {
        &self.levels.last().expect("at least one level").path
    }

    pub fn finest(&self) -> &LevelRecord {
        self.levels.last().expect("at least one level")
    }
}

/// Pre-smooths the inputs and runs levels `1..=J`.
pub fn run_cascadic(image_a: &Image, image_b: &Image, config: &SolverConfig) -> Result<CascadicResult> {
    run_cascadic_with(image_a, image_b, config, |_| {})
}

/// [`run_cascadic`] with a callback invoked after every finished level.
pub fn run_cascadic_with(
    image_a: &Image,
    image_b: &Image,
    config: &SolverConfig,
    mut on_level: impl FnMut(&LevelRecord),
) -> Result<CascadicResult> {
    config.validate()?;
    let a = presmooth(image_a, config.sigma2);
    let b = presmooth(image_b, config.sigma2);
    let mut path = DiscretePath::endpoints(a.clone(), b.clone())?;
    let ws = Workspace::new(*a.grid(), &config.registration)?;
    let mut levels = Vec::with_capacity(config.levels);
    for _ in 1..=config.levels {
        path = prolongate(&ws, &path, config)?;
        let report = alternate(&ws, &mut path, config)?;
        let record = LevelRecord { path: path.clone(), report };
        on_level(&record);
        levels.push(record);
    }
    Ok(CascadicResult { endpoints: (a, b), levels })
}
