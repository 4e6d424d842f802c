//! Command-line interface.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

use metamorph_core::energy::PairEnergy;
use metamorph_core::fem::FemOperators;
use metamorph_core::geodesic::{presmooth, run_cascadic_with, DiscretePath};
use metamorph_core::registration::register;
use metamorph_core::{Deformation, Grid, Image};

use crate::config::{channel_mode, missing_inputs, solver_config, Layer, RunConfig};
use crate::error::{CliError, Result};
use crate::fields::{load_deformation, load_raw_image, save_deformation};
use crate::image_io::{extension, load_image, save_image, write_bytes, ChannelMode};
use crate::outputs::{save_frames, save_outputs};
use crate::render::{max_motion, motion_image};
use crate::validate::run_checks;

#[derive(Parser, Debug)]
#[command(name = "metamorph", version, about = "Geodesic paths between images in the metamorphosis model")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Full cascadic geodesic solve between two images.
    Run(RunArgs),
    /// Registers a single image pair.
    Register(RegisterArgs),
    /// Renders interpolated frames from the output directory of a run.
    Interpolate(InterpolateArgs),
    /// Runs the invariant suite on small synthetic inputs.
    Validate,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModelArg {
    Ogden,
    Simplified,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    Gray,
    Rgb,
}

/// Flags shared by `run` and `register`. Unset flags fall back to the
/// config file, then to the built-in defaults.
#[derive(Args, Debug, Default)]
pub struct CommonArgs {
    #[arg(long)]
    pub image_a: Option<PathBuf>,
    #[arg(long)]
    pub image_b: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// File of `key = value` lines using the long flag names as keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long)]
    pub s: Option<f64>,
    /// Even order of the higher-order term.
    #[arg(long)]
    pub m: Option<usize>,
    /// Add the constant 2|D| to the simplified density term.
    #[arg(long)]
    pub identity_offset: bool,
    /// Comma-separated per-channel matching weights.
    #[arg(long)]
    pub weights: Option<String>,
    /// Gaussian pre-smoothing variance in domain units.
    #[arg(long)]
    pub sigma2: Option<f64>,
    /// Registration iteration cap.
    #[arg(long)]
    pub max_iterations: Option<usize>,
    #[arg(long)]
    pub gradient_tolerance: Option<f64>,
    #[arg(long)]
    pub h1_epsilon: Option<f64>,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub seg_a: Option<PathBuf>,
    #[arg(long)]
    pub seg_b: Option<PathBuf>,
    /// Finest level J; the path has K = 2^J segments.
    #[arg(long)]
    pub levels: Option<usize>,
    /// Stop alternating once the interior images change by at most this much.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub max_sweeps: Option<usize>,
    /// Registration iterations per segment and sweep.
    #[arg(long)]
    pub sweep_iterations: Option<usize>,
    #[arg(long)]
    pub solve_tol: Option<f64>,
    /// Number of interpolated frames to export (0 for none).
    #[arg(long)]
    pub frames: Option<usize>,
    /// Also write every image as raw 64-bit floats.
    #[arg(long)]
    pub dump_raw: bool,
}

#[derive(Args, Debug)]
pub struct RegisterArgs {
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args, Debug)]
pub struct InterpolateArgs {
    /// Output directory of a previous `run`.
    #[arg(long)]
    pub run: PathBuf,
    #[arg(long)]
    pub frames: usize,
    /// Defaults to `<run>/frames`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub dump_raw: bool,
}

fn put<T: ToString>(layer: &mut Layer, key: &str, value: Option<T>) -> Result<()> {
    match value {
        Some(v) => layer.set(key, v.to_string()),
        None => Ok(()),
    }
}

fn path_str(p: &Option<PathBuf>) -> Option<String> {
    p.as_ref().map(|p| p.display().to_string())
}

impl CommonArgs {
    /// Config file first, flags on top.
    fn layer(&self) -> Result<Layer> {
        let mut layer = match &self.config {
            Some(path) => Layer::load(path)?,
            None => Layer::default(),
        };
        let mut cli = Layer::default();
        put(&mut cli, "image-a", path_str(&self.image_a))?;
        put(&mut cli, "image-b", path_str(&self.image_b))?;
        put(&mut cli, "out", path_str(&self.out))?;
        put(&mut cli, "mode", self.mode.map(|m| m.to_possible_value().unwrap().get_name().to_string()))?;
        put(&mut cli, "model", self.model.map(|m| m.to_possible_value().unwrap().get_name().to_string()))?;
        for (k, v) in [
            ("gamma", self.gamma),
            ("delta", self.delta),
            ("lambda", self.lambda),
            ("mu", self.mu),
            ("q", self.q),
            ("r", self.r),
            ("s", self.s),
            ("sigma2", self.sigma2),
            ("gradient-tolerance", self.gradient_tolerance),
            ("h1-epsilon", self.h1_epsilon),
        ] {
            put(&mut cli, k, v)?;
        }
        put(&mut cli, "m", self.m)?;
        put(&mut cli, "max-iterations", self.max_iterations)?;
        put(&mut cli, "weights", self.weights.clone())?;
        if self.identity_offset {
            cli.set("identity-offset", "true")?;
        }
        layer.merge(&cli);
        Ok(layer)
    }
}

impl RunArgs {
    fn layer(&self) -> Result<Layer> {
        let mut layer = self.common.layer()?;
        let mut cli = Layer::default();
        put(&mut cli, "seg-a", path_str(&self.seg_a))?;
        put(&mut cli, "seg-b", path_str(&self.seg_b))?;
        put(&mut cli, "levels", self.levels)?;
        put(&mut cli, "threshold", self.threshold)?;
        put(&mut cli, "max-sweeps", self.max_sweeps)?;
        put(&mut cli, "sweep-iterations", self.sweep_iterations)?;
        put(&mut cli, "solve-tol", self.solve_tol)?;
        put(&mut cli, "frames", self.frames)?;
        if self.dump_raw {
            cli.set("dump-raw", "true")?;
        }
        layer.merge(&cli);
        Ok(layer)
    }
}

/// Usage error for inputs missing after the config file was merged.
fn require_inputs(layer: &Layer, subcommand: &str) -> std::result::Result<(), clap::Error> {
    let missing = missing_inputs(layer);
    if missing.is_empty() {
        return Ok(());
    }
    let flags = missing.iter().map(|k| format!("--{k}")).collect::<Vec<_>>().join(", ");
    let mut cmd = Cli::command();
    let sub = cmd.find_subcommand_mut(subcommand).expect("known subcommand").clone();
    Err(sub.bin_name(format!("metamorph {subcommand}")).error(
        ErrorKind::MissingRequiredArgument,
        format!("the following required arguments were not provided: {flags}"),
    ))
}

fn load_pair(layer: &Layer, mode: ChannelMode) -> Result<(Image, Image)> {
    let (pa, pb) = (Path::new(layer.get("image-a").unwrap()), Path::new(layer.get("image-b").unwrap()));
    let a = load_image(pa, mode)?;
    let b = load_image(pb, mode)?;
    if a.grid() != b.grid() {
        return Err(CliError::format(pb, format!("size {}x{} differs from image A", b.grid().nx(), b.grid().ny())));
    }
    Ok((a, b))
}

fn append_segmentation(image: &mut Image, path: &Path) -> Result<()> {
    let seg = load_image(path, ChannelMode::Gray)?;
    if seg.grid() != image.grid() {
        return Err(CliError::format(path, "segmentation size differs from the image"));
    }
    image.push_channel(seg.channel(0).clone())?;
    Ok(())
}

fn describe(e: &PairEnergy) -> String {
    format!("density {:e}, higher-order {:e}, matching {:e}, total {:e}", e.density, e.higher_order, e.matching, e.total())
}

fn cmd_run(config: &RunConfig, mut a: Image, mut b: Image) -> Result<()> {
    if let (Some(sa), Some(sb)) = (&config.seg_a, &config.seg_b) {
        append_segmentation(&mut a, sa)?;
        append_segmentation(&mut b, sb)?;
    }
    let result = run_cascadic_with(&a, &b, &config.solver, |level| {
        let r = &level.report;
        let energy = r.sweeps.last().map_or(&r.initial, |s| &s.after_solve);
        eprintln!(
            "K = {}: {} sweeps, {}, energy {:e}",
            level.path.k(),
            r.sweeps.len(),
            if r.converged { "converged" } else { "sweep limit reached" },
            energy.total()
        );
    })?;
    save_outputs(&result, config)?;
    println!("wrote {}", config.out.display());
    Ok(())
}

fn cmd_register(layer: &Layer) -> Result<()> {
    let mode = channel_mode(layer)?;
    let (a, b) = load_pair(layer, mode)?;
    let solver = solver_config(layer, a.grid().h(), mode)?;
    let out = PathBuf::from(layer.get("out").unwrap_or("out"));
    let (a, b) = (presmooth(&a, solver.sigma2), presmooth(&b, solver.sigma2));
    let ops = FemOperators::new(*a.grid());
    let grid: Grid = *a.grid();
    let res = register(&ops, &a, &b, &Deformation::identity(grid), &solver.params, &solver.registration)?;

    let mut trace = String::from("iteration,pair_total\n");
    for (i, e) in res.energy_trace.iter().enumerate() {
        trace.push_str(&format!("{i},{e:e}\n"));
    }
    write_bytes(&out.join("registration.csv"), trace.as_bytes())?;
    save_deformation(&out.join("phi_1.mfd"), &res.deformation)?;
    let phis = std::slice::from_ref(&res.deformation);
    save_image(&out.join("motion_1.ppm"), &motion_image(&res.deformation, 1, max_motion(phis)), ChannelMode::Rgb)?;
    let warped = b.pull_back(|x| res.deformation.apply(x));
    save_image(&out.join(format!("warped.{}", extension(mode))), &warped, mode)?;
    println!("{} iterations{}: {}", res.iterations, if res.stalled { " (stalled)" } else { "" }, describe(&res.energy));
    Ok(())
}

/// Rebuilds the finest path of a run directory, preferring raw dumps.
pub fn load_run(dir: &Path) -> Result<DiscretePath> {
    let cfg = Layer::load(&dir.join("config.txt"))?;
    let mode = channel_mode(&cfg)?;
    let mut deformations = Vec::new();
    while let Ok(true) = dir.join(format!("phi_{}.mfd", deformations.len() + 1)).try_exists() {
        deformations.push(load_deformation(&dir.join(format!("phi_{}.mfd", deformations.len() + 1)))?);
    }
    let k = deformations.len();
    if k == 0 || !k.is_power_of_two() {
        return Err(CliError::format(dir, format!("expected 2^J deformation files, found {k}")));
    }
    let level = dir.join(format!("level_{}", k.trailing_zeros()));
    let images = (0..=k)
        .map(|i| {
            let raw = level.join(format!("u_{i}.mfi"));
            if raw.exists() {
                load_raw_image(&raw)
            } else {
                load_image(&level.join(format!("u_{i}.{}", extension(mode))), mode)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut path = DiscretePath::endpoints(images[0].clone(), images[k].clone())?;
    path.level = k.trailing_zeros() as usize;
    path.images = images;
    path.deformations = deformations;
    if path.images.iter().any(|im| im.grid() != path.deformations[0].grid()) {
        return Err(CliError::format(dir, "images and deformations have different sizes"));
    }
    Ok(path)
}

fn cmd_interpolate(args: &InterpolateArgs) -> Result<()> {
    let path = load_run(&args.run)?;
    if args.frames < path.k() + 1 {
        return Err(CliError::Config(format!("frames must be at least K+1 = {}", path.k() + 1)));
    }
    let mode = channel_mode(&Layer::load(&args.run.join("config.txt"))?)?;
    let out = args.out.clone().unwrap_or_else(|| args.run.join("frames"));
    save_frames(&out, &path, args.frames, mode, args.dump_raw)?;
    println!("wrote {} frames to {}", args.frames, out.display());
    Ok(())
}

fn cmd_validate() -> bool {
    let mut all = true;
    for c in run_checks() {
        println!("{}: {} ({})", c.name, if c.passed { "PASS" } else { "FAIL" }, c.detail);
        all &= c.passed;
    }
    all
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let outcome = match &cli.command {
        Command::Validate => return if cmd_validate() { 0 } else { 1 },
        Command::Interpolate(args) => cmd_interpolate(args),
        Command::Register(args) => args.common.layer().and_then(|layer| match require_inputs(&layer, "register") {
            Ok(()) => cmd_register(&layer),
            Err(usage) => Err(CliError::Usage(usage)),
        }),
        Command::Run(args) => args.layer().and_then(|layer| match require_inputs(&layer, "run") {
            Ok(()) => {
                let mode = channel_mode(&layer)?;
                let (a, b) = load_pair(&layer, mode)?;
                let config = RunConfig::resolve(&layer, a.grid().h())?;
                cmd_run(&config, a, b)
            }
            Err(usage) => Err(CliError::Usage(usage)),
        }),
    };
    match outcome {
        Ok(()) => 0,
        Err(CliError::Usage(e)) => {
            let _ = e.print();
            e.exit_code()
        }
        // invalid flag combinations are usage errors too
        Err(e @ CliError::Config(_)) => {
            eprintln!("error: {e}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
