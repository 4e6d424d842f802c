//! Run configuration: built-in defaults, then a `key = value` file, then
//! command-line flags. Keys are the long flag names without dashes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use metamorph_core::energy::{MaterialParams, Model};
use metamorph_core::geodesic::SolverConfig;
use metamorph_core::geodesic::default_sigma2;

use crate::error::{CliError, Result};
use crate::image_io::ChannelMode;

/// Every key accepted in a config file.
pub const KEYS: &[&str] = &[
    "image-a",
    "image-b",
    "seg-a",
    "seg-b",
    "out",
    "levels",
    "model",
    "gamma",
    "delta",
    "lambda",
    "mu",
    "q",
    "r",
    "s",
    "m",
    "identity-offset",
    "threshold",
    "max-sweeps",
    "sweep-iterations",
    "sigma2",
    "max-iterations",
    "gradient-tolerance",
    "h1-epsilon",
    "solve-tol",
    "mode",
    "frames",
    "weights",
    "dump-raw",
];

fn canonical_key(key: &str) -> Option<&'static str> {
    let key = key.strip_prefix("energy.").unwrap_or(key).replace('_', "-");
    KEYS.iter().copied().find(|k| *k == key)
}

/// Unresolved settings as strings, keyed by canonical name.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Layer(BTreeMap<&'static str, String>);

impl Layer {
    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        let k = canonical_key(key).ok_or_else(|| CliError::Config(format!("unknown key '{key}'")))?;
        self.0.insert(k, value.into());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    /// Values of `other` win.
    pub fn merge(&mut self, other: &Layer) {
        for (k, v) in &other.0 {
            self.0.insert(k, v.clone());
        }
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Layer> {
        let mut layer = Layer::default();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::format(origin, format!("line {}: expected key = value", no + 1)))?;
            layer
                .set(k.trim(), v.trim())
                .map_err(|e| CliError::format(origin, format!("line {}: {e}", no + 1)))?;
        }
        Ok(layer)
    }

    pub fn load(path: &Path) -> Result<Layer> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Layer::parse(&text, path)
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|v| v.parse::<T>().map_err(|e| CliError::Config(format!("{key} = '{v}': {e}"))))
            .transpose()
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.get(key).map(PathBuf::from)
    }
}

fn parse_model(s: &str) -> std::result::Result<Model, String> {
    match s {
        "ogden" => Ok(Model::Ogden),
        "simplified" => Ok(Model::Simplified),
        _ => Err(format!("unknown model '{s}' (expected ogden or simplified)")),
    }
}

fn model_name(m: Model) -> &'static str {
    match m {
        Model::Ogden => "ogden",
        Model::Simplified => "simplified",
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub image_a: PathBuf,
    pub image_b: PathBuf,
    pub seg_a: Option<PathBuf>,
    pub seg_b: Option<PathBuf>,
    pub out: PathBuf,
    pub solver: SolverConfig,
    pub mode: ChannelMode,
    /// Number of interpolated frames; 0 disables frame export.
    pub frames: usize,
    pub dump_raw: bool,
}

/// Model and solver settings shared by `run` and `register`; the grid
/// spacing is needed for the default smoothing.
pub fn solver_config(layer: &Layer, h: f64, mode: ChannelMode) -> Result<SolverConfig> {
    let model = layer.get("model").map(parse_model).transpose().map_err(CliError::Config)?.unwrap_or(Model::Simplified);
    let delta = layer.parsed("delta")?.unwrap_or(1e-2);
    let mut params = match model {
        Model::Simplified => MaterialParams::simplified(layer.parsed("gamma")?.unwrap_or(1e-3), delta)?,
        Model::Ogden => MaterialParams::ogden(
            layer.parsed("lambda")?.unwrap_or(1.0),
            layer.parsed("mu")?.unwrap_or(0.5),
            layer.parsed("q")?.unwrap_or(1.5),
            layer.parsed("r")?.unwrap_or(1.5),
            layer.parsed("s")?.unwrap_or(0.5),
            layer.parsed("gamma")?.unwrap_or(1e-5),
            delta,
        )?,
    };
    if model == Model::Simplified {
        for key in ["lambda", "mu", "q", "r", "s"] {
            if layer.get(key).is_some() {
                return Err(CliError::Config(format!("{key} only applies to the ogden model")));
            }
        }
    }
    if let Some(m) = layer.parsed("m")? {
        params = params.with_order(m)?;
    }
    params.identity_offset = layer.parsed("identity-offset")?.unwrap_or(false);
    if let Some(w) = layer.get("weights") {
        let weights = w
            .split(',')
            .map(|x| x.trim().parse::<f64>().map_err(|e| CliError::Config(format!("weights = '{w}': {e}"))))
            .collect::<Result<Vec<_>>>()?;
        params = params.with_channel_weights(weights)?;
    }

    let sigma2 = layer.parsed("sigma2")?.unwrap_or_else(|| default_sigma2(h, mode == ChannelMode::Rgb));
    let mut solver = SolverConfig::new(params, layer.parsed("levels")?.unwrap_or(2), sigma2);
    if let Some(v) = layer.parsed("threshold")? {
        solver.threshold = v;
    }
    if let Some(v) = layer.parsed("max-sweeps")? {
        solver.max_sweeps = v;
    }
    if let Some(v) = layer.parsed("sweep-iterations")? {
        solver.sweep_iterations = v;
    }
    if let Some(v) = layer.parsed("max-iterations")? {
        solver.registration.max_iterations = v;
    }
    if let Some(v) = layer.parsed("gradient-tolerance")? {
        solver.registration.gradient_tolerance = v;
    }
    if let Some(v) = layer.parsed("h1-epsilon")? {
        solver.registration.h1_epsilon = v;
    }
    if let Some(v) = layer.parsed("solve-tol")? {
        solver.solve.tol = v;
    }
    solver.validate()?;
    Ok(solver)
}

pub fn channel_mode(layer: &Layer) -> Result<ChannelMode> {
    Ok(layer.get("mode").map(str::parse).transpose().map_err(CliError::Config)?.unwrap_or_default())
}

/// Image paths are checked separately so a missing one can be reported as
/// a usage error.
pub fn missing_inputs(layer: &Layer) -> Vec<&'static str> {
    ["image-a", "image-b"].into_iter().filter(|k| layer.get(k).is_none()).collect()
}

impl RunConfig {
    pub fn resolve(layer: &Layer, h: f64) -> Result<RunConfig> {
        let mode = channel_mode(layer)?;
        let solver = solver_config(layer, h, mode)?;
        let require = |key: &str| layer.path(key).ok_or_else(|| CliError::Config(format!("{key} is required")));
        let seg_a = layer.path("seg-a");
        let seg_b = layer.path("seg-b");
        if seg_a.is_some() != seg_b.is_some() {
            return Err(CliError::Config("seg-a and seg-b must be given together".into()));
        }
        let frames = layer.parsed("frames")?.unwrap_or(0);
        let k = 1usize << solver.levels;
        if frames != 0 && frames < k + 1 {
            return Err(CliError::Config(format!("frames must be 0 or at least K+1 = {}", k + 1)));
        }
        Ok(RunConfig {
            image_a: require("image-a")?,
            image_b: require("image-b")?,
            seg_a,
            seg_b,
            out: layer.path("out").unwrap_or_else(|| PathBuf::from("out")),
            solver,
            mode,
            frames,
            dump_raw: layer.parsed("dump-raw")?.unwrap_or(false),
        })
    }

    /// The effective configuration as a config file that reproduces the run.
    pub fn to_config_text(&self) -> String {
        let s = &self.solver;
        let p = &s.params;
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("image-a", self.image_a.display().to_string());
        put("image-b", self.image_b.display().to_string());
        if let (Some(a), Some(b)) = (&self.seg_a, &self.seg_b) {
            put("seg-a", a.display().to_string());
            put("seg-b", b.display().to_string());
        }
        put("out", self.out.display().to_string());
        put("mode", self.mode.name().into());
        put("levels", s.levels.to_string());
        put("model", model_name(p.model).into());
        put("gamma", format!("{:e}", p.gamma));
        put("delta", format!("{:e}", p.delta));
        if p.model == Model::Ogden {
            for (k, v) in [("lambda", p.lambda), ("mu", p.mu), ("q", p.q), ("r", p.r), ("s", p.s)] {
                put(k, format!("{v:e}"));
            }
        }
        put("m", p.m.to_string());
        put("identity-offset", p.identity_offset.to_string());
        if !p.channel_weights.is_empty() {
            put("weights", p.channel_weights.iter().map(|w| format!("{w:e}")).collect::<Vec<_>>().join(","));
        }
        put("threshold", format!("{:e}", s.threshold));
        put("max-sweeps", s.max_sweeps.to_string());
        put("sweep-iterations", s.sweep_iterations.to_string());
        put("sigma2", format!("{:e}", s.sigma2));
        put("max-iterations", s.registration.max_iterations.to_string());
        put("gradient-tolerance", format!("{:e}", s.registration.gradient_tolerance));
        put("h1-epsilon", format!("{:e}", s.registration.h1_epsilon));
        put("solve-tol", format!("{:e}", s.solve.tol));
        put("frames", self.frames.to_string());
        put("dump-raw", self.dump_raw.to_string());
        out
    }
}
