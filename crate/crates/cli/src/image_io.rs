//! Loading and saving images as nodal fields, one node per pixel.
//!
//! Pixel `(column c, row r)` becomes node `(c, r)`, so the second coordinate
//! grows downwards as in the file.

use std::path::Path;
use std::str::FromStr;

use metamorph_core::{Grid, Image, ScalarField};

use crate::error::{CliError, Result};
use crate::pnm::Pnm;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ChannelMode {
    #[default]
    Gray,
    Rgb,
}

impl ChannelMode {
    pub fn channels(self) -> usize {
        match self {
            ChannelMode::Gray => 1,
            ChannelMode::Rgb => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ChannelMode::Gray => "gray",
            ChannelMode::Rgb => "rgb",
        }
    }
}

impl FromStr for ChannelMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "gray" => Ok(ChannelMode::Gray),
            "rgb" => Ok(ChannelMode::Rgb),
            _ => Err(format!("unknown channel mode '{s}' (expected gray or rgb)")),
        }
    }
}

pub fn read_pnm(path: &Path) -> Result<Pnm> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Pnm::decode(&bytes).map_err(|e| CliError::format(path, e.0))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

/// Converts a raster to `mode`: color files are reduced to gray with Rec. 601
/// luma weights, gray files are replicated to three channels.
pub fn pnm_to_image(pnm: &Pnm, mode: ChannelMode) -> Result<Image> {
    let grid = Grid::new(pnm.width, pnm.height)?;
    let pixels = pnm.width * pnm.height;
    let sample = |p: usize, c: usize| pnm.unit(p * pnm.channels + c);
    let channel = |f: &dyn Fn(usize) -> f64| ScalarField::new(grid, (0..pixels).map(f).collect());
    let channels = match (mode, pnm.channels) {
        (ChannelMode::Gray, 1) => vec![channel(&|p| sample(p, 0))?],
        (ChannelMode::Gray, _) => {
            vec![channel(&|p| 0.299 * sample(p, 0) + 0.587 * sample(p, 1) + 0.114 * sample(p, 2))?]
        }
        (ChannelMode::Rgb, 1) => (0..3).map(|_| channel(&|p| sample(p, 0))).collect::<std::result::Result<_, _>>()?,
        (ChannelMode::Rgb, _) => (0..3).map(|c| channel(&|p| sample(p, c))).collect::<std::result::Result<_, _>>()?,
    };
    Ok(Image::new(channels)?)
}

/// Loads a P5/P6 file with intensities mapped linearly to `[0,1]`.
pub fn load_image(path: &Path, mode: ChannelMode) -> Result<Image> {
    pnm_to_image(&read_pnm(path)?, mode)
}

/// 8-bit raster of the first channel (gray) or the first three (color).
pub fn image_to_pnm(image: &Image, mode: ChannelMode) -> Pnm {
    let grid = image.grid();
    let channels = mode.channels().min(image.num_channels());
    let channels = if channels >= 3 { 3 } else { 1 };
    let mut values = Vec::with_capacity(grid.num_nodes() * channels);
    for node in 0..grid.num_nodes() {
        for c in 0..channels {
            values.push(image.channel(c).values()[node]);
        }
    }
    Pnm::from_unit(grid.nx(), grid.ny(), channels, &values)
}

pub fn save_image(path: &Path, image: &Image, mode: ChannelMode) -> Result<()> {
    write_bytes(path, &image_to_pnm(image, mode).encode())
}

/// File extension matching [`image_to_pnm`].
pub fn extension(mode: ChannelMode) -> &'static str {
    match mode {
        ChannelMode::Gray => "pgm",
        ChannelMode::Rgb => "ppm",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gray(width: usize, height: usize, samples: Vec<u16>) -> Pnm {
        Pnm { width, height, channels: 1, maxval: 255, samples }
    }

    #[test]
    fn black_and_white() {
        let black = pnm_to_image(&gray(3, 2, vec![0; 6]), ChannelMode::Gray).unwrap();
        assert!(black.channel(0).values().iter().all(|&v| v == 0.0));
        let white = pnm_to_image(&gray(3, 2, vec![255; 6]), ChannelMode::Gray).unwrap();
        assert!(white.channel(0).values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn pixel_order_is_row_major() {
        let im = pnm_to_image(&gray(3, 2, vec![0, 51, 102, 153, 204, 255]), ChannelMode::Gray).unwrap();
        let g = im.grid();
        assert_eq!((g.nx(), g.ny()), (3, 2));
        assert_eq!(im.channel(0).values()[g.node_index(1, 1)], 0.8);
    }

    #[test]
    fn mode_conversion() {
        let color =
            Pnm { width: 2, height: 2, channels: 3, maxval: 255, samples: vec![255, 0, 0, 0, 0, 255, 0, 0, 0, 0, 0, 0] };
        let g = pnm_to_image(&color, ChannelMode::Gray).unwrap();
        assert!((g.channel(0).values()[0] - 0.299).abs() < 1e-15);
        let rgb = pnm_to_image(&gray(2, 2, vec![0, 255, 255, 0]), ChannelMode::Rgb).unwrap();
        assert_eq!(rgb.num_channels(), 3);
        assert!(rgb.channels().iter().all(|c| c.values() == [0.0, 1.0, 1.0, 0.0]));
    }

    #[test]
    fn save_load_round_trip_within_half_a_level() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ramp.pgm");
        let grid = Grid::new(17, 9).unwrap();
        let im = Image::gray(ScalarField::from_fn(grid, |p| (0.5 + 0.5 * (7.0 * p.x + 3.0 * p.y).sin()).clamp(0.0, 1.0)));
        save_image(&path, &im, ChannelMode::Gray).unwrap();
        let back = load_image(&path, ChannelMode::Gray).unwrap();
        for (a, b) in im.channel(0).values().iter().zip(back.channel(0).values()) {
            assert!((a - b).abs() <= 1.0 / 510.0 + 1e-15);
        }
    }
}
