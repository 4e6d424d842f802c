//! Lossless binary files for deformations and images.
//!
//! Deformation (`MFD1`): magic, `u32` LE `nx`, `ny`, then `nx·ny` LE `f64`
//! x-displacements row-major, then the y-displacements.
//!
//! Raw image (`MFI1`): magic, `u32` LE `nx`, `ny`, channel count, then each
//! channel's `nx·ny` LE `f64` values row-major.

use std::path::Path;

use metamorph_core::{Deformation, Grid, Image, ScalarField, VectorField};

use crate::error::{CliError, Result};
use crate::image_io::write_bytes;

const DEFORMATION_MAGIC: &[u8; 4] = b"MFD1";
const IMAGE_MAGIC: &[u8; 4] = b"MFI1";

fn push_u32(out: &mut Vec<u8>, v: usize) {
    out.extend(u32::try_from(v).expect("dimension fits in u32").to_le_bytes());
}

fn push_values(out: &mut Vec<u8>, values: &[f64]) {
    for v in values {
        out.extend(v.to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or("file is truncated")?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> std::result::Result<usize, String> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn values(&mut self, n: usize) -> std::result::Result<Vec<f64>, String> {
        let len = n.checked_mul(8).ok_or("file is truncated")?;
        Ok(self.take(len)?.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }

    fn finish(&self) -> std::result::Result<(), String> {
        if self.pos == self.bytes.len() {
            Ok(())
        } else {
            Err(format!("{} trailing bytes", self.bytes.len() - self.pos))
        }
    }
}

pub fn encode_deformation(phi: &Deformation) -> Vec<u8> {
    let g = phi.grid();
    let mut out = Vec::with_capacity(12 + 16 * g.num_nodes());
    out.extend(DEFORMATION_MAGIC);
    push_u32(&mut out, g.nx());
    push_u32(&mut out, g.ny());
    push_values(&mut out, phi.displacement().x.values());
    push_values(&mut out, phi.displacement().y.values());
    out
}

pub fn decode_deformation(bytes: &[u8]) -> std::result::Result<Deformation, String> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != DEFORMATION_MAGIC {
        return Err("not a deformation file (bad magic)".into());
    }
    let (nx, ny) = (r.u32()?, r.u32()?);
    let grid = Grid::new(nx, ny).map_err(|e| e.to_string())?;
    let n = grid.num_nodes();
    let x = r.values(n)?;
    let y = r.values(n)?;
    r.finish()?;
    let field = |v| ScalarField::new(grid, v).map_err(|e| e.to_string());
    let d = VectorField::new(field(x)?, field(y)?).map_err(|e| e.to_string())?;
    Deformation::from_displacement(d).map_err(|e| e.to_string())
}

pub fn encode_image(image: &Image) -> Vec<u8> {
    let g = image.grid();
    let mut out = Vec::with_capacity(16 + 8 * g.num_nodes() * image.num_channels());
    out.extend(IMAGE_MAGIC);
    push_u32(&mut out, g.nx());
    push_u32(&mut out, g.ny());
    push_u32(&mut out, image.num_channels());
    for ch in image.channels() {
        push_values(&mut out, ch.values());
    }
    out
}

pub fn decode_image(bytes: &[u8]) -> std::result::Result<Image, String> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != IMAGE_MAGIC {
        return Err("not a raw image file (bad magic)".into());
    }
    let (nx, ny, channels) = (r.u32()?, r.u32()?, r.u32()?);
    let grid = Grid::new(nx, ny).map_err(|e| e.to_string())?;
    let fields = (0..channels)
        .map(|_| ScalarField::new(grid, r.values(grid.num_nodes())?).map_err(|e| e.to_string()))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    r.finish()?;
    Image::new(fields).map_err(|e| e.to_string())
}

pub fn save_deformation(path: &Path, phi: &Deformation) -> Result<()> {
    write_bytes(path, &encode_deformation(phi))
}

pub fn load_deformation(path: &Path) -> Result<Deformation> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode_deformation(&bytes).map_err(|m| CliError::format(path, m))
}

pub fn save_raw_image(path: &Path, image: &Image) -> Result<()> {
    write_bytes(path, &encode_image(image))
}

pub fn load_raw_image(path: &Path) -> Result<Image> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode_image(&bytes).map_err(|m| CliError::format(path, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use metamorph_core::Point;
    use proptest::prelude::*;

    fn bubble(g: Grid, a: f64) -> Deformation {
        Deformation::from_displacement_masked(VectorField::from_fn(g, |p| {
            Point::new(a * (5.0 * p.x).sin() * p.y, -a * p.x * (3.0 * p.y).cos())
        }))
    }

    #[test]
    fn deformation_layout() {
        let g = Grid::new(3, 2).unwrap();
        let bytes = encode_deformation(&Deformation::identity(g));
        assert_eq!(bytes.len(), 4 + 8 + 16 * 6);
        assert_eq!(&bytes[..12], b"MFD1\x03\x00\x00\x00\x02\x00\x00\x00");
    }

    #[test]
    fn rejects_bad_files() {
        let g = Grid::new(4, 4).unwrap();
        let bytes = encode_deformation(&bubble(g, 0.1));
        assert!(decode_deformation(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode_deformation(&extra).is_err());
        let mut magic = bytes.clone();
        magic[3] = b'2';
        assert!(decode_deformation(&magic).is_err());
        // nonzero boundary displacement
        let mut boundary = bytes;
        boundary[12..20].copy_from_slice(&0.5f64.to_le_bytes());
        assert!(decode_deformation(&boundary).is_err());
    }

    proptest! {
        #[test]
        fn deformation_round_trip_is_bit_exact(nx in 2usize..9, ny in 2usize..9, a in -1.0f64..1.0) {
            let phi = bubble(Grid::new(nx, ny).unwrap(), a);
            let back = decode_deformation(&encode_deformation(&phi)).unwrap();
            prop_assert_eq!(encode_deformation(&back), encode_deformation(&phi));
            prop_assert_eq!(back, phi);
        }

        #[test]
        fn image_round_trip_is_bit_exact(nx in 2usize..7, ny in 2usize..7, channels in 1usize..5, seed in any::<u32>()) {
            let g = Grid::new(nx, ny).unwrap();
            let fields = (0..channels)
                .map(|c| ScalarField::from_fn(g, |p| ((seed as f64) * 1e-3 + c as f64 + 13.0 * p.x * p.y).sin()))
                .collect();
            let im = Image::new(fields).unwrap();
            prop_assert_eq!(decode_image(&encode_image(&im)).unwrap(), im);
        }
    }
}
