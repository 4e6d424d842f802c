//! The output directory of a run.
//!
//! ```text
//! out/config.txt           effective configuration
//! out/energy.csv           finest level, one row per sweep and segment
//! out/level_<j>/u_<k>.pgm  path images of every level (ppm for rgb)
//! out/level_<j>/energy.csv
//! out/phi_<k>.mfd          finest deformations
//! out/motion_<k>.ppm       colour wheel of K(Φ_k - 𝟙)
//! out/z_<l>.pgm            accumulated material derivative
//! out/frames/t_<i>.pgm     optional interpolated frames
//! ```
//!
//! With `dump_raw`, every image is also written losslessly as `.mfi`.
//! Segmentation channels go to `seg_<k>.pgm` next to the images. Nothing
//! depends on timing, so reruns are byte-identical.

use std::fmt::Write as _;
use std::path::Path;

use metamorph_core::energy::PathEnergy;
use metamorph_core::geodesic::{accumulated_material_derivative, time_interpolate, AlternationReport, CascadicResult, DiscretePath};
use metamorph_core::Image;

use crate::config::RunConfig;
use crate::error::Result;
use crate::fields::{save_deformation, save_raw_image};
use crate::image_io::{extension, save_image, write_bytes, ChannelMode};
use crate::render::{max_abs, max_motion, motion_image, signed_map};

pub const INVERSION_TOL: f64 = 1e-10;
pub const INVERSION_MAXITER: usize = 50;

pub const CSV_HEADER: &str = "sweep,k,density_term,higher_order_term,matching_term,pair_total,K_times_total";

fn push_rows(out: &mut String, sweep: usize, energy: &PathEnergy) {
    let kf = energy.k() as f64;
    for (i, seg) in energy.segments.iter().enumerate() {
        let total = seg.total();
        let _ = writeln!(
            out,
            "{sweep},{},{:e},{:e},{:e},{:e},{:e}",
            i + 1,
            seg.density,
            seg.higher_order,
            seg.matching,
            total,
            kf * total
        );
    }
}

/// Sweep 0 is the initial path, sweep `s` the path after the `s`-th image solve.
pub fn energy_csv(report: &AlternationReport) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    push_rows(&mut out, 0, &report.initial);
    for rec in &report.sweeps {
        push_rows(&mut out, rec.sweep, &rec.after_solve);
    }
    out
}

/// Writes `image` as a raster (and raw dump) plus its segmentation channel.
pub fn save_path_image(dir: &Path, stem: &str, image: &Image, mode: ChannelMode, dump_raw: bool) -> Result<()> {
    save_image(&dir.join(format!("{stem}.{}", extension(mode))), image, mode)?;
    if image.num_channels() > mode.channels() {
        let seg = Image::gray(image.channel(mode.channels()).clone());
        save_image(&dir.join(format!("seg_{}.pgm", stem.trim_start_matches("u_"))), &seg, ChannelMode::Gray)?;
    }
    if dump_raw {
        save_raw_image(&dir.join(format!("{stem}.mfi")), image)?;
    }
    Ok(())
}

/// Frames at `t_i = i / (count - 1)`.
pub fn save_frames(dir: &Path, path: &DiscretePath, count: usize, mode: ChannelMode, dump_raw: bool) -> Result<()> {
    let last = count.saturating_sub(1).max(1) as f64;
    for i in 0..count {
        let frame = time_interpolate(path, i as f64 / last, INVERSION_TOL, INVERSION_MAXITER)?;
        save_path_image(dir, &format!("t_{i}"), &frame.image, mode, dump_raw)?;
    }
    Ok(())
}

pub fn save_outputs(result: &CascadicResult, config: &RunConfig) -> Result<()> {
    let out = &config.out;
    let (mode, raw) = (config.mode, config.dump_raw);
    write_bytes(&out.join("config.txt"), config.to_config_text().as_bytes())?;

    for (j, level) in result.levels.iter().enumerate() {
        let dir = out.join(format!("level_{}", j + 1));
        for (k, u) in level.path.images.iter().enumerate() {
            save_path_image(&dir, &format!("u_{k}"), u, mode, raw)?;
        }
        write_bytes(&dir.join("energy.csv"), energy_csv(&level.report).as_bytes())?;
    }

    let finest = result.finest();
    let path = &finest.path;
    write_bytes(&out.join("energy.csv"), energy_csv(&finest.report).as_bytes())?;

    let k = path.k();
    let scale = max_motion(&path.deformations);
    for (i, phi) in path.deformations.iter().enumerate() {
        save_deformation(&out.join(format!("phi_{}.mfd", i + 1)), phi)?;
        save_image(&out.join(format!("motion_{}.ppm", i + 1)), &motion_image(phi, k, scale), ChannelMode::Rgb)?;
    }

    let z = (1..=k).map(|l| accumulated_material_derivative(path, l)).collect::<metamorph_core::Result<Vec<_>>>()?;
    let z_scale = max_abs(&z);
    for (i, zl) in z.iter().enumerate() {
        let stem = format!("z_{}", i + 1);
        save_image(&out.join(format!("{stem}.{}", extension(mode))), &signed_map(zl, z_scale), mode)?;
        if raw {
            save_raw_image(&out.join(format!("{stem}.mfi")), zl)?;
        }
    }

    if config.frames > 0 {
        save_frames(&out.join("frames"), path, config.frames, mode, raw)?;
    }
    Ok(())
}
