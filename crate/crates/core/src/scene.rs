//! Synthetic star-in-noise scenes and pixel block handling.
//!
//! Scenes are 8-bit grayscale, row-major. On disk a scene is a binary PGM
//! (`P5`) plus a sidecar JSON next to it (same stem, `.json` extension)
//! holding the ground truth and generation parameters.

use std::fs;
use std::path::{Path, PathBuf};

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, ImageEncoder};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{Dims, Point, Rect};
use crate::{Error, Result};

pub const STAR_INTENSITY: u8 = 255;

/// A row-major grayscale raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    rows: usize,
    cols: usize,
    pixels: Vec<u8>,
}

impl Raster {
    pub fn new(rows: usize, cols: usize, pixels: Vec<u8>) -> Result<Self> {
        if rows == 0 || cols == 0 || pixels.len() != rows * cols {
            return Err(Error::invalid(format!(
                "raster {rows}x{cols} cannot hold {} pixels",
                pixels.len()
            )));
        }
        Ok(Self { rows, cols, pixels })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Side length; only meaningful for square rasters.
    pub fn side(&self) -> usize {
        self.rows
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    /// Pixel at 1-indexed `(row, col)`.
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[(row - 1) * self.cols + (col - 1)]
    }
}

/// Nearest-neighbor rescale of a square raster: destination index `d` reads
/// source index `floor(d * m / target_side)`.
pub fn resize_to_square(raster: &Raster, target_side: usize) -> Result<Raster> {
    if raster.rows != raster.cols {
        return Err(Error::invalid(format!("cannot resize non-square raster {}x{}", raster.rows, raster.cols)));
    }
    if target_side == 0 {
        return Err(Error::invalid("target side must be positive"));
    }
    let m = raster.rows;
    if m == target_side {
        return Ok(raster.clone());
    }
    let src: Vec<usize> = (0..target_side).map(|d| d * m / target_side).collect();
    let mut pixels = Vec::with_capacity(target_side * target_side);
    for &r in &src {
        let row = &raster.pixels[r * m..(r + 1) * m];
        pixels.extend(src.iter().map(|&c| row[c]));
    }
    Raster::new(target_side, target_side, pixels)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneMeta {
    pub dims: Dims,
    pub target_center: Point,
    pub half_size: usize,
    pub noise_density: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    meta: SceneMeta,
    raster: Raster,
}

impl Scene {
    pub fn dims(&self) -> Dims {
        self.meta.dims
    }

    pub fn target_center(&self) -> Point {
        self.meta.target_center
    }

    pub fn meta(&self) -> &SceneMeta {
        &self.meta
    }

    pub fn raster(&self) -> &Raster {
        &self.raster
    }

    pub fn pixels(&self) -> &[u8] {
        &self.raster.pixels
    }

    pub fn extract_block(&self, rect: &Rect) -> Result<Raster> {
        if !rect.within(self.dims()) {
            return Err(Error::invalid(format!("rect {rect} outside scene {}", self.dims())));
        }
        let cols = self.dims().cols;
        let mut pixels = Vec::with_capacity(rect.height() * rect.width());
        for r in rect.row_lo..=rect.row_hi {
            let start = (r - 1) * cols + (rect.col_lo - 1);
            pixels.extend_from_slice(&self.raster.pixels[start..start + rect.width()]);
        }
        Raster::new(rect.height(), rect.width(), pixels)
    }

    /// Sidecar path for a PGM path: same stem, `.json`.
    pub fn sidecar_path(pgm: &Path) -> PathBuf {
        pgm.with_extension("json")
    }

    pub fn save(&self, pgm: &Path) -> Result<()> {
        let file = fs::File::create(pgm)?;
        let encoder = PnmEncoder::new(std::io::BufWriter::new(file))
            .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary));
        encoder.write_image(
            &self.raster.pixels,
            self.dims().cols as u32,
            self.dims().rows as u32,
            ExtendedColorType::L8,
        )?;
        fs::write(Self::sidecar_path(pgm), serde_json::to_string_pretty(&self.meta)? + "\n")?;
        Ok(())
    }

    pub fn load(pgm: &Path) -> Result<Scene> {
        let meta: SceneMeta = serde_json::from_slice(&fs::read(Self::sidecar_path(pgm))?)?;
        let img = image::open(pgm)?.into_luma8();
        let (w, h) = img.dimensions();
        if (h as usize, w as usize) != (meta.dims.rows, meta.dims.cols) {
            return Err(Error::invalid(format!(
                "PGM is {h}x{w} but sidecar says {}",
                meta.dims
            )));
        }
        let raster = Raster::new(h as usize, w as usize, img.into_raw())?;
        Ok(Scene { meta, raster })
    }
}

/// Pixels lit by an 8-armed star of arm length `half_size` centered at `center`:
/// the horizontal, vertical and both diagonal lines through it.
pub fn star_pixels(center: Point, half_size: usize) -> impl Iterator<Item = Point> {
    let h = half_size as isize;
    let (r0, c0) = (center.row as isize, center.col as isize);
    (-h..=h).flat_map(move |dr| {
        (-h..=h).filter_map(move |dc| {
            let on_arm = dr == 0 || dc == 0 || dr.abs() == dc.abs();
            on_arm.then(|| Point::new((r0 + dr) as usize, (c0 + dc) as usize))
        })
    })
}

/// Number of pixels in [`star_pixels`]: eight arms of `half_size` plus the center.
pub fn star_pixel_count(half_size: usize) -> usize {
    8 * half_size + 1
}

/// Renders a star at `center` on a black background, then applies salt and
/// pepper noise: every pixel independently becomes 0 with probability
/// `noise_density / 2` or 255 with probability `noise_density / 2`.
pub fn generate_star_scene(
    dims: Dims,
    center: Point,
    half_size: usize,
    noise_density: f64,
    seed: u64,
) -> Result<Scene> {
    let fits = |c: usize, n: usize| c > half_size && c + half_size <= n;
    if !fits(center.row, dims.rows) || !fits(center.col, dims.cols) {
        return Err(Error::invalid(format!(
            "star of half size {half_size} at ({}, {}) does not fit in {dims}",
            center.row, center.col
        )));
    }
    if !(0.0..1.0).contains(&noise_density) {
        return Err(Error::invalid(format!("noise density {noise_density} outside [0, 1)")));
    }
    let mut pixels = vec![0u8; dims.pixel_count()];
    for p in star_pixels(center, half_size) {
        pixels[(p.row - 1) * dims.cols + (p.col - 1)] = STAR_INTENSITY;
    }
    if noise_density > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let half = noise_density / 2.0;
        for px in pixels.iter_mut() {
            let u: f64 = rng.gen();
            if u < half {
                *px = 0;
            } else if u < noise_density {
                *px = 255;
            }
        }
    }
    Ok(Scene {
        meta: SceneMeta { dims, target_center: center, half_size, noise_density, seed },
        raster: Raster::new(dims.rows, dims.cols, pixels)?,
    })
}
