//! Synthetic intra-writer variations of one signature image: a sinusoidal
//! displacement field, a small affine transform and stroke-edge jitter.
//!
//! Each duplicate is drawn from its own random stream derived from the seed
//! and the duplicate index. A draw whose ink count leaves ±20% of the
//! original, or whose ink box changes by more than 10% in either dimension,
//! is redrawn from the same stream.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{otsu_threshold, GrayImage};

const MAX_DRAWS: usize = 32;
const MAX_INK_CHANGE: f64 = 0.20;
const MAX_BOX_CHANGE: f64 = 0.10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DuplicationParams {
    pub count: usize,
    /// Peak displacement of the warp field, pixels.
    pub warp_amplitude: f64,
    /// Range of warp cycles across the image.
    pub warp_periods: (f64, f64),
    pub max_rotation_deg: f64,
    pub scale_range: (f64, f64),
    pub max_shear: f64,
    /// Chance that a stroke-edge pixel grows or shrinks by one pixel.
    pub ink_jitter: f64,
    pub seed: u64,
}

impl Default for DuplicationParams {
    fn default() -> Self {
        Self {
            count: 20,
            warp_amplitude: 2.5,
            warp_periods: (1.0, 3.0),
            max_rotation_deg: 2.0,
            scale_range: (0.95, 1.05),
            max_shear: 0.03,
            ink_jitter: 0.3,
            seed: 0,
        }
    }
}

impl DuplicationParams {
    /// No perturbation at all: every duplicate equals the input.
    pub fn identity(count: usize) -> Self {
        Self {
            count,
            warp_amplitude: 0.0,
            warp_periods: (1.0, 1.0),
            max_rotation_deg: 0.0,
            scale_range: (1.0, 1.0),
            max_shear: 0.0,
            ink_jitter: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.count >= 1
            && self.warp_amplitude >= 0.0
            && self.warp_periods.0 >= 0.0
            && self.warp_periods.0 <= self.warp_periods.1
            && self.max_rotation_deg >= 0.0
            && self.scale_range.0 > 0.0
            && self.scale_range.0 <= self.scale_range.1
            && self.max_shear >= 0.0
            && (0.0..=1.0).contains(&self.ink_jitter);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid duplication parameters {self:?}")))
        }
    }

    fn is_identity(&self) -> bool {
        self.warp_amplitude == 0.0
            && self.max_rotation_deg == 0.0
            && self.scale_range == (1.0, 1.0)
            && self.max_shear == 0.0
            && self.ink_jitter == 0.0
    }
}

#[derive(Clone, Copy, Debug)]
struct Draw {
    periods: (f64, f64),
    phases: (f64, f64),
    rotation: f64,
    scale: f64,
    shear: f64,
    dilate: bool,
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.gen_range(lo..=hi)
    } else {
        lo
    }
}

impl Draw {
    fn sample(p: &DuplicationParams, rng: &mut ChaCha8Rng) -> Self {
        let r = p.max_rotation_deg.to_radians();
        Self {
            periods: (uniform(rng, p.warp_periods.0, p.warp_periods.1), uniform(rng, p.warp_periods.0, p.warp_periods.1)),
            phases: (uniform(rng, 0.0, 2.0 * PI), uniform(rng, 0.0, 2.0 * PI)),
            rotation: uniform(rng, -r, r),
            scale: uniform(rng, p.scale_range.0, p.scale_range.1),
            shear: uniform(rng, -p.max_shear, p.max_shear),
            dilate: rng.gen_bool(0.5),
        }
    }
}

struct Source<'a> {
    img: &'a GrayImage,
    threshold: u8,
    background: f64,
    ink: usize,
    bbox: (usize, usize),
}

fn ink_stats(img: &GrayImage, threshold: u8) -> Option<(usize, (usize, usize))> {
    let (mut x0, mut y0, mut x1, mut y1, mut n) = (usize::MAX, usize::MAX, 0, 0, 0);
    for y in 0..img.height() {
        for x in 0..img.width() {
            if img.get(x, y) < threshold {
                n += 1;
                x0 = x0.min(x);
                y0 = y0.min(y);
                x1 = x1.max(x);
                y1 = y1.max(y);
            }
        }
    }
    (n > 0).then(|| (n, (x1 - x0 + 1, y1 - y0 + 1)))
}

impl<'a> Source<'a> {
    fn new(img: &'a GrayImage) -> Result<Self> {
        let threshold = otsu_threshold(img);
        let (ink, bbox) = ink_stats(img, threshold).ok_or(Error::EmptyInk)?;
        let mut paper: Vec<u8> = img.pixels().iter().copied().filter(|&v| v >= threshold).collect();
        let background = if paper.is_empty() {
            255.0
        } else {
            let mid = paper.len() / 2;
            *paper.select_nth_unstable(mid).1 as f64
        };
        Ok(Self { img, threshold, background, ink, bbox })
    }

    fn sample(&self, x: f64, y: f64) -> f64 {
        let (w, h) = (self.img.width() as isize, self.img.height() as isize);
        let (fx, fy) = (x.floor(), y.floor());
        let (tx, ty) = (x - fx, y - fy);
        let (ix, iy) = (fx as isize, fy as isize);
        let at = |cx: isize, cy: isize| {
            if cx < 0 || cy < 0 || cx >= w || cy >= h {
                self.background
            } else {
                self.img.get(cx as usize, cy as usize) as f64
            }
        };
        let top = at(ix, iy) * (1.0 - tx) + at(ix + 1, iy) * tx;
        let bottom = at(ix, iy + 1) * (1.0 - tx) + at(ix + 1, iy + 1) * tx;
        top * (1.0 - ty) + bottom * ty
    }
}

fn padding(img: &GrayImage, p: &DuplicationParams) -> usize {
    if p.is_identity() {
        return 0;
    }
    let extent = img.width().max(img.height()) as f64;
    let affine = extent * ((p.scale_range.1 - 1.0).max(0.0) + p.max_rotation_deg.to_radians().sin() + p.max_shear) / 2.0;
    (p.warp_amplitude + affine).ceil() as usize + 1
}

fn render(src: &Source, p: &DuplicationParams, d: &Draw, pad: usize, rng: &mut ChaCha8Rng) -> Result<GrayImage> {
    let (w, h) = (src.img.width(), src.img.height());
    let (cw, ch) = (w + 2 * pad, h + 2 * pad);
    let (cx, cy) = (cw as f64 / 2.0, ch as f64 / 2.0);
    let (sin, cos) = d.rotation.sin_cos();
    // Backward map: canvas pixel → source position.
    let m = [
        [cos / d.scale, (-sin + d.shear * cos) / d.scale],
        [sin / d.scale, (cos + d.shear * sin) / d.scale],
    ];
    let a = p.warp_amplitude;
    let mut out = GrayImage::from_fn(cw, ch, |u, v| {
        let (du, dv) = (u as f64 - cx, v as f64 - cy);
        let wx = a * (2.0 * PI * d.periods.0 * v as f64 / ch as f64 + d.phases.0).sin();
        let wy = a * (2.0 * PI * d.periods.1 * u as f64 / cw as f64 + d.phases.1).sin();
        let sx = cx + m[0][0] * du + m[0][1] * dv + wx - pad as f64;
        let sy = cy + m[1][0] * du + m[1][1] * dv + wy - pad as f64;
        src.sample(sx, sy).round().clamp(0.0, 255.0) as u8
    })?;
    out = out.with_dpi(src.img.dpi());
    if p.ink_jitter > 0.0 {
        jitter_edges(&mut out, src.threshold, d.dilate, p.ink_jitter, rng);
    }
    Ok(out)
}

fn jitter_edges(img: &mut GrayImage, threshold: u8, dilate: bool, prob: f64, rng: &mut ChaCha8Rng) {
    let (w, h) = (img.width(), img.height());
    let snapshot = img.clone();
    let ink = |x: usize, y: usize| snapshot.get(x, y) < threshold;
    for y in 0..h {
        for x in 0..w {
            let neighbours = [
                (x > 0).then(|| (x - 1, y)),
                (x + 1 < w).then(|| (x + 1, y)),
                (y > 0).then(|| (x, y - 1)),
                (y + 1 < h).then(|| (x, y + 1)),
            ];
            let here = ink(x, y);
            if here == dilate {
                continue;
            }
            let edge = neighbours.iter().flatten().any(|&(nx, ny)| ink(nx, ny) != here);
            if !edge || !rng.gen_bool(prob) {
                continue;
            }
            let values = neighbours.iter().flatten().map(|&(nx, ny)| snapshot.get(nx, ny));
            let v = if dilate { values.min() } else { values.max() };
            img.set(x, y, v.unwrap_or(snapshot.get(x, y)));
        }
    }
}

fn acceptable(src: &Source, img: &GrayImage) -> bool {
    let Some((ink, (bw, bh))) = ink_stats(img, src.threshold) else {
        return false;
    };
    let rel = |a: usize, b: usize| (a as f64 - b as f64).abs() / b as f64;
    rel(ink, src.ink) <= MAX_INK_CHANGE && rel(bw, src.bbox.0) <= MAX_BOX_CHANGE && rel(bh, src.bbox.1) <= MAX_BOX_CHANGE
}

fn duplicate_one(src: &Source, p: &DuplicationParams, pad: usize, index: usize) -> Result<GrayImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    rng.set_stream(index as u64 + 1);
    if p.is_identity() {
        return Ok(src.img.clone());
    }
    for _ in 0..MAX_DRAWS {
        let draw = Draw::sample(p, &mut rng);
        let img = render(src, p, &draw, pad, &mut rng)?;
        if acceptable(src, &img) {
            return Ok(img);
        }
    }
    // Warp alone keeps the stroke mass.
    let calm = DuplicationParams {
        max_rotation_deg: 0.0,
        scale_range: (1.0, 1.0),
        max_shear: 0.0,
        ink_jitter: 0.0,
        ..p.clone()
    };
    let draw = Draw::sample(&calm, &mut rng);
    render(src, &calm, &draw, pad, &mut rng)
}

/// `params.count` perturbed copies of a signature image.
pub fn duplicate(img: &GrayImage, params: &DuplicationParams) -> Result<Vec<GrayImage>> {
    params.validate()?;
    let src = Source::new(img)?;
    let pad = padding(img, params);
    (0..params.count).into_par_iter().map(|i| duplicate_one(&src, params, pad, i)).collect()
}

/// Writes `{stem}_dup{NN}.png` for each duplicate.
pub fn dump_duplicates(dir: impl AsRef<Path>, stem: &str, images: &[GrayImage]) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    for (i, img) in images.iter().enumerate() {
        img.save_png(dir.join(format!("{stem}_dup{:02}.png", i + 1)))?;
    }
    Ok(())
}
