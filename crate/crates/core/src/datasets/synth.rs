//! Synthetic signature corpus.
//!
//! Every writer owns a style: a few pen strokes, each a chain of cubic
//! Bézier segments, plus slant, pen width, width modulation, ink tone and
//! ink grain. Genuine signatures redraw the writer's strokes with small
//! control-point jitter and a slight global pose change. A forgery of writer
//! `w` is drawn by another writer tracing `w`'s strokes: larger jitter that
//! grows with the number of strokes, a slow-hand tremor, and the forger's own
//! slant, pen and ink.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{index_corpus, CorpusIndex};
use crate::error::{Error, Result};
use crate::imaging::GrayImage;

const SYNTH_DPI: f64 = 300.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub writers: usize,
    pub genuine_per: usize,
    pub forgeries_per: usize,
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    /// Control-point jitter of genuine signatures, pixels.
    pub genuine_jitter: f64,
    /// Control-point jitter of forgeries, pixels.
    pub forgery_jitter: f64,
    /// Extra forgery jitter per stroke beyond the third.
    pub forgery_jitter_per_stroke: f64,
    /// Peak tremor displacement in forgeries, pixels.
    pub tremor: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            writers: 30,
            genuine_per: 10,
            forgeries_per: 10,
            seed: 0,
            width: 260,
            height: 110,
            genuine_jitter: 1.5,
            forgery_jitter: 3.5,
            forgery_jitter_per_stroke: 0.8,
            tremor: 0.7,
        }
    }
}

#[derive(Clone, Debug)]
struct Style {
    /// Control points per stroke: `3m + 1` points for `m` segments.
    strokes: Vec<Vec<(f64, f64)>>,
    slant: f64,
    pen_width: f64,
    width_wave: (f64, f64),
    ink: f64,
    grain: f64,
}

fn normal(rng: &mut ChaCha8Rng, sd: f64) -> f64 {
    if sd > 0.0 {
        Normal::new(0.0, sd).expect("finite sd").sample(rng)
    } else {
        0.0
    }
}

fn sample_style(rng: &mut ChaCha8Rng, p: &SynthParams) -> Style {
    let (w, h) = (p.width as f64, p.height as f64);
    let stroke_count = rng.gen_range(3..=6);
    let base = h * rng.gen_range(0.45..0.55);
    let mut x = rng.gen_range(0.06..0.14) * w;
    let mut strokes = Vec::with_capacity(stroke_count);
    for _ in 0..stroke_count {
        let segments = rng.gen_range(1..=3);
        let mut pts = vec![(x, base + rng.gen_range(-0.2..0.2) * h)];
        for _ in 0..3 * segments {
            x += rng.gen_range(0.015..0.06) * w;
            pts.push((x, base + rng.gen_range(-0.3..0.3) * h));
        }
        strokes.push(pts);
        x -= rng.gen_range(-0.02..0.05) * w;
    }
    // Fit the whole signature horizontally into the canvas margins.
    let (lo, hi) = strokes.iter().flatten().fold((f64::MAX, f64::MIN), |(a, b), q| (a.min(q.0), b.max(q.0)));
    let (left, right) = (0.08 * w, 0.92 * w);
    if hi > right {
        let s = (right - left) / (hi - lo);
        for q in strokes.iter_mut().flatten() {
            q.0 = left + (q.0 - lo) * s;
        }
    }
    Style {
        strokes,
        slant: rng.gen_range(-0.35..0.35),
        pen_width: rng.gen_range(1.8..4.2),
        width_wave: (rng.gen_range(0.0..0.35), rng.gen_range(0.02..0.15)),
        ink: rng.gen_range(10.0..90.0),
        grain: rng.gen_range(3.0..18.0),
    }
}

struct Render<'a> {
    strokes: Vec<Vec<(f64, f64)>>,
    pen: &'a Style,
    slant: f64,
    tremor: f64,
    tremor_freq: f64,
}

fn bezier(p: &[(f64, f64)], t: f64) -> (f64, f64) {
    let u = 1.0 - t;
    let (a, b, c, d) = (u * u * u, 3.0 * u * u * t, 3.0 * u * t * t, t * t * t);
    (a * p[0].0 + b * p[1].0 + c * p[2].0 + d * p[3].0, a * p[0].1 + b * p[1].1 + c * p[2].1 + d * p[3].1)
}

fn rasterize(r: &Render, p: &SynthParams, rng: &mut ChaCha8Rng) -> Result<GrayImage> {
    let (w, h) = (p.width, p.height);
    let centre_y = h as f64 / 2.0;
    let mut coverage = vec![0.0f64; w * h];
    let mut arc = 0.0;
    for stroke in &r.strokes {
        for seg in stroke.windows(4).step_by(3) {
            let chord: f64 = seg.windows(2).map(|q| (q[1].0 - q[0].0).hypot(q[1].1 - q[0].1)).sum();
            let steps = (chord * 3.0).ceil().max(2.0) as usize;
            let mut prev = bezier(seg, 0.0);
            for s in 0..=steps {
                let t = s as f64 / steps as f64;
                let (mut x, mut y) = bezier(seg, t);
                arc += (x - prev.0).hypot(y - prev.1);
                prev = (x, y);
                x += r.slant * (centre_y - y);
                y += r.tremor * (arc * r.tremor_freq).sin();
                let radius = 0.5 * r.pen.pen_width * (1.0 + r.pen.width_wave.0 * (arc * r.pen.width_wave.1).sin());
                let reach = radius + 1.0;
                let (x0, x1) = ((x - reach).floor().max(0.0) as usize, ((x + reach).ceil() as usize).min(w - 1));
                let (y0, y1) = ((y - reach).floor().max(0.0) as usize, ((y + reach).ceil() as usize).min(h - 1));
                for py in y0..=y1 {
                    for px in x0..=x1 {
                        let d = (px as f64 - x).hypot(py as f64 - y);
                        let c = (radius + 0.5 - d).clamp(0.0, 1.0);
                        let cell = &mut coverage[py * w + px];
                        if c > *cell {
                            *cell = c;
                        }
                    }
                }
            }
        }
    }
    let paper = rng.gen_range(232.0..248.0);
    let pixels = coverage
        .iter()
        .map(|&c| {
            let v = paper + normal(rng, 2.0) + c * (r.pen.ink + normal(rng, r.pen.grain) - paper);
            v.round().clamp(0.0, 255.0) as u8
        })
        .collect();
    Ok(GrayImage::new(w, h, pixels)?.with_dpi(Some(SYNTH_DPI)))
}

fn pose(strokes: &[Vec<(f64, f64)>], p: &SynthParams, rng: &mut ChaCha8Rng, jitter: f64) -> Vec<Vec<(f64, f64)>> {
    let (cx, cy) = (p.width as f64 / 2.0, p.height as f64 / 2.0);
    let angle = rng.gen_range(-1.5f64..1.5).to_radians();
    let scale = rng.gen_range(0.97..1.03);
    let shift = (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
    let (sin, cos) = angle.sin_cos();
    strokes
        .iter()
        .map(|s| {
            s.iter()
                .map(|&(x, y)| {
                    let (dx, dy) = (x - cx, y - cy);
                    (
                        cx + scale * (cos * dx - sin * dy) + shift.0 + normal(rng, jitter),
                        cy + scale * (sin * dx + cos * dy) + shift.1 + normal(rng, jitter),
                    )
                })
                .collect()
        })
        .collect()
}

fn genuine(style: &Style, p: &SynthParams, rng: &mut ChaCha8Rng) -> Result<GrayImage> {
    let strokes = pose(&style.strokes, p, rng, p.genuine_jitter);
    let render = Render { strokes, pen: style, slant: style.slant + normal(rng, 0.02), tremor: 0.0, tremor_freq: 0.0 };
    rasterize(&render, p, rng)
}

fn forgery(target: &Style, forger: &Style, p: &SynthParams, rng: &mut ChaCha8Rng) -> Result<GrayImage> {
    let extra = target.strokes.len().saturating_sub(3) as f64 * p.forgery_jitter_per_stroke;
    let strokes = pose(&target.strokes, p, rng, p.forgery_jitter + extra);
    let render = Render {
        strokes,
        pen: forger,
        slant: forger.slant + normal(rng, 0.02),
        tremor: p.tremor,
        tremor_freq: rng.gen_range(0.4..1.2) * PI / 2.0,
    };
    rasterize(&render, p, rng)
}

/// Writes `root/wNNN/genuine/gMM.png` and `root/wNNN/forgery/fMM.png` and
/// returns the index of the new corpus.
pub fn synth_corpus(root: impl AsRef<Path>, p: &SynthParams) -> Result<CorpusIndex> {
    if p.writers < 3 {
        return Err(Error::Config("a synthetic corpus needs at least 3 writers".into()));
    }
    if p.width < 32 || p.height < 16 {
        return Err(Error::Config("synthetic canvas too small".into()));
    }
    let root = root.as_ref();
    let mut style_rng = ChaCha8Rng::seed_from_u64(p.seed);
    let styles: Vec<Style> = (0..p.writers).map(|_| sample_style(&mut style_rng, p)).collect();
    (0..p.writers).into_par_iter().try_for_each(|w| -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
        rng.set_stream(w as u64 + 1);
        let dir = root.join(format!("w{w:03}"));
        std::fs::create_dir_all(dir.join("genuine"))?;
        std::fs::create_dir_all(dir.join("forgery"))?;
        for g in 0..p.genuine_per {
            genuine(&styles[w], p, &mut rng)?.save_png(dir.join("genuine").join(format!("g{g:02}.png")))?;
        }
        for f in 0..p.forgeries_per {
            let forger = (w + rng.gen_range(1..p.writers)) % p.writers;
            forgery(&styles[w], &styles[forger], p, &mut rng)?
                .save_png(dir.join("forgery").join(format!("f{f:02}.png")))?;
        }
        Ok(())
    })?;
    index_corpus(root)
}
