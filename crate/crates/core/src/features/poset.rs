//! Lattice-probe transition counts on an equimass grid over the skeleton.
//!
//! The skeleton is split into 10 horizontal × 16 vertical bands holding equal
//! ink mass. Inside each cell, eight 2×2 lattice probes anchored at the
//! top-left pixel of the window are counted:
//!
//! | probe | fires when |
//! |-------|------------|
//! | 0 horizontal | anchor and right neighbour are ink |
//! | 1 vertical | anchor and lower neighbour are ink |
//! | 2 diagonal | anchor and lower-right neighbour are ink |
//! | 3 anti-diagonal | right and lower neighbours are ink |
//! | 4..8 corners | exactly three of the four window pixels are ink, the missing one being top-left, top-right, bottom-left, bottom-right |
//!
//! Output index is `cell * 8 + probe` with cells in row-major order.

use super::POSET_DIM;
use crate::imaging::BinaryImage;

pub const POSET_CELLS_Y: usize = 10;
pub const POSET_CELLS_X: usize = 16;
pub const POSET_PROBES: usize = 8;

/// Probe index under a 180° rotation of the image.
pub const ROTATE_180: [usize; POSET_PROBES] = [0, 1, 2, 3, 7, 6, 5, 4];

pub fn extract_poset(skeleton: &BinaryImage) -> Vec<f64> {
    let (w, h) = (skeleton.width(), skeleton.height());
    let mut out = vec![0.0; POSET_CELLS_X * POSET_CELLS_Y * POSET_PROBES];

    let mut col_mass = vec![0.0; w];
    let mut row_mass = vec![0.0; h];
    for (x, y) in skeleton.ink_pixels() {
        col_mass[x] += 1.0;
        row_mass[y] += 1.0;
    }
    let col_band = equimass_bands(&col_mass, POSET_CELLS_X);
    let row_band = equimass_bands(&row_mass, POSET_CELLS_Y);

    let px = |x: usize, y: usize| x < w && y < h && skeleton.get(x, y);
    for y in 0..h {
        for x in 0..w {
            let (tl, tr, bl, br) = (px(x, y), px(x + 1, y), px(x, y + 1), px(x + 1, y + 1));
            let cell = row_band[y] * POSET_CELLS_X + col_band[x];
            let bins = &mut out[cell * POSET_PROBES..][..POSET_PROBES];
            bins[0] += (tl && tr) as u8 as f64;
            bins[1] += (tl && bl) as u8 as f64;
            bins[2] += (tl && br) as u8 as f64;
            bins[3] += (tr && bl) as u8 as f64;
            if [tl, tr, bl, br].iter().filter(|&&b| b).count() == 3 {
                let missing = [!tl, !tr, !bl, !br].iter().position(|&m| m).unwrap();
                bins[4 + missing] += 1.0;
            }
        }
    }
    debug_assert_eq!(out.len(), POSET_DIM);
    out
}

/// Band index of every position: the position's mid-mass coordinate
/// (mass before it plus half its own) scaled to `bands` equal shares.
/// Massless profiles fall back to equal-width bands.
fn equimass_bands(mass: &[f64], bands: usize) -> Vec<usize> {
    let total: f64 = mass.iter().sum();
    let n = mass.len();
    let mut before = 0.0;
    mass.iter()
        .enumerate()
        .map(|(i, &m)| {
            let pos = if total > 0.0 { (before + m / 2.0) / total } else { (i as f64 + 0.5) / n as f64 };
            before += m;
            ((pos * bands as f64) as usize).min(bands - 1)
        })
        .collect()
}
