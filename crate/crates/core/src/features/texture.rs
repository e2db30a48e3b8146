//! Local binary patterns and second-order local derivative patterns,
//! pooled over a 3×3 grid of half-size overlapping regions and compressed
//! with a type-II DCT.

use std::cell::RefCell;

use rustdct::DctPlanner;

use super::{LBP_DIM, LDP_DIM};
use crate::imaging::{GrayImage, NEIGHBOURS_8};

const REGIONS_PER_SIDE: usize = 3;
const LDP_DIRECTIONS: [(isize, isize); 4] = [(1, 0), (1, -1), (0, -1), (-1, -1)];

thread_local! {
    static PLANNER: RefCell<DctPlanner<f64>> = RefCell::new(DctPlanner::new());
}

/// Basic 8-neighbour LBP over interior pixels. Bit `i` is set when the
/// `i`-th neighbour (clockwise from top-left) is at least as bright as the
/// centre. Returns `(codes, width, height)` of the interior grid.
pub fn lbp_codes(img: &GrayImage) -> (Vec<u8>, usize, usize) {
    let (w, h) = (img.width(), img.height());
    if w < 3 || h < 3 {
        return (Vec::new(), 0, 0);
    }
    let (cw, ch) = (w - 2, h - 2);
    let mut codes = Vec::with_capacity(cw * ch);
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let c = img.get(x, y);
            let mut code = 0u8;
            for (bit, (dx, dy)) in NEIGHBOURS_8.iter().enumerate() {
                let v = img.get((x as isize + dx) as usize, (y as isize + dy) as usize);
                if v >= c {
                    code |= 1 << bit;
                }
            }
            codes.push(code);
        }
    }
    (codes, cw, ch)
}

/// Second-order LDP codes for the 0°, 45°, 90° and 135° derivative
/// directions. Bit `i` is set when the directional derivative at the centre
/// and at its `i`-th neighbour do not share a strict sign (product ≤ 0).
/// Returns one code plane per direction and the plane dimensions.
pub fn ldp_codes(img: &GrayImage) -> (Vec<Vec<u8>>, usize, usize) {
    let (w, h) = (img.width(), img.height());
    if w < 5 || h < 5 {
        return (vec![Vec::new(); 4], 0, 0);
    }
    let (cw, ch) = (w - 4, h - 4);
    let at = |x: isize, y: isize| img.get(x as usize, y as usize) as i32;
    let planes = LDP_DIRECTIONS
        .iter()
        .map(|&(ox, oy)| {
            let deriv = |x: isize, y: isize| at(x, y) - at(x + ox, y + oy);
            let mut codes = Vec::with_capacity(cw * ch);
            for y in 2..h as isize - 2 {
                for x in 2..w as isize - 2 {
                    let d0 = deriv(x, y);
                    let mut code = 0u8;
                    for (bit, (dx, dy)) in NEIGHBOURS_8.iter().enumerate() {
                        if d0 * deriv(x + dx, y + dy) <= 0 {
                            code |= 1 << bit;
                        }
                    }
                    codes.push(code);
                }
            }
            codes
        })
        .collect();
    (planes, cw, ch)
}

/// 256-bin histograms of `codes` over the 3×3 grid of regions, each region
/// half the plane in each direction with 50% overlap. Each histogram is
/// normalized to unit mass (empty regions stay zero). Output is
/// region-major, 9 × 256 values.
pub fn region_histograms(codes: &[u8], width: usize, height: usize) -> Vec<f64> {
    let mut out = vec![0.0; REGIONS_PER_SIDE * REGIONS_PER_SIDE * 256];
    for ry in 0..REGIONS_PER_SIDE {
        let (y0, y1) = (ry * height / 4, (ry + 2) * height / 4);
        for rx in 0..REGIONS_PER_SIDE {
            let (x0, x1) = (rx * width / 4, (rx + 2) * width / 4);
            let hist = &mut out[(ry * REGIONS_PER_SIDE + rx) * 256..][..256];
            let mut total = 0usize;
            for y in y0..y1 {
                for &c in &codes[y * width + x0..y * width + x1] {
                    hist[c as usize] += 1.0;
                    total += 1;
                }
            }
            if total > 0 {
                hist.iter_mut().for_each(|v| *v /= total as f64);
            }
        }
    }
    out
}

/// First `keep` coefficients of the unnormalized type-II DCT
/// `X_k = Σ_n x_n cos(π (n + ½) k / N)`, zero-padded if `keep > N`.
pub fn dct2_prefix(input: &[f64], keep: usize) -> Vec<f64> {
    let mut buf = input.to_vec();
    if !buf.is_empty() {
        PLANNER.with(|p| p.borrow_mut().plan_dct2(buf.len()).process_dct2(&mut buf));
    }
    buf.resize(keep, 0.0);
    buf.truncate(keep);
    buf
}

pub fn extract_lbp(img: &GrayImage) -> Vec<f64> {
    let (codes, w, h) = lbp_codes(img);
    dct2_prefix(&region_histograms(&codes, w, h), LBP_DIM)
}

pub fn extract_ldp(img: &GrayImage) -> Vec<f64> {
    let (planes, w, h) = ldp_codes(img);
    let concatenated: Vec<f64> =
        planes.iter().flat_map(|codes| region_histograms(codes, w, h)).collect();
    dct2_prefix(&concatenated, LDP_DIM)
}
