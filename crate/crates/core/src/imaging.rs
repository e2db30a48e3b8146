//! Raster decoding and the binary-image substrate shared by every extractor:
//! Otsu binarization, tight cropping, Zhang-Suen thinning and 8-connected
//! component labelling.

use std::collections::VecDeque;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const INCHES_PER_METER: f64 = 39.370_078_740_157_48;

/// 8-bit gray raster, 0 = black ink, 255 = white paper.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
    dpi: Option<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyImage);
        }
        assert_eq!(pixels.len(), width * height, "pixel buffer does not match dimensions");
        Ok(Self { width, height, pixels, dpi: None })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> u8) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn with_dpi(mut self, dpi: Option<f64>) -> Self {
        self.dpi = dpi;
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dpi(&self) -> Option<f64> {
        self.dpi
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        self.pixels[y * self.width + x] = value;
    }

    /// Sub-image covering `bbox`.
    pub fn crop(&self, bbox: BBox) -> GrayImage {
        assert!(bbox.x + bbox.w <= self.width && bbox.y + bbox.h <= self.height);
        let mut pixels = Vec::with_capacity(bbox.w * bbox.h);
        for y in bbox.y..bbox.y + bbox.h {
            let row = y * self.width;
            pixels.extend_from_slice(&self.pixels[row + bbox.x..row + bbox.x + bbox.w]);
        }
        GrayImage { width: bbox.w, height: bbox.h, pixels, dpi: self.dpi }
    }

    pub fn inverted(&self) -> GrayImage {
        GrayImage {
            pixels: self.pixels.iter().map(|&v| 255 - v).collect(),
            ..self.clone()
        }
    }

    /// Writes an 8-bit grayscale PNG, recording the dpi in a pHYs chunk when known.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = File::create(path.as_ref())?;
        let mut encoder = png::Encoder::new(BufWriter::new(file), self.width as u32, self.height as u32);
        encoder.set_color(png::ColorType::Grayscale);
        encoder.set_depth(png::BitDepth::Eight);
        if let Some(dpi) = self.dpi {
            let ppm = (dpi * INCHES_PER_METER).round() as u32;
            encoder.set_pixel_dims(Some(png::PixelDimensions {
                xppu: ppm,
                yppu: ppm,
                unit: png::Unit::Meter,
            }));
        }
        let encode_err = |e: png::EncodingError| Error::Io(std::io::Error::other(e));
        let mut writer = encoder.write_header().map_err(encode_err)?;
        writer.write_image_data(&self.pixels).map_err(encode_err)?;
        writer.finish().map_err(encode_err)?;
        Ok(())
    }
}

/// Boolean ink mask, row-major, `true` = ink.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    ink: Vec<bool>,
}

impl BinaryImage {
    pub fn new(width: usize, height: usize, ink: Vec<bool>) -> Self {
        assert_eq!(ink.len(), width * height, "mask does not match dimensions");
        Self { width, height, ink }
    }

    pub fn blank(width: usize, height: usize) -> Self {
        Self::new(width, height, vec![false; width * height])
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut ink = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                ink.push(f(x, y));
            }
        }
        Self::new(width, height, ink)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.ink
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.ink[y * self.width + x]
    }

    /// Out-of-range coordinates read as background.
    #[inline]
    pub fn get_signed(&self, x: isize, y: isize) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.ink[y as usize * self.width + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.ink[y * self.width + x] = value;
    }

    pub fn ink_count(&self) -> usize {
        self.ink.iter().filter(|&&b| b).count()
    }

    /// Iterator over `(x, y)` of ink pixels in raster order.
    pub fn ink_pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.ink
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i % w, i / w))
    }

    /// Number of ink pixels among the 8 neighbours of `(x, y)`.
    pub fn ink_neighbours(&self, x: usize, y: usize) -> usize {
        let (x, y) = (x as isize, y as isize);
        NEIGHBOURS_8
            .iter()
            .filter(|(dx, dy)| self.get_signed(x + dx, y + dy))
            .count()
    }

    pub fn crop(&self, bbox: BBox) -> BinaryImage {
        let mut ink = Vec::with_capacity(bbox.w * bbox.h);
        for y in bbox.y..bbox.y + bbox.h {
            let row = y * self.width;
            ink.extend_from_slice(&self.ink[row + bbox.x..row + bbox.x + bbox.w]);
        }
        BinaryImage::new(bbox.w, bbox.h, ink)
    }
}

/// Axis-aligned box in source pixel coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BBox {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

pub(crate) const NEIGHBOURS_8: [(isize, isize); 8] =
    [(-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0)];

/// Decodes a raster file. Color inputs are reduced to gray with ITU-R BT.709 luma.
pub fn load_signature(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let unreadable = |reason: String| Error::UnreadableImage { path: path.to_path_buf(), reason };
    let decoded = image::ImageReader::open(path)
        .map_err(|e| unreadable(e.to_string()))?
        .with_guessed_format()
        .map_err(|e| unreadable(e.to_string()))?
        .decode()
        .map_err(|e| unreadable(e.to_string()))?;
    let luma = decoded.to_luma8();
    let (w, h) = (luma.width() as usize, luma.height() as usize);
    if w == 0 || h == 0 {
        return Err(Error::EmptyImage);
    }
    let dpi = png_dpi(path);
    Ok(GrayImage::new(w, h, luma.into_raw())?.with_dpi(dpi))
}

fn png_dpi(path: &Path) -> Option<f64> {
    let file = File::open(path).ok()?;
    let reader = png::Decoder::new(BufReader::new(file)).read_info().ok()?;
    match reader.info().pixel_dims {
        Some(png::PixelDimensions { xppu, unit: png::Unit::Meter, .. }) if xppu > 0 => {
            Some((xppu as f64 / INCHES_PER_METER).round())
        }
        _ => None,
    }
}

/// Otsu threshold: the smallest gray level of the upper (paper) class.
/// Pixels strictly below it are ink. Returns 0 for single-valued images.
pub fn otsu_threshold(img: &GrayImage) -> u8 {
    let mut hist = [0u64; 256];
    for &v in img.pixels() {
        hist[v as usize] += 1;
    }
    let total = img.pixels().len() as f64;
    let sum_all: f64 = hist.iter().enumerate().map(|(v, &c)| v as f64 * c as f64).sum();

    let mut best = None::<(f64, usize)>;
    let (mut w0, mut sum0) = (0.0, 0.0);
    for t in 0..255 {
        w0 += hist[t] as f64;
        sum0 += t as f64 * hist[t] as f64;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let m0 = sum0 / w0;
        let m1 = (sum_all - sum0) / w1;
        let between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if best.map_or(true, |(b, _)| between > b) {
            best = Some((between, t));
        }
    }
    best.map_or(0, |(_, t)| (t + 1) as u8)
}

pub fn binarize(img: &GrayImage) -> Result<BinaryImage> {
    let threshold = otsu_threshold(img);
    let ink: Vec<bool> = img.pixels().iter().map(|&v| v < threshold).collect();
    if !ink.iter().any(|&b| b) {
        return Err(Error::EmptyInk);
    }
    Ok(BinaryImage::new(img.width(), img.height(), ink))
}

/// Tight bounding box of the ink, `None` when the mask is blank.
pub fn ink_bbox(img: &BinaryImage) -> Option<BBox> {
    let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
    for (x, y) in img.ink_pixels() {
        x0 = x0.min(x);
        y0 = y0.min(y);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    (x0 != usize::MAX).then(|| BBox { x: x0, y: y0, w: x1 - x0 + 1, h: y1 - y0 + 1 })
}

pub fn crop_bbox(img: &BinaryImage) -> Result<(BinaryImage, BBox)> {
    let bbox = ink_bbox(img).ok_or(Error::EmptyInk)?;
    Ok((img.crop(bbox), bbox))
}

/// Zhang-Suen thinning to a one-pixel-wide 8-connected skeleton.
pub fn thin(img: &BinaryImage) -> BinaryImage {
    // One pixel of background padding so every pixel has 8 neighbours.
    let (w, h) = (img.width() + 2, img.height() + 2);
    let mut grid = vec![false; w * h];
    for (x, y) in img.ink_pixels() {
        grid[(y + 1) * w + x + 1] = true;
    }

    let mut marked = Vec::new();
    loop {
        let mut changed = false;
        for step in 0..2 {
            marked.clear();
            for y in 1..h - 1 {
                for x in 1..w - 1 {
                    if grid[y * w + x] && zhang_suen_removable(&grid, w, x, y, step) {
                        marked.push(y * w + x);
                    }
                }
            }
            changed |= !marked.is_empty();
            for &i in &marked {
                grid[i] = false;
            }
        }
        if !changed {
            break;
        }
    }

    BinaryImage::from_fn(img.width(), img.height(), |x, y| grid[(y + 1) * w + x + 1])
}

fn zhang_suen_removable(grid: &[bool], w: usize, x: usize, y: usize, step: usize) -> bool {
    let at = |dx: isize, dy: isize| grid[(y as isize + dy) as usize * w + (x as isize + dx) as usize];
    // P2..P9 clockwise from north.
    let p = [
        at(0, -1),
        at(1, -1),
        at(1, 0),
        at(1, 1),
        at(0, 1),
        at(-1, 1),
        at(-1, 0),
        at(-1, -1),
    ];
    let b = p.iter().filter(|&&v| v).count();
    if !(2..=6).contains(&b) {
        return false;
    }
    let a = (0..8).filter(|&i| !p[i] && p[(i + 1) % 8]).count();
    if a != 1 {
        return false;
    }
    let (p2, p4, p6, p8) = (p[0], p[2], p[4], p[6]);
    if step == 0 {
        !(p2 && p4 && p6) && !(p4 && p6 && p8)
    } else {
        !(p2 && p4 && p8) && !(p2 && p6 && p8)
    }
}

/// 8-connected component labels: 0 on background, 1..=count on ink in raster
/// order of each component's first pixel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Components {
    pub count: usize,
    pub labels: Vec<u32>,
}

pub fn connected_components(img: &BinaryImage) -> Components {
    let (w, h) = (img.width(), img.height());
    let mut labels = vec![0u32; w * h];
    let mut count = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !img.as_slice()[start] || labels[start] != 0 {
            continue;
        }
        count += 1;
        labels[start] = count;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for (dx, dy) in NEIGHBOURS_8 {
                let (nx, ny) = (x + dx, y + dy);
                if img.get_signed(nx, ny) {
                    let j = ny as usize * w + nx as usize;
                    if labels[j] == 0 {
                        labels[j] = count;
                        queue.push_back(j);
                    }
                }
            }
        }
    }
    Components { count: count as usize, labels }
}
