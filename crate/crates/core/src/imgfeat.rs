//! General aesthetic features computed from decoded RGB pixels.
//!
//! All moments are population moments. Luminance is Rec.601
//! (`0.299 R + 0.587 G + 0.114 B`) scaled to `[0, 1]`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelBuffer {
    width: u32,
    height: u32,
    pixels: Vec<[u8; 3]>,
}

impl PixelBuffer {
    pub fn new(width: u32, height: u32, pixels: Vec<[u8; 3]>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput("image dimensions must be positive".into()));
        }
        if width as usize * height as usize != pixels.len() {
            return Err(Error::InvalidInput(format!(
                "{width}x{height} image needs {} pixels, got {}",
                width as usize * height as usize,
                pixels.len()
            )));
        }
        Ok(PixelBuffer { width, height, pixels })
    }

    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Result<Self> {
        Self::new(width, height, vec![rgb; width as usize * height as usize])
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> [u8; 3]) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Row-major pixels.
    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }

    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        self.pixels[(y * self.width + x) as usize]
    }

    pub fn to_png(&self) -> Vec<u8> {
        use image::{ImageBuffer, ImageFormat, Rgb};
        let raw: Vec<u8> = self.pixels.iter().flatten().copied().collect();
        let buf: ImageBuffer<Rgb<u8>, _> =
            ImageBuffer::from_raw(self.width, self.height, raw).expect("dimensions checked at construction");
        let mut out = std::io::Cursor::new(Vec::new());
        buf.write_to(&mut out, ImageFormat::Png).expect("PNG encoding to memory");
        out.into_inner()
    }
}

/// Decodes any supported raster encoding (PNG, JPEG). Alpha is composited
/// over white; grayscale is replicated into all three channels.
pub fn decode_image(bytes: &[u8]) -> Result<PixelBuffer> {
    let img = image::load_from_memory(bytes).map_err(|e| Error::Decode(e.to_string()))?;
    let rgba = img.to_rgba8();
    let (w, h) = rgba.dimensions();
    let pixels = rgba
        .pixels()
        .map(|p| {
            let [r, g, b, a] = p.0;
            let a = u32::from(a);
            let over = |c: u8| ((u32::from(c) * a + 255 * (255 - a) + 127) / 255) as u8;
            [over(r), over(g), over(b)]
        })
        .collect();
    PixelBuffer::new(w, h, pixels)
}

fn non_empty(img: &PixelBuffer) -> Result<()> {
    if img.pixels.is_empty() {
        Err(Error::InvalidInput("empty image".into()))
    } else {
        Ok(())
    }
}

/// Running population mean and variance (Welford).
#[derive(Default, Clone, Copy)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn var(&self) -> f64 {
        if self.n > 0.0 {
            (self.m2 / self.n).max(0.0)
        } else {
            0.0
        }
    }
}

/// Hasler–Süsstrunk colourfulness: `σ_rgyb + 0.3 μ_rgyb` over the opponent
/// channels `rg = R - G` and `yb = (R + G)/2 - B`.
pub fn colorfulness(img: &PixelBuffer) -> Result<f64> {
    non_empty(img)?;
    let mut rg = Moments::default();
    let mut yb = Moments::default();
    for &[r, g, b] in &img.pixels {
        let (r, g, b) = (f64::from(r), f64::from(g), f64::from(b));
        rg.push(r - g);
        yb.push(0.5 * (r + g) - b);
    }
    let sigma = (rg.var() + yb.var()).sqrt();
    let mu = (rg.mean * rg.mean + yb.mean * yb.mean).sqrt();
    Ok(sigma + 0.3 * mu)
}

/// Reference saturation statistics for one object class of the naturalness
/// index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NaturalClass {
    pub hue_lo: f64,
    pub hue_hi: f64,
    pub mu: f64,
    pub sigma: f64,
}

/// Constants of the colour naturalness index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaturalnessConfig {
    /// Lightness gate on the 0..100 scale, inclusive.
    pub lightness: (f64, f64),
    /// Pixels need saturation strictly above this.
    pub min_saturation: f64,
    pub skin: NaturalClass,
    pub grass: NaturalClass,
    pub sky: NaturalClass,
}

impl Default for NaturalnessConfig {
    fn default() -> Self {
        NaturalnessConfig {
            lightness: (20.0, 80.0),
            min_saturation: 0.1,
            skin: NaturalClass { hue_lo: 25.0, hue_hi: 70.0, mu: 0.76, sigma: 0.52 },
            grass: NaturalClass { hue_lo: 95.0, hue_hi: 135.0, mu: 0.81, sigma: 0.53 },
            sky: NaturalClass { hue_lo: 185.0, hue_hi: 260.0, mu: 0.43, sigma: 0.22 },
        }
    }
}

impl NaturalnessConfig {
    fn classes(&self) -> [&NaturalClass; 3] {
        [&self.skin, &self.grass, &self.sky]
    }
}

/// Hue in degrees `[0, 360)`, chroma and max/min of an RGB triple in `[0,1]`.
fn hue_chroma(rgb: [u8; 3]) -> (f64, f64, f64, f64) {
    let [r, g, b] = rgb.map(|c| f64::from(c) / 255.0);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let c = max - min;
    let h = if c == 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / c).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / c + 2.0)
    } else {
        60.0 * ((r - g) / c + 4.0)
    };
    (h, c, max, min)
}

/// HSL `(hue°, saturation, lightness)`.
pub fn rgb_to_hsl(rgb: [u8; 3]) -> (f64, f64, f64) {
    let (h, c, max, min) = hue_chroma(rgb);
    let l = 0.5 * (max + min);
    let denom = 1.0 - (2.0 * l - 1.0).abs();
    let s = if c == 0.0 || denom <= 0.0 { 0.0 } else { (c / denom).min(1.0) };
    (h, s, l)
}

/// HSV `(hue°, saturation, value)`.
pub fn rgb_to_hsv(rgb: [u8; 3]) -> (f64, f64, f64) {
    let (h, c, max, _) = hue_chroma(rgb);
    let s = if max == 0.0 { 0.0 } else { c / max };
    (h, s, max)
}

pub fn naturalness(img: &PixelBuffer) -> Result<f64> {
    naturalness_with(img, &NaturalnessConfig::default())
}

/// Colour naturalness index in `[0, 1]`. Pixels passing the lightness and
/// saturation gates are binned by hue into skin, grass and sky; each class
/// scores `exp(-½((S̄ - μ)/σ)²)` on its mean HSL saturation and the scores
/// are averaged weighted by class pixel counts. No qualifying pixel gives 0.
pub fn naturalness_with(img: &PixelBuffer, cfg: &NaturalnessConfig) -> Result<f64> {
    non_empty(img)?;
    let classes = cfg.classes();
    let mut sums = [0.0f64; 3];
    let mut counts = [0usize; 3];
    for &px in &img.pixels {
        let (h, s, l) = rgb_to_hsl(px);
        let l100 = l * 100.0;
        if l100 < cfg.lightness.0 || l100 > cfg.lightness.1 || s <= cfg.min_saturation {
            continue;
        }
        if let Some(k) = classes.iter().position(|c| h >= c.hue_lo && h <= c.hue_hi) {
            sums[k] += s;
            counts[k] += 1;
        }
    }
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Ok(0.0);
    }
    let mut score = 0.0;
    for k in 0..3 {
        if counts[k] == 0 {
            continue;
        }
        let mean_s = sums[k] / counts[k] as f64;
        let z = (mean_s - classes[k].mu) / classes[k].sigma;
        score += counts[k] as f64 * (-0.5 * z * z).exp();
    }
    Ok((score / total as f64).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HsvStats {
    pub hue_mean: f64,
    pub hue_var: f64,
    pub sat_mean: f64,
    pub sat_var: f64,
    pub value_mean: f64,
}

/// HSV statistics. Hue is an angle: `hue_mean` is the circular mean as a
/// fraction of a turn and `hue_var` is `1 - R̄` (mean resultant length).
/// Achromatic pixels have no hue and are left out of both hue statistics.
pub fn hsv_stats(img: &PixelBuffer) -> Result<HsvStats> {
    non_empty(img)?;
    let mut sat = Moments::default();
    let mut val = Moments::default();
    let (mut cs, mut sn, mut hued) = (0.0f64, 0.0f64, 0usize);
    for &px in &img.pixels {
        let (h, s, v) = rgb_to_hsv(px);
        sat.push(s);
        val.push(v);
        if s > 0.0 {
            let a = h.to_radians();
            cs += a.cos();
            sn += a.sin();
            hued += 1;
        }
    }
    let (hue_mean, hue_var) = if hued == 0 {
        (0.0, 0.0)
    } else {
        let n = hued as f64;
        let r = ((cs / n).powi(2) + (sn / n).powi(2)).sqrt().min(1.0);
        // a vanishing resultant has no defined direction
        let mean = if r < 1e-12 { 0.0 } else { (sn.atan2(cs).rem_euclid(TAU) / TAU).rem_euclid(1.0) };
        (if mean >= 1.0 { 0.0 } else { mean }, (1.0 - r).clamp(0.0, 1.0))
    };
    Ok(HsvStats { hue_mean, hue_var, sat_mean: sat.mean, sat_var: sat.var(), value_mean: val.mean })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LuminanceStats {
    pub brightness: f64,
    pub contrast: f64,
    pub grayscale_mean: f64,
    pub avg_rgb: f64,
    pub red_mean: f64,
    pub green_mean: f64,
    pub blue_mean: f64,
}

pub fn luminance(rgb: [u8; 3]) -> f64 {
    let [r, g, b] = rgb.map(f64::from);
    (0.299 * r + 0.587 * g + 0.114 * b) / 255.0
}

pub fn luminance_stats(img: &PixelBuffer) -> Result<LuminanceStats> {
    non_empty(img)?;
    let mut lum = Moments::default();
    let mut ch = [0.0f64; 3];
    for &px in &img.pixels {
        lum.push(luminance(px));
        for (acc, c) in ch.iter_mut().zip(px) {
            *acc += f64::from(c);
        }
    }
    let n = img.pixels.len() as f64;
    let [r, g, b] = ch.map(|s| s / n);
    Ok(LuminanceStats {
        brightness: lum.mean,
        contrast: lum.var().sqrt(),
        grayscale_mean: lum.mean,
        avg_rgb: (r + g + b) / 3.0,
        red_mean: r,
        green_mean: g,
        blue_mean: b,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sharpness {
    pub sharpness: f64,
    pub blurriness: f64,
}

/// Variance of the 4-neighbour Laplacian of luminance over interior pixels.
/// `blurriness = 1 / (1 + sharpness)`.
pub fn sharpness_blur(img: &PixelBuffer) -> Result<Sharpness> {
    if img.width < 3 || img.height < 3 {
        return Err(Error::InvalidInput(format!(
            "sharpness needs at least 3x3 pixels, got {}x{}",
            img.width, img.height
        )));
    }
    let (w, h) = (img.width as usize, img.height as usize);
    let lum: Vec<f64> = img.pixels.iter().map(|&p| luminance(p)).collect();
    let mut m = Moments::default();
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let i = y * w + x;
            let lap = lum[i - 1] + lum[i + 1] + lum[i - w] + lum[i + w] - 4.0 * lum[i];
            m.push(lap);
        }
    }
    let sharpness = m.var();
    Ok(Sharpness { sharpness, blurriness: 1.0 / (1.0 + sharpness) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageFeatures {
    pub colorfulness: f64,
    pub naturalness: f64,
    pub hue_mean: f64,
    pub hue_var: f64,
    pub sat_mean: f64,
    pub sat_var: f64,
    pub brightness: f64,
    pub contrast: f64,
    pub grayscale_mean: f64,
    pub avg_rgb: f64,
    pub red_mean: f64,
    pub green_mean: f64,
    pub blue_mean: f64,
    pub sharpness: f64,
    pub blurriness: f64,
}

impl ImageFeatures {
    pub const NAMES: [&'static str; 15] = [
        "colorfulness",
        "naturalness",
        "hue_mean",
        "hue_var",
        "sat_mean",
        "sat_var",
        "brightness",
        "contrast",
        "grayscale_mean",
        "avg_rgb",
        "red_mean",
        "green_mean",
        "blue_mean",
        "sharpness",
        "blurriness",
    ];

    /// Values in [`Self::NAMES`] order.
    pub fn values(&self) -> [f64; 15] {
        [
            self.colorfulness,
            self.naturalness,
            self.hue_mean,
            self.hue_var,
            self.sat_mean,
            self.sat_var,
            self.brightness,
            self.contrast,
            self.grayscale_mean,
            self.avg_rgb,
            self.red_mean,
            self.green_mean,
            self.blue_mean,
            self.sharpness,
            self.blurriness,
        ]
    }
}

pub fn image_feature_vector(img: &PixelBuffer) -> Result<ImageFeatures> {
    image_feature_vector_with(img, &NaturalnessConfig::default())
}

pub fn image_feature_vector_with(img: &PixelBuffer, cfg: &NaturalnessConfig) -> Result<ImageFeatures> {
    let hsv = hsv_stats(img)?;
    let lum = luminance_stats(img)?;
    let sharp = sharpness_blur(img)?;
    Ok(ImageFeatures {
        colorfulness: colorfulness(img)?,
        naturalness: naturalness_with(img, cfg)?,
        hue_mean: hsv.hue_mean,
        hue_var: hsv.hue_var,
        sat_mean: hsv.sat_mean,
        sat_var: hsv.sat_var,
        brightness: lum.brightness,
        contrast: lum.contrast,
        grayscale_mean: lum.grayscale_mean,
        avg_rgb: lum.avg_rgb,
        red_mean: lum.red_mean,
        green_mean: lum.green_mean,
        blue_mean: lum.blue_mean,
        sharpness: sharp.sharpness,
        blurriness: sharp.blurriness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn halves(w: u32, h: u32, a: [u8; 3], b: [u8; 3]) -> PixelBuffer {
        PixelBuffer::from_fn(w, h, |x, _| if x < w / 2 { a } else { b }).unwrap()
    }

    #[test]
    fn colorfulness_cases() {
        let gray = PixelBuffer::filled(8, 8, [128, 128, 128]).unwrap();
        assert_eq!(colorfulness(&gray).unwrap(), 0.0);
        let rg = halves(8, 8, [255, 0, 0], [0, 255, 0]);
        assert!((colorfulness(&rg).unwrap() - 293.25).abs() < 1e-9);
    }

    #[test]
    fn naturalness_cases() {
        let black = PixelBuffer::filled(4, 4, [0, 0, 0]).unwrap();
        assert_eq!(naturalness(&black).unwrap(), 0.0);
        // HSL saturation of (110, 78, 15) is exactly 95/125 = 0.76, hue ≈ 39.8°
        let skin = PixelBuffer::filled(4, 4, [110, 78, 15]).unwrap();
        let (h, s, _) = rgb_to_hsl([110, 78, 15]);
        assert!((25.0..=70.0).contains(&h));
        assert!((s - 0.76).abs() < 1e-12);
        assert!((naturalness(&skin).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn hsv_cases() {
        let gray = PixelBuffer::filled(4, 4, [90, 90, 90]).unwrap();
        let s = hsv_stats(&gray).unwrap();
        assert_eq!((s.sat_mean, s.sat_var, s.hue_var), (0.0, 0.0, 0.0));
        let red = PixelBuffer::filled(4, 4, [255, 0, 0]).unwrap();
        assert!(hsv_stats(&red).unwrap().hue_var.abs() < 1e-12);
        let rc = halves(4, 4, [255, 0, 0], [0, 255, 255]);
        assert!((hsv_stats(&rc).unwrap().hue_var - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hue_wraps_around() {
        // 350° and 10° are 20° apart, not 340°
        let img = halves(4, 4, [255, 0, 43], [255, 43, 0]);
        let s = hsv_stats(&img).unwrap();
        assert!(s.hue_var < 0.05, "{s:?}");
        assert!(s.hue_mean < 0.01 || s.hue_mean > 0.99);
    }

    #[test]
    fn luminance_cases() {
        let white = PixelBuffer::filled(3, 3, [255, 255, 255]).unwrap();
        let l = luminance_stats(&white).unwrap();
        assert!((l.brightness - 1.0).abs() < 1e-12);
        assert!(l.contrast.abs() < 1e-12);
        assert_eq!(l.avg_rgb, 255.0);
        let black = PixelBuffer::filled(3, 3, [0, 0, 0]).unwrap();
        assert_eq!(luminance_stats(&black).unwrap().brightness, 0.0);
        let checker =
            PixelBuffer::from_fn(4, 4, |x, y| if (x + y) % 2 == 0 { [0, 0, 0] } else { [255, 255, 255] }).unwrap();
        let l = luminance_stats(&checker).unwrap();
        assert!((l.brightness - 0.5).abs() < 1e-12);
        assert!((l.contrast - 0.5).abs() < 1e-12);
    }

    #[test]
    fn sharpness_cases() {
        let flat = PixelBuffer::filled(5, 5, [30, 60, 90]).unwrap();
        let s = sharpness_blur(&flat).unwrap();
        assert_eq!(s.sharpness, 0.0);
        assert_eq!(s.blurriness, 1.0);
        let edge = halves(6, 6, [0, 0, 0], [255, 255, 255]);
        assert!(sharpness_blur(&edge).unwrap().sharpness > 0.0);
        let tiny = PixelBuffer::filled(2, 5, [0, 0, 0]).unwrap();
        assert!(sharpness_blur(&tiny).is_err());
    }

    fn box_blur(img: &PixelBuffer) -> PixelBuffer {
        let (w, h) = (img.width() as i64, img.height() as i64);
        PixelBuffer::from_fn(img.width(), img.height(), |x, y| {
            let mut acc = [0u32; 3];
            let mut n = 0;
            for dy in -1..=1i64 {
                for dx in -1..=1i64 {
                    let (xx, yy) = (x as i64 + dx, y as i64 + dy);
                    if (0..w).contains(&xx) && (0..h).contains(&yy) {
                        let p = img.get(xx as u32, yy as u32);
                        for c in 0..3 {
                            acc[c] += u32::from(p[c]);
                        }
                        n += 1;
                    }
                }
            }
            acc.map(|a| ((a + n / 2) / n) as u8)
        })
        .unwrap()
    }

    #[test]
    fn blur_reduces_sharpness() {
        let img = PixelBuffer::from_fn(12, 12, |x, y| {
            let v = ((x * 37 + y * 91) % 256) as u8;
            [v, v.wrapping_mul(3), 255 - v]
        })
        .unwrap();
        let before = sharpness_blur(&img).unwrap().sharpness;
        let after = sharpness_blur(&box_blur(&img)).unwrap().sharpness;
        assert!(before >= after);
    }

    #[test]
    fn decode_png_and_errors() {
        let img = PixelBuffer::new(2, 2, vec![[1, 2, 3], [4, 5, 6], [7, 8, 9], [10, 11, 12]]).unwrap();
        let png = img.to_png();
        assert_eq!(decode_image(&png).unwrap(), img);
        assert!(matches!(decode_image(&png[..png.len() / 2]), Err(Error::Decode(_))));

        let gray = image::GrayImage::from_raw(2, 1, vec![10, 200]).unwrap();
        let mut bytes = std::io::Cursor::new(Vec::new());
        gray.write_to(&mut bytes, image::ImageFormat::Png).unwrap();
        let d = decode_image(bytes.get_ref()).unwrap();
        assert_eq!(d.pixels(), &[[10, 10, 10], [200, 200, 200]]);
    }

    #[test]
    fn alpha_composites_over_white() {
        let rgba = image::RgbaImage::from_raw(1, 1, vec![0, 0, 0, 0]).unwrap();
        let mut bytes = std::io::Cursor::new(Vec::new());
        rgba.write_to(&mut bytes, image::ImageFormat::Png).unwrap();
        assert_eq!(decode_image(bytes.get_ref()).unwrap().pixels(), &[[255, 255, 255]]);
    }

    #[test]
    fn uniform_gray_feature_vector() {
        let gray = PixelBuffer::filled(6, 6, [128, 128, 128]).unwrap();
        let f = image_feature_vector(&gray).unwrap();
        assert_eq!(f.colorfulness, 0.0);
        assert_eq!(f.sat_mean, 0.0);
        assert_eq!(f.hue_var, 0.0);
        assert_eq!(f.blurriness, 1.0);
    }

    fn arb_image() -> impl Strategy<Value = PixelBuffer> {
        (3u32..10, 3u32..10).prop_flat_map(|(w, h)| {
            proptest::collection::vec(any::<[u8; 3]>(), (w * h) as usize)
                .prop_map(move |px| PixelBuffer::new(w, h, px).unwrap())
        })
    }

    proptest! {
        #[test]
        fn ranges_hold(img in arb_image()) {
            let f = image_feature_vector(&img).unwrap();
            prop_assert!(f.colorfulness >= 0.0);
            prop_assert!((0.0..=1.0).contains(&f.naturalness));
            prop_assert!((0.0..1.0).contains(&f.hue_mean));
            prop_assert!((0.0..=1.0).contains(&f.hue_var));
            prop_assert!((0.0..=1.0).contains(&f.sat_mean) && (0.0..=1.0).contains(&f.sat_var));
            prop_assert!((0.0..=1.0).contains(&f.brightness));
            prop_assert!((0.0..=255.0).contains(&f.avg_rgb));
            prop_assert!(f.sharpness >= 0.0 && f.blurriness > 0.0 && f.blurriness <= 1.0);
        }

        #[test]
        fn colorfulness_ignores_pixel_order(img in arb_image(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut px = img.pixels().to_vec();
            px.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let shuffled = PixelBuffer::new(img.width(), img.height(), px).unwrap();
            let a = colorfulness(&img).unwrap();
            let b = colorfulness(&shuffled).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a));
        }

        #[test]
        fn brightening_raises_brightness(img in arb_image(), k in 1u8..40) {
            let capped: Vec<[u8; 3]> = img.pixels().iter().map(|p| p.map(|c| c.min(200))).collect();
            let base = PixelBuffer::new(img.width(), img.height(), capped.clone()).unwrap();
            let lifted = PixelBuffer::new(
                img.width(),
                img.height(),
                capped.iter().map(|p| p.map(|c| c + k)).collect(),
            )
            .unwrap();
            prop_assert!(luminance_stats(&lifted).unwrap().grayscale_mean > luminance_stats(&base).unwrap().grayscale_mean);
        }
    }
}
