//! Deterministic synthetic inputs: procedural "pseudo-font" text images for
//! training and detection, planted-truth images for the color and size
//! detectors, and synthetic attribute datasets for the prediction engine.
//!
//! Everything here is a pure function of its seed (ChaCha8 keyed by the
//! spec seed, class id and sample index), so fixtures regenerate
//! bit-identically on every platform.

mod manifest;

use std::fmt;
use std::io;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::image::{resize_bilinear, ImageBuffer, ImageError};
use crate::predict::{
    EmbeddingOnlyFont, FontRecord, PredictError, Provenance, ATTRIBUTE_DIM, EMBEDDING_DIM,
};

pub use manifest::{
    generate_fixture_set, ColorEntry, FixtureSetOptions, Manifest, SizeEntry, Split, StyleEntry,
};

/// Un-augmented render canvas; fixed so raw samples are directly comparable.
pub const CANVAS_WIDTH: usize = 96;
pub const CANVAS_HEIGHT: usize = 64;

const BACKGROUND: u8 = 235;
const INK: u8 = 25;

#[derive(Debug)]
pub enum FixtureError {
    InvalidSpec(String),
    InvalidParams(String),
    Io(io::Error),
    Image(ImageError),
    Predict(PredictError),
    ManifestParse { line: usize, message: String },
}

impl fmt::Display for FixtureError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FixtureError::InvalidSpec(msg) => write!(f, "invalid pseudo-font spec: {msg}"),
            FixtureError::InvalidParams(msg) => write!(f, "invalid fixture params: {msg}"),
            FixtureError::Io(e) => write!(f, "fixture i/o error: {e}"),
            FixtureError::Image(e) => write!(f, "fixture image error: {e}"),
            FixtureError::Predict(e) => write!(f, "fixture dataset error: {e}"),
            FixtureError::ManifestParse { line, message } => {
                write!(f, "manifest line {line}: {message}")
            }
        }
    }
}

impl std::error::Error for FixtureError {}

impl From<io::Error> for FixtureError {
    fn from(e: io::Error) -> Self {
        FixtureError::Io(e)
    }
}

impl From<ImageError> for FixtureError {
    fn from(e: ImageError) -> Self {
        FixtureError::Image(e)
    }
}

impl From<PredictError> for FixtureError {
    fn from(e: PredictError) -> Self {
        FixtureError::Predict(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CornerStyle {
    Square,
    Rounded,
}

/// Parameters of one synthetic "font": a family of text-like stroke
/// patterns sharing stroke width, shear, spacing and corner treatment.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoFontSpec {
    pub class_id: usize,
    pub stroke_width: usize,
    /// Horizontal shear per row; |slant| <= 0.5.
    pub slant: f64,
    /// Horizontal spacing between glyph stems; must exceed the stroke width.
    pub glyph_period: usize,
    pub corner_style: CornerStyle,
    pub seed: u64,
}

impl PseudoFontSpec {
    fn validate(&self) -> Result<(), FixtureError> {
        if self.stroke_width == 0 {
            return Err(FixtureError::InvalidSpec("stroke_width must be >= 1".into()));
        }
        if self.glyph_period <= self.stroke_width {
            return Err(FixtureError::InvalidSpec(format!(
                "glyph_period {} must exceed stroke_width {}",
                self.glyph_period, self.stroke_width
            )));
        }
        if !self.slant.is_finite() || self.slant.abs() > 0.5 {
            return Err(FixtureError::InvalidSpec(format!("slant {} outside [-0.5, 0.5]", self.slant)));
        }
        Ok(())
    }
}

/// Distinct default classes; parameters spread far apart so classes stay
/// separable under augmentation.
pub fn default_classes(count: usize, seed: u64) -> Vec<PseudoFontSpec> {
    const STROKES: [usize; 8] = [1, 2, 3, 4, 5, 2, 4, 3];
    const PERIODS: [usize; 8] = [7, 9, 11, 13, 15, 12, 8, 16];
    const SLANTS: [f64; 8] = [0.0, 0.3, -0.3, 0.45, 0.0, -0.45, 0.15, 0.35];
    (0..count)
        .map(|i| PseudoFontSpec {
            class_id: i,
            stroke_width: STROKES[i % 8],
            slant: SLANTS[i % 8],
            glyph_period: PERIODS[i % 8] + 4 * (i / 8),
            corner_style: if i % 2 == 0 { CornerStyle::Square } else { CornerStyle::Rounded },
            seed,
        })
        .collect()
}

/// Post-render augmentation. The identity is `scale 1, contrast 1, noise 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Augment {
    /// Uniform resampling factor in [0.8, 2.0] (keeps height >= 50).
    pub scale: f64,
    /// Contrast factor around mid-gray, in [0.2, 3.0].
    pub contrast: f64,
    /// Additive uniform noise amplitude per pixel, in [0, 64].
    pub noise: f64,
}

impl Default for Augment {
    fn default() -> Self {
        Augment { scale: 1.0, contrast: 1.0, noise: 0.0 }
    }
}

impl Augment {
    fn validate(&self) -> Result<(), FixtureError> {
        if !(0.8..=2.0).contains(&self.scale) || !self.scale.is_finite() {
            return Err(FixtureError::InvalidParams(format!("scale {} outside [0.8, 2.0]", self.scale)));
        }
        if !(0.2..=3.0).contains(&self.contrast) || !self.contrast.is_finite() {
            return Err(FixtureError::InvalidParams(format!(
                "contrast {} outside [0.2, 3.0]",
                self.contrast
            )));
        }
        if !(0.0..=64.0).contains(&self.noise) || !self.noise.is_finite() {
            return Err(FixtureError::InvalidParams(format!("noise {} outside [0, 64]", self.noise)));
        }
        Ok(())
    }
}

fn mix_seed(a: u64, b: u64, c: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ c.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Render one labeled grayscale sample of a pseudo-font.
///
/// Deterministic per `(spec, index, augment)`: the stroke layout comes from
/// a ChaCha8 stream keyed by (seed, class, index); the augmentation stages
/// are skipped entirely when they are the identity.
pub fn render_sample(spec: &PseudoFontSpec, index: u64, augment: &Augment) -> Result<ImageBuffer, FixtureError> {
    spec.validate()?;
    augment.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, spec.class_id as u64, index));

    let mut canvas = vec![BACKGROUND; CANVAS_WIDTH * CANVAS_HEIGHT];
    let band_top = 8 + rng.gen_range(0..=10usize);
    let band_bottom = CANVAS_HEIGHT - 8 - rng.gen_range(0..=4usize);

    let put = |canvas: &mut Vec<u8>, x: i64, y: usize| {
        if x >= 0 && (x as usize) < CANVAS_WIDTH {
            canvas[y * CANVAS_WIDTH + x as usize] = INK;
        }
    };

    let mut x0 = 4usize;
    while x0 + spec.glyph_period < CANVAS_WIDTH - 4 {
        let full_height: bool = rng.gen();
        let crossbar: bool = rng.gen();
        let bar_row = rng.gen_range(0..=100usize);

        let top = if full_height { band_top } else { band_top + (band_bottom - band_top) / 3 };
        for y in top..band_bottom {
            let shift = (spec.slant * (band_bottom - 1 - y) as f64).round() as i64;
            let rounded_end = spec.corner_style == CornerStyle::Rounded && (y == top || y == band_bottom - 1);
            let (inset_l, inset_r) = if rounded_end {
                if spec.stroke_width >= 3 {
                    (1, 1)
                } else {
                    continue; // thin strokes drop their end rows instead
                }
            } else {
                (0, 0)
            };
            for dx in inset_l..spec.stroke_width.saturating_sub(inset_r) {
                put(&mut canvas, x0 as i64 + shift + dx as i64, y);
            }
        }
        if crossbar {
            let y = top + (band_bottom - top) * bar_row / 101;
            let shift = (spec.slant * (band_bottom - 1 - y) as f64).round() as i64;
            let len = (spec.glyph_period - 1).min(10);
            for dx in 0..len {
                put(&mut canvas, x0 as i64 + shift + dx as i64, y);
            }
        }
        x0 += spec.glyph_period;
    }

    // Augmentation: scale, then contrast, then noise.
    let (mut data, mut w, mut h) = (canvas, CANVAS_WIDTH, CANVAS_HEIGHT);
    if augment.scale != 1.0 {
        let nw = ((w as f64 * augment.scale).round() as usize).max(1);
        let nh = ((h as f64 * augment.scale).round() as usize).max(1);
        let plane: Vec<f32> = data.iter().map(|&v| v as f32).collect();
        data = resize_bilinear(&plane, w, h, nw, nh)
            .into_iter()
            .map(|v| v.round().clamp(0.0, 255.0) as u8)
            .collect();
        w = nw;
        h = nh;
    }
    if augment.contrast != 1.0 {
        for v in &mut data {
            let adjusted = (*v as f64 - 128.0) * augment.contrast + 128.0;
            *v = adjusted.round().clamp(0.0, 255.0) as u8;
        }
    }
    if augment.noise > 0.0 {
        for v in &mut data {
            let delta = rng.gen_range(-augment.noise..=augment.noise);
            *v = (*v as f64 + delta).round().clamp(0.0, 255.0) as u8;
        }
    }

    Ok(ImageBuffer::new(w, h, 1, data)?)
}

/// Fraction of non-background pixels; handy for coverage comparisons.
pub fn ink_coverage(image: &ImageBuffer) -> f64 {
    let dark = image.data().iter().filter(|&&v| v < 128).count();
    dark as f64 / image.data().len() as f64
}

/// Ground truth planted by [`gen_color_truth`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColorTruth {
    pub background: [u8; 3],
    pub text: [u8; 3],
    pub text_fraction: f64,
    /// Exactly `round(text_fraction * width * height)` pixels carry the
    /// text color (before noise).
    pub text_pixel_count: usize,
}

/// Two-color planted image for the text-color detector: a background, a
/// centered block of text-colored pixels of exact count, and optional
/// per-channel uniform noise. The two planted colors are drawn at least
/// distance 100 apart.
pub fn gen_color_truth(
    width: usize,
    height: usize,
    text_fraction: f64,
    noise_amplitude: f64,
    seed: u64,
) -> Result<(ImageBuffer, ColorTruth), FixtureError> {
    if width == 0 || height == 0 {
        return Err(FixtureError::InvalidParams("empty image".into()));
    }
    if !(0.0..=0.45).contains(&text_fraction) || !text_fraction.is_finite() {
        return Err(FixtureError::InvalidParams(format!(
            "text_fraction {text_fraction} outside [0, 0.45]"
        )));
    }
    if !(0.0..=30.0).contains(&noise_amplitude) || !noise_amplitude.is_finite() {
        return Err(FixtureError::InvalidParams(format!(
            "noise_amplitude {noise_amplitude} outside [0, 30]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0xC010, 0));

    let background: [u8; 3] = [rng.gen(), rng.gen(), rng.gen()];
    let text: [u8; 3] = loop {
        let cand: [u8; 3] = [rng.gen(), rng.gen(), rng.gen()];
        let d2: f64 = background
            .iter()
            .zip(&cand)
            .map(|(&a, &b)| {
                let d = a as f64 - b as f64;
                d * d
            })
            .sum();
        if d2.sqrt() >= 100.0 {
            break cand;
        }
    };

    let area = width * height;
    let text_pixels = (text_fraction * area as f64).round() as usize;
    let start = (area - text_pixels) / 2;

    let mut data = Vec::with_capacity(area * 3);
    for i in 0..area {
        let color = if i >= start && i < start + text_pixels { text } else { background };
        data.extend_from_slice(&color);
    }
    if noise_amplitude > 0.0 {
        for v in &mut data {
            let delta = rng.gen_range(-noise_amplitude..=noise_amplitude);
            *v = (*v as f64 + delta).round().clamp(0.0, 255.0) as u8;
        }
    }
    let image = ImageBuffer::new(width, height, 3, data)?;
    let truth = ColorTruth { background, text, text_fraction, text_pixel_count: text_pixels };
    Ok((image, truth))
}

/// Ground truth planted by [`gen_size_truth`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SizeTruth {
    pub first_band_row: usize,
    pub last_band_row: usize,
    /// Transition one row above the band.
    pub first_edge_row: usize,
    /// Transition on the band's last row.
    pub last_edge_row: usize,
    /// `last_edge_row - first_edge_row`.
    pub height: usize,
}

/// Planted band image for the text-size detector: a dark solid band on a
/// light background with optional background speckle. Adjacent rows differ
/// by at most `2 * noise_amplitude` away from the band boundaries, so the
/// detection threshold stays unambiguous whenever it exceeds that.
pub fn gen_size_truth(
    width: usize,
    height: usize,
    band: (usize, usize),
    noise_amplitude: f64,
    seed: u64,
) -> Result<(ImageBuffer, SizeTruth), FixtureError> {
    let (first, last) = band;
    if width == 0 || height < 4 {
        return Err(FixtureError::InvalidParams("image too small".into()));
    }
    if first < 1 || last < first || last > height - 2 {
        return Err(FixtureError::InvalidParams(format!(
            "band {band:?} must satisfy 1 <= first <= last <= height - 2"
        )));
    }
    if !(0.0..=14.0).contains(&noise_amplitude) || !noise_amplitude.is_finite() {
        return Err(FixtureError::InvalidParams(format!(
            "noise_amplitude {noise_amplitude} outside [0, 14]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x512E, 0));
    const LIGHT: u8 = 230;
    const DARK: u8 = 20;

    let mut data = vec![LIGHT; width * height];
    for y in first..=last {
        for x in 0..width {
            data[y * width + x] = DARK;
        }
    }
    if noise_amplitude > 0.0 {
        for v in &mut data {
            let delta = rng.gen_range(-noise_amplitude..=noise_amplitude);
            *v = (*v as f64 + delta).round().clamp(0.0, 255.0) as u8;
        }
    }
    let image = ImageBuffer::new(width, height, 1, data)?;
    let truth = SizeTruth {
        first_band_row: first,
        last_band_row: last,
        first_edge_row: first - 1,
        last_edge_row: last,
        height: last - (first - 1),
    };
    Ok((image, truth))
}

/// Synthetic attribute dataset: seed fonts with attributes plus embeddings,
/// and embedding-only new fonts. Attributes are a squashed random linear
/// image of the embedding (plus slight noise), so embedding proximity
/// correlates with attribute proximity.
pub fn gen_font_dataset(
    n_seed: usize,
    n_new: usize,
    seed: u64,
) -> Result<(Vec<FontRecord>, Vec<EmbeddingOnlyFont>), FixtureError> {
    if n_seed < 2 {
        return Err(FixtureError::InvalidParams(format!("n_seed {n_seed} must be >= 2")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0xF047, 0));
    let projection: Vec<f64> =
        (0..ATTRIBUTE_DIM * EMBEDDING_DIM).map(|_| rng.gen_range(-1.0..1.0)).collect();

    let embed = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..EMBEDDING_DIM).map(|_| rng.gen_range(-1.0..1.0)).collect()
    };
    let attributes_of = |embedding: &[f64], rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..ATTRIBUTE_DIM)
            .map(|a| {
                let dot: f64 = projection[a * EMBEDDING_DIM..(a + 1) * EMBEDDING_DIM]
                    .iter()
                    .zip(embedding)
                    .map(|(p, g)| p * g)
                    .sum();
                let base = 50.0 + 50.0 * (dot * 0.3).tanh();
                (base + rng.gen_range(-2.0..2.0)).clamp(0.0, 100.0)
            })
            .collect()
    };

    let mut seeds = Vec::with_capacity(n_seed);
    for i in 0..n_seed {
        let g = embed(&mut rng);
        let attrs = attributes_of(&g, &mut rng);
        seeds.push(FontRecord::new(format!("seed-{i:03}"), attrs, Some(g), Provenance::Seed)?);
    }
    let mut new_fonts = Vec::with_capacity(n_new);
    for i in 0..n_new {
        new_fonts.push(EmbeddingOnlyFont { name: format!("new-{i:04}"), embedding: embed(&mut rng) });
    }
    Ok((seeds, new_fonts))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> PseudoFontSpec {
        PseudoFontSpec {
            class_id: 1,
            stroke_width: 2,
            slant: 0.2,
            glyph_period: 9,
            corner_style: CornerStyle::Rounded,
            seed: 42,
        }
    }

    #[test]
    fn rendering_is_deterministic() {
        let aug = Augment { scale: 1.25, contrast: 1.2, noise: 8.0 };
        let a = render_sample(&spec(), 7, &aug).unwrap();
        let b = render_sample(&spec(), 7, &aug).unwrap();
        assert_eq!(a, b);
        let c = render_sample(&spec(), 8, &aug).unwrap();
        assert_ne!(a, c, "different indices must differ");
    }

    #[test]
    fn identity_augment_is_a_no_op() {
        let base = render_sample(&spec(), 3, &Augment::default()).unwrap();
        assert_eq!((base.width(), base.height()), (CANVAS_WIDTH, CANVAS_HEIGHT));
        assert!(base.height() >= 50);
        // Scale 1 / contrast 1 / noise 0 are skipped, not merely rounded back.
        let again = render_sample(&spec(), 3, &Augment { scale: 1.0, contrast: 1.0, noise: 0.0 }).unwrap();
        assert_eq!(base, again);
    }

    #[test]
    fn wider_strokes_cover_strictly_more_ink() {
        let thin = PseudoFontSpec { stroke_width: 1, ..spec() };
        let wide = PseudoFontSpec { stroke_width: 4, ..spec() };
        for index in 0..5 {
            let a = render_sample(&thin, index, &Augment::default()).unwrap();
            let b = render_sample(&wide, index, &Augment::default()).unwrap();
            assert!(ink_coverage(&b) > ink_coverage(&a));
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut s = spec();
        s.stroke_width = 0;
        assert!(render_sample(&s, 0, &Augment::default()).is_err());
        let mut s = spec();
        s.glyph_period = s.stroke_width;
        assert!(render_sample(&s, 0, &Augment::default()).is_err());
        let bad_aug = Augment { scale: 0.5, ..Default::default() };
        assert!(render_sample(&spec(), 0, &bad_aug).is_err());
    }

    #[test]
    fn color_truth_plants_the_exact_pixel_count() {
        let (img, truth) = gen_color_truth(40, 30, 0.3, 0.0, 5).unwrap();
        let expected = (0.3f64 * 1200.0).round() as usize;
        assert_eq!(truth.text_pixel_count, expected);
        let mut actual = 0;
        for y in 0..30 {
            for x in 0..40 {
                if img.pixel_rgb(x, y) == truth.text {
                    actual += 1;
                }
            }
        }
        assert_eq!(actual, expected);
    }

    #[test]
    fn color_truth_is_deterministic_and_well_separated() {
        let a = gen_color_truth(32, 32, 0.25, 6.0, 11).unwrap();
        let b = gen_color_truth(32, 32, 0.25, 6.0, 11).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        let d: f64 = a
            .1
            .background
            .iter()
            .zip(&a.1.text)
            .map(|(&x, &y)| {
                let d = x as f64 - y as f64;
                d * d
            })
            .sum::<f64>()
            .sqrt();
        assert!(d >= 100.0);
    }

    #[test]
    fn size_truth_matches_the_band_convention() {
        let (_, truth) = gen_size_truth(50, 64, (10, 40), 0.0, 3).unwrap();
        assert_eq!(truth.first_edge_row, 9);
        assert_eq!(truth.last_edge_row, 40);
        assert_eq!(truth.height, 31);
    }

    #[test]
    fn size_truth_rejects_bands_touching_the_border() {
        assert!(gen_size_truth(50, 64, (0, 40), 0.0, 3).is_err());
        assert!(gen_size_truth(50, 64, (10, 63), 0.0, 3).is_err());
        assert!(gen_size_truth(50, 64, (40, 10), 0.0, 3).is_err());
    }

    #[test]
    fn font_dataset_has_the_declared_shape() {
        let (seeds, new_fonts) = gen_font_dataset(12, 7, 99).unwrap();
        assert_eq!(seeds.len(), 12);
        assert_eq!(new_fonts.len(), 7);
        for s in &seeds {
            assert_eq!(s.attributes.len(), ATTRIBUTE_DIM);
            assert_eq!(s.embedding.as_ref().unwrap().len(), EMBEDDING_DIM);
            assert!(s.attributes.iter().all(|a| (0.0..=100.0).contains(a)));
        }
        let (again, _) = gen_font_dataset(12, 7, 99).unwrap();
        assert_eq!(seeds, again);
        let (none_new, empty) = gen_font_dataset(12, 0, 99).unwrap();
        assert_eq!(none_new, seeds);
        assert!(empty.is_empty());
    }

    #[test]
    fn nearest_centroid_separates_default_classes_perfectly() {
        let classes = default_classes(5, 1234);
        let per_class = 12usize;
        let mut samples: Vec<(Vec<f64>, usize)> = Vec::new();
        for spec in &classes {
            for index in 0..per_class as u64 {
                let img = render_sample(spec, index, &Augment::default()).unwrap();
                let pixels: Vec<f64> = img.data().iter().map(|&v| v as f64).collect();
                samples.push((pixels, spec.class_id));
            }
        }
        let dim = CANVAS_WIDTH * CANVAS_HEIGHT;
        let mut centroids = vec![vec![0.0f64; dim]; classes.len()];
        for (pixels, class) in &samples {
            for (c, p) in centroids[*class].iter_mut().zip(pixels) {
                *c += p / per_class as f64;
            }
        }
        for (pixels, class) in &samples {
            let mut best = (f64::INFINITY, usize::MAX);
            for (ci, centroid) in centroids.iter().enumerate() {
                let d: f64 = centroid.iter().zip(pixels).map(|(c, p)| (c - p) * (c - p)).sum();
                if d < best.0 {
                    best = (d, ci);
                }
            }
            assert_eq!(best.1, *class, "sample of class {class} landed in {}", best.1);
        }
    }
}
