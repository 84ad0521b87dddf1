//! Text-size estimation: scan for rows where vertically adjacent pixels
//! differ by more than a threshold in any channel, and report the span
//! between the first and the last such row as the maximum text height.

use std::fmt;

use crate::image::ImageBuffer;

/// Edge-scan parameters.
///
/// A row `i` is an edge row when at least `min_edge_pixels` columns `j`
/// satisfy `|I[i, j] - I[i + 1, j]| > threshold` in at least one of the
/// R, G, B channels. The column quorum suppresses single-pixel speckle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeScanConfig {
    /// Intensity threshold, strict, in 8-bit units; must lie in (0, 255).
    pub threshold: f64,
    /// Columns that must exceed the threshold for a row to count; >= 1.
    pub min_edge_pixels: usize,
}

impl Default for EdgeScanConfig {
    fn default() -> Self {
        EdgeScanConfig { threshold: 30.0, min_edge_pixels: 2 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SizeError {
    ImageTooSmall,
    /// Image is uniform or all differences stay at or below the threshold.
    NoEdges,
    InvalidConfig(String),
}

impl fmt::Display for SizeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SizeError::ImageTooSmall => write!(f, "image must have at least 2 rows"),
            SizeError::NoEdges => write!(f, "no edges above threshold"),
            SizeError::InvalidConfig(msg) => write!(f, "invalid edge-scan config: {msg}"),
        }
    }
}

impl std::error::Error for SizeError {}

/// Detected text extent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SizeReport {
    /// `last_row - first_row`. A solid band of N rows yields N, because the
    /// top transition sits one row above the band.
    pub height: usize,
    pub first_row: usize,
    pub last_row: usize,
}

fn validate(image: &ImageBuffer, config: &EdgeScanConfig) -> Result<(), SizeError> {
    if config.threshold <= 0.0 || config.threshold >= 255.0 || !config.threshold.is_finite() {
        return Err(SizeError::InvalidConfig(format!(
            "threshold {} outside (0, 255)",
            config.threshold
        )));
    }
    if config.min_edge_pixels == 0 {
        return Err(SizeError::InvalidConfig("min_edge_pixels must be >= 1".into()));
    }
    if image.height() < 2 {
        return Err(SizeError::ImageTooSmall);
    }
    Ok(())
}

/// Indices of all edge rows (`i` compares rows `i` and `i + 1`).
pub fn edge_rows(image: &ImageBuffer, config: &EdgeScanConfig) -> Result<Vec<usize>, SizeError> {
    validate(image, config)?;
    let mut rows = Vec::new();
    for i in 0..image.height() - 1 {
        let mut exceeding = 0usize;
        for j in 0..image.width() {
            let a = image.pixel(j, i);
            let b = image.pixel(j, i + 1);
            let hit = a
                .iter()
                .zip(b)
                .any(|(&x, &y)| ((x as i16 - y as i16).abs() as f64) > config.threshold);
            if hit {
                exceeding += 1;
                if exceeding >= config.min_edge_pixels {
                    break;
                }
            }
        }
        if exceeding >= config.min_edge_pixels {
            rows.push(i);
        }
    }
    Ok(rows)
}

/// Maximum text height: the distance between the first and the last edge row.
pub fn detect_text_height(image: &ImageBuffer, config: &EdgeScanConfig) -> Result<SizeReport, SizeError> {
    let rows = edge_rows(image, config)?;
    match (rows.first(), rows.last()) {
        (Some(&first), Some(&last)) => Ok(SizeReport { height: last - first, first_row: first, last_row: last }),
        _ => Err(SizeError::NoEdges),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// White canvas with a dark band covering rows `band` inclusive.
    fn band_image(width: usize, height: usize, band: (usize, usize)) -> ImageBuffer {
        let mut img = ImageBuffer::filled_gray(width, height, 255).unwrap();
        for y in band.0..=band.1 {
            for x in 0..width {
                img.set_pixel(x, y, &[0]);
            }
        }
        img
    }

    #[test]
    fn uniform_image_has_no_edges() {
        let img = ImageBuffer::filled_gray(20, 30, 128).unwrap();
        let config = EdgeScanConfig { threshold: 30.0, min_edge_pixels: 1 };
        assert_eq!(detect_text_height(&img, &config), Err(SizeError::NoEdges));
    }

    #[test]
    fn band_edges_and_height() {
        let img = band_image(60, 64, (10, 40));
        let config = EdgeScanConfig { threshold: 30.0, min_edge_pixels: 1 };
        let report = detect_text_height(&img, &config).unwrap();
        assert_eq!(report.first_row, 9);
        assert_eq!(report.last_row, 40);
        assert_eq!(report.height, 31);
    }

    #[test]
    fn sub_threshold_speckle_changes_nothing() {
        let mut img = band_image(60, 64, (10, 40));
        // Speckle of amplitude 20 on the white background: adjacent rows
        // differ by at most 20 < 30 there.
        for y in 0..64usize {
            if (10..=40).contains(&y) {
                continue;
            }
            for x in 0..60usize {
                let bump = ((x * 7 + y * 13) % 21) as u8; // 0..=20
                img.set_pixel(x, y, &[255 - bump]);
            }
        }
        let config = EdgeScanConfig { threshold: 30.0, min_edge_pixels: 1 };
        let report = detect_text_height(&img, &config).unwrap();
        assert_eq!((report.first_row, report.last_row, report.height), (9, 40, 31));
    }

    #[test]
    fn shifting_the_band_shifts_the_rows() {
        let config = EdgeScanConfig::default();
        let a = detect_text_height(&band_image(40, 80, (12, 33)), &config).unwrap();
        let b = detect_text_height(&band_image(40, 80, (19, 40)), &config).unwrap();
        assert_eq!(b.first_row, a.first_row + 7);
        assert_eq!(b.last_row, a.last_row + 7);
        assert_eq!(a.height, b.height);
    }

    #[test]
    fn raising_threshold_shrinks_edge_rows() {
        let mut img = ImageBuffer::filled_gray(30, 50, 200).unwrap();
        for y in 15..25 {
            for x in 0..30 {
                img.set_pixel(x, y, &[150]); // contrast 50
            }
        }
        for y in 30..40 {
            for x in 0..30 {
                img.set_pixel(x, y, &[40]); // contrast 160
            }
        }
        let low = edge_rows(&img, &EdgeScanConfig { threshold: 40.0, min_edge_pixels: 1 }).unwrap();
        let high = edge_rows(&img, &EdgeScanConfig { threshold: 100.0, min_edge_pixels: 1 }).unwrap();
        assert!(high.iter().all(|r| low.contains(r)));
        assert!(high.len() < low.len());
    }

    #[test]
    fn single_channel_difference_suffices() {
        // Band differs from the background only in the green channel.
        let mut img = ImageBuffer::filled_rgb(25, 40, [100, 100, 100]).unwrap();
        for y in 8..20 {
            for x in 0..25 {
                img.set_pixel(x, y, &[100, 250, 100]);
            }
        }
        let config = EdgeScanConfig { threshold: 30.0, min_edge_pixels: 2 };
        let report = detect_text_height(&img, &config).unwrap();
        assert_eq!((report.first_row, report.last_row), (7, 19));
    }

    #[test]
    fn min_edge_pixels_suppresses_isolated_speckle() {
        let mut img = ImageBuffer::filled_gray(30, 30, 255).unwrap();
        img.set_pixel(4, 3, &[0]); // single stray dark pixel
        let permissive = EdgeScanConfig { threshold: 30.0, min_edge_pixels: 1 };
        let strict = EdgeScanConfig { threshold: 30.0, min_edge_pixels: 2 };
        assert!(detect_text_height(&img, &permissive).is_ok());
        assert_eq!(detect_text_height(&img, &strict), Err(SizeError::NoEdges));
    }

    #[test]
    fn tiny_image_is_rejected() {
        let img = ImageBuffer::filled_gray(10, 1, 0).unwrap();
        assert_eq!(
            detect_text_height(&img, &EdgeScanConfig::default()),
            Err(SizeError::ImageTooSmall)
        );
    }

    #[test]
    fn bad_config_is_rejected() {
        let img = ImageBuffer::filled_gray(10, 10, 0).unwrap();
        let bad_t = EdgeScanConfig { threshold: 0.0, min_edge_pixels: 1 };
        let bad_q = EdgeScanConfig { threshold: 30.0, min_edge_pixels: 0 };
        assert!(matches!(detect_text_height(&img, &bad_t), Err(SizeError::InvalidConfig(_))));
        assert!(matches!(detect_text_height(&img, &bad_q), Err(SizeError::InvalidConfig(_))));
    }
}
