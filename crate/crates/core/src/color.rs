//! Text-color detection: K-means clustering of RGB pixel values followed by
//! the second-largest-area rule (in a cropped text image the background
//! occupies the most area and the text the second most).

use std::collections::BTreeMap;
use std::fmt;

use crate::image::ImageBuffer;

const MAX_ITERATIONS: usize = 50;
const CONVERGENCE_MOVEMENT: f64 = 0.5;

/// Default cluster count: background, text, anti-aliased fringe and two
/// accent colors.
pub const DEFAULT_K: usize = 5;

/// A point in RGB space; components in [0, 255].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColorPoint {
    pub r: f64,
    pub g: f64,
    pub b: f64,
}

impl ColorPoint {
    pub fn new(r: f64, g: f64, b: f64) -> Self {
        ColorPoint { r, g, b }
    }

    pub fn from_rgb8(rgb: [u8; 3]) -> Self {
        ColorPoint { r: rgb[0] as f64, g: rgb[1] as f64, b: rgb[2] as f64 }
    }

    /// Nearest 8-bit color (componentwise round, clamped).
    pub fn to_rgb8(self) -> [u8; 3] {
        let q = |v: f64| v.round().clamp(0.0, 255.0) as u8;
        [q(self.r), q(self.g), q(self.b)]
    }

    /// Total-order key (bit patterns); used only for deterministic
    /// tie-breaking, never for distance.
    fn order_key(self) -> [u64; 3] {
        [self.r.to_bits(), self.g.to_bits(), self.b.to_bits()]
    }
}

/// Euclidean distance between two RGB points.
pub fn color_distance(a: ColorPoint, b: ColorPoint) -> f64 {
    let dr = a.r - b.r;
    let dg = a.g - b.g;
    let db = a.b - b.b;
    (dr * dr + dg * dg + db * db).sqrt()
}

fn squared_distance(a: ColorPoint, b: ColorPoint) -> f64 {
    let dr = a.r - b.r;
    let dg = a.g - b.g;
    let db = a.b - b.b;
    dr * dr + dg * dg + db * db
}

/// Result of Lloyd's algorithm on a pixel set.
#[derive(Debug, Clone)]
pub struct ClusterSet {
    pub centroids: Vec<ColorPoint>,
    /// Pixels assigned to each centroid; sums to the pixel count.
    pub counts: Vec<usize>,
    /// Cluster index per pixel, in input order.
    pub assignment: Vec<usize>,
    /// Within-cluster sum of squared distances after each assignment step;
    /// non-increasing.
    pub objective_trace: Vec<f64>,
}

#[derive(Debug)]
pub enum ColorError {
    EmptyPixelSet,
    EmptyImage,
    InvalidK(usize),
}

impl fmt::Display for ColorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColorError::EmptyPixelSet => write!(f, "no pixels to cluster"),
            ColorError::EmptyImage => write!(f, "empty image"),
            ColorError::InvalidK(k) => write!(f, "invalid cluster count {k}"),
        }
    }
}

impl std::error::Error for ColorError {}

/// Nearest centroid index; ties go to the lowest index.
fn nearest_centroid(p: ColorPoint, centroids: &[ColorPoint]) -> usize {
    let mut best = 0usize;
    let mut best_d = squared_distance(p, centroids[0]);
    for (i, c) in centroids.iter().enumerate().skip(1) {
        let d = squared_distance(p, *c);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

/// Deterministic initial centroids.
///
/// Pixels are bucketed at 4 bits per channel; the means of the most
/// populated buckets (ties by bucket index) seed the centroids. If fewer
/// non-empty buckets than `k` exist, the remaining seeds are the exact
/// colors farthest from any seed chosen so far (ties by component order).
fn initial_centroids(pixels: &[ColorPoint], k: usize, distinct: &[ColorPoint]) -> Vec<ColorPoint> {
    const BUCKETS: usize = 1 << 12;
    let mut count = vec![0usize; BUCKETS];
    let mut sum = vec![[0.0f64; 3]; BUCKETS];
    for p in pixels {
        let q = |v: f64| (v.clamp(0.0, 255.0) as usize >> 4).min(15);
        let idx = (q(p.r) << 8) | (q(p.g) << 4) | q(p.b);
        count[idx] += 1;
        sum[idx][0] += p.r;
        sum[idx][1] += p.g;
        sum[idx][2] += p.b;
    }
    let mut order: Vec<usize> = (0..BUCKETS).filter(|&i| count[i] > 0).collect();
    order.sort_by(|&a, &b| count[b].cmp(&count[a]).then(a.cmp(&b)));

    let mut centroids: Vec<ColorPoint> = order
        .iter()
        .take(k)
        .map(|&i| {
            let n = count[i] as f64;
            ColorPoint::new(sum[i][0] / n, sum[i][1] / n, sum[i][2] / n)
        })
        .collect();

    while centroids.len() < k {
        let mut best: Option<(f64, ColorPoint)> = None;
        for &c in distinct {
            if centroids.contains(&c) {
                continue;
            }
            let d = centroids
                .iter()
                .map(|&s| squared_distance(c, s))
                .fold(f64::INFINITY, f64::min);
            let better = match best {
                None => true,
                Some((bd, bc)) => d > bd || (d == bd && c.order_key() < bc.order_key()),
            };
            if better {
                best = Some((d, c));
            }
        }
        match best {
            Some((_, c)) => centroids.push(c),
            None => break,
        }
    }
    centroids
}

/// Lloyd's K-means over RGB pixels.
///
/// Deterministic: seeded by bucket frequencies, assignment ties to the
/// lowest centroid index, all reductions order-independent. Iterates until
/// the largest centroid movement drops below 0.5 or 50 iterations. If fewer
/// than `k` distinct colors exist, the cluster count is reduced to the
/// distinct-color count.
pub fn kmeans(pixels: &[ColorPoint], k: usize) -> Result<ClusterSet, ColorError> {
    if pixels.is_empty() {
        return Err(ColorError::EmptyPixelSet);
    }
    if k == 0 {
        return Err(ColorError::InvalidK(k));
    }

    let mut distinct_map: BTreeMap<[u64; 3], ColorPoint> = BTreeMap::new();
    for p in pixels {
        distinct_map.entry(p.order_key()).or_insert(*p);
    }
    let distinct: Vec<ColorPoint> = distinct_map.into_values().collect();
    let k = k.min(distinct.len());

    let mut centroids = initial_centroids(pixels, k, &distinct);
    let k = centroids.len();
    let mut assignment = vec![0usize; pixels.len()];
    let mut objective_trace = Vec::new();

    for _ in 0..MAX_ITERATIONS {
        let mut objective = 0.0;
        for (i, p) in pixels.iter().enumerate() {
            let c = nearest_centroid(*p, &centroids);
            assignment[i] = c;
            objective += squared_distance(*p, centroids[c]);
        }
        objective_trace.push(objective);

        let mut sums = vec![[0.0f64; 3]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in pixels.iter().zip(&assignment) {
            sums[c][0] += p.r;
            sums[c][1] += p.g;
            sums[c][2] += p.b;
            counts[c] += 1;
        }
        let mut next: Vec<ColorPoint> = (0..k)
            .map(|c| {
                if counts[c] == 0 {
                    centroids[c] // repaired below
                } else {
                    let n = counts[c] as f64;
                    ColorPoint::new(sums[c][0] / n, sums[c][1] / n, sums[c][2] / n)
                }
            })
            .collect();

        // Empty-cluster repair: move the centroid onto the exact color
        // farthest from its current position (ties by component order),
        // avoiding colors already used in this repair round.
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let mut best: Option<(f64, ColorPoint)> = None;
            for &cand in &distinct {
                if next.contains(&cand) {
                    continue;
                }
                let d = squared_distance(cand, centroids[c]);
                let better = match best {
                    None => true,
                    Some((bd, bc)) => d > bd || (d == bd && cand.order_key() < bc.order_key()),
                };
                if better {
                    best = Some((d, cand));
                }
            }
            if let Some((_, cand)) = best {
                next[c] = cand;
            }
        }

        let movement = centroids
            .iter()
            .zip(&next)
            .map(|(a, b)| color_distance(*a, *b))
            .fold(0.0f64, f64::max);
        centroids = next;
        if movement < CONVERGENCE_MOVEMENT {
            break;
        }
    }

    // Final consistency pass so the returned assignment is optimal for the
    // returned centroids.
    let mut counts = vec![0usize; k];
    let mut objective = 0.0;
    for (i, p) in pixels.iter().enumerate() {
        let c = nearest_centroid(*p, &centroids);
        assignment[i] = c;
        counts[c] += 1;
        objective += squared_distance(*p, centroids[c]);
    }
    objective_trace.push(objective);

    Ok(ClusterSet { centroids, counts, assignment, objective_trace })
}

/// One cluster of the ranked output, largest area first.
#[derive(Debug, Clone, Copy)]
pub struct RankedCluster {
    pub centroid: ColorPoint,
    pub count: usize,
}

/// Text-color detection report.
#[derive(Debug, Clone)]
pub struct ColorReport {
    /// Centroid of the second-largest cluster (or the only cluster when
    /// `single_cluster` is set).
    pub text_color: ColorPoint,
    /// Clusters ranked by pixel count descending, ties by centroid index.
    pub ranked: Vec<RankedCluster>,
    /// Set when the image produced a single cluster and the second-largest
    /// rule could not be applied.
    pub single_cluster: bool,
}

/// Detect the text color of a cropped text image: cluster all pixels with
/// K-means, rank clusters by area, return the second-largest centroid.
pub fn detect_text_color(image: &ImageBuffer, k: usize) -> Result<ColorReport, ColorError> {
    if image.width() == 0 || image.height() == 0 {
        return Err(ColorError::EmptyImage);
    }
    let mut pixels = Vec::with_capacity(image.width() * image.height());
    for y in 0..image.height() {
        for x in 0..image.width() {
            pixels.push(ColorPoint::from_rgb8(image.pixel_rgb(x, y)));
        }
    }
    let clusters = kmeans(&pixels, k)?;

    let mut order: Vec<usize> = (0..clusters.centroids.len()).collect();
    order.sort_by(|&a, &b| clusters.counts[b].cmp(&clusters.counts[a]).then(a.cmp(&b)));
    let ranked: Vec<RankedCluster> = order
        .iter()
        .map(|&i| RankedCluster { centroid: clusters.centroids[i], count: clusters.counts[i] })
        .collect();

    let single_cluster = ranked.len() < 2;
    let text_color = if single_cluster { ranked[0].centroid } else { ranked[1].centroid };
    Ok(ColorReport { text_color, ranked, single_cluster })
}
