//! Color and size detectors against brute-force oracles on planted images.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use fontsense_core::color::{color_distance, detect_text_color, kmeans, ColorPoint};
use fontsense_core::fixtures::{gen_color_truth, gen_size_truth};
use fontsense_core::image::ImageBuffer;
use fontsense_core::size::{detect_text_height, edge_rows, EdgeScanConfig};

/// Independent edge scan: enumerate every (row, column, channel) triple and
/// apply the threshold test directly.
fn edge_rows_oracle(image: &ImageBuffer, threshold: f64, min_edge_pixels: usize) -> Vec<usize> {
    let mut rows = Vec::new();
    for i in 0..image.height() - 1 {
        let mut columns = 0;
        for j in 0..image.width() {
            let a = image.pixel(j, i);
            let b = image.pixel(j, i + 1);
            let mut any = false;
            for ch in 0..image.channels() {
                if (a[ch] as f64 - b[ch] as f64).abs() > threshold {
                    any = true;
                }
            }
            if any {
                columns += 1;
            }
        }
        if columns >= min_edge_pixels {
            rows.push(i);
        }
    }
    rows
}

#[test]
fn size_detector_equals_the_brute_force_oracle_on_planted_images() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5123);
    for trial in 0..100u64 {
        let width = rng.gen_range(20..=80);
        let height = rng.gen_range(24..=96);
        let first = rng.gen_range(1..height / 2);
        let last = rng.gen_range(first..=height - 2);
        let amplitude = rng.gen_range(0.0..=14.0);
        let (image, truth) = gen_size_truth(width, height, (first, last), amplitude, trial).unwrap();

        let config = EdgeScanConfig { threshold: 30.0, min_edge_pixels: 2 };
        let report = detect_text_height(&image, &config).unwrap();
        assert_eq!(report.first_row, truth.first_edge_row, "trial {trial}");
        assert_eq!(report.last_row, truth.last_edge_row, "trial {trial}");
        assert_eq!(report.height, truth.height, "trial {trial}");

        let oracle = edge_rows_oracle(&image, 30.0, 2);
        assert_eq!(edge_rows(&image, &config).unwrap(), oracle, "trial {trial}");
    }
}

#[test]
fn raising_the_threshold_never_adds_edge_rows() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7113);
    for trial in 0..40u64 {
        let width = rng.gen_range(16..=60);
        let height = rng.gen_range(20..=70);
        // Free-form noise image, not just planted bands.
        let data: Vec<u8> = (0..width * height).map(|_| rng.gen()).collect();
        let image = ImageBuffer::new(width, height, 1, data).unwrap();
        let low = EdgeScanConfig { threshold: rng.gen_range(5.0..100.0), min_edge_pixels: 1 };
        let high = EdgeScanConfig { threshold: low.threshold + rng.gen_range(1.0..100.0), ..low };
        let rows_low = edge_rows(&image, &low).unwrap();
        let rows_high = edge_rows(&image, &high).unwrap();
        assert!(
            rows_high.iter().all(|r| rows_low.contains(r)),
            "trial {trial}: edge rows grew when the threshold rose"
        );
    }
}

#[test]
fn planted_text_color_is_recovered_under_noise() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC017);
    let trials = 40;
    let mut hits = 0;
    for trial in 0..trials {
        let width = rng.gen_range(30..=80);
        let height = rng.gen_range(24..=60);
        let fraction = rng.gen_range(0.12..=0.4);
        let amplitude = rng.gen_range(0.0..10.0);
        let (image, truth) = gen_color_truth(width, height, fraction, amplitude, trial).unwrap();
        let report = detect_text_color(&image, 2).unwrap();
        let planted = ColorPoint::from_rgb8(truth.text);
        if color_distance(report.text_color, planted) <= 15.0 {
            hits += 1;
        }
    }
    assert!(hits >= trials * 95 / 100, "recovered {hits}/{trials}");
}

#[test]
fn noiseless_two_color_images_are_recovered_exactly() {
    for trial in 0..30u64 {
        let (image, truth) = gen_color_truth(48, 36, 0.3, 0.0, 1000 + trial).unwrap();
        let report = detect_text_color(&image, 2).unwrap();
        let planted_text = ColorPoint::from_rgb8(truth.text);
        let planted_bg = ColorPoint::from_rgb8(truth.background);
        assert!((report.text_color.r - planted_text.r).abs() <= 1.0);
        assert!((report.text_color.g - planted_text.g).abs() <= 1.0);
        assert!((report.text_color.b - planted_text.b).abs() <= 1.0);
        assert!((report.ranked[0].centroid.r - planted_bg.r).abs() <= 1.0);
    }
}

#[test]
fn kmeans_invariants_on_random_pixel_sets() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xBEEF);
    for trial in 0..25 {
        let n = rng.gen_range(50..400);
        let pixels: Vec<ColorPoint> = (0..n)
            .map(|_| {
                ColorPoint::new(
                    rng.gen_range(0..256) as f64,
                    rng.gen_range(0..256) as f64,
                    rng.gen_range(0..256) as f64,
                )
            })
            .collect();
        let k = rng.gen_range(1..=6);
        let set = kmeans(&pixels, k).unwrap();

        // Count conservation.
        assert_eq!(set.counts.iter().sum::<usize>(), pixels.len(), "trial {trial}");
        assert_eq!(set.assignment.len(), pixels.len());

        // Assignment optimality: each pixel's cluster is at least as close
        // as any other centroid.
        for (p, &a) in pixels.iter().zip(&set.assignment) {
            let assigned = color_distance(*p, set.centroids[a]);
            for c in &set.centroids {
                assert!(assigned <= color_distance(*p, *c) + 1e-9);
            }
        }

        // Objective monotonicity.
        for pair in set.objective_trace.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-6, "objective rose: {pair:?}");
        }
    }
}

#[test]
fn cluster_ranking_is_independent_of_pixel_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xAA17);
    for trial in 0..10u64 {
        let (image, _) = gen_color_truth(40, 30, 0.3, 6.0, 500 + trial).unwrap();
        let mut pixels = Vec::new();
        for y in 0..image.height() {
            for x in 0..image.width() {
                pixels.push(ColorPoint::from_rgb8(image.pixel_rgb(x, y)));
            }
        }
        let forward = kmeans(&pixels, 3).unwrap();
        // Deterministic shuffle of the pixel order.
        use rand::seq::SliceRandom;
        let mut shuffled = pixels.clone();
        shuffled.shuffle(&mut rng);
        let permuted = kmeans(&shuffled, 3).unwrap();
        assert_eq!(forward.centroids, permuted.centroids, "trial {trial}");
        {
            let mut a = forward.counts.clone();
            let mut b = permuted.counts.clone();
            a.sort_unstable();
            b.sort_unstable();
            assert_eq!(a, b);
        }
    }
}
