use std::path::Path;
use std::time::Instant;

use fontsense_core::color::{detect_text_color, ColorError};
use fontsense_core::fixtures::{generate_fixture_set, FixtureSetOptions, Manifest, Split};
use fontsense_core::image::ImageBuffer;
use fontsense_core::predict::{
    extend_dataset, predict_similar, read_dataset, write_dataset, DatasetError, ExtensionConfig,
    FontRecord, PredictError, PredictionConfig, WeightingMode,
};
use fontsense_core::size::{detect_text_height, EdgeScanConfig, SizeError};
use fontsense_core::style_net::{preprocess, train as train_net, StyleNet, TrainConfig};

use crate::report::Report;
use crate::{
    Cli, CliError, DetectArgs, ExtendArgs, GenFixturesArgs, PredictArgs, TrainArgs, WeightingArg,
};

fn dataset_err(context: &str, e: DatasetError) -> CliError {
    CliError::bad_input(format!("{context}: {e}"))
}

/// Output paths are checked before any expensive work starts.
fn check_output_path(path: &str) -> Result<(), CliError> {
    let parent = Path::new(path).parent().unwrap_or_else(|| Path::new(""));
    if !parent.as_os_str().is_empty() && !parent.is_dir() {
        return Err(CliError::bad_input(format!(
            "output directory {} does not exist",
            parent.display()
        )));
    }
    Ok(())
}

pub fn detect(cli: &Cli, args: &DetectArgs) -> Result<(), CliError> {
    if args.kmeans_k == 0 {
        return Err(CliError { code: 2, message: "--kmeans-k must be >= 1".into() });
    }
    if !(args.threshold > 0.0 && args.threshold < 255.0) {
        return Err(CliError { code: 2, message: "--threshold must lie in (0, 255)".into() });
    }
    if args.min_edge_pixels == 0 {
        return Err(CliError { code: 2, message: "--min-edge-pixels must be >= 1".into() });
    }

    let model = StyleNet::load(&args.model)
        .map_err(|e| CliError::bad_input(format!("model {}: {e}", args.model)))?;
    let image = ImageBuffer::read_pnm(&args.image)
        .map_err(|e| CliError::bad_input(format!("image {}: {e}", args.image)))?;

    let t0 = Instant::now();
    let input = preprocess(&image)
        .map_err(|e| CliError::bad_input(format!("image {}: {e}", args.image)))?;
    let t_preprocess = t0.elapsed();

    let t1 = Instant::now();
    let style = model
        .infer(&input)
        .map_err(|e| CliError::failure(format!("detection_failure reason=style: {e}")))?;
    let t_infer = t1.elapsed();

    let t2 = Instant::now();
    let color = detect_text_color(&image, args.kmeans_k).map_err(|e| match e {
        ColorError::EmptyImage | ColorError::EmptyPixelSet => {
            CliError::failure(format!("detection_failure reason=empty_image: {e}"))
        }
        ColorError::InvalidK(_) => CliError { code: 2, message: e.to_string() },
    })?;
    let t_color = t2.elapsed();

    let t3 = Instant::now();
    let size_config = EdgeScanConfig { threshold: args.threshold, min_edge_pixels: args.min_edge_pixels };
    let size = detect_text_height(&image, &size_config).map_err(|e| {
        let reason = match e {
            SizeError::NoEdges => "no_edges",
            SizeError::ImageTooSmall => "image_too_small",
            SizeError::InvalidConfig(_) => "bad_config",
        };
        CliError::failure(format!("detection_failure reason={reason}: {e}"))
    })?;
    let t_size = t3.elapsed();

    if cli.time {
        eprintln!(
            "time: preprocess {:.3} ms, infer {:.3} ms, color {:.3} ms, size {:.3} ms",
            t_preprocess.as_secs_f64() * 1e3,
            t_infer.as_secs_f64() * 1e3,
            t_color.as_secs_f64() * 1e3,
            t_size.as_secs_f64() * 1e3,
        );
    }

    let mut report = Report::new();
    let shown = args.top_k.min(style.ranked.len());
    let mut style_text = Vec::with_capacity(shown);
    for (i, r) in style.ranked.iter().take(shown).enumerate() {
        report.entry(format!("style_{}_label", i + 1), &r.label);
        report.entry(format!("style_{}_confidence", i + 1), r.confidence);
        style_text.push(format!("{} ({})", r.label, r.confidence));
    }
    let [r, g, b] = color.text_color.to_rgb8();
    report.entry("color_r", r);
    report.entry("color_g", g);
    report.entry("color_b", b);
    report.entry("color_single_cluster", color.single_cluster);
    report.entry("size_height", size.height);
    report.entry("size_first_row", size.first_row);
    report.entry("size_last_row", size.last_row);

    report.text_line(format!("style: {}", style_text.join(", ")));
    report.text_line(format!(
        "color: rgb({r}, {g}, {b}){}",
        if color.single_cluster { " [single cluster]" } else { "" }
    ));
    report.text_line(format!(
        "size: height {} px (rows {}..{})",
        size.height, size.first_row, size.last_row
    ));
    report.print(cli.format);
    Ok(())
}

pub fn predict(cli: &Cli, args: &PredictArgs) -> Result<(), CliError> {
    let parsed = read_dataset(&args.dataset)
        .map_err(|e| dataset_err(&format!("dataset {}", args.dataset), e))?;
    let records: Vec<FontRecord> = parsed
        .into_iter()
        .map(|p| p.into_font_record())
        .collect::<Result<_, _>>()
        .map_err(|e| dataset_err(&format!("dataset {}", args.dataset), e))?;

    let config = PredictionConfig { top_n: args.top_n, ..Default::default() };
    let ranked = predict_similar(&args.query, &records, &config).map_err(|e| match e {
        PredictError::UnknownFont(_) => CliError::failure(e.to_string()),
        other => CliError::bad_input(other.to_string()),
    })?;

    let mut report = Report::new();
    report.entry("query", &args.query);
    report.entry("result_count", ranked.len());
    report.text_line(format!("similar to {}:", args.query));
    for (i, r) in ranked.iter().enumerate() {
        report.entry(format!("result_{}_name", i + 1), &r.name);
        report.entry(format!("result_{}_distance", i + 1), r.distance);
        report.text_line(format!("{:3}. {} (distance {})", i + 1, r.name, r.distance));
    }
    report.print(cli.format);
    Ok(())
}

pub fn extend(cli: &Cli, args: &ExtendArgs) -> Result<(), CliError> {
    check_output_path(&args.output)?;
    let seed_parsed = read_dataset(&args.seed_fonts)
        .map_err(|e| dataset_err(&format!("seed fonts {}", args.seed_fonts), e))?;
    let seeds: Vec<FontRecord> = seed_parsed
        .into_iter()
        .map(|p| p.into_font_record())
        .collect::<Result<_, _>>()
        .map_err(|e| dataset_err(&format!("seed fonts {}", args.seed_fonts), e))?;

    let new_parsed = read_dataset(&args.new_fonts)
        .map_err(|e| dataset_err(&format!("new fonts {}", args.new_fonts), e))?;
    let new_fonts: Vec<_> = new_parsed
        .into_iter()
        .map(|p| p.into_embedding_only())
        .collect::<Result<_, _>>()
        .map_err(|e| dataset_err(&format!("new fonts {}", args.new_fonts), e))?;

    let mode = match args.weighting {
        WeightingArg::InverseDistance => WeightingMode::InverseDistance,
        WeightingArg::Constant => WeightingMode::Constant,
    };
    let config = ExtensionConfig { k: args.k, mode };
    let extended = extend_dataset(&seeds, &new_fonts, &config).map_err(|e| match e {
        PredictError::KTooLarge { .. } | PredictError::TooFewNeighbors(_) => {
            CliError::failure(e.to_string())
        }
        other => CliError::bad_input(other.to_string()),
    })?;

    write_dataset(&args.output, &extended)
        .map_err(|e| dataset_err(&format!("output {}", args.output), e))?;

    let mut report = Report::new();
    report.entry("seed_count", seeds.len());
    report.entry("extended_count", extended.len() - seeds.len());
    report.entry("total_count", extended.len());
    report.entry("output", &args.output);
    report.text_line(format!(
        "extended {} seed fonts by {} new fonts -> {} records in {}",
        seeds.len(),
        extended.len() - seeds.len(),
        extended.len(),
        args.output
    ));
    report.print(cli.format);
    Ok(())
}

pub fn train(cli: &Cli, args: &TrainArgs) -> Result<(), CliError> {
    check_output_path(&args.output)?;
    let manifest = Manifest::read_from_dir(&args.fixtures)
        .map_err(|e| CliError::bad_input(format!("fixtures {}: {e}", args.fixtures)))?;
    let images = manifest
        .load_style_images(&args.fixtures)
        .map_err(|e| CliError::bad_input(format!("fixtures {}: {e}", args.fixtures)))?;
    if images.is_empty() {
        return Err(CliError::bad_input("fixture set contains no style samples"));
    }

    let mut train_set = Vec::new();
    let mut val_set = Vec::new();
    for (image, class, split) in images {
        let tensor =
            preprocess(&image).map_err(|e| CliError::bad_input(format!("fixture image: {e}")))?;
        match split {
            Split::Train => train_set.push((tensor, class)),
            Split::Val => val_set.push((tensor, class)),
        }
    }

    let labels = manifest.class_names();
    let mut net = StyleNet::toy(labels, cli.seed)
        .map_err(|e| CliError::bad_input(format!("model construction: {e}")))?;
    let config = TrainConfig {
        epochs: args.epochs,
        learning_rate: args.learning_rate,
        momentum: args.momentum,
        stop_at_val_accuracy: args.target_accuracy,
        seed: cli.seed,
        ..Default::default()
    };
    let metrics = train_net(&mut net, &train_set, &val_set, &config).map_err(|e| {
        use fontsense_core::style_net::StyleError;
        match e {
            StyleError::TrainingDiverged { .. } => CliError::failure(e.to_string()),
            other => CliError::bad_input(other.to_string()),
        }
    })?;

    net.save(&args.output)
        .map_err(|e| CliError::bad_input(format!("output {}: {e}", args.output)))?;

    let mut report = Report::new();
    report.entry("train_samples", train_set.len());
    report.entry("val_samples", val_set.len());
    report.entry("epochs_run", metrics.len());
    report.entry("parameter_count", net.summary().parameter_count);
    report.text_line(format!(
        "trained on {} samples ({} validation) for {} epoch(s); {} parameters",
        train_set.len(),
        val_set.len(),
        metrics.len(),
        net.summary().parameter_count
    ));
    for m in &metrics {
        report.entry(format!("epoch_{}_loss", m.epoch), m.train_loss);
        report.entry(format!("epoch_{}_train_accuracy", m.epoch), m.train_accuracy);
        report.entry(format!("epoch_{}_val_accuracy", m.epoch), m.val_accuracy);
        report.text_line(format!(
            "epoch {:3}: loss {:.6} train_acc {:.4} val_acc {:.4}",
            m.epoch, m.train_loss, m.train_accuracy, m.val_accuracy
        ));
    }
    report.entry("model", &args.output);
    report.text_line(format!("model written to {}", args.output));
    report.print(cli.format);
    Ok(())
}

pub fn gen_fixtures(cli: &Cli, args: &GenFixturesArgs) -> Result<(), CliError> {
    let options = FixtureSetOptions {
        classes: args.classes,
        train_per_class: args.train_per_class,
        val_per_class: args.val_per_class,
        color_samples: args.color_samples,
        size_samples: args.size_samples,
        seed: cli.seed,
    };
    let manifest = generate_fixture_set(&args.output, &options)
        .map_err(|e| CliError::bad_input(format!("fixture generation: {e}")))?;

    let mut report = Report::new();
    report.entry("style_samples", manifest.style.len());
    report.entry("color_samples", manifest.color.len());
    report.entry("size_samples", manifest.size.len());
    report.entry("directory", &args.output);
    report.text_line(format!(
        "wrote {} style, {} color, {} size samples to {}",
        manifest.style.len(),
        manifest.color.len(),
        manifest.size.len(),
        args.output
    ));
    report.print(cli.format);
    Ok(())
}
