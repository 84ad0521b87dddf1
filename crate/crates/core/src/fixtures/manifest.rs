//! Fixture set generation and the sidecar manifest.
//!
//! A fixture set is a directory of PGM/PPM images plus `manifest.tsv`, one
//! record per line: a kind tag followed by tab-separated `key=value` pairs.
//! Style lines carry the class label and the train/val split; color and
//! size lines carry their planted truths.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::image::ImageBuffer;

use super::{
    default_classes, gen_color_truth, gen_size_truth, mix_seed, render_sample, Augment, ColorTruth,
    FixtureError, SizeTruth,
};

pub const MANIFEST_NAME: &str = "manifest.tsv";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
}

impl Split {
    fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StyleEntry {
    pub path: String,
    pub class_id: usize,
    pub class_name: String,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColorEntry {
    pub path: String,
    pub truth: ColorTruth,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SizeEntry {
    pub path: String,
    pub truth: SizeTruth,
}

/// Parsed manifest of one fixture directory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    pub style: Vec<StyleEntry>,
    pub color: Vec<ColorEntry>,
    pub size: Vec<SizeEntry>,
}

impl Manifest {
    pub fn class_names(&self) -> Vec<String> {
        let mut names: Vec<(usize, String)> =
            self.style.iter().map(|e| (e.class_id, e.class_name.clone())).collect();
        names.sort();
        names.dedup();
        names.into_iter().map(|(_, n)| n).collect()
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for e in &self.style {
            out.push_str(&format!(
                "style\tpath={}\tclass_id={}\tclass={}\tsplit={}\n",
                e.path,
                e.class_id,
                e.class_name,
                e.split.as_str()
            ));
        }
        for e in &self.color {
            let t = &e.truth;
            out.push_str(&format!(
                "color\tpath={}\tbackground={},{},{}\ttext={},{},{}\ttext_fraction={}\ttext_pixels={}\n",
                e.path,
                t.background[0],
                t.background[1],
                t.background[2],
                t.text[0],
                t.text[1],
                t.text[2],
                t.text_fraction,
                t.text_pixel_count
            ));
        }
        for e in &self.size {
            let t = &e.truth;
            out.push_str(&format!(
                "size\tpath={}\tfirst_band={}\tlast_band={}\tfirst_edge={}\tlast_edge={}\theight={}\n",
                e.path, t.first_band_row, t.last_band_row, t.first_edge_row, t.last_edge_row, t.height
            ));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, FixtureError> {
        let mut manifest = Manifest::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            if raw.is_empty() || raw.starts_with('#') {
                continue;
            }
            let mut fields = raw.split('\t');
            let kind = fields.next().unwrap_or_default();
            let mut get = FieldMap::new(fields, line)?;
            match kind {
                "style" => {
                    manifest.style.push(StyleEntry {
                        path: get.string("path")?,
                        class_id: get.number("class_id")? as usize,
                        class_name: get.string("class")?,
                        split: match get.string("split")?.as_str() {
                            "train" => Split::Train,
                            "val" => Split::Val,
                            other => {
                                return Err(FixtureError::ManifestParse {
                                    line,
                                    message: format!("unknown split {other:?}"),
                                })
                            }
                        },
                    });
                }
                "color" => {
                    let background = get.rgb("background")?;
                    let text = get.rgb("text")?;
                    let text_fraction = get.number("text_fraction")?;
                    let text_pixel_count = get.number("text_pixels")? as usize;
                    manifest.color.push(ColorEntry {
                        path: get.string("path")?,
                        truth: ColorTruth { background, text, text_fraction, text_pixel_count },
                    });
                }
                "size" => {
                    manifest.size.push(SizeEntry {
                        path: get.string("path")?,
                        truth: SizeTruth {
                            first_band_row: get.number("first_band")? as usize,
                            last_band_row: get.number("last_band")? as usize,
                            first_edge_row: get.number("first_edge")? as usize,
                            last_edge_row: get.number("last_edge")? as usize,
                            height: get.number("height")? as usize,
                        },
                    });
                }
                other => {
                    return Err(FixtureError::ManifestParse {
                        line,
                        message: format!("unknown record kind {other:?}"),
                    })
                }
            }
        }
        Ok(manifest)
    }

    pub fn write_to_dir<P: AsRef<Path>>(&self, dir: P) -> Result<(), FixtureError> {
        fs::write(dir.as_ref().join(MANIFEST_NAME), self.to_tsv())?;
        Ok(())
    }

    pub fn read_from_dir<P: AsRef<Path>>(dir: P) -> Result<Self, FixtureError> {
        let text = fs::read_to_string(dir.as_ref().join(MANIFEST_NAME))?;
        Self::parse(&text)
    }

    /// Load all style images, preserving entry order.
    pub fn load_style_images<P: AsRef<Path>>(
        &self,
        dir: P,
    ) -> Result<Vec<(ImageBuffer, usize, Split)>, FixtureError> {
        let mut out = Vec::with_capacity(self.style.len());
        for e in &self.style {
            let img = ImageBuffer::read_pnm(dir.as_ref().join(&e.path))?;
            out.push((img, e.class_id, e.split));
        }
        Ok(out)
    }
}

struct FieldMap {
    pairs: Vec<(String, String)>,
    line: usize,
}

impl FieldMap {
    fn new<'a, I: Iterator<Item = &'a str>>(fields: I, line: usize) -> Result<Self, FixtureError> {
        let mut pairs = Vec::new();
        for f in fields {
            let (k, v) = f.split_once('=').ok_or(FixtureError::ManifestParse {
                line,
                message: format!("field {f:?} is not key=value"),
            })?;
            pairs.push((k.to_owned(), v.to_owned()));
        }
        Ok(FieldMap { pairs, line })
    }

    fn string(&mut self, key: &str) -> Result<String, FixtureError> {
        self.pairs
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.clone())
            .ok_or(FixtureError::ManifestParse {
                line: self.line,
                message: format!("missing field {key}"),
            })
    }

    fn number(&mut self, key: &str) -> Result<f64, FixtureError> {
        let raw = self.string(key)?;
        raw.parse().map_err(|_| FixtureError::ManifestParse {
            line: self.line,
            message: format!("field {key}: cannot parse {raw:?} as a number"),
        })
    }

    fn rgb(&mut self, key: &str) -> Result<[u8; 3], FixtureError> {
        let raw = self.string(key)?;
        let parts: Vec<&str> = raw.split(',').collect();
        if parts.len() != 3 {
            return Err(FixtureError::ManifestParse {
                line: self.line,
                message: format!("field {key}: expected r,g,b, got {raw:?}"),
            });
        }
        let mut out = [0u8; 3];
        for (o, p) in out.iter_mut().zip(parts) {
            *o = p.parse().map_err(|_| FixtureError::ManifestParse {
                line: self.line,
                message: format!("field {key}: bad channel {p:?}"),
            })?;
        }
        Ok(out)
    }
}

/// What [`generate_fixture_set`] produces.
#[derive(Debug, Clone, Copy)]
pub struct FixtureSetOptions {
    pub classes: usize,
    pub train_per_class: usize,
    pub val_per_class: usize,
    pub color_samples: usize,
    pub size_samples: usize,
    pub seed: u64,
}

impl Default for FixtureSetOptions {
    fn default() -> Self {
        FixtureSetOptions {
            classes: 5,
            train_per_class: 200,
            val_per_class: 50,
            color_samples: 20,
            size_samples: 20,
            seed: 0,
        }
    }
}

/// Generate a full fixture set under `dir`: augmented pseudo-font samples
/// for every class and split, planted color and size truth images, and the
/// manifest describing them all. Deterministic per options.
pub fn generate_fixture_set<P: AsRef<Path>>(
    dir: P,
    options: &FixtureSetOptions,
) -> Result<Manifest, FixtureError> {
    if options.classes < 1 {
        return Err(FixtureError::InvalidParams("at least one class required".into()));
    }
    let dir = dir.as_ref();
    fs::create_dir_all(dir.join("images"))?;

    let mut manifest = Manifest::default();
    let class_specs = default_classes(options.classes, options.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(options.seed, 0xAB5E7, 1));

    for spec in &class_specs {
        let class_name = format!("pseudo-{:02}", spec.class_id);
        let total = options.train_per_class + options.val_per_class;
        for index in 0..total {
            let augment = Augment {
                scale: rng.gen_range(0.85..=1.3),
                contrast: rng.gen_range(0.7..=1.4),
                noise: rng.gen_range(0.0..=12.0),
            };
            let image = render_sample(spec, index as u64, &augment)?;
            let split = if index < options.train_per_class { Split::Train } else { Split::Val };
            let path = format!(
                "images/style_c{:02}_{}_{index:04}.pgm",
                spec.class_id,
                split.as_str()
            );
            image.write_pnm(dir.join(&path))?;
            manifest.style.push(StyleEntry {
                path,
                class_id: spec.class_id,
                class_name: class_name.clone(),
                split,
            });
        }
    }

    for i in 0..options.color_samples {
        let width = rng.gen_range(40..=90);
        let height = rng.gen_range(30..=70);
        let fraction = rng.gen_range(0.12..=0.4);
        let amplitude = rng.gen_range(0.0..=9.0);
        let sample_seed = rng.gen::<u64>();
        let (image, truth) = gen_color_truth(width, height, fraction, amplitude, sample_seed)?;
        let path = format!("images/color_{i:04}.ppm");
        image.write_pnm(dir.join(&path))?;
        manifest.color.push(ColorEntry { path, truth });
    }

    for i in 0..options.size_samples {
        let width = rng.gen_range(40..=90);
        let height = rng.gen_range(32..=80);
        let first = rng.gen_range(1..height / 2);
        let last = rng.gen_range(first..=height - 2);
        let amplitude = rng.gen_range(0.0..=14.0);
        let sample_seed = rng.gen::<u64>();
        let (image, truth) = gen_size_truth(width, height, (first, last), amplitude, sample_seed)?;
        let path = format!("images/size_{i:04}.pgm");
        image.write_pnm(dir.join(&path))?;
        manifest.size.push(SizeEntry { path, truth });
    }

    manifest.write_to_dir(dir)?;
    Ok(manifest)
}
