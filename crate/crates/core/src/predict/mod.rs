//! Similar-font prediction over attribute vectors.
//!
//! Every font carries 37 visual attributes in [0, 100]. A small seed set has
//! ground-truth attributes plus a 200-dimensional appearance embedding; new
//! fonts arrive with only an embedding and gain attributes as a weighted
//! average of their nearest seed neighbors in embedding space. Similar-font
//! queries filter candidates through per-attribute search windows around the
//! query's values (priority attributes only) and rank them by weighted
//! Euclidean attribute distance.

mod dataset;

use std::fmt;

pub use dataset::{parse_dataset, read_dataset, write_dataset, DatasetError, ParsedFont};

/// Attribute vector dimension.
pub const ATTRIBUTE_DIM: usize = 37;
/// Appearance embedding dimension.
pub const EMBEDDING_DIM: usize = 200;
/// Number of priority attributes used for filtering and ranking.
pub const PRIORITY_COUNT: usize = 11;

/// The 37 attribute names, in column order. Synthetic datasets and the
/// default configuration use this schema; externally supplied datasets may
/// attach their own meaning to the indices.
pub const ATTRIBUTE_NAMES: [&str; ATTRIBUTE_DIM] = [
    "angular",
    "artistic",
    "attention-grabbing",
    "attractive",
    "bold",
    "boring",
    "calm",
    "capitals",
    "charming",
    "clumsy",
    "complex",
    "cursive",
    "delicate",
    "disorderly",
    "display",
    "dramatic",
    "formal",
    "fresh",
    "friendly",
    "gentle",
    "graceful",
    "happy",
    "italic",
    "legible",
    "modern",
    "monospace",
    "playful",
    "pretentious",
    "serif",
    "sharp",
    "sloppy",
    "soft",
    "strong",
    "technical",
    "thin",
    "warm",
    "wide",
];

/// Default priority attributes: structural qualities whose values reliably
/// show in the glyphs. Deliberately includes `italic` and `thin` and
/// excludes the unreliable `cursive` and `delicate`.
pub const DEFAULT_PRIORITY_NAMES: [&str; PRIORITY_COUNT] = [
    "italic", "thin", "bold", "serif", "capitals", "monospace", "wide", "angular", "legible",
    "formal", "modern",
];

/// Index of an attribute name in [`ATTRIBUTE_NAMES`].
pub fn attribute_index(name: &str) -> Option<usize> {
    ATTRIBUTE_NAMES.iter().position(|n| *n == name)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    /// Ground-truth attributes.
    Seed,
    /// Attributes derived from seed neighbors.
    Extended,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Seed => write!(f, "seed"),
            Provenance::Extended => write!(f, "extended"),
        }
    }
}

/// A font with a complete attribute vector and an optional embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct FontRecord {
    pub name: String,
    /// Exactly 37 values, each in [0, 100].
    pub attributes: Vec<f64>,
    /// Exactly 200 values when present.
    pub embedding: Option<Vec<f64>>,
    pub provenance: Provenance,
}

impl FontRecord {
    pub fn new(
        name: String,
        attributes: Vec<f64>,
        embedding: Option<Vec<f64>>,
        provenance: Provenance,
    ) -> Result<Self, PredictError> {
        if attributes.len() != ATTRIBUTE_DIM {
            return Err(PredictError::DimensionMismatch(format!(
                "font {name:?}: {} attributes, expected {ATTRIBUTE_DIM}",
                attributes.len()
            )));
        }
        if let Some(bad) = attributes.iter().find(|a| !a.is_finite() || **a < 0.0 || **a > 100.0) {
            return Err(PredictError::DimensionMismatch(format!(
                "font {name:?}: attribute value {bad} outside [0, 100]"
            )));
        }
        if let Some(e) = &embedding {
            if e.len() != EMBEDDING_DIM {
                return Err(PredictError::DimensionMismatch(format!(
                    "font {name:?}: {} embedding values, expected {EMBEDDING_DIM}",
                    e.len()
                )));
            }
        }
        Ok(FontRecord { name, attributes, embedding, provenance })
    }
}

/// A font known only by its embedding; input to dataset extension.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingOnlyFont {
    pub name: String,
    pub embedding: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PredictError {
    MissingEmbedding(String),
    KTooLarge { k: usize, seed_count: usize },
    TooFewNeighbors(usize),
    DimensionMismatch(String),
    UnknownFont(String),
    EmptyDataset,
    InvalidConfig(String),
}

impl fmt::Display for PredictError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PredictError::MissingEmbedding(name) => write!(f, "font {name:?} has no embedding"),
            PredictError::KTooLarge { k, seed_count } => {
                write!(f, "k = {k} exceeds the seed set size {seed_count}")
            }
            PredictError::TooFewNeighbors(k) => {
                write!(f, "need at least 2 neighbors, got {k}")
            }
            PredictError::DimensionMismatch(msg) => write!(f, "dimension mismatch: {msg}"),
            PredictError::UnknownFont(name) => write!(f, "unknown font {name:?}"),
            PredictError::EmptyDataset => write!(f, "empty dataset"),
            PredictError::InvalidConfig(msg) => write!(f, "invalid config: {msg}"),
        }
    }
}

impl std::error::Error for PredictError {}

/// How neighbor distances map to extension weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightingMode {
    /// `w_i = (1 / (k - 1)) * (1 - d_i / sum(d))`: sums to 1, decreases
    /// with distance; all `1 / k` when every distance is zero.
    #[default]
    InverseDistance,
    /// Constant `1 / (k - 1)` regardless of distance (sums to `k / (k-1)`).
    Constant,
}

#[derive(Debug, Clone, Copy)]
pub struct ExtensionConfig {
    pub k: usize,
    pub mode: WeightingMode,
}

impl Default for ExtensionConfig {
    fn default() -> Self {
        ExtensionConfig { k: 5, mode: WeightingMode::InverseDistance }
    }
}

/// L2 distance between two font embeddings.
pub fn embedding_distance(a: &FontRecord, b: &FontRecord) -> Result<f64, PredictError> {
    let ea = a.embedding.as_ref().ok_or_else(|| PredictError::MissingEmbedding(a.name.clone()))?;
    let eb = b.embedding.as_ref().ok_or_else(|| PredictError::MissingEmbedding(b.name.clone()))?;
    Ok(l2_distance(ea, eb))
}

fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// A seed font picked as a nearest neighbor.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighbor {
    /// Index into the seed slice.
    pub index: usize,
    pub distance: f64,
}

/// The `k` seed fonts nearest to `embedding`, ascending by distance with
/// ties broken by font name (then seed index).
pub fn nearest_seed_neighbors(
    embedding: &[f64],
    seed: &[FontRecord],
    k: usize,
) -> Result<Vec<Neighbor>, PredictError> {
    if k > seed.len() {
        return Err(PredictError::KTooLarge { k, seed_count: seed.len() });
    }
    if embedding.len() != EMBEDDING_DIM {
        return Err(PredictError::DimensionMismatch(format!(
            "query embedding has {} values, expected {EMBEDDING_DIM}",
            embedding.len()
        )));
    }
    let mut scored = Vec::with_capacity(seed.len());
    for (index, font) in seed.iter().enumerate() {
        let e = font
            .embedding
            .as_ref()
            .ok_or_else(|| PredictError::MissingEmbedding(font.name.clone()))?;
        scored.push((index, l2_distance(embedding, e)));
    }
    scored.sort_by(|a, b| {
        a.1.partial_cmp(&b.1)
            .unwrap()
            .then_with(|| seed[a.0].name.cmp(&seed[b.0].name))
            .then(a.0.cmp(&b.0))
    });
    Ok(scored.into_iter().take(k).map(|(index, distance)| Neighbor { index, distance }).collect())
}

/// Map neighbor distances (ascending, from [`nearest_seed_neighbors`]) to
/// averaging weights.
pub fn extension_weights(distances: &[f64], mode: WeightingMode) -> Result<Vec<f64>, PredictError> {
    let k = distances.len();
    if k < 2 {
        return Err(PredictError::TooFewNeighbors(k));
    }
    if distances.iter().any(|d| !d.is_finite() || *d < 0.0) {
        return Err(PredictError::DimensionMismatch("distances must be finite and >= 0".into()));
    }
    let prefactor = 1.0 / (k as f64 - 1.0);
    match mode {
        WeightingMode::Constant => Ok(vec![prefactor; k]),
        WeightingMode::InverseDistance => {
            let total: f64 = distances.iter().sum();
            if total == 0.0 {
                return Ok(vec![1.0 / k as f64; k]);
            }
            Ok(distances.iter().map(|d| prefactor * (1.0 - d / total)).collect())
        }
    }
}

/// Weighted sum of neighbor attribute vectors, clamped to [0, 100].
///
/// With weights summing to 1 the result is a convex combination and the
/// clamp is a no-op; it guards the constant mode, whose weights sum to more
/// than 1.
pub fn extend_attributes(neighbors: &[&FontRecord], weights: &[f64]) -> Result<Vec<f64>, PredictError> {
    if neighbors.len() != weights.len() {
        return Err(PredictError::DimensionMismatch(format!(
            "{} neighbors for {} weights",
            neighbors.len(),
            weights.len()
        )));
    }
    if neighbors.is_empty() {
        return Err(PredictError::TooFewNeighbors(0));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(PredictError::DimensionMismatch("weights must be finite and >= 0".into()));
    }
    let mut out = vec![0.0f64; ATTRIBUTE_DIM];
    for (font, w) in neighbors.iter().zip(weights) {
        for (o, a) in out.iter_mut().zip(&font.attributes) {
            *o += w * a;
        }
    }
    for v in &mut out {
        *v = v.clamp(0.0, 100.0);
    }
    Ok(out)
}

/// Give every embedding-only font an attribute vector from its `k` nearest
/// seed fonts. Only seed fonts ever serve as neighbors, so the result is
/// independent of the order in which new fonts are processed. Returns the
/// seed records followed by the extended records.
pub fn extend_dataset(
    seed: &[FontRecord],
    new_fonts: &[EmbeddingOnlyFont],
    config: &ExtensionConfig,
) -> Result<Vec<FontRecord>, PredictError> {
    if seed.is_empty() {
        return Err(PredictError::EmptyDataset);
    }
    if config.k < 2 {
        return Err(PredictError::TooFewNeighbors(config.k));
    }
    if config.k > seed.len() {
        return Err(PredictError::KTooLarge { k: config.k, seed_count: seed.len() });
    }
    let mut out = Vec::with_capacity(seed.len() + new_fonts.len());
    out.extend(seed.iter().cloned());
    for font in new_fonts {
        if font.embedding.len() != EMBEDDING_DIM {
            return Err(PredictError::DimensionMismatch(format!(
                "font {:?}: {} embedding values, expected {EMBEDDING_DIM}",
                font.name,
                font.embedding.len()
            )));
        }
        let neighbors = nearest_seed_neighbors(&font.embedding, seed, config.k)?;
        let distances: Vec<f64> = neighbors.iter().map(|n| n.distance).collect();
        let weights = extension_weights(&distances, config.mode)?;
        let refs: Vec<&FontRecord> = neighbors.iter().map(|n| &seed[n.index]).collect();
        let attributes = extend_attributes(&refs, &weights)?;
        out.push(FontRecord::new(
            font.name.clone(),
            attributes,
            Some(font.embedding.clone()),
            Provenance::Extended,
        )?);
    }
    Ok(out)
}

/// Similar-font query configuration.
#[derive(Debug, Clone)]
pub struct PredictionConfig {
    /// Exactly 11 distinct attribute indices.
    pub priority: Vec<usize>,
    /// Ranking weight per priority attribute; all positive.
    pub weights: Vec<f64>,
    /// Search-window half-width per priority attribute, each in (0, 100].
    pub intervals: Vec<f64>,
    pub top_n: usize,
    /// Interval multiplier applied when too few candidates match; > 1.
    pub widen_factor: f64,
    /// Window widening stops once this many candidates match.
    pub min_candidates: usize,
}

impl Default for PredictionConfig {
    fn default() -> Self {
        let priority = DEFAULT_PRIORITY_NAMES
            .iter()
            .map(|n| attribute_index(n).expect("default priority names exist"))
            .collect();
        PredictionConfig {
            priority,
            weights: vec![1.0; PRIORITY_COUNT],
            intervals: vec![20.0; PRIORITY_COUNT],
            top_n: 10,
            widen_factor: 1.5,
            min_candidates: 10,
        }
    }
}

impl PredictionConfig {
    fn validate(&self) -> Result<(), PredictError> {
        if self.priority.len() != PRIORITY_COUNT {
            return Err(PredictError::InvalidConfig(format!(
                "{} priority attributes, expected {PRIORITY_COUNT}",
                self.priority.len()
            )));
        }
        let mut seen = [false; ATTRIBUTE_DIM];
        for &p in &self.priority {
            if p >= ATTRIBUTE_DIM {
                return Err(PredictError::InvalidConfig(format!("priority index {p} out of range")));
            }
            if seen[p] {
                return Err(PredictError::InvalidConfig(format!("duplicate priority index {p}")));
            }
            seen[p] = true;
        }
        if self.weights.len() != PRIORITY_COUNT || self.intervals.len() != PRIORITY_COUNT {
            return Err(PredictError::InvalidConfig(
                "weights and intervals must match the priority attribute count".into(),
            ));
        }
        if self.weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
            return Err(PredictError::InvalidConfig("weights must be positive".into()));
        }
        if self.intervals.iter().any(|i| !i.is_finite() || *i <= 0.0 || *i > 100.0) {
            return Err(PredictError::InvalidConfig("interval half-widths must lie in (0, 100]".into()));
        }
        if self.widen_factor <= 1.0 || !self.widen_factor.is_finite() {
            return Err(PredictError::InvalidConfig("widen_factor must exceed 1".into()));
        }
        Ok(())
    }
}

/// One ranked result of a similar-font query.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedFont {
    pub name: String,
    pub distance: f64,
}

/// Rank fonts similar to `query_name`.
///
/// Candidates are the fonts (query excluded) whose every priority attribute
/// lies within the query's search window. If fewer than `min_candidates`
/// match, all half-widths are multiplied by `widen_factor` (capped at the
/// full range) and filtering repeats. Candidates are ordered by the
/// weighted Euclidean distance over priority attributes, ties by name.
pub fn predict_similar(
    query_name: &str,
    dataset: &[FontRecord],
    config: &PredictionConfig,
) -> Result<Vec<RankedFont>, PredictError> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(PredictError::EmptyDataset);
    }
    let query = dataset
        .iter()
        .find(|f| f.name == query_name)
        .ok_or_else(|| PredictError::UnknownFont(query_name.to_owned()))?;

    let mut half_widths = config.intervals.clone();
    let candidates = loop {
        let hits: Vec<&FontRecord> = dataset
            .iter()
            .filter(|f| f.name != query_name)
            .filter(|f| {
                config.priority.iter().zip(&half_widths).all(|(&p, &hw)| {
                    (f.attributes[p] - query.attributes[p]).abs() <= hw
                })
            })
            .collect();
        let fully_open = half_widths.iter().all(|&hw| hw >= 100.0);
        if hits.len() >= config.min_candidates || fully_open {
            break hits;
        }
        for hw in &mut half_widths {
            *hw = (*hw * config.widen_factor).min(100.0);
        }
    };

    let mut ranked: Vec<RankedFont> = candidates
        .into_iter()
        .map(|f| {
            let dist = config
                .priority
                .iter()
                .zip(&config.weights)
                .map(|(&p, &w)| {
                    let d = query.attributes[p] - f.attributes[p];
                    w * d * d
                })
                .sum::<f64>()
                .sqrt();
            RankedFont { name: f.name.clone(), distance: dist }
        })
        .collect();
    ranked.sort_by(|a, b| a.distance.partial_cmp(&b.distance).unwrap().then_with(|| a.name.cmp(&b.name)));
    ranked.truncate(config.top_n);
    Ok(ranked)
}
