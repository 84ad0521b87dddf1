//! Desk-scale font understanding: detectors for the style, color and size of
//! text in cropped images, plus a similar-font prediction engine over
//! attribute vectors.
//!
//! The crate is organized around two pipelines:
//!
//! * detection — [`style_net`] (a small fully convolutional classifier built
//!   on the [`nn`] layer engine), [`color`] (K-means text-color extraction)
//!   and [`size`] (edge-scan text-height estimation), all consuming
//!   [`image::ImageBuffer`] rasters;
//! * prediction — [`predict`] extends a seed attribute dataset to new fonts
//!   via embedding-space nearest neighbors and ranks similar fonts by
//!   weighted attribute distance.
//!
//! [`fixtures`] generates deterministic synthetic inputs (pseudo-font text
//! images, planted detector truths, synthetic attribute datasets) so both
//! pipelines can be trained and verified without any real font data.

pub mod color;
pub mod fixtures;
pub mod image;
pub mod nn;
pub mod predict;
pub mod size;
pub mod style_net;
