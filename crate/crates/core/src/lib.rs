//! Document image analysis toolkit: binarization, segmentation into blobs
//! and text lines, lossless outlines and shape matching, skeletons, and a
//! CTC-trained sequence recognizer with corpus synthesis and evaluation.

#![allow(clippy::needless_range_loop)]

pub mod corpus;
pub mod eval;
pub mod matching;
pub mod overlay;
pub mod outlines;
pub mod raster;
pub mod segmentation;
pub mod sequence;
pub mod skeleton;
