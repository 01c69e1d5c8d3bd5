//! Image-side preprocessing: superpixel segmentation and the one-channel
//! illumination-invariant image.

mod illumination;
mod superpixel;

pub use illumination::{
    illumination_invariant, illumination_invariant_linear, invariant_value, IlluminationImage,
    DEFAULT_ALPHA,
};
pub use superpixel::{segment_superpixels, Segment, SlicParams, SuperpixelMap};
