//! Grayscale frames, dense flow estimation, window-mean flow resizing, HSV
//! rendering, and Middlebury `.flo` I/O.

mod farneback;
mod field;
mod flo;
mod hsv;
mod image;
mod resize;

pub use self::image::GrayImage;
pub use farneback::{estimate_flow, FlowParams};
pub use field::FlowField;
pub use flo::{decode_flo, encode_flo, read_flo, write_flo, FLO_HEADER_LEN, FLO_MAGIC};
pub use hsv::{flow_to_hsv, HsvImage};
pub use resize::{resize_flow, ResizeSpec};
