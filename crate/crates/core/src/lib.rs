//! Edge-side processing for viewport-adaptive omnidirectional video
//! multicast.
//!
//! The pipeline predicts each viewer's head orientation one horizon ahead,
//! groups viewers with similar predicted viewports, rotates the
//! equirectangular frame so each group's viewport sits at the frame center,
//! and packs a full-quality FOV crop, a 4× downsampled base layer and a 2×
//! downsampled margin band into one VBM frame per group.
//!
//! Modules, bottom-up:
//! - [`imagery`]: frames, PPM I/O, resampling, crop/paste, luma
//! - [`geometry`]: sphere mapping, rotation, reprojection
//! - [`vbm`]: VBM layout, packing, client reconstruction
//! - [`prediction`]: traces, quaternions, LR and GRU predictors
//! - [`clustering`]: joint position/motion distance and DBSCAN
//! - [`metrics`]: MSE/PSNR/SSIM and bandwidth accounting
//! - [`pipeline`]: the trace-driven simulator

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clustering;
pub mod geometry;
pub mod imagery;
pub mod metrics;
pub mod pipeline;
pub mod prediction;
pub mod vbm;

pub use geometry::{Rot3, Sampling, UnitVec3, Viewport};
pub use imagery::{Frame, LumaPlane, Rect};
