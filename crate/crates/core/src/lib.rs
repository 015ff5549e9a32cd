#![cfg_attr(not(feature = "std"), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]
//! Synthetic aperture anomaly imaging primitives.
//!
//! Pose-tagged aerial frames are registered onto a virtual focal plane and
//! averaged. Two pipelines are provided on top of that registration:
//!
//! - [`integration::ad_on_integral`] integrates the thermal frames first and
//!   runs the RX anomaly detector on the integral (the baseline).
//! - [`integration::saai`] runs RX on every frame first and integrates the
//!   binary anomaly masks. Each focal-plane cell then holds the fraction of
//!   frames that saw an anomaly there, i.e. how often the point was visible.
//!
//! Around that sit a seeded procedural forest renderer ([`forest`]) that
//! produces frames together with the unoccluded target footprint, the two
//! evaluation metrics ([`metrics`]), and the sliding-window engine used by
//! the streaming pipeline ([`window`]).
//!
//! # Features
//!
//! - `std` *(default)*: links the standard library. Without it the crate is
//!   `no_std` + `alloc`. Floating point math goes through `libm` either
//!   way.
//! - `serde`: derives `Serialize`/`Deserialize` for the configuration and
//!   result types.

extern crate alloc;

pub mod colormap;
pub mod error;
pub mod forest;
pub mod frame;
pub mod geometry;
pub mod integration;
pub mod math;
pub mod metrics;
pub mod raster;
pub mod rx;
pub mod window;

pub use error::{Error, Result};
pub use frame::Frame;
pub use geometry::{CameraIntrinsics, FocalPlaneSpec, Pose, Ray};
pub use raster::{Mask, Raster};
