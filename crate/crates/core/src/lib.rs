//! Orthogonal-array 3D sonar beamforming.

pub mod error;
pub mod geometry;
pub mod io;
pub mod postproc;
pub mod scalar;
pub mod analysis;
pub mod beamform;
pub mod complexity;
pub mod signal;

pub use error::{Error, Result};
pub use scalar::Real;

pub type ArrayGeometryF64 = geometry::ArrayGeometry<f64>;
pub type ArrayGeometryF32 = geometry::ArrayGeometry<f32>;
pub type ImagingGridF64 = geometry::ImagingGrid<f64>;
pub type ImagingGridF32 = geometry::ImagingGrid<f32>;
pub type ChannelDataF64 = signal::ChannelData<f64>;
pub type ChannelDataF32 = signal::ChannelData<f32>;
pub type BeamVolumeF64 = beamform::BeamVolume<f64>;
pub type BeamVolumeF32 = beamform::BeamVolume<f32>;
