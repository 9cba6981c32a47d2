//! Forward and inverse physically based rendering: a Cook-Torrance metalness
//! BRDF, multi-domain channel rendering, material recovery by gradient
//! descent, mesh metrics and marching cubes.

// `!(x > 0.0)` style guards are used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod brdf;
pub mod error;
pub mod fsutil;
pub mod image;
pub mod inverse;
pub mod lighting;
pub mod math;
pub mod meshing;
pub mod metrics;
pub mod renderer;
pub mod sampler;
pub mod scene;

pub use brdf::{MaterialSample, ShadingGeometry};
pub use error::{Error, Result};
pub use image::{ChannelImage, PngEncoding};
pub use lighting::{DirectionalLight, EnvironmentMap, LightSet, PointLight};
pub use math::{Rgb, Vec3};
pub use scene::{CameraView, MaterialTexture, OrbitParams, Scene, SurfacePoint, TriangleMesh};
