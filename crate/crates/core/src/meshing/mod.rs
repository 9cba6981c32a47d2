//! Signed distance grids and marching-cubes surface extraction.
//!
//! Distances are negative inside. `.pbrs` layout: the ASCII line
//! `PBRS <nx> <ny> <nz> <minx> <miny> <minz> <maxx> <maxy> <maxz>\n` followed
//! by `nx*ny*nz` little-endian `f32` samples with x varying fastest.

mod from_mesh;
mod marching;
mod tables;

pub use from_mesh::{closest_point_on_triangle, mesh_is_closed, sdf_from_mesh};
pub use marching::marching_cubes;

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil;
use crate::math::Vec3;

const MAGIC: &str = "PBRS";
const MAX_HEADER: usize = 512;

/// Regular sample grid spanning `[min, max]` with `dims` samples per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct SdfGrid {
    dims: [usize; 3],
    min: Vec3,
    max: Vec3,
    values: Vec<f32>,
}

impl SdfGrid {
    pub fn new(dims: [usize; 3], min: Vec3, max: Vec3, values: Vec<f32>) -> Result<Self> {
        if dims.iter().any(|&d| d < 2) {
            return Err(Error::invalid(format!(
                "grid needs >= 2 samples per axis, got {dims:?}"
            )));
        }
        let n = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::invalid("grid dimensions overflow"))?;
        if values.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "grid {dims:?} needs {n} samples, got {}",
                values.len()
            )));
        }
        if !(min.is_finite() && max.is_finite()) || (0..3).any(|a| !(max[a] > min[a])) {
            return Err(Error::invalid("grid bounds must be finite with max > min"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("grid values must be finite"));
        }
        Ok(SdfGrid {
            dims,
            min,
            max,
            values,
        })
    }

    /// Samples `f` at every grid point in parallel.
    pub fn from_fn(
        dims: [usize; 3],
        min: Vec3,
        max: Vec3,
        f: impl Fn(Vec3) -> f64 + Sync,
    ) -> Result<Self> {
        let probe = SdfGrid {
            dims,
            min,
            max,
            values: Vec::new(),
        };
        if dims.iter().any(|&d| d < 2) {
            return Err(Error::invalid("grid needs >= 2 samples per axis"));
        }
        let n = dims[0] * dims[1] * dims[2];
        let values = (0..n)
            .into_par_iter()
            .map(|i| {
                let (x, y, z) = probe.coords(i);
                f(probe.point(x, y, z)) as f32
            })
            .collect();
        SdfGrid::new(dims, min, max, values)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn bounds(&self) -> (Vec3, Vec3) {
        (self.min, self.max)
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// Distance between neighbouring samples along each axis.
    pub fn spacing(&self) -> Vec3 {
        let e = self.max - self.min;
        Vec3::new(
            e.x / (self.dims[0] - 1) as f64,
            e.y / (self.dims[1] - 1) as f64,
            e.z / (self.dims[2] - 1) as f64,
        )
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn coords(&self, i: usize) -> (usize, usize, usize) {
        let x = i % self.dims[0];
        let r = i / self.dims[0];
        (x, r % self.dims[1], r / self.dims[1])
    }

    #[inline]
    pub fn point(&self, x: usize, y: usize, z: usize) -> Vec3 {
        let s = self.spacing();
        Vec3::new(
            self.min.x + s.x * x as f64,
            self.min.y + s.y * y as f64,
            self.min.z + s.z * z as f64,
        )
    }

    #[inline]
    pub fn value(&self, x: usize, y: usize, z: usize) -> f64 {
        self.values[self.index(x, y, z)] as f64
    }

    /// `(min, max)` of the samples.
    pub fn value_range(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v as f64), hi.max(v as f64))
            })
    }

    /// Trilinear interpolation, clamped to the grid bounds.
    pub fn sample(&self, p: Vec3) -> f64 {
        let s = self.spacing();
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..3 {
            let f = ((p[a] - self.min[a]) / s[a]).clamp(0.0, (self.dims[a] - 1) as f64);
            let i = (f.floor() as usize).min(self.dims[a] - 2);
            base[a] = i;
            frac[a] = f - i as f64;
        }
        let mut acc = 0.0;
        for c in 0..8 {
            let (dx, dy, dz) = (c & 1, (c >> 1) & 1, (c >> 2) & 1);
            let w = (if dx == 1 { frac[0] } else { 1.0 - frac[0] })
                * (if dy == 1 { frac[1] } else { 1.0 - frac[1] })
                * (if dz == 1 { frac[2] } else { 1.0 - frac[2] });
            acc += w * self.value(base[0] + dx, base[1] + dy, base[2] + dz);
        }
        acc
    }

    pub fn to_pbrs_bytes(&self) -> Vec<u8> {
        let header = format!(
            "{MAGIC} {} {} {} {} {} {} {} {} {}\n",
            self.dims[0],
            self.dims[1],
            self.dims[2],
            self.min.x,
            self.min.y,
            self.min.z,
            self.max.x,
            self.max.y,
            self.max.z
        );
        let mut out = Vec::with_capacity(header.len() + 4 * self.values.len());
        out.extend_from_slice(header.as_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_pbrs_bytes(bytes: &[u8]) -> Result<Self> {
        let nl = bytes
            .iter()
            .take(MAX_HEADER)
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::format("pbrs", "missing header line"))?;
        let header = std::str::from_utf8(&bytes[..nl])
            .map_err(|_| Error::format("pbrs", "header is not ASCII"))?;
        let parts: Vec<&str> = header.split(' ').collect();
        if parts.len() != 10 || parts[0] != MAGIC {
            return Err(Error::format(
                "pbrs",
                "expected PBRS and nine header fields",
            ));
        }
        let mut dims = [0usize; 3];
        for a in 0..3 {
            dims[a] = parts[1 + a]
                .parse()
                .map_err(|_| Error::format("pbrs", format!("bad dimension '{}'", parts[1 + a])))?;
        }
        let mut b = [0f64; 6];
        for k in 0..6 {
            b[k] = parts[4 + k]
                .parse()
                .map_err(|_| Error::format("pbrs", format!("bad bound '{}'", parts[4 + k])))?;
        }
        let n = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .and_then(|n| n.checked_mul(4).map(|_| n))
            .ok_or_else(|| Error::format("pbrs", "dimension overflow"))?;
        let body = &bytes[nl + 1..];
        if body.len() != n * 4 {
            return Err(Error::format(
                "pbrs",
                format!("expected {} payload bytes, found {}", n * 4, body.len()),
            ));
        }
        let values = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        SdfGrid::new(
            dims,
            Vec3::new(b[0], b[1], b[2]),
            Vec3::new(b[3], b[4], b[5]),
            values,
        )
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fsutil::read_bytes(path)?;
        Self::from_pbrs_bytes(&bytes).map_err(|e| match e {
            Error::Format { format, msg } => Error::Format {
                format,
                msg: format!("{}: {msg}", path.display()),
            },
            other => other,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fsutil::write_atomic(path, &self.to_pbrs_bytes())
    }
}

/// Analytic test shapes and their boolean combinations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SdfShape {
    Sphere {
        #[serde(default)]
        center: Vec3,
        radius: f64,
    },
    Box {
        #[serde(default)]
        center: Vec3,
        half_extents: Vec3,
    },
    Union {
        a: Box<SdfShape>,
        b: Box<SdfShape>,
    },
    Intersection {
        a: Box<SdfShape>,
        b: Box<SdfShape>,
    },
    Difference {
        a: Box<SdfShape>,
        b: Box<SdfShape>,
    },
}

impl SdfShape {
    pub fn sphere(radius: f64) -> Self {
        SdfShape::Sphere {
            center: Vec3::ZERO,
            radius,
        }
    }

    pub fn cube(half: f64) -> Self {
        SdfShape::Box {
            center: Vec3::ZERO,
            half_extents: Vec3::splat(half),
        }
    }

    /// Signed distance. Exact for spheres, boxes and unions' exteriors;
    /// intersections and differences give the usual bound.
    pub fn distance(&self, p: Vec3) -> f64 {
        match self {
            SdfShape::Sphere { center, radius } => (p - *center).length() - radius,
            SdfShape::Box {
                center,
                half_extents,
            } => {
                let q = (p - *center).abs() - *half_extents;
                q.max(Vec3::ZERO).length() + q.max_component().min(0.0)
            }
            SdfShape::Union { a, b } => a.distance(p).min(b.distance(p)),
            SdfShape::Intersection { a, b } => a.distance(p).max(b.distance(p)),
            SdfShape::Difference { a, b } => a.distance(p).max(-b.distance(p)),
        }
    }
}

/// Samples `shape` on a `resolution^3` grid over the cube `[-extent, extent]^3`.
pub fn sdf_analytic(shape: &SdfShape, resolution: usize, extent: f64) -> Result<SdfGrid> {
    if !(extent > 0.0) {
        return Err(Error::invalid("grid extent must be positive"));
    }
    SdfGrid::from_fn(
        [resolution; 3],
        Vec3::splat(-extent),
        Vec3::splat(extent),
        |p| shape.distance(p),
    )
}
