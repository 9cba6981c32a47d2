use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{normalize, Vec3};

use super::Ray;

/// Pinhole camera. `fov_y` is the full vertical field of view in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraView {
    pub position: Vec3,
    pub target: Vec3,
    pub up: Vec3,
    pub fov_y: f64,
    pub width: usize,
    pub height: usize,
}

/// Right-handed camera frame: `forward` looks at the target, `up` is the
/// image-up direction.
#[derive(Debug, Clone, Copy)]
pub struct CameraBasis {
    pub right: Vec3,
    pub up: Vec3,
    pub forward: Vec3,
}

impl CameraView {
    pub fn validate(&self) -> Result<()> {
        if self.position == self.target {
            return Err(Error::invalid("camera position equals target"));
        }
        if !(self.fov_y > 0.0 && self.fov_y < std::f64::consts::PI) {
            return Err(Error::invalid(format!(
                "field of view {} outside (0, pi)",
                self.fov_y
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("camera resolution must be positive"));
        }
        if !(self.position.is_finite() && self.target.is_finite() && self.up.is_finite()) {
            return Err(Error::invalid("camera vectors must be finite"));
        }
        Ok(())
    }

    pub fn basis(&self) -> CameraBasis {
        let forward = normalize(self.target - self.position).unwrap_or(-Vec3::Z);
        let right = normalize(forward.cross(self.up))
            .or_else(|_| normalize(forward.cross(Vec3::Z)))
            .or_else(|_| normalize(forward.cross(Vec3::X)))
            .expect("some axis is not parallel to forward");
        let up = right.cross(forward);
        CameraBasis { right, up, forward }
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// Ray through the center of pixel `(x, y)`; row 0 is the top of the image.
    pub fn primary_ray(&self, basis: &CameraBasis, x: usize, y: usize) -> Ray {
        let tan = (0.5 * self.fov_y).tan();
        let aspect = self.width as f64 / self.height as f64;
        let sx = (2.0 * (x as f64 + 0.5) / self.width as f64 - 1.0) * tan * aspect;
        let sy = (1.0 - 2.0 * (y as f64 + 0.5) / self.height as f64) * tan;
        let dir = (basis.forward + basis.right * sx + basis.up * sy).normalized_unchecked();
        Ray::new(self.position, dir)
    }
}

/// Parameters of the orbit trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitParams {
    pub azimuths: usize,
    /// Degrees above (+) or below (-) the horizontal plane.
    pub elevations: Vec<f64>,
    #[serde(default = "default_radius")]
    pub radius: f64,
    /// Vertical field of view in degrees.
    #[serde(default = "default_fov_deg")]
    pub fov_deg: f64,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
}

fn default_radius() -> f64 {
    2.7
}

fn default_fov_deg() -> f64 {
    40.0
}

fn default_resolution() -> usize {
    256
}

impl Default for OrbitParams {
    /// Seven uniform azimuths on each of the 30, 0 and -30 degree rings.
    fn default() -> Self {
        OrbitParams {
            azimuths: 7,
            elevations: vec![30.0, 0.0, -30.0],
            radius: default_radius(),
            fov_deg: default_fov_deg(),
            resolution: default_resolution(),
        }
    }
}

impl OrbitParams {
    pub fn views(&self) -> Result<Vec<CameraView>> {
        generate_orbit(
            self.azimuths,
            &self.elevations,
            self.radius,
            self.fov_deg.to_radians(),
            self.resolution,
        )
    }
}

/// Cameras on rings around the origin, ring-major: all azimuths of the first
/// elevation, then the next. Azimuth 0 sits on +X and azimuths advance by a
/// right-handed rotation about +Y.
pub fn generate_orbit(
    n_azimuths: usize,
    elevations_deg: &[f64],
    radius: f64,
    fov: f64,
    resolution: usize,
) -> Result<Vec<CameraView>> {
    if n_azimuths == 0 {
        return Err(Error::invalid("orbit needs at least one azimuth"));
    }
    if !(radius > 0.0) {
        return Err(Error::invalid("orbit radius must be positive"));
    }
    let mut views = Vec::with_capacity(n_azimuths * elevations_deg.len());
    for &elev in elevations_deg {
        let e = elev.to_radians();
        for k in 0..n_azimuths {
            let az = 2.0 * std::f64::consts::PI * k as f64 / n_azimuths as f64;
            let ring = Vec3::new(radius * e.cos(), radius * e.sin(), 0.0);
            let position = ring.rotate_y(az);
            let up = if e.cos().abs() < 1e-9 {
                Vec3::new(-e.sin(), 0.0, 0.0).rotate_y(az)
            } else {
                Vec3::Y
            };
            let view = CameraView {
                position,
                target: Vec3::ZERO,
                up,
                fov_y: fov,
                width: resolution,
                height: resolution,
            };
            view.validate()?;
            views.push(view);
        }
    }
    Ok(views)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::PI;

    #[test]
    fn twenty_one_views() {
        let v = OrbitParams::default().views().unwrap();
        assert_eq!(v.len(), 21);
        assert!(v.iter().all(|c| c.target == Vec3::ZERO));
        assert!(v.iter().all(|c| (c.position.length() - 2.7).abs() < 1e-12));
    }

    #[test]
    fn single_front_view() {
        let v = generate_orbit(1, &[0.0], 3.0, 0.7, 8).unwrap();
        assert_eq!(v.len(), 1);
        assert!((v[0].position - Vec3::new(3.0, 0.0, 0.0)).length() < 1e-12);
    }

    #[test]
    fn uniform_azimuth_spacing() {
        let v = generate_orbit(7, &[0.0], 1.0, 0.7, 8).unwrap();
        for k in 0..7 {
            let a = v[k].position;
            let b = v[(k + 1) % 7].position;
            let ang = a.dot(b).clamp(-1.0, 1.0).acos().to_degrees();
            assert!((ang - 360.0 / 7.0).abs() < 1e-9);
            assert!((360.0f64 / 7.0 - 51.43).abs() < 0.01);
        }
    }

    #[test]
    fn azimuth_index_rotation_invariance() {
        let n = 7;
        let v = generate_orbit(n, &[30.0, 0.0, -30.0], 2.0, 0.7, 8).unwrap();
        for ring in 0..3 {
            for k in 0..n {
                for shift in 0..n {
                    let a = v[ring * n + k].position;
                    let b = v[ring * n + (k + shift) % n].position;
                    let rotated = a.rotate_y(2.0 * PI * shift as f64 / n as f64);
                    assert!((rotated - b).length() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn center_ray_hits_target() {
        let cam = CameraView {
            position: Vec3::new(0.0, 0.0, 5.0),
            target: Vec3::ZERO,
            up: Vec3::Y,
            fov_y: 0.8,
            width: 3,
            height: 3,
        };
        let b = cam.basis();
        let r = cam.primary_ray(&b, 1, 1);
        assert!((r.dir - (-Vec3::Z)).length() < 1e-12);
        // Top row points up, leftmost column points left.
        assert!(cam.primary_ray(&b, 1, 0).dir.y > 0.0);
        assert!(cam.primary_ray(&b, 0, 1).dir.x < 0.0);
    }

    #[test]
    fn pole_views_are_valid() {
        let v = generate_orbit(4, &[90.0, -90.0], 2.0, 0.7, 4).unwrap();
        for c in &v {
            let b = c.basis();
            assert!((b.right.length() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_inputs() {
        assert!(generate_orbit(0, &[0.0], 1.0, 0.7, 4).is_err());
        assert!(generate_orbit(3, &[0.0], 0.0, 0.7, 4).is_err());
        assert!(generate_orbit(3, &[0.0], 1.0, PI, 4).is_err());
    }
}
