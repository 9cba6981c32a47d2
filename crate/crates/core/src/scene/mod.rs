//! Geometry, textures, cameras and ray casting.

mod bvh;
mod camera;
mod description;
mod mesh;

pub use bvh::Bvh;
pub use camera::{generate_orbit, CameraBasis, CameraView, OrbitParams};
pub use description::{
    EnvironmentSource, LightsDesc, MaterialsDesc, MeshSource, SampleCounts, SceneDescription,
    TextureSource,
};
pub use mesh::{
    parse_obj, primitive_cube, primitive_quad, primitive_sphere, TriangleHit, TriangleMesh,
};

use crate::brdf::MaterialSample;
use crate::error::{Error, Result};
use crate::image::ChannelImage;
use crate::lighting::{LightSet, Occluder};
use crate::math::{normalize, Rgb, Vec3};

/// Meshes at or above this size are traversed through a BVH.
pub const BVH_MIN_TRIANGLES: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    /// Unit direction.
    pub dir: Vec3,
    pub t_min: f64,
}

impl Ray {
    pub fn new(origin: Vec3, dir: Vec3) -> Self {
        Ray {
            origin,
            dir,
            t_min: 1e-9,
        }
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.dir * t
    }
}

/// Shading record at a ray hit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub position: Vec3,
    /// Unit shading normal, flipped toward the viewer on back-face hits.
    pub normal: Vec3,
    pub uv: [f64; 2],
    pub material: MaterialSample,
    pub back_face: bool,
    /// Ray parameter of the hit.
    pub distance: f64,
    pub triangle: usize,
}

impl SurfacePoint {
    pub fn new(position: Vec3, normal: Vec3, uv: [f64; 2], material: MaterialSample) -> Self {
        SurfacePoint {
            position,
            normal,
            uv,
            material,
            back_face: false,
            distance: 0.0,
            triangle: 0,
        }
    }
}

/// Spatially varying albedo / metallic / roughness maps of one resolution.
///
/// UV (0, 0) is the bottom-left corner: `u` runs along image columns and `v`
/// runs up from the last row. Lookups are bilinear with clamp-to-edge.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialTexture {
    pub albedo: ChannelImage,
    pub metallic: ChannelImage,
    pub roughness: ChannelImage,
}

/// Texel index and bilinear weight.
pub type Tap = (usize, f64);

impl MaterialTexture {
    pub fn new(
        albedo: ChannelImage,
        metallic: ChannelImage,
        roughness: ChannelImage,
    ) -> Result<Self> {
        if albedo.channels() != 3 || metallic.channels() != 1 || roughness.channels() != 1 {
            return Err(Error::invalid(
                "textures need 3-channel albedo and 1-channel metallic/roughness",
            ));
        }
        if !albedo.same_resolution(&metallic) || !albedo.same_resolution(&roughness) {
            return Err(Error::ShapeMismatch(
                "material textures must share one resolution".into(),
            ));
        }
        let tex = MaterialTexture {
            albedo,
            metallic,
            roughness,
        };
        if [&tex.albedo, &tex.metallic, &tex.roughness]
            .iter()
            .any(|t| t.data().iter().any(|v| !(0.0..=1.0).contains(v)))
        {
            return Err(Error::invalid("texel values must lie in [0, 1]"));
        }
        Ok(tex)
    }

    pub fn constant(width: usize, height: usize, m: &MaterialSample) -> Self {
        let a = m.albedo;
        MaterialTexture {
            albedo: ChannelImage::filled(width, height, &[a.r as f32, a.g as f32, a.b as f32])
                .expect("nonzero size"),
            metallic: ChannelImage::filled(width, height, &[m.metallic as f32])
                .expect("nonzero size"),
            roughness: ChannelImage::filled(width, height, &[m.roughness as f32])
                .expect("nonzero size"),
        }
    }

    pub fn width(&self) -> usize {
        self.albedo.width()
    }

    pub fn height(&self) -> usize {
        self.albedo.height()
    }

    pub fn texel_count(&self) -> usize {
        self.albedo.pixel_count()
    }

    pub fn texel(&self, i: usize) -> MaterialSample {
        MaterialSample::new(
            self.albedo.rgb_at(i),
            self.metallic.at(i, 0) as f64,
            self.roughness.at(i, 0) as f64,
        )
    }

    pub fn taps(&self, uv: [f64; 2]) -> [Tap; 4] {
        bilinear_taps(self.width(), self.height(), uv)
    }

    pub fn sample(&self, uv: [f64; 2]) -> MaterialSample {
        let mut albedo = Rgb::BLACK;
        let (mut metallic, mut roughness) = (0.0, 0.0);
        for (i, w) in self.taps(uv) {
            albedo += self.albedo.rgb_at(i) * w;
            metallic += self.metallic.at(i, 0) as f64 * w;
            roughness += self.roughness.at(i, 0) as f64 * w;
        }
        MaterialSample::new(albedo, metallic, roughness)
    }
}

/// Four texels surrounding `uv` on a `width x height` grid with weights
/// summing to one.
pub fn bilinear_taps(width: usize, height: usize, uv: [f64; 2]) -> [Tap; 4] {
    let fx = (uv[0] * width as f64 - 0.5).clamp(0.0, (width - 1) as f64);
    let fy = ((1.0 - uv[1]) * height as f64 - 0.5).clamp(0.0, (height - 1) as f64);
    let x0 = fx.floor() as usize;
    let y0 = fy.floor() as usize;
    let x1 = (x0 + 1).min(width - 1);
    let y1 = (y0 + 1).min(height - 1);
    let (tx, ty) = (fx - x0 as f64, fy - y0 as f64);
    [
        (y0 * width + x0, (1.0 - tx) * (1.0 - ty)),
        (y0 * width + x1, tx * (1.0 - ty)),
        (y1 * width + x0, (1.0 - tx) * ty),
        (y1 * width + x1, tx * ty),
    ]
}

/// Mesh, materials and lights of one render.
#[derive(Debug, Clone)]
pub struct Scene {
    pub mesh: TriangleMesh,
    bvh: Option<Bvh>,
    pub textures: MaterialTexture,
    pub lights: LightSet,
    /// Cast shadow rays toward lights and environment samples.
    pub shadows: bool,
}

impl Scene {
    pub fn new(mesh: TriangleMesh, textures: MaterialTexture, lights: LightSet) -> Self {
        let bvh = (mesh.triangle_count() >= BVH_MIN_TRIANGLES).then(|| Bvh::build(&mesh));
        Scene {
            mesh,
            bvh,
            textures,
            lights,
            shadows: false,
        }
    }

    pub fn intersect(&self, ray: &Ray, t_max: f64) -> Option<TriangleHit> {
        match &self.bvh {
            Some(b) => b.intersect(&self.mesh, ray, t_max),
            None => self.mesh.intersect_brute_force(ray, t_max),
        }
    }

    /// Nearest surface point along `ray` with interpolated normal, UV and
    /// bilinearly sampled material.
    pub fn ray_cast(&self, ray: &Ray) -> Option<SurfacePoint> {
        self.intersect(ray, f64::INFINITY)
            .map(|h| self.surface_point(ray, &h))
    }

    pub fn surface_point(&self, ray: &Ray, hit: &TriangleHit) -> SurfacePoint {
        let m = &self.mesh;
        let [i0, i1, i2] = m.indices[hit.triangle].map(|i| i as usize);
        let b0 = 1.0 - hit.b1 - hit.b2;
        let interp_n = m.normals[i0] * b0 + m.normals[i1] * hit.b1 + m.normals[i2] * hit.b2;
        let face_n = normalize(m.face_cross(hit.triangle)).unwrap_or(interp_n);
        let mut normal = normalize(interp_n).unwrap_or(face_n);
        let back_face = face_n.dot(ray.dir) > 0.0;
        if back_face {
            normal = -normal;
        }
        let uv = [
            m.uvs[i0][0] * b0 + m.uvs[i1][0] * hit.b1 + m.uvs[i2][0] * hit.b2,
            m.uvs[i0][1] * b0 + m.uvs[i1][1] * hit.b1 + m.uvs[i2][1] * hit.b2,
        ];
        SurfacePoint {
            position: ray.at(hit.t),
            normal,
            uv,
            material: self.textures.sample(uv),
            back_face,
            distance: hit.t,
            triangle: hit.triangle,
        }
    }
}

impl Occluder for Scene {
    fn occluded(&self, origin: Vec3, dir: Vec3, max_dist: f64) -> bool {
        let ray = Ray::new(origin, dir);
        match &self.bvh {
            Some(b) => b.any_hit(&self.mesh, &ray, max_dist),
            None => self.mesh.intersect_brute_force(&ray, max_dist).is_some(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plain_scene(mesh: TriangleMesh) -> Scene {
        let m = MaterialSample::new(Rgb::gray(0.5), 0.0, 0.5);
        Scene::new(
            mesh,
            MaterialTexture::constant(4, 4, &m),
            LightSet::default(),
        )
    }

    #[test]
    fn sphere_hit_distance() {
        let scene = plain_scene(primitive_sphere(64));
        let ray = Ray::new(Vec3::new(5.0, 0.0, 0.0), -Vec3::X);
        let p = scene.ray_cast(&ray).unwrap();
        // Tessellation sag at the equator is below (pi/64)^2 / 2.
        assert!((p.distance - 4.0).abs() < 2e-3);
        assert!((p.normal.length() - 1.0).abs() < 1e-12);
        assert!(p.normal.dot(-ray.dir) > 0.99);
        assert!(!p.back_face);
        assert!(scene
            .ray_cast(&Ray::new(Vec3::new(5.0, 0.0, 0.0), Vec3::X))
            .is_none());
    }

    #[test]
    fn quad_uv_is_barycentric() {
        let scene = plain_scene(primitive_quad(2.0));
        // Quad spans [-1, 1] in x and z; u = (x + 1) / 2, v = (1 - z) / 2.
        let ray = Ray::new(Vec3::new(0.3, 1.0, -0.4), -Vec3::Y);
        let p = scene.ray_cast(&ray).unwrap();
        assert!((p.uv[0] - 0.65).abs() < 1e-12);
        assert!((p.uv[1] - 0.7).abs() < 1e-12);
        assert_eq!(p.normal, Vec3::Y);
    }

    #[test]
    fn back_face_flips_normal() {
        let scene = plain_scene(primitive_quad(2.0));
        let p = scene
            .ray_cast(&Ray::new(Vec3::new(0.1, -1.0, 0.1), Vec3::Y))
            .unwrap();
        assert!(p.back_face);
        assert_eq!(p.normal, -Vec3::Y);
    }

    #[test]
    fn sphere_surface_points_are_well_formed() {
        let scene = plain_scene(primitive_sphere(16));
        let cam = CameraView {
            position: Vec3::new(0.0, 0.5, 3.0),
            target: Vec3::ZERO,
            up: Vec3::Y,
            fov_y: 0.9,
            width: 24,
            height: 24,
        };
        let basis = cam.basis();
        let mut hits = 0;
        for y in 0..24 {
            for x in 0..24 {
                let ray = cam.primary_ray(&basis, x, y);
                if let Some(p) = scene.ray_cast(&ray) {
                    hits += 1;
                    assert!((p.normal.length() - 1.0).abs() < 1e-9);
                    assert!(p.uv.iter().all(|u| (0.0..=1.0).contains(u)));
                    // Tessellated vs analytic sphere: error bounded by sag.
                    assert!((p.position.length() - 1.0).abs() < 0.02);
                }
            }
        }
        assert!(hits > 100);
    }

    #[test]
    fn texture_sampling() {
        let mut rough = ChannelImage::new(2, 1, 1).unwrap();
        rough.set(1, 0, 0, 1.0);
        let tex = MaterialTexture::new(
            ChannelImage::filled(2, 1, &[0.2, 0.4, 0.6]).unwrap(),
            ChannelImage::filled(2, 1, &[0.0]).unwrap(),
            rough,
        )
        .unwrap();
        assert_eq!(tex.sample([0.5, 0.5]).roughness, 0.5);
        assert_eq!(tex.sample([0.0, 0.5]).roughness, 0.0);
        assert_eq!(tex.sample([1.0, 0.5]).roughness, 1.0);
        let w: f64 = tex.taps([0.37, 0.81]).iter().map(|t| t.1).sum();
        assert!((w - 1.0).abs() < 1e-15);
    }

    #[test]
    fn texture_validation() {
        let a = ChannelImage::filled(2, 2, &[0.2, 0.4, 1.5]).unwrap();
        let m = ChannelImage::filled(2, 2, &[0.0]).unwrap();
        assert!(MaterialTexture::new(a, m.clone(), m.clone()).is_err());
        let a = ChannelImage::filled(2, 1, &[0.2, 0.4, 0.5]).unwrap();
        assert!(MaterialTexture::new(a, m.clone(), m).is_err());
    }
}
