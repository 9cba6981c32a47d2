//! Light sources and the diffuse/specular shading split.
//!
//! Outgoing radiance is estimated as `L_diff + L_spec`: punctual lights are
//! summed in closed form, the environment integral is estimated with
//! cosine-weighted samples for the diffuse lobe and GGX half-vector samples
//! for the specular lobe. Direct lighting only.

use std::path::Path;

use crate::brdf::{sample_ggx, specular_eval, MaterialSample, ShadingGeometry};
use crate::error::{Error, Result};
use crate::fsutil;
use crate::image::ChannelImage;
use crate::math::{normalize, Rgb, Vec3, INV_PI, PI};
use crate::sampler::{cosine_hemisphere, Lobe, Sampler};
use crate::scene::SurfacePoint;

/// Lat-long radiance map. Row 0 looks straight up (+Y); columns sweep the
/// azimuth `atan2(z, x)` from -pi to pi.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentMap {
    image: ChannelImage,
    /// Rotation about the vertical axis, radians.
    pub rotation: f64,
}

impl EnvironmentMap {
    pub fn new(image: ChannelImage, rotation: f64) -> Result<Self> {
        if image.channels() != 3 {
            return Err(Error::invalid("environment map must have 3 channels"));
        }
        if image.width() != 2 * image.height() {
            return Err(Error::invalid(format!(
                "environment map must be 2:1, got {}x{}",
                image.width(),
                image.height()
            )));
        }
        if image.data().iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid(
                "environment map texels must be finite and non-negative",
            ));
        }
        Ok(EnvironmentMap { image, rotation })
    }

    pub fn constant(radiance: Rgb, height: usize) -> Self {
        let img = ChannelImage::filled(
            2 * height,
            height,
            &[radiance.r as f32, radiance.g as f32, radiance.b as f32],
        )
        .expect("nonzero size");
        EnvironmentMap {
            image: img,
            rotation: 0.0,
        }
    }

    pub fn image(&self) -> &ChannelImage {
        &self.image
    }

    /// Loads a `.pbrf` lat-long map.
    pub fn load(path: &Path, rotation: f64) -> Result<Self> {
        EnvironmentMap::new(ChannelImage::read(path)?, rotation)
    }

    /// Bilinear radiance lookup in direction `w`.
    pub fn lookup(&self, w: Vec3) -> Rgb {
        let w = w.rotate_y(-self.rotation);
        let (wd, ht) = (self.image.width(), self.image.height());
        let theta = w.y.clamp(-1.0, 1.0).acos();
        let phi = w.z.atan2(w.x);
        let x = (phi + PI) / (2.0 * PI) * wd as f64 - 0.5;
        let y = (theta / PI * ht as f64 - 0.5).clamp(0.0, (ht - 1) as f64);
        let x0f = x.floor();
        let fx = x - x0f;
        let x0 = (x0f as i64).rem_euclid(wd as i64) as usize;
        let x1 = (x0 + 1) % wd;
        let y0 = y.floor() as usize;
        let y1 = (y0 + 1).min(ht - 1);
        let fy = y - y0 as f64;
        let texel = |xx: usize, yy: usize| {
            Rgb::new(
                self.image.get(xx, yy, 0) as f64,
                self.image.get(xx, yy, 1) as f64,
                self.image.get(xx, yy, 2) as f64,
            )
        };
        let top = texel(x0, y0) * (1.0 - fx) + texel(x1, y0) * fx;
        let bottom = texel(x0, y1) * (1.0 - fx) + texel(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    }
}

pub fn env_lookup(env: &EnvironmentMap, w: Vec3) -> Rgb {
    env.lookup(w)
}

/// Converts a Radiance `.hdr` lat-long panorama to the `.pbrf` container.
pub fn convert_radiance_hdr(input: &Path, output: &Path) -> Result<EnvironmentMap> {
    let bytes = fsutil::read_bytes(input)?;
    let img = image::load_from_memory_with_format(&bytes, image::ImageFormat::Hdr)?.to_rgb32f();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut out = ChannelImage::new(w, h, 3)?;
    for (x, y, p) in img.enumerate_pixels() {
        for c in 0..3 {
            out.set(x as usize, y as usize, c, p.0[c].max(0.0));
        }
    }
    out.mask_mut().fill(true);
    let env = EnvironmentMap::new(out, 0.0)?;
    env.image.write(output)?;
    Ok(env)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionalLight {
    /// Unit direction from the surface toward the light.
    pub direction: Vec3,
    pub radiance: Rgb,
}

impl DirectionalLight {
    pub fn new(direction: Vec3, radiance: Rgb) -> Result<Self> {
        Ok(DirectionalLight {
            direction: normalize(direction)?,
            radiance,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointLight {
    pub position: Vec3,
    /// Radiant intensity; irradiance falls off as `1 / d^2`.
    pub intensity: Rgb,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LightSet {
    pub environment: Option<EnvironmentMap>,
    pub directional: Vec<DirectionalLight>,
    pub point: Vec<PointLight>,
}

impl LightSet {
    pub fn is_empty(&self) -> bool {
        self.environment.is_none() && self.directional.is_empty() && self.point.is_empty()
    }

    pub fn has_punctual(&self) -> bool {
        !self.directional.is_empty() || !self.point.is_empty()
    }

    /// Incident direction, radiance and distance (infinite for directional
    /// lights) of every punctual light as seen from `x`.
    pub fn punctual_at(&self, x: Vec3) -> impl Iterator<Item = (Vec3, Rgb, f64)> + '_ {
        let dir = self
            .directional
            .iter()
            .map(|l| (l.direction, l.radiance, f64::INFINITY));
        let pts = self.point.iter().filter_map(move |l| {
            let d = l.position - x;
            let dist2 = d.length_squared();
            (dist2 > 0.0).then(|| {
                let dist = dist2.sqrt();
                (d / dist, l.intensity / dist2, dist)
            })
        });
        dir.chain(pts)
    }
}

/// Shadow-ray query used when self-occlusion is enabled.
pub trait Occluder: Sync {
    fn occluded(&self, origin: Vec3, dir: Vec3, max_dist: f64) -> bool;
}

#[derive(Clone, Copy)]
pub struct ShadingOptions<'a> {
    /// Environment samples per estimator call.
    pub env_samples: usize,
    pub occluder: Option<&'a dyn Occluder>,
}

impl std::fmt::Debug for ShadingOptions<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ShadingOptions")
            .field("env_samples", &self.env_samples)
            .field("shadows", &self.occluder.is_some())
            .finish()
    }
}

impl ShadingOptions<'_> {
    pub fn new(env_samples: usize) -> Self {
        ShadingOptions {
            env_samples,
            occluder: None,
        }
    }
}

const SHADOW_EPS: f64 = 1e-6;

fn visible(opts: &ShadingOptions<'_>, x: &SurfacePoint, wi: Vec3, dist: f64) -> bool {
    match opts.occluder {
        None => true,
        Some(occ) => {
            let origin = x.position + x.normal * SHADOW_EPS;
            !occ.occluded(origin, wi, dist - 2.0 * SHADOW_EPS)
        }
    }
}

/// Estimate of `int L_i f_d (n.wi) dw`.
pub fn shade_diffuse(
    x: &SurfacePoint,
    m: &MaterialSample,
    lights: &LightSet,
    opts: &ShadingOptions<'_>,
    sampler: &mut Sampler,
) -> Rgb {
    let diffuse_albedo = m.albedo * (1.0 - m.metallic);
    let mut out = Rgb::BLACK;
    for (wi, li, dist) in lights.punctual_at(x.position) {
        let cos = x.normal.dot(wi);
        if cos > 0.0 && visible(opts, x, wi, dist) {
            out += li * diffuse_albedo * (INV_PI * cos);
        }
    }
    if let Some(env) = &lights.environment {
        if opts.env_samples > 0 {
            let mut acc = Rgb::BLACK;
            for _ in 0..opts.env_samples {
                let (u1, u2) = sampler.next_2d();
                let (wi, pdf) = cosine_hemisphere(x.normal, u1, u2);
                if pdf <= 0.0 || !visible(opts, x, wi, f64::INFINITY) {
                    continue;
                }
                // f_d cos / pdf = albedo (1 - metallic)
                acc += env.lookup(wi);
            }
            out += acc * diffuse_albedo / opts.env_samples as f64;
        }
    }
    out
}

/// Estimate of `int L_i f_s (n.wi) dw` for outgoing direction `wo`.
pub fn shade_specular(
    x: &SurfacePoint,
    wo: Vec3,
    m: &MaterialSample,
    lights: &LightSet,
    opts: &ShadingOptions<'_>,
    sampler: &mut Sampler,
) -> Rgb {
    let n = x.normal;
    if n.dot(wo) <= 0.0 {
        return Rgb::BLACK;
    }
    let mut out = Rgb::BLACK;
    for (wi, li, dist) in lights.punctual_at(x.position) {
        let cos = n.dot(wi);
        if cos > 0.0 && visible(opts, x, wi, dist) {
            out += li * specular_eval(&ShadingGeometry::new(n, wi, wo), m) * cos;
        }
    }
    if let Some(env) = &lights.environment {
        if opts.env_samples > 0 {
            let mut acc = Rgb::BLACK;
            for _ in 0..opts.env_samples {
                let (u1, u2) = sampler.next_2d();
                let s = sample_ggx(n, wo, m.roughness, u1, u2);
                if s.pdf <= 0.0 || !visible(opts, x, s.wi, f64::INFINITY) {
                    continue;
                }
                let f = specular_eval(&ShadingGeometry::new(n, s.wi, wo), m);
                acc += env.lookup(s.wi) * f * (n.dot(s.wi) / s.pdf);
            }
            out += acc / opts.env_samples as f64;
        }
    }
    out
}

/// Independent random streams for the two lobes of one pixel.
#[derive(Debug, Clone)]
pub struct LobeSamplers {
    pub diffuse: Sampler,
    pub specular: Sampler,
}

impl LobeSamplers {
    pub fn for_pixel(seed: u64, pixel: u64) -> Self {
        LobeSamplers {
            diffuse: Sampler::for_pixel(seed, pixel, Lobe::Diffuse),
            specular: Sampler::for_pixel(seed, pixel, Lobe::Specular),
        }
    }
}

/// `L_o = L_diff + L_spec`.
pub fn shade(
    x: &SurfacePoint,
    wo: Vec3,
    m: &MaterialSample,
    lights: &LightSet,
    opts: &ShadingOptions<'_>,
    samplers: &mut LobeSamplers,
) -> Rgb {
    shade_diffuse(x, m, lights, opts, &mut samplers.diffuse)
        + shade_specular(x, wo, m, lights, opts, &mut samplers.specular)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brdf::{
        alpha_from_roughness, f0_from_material, fresnel_schlick, ggx_ndf, smith_g, ROUGH_MIN,
    };
    use crate::math::reflect;
    use crate::sampler::uniform_hemisphere;

    fn point(normal: Vec3) -> SurfacePoint {
        SurfacePoint::new(
            Vec3::ZERO,
            normal,
            [0.5, 0.5],
            MaterialSample::new(Rgb::WHITE, 0.0, 1.0),
        )
    }

    fn gradient_env() -> EnvironmentMap {
        let (w, h) = (16, 8);
        let mut img = ChannelImage::new(w, h, 3).unwrap();
        for y in 0..h {
            for x in 0..w {
                img.set(x, y, 0, x as f32 / w as f32);
                img.set(x, y, 1, y as f32 / h as f32);
                img.set(x, y, 2, 0.25);
            }
        }
        EnvironmentMap::new(img, 0.0).unwrap()
    }

    #[test]
    fn env_rejects_bad_shapes() {
        let img = ChannelImage::new(8, 8, 3).unwrap();
        assert!(EnvironmentMap::new(img, 0.0).is_err());
        let img = ChannelImage::new(8, 4, 1).unwrap();
        assert!(EnvironmentMap::new(img, 0.0).is_err());
        let mut img = ChannelImage::new(8, 4, 3).unwrap();
        img.set(0, 0, 0, -1.0);
        assert!(EnvironmentMap::new(img, 0.0).is_err());
    }

    #[test]
    fn constant_env_lookup() {
        let env = EnvironmentMap::constant(Rgb::new(0.5, 1.5, 2.0), 4);
        for w in [Vec3::X, -Vec3::Y, Vec3::new(0.3, 0.4, -0.866)] {
            let v = env.lookup(normalize(w).unwrap());
            assert!((v - Rgb::new(0.5, 1.5, 2.0)).max_component().abs() < 1e-6);
        }
    }

    #[test]
    fn pole_lookup_reads_top_row() {
        let (w, h) = (8, 4);
        let mut img = ChannelImage::new(w, h, 3).unwrap();
        for x in 0..w {
            img.set(x, 0, 0, 1.0);
        }
        let env = EnvironmentMap::new(img, 0.0).unwrap();
        assert_eq!(env.lookup(Vec3::Y), Rgb::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn rotation_consistency() {
        let base = gradient_env();
        let mut rotated = base.clone();
        rotated.rotation = PI;
        for w in [
            Vec3::X,
            Vec3::new(0.2, 0.5, 0.7),
            Vec3::new(-0.6, -0.1, 0.3),
        ] {
            let w = normalize(w).unwrap();
            assert_eq!(rotated.lookup(w), base.lookup(w.rotate_y(-PI)));
        }
    }

    #[test]
    fn diffuse_white_furnace() {
        let lights = LightSet {
            environment: Some(EnvironmentMap::constant(Rgb::gray(2.5), 8)),
            ..Default::default()
        };
        let m = MaterialSample::new(Rgb::WHITE, 0.0, 0.5);
        let mut s = Sampler::new(1);
        let v = shade_diffuse(
            &point(Vec3::Y),
            &m,
            &lights,
            &ShadingOptions::new(4096),
            &mut s,
        );
        assert!((v.r - 2.5).abs() <= 0.02 * 2.5);
        let black = MaterialSample::new(Rgb::BLACK, 0.0, 0.5);
        assert_eq!(
            shade_diffuse(
                &point(Vec3::Y),
                &black,
                &lights,
                &ShadingOptions::new(64),
                &mut s
            ),
            Rgb::BLACK
        );
    }

    #[test]
    fn directional_diffuse_closed_form() {
        let theta: f64 = 0.7;
        let dir = Vec3::new(theta.sin(), theta.cos(), 0.0);
        let lights = LightSet {
            directional: vec![DirectionalLight::new(dir, Rgb::new(3.0, 2.0, 1.0)).unwrap()],
            ..Default::default()
        };
        let albedo = Rgb::new(0.2, 0.5, 0.8);
        let m = MaterialSample::new(albedo, 0.0, 0.5);
        let mut s = Sampler::new(0);
        let v = shade_diffuse(
            &point(Vec3::Y),
            &m,
            &lights,
            &ShadingOptions::new(16),
            &mut s,
        );
        let expected = Rgb::new(3.0, 2.0, 1.0) * albedo * (theta.cos() / PI);
        assert!((v - expected).max_component().abs() < 1e-12);
        assert!((expected - v).max_component().abs() < 1e-12);
    }

    #[test]
    fn mirror_specular_closed_form() {
        let n = Vec3::Y;
        let wo = normalize(Vec3::new(0.3, 0.8, 0.1)).unwrap();
        let wi = reflect(wo, n);
        let lights = LightSet {
            directional: vec![DirectionalLight::new(wi, Rgb::gray(1.0)).unwrap()],
            ..Default::default()
        };
        let m = MaterialSample::new(Rgb::new(0.9, 0.6, 0.2), 0.7, ROUGH_MIN);
        let mut s = Sampler::new(0);
        let v = shade_specular(&point(n), wo, &m, &lights, &ShadingOptions::new(0), &mut s);
        let wi = lights.directional[0].direction;
        let h = normalize(wi + wo).unwrap();
        let d = ggx_ndf(n.dot(h), alpha_from_roughness(ROUGH_MIN));
        let f = fresnel_schlick(wo.dot(h), f0_from_material(&m));
        let g = smith_g(&ShadingGeometry::new(n, wi, wo), ROUGH_MIN);
        let expected = f * (d * g / (4.0 * n.dot(wo) * n.dot(wi)) * n.dot(wi));
        for c in 0..3 {
            assert!((v[c] - expected[c]).abs() <= 1e-9 * expected[c]);
        }
    }

    #[test]
    fn specular_monotone_in_f0() {
        let lights = LightSet {
            environment: Some(gradient_env()),
            directional: vec![
                DirectionalLight::new(Vec3::new(0.2, 1.0, 0.3), Rgb::gray(2.0)).unwrap(),
            ],
            ..Default::default()
        };
        let wo = normalize(Vec3::new(-0.3, 0.9, 0.2)).unwrap();
        let opts = ShadingOptions::new(256);
        let low = MaterialSample::new(Rgb::BLACK, 1.0, 0.4);
        let high = MaterialSample::new(Rgb::WHITE, 1.0, 0.4);
        let a = shade_specular(
            &point(Vec3::Y),
            wo,
            &low,
            &lights,
            &opts,
            &mut Sampler::new(3),
        );
        let b = shade_specular(
            &point(Vec3::Y),
            wo,
            &high,
            &lights,
            &opts,
            &mut Sampler::new(3),
        );
        for c in 0..3 {
            assert!(a[c] > 0.0 && a[c] < b[c]);
        }
    }

    #[test]
    fn dark_scene_is_black() {
        let lights = LightSet {
            directional: vec![DirectionalLight::new(-Vec3::Y, Rgb::gray(5.0)).unwrap()],
            ..Default::default()
        };
        let m = MaterialSample::new(Rgb::WHITE, 0.5, 0.5);
        let mut ls = LobeSamplers::for_pixel(1, 2);
        let v = shade(
            &point(Vec3::Y),
            Vec3::Y,
            &m,
            &lights,
            &ShadingOptions::new(32),
            &mut ls,
        );
        assert_eq!(v, Rgb::BLACK);
    }

    #[test]
    fn shade_is_sum_and_deterministic() {
        let lights = LightSet {
            environment: Some(gradient_env()),
            point: vec![PointLight {
                position: Vec3::new(1.0, 2.0, 0.5),
                intensity: Rgb::gray(4.0),
            }],
            ..Default::default()
        };
        let m = MaterialSample::new(Rgb::new(0.4, 0.5, 0.6), 0.3, 0.35);
        let wo = normalize(Vec3::new(0.1, 0.7, 0.4)).unwrap();
        let opts = ShadingOptions::new(64);
        let x = point(Vec3::Y);
        let total = shade(
            &x,
            wo,
            &m,
            &lights,
            &opts,
            &mut LobeSamplers::for_pixel(9, 4),
        );
        let again = shade(
            &x,
            wo,
            &m,
            &lights,
            &opts,
            &mut LobeSamplers::for_pixel(9, 4),
        );
        assert_eq!(
            total.to_array().map(f64::to_bits),
            again.to_array().map(f64::to_bits)
        );
        let mut ls = LobeSamplers::for_pixel(9, 4);
        let d = shade_diffuse(&x, &m, &lights, &opts, &mut ls.diffuse);
        let s = shade_specular(&x, wo, &m, &lights, &opts, &mut ls.specular);
        assert_eq!(total, d + s);
    }

    #[test]
    fn ggx_estimator_beats_uniform_sampling() {
        let lights = LightSet {
            environment: Some(EnvironmentMap::constant(Rgb::WHITE, 4)),
            ..Default::default()
        };
        let m = MaterialSample::new(Rgb::gray(0.8), 1.0, 0.1);
        let x = point(Vec3::Y);
        let wo = normalize(Vec3::new(0.3, 0.9, 0.0)).unwrap();
        let n_samples = 64;
        let trials = 200;
        let mut ggx = Vec::new();
        let mut uni = Vec::new();
        for t in 0..trials {
            let opts = ShadingOptions::new(n_samples);
            let mut s = Sampler::new(1000 + t);
            ggx.push(shade_specular(&x, wo, &m, &lights, &opts, &mut s).r);
            let mut s = Sampler::new(5000 + t);
            let mut acc = 0.0;
            for _ in 0..n_samples {
                let (u1, u2) = s.next_2d();
                let (wi, pdf) = uniform_hemisphere(x.normal, u1, u2);
                let f = specular_eval(&ShadingGeometry::new(x.normal, wi, wo), &m);
                acc += f.r * x.normal.dot(wi).max(0.0) / pdf;
            }
            uni.push(acc / n_samples as f64);
        }
        let var = |v: &[f64]| {
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64
        };
        assert!(
            var(&ggx) < var(&uni),
            "ggx {} uniform {}",
            var(&ggx),
            var(&uni)
        );
    }
}
