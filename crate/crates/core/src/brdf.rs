//! Metalness-workflow Cook-Torrance BRDF.
//!
//! `f = f_d + f_s` with a Lambertian diffuse lobe `albedo * (1 - metallic) / pi`
//! and the specular quotient `D * F * G / (4 (n.wo) (n.wi))` built from the GGX
//! distribution, Schlick's Fresnel and the Smith/Schlick-GGX geometry term.
//!
//! Roughness convention: `alpha = max(roughness, ROUGH_MIN)^2` takes the place
//! of the squared width in `D`, and `k = alpha / 2` in `G`.

use serde::{Deserialize, Serialize};

use crate::math::{reflect, Frame, Rgb, Vec3, INV_PI, PI};

/// Roughness floor applied before squaring.
pub const ROUGH_MIN: f64 = 1e-3;

/// Normal-incidence reflectance of dielectrics.
pub const DIELECTRIC_F0: f64 = 0.04;

/// Per-point svBRDF parameters. Constructors clamp every field to [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialSample {
    pub albedo: Rgb,
    pub metallic: f64,
    pub roughness: f64,
}

impl MaterialSample {
    pub fn new(albedo: Rgb, metallic: f64, roughness: f64) -> Self {
        MaterialSample {
            albedo: albedo.clamp01(),
            metallic: metallic.clamp(0.0, 1.0),
            roughness: roughness.clamp(0.0, 1.0),
        }
    }
}

/// Unit normal and the two unit directions of a BRDF query, both pointing away
/// from the surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShadingGeometry {
    pub n: Vec3,
    pub wi: Vec3,
    pub wo: Vec3,
}

impl ShadingGeometry {
    pub fn new(n: Vec3, wi: Vec3, wo: Vec3) -> Self {
        ShadingGeometry { n, wi, wo }
    }

    fn cosines(&self) -> Option<(f64, f64)> {
        let n_dot_i = self.n.dot(self.wi);
        let n_dot_o = self.n.dot(self.wo);
        (n_dot_i > 0.0 && n_dot_o > 0.0).then_some((n_dot_i, n_dot_o))
    }
}

#[inline]
fn effective_roughness(roughness: f64) -> f64 {
    roughness.clamp(0.0, 1.0).max(ROUGH_MIN)
}

/// `max(roughness, ROUGH_MIN)^2`.
pub fn alpha_from_roughness(roughness: f64) -> f64 {
    let r = effective_roughness(roughness);
    r * r
}

/// GGX normal distribution with `alpha2` substituted for the squared width.
#[inline]
pub fn ggx_ndf(n_dot_h: f64, alpha2: f64) -> f64 {
    let t = n_dot_h * n_dot_h * (alpha2 - 1.0) + 1.0;
    alpha2 / (PI * t * t)
}

#[inline]
fn schlick_weight(o_dot_h: f64) -> f64 {
    let m = (1.0 - o_dot_h).clamp(0.0, 1.0);
    let m2 = m * m;
    m2 * m2 * m
}

pub fn fresnel_schlick(o_dot_h: f64, f0: Rgb) -> Rgb {
    let s = schlick_weight(o_dot_h);
    f0.map(|c| c + (1.0 - c) * s)
}

pub fn f0_from_material(m: &MaterialSample) -> Rgb {
    m.albedo
        .map(|a| (1.0 - m.metallic) * DIELECTRIC_F0 + m.metallic * a)
}

/// Schlick-GGX single-direction shadowing term.
#[inline]
pub fn smith_g1(n_dot_w: f64, k: f64) -> f64 {
    n_dot_w / (n_dot_w * (1.0 - k) + k)
}

#[inline]
fn k_from_roughness(roughness: f64) -> f64 {
    alpha_from_roughness(roughness) / 2.0
}

pub fn smith_g(geom: &ShadingGeometry, roughness: f64) -> f64 {
    let k = k_from_roughness(roughness);
    smith_g1(geom.n.dot(geom.wo), k) * smith_g1(geom.n.dot(geom.wi), k)
}

/// Lambertian lobe; zero outside the upper hemisphere.
pub fn diffuse_eval(geom: &ShadingGeometry, m: &MaterialSample) -> Rgb {
    if geom.cosines().is_none() {
        return Rgb::BLACK;
    }
    m.albedo * ((1.0 - m.metallic) * INV_PI)
}

/// Cook-Torrance specular lobe; zero outside the upper hemisphere.
pub fn specular_eval(geom: &ShadingGeometry, m: &MaterialSample) -> Rgb {
    let Some((n_dot_i, n_dot_o)) = geom.cosines() else {
        return Rgb::BLACK;
    };
    let h = (geom.wi + geom.wo).normalized_unchecked();
    let alpha2 = alpha_from_roughness(m.roughness);
    let d = ggx_ndf(geom.n.dot(h).max(0.0), alpha2);
    let k = alpha2 / 2.0;
    let g = smith_g1(n_dot_o, k) * smith_g1(n_dot_i, k);
    let f = fresnel_schlick(geom.wo.dot(h), f0_from_material(m));
    f * (d * g / (4.0 * n_dot_o * n_dot_i))
}

pub fn brdf_eval(geom: &ShadingGeometry, m: &MaterialSample) -> Rgb {
    diffuse_eval(geom, m) + specular_eval(geom, m)
}

/// Value of one lobe and its partial derivatives. `d_albedo` is diagonal:
/// channel `c` of the output depends only on channel `c` of the albedo.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LobeGrad {
    pub value: Rgb,
    pub d_albedo: Rgb,
    pub d_metallic: Rgb,
    pub d_roughness: Rgb,
}

impl std::ops::Add for LobeGrad {
    type Output = LobeGrad;
    fn add(self, o: LobeGrad) -> LobeGrad {
        LobeGrad {
            value: self.value + o.value,
            d_albedo: self.d_albedo + o.d_albedo,
            d_metallic: self.d_metallic + o.d_metallic,
            d_roughness: self.d_roughness + o.d_roughness,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BrdfGrad {
    pub diffuse: LobeGrad,
    pub specular: LobeGrad,
}

impl BrdfGrad {
    pub fn total(&self) -> LobeGrad {
        self.diffuse + self.specular
    }
}

/// Analytic derivatives of both lobes with respect to albedo, metallic and
/// roughness. Below `ROUGH_MIN` the roughness derivative is zero.
pub fn brdf_grad(geom: &ShadingGeometry, m: &MaterialSample) -> BrdfGrad {
    let Some((n_dot_i, n_dot_o)) = geom.cosines() else {
        return BrdfGrad::default();
    };
    let diffuse = LobeGrad {
        value: m.albedo * ((1.0 - m.metallic) * INV_PI),
        d_albedo: Rgb::gray((1.0 - m.metallic) * INV_PI),
        d_metallic: m.albedo * (-INV_PI),
        d_roughness: Rgb::BLACK,
    };

    let h = (geom.wi + geom.wo).normalized_unchecked();
    let c = geom.n.dot(h).max(0.0);
    let r = effective_roughness(m.roughness);
    let dr_active = if m.roughness > ROUGH_MIN && m.roughness <= 1.0 {
        1.0
    } else {
        0.0
    };
    let alpha2 = r * r;
    let t = c * c * (alpha2 - 1.0) + 1.0;
    let d = alpha2 / (PI * t * t);
    let dd_dalpha = (t - 2.0 * alpha2 * c * c) / (PI * t * t * t);

    let k = alpha2 / 2.0;
    let den_o = n_dot_o * (1.0 - k) + k;
    let den_i = n_dot_i * (1.0 - k) + k;
    let g1o = n_dot_o / den_o;
    let g1i = n_dot_i / den_i;
    let dg1o_dk = -n_dot_o * (1.0 - n_dot_o) / (den_o * den_o);
    let dg1i_dk = -n_dot_i * (1.0 - n_dot_i) / (den_i * den_i);
    let g = g1o * g1i;
    let dg_dk = dg1o_dk * g1i + g1o * dg1i_dk;

    let s = schlick_weight(geom.wo.dot(h));
    let f0 = f0_from_material(m);
    let f = f0.map(|c| c + (1.0 - c) * s);
    let norm = 1.0 / (4.0 * n_dot_o * n_dot_i);
    let dgk = d * g * norm;
    // dalpha/dr = 2r, dk/dr = r
    let d_dg_dr = (dd_dalpha * 2.0 * r * g + d * dg_dk * r) * norm * dr_active;

    let specular = LobeGrad {
        value: f * dgk,
        d_albedo: Rgb::gray(dgk * (1.0 - s) * m.metallic),
        d_metallic: m.albedo.map(|a| dgk * (1.0 - s) * (a - DIELECTRIC_F0)),
        d_roughness: f * d_dg_dr,
    };
    BrdfGrad { diffuse, specular }
}

/// Direction drawn by GGX half-vector sampling and its solid-angle density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GgxSample {
    pub wi: Vec3,
    /// Zero when the reflected direction falls below the horizon; the caller
    /// discards such samples.
    pub pdf: f64,
}

/// Samples `h` with density `D(h) (n.h)` and reflects `wo` about it.
pub fn sample_ggx(n: Vec3, wo: Vec3, roughness: f64, u1: f64, u2: f64) -> GgxSample {
    let alpha2 = alpha_from_roughness(roughness);
    let cos2 = ((1.0 - u1) / (1.0 + (alpha2 - 1.0) * u1)).clamp(0.0, 1.0);
    let cos_t = cos2.sqrt();
    let sin_t = (1.0 - cos2).max(0.0).sqrt();
    let phi = 2.0 * PI * u2;
    let h = Frame::from_normal(n).to_world(Vec3::new(sin_t * phi.cos(), sin_t * phi.sin(), cos_t));
    let o_dot_h = wo.dot(h);
    let wi = reflect(wo, h);
    if o_dot_h <= 0.0 || wi.dot(n) <= 0.0 {
        return GgxSample { wi, pdf: 0.0 };
    }
    GgxSample {
        wi,
        pdf: ggx_ndf(cos_t, alpha2) * cos_t / (4.0 * o_dot_h),
    }
}

/// Density of [`sample_ggx`] for a given pair of directions.
pub fn ggx_pdf(n: Vec3, wo: Vec3, wi: Vec3, roughness: f64) -> f64 {
    if n.dot(wi) <= 0.0 || n.dot(wo) <= 0.0 {
        return 0.0;
    }
    let h = (wi + wo).normalized_unchecked();
    let c = n.dot(h);
    ggx_ndf(c, alpha_from_roughness(roughness)) * c / (4.0 * wo.dot(h))
}
