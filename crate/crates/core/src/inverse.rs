//! Material recovery from multi-view renders under known geometry and lights.
//!
//! Textures are optimized in an unconstrained latent space mapped to (0, 1) by
//! the logistic function. The forward model shades every cached foreground
//! pixel with the lights that reach it: punctual lights exactly, and an
//! environment map through a fixed set of cosine-distributed directions drawn
//! once per pixel ("frozen noise"), so the loss is a smooth deterministic
//! function of the texels.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::brdf::{brdf_grad, BrdfGrad, LobeGrad, MaterialSample, ShadingGeometry};
use crate::error::{Error, Result};
use crate::image::ChannelImage;
use crate::lighting::{LightSet, Occluder};
use crate::math::{Rgb, Vec3, INV_PI};
use crate::renderer::{render_frame, view_seed, GBuffer, RenderChannel, RenderSettings};
use crate::sampler::{cosine_hemisphere, Lobe, Sampler};
use crate::scene::{CameraView, MaterialTexture, SampleCounts, Scene, Tap};

/// Parameters per texel: albedo r, g, b, metallic, roughness.
pub const PARAMS_PER_TEXEL: usize = 5;

/// Loss above which optimization is abandoned.
pub const DIVERGENCE_LOSS: f64 = 1e6;

/// Latent values are kept inside this range so the squash stays strictly
/// inside (0, 1).
const LATENT_LIMIT: f64 = 30.0;

#[inline]
pub fn squash(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Inverse of [`squash`], with the argument clamped away from 0 and 1.
#[inline]
pub fn unsquash(p: f64) -> f64 {
    let p = p.clamp(1e-6, 1.0 - 1e-6);
    (p / (1.0 - p)).ln()
}

/// One observed view.
#[derive(Debug, Clone)]
pub struct Observation {
    pub view: CameraView,
    /// Observed radiance; its mask selects the pixels that enter the loss.
    pub rgb: ChannelImage,
    /// Optional specular-shading target for the auxiliary loss term.
    pub specular: Option<ChannelImage>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemOptions {
    /// Frozen environment directions per pixel.
    pub env_samples: usize,
    /// Seed of the frozen environment directions.
    pub seed: u64,
    /// Drop light samples blocked by the mesh itself.
    pub shadows: bool,
}

impl Default for ProblemOptions {
    fn default() -> Self {
        ProblemOptions {
            env_samples: 32,
            seed: 0,
            shadows: false,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct LightSample {
    wi: Vec3,
    /// Radiance scaled so that `radiance * f * cos` is the sample's share of
    /// the shading integral.
    radiance: Rgb,
    cos: f64,
}

#[derive(Debug, Clone)]
struct PixelRecord {
    taps: [Tap; 4],
    normal: Vec3,
    wo: Vec3,
    target: Rgb,
    spec_target: Option<Rgb>,
    lights: (u32, u32),
}

/// Cached pixel-to-texel correspondences, light samples and targets.
#[derive(Debug, Clone)]
pub struct InverseProblem {
    tex_width: usize,
    tex_height: usize,
    pixels: Vec<PixelRecord>,
    lights: Vec<LightSample>,
    spec_pixels: usize,
    coverage: Vec<bool>,
    stochastic: bool,
    /// Reference texture used only for error reports.
    pub ground_truth: Option<MaterialTexture>,
}

impl InverseProblem {
    /// Ray casts every view once against `mesh` and caches, for each masked
    /// pixel that hits the surface, its bilinear texel taps, shading frame,
    /// targets and incident light samples.
    pub fn new(
        scene: &Scene,
        observations: &[Observation],
        tex_size: (usize, usize),
        options: ProblemOptions,
    ) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::invalid("inverse problem needs at least one view"));
        }
        let (tw, th) = tex_size;
        if tw == 0 || th == 0 {
            return Err(Error::invalid("texture size must be positive"));
        }
        if scene.lights.is_empty() {
            return Err(Error::invalid("inverse problem needs at least one light"));
        }
        let lights = &scene.lights;
        let mut pixels = Vec::new();
        let mut samples = Vec::new();
        let mut missed = 0usize;
        for (vi, obs) in observations.iter().enumerate() {
            obs.view.validate()?;
            let (w, h) = (obs.view.width, obs.view.height);
            if obs.rgb.width() != w || obs.rgb.height() != h || obs.rgb.channels() != 3 {
                return Err(Error::ShapeMismatch(format!(
                    "view {vi}: observation is {}x{}x{}, camera is {w}x{h}x3",
                    obs.rgb.width(),
                    obs.rgb.height(),
                    obs.rgb.channels()
                )));
            }
            if let Some(s) = &obs.specular {
                if !s.same_shape(&obs.rgb) {
                    return Err(Error::ShapeMismatch(format!(
                        "view {vi}: specular target shape differs from RGB"
                    )));
                }
            }
            let gb = GBuffer::new(scene, &obs.view);
            let seed = view_seed(options.seed, vi);
            let per_pixel: Vec<Option<(PixelRecord, Vec<LightSample>)>> = (0..w * h)
                .into_par_iter()
                .map(|i| {
                    if !obs.rgb.mask()[i] {
                        return None;
                    }
                    let hit = gb.hits[i]?;
                    let ls =
                        pixel_lights(scene, lights, &hit.position, hit.normal, seed, i, &options);
                    let rec = PixelRecord {
                        taps: crate::scene::bilinear_taps(tw, th, hit.uv),
                        normal: hit.normal,
                        wo: gb.wo[i],
                        target: obs.rgb.rgb_at(i),
                        spec_target: obs.specular.as_ref().map(|s| s.rgb_at(i)),
                        lights: (0, 0),
                    };
                    Some((rec, ls))
                })
                .collect();
            for (i, entry) in per_pixel.into_iter().enumerate() {
                match entry {
                    Some((mut rec, ls)) => {
                        let start = samples.len() as u32;
                        samples.extend(ls);
                        rec.lights = (start, samples.len() as u32);
                        pixels.push(rec);
                    }
                    None if obs.rgb.mask()[i] => missed += 1,
                    None => {}
                }
            }
        }
        if missed > 0 {
            log::warn!("{missed} masked pixels miss the mesh and are ignored");
        }
        if pixels.is_empty() {
            return Err(Error::invalid("no observed pixel hits the mesh"));
        }
        let mut coverage = vec![false; tw * th];
        for p in &pixels {
            for &(t, w) in &p.taps {
                if w > 0.0 {
                    coverage[t] = true;
                }
            }
        }
        let spec_pixels = pixels.iter().filter(|p| p.spec_target.is_some()).count();
        Ok(InverseProblem {
            tex_width: tw,
            tex_height: th,
            pixels,
            lights: samples,
            spec_pixels,
            coverage,
            stochastic: lights.environment.is_some() && options.env_samples > 0,
            ground_truth: None,
        })
    }

    pub fn with_ground_truth(mut self, gt: MaterialTexture) -> Result<Self> {
        if gt.width() != self.tex_width || gt.height() != self.tex_height {
            return Err(Error::ShapeMismatch(format!(
                "ground truth is {}x{}, problem texture is {}x{}",
                gt.width(),
                gt.height(),
                self.tex_width,
                self.tex_height
            )));
        }
        self.ground_truth = Some(gt);
        Ok(self)
    }

    pub fn texture_size(&self) -> (usize, usize) {
        (self.tex_width, self.tex_height)
    }

    pub fn texel_count(&self) -> usize {
        self.tex_width * self.tex_height
    }

    pub fn pixel_count(&self) -> usize {
        self.pixels.len()
    }

    /// Texels reached by at least one bilinear tap with nonzero weight.
    pub fn coverage(&self) -> &[bool] {
        &self.coverage
    }

    pub fn has_specular_targets(&self) -> bool {
        self.spec_pixels > 0
    }

    /// Loss and, if requested, its gradient with respect to the texel
    /// parameters (not latents).
    pub fn evaluate(
        &self,
        params: &[f64],
        lambda_spec: f64,
        want_grad: bool,
    ) -> (f64, Option<Vec<f64>>) {
        assert_eq!(params.len(), self.texel_count() * PARAMS_PER_TEXEL);
        let w_rgb = 1.0 / (3.0 * self.pixels.len() as f64);
        let w_spec = if self.spec_pixels > 0 {
            lambda_spec / (3.0 * self.spec_pixels as f64)
        } else {
            0.0
        };
        let per_pixel: Vec<(f64, [f64; PARAMS_PER_TEXEL])> = self
            .pixels
            .par_iter()
            .map(|px| self.pixel_term(px, params, w_rgb, w_spec, want_grad))
            .collect();
        let loss = per_pixel.iter().map(|t| t.0).sum();
        let grad = want_grad.then(|| {
            let mut g = vec![0.0; params.len()];
            for (px, (_, d)) in self.pixels.iter().zip(&per_pixel) {
                for &(t, w) in &px.taps {
                    if w == 0.0 {
                        continue;
                    }
                    let base = t * PARAMS_PER_TEXEL;
                    for k in 0..PARAMS_PER_TEXEL {
                        g[base + k] += w * d[k];
                    }
                }
            }
            g
        });
        (loss, grad)
    }

    fn pixel_term(
        &self,
        px: &PixelRecord,
        params: &[f64],
        w_rgb: f64,
        w_spec: f64,
        want_grad: bool,
    ) -> (f64, [f64; PARAMS_PER_TEXEL]) {
        let m = material_at(params, &px.taps);
        let mut pred = Rgb::BLACK;
        let mut spec = Rgb::BLACK;
        // Derivatives of pred and spec, per color channel, w.r.t. the
        // pixel's albedo (diagonal), metallic and roughness.
        let mut d_pred = [Rgb::BLACK; 3];
        let mut d_spec = [Rgb::BLACK; 3];
        let (a, b) = px.lights;
        let use_spec = px.spec_target.is_some() && w_spec > 0.0;
        let front = px.normal.dot(px.wo) > 0.0;
        for l in &self.lights[a as usize..b as usize] {
            let g = if front {
                brdf_grad(&ShadingGeometry::new(px.normal, l.wi, px.wo), &m)
            } else {
                // The renderer's diffuse pass does not depend on the view
                // direction, so interpolated normals facing away from the
                // camera still receive diffuse light.
                BrdfGrad {
                    diffuse: diffuse_grad(&m),
                    specular: LobeGrad::default(),
                }
            };
            let scale = l.radiance * l.cos;
            let total = g.total();
            pred += total.value * scale;
            if use_spec {
                spec += g.specular.value * scale;
            }
            if want_grad {
                d_pred[0] += total.d_albedo * scale;
                d_pred[1] += total.d_metallic * scale;
                d_pred[2] += total.d_roughness * scale;
                if use_spec {
                    d_spec[0] += g.specular.d_albedo * scale;
                    d_spec[1] += g.specular.d_metallic * scale;
                    d_spec[2] += g.specular.d_roughness * scale;
                }
            }
        }
        let r = pred - px.target;
        let mut loss = w_rgb * (r.r * r.r + r.g * r.g + r.b * r.b);
        let rs = match (use_spec, px.spec_target) {
            (true, Some(t)) => {
                let rs = spec - t;
                loss += w_spec * (rs.r * rs.r + rs.g * rs.g + rs.b * rs.b);
                rs
            }
            _ => Rgb::BLACK,
        };
        let mut d = [0.0; PARAMS_PER_TEXEL];
        if want_grad {
            let gr = r * (2.0 * w_rgb);
            let gs = rs * (2.0 * w_spec);
            for c in 0..3 {
                d[c] = gr[c] * d_pred[0][c] + gs[c] * d_spec[0][c];
            }
            for c in 0..3 {
                d[3] += gr[c] * d_pred[1][c] + gs[c] * d_spec[1][c];
                d[4] += gr[c] * d_pred[2][c] + gs[c] * d_spec[2][c];
            }
        }
        (loss, d)
    }
}

/// Incident light samples at one surface point.
fn pixel_lights(
    scene: &Scene,
    lights: &LightSet,
    position: &Vec3,
    normal: Vec3,
    seed: u64,
    pixel: usize,
    options: &ProblemOptions,
) -> Vec<LightSample> {
    const EPS: f64 = 1e-6;
    let origin = *position + normal * EPS;
    let visible =
        |wi: Vec3, dist: f64| !options.shadows || !scene.occluded(origin, wi, dist - 2.0 * EPS);
    let mut out = Vec::new();
    for (wi, li, dist) in lights.punctual_at(*position) {
        let cos = normal.dot(wi);
        if cos > 0.0 && visible(wi, dist) {
            out.push(LightSample {
                wi,
                radiance: li,
                cos,
            });
        }
    }
    if let Some(env) = &lights.environment {
        let n = options.env_samples;
        let mut s = Sampler::for_pixel(seed, pixel as u64, Lobe::Aux);
        for _ in 0..n {
            let (u1, u2) = s.next_2d();
            let (wi, pdf) = cosine_hemisphere(normal, u1, u2);
            let cos = normal.dot(wi);
            if pdf <= 0.0 || cos <= 0.0 || !visible(wi, f64::INFINITY) {
                continue;
            }
            out.push(LightSample {
                wi,
                radiance: env.lookup(wi) / (pdf * n as f64),
                cos,
            });
        }
    }
    out
}

fn diffuse_grad(m: &MaterialSample) -> LobeGrad {
    LobeGrad {
        value: m.albedo * ((1.0 - m.metallic) * INV_PI),
        d_albedo: Rgb::gray((1.0 - m.metallic) * INV_PI),
        d_metallic: m.albedo * (-INV_PI),
        d_roughness: Rgb::BLACK,
    }
}

#[inline]
fn material_at(params: &[f64], taps: &[Tap; 4]) -> MaterialSample {
    let mut v = [0.0; PARAMS_PER_TEXEL];
    for &(t, w) in taps {
        let p = &params[t * PARAMS_PER_TEXEL..(t + 1) * PARAMS_PER_TEXEL];
        for k in 0..PARAMS_PER_TEXEL {
            v[k] += w * p[k];
        }
    }
    MaterialSample::new(Rgb::new(v[0], v[1], v[2]), v[3], v[4])
}

/// Texel parameters in [0, 1], interleaved per texel.
pub fn texture_params(tex: &MaterialTexture) -> Vec<f64> {
    let mut out = Vec::with_capacity(tex.texel_count() * PARAMS_PER_TEXEL);
    for i in 0..tex.texel_count() {
        let a = tex.albedo.rgb_at(i);
        out.extend_from_slice(&[
            a.r,
            a.g,
            a.b,
            tex.metallic.at(i, 0) as f64,
            tex.roughness.at(i, 0) as f64,
        ]);
    }
    out
}

/// Unconstrained texture parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentTexture {
    pub width: usize,
    pub height: usize,
    /// Interleaved per texel: albedo r, g, b, metallic, roughness.
    pub values: Vec<f64>,
}

impl LatentTexture {
    pub fn constant(width: usize, height: usize, latent: f64) -> Self {
        LatentTexture {
            width,
            height,
            values: vec![latent; width * height * PARAMS_PER_TEXEL],
        }
    }

    pub fn from_texture(tex: &MaterialTexture) -> Self {
        LatentTexture {
            width: tex.width(),
            height: tex.height(),
            values: texture_params(tex).into_iter().map(unsquash).collect(),
        }
    }

    pub fn params(&self) -> Vec<f64> {
        self.values.iter().map(|&x| squash(x)).collect()
    }

    pub fn to_texture(&self) -> MaterialTexture {
        let (w, h) = (self.width, self.height);
        let px = w * h;
        let p = self.params();
        let mut albedo = vec![0.0f32; 3 * px];
        let mut metallic = vec![0.0f32; px];
        let mut roughness = vec![0.0f32; px];
        for i in 0..px {
            for c in 0..3 {
                albedo[c * px + i] = p[i * PARAMS_PER_TEXEL + c] as f32;
            }
            metallic[i] = p[i * PARAMS_PER_TEXEL + 3] as f32;
            roughness[i] = p[i * PARAMS_PER_TEXEL + 4] as f32;
        }
        let mask = vec![true; px];
        MaterialTexture::new(
            ChannelImage::from_parts(w, h, 3, albedo, mask.clone()).expect("sized"),
            ChannelImage::from_parts(w, h, 1, metallic, mask.clone()).expect("sized"),
            ChannelImage::from_parts(w, h, 1, roughness, mask).expect("sized"),
        )
        .expect("squashed values lie in [0, 1]")
    }
}

/// Mean squared error between forward-rendered and observed RGB over all
/// cached foreground pixels, plus `lambda_spec` times the same error on the
/// specular targets when present.
pub fn photometric_loss(
    problem: &InverseProblem,
    texture: &MaterialTexture,
    lambda_spec: f64,
) -> Result<f64> {
    check_texture(problem, texture.width(), texture.height())?;
    Ok(problem
        .evaluate(&texture_params(texture), lambda_spec, false)
        .0)
}

pub fn loss_at_latent(
    problem: &InverseProblem,
    latent: &LatentTexture,
    lambda_spec: f64,
) -> Result<f64> {
    check_texture(problem, latent.width, latent.height)?;
    Ok(problem.evaluate(&latent.params(), lambda_spec, false).0)
}

/// Gradient of [`loss_at_latent`] with respect to every latent value.
pub fn loss_grad(
    problem: &InverseProblem,
    latent: &LatentTexture,
    lambda_spec: f64,
) -> Result<Vec<f64>> {
    check_texture(problem, latent.width, latent.height)?;
    Ok(latent_loss_grad(problem, latent, lambda_spec).1)
}

fn latent_loss_grad(
    problem: &InverseProblem,
    latent: &LatentTexture,
    lambda_spec: f64,
) -> (f64, Vec<f64>) {
    let params = latent.params();
    let (loss, g) = problem.evaluate(&params, lambda_spec, true);
    let g = g
        .expect("gradient requested")
        .into_iter()
        .zip(&params)
        .map(|(g, &s)| g * s * (1.0 - s))
        .collect();
    (loss, g)
}

fn check_texture(problem: &InverseProblem, w: usize, h: usize) -> Result<()> {
    if (w, h) != problem.texture_size() {
        return Err(Error::ShapeMismatch(format!(
            "texture is {w}x{h}, problem expects {}x{}",
            problem.tex_width, problem.tex_height
        )));
    }
    Ok(())
}

/// Optimizer settings: first-moment momentum `beta1` with per-parameter
/// scaling by the running second moment (`beta2`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoverConfig {
    pub steps: usize,
    pub step_size: f64,
    pub lambda_spec: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for RecoverConfig {
    fn default() -> Self {
        RecoverConfig {
            steps: 500,
            step_size: 5e-2,
            lambda_spec: 0.1,
            beta1: 0.9,
            beta2: 0.95,
            epsilon: 1e-8,
        }
    }
}

/// Recovery error against a reference texture over covered texels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialError {
    pub albedo_max: [f64; 3],
    pub albedo_mean: [f64; 3],
    pub metallic_max: f64,
    pub metallic_mean: f64,
    pub roughness_max: f64,
    pub roughness_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub initial_loss: f64,
    /// Loss of the returned (best) texture.
    pub final_loss: f64,
    pub best_step: usize,
    pub steps: usize,
    pub lambda_spec: f64,
    /// Loss before each step.
    pub trace: Vec<f64>,
    pub coverage_fraction: f64,
    /// Texels no pixel sees; they keep their initial value.
    pub uncovered_texels: Vec<usize>,
    /// True when environment lighting enters through frozen samples.
    pub stochastic: bool,
    pub per_channel_error: Option<MaterialError>,
}

#[derive(Debug, Clone)]
pub struct Recovery {
    pub texture: MaterialTexture,
    pub latent: LatentTexture,
    pub report: RecoveryReport,
}

/// Minimizes the photometric loss from the all-0.5 texture and returns the
/// best texture seen together with a per-step loss trace.
pub fn recover_materials(problem: &InverseProblem, config: &RecoverConfig) -> Result<Recovery> {
    if !(config.step_size > 0.0)
        || !(0.0..1.0).contains(&config.beta1)
        || !(0.0..1.0).contains(&config.beta2)
    {
        return Err(Error::invalid(
            "step size must be positive and betas in [0, 1)",
        ));
    }
    let (w, h) = problem.texture_size();
    let mut latent = LatentTexture::constant(w, h, 0.0);
    let n = latent.values.len();
    let mut m1 = vec![0.0; n];
    let mut m2 = vec![0.0; n];
    let mut trace = Vec::with_capacity(config.steps + 1);
    let mut best = (f64::INFINITY, 0usize, latent.clone());
    let (mut b1t, mut b2t) = (1.0, 1.0);
    for step in 0..config.steps {
        let (loss, g) = latent_loss_grad(problem, &latent, config.lambda_spec);
        if !loss.is_finite() || loss > DIVERGENCE_LOSS {
            return Err(Error::Diverged { step, loss });
        }
        trace.push(loss);
        if loss < best.0 {
            best = (loss, step, latent.clone());
        }
        b1t *= config.beta1;
        b2t *= config.beta2;
        for k in 0..n {
            m1[k] = config.beta1 * m1[k] + (1.0 - config.beta1) * g[k];
            m2[k] = config.beta2 * m2[k] + (1.0 - config.beta2) * g[k] * g[k];
            let mh = m1[k] / (1.0 - b1t);
            let vh = m2[k] / (1.0 - b2t);
            let x = latent.values[k] - config.step_size * mh / (vh.sqrt() + config.epsilon);
            latent.values[k] = x.clamp(-LATENT_LIMIT, LATENT_LIMIT);
        }
    }
    let last = loss_at_latent(problem, &latent, config.lambda_spec)?;
    if !last.is_finite() || last > DIVERGENCE_LOSS {
        return Err(Error::Diverged {
            step: config.steps,
            loss: last,
        });
    }
    trace.push(last);
    if last < best.0 {
        best = (last, config.steps, latent.clone());
    }
    let (final_loss, best_step, latent) = best;
    let texture = latent.to_texture();
    let uncovered: Vec<usize> = (0..problem.texel_count())
        .filter(|&t| !problem.coverage[t])
        .collect();
    let report = RecoveryReport {
        initial_loss: trace[0],
        final_loss,
        best_step,
        steps: config.steps,
        lambda_spec: config.lambda_spec,
        trace,
        coverage_fraction: 1.0 - uncovered.len() as f64 / problem.texel_count() as f64,
        uncovered_texels: uncovered,
        stochastic: problem.stochastic,
        per_channel_error: problem
            .ground_truth
            .as_ref()
            .map(|gt| material_error(&texture, gt, problem.coverage())),
    };
    Ok(Recovery {
        texture,
        latent,
        report,
    })
}

/// Max and mean absolute texel error over texels flagged in `covered`.
pub fn material_error(
    tex: &MaterialTexture,
    gt: &MaterialTexture,
    covered: &[bool],
) -> MaterialError {
    let a = texture_params(tex);
    let b = texture_params(gt);
    let mut max = [0.0; PARAMS_PER_TEXEL];
    let mut sum = [0.0; PARAMS_PER_TEXEL];
    let mut count = 0usize;
    for (t, _) in covered.iter().enumerate().filter(|(_, &c)| c) {
        count += 1;
        for k in 0..PARAMS_PER_TEXEL {
            let e = (a[t * PARAMS_PER_TEXEL + k] - b[t * PARAMS_PER_TEXEL + k]).abs();
            max[k] = f64::max(max[k], e);
            sum[k] += e;
        }
    }
    let mean = sum.map(|s| if count > 0 { s / count as f64 } else { 0.0 });
    MaterialError {
        albedo_max: [max[0], max[1], max[2]],
        albedo_mean: [mean[0], mean[1], mean[2]],
        metallic_max: max[3],
        metallic_mean: mean[3],
        roughness_max: max[4],
        roughness_mean: mean[4],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbiguityReport {
    pub without_specular: RecoveryReport,
    pub with_specular: RecoveryReport,
    /// Mean metallic error without the auxiliary term minus with it.
    pub metallic_error_reduction: f64,
}

/// Recovers twice, once with `lambda_spec = 0` and once with
/// `config.lambda_spec`, and compares the errors against the ground truth.
pub fn ambiguity_probe(
    problem: &InverseProblem,
    config: &RecoverConfig,
) -> Result<AmbiguityReport> {
    if problem.ground_truth.is_none() {
        return Err(Error::invalid(
            "ambiguity probe needs a ground-truth texture",
        ));
    }
    if config.lambda_spec > 0.0 && !problem.has_specular_targets() {
        return Err(Error::invalid("ambiguity probe needs specular targets"));
    }
    let without = recover_materials(
        problem,
        &RecoverConfig {
            lambda_spec: 0.0,
            ..*config
        },
    )?
    .report;
    let with = recover_materials(problem, config)?.report;
    let err = |r: &RecoveryReport| {
        r.per_channel_error
            .expect("ground truth given")
            .metallic_mean
    };
    Ok(AmbiguityReport {
        metallic_error_reduction: err(&without) - err(&with),
        without_specular: without,
        with_specular: with,
    })
}

/// Renders RGB (and optionally specular-light) observations of `scene` from
/// `views`, seeding each view like [`crate::renderer::render_dataset`].
pub fn render_observations(
    scene: &Scene,
    views: &[CameraView],
    seed: u64,
    samples: SampleCounts,
    with_specular: bool,
) -> Result<Vec<Observation>> {
    let mut channels = vec![RenderChannel::Rgb];
    if with_specular {
        channels.push(RenderChannel::SpecularLight);
    }
    views
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let settings = RenderSettings {
                seed: view_seed(seed, i),
                samples,
            };
            let mut f = render_frame(scene, v, &channels, &settings)?;
            Ok(Observation {
                view: *v,
                rgb: f.images.remove(&RenderChannel::Rgb).expect("rendered"),
                specular: f.images.remove(&RenderChannel::SpecularLight),
            })
        })
        .collect()
}
