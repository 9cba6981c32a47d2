//! Multi-domain channel rendering, MRO packing and dataset emission.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil;
use crate::image::{ChannelImage, PngEncoding};
use crate::lighting::{shade_diffuse, shade_specular, Occluder, ShadingOptions};
use crate::math::{Rgb, Vec3};
use crate::sampler::{derive_seed, Lobe, Sampler};
use crate::scene::{CameraView, SampleCounts, Scene, SurfacePoint};

/// Image domains a frame can contain.
///
/// Beyond the albedo/metallic/roughness/specular-light set this includes
/// the diffuse shading pass (so RGB can be checked as diffuse + specular)
/// and the packed MRO image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RenderChannel {
    #[serde(rename = "rgb")]
    Rgb,
    #[serde(rename = "albedo")]
    Albedo,
    #[serde(rename = "metallic")]
    Metallic,
    #[serde(rename = "roughness")]
    Roughness,
    #[serde(rename = "speclight")]
    SpecularLight,
    #[serde(rename = "mask")]
    Mask,
    #[serde(rename = "depth")]
    Depth,
    #[serde(rename = "normal")]
    Normal,
    #[serde(rename = "difflight")]
    DiffuseLight,
    #[serde(rename = "mro")]
    Mro,
}

impl RenderChannel {
    pub const ALL: [RenderChannel; 10] = [
        RenderChannel::Rgb,
        RenderChannel::Albedo,
        RenderChannel::Metallic,
        RenderChannel::Roughness,
        RenderChannel::SpecularLight,
        RenderChannel::Mask,
        RenderChannel::Depth,
        RenderChannel::Normal,
        RenderChannel::DiffuseLight,
        RenderChannel::Mro,
    ];

    pub fn arity(self) -> usize {
        use RenderChannel::*;
        match self {
            Rgb | Albedo | SpecularLight | Normal | DiffuseLight | Mro => 3,
            Metallic | Roughness | Mask | Depth => 1,
        }
    }

    pub fn name(self) -> &'static str {
        use RenderChannel::*;
        match self {
            Rgb => "rgb",
            Albedo => "albedo",
            Metallic => "metallic",
            Roughness => "roughness",
            SpecularLight => "speclight",
            Mask => "mask",
            Depth => "depth",
            Normal => "normal",
            DiffuseLight => "difflight",
            Mro => "mro",
        }
    }

    /// Depends on the light set.
    pub fn is_lit(self) -> bool {
        matches!(
            self,
            RenderChannel::Rgb | RenderChannel::SpecularLight | RenderChannel::DiffuseLight
        )
    }

    pub fn png_encoding(self) -> PngEncoding {
        use RenderChannel::*;
        match self {
            Rgb | SpecularLight | DiffuseLight => PngEncoding::ToneMappedSrgb,
            Albedo => PngEncoding::Srgb,
            Depth => PngEncoding::Normalized,
            Metallic | Roughness | Mask | Normal | Mro => PngEncoding::Linear,
        }
    }
}

impl fmt::Display for RenderChannel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RenderChannel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let alias = match lower.as_str() {
            "specular" | "specular_light" | "specularlight" => "speclight",
            "diffuse" | "diffuse_light" | "diffuselight" => "difflight",
            other => other,
        };
        RenderChannel::ALL
            .into_iter()
            .find(|c| c.name() == alias)
            .ok_or_else(|| Error::invalid(format!("unknown channel '{s}'")))
    }
}

/// Parses a comma-separated channel list, dropping duplicates.
pub fn parse_channels(list: &str) -> Result<Vec<RenderChannel>> {
    let mut out: Vec<RenderChannel> = Vec::new();
    for part in list.split(',').filter(|p| !p.trim().is_empty()) {
        let c: RenderChannel = part.parse()?;
        if !out.contains(&c) {
            out.push(c);
        }
    }
    if out.is_empty() {
        return Err(Error::invalid("no channels requested"));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderSettings {
    pub seed: u64,
    pub samples: SampleCounts,
}

/// Primary hits of one view.
#[derive(Debug, Clone)]
pub struct GBuffer {
    pub view: CameraView,
    pub hits: Vec<Option<SurfacePoint>>,
    /// Unit direction from each pixel's hit back toward the camera.
    pub wo: Vec<Vec3>,
}

impl GBuffer {
    pub fn new(scene: &Scene, view: &CameraView) -> Self {
        let basis = view.basis();
        let (hits, wo) = (0..view.pixel_count())
            .into_par_iter()
            .map(|i| {
                let ray = view.primary_ray(&basis, i % view.width, i / view.width);
                (scene.ray_cast(&ray), -ray.dir)
            })
            .unzip();
        GBuffer {
            view: *view,
            hits,
            wo,
        }
    }

    pub fn mask(&self) -> Vec<bool> {
        self.hits.iter().map(Option::is_some).collect()
    }
}

fn shading_options<'a>(scene: &'a Scene, env_samples: usize) -> ShadingOptions<'a> {
    ShadingOptions {
        env_samples,
        occluder: scene.shadows.then_some(scene as &dyn Occluder),
    }
}

/// Fills an image by evaluating `f` at every foreground pixel in parallel.
fn fill(
    gb: &GBuffer,
    channels: usize,
    f: impl Fn(usize, &SurfacePoint) -> [f32; 3] + Sync,
) -> ChannelImage {
    let (w, h) = (gb.view.width, gb.view.height);
    let px = w * h;
    let values: Vec<[f32; 3]> = (0..px)
        .into_par_iter()
        .map(|i| gb.hits[i].as_ref().map_or([0.0; 3], |hit| f(i, hit)))
        .collect();
    let mut data = vec![0.0f32; px * channels];
    for (i, v) in values.iter().enumerate() {
        for c in 0..channels {
            data[c * px + i] = v[c];
        }
    }
    ChannelImage::from_parts(w, h, channels, data, gb.mask()).expect("shape matches view")
}

fn rgb32(c: Rgb) -> [f32; 3] {
    [c.r as f32, c.g as f32, c.b as f32]
}

fn diffuse_at(scene: &Scene, seed: u64, n: usize, i: usize, hit: &SurfacePoint) -> [f32; 3] {
    let mut s = Sampler::for_pixel(seed, i as u64, Lobe::Diffuse);
    rgb32(shade_diffuse(
        hit,
        &hit.material,
        &scene.lights,
        &shading_options(scene, n),
        &mut s,
    ))
}

fn specular_at(
    scene: &Scene,
    seed: u64,
    n: usize,
    i: usize,
    hit: &SurfacePoint,
    wo: Vec3,
) -> [f32; 3] {
    let mut s = Sampler::for_pixel(seed, i as u64, Lobe::Specular);
    rgb32(shade_specular(
        hit,
        wo,
        &hit.material,
        &scene.lights,
        &shading_options(scene, n),
        &mut s,
    ))
}

/// Renders one channel from precomputed primary hits. `seed` keys the
/// per-pixel sampler streams.
///
/// Lit channels: `DiffuseLight` and `SpecularLight` are the two shading
/// passes; `Rgb` is their sum taken after rounding each pass to `f32`, so it
/// equals `DiffuseLight + SpecularLight` exactly when both use the same
/// sample count. `Rgb` and `DiffuseLight` use `samples.rgb` environment
/// samples, `SpecularLight` uses `samples.specular`.
pub fn render_channel_gbuffer(
    scene: &Scene,
    gb: &GBuffer,
    channel: RenderChannel,
    seed: u64,
    samples: SampleCounts,
) -> ChannelImage {
    use RenderChannel::*;
    let basis = gb.view.basis();
    let arity = channel.arity();
    match channel {
        Rgb => fill(gb, arity, |i, hit| {
            let d = diffuse_at(scene, seed, samples.rgb, i, hit);
            let s = specular_at(scene, seed, samples.rgb, i, hit, gb.wo[i]);
            [d[0] + s[0], d[1] + s[1], d[2] + s[2]]
        }),
        DiffuseLight => fill(gb, arity, |i, hit| {
            diffuse_at(scene, seed, samples.rgb, i, hit)
        }),
        SpecularLight => fill(gb, arity, |i, hit| {
            specular_at(scene, seed, samples.specular, i, hit, gb.wo[i])
        }),
        Albedo => fill(gb, arity, |_, hit| rgb32(hit.material.albedo)),
        Metallic => fill(gb, arity, |_, hit| [hit.material.metallic as f32, 0.0, 0.0]),
        Roughness => fill(gb, arity, |_, hit| {
            [hit.material.roughness as f32, 0.0, 0.0]
        }),
        Mro => fill(gb, arity, |_, hit| {
            [
                hit.material.metallic as f32,
                hit.material.roughness as f32,
                0.0,
            ]
        }),
        Mask => fill(gb, arity, |_, _| [1.0, 0.0, 0.0]),
        Depth => fill(gb, arity, |_, hit| [hit.distance as f32, 0.0, 0.0]),
        Normal => fill(gb, arity, |_, hit| {
            // Camera space: x right, y up, z toward the viewer.
            let n = hit.normal;
            let c = [n.dot(basis.right), n.dot(basis.up), -n.dot(basis.forward)];
            c.map(|v| (0.5 * (v + 1.0)) as f32)
        }),
    }
}

pub fn render_channel(
    scene: &Scene,
    view: &CameraView,
    channel: RenderChannel,
    settings: &RenderSettings,
) -> ChannelImage {
    let gb = GBuffer::new(scene, view);
    render_channel_gbuffer(scene, &gb, channel, settings.seed, settings.samples)
}

/// All requested channels of one view plus the camera.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiDomainFrame {
    pub view: CameraView,
    pub images: BTreeMap<RenderChannel, ChannelImage>,
}

impl MultiDomainFrame {
    pub fn get(&self, c: RenderChannel) -> Option<&ChannelImage> {
        self.images.get(&c)
    }

    /// The MRO image, packed on the fly from separate metallic and roughness
    /// images when needed.
    pub fn mro(&self) -> Option<ChannelImage> {
        if let Some(m) = self.get(RenderChannel::Mro) {
            return Some(m.clone());
        }
        let m = self.get(RenderChannel::Metallic)?;
        let r = self.get(RenderChannel::Roughness)?;
        pack_mro(m, r).ok()
    }

    /// Foreground mask shared by every image of the frame.
    pub fn mask(&self) -> Option<&[bool]> {
        self.images.values().next().map(ChannelImage::mask)
    }
}

pub fn render_frame(
    scene: &Scene,
    view: &CameraView,
    channels: &[RenderChannel],
    settings: &RenderSettings,
) -> Result<MultiDomainFrame> {
    view.validate()?;
    if channels.iter().any(|c| c.is_lit()) && scene.lights.is_empty() {
        return Err(Error::invalid("lit channels need at least one light"));
    }
    let gb = GBuffer::new(scene, view);
    let images = channels
        .iter()
        .map(|&c| {
            (
                c,
                render_channel_gbuffer(scene, &gb, c, settings.seed, settings.samples),
            )
        })
        .collect();
    Ok(MultiDomainFrame {
        view: *view,
        images,
    })
}

/// Three-channel Metallic / Roughness / Zero image.
pub fn pack_mro(metallic: &ChannelImage, roughness: &ChannelImage) -> Result<ChannelImage> {
    if metallic.channels() != 1 || roughness.channels() != 1 {
        return Err(Error::invalid(
            "MRO packing takes two single-channel images",
        ));
    }
    if !metallic.same_resolution(roughness) {
        return Err(Error::ShapeMismatch(format!(
            "metallic {}x{} vs roughness {}x{}",
            metallic.width(),
            metallic.height(),
            roughness.width(),
            roughness.height()
        )));
    }
    let px = metallic.pixel_count();
    let mut data = Vec::with_capacity(3 * px);
    data.extend_from_slice(metallic.data());
    data.extend_from_slice(roughness.data());
    data.resize(3 * px, 0.0);
    ChannelImage::from_parts(
        metallic.width(),
        metallic.height(),
        3,
        data,
        metallic.mask().to_vec(),
    )
}

/// Splits an MRO image into metallic and roughness. A nonzero third channel
/// is tolerated with a logged warning.
pub fn unpack_mro(mro: &ChannelImage) -> Result<(ChannelImage, ChannelImage)> {
    if mro.channels() != 3 {
        return Err(Error::invalid(format!(
            "MRO image needs 3 channels, got {}",
            mro.channels()
        )));
    }
    if mro_third_channel_nonzero(mro) {
        log::warn!("MRO third channel is not zero; ignoring it");
    }
    Ok((mro.extract_channel(0), mro.extract_channel(1)))
}

pub fn mro_third_channel_nonzero(mro: &ChannelImage) -> bool {
    mro.channels() == 3 && mro.plane(2).iter().any(|&v| v != 0.0)
}

/// One rendered view in a dataset manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestView {
    pub index: usize,
    pub camera: CameraView,
    /// Channel name to `.pbrf` path, relative to the manifest.
    pub files: BTreeMap<RenderChannel, PathBuf>,
    /// Channel name to PNG preview path, relative to the manifest.
    #[serde(default)]
    pub previews: BTreeMap<RenderChannel, PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub views: Vec<ManifestView>,
    pub seed: u64,
    pub channels: Vec<RenderChannel>,
    /// Resolved run configuration recorded by the caller.
    #[serde(default)]
    pub config: serde_json::Value,
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl Manifest {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fsutil::write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fsutil::read_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::format("manifest", format!("{}: {e}", path.display())))
    }

    /// Reads every listed image. Paths resolve against `base_dir`.
    pub fn load_frames(&self, base_dir: &Path) -> Result<Vec<MultiDomainFrame>> {
        self.views
            .iter()
            .map(|v| {
                let images = v
                    .files
                    .iter()
                    .map(|(c, p)| {
                        let path = if p.is_absolute() {
                            p.clone()
                        } else {
                            base_dir.join(p)
                        };
                        Ok((*c, ChannelImage::read(&path)?))
                    })
                    .collect::<Result<_>>()?;
                Ok(MultiDomainFrame {
                    view: v.camera,
                    images,
                })
            })
            .collect()
    }
}

/// Loads a manifest file and all of its frames.
pub fn load_dataset(manifest_path: &Path) -> Result<(Manifest, Vec<MultiDomainFrame>)> {
    let m = Manifest::load(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new(""));
    let frames = m.load_frames(base)?;
    Ok((m, frames))
}

/// Seed of the sampler streams for view `index` of a dataset.
pub fn view_seed(seed: u64, index: usize) -> u64 {
    derive_seed(seed, index as u64)
}

/// Renders every view and writes `view_NNN_<channel>.pbrf` plus a PNG
/// preview for each channel, then `manifest.json`. Output bytes depend only
/// on the scene, views, channels, settings and `config`.
pub fn render_dataset(
    scene: &Scene,
    views: &[CameraView],
    channels: &[RenderChannel],
    settings: &RenderSettings,
    out_dir: &Path,
    config: serde_json::Value,
) -> Result<Manifest> {
    if views.is_empty() {
        return Err(Error::invalid("no views to render"));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut entries = Vec::with_capacity(views.len());
    for (index, view) in views.iter().enumerate() {
        let frame_settings = RenderSettings {
            seed: view_seed(settings.seed, index),
            ..*settings
        };
        let frame = render_frame(scene, view, channels, &frame_settings)?;
        let mut files = BTreeMap::new();
        let mut previews = BTreeMap::new();
        for (c, img) in &frame.images {
            let stem = format!("view_{index:03}_{}", c.name());
            let pbrf = PathBuf::from(format!("{stem}.pbrf"));
            let png = PathBuf::from(format!("{stem}.png"));
            img.write(&out_dir.join(&pbrf))?;
            img.write_png(&out_dir.join(&png), c.png_encoding())?;
            files.insert(*c, pbrf);
            previews.insert(*c, png);
        }
        log::info!("rendered view {}/{}", index + 1, views.len());
        entries.push(ManifestView {
            index,
            camera: *view,
            files,
            previews,
        });
    }
    let manifest = Manifest {
        views: entries,
        seed: settings.seed,
        channels: channels.to_vec(),
        config,
    };
    manifest.write(&out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}
