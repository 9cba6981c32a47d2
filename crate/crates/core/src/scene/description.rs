//! JSON scene documents.
//!
//! ```json
//! {
//!   "mesh": {"primitive": "sphere", "subdivisions": 32},
//!   "materials": {"albedo": [0.6, 0.6, 0.6], "metallic": 0.0, "roughness": "rough.pbrf"},
//!   "lights": {
//!     "environment": {"path": "env.pbrf", "rotation": 0.0},
//!     "directional": [{"direction": [0, 1, 1], "radiance": [3, 3, 3]}]
//!   },
//!   "orbit": {"azimuths": 7, "elevations": [30, 0, -30]},
//!   "seed": 42
//! }
//! ```
//!
//! Relative paths resolve against the directory holding the document.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::brdf::MaterialSample;
use crate::error::{Error, Result};
use crate::fsutil::read_string;
use crate::image::ChannelImage;
use crate::lighting::{DirectionalLight, EnvironmentMap, LightSet, PointLight};
use crate::math::{Rgb, Vec3};

use super::{
    primitive_cube, primitive_quad, primitive_sphere, CameraView, MaterialTexture, OrbitParams,
    Scene, TriangleMesh,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MeshSource {
    Path(PathBuf),
    Primitive {
        primitive: String,
        #[serde(default = "default_subdivisions")]
        subdivisions: usize,
    },
}

fn default_subdivisions() -> usize {
    32
}

/// A texture given inline as a constant or as a `.pbrf` path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TextureSource {
    Scalar(f64),
    Color([f64; 3]),
    Path(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialsDesc {
    #[serde(default = "default_albedo")]
    pub albedo: TextureSource,
    #[serde(default = "default_metallic")]
    pub metallic: TextureSource,
    #[serde(default = "default_roughness")]
    pub roughness: TextureSource,
    /// Texture size `[width, height]` when no texture is read from disk.
    #[serde(default = "default_tex_resolution")]
    pub resolution: [usize; 2],
}

fn default_albedo() -> TextureSource {
    TextureSource::Scalar(0.8)
}

fn default_metallic() -> TextureSource {
    TextureSource::Scalar(0.0)
}

fn default_roughness() -> TextureSource {
    TextureSource::Scalar(0.5)
}

fn default_tex_resolution() -> [usize; 2] {
    [16, 8]
}

impl Default for MaterialsDesc {
    fn default() -> Self {
        MaterialsDesc {
            albedo: default_albedo(),
            metallic: default_metallic(),
            roughness: default_roughness(),
            resolution: default_tex_resolution(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EnvironmentSource {
    File {
        path: PathBuf,
        #[serde(default)]
        rotation: f64,
    },
    Constant {
        constant: Rgb,
        #[serde(default)]
        rotation: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionalDesc {
    /// Points toward the light.
    pub direction: Vec3,
    pub radiance: Rgb,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointDesc {
    pub position: Vec3,
    pub intensity: Rgb,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LightsDesc {
    #[serde(default)]
    pub environment: Option<EnvironmentSource>,
    #[serde(default)]
    pub directional: Vec<DirectionalDesc>,
    #[serde(default)]
    pub point: Vec<PointDesc>,
}

/// Environment samples per pixel for the lit channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleCounts {
    #[serde(default = "default_rgb_samples")]
    pub rgb: usize,
    #[serde(default = "default_specular_samples")]
    pub specular: usize,
}

fn default_rgb_samples() -> usize {
    256
}

fn default_specular_samples() -> usize {
    512
}

impl Default for SampleCounts {
    fn default() -> Self {
        SampleCounts {
            rgb: default_rgb_samples(),
            specular: default_specular_samples(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneDescription {
    pub mesh: MeshSource,
    #[serde(default)]
    pub materials: Option<MaterialsDesc>,
    #[serde(default)]
    pub lights: LightsDesc,
    #[serde(default)]
    pub cameras: Vec<CameraView>,
    #[serde(default)]
    pub orbit: Option<OrbitParams>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub samples: SampleCounts,
    #[serde(default)]
    pub shadows: bool,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl SceneDescription {
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self> {
        let mut desc: SceneDescription = serde_json::from_str(text)?;
        desc.base_dir = base_dir.to_path_buf();
        Ok(desc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = read_string(path)?;
        let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        Self::from_json(&text, &base).map_err(|e| match e {
            Error::Json(j) => Error::format("scene json", format!("{}: {j}", path.display())),
            other => other,
        })
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn load_mesh(&self) -> Result<TriangleMesh> {
        match &self.mesh {
            MeshSource::Path(p) => TriangleMesh::load_obj(&self.resolve(p)),
            MeshSource::Primitive {
                primitive,
                subdivisions,
            } => match primitive.as_str() {
                "sphere" => Ok(primitive_sphere((*subdivisions).max(2))),
                "cube" => Ok(primitive_cube()),
                "quad" => Ok(primitive_quad(2.0)),
                other => Err(Error::invalid(format!("unknown primitive '{other}'"))),
            },
        }
    }

    /// Ground-truth textures, or `None` when the document has no materials.
    pub fn load_textures(&self) -> Result<Option<MaterialTexture>> {
        let Some(m) = &self.materials else {
            return Ok(None);
        };
        let loaded = |src: &TextureSource| -> Result<Option<ChannelImage>> {
            match src {
                TextureSource::Path(p) => ChannelImage::read(&self.resolve(p)).map(Some),
                _ => Ok(None),
            }
        };
        let (a, me, r) = (
            loaded(&m.albedo)?,
            loaded(&m.metallic)?,
            loaded(&m.roughness)?,
        );
        let [w, h] = [&a, &me, &r]
            .iter()
            .find_map(|t| t.as_ref().map(|i| [i.width(), i.height()]))
            .unwrap_or(m.resolution);
        let fill = |src: &TextureSource,
                    img: Option<ChannelImage>,
                    channels: usize|
         -> Result<ChannelImage> {
            if let Some(img) = img {
                return Ok(img);
            }
            let v = match (src, channels) {
                (TextureSource::Scalar(s), 3) => vec![*s as f32; 3],
                (TextureSource::Scalar(s), _) => vec![*s as f32],
                (TextureSource::Color(c), 3) => c.iter().map(|v| *v as f32).collect(),
                (TextureSource::Color(_), _) => {
                    return Err(Error::invalid(
                        "metallic and roughness take a scalar, not a color",
                    ))
                }
                (TextureSource::Path(_), _) => unreachable!("paths were loaded above"),
            };
            ChannelImage::filled(w, h, &v)
        };
        let albedo = fill(&m.albedo, a, 3)?;
        let metallic = fill(&m.metallic, me, 1)?;
        let roughness = fill(&m.roughness, r, 1)?;
        MaterialTexture::new(albedo, metallic, roughness).map(Some)
    }

    pub fn load_lights(&self) -> Result<LightSet> {
        let environment = match &self.lights.environment {
            None => None,
            Some(EnvironmentSource::File { path, rotation }) => {
                Some(EnvironmentMap::load(&self.resolve(path), *rotation)?)
            }
            Some(EnvironmentSource::Constant { constant, rotation }) => {
                let mut env = EnvironmentMap::constant(*constant, 8);
                env.rotation = *rotation;
                Some(env)
            }
        };
        let directional = self
            .lights
            .directional
            .iter()
            .map(|d| DirectionalLight::new(d.direction, d.radiance))
            .collect::<Result<Vec<_>>>()?;
        let point = self
            .lights
            .point
            .iter()
            .map(|p| PointLight {
                position: p.position,
                intensity: p.intensity,
            })
            .collect();
        Ok(LightSet {
            environment,
            directional,
            point,
        })
    }

    /// Builds the scene. Without a `materials` entry the surface gets the
    /// default constant material.
    pub fn build(&self) -> Result<Scene> {
        let mesh = self.load_mesh()?;
        let textures = match self.load_textures()? {
            Some(t) => t,
            None => {
                let d = MaterialsDesc::default();
                MaterialTexture::constant(
                    d.resolution[0],
                    d.resolution[1],
                    &MaterialSample::new(Rgb::gray(0.8), 0.0, 0.5),
                )
            }
        };
        let mut scene = Scene::new(mesh, textures, self.load_lights()?);
        scene.shadows = self.shadows;
        Ok(scene)
    }

    /// Explicit cameras followed by the orbit, if any.
    pub fn views(&self) -> Result<Vec<CameraView>> {
        let mut views = self.cameras.clone();
        for v in &views {
            v.validate()?;
        }
        if let Some(o) = &self.orbit {
            views.extend(o.views()?);
        }
        Ok(views)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_document() {
        let d = SceneDescription::from_json(r#"{"mesh": {"primitive": "cube"}}"#, Path::new("."))
            .unwrap();
        assert_eq!(d.seed, 0);
        assert_eq!(
            d.samples,
            SampleCounts {
                rgb: 256,
                specular: 512
            }
        );
        let s = d.build().unwrap();
        assert_eq!(s.mesh.triangle_count(), 12);
        assert!(s.lights.is_empty());
        assert!(d.views().unwrap().is_empty());
    }

    #[test]
    fn full_document() {
        let text = r#"{
            "mesh": {"primitive": "sphere", "subdivisions": 8},
            "materials": {"albedo": [0.3, 0.5, 0.7], "metallic": 1.0, "roughness": 0.25,
                          "resolution": [4, 2]},
            "lights": {"environment": {"constant": [1, 1, 1], "rotation": 0.5},
                       "directional": [{"direction": [0, 2, 0], "radiance": [3, 3, 3]}],
                       "point": [{"position": [0, 3, 0], "intensity": [9, 9, 9]}]},
            "orbit": {"azimuths": 7, "elevations": [30, 0, -30], "resolution": 16},
            "seed": 7,
            "samples": {"rgb": 16},
            "shadows": true
        }"#;
        let d = SceneDescription::from_json(text, Path::new(".")).unwrap();
        let s = d.build().unwrap();
        assert!(s.shadows);
        assert_eq!(s.textures.width(), 4);
        let m = s.textures.sample([0.3, 0.3]);
        assert_eq!(m.metallic, 1.0);
        assert!((m.albedo.g - 0.5).abs() < 1e-7);
        assert_eq!(s.lights.directional[0].direction, Vec3::Y);
        assert_eq!(s.lights.environment.as_ref().unwrap().rotation, 0.5);
        assert_eq!(d.samples.specular, 512);
        assert_eq!(d.views().unwrap().len(), 21);
    }

    #[test]
    fn texture_paths_resolve_relative_to_document() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = ChannelImage::new(3, 2, 1).unwrap();
        r.set(2, 1, 0, 0.75);
        r.write(&dir.path().join("rough.pbrf")).unwrap();
        let doc = dir.path().join("scene.json");
        std::fs::write(
            &doc,
            r#"{"mesh": {"primitive": "quad"}, "materials": {"roughness": "rough.pbrf"}}"#,
        )
        .unwrap();
        let d = SceneDescription::load(&doc).unwrap();
        let t = d.load_textures().unwrap().unwrap();
        assert_eq!((t.width(), t.height()), (3, 2));
        assert_eq!(t.roughness.get(2, 1, 0), 0.75);
        assert_eq!(t.albedo.get(0, 0, 1), 0.8);
    }

    #[test]
    fn bad_documents() {
        let base = Path::new(".");
        assert!(SceneDescription::from_json("{}", base).is_err());
        let d = SceneDescription::from_json(r#"{"mesh": {"primitive": "torus"}}"#, base).unwrap();
        assert!(d.build().is_err());
        let d = SceneDescription::from_json(
            r#"{"mesh": {"primitive": "cube"}, "materials": {"metallic": [1, 0, 0]}}"#,
            base,
        )
        .unwrap();
        assert!(d.build().is_err());
        assert!(SceneDescription::load(Path::new("/nonexistent/scene.json")).is_err());
    }
}
