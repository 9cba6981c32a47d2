use std::fmt;
use std::path::Path;

use pbrforge_core::inverse::{
    recover_materials, InverseProblem, Observation, ProblemOptions, RecoverConfig,
};
use pbrforge_core::meshing::{marching_cubes, sdf_analytic, sdf_from_mesh, SdfGrid, SdfShape};
use pbrforge_core::metrics::{evaluate_frames, evaluate_geometry, EvalReport};
use pbrforge_core::renderer::{
    self as renderer, load_dataset, parse_channels, render_dataset, RenderChannel, RenderSettings,
};
use pbrforge_core::scene::{OrbitParams, SampleCounts, SceneDescription};
use pbrforge_core::{fsutil, ChannelImage, Error, MaterialTexture, TriangleMesh};
use serde::Serialize;
use serde_json::{json, Value};

use crate::{
    ConvertHdrArgs, EvalGeomArgs, EvalPbrArgs, ExtractArgs, OrbitArgs, PackMroArgs, RecoverArgs,
    RenderArgs, SampleArgs, SdfArgs, UnpackMroArgs,
};

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or unreadable, malformed or inconsistent inputs.
    Input(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Internal(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) | CliError::Internal(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Io { .. }
            | Error::Format { .. }
            | Error::ShapeMismatch(_)
            | Error::Invalid(_)
            | Error::Json(_)
            | Error::ZeroLength
            | Error::OppositeDirections => CliError::Input(e.to_string()),
            Error::Diverged { .. } | Error::Png(_) => CliError::Internal(e.to_string()),
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn input(msg: impl Into<String>) -> CliError {
    CliError::Input(msg.into())
}

fn create_dir(dir: &Path) -> CliResult {
    std::fs::create_dir_all(dir).map_err(|e| input(format!("{}: {e}", dir.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Internal(format!("serializing report: {e}")))?
        + "\n";
    fsutil::write_atomic(path, text.as_bytes())?;
    Ok(())
}

fn resolved_samples(desc: &SceneDescription, args: &SampleArgs) -> RenderSettings {
    RenderSettings {
        seed: args.seed.unwrap_or(desc.seed),
        samples: SampleCounts {
            rgb: args.rgb_samples.unwrap_or(desc.samples.rgb),
            specular: args.spec_samples.unwrap_or(desc.samples.specular),
        },
    }
}

#[allow(clippy::too_many_arguments)]
fn render_views(
    command: &str,
    desc: &SceneDescription,
    scene_path: &Path,
    views: Vec<pbrforge_core::CameraView>,
    channels: &str,
    samples: &SampleArgs,
    out: &Path,
    extra: Value,
) -> CliResult {
    let channels = parse_channels(channels)?;
    let settings = resolved_samples(desc, samples);
    let scene = desc.build()?;
    let config = json!({
        "command": command,
        "scene_path": scene_path,
        "scene": desc,
        "channels": channels,
        "seed": settings.seed,
        "samples": settings.samples,
        "views": views.len(),
        "orbit": extra,
    });
    log::info!("config: {config}");
    let manifest = render_dataset(&scene, &views, &channels, &settings, out, config)?;
    log::info!("wrote {} views to {}", manifest.views.len(), out.display());
    Ok(())
}

pub fn render(a: RenderArgs) -> CliResult {
    let desc = SceneDescription::load(&a.scene)?;
    let views = desc.views()?;
    if views.is_empty() {
        return Err(input(format!(
            "{}: scene defines no cameras and no orbit",
            a.scene.display()
        )));
    }
    render_views(
        "render",
        &desc,
        &a.scene,
        views,
        &a.channels,
        &a.samples,
        &a.out,
        Value::Null,
    )
}

pub fn orbit(a: OrbitArgs) -> CliResult {
    let desc = SceneDescription::load(&a.scene)?;
    let base = desc.orbit.clone().unwrap_or_default();
    let params = OrbitParams {
        azimuths: a.azimuths,
        elevations: a.elevations.clone(),
        radius: a.radius.unwrap_or(base.radius),
        fov_deg: a.fov.unwrap_or(base.fov_deg),
        resolution: a.resolution.unwrap_or(base.resolution),
    };
    let views = params.views()?;
    let extra = serde_json::to_value(&params).map_err(|e| CliError::Internal(e.to_string()))?;
    render_views(
        "orbit",
        &desc,
        &a.scene,
        views,
        &a.channels,
        &a.samples,
        &a.out,
        extra,
    )
}

fn parse_tex_size(s: &str) -> CliResult<(usize, usize)> {
    let bad = || input(format!("texture size must look like 16x8, got {s:?}"));
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let w: usize = w.trim().parse().map_err(|_| bad())?;
    let h: usize = h.trim().parse().map_err(|_| bad())?;
    if w == 0 || h == 0 {
        return Err(bad());
    }
    Ok((w, h))
}

fn read_texture_dir(dir: &Path) -> CliResult<MaterialTexture> {
    let read = |name: &str| ChannelImage::read(&dir.join(format!("{name}.pbrf")));
    Ok(MaterialTexture::new(
        read("albedo")?,
        read("metallic")?,
        read("roughness")?,
    )?)
}

pub fn recover(a: RecoverArgs) -> CliResult {
    let desc = SceneDescription::load(&a.scene)?;
    let scene = desc.build()?;
    let tex_size = match &a.tex_size {
        Some(s) => parse_tex_size(s)?,
        None => (scene.textures.width(), scene.textures.height()),
    };
    let (manifest, frames) = load_dataset(&a.obs)?;
    let mut observations = Vec::with_capacity(frames.len());
    for (v, f) in manifest.views.iter().zip(frames) {
        let rgb = f
            .get(RenderChannel::Rgb)
            .ok_or_else(|| {
                input(format!(
                    "{}: view {} has no rgb image",
                    a.obs.display(),
                    v.index
                ))
            })?
            .clone();
        observations.push(Observation {
            view: f.view,
            rgb,
            specular: f.get(RenderChannel::SpecularLight).cloned(),
        });
    }
    let options = ProblemOptions {
        env_samples: a.env_samples,
        seed: a.seed.unwrap_or(desc.seed),
        shadows: desc.shadows,
    };
    let cfg = RecoverConfig {
        steps: a.steps,
        step_size: a.step_size,
        lambda_spec: a.lambda_spec,
        ..RecoverConfig::default()
    };
    if !(cfg.lambda_spec >= 0.0) {
        return Err(input("--lambda-spec must be non-negative"));
    }
    let mut problem = InverseProblem::new(&scene, &observations, tex_size, options)?;
    if cfg.lambda_spec > 0.0 && !problem.has_specular_targets() {
        log::warn!("observations carry no speclight channel; the specular term is inactive");
    }
    if let Some(dir) = &a.gt {
        problem = problem.with_ground_truth(read_texture_dir(dir)?)?;
    } else if a.gt_scene {
        problem = problem.with_ground_truth(scene.textures.clone())?;
    }
    let config = json!({
        "command": "recover",
        "scene_path": a.scene,
        "scene": desc,
        "obs": a.obs,
        "texture_size": [tex_size.0, tex_size.1],
        "problem": options,
        "optimizer": cfg,
        "gt": a.gt,
        "gt_scene": a.gt_scene,
    });
    log::info!("config: {config}");
    let r = recover_materials(&problem, &cfg)?;
    log::info!(
        "loss {:.6e} -> {:.6e} (best step {})",
        r.report.initial_loss,
        r.report.final_loss,
        r.report.best_step
    );
    create_dir(&a.out)?;
    r.texture.albedo.write(&a.out.join("albedo.pbrf"))?;
    r.texture.metallic.write(&a.out.join("metallic.pbrf"))?;
    r.texture.roughness.write(&a.out.join("roughness.pbrf"))?;
    renderer::pack_mro(&r.texture.metallic, &r.texture.roughness)?
        .write(&a.out.join("mro.pbrf"))?;
    let mut report =
        serde_json::to_value(&r.report).map_err(|e| CliError::Internal(e.to_string()))?;
    report["config"] = config;
    write_json(&a.out.join("report.json"), &report)
}

pub fn eval_pbr(a: EvalPbrArgs) -> CliResult {
    let (pm, pred) = load_dataset(&a.pred)?;
    let (_, gt) = load_dataset(&a.gt)?;
    let report = EvalReport {
        object_id: a.object_id,
        seed: pm.seed,
        channels: evaluate_frames(&pred, &gt)?,
        geometry: None,
    };
    write_json(&a.out, &report)
}

pub fn eval_geom(a: EvalGeomArgs) -> CliResult {
    if a.taus.iter().any(|t| !(*t >= 0.0)) {
        return Err(input("--taus must be non-negative"));
    }
    let pred = TriangleMesh::load_obj(&a.pred)?;
    let gt = TriangleMesh::load_obj(&a.gt)?;
    let (scores, alignment) = evaluate_geometry(&pred, &gt, a.samples, &a.taus, a.seed)?;
    log::info!(
        "cd {:.6} after {} alignment iterations",
        scores.cd,
        alignment.iterations
    );
    let report = EvalReport {
        object_id: a.object_id,
        seed: a.seed,
        channels: Default::default(),
        geometry: Some(scores),
    };
    let mut value = serde_json::to_value(&report).map_err(|e| CliError::Internal(e.to_string()))?;
    value["alignment"] =
        serde_json::to_value(alignment).map_err(|e| CliError::Internal(e.to_string()))?;
    write_json(&a.out, &value)
}

pub fn extract(a: ExtractArgs) -> CliResult {
    let grid = SdfGrid::read(&a.sdf)?;
    let mesh = marching_cubes(&grid, a.iso);
    if mesh.triangle_count() == 0 {
        let (lo, hi) = grid.value_range();
        log::warn!(
            "iso {} outside the grid's value range [{lo}, {hi}]; the mesh is empty",
            a.iso
        );
    }
    log::info!("extracted {} triangles", mesh.triangle_count());
    mesh.save_obj(&a.out)?;
    Ok(())
}

pub fn pack_mro(a: PackMroArgs) -> CliResult {
    let m = ChannelImage::read(&a.metallic)?;
    let r = ChannelImage::read(&a.roughness)?;
    renderer::pack_mro(&m, &r)?.write(&a.out)?;
    Ok(())
}

pub fn unpack_mro(a: UnpackMroArgs) -> CliResult {
    let (m, r) = renderer::unpack_mro(&ChannelImage::read(&a.mro)?)?;
    m.write(&a.metallic)?;
    r.write(&a.roughness)?;
    Ok(())
}

pub fn sdf(a: SdfArgs) -> CliResult {
    let grid = match (a.sphere, a.cube, &a.shape, &a.mesh) {
        (Some(r), None, None, None) => sdf_analytic(&SdfShape::sphere(r), a.resolution, a.extent)?,
        (None, Some(h), None, None) => sdf_analytic(&SdfShape::cube(h), a.resolution, a.extent)?,
        (None, None, Some(p), None) => {
            let shape: SdfShape = serde_json::from_str(&fsutil::read_string(p)?)
                .map_err(|e| input(format!("{}: {e}", p.display())))?;
            sdf_analytic(&shape, a.resolution, a.extent)?
        }
        (None, None, None, Some(p)) => sdf_from_mesh(&TriangleMesh::load_obj(p)?, a.resolution)?,
        _ => {
            return Err(input(
                "give exactly one of --sphere, --cube, --shape or --mesh",
            ))
        }
    };
    grid.write(&a.out)?;
    Ok(())
}

pub fn convert_hdr(a: ConvertHdrArgs) -> CliResult {
    let env = pbrforge_core::lighting::convert_radiance_hdr(&a.input, &a.out)?;
    log::info!(
        "wrote {}x{} environment map",
        env.image().width(),
        env.image().height()
    );
    Ok(())
}
