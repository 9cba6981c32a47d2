#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

use commands::CliError;

#[derive(Debug, Parser)]
#[command(name = "pbrforge", version, about = "Forward and inverse PBR toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render the scene's cameras (and orbit, if any) into a dataset.
    Render(RenderArgs),
    /// Render an orbit of cameras around the origin.
    Orbit(OrbitArgs),
    /// Recover material textures from an observed dataset.
    Recover(RecoverArgs),
    /// Score predicted images against ground truth, masked by the GT mask.
    EvalPbr(EvalPbrArgs),
    /// Align two meshes and report Chamfer distance and F-scores.
    EvalGeom(EvalGeomArgs),
    /// Extract an isosurface from a `.pbrs` grid as OBJ.
    Extract(ExtractArgs),
    /// Pack metallic and roughness images into one MRO image.
    PackMro(PackMroArgs),
    /// Split an MRO image into metallic and roughness images.
    UnpackMro(UnpackMroArgs),
    /// Sample a signed distance grid from an analytic shape or a mesh.
    Sdf(SdfArgs),
    /// Convert a Radiance `.hdr` lat-long map to `.pbrf`.
    ConvertHdr(ConvertHdrArgs),
}

#[derive(Debug, Args)]
struct SampleArgs {
    /// Seed of all sampler streams (defaults to the scene's seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Environment samples per pixel for RGB.
    #[arg(long)]
    rgb_samples: Option<usize>,
    /// Environment samples per pixel for the specular-light channel.
    #[arg(long)]
    spec_samples: Option<usize>,
}

#[derive(Debug, Args)]
struct RenderArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long, default_value = "rgb,albedo,mro,speclight,mask")]
    channels: String,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    samples: SampleArgs,
}

#[derive(Debug, Args)]
struct OrbitArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long, default_value_t = 7)]
    azimuths: usize,
    /// Ring elevations in degrees.
    #[arg(
        long,
        value_delimiter = ',',
        allow_negative_numbers = true,
        default_value = "30,0,-30"
    )]
    elevations: Vec<f64>,
    #[arg(long)]
    radius: Option<f64>,
    /// Vertical field of view in degrees.
    #[arg(long)]
    fov: Option<f64>,
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long, default_value = "rgb,albedo,mro,speclight,mask")]
    channels: String,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    samples: SampleArgs,
}

#[derive(Debug, Args)]
struct RecoverArgs {
    #[arg(long)]
    scene: PathBuf,
    /// Manifest of the observed dataset; needs the rgb channel.
    #[arg(long)]
    obs: PathBuf,
    #[arg(long, default_value_t = 500)]
    steps: usize,
    #[arg(long, default_value_t = 0.1)]
    lambda_spec: f64,
    #[arg(long, default_value_t = 5e-2)]
    step_size: f64,
    /// Texture size as WxH (defaults to the scene's texture size).
    #[arg(long)]
    tex_size: Option<String>,
    /// Frozen environment directions per pixel.
    #[arg(long, default_value_t = 32)]
    env_samples: usize,
    /// Seed of the frozen environment directions (defaults to the scene's seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Directory with albedo/metallic/roughness `.pbrf` reference textures.
    #[arg(long, conflicts_with = "gt_scene")]
    gt: Option<PathBuf>,
    /// Use the scene's own materials as the reference for error reports.
    #[arg(long)]
    gt_scene: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalPbrArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    object_id: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalGeomArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.5")]
    taus: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    object_id: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ExtractArgs {
    #[arg(long)]
    sdf: PathBuf,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    iso: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PackMroArgs {
    #[arg(long)]
    metallic: PathBuf,
    #[arg(long)]
    roughness: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct UnpackMroArgs {
    #[arg(long)]
    mro: PathBuf,
    #[arg(long)]
    metallic: PathBuf,
    #[arg(long)]
    roughness: PathBuf,
}

#[derive(Debug, Args)]
struct SdfArgs {
    /// Sphere radius.
    #[arg(long, group = "source")]
    sphere: Option<f64>,
    /// Cube half extent.
    #[arg(long, group = "source")]
    cube: Option<f64>,
    /// JSON shape description, e.g. {"type": "sphere", "radius": 1}.
    #[arg(long, group = "source")]
    shape: Option<PathBuf>,
    /// OBJ mesh to voxelize; its bounds set the grid extent.
    #[arg(long, group = "source")]
    mesh: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    resolution: usize,
    /// Half width of the sampled cube for analytic shapes.
    #[arg(long, default_value_t = 1.5)]
    extent: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ConvertHdrArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("PBRFORGE_THREADS") else {
        return Ok(());
    };
    let n: usize = value.trim().parse().map_err(|_| {
        CliError::Input(format!(
            "PBRFORGE_THREADS must be a non-negative integer, got {value:?}"
        ))
    })?;
    // Zero keeps rayon's default of one thread per logical core.
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Internal(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Render(a) => commands::render(a),
        Command::Orbit(a) => commands::orbit(a),
        Command::Recover(a) => commands::recover(a),
        Command::EvalPbr(a) => commands::eval_pbr(a),
        Command::EvalGeom(a) => commands::eval_geom(a),
        Command::Extract(a) => commands::extract(a),
        Command::PackMro(a) => commands::pack_mro(a),
        Command::UnpackMro(a) => commands::unpack_mro(a),
        Command::Sdf(a) => commands::sdf(a),
        Command::ConvertHdr(a) => commands::convert_hdr(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
        Err(_) => ExitCode::from(2),
    }
}
