use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use pbrforge_core::brdf::brdf_grad;
use pbrforge_core::inverse::{
    loss_grad, render_observations, InverseProblem, LatentTexture, ProblemOptions,
};
use pbrforge_core::math::normalize;
use pbrforge_core::meshing::{marching_cubes, sdf_analytic, SdfShape};
use pbrforge_core::metrics::{chamfer_distance, sample_surface};
use pbrforge_core::renderer::{render_frame, RenderChannel, RenderSettings};
use pbrforge_core::scene::{generate_orbit, primitive_sphere, SampleCounts};
use pbrforge_core::{
    DirectionalLight, EnvironmentMap, LightSet, MaterialSample, MaterialTexture, Rgb, Scene,
    ShadingGeometry, Vec3,
};

fn lights() -> LightSet {
    LightSet {
        environment: Some(EnvironmentMap::constant(Rgb::gray(0.3), 16)),
        directional: vec![DirectionalLight::new(Vec3::new(0.3, 1.0, 0.6), Rgb::gray(2.5)).unwrap()],
        ..LightSet::default()
    }
}

fn scene() -> Scene {
    let m = MaterialSample::new(Rgb::new(0.7, 0.5, 0.3), 0.3, 0.4);
    Scene::new(
        primitive_sphere(32),
        MaterialTexture::constant(16, 8, &m),
        lights(),
    )
}

fn bench_brdf(c: &mut Criterion) {
    let geom = ShadingGeometry::new(
        Vec3::Y,
        normalize(Vec3::new(0.3, 0.8, 0.2)).unwrap(),
        normalize(Vec3::new(-0.4, 0.7, 0.1)).unwrap(),
    );
    let m = MaterialSample::new(Rgb::new(0.7, 0.5, 0.3), 0.3, 0.4);
    c.bench_function("brdf_grad", |b| {
        b.iter(|| brdf_grad(black_box(&geom), black_box(&m)))
    });
}

fn bench_render(c: &mut Criterion) {
    let scene = scene();
    let view = generate_orbit(1, &[20.0], 2.8, 0.7, 64).unwrap()[0];
    let settings = RenderSettings {
        seed: 1,
        samples: SampleCounts {
            rgb: 16,
            specular: 16,
        },
    };
    c.bench_function("render_rgb_64px_16spp", |b| {
        b.iter(|| render_frame(&scene, &view, &[RenderChannel::Rgb], &settings).unwrap())
    });
}

fn bench_loss_grad(c: &mut Criterion) {
    let scene = scene();
    let views = generate_orbit(4, &[20.0], 2.8, 0.7, 64).unwrap();
    let obs = render_observations(
        &scene,
        &views,
        1,
        SampleCounts {
            rgb: 16,
            specular: 16,
        },
        true,
    )
    .unwrap();
    let problem = InverseProblem::new(
        &scene,
        &obs,
        (16, 8),
        ProblemOptions {
            env_samples: 8,
            ..Default::default()
        },
    )
    .unwrap();
    let latent = LatentTexture::constant(16, 8, 0.0);
    c.bench_function("loss_grad_4x64px", |b| {
        b.iter(|| loss_grad(&problem, &latent, 0.1).unwrap())
    });
}

fn bench_chamfer(c: &mut Criterion) {
    let a = sample_surface(&primitive_sphere(24), 10_000, 1).unwrap();
    let b_cloud = sample_surface(&primitive_sphere(16), 10_000, 2).unwrap();
    c.bench_function("chamfer_10k", |b| {
        b.iter(|| chamfer_distance(&a, &b_cloud).unwrap())
    });
}

fn bench_marching(c: &mut Criterion) {
    let grid = sdf_analytic(&SdfShape::sphere(1.0), 64, 1.5).unwrap();
    c.bench_function("marching_cubes_64", |b| {
        b.iter(|| marching_cubes(&grid, 0.0))
    });
}

criterion_group! {
    name = kernels;
    config = Criterion::default().sample_size(10);
    targets = bench_brdf, bench_render, bench_loss_grad, bench_chamfer, bench_marching
}
criterion_main!(kernels);
