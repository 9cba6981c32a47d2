use pbrforge_core::brdf::{
    brdf_grad, diffuse_eval, specular_eval, LobeGrad, MaterialSample, ShadingGeometry,
};
use pbrforge_core::{Rgb, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;
const REL_TOL: f64 = 1e-3;
const PROBES: usize = 1500;

fn upper(rng: &mut ChaCha8Rng, n: Vec3, min_cos: f64) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let l = v.length();
        if l > 1e-3 && l <= 1.0 {
            let w = v / l;
            if w.dot(n) > min_cos {
                return w;
            }
        }
    }
}

fn material(rng: &mut ChaCha8Rng) -> MaterialSample {
    MaterialSample::new(
        Rgb::new(
            rng.gen_range(0.02..0.98),
            rng.gen_range(0.02..0.98),
            rng.gen_range(0.02..0.98),
        ),
        rng.gen_range(0.02..0.98),
        rng.gen_range(0.08..0.98),
    )
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn check_lobe(
    name: &str,
    g: &LobeGrad,
    geom: &ShadingGeometry,
    m: &MaterialSample,
    eval: fn(&ShadingGeometry, &MaterialSample) -> Rgb,
) -> f64 {
    let fd = |perturb: &dyn Fn(&mut MaterialSample, f64)| {
        let mut p = *m;
        let mut q = *m;
        perturb(&mut p, H);
        perturb(&mut q, -H);
        (eval(geom, &p) - eval(geom, &q)) * (1.0 / (2.0 * H))
    };
    let mut worst: f64 = 0.0;
    for c in 0..3 {
        let d = fd(&|mm: &mut MaterialSample, h| match c {
            0 => mm.albedo.r += h,
            1 => mm.albedo.g += h,
            _ => mm.albedo.b += h,
        });
        worst = worst.max(rel_err(g.d_albedo[c], d[c]));
    }
    let dm = fd(&|mm: &mut MaterialSample, h| mm.metallic += h);
    let dr = fd(&|mm: &mut MaterialSample, h| mm.roughness += h);
    for c in 0..3 {
        let e = rel_err(g.d_metallic[c], dm[c]).max(rel_err(g.d_roughness[c], dr[c]));
        assert!(
            e < REL_TOL,
            "{name}: channel {c} metallic {} vs {}, roughness {} vs {}",
            g.d_metallic[c],
            dm[c],
            g.d_roughness[c],
            dr[c]
        );
        worst = worst.max(e);
    }
    let v = eval(geom, m);
    for c in 0..3 {
        assert!(
            (g.value[c] - v[c]).abs() <= 1e-12 * v[c].abs().max(1.0),
            "{name}: value mismatch"
        );
    }
    worst
}

#[test]
fn analytic_derivatives_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xB5DF);
    let mut worst: f64 = 0.0;
    for _ in 0..PROBES {
        let n = upper(&mut rng, Vec3::Y, -2.0);
        let geom = ShadingGeometry::new(n, upper(&mut rng, n, 0.05), upper(&mut rng, n, 0.05));
        let m = material(&mut rng);
        let g = brdf_grad(&geom, &m);
        worst = worst.max(check_lobe("diffuse", &g.diffuse, &geom, &m, diffuse_eval));
        worst = worst.max(check_lobe(
            "specular",
            &g.specular,
            &geom,
            &m,
            specular_eval,
        ));
    }
    assert!(worst < REL_TOL, "worst relative error {worst}");
}

#[test]
fn gradient_vanishes_below_the_hemisphere() {
    let n = Vec3::Y;
    let geom = ShadingGeometry::new(n, Vec3::new(0.0, -1.0, 0.0), Vec3::new(0.6, 0.8, 0.0));
    let g = brdf_grad(&geom, &MaterialSample::new(Rgb::gray(0.5), 0.5, 0.5));
    assert_eq!(g.total(), LobeGrad::default());
}
