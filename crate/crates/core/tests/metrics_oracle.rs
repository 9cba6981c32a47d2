use pbrforge_core::metrics::{
    align_meshes, chamfer_distance, evaluate_geometry, f_score, geometry_scores, sample_surface,
    AlignOptions, PointCloud, Similarity, DEFAULT_TAUS,
};
use pbrforge_core::scene::{primitive_cube, primitive_quad, primitive_sphere};
use pbrforge_core::Vec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn brute_nearest(query: &[Vec3], reference: &[Vec3]) -> Vec<f64> {
    query
        .iter()
        .map(|q| {
            let mut best = f64::INFINITY;
            for r in reference {
                let d = (*q - *r).length_squared();
                if d < best {
                    best = d;
                }
            }
            best.sqrt()
        })
        .collect()
}

fn brute_cd(p: &[Vec3], q: &[Vec3]) -> f64 {
    let a = brute_nearest(p, q);
    let b = brute_nearest(q, p);
    0.5 * (a.iter().sum::<f64>() / a.len() as f64) + 0.5 * (b.iter().sum::<f64>() / b.len() as f64)
}

fn brute_fs(p: &[Vec3], q: &[Vec3], tau: f64) -> f64 {
    let a = brute_nearest(p, q);
    let b = brute_nearest(q, p);
    let pr = a.iter().filter(|&&d| d <= tau).count() as f64 / a.len() as f64;
    let rc = b.iter().filter(|&&d| d <= tau).count() as f64 / b.len() as f64;
    if pr + rc == 0.0 {
        0.0
    } else {
        2.0 * pr * rc / (pr + rc)
    }
}

fn random_cloud(rng: &mut ChaCha8Rng, n: usize, spread: f64) -> Vec<Vec3> {
    let c = Vec3::new(
        rng.gen_range(-0.2..0.2),
        rng.gen_range(-0.2..0.2),
        rng.gen_range(-0.2..0.2),
    );
    (0..n)
        .map(|_| {
            c + Vec3::new(
                rng.gen_range(-spread..spread),
                rng.gen_range(-spread..spread),
                rng.gen_range(-spread..spread),
            )
        })
        .collect()
}

#[test]
fn accelerated_metrics_equal_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(600);
    for _ in 0..100 {
        let p = random_cloud(&mut rng, 500, 0.5);
        let q = random_cloud(&mut rng, 500, 0.5);
        let (pc, qc) = (PointCloud::new(p.clone()), PointCloud::new(q.clone()));
        assert_eq!(chamfer_distance(&pc, &qc).unwrap(), brute_cd(&p, &q));
        let scores = geometry_scores(&pc, &qc, &DEFAULT_TAUS).unwrap();
        assert_eq!(scores.cd, brute_cd(&p, &q));
        for tau in DEFAULT_TAUS {
            assert_eq!(f_score(&pc, &qc, tau).unwrap(), brute_fs(&p, &q, tau));
            assert_eq!(scores.fscore[&format!("{tau}")], brute_fs(&p, &q, tau));
        }
    }
}

#[test]
fn chamfer_is_symmetric_and_f_score_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let p = PointCloud::new(random_cloud(&mut rng, 300, 0.4));
    let q = PointCloud::new(random_cloud(&mut rng, 200, 0.6));
    assert_eq!(
        chamfer_distance(&p, &q).unwrap(),
        chamfer_distance(&q, &p).unwrap()
    );
    let mut last = 0.0;
    for k in 0..40 {
        let f = f_score(&p, &q, k as f64 * 0.01).unwrap();
        assert!(f >= last);
        last = f;
    }
}

#[test]
fn surface_samples_are_uniform() {
    // Chi-squared over a 10x10 grid on the unit square; 99 degrees of
    // freedom, 1% critical value 134.642.
    let quad = primitive_quad(1.0);
    let pc = sample_surface(&quad, 10_000, 42).unwrap();
    let mut counts = [0usize; 100];
    for p in &pc.points {
        let x = (((p.x + 0.5) * 10.0) as usize).min(9);
        let z = (((p.z + 0.5) * 10.0) as usize).min(9);
        counts[z * 10 + x] += 1;
    }
    let expected = 100.0;
    let chi2: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    assert!(chi2 < 134.642, "chi2 = {chi2}");
}

#[test]
fn samples_lie_on_the_sphere_mesh_triangles() {
    let m = primitive_sphere(6);
    let pc = sample_surface(&m, 2000, 3).unwrap();
    for p in &pc.points {
        let d = (0..m.triangle_count())
            .map(|i| {
                let [a, b, c] = m.triangle(i);
                let q = pbrforge_core::meshing::closest_point_on_triangle(*p, a, b, c);
                (q - *p).length()
            })
            .fold(f64::INFINITY, f64::min);
        assert!(d < 1e-6);
    }
}

#[test]
fn identical_meshes_score_perfectly() {
    for mesh in [primitive_sphere(16), primitive_cube()] {
        let (g, a) = evaluate_geometry(&mesh, &mesh, 4000, &DEFAULT_TAUS, 1).unwrap();
        assert_eq!(g.cd, 0.0);
        for tau in ["0.1", "0.2", "0.5"] {
            assert_eq!(g.fscore[tau], 1.0);
        }
        assert!(a.cd_after <= a.cd_before);
    }
}

#[test]
fn alignment_never_worsens_chamfer() {
    let gt = primitive_sphere(16);
    let stretched = gt.transformed(
        |p| Vec3::new(p.x * 1.3, p.y, p.z * 0.8) + Vec3::new(2.0, 0.0, 0.0),
        |n| n,
    );
    let a = align_meshes(&stretched, &gt, &AlignOptions::default()).unwrap();
    assert!(a.cd_after <= a.cd_before);
    let s = Similarity::new(
        0.5,
        Similarity::rotation_about(Vec3::Y, 0.2),
        Vec3::new(0.0, 3.0, 0.0),
    );
    let moved = s.apply_mesh(&primitive_cube());
    let a = align_meshes(&moved, &primitive_cube(), &AlignOptions::default()).unwrap();
    assert!(a.cd_after <= a.cd_before);
}
