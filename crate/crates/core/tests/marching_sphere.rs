use pbrforge_core::meshing::{
    closest_point_on_triangle, marching_cubes, mesh_is_closed, sdf_analytic, sdf_from_mesh,
    SdfShape,
};
use pbrforge_core::scene::primitive_sphere;
use pbrforge_core::{TriangleMesh, Vec3};

/// Two-sided Hausdorff distance between a closed mesh that is star-shaped
/// about the origin and the sphere of radius `r`. Distances to a sphere are
/// radial, so the mesh-to-sphere side is the larger of the vertex radii
/// excess and the deepest dip of any triangle toward the origin; the
/// sphere-to-mesh side never exceeds it.
fn sphere_hausdorff(m: &TriangleMesh, r: f64) -> f64 {
    let mut h: f64 = 0.0;
    for p in &m.positions {
        h = h.max((p.length() - r).abs());
    }
    for i in 0..m.triangle_count() {
        let [a, b, c] = m.triangle(i);
        h = h.max(r - closest_point_on_triangle(Vec3::ZERO, a, b, c).length());
    }
    h
}

#[test]
fn analytic_sphere_surface_distance_and_area() {
    let g = sdf_analytic(&SdfShape::sphere(1.0), 128, 1.5).unwrap();
    let m = marching_cubes(&g, 0.0);
    assert!(mesh_is_closed(&m));
    let cell = g.spacing().x;
    let h = sphere_hausdorff(&m, 1.0);
    assert!(h < 2.0 * cell, "{h} vs cell {cell}");
    let area = m.surface_area();
    let exact = 4.0 * std::f64::consts::PI;
    assert!((area - exact).abs() < 0.02 * exact);
}

#[test]
fn error_shrinks_quadratically_with_resolution() {
    // Linear edge interpolation of a smooth field places vertices within
    // O(h^2) of the surface, and flat triangles sag by O(h^2) as well.
    let errors: Vec<f64> = [32, 64, 128]
        .iter()
        .map(|&res| {
            sphere_hausdorff(
                &marching_cubes(
                    &sdf_analytic(&SdfShape::sphere(1.0), res, 1.5).unwrap(),
                    0.0,
                ),
                1.0,
            )
        })
        .collect();
    for w in errors.windows(2) {
        let ratio = w[1] / w[0];
        assert!((0.2..0.3).contains(&ratio), "ratio {ratio} from {errors:?}");
    }
}

#[test]
fn mesh_sdf_round_trip() {
    let sphere = primitive_sphere(24);
    let g = sdf_from_mesh(&sphere, 48).unwrap();
    let m = marching_cubes(&g, 0.0);
    assert!(mesh_is_closed(&m));
    let cell = g.spacing().x;
    // The tessellated sphere is itself within its chord sag of radius 1.
    assert!(sphere_hausdorff(&m, 1.0) < 2.0 * cell);
}
