use std::collections::HashMap;

use rayon::prelude::*;

use crate::math::{normalize, Vec3};
use crate::scene::TriangleMesh;

use super::tables::{EDGE_TABLE, TRI_TABLE};
use super::SdfGrid;

/// Corner offsets in table order.
const CORNERS: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [1, 1, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [1, 1, 1],
    [0, 1, 1],
];

/// Corner pairs joined by each cube edge.
const EDGES: [[usize; 2]; 12] = [
    [0, 1],
    [1, 2],
    [3, 2],
    [0, 3],
    [4, 5],
    [5, 6],
    [7, 6],
    [4, 7],
    [0, 4],
    [1, 5],
    [2, 6],
    [3, 7],
];

/// Triangles of one z-slab of cells as triples of global edge keys.
struct Slab {
    tris: Vec<[u64; 3]>,
}

/// Global id of the grid edge leaving sample `(x, y, z)` along `axis`.
fn edge_id(grid: &SdfGrid, x: usize, y: usize, z: usize, axis: usize) -> u64 {
    grid.index(x, y, z) as u64 * 3 + axis as u64
}

/// Position and interpolation parameter of the crossing on an edge, always
/// interpolated from the lower endpoint so neighbouring cells agree bit for bit.
fn edge_crossing(grid: &SdfGrid, key: u64, iso: f64) -> (Vec3, f64, usize, usize) {
    let axis = (key % 3) as usize;
    let lo = (key / 3) as usize;
    let (x, y, z) = grid.coords(lo);
    let mut c = [x, y, z];
    c[axis] += 1;
    let hi = grid.index(c[0], c[1], c[2]);
    let (v0, v1) = (grid.values()[lo] as f64, grid.values()[hi] as f64);
    let t = if v1 != v0 {
        ((iso - v0) / (v1 - v0)).clamp(0.0, 1.0)
    } else {
        0.5
    };
    let p0 = grid.point(x, y, z);
    let p1 = grid.point(c[0], c[1], c[2]);
    (p0 + (p1 - p0) * t, t, lo, hi)
}

/// Central-difference gradient at a grid sample, one-sided on the border.
fn sample_gradient(grid: &SdfGrid, i: usize) -> Vec3 {
    let (x, y, z) = grid.coords(i);
    let d = grid.dims();
    let s = grid.spacing();
    let c = [x, y, z];
    let mut g = [0.0; 3];
    for a in 0..3 {
        let mut lo = c;
        let mut hi = c;
        if c[a] > 0 {
            lo[a] -= 1;
        }
        if c[a] + 1 < d[a] {
            hi[a] += 1;
        }
        let span = (hi[a] - lo[a]) as f64 * s[a];
        g[a] = (grid.value(hi[0], hi[1], hi[2]) - grid.value(lo[0], lo[1], lo[2])) / span;
    }
    Vec3::new(g[0], g[1], g[2])
}

fn polygonize_slab(grid: &SdfGrid, z: usize, iso: f64) -> Slab {
    let [nx, ny, _] = grid.dims();
    let mut tris = Vec::new();
    for y in 0..ny - 1 {
        for x in 0..nx - 1 {
            let mut case = 0usize;
            for (k, o) in CORNERS.iter().enumerate() {
                if grid.value(x + o[0], y + o[1], z + o[2]) < iso {
                    case |= 1 << k;
                }
            }
            if EDGE_TABLE[case] == 0 {
                continue;
            }
            let key = |e: i8| -> u64 {
                let [a, b] = EDGES[e as usize];
                let (ca, cb) = (CORNERS[a], CORNERS[b]);
                let axis = (0..3)
                    .find(|&i| ca[i] != cb[i])
                    .expect("edge spans one axis");
                edge_id(grid, x + ca[0], y + ca[1], z + ca[2], axis)
            };
            for t in TRI_TABLE[case].chunks_exact(3) {
                if t[0] < 0 {
                    break;
                }
                tris.push([key(t[0]), key(t[1]), key(t[2])]);
            }
        }
    }
    Slab { tris }
}

/// Extracts the `iso` level set of `grid` with the 256-case lookup table.
///
/// Vertices are shared between cells through edge-keyed deduplication,
/// triangles face along the field gradient (outward for negative-inside
/// distances) and zero-area triangles are dropped. An `iso` outside the
/// sampled value range yields an empty mesh.
pub fn marching_cubes(grid: &SdfGrid, iso: f64) -> TriangleMesh {
    let empty =
        || TriangleMesh::new(Vec::new(), Vec::new(), Vec::new(), Vec::new()).expect("empty");
    let (lo, hi) = grid.value_range();
    if !(iso >= lo && iso <= hi) || lo == hi {
        log::warn!("iso value {iso} is outside the grid range [{lo}, {hi}]; no surface extracted");
        return empty();
    }
    let nz = grid.dims()[2];
    let slabs: Vec<Slab> = (0..nz - 1)
        .into_par_iter()
        .map(|z| polygonize_slab(grid, z, iso))
        .collect();

    let mut ids: HashMap<u64, u32> = HashMap::new();
    let mut positions = Vec::new();
    let mut normals = Vec::new();
    let mut indices = Vec::new();
    for slab in &slabs {
        for tri in &slab.tris {
            let v = tri.map(|k| {
                *ids.entry(k).or_insert_with(|| {
                    let (p, t, a, b) = edge_crossing(grid, k, iso);
                    let g = sample_gradient(grid, a) * (1.0 - t) + sample_gradient(grid, b) * t;
                    positions.push(p);
                    normals.push(g);
                    (positions.len() - 1) as u32
                })
            });
            if v[0] == v[1] || v[1] == v[2] || v[0] == v[2] {
                continue;
            }
            let [p0, p1, p2] = v.map(|i| positions[i as usize]);
            let cross = (p1 - p0).cross(p2 - p0);
            let scale = (p1 - p0).length_squared().max((p2 - p0).length_squared());
            if cross.length_squared() <= 1e-24 * scale * scale || scale == 0.0 {
                continue;
            }
            let g = normals[v[0] as usize] + normals[v[1] as usize] + normals[v[2] as usize];
            if cross.dot(g) < 0.0 {
                indices.push([v[0], v[2], v[1]]);
            } else {
                indices.push(v);
            }
        }
    }
    let n = positions.len();
    let mut mesh =
        TriangleMesh::new(positions, normals, vec![[0.0; 2]; n], Vec::new()).expect("valid");
    mesh.indices = indices;
    let fallback = mesh.area_weighted_normals();
    for (nrm, raw) in mesh.normals.iter_mut().zip(fallback) {
        if normalize(*nrm).is_err() {
            *nrm = raw;
        }
    }
    mesh
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meshing::{sdf_analytic, SdfShape};

    #[test]
    fn edges_match_corner_layout() {
        for [a, b] in EDGES {
            let diff: usize = (0..3).map(|i| CORNERS[a][i].abs_diff(CORNERS[b][i])).sum();
            assert_eq!(diff, 1);
            assert!((0..3).all(|i| CORNERS[a][i] <= CORNERS[b][i]));
        }
    }

    #[test]
    fn every_case_uses_crossing_edges() {
        for case in 0..256 {
            let row = TRI_TABLE[case];
            let k = row.iter().position(|&v| v < 0).unwrap();
            assert_eq!(k % 3, 0);
            for &e in &row[..k] {
                let [a, b] = EDGES[e as usize];
                let inside = |c: usize| case >> c & 1 == 1;
                assert_ne!(inside(a), inside(b), "case {case} edge {e}");
                assert!(EDGE_TABLE[case] >> e & 1 == 1);
            }
        }
    }

    #[test]
    fn vertices_lie_on_isosurface() {
        let g = sdf_analytic(&SdfShape::sphere(0.7), 24, 1.0).unwrap();
        let m = marching_cubes(&g, 0.0);
        assert!(!m.is_empty());
        for p in &m.positions {
            assert!(g.sample(*p).abs() < 1e-6);
        }
    }

    #[test]
    fn outward_orientation_on_convex_shapes() {
        for shape in [SdfShape::sphere(0.8), SdfShape::cube(0.55)] {
            let g = sdf_analytic(&shape, 33, 1.0).unwrap();
            let m = marching_cubes(&g, 0.0);
            for i in 0..m.triangle_count() {
                let [a, b, c] = m.triangle(i);
                let centroid = (a + b + c) / 3.0;
                assert!(
                    m.face_cross(i).dot(centroid) > 0.0,
                    "triangle {i} of {shape:?}"
                );
                assert!(m.triangle_area(i) > 0.0);
            }
        }
    }

    #[test]
    fn closed_output_for_interior_shapes() {
        let g = sdf_analytic(&SdfShape::sphere(0.6), 20, 1.0).unwrap();
        let m = marching_cubes(&g, 0.0);
        assert!(crate::meshing::mesh_is_closed(&m));
    }

    #[test]
    fn no_crossing_gives_empty_mesh() {
        let g = SdfGrid::new([2, 2, 2], Vec3::ZERO, Vec3::splat(1.0), vec![1.0; 8]).unwrap();
        assert!(marching_cubes(&g, 0.0).is_empty());
        let g = sdf_analytic(&SdfShape::sphere(0.5), 8, 1.0).unwrap();
        assert!(marching_cubes(&g, 50.0).is_empty());
    }

    #[test]
    fn deterministic_output() {
        let g = sdf_analytic(&SdfShape::sphere(0.9), 30, 1.0).unwrap();
        assert_eq!(marching_cubes(&g, 0.0), marching_cubes(&g, 0.0));
    }
}
