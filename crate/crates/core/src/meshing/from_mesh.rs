use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::math::{normalize, Vec3};
use crate::scene::TriangleMesh;

use super::SdfGrid;

/// Closest feature of a triangle to a query point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Feature {
    Vertex(usize),
    Edge(usize, usize),
    Face,
}

/// Closest point on triangle `abc` to `p` (Ericson, Real-Time Collision
/// Detection 5.1.5) with the feature it lies on.
fn closest_on_triangle(p: Vec3, a: Vec3, b: Vec3, c: Vec3) -> (Vec3, Feature) {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(ap);
    let d2 = ac.dot(ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (a, Feature::Vertex(0));
    }
    let bp = p - b;
    let d3 = ab.dot(bp);
    let d4 = ac.dot(bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (b, Feature::Vertex(1));
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (a + ab * v, Feature::Edge(0, 1));
    }
    let cp = p - c;
    let d5 = ab.dot(cp);
    let d6 = ac.dot(cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (c, Feature::Vertex(2));
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (a + ac * w, Feature::Edge(0, 2));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (b + (c - b) * w, Feature::Edge(1, 2));
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (a + ab * v + ac * w, Feature::Face)
}

/// Closest point on triangle `abc` to `p`.
pub fn closest_point_on_triangle(p: Vec3, a: Vec3, b: Vec3, c: Vec3) -> Vec3 {
    closest_on_triangle(p, a, b, c).0
}

fn weld_key(p: Vec3) -> [i64; 3] {
    let q = |v: f64| (v * 1e9).round() as i64;
    [q(p.x), q(p.y), q(p.z)]
}

/// Mesh with vertices welded by position plus angle-weighted pseudo-normals
/// for every face, edge and vertex.
struct Pseudonormals {
    tris: Vec<[usize; 3]>,
    positions: Vec<Vec3>,
    face: Vec<Vec3>,
    edge: HashMap<(usize, usize), Vec3>,
    vertex: Vec<Vec3>,
    edge_uses: HashMap<(usize, usize), usize>,
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

impl Pseudonormals {
    fn new(mesh: &TriangleMesh) -> Self {
        let mut ids: HashMap<[i64; 3], usize> = HashMap::new();
        let mut positions = Vec::new();
        let remap: Vec<usize> = mesh
            .positions
            .iter()
            .map(|p| {
                *ids.entry(weld_key(*p)).or_insert_with(|| {
                    positions.push(*p);
                    positions.len() - 1
                })
            })
            .collect();
        let mut tris = Vec::with_capacity(mesh.indices.len());
        let mut face = Vec::with_capacity(mesh.indices.len());
        let mut edge: HashMap<(usize, usize), Vec3> = HashMap::new();
        let mut edge_uses: HashMap<(usize, usize), usize> = HashMap::new();
        let mut vertex = vec![Vec3::ZERO; positions.len()];
        for t in &mesh.indices {
            let v = t.map(|i| remap[i as usize]);
            let [a, b, c] = v.map(|i| positions[i]);
            let Ok(n) = normalize((b - a).cross(c - a)) else {
                continue;
            };
            tris.push(v);
            face.push(n);
            for k in 0..3 {
                let (i, j, l) = (v[k], v[(k + 1) % 3], v[(k + 2) % 3]);
                *edge.entry(edge_key(i, j)).or_insert(Vec3::ZERO) += n;
                *edge_uses.entry(edge_key(i, j)).or_insert(0) += 1;
                let e1 = normalize(positions[j] - positions[i]).unwrap_or(Vec3::ZERO);
                let e2 = normalize(positions[l] - positions[i]).unwrap_or(Vec3::ZERO);
                let angle = e1.dot(e2).clamp(-1.0, 1.0).acos();
                vertex[i] += n * angle;
            }
        }
        Pseudonormals {
            tris,
            positions,
            face,
            edge,
            vertex,
            edge_uses,
        }
    }

    fn normal(&self, t: usize, f: Feature) -> Vec3 {
        let v = self.tris[t];
        match f {
            Feature::Face => self.face[t],
            Feature::Edge(i, j) => self.edge[&edge_key(v[i], v[j])],
            Feature::Vertex(i) => self.vertex[v[i]],
        }
    }

    fn closed(&self) -> bool {
        !self.edge_uses.is_empty() && self.edge_uses.values().all(|&c| c == 2)
    }
}

/// True when every edge (after welding coincident vertices) borders exactly
/// two non-degenerate triangles.
pub fn mesh_is_closed(mesh: &TriangleMesh) -> bool {
    Pseudonormals::new(mesh).closed()
}

/// Uniform bucket grid over triangle bounding boxes for exact nearest-triangle
/// queries by expanding Chebyshev shells.
struct Buckets {
    min: Vec3,
    cell: f64,
    n: [usize; 3],
    cells: Vec<Vec<u32>>,
}

impl Buckets {
    fn new(pn: &Pseudonormals) -> Self {
        let (mut lo, mut hi) = (Vec3::splat(f64::INFINITY), Vec3::splat(f64::NEG_INFINITY));
        for p in &pn.positions {
            lo = lo.min(*p);
            hi = hi.max(*p);
        }
        let ext = (hi - lo).max_component().max(1e-9);
        let per_axis = ((pn.tris.len() as f64).cbrt().ceil() as usize).clamp(1, 64);
        let cell = ext / per_axis as f64 * (1.0 + 1e-9);
        let n = [0, 1, 2].map(|a| (((hi[a] - lo[a]) / cell).floor() as usize + 1).max(1));
        let mut cells = vec![Vec::new(); n[0] * n[1] * n[2]];
        let cell_of =
            |v: f64, a: usize| (((v - lo[a]) / cell).floor().max(0.0) as usize).min(n[a] - 1);
        for (t, tri) in pn.tris.iter().enumerate() {
            let ps = tri.map(|i| pn.positions[i]);
            let tlo = ps[0].min(ps[1]).min(ps[2]);
            let thi = ps[0].max(ps[1]).max(ps[2]);
            let r0 = [0, 1, 2].map(|a| cell_of(tlo[a], a));
            let r1 = [0, 1, 2].map(|a| cell_of(thi[a], a));
            for z in r0[2]..=r1[2] {
                for y in r0[1]..=r1[1] {
                    for x in r0[0]..=r1[0] {
                        cells[x + n[0] * (y + n[1] * z)].push(t as u32);
                    }
                }
            }
        }
        Buckets {
            min: lo,
            cell,
            n,
            cells,
        }
    }

    /// Nearest triangle as `(distance^2, triangle, closest point, feature)`;
    /// ties resolve to the lowest triangle index.
    fn nearest(&self, pn: &Pseudonormals, p: Vec3) -> (f64, usize, Vec3, Feature) {
        let c0 = [0, 1, 2].map(|a| {
            (((p[a] - self.min[a]) / self.cell).floor().max(0.0) as usize).min(self.n[a] - 1)
        });
        let mut best = (f64::INFINITY, usize::MAX, p, Feature::Face);
        let max_r = self.n.iter().copied().max().unwrap_or(1);
        for r in 0..=max_r {
            let lo = c0.map(|c| c as isize - r as isize);
            let hi = c0.map(|c| c as isize + r as isize);
            for z in lo[2].max(0)..=hi[2].min(self.n[2] as isize - 1) {
                for y in lo[1].max(0)..=hi[1].min(self.n[1] as isize - 1) {
                    for x in lo[0].max(0)..=hi[0].min(self.n[0] as isize - 1) {
                        let shell = x == lo[0]
                            || x == hi[0]
                            || y == lo[1]
                            || y == hi[1]
                            || z == lo[2]
                            || z == hi[2];
                        if !shell {
                            continue;
                        }
                        let idx = x as usize + self.n[0] * (y as usize + self.n[1] * z as usize);
                        for &t in &self.cells[idx] {
                            let t = t as usize;
                            let [a, b, c] = pn.tris[t].map(|i| pn.positions[i]);
                            let (q, f) = closest_on_triangle(p, a, b, c);
                            let d2 = (p - q).length_squared();
                            if d2 < best.0 || (d2 == best.0 && t < best.1) {
                                best = (d2, t, q, f);
                            }
                        }
                    }
                }
            }
            let bound = r as f64 * self.cell;
            if best.1 != usize::MAX && best.0 <= bound * bound {
                break;
            }
        }
        best
    }
}

/// Signed distance to `mesh` on a cubic grid of `resolution^3` samples
/// enclosing the mesh with 10% padding per side. The sign comes from
/// angle-weighted pseudo-normals, which is exact for closed meshes; open
/// meshes get a best-effort sign and a logged warning.
pub fn sdf_from_mesh(mesh: &TriangleMesh, resolution: usize) -> Result<SdfGrid> {
    let pn = Pseudonormals::new(mesh);
    if pn.tris.is_empty() {
        return Err(Error::invalid("mesh has no non-degenerate triangles"));
    }
    if !pn.closed() {
        log::warn!(
            "mesh is not closed; signed distances outside a watertight region are best-effort"
        );
    }
    let (lo, hi) = mesh.bounds().expect("nonempty");
    let center = (lo + hi) * 0.5;
    let half = 0.5 * (hi - lo).max_component() * 1.2;
    let buckets = Buckets::new(&pn);
    SdfGrid::from_fn(
        [resolution; 3],
        center - Vec3::splat(half),
        center + Vec3::splat(half),
        |p| {
            let (d2, t, q, f) = buckets.nearest(&pn, p);
            let d = d2.sqrt();
            if (p - q).dot(pn.normal(t, f)) < 0.0 {
                -d
            } else {
                d
            }
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{primitive_cube, primitive_quad, primitive_sphere};

    #[test]
    fn closest_point_regions() {
        let (a, b, c) = (Vec3::ZERO, Vec3::X, Vec3::Y);
        assert_eq!(
            closest_on_triangle(Vec3::new(-1.0, -1.0, 0.0), a, b, c),
            (a, Feature::Vertex(0))
        );
        assert_eq!(
            closest_on_triangle(Vec3::new(0.5, -1.0, 2.0), a, b, c),
            (Vec3::new(0.5, 0.0, 0.0), Feature::Edge(0, 1))
        );
        let (q, f) = closest_on_triangle(Vec3::new(0.2, 0.3, -4.0), a, b, c);
        assert_eq!(f, Feature::Face);
        assert!((q - Vec3::new(0.2, 0.3, 0.0)).length() < 1e-15);
        let (q, f) = closest_on_triangle(Vec3::new(1.0, 1.0, 0.0), a, b, c);
        assert_eq!(f, Feature::Edge(1, 2));
        assert!((q - Vec3::new(0.5, 0.5, 0.0)).length() < 1e-15);
    }

    #[test]
    fn sphere_mesh_distance() {
        let mesh = primitive_sphere(48);
        assert!(mesh_is_closed(&mesh));
        let g = sdf_from_mesh(&mesh, 24).unwrap();
        // Chord sag of a 48-stack sphere is about (pi/48)^2 / 2 = 0.0021.
        for i in 0..g.values().len() {
            let (x, y, z) = g.coords(i);
            let p = g.point(x, y, z);
            let expected = p.length() - 1.0;
            assert!(
                (g.value(x, y, z) - expected).abs() < 5e-3,
                "{p:?}: {} vs {expected}",
                g.value(x, y, z)
            );
        }
    }

    #[test]
    fn cube_center_value() {
        let mesh = primitive_cube();
        assert!(mesh_is_closed(&mesh));
        let g = sdf_from_mesh(&mesh, 17).unwrap();
        assert!((g.value(8, 8, 8) + 0.5).abs() < 1e-7);
        assert!(g.value(0, 0, 0) > 0.0);
    }

    #[test]
    fn matches_brute_force_nearest() {
        let mesh = primitive_sphere(10);
        let pn = Pseudonormals::new(&mesh);
        let b = Buckets::new(&pn);
        for k in 0..500 {
            let t = k as f64;
            let p = Vec3::new(
                (t * 0.37).sin() * 1.6,
                (t * 0.11).cos() * 1.4,
                (t * 0.23).sin() * 1.8,
            );
            let brute = (0..pn.tris.len())
                .map(|i| {
                    let [a, bb, c] = pn.tris[i].map(|v| pn.positions[v]);
                    (p - closest_on_triangle(p, a, bb, c).0).length_squared()
                })
                .fold(f64::INFINITY, f64::min);
            assert_eq!(b.nearest(&pn, p).0, brute);
        }
    }

    #[test]
    fn open_mesh_is_best_effort() {
        let quad = primitive_quad(2.0);
        assert!(!mesh_is_closed(&quad));
        let g = sdf_from_mesh(&quad, 8).unwrap();
        assert!(g.values().iter().all(|v| v.is_finite()));
    }
}
