//! Median-split bounding volume hierarchy over mesh triangles.

use crate::math::Vec3;

use super::mesh::{TriangleHit, TriangleMesh};
use super::Ray;

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone)]
struct Node {
    lo: Vec3,
    hi: Vec3,
    /// Leaf: first index into `order`. Interior: index of the right child
    /// (the left child is always the next node).
    start: u32,
    /// Triangle count for leaves, 0 for interior nodes.
    count: u32,
}

#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<Node>,
    order: Vec<u32>,
}

impl Bvh {
    pub fn build(mesh: &TriangleMesh) -> Bvh {
        let n = mesh.triangle_count();
        let mut order: Vec<u32> = (0..n as u32).collect();
        let bounds: Vec<(Vec3, Vec3, Vec3)> = (0..n)
            .map(|i| {
                let [a, b, c] = mesh.triangle(i);
                let lo = a.min(b).min(c);
                let hi = a.max(b).max(c);
                (lo, hi, (lo + hi) * 0.5)
            })
            .collect();
        let mut nodes = Vec::with_capacity(2 * n / LEAF_SIZE + 1);
        if n > 0 {
            build_rec(&mut nodes, &mut order, &bounds, 0, n);
        }
        Bvh { nodes, order }
    }

    pub fn intersect(&self, mesh: &TriangleMesh, ray: &Ray, t_max: f64) -> Option<TriangleHit> {
        self.traverse(mesh, ray, t_max, false)
    }

    pub fn any_hit(&self, mesh: &TriangleMesh, ray: &Ray, t_max: f64) -> bool {
        self.traverse(mesh, ray, t_max, true).is_some()
    }

    fn traverse(
        &self,
        mesh: &TriangleMesh,
        ray: &Ray,
        t_max: f64,
        first_hit: bool,
    ) -> Option<TriangleHit> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv = Vec3::new(1.0 / ray.dir.x, 1.0 / ray.dir.y, 1.0 / ray.dir.z);
        let mut best: Option<TriangleHit> = None;
        let mut stack = Vec::with_capacity(64);
        stack.push(0usize);
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            let limit = best.map_or(t_max, |b| b.t);
            if !slab_hit(node, ray, inv, limit) {
                continue;
            }
            if node.count > 0 {
                let s = node.start as usize;
                for &tri in &self.order[s..s + node.count as usize] {
                    // Ties at equal t are resolved by triangle index, so the
                    // search bound stays inclusive of the current best.
                    let bound = best.map_or(t_max, |b| b.t.next_up());
                    if let Some(h) = mesh.intersect_triangle(tri as usize, ray, bound.min(t_max)) {
                        if best.is_none_or(|b| h.closer_than(&b)) {
                            best = Some(h);
                            if first_hit {
                                return best;
                            }
                        }
                    }
                }
            } else {
                stack.push(node.start as usize);
                stack.push(ni + 1);
            }
        }
        best
    }
}

fn build_rec(
    nodes: &mut Vec<Node>,
    order: &mut [u32],
    bounds: &[(Vec3, Vec3, Vec3)],
    start: usize,
    end: usize,
) -> usize {
    let slice = &mut order[start..end];
    let (mut lo, mut hi) = (Vec3::splat(f64::INFINITY), Vec3::splat(f64::NEG_INFINITY));
    let (mut clo, mut chi) = (lo, hi);
    for &t in slice.iter() {
        let (l, h, c) = bounds[t as usize];
        lo = lo.min(l);
        hi = hi.max(h);
        clo = clo.min(c);
        chi = chi.max(c);
    }
    let idx = nodes.len();
    nodes.push(Node {
        lo,
        hi,
        start: start as u32,
        count: (end - start) as u32,
    });
    let extent = chi - clo;
    if end - start <= LEAF_SIZE || extent.max_component() <= 0.0 {
        return idx;
    }
    let axis = if extent.x >= extent.y && extent.x >= extent.z {
        0
    } else if extent.y >= extent.z {
        1
    } else {
        2
    };
    let mid = (end - start) / 2;
    slice.select_nth_unstable_by(mid, |a, b| {
        let ca = bounds[*a as usize].2[axis];
        let cb = bounds[*b as usize].2[axis];
        ca.total_cmp(&cb).then(a.cmp(b))
    });
    build_rec(nodes, order, bounds, start, start + mid);
    let right = build_rec(nodes, order, bounds, start + mid, end);
    nodes[idx].start = right as u32;
    nodes[idx].count = 0;
    idx
}

#[inline]
fn slab_hit(node: &Node, ray: &Ray, inv: Vec3, t_max: f64) -> bool {
    let mut t0 = ray.t_min;
    let mut t1 = t_max;
    for a in 0..3 {
        let mut near = (node.lo[a] - ray.origin[a]) * inv[a];
        let mut far = (node.hi[a] - ray.origin[a]) * inv[a];
        if near > far {
            std::mem::swap(&mut near, &mut far);
        }
        // NaN from 0 * inf (ray in the slab plane) must not reject the node.
        if near.is_nan() || far.is_nan() {
            continue;
        }
        t0 = t0.max(near);
        t1 = t1.min(far * (1.0 + 4.0 * f64::EPSILON));
        if t0 > t1 {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::normalize;
    use crate::sampler::Sampler;
    use crate::scene::mesh::primitive_sphere;

    #[test]
    fn bvh_matches_brute_force() {
        let mesh = primitive_sphere(24);
        let bvh = Bvh::build(&mesh);
        let mut s = Sampler::new(17);
        let mut hits = 0;
        for _ in 0..3000 {
            let o = Vec3::new(
                s.next_f64() * 6.0 - 3.0,
                s.next_f64() * 6.0 - 3.0,
                s.next_f64() * 6.0 - 3.0,
            );
            let target = Vec3::new(s.next_f64() - 0.5, s.next_f64() - 0.5, s.next_f64() - 0.5);
            let Ok(d) = normalize(target - o) else {
                continue;
            };
            let ray = Ray::new(o, d);
            let a = mesh.intersect_brute_force(&ray, f64::INFINITY);
            let b = bvh.intersect(&mesh, &ray, f64::INFINITY);
            assert_eq!(a, b);
            hits += a.is_some() as usize;
            assert_eq!(a.is_some(), bvh.any_hit(&mesh, &ray, f64::INFINITY));
        }
        assert!(hits > 1000);
    }
}
