use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fsutil;
use crate::math::{normalize, Vec3, PI};

use super::Ray;

/// Indexed triangle mesh with per-vertex normals and UVs.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    pub positions: Vec<Vec3>,
    pub normals: Vec<Vec3>,
    pub uvs: Vec<[f64; 2]>,
    pub indices: Vec<[u32; 3]>,
}

/// Nearest intersection of a ray with one triangle of a mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangleHit {
    pub t: f64,
    pub triangle: usize,
    /// Barycentric weights of vertices 1 and 2; vertex 0 gets `1 - b1 - b2`.
    pub b1: f64,
    pub b2: f64,
}

impl TriangleHit {
    /// Total order used by every traversal so brute force and BVH agree on ties.
    #[inline]
    pub(crate) fn closer_than(&self, other: &TriangleHit) -> bool {
        self.t < other.t || (self.t == other.t && self.triangle < other.triangle)
    }
}

impl TriangleMesh {
    /// Validates attribute lengths and index ranges, normalizing normals.
    pub fn new(
        positions: Vec<Vec3>,
        normals: Vec<Vec3>,
        uvs: Vec<[f64; 2]>,
        indices: Vec<[u32; 3]>,
    ) -> Result<Self> {
        let n = positions.len();
        if normals.len() != n || uvs.len() != n {
            return Err(Error::invalid(format!(
                "mesh has {n} positions but {} normals and {} uvs",
                normals.len(),
                uvs.len()
            )));
        }
        if let Some(bad) = indices.iter().flatten().find(|&&i| i as usize >= n) {
            return Err(Error::invalid(format!(
                "triangle index {bad} out of range for {n} vertices"
            )));
        }
        let normals = normals
            .into_iter()
            .map(|v| normalize(v).unwrap_or(Vec3::Y))
            .collect();
        Ok(TriangleMesh {
            positions,
            normals,
            uvs,
            indices,
        })
    }

    /// Mesh with area-weighted vertex normals and zero UVs.
    pub fn from_triangles(positions: Vec<Vec3>, indices: Vec<[u32; 3]>) -> Result<Self> {
        let n = positions.len();
        let mut mesh = TriangleMesh::new(positions, vec![Vec3::Y; n], vec![[0.0; 2]; n], indices)?;
        mesh.normals = mesh.area_weighted_normals();
        Ok(mesh)
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn vertex_count(&self) -> usize {
        self.positions.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.indices.len()
    }

    #[inline]
    pub fn triangle(&self, i: usize) -> [Vec3; 3] {
        let [a, b, c] = self.indices[i];
        [
            self.positions[a as usize],
            self.positions[b as usize],
            self.positions[c as usize],
        ]
    }

    /// Unnormalized geometric normal `(p1 - p0) x (p2 - p0)`.
    pub fn face_cross(&self, i: usize) -> Vec3 {
        let [p0, p1, p2] = self.triangle(i);
        (p1 - p0).cross(p2 - p0)
    }

    pub fn triangle_area(&self, i: usize) -> f64 {
        0.5 * self.face_cross(i).length()
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.triangle_count())
            .map(|i| self.triangle_area(i))
            .sum()
    }

    /// Axis-aligned bounds of the referenced vertices, or `None` when empty.
    pub fn bounds(&self) -> Option<(Vec3, Vec3)> {
        let mut it = self.positions.iter();
        let first = *it.next()?;
        Some(it.fold((first, first), |(lo, hi), p| (lo.min(*p), hi.max(*p))))
    }

    pub fn area_weighted_normals(&self) -> Vec<Vec3> {
        let mut acc = vec![Vec3::ZERO; self.positions.len()];
        for (i, tri) in self.indices.iter().enumerate() {
            let c = self.face_cross(i);
            for &v in tri {
                acc[v as usize] += c;
            }
        }
        acc.into_iter()
            .map(|v| normalize(v).unwrap_or(Vec3::Y))
            .collect()
    }

    /// Maps positions through `f` and normals through `g`.
    pub fn transformed(&self, f: impl Fn(Vec3) -> Vec3, g: impl Fn(Vec3) -> Vec3) -> TriangleMesh {
        TriangleMesh {
            positions: self.positions.iter().map(|p| f(*p)).collect(),
            normals: self
                .normals
                .iter()
                .map(|n| normalize(g(*n)).unwrap_or(*n))
                .collect(),
            uvs: self.uvs.clone(),
            indices: self.indices.clone(),
        }
    }

    /// Moller-Trumbore test against triangle `i`.
    #[inline]
    pub fn intersect_triangle(&self, i: usize, ray: &Ray, t_max: f64) -> Option<TriangleHit> {
        const DET_EPS: f64 = 1e-14;
        let [p0, p1, p2] = self.triangle(i);
        let e1 = p1 - p0;
        let e2 = p2 - p0;
        let pv = ray.dir.cross(e2);
        let det = e1.dot(pv);
        if det.abs() < DET_EPS {
            return None;
        }
        let inv = 1.0 / det;
        let tv = ray.origin - p0;
        let b1 = tv.dot(pv) * inv;
        if !(0.0..=1.0).contains(&b1) {
            return None;
        }
        let qv = tv.cross(e1);
        let b2 = ray.dir.dot(qv) * inv;
        if b2 < 0.0 || b1 + b2 > 1.0 {
            return None;
        }
        let t = e2.dot(qv) * inv;
        (t > ray.t_min && t < t_max).then_some(TriangleHit {
            t,
            triangle: i,
            b1,
            b2,
        })
    }

    /// Nearest hit by testing every triangle.
    pub fn intersect_brute_force(&self, ray: &Ray, t_max: f64) -> Option<TriangleHit> {
        let mut best: Option<TriangleHit> = None;
        for i in 0..self.triangle_count() {
            if let Some(h) = self.intersect_triangle(i, ray, t_max) {
                if best.is_none_or(|b| h.closer_than(&b)) {
                    best = Some(h);
                }
            }
        }
        best
    }

    pub fn load_obj(path: &Path) -> Result<Self> {
        let text = fsutil::read_string(path)?;
        parse_obj(&text).map_err(|e| match e {
            Error::Format { format, msg } => Error::Format {
                format,
                msg: format!("{}: {msg}", path.display()),
            },
            other => other,
        })
    }

    pub fn save_obj(&self, path: &Path) -> Result<()> {
        fsutil::write_atomic(path, self.to_obj_string().as_bytes())
    }

    pub fn to_obj_string(&self) -> String {
        let mut s = String::new();
        for p in &self.positions {
            let _ = writeln!(s, "v {} {} {}", p.x, p.y, p.z);
        }
        for uv in &self.uvs {
            let _ = writeln!(s, "vt {} {}", uv[0], uv[1]);
        }
        for n in &self.normals {
            let _ = writeln!(s, "vn {} {} {}", n.x, n.y, n.z);
        }
        for t in &self.indices {
            let [a, b, c] = t.map(|i| i + 1);
            let _ = writeln!(s, "f {a}/{a}/{a} {b}/{b}/{b} {c}/{c}/{c}");
        }
        s
    }
}

/// Parses the `v`/`vt`/`vn`/`f` subset of Wavefront OBJ. Polygons are fan
/// triangulated; other statements are ignored.
pub fn parse_obj(text: &str) -> Result<TriangleMesh> {
    let mut v: Vec<Vec3> = Vec::new();
    let mut vt: Vec<[f64; 2]> = Vec::new();
    let mut vn: Vec<Vec3> = Vec::new();
    type Corner = (usize, Option<usize>, Option<usize>);
    let mut tris: Vec<[Corner; 3]> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        let err = |msg: String| Error::format("obj", format!("line {}: {msg}", lineno + 1));
        let mut toks = line.split_whitespace();
        let Some(kw) = toks.next() else { continue };
        let floats = |toks: std::str::SplitWhitespace<'_>, need: usize| -> Result<Vec<f64>> {
            let vals: Vec<f64> = toks
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|_| err(format!("bad number {t:?}")))
                })
                .collect::<Result<_>>()?;
            if vals.len() < need || vals.iter().any(|x| !x.is_finite()) {
                return Err(err(format!("{kw} needs {need} finite numbers")));
            }
            Ok(vals)
        };
        match kw {
            "v" => {
                let f = floats(toks, 3)?;
                v.push(Vec3::new(f[0], f[1], f[2]));
            }
            "vt" => {
                let f = floats(toks, 1)?;
                vt.push([f[0], f.get(1).copied().unwrap_or(0.0)]);
            }
            "vn" => {
                let f = floats(toks, 3)?;
                vn.push(Vec3::new(f[0], f[1], f[2]));
            }
            "f" => {
                let mut face = Vec::new();
                for tok in toks {
                    let mut parts = tok.split('/');
                    let resolve = |s: Option<&str>,
                                   len: usize,
                                   what: &str|
                     -> Result<Option<usize>> {
                        match s {
                            None | Some("") => Ok(None),
                            Some(s) => {
                                let i: i64 = s
                                    .parse()
                                    .map_err(|_| err(format!("bad {what} index {s:?}")))?;
                                let idx = if i > 0 {
                                    i - 1
                                } else if i < 0 {
                                    len as i64 + i
                                } else {
                                    return Err(err(format!("{what} index 0 (OBJ is 1-based)")));
                                };
                                if idx < 0 || idx as usize >= len {
                                    return Err(err(format!("{what} index {i} out of range")));
                                }
                                Ok(Some(idx as usize))
                            }
                        }
                    };
                    let pi = resolve(parts.next(), v.len(), "vertex")?
                        .ok_or_else(|| err("face corner without vertex index".into()))?;
                    let ti = resolve(parts.next(), vt.len(), "texcoord")?;
                    let ni = resolve(parts.next(), vn.len(), "normal")?;
                    face.push((pi, ti, ni));
                }
                if face.len() < 3 {
                    return Err(err("face with fewer than 3 vertices".into()));
                }
                for k in 1..face.len() - 1 {
                    tris.push([face[0], face[k], face[k + 1]]);
                }
            }
            _ => {}
        }
    }

    // Files whose attributes share one index per vertex (as written by
    // `to_obj_string`) keep their vertex order, unreferenced vertices included.
    let same =
        |a: Option<usize>, len: usize, pi: usize| a.map_or(len == 0, |a| a == pi && len == v.len());
    let direct = tris
        .iter()
        .flatten()
        .all(|&(pi, ti, ni)| same(ti, vt.len(), pi) && same(ni, vn.len(), pi));
    let mut positions = Vec::new();
    let mut normals: Vec<Option<Vec3>> = Vec::new();
    let mut uvs = Vec::new();
    let mut indices = Vec::with_capacity(tris.len());
    if direct {
        positions = v.clone();
        uvs = if vt.is_empty() {
            vec![[0.0; 2]; v.len()]
        } else {
            vt.clone()
        };
        normals = if vn.is_empty() {
            vec![None; v.len()]
        } else {
            vn.iter().map(|n| Some(*n)).collect()
        };
        indices.extend(tris.iter().map(|t| t.map(|c| c.0 as u32)));
    } else {
        let mut corners: HashMap<Corner, u32> = HashMap::new();
        for t in &tris {
            indices.push(t.map(|(pi, ti, ni)| {
                *corners.entry((pi, ti, ni)).or_insert_with(|| {
                    positions.push(v[pi]);
                    uvs.push(ti.map(|t| vt[t]).unwrap_or([0.0, 0.0]));
                    normals.push(ni.map(|n| vn[n]));
                    (positions.len() - 1) as u32
                })
            }));
        }
    }

    let n = positions.len();
    let mut mesh = TriangleMesh::new(positions, vec![Vec3::Y; n], uvs, indices)?;
    if normals.iter().any(Option::is_none) {
        let computed = mesh.area_weighted_normals();
        mesh.normals = normals
            .iter()
            .zip(computed)
            .map(|(given, c)| given.and_then(|g| normalize(g).ok()).unwrap_or(c))
            .collect();
    } else {
        mesh.normals = normals
            .into_iter()
            .map(|g| normalize(g.unwrap()).unwrap_or(Vec3::Y))
            .collect();
    }
    Ok(mesh)
}

/// Unit-radius UV sphere with `stacks` latitude bands and `2 * stacks`
/// longitude segments. Seam and pole vertices are duplicated so UVs stay
/// continuous: `(stacks + 1) * (2 * stacks + 1)` vertices and
/// `4 * stacks * (stacks - 1)` triangles.
pub fn primitive_sphere(stacks: usize) -> TriangleMesh {
    let stacks = stacks.max(2);
    let slices = 2 * stacks;
    let mut positions = Vec::with_capacity((stacks + 1) * (slices + 1));
    let mut uvs = Vec::with_capacity(positions.capacity());
    for i in 0..=stacks {
        let theta = PI * i as f64 / stacks as f64;
        let (st, ct) = theta.sin_cos();
        for j in 0..=slices {
            let phi = 2.0 * PI * j as f64 / slices as f64;
            let (sp, cp) = phi.sin_cos();
            positions.push(Vec3::new(st * cp, ct, -st * sp));
            uvs.push([j as f64 / slices as f64, 1.0 - i as f64 / stacks as f64]);
        }
    }
    let row = slices + 1;
    let mut indices = Vec::with_capacity(2 * slices * (stacks - 1));
    for i in 0..stacks {
        for j in 0..slices {
            let a = (i * row + j) as u32;
            let b = a + row as u32;
            if i != 0 {
                indices.push([a, b, a + 1]);
            }
            if i != stacks - 1 {
                indices.push([a + 1, b, b + 1]);
            }
        }
    }
    let normals = positions.clone();
    TriangleMesh::new(positions, normals, uvs, indices).expect("valid by construction")
}

/// Axis-aligned cube of side 1 centered at the origin, with flat per-face
/// normals: 24 vertices, 12 triangles.
pub fn primitive_cube() -> TriangleMesh {
    let mut positions = Vec::with_capacity(24);
    let mut normals = Vec::with_capacity(24);
    let mut uvs = Vec::with_capacity(24);
    let mut indices = Vec::with_capacity(12);
    for axis in 0..3 {
        for sign in [1.0, -1.0] {
            let mut n = [0.0; 3];
            n[axis] = sign;
            let n = Vec3::from(n);
            // Two tangents forming a right-handed frame with n.
            let mut u = [0.0; 3];
            u[(axis + 1) % 3] = 1.0;
            let u = Vec3::from(u);
            let v = n.cross(u);
            let base = positions.len() as u32;
            for (su, sv) in [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)] {
                positions.push((n + u * su + v * sv) * 0.5);
                normals.push(n);
                uvs.push([(su + 1.0) / 2.0, (sv + 1.0) / 2.0]);
            }
            indices.push([base, base + 1, base + 2]);
            indices.push([base, base + 2, base + 3]);
        }
    }
    TriangleMesh::new(positions, normals, uvs, indices).expect("valid by construction")
}

/// Square of side `size` in the XZ plane facing +Y, UV (0,0) at (-x, +z).
pub fn primitive_quad(size: f64) -> TriangleMesh {
    let h = size / 2.0;
    let positions = vec![
        Vec3::new(-h, 0.0, h),
        Vec3::new(h, 0.0, h),
        Vec3::new(h, 0.0, -h),
        Vec3::new(-h, 0.0, -h),
    ];
    let uvs = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
    TriangleMesh::new(positions, vec![Vec3::Y; 4], uvs, vec![[0, 1, 2], [0, 2, 3]])
        .expect("valid by construction")
}
