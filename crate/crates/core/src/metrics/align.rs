use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::scene::TriangleMesh;

use super::kdtree::KdTree;
use super::{chamfer_from_trees, sample_surface, PointCloud};

/// `p -> scale * rotation * p + translation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Similarity {
    pub scale: f64,
    /// Row-major rotation matrix.
    pub rotation: [[f64; 3]; 3],
    pub translation: Vec3,
}

impl Similarity {
    pub const IDENTITY: Similarity = Similarity {
        scale: 1.0,
        rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        translation: Vec3::ZERO,
    };

    pub fn new(scale: f64, rotation: [[f64; 3]; 3], translation: Vec3) -> Self {
        Similarity {
            scale,
            rotation,
            translation,
        }
    }

    /// Rotation by `angle` radians about the unit vector `axis`.
    pub fn rotation_about(axis: Vec3, angle: f64) -> [[f64; 3]; 3] {
        let r = nalgebra::Rotation3::from_axis_angle(
            &nalgebra::Unit::new_normalize(to_na(axis)),
            angle,
        );
        from_na_mat(r.matrix())
    }

    fn rot(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.rotation[i][j])
    }

    pub fn apply(&self, p: Vec3) -> Vec3 {
        let r = &self.rotation;
        let v = Vec3::new(
            r[0][0] * p.x + r[0][1] * p.y + r[0][2] * p.z,
            r[1][0] * p.x + r[1][1] * p.y + r[1][2] * p.z,
            r[2][0] * p.x + r[2][1] * p.y + r[2][2] * p.z,
        );
        v * self.scale + self.translation
    }

    /// Rotates a direction without scaling or translating it.
    pub fn apply_direction(&self, d: Vec3) -> Vec3 {
        Similarity {
            scale: 1.0,
            translation: Vec3::ZERO,
            ..*self
        }
        .apply(d)
    }

    /// `self` after `first`.
    pub fn compose(&self, first: &Similarity) -> Similarity {
        let r = self.rot() * first.rot();
        Similarity {
            scale: self.scale * first.scale,
            rotation: from_na_mat(&r),
            translation: self.apply(first.translation),
        }
    }

    pub fn inverse(&self) -> Similarity {
        let rt = self.rot().transpose();
        let t = rt * to_na(self.translation) * (-1.0 / self.scale);
        Similarity {
            scale: 1.0 / self.scale,
            rotation: from_na_mat(&rt),
            translation: from_na(t),
        }
    }

    pub fn apply_mesh(&self, mesh: &TriangleMesh) -> TriangleMesh {
        mesh.transformed(|p| self.apply(p), |n| self.apply_direction(n))
    }

    pub fn apply_cloud(&self, cloud: &PointCloud) -> PointCloud {
        PointCloud::new(cloud.points.iter().map(|&p| self.apply(p)).collect())
    }
}

fn to_na(v: Vec3) -> Vector3<f64> {
    Vector3::new(v.x, v.y, v.z)
}

fn from_na(v: Vector3<f64>) -> Vec3 {
    Vec3::new(v.x, v.y, v.z)
}

fn from_na_mat(m: &Matrix3<f64>) -> [[f64; 3]; 3] {
    [
        [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
        [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
        [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
    ]
}

/// Uniform scale and translation mapping the mesh bounding box into the unit
/// cube centered at the origin (longest side of length 1).
pub fn unit_cube_normalization(mesh: &TriangleMesh) -> Result<Similarity> {
    let (lo, hi) = mesh
        .bounds()
        .ok_or_else(|| Error::invalid("cannot normalize an empty mesh"))?;
    let extent = (hi - lo).max_component();
    if !(extent > 1e-12) || !extent.is_finite() {
        return Err(Error::invalid("mesh has zero extent"));
    }
    let s = 1.0 / extent;
    let center = (lo + hi) * 0.5;
    Ok(Similarity::new(
        s,
        Similarity::IDENTITY.rotation,
        center * -s,
    ))
}

/// Least-squares similarity mapping `src[i]` onto `dst[i]`.
pub fn fit_similarity(src: &[Vec3], dst: &[Vec3]) -> Option<Similarity> {
    let n = src.len();
    if n < 3 || n != dst.len() {
        return None;
    }
    let inv_n = 1.0 / n as f64;
    let mx = src.iter().fold(Vector3::zeros(), |a, p| a + to_na(*p)) * inv_n;
    let my = dst.iter().fold(Vector3::zeros(), |a, p| a + to_na(*p)) * inv_n;
    let mut cov = Matrix3::zeros();
    let mut var = 0.0;
    for (p, q) in src.iter().zip(dst) {
        let a = to_na(*p) - mx;
        let b = to_na(*q) - my;
        cov += b * a.transpose();
        var += a.norm_squared();
    }
    cov *= inv_n;
    var *= inv_n;
    if !(var > 0.0) {
        return None;
    }
    let svd = cov.svd(true, true);
    let (u, v_t) = (svd.u?, svd.v_t?);
    let d = if (u.determinant() * v_t.determinant()) < 0.0 {
        -1.0
    } else {
        1.0
    };
    let s = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d));
    let r = u * s * v_t;
    let scale =
        (svd.singular_values[0] + svd.singular_values[1] + d * svd.singular_values[2]) / var;
    if !(scale > 0.0) || !scale.is_finite() {
        return None;
    }
    let t = my - r * mx * scale;
    Some(Similarity::new(scale, from_na_mat(&r), from_na(t)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignOptions {
    pub max_iterations: usize,
    /// Stop when the mean squared residual changes by less than this
    /// fraction between iterations.
    pub tolerance: f64,
    /// Surface samples drawn from each mesh for the refinement.
    pub samples: usize,
    pub seed: u64,
}

impl Default for AlignOptions {
    fn default() -> Self {
        AlignOptions {
            max_iterations: 50,
            tolerance: 1e-6,
            samples: 4000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    /// Maps the generated mesh into the ground-truth frame.
    pub transform: Similarity,
    /// Maps the ground-truth mesh into the unit cube; metrics are evaluated
    /// after applying it to both meshes.
    pub gt_normalization: Similarity,
    /// Maps the generated mesh straight into the normalized frame; equal to
    /// `gt_normalization` after `transform` up to rounding.
    pub pred_to_unit_cube: Similarity,
    pub iterations: usize,
    /// Chamfer distance of the refinement samples, in unit-cube units,
    /// before and after refinement.
    pub cd_before: f64,
    pub cd_after: f64,
}

/// Aligns `pred` to `gt`: both are first normalized to the unit cube by their
/// bounding boxes, then the generated surface is refined by point-to-point
/// ICP with a similarity fit per iteration.
///
/// Both meshes are sampled with the same seed. Refinement results that
/// increase the sample Chamfer distance are discarded.
pub fn align_meshes(
    pred: &TriangleMesh,
    gt: &TriangleMesh,
    options: &AlignOptions,
) -> Result<Alignment> {
    let n_pred = unit_cube_normalization(pred)?;
    let n_gt = unit_cube_normalization(gt)?;
    let src = sample_surface(pred, options.samples, options.seed)?;
    let dst = n_gt.apply_cloud(&sample_surface(gt, options.samples, options.seed)?);
    let dst_tree = KdTree::new(&dst.points);

    // Current map from original pred coordinates to the normalized gt frame.
    let initial = n_pred;
    let mut current = initial;
    let mut moved: Vec<Vec3> = src.points.iter().map(|&p| current.apply(p)).collect();
    let mut prev = f64::INFINITY;
    let mut iterations = 0;
    for _ in 0..options.max_iterations {
        let matches: Vec<(usize, f64)> = moved
            .par_iter()
            .map(|&p| dst_tree.nearest(p).expect("nonempty samples"))
            .collect();
        let residual = matches.iter().map(|m| m.1).sum::<f64>() / matches.len() as f64;
        if residual == 0.0
            || (prev.is_finite() && (prev - residual).abs() <= options.tolerance * prev)
        {
            break;
        }
        prev = residual;
        let targets: Vec<Vec3> = matches.iter().map(|m| dst.points[m.0]).collect();
        let Some(step) = fit_similarity(&moved, &targets) else {
            break;
        };
        current = step.compose(&current);
        moved = src.points.iter().map(|&p| current.apply(p)).collect();
        iterations += 1;
    }

    let cloud_at =
        |t: &Similarity| PointCloud::new(src.points.iter().map(|&p| t.apply(p)).collect());
    let before_cloud = cloud_at(&initial);
    let cd_before = chamfer_from_trees(
        &before_cloud,
        &KdTree::new(&before_cloud.points),
        &dst,
        &dst_tree,
    );
    let after_cloud = PointCloud::new(moved);
    let cd_after = chamfer_from_trees(
        &after_cloud,
        &KdTree::new(&after_cloud.points),
        &dst,
        &dst_tree,
    );
    let (chosen, cd_after) = if cd_after <= cd_before {
        (current, cd_after)
    } else {
        log::warn!(
            "alignment refinement increased Chamfer distance; keeping bounding-box normalization"
        );
        (initial, cd_before)
    };
    Ok(Alignment {
        transform: n_gt.inverse().compose(&chosen),
        gt_normalization: n_gt,
        pred_to_unit_cube: chosen,
        iterations,
        cd_before,
        cd_after,
    })
}
