//! Evaluation: foreground-masked image error, surface sampling, Chamfer
//! distance, F-score, mesh alignment and the multi-domain reconstruction
//! loss.

mod align;
mod kdtree;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ChannelImage;
use crate::math::Vec3;
use crate::renderer::{MultiDomainFrame, RenderChannel};
use crate::scene::TriangleMesh;

pub use align::{
    align_meshes, fit_similarity, unit_cube_normalization, AlignOptions, Alignment, Similarity,
};
pub use kdtree::KdTree;

/// Default F-score thresholds, in unit-cube units.
pub const DEFAULT_TAUS: [f64; 3] = [0.1, 0.2, 0.5];

/// Mean squared difference over mask-true pixels and all channels.
pub fn mse_fg(a: &ChannelImage, b: &ChannelImage, mask: &[bool]) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(Error::ShapeMismatch(format!(
            "{}x{}x{} vs {}x{}x{}",
            a.width(),
            a.height(),
            a.channels(),
            b.width(),
            b.height(),
            b.channels()
        )));
    }
    if mask.len() != a.pixel_count() {
        return Err(Error::ShapeMismatch(format!(
            "mask has {} entries for {} pixels",
            mask.len(),
            a.pixel_count()
        )));
    }
    let count = mask.iter().filter(|&&m| m).count();
    if count == 0 {
        return Err(Error::invalid("foreground mask is empty"));
    }
    let mut sum = 0.0;
    for c in 0..a.channels() {
        let (pa, pb) = (a.plane(c), b.plane(c));
        for i in (0..mask.len()).filter(|&i| mask[i]) {
            let d = pa[i] as f64 - pb[i] as f64;
            sum += d * d;
        }
    }
    Ok(sum / (count * a.channels()) as f64)
}

/// `10 log10(1 / mse)`; infinite when `mse` is zero.
pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (1.0 / mse).log10()
    }
}

pub fn psnr_fg(a: &ChannelImage, b: &ChannelImage, mask: &[bool]) -> Result<f64> {
    mse_fg(a, b, mask).map(psnr_from_mse)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Self {
        PointCloud { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `n` points distributed uniformly over the surface: triangles are chosen
/// with probability proportional to area, positions uniformly inside them.
pub fn sample_surface(mesh: &TriangleMesh, n: usize, seed: u64) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::invalid("sample count must be positive"));
    }
    let mut cdf = Vec::with_capacity(mesh.triangle_count());
    let mut total = 0.0;
    for i in 0..mesh.triangle_count() {
        total += mesh.triangle_area(i);
        cdf.push(total);
    }
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::invalid("mesh has no surface area to sample"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n)
        .map(|_| {
            let u = rng.gen::<f64>() * total;
            let t = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
            let [a, b, c] = mesh.triangle(t);
            let (r1, r2): (f64, f64) = (rng.gen(), rng.gen());
            let s = r1.sqrt();
            a * (1.0 - s) + b * (s * (1.0 - r2)) + c * (s * r2)
        })
        .collect();
    Ok(PointCloud::new(points))
}

fn nonempty(p: &PointCloud, name: &str) -> Result<()> {
    if p.is_empty() {
        Err(Error::invalid(format!("{name} point cloud is empty")))
    } else {
        Ok(())
    }
}

/// Euclidean distance from each point of `query` to its nearest neighbor in
/// `tree`, in query order.
pub fn nearest_distances(query: &PointCloud, tree: &KdTree) -> Vec<f64> {
    query
        .points
        .par_iter()
        .map(|&q| tree.nearest_squared(q).sqrt())
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub(crate) fn chamfer_from_trees(
    p: &PointCloud,
    p_tree: &KdTree,
    q: &PointCloud,
    q_tree: &KdTree,
) -> f64 {
    0.5 * mean(&nearest_distances(p, q_tree)) + 0.5 * mean(&nearest_distances(q, p_tree))
}

/// `0.5 mean_p min_q |p - q| + 0.5 mean_q min_p |p - q|` with Euclidean
/// (not squared) distances.
pub fn chamfer_distance(p: &PointCloud, q: &PointCloud) -> Result<f64> {
    nonempty(p, "first")?;
    nonempty(q, "second")?;
    Ok(chamfer_from_trees(
        p,
        &KdTree::new(&p.points),
        q,
        &KdTree::new(&q.points),
    ))
}

fn f_score_from(d_pq: &[f64], d_qp: &[f64], tau: f64) -> f64 {
    let precision = d_pq.iter().filter(|&&d| d <= tau).count() as f64 / d_pq.len() as f64;
    let recall = d_qp.iter().filter(|&&d| d <= tau).count() as f64 / d_qp.len() as f64;
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Harmonic mean of precision (share of `p` within `tau` of `q`) and recall
/// (share of `q` within `tau` of `p`).
pub fn f_score(p: &PointCloud, q: &PointCloud, tau: f64) -> Result<f64> {
    nonempty(p, "first")?;
    nonempty(q, "second")?;
    if !(tau >= 0.0) {
        return Err(Error::invalid("threshold must be non-negative"));
    }
    let d_pq = nearest_distances(p, &KdTree::new(&q.points));
    let d_qp = nearest_distances(q, &KdTree::new(&p.points));
    Ok(f_score_from(&d_pq, &d_qp, tau))
}

/// Chamfer distance and F-scores from one pair of nearest-neighbor passes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryScores {
    pub cd: f64,
    /// F-score keyed by threshold, formatted as written by the caller.
    pub fscore: BTreeMap<String, f64>,
    pub cd_convention: String,
    pub sample_count: usize,
}

pub fn geometry_scores(p: &PointCloud, q: &PointCloud, taus: &[f64]) -> Result<GeometryScores> {
    nonempty(p, "first")?;
    nonempty(q, "second")?;
    if taus.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::invalid("thresholds must be non-negative"));
    }
    let d_pq = nearest_distances(p, &KdTree::new(&q.points));
    let d_qp = nearest_distances(q, &KdTree::new(&p.points));
    Ok(GeometryScores {
        cd: 0.5 * mean(&d_pq) + 0.5 * mean(&d_qp),
        fscore: taus
            .iter()
            .map(|&t| (format!("{t}"), f_score_from(&d_pq, &d_qp, t)))
            .collect(),
        cd_convention: "mean euclidean nearest-neighbor distance, symmetric halves averaged".into(),
        sample_count: p.len(),
    })
}

/// Aligns `pred` to `gt`, maps both into the ground truth's unit cube and
/// scores `samples` surface points from each. Both meshes are sampled with
/// the same seed.
pub fn evaluate_geometry(
    pred: &TriangleMesh,
    gt: &TriangleMesh,
    samples: usize,
    taus: &[f64],
    seed: u64,
) -> Result<(GeometryScores, Alignment)> {
    let alignment = align_meshes(
        pred,
        gt,
        &AlignOptions {
            seed,
            ..AlignOptions::default()
        },
    )?;
    let sample_seed = crate::sampler::derive_seed(seed, 1);
    let p = alignment
        .pred_to_unit_cube
        .apply_cloud(&sample_surface(pred, samples, sample_seed)?);
    let q = alignment
        .gt_normalization
        .apply_cloud(&sample_surface(gt, samples, sample_seed)?);
    Ok((geometry_scores(&p, &q, taus)?, alignment))
}

/// PSNR value that serializes infinity as the string `"inf"`.
mod psnr_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Str(s) if s == "inf" => Ok(f64::INFINITY),
            Raw::Str(s) => Err(serde::de::Error::custom(format!(
                "unexpected PSNR token {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelScore {
    #[serde(with = "psnr_serde")]
    pub psnr: f64,
    pub mse: f64,
}

impl ChannelScore {
    pub fn from_mse(mse: f64) -> Self {
        ChannelScore {
            psnr: psnr_from_mse(mse),
            mse,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object_id: Option<String>,
    pub seed: u64,
    /// Per-channel scores averaged over views.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub channels: BTreeMap<String, ChannelScore>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<GeometryScores>,
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Scores every channel present in both frame lists. Each view is masked by
/// the ground-truth foreground; PSNR and MSE are averaged over views the way
/// per-object tables are, so the reported pair need not satisfy the pointwise
/// identity.
pub fn evaluate_frames(
    pred: &[MultiDomainFrame],
    gt: &[MultiDomainFrame],
) -> Result<BTreeMap<String, ChannelScore>> {
    if pred.len() != gt.len() || gt.is_empty() {
        return Err(Error::ShapeMismatch(format!(
            "{} predicted views vs {} ground-truth views",
            pred.len(),
            gt.len()
        )));
    }
    let mut acc: BTreeMap<RenderChannel, (f64, f64, usize)> = BTreeMap::new();
    for (p, g) in pred.iter().zip(gt) {
        let mask = g
            .mask()
            .ok_or_else(|| Error::invalid("ground-truth frame has no images"))?;
        for (ch, gi) in &g.images {
            let Some(pi) = p.get(*ch) else { continue };
            let mse = mse_fg(pi, gi, mask)?;
            let e = acc.entry(*ch).or_insert((0.0, 0.0, 0));
            e.0 += mse;
            e.1 += psnr_from_mse(mse);
            e.2 += 1;
        }
    }
    Ok(acc
        .into_iter()
        .map(|(ch, (mse, psnr, n))| {
            (
                ch.name().to_string(),
                ChannelScore {
                    mse: mse / n as f64,
                    psnr: psnr / n as f64,
                },
            )
        })
        .collect())
}

/// Learned image distance plugged into the reconstruction loss.
pub trait Perceptual: Sync {
    fn distance(&self, a: &ChannelImage, b: &ChannelImage) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_lpips: f64,
    pub lambda_mask: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_lpips: 2.0,
            lambda_mask: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub total: f64,
    pub albedo: f64,
    pub mro: f64,
    /// Unweighted mask term.
    pub mask: f64,
    /// Sum of both perceptual terms before weighting, when a functional is
    /// plugged in.
    pub perceptual: Option<f64>,
    pub note: String,
}

fn l2(a: &ChannelImage, b: &ChannelImage) -> Result<f64> {
    mse_fg(a, b, &vec![true; a.pixel_count()])
}

fn mask_image(mask: &[bool], w: usize, h: usize) -> ChannelImage {
    let data = mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect();
    ChannelImage::from_parts(w, h, 1, data, vec![true; w * h]).expect("sized")
}

/// Sum over views of `|A - A_gt|^2 + |MRO - MRO_gt|^2 + lambda_mask
/// |M - M_gt|^2`, each a per-pixel mean over the whole image, plus
/// `lambda_lpips` times the perceptual distance of albedo and of MRO when a
/// functional is supplied.
pub fn reconstruction_loss(
    rendered: &[MultiDomainFrame],
    gt: &[MultiDomainFrame],
    weights: &LossWeights,
    perceptual: Option<&dyn Perceptual>,
) -> Result<LossReport> {
    if rendered.len() != gt.len() || gt.is_empty() {
        return Err(Error::ShapeMismatch(format!(
            "{} rendered views vs {} ground-truth views",
            rendered.len(),
            gt.len()
        )));
    }
    let (mut albedo, mut mro, mut mask, mut perc) = (0.0, 0.0, 0.0, 0.0);
    for (r, g) in rendered.iter().zip(gt) {
        let get = |f: &MultiDomainFrame| {
            f.get(RenderChannel::Albedo)
                .cloned()
                .ok_or_else(|| Error::invalid("frame lacks an albedo image"))
        };
        let (ra, ga) = (get(r)?, get(g)?);
        let (rm, gm) = (
            r.mro()
                .ok_or_else(|| Error::invalid("frame lacks metallic/roughness"))?,
            g.mro()
                .ok_or_else(|| Error::invalid("frame lacks metallic/roughness"))?,
        );
        albedo += l2(&ra, &ga)?;
        mro += l2(&rm, &gm)?;
        let (w, h) = (ga.width(), ga.height());
        mask += l2(&mask_image(ra.mask(), w, h), &mask_image(ga.mask(), w, h))?;
        if let Some(p) = perceptual {
            perc += p.distance(&ra, &ga) + p.distance(&rm, &gm);
        }
    }
    let mut total = albedo + mro + weights.lambda_mask * mask;
    let note = match perceptual {
        Some(_) => {
            total += weights.lambda_lpips * perc;
            "perceptual terms included".to_string()
        }
        None => "perceptual terms disabled; no functional supplied".to_string(),
    };
    Ok(LossReport {
        total,
        albedo,
        mro,
        mask,
        perceptual: perceptual.map(|_| perc),
        note,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{primitive_quad, primitive_sphere};

    fn img(w: usize, h: usize, c: usize, v: f32) -> ChannelImage {
        let mut i = ChannelImage::filled(w, h, &vec![v; c]).unwrap();
        i.mask_mut().fill(true);
        i
    }

    #[test]
    fn mse_closed_forms() {
        let a = img(4, 3, 3, 0.5);
        let mask = vec![true; 12];
        assert_eq!(mse_fg(&a, &a, &mask).unwrap(), 0.0);
        assert_eq!(psnr_fg(&a, &a, &mask).unwrap(), f64::INFINITY);
        let b = img(4, 3, 3, 0.25);
        let d = (0.5f32 as f64 - 0.25f32 as f64).powi(2);
        assert_eq!(mse_fg(&a, &b, &mask).unwrap(), d);
        // Differences only in the background do not count.
        let mut c = a.clone();
        c.set(0, 0, 1, 0.9);
        let mut m = mask.clone();
        m[0] = false;
        assert_eq!(mse_fg(&a, &c, &m).unwrap(), 0.0);
        assert!(mse_fg(&a, &b, &[false; 12]).is_err());
        assert!(mse_fg(&a, &img(4, 3, 1, 0.0), &mask).is_err());
    }

    #[test]
    fn psnr_log_identity() {
        assert!((psnr_from_mse(0.01) - 20.0).abs() < 1e-12);
        assert!((psnr_from_mse(0.03) - 15.228787452803376).abs() < 1e-9);
    }

    #[test]
    fn psnr_serializes_inf_token() {
        let s = ChannelScore::from_mse(0.0);
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(j, r#"{"psnr":"inf","mse":0.0}"#);
        assert_eq!(serde_json::from_str::<ChannelScore>(&j).unwrap(), s);
    }

    #[test]
    fn samples_lie_on_surface() {
        let q = primitive_quad(2.0);
        let pc = sample_surface(&q, 500, 4).unwrap();
        assert_eq!(pc.len(), 500);
        assert!(pc
            .points
            .iter()
            .all(|p| p.y.abs() < 1e-12 && p.x.abs() <= 1.0 && p.z.abs() <= 1.0));
        assert_eq!(pc, sample_surface(&q, 500, 4).unwrap());
        assert!(sample_surface(&q, 0, 4).is_err());
    }

    #[test]
    fn chamfer_closed_forms() {
        let p = PointCloud::new(vec![Vec3::ZERO]);
        let q = PointCloud::new(vec![Vec3::new(0.0, 0.3, 0.4)]);
        assert!((chamfer_distance(&p, &q).unwrap() - 0.5).abs() < 1e-15);
        let s = sample_surface(&primitive_sphere(8), 300, 1).unwrap();
        assert_eq!(chamfer_distance(&s, &s).unwrap(), 0.0);
        assert!(chamfer_distance(&s, &PointCloud::new(vec![])).is_err());
    }

    #[test]
    fn f_score_cases() {
        let s = sample_surface(&primitive_sphere(8), 200, 1).unwrap();
        for tau in DEFAULT_TAUS {
            assert_eq!(f_score(&s, &s, tau).unwrap(), 1.0);
        }
        let far = PointCloud::new(s.points.iter().map(|&p| p + Vec3::splat(10.0)).collect());
        assert_eq!(f_score(&s, &far, 0.5).unwrap(), 0.0);
        // Half of p sits on q; q is entirely covered by p.
        let q = PointCloud::new(vec![Vec3::ZERO, Vec3::X]);
        let p = PointCloud::new(vec![
            Vec3::ZERO,
            Vec3::X,
            Vec3::new(5.0, 0.0, 0.0),
            Vec3::new(9.0, 0.0, 0.0),
        ]);
        let expect = 2.0 * 0.5 * 1.0 / 1.5;
        assert!((f_score(&p, &q, 0.1).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn identical_meshes_score_perfectly() {
        let m = primitive_sphere(10);
        let (g, _) = evaluate_geometry(&m, &m, 2000, &DEFAULT_TAUS, 9).unwrap();
        assert_eq!(g.cd, 0.0);
        assert!(g.fscore.values().all(|&f| f == 1.0));
        assert_eq!(
            g.fscore.keys().cloned().collect::<Vec<_>>(),
            ["0.1", "0.2", "0.5"]
        );
    }

    #[test]
    fn reconstruction_loss_forms() {
        let mut frame = MultiDomainFrame {
            view: crate::scene::generate_orbit(1, &[0.0], 2.0, 0.5, 4).unwrap()[0],
            images: BTreeMap::new(),
        };
        frame
            .images
            .insert(RenderChannel::Albedo, img(4, 4, 3, 0.4));
        frame.images.insert(RenderChannel::Mro, img(4, 4, 3, 0.0));
        let gt = vec![frame.clone()];
        let r = reconstruction_loss(&gt, &gt, &LossWeights::default(), None).unwrap();
        assert_eq!(r.total, 0.0);
        assert!(r.perceptual.is_none());

        // Flip 4 of 16 mask bits.
        let mut other = frame.clone();
        for ch in [RenderChannel::Albedo, RenderChannel::Mro] {
            other.images.get_mut(&ch).unwrap().mask_mut()[..4].fill(false);
        }
        let r = reconstruction_loss(&[other], &gt, &LossWeights::default(), None).unwrap();
        assert!((r.total - 0.2 * 0.25).abs() < 1e-15);

        struct Constant(f64);
        impl Perceptual for Constant {
            fn distance(&self, _: &ChannelImage, _: &ChannelImage) -> f64 {
                self.0
            }
        }
        let r =
            reconstruction_loss(&gt, &gt, &LossWeights::default(), Some(&Constant(0.3))).unwrap();
        assert!((r.total - 2.0 * 2.0 * 0.3).abs() < 1e-15);
    }
}
