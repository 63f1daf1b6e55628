//! Planar homographies: normalized DLT estimation, Levenberg-Marquardt
//! refinement of the reprojection error, and inverse perspective warping
//! with bilinear sampling.
//!
//! A [`Homography`] maps `src` points to `dst` points. For warping, `src`
//! lives on the target canvas and `dst` on the source image, so every
//! target pixel is pulled from the source and no holes appear.

use image::RgbImage;
use nalgebra::{DMatrix, Matrix3, SMatrix, SVector, Vector3};
use thiserror::Error;

use crate::imaging::{sample_bilinear, BLACK};
use crate::raster::{Mask, Point2};

/// Projective division threshold.
pub const MIN_HOMOGENEOUS_W: f64 = 1e-12;
const COLLINEAR_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("need at least 4 correspondences, got {0}")]
    InsufficientPoints(usize),
    #[error("degenerate point configuration: {0}")]
    DegenerateConfiguration(&'static str),
    #[error("point maps to infinity")]
    PointAtInfinity,
    #[error("mismatched correspondence lists ({0} vs {1})")]
    LengthMismatch(usize, usize),
}

/// Validated point pairs, at least four, all finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Correspondences {
    src: Vec<Point2>,
    dst: Vec<Point2>,
}

impl Correspondences {
    pub fn new(src: Vec<Point2>, dst: Vec<Point2>) -> Result<Self, GeometryError> {
        if src.len() != dst.len() {
            return Err(GeometryError::LengthMismatch(src.len(), dst.len()));
        }
        if src.len() < 4 {
            return Err(GeometryError::InsufficientPoints(src.len()));
        }
        if src.iter().chain(&dst).any(|p| !p.is_finite()) {
            return Err(GeometryError::DegenerateConfiguration("non-finite point"));
        }
        Ok(Self { src, dst })
    }

    pub fn from_pairs(pairs: &[(Point2, Point2)]) -> Result<Self, GeometryError> {
        Self::new(pairs.iter().map(|p| p.0).collect(), pairs.iter().map(|p| p.1).collect())
    }

    pub fn len(&self) -> usize {
        self.src.len()
    }

    pub fn is_empty(&self) -> bool {
        self.src.is_empty()
    }

    pub fn src(&self) -> &[Point2] {
        &self.src
    }

    pub fn dst(&self) -> &[Point2] {
        &self.dst
    }
}

/// 3×3 projective map with `m[2][2] = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Homography {
    m: Matrix3<f64>,
    src_points: Vec<Point2>,
    dst_points: Vec<Point2>,
    rmse: f64,
}

impl Homography {
    /// Wrap a bare matrix (rescaled so `m[2][2] = 1`), with no correspondences.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self, GeometryError> {
        let m = normalize_scale(m)?;
        Ok(Self {
            m,
            src_points: Vec::new(),
            dst_points: Vec::new(),
            rmse: 0.0,
        })
    }

    pub fn identity() -> Self {
        Self::from_matrix(Matrix3::identity()).expect("identity is invertible")
    }

    pub fn translation(dx: f64, dy: f64) -> Self {
        Self::from_matrix(Matrix3::new(1.0, 0.0, dx, 0.0, 1.0, dy, 0.0, 0.0, 1.0)).expect("translation is invertible")
    }

    fn with_correspondences(m: Matrix3<f64>, c: &Correspondences) -> Result<Self, GeometryError> {
        let m = normalize_scale(m)?;
        let sse = sum_squared_error(&m, c).ok_or(GeometryError::PointAtInfinity)?;
        Ok(Self {
            m,
            src_points: c.src.clone(),
            dst_points: c.dst.clone(),
            rmse: (sse / c.len() as f64).sqrt(),
        })
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    pub fn src_points(&self) -> &[Point2] {
        &self.src_points
    }

    pub fn dst_points(&self) -> &[Point2] {
        &self.dst_points
    }

    /// Root-mean-square reprojection error over the fitting pairs, in pixels.
    pub fn rmse(&self) -> f64 {
        self.rmse
    }

    /// Map `p` through the homography and divide by the homogeneous weight.
    pub fn apply(&self, p: Point2) -> Result<Point2, GeometryError> {
        project(&self.m, p).ok_or(GeometryError::PointAtInfinity)
    }

    /// Sum of squared reprojection errors on `c`.
    pub fn sse(&self, c: &Correspondences) -> f64 {
        sum_squared_error(&self.m, c).unwrap_or(f64::INFINITY)
    }
}

pub fn apply_homography(h: &Homography, p: Point2) -> Result<Point2, GeometryError> {
    h.apply(p)
}

#[inline]
fn project(m: &Matrix3<f64>, p: Point2) -> Option<Point2> {
    let x = m[(0, 0)] * p.x + m[(0, 1)] * p.y + m[(0, 2)];
    let y = m[(1, 0)] * p.x + m[(1, 1)] * p.y + m[(1, 2)];
    let z = m[(2, 0)] * p.x + m[(2, 1)] * p.y + m[(2, 2)];
    (z.abs() > MIN_HOMOGENEOUS_W).then(|| Point2::new(x / z, y / z))
}

fn sum_squared_error(m: &Matrix3<f64>, c: &Correspondences) -> Option<f64> {
    let mut acc = 0.0;
    for (s, d) in c.src.iter().zip(&c.dst) {
        let q = project(m, *s)?;
        acc += (q.x - d.x).powi(2) + (q.y - d.y).powi(2);
    }
    Some(acc)
}

fn normalize_scale(m: Matrix3<f64>) -> Result<Matrix3<f64>, GeometryError> {
    let s = m[(2, 2)];
    if !s.is_finite() || s.abs() < 1e-12 {
        return Err(GeometryError::DegenerateConfiguration("homography has vanishing m[2][2]"));
    }
    let m = m / s;
    if m.iter().any(|v| !v.is_finite()) || m.determinant().abs() <= 1e-12 {
        return Err(GeometryError::DegenerateConfiguration("singular homography"));
    }
    Ok(m)
}

/// Similarity transform moving the centroid to the origin and the mean
/// distance from it to √2.
fn hartley_normalization(points: &[Point2]) -> Result<(Matrix3<f64>, Vec<Point2>), GeometryError> {
    let n = points.len() as f64;
    let cx = points.iter().map(|p| p.x).sum::<f64>() / n;
    let cy = points.iter().map(|p| p.y).sum::<f64>() / n;
    let mean_dist = points.iter().map(|p| (p.x - cx).hypot(p.y - cy)).sum::<f64>() / n;
    if mean_dist.is_nan() || mean_dist <= f64::EPSILON {
        return Err(GeometryError::DegenerateConfiguration("points coincide, normalization singular"));
    }
    let s = std::f64::consts::SQRT_2 / mean_dist;
    let t = Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0);
    let normalized = points.iter().map(|p| Point2::new(s * (p.x - cx), s * (p.y - cy))).collect();
    Ok((t, normalized))
}

/// RMS distance of (already normalized) points from their best-fit line.
fn line_residual(points: &[Point2]) -> f64 {
    let n = points.len() as f64;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in points {
        sxx += p.x * p.x;
        sxy += p.x * p.y;
        syy += p.y * p.y;
    }
    let (sxx, sxy, syy) = (sxx / n, sxy / n, syy / n);
    let half_trace = 0.5 * (sxx + syy);
    let disc = (0.25 * (sxx - syy).powi(2) + sxy * sxy).sqrt();
    (half_trace - disc).max(0.0).sqrt()
}

fn has_collinear_triple(points: &[Point2]) -> bool {
    let n = points.len();
    for i in 0..n {
        for j in (i + 1)..n {
            for k in (j + 1)..n {
                let (a, b, c) = (points[i], points[j], points[k]);
                let area = ((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)).abs() * 0.5;
                if area <= COLLINEAR_TOL {
                    return true;
                }
            }
        }
    }
    false
}

/// Linear least-squares homography (DLT) under Hartley normalization.
pub fn estimate_homography(c: &Correspondences) -> Result<Homography, GeometryError> {
    let n = c.len();
    if n < 4 {
        return Err(GeometryError::InsufficientPoints(n));
    }
    let (t_src, src) = hartley_normalization(&c.src)?;
    let (t_dst, dst) = hartley_normalization(&c.dst)?;
    for pts in [&src, &dst] {
        if line_residual(pts) <= COLLINEAR_TOL {
            return Err(GeometryError::DegenerateConfiguration("points are collinear"));
        }
        if n == 4 && has_collinear_triple(pts) {
            return Err(GeometryError::DegenerateConfiguration("three of four points are collinear"));
        }
    }

    let rows = (2 * n).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, (p, q)) in src.iter().zip(&dst).enumerate() {
        let (x, y, u, v) = (p.x, p.y, q.x, q.y);
        let r0 = 2 * i;
        let r1 = r0 + 1;
        a[(r0, 0)] = -x;
        a[(r0, 1)] = -y;
        a[(r0, 2)] = -1.0;
        a[(r0, 6)] = u * x;
        a[(r0, 7)] = u * y;
        a[(r0, 8)] = u;
        a[(r1, 3)] = -x;
        a[(r1, 4)] = -y;
        a[(r1, 5)] = -1.0;
        a[(r1, 6)] = v * x;
        a[(r1, 7)] = v * y;
        a[(r1, 8)] = v;
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or(GeometryError::DegenerateConfiguration("SVD did not converge"))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let smallest = order[0];
    let largest = svd.singular_values[order[order.len() - 1]];
    if svd.singular_values[order[1]] <= 1e-12 * largest {
        return Err(GeometryError::DegenerateConfiguration(
            "correspondences do not determine a unique homography",
        ));
    }
    let h = v_t.row(smallest);
    let hn = Matrix3::from_fn(|r, col| h[3 * r + col]);
    let t_dst_inv = t_dst
        .try_inverse()
        .ok_or(GeometryError::DegenerateConfiguration("normalization singular"))?;
    Homography::with_correspondences(t_dst_inv * hn * t_src, c)
}

pub const LM_INITIAL_DAMPING: f64 = 1e-3;
pub const LM_MAX_ITERATIONS: usize = 100;
pub const LM_MIN_RELATIVE_IMPROVEMENT: f64 = 1e-10;
const LM_MAX_DAMPING: f64 = 1e16;
/// Below this RMS error (pixels) the fit is at the floating-point floor.
const LM_RMSE_FLOOR: f64 = 1e-10;

/// Outcome of [`refine_homography`]. The best iterate is always returned;
/// `converged` is false when the iteration budget ran out first.
#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    pub homography: Homography,
    pub iterations: usize,
    pub converged: bool,
}

type Params = SVector<f64, 8>;

fn params_of(m: &Matrix3<f64>) -> Params {
    Params::from_column_slice(&[
        m[(0, 0)],
        m[(0, 1)],
        m[(0, 2)],
        m[(1, 0)],
        m[(1, 1)],
        m[(1, 2)],
        m[(2, 0)],
        m[(2, 1)],
    ])
}

fn matrix_of(p: &Params) -> Matrix3<f64> {
    Matrix3::new(p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7], 1.0)
}

/// Gauss-Newton normal equations `(JᵀJ, Jᵀr)` of the reprojection residuals.
fn normal_equations(p: &Params, c: &Correspondences) -> Option<(SMatrix<f64, 8, 8>, Params)> {
    let mut jtj = SMatrix::<f64, 8, 8>::zeros();
    let mut jtr = Params::zeros();
    for (s, d) in c.src.iter().zip(&c.dst) {
        let (x, y) = (s.x, s.y);
        let w = p[6] * x + p[7] * y + 1.0;
        if w.abs() <= MIN_HOMOGENEOUS_W {
            return None;
        }
        let u = (p[0] * x + p[1] * y + p[2]) / w;
        let v = (p[3] * x + p[4] * y + p[5]) / w;
        let ju = Params::from_column_slice(&[x / w, y / w, 1.0 / w, 0.0, 0.0, 0.0, -u * x / w, -u * y / w]);
        let jv = Params::from_column_slice(&[0.0, 0.0, 0.0, x / w, y / w, 1.0 / w, -v * x / w, -v * y / w]);
        jtj += ju * ju.transpose() + jv * jv.transpose();
        jtr += ju * (u - d.x) + jv * (v - d.y);
    }
    Some((jtj, jtr))
}

/// Levenberg-Marquardt refinement of the geometric reprojection error with
/// `m[2][2]` held at 1. Only steps that lower the error are accepted, so the
/// result never has a larger sum of squares than `h`.
pub fn refine_homography(h: &Homography, c: &Correspondences) -> Refinement {
    let n = c.len() as f64;
    let mut params = params_of(h.matrix());
    let mut sse = sum_squared_error(&matrix_of(&params), c).unwrap_or(f64::INFINITY);
    let mut lambda = LM_INITIAL_DAMPING;
    let mut iterations = 0;
    let mut converged = false;
    let mut system = normal_equations(&params, c);

    while iterations < LM_MAX_ITERATIONS {
        if (sse / n).sqrt() < LM_RMSE_FLOOR {
            converged = true;
            break;
        }
        let Some((jtj, jtr)) = system else { break };
        iterations += 1;

        let mut damped = jtj;
        let scale = jtj.diagonal().max().max(f64::MIN_POSITIVE);
        for i in 0..8 {
            damped[(i, i)] += lambda * jtj[(i, i)].max(1e-12 * scale);
        }
        let candidate = damped
            .cholesky()
            .map(|ch| params - ch.solve(&jtr))
            .filter(|p| p.iter().all(|v| v.is_finite()));
        let candidate_sse = candidate.as_ref().and_then(|p| sum_squared_error(&matrix_of(p), c));

        match (candidate, candidate_sse) {
            (Some(p), Some(new_sse)) if new_sse < sse => {
                let relative = (sse - new_sse) / sse;
                params = p;
                sse = new_sse;
                lambda = (lambda / 10.0).max(1e-15);
                system = normal_equations(&params, c);
                if relative < LM_MIN_RELATIVE_IMPROVEMENT {
                    converged = true;
                    break;
                }
            }
            _ => {
                lambda *= 10.0;
                if lambda > LM_MAX_DAMPING {
                    converged = true;
                    break;
                }
            }
        }
    }

    let homography = Homography::with_correspondences(matrix_of(&params), c).unwrap_or_else(|_| h.clone());
    Refinement {
        homography,
        iterations,
        converged,
    }
}

/// DLT followed by LM refinement.
pub fn fit_homography(c: &Correspondences) -> Result<Homography, GeometryError> {
    let initial = estimate_homography(c)?;
    Ok(refine_homography(&initial, c).homography)
}

/// Inverse-warp `source` into the pixels of `target_mask`.
///
/// `h` maps target coordinates to source coordinates. Samples falling
/// outside the source, or at infinity, are written black. Pixels outside
/// the mask keep their value from `target`.
pub fn warp_region(source: &RgbImage, h: &Homography, target_mask: &Mask, target: &RgbImage) -> RgbImage {
    let mut out = target.clone();
    warp_into(source, h, target_mask, &mut out);
    out
}

fn warp_into(source: &RgbImage, h: &Homography, mask: &Mask, out: &mut RgbImage) {
    for (x, y) in mask.iter_set() {
        if x >= out.width() || y >= out.height() {
            continue;
        }
        let px = project(h.matrix(), Point2::new(x as f64, y as f64))
            .and_then(|q| sample_bilinear(source, q.x, q.y))
            .unwrap_or(BLACK);
        out.put_pixel(x, y, px);
    }
}

/// One region of a split registration: canvas-side keypoints, their
/// source-image counterparts, and the canvas mask to fill.
#[derive(Debug, Clone)]
pub struct WarpPart<'a> {
    pub name: String,
    pub target_points: Vec<Point2>,
    pub source_points: Vec<Point2>,
    pub mask: &'a Mask,
}

#[derive(Debug, Clone)]
pub struct PartOutcome {
    pub name: String,
    pub result: Result<Homography, GeometryError>,
}

#[derive(Debug, Clone)]
pub struct PartsWarp {
    pub image: RgbImage,
    pub parts: Vec<PartOutcome>,
}

/// Fit and warp each part independently. A part whose homography cannot be
/// fitted leaves its mask black and is reported; the others are unaffected.
pub fn warp_parts(source: &RgbImage, parts: &[WarpPart<'_>], target: &RgbImage) -> PartsWarp {
    let mut image = target.clone();
    let mut outcomes = Vec::with_capacity(parts.len());
    for part in parts {
        let result = Correspondences::new(part.target_points.clone(), part.source_points.clone()).and_then(|c| fit_homography(&c));
        match &result {
            Ok(h) => warp_into(source, h, part.mask, &mut image),
            Err(e) => {
                log::warn!("part {}: {e}", part.name);
                for (x, y) in part.mask.iter_set() {
                    if x < image.width() && y < image.height() {
                        image.put_pixel(x, y, BLACK);
                    }
                }
            }
        }
        outcomes.push(PartOutcome {
            name: part.name.clone(),
            result,
        });
    }
    PartsWarp { image, parts: outcomes }
}

/// Apply a raw matrix to a point; helper for building synthetic data.
pub fn project_with(m: &Matrix3<f64>, p: Point2) -> Option<Point2> {
    let v = m * Vector3::new(p.x, p.y, 1.0);
    (v.z.abs() > MIN_HOMOGENEOUS_W).then(|| Point2::new(v.x / v.z, v.y / v.z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;

    fn unit_square() -> Vec<Point2> {
        vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ]
    }

    #[test]
    fn identity_from_fixed_square() {
        let c = Correspondences::new(unit_square(), unit_square()).unwrap();
        let h = estimate_homography(&c).unwrap();
        assert!((h.matrix() - Matrix3::identity()).amax() < 1e-12);
        assert!(h.rmse() < 1e-12);
    }

    #[test]
    fn translated_square_gives_translation() {
        let dst: Vec<_> = unit_square().iter().map(|p| Point2::new(p.x + 10.0, p.y + 5.0)).collect();
        let c = Correspondences::new(unit_square(), dst).unwrap();
        let h = estimate_homography(&c).unwrap();
        let expected = Matrix3::new(1.0, 0.0, 10.0, 0.0, 1.0, 5.0, 0.0, 0.0, 1.0);
        assert!((h.matrix() - expected).amax() < 1e-10);
        assert!(h.rmse() < 1e-10);
    }

    #[test]
    fn three_points_are_insufficient() {
        let pts = unit_square()[..3].to_vec();
        assert_eq!(
            Correspondences::new(pts.clone(), pts).unwrap_err(),
            GeometryError::InsufficientPoints(3)
        );
    }

    #[test]
    fn collinear_points_are_degenerate() {
        let pts: Vec<_> = (0..6).map(|i| Point2::new(i as f64, 2.0 * i as f64)).collect();
        let c = Correspondences::new(pts.clone(), pts).unwrap();
        assert!(matches!(estimate_homography(&c), Err(GeometryError::DegenerateConfiguration(_))));

        let mut four = unit_square();
        four[2] = Point2::new(2.0, 0.0);
        let c = Correspondences::new(four.clone(), four).unwrap();
        assert!(matches!(estimate_homography(&c), Err(GeometryError::DegenerateConfiguration(_))));
    }

    #[test]
    fn projective_division() {
        assert_eq!(Homography::identity().apply(Point2::new(3.0, 7.0)).unwrap(), Point2::new(3.0, 7.0));
        assert_eq!(
            Homography::translation(10.0, 5.0).apply(Point2::new(0.0, 0.0)).unwrap(),
            Point2::new(10.0, 5.0)
        );
        // z = 0.01 * 100 + 1 = 2, so (100, 0) -> (50, 0).
        let h = Homography::from_matrix(Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.01, 0.0, 1.0)).unwrap();
        assert_eq!(h.apply(Point2::new(100.0, 0.0)).unwrap(), Point2::new(50.0, 0.0));
    }

    #[test]
    fn point_at_infinity() {
        let h = Homography::from_matrix(Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.01, 0.0, 1.0)).unwrap();
        assert_eq!(h.apply(Point2::new(-100.0, 3.0)), Err(GeometryError::PointAtInfinity));
    }

    #[test]
    fn refinement_keeps_exact_fit() {
        let src = vec![
            Point2::new(0.0, 0.0),
            Point2::new(40.0, 2.0),
            Point2::new(38.0, 50.0),
            Point2::new(-3.0, 45.0),
            Point2::new(20.0, 20.0),
        ];
        let m = Matrix3::new(1.1, 0.05, 3.0, -0.02, 0.9, 7.0, 1e-4, 2e-4, 1.0);
        let dst: Vec<_> = src.iter().map(|p| project_with(&m, *p).unwrap()).collect();
        let c = Correspondences::new(src, dst).unwrap();
        let h = estimate_homography(&c).unwrap();
        let r = refine_homography(&h, &c);
        assert!((r.homography.matrix() - h.matrix()).amax() < 1e-9);
        assert!(r.homography.sse(&c) <= h.sse(&c));
    }

    #[test]
    fn identity_warp_is_exact_and_scaled_warp_keeps_corners() {
        let src = RgbImage::from_fn(5, 4, |x, y| Rgb([x as u8 * 40, y as u8 * 60, 17]));
        let full = Mask::full(5, 4);
        let out = warp_region(&src, &Homography::identity(), &full, &RgbImage::new(5, 4));
        assert_eq!(out, src);

        // 2x2 checkerboard pulled onto 4x4 by halving target coordinates.
        let board = RgbImage::from_fn(2, 2, |x, y| if (x + y) % 2 == 0 { Rgb([255, 255, 255]) } else { Rgb([0, 0, 0]) });
        let half = Homography::from_matrix(Matrix3::new(0.5, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 1.0)).unwrap();
        let out = warp_region(&board, &half, &Mask::full(4, 4), &RgbImage::new(4, 4));
        assert_eq!(out.get_pixel(0, 0), board.get_pixel(0, 0));
        assert_eq!(out.get_pixel(3, 0), board.get_pixel(1, 0));
        assert_eq!(out.get_pixel(0, 3), board.get_pixel(0, 1));
        assert_eq!(out.get_pixel(3, 3), board.get_pixel(1, 1));
        // Target (1, 0) samples source (0.5, 0): even blend of white and black.
        assert_eq!(out.get_pixel(1, 0), &Rgb([128, 128, 128]));
        // Target (1, 1) samples the center of all four: two white, two black.
        assert_eq!(out.get_pixel(1, 1), &Rgb([128, 128, 128]));
    }

    #[test]
    fn warp_leaves_unmasked_pixels_and_blackens_outside() {
        let src = RgbImage::from_pixel(4, 4, Rgb([90, 90, 90]));
        let target = RgbImage::from_pixel(6, 6, Rgb([1, 2, 3]));
        let mut mask = Mask::new(6, 6);
        mask.fill_rect(&crate::raster::Rect::new(0, 0, 6, 3));
        let out = warp_region(&src, &Homography::identity(), &mask, &target);
        assert_eq!(out.get_pixel(2, 2), &Rgb([90, 90, 90]));
        assert_eq!(out.get_pixel(5, 0), &Rgb([0, 0, 0]));
        assert_eq!(out.get_pixel(2, 4), &Rgb([1, 2, 3]));
    }
}
