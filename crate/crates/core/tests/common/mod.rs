#![allow(dead_code)]

use std::path::PathBuf;

use clothclone::data::{FeatureMap, KeypointSchema};
use clothclone::Point2;
use nalgebra::Matrix3;
use rand::Rng;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn schema() -> KeypointSchema {
    KeypointSchema::default()
}

pub fn project(m: &Matrix3<f64>, p: Point2) -> Option<Point2> {
    let x = m[(0, 0)] * p.x + m[(0, 1)] * p.y + m[(0, 2)];
    let y = m[(1, 0)] * p.x + m[(1, 1)] * p.y + m[(1, 2)];
    let z = m[(2, 0)] * p.x + m[(2, 1)] * p.y + m[(2, 2)];
    (z.abs() > 1e-12).then(|| Point2::new(x / z, y / z))
}

/// Random homography with entries in U(-1, 1) and `m[2][2] = 1`, together
/// with `n` source points in the unit square that it maps finitely. Draws
/// are rejected until the matrix is well conditioned and every point keeps
/// |w| >= 0.25.
pub fn random_homography<R: Rng>(rng: &mut R, n: usize) -> (Matrix3<f64>, Vec<Point2>, Vec<Point2>) {
    loop {
        let mut m = Matrix3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        m[(2, 2)] = 1.0;
        let sv = m.singular_values();
        if sv.min() < 0.05 || sv.max() / sv.min() > 100.0 {
            continue;
        }
        let src: Vec<Point2> = (0..n)
            .map(|_| Point2::new(rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)))
            .collect();
        let ok = src.iter().all(|p| (m[(2, 0)] * p.x + m[(2, 1)] * p.y + 1.0).abs() >= 0.25);
        if !ok || has_near_collinear(&src) {
            continue;
        }
        let dst: Vec<Point2> = src.iter().map(|p| project(&m, *p).unwrap()).collect();
        if dst.iter().any(|p| p.x.abs() > 20.0 || p.y.abs() > 20.0) {
            continue;
        }
        return (m, src, dst);
    }
}

fn has_near_collinear(p: &[Point2]) -> bool {
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            for k in j + 1..p.len() {
                let cross = (p[j].x - p[i].x) * (p[k].y - p[i].y) - (p[j].y - p[i].y) * (p[k].x - p[i].x);
                if cross.abs() < 1e-3 {
                    return true;
                }
            }
        }
    }
    false
}

pub fn random_feature_map<R: Rng>(rng: &mut R, h: usize, w: usize, d: usize) -> FeatureMap {
    let values = (0..h * w * d).map(|_| rng.random_range(0.0f32..1.0)).collect();
    FeatureMap::new(h, w, d, values).unwrap()
}

/// Naive ratio of one block: two-pass mean and unbiased std per channel.
pub fn naive_ratio(f: &FeatureMap, row: usize, col: usize, side: usize) -> f64 {
    let d = f.dim();
    let n = (side * side) as f64;
    let mut std_sum = 0.0;
    for c in 0..d {
        let vals: Vec<f64> = (row..row + side)
            .flat_map(|r| (col..col + side).map(move |k| (r, k)))
            .map(|(r, k)| f.at(r, k)[c] as f64)
            .collect();
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        std_sum += var.sqrt();
    }
    std_sum / d as f64 / n
}

/// Brute-force argmin: `(row, col, side)` under ratio, then larger side,
/// then smaller row, then smaller col.
pub fn naive_argmin(f: &FeatureMap, min_side: usize, max_side: usize) -> (usize, usize, usize) {
    let mut best: Option<(f64, usize, usize, usize)> = None;
    for side in (min_side..=max_side.min(f.height()).min(f.width())).rev() {
        for row in 0..=f.height() - side {
            for col in 0..=f.width() - side {
                let r = naive_ratio(f, row, col, side);
                let better = match best {
                    None => true,
                    Some((br, bs, brow, bcol)) => r < br || (r == br && (side > bs || (side == bs && (row, col) < (brow, bcol)))),
                };
                if better {
                    best = Some((r, side, row, col));
                }
            }
        }
    }
    let (_, side, row, col) = best.unwrap();
    (row, col, side)
}

/// Reference DBSCAN: core points from closed eps balls, clusters as the
/// connected components of core points (union-find), numbered by lowest
/// core index, border points attached to the lowest-numbered reaching
/// cluster.
pub fn naive_dbscan(d: &[Vec<f64>], eps: f64, min_pts: usize) -> Vec<i64> {
    let n = d.len();
    let core: Vec<bool> = (0..n).map(|i| (0..n).filter(|&j| d[i][j] <= eps).count() >= min_pts).collect();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut Vec<usize>, i: usize) -> usize {
        if p[i] != i {
            let r = find(p, p[i]);
            p[i] = r;
        }
        p[i]
    }
    for i in 0..n {
        for j in 0..n {
            if core[i] && core[j] && d[i][j] <= eps {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut labels = vec![-1i64; n];
    let mut ids = std::collections::BTreeMap::new();
    for i in 0..n {
        if core[i] {
            let root = find(&mut parent, i);
            let next = ids.len() as i64;
            labels[i] = *ids.entry(root).or_insert(next);
        }
    }
    for i in 0..n {
        if !core[i] {
            labels[i] = (0..n).filter(|&j| core[j] && d[i][j] <= eps).map(|j| labels[j]).min().unwrap_or(-1);
        }
    }
    labels
}

/// Planted-partition distances: items in the same group are close, others
/// far, plus a few bridging and stray items.
pub fn planted_matrix<R: Rng>(rng: &mut R, n: usize) -> Vec<Vec<f64>> {
    let groups: Vec<usize> = (0..n).map(|_| rng.random_range(0..(n / 4).max(2))).collect();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = if groups[i] == groups[j] {
                rng.random_range(0.05..0.55)
            } else {
                rng.random_range(0.35..1.0)
            };
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    d
}

pub fn flatten(d: &[Vec<f64>]) -> Vec<f64> {
    d.iter().flatten().copied().collect()
}
