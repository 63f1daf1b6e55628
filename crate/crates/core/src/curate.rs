//! Similarity-diversity curation over a precomputed distance matrix:
//! DBSCAN, a deduplication round, a grouping round, and per-cluster
//! train/test sampling.

use std::cmp::Ordering;
use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::DistanceMatrix;

pub const NOISE: i64 = -1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CurateError {
    #[error("{ids} image ids but the distance matrix covers {matrix} items")]
    IndexMismatch { ids: usize, matrix: usize },
    #[error("asked for {n} items from a corpus of {available}")]
    NTooLarge { n: usize, available: usize },
    #[error("invalid clustering parameters: {0}")]
    InvalidParameters(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterAssignment {
    pub labels: Vec<i64>,
    pub eps: f64,
    pub min_pts: usize,
}

impl ClusterAssignment {
    pub fn cluster_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l >= 0).map(|&l| l as usize + 1).max().unwrap_or(0)
    }

    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == NOISE).count()
    }

    /// Member indices of each cluster, ascending.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.cluster_count()];
        for (i, &l) in self.labels.iter().enumerate() {
            if l >= 0 {
                out[l as usize].push(i);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurateParams {
    pub eps_dedup: f64,
    pub eps_group: f64,
    pub min_pts: usize,
    pub per_cluster: usize,
    pub train_k: usize,
    pub test_k: usize,
    pub keep_noise_singletons: bool,
}

impl Default for CurateParams {
    fn default() -> Self {
        Self {
            eps_dedup: 0.4,
            eps_group: 0.5,
            min_pts: 2,
            per_cluster: 7,
            train_k: 5,
            test_k: 2,
            keep_noise_singletons: false,
        }
    }
}

fn check_params(eps: f64, min_pts: usize) -> Result<(), CurateError> {
    if eps.is_nan() || eps <= 0.0 || eps.is_infinite() {
        return Err(CurateError::InvalidParameters(format!("eps must be positive, got {eps}")));
    }
    if min_pts < 1 {
        return Err(CurateError::InvalidParameters("min_pts must be at least 1".into()));
    }
    Ok(())
}

/// DBSCAN on a precomputed metric. Neighborhoods are closed balls and count
/// the point itself. Clusters are numbered in order of their lowest core
/// point; a border point joins the first cluster to reach it.
pub fn dbscan(d: &DistanceMatrix, eps: f64, min_pts: usize) -> Result<ClusterAssignment, CurateError> {
    check_params(eps, min_pts)?;
    let n = d.len();
    let neighbors: Vec<Vec<usize>> = (0..n).map(|i| (0..n).filter(|&j| d.get(i, j) <= eps).collect()).collect();
    let core: Vec<bool> = neighbors.iter().map(|nb| nb.len() >= min_pts).collect();

    let mut labels: Vec<Option<i64>> = vec![None; n];
    let mut next = 0i64;
    let mut queue = VecDeque::new();
    for start in 0..n {
        if labels[start].is_some() || !core[start] {
            continue;
        }
        labels[start] = Some(next);
        queue.push_back(start);
        while let Some(p) = queue.pop_front() {
            for &q in &neighbors[p] {
                if labels[q].is_none() {
                    labels[q] = Some(next);
                    if core[q] {
                        queue.push_back(q);
                    }
                }
            }
        }
        next += 1;
    }
    Ok(ClusterAssignment {
        labels: labels.into_iter().map(|l| l.unwrap_or(NOISE)).collect(),
        eps,
        min_pts,
    })
}

fn check_ids(ids: &[String], d: &DistanceMatrix) -> Result<(), CurateError> {
    if ids.len() != d.len() {
        return Err(CurateError::IndexMismatch {
            ids: ids.len(),
            matrix: d.len(),
        });
    }
    Ok(())
}

/// Member minimizing the summed distance to the others; ties by image id.
pub fn medoid(members: &[usize], ids: &[String], d: &DistanceMatrix) -> usize {
    let cost = |i: usize| members.iter().map(|&j| d.get(i, j)).sum::<f64>();
    *members
        .iter()
        .min_by(|&&a, &&b| cost(a).total_cmp(&cost(b)).then_with(|| ids[a].cmp(&ids[b])))
        .expect("nonempty cluster")
}

/// First round: keep each cluster's medoid and every noise item. Returns
/// surviving indices in ascending order.
pub fn deduplicate(ids: &[String], d: &DistanceMatrix, eps: f64, min_pts: usize) -> Result<Vec<usize>, CurateError> {
    check_ids(ids, d)?;
    let assignment = dbscan(d, eps, min_pts)?;
    let mut keep: Vec<usize> = assignment
        .labels
        .iter()
        .enumerate()
        .filter(|(_, &l)| l == NOISE)
        .map(|(i, _)| i)
        .collect();
    keep.extend(assignment.clusters().iter().map(|m| medoid(m, ids, d)));
    keep.sort_unstable();
    Ok(keep)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanCluster {
    pub cluster_id: usize,
    pub members: Vec<String>,
    pub selected: Vec<String>,
    pub train: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CurationPlan {
    pub clusters: Vec<PlanCluster>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlanTotals {
    pub selected: usize,
    pub train: usize,
    pub test: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl CurationPlan {
    pub fn totals(&self) -> PlanTotals {
        self.clusters.iter().fold(
            PlanTotals {
                selected: 0,
                train: 0,
                test: 0,
            },
            |t, c| PlanTotals {
                selected: t.selected + c.selected.len(),
                train: t.train + c.train.len(),
                test: t.test + c.test.len(),
            },
        )
    }

    /// Every selected image with its cluster and split, in plan order.
    pub fn assignments(&self) -> Vec<(String, usize, Split)> {
        let mut out = Vec::new();
        for c in &self.clusters {
            out.extend(c.train.iter().map(|id| (id.clone(), c.cluster_id, Split::Train)));
            out.extend(c.test.iter().map(|id| (id.clone(), c.cluster_id, Split::Test)));
        }
        out
    }

    pub fn to_jsonl(&self) -> String {
        self.clusters
            .iter()
            .map(|c| serde_json::to_string(c).expect("plan serializes") + "\n")
            .collect()
    }

    pub fn from_jsonl(text: &str) -> Result<Self, serde_json::Error> {
        let clusters = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<_, _>>()?;
        Ok(Self { clusters })
    }
}

fn split_cluster(cluster_id: usize, members: Vec<String>, params: &CurateParams) -> PlanCluster {
    let selected: Vec<String> = members.iter().take(params.per_cluster).cloned().collect();
    let train: Vec<String> = selected.iter().take(params.train_k).cloned().collect();
    let test: Vec<String> = selected.iter().skip(train.len()).take(params.test_k).cloned().collect();
    PlanCluster {
        cluster_id,
        members,
        selected,
        train,
        test,
    }
}

/// Second round over the survivors: cluster, order members by distance to
/// the medoid, select and split. Round-two noise is dropped unless
/// `keep_noise_singletons` is set.
pub fn build_plan(ids: &[String], d: &DistanceMatrix, survivors: &[usize], params: &CurateParams) -> Result<CurationPlan, CurateError> {
    check_ids(ids, d)?;
    let sub = d.submatrix(survivors);
    let sub_ids: Vec<String> = survivors.iter().map(|&i| ids[i].clone()).collect();
    let assignment = dbscan(&sub, params.eps_group, params.min_pts)?;
    let mut clusters = Vec::new();
    for members in assignment.clusters() {
        let m = medoid(&members, &sub_ids, &sub);
        let mut ordered = members.clone();
        ordered.sort_by(|&a, &b| {
            (a != m)
                .cmp(&(b != m))
                .then(sub.get(m, a).partial_cmp(&sub.get(m, b)).unwrap_or(Ordering::Equal))
                .then_with(|| sub_ids[a].cmp(&sub_ids[b]))
        });
        let names = ordered.into_iter().map(|i| sub_ids[i].clone()).collect();
        clusters.push(split_cluster(clusters.len(), names, params));
    }
    if params.keep_noise_singletons {
        for (i, &l) in assignment.labels.iter().enumerate() {
            if l == NOISE {
                clusters.push(split_cluster(clusters.len(), vec![sub_ids[i].clone()], params));
            }
        }
    }
    Ok(CurationPlan { clusters })
}

/// Both rounds.
pub fn curate(ids: &[String], d: &DistanceMatrix, params: &CurateParams) -> Result<CurationPlan, CurateError> {
    let survivors = deduplicate(ids, d, params.eps_dedup, params.min_pts)?;
    build_plan(ids, d, &survivors, params)
}

/// Baseline: `n` items drawn uniformly without replacement, each its own
/// training cluster.
pub fn random_plan<R: Rng + ?Sized>(ids: &[String], n: usize, rng: &mut R) -> Result<CurationPlan, CurateError> {
    if n > ids.len() {
        return Err(CurateError::NTooLarge { n, available: ids.len() });
    }
    let clusters = rand::seq::index::sample(rng, ids.len(), n)
        .into_iter()
        .enumerate()
        .map(|(k, i)| PlanCluster {
            cluster_id: k,
            members: vec![ids[i].clone()],
            selected: vec![ids[i].clone()],
            train: vec![ids[i].clone()],
            test: vec![],
        })
        .collect();
    Ok(CurationPlan { clusters })
}
