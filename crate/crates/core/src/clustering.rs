//! K-means (Lloyd iterations, k-means++ seeding) and Dunn-index model
//! selection over encoded feature rows.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::FeatureMatrix;
use crate::rng::{derive_seed, SeededRng};
use crate::{Error, Result};

pub const DEFAULT_MAX_ITER: usize = 300;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

/// Index of the nearest centroid; ties go to the lowest index.
fn nearest(x: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, mu) in centroids.iter().enumerate() {
        let d = sq_dist(x, mu);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn check_k(data: &FeatureMatrix, k: usize) -> Result<()> {
    if k < 1 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if data.n_rows() == 0 {
        return Err(Error::EmptyInput);
    }
    if k > data.n_rows() {
        return Err(Error::TooFewRows {
            got: data.n_rows(),
            min: k,
        });
    }
    Ok(())
}

/// k-means++ seeding: the first centroid is a uniformly chosen row, each
/// later one is drawn with probability proportional to its squared distance
/// from the nearest centroid chosen so far. If every remaining row sits on a
/// chosen centroid, the draw falls back to a uniform pick among rows not yet
/// chosen.
pub fn kmeanspp_init(data: &FeatureMatrix, k: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    check_k(data, k)?;
    let n = data.n_rows();
    let mut rng = SeededRng::new(seed);
    let mut chosen = vec![false; n];
    let first = rng.below(n);
    chosen[first] = true;
    let mut centroids = vec![data.row(first).to_vec()];
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(data.row(i), &centroids[0])).collect();
    while centroids.len() < k {
        let pick = match rng.categorical(&d2) {
            Some(i) => i,
            None => {
                let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
                free[rng.below(free.len())]
            }
        };
        chosen[pick] = true;
        let mu = data.row(pick).to_vec();
        d2.par_iter_mut().enumerate().for_each(|(i, d)| {
            *d = d.min(sq_dist(data.row(i), &mu));
        });
        centroids.push(mu);
    }
    Ok(centroids)
}

/// Baseline seeding: `k` distinct rows chosen uniformly at random.
pub fn uniform_init(data: &FeatureMatrix, k: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    check_k(data, k)?;
    let mut rng = SeededRng::new(seed);
    let mut idx: Vec<usize> = (0..data.n_rows()).collect();
    // partial Fisher-Yates
    for i in 0..k {
        let j = i + rng.below(idx.len() - i);
        idx.swap(i, j);
    }
    Ok(idx[..k].iter().map(|&i| data.row(i).to_vec()).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    pub sse: f64,
    pub iterations: usize,
    pub converged: bool,
    /// SSE of the initial assignment followed by the SSE after every
    /// iteration.
    pub sse_trace: Vec<f64>,
}

/// Persisted form of a [`ClusterModel`]; assignments are stored separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModelJson {
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    pub sse: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl ClusterModel {
    pub fn to_json(&self) -> ClusterModelJson {
        ClusterModelJson {
            k: self.k,
            centroids: self.centroids.clone(),
            sse: self.sse,
            iterations: self.iterations,
            converged: self.converged,
        }
    }

    /// Rebuilds a model from its JSON record and the rows it was fitted on.
    pub fn from_json(json: &ClusterModelJson, data: &FeatureMatrix) -> Result<Self> {
        if json.centroids.len() != json.k || json.k == 0 {
            return Err(Error::DimensionMismatch {
                expected: json.k,
                got: json.centroids.len(),
            });
        }
        let assignments = assign(data, &json.centroids)?;
        let sse = sse_of(data, &json.centroids, &assignments);
        Ok(Self {
            k: json.k,
            centroids: json.centroids.clone(),
            assignments,
            sse,
            iterations: json.iterations,
            converged: json.converged,
            sse_trace: vec![sse],
        })
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

/// Nearest-centroid label of every row (parallel over rows).
pub fn assign(data: &FeatureMatrix, centroids: &[Vec<f64>]) -> Result<Vec<usize>> {
    if centroids.is_empty() {
        return Err(Error::InvalidParameter("no centroids".into()));
    }
    for mu in centroids {
        if mu.len() != data.n_cols() {
            return Err(Error::DimensionMismatch {
                expected: data.n_cols(),
                got: mu.len(),
            });
        }
    }
    Ok((0..data.n_rows())
        .into_par_iter()
        .map(|i| nearest(data.row(i), centroids).0)
        .collect())
}

/// Sum of squared distances to assigned centroids, accumulated in row order.
pub fn sse_of(data: &FeatureMatrix, centroids: &[Vec<f64>], assignments: &[usize]) -> f64 {
    let per_row: Vec<f64> = (0..data.n_rows())
        .into_par_iter()
        .map(|i| sq_dist(data.row(i), &centroids[assignments[i]]))
        .collect();
    per_row.iter().sum()
}

/// Cluster means, summed per cluster in row order. Empty clusters keep their
/// previous centroid.
fn means(data: &FeatureMatrix, assignments: &[usize], previous: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<usize>) {
    let k = previous.len();
    let mut sums = vec![vec![0.0; data.n_cols()]; k];
    let mut counts = vec![0usize; k];
    for (i, &a) in assignments.iter().enumerate() {
        counts[a] += 1;
        for (s, x) in sums[a].iter_mut().zip(data.row(i)) {
            *s += x;
        }
    }
    for c in 0..k {
        if counts[c] == 0 {
            sums[c].clone_from(&previous[c]);
        } else {
            let n = counts[c] as f64;
            sums[c].iter_mut().for_each(|s| *s /= n);
        }
    }
    (sums, counts)
}

/// Moves, for every empty cluster, the row farthest from its own centroid
/// (taken only from clusters that keep at least one other member) into the
/// empty cluster and centres that cluster on it.
fn repair_empty(data: &FeatureMatrix, assignments: &mut [usize], centroids: &mut [Vec<f64>], counts: &mut [usize]) {
    for c in 0..centroids.len() {
        if counts[c] > 0 {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for (i, &a) in assignments.iter().enumerate() {
            if counts[a] < 2 {
                continue;
            }
            let d = sq_dist(data.row(i), &centroids[a]);
            if best.is_none_or(|(_, bd)| d > bd) {
                best = Some((i, d));
            }
        }
        let Some((i, _)) = best else { return };
        let from = assignments[i];
        assignments[i] = c;
        counts[from] -= 1;
        counts[c] = 1;
        centroids[c] = data.row(i).to_vec();
        // recentre the donor on its remaining members
        let mut sum = vec![0.0; data.n_cols()];
        for (j, &a) in assignments.iter().enumerate() {
            if a == from {
                for (s, x) in sum.iter_mut().zip(data.row(j)) {
                    *s += x;
                }
            }
        }
        let n = counts[from] as f64;
        centroids[from] = sum.into_iter().map(|s| s / n).collect();
    }
}

/// Lloyd iterations from the given centroids. Stops when the assignment no
/// longer changes, when no centroid moves by more than `tol`, or after
/// `max_iter` iterations.
pub fn lloyd(data: &FeatureMatrix, centroids: &[Vec<f64>], max_iter: usize, tol: f64) -> Result<ClusterModel> {
    if max_iter < 1 {
        return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
    }
    if !(tol >= 0.0) {
        return Err(Error::InvalidParameter("tol must be non-negative".into()));
    }
    let k = centroids.len();
    check_k(data, k)?;
    let mut centroids = centroids.to_vec();
    let mut assignments = assign(data, &centroids)?;
    let mut trace = vec![sse_of(data, &centroids, &assignments)];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let (mut next, mut counts) = means(data, &assignments, &centroids);
        repair_empty(data, &mut assignments, &mut next, &mut counts);
        let shift = centroids.iter().zip(&next).map(|(a, b)| dist(a, b)).fold(0.0, f64::max);
        centroids = next;
        let reassigned = assign(data, &centroids)?;
        let unchanged = reassigned == assignments;
        assignments = reassigned;
        trace.push(sse_of(data, &centroids, &assignments));
        if unchanged || shift <= tol {
            converged = true;
            break;
        }
    }
    Ok(ClusterModel {
        k,
        centroids,
        assignments,
        sse: *trace.last().expect("trace is never empty"),
        iterations,
        converged,
        sse_trace: trace,
    })
}

/// k-means++ seeding followed by Lloyd iterations.
pub fn kmeans(data: &FeatureMatrix, k: usize, seed: u64, max_iter: usize, tol: f64) -> Result<ClusterModel> {
    let init = kmeanspp_init(data, k, seed)?;
    lloyd(data, &init, max_iter, tol)
}

/// Dunn index: smallest single-linkage distance between two clusters over
/// the largest cluster diameter. Returns `+inf` when every diameter is zero.
///
/// Rows that coincide and share a cluster contribute identical distances, so
/// the pairwise scan runs over distinct `(row, cluster)` pairs only.
pub fn dunn_index(data: &FeatureMatrix, model: &ClusterModel) -> Result<f64> {
    if model.k < 2 {
        return Err(Error::InvalidParameter("Dunn index needs k >= 2".into()));
    }
    if model.assignments.len() != data.n_rows() {
        return Err(Error::DimensionMismatch {
            expected: data.n_rows(),
            got: model.assignments.len(),
        });
    }
    if let Some(c) = model.cluster_sizes().iter().position(|&s| s == 0) {
        return Err(Error::EmptyCluster(c));
    }
    let mut keyed: Vec<(usize, Vec<u64>, usize)> = (0..data.n_rows())
        .map(|i| {
            (
                model.assignments[i],
                data.row(i).iter().map(|x| x.to_bits()).collect(),
                i,
            )
        })
        .collect();
    keyed.sort_unstable();
    keyed.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1);
    let reps: Vec<(usize, &[f64])> = keyed.iter().map(|(c, _, i)| (*c, data.row(*i))).collect();

    let (min_inter, max_diam) = (0..reps.len())
        .into_par_iter()
        .map(|a| {
            let (ca, xa) = reps[a];
            let mut lo = f64::INFINITY;
            let mut hi = 0.0f64;
            for &(cb, xb) in &reps[a + 1..] {
                let d = dist(xa, xb);
                if ca == cb {
                    hi = hi.max(d);
                } else {
                    lo = lo.min(d);
                }
            }
            (lo, hi)
        })
        .reduce(|| (f64::INFINITY, 0.0), |x, y| (x.0.min(y.0), x.1.max(y.1)));
    if max_diam == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(min_inter / max_diam)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSelection {
    pub k_min: usize,
    pub k_max: usize,
    /// Dunn score per k in `k_min..=k_max`; `-inf` marks a k whose
    /// clustering left a cluster empty.
    pub scores: Vec<f64>,
    pub chosen_k: usize,
}

impl KSelection {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,dunn\n");
        for (k, s) in (self.k_min..).zip(&self.scores) {
            out.push_str(&format!("{k},{s:?}\n"));
        }
        out
    }
}

/// Seed used for the clustering at `k` inside [`select_k`].
pub fn seed_for_k(seed: u64, k: usize) -> u64 {
    derive_seed(seed, k as u64)
}

/// Scans `k_min..=k_max`, clustering each k from its own derived seed, and
/// picks the k with the largest Dunn index (ties go to the smaller k).
pub fn select_k(data: &FeatureMatrix, k_min: usize, k_max: usize, seed: u64) -> Result<KSelection> {
    if k_min < 2 || k_min > k_max || k_max > data.n_rows() {
        return Err(Error::InvalidParameter(format!(
            "need 2 <= k_min <= k_max <= n_rows, got k_min={k_min}, k_max={k_max}, n_rows={}",
            data.n_rows()
        )));
    }
    let mut scores = Vec::with_capacity(k_max - k_min + 1);
    for k in k_min..=k_max {
        let model = kmeans(data, k, seed_for_k(seed, k), DEFAULT_MAX_ITER, 0.0)?;
        let score = match dunn_index(data, &model) {
            Ok(s) => s,
            Err(Error::EmptyCluster(_)) => f64::NEG_INFINITY,
            Err(e) => return Err(e),
        };
        scores.push(score);
    }
    let mut chosen = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[chosen] {
            chosen = i;
        }
    }
    Ok(KSelection {
        k_min,
        k_max,
        scores,
        chosen_k: k_min + chosen,
    })
}

pub fn labels_to_csv(labels: &[usize]) -> String {
    let mut out = String::from("cluster\n");
    for l in labels {
        out.push_str(&format!("{l}\n"));
    }
    out
}

pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("cluster") {
        return Err(Error::Format {
            row: 1,
            msg: "expected a `cluster` header".into(),
        });
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim().parse().map_err(|_| Error::Format {
                row: i + 2,
                msg: format!("bad cluster label `{l}`"),
            })
        })
        .collect()
}
