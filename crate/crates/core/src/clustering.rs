//! Multicast grouping of viewers.
//!
//! Each viewer contributes a view direction `P` on the unit sphere and a
//! head-motion vector `V = dP/dt`. Pairwise position and motion distances
//! are max-normalized, blended with weight `ω`, and clustered with DBSCAN on
//! the precomputed matrix. A cluster's center is the renormalized mean of
//! its members' directions.

use std::collections::VecDeque;

use thiserror::Error;

use crate::geometry::{UnitVec3, Viewport};
use crate::prediction::Trace;

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("matrix sizes differ: {0} vs {1}")]
    SizeMismatch(usize, usize),
    #[error("motion window [{start}, {end}] is not covered by the trace")]
    OutsideTrace { start: f64, end: f64 },
    #[error("invalid clustering parameter: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterConfig {
    pub eps: f64,
    pub min_pts: usize,
    /// Weight of the position distance; `1 − omega` goes to motion.
    pub omega: f64,
    /// Finite-difference interval for motion vectors, seconds.
    pub motion_dt: f64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            eps: 0.15,
            min_pts: 2,
            omega: 0.8,
            motion_dt: 1.0 / 30.0,
        }
    }
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<(), ClusterError> {
        if !(self.eps > 0.0) {
            return Err(ClusterError::Config(format!("eps must be > 0, got {}", self.eps)));
        }
        if self.min_pts < 1 {
            return Err(ClusterError::Config("min_pts must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.omega) {
            return Err(ClusterError::Config(format!("omega must be in [0, 1], got {}", self.omega)));
        }
        if !(self.motion_dt > 0.0) {
            return Err(ClusterError::Config(format!("motion_dt must be > 0, got {}", self.motion_dt)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserState {
    pub user_id: String,
    pub position: UnitVec3,
    /// Per second.
    pub motion: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Noise,
    Cluster(usize),
}

impl Label {
    pub fn cluster(&self) -> Option<usize> {
        match self {
            Label::Cluster(c) => Some(*c),
            Label::Noise => None,
        }
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Label::Noise => f.write_str("noise"),
            Label::Cluster(c) => write!(f, "{c}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    pub labels: Vec<Label>,
    pub centers: Vec<Viewport>,
}

impl ClusterAssignment {
    pub fn k(&self) -> usize {
        self.centers.len()
    }

    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|l| **l == Label::Noise).count()
    }

    pub fn members(&self, cluster: usize) -> impl Iterator<Item = usize> + '_ {
        self.labels
            .iter()
            .enumerate()
            .filter(move |(_, l)| **l == Label::Cluster(cluster))
            .map(|(i, _)| i)
    }
}

/// Square symmetric matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DistMatrix {
    pub n: usize,
    pub data: Vec<f64>,
}

impl DistMatrix {
    pub fn zeros(n: usize) -> Self {
        DistMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i + 1..n {
                let d = f(i, j);
                m.data[i * n + j] = d;
                m.data[j * n + i] = d;
            }
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    pub fn scaled(&self, c: f64) -> Self {
        DistMatrix {
            n: self.n,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    /// Divides by the largest entry; an all-zero matrix is returned as is.
    pub fn max_normalized(&self) -> Self {
        let m = self.max();
        if m > 0.0 {
            self.scaled(1.0 / m)
        } else {
            self.clone()
        }
    }
}

pub fn viewport_to_point(vp: &Viewport) -> UnitVec3 {
    vp.direction()
}

/// `(P(t) − P(t−δ))/δ` from the trace's interpolated viewports.
pub fn motion_vector(trace: &Trace, t: f64, dt: f64) -> Result<[f64; 3], ClusterError> {
    let outside = || ClusterError::OutsideTrace { start: t - dt, end: t };
    let now = trace.viewport_at(t).ok_or_else(outside)?;
    let before = trace.viewport_at(t - dt).ok_or_else(outside)?;
    Ok(finite_motion(&before, &now, dt))
}

/// Motion between two viewports sampled `dt` seconds apart.
pub fn finite_motion(before: &Viewport, now: &Viewport, dt: f64) -> [f64; 3] {
    let (a, b) = (before.direction(), now.direction());
    [(b.x - a.x) / dt, (b.y - a.y) / dt, (b.z - a.z) / dt]
}

fn dist3(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Pairwise position distances `MP` and motion distances `MV`.
pub fn distance_matrices(users: &[UserState]) -> (DistMatrix, DistMatrix) {
    let n = users.len();
    let mp = DistMatrix::from_fn(n, |i, j| dist3(users[i].position.as_array(), users[j].position.as_array()));
    let mv = DistMatrix::from_fn(n, |i, j| dist3(users[i].motion, users[j].motion));
    (mp, mv)
}

/// `ω·norm(MP) + (1−ω)·norm(MV)` with max-normalization.
pub fn combine(mp: &DistMatrix, mv: &DistMatrix, omega: f64) -> Result<DistMatrix, ClusterError> {
    if mp.n != mv.n {
        return Err(ClusterError::SizeMismatch(mp.n, mv.n));
    }
    let (np, nv) = (mp.max_normalized(), mv.max_normalized());
    let data = if omega == 1.0 {
        np.data
    } else if omega == 0.0 {
        nv.data
    } else {
        np.data
            .iter()
            .zip(&nv.data)
            .map(|(p, v)| omega * p + (1.0 - omega) * v)
            .collect()
    };
    Ok(DistMatrix { n: mp.n, data })
}

/// DBSCAN over a precomputed distance matrix.
///
/// A point is core when at least `min_pts` points (itself included) lie
/// within `eps`. Points are scanned in index order and each new cluster is
/// expanded breadth-first before the scan resumes, so a border point
/// reachable from several clusters joins the earliest-formed one.
pub fn dbscan(m: &DistMatrix, eps: f64, min_pts: usize) -> Vec<Label> {
    let n = m.n;
    let neighbors = |i: usize| -> Vec<usize> { (0..n).filter(|&j| m.get(i, j) <= eps).collect() };
    let mut labels: Vec<Option<Label>> = vec![None; n];
    let mut next = 0;
    for i in 0..n {
        if labels[i].is_some() {
            continue;
        }
        let seeds = neighbors(i);
        if seeds.len() < min_pts {
            labels[i] = Some(Label::Noise);
            continue;
        }
        let c = Label::Cluster(next);
        next += 1;
        labels[i] = Some(c);
        let mut queue: VecDeque<usize> = seeds.into_iter().filter(|&j| j != i).collect();
        while let Some(j) = queue.pop_front() {
            match labels[j] {
                Some(Label::Noise) => labels[j] = Some(c),
                None => {
                    labels[j] = Some(c);
                    let nb = neighbors(j);
                    if nb.len() >= min_pts {
                        queue.extend(nb.into_iter().filter(|&q| matches!(labels[q], None | Some(Label::Noise))));
                    }
                }
                Some(Label::Cluster(_)) => {}
            }
        }
    }
    labels.into_iter().map(|l| l.unwrap_or(Label::Noise)).collect()
}

/// Mean member direction per cluster, renormalized; roll is zero. A mean
/// too close to zero falls back to the lowest-indexed member.
pub fn cluster_centers(labels: &[Label], users: &[UserState]) -> Vec<Viewport> {
    let k = labels.iter().filter_map(Label::cluster).map(|c| c + 1).max().unwrap_or(0);
    (0..k)
        .map(|c| {
            let members: Vec<&UserState> = labels
                .iter()
                .zip(users)
                .filter(|(l, _)| **l == Label::Cluster(c))
                .map(|(_, u)| u)
                .collect();
            let mut sum = [0.0; 3];
            for u in &members {
                sum[0] += u.position.x;
                sum[1] += u.position.y;
                sum[2] += u.position.z;
            }
            let len = (sum[0] * sum[0] + sum[1] * sum[1] + sum[2] * sum[2]).sqrt();
            let dir = if len > 1e-9 * members.len() as f64 {
                UnitVec3 {
                    x: sum[0] / len,
                    y: sum[1] / len,
                    z: sum[2] / len,
                }
            } else {
                members[0].position
            };
            dir.to_viewport()
        })
        .collect()
}

/// Full grouping step: distances, blend, DBSCAN, centers.
pub fn cluster_users(users: &[UserState], cfg: &ClusterConfig) -> Result<ClusterAssignment, ClusterError> {
    cfg.validate()?;
    let (mp, mv) = distance_matrices(users);
    let m = combine(&mp, &mv, cfg.omega)?;
    let labels = dbscan(&m, cfg.eps, cfg.min_pts);
    let centers = cluster_centers(&labels, users);
    Ok(ClusterAssignment { labels, centers })
}
