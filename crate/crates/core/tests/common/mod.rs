//! Slow reference implementations shared by the oracle and acceptance tests.
#![allow(dead_code)]

use evas_core::clustering::{DistMatrix, Label};
use evas_core::LumaPlane;

/// DBSCAN by definition: clusters are connected components of core points,
/// numbered by their smallest core index; a border point joins the
/// lowest-numbered cluster among its core neighbours.
pub fn brute_dbscan(m: &DistMatrix, eps: f64, min_pts: usize) -> Vec<Label> {
    let n = m.n;
    let near = |i: usize, j: usize| m.get(i, j) <= eps;
    let core: Vec<bool> = (0..n).map(|i| (0..n).filter(|&j| near(i, j)).count() >= min_pts).collect();

    // Union-find over core-core edges.
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for i in 0..n {
        for j in 0..n {
            if core[i] && core[j] && near(i, j) {
                let (a, b) = (root(&mut parent, i), root(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut id = vec![usize::MAX; n];
    let mut next = 0;
    for i in 0..n {
        if core[i] {
            let r = root(&mut parent, i);
            if id[r] == usize::MAX {
                id[r] = next;
                next += 1;
            }
            id[i] = id[r];
        }
    }
    (0..n)
        .map(|i| {
            if core[i] {
                Label::Cluster(id[i])
            } else {
                (0..n)
                    .filter(|&j| core[j] && near(i, j))
                    .map(|j| id[j])
                    .min()
                    .map_or(Label::Noise, Label::Cluster)
            }
        })
        .collect()
}

/// SSIM by direct summation over each 11×11 Gaussian window.
pub fn brute_ssim(a: &LumaPlane, b: &LumaPlane) -> f64 {
    let g: Vec<f64> = (0..11).map(|i| (-((i as f64 - 5.0).powi(2)) / (2.0 * 1.5 * 1.5)).exp()).collect();
    let gs: f64 = g.iter().sum();
    let (c1, c2) = ((0.01 * 255.0f64).powi(2), (0.03 * 255.0f64).powi(2));
    let mut total = 0.0;
    let mut count = 0;
    for y0 in 0..=a.height - 11 {
        for x0 in 0..=a.width - 11 {
            let (mut ma, mut mb) = (0.0, 0.0);
            for dy in 0..11 {
                for dx in 0..11 {
                    let w = g[dx] * g[dy] / (gs * gs);
                    ma += w * a.at(x0 + dx, y0 + dy);
                    mb += w * b.at(x0 + dx, y0 + dy);
                }
            }
            let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
            for dy in 0..11 {
                for dx in 0..11 {
                    let w = g[dx] * g[dy] / (gs * gs);
                    let (da, db) = (a.at(x0 + dx, y0 + dy) - ma, b.at(x0 + dx, y0 + dy) - mb);
                    va += w * da * da;
                    vb += w * db * db;
                    cov += w * da * db;
                }
            }
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    total / count as f64
}
