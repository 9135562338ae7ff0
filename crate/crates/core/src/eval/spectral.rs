use rand::Rng as _;
use rayon::prelude::*;

use crate::error::{GapError, Result};
use crate::graph::Graph;
use crate::loss::HardAssignment;
use crate::numeric::{symmetric_eigs, Matrix, Which};
use crate::rng::{mix_seed, seeded};

pub const KMEANS_RESTARTS: usize = 20;
const KMEANS_MAX_ITERS: usize = 300;

/// Spectral clustering on the unnormalized Laplacian `L = D − A`.
///
/// When the graph has at least `parts` connected components, whole
/// components are packed into partitions (largest component into the
/// currently smallest partition), which already gives a zero cut. Otherwise
/// nodes are embedded with the `parts` eigenvectors of smallest eigenvalue
/// and clustered with k-means.
pub fn spectral_partition(g: &Graph, parts: usize, seed: u64) -> Result<HardAssignment> {
    let n = g.num_nodes();
    if parts < 1 || parts > n {
        return Err(GapError::InvalidArgument(format!(
            "spectral partition needs 1 <= g <= n (g = {parts}, n = {n})"
        )));
    }
    let comp = g.connected_components();
    let num_comp = comp.iter().copied().max().map_or(0, |c| c + 1);
    if num_comp >= parts {
        return HardAssignment::new(pack_components(&comp, num_comp, parts), parts);
    }
    let pairs = symmetric_eigs(&g.laplacian(), parts, Which::Smallest, seed)?;
    let mut emb = Matrix::zeros(n, parts);
    for (c, p) in pairs.iter().enumerate() {
        for (r, &v) in p.vector.iter().enumerate() {
            emb.set(r, c, v);
        }
    }
    HardAssignment::new(kmeans(&emb, parts, KMEANS_RESTARTS, seed)?, parts)
}

fn pack_components(comp: &[usize], num_comp: usize, parts: usize) -> Vec<usize> {
    let mut sizes = vec![0usize; num_comp];
    for &c in comp {
        sizes[c] += 1;
    }
    let mut order: Vec<usize> = (0..num_comp).collect();
    order.sort_by_key(|&c| (std::cmp::Reverse(sizes[c]), c));
    let mut load = vec![0usize; parts];
    let mut bin = vec![0usize; num_comp];
    for c in order {
        let k = (0..parts).min_by_key(|&k| (load[k], k)).unwrap();
        bin[c] = k;
        load[k] += sizes[c];
    }
    comp.iter().map(|&c| bin[c]).collect()
}

/// Lloyd's k-means with k-means++ seeding, best of `restarts` runs by
/// inertia. Each restart draws from its own seeded stream, so the result
/// depends only on `seed`.
pub fn kmeans(points: &Matrix, k: usize, restarts: usize, seed: u64) -> Result<Vec<usize>> {
    let n = points.rows();
    if k == 0 || k > n {
        return Err(GapError::InvalidArgument(format!("k-means needs 1 <= k <= n (k = {k}, n = {n})")));
    }
    let runs: Vec<(f64, Vec<usize>)> = (0..restarts.max(1))
        .into_par_iter()
        .map(|r| kmeans_once(points, k, mix_seed(&[seed, r as u64])))
        .collect();
    let best = runs
        .into_iter()
        .reduce(|a, b| if b.0 < a.0 { b } else { a })
        .unwrap();
    Ok(best.1)
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn kmeans_once(points: &Matrix, k: usize, seed: u64) -> (f64, Vec<usize>) {
    let n = points.rows();
    let d = points.cols();
    let mut rng = seeded(seed);
    let mut centers = Matrix::zeros(k, d);
    centers.row_mut(0).copy_from_slice(points.row(rng.random_range(0..n)));
    let mut nearest: Vec<f64> = (0..n).map(|i| dist2(points.row(i), centers.row(0))).collect();
    for c in 1..k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut t = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in nearest.iter().enumerate() {
                if t < w {
                    pick = i;
                    break;
                }
                t -= w;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centers.row_mut(c).copy_from_slice(points.row(pick));
        for (i, slot) in nearest.iter_mut().enumerate() {
            *slot = slot.min(dist2(points.row(i), centers.row(c)));
        }
    }

    let mut labels = vec![usize::MAX; n];
    for _ in 0..KMEANS_MAX_ITERS {
        let mut changed = false;
        for (i, label) in labels.iter_mut().enumerate() {
            let p = points.row(i);
            let best = (0..k)
                .min_by(|&a, &b| dist2(p, centers.row(a)).total_cmp(&dist2(p, centers.row(b))))
                .unwrap();
            if *label != best {
                *label = best;
                changed = true;
            }
        }
        let mut counts = vec![0usize; k];
        let mut sums = Matrix::zeros(k, d);
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            for (s, &v) in sums.row_mut(l).iter_mut().zip(points.row(i)) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // reseed an empty cluster at the point worst served by its center
                let far = (0..n)
                    .max_by(|&a, &b| {
                        dist2(points.row(a), centers.row(labels[a]))
                            .total_cmp(&dist2(points.row(b), centers.row(labels[b])))
                    })
                    .unwrap();
                centers.row_mut(c).copy_from_slice(points.row(far));
                labels[far] = c;
                changed = true;
            } else {
                for (dst, &s) in centers.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *dst = s / counts[c] as f64;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let inertia = (0..n).map(|i| dist2(points.row(i), centers.row(labels[i]))).sum();
    (inertia, labels)
}

/// I.i.d. uniform labels.
pub fn random_partition(n: usize, parts: usize, seed: u64) -> Result<HardAssignment> {
    if parts == 0 {
        return Err(GapError::InvalidArgument("g must be positive".into()));
    }
    let mut rng = seeded(seed);
    HardAssignment::new((0..n).map(|_| rng.random_range(0..parts)).collect(), parts)
}
