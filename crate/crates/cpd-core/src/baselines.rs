//! Baseline decomposition methods used for comparisons: an HOSVD-style
//! initializer and a randomized-restart alternating least squares.
//!
//! Both treat the input as a general CP tensor with one factor matrix per
//! mode; pairwise-symmetric inputs simply get their duplicated modes
//! estimated independently.

use crate::error::{Error, Result};
use crate::ico::{check_init, sorted_estimate, FitTrace, StopReason, TraceEntry};
use crate::model::CPDecomposition;
use crate::rng::StreamRng;
use crate::spectral::{top_eigs_sym, top_left_singular, top_svd};
use crate::tensor::{dot, norm2, DenseTensor, Matrix};

const SOLVE_TOL: f64 = 1e-12;

/// Options for `als_randomized`.
#[derive(Debug, Clone)]
pub struct ALSConfig {
    /// Number of random rank-one restarts feeding the clustering step.
    pub restarts: usize,
    /// Power-iteration cycles per restart.
    pub power_iters: usize,
    /// Mean-mode |cosine| at or above which two candidates share a cluster.
    pub cluster_threshold: f64,
    /// Hard cap on refinement sweeps.
    pub max_sweeps: usize,
    /// Stop once the largest projector update in a sweep is at or below this.
    pub tolerance: f64,
}

impl Default for ALSConfig {
    fn default() -> Self {
        ALSConfig {
            restarts: 30,
            power_iters: 20,
            cluster_threshold: 0.9,
            max_sweeps: 50,
            tolerance: 1e-6,
        }
    }
}

impl ALSConfig {
    pub(crate) fn validate_refine(&self) -> Result<()> {
        if self.max_sweeps == 0 {
            return Err(Error::InvalidArgument(
                "at least one sweep is required".into(),
            ));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tolerance {} must be positive",
                self.tolerance
            )));
        }
        Ok(())
    }

    pub(crate) fn validate(&self, r: usize) -> Result<()> {
        self.validate_refine()?;
        if self.restarts < r {
            return Err(Error::InvalidArgument(format!(
                "{} restarts below the rank {r}",
                self.restarts
            )));
        }
        if self.power_iters == 0 {
            return Err(Error::InvalidArgument(
                "at least one power iteration is required".into(),
            ));
        }
        if !(self.cluster_threshold > 0.0 && self.cluster_threshold < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "cluster threshold {} outside (0,1)",
                self.cluster_threshold
            )));
        }
        Ok(())
    }
}

/// HOSVD-style initializer: per-mode top-r left singular vectors of the
/// mode unfoldings, with weights refit by least squares. Signs of negative
/// weights are pushed into the mode-1 factor.
pub fn hosvd_init(t: &DenseTensor, r: usize) -> Result<CPDecomposition> {
    let n = t.order();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "decomposition needs an order-2 or higher tensor, got order {n}"
        )));
    }
    let d_min = t.shape().iter().copied().min().unwrap_or(0);
    if r == 0 || r > d_min {
        return Err(Error::InvalidArgument(format!(
            "rank {r} outside 1..={d_min} for shape {:?}",
            t.shape()
        )));
    }
    let mut factors = Vec::with_capacity(n);
    for k in 1..=n {
        let svd = top_svd(&t.unfold(k)?, r, SOLVE_TOL)?;
        factors.push(svd.u);
    }
    let weights = fit_weights(t, &mut factors)?;
    sorted_estimate(weights, factors, false)
}

/// Randomized-init ALS: rank-one power iterations from `cfg.restarts`
/// random starts, clustered into component candidates, then refined with
/// `als_refine`. Fails with a clustering error when fewer than r clusters
/// emerge; a larger restart count usually fixes that.
pub fn als_randomized(
    t: &DenseTensor,
    r: usize,
    cfg: &ALSConfig,
    rng: &mut StreamRng,
) -> Result<(CPDecomposition, FitTrace)> {
    cfg.validate(r)?;
    let init = cluster_init(t, r, cfg, rng)?;
    als_refine(t, r, &init, cfg)
}

/// Alternating least squares from a given warm start: per mode, the exact
/// least-squares update against the Khatri-Rao combination of the other
/// modes, columns renormalized into the factors. Weights are refit over all
/// modes at the end.
pub fn als_refine(
    t: &DenseTensor,
    r: usize,
    init: &[Matrix],
    cfg: &ALSConfig,
) -> Result<(CPDecomposition, FitTrace)> {
    cfg.validate_refine()?;
    let n = t.order();
    check_init(init, t.shape(), r)?;

    let mut factors: Vec<Matrix> = init.to_vec();
    let mut grams: Vec<Matrix> = factors.iter().map(Matrix::gram).collect();
    let mut entries = Vec::new();
    let mut stop = StopReason::MaxSweeps;
    let mut sweeps_used = cfg.max_sweeps;

    for m in 1..=cfg.max_sweeps {
        let mut sweep_max = 0.0f64;
        for k in 0..n {
            let g = hadamard_except(&grams, Some(k));
            let ginv = spd_inverse_with_fallback(&g)?;
            let mut c = Matrix::zeros(t.shape()[k], r);
            for j in 0..r {
                let assign: Vec<(usize, &[f64])> = (0..n)
                    .filter(|&l| l != k)
                    .map(|l| (l + 1, factors[l].col(j)))
                    .collect();
                let col = t.contract_modes(&assign)?.into_data();
                c.set_col(j, &col);
            }
            let x = c.matmul(&ginv)?;
            let mut mode_max = 0.0f64;
            for j in 0..r {
                let mut col = x.col(j).to_vec();
                let len = norm2(&col);
                if len < 1e-300 {
                    return Err(Error::Degenerate {
                        what: "least-squares column",
                        sweep: m,
                        component: j + 1,
                        mode: k + 1,
                    });
                }
                for v in col.iter_mut() {
                    *v /= len;
                }
                if dot(&col, factors[k].col(j)) < 0.0 {
                    for v in col.iter_mut() {
                        *v = -*v;
                    }
                }
                let upd = (1.0 - dot(&col, factors[k].col(j)).powi(2)).max(0.0).sqrt();
                mode_max = mode_max.max(upd);
                factors[k].set_col(j, &col);
            }
            grams[k] = factors[k].gram();
            sweep_max = sweep_max.max(mode_max);
            entries.push(TraceEntry {
                sweep: m,
                mode: k + 1,
                max_update: mode_max,
                max_true_error: None,
            });
        }
        if sweep_max <= cfg.tolerance {
            stop = StopReason::Tolerance;
            sweeps_used = m;
            break;
        }
    }

    let weights = fit_weights(t, &mut factors)?;
    let estimate = sorted_estimate(weights, factors, false)?;
    Ok((
        estimate,
        FitTrace {
            entries,
            sweeps_used,
            stop,
        },
    ))
}

/// Least-squares weights for fixed unit factors; negative solutions flip
/// the mode-1 column so the returned weights are nonnegative.
fn fit_weights(t: &DenseTensor, factors: &mut [Matrix]) -> Result<Vec<f64>> {
    let n = factors.len();
    let r = factors[0].cols();
    let grams: Vec<Matrix> = factors.iter().map(Matrix::gram).collect();
    let g = hadamard_except(&grams, None);
    let mut c = Vec::with_capacity(r);
    for j in 0..r {
        let assign: Vec<(usize, &[f64])> =
            (0..n).map(|l| (l + 1, factors[l].col(j))).collect();
        c.push(t.contract_modes(&assign)?.scalar_value()?);
    }
    let ginv = spd_inverse_with_fallback(&g)?;
    let mut w = ginv.matvec(&c)?;
    for j in 0..r {
        if w[j] < 0.0 {
            w[j] = -w[j];
            for i in 0..factors[0].rows() {
                let v = -factors[0].get(i, j);
                factors[0].set(i, j, v);
            }
        }
    }
    Ok(w)
}

/// Hadamard product of the per-mode Grams, skipping one mode if given.
fn hadamard_except(grams: &[Matrix], skip: Option<usize>) -> Matrix {
    let r = grams[0].rows();
    let mut g = Matrix::zeros(r, r);
    for i in 0..r {
        for j in 0..r {
            g.set(i, j, 1.0);
        }
    }
    for (l, gl) in grams.iter().enumerate() {
        if Some(l) == skip {
            continue;
        }
        for i in 0..r {
            for j in 0..r {
                g.set(i, j, g.get(i, j) * gl.get(i, j));
            }
        }
    }
    g
}

/// Symmetric positive-definite inverse through the eigendecomposition; on
/// ill-conditioning, retries once with a small trace-scaled ridge so a
/// transiently collapsed pair of components does not abort the sweep.
fn spd_inverse_with_fallback(g: &Matrix) -> Result<Matrix> {
    match spd_inverse(g, 0.0) {
        Ok(x) => Ok(x),
        Err(Error::IllConditioned { .. }) => {
            let r = g.rows();
            let trace: f64 = (0..r).map(|i| g.get(i, i)).sum();
            spd_inverse(g, 1e-10 * trace / r as f64)
        }
        Err(e) => Err(e),
    }
}

fn spd_inverse(g: &Matrix, ridge: f64) -> Result<Matrix> {
    let r = g.rows();
    let eig = top_eigs_sym(g, r, SOLVE_TOL)?;
    let max_eig = eig.values[0] + ridge;
    let min_eig = eig.values[r - 1] + ridge;
    if min_eig <= 0.0 || max_eig / min_eig > 1e12 {
        return Err(Error::IllConditioned { min_eig });
    }
    let mut out = Matrix::zeros(r, r);
    for l in 0..r {
        let inv = 1.0 / (eig.values[l] + ridge);
        let v = eig.vectors.col(l);
        for i in 0..r {
            for j in 0..r {
                out.set(i, j, out.get(i, j) + inv * v[i] * v[j]);
            }
        }
    }
    Ok(out)
}

/// One rank-one power-iteration restart; None when a contraction collapses.
fn power_rank_one(
    t: &DenseTensor,
    iters: usize,
    rng: &mut StreamRng,
) -> Option<(Vec<Vec<f64>>, f64)> {
    let n = t.order();
    let mut vs: Vec<Vec<f64>> = t.shape().iter().map(|&d| rng.unit_vector(d)).collect();
    for _ in 0..iters {
        for k in 0..n {
            let assign: Vec<(usize, &[f64])> = (0..n)
                .filter(|&l| l != k)
                .map(|l| (l + 1, vs[l].as_slice()))
                .collect();
            let mut w = t.contract_modes(&assign).ok()?.into_data();
            let len = norm2(&w);
            if len < 1e-300 {
                return None;
            }
            for x in w.iter_mut() {
                *x /= len;
            }
            vs[k] = w;
        }
    }
    let assign: Vec<(usize, &[f64])> =
        (0..n).map(|l| (l + 1, vs[l].as_slice())).collect();
    let strength = t.contract_modes(&assign).ok()?.scalar_value().ok()?;
    Some((vs, strength))
}

/// Cluster the restart outcomes by mean-mode |cosine| and build one init
/// column per cluster from the r largest clusters.
fn cluster_init(
    t: &DenseTensor,
    r: usize,
    cfg: &ALSConfig,
    rng: &mut StreamRng,
) -> Result<Vec<Matrix>> {
    let n = t.order();
    let mut cands: Vec<(Vec<Vec<f64>>, f64)> = Vec::with_capacity(cfg.restarts);
    for _ in 0..cfg.restarts {
        if let Some(c) = power_rank_one(t, cfg.power_iters, rng) {
            cands.push(c);
        }
    }
    if cands.len() < r {
        return Err(Error::ClusteringFailed {
            found: cands.len(),
            rank: r,
        });
    }

    let mut parent: Vec<usize> = (0..cands.len()).collect();
    fn find(parent: &mut Vec<usize>, mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..cands.len() {
        for j in i + 1..cands.len() {
            let sim: f64 = (0..n)
                .map(|k| dot(&cands[i].0[k], &cands[j].0[k]).abs())
                .sum::<f64>()
                / n as f64;
            if sim >= cfg.cluster_threshold {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut root_slot: Vec<Option<usize>> = vec![None; cands.len()];
    for i in 0..cands.len() {
        let root = find(&mut parent, i);
        match root_slot[root] {
            Some(s) => groups[s].push(i),
            None => {
                root_slot[root] = Some(groups.len());
                groups.push(vec![i]);
            }
        }
    }
    if groups.len() < r {
        return Err(Error::ClusteringFailed {
            found: groups.len(),
            rank: r,
        });
    }
    // largest clusters first; break ties by strength, then first appearance
    groups.sort_by(|a, b| {
        let sa = a.iter().map(|&i| cands[i].1.abs()).fold(0.0f64, f64::max);
        let sb = b.iter().map(|&i| cands[i].1.abs()).fold(0.0f64, f64::max);
        b.len()
            .cmp(&a.len())
            .then(sb.total_cmp(&sa))
            .then(a[0].cmp(&b[0]))
    });

    let mut init: Vec<Matrix> = t
        .shape()
        .iter()
        .map(|&d| Matrix::zeros(d, r))
        .collect();
    for (slot, group) in groups.iter().take(r).enumerate() {
        for k in 0..n {
            let reference = &cands[group[0]].0[k];
            let mut stacked = Matrix::zeros(reference.len(), group.len());
            for (col, &idx) in group.iter().enumerate() {
                let mut v = cands[idx].0[k].clone();
                if dot(&v, reference) < 0.0 {
                    for x in v.iter_mut() {
                        *x = -*x;
                    }
                }
                stacked.set_col(col, &v);
            }
            let centroid = top_left_singular(&stacked)?;
            init[k].set_col(slot, &centroid);
        }
    }
    Ok(init)
}
