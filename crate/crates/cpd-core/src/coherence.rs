//! Coherence diagnostics, component matching, rate formulas, and
//! iteration-count calculators.
//!
//! The central objects are the mode-k Gram matrices of the factor columns.
//! Their off-diagonal maxima (theta_k), orthonormality defects (delta_k), and
//! off-diagonal row norms (eta_jk) combine into composite quantities over any
//! grouped mode subset, because the Gram matrix of a Khatri-Rao product is
//! the Hadamard product of the per-mode Gram matrices. The composite defect
//! delta_S admits three upper bounds in terms of per-mode quantities; the
//! report carries each bound with its slack.

use crate::error::{Error, Result};
use crate::model::CPDecomposition;
use crate::spectral;
use crate::tensor::{dot, norm2, Matrix};
use serde::Serialize;
use serde_json::{json, Value};

const UNIT_TOL: f64 = 1e-8;

/// Mode-coupling regime selector for the convergence-rate calculators: the
/// symmetric variant covers covariance tensors of order 2K driven by K
/// distinct modes, the general variant covers arbitrary order-N tensors.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    Symmetric,
    General,
}

/// Absolute sine of the angle between two unit vectors, equal to the
/// spectral norm of the difference of their rank-one projectors.
///
/// Evaluated as the norm of the orthogonal residual when the cosine is
/// large; the naive sqrt(1 - c^2) loses half the significant digits near
/// parallel vectors and would floor the achievable accuracy near 1e-8.
pub fn sin_theta(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::ShapeMismatch(format!(
            "angle between lengths {} and {}",
            u.len(),
            v.len()
        )));
    }
    let nu = norm2(u);
    let nv = norm2(v);
    if (nu - 1.0).abs() > UNIT_TOL || (nv - 1.0).abs() > UNIT_TOL {
        return Err(Error::InvalidArgument(format!(
            "sin_theta needs unit vectors, got norms {nu} and {nv}"
        )));
    }
    let c = dot(u, v) / (nu * nv);
    if c.abs() > 0.7 {
        let mut s2 = 0.0;
        for (x, y) in u.iter().zip(v.iter()) {
            let w = x / nu - c * y / nv;
            s2 += w * w;
        }
        Ok(s2.sqrt().min(1.0))
    } else {
        Ok((1.0 - c * c).max(0.0).sqrt())
    }
}

/// Coherence diagnostics for one factor set and one grouped mode subset.
#[derive(Clone, Debug, Serialize)]
pub struct CoherenceReport {
    /// Max absolute off-diagonal Gram entry per mode.
    pub theta_k: Vec<f64>,
    /// Orthonormality defect per mode.
    pub delta_k: Vec<f64>,
    /// Off-diagonal Gram row norms, r x K.
    pub eta: Matrix,
    /// Composite coherence over all modes.
    pub theta: f64,
    /// Composite defect over all modes.
    pub delta: f64,
    /// The requested subset, 1-based and sorted.
    pub subset: Vec<usize>,
    pub theta_s: f64,
    pub delta_s: f64,
    /// Leave-two-out mutual coherence of the subset, clamped below at 1.
    pub mu_s: f64,
    /// First bound: min over the subset of delta_k.
    pub bound_min_mode_delta: f64,
    /// Second bound: (r-1) theta_S, and its product-form relaxation.
    pub bound_theta: f64,
    pub bound_theta_product: f64,
    /// Third bound: mu_S r^{1-|S|/2} max_j prod eta_jk, and its relaxation.
    pub bound_eta: f64,
    pub bound_delta_product: f64,
    pub slack_min_mode_delta: f64,
    pub slack_theta: f64,
    pub slack_eta: f64,
}

fn sym_spectral_radius(m: &Matrix) -> Result<f64> {
    let eig = spectral::top_eigs_sym(m, m.rows(), 1e-12)?;
    let hi = eig.values[0].abs();
    let lo = eig.values[m.rows() - 1].abs();
    Ok(hi.max(lo))
}

fn hadamard_gram(grams: &[Matrix], subset: &[usize]) -> Matrix {
    let r = grams[0].rows();
    let mut g = Matrix::zeros(r, r);
    for x in g.data_mut().iter_mut() {
        *x = 1.0;
    }
    for &k in subset {
        for (x, y) in g.data_mut().iter_mut().zip(grams[k - 1].data().iter()) {
            *x *= y;
        }
    }
    g
}

fn off_diag_max(g: &Matrix) -> f64 {
    let r = g.rows();
    let mut m = 0.0f64;
    for j in 0..r {
        for i in 0..r {
            if i != j {
                m = m.max(g.get(i, j).abs());
            }
        }
    }
    m
}

fn defect(g: &Matrix) -> Result<f64> {
    let mut d = g.clone();
    for i in 0..d.rows() {
        let v = d.get(i, i) - 1.0;
        d.set(i, i, v);
    }
    sym_spectral_radius(&d)
}

/// Leave-two-out mutual coherence of the subset. Components orthogonal to
/// all others in some subset mode contribute zero row sums and are skipped;
/// subsets of size at most two give an empty leave-two-out product. The
/// result is clamped below at 1, its documented floor: the literal scan can
/// dip below 1 for |S| >= 4 while every bound using it stays valid, since
/// enlarging mu only loosens them.
fn mutual_coherence(grams: &[Matrix], eta: &Matrix, subset: &[usize]) -> f64 {
    let r = grams[0].rows();
    if subset.len() <= 2 || r < 2 {
        return 1.0;
    }
    let mut best_j = f64::NEG_INFINITY;
    for j in 0..r {
        if subset.iter().any(|&k| eta.get(j, k - 1) <= 0.0) {
            continue;
        }
        let mut best_pair = f64::INFINITY;
        for (p1, &k1) in subset.iter().enumerate() {
            for &k2 in subset.iter().skip(p1 + 1) {
                let mut worst_i = 0.0f64;
                for i in 0..r {
                    if i == j {
                        continue;
                    }
                    let mut prod = 1.0;
                    for &k in subset {
                        if k == k1 || k == k2 {
                            continue;
                        }
                        prod *= (r as f64).sqrt() * grams[k - 1].get(i, j).abs()
                            / eta.get(j, k - 1);
                    }
                    worst_i = worst_i.max(prod);
                }
                best_pair = best_pair.min(worst_i);
            }
        }
        best_j = best_j.max(best_pair);
    }
    if best_j.is_finite() {
        best_j.max(1.0)
    } else {
        1.0
    }
}

/// Full coherence diagnostics for the factor set, with composite quantities
/// for the requested subset (1-based modes; the full mode set is allowed).
pub fn coherence_report(factors: &[Matrix], subset: &[usize]) -> Result<CoherenceReport> {
    if factors.is_empty() {
        return Err(Error::InvalidArgument("no factor matrices".into()));
    }
    let kk = factors.len();
    let r = factors[0].cols();
    for (k, a) in factors.iter().enumerate() {
        if a.cols() != r {
            return Err(Error::ShapeMismatch(format!(
                "mode {} has {} columns, expected {r}",
                k + 1,
                a.cols()
            )));
        }
        for j in 0..r {
            let nrm = norm2(a.col(j));
            if (nrm - 1.0).abs() > UNIT_TOL {
                return Err(Error::InvalidArgument(format!(
                    "mode {} column {} has norm {nrm}",
                    k + 1,
                    j + 1
                )));
            }
        }
    }
    if subset.is_empty() {
        return Err(Error::InvalidArgument("empty mode subset".into()));
    }
    let mut subset: Vec<usize> = subset.to_vec();
    subset.sort_unstable();
    subset.dedup();
    if subset[0] == 0 || subset[subset.len() - 1] > kk {
        return Err(Error::ModeOutOfRange {
            mode: *subset.last().unwrap(),
            order: kk,
        });
    }

    let grams: Vec<Matrix> = factors.iter().map(|a| a.gram()).collect();
    let theta_k: Vec<f64> = grams.iter().map(off_diag_max).collect();
    let delta_k: Vec<f64> = grams.iter().map(defect).collect::<Result<_>>()?;
    let mut eta = Matrix::zeros(r, kk);
    for (k, g) in grams.iter().enumerate() {
        for j in 0..r {
            let mut s = 0.0;
            for i in 0..r {
                if i != j {
                    s += g.get(i, j) * g.get(i, j);
                }
            }
            eta.set(j, k, s.sqrt());
        }
    }

    let all: Vec<usize> = (1..=kk).collect();
    let g_all = hadamard_gram(&grams, &all);
    let theta = off_diag_max(&g_all);
    let delta = defect(&g_all)?;

    let g_s = hadamard_gram(&grams, &subset);
    let theta_s = off_diag_max(&g_s);
    let delta_s = defect(&g_s)?;
    let mu_s = mutual_coherence(&grams, &eta, &subset);

    let rf = r as f64;
    let bound_min_mode_delta = subset
        .iter()
        .map(|&k| delta_k[k - 1])
        .fold(f64::INFINITY, f64::min);
    let bound_theta = (rf - 1.0) * theta_s;
    let bound_theta_product =
        (rf - 1.0) * subset.iter().map(|&k| theta_k[k - 1]).product::<f64>();
    let scale = mu_s * rf.powf(1.0 - subset.len() as f64 / 2.0);
    let max_eta_prod = (0..r)
        .map(|j| subset.iter().map(|&k| eta.get(j, k - 1)).product::<f64>())
        .fold(0.0f64, f64::max);
    let bound_eta = scale * max_eta_prod;
    let bound_delta_product =
        scale * subset.iter().map(|&k| delta_k[k - 1]).product::<f64>();

    Ok(CoherenceReport {
        slack_min_mode_delta: bound_min_mode_delta - delta_s,
        slack_theta: bound_theta - delta_s,
        slack_eta: bound_eta - delta_s,
        theta_k,
        delta_k,
        eta,
        theta,
        delta,
        subset,
        theta_s,
        delta_s,
        mu_s,
        bound_min_mode_delta,
        bound_theta,
        bound_theta_product,
        bound_eta,
        bound_delta_product,
    })
}

/// Matched comparison of an estimated decomposition against the truth.
#[derive(Clone, Debug, Serialize)]
pub struct MatchResult {
    /// Estimated component assigned to each truth component.
    pub permutation: Vec<usize>,
    /// Sine-theta error per (truth component, mode), r x K.
    pub errors: Matrix,
    /// Max of `errors`.
    pub max_error: f64,
    /// |matched weight / true weight - 1| per truth component.
    pub weight_rel_errors: Vec<f64>,
    /// Total assignment cost sum_j (1 - mean_k |cos|).
    pub total_cost: f64,
}

/// Optimal component assignment minimizing sum_j (1 - mean_k |cos_jk|),
/// exhaustive for r <= 6 and by shortest augmenting paths above, followed by
/// per-(component, mode) sine-theta errors under that assignment.
pub fn match_components(est: &CPDecomposition, truth: &CPDecomposition) -> Result<MatchResult> {
    if est.rank() != truth.rank() {
        return Err(Error::ShapeMismatch(format!(
            "rank {} vs {}",
            est.rank(),
            truth.rank()
        )));
    }
    if est.factors().len() != truth.factors().len() {
        return Err(Error::ShapeMismatch(format!(
            "{} modes vs {}",
            est.factors().len(),
            truth.factors().len()
        )));
    }
    for (a, b) in est.factors().iter().zip(truth.factors().iter()) {
        if a.rows() != b.rows() {
            return Err(Error::ShapeMismatch(format!(
                "mode dimension {} vs {}",
                a.rows(),
                b.rows()
            )));
        }
    }
    let r = truth.rank();
    let kk = truth.factors().len();
    // cost[e][t] = 1 - mean_k |est_e . truth_t|
    let mut cost = Matrix::zeros(r, r);
    for t in 0..r {
        for e in 0..r {
            let mut mean = 0.0;
            for k in 0..kk {
                mean += dot(est.factors()[k].col(e), truth.factors()[k].col(t)).abs();
            }
            cost.set(e, t, 1.0 - mean / kk as f64);
        }
    }
    let permutation = if r <= 6 {
        assign_exhaustive(&cost)
    } else {
        assign_hungarian(&cost)
    };
    let total_cost = (0..r).map(|t| cost.get(permutation[t], t)).sum();
    let mut errors = Matrix::zeros(r, kk);
    let mut max_error = 0.0f64;
    for t in 0..r {
        for k in 0..kk {
            let s = sin_theta(
                est.factors()[k].col(permutation[t]),
                truth.factors()[k].col(t),
            )?;
            errors.set(t, k, s);
            max_error = max_error.max(s);
        }
    }
    let weight_rel_errors: Vec<f64> = (0..r)
        .map(|t| (est.weights()[permutation[t]] / truth.weights()[t] - 1.0).abs())
        .collect();
    Ok(MatchResult {
        permutation,
        errors,
        max_error,
        weight_rel_errors,
        total_cost,
    })
}

fn assign_exhaustive(cost: &Matrix) -> Vec<usize> {
    let r = cost.rows();
    let mut perm: Vec<usize> = (0..r).collect();
    let mut best = perm.clone();
    let mut best_cost = f64::INFINITY;
    // Heap's algorithm
    let mut c = vec![0usize; r];
    let eval = |p: &[usize], best: &mut Vec<usize>, best_cost: &mut f64| {
        let total: f64 = (0..r).map(|t| cost.get(p[t], t)).sum();
        if total < *best_cost {
            *best_cost = total;
            best.clone_from_slice(p);
        }
    };
    eval(&perm, &mut best, &mut best_cost);
    let mut i = 0;
    while i < r {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            eval(&perm, &mut best, &mut best_cost);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    best
}

/// Shortest-augmenting-path assignment (O(r^3)).
fn assign_hungarian(cost: &Matrix) -> Vec<usize> {
    let n = cost.rows();
    // potentials and matching, 1-based with a dummy 0 slot
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut matched = vec![0usize; n + 1]; // column -> row
    for i in 1..=n {
        matched[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost.get(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched[j0] = matched[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0usize; n];
    for j in 1..=n {
        perm[j - 1] = matched[j] - 1;
    }
    perm
}

/// Inputs for [`snr_and_rates`]. `dims` are the distinct tensor mode sizes
/// (the K sample modes for the covariance model, all N modes otherwise);
/// `delta_max` is the largest per-mode orthonormality defect, which the
/// closed forms need but the raw model parameters do not determine.
#[derive(Clone, Debug)]
pub struct RateParams<'a> {
    pub lambdas: &'a [f64],
    pub sigma: f64,
    pub n: usize,
    pub dims: &'a [usize],
    pub psi0: f64,
    pub c0: f64,
    pub delta_max: f64,
}

/// Closed-form signal-to-noise and convergence-rate quantities. Matrices are
/// r x K over (component, mode). Quantities that presuppose a positive
/// contraction margin are +inf when alpha (or its general-model analogue)
/// is nonpositive.
#[derive(Clone, Debug)]
pub struct RateBundle {
    pub snr: f64,
    pub r_eff: f64,
    pub r0: f64,
    pub alpha: f64,
    pub alpha_star: f64,
    pub c0_alpha: f64,
    pub rho: f64,
    pub rho1: f64,
    pub rho_star: f64,
    pub phi0: f64,
    pub phi0_star: f64,
    pub r_ideal: Matrix,
    pub r_ideal_phi: Matrix,
    pub r_star: Matrix,
    pub r_star_phi: Matrix,
    pub eps: Matrix,
    pub eps_star: Matrix,
}

fn json_num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x.is_nan() {
        json!("nan")
    } else if x > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

fn json_matrix(m: &Matrix) -> Value {
    let rows: Vec<Value> = (0..m.rows())
        .map(|i| Value::Array((0..m.cols()).map(|j| json_num(m.get(i, j))).collect()))
        .collect();
    Value::Array(rows)
}

impl RateBundle {
    /// JSON rendering with non-finite values as strings, which plain float
    /// serialization cannot represent.
    pub fn to_json(&self) -> Value {
        json!({
            "snr": json_num(self.snr),
            "r_eff": json_num(self.r_eff),
            "r0": json_num(self.r0),
            "alpha": json_num(self.alpha),
            "alpha_star": json_num(self.alpha_star),
            "c0_alpha": json_num(self.c0_alpha),
            "rho": json_num(self.rho),
            "rho1": json_num(self.rho1),
            "rho_star": json_num(self.rho_star),
            "phi0": json_num(self.phi0),
            "phi0_star": json_num(self.phi0_star),
            "r_ideal": json_matrix(&self.r_ideal),
            "r_ideal_phi": json_matrix(&self.r_ideal_phi),
            "r_star": json_matrix(&self.r_star),
            "r_star_phi": json_matrix(&self.r_star_phi),
            "eps": json_matrix(&self.eps),
            "eps_star": json_matrix(&self.eps_star),
        })
    }
}

/// Evaluates every closed-form rate quantity for one model configuration.
pub fn snr_and_rates(p: &RateParams) -> Result<RateBundle> {
    let r = p.lambdas.len();
    if r == 0 {
        return Err(Error::InvalidArgument("no weights".into()));
    }
    for w in p.lambdas.windows(2) {
        if w[1] > w[0] {
            return Err(Error::InvalidArgument(
                "weights not sorted descending".into(),
            ));
        }
    }
    if !(p.lambdas[r - 1] > 0.0) {
        return Err(Error::InvalidArgument("weights must be positive".into()));
    }
    if !(p.sigma >= 0.0) || !p.sigma.is_finite() {
        return Err(Error::InvalidArgument(format!("sigma {}", p.sigma)));
    }
    if p.n == 0 || p.dims.len() < 2 || p.dims.iter().any(|&d| d == 0) {
        return Err(Error::InvalidArgument(
            "need n >= 1 and at least two nonzero dims".into(),
        ));
    }
    if !(p.psi0 > 0.0 && p.psi0 < 1.0) {
        return Err(Error::InvalidArgument(format!("psi0 {}", p.psi0)));
    }
    if !(p.c0 >= 1.0) {
        return Err(Error::InvalidArgument(format!("c0 {}", p.c0)));
    }
    if !(0.0..=1.0).contains(&p.delta_max) {
        return Err(Error::InvalidArgument(format!(
            "delta_max {}",
            p.delta_max
        )));
    }

    let kk = p.dims.len();
    let rf = r as f64;
    let nf = p.n as f64;
    let d: f64 = p.dims.iter().map(|&x| x as f64).product();
    let lam1 = p.lambdas[0];
    let lam_r = p.lambdas[r - 1];
    let r_eff = p.lambdas.iter().sum::<f64>() / lam1;
    let snr = if p.sigma == 0.0 {
        f64::INFINITY
    } else {
        p.lambdas.iter().sum::<f64>() / (p.sigma * p.sigma * d)
    };
    let inv_snr = if snr.is_finite() { 1.0 / snr } else { 0.0 };
    let r0 = ((r_eff / nf) * (1.0 + inv_snr) * (1.0 + (r_eff / d) * inv_snr)).sqrt();

    // per-(component, mode) ideal rates
    let mut r_ideal = Matrix::zeros(r, kk);
    let mut r_star = Matrix::zeros(r, kk);
    for j in 0..r {
        let lam = p.lambdas[j];
        for k in 0..kk {
            let dk = p.dims[k] as f64;
            r_ideal.set(
                j,
                k,
                (p.sigma * p.sigma / lam + p.sigma / lam.sqrt()) * (dk / nf).sqrt(),
            );
            r_star.set(j, k, p.sigma * dk.sqrt() / lam);
        }
    }
    let row_sum = |m: &Matrix, j: usize| -> f64 { (0..kk).map(|k| m.get(j, k)).sum() };
    // phi-inflated rates: the covariance form adds the other modes, the
    // general form adds all modes
    let with_phi = |base: &Matrix, phi: f64, include_self: bool| -> Matrix {
        let w = phi.min(1.0);
        let mut m = Matrix::zeros(r, kk);
        for j in 0..r {
            let total = row_sum(base, j);
            for k in 0..kk {
                let extra = if include_self {
                    total
                } else {
                    total - base.get(j, k)
                };
                m.set(j, k, base.get(j, k) + w * extra);
            }
        }
        m
    };

    let sqrt_gap = (1.0 - p.delta_max).sqrt();
    let quarter = (1.0 - 1.0 / (4.0 * rf)).sqrt();
    let alpha = sqrt_gap - (rf.sqrt() + 1.0) * p.psi0 / quarter;
    let alpha_star = sqrt_gap - (rf.sqrt() + 1.0) * p.psi0;

    let (c0_alpha, rho, rho1, phi0) = if alpha > 0.0 {
        let c0a = p.c0 * alpha.powi(2 - 2 * kk as i32);
        let rho = c0a * (lam1 / lam_r) * p.psi0.powi(2 * kk as i32 - 3);
        let rho1 = c0a * ((lam1 / lam_r) * rf / nf).sqrt() * p.psi0.powi(kk as i32 - 2);
        // R_{rK,1}: worst component, last mode, phi = 1
        let r_rk1 = r_ideal.get(r - 1, kk - 1) + (row_sum(&r_ideal, r - 1) - r_ideal.get(r - 1, kk - 1));
        let phi0 = c0a * (2.0 * rf / (1.0 - 1.0 / (4.0 * rf))).sqrt() * r_rk1;
        (c0a, rho, rho1, phi0)
    } else {
        (f64::INFINITY, f64::INFINITY, f64::INFINITY, f64::INFINITY)
    };
    let (rho_star, phi0_star) = if alpha_star > 0.0 {
        let rho_star = 6.0
            * alpha_star.powi(1 - kk as i32)
            * (rf - 1.0).max(0.0).sqrt()
            * (lam1 / lam_r)
            * p.psi0.powi(kk as i32 - 2);
        let r_rn1 = r_star.get(r - 1, kk - 1) + row_sum(&r_star, r - 1);
        let phi0_star = (kk as f64 - 1.0) / alpha_star * (2.0 * rf).sqrt() * r_rn1;
        (rho_star, phi0_star)
    } else {
        (f64::INFINITY, f64::INFINITY)
    };

    let r_ideal_phi = with_phi(&r_ideal, if phi0.is_finite() { phi0 } else { 1.0 }, false);
    let r_star_phi = with_phi(
        &r_star,
        if phi0_star.is_finite() { phi0_star } else { 1.0 },
        true,
    );
    let scale_matrix = |m: &Matrix, s: f64| -> Matrix {
        if s.is_finite() {
            m.scaled(s)
        } else {
            let mut out = Matrix::zeros(m.rows(), m.cols());
            for x in out.data_mut().iter_mut() {
                *x = f64::INFINITY;
            }
            out
        }
    };
    let eps = scale_matrix(&r_ideal_phi, c0_alpha);
    let eps_star = scale_matrix(
        &r_star_phi,
        if alpha_star > 0.0 {
            6.0 * alpha_star.powi(1 - kk as i32)
        } else {
            f64::INFINITY
        },
    );

    Ok(RateBundle {
        snr,
        r_eff,
        r0,
        alpha,
        alpha_star,
        c0_alpha,
        rho,
        rho1,
        rho_star,
        phi0,
        phi0_star,
        r_ideal,
        r_ideal_phi,
        r_star,
        r_star_phi,
        eps,
        eps_star,
    })
}

/// Root of the convergence-exponent polynomial: gamma^K - 3 gamma^{K-1} + 2
/// in (3 - 3/K, 3) for the symmetric regime (order >= 2), and
/// gamma^N - 2 gamma^{N-1} + 1 in (2 - 2/N, 2) for the general regime
/// (order >= 3, where the bracket stays away from the trivial root at 1).
pub fn gamma_root(order: usize, regime: Regime) -> Result<f64> {
    let min_order = match regime {
        Regime::Symmetric => 2,
        Regime::General => 3,
    };
    if order < min_order {
        return Err(Error::InvalidArgument(format!(
            "order {order} below minimum {min_order}"
        )));
    }
    let nf = order as f64;
    let (mut lo, mut hi): (f64, f64) = match regime {
        Regime::Symmetric => (3.0 - 3.0 / nf, 3.0),
        Regime::General => (2.0 - 2.0 / nf, 2.0),
    };
    let p = |g: f64| -> f64 {
        match regime {
            Regime::Symmetric => g.powi(order as i32) - 3.0 * g.powi(order as i32 - 1) + 2.0,
            Regime::General => g.powi(order as i32) - 2.0 * g.powi(order as i32 - 1) + 1.0,
        }
    };
    debug_assert!(p(lo) < 0.0 && p(hi) > 0.0);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if p(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Iterations needed to push the refinement error from psi0 below eps under
/// per-sweep contraction rho: ceil(order^{-1} (1 + log(log(psi0/eps) /
/// log(1/rho)) / log gamma)), clamped below at one sweep.
pub fn iteration_bound(
    psi0: f64,
    eps: f64,
    rho: f64,
    order: usize,
    regime: Regime,
) -> Result<usize> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidArgument(format!("rho {rho} outside (0,1)")));
    }
    if !(eps > 0.0 && eps < psi0 && psi0 < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < eps < psi0 < 1, got eps {eps}, psi0 {psi0}"
        )));
    }
    let gamma = gamma_root(order, regime)?;
    let inner = (psi0 / eps).ln() / (1.0 / rho).ln();
    let m = (1.0 + inner.ln() / gamma.ln()) / order as f64;
    Ok((m.ceil().max(1.0)) as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::gen_basis;
    use crate::rng::StreamRng;

    fn e(d: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        v
    }

    #[test]
    fn sin_theta_reference_angles() {
        let e1 = e(3, 0);
        let e2 = e(3, 1);
        assert_eq!(sin_theta(&e1, &e1).unwrap(), 0.0);
        assert_eq!(sin_theta(&e1, &e2).unwrap(), 1.0);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let diag = vec![s, s, 0.0];
        let got = sin_theta(&e1, &diag).unwrap();
        assert!((got - s).abs() < 1e-12, "45 degrees: {got}");
        // sign invariance
        let neg: Vec<f64> = diag.iter().map(|x| -x).collect();
        assert!((sin_theta(&e1, &neg).unwrap() - got).abs() < 1e-15);
        // non-unit input is an error
        assert!(sin_theta(&[2.0, 0.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn sin_theta_is_stable_near_parallel() {
        // a vector 1e-9 away in angle: the naive formula would floor near
        // the square root of machine epsilon
        let eps = 1e-9;
        let u = vec![1.0, 0.0];
        let v = vec![(1.0 - eps * eps / 2.0), eps];
        let nv = norm2(&v);
        let v: Vec<f64> = v.iter().map(|x| x / nv).collect();
        let got = sin_theta(&u, &v).unwrap();
        assert!(
            (got - eps).abs() < 1e-15 + eps * 1e-6,
            "tiny angle: {got} vs {eps}"
        );
    }

    #[test]
    fn orthonormal_factors_have_zero_coherence() {
        let mut rng = StreamRng::from_seed(101);
        let factors: Vec<Matrix> = (0..3)
            .map(|_| gen_basis(7, 3, 0.0, &mut rng).unwrap())
            .collect();
        let rep = coherence_report(&factors, &[1, 2, 3]).unwrap();
        for k in 0..3 {
            assert!(rep.theta_k[k] < 1e-10);
            assert!(rep.delta_k[k] < 1e-10);
        }
        assert!(rep.theta < 1e-10);
        assert!(rep.delta < 1e-10);
        // Gram noise at machine precision keeps the ratios defined, so mu
        // lands somewhere in its documented range rather than exactly at 1
        assert!(rep.mu_s >= 1.0 && rep.mu_s <= 3f64.sqrt() + 1e-9);
    }

    #[test]
    fn two_mode_cosine_example() {
        // r = 2, two modes, both pairwise cosines 0.3: composite coherence
        // is 0.09 and equals the defect at rank 2
        let c: f64 = 0.3;
        let col2 = vec![c, (1.0 - c * c).sqrt()];
        let a = Matrix::from_cols(2, &[&[1.0, 0.0], &col2]).unwrap();
        let rep = coherence_report(&[a.clone(), a], &[1, 2]).unwrap();
        assert!((rep.theta_k[0] - 0.3).abs() < 1e-12);
        assert!((rep.theta - 0.09).abs() < 1e-12);
        assert!((rep.delta - 0.09).abs() < 1e-12);
        assert!((rep.delta_s - 0.09).abs() < 1e-12);
        // (r-1) theta_S = theta_S at r = 2
        assert!((rep.bound_theta - 0.09).abs() < 1e-12);
    }

    #[test]
    fn prop_bounds_hold_on_random_factors() {
        let mut rng = StreamRng::from_seed(202);
        for trial in 0..50 {
            let r = 2 + (trial % 4);
            let kk = 3 + (trial % 3);
            let factors: Vec<Matrix> = (0..kk)
                .map(|_| {
                    let mut a = Matrix::zeros(6 + r, r);
                    for j in 0..r {
                        let col = rng.unit_vector(6 + r);
                        a.set_col(j, &col);
                    }
                    a
                })
                .collect();
            let subset: Vec<usize> = (1..=kk).collect();
            let rep = coherence_report(&factors, &subset).unwrap();
            assert!(rep.slack_min_mode_delta >= -1e-9, "trial {trial}");
            assert!(rep.slack_theta >= -1e-9, "trial {trial}");
            assert!(rep.slack_eta >= -1e-9, "trial {trial}");
            assert!(rep.bound_theta <= rep.bound_theta_product + 1e-9);
            assert!(rep.bound_eta <= rep.bound_delta_product + 1e-9);
            assert!(rep.mu_s >= 1.0);
            assert!(rep.mu_s <= (r as f64).powf(kk as f64 / 2.0 - 1.0) + 1e-9);
            // the composite defect never exceeds the product of per-mode
            // defects once |S| >= 2
            let prod: f64 = rep.delta_k.iter().product();
            assert!(rep.delta <= prod + 1e-9, "trial {trial}");
        }
    }

    #[test]
    fn matching_recovers_a_permutation_with_sign_flips() {
        let mut rng = StreamRng::from_seed(303);
        let factors: Vec<Matrix> = (0..2)
            .map(|_| gen_basis(8, 3, 0.2, &mut rng).unwrap())
            .collect();
        let truth = CPDecomposition::new(vec![3.0, 2.0, 1.0], factors.clone(), false).unwrap();
        // estimate: components reordered (3,1,2) with some signs flipped
        let order = [2usize, 0, 1];
        let est_factors: Vec<Matrix> = factors
            .iter()
            .enumerate()
            .map(|(k, a)| {
                let mut m = Matrix::zeros(a.rows(), 3);
                for (newj, &oldj) in order.iter().enumerate() {
                    let sign = if (newj + k) % 2 == 0 { -1.0 } else { 1.0 };
                    let col: Vec<f64> = a.col(oldj).iter().map(|x| sign * x).collect();
                    m.set_col(newj, &col);
                }
                m
            })
            .collect();
        let est =
            CPDecomposition::new(vec![3.0, 3.0, 3.0], est_factors, false).unwrap();
        let m = match_components(&est, &truth).unwrap();
        // truth component t lives at estimate slot where order[slot] == t
        assert_eq!(m.permutation, vec![1, 2, 0]);
        assert!(m.max_error < 1e-10);
        // identity case
        let id = match_components(&truth, &truth).unwrap();
        assert_eq!(id.permutation, vec![0, 1, 2]);
        assert!(id.max_error < 1e-12);
        assert!(id.weight_rel_errors.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn matching_tracks_small_perturbations() {
        let mut rng = StreamRng::from_seed(304);
        let factors: Vec<Matrix> = (0..3)
            .map(|_| gen_basis(10, 3, 0.1, &mut rng).unwrap())
            .collect();
        let truth = CPDecomposition::new(vec![3.0, 2.0, 1.0], factors.clone(), false).unwrap();
        let perturbed: Vec<Matrix> = factors
            .iter()
            .map(|a| {
                let mut m = a.clone();
                for j in 0..3 {
                    let mut col = m.col(j).to_vec();
                    for x in col.iter_mut() {
                        *x += 1e-3 * rng.next_gaussian() / (10f64).sqrt();
                    }
                    let nrm = norm2(&col);
                    for x in col.iter_mut() {
                        *x /= nrm;
                    }
                    m.set_col(j, &col);
                }
                m
            })
            .collect();
        let est = CPDecomposition::new(vec![3.0, 2.0, 1.0], perturbed, false).unwrap();
        let m = match_components(&est, &truth).unwrap();
        assert_eq!(m.permutation, vec![0, 1, 2]);
        assert!(m.max_error <= 2e-3, "matched error {}", m.max_error);
        assert!(m.max_error > 0.0);
    }

    #[test]
    fn hungarian_agrees_with_exhaustive_search() {
        let mut rng = StreamRng::from_seed(305);
        for _ in 0..20 {
            let n = 5;
            let mut cost = Matrix::zeros(n, n);
            for x in cost.data_mut().iter_mut() {
                *x = rng.next_f64();
            }
            let a = assign_exhaustive(&cost);
            let b = assign_hungarian(&cost);
            let ca: f64 = (0..n).map(|t| cost.get(a[t], t)).sum();
            let cb: f64 = (0..n).map(|t| cost.get(b[t], t)).sum();
            assert!((ca - cb).abs() < 1e-12, "{ca} vs {cb}");
        }
    }

    #[test]
    fn snr_matches_hand_arithmetic() {
        let p = RateParams {
            lambdas: &[4.0, 2.0, 1.0],
            sigma: 1.0,
            n: 100,
            dims: &[4, 4],
            psi0: 0.5,
            c0: 1.0,
            delta_max: 0.2,
        };
        let b = snr_and_rates(&p).unwrap();
        assert!((b.snr - 7.0 / 16.0).abs() < 1e-14);
        assert!((b.r_eff - 7.0 / 4.0).abs() < 1e-14);
        // R0 by direct evaluation
        let want = ((1.75f64 / 100.0) * (1.0 + 16.0 / 7.0)
            * (1.0 + (1.75 / 16.0) * (16.0 / 7.0)))
            .sqrt();
        assert!((b.r0 - want).abs() < 1e-14);
    }

    #[test]
    fn noiseless_rates_vanish() {
        let p = RateParams {
            lambdas: &[2.0, 2.0],
            sigma: 0.0,
            n: 50,
            dims: &[5, 6, 7],
            psi0: 0.3,
            c0: 1.0,
            delta_max: 0.1,
        };
        let b = snr_and_rates(&p).unwrap();
        assert!(b.snr.is_infinite());
        assert_eq!(b.r_eff, 2.0); // equal weights: effective rank = r
        for k in 0..3 {
            for j in 0..2 {
                assert_eq!(b.r_ideal.get(j, k), 0.0);
                assert_eq!(b.r_star.get(j, k), 0.0);
                assert_eq!(b.eps.get(j, k), 0.0);
            }
        }
        assert_eq!(b.phi0, 0.0);
        assert!((b.r0 - (2.0f64 / 50.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn collapsed_margin_reports_infinite_rates() {
        let p = RateParams {
            lambdas: &[1.0],
            sigma: 0.5,
            n: 10,
            dims: &[4, 4],
            psi0: 0.9,
            c0: 1.0,
            delta_max: 0.99,
        };
        let b = snr_and_rates(&p).unwrap();
        assert!(b.alpha < 0.0);
        assert!(b.rho.is_infinite());
        assert!(b.eps.get(0, 0).is_infinite());
        let v = b.to_json();
        assert_eq!(v["rho"], "inf");
        assert!(v["snr"].is_number());
    }

    #[test]
    fn gamma_roots_match_published_values() {
        let g3s = gamma_root(3, Regime::Symmetric).unwrap();
        let g4s = gamma_root(4, Regime::Symmetric).unwrap();
        let g3g = gamma_root(3, Regime::General).unwrap();
        let g4g = gamma_root(4, Regime::General).unwrap();
        assert!((g3s - 2.732).abs() < 5e-4);
        // the commonly printed 2.919 truncates the root 2.91964
        assert!((g4s - 2.9196395658394185).abs() < 1e-11);
        assert!((g4s - 2.919).abs() < 1e-3);
        assert!((g3g - 1.618).abs() < 5e-4);
        assert!((g4g - 1.839).abs() < 5e-4);
        // exact closed forms where available
        assert!((g3s - (1.0 + 3f64.sqrt())).abs() < 1e-11);
        assert!((gamma_root(2, Regime::Symmetric).unwrap() - 2.0).abs() < 1e-11);
        assert!((g3g - (1.0 + 5f64.sqrt()) / 2.0).abs() < 1e-11);
        // residual and bracket containment
        for (k, regime) in [
            (2, Regime::Symmetric),
            (3, Regime::Symmetric),
            (6, Regime::Symmetric),
            (3, Regime::General),
            (6, Regime::General),
        ] {
            let g = gamma_root(k, regime).unwrap();
            let (lo, hi, resid) = match regime {
                Regime::Symmetric => (
                    3.0 - 3.0 / k as f64,
                    3.0,
                    g.powi(k as i32) - 3.0 * g.powi(k as i32 - 1) + 2.0,
                ),
                Regime::General => (
                    2.0 - 2.0 / k as f64,
                    2.0,
                    g.powi(k as i32) - 2.0 * g.powi(k as i32 - 1) + 1.0,
                ),
            };
            assert!(g > lo && g < hi);
            assert!(resid.abs() < 1e-10, "residual {resid} at order {k}");
        }
        assert!(gamma_root(2, Regime::General).is_err());
    }

    #[test]
    fn iteration_bound_closed_form_case() {
        let m = iteration_bound(0.5, 1e-8, 0.5, 3, Regime::Symmetric).unwrap();
        assert_eq!(m, 2);
        // clamp to at least one sweep when eps is just below psi0
        let m1 = iteration_bound(0.5, 0.49, 0.5, 3, Regime::Symmetric).unwrap();
        assert_eq!(m1, 1);
        assert!(iteration_bound(0.5, 0.6, 0.5, 3, Regime::Symmetric).is_err());
        assert!(iteration_bound(0.5, 1e-8, 1.5, 3, Regime::Symmetric).is_err());
    }
}
